//! Regenerates the embedding fixture file used by the test suite.
//!
//! Run from the crate directory: `cargo run --example gen_fixtures`.
//! The output is deterministic, so reruns leave the file unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semlink_core::codec::EmbeddingVector;
use semlink_core::embedding_source::save_embeddings;
use std::path::Path;

const FIXTURE_SEED: u64 = 0x5EED_F00D;
const VECTORS: usize = 4;
const DIM: usize = 768;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(FIXTURE_SEED);
    let vectors: Vec<EmbeddingVector> = (0..VECTORS)
        .map(|_| {
            let values = (0..DIM)
                .map(|_| {
                    let u: f64 = rand::Rng::random(&mut rng);
                    ((2.0 * u - 1.0) * 2.0) as f32
                })
                .collect();
            EmbeddingVector::new(values).expect("finite by construction")
        })
        .collect();

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/embeddings.semb");
    std::fs::create_dir_all(path.parent().unwrap()).expect("fixture dir");
    save_embeddings(&path, &vectors).expect("write fixture");
    println!(
        "wrote {} vectors of dim {} to {}",
        VECTORS,
        DIM,
        path.display()
    );
}
