//! Embedding vector sources.
//!
//! Vectors enter the pipeline either from files (binary SEMB or plain text)
//! or from a deterministic stub projector that turns crops into embeddings
//! so the end-to-end path runs without any pretrained model.
//!
//! SEMB layout: magic `SEMB`, version byte 0x01, then one or more records of
//! a 32-bit little-endian element count followed by that many 4-byte
//! little-endian f32 values. The text form holds one value per line, with a
//! blank line starting a new vector.

use crate::codec::EmbeddingVector;
use crate::roi::{CroppedImage, CROP_SIZE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::Path;
use thiserror::Error;

pub const SEMB_MAGIC: &[u8; 4] = b"SEMB";
pub const SEMB_VERSION: u8 = 0x01;

/// Output dimension of the stub projector, matching the real encoder.
pub const EMBEDDING_DIM: usize = 768;
/// The stub reduces every crop to a 16x16 grayscale image before projecting.
pub const STUB_GRID: usize = 16;
const STUB_INPUT_DIM: usize = STUB_GRID * STUB_GRID;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: not a SEMB file")]
    BadMagic,
    #[error("unsupported SEMB version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("non-finite value in vector {vector} at element {element}")]
    NonFiniteValue { vector: usize, element: usize },
    #[error("unparseable value on line {line}: '{text}'")]
    ParseFloat { line: usize, text: String },
    #[error("file holds no vectors")]
    NoVectors,
}

/// Loads embedding vectors from a SEMB or one-value-per-line text file,
/// validating that every element is finite.
pub fn load_embeddings(path: &Path) -> Result<Vec<EmbeddingVector>, SourceError> {
    let raw = fs::read(path)?;
    if raw.starts_with(SEMB_MAGIC) {
        parse_semb(&raw)
    } else {
        let text = String::from_utf8(raw)
            .map_err(|_| SourceError::TruncatedFile("not utf-8 text".into()))?;
        parse_text(&text)
    }
}

pub fn parse_semb(raw: &[u8]) -> Result<Vec<EmbeddingVector>, SourceError> {
    if raw.len() < 4 || &raw[..4] != SEMB_MAGIC {
        return Err(SourceError::BadMagic);
    }
    if raw.len() < 5 {
        return Err(SourceError::TruncatedFile("missing version byte".into()));
    }
    if raw[4] != SEMB_VERSION {
        return Err(SourceError::UnsupportedVersion(raw[4]));
    }
    let mut pos = 5;
    let mut vectors = Vec::new();
    while pos < raw.len() {
        if raw.len() - pos < 4 {
            return Err(SourceError::TruncatedFile(format!(
                "record header cut short at byte {pos}"
            )));
        }
        let count = u32::from_le_bytes(raw[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        if count == 0 {
            return Err(SourceError::TruncatedFile(format!(
                "zero-length vector at byte {pos}"
            )));
        }
        if raw.len() - pos < count * 4 {
            return Err(SourceError::TruncatedFile(format!(
                "vector {} needs {} bytes, {} remain",
                vectors.len(),
                count * 4,
                raw.len() - pos
            )));
        }
        let mut values = Vec::with_capacity(count);
        for element in 0..count {
            let word = u32::from_le_bytes(raw[pos..pos + 4].try_into().unwrap());
            pos += 4;
            let v = f32::from_bits(word);
            if !v.is_finite() {
                return Err(SourceError::NonFiniteValue {
                    vector: vectors.len(),
                    element,
                });
            }
            values.push(v);
        }
        vectors.push(EmbeddingVector::new(values).expect("validated above"));
    }
    if vectors.is_empty() {
        return Err(SourceError::NoVectors);
    }
    Ok(vectors)
}

pub fn parse_text(text: &str) -> Result<Vec<EmbeddingVector>, SourceError> {
    let mut vectors = Vec::new();
    let mut current: Vec<f32> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            if !current.is_empty() {
                vectors.push(std::mem::take(&mut current));
            }
            continue;
        }
        let v: f32 = line.parse().map_err(|_| SourceError::ParseFloat {
            line: idx + 1,
            text: line.to_string(),
        })?;
        if !v.is_finite() {
            return Err(SourceError::NonFiniteValue {
                vector: vectors.len(),
                element: current.len(),
            });
        }
        current.push(v);
    }
    if !current.is_empty() {
        vectors.push(current);
    }
    if vectors.is_empty() {
        return Err(SourceError::NoVectors);
    }
    Ok(vectors
        .into_iter()
        .map(|values| EmbeddingVector::new(values).expect("validated above"))
        .collect())
}

/// Serializes vectors into the binary SEMB layout.
pub fn encode_semb(vectors: &[EmbeddingVector]) -> Vec<u8> {
    let payload: usize = vectors.iter().map(|v| 4 + v.len() * 4).sum();
    let mut out = Vec::with_capacity(5 + payload);
    out.extend_from_slice(SEMB_MAGIC);
    out.push(SEMB_VERSION);
    for vector in vectors {
        out.extend_from_slice(&(vector.len() as u32).to_le_bytes());
        for &v in vector.values() {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    out
}

pub fn save_embeddings(path: &Path, vectors: &[EmbeddingVector]) -> Result<(), SourceError> {
    fs::write(path, encode_semb(vectors))?;
    Ok(())
}

/// Deterministic stand-in for the real image encoder: a fixed seeded linear
/// projection from a 16x16 grayscale reduction of the crop to 768 values.
///
/// The map is linear in pixel intensity and its outputs are bounded by
/// `256 * 1/16 = 16` in absolute value, so default quantization bounds always
/// cover them. Identical seeds give identical projections.
#[derive(Debug, Clone)]
pub struct StubProjector {
    seed: u64,
    // Row-major EMBEDDING_DIM x STUB_INPUT_DIM, entries uniform [-1, 1] / 16.
    weights: Vec<f32>,
}

impl StubProjector {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..EMBEDDING_DIM * STUB_INPUT_DIM)
            .map(|_| {
                let u: f64 = rand::Rng::random(&mut rng);
                ((2.0 * u - 1.0) / 16.0) as f32
            })
            .collect();
        Self { seed, weights }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Projects a crop to an embedding vector. Deterministic in the crop
    /// bytes and the projector seed.
    pub fn embed(&self, crop: &CroppedImage) -> EmbeddingVector {
        let gray = downsample_grayscale(crop);
        let values = (0..EMBEDDING_DIM)
            .map(|row| {
                let base = row * STUB_INPUT_DIM;
                let mut acc = 0.0f64;
                for (j, &g) in gray.iter().enumerate() {
                    acc += f64::from(self.weights[base + j]) * g;
                }
                acc as f32
            })
            .collect();
        EmbeddingVector::new(values).expect("finite by construction")
    }
}

/// Reduces a 224x224 RGB crop to 16x16 grayscale intensities in [0, 1] by
/// averaging each 14x14 block's channel-summed pixels.
fn downsample_grayscale(crop: &CroppedImage) -> Vec<f64> {
    const BLOCK: usize = CROP_SIZE / STUB_GRID;
    let pixels = crop.pixels();
    let mut gray = Vec::with_capacity(STUB_INPUT_DIM);
    for by in 0..STUB_GRID {
        for bx in 0..STUB_GRID {
            // Integer accumulation keeps the reduction exactly linear.
            let mut sum: u32 = 0;
            for y in by * BLOCK..(by + 1) * BLOCK {
                for x in bx * BLOCK..(bx + 1) * BLOCK {
                    let p = (y * CROP_SIZE + x) * 3;
                    sum += u32::from(pixels[p]) + u32::from(pixels[p + 1]) + u32::from(pixels[p + 2]);
                }
            }
            gray.push(f64::from(sum) / f64::from((BLOCK * BLOCK * 3 * 255) as u32));
        }
    }
    gray
}

/// Generates `count` deterministic embedding vectors by projecting seeded
/// synthetic crops, for runs that have no embedding file at hand.
pub fn stub_vectors(count: usize, seed: u64) -> Vec<EmbeddingVector> {
    let projector = StubProjector::new(seed);
    (0..count)
        .map(|i| {
            let crop = synthetic_crop(crate::channel::derive_seed(seed, i as u64));
            projector.embed(&crop)
        })
        .collect()
}

/// A seeded noise crop; content is arbitrary but fixed per seed.
pub fn synthetic_crop(seed: u64) -> CroppedImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = vec![0u8; CROP_SIZE * CROP_SIZE * 3];
    rand::RngCore::fill_bytes(&mut rng, &mut pixels);
    let region = crate::roi::SquareBox::new(0, 0, CROP_SIZE as u32, CROP_SIZE as u32)
        .expect("static box is valid");
    CroppedImage::new(pixels, region).expect("sized buffer")
}
