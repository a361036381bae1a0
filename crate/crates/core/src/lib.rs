//! Simulator for transmitting vehicle-RoI embedding vectors from an edge
//! camera to the cloud over a noisy digital link.
//!
//! The pipeline mirrors the deployed system: detections are grown into square
//! regions of interest and cropped to 224x224 ([`roi`]), embedding vectors are
//! packed into bitstreams by uniform quantization or raw IEEE 754 words
//! ([`codec`]), modulated with BPSK or Gray-coded 16-QAM ([`modem`]), passed
//! through a seeded AWGN channel ([`channel`]), and reconstructed on the far
//! side. [`metrics`] scores fidelity and transmission cost, and [`experiment`]
//! runs reproducible Monte-Carlo sweeps over the whole chain.

pub mod channel;
pub mod codec;
pub mod detections;
pub mod embedding_source;
pub mod experiment;
pub mod metrics;
pub mod modem;
pub mod ppm;
pub mod roi;
