//! Fidelity and cost accounting: reconstruction MSE, bit error rate, memory
//! savings of the cropped and embedding representations, and the per-frame
//! latency model.

use crate::codec::EmbeddingVector;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("bitstream length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Bytes of one raw 2048x2048 RGB camera frame.
pub const ORIGINAL_FRAME_BYTES: u64 = 2048 * 2048 * 3;
/// Bytes of one 224x224 RGB crop.
pub const CROPPED_BYTES_PER_VEHICLE: u64 = 224 * 224 * 3;
/// Bytes of one 768-element f32 embedding vector.
pub const EMBEDDING_BYTES_PER_VEHICLE: u64 = 768 * 4;

const BYTES_PER_MEGABYTE: f64 = (1u64 << 20) as f64;

/// Mean squared error `(1/d) * sum((v_i - v_hat_i)^2)`, accumulated in f64.
pub fn mse(v: &EmbeddingVector, v_hat: &EmbeddingVector) -> Result<f64, MetricsError> {
    if v.len() != v_hat.len() {
        return Err(MetricsError::DimensionMismatch(v.len(), v_hat.len()));
    }
    let sum: f64 = v
        .values()
        .iter()
        .zip(v_hat.values())
        .map(|(&a, &b)| {
            let d = f64::from(a) - f64::from(b);
            d * d
        })
        .sum();
    Ok(sum / v.len() as f64)
}

/// Fraction of differing bits between two equal-length streams.
pub fn ber(sent: &[u8], received: &[u8]) -> Result<f64, MetricsError> {
    if sent.len() != received.len() {
        return Err(MetricsError::LengthMismatch(sent.len(), received.len()));
    }
    if sent.is_empty() {
        return Ok(0.0);
    }
    let flips = sent
        .iter()
        .zip(received)
        .filter(|(a, b)| a != b)
        .count();
    Ok(flips as f64 / sent.len() as f64)
}

/// Transmission size of one frame under each representation, with savings
/// relative to sending the raw frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryReport {
    pub n_vehicles: u64,
    pub original_bytes: u64,
    pub cropped_bytes: u64,
    pub embedding_bytes: u64,
    pub savings_cropped_pct: f64,
    pub savings_embedding_pct: f64,
}

impl MemoryReport {
    pub fn cropped_megabytes(&self) -> f64 {
        self.cropped_bytes as f64 / BYTES_PER_MEGABYTE
    }

    pub fn embedding_megabytes(&self) -> f64 {
        self.embedding_bytes as f64 / BYTES_PER_MEGABYTE
    }

    pub fn original_megabytes(&self) -> f64 {
        self.original_bytes as f64 / BYTES_PER_MEGABYTE
    }
}

fn savings_pct(transmitted: u64, original: u64) -> f64 {
    100.0 * (1.0 - transmitted as f64 / original as f64)
}

/// Per-frame transmission cost for `n_vehicles` detections.
pub fn memory_report(n_vehicles: u64) -> MemoryReport {
    let cropped_bytes = n_vehicles * CROPPED_BYTES_PER_VEHICLE;
    let embedding_bytes = n_vehicles * EMBEDDING_BYTES_PER_VEHICLE;
    MemoryReport {
        n_vehicles,
        original_bytes: ORIGINAL_FRAME_BYTES,
        cropped_bytes,
        embedding_bytes,
        savings_cropped_pct: savings_pct(cropped_bytes, ORIGINAL_FRAME_BYTES),
        savings_embedding_pct: savings_pct(embedding_bytes, ORIGINAL_FRAME_BYTES),
    }
}

/// Which stages run per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LatencyMode {
    /// Crop and transmit the 224x224 images directly.
    CropOnly,
    /// Crop, embed, and transmit the embedding vectors.
    Embedding,
}

/// Per-vehicle stage costs in seconds, measured on the reference hardware.
///
/// These cannot be re-measured here, so they are plain configuration. The
/// cloud-side decode cost is tracked separately and only enters the report
/// when `include_cloud_decode` is set: the headline per-frame figures cover
/// edge inference only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyModel {
    pub roi_seconds_per_vehicle: f64,
    pub embed_seconds_per_vehicle: f64,
    pub decode_seconds_per_vehicle: f64,
    pub include_cloud_decode: bool,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            roi_seconds_per_vehicle: 0.023,
            embed_seconds_per_vehicle: 0.16,
            decode_seconds_per_vehicle: 1e-3,
            include_cloud_decode: false,
        }
    }
}

/// Modeled per-frame inference time; `total_seconds` is always the sum of
/// the three stage fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyReport {
    pub n_vehicles: u64,
    pub roi_seconds: f64,
    pub embed_seconds: f64,
    pub decode_seconds: f64,
    pub total_seconds: f64,
}

pub fn latency_report(n_vehicles: u64, mode: LatencyMode, model: &LatencyModel) -> LatencyReport {
    let n = n_vehicles as f64;
    let roi_seconds = n * model.roi_seconds_per_vehicle;
    let (embed_seconds, decode_seconds) = match mode {
        LatencyMode::CropOnly => (0.0, 0.0),
        LatencyMode::Embedding => {
            let decode = if model.include_cloud_decode {
                n * model.decode_seconds_per_vehicle
            } else {
                0.0
            };
            (n * model.embed_seconds_per_vehicle, decode)
        }
    };
    LatencyReport {
        n_vehicles,
        roi_seconds,
        embed_seconds,
        decode_seconds,
        total_seconds: roi_seconds + embed_seconds + decode_seconds,
    }
}
