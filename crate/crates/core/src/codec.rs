//! Embedding-vector bitstream codecs.
//!
//! Two schemes turn a vector of f32 values into bits and back: uniform
//! quantization to an n_q-bit integer per element, and the raw IEEE 754
//! single-precision word (1 sign, 8 exponent, 23 mantissa bits). Bits are
//! emitted most-significant-first within each element, so channel errors on
//! leading bits corrupt sign and exponent — the catastrophic failure mode of
//! the float scheme.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("embedding vector must hold at least one element")]
    EmptyVector,
    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("quantization bounds must satisfy v_min < v_max, got [{0}, {1}]")]
    BadBounds(f32, f32),
    #[error("quantized value {q} exceeds the {bits}-bit range")]
    QOutOfRange { q: u32, bits: u8 },
    #[error("bitstream holds {actual} bits, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
}

/// Fixed-dimension vector of finite f32 values, the transmitted payload.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, CodecError> {
        if values.is_empty() {
            return Err(CodecError::EmptyVector);
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(CodecError::NonFiniteValue(idx));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Per-vector (min, max), the transmitter-side quantization bounds.
    pub fn bounds(&self) -> (f32, f32) {
        let mut min = f32::INFINITY;
        let mut max = f32::NEG_INFINITY;
        for &v in &self.0 {
            min = min.min(v);
            max = max.max(v);
        }
        (min, max)
    }
}

/// Bits per element for the quantized scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuantBits {
    Q8,
    Q16,
    Q32,
}

impl QuantBits {
    pub fn bits(self) -> u32 {
        match self {
            QuantBits::Q8 => 8,
            QuantBits::Q16 => 16,
            QuantBits::Q32 => 32,
        }
    }

    /// Largest representable level, `2^n_q - 1`.
    pub fn max_level(self) -> u32 {
        match self {
            QuantBits::Q8 => 0xFF,
            QuantBits::Q16 => 0xFFFF,
            QuantBits::Q32 => 0xFFFF_FFFF,
        }
    }
}

/// Uniform quantizer setup: bit depth plus the value range it covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationParams {
    bits: QuantBits,
    v_min: f32,
    v_max: f32,
}

impl QuantizationParams {
    pub fn new(bits: QuantBits, v_min: f32, v_max: f32) -> Result<Self, CodecError> {
        if !v_min.is_finite() || !v_max.is_finite() || v_min >= v_max {
            return Err(CodecError::BadBounds(v_min, v_max));
        }
        Ok(Self { bits, v_min, v_max })
    }

    pub fn bits(&self) -> QuantBits {
        self.bits
    }

    pub fn v_min(&self) -> f32 {
        self.v_min
    }

    pub fn v_max(&self) -> f32 {
        self.v_max
    }

    /// Reconstruction step `(v_max - v_min) / (2^n_q - 1)`, the worst-case
    /// round-trip error bound for in-range values.
    pub fn step(&self) -> f64 {
        (f64::from(self.v_max) - f64::from(self.v_min)) / f64::from(self.bits.max_level())
    }
}

/// How a receiver replaces NaN or infinite values decoded from channel-
/// corrupted IEEE 754 words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum NonFinitePolicy {
    /// Replace with 0.0.
    #[default]
    ZeroFill,
    /// Replace with the largest finite magnitude, keeping the sign bit.
    Saturate,
}

/// Element encoding used on the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EncodingScheme {
    Ieee754,
    Quantized(QuantizationParams),
}

impl EncodingScheme {
    /// Bits per element: 32 for IEEE 754, n_q for the quantized scheme.
    pub fn bits_per_element(&self) -> u32 {
        match self {
            EncodingScheme::Ieee754 => 32,
            EncodingScheme::Quantized(p) => p.bits().bits(),
        }
    }
}

/// Ordered bit sequence produced by encoding a vector; length is always
/// `bits_per_element * element_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstream {
    bits: Vec<u8>,
    element_width: u32,
    element_count: usize,
}

impl Bitstream {
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn element_width(&self) -> u32 {
        self.element_width
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }
}

/// Maps `v` to its level index: `floor((clamp(v) - v_min) / (v_max - v_min)
/// * (2^n_q - 1))`. Out-of-range inputs clamp to the bounds.
pub fn quantize_element(v: f32, params: &QuantizationParams) -> u32 {
    let v = f64::from(v.clamp(params.v_min, params.v_max));
    let lo = f64::from(params.v_min);
    let hi = f64::from(params.v_max);
    let t = (v - lo) / (hi - lo);
    let q = (t * f64::from(params.bits.max_level())).floor();
    // t is in [0, 1], so q is in [0, 2^n_q - 1]; the cast cannot wrap.
    q as u32
}

/// Linear inverse of [`quantize_element`]:
/// `q / (2^n_q - 1) * (v_max - v_min) + v_min`.
///
/// Returned in f64 so the reconstruction is within one step of the original
/// even when the step is far below f32 resolution; [`decode_vector`] rounds
/// to f32 when it stores the value back into a payload vector.
pub fn dequantize_element(q: u32, params: &QuantizationParams) -> Result<f64, CodecError> {
    if q > params.bits.max_level() {
        return Err(CodecError::QOutOfRange {
            q,
            bits: params.bits.bits() as u8,
        });
    }
    let lo = f64::from(params.v_min);
    let hi = f64::from(params.v_max);
    Ok(f64::from(q) / f64::from(params.bits.max_level()) * (hi - lo) + lo)
}

/// IEEE 754 single-precision bit pattern of `v`, sign in the most
/// significant bit.
pub fn encode_ieee754(v: f32) -> u32 {
    v.to_bits()
}

/// Inverse of [`encode_ieee754`]. Patterns that decode to NaN or infinity
/// (possible after channel bit errors) are replaced per `policy`, so every
/// 32-bit word decodes to a finite value.
pub fn decode_ieee754(word: u32, policy: NonFinitePolicy) -> f32 {
    let v = f32::from_bits(word);
    if v.is_finite() {
        v
    } else {
        match policy {
            NonFinitePolicy::ZeroFill => 0.0,
            NonFinitePolicy::Saturate => {
                if word >> 31 == 1 {
                    f32::MIN
                } else {
                    f32::MAX
                }
            }
        }
    }
}

fn push_bits_msb_first(word: u32, width: u32, out: &mut Vec<u8>) {
    for i in (0..width).rev() {
        out.push(((word >> i) & 1) as u8);
    }
}

fn read_bits_msb_first(bits: &[u8]) -> u32 {
    let mut word = 0u32;
    for &b in bits {
        debug_assert!(b <= 1);
        word = (word << 1) | u32::from(b);
    }
    word
}

/// Concatenates the per-element encodings of `v` in element order.
pub fn encode_vector(v: &EmbeddingVector, scheme: &EncodingScheme) -> Bitstream {
    let width = scheme.bits_per_element();
    let mut bits = Vec::with_capacity(width as usize * v.len());
    for &value in v.values() {
        let word = match scheme {
            EncodingScheme::Ieee754 => encode_ieee754(value),
            EncodingScheme::Quantized(params) => quantize_element(value, params),
        };
        push_bits_msb_first(word, width, &mut bits);
    }
    Bitstream {
        bits,
        element_width: width,
        element_count: v.len(),
    }
}

/// Element-wise inverse of [`encode_vector`] over a received bit sequence.
///
/// The bit count must equal `bits_per_element * count`; non-finite decodes on
/// the IEEE 754 path are replaced per `policy`.
pub fn decode_vector(
    bits: &[u8],
    scheme: &EncodingScheme,
    count: usize,
    policy: NonFinitePolicy,
) -> Result<EmbeddingVector, CodecError> {
    let width = scheme.bits_per_element() as usize;
    let expected = width * count;
    if bits.len() != expected {
        return Err(CodecError::LengthMismatch {
            expected,
            actual: bits.len(),
        });
    }
    let mut values = Vec::with_capacity(count);
    for chunk in bits.chunks_exact(width) {
        let word = read_bits_msb_first(chunk);
        let value = match scheme {
            EncodingScheme::Ieee754 => decode_ieee754(word, policy),
            EncodingScheme::Quantized(params) => dequantize_element(word, params)? as f32,
        };
        values.push(value);
    }
    EmbeddingVector::new(values)
}
