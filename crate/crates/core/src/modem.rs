//! BPSK and Gray-coded 16-QAM mapping between bitstreams and symbols.
//!
//! BPSK sends one bit per real symbol, `s = 2b - 1`. 16-QAM sends four bits
//! per complex symbol: the first two select the in-phase level, the last two
//! the quadrature level, through a per-axis Gray table over `{-3,-1,+1,+3}`.
//! The constellation is used unnormalized, so its average symbol energy is 10.

use num_complex::Complex64;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModemError {
    #[error("expected a {expected} symbol stream, got {actual}")]
    SchemeMismatch {
        expected: ModulationScheme,
        actual: ModulationScheme,
    },
    #[error("16-QAM needs a multiple of 4 bits, got {0}")]
    LengthNotMultipleOf4(usize),
    #[error("invalid gray map: {0}")]
    BadGrayMap(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModulationScheme {
    Bpsk,
    Qam16,
}

impl ModulationScheme {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            ModulationScheme::Bpsk => 1,
            ModulationScheme::Qam16 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationScheme::Bpsk => "bpsk",
            ModulationScheme::Qam16 => "qam16",
        }
    }
}

impl std::fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Modulated symbols: real-valued for BPSK, complex for 16-QAM.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolStream {
    Bpsk(Vec<f64>),
    Qam16(Vec<Complex64>),
}

impl SymbolStream {
    pub fn scheme(&self) -> ModulationScheme {
        match self {
            SymbolStream::Bpsk(_) => ModulationScheme::Bpsk,
            SymbolStream::Qam16(_) => ModulationScheme::Qam16,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SymbolStream::Bpsk(s) => s.len(),
            SymbolStream::Qam16(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const QAM_LEVELS: [i8; 4] = [-3, -1, 1, 3];

/// Per-axis table mapping a 2-bit label (index `b_msb*2 + b_lsb`) to a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisMap {
    levels: [i8; 4],
}

impl AxisMap {
    /// Builds a map from the levels selected by labels `00, 01, 10, 11`.
    ///
    /// The labeling must be a bijection onto `{-3,-1,+1,+3}` in which
    /// constellation-adjacent levels differ in exactly one bit.
    pub fn new(levels: [i8; 4]) -> Result<Self, ModemError> {
        let mut sorted = levels;
        sorted.sort_unstable();
        if sorted != QAM_LEVELS {
            return Err(ModemError::BadGrayMap(format!(
                "levels {levels:?} are not a permutation of {QAM_LEVELS:?}"
            )));
        }
        let map = Self { levels };
        for pair in QAM_LEVELS.windows(2) {
            let a = map.bits_for(pair[0]);
            let b = map.bits_for(pair[1]);
            if (a ^ b).count_ones() != 1 {
                return Err(ModemError::BadGrayMap(format!(
                    "adjacent levels {} and {} differ in more than one bit",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(map)
    }

    fn level_for(&self, bits: u8) -> i8 {
        self.levels[usize::from(bits & 0b11)]
    }

    fn bits_for(&self, level: i8) -> u8 {
        self.levels
            .iter()
            .position(|&l| l == level)
            .expect("level is in the constellation") as u8
    }

    /// Level nearest to `value`; ties break toward the smaller level so
    /// demodulation is deterministic on decision boundaries.
    fn slice(&self, value: f64) -> i8 {
        if value <= -2.0 {
            -3
        } else if value <= 0.0 {
            -1
        } else if value <= 2.0 {
            1
        } else {
            3
        }
    }
}

impl Default for AxisMap {
    /// Reflected Gray labeling: `00 -> -3`, `01 -> -1`, `11 -> +1`, `10 -> +3`.
    fn default() -> Self {
        Self {
            levels: [-3, -1, 3, 1],
        }
    }
}

/// Gray labeling for both 16-QAM axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GrayMap {
    i_axis: AxisMap,
    q_axis: AxisMap,
}

impl GrayMap {
    pub fn new(i_axis: AxisMap, q_axis: AxisMap) -> Self {
        Self { i_axis, q_axis }
    }

    /// Same labeling on both axes.
    pub fn symmetric(axis: AxisMap) -> Self {
        Self {
            i_axis: axis,
            q_axis: axis,
        }
    }

    /// Parses the 4-entry per-axis table syntax `00=-3,01=-1,11=1,10=3` and
    /// applies it to both axes.
    pub fn from_axis_spec(spec: &str) -> Result<Self, ModemError> {
        let mut levels = [None; 4];
        for entry in spec.split(',') {
            let (label, level) = entry
                .split_once('=')
                .ok_or_else(|| ModemError::BadGrayMap(format!("bad entry '{entry}'")))?;
            let label = label.trim();
            if label.len() != 2 || !label.chars().all(|c| c == '0' || c == '1') {
                return Err(ModemError::BadGrayMap(format!("bad label '{label}'")));
            }
            let idx = usize::from_str_radix(label, 2)
                .map_err(|_| ModemError::BadGrayMap(format!("bad label '{label}'")))?;
            let level: i8 = level
                .trim()
                .parse()
                .map_err(|_| ModemError::BadGrayMap(format!("bad level '{level}'")))?;
            if levels[idx].replace(level).is_some() {
                return Err(ModemError::BadGrayMap(format!("duplicate label '{label}'")));
            }
        }
        let levels = [
            levels[0].ok_or_else(|| ModemError::BadGrayMap("missing label 00".into()))?,
            levels[1].ok_or_else(|| ModemError::BadGrayMap("missing label 01".into()))?,
            levels[2].ok_or_else(|| ModemError::BadGrayMap("missing label 10".into()))?,
            levels[3].ok_or_else(|| ModemError::BadGrayMap("missing label 11".into()))?,
        ];
        Ok(Self::symmetric(AxisMap::new(levels)?))
    }
}

// Emitted into result sidecars as the full 8-entry table so a run can be
// reproduced bit-for-bit.
impl Serialize for GrayMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        fn axis_entries(axis: &AxisMap) -> Vec<(String, i8)> {
            (0..4u8)
                .map(|idx| (format!("{idx:02b}"), axis.level_for(idx)))
                .collect()
        }
        let mut map = serializer.serialize_map(Some(2))?;
        map.serialize_entry(
            "i",
            &axis_entries(&self.i_axis)
                .into_iter()
                .collect::<std::collections::BTreeMap<_, _>>(),
        )?;
        map.serialize_entry(
            "q",
            &axis_entries(&self.q_axis)
                .into_iter()
                .collect::<std::collections::BTreeMap<_, _>>(),
        )?;
        map.end()
    }
}

/// Maps each bit to a real symbol `2b - 1`.
pub fn bpsk_modulate(bits: &[u8]) -> SymbolStream {
    SymbolStream::Bpsk(
        bits.iter()
            .map(|&b| {
                debug_assert!(b <= 1);
                2.0 * f64::from(b) - 1.0
            })
            .collect(),
    )
}

/// Hard-decision BPSK: `1` when the received value is >= 0, else `0`.
pub fn bpsk_demodulate(received: &SymbolStream) -> Result<Vec<u8>, ModemError> {
    match received {
        SymbolStream::Bpsk(symbols) => Ok(symbols.iter().map(|&y| u8::from(y >= 0.0)).collect()),
        other => Err(ModemError::SchemeMismatch {
            expected: ModulationScheme::Bpsk,
            actual: other.scheme(),
        }),
    }
}

/// Maps each 4-bit group `[b1, b2, b3, b4]` to `I + jQ`: `(b1, b2)` select
/// the in-phase level, `(b3, b4)` the quadrature level.
pub fn qam16_modulate(bits: &[u8], map: &GrayMap) -> Result<SymbolStream, ModemError> {
    if !bits.len().is_multiple_of(4) {
        return Err(ModemError::LengthNotMultipleOf4(bits.len()));
    }
    let symbols = bits
        .chunks_exact(4)
        .map(|group| {
            debug_assert!(group.iter().all(|&b| b <= 1));
            let i = map.i_axis.level_for(group[0] << 1 | group[1]);
            let q = map.q_axis.level_for(group[2] << 1 | group[3]);
            Complex64::new(f64::from(i), f64::from(q))
        })
        .collect();
    Ok(SymbolStream::Qam16(symbols))
}

/// Nearest-constellation-point decisions on each axis followed by the
/// inverse Gray mapping back to 4-bit groups.
pub fn qam16_demodulate(received: &SymbolStream, map: &GrayMap) -> Result<Vec<u8>, ModemError> {
    match received {
        SymbolStream::Qam16(symbols) => {
            let mut bits = Vec::with_capacity(symbols.len() * 4);
            for y in symbols {
                let i_bits = map.i_axis.bits_for(map.i_axis.slice(y.re));
                let q_bits = map.q_axis.bits_for(map.q_axis.slice(y.im));
                bits.push(i_bits >> 1 & 1);
                bits.push(i_bits & 1);
                bits.push(q_bits >> 1 & 1);
                bits.push(q_bits & 1);
            }
            Ok(bits)
        }
        other => Err(ModemError::SchemeMismatch {
            expected: ModulationScheme::Qam16,
            actual: other.scheme(),
        }),
    }
}

/// Scheme dispatch over [`bpsk_modulate`] and [`qam16_modulate`].
pub fn modulate(
    bits: &[u8],
    scheme: ModulationScheme,
    map: &GrayMap,
) -> Result<SymbolStream, ModemError> {
    match scheme {
        ModulationScheme::Bpsk => Ok(bpsk_modulate(bits)),
        ModulationScheme::Qam16 => qam16_modulate(bits, map),
    }
}

/// Scheme dispatch over [`bpsk_demodulate`] and [`qam16_demodulate`],
/// keyed by the stream's own tag.
pub fn demodulate(received: &SymbolStream, map: &GrayMap) -> Result<Vec<u8>, ModemError> {
    match received.scheme() {
        ModulationScheme::Bpsk => bpsk_demodulate(received),
        ModulationScheme::Qam16 => qam16_demodulate(received, map),
    }
}

/// Mean of `|symbol|^2` over the constellation under uniform symbol usage:
/// 1 for BPSK, 10 for the unnormalized 16-QAM grid.
pub fn average_symbol_energy(scheme: ModulationScheme) -> f64 {
    match scheme {
        ModulationScheme::Bpsk => 1.0,
        ModulationScheme::Qam16 => {
            let per_axis: f64 = QAM_LEVELS
                .iter()
                .map(|&l| f64::from(l) * f64::from(l))
                .sum::<f64>()
                / QAM_LEVELS.len() as f64;
            2.0 * per_axis
        }
    }
}
