//! Seeded AWGN channel.
//!
//! Noise variance comes from the target SNR, `sigma^2 = Es / 10^(SNR/10)`,
//! and every trial draws its noise from a ChaCha8 stream seeded through a
//! SplitMix64 derivation, so runs are reproducible across platforms and
//! independent of how trials are scheduled.

use crate::modem::SymbolStream;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("average symbol energy must be positive, got {0}")]
    NonPositiveEnergy(f64),
    #[error("cannot transmit an empty symbol stream")]
    EmptyStream,
    #[error("noise standard deviation {0} is not finite")]
    BadNoise(f64),
}

/// How the total noise power splits across the components of a complex
/// symbol. Real (BPSK) symbols always receive the full variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum NoiseSplit {
    /// sigma^2 / 2 per component: total complex noise power is sigma^2.
    #[default]
    HalfPerComponent,
    /// sigma^2 per component, for sensitivity analysis.
    FullPerComponent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub seed: u64,
    pub noise_split: NoiseSplit,
}

/// Noise variance for a target SNR in dB: `es / 10^(snr_db / 10)`.
pub fn noise_variance(snr_db: f64, es: f64) -> Result<f64, ChannelError> {
    if es.is_nan() || es <= 0.0 {
        return Err(ChannelError::NonPositiveEnergy(es));
    }
    Ok(es / 10f64.powf(snr_db / 10.0))
}

/// Adds white Gaussian noise to every symbol: `y_i = s_i + n_i`.
///
/// Output is a pure function of `(symbols, config, es)`: the generator is
/// ChaCha8 seeded with `config.seed`, and complex symbols draw the real
/// component before the imaginary one.
pub fn transmit(
    symbols: &SymbolStream,
    config: &ChannelConfig,
    es: f64,
) -> Result<SymbolStream, ChannelError> {
    if symbols.is_empty() {
        return Err(ChannelError::EmptyStream);
    }
    let variance = noise_variance(config.snr_db, es)?;
    let sigma = variance.sqrt();
    if !sigma.is_finite() {
        return Err(ChannelError::BadNoise(sigma));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = StandardNormal;
    Ok(match symbols {
        SymbolStream::Bpsk(clean) => SymbolStream::Bpsk(
            clean
                .iter()
                .map(|&s| {
                    let z: f64 = normal.sample(&mut rng);
                    s + sigma * z
                })
                .collect(),
        ),
        SymbolStream::Qam16(clean) => {
            let component_sigma = match config.noise_split {
                NoiseSplit::HalfPerComponent => (variance / 2.0).sqrt(),
                NoiseSplit::FullPerComponent => sigma,
            };
            SymbolStream::Qam16(
                clean
                    .iter()
                    .map(|&s| {
                        let re: f64 = normal.sample(&mut rng);
                        let im: f64 = normal.sample(&mut rng);
                        s + Complex64::new(component_sigma * re, component_sigma * im)
                    })
                    .collect(),
            )
        }
    })
}

/// Derives an independent stream seed from a parent seed, SplitMix64 style.
///
/// Sweeps give trial `i` of cell `c` the seed
/// `derive_seed(derive_seed(master, c), i)`, which makes results identical
/// for any worker count or execution order.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(parent ^ splitmix64(stream))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::bpsk_modulate;

    #[test]
    fn variance_follows_the_snr_law() {
        assert!((noise_variance(10.0, 1.0).unwrap() - 0.1).abs() < 1e-12);
        assert!((noise_variance(0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((noise_variance(20.0, 10.0).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn non_positive_energy_is_rejected() {
        assert_eq!(
            noise_variance(10.0, 0.0),
            Err(ChannelError::NonPositiveEnergy(0.0))
        );
        assert_eq!(
            noise_variance(10.0, -1.0),
            Err(ChannelError::NonPositiveEnergy(-1.0))
        );
    }

    #[test]
    fn zero_variance_returns_the_input_exactly() {
        let clean = bpsk_modulate(&[0, 1, 1, 0, 1]);
        let config = ChannelConfig {
            snr_db: f64::INFINITY,
            seed: 7,
            noise_split: NoiseSplit::default(),
        };
        let noisy = transmit(&clean, &config, 1.0).unwrap();
        assert_eq!(noisy, clean);
    }

    #[test]
    fn identical_seeds_give_identical_outputs() {
        let clean = bpsk_modulate(&[1; 256]);
        let config = ChannelConfig {
            snr_db: 5.0,
            seed: 42,
            noise_split: NoiseSplit::default(),
        };
        let a = transmit(&clean, &config, 1.0).unwrap();
        let b = transmit(&clean, &config, 1.0).unwrap();
        assert_eq!(a, b);
        let other = transmit(
            &clean,
            &ChannelConfig {
                seed: 43,
                ..config
            },
            1.0,
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn empty_stream_is_rejected() {
        let config = ChannelConfig {
            snr_db: 10.0,
            seed: 1,
            noise_split: NoiseSplit::default(),
        };
        assert_eq!(
            transmit(&SymbolStream::Bpsk(vec![]), &config, 1.0),
            Err(ChannelError::EmptyStream)
        );
    }

    #[test]
    fn sample_noise_statistics_match_the_target_variance() {
        let n = 1_000_000;
        let clean = bpsk_modulate(&vec![1u8; n]);
        let config = ChannelConfig {
            snr_db: 10.0,
            seed: 2024,
            noise_split: NoiseSplit::default(),
        };
        let noisy = transmit(&clean, &config, 1.0).unwrap();
        let (clean, noisy) = match (&clean, &noisy) {
            (SymbolStream::Bpsk(c), SymbolStream::Bpsk(y)) => (c, y),
            _ => unreachable!(),
        };
        let diffs: Vec<f64> = clean.iter().zip(noisy).map(|(c, y)| y - c).collect();
        let mean = diffs.iter().sum::<f64>() / n as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
        // Law of large numbers: sample variance within 1% of 0.1.
        assert!((var - 0.1).abs() < 0.001, "sample variance {var}");
        // Mean within 3 standard errors of zero.
        assert!(mean.abs() < 3.0 * (0.1f64 / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn half_split_puts_total_power_across_components() {
        let n = 500_000;
        let bits: Vec<u8> = (0..n * 4).map(|i| (i % 2) as u8).collect();
        let clean = crate::modem::qam16_modulate(&bits, &crate::modem::GrayMap::default()).unwrap();
        for (split, expected_component_var) in [
            (NoiseSplit::HalfPerComponent, 0.5),
            (NoiseSplit::FullPerComponent, 1.0),
        ] {
            let config = ChannelConfig {
                snr_db: 10.0,
                seed: 99,
                noise_split: split,
            };
            let noisy = transmit(&clean, &config, 10.0).unwrap();
            let (clean, noisy) = match (&clean, &noisy) {
                (SymbolStream::Qam16(c), SymbolStream::Qam16(y)) => (c, y),
                _ => unreachable!(),
            };
            let re_var = clean
                .iter()
                .zip(noisy)
                .map(|(c, y)| (y.re - c.re) * (y.re - c.re))
                .sum::<f64>()
                / n as f64;
            assert!(
                (re_var - expected_component_var).abs() < 0.01,
                "split {split:?}: component variance {re_var}"
            );
        }
    }

    #[test]
    fn negative_infinite_snr_is_rejected() {
        let clean = bpsk_modulate(&[1, 0]);
        let config = ChannelConfig {
            snr_db: f64::NEG_INFINITY,
            seed: 0,
            noise_split: NoiseSplit::default(),
        };
        assert!(matches!(
            transmit(&clean, &config, 1.0),
            Err(ChannelError::BadNoise(_))
        ));
    }

    #[test]
    fn empirical_ber_is_non_increasing_in_snr() {
        let n = 100_000;
        let bits: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let clean = bpsk_modulate(&bits);
        let mut previous = 1.0;
        for snr_db in [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0] {
            let config = ChannelConfig {
                snr_db,
                seed: derive_seed(5150, snr_db as u64),
                noise_split: NoiseSplit::default(),
            };
            let received = transmit(&clean, &config, 1.0).unwrap();
            let demod = crate::modem::bpsk_demodulate(&received).unwrap();
            let ber = crate::metrics::ber(&bits, &demod).unwrap();
            assert!(
                ber <= previous,
                "ber rose from {previous} to {ber} at {snr_db} dB"
            );
            previous = ber;
        }
    }

    #[test]
    fn qam16_ber_matches_gray_nearest_neighbor_theory() {
        // Per axis, edge levels see one decision boundary and interior levels
        // two, so P(symbol error/axis) = 1.5 Q(1/sigma_c) under uniform
        // symbols, and Gray labeling makes each single-cell error cost one of
        // the two axis bits: BER ~= 0.75 Q(1/sigma_c).
        let n_bits = 1_000_000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xABCD);
        let bits: Vec<u8> = (0..n_bits)
            .map(|_| u8::from(rand::Rng::random::<bool>(&mut rng)))
            .collect();
        let map = crate::modem::GrayMap::default();
        let clean = crate::modem::qam16_modulate(&bits, &map).unwrap();
        let snr_db = 10.0;
        let config = ChannelConfig {
            snr_db,
            seed: 0xABCD,
            noise_split: NoiseSplit::HalfPerComponent,
        };
        let received = transmit(&clean, &config, 10.0).unwrap();
        let demod = crate::modem::qam16_demodulate(&received, &map).unwrap();
        let ber = crate::metrics::ber(&bits, &demod).unwrap();

        let sigma_c = (noise_variance(snr_db, 10.0).unwrap() / 2.0).sqrt();
        assert!((sigma_c - 0.5f64.sqrt()).abs() < 1e-12);
        // Q(1/sigma_c) = Q(sqrt(2)) = 0.5 erfc(1).
        let q = 0.0786496;
        let theory = 0.75 * q;
        let se = (theory * (1.0 - theory) / n_bits as f64).sqrt();
        assert!(
            (ber - theory).abs() <= 4.0 * se,
            "ber {ber} vs theory {theory}, 4se {}",
            4.0 * se
        );
    }

    #[test]
    fn derived_seeds_differ_across_streams() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        let c = derive_seed(8, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, 0));
    }
}
