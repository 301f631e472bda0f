//! Sum-of-sinusoids (Jakes-style) fading gain generator.
//!
//! Each tap on each port is a sum of `SINUSOIDS` unit phasors whose Doppler
//! shifts are `f_D cos(alpha_m)` for equally spaced arrival angles
//! `alpha_m = 2 pi (m + theta) / M`. The rotation `theta` is drawn per stream
//! from [0.15, 0.35], away from 0 and 1/2 where mirrored angles would share a
//! Doppler line; distinct lines let time-averaged power converge to 1, and
//! distinct rotations keep different taps uncorrelated. Phases are drawn per
//! stream as well.
//!
//! A tap with zero Doppler is static and has gain exactly 1.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mimo::{cholesky, port_correlation};
use super::{ChannelScenario, MimoCorrelation};

pub const SINUSOIDS: usize = 64;

#[derive(Debug, Clone)]
struct Stream {
    cos_angles: Vec<f64>,
    phases: Vec<f64>,
}

impl Stream {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let theta = 0.15 + 0.2 * rng.random::<f64>();
        Self {
            cos_angles: (0..SINUSOIDS)
                .map(|m| (2.0 * PI * (m as f64 + theta) / SINUSOIDS as f64).cos())
                .collect(),
            phases: (0..SINUSOIDS).map(|_| rng.random::<f64>() * 2.0 * PI).collect(),
        }
    }
}

#[derive(Debug, Clone)]
struct TapFading {
    doppler_hz: f64,
    /// One independent stream per port before correlation.
    streams: Vec<Stream>,
}

/// Per-tap complex gain generator owned by one run.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    taps: Vec<TapFading>,
    /// Lower-triangular factor of the port correlation matrix.
    coloring: Vec<Vec<f64>>,
}

impl FadingProcess {
    pub fn new(scenario: &ChannelScenario) -> Self {
        Self::with_dopplers(
            scenario.taps.iter().map(|t| t.doppler_hz),
            scenario.num_ports.max(1),
            scenario.mimo_correlation,
            scenario.seed,
        )
    }

    pub fn with_dopplers(
        dopplers: impl IntoIterator<Item = f64>,
        num_ports: usize,
        correlation: MimoCorrelation,
        seed: u64,
    ) -> Self {
        // One ChaCha stream per port so port 0 does not depend on the port count.
        // Stream 1 is reserved for the emulator's noise.
        let mut rngs: Vec<ChaCha8Rng> = (0..num_ports)
            .map(|p| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(2 + p as u64);
                rng
            })
            .collect();
        let taps = dopplers
            .into_iter()
            .map(|doppler_hz| TapFading {
                doppler_hz,
                streams: rngs.iter_mut().map(Stream::draw).collect(),
            })
            .collect();
        let coloring = cholesky(&port_correlation(correlation, num_ports))
            .expect("port correlation matrices are positive definite");
        Self {
            taps,
            coloring,
        }
    }

    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn num_ports(&self) -> usize {
        self.coloring.len()
    }

    fn stream_gain(&self, tap: &TapFading, port: usize, t: f64) -> Complex64 {
        if tap.doppler_hz == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let w = 2.0 * PI * tap.doppler_hz * t;
        let stream = &tap.streams[port];
        let sum: Complex64 = stream
            .cos_angles
            .iter()
            .zip(&stream.phases)
            .map(|(c, phi)| Complex64::from_polar(1.0, w * c + phi))
            .sum();
        sum / (SINUSOIDS as f64).sqrt()
    }

    /// Gains of every tap on `port` at time `t` (seconds).
    pub fn gains(&self, port: usize, t: f64) -> Vec<Complex64> {
        let row = &self.coloring[port];
        self.taps
            .iter()
            .map(|tap| {
                if tap.doppler_hz == 0.0 {
                    return Complex64::new(1.0, 0.0);
                }
                row.iter()
                    .enumerate()
                    .take(port + 1)
                    .filter(|(_, l)| **l != 0.0)
                    .map(|(q, l)| self.stream_gain(tap, q, t) * *l)
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::bessel::fading_autocorrelation_oracle;
    use super::*;

    fn single(doppler: f64, seed: u64) -> FadingProcess {
        FadingProcess::with_dopplers([doppler], 1, MimoCorrelation::Low, seed)
    }

    #[test]
    fn static_tap_has_unit_gain() {
        let f = single(0.0, 9);
        for t in [0.0, 0.3, 17.0] {
            assert_eq!(f.gains(0, t), vec![Complex64::new(1.0, 0.0)]);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let a = single(50.0, 1).gains(0, 0.123);
        let b = single(50.0, 1).gains(0, 0.123);
        let c = single(50.0, 2).gains(0, 0.123);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn long_run_power_converges_to_one() {
        // Distinct Doppler lines make cross terms average out over long windows.
        let fd = 100.0;
        for seed in 0..8 {
            let f = single(fd, seed);
            let n = 200_000;
            let dt = 1e-3;
            let p = (0..n).map(|i| f.gains(0, i as f64 * dt)[0].norm_sqr()).sum::<f64>() / n as f64;
            assert!((p - 1.0).abs() < 0.02, "seed {seed}: long-run power {p}");
        }
    }

    #[test]
    fn ensemble_power_over_ten_coherence_times() {
        let fd = 100.0;
        let window = 10.0 / fd;
        let dt = 1e-4;
        let steps = (window / dt) as usize;
        let trials = 400;
        let mean = (0..trials)
            .map(|seed| {
                let f = single(fd, seed);
                (0..steps).map(|i| f.gains(0, i as f64 * dt)[0].norm_sqr()).sum::<f64>() / steps as f64
            })
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 1.0).abs() < 0.02, "ensemble mean power {mean}");
    }

    #[test]
    fn autocorrelation_tracks_bessel() {
        let fd = 100.0;
        let dt = 1e-3;
        let n = 4000;
        let max_lag = 20;
        for seed in 0..4 {
            let f = single(fd, seed);
            let g: Vec<Complex64> = (0..n).map(|i| f.gains(0, i as f64 * dt)[0]).collect();
            let energy: f64 = g.iter().map(Complex64::norm_sqr).sum();
            let mse = (0..=max_lag)
                .map(|m| {
                    let r: f64 = (0..n - m).map(|i| (g[i].conj() * g[i + m]).re).sum::<f64>() / energy;
                    (r - fading_autocorrelation_oracle(fd, m as f64 * dt)).powi(2)
                })
                .sum::<f64>()
                / (max_lag + 1) as f64;
            assert!(mse.sqrt() <= 0.05, "seed {seed}: rmse {}", mse.sqrt());
        }
    }

    #[test]
    fn port_zero_matches_single_port() {
        let one = FadingProcess::with_dopplers([30.0, 5.0], 1, MimoCorrelation::High, 4);
        let two = FadingProcess::with_dopplers([30.0, 5.0], 2, MimoCorrelation::High, 4);
        assert_eq!(one.gains(0, 0.01), two.gains(0, 0.01));
    }

    #[test]
    fn correlated_ports_follow_matrix() {
        for (corr, alpha) in [
            (MimoCorrelation::Low, 0.0),
            (MimoCorrelation::Medium, 0.3),
            (MimoCorrelation::High, 0.9),
        ] {
            // Average over many independently seeded taps at a fixed instant.
            let taps = 4000;
            let f = FadingProcess::with_dopplers(std::iter::repeat_n(10.0, taps), 2, corr, 77);
            let g0 = f.gains(0, 0.05);
            let g1 = f.gains(1, 0.05);
            let cross: Complex64 = g0.iter().zip(&g1).map(|(a, b)| a * b.conj()).sum::<Complex64>() / taps as f64;
            let p0 = g0.iter().map(Complex64::norm_sqr).sum::<f64>() / taps as f64;
            let p1 = g1.iter().map(Complex64::norm_sqr).sum::<f64>() / taps as f64;
            let rho = cross.re / (p0 * p1).sqrt();
            assert!((rho - alpha).abs() < 0.06, "{corr:?}: rho {rho}, want {alpha}");
        }
    }
}
