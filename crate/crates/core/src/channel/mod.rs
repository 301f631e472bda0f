//! Software channel emulator: tapped delay line with Doppler fading, path
//! loss, port correlation and additive noise, applied to reference grids in
//! the frequency domain.

mod bessel;
mod fading;
mod mimo;
mod tapfile;
mod tdl;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::waveform::ReferenceSignal;
use crate::{Error, GridDims, IqTensor, Result};

pub use bessel::{bessel_j0, fading_autocorrelation_oracle};
pub use fading::{FadingProcess, SINUSOIDS};
pub use mimo::{cholesky, port_correlation};
pub use tapfile::{format_tap_file, parse_tap_file, read_tap_file, write_tap_file};
pub use tdl::{load_tdl_preset, scale_table, TdlFamily, TdlPreset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub delay_ns: f64,
    pub power_db: f64,
    pub doppler_hz: f64,
}

impl Tap {
    pub fn new(delay_ns: f64, power_db: f64, doppler_hz: f64) -> Result<Self> {
        let tap = Self {
            delay_ns,
            power_db,
            doppler_hz,
        };
        tap.validate()?;
        Ok(tap)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay_ns >= 0.0 && self.delay_ns.is_finite()) {
            return Err(Error::invalid("tap", format!("delay must be >= 0 ns, got {}", self.delay_ns)));
        }
        if !(self.doppler_hz >= 0.0 && self.doppler_hz.is_finite()) {
            return Err(Error::invalid("tap", format!("doppler must be >= 0 Hz, got {}", self.doppler_hz)));
        }
        if !self.power_db.is_finite() {
            return Err(Error::invalid("tap", format!("power must be finite, got {}", self.power_db)));
        }
        Ok(())
    }

    pub fn linear_power(&self) -> f64 {
        db_to_linear(self.power_db)
    }

    pub fn delay_s(&self) -> f64 {
        self.delay_ns * 1e-9
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MimoCorrelation {
    #[default]
    Low,
    Medium,
    High,
}

/// Everything the emulator needs to reproduce one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScenario {
    pub taps: Vec<Tap>,
    #[serde(default)]
    pub mimo_correlation: MimoCorrelation,
    #[serde(default = "one")]
    pub num_ports: usize,
    /// dBm/Hz; `None` disables noise.
    #[serde(default)]
    pub noise_spectral_density_dbm_hz: Option<f64>,
    #[serde(default)]
    pub path_loss_a_db: f64,
    #[serde(default)]
    pub path_loss_b_db_per_decade: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub normalize_power: bool,
}

fn one() -> usize {
    1
}

impl ChannelScenario {
    /// Single-port, noiseless, unnormalized scenario with the given taps.
    pub fn new(taps: Vec<Tap>) -> Result<Self> {
        let s = Self {
            taps,
            mimo_correlation: MimoCorrelation::Low,
            num_ports: 1,
            noise_spectral_density_dbm_hz: None,
            path_loss_a_db: 0.0,
            path_loss_b_db_per_decade: 0.0,
            seed: 0,
            normalize_power: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, density_dbm_hz: Option<f64>) -> Self {
        self.noise_spectral_density_dbm_hz = density_dbm_hz.filter(|d| *d != f64::NEG_INFINITY);
        self
    }

    /// Rescales tap powers so their linear sum is 1 and sets `normalize_power`.
    pub fn normalized(mut self) -> Self {
        let total: f64 = self.taps.iter().map(Tap::linear_power).sum();
        let offset = 10.0 * total.log10();
        for t in &mut self.taps {
            t.power_db -= offset;
        }
        self.normalize_power = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps.is_empty() {
            return Err(Error::Empty("channel scenario taps"));
        }
        for t in &self.taps {
            t.validate()?;
        }
        if self.num_ports == 0 {
            return Err(Error::invalid("channel scenario", "num_ports must be >= 1"));
        }
        if let Some(n0) = self.noise_spectral_density_dbm_hz {
            if n0.is_nan() || n0 == f64::INFINITY {
                return Err(Error::invalid("channel scenario", format!("noise density {n0} dBm/Hz")));
            }
        }
        if self.normalize_power {
            let total: f64 = self.taps.iter().map(Tap::linear_power).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(
                    "channel scenario",
                    format!("normalize_power set but linear tap powers sum to {total}"),
                ));
            }
        }
        Ok(())
    }

    /// Noise variance per resource element, relative to a 0 dBm transmit grid.
    pub fn noise_variance(&self, subcarrier_spacing_hz: f64) -> f64 {
        match self.noise_spectral_density_dbm_hz {
            Some(n0) if n0.is_finite() => db_to_linear(n0) * subcarrier_spacing_hz,
            _ => 0.0,
        }
    }

    /// Noise power per resource element in dBm; `-inf` when noise is disabled.
    pub fn noise_power_dbm(&self, subcarrier_spacing_hz: f64) -> f64 {
        match self.noise_spectral_density_dbm_hz {
            Some(n0) if n0.is_finite() => n0 + 10.0 * subcarrier_spacing_hz.log10(),
            _ => f64::NEG_INFINITY,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// PL = a + b log10(d).
pub fn path_loss_db(a_db: f64, b_db_per_decade: f64, distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::invalid("distance", format!("must be > 0 m, got {distance_m}")));
    }
    Ok(a_db + b_db_per_decade * distance_m.log10())
}

/// H(k) = Σ_ℓ g_ℓ √P_ℓ exp(−j 2π k Δf τ_ℓ) for k in 0..K.
pub fn frequency_response(scenario: &ChannelScenario, gains: &[Complex64], dims: GridDims) -> Result<Vec<Complex64>> {
    if gains.len() != scenario.taps.len() {
        return Err(Error::DimensionMismatch {
            left: format!("{} fading gains", gains.len()),
            right: format!("{} taps", scenario.taps.len()),
        });
    }
    let df = dims.subcarrier_spacing_hz();
    let mut h = vec![Complex64::new(0.0, 0.0); dims.num_subcarriers];
    for (tap, g) in scenario.taps.iter().zip(gains) {
        let amp = g * tap.linear_power().sqrt();
        let step = -2.0 * PI * df * tap.delay_s();
        for (k, hk) in h.iter_mut().enumerate() {
            *hk += amp * Complex64::cis(step * k as f64);
        }
    }
    Ok(h)
}

/// Output of one emulated snapshot.
#[derive(Debug, Clone)]
pub struct SnapshotOutput {
    /// Noiseless channel response per subcarrier, per port, including `gain_db`.
    pub response: Vec<Vec<Complex64>>,
    /// Received grid per port, symbol-major then subcarrier.
    pub received: Vec<Vec<Complex64>>,
}

/// Stateful emulator for one run: owns the fading process and the noise stream.
#[derive(Debug, Clone)]
pub struct ChannelEmulator {
    scenario: ChannelScenario,
    fading: FadingProcess,
    noise_rng: ChaCha8Rng,
    dims: GridDims,
    last_time: Option<f64>,
}

impl ChannelEmulator {
    pub fn new(scenario: ChannelScenario, dims: GridDims) -> Result<Self> {
        scenario.validate()?;
        dims.validate()?;
        let fading = FadingProcess::new(&scenario);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        noise_rng.set_stream(1);
        Ok(Self {
            scenario,
            fading,
            noise_rng,
            dims,
            last_time: None,
        })
    }

    pub fn scenario(&self) -> &ChannelScenario {
        &self.scenario
    }

    /// Updates tap Dopplers (e.g. from UE speed) without resetting phases or noise.
    pub fn set_dopplers(&mut self, dopplers: &[f64]) -> Result<()> {
        if dopplers.len() != self.scenario.taps.len() {
            return Err(Error::DimensionMismatch {
                left: format!("{} dopplers", dopplers.len()),
                right: format!("{} taps", self.scenario.taps.len()),
            });
        }
        let mut changed = false;
        for (t, &d) in self.scenario.taps.iter_mut().zip(dopplers) {
            if t.doppler_hz != d {
                t.doppler_hz = d;
                changed = true;
            }
        }
        if changed {
            self.scenario.validate()?;
            self.fading = FadingProcess::new(&self.scenario);
        }
        Ok(())
    }

    /// Emulates the snapshot at time `t`. `gain_db` scales the signal (transmit
    /// power minus path loss, relative to the 0 dBm grid reference); noise is
    /// not scaled. Times must be strictly increasing across calls.
    pub fn step(&mut self, x: &ReferenceSignal, t: f64, gain_db: f64) -> Result<SnapshotOutput> {
        if x.num_subcarriers() != self.dims.num_subcarriers || x.num_symbols() != self.dims.num_symbols {
            return Err(Error::DimensionMismatch {
                left: format!("reference ({}, {})", x.num_subcarriers(), x.num_symbols()),
                right: format!("channel dims {}", self.dims.shape_string()),
            });
        }
        if let Some(prev) = self.last_time {
            if !(t > prev) {
                return Err(Error::invalid(
                    "snapshot times",
                    format!("must be strictly increasing, got {t} after {prev}"),
                ));
            }
        }
        self.last_time = Some(t);
        let amp = 10f64.powf(gain_db / 20.0);
        let sigma = (self.scenario.noise_variance(self.dims.subcarrier_spacing_hz()) / 2.0).sqrt();
        let k_count = self.dims.num_subcarriers;
        let mut response = Vec::with_capacity(self.fading.num_ports());
        let mut received = Vec::with_capacity(self.fading.num_ports());
        for port in 0..self.fading.num_ports() {
            let gains = self.fading.gains(port, t);
            let mut h = frequency_response(&self.scenario, &gains, self.dims)?;
            if amp != 1.0 {
                h.iter_mut().for_each(|v| *v *= amp);
            }
            let mut y = Vec::with_capacity(k_count * self.dims.num_symbols);
            for s in 0..self.dims.num_symbols {
                for (k, hk) in h.iter().enumerate() {
                    let mut v = hk * x.get(k, s);
                    if sigma > 0.0 {
                        let re: f64 = StandardNormal.sample(&mut self.noise_rng);
                        let im: f64 = StandardNormal.sample(&mut self.noise_rng);
                        v += Complex64::new(re, im) * sigma;
                    }
                    y.push(v);
                }
            }
            response.push(h);
            received.push(y);
        }
        Ok(SnapshotOutput { response, received })
    }
}

fn check_times(snapshot_times: &[f64]) -> Result<()> {
    if snapshot_times.is_empty() {
        return Err(Error::Empty("snapshot times"));
    }
    if snapshot_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("snapshot times", "must be strictly increasing"));
    }
    Ok(())
}

/// Y(k,s,n) = H_n(k) X(k,s) + w(k,s,n) on every port.
pub fn apply_channel_ports(x: &ReferenceSignal, scenario: &ChannelScenario, snapshot_times: &[f64], subcarrier_spacing_khz: u32) -> Result<Vec<IqTensor>> {
    check_times(snapshot_times)?;
    let dims = GridDims::new(x.num_subcarriers(), x.num_symbols(), snapshot_times.len(), subcarrier_spacing_khz)?;
    let mut emu = ChannelEmulator::new(scenario.clone(), dims)?;
    let mut out: Vec<IqTensor> = (0..scenario.num_ports)
        .map(|_| IqTensor::with_capacity(dims.num_subcarriers, dims.num_symbols, dims.num_snapshots, subcarrier_spacing_khz))
        .collect();
    for &t in snapshot_times {
        let snap = emu.step(x, t, 0.0)?;
        for (tensor, y) in out.iter_mut().zip(&snap.received) {
            tensor.push_snapshot(y)?;
        }
    }
    Ok(out)
}

/// Single-port (port 0) emulation of `x` at the given snapshot times.
pub fn apply_channel(x: &ReferenceSignal, scenario: &ChannelScenario, snapshot_times: &[f64], subcarrier_spacing_khz: u32) -> Result<IqTensor> {
    let mut single = scenario.clone();
    single.num_ports = 1;
    Ok(apply_channel_ports(x, &single, snapshot_times, subcarrier_spacing_khz)?.remove(0))
}

/// Uniform snapshot times `0, dt, 2dt, ...`.
pub fn uniform_times(count: usize, interval_s: f64) -> Vec<f64> {
    (0..count).map(|n| n as f64 * interval_s).collect()
}
