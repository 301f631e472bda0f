//! Channel reconstruction from captured grids.
//!
//! Pipeline: per-snapshot least-squares estimate Ĥ(k,n) = Y/X averaged over
//! symbols, inverse DFT across subcarriers to ĥ(ℓ,n), power delay profile
//! and per-bin Doppler, then selection of dominant taps for re-emulation.
//!
//! Transform convention: the inverse DFT carries the 1/K factor and the
//! forward DFT is unscaled, so `dft(idft(v)) == v`. Absolute PDP levels
//! depend on this choice.

use std::cmp::Ordering;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelScenario, Tap};
use crate::waveform::ReferenceSignal;
use crate::{Error, IqTensor, Result};

/// Ĥ(k, n), stored snapshot-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqChannelEstimate {
    num_subcarriers: usize,
    num_snapshots: usize,
    subcarrier_spacing_hz: f64,
    values: Vec<Complex64>,
}

impl FreqChannelEstimate {
    pub fn from_snapshots(subcarrier_spacing_hz: f64, snapshots: &[Vec<Complex64>]) -> Result<Self> {
        let k = snapshots.first().map(Vec::len).ok_or(Error::Empty("snapshots"))?;
        if snapshots.iter().any(|s| s.len() != k) {
            return Err(Error::DimensionMismatch {
                left: "snapshot lengths".into(),
                right: format!("{k} subcarriers"),
            });
        }
        Ok(Self {
            num_subcarriers: k,
            num_snapshots: snapshots.len(),
            subcarrier_spacing_hz,
            values: snapshots.concat(),
        })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_snapshots(&self) -> usize {
        self.num_snapshots
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.subcarrier_spacing_hz
    }

    pub fn snapshot(&self, n: usize) -> &[Complex64] {
        &self.values[n * self.num_subcarriers..(n + 1) * self.num_subcarriers]
    }

    pub fn get(&self, k: usize, n: usize) -> Complex64 {
        self.values[n * self.num_subcarriers + k]
    }
}

/// ĥ(ℓ, n), stored snapshot-major, with K delay bins of width 1/(K Δf).
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    num_bins: usize,
    num_snapshots: usize,
    bin_duration: f64,
    values: Vec<Complex64>,
}

impl ImpulseResponse {
    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_snapshots(&self) -> usize {
        self.num_snapshots
    }

    pub fn bin_duration(&self) -> f64 {
        self.bin_duration
    }

    pub fn snapshot(&self, n: usize) -> &[Complex64] {
        &self.values[n * self.num_bins..(n + 1) * self.num_bins]
    }

    pub fn get(&self, bin: usize, n: usize) -> Complex64 {
        self.values[n * self.num_bins + bin]
    }

    pub fn snapshot_mut(&mut self, n: usize) -> &mut [Complex64] {
        &mut self.values[n * self.num_bins..(n + 1) * self.num_bins]
    }

    /// Forward (unscaled) DFT of each snapshot back to the subcarrier domain.
    pub fn to_frequency(&self) -> FreqChannelEstimate {
        let mut values = self.values.clone();
        let fft = FftPlanner::new().plan_fft_forward(self.num_bins);
        for chunk in values.chunks_mut(self.num_bins) {
            fft.process(chunk);
        }
        FreqChannelEstimate {
            num_subcarriers: self.num_bins,
            num_snapshots: self.num_snapshots,
            subcarrier_spacing_hz: 1.0 / (self.bin_duration * self.num_bins as f64),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDelayProfile {
    pub power: Vec<f64>,
    pub bin_duration: f64,
}

impl PowerDelayProfile {
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn delay_of(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_duration
    }
}

/// Ĥ(k,s,n) = Y(k,s,n) / X(k,s), averaged over the symbols of each snapshot.
pub fn estimate_freq_channel(y: &IqTensor, x: &ReferenceSignal) -> Result<FreqChannelEstimate> {
    let dims = y.dims();
    if dims.num_subcarriers != x.num_subcarriers() || dims.num_symbols != x.num_symbols() {
        return Err(Error::DimensionMismatch {
            left: format!("captured grid {}", dims.shape_string()),
            right: format!("reference ({}, {})", x.num_subcarriers(), x.num_symbols()),
        });
    }
    let k_count = dims.num_subcarriers;
    let inv_symbols = 1.0 / dims.num_symbols as f64;
    let mut values = Vec::with_capacity(k_count * dims.num_snapshots);
    for n in 0..dims.num_snapshots {
        let snap = y.snapshot(n);
        for k in 0..k_count {
            let sum: Complex64 = (0..dims.num_symbols).map(|s| snap[s * k_count + k] / x.get(k, s)).sum();
            values.push(if dims.num_symbols == 1 { sum } else { sum * inv_symbols });
        }
    }
    Ok(FreqChannelEstimate {
        num_subcarriers: k_count,
        num_snapshots: dims.num_snapshots,
        subcarrier_spacing_hz: dims.subcarrier_spacing_hz(),
        values,
    })
}

/// Inverse DFT across subcarriers, per snapshot, with 1/K scaling.
pub fn impulse_response(h_hat: &FreqChannelEstimate) -> Result<ImpulseResponse> {
    let k_count = h_hat.num_subcarriers;
    if k_count < 2 {
        return Err(Error::invalid("channel estimate", format!("need >= 2 subcarriers, got {k_count}")));
    }
    let mut values = h_hat.values.clone();
    let ifft = FftPlanner::new().plan_fft_inverse(k_count);
    let scale = 1.0 / k_count as f64;
    for chunk in values.chunks_mut(k_count) {
        ifft.process(chunk);
        chunk.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(ImpulseResponse {
        num_bins: k_count,
        num_snapshots: h_hat.num_snapshots,
        bin_duration: 1.0 / (k_count as f64 * h_hat.subcarrier_spacing_hz),
        values,
    })
}

/// P(ℓ) = mean over snapshots of |ĥ(ℓ, n)|².
pub fn power_delay_profile(h: &ImpulseResponse) -> Result<PowerDelayProfile> {
    if h.num_snapshots == 0 {
        return Err(Error::Empty("impulse response"));
    }
    let mut power = vec![0.0; h.num_bins];
    for n in 0..h.num_snapshots {
        for (p, v) in power.iter_mut().zip(h.snapshot(n)) {
            *p += v.norm_sqr();
        }
    }
    let inv = 1.0 / h.num_snapshots as f64;
    power.iter_mut().for_each(|p| *p *= inv);
    Ok(PowerDelayProfile {
        power,
        bin_duration: h.bin_duration,
    })
}

/// RMS width of the PDP in seconds.
pub fn rms_delay_spread(pdp: &PowerDelayProfile) -> Result<f64> {
    if pdp.power.is_empty() {
        return Err(Error::Empty("power delay profile"));
    }
    let total = pdp.total_power();
    if !(total > 0.0) {
        return Err(Error::ZeroPower("power delay profile"));
    }
    // Moments in bin units keep integer-bin profiles exact.
    let mean = pdp.power.iter().enumerate().map(|(l, p)| p * l as f64).sum::<f64>() / total;
    let var = pdp
        .power
        .iter()
        .enumerate()
        .map(|(l, p)| p * (l as f64 - mean).powi(2))
        .sum::<f64>()
        / total;
    Ok(var.sqrt() * pdp.bin_duration)
}

/// Checks that snapshot times are uniformly spaced and returns the spacing.
pub fn uniform_interval(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::invalid("snapshot times", "need at least two snapshots"));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::invalid("snapshot times", "must be increasing"));
    }
    let tol = 1e-6 * dt;
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > tol {
            return Err(Error::invalid(
                "snapshot times",
                format!("non-uniform spacing at index {i}: {} vs mean {dt}", w[1] - w[0]),
            ));
        }
    }
    Ok(dt)
}

/// Dominant |Doppler| per delay bin: the peak of the two-sided DFT of
/// ĥ(ℓ, ·) over snapshots, folded to a nonnegative frequency. Resolution is
/// 1/(N Δt). Ties resolve to the lowest |f|.
pub fn doppler_profile(h: &ImpulseResponse, snapshot_times: &[f64]) -> Result<Vec<f64>> {
    let n_snap = h.num_snapshots;
    if n_snap < 8 {
        return Err(Error::invalid("impulse response", format!("need >= 8 snapshots, got {n_snap}")));
    }
    if snapshot_times.len() != n_snap {
        return Err(Error::DimensionMismatch {
            left: format!("{} snapshot times", snapshot_times.len()),
            right: format!("{n_snap} snapshots"),
        });
    }
    let dt = uniform_interval(snapshot_times)?;
    let resolution = 1.0 / (n_snap as f64 * dt);
    let fft = FftPlanner::new().plan_fft_forward(n_snap);
    let mut series = vec![Complex64::new(0.0, 0.0); n_snap];
    let folded = |j: usize| -> f64 {
        let signed = if j <= n_snap / 2 { j as f64 } else { j as f64 - n_snap as f64 };
        signed.abs() * resolution
    };
    let mut out = Vec::with_capacity(h.num_bins);
    for bin in 0..h.num_bins {
        for (n, v) in series.iter_mut().enumerate() {
            *v = h.get(bin, n);
        }
        fft.process(&mut series);
        let mut best = (0usize, f64::MIN);
        for (j, v) in series.iter().enumerate() {
            let mag = v.norm_sqr();
            let better = match mag.partial_cmp(&best.1) {
                Some(Ordering::Greater) => true,
                Some(Ordering::Equal) => folded(j) < folded(best.0),
                _ => false,
            };
            if better {
                best = (j, mag);
            }
        }
        out.push(folded(best.0));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapSelectionPolicy {
    pub max_taps: usize,
    /// Bins weaker than the strongest by more than this (negative dB) are dropped.
    pub power_floor_db: f64,
}

impl Default for TapSelectionPolicy {
    fn default() -> Self {
        Self {
            max_taps: 12,
            power_floor_db: -25.0,
        }
    }
}

/// Keeps the strongest bins within the power floor, at most `max_taps` of
/// them, and returns taps ordered by delay with power relative to the
/// strongest bin.
pub fn select_dominant_taps(pdp: &PowerDelayProfile, doppler_hz: &[f64], policy: TapSelectionPolicy) -> Result<Vec<Tap>> {
    if pdp.power.is_empty() {
        return Err(Error::Empty("power delay profile"));
    }
    if policy.max_taps == 0 {
        return Err(Error::invalid("tap selection policy", "max_taps must be >= 1"));
    }
    if doppler_hz.len() != pdp.power.len() {
        return Err(Error::DimensionMismatch {
            left: format!("{} doppler bins", doppler_hz.len()),
            right: format!("{} delay bins", pdp.power.len()),
        });
    }
    let mut order: Vec<usize> = (0..pdp.power.len()).collect();
    order.sort_by(|&a, &b| {
        pdp.power[b]
            .partial_cmp(&pdp.power[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let strongest = pdp.power[order[0]];
    if !(strongest > 0.0) {
        return Err(Error::ZeroPower("power delay profile"));
    }
    let mut chosen: Vec<usize> = order
        .into_iter()
        .take_while(|&l| 10.0 * (pdp.power[l] / strongest).log10() >= policy.power_floor_db)
        .take(policy.max_taps)
        .collect();
    chosen.sort_unstable();
    chosen
        .into_iter()
        .map(|l| Tap::new(pdp.delay_of(l) * 1e9, 10.0 * (pdp.power[l] / strongest).log10(), doppler_hz[l]))
        .collect()
}

/// Wraps selected taps into a power-normalized scenario that inherits the
/// remaining settings from `base`.
pub fn export_scenario(taps: &[Tap], base: &ChannelScenario) -> Result<ChannelScenario> {
    if taps.is_empty() {
        return Err(Error::Empty("tap list"));
    }
    let mut scenario = base.clone();
    scenario.taps = taps.to_vec();
    scenario.normalize_power = false;
    let scenario = scenario.normalized();
    scenario.validate()?;
    Ok(scenario)
}

/// Full reconstruction: estimate, delay profile, Doppler, tap selection.
pub fn reconstruct_taps(
    y: &IqTensor,
    x: &ReferenceSignal,
    snapshot_times: &[f64],
    policy: TapSelectionPolicy,
) -> Result<Vec<Tap>> {
    let h = impulse_response(&estimate_freq_channel(y, x)?)?;
    let pdp = power_delay_profile(&h)?;
    let doppler = if h.num_snapshots() >= 8 {
        doppler_profile(&h, snapshot_times)?
    } else {
        vec![0.0; h.num_bins()]
    };
    select_dominant_taps(&pdp, &doppler, policy)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::channel::{apply_channel, frequency_response, parse_tap_file, format_tap_file, uniform_times, ChannelEmulator};
    use crate::waveform::generate_reference;
    use crate::GridDims;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn brute_idft(v: &[Complex64]) -> Vec<Complex64> {
        let k = v.len() as f64;
        (0..v.len())
            .map(|l| {
                v.iter()
                    .enumerate()
                    .map(|(kk, x)| x * Complex64::cis(2.0 * PI * (kk * l) as f64 / k))
                    .sum::<Complex64>()
                    / k
            })
            .collect()
    }

    fn estimate_from(snaps: Vec<Vec<Complex64>>) -> FreqChannelEstimate {
        FreqChannelEstimate::from_snapshots(30e3, &snaps).unwrap()
    }

    #[test]
    fn identity_and_scaled_estimates() {
        let d = GridDims::new(24, 4, 3, 30).unwrap();
        let x = generate_reference(1, d).unwrap();
        let y = x.replicate(d).unwrap();
        let h = estimate_freq_channel(&y, &x).unwrap();
        assert!(h.values.iter().all(|v| *v == c(1.0, 0.0)));
        let g = c(0.3, -1.2);
        let yc = IqTensor::from_fn(d, |k, s, _| g * x.get(k, s));
        let hc = estimate_freq_channel(&yc, &x).unwrap();
        assert!(hc.values.iter().all(|v| (v - g).norm() < 1e-15));
    }

    #[test]
    fn estimate_rejects_dim_mismatch() {
        let x = generate_reference(1, GridDims::new(24, 4, 1, 30).unwrap()).unwrap();
        let y = IqTensor::zeros(GridDims::new(12, 4, 1, 30).unwrap());
        assert!(matches!(estimate_freq_channel(&y, &x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn constant_response_is_impulse_at_zero() {
        let h = impulse_response(&estimate_from(vec![vec![c(1.0, 0.0); 16]])).unwrap();
        assert!((h.get(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((1..16).all(|l| h.get(l, 0).norm() < 1e-15));
    }

    #[test]
    fn linear_phase_is_impulse_at_m() {
        let k = 36;
        for m in [1usize, 5, 17, 35] {
            let v: Vec<Complex64> = (0..k).map(|kk| Complex64::cis(-2.0 * PI * (kk * m) as f64 / k as f64)).collect();
            let h = impulse_response(&estimate_from(vec![v.clone()])).unwrap();
            let brute = brute_idft(&v);
            for l in 0..k {
                assert!((h.get(l, 0) - brute[l]).norm() < 1e-12);
            }
            assert!((h.get(m, 0) - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn impulse_response_needs_two_subcarriers() {
        assert!(impulse_response(&estimate_from(vec![vec![c(1.0, 0.0)]])).is_err());
    }

    proptest! {
        #[test]
        fn dft_idft_round_trip(vals in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..100)) {
            let v: Vec<Complex64> = vals.iter().map(|&(a, b)| c(a, b)).collect();
            let est = estimate_from(vec![v.clone(), v.iter().map(|x| x * 2.0).collect()]);
            let back = impulse_response(&est).unwrap().to_frequency();
            for (a, b) in back.values.iter().zip(&est.values) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn pdp_ignores_per_snapshot_phase(vals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8), phases in prop::collection::vec(0.0f64..6.3, 3)) {
            let v: Vec<Complex64> = vals.iter().map(|&(a, b)| c(a, b)).collect();
            let base = impulse_response(&estimate_from(vec![v.clone(); 3])).unwrap();
            let mut rotated = base.clone();
            for (n, ph) in phases.iter().enumerate() {
                rotated.snapshot_mut(n).iter_mut().for_each(|x| *x *= Complex64::cis(*ph));
            }
            let a = power_delay_profile(&base).unwrap();
            let b = power_delay_profile(&rotated).unwrap();
            for (p, q) in a.power.iter().zip(&b.power) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }

        #[test]
        fn delay_spread_scale_invariant_and_shift_covariant(
            powers in prop::collection::vec(0.0f64..1.0, 4..12),
            scale in 0.01f64..100.0,
            shift in 0usize..5,
        ) {
            prop_assume!(powers.iter().sum::<f64>() > 1e-3);
            let pdp = PowerDelayProfile { power: powers.clone(), bin_duration: 1e-7 };
            let base = rms_delay_spread(&pdp).unwrap();
            let scaled = PowerDelayProfile { power: powers.iter().map(|p| p * scale).collect(), bin_duration: 1e-7 };
            prop_assert!((rms_delay_spread(&scaled).unwrap() - base).abs() <= 1e-9 * base + 1e-18);
            let mut shifted_power = vec![0.0; shift];
            shifted_power.extend_from_slice(&powers);
            let shifted = PowerDelayProfile { power: shifted_power, bin_duration: 1e-7 };
            prop_assert!((rms_delay_spread(&shifted).unwrap() - base).abs() <= 1e-9 * base + 1e-18);
        }
    }

    #[test]
    fn pdp_examples() {
        let v: Vec<Complex64> = (0..8).map(|i| c(i as f64, 1.0)).collect();
        let one = impulse_response(&estimate_from(vec![v.clone()])).unwrap();
        let p1 = power_delay_profile(&one).unwrap();
        for l in 0..8 {
            assert!((p1.power[l] - one.get(l, 0).norm_sqr()).abs() < 1e-15);
        }
        let neg: Vec<Complex64> = v.iter().map(|x| -x).collect();
        let two = impulse_response(&estimate_from(vec![v, neg])).unwrap();
        let p2 = power_delay_profile(&two).unwrap();
        for (a, b) in p1.power.iter().zip(&p2.power) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pdp_of_unit_power_fading_tap_sums_to_one() {
        let d = GridDims::new(64, 1, 1000, 30).unwrap();
        let x = generate_reference(4, d).unwrap();
        let sc = ChannelScenario::new(vec![Tap::new(0.0, 0.0, 100.0).unwrap()]).unwrap().with_seed(8);
        // 1000 snapshots spread over 0.37/f_D steps cover ~370 Doppler periods.
        let y = apply_channel(&x, &sc, &uniform_times(1000, 0.37 / 100.0), 30).unwrap();
        let pdp = power_delay_profile(&impulse_response(&estimate_freq_channel(&y, &x).unwrap()).unwrap()).unwrap();
        assert!((pdp.total_power() - 1.0).abs() < 0.05, "total {}", pdp.total_power());
    }

    #[test]
    fn delay_spread_examples() {
        let single = PowerDelayProfile { power: vec![0.0, 0.0, 3.0, 0.0], bin_duration: 1e-8 };
        assert_eq!(rms_delay_spread(&single).unwrap(), 0.0);
        let t = 5e-8;
        let two = PowerDelayProfile { power: vec![1.0, 0.0, 1.0], bin_duration: t };
        assert!((rms_delay_spread(&two).unwrap() - t).abs() < 1e-20);
        let zero = PowerDelayProfile { power: vec![0.0; 4], bin_duration: t };
        assert!(matches!(rms_delay_spread(&zero), Err(Error::ZeroPower(_))));
    }

    fn series_response(series: impl Fn(usize) -> Complex64, bins: usize, bin: usize, n: usize) -> ImpulseResponse {
        let mut values = vec![c(0.0, 0.0); bins * n];
        for i in 0..n {
            values[i * bins + bin] = series(i);
        }
        ImpulseResponse { num_bins: bins, num_snapshots: n, bin_duration: 1e-8, values }
    }

    #[test]
    fn doppler_static_is_zero() {
        let h = series_response(|_| c(0.7, 0.1), 4, 1, 32);
        let d = doppler_profile(&h, &uniform_times(32, 1e-3)).unwrap();
        assert!(d.iter().all(|f| *f == 0.0));
    }

    #[test]
    fn doppler_on_grid_tone() {
        let n = 64;
        let dt = 1e-3;
        let res = 1.0 / (n as f64 * dt);
        for (j, sign) in [(5usize, 1.0), (11, -1.0)] {
            let f0 = sign * j as f64 * res;
            let h = series_response(|i| Complex64::cis(2.0 * PI * f0 * i as f64 * dt), 6, 3, n);
            let d = doppler_profile(&h, &uniform_times(n, dt)).unwrap();
            assert!((d[3] - f0.abs()).abs() < 1e-9, "{} vs {}", d[3], f0);
        }
    }

    #[test]
    fn doppler_preconditions() {
        let h = series_response(|_| c(1.0, 0.0), 4, 0, 7);
        assert!(doppler_profile(&h, &uniform_times(7, 1e-3)).is_err());
        let h = series_response(|_| c(1.0, 0.0), 4, 0, 8);
        let mut times = uniform_times(8, 1e-3);
        times[4] += 3e-4;
        assert!(doppler_profile(&h, &times).is_err());
    }

    #[test]
    fn doppler_of_jakes_tap_peaks_near_max_doppler() {
        // The classical spectrum concentrates near +/- f_D; count how often the
        // single-realization peak lands within one bin of the grid bin nearest
        // f_D (100 Hz sits between bins at N = 1024).
        let (fd, dt, n) = (100.0, 1e-3, 1024);
        let res = 1.0 / (n as f64 * dt);
        let d = GridDims::new(16, 1, n, 30).unwrap();
        let x = generate_reference(0, d).unwrap();
        let trials: u64 = 40;
        let hits = (0..trials)
            .filter(|&seed| {
                let sc = ChannelScenario::new(vec![Tap::new(0.0, 0.0, fd).unwrap()]).unwrap().with_seed(seed);
                let times = uniform_times(n, dt);
                let y = apply_channel(&x, &sc, &times, 30).unwrap();
                let h = impulse_response(&estimate_freq_channel(&y, &x).unwrap()).unwrap();
                let peak_bin = (doppler_profile(&h, &times).unwrap()[0] / res).round();
                (peak_bin - (fd / res).round()).abs() <= 1.0
            })
            .count() as u64;
        assert!(hits * 10 >= trials * 8, "{hits}/{trials} peaks within one bin of f_D");
    }

    #[test]
    fn select_examples() {
        let single = PowerDelayProfile { power: vec![0.0, 0.0, 2.5, 0.0], bin_duration: 1e-8 };
        let taps = select_dominant_taps(&single, &[0.0; 4], TapSelectionPolicy::default()).unwrap();
        assert_eq!(taps.len(), 1);
        assert_eq!(taps[0].power_db, 0.0);
        assert_eq!(taps[0].delay_ns, 2.0 * 1e-8 * 1e9);

        let lin = |db: f64| 10f64.powf(db / 10.0);
        let pdp = PowerDelayProfile { power: vec![lin(0.0), lin(-3.0), lin(-40.0)], bin_duration: 1e-8 };
        let policy = TapSelectionPolicy { max_taps: 8, power_floor_db: -30.0 };
        assert_eq!(select_dominant_taps(&pdp, &[0.0; 3], policy).unwrap().len(), 2);
    }

    #[test]
    fn select_truncates_and_breaks_ties_by_delay() {
        let pdp = PowerDelayProfile { power: vec![0.5, 1.0, 0.5, 0.5, 0.1], bin_duration: 1e-8 };
        let policy = TapSelectionPolicy { max_taps: 2, power_floor_db: -30.0 };
        let taps = select_dominant_taps(&pdp, &[0.0, 1.0, 2.0, 3.0, 4.0], policy).unwrap();
        let bins: Vec<f64> = taps.iter().map(|t| t.doppler_hz).collect();
        assert_eq!(bins, vec![0.0, 1.0]);
    }

    #[test]
    fn select_errors() {
        let empty = PowerDelayProfile { power: vec![], bin_duration: 1e-8 };
        assert!(matches!(select_dominant_taps(&empty, &[], TapSelectionPolicy::default()), Err(Error::Empty(_))));
        let zero = PowerDelayProfile { power: vec![0.0; 3], bin_duration: 1e-8 };
        assert!(matches!(select_dominant_taps(&zero, &[0.0; 3], TapSelectionPolicy::default()), Err(Error::ZeroPower(_))));
        let pdp = PowerDelayProfile { power: vec![1.0], bin_duration: 1e-8 };
        assert!(select_dominant_taps(&pdp, &[0.0], TapSelectionPolicy { max_taps: 0, power_floor_db: -20.0 }).is_err());
    }

    #[test]
    fn all_zero_capture_is_estimable_but_not_selectable() {
        let d = GridDims::new(16, 2, 8, 30).unwrap();
        let x = generate_reference(1, d).unwrap();
        let h = estimate_freq_channel(&IqTensor::zeros(d), &x).unwrap();
        assert!(h.values.iter().all(|v| *v == c(0.0, 0.0)));
        let pdp = power_delay_profile(&impulse_response(&h).unwrap()).unwrap();
        assert!(rms_delay_spread(&pdp).is_err());
        assert!(select_dominant_taps(&pdp, &vec![0.0; 16], TapSelectionPolicy::default()).is_err());
    }

    #[test]
    fn export_examples() {
        let base = ChannelScenario::new(vec![Tap::new(0.0, 0.0, 0.0).unwrap()]).unwrap().with_seed(5);
        let one = export_scenario(&[Tap::new(10.0, -7.0, 3.0).unwrap()], &base).unwrap();
        assert!(one.normalize_power);
        assert!((one.taps[0].linear_power() - 1.0).abs() < 1e-12);
        assert_eq!(one.seed, 5);

        let two = export_scenario(&[Tap::new(0.0, 0.0, 0.0).unwrap(), Tap::new(10.0, 0.0, 0.0).unwrap()], &base).unwrap();
        for t in &two.taps {
            assert!((t.linear_power() - 0.5).abs() < 1e-12);
        }
        assert!(matches!(export_scenario(&[], &base), Err(Error::Empty(_))));

        let reread = parse_tap_file(&format_tap_file(&two.taps)).unwrap();
        assert_eq!(reread, two.taps);
    }

    #[test]
    fn noiseless_estimate_matches_channel_response() {
        let d = GridDims::new(72, 4, 12, 30).unwrap();
        let x = generate_reference(3, d).unwrap();
        let sc = ChannelScenario::new(vec![
            Tap::new(0.0, 0.0, 30.0).unwrap(),
            Tap::new(93.7, -4.0, 12.0).unwrap(),
            Tap::new(411.0, -9.0, 70.0).unwrap(),
        ])
        .unwrap()
        .with_seed(17);
        let times = uniform_times(12, 2e-3);
        let y = apply_channel(&x, &sc, &times, 30).unwrap();
        let est = estimate_freq_channel(&y, &x).unwrap();
        let mut emu = ChannelEmulator::new(sc.clone(), d).unwrap();
        for (n, &t) in times.iter().enumerate() {
            let truth = emu.step(&x, t, 0.0).unwrap().response.remove(0);
            let direct = frequency_response(&sc, &crate::channel::FadingProcess::new(&sc).gains(0, t), d).unwrap();
            for k in 0..d.num_subcarriers {
                assert!((est.get(k, n) - truth[k]).norm() < 1e-12);
                assert!((direct[k] - truth[k]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn noiseless_round_trip_recovers_bin_grid_taps() {
        let d = GridDims::new(360, 4, 100, 30).unwrap();
        let x = generate_reference(9, d).unwrap();
        let configured = [(0usize, 0.0), (2, -3.0), (5, -10.0)];
        let taps: Vec<Tap> = configured
            .iter()
            .map(|&(b, p)| Tap::new(d.bin_duration() * b as f64 * 1e9, p, 0.0).unwrap())
            .collect();
        let sc = ChannelScenario::new(taps).unwrap();
        let times = uniform_times(100, 1e-3);
        let y = apply_channel(&x, &sc, &times, 30).unwrap();
        let got = reconstruct_taps(&y, &x, &times, TapSelectionPolicy::default()).unwrap();
        assert_eq!(got.len(), 3);
        for (tap, &(b, p)) in got.iter().zip(&configured) {
            assert_eq!(tap.delay_ns, d.bin_duration() * b as f64 * 1e9);
            assert!((tap.power_db - p).abs() < 0.5);
        }
    }
}

