//! Two-sample comparison of IQ ensembles: magnitude variance, KS and
//! Wasserstein on flattened magnitudes, temporal auto/cross-correlation,
//! waterfalls, and a linear classifier harness.

mod classifier;
mod correlation;
mod stats;

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::waveform::grid_power;
use crate::{Error, GridDims, IqTensor, Result, FORMAT_VERSION};

pub use classifier::{mean_magnitude_features, train_eval_classifier, ClassifierConfig, LinearSvm, MIN_PER_CLASS};
pub use correlation::{cross_correlation, temporal_autocorrelation, waterfall, Waterfall, WATERFALL_FLOOR_DB};
pub use stats::{kolmogorov_p, kolmogorov_q, ks_two_sample, wasserstein_1d, KsResult};

pub const DEFAULT_MAX_LAG: usize = 20;
pub const PHASE_BINS: usize = 36;

/// Scales the tensor so its mean |x|² is 1.
pub fn power_normalize(t: &IqTensor) -> Result<IqTensor> {
    let p = grid_power(t)?;
    if !(p > 0.0) {
        return Err(Error::ZeroPower("tensor"));
    }
    if p == 1.0 {
        return Ok(t.clone());
    }
    Ok(t.scaled(1.0 / p.sqrt()))
}

pub fn magnitudes(t: &IqTensor) -> Vec<f64> {
    t.as_slice().iter().map(|v| v.norm()).collect()
}

/// Population variance of |x| over every element.
pub fn magnitude_variance(t: &IqTensor) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::Empty("tensor"));
    }
    let m = magnitudes(t);
    let n = m.len() as f64;
    let mean = m.iter().sum::<f64>() / n;
    Ok(m.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
}

/// Fraction of samples per phase bin over [-π, π).
pub fn phase_histogram(t: &IqTensor, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for v in t.as_slice() {
        let u = (v.arg() + PI) / (2.0 * PI);
        h[((u * bins as f64) as usize).min(bins - 1)] += 1.0;
    }
    let n = t.len().max(1) as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub format_version: u32,
    pub dims_a: GridDims,
    pub dims_b: GridDims,
    pub var_a: f64,
    pub var_b: f64,
    pub ks_d: f64,
    pub ks_p: f64,
    pub wasserstein: f64,
    pub max_lag: usize,
    pub autocorr_a: Vec<f64>,
    pub autocorr_b: Vec<f64>,
    /// Empty when the two tensors have different dimensions.
    pub crosscorr: Vec<f64>,
    /// Informational only; excluded from pass/fail metrics.
    pub phase_hist_a: Vec<f64>,
    pub phase_hist_b: Vec<f64>,
}

/// Compares two ensembles after power normalization. KS and Wasserstein use
/// the flattened magnitudes; `max_lag` is clipped to the shorter tensor.
pub fn ensemble_report(a: &IqTensor, b: &IqTensor, max_lag: usize) -> Result<EnsembleStats> {
    let na = power_normalize(a)?;
    let nb = power_normalize(b)?;
    let ma = magnitudes(&na);
    let mb = magnitudes(&nb);
    let ks = ks_two_sample(&ma, &mb)?;
    let lag = max_lag.min(a.dims().num_snapshots.min(b.dims().num_snapshots).saturating_sub(1));
    let autocorr_a = temporal_autocorrelation(&na, lag)?;
    let autocorr_b = temporal_autocorrelation(&nb, lag)?;
    let crosscorr = if a.dims() == b.dims() { cross_correlation(&na, &nb, lag)? } else { Vec::new() };
    Ok(EnsembleStats {
        format_version: FORMAT_VERSION,
        dims_a: a.dims(),
        dims_b: b.dims(),
        var_a: magnitude_variance(&na)?,
        var_b: magnitude_variance(&nb)?,
        ks_d: ks.d,
        ks_p: ks.p,
        wasserstein: wasserstein_1d(&ma, &mb)?,
        max_lag: lag,
        autocorr_a,
        autocorr_b,
        crosscorr,
        phase_hist_a: phase_histogram(&na, PHASE_BINS),
        phase_hist_b: phase_histogram(&nb, PHASE_BINS),
    })
}

/// Both empirical CDFs of |x| (after power normalization) on a shared uniform grid.
pub fn magnitude_cdf_csv(a: &IqTensor, b: &IqTensor, points: usize) -> Result<String> {
    let mut ma = magnitudes(&power_normalize(a)?);
    let mut mb = magnitudes(&power_normalize(b)?);
    ma.sort_by(f64::total_cmp);
    mb.sort_by(f64::total_cmp);
    let hi = ma.last().copied().unwrap_or(0.0).max(mb.last().copied().unwrap_or(0.0));
    let points = points.max(2);
    let ecdf = |s: &[f64], x: f64| s.partition_point(|v| *v <= x) as f64 / s.len() as f64;
    let mut out = String::from("magnitude,cdf_a,cdf_b\n");
    for i in 0..points {
        let x = hi * i as f64 / (points - 1) as f64;
        let _ = writeln!(out, "{x},{},{}", ecdf(&ma, x), ecdf(&mb, x));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(dims: GridDims, seed: u64) -> IqTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        IqTensor::from_fn(dims, |_, _, _| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
    }

    #[test]
    fn normalize_examples() {
        let dims = GridDims::new(8, 2, 5, 30).unwrap();
        let unit = IqTensor::from_fn(dims, |_, _, _| Complex64::new(0.0, 1.0));
        let n = power_normalize(&unit).unwrap();
        assert!(n.as_slice().iter().zip(unit.as_slice()).all(|(a, b)| (a - b).norm() < 1e-12));

        let t = random(dims, 1);
        let back = power_normalize(&t.scaled(3.0)).unwrap();
        let once = power_normalize(&t).unwrap();
        assert!(back.as_slice().iter().zip(once.as_slice()).all(|(a, b)| (a - b).norm() < 1e-12));

        assert!(matches!(power_normalize(&IqTensor::zeros(dims)), Err(Error::ZeroPower(_))));
    }

    #[test]
    fn variance_examples() {
        let dims = GridDims::new(4, 1, 2, 30).unwrap();
        let constant = IqTensor::from_fn(dims, |k, _, _| Complex64::from_polar(1.0, k as f64));
        assert!(magnitude_variance(&constant).unwrap() < 1e-30);
        let two = IqTensor::from_fn(dims, |k, _, _| Complex64::new(if k % 2 == 0 { 0.0 } else { 2.0 }, 0.0));
        assert_eq!(magnitude_variance(&two).unwrap(), 1.0);
    }

    #[test]
    fn self_report_is_identity_fingerprint() {
        let t = random(GridDims::new(12, 2, 30, 30).unwrap(), 4);
        let r = ensemble_report(&t, &t, 10).unwrap();
        assert_eq!(r.ks_d, 0.0);
        assert_eq!(r.ks_p, 1.0);
        assert_eq!(r.wasserstein, 0.0);
        assert_eq!(r.var_a, r.var_b);
        assert_eq!(r.crosscorr, r.autocorr_a);
        assert_eq!(r.autocorr_a[0], 1.0);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"format_version\":1"));
    }

    #[test]
    fn mismatched_dims_still_report_without_crosscorr() {
        let a = random(GridDims::new(12, 2, 30, 30).unwrap(), 4);
        let b = random(GridDims::new(12, 2, 10, 30).unwrap(), 5);
        let r = ensemble_report(&a, &b, 20).unwrap();
        assert_eq!(r.max_lag, 9);
        assert!(r.crosscorr.is_empty());
    }

    #[test]
    fn cdf_csv_shape() {
        let a = random(GridDims::new(4, 1, 10, 30).unwrap(), 1);
        let csv = magnitude_cdf_csv(&a, &a, 50).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 51);
        assert!(lines[50].ends_with(",1,1"));
    }

    #[test]
    fn phase_histogram_sums_to_one() {
        let a = random(GridDims::new(8, 2, 10, 30).unwrap(), 9);
        let h = phase_histogram(&a, PHASE_BINS);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn normalize_unit_power_and_idempotent(seed in 0u64..1000, scale in 0.01f64..100.0) {
            let t = random(GridDims::new(6, 2, 4, 30).unwrap(), seed).scaled(scale);
            let n = power_normalize(&t).unwrap();
            prop_assert!((grid_power(&n).unwrap() - 1.0).abs() < 1e-12);
            let nn = power_normalize(&n).unwrap();
            prop_assert!(nn.as_slice().iter().zip(n.as_slice()).all(|(a, b)| (a - b).norm() < 1e-12));
        }

        #[test]
        fn autocorr_lag0_is_one(seed in 0u64..1000) {
            let t = random(GridDims::new(4, 2, 8, 30).unwrap(), seed);
            prop_assert_eq!(temporal_autocorrelation(&t, 3).unwrap()[0], 1.0);
        }
    }
}
