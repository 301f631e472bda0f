use num_complex::Complex64;

use crate::{Error, IqTensor, Result};

fn check_lag(t: &IqTensor, max_lag: usize) -> Result<()> {
    let n = t.dims().num_snapshots;
    if n < max_lag + 1 {
        return Err(Error::invalid("max_lag", format!("needs at least {} snapshots, tensor has {n}", max_lag + 1)));
    }
    Ok(())
}

/// Biased correlation of two series at every lag up to `max_lag`, without normalization.
fn raw_lags(a: &[Complex64], b: &[Complex64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|m| a.iter().zip(&b[m..]).map(|(x, y)| (x.conj() * y).re).sum())
        .collect()
}

fn averaged(a: &IqTensor, b: &IqTensor, max_lag: usize) -> Result<Vec<f64>> {
    let d = a.dims();
    let mut acc = vec![0.0; max_lag + 1];
    let mut series = 0usize;
    for s in 0..d.num_symbols {
        for k in 0..d.num_subcarriers {
            let xa: Vec<Complex64> = a.series(k, s).collect();
            let xb: Vec<Complex64> = b.series(k, s).collect();
            let ea: f64 = raw_lags(&xa, &xa, 0)[0];
            let eb: f64 = raw_lags(&xb, &xb, 0)[0];
            if ea == 0.0 || eb == 0.0 {
                continue;
            }
            let norm = if ea == eb { ea } else { (ea * eb).sqrt() };
            for (acc, r) in acc.iter_mut().zip(raw_lags(&xa, &xb, max_lag)) {
                *acc += r / norm;
            }
            series += 1;
        }
    }
    if series == 0 {
        return Err(Error::ZeroPower("tensor"));
    }
    Ok(acc.into_iter().map(|v| v / series as f64).collect())
}

/// ρ(m) = Re Σ_n conj(x_n) x_{n+m} / Σ_n |x_n|², averaged over (k, s).
/// Series with zero energy are skipped.
pub fn temporal_autocorrelation(t: &IqTensor, max_lag: usize) -> Result<Vec<f64>> {
    check_lag(t, max_lag)?;
    averaged(t, t, max_lag)
}

/// Same estimator across a pair, normalized by the geometric mean of the two energies.
pub fn cross_correlation(a: &IqTensor, b: &IqTensor, max_lag: usize) -> Result<Vec<f64>> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            left: a.dims().shape_string(),
            right: b.dims().shape_string(),
        });
    }
    check_lag(a, max_lag)?;
    averaged(a, b, max_lag)
}

pub const WATERFALL_FLOOR_DB: f64 = -120.0;

/// Per-(subcarrier, snapshot) power in dB, stored subcarrier-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Waterfall {
    pub num_subcarriers: usize,
    pub num_snapshots: usize,
    pub db: Vec<f64>,
}

impl Waterfall {
    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.db[k * self.num_snapshots + n]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.db[k * self.num_snapshots..(k + 1) * self.num_snapshots]
    }

    /// One row per subcarrier, one column per snapshot.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subcarrier");
        for n in 0..self.num_snapshots {
            out.push_str(&format!(",n{n}"));
        }
        out.push('\n');
        for k in 0..self.num_subcarriers {
            out.push_str(&k.to_string());
            for v in self.row(k) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// 10·log10(mean_s |x(k,s,n)|²), floored at `WATERFALL_FLOOR_DB`.
pub fn waterfall(t: &IqTensor) -> Waterfall {
    let d = t.dims();
    let (kc, sc, nc) = (d.num_subcarriers, d.num_symbols, d.num_snapshots);
    let mut db = vec![WATERFALL_FLOOR_DB; kc * nc];
    for n in 0..nc {
        let snap = t.snapshot(n);
        for k in 0..kc {
            let p = (0..sc).map(|s| snap[s * kc + k].norm_sqr()).sum::<f64>() / sc as f64;
            db[k * nc + n] = if p > 0.0 { (10.0 * p.log10()).max(WATERFALL_FLOOR_DB) } else { WATERFALL_FLOOR_DB };
        }
    }
    Waterfall {
        num_subcarriers: kc,
        num_snapshots: nc,
        db,
    }
}
