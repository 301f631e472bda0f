use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p: f64,
}

fn sorted(v: &[f64], what: &'static str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty(what));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid(what, "contains NaN"));
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let a = sorted(a, "sample a")?;
    let b = sorted(b, "sample b")?;
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    Ok(KsResult { d, p: kolmogorov_p(ne, d) })
}

/// P(D > d) under the null, from the Kolmogorov distribution at
/// λ = (√n_e + 0.12 + 0.11/√n_e)·d.
pub fn kolmogorov_p(effective_n: f64, d: f64) -> f64 {
    let sn = effective_n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    kolmogorov_q(lambda)
}

/// Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2k²λ²), with the theta-function dual
/// form for small λ where the alternating series converges slowly.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.0 {
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| ((2 * k - 1) as f64).powi(2)).map(|m| (c * m).exp()).sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        2.0 * s
    };
    q.clamp(0.0, 1.0)
}

/// W₁ between the empirical distributions: ∫ |F_a − F_b| dx.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted(a, "sample a")?;
    let b = sorted(b, "sample b")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    if a.len() == b.len() {
        return Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / na);
    }
    let (mut i, mut j) = (0, 0);
    let mut prev = a[0].min(b[0]);
    let mut w = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        w += (i as f64 / na - j as f64 / nb).abs() * (x - prev);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        prev = x;
    }
    Ok(w)
}
