//! Zeroth-order Bessel function of the first kind, used as the reference
//! autocorrelation of classical (Jakes) Doppler fading.

use std::f64::consts::{FRAC_PI_4, PI};

/// Below this argument the power series is used; above it the Hankel
/// asymptotic expansion. Both are accurate to ~1e-10 at the crossover.
const SERIES_LIMIT: f64 = 20.0;

pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        series(x)
    } else {
        asymptotic(x)
    }
}

fn series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && kf > q.sqrt() {
            break;
        }
    }
    sum
}

fn asymptotic(x: f64) -> f64 {
    // Hankel expansion: a_k = prod_{j<=k} (2j-1)^2 / (k! (8x)^k),
    // P = a_0 - a_2 + a_4 - ..., Q = -a_1 + a_3 - a_5 + ...
    let z8 = 8.0 * x;
    let mut a = 1.0;
    let mut p = 1.0;
    let mut q = 0.0;
    for k in 1..30 {
        let odd = (2 * k - 1) as f64;
        let next = a * odd * odd / (k as f64 * z8);
        if next > a {
            break;
        }
        a = next;
        let sign = if (k + 1) / 2 % 2 == 1 { -1.0 } else { 1.0 };
        if k % 2 == 1 {
            q += sign * a;
        } else {
            p += sign * a;
        }
        if a < 1e-17 {
            break;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Classical Doppler autocorrelation J₀(2π f_D τ).
pub fn fading_autocorrelation_oracle(doppler_hz: f64, lag_s: f64) -> f64 {
    bessel_j0(2.0 * PI * doppler_hz * lag_s)
}
