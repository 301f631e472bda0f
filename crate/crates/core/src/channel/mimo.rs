//! Antenna-port correlation for multi-port scenarios.

use super::MimoCorrelation;

impl MimoCorrelation {
    /// Correlation coefficient between the two outermost ports.
    pub fn alpha(self) -> f64 {
        match self {
            MimoCorrelation::Low => 0.0,
            MimoCorrelation::Medium => 0.3,
            MimoCorrelation::High => 0.9,
        }
    }
}

/// Port correlation matrix R[i][j] = alpha^(((i - j) / (P - 1))^2).
pub fn port_correlation(corr: MimoCorrelation, ports: usize) -> Vec<Vec<f64>> {
    let alpha = corr.alpha();
    (0..ports)
        .map(|i| {
            (0..ports)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        let d = (i as f64 - j as f64) / (ports as f64 - 1.0);
                        alpha.powf(d * d)
                    }
                })
                .collect()
        })
        .collect()
}

/// Lower-triangular L with L Lᵀ = R, or `None` if R is not positive definite.
pub fn cholesky(r: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = r.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = r[i][i] - dot;
                if d <= 0.0 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (r[i][j] - dot) / l[j][j];
            }
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_port_high_matrix() {
        let r = port_correlation(MimoCorrelation::High, 4);
        let a: f64 = 0.9;
        assert_eq!(r[0][0], 1.0);
        assert!((r[0][1] - a.powf(1.0 / 9.0)).abs() < 1e-15);
        assert!((r[0][2] - a.powf(4.0 / 9.0)).abs() < 1e-15);
        assert!((r[0][3] - a).abs() < 1e-15);
        assert_eq!(r[1][2], r[0][1]);
    }

    #[test]
    fn cholesky_reconstructs() {
        for corr in [MimoCorrelation::Low, MimoCorrelation::Medium, MimoCorrelation::High] {
            for ports in 1..=4 {
                let r = port_correlation(corr, ports);
                let l = cholesky(&r).unwrap();
                for i in 0..ports {
                    for j in 0..ports {
                        let v: f64 = (0..ports).map(|k| l[i][k] * l[j][k]).sum();
                        assert!((v - r[i][j]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        assert!(cholesky(&[vec![1.0, 1.0], vec![1.0, 1.0]]).is_none());
    }
}
