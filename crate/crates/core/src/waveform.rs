//! Known reference grid transmitted in every snapshot.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, GridDims, IqTensor, Result};

/// Pilot alphabet: QPSK rotated by pi/4 so every point is exactly unit-modulus in f64.
const PILOTS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// Unit-modulus pilot grid X(k, s). There is no snapshot index: the same
/// grid is sent in every snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSignal {
    seed: u64,
    num_subcarriers: usize,
    num_symbols: usize,
    values: Vec<Complex64>,
}

impl ReferenceSignal {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    #[inline]
    pub fn get(&self, k: usize, s: usize) -> Complex64 {
        self.values[s * self.num_subcarriers + k]
    }

    /// Symbol-major, then subcarrier; matches one snapshot of an [`IqTensor`].
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// The grid repeated over `dims.num_snapshots` snapshots.
    pub fn replicate(&self, dims: GridDims) -> Result<IqTensor> {
        if dims.num_subcarriers != self.num_subcarriers || dims.num_symbols != self.num_symbols {
            return Err(Error::DimensionMismatch {
                left: format!("reference ({}, {})", self.num_subcarriers, self.num_symbols),
                right: format!("dims {}", dims.shape_string()),
            });
        }
        Ok(IqTensor::from_fn(dims, |k, s, _| self.get(k, s)))
    }
}

/// Deterministic QPSK pilot grid keyed on `seed`.
///
/// The ChaCha stream is consumed in (symbol, subcarrier) order, so the grid
/// depends only on the seed and the (K, S) shape.
pub fn generate_reference(seed: u64, dims: GridDims) -> Result<ReferenceSignal> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..dims.num_subcarriers * dims.num_symbols)
        .map(|_| PILOTS[rng.random_range(0..PILOTS.len())])
        .collect();
    Ok(ReferenceSignal {
        seed,
        num_subcarriers: dims.num_subcarriers,
        num_symbols: dims.num_symbols,
        values,
    })
}

/// Mean of |x|² over every element.
pub fn grid_power(tensor: &IqTensor) -> Result<f64> {
    mean_power(tensor.as_slice())
}

pub(crate) fn mean_power(samples: &[Complex64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("tensor"));
    }
    Ok(samples.iter().map(Complex64::norm_sqr).sum::<f64>() / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn reference_is_unit_modulus() {
        let r = generate_reference(7, GridDims::default()).unwrap();
        assert_eq!(r.values().len(), 360 * 4);
        assert!(r.values().iter().all(|x| x.norm_sqr() == 1.0));
    }

    #[test]
    fn reference_is_deterministic_and_seed_dependent() {
        let dims = GridDims::default();
        let a = generate_reference(7, dims).unwrap();
        let b = generate_reference(7, dims).unwrap();
        let other = generate_reference(8, dims).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().zip(other.values()).any(|(x, y)| x != y));
    }

    #[test]
    fn reference_ignores_snapshot_count() {
        let a = generate_reference(3, GridDims::new(24, 2, 1, 30).unwrap()).unwrap();
        let b = generate_reference(3, GridDims::new(24, 2, 500, 30).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reference_uses_all_four_points() {
        let r = generate_reference(1, GridDims::default()).unwrap();
        for p in PILOTS {
            assert!(r.values().contains(&p));
        }
    }

    #[test]
    fn invalid_dims_rejected() {
        assert!(generate_reference(1, GridDims { subcarrier_spacing_khz: 17, ..Default::default() }).is_err());
    }

    #[test]
    fn grid_power_examples() {
        let dims = GridDims::new(5, 1, 1, 15).unwrap();
        let ones = IqTensor::from_fn(dims, |_, _, _| c(1.0, 0.0));
        assert_eq!(grid_power(&ones).unwrap(), 1.0);
        assert_eq!(grid_power(&IqTensor::zeros(dims)).unwrap(), 0.0);
        let vals = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0), c(2.0, 0.0)];
        let t = IqTensor::from_vec(dims, vals.to_vec()).unwrap();
        assert!((grid_power(&t).unwrap() - 1.6).abs() < 1e-15);
    }

    #[test]
    fn reference_grid_power_is_exactly_one() {
        let dims = GridDims::new(360, 4, 3, 30).unwrap();
        let r = generate_reference(11, dims).unwrap();
        assert_eq!(grid_power(&r.replicate(dims).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn empty_tensor_power_is_error() {
        let t = IqTensor::with_capacity(4, 1, 0, 30);
        assert!(matches!(grid_power(&t), Err(Error::Empty(_))));
    }
}
