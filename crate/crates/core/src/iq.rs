//! Resource-grid dimensions and the complex sample tensor shared by every stage.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Subcarrier spacings (kHz) accepted for NR numerologies 0..=3.
pub const SUBCARRIER_SPACINGS_KHZ: [u32; 4] = [15, 30, 60, 120];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub num_subcarriers: usize,
    pub num_symbols: usize,
    pub num_snapshots: usize,
    pub subcarrier_spacing_khz: u32,
}

impl Default for GridDims {
    fn default() -> Self {
        Self {
            num_subcarriers: 360,
            num_symbols: 4,
            num_snapshots: 100,
            subcarrier_spacing_khz: 30,
        }
    }
}

impl GridDims {
    pub fn new(
        num_subcarriers: usize,
        num_symbols: usize,
        num_snapshots: usize,
        subcarrier_spacing_khz: u32,
    ) -> Result<Self> {
        let dims = Self {
            num_subcarriers,
            num_symbols,
            num_snapshots,
            subcarrier_spacing_khz,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_subcarriers == 0 || self.num_symbols == 0 || self.num_snapshots == 0 {
            return Err(Error::invalid(
                "grid dims",
                format!("all counts must be >= 1, got {}", self.shape_string()),
            ));
        }
        if !SUBCARRIER_SPACINGS_KHZ.contains(&self.subcarrier_spacing_khz) {
            return Err(Error::invalid(
                "grid dims",
                format!(
                    "subcarrier spacing {} kHz not in {:?}",
                    self.subcarrier_spacing_khz, SUBCARRIER_SPACINGS_KHZ
                ),
            ));
        }
        Ok(())
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        f64::from(self.subcarrier_spacing_khz) * 1e3
    }

    /// Delay-bin width of a K-point inverse DFT across the subcarriers.
    pub fn bin_duration(&self) -> f64 {
        1.0 / (self.num_subcarriers as f64 * self.subcarrier_spacing_hz())
    }

    pub fn len(&self) -> usize {
        self.num_subcarriers * self.num_symbols * self.num_snapshots
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape_string(&self) -> String {
        format!(
            "({}, {}, {})",
            self.num_subcarriers, self.num_symbols, self.num_snapshots
        )
    }
}

/// Complex samples indexed by (subcarrier, symbol, snapshot).
///
/// Storage is snapshot-major, then symbol, then subcarrier, which is also the
/// on-disk order of `iq.bin`.
#[derive(Debug, Clone, PartialEq)]
pub struct IqTensor {
    dims: GridDims,
    data: Vec<Complex64>,
}

impl IqTensor {
    pub fn zeros(dims: GridDims) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); dims.len()],
            dims,
        }
    }

    pub fn from_fn(dims: GridDims, mut f: impl FnMut(usize, usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for n in 0..dims.num_snapshots {
            for s in 0..dims.num_symbols {
                for k in 0..dims.num_subcarriers {
                    data.push(f(k, s, n));
                }
            }
        }
        Self { dims, data }
    }

    pub fn from_vec(dims: GridDims, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                left: format!("{} samples", data.len()),
                right: format!("dims {} = {}", dims.shape_string(), dims.len()),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    fn offset(&self, k: usize, s: usize, n: usize) -> usize {
        (n * self.dims.num_symbols + s) * self.dims.num_subcarriers + k
    }

    #[inline]
    pub fn get(&self, k: usize, s: usize, n: usize) -> Complex64 {
        self.data[self.offset(k, s, n)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, s: usize, n: usize, value: Complex64) {
        let i = self.offset(k, s, n);
        self.data[i] = value;
    }

    /// Samples of one snapshot, symbol-major then subcarrier.
    pub fn snapshot(&self, n: usize) -> &[Complex64] {
        let per = self.dims.num_subcarriers * self.dims.num_symbols;
        &self.data[n * per..(n + 1) * per]
    }

    pub fn snapshot_mut(&mut self, n: usize) -> &mut [Complex64] {
        let per = self.dims.num_subcarriers * self.dims.num_symbols;
        &mut self.data[n * per..(n + 1) * per]
    }

    /// Time series over snapshots for one (subcarrier, symbol) cell.
    pub fn series(&self, k: usize, s: usize) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.dims.num_snapshots).map(move |n| self.get(k, s, n))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// Appends one snapshot's worth of samples, growing the snapshot count.
    pub fn push_snapshot(&mut self, samples: &[Complex64]) -> Result<()> {
        let per = self.dims.num_subcarriers * self.dims.num_symbols;
        if samples.len() != per {
            return Err(Error::DimensionMismatch {
                left: format!("{} samples", samples.len()),
                right: format!("{per} per snapshot"),
            });
        }
        self.data.extend_from_slice(samples);
        self.dims.num_snapshots = self.data.len() / per;
        Ok(())
    }

    /// An empty tensor with the given per-snapshot shape, ready for [`Self::push_snapshot`].
    pub fn with_capacity(num_subcarriers: usize, num_symbols: usize, snapshots: usize, scs_khz: u32) -> Self {
        Self {
            dims: GridDims {
                num_subcarriers,
                num_symbols,
                num_snapshots: 0,
                subcarrier_spacing_khz: scs_khz,
            },
            data: Vec::with_capacity(num_subcarriers * num_symbols * snapshots),
        }
    }
}
