//! Linear maximum-margin classifier trained with Pegasos (stochastic
//! sub-gradient descent on the regularized hinge loss).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::power_normalize;
use crate::{Error, IqTensor, Result};

pub const MIN_PER_CLASS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Regularization weight λ.
    pub lambda: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            iterations: 20_000,
            seed: 0,
        }
    }
}

/// Per-subcarrier mean magnitude of the power-normalized tensor.
pub fn mean_magnitude_features(t: &IqTensor) -> Result<Vec<f64>> {
    let t = power_normalize(t)?;
    let d = t.dims();
    let count = (d.num_symbols * d.num_snapshots) as f64;
    let mut f = vec![0.0; d.num_subcarriers];
    for n in 0..d.num_snapshots {
        for (i, v) in t.snapshot(n).iter().enumerate() {
            f[i % d.num_subcarriers] += v.norm();
        }
    }
    f.iter_mut().for_each(|v| *v /= count);
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl LinearSvm {
    /// `labels` are ±1. Features are z-scored with training statistics; the
    /// bias is learned as the weight of a constant feature.
    pub fn train(features: &[Vec<f64>], labels: &[f64], cfg: ClassifierConfig) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let dim = features[0].len();
        let n = features.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|j| features.iter().map(|f| f[j]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..dim)
            .map(|j| {
                let var = features.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 { var.sqrt() } else { 1.0 }
            })
            .collect();
        let z: Vec<Vec<f64>> = features
            .iter()
            .map(|f| {
                let mut v: Vec<f64> = f.iter().zip(&mean).zip(&scale).map(|((x, m), s)| (x - m) / s).collect();
                v.push(1.0);
                v
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut w = vec![0.0; dim + 1];
        for t in 1..=cfg.iterations {
            let i = rng.random_range(0..z.len());
            let eta = 1.0 / (cfg.lambda * t as f64);
            let margin = labels[i] * dot(&w, &z[i]);
            let shrink = 1.0 - eta * cfg.lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(&z[i]) {
                    *wj += eta * labels[i] * xj;
                }
            }
            // Project onto the ball of radius 1/√λ.
            let norm = dot(&w, &w).sqrt();
            let radius = 1.0 / cfg.lambda.sqrt();
            if norm > radius {
                w.iter_mut().for_each(|v| *v *= radius / norm);
            }
        }
        let bias = w.pop().unwrap_or(0.0);
        Ok(Self { weights: w, bias, mean, scale })
    }

    pub fn decision(&self, f: &[f64]) -> f64 {
        f.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .zip(&self.weights)
            .map(|(((x, m), s), w)| (x - m) / s * w)
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, f: &[f64]) -> f64 {
        if self.decision(f) >= 0.0 { 1.0 } else { -1.0 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains on the first `split` fraction of each (seeded) shuffled class and
/// returns accuracy on the rest.
pub fn train_eval_classifier(class_a: &[IqTensor], class_b: &[IqTensor], split: f64, cfg: ClassifierConfig) -> Result<f64> {
    if class_a.len() < MIN_PER_CLASS || class_b.len() < MIN_PER_CLASS {
        return Err(Error::invalid(
            "classifier input",
            format!("needs at least {MIN_PER_CLASS} tensors per class, got {} and {}", class_a.len(), class_b.len()),
        ));
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::invalid("split", format!("must be in (0, 1), got {split}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED);
    let mut train = (Vec::new(), Vec::new());
    let mut test = (Vec::new(), Vec::new());
    for (class, label) in [(class_a, 1.0), (class_b, -1.0)] {
        let mut idx: Vec<usize> = (0..class.len()).collect();
        idx.shuffle(&mut rng);
        let cut = ((class.len() as f64 * split).round() as usize).clamp(1, class.len() - 1);
        for (pos, &i) in idx.iter().enumerate() {
            let f = mean_magnitude_features(&class[i])?;
            let bucket = if pos < cut { &mut train } else { &mut test };
            bucket.0.push(f);
            bucket.1.push(label);
        }
    }
    let dim = train.0[0].len();
    if train.0.iter().chain(&test.0).any(|f| f.len() != dim) {
        return Err(Error::invalid("classifier input", "all tensors must have the same number of subcarriers"));
    }
    let model = LinearSvm::train(&train.0, &train.1, cfg)?;
    let correct = test.0.iter().zip(&test.1).filter(|(f, y)| model.predict(f) == **y).count();
    Ok(correct as f64 / test.0.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GridDims;
    use num_complex::Complex64;
    use rand_distr::{Distribution, StandardNormal};

    fn noisy(dims: GridDims, rng: &mut ChaCha8Rng, shape: impl Fn(usize) -> f64) -> IqTensor {
        IqTensor::from_fn(dims, |k, _, _| {
            let n: f64 = StandardNormal.sample(rng);
            Complex64::new(shape(k) + 0.05 * n, 0.0)
        })
    }

    #[test]
    fn separable_classes() {
        let dims = GridDims::new(16, 1, 4, 30).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<IqTensor> = (0..20).map(|_| noisy(dims, &mut rng, |k| if k < 8 { 1.5 } else { 0.3 })).collect();
        let b: Vec<IqTensor> = (0..20).map(|_| noisy(dims, &mut rng, |k| if k < 8 { 0.3 } else { 1.5 })).collect();
        assert_eq!(train_eval_classifier(&a, &b, 0.8, ClassifierConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn indistinguishable_classes_near_chance() {
        let dims = GridDims::new(16, 1, 4, 30).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<IqTensor> = (0..100).map(|_| noisy(dims, &mut rng, |_| 1.0)).collect();
        let acc = train_eval_classifier(&a, &a, 0.5, ClassifierConfig::default()).unwrap();
        // 100 test tensors: 3σ binomial band around 0.5.
        assert!((acc - 0.5).abs() <= 0.15, "accuracy {acc}");
    }

    #[test]
    fn too_few_samples() {
        let t = IqTensor::from_fn(GridDims::new(4, 1, 2, 30).unwrap(), |_, _, _| Complex64::new(1.0, 0.0));
        let few = vec![t; 9];
        assert!(train_eval_classifier(&few, &few, 0.8, ClassifierConfig::default()).is_err());
    }
}
