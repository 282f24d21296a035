//! Named parameter collections and weight initialization.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::Tensor;
use crate::{Error, Result};

/// Index of a parameter inside its [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// An ordered, named collection of trainable tensors. Order is part of the
/// identity: optimizer state and checkpoints align by index.
#[derive(Debug, Default, Clone)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor under a unique name.
    pub fn add(&mut self, name: &str, tensor: Tensor) -> Result<ParamId> {
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(Error::Config(format!("duplicate parameter name '{name}'")));
        }
        self.entries.push((name.to_string(), tensor));
        Ok(ParamId(self.entries.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tensor(&self, index: usize) -> &Tensor {
        &self.entries[index].1
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.entries[index].1
    }

    pub fn entry(&self, index: usize) -> (&str, &Tensor) {
        let (n, t) = &self.entries[index];
        (n, t)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        self.tensor(id.0)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].0
    }

    pub fn index(&self, id: ParamId) -> usize {
        id.0
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|(n, _)| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn total_elements(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }
}

/// Xavier/Glorot uniform initialization for a `[fan_in, fan_out]` weight:
/// entries uniform in `±√(6/(fan_in+fan_out))`.
pub fn xavier_uniform<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("shape matches data")
}

/// Gaussian initialization (embedding tables use σ = 0.02).
pub fn normal_init<R: Rng>(rng: &mut R, shape: Vec<usize>, sigma: f64) -> Tensor {
    let normal = Normal::new(0.0, sigma).expect("sigma must be positive and finite");
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| normal.sample(rng)).collect();
    Tensor::new(shape, data).expect("shape matches data")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn param_set_bookkeeping() {
        let mut p = ParamSet::new();
        let a = p.add("w1", Tensor::zeros(vec![2, 3])).unwrap();
        let b = p.add("w2", Tensor::zeros(vec![3])).unwrap();
        assert!(p.add("w1", Tensor::zeros(vec![1])).is_err());
        assert_eq!(p.len(), 2);
        assert_eq!(p.total_elements(), 9);
        assert_eq!(p.name(a), "w1");
        assert_eq!(p.find("w2"), Some(b));
        assert_eq!(p.find("nope"), None);
        assert_eq!(p.get(a).shape(), &[2, 3]);
    }

    #[test]
    fn initializers_have_expected_ranges() {
        let mut rng = StdRng::seed_from_u64(3);
        let w = xavier_uniform(&mut rng, 30, 50);
        let limit = (6.0 / 80.0_f64).sqrt();
        assert_eq!(w.shape(), &[30, 50]);
        assert!(w.data().iter().all(|v| v.abs() < limit));
        // Not degenerate.
        let spread = w.data().iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(spread > limit * 0.5);

        let e = normal_init(&mut rng, vec![100, 20], 0.02);
        let mean: f64 = e.data().iter().sum::<f64>() / e.numel() as f64;
        let sd: f64 = (e.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / e.numel() as f64)
            .sqrt();
        assert!(mean.abs() < 0.002, "mean {mean}");
        assert!((sd - 0.02).abs() < 0.003, "sd {sd}");
    }
}
