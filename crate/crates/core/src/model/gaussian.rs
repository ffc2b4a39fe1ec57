use super::{LogDensity, Proposal};
use crate::error::{IsirError, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Isotropic Gaussian `N(mean, σ² I)`.
#[derive(Clone, Debug)]
pub struct IsotropicGaussian {
    pub mean: Vec<f64>,
    pub sd: f64,
}

impl IsotropicGaussian {
    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            sd: 1.0,
        }
    }
}

impl LogDensity for IsotropicGaussian {
    fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len() as f64;
        let r2: f64 = x
            .iter()
            .zip(&self.mean)
            .map(|(a, m)| (a - m) * (a - m))
            .sum();
        -0.5 * r2 / (self.sd * self.sd) - d * (HALF_LN_2PI + self.sd.ln())
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }
}

impl Proposal for IsotropicGaussian {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + self.sd * z
            })
            .collect()
    }
}

/// Equal-covariance Gaussian mixture `Σ_j ω_j N(m_j, σ² I)`.
#[derive(Clone, Debug)]
pub struct GaussianMixtureTarget {
    modes: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    sd: f64,
}

impl GaussianMixtureTarget {
    pub fn new(modes: Vec<Vec<f64>>, weights: Vec<f64>, sd: f64) -> Result<Self> {
        if modes.is_empty() || modes.len() != weights.len() {
            return Err(IsirError::InvalidArgument(
                "mixture needs one weight per mode".into(),
            ));
        }
        let dim = modes[0].len();
        if dim == 0 || modes.iter().any(|m| m.len() != dim) {
            return Err(IsirError::InvalidArgument(
                "all mixture modes must share one positive dimension".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(IsirError::InvalidArgument(format!(
                "mixture weights must be positive and sum to 1 (sum {total})"
            )));
        }
        if !(sd > 0.0) {
            return Err(IsirError::InvalidArgument("sd must be positive".into()));
        }
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            weights,
            modes,
            sd,
        })
    }

    /// Two-mode mixture with `m1 = (1,…,1)`, `m2 = (-2,0,…,0)`, equal weights
    /// and identity covariance.
    pub fn two_mode(dim: usize) -> Self {
        let m1 = vec![1.0; dim];
        let mut m2 = vec![0.0; dim];
        m2[0] = -2.0;
        Self::new(vec![m1, m2], vec![0.5, 0.5], 1.0).expect("valid mixture")
    }

    /// Exact mean vector.
    pub fn mean(&self) -> Vec<f64> {
        let dim = self.modes[0].len();
        (0..dim)
            .map(|i| {
                self.modes
                    .iter()
                    .zip(&self.weights)
                    .map(|(m, w)| w * m[i])
                    .sum()
            })
            .collect()
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }
}

impl LogDensity for GaussianMixtureTarget {
    fn log_density(&self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        let inv_var = 1.0 / (self.sd * self.sd);
        let terms: Vec<f64> = self
            .modes
            .iter()
            .zip(&self.log_weights)
            .map(|(m, lw)| {
                let r2: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
                lw - 0.5 * r2 * inv_var
            })
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
        lse - d * (HALF_LN_2PI + self.sd.ln())
    }

    fn dim(&self) -> usize {
        self.modes[0].len()
    }
}
