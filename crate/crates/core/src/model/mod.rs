//! Targets, proposals and importance weights.
//!
//! All weights are handled in log space. A model pairs an unnormalised log
//! target `log π_u` with a normalised log proposal `log q` and a sampler for
//! `q`; the log weight is their difference.

mod gaussian;
mod logistic;
mod mixture;
mod student_t;
pub mod wdbc;

pub use gaussian::{GaussianMixtureTarget, IsotropicGaussian};
pub use logistic::{
    fit_laplace, DefensiveMixtureProposal, LaplaceApproximation, LogisticPosterior,
    MultivariateNormal,
};
pub use mixture::{mixture_f1, mixture_f2, mixture_model, MixtureModel, MIXTURE_DIM, MIXTURE_DOF};
pub use student_t::StudentTProposal;

use crate::error::{IsirError, Result};
use rand::Rng;

/// State-space dimension of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dim {
    Continuous(usize),
    Discrete,
}

/// A target/proposal pair.
///
/// Implementations are immutable after construction and may be evaluated from
/// several workers at once.
pub trait LogModel: Sync {
    type State: Clone + Send + Sync + std::fmt::Debug;

    /// Unnormalised log target density; `-inf` outside the support.
    fn log_target(&self, x: &Self::State) -> f64;

    /// Normalised log proposal density.
    fn log_proposal(&self, x: &Self::State) -> f64;

    fn sample_proposal<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    fn dim(&self) -> Dim;

    /// Known upper bound of the (normalised) weight, if any. Used only by
    /// bound checks, never by the samplers.
    fn weight_bound(&self) -> Option<f64> {
        None
    }
}

/// `log π_u(x) - log q(x)`, or `-inf` where the target vanishes.
pub fn log_weight<M: LogModel + ?Sized>(model: &M, x: &M::State) -> Result<f64> {
    let log_target = model.log_target(x);
    if log_target == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let log_proposal = model.log_proposal(x);
    if !log_proposal.is_finite() || log_target.is_nan() || log_target == f64::INFINITY {
        return Err(IsirError::Domination {
            log_target,
            log_proposal,
        });
    }
    Ok(log_target - log_proposal)
}

/// Normalised weights `W_i = w_i / Σ w_j` by max-shift exponentiation.
///
/// Returns `None` when every weight is zero.
pub fn normalised_weights(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut w: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Some(w)
}

/// A log density on `R^d`.
pub trait LogDensity: Sync {
    fn log_density(&self, x: &[f64]) -> f64;
    fn dim(&self) -> usize;
}

/// A normalised log density that can also be sampled.
pub trait Proposal: LogDensity {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64>;
}

/// A continuous model built from a target density and a proposal.
#[derive(Clone, Debug)]
pub struct ContinuousModel<T, Q> {
    pub target: T,
    pub proposal: Q,
    weight_bound: Option<f64>,
}

impl<T: LogDensity, Q: Proposal> ContinuousModel<T, Q> {
    pub fn new(target: T, proposal: Q) -> Result<Self> {
        if target.dim() != proposal.dim() {
            return Err(IsirError::InvalidArgument(format!(
                "target dimension {} differs from proposal dimension {}",
                target.dim(),
                proposal.dim()
            )));
        }
        Ok(Self {
            target,
            proposal,
            weight_bound: None,
        })
    }

    pub fn with_weight_bound(mut self, w_hat: f64) -> Self {
        self.weight_bound = Some(w_hat);
        self
    }
}

impl<T: LogDensity, Q: Proposal> LogModel for ContinuousModel<T, Q> {
    type State = Vec<f64>;

    fn log_target(&self, x: &Vec<f64>) -> f64 {
        self.target.log_density(x)
    }

    fn log_proposal(&self, x: &Vec<f64>) -> f64 {
        self.proposal.log_density(x)
    }

    fn sample_proposal<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.proposal.sample(rng)
    }

    fn dim(&self) -> Dim {
        Dim::Continuous(self.target.dim())
    }

    fn weight_bound(&self) -> Option<f64> {
        self.weight_bound
    }
}

/// Adds a constant to the log target of another model.
#[derive(Clone, Debug)]
pub struct Shifted<M> {
    pub inner: M,
    pub shift: f64,
}

impl<M: LogModel> LogModel for Shifted<M> {
    type State = M::State;

    fn log_target(&self, x: &M::State) -> f64 {
        self.inner.log_target(x) + self.shift
    }

    fn log_proposal(&self, x: &M::State) -> f64 {
        self.inner.log_proposal(x)
    }

    fn sample_proposal<R: Rng + ?Sized>(&self, rng: &mut R) -> M::State {
        self.inner.sample_proposal(rng)
    }

    fn dim(&self) -> Dim {
        self.inner.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::DiscreteModel;
    use crate::rng::Substreams;

    #[test]
    fn identical_densities_give_zero_log_weight() {
        let g = IsotropicGaussian::standard(3);
        let m = ContinuousModel::new(g.clone(), g).unwrap();
        let mut rng = Substreams::new(1).at(0, 1);
        for _ in 0..20 {
            let x = m.sample_proposal(&mut rng);
            assert!(log_weight(&m, &x).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn discrete_log_weights_match_mass_ratios() {
        let m = DiscreteModel::new(
            vec![1.0, 2.0, 3.0],
            vec![0.2, 0.5, 0.3],
            vec![0.4, 0.4, 0.2],
            0.0,
        )
        .unwrap();
        for i in 0..3 {
            let lw = log_weight(&m, &i).unwrap();
            assert!((lw - (m.pi[i] / m.q[i]).ln()).abs() < 1e-14);
        }
        let max = (0..3)
            .map(|i| log_weight(&m, &i).unwrap())
            .fold(f64::MIN, f64::max);
        assert!((max - m.w_hat.ln()).abs() < 1e-14);
    }

    #[test]
    fn normal_over_student_t_at_origin() {
        // φ(0) = 1/√(2π); t₃(0) = Γ(2)/(Γ(3/2)√(3π)) = 2/(π√3).
        let m = ContinuousModel::new(
            IsotropicGaussian::standard(1),
            StudentTProposal::new(3.0, vec![0.0]).unwrap(),
        )
        .unwrap();
        let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let t0 = 2.0 / (std::f64::consts::PI * 3f64.sqrt());
        let lw = log_weight(&m, &vec![0.0]).unwrap();
        assert!((lw - (phi0 / t0).ln()).abs() < 1e-13);
    }

    #[test]
    fn domination_violation_is_reported() {
        struct Broken;
        impl LogModel for Broken {
            type State = f64;
            fn log_target(&self, _: &f64) -> f64 {
                0.0
            }
            fn log_proposal(&self, _: &f64) -> f64 {
                f64::NEG_INFINITY
            }
            fn sample_proposal<R: Rng + ?Sized>(&self, _: &mut R) -> f64 {
                0.0
            }
            fn dim(&self) -> Dim {
                Dim::Continuous(1)
            }
        }
        assert!(matches!(
            log_weight(&Broken, &0.0),
            Err(IsirError::Domination { .. })
        ));
    }

    #[test]
    fn zero_target_gives_negative_infinity() {
        let m = DiscreteModel::new(vec![0.0, 1.0], vec![0.5, 0.5], vec![0.3, 0.3], 0.4).unwrap();
        // index 2 is the proposal mass outside the target support
        assert_eq!(log_weight(&m, &2).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn normalised_weights_all_zero() {
        assert!(normalised_weights(&[f64::NEG_INFINITY; 3]).is_none());
    }
}
