//! Stochastic-approximation tuning of the number of proposals.
//!
//! `λ = 1 + e^ξ` and `ξ_k = Proj{ξ_{k−1} − γ_k [c′(λ)(1 − ε̂²) + 2c(λ)ε̂′]}`
//! with `γ_k = k^{−β}`; `Proj` clamps to `[0, ln(N_max − 1)]`.

use crate::error::{IsirError, Result};
use crate::kernel::{isir_step_fractional, StepRecord};
use crate::model::LogModel;
use crate::rng::Substreams;
use serde::{Deserialize, Serialize};

/// Per-iteration cost model. The convergence theory covers the affine case.
pub trait Cost: Sync {
    fn c(&self, lambda: f64) -> f64;
    fn dc(&self, lambda: f64) -> f64;
}

/// `c(λ) = a + bλ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineCost {
    pub a: f64,
    pub b: f64,
}

impl AffineCost {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(IsirError::InvalidArgument(format!(
                "affine cost needs a ≥ 0 and b > 0, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    /// Minimiser of `u(λ) = c(λ)(d + λ − 1)/(λ − 1)` over `λ > 1`.
    pub fn minimiser(&self, d: f64) -> f64 {
        (d * (self.a / self.b + 1.0)).sqrt() + 1.0
    }

    /// `min u = 2√(bd(a + b)) + a + b + bd`.
    pub fn minimum(&self, d: f64) -> f64 {
        2.0 * (self.b * d * (self.a + self.b)).sqrt() + self.a + self.b + self.b * d
    }
}

impl Cost for AffineCost {
    fn c(&self, lambda: f64) -> f64 {
        self.a + self.b * lambda
    }

    fn dc(&self, _lambda: f64) -> f64 {
        self.b
    }
}

/// Least-squares fit of `T = a + bN` to pilot timings, rescaled to
/// `c(λ) = a/b + λ`.
pub fn fit_cost(timings: &[(usize, f64)]) -> Result<AffineCost> {
    let mut distinct: Vec<usize> = timings.iter().map(|t| t.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(IsirError::InvalidArgument("≥2 distinct N required".into()));
    }
    if timings.iter().any(|t| !(t.1 > 0.0) || !t.1.is_finite()) {
        return Err(IsirError::InvalidArgument(
            "timings must be positive".into(),
        ));
    }
    let n = timings.len() as f64;
    let mx = timings.iter().map(|t| t.0 as f64).sum::<f64>() / n;
    let my = timings.iter().map(|t| t.1).sum::<f64>() / n;
    let sxy: f64 = timings.iter().map(|t| (t.0 as f64 - mx) * (t.1 - my)).sum();
    let sxx: f64 = timings.iter().map(|t| (t.0 as f64 - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    if !(b > 0.0) {
        return Err(IsirError::CostNotIncreasing { slope: b });
    }
    AffineCost::new((a / b).max(0.0), 1.0)
}

/// `L̃ = (1 + ε)/(1 − ε) · c(λ)`.
pub fn loss_tilde<C: Cost + ?Sized>(eps: f64, cost: &C, lambda: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(IsirError::InvalidArgument(format!(
            "ε must lie in [0, 1), got {eps}"
        )));
    }
    Ok((1.0 + eps) / (1.0 - eps) * cost.c(lambda))
}

/// Upper end of the projection interval, `ln(N_max − 1)` (∞ when unbounded).
pub fn xi_max(n_max: Option<usize>) -> f64 {
    n_max.map_or(f64::INFINITY, |n| ((n - 1) as f64).ln())
}

/// `min{max{0, ξ}, ln(N_max − 1)}`.
pub fn project(xi: f64, n_max: Option<usize>) -> f64 {
    xi.max(0.0).min(xi_max(n_max))
}

pub fn lambda_of(xi: f64) -> f64 {
    1.0 + xi.exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    /// Exponent of the step size `γ_k = k^{−β}`.
    pub beta_exponent: f64,
    /// `None` means unbounded.
    pub n_max: Option<usize>,
    /// Defaults to `λ₀ = N_max/2`, or 16 when unbounded.
    pub xi0: Option<f64>,
    pub n_iters: usize,
    pub burn_in_fraction: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            beta_exponent: 0.75,
            n_max: Some(8193),
            xi0: None,
            n_iters: 100_000,
            burn_in_fraction: 0.1,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_exponent > 0.0) {
            return Err(IsirError::InvalidArgument(
                "step exponent must be positive".into(),
            ));
        }
        if matches!(self.n_max, Some(n) if n < 2) {
            return Err(IsirError::InvalidArgument(
                "N_max must be at least 2".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(IsirError::InvalidArgument(
                "burn-in fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn initial_xi(&self) -> f64 {
        let xi = self.xi0.unwrap_or_else(|| {
            let lambda0 = self.n_max.map_or(16.0, |n| n as f64 / 2.0);
            (lambda0 - 1.0).max(1.0).ln()
        });
        project(xi, self.n_max)
    }

    pub fn step_size(&self, k: u64) -> f64 {
        (k as f64).powf(-self.beta_exponent)
    }

    pub fn burn_in(&self) -> usize {
        (self.n_iters as f64 * self.burn_in_fraction).floor() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdaptState {
    pub xi: f64,
    pub lambda: f64,
    pub k: u64,
}

/// Raw (unprojected) increment `−γ_k [c′(λ)(1 − ε̂²) + 2c(λ)ε̂′]`.
pub fn increment<C: Cost + ?Sized>(
    cost: &C,
    lambda: f64,
    eps_hat: f64,
    deps_hat: f64,
    gamma: f64,
) -> f64 {
    -gamma * (cost.dc(lambda) * (1.0 - eps_hat * eps_hat) + 2.0 * cost.c(lambda) * deps_hat)
}

/// One adaptive step: an i-SIR move at `λ = 1 + e^{ξ_{k−1}}` followed by
/// the projected update. Returns the new state, `ξ_k`, the step record and
/// the raw increment.
#[allow(clippy::too_many_arguments)]
pub fn adapt_step<M: LogModel, C: Cost + ?Sized>(
    model: &M,
    x_prev: &M::State,
    xi_prev: f64,
    cost: &C,
    k: u64,
    cfg: &AdaptConfig,
    streams: &Substreams,
) -> Result<(M::State, f64, StepRecord<M::State>, f64)> {
    let lambda = lambda_of(xi_prev);
    let rec = isir_step_fractional(model, x_prev, lambda, streams, k)?;
    let inc = increment(cost, lambda, rec.eps_hat, rec.deps_hat, cfg.step_size(k));
    let xi = project(xi_prev + inc, cfg.n_max);
    Ok((rec.new_state.clone(), xi, rec, inc))
}

/// Output of [`run_adaptive`].
#[derive(Clone, Debug)]
pub struct AdaptiveRun<S> {
    pub trace: Vec<StepRecord<S>>,
    /// `λ_k` after each update.
    pub lambda_trace: Vec<f64>,
    pub increments: Vec<f64>,
    pub final_lambda: f64,
}

impl<S> AdaptiveRun<S> {
    pub fn post_burn_in(&self, cfg: &AdaptConfig) -> &[StepRecord<S>] {
        &self.trace[cfg.burn_in().min(self.trace.len())..]
    }
}

/// Runs the adaptive sampler from `x0` for `cfg.n_iters` iterations.
pub fn run_adaptive<M: LogModel, C: Cost + ?Sized>(
    model: &M,
    x0: M::State,
    cost: &C,
    cfg: &AdaptConfig,
    seed: u64,
) -> Result<AdaptiveRun<M::State>> {
    run_adaptive_with(model, x0, cost, cfg, seed, |_, _| {})
}

/// [`run_adaptive`] with a per-iteration observer `(state, record)`.
pub fn run_adaptive_with<M: LogModel, C: Cost + ?Sized, F>(
    model: &M,
    x0: M::State,
    cost: &C,
    cfg: &AdaptConfig,
    seed: u64,
    mut observe: F,
) -> Result<AdaptiveRun<M::State>>
where
    F: FnMut(&AdaptState, &StepRecord<M::State>),
{
    cfg.validate()?;
    let streams = Substreams::new(seed);
    let mut xi = cfg.initial_xi();
    let mut x = x0;
    let mut run = AdaptiveRun {
        trace: Vec::with_capacity(cfg.n_iters),
        lambda_trace: Vec::with_capacity(cfg.n_iters),
        increments: Vec::with_capacity(cfg.n_iters),
        final_lambda: lambda_of(xi),
    };
    for k in 1..=cfg.n_iters as u64 {
        let (next, xi_new, rec, inc) = adapt_step(model, &x, xi, cost, k, cfg, &streams)?;
        x = next;
        xi = xi_new;
        let state = AdaptState {
            xi,
            lambda: lambda_of(xi),
            k,
        };
        observe(&state, &rec);
        run.lambda_trace.push(state.lambda);
        run.increments.push(inc);
        run.trace.push(rec);
    }
    run.final_lambda = lambda_of(xi);
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::{family::b_lambda, DiscreteModel};
    use proptest::prelude::*;

    #[test]
    fn projection_clamps() {
        assert_eq!(project(-0.5, Some(101)), 0.0);
        assert!((project(7.0, Some(101)) - 4.605_170_185_988_092).abs() < 1e-12);
        assert_eq!(project(1.2, None), 1.2);
        assert_eq!(lambda_of(0.0), 2.0);
    }

    #[test]
    fn hand_evaluated_increment() {
        let cost = AffineCost::new(0.0, 1.0).unwrap();
        let cfg = AdaptConfig::default();
        let inc = increment(&cost, 5.0, 0.5, -0.1, cfg.step_size(16));
        assert!((inc - 0.03125).abs() < 1e-15);
        assert_eq!(increment(&cost, 5.0, 1.0, 0.0, 0.3), 0.0);
    }

    #[test]
    fn increment_scales_with_cost() {
        let c1 = AffineCost::new(3.0, 2.0).unwrap();
        let c2 = AffineCost::new(7.5, 5.0).unwrap();
        let (a, b) = (
            increment(&c1, 9.3, 0.4, -0.02, 0.1),
            increment(&c2, 9.3, 0.4, -0.02, 0.1),
        );
        assert!((b - 2.5 * a).abs() < 1e-15);
    }

    #[test]
    fn cost_fit_recovers_line() {
        let t: Vec<(usize, f64)> = [5, 9, 17, 33]
            .iter()
            .map(|&n| (n, 2.0 + 0.5 * n as f64))
            .collect();
        let c = fit_cost(&t).unwrap();
        assert!((c.a - 4.0).abs() < 1e-12 && c.b == 1.0);
        let err = fit_cost(&[(5, 1.0), (5, 2.0)]).unwrap_err();
        assert!(err.to_string().contains("≥2 distinct N required"));
        assert!(matches!(
            fit_cost(&[(5, 1.0), (9, 1.0)]),
            Err(IsirError::CostNotIncreasing { .. })
        ));
    }

    #[test]
    fn cost_fit_tolerates_small_noise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t: Vec<(usize, f64)> = (2..=13)
            .map(|i| {
                let n = (1usize << i) + 1;
                (n, 2.0 + 0.5 * n as f64 + rng.random_range(-0.01..0.01))
            })
            .collect();
        assert!((fit_cost(&t).unwrap().a / 4.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn approximate_loss() {
        let c = AffineCost::new(0.0, 1.0).unwrap();
        assert_eq!(loss_tilde(0.0, &c, 3.0).unwrap(), 3.0);
        assert_eq!(loss_tilde(0.5, &c, 3.0).unwrap(), 9.0);
        assert!(loss_tilde(1.0, &c, 3.0).is_err());
        assert!(loss_tilde(0.9, &c, 3.0).unwrap() < loss_tilde(0.99, &c, 3.0).unwrap());
    }

    #[test]
    fn closed_form_minimum() {
        let c = AffineCost::new(3.0, 2.0).unwrap();
        let d = 5.0;
        let u = |l: f64| c.c(l) * (d + l - 1.0) / (l - 1.0);
        let l = c.minimiser(d);
        assert!((u(l) - c.minimum(d)).abs() < 1e-12);
        assert!(u(l - 1e-3) > u(l) && u(l + 1e-3) > u(l));
    }

    #[test]
    fn config_defaults() {
        let cfg = AdaptConfig::default();
        assert!((lambda_of(cfg.initial_xi()) - 8193.0 / 2.0).abs() < 1e-9);
        let unbounded = AdaptConfig {
            n_max: None,
            ..cfg.clone()
        };
        assert!((lambda_of(unbounded.initial_xi()) - 16.0).abs() < 1e-12);
        assert_eq!(
            AdaptConfig {
                n_iters: 1000,
                ..cfg.clone()
            }
            .burn_in(),
            100
        );
        assert!(AdaptConfig {
            n_max: Some(1),
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(AdaptConfig {
            beta_exponent: 0.0,
            ..cfg
        }
        .validate()
        .is_err());
    }

    #[test]
    fn identical_masses_drift_to_closed_form_minimiser() {
        let pi = vec![0.4, 0.6];
        let m = DiscreteModel::new(vec![0.0, 1.0], pi.clone(), pi, 0.0).unwrap();
        let cost = AffineCost::new(10.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..=9800).map(|i| 2.0 + i as f64 * 0.01).collect();
        let loss = |l: f64| {
            let b = b_lambda(l);
            cost.c(l) * (1.0 + b) / (1.0 - b)
        };
        let best = grid
            .iter()
            .copied()
            .min_by(|a, b| loss(*a).total_cmp(&loss(*b)))
            .unwrap();
        let cfg = AdaptConfig {
            n_max: Some(101),
            n_iters: 200_000,
            ..AdaptConfig::default()
        };
        let run = run_adaptive(&m, 0, &cost, &cfg, 4).unwrap();
        assert!(
            (run.final_lambda - best).abs() < 0.15 * best,
            "{} vs {best}",
            run.final_lambda
        );
        assert!(run
            .lambda_trace
            .iter()
            .all(|l| (2.0..=101.0 + 1e-9).contains(l)));
        let again = run_adaptive(&m, 0, &cost, &cfg, 4).unwrap();
        assert_eq!(run.lambda_trace, again.lambda_trace);
    }

    proptest! {
        #[test]
        fn projected_lambda_in_range(xi in -50.0f64..50.0, n_max in 2usize..10_000) {
            let l = lambda_of(project(xi, Some(n_max)));
            prop_assert!(l >= 2.0 && l <= n_max as f64 * (1.0 + 1e-12));
        }
    }
}
