//! Bayesian logistic regression posterior, its Laplace approximation and the
//! defensive mixture proposal built from it.

use super::{LogDensity, Proposal};
use crate::error::{IsirError, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Logistic regression with a `N(0, σ² I)` prior on the coefficients.
///
/// The design matrix carries the intercept as its first column.
#[derive(Clone, Debug)]
pub struct LogisticPosterior {
    design: DMatrix<f64>,
    labels: DVector<f64>,
    prior_variance: f64,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LogisticPosterior {
    /// `covariates` are rows without the intercept; one is prepended.
    pub fn new(
        covariates: &[Vec<f64>],
        labels: &[u8],
        prior_variance: f64,
        dim: usize,
    ) -> Result<Self> {
        if covariates.len() != labels.len() {
            return Err(IsirError::InvalidArgument(
                "one label per row required".into(),
            ));
        }
        if !(prior_variance > 0.0) {
            return Err(IsirError::InvalidArgument(
                "prior variance must be positive".into(),
            ));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(IsirError::InvalidArgument("labels must be 0 or 1".into()));
        }
        let p = dim;
        if covariates.iter().any(|r| r.len() + 1 != p) {
            return Err(IsirError::InvalidArgument(format!(
                "every row needs {} covariates",
                p - 1
            )));
        }
        if covariates.iter().flatten().any(|v| !v.is_finite()) {
            return Err(IsirError::InvalidArgument("non-finite covariate".into()));
        }
        let n = covariates.len();
        let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { covariates[i][j - 1] });
        let labels = DVector::from_iterator(n, labels.iter().map(|&y| y as f64));
        Ok(Self {
            design,
            labels,
            prior_variance,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.design.nrows()
    }

    pub fn n_coef(&self) -> usize {
        self.design.ncols()
    }

    pub fn prior_variance(&self) -> f64 {
        self.prior_variance
    }

    /// Unnormalised log posterior: log likelihood plus normalised log prior.
    pub fn log_posterior(&self, x: &DVector<f64>) -> f64 {
        let eta = &self.design * x;
        let loglik: f64 = eta
            .iter()
            .zip(self.labels.iter())
            .map(|(e, y)| y * e - softplus(*e))
            .sum();
        let p = x.len() as f64;
        loglik
            - 0.5 * x.norm_squared() / self.prior_variance
            - 0.5 * p * (LN_2PI + self.prior_variance.ln())
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let eta = &self.design * x;
        let resid = DVector::from_iterator(
            eta.len(),
            eta.iter()
                .zip(self.labels.iter())
                .map(|(e, y)| y - sigmoid(*e)),
        );
        self.design.tr_mul(&resid) - x / self.prior_variance
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let eta = &self.design * x;
        let p = x.len();
        let mut weighted = self.design.clone();
        for (i, e) in eta.iter().enumerate() {
            let s = sigmoid(*e);
            let v = s * (1.0 - s);
            weighted.row_mut(i).scale_mut(v);
        }
        let mut h = -self.design.tr_mul(&weighted);
        for i in 0..p {
            h[(i, i)] -= 1.0 / self.prior_variance;
        }
        h
    }

    pub fn prior(&self) -> MultivariateNormal {
        let p = self.n_coef();
        MultivariateNormal::new(
            DVector::zeros(p),
            DMatrix::from_diagonal_element(p, p, self.prior_variance),
        )
        .expect("prior covariance is positive definite")
    }
}

impl LogDensity for LogisticPosterior {
    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_posterior(&DVector::from_column_slice(x))
    }

    fn dim(&self) -> usize {
        self.n_coef()
    }
}

/// Gaussian `N(mean, covariance)` with a cached Cholesky factor.
#[derive(Clone, Debug)]
pub struct MultivariateNormal {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    lower: DMatrix<f64>,
    log_norm: f64,
}

impl MultivariateNormal {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(covariance.clone())
            .ok_or_else(|| IsirError::Singular("covariance is not positive definite".into()))?;
        let lower = chol.l();
        let log_det: f64 = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let log_norm = -0.5 * (mean.len() as f64 * LN_2PI + log_det);
        Ok(Self {
            mean,
            covariance,
            lower,
            log_norm,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}

impl LogDensity for MultivariateNormal {
    fn log_density(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.mean;
        let z = self
            .lower
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        self.log_norm - 0.5 * z.norm_squared()
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }
}

impl Proposal for MultivariateNormal {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| StandardNormal.sample(rng));
        (&self.mean + &self.lower * z).iter().copied().collect()
    }
}

/// Gaussian approximation at the posterior mode.
#[derive(Clone, Debug)]
pub struct LaplaceApproximation {
    pub gaussian: MultivariateNormal,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl LaplaceApproximation {
    pub fn mode(&self) -> &DVector<f64> {
        self.gaussian.mean()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        self.gaussian.covariance()
    }
}

/// Damped Newton iterations with step halving until the gradient sup-norm is
/// at most `tol`.
pub fn fit_laplace(
    posterior: &LogisticPosterior,
    init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<LaplaceApproximation> {
    if !(tol > 0.0) {
        return Err(IsirError::InvalidArgument("tol must be positive".into()));
    }
    if init.len() != posterior.n_coef() {
        return Err(IsirError::InvalidArgument(
            "init has the wrong length".into(),
        ));
    }
    let mut x = DVector::from_column_slice(init);
    let mut value = posterior.log_posterior(&x);
    let mut grad = posterior.gradient(&x);
    let mut iterations = 0;
    while grad.amax() > tol {
        if iterations == max_iter {
            return Err(IsirError::NoConvergence {
                iterations,
                grad_norm: grad.amax(),
            });
        }
        iterations += 1;
        let neg_hess = -posterior.hessian(&x);
        let chol: Cholesky<f64, Dyn> = Cholesky::new(neg_hess).ok_or_else(|| {
            IsirError::Singular("negative Hessian is not positive definite".into())
        })?;
        let step = chol.solve(&grad);
        let mut t = 1.0;
        loop {
            let candidate = &x + &step * t;
            let cand_value = posterior.log_posterior(&candidate);
            if cand_value >= value || t < 1e-10 {
                x = candidate;
                value = cand_value;
                break;
            }
            t *= 0.5;
        }
        grad = posterior.gradient(&x);
    }
    let neg_hess = -posterior.hessian(&x);
    let chol = Cholesky::new(neg_hess)
        .ok_or_else(|| IsirError::Singular("negative Hessian is not positive definite".into()))?;
    let mut covariance = chol.inverse();
    covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(LaplaceApproximation {
        gaussian: MultivariateNormal::new(x, covariance)?,
        iterations,
        grad_norm: grad.amax(),
    })
}

/// Finite mixture of Gaussian proposals, e.g. `0.1 prior + 0.9 Laplace`.
#[derive(Clone, Debug)]
pub struct DefensiveMixtureProposal {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    components: Vec<MultivariateNormal>,
}

impl DefensiveMixtureProposal {
    pub fn new(components: Vec<(f64, MultivariateNormal)>) -> Result<Self> {
        if components.is_empty() {
            return Err(IsirError::InvalidArgument("no mixture components".into()));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if components.iter().any(|(w, _)| !(*w > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(IsirError::InvalidArgument(
                "mixture weights must be positive and sum to 1".into(),
            ));
        }
        let dim = components[0].1.dim();
        if components.iter().any(|(_, c)| c.dim() != dim) {
            return Err(IsirError::InvalidArgument(
                "component dimensions differ".into(),
            ));
        }
        let (weights, components): (Vec<f64>, Vec<MultivariateNormal>) =
            components.into_iter().unzip();
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            weights,
            components,
        })
    }

    /// `prior_weight · prior + (1 - prior_weight) · laplace`.
    pub fn defensive(
        posterior: &LogisticPosterior,
        laplace: &LaplaceApproximation,
        prior_weight: f64,
    ) -> Result<Self> {
        Self::new(vec![
            (prior_weight, posterior.prior()),
            (1.0 - prior_weight, laplace.gaussian.clone()),
        ])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl LogDensity for DefensiveMixtureProposal {
    fn log_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.log_density(x))
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    fn dim(&self) -> usize {
        self.components[0].dim()
    }
}

impl Proposal for DefensiveMixtureProposal {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = i;
                break;
            }
        }
        self.components[pick].sample(rng)
    }
}
