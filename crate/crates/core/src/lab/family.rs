//! Kernels for every integer proposal count up to a maximum, and the
//! fractional-`λ` quantities interpolated from them.

use super::model::{split_lambda, DiscreteModel, LambdaGrid};
use super::transition::{
    composition_count, enumerate_kernel, mc_transition_and_rejection, quadrature_kernel,
    symmetrise, IntegerKernel,
};
use crate::error::{IsirError, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

/// How the integer kernels are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Route {
    Enumeration {
        budget: f64,
    },
    Quadrature,
    /// Coupled Monte Carlo; transition estimates are replaced by their
    /// π-reversible part.
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
}

#[derive(Clone, Debug)]
pub struct KernelFamily {
    pub pi: Vec<f64>,
    pub route: Route,
    /// `kernels[N − 1]` is the `N`-proposal kernel.
    kernels: Vec<IntegerKernel>,
    /// Monte Carlo standard errors of `ε(N)`, when available.
    pub eps_se: Option<Vec<f64>>,
}

impl KernelFamily {
    /// Kernels for `N = 1..=n_max`.
    pub fn build(model: &DiscreteModel, n_max: usize, route: Route) -> Result<Self> {
        if n_max == 0 {
            return Err(IsirError::InvalidArgument(
                "n_max must be at least 1".into(),
            ));
        }
        let (kernels, eps_se) = match route {
            Route::Enumeration { budget } => (
                {
                    // Fail before any work when the largest N is out of reach.
                    let terms = composition_count(n_max - 1, model.categories());
                    if terms > budget {
                        return Err(IsirError::EnumerationBudget {
                            n: n_max,
                            terms,
                            budget,
                        });
                    }
                    1..=n_max
                }
                .into_par_iter()
                .map(|n| enumerate_kernel(model, n, budget))
                .collect::<Result<Vec<_>>>()?,
                None,
            ),
            Route::Quadrature => (
                (1..=n_max)
                    .into_par_iter()
                    .map(|n| quadrature_kernel(model, n))
                    .collect::<Result<Vec<_>>>()?,
                None,
            ),
            Route::MonteCarlo { samples, seed } => {
                let list: Vec<usize> = (1..=n_max).collect();
                let mc = mc_transition_and_rejection(model, &list, samples, seed)?;
                let kernels = mc
                    .kernels
                    .into_iter()
                    .map(|mut k| {
                        k.p = symmetrise(&k.p, &model.pi);
                        k
                    })
                    .collect();
                (kernels, Some(mc.eps_se))
            }
        };
        Ok(Self {
            pi: model.pi.clone(),
            route,
            kernels,
            eps_se,
        })
    }

    /// Family large enough for every point of `grid`.
    pub fn for_grid(model: &DiscreteModel, grid: &LambdaGrid, route: Route) -> Result<Self> {
        Self::build(model, grid.n_needed(), route)
    }

    pub fn n_max(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernel(&self, n: usize) -> &IntegerKernel {
        &self.kernels[n - 1]
    }

    pub fn kernels(&self) -> &[IntegerKernel] {
        &self.kernels
    }

    fn check(&self, lambda: f64, need_next: bool) -> Result<(usize, f64)> {
        if !(lambda >= 1.0) {
            return Err(IsirError::InvalidArgument(format!(
                "λ = {lambda} is below 1"
            )));
        }
        let (fl, beta) = split_lambda(lambda);
        let top = if need_next || beta < 1.0 { fl + 1 } else { fl };
        if top > self.n_max() {
            return Err(IsirError::InvalidArgument(format!(
                "λ = {lambda} needs N = {top}, family stops at {}",
                self.n_max()
            )));
        }
        Ok((fl, beta))
    }

    /// `ε(N)`.
    pub fn eps_at(&self, n: usize) -> f64 {
        self.kernel(n).eps(&self.pi)
    }

    /// `ε(λ) = β ε(⌊λ⌋) + (1 − β) ε(⌊λ⌋ + 1)`.
    pub fn eps(&self, lambda: f64) -> Result<f64> {
        let (fl, beta) = self.check(lambda, false)?;
        let lo = self.eps_at(fl);
        Ok(if beta == 1.0 {
            lo
        } else {
            beta * lo + (1.0 - beta) * self.eps_at(fl + 1)
        })
    }

    /// `ε(λ, s_i)` for every state.
    pub fn eps_state(&self, lambda: f64) -> Result<Vec<f64>> {
        let (fl, beta) = self.check(lambda, false)?;
        let lo = &self.kernel(fl).eps_state;
        if beta == 1.0 {
            return Ok(lo.clone());
        }
        let hi = &self.kernel(fl + 1).eps_state;
        Ok(lo
            .iter()
            .zip(hi)
            .map(|(a, b)| beta * a + (1.0 - beta) * b)
            .collect())
    }

    /// `ε_s(λ) = Σ_i π_i E[(β w_i/B_N + (1 − β) w_i/B_{N+1})²]`, `N = ⌊λ⌋`.
    pub fn eps_s(&self, lambda: f64) -> Result<f64> {
        let (fl, beta) = self.check(lambda, false)?;
        let k = self.kernel(fl);
        let mut total = 0.0;
        for i in 0..self.pi.len() {
            let mut v = beta * beta * k.sq[i];
            if beta < 1.0 {
                v += 2.0 * beta * (1.0 - beta) * k.cross[i]
                    + (1.0 - beta) * (1.0 - beta) * self.kernel(fl + 1).sq[i];
            }
            total += self.pi[i] * v;
        }
        Ok(total)
    }

    /// Extended derivative `ε′(λ) = ε(⌊λ⌋ + 1) − ε(⌊λ⌋)`.
    pub fn eps_prime(&self, lambda: f64) -> Result<f64> {
        let (fl, _) = self.check(lambda, true)?;
        Ok(self.eps_at(fl + 1) - self.eps_at(fl))
    }

    /// `P_λ = β P_⌊λ⌋ + (1 − β) P_⌊λ⌋+1`.
    pub fn p_lambda(&self, lambda: f64) -> Result<DMatrix<f64>> {
        let (fl, beta) = self.check(lambda, false)?;
        let lo = &self.kernel(fl).p;
        Ok(if beta == 1.0 {
            lo.clone()
        } else {
            lo * beta + &self.kernel(fl + 1).p * (1.0 - beta)
        })
    }

    /// `ψ(λ) = Σ_i π_i (P_λ(i,i) − π_i) / (1 − Σ_i π_i²)`.
    pub fn psi(&self, lambda: f64) -> Result<f64> {
        let denom = 1.0 - self.pi.iter().map(|p| p * p).sum::<f64>();
        if self.pi.len() < 2 || denom <= 0.0 {
            return Err(IsirError::SingleState);
        }
        let p = self.p_lambda(lambda)?;
        let num: f64 = self
            .pi
            .iter()
            .enumerate()
            .map(|(i, pi)| pi * (p[(i, i)] - pi))
            .sum();
        Ok(num / denom)
    }
}

/// One row of [`rejection_curve`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RejectionPoint {
    pub lambda: f64,
    pub eps: f64,
    pub eps_s: f64,
    pub eps_prime: f64,
}

/// `ε`, `ε_s` and `ε′` on a grid.
pub fn rejection_curve(family: &KernelFamily, grid: &[f64]) -> Result<Vec<RejectionPoint>> {
    grid.iter()
        .map(|&lambda| {
            Ok(RejectionPoint {
                lambda,
                eps: family.eps(lambda)?,
                eps_s: family.eps_s(lambda)?,
                eps_prime: family.eps_prime(lambda)?,
            })
        })
        .collect()
}

/// `ψ` on a grid.
pub fn psi_curve(family: &KernelFamily, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter().map(|&l| family.psi(l)).collect()
}

/// `b(λ) = 1/⌊λ⌋ − (λ − ⌊λ⌋)/((⌊λ⌋ + 1)⌊λ⌋)`, the rejection probability when `π = q`.
pub fn b_lambda(lambda: f64) -> f64 {
    let (fl, beta) = split_lambda(lambda);
    let fl = fl as f64;
    let frac = 1.0 - beta;
    1.0 / fl - frac / ((fl + 1.0) * fl)
}
