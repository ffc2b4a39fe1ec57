use crate::error::{IsirError, Result};
use crate::model::{Dim, LogModel};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Finite target/proposal pair.
///
/// States `0..n` carry positive target mass. Proposal mass outside the target
/// support is lumped into one extra category (index `n`, weight zero).
#[derive(Clone, Debug)]
pub struct DiscreteModel {
    pub states: Vec<f64>,
    pub pi: Vec<f64>,
    pub q: Vec<f64>,
    pub q_outside: f64,
    pub weights: Vec<f64>,
    pub w_hat: f64,
    /// Proposal cdf over `q` followed by the outside category.
    cdf: Vec<f64>,
}

const MASS_TOL: f64 = 1e-9;

impl DiscreteModel {
    /// Masses are renormalised after validation so that tiny rounding in
    /// config files does not leak into the exact computations.
    pub fn new(states: Vec<f64>, pi: Vec<f64>, q: Vec<f64>, q_outside: f64) -> Result<Self> {
        let n = states.len();
        if n == 0 || pi.len() != n || q.len() != n {
            return Err(IsirError::InvalidArgument(
                "states, pi and q must be non-empty and of equal length".into(),
            ));
        }
        if pi
            .iter()
            .chain(&q)
            .chain(std::iter::once(&q_outside))
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(IsirError::InvalidArgument(
                "masses must be finite and non-negative".into(),
            ));
        }
        if pi.iter().any(|&p| p <= 0.0) {
            return Err(IsirError::InvalidArgument(
                "every listed state needs positive target mass; put proposal mass off the target support in q_outside".into(),
            ));
        }
        if q.iter().any(|&v| v <= 0.0) {
            return Err(IsirError::InvalidArgument(
                "q must be positive wherever pi is positive".into(),
            ));
        }
        let pi_total: f64 = pi.iter().sum();
        let q_total: f64 = q.iter().sum::<f64>() + q_outside;
        if (pi_total - 1.0).abs() > MASS_TOL || (q_total - 1.0).abs() > MASS_TOL {
            return Err(IsirError::InvalidArgument(format!(
                "pi sums to {pi_total}, q + q_outside sums to {q_total}; both must be 1"
            )));
        }
        let pi: Vec<f64> = pi.iter().map(|v| v / pi_total).collect();
        let q: Vec<f64> = q.iter().map(|v| v / q_total).collect();
        let q_outside = q_outside / q_total;
        let weights: Vec<f64> = pi.iter().zip(&q).map(|(p, q)| p / q).collect();
        let w_hat = weights.iter().copied().fold(0.0, f64::max);
        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for v in q.iter().chain(std::iter::once(&q_outside)) {
            acc += v;
            cdf.push(acc);
        }
        Ok(Self {
            states,
            pi,
            q,
            q_outside,
            weights,
            w_hat,
            cdf,
        })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// Number of multinomial categories, counting the outside one if present.
    pub fn categories(&self) -> usize {
        self.len() + usize::from(self.q_outside > 0.0)
    }

    /// Category probabilities `Q` (outside category last when present).
    pub fn category_masses(&self) -> Vec<f64> {
        let mut m = self.q.clone();
        if self.q_outside > 0.0 {
            m.push(self.q_outside);
        }
        m
    }

    /// Category weights (zero for the outside category).
    pub fn category_weights(&self) -> Vec<f64> {
        let mut w = self.weights.clone();
        if self.q_outside > 0.0 {
            w.push(0.0);
        }
        w
    }

    pub fn w_min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Σ_i w_i π_i`.
    pub fn weighted_mass(&self) -> f64 {
        self.weights.iter().zip(&self.pi).map(|(w, p)| w * p).sum()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.pi).map(|(v, p)| v * p).sum()
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        let m = self.mean(f);
        f.iter()
            .zip(&self.pi)
            .map(|(v, p)| p * (v - m).powi(2))
            .sum()
    }

    /// Draw one proposal category index (`len()` denotes the outside category).
    pub fn sample_category<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }

    pub fn from_config(cfg: &DiscreteConfig) -> Result<Self> {
        Self::new(
            cfg.states.clone(),
            cfg.pi.clone(),
            cfg.q.clone(),
            cfg.q_outside,
        )
    }
}

impl LogModel for DiscreteModel {
    type State = usize;

    fn log_target(&self, x: &usize) -> f64 {
        self.pi.get(*x).map_or(f64::NEG_INFINITY, |p| p.ln())
    }

    fn log_proposal(&self, x: &usize) -> f64 {
        match self.q.get(*x) {
            Some(q) => q.ln(),
            None if *x == self.len() && self.q_outside > 0.0 => self.q_outside.ln(),
            None => f64::NEG_INFINITY,
        }
    }

    fn sample_proposal<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sample_category(rng)
    }

    fn dim(&self) -> Dim {
        Dim::Discrete
    }

    fn weight_bound(&self) -> Option<f64> {
        Some(self.w_hat)
    }
}

/// On-disk description of a finite model.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DiscreteConfig {
    pub name: String,
    #[serde(default)]
    pub note: String,
    pub states: Vec<f64>,
    pub pi: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(default)]
    pub q_outside: f64,
    /// Superlevel threshold for `Y_u^M`; defaults to `ŵ`.
    #[serde(rename = "M", default)]
    pub upper: Option<f64>,
    /// Sublevel threshold for `Y_l^m`; defaults to the smallest weight.
    #[serde(rename = "m", default)]
    pub lower: Option<f64>,
}

impl DiscreteConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| IsirError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn model(&self) -> Result<DiscreteModel> {
        DiscreteModel::from_config(self)
    }

    pub fn thresholds(&self, model: &DiscreteModel) -> (f64, f64) {
        (
            self.upper.unwrap_or(model.w_hat),
            self.lower.unwrap_or_else(|| model.w_min()),
        )
    }
}

/// Grid `lo, lo+step, …, hi` of proposal counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self {
            lo: 2.0,
            hi: 150.0,
            step: 0.01,
        }
    }
}

impl LambdaGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || lo < 1.0 + step - 1e-12 || hi < lo {
            return Err(IsirError::InvalidArgument(format!(
                "grid needs step > 0, lo ≥ 1 + step and hi ≥ lo (got lo={lo}, hi={hi}, step={step})"
            )));
        }
        Ok(Self { lo, hi, step })
    }

    /// Grid points, rounded to the step's decimal resolution.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        let scale = 1e9;
        (0..=n)
            .map(|k| ((self.lo + k as f64 * self.step) * scale).round() / scale)
            .collect()
    }

    /// Largest integer proposal count any grid point touches (`⌊hi⌋ + 1`).
    pub fn n_needed(&self) -> usize {
        self.hi.floor() as usize + 1
    }
}

/// Splits `λ ≥ 1` into `(⌊λ⌋, β)` with `β = ⌊λ⌋ + 1 − λ ∈ (0, 1]`.
pub fn split_lambda(lambda: f64) -> (usize, f64) {
    let fl = (lambda + 1e-12).floor();
    let beta = (fl + 1.0 - lambda).clamp(0.0, 1.0);
    (fl as usize, if beta == 0.0 { 1.0 } else { beta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_masses() {
        assert!(DiscreteModel::new(vec![1.0, 2.0], vec![0.5, 0.6], vec![0.5, 0.5], 0.0).is_err());
        assert!(DiscreteModel::new(vec![1.0, 2.0], vec![0.5, 0.5], vec![0.0, 1.0], 0.0).is_err());
        assert!(DiscreteModel::new(vec![1.0], vec![1.0], vec![0.5], 0.4).is_err());
    }

    #[test]
    fn config_round_trip() {
        let cfg = DiscreteConfig {
            name: "two".into(),
            note: String::new(),
            states: vec![1.0, 2.0],
            pi: vec![0.3, 0.7],
            q: vec![0.5, 0.4],
            q_outside: 0.1,
            upper: Some(1.5),
            lower: None,
        };
        let back = DiscreteConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let m = back.model().unwrap();
        assert_eq!(m.categories(), 3);
        assert!((m.w_hat - 1.75).abs() < 1e-15);
        assert_eq!(back.thresholds(&m), (1.5, 0.6));
    }

    #[test]
    fn grid_points() {
        let g = LambdaGrid::default();
        let p = g.points();
        assert_eq!(p.len(), 14801);
        assert_eq!(p[1], 2.01);
        assert_eq!(*p.last().unwrap(), 150.0);
        assert!(LambdaGrid::new(1.0, 3.0, 0.1).is_err());
    }

    #[test]
    fn lambda_split() {
        assert_eq!(split_lambda(3.0), (3, 1.0));
        let (n, b) = split_lambda(2.25);
        assert_eq!(n, 2);
        assert!((b - 0.75).abs() < 1e-12);
    }
}
