//! Named models and their two test functions.

use anyhow::{Context, Result};
use isir::lab::experiments::experiment;
use isir::lab::{DiscreteConfig, DiscreteModel};
use isir::model::wdbc::{default_path, load_wdbc, standardise, DATA_DIR_ENV, WDBC_FEATURES};
use isir::model::{
    fit_laplace, mixture_f1, mixture_f2, mixture_model, ContinuousModel, DefensiveMixtureProposal,
    LaplaceApproximation, LogisticPosterior, MixtureModel,
};
use nalgebra::DVector;
use std::path::{Path, PathBuf};

pub const PRIOR_VARIANCE: f64 = 20.0;
pub const PRIOR_WEIGHT: f64 = 0.1;
pub const LAPLACE_TOL: f64 = 1e-8;
pub const LAPLACE_MAX_ITER: usize = 200;

pub type LogisticModel = ContinuousModel<LogisticPosterior, DefensiveMixtureProposal>;

/// The WDBC posterior, its Laplace fit and the defensive proposal.
pub struct LogisticSetup {
    pub model: LogisticModel,
    pub laplace: LaplaceApproximation,
    pub log_post_at_mode: f64,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub malignant: usize,
    pub rows: usize,
}

impl LogisticSetup {
    pub fn load(path: &Path) -> Result<Self> {
        let data = load_wdbc(path).with_context(|| format!("loading {}", path.display()))?;
        let (x, means, sds) = standardise(&data.features);
        let posterior =
            LogisticPosterior::new(&x, &data.labels, PRIOR_VARIANCE, WDBC_FEATURES + 1)?;
        let laplace = fit_laplace(
            &posterior,
            &vec![0.0; WDBC_FEATURES + 1],
            LAPLACE_TOL,
            LAPLACE_MAX_ITER,
        )?;
        let log_post_at_mode = posterior.log_posterior(laplace.mode());
        let proposal = DefensiveMixtureProposal::defensive(&posterior, &laplace, PRIOR_WEIGHT)?;
        Ok(Self {
            model: ContinuousModel::new(posterior, proposal)?,
            laplace,
            log_post_at_mode,
            means,
            sds,
            malignant: data.labels.iter().filter(|&&y| y == 1).count(),
            rows: data.labels.len(),
        })
    }

    /// `f₁ = π_u(x)/π_u(μ)` (the posterior density up to a constant) and
    /// `f₂ = ‖x − μ‖`.
    pub fn test_functions(&self, x: &[f64]) -> [f64; 2] {
        let v = DVector::from_column_slice(x);
        let f1 = (self.model.target.log_posterior(&v) - self.log_post_at_mode).exp();
        let f2 = (&v - self.laplace.mode()).norm();
        [f1, f2]
    }
}

/// `--data`, else `$ISIR_DATA_DIR/wdbc.data`.
pub fn wdbc_path(explicit: Option<&PathBuf>) -> Result<PathBuf> {
    let path = match explicit {
        Some(p) => p.clone(),
        None => default_path()
            .with_context(|| format!("no --data given and {DATA_DIR_ENV} is not set"))?,
    };
    anyhow::ensure!(path.exists(), "dataset {} does not exist", path.display());
    Ok(path)
}

/// Finite model config by name (`experiment1`..`experiment5`) or TOML path.
pub fn discrete_config(spec: &str) -> Result<DiscreteConfig> {
    if let Some(i) = spec
        .strip_prefix("experiment")
        .and_then(|s| s.parse::<usize>().ok())
    {
        return Ok(experiment(i)?);
    }
    let path = Path::new(spec);
    anyhow::ensure!(
        path.exists(),
        "model {spec:?} is neither a known name nor a file"
    );
    DiscreteConfig::load(path).with_context(|| format!("loading {spec}"))
}

/// Identity and square of the state value; the outside category maps to 0.
pub fn discrete_test_functions(model: &DiscreteModel, i: usize) -> [f64; 2] {
    let s = model.states.get(i).copied().unwrap_or(0.0);
    [s, s * s]
}

pub fn mixture_test_functions(x: &[f64]) -> [f64; 2] {
    [mixture_f1(x), mixture_f2(x)]
}

pub enum Model {
    Mixture(MixtureModel),
    Logistic(Box<LogisticSetup>),
    Discrete(DiscreteModel),
}

impl Model {
    pub fn build(spec: Option<&str>, data: Option<&PathBuf>) -> Result<Self> {
        Ok(match spec.unwrap_or("mixture") {
            "mixture" => Model::Mixture(mixture_model()),
            "logistic" => Model::Logistic(Box::new(LogisticSetup::load(&wdbc_path(data)?)?)),
            other => Model::Discrete(discrete_config(other)?.model()?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Mixture(_) => "mixture",
            Model::Logistic(_) => "logistic",
            Model::Discrete(_) => "discrete",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_resolve() {
        assert_eq!(discrete_config("experiment5").unwrap().states.len(), 61);
        assert!(discrete_config("experiment9").is_err());
        assert!(discrete_config("/no/such/file.toml").is_err());
        assert_eq!(Model::build(None, None).unwrap().name(), "mixture");
    }

    #[test]
    fn discrete_functions_cover_outside_category() {
        let m = DiscreteModel::new(vec![2.0, 3.0], vec![0.5, 0.5], vec![0.4, 0.4], 0.2).unwrap();
        assert_eq!(discrete_test_functions(&m, 1), [3.0, 9.0]);
        assert_eq!(discrete_test_functions(&m, 2), [0.0, 0.0]);
    }
}
