//! Run options from the command line, optionally layered over a TOML file.
//!
//! Every flag has a TOML key of the same name with dashes replaced by
//! underscores. Flags given on the command line win over the file.

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Experiment kind recorded in a config file; must match the subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    DiscreteAnalysis,
    AdaptiveRun,
    FixedGridRun,
    PilotCost,
    IngestWdbc,
}

impl Kind {
    pub fn subcommand(self) -> &'static str {
        match self {
            Kind::DiscreteAnalysis => "discrete",
            Kind::AdaptiveRun => "adaptive",
            Kind::FixedGridRun => "grid",
            Kind::PilotCost => "pilot",
            Kind::IngestWdbc => "ingest-wdbc",
        }
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// TOML file with any of these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[arg(skip)]
    pub kind: Option<Kind>,

    /// `mixture`, `logistic`, `experiment1`..`experiment5`, or a finite-model TOML path
    #[arg(long)]
    pub model: Option<String>,

    /// WDBC file (defaults to $ISIR_DATA_DIR/wdbc.data)
    #[arg(long)]
    pub data: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub iters: Option<usize>,

    /// Burn-in as a fraction of the iterations
    #[arg(long)]
    pub burn_in: Option<f64>,

    /// Largest number of proposals reachable by adaptation
    #[arg(long)]
    pub nmax: Option<usize>,

    /// Step-size exponent β in γ_k = k^(−β)
    #[arg(long)]
    pub beta: Option<f64>,

    /// Cost overhead a; a comma-separated list for `discrete`
    #[arg(long, value_delimiter = ',')]
    pub cost_a: Option<Vec<f64>>,

    /// Cost slope b
    #[arg(long)]
    pub cost_b: Option<f64>,

    /// Cost written by `pilot`
    #[arg(long)]
    pub cost_file: Option<PathBuf>,

    #[arg(long)]
    pub grid_lo: Option<f64>,

    #[arg(long)]
    pub grid_hi: Option<f64>,

    #[arg(long)]
    pub grid_step: Option<f64>,

    /// Coupled Monte Carlo samples per N (switches `discrete` to Monte Carlo kernels)
    #[arg(long)]
    pub mc_samples: Option<usize>,

    /// Kernel route for `discrete`: `quadrature` or `enumeration`
    #[arg(long)]
    pub route: Option<String>,

    /// Proposal counts for `pilot` and `grid`
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,

    /// Extra fractional λ values for `grid`, e.g. a terminal adaptive λ
    #[arg(long, value_delimiter = ',')]
    pub extra_lambda: Option<Vec<f64>>,

    /// Keep every k-th trace row
    #[arg(long)]
    pub thin: Option<usize>,

    /// Worker threads (default: all cores)
    #[arg(long)]
    pub workers: Option<usize>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    /// `pilot` only: synthetic timings a + bN from --cost-a/--cost-b
    #[arg(long)]
    pub dry_run: bool,
}

macro_rules! overlay {
    ($cli:ident, $file:ident; $($f:ident),*) => {
        Options {
            config: $cli.config.clone(),
            dry_run: $cli.dry_run || $file.dry_run,
            $($f: $cli.$f.clone().or($file.$f.clone()),)*
        }
    };
}

impl Options {
    /// Reads `--config` when given and overlays the command line on it.
    pub fn resolve(&self, expected: Kind) -> Result<Options> {
        let Some(path) = &self.config else {
            return Ok(self.clone());
        };
        let file = Self::load(path)?;
        if let Some(kind) = file.kind {
            if kind != expected {
                bail!(
                    "{} is a `{}` config, not `{}`",
                    path.display(),
                    kind.subcommand(),
                    expected.subcommand()
                );
            }
        }
        let cli = self;
        Ok(
            overlay!(cli, file; kind, model, data, seed, iters, burn_in, nmax, beta,
            cost_a, cost_b, cost_file, grid_lo, grid_hi, grid_step, mc_samples, route,
            n_list, extra_lambda, thin, workers, out),
        )
    }

    pub fn load(path: &Path) -> Result<Options> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Seeds are never drawn from the clock.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .context("--seed is required (runs are determined by config and seed)")
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(dir)
    }

    pub fn burn_in_fraction(&self) -> f64 {
        self.burn_in.unwrap_or(0.1)
    }

    pub fn single_cost_a(&self) -> Result<Option<f64>> {
        match self.cost_a.as_deref() {
            None => Ok(None),
            Some([a]) => Ok(Some(*a)),
            Some(v) => bail!("expected one --cost-a value, got {}", v.len()),
        }
    }
}

/// `N_i = 2^i + 1` for `i = 2..=13`.
pub fn default_n_list() -> Vec<usize> {
    (2..=13).map(|i| (1usize << i) + 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_line_wins_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "kind = \"adaptive-run\"\nmodel = \"mixture\"\nseed = 4\niters = 500\ncost_a = [3.0]\n",
        )
        .unwrap();
        let cli = Options {
            config: Some(path),
            seed: Some(9),
            ..Options::default()
        };
        let opts = cli.resolve(Kind::AdaptiveRun).unwrap();
        assert_eq!(opts.seed, Some(9));
        assert_eq!(opts.iters, Some(500));
        assert_eq!(opts.model.as_deref(), Some("mixture"));
        assert_eq!(opts.single_cost_a().unwrap(), Some(3.0));
        assert!(cli.resolve(Kind::FixedGridRun).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<Options>("sed = 3").unwrap_err();
        assert!(err.to_string().contains("sed"));
    }

    #[test]
    fn seed_has_no_default() {
        assert!(Options::default().require_seed().is_err());
    }

    #[test]
    fn pilot_grid() {
        let n = default_n_list();
        assert_eq!(n.first(), Some(&5));
        assert_eq!(n.last(), Some(&8193));
        assert_eq!(n.len(), 12);
    }
}
