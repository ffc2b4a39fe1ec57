//! The five subcommands. Each returns the summary lines it printed to
//! `report.txt` in the output directory.

use crate::config::{default_n_list, Kind, Options};
use crate::csvio::{
    write_rows, AnalysisCsvRow, IreCsvRow, LambdaCsvRow, PilotCsvRow, ReportCsvRow, WindowCsvRow,
};
use crate::models::{
    discrete_config, discrete_test_functions, mixture_test_functions, wdbc_path, LogisticSetup,
    Model, PRIOR_VARIANCE, PRIOR_WEIGHT,
};
use anyhow::{bail, Context, Result};
use isir::adapt::{adapt_step, fit_cost, lambda_of, AdaptConfig, AffineCost, Cost};
use isir::diagnostics::{initial_sequence_iact, ire_table, RunSummary};
use isir::kernel::{initial_state, Chain, TraceRow};
use isir::lab::bounds::{
    check_covariance_limit, check_gradient_functions, check_grid_bounds, check_holding_limit,
    check_integer_kernels, BoundReport,
};
use isir::lab::experiments::TABLE_A_VALUES;
use isir::lab::{
    analysis_report, analysis_table, KernelFamily, LambdaGrid, Route, TestFunctionSet,
};
use isir::model::LogModel;
use isir::rng::Substreams;
use rayon::prelude::*;
use serde_json::json;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

pub const ENUMERATION_BUDGET: f64 = 1e8;
/// Integer kernels up to this N get the exact monotonicity checks.
const INTEGER_CHECK_TOP: usize = 30;
const DETAILED_BALANCE_TOL: f64 = 1e-12;
/// Overhead used for the gradient sign checks.
const GRADIENT_CHECK_A: f64 = 20.0;
const TWO_STATE_TOL: f64 = 1e-8;
const WINDOWS: usize = 10;

fn finish(dir: &Path, lines: Vec<String>) -> Result<Vec<String>> {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(dir.join("report.txt"), text)?;
    Ok(lines)
}

/// Test functions of a model, passed to a generic body.
pub trait Visit {
    type Out;
    fn visit<M: LogModel>(
        self,
        model: &M,
        f: &(dyn Fn(&M::State) -> [f64; 2] + Sync),
    ) -> Result<Self::Out>;
}

pub fn dispatch<V: Visit>(model: &Model, v: V) -> Result<V::Out> {
    match model {
        Model::Mixture(m) => v.visit(m, &|x: &Vec<f64>| mixture_test_functions(x)),
        Model::Logistic(s) => v.visit(&s.model, &|x: &Vec<f64>| s.test_functions(x)),
        Model::Discrete(d) => v.visit(d, &|i: &usize| discrete_test_functions(d, *i)),
    }
}

fn cost_from(opts: &Options) -> Result<Option<AffineCost>> {
    if let Some(path) = &opts.cost_file {
        anyhow::ensure!(
            opts.cost_a.is_none() && opts.cost_b.is_none(),
            "give either --cost-file or --cost-a/--cost-b"
        );
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading cost file {}", path.display()))?;
        let cost: AffineCost = toml::from_str(&text)
            .with_context(|| format!("parsing cost file {}", path.display()))?;
        return Ok(Some(AffineCost::new(cost.a, cost.b)?));
    }
    match (opts.single_cost_a()?, opts.cost_b) {
        (None, None) => Ok(None),
        (a, b) => Ok(Some(AffineCost::new(a.unwrap_or(0.0), b.unwrap_or(1.0))?)),
    }
}

// ---------------------------------------------------------------- discrete

pub fn cmd_discrete(opts: &Options) -> Result<Vec<String>> {
    let opts = opts.resolve(Kind::DiscreteAnalysis)?;
    let spec = opts
        .model
        .as_deref()
        .context("--model is required for `discrete`")?;
    let cfg = discrete_config(spec)?;
    let model = cfg.model()?;
    let grid = LambdaGrid::new(
        opts.grid_lo.unwrap_or(2.0),
        opts.grid_hi.unwrap_or(150.0),
        opts.grid_step.unwrap_or(0.01),
    )?;
    let route = match (opts.mc_samples, opts.route.as_deref()) {
        (Some(samples), None | Some("mc")) => Route::MonteCarlo {
            samples,
            seed: opts.require_seed()?,
        },
        (Some(_), Some(r)) => bail!("--mc-samples conflicts with --route {r}"),
        (None, None | Some("quadrature")) => Route::Quadrature,
        (None, Some("enumeration")) => Route::Enumeration {
            budget: ENUMERATION_BUDGET,
        },
        (None, Some(r)) => {
            bail!("unknown route {r:?}; use quadrature, enumeration or --mc-samples")
        }
    };
    let b = opts.cost_b.unwrap_or(1.0);
    anyhow::ensure!(b > 0.0, "--cost-b must be positive");
    let a_values = opts
        .cost_a
        .clone()
        .unwrap_or_else(|| TABLE_A_VALUES.to_vec());
    let dir = opts.out_dir()?;

    let family = KernelFamily::for_grid(&model, &grid, route)?;
    let (upper, lower) = cfg.thresholds(&model);
    let (fns, dropped) = TestFunctionSet::non_constant(&model, upper, lower)?;
    let points = grid.points();
    let table = analysis_table(&model, &family, &fns, &points)?;
    let scaled: Vec<f64> = a_values.iter().map(|a| a / b).collect();
    let report = analysis_report(&table, &scaled);
    write_rows(
        &dir.join("analysis.csv"),
        &AnalysisCsvRow::from_table(&table),
    )?;
    let rows: Vec<ReportCsvRow> = a_values
        .iter()
        .zip(&report)
        .map(|(&a, r)| ReportCsvRow::from_row(a, r))
        .collect();
    write_rows(&dir.join("minimisers.csv"), &rows)?;

    let mut lines = vec![
        format!(
            "model {} ({} states, ŵ = {:.4}), route {:?}, grid {}..{} step {}",
            cfg.name,
            model.len(),
            model.w_hat,
            route,
            grid.lo,
            grid.hi,
            grid.step
        ),
        format!("thresholds M = {upper}, m = {lower}"),
    ];
    if !dropped.is_empty() {
        lines.push(format!(
            "constant under π, reported as NaN: {}",
            dropped.join(", ")
        ));
    }
    for r in &rows {
        lines.push(format!(
            "a = {}: λ_Ĝ = {}, λ_Ĥ = {}, λ_f = {}, λ_g = {}, SO_G^g = {:.2}",
            r.a, r.lambda_G, r.lambda_H, r.lambda_f, r.lambda_g, r.SO_G_g
        ));
    }

    let mut bounds = BoundReport::default();
    if matches!(route, Route::MonteCarlo { .. }) {
        lines.push("bound checks skipped for Monte Carlo kernels".into());
    } else {
        let slices = fns.slices();
        check_integer_kernels(
            &mut bounds,
            &model,
            &family,
            &slices,
            INTEGER_CHECK_TOP,
            DETAILED_BALANCE_TOL,
        );
        check_grid_bounds(&mut bounds, &model, &family, &table);
        check_gradient_functions(&mut bounds, &table, GRADIENT_CHECK_A, 1.0);
        check_holding_limit(&mut bounds, &model, &family, family.n_max());
        check_covariance_limit(&mut bounds, &model, &family, &slices, family.n_max());
        lines.push(format!(
            "bound checks: {} run, {} violations",
            bounds.checks_run,
            bounds.violations.len()
        ));
    }
    let mut log = String::new();
    for v in &bounds.violations {
        log.push_str(&format!("{}: {}\n", v.check, v.detail));
    }
    std::fs::write(dir.join("bounds.log"), log)?;

    if model.len() == 2 {
        let gap = table
            .rows
            .iter()
            .flat_map(|r| r.v.iter().map(move |v| (v - r.h_hat).abs()))
            .fold(0.0_f64, f64::max);
        if gap > TWO_STATE_TOL {
            bail!("two-state model: max |H − V| = {gap:e} exceeds {TWO_STATE_TOL:e}");
        }
        lines.push(format!("H=V identity verified (max |H − V| = {gap:.1e})"));
    }
    let lines = finish(&dir, lines)?;
    if !bounds.is_clean() {
        bail!(
            "{} bound violations, see {}",
            bounds.violations.len(),
            dir.join("bounds.log").display()
        );
    }
    Ok(lines)
}

// -------------------------------------------------------------- fixed runs

/// One fixed-λ run with the post-burn-in test-function series.
pub struct FixedRun {
    pub lambda: f64,
    pub seconds_per_iter: f64,
    pub series: [Vec<f64>; 2],
    pub mean_eps_hat: f64,
}

struct FixedRuns<'a> {
    lambdas: &'a [f64],
    iters: usize,
    burn_in: usize,
    seed: u64,
    parallel: bool,
}

impl Visit for FixedRuns<'_> {
    type Out = Vec<FixedRun>;

    fn visit<M: LogModel>(
        self,
        model: &M,
        f: &(dyn Fn(&M::State) -> [f64; 2] + Sync),
    ) -> Result<Vec<FixedRun>> {
        let x0 = initial_state(model, &Substreams::new(self.seed))?;
        let one = |&lambda: &f64| -> Result<FixedRun> {
            let mut chain = Chain::new(model, x0.clone(), lambda, self.seed);
            let kept = self.iters - self.burn_in;
            let mut series = [Vec::with_capacity(kept), Vec::with_capacity(kept)];
            let mut eps = 0.0;
            let start = Instant::now();
            for k in 0..self.iters {
                let rec = chain.step()?;
                if k >= self.burn_in {
                    let v = f(&rec.new_state);
                    series[0].push(v[0]);
                    series[1].push(v[1]);
                    eps += rec.eps_hat;
                }
            }
            let seconds = start.elapsed().as_secs_f64();
            Ok(FixedRun {
                lambda,
                seconds_per_iter: seconds / self.iters as f64,
                series,
                mean_eps_hat: eps / kept.max(1) as f64,
            })
        };
        if self.parallel {
            self.lambdas.par_iter().map(one).collect()
        } else {
            self.lambdas.iter().map(one).collect()
        }
    }
}

fn burn_in_count(iters: usize, fraction: f64) -> Result<usize> {
    anyhow::ensure!(
        (0.0..1.0).contains(&fraction),
        "--burn-in is a fraction in [0, 1), got {fraction}"
    );
    Ok((iters as f64 * fraction).floor() as usize)
}

// ------------------------------------------------------------------- pilot

pub fn cmd_pilot(opts: &Options) -> Result<Vec<String>> {
    let opts = opts.resolve(Kind::PilotCost)?;
    let ns = opts.n_list.clone().unwrap_or_else(default_n_list);
    let timings: Vec<(usize, f64)> = if opts.dry_run {
        let a = opts.single_cost_a()?.unwrap_or(5e-5);
        let b = opts.cost_b.unwrap_or(1e-7);
        ns.iter().map(|&n| (n, a + b * n as f64)).collect()
    } else {
        let model = Model::build(opts.model.as_deref(), opts.data.as_ref())?;
        let iters = opts.iters.unwrap_or(10_000);
        anyhow::ensure!(iters > 0, "--iters must be positive");
        let lambdas: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let runs = dispatch(
            &model,
            FixedRuns {
                lambdas: &lambdas,
                iters,
                burn_in: 0,
                seed: opts.require_seed()?,
                parallel: false,
            },
        )?;
        ns.iter()
            .zip(&runs)
            .map(|(&n, r)| (n, r.seconds_per_iter))
            .collect()
    };
    let cost = fit_cost(&timings)?;
    let dir = opts.out_dir()?;
    let rows: Vec<PilotCsvRow> = timings
        .iter()
        .map(|&(n, t)| PilotCsvRow {
            n,
            mean_seconds: t,
            fitted_a: cost.a,
            fitted_b: cost.b,
        })
        .collect();
    write_rows(&dir.join("pilot.csv"), &rows)?;
    std::fs::write(dir.join("cost.toml"), toml::to_string(&cost)?)?;
    finish(
        &dir,
        vec![
            format!(
                "{} pilot N values{}",
                ns.len(),
                if opts.dry_run {
                    " (synthetic timings)"
                } else {
                    ""
                }
            ),
            format!("fitted cost c(λ) = {} + {}·λ", cost.a, cost.b),
        ],
    )
}

// ---------------------------------------------------------------- adaptive

struct Adaptive<'a> {
    cfg: AdaptConfig,
    cost: AffineCost,
    seed: u64,
    thin: usize,
    dir: &'a Path,
}

pub struct AdaptiveSummary {
    pub terminal_lambda: f64,
    pub lambda_trace: Vec<f64>,
    pub series: [Vec<f64>; 2],
    pub windows: Vec<WindowCsvRow>,
    pub mean_eps_hat: f64,
}

impl Visit for Adaptive<'_> {
    type Out = AdaptiveSummary;

    fn visit<M: LogModel>(
        self,
        model: &M,
        f: &(dyn Fn(&M::State) -> [f64; 2] + Sync),
    ) -> Result<AdaptiveSummary> {
        let cfg = &self.cfg;
        cfg.validate()?;
        let n = cfg.n_iters;
        let burn = cfg.burn_in();
        let streams = Substreams::new(self.seed);
        let mut x = initial_state(model, &streams)?;
        let mut xi = cfg.initial_xi();
        let mut trace =
            std::io::BufWriter::new(std::fs::File::create(self.dir.join("trace.jsonl"))?);
        let mut lambda_rows = Vec::new();
        let mut out = AdaptiveSummary {
            terminal_lambda: lambda_of(xi),
            lambda_trace: Vec::with_capacity(n),
            series: [Vec::with_capacity(n - burn), Vec::with_capacity(n - burn)],
            windows: Vec::with_capacity(WINDOWS),
            mean_eps_hat: 0.0,
        };
        let window_len = n.div_ceil(WINDOWS).max(1);
        let (mut w_lambda, mut w_eps, mut w_count) = (0.0, 0.0, 0usize);
        for k in 1..=n as u64 {
            let (next, xi_new, rec, _) = adapt_step(model, &x, xi, &self.cost, k, cfg, &streams)?;
            x = next;
            xi = xi_new;
            let lambda = lambda_of(xi);
            out.lambda_trace.push(lambda);
            let v = f(&rec.new_state);
            if k as usize > burn {
                out.series[0].push(v[0]);
                out.series[1].push(v[1]);
                out.mean_eps_hat += rec.eps_hat;
            }
            if k % self.thin as u64 == 0 {
                writeln!(
                    trace,
                    "{}",
                    TraceRow::from_record(k, &rec, None, v.to_vec()).to_json_line()
                )?;
                lambda_rows.push(LambdaCsvRow { k, lambda });
            }
            w_lambda += rec.lambda_used;
            w_eps += rec.eps_hat;
            w_count += 1;
            if w_count == window_len || k == n as u64 {
                out.windows.push(WindowCsvRow {
                    window: out.windows.len(),
                    k_first: k + 1 - w_count as u64,
                    k_last: k,
                    mean_lambda: w_lambda / w_count as f64,
                    mean_eps_hat: w_eps / w_count as f64,
                });
                (w_lambda, w_eps, w_count) = (0.0, 0.0, 0);
            }
        }
        trace.flush()?;
        out.mean_eps_hat /= (n - burn).max(1) as f64;
        out.terminal_lambda = lambda_of(xi);
        write_rows(&self.dir.join("lambda.csv"), &lambda_rows)?;
        write_rows(&self.dir.join("windows.csv"), &out.windows)?;
        Ok(out)
    }
}

/// Whether window-mean ε̂ strictly decreases as window-mean λ increases.
pub fn eps_decreasing_in_lambda(windows: &[WindowCsvRow]) -> bool {
    let mut w: Vec<&WindowCsvRow> = windows.iter().collect();
    w.sort_by(|a, b| a.mean_lambda.total_cmp(&b.mean_lambda));
    w.windows(2).all(|p| p[1].mean_eps_hat < p[0].mean_eps_hat)
}

pub fn cmd_adaptive(opts: &Options) -> Result<Vec<String>> {
    let opts = opts.resolve(Kind::AdaptiveRun)?;
    let model = Model::build(opts.model.as_deref(), opts.data.as_ref())?;
    let seed = opts.require_seed()?;
    let raw =
        cost_from(&opts)?.context("a cost is required: --cost-file, or --cost-a and --cost-b")?;
    // The minimiser only depends on a/b; fixing the scale keeps step sizes
    // independent of the timing unit.
    let cost = AffineCost::new(raw.a / raw.b, 1.0)?;
    let cfg = AdaptConfig {
        beta_exponent: opts.beta.unwrap_or(0.75),
        n_max: Some(opts.nmax.unwrap_or(8193)),
        xi0: None,
        n_iters: opts.iters.unwrap_or(100_000),
        burn_in_fraction: opts.burn_in_fraction(),
    };
    anyhow::ensure!(cfg.n_iters > 0, "--iters must be positive");
    let thin = opts.thin.unwrap_or(1);
    anyhow::ensure!(thin > 0, "--thin must be positive");
    let dir = opts.out_dir()?;
    let s = dispatch(
        &model,
        Adaptive {
            cfg: cfg.clone(),
            cost,
            seed,
            thin,
            dir: &dir,
        },
    )?;
    let tail = &s.lambda_trace[s.lambda_trace.len() - (s.lambda_trace.len() / 10).max(1)..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let mut functions = Vec::new();
    let mut lines = vec![
        format!(
            "model {}, seed {seed}, {} iterations, burn-in {}, cost c(λ) ∝ {} + {}·λ",
            model.name(),
            cfg.n_iters,
            cfg.burn_in(),
            cost.a,
            cost.b
        ),
        format!("terminal λ = {:.4}", s.terminal_lambda),
        format!(
            "last-decile λ in [{lo:.3}, {hi:.3}], mean {tail_mean:.3} (range {:.1}% of mean)",
            100.0 * (hi - lo) / tail_mean
        ),
        format!("post-burn-in mean ε̂ = {:.5}", s.mean_eps_hat),
    ];
    for (i, series) in s.series.iter().enumerate() {
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let est = initial_sequence_iact(series).ok();
        let se = est.map(|e| (e.asvar / series.len() as f64).sqrt());
        lines.push(format!(
            "f{}: mean {mean:.6}, IACT {}, SE {}",
            i + 1,
            est.map_or("n/a".into(), |e| format!("{:.3}", e.iact)),
            se.map_or("n/a".into(), |v| format!("{v:.6}"))
        ));
        functions.push(json!({
            "name": format!("f{}", i + 1),
            "mean": mean,
            "iact": est.map(|e| e.iact),
            "asvar": est.map(|e| e.asvar),
            "se": se,
        }));
    }
    let decreasing = eps_decreasing_in_lambda(&s.windows);
    lines.push(format!(
        "window-mean ε̂ strictly decreasing in λ: {}",
        if decreasing { "yes" } else { "no" }
    ));
    let summary = json!({
        "model": model.name(),
        "seed": seed,
        "iters": cfg.n_iters,
        "burn_in": cfg.burn_in(),
        "beta": cfg.beta_exponent,
        "nmax": cfg.n_max,
        "cost": cost,
        "terminal_lambda": s.terminal_lambda,
        "last_decile": { "min": lo, "max": hi, "mean": tail_mean },
        "mean_eps_hat": s.mean_eps_hat,
        "eps_decreasing_in_lambda": decreasing,
        "functions": functions,
    });
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    finish(&dir, lines)
}

// -------------------------------------------------------------------- grid

pub fn cmd_grid(opts: &Options) -> Result<Vec<String>> {
    let opts = opts.resolve(Kind::FixedGridRun)?;
    let model = Model::build(opts.model.as_deref(), opts.data.as_ref())?;
    let seed = opts.require_seed()?;
    let cost = cost_from(&opts)?;
    let iters = opts.iters.unwrap_or(10_000);
    let burn = burn_in_count(iters, opts.burn_in_fraction())?;
    let mut lines = vec![format!(
        "model {}, seed {seed}, {iters} iterations per run, burn-in {burn}, {}",
        model.name(),
        match &cost {
            Some(c) => format!("cost c(λ) = {} + {}·λ", c.a, c.b),
            None => "IRE from measured seconds per iteration".into(),
        }
    )];
    let mut lambdas: Vec<f64> = Vec::new();
    for n in opts.n_list.clone().unwrap_or_else(default_n_list) {
        if n == 1 {
            lines.push(
                "N=1 skipped: non-ergodic at N=1 (the chain never moves), row omitted".into(),
            );
        } else if n == 0 {
            bail!("N must be positive");
        } else {
            lambdas.push(n as f64);
        }
    }
    for &l in opts.extra_lambda.as_deref().unwrap_or(&[]) {
        anyhow::ensure!(l > 1.0, "extra λ must exceed 1, got {l}");
        lambdas.push(l);
    }
    anyhow::ensure!(!lambdas.is_empty(), "no runnable N in the list");
    anyhow::ensure!(iters - burn >= 10, "too few post-burn-in iterations");
    let runs = dispatch(
        &model,
        FixedRuns {
            lambdas: &lambdas,
            iters,
            burn_in: burn,
            seed,
            parallel: true,
        },
    )?;
    let summaries: Vec<RunSummary> = runs
        .into_iter()
        .map(|r| RunSummary {
            lambda: r.lambda,
            seconds_per_iter: r.seconds_per_iter,
            series: r.series.to_vec(),
            mean_eps_hat: r.mean_eps_hat,
        })
        .collect();
    let table = ire_table(&summaries, cost.as_ref().map(|c| c as &dyn Cost))?;
    let rows: Vec<IreCsvRow> = table.iter().map(IreCsvRow::from_row).collect();
    let dir = opts.out_dir()?;
    write_rows(&dir.join("ire.csv"), &rows)?;
    let best = |key: &dyn Fn(&IreCsvRow) -> f64| {
        rows.iter()
            .min_by(|a, b| key(a).total_cmp(&key(b)))
            .map_or(f64::NAN, |r| r.lambda)
    };
    lines.push(format!(
        "argmin λ: approximate loss {}, IRE f1 {}, IRE f2 {}",
        best(&|r| r.approx_loss),
        best(&|r| r.ire_f1),
        best(&|r| r.ire_f2)
    ));
    finish(&dir, lines)
}

// ------------------------------------------------------------- ingest-wdbc

pub fn cmd_ingest_wdbc(opts: &Options) -> Result<Vec<String>> {
    let opts = opts.resolve(Kind::IngestWdbc)?;
    let path = wdbc_path(opts.data.as_ref())?;
    let setup = LogisticSetup::load(&path)?;
    let dir = opts.out_dir()?;
    let cov = setup.laplace.covariance();
    let summary = json!({
        "source": path.display().to_string(),
        "rows": setup.rows,
        "malignant": setup.malignant,
        "standardisation": "zero mean, sample standard deviation (n − 1)",
        "means": setup.means,
        "sds": setup.sds,
        "prior_variance": PRIOR_VARIANCE,
        "defensive_prior_weight": PRIOR_WEIGHT,
        "laplace": {
            "iterations": setup.laplace.iterations,
            "grad_norm": setup.laplace.grad_norm,
            "log_posterior_at_mode": setup.log_post_at_mode,
            "mode": setup.laplace.mode().iter().collect::<Vec<_>>(),
            "covariance": (0..cov.nrows())
                .map(|i| cov.row(i).iter().copied().collect::<Vec<f64>>())
                .collect::<Vec<_>>(),
        },
    });
    std::fs::write(
        dir.join("laplace.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    finish(
        &dir,
        vec![
            format!(
                "{} rows ({} malignant) from {}",
                setup.rows,
                setup.malignant,
                path.display()
            ),
            format!(
                "Laplace mode after {} Newton steps, gradient sup-norm {:.1e}, log posterior {:.6}",
                setup.laplace.iterations, setup.laplace.grad_norm, setup.log_post_at_mode
            ),
        ],
    )
}
