//! Approximation-quality tables: exact `V_f` against `G_f` and `H_f`, and
//! the minimisers of the cost-weighted losses.

use super::family::{b_lambda, KernelFamily};
use super::model::DiscreteModel;
use super::spectral::spectral_asvar_many;
use crate::error::{IsirError, Result};
use rayon::prelude::*;
use serde::Serialize;

pub const TEST_FUNCTION_NAMES: [&str; 5] = ["f", "g", "h", "k", "l"];

/// The identity, inverse weight, clipped identity, superlevel and sublevel
/// indicator functions, each standardised under π.
#[derive(Clone, Debug)]
pub struct TestFunctionSet {
    pub upper: f64,
    pub lower: f64,
    pub names: Vec<&'static str>,
    pub raw: Vec<Vec<f64>>,
    pub standardised: Vec<Vec<f64>>,
}

const LEVEL_TOL: f64 = 1e-12;

fn raw_functions(model: &DiscreteModel, upper: f64, lower: f64) -> Vec<Vec<f64>> {
    let w = &model.weights;
    let x = &model.states;
    let above: Vec<bool> = w.iter().map(|&v| v >= upper * (1.0 - LEVEL_TOL)).collect();
    let below: Vec<bool> = w.iter().map(|&v| v <= lower * (1.0 + LEVEL_TOL)).collect();
    let outside_mass: f64 = model
        .pi
        .iter()
        .zip(&above)
        .filter(|(_, a)| !**a)
        .map(|(p, _)| p)
        .sum();
    let clipped_value = if outside_mass > 0.0 {
        x.iter()
            .zip(&model.pi)
            .zip(&above)
            .filter(|(_, a)| !**a)
            .map(|((x, p), _)| x * p)
            .sum::<f64>()
            / outside_mass
    } else {
        0.0
    };
    vec![
        x.clone(),
        w.iter().map(|v| 1.0 / v).collect(),
        x.iter()
            .zip(&above)
            .map(|(x, a)| if *a { clipped_value } else { *x })
            .collect(),
        above.iter().map(|&a| f64::from(u8::from(a))).collect(),
        below.iter().map(|&b| f64::from(u8::from(b))).collect(),
    ]
}

impl TestFunctionSet {
    /// `upper` is `M` (superlevel set `w ≥ M`), `lower` is `m` (sublevel set `w ≤ m`).
    pub fn new(model: &DiscreteModel, upper: f64, lower: f64) -> Result<Self> {
        let raw = raw_functions(model, upper, lower);
        let standardised = raw
            .iter()
            .zip(TEST_FUNCTION_NAMES)
            .map(|(f, name)| {
                standardise(model, f).map_err(|_| {
                    IsirError::InvalidArgument(format!("test function {name} is constant under π"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            upper,
            lower,
            names: TEST_FUNCTION_NAMES.to_vec(),
            raw,
            standardised,
        })
    }

    /// Like [`TestFunctionSet::new`] but drops functions that are constant
    /// under π (two-state models, `π = q`). Returns the dropped names.
    pub fn non_constant(
        model: &DiscreteModel,
        upper: f64,
        lower: f64,
    ) -> Result<(Self, Vec<&'static str>)> {
        let mut set = Self {
            upper,
            lower,
            names: Vec::new(),
            raw: Vec::new(),
            standardised: Vec::new(),
        };
        let mut dropped = Vec::new();
        for (f, name) in raw_functions(model, upper, lower)
            .into_iter()
            .zip(TEST_FUNCTION_NAMES)
        {
            match standardise(model, &f) {
                Ok(g) => {
                    set.names.push(name);
                    set.raw.push(f);
                    set.standardised.push(g);
                }
                Err(_) => dropped.push(name),
            }
        }
        if set.names.is_empty() {
            return Err(IsirError::InvalidArgument(
                "every test function is constant under π".into(),
            ));
        }
        Ok((set, dropped))
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.standardised.iter().map(|v| v.as_slice()).collect()
    }
}

/// `(f − π(f)) / sd_π(f)`.
pub fn standardise(model: &DiscreteModel, f: &[f64]) -> Result<Vec<f64>> {
    let mean = model.mean(f);
    let var = model.variance(f);
    if !(var > 1e-300) {
        return Err(IsirError::InvalidArgument("constant function".into()));
    }
    let sd = var.sqrt();
    Ok(f.iter().map(|v| (v - mean) / sd).collect())
}

/// One grid point of the analysis.
#[derive(Clone, Debug, Serialize)]
pub struct AnalysisRow {
    pub lambda: f64,
    pub eps: f64,
    pub eps_s: f64,
    pub eps_prime: f64,
    pub psi: f64,
    /// `V_f̂` per test function.
    pub v: Vec<f64>,
    /// `Ĝ = (1 + ε)/(1 − ε)`.
    pub g_hat: f64,
    /// `Ĥ = (1 + ψ)/(1 − ψ)`.
    pub h_hat: f64,
    /// Lower bound of standardised variances (`var_π f̂ = 1`).
    pub lower: f64,
    /// `(4ŵ + λ − 1)/(λ − 1)`.
    pub upper: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisTable {
    pub names: Vec<String>,
    pub rows: Vec<AnalysisRow>,
}

/// Evaluates every column of the analysis at each grid point.
pub fn analysis_table(
    model: &DiscreteModel,
    family: &KernelFamily,
    fns: &TestFunctionSet,
    grid: &[f64],
) -> Result<AnalysisTable> {
    let fs = fns.slices();
    let rows = grid
        .par_iter()
        .map(|&lambda| {
            let eps = family.eps(lambda)?;
            let psi = family.psi(lambda)?;
            let p = family.p_lambda(lambda)?;
            Ok(AnalysisRow {
                lambda,
                eps,
                eps_s: family.eps_s(lambda)?,
                eps_prime: family.eps_prime(lambda)?,
                psi,
                v: spectral_asvar_many(&p, &model.pi, &fs)?,
                g_hat: (1.0 + eps) / (1.0 - eps),
                h_hat: (1.0 + psi) / (1.0 - psi),
                lower: 1.0,
                upper: (4.0 * model.w_hat + lambda - 1.0) / (lambda - 1.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalysisTable {
        names: fns.names.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

/// Index of the smallest value; ties go to the earliest (smallest λ).
pub fn argmin(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Minimiser and suboptimality factors for one test function.
#[derive(Clone, Debug, Serialize)]
pub struct FunctionMinimiser {
    pub name: String,
    pub lambda: f64,
    /// `c(λ_Ĝ) V(λ_Ĝ) / (c(λ_f) V(λ_f))`.
    pub so_g: f64,
    /// `c(λ_Ĥ) V(λ_Ĥ) / (c(λ_f) V(λ_f))`.
    pub so_h: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub a: f64,
    pub lambda_g: f64,
    pub lambda_h: f64,
    pub functions: Vec<FunctionMinimiser>,
}

impl ReportRow {
    pub fn function(&self, name: &str) -> Option<&FunctionMinimiser> {
        self.functions.iter().find(|f| f.name == name)
    }
}

/// Rounds a reported minimiser to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Minimisers of `c·V`, `c·Ĝ`, `c·Ĥ` with `c(λ) = a + λ`, and the resulting
/// suboptimality factors, for each overhead `a`.
pub fn analysis_report(table: &AnalysisTable, a_values: &[f64]) -> Vec<ReportRow> {
    let rows = &table.rows;
    a_values
        .iter()
        .map(|&a| {
            let cost = |r: &AnalysisRow| a + r.lambda;
            let ig = argmin(rows.iter().map(|r| cost(r) * r.g_hat));
            let ih = argmin(rows.iter().map(|r| cost(r) * r.h_hat));
            let functions = table
                .names
                .iter()
                .enumerate()
                .map(|(k, name)| {
                    let loss = |r: &AnalysisRow| cost(r) * r.v[k];
                    let i = argmin(rows.iter().map(loss));
                    FunctionMinimiser {
                        name: name.clone(),
                        lambda: round2(rows[i].lambda),
                        so_g: loss(&rows[ig]) / loss(&rows[i]),
                        so_h: loss(&rows[ih]) / loss(&rows[i]),
                    }
                })
                .collect();
            ReportRow {
                a,
                lambda_g: round2(rows[ig].lambda),
                lambda_h: round2(rows[ih].lambda),
                functions,
            }
        })
        .collect()
}

/// `var · (1 + b_λ)/(1 − b_λ)`, the asymptotic variance of every i-SIR kernel with `π = q`.
pub fn pi_equals_q_variance(var: f64, lambda: f64) -> f64 {
    let b = b_lambda(lambda);
    var * (1.0 + b) / (1.0 - b)
}
