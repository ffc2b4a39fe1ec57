//! Fixed-header CSV tables and their reader.

use anyhow::{Context, Result};
use isir::diagnostics::IreRow;
use isir::lab::{AnalysisTable, ReportRow};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_rows`], checking its header.
pub fn read_rows<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    anyhow::ensure!(
        found == header,
        "{}: header {:?} differs from {:?}",
        path.display(),
        found,
        header
    );
    r.deserialize()
        .map(|row| row.with_context(|| format!("reading {}", path.display())))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotCsvRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub mean_seconds: f64,
    pub fitted_a: f64,
    pub fitted_b: f64,
}

impl PilotCsvRow {
    pub const HEADER: [&'static str; 4] = ["N", "mean_seconds", "fitted_a", "fitted_b"];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IreCsvRow {
    pub lambda: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub iact_f1: f64,
    pub iact_f2: f64,
    pub asvar_f1: f64,
    pub asvar_f2: f64,
    pub sec_per_iter: f64,
    pub ire_f1: f64,
    pub ire_f2: f64,
    pub approx_loss: f64,
}

impl IreCsvRow {
    pub const HEADER: [&'static str; 10] = [
        "lambda",
        "N",
        "iact_f1",
        "iact_f2",
        "asvar_f1",
        "asvar_f2",
        "sec_per_iter",
        "ire_f1",
        "ire_f2",
        "approx_loss",
    ];

    pub fn from_row(r: &IreRow) -> Self {
        Self {
            lambda: r.lambda,
            n: r.n,
            iact_f1: r.iact[0],
            iact_f2: r.iact[1],
            asvar_f1: r.asvar[0],
            asvar_f2: r.asvar[1],
            sec_per_iter: r.seconds_per_iter,
            ire_f1: r.ire[0],
            ire_f2: r.ire[1],
            approx_loss: r.approx_loss,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct AnalysisCsvRow {
    pub lambda: f64,
    pub eps: f64,
    pub eps_s: f64,
    pub eps_prime: f64,
    pub psi: f64,
    pub V_f: f64,
    pub V_g: f64,
    pub V_h: f64,
    pub V_k: f64,
    pub V_l: f64,
    pub G_hat: f64,
    pub H_hat: f64,
    pub lower: f64,
    pub upper: f64,
}

impl AnalysisCsvRow {
    pub const HEADER: [&'static str; 14] = [
        "lambda",
        "eps",
        "eps_s",
        "eps_prime",
        "psi",
        "V_f",
        "V_g",
        "V_h",
        "V_k",
        "V_l",
        "G_hat",
        "H_hat",
        "lower",
        "upper",
    ];

    /// Columns of functions missing from `t` are NaN.
    pub fn from_table(t: &AnalysisTable) -> Vec<Self> {
        let col = |name: &str| t.names.iter().position(|n| n == name);
        let cols = ["f", "g", "h", "k", "l"].map(col);
        t.rows
            .iter()
            .map(|r| {
                let v = |i: usize| cols[i].map_or(f64::NAN, |c| r.v[c]);
                Self {
                    lambda: r.lambda,
                    eps: r.eps,
                    eps_s: r.eps_s,
                    eps_prime: r.eps_prime,
                    psi: r.psi,
                    V_f: v(0),
                    V_g: v(1),
                    V_h: v(2),
                    V_k: v(3),
                    V_l: v(4),
                    G_hat: r.g_hat,
                    H_hat: r.h_hat,
                    lower: r.lower,
                    upper: r.upper,
                }
            })
            .collect()
    }
}

/// Minimisers and suboptimality factors for one overhead `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ReportCsvRow {
    pub a: f64,
    pub lambda_G: f64,
    pub lambda_H: f64,
    pub lambda_f: f64,
    pub SO_G_f: f64,
    pub SO_H_f: f64,
    pub lambda_g: f64,
    pub SO_G_g: f64,
    pub SO_H_g: f64,
    pub lambda_h: f64,
    pub SO_G_h: f64,
    pub SO_H_h: f64,
    pub lambda_k: f64,
    pub SO_G_k: f64,
    pub SO_H_k: f64,
    pub lambda_l: f64,
    pub SO_G_l: f64,
    pub SO_H_l: f64,
}

impl ReportCsvRow {
    pub const HEADER: [&'static str; 18] = [
        "a", "lambda_G", "lambda_H", "lambda_f", "SO_G_f", "SO_H_f", "lambda_g", "SO_G_g",
        "SO_H_g", "lambda_h", "SO_G_h", "SO_H_h", "lambda_k", "SO_G_k", "SO_H_k", "lambda_l",
        "SO_G_l", "SO_H_l",
    ];

    /// `a` is reported on the caller's scale; `r` may be computed for `a/b`.
    /// Functions missing from `r` give NaN columns.
    pub fn from_row(a: f64, r: &ReportRow) -> Self {
        let f = |name: &str| {
            r.function(name)
                .map_or((f64::NAN, f64::NAN, f64::NAN), |m| {
                    (m.lambda, m.so_g, m.so_h)
                })
        };
        let (lf, gf, hf) = f("f");
        let (lg, gg, hg) = f("g");
        let (lh, gh, hh) = f("h");
        let (lk, gk, hk) = f("k");
        let (ll, gl, hl) = f("l");
        Self {
            a,
            lambda_G: r.lambda_g,
            lambda_H: r.lambda_h,
            lambda_f: lf,
            SO_G_f: gf,
            SO_H_f: hf,
            lambda_g: lg,
            SO_G_g: gg,
            SO_H_g: hg,
            lambda_h: lh,
            SO_G_h: gh,
            SO_H_h: hh,
            lambda_k: lk,
            SO_G_k: gk,
            SO_H_k: hk,
            lambda_l: ll,
            SO_G_l: gl,
            SO_H_l: hl,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaCsvRow {
    pub k: u64,
    pub lambda: f64,
}

impl LambdaCsvRow {
    pub const HEADER: [&'static str; 2] = ["k", "lambda"];
}

/// Averages over one checkpoint window of an adaptive run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowCsvRow {
    pub window: usize,
    pub k_first: u64,
    pub k_last: u64,
    pub mean_lambda: f64,
    pub mean_eps_hat: f64,
}

impl WindowCsvRow {
    pub const HEADER: [&'static str; 5] =
        ["window", "k_first", "k_last", "mean_lambda", "mean_eps_hat"];
}
