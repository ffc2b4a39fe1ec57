//! Numerical checks of the monotonicity, convexity and bound claims for a
//! finite model. Each check appends human-readable violations instead of
//! failing fast, so a report can list all of them.

use super::analysis::AnalysisTable;
use super::family::{b_lambda, KernelFamily};
use super::model::{split_lambda, DiscreteModel};
use super::spectral::{covariance, detailed_balance_residual};
use serde::Serialize;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Violation {
    pub check: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BoundReport {
    pub violations: Vec<Violation>,
    pub checks_run: usize,
}

impl BoundReport {
    fn check(&mut self, ok: bool, check: &'static str, detail: impl FnOnce() -> String) {
        self.checks_run += 1;
        if !ok {
            self.violations.push(Violation {
                check,
                detail: detail(),
            });
        }
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Slack for inequalities that hold exactly in theory.
const SLACK: f64 = 1e-12;

/// Integer-`N` checks on `N = 1..=n_top`: detailed balance, covariance and
/// rejection monotonicity and sequential convexity.
pub fn check_integer_kernels(
    report: &mut BoundReport,
    model: &DiscreteModel,
    family: &KernelFamily,
    fns: &[&[f64]],
    n_top: usize,
    db_tol: f64,
) {
    let n_top = n_top.min(family.n_max());
    for n in 1..=n_top {
        let r = detailed_balance_residual(&family.kernel(n).p, &model.pi);
        report.check(r <= db_tol, "detailed balance", || {
            format!("N={n}: residual {r:e}")
        });
    }
    for (k, f) in fns.iter().enumerate() {
        let cov: Vec<f64> = (1..=n_top)
            .map(|n| covariance(&family.kernel(n).p, &model.pi, f))
            .collect();
        for n in 0..cov.len().saturating_sub(1) {
            report.check(
                cov[n] > cov[n + 1],
                "covariance strictly decreasing",
                || format!("fn {k}, N={}: {} ≤ {}", n + 1, cov[n], cov[n + 1]),
            );
        }
        for n in 0..cov.len().saturating_sub(2) {
            let d2 = cov[n] - 2.0 * cov[n + 1] + cov[n + 2];
            report.check(d2 > -SLACK, "covariance sequentially convex", || {
                format!("fn {k}, N={}: second difference {d2:e}", n + 1)
            });
        }
    }
    let eps: Vec<f64> = (1..=n_top).map(|n| family.eps_at(n)).collect();
    for n in 0..eps.len().saturating_sub(1) {
        report.check(eps[n] > eps[n + 1], "ε strictly decreasing", || {
            format!("N={}", n + 1)
        });
    }
    for n in 0..eps.len().saturating_sub(2) {
        let d2 = eps[n] - 2.0 * eps[n + 1] + eps[n + 2];
        report.check(d2 > -SLACK, "ε sequentially convex", || {
            format!("N={}: {d2:e}", n + 1)
        });
    }
    for i in 0..model.len() {
        let e: Vec<f64> = (1..=n_top).map(|n| family.kernel(n).eps_state[i]).collect();
        for n in 0..e.len().saturating_sub(1) {
            report.check(e[n] > e[n + 1], "ε(N,x) strictly decreasing", || {
                format!("state {i}, N={}", n + 1)
            });
        }
        for n in 0..e.len().saturating_sub(2) {
            let d2 = e[n] - 2.0 * e[n + 1] + e[n + 2];
            report.check(d2 > -SLACK, "ε(N,x) sequentially convex", || {
                format!("state {i}, N={}: {d2:e}", n + 1)
            });
        }
    }
}

/// Pointwise bounds on the λ grid of an analysis table.
pub fn check_grid_bounds(
    report: &mut BoundReport,
    model: &DiscreteModel,
    family: &KernelFamily,
    table: &AnalysisTable,
) {
    let w_hat = model.w_hat;
    let c_mass = model.weighted_mass();
    let sum_pi2: f64 = model.pi.iter().map(|p| p * p).sum();
    let rows = &table.rows;
    for row in rows {
        let l = row.lambda;
        let (fl, _) = split_lambda(l);
        let flf = fl as f64;
        let eps_hi = 2.0 * w_hat / (2.0 * w_hat + l - 1.0);
        let b = b_lambda(l);
        report.check(1.0 / l <= b + SLACK, "1/λ ≤ b(λ)", || format!("λ={l}"));
        report.check(b <= row.eps + SLACK, "b(λ) ≤ ε(λ)", || {
            format!("λ={l}: b={b}, ε={}", row.eps)
        });
        report.check(row.eps <= eps_hi + SLACK, "ε(λ) upper bound", || {
            format!("λ={l}: ε={}", row.eps)
        });
        if let Ok(es) = family.eps_state(l) {
            for (i, (&e, &w)) in es.iter().zip(&model.weights).enumerate() {
                let lo = w * (w + 2.0 * flf - l) / ((w + flf) * (w + flf - 1.0));
                report.check(
                    lo <= e + SLACK && e <= eps_hi + SLACK,
                    "ε(λ,x) sandwich",
                    || format!("λ={l}, state {i}: {lo} ≤ {e} ≤ {eps_hi}"),
                );
            }
        }
        let ratio = (1.0 + row.eps) / (1.0 - row.eps);
        let ratio_lo = (flf * flf + 3.0 * flf - l + 1.0) / (flf * flf - flf + l - 1.0);
        report.check(
            1.0 < ratio_lo
                && ratio_lo <= ratio * (1.0 + SLACK)
                && ratio <= row.upper * (1.0 + SLACK),
            "(1+ε)/(1−ε) sandwich",
            || format!("λ={l}: {ratio_lo} ≤ {ratio} ≤ {}", row.upper),
        );
        let dp = row.eps_prime.abs();
        let dp_lo = c_mass / (2.0 * w_hat + flf - 1.0).powi(2);
        let dp_hi = w_hat / (flf * (flf + 1.0));
        report.check(
            row.eps_prime < 0.0 && dp_lo <= dp + SLACK && dp <= dp_hi + SLACK,
            "|ε′| sandwich",
            || format!("λ={l}: {dp_lo} ≤ {dp} ≤ {dp_hi}"),
        );
        report.check(
            row.eps * row.eps <= row.eps_s + SLACK,
            "ε² ≤ ε_s",
            || format!("λ={l}: ε²={}, ε_s={}", row.eps * row.eps, row.eps_s),
        );
        report.check(
            row.eps_s <= w_hat / flf + SLACK,
            "ε_s ≤ ŵ/⌊λ⌋",
            || format!("λ={l}: {}", row.eps_s),
        );
        report.check(
            row.psi > 0.0 && row.psi <= eps_hi + SLACK,
            "ψ bounds",
            || format!("λ={l}: ψ={}", row.psi),
        );
        if let Ok(p) = family.p_lambda(l) {
            let avg_hold: f64 = (0..model.len()).map(|i| model.pi[i] * p[(i, i)]).sum();
            report.check(
                sum_pi2 < avg_hold && avg_hold <= sum_pi2 + (1.0 - sum_pi2) * eps_hi + SLACK,
                "average holding sandwich",
                || format!("λ={l}: {avg_hold}"),
            );
            let minor = (l - 1.0) / (2.0 * w_hat + l - 1.0);
            for i in 0..model.len() {
                let hold_hi = model.pi[i] + (1.0 - model.pi[i]) * eps_hi;
                report.check(
                    model.pi[i] < p[(i, i)] && p[(i, i)] <= hold_hi + SLACK,
                    "holding sandwich",
                    || format!("λ={l}, state {i}: {}", p[(i, i)]),
                );
                for j in 0..model.len() {
                    report.check(
                        p[(i, j)] >= minor * model.pi[j] - SLACK,
                        "minorisation",
                        || format!("λ={l}, ({i},{j}): {} < {}", p[(i, j)], minor * model.pi[j]),
                    );
                }
            }
        }
        if l > 1.0 {
            for (k, &v) in row.v.iter().enumerate() {
                report.check(
                    v > row.lower && v <= row.upper * (1.0 + 1e-10),
                    "V sandwich",
                    || format!("λ={l}, fn {k}: V={v}, upper={}", row.upper),
                );
            }
            for (name, val) in [("Ĝ", row.g_hat), ("Ĥ", row.h_hat)] {
                report.check(
                    val > row.lower && val <= row.upper * (1.0 + 1e-10),
                    "G/H sandwich",
                    || format!("λ={l}: {name}={val}"),
                );
            }
        }
    }
    for w in rows.windows(2) {
        report.check(w[1].psi <= w[0].psi + SLACK, "ψ decreasing", || {
            format!("λ={}", w[1].lambda)
        });
    }
    let nf = rows.first().map_or(0, |r| r.v.len());
    for k in 0..nf {
        for w in rows.windows(2) {
            let d = w[1].v[k] - w[0].v[k];
            report.check(d <= 1e-12, "V decreasing", || {
                format!("fn {k}, λ={}: Δ={d:e}", w[1].lambda)
            });
        }
        for w in rows.windows(3) {
            let d2 = w[0].v[k] - 2.0 * w[1].v[k] + w[2].v[k];
            report.check(d2 >= -1e-9, "V convex", || {
                format!("fn {k}, λ={}: {d2:e}", w[1].lambda)
            });
        }
    }
}

/// `h₁ ≥ h₂ ≥ h₃` on the grid, negative at the first grid point and
/// positive at the last, for the cost `a + bλ`.
pub fn check_gradient_functions(report: &mut BoundReport, table: &AnalysisTable, a: f64, b: f64) {
    let rows = &table.rows;
    let hs: Vec<[f64; 3]> = rows
        .iter()
        .map(|r| {
            let c = a + b * r.lambda;
            let tail = 2.0 * c * r.eps_prime;
            [
                b * (1.0 - r.lambda.powi(-2)) + tail,
                b * (1.0 - r.eps * r.eps) + tail,
                b * (1.0 - r.eps_s) + tail,
            ]
        })
        .collect();
    for (r, h) in rows.iter().zip(&hs) {
        report.check(
            h[2] <= h[1] + SLACK && h[1] <= h[0] + SLACK,
            "h₃ ≤ h₂ ≤ h₁",
            || format!("λ={}: {:?}", r.lambda, h),
        );
    }
    if let (Some(first), Some(last)) = (hs.first(), hs.last()) {
        report.check(
            first.iter().all(|v| *v < 0.0),
            "h negative near λ=2",
            || format!("{first:?}"),
        );
        report.check(
            last.iter().all(|v| *v > 0.0),
            "h positive at the largest λ",
            || format!("{last:?}"),
        );
    }
}

/// `|P_N(x,{x}) − π(x)|` within the holding-probability upper bound.
pub fn check_holding_limit(
    report: &mut BoundReport,
    model: &DiscreteModel,
    family: &KernelFamily,
    n: usize,
) {
    let k = family.kernel(n);
    let eps_hi = 2.0 * model.w_hat / (2.0 * model.w_hat + n as f64 - 1.0);
    for i in 0..model.len() {
        let gap = (k.p[(i, i)] - model.pi[i]).abs();
        let bound = (1.0 - model.pi[i]) * eps_hi;
        report.check(gap < bound, "holding limit", || {
            format!("N={n}, state {i}: {gap} ≥ {bound}")
        });
    }
}

/// `0 ≤ ⟨f̂|P_N f̂⟩_π ≤ 2ŵ/(2ŵ + N − 1)` for standardised `f̂`; the upper
/// end is one minus the minorisation constant.
pub fn check_covariance_limit(
    report: &mut BoundReport,
    model: &DiscreteModel,
    family: &KernelFamily,
    fns: &[&[f64]],
    n: usize,
) {
    let p = &family.kernel(n).p;
    let hi = 2.0 * model.w_hat / (2.0 * model.w_hat + n as f64 - 1.0);
    for (k, f) in fns.iter().enumerate() {
        let c = covariance(p, &model.pi, f);
        report.check(
            (-SLACK..=hi + SLACK).contains(&c),
            "covariance limit",
            || format!("N={n}, fn {k}: {c} outside [0, {hi}]"),
        );
    }
}

/// `2 ≤ λ* ≤ 4√(ŵ(a/b + 1)) + 4ŵ + 1` for the minimiser of `c·V`.
pub fn minimiser_upper_bound(w_hat: f64, a: f64, b: f64) -> f64 {
    4.0 * (w_hat * (a / b + 1.0)).sqrt() + 4.0 * w_hat + 1.0
}
