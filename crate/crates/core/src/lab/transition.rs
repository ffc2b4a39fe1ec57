//! Integer-`N` transition matrices and rejection quantities.
//!
//! Three routes compute the same [`IntegerKernel`]:
//!
//! * [`enumerate_kernel`] sums over every composition of the `N − 1` fresh
//!   draws (exact, budgeted);
//! * [`quadrature_kernel`] writes each reciprocal `1/(c + S)` as a Laplace
//!   integral `∫ e^{−t(c+S)} dt` so the multinomial expectation factorises
//!   into powers of `φ(t) = Σ_k Q_k e^{−t w_k}` (exact up to quadrature
//!   error, cost independent of `N`);
//! * [`mc_transition_and_rejection`] estimates everything from coupled
//!   multinomial draws.

use super::model::DiscreteModel;
use crate::error::{IsirError, Result};
use crate::quad::exp_sinh_vec;
use crate::rng::Substreams;
use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

pub const DEFAULT_ENUMERATION_BUDGET: f64 = 1e8;
const QUAD_REL_TOL: f64 = 1e-12;

/// Exact quantities of the `N`-proposal kernel.
#[derive(Clone, Debug)]
pub struct IntegerKernel {
    pub n: usize,
    /// `P_N`.
    pub p: DMatrix<f64>,
    /// `ε(N, s_i) = E[w_i / B_N]`, with `B_N = w_i + Σ_{j=2}^N w(Y^j)`.
    pub eps_state: Vec<f64>,
    /// `E[w_i² / B_N²]`.
    pub sq: Vec<f64>,
    /// `E[w_i² / (B_N B_{N+1})]`.
    pub cross: Vec<f64>,
}

impl IntegerKernel {
    pub fn identity(model: &DiscreteModel) -> Self {
        let n = model.len();
        let cross = quadrature_parts(model, 1).3;
        Self {
            n: 1,
            p: DMatrix::identity(n, n),
            eps_state: vec![1.0; n],
            sq: vec![1.0; n],
            cross,
        }
    }

    /// `ε(N) = Σ_i π_i ε(N, s_i)`.
    pub fn eps(&self, pi: &[f64]) -> f64 {
        pi.iter().zip(&self.eps_state).map(|(p, e)| p * e).sum()
    }
}

/// Number of compositions of `draws` into `categories` parts.
pub fn composition_count(draws: usize, categories: usize) -> f64 {
    if categories == 0 {
        return if draws == 0 { 1.0 } else { 0.0 };
    }
    let (a, b) = ((draws + categories - 1) as f64, (categories - 1) as f64);
    (ln_gamma(a + 1.0) - ln_gamma(b + 1.0) - ln_gamma(a - b + 1.0))
        .exp()
        .round()
}

/// `P_N` by exact enumeration of the multinomial support.
pub fn exact_transition_matrix(model: &DiscreteModel, n: usize) -> Result<DMatrix<f64>> {
    Ok(enumerate_kernel(model, n, DEFAULT_ENUMERATION_BUDGET)?.p)
}

/// Every quantity of [`IntegerKernel`] by enumeration of the compositions of
/// `N − 1` draws over the proposal categories.
pub fn enumerate_kernel(model: &DiscreteModel, n: usize, budget: f64) -> Result<IntegerKernel> {
    if n == 0 {
        return Err(IsirError::InvalidArgument("N must be at least 1".into()));
    }
    let k = model.categories();
    let terms = composition_count(n - 1, k);
    if terms > budget {
        return Err(IsirError::EnumerationBudget { n, terms, budget });
    }
    let masses = model.category_masses();
    let cw = model.category_weights();
    let w = &model.weights;
    let ns = model.len();
    let log_q: Vec<f64> = masses.iter().map(|m| m.ln()).collect();

    struct Acc {
        r: Vec<f64>,
        zr: DMatrix<f64>,
        sq: Vec<f64>,
        cross: Vec<f64>,
    }
    let mut acc = Acc {
        r: vec![0.0; ns],
        zr: DMatrix::zeros(ns, k),
        sq: vec![0.0; ns],
        cross: vec![0.0; ns],
    };
    let mut z = vec![0usize; k];
    let log_norm = ln_gamma(n as f64);

    #[allow(clippy::too_many_arguments)]
    fn walk(
        cat: usize,
        left: usize,
        log_p: f64,
        s: f64,
        z: &mut [usize],
        ctx: (&[f64], &[f64], &[f64], &[f64], f64),
        acc: &mut Acc,
    ) {
        let (log_q, cw, w, masses, log_norm) = ctx;
        let k = z.len();
        if cat + 1 == k {
            z[cat] = left;
            let log_p = log_p + left as f64 * log_q[cat] - ln_gamma(left as f64 + 1.0) + log_norm;
            let p = log_p.exp();
            let s = s + left as f64 * cw[cat];
            for i in 0..w.len() {
                let b = w[i] + s;
                let r = p / b;
                acc.r[i] += r;
                acc.sq[i] += r * w[i] * w[i] / b;
                let extra: f64 = masses.iter().zip(cw).map(|(m, wk)| m / (b + wk)).sum();
                acc.cross[i] += r * w[i] * w[i] * extra;
                for (j, &zj) in z.iter().enumerate() {
                    if zj > 0 {
                        acc.zr[(i, j)] += zj as f64 * r;
                    }
                }
            }
            z[cat] = 0;
            return;
        }
        for c in 0..=left {
            z[cat] = c;
            walk(
                cat + 1,
                left - c,
                log_p + c as f64 * log_q[cat] - ln_gamma(c as f64 + 1.0),
                s + c as f64 * cw[cat],
                z,
                ctx,
                acc,
            );
        }
        z[cat] = 0;
    }
    walk(
        0,
        n - 1,
        0.0,
        0.0,
        &mut z,
        (&log_q, &cw, w, &masses, log_norm),
        &mut acc,
    );

    let mut p = DMatrix::zeros(ns, ns);
    for i in 0..ns {
        for j in 0..ns {
            p[(i, j)] = w[j] * acc.zr[(i, j)];
        }
        p[(i, i)] += w[i] * acc.r[i];
    }
    Ok(IntegerKernel {
        n,
        p,
        eps_state: w.iter().zip(&acc.r).map(|(w, r)| w * r).collect(),
        sq: acc.sq,
        cross: acc.cross,
    })
}

/// `(J, ε(N,·), E[w²/B_N²], E[w²/(B_N B_{N+1})])` where `J[i][j] = E[1/(w_i + w_j + S_{N−2})]`
/// (empty for `N = 1`).
fn quadrature_parts(model: &DiscreteModel, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let ns = model.len();
    let masses = model.category_masses();
    let cw = model.category_weights();
    let log_q: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
    let w = &model.weights;
    let pairs = if n >= 2 { ns * (ns + 1) / 2 } else { 0 };
    let dim = pairs + 3 * ns;
    let mut terms = vec![0.0; cw.len()];
    let raw = exp_sinh_vec(dim, QUAD_REL_TOL, |t, out| {
        let mut max = f64::NEG_INFINITY;
        for (term, (lq, wk)) in terms.iter_mut().zip(log_q.iter().zip(&cw)) {
            *term = lq - t * wk;
            max = max.max(*term);
        }
        let log_phi = max + terms.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let chi: f64 = masses
            .iter()
            .zip(&cw)
            .map(|(m, wk)| {
                if *wk > 0.0 {
                    m * -(-t * wk).exp_m1() / wk
                } else {
                    m * t
                }
            })
            .sum();
        let mut idx = 0;
        if n >= 2 {
            let base = (n - 2) as f64 * log_phi;
            for i in 0..ns {
                for j in i..ns {
                    out[idx] = (base - t * (w[i] + w[j])).exp();
                    idx += 1;
                }
            }
        }
        let base = (n - 1) as f64 * log_phi;
        for i in 0..ns {
            let e = (base - t * w[i]).exp();
            out[idx + i] = e;
            out[idx + ns + i] = t * e;
            out[idx + 2 * ns + i] = chi * e;
        }
    });
    let j = raw[..pairs].to_vec();
    let e = &raw[pairs..];
    let eps = (0..ns).map(|i| w[i] * e[i]).collect();
    let sq = (0..ns).map(|i| w[i] * w[i] * e[ns + i]).collect();
    let cross = (0..ns).map(|i| w[i] * w[i] * e[2 * ns + i]).collect();
    (j, eps, sq, cross)
}

/// [`IntegerKernel`] by Laplace-transform quadrature.
///
/// Off-diagonal entries are `P_N(i,j) = (N−1) π_j E[1/(w_i + w_j + S_{N−2})]`,
/// symmetric after multiplying by `π_i`, so detailed balance holds to
/// rounding. The diagonal is the row complement.
pub fn quadrature_kernel(model: &DiscreteModel, n: usize) -> Result<IntegerKernel> {
    if n == 0 {
        return Err(IsirError::InvalidArgument("N must be at least 1".into()));
    }
    if n == 1 {
        return Ok(IntegerKernel::identity(model));
    }
    let ns = model.len();
    let (j, eps_state, sq, cross) = quadrature_parts(model, n);
    let mut p = DMatrix::zeros(ns, ns);
    let mut idx = 0;
    let scale = (n - 1) as f64;
    for a in 0..ns {
        for b in a..ns {
            if a != b {
                p[(a, b)] = scale * model.pi[b] * j[idx];
                p[(b, a)] = scale * model.pi[a] * j[idx];
            }
            idx += 1;
        }
    }
    for a in 0..ns {
        let off: f64 = (0..ns).filter(|&b| b != a).map(|b| p[(a, b)]).sum();
        p[(a, a)] = 1.0 - off;
    }
    Ok(IntegerKernel {
        n,
        p,
        eps_state,
        sq,
        cross,
    })
}

/// Holding probabilities `P_N(i,i) = ε(N,i) + (N−1) π_i E[1/(2w_i + S_{N−2})]`
/// evaluated directly rather than as a row complement.
pub fn quadrature_holding(model: &DiscreteModel, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0; model.len()];
    }
    let ns = model.len();
    let (j, eps, _, _) = quadrature_parts(model, n);
    let mut out = Vec::with_capacity(ns);
    let mut idx = 0;
    for a in 0..ns {
        out.push(eps[a] + (n - 1) as f64 * model.pi[a] * j[idx]);
        idx += ns - a;
    }
    out
}

/// Monte Carlo estimates for a list of proposal counts.
#[derive(Clone, Debug)]
pub struct McKernels {
    pub kernels: Vec<IntegerKernel>,
    /// Standard error of each `ε(N)` estimate.
    pub eps_se: Vec<f64>,
    pub samples: usize,
}

/// Coupled Monte Carlo estimates of `P_N`, `ε(N, ·)` and the `ε_s`
/// ingredients. Every sample keeps one multinomial count vector; moving
/// from `N` to `N + 1` adds a single categorical draw, so consecutive
/// estimates share their randomness. Iteration `N` draws from substream
/// `(N, 0)` of `seed`.
pub fn mc_transition_and_rejection(
    model: &DiscreteModel,
    n_list: &[usize],
    samples: usize,
    seed: u64,
) -> Result<McKernels> {
    if samples == 0 {
        return Err(IsirError::InvalidArgument(
            "samples must be at least 1".into(),
        ));
    }
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(IsirError::InvalidArgument(
            "n_list must be non-empty, positive and strictly ascending".into(),
        ));
    }
    let ns = model.len();
    let k = model.categories();
    let cw = model.category_weights();
    let w = &model.weights;
    let streams = Substreams::new(seed);
    let inv = 1.0 / samples as f64;

    let mut z = DMatrix::<f64>::zeros(samples, k);
    let mut s = vec![0.0; samples];
    let mut r = DMatrix::<f64>::zeros(samples, ns);
    let mut next = vec![0usize; samples];
    let mut out = McKernels {
        kernels: Vec::with_capacity(n_list.len()),
        eps_se: Vec::with_capacity(n_list.len()),
        samples,
    };
    let n_max = *n_list.last().unwrap();
    let mut wanted = n_list.iter().peekable();
    for n in 1..=n_max {
        let mut rng = streams.control(n as u64);
        for c in next.iter_mut() {
            *c = model.sample_category(&mut rng);
        }
        if wanted.peek() == Some(&&n) {
            wanted.next();
            r.column_iter_mut().enumerate().for_each(|(i, mut col)| {
                for (v, sv) in col.iter_mut().zip(&s) {
                    *v = 1.0 / (w[i] + sv);
                }
            });
            let zr = r.tr_mul(&z);
            let mut p = DMatrix::zeros(ns, ns);
            let mut eps_state = vec![0.0; ns];
            let mut sq = vec![0.0; ns];
            let mut cross = vec![0.0; ns];
            let mut per_sample = vec![0.0; samples];
            for i in 0..ns {
                let col = r.column(i);
                let (mut m1, mut m2, mut mx) = (0.0, 0.0, 0.0);
                for (smp, &ri) in col.iter().enumerate() {
                    m1 += ri;
                    m2 += ri * ri;
                    mx += ri / (w[i] + s[smp] + cw[next[smp]]);
                    per_sample[smp] += model.pi[i] * w[i] * ri;
                }
                eps_state[i] = w[i] * m1 * inv;
                sq[i] = w[i] * w[i] * m2 * inv;
                cross[i] = w[i] * w[i] * mx * inv;
                for j in 0..ns {
                    p[(i, j)] = w[j] * zr[(i, j)] * inv;
                }
                p[(i, i)] += eps_state[i];
            }
            let mean: f64 = per_sample.iter().sum::<f64>() * inv;
            let var: f64 = per_sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (samples.max(2) - 1) as f64;
            out.eps_se.push((var * inv).sqrt());
            out.kernels.push(IntegerKernel {
                n,
                p,
                eps_state,
                sq,
                cross,
            });
        }
        for (smp, &c) in next.iter().enumerate() {
            z[(smp, c)] += 1.0;
            s[smp] += cw[c];
        }
    }
    Ok(out)
}

/// Replaces `P` by a π-reversible kernel. Each off-diagonal flux
/// `π_i P_ij` is taken from the row of the less probable state (the mean
/// of both on ties) and the other entry follows from detailed balance;
/// diagonals are row complements. Estimates for rare targets are noisy
/// and would otherwise be amplified by `π_j / π_i`.
pub fn symmetrise(p: &DMatrix<f64>, pi: &[f64]) -> DMatrix<f64> {
    let n = pi.len();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let flux = match pi[i].total_cmp(&pi[j]) {
                    std::cmp::Ordering::Less => pi[i] * p[(i, j)],
                    std::cmp::Ordering::Greater => pi[j] * p[(j, i)],
                    std::cmp::Ordering::Equal => 0.5 * (pi[i] * p[(i, j)] + pi[j] * p[(j, i)]),
                };
                out[(i, j)] = flux / pi[i];
            }
        }
        let off: f64 = out.row(i).sum();
        out[(i, i)] = 1.0 - off;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five_state() -> DiscreteModel {
        DiscreteModel::new(
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![0.1, 0.3, 0.1, 0.2, 0.3],
            vec![0.15, 0.25, 0.2, 0.12, 0.28],
            0.0,
        )
        .unwrap()
    }

    fn with_outside() -> DiscreteModel {
        DiscreteModel::new(
            vec![0.0, 1.0, 2.0],
            vec![0.5, 0.3, 0.2],
            vec![0.2, 0.3, 0.3],
            0.2,
        )
        .unwrap()
    }

    fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn composition_counts() {
        assert_eq!(composition_count(2, 3), 6.0);
        assert_eq!(composition_count(0, 4), 1.0);
        // C(155, 6)
        assert!((composition_count(149, 7) / 17_463_172_650.0 - 1.0).abs() < 1e-12);
        assert_eq!(composition_count(5, 1), 1.0);
    }

    #[test]
    fn single_proposal_is_identity() {
        let m = five_state();
        assert!(
            max_diff(
                &exact_transition_matrix(&m, 1).unwrap(),
                &DMatrix::identity(5, 5)
            ) < 1e-14
        );
        assert_eq!(quadrature_kernel(&m, 1).unwrap().p, DMatrix::identity(5, 5));
    }

    #[test]
    fn two_proposals_match_brute_force_double_sum() {
        for m in [five_state(), with_outside()] {
            let qs = m.category_masses();
            let ws = m.category_weights();
            let n = m.len();
            let mut oracle = DMatrix::zeros(n, n);
            let mut sq = vec![0.0; n];
            let mut cross = vec![0.0; n];
            for i in 0..n {
                for (k, (&qk, &wk)) in qs.iter().zip(&ws).enumerate() {
                    let b = m.weights[i] + wk;
                    oracle[(i, i)] += qk * m.weights[i] / b;
                    if k < n {
                        oracle[(i, k)] += qk * wk / b;
                    }
                    sq[i] += qk * (m.weights[i] / b).powi(2);
                    for (&ql, &wl) in qs.iter().zip(&ws) {
                        cross[i] += qk * ql * m.weights[i].powi(2) / (b * (b + wl));
                    }
                }
            }
            let e = enumerate_kernel(&m, 2, 1e6).unwrap();
            let q = quadrature_kernel(&m, 2).unwrap();
            assert!(max_diff(&e.p, &oracle) < 1e-14);
            assert!(max_diff(&q.p, &oracle) < 1e-12);
            for i in 0..n {
                assert!((e.sq[i] - sq[i]).abs() < 1e-14);
                assert!((q.sq[i] - sq[i]).abs() < 1e-12);
                assert!((e.cross[i] - cross[i]).abs() < 1e-14);
                assert!((q.cross[i] - cross[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_agrees_with_enumeration() {
        for m in [five_state(), with_outside()] {
            for n in [3, 5, 9, 14] {
                let e = enumerate_kernel(&m, n, 1e7).unwrap();
                let q = quadrature_kernel(&m, n).unwrap();
                assert!(max_diff(&e.p, &q.p) < 1e-12, "N={n}");
                for i in 0..m.len() {
                    assert!((e.eps_state[i] - q.eps_state[i]).abs() < 1e-12);
                    assert!((e.sq[i] - q.sq[i]).abs() < 1e-12);
                    assert!((e.cross[i] - q.cross[i]).abs() < 1e-12);
                }
                let direct = quadrature_holding(&m, n);
                for i in 0..m.len() {
                    assert!((direct[i] - q.p[(i, i)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn identical_masses_give_lazy_kernel() {
        let pi = vec![0.1, 0.2, 0.3, 0.4];
        let m = DiscreteModel::new(vec![1.0, 2.0, 3.0, 4.0], pi.clone(), pi.clone(), 0.0).unwrap();
        for n in [2, 3, 6, 40] {
            let nf = n as f64;
            let want = DMatrix::from_fn(4, 4, |i, j| {
                f64::from(u8::from(i == j)) / nf + (nf - 1.0) / nf * pi[j]
            });
            let q = quadrature_kernel(&m, n).unwrap();
            assert!(max_diff(&q.p, &want) < 1e-13, "N={n}");
            if n <= 6 {
                assert!(max_diff(&exact_transition_matrix(&m, n).unwrap(), &want) < 1e-14);
            }
        }
    }

    #[test]
    fn quadrature_rows_are_reversible_and_stochastic() {
        let m = with_outside();
        for n in [2, 50, 151] {
            let k = quadrature_kernel(&m, n).unwrap();
            for i in 0..3 {
                assert!((k.p.row(i).sum() - 1.0).abs() < 1e-14);
                for j in 0..3 {
                    assert!((m.pi[i] * k.p[(i, j)] - m.pi[j] * k.p[(j, i)]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn budget_error_names_fallback() {
        let err = enumerate_kernel(&five_state(), 200, 1e6).unwrap_err();
        assert!(matches!(err, IsirError::EnumerationBudget { .. }));
        assert!(err.to_string().contains("mc_transition_and_rejection"));
    }

    #[test]
    fn monte_carlo_close_to_enumeration() {
        let m = five_state();
        let list: Vec<usize> = (2..=10).collect();
        let mc = mc_transition_and_rejection(&m, &list, 100_000, 3).unwrap();
        for k in &mc.kernels {
            let exact = enumerate_kernel(&m, k.n, 1e8).unwrap();
            assert!(max_diff(&exact.p, &k.p) < 0.01, "N={}", k.n);
        }
    }

    #[test]
    fn monte_carlo_rejection_when_masses_match() {
        let pi = vec![0.25, 0.25, 0.5];
        let m = DiscreteModel::new(vec![1.0, 2.0, 3.0], pi.clone(), pi, 0.0).unwrap();
        let mc = mc_transition_and_rejection(&m, &[2, 4, 8], 20_000, 9).unwrap();
        for (k, se) in mc.kernels.iter().zip(&mc.eps_se) {
            let eps = k.eps(&m.pi);
            assert!(
                (eps - 1.0 / k.n as f64).abs() <= 3.0 * se + 1e-12,
                "N={}",
                k.n
            );
        }
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let m = with_outside();
        let a = mc_transition_and_rejection(&m, &[3, 7], 500, 1).unwrap();
        let b = mc_transition_and_rejection(&m, &[3, 7], 500, 1).unwrap();
        assert_eq!(a.kernels[1].p, b.kernels[1].p);
        assert!(mc_transition_and_rejection(&m, &[7, 3], 500, 1).is_err());
    }

    #[test]
    fn symmetrised_kernel_is_reversible() {
        let m = five_state();
        let mc = mc_transition_and_rejection(&m, &[4], 2000, 5).unwrap();
        let s = symmetrise(&mc.kernels[0].p, &m.pi);
        assert!(super::super::spectral::detailed_balance_residual(&s, &m.pi) < 1e-16);
        for i in 0..5 {
            assert!((s.row(i).sum() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetrising_keeps_rare_rows_accurate() {
        let m = DiscreteModel::new(
            vec![0.0, 1.0, 2.0],
            vec![1e-6, 0.5, 0.5 - 1e-6],
            vec![0.2, 0.4, 0.4],
            0.0,
        )
        .unwrap();
        let exact = quadrature_kernel(&m, 3).unwrap().p;
        let mut noisy = exact.clone();
        // Rare-target entries of common rows carry large relative error.
        noisy[(1, 0)] *= 1.5;
        noisy[(2, 0)] *= 0.5;
        let s = symmetrise(&noisy, &m.pi);
        assert!((&s - &exact).abs().max() < 1e-12);
    }
}
