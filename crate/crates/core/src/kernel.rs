//! The i-SIR transition for an integer number of proposals and its
//! fractional relaxation.
//!
//! Randomness for iteration `k` comes from [`Substreams`]: slot 0 supplies
//! the β coin and then the selection uniform, slot `i ≥ 2` supplies proposal
//! `Y^i`. Proposal `i` of iteration `k` is therefore the same whichever
//! worker draws it, and the same for every λ that uses it.

use crate::error::{IsirError, Result};
use crate::model::{log_weight, LogModel};
use crate::rng::{Substreams, INIT_STREAM};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Batches at least this large are drawn and weighted on the worker pool.
const PARALLEL_BATCH: usize = 64;
pub const MAX_INIT_ATTEMPTS: usize = 1000;

/// One iteration's candidates `Y¹..Y^N̄` (with `Y¹` the current state).
#[derive(Clone, Debug)]
pub struct ProposalBatch<S> {
    pub states: Vec<S>,
    pub log_weights: Vec<f64>,
    /// `N̄ = ⌊λ⌋ + 1`.
    pub nbar: usize,
    /// `β = N̄ − λ ∈ (0, 1]`.
    pub beta: f64,
    /// `N_k ∈ {N̄ − 1, N̄}`.
    pub n_used: usize,
}

impl<S> ProposalBatch<S> {
    /// `log Σ_{j ≤ m} w_j`.
    fn log_partial_sum(&self, m: usize) -> f64 {
        log_sum_exp(&self.log_weights[..m])
    }

    /// Rejection estimators `(ε̂, ε̂′)` from all `N̄` weights:
    /// `ε̂ = w₁(β/S_{N̄−1} + (1 − β)/S_{N̄})`, `ε̂′ = w₁(1/S_{N̄} − 1/S_{N̄−1})`.
    pub fn estimators(&self) -> (f64, f64) {
        let lw1 = self.log_weights[0];
        let lo = (lw1 - self.log_partial_sum(self.nbar - 1)).exp();
        let hi = (lw1 - self.log_partial_sum(self.nbar)).exp();
        let lo = if lo.is_nan() { 0.0 } else { lo.min(1.0) };
        let hi = if hi.is_nan() { 0.0 } else { hi.min(lo) };
        (self.beta * lo + (1.0 - self.beta) * hi, hi - lo)
    }
}

/// Result of one fractional step.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord<S> {
    pub new_state: S,
    /// 1-based index of the selected candidate.
    pub accepted_index: usize,
    pub eps_hat: f64,
    pub deps_hat: f64,
    pub lambda_used: f64,
    pub n_used: usize,
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Inverse-cdf categorical draw from log weights; returns a 0-based index.
pub fn sample_categorical(log_weights: &[f64], u: f64) -> Result<usize> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(IsirError::ZeroWeights {
            n: log_weights.len(),
        });
    }
    let w: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let target = u * w.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, wi) in w.iter().enumerate() {
        if *wi > 0.0 {
            last_positive = i;
            acc += wi;
            if target < acc {
                return Ok(i);
            }
        }
    }
    Ok(last_positive)
}

/// Draws `Y^2..Y^count` of iteration `k` and weights every candidate.
fn draw_batch<M: LogModel>(
    model: &M,
    current: &M::State,
    count: usize,
    streams: &Substreams,
    k: u64,
) -> Result<(Vec<M::State>, Vec<f64>)> {
    let draw = |slot: usize| -> Result<(M::State, f64)> {
        let mut rng = streams.at(k, slot as u64);
        let y = model.sample_proposal(&mut rng);
        let lw = log_weight(model, &y)?;
        Ok((y, lw))
    };
    let fresh: Vec<(M::State, f64)> = if count >= PARALLEL_BATCH {
        (2..=count)
            .into_par_iter()
            .map(draw)
            .collect::<Result<_>>()?
    } else {
        (2..=count).map(draw).collect::<Result<_>>()?
    };
    let mut states = Vec::with_capacity(count);
    let mut log_weights = Vec::with_capacity(count);
    states.push(current.clone());
    log_weights.push(log_weight(model, current)?);
    for (y, lw) in fresh {
        states.push(y);
        log_weights.push(lw);
    }
    Ok((states, log_weights))
}

/// Builds the candidate batch of iteration `k` for `λ ≥ 1` and flips the β coin.
pub fn propose<M: LogModel>(
    model: &M,
    current: &M::State,
    lambda: f64,
    streams: &Substreams,
    k: u64,
) -> Result<(ProposalBatch<M::State>, f64)> {
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return Err(IsirError::InvalidArgument(format!(
            "λ must be at least 1, got {lambda}"
        )));
    }
    let fl = lambda.floor();
    let nbar = fl as usize + 1;
    let beta = fl + 1.0 - lambda;
    let (states, log_weights) = draw_batch(model, current, nbar, streams, k)?;
    let mut control = streams.control(k);
    let coin: f64 = control.random();
    let n_used = if coin < beta { nbar - 1 } else { nbar };
    let u: f64 = control.random();
    Ok((
        ProposalBatch {
            states,
            log_weights,
            nbar,
            beta,
            n_used,
        },
        u,
    ))
}

/// One fractional i-SIR step at iteration `k`.
pub fn isir_step_fractional<M: LogModel>(
    model: &M,
    current: &M::State,
    lambda: f64,
    streams: &Substreams,
    k: u64,
) -> Result<StepRecord<M::State>> {
    let (batch, u) = propose(model, current, lambda, streams, k)?;
    let index = sample_categorical(&batch.log_weights[..batch.n_used], u)?;
    let (eps_hat, deps_hat) = batch.estimators();
    Ok(StepRecord {
        new_state: batch.states[index].clone(),
        accepted_index: index + 1,
        eps_hat,
        deps_hat,
        lambda_used: lambda,
        n_used: batch.n_used,
    })
}

/// One i-SIR step with `n` candidates; returns the new state and the 1-based
/// selected index. Uses the same randomness as the fractional step at `λ = n`.
pub fn isir_step<M: LogModel>(
    model: &M,
    current: &M::State,
    n: usize,
    streams: &Substreams,
    k: u64,
) -> Result<(M::State, usize)> {
    if n == 0 {
        return Err(IsirError::InvalidArgument("n must be at least 1".into()));
    }
    let (states, log_weights) = draw_batch(model, current, n, streams, k)?;
    let mut control = streams.control(k);
    let _coin: f64 = control.random();
    let index = sample_categorical(&log_weights, control.random())?;
    Ok((states[index].clone(), index + 1))
}

/// Draws from the proposal until the weight is positive.
pub fn initial_state<M: LogModel>(model: &M, streams: &Substreams) -> Result<M::State> {
    for attempt in 0..MAX_INIT_ATTEMPTS {
        let mut rng = streams.at(INIT_STREAM, attempt as u64);
        let x = model.sample_proposal(&mut rng);
        if log_weight(model, &x)? > f64::NEG_INFINITY {
            return Ok(x);
        }
    }
    Err(IsirError::Initialisation {
        attempts: MAX_INIT_ATTEMPTS,
    })
}

/// Fixed-λ chain. Iterations are numbered from 1.
pub struct Chain<'a, M: LogModel> {
    model: &'a M,
    streams: Substreams,
    state: M::State,
    lambda: f64,
    k: u64,
}

impl<'a, M: LogModel> Chain<'a, M> {
    pub fn new(model: &'a M, x0: M::State, lambda: f64, seed: u64) -> Self {
        Self {
            model,
            streams: Substreams::new(seed),
            state: x0,
            lambda,
            k: 0,
        }
    }

    pub fn state(&self) -> &M::State {
        &self.state
    }

    pub fn iteration(&self) -> u64 {
        self.k
    }

    pub fn step(&mut self) -> Result<StepRecord<M::State>> {
        self.k += 1;
        let rec =
            isir_step_fractional(self.model, &self.state, self.lambda, &self.streams, self.k)?;
        self.state = rec.new_state.clone();
        Ok(rec)
    }
}

/// Runs `n_iters` fractional steps from `x0`.
pub fn run_chain<M: LogModel>(
    model: &M,
    x0: M::State,
    lambda: f64,
    n_iters: usize,
    seed: u64,
) -> Result<Vec<StepRecord<M::State>>> {
    let mut chain = Chain::new(model, x0, lambda, seed);
    (0..n_iters).map(|_| chain.step()).collect()
}

/// One serialised trace row.
#[derive(Clone, Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub lambda: f64,
    pub n_used: usize,
    pub accepted_index: usize,
    pub eps_hat: f64,
    pub deps_hat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<f64>>,
    #[serde(default)]
    pub f_values: Vec<f64>,
}

impl TraceRow {
    pub fn from_record<S>(
        k: u64,
        rec: &StepRecord<S>,
        state: Option<Vec<f64>>,
        f_values: Vec<f64>,
    ) -> Self {
        Self {
            k,
            lambda: rec.lambda_used,
            n_used: rec.n_used,
            accepted_index: rec.accepted_index,
            eps_hat: rec.eps_hat,
            deps_hat: rec.deps_hat,
            state,
            f_values,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace rows serialise")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| IsirError::Parse(e.to_string()))
    }

    /// CSV header for rows with `n_f` test-function values and, optionally, a
    /// `dim`-dimensional state.
    pub fn csv_header(n_f: usize, dim: Option<usize>) -> String {
        let mut cols: Vec<String> = ["k", "lambda", "N_used", "I", "eps_hat", "deps_hat"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        if let Some(d) = dim {
            cols.extend((1..=d).map(|i| format!("x{i}")));
        }
        cols.extend((1..=n_f).map(|i| format!("f{i}")));
        cols.join(",")
    }

    pub fn to_csv_line(&self) -> String {
        let mut cols = vec![
            self.k.to_string(),
            self.lambda.to_string(),
            self.n_used.to_string(),
            self.accepted_index.to_string(),
            self.eps_hat.to_string(),
            self.deps_hat.to_string(),
        ];
        if let Some(s) = &self.state {
            cols.extend(s.iter().map(|v| v.to_string()));
        }
        cols.extend(self.f_values.iter().map(|v| v.to_string()));
        cols.join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::{enumerate_kernel, DiscreteModel};
    use crate::model::{ContinuousModel, IsotropicGaussian, Shifted, StudentTProposal};
    use proptest::prelude::*;

    fn identical(pi: Vec<f64>) -> DiscreteModel {
        let states = (0..pi.len()).map(|i| i as f64).collect();
        DiscreteModel::new(states, pi.clone(), pi, 0.0).unwrap()
    }

    fn gaussian_t() -> ContinuousModel<IsotropicGaussian, StudentTProposal> {
        ContinuousModel::new(
            IsotropicGaussian::standard(2),
            StudentTProposal::centred(3.0, 2).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn categorical_inverse_cdf() {
        let lw = [0f64.ln(), 1f64.ln(), 3f64.ln()];
        assert_eq!(sample_categorical(&lw, 0.0).unwrap(), 1);
        assert_eq!(sample_categorical(&lw, 0.2499).unwrap(), 1);
        assert_eq!(sample_categorical(&lw, 0.25).unwrap(), 2);
        assert_eq!(sample_categorical(&lw, 1.0 - 1e-17).unwrap(), 2);
        assert!(matches!(
            sample_categorical(&[f64::NEG_INFINITY; 2], 0.5),
            Err(IsirError::ZeroWeights { n: 2 })
        ));
    }

    #[test]
    fn single_proposal_never_moves() {
        let m = gaussian_t();
        let s = Substreams::new(1);
        let x = vec![0.3, -1.0];
        assert_eq!(isir_step(&m, &x, 1, &s, 1).unwrap(), (x.clone(), 1));
        let rec = isir_step_fractional(&m, &x, 1.0, &s, 1).unwrap();
        assert_eq!(rec.new_state, x);
        assert_eq!(rec.accepted_index, 1);
        assert_eq!(rec.eps_hat, 1.0);
        assert!(isir_step(&m, &x, 0, &s, 1).is_err());
        assert!(isir_step_fractional(&m, &x, 0.9, &s, 1).is_err());
    }

    #[test]
    fn integer_lambda_matches_integer_step() {
        let m = gaussian_t();
        let s = Substreams::new(5);
        let mut x = vec![0.0, 0.0];
        for k in 1..200 {
            let (y, i) = isir_step(&m, &x, 6, &s, k).unwrap();
            let rec = isir_step_fractional(&m, &x, 6.0, &s, k).unwrap();
            assert_eq!((y.clone(), i), (rec.new_state, rec.accepted_index));
            assert_eq!(rec.n_used, 6);
            x = y;
        }
    }

    #[test]
    fn identical_masses_select_uniformly() {
        let m = identical(vec![0.1, 0.2, 0.3, 0.4]);
        let s = Substreams::new(2);
        let n = 4;
        let steps = 100_000;
        let mut x = 0;
        let mut first = 0usize;
        for k in 1..=steps {
            let (y, i) = isir_step(&m, &x, n, &s, k).unwrap();
            first += usize::from(i == 1);
            x = y;
        }
        let p = 1.0 / n as f64;
        let se = (p * (1.0 - p) / steps as f64).sqrt();
        assert!((first as f64 / steps as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn identical_masses_give_exact_estimator() {
        let m = identical(vec![0.5, 0.5]);
        let s = Substreams::new(3);
        for k in 1..50 {
            let rec = isir_step_fractional(&m, &0, 2.5, &s, k).unwrap();
            assert!((rec.eps_hat - 5.0 / 12.0).abs() < 1e-15);
            assert!((rec.deps_hat - (1.0 / 3.0 - 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn two_state_transitions_match_exact_kernel() {
        let m = DiscreteModel::new(vec![0.0, 1.0], vec![0.3, 0.7], vec![0.5, 0.5], 0.0).unwrap();
        let p = enumerate_kernel(&m, 2, 1e6).unwrap().p;
        let s = Substreams::new(4);
        let mut counts = [[0usize; 2]; 2];
        let mut x = 0;
        for k in 1..=100_000 {
            let (y, _) = isir_step(&m, &x, 2, &s, k).unwrap();
            counts[x][y] += 1;
            x = y;
        }
        for (i, row) in counts.iter().enumerate() {
            let total = (row[0] + row[1]) as f64;
            let freq = row[1] as f64 / total;
            let se = (p[(i, 1)] * (1.0 - p[(i, 1)]) / total).sqrt();
            assert!(
                (freq - p[(i, 1)]).abs() < 3.0 * se,
                "row {i}: {freq} vs {}",
                p[(i, 1)]
            );
        }
    }

    #[test]
    fn continuous_rejection_iff_first_index() {
        let m = gaussian_t();
        let trace = run_chain(&m, vec![0.5, 0.5], 3.7, 2000, 8).unwrap();
        let mut prev = vec![0.5, 0.5];
        for rec in &trace {
            assert_eq!(rec.new_state == prev, rec.accepted_index == 1);
            assert!(rec.accepted_index >= 1 && rec.accepted_index <= rec.n_used);
            prev = rec.new_state.clone();
        }
    }

    #[test]
    fn shift_leaves_trace_unchanged() {
        let m = gaussian_t();
        let shifted = Shifted {
            inner: gaussian_t(),
            shift: 7.3,
        };
        let a = run_chain(&m, vec![0.0, 0.0], 4.2, 500, 9).unwrap();
        let b = run_chain(&shifted, vec![0.0, 0.0], 4.2, 500, 9).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.new_state, y.new_state);
            assert!((x.eps_hat - y.eps_hat).abs() < 1e-12);
            assert!((x.deps_hat - y.deps_hat).abs() < 1e-12);
        }
    }

    #[test]
    fn chains_are_reproducible() {
        let m = gaussian_t();
        assert!(run_chain(&m, vec![0.0, 0.0], 3.0, 0, 1).unwrap().is_empty());
        let a = run_chain(&m, vec![0.0, 0.0], 100.5, 50, 1).unwrap();
        let b = run_chain(&m, vec![0.0, 0.0], 100.5, 50, 1).unwrap();
        let c = run_chain(&m, vec![0.0, 0.0], 100.5, 50, 2).unwrap();
        assert_eq!(
            a.iter().map(|r| &r.new_state).collect::<Vec<_>>(),
            b.iter().map(|r| &r.new_state).collect::<Vec<_>>()
        );
        assert_ne!(
            a.iter().map(|r| &r.new_state).collect::<Vec<_>>(),
            c.iter().map(|r| &r.new_state).collect::<Vec<_>>()
        );
    }

    #[test]
    fn initial_state_has_positive_weight() {
        let m = DiscreteModel::new(vec![0.0, 1.0], vec![0.5, 0.5], vec![0.05, 0.05], 0.9).unwrap();
        let x = initial_state(&m, &Substreams::new(1)).unwrap();
        assert!(x < 2);
    }

    #[test]
    fn trace_rows_round_trip() {
        let rec = StepRecord {
            new_state: 3usize,
            accepted_index: 2,
            eps_hat: 0.25,
            deps_hat: -0.125,
            lambda_used: 2.5,
            n_used: 3,
        };
        let row = TraceRow::from_record(7, &rec, Some(vec![1.5, -2.0]), vec![0.1]);
        assert_eq!(TraceRow::from_json_line(&row.to_json_line()).unwrap(), row);
        assert_eq!(
            TraceRow::csv_header(1, Some(2)),
            "k,lambda,N_used,I,eps_hat,deps_hat,x1,x2,f1"
        );
        assert_eq!(row.to_csv_line(), "7,2.5,3,2,0.25,-0.125,1.5,-2,0.1");
    }

    proptest! {
        #[test]
        fn estimators_stay_in_range(lambda in 1.0f64..40.0, seed in 0u64..1000, x0 in -4.0f64..4.0) {
            let m = gaussian_t();
            let rec = isir_step_fractional(&m, &vec![x0, -x0], lambda, &Substreams::new(seed), 1).unwrap();
            prop_assert!(rec.eps_hat > 0.0 && rec.eps_hat <= 1.0);
            prop_assert!(rec.deps_hat >= -1.0 && rec.deps_hat <= 0.0);
            prop_assert!(rec.n_used == lambda.floor() as usize || rec.n_used == lambda.floor() as usize + 1);
            prop_assert!(rec.accepted_index <= rec.n_used);
        }
    }
}
