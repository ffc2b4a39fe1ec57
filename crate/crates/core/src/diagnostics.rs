//! Output analysis: autocovariances, initial-sequence IACT and inverse
//! relative efficiency tables.

use crate::adapt::Cost;
use crate::error::{IsirError, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Biased (`1/n`) autocovariances at lags `0..=max_lag`.
pub fn autocovariance(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag {
        return Err(IsirError::InvalidArgument(format!(
            "series of length {n} is too short for lag {max_lag}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex::new(v.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    Ok(buf[..=max_lag].iter().map(|c| c.re * scale).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SequenceVariant {
    /// Paired sums clipped to be non-increasing.
    InitialMonotone,
    InitialPositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IactEstimate {
    pub iact: f64,
    pub asvar: f64,
    /// Even lag at which the sum was truncated.
    pub truncation_lag: usize,
    pub n_samples: usize,
    pub variant: SequenceVariant,
}

pub const MIN_SERIES: usize = 10;

/// Geyer's initial-sequence estimator with the monotone refinement.
pub fn initial_sequence_iact(series: &[f64]) -> Result<IactEstimate> {
    initial_sequence_iact_with(series, SequenceVariant::InitialMonotone)
}

pub fn initial_sequence_iact_with(
    series: &[f64],
    variant: SequenceVariant,
) -> Result<IactEstimate> {
    let n = series.len();
    if n < MIN_SERIES {
        return Err(IsirError::InvalidArgument(format!(
            "need at least {MIN_SERIES} samples, got {n}"
        )));
    }
    let gamma = autocovariance(series, n - 1)?;
    let g0 = gamma[0];
    if !(g0 > 0.0) {
        return Ok(IactEstimate {
            iact: 1.0,
            asvar: 0.0,
            truncation_lag: 0,
            n_samples: n,
            variant,
        });
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let mut pair = gamma[2 * m] + gamma[2 * m + 1];
        if pair <= 0.0 {
            break;
        }
        if variant == SequenceVariant::InitialMonotone {
            pair = pair.min(prev);
        }
        prev = pair;
        sum += pair;
        m += 1;
    }
    let asvar = (2.0 * sum - g0).max(0.0);
    Ok(IactEstimate {
        iact: asvar / g0,
        asvar,
        truncation_lag: 2 * m,
        n_samples: n,
        variant,
    })
}

/// Summary of one fixed-λ run for the efficiency table.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub lambda: f64,
    /// Cost per iteration (measured seconds or a cost model).
    pub seconds_per_iter: f64,
    /// Post-burn-in test-function series, one per function.
    pub series: Vec<Vec<f64>>,
    pub mean_eps_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IreRow {
    pub lambda: f64,
    pub n: usize,
    pub seconds_per_iter: f64,
    pub iact: Vec<f64>,
    pub asvar: Vec<f64>,
    pub ire: Vec<f64>,
    /// `(1 + ε̄)/(1 − ε̄) · c(λ)` from the mean rejection estimate.
    pub approx_loss: f64,
}

/// Efficiency rows sorted by λ, costed by `cost` when given and by the
/// measured time otherwise. Runs at `λ = 1` never move and are omitted.
pub fn ire_table(runs: &[RunSummary], cost: Option<&dyn Cost>) -> Result<Vec<IreRow>> {
    let mut rows = Vec::with_capacity(runs.len());
    for run in runs {
        if run.lambda <= 1.0 {
            continue;
        }
        let est = run
            .series
            .iter()
            .map(|s| initial_sequence_iact(s))
            .collect::<Result<Vec<_>>>()?;
        let c = match cost {
            Some(c) => c.c(run.lambda),
            None => run.seconds_per_iter,
        };
        let eps = run.mean_eps_hat.clamp(0.0, 1.0 - 1e-15);
        rows.push(IreRow {
            lambda: run.lambda,
            n: run.lambda.floor() as usize,
            seconds_per_iter: run.seconds_per_iter,
            iact: est.iter().map(|e| e.iact).collect(),
            asvar: est.iter().map(|e| e.asvar).collect(),
            ire: est.iter().map(|e| e.asvar * c).collect(),
            approx_loss: (1.0 + eps) / (1.0 - eps) * c,
        });
    }
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn ar1(n: usize, rho: f64, seed: u64) -> Vec<f64> {
        let e = normals(n, seed);
        let mut x = Vec::with_capacity(n);
        let mut prev = e[0] / (1.0 - rho * rho).sqrt();
        for v in e {
            prev = rho * prev + v;
            x.push(prev);
        }
        x
    }

    #[test]
    fn autocovariance_matches_direct_sum() {
        let x = normals(500, 1);
        let g = autocovariance(&x, 5).unwrap();
        let mean = x.iter().sum::<f64>() / 500.0;
        for (lag, gl) in g.iter().enumerate() {
            let direct: f64 = (0..500 - lag)
                .map(|t| (x[t] - mean) * (x[t + lag] - mean))
                .sum::<f64>()
                / 500.0;
            assert!((gl - direct).abs() < 1e-12);
        }
        assert!(autocovariance(&x[..5], 5).is_err());
    }

    #[test]
    fn ar1_autocovariance_decays_geometrically() {
        let x = ar1(200_000, 0.5, 2);
        let g = autocovariance(&x, 4).unwrap();
        for k in 1..=4 {
            assert!((g[k] / g[0] - 0.5f64.powi(k as i32)).abs() < 0.02);
        }
    }

    #[test]
    fn ar1_iact() {
        let x = ar1(200_000, 0.5, 3);
        let est = initial_sequence_iact(&x).unwrap();
        assert!((est.iact / 3.0 - 1.0).abs() < 0.1);
        assert_eq!(est.truncation_lag % 2, 0);
        assert!((est.asvar - est.iact * autocovariance(&x, 0).unwrap()[0]).abs() < 1e-9);
    }

    #[test]
    fn constant_series_has_unit_iact() {
        let est = initial_sequence_iact(&[2.0; 50]).unwrap();
        assert_eq!(est.iact, 1.0);
        assert!(initial_sequence_iact(&[1.0; 9]).is_err());
    }

    #[test]
    fn variants_agree_on_smooth_series() {
        let x = ar1(50_000, 0.3, 4);
        let a = initial_sequence_iact_with(&x, SequenceVariant::InitialMonotone).unwrap();
        let b = initial_sequence_iact_with(&x, SequenceVariant::InitialPositive).unwrap();
        assert!(a.iact <= b.iact + 1e-12);
        assert!((a.iact - b.iact).abs() < 0.1);
    }

    #[test]
    fn ire_rows() {
        let s = normals(1000, 5);
        let run = |lambda, t| RunSummary {
            lambda,
            seconds_per_iter: t,
            series: vec![s.clone()],
            mean_eps_hat: 0.5,
        };
        let rows = ire_table(&[run(3.0, 2.0), run(2.0, 1.0), run(1.0, 1.0)], None).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].lambda, 2.0);
        assert_eq!(rows[0].ire[0], rows[0].asvar[0]);
        assert!((rows[1].ire[0] / rows[0].ire[0] - 2.0).abs() < 1e-12);
        assert!((rows[0].approx_loss - 3.0).abs() < 1e-12);
        let cost = crate::adapt::AffineCost::new(1.0, 1.0).unwrap();
        let costed = ire_table(&[run(2.0, 9.0)], Some(&cost)).unwrap();
        assert!((costed[0].ire[0] - 3.0 * costed[0].asvar[0]).abs() < 1e-12);
    }
}
