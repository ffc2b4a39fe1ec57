//! Library results against hand-written reference computations.

use isir::diagnostics::initial_sequence_iact;
use isir::kernel::run_chain;
use isir::lab::transition::quadrature_kernel;
use isir::lab::{spectral_asvar, DiscreteModel};
use isir::model::wdbc::{load_wdbc, standardise, WDBC_FEATURES};
use isir::model::{fit_laplace, LogisticPosterior};
use nalgebra::DVector;
use std::path::Path;

const PRIOR_VARIANCE: f64 = 20.0;

/// Log posterior without constants, coded directly from the data.
struct Objective {
    rows: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

impl Objective {
    fn eta(&self, b: &[f64], r: &[f64]) -> f64 {
        b[0] + r.iter().zip(&b[1..]).map(|(x, c)| x * c).sum::<f64>()
    }

    fn value(&self, b: &[f64]) -> f64 {
        let ll: f64 = self
            .rows
            .iter()
            .zip(&self.labels)
            .map(|(r, y)| {
                let e = self.eta(b, r);
                y * e - (e.max(0.0) + (-e.abs()).exp().ln_1p())
            })
            .sum();
        ll - b.iter().map(|c| c * c).sum::<f64>() / (2.0 * PRIOR_VARIANCE)
    }

    fn grad(&self, b: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = b.iter().map(|c| -c / PRIOR_VARIANCE).collect();
        for (r, y) in self.rows.iter().zip(&self.labels) {
            let res = y - 1.0 / (1.0 + (-self.eta(b, r)).exp());
            g[0] += res;
            for (gj, x) in g[1..].iter_mut().zip(r) {
                *gj += res * x;
            }
        }
        g
    }

    /// Gradient ascent with backtracking.
    fn maximise(&self, iters: usize) -> Vec<f64> {
        let mut b = vec![0.0; self.rows[0].len() + 1];
        let mut f = self.value(&b);
        let mut step = 1e-2;
        for _ in 0..iters {
            let g = self.grad(&b);
            let gg: f64 = g.iter().map(|v| v * v).sum();
            if gg.sqrt() < 1e-10 {
                break;
            }
            step *= 2.0;
            loop {
                let trial: Vec<f64> = b.iter().zip(&g).map(|(x, d)| x + step * d).collect();
                let ft = self.value(&trial);
                if ft >= f + 0.5 * step * gg {
                    b = trial;
                    f = ft;
                    break;
                }
                step *= 0.5;
            }
        }
        b
    }
}

#[test]
fn laplace_mode_matches_gradient_ascent() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wdbc.data");
    let data = load_wdbc(&path).unwrap();
    let (x, _, _) = standardise(&data.features);
    let posterior =
        LogisticPosterior::new(&x, &data.labels, PRIOR_VARIANCE, WDBC_FEATURES + 1).unwrap();
    let laplace = fit_laplace(&posterior, &[0.0; WDBC_FEATURES + 1], 1e-8, 200).unwrap();

    let obj = Objective {
        rows: x,
        labels: data.labels.iter().map(|&y| y as f64).collect(),
    };
    let reference = obj.maximise(20_000);
    let mode: Vec<f64> = laplace.mode().iter().copied().collect();
    let (f_lib, f_ref) = (obj.value(&mode), obj.value(&reference));
    assert!(f_lib >= f_ref - 1e-9, "{f_lib} < {f_ref}");
    assert!((f_lib - f_ref).abs() < 1e-6, "{f_lib} vs {f_ref}");

    // Same objective up to its constant.
    let shift = posterior.log_posterior(laplace.mode()) - f_lib;
    let r = DVector::from_vec(reference);
    assert!((posterior.log_posterior(&r) - f_ref - shift).abs() < 1e-8);
}

#[test]
fn two_state_asymptotic_variance_matches_closed_form() {
    let (pi, q) = ([0.3, 0.7], [0.6, 0.4]);
    let w = [pi[0] / q[0], pi[1] / q[1]];
    let model = DiscreteModel::new(vec![0.0, 1.0], pi.to_vec(), q.to_vec(), 0.0).unwrap();
    let f = [0.0, 1.0];
    let var = pi[0] * pi[1];
    for n in [2usize, 3, 6] {
        // Leaving state x: k of the N − 1 fresh draws land on y, one is picked ∝ w.
        let leave = |x: usize| {
            let y = 1 - x;
            (1..n)
                .map(|k| {
                    let choose = (0..k).fold(1.0, |c, i| c * (n - 1 - i) as f64 / (i + 1) as f64);
                    let prob = choose * q[y].powi(k as i32) * q[x].powi((n - 1 - k) as i32);
                    let kw = k as f64 * w[y];
                    prob * kw / (kw + (n - k) as f64 * w[x])
                })
                .sum::<f64>()
        };
        let rho = 1.0 - leave(0) - leave(1);
        let want = var * (1.0 + rho) / (1.0 - rho);

        let kernel = quadrature_kernel(&model, n).unwrap();
        let got = spectral_asvar(&kernel.p, &pi, &f).unwrap();
        assert!((got - want).abs() < 1e-10 * want, "N={n}: {got} vs {want}");

        let trace = run_chain(&model, 0, n as f64, 200_000, 40 + n as u64).unwrap();
        let series: Vec<f64> = trace.iter().map(|r| f[r.new_state]).collect();
        let est = initial_sequence_iact(&series).unwrap();
        let sim = est.iact * var;
        assert!(
            (sim / want - 1.0).abs() < 0.1,
            "N={n}: simulated {sim} vs {want}"
        );
    }
}
