//! Numerical quadrature used by the finite-state lab and the test oracles.

use std::f64::consts::FRAC_PI_2;

const EXP_SINH_HALF_WIDTH: f64 = 4.5;
const EXP_SINH_MAX_LEVEL: u32 = 9;

/// Integrates a vector-valued function over `(0, ∞)` with the exp-sinh
/// double-exponential rule, halving the step until every component settles
/// to relative tolerance `rel_tol`.
///
/// `f(t, out)` must *add nothing*: it overwrites `out` with the integrand at `t`.
pub fn exp_sinh_vec<F>(dim: usize, rel_tol: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut buf = vec![0.0; dim];
    let mut sum = vec![0.0; dim];
    let mut eval = |s: f64, sum: &mut [f64], buf: &mut [f64]| {
        let sh = FRAC_PI_2 * s.sinh();
        let t = sh.exp();
        if t == 0.0 || !t.is_finite() {
            return;
        }
        let jac = t * FRAC_PI_2 * s.cosh();
        f(t, buf);
        for (acc, v) in sum.iter_mut().zip(buf.iter()) {
            *acc += v * jac;
        }
    };

    let mut h = 0.5;
    let n0 = (EXP_SINH_HALF_WIDTH / h) as i64;
    for k in -n0..=n0 {
        eval(k as f64 * h, &mut sum, &mut buf);
    }
    let mut prev: Vec<f64> = sum.iter().map(|v| v * h).collect();
    for level in 1..=EXP_SINH_MAX_LEVEL {
        h *= 0.5;
        let n = (EXP_SINH_HALF_WIDTH / h) as i64;
        let mut k = -n + if n % 2 == 0 { 1 } else { 0 };
        while k <= n {
            eval(k as f64 * h, &mut sum, &mut buf);
            k += 2;
        }
        let cur: Vec<f64> = sum.iter().map(|v| v * h).collect();
        let settled = cur
            .iter()
            .zip(prev.iter())
            .all(|(c, p)| (c - p).abs() <= rel_tol * c.abs().max(1e-300));
        prev = cur;
        if settled && level >= 3 {
            break;
        }
    }
    prev
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = x;
                p0 = 1.0;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    order: usize,
    panels: usize,
) -> f64 {
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for (xi, wi) in x.iter().zip(w.iter()) {
            total += wi * f(mid + 0.5 * width * xi);
        }
    }
    total * 0.5 * width
}
