//! Transition probabilities of the two- and three-proposal kernels for the
//! target `π(x) = 2x` on `[0, 1]` with a uniform proposal, where the Peskun
//! order between `P₂` and `P₃` fails.

use crate::quad::integrate;

const ORDER: usize = 20;
const PANELS: usize = 64;

/// `P₂(x, (lo, hi)) = ∫ 2z / (2x + 2z) dz`.
pub fn p2(x: f64, lo: f64, hi: f64) -> f64 {
    integrate(|z| 2.0 * z / (2.0 * x + 2.0 * z), lo, hi, ORDER, PANELS)
}

/// `P₃(x, (lo, hi)) = 2 ∫ 2z ∫₀¹ 1/(2x + 2z + 2u) du dz`; the inner integral
/// is `½ ln((c + 2)/c)` with `c = 2x + 2z`.
pub fn p3(x: f64, lo: f64, hi: f64) -> f64 {
    integrate(
        |z| {
            let c = 2.0 * x + 2.0 * z;
            2.0 * z * (2.0 / c).ln_1p()
        },
        lo,
        hi,
        ORDER,
        PANELS,
    )
}

/// `(P₂, P₃)` on both test sets `(0, 0.1)` and `(0.9, 1)` at `x`.
pub fn counterexample(x: f64) -> [(f64, f64); 2] {
    [
        (p2(x, 0.0, 0.1), p3(x, 0.0, 0.1)),
        (p2(x, 0.9, 1.0), p3(x, 0.9, 1.0)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_proposal_closed_form() {
        for x in [0.05_f64, 0.3, 0.9] {
            for (lo, hi) in [(0.0, 0.1), (0.9, 1.0), (0.0, 1.0)] {
                let want = (hi - lo) - x * ((x + hi) / (x + lo)).ln();
                assert!((p2(x, lo, hi) - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn three_proposal_matches_double_midpoint_sum() {
        let (x, lo, hi) = (0.4, 0.9, 1.0);
        let n = 400;
        let mut total = 0.0;
        for a in 0..n {
            let z = lo + (hi - lo) * (a as f64 + 0.5) / n as f64;
            for b in 0..n {
                let u = (b as f64 + 0.5) / n as f64;
                total += 2.0 * 2.0 * z / (2.0 * x + 2.0 * z + 2.0 * u);
            }
        }
        total *= (hi - lo) / (n * n) as f64;
        assert!((p3(x, lo, hi) - total).abs() < 1e-6);
    }

    #[test]
    fn order_reverses_between_sets() {
        let [(a2, a3), (b2, b3)] = counterexample(0.01);
        assert!(a2 > a3);
        assert!(b2 < b3);
    }
}
