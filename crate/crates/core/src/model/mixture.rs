//! The seven-dimensional two-mode mixture with a Student-t proposal and its
//! two test functions.

use super::{ContinuousModel, GaussianMixtureTarget, StudentTProposal};

pub const MIXTURE_DIM: usize = 7;
pub const MIXTURE_DOF: f64 = 3.0;

pub type MixtureModel = ContinuousModel<GaussianMixtureTarget, StudentTProposal>;

pub fn mixture_model() -> MixtureModel {
    ContinuousModel::new(
        GaussianMixtureTarget::two_mode(MIXTURE_DIM),
        StudentTProposal::centred(MIXTURE_DOF, MIXTURE_DIM).expect("positive dof"),
    )
    .expect("matching dimensions")
}

/// `f₁(x) = x₁`.
pub fn mixture_f1(x: &[f64]) -> f64 {
    x[0]
}

/// `f₂(x) = 1{x ∈ A} − 1{x ∈ B}` with `A = [−2,6]×[−1,1]⁶` and
/// `B = [0.75,1.25]×[1,2]×[−0.1,0.1]⁵`.
pub fn mixture_f2(x: &[f64]) -> f64 {
    let inside = |v: f64, lo: f64, hi: f64| (lo..=hi).contains(&v);
    let in_a = inside(x[0], -2.0, 6.0) && x[1..].iter().all(|&v| inside(v, -1.0, 1.0));
    let in_b = inside(x[0], 0.75, 1.25)
        && inside(x[1], 1.0, 2.0)
        && x[2..].iter().all(|&v| inside(v, -0.1, 0.1));
    f64::from(u8::from(in_a)) - f64::from(u8::from(in_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LogModel;

    #[test]
    fn test_functions() {
        assert_eq!(mixture_f1(&[-0.5; 7]), -0.5);
        assert_eq!(mixture_f2(&[0.0; 7]), 1.0);
        assert_eq!(mixture_f2(&[1.0, 1.5, 0.0, 0.0, 0.0, 0.0, 0.0]), -1.0);
        assert_eq!(mixture_f2(&[7.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]), 0.0);
        let m = mixture_model();
        assert_eq!(m.target.mean()[0], -0.5);
        assert!(m.log_target(&vec![0.0; 7]).is_finite());
    }
}
