use super::{LogDensity, Proposal};
use crate::error::{IsirError, Result};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

/// Multivariate Student-t proposal with identity shape.
#[derive(Clone, Debug)]
pub struct StudentTProposal {
    dof: f64,
    location: Vec<f64>,
    log_norm: f64,
    chi2: ChiSquared<f64>,
}

impl StudentTProposal {
    pub fn new(dof: f64, location: Vec<f64>) -> Result<Self> {
        if !(dof > 0.0 && dof.is_finite()) {
            return Err(IsirError::InvalidArgument(format!(
                "dof must be positive, got {dof}"
            )));
        }
        if location.is_empty() {
            return Err(IsirError::InvalidArgument("empty location".into()));
        }
        let d = location.len() as f64;
        let log_norm = ln_gamma(0.5 * (dof + d))
            - ln_gamma(0.5 * dof)
            - 0.5 * d * (dof * std::f64::consts::PI).ln();
        let chi2 = ChiSquared::new(dof).expect("positive dof");
        Ok(Self {
            dof,
            location,
            log_norm,
            chi2,
        })
    }

    pub fn centred(dof: f64, dim: usize) -> Result<Self> {
        Self::new(dof, vec![0.0; dim])
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }
}

impl LogDensity for StudentTProposal {
    fn log_density(&self, x: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(&self.location)
            .map(|(xi, mi)| (xi - mi) * (xi - mi))
            .sum();
        let d = self.location.len() as f64;
        self.log_norm - 0.5 * (self.dof + d) * (r2 / self.dof).ln_1p()
    }

    fn dim(&self) -> usize {
        self.location.len()
    }
}

impl Proposal for StudentTProposal {
    // Gaussian divided by sqrt(chi-square / dof).
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let scale = (self.chi2.sample(rng) / self.dof).sqrt().recip();
        self.location
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + scale * z
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use crate::rng::Substreams;

    #[test]
    fn one_dimensional_density_integrates_to_one() {
        let t = StudentTProposal::centred(3.0, 1).unwrap();
        // substitute x = tan(θ) to cover the real line
        let mass = integrate(
            |th: f64| {
                let x = th.tan();
                t.log_density(&[x]).exp() / th.cos().powi(2)
            },
            -std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            20,
            64,
        );
        assert!((mass - 1.0).abs() < 1e-9, "mass {mass}");
    }

    #[test]
    fn rejects_non_positive_dof() {
        assert!(StudentTProposal::centred(0.0, 2).is_err());
        assert!(StudentTProposal::centred(-1.0, 2).is_err());
    }

    #[test]
    fn sample_second_moment() {
        // E[X²] = ν/(ν-2) = 5/3 for ν = 5
        let t = StudentTProposal::centred(5.0, 1).unwrap();
        let mut rng = Substreams::new(3).at(0, 1);
        let n = 200_000;
        let m2: f64 = (0..n).map(|_| t.sample(&mut rng)[0].powi(2)).sum::<f64>() / n as f64;
        assert!((m2 - 5.0 / 3.0).abs() < 0.05, "{m2}");
    }
}
