//! Asymptotic variance of reversible finite-state kernels.

use crate::error::{IsirError, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Largest detailed-balance violation `|π_i P_ij − π_j P_ji|`.
pub fn detailed_balance_residual(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = pi.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs());
        }
    }
    worst
}

pub const REVERSIBILITY_TOL: f64 = 1e-10;
pub const ROUTE_AGREEMENT_TOL: f64 = 1e-8;
const EIGEN_RESIDUAL_TOL: f64 = 1e-11;
const UNIT_EIGEN_GAP: f64 = 1e-12;

/// Eigendecomposition of `Π^{1/2} P Π^{−1/2}` for a π-reversible kernel.
#[derive(Clone, Debug)]
pub struct SpectralKernel {
    sqrt_pi: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    perron: usize,
}

// The default deflation threshold (machine epsilon) occasionally stops the QR
// sweep early and returns eigenvectors off by ~1e-2; retry with tighter ones.
fn symmetric_eigen(s: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let tol = EIGEN_RESIDUAL_TOL * s.norm().max(1.0);
    let mut worst = f64::NAN;
    for eps in [f64::EPSILON, 1e-20, 1e-30] {
        let Some(eig) = SymmetricEigen::try_new(s.clone(), eps, 10_000 * s.nrows().max(1)) else {
            continue;
        };
        let recon = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues)
            * eig.eigenvectors.transpose();
        let resid = (recon - s).norm();
        if resid <= tol {
            return Ok(eig);
        }
        worst = resid;
    }
    Err(IsirError::Singular(format!(
        "eigendecomposition residual {worst:e}"
    )))
}

impl SpectralKernel {
    pub fn new(p: &DMatrix<f64>, pi: &[f64]) -> Result<Self> {
        let n = pi.len();
        if p.nrows() != n || p.ncols() != n {
            return Err(IsirError::InvalidArgument(
                "kernel and pi sizes differ".into(),
            ));
        }
        let residual = detailed_balance_residual(p, pi);
        if residual > REVERSIBILITY_TOL {
            return Err(IsirError::NotReversible { residual });
        }
        let sqrt_pi: Vec<f64> = pi.iter().map(|v| v.sqrt()).collect();
        let mut s = DMatrix::from_fn(n, n, |i, j| sqrt_pi[i] * p[(i, j)] / sqrt_pi[j]);
        s = (&s + s.transpose()) * 0.5;
        let eig = symmetric_eigen(&s)?;
        // The Perron vector is √π; pick the eigenvector most aligned with it.
        let root = DVector::from_column_slice(&sqrt_pi);
        let perron = (0..n)
            .max_by(|&a, &b| {
                let da = eig.eigenvectors.column(a).dot(&root).abs();
                let db = eig.eigenvectors.column(b).dot(&root).abs();
                da.total_cmp(&db)
            })
            .expect("non-empty");
        for (i, &ev) in eig.eigenvalues.iter().enumerate() {
            if i != perron && ev >= 1.0 - UNIT_EIGEN_GAP {
                return Err(IsirError::NotErgodic { eigenvalue: ev });
            }
        }
        Ok(Self {
            sqrt_pi,
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
            perron,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Second largest eigenvalue modulus, excluding the Perron root.
    pub fn slem(&self) -> f64 {
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.perron)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    /// `Σ_{i ≠ Perron} ⟨u_i | f̄⟩_π² (1 + λ_i)/(1 − λ_i)`.
    pub fn asvar(&self, pi: &[f64], f: &[f64]) -> f64 {
        let mean: f64 = f.iter().zip(pi).map(|(a, b)| a * b).sum();
        let g = DVector::from_iterator(
            f.len(),
            f.iter().zip(&self.sqrt_pi).map(|(v, r)| (v - mean) * r),
        );
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.perron)
            .map(|(i, &ev)| {
                let c = self.eigenvectors.column(i).dot(&g);
                c * c * (1.0 + ev) / (1.0 - ev)
            })
            .sum()
    }
}

/// Asymptotic variances by the fundamental matrix: solve
/// `(I − P + 𝟙πᵀ) h = f̄` and return `2⟨f̄|h⟩_π − ⟨f̄|f̄⟩_π`.
pub fn fundamental_asvar(p: &DMatrix<f64>, pi: &[f64], fs: &[&[f64]]) -> Result<Vec<f64>> {
    let n = pi.len();
    let a = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - p[(i, j)] + pi[j]);
    let lu = a.lu();
    fs.iter()
        .map(|f| {
            let mean: f64 = f.iter().zip(pi).map(|(a, b)| a * b).sum();
            let fb = DVector::from_iterator(n, f.iter().map(|v| v - mean));
            let h = lu
                .solve(&fb)
                .ok_or_else(|| IsirError::Singular("I − P + 𝟙πᵀ is singular".into()))?;
            let a: f64 = (0..n).map(|i| pi[i] * fb[i] * h[i]).sum();
            let b: f64 = (0..n).map(|i| pi[i] * fb[i] * fb[i]).sum();
            Ok(2.0 * a - b)
        })
        .collect()
}

/// Spectral asymptotic variances of several functions, each cross-checked
/// against the fundamental-matrix route.
pub fn spectral_asvar_many(p: &DMatrix<f64>, pi: &[f64], fs: &[&[f64]]) -> Result<Vec<f64>> {
    let spec = SpectralKernel::new(p, pi)?;
    let direct = fundamental_asvar(p, pi, fs)?;
    fs.iter()
        .zip(direct)
        .map(|(f, d)| {
            let v = spec.asvar(pi, f);
            if (v - d).abs() > ROUTE_AGREEMENT_TOL * v.abs().max(1.0) {
                Err(IsirError::Singular(format!(
                    "spectral ({v}) and fundamental-matrix ({d}) variances disagree"
                )))
            } else {
                Ok(v)
            }
        })
        .collect()
}

pub fn spectral_asvar(p: &DMatrix<f64>, pi: &[f64], f: &[f64]) -> Result<f64> {
    Ok(spectral_asvar_many(p, pi, &[f])?[0])
}

/// `⟨f | P f⟩_π`.
pub fn covariance(p: &DMatrix<f64>, pi: &[f64], f: &[f64]) -> f64 {
    let n = pi.len();
    (0..n)
        .map(|i| pi[i] * f[i] * (0..n).map(|j| p[(i, j)] * f[j]).sum::<f64>())
        .sum()
}
