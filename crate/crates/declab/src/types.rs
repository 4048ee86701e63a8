//! State containers shared by all physics modules.
//!
//! A [`StateVector`] is a complex coefficient vector over a named basis and a
//! [`DensityOperator`] is a Hermitian, unit-trace matrix over a named basis.
//! The basis id is a plain string tag (`"morse:s=54.54:..."`, `"dicke:j=25"`,
//! ...) used to catch cross-basis mistakes at run time.

use ndarray::prelude::*;
use ndarray_linalg::Eigh;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Complex coefficient vector over a named basis, normalized to 1.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub basis_id: String,
    pub coeffs: Array1<C64>,
}

impl StateVector {
    /// Wrap a coefficient vector, renormalizing it.
    pub fn new(basis_id: impl Into<String>, mut coeffs: Array1<C64>) -> Result<Self> {
        let norm = vec_norm(&coeffs);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cannot normalize state with norm {norm}"
            )));
        }
        coeffs.mapv_inplace(|c| c / norm);
        Ok(Self { basis_id: basis_id.into(), coeffs })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn norm(&self) -> f64 {
        vec_norm(&self.coeffs)
    }

    /// Overlap ⟨self|other⟩.
    pub fn overlap(&self, other: &StateVector) -> Result<C64> {
        self.check_basis(&other.basis_id)?;
        Ok(self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn check_basis(&self, expected: &str) -> Result<()> {
        if self.basis_id == expected {
            Ok(())
        } else {
            Err(Error::BasisMismatch { expected: expected.to_string(), got: self.basis_id.clone() })
        }
    }

    /// Rank-1 projector |ψ⟩⟨ψ| as a density operator.
    pub fn projector(&self) -> DensityOperator {
        let n = self.dim();
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                m[[i, j]] = self.coeffs[i] * self.coeffs[j].conj();
            }
        }
        DensityOperator { basis_id: self.basis_id.clone(), matrix: m }
    }
}

pub fn vec_norm(v: &Array1<C64>) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian, unit-trace complex matrix over a named basis.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    pub basis_id: String,
    pub matrix: Array2<C64>,
}

/// Validation tolerances for density operators along trajectories.
#[derive(Debug, Clone, Copy)]
pub struct RhoTolerances {
    pub hermiticity: f64,
    pub trace: f64,
    /// Most negative eigenvalue tolerated.
    pub eigenvalue_floor: f64,
}

impl Default for RhoTolerances {
    fn default() -> Self {
        Self { hermiticity: 1e-8, trace: 1e-8, eigenvalue_floor: -1e-7 }
    }
}

impl DensityOperator {
    pub fn new(basis_id: impl Into<String>, matrix: Array2<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "density matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let rho = Self { basis_id: basis_id.into(), matrix };
        rho.validate(0.0, RhoTolerances { hermiticity: 1e-10, trace: 1e-10, eigenvalue_floor: -1e-9 })?;
        Ok(rho)
    }

    /// Equal-weight mixture of projectors onto the given states.
    pub fn mixture(states: &[&StateVector], weights: &[f64]) -> Result<Self> {
        if states.is_empty() || states.len() != weights.len() {
            return Err(Error::InvalidArgument("mixture needs matching states/weights".into()));
        }
        let id = states[0].basis_id.clone();
        let n = states[0].dim();
        let mut m: Array2<C64> = Array2::zeros((n, n));
        for (s, &w) in states.iter().zip(weights) {
            s.check_basis(&id)?;
            m.zip_mut_with(&s.projector().matrix, |acc, &p| *acc += w * p);
        }
        Self::new(id, m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diag().iter().sum()
    }

    /// Tr ρ², real part (ρ Hermitian).
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Deviation from Hermiticity, max |ρ - ρ†|.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = (self.matrix[[i, j]] - self.matrix[[j, i]].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Array1<f64>> {
        let (vals, _) = self.matrix.eigh(ndarray_linalg::UPLO::Lower)?;
        Ok(vals)
    }

    /// Check Hermiticity, trace and positivity within the given tolerances.
    /// `t` only labels the error message.
    pub fn validate(&self, t: f64, tol: RhoTolerances) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > tol.hermiticity {
            return Err(Error::ValidationFailure { t, what: "hermiticity defect".into(), magnitude: herm });
        }
        let tr = (self.trace() - C64::new(1.0, 0.0)).norm();
        if tr > tol.trace {
            return Err(Error::ValidationFailure { t, what: "trace deviation".into(), magnitude: tr });
        }
        let min_eig = self.eigenvalues()?[0];
        if min_eig < tol.eigenvalue_floor {
            return Err(Error::ValidationFailure { t, what: "negative eigenvalue".into(), magnitude: min_eig });
        }
        Ok(())
    }

    pub fn check_basis(&self, expected: &str) -> Result<()> {
        if self.basis_id == expected {
            Ok(())
        } else {
            Err(Error::BasisMismatch { expected: expected.to_string(), got: self.basis_id.clone() })
        }
    }

    /// Expectation value Tr(ρ A) for Hermitian A (real result).
    pub fn expectation(&self, a: &Array2<C64>) -> f64 {
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[[i, j]] * a[[j, i]];
            }
        }
        acc.re
    }

    /// Expectation of a diagonal operator given by its diagonal entries.
    pub fn expectation_diag(&self, diag: &Array1<f64>) -> f64 {
        self.matrix
            .diag()
            .iter()
            .zip(diag.iter())
            .map(|(r, &d)| r.re * d)
            .sum()
    }
}

/// Tr[(ρ − σ)²] for Hermitian ρ, σ. Nonnegative, zero iff equal.
pub fn hs_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    sigma.check_basis(&rho.basis_id)?;
    if rho.dim() != sigma.dim() {
        return Err(Error::ShapeMismatch(format!("{} vs {}", rho.dim(), sigma.dim())));
    }
    Ok(rho
        .matrix
        .iter()
        .zip(sigma.matrix.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum())
}
