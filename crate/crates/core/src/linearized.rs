//! Linearized state operator and its transpose (the discrete adjoint).

use crate::error::{Error, Result};
use crate::reduced::ReducedSystem;
use nalgebra::{DMatrix, DVector, LU};

/// `L(η)_kj = νλ_k δ_kj + Σ_i η_i (w_j C_jik + w_i C_ijk)`, the Jacobian of
/// the modal state residual.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub l: DMatrix<f64>,
    pub eta: Vec<f64>,
    pub nu: f64,
    pub alpha: f64,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_t: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

pub fn linearized_matrix(sys: &ReducedSystem, eta: &[f64], nu: f64, alpha: f64) -> DMatrix<f64> {
    let m = sys.m;
    let w = sys.weights(alpha);
    let mut l = DMatrix::zeros(m, m);
    for k in 0..m {
        l[(k, k)] = nu * sys.lambda[k];
    }
    for i in 0..m {
        if eta[i] == 0.0 {
            continue;
        }
        let wi = w[i] * eta[i];
        for j in 0..m {
            // C_jik: perturbation enters the transported velocity.
            let row_ji = &sys.c[(j * m + i) * m..(j * m + i + 1) * m];
            // C_ijk: perturbation enters curl σ.
            let row_ij = &sys.c[(i * m + j) * m..(i * m + j + 1) * m];
            let a = w[j] * eta[i];
            for k in 0..m {
                l[(k, j)] += a * row_ji[k] + wi * row_ij[k];
            }
        }
    }
    l
}

impl LinearizedOperator {
    pub fn assemble(sys: &ReducedSystem, eta: &[f64], nu: f64, alpha: f64) -> Self {
        let l = linearized_matrix(sys, eta, nu, alpha);
        LinearizedOperator {
            lu: l.clone().lu(),
            lu_t: l.transpose().lu(),
            l,
            eta: eta.to_vec(),
            nu,
            alpha,
        }
    }

    fn singular() -> Error {
        Error::Solver(
            "linearized operator is singular; the state is not isolated (see the uniqueness monitor)"
                .into(),
        )
    }

    /// Solves `L z = w`.
    pub fn solve_linearized(&self, w: &[f64]) -> Result<Vec<f64>> {
        let z = self
            .lu
            .solve(&DVector::from_column_slice(w))
            .ok_or_else(Self::singular)?;
        Ok(z.iter().copied().collect())
    }

    /// Solves `Lᵀ p = f`. The adjoint pairing is the transpose of the
    /// linearized one, so `(f, z) = (w, p)` holds exactly.
    pub fn solve_adjoint(&self, f: &[f64]) -> Result<Vec<f64>> {
        let p = self
            .lu_t
            .solve(&DVector::from_column_slice(f))
            .ok_or_else(Self::singular)?;
        Ok(p.iter().copied().collect())
    }

    pub fn sigma_min(&self) -> f64 {
        self.l
            .clone()
            .singular_values()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `‖Dz‖₂ ν / ‖w‖₂`, the quantity bounded by the linearized `H¹` estimate.
    pub fn h1_ratio(&self, sys: &ReducedSystem, z: &[f64], w: &[f64]) -> f64 {
        let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if wn == 0.0 {
            0.0
        } else {
            sys.d_norm(z) * self.nu / wn
        }
    }
}
