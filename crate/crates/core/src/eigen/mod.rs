//! Slip-Stokes eigenpairs: `−Δe + ∇π = λe`, `div e = 0`, `e·n = 0`,
//! `(n·De)·τ = 0`, in weak form `2(De, Dφ) − (π, div φ) = λ(e, φ)`.

pub mod lanczos;

pub use lanczos::{fix_sign, smallest_pairs, Pencil, PencilPairs};

use crate::binio;
use crate::error::{Error, Result};
use crate::fem::{saddle_project_load, Discretization};
use crate::sparse::{norm2, SparseLu};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Eigen-residual tolerance, `‖Ke − λMe + Bᵀπ‖ ≤ tol·λ‖Me‖`.
pub const EIGEN_TOL: f64 = 1e-9;

const LANCZOS_SHIFT: f64 = -1.0;
const LANCZOS_SEED: u64 = 0x5eed_e19e;

/// The first `m` eigenpairs, `L²`-orthonormal, sorted by eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalBasis {
    pub lambda: Vec<f64>,
    /// Velocity coefficients (full Cartesian layout), one vector per mode.
    pub e: Vec<Vec<f64>>,
    /// Mean-free pressure coefficients.
    pub pi: Vec<Vec<f64>>,
    /// `L²` projection of `curl e_j` onto the quadratic scalar space.
    pub curl_e: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub mesh_hash: String,
}

impl ModalBasis {
    pub fn m(&self) -> usize {
        self.lambda.len()
    }

    /// Field `Σ c_j e_j`.
    pub fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        combine(&self.e, coeffs)
    }

    pub fn combine_pressure(&self, coeffs: &[f64]) -> Vec<f64> {
        combine(&self.pi, coeffs)
    }

    pub fn combine_curl(&self, coeffs: &[f64]) -> Vec<f64> {
        combine(&self.curl_e, coeffs)
    }

    /// The leading `m` modes.
    pub fn truncated(&self, m: usize) -> ModalBasis {
        ModalBasis {
            lambda: self.lambda[..m].to_vec(),
            e: self.e[..m].to_vec(),
            pi: self.pi[..m].to_vec(),
            curl_e: self.curl_e[..m].to_vec(),
            residuals: self.residuals[..m].to_vec(),
            mesh_hash: self.mesh_hash.clone(),
        }
    }
}

fn combine(vs: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; vs.first().map_or(0, Vec::len)];
    for (v, &c) in vs.iter().zip(coeffs) {
        if c != 0.0 {
            out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
        }
    }
    out
}

pub fn compute_eigenbasis(disc: &Discretization, m: usize) -> Result<ModalBasis> {
    let c = &disc.cops;
    let pencil = Pencil {
        s: &c.k,
        t: &c.m,
        b: &c.b,
        mean: &c.mean,
        shift: LANCZOS_SHIFT,
    };
    let pairs = smallest_pairs(&pencil, m, EIGEN_TOL, LANCZOS_SEED)?;
    if let Some(bad) = pairs.values.iter().position(|&l| !(l > 0.0)) {
        return Err(Error::Eigen {
            requested: m,
            achieved: bad,
            msg: format!(
                "nonpositive eigenvalue {:.3e}; a rigid rotation is admissible when the domain is axisymmetric",
                pairs.values[bad]
            ),
        });
    }
    let ms = SparseLu::factor(disc.ops.ms.clone())?;
    let e: Vec<Vec<f64>> = pairs.vectors.iter().map(|v| disc.space.expand(v)).collect();
    let curl_e = e.iter().map(|v| ms.solve(&disc.ops.curl.mul_vec(v))).collect();
    Ok(ModalBasis {
        lambda: pairs.values,
        e,
        pi: pairs.pressures,
        curl_e,
        residuals: pairs.residuals,
        mesh_hash: disc.mesh().hash(),
    })
}

/// `‖Pσ(e_j) − (1 + αλ_j)e_j‖ / (1 + αλ_j)` for every mode, with
/// `σ(e_j) = (1 + αλ_j)e_j − α∇π_j`.
pub fn verify_psigma_identity(disc: &Discretization, basis: &ModalBasis, alpha: f64) -> Vec<f64> {
    (0..basis.m())
        .map(|j| {
            let w = 1.0 + alpha * basis.lambda[j];
            let me = disc.ops.m.mul_vec(&basis.e[j]);
            let gp = disc.ops.g.mul_vec(&basis.pi[j]);
            let load: Vec<f64> = me.iter().zip(&gp).map(|(a, b)| w * a - alpha * b).collect();
            let proj = saddle_project_load(disc, &load);
            let diff: Vec<f64> = proj
                .values
                .iter()
                .zip(&basis.e[j])
                .map(|(p, e)| p - w * e)
                .collect();
            disc.ops.m.bilinear(&diff, &diff).max(0.0).sqrt() / w
        })
        .collect()
}

/// `max_ij |(EᵀME − I)_ij|` and `max_ij |(EᵀKE − Λ)_ij| / λ_max`.
pub fn basis_identity_errors(disc: &Discretization, basis: &ModalBasis) -> (f64, f64) {
    let m = basis.m();
    let me: Vec<Vec<f64>> = basis.e.iter().map(|v| disc.ops.m.mul_vec(v)).collect();
    let ke: Vec<Vec<f64>> = basis.e.iter().map(|v| disc.ops.k.mul_vec(v)).collect();
    let lmax = basis.lambda.iter().copied().fold(0.0, f64::max);
    let (mut gram, mut stiff) = (0.0f64, 0.0f64);
    for i in 0..m {
        for j in 0..m {
            let g = crate::sparse::dot(&basis.e[i], &me[j]) - if i == j { 1.0 } else { 0.0 };
            let k = crate::sparse::dot(&basis.e[i], &ke[j]) - if i == j { basis.lambda[i] } else { 0.0 };
            gram = gram.max(g.abs());
            stiff = stiff.max(k.abs() / lmax);
        }
    }
    (gram, stiff)
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheHeader {
    format: String,
    mesh_hash: String,
    m: usize,
    lambda: Vec<f64>,
    residuals: Vec<f64>,
    tolerance: f64,
    n_velocity: usize,
    n_pressure: usize,
    n_scalar: usize,
}

const CACHE_FORMAT: &str = "slipctl-eigenbasis-1";

pub fn save_basis(path: &Path, basis: &ModalBasis) -> Result<()> {
    let header = CacheHeader {
        format: CACHE_FORMAT.into(),
        mesh_hash: basis.mesh_hash.clone(),
        m: basis.m(),
        lambda: basis.lambda.clone(),
        residuals: basis.residuals.clone(),
        tolerance: EIGEN_TOL,
        n_velocity: basis.e.first().map_or(0, Vec::len),
        n_pressure: basis.pi.first().map_or(0, Vec::len),
        n_scalar: basis.curl_e.first().map_or(0, Vec::len),
    };
    let payload: Vec<f64> = basis
        .e
        .iter()
        .chain(&basis.pi)
        .chain(&basis.curl_e)
        .flatten()
        .copied()
        .collect();
    binio::write(path, &header, &payload)
}

/// Loads a cached basis; a different mesh hash is a cache miss (error).
pub fn load_basis(path: &Path, mesh_hash: &str) -> Result<ModalBasis> {
    let (h, payload): (CacheHeader, Vec<f64>) = binio::read(path)?;
    if h.format != CACHE_FORMAT {
        return Err(Error::Cache(format!("{}: unknown format {}", path.display(), h.format)));
    }
    if h.mesh_hash != mesh_hash {
        return Err(Error::Cache(format!(
            "eigenbasis cache built for mesh {}, current mesh is {mesh_hash}",
            h.mesh_hash
        )));
    }
    let sizes = [h.n_velocity, h.n_pressure, h.n_scalar];
    if payload.len() != h.m * sizes.iter().sum::<usize>() || h.lambda.len() != h.m {
        return Err(Error::Cache(format!("{}: inconsistent payload", path.display())));
    }
    let mut chunks = Vec::new();
    let mut offset = 0;
    for size in sizes {
        let block: Vec<Vec<f64>> = (0..h.m)
            .map(|j| payload[offset + j * size..offset + (j + 1) * size].to_vec())
            .collect();
        offset += h.m * size;
        chunks.push(block);
    }
    let curl_e = chunks.pop().expect("three blocks");
    let pi = chunks.pop().expect("three blocks");
    let e = chunks.pop().expect("three blocks");
    Ok(ModalBasis {
        lambda: h.lambda,
        e,
        pi,
        curl_e,
        residuals: h.residuals,
        mesh_hash: h.mesh_hash,
    })
}

/// Largest normal component `|e_j·n|` over boundary nodes and modes.
pub fn max_normal_trace(disc: &Discretization, basis: &ModalBasis) -> f64 {
    let mut worst = 0.0f64;
    for v in &basis.e {
        for r in &disc.space.rotations {
            let n = r.to_frame([v[2 * r.node], v[2 * r.node + 1]])[0];
            worst = worst.max(n.abs());
        }
    }
    worst / basis.e.iter().map(|v| norm2(v)).fold(1.0, f64::max)
}
