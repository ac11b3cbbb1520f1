//! Modal reduction of the nonlinear pairing and norms.

use crate::eigen::ModalBasis;
use crate::fem::{Discretization, QuadCache};
use crate::mesh::Mesh;
use crate::sparse::dot;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Finite algebra of the Galerkin system in the eigenbasis.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub m: usize,
    pub lambda: Vec<f64>,
    /// `C_ijk = ∫ curl e_i (e_j^⊥·e_k)`, `v^⊥ = (−v₂, v₁)`, stored at
    /// `(i·m + j)·m + k`.
    pub c: Vec<f64>,
    /// `(curl e_i, curl e_j)`.
    pub gcurl: DMatrix<f64>,
    /// `(∇e_i, ∇e_j)`.
    pub ggrad: DMatrix<f64>,
    pub quadrature_degree: usize,
}

/// Per-point modal values: `vals[q][i] = e_i(x_q)`, `curls[q][i] = curl e_i(x_q)`.
pub(crate) struct ModalSamples {
    pub vals: Vec<Vec<[f64; 2]>>,
    pub grads: Vec<Vec<[[f64; 2]; 2]>>,
}

impl ModalSamples {
    pub fn new(mesh: &Mesh, cache: &QuadCache, fields: &[Vec<f64>]) -> Self {
        let (vals, grads) = (0..cache.len())
            .into_par_iter()
            .map(|q| {
                fields
                    .iter()
                    .map(|f| cache.velocity(mesh, f, q))
                    .unzip::<_, _, Vec<_>, Vec<_>>()
            })
            .unzip();
        ModalSamples { vals, grads }
    }

    pub fn curl(&self, q: usize, i: usize) -> f64 {
        let g = self.grads[q][i];
        g[1][0] - g[0][1]
    }
}

/// `(j, k)` pairs with `j < k`.
fn upper_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .flat_map(|j| (j + 1..m).map(move |k| (j, k)))
        .collect()
}

pub fn assemble_cross_tensor(disc: &Discretization, basis: &ModalBasis) -> ReducedSystem {
    let m = basis.m();
    let cache = disc.quad6();
    let samples = ModalSamples::new(disc.mesh(), cache, &basis.e);
    let pairs = upper_pairs(m);
    let nq = cache.len();
    let block = 2048;
    let mut upper = DMatrix::<f64>::zeros(m, pairs.len());
    for start in (0..nq).step_by(block) {
        let end = (start + block).min(nq);
        let weighted_curl =
            DMatrix::from_fn(m, end - start, |i, r| cache.wdet[start + r] * samples.curl(start + r, i));
        let cross = DMatrix::from_fn(end - start, pairs.len(), |r, p| {
            let (j, k) = pairs[p];
            let (ej, ek) = (samples.vals[start + r][j], samples.vals[start + r][k]);
            ej[0] * ek[1] - ej[1] * ek[0]
        });
        upper += weighted_curl * cross;
    }
    let mut c = vec![0.0; m * m * m];
    for i in 0..m {
        for (p, &(j, k)) in pairs.iter().enumerate() {
            let v = upper[(i, p)];
            c[(i * m + j) * m + k] = v;
            c[(i * m + k) * m + j] = -v;
        }
    }
    let mut gcurl = DMatrix::zeros(m, m);
    for q in 0..nq {
        let w = cache.wdet[q];
        for i in 0..m {
            let ci = samples.curl(q, i);
            for j in i..m {
                gcurl[(i, j)] += w * ci * samples.curl(q, j);
            }
        }
    }
    let ae: Vec<Vec<f64>> = basis.e.iter().map(|v| disc.ops.a.mul_vec(v)).collect();
    let mut ggrad = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            ggrad[(i, j)] = dot(&basis.e[i], &ae[j]);
        }
    }
    for i in 0..m {
        for j in 0..i {
            gcurl[(i, j)] = gcurl[(j, i)];
            ggrad[(i, j)] = ggrad[(j, i)];
        }
    }
    ReducedSystem {
        m,
        lambda: basis.lambda.clone(),
        c,
        gcurl,
        ggrad,
        quadrature_degree: cache.degree,
    }
}

impl ReducedSystem {
    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.m + j) * self.m + k]
    }

    /// `w_i(α) = 1 + αλ_i`.
    pub fn weights(&self, alpha: f64) -> Vec<f64> {
        self.lambda.iter().map(|l| 1.0 + alpha * l).collect()
    }

    /// Leading `m` modes of the system.
    pub fn truncated(&self, m: usize) -> ReducedSystem {
        let mut c = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    c[(i * m + j) * m + k] = self.at(i, j, k);
                }
            }
        }
        ReducedSystem {
            m,
            lambda: self.lambda[..m].to_vec(),
            c,
            gcurl: self.gcurl.view((0, 0), (m, m)).into_owned(),
            ggrad: self.ggrad.view((0, 0), (m, m)).into_owned(),
            quadrature_degree: self.quadrature_degree,
        }
    }

    /// `Σ_ijk w_i ζ_i η_j φ_k C_ijk`, the modal value of `(curl σ(z)×y, φ)`.
    pub fn cross_pairing(&self, alpha: f64, zeta: &[f64], eta: &[f64], phi: &[f64]) -> f64 {
        let w = self.weights(alpha);
        let mut total = 0.0;
        for i in 0..self.m {
            let zi = w[i] * zeta[i];
            if zi == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for j in 0..self.m {
                let row = &self.c[(i * self.m + j) * self.m..(i * self.m + j + 1) * self.m];
                inner += eta[j] * dot(row, phi);
            }
            total += zi * inner;
        }
        total
    }

    /// `N_k(ζ, η) = Σ_ij w_i ζ_i η_j C_ijk`.
    pub fn cross_vector(&self, alpha: f64, zeta: &[f64], eta: &[f64]) -> Vec<f64> {
        let m = self.m;
        let w = self.weights(alpha);
        let mut out = vec![0.0; m];
        for i in 0..m {
            let zi = w[i] * zeta[i];
            if zi == 0.0 {
                continue;
            }
            for j in 0..m {
                let s = zi * eta[j];
                if s == 0.0 {
                    continue;
                }
                let row = &self.c[(i * m + j) * m..(i * m + j + 1) * m];
                out.iter_mut().zip(row).for_each(|(o, c)| *o += s * c);
            }
        }
        out
    }

    /// `‖y‖₂² = Σ η²` (orthonormal basis).
    pub fn l2_norm(&self, eta: &[f64]) -> f64 {
        dot(eta, eta).sqrt()
    }

    /// `‖Dy‖₂ = (Σ λ_k η_k² / 2)^{1/2}`.
    pub fn d_norm(&self, eta: &[f64]) -> f64 {
        (0.5 * eta.iter().zip(&self.lambda).map(|(e, l)| l * e * e).sum::<f64>()).sqrt()
    }

    pub fn grad_norm(&self, eta: &[f64]) -> f64 {
        quad_form(&self.ggrad, eta).max(0.0).sqrt()
    }

    pub fn h1_norm(&self, eta: &[f64]) -> f64 {
        (dot(eta, eta) + quad_form(&self.ggrad, eta)).max(0.0).sqrt()
    }

    /// `‖curl v‖₂` for `v = Σ c_i e_i` (leading coefficients only).
    pub fn curl_norm(&self, coeffs: &[f64]) -> f64 {
        quad_form(&self.gcurl, coeffs).max(0.0).sqrt()
    }

    /// `‖curl σ(y)‖₂ = ‖Σ w_i η_i curl e_i‖₂`.
    pub fn curl_sigma_norm(&self, alpha: f64, eta: &[f64]) -> f64 {
        let wz: Vec<f64> = self.weights(alpha).iter().zip(eta).map(|(w, e)| w * e).collect();
        self.curl_norm(&wz)
    }

    /// Proxy for the `H³` norm, `(‖y‖²_{H¹} + ‖curl σ(y)‖²₂)^{1/2}`.
    pub fn h3_proxy(&self, alpha: f64, eta: &[f64]) -> f64 {
        (self.h1_norm(eta).powi(2) + self.curl_sigma_norm(alpha, eta).powi(2)).sqrt()
    }
}

fn quad_form(a: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len().min(a.nrows());
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += x[i] * a[(i, j)] * x[j];
        }
    }
    s
}

/// Control space: the first `m_c` modes.
#[derive(Debug, Clone)]
pub struct ControlMaps {
    pub m_c: usize,
    pub gcurl: DMatrix<f64>,
}

pub fn control_maps(sys: &ReducedSystem, m_c: usize) -> crate::Result<ControlMaps> {
    if m_c == 0 || m_c > sys.m {
        return Err(crate::Error::Validation(format!(
            "control modes m_c = {m_c} must lie in 1..={}",
            sys.m
        )));
    }
    Ok(ControlMaps {
        m_c,
        gcurl: sys.gcurl.view((0, 0), (m_c, m_c)).into_owned(),
    })
}

impl ControlMaps {
    /// Modal coefficients `(u, e_k)` for all `m` modes (zero beyond `m_c`).
    pub fn inject(&self, u: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        out[..self.m_c].copy_from_slice(&u[..self.m_c]);
        out
    }

    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        dot(u, u).sqrt()
    }

    pub fn curl_norm(&self, u: &[f64]) -> f64 {
        quad_form(&self.gcurl, u).max(0.0).sqrt()
    }

    /// `(‖u‖₂² + ‖curl u‖₂²)^{1/2}`.
    pub fn hcurl_norm(&self, u: &[f64]) -> f64 {
        (dot(u, u) + quad_form(&self.gcurl, u)).max(0.0).sqrt()
    }
}

/// `b(φ, z, y) = ∫ (φ·∇z)·y` by degree-6 quadrature.
pub fn trilinear_b(disc: &Discretization, phi: &[f64], z: &[f64], y: &[f64]) -> f64 {
    let mesh = disc.mesh();
    let cache = disc.quad6();
    (0..cache.len())
        .map(|q| {
            let (p, _) = cache.velocity(mesh, phi, q);
            let (_, gz) = cache.velocity(mesh, z, q);
            let (yv, _) = cache.velocity(mesh, y, q);
            let conv = [
                p[0] * gz[0][0] + p[1] * gz[0][1],
                p[0] * gz[1][0] + p[1] * gz[1][1],
            ];
            cache.wdet[q] * (conv[0] * yv[0] + conv[1] * yv[1])
        })
        .sum()
}
