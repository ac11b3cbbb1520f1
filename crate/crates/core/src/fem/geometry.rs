//! Isoparametric element maps and per-quadrature-point caches.

use super::shape::{p1_values, p2_grad_ref, p2_values, P1_GRAD_REF};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::TriangleRule;
use rayon::prelude::*;

/// Geometry and basis data at one reference point of one element.
#[derive(Debug, Clone, Copy)]
pub struct PointGeometry {
    pub x: [f64; 2],
    pub det: f64,
    /// Inverse Jacobian, `jinv[c][r] = ∂ξ_c/∂x_r`.
    pub jinv: [[f64; 2]; 2],
    pub n: [f64; 6],
    pub dn: [[f64; 2]; 6],
    pub l: [f64; 3],
    pub dl: [[f64; 2]; 3],
}

impl PointGeometry {
    pub fn at(nodes: &[[f64; 2]; 6], xi: [f64; 2]) -> PointGeometry {
        let n = p2_values(xi);
        let dref = p2_grad_ref(xi);
        let mut x = [0.0; 2];
        let mut j = [[0.0; 2]; 2];
        for a in 0..6 {
            for r in 0..2 {
                x[r] += nodes[a][r] * n[a];
                for c in 0..2 {
                    j[r][c] += nodes[a][r] * dref[a][c];
                }
            }
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let jinv = [
            [j[1][1] / det, -j[0][1] / det],
            [-j[1][0] / det, j[0][0] / det],
        ];
        let to_phys = |g: [f64; 2]| {
            [
                jinv[0][0] * g[0] + jinv[1][0] * g[1],
                jinv[0][1] * g[0] + jinv[1][1] * g[1],
            ]
        };
        PointGeometry {
            x,
            det,
            jinv,
            n,
            dn: dref.map(to_phys),
            l: p1_values(xi),
            dl: P1_GRAD_REF.map(to_phys),
        }
    }
}

pub fn element_nodes(mesh: &Mesh, e: usize) -> [[f64; 2]; 6] {
    mesh.triangles[e].map(|i| mesh.nodes[i])
}

/// Basis data at every quadrature point of every element, flattened as
/// `element * points_per_element + q`.
#[derive(Debug, Clone)]
pub struct QuadCache {
    pub degree: usize,
    pub per_element: usize,
    pub x: Vec<[f64; 2]>,
    pub wdet: Vec<f64>,
    pub n: Vec<[f64; 6]>,
    pub dn: Vec<[[f64; 2]; 6]>,
    pub l: Vec<[f64; 3]>,
    pub dl: Vec<[[f64; 2]; 3]>,
}

impl QuadCache {
    pub fn build(mesh: &Mesh, degree: usize) -> Result<QuadCache> {
        let rule = TriangleRule::of_degree(degree);
        let per_element = rule.len();
        let points: Vec<Vec<(PointGeometry, f64)>> = (0..mesh.triangles.len())
            .into_par_iter()
            .map(|e| {
                let nodes = element_nodes(mesh, e);
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&xi, &w)| {
                        let p = PointGeometry::at(&nodes, xi);
                        if p.det > 0.0 && p.det.is_finite() {
                            Ok((p, w * p.det))
                        } else {
                            Err(Error::Assembly {
                                element: e,
                                msg: format!("non-positive Jacobian {:.3e}", p.det),
                            })
                        }
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let total = per_element * mesh.triangles.len();
        let mut cache = QuadCache {
            degree,
            per_element,
            x: Vec::with_capacity(total),
            wdet: Vec::with_capacity(total),
            n: Vec::with_capacity(total),
            dn: Vec::with_capacity(total),
            l: Vec::with_capacity(total),
            dl: Vec::with_capacity(total),
        };
        for (p, wd) in points.into_iter().flatten() {
            cache.x.push(p.x);
            cache.wdet.push(wd);
            cache.n.push(p.n);
            cache.dn.push(p.dn);
            cache.l.push(p.l);
            cache.dl.push(p.dl);
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.wdet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wdet.is_empty()
    }

    pub fn element_of(&self, q: usize) -> usize {
        q / self.per_element
    }

    /// Value and gradient (`grad[c][d] = ∂_d v_c`) of a velocity field.
    pub fn velocity(&self, mesh: &Mesh, v: &[f64], q: usize) -> ([f64; 2], [[f64; 2]; 2]) {
        let t = &mesh.triangles[self.element_of(q)];
        let (n, dn) = (&self.n[q], &self.dn[q]);
        let mut val = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for a in 0..6 {
            for c in 0..2 {
                let coef = v[2 * t[a] + c];
                val[c] += coef * n[a];
                grad[c][0] += coef * dn[a][0];
                grad[c][1] += coef * dn[a][1];
            }
        }
        (val, grad)
    }

    /// Value and gradient of a quadratic scalar field.
    pub fn scalar(&self, mesh: &Mesh, s: &[f64], q: usize) -> (f64, [f64; 2]) {
        let t = &mesh.triangles[self.element_of(q)];
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        for a in 0..6 {
            let coef = s[t[a]];
            val += coef * self.n[q][a];
            grad[0] += coef * self.dn[q][a][0];
            grad[1] += coef * self.dn[q][a][1];
        }
        (val, grad)
    }

    /// Value and gradient of a linear (vertex) pressure field.
    pub fn pressure(&self, mesh: &Mesh, p: &[f64], q: usize) -> (f64, [f64; 2]) {
        let t = &mesh.triangles[self.element_of(q)];
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        for a in 0..3 {
            let coef = p[t[a]];
            val += coef * self.l[q][a];
            grad[0] += coef * self.dl[q][a][0];
            grad[1] += coef * self.dl[q][a][1];
        }
        (val, grad)
    }
}
