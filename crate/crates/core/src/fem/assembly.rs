use super::geometry::{element_nodes, PointGeometry};
use super::FeSpace;
use crate::error::{Error, Result};
use crate::quadrature::TriangleRule;
use crate::sparse::CsrMatrix;
use rayon::prelude::*;

/// Full (unconstrained) Taylor–Hood operators.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    /// Velocity mass `(y, φ)`.
    pub m: CsrMatrix,
    /// Symmetric-gradient stiffness `2(Dy, Dφ)`.
    pub k: CsrMatrix,
    /// Full-gradient stiffness `(∇y, ∇φ)`.
    pub a: CsrMatrix,
    /// Divergence coupling, `b[q][j] = −(ψ_q, div φ_j)`; `Bᵀπ` is the weak
    /// gradient of `π`.
    pub b: CsrMatrix,
    /// Strong gradient pairing `(φ_j, ∇ψ_q)`, velocity rows.
    pub g: CsrMatrix,
    pub mp: CsrMatrix,
    /// Mass of the quadratic scalar space.
    pub ms: CsrMatrix,
    /// `(s, curl φ_j)` for quadratic scalar tests `s`.
    pub curl: CsrMatrix,
}

type Trip = Vec<(usize, usize, f64)>;

#[derive(Default)]
struct Local {
    m: Trip,
    k: Trip,
    a: Trip,
    b: Trip,
    g: Trip,
    mp: Trip,
    ms: Trip,
    curl: Trip,
}

/// Element-by-element assembly with a degree-4 rule, exact for products of
/// quadratics on straight elements.
pub fn assemble_operators(space: &FeSpace) -> Result<OperatorSet> {
    let mesh = &space.mesh;
    let rule = TriangleRule::of_degree(4);
    let locals: Vec<Local> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|e| element_matrices(space, &rule, e))
        .collect::<Result<_>>()?;
    let (nv, np, nn) = (space.n_v, space.n_p, space.n_nodes());
    let mut all = Local::default();
    for l in locals {
        all.m.extend(l.m);
        all.k.extend(l.k);
        all.a.extend(l.a);
        all.b.extend(l.b);
        all.g.extend(l.g);
        all.mp.extend(l.mp);
        all.ms.extend(l.ms);
        all.curl.extend(l.curl);
    }
    Ok(OperatorSet {
        m: CsrMatrix::from_triplets(nv, nv, &all.m).symmetrized(),
        k: CsrMatrix::from_triplets(nv, nv, &all.k).symmetrized(),
        a: CsrMatrix::from_triplets(nv, nv, &all.a).symmetrized(),
        b: CsrMatrix::from_triplets(np, nv, &all.b),
        g: CsrMatrix::from_triplets(nv, np, &all.g),
        mp: CsrMatrix::from_triplets(np, np, &all.mp),
        ms: CsrMatrix::from_triplets(nn, nn, &all.ms),
        curl: CsrMatrix::from_triplets(nn, nv, &all.curl),
    })
}

fn element_matrices(space: &FeSpace, rule: &TriangleRule, e: usize) -> Result<Local> {
    let t = space.mesh.triangles[e];
    let nodes = element_nodes(&space.mesh, e);
    let mut m = [[0.0; 6]; 6];
    let mut k = [[0.0; 12]; 12];
    let mut a = [[0.0; 6]; 6];
    let mut b = [[0.0; 12]; 3];
    let mut g = [[0.0; 3]; 12];
    let mut mp = [[0.0; 3]; 3];
    let mut curl = [[0.0; 12]; 6];
    for (&xi, &w) in rule.points.iter().zip(&rule.weights) {
        let p = PointGeometry::at(&nodes, xi);
        if !(p.det > 0.0) {
            return Err(Error::Assembly {
                element: e,
                msg: format!("non-positive Jacobian {:.3e}", p.det),
            });
        }
        let wd = w * p.det;
        for i in 0..6 {
            let di = p.dn[i];
            for j in 0..6 {
                let dj = p.dn[j];
                m[i][j] += wd * p.n[i] * p.n[j];
                let grad = di[0] * dj[0] + di[1] * dj[1];
                a[i][j] += wd * grad;
                for c in 0..2 {
                    for d in 0..2 {
                        let delta = if c == d { grad } else { 0.0 };
                        k[2 * i + c][2 * j + d] += wd * (delta + di[d] * dj[c]);
                    }
                }
            }
            let curl_i = [-di[1], di[0]];
            for s in 0..6 {
                for c in 0..2 {
                    curl[s][2 * i + c] += wd * p.n[s] * curl_i[c];
                }
            }
            for q in 0..3 {
                for c in 0..2 {
                    b[q][2 * i + c] -= wd * p.l[q] * di[c];
                    g[2 * i + c][q] += wd * p.n[i] * p.dl[q][c];
                }
            }
        }
        for q in 0..3 {
            for r in 0..3 {
                mp[q][r] += wd * p.l[q] * p.l[r];
            }
        }
    }
    let dofs = space.velocity_dofs(e);
    let mut out = Local::default();
    for i in 0..6 {
        for j in 0..6 {
            out.ms.push((t[i], t[j], m[i][j]));
            for c in 0..2 {
                out.m.push((2 * t[i] + c, 2 * t[j] + c, m[i][j]));
                out.a.push((2 * t[i] + c, 2 * t[j] + c, a[i][j]));
            }
        }
    }
    for r in 0..12 {
        for c in 0..12 {
            out.k.push((dofs[r], dofs[c], k[r][c]));
        }
        for q in 0..3 {
            out.b.push((t[q], dofs[r], b[q][r]));
            out.g.push((dofs[r], t[q], g[r][q]));
        }
        for s in 0..6 {
            out.curl.push((t[s], dofs[r], curl[s][r]));
        }
    }
    for q in 0..3 {
        for r in 0..3 {
            out.mp.push((t[q], t[r], mp[q][r]));
        }
    }
    Ok(out)
}

/// Operators restricted to tangential boundary velocities, `QᵀXQ` with `Q`
/// the constraint map of the space.
#[derive(Debug, Clone)]
pub struct ConstrainedOperators {
    pub m: CsrMatrix,
    pub k: CsrMatrix,
    pub a: CsrMatrix,
    /// `B Q`, pressure rows.
    pub b: CsrMatrix,
    /// Pressure mass applied to the constant, fixes the pressure mean.
    pub mean: Vec<f64>,
}

/// Rotates boundary velocity unknowns to `(n, τ)` and drops the normal
/// component. The tangential stress condition is natural for `2(Dy, Dφ)`
/// and needs no boundary term.
pub fn apply_slip_constraints(ops: &OperatorSet, space: &FeSpace) -> ConstrainedOperators {
    let map = space.constraint_map();
    let nc = space.n_constrained();
    let both = |x: &CsrMatrix| {
        let t: Trip = x
            .triplets()
            .filter_map(|(r, c, v)| {
                let ((cr, wr), (cc, wc)) = (map[r], map[c]);
                (wr != 0.0 && wc != 0.0).then_some((cr, cc, wr * wc * v))
            })
            .collect();
        // Boundary rows gather two Cartesian entries each, in an order that
        // differs between mirrored positions; average to restore bitwise symmetry.
        CsrMatrix::from_triplets(nc, nc, &t).symmetrized()
    };
    let cols: Trip = ops
        .b
        .triplets()
        .filter_map(|(r, c, v)| {
            let (cc, wc) = map[c];
            (wc != 0.0).then_some((r, cc, wc * v))
        })
        .collect();
    ConstrainedOperators {
        m: both(&ops.m),
        k: both(&ops.k),
        a: both(&ops.a),
        b: CsrMatrix::from_triplets(space.n_p, nc, &cols),
        mean: ops.mp.mul_vec(&vec![1.0; space.n_p]),
    }
}
