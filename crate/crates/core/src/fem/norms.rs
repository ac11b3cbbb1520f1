use super::{Discretization, Field, FieldKind};
use crate::error::Result;
use crate::quadrature::gauss_legendre_unit;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldNorms {
    pub l2: f64,
    pub h1: f64,
    /// `‖Dv‖₂` for velocities, `‖∇v‖₂` for scalar fields.
    pub d_semi: f64,
    pub l4: f64,
    pub boundary_l2: f64,
}

pub fn norms(disc: &Discretization, field: &Field) -> Result<FieldNorms> {
    field.check(&disc.space)?;
    let mesh = disc.mesh();
    let q = disc.quad8();
    let v = &field.values;
    let (mut l2sq, mut gradsq, mut l4) = (0.0, 0.0, 0.0);
    let dsq;
    match field.kind {
        FieldKind::Velocity => {
            l2sq = disc.ops.m.bilinear(v, v);
            gradsq = disc.ops.a.bilinear(v, v);
            dsq = 0.5 * disc.ops.k.bilinear(v, v);
            for k in 0..q.len() {
                let (val, _) = q.velocity(mesh, v, k);
                l4 += q.wdet[k] * (val[0] * val[0] + val[1] * val[1]).powi(2);
            }
        }
        FieldKind::Scalar | FieldKind::Pressure => {
            for k in 0..q.len() {
                let (val, g) = if field.kind == FieldKind::Scalar {
                    q.scalar(mesh, v, k)
                } else {
                    q.pressure(mesh, v, k)
                };
                l2sq += q.wdet[k] * val * val;
                gradsq += q.wdet[k] * (g[0] * g[0] + g[1] * g[1]);
                l4 += q.wdet[k] * val.powi(4);
            }
            dsq = gradsq;
        }
    }
    let mut bsq = 0.0;
    for e in &mesh.boundary_edges {
        let x = [mesh.nodes[e[0]], mesh.nodes[e[1]], mesh.nodes[e[2]]];
        for (t, w) in gauss_legendre_unit(4) {
            let phi = [(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)];
            let dphi = [4.0 * t - 3.0, 4.0 * t - 1.0, 4.0 - 8.0 * t];
            let dx: [f64; 2] = std::array::from_fn(|c| (0..3).map(|k| dphi[k] * x[k][c]).sum());
            let ds = (dx[0] * dx[0] + dx[1] * dx[1]).sqrt();
            let sq = match field.kind {
                FieldKind::Velocity => (0..2)
                    .map(|c| (0..3).map(|k| phi[k] * v[2 * e[k] + c]).sum::<f64>().powi(2))
                    .sum::<f64>(),
                FieldKind::Scalar => (0..3).map(|k| phi[k] * v[e[k]]).sum::<f64>().powi(2),
                FieldKind::Pressure => ((1.0 - t) * v[e[0]] + t * v[e[1]]).powi(2),
            };
            bsq += w * ds * sq;
        }
    }
    Ok(FieldNorms {
        l2: l2sq.max(0.0).sqrt(),
        h1: (l2sq + gradsq).max(0.0).sqrt(),
        d_semi: dsq.max(0.0).sqrt(),
        l4: l4.max(0.0).powf(0.25),
        boundary_l2: bsq.sqrt(),
    })
}
