use super::{DomainKind, DomainSpec, Mesh};
use crate::error::{Error, Result};

/// Boundary geometry at every boundary node, in loop order.
///
/// `g = 2 dn/ds` is the field for which `curl y = y·g` on the boundary of
/// tangent fields with vanishing tangential stress.
#[derive(Debug, Clone)]
pub struct BoundaryFrame {
    pub nodes: Vec<usize>,
    pub n: Vec<[f64; 2]>,
    pub tau: Vec<[f64; 2]>,
    pub g: Vec<[f64; 2]>,
    position: Vec<Option<usize>>,
}

impl BoundaryFrame {
    /// Position of mesh node `node` in the boundary loop.
    pub fn position(&self, node: usize) -> Option<usize> {
        self.position.get(node).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn from_normals(mesh: &Mesh, nodes: Vec<usize>, n: Vec<[f64; 2]>, g: Vec<[f64; 2]>) -> Self {
        let tau = n.iter().map(|v| [-v[1], v[0]]).collect();
        let mut position = vec![None; mesh.node_count()];
        for (k, &i) in nodes.iter().enumerate() {
            position[i] = Some(k);
        }
        BoundaryFrame {
            nodes,
            n,
            tau,
            g,
            position,
        }
    }
}

/// Analytic normal, unit tangent and `g` of the ellipse at point `p`.
pub fn ellipse_frame_at(a: f64, b: f64, p: [f64; 2]) -> ([f64; 2], [f64; 2], [f64; 2]) {
    let t = (p[1] / b).atan2(p[0] / a);
    let (s, c) = t.sin_cos();
    let speed = (a * a * s * s + b * b * c * c).sqrt();
    let n = [b * c / speed, a * s / speed];
    let tau = [-n[1], n[0]];
    let curvature = a * b / speed.powi(3);
    (n, tau, [2.0 * curvature * tau[0], 2.0 * curvature * tau[1]])
}

pub fn boundary_frame(mesh: &Mesh, spec: &DomainSpec) -> Result<BoundaryFrame> {
    let nodes = mesh.boundary_nodes();
    if nodes.len() < 4 {
        return Err(Error::Geometry(format!(
            "boundary loop has {} nodes, need at least 4",
            nodes.len()
        )));
    }
    match spec.kind {
        DomainKind::Ellipse => {
            let (n, g) = nodes
                .iter()
                .map(|&i| {
                    let (n, _, g) = ellipse_frame_at(spec.a, spec.b, mesh.nodes[i]);
                    (n, g)
                })
                .unzip();
            Ok(BoundaryFrame::from_normals(mesh, nodes, n, g))
        }
        DomainKind::ExternalMesh => {
            let pts: Vec<[f64; 2]> = nodes.iter().map(|&i| mesh.nodes[i]).collect();
            let (n, g) = polyline_frame(&pts);
            Ok(BoundaryFrame::from_normals(mesh, nodes, n, g))
        }
    }
}

/// Normals from centred chords and `g = 2 dn/ds` by centred differences on
/// a closed counterclockwise polyline.
pub fn polyline_frame(pts: &[[f64; 2]]) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let len = pts.len();
    let prev = |i: usize| (i + len - 1) % len;
    let next = |i: usize| (i + 1) % len;
    let dist = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
    let n: Vec<[f64; 2]> = (0..len)
        .map(|i| {
            let d = [
                pts[next(i)][0] - pts[prev(i)][0],
                pts[next(i)][1] - pts[prev(i)][1],
            ];
            let l = (d[0] * d[0] + d[1] * d[1]).sqrt();
            [d[1] / l, -d[0] / l]
        })
        .collect();
    let g = (0..len)
        .map(|i| {
            let ds = dist(pts[prev(i)], pts[i]) + dist(pts[i], pts[next(i)]);
            [
                2.0 * (n[next(i)][0] - n[prev(i)][0]) / ds,
                2.0 * (n[next(i)][1] - n[prev(i)][1]) / ds,
            ]
        })
        .collect();
    (n, g)
}
