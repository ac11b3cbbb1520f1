//! Triangulated domains with quadratic (6-node) connectivity and exact
//! boundary geometry.

mod delaunay;
mod frame;
mod msh;

pub use frame::{boundary_frame, BoundaryFrame};
pub use msh::{load_msh, parse_msh, write_msh};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Ellipse,
    ExternalMesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// Semi-axis along x₁.
    pub a: f64,
    /// Semi-axis along x₂.
    pub b: f64,
    pub h_target: f64,
}

impl DomainSpec {
    pub fn ellipse(a: f64, b: f64, h_target: f64) -> Self {
        DomainSpec {
            kind: DomainKind::Ellipse,
            a,
            b,
            h_target,
        }
    }

    pub fn external() -> Self {
        DomainSpec {
            kind: DomainKind::ExternalMesh,
            a: 0.0,
            b: 0.0,
            h_target: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == DomainKind::Ellipse {
            for (name, v) in [("a", self.a), ("b", self.b), ("h_target", self.h_target)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Validation(format!(
                        "domain.{name} must be positive, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Disks admit tangential rigid rotations, which breaks Korn's inequality.
    pub fn is_axisymmetric(&self) -> bool {
        self.kind == DomainKind::Ellipse && (self.a - self.b).abs() <= 1e-12 * self.a.max(self.b)
    }
}

/// Quadratic triangle mesh.
///
/// Vertices occupy node indices `0..vertex_count`; edge midpoints follow.
/// Triangles list `[v0, v1, v2, m01, m12, m20]` counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 6]>,
    /// Closed counterclockwise loop of `[start, end, mid]` edges.
    pub boundary_edges: Vec<[usize; 3]>,
    pub boundary_flags: Vec<bool>,
    pub vertex_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshStats {
    pub nodes: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub boundary_edges: usize,
    pub boundary_nodes: usize,
    pub max_edge_length: f64,
    pub min_edge_length: f64,
    pub area: f64,
    pub hash: String,
}

impl Mesh {
    /// Builds a quadratic mesh from CCW linear triangles, inserting edge
    /// midpoints. `boundary_midpoint` may relocate midpoints of boundary
    /// edges (e.g. onto a curved boundary).
    pub(crate) fn from_linear(
        vertices: Vec<[f64; 2]>,
        tris: &[[usize; 3]],
        boundary_midpoint: impl Fn(usize, usize) -> Option<[f64; 2]>,
    ) -> Result<Mesh> {
        let vertex_count = vertices.len();
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in tris {
            for (i, j) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *edge_count.entry((i.min(j), i.max(j))).or_default() += 1;
            }
        }
        let mut nodes = vertices;
        let mut mid_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triangles = Vec::with_capacity(tris.len());
        for t in tris {
            let mut tri = [t[0], t[1], t[2], 0, 0, 0];
            for (slot, (i, j)) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
                .into_iter()
                .enumerate()
            {
                let key = (i.min(j), i.max(j));
                let idx = *mid_index.entry(key).or_insert_with(|| {
                    let on_boundary = edge_count[&key] == 1;
                    let p = on_boundary
                        .then(|| boundary_midpoint(i, j))
                        .flatten()
                        .unwrap_or([
                            0.5 * (nodes[i][0] + nodes[j][0]),
                            0.5 * (nodes[i][1] + nodes[j][1]),
                        ]);
                    nodes.push(p);
                    nodes.len() - 1
                });
                tri[3 + slot] = idx;
            }
            triangles.push(tri);
        }
        Mesh::assemble(nodes, triangles, vertex_count)
    }

    /// Derives the boundary loop and flags, then validates.
    pub(crate) fn assemble(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 6]>,
        vertex_count: usize,
    ) -> Result<Mesh> {
        let boundary_edges = boundary_loop(&triangles)?;
        let mut boundary_flags = vec![false; nodes.len()];
        for e in &boundary_edges {
            for &n in e {
                boundary_flags[n] = true;
            }
        }
        let mesh = Mesh {
            nodes,
            triangles,
            boundary_edges,
            boundary_flags,
            vertex_count,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Boundary nodes in loop order: start vertex, midpoint, next vertex, ...
    pub fn boundary_nodes(&self) -> Vec<usize> {
        self.boundary_edges
            .iter()
            .flat_map(|e| [e[0], e[2]])
            .collect()
    }

    /// Checks numbering, element orientation and the boundary loop.
    pub fn validate(&self) -> Result<()> {
        let nn = self.nodes.len();
        if self.triangles.is_empty() {
            return Err(Error::Validation("mesh has no triangles".into()));
        }
        if self.boundary_flags.len() != nn {
            return Err(Error::Validation("boundary flag count mismatch".into()));
        }
        for (k, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= nn) {
                return Err(Error::Validation(format!("triangle {k} references a missing node")));
            }
            if t[..3].iter().any(|&i| i >= self.vertex_count)
                || t[3..].iter().any(|&i| i < self.vertex_count)
            {
                return Err(Error::Validation(format!(
                    "triangle {k} violates vertex-first node numbering"
                )));
            }
            let min_det = jacobian_samples(self, k)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if !(min_det > 0.0) {
                return Err(Error::Validation(format!(
                    "triangle {k} is inverted or degenerate (min Jacobian {min_det:.3e})"
                )));
            }
        }
        let loop_edges = boundary_loop(&self.triangles)?;
        if loop_edges != self.boundary_edges {
            return Err(Error::Validation("stored boundary loop is inconsistent".into()));
        }
        let poly: Vec<[f64; 2]> = self.boundary_nodes().iter().map(|&i| self.nodes[i]).collect();
        if polygon_area(&poly) <= 0.0 {
            return Err(Error::Validation("boundary loop is not counterclockwise".into()));
        }
        Ok(())
    }

    /// Stable content hash over coordinates and connectivity.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.nodes.len() as u64).to_le_bytes());
        for p in &self.nodes {
            h.update(p[0].to_le_bytes());
            h.update(p[1].to_le_bytes());
        }
        h.update((self.triangles.len() as u64).to_le_bytes());
        for t in &self.triangles {
            for &i in t {
                h.update((i as u64).to_le_bytes());
            }
        }
        h.finalize()
            .iter()
            .take(16)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Lengths of the straight vertex-to-vertex edges.
    pub fn edge_lengths(&self) -> Vec<f64> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for t in &self.triangles {
            for (i, j) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if seen.insert((i.min(j), i.max(j))) {
                    let (p, q) = (self.nodes[i], self.nodes[j]);
                    out.push(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
                }
            }
        }
        out
    }

    pub fn stats(&self) -> MeshStats {
        let lengths = self.edge_lengths();
        let poly: Vec<[f64; 2]> = self.boundary_nodes().iter().map(|&i| self.nodes[i]).collect();
        MeshStats {
            nodes: self.nodes.len(),
            vertices: self.vertex_count,
            triangles: self.triangles.len(),
            boundary_edges: self.boundary_edges.len(),
            boundary_nodes: 2 * self.boundary_edges.len(),
            max_edge_length: lengths.iter().copied().fold(0.0, f64::max),
            min_edge_length: lengths.iter().copied().fold(f64::INFINITY, f64::min),
            area: polygon_area(&poly),
            hash: self.hash(),
        }
    }
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Jacobian determinants of the isoparametric map at vertices, midpoints
/// and centroid.
fn jacobian_samples(mesh: &Mesh, k: usize) -> Vec<f64> {
    let t = &mesh.triangles[k];
    let x: [[f64; 2]; 6] = std::array::from_fn(|a| mesh.nodes[t[a]]);
    [
        [0.0, 0.0],
        [1.0, 0.0],
        [0.0, 1.0],
        [0.5, 0.0],
        [0.5, 0.5],
        [0.0, 0.5],
        [1.0 / 3.0, 1.0 / 3.0],
    ]
    .iter()
    .map(|&xi| {
        let d = crate::fem::shape::p2_grad_ref(xi);
        let mut j = [[0.0; 2]; 2];
        for a in 0..6 {
            for r in 0..2 {
                for c in 0..2 {
                    j[r][c] += x[a][r] * d[a][c];
                }
            }
        }
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    })
    .collect()
}

/// Orders the edges used by exactly one triangle into a single closed loop,
/// starting at the smallest boundary vertex.
fn boundary_loop(triangles: &[[usize; 6]]) -> Result<Vec<[usize; 3]>> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for (i, j) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *count.entry((i.min(j), i.max(j))).or_default() += 1;
        }
    }
    let mut next: HashMap<usize, [usize; 3]> = HashMap::new();
    for t in triangles {
        for (i, j, m) in [(t[0], t[1], t[3]), (t[1], t[2], t[4]), (t[2], t[0], t[5])] {
            match count[&(i.min(j), i.max(j))] {
                1 => {
                    if next.insert(i, [i, j, m]).is_some() {
                        return Err(Error::Validation(format!(
                            "boundary vertex {i} starts two boundary edges (non-manifold or multiply connected)"
                        )));
                    }
                }
                2 => {}
                c => {
                    return Err(Error::Validation(format!(
                        "edge ({i}, {j}) shared by {c} triangles"
                    )))
                }
            }
        }
    }
    let total = next.len();
    let start = *next
        .keys()
        .min()
        .ok_or_else(|| Error::Validation("mesh has no boundary".into()))?;
    let mut out = Vec::with_capacity(total);
    let mut cur = start;
    loop {
        let e = *next.get(&cur).ok_or_else(|| {
            Error::Validation(format!("open boundary loop: no edge leaves vertex {cur}"))
        })?;
        out.push(e);
        cur = e[1];
        if cur == start {
            break;
        }
        if out.len() > total {
            return Err(Error::Validation("boundary loop does not close".into()));
        }
    }
    if out.len() != total {
        return Err(Error::Validation(format!(
            "boundary has {} edges but the loop through vertex {start} covers {} (multiple loops)",
            total,
            out.len()
        )));
    }
    Ok(out)
}

/// Arclength parametrisation of the ellipse `(a cos t, b sin t)`.
struct EllipseArc {
    a: f64,
    b: f64,
}

impl EllipseArc {
    fn speed(&self, t: f64) -> f64 {
        (self.a * self.a * t.sin().powi(2) + self.b * self.b * t.cos().powi(2)).sqrt()
    }

    fn length_to(&self, t: f64) -> f64 {
        let panels = 64;
        let rule = crate::quadrature::gauss_legendre_unit(4);
        let dt = t / panels as f64;
        (0..panels)
            .map(|p| {
                rule.iter()
                    .map(|(x, w)| w * self.speed((p as f64 + x) * dt))
                    .sum::<f64>()
                    * dt
            })
            .sum()
    }

    fn param_at(&self, s: f64, guess: f64) -> f64 {
        let mut t = guess;
        for _ in 0..50 {
            let step = (self.length_to(t) - s) / self.speed(t);
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        t
    }

    fn point(&self, t: f64) -> [f64; 2] {
        [self.a * t.cos(), self.b * t.sin()]
    }
}

/// Unstructured quadratic mesh of the ellipse `(x₁/a)² + (x₂/b)² ≤ 1`.
///
/// Boundary nodes (vertices and edge midpoints) are equidistributed in
/// arclength and lie on the exact curve; the interior is a smoothed
/// hexagonal lattice.
pub fn generate_ellipse_mesh(spec: &DomainSpec) -> Result<Mesh> {
    if spec.kind != DomainKind::Ellipse {
        return Err(Error::Validation("generate_ellipse_mesh needs an ellipse spec".into()));
    }
    spec.validate()?;
    let (a, b, h) = (spec.a, spec.b, spec.h_target);
    let arc = EllipseArc { a, b };
    let perimeter = arc.length_to(2.0 * std::f64::consts::PI);
    let nb = ((perimeter / h).ceil() as usize).max(8);
    let ds = perimeter / (2 * nb) as f64;
    let mut curve = Vec::with_capacity(2 * nb);
    let mut t = 0.0;
    for k in 0..2 * nb {
        t = arc.param_at(k as f64 * ds, t);
        curve.push(arc.point(t));
    }
    let boundary: Vec<[f64; 2]> = curve.iter().step_by(2).copied().collect();

    let dy = h * 3f64.sqrt() / 2.0;
    let rows = (b / dy).ceil() as i64 + 1;
    let cols = (a / h).ceil() as i64 + 1;
    let mut interior = Vec::new();
    for j in -rows..=rows {
        let shift = if j.rem_euclid(2) == 1 { 0.5 * h } else { 0.0 };
        for i in -cols..=cols {
            let p = [i as f64 * h + shift, j as f64 * dy];
            if (p[0] / a).powi(2) + (p[1] / b).powi(2) < 1.0
                && distance_to_polyline(&p, &curve) >= 0.55 * h
            {
                interior.push(p);
            }
        }
    }

    let mut points: Vec<[f64; 2]> = boundary.iter().chain(&interior).copied().collect();
    let mut tris = delaunay::triangulate(&points);
    for _ in 0..4 {
        let mut sum = vec![[0.0f64; 2]; points.len()];
        let mut cnt = vec![0usize; points.len()];
        for t in &tris {
            for (i, j) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                for (p, q) in [(i, j), (j, i)] {
                    sum[p][0] += points[q][0];
                    sum[p][1] += points[q][1];
                    cnt[p] += 1;
                }
            }
        }
        for p in nb..points.len() {
            if cnt[p] > 0 {
                points[p] = [sum[p][0] / cnt[p] as f64, sum[p][1] / cnt[p] as f64];
            }
        }
        tris = delaunay::triangulate(&points);
    }

    Mesh::from_linear(points, &tris, |i, j| {
        // Consecutive boundary vertices k, k+1 (mod nb) share curve midpoint 2k+1.
        let (lo, hi) = (i.min(j), i.max(j));
        if hi >= nb {
            return None;
        }
        if hi == lo + 1 {
            Some(curve[2 * lo + 1])
        } else if lo == 0 && hi == nb - 1 {
            Some(curve[2 * hi + 1])
        } else {
            None
        }
    })
}

fn distance_to_polyline(p: &[f64; 2], closed: &[[f64; 2]]) -> f64 {
    let n = closed.len();
    (0..n)
        .map(|i| {
            let (u, v) = (closed[i], closed[(i + 1) % n]);
            let d = [v[0] - u[0], v[1] - u[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let s = (((p[0] - u[0]) * d[0] + (p[1] - u[1]) * d[1]) / len2).clamp(0.0, 1.0);
            ((p[0] - u[0] - s * d[0]).powi(2) + (p[1] - u[1] - s * d[1]).powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}
