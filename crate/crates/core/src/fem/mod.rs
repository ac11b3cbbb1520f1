//! Taylor–Hood (P2 velocity / P1 pressure) discretization with Navier-slip
//! constraints imposed by rotating boundary velocity unknowns.

mod assembly;
pub mod geometry;
mod norms;
mod saddle;
pub mod shape;

pub use assembly::{apply_slip_constraints, assemble_operators, ConstrainedOperators, OperatorSet};
pub use geometry::{element_nodes, PointGeometry, QuadCache};
pub use norms::{norms, FieldNorms};
pub use saddle::{helmholtz_project, saddle_project_load, stokes_solve, SaddleSolver};

use crate::binio;
use crate::error::{Error, Result};
use crate::mesh::{boundary_frame, BoundaryFrame, DomainSpec, Mesh};
use crate::quadrature::gauss_legendre_unit;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::OnceLock;

/// Orthonormal boundary frame `(n, τ)` used to rotate one velocity node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRotation {
    pub node: usize,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
}

impl BoundaryRotation {
    /// Cartesian components to `(normal, tangential)` components.
    pub fn to_frame(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.normal[0] * v[0] + self.normal[1] * v[1],
            self.tangent[0] * v[0] + self.tangent[1] * v[1],
        ]
    }

    pub fn from_frame(&self, f: [f64; 2]) -> [f64; 2] {
        [
            f[0] * self.normal[0] + f[1] * self.tangent[0],
            f[0] * self.normal[1] + f[1] * self.tangent[1],
        ]
    }
}

/// Degree-of-freedom layout. Velocity unknown `2·node + component`;
/// pressure unknown = vertex index.
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: Mesh,
    pub n_v: usize,
    pub n_p: usize,
    pub rotations: Vec<BoundaryRotation>,
    rotation_of: Vec<Option<usize>>,
    /// Full velocity unknown → (constrained unknown, coefficient).
    cmap: Vec<(usize, f64)>,
    n_c: usize,
}

impl FeSpace {
    pub fn n_nodes(&self) -> usize {
        self.mesh.node_count()
    }

    /// Number of unknowns after eliminating normal boundary components.
    pub fn n_constrained(&self) -> usize {
        self.n_c
    }

    pub fn rotation(&self, node: usize) -> Option<&BoundaryRotation> {
        self.rotation_of[node].map(|k| &self.rotations[k])
    }

    pub fn velocity_dofs(&self, e: usize) -> [usize; 12] {
        let t = &self.mesh.triangles[e];
        std::array::from_fn(|k| 2 * t[k / 2] + k % 2)
    }

    /// Slip-constrained coefficients to full Cartesian coefficients.
    pub fn expand(&self, vc: &[f64]) -> Vec<f64> {
        self.cmap.iter().map(|&(c, w)| w * vc[c]).collect()
    }

    /// Transpose of [`expand`](Self::expand); maps full load vectors to the
    /// constrained space.
    pub fn restrict(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_c];
        for (&(c, w), &v) in self.cmap.iter().zip(r) {
            out[c] += w * v;
        }
        out
    }

    pub(crate) fn constraint_map(&self) -> &[(usize, f64)] {
        &self.cmap
    }
}

/// Builds the velocity/pressure layout and slip rotations.
///
/// Boundary normals are the discretely consistent ones,
/// `n_a ∝ ∫_Γh N_a n_h ds`, so that tangent nodal fields carry no net
/// flux through the discrete boundary; `frame` only fixes orientation.
pub fn build_spaces(mesh: &Mesh, frame: &BoundaryFrame) -> Result<FeSpace> {
    let nn = mesh.node_count();
    let mut weighted = vec![[0.0f64; 2]; nn];
    let gauss = gauss_legendre_unit(3);
    for e in &mesh.boundary_edges {
        let (xs, xe, xm) = (mesh.nodes[e[0]], mesh.nodes[e[1]], mesh.nodes[e[2]]);
        for &(t, w) in &gauss {
            let phi = [(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)];
            let dphi = [4.0 * t - 3.0, 4.0 * t - 1.0, 4.0 - 8.0 * t];
            let dx = [
                dphi[0] * xs[0] + dphi[1] * xe[0] + dphi[2] * xm[0],
                dphi[0] * xs[1] + dphi[1] * xe[1] + dphi[2] * xm[1],
            ];
            for (k, &node) in e.iter().enumerate() {
                weighted[node][0] += w * phi[k] * dx[1];
                weighted[node][1] -= w * phi[k] * dx[0];
            }
        }
    }
    let mut rotations = Vec::new();
    let mut rotation_of = vec![None; nn];
    for (k, &node) in frame.nodes.iter().enumerate() {
        let v = weighted[node];
        let len = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if !(len > 0.0) {
            return Err(Error::Geometry(format!("boundary node {node} has no normal")));
        }
        let normal = [v[0] / len, v[1] / len];
        let fnormal = frame.n[k];
        if normal[0] * fnormal[0] + normal[1] * fnormal[1] <= 0.0 {
            return Err(Error::Geometry(format!(
                "discrete normal at node {node} opposes the boundary frame"
            )));
        }
        rotation_of[node] = Some(rotations.len());
        rotations.push(BoundaryRotation {
            node,
            normal,
            tangent: [-normal[1], normal[0]],
        });
    }
    if rotations.len() != mesh.boundary_flags.iter().filter(|&&b| b).count() {
        return Err(Error::Geometry("boundary frame does not cover the mesh boundary".into()));
    }
    let mut cmap = Vec::with_capacity(2 * nn);
    let mut n_c = 0;
    for node in 0..nn {
        match rotation_of[node] {
            Some(r) => {
                let t = rotations[r].tangent;
                cmap.push((n_c, t[0]));
                cmap.push((n_c, t[1]));
                n_c += 1;
            }
            None => {
                cmap.push((n_c, 1.0));
                cmap.push((n_c + 1, 1.0));
                n_c += 2;
            }
        }
    }
    Ok(FeSpace {
        mesh: mesh.clone(),
        n_v: 2 * nn,
        n_p: mesh.vertex_count,
        rotations,
        rotation_of,
        cmap,
        n_c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Velocity,
    Pressure,
    Scalar,
}

/// Coefficients of a discrete function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub kind: FieldKind,
    pub values: Vec<f64>,
}

impl Field {
    pub fn velocity(values: Vec<f64>) -> Self {
        Field {
            kind: FieldKind::Velocity,
            values,
        }
    }

    pub fn pressure(values: Vec<f64>) -> Self {
        Field {
            kind: FieldKind::Pressure,
            values,
        }
    }

    pub fn scalar(values: Vec<f64>) -> Self {
        Field {
            kind: FieldKind::Scalar,
            values,
        }
    }

    pub fn expected_len(kind: FieldKind, space: &FeSpace) -> usize {
        match kind {
            FieldKind::Velocity => space.n_v,
            FieldKind::Pressure => space.n_p,
            FieldKind::Scalar => space.n_nodes(),
        }
    }

    pub fn check(&self, space: &FeSpace) -> Result<()> {
        let want = Self::expected_len(self.kind, space);
        if self.values.len() != want {
            return Err(Error::Validation(format!(
                "{:?} field has {} coefficients, space expects {want}",
                self.kind,
                self.values.len()
            )));
        }
        Ok(())
    }

    /// Nodal interpolant of a vector function.
    pub fn interpolate_velocity(space: &FeSpace, f: impl Fn([f64; 2]) -> [f64; 2]) -> Field {
        Field::velocity(space.mesh.nodes.iter().flat_map(|&p| f(p)).collect())
    }

    pub fn interpolate_scalar(space: &FeSpace, f: impl Fn([f64; 2]) -> f64) -> Field {
        Field::scalar(space.mesh.nodes.iter().map(|&p| f(p)).collect())
    }

    pub fn interpolate_pressure(space: &FeSpace, f: impl Fn([f64; 2]) -> f64) -> Field {
        Field::pressure(space.mesh.nodes[..space.n_p].iter().map(|&p| f(p)).collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldHeader {
    format: String,
    kind: FieldKind,
    len: usize,
    mesh_hash: String,
}

const FIELD_FORMAT: &str = "slipctl-field-1";

pub fn write_field(path: &Path, field: &Field, mesh_hash: &str) -> Result<()> {
    let header = FieldHeader {
        format: FIELD_FORMAT.into(),
        kind: field.kind,
        len: field.values.len(),
        mesh_hash: mesh_hash.into(),
    };
    binio::write(path, &header, &field.values)
}

pub fn read_field(path: &Path, mesh_hash: &str) -> Result<Field> {
    let (header, values): (FieldHeader, Vec<f64>) = binio::read(path)?;
    if header.format != FIELD_FORMAT || header.len != values.len() {
        return Err(Error::Cache(format!("{} is not a valid field file", path.display())));
    }
    if header.mesh_hash != mesh_hash {
        return Err(Error::Cache(format!(
            "field was computed on mesh {}, current mesh is {mesh_hash}",
            header.mesh_hash
        )));
    }
    Ok(Field {
        kind: header.kind,
        values,
    })
}

/// Mesh, frame, spaces and operators for one domain, with lazily built
/// quadrature caches and factorizations.
#[derive(Debug)]
pub struct Discretization {
    pub spec: DomainSpec,
    pub frame: BoundaryFrame,
    pub space: FeSpace,
    pub ops: OperatorSet,
    pub cops: ConstrainedOperators,
    quad6: OnceLock<QuadCache>,
    quad8: OnceLock<QuadCache>,
    projector: OnceLock<SaddleSolver>,
}

impl Discretization {
    pub fn new(mesh: &Mesh, spec: &DomainSpec) -> Result<Self> {
        let frame = boundary_frame(mesh, spec)?;
        let space = build_spaces(mesh, &frame)?;
        let ops = assemble_operators(&space)?;
        let cops = apply_slip_constraints(&ops, &space);
        Ok(Discretization {
            spec: *spec,
            frame,
            space,
            ops,
            cops,
            quad6: OnceLock::new(),
            quad8: OnceLock::new(),
            projector: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.space.mesh
    }

    /// Degree-6 rule, used for cubic integrands.
    pub fn quad6(&self) -> &QuadCache {
        self.quad6
            .get_or_init(|| QuadCache::build(self.mesh(), 6).expect("mesh validated at assembly"))
    }

    /// Degree-8 rule, used by independent cross-checks.
    pub fn quad8(&self) -> &QuadCache {
        self.quad8
            .get_or_init(|| QuadCache::build(self.mesh(), 8).expect("mesh validated at assembly"))
    }

    pub(crate) fn projector(&self) -> &SaddleSolver {
        self.projector.get_or_init(|| {
            SaddleSolver::factor(&self.cops.m, &self.cops.b, &self.cops.mean)
                .expect("mass saddle system is nonsingular")
        })
    }
}
