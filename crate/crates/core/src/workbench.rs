//! One-stop construction of a discretization, modal basis and reduced system.

use crate::eigen::{compute_eigenbasis, ModalBasis};
use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::mesh::{generate_ellipse_mesh, DomainSpec, Mesh};
use crate::reduced::{assemble_cross_tensor, ReducedSystem};

#[derive(Debug)]
pub struct Workbench {
    pub disc: Discretization,
    pub basis: ModalBasis,
    pub sys: ReducedSystem,
}

impl Workbench {
    /// Meshes an ellipse and computes `m` modes.
    pub fn ellipse(spec: &DomainSpec, m: usize) -> Result<Self> {
        let mesh = generate_ellipse_mesh(spec)?;
        Self::from_mesh(&mesh, spec, m)
    }

    pub fn from_mesh(mesh: &Mesh, spec: &DomainSpec, m: usize) -> Result<Self> {
        let disc = Discretization::new(mesh, spec)?;
        let basis = compute_eigenbasis(&disc, m)?;
        Ok(Self::with_basis(disc, basis))
    }

    /// Uses a precomputed (for instance cached) basis.
    pub fn with_basis(disc: Discretization, basis: ModalBasis) -> Self {
        let sys = assemble_cross_tensor(&disc, &basis);
        Workbench { disc, basis, sys }
    }

    /// Checks that a cached basis belongs to this mesh and has enough modes.
    pub fn check_basis(disc: &Discretization, basis: &ModalBasis, m: usize) -> Result<()> {
        let hash = disc.mesh().hash();
        if basis.mesh_hash != hash {
            return Err(Error::Cache(format!(
                "basis built for mesh {} but mesh is {hash}",
                basis.mesh_hash
            )));
        }
        if basis.m() < m {
            return Err(Error::Cache(format!("basis has {} modes, {m} requested", basis.m())));
        }
        Ok(())
    }
}
