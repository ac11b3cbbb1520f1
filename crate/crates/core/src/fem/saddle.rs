use super::{Discretization, Field, FieldKind};
use crate::error::{Error, Result};
use crate::sparse::{norm2, CsrMatrix, SparseLu};

/// Factorized saddle-point system
///
/// ```text
/// [ S  Bᵀ 0 ] [v]   [f]
/// [ B  0  m ] [p] = [g]
/// [ 0  mᵀ 0 ] [c]   [0]
/// ```
///
/// where `m = M_p·1` pins the pressure mean to zero. With `Bᵀ1 = 0` in the
/// constrained space the multiplier `c` vanishes.
#[derive(Debug)]
pub struct SaddleSolver {
    lu: SparseLu,
    nv: usize,
    np: usize,
}

impl SaddleSolver {
    pub fn factor(s: &CsrMatrix, b: &CsrMatrix, mean: &[f64]) -> Result<Self> {
        let (nv, np) = (s.nrows(), b.nrows());
        let mut t: Vec<(usize, usize, f64)> = s.triplets().collect();
        for (r, c, v) in b.triplets() {
            t.push((nv + r, c, v));
            t.push((c, nv + r, v));
        }
        for (q, &w) in mean.iter().enumerate() {
            t.push((nv + q, nv + np, w));
            t.push((nv + np, nv + q, w));
        }
        let n = nv + np + 1;
        let lu = SparseLu::factor(CsrMatrix::from_triplets(n, n, &t))?;
        Ok(SaddleSolver { lu, nv, np })
    }

    pub fn velocity_dim(&self) -> usize {
        self.nv
    }

    /// Returns `(v, p)` and the relative residual of the full system.
    pub fn solve(&self, f: &[f64], g: Option<&[f64]>) -> (Vec<f64>, Vec<f64>, f64) {
        let mut rhs = Vec::with_capacity(self.nv + self.np + 1);
        rhs.extend_from_slice(f);
        match g {
            Some(g) => rhs.extend_from_slice(g),
            None => rhs.resize(self.nv + self.np, 0.0),
        }
        rhs.push(0.0);
        let x = self.lu.solve(&rhs);
        let res = if norm2(&rhs) > 0.0 {
            self.lu.relative_residual(&x, &rhs)
        } else {
            0.0
        };
        (
            x[..self.nv].to_vec(),
            x[self.nv..self.nv + self.np].to_vec(),
            res,
        )
    }
}

/// Solves `(γM + K)y + Bᵀπ = Mf`, `By = 0`, mean-free `π`, in the slip space.
pub fn stokes_solve(disc: &Discretization, f: &Field, gamma: f64) -> Result<(Field, Field)> {
    f.check(&disc.space)?;
    if f.kind != FieldKind::Velocity {
        return Err(Error::Validation("stokes_solve needs a velocity load".into()));
    }
    if !(gamma >= 0.0) {
        return Err(Error::Validation(format!("gamma must be nonnegative, got {gamma}")));
    }
    let c = &disc.cops;
    let s = if gamma == 0.0 {
        c.k.clone()
    } else {
        CsrMatrix::combine(&[(gamma, &c.m), (1.0, &c.k)])
    };
    let solver = SaddleSolver::factor(&s, &c.b, &c.mean)?;
    let load = disc.space.restrict(&disc.ops.m.mul_vec(&f.values));
    let (yc, p, res) = solver.solve(&load, None);
    if res > 1e-10 {
        return Err(Error::Solver(format!("Stokes residual {res:.3e} exceeds 1e-10")));
    }
    Ok((Field::velocity(disc.space.expand(&yc)), Field::pressure(p)))
}

/// L²-orthogonal projection onto discretely divergence-free slip fields.
///
/// Equivalent to removing the discrete gradient `∇φ` of the Neumann
/// problem `Δφ = div v`, `∂φ/∂n = v·n`.
pub fn helmholtz_project(disc: &Discretization, v: &Field) -> Result<Field> {
    v.check(&disc.space)?;
    Ok(saddle_project_load(disc, &disc.ops.m.mul_vec(&v.values)))
}

/// Projection of the field whose mass-weighted load is `load`.
pub fn saddle_project_load(disc: &Discretization, load: &[f64]) -> Field {
    let (vc, _, _) = disc.projector().solve(&disc.space.restrict(load), None);
    Field::velocity(disc.space.expand(&vc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_ellipse_mesh, DomainSpec};
    use crate::sparse::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disc(h: f64) -> Discretization {
        let spec = DomainSpec::ellipse(2.0, 1.0, h);
        Discretization::new(&generate_ellipse_mesh(&spec).unwrap(), &spec).unwrap()
    }

    fn m_norm(d: &Discretization, v: &[f64]) -> f64 {
        d.ops.m.bilinear(v, v).sqrt()
    }

    #[test]
    fn zero_load_gives_zero() {
        let d = disc(0.3);
        let (y, p) = stokes_solve(&d, &Field::velocity(vec![0.0; d.space.n_v]), 0.0).unwrap();
        assert!(y.values.iter().chain(&p.values).all(|&v| v == 0.0));
    }

    #[test]
    fn random_load_divergence_free_and_tangent() {
        let d = disc(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Field::velocity((0..d.space.n_v).map(|_| rng.random_range(-1.0..1.0)).collect());
        for gamma in [0.0, 1.0] {
            let (y, p) = stokes_solve(&d, &f, gamma).unwrap();
            let div = d.ops.b.mul_vec(&y.values);
            let scale = norm2(&y.values);
            assert!(norm2(&div) <= 1e-12 * scale, "{}", norm2(&div) / scale);
            assert!(dot(&p.values, &d.cops.mean).abs() < 1e-12 * norm2(&p.values));
            for r in &d.space.rotations {
                let v = [y.values[2 * r.node], y.values[2 * r.node + 1]];
                assert!(r.to_frame(v)[0].abs() <= 1e-14 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn gradient_loads_are_absorbed() {
        let errs: Vec<f64> = [0.4, 0.2, 0.1]
            .iter()
            .map(|&h| {
                let d = disc(h);
                let f = Field::interpolate_velocity(&d.space, |p| [2.0 * p[0] + p[1], p[0] - 4.0 * p[1]]);
                let (y, _) = stokes_solve(&d, &f, 1.0).unwrap();
                m_norm(&d, &y.values) / m_norm(&d, &f.values)
            })
            .collect();
        assert!(errs[2] < errs[0] / 4.0, "{errs:?}");
    }

    #[test]
    fn projector_fixes_h_and_is_idempotent() {
        let d = disc(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = Field::velocity((0..d.space.n_v).map(|_| rng.random_range(-1.0..1.0)).collect());
        let pv = helmholtz_project(&d, &v).unwrap();
        let ppv = helmholtz_project(&d, &pv).unwrap();
        let diff: Vec<f64> = pv.values.iter().zip(&ppv.values).map(|(a, b)| a - b).collect();
        assert!(m_norm(&d, &diff) <= 1e-10 * m_norm(&d, &pv.values));
        // Orthogonality against discrete gradients −M⁻¹Bᵀψ: (Pv, M⁻¹Bᵀψ)_M = ψ·B(Pv).
        let div = d.ops.b.mul_vec(&pv.values);
        assert!(norm2(&div) <= 1e-10 * norm2(&pv.values));
    }

    #[test]
    fn discrete_gradient_projects_to_zero() {
        let d = disc(0.3);
        let psi: Vec<f64> = d.mesh().nodes[..d.space.n_p]
            .iter()
            .map(|p| p[0] * p[0] - p[0] * p[1])
            .collect();
        // Load of the discrete gradient is −Bᵀψ.
        let load: Vec<f64> = d.ops.b.mul_vec_transpose(&psi).iter().map(|v| -v).collect();
        let out = saddle_project_load(&d, &load);
        assert!(norm2(&out.values) <= 1e-10 * norm2(&load).max(1.0));
    }
}
