//! Shift-invert Lanczos for `S x + Bᵀπ = λ T x`, `B x = 0`, with `T`
//! positive definite on the kernel of `B`.

use crate::error::{Error, Result};
use crate::fem::SaddleSolver;
use crate::sparse::{dot, norm2, CsrMatrix};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Pencil<'a> {
    pub s: &'a CsrMatrix,
    pub t: &'a CsrMatrix,
    pub b: &'a CsrMatrix,
    pub mean: &'a [f64],
    /// Shift below the wanted eigenvalues.
    pub shift: f64,
}

#[derive(Debug, Clone)]
pub struct PencilPairs {
    pub values: Vec<f64>,
    /// `T`-orthonormal eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    /// Mean-free multipliers.
    pub pressures: Vec<Vec<f64>>,
    /// `‖S x − λ T x + Bᵀπ‖ / (max(|λ|, |σ|, 1e-300)·‖T x‖)`.
    pub residuals: Vec<f64>,
}

/// Smallest `count` eigenpairs of the pencil, computed to relative
/// residual `tol`.
pub fn smallest_pairs(p: &Pencil<'_>, count: usize, tol: f64, seed: u64) -> Result<PencilPairs> {
    let n = p.s.nrows();
    let np = p.b.nrows();
    // Dimension of ker B; the mean constraint removes one pressure mode.
    let div_dim = n.saturating_sub(np.saturating_sub(1));
    if count == 0 || count > div_dim {
        return Err(Error::Validation(format!(
            "requested {count} eigenpairs, divergence-free space has dimension {div_dim}"
        )));
    }
    let shifted = CsrMatrix::combine(&[(1.0, p.s), (-p.shift, p.t)]);
    let solver = SaddleSolver::factor(&shifted, p.b, p.mean)?;
    let apply = |x: &[f64]| -> Vec<f64> { solver.solve(&p.t.mul_vec(x), None).0 };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let start = apply(&start);

    let mut dim = (2 * count + 40).min(div_dim);
    let mut last_worst = f64::INFINITY;
    loop {
        let mut pairs = lanczos_pass(p, &apply, &start, count, dim)?;
        attach_pressures(p, &solver, &mut pairs);
        let worst = pairs.residuals.iter().copied().fold(0.0, f64::max);
        if worst <= tol {
            return Ok(pairs);
        }
        last_worst = last_worst.min(worst);
        if dim == div_dim || dim > 20 * count + 400 {
            let achieved = pairs.residuals.iter().filter(|&&r| r <= tol).count();
            return Err(Error::Eigen {
                requested: count,
                achieved,
                msg: format!("worst relative residual {last_worst:.3e} with Krylov dimension {dim}"),
            });
        }
        dim = (dim + count + 40).min(div_dim);
    }
}

fn lanczos_pass(
    p: &Pencil<'_>,
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    start: &[f64],
    count: usize,
    dim: usize,
) -> Result<PencilPairs> {
    let tnorm = |x: &[f64]| dot(x, &p.t.mul_vec(x)).sqrt();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    let mut tbasis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    let mut alpha = Vec::with_capacity(dim);
    let mut beta: Vec<f64> = Vec::with_capacity(dim);
    let s0 = tnorm(start);
    let mut q: Vec<f64> = start.iter().map(|v| v / s0).collect();
    for j in 0..dim {
        let tq = p.t.mul_vec(&q);
        let mut w = apply(&q);
        basis.push(q);
        tbasis.push(tq);
        let a = dot(&w, &tbasis[j]);
        alpha.push(a);
        // Full reorthogonalization, twice, in the T inner product.
        for _ in 0..2 {
            for (qi, tqi) in basis.iter().zip(&tbasis) {
                let c = dot(&w, tqi);
                w.iter_mut().zip(qi).for_each(|(wk, qk)| *wk -= c * qk);
            }
        }
        let b = tnorm(&w);
        if j + 1 == dim || b <= 1e-13 * a.abs() {
            beta.push(b);
            break;
        }
        beta.push(b);
        q = w.into_iter().map(|v| v / b).collect();
    }
    let k = alpha.len();
    if k < count {
        return Err(Error::Eigen {
            requested: count,
            achieved: k,
            msg: "Krylov space exhausted".into(),
        });
    }
    // Rayleigh–Ritz in the Krylov basis with the original matrices; this
    // avoids trusting the tridiagonal recurrence for the final accuracy.
    let tri = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(tri);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let n = p.s.nrows();
    let ritz: Vec<Vec<f64>> = order[..count]
        .iter()
        .map(|&c| {
            let mut x = vec![0.0; n];
            for (i, qi) in basis.iter().enumerate() {
                let w = eig.eigenvectors[(i, c)];
                x.iter_mut().zip(qi).for_each(|(xk, qk)| *xk += w * qk);
            }
            x
        })
        .collect();
    Ok(rayleigh_ritz(p, ritz))
}

/// Exact `T`-orthonormalization and diagonalization within span(x).
fn rayleigh_ritz(p: &Pencil<'_>, x: Vec<Vec<f64>>) -> PencilPairs {
    let c = x.len();
    let tx: Vec<Vec<f64>> = x.iter().map(|v| p.t.mul_vec(v)).collect();
    let sx: Vec<Vec<f64>> = x.iter().map(|v| p.s.mul_vec(v)).collect();
    let gram = DMatrix::from_fn(c, c, |i, j| 0.5 * (dot(&x[i], &tx[j]) + dot(&x[j], &tx[i])));
    let stiff = DMatrix::from_fn(c, c, |i, j| 0.5 * (dot(&x[i], &sx[j]) + dot(&x[j], &sx[i])));
    let chol = gram.cholesky().expect("Ritz vectors are independent");
    let linv = chol.l().try_inverse().expect("triangular factor is invertible");
    let reduced = &linv * stiff * linv.transpose();
    let reduced = 0.5 * (&reduced + reduced.transpose());
    let eig = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let coeffs = linv.transpose() * &eig.eigenvectors;
    let n = p.s.nrows();
    let mut values = Vec::with_capacity(c);
    let mut vectors = Vec::with_capacity(c);
    for &col in &order {
        let mut v = vec![0.0; n];
        for (i, xi) in x.iter().enumerate() {
            let w = coeffs[(i, col)];
            v.iter_mut().zip(xi).for_each(|(vk, xk)| *vk += w * xk);
        }
        fix_sign(&mut v);
        values.push(eig.eigenvalues[col]);
        vectors.push(v);
    }
    PencilPairs {
        values,
        vectors,
        pressures: Vec::new(),
        residuals: Vec::new(),
    }
}

/// Recovers each multiplier from `(S − σT)x' + Bᵀπ = (λ − σ)T x` (exact
/// when `x` is an eigenvector) and records the true residual.
fn attach_pressures(p: &Pencil<'_>, solver: &SaddleSolver, pairs: &mut PencilPairs) {
    pairs.pressures.clear();
    pairs.residuals.clear();
    for (x, &lambda) in pairs.vectors.iter().zip(&pairs.values) {
        let tx = p.t.mul_vec(x);
        let rhs: Vec<f64> = tx.iter().map(|v| (lambda - p.shift) * v).collect();
        let (_, pi, _) = solver.solve(&rhs, None);
        let sx = p.s.mul_vec(x);
        let btp = p.b.mul_vec_transpose(&pi);
        let r: Vec<f64> = (0..x.len()).map(|k| sx[k] - lambda * tx[k] + btp[k]).collect();
        let scale = lambda.abs().max(p.shift.abs()).max(1e-300) * norm2(&tx);
        pairs.residuals.push(norm2(&r) / scale);
        pairs.pressures.push(pi);
    }
}

/// Makes the first significant entry positive.
pub fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * max) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

