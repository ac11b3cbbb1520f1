//! Numerical witnesses for the boundary and trilinear identities of the
//! slip problem, and measurement of the domain constants `S₂`, `S₄`, `C_K`.

use crate::eigen::{smallest_pairs, ModalBasis, Pencil};
use crate::error::Result;
use crate::fem::{element_nodes, Discretization, PointGeometry, QuadCache, SaddleSolver};
use crate::fem::shape::{p2_hess_ref, P2_NODES_REF};
use crate::mesh::{DomainSpec, Mesh};
use crate::quadrature::TriangleRule;
use crate::reduced::ReducedSystem;
use crate::sensitivity::loglog_slope;
use crate::workbench::Workbench;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

const CONSTANT_TOL: f64 = 1e-9;
const CONSTANT_SEED: u64 = 0xc0_57a7;

type Hess = [[f64; 2]; 2];

/// Value, gradient (`g[c][d] = ∂_d v_c`) and broken Hessian
/// (`h[c][d][s] = ∂_d∂_s v_c`) of a velocity field at one point.
#[derive(Debug, Clone, Copy, Default)]
pub struct Jet {
    pub v: [f64; 2],
    pub g: [[f64; 2]; 2],
    pub h: [Hess; 2],
}

/// Physical Hessians of the quadratic basis at a reference point, by
/// `H_x = J^{-T}(H_ξ − Σ_k (∇_x N)_k H_ξ x_k)J^{-1}`.
pub fn basis_hessians(nodes: &[[f64; 2]; 6], p: &PointGeometry) -> [Hess; 6] {
    let href = p2_hess_ref();
    let mut hx = [[[0.0; 2]; 2]; 2];
    for a in 0..6 {
        for k in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    hx[k][c][d] += nodes[a][k] * href[a][c][d];
                }
            }
        }
    }
    let mut out = [[[0.0; 2]; 2]; 6];
    for a in 0..6 {
        let mut r = href[a];
        for k in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    r[c][d] -= p.dn[a][k] * hx[k][c][d];
                }
            }
        }
        for s in 0..2 {
            for t in 0..2 {
                let mut v = 0.0;
                for c in 0..2 {
                    for d in 0..2 {
                        v += p.jinv[c][s] * r[c][d] * p.jinv[d][t];
                    }
                }
                out[a][s][t] = v;
            }
        }
    }
    out
}

/// Quadrature cache extended with basis Hessians.
pub struct JetCache<'a> {
    pub quad: &'a QuadCache,
    pub hess: Vec<[Hess; 6]>,
}

impl<'a> JetCache<'a> {
    pub fn build(mesh: &Mesh, quad: &'a QuadCache) -> Self {
        let rule = TriangleRule::of_degree(quad.degree);
        let hess = (0..mesh.triangles.len())
            .into_par_iter()
            .flat_map_iter(|e| {
                let nodes = element_nodes(mesh, e);
                rule.points
                    .iter()
                    .map(move |&xi| basis_hessians(&nodes, &PointGeometry::at(&nodes, xi)))
            })
            .collect();
        JetCache { quad, hess }
    }

    pub fn jet(&self, mesh: &Mesh, v: &[f64], q: usize) -> Jet {
        let t = &mesh.triangles[self.quad.element_of(q)];
        let (n, dn, hs) = (&self.quad.n[q], &self.quad.dn[q], &self.hess[q]);
        let mut j = Jet::default();
        for a in 0..6 {
            for c in 0..2 {
                let coef = v[2 * t[a] + c];
                j.v[c] += coef * n[a];
                for d in 0..2 {
                    j.g[c][d] += coef * dn[a][d];
                    for s in 0..2 {
                        j.h[c][d][s] += coef * hs[a][d][s];
                    }
                }
            }
        }
        j
    }
}

fn curl_of(g: &[[f64; 2]; 2]) -> f64 {
    g[1][0] - g[0][1]
}

/// `(u·∇)v` from the gradient of `v`.
fn conv(u: [f64; 2], gv: &[[f64; 2]; 2]) -> [f64; 2] {
    [
        u[0] * gv[0][0] + u[1] * gv[0][1],
        u[0] * gv[1][0] + u[1] * gv[1][1],
    ]
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn axpy2(s: f64, a: [f64; 2], t: f64, b: [f64; 2]) -> [f64; 2] {
    [s * a[0] + t * b[0], s * a[1] + t * b[1]]
}

// ---------------------------------------------------------------------------
// Boundary curl identity

#[derive(Debug, Clone, Serialize)]
pub struct CurlTraceReport {
    /// `max |curl y − y·g|` over boundary nodes.
    pub max_abs: f64,
    /// Root mean square of the nodal residuals.
    pub rms: f64,
    /// `max |curl y|` over the boundary, for scale.
    pub curl_scale: f64,
    pub residuals: Vec<(usize, f64)>,
}

/// Compares `curl y` with `y·g` at every boundary node; the curl is the
/// average of the one-sided values of the adjacent elements.
pub fn check_curl_trace(disc: &Discretization, v: &[f64]) -> CurlTraceReport {
    let mesh = disc.mesh();
    let frame = &disc.frame;
    let mut sum = vec![0.0; frame.len()];
    let mut count = vec![0usize; frame.len()];
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let nodes = element_nodes(mesh, e);
        for (a, &node) in tri.iter().enumerate() {
            let Some(pos) = frame.position(node) else {
                continue;
            };
            let p = PointGeometry::at(&nodes, P2_NODES_REF[a]);
            let mut g = [[0.0; 2]; 2];
            for (b, &nb) in tri.iter().enumerate() {
                for c in 0..2 {
                    for d in 0..2 {
                        g[c][d] += v[2 * nb + c] * p.dn[b][d];
                    }
                }
            }
            sum[pos] += curl_of(&g);
            count[pos] += 1;
        }
    }
    let mut residuals = Vec::with_capacity(frame.len());
    let (mut max_abs, mut sq, mut scale) = (0.0f64, 0.0, 0.0f64);
    for (pos, &node) in frame.nodes.iter().enumerate() {
        let curl = sum[pos] / count[pos].max(1) as f64;
        let y = [v[2 * node], v[2 * node + 1]];
        let r = curl - dot2(y, frame.g[pos]);
        max_abs = max_abs.max(r.abs());
        scale = scale.max(curl.abs());
        sq += r * r;
        residuals.push((node, r));
    }
    CurlTraceReport {
        max_abs,
        rms: (sq / frame.len().max(1) as f64).sqrt(),
        curl_scale: scale,
        residuals,
    }
}

// ---------------------------------------------------------------------------
// Domain constants

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsReport {
    /// Poincaré constant from the gradient pencil by Lanczos.
    pub s2: f64,
    /// The same constant by unshifted inverse iteration.
    pub s2_inverse_iteration: f64,
    /// Largest sampled `‖y‖₄/‖∇y‖₂`: a lower bound for `S₄`.
    pub s4_lower: f64,
    pub s4_samples: usize,
    /// Korn constant `1/sqrt(μ_min)` of the pencil `(Dy, Dφ) = μ(∇y, ∇φ)`.
    pub c_k: f64,
    pub korn_mu_min: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub axisymmetric: bool,
    /// False when the domain is axisymmetric and `C_K` is not bounded.
    pub c_k_reliable: bool,
    pub mesh_hash: String,
}

/// Smallest eigenvalue of `A x + Bᵀπ = μ M x` by inverse iteration.
fn poincare_inverse_iteration(disc: &Discretization) -> Result<f64> {
    let c = &disc.cops;
    let solver = SaddleSolver::factor(&c.a, &c.b, &c.mean)?;
    let n = c.m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(CONSTANT_SEED);
    let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut mu = f64::INFINITY;
    for _ in 0..5000 {
        let (y, _, _) = solver.solve(&c.m.mul_vec(&x), None);
        let norm = c.m.bilinear(&y, &y).sqrt();
        x = y.iter().map(|v| v / norm).collect();
        let next = c.a.bilinear(&x, &x);
        let done = (next - mu).abs() <= 1e-15 * next;
        mu = next;
        if done {
            break;
        }
    }
    Ok(mu)
}

/// `C_K = 1/sqrt(μ_min)` for the pencil `(Dy, Dφ) = μ(∇y, ∇φ)` on the
/// discrete divergence-free slip space, with `μ_min`. Infinite when a rigid
/// rotation is admissible.
pub fn korn_constant(disc: &Discretization) -> Result<(f64, f64)> {
    let c = &disc.cops;
    let half_k = c.k.scaled(0.5);
    let korn = smallest_pairs(
        &Pencil {
            s: &half_k,
            t: &c.a,
            b: &c.b,
            mean: &c.mean,
            shift: -0.1,
        },
        1,
        CONSTANT_TOL,
        CONSTANT_SEED,
    )?;
    let mu = korn.values[0];
    Ok((if mu > 0.0 { 1.0 / mu.sqrt() } else { f64::INFINITY }, mu))
}

pub fn measure_constants(
    disc: &Discretization,
    basis: &ModalBasis,
    sys: &ReducedSystem,
    samples: usize,
    seed: u64,
) -> Result<ConstantsReport> {
    let c = &disc.cops;
    let poincare = smallest_pairs(
        &Pencil {
            s: &c.a,
            t: &c.m,
            b: &c.b,
            mean: &c.mean,
            shift: -1.0,
        },
        1,
        CONSTANT_TOL,
        CONSTANT_SEED,
    )?;
    let s2 = 1.0 / poincare.values[0].sqrt();
    let s2_ii = 1.0 / poincare_inverse_iteration(disc)?.sqrt();

    let (c_k, mu) = korn_constant(disc)?;
    let axisymmetric = disc.spec.is_axisymmetric();

    let s4_lower = sample_s4(disc, basis, sys, samples, seed);
    Ok(ConstantsReport {
        s2,
        s2_inverse_iteration: s2_ii,
        s4_lower,
        s4_samples: samples + basis.m(),
        c_k,
        korn_mu_min: mu,
        kappa1: s4_lower * s4_lower * c_k.powi(3),
        kappa2: s2 * c_k / 2.0,
        axisymmetric,
        c_k_reliable: !axisymmetric && c_k.is_finite(),
        mesh_hash: basis.mesh_hash.clone(),
    })
}

/// Random modal coefficients with spectral decay `1/λ_k`.
pub fn random_modal(rng: &mut ChaCha8Rng, lambda: &[f64]) -> Vec<f64> {
    lambda
        .iter()
        .map(|l| {
            let g: f64 = StandardNormal.sample(rng);
            g / l
        })
        .collect()
}

fn sample_s4(disc: &Discretization, basis: &ModalBasis, sys: &ReducedSystem, samples: usize, seed: u64) -> f64 {
    let mesh = disc.mesh();
    let quad = disc.quad6();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs: Vec<Vec<f64>> = (0..basis.m())
        .map(|k| {
            let mut v = vec![0.0; basis.m()];
            v[k] = 1.0;
            v
        })
        .collect();
    coeffs.extend((0..samples).map(|_| random_modal(&mut rng, &basis.lambda)));
    coeffs
        .par_iter()
        .map(|eta| {
            let y = basis.combine(eta);
            let l4: f64 = (0..quad.len())
                .map(|q| {
                    let (v, _) = quad.velocity(mesh, &y, q);
                    let s = dot2(v, v);
                    quad.wdet[q] * s * s
                })
                .sum();
            l4.powf(0.25) / sys.grad_norm(eta)
        })
        .reduce(|| 0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Trilinear identities

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub alpha: f64,
    pub modes: usize,
    /// `(curl σ(y)×z, φ)` against `b(φ, z, σ(y)) − b(z, φ, σ(y))`.
    pub identity1: f64,
    /// The same with `α = 0`.
    pub identity1_alpha0: f64,
    /// `b(z, y, σ(φ)) − b(y, z, σ(φ))` against the expanded form of
    /// `(curl σ(y×z), φ)` with second derivatives.
    pub identity2: f64,
    /// Largest `|(curl σ(y)×y, y)|` over single modes; the right side of
    /// identity 1 vanishes identically there.
    pub diagonal_lhs_max: f64,
}

struct ModeJets {
    jets: Vec<Vec<Jet>>,
    pgrad: Vec<Vec<[f64; 2]>>,
    w: Vec<f64>,
}

/// Relative mismatches over all single-mode triples of the first `modes`
/// modes, aggregated as `sqrt(Σ(L − R)²)/sqrt(ΣL²)`.
pub fn check_trilinear_identities(
    disc: &Discretization,
    basis: &ModalBasis,
    alpha: f64,
    modes: usize,
) -> IdentityReport {
    let modes = modes.min(basis.m());
    let mesh = disc.mesh();
    let quad = disc.quad6();
    let jc = JetCache::build(mesh, quad);
    let nq = quad.len();
    let mj = ModeJets {
        jets: (0..modes)
            .map(|i| (0..nq).map(|q| jc.jet(mesh, &basis.e[i], q)).collect())
            .collect(),
        pgrad: (0..modes)
            .map(|i| (0..nq).map(|q| quad.pressure(mesh, &basis.pi[i], q).1).collect())
            .collect(),
        w: (0..modes).map(|i| 1.0 + alpha * basis.lambda[i]).collect(),
    };
    let triples: Vec<(usize, usize, usize)> = (0..modes)
        .flat_map(|a| (0..modes).flat_map(move |b| (0..modes).map(move |c| (a, b, c))))
        .collect();
    let vals: Vec<[f64; 6]> = triples
        .par_iter()
        .map(|&(a, b, c)| triple_terms(&mj, &quad.wdet, alpha, a, b, c))
        .collect();
    let rel = |l: usize, r: usize| {
        let num: f64 = vals.iter().map(|v| (v[l] - v[r]).powi(2)).sum();
        let den: f64 = vals.iter().map(|v| v[l] * v[l]).sum();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    };
    let diagonal_lhs_max = triples
        .iter()
        .zip(&vals)
        .filter(|((a, b, c), _)| a == b && b == c)
        .map(|(_, v)| v[0].abs())
        .fold(0.0, f64::max);
    IdentityReport {
        alpha,
        modes,
        identity1: rel(0, 1),
        identity1_alpha0: rel(2, 3),
        identity2: rel(4, 5),
        diagonal_lhs_max,
    }
}

/// `[I1 lhs, I1 rhs, I1(α=0) lhs, I1(α=0) rhs, I2 trilinear, I2 expanded]`
/// for `y = e_a`, `z = e_b`, `φ = e_c`.
fn triple_terms(mj: &ModeJets, wdet: &[f64], alpha: f64, a: usize, b: usize, c: usize) -> [f64; 6] {
    let mut out = [0.0; 6];
    let (wa, wb, wc) = (mj.w[a], mj.w[b], mj.w[c]);
    for (q, &wq) in wdet.iter().enumerate() {
        let (y, z, f) = (&mj.jets[a][q], &mj.jets[b][q], &mj.jets[c][q]);
        let (py, pz, pf) = (mj.pgrad[a][q], mj.pgrad[b][q], mj.pgrad[c][q]);
        let sy = axpy2(wa, y.v, -alpha, py);
        let sz = axpy2(wb, z.v, -alpha, pz);
        let sf = axpy2(wc, f.v, -alpha, pf);
        let cross = z.v[0] * f.v[1] - z.v[1] * f.v[0];
        let curl_y = curl_of(&y.g);
        let f_gz = conv(f.v, &z.g);
        let z_gf = conv(z.v, &f.g);
        let z_gy = conv(z.v, &y.g);
        let y_gz = conv(y.v, &z.g);
        let y_gf = conv(y.v, &f.g);

        out[0] += wq * wa * curl_y * cross;
        out[1] += wq * (dot2(f_gz, sy) - dot2(z_gf, sy));
        out[2] += wq * curl_y * cross;
        out[3] += wq * (dot2(f_gz, y.v) - dot2(z_gf, y.v));

        out[4] += wq * (dot2(z_gy, sf) - dot2(y_gz, sf));
        // b(z, σ(y), φ) = w_a b(z, y, φ) + α b(z, φ, ∇π_y) removes the
        // pressure Hessian by parts.
        let mut rhs = dot2(conv(sz, &y.g), f.v) + dot2(y_gf, sz) - dot2(conv(sy, &z.g), f.v)
            + wa * dot2(z_gy, f.v)
            + alpha * dot2(z_gf, py)
            + dot2(y_gz, f.v)
            - dot2(z_gy, f.v);
        let mut second = 0.0;
        for i in 0..2 {
            let dz = [z.g[0][i], z.g[1][i]];
            let dy = [y.g[0][i], y.g[1][i]];
            let hy = [[y.h[0][0][i], y.h[0][1][i]], [y.h[1][0][i], y.h[1][1][i]]];
            let hz = [[z.h[0][0][i], z.h[0][1][i]], [z.h[1][0][i], z.h[1][1][i]]];
            second += dot2(conv(dz, &hy), f.v) - dot2(conv(dy, &hz), f.v);
        }
        rhs -= 2.0 * alpha * second;
        out[5] += wq * rhs;
    }
    out
}

// ---------------------------------------------------------------------------
// Cubic bound

#[derive(Debug, Clone, Serialize)]
pub struct Rm2Report {
    pub alpha: f64,
    pub samples: usize,
    /// `(1.5 S₄)² C_K³`, the inviscid-part constant with the sampling margin.
    pub kappa1_safe: f64,
    /// `max |(curl z×y, z)| / (κ₁‖Dy‖₂‖Dz‖₂²)`.
    pub alpha0_ratio_max: f64,
    pub alpha0_holds: bool,
    /// `max |(curl σ(z)×y, z)| / ((κ₁‖Dy‖₂ + α|y|_{H³})‖Dz‖₂²)`, unknown constant.
    pub alpha_ratio_max: f64,
}

pub fn check_rm2_bound(sys: &ReducedSystem, consts: &ConstantsReport, alpha: f64, samples: usize, seed: u64) -> Rm2Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa1_safe = (1.5 * consts.s4_lower).powi(2) * consts.c_k.powi(3);
    let (mut r0, mut ra) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let y = random_modal(&mut rng, &sys.lambda);
        let z = random_modal(&mut rng, &sys.lambda);
        let (dy, dz) = (sys.d_norm(&y), sys.d_norm(&z));
        let p0 = sys.cross_pairing(0.0, &z, &y, &z).abs();
        r0 = r0.max(p0 / (kappa1_safe * dy * dz * dz));
        let pa = sys.cross_pairing(alpha, &z, &y, &z).abs();
        ra = ra.max(pa / ((consts.kappa1 * dy + alpha * sys.h3_proxy(alpha, &y)) * dz * dz));
    }
    Rm2Report {
        alpha,
        samples,
        kappa1_safe,
        alpha0_ratio_max: r0,
        alpha0_holds: r0 <= 1.0,
        alpha_ratio_max: ra,
    }
}

// ---------------------------------------------------------------------------
// σ versus its projection

#[derive(Debug, Clone, Serialize)]
pub struct SigmaRow {
    pub alpha: f64,
    /// `max ‖σ(y) − Pσ(y)‖₂ / (α‖∇y‖₂)` over the samples.
    pub ratio_max: f64,
    pub ratio_mean: f64,
    /// Range of `‖y‖_{H²}/(‖y‖²_{H¹} + ‖Pσ(y)‖²₂)^{1/2}` with broken Hessians.
    pub h2_equivalence_min: f64,
    pub h2_equivalence_max: f64,
}

/// `σ(y) − Pσ(y) = −α∇(Σ η_jπ_j)` for modal `y`, by the eigen-relation.
pub fn check_sigma_psigma(
    disc: &Discretization,
    basis: &ModalBasis,
    sys: &ReducedSystem,
    alphas: &[f64],
    samples: usize,
    seed: u64,
) -> Vec<SigmaRow> {
    let mesh = disc.mesh();
    let quad = disc.quad6();
    let jc = JetCache::build(mesh, quad);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let etas: Vec<Vec<f64>> = (0..samples).map(|_| random_modal(&mut rng, &basis.lambda)).collect();
    // Per sample: ‖∇π_y‖₂ and the broken H² seminorm.
    let measured: Vec<(f64, f64)> = etas
        .par_iter()
        .map(|eta| {
            let y = basis.combine(eta);
            let p = basis.combine_pressure(eta);
            let (mut gp, mut h2) = (0.0, 0.0);
            for q in 0..quad.len() {
                let (_, g) = quad.pressure(mesh, &p, q);
                gp += quad.wdet[q] * dot2(g, g);
                let j = jc.jet(mesh, &y, q);
                let hs: f64 = j.h.iter().flatten().flatten().map(|v| v * v).sum();
                h2 += quad.wdet[q] * hs;
            }
            (gp.sqrt(), h2.sqrt())
        })
        .collect();
    alphas
        .iter()
        .map(|&alpha| {
            if alpha == 0.0 {
                return SigmaRow {
                    alpha,
                    ratio_max: 0.0,
                    ratio_mean: 0.0,
                    h2_equivalence_min: 0.0,
                    h2_equivalence_max: 0.0,
                };
            }
            let mut ratios = Vec::with_capacity(samples);
            let (mut emin, mut emax) = (f64::INFINITY, 0.0f64);
            for (eta, &(gp, h2)) in etas.iter().zip(&measured) {
                ratios.push(alpha * gp / (alpha * sys.grad_norm(eta)));
                let h1 = sys.h1_norm(eta);
                let psig: f64 = sys.weights(alpha).iter().zip(eta).map(|(w, e)| (w * e).powi(2)).sum();
                let e = (h1 * h1 + h2 * h2).sqrt() / (h1 * h1 + psig).sqrt();
                emin = emin.min(e);
                emax = emax.max(e);
            }
            SigmaRow {
                alpha,
                ratio_max: ratios.iter().copied().fold(0.0, f64::max),
                ratio_mean: ratios.iter().sum::<f64>() / ratios.len().max(1) as f64,
                h2_equivalence_min: emin,
                h2_equivalence_max: emax,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Refinement studies

#[derive(Debug, Clone, Serialize)]
pub struct RefinementRow {
    pub h: f64,
    pub triangles: usize,
    pub identities: IdentityReport,
    /// Boundary curl residual of the first mode, relative to its curl scale.
    pub curl_trace_e1: f64,
    pub s2: f64,
    pub c_k: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementStudy {
    pub rows: Vec<RefinementRow>,
    pub identity1_slope: f64,
    pub identity1_alpha0_slope: f64,
    pub identity2_slope: f64,
    pub curl_trace_slope: f64,
}

/// Rebuilds the ellipse `(a, b)` at every `h` and repeats the identity,
/// boundary-curl and constant measurements with `modes` modes.
pub fn refinement_study(a: f64, b: f64, hs: &[f64], alpha: f64, modes: usize) -> Result<RefinementStudy> {
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        let spec = DomainSpec::ellipse(a, b, h);
        let wb = Workbench::ellipse(&spec, modes)?;
        let identities = check_trilinear_identities(&wb.disc, &wb.basis, alpha, modes);
        let trace = check_curl_trace(&wb.disc, &wb.basis.e[0]);
        let consts = measure_constants(&wb.disc, &wb.basis, &wb.sys, 0, CONSTANT_SEED)?;
        rows.push(RefinementRow {
            h,
            triangles: wb.disc.mesh().triangles.len(),
            identities,
            curl_trace_e1: trace.rms / trace.curl_scale.max(f64::MIN_POSITIVE),
            s2: consts.s2,
            c_k: consts.c_k,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let slope = |f: &dyn Fn(&RefinementRow) -> f64| loglog_slope(&xs, &rows.iter().map(f).collect::<Vec<_>>());
    Ok(RefinementStudy {
        identity1_slope: slope(&|r| r.identities.identity1),
        identity1_alpha0_slope: slope(&|r| r.identities.identity1_alpha0),
        identity2_slope: slope(&|r| r.identities.identity2),
        curl_trace_slope: slope(&|r| r.curl_trace_e1),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Field;
    use crate::mesh::generate_ellipse_mesh;
    use crate::testutil::small;

    #[test]
    fn hessian_is_exact_for_quadratics_on_straight_elements() {
        let wb = small();
        let (mesh, quad) = (wb.disc.mesh(), wb.disc.quad6());
        let jc = JetCache::build(mesh, quad);
        let f = Field::interpolate_velocity(&wb.disc.space, |x| {
            [x[0] * x[0] + 3.0 * x[0] * x[1] - x[1] * x[1], 0.5 * x[1] * x[1]]
        });
        let interior: Vec<usize> = (0..mesh.triangles.len())
            .filter(|&e| mesh.triangles[e].iter().all(|&n| !mesh.boundary_flags[n]))
            .collect();
        assert!(!interior.is_empty());
        for &e in &interior {
            let j = jc.jet(mesh, &f.values, e * quad.per_element);
            let expect = [[[2.0, 3.0], [3.0, -2.0]], [[0.0, 0.0], [0.0, 1.0]]];
            for c in 0..2 {
                for d in 0..2 {
                    for s in 0..2 {
                        assert!((j.h[c][d][s] - expect[c][d][s]).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences_on_curved_elements() {
        let mesh = small().disc.mesh();
        let e = (0..mesh.triangles.len())
            .find(|&e| mesh.triangles[e][3..].iter().any(|&n| mesh.boundary_flags[n]))
            .unwrap();
        let nodes = element_nodes(mesh, e);
        let xi = [0.2, 0.3];
        let coef = [0.3, -1.0, 0.7, 2.0, 0.1, -0.4];
        let grad = |xi: [f64; 2]| {
            let p = PointGeometry::at(&nodes, xi);
            let mut g = [0.0; 2];
            for a in 0..6 {
                g[0] += coef[a] * p.dn[a][0];
                g[1] += coef[a] * p.dn[a][1];
            }
            (p.x, g)
        };
        let p = PointGeometry::at(&nodes, xi);
        let hs = basis_hessians(&nodes, &p);
        let mut h = [[0.0; 2]; 2];
        for a in 0..6 {
            for r in 0..2 {
                for s in 0..2 {
                    h[r][s] += coef[a] * hs[a][r][s];
                }
            }
        }
        let step = 1e-6;
        for dir in [[step, 0.0], [0.0, step]] {
            let (xp, gp) = grad([xi[0] + dir[0], xi[1] + dir[1]]);
            let (xm, gm) = grad([xi[0] - dir[0], xi[1] - dir[1]]);
            let dx = [xp[0] - xm[0], xp[1] - xm[1]];
            for r in 0..2 {
                let predicted = h[r][0] * dx[0] + h[r][1] * dx[1];
                assert!((gp[r] - gm[r] - predicted).abs() <= 1e-7 * step.max(predicted.abs()), "{r}");
            }
        }
    }

    #[test]
    fn rigid_rotation_satisfies_curl_trace_on_circle() {
        let spec = DomainSpec::ellipse(1.0, 1.0, 0.3);
        let mesh = generate_ellipse_mesh(&spec).unwrap();
        let disc = Discretization::new(&mesh, &spec).unwrap();
        let rot = Field::interpolate_velocity(&disc.space, |x| [-x[1], x[0]]);
        assert!(check_curl_trace(&disc, &rot.values).max_abs <= 1e-10);
        let zero = vec![0.0; disc.space.n_v];
        assert_eq!(check_curl_trace(&disc, &zero).max_abs, 0.0);
        let (c_k, mu) = korn_constant(&disc).unwrap();
        assert!(mu.abs() < 1e-10 && (c_k.is_infinite() || c_k > 1e4));
    }

    #[test]
    fn constants_agree_between_routes() {
        let wb = small();
        let c = measure_constants(&wb.disc, &wb.basis, &wb.sys, 20, 4).unwrap();
        assert!((c.s2 - c.s2_inverse_iteration).abs() <= 1e-6 * c.s2);
        assert!(c.c_k.is_finite() && c.c_k > 1.0 && c.c_k_reliable);
        assert!(c.s4_lower > 0.0);
        assert!((c.kappa2 - c.s2 * c.c_k / 2.0).abs() == 0.0);
        let again = measure_constants(&wb.disc, &wb.basis, &wb.sys, 20, 4).unwrap();
        assert_eq!(c.s4_lower, again.s4_lower);
        assert_eq!(c.c_k, again.c_k);
    }

    #[test]
    fn trilinear_identities_hold_to_discretization_error() {
        let wb = small();
        let r = check_trilinear_identities(&wb.disc, &wb.basis, 0.1, 4);
        assert!(r.identity1 < 1e-3, "{r:?}");
        assert!(r.identity1_alpha0 < 1e-3, "{r:?}");
        assert!(r.identity2 < 5e-2, "{r:?}");
    }

    #[test]
    fn cubic_bound_and_sigma_checks() {
        let wb = small();
        let c = measure_constants(&wb.disc, &wb.basis, &wb.sys, 20, 4).unwrap();
        let r = check_rm2_bound(&wb.sys, &c, 0.1, 50, 9);
        assert!(r.alpha0_holds, "{r:?}");
        let rows = check_sigma_psigma(&wb.disc, &wb.basis, &wb.sys, &[0.0, 0.05, 0.1], 5, 2);
        assert_eq!(rows[0].ratio_max, 0.0);
        // The gradient part is linear in α, so the normalized ratio is α-free.
        assert!((rows[1].ratio_max - rows[2].ratio_max).abs() <= 1e-12 * rows[2].ratio_max);
        assert!(rows[2].ratio_max > 0.0 && rows[2].ratio_max.is_finite());
    }
}
