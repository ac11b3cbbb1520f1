//! Tracking-type optimal control over a modal `L²` ball, solved by projected
//! gradient with an adjoint gradient.

use crate::eigen::ModalBasis;
use crate::error::{Error, Result};
use crate::fem::{Discretization, Field};
use crate::linearized::LinearizedOperator;
use crate::reduced::ReducedSystem;
use crate::sparse::{dot, norm2};
use crate::state::{control_size, solve_state, SolverOptions, StateProblem};
use serde::{Deserialize, Serialize};

/// `U_ad = {u ∈ span(e_1..e_{m_c}) : ‖u‖₂ ≤ R}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    pub m_c: usize,
    pub radius: f64,
}

impl AdmissibleSet {
    pub fn new(m_c: usize, radius: f64) -> Result<Self> {
        if m_c == 0 {
            return Err(Error::Validation("m_c must be positive".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Validation(format!("ball radius must be positive, got {radius}")));
        }
        Ok(AdmissibleSet { m_c, radius })
    }

    /// Truncates to `m_c` modes and scales onto the ball when outside.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m_c];
        let n = u.len().min(self.m_c);
        out[..n].copy_from_slice(&u[..n]);
        let r = norm2(&out);
        // The margin keeps rescaled points fixed under a second projection.
        if r > self.radius * (1.0 + 4.0 * f64::EPSILON) {
            let s = self.radius / r;
            out.iter_mut().for_each(|v| *v *= s);
        }
        out
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() <= self.m_c && norm2(u) <= self.radius * (1.0 + 1e-12)
    }
}

/// `J(u, y) = ½‖y − y_d‖₂² + (λ_reg/2)‖u‖₂²` with `y_d = Σ d_k e_k + y_d^⊥`
/// and `offset = ½‖y_d^⊥‖₂²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub d: Vec<f64>,
    pub offset: f64,
    pub lambda_reg: f64,
}

impl CostSpec {
    pub fn new(d: Vec<f64>, offset: f64, lambda_reg: f64) -> Result<Self> {
        if !(lambda_reg >= 0.0 && lambda_reg.is_finite()) {
            return Err(Error::Validation(format!("lambda_reg must be nonnegative, got {lambda_reg}")));
        }
        if !(offset >= 0.0 && offset.is_finite()) {
            return Err(Error::Validation(format!("cost offset must be nonnegative, got {offset}")));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("target has non-finite coefficients".into()));
        }
        Ok(CostSpec { d, offset, lambda_reg })
    }

    /// Splits a velocity field into its modal part and the orthogonal rest.
    pub fn from_field(disc: &Discretization, basis: &ModalBasis, y_d: &Field, lambda_reg: f64) -> Result<Self> {
        y_d.check(&disc.space)?;
        let my = disc.ops.m.mul_vec(&y_d.values);
        let d: Vec<f64> = basis.e.iter().map(|e| dot(e, &my)).collect();
        let total = dot(&y_d.values, &my);
        let offset = (0.5 * (total - dot(&d, &d))).max(0.0);
        CostSpec::new(d, offset, lambda_reg)
    }

    fn check_len(&self, m: usize) -> Result<()> {
        if self.d.len() != m {
            return Err(Error::Validation(format!(
                "target has {} coefficients, basis has {m}",
                self.d.len()
            )));
        }
        Ok(())
    }
}

pub fn cost(u: &[f64], eta: &[f64], spec: &CostSpec) -> f64 {
    let mismatch: f64 = eta.iter().zip(&spec.d).map(|(e, d)| (e - d) * (e - d)).sum();
    0.5 * mismatch + spec.offset + 0.5 * spec.lambda_reg * dot(u, u)
}

/// One control problem at fixed `(ν, α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub nu: f64,
    pub alpha: f64,
    pub set: AdmissibleSet,
    pub cost: CostSpec,
    pub state_options: SolverOptions,
}

impl ControlProblem {
    pub fn state(&self, u: &[f64]) -> StateProblem {
        StateProblem {
            nu: self.nu,
            alpha: self.alpha,
            u: u.to_vec(),
            options: self.state_options,
        }
    }
}

/// Value, state, adjoint and gradient of the reduced cost at one control.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub u: Vec<f64>,
    pub eta: Vec<f64>,
    pub p: Vec<f64>,
    pub gradient: Vec<f64>,
    pub j: f64,
}

/// Adjoint `Lᵀp = η − d` and gradient `p|_{m_c} + λ_reg u`.
pub fn reduced_gradient(
    sys: &ReducedSystem,
    prob: &ControlProblem,
    u: &[f64],
    eta: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let op = LinearizedOperator::assemble(sys, eta, prob.nu, prob.alpha);
    let f: Vec<f64> = eta.iter().zip(&prob.cost.d).map(|(e, d)| e - d).collect();
    let p = op.solve_adjoint(&f)?;
    let grad = (0..u.len())
        .map(|k| p[k] + prob.cost.lambda_reg * u[k])
        .collect();
    Ok((grad, p))
}

/// Solves the state and adjoint at `u`; `warm` seeds the state iteration.
pub fn evaluate(sys: &ReducedSystem, prob: &ControlProblem, u: &[f64], warm: Option<&[f64]>) -> Result<Evaluation> {
    prob.cost.check_len(sys.m)?;
    let sol = solve_state(sys, &prob.state(u), warm)?;
    let j = cost(u, &sol.eta, &prob.cost);
    let (gradient, p) = reduced_gradient(sys, prob, u, &sol.eta)?;
    Ok(Evaluation {
        u: u.to_vec(),
        eta: sol.eta,
        p,
        gradient,
        j,
    })
}

/// Reduced cost `u ↦ J(u, y(u))`.
pub fn reduced_cost(sys: &ReducedSystem, prob: &ControlProblem, u: &[f64], warm: Option<&[f64]>) -> Result<f64> {
    let sol = solve_state(sys, &prob.state(u), warm)?;
    Ok(cost(u, &sol.eta, &prob.cost))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    /// A run counts as converged once `‖u − P(u − ∇J)‖₂` is below this.
    pub tol: f64,
    /// Iteration continues until the fixed-point residual is also below
    /// `rel_tol` times the largest gradient norm seen, or no Armijo step
    /// can be resolved.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub armijo_c1: f64,
    pub initial_step: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            tol: 1e-8,
            rel_tol: 1e-10,
            max_iter: 200,
            armijo_c1: 1e-4,
            initial_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizerIterate {
    pub iter: usize,
    pub j: f64,
    pub step: f64,
    pub grad_norm: f64,
    pub u_norm: f64,
    pub fixed_point_residual: f64,
    pub vi_residual: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalityReport {
    pub j: f64,
    pub gradient: Vec<f64>,
    /// `min_v (∇J, v − ū)` over `v = ±R e_k`.
    pub vi_residual: f64,
    /// `2R·G` with `G` the largest of the gradient norms along the run,
    /// `‖p̄‖₂` and `λ_reg‖ū‖₂`: the size of the terms the VI pairing balances.
    pub vi_scale: f64,
    pub ball_active: bool,
    /// `μ = −(∇J, ū)/R`, meaningful when the ball is active.
    pub kkt_multiplier: f64,
    /// `‖∇J + μū/R‖₂ / ‖∇J‖₂` for active balls, zero otherwise.
    pub kkt_collinearity: f64,
    pub fixed_point_residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub q: f64,
    /// `q ≥ 1`: outside the regime where uniqueness is certified.
    pub outside_certified_regime: bool,
    pub trace: Vec<OptimizerIterate>,
}

#[derive(Debug, Clone)]
pub struct ControlSolution {
    pub u: Vec<f64>,
    pub eta: Vec<f64>,
    pub p: Vec<f64>,
    pub report: OptimalityReport,
}

fn vi_residual(set: &AdmissibleSet, grad: &[f64], u: &[f64]) -> f64 {
    let gu = dot(grad, u);
    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    -set.radius * gmax - gu
}

fn fixed_point_residual(set: &AdmissibleSet, grad: &[f64], u: &[f64]) -> f64 {
    let trial: Vec<f64> = u.iter().zip(grad).map(|(a, g)| a - g).collect();
    let p = set.project(&trial);
    u.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn gradient_scale(prob: &ControlProblem, ev: &Evaluation, trace: &[OptimizerIterate]) -> f64 {
    let m_c = prob.set.m_c;
    trace
        .iter()
        .map(|t| t.grad_norm)
        .fold(norm2(&ev.p[..m_c]), f64::max)
        .max(prob.cost.lambda_reg * norm2(&ev.u))
}

fn optimality_report(
    sys: &ReducedSystem,
    prob: &ControlProblem,
    ev: &Evaluation,
    converged: bool,
    trace: Vec<OptimizerIterate>,
) -> OptimalityReport {
    let set = &prob.set;
    let g = &ev.gradient;
    let gn = norm2(g);
    let ball_active = norm2(&ev.u) >= set.radius * (1.0 - 1e-10);
    let mu = -dot(g, &ev.u) / set.radius;
    let collinearity = if ball_active && gn > 0.0 {
        let r: Vec<f64> = g.iter().zip(&ev.u).map(|(a, b)| a + mu * b / set.radius).collect();
        norm2(&r) / gn
    } else {
        0.0
    };
    let q = control_size(sys, prob.alpha, &ev.u) / (prob.nu * prob.nu);
    let g_scale = gradient_scale(prob, ev, &trace);
    OptimalityReport {
        j: ev.j,
        gradient: g.clone(),
        vi_residual: vi_residual(set, g, &ev.u),
        vi_scale: 2.0 * set.radius * g_scale,
        ball_active,
        kkt_multiplier: if ball_active { mu } else { 0.0 },
        kkt_collinearity: collinearity,
        fixed_point_residual: fixed_point_residual(set, g, &ev.u),
        converged,
        iterations: trace.len().saturating_sub(1),
        q,
        outside_certified_regime: q >= 1.0,
        trace,
    }
}

/// Projected gradient with Barzilai–Borwein trial steps and Armijo
/// backtracking along the projection arc.
pub fn solve_control(
    sys: &ReducedSystem,
    prob: &ControlProblem,
    opts: &OptimizerOptions,
    warm: Option<&[f64]>,
) -> Result<ControlSolution> {
    let set = prob.set;
    if set.m_c > sys.m {
        return Err(Error::Validation(format!(
            "control modes m_c = {} exceed basis size {}",
            set.m_c, sys.m
        )));
    }
    let u0 = set.project(warm.unwrap_or(&vec![0.0; set.m_c]));
    let mut ev = evaluate(sys, prob, &u0, None)?;
    let record = |iter: usize, step: f64, ev: &Evaluation| OptimizerIterate {
        iter,
        j: ev.j,
        step,
        grad_norm: norm2(&ev.gradient),
        u_norm: norm2(&ev.u),
        fixed_point_residual: fixed_point_residual(&set, &ev.gradient, &ev.u),
        vi_residual: vi_residual(&set, &ev.gradient, &ev.u),
        q: control_size(sys, prob.alpha, &ev.u) / (prob.nu * prob.nu),
    };
    let mut trace = vec![record(0, 0.0, &ev)];
    let mut step = opts.initial_step;
    let mut g_max = trace[0].grad_norm;
    for iter in 1..=opts.max_iter {
        let fp = trace.last().map_or(f64::INFINITY, |t| t.fixed_point_residual);
        if fp <= opts.tol && fp <= opts.rel_tol * g_max {
            break;
        }
        let mut s = step;
        let mut accepted = None;
        while s >= 1e-14 {
            let trial: Vec<f64> = ev.u.iter().zip(&ev.gradient).map(|(a, g)| a - s * g).collect();
            let cand = set.project(&trial);
            let decrease: f64 = ev.gradient.iter().zip(cand.iter().zip(&ev.u)).map(|(g, (c, u))| g * (c - u)).sum();
            // A failed state solve counts as a rejected step.
            if let Ok(next) = evaluate(sys, prob, &cand, Some(&ev.eta)) {
                // Near a stationary point the decrease drops below the
                // rounding level of J; a shrinking fixed-point residual
                // then stands in for the Armijo test.
                let flat = (next.j - ev.j).abs() <= 64.0 * f64::EPSILON * ev.j.abs().max(f64::MIN_POSITIVE);
                let armijo = next.j <= ev.j + opts.armijo_c1 * decrease;
                if armijo || (flat && fixed_point_residual(&set, &next.gradient, &next.u) < fp) {
                    accepted = Some((s, next));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((s, next)) = accepted else {
            break;
        };
        let du: Vec<f64> = next.u.iter().zip(&ev.u).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = next.gradient.iter().zip(&ev.gradient).map(|(a, b)| a - b).collect();
        let (uu, ug) = (dot(&du, &du), dot(&du, &dg));
        step = if ug > 0.0 { (uu / ug).clamp(1e-10, 1e10) } else { (2.0 * s).min(1e10) };
        ev = next;
        trace.push(record(iter, s, &ev));
        g_max = g_max.max(norm2(&ev.gradient));
    }
    let converged = trace.last().map_or(f64::INFINITY, |t| t.fixed_point_residual) <= opts.tol;
    if trace.len() == 1 && !converged {
        return Err(Error::Optimizer(format!(
            "no admissible descent step from the initial control (J = {:.6e}, fixed-point residual {:.3e})",
            ev.j, trace[0].fixed_point_residual
        )));
    }
    let report = optimality_report(sys, prob, &ev, converged, trace);
    Ok(ControlSolution {
        u: ev.u,
        eta: ev.eta,
        p: ev.p,
        report,
    })
}

/// Central difference of the reduced cost along `w` with step `h`.
pub fn fd_directional_derivative(
    sys: &ReducedSystem,
    prob: &ControlProblem,
    u: &[f64],
    w: &[f64],
    h: f64,
) -> Result<f64> {
    let shift = |t: f64| -> Vec<f64> { u.iter().zip(w).map(|(a, b)| a + t * b).collect() };
    let jp = reduced_cost(sys, prob, &shift(h), None)?;
    let jm = reduced_cost(sys, prob, &shift(-h), None)?;
    Ok((jp - jm) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::small;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(d: Vec<f64>, lambda_reg: f64, radius: f64, alpha: f64) -> ControlProblem {
        ControlProblem {
            nu: 1.0,
            alpha,
            set: AdmissibleSet::new(4, radius).unwrap(),
            cost: CostSpec::new(d, 0.0, lambda_reg).unwrap(),
            state_options: SolverOptions::default(),
        }
    }

    fn target(m: usize) -> Vec<f64> {
        (0..m).map(|k| if k < 8 { 0.6 / (1.0 + k as f64) } else { 0.0 }).collect()
    }

    #[test]
    fn cost_trivial_cases() {
        let spec = CostSpec::new(vec![1.0, 2.0], 0.25, 0.5).unwrap();
        assert_eq!(cost(&[0.0, 0.0], &[1.0, 2.0], &spec), 0.25);
        let zero = CostSpec::new(vec![0.0, 0.0], 0.25, 0.5).unwrap();
        assert_eq!(cost(&[2.0], &[0.0, 0.0], &zero), 0.25 + 0.25 * 4.0);
        assert!(CostSpec::new(vec![0.0], 0.0, -1.0).is_err());
        assert!(AdmissibleSet::new(2, 0.0).is_err());
    }

    #[test]
    fn cost_matches_field_quadrature() {
        let wb = small();
        let (disc, basis) = (&wb.disc, &wb.basis);
        let y_d = Field::interpolate_velocity(&disc.space, |x| [x[1] * x[1], x[0] - x[1]]);
        let spec = CostSpec::from_field(disc, basis, &y_d, 0.3).unwrap();
        assert!(spec.offset > 0.0);
        let eta: Vec<f64> = (0..basis.m()).map(|k| 0.1 * k as f64 - 0.4).collect();
        let u = [0.5, -0.25];
        let y = basis.combine(&eta);
        let diff: Vec<f64> = y.iter().zip(&y_d.values).map(|(a, b)| a - b).collect();
        let uf = basis.combine(&u);
        let direct = 0.5 * disc.ops.m.bilinear(&diff, &diff) + 0.15 * disc.ops.m.bilinear(&uf, &uf);
        assert!((cost(&u, &eta, &spec) - direct).abs() <= 1e-10 * direct.max(1.0));
    }

    #[test]
    fn gradient_vanishes_at_perfect_match() {
        let sys = &small().sys;
        let u = vec![0.4, -0.3, 0.2, 0.1];
        let eta = solve_state(sys, &StateProblem::new(1.0, 0.1, u.clone()), None).unwrap().eta;
        let prob = problem(eta.clone(), 0.0, 10.0, 0.1);
        let (g, _) = reduced_gradient(sys, &prob, &u, &eta).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let sys = &small().sys;
        let prob = problem(target(sys.m), 1e-2, 10.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..2 {
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ev = evaluate(sys, &prob, &u, None).unwrap();
            for _ in 0..3 {
                let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let fd = fd_directional_derivative(sys, &prob, &u, &w, 1e-4).unwrap();
                let ad = dot(&ev.gradient, &w);
                assert!((fd - ad).abs() <= 1e-4 * ad.abs(), "fd {fd} adjoint {ad}");
            }
        }
    }

    #[test]
    fn adjoint_pairing_matches_linearized_response() {
        let sys = &small().sys;
        let prob = problem(target(sys.m), 0.0, 10.0, 0.1);
        let u = vec![0.5, 0.2, -0.1, 0.3];
        let ev = evaluate(sys, &prob, &u, None).unwrap();
        let op = LinearizedOperator::assemble(sys, &ev.eta, 1.0, 0.1);
        let f: Vec<f64> = ev.eta.iter().zip(&prob.cost.d).map(|(e, d)| e - d).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..5 {
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut w = vec![0.0; sys.m];
            for k in 0..4 {
                w[k] = v[k] - u[k];
            }
            let z = op.solve_linearized(&w).unwrap();
            let lhs = dot(&f, &z);
            let rhs = dot(&w[..4], &ev.p[..4]);
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
        }
    }

    #[test]
    fn zero_target_gives_zero_control() {
        let sys = &small().sys;
        let prob = problem(vec![0.0; sys.m], 0.1, 3.0, 0.1);
        let sol = solve_control(sys, &prob, &OptimizerOptions::default(), Some(&[1.0, 1.0, 0.0, 0.0])).unwrap();
        assert!(sol.report.converged);
        assert!(norm2(&sol.u) <= 1e-8);
        assert!(sol.report.j <= 1e-15);
    }

    #[test]
    fn inverse_crime_recovers_target() {
        let sys = &small().sys;
        let radius = 2.0;
        let mut u_true = vec![0.8, -0.5, 0.3, 0.2];
        let n = norm2(&u_true);
        u_true.iter_mut().for_each(|v| *v *= 0.9 * radius / n);
        let d = solve_state(sys, &StateProblem::new(1.0, 0.1, u_true.clone()), None).unwrap().eta;
        let prob = problem(d, 0.0, radius, 0.1);
        let sol = solve_control(sys, &prob, &OptimizerOptions::default(), None).unwrap();
        let j0 = sol.report.trace[0].j;
        assert!(sol.report.j <= 1e-6 * j0, "J {} from {}", sol.report.j, j0);
        assert!(sol.report.iterations <= 200);
        for w in sol.report.trace.windows(2) {
            assert!(w[1].j <= w[0].j);
        }
    }

    #[test]
    fn active_ball_satisfies_kkt() {
        let sys = &small().sys;
        let d: Vec<f64> = target(sys.m).iter().map(|v| 20.0 * v).collect();
        let prob = problem(d, 1e-3, 0.5, 0.1);
        let sol = solve_control(sys, &prob, &OptimizerOptions::default(), None).unwrap();
        let r = &sol.report;
        assert!(r.converged && r.ball_active);
        assert!(r.kkt_multiplier >= 0.0);
        assert!(r.kkt_collinearity <= 1e-6, "{:e}", r.kkt_collinearity);
        assert!(r.vi_residual >= -1e-8 * r.vi_scale);
    }

    #[test]
    fn stronger_regularization_shrinks_the_control() {
        let sys = &small().sys;
        let opts = OptimizerOptions::default();
        let a = solve_control(sys, &problem(target(sys.m), 1e-2, 10.0, 0.1), &opts, None).unwrap();
        let b = solve_control(sys, &problem(target(sys.m), 1e-1, 10.0, 0.1), &opts, None).unwrap();
        assert!(a.report.converged && b.report.converged);
        assert!(norm2(&b.u) <= norm2(&a.u));
        assert!(a.report.vi_residual >= -1e-8 * a.report.vi_scale);
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_exact(
            u in proptest::collection::vec(-5.0f64..5.0, 1..8),
            radius in 0.1f64..4.0,
        ) {
            let set = AdmissibleSet::new(4, radius).unwrap();
            let p = set.project(&u);
            prop_assert!(set.contains(&p));
            prop_assert_eq!(set.project(&p), p.clone());
            let head: Vec<f64> = u.iter().take(4).copied().collect();
            if norm2(&head) <= radius {
                prop_assert_eq!(&p[..head.len()], &head[..]);
            } else {
                prop_assert!((norm2(&p) - radius).abs() <= 1e-12 * radius);
                let s = norm2(&head) / radius;
                for (a, b) in p.iter().zip(&head) {
                    prop_assert!((a * s - b).abs() <= 1e-12 * s.max(1.0) * b.abs().max(1.0));
                }
            }
        }
    }
}
