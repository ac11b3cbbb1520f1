//! Modal steady second-grade state equation
//! `νλ_kη_k + Σ w_iη_iη_jC_ijk = u_k`.

use crate::eigen::ModalBasis;
use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::linearized::LinearizedOperator;
use crate::reduced::ReducedSystem;
use crate::sparse::dot;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Max-norm residual tolerance relative to `max(1, ‖u‖)`.
    pub tol: f64,
    pub max_iter: usize,
    pub continuation_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-11,
            max_iter: 50,
            continuation_steps: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateProblem {
    pub nu: f64,
    pub alpha: f64,
    /// Control coefficients on the first `u.len()` modes.
    pub u: Vec<f64>,
    pub options: SolverOptions,
}

impl StateProblem {
    pub fn new(nu: f64, alpha: f64, u: Vec<f64>) -> Self {
        StateProblem {
            nu,
            alpha,
            u,
            options: SolverOptions::default(),
        }
    }

    pub fn validate(&self, sys: &ReducedSystem) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Validation(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Validation(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if self.u.len() > sys.m {
            return Err(Error::Validation(format!(
                "control has {} modes, basis only {}",
                self.u.len(),
                sys.m
            )));
        }
        if self.u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("control has non-finite coefficients".into()));
        }
        Ok(())
    }

    /// Control coefficients padded to `m`.
    pub fn load(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        out[..self.u.len()].copy_from_slice(&self.u);
        out
    }

    pub fn u_norm(&self) -> f64 {
        dot(&self.u, &self.u).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Initial,
    Newton,
    Picard,
    Polish,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub load_fraction: f64,
    pub kind: StepKind,
    pub step: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSolution {
    pub eta: Vec<f64>,
    pub residual: f64,
    pub trace: Vec<IterationRecord>,
}

pub fn residual(sys: &ReducedSystem, prob: &StateProblem, eta: &[f64]) -> Vec<f64> {
    let n = sys.cross_vector(prob.alpha, eta, eta);
    let u = prob.load(sys.m);
    (0..sys.m)
        .map(|k| prob.nu * sys.lambda[k] * eta[k] + n[k] - u[k])
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

struct Attempt {
    eta: Vec<f64>,
    residual: f64,
    converged: bool,
}

/// Newton with backtracking, falling back to damped Picard sweeps.
fn newton(
    sys: &ReducedSystem,
    prob: &StateProblem,
    start: Vec<f64>,
    fraction: f64,
    trace: &mut Vec<IterationRecord>,
) -> Result<Attempt> {
    let tol = prob.options.tol * prob.u_norm().max(1.0);
    let mut eta = start;
    let mut r = residual(sys, prob, &eta);
    let mut rn = max_abs(&r);
    let push = |trace: &mut Vec<IterationRecord>, iter, kind, step, residual| {
        trace.push(IterationRecord {
            iter,
            load_fraction: fraction,
            kind,
            step,
            residual,
        })
    };
    push(trace, 0, StepKind::Initial, 0.0, rn);
    for iter in 1..=prob.options.max_iter {
        if !rn.is_finite() {
            return Err(Error::Solver("non-finite state iterate".into()));
        }
        if rn <= tol {
            // One extra Newton step drives the residual to roundoff level.
            let op = LinearizedOperator::assemble(sys, &eta, prob.nu, prob.alpha);
            if let Ok(d) = op.solve_linearized(&r.iter().map(|v| -v).collect::<Vec<_>>()) {
                let cand = axpy(&eta, 1.0, &d);
                let cr = max_abs(&residual(sys, prob, &cand));
                if cr <= rn {
                    eta = cand;
                    rn = cr;
                    push(trace, iter, StepKind::Polish, 1.0, rn);
                }
            }
            return Ok(Attempt {
                eta,
                residual: rn,
                converged: true,
            });
        }
        let op = LinearizedOperator::assemble(sys, &eta, prob.nu, prob.alpha);
        let newton_dir = op.solve_linearized(&r.iter().map(|v| -v).collect::<Vec<_>>()).ok();
        let mut accepted = false;
        if let Some(d) = newton_dir {
            let mut t = 1.0;
            while t >= 1.0 / 64.0 {
                let cand = axpy(&eta, t, &d);
                let cr = residual(sys, prob, &cand);
                let crn = max_abs(&cr);
                if crn.is_finite() && crn <= (1.0 - 1e-4 * t) * rn {
                    eta = cand;
                    r = cr;
                    rn = crn;
                    push(trace, iter, StepKind::Newton, t, rn);
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            // η ← η + θ((νΛ)⁻¹(u − N(η,η)) − η)
            let n = sys.cross_vector(prob.alpha, &eta, &eta);
            let u = prob.load(sys.m);
            let target: Vec<f64> = (0..sys.m)
                .map(|k| (u[k] - n[k]) / (prob.nu * sys.lambda[k]))
                .collect();
            let d: Vec<f64> = target.iter().zip(&eta).map(|(a, b)| a - b).collect();
            let mut t = 0.5;
            while t >= 1.0 / 64.0 {
                let cand = axpy(&eta, t, &d);
                let cr = residual(sys, prob, &cand);
                let crn = max_abs(&cr);
                if crn.is_finite() && crn < rn {
                    eta = cand;
                    r = cr;
                    rn = crn;
                    push(trace, iter, StepKind::Picard, t, rn);
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            break;
        }
    }
    Ok(Attempt {
        eta,
        residual: rn,
        converged: rn <= tol,
    })
}

/// Solves the state equation from the Stokes guess `u_k/(νλ_k)` or from
/// `warm`, with load continuation when the direct attempt stalls.
pub fn solve_state(
    sys: &ReducedSystem,
    prob: &StateProblem,
    warm: Option<&[f64]>,
) -> Result<StateSolution> {
    prob.validate(sys)?;
    let u = prob.load(sys.m);
    let stokes: Vec<f64> = (0..sys.m).map(|k| u[k] / (prob.nu * sys.lambda[k])).collect();
    let start = warm.map_or_else(|| stokes.clone(), <[f64]>::to_vec);
    let mut trace = Vec::new();
    let first = newton(sys, prob, start, 1.0, &mut trace)?;
    if first.converged {
        return Ok(StateSolution {
            eta: first.eta,
            residual: first.residual,
            trace,
        });
    }
    let mut best = first.residual;
    let steps = prob.options.continuation_steps.max(1);
    let mut eta = vec![0.0; sys.m];
    for s in 1..=steps {
        let fraction = s as f64 / steps as f64;
        let partial = StateProblem {
            u: prob.u.iter().map(|v| fraction * v).collect(),
            ..prob.clone()
        };
        let attempt = newton(sys, &partial, eta, fraction, &mut trace)?;
        if !attempt.converged {
            best = best.min(attempt.residual);
            return Err(Error::NonConvergence {
                best_residual: best,
                msg: format!(
                    "state solve stalled at load fraction {fraction} (ν = {}, α = {})",
                    prob.nu, prob.alpha
                ),
            });
        }
        eta = attempt.eta;
        if s == steps {
            return Ok(StateSolution {
                residual: attempt.residual,
                eta,
                trace,
            });
        }
    }
    unreachable!("continuation loop returns on its last step")
}

/// Scalar diagnostics of a converged state.
#[derive(Debug, Clone, Serialize)]
pub struct StateDiagnostics {
    pub d_norm: f64,
    pub curl_sigma_norm: f64,
    pub h1_norm: f64,
    pub h3_proxy: f64,
    /// `|2ν‖Dy‖² − (u, y)| / max(|(u, y)|, tiny)`.
    pub energy_gap: f64,
    pub q: f64,
    pub sigma_min: f64,
}

pub fn state_diagnostics(sys: &ReducedSystem, prob: &StateProblem, sol: &StateSolution) -> StateDiagnostics {
    let eta = &sol.eta;
    let d = sys.d_norm(eta);
    let uy = dot(&prob.u, &eta[..prob.u.len()]);
    let lhs = 2.0 * prob.nu * d * d;
    let gap = if lhs == 0.0 && uy == 0.0 {
        0.0
    } else {
        (lhs - uy).abs() / uy.abs().max(f64::MIN_POSITIVE)
    };
    let mon = uniqueness_monitor(sys, prob, sol);
    StateDiagnostics {
        d_norm: d,
        curl_sigma_norm: sys.curl_sigma_norm(prob.alpha, eta),
        h1_norm: sys.h1_norm(eta),
        h3_proxy: sys.h3_proxy(prob.alpha, eta),
        energy_gap: gap,
        q: mon.q,
        sigma_min: mon.sigma_min,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct UniquenessMonitor {
    /// `(‖u‖₂ + α‖curl u‖₂)/ν²`.
    pub q: f64,
    /// Smallest singular value of `L(η)`.
    pub sigma_min: f64,
}

pub fn control_size(sys: &ReducedSystem, alpha: f64, u: &[f64]) -> f64 {
    dot(u, u).sqrt() + alpha * sys.curl_norm(u)
}

pub fn uniqueness_monitor(sys: &ReducedSystem, prob: &StateProblem, sol: &StateSolution) -> UniquenessMonitor {
    let op = LinearizedOperator::assemble(sys, &sol.eta, prob.nu, prob.alpha);
    UniquenessMonitor {
        q: control_size(sys, prob.alpha, &prob.u) / (prob.nu * prob.nu),
        sigma_min: op.sigma_min(),
    }
}

/// Poincaré and Korn constants feeding the a priori bounds.
#[derive(Debug, Clone, Copy)]
pub struct EstimateConstants {
    pub s2: f64,
    pub c_k: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub d_norm: f64,
    /// `κ₂‖u‖₂/ν` with `κ₂ = S₂C_K/2`.
    pub h1_bound: f64,
    pub h1_bound_holds: bool,
    /// `ν‖curl σ(y)‖₂ / (‖u‖₂ + α‖curl u‖₂)`.
    pub curl_sigma_ratio: f64,
    /// `αν|y|_{H³} / (‖u‖₂ + α‖curl u‖₂)` with the `H³` proxy.
    pub h3_ratio: f64,
}

pub fn state_estimates(
    sys: &ReducedSystem,
    prob: &StateProblem,
    sol: &StateSolution,
    consts: EstimateConstants,
) -> EstimateReport {
    let d = sys.d_norm(&sol.eta);
    let kappa2 = consts.s2 * consts.c_k / 2.0;
    let bound = kappa2 * prob.u_norm() / prob.nu;
    let size = control_size(sys, prob.alpha, &prob.u);
    let ratio = |v: f64| if size == 0.0 { 0.0 } else { v / size };
    EstimateReport {
        d_norm: d,
        h1_bound: bound,
        h1_bound_holds: d <= bound * (1.0 + 1e-12),
        curl_sigma_ratio: ratio(prob.nu * sys.curl_sigma_norm(prob.alpha, &sol.eta)),
        h3_ratio: ratio(prob.alpha * prob.nu * sys.h3_proxy(prob.alpha, &sol.eta)),
    }
}

/// `L²` norm of `curl σ(y) + (α/ν) y·∇curl σ(y) − (α/ν) curl u − curl y`,
/// all curls taken from the projected modal curls.
pub fn transport_residual(
    disc: &Discretization,
    basis: &ModalBasis,
    prob: &StateProblem,
    sol: &StateSolution,
) -> f64 {
    if prob.alpha == 0.0 {
        return 0.0;
    }
    let m = sol.eta.len();
    let w: Vec<f64> = (0..m)
        .map(|i| (1.0 + prob.alpha * basis.lambda[i]) * sol.eta[i])
        .collect();
    let omega_sigma = basis.combine_curl(&w);
    let omega = basis.combine_curl(&sol.eta);
    let curl_u = basis.combine_curl(&prob.u);
    let y = basis.combine(&sol.eta);
    let mesh = disc.mesh();
    let cache = disc.quad6();
    let ratio = prob.alpha / prob.nu;
    let total: f64 = (0..cache.len())
        .map(|q| {
            let (os, gos) = cache.scalar(mesh, &omega_sigma, q);
            let (o, _) = cache.scalar(mesh, &omega, q);
            let (cu, _) = cache.scalar(mesh, &curl_u, q);
            let (yv, _) = cache.velocity(mesh, &y, q);
            let r = os + ratio * (yv[0] * gos[0] + yv[1] * gos[1]) - ratio * cu - o;
            cache.wdet[q] * r * r
        })
        .sum();
    total.max(0.0).sqrt()
}
