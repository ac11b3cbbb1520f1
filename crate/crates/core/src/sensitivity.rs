//! Directional differentiability of the control-to-state map and local
//! Lipschitz monitors.

use crate::control::{cost, ControlProblem};
use crate::error::Result;
use crate::linearized::LinearizedOperator;
use crate::reduced::ReducedSystem;
use crate::sparse::{dot, norm2};
use crate::state::{control_size, solve_state, StateProblem};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct GateauxRow {
    pub rho: f64,
    /// `‖Dr_ρ‖₂` with `r_ρ = (y_ρ − y)/ρ − z`.
    pub dr_norm: f64,
    /// `|J(u_ρ) − J(u) − ρ dJ| / ρ`.
    pub cost_remainder: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GateauxReport {
    pub rows: Vec<GateauxRow>,
    /// `ρ` values whose perturbed state failed to converge.
    pub failed: Vec<f64>,
    /// `(z, y − y_d) + λ_reg(u, w)`.
    pub directional_derivative: f64,
    pub dz_norm: f64,
    pub dr_slope: f64,
    pub cost_slope: f64,
}

/// Least-squares slope of `log y` against `log x`, skipping nonpositive entries.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Compares `y(u + ρw)` with the first-order expansion `y + ρz`.
pub fn gateaux_check(
    sys: &ReducedSystem,
    prob: &ControlProblem,
    u: &[f64],
    w: &[f64],
    rhos: &[f64],
) -> Result<GateauxReport> {
    let base = solve_state(sys, &prob.state(u), None)?;
    let op = LinearizedOperator::assemble(sys, &base.eta, prob.nu, prob.alpha);
    let mut rhs = vec![0.0; sys.m];
    rhs[..w.len()].copy_from_slice(w);
    let z = op.solve_linearized(&rhs)?;
    let j0 = cost(u, &base.eta, &prob.cost);
    let mismatch: Vec<f64> = base.eta.iter().zip(&prob.cost.d).map(|(e, d)| e - d).collect();
    let dj = dot(&z, &mismatch) + prob.cost.lambda_reg * dot(u, w);
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for &rho in rhos {
        let u_rho: Vec<f64> = u.iter().zip(w).map(|(a, b)| a + rho * b).collect();
        match solve_state(sys, &prob.state(&u_rho), Some(&base.eta)) {
            Ok(sol) => {
                let r: Vec<f64> = (0..sys.m)
                    .map(|k| (sol.eta[k] - base.eta[k]) / rho - z[k])
                    .collect();
                let j = cost(&u_rho, &sol.eta, &prob.cost);
                rows.push(GateauxRow {
                    rho,
                    dr_norm: sys.d_norm(&r),
                    cost_remainder: (j - j0 - rho * dj).abs() / rho,
                });
            }
            Err(_) => failed.push(rho),
        }
    }
    let x: Vec<f64> = rows.iter().map(|r| r.rho).collect();
    let dr: Vec<f64> = rows.iter().map(|r| r.dr_norm).collect();
    let cr: Vec<f64> = rows.iter().map(|r| r.cost_remainder).collect();
    Ok(GateauxReport {
        dr_slope: loglog_slope(&x, &dr),
        cost_slope: loglog_slope(&x, &cr),
        rows,
        failed,
        directional_derivative: dj,
        dz_norm: sys.d_norm(&z),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub du_norm: f64,
    pub dy_d_norm: f64,
    /// `ν‖D(y₁ − y₂)‖₂ / ‖u₁ − u₂‖₂`.
    pub h1_ratio: f64,
    /// `‖Pσ(y₁ − y₂)‖₂` over the right-hand side of the `H²` Lipschitz
    /// estimate, `(1 + α + (α/ν³)s₁^{3/2})‖D(y₁ − y₂)‖₂ + (α/ν)‖u₁ − u₂‖₂`.
    pub v2_ratio: f64,
    /// `(‖u₂‖₂ + α‖curl u₂‖₂)/ν²`.
    pub q: f64,
}

pub fn lipschitz_check(
    sys: &ReducedSystem,
    nu: f64,
    alpha: f64,
    u1: &[f64],
    u2: &[f64],
) -> Result<LipschitzReport> {
    let s1 = solve_state(sys, &StateProblem::new(nu, alpha, u1.to_vec()), None)?;
    let s2 = solve_state(sys, &StateProblem::new(nu, alpha, u2.to_vec()), None)?;
    let dy: Vec<f64> = s1.eta.iter().zip(&s2.eta).map(|(a, b)| a - b).collect();
    let du: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| a - b).collect();
    let du_norm = norm2(&du);
    let dy_d = sys.d_norm(&dy);
    let psigma = sys
        .weights(alpha)
        .iter()
        .zip(&dy)
        .map(|(w, e)| (w * e) * (w * e))
        .sum::<f64>()
        .sqrt();
    let size1 = control_size(sys, alpha, u1);
    let rhs = (1.0 + alpha + alpha / nu.powi(3) * size1.powf(1.5)) * dy_d + alpha / nu * du_norm;
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    Ok(LipschitzReport {
        du_norm,
        dy_d_norm: dy_d,
        h1_ratio: ratio(nu * dy_d, du_norm),
        v2_ratio: ratio(psigma, rhs),
        q: control_size(sys, alpha, u2) / (nu * nu),
    })
}
