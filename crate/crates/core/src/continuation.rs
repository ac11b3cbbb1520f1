//! Vanishing-viscoelasticity studies: state and control solves along a
//! decreasing `α` ladder, compared with the Navier–Stokes limit `α = 0`.

use crate::control::{solve_control, ControlProblem, ControlSolution, OptimizerOptions};
use crate::eigen::ModalBasis;
use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::reduced::{trilinear_b, ReducedSystem};
use crate::sparse::norm2;
use crate::state::{control_size, solve_state, SolverOptions, StateProblem};
use serde::Serialize;

/// Positive part of a ladder, checked to be strictly decreasing. A trailing
/// zero is accepted and dropped since the limit solve always runs.
pub fn positive_ladder(alphas: &[f64]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = alphas.to_vec();
    if out.last() == Some(&0.0) {
        out.pop();
    }
    if out.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::Validation("alpha ladder entries must be positive (only a final 0 is allowed)".into()));
    }
    if out.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Validation("alpha ladder must be strictly decreasing".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSweepRecord {
    pub alpha: f64,
    pub eta: Vec<f64>,
    /// `‖y_α − y_0‖_{H¹}`.
    pub h1_distance: f64,
    pub curl_sigma_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSweep {
    pub records: Vec<StateSweepRecord>,
    pub limit: StateSweepRecord,
}

/// States for a fixed control along the ladder, each warm-started from the
/// previous `α`; the limit uses unit weights.
pub fn run_state_sweep(
    sys: &ReducedSystem,
    nu: f64,
    u: &[f64],
    alphas: &[f64],
    options: SolverOptions,
) -> Result<StateSweep> {
    let ladder = positive_ladder(alphas)?;
    let problem = |alpha: f64| StateProblem {
        nu,
        alpha,
        u: u.to_vec(),
        options,
    };
    let zero = solve_state(sys, &problem(0.0), None)?;
    let mut records = Vec::with_capacity(ladder.len());
    let mut warm: Option<Vec<f64>> = None;
    for &alpha in &ladder {
        let rec = match solve_state(sys, &problem(alpha), warm.as_deref()) {
            Ok(sol) => {
                let diff: Vec<f64> = sol.eta.iter().zip(&zero.eta).map(|(a, b)| a - b).collect();
                let rec = StateSweepRecord {
                    alpha,
                    h1_distance: sys.h1_norm(&diff),
                    curl_sigma_norm: sys.curl_sigma_norm(alpha, &sol.eta),
                    eta: sol.eta,
                    converged: true,
                };
                warm = Some(rec.eta.clone());
                rec
            }
            Err(_) => StateSweepRecord {
                alpha,
                eta: Vec::new(),
                h1_distance: f64::NAN,
                curl_sigma_norm: f64::NAN,
                converged: false,
            },
        };
        records.push(rec);
    }
    Ok(StateSweep {
        records,
        limit: StateSweepRecord {
            alpha: 0.0,
            h1_distance: 0.0,
            curl_sigma_norm: sys.curl_sigma_norm(0.0, &zero.eta),
            eta: zero.eta,
            converged: true,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlSweepRecord {
    pub alpha: f64,
    pub u: Vec<f64>,
    pub eta: Vec<f64>,
    pub p: Vec<f64>,
    pub j: f64,
    /// `|J_α − J_0|`.
    pub gap: f64,
    pub u_distance: f64,
    pub p_distance: f64,
    pub y_h1_distance: f64,
    pub q: f64,
    pub iterations: usize,
    pub vi_residual: f64,
    pub vi_scale: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub records: Vec<ControlSweepRecord>,
    pub limit: ControlSweepRecord,
    /// `J_0` from an independent cold start.
    pub cold_start_j0: f64,
}

impl SweepResult {
    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gap).collect()
    }
}

fn record(sys: &ReducedSystem, nu: f64, alpha: f64, sol: &ControlSolution) -> ControlSweepRecord {
    ControlSweepRecord {
        alpha,
        u: sol.u.clone(),
        eta: sol.eta.clone(),
        p: sol.p.clone(),
        j: sol.report.j,
        gap: 0.0,
        u_distance: 0.0,
        p_distance: 0.0,
        y_h1_distance: 0.0,
        q: control_size(sys, alpha, &sol.u) / (nu * nu),
        iterations: sol.report.iterations,
        vi_residual: sol.report.vi_residual,
        vi_scale: sol.report.vi_scale,
        converged: sol.report.converged,
    }
}

/// Control problems along the ladder with warm starts in decreasing `α`,
/// finishing at `α = 0`. `template.alpha` is ignored.
pub fn run_control_sweep(
    sys: &ReducedSystem,
    template: &ControlProblem,
    alphas: &[f64],
    opts: &OptimizerOptions,
) -> Result<SweepResult> {
    let ladder = positive_ladder(alphas)?;
    let nu = template.nu;
    let at = |alpha: f64| ControlProblem {
        alpha,
        ..template.clone()
    };
    let mut records = Vec::with_capacity(ladder.len());
    let mut warm: Option<Vec<f64>> = None;
    for &alpha in &ladder {
        match solve_control(sys, &at(alpha), opts, warm.as_deref()) {
            Ok(sol) => {
                warm = Some(sol.u.clone());
                records.push(record(sys, nu, alpha, &sol));
            }
            Err(_) => records.push(ControlSweepRecord {
                alpha,
                u: Vec::new(),
                eta: Vec::new(),
                p: Vec::new(),
                j: f64::NAN,
                gap: f64::NAN,
                u_distance: f64::NAN,
                p_distance: f64::NAN,
                y_h1_distance: f64::NAN,
                q: f64::NAN,
                iterations: 0,
                vi_residual: f64::NAN,
                vi_scale: f64::NAN,
                converged: false,
            }),
        }
    }
    let zero = solve_control(sys, &at(0.0), opts, warm.as_deref())?;
    let cold = solve_control(sys, &at(0.0), opts, None)?;
    let limit = record(sys, nu, 0.0, &zero);
    let dist = |a: &[f64], b: &[f64]| norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
    for r in records.iter_mut().filter(|r| !r.u.is_empty()) {
        r.gap = (r.j - limit.j).abs();
        r.u_distance = dist(&r.u, &limit.u);
        r.p_distance = dist(&r.p, &limit.p);
        let dy: Vec<f64> = r.eta.iter().zip(&limit.eta).map(|(a, b)| a - b).collect();
        r.y_h1_distance = sys.h1_norm(&dy);
    }
    Ok(SweepResult {
        records,
        limit,
        cold_start_j0: cold.report.j,
    })
}

/// `max_k |Σ_ij η_iη_j C_ijk − b(y, y, e_k)|` with unit weights: the
/// rotational and convective forms differ by `(∇|y|²/2, e_k)`, which only
/// vanishes up to the discrete divergence error.
pub fn verify_ns_limit_assembly(
    disc: &Discretization,
    basis: &ModalBasis,
    sys: &ReducedSystem,
    eta: &[f64],
) -> f64 {
    let n = sys.cross_vector(0.0, eta, eta);
    let y = basis.combine(eta);
    (0..sys.m)
        .map(|k| (n[k] - trilinear_b(disc, &y, &y, &basis.e[k])).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{AdmissibleSet, CostSpec};
    use crate::testutil::small;

    const LADDER: [f64; 6] = [0.2, 0.1, 0.05, 0.025, 0.0125, 0.0];

    #[test]
    fn ladder_validation() {
        assert_eq!(positive_ladder(&LADDER).unwrap().len(), 5);
        assert!(positive_ladder(&[0.1, 0.2]).is_err());
        assert!(positive_ladder(&[0.1, 0.0, 0.05]).is_err());
        assert!(positive_ladder(&[0.1, 0.1]).is_err());
    }

    #[test]
    fn zero_control_state_sweep_is_trivial() {
        let sys = &small().sys;
        let sweep = run_state_sweep(sys, 1.0, &[0.0; 3], &LADDER, SolverOptions::default()).unwrap();
        assert!(sweep.records.iter().all(|r| r.h1_distance == 0.0 && r.converged));
    }

    #[test]
    fn states_converge_as_alpha_vanishes() {
        let sys = &small().sys;
        let u: Vec<f64> = (0..6).map(|k| 2.0 / (1.0 + k as f64)).collect();
        let sweep = run_state_sweep(sys, 1.0, &u, &LADDER, SolverOptions::default()).unwrap();
        let d: Vec<f64> = sweep.records.iter().map(|r| r.h1_distance).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
        assert!(d[4] <= 0.1 * d[0]);
        let cs: Vec<f64> = sweep.records.iter().map(|r| r.curl_sigma_norm).collect();
        assert!(cs.iter().all(|v| *v <= 2.0 * sweep.limit.curl_sigma_norm));
    }

    #[test]
    fn trivial_cost_sweep_has_zero_gaps() {
        let sys = &small().sys;
        let template = ControlProblem {
            nu: 1.0,
            alpha: 0.0,
            set: AdmissibleSet::new(4, 2.0).unwrap(),
            cost: CostSpec::new(vec![0.0; sys.m], 0.0, 0.1).unwrap(),
            state_options: SolverOptions::default(),
        };
        let res = run_control_sweep(sys, &template, &LADDER, &OptimizerOptions::default()).unwrap();
        assert!(res.records.iter().all(|r| r.gap == 0.0 && r.u.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn ns_limit_assembly_agrees_with_convective_form() {
        let wb = small();
        let zero = vec![0.0; wb.sys.m];
        assert_eq!(verify_ns_limit_assembly(&wb.disc, &wb.basis, &wb.sys, &zero), 0.0);
        let mut eta = zero.clone();
        eta[0] = 1.0;
        let d = verify_ns_limit_assembly(&wb.disc, &wb.basis, &wb.sys, &eta);
        assert!(d <= 1e-2, "{d:e}");
        // Against φ = y the tensor pairing vanishes exactly.
        let eta: Vec<f64> = (0..wb.sys.m).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let n = wb.sys.cross_vector(0.0, &eta, &eta);
        let e: f64 = n.iter().zip(&eta).map(|(a, b)| a * b).sum();
        assert!(e.abs() <= 1e-12);
    }
}
