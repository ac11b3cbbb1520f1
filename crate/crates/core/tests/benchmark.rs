//! Studies on the default ellipse mesh and on refinement ladders.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slipctl_core::continuation::verify_ns_limit_assembly;
use slipctl_core::control::{AdmissibleSet, ControlProblem, CostSpec};
use slipctl_core::linearized::LinearizedOperator;
use slipctl_core::mesh::DomainSpec;
use slipctl_core::sensitivity::{gateaux_check, lipschitz_check};
use slipctl_core::sparse::norm2;
use slipctl_core::state::{solve_state, state_estimates, transport_residual, EstimateConstants, SolverOptions, StateProblem};
use slipctl_core::workbench::Workbench;
use std::sync::OnceLock;

fn bench() -> &'static Workbench {
    static WB: OnceLock<Workbench> = OnceLock::new();
    WB.get_or_init(|| Workbench::ellipse(&DomainSpec::ellipse(2.0, 1.0, 0.09), 32).unwrap())
}

fn coarse() -> &'static Workbench {
    static WB: OnceLock<Workbench> = OnceLock::new();
    WB.get_or_init(|| Workbench::ellipse(&DomainSpec::ellipse(2.0, 1.0, 0.18), 32).unwrap())
}

fn benchmark_control() -> Vec<f64> {
    (0..8).map(|k| 2.0 / (1.0 + k as f64)).collect()
}

fn random_control(rng: &mut ChaCha8Rng, n: usize, norm: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s = norm / norm2(&v);
    v.iter().map(|x| x * s).collect()
}

#[test]
fn transport_residual_does_not_grow_with_modes() {
    let wb = bench();
    let u = benchmark_control();
    let mut out = Vec::new();
    for m in [8, 16, 32] {
        let sys = wb.sys.truncated(m);
        let basis = wb.basis.truncated(m);
        let prob = StateProblem::new(1.0, 0.1, u.clone());
        let sol = solve_state(&sys, &prob, None).unwrap();
        out.push((transport_residual(&wb.disc, &basis, &prob, &sol), sys.curl_sigma_norm(0.1, &sol.eta)));
    }
    eprintln!("transport residual vs m: {out:?}");
    for w in out.windows(2) {
        assert!(w[1].0 <= w[0].0, "{out:?}");
    }
}

#[test]
fn curl_sigma_ratio_is_viscosity_independent() {
    let wb = bench();
    let u: Vec<f64> = benchmark_control().iter().map(|v| 0.05 * v).collect();
    let consts = EstimateConstants { s2: 1.0, c_k: 1.0 };
    let ratios: Vec<f64> = [1.0, 0.5, 0.25]
        .iter()
        .map(|&nu| {
            let prob = StateProblem::new(nu, 0.1, u.clone());
            let sol = solve_state(&wb.sys, &prob, None).unwrap();
            state_estimates(&wb.sys, &prob, &sol, consts).curl_sigma_ratio
        })
        .collect();
    eprintln!("nu ||curl sigma|| / (|u| + alpha |curl u|): {ratios:?}");
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    assert!(lo > 0.0 && hi / lo < 2.0, "{ratios:?}");
}

#[test]
fn lipschitz_ratio_is_bounded_and_mesh_stable() {
    let worst = |wb: &Workbench| {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let u1 = random_control(&mut rng, 8, 0.3);
            let u2 = random_control(&mut rng, 8, 0.3);
            let r = lipschitz_check(&wb.sys, 1.0, 0.1, &u1, &u2).unwrap();
            assert!(r.q < 0.5, "{r:?}");
            worst = worst.max(r.h1_ratio);
        }
        worst
    };
    let (fine, coarse) = (worst(bench()), worst(coarse()));
    eprintln!("Lipschitz ratio: fine {fine}, coarse {coarse}");
    assert!(fine.is_finite() && fine > 0.0);
    assert!((fine - coarse).abs() <= 0.05 * fine, "fine {fine}, coarse {coarse}");

    let u = benchmark_control();
    let same = lipschitz_check(&bench().sys, 1.0, 0.1, &u, &u).unwrap();
    assert_eq!(same.du_norm, 0.0);
    assert_eq!(same.dy_d_norm, 0.0);
}

#[test]
fn linearized_solution_ratio_is_mesh_stable() {
    let ratio = |wb: &Workbench| {
        let u: Vec<f64> = benchmark_control().iter().map(|v| 0.1 * v).collect();
        let sol = solve_state(&wb.sys, &StateProblem::new(1.0, 0.1, u), None).unwrap();
        let op = LinearizedOperator::assemble(&wb.sys, &sol.eta, 1.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        (0..10)
            .map(|_| {
                let w = random_control(&mut rng, wb.sys.m, 1.0);
                let z = op.solve_linearized(&w).unwrap();
                op.h1_ratio(&wb.sys, &z, &w)
            })
            .fold(0.0f64, f64::max)
    };
    let (fine, coarse) = (ratio(bench()), ratio(coarse()));
    eprintln!("linearized ratio: fine {fine}, coarse {coarse}");
    assert!((fine - coarse).abs() <= 0.05 * fine);
}

#[test]
fn gateaux_remainders_are_first_order_on_the_default_mesh() {
    let wb = bench();
    let m = wb.sys.m;
    let d: Vec<f64> = (0..m).map(|k| if k < 16 { 1.0 / (1.0 + k as f64) } else { 0.0 }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = random_control(&mut rng, 8, 1.0);
    let rhos = [1e-1, 1e-2, 1e-3, 1e-4];
    for (alpha, u) in [(0.0, benchmark_control()), (0.1, vec![0.0; 8]), (0.2, benchmark_control())] {
        let prob = ControlProblem {
            nu: 1.0,
            alpha,
            set: AdmissibleSet::new(8, 5.0).unwrap(),
            cost: CostSpec::new(d.clone(), 0.0, 0.01).unwrap(),
            state_options: SolverOptions::default(),
        };
        let r = gateaux_check(&wb.sys, &prob, &u, &w, &rhos).unwrap();
        eprintln!("alpha {alpha}: slopes {} {}", r.dr_slope, r.cost_slope);
        assert!(r.failed.is_empty());
        assert!((0.9..=1.1).contains(&r.dr_slope), "{r:?}");
        assert!((0.9..=1.1).contains(&r.cost_slope), "{r:?}");
    }
}

#[test]
fn rotational_and_convective_forms_agree_under_refinement() {
    let eta = [1.0, -0.5, 0.25, 0.4, -0.2];
    let gaps: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&h| {
            let wb = Workbench::ellipse(&DomainSpec::ellipse(2.0, 1.0, h), eta.len()).unwrap();
            verify_ns_limit_assembly(&wb.disc, &wb.basis, &wb.sys, &eta)
        })
        .collect();
    eprintln!("rotational vs convective: {gaps:?}");
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] < 1e-2);
}
