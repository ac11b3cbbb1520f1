//! Acceptance suite on the default benchmark: ellipse with semi-axes 2 and 1,
//! about 1800 triangles, 32 modes, 8 control modes, ν = 1.
//!
//! Prints one PASS/FAIL line per criterion. Failures are reported, not
//! fatal, unless `ACCEPTANCE_STRICT=1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slipctl::RunConfig;
use slipctl_core::continuation::{run_control_sweep, run_state_sweep};
use slipctl_core::control::{
    evaluate, fd_directional_derivative, reduced_cost, solve_control, AdmissibleSet, ControlProblem,
    CostSpec, OptimizerOptions,
};
use slipctl_core::eigen::basis_identity_errors;
use slipctl_core::fem::{Discretization, Field};
use slipctl_core::idlab::{check_curl_trace, korn_constant, measure_constants, refinement_study};
use slipctl_core::linearized::LinearizedOperator;
use slipctl_core::mesh::{generate_ellipse_mesh, DomainSpec};
use slipctl_core::sensitivity::{gateaux_check, loglog_slope};
use slipctl_core::sparse::{dot, norm2};
use slipctl_core::state::{solve_state, state_estimates, EstimateConstants, SolverOptions, StateProblem};
use slipctl_core::workbench::Workbench;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

type Check = Result<(bool, String), String>;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

struct Suite {
    outcomes: Vec<Outcome>,
}

impl Suite {
    fn run(&mut self, id: usize, name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let result = f();
        self.finish(id, name, limit, start.elapsed(), result);
    }

    fn finish(&mut self, id: usize, name: &'static str, limit: Option<Duration>, elapsed: Duration, result: Check) {
        let (mut pass, mut detail) = match result {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(limit) = limit {
            if elapsed > limit {
                pass = false;
                detail.push_str(&format!("; runtime {:.1}s exceeds {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()));
            }
        }
        println!(
            "{} [{id:2}] {name}: {detail} ({:.2}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        self.outcomes.push(Outcome {
            id,
            name,
            pass,
            detail,
            elapsed,
        });
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn scaled(v: &[f64], norm: f64) -> Vec<f64> {
    let n = norm2(v);
    v.iter().map(|x| x * norm / n).collect()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

/// VI and KKT data of one converged control solve.
struct Optimality {
    label: String,
    vi_residual: f64,
    vi_scale: f64,
    ball_active: bool,
    kkt_collinearity: f64,
}

fn main() {
    let cfg = RunConfig::default();
    let (m_c, nu) = (cfg.m_c, cfg.nu);
    let control = cfg.control.clone();
    let mut suite = Suite { outcomes: Vec::new() };
    let mut optimality: Vec<Optimality> = Vec::new();
    println!(
        "benchmark: ellipse a={} b={} h={} m={} m_c={} nu={}",
        cfg.domain.a, cfg.domain.b, cfg.domain.h_target, cfg.m, m_c, nu
    );

    // Eigenbasis first: every other criterion runs on it.
    let start = Instant::now();
    let spec = DomainSpec::ellipse(cfg.domain.a, cfg.domain.b, cfg.domain.h_target);
    let wb = match Workbench::ellipse(&spec, cfg.m) {
        Ok(wb) => wb,
        Err(e) => {
            suite.finish(3, "eigenbasis identities", secs(60), start.elapsed(), Err(e.to_string()));
            println!("cannot continue without the eigenbasis");
            std::process::exit(1);
        }
    };
    let build = start.elapsed();
    let sys = &wb.sys;
    let m = sys.m;
    let triangles = wb.disc.mesh().triangles.len();

    suite.run(1, "energy orthogonality", secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst = 0.0f64;
        for alpha in [0.0, 0.1] {
            for _ in 0..100 {
                let eta = uniform(&mut rng, m);
                let n = norm2(&eta);
                worst = worst.max(sys.cross_pairing(alpha, &eta, &eta, &eta).abs() / (n * n * n));
            }
        }
        Ok((worst <= 1e-10, format!("max |N(eta,eta)·eta|/|eta|^3 = {worst:.2e} (tol 1e-10)")))
    });

    suite.run(2, "zero force gives zero state", None, || {
        let zero = vec![0.0; m_c];
        let sol = solve_state(sys, &StateProblem::new(nu, 0.1, zero.clone()), None).map_err(|e| e.to_string())?;
        let exact_zero = sol.eta.iter().all(|&v| v == 0.0);
        let offset = 0.375;
        let prob = ControlProblem {
            nu,
            alpha: 0.1,
            set: AdmissibleSet::new(m_c, cfg.radius).map_err(|e| e.to_string())?,
            cost: CostSpec::new(vec![0.0; m], offset, cfg.lambda_reg).map_err(|e| e.to_string())?,
            state_options: SolverOptions::default(),
        };
        let j = reduced_cost(sys, &prob, &zero, None).map_err(|e| e.to_string())?;
        Ok((
            exact_zero && j == offset,
            format!("eta == 0 exactly: {exact_zero}; J - offset = {:e}", j - offset),
        ))
    });

    {
        let (gram, stiff) = basis_identity_errors(&wb.disc, &wb.basis);
        let l1 = wb.basis.lambda[0];
        suite.finish(
            3,
            "eigenbasis identities",
            secs(60),
            build,
            Ok((
                gram <= 1e-10 && stiff <= 1e-8 && l1 > 0.0,
                format!(
                    "{triangles} triangles; |E'ME - I|max = {gram:.2e}, |E'KE - diag|/lmax = {stiff:.2e}, lambda_1 = {l1:.6}"
                ),
            )),
        );
    }

    let template = ControlProblem {
        nu,
        alpha: 0.1,
        set: AdmissibleSet::new(m_c, cfg.radius).expect("radius"),
        cost: CostSpec::new(
            {
                let mut d = vec![0.0; m];
                if let slipctl::config::TargetSpec::Explicit { coefficients } = &cfg.target {
                    d[..coefficients.len()].copy_from_slice(coefficients);
                }
                d
            },
            0.0,
            cfg.lambda_reg,
        )
        .expect("cost"),
        state_options: SolverOptions::default(),
    };

    suite.run(4, "Gateaux differentiability", secs(60), || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = scaled(&uniform(&mut rng, m_c), norm2(&control));
        let rhos = [1e-1, 1e-2, 1e-3, 1e-4];
        let r = gateaux_check(sys, &template, &control, &w, &rhos).map_err(|e| e.to_string())?;
        let ok = r.failed.is_empty()
            && (0.9..=1.1).contains(&r.dr_slope)
            && (0.9..=1.1).contains(&r.cost_slope);
        Ok((
            ok,
            format!("slope ||D r_rho|| = {:.4}, cost remainder slope = {:.4} (range [0.9, 1.1])", r.dr_slope, r.cost_slope),
        ))
    });

    suite.run(5, "adjoint duality", None, || {
        let base = solve_state(sys, &template.state(&control), None).map_err(|e| e.to_string())?;
        let op = LinearizedOperator::assemble(sys, &base.eta, nu, template.alpha);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let (f, w) = (uniform(&mut rng, m), uniform(&mut rng, m));
            let z = op.solve_linearized(&w).map_err(|e| e.to_string())?;
            let p = op.solve_adjoint(&f).map_err(|e| e.to_string())?;
            worst = worst.max((dot(&f, &z) - dot(&w, &p)).abs() / (norm2(&f) * norm2(&w)));
        }
        Ok((worst <= 1e-12, format!("max |(f,z) - (w,p)|/(|f||w|) = {worst:.2e} (tol 1e-12)")))
    });

    suite.run(6, "gradient against central differences", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut worst = 0.0f64;
        for _ in 0..2 {
            let u = scaled(&uniform(&mut rng, m_c), rng.random_range(0.5..2.0));
            let ev = evaluate(sys, &template, &u, None).map_err(|e| e.to_string())?;
            for _ in 0..3 {
                let w = scaled(&uniform(&mut rng, m_c), 1.0);
                let adjoint = dot(&ev.gradient, &w);
                let fd = fd_directional_derivative(sys, &template, &u, &w, 1e-4).map_err(|e| e.to_string())?;
                worst = worst.max((adjoint - fd).abs() / adjoint.abs().max(fd.abs()));
            }
        }
        Ok((worst <= 1e-4, format!("max relative error = {worst:.2e} (tol 1e-4, step 1e-4)")))
    });

    suite.run(7, "inverse-crime recovery", secs(300), || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let shape: Vec<f64> = (0..m_c)
            .map(|k| rng.random_range(-1.0..1.0) / (1.0 + k as f64))
            .collect();
        let u_true = scaled(&shape, 0.9 * cfg.radius);
        let alpha = 0.1;
        let d = solve_state(sys, &StateProblem::new(nu, alpha, u_true.clone()), None)
            .map_err(|e| e.to_string())?
            .eta;
        let prob = ControlProblem {
            alpha,
            cost: CostSpec::new(d, 0.0, 0.0).map_err(|e| e.to_string())?,
            ..template.clone()
        };
        let sol = solve_control(sys, &prob, &OptimizerOptions::default(), None).map_err(|e| e.to_string())?;
        let r = &sol.report;
        let j0 = r.trace[0].j;
        let err: Vec<f64> = sol.u.iter().zip(&u_true).map(|(a, b)| a - b).collect();
        if r.converged {
            optimality.push(Optimality {
                label: "inverse crime".into(),
                vi_residual: r.vi_residual,
                vi_scale: r.vi_scale,
                ball_active: r.ball_active,
                kkt_collinearity: r.kkt_collinearity,
            });
        }
        let reached = r.trace.iter().find(|t| t.j <= 1e-6 * j0).map(|t| t.iter);
        Ok((
            reached.is_some_and(|k| k <= 200),
            format!(
                "J {:.3e} -> {:.3e} (ratio {:.2e}, tol 1e-6); ratio 1e-6 reached at iteration {}, {} iterations in total; |u - u_true| = {:.2e}",
                j0,
                r.j,
                r.j / j0,
                reached.map_or("never".into(), |k| k.to_string()),
                r.iterations,
                norm2(&err)
            ),
        ))
    });

    suite.run(9, "vanishing-alpha state convergence", secs(120), || {
        let ladder = [0.2, 0.1, 0.05, 0.025, 0.0125, 0.0];
        let sweep = run_state_sweep(sys, nu, &control, &ladder, SolverOptions::default()).map_err(|e| e.to_string())?;
        let dist: Vec<f64> = sweep.records.iter().map(|r| r.h1_distance).collect();
        let all = sweep.records.iter().all(|r| r.converged);
        let ratio = dist[dist.len() - 1] / dist[0];
        Ok((
            all && strictly_decreasing(&dist) && ratio <= 0.1,
            format!("|y_a - y_0|_H1 = [{}]; final/initial = {ratio:.3} (tol 0.1)", fmt_list(&dist)),
        ))
    });

    suite.run(10, "stability of minima", secs(900), || {
        let ladder = cfg.alpha.clone();
        let sweep = run_control_sweep(sys, &template, &ladder, &cfg.optimizer).map_err(|e| e.to_string())?;
        let gaps = sweep.gaps();
        let j0 = sweep.limit.j;
        let alphas: Vec<f64> = sweep.records.iter().map(|r| r.alpha).collect();
        let ud: Vec<f64> = sweep.records.iter().map(|r| r.u_distance).collect();
        let pd: Vec<f64> = sweep.records.iter().map(|r| r.p_distance).collect();
        for r in sweep.records.iter().chain(std::iter::once(&sweep.limit)).filter(|r| r.converged) {
            optimality.push(Optimality {
                label: format!("sweep alpha = {}", r.alpha),
                vi_residual: r.vi_residual,
                vi_scale: r.vi_scale,
                ball_active: false,
                kkt_collinearity: 0.0,
            });
        }
        let converged = sweep.records.iter().all(|r| r.converged) && sweep.limit.converged;
        let tail = &gaps[gaps.len().saturating_sub(3)..];
        let final_ratio = gaps[gaps.len() - 1] / j0;
        // A trend: the last distance is below the first and the log-log fit rises with α.
        let trend = |v: &[f64]| v[v.len() - 1] < v[0] && loglog_slope(&alphas, v) > 0.0;
        let ok = converged && strictly_decreasing(tail) && final_ratio <= 0.05 && trend(&ud) && trend(&pd);
        Ok((
            ok,
            format!(
                "J_0 = {j0:.6e} (cold start {:.6e}); gaps = [{}]; final gap/J_0 = {final_ratio:.2e} (tol 5e-2); |u_a - u_0| slope {:.2}, |p_a - p_0| slope {:.2}",
                sweep.cold_start_j0,
                fmt_list(&gaps),
                loglog_slope(&alphas, &ud),
                loglog_slope(&alphas, &pd)
            ),
        ))
    });

    suite.run(8, "optimality conditions", None, || {
        let d: Vec<f64> = template.cost.d.iter().map(|v| 20.0 * v).collect();
        let prob = ControlProblem {
            set: AdmissibleSet::new(m_c, 0.5).map_err(|e| e.to_string())?,
            cost: CostSpec::new(d, 0.0, cfg.lambda_reg).map_err(|e| e.to_string())?,
            ..template.clone()
        };
        let sol = solve_control(sys, &prob, &cfg.optimizer, None).map_err(|e| e.to_string())?;
        let r = &sol.report;
        if r.converged {
            optimality.push(Optimality {
                label: "active ball R = 0.5".into(),
                vi_residual: r.vi_residual,
                vi_scale: r.vi_scale,
                ball_active: r.ball_active,
                kkt_collinearity: r.kkt_collinearity,
            });
        }
        let vi_worst = optimality
            .iter()
            .map(|o| o.vi_residual / o.vi_scale)
            .fold(f64::INFINITY, f64::min);
        let active: Vec<&Optimality> = optimality.iter().filter(|o| o.ball_active).collect();
        let kkt_worst = active.iter().map(|o| o.kkt_collinearity).fold(0.0, f64::max);
        let failing: Vec<&str> = optimality
            .iter()
            .filter(|o| o.vi_residual < -1e-8 * o.vi_scale || (o.ball_active && o.kkt_collinearity > 1e-6))
            .map(|o| o.label.as_str())
            .collect();
        Ok((
            optimality.len() >= 8 && !active.is_empty() && failing.is_empty(),
            format!(
                "{} converged solves, min VI/scale = {vi_worst:.2e} (tol -1e-8); {} ball-active, max collinearity = {kkt_worst:.2e} (tol 1e-6){}",
                optimality.len(),
                active.len(),
                if failing.is_empty() { String::new() } else { format!("; failing: {}", failing.join(", ")) }
            ),
        ))
    });

    suite.run(11, "a priori energy estimate", None, || {
        let consts = measure_constants(&wb.disc, &wb.basis, sys, 0, 1).map_err(|e| e.to_string())?;
        let c = EstimateConstants {
            s2: consts.s2,
            c_k: consts.c_k,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut worst, mut count) = (0.0f64, 0);
        for nu in [1.0, 0.5] {
            for _ in 0..20 {
                let u = scaled(&uniform(&mut rng, m_c), rng.random_range(0.1..2.0));
                let prob = StateProblem::new(nu, 0.1, u);
                let sol = solve_state(sys, &prob, None).map_err(|e| e.to_string())?;
                let est = state_estimates(sys, &prob, &sol, c);
                worst = worst.max(est.d_norm / est.h1_bound);
                count += est.h1_bound_holds as usize;
            }
        }
        Ok((
            count == 40,
            format!(
                "kappa2 = {:.4} (S2 = {:.4}, C_K = {:.4}); bound holds {count}/40, max |Dy|/(kappa2 |u|/nu) = {worst:.3}",
                consts.kappa2, consts.s2, consts.c_k
            ),
        ))
    });

    suite.run(12, "identity suite", secs(600), || {
        let circle = DomainSpec::ellipse(1.0, 1.0, cfg.domain.h_target);
        let mesh = generate_ellipse_mesh(&circle).map_err(|e| e.to_string())?;
        let disc = Discretization::new(&mesh, &circle).map_err(|e| e.to_string())?;
        let rot = Field::interpolate_velocity(&disc.space, |x| [-x[1], x[0]]);
        let trace = check_curl_trace(&disc, &rot.values).max_abs;
        let (ck_circle, mu_circle) = korn_constant(&disc).map_err(|e| e.to_string())?;
        let (ck_ellipse, _) = korn_constant(&wb.disc).map_err(|e| e.to_string())?;
        let contrast = ck_circle / ck_ellipse;
        let study = refinement_study(cfg.domain.a, cfg.domain.b, &[0.2, 0.1, 0.05], 0.1, 5).map_err(|e| e.to_string())?;
        let slopes = [study.identity1_slope, study.identity1_alpha0_slope, study.identity2_slope];
        let ok = trace <= 1e-10 && slopes.iter().all(|s| *s >= 0.7) && contrast >= 10.0;
        Ok((
            ok,
            format!(
                "rotation curl trace {trace:.2e} (tol 1e-10); slopes identity1 {:.2}, identity1(alpha=0) {:.2}, identity2 {:.2} (min 0.7); C_K circle/ellipse = {contrast:.3e} (circle mu_min = {mu_circle:.1e}, min 10)",
                slopes[0], slopes[1], slopes[2]
            ),
        ))
    });

    suite.run(13, "sweep determinism", None, || {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let run = |name: &str| -> Result<std::path::PathBuf, String> {
            let out = tmp.path().join(name);
            let status = Command::new(env!("CARGO_BIN_EXE_slipctl"))
                .args(["sweep", "--out"])
                .arg(&out)
                .stderr(std::process::Stdio::null())
                .stdout(std::process::Stdio::null())
                .status()
                .map_err(|e| e.to_string())?;
            if !status.success() {
                return Err(format!("slipctl sweep exited with {status}"));
            }
            Ok(out.join("sweep"))
        };
        let (a, b) = (run("a")?, run("b")?);
        let mut compared = Vec::new();
        let mut differing = Vec::new();
        for name in ["sweep.csv", "state_sweep.csv", "controls.csv", "summary.json"] {
            let read = |dir: &Path| std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"));
            if read(&a)? != read(&b)? {
                differing.push(name);
            }
            compared.push(name);
        }
        Ok((
            differing.is_empty(),
            format!("compared {} byte-for-byte; differing: {:?}", compared.join(", "), differing),
        ))
    });

    suite.outcomes.sort_by_key(|o| o.id);
    let passed = suite.outcomes.iter().filter(|o| o.pass).count();
    let total: f64 = suite.outcomes.iter().map(|o| o.elapsed.as_secs_f64()).sum();
    println!("acceptance: {passed}/{} criteria passed ({total:.1}s)", suite.outcomes.len());
    for o in suite.outcomes.iter().filter(|o| !o.pass) {
        println!("  failed [{}] {}: {}", o.id, o.name, o.detail);
    }
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < suite.outcomes.len() {
        std::process::exit(1);
    }
}
