//! Subcommand drivers. Each writes one self-contained run directory.

use crate::config::{RunConfig, TargetSpec};
use crate::error::{CliError, CliResult, Context};
use crate::output::{column_rows, Cell, RunDir};
use crate::svg::{mesh_plot, Plot, Scale, Series};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use slipctl_core::continuation::{run_control_sweep, run_state_sweep};
use slipctl_core::control::{solve_control, AdmissibleSet, ControlProblem, CostSpec, OptimizerIterate};
use slipctl_core::eigen::{
    basis_identity_errors, compute_eigenbasis, load_basis, max_normal_trace, save_basis, verify_psigma_identity,
};
use slipctl_core::fem::{Discretization, Field};
use slipctl_core::idlab::{
    check_curl_trace, check_rm2_bound, check_sigma_psigma, check_trilinear_identities, korn_constant,
    measure_constants, refinement_study, ConstantsReport,
};
use slipctl_core::mesh::{generate_ellipse_mesh, load_msh, write_msh, DomainKind, DomainSpec, Mesh};
use slipctl_core::reduced::ReducedSystem;
use slipctl_core::sensitivity::gateaux_check;
use slipctl_core::state::{
    solve_state, state_diagnostics, state_estimates, transport_residual, EstimateConstants, StateProblem,
};
use slipctl_core::workbench::Workbench;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Mesh,
    Eig,
    State,
    Gateaux,
    Control,
    Sweep,
    Idlab,
    Constants,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Eig => "eig",
            Command::State => "state",
            Command::Gateaux => "gateaux",
            Command::Control => "control",
            Command::Sweep => "sweep",
            Command::Idlab => "idlab",
            Command::Constants => "constants",
        }
    }
}

/// Runs `cmd` and returns the run directory.
pub fn run(cmd: Command, cfg: &RunConfig) -> CliResult<PathBuf> {
    cfg.validate()?;
    if cmd == Command::Sweep && cfg.alpha.last() != Some(&0.0) {
        return Err(CliError::config("alpha", "a sweep needs a list ending in 0"));
    }
    let dir = RunDir::create(&cfg.out, cmd.name(), cfg)?;
    match cmd {
        Command::Mesh => mesh_cmd(cfg, &dir)?,
        Command::Eig => eig_cmd(cfg, &dir)?,
        Command::State => state_cmd(cfg, &dir)?,
        Command::Gateaux => gateaux_cmd(cfg, &dir)?,
        Command::Control => control_cmd(cfg, &dir)?,
        Command::Sweep => sweep_cmd(cfg, &dir)?,
        Command::Idlab => idlab_cmd(cfg, &dir)?,
        Command::Constants => constants_cmd(cfg, &dir)?,
    }
    Ok(dir.path)
}

fn progress(msg: &str) {
    eprintln!("slipctl: {msg}");
}

fn domain(cfg: &RunConfig) -> CliResult<(Mesh, DomainSpec)> {
    match &cfg.domain.mesh {
        Some(path) => {
            let mesh = load_msh(path).context(|| format!("loading mesh {}", path.display()))?;
            Ok((mesh, DomainSpec::external()))
        }
        None => {
            let d = &cfg.domain;
            let spec = DomainSpec::ellipse(d.a, d.b, d.h_target);
            let mesh = generate_ellipse_mesh(&spec).context(|| "generating the ellipse mesh".into())?;
            Ok((mesh, spec))
        }
    }
}

fn cache_file(dir: &Path, hash: &str, m: usize) -> PathBuf {
    dir.join(format!("eig-{}-m{m}.bin", &hash[..hash.len().min(16)]))
}

/// Discretization and basis, reading and filling the eigenbasis cache when
/// one is configured.
fn workbench(cfg: &RunConfig) -> CliResult<Workbench> {
    let (mesh, spec) = domain(cfg)?;
    let disc = Discretization::new(&mesh, &spec).context(|| "building the discretization".into())?;
    let hash = mesh.hash();
    if let Some(cache) = &cfg.cache {
        let file = cache_file(cache, &hash, cfg.m);
        if file.is_file() {
            let basis = load_basis(&file, &hash).context(|| format!("reading eigenbasis cache {}", file.display()))?;
            Workbench::check_basis(&disc, &basis, cfg.m).context(|| format!("eigenbasis cache {}", file.display()))?;
            progress(&format!("eigenbasis from cache {}", file.display()));
            return Ok(Workbench::with_basis(disc, basis.truncated(cfg.m)));
        }
    }
    progress(&format!("computing {} slip-Stokes modes on {} triangles", cfg.m, mesh.triangles.len()));
    let basis = compute_eigenbasis(&disc, cfg.m).context(|| "computing the eigenbasis".into())?;
    if let Some(cache) = &cfg.cache {
        std::fs::create_dir_all(cache).map_err(|source| CliError::Output {
            file: cache.clone(),
            source,
        })?;
        let file = cache_file(cache, &hash, cfg.m);
        save_basis(&file, &basis).context(|| format!("writing eigenbasis cache {}", file.display()))?;
    }
    Ok(Workbench::with_basis(disc, basis))
}

fn target(cfg: &RunConfig, sys: &ReducedSystem, alpha: f64) -> CliResult<Vec<f64>> {
    let mut d = vec![0.0; sys.m];
    match &cfg.target {
        TargetSpec::Zero => {}
        TargetSpec::Explicit { coefficients } => d[..coefficients.len()].copy_from_slice(coefficients),
        TargetSpec::FromControl { coefficients } => {
            let prob = StateProblem {
                options: cfg.solver,
                ..StateProblem::new(cfg.nu, alpha, coefficients.clone())
            };
            d = solve_state(sys, &prob, None).context(|| "solving the state of the target control".into())?.eta;
        }
    }
    Ok(d)
}

fn control_problem(cfg: &RunConfig, sys: &ReducedSystem, alpha: f64) -> CliResult<ControlProblem> {
    let d = target(cfg, sys, alpha)?;
    Ok(ControlProblem {
        nu: cfg.nu,
        alpha,
        set: AdmissibleSet::new(cfg.m_c, cfg.radius).context(|| "admissible set".into())?,
        cost: CostSpec::new(d, 0.0, cfg.lambda_reg).context(|| "cost functional".into())?,
        state_options: cfg.solver,
    })
}

fn estimate_constants(wb: &Workbench, cfg: &RunConfig, samples: usize) -> CliResult<ConstantsReport> {
    progress("measuring domain constants");
    measure_constants(&wb.disc, &wb.basis, &wb.sys, samples, cfg.seed).context(|| "measuring constants".into())
}

// ---------------------------------------------------------------------------

fn mesh_cmd(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let (mesh, _) = domain(cfg)?;
    dir.write_json("summary.json", &mesh.stats())?;
    dir.write_text("mesh.msh", &write_msh(&mesh))?;
    dir.write_text("mesh.svg", &mesh_plot(&mesh.nodes, &mesh.triangles))?;
    let lengths = mesh.edge_lengths();
    dir.write_csv("edge_lengths.csv", &["edge", "length"], &column_rows(&[&lengths]))
}

#[derive(Serialize)]
struct EigSummary {
    m: usize,
    lambda_1: f64,
    lambda_m: f64,
    gram_error: f64,
    stiffness_error: f64,
    max_normal_trace: f64,
    max_residual: f64,
    psigma_alpha: f64,
    psigma_max: f64,
    mesh_hash: String,
}

fn eig_cmd(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let wb = workbench(cfg)?;
    let b = &wb.basis;
    let (gram, stiff) = basis_identity_errors(&wb.disc, b);
    let alpha = cfg.first_alpha();
    let psigma = verify_psigma_identity(&wb.disc, b, alpha);
    save_basis(&dir.file("eigenbasis.bin"), b).context(|| "writing eigenbasis.bin".into())?;
    dir.write_csv(
        "eigenvalues.csv",
        &["mode", "lambda", "residual", "psigma_error"],
        &column_rows(&[&b.lambda, &b.residuals, &psigma]),
    )?;
    let modes: Vec<f64> = (1..=b.m()).map(|k| k as f64).collect();
    dir.write_text(
        "eigenvalues.svg",
        &Plot {
            title: "slip-Stokes eigenvalues",
            x_label: "mode",
            y_label: "lambda",
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
            series: vec![Series {
                label: "lambda_k",
                x: &modes,
                y: &b.lambda,
            }],
        }
        .render(),
    )?;
    dir.write_json(
        "summary.json",
        &EigSummary {
            m: b.m(),
            lambda_1: b.lambda[0],
            lambda_m: b.lambda[b.m() - 1],
            gram_error: gram,
            stiffness_error: stiff,
            max_normal_trace: max_normal_trace(&wb.disc, b),
            max_residual: b.residuals.iter().copied().fold(0.0, f64::max),
            psigma_alpha: alpha,
            psigma_max: psigma.iter().copied().fold(0.0, f64::max),
            mesh_hash: b.mesh_hash.clone(),
        },
    )
}

fn state_cmd(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let wb = workbench(cfg)?;
    let prob = StateProblem {
        options: cfg.solver,
        ..StateProblem::new(cfg.nu, cfg.first_alpha(), cfg.control.clone())
    };
    let sol = solve_state(&wb.sys, &prob, None).context(|| format!("state solve at alpha = {}", prob.alpha))?;
    let diagnostics = state_diagnostics(&wb.sys, &prob, &sol);
    let consts = estimate_constants(&wb, cfg, 0)?;
    let estimates = state_estimates(
        &wb.sys,
        &prob,
        &sol,
        EstimateConstants {
            s2: consts.s2,
            c_k: consts.c_k,
        },
    );
    let transport = transport_residual(&wb.disc, &wb.basis, &prob, &sol);
    dir.write_csv(
        "state.csv",
        &["mode", "lambda", "u", "eta"],
        &column_rows(&[&wb.sys.lambda, &prob.load(wb.sys.m), &sol.eta]),
    )?;
    let rows: Vec<Vec<Cell>> = sol
        .trace
        .iter()
        .map(|r| {
            vec![
                r.iter.into(),
                r.load_fraction.into(),
                serde_json::to_value(r.kind).expect("kind").as_str().unwrap_or("").into(),
                r.step.into(),
                r.residual.into(),
            ]
        })
        .collect();
    dir.write_csv("iterations.csv", &["iter", "load_fraction", "kind", "step", "residual"], &rows)?;
    dir.write_json(
        "summary.json",
        &serde_json::json!({
            "alpha": prob.alpha,
            "nu": prob.nu,
            "u_norm": prob.u_norm(),
            "residual": sol.residual,
            "iterations": sol.trace.len(),
            "diagnostics": diagnostics,
            "estimates": estimates,
            "transport_residual": transport,
            "s2": consts.s2,
            "c_k": consts.c_k,
            "kappa2": consts.kappa2,
        }),
    )
}

fn direction(cfg: &RunConfig) -> Vec<f64> {
    if !cfg.direction.is_empty() {
        return cfg.direction.clone();
    }
    let n = cfg.control.len().max(1).min(cfg.m_c);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u_norm = cfg.control.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if u_norm > 0.0 { u_norm } else { 1.0 } / norm;
    w.iter().map(|v| v * scale).collect()
}

fn gateaux_cmd(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let wb = workbench(cfg)?;
    let alpha = cfg.first_alpha();
    let prob = control_problem(cfg, &wb.sys, alpha)?;
    let w = direction(cfg);
    let mut u = cfg.control.clone();
    u.resize(u.len().max(w.len()), 0.0);
    let report = gateaux_check(&wb.sys, &prob, &u, &w, &cfg.rhos).context(|| "Gateaux check".into())?;
    let rows: Vec<Vec<Cell>> = report
        .rows
        .iter()
        .map(|r| vec![r.rho.into(), r.dr_norm.into(), r.cost_remainder.into()])
        .collect();
    dir.write_csv("gateaux.csv", &["rho", "dr_norm", "cost_remainder"], &rows)?;
    let rho: Vec<f64> = report.rows.iter().map(|r| r.rho).collect();
    let dr: Vec<f64> = report.rows.iter().map(|r| r.dr_norm).collect();
    let cr: Vec<f64> = report.rows.iter().map(|r| r.cost_remainder).collect();
    dir.write_text(
        "gateaux.svg",
        &Plot {
            title: "difference-quotient remainders",
            x_label: "rho",
            y_label: "remainder",
            x_scale: Scale::Log,
            y_scale: Scale::Log,
            series: vec![
                Series {
                    label: "||D r_rho||",
                    x: &rho,
                    y: &dr,
                },
                Series {
                    label: "cost remainder",
                    x: &rho,
                    y: &cr,
                },
            ],
        }
        .render(),
    )?;
    dir.write_json(
        "summary.json",
        &serde_json::json!({
            "alpha": alpha,
            "direction": w,
            "report": report,
        }),
    )
}

fn trace_rows(trace: &[OptimizerIterate]) -> Vec<Vec<Cell>> {
    trace
        .iter()
        .map(|t| {
            vec![
                t.iter.into(),
                t.j.into(),
                t.step.into(),
                t.grad_norm.into(),
                t.u_norm.into(),
                t.fixed_point_residual.into(),
                t.vi_residual.into(),
                t.q.into(),
            ]
        })
        .collect()
}

const TRACE_HEADER: [&str; 8] = ["iter", "j", "step", "grad_norm", "u_norm", "fixed_point_residual", "vi_residual", "q"];

fn control_cmd(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let wb = workbench(cfg)?;
    let alpha = cfg.first_alpha();
    let prob = control_problem(cfg, &wb.sys, alpha)?;
    progress(&format!("projected gradient at alpha = {alpha}"));
    let sol = solve_control(&wb.sys, &prob, &cfg.optimizer, None).context(|| format!("control solve at alpha = {alpha}"))?;
    let r = &sol.report;
    dir.write_csv("control.csv", &["mode", "u", "gradient"], &column_rows(&[&sol.u, &r.gradient]))?;
    dir.write_csv(
        "state.csv",
        &["mode", "d", "eta", "p"],
        &column_rows(&[&prob.cost.d, &sol.eta, &sol.p]),
    )?;
    dir.write_csv("trace.csv", &TRACE_HEADER, &trace_rows(&r.trace))?;
    let it: Vec<f64> = r.trace.iter().map(|t| t.iter as f64).collect();
    let j: Vec<f64> = r.trace.iter().map(|t| t.j).collect();
    let fp: Vec<f64> = r.trace.iter().map(|t| t.fixed_point_residual).collect();
    dir.write_text(
        "trace.svg",
        &Plot {
            title: "projected gradient history",
            x_label: "iteration",
            y_label: "value",
            x_scale: Scale::Linear,
            y_scale: Scale::Log,
            series: vec![
                Series {
                    label: "J",
                    x: &it,
                    y: &j,
                },
                Series {
                    label: "fixed-point residual",
                    x: &it,
                    y: &fp,
                },
            ],
        }
        .render(),
    )?;
    dir.write_json(
        "summary.json",
        &serde_json::json!({
            "alpha": alpha,
            "j": r.j,
            "j_initial": r.trace[0].j,
            "u_norm": r.trace.last().map_or(0.0, |t| t.u_norm),
            "vi_residual": r.vi_residual,
            "vi_scale": r.vi_scale,
            "ball_active": r.ball_active,
            "kkt_multiplier": r.kkt_multiplier,
            "kkt_collinearity": r.kkt_collinearity,
            "fixed_point_residual": r.fixed_point_residual,
            "converged": r.converged,
            "iterations": r.iterations,
            "q": r.q,
            "outside_certified_regime": r.outside_certified_regime,
        }),
    )
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn sweep_cmd(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let wb = workbench(cfg)?;
    let sys = &wb.sys;
    progress("state sweep");
    let states = run_state_sweep(sys, cfg.nu, &cfg.control, &cfg.alpha, cfg.solver).context(|| "state sweep".into())?;
    let mut rows: Vec<Vec<Cell>> = states
        .records
        .iter()
        .chain(std::iter::once(&states.limit))
        .map(|r| vec![r.alpha.into(), r.h1_distance.into(), r.curl_sigma_norm.into(), r.converged.into()])
        .collect();
    dir.write_csv("state_sweep.csv", &["alpha", "h1_distance", "curl_sigma_norm", "converged"], &rows)?;

    progress("control sweep");
    let template = control_problem(cfg, sys, 0.0)?;
    let sweep = run_control_sweep(sys, &template, &cfg.alpha, &cfg.optimizer).context(|| "control sweep".into())?;
    let all: Vec<_> = sweep.records.iter().chain(std::iter::once(&sweep.limit)).collect();
    rows = all
        .iter()
        .map(|r| {
            vec![
                r.alpha.into(),
                r.j.into(),
                r.gap.into(),
                r.u_distance.into(),
                r.p_distance.into(),
                r.y_h1_distance.into(),
                r.q.into(),
                r.iterations.into(),
                r.vi_residual.into(),
                r.vi_scale.into(),
                r.converged.into(),
            ]
        })
        .collect();
    dir.write_csv(
        "sweep.csv",
        &[
            "alpha",
            "j",
            "gap",
            "u_distance",
            "p_distance",
            "y_h1_distance",
            "q",
            "iterations",
            "vi_residual",
            "vi_scale",
            "converged",
        ],
        &rows,
    )?;
    let mut header = vec!["alpha".to_string()];
    header.extend((0..cfg.m_c).map(|k| format!("u{k}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    rows = all
        .iter()
        .map(|r| {
            let mut row = vec![Cell::F(r.alpha)];
            row.extend((0..cfg.m_c).map(|k| Cell::F(r.u.get(k).copied().unwrap_or(f64::NAN))));
            row
        })
        .collect();
    dir.write_csv("controls.csv", &header_refs, &rows)?;

    let alphas: Vec<f64> = sweep.records.iter().map(|r| r.alpha).collect();
    let gaps = sweep.gaps();
    let ud: Vec<f64> = sweep.records.iter().map(|r| r.u_distance).collect();
    let pd: Vec<f64> = sweep.records.iter().map(|r| r.p_distance).collect();
    let sd: Vec<f64> = states.records.iter().map(|r| r.h1_distance).collect();
    dir.write_text(
        "sweep.svg",
        &Plot {
            title: "vanishing-alpha study",
            x_label: "alpha",
            y_label: "distance to alpha = 0",
            x_scale: Scale::Log,
            y_scale: Scale::Log,
            series: vec![
                Series {
                    label: "|J_a - J_0|",
                    x: &alphas,
                    y: &gaps,
                },
                Series {
                    label: "||u_a - u_0||",
                    x: &alphas,
                    y: &ud,
                },
                Series {
                    label: "||p_a - p_0||",
                    x: &alphas,
                    y: &pd,
                },
                Series {
                    label: "||y_a - y_0||_H1 (fixed u)",
                    x: &alphas,
                    y: &sd,
                },
            ],
        }
        .render(),
    )?;
    let j0 = sweep.limit.j;
    dir.write_json(
        "summary.json",
        &serde_json::json!({
            "j0": j0,
            "cold_start_j0": sweep.cold_start_j0,
            "final_gap_ratio": gaps.last().map_or(f64::NAN, |g| g / j0),
            "gap_strictly_decreasing": strictly_decreasing(&gaps),
            "u_distance_strictly_decreasing": strictly_decreasing(&ud),
            "p_distance_strictly_decreasing": strictly_decreasing(&pd),
            "state_distance_strictly_decreasing": strictly_decreasing(&sd),
            "state_final_ratio": match (sd.first(), sd.last()) {
                (Some(a), Some(b)) => b / a,
                _ => f64::NAN,
            },
            "all_converged": all.iter().all(|r| r.converged),
            "limit_vi_residual": sweep.limit.vi_residual,
            "limit_vi_scale": sweep.limit.vi_scale,
        }),
    )
}

fn idlab_cmd(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let id = &cfg.idlab;
    let wb = workbench(cfg)?;
    let alpha = cfg.first_alpha();
    let consts = estimate_constants(&wb, cfg, id.samples)?;
    progress("trilinear identities");
    let identities = check_trilinear_identities(&wb.disc, &wb.basis, alpha, id.modes);
    let trace_e1 = check_curl_trace(&wb.disc, &wb.basis.e[0]);
    let rm2 = check_rm2_bound(&wb.sys, &consts, alpha, id.samples, cfg.seed);
    let sigma = check_sigma_psigma(&wb.disc, &wb.basis, &wb.sys, &id.sigma_alphas, id.samples, cfg.seed);

    progress("unit circle: rigid rotation and Korn constant");
    let circle = DomainSpec::ellipse(1.0, 1.0, id.circle_h);
    let cmesh = generate_ellipse_mesh(&circle).context(|| "meshing the unit circle".into())?;
    let cdisc = Discretization::new(&cmesh, &circle).context(|| "unit circle discretization".into())?;
    let rotation = Field::interpolate_velocity(&cdisc.space, |x| [-x[1], x[0]]);
    let trace_rotation = check_curl_trace(&cdisc, &rotation.values);
    let (c_k_circle, mu_circle) = korn_constant(&cdisc).context(|| "Korn constant on the unit circle".into())?;

    dir.write_csv(
        "curl_trace_e1.csv",
        &["node", "residual"],
        &trace_e1.residuals.iter().map(|&(n, r)| vec![n.into(), r.into()]).collect::<Vec<_>>(),
    )?;
    dir.write_csv(
        "sigma.csv",
        &["alpha", "ratio_max", "ratio_mean", "h2_equivalence_min", "h2_equivalence_max"],
        &sigma
            .iter()
            .map(|s| {
                vec![
                    s.alpha.into(),
                    s.ratio_max.into(),
                    s.ratio_mean.into(),
                    s.h2_equivalence_min.into(),
                    s.h2_equivalence_max.into(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;

    let refinement = if id.refinement_h.is_empty() || wb.disc.spec.kind != DomainKind::Ellipse {
        None
    } else {
        progress("refinement study");
        let d = &cfg.domain;
        Some(refinement_study(d.a, d.b, &id.refinement_h, alpha, id.modes).context(|| "refinement study".into())?)
    };
    if let Some(study) = &refinement {
        let rows: Vec<Vec<Cell>> = study
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.h.into(),
                    r.triangles.into(),
                    r.identities.identity1.into(),
                    r.identities.identity1_alpha0.into(),
                    r.identities.identity2.into(),
                    r.curl_trace_e1.into(),
                    r.s2.into(),
                    r.c_k.into(),
                ]
            })
            .collect();
        dir.write_csv(
            "refinement.csv",
            &["h", "triangles", "identity1", "identity1_alpha0", "identity2", "curl_trace_e1", "s2", "c_k"],
            &rows,
        )?;
        let h: Vec<f64> = study.rows.iter().map(|r| r.h).collect();
        let i1: Vec<f64> = study.rows.iter().map(|r| r.identities.identity1).collect();
        let i2: Vec<f64> = study.rows.iter().map(|r| r.identities.identity2).collect();
        let ct: Vec<f64> = study.rows.iter().map(|r| r.curl_trace_e1).collect();
        dir.write_text(
            "refinement.svg",
            &Plot {
                title: "identity mismatches under refinement",
                x_label: "h",
                y_label: "relative mismatch",
                x_scale: Scale::Log,
                y_scale: Scale::Log,
                series: vec![
                    Series {
                        label: "identity 1",
                        x: &h,
                        y: &i1,
                    },
                    Series {
                        label: "identity 2",
                        x: &h,
                        y: &i2,
                    },
                    Series {
                        label: "curl trace e1",
                        x: &h,
                        y: &ct,
                    },
                ],
            }
            .render(),
        )?;
    }
    dir.write_json(
        "summary.json",
        &serde_json::json!({
            "alpha": alpha,
            "constants": consts,
            "identities": identities,
            "curl_trace_e1": {
                "max_abs": trace_e1.max_abs,
                "rms": trace_e1.rms,
                "curl_scale": trace_e1.curl_scale,
            },
            "circle": {
                "rotation_curl_trace_max_abs": trace_rotation.max_abs,
                "c_k": c_k_circle,
                "c_k_finite": c_k_circle.is_finite(),
                "korn_mu_min": mu_circle,
                "korn_contrast": c_k_circle / consts.c_k,
            },
            "rm2": rm2,
            "refinement": refinement.as_ref().map(|s| serde_json::json!({
                "identity1_slope": s.identity1_slope,
                "identity1_alpha0_slope": s.identity1_alpha0_slope,
                "identity2_slope": s.identity2_slope,
                "curl_trace_slope": s.curl_trace_slope,
            })),
        }),
    )
}

fn constants_cmd(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let wb = workbench(cfg)?;
    let c = estimate_constants(&wb, cfg, cfg.constants_samples)?;
    let rows: Vec<Vec<Cell>> = [
        ("s2", c.s2),
        ("s2_inverse_iteration", c.s2_inverse_iteration),
        ("s4_lower", c.s4_lower),
        ("c_k", c.c_k),
        ("korn_mu_min", c.korn_mu_min),
        ("kappa1", c.kappa1),
        ("kappa2", c.kappa2),
    ]
    .into_iter()
    .map(|(k, v)| vec![k.into(), v.into()])
    .collect();
    dir.write_csv("constants.csv", &["name", "value"], &rows)?;
    dir.write_json("summary.json", &c)
}
