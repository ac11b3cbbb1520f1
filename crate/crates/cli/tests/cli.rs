use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
m = 12
m_c = 4
alpha = [0.1, 0.05, 0.0]
control = [1.0, 0.5, -0.25, 0.125]
constants_samples = 5

[domain]
a = 2.0
b = 1.0
h_target = 0.25

[target]
kind = "explicit"
coefficients = [0.5, 0.25, 0.1]

[idlab]
samples = 4
modes = 3
refinement_h = []
circle_h = 0.3
"#;

fn slipctl(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slipctl"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn slipctl")
}

fn setup(text: &str) -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, text).unwrap();
    (tmp, cfg)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_control_state_has_zero_diagnostics() {
    let (tmp, cfg) = setup(&SMALL.replace("control = [1.0, 0.5, -0.25, 0.125]", "control = [0.0, 0.0]"));
    let out = slipctl(&["state"], &cfg, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&tmp.path().join("state/summary.json"));
    for key in ["d_norm", "curl_sigma_norm", "h1_norm", "h3_proxy", "energy_gap", "q"] {
        assert_eq!(s["diagnostics"][key].as_f64(), Some(0.0), "{key}");
    }
    assert_eq!(s["residual"].as_f64(), Some(0.0));
    assert_eq!(s["transport_residual"].as_f64(), Some(0.0));
}

#[test]
fn sweep_writes_one_row_per_alpha_with_gaps() {
    let (tmp, cfg) = setup(SMALL);
    let out = slipctl(&["sweep"], &cfg, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("sweep");
    let mut rdr = csv::Reader::from_path(dir.join("sweep.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    assert!(header.iter().any(|h| h == "gap"));
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let alphas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(alphas, vec![0.1, 0.05, 0.0]);
    let gap_col = header.iter().position(|h| h == "gap").unwrap();
    assert_eq!(rows[2][gap_col].parse::<f64>().unwrap(), 0.0);
    for name in ["state_sweep.csv", "controls.csv", "summary.json", "sweep.svg", "config.json"] {
        assert!(dir.join(name).is_file(), "{name}");
    }
    // The echoed config reproduces the run.
    let echoed: slipctl::RunConfig = serde_json::from_str(&fs::read_to_string(dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed.alpha, vec![0.1, 0.05, 0.0]);
    assert_eq!(echoed.m, 12);
}

#[test]
fn reruns_are_byte_identical() {
    let (tmp, cfg) = setup(SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        assert!(slipctl(&["control"], &cfg, out).status.success());
    }
    for name in ["control.csv", "state.csv", "trace.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join("control").join(name)).unwrap(),
            fs::read(b.join("control").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn eigenbasis_cache_is_reused() {
    let (tmp, cfg) = setup(SMALL);
    let cache = tmp.path().join("cache");
    // Top-level keys must precede the first table.
    fs::write(&cfg, format!("cache = {:?}\n{SMALL}", cache.to_str().unwrap())).unwrap();
    let first = slipctl(&["eig"], &cfg, tmp.path());
    assert!(first.status.success());
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 1);
    let second = slipctl(&["gateaux"], &cfg, tmp.path());
    assert!(second.status.success());
    assert!(String::from_utf8_lossy(&second.stderr).contains("from cache"));
    let s = json(&tmp.path().join("gateaux/summary.json"));
    let slope = s["report"]["dr_slope"].as_f64().unwrap();
    assert!((slope - 1.0).abs() < 0.1, "{slope}");
}

#[test]
fn invalid_config_exits_with_field_path() {
    let (tmp, cfg) = setup(&SMALL.replace("alpha = [0.1, 0.05, 0.0]", "alpha = [0.1, 0.2, 0.0]"));
    let out = slipctl(&["state"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`alpha[1]`"));

    let out = slipctl(&["state", "--nu", "-1"], &tmp.path().join("missing.toml"), tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_requires_a_terminal_zero() {
    let (tmp, cfg) = setup(SMALL);
    let out = slipctl(&["sweep", "--alpha", "0.1,0.05"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ending in 0"));
}

#[test]
fn broken_mesh_file_is_a_mesh_error() {
    let (tmp, cfg) = setup(SMALL);
    let mesh = tmp.path().join("bad.msh");
    fs::write(&mesh, "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n2\n1 0 0 0\n").unwrap();
    let text = SMALL.replace("a = 2.0\n", &format!("mesh = {:?}\na = 2.0\n", mesh.to_str().unwrap()));
    fs::write(&cfg, text).unwrap();
    let out = slipctl(&["mesh"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(10), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn mesh_and_constants_runs_write_reports() {
    let (tmp, cfg) = setup(SMALL);
    assert!(slipctl(&["mesh"], &cfg, tmp.path()).status.success());
    let stats = json(&tmp.path().join("mesh/summary.json"));
    assert!(stats["triangles"].as_u64().unwrap() > 50);
    assert!(tmp.path().join("mesh/mesh.msh").is_file());

    assert!(slipctl(&["constants"], &cfg, tmp.path()).status.success());
    let c = json(&tmp.path().join("constants/summary.json"));
    let (s2, s2b) = (c["s2"].as_f64().unwrap(), c["s2_inverse_iteration"].as_f64().unwrap());
    assert!((s2 - s2b).abs() <= 1e-8 * s2);

    assert!(slipctl(&["idlab"], &cfg, tmp.path()).status.success());
    let id = json(&tmp.path().join("idlab/summary.json"));
    assert!(id["circle"]["rotation_curl_trace_max_abs"].as_f64().unwrap() <= 1e-10);
    assert_eq!(id["circle"]["c_k_finite"].as_bool(), Some(false));
}
