//! Behavioural tests of the command-line surface: exit codes, provenance
//! headers, file formats, and seed resolution.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robctl"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("robctl-cli-{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_heston(dir: &Path) -> PathBuf {
    let path = dir.join("heston.json");
    std::fs::write(
        &path,
        r#"{"model":"heston","mu0":0.02,"mu2":2.0,"kappa":3.0,"pbar":0.04,"sigma":0.25,
            "rho":-0.5,"gamma":2.0,"theta":1.0,"Kpi":1.0,"Kphi":1.0,"T":1.0,"K6":1.0}"#,
    )
    .unwrap();
    path
}

fn write_merton(dir: &Path) -> PathBuf {
    let path = dir.join("merton.json");
    std::fs::write(
        &path,
        r#"{"model":"merton","mu0":0.02,"mu1":0.08,"sigma":0.2,"delta":0.05,
            "gamma":2.0,"theta":1.0,"K4":10.0,"T":1.0,"K5":4.0}"#,
    )
    .unwrap();
    path
}

#[test]
fn malformed_config_exits_2_with_json_diagnostics() {
    let dir = workdir("badcfg");
    let cfg = dir.join("bad.json");
    std::fs::write(&cfg, r#"{"model":"merton","mu0":0.02,"bogus":1}"#).unwrap();
    let out = bin()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--paths",
            "200",
            "--steps",
            "10",
            "--out",
            dir.join("o.json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let body: serde_json::Value =
        serde_json::from_str(stderr.trim()).expect("stderr should be machine-readable JSON");
    assert_eq!(body["error"]["kind"], "config");
}

#[test]
fn feller_violation_is_a_validation_failure() {
    let dir = workdir("feller");
    let cfg = dir.join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"model":"heston","mu0":0.02,"mu2":2.0,"kappa":0.1,"pbar":0.04,"sigma":0.25,
            "rho":-0.5,"gamma":2.0,"theta":1.0,"Kpi":1.0,"Kphi":1.0,"T":1.0,"K6":1.0}"#,
    )
    .unwrap();
    let out = bin()
        .args([
            "closed-form",
            "--config",
            cfg.to_str().unwrap(),
            "--grid",
            "0:1:3",
            "--out",
            dir.join("o.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("feller"));
}

#[test]
fn simulate_reruns_are_byte_identical_and_seed_env_works() {
    let dir = workdir("det");
    let cfg = write_heston(&dir);
    let run = |out: &Path, seed_args: &[&str], env: Option<(&str, &str)>| {
        let mut c = bin();
        c.args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--paths",
            "500",
            "--steps",
            "20",
            "--out",
            out.to_str().unwrap(),
        ]);
        c.args(seed_args);
        if let Some((k, v)) = env {
            c.env(k, v);
        }
        assert!(c.status().unwrap().success());
    };
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    run(&a, &["--seed", "7"], None);
    run(&b, &["--seed", "7"], None);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    // env-var default, and the explicit flag winning over it
    let c = dir.join("c.json");
    let d = dir.join("d.json");
    run(&c, &[], Some(("RCTL_SEED", "7")));
    let cv: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&c).unwrap()).unwrap();
    assert_eq!(cv["meta"]["seed"], 7);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    run(&d, &["--seed", "9"], Some(("RCTL_SEED", "7")));
    let dv: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&d).unwrap()).unwrap();
    assert_eq!(dv["meta"]["seed"], 9);
}

#[test]
fn closed_form_csv_has_fixed_header_and_provenance() {
    let dir = workdir("cf");
    let cfg = write_merton(&dir);
    let out = dir.join("cf.csv");
    assert!(bin()
        .args([
            "closed-form",
            "--config",
            cfg.to_str().unwrap(),
            "--grid",
            "0:1:3,1:2:2",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let meta = lines.next().unwrap();
    assert!(meta.starts_with("# config_sha256="));
    assert!(meta.contains("seed=") && meta.contains("version="));
    assert_eq!(
        lines.next().unwrap(),
        "t,x,p,W,pi_star,c_star,phi1_star,phi2_star,pde_residual"
    );
    assert_eq!(lines.count(), 6); // 3 times x 2 wealth points
}

#[test]
fn simulate_dump_writes_binary_matrix_with_sidecar() {
    let dir = workdir("dump");
    let cfg = write_merton(&dir);
    let out = dir.join("sim.json");
    let dump = dir.join("paths.bin");
    assert!(bin()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--paths",
            "200",
            "--steps",
            "16",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
            "--dump",
            dump.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    let bytes = std::fs::read(&dump).unwrap();
    let (rows, cols, data) = robctl_core::sde::decode_matrix(&bytes).unwrap();
    assert_eq!((rows, cols), (200, 17));
    assert!(data.iter().all(|x| *x > 0.0));
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("paths.json")).unwrap()).unwrap();
    assert_eq!(sidecar["n_paths"], 200);
    assert_eq!(sidecar["seed"], 3);
}

#[test]
fn fixed_point_emits_surface_history_and_json() {
    let dir = workdir("fp");
    let cfg = write_heston(&dir);
    let out = dir.join("fp.csv");
    let hist = dir.join("hist.csv");
    let js = dir.join("fp.json");
    assert!(bin()
        .args([
            "fixed-point",
            "--config",
            cfg.to_str().unwrap(),
            "--nt",
            "40",
            "--nv",
            "30",
            "--tol",
            "1e-6",
            "--slab-width",
            "0.25",
            "--out",
            out.to_str().unwrap(),
            "--history",
            hist.to_str().unwrap(),
            "--json",
            js.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    let surface = std::fs::read_to_string(&out).unwrap();
    assert!(surface.lines().nth(1).unwrap().starts_with("t,v,value"));
    let history = std::fs::read_to_string(&hist).unwrap();
    assert!(history.lines().nth(1).unwrap().starts_with("slab,iter,weighted_delta"));
    let body: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&js).unwrap()).unwrap();
    assert!(body["closed_form_relative_error"].as_f64().unwrap() < 5e-3);

    // plot-data consumes the JSON result
    let plot = dir.join("hist_plot.csv");
    assert!(bin()
        .args([
            "plot-data",
            "--kind",
            "fp-history",
            "--input",
            js.to_str().unwrap(),
            "--out",
            plot.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    let text = std::fs::read_to_string(&plot).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("iter,weighted_delta"));
}

#[test]
fn contraction_command_measures_small_ratio() {
    let dir = workdir("contraction");
    let cfg = write_heston(&dir);
    // build a slab pair from the library and feed it through the CLI
    let p = robctl_core::params::HestonParams::reference();
    let pde = robctl_core::hjbi::reduce_heston(&p).unwrap();
    let times: Vec<f64> = (0..=8).map(|k| 0.9 + 0.1 * k as f64 / 8.0).collect();
    let j1 = pde.closed_form_surface(times, 40).unwrap();
    let mut j2 = j1.clone();
    let w = j1.n_space();
    for (idx, val) in j2.values.iter_mut().enumerate() {
        let (it, jv) = (idx / w, idx % w);
        *val += 1e-3 * j1.weight.eval(j1.times[it], j1.space[jv]);
    }
    let a_path = dir.join("a.json");
    let b_path = dir.join("b.json");
    std::fs::write(&a_path, serde_json::to_string(&j1).unwrap()).unwrap();
    std::fs::write(&b_path, serde_json::to_string(&j2).unwrap()).unwrap();
    let out = dir.join("ratio.json");
    assert!(bin()
        .args([
            "contraction",
            "--config",
            cfg.to_str().unwrap(),
            "--pair",
            a_path.to_str().unwrap(),
            b_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    let body: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let ratio = body["ratio"].as_f64().unwrap();
    assert!(ratio >= 0.0 && ratio <= 0.6, "ratio {ratio}");
}

#[test]
fn moments_command_reports_bounds() {
    let dir = workdir("moments");
    let cfg = write_heston(&dir);
    let out = dir.join("m.json");
    assert!(bin()
        .args([
            "moments",
            "--config",
            cfg.to_str().unwrap(),
            "--which",
            "expmoment",
            "--paths",
            "500",
            "--steps",
            "20",
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    let body: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(body["report"]["checks"][0]["name"], "exp_moment_18");
    assert_eq!(body["report"]["checks"][0]["passed"], true);
}

#[test]
fn plot_data_g3_curve() {
    let dir = workdir("plotg3");
    let cfg = write_heston(&dir);
    let out = dir.join("g3.csv");
    assert!(bin()
        .args([
            "plot-data",
            "--kind",
            "g3",
            "--config",
            cfg.to_str().unwrap(),
            "--points",
            "101",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("t,g3,riccati_residual"));
    // terminal row has g3 = 0 exactly
    let last = text.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    assert_eq!(fields[1], "0");
}

#[test]
fn report_smoke_passes_and_writes_aggregate() {
    let dir = workdir("report");
    let out = dir.join("report.json");
    let status = bin()
        .args(["report", "--smoke", "--seed", "11", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let body: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(body["suite"]["all_passed"], true);
    assert_eq!(body["suite"]["criteria"].as_array().unwrap().len(), 7);
}
