//! Subcommand implementations. Each returns `Ok(checks_passed)`; a `false`
//! maps to exit code 3 (an acceptance-style check failed even though the
//! computation itself succeeded).

use clap::Args;
use serde_json::json;
use std::path::PathBuf;

use robctl_core::closedform::{HestonClosedForm, MertonClosedForm};
use robctl_core::hjbi::{reduce_heston, reduce_merton, SlabSpec};
use robctl_core::moments::{
    supersolution_sign_check, verify_exp_moment, verify_global, verify_local,
    verify_nonambiguity, SuperSolutionSpec,
};
use robctl_core::params::{theorem_coeffs, ModelConfig};
use robctl_core::payoff::{estimate_j1, estimate_j2, saddle_probe_heston, saddle_probe_merton};
use robctl_core::report::{run_all, standard_perturbations, SuiteScale};
use robctl_core::sde::{encode_matrix, simulate_heston, simulate_merton, PathGrid};
use robctl_core::surface::ValueSurface;
use robctl_core::{Error, Result};

use crate::output::{read_text, resolve_seed, write_atomic, Meta};

/// One `lo:hi:n` range (n evenly spaced points, inclusive).
#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Range {
    fn parse(text: &str) -> Result<Range> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("range '{text}' is not lo:hi:n")));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| Error::Config(format!("bad range start '{}'", parts[0])))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| Error::Config(format!("bad range end '{}'", parts[1])))?;
        let n: usize = parts[2]
            .parse()
            .map_err(|_| Error::Config(format!("bad range count '{}'", parts[2])))?;
        if n == 0 || hi < lo {
            return Err(Error::Config(format!("empty range '{text}'")));
        }
        Ok(Range { lo, hi, n })
    }

    fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64)
            .collect()
    }
}

fn load_config(path: &PathBuf) -> Result<(ModelConfig, String)> {
    let text = read_text(path)?;
    let cfg = ModelConfig::from_json(&text)?;
    let report = cfg.validate();
    if !report.passed() {
        return Err(Error::Config(format!(
            "configuration fails validation:\n{report}"
        )));
    }
    Ok((cfg, text))
}

// ---------------------------------------------------------------------------
// closed-form
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct ClosedFormArgs {
    #[arg(long)]
    config: PathBuf,
    /// Evaluation grid `t0:t1:nt[,x0:x1:nx[,p0:p1:np]]`.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn closed_form(a: ClosedFormArgs) -> Result<bool> {
    let (cfg, text) = load_config(&a.config)?;
    let seed = resolve_seed(a.seed)?;
    let meta = Meta::new(&text, seed);
    let specs: Vec<Range> = a
        .grid
        .split(',')
        .map(Range::parse)
        .collect::<Result<Vec<_>>>()?;
    if specs.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    let t_pts = specs[0].points();
    let mut csv = meta.csv_comment();
    csv.push_str("t,x,p,W,pi_star,c_star,phi1_star,phi2_star,pde_residual\n");
    match &cfg {
        ModelConfig::Merton(p) => {
            let x_pts = specs
                .get(1)
                .map(|r| r.points())
                .unwrap_or_else(|| vec![1.0]);
            let cf = MertonClosedForm::new(p.clone())?;
            for &t in &t_pts {
                for &x in &x_pts {
                    let w = cf.value(t, x)?;
                    let st = cf.strategy(t, x);
                    let res = if t < p.horizon {
                        cf.hjbi_residual(t, x)?.pde_residual
                    } else {
                        // terminal row: w(T, x) = Psi(x)
                        w - x.powf(1.0 - p.gamma) / (1.0 - p.gamma)
                    };
                    csv.push_str(&format!(
                        "{t},{x},,{w},{},{},{},{},{res}\n",
                        st.pi, st.c, st.phi1, st.phi2
                    ));
                }
            }
        }
        ModelConfig::Heston(p) => {
            let x_pts = specs
                .get(1)
                .map(|r| r.points())
                .unwrap_or_else(|| vec![1.0]);
            let p_pts = specs
                .get(2)
                .map(|r| r.points())
                .unwrap_or_else(|| vec![p.pbar]);
            let cf = HestonClosedForm::new(p.clone())?;
            for &t in &t_pts {
                for &x in &x_pts {
                    for &v in &p_pts {
                        let w = cf.value(t, x, v)?;
                        let st = cf.strategy(t, v);
                        let res = if t < p.horizon {
                            cf.hjbi_residual(t, x, v)?.pde_residual
                        } else {
                            w - x.powf(1.0 - p.gamma) / (1.0 - p.gamma)
                        };
                        csv.push_str(&format!(
                            "{t},{x},{v},{w},{},,{},{},{res}\n",
                            st.pi, st.phi1, st.phi2
                        ));
                    }
                }
            }
        }
    }
    write_atomic(&a.out, csv.as_bytes())?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    /// Initial variance (stochastic-volatility model only; defaults to P̄).
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Also dump the simulated wealth paths as a binary matrix with a JSON
    /// sidecar (guarded to modest sizes).
    #[arg(long)]
    dump: Option<PathBuf>,
}

pub fn simulate(a: SimulateArgs) -> Result<bool> {
    let (cfg, text) = load_config(&a.config)?;
    let seed = resolve_seed(a.seed)?;
    let meta = Meta::new(&text, seed);
    let (estimate, closed_form, v0) = match &cfg {
        ModelConfig::Merton(p) => {
            let cf = MertonClosedForm::new(p.clone())?;
            let grid = PathGrid::new(a.t0, p.horizon, a.steps, a.paths, seed)?;
            let est = estimate_j1(
                a.x0,
                &|t, x| {
                    let s = cf.strategy(t, x);
                    (s.pi, s.c)
                },
                &|t, x| cf.strategy(t, x).phi1,
                &|t, x| cf.value(t, x).expect("positive wealth"),
                &grid,
                p,
            )?;
            (est, cf.value(a.t0, a.x0)?, None)
        }
        ModelConfig::Heston(p) => {
            let cf = HestonClosedForm::new(p.clone())?;
            let v0 = a.v0.unwrap_or(p.pbar);
            let grid = PathGrid::new(a.t0, p.horizon, a.steps, a.paths, seed)?;
            let est = estimate_j2(
                a.x0,
                v0,
                &|t, _v| cf.normalized_strategy(t).0,
                &|t, v| {
                    let s = cf.strategy(t, v);
                    (s.phi1, s.phi2)
                },
                &|t, x, v| cf.value(t, x, v).expect("positive state"),
                &grid,
                p,
            )?;
            (est, cf.value(a.t0, a.x0, v0)?, Some(v0))
        }
    };
    let z = (estimate.mean - closed_form) / estimate.std_error;
    let body = json!({
        "estimate": estimate.mean,
        "std_error": estimate.std_error,
        "closed_form": closed_form,
        "z_score": z,
        "n_paths": estimate.n_paths,
        "n_steps": a.steps,
        "t0": a.t0,
        "x0": a.x0,
        "v0": v0,
        "meta": meta,
    });
    write_atomic(&a.out, serde_json::to_string_pretty(&body).unwrap().as_bytes())?;

    if let Some(dump_path) = &a.dump {
        let cells = a.paths * (a.steps + 1);
        if cells > 30_000_000 {
            return Err(Error::Config(format!(
                "path dump of {cells} cells is too large; lower --paths or --steps"
            )));
        }
        let bundle = match &cfg {
            ModelConfig::Merton(p) => {
                let cf = MertonClosedForm::new(p.clone())?;
                let grid = PathGrid::new(a.t0, p.horizon, a.steps, a.paths, seed)?;
                simulate_merton(
                    &grid,
                    a.x0,
                    &|t, x| {
                        let s = cf.strategy(t, x);
                        (s.pi, s.c)
                    },
                    &|t, x| cf.strategy(t, x).phi1,
                    p,
                    "closed-form optimal feedback",
                )?
            }
            ModelConfig::Heston(p) => {
                let cf = HestonClosedForm::new(p.clone())?;
                let grid = PathGrid::new(a.t0, p.horizon, a.steps, a.paths, seed)?;
                simulate_heston(
                    &grid,
                    a.x0,
                    v0.unwrap(),
                    &|t, _v| cf.normalized_strategy(t).0,
                    &|t, v| {
                        let s = cf.strategy(t, v);
                        (s.phi1, s.phi2)
                    },
                    p,
                    "closed-form optimal feedback",
                )?
            }
        };
        if bundle.truncation_fraction > 0.05 {
            eprintln!(
                "warning: variance truncation active on {:.1}% of steps",
                100.0 * bundle.truncation_fraction
            );
        }
        let bytes = encode_matrix(
            bundle.n_paths as u32,
            (bundle.n_steps + 1) as u32,
            &bundle.wealth,
        );
        write_atomic(dump_path, &bytes)?;
        let sidecar = json!({
            "t0": a.t0,
            "t1": bundle.times.last(),
            "n_steps": bundle.n_steps,
            "n_paths": bundle.n_paths,
            "seed": seed,
            "controls": bundle.controls_applied,
            "truncation_fraction": bundle.truncation_fraction,
            "meta": meta,
        });
        let sidecar_path = dump_path.with_extension("json");
        write_atomic(
            &sidecar_path,
            serde_json::to_string_pretty(&sidecar).unwrap().as_bytes(),
        )?;
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// saddle
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SaddleArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

pub fn saddle(a: SaddleArgs) -> Result<bool> {
    let (cfg, text) = load_config(&a.config)?;
    let seed = resolve_seed(a.seed)?;
    let meta = Meta::new(&text, seed);
    let probes = standard_perturbations();
    let report = match &cfg {
        ModelConfig::Merton(p) => {
            let grid = PathGrid::new(a.t0, p.horizon, a.steps, a.paths, seed)?;
            saddle_probe_merton(a.x0, p, &probes, &grid)?
        }
        ModelConfig::Heston(p) => {
            let grid = PathGrid::new(a.t0, p.horizon, a.steps, a.paths, seed)?;
            saddle_probe_heston(a.x0, a.v0.unwrap_or(p.pbar), p, &probes, &grid)?
        }
    };
    let ok = !report.any_violation();
    let body = json!({ "report": report, "meta": meta });
    write_atomic(&a.out, serde_json::to_string_pretty(&body).unwrap().as_bytes())?;
    Ok(ok)
}

// ---------------------------------------------------------------------------
// fixed-point
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct FixedPointArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 400)]
    nt: usize,
    #[arg(long, default_value_t = 200)]
    nv: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Slab width ε; defaults to T/N from the canonical slab count,
    /// grid-aligned to at least one time step.
    #[arg(long)]
    slab_width: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Surface CSV (t, v, value).
    #[arg(long)]
    out: PathBuf,
    /// Optional per-iteration weighted-delta CSV (slab, iter, weighted_delta).
    #[arg(long)]
    history: Option<PathBuf>,
    /// Optional full JSON result (surface + history) for `plot-data`.
    #[arg(long)]
    json: Option<PathBuf>,
}

pub fn fixed_point(a: FixedPointArgs) -> Result<bool> {
    let (cfg, text) = load_config(&a.config)?;
    let seed = resolve_seed(a.seed)?;
    let meta = Meta::new(&text, seed);
    let (pde, default_eps) = match &cfg {
        ModelConfig::Merton(p) => (reduce_merton(p)?, p.horizon / 16.0),
        ModelConfig::Heston(p) => {
            let coeffs = theorem_coeffs(p)?;
            (reduce_heston(p)?, p.horizon / coeffs.slab_count as f64)
        }
    };
    let horizon = pde.horizon();
    let eps = a.slab_width.unwrap_or(default_eps);
    let slab = SlabSpec::new(eps, 100, a.tol, 201)?;
    let times: Vec<f64> = (0..=a.nt)
        .map(|k| horizon * k as f64 / a.nt as f64)
        .collect();
    let weight = pde.weight()?;
    let j0 = ValueSurface::constant(times.clone(), pde.space_grid(a.nv), weight, 0.0);
    let (w, history) = pde.fixed_point(&slab, &j0)?;
    let exact = pde.closed_form_surface(times, a.nv)?;
    let rel_err = w.weighted_distance(&exact)? / exact.weighted_norm();

    let mut csv = meta.csv_comment();
    csv.push_str("t,v,value\n");
    for (it, &t) in w.times.iter().enumerate() {
        if w.space.is_empty() {
            csv.push_str(&format!("{t},,{}\n", w.at(it, 0)));
        } else {
            for (jv, &v) in w.space.iter().enumerate() {
                csv.push_str(&format!("{t},{v},{}\n", w.at(it, jv)));
            }
        }
    }
    write_atomic(&a.out, csv.as_bytes())?;

    if let Some(hpath) = &a.history {
        let mut hcsv = meta.csv_comment();
        hcsv.push_str("slab,iter,weighted_delta\n");
        for r in &history {
            hcsv.push_str(&format!("{},{},{}\n", r.slab, r.iter, r.delta));
        }
        write_atomic(hpath, hcsv.as_bytes())?;
    }
    if let Some(jpath) = &a.json {
        let body = json!({
            "surface": w,
            "history": history,
            "closed_form_relative_error": rel_err,
            "slab_width": eps,
            "meta": meta,
        });
        write_atomic(jpath, serde_json::to_string_pretty(&body).unwrap().as_bytes())?;
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// contraction
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct ContractionArgs {
    #[arg(long)]
    config: PathBuf,
    /// Two surface JSON files defining the slab (matching grids).
    #[arg(long, num_args = 2)]
    pair: Vec<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

pub fn contraction(a: ContractionArgs) -> Result<bool> {
    let (cfg, text) = load_config(&a.config)?;
    let seed = resolve_seed(a.seed)?;
    let meta = Meta::new(&text, seed);
    if a.pair.len() != 2 {
        return Err(Error::Config("--pair needs exactly two files".into()));
    }
    let j1: ValueSurface = serde_json::from_str(&read_text(&a.pair[0])?)
        .map_err(|e| Error::Config(format!("surface {}: {e}", a.pair[0].display())))?;
    let j2: ValueSurface = serde_json::from_str(&read_text(&a.pair[1])?)
        .map_err(|e| Error::Config(format!("surface {}: {e}", a.pair[1].display())))?;
    let pde = match &cfg {
        ModelConfig::Merton(p) => reduce_merton(p)?,
        ModelConfig::Heston(p) => reduce_heston(p)?,
    };
    let span = j1.times.last().unwrap() - j1.times.first().unwrap();
    let slab = SlabSpec::new(span, 50, a.tol, 201)?;
    let ratio = pde.contraction_ratio(&j1, &j2, &slab)?;
    let body = json!({ "ratio": ratio, "slab_span": span, "meta": meta });
    write_atomic(&a.out, serde_json::to_string_pretty(&body).unwrap().as_bytes())?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// moments
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct MomentsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Which bound family to verify.
    #[arg(long, value_parser = ["local", "expmoment", "global", "nonambiguity"])]
    which: String,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 400)]
    steps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    #[arg(long)]
    v0: Option<f64>,
    /// Supersolution exponent ϱ (default: 1−γ; 2 for the ambiguity-free check).
    #[arg(long)]
    varrho: Option<f64>,
    /// Weight slope b (default: 2·K6; window midpoint for ambiguity-free).
    #[arg(long)]
    b: Option<f64>,
    /// Integral weight k for the global estimate (default: half the window).
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

pub fn moments(a: MomentsArgs) -> Result<bool> {
    let (cfg, text) = load_config(&a.config)?;
    let p = match &cfg {
        ModelConfig::Heston(p) => p.clone(),
        ModelConfig::Merton(_) => {
            return Err(Error::Config(
                "moment bounds apply to the stochastic-volatility model".into(),
            ))
        }
    };
    let seed = resolve_seed(a.seed)?;
    let meta = Meta::new(&text, seed);
    let grid = PathGrid::new(0.0, p.horizon, a.steps, a.paths, seed)?;
    let v0 = a.v0.unwrap_or(p.pbar);
    let varrho = a.varrho.unwrap_or(1.0 - p.gamma);
    let b = a.b.unwrap_or(2.0 * p.k6);

    let (report, sign) = match a.which.as_str() {
        "local" => {
            let spec = SuperSolutionSpec::new(varrho, b, a.k.unwrap_or(0.0), &p)?;
            let p_max = p.pbar + 10.0 * p.sigma * (p.pbar / (2.0 * p.kappa)).sqrt();
            let sign = supersolution_sign_check(&spec, &p, 200, 200, p_max);
            (verify_local(&spec, &p, a.t0, a.x0, v0, &grid)?, Some(sign))
        }
        "expmoment" => (verify_exp_moment(&p, a.t0, v0, &grid)?, None),
        "global" => {
            let k = match a.k {
                Some(k) => k,
                None => {
                    // half the admissible window for this (varrho, b)
                    let abar1 = (p.rho * varrho).abs() * p.kpi
                        + (p.rho.abs() + (1.0 - p.rho * p.rho).sqrt()) * p.kphi;
                    let abar2 = (varrho * varrho - varrho).max(0.0) * p.kpi * p.kpi
                        + 2.0 * (varrho * p.mu2).abs() * p.kpi
                        + 2.0 * varrho.abs() * p.kphi * p.kpi;
                    let gap = p.kappa / p.sigma - abar1;
                    let dev = p.sigma * b - gap;
                    0.25 * (gap * gap - abar2 - dev * dev).max(0.0)
                }
            };
            let spec = SuperSolutionSpec::new(varrho, b, k, &p)?;
            (verify_global(&spec, &p, a.t0, a.x0, v0, &grid)?, None)
        }
        "nonambiguity" => {
            let varrho = a.varrho.unwrap_or(2.0);
            let b = match a.b {
                Some(b) => b,
                None => {
                    let gap = p.kappa / p.sigma - (p.rho * varrho).abs();
                    gap / p.sigma // window midpoint
                }
            };
            (
                verify_nonambiguity(&p, varrho, b, a.t0, a.x0, v0, &grid)?,
                None,
            )
        }
        other => return Err(Error::Config(format!("unknown bound family '{other}'"))),
    };
    let passed = report.passed() && sign.as_ref().map_or(true, |s| s.passed);
    let body = json!({
        "which": a.which,
        "report": report,
        "sign_check": sign,
        "meta": meta,
    });
    write_atomic(&a.out, serde_json::to_string_pretty(&body).unwrap().as_bytes())?;
    Ok(passed)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct ReportArgs {
    /// Reduced work sizes: exercises the machinery, not the full margins.
    #[arg(long)]
    smoke: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

pub fn report(a: ReportArgs) -> Result<bool> {
    let seed = resolve_seed(a.seed)?;
    let scale = if a.smoke {
        SuiteScale::smoke()
    } else {
        SuiteScale::default()
    };
    // the suite runs on the built-in reference sets; hash their canonical form
    let reference = json!({
        "merton": robctl_core::params::MertonParams::reference(),
        "heston": robctl_core::params::HestonParams::reference(),
    });
    let meta = Meta::new(&reference.to_string(), seed);
    let suite = run_all(&scale, seed)?;
    let all_passed = suite.all_passed;
    let body = json!({ "suite": suite, "meta": meta });
    write_atomic(&a.out, serde_json::to_string_pretty(&body).unwrap().as_bytes())?;
    for c in &suite.criteria {
        eprintln!(
            "{} {} ({} ms)",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.runtime_ms
        );
    }
    Ok(all_passed)
}

// ---------------------------------------------------------------------------
// plot-data
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct PlotDataArgs {
    /// `g3` (needs --config), `fp-history` or `saddle` (need --input).
    #[arg(long, value_parser = ["g3", "fp-history", "saddle"])]
    kind: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON output of a prior `fixed-point --json` or `saddle` run.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1001)]
    points: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

pub fn plot_data(a: PlotDataArgs) -> Result<bool> {
    let seed = resolve_seed(a.seed)?;
    match a.kind.as_str() {
        "g3" => {
            let cfg_path = a
                .config
                .ok_or_else(|| Error::Config("--kind g3 needs --config".into()))?;
            let (cfg, text) = load_config(&cfg_path)?;
            let p = match cfg {
                ModelConfig::Heston(p) => p,
                _ => {
                    return Err(Error::Config(
                        "the g3 curve belongs to the stochastic-volatility model".into(),
                    ))
                }
            };
            let meta = Meta::new(&text, seed);
            let cf = HestonClosedForm::new(p.clone())?;
            let c = cf.coeffs().clone();
            let mut csv = meta.csv_comment();
            csv.push_str("t,g3,riccati_residual\n");
            let h = 1e-6;
            for i in 0..a.points {
                let t = p.horizon * i as f64 / (a.points - 1) as f64;
                let g3 = cf.g3(t)?;
                let res = if t - h >= 0.0 && t + h <= p.horizon {
                    let d = (cf.g3(t + h)? - cf.g3(t - h)?) / (2.0 * h);
                    d + c.a4 * g3 * g3 + c.a5 * g3 + c.a6
                } else {
                    0.0
                };
                csv.push_str(&format!("{t},{g3},{res}\n"));
            }
            write_atomic(&a.out, csv.as_bytes())?;
        }
        "fp-history" => {
            let input = a
                .input
                .ok_or_else(|| Error::Config("--kind fp-history needs --input".into()))?;
            let body: serde_json::Value = serde_json::from_str(&read_text(&input)?)
                .map_err(|e| Error::Config(format!("parse {}: {e}", input.display())))?;
            let history = body
                .get("history")
                .and_then(|h| h.as_array())
                .ok_or_else(|| Error::Config("input has no history array".into()))?;
            let meta_line = body
                .get("meta")
                .map(|m| {
                    format!(
                        "# config_sha256={} seed={} version={}\n",
                        m["config_sha256"].as_str().unwrap_or(""),
                        m["seed"],
                        m["version"].as_str().unwrap_or("")
                    )
                })
                .unwrap_or_default();
            let mut csv = meta_line;
            csv.push_str("iter,weighted_delta\n");
            for (i, r) in history.iter().enumerate() {
                csv.push_str(&format!("{i},{}\n", r["delta"]));
            }
            write_atomic(&a.out, csv.as_bytes())?;
        }
        "saddle" => {
            let input = a
                .input
                .ok_or_else(|| Error::Config("--kind saddle needs --input".into()))?;
            let body: serde_json::Value = serde_json::from_str(&read_text(&input)?)
                .map_err(|e| Error::Config(format!("parse {}: {e}", input.display())))?;
            let report = body
                .get("report")
                .ok_or_else(|| Error::Config("input has no saddle report".into()))?;
            let baseline = report["baseline"]["mean"].clone();
            let probes = report["probes"]
                .as_array()
                .ok_or_else(|| Error::Config("input has no probes array".into()))?;
            let mut csv = String::from("dpi,dphi,J,SE,baseline\n");
            for pr in probes {
                if pr["skipped"].is_null() {
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        pr["perturbation"]["dpi"],
                        pr["perturbation"]["dphi"],
                        pr["estimate"]["mean"],
                        pr["estimate"]["std_error"],
                        baseline
                    ));
                }
            }
            write_atomic(&a.out, csv.as_bytes())?;
        }
        other => return Err(Error::Config(format!("unknown plot kind '{other}'"))),
    }
    Ok(true)
}
