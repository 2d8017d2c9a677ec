//! Simulation-based verification of the pathwise moment estimates for the
//! stochastic-volatility state processes.
//!
//! The estimates are built on explicit supersolutions
//! `w̄(s,x,p) = ḡ1(s)·x^ϱ·e^{ḡ2(s)p}` with `ḡ1(s) = e^{−|κP̄b+μ0ϱ|s}`,
//! `ḡ2(s) = b − 4√s`, whose generator drift is non-positive over the whole
//! admissible control box. Four families are checked by Monte Carlo with
//! one-sided 3-standard-error margins, always under stress controls (the
//! drift-maximising direction on the ambiguity ball, recomputed per step):
//!
//! 1. local estimate  `E[sup w̄ + ∫ (P/√s) w̄ ds] ≤ 10·w̄(t,x,p)` on `[0, Δt]`;
//! 2. exponential moment `E[exp(Kφ²/2 ∫ P ds)] ≤ 18·e^p` on `[0, Δ̂t]`;
//! 3. global estimates with weight `e^{bP}` over `[0, T]`;
//! 4. the ambiguity-free variant for the asset price itself.
//!
//! A failure is reported as (estimate, SE, bound, margin), never silently.

use rayon::prelude::*;

use crate::params::{dt_hat, dt_local, gbar_rate, HestonParams};
use crate::payoff::{mean_se, MIN_PATHS};
use crate::rng::path_rng;
use crate::sde::{walk_heston_path, PathGrid};
use crate::{Error, Result};

/// Supersolution parameters: exponent ϱ, weight slope b, integral weight k.
#[derive(Debug, Clone, Copy)]
pub struct SuperSolutionSpec {
    pub varrho: f64,
    pub b: f64,
    pub k: f64,
}

impl SuperSolutionSpec {
    /// Validates `ḡ2(Δt) ≥ b/2` for the computed local horizon (the paper's
    /// `b/64` term implies it only for b ≥ 1, so the inequality is checked
    /// directly) and the window for `k` when positive.
    pub fn new(varrho: f64, b: f64, k: f64, p: &HestonParams) -> Result<Self> {
        if b <= 0.0 {
            return Err(Error::InvalidParam {
                name: "b",
                value: b,
                reason: "weight slope must be positive".into(),
            });
        }
        if k < 0.0 {
            return Err(Error::InvalidParam {
                name: "k",
                value: k,
                reason: "integral weight must be non-negative".into(),
            });
        }
        let spec = SuperSolutionSpec { varrho, b, k };
        let dt = spec.dt_local(p);
        if spec.gbar2(dt) < b / 2.0 {
            return Err(Error::InvalidParam {
                name: "b",
                value: b,
                reason: format!(
                    "gbar2(dt) = {} < b/2; local horizon incompatible with the weight",
                    spec.gbar2(dt)
                ),
            });
        }
        Ok(spec)
    }

    /// The canonical instance: ϱ = 1−γ, b = 2·K6, k = 0.
    pub fn canonical(p: &HestonParams) -> Result<Self> {
        Self::new(1.0 - p.gamma, 2.0 * p.k6, 0.0, p)
    }

    pub fn rate(&self, p: &HestonParams) -> f64 {
        gbar_rate(p, self.varrho, self.b)
    }

    pub fn gbar1(&self, p: &HestonParams, s: f64) -> f64 {
        (-self.rate(p) * s).exp()
    }

    pub fn gbar2(&self, s: f64) -> f64 {
        self.b - 4.0 * s.sqrt()
    }

    pub fn wbar(&self, p: &HestonParams, s: f64, x: f64, v: f64) -> f64 {
        self.gbar1(p, s) * x.powf(self.varrho) * (self.gbar2(s) * v).exp()
    }

    /// Local horizon Δt for this instance.
    pub fn dt_local(&self, p: &HestonParams) -> f64 {
        dt_local(p, self.varrho, self.b)
    }
}

/// One bound check: one-sided pass means `estimate + 3·SE ≤ bound`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub bound: f64,
    /// `bound − estimate − 3·SE`; non-negative iff passed.
    pub margin: f64,
    pub passed: bool,
}

impl BoundCheck {
    fn one_sided(name: &str, estimate: f64, std_error: f64, bound: f64) -> Self {
        let margin = bound - estimate - 3.0 * std_error;
        BoundCheck {
            name: name.to_string(),
            estimate,
            std_error,
            bound,
            margin,
            passed: margin >= 0.0,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
    pub n_paths: usize,
    pub seed: u64,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Drift-maximising controls on the admissible box for weight slope `g2`
/// (either `ḡ2(s)` or the constant `b`): π maximises
/// `ϱ(ϱ−1)π²/2 + ϱ(σρg2 + μ2)π + Kφ·‖(ϱπ + σρg2, σ√(1−ρ²)g2)‖`
/// over `[−Kπ, Kπ]`, and φ̂ aligns with the gradient coefficient.
fn worst_controls(p: &HestonParams, varrho: f64, g2: f64) -> (f64, f64, f64) {
    let rho_c = (1.0 - p.rho * p.rho).sqrt();
    let a2 = p.sigma * rho_c * g2;
    let objective = |pi: f64| {
        let a1 = varrho * pi + p.sigma * p.rho * g2;
        0.5 * varrho * (varrho - 1.0) * pi * pi
            + varrho * (p.sigma * p.rho * g2 + p.mu2) * pi
            + p.kphi * (a1 * a1 + a2 * a2).sqrt()
    };
    let n = 801;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        let pi = -p.kpi + 2.0 * p.kpi * i as f64 / (n - 1) as f64;
        let v = objective(pi);
        if v > best.0 {
            best = (v, pi);
        }
    }
    let pi = best.1;
    let a1 = varrho * pi + p.sigma * p.rho * g2;
    let nrm = (a1 * a1 + a2 * a2).sqrt();
    if nrm > 0.0 {
        (pi, p.kphi * a1 / nrm, p.kphi * a2 / nrm)
    } else {
        (pi, 0.0, 0.0)
    }
}

fn collect_path_values<F>(n_paths: usize, eval: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    if n_paths < MIN_PATHS {
        return Err(Error::OutOfDomain(format!(
            "bound checks need n_paths >= {MIN_PATHS}, got {n_paths}"
        )));
    }
    let vals: Vec<Result<f64>> = (0..n_paths).into_par_iter().map(eval).collect();
    let mut out = Vec::with_capacity(n_paths);
    for v in vals {
        out.push(v?);
    }
    Ok(out)
}

/// Local estimate: `E[sup_{s≤Δt} w̄(s,X,P) + ∫ₜ^{Δt} (P/√s)·w̄ ds]`
/// against `10·w̄(t,x,p)`, with the singular integrand handled by the
/// substitution u = √s (paths simulated on the u-uniform grid).
pub fn verify_local(
    spec: &SuperSolutionSpec,
    p: &HestonParams,
    t: f64,
    x: f64,
    v: f64,
    grid: &PathGrid,
) -> Result<BoundReport> {
    let dt = spec.dt_local(p);
    if !(0.0..=dt).contains(&t) {
        return Err(Error::OutOfDomain(format!(
            "local estimate requires t in [0, {dt}], got {t}"
        )));
    }
    // sqrt-substitution grid: s_j = u_j^2 removes the 1/sqrt(s) singularity
    let n = grid.n_steps;
    let u0 = t.sqrt();
    let u1 = dt.sqrt();
    let du = (u1 - u0) / n as f64;
    let times: Vec<f64> = (0..=n)
        .map(|j| {
            let u = u0 + j as f64 * du;
            u * u
        })
        .collect();
    // per-step stress controls depend only on s through gbar2
    let controls: Vec<(f64, f64, f64)> = times
        .iter()
        .map(|&s| worst_controls(p, spec.varrho, spec.gbar2(s)))
        .collect();
    let strat = |s: f64, _v: f64| {
        let j = index_of(&times, s);
        controls[j].0
    };
    let amb = |s: f64, vv: f64| {
        let j = index_of(&times, s);
        let sq = vv.sqrt();
        (controls[j].1 * sq, controls[j].2 * sq)
    };

    let vals = collect_path_values(grid.n_paths, |i| {
        let mut rng = path_rng(grid.seed, i as u64);
        let mut sup = f64::NEG_INFINITY;
        let mut integral = 0.0;
        let end = walk_heston_path(&mut rng, &times, x, v, &strat, &amb, p, 1.0, |s| {
            let w = spec.wbar(p, s.t, s.x, s.v_pos);
            sup = sup.max(w);
            // ∫ P/√s w̄ ds = ∫ 2 P w̄ du, left rectangles in u
            integral += 2.0 * s.v_pos * w * du;
        })?;
        let w_end = spec.wbar(p, times[n], end.x, end.v_pos);
        sup = sup.max(w_end);
        Ok(sup + integral)
    })?;
    let (mean, se) = mean_se(&vals);
    let bound = 10.0 * spec.wbar(p, t, x, v);
    Ok(BoundReport {
        checks: vec![BoundCheck::one_sided("local_factor_10", mean, se, bound)],
        n_paths: grid.n_paths,
        seed: grid.seed,
        notes: vec![format!("dt_local = {dt}, ratio = {}", mean / bound)],
    })
}

fn index_of(times: &[f64], t: f64) -> usize {
    // the walker always calls with t = times[k]; resolve k by search
    match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
        Ok(i) => i,
        Err(i) => i.saturating_sub(1).min(times.len() - 1),
    }
}

/// Exponential moment: `E[exp((Kφ²/2) ∫ₜ^{Δ̂t} P ds)] ≤ 18·e^p`, accumulated
/// in the log domain.
pub fn verify_exp_moment(
    p: &HestonParams,
    t: f64,
    v: f64,
    grid: &PathGrid,
) -> Result<BoundReport> {
    let dt = dt_hat(p);
    if !(0.0..=dt).contains(&t) {
        return Err(Error::OutOfDomain(format!(
            "exponential moment requires t in [0, {dt}], got {t}"
        )));
    }
    let n = grid.n_steps;
    let times: Vec<f64> = (0..=n)
        .map(|j| t + (dt - t) * j as f64 / n as f64)
        .collect();
    // worst case for the variance drift: distortion aligned with the dP
    // diffusion direction
    let rho_c = (1.0 - p.rho * p.rho).sqrt();
    let amb = move |_s: f64, vv: f64| {
        let sq = vv.sqrt();
        (p.kphi * p.rho * sq, p.kphi * rho_c * sq)
    };
    let logs = collect_path_values(grid.n_paths, |i| {
        let mut rng = path_rng(grid.seed, i as u64);
        let mut acc = 0.0;
        walk_heston_path(&mut rng, &times, 1.0, v, &|_, _| 0.0, &amb, p, 1.0, |s| {
            acc += 0.5 * p.kphi * p.kphi * s.v_pos * s.dt;
        })?;
        Ok(acc)
    })?;
    let max_log = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_log > 700.0 {
        return Err(Error::Numeric(format!(
            "exponential accumulation overflows despite log domain: max exponent {max_log}"
        )));
    }
    let vals: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
    let (mean, se) = mean_se(&vals);
    let bound = 18.0 * v.exp();
    Ok(BoundReport {
        checks: vec![BoundCheck::one_sided("exp_moment_18", mean, se, bound)],
        n_paths: grid.n_paths,
        seed: grid.seed,
        notes: vec![format!("dt_hat = {dt}, ratio = {}", mean / bound)],
    })
}

/// Window check for the global estimate; returns `(rate, bound1, bound2)`.
fn global_window(spec: &SuperSolutionSpec, p: &HestonParams) -> Result<(f64, f64)> {
    let abar1 = (p.rho * spec.varrho).abs() * p.kpi
        + (p.rho.abs() + (1.0 - p.rho * p.rho).sqrt()) * p.kphi;
    let abar2 = (spec.varrho * spec.varrho - spec.varrho).max(0.0) * p.kpi * p.kpi
        + 2.0 * (spec.varrho * p.mu2).abs() * p.kpi
        + 2.0 * spec.varrho.abs() * p.kphi * p.kpi;
    let gap = p.kappa / p.sigma - abar1;
    if gap < abar2.sqrt() {
        return Err(Error::OutOfDomain(format!(
            "mean reversion too weak: kappa/sigma - abar1 = {gap} < sqrt(abar2) = {}",
            abar2.sqrt()
        )));
    }
    let delta1 = gap * gap - (abar2 + 2.0 * spec.k);
    if delta1 < 0.0 || 2.0 * spec.k > gap * gap - abar2 {
        return Err(Error::OutOfDomain(format!(
            "integral weight k = {} outside the admissible window",
            spec.k
        )));
    }
    let dev = p.sigma * spec.b - gap;
    if dev.abs() > delta1.sqrt() + 1e-12 {
        return Err(Error::OutOfDomain(format!(
            "weight slope b = {} outside the admissible window [{}, {}]",
            spec.b,
            (gap - delta1.sqrt()) / p.sigma,
            (gap + delta1.sqrt()) / p.sigma
        )));
    }
    Ok((gap, delta1))
}

/// Global estimates over `[t, T]`:
/// `sup_s E[X_s^ϱ e^{bP_s}] + k·E[∫ P X^ϱ e^{bP}] ≤ 5·e^{rate·T}·x^ϱ e^{bp}`
/// and, for k > 0,
/// `E[sup_s X_s^ϱ e^{bP_s}] ≤ 3[k + (|ϱ|Kπ + σ|ρ|b)² + σ²(1−ρ²)b²] e^{rate·T} x^ϱ e^{bp} / k`.
pub fn verify_global(
    spec: &SuperSolutionSpec,
    p: &HestonParams,
    t: f64,
    x: f64,
    v: f64,
    grid: &PathGrid,
) -> Result<BoundReport> {
    global_window(spec, p)?;
    let horizon = p.horizon;
    let n = grid.n_steps;
    let times: Vec<f64> = (0..=n)
        .map(|j| t + (horizon - t) * j as f64 / n as f64)
        .collect();
    let (pi_w, f1_w, f2_w) = worst_controls(p, spec.varrho, spec.b);
    let strat = move |_s: f64, _v: f64| pi_w;
    let amb = move |_s: f64, vv: f64| {
        let sq = vv.sqrt();
        (f1_w * sq, f2_w * sq)
    };

    // chunked, order-deterministic accumulation of per-time moments plus
    // per-path sup and integral values
    const CHUNK: usize = 512;
    let n_chunks = grid.n_paths.div_ceil(CHUNK);
    struct ChunkOut {
        sums: Vec<f64>,
        sumsq: Vec<f64>,
        sups: Vec<f64>,
        ints: Vec<f64>,
    }
    let chunks: Vec<Result<ChunkOut>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(grid.n_paths);
            let mut out = ChunkOut {
                sums: vec![0.0; n + 1],
                sumsq: vec![0.0; n + 1],
                sups: Vec::with_capacity(hi - lo),
                ints: Vec::with_capacity(hi - lo),
            };
            for i in lo..hi {
                let mut rng = path_rng(grid.seed, i as u64);
                let mut sup = f64::NEG_INFINITY;
                let mut integral = 0.0;
                let end =
                    walk_heston_path(&mut rng, &times, x, v, &strat, &amb, p, 1.0, |s| {
                        let a = s.x.powf(spec.varrho) * (spec.b * s.v_pos).exp();
                        out.sums[s.k] += a;
                        out.sumsq[s.k] += a * a;
                        sup = sup.max(a);
                        integral += s.v_pos * a * s.dt;
                    })?;
                let a_end = end.x.powf(spec.varrho) * (spec.b * end.v_pos).exp();
                out.sums[n] += a_end;
                out.sumsq[n] += a_end * a_end;
                sup = sup.max(a_end);
                out.sups.push(sup);
                out.ints.push(integral);
            }
            Ok(out)
        })
        .collect();

    let mut sums = vec![0.0; n + 1];
    let mut sumsq = vec![0.0; n + 1];
    let mut sups = Vec::with_capacity(grid.n_paths);
    let mut ints = Vec::with_capacity(grid.n_paths);
    for c in chunks {
        let c = c?;
        for j in 0..=n {
            sums[j] += c.sums[j];
            sumsq[j] += c.sumsq[j];
        }
        sups.extend_from_slice(&c.sups);
        ints.extend_from_slice(&c.ints);
    }
    if grid.n_paths < MIN_PATHS {
        return Err(Error::OutOfDomain(format!(
            "bound checks need n_paths >= {MIN_PATHS}"
        )));
    }

    let np = grid.n_paths as f64;
    let mut best_mean = f64::NEG_INFINITY;
    let mut best_se = 0.0;
    for j in 0..=n {
        let m = sums[j] / np;
        if m > best_mean {
            best_mean = m;
            let var = (sumsq[j] / np - m * m).max(0.0) * np / (np - 1.0);
            best_se = (var / np).sqrt();
        }
    }
    let (int_mean, int_se) = mean_se(&ints);
    let rate = spec.rate(p);
    let envelope = (rate * horizon).exp() * x.powf(spec.varrho) * (spec.b * v).exp();
    let combined = best_mean + spec.k * int_mean;
    let combined_se = best_se + spec.k * int_se;
    let mut checks = vec![BoundCheck::one_sided(
        "global_sup_of_means_plus_integral",
        combined,
        combined_se,
        5.0 * envelope,
    )];
    let mut notes = vec![format!("rate = {rate}")];
    if spec.k > 0.0 {
        let (sup_mean, sup_se) = mean_se(&sups);
        let c1 = spec.varrho.abs() * p.kpi + p.sigma * p.rho.abs() * spec.b;
        let c2sq = p.sigma * p.sigma * (1.0 - p.rho * p.rho) * spec.b * spec.b;
        let bound2 = 3.0 * (spec.k + c1 * c1 + c2sq) * envelope / spec.k;
        checks.push(BoundCheck::one_sided(
            "global_mean_of_sup",
            sup_mean,
            sup_se,
            bound2,
        ));
    } else {
        notes.push("k = 0: the pathwise-sup estimate requires k > 0; skipped".into());
    }
    Ok(BoundReport {
        checks,
        n_paths: grid.n_paths,
        seed: grid.seed,
        notes,
    })
}

/// Ambiguity-free estimate for the asset price `S` itself (π ≡ 1, φ ≡ 0):
/// `E[sup_s S^ϱ e^{bP} + ∫ P S^ϱ e^{bP} ds] ≤ C·S₀^ϱ e^{bp}` with the
/// constant assembled from the global estimates at Kφ = 0, Kπ = 1.
pub fn verify_nonambiguity(
    p: &HestonParams,
    varrho: f64,
    b: f64,
    t: f64,
    s0: f64,
    v: f64,
    grid: &PathGrid,
) -> Result<BoundReport> {
    let abar1 = (p.rho * varrho).abs();
    let abar2 = (varrho * varrho - varrho).max(0.0) + 2.0 * (varrho * p.mu2).abs();
    let gap = p.kappa / p.sigma - abar1;
    if gap <= abar2.sqrt() {
        return Err(Error::OutOfDomain(format!(
            "mean reversion too weak for the ambiguity-free window: gap {gap} vs sqrt {}",
            abar2.sqrt()
        )));
    }
    let delta2 = gap * gap - abar2;
    let dev = p.sigma * b - gap;
    if dev.abs() > delta2.sqrt() + 1e-12 {
        return Err(Error::OutOfDomain(format!(
            "b = {b} outside the window [{}, {}]",
            (gap - delta2.sqrt()) / p.sigma,
            (gap + delta2.sqrt()) / p.sigma
        )));
    }
    // half the admissible maximum 2k ≤ delta2 − dev²
    let k = 0.25 * (delta2 - dev * dev).max(0.0);
    let rate = (p.kappa * p.pbar * b + p.mu0 * varrho).abs();
    let horizon = p.horizon;
    let n = grid.n_steps;
    let times: Vec<f64> = (0..=n)
        .map(|j| t + (horizon - t) * j as f64 / n as f64)
        .collect();
    let vals = collect_path_values(grid.n_paths, |i| {
        let mut rng = path_rng(grid.seed, i as u64);
        let mut sup = f64::NEG_INFINITY;
        let mut integral = 0.0;
        let end = walk_heston_path(
            &mut rng,
            &times,
            s0,
            v,
            &|_, _| 1.0,
            &|_, _| (0.0, 0.0),
            p,
            1.0,
            |s| {
                let a = s.x.powf(varrho) * (b * s.v_pos).exp();
                sup = sup.max(a);
                integral += s.v_pos * a * s.dt;
            },
        )?;
        let a_end = end.x.powf(varrho) * (b * end.v_pos).exp();
        Ok(sup.max(a_end) + integral)
    })?;
    let (mean, se) = mean_se(&vals);
    let envelope = (rate * horizon).exp() * s0.powf(varrho) * (b * v).exp();
    let mut notes = vec![format!("k = {k}, rate = {rate}")];
    let bound = if k > 0.0 {
        let c1 = varrho.abs() + p.sigma * p.rho.abs() * b;
        let c2sq = p.sigma * p.sigma * (1.0 - p.rho * p.rho) * b * b;
        (3.0 * (k + c1 * c1 + c2sq) + 5.0) * envelope / k
    } else {
        notes.push("window boundary: the stated constant degenerates, bound is vacuous".into());
        f64::INFINITY
    };
    Ok(BoundReport {
        checks: vec![BoundCheck::one_sided("nonambiguity", mean, se, bound)],
        n_paths: grid.n_paths,
        seed: grid.seed,
        notes,
    })
}

/// Deterministic supersolution-sign check: the drift functional
/// `L w̄ / w̄ + p/√s` maximised over the admissible control box must be
/// non-positive on a grid over `(0, Δt] × (0, p_max]`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SignCheck {
    pub max_value: f64,
    pub passed: bool,
    pub grid_s: usize,
    pub grid_p: usize,
}

pub fn supersolution_sign_check(
    spec: &SuperSolutionSpec,
    p: &HestonParams,
    grid_s: usize,
    grid_p: usize,
    p_max: f64,
) -> SignCheck {
    let dt = spec.dt_local(p);
    let rate = spec.rate(p);
    let mut max_value = f64::NEG_INFINITY;
    for i in 0..grid_s {
        let s = dt * (i + 1) as f64 / grid_s as f64;
        let g2 = spec.gbar2(s);
        // time/state-independent part: gbar1'/gbar1 + mu0 rho + kappa pbar gbar2
        let a_part = -rate + p.mu0 * spec.varrho + p.kappa * p.pbar * g2;
        // p-linear part, maximised over the control box
        let (pi, f1, f2) = worst_controls(p, spec.varrho, g2);
        let control_part = 0.5 * spec.varrho * (spec.varrho - 1.0) * pi * pi
            + p.sigma * p.rho * spec.varrho * g2 * pi
            + spec.varrho * p.mu2 * pi
            + spec.varrho * pi * f1
            + p.sigma * p.rho * g2 * f1
            + p.sigma * (1.0 - p.rho * p.rho).sqrt() * g2 * f2;
        let b_part = -2.0 / s.sqrt()
            + 0.5 * p.sigma * p.sigma * g2 * g2
            - p.kappa * g2
            + control_part
            + 1.0 / s.sqrt();
        for j in 0..grid_p {
            let pp = p_max * (j + 1) as f64 / grid_p as f64;
            max_value = max_value.max(a_part + pp * b_part);
        }
    }
    SignCheck {
        max_value,
        passed: max_value <= 1e-12,
        grid_s,
        grid_p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> HestonParams {
        HestonParams::reference()
    }

    fn grid(n_steps: usize, n_paths: usize, seed: u64) -> PathGrid {
        PathGrid::new(0.0, 1.0, n_steps, n_paths, seed).unwrap()
    }

    #[test]
    fn spec_validates_weight_consistency() {
        let p = reference();
        let spec = SuperSolutionSpec::canonical(&p).unwrap();
        let dt = spec.dt_local(&p);
        assert!(spec.gbar2(dt) >= spec.b / 2.0);
        // tiny b makes gbar2(dt) < b/2 because dt is capped by the bracket
        // term rather than b^2/64
        assert!(SuperSolutionSpec::new(-1.0, 0.05, 0.0, &p).is_err());
    }

    #[test]
    fn local_bound_deterministic_degenerate_case() {
        // sigma -> 0, controls pinned to ~0, rho-exponent 0: the path is the
        // deterministic mean reversion and the ratio stays below 1
        let mut p = reference();
        p.sigma = 1e-9;
        p.kpi = 1e-12;
        p.kphi = 1e-12;
        let spec = SuperSolutionSpec::new(0.0, 2.0, 0.0, &p).unwrap();
        let rep = verify_local(&spec, &p, 0.0, 1.0, 0.04, &grid(200, 200, 7)).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let c = &rep.checks[0];
        assert!(c.estimate / c.bound < 1.0);
    }

    #[test]
    fn local_bound_invariant_in_x_when_exponent_zero() {
        let p = reference();
        let spec = SuperSolutionSpec::new(0.0, 2.0, 0.0, &p).unwrap();
        let a = verify_local(&spec, &p, 0.0, 1.0, 0.04, &grid(100, 400, 3)).unwrap();
        let b = verify_local(&spec, &p, 0.0, 5.0, 0.04, &grid(100, 400, 3)).unwrap();
        assert_eq!(a.checks[0].estimate.to_bits(), b.checks[0].estimate.to_bits());
    }

    #[test]
    fn local_bound_reference_worst_case_passes() {
        let p = reference();
        let spec = SuperSolutionSpec::canonical(&p).unwrap();
        let rep = verify_local(&spec, &p, 0.0, 1.0, 0.04, &grid(200, 20_000, 42)).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn local_rejects_t_beyond_horizon() {
        let p = reference();
        let spec = SuperSolutionSpec::canonical(&p).unwrap();
        let dt = spec.dt_local(&p);
        assert!(verify_local(&spec, &p, dt * 1.5, 1.0, 0.04, &grid(50, 200, 1)).is_err());
    }

    #[test]
    fn exp_moment_zero_ambiguity_is_unity() {
        let mut p = reference();
        p.kphi = 1e-300;
        let rep = verify_exp_moment(&p, 0.0, 0.04, &grid(50, 200, 5)).unwrap();
        let c = &rep.checks[0];
        assert!((c.estimate - 1.0).abs() < 1e-12);
        assert!(c.passed);
    }

    #[test]
    fn exp_moment_reference_passes_across_v() {
        let p = reference();
        for v in [0.01, 0.04, 0.16] {
            let rep = verify_exp_moment(&p, 0.0, v, &grid(100, 10_000, 42)).unwrap();
            assert!(rep.passed(), "v = {v}: {rep:?}");
        }
    }

    #[test]
    fn global_bounds_reference_pass() {
        let p = reference();
        // canonical instance with a positive integral weight inside the window
        let spec = SuperSolutionSpec::new(1.0 - p.gamma, 2.0 * p.k6, 0.45, &p).unwrap();
        let rep = verify_global(&spec, &p, 0.0, 1.0, 0.04, &grid(200, 20_000, 42)).unwrap();
        assert_eq!(rep.checks.len(), 2);
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn global_k_zero_checks_first_inequality_only() {
        let p = reference();
        let spec = SuperSolutionSpec::canonical(&p).unwrap();
        let rep = verify_global(&spec, &p, 0.0, 1.0, 0.04, &grid(100, 2_000, 9)).unwrap();
        assert_eq!(rep.checks.len(), 1);
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn global_rejects_window_violation() {
        let p = reference();
        // k too large for the window
        let spec = SuperSolutionSpec {
            varrho: -1.0,
            b: 2.0,
            k: 1e9,
        };
        assert!(verify_global(&spec, &p, 0.0, 1.0, 0.04, &grid(10, 200, 1)).is_err());
    }

    #[test]
    fn nonambiguity_reference_passes() {
        let p = reference();
        // window for rho-exponent 2: [(gap - sqrt(d2))/sigma, (gap + sqrt)/sigma]
        let rep = verify_nonambiguity(&p, 2.0, 44.0, 0.0, 1.0, 0.04, &grid(200, 10_000, 42))
            .unwrap();
        assert!(rep.passed(), "{rep:?}");
        // near-endpoint b still passes
        let rep2 = verify_nonambiguity(&p, 2.0, 3.0, 0.0, 1.0, 0.04, &grid(200, 10_000, 42))
            .unwrap();
        assert!(rep2.passed(), "{rep2:?}");
    }

    #[test]
    fn nonambiguity_trivial_unit_functional() {
        let p = reference();
        // rho-exponent 0 and b = 0 sits on the window boundary: functional
        // reduces to 1 + ∫P and the stated constant degenerates (vacuous)
        let rep = verify_nonambiguity(&p, 0.0, 0.0, 0.0, 1.0, 0.04, &grid(50, 500, 2)).unwrap();
        assert!(rep.passed());
        assert!(rep.checks[0].bound.is_infinite());
        assert!(rep.checks[0].estimate.is_finite());
    }

    #[test]
    fn nonambiguity_rejects_bad_window() {
        let p = reference();
        assert!(verify_nonambiguity(&p, 2.0, 500.0, 0.0, 1.0, 0.04, &grid(10, 200, 1)).is_err());
    }

    #[test]
    fn supersolution_sign_holds_on_grid() {
        let p = reference();
        let spec = SuperSolutionSpec::canonical(&p).unwrap();
        let p_max = p.pbar + 10.0 * p.sigma * (p.pbar / (2.0 * p.kappa)).sqrt();
        let check = supersolution_sign_check(&spec, &p, 200, 200, p_max);
        assert!(check.passed, "max drift functional {}", check.max_value);
    }
}
