//! Monte Carlo estimation of the recursive payoffs whose running reward
//! couples back to a supplied value function, plus saddle-point perturbation
//! probes under common random numbers.
//!
//! The consumption-model payoff is
//!
//! ```text
//! J1 = E[ ∫ₜᵀ e^{−δ(s−t)} ( c_s^{1−γ}/(1−γ) + (1−γ)σ²φ_s²/(2θ) · W(s, X_s) ) ds
//!        + e^{−δ(T−t)} X_T^{1−γ}/(1−γ) ]
//! ```
//!
//! and the stochastic-volatility payoff
//!
//! ```text
//! J2 = E[ ∫ₜᵀ (1−γ)|φ_s|²/(2θ) · W(s, X_s, P_s) ds + X_T^{1−γ}/(1−γ) ]
//! ```
//!
//! with the callback `W` frozen — the fixed-point property `J = W` holds
//! exactly when the callback is the value function and the controls are the
//! optimal feedbacks. Quadrature is the left-endpoint rectangle rule,
//! matching the control freeze of the path scheme.

use rayon::prelude::*;

use crate::closedform::{HestonClosedForm, MertonClosedForm};
use crate::params::{HestonParams, MertonParams};
use crate::rng::path_rng;
use crate::sde::{walk_heston_path, walk_merton_path, PathGrid};
use crate::{Error, Result};

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Minimum number of paths for a reportable estimate.
pub const MIN_PATHS: usize = 100;

/// Sample mean and standard error (unbiased sample variance).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn collect_paths<F>(n_paths: usize, eval: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    if n_paths < MIN_PATHS {
        return Err(Error::OutOfDomain(format!(
            "estimates are reported only for n_paths >= {MIN_PATHS}, got {n_paths}"
        )));
    }
    let vals: Vec<Result<f64>> = (0..n_paths).into_par_iter().map(eval).collect();
    let mut out = Vec::with_capacity(n_paths);
    for v in vals {
        out.push(v?);
    }
    Ok(out)
}

fn estimate_from(values: Vec<f64>, seed: u64) -> McEstimate {
    let (mean, std_error) = mean_se(&values);
    McEstimate {
        mean,
        std_error,
        n_paths: values.len(),
        seed,
    }
}

fn check_grid_reaches_horizon(grid: &PathGrid, horizon: f64) -> Result<()> {
    if (grid.t1 - horizon).abs() > 1e-12 {
        return Err(Error::OutOfDomain(format!(
            "payoff integrates to the horizon: grid.t1 = {} but T = {horizon}",
            grid.t1
        )));
    }
    Ok(())
}

/// One path's J1 functional under given feedbacks, with the supplied
/// coupling callback. `noise_sign` supports antithetic pairing.
fn j1_single_path(
    seed: u64,
    path: u64,
    times: &[f64],
    x0: f64,
    strat: &impl Fn(f64, f64) -> (f64, f64),
    amb: &impl Fn(f64, f64) -> f64,
    wcb: &impl Fn(f64, f64) -> f64,
    p: &MertonParams,
    noise_sign: f64,
) -> Result<f64> {
    let t0 = times[0];
    let entropy_w = (1.0 - p.gamma) * p.sigma * p.sigma / (2.0 * p.theta);
    let mut acc = 0.0;
    let mut bad: Option<(f64, f64)> = None;
    let mut rng = path_rng(seed, path);
    let xt = walk_merton_path(&mut rng, times, x0, strat, amb, p, noise_sign, |s| {
        let w = wcb(s.t, s.x);
        if !w.is_finite() {
            bad = bad.or(Some((s.t, s.x)));
            return;
        }
        let disc = (-p.delta * (s.t - t0)).exp();
        acc += disc * (s.c.powf(1.0 - p.gamma) / (1.0 - p.gamma) + entropy_w * s.phi * s.phi * w)
            * s.dt;
    })?;
    if let Some((t, x)) = bad {
        return Err(Error::NonFinite(format!(
            "value callback at (t, x) = ({t}, {x}) on path {path}"
        )));
    }
    acc += (-p.delta * (times[times.len() - 1] - t0)).exp() * xt.powf(1.0 - p.gamma)
        / (1.0 - p.gamma);
    Ok(acc)
}

/// Monte Carlo estimate of the consumption-model payoff J1 started at
/// `(grid.t0, x0)`. The grid must end at the horizon.
pub fn estimate_j1(
    x0: f64,
    strat: &(impl Fn(f64, f64) -> (f64, f64) + Sync),
    amb: &(impl Fn(f64, f64) -> f64 + Sync),
    wcb: &(impl Fn(f64, f64) -> f64 + Sync),
    grid: &PathGrid,
    p: &MertonParams,
) -> Result<McEstimate> {
    check_grid_reaches_horizon(grid, p.horizon)?;
    let times = grid.times();
    let vals = collect_paths(grid.n_paths, |i| {
        j1_single_path(grid.seed, i as u64, &times, x0, strat, amb, wcb, p, 1.0)
    })?;
    Ok(estimate_from(vals, grid.seed))
}

fn j2_single_path(
    seed: u64,
    path: u64,
    times: &[f64],
    x0: f64,
    v0: f64,
    strat: &impl Fn(f64, f64) -> f64,
    amb: &impl Fn(f64, f64) -> (f64, f64),
    wcb: &impl Fn(f64, f64, f64) -> f64,
    p: &HestonParams,
    noise_sign: f64,
) -> Result<f64> {
    let entropy_w = (1.0 - p.gamma) / (2.0 * p.theta);
    let mut acc = 0.0;
    let mut bad: Option<(f64, f64, f64)> = None;
    let mut rng = path_rng(seed, path);
    let end = walk_heston_path(&mut rng, times, x0, v0, strat, amb, p, noise_sign, |s| {
        let w = wcb(s.t, s.x, s.v_pos);
        if !w.is_finite() {
            bad = bad.or(Some((s.t, s.x, s.v_pos)));
            return;
        }
        acc += entropy_w * (s.phi1 * s.phi1 + s.phi2 * s.phi2) * w * s.dt;
    })?;
    if let Some((t, x, v)) = bad {
        return Err(Error::NonFinite(format!(
            "value callback at (t, x, v) = ({t}, {x}, {v}) on path {path}"
        )));
    }
    acc += end.x.powf(1.0 - p.gamma) / (1.0 - p.gamma);
    Ok(acc)
}

/// Monte Carlo estimate of the stochastic-volatility payoff J2 started at
/// `(grid.t0, x0, v0)`. No discounting: the generator is y-free.
pub fn estimate_j2(
    x0: f64,
    v0: f64,
    strat: &(impl Fn(f64, f64) -> f64 + Sync),
    amb: &(impl Fn(f64, f64) -> (f64, f64) + Sync),
    wcb: &(impl Fn(f64, f64, f64) -> f64 + Sync),
    grid: &PathGrid,
    p: &HestonParams,
) -> Result<McEstimate> {
    check_grid_reaches_horizon(grid, p.horizon)?;
    let times = grid.times();
    let vals = collect_paths(grid.n_paths, |i| {
        j2_single_path(grid.seed, i as u64, &times, x0, v0, strat, amb, wcb, p, 1.0)
    })?;
    Ok(estimate_from(vals, grid.seed))
}

/// A saddle perturbation: shift the investment fraction by `dpi` and scale
/// the worst-case distortion by `1 + dphi`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Perturbation {
    pub dpi: f64,
    pub dphi: f64,
}

/// Which side of the saddle inequality a probe tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ProbeSide {
    /// π perturbed: J(π*+dpi, φ*) ≤ J(π*, φ*) expected.
    MaximiserSide,
    /// φ perturbed: J(π*, (1+dphi)φ*) ≥ J(π*, φ*) expected.
    MinimiserSide,
    /// Mixed or identity perturbation: no one-sided prediction.
    None,
}

/// Outcome of one perturbation probe (common random numbers against the
/// baseline).
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProbeOutcome {
    pub perturbation: Perturbation,
    pub side: ProbeSide,
    /// Set when the perturbed control leaves the admissible set.
    pub skipped: Option<String>,
    pub estimate: Option<McEstimate>,
    /// Mean and standard error of the pathwise difference J_pert − J_base.
    pub diff_mean: f64,
    pub diff_se: f64,
    /// One-sided violation beyond 3 standard errors of the difference.
    pub violated: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SaddleReport {
    pub baseline: McEstimate,
    pub closed_form: f64,
    pub probes: Vec<ProbeOutcome>,
}

impl SaddleReport {
    pub fn any_violation(&self) -> bool {
        self.probes.iter().any(|p| p.violated)
    }
}

fn probe_side(pert: &Perturbation) -> ProbeSide {
    match (pert.dpi != 0.0, pert.dphi != 0.0) {
        (true, false) => ProbeSide::MaximiserSide,
        (false, true) => ProbeSide::MinimiserSide,
        _ => ProbeSide::None,
    }
}

fn judge(side: ProbeSide, diff_mean: f64, diff_se: f64) -> bool {
    match side {
        ProbeSide::MaximiserSide => diff_mean > 3.0 * diff_se,
        ProbeSide::MinimiserSide => diff_mean < -3.0 * diff_se,
        ProbeSide::None => false,
    }
}

/// Saddle probes for the consumption model at `(grid.t0, x0)` with the
/// closed-form optimum as baseline.
pub fn saddle_probe_merton(
    x0: f64,
    p: &MertonParams,
    perturbations: &[Perturbation],
    grid: &PathGrid,
) -> Result<SaddleReport> {
    check_grid_reaches_horizon(grid, p.horizon)?;
    let cf = MertonClosedForm::new(p.clone())?;
    let times = grid.times();
    let wcb = |t: f64, x: f64| cf.value(t, x).expect("positive wealth");

    let perturbed_values = |dpi: f64, scale: f64| -> Result<Vec<f64>> {
        collect_paths(grid.n_paths, |i| {
            j1_single_path(
                grid.seed,
                i as u64,
                &times,
                x0,
                &|t, x| {
                    let s = cf.strategy(t, x);
                    (s.pi + dpi, s.c)
                },
                &|t, x| scale * cf.strategy(t, x).phi1,
                &wcb,
                p,
                1.0,
            )
        })
    };

    let base_vals = collect_paths(grid.n_paths, |i| {
        j1_single_path(
            grid.seed,
            i as u64,
            &times,
            x0,
            &|t, x| {
                let s = cf.strategy(t, x);
                (s.pi, s.c)
            },
            &|t, x| cf.strategy(t, x).phi1,
            &wcb,
            p,
            1.0,
        )
    })?;
    let baseline = estimate_from(base_vals.clone(), grid.seed);
    let closed_form = cf.value(grid.t0, x0)?;

    let st0 = cf.strategy(0.0, 1.0);
    let mut probes = Vec::new();
    for pert in perturbations {
        let side = probe_side(pert);
        let scale = 1.0 + pert.dphi;
        // admissibility of the perturbed controls
        let mut skipped = None;
        if (st0.pi + pert.dpi).abs() > p.k4 {
            skipped = Some(format!("|pi* + {}| exceeds K4", pert.dpi));
        }
        if (scale * st0.phi1).abs() > p.k4 {
            skipped = Some(format!("|{scale} * phi*| exceeds K4"));
        }
        if let Some(reason) = skipped {
            probes.push(ProbeOutcome {
                perturbation: *pert,
                side,
                skipped: Some(reason),
                estimate: None,
                diff_mean: 0.0,
                diff_se: 0.0,
                violated: false,
            });
            continue;
        }
        let perts = perturbed_values(pert.dpi, scale)?;
        let diffs: Vec<f64> = perts
            .iter()
            .zip(base_vals.iter())
            .map(|(q, b)| q - b)
            .collect();
        let (diff_mean, diff_se) = mean_se(&diffs);
        probes.push(ProbeOutcome {
            perturbation: *pert,
            side,
            skipped: None,
            estimate: Some(estimate_from(perts, grid.seed)),
            diff_mean,
            diff_se,
            violated: judge(side, diff_mean, diff_se),
        });
    }

    Ok(SaddleReport {
        baseline,
        closed_form,
        probes,
    })
}

/// Saddle probes for the stochastic-volatility model at
/// `(grid.t0, x0, v0)`.
pub fn saddle_probe_heston(
    x0: f64,
    v0: f64,
    p: &HestonParams,
    perturbations: &[Perturbation],
    grid: &PathGrid,
) -> Result<SaddleReport> {
    check_grid_reaches_horizon(grid, p.horizon)?;
    let cf = HestonClosedForm::new(p.clone())?;
    let times = grid.times();
    let wcb = |t: f64, x: f64, v: f64| {
        let (g2, g3) = cf.g2_g3(t).expect("t within horizon");
        g2 * (g3 * v).exp() * x.powf(1.0 - p.gamma) / (1.0 - p.gamma)
    };

    let perturbed_values = |dpi: f64, scale: f64| -> Result<Vec<f64>> {
        collect_paths(grid.n_paths, |i| {
            j2_single_path(
                grid.seed,
                i as u64,
                &times,
                x0,
                v0,
                &|t, _v| cf.normalized_strategy(t).0 + dpi,
                &|t, v| {
                    let s = cf.strategy(t, v);
                    (scale * s.phi1, scale * s.phi2)
                },
                &wcb,
                p,
                1.0,
            )
        })
    };

    let base_vals = collect_paths(grid.n_paths, |i| {
        j2_single_path(
            grid.seed,
            i as u64,
            &times,
            x0,
            v0,
            &|t, _v| cf.normalized_strategy(t).0,
            &|t, v| {
                let s = cf.strategy(t, v);
                (s.phi1, s.phi2)
            },
            &wcb,
            p,
            1.0,
        )
    })?;
    let baseline = estimate_from(base_vals.clone(), grid.seed);
    let closed_form = cf.value(grid.t0, x0, v0)?;

    // admissibility extremes of the perturbed controls over the horizon
    let n_scan = 512;
    let mut pi_max: f64 = 0.0;
    let mut phi_hat_max: f64 = 0.0;
    for i in 0..=n_scan {
        let t = p.horizon * i as f64 / n_scan as f64;
        let (pi, ph1, ph2) = cf.normalized_strategy(t);
        pi_max = pi_max.max(pi.abs());
        phi_hat_max = phi_hat_max.max((ph1 * ph1 + ph2 * ph2).sqrt());
    }
    let pi_signed: (f64, f64) = {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=n_scan {
            let t = p.horizon * i as f64 / n_scan as f64;
            let (pi, _, _) = cf.normalized_strategy(t);
            lo = lo.min(pi);
            hi = hi.max(pi);
        }
        (lo, hi)
    };

    let mut probes = Vec::new();
    for pert in perturbations {
        let side = probe_side(pert);
        let scale = 1.0 + pert.dphi;
        let mut skipped = None;
        if (pi_signed.0 + pert.dpi).abs() > p.kpi || (pi_signed.1 + pert.dpi).abs() > p.kpi {
            skipped = Some(format!("|pi* + {}| exceeds Kpi somewhere on [0, T]", pert.dpi));
        }
        if (scale.abs() * phi_hat_max) > p.kphi {
            skipped = Some(format!(
                "|{scale} * phi*| leaves the Kphi sqrt(p) ball somewhere on [0, T]"
            ));
        }
        if let Some(reason) = skipped {
            probes.push(ProbeOutcome {
                perturbation: *pert,
                side,
                skipped: Some(reason),
                estimate: None,
                diff_mean: 0.0,
                diff_se: 0.0,
                violated: false,
            });
            continue;
        }
        let perts = perturbed_values(pert.dpi, scale)?;
        let diffs: Vec<f64> = perts
            .iter()
            .zip(base_vals.iter())
            .map(|(q, b)| q - b)
            .collect();
        let (diff_mean, diff_se) = mean_se(&diffs);
        probes.push(ProbeOutcome {
            perturbation: *pert,
            side,
            skipped: None,
            estimate: Some(estimate_from(perts, grid.seed)),
            diff_mean,
            diff_se,
            violated: judge(side, diff_mean, diff_se),
        });
    }

    Ok(SaddleReport {
        baseline,
        closed_form,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j1_deterministic_flat_integrand_is_exact() {
        // pi = 0, phi = 0, c = eps x with delta = eps - mu0 and gamma = 2
        // makes the discounted utility integrand constant, so the rectangle
        // rule is exact: J1 = -T/(eps x) - e^{-delta T} e^{(eps-mu0) T}/x.
        let p = MertonParams {
            mu0: 0.03,
            mu1: 0.03,
            sigma: 0.2,
            delta: 0.09,
            gamma: 2.0,
            theta: 1.0,
            k4: 10.0,
            horizon: 1.0,
            k5: 4.0,
        };
        let eps = 0.12;
        let x0 = 2.0;
        let grid = PathGrid::new(0.0, 1.0, 64, 128, 3).unwrap();
        let est = estimate_j1(
            x0,
            &|_t, x| (0.0, eps * x),
            &|_, _| 0.0,
            &|_, _| 0.0,
            &grid,
            &p,
        )
        .unwrap();
        let xt = x0 * ((p.mu0 - eps) * 1.0_f64).exp();
        let exact = -1.0 / (eps * x0) - (-p.delta * 1.0_f64).exp() / xt;
        assert!(est.std_error < 1e-14);
        assert!(
            (est.mean - exact).abs() < 1e-9,
            "{} vs {exact}",
            est.mean
        );
    }

    #[test]
    fn j1_deterministic_quadrature_error_shrinks_first_order() {
        // with a non-flat integrand the rectangle-rule error is O(dt)
        let p = MertonParams::reference();
        let run = |n_steps: usize| {
            let grid = PathGrid::new(0.0, 1.0, n_steps, 128, 3).unwrap();
            estimate_j1(
                1.0,
                &|_t, x| (0.0, 0.5 * x),
                &|_, _| 0.0,
                &|_, _| 0.0,
                &grid,
                &p,
            )
            .unwrap()
            .mean
        };
        let coarse = run(200);
        let fine = run(400);
        let finest = run(800);
        let e1 = (coarse - fine).abs();
        let e2 = (fine - finest).abs();
        assert!(e2 < e1 && e2 > 0.3 * e1, "ratios off: {e1} vs {e2}");
    }

    #[test]
    fn j1_coupling_reproduces_value_function() {
        // optimal controls + closed-form callback => J1 = W within 3 SE
        // (evaluated late in the horizon where the O(dt) control-freeze bias
        // sits below the statistical band)
        let p = MertonParams::reference();
        let cf = MertonClosedForm::new(p.clone()).unwrap();
        let grid = PathGrid::new(0.9, 1.0, 200, 20_000, 42).unwrap();
        let est = estimate_j1(
            1.0,
            &|t, x| {
                let s = cf.strategy(t, x);
                (s.pi, s.c)
            },
            &|t, x| cf.strategy(t, x).phi1,
            &|t, x| cf.value(t, x).unwrap(),
            &grid,
            &p,
        )
        .unwrap();
        let w = cf.value(0.9, 1.0).unwrap();
        assert!(
            (est.mean - w).abs() <= 3.0 * est.std_error,
            "J = {} vs W = {w}, se = {}",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn j1_callback_sign_of_entropy_difference() {
        // Wcb = 0 vs Wcb = W differ by the entropy term only; its sign is
        // sign((1-gamma) W phi^2) = positive for gamma > 1 (W < 0).
        let p = MertonParams::reference();
        let cf = MertonClosedForm::new(p.clone()).unwrap();
        let grid = PathGrid::new(0.0, 1.0, 100, 1000, 5).unwrap();
        let strat = |t: f64, x: f64| {
            let s = cf.strategy(t, x);
            (s.pi, s.c)
        };
        let amb = |t: f64, x: f64| cf.strategy(t, x).phi1;
        let with_w = estimate_j1(
            1.0,
            &strat,
            &amb,
            &|t, x| cf.value(t, x).unwrap(),
            &grid,
            &p,
        )
        .unwrap();
        let with_zero = estimate_j1(1.0, &strat, &amb, &|_, _| 0.0, &grid, &p).unwrap();
        // identical seeds: the difference is exactly the entropy term
        let diff = with_w.mean - with_zero.mean;
        assert!(diff > 0.0, "entropy contribution should be positive, got {diff}");
    }

    #[test]
    fn j2_zero_ambiguity_reduces_to_terminal_utility() {
        let p = HestonParams::reference();
        let grid = PathGrid::new(0.0, 1.0, 50, 2000, 8).unwrap();
        let j = estimate_j2(
            1.0,
            0.04,
            &|_, _| 0.5,
            &|_, _| (0.0, 0.0),
            &|_, _, _| 123.0, // callback value must not matter when phi = 0
            &grid,
            &p,
        )
        .unwrap();
        // compare against direct terminal-utility estimate on same seeds
        let times = grid.times();
        let direct: Vec<f64> = (0..grid.n_paths)
            .map(|i| {
                let mut rng = path_rng(grid.seed, i as u64);
                let end = walk_heston_path(
                    &mut rng,
                    &times,
                    1.0,
                    0.04,
                    &|_, _| 0.5,
                    &|_, _| (0.0, 0.0),
                    &p,
                    1.0,
                    |_| {},
                )
                .unwrap();
                end.x.powf(1.0 - p.gamma) / (1.0 - p.gamma)
            })
            .collect();
        let (dm, _) = mean_se(&direct);
        assert!((j.mean - dm).abs() < 1e-14);
    }

    #[test]
    fn j2_coupling_reproduces_value_function() {
        let p = HestonParams::reference();
        let cf = HestonClosedForm::new(p.clone()).unwrap();
        let grid = PathGrid::new(0.0, 1.0, 100, 20_000, 42).unwrap();
        let est = estimate_j2(
            1.0,
            0.04,
            &|t, _v| cf.normalized_strategy(t).0,
            &|t, v| {
                let s = cf.strategy(t, v);
                (s.phi1, s.phi2)
            },
            &|t, x, v| cf.value(t, x, v).unwrap(),
            &grid,
            &p,
        )
        .unwrap();
        let w = cf.value(0.0, 1.0, 0.04).unwrap();
        assert!(
            (est.mean - w).abs() <= 3.0 * est.std_error,
            "J = {} vs W = {w}, se = {}",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn j2_se_scales_like_inverse_sqrt_paths() {
        let p = HestonParams::reference();
        let cf = HestonClosedForm::new(p.clone()).unwrap();
        let run = |n: usize| {
            let grid = PathGrid::new(0.0, 1.0, 50, n, 21).unwrap();
            estimate_j2(
                1.0,
                0.04,
                &|t, _v| cf.normalized_strategy(t).0,
                &|t, v| {
                    let s = cf.strategy(t, v);
                    (s.phi1, s.phi2)
                },
                &|t, x, v| cf.value(t, x, v).unwrap(),
                &grid,
                &p,
            )
            .unwrap()
            .std_error
        };
        let se1 = run(4000);
        let se2 = run(8000);
        let ratio = se2 / se1;
        let expect = 1.0 / 2.0_f64.sqrt();
        assert!(
            (ratio - expect).abs() <= 0.1 * expect,
            "SE ratio {ratio} vs {expect}"
        );
    }

    #[test]
    fn monotone_in_callback_when_gamma_below_one() {
        // for gamma < 1 the entropy weight (1-gamma)phi^2/(2 theta) is
        // non-negative, so a pointwise-larger callback increases J2 under
        // identical seeds
        let mut p = HestonParams::reference();
        p.gamma = 0.5;
        p.theta = 1.5;
        let cf = HestonClosedForm::new(p.clone()).unwrap();
        let grid = PathGrid::new(0.0, 1.0, 50, 1000, 17).unwrap();
        let strat = |t: f64, _v: f64| cf.normalized_strategy(t).0;
        let amb = |t: f64, v: f64| {
            let s = cf.strategy(t, v);
            (s.phi1, s.phi2)
        };
        let lo = estimate_j2(1.0, 0.04, &strat, &amb, &|t, x, v| {
            cf.value(t, x, v).unwrap()
        }, &grid, &p)
        .unwrap();
        let hi = estimate_j2(1.0, 0.04, &strat, &amb, &|t, x, v| {
            cf.value(t, x, v).unwrap() + 0.5
        }, &grid, &p)
        .unwrap();
        assert!(hi.mean > lo.mean);
    }

    #[test]
    fn rejects_too_few_paths() {
        let p = MertonParams::reference();
        let grid = PathGrid::new(0.0, 1.0, 10, 50, 3).unwrap();
        assert!(estimate_j1(1.0, &|_t, x| (0.0, x), &|_, _| 0.0, &|_, _| 0.0, &grid, &p).is_err());
    }

    #[test]
    fn nonfinite_callback_aborts_with_diagnostics() {
        let p = MertonParams::reference();
        let grid = PathGrid::new(0.0, 1.0, 10, 200, 3).unwrap();
        let r = estimate_j1(
            1.0,
            &|_t, x| (0.0, x),
            &|_, _| 0.0,
            &|_, _| f64::NAN,
            &grid,
            &p,
        );
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn saddle_identity_perturbation_is_zero() {
        let p = MertonParams::reference();
        let grid = PathGrid::new(0.9, 1.0, 30, 400, 9).unwrap();
        let report = saddle_probe_merton(
            1.0,
            &p,
            &[Perturbation {
                dpi: 0.0,
                dphi: 0.0,
            }],
            &grid,
        )
        .unwrap();
        let probe = &report.probes[0];
        assert_eq!(probe.diff_mean, 0.0);
        assert_eq!(probe.diff_se, 0.0);
        assert!(!probe.violated);
    }

    #[test]
    fn saddle_probes_hold_one_sided() {
        let p = MertonParams::reference();
        let grid = PathGrid::new(0.5, 1.0, 100, 4000, 11).unwrap();
        let report = saddle_probe_merton(
            1.0,
            &p,
            &[
                Perturbation { dpi: 0.2, dphi: 0.0 },
                Perturbation { dpi: -0.2, dphi: 0.0 },
                Perturbation { dpi: 0.0, dphi: 0.5 },
                Perturbation { dpi: 0.0, dphi: -0.5 },
            ],
            &grid,
        )
        .unwrap();
        assert!(!report.any_violation(), "{report:?}");
        assert!(report.probes.iter().all(|p| p.skipped.is_none()));
        // a pi-perturbation strictly lowers the payoff
        assert!(report.probes[0].diff_mean < 0.0);
    }

    #[test]
    fn saddle_probe_skips_inadmissible() {
        let p = HestonParams::reference();
        let grid = PathGrid::new(0.0, 1.0, 20, 200, 1).unwrap();
        let report = saddle_probe_heston(
            1.0,
            0.04,
            &p,
            &[Perturbation { dpi: 0.0, dphi: 0.6 }], // 1.6 * (2/3) > Kphi = 1
            &grid,
        )
        .unwrap();
        assert!(report.probes[0].skipped.is_some());
        assert!(!report.probes[0].violated);
    }

    #[test]
    fn saddle_probe_deterministic_given_seed() {
        let p = HestonParams::reference();
        let grid = PathGrid::new(0.0, 1.0, 20, 300, 4).unwrap();
        let probes = [Perturbation { dpi: 0.1, dphi: 0.0 }];
        let a = saddle_probe_heston(1.0, 0.04, &p, &probes, &grid).unwrap();
        let b = saddle_probe_heston(1.0, 0.04, &p, &probes, &grid).unwrap();
        assert_eq!(a.probes[0].diff_mean.to_bits(), b.probes[0].diff_mean.to_bits());
        assert_eq!(a.baseline.mean.to_bits(), b.baseline.mean.to_bits());
    }
}
