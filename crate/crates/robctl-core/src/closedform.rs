//! Closed-form value functions, optimal strategies and worst-case drift
//! distortions for both models, together with the time functions `g1`, `g2`,
//! `g3`, the inner Hamiltonian of the stochastic-volatility game, and
//! machine-precision residual checks of the HJBI systems.
//!
//! All derivatives entering the residuals are analytic (the value functions
//! are of separated form, so `x∂ₓw = (1−γ)w`, `x²∂ₓₓw = −γ(1−γ)w`,
//! `∂ₚw = g3·w`, …); finite differences appear only in cross-checking tests.

use crate::params::{
    derive_heston_coeffs, derive_merton_coeffs, HestonParams, MertonParams, RiccatiCoeffs,
};
use crate::{Error, Result};

/// Number of grid points per control dimension when scanning the inequality
/// rows of the HJBI system.
pub const CONTROL_GRID: usize = 201;

/// A control point: risky fraction, consumption rate (consumption model
/// only) and the two ambiguity distortions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyPoint {
    pub pi: f64,
    pub c: f64,
    pub phi1: f64,
    pub phi2: f64,
}

/// Residuals of the HJBI system at a point.
///
/// `pde_residual` is `L^{u*,v*}w + f(w, u*, v*)` (zero on the equality row).
/// The `foc_*` fields are the first-order conditions of the inner
/// optimisation, normalised to be scale-free; for the consumption model
/// `foc_phi2` carries the consumption condition. The `saddle_gap_*` fields
/// are the minima over a control grid of the inequality-row slacks, both
/// non-negative when the saddle rows hold.
#[derive(Debug, Clone, Copy)]
pub struct HjbiResidual {
    pub pde_residual: f64,
    pub foc_pi: f64,
    pub foc_phi1: f64,
    pub foc_phi2: f64,
    pub saddle_gap_pi: f64,
    pub saddle_gap_phi: f64,
}

fn check_time(t: f64, horizon: f64) -> Result<()> {
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::OutOfDomain(format!("t = {t} outside [0, {horizon}]")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Constant-volatility model
// ---------------------------------------------------------------------------

/// Closed-form solution of the constant-volatility robust
/// consumption–investment problem.
#[derive(Debug, Clone)]
pub struct MertonClosedForm {
    p: MertonParams,
    coeffs: RiccatiCoeffs,
}

impl MertonClosedForm {
    pub fn new(p: MertonParams) -> Result<Self> {
        let coeffs = derive_merton_coeffs(&p)?;
        Ok(MertonClosedForm { p, coeffs })
    }

    pub fn params(&self) -> &MertonParams {
        &self.p
    }

    pub fn coeffs(&self) -> &RiccatiCoeffs {
        &self.coeffs
    }

    /// Time function `g1`, the solution of `g1' = a1·g1 − 1`, `g1(T) = 1`.
    ///
    /// Near the removable singularity a1 → 0 a second-order Taylor branch
    /// replaces the exponential form, which loses all digits there.
    pub fn g1(&self, t: f64) -> Result<f64> {
        check_time(t, self.p.horizon)?;
        if t == self.p.horizon {
            return Ok(1.0); // terminal pinning, exact
        }
        let a1 = self.coeffs.a1;
        let tau = t - self.p.horizon; // <= 0
        let g1 = if a1.abs() < 1e-8 {
            (1.0 - tau) + a1 * tau * (1.0 - 0.5 * tau)
                + a1 * a1 * tau * tau * (0.5 - tau / 6.0)
        } else {
            (1.0 + (a1 - 1.0) * (a1 * tau).exp()) / a1
        };
        debug_assert!(g1 > 0.0);
        Ok(g1)
    }

    fn g1_prime(&self, g1: f64) -> f64 {
        self.coeffs.a1 * g1 - 1.0
    }

    /// Value function `W(t,x) = g1(t)^γ · x^{1−γ}/(1−γ)`.
    pub fn value(&self, t: f64, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Err(Error::OutOfDomain(format!("wealth x = {x} must be positive")));
        }
        let g1 = self.g1(t)?;
        let g = self.p.gamma;
        Ok(g1.powf(g) * x.powf(1.0 - g) / (1.0 - g))
    }

    /// Optimal strategy: constant `π*`, proportional consumption
    /// `c* = x / g1(t)`, constant worst-case distortion `φ*`.
    pub fn strategy(&self, t: f64, x: f64) -> StrategyPoint {
        let p = &self.p;
        let denom = p.theta + p.gamma * p.sigma * p.sigma;
        let g1 = self.g1(t).expect("strategy evaluated inside [0, T]");
        StrategyPoint {
            pi: (p.mu1 - p.mu0) / denom,
            c: x / g1,
            phi1: p.theta * (p.mu0 - p.mu1) / (p.sigma * denom),
            phi2: 0.0,
        }
    }

    /// `(L^{π,c,φ} w + f(w, c, φ))(t, x)` for arbitrary controls, with the
    /// value-function coupling at its closed form. `c_tilde` is c/x.
    pub fn l_plus_f(&self, t: f64, x: f64, pi: f64, c_tilde: f64, phi: f64) -> f64 {
        let w = self.value(t, x).expect("interior point");
        w * self.l_plus_f_over_w(t, pi, c_tilde, phi)
    }

    /// Same quantity normalised by `w`; independent of `x`.
    fn l_plus_f_over_w(&self, t: f64, pi: f64, c_tilde: f64, phi: f64) -> f64 {
        let p = &self.p;
        let g = p.gamma;
        let g1 = self.g1(t).expect("interior point");
        g * self.g1_prime(g1) / g1
            - 0.5 * g * (1.0 - g) * p.sigma * p.sigma * pi * pi
            + (1.0 - g) * (p.mu0 + (p.mu1 - p.mu0 + p.sigma * phi) * pi - c_tilde)
            - p.delta
            + c_tilde.powf(1.0 - g) / g1.powf(g)
            + (1.0 - g) * p.sigma * p.sigma * phi * phi / (2.0 * p.theta)
    }

    /// HJBI residual at an interior point `(t, x)`, `t < T`.
    ///
    /// FOC normalisation: `foc_pi = ∂π(L+f)/w`, `foc_phi1 = ∂φ(L+f)/w`,
    /// `foc_phi2 = ∂c(L+f)/w` (the consumption condition).
    pub fn hjbi_residual(&self, t: f64, x: f64) -> Result<HjbiResidual> {
        if t >= self.p.horizon {
            return Err(Error::OutOfDomain(
                "terminal row is checked separately as w(T,·) = Ψ".into(),
            ));
        }
        check_time(t, self.p.horizon)?;
        let p = &self.p;
        let g = p.gamma;
        let st = self.strategy(t, x);
        let g1 = self.g1(t)?;
        let ct = 1.0 / g1;
        let w = self.value(t, x)?;

        let pde_residual = w * self.l_plus_f_over_w(t, st.pi, ct, st.phi1);
        let foc_pi =
            -g * (1.0 - g) * p.sigma * p.sigma * st.pi + (1.0 - g) * (p.mu1 - p.mu0 + p.sigma * st.phi1);
        let foc_phi1 = (1.0 - g) * p.sigma * st.pi + (1.0 - g) * p.sigma * p.sigma * st.phi1 / p.theta;
        let foc_c = (1.0 - g) * (ct.powf(-g) / g1.powf(g) - 1.0);

        // Inequality rows scanned on the admissible box.
        let k4 = p.k4;
        let grid = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / (CONTROL_GRID - 1) as f64;
        let mut gap_pi = f64::INFINITY;
        for i in 0..CONTROL_GRID {
            let pi = grid(i, -k4, k4);
            for j in 0..CONTROL_GRID {
                let c = grid(j, 1.0 / k4, k4);
                let slack = -w * self.l_plus_f_over_w(t, pi, c, st.phi1);
                gap_pi = gap_pi.min(slack);
            }
        }
        let mut gap_phi = f64::INFINITY;
        for i in 0..CONTROL_GRID {
            let phi = grid(i, -k4, k4);
            let slack = w * self.l_plus_f_over_w(t, st.pi, ct, phi);
            gap_phi = gap_phi.min(slack);
        }

        Ok(HjbiResidual {
            pde_residual,
            foc_pi,
            foc_phi1,
            foc_phi2: foc_c,
            saddle_gap_pi: gap_pi,
            saddle_gap_phi: gap_phi,
        })
    }
}

// ---------------------------------------------------------------------------
// Stochastic-volatility model
// ---------------------------------------------------------------------------

/// Evaluation mode of the time functions `g2`, `g3`.
#[derive(Debug, Clone)]
enum G3Mode {
    /// γ+θ ≠ 1 with well-separated roots: exponential two-root formula.
    Roots,
    /// γ+θ = 1: a4 = 0, `g3 = (a6/a5)(e^{a5(T−t)} − 1)`.
    Exponential,
    /// Degenerate discriminant: dense RK4 table with Hermite interpolation;
    /// per-entry: (t, g3, ∫ₜᵀ g3).
    Numeric(Vec<(f64, f64, f64)>),
}

/// Classification of the Riccati solution per parameter regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiccatiCase {
    /// γ > 1: a4 > 0, a6 < 0, roots a3 < 0 < a2, and a3 < g3 ≤ 0.
    GammaAboveOne,
    /// γ < 1, γ+θ > 1: a4 < 0, a6 > 0, a2 < 0 < a3, and 0 ≤ g3 < a3.
    SumAboveOne,
    /// γ+θ = 1: a4 = 0, a5 = −κ, a6 > 0, and 0 ≤ g3 ≤ a6/κ.
    SumEqualOne,
    /// γ+θ < 1: a4 > 0, a6 > 0, a2 > a3 > 0, and 0 ≤ g3 < a3.
    SumBelowOne,
}

/// Closed-form solution of the stochastic-volatility robust investment
/// problem.
#[derive(Debug, Clone)]
pub struct HestonClosedForm {
    p: HestonParams,
    coeffs: RiccatiCoeffs,
    mode: G3Mode,
}

const NUMERIC_TABLE_STEPS: usize = 4096;

impl HestonClosedForm {
    /// Requires the Feller condition and the mean-reversion condition
    /// `κ ≥ max(σ²/(2P̄), 2σ|μ2|/(γ+θ))`.
    pub fn new(p: HestonParams) -> Result<Self> {
        if !p.closed_form_kappa_holds() {
            return Err(Error::InvalidParam {
                name: "kappa",
                value: p.kappa,
                reason: "mean-reversion condition for the closed form fails".into(),
            });
        }
        let coeffs = derive_heston_coeffs(&p, 1.0 - p.gamma, 2.0 * p.k6, 0.0)?;
        let mode = if !coeffs.has_roots {
            G3Mode::Exponential
        } else {
            let disc = coeffs.a5 * coeffs.a5 - 4.0 * coeffs.a4 * coeffs.a6;
            let scale = coeffs.a5 * coeffs.a5 + (4.0 * coeffs.a4 * coeffs.a6).abs();
            if disc <= 1e-8 * scale || coeffs.a4.abs() < 1e-12 {
                G3Mode::Numeric(Self::build_table(&p, &coeffs))
            } else {
                G3Mode::Roots
            }
        };
        Ok(HestonClosedForm { p, coeffs, mode })
    }

    fn build_table(p: &HestonParams, c: &RiccatiCoeffs) -> Vec<(f64, f64, f64)> {
        // backward RK4 on (g3, I) with I(t) = ∫ₜᵀ g3, I' = −g3
        let (a4, a5, a6) = (c.a4, c.a5, c.a6);
        let n = NUMERIC_TABLE_STEPS;
        let h = -p.horizon / n as f64;
        let rhs = |y: f64| -(a4 * y * y + a5 * y + a6);
        let mut t = p.horizon;
        let mut y = 0.0;
        let mut i_acc = 0.0;
        let mut table = vec![(t, y, i_acc)];
        for _ in 0..n {
            let k1 = rhs(y);
            let l1 = -y;
            let k2 = rhs(y + 0.5 * h * k1);
            let l2 = -(y + 0.5 * h * k1);
            let k3 = rhs(y + 0.5 * h * k2);
            let l3 = -(y + 0.5 * h * k2);
            let k4 = rhs(y + h * k3);
            let l4 = -(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            i_acc += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
            t += h;
            table.push((t, y, i_acc));
        }
        table.reverse(); // ascending in t
        table
    }

    fn table_lookup(&self, table: &[(f64, f64, f64)], t: f64) -> (f64, f64) {
        let c = &self.coeffs;
        let n = table.len() - 1;
        let dt = self.p.horizon / n as f64;
        let idx = ((t / dt) as usize).min(n - 1);
        let (t0, y0, i0) = table[idx];
        let (t1, y1, i1) = table[idx + 1];
        let h = t1 - t0;
        let s = ((t - t0) / h).clamp(0.0, 1.0);
        // cubic Hermite; derivatives from the ODE itself
        let hermite = |f0: f64, f1: f64, d0: f64, d1: f64| {
            let s2 = s * s;
            let s3 = s2 * s;
            f0 * (2.0 * s3 - 3.0 * s2 + 1.0)
                + d0 * h * (s3 - 2.0 * s2 + s)
                + f1 * (-2.0 * s3 + 3.0 * s2)
                + d1 * h * (s3 - s2)
        };
        let rhs = |y: f64| -(c.a4 * y * y + c.a5 * y + c.a6);
        (
            hermite(y0, y1, rhs(y0), rhs(y1)),
            hermite(i0, i1, -y0, -y1),
        )
    }

    pub fn params(&self) -> &HestonParams {
        &self.p
    }

    pub fn coeffs(&self) -> &RiccatiCoeffs {
        &self.coeffs
    }

    /// Which of the four parameter regimes applies.
    pub fn case(&self) -> RiccatiCase {
        let p = &self.p;
        if p.gamma > 1.0 {
            RiccatiCase::GammaAboveOne
        } else if p.gamma + p.theta > 1.0 {
            RiccatiCase::SumAboveOne
        } else if p.gamma + p.theta == 1.0 {
            RiccatiCase::SumEqualOne
        } else {
            RiccatiCase::SumBelowOne
        }
    }

    /// Riccati solution `g3` with `g3(T) = 0`, solving
    /// `g3' + a4·g3² + a5·g3 + a6 = 0`.
    pub fn g3(&self, t: f64) -> Result<f64> {
        check_time(t, self.p.horizon)?;
        if t == self.p.horizon {
            return Ok(0.0); // terminal pinning, exact
        }
        let c = &self.coeffs;
        let tau = t - self.p.horizon;
        Ok(match &self.mode {
            G3Mode::Roots => {
                let (a2, a3) = (c.a2, c.a3);
                a2 - a2 * ((a2 - a3) / (a2 - a3 * (c.a4 * (a2 - a3) * tau).exp()))
            }
            G3Mode::Exponential => c.a6 / c.a5 * (c.a5 * (-tau)).exp_m1(),
            G3Mode::Numeric(table) => self.table_lookup(table, t).0,
        })
    }

    /// `∫ₜᵀ g3(r) dr`, in closed form where available.
    pub fn int_g3(&self, t: f64) -> Result<f64> {
        check_time(t, self.p.horizon)?;
        if t == self.p.horizon {
            return Ok(0.0);
        }
        let c = &self.coeffs;
        let tau = t - self.p.horizon;
        Ok(match &self.mode {
            G3Mode::Roots => {
                let (a2, a3) = (c.a2, c.a3);
                -a3 * tau
                    + (1.0 / c.a4)
                        * ((a2 - a3) / (a2 - a3 * (c.a4 * (a2 - a3) * tau).exp())).ln()
            }
            G3Mode::Exponential => {
                c.a6 / c.a5 * ((c.a5 * (-tau)).exp_m1() / c.a5 + tau)
            }
            G3Mode::Numeric(table) => self.table_lookup(table, t).1,
        })
    }

    /// Time factor `g2(t) = exp{μ0(1−γ)(T−t) + κP̄ ∫ₜᵀ g3}`.
    pub fn g2(&self, t: f64) -> Result<f64> {
        let p = &self.p;
        Ok((p.mu0 * (1.0 - p.gamma) * (p.horizon - t) + p.kappa * p.pbar * self.int_g3(t)?).exp())
    }

    /// `(g2(t), g3(t))` in one call.
    pub fn g2_g3(&self, t: f64) -> Result<(f64, f64)> {
        Ok((self.g2(t)?, self.g3(t)?))
    }

    /// Value function `W(t,x,v) = g2(t)·e^{g3(t)·v} · x^{1−γ}/(1−γ)`.
    ///
    /// Accepts `v = 0`: the truncated simulated variance touches the
    /// boundary, where the closed form extends continuously.
    pub fn value(&self, t: f64, x: f64, v: f64) -> Result<f64> {
        if x <= 0.0 || v < 0.0 {
            return Err(Error::OutOfDomain(format!(
                "state (x, v) = ({x}, {v}) must be positive"
            )));
        }
        let (g2, g3) = self.g2_g3(t)?;
        let g = self.p.gamma;
        Ok(g2 * (g3 * v).exp() * x.powf(1.0 - g) / (1.0 - g))
    }

    /// Normalised optimal controls `(π*, φ̂1*, φ̂2*)` at time `t`
    /// (distortions per unit √v).
    pub fn normalized_strategy(&self, t: f64) -> (f64, f64, f64) {
        let p = &self.p;
        let g3 = self.g3(t).expect("strategy evaluated inside [0, T]");
        let g = p.gamma;
        let gt = g + p.theta;
        let pi = (p.sigma * p.rho * (1.0 - g - p.theta) * g3 + p.mu2 * (1.0 - g))
            / ((1.0 - g) * gt);
        let ph1 = -(p.sigma * p.rho * g3 + p.mu2 * (1.0 - g)) / ((1.0 - g) * gt) * p.theta;
        let ph2 = -p.sigma * p.theta * g3 / (1.0 - g) * (1.0 - p.rho * p.rho).sqrt();
        (pi, ph1, ph2)
    }

    /// Optimal strategy at `(t, v)`: `π*` and the distortions `φ* = φ̂*·√v`.
    pub fn strategy(&self, t: f64, v: f64) -> StrategyPoint {
        let (pi, ph1, ph2) = self.normalized_strategy(t);
        let sq = v.max(0.0).sqrt();
        StrategyPoint {
            pi,
            c: 0.0,
            phi1: ph1 * sq,
            phi2: ph2 * sq,
        }
    }

    /// Inner Hamiltonian `F(π, φ̂1, φ̂2)` of the reduced game at Riccati
    /// value `g3t` (controls normalised by √v).
    pub fn hamiltonian_f(&self, pi: f64, ph1: f64, ph2: f64, g3t: f64) -> f64 {
        hamiltonian_f(pi, ph1, ph2, g3t, &self.p)
    }

    /// `(L^{π,φ} w + f(w, φ))(t, x, v)` for arbitrary normalised controls,
    /// with the value-function coupling at its closed form.
    pub fn l_plus_f(&self, t: f64, x: f64, v: f64, pi: f64, ph1: f64, ph2: f64) -> f64 {
        let p = &self.p;
        let w = self.value(t, x, v).expect("interior point");
        let g3 = self.g3(t).expect("interior point");
        let g3p = -(self.coeffs.a4 * g3 * g3 + self.coeffs.a5 * g3 + self.coeffs.a6);
        let g2_ratio = -(p.mu0 * (1.0 - p.gamma) + p.kappa * p.pbar * g3); // g2'/g2
        let time_part = g2_ratio + g3p * v;
        let space_part = p.mu0 * (1.0 - p.gamma)
            + p.kappa * p.pbar * g3
            + v * (0.5 * p.sigma * p.sigma * g3 * g3 - p.kappa * g3
                + self.hamiltonian_f(pi, ph1, ph2, g3));
        w * (time_part + space_part)
    }

    /// HJBI residual at an interior point `(t, x, v)`, `t < T`.
    ///
    /// FOC fields are the partial derivatives of the inner Hamiltonian `F`
    /// at the saddle (scale-free).
    pub fn hjbi_residual(&self, t: f64, x: f64, v: f64) -> Result<HjbiResidual> {
        if t >= self.p.horizon {
            return Err(Error::OutOfDomain(
                "terminal row is checked separately as w(T,·) = Ψ".into(),
            ));
        }
        check_time(t, self.p.horizon)?;
        if x <= 0.0 || v <= 0.0 {
            return Err(Error::OutOfDomain("state must be positive".into()));
        }
        let p = &self.p;
        let g = p.gamma;
        let g3 = self.g3(t)?;
        let (pi_s, ph1_s, ph2_s) = self.normalized_strategy(t);

        let pde_residual = self.l_plus_f(t, x, v, pi_s, ph1_s, ph2_s);
        // Appendix-style first-order conditions of F
        let foc_pi = g * (g - 1.0) * pi_s
            + p.sigma * p.rho * (1.0 - g) * g3
            + (1.0 - g) * p.mu2
            + (1.0 - g) * ph1_s;
        let foc_phi1 = (1.0 - g) * pi_s + p.sigma * p.rho * g3 + (1.0 - g) / p.theta * ph1_s;
        let foc_phi2 =
            p.sigma * (1.0 - p.rho * p.rho).sqrt() * g3 + (1.0 - g) / p.theta * ph2_s;

        // Inequality rows on the admissible box / disk.
        let grid = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / (CONTROL_GRID - 1) as f64;
        let mut gap_pi = f64::INFINITY;
        for i in 0..CONTROL_GRID {
            let pi = grid(i, -p.kpi, p.kpi);
            gap_pi = gap_pi.min(-self.l_plus_f(t, x, v, pi, ph1_s, ph2_s));
        }
        let mut gap_phi = f64::INFINITY;
        for i in 0..CONTROL_GRID {
            let ph1 = grid(i, -p.kphi, p.kphi);
            for j in 0..CONTROL_GRID {
                let ph2 = grid(j, -p.kphi, p.kphi);
                if ph1 * ph1 + ph2 * ph2 > p.kphi * p.kphi {
                    continue;
                }
                gap_phi = gap_phi.min(self.l_plus_f(t, x, v, pi_s, ph1, ph2));
            }
        }

        Ok(HjbiResidual {
            pde_residual,
            foc_pi,
            foc_phi1,
            foc_phi2,
            saddle_gap_pi: gap_pi,
            saddle_gap_phi: gap_phi,
        })
    }
}

/// Inner Hamiltonian `F(π, φ̂1, φ̂2)` of the reduced stochastic-volatility
/// game at Riccati value `g3t`:
///
/// ```text
/// F = γ(γ−1)π²/2 + σρ(1−γ)g3·π + (1−γ)μ2·π + (1−γ)φ̂1·π
///   + σρφ̂1·g3 + σ√(1−ρ²)φ̂2·g3 + (1−γ)(φ̂1² + φ̂2²)/(2θ)
/// ```
pub fn hamiltonian_f(pi: f64, ph1: f64, ph2: f64, g3t: f64, p: &HestonParams) -> f64 {
    let g = p.gamma;
    0.5 * g * (g - 1.0) * pi * pi
        + p.sigma * p.rho * (1.0 - g) * g3t * pi
        + (1.0 - g) * p.mu2 * pi
        + (1.0 - g) * ph1 * pi
        + p.sigma * p.rho * ph1 * g3t
        + p.sigma * (1.0 - p.rho * p.rho).sqrt() * ph2 * g3t
        + (1.0 - g) / (2.0 * p.theta) * (ph1 * ph1 + ph2 * ph2)
}

/// The three reduction identities of the saddle Hamiltonian: term-by-term
/// sums and their closed targets `(a4 − σ²/2, a5 + κ, a6)`.
#[derive(Debug, Clone, Copy)]
pub struct FReduction {
    pub sum1: f64,
    pub sum2: f64,
    pub sum3: f64,
    pub target1: f64,
    pub target2: f64,
    pub target3: f64,
}

/// Evaluate the reduction sums term by term, exactly as the saddle
/// substitution produces them.
pub fn f_reduction(p: &HestonParams) -> FReduction {
    let g = p.gamma;
    let th = p.theta;
    let s2 = p.sigma * p.sigma;
    let r2 = p.rho * p.rho;
    let gt = g + th;
    let omg = 1.0 - g;
    let omgt = 1.0 - g - th;
    let s = p.sigma;
    let mu2 = p.mu2;

    let sum1 = -g * s2 * r2 * omgt * omgt / (2.0 * omg * gt * gt)
        + s2 * r2 * omgt / gt
        - s2 * th * r2 * omgt / (omg * gt * gt)
        - s2 * th * r2 / (omg * gt)
        - s2 * th * (1.0 - r2) / omg
        + s2 * th * r2 / (2.0 * omg * gt * gt)
        + s2 * th * (1.0 - r2) / (2.0 * omg);
    let sum2 = -g * s * p.rho * mu2 * omgt / (gt * gt)
        + s * p.rho * mu2 * omg / gt
        + s * p.rho * mu2 * omgt / gt
        - s * th * p.rho * mu2 * (2.0 - g - th) / (gt * gt)
        - s * th * p.rho * mu2 / gt
        + s * th * p.rho * mu2 / (gt * gt);
    let sum3 = -g * omg * mu2 * mu2 / (2.0 * gt * gt)
        + omg * mu2 * mu2 / gt
        - omg * th * mu2 * mu2 / (gt * gt)
        + omg * th * mu2 * mu2 / (2.0 * gt * gt);

    let a4 = s2 * omgt / (2.0 * omg * gt) * (r2 + (1.0 - r2) * gt);
    let a5 = s * p.rho * mu2 / gt * omgt - p.kappa;
    let a6 = omg * mu2 * mu2 / (2.0 * gt);

    FReduction {
        sum1,
        sum2,
        sum3,
        target1: a4 - s2 / 2.0,
        target2: a5 + p.kappa,
        target3: a6,
    }
}

/// Free-function forms of the closed-form evaluators.
pub fn value_merton(t: f64, x: f64, p: &MertonParams) -> Result<f64> {
    MertonClosedForm::new(p.clone())?.value(t, x)
}

pub fn value_heston(t: f64, x: f64, v: f64, p: &HestonParams) -> Result<f64> {
    HestonClosedForm::new(p.clone())?.value(t, x, v)
}

pub fn strategy_merton(t: f64, x: f64, p: &MertonParams) -> Result<StrategyPoint> {
    check_time(t, p.horizon)?;
    Ok(MertonClosedForm::new(p.clone())?.strategy(t, x))
}

pub fn strategy_heston(t: f64, v: f64, p: &HestonParams) -> Result<StrategyPoint> {
    check_time(t, p.horizon)?;
    Ok(HestonClosedForm::new(p.clone())?.strategy(t, v))
}
