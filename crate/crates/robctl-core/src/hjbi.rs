//! The contraction operator T: freeze the value-function coupling in the
//! generator at a surface J, solve the resulting standard control problem on
//! a short time slab by an implicit finite-difference scheme with pointwise
//! sup–inf, and iterate to the fixed point slab by slab backward from the
//! horizon.
//!
//! Both models reduce to one spatial dimension at most: the value separates
//! as `W = x^{1−γ}/(1−γ) · profile`, leaving a scalar ODE in `t` for the
//! consumption model and a degenerate parabolic PDE in `(t, v)` for the
//! stochastic-volatility model. The per-node inner optimisation uses the
//! closed-form first-order conditions where they apply (exact inner
//! minimiser over the ambiguity ball, golden-section maximisation of the
//! resulting concave profile in π) and a grid scan as fallback.

use serde::{Deserialize, Serialize};

use crate::closedform::{HestonClosedForm, MertonClosedForm};
use crate::params::{gbar_rate, HestonParams, MertonParams};
use crate::surface::{SurfaceWeight, ValueSurface};
use crate::{Error, Result};

/// Slab-iteration controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlabSpec {
    /// Slab width ε; slabs are aligned to whole grid steps (at least one).
    pub slab_width: f64,
    pub max_outer_iters: usize,
    /// Weighted-norm stopping tolerance for the within-slab iteration.
    pub tol: f64,
    /// Resolution of the fallback control scan.
    pub control_grid: usize,
}

impl SlabSpec {
    pub fn new(slab_width: f64, max_outer_iters: usize, tol: f64, control_grid: usize) -> Result<Self> {
        if slab_width <= 0.0 || tol <= 0.0 || max_outer_iters == 0 || control_grid < 3 {
            return Err(Error::OutOfDomain("bad slab specification".into()));
        }
        Ok(SlabSpec {
            slab_width,
            max_outer_iters,
            tol,
            control_grid,
        })
    }
}

/// One within-slab iteration record: the weighted-norm delta between
/// successive coupling surfaces.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterRecord {
    pub slab: usize,
    pub iter: usize,
    pub delta: f64,
}

/// Golden-section maximisation of a concave function on [lo, hi].
fn golden_max(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..90 {
        if hi - lo < 1e-13 {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Consumption model reduction: scalar ODE in t
// ---------------------------------------------------------------------------

/// Reduced form of the consumption model: `W(t,x) = h(t)·x^{1−γ}/(1−γ)` with
/// a pointwise sup–inf over `(π, c/x, φ)` in the scalar evolution of `h`.
#[derive(Debug, Clone)]
pub struct MertonReduced {
    p: MertonParams,
    cf: MertonClosedForm,
}

/// Controls and saddle value at one node.
#[derive(Debug, Clone, Copy)]
pub struct NodeControls {
    pub pi: f64,
    /// c/x for the consumption model; unused otherwise.
    pub c_tilde: f64,
    pub phi1: f64,
    pub phi2: f64,
    /// Saddle value of the control-dependent generator part, in profile units.
    pub value: f64,
}

impl MertonReduced {
    pub fn new(p: MertonParams) -> Result<Self> {
        let cf = MertonClosedForm::new(p.clone())?;
        Ok(MertonReduced { p, cf })
    }

    pub fn params(&self) -> &MertonParams {
        &self.p
    }

    pub fn closed_form(&self) -> &MertonClosedForm {
        &self.cf
    }

    /// Closed-form reduced profile `h(t) = g1(t)^γ`.
    pub fn closed_form_profile(&self, t: f64) -> f64 {
        self.cf.g1(t).expect("t within horizon").powf(self.p.gamma)
    }

    pub fn weight(&self) -> SurfaceWeight {
        SurfaceWeight::Constant {
            value: (1.0 - self.p.gamma).abs(),
        }
    }

    /// Saddle of the generator at profile value `h` with coupling `h_j`.
    ///
    /// In value-function units the objective is concave in `(π, c̃)` and
    /// convex in `φ` whenever `h > 0` and `h_j > 0`; the inner minimiser is
    /// exact and π is maximised by golden section, so no control grid enters
    /// on this path.
    pub fn node_saddle(&self, h: f64, h_j: f64, control_grid: usize) -> NodeControls {
        let p = &self.p;
        let g = p.gamma;
        let k4 = p.k4;
        let q = p.sigma * p.sigma * h_j / (2.0 * p.theta);
        // consumption is separable: sup over [1/K4, K4]
        let c_tilde = if h > 0.0 {
            h.powf(-1.0 / g).clamp(1.0 / k4, k4)
        } else {
            k4
        };
        let inner_phi = |pi: f64| -> (f64, f64) {
            let c_phi = p.sigma * pi * h;
            if q > 0.0 {
                let m = (-c_phi / (2.0 * q)).clamp(-k4, k4);
                (m, q * m * m + c_phi * m)
            } else {
                // linear or concave in phi: adversary sits on the boundary
                let at_lo = q * k4 * k4 - c_phi * k4;
                let at_hi = q * k4 * k4 + c_phi * k4;
                if at_lo <= at_hi {
                    (-k4, at_lo)
                } else {
                    (k4, at_hi)
                }
            }
        };
        let v_of_pi = |pi: f64| -> f64 {
            let (_, phi_val) = inner_phi(pi);
            -0.5 * g * p.sigma * p.sigma * pi * pi * h + (p.mu1 - p.mu0) * pi * h + phi_val
        };
        let pi = if h > 0.0 {
            golden_max(-k4, k4, v_of_pi)
        } else {
            // degenerate profile sign: honest grid scan
            let n = control_grid.max(3);
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 0..n {
                let cand = -k4 + 2.0 * k4 * i as f64 / (n - 1) as f64;
                let v = v_of_pi(cand);
                if v > best.0 {
                    best = (v, cand);
                }
            }
            best.1
        };
        let (phi, _) = inner_phi(pi);
        // saddle value of the generator part in normalised units, scaled
        // back to profile units by (1−γ)
        let o_tilde = -0.5 * g * p.sigma * p.sigma * pi * pi * h
            + (p.mu0 + (p.mu1 - p.mu0 + p.sigma * phi) * pi - c_tilde) * h
            - p.delta * h / (1.0 - g)
            + c_tilde.powf(1.0 - g) / (1.0 - g)
            + q * phi * phi;
        NodeControls {
            pi,
            c_tilde,
            phi1: phi,
            phi2: 0.0,
            value: (1.0 - g) * o_tilde,
        }
    }

    /// Residual of the reduced evolution at `(t, h, h', h_J)`, in
    /// value-function units: `(h' + Φ*(h, h_J)) / (1−γ)`.
    pub fn residual(&self, h: f64, h_prime: f64, h_j: f64, control_grid: usize) -> f64 {
        let nc = self.node_saddle(h, h_j, control_grid);
        (h_prime + nc.value) / (1.0 - self.p.gamma)
    }
}

// ---------------------------------------------------------------------------
// Stochastic-volatility reduction: degenerate parabolic PDE in (t, v)
// ---------------------------------------------------------------------------

/// Far-field closure at `v_max`.
#[derive(Debug, Clone, Copy)]
pub enum BoundarySlope {
    /// Robin condition `G_v = g3(t)·G` with the closed-form asymptotic slope.
    ClosedForm,
    /// Robin condition with a fixed slope (0 for pinned-control variants).
    Fixed(f64),
}

/// Reduced form of the stochastic-volatility model:
/// `W(t,x,v) = G(t,v)·x^{1−γ}/(1−γ)`.
#[derive(Debug, Clone)]
pub struct HestonReduced {
    p: HestonParams,
    cf: HestonClosedForm,
    pub v_max: f64,
    pub boundary: BoundarySlope,
}

impl HestonReduced {
    pub fn new(p: HestonParams) -> Result<Self> {
        let cf = HestonClosedForm::new(p.clone())?;
        let v_max = p.pbar + 10.0 * p.sigma * (p.pbar / (2.0 * p.kappa)).sqrt();
        Ok(HestonReduced {
            p,
            cf,
            v_max,
            boundary: BoundarySlope::ClosedForm,
        })
    }

    pub fn params(&self) -> &HestonParams {
        &self.p
    }

    pub fn closed_form(&self) -> &HestonClosedForm {
        &self.cf
    }

    /// Closed-form reduced profile `G(t,v) = g2(t)·e^{g3(t)·v}`.
    pub fn closed_form_profile(&self, t: f64, v: f64) -> f64 {
        let (g2, g3) = self.cf.g2_g3(t).expect("t within horizon");
        g2 * (g3 * v).exp()
    }

    /// Uniform variance grid over `[0, v_max]` with `nv + 1` nodes.
    pub fn v_grid(&self, nv: usize) -> Vec<f64> {
        (0..=nv).map(|j| self.v_max * j as f64 / nv as f64).collect()
    }

    /// Slab-shifted supersolution weight for the canonical instance
    /// (ϱ = 1−γ, b = 2K6, slab width T/N).
    pub fn weight(&self) -> Result<SurfaceWeight> {
        let coeffs = crate::params::theorem_coeffs(&self.p)?;
        Ok(SurfaceWeight::SlabShifted {
            k6: self.p.k6,
            rate: gbar_rate(&self.p, 1.0 - self.p.gamma, 2.0 * self.p.k6),
            b: 2.0 * self.p.k6,
            slab_width: self.p.horizon / coeffs.slab_count as f64,
            one_minus_gamma_abs: (1.0 - self.p.gamma).abs(),
        })
    }

    fn boundary_slope(&self, t: f64) -> f64 {
        match self.boundary {
            BoundarySlope::ClosedForm => self.cf.g3(t).expect("t within horizon"),
            BoundarySlope::Fixed(s) => s,
        }
    }

    /// Saddle of the inner game at one node: profile `g`, gradient `gv`,
    /// coupling `g_j`. Exact minimiser over the `|φ̂| ≤ Kφ` disk, golden
    /// section over π; grid fallback when the profile sign degenerates.
    pub fn node_saddle(&self, g: f64, gv: f64, g_j: f64, control_grid: usize) -> NodeControls {
        let p = &self.p;
        let gam = p.gamma;
        let omg = 1.0 - gam;
        let rho_c = (1.0 - p.rho * p.rho).sqrt();
        let q = g_j / (2.0 * p.theta);
        let c2 = p.sigma * rho_c * gv / omg;
        let inner_phi = |pi: f64| -> (f64, f64, f64) {
            let c1 = pi * g + p.sigma * p.rho * gv / omg;
            if q > 0.0 {
                let m1 = -c1 / (2.0 * q);
                let m2 = -c2 / (2.0 * q);
                let r = (m1 * m1 + m2 * m2).sqrt();
                let (f1, f2) = if r <= p.kphi || r == 0.0 {
                    (m1, m2)
                } else {
                    (m1 * p.kphi / r, m2 * p.kphi / r)
                };
                (f1, f2, q * (f1 * f1 + f2 * f2) + c1 * f1 + c2 * f2)
            } else {
                let nrm = (c1 * c1 + c2 * c2).sqrt();
                if nrm > 0.0 {
                    let f1 = -p.kphi * c1 / nrm;
                    let f2 = -p.kphi * c2 / nrm;
                    (f1, f2, q * p.kphi * p.kphi - p.kphi * nrm)
                } else if q < 0.0 {
                    (p.kphi, 0.0, q * p.kphi * p.kphi)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
        };
        let v_of_pi = |pi: f64| -> f64 {
            let (_, _, phi_val) = inner_phi(pi);
            -0.5 * gam * g * pi * pi + (p.mu2 * g + p.sigma * p.rho * gv) * pi + phi_val
        };
        let pi = if g > 0.0 {
            golden_max(-p.kpi, p.kpi, v_of_pi)
        } else {
            let n = control_grid.max(3);
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 0..n {
                let cand = -p.kpi + 2.0 * p.kpi * i as f64 / (n - 1) as f64;
                let v = v_of_pi(cand);
                if v > best.0 {
                    best = (v, cand);
                }
            }
            best.1
        };
        let (ph1, ph2, _) = inner_phi(pi);
        let o_tilde = v_of_pi(pi);
        NodeControls {
            pi,
            c_tilde: 0.0,
            phi1: ph1,
            phi2: ph2,
            value: omg * o_tilde,
        }
    }

    /// Residual of the reduced PDE in value-function units at a node with
    /// analytic derivatives supplied by the caller:
    /// `(G_t + σ²v·G_vv/2 + κ(P̄−v)G_v + μ0(1−γ)G + v·H*) / (1−γ)`.
    #[allow(clippy::too_many_arguments)]
    pub fn residual(
        &self,
        v: f64,
        g: f64,
        g_t: f64,
        g_v: f64,
        g_vv: f64,
        g_j: f64,
        control_grid: usize,
    ) -> f64 {
        let p = &self.p;
        let nc = self.node_saddle(g, g_v, g_j, control_grid);
        (g_t + 0.5 * p.sigma * p.sigma * v * g_vv
            + p.kappa * (p.pbar - v) * g_v
            + p.mu0 * (1.0 - p.gamma) * g
            + v * nc.value)
            / (1.0 - p.gamma)
    }
}

// ---------------------------------------------------------------------------
// The operator T and its fixed point
// ---------------------------------------------------------------------------

/// The reduced model a slab solver runs on.
#[derive(Debug, Clone)]
pub enum ReducedPde {
    Merton(MertonReduced),
    Heston(HestonReduced),
}

/// Reduce the consumption model (requires γ ≠ 1).
pub fn reduce_merton(p: &MertonParams) -> Result<ReducedPde> {
    Ok(ReducedPde::Merton(MertonReduced::new(p.clone())?))
}

/// Reduce the stochastic-volatility model (requires the closed-form
/// mean-reversion condition for the far-field closure).
pub fn reduce_heston(p: &HestonParams) -> Result<ReducedPde> {
    Ok(ReducedPde::Heston(HestonReduced::new(p.clone())?))
}

impl ReducedPde {
    pub fn weight(&self) -> Result<SurfaceWeight> {
        match self {
            ReducedPde::Merton(m) => Ok(m.weight()),
            ReducedPde::Heston(h) => h.weight(),
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            ReducedPde::Merton(m) => m.p.horizon,
            ReducedPde::Heston(h) => h.p.horizon,
        }
    }

    /// Space grid for surfaces (empty for the consumption model).
    pub fn space_grid(&self, nv: usize) -> Vec<f64> {
        match self {
            ReducedPde::Merton(_) => Vec::new(),
            ReducedPde::Heston(h) => h.v_grid(nv),
        }
    }

    /// Sample the closed-form reduced profile on a grid.
    pub fn closed_form_surface(&self, times: Vec<f64>, nv: usize) -> Result<ValueSurface> {
        let weight = self.weight()?;
        Ok(match self {
            ReducedPde::Merton(m) => {
                ValueSurface::from_fn(times, Vec::new(), weight, |t, _| m.closed_form_profile(t))
            }
            ReducedPde::Heston(h) => {
                let space = h.v_grid(nv);
                ValueSurface::from_fn(times, space, weight, |t, v| h.closed_form_profile(t, v))
            }
        })
    }

    /// One application of the operator T: solve the standard problem on the
    /// slab covered by `j.times`, with the coupling frozen at `j` and the
    /// final row of `j` taken as the (fixed) terminal data. Returns the slab
    /// solution on the same grid (final row unchanged).
    pub fn solve_standard_slab(&self, j: &ValueSurface, slab: &SlabSpec) -> Result<ValueSurface> {
        if j.times.len() < 2 {
            return Err(Error::OutOfDomain("slab needs at least two time points".into()));
        }
        match self {
            ReducedPde::Merton(m) => solve_slab_merton(m, j, slab),
            ReducedPde::Heston(h) => solve_slab_heston(h, j, slab),
        }
    }

    /// Iterate `J ← T(J)` slab by slab backward from the horizon, starting
    /// from `j0` (defined on the full grid), until the weighted-norm delta
    /// within each slab falls below `slab.tol`. The terminal profile is
    /// pinned to 1 (the reduced terminal utility).
    pub fn fixed_point(
        &self,
        slab: &SlabSpec,
        j0: &ValueSurface,
    ) -> Result<(ValueSurface, Vec<IterRecord>)> {
        let nt = j0.times.len() - 1;
        let dt = (j0.times[nt] - j0.times[0]) / nt as f64;
        let steps_per_slab = ((slab.slab_width / dt).round() as usize).clamp(1, nt);
        let mut w = j0.clone();
        let wlen = w.n_space();
        for jv in 0..wlen {
            w.set(nt, jv, 1.0);
        }
        let mut history = Vec::new();
        let mut k_end = nt;
        let mut slab_index = 0usize;
        while k_end > 0 {
            let k_start = k_end.saturating_sub(steps_per_slab);
            // within-slab coupling surface, terminal row pinned to W(k_end)
            let mut j_slab = ValueSurface {
                times: w.times[k_start..=k_end].to_vec(),
                space: w.space.clone(),
                values: w.values[k_start * wlen..(k_end + 1) * wlen].to_vec(),
                weight: w.weight.clone(),
            };
            let mut converged = false;
            for iter in 0..slab.max_outer_iters {
                let next = self.solve_standard_slab(&j_slab, slab)?;
                let delta = next.weighted_distance(&j_slab)?;
                history.push(IterRecord {
                    slab: slab_index,
                    iter,
                    delta,
                });
                j_slab = next;
                if delta <= slab.tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Numeric(format!(
                    "slab {slab_index} did not reach tol {} within {} iterations",
                    slab.tol, slab.max_outer_iters
                )));
            }
            w.values[k_start * wlen..(k_end + 1) * wlen].copy_from_slice(&j_slab.values);
            k_end = k_start;
            slab_index += 1;
        }
        Ok((w, history))
    }

    /// Empirical contraction factor `‖T(J1) − T(J2)‖ / ‖J1 − J2‖` on a slab.
    /// Both solves share J1's final row as terminal data, so the ratio
    /// isolates the generator coupling.
    pub fn contraction_ratio(
        &self,
        j1: &ValueSurface,
        j2: &ValueSurface,
        slab: &SlabSpec,
    ) -> Result<f64> {
        let denom = j1.weighted_distance(j2)?;
        if denom == 0.0 {
            return Err(Error::OutOfDomain(
                "contraction ratio needs J1 != J2 on the slab".into(),
            ));
        }
        let t1 = self.solve_standard_slab(j1, slab)?;
        let mut j2_shared = j2.clone();
        let nt = j2_shared.times.len() - 1;
        let w = j2_shared.n_space();
        for jv in 0..w {
            let pin = j1.at(nt, jv);
            j2_shared.set(nt, jv, pin);
        }
        let t2 = self.solve_standard_slab(&j2_shared, slab)?;
        Ok(t1.weighted_distance(&t2)? / denom)
    }
}

/// Scalar backward implicit Euler for the consumption model.
fn solve_slab_merton(
    m: &MertonReduced,
    j: &ValueSurface,
    slab: &SlabSpec,
) -> Result<ValueSurface> {
    let p = &m.p;
    let g = p.gamma;
    let mut out = j.clone();
    let nt = j.times.len() - 1;
    let mut h_next = j.at(nt, 0);
    for k in (0..nt).rev() {
        let dt = j.times[k + 1] - j.times[k];
        let h_j = j.at(k, 0);
        let mut h = h_next;
        // policy iteration on the scalar implicit step
        for _ in 0..8 {
            let nc = m.node_saddle(h, h_j, slab.control_grid);
            // Φ = A·h + B with the controls frozen
            let a = (1.0 - g)
                * (-0.5 * g * p.sigma * p.sigma * nc.pi * nc.pi
                    + (p.mu0 + (p.mu1 - p.mu0 + p.sigma * nc.phi1) * nc.pi - nc.c_tilde))
                - p.delta;
            let b = nc.c_tilde.powf(1.0 - g)
                + (1.0 - g) * p.sigma * p.sigma * nc.phi1 * nc.phi1 / (2.0 * p.theta) * h_j;
            let denom = 1.0 - dt * a;
            if denom.abs() < 1e-14 {
                return Err(Error::Numeric("singular implicit step".into()));
            }
            let h_new = (h_next + dt * b) / denom;
            let done = (h_new - h).abs() <= 1e-13 * (1.0 + h.abs());
            h = h_new;
            if done {
                break;
            }
        }
        if !h.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite profile at t = {}",
                j.times[k]
            )));
        }
        out.set(k, 0, h);
        h_next = h;
    }
    Ok(out)
}

/// Thomas solve of a tridiagonal system; `lo[0]` and `up[n-1]` ignored.
fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = di.len();
    let mut c = vec![0.0; n];
    if di[0].abs() < 1e-300 {
        return Err(Error::Numeric("singular tridiagonal pivot".into()));
    }
    c[0] = up[0] / di[0];
    rhs[0] /= di[0];
    for i in 1..n {
        let m = di[i] - lo[i] * c[i - 1];
        if m.abs() < 1e-300 {
            return Err(Error::Numeric("singular tridiagonal pivot".into()));
        }
        c[i] = up[i] / m;
        rhs[i] = (rhs[i] - lo[i] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Implicit finite-difference step machinery for the stochastic-volatility
/// model: central differences where the cell Péclet number allows a monotone
/// scheme, first-order upwinding otherwise, first-order upwind transport at
/// the degenerate v = 0 row, and a Robin ghost closure at v_max.
fn solve_slab_heston(
    hm: &HestonReduced,
    j: &ValueSurface,
    slab: &SlabSpec,
) -> Result<ValueSurface> {
    let p = &hm.p;
    let omg = 1.0 - p.gamma;
    let v = &j.space;
    if v.len() < 3 {
        return Err(Error::OutOfDomain("need at least 3 variance nodes".into()));
    }
    let nv = v.len();
    let dv = v[1] - v[0];
    let nt = j.times.len() - 1;
    let mut out = j.clone();

    let mut g_curr: Vec<f64> = j.row(nt).to_vec();
    let mut lo = vec![0.0; nv];
    let mut di = vec![0.0; nv];
    let mut up = vec![0.0; nv];
    let mut rhs = vec![0.0; nv];
    let mut g_iter = vec![0.0; nv];

    for k in (0..nt).rev() {
        let t = j.times[k];
        let dt = j.times[k + 1] - t;
        let slope = hm.boundary_slope(t);
        g_iter.copy_from_slice(&g_curr);
        for _sweep in 0..5 {
            // assemble (I - dt L) g = g_next + dt src with controls from the
            // current iterate
            for jv in 0..nv {
                let vj = v[jv];
                let gv = if jv == 0 {
                    (g_iter[1] - g_iter[0]) / dv
                } else if jv == nv - 1 {
                    slope * g_iter[nv - 1]
                } else {
                    (g_iter[jv + 1] - g_iter[jv - 1]) / (2.0 * dv)
                };
                let g_j = j.at(k, jv);
                let nc = hm.node_saddle(g_iter[jv], gv, g_j, slab.control_grid);
                let rho_c = (1.0 - p.rho * p.rho).sqrt();
                let a = 0.5 * p.sigma * p.sigma * vj / (dv * dv);
                let drift = p.kappa * (p.pbar - vj)
                    + vj * p.sigma * (p.rho * omg * nc.pi + p.rho * nc.phi1 + rho_c * nc.phi2);
                let react = p.mu0 * omg
                    + vj * (-0.5 * p.gamma * omg * nc.pi * nc.pi
                        + omg * (p.mu2 + nc.phi1) * nc.pi);
                let src = vj * omg * (nc.phi1 * nc.phi1 + nc.phi2 * nc.phi2)
                    / (2.0 * p.theta)
                    * g_j;
                rhs[jv] = g_curr[jv] + dt * src;
                if jv == 0 {
                    // degenerate row: pure transport with positive drift
                    let b = p.kappa * p.pbar;
                    di[0] = 1.0 + dt * b / dv - dt * react;
                    up[0] = -dt * b / dv;
                    lo[0] = 0.0;
                } else if jv == nv - 1 {
                    // ghost node G_{N+1} = G_{N-1} + 2 dv slope G_N
                    di[jv] = 1.0 - dt * (a * (-2.0 + 2.0 * dv * slope) + drift * slope + react);
                    lo[jv] = -dt * 2.0 * a;
                    up[jv] = 0.0;
                } else if a * dv >= 0.5 * drift.abs() {
                    lo[jv] = -dt * (a - drift / (2.0 * dv));
                    di[jv] = 1.0 + dt * 2.0 * a - dt * react;
                    up[jv] = -dt * (a + drift / (2.0 * dv));
                } else if drift >= 0.0 {
                    lo[jv] = -dt * a;
                    di[jv] = 1.0 + dt * (2.0 * a + drift / dv) - dt * react;
                    up[jv] = -dt * (a + drift / dv);
                } else {
                    lo[jv] = -dt * (a - drift / dv);
                    di[jv] = 1.0 + dt * (2.0 * a - drift / dv) - dt * react;
                    up[jv] = -dt * a;
                }
            }
            thomas(&lo, &di, &up, &mut rhs)?;
            let mut max_change: f64 = 0.0;
            for jv in 0..nv {
                max_change = max_change.max((rhs[jv] - g_iter[jv]).abs());
                g_iter[jv] = rhs[jv];
            }
            if max_change <= 1e-12 {
                break;
            }
        }
        if g_iter.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite slab profile at t = {t}")));
        }
        for jv in 0..nv {
            out.set(k, jv, g_iter[jv]);
        }
        g_curr.copy_from_slice(&g_iter);
    }
    Ok(out)
}
