//! Gridded value surfaces in reduced coordinates, with the weighted sup-norm
//! the fixed-point theory contracts in.
//!
//! Surfaces store the reduced profile: `h(t)` for the consumption model
//! (`W = h·x^{1−γ}/(1−γ)`, empty space grid) and `G(t,v)` for the
//! stochastic-volatility model (`W = G·x^{1−γ}/(1−γ)`). The weighted norm of
//! `W/b1` translates into `|profile| / weight(t, v)` with the weights below.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reduced-coordinate weight of the norm `‖W‖ = sup |W|/b1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SurfaceWeight {
    /// Consumption model: `b1 = x^{1−γ}`, so the reduced weight is the
    /// constant `|1−γ|`.
    Constant { value: f64 },
    /// Stochastic-volatility model: slab-shifted supersolution weight
    /// `b1 = 2K6·ḡ1(t−iε)·x^{1−γ}·e^{ḡ2(t−iε)p}` on `t ∈ [iε, (i+1)ε)`,
    /// with `ḡ1(s) = e^{−rate·s}`, `ḡ2(s) = b − 4√s`.
    SlabShifted {
        k6: f64,
        rate: f64,
        b: f64,
        slab_width: f64,
        one_minus_gamma_abs: f64,
    },
}

impl SurfaceWeight {
    /// Weight at `(t, v)` in reduced coordinates (divide the profile by it).
    pub fn eval(&self, t: f64, v: f64) -> f64 {
        match self {
            SurfaceWeight::Constant { value } => *value,
            SurfaceWeight::SlabShifted {
                k6,
                rate,
                b,
                slab_width,
                one_minus_gamma_abs,
            } => {
                let i = (t / slab_width).floor().max(0.0);
                let dt = (t - i * slab_width).max(0.0).min(*slab_width);
                let gbar1 = (-rate * dt).exp();
                let gbar2 = b - 4.0 * dt.sqrt();
                one_minus_gamma_abs * 2.0 * k6 * gbar1 * (gbar2 * v).exp()
            }
        }
    }
}

/// A gridded reduced value surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSurface {
    /// Ascending time grid.
    pub times: Vec<f64>,
    /// Ascending variance grid; empty for the consumption model.
    pub space: Vec<f64>,
    /// Row-major `times.len() × max(space.len(), 1)`.
    pub values: Vec<f64>,
    pub weight: SurfaceWeight,
}

impl ValueSurface {
    pub fn n_space(&self) -> usize {
        self.space.len().max(1)
    }

    pub fn at(&self, it: usize, jv: usize) -> f64 {
        self.values[it * self.n_space() + jv]
    }

    pub fn set(&mut self, it: usize, jv: usize, value: f64) {
        let w = self.n_space();
        self.values[it * w + jv] = value;
    }

    pub fn row(&self, it: usize) -> &[f64] {
        let w = self.n_space();
        &self.values[it * w..(it + 1) * w]
    }

    /// Build from a function of `(t, v)` (v = 0 used for the empty grid).
    pub fn from_fn(
        times: Vec<f64>,
        space: Vec<f64>,
        weight: SurfaceWeight,
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let w = space.len().max(1);
        let mut values = Vec::with_capacity(times.len() * w);
        for &t in &times {
            if space.is_empty() {
                values.push(f(t, 0.0));
            } else {
                for &v in &space {
                    values.push(f(t, v));
                }
            }
        }
        ValueSurface {
            times,
            space,
            values,
            weight,
        }
    }

    pub fn constant(times: Vec<f64>, space: Vec<f64>, weight: SurfaceWeight, c: f64) -> Self {
        Self::from_fn(times, space, weight, |_, _| c)
    }

    /// Weighted sup-norm `max |value| / weight(t, v)`.
    pub fn weighted_norm(&self) -> f64 {
        let mut best: f64 = 0.0;
        let w = self.n_space();
        for (it, &t) in self.times.iter().enumerate() {
            for jv in 0..w {
                let v = if self.space.is_empty() { 0.0 } else { self.space[jv] };
                best = best.max(self.values[it * w + jv].abs() / self.weight.eval(t, v));
            }
        }
        best
    }

    /// Weighted sup-norm of the difference; grids must match.
    pub fn weighted_distance(&self, other: &ValueSurface) -> Result<f64> {
        if self.times != other.times || self.space != other.space {
            return Err(Error::OutOfDomain(
                "surfaces live on different grids".into(),
            ));
        }
        let mut best: f64 = 0.0;
        let w = self.n_space();
        for (it, &t) in self.times.iter().enumerate() {
            for jv in 0..w {
                let v = if self.space.is_empty() { 0.0 } else { self.space[jv] };
                let d = (self.values[it * w + jv] - other.values[it * w + jv]).abs();
                best = best.max(d / self.weight.eval(t, v));
            }
        }
        Ok(best)
    }
}
