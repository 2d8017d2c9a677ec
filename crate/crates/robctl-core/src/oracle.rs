//! Independent reference integrators used by the verification suites.
//!
//! These deliberately share no code with the closed-form evaluators they
//! check: the time functions are verified against plain RK4 backward
//! integration of the ODEs they are claimed to solve, and integrals against
//! adaptive Simpson quadrature.

/// Integrate `y' = rhs(t, y)` backward from `y(grid.last()) = terminal`,
/// returning `y` at every grid point (grid ascending). Each grid interval is
/// split into `substeps` RK4 steps.
pub fn rk4_backward_grid(
    rhs: impl Fn(f64, f64) -> f64,
    terminal: f64,
    grid: &[f64],
    substeps: usize,
) -> Vec<f64> {
    assert!(grid.len() >= 2 && substeps >= 1);
    let mut out = vec![0.0; grid.len()];
    let n = grid.len();
    out[n - 1] = terminal;
    let mut y = terminal;
    for i in (0..n - 1).rev() {
        let (t1, t0) = (grid[i + 1], grid[i]);
        let h = (t0 - t1) / substeps as f64; // negative step
        let mut t = t1;
        for _ in 0..substeps {
            let k1 = rhs(t, y);
            let k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
            let k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
            let k4 = rhs(t + h, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        out[i] = y;
    }
    out
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}
