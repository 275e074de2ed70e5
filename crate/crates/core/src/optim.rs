//! Smooth unconstrained minimization: gradient descent with
//! Barzilai–Borwein step lengths and Armijo backtracking.

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GdOptions {
    pub max_iters: usize,
    /// Converged once the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Converged once the objective falls below this.
    pub value_tol: f64,
    /// Converged once the relative decrease per iteration stays below this
    /// for `STALL_WINDOW` iterations in a row. Zero disables the test.
    pub rel_tol: f64,
}

const STALL_WINDOW: usize = 20;

impl Default for GdOptions {
    fn default() -> Self {
        Self { max_iters: 5000, grad_tol: 1e-12, value_tol: 0.0, rel_tol: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const STEP_MIN: f64 = 1e-12;
const STEP_MAX: f64 = 1e6;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `f` returns the objective and its gradient. Stops early when a line search
/// cannot make progress; `converged` then reflects the gradient test alone.
pub(crate) fn minimize<F>(f: F, x0: Vec<f64>, opts: &GdOptions) -> Minimum
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut step = 1.0 / max_abs(&g).max(1.0);
    let mut iterations = 0;
    let mut stalled = 0;
    let done = |fx: f64, g: &[f64], stalled: usize| {
        fx <= opts.value_tol || max_abs(g) <= opts.grad_tol || stalled >= STALL_WINDOW
    };

    while iterations < opts.max_iters && !done(fx, &g, stalled) {
        iterations += 1;
        let gg = dot(&g, &g);
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx - ARMIJO_C * t * gg {
                accepted = Some((trial, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else { break };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { (dot(&s, &s) / sy).clamp(STEP_MIN, STEP_MAX) } else { (2.0 * t).min(STEP_MAX) };
        if opts.rel_tol > 0.0 && fx - f_new <= opts.rel_tol * f_new.abs() {
            stalled += 1;
        } else {
            stalled = 0;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    Minimum { converged: done(fx, &g, stalled), x, value: fx, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ill_conditioned_quadratic() {
        let scales = [1.0, 10.0, 100.0, 1000.0];
        let f = |x: &[f64]| {
            let v = x.iter().zip(&scales).map(|(xi, s)| 0.5 * s * (xi - 1.0).powi(2)).sum();
            let g = x.iter().zip(&scales).map(|(xi, s)| s * (xi - 1.0)).collect();
            (v, g)
        };
        let m = minimize(f, vec![0.0; 4], &GdOptions { grad_tol: 1e-10, ..GdOptions::default() });
        assert!(m.converged);
        assert!(m.x.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let m = minimize(f, vec![-1.2, 1.0], &GdOptions { max_iters: 20000, grad_tol: 1e-9, ..GdOptions::default() });
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m);
    }

    #[test]
    fn stall_counts_as_converged() {
        // |x|^3 flattens out near zero; the gradient test alone takes ages
        let f = |x: &[f64]| (x[0].abs().powi(3), vec![3.0 * x[0] * x[0].abs()]);
        let m = minimize(f, vec![1.0], &GdOptions { grad_tol: 0.0, rel_tol: 1e-3, ..GdOptions::default() });
        assert!(m.converged);
        assert!(m.iterations < 5000);
    }

    #[test]
    fn value_tolerance_stops_early() {
        let f = |x: &[f64]| (x[0] * x[0], vec![2.0 * x[0]]);
        let m = minimize(f, vec![3.0], &GdOptions { value_tol: 1e-2, ..GdOptions::default() });
        assert!(m.converged && m.value <= 1e-2);
    }
}
