//! One-dimensional quadrature rules.
//!
//! Gauss–Legendre rules (single and composite panels) drive the Nyström
//! discretization and the boundary quadratures. The tanh-sinh rule on `[0, 1]`
//! handles integrands with integrable endpoint singularities, which is what
//! the singular functional `I(f)` needs.

use std::f64::consts::PI;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Nodes come out in ascending order. Roots of `P_n` are found by Newton
/// iteration from the standard asymptotic initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * d * d);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A set of quadrature nodes with matching weights on a line segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels of
/// `order` nodes each.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> Rule1d {
    let (x, w) = gauss_legendre(order);
    composite_from_reference(a, b, panels, &x, &w)
}

/// Same as [`composite_gauss_legendre`] but reuses a precomputed reference rule.
pub fn composite_from_reference(a: f64, b: f64, panels: usize, x: &[f64], w: &[f64]) -> Rule1d {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * x.len());
    let mut weights = Vec::with_capacity(panels * x.len());
    for p in 0..panels {
        let lo = a + width * p as f64;
        let half = 0.5 * width;
        let mid = lo + half;
        for (&xi, &wi) in x.iter().zip(w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    Rule1d { nodes, weights }
}

/// Number of panels of `order` nodes needed to reach `nodes_per_unit` on a
/// segment of length `len`.
pub fn panel_count(len: f64, nodes_per_unit: f64, order: usize) -> usize {
    ((len * nodes_per_unit / order as f64).ceil() as usize).max(1)
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptive {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Largest abscissa used by [`tanh_sinh_unit`]; beyond it both `t` and `1 - t`
/// underflow and every admissible integrand contributes nothing.
const TANH_SINH_XMAX: f64 = 6.5;

/// Tanh-sinh integration over `[0, 1]`.
///
/// The integrand receives the pair `(t, 1 - t)` with both members computed
/// without cancellation, and returns `g(t) · t (1 - t)` already multiplied by
/// the Jacobian factor `t (1 - t)`; this lets callers integrate functions with
/// `1 / (t (1 - t))` singularities without ever dividing by a tiny number.
///
/// The step is halved until two successive levels agree within `tol` or
/// `max_level` is reached.
pub fn tanh_sinh_unit(
    g_times_ts: impl Fn(f64, f64) -> f64,
    tol: f64,
    max_level: usize,
) -> Adaptive {
    // With u = (π/2) sinh x: t = 1/(1+e^{-2u}), 1-t = 1/(1+e^{2u}),
    // dt/dx = π cosh(x) t (1-t).
    let term = |x: f64| -> f64 {
        let u = 0.5 * PI * x.sinh();
        let t = 1.0 / (1.0 + (-2.0 * u).exp());
        let s = 1.0 / (1.0 + (2.0 * u).exp());
        if t == 0.0 || s == 0.0 {
            return 0.0;
        }
        let v = g_times_ts(t, s) * PI * x.cosh();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };

    let mut h = 1.0;
    let mut evaluations = 1;
    let mut sum = term(0.0);
    let kmax = (TANH_SINH_XMAX / h) as i64;
    for k in 1..=kmax {
        let x = k as f64 * h;
        sum += term(x) + term(-x);
        evaluations += 2;
    }
    let mut estimate = sum * h;
    let mut error = f64::INFINITY;
    for level in 1..=max_level {
        h *= 0.5;
        let kmax = (TANH_SINH_XMAX / h) as i64;
        let mut k = 1;
        while k <= kmax {
            let x = k as f64 * h;
            sum += term(x) + term(-x);
            evaluations += 2;
            k += 2;
        }
        let next = sum * h;
        error = (next - estimate).abs();
        estimate = next;
        if level >= 3 && error <= tol {
            return Adaptive {
                value: estimate,
                abs_error_estimate: error,
                evaluations,
                converged: true,
            };
        }
    }
    Adaptive {
        value: estimate,
        abs_error_estimate: error,
        evaluations,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_small_rules_are_exact() {
        let (x, w) = gauss_legendre(1);
        assert_eq!(x, vec![0.0]);
        assert!((w[0] - 2.0).abs() < 1e-15);

        let (x, w) = gauss_legendre(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_to_degree_2n_minus_1() {
        for n in [3, 8, 16, 33, 64] {
            let (x, w) = gauss_legendre(n);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn composite_rule_covers_interval() {
        let r = composite_gauss_legendre(-2.0, 3.0, 7, 10);
        assert_eq!(r.len(), 70);
        assert!((r.weights.iter().sum::<f64>() - 5.0).abs() < 1e-13);
        assert!(r.nodes.iter().all(|&x| x > -2.0 && x < 3.0));
        let v = r.integrate(|x| (3.0 * x).cos());
        let exact = ((9.0f64).sin() - (-6.0f64).sin()) / 3.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        // ∫ t^{-3/4} dt over [0,1] = 4; pass g·t(1-t) = t^{1/4} (1-t).
        let r = tanh_sinh_unit(|t, s| t.powf(0.25) * s, 1e-12, 12);
        assert!(r.converged);
        assert!((r.value - 4.0).abs() < 1e-10, "{}", r.value);

        // ∫ ln(t) dt = -1.
        let r = tanh_sinh_unit(|t, s| t.ln() * t * s, 1e-12, 12);
        assert!((r.value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn tanh_sinh_reports_nonconvergence() {
        // Non-integrable: ∫ 1/t dt.
        let r = tanh_sinh_unit(|_t, s| s, 1e-12, 6);
        assert!(!r.converged);
    }
}
