//! Position-space integral kernels of the Fermi projection `χ_Γ(P)`:
//!
//! ```text
//! K_Γ(q, q') = (2π)^{-d} ∫_Γ e^{i p·(q - q')} dp
//! ```
//!
//! in closed form for interval unions, boxes and balls.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{Domain, Shape};
use crate::special::bessel_j1_over_x;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("unsupported Fermi sea: {0}")]
    UnsupportedShape(String),
}

/// A translation-invariant Hermitian kernel on `ℝ^d`.
pub trait Kernel: Sync {
    fn dim(&self) -> usize;

    /// `K(q, q')` as a function of `u = q - q'`.
    fn eval_diff(&self, u: &[f64]) -> Complex64;

    fn eval(&self, q: &[f64], q2: &[f64]) -> Complex64 {
        let d = self.dim();
        debug_assert!(q.len() == d && q2.len() == d, "point dimension mismatch");
        let mut u = [0.0; 3];
        for k in 0..d {
            u[k] = q[k] - q2[k];
        }
        self.eval_diff(&u[..d])
    }

    /// Whether the kernel is real-valued, allowing real symmetric matrices.
    fn is_real(&self) -> bool {
        false
    }
}

/// Below this `|x|` the sinc and spherical kernels switch to their Taylor
/// series; Nyström diagonals hit `x = 0` exactly.
pub const SINC_TAYLOR_THRESHOLD: f64 = 1e-4;

/// `sin(x) / x`
pub fn sinc(x: f64) -> f64 {
    if x.abs() < SINC_TAYLOR_THRESHOLD {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// `(sin x - x cos x) / x³`, which tends to `1/3`.
fn spherical_profile(x: f64) -> f64 {
    if x.abs() < 1.0 {
        // Σ_{k≥1} (-1)^{k+1} 2k / (2k+1)! x^{2k-2}
        let x2 = x * x;
        let mut term = 1.0 / 3.0; // k = 1
        let mut sum = term;
        for k in 2..14 {
            let kf = k as f64;
            // ratio of consecutive coefficients times x²
            term *= -x2 * kf / ((kf - 1.0) * (2.0 * kf) * (2.0 * kf + 1.0));
            sum += term;
        }
        sum
    } else {
        (x.sin() - x * x.cos()) / (x * x * x)
    }
}

/// Kernel of `χ_Γ(P)` for a catalog Fermi sea.
#[derive(Debug, Clone, PartialEq)]
pub struct FermiKernel {
    gamma: Domain,
    real: bool,
}

impl FermiKernel {
    pub fn new(gamma: &Domain) -> Result<Self, KernelError> {
        if let Shape::ConvexPolygon(_) = gamma.shape() {
            return Err(KernelError::UnsupportedShape(
                "polygonal Fermi seas have no closed-form kernel here".into(),
            ));
        }
        Ok(FermiKernel {
            gamma: gamma.clone(),
            real: gamma.is_centrally_symmetric(),
        })
    }

    pub fn gamma(&self) -> &Domain {
        &self.gamma
    }

    /// `K(q, q) = |Γ| / (2π)^d`.
    pub fn diagonal(&self) -> f64 {
        crate::geometry::mean_density(&self.gamma)
    }
}

/// `(2π)^{-1} ∫_a^b e^{ipu} dp = e^{i c u} sin(h u) / (π u)` with `c` the
/// midpoint and `h` the half-width.
fn interval_kernel(lo: f64, hi: f64, u: f64) -> Complex64 {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let amp = h / PI * sinc(h * u);
    if c == 0.0 {
        Complex64::new(amp, 0.0)
    } else {
        let (s, co) = (c * u).sin_cos();
        Complex64::new(amp * co, amp * s)
    }
}

impl Kernel for FermiKernel {
    fn dim(&self) -> usize {
        self.gamma.dim()
    }

    fn eval_diff(&self, u: &[f64]) -> Complex64 {
        match self.gamma.shape() {
            Shape::IntervalUnion(iv) => iv.iter().map(|i| interval_kernel(i.lo, i.hi, u[0])).sum(),
            Shape::Box(axes) => axes
                .iter()
                .zip(u)
                .map(|(a, &uk)| interval_kernel(a.lo, a.hi, uk))
                .product(),
            Shape::Ball { center, radius } => {
                let d = center.len();
                let r = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                let p = *radius;
                let x = p * r;
                let radial = match d {
                    1 => p / PI * sinc(x),
                    2 => p * p / (2.0 * PI) * bessel_j1_over_x(x),
                    _ => p.powi(3) / (2.0 * PI * PI) * spherical_profile(x),
                };
                let phase: f64 = center.iter().zip(u).map(|(c, x)| c * x).sum();
                if phase == 0.0 {
                    Complex64::new(radial, 0.0)
                } else {
                    let (s, c) = phase.sin_cos();
                    Complex64::new(radial * c, radial * s)
                }
            }
            Shape::ConvexPolygon(_) => unreachable!("rejected at construction"),
        }
    }

    fn is_real(&self) -> bool {
        self.real
    }
}

/// True iff `K(q, q') = conj(K(q', q))` within `1e-12` on every pair.
pub fn is_hermitian_sample<K: Kernel + ?Sized>(kernel: &K, pairs: &[(Vec<f64>, Vec<f64>)]) -> bool {
    pairs.iter().all(|(q, q2)| {
        let a = kernel.eval(q, q2);
        let b = kernel.eval(q2, q).conj();
        (a - b).norm() <= 1e-12
    })
}
