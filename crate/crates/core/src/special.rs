//! Special functions: the real dilogarithm, the Bessel function `J₁` and
//! factorials of half-integers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const PI2_6: f64 = PI * PI / 6.0;

/// Real dilogarithm `Li₂(x) = -∫₀ˣ ln(1 - t) / t dt` for `x ≤ 1`.
///
/// Returns `None` outside the real-analytic range (`x > 1` or NaN).
pub fn dilog(x: f64) -> Option<f64> {
    if x.is_nan() || x > 1.0 {
        return None;
    }
    Some(dilog_unchecked(x))
}

fn dilog_unchecked(x: f64) -> f64 {
    if x == 1.0 {
        PI2_6
    } else if x == 0.0 {
        0.0
    } else if x < -1.0 {
        // Inversion: Li₂(x) = -π²/6 - ½ ln²(-x) - Li₂(1/x).
        let l = (-x).ln();
        -PI2_6 - 0.5 * l * l - dilog_unchecked(1.0 / x)
    } else if x < -0.5 {
        // Landen: Li₂(x) = -Li₂(x/(x-1)) - ½ ln²(1-x), with x/(x-1) ∈ (1/3, 1/2].
        let l = (-x).ln_1p();
        -dilog_series(x / (x - 1.0)) - 0.5 * l * l
    } else if x <= 0.5 {
        dilog_series(x)
    } else {
        // Reflection: Li₂(x) = π²/6 - ln x ln(1-x) - Li₂(1-x).
        PI2_6 - x.ln() * (-x).ln_1p() - dilog_series(1.0 - x)
    }
}

/// Power series `Σ xᵏ / k²`, used for `|x| ≤ 1/2`.
fn dilog_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = x;
    for k in 1..200 {
        let kf = k as f64;
        let term = pow / (kf * kf);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        pow *= x;
    }
    sum
}

/// Below this argument `J₁` uses its power series.
pub const J1_SERIES_MAX: f64 = 4.0;
/// At and above this argument `J₁` uses the Hankel asymptotic expansion;
/// in between, Miller's backward recurrence.
pub const J1_ASYMPTOTIC_MIN: f64 = 25.0;

/// Bessel function of the first kind of order one.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < J1_SERIES_MAX {
        j1_series(ax)
    } else if ax < J1_ASYMPTOTIC_MIN {
        j1_miller(ax)
    } else {
        j1_asymptotic(ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `J₁(x) / x`, finite at the origin where it equals `1/2`.
pub fn bessel_j1_over_x(x: f64) -> f64 {
    let ax = x.abs();
    if ax < J1_SERIES_MAX {
        j1_over_x_series(ax)
    } else {
        bessel_j1(ax) / ax
    }
}

/// `Σ (-1)^k (x/2)^{2k} / (2 k! (k+1)!)`
fn j1_over_x_series(x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut term = 0.5;
    let mut sum = term;
    for k in 1..60 {
        let kf = k as f64;
        term *= -y / (kf * (kf + 1.0));
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

pub(crate) fn j1_series(x: f64) -> f64 {
    x * j1_over_x_series(x)
}

/// Miller's backward recurrence normalized by `J₀ + 2 Σ J₂ₖ = 1`.
pub(crate) fn j1_miller(x: f64) -> f64 {
    let mut start = (x as usize) + 50;
    if start % 2 == 1 {
        start += 1;
    }
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next; // J_{k-1}
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * cur;
        }
        if k - 1 == 1 {
            j1 = cur;
        }
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    // cur holds J₀.
    norm += cur;
    j1 / norm
}

/// Hankel asymptotic expansion, accurate to machine precision for `x ≥ 25`.
pub(crate) fn j1_asymptotic(x: f64) -> f64 {
    let mu = 4.0;
    let z8 = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    // a_k = Π_{j=1..k} (μ - (2j-1)²) / (k! (8x)^k)
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * z8);
        if a.abs() > last {
            break;
        }
        last = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    // cos(x - 3π/4) = (sin x - cos x)/√2, sin(x - 3π/4) = -(sin x + cos x)/√2.
    let (s, c) = x.sin_cos();
    let cos_chi = (s - c) * FRAC_1_SQRT_2;
    let sin_chi = -(s + c) * FRAC_1_SQRT_2;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

/// `z!` for non-negative half-integers `z ∈ {0, 1/2, 1, 3/2, ...}`, i.e. `Γ(z + 1)`.
///
/// Returns `None` if `2z` is not a non-negative integer.
pub fn half_integer_factorial(z: f64) -> Option<f64> {
    let twice = 2.0 * z;
    if !(twice >= 0.0) || twice.fract() != 0.0 || twice > 340.0 {
        return None;
    }
    let twice = twice as u32;
    let (mut value, mut arg) = if twice % 2 == 0 {
        (1.0, 1.0)
    } else {
        // (1/2)! = √π / 2
        (0.5 * PI.sqrt(), 1.5)
    };
    let target = z + 1.0;
    while arg < target - 0.25 {
        value *= arg;
        arg += 1.0;
    }
    Some(value)
}
