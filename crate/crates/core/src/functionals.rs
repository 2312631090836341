//! Rényi entropy functions `h_α` and the singular functional
//!
//! ```text
//! I(f) = 1/(4π²) ∫₀¹ (f(t) - t f(1)) / (t (1 - t)) dt
//! ```
//!
//! whose value at `f = h_α` is `(1 + α) / (24 α)`.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::quadrature::tanh_sinh_unit;
use crate::special::dilog;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("Rényi order must be a positive number or infinity, got {0}")]
    InvalidOrder(f64),
    #[error("dilogarithm argument {0} is outside x ≤ 1")]
    DilogDomain(f64),
    #[error("quadrature of I(f) did not converge: last estimate {value} ± {error} after {evaluations} evaluations")]
    NotConverged {
        value: f64,
        error: f64,
        evaluations: usize,
    },
    #[error("{0}")]
    Unsupported(&'static str),
}

/// Order `α ∈ ]0, ∞]` of a Rényi entropy.
///
/// The von Neumann case `α = 1` and the min-entropy `α = ∞` are separate
/// variants; `Finite` never holds `1.0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RenyiOrder {
    Finite(f64),
    One,
    Infinity,
}

impl RenyiOrder {
    pub fn new(alpha: f64) -> Result<Self, FunctionalError> {
        if alpha.is_nan() || alpha <= 0.0 {
            Err(FunctionalError::InvalidOrder(alpha))
        } else if alpha == 1.0 {
            Ok(RenyiOrder::One)
        } else if alpha == f64::INFINITY {
            Ok(RenyiOrder::Infinity)
        } else {
            Ok(RenyiOrder::Finite(alpha))
        }
    }

    /// The order as a float (`f64::INFINITY` for the min-entropy).
    pub fn value(self) -> f64 {
        match self {
            RenyiOrder::Finite(a) => a,
            RenyiOrder::One => 1.0,
            RenyiOrder::Infinity => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        !matches!(self, RenyiOrder::Infinity)
    }
}

impl fmt::Display for RenyiOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RenyiOrder::Infinity => write!(f, "inf"),
            o => write!(f, "{}", o.value()),
        }
    }
}

impl Serialize for RenyiOrder {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            RenyiOrder::Infinity => s.serialize_str("inf"),
            o => s.serialize_f64(o.value()),
        }
    }
}

impl<'de> Deserialize<'de> for RenyiOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let alpha = match Raw::deserialize(d)? {
            Raw::Num(a) => a,
            Raw::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => f64::INFINITY,
                other => other
                    .parse::<f64>()
                    .map_err(|_| serde::de::Error::custom(format!("invalid Rényi order {t:?}")))?,
            },
        };
        RenyiOrder::new(alpha).map_err(serde::de::Error::custom)
    }
}

/// `h_α(t)`: zero outside `[0, 1]`, otherwise the Rényi entropy of the
/// two-point distribution `{t, 1 - t}`.
pub fn h(alpha: RenyiOrder, t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    h_pair(alpha, t, 1.0 - t)
}

/// `h_α` evaluated from the pair `(t, 1 - t)` when both are known
/// accurately. Callers guarantee `t, s ≥ 0` and `t + s = 1`.
pub fn h_pair(alpha: RenyiOrder, t: f64, s: f64) -> f64 {
    match alpha {
        RenyiOrder::One => {
            let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
            -(xlogx(t) + xlogx(s))
        }
        RenyiOrder::Infinity => -t.max(s).ln(),
        RenyiOrder::Finite(a) => {
            // ln(tᵃ + sᵃ) = a ln m + ln(1 + (min/m)ᵃ), m = max(t, s) ≥ 1/2;
            // avoids underflow of tᵃ + sᵃ for large a.
            let m = t.max(s);
            let r = t.min(s) / m;
            (a * m.ln() + r.powf(a).ln_1p()) / (1.0 - a)
        }
    }
}

/// Upper bound of every `h_α`.
pub const H_MAX: f64 = LN_2;

/// Value of an integral functional with its error bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

const MAX_LEVEL: usize = 12;

/// `I(f)` for a function given on `[0, 1]`.
///
/// The caller is responsible for `f(0) = 0` and integrability of
/// `(f(t) - t f(1)) / (t (1 - t))`; non-integrable input surfaces as
/// [`FunctionalError::NotConverged`].
pub fn i_functional(f: impl Fn(f64) -> f64, tol: f64) -> Result<FunctionalValue, FunctionalError> {
    i_functional_pair(|t, _s| f(t), tol)
}

/// `I(f)` for `f` evaluated from the accurately known pair `(t, 1 - t)`.
pub fn i_functional_pair(
    f: impl Fn(f64, f64) -> f64,
    tol: f64,
) -> Result<FunctionalValue, FunctionalError> {
    let f1 = f(1.0, 0.0);
    let scale = 1.0 / (4.0 * PI * PI);
    // Internal tolerance is on the unscaled integral.
    let r = tanh_sinh_unit(|t, s| f(t, s) - t * f1, tol / scale, MAX_LEVEL);
    if !r.converged {
        return Err(FunctionalError::NotConverged {
            value: r.value * scale,
            error: r.abs_error_estimate * scale,
            evaluations: r.evaluations,
        });
    }
    Ok(FunctionalValue {
        value: r.value * scale,
        abs_error_estimate: r.abs_error_estimate * scale,
        evaluations: r.evaluations,
    })
}

/// `I(h_α)` by quadrature.
pub fn i_functional_renyi(alpha: RenyiOrder, tol: f64) -> Result<FunctionalValue, FunctionalError> {
    i_functional_pair(|t, s| h_pair(alpha, t, s), tol)
}

/// Closed form `I(h_α) = (1 + α) / (24 α)` for finite `α`.
pub fn i_h_closed_form(alpha: RenyiOrder) -> Result<f64, FunctionalError> {
    match alpha {
        RenyiOrder::Infinity => Err(FunctionalError::Unsupported(
            "closed form I(h_α) is stated for finite α; use RENYI_INFINITY_PREFACTOR",
        )),
        o => {
            let a = o.value();
            Ok((1.0 + a) / (24.0 * a))
        }
    }
}

/// `lim_{α→∞} (1 + α) / (24 α)`.
pub const RENYI_INFINITY_PREFACTOR: f64 = 1.0 / 24.0;

/// `I(h_α)` for any order, using the `α → ∞` limit constant for the min-entropy.
pub fn renyi_prefactor(alpha: RenyiOrder) -> f64 {
    i_h_closed_form(alpha).unwrap_or(RENYI_INFINITY_PREFACTOR)
}

/// Checked dilogarithm.
pub fn dilog_checked(x: f64) -> Result<f64, FunctionalError> {
    dilog(x).ok_or(FunctionalError::DilogDomain(x))
}

/// `Li(y) + ½ (ln y)²` with `Li(y) = Li₂(1 - y)`, for `y ≥ 1`. Tends to `-π²/6`.
pub fn dilog_shifted_bracket(y: f64) -> Result<f64, FunctionalError> {
    let l = y.ln();
    Ok(dilog_checked(1.0 - y)? + 0.5 * l * l)
}

/// `I_α(x) = ∫₀ˣ [ln(1 + s^α) - α ln(1 + s)] / s ds` expressed through the
/// dilogarithm: `α Li₂(-x) - Li₂(-x^α) / α`.
pub fn renyi_log_integral(alpha: f64, x: f64) -> Result<f64, FunctionalError> {
    if !(alpha > 0.0) || !(x >= 0.0) {
        return Err(FunctionalError::InvalidOrder(alpha));
    }
    Ok(alpha * dilog_checked(-x)? - dilog_checked(-x.powf(alpha))? / alpha)
}

/// Decomposition of `I_α(x)` into the two dilogarithm brackets and the
/// logarithmic remainder, evaluated at `x = e^{ln_x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogIntegralTerms {
    /// `Li(1 + x) + ½ ln²(1 + x)`
    pub bracket_x: f64,
    /// `Li(1 + x^α) + ½ ln²(1 + x^α)`
    pub bracket_x_alpha: f64,
    /// `-(α/2) ln²(1 + x) + (1/(2α)) ln²(1 + x^α)`
    pub remainder: f64,
    /// `α · bracket_x - bracket_x_alpha / α + remainder`
    pub value: f64,
}

/// `Li₂(-y) + ½ ln²(1 + y)` for `y = e^{ln_y}`, stable for huge `y`.
fn neg_bracket(ln_y: f64) -> Result<f64, FunctionalError> {
    if ln_y < 30.0 {
        let y = ln_y.exp();
        let l = y.ln_1p();
        return Ok(dilog_checked(-y)? + 0.5 * l * l);
    }
    // Li₂(-y) = -π²/6 - ½ ln²y - Li₂(-1/y), ln(1+y) = ln y + ln1p(1/y).
    let inv = (-ln_y).exp();
    let e = inv.ln_1p();
    Ok(-PI * PI / 6.0 + ln_y * e + 0.5 * e * e - dilog_checked(-inv)?)
}

pub fn log_integral_terms(alpha: f64, ln_x: f64) -> Result<LogIntegralTerms, FunctionalError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(FunctionalError::InvalidOrder(alpha));
    }
    let bracket_x = neg_bracket(ln_x)?;
    let bracket_x_alpha = neg_bracket(alpha * ln_x)?;
    // ln(1+x) = ln x + a, ln(1+x^α) = α ln x + b; the ln² x pieces cancel.
    let a = ln_1p_exp_neg(ln_x);
    let b = ln_1p_exp_neg(alpha * ln_x);
    let remainder = if ln_x > 0.0 {
        0.5 * (-2.0 * alpha * a * ln_x - alpha * a * a + 2.0 * b * ln_x + b * b / alpha)
    } else {
        let l1 = ln_x.exp().ln_1p();
        let l2 = (alpha * ln_x).exp().ln_1p();
        -0.5 * alpha * l1 * l1 + 0.5 * l2 * l2 / alpha
    };
    let value = alpha * bracket_x - bracket_x_alpha / alpha + remainder;
    Ok(LogIntegralTerms {
        bracket_x,
        bracket_x_alpha,
        remainder,
        value,
    })
}

/// `ln(1 + e^{-z})`
fn ln_1p_exp_neg(z: f64) -> f64 {
    (-z).exp().ln_1p()
}

/// `I(h_α)` via the substitution `s = (1 - t)/t` and the dilogarithm, taking
/// `x → ∞` far enough that both brackets sit on their `-π²/6` limit to
/// double precision.
pub fn i_h_via_dilog(alpha: RenyiOrder) -> Result<f64, FunctionalError> {
    let a = match alpha {
        RenyiOrder::Finite(a) => a,
        RenyiOrder::One => {
            return Err(FunctionalError::Unsupported(
                "the dilogarithm route divides by 1 - α; use the quadrature for α = 1",
            ))
        }
        RenyiOrder::Infinity => {
            return Err(FunctionalError::Unsupported("the dilogarithm route needs finite α"))
        }
    };
    let ln_x = 60.0 / a.min(1.0);
    let terms = log_integral_terms(a, ln_x)?;
    Ok(terms.value / (4.0 * PI * PI * (1.0 - a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ord(a: f64) -> RenyiOrder {
        RenyiOrder::new(a).unwrap()
    }

    #[test]
    fn order_construction() {
        assert_eq!(ord(1.0), RenyiOrder::One);
        assert_eq!(ord(f64::INFINITY), RenyiOrder::Infinity);
        assert_eq!(ord(2.0), RenyiOrder::Finite(2.0));
        assert!(RenyiOrder::new(0.0).is_err());
        assert!(RenyiOrder::new(-1.0).is_err());
        assert!(RenyiOrder::new(f64::NAN).is_err());
    }

    #[test]
    fn h_examples() {
        assert!((h(RenyiOrder::One, 0.5) - LN_2).abs() < 1e-15);
        assert!((h(ord(2.0), 0.5) - LN_2).abs() < 1e-15);
        for a in [0.3, 1.0, 2.0, f64::INFINITY] {
            assert_eq!(h(ord(a), -0.3), 0.0);
            assert_eq!(h(ord(a), 1.7), 0.0);
        }
        assert!((h(RenyiOrder::Infinity, 0.5) - LN_2).abs() < 1e-15);
        assert_eq!(h(RenyiOrder::Infinity, 1.0), 0.0);
        assert_eq!(h(RenyiOrder::One, 0.0), 0.0);
        assert_eq!(h(RenyiOrder::One, 1.0), 0.0);
    }

    #[test]
    fn h_pointwise_limits() {
        for i in 1..100 {
            let t = i as f64 / 100.0;
            let h1 = h(RenyiOrder::One, t);
            assert!((h(ord(0.999), t) - h1).abs() < 1e-3);
            assert!((h(ord(1.001), t) - h1).abs() < 1e-3);
            assert!((h(ord(1e4), t) - h(RenyiOrder::Infinity, t)).abs() < 1e-3);
        }
    }

    #[test]
    fn functional_trivial_cases() {
        let v = i_functional(|t| t, 1e-12).unwrap();
        assert!(v.value.abs() < 1e-15);
        let v = i_functional(|t| t * (1.0 - t), 1e-12).unwrap();
        assert!((v.value - 1.0 / (4.0 * PI * PI)).abs() < 1e-13);
    }

    #[test]
    fn functional_of_von_neumann_entropy() {
        let v = i_functional(|t| h(RenyiOrder::One, t), 1e-10).unwrap();
        assert!((v.value - 1.0 / 12.0).abs() < 1e-8, "{}", v.value);
    }

    #[test]
    fn functional_rejects_nonintegrable() {
        // f ≡ 1 on ]0,1]: integrand ~ 1/t near 0.
        let r = i_functional(|t| if t > 0.0 { 1.0 } else { 0.0 }, 1e-10);
        assert!(matches!(r, Err(FunctionalError::NotConverged { .. })));
    }

    #[test]
    fn closed_form_values() {
        assert!((i_h_closed_form(RenyiOrder::One).unwrap() - 1.0 / 12.0).abs() < 1e-16);
        assert!((i_h_closed_form(ord(2.0)).unwrap() - 1.0 / 16.0).abs() < 1e-16);
        assert!((i_h_closed_form(ord(0.5)).unwrap() - 1.0 / 8.0).abs() < 1e-16);
        assert!(i_h_closed_form(RenyiOrder::Infinity).is_err());
        assert_eq!(renyi_prefactor(RenyiOrder::Infinity), 1.0 / 24.0);
    }

    #[test]
    fn dilog_bracket_limit() {
        // Li₂(1 - y) + ½ ln²y = -π²/6 + (ln y + 1)/y + O(ln y / y²).
        for y in [1e6, 1e8] {
            let v = dilog_shifted_bracket(y).unwrap();
            let approach = (y.ln() + 1.0) / y;
            assert!((v + PI * PI / 6.0 - approach).abs() < 1e-9, "y={y}: {v}");
        }
        let v = dilog_shifted_bracket(1e7).unwrap();
        assert!((v + PI * PI / 6.0).abs() < 1e-5);
    }

    #[test]
    fn log_integral_matches_quadrature() {
        // Independent route: integrate the defining integrand directly.
        let rule = crate::quadrature::composite_gauss_legendre(0.0, 1.0, 200, 20);
        for &(a, x) in &[(0.5f64, 3.0), (2.0, 5.0), (0.25, 10.0), (4.0, 2.0)] {
            // s = x vᵏ with k a = 2 for a < 1, so the integrand is smooth at 0.
            let k = if a < 1.0 { (2.0 / a).round() } else { 1.0 };
            let q = rule.integrate(|v| {
                let s = x * v.powf(k);
                k * ((s.powf(a)).ln_1p() - a * s.ln_1p()) / v
            });
            let d = renyi_log_integral(a, x).unwrap();
            assert!((d - q).abs() < 1e-9, "α={a} x={x}: {d} vs {q}");
            let terms = log_integral_terms(a, x.ln()).unwrap();
            assert!((terms.value - d).abs() < 1e-11);
        }
    }

    #[test]
    fn dilog_route_matches_closed_form() {
        for a in [0.25, 0.5, 1.5, 2.0, 4.0, 10.0] {
            let v = i_h_via_dilog(ord(a)).unwrap();
            let c = i_h_closed_form(ord(a)).unwrap();
            assert!((v - c).abs() < 1e-8, "α={a}: {v} vs {c}");
        }
        assert!(i_h_via_dilog(RenyiOrder::One).is_err());
    }

    #[test]
    fn order_serde_roundtrip() {
        let orders = vec![ord(0.5), RenyiOrder::One, RenyiOrder::Infinity];
        let json = serde_json::to_string(&orders).unwrap();
        assert_eq!(json, r#"[0.5,1.0,"inf"]"#);
        let back: Vec<RenyiOrder> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, orders);
        assert!(serde_json::from_str::<RenyiOrder>("0.0").is_err());
        assert!(serde_json::from_str::<RenyiOrder>(r#""-2""#).is_err());
    }
}
