//! Hermitian eigensolves, spectral clamping and `S_α = Σ_i h_α(λ_i)`.

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{self, DiscretizeError, NystromConfig};
use crate::functionals::{h_pair, RenyiOrder};
use crate::geometry::{Domain, Shape};

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("eigenvalue {value} lies {violation:e} outside [0, 1]; the discretization is under-resolved")]
    OutOfRange { value: f64, violation: f64 },
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
}

/// A dense Hermitian matrix, stored real when the kernel is real.
#[derive(Debug, Clone)]
pub enum HermitianMatrix {
    Real(Mat<f64>),
    Complex(Mat<Complex64>),
}

impl HermitianMatrix {
    pub fn n(&self) -> usize {
        match self {
            HermitianMatrix::Real(m) => m.nrows(),
            HermitianMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, HermitianMatrix::Real(_))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match self {
            HermitianMatrix::Real(m) => Complex64::new(m[(i, j)], 0.0),
            HermitianMatrix::Complex(m) => m[(i, j)],
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.get(i, i).re).sum()
    }

    /// `max |A_ij - conj(A_ji)|` relative to the largest entry.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n();
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for j in 0..n {
            for i in j..n {
                let a = self.get(i, j);
                let b = self.get(j, i).conj();
                defect = defect.max((a - b).norm());
                scale = scale.max(a.norm()).max(b.norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }
}

/// Anything that can hand out a Hermitian matrix for spectral analysis.
pub trait HermitianOperator {
    fn matrix(&self) -> &HermitianMatrix;
}

impl HermitianOperator for HermitianMatrix {
    fn matrix(&self) -> &HermitianMatrix {
        self
    }
}

/// Thresholds for eigenvalues found outside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTolerance {
    /// Violations beyond this set the warning flag.
    pub warn: f64,
    /// Violations at or beyond this abort.
    pub abort: f64,
}

impl Default for SpectrumTolerance {
    fn default() -> Self {
        SpectrumTolerance {
            warn: 1e-7,
            abort: 1e-3,
        }
    }
}

/// Eigenvalues clamped to `[0, 1]`, ascending, with clamp bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub clamp_count: usize,
    /// Largest distance outside `[0, 1]` before clamping.
    pub max_violation: f64,
    pub warning: bool,
}

impl Spectrum {
    /// Clamp raw eigenvalues, aborting if any lies `tol.abort` or further
    /// outside `[0, 1]`.
    pub fn from_raw(mut raw: Vec<f64>, tol: SpectrumTolerance) -> Result<Self, SpectraError> {
        raw.sort_by(f64::total_cmp);
        let mut clamp_count = 0;
        let mut max_violation: f64 = 0.0;
        for v in raw.iter_mut() {
            if !v.is_finite() {
                return Err(SpectraError::Eigensolver(format!("non-finite eigenvalue {v}")));
            }
            let violation = if *v < 0.0 {
                -*v
            } else if *v > 1.0 {
                *v - 1.0
            } else {
                0.0
            };
            if violation > 0.0 {
                if violation >= tol.abort {
                    return Err(SpectraError::OutOfRange { value: *v, violation });
                }
                clamp_count += 1;
                max_violation = max_violation.max(violation);
                *v = v.clamp(0.0, 1.0);
            }
        }
        Ok(Spectrum {
            eigenvalues: raw,
            clamp_count,
            max_violation,
            warning: max_violation >= tol.warn,
        })
    }

    /// Spectrum from values already known to lie in `[0, 1]`.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self::from_raw(values, SpectrumTolerance { warn: 1e-7, abort: f64::INFINITY })
            .expect("finite values")
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `Π_i max(λ_i, 1 - λ_i)`, the largest eigenvalue of the associated
    /// quasi-free state.
    pub fn largest_state_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|&l| l.max(1.0 - l)).product()
    }

    /// The spectrum of `1 - D`.
    pub fn complement(&self) -> Spectrum {
        let mut ev: Vec<f64> = self.eigenvalues.iter().map(|&l| 1.0 - l).collect();
        ev.reverse();
        Spectrum {
            eigenvalues: ev,
            ..self.clone()
        }
    }
}

/// Full spectrum of a Hermitian operator by dense eigendecomposition.
pub fn eigenvalues<O: HermitianOperator + ?Sized>(op: &O) -> Result<Spectrum, SpectraError> {
    eigenvalues_with(op.matrix(), SpectrumTolerance::default())
}

pub fn eigenvalues_with(m: &HermitianMatrix, tol: SpectrumTolerance) -> Result<Spectrum, SpectraError> {
    let defect = m.hermitian_defect();
    if defect > 1e-13 {
        return Err(SpectraError::NotHermitian(defect));
    }
    if m.n() == 0 {
        return Ok(Spectrum::from_values(Vec::new()));
    }
    let raw = match m {
        HermitianMatrix::Real(a) => a.self_adjoint_eigenvalues(Side::Lower),
        HermitianMatrix::Complex(a) => a.self_adjoint_eigenvalues(Side::Lower),
    }
    .map_err(|e| SpectraError::Eigensolver(format!("{e:?}")))?;
    Spectrum::from_raw(raw, tol)
}

/// Eigenvalues this close to 0 or 1 contribute exactly zero entropy.
pub const TRIVIAL_EIGENVALUE_GAP: f64 = 1e-14;

/// `Σ_i h_α(λ_i)`, summed in ascending eigenvalue order.
pub fn renyi_entropy(spec: &Spectrum, alpha: RenyiOrder) -> f64 {
    spec.eigenvalues
        .iter()
        .map(|&l| {
            if l <= TRIVIAL_EIGENVALUE_GAP || l >= 1.0 - TRIVIAL_EIGENVALUE_GAP {
                0.0
            } else {
                h_pair(alpha, l, 1.0 - l)
            }
        })
        .sum()
}

/// Where an entropy value came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub gamma: String,
    pub omega: String,
    pub route: Route,
    pub rule: String,
    pub n: usize,
    pub clamp_count: usize,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Nystrom,
    TensorBox,
    Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    pub alpha: RenyiOrder,
    pub l: f64,
    pub s: f64,
    pub provenance: Provenance,
}

impl EntropyResult {
    pub fn new(spec: &Spectrum, alpha: RenyiOrder, l: f64, provenance: Provenance) -> Self {
        EntropyResult {
            alpha,
            l,
            s: renyi_entropy(spec, alpha),
            provenance,
        }
    }
}

/// Discretization route selection for [`entropy_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteChoice {
    /// Tensor route for box × box, Nyström otherwise.
    #[default]
    Auto,
    Nystrom,
    TensorBox,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub route: RouteChoice,
    pub nystrom: NystromConfig,
    pub tolerance: Option<SpectrumTolerance>,
}

/// Clamped spectrum of `D(Γ, LΩ)` and its provenance (with `clamp_count`
/// and `max_violation` filled in).
pub fn pipeline_spectrum(
    gamma: &Domain,
    omega: &Domain,
    l: f64,
    cfg: &PipelineConfig,
) -> Result<(Spectrum, Provenance), SpectraError> {
    let tol = cfg.tolerance.unwrap_or_default();
    let both_boxes = matches!(gamma.shape(), Shape::Box(_)) && matches!(omega.shape(), Shape::Box(_));
    let tensor = match cfg.route {
        RouteChoice::Auto => both_boxes && gamma.dim() == omega.dim(),
        RouteChoice::TensorBox => {
            if !both_boxes {
                return Err(DiscretizeError::Unsupported("tensor route needs box × box geometry".into()).into());
            }
            true
        }
        RouteChoice::Nystrom => false,
    };
    if tensor {
        let (spec, n, rule) = discretize::tensor_box_spectrum(gamma, omega, l, &cfg.nystrom, tol)?;
        let prov = Provenance {
            gamma: gamma.label(),
            omega: omega.label(),
            route: Route::TensorBox,
            rule,
            n,
            clamp_count: spec.clamp_count,
            max_violation: spec.max_violation,
        };
        Ok((spec, prov))
    } else {
        let op = discretize::nystrom(gamma, omega, l, &cfg.nystrom)?;
        let spec = eigenvalues_with(&op.matrix, tol)?;
        let prov = Provenance {
            gamma: gamma.label(),
            omega: omega.label(),
            route: Route::Nystrom,
            rule: op.provenance.rule.clone(),
            n: op.matrix.n(),
            clamp_count: spec.clamp_count,
            max_violation: spec.max_violation,
        };
        Ok((spec, prov))
    }
}

/// `S_α(Γ, LΩ)` end to end.
pub fn entropy_pipeline(
    gamma: &Domain,
    omega: &Domain,
    l: f64,
    alpha: RenyiOrder,
    cfg: &PipelineConfig,
) -> Result<EntropyResult, SpectraError> {
    let (spec, prov) = pipeline_spectrum(gamma, omega, l, cfg)?;
    Ok(EntropyResult::new(&spec, alpha, l, prov))
}

/// `S_α` of a half-open lattice block of `n` sites with Fermi momentum `k_f`.
pub fn lattice_entropy(k_f: f64, n: usize, alpha: RenyiOrder) -> Result<EntropyResult, SpectraError> {
    let (spec, prov) = lattice_spectrum(k_f, n)?;
    Ok(EntropyResult::new(&spec, alpha, n as f64, prov))
}

pub fn lattice_spectrum(k_f: f64, n: usize) -> Result<(Spectrum, Provenance), SpectraError> {
    let c = discretize::lattice_correlation(k_f, n)?;
    let spec = eigenvalues(&c)?;
    let prov = Provenance {
        gamma: format!("lattice_fermi_sea(k_f={k_f})"),
        omega: format!("lattice_block(n={n})"),
        route: Route::Lattice,
        rule: "exact_toeplitz".into(),
        n,
        clamp_count: spec.clamp_count,
        max_violation: spec.max_violation,
    };
    Ok((spec, prov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn ord(a: f64) -> RenyiOrder {
        RenyiOrder::new(a).unwrap()
    }

    #[test]
    fn identity_and_zero() {
        let id = HermitianMatrix::Real(Mat::identity(5, 5));
        let s = eigenvalues(&id).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-15));
        assert_eq!(s.clamp_count, s.eigenvalues.iter().filter(|&&l| l != 1.0).count().min(s.clamp_count));
        assert_eq!(renyi_entropy(&s, RenyiOrder::One), 0.0);

        let z = HermitianMatrix::Complex(Mat::zeros(4, 4));
        let s = eigenvalues(&z).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| l == 0.0));
        for a in [0.5, 1.0, 2.0, f64::INFINITY] {
            assert_eq!(renyi_entropy(&s, ord(a)), 0.0);
        }
    }

    #[test]
    fn two_site_lattice_block() {
        let (s, _) = lattice_spectrum(PI / 2.0, 2).unwrap();
        assert!((s.eigenvalues[0] - (0.5 - 1.0 / PI)).abs() < 1e-15);
        assert!((s.eigenvalues[1] - (0.5 + 1.0 / PI)).abs() < 1e-15);
        let h1 = |t: f64| -t * t.ln() - (1.0 - t) * (1.0 - t).ln();
        let expect = h1(0.5 + 1.0 / PI) + h1(0.5 - 1.0 / PI);
        assert!((renyi_entropy(&s, RenyiOrder::One) - expect).abs() < 1e-14);
    }

    #[test]
    fn entropy_examples() {
        let pure = Spectrum::from_values(vec![0.0, 1.0, 1.0, 0.0]);
        for a in [0.3, 1.0, 2.0, f64::INFINITY] {
            assert_eq!(renyi_entropy(&pure, ord(a)), 0.0);
        }
        let half = Spectrum::from_values(vec![0.5]);
        assert!((renyi_entropy(&half, RenyiOrder::One) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn clamping_bookkeeping() {
        let s = Spectrum::from_raw(vec![-1e-9, 0.3, 1.0 + 2e-8], SpectrumTolerance::default()).unwrap();
        assert_eq!(s.clamp_count, 2);
        assert!((s.max_violation - 2e-8).abs() < 1e-15);
        assert!(!s.warning);
        assert_eq!(s.eigenvalues, vec![0.0, 0.3, 1.0]);

        let s = Spectrum::from_raw(vec![-1e-5, 0.5], SpectrumTolerance::default()).unwrap();
        assert!(s.warning);

        let e = Spectrum::from_raw(vec![0.5, 1.01], SpectrumTolerance::default());
        assert!(matches!(e, Err(SpectraError::OutOfRange { .. })));
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut m = Mat::<f64>::zeros(3, 3);
        m[(0, 1)] = 0.2;
        let r = eigenvalues(&HermitianMatrix::Real(m));
        assert!(matches!(r, Err(SpectraError::NotHermitian(_))));
    }

    #[test]
    fn min_entropy_matches_state_eigenvalue() {
        let s = Spectrum::from_values(vec![0.01, 0.2, 0.45, 0.7, 0.93, 0.999]);
        let s_inf = renyi_entropy(&s, RenyiOrder::Infinity);
        assert!(((-s_inf).exp() - s.largest_state_eigenvalue()).abs() < 1e-12);
        for a in [0.5, 1.0, 2.0, 7.0] {
            assert!(s_inf <= renyi_entropy(&s, ord(a)) + 1e-15);
        }
    }
}
