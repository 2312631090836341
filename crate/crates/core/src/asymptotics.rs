//! Scaling sweeps, least-squares fits of `S_α(L)` and comparison with the
//! predicted coefficient `(1 + α)/(24 α) · J(∂Γ, ∂Ω)`.

use std::time::Instant;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functionals::{i_functional, renyi_prefactor, FunctionalError, RenyiOrder};
use crate::geometry::{mean_density, widom_j, Domain, GeometryError};
use crate::spectra::{lattice_spectrum, pipeline_spectrum, EntropyResult, PipelineConfig, SpectraError, Spectrum};

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error("fit needs at least {needed} points in the window, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("design matrix is rank deficient (condition number {0:e})")]
    RankDeficient(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("theory value is zero; no relative deviation defined")]
    ZeroTheory,
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
}

/// Default surface-quadrature resolution for `J` when no closed form exists.
pub const DEFAULT_J_RESOLUTION: usize = 256;

/// `I(h_α) · J(∂Γ, ∂Ω)`, the coefficient of `L^{d-1} ln L`.
pub fn predicted_prefactor(gamma: &Domain, omega: &Domain, alpha: RenyiOrder) -> Result<f64, AsymptoticsError> {
    let j = widom_j(gamma, omega, DEFAULT_J_RESOLUTION)?;
    Ok(renyi_prefactor(alpha) * j.value)
}

/// Coefficient of `ln n` for a block of a chain with one Fermi interval:
/// `J = 2 · 2`, so `(1 + α)/(6 α)`.
pub fn lattice_prefactor(alpha: RenyiOrder) -> f64 {
    4.0 * renyi_prefactor(alpha)
}

/// The two leading terms of `Tr f(D(Γ, LΩ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidomPrediction {
    /// `f(1) · (2π)^{-d} |Γ| |Ω| L^d`
    pub weyl_term: f64,
    /// `I(f) · J · L^{d-1} ln L`
    pub log_term: f64,
}

/// The function traced against `D`.
pub enum TraceFunction<'a> {
    Renyi(RenyiOrder),
    /// A function with `f(0) = 0` for which `I(f)` converges.
    Smooth(&'a dyn Fn(f64) -> f64),
}

pub fn widom_prediction(
    f: &TraceFunction<'_>,
    gamma: &Domain,
    omega: &Domain,
    l: f64,
) -> Result<WidomPrediction, AsymptoticsError> {
    let d = gamma.dim() as i32;
    let (f1, i_f) = match f {
        TraceFunction::Renyi(alpha) => (0.0, renyi_prefactor(*alpha)),
        TraceFunction::Smooth(g) => (g(1.0), i_functional(g, 1e-12)?.value),
    };
    let j = widom_j(gamma, omega, DEFAULT_J_RESOLUTION)?.value;
    Ok(WidomPrediction {
        weyl_term: f1 * mean_density(gamma) * omega.volume() * l.powi(d),
        log_term: i_f * j * l.powi(d - 1) * l.ln(),
    })
}

/// Where the spectra of a sweep come from.
#[derive(Debug, Clone)]
pub enum SweepSource {
    Continuum { gamma: Domain, omega: Domain, pipeline: PipelineConfig },
    /// Blocks of `L` successive sites; grid values must be integers.
    Lattice { k_f: f64 },
}

impl SweepSource {
    pub fn dim(&self) -> usize {
        match self {
            SweepSource::Continuum { omega, .. } => omega.dim(),
            SweepSource::Lattice { .. } => 1,
        }
    }

    fn spectrum(&self, l: f64) -> Result<(Spectrum, crate::spectra::Provenance), SpectraError> {
        match self {
            SweepSource::Continuum { gamma, omega, pipeline } => pipeline_spectrum(gamma, omega, l, pipeline),
            SweepSource::Lattice { k_f } => lattice_spectrum(*k_f, l as usize),
        }
    }
}

/// Everything measured at one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub l: f64,
    pub n: usize,
    /// `Tr D = Σ λ_i`
    pub particle_number: f64,
    pub entropies: Vec<EntropyResult>,
    pub wall_time_s: f64,
}

/// A sweep that stopped early, with the rows that did complete.
#[derive(Debug, Error)]
#[error("sweep failed at L = {failed_at}: {source}")]
pub struct SweepError {
    pub completed: Vec<SweepRow>,
    pub failed_at: f64,
    #[source]
    pub source: SpectraError,
}

pub fn validate_grid(grid: &[f64], integer: bool) -> Result<(), AsymptoticsError> {
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(AsymptoticsError::InvalidGrid(format!("grid must be strictly increasing ({} then {})", w[0], w[1])));
        }
    }
    for &l in grid {
        if !(l > 0.0 && l.is_finite()) {
            return Err(AsymptoticsError::InvalidGrid(format!("grid values must be positive, got {l}")));
        }
        if integer && l.fract() != 0.0 {
            return Err(AsymptoticsError::InvalidGrid(format!("lattice block lengths must be integers, got {l}")));
        }
    }
    Ok(())
}

/// `count` points from `lo` to `hi` with constant ratio; rounded to distinct
/// integers when `integer` is set.
pub fn geometric_grid(lo: f64, hi: f64, count: usize, integer: bool) -> Vec<f64> {
    let mut g: Vec<f64> = match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let r = (hi / lo).ln() / (count - 1) as f64;
            (0..count).map(|k| lo * (r * k as f64).exp()).collect()
        }
    };
    if let Some(last) = g.last_mut() {
        if count > 1 {
            *last = hi;
        }
    }
    if integer {
        g.iter_mut().for_each(|x| *x = x.round());
        g.dedup();
    }
    g
}

/// Computes each spectrum once and every requested order on it. Rows come
/// back ordered by `L`; `on_row` sees each row as soon as it is finished.
pub fn sweep_rows(
    source: &SweepSource,
    alphas: &[RenyiOrder],
    grid: &[f64],
    parallel: bool,
    on_row: &(dyn Fn(&SweepRow) + Sync),
) -> Result<Vec<SweepRow>, SweepError> {
    let point = |&l: &f64| -> Result<SweepRow, SpectraError> {
        let start = Instant::now();
        let (spec, prov) = source.spectrum(l)?;
        let entropies = alphas
            .iter()
            .map(|&a| EntropyResult::new(&spec, a, l, prov.clone()))
            .collect();
        let row = SweepRow {
            l,
            n: prov.n,
            particle_number: spec.trace(),
            entropies,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        on_row(&row);
        Ok(row)
    };
    let results: Vec<Result<SweepRow, SpectraError>> = if parallel {
        grid.par_iter().map(point).collect()
    } else {
        // Stop at the first failure.
        let mut out = Vec::with_capacity(grid.len());
        for l in grid {
            let r = point(l);
            let failed = r.is_err();
            out.push(r);
            if failed {
                break;
            }
        }
        out
    };
    let mut completed = Vec::with_capacity(results.len());
    let mut failure = None;
    for (r, &l) in results.into_iter().zip(grid) {
        match r {
            Ok(row) => completed.push(row),
            Err(e) if failure.is_none() => failure = Some((l, e)),
            Err(_) => {}
        }
    }
    match failure {
        None => Ok(completed),
        Some((failed_at, source)) => Err(SweepError { completed, failed_at, source }),
    }
}

/// Entropies of one order over an `L` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub gamma: String,
    pub omega: String,
    pub d: usize,
    pub alpha: RenyiOrder,
    pub results: Vec<EntropyResult>,
}

impl SweepResult {
    /// Extracts order `alpha` from rows computed by [`sweep_rows`].
    pub fn from_rows(rows: &[SweepRow], d: usize, alpha: RenyiOrder) -> Self {
        let results: Vec<EntropyResult> = rows
            .iter()
            .filter_map(|r| r.entropies.iter().find(|e| e.alpha == alpha).cloned())
            .collect();
        let (gamma, omega) = results
            .first()
            .map(|e| (e.provenance.gamma.clone(), e.provenance.omega.clone()))
            .unwrap_or_default();
        SweepResult { gamma, omega, d, alpha, results }
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.results.iter().map(|e| (e.l, e.s)).collect()
    }

    /// `(L, S)` and `(ln L, S / L^{d-1})` series for plotting.
    pub fn plot_series(&self) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        let p = self.d as i32 - 1;
        let raw = self.points();
        let reduced = raw.iter().map(|&(l, s)| (l.ln(), s / l.powi(p))).collect();
        (raw, reduced)
    }
}

/// `S_α(Γ, LΩ)` on every `L` in `grid`.
pub fn sweep(
    gamma: &Domain,
    omega: &Domain,
    alpha: RenyiOrder,
    grid: &[f64],
    cfg: &PipelineConfig,
    parallel: bool,
) -> Result<SweepResult, SweepError> {
    let source = SweepSource::Continuum { gamma: gamma.clone(), omega: omega.clone(), pipeline: cfg.clone() };
    let rows = sweep_rows(&source, &[alpha], grid, parallel, &|_| {})?;
    let mut res = SweepResult::from_rows(&rows, omega.dim(), alpha);
    res.gamma = gamma.label();
    res.omega = omega.label();
    Ok(res)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWeighting {
    #[default]
    Unit,
    /// Weights `1 / L^{d-1}`.
    InverseArea,
}

/// Least-squares fit of `S(L) ≈ a · L^{d-1} ln L + b · L^{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub d: usize,
    pub terms: Vec<String>,
    /// Coefficient of the log-enhanced term.
    pub a: f64,
    /// Coefficient of the area term (the intercept when `d = 1`).
    pub b: f64,
    pub stderr_a: f64,
    pub stderr_b: f64,
    pub window: [f64; 2],
    pub points_used: usize,
    /// Weighted residual 2-norm.
    pub residual_norm: f64,
    /// Condition number of the column-normalized weighted design matrix.
    pub condition_number: f64,
    pub weighting: FitWeighting,
}

pub const MIN_FIT_POINTS: usize = 4;

pub fn fit_scaling(sweep: &SweepResult, window: [f64; 2], weighting: FitWeighting) -> Result<ScalingFit, AsymptoticsError> {
    fit_points(&sweep.points(), sweep.d, window, weighting)
}

/// [`fit_scaling`] on raw `(L, S)` pairs.
pub fn fit_points(points: &[(f64, f64)], d: usize, window: [f64; 2], weighting: FitWeighting) -> Result<ScalingFit, AsymptoticsError> {
    let sel: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(l, _)| l >= window[0] && l <= window[1])
        .collect();
    if sel.len() < MIN_FIT_POINTS {
        return Err(AsymptoticsError::TooFewPoints { needed: MIN_FIT_POINTS, found: sel.len() });
    }
    let p = d as i32 - 1;
    let rows: Vec<([f64; 2], f64, f64)> = sel
        .iter()
        .map(|&(l, s)| {
            let area = l.powi(p);
            let w = match weighting {
                FitWeighting::Unit => 1.0,
                FitWeighting::InverseArea => 1.0 / area,
            };
            ([area * l.ln(), area], s, w.sqrt())
        })
        .collect();
    let (beta, se, resid, cond) = weighted_least_squares(&rows)?;
    let terms = if d == 1 {
        vec!["ln L".to_string(), "1".to_string()]
    } else {
        vec![format!("L^{p} ln L"), format!("L^{p}")]
    };
    Ok(ScalingFit {
        d,
        terms,
        a: beta[0],
        b: beta[1],
        stderr_a: se[0],
        stderr_b: se[1],
        window,
        points_used: sel.len(),
        residual_norm: resid,
        condition_number: cond,
        weighting,
    })
}

/// Two-column weighted least squares by thin SVD on normalized columns.
/// Rows are `(x, y, √w)`. Returns coefficients, standard errors, weighted
/// residual norm and condition number.
fn weighted_least_squares(rows: &[([f64; 2], f64, f64)]) -> Result<([f64; 2], [f64; 2], f64, f64), AsymptoticsError> {
    let m = rows.len();
    let mut scale = [0.0f64; 2];
    for (x, _, sw) in rows {
        for k in 0..2 {
            scale[k] += (sw * x[k]).powi(2);
        }
    }
    let scale = scale.map(|s| if s > 0.0 { s.sqrt() } else { 1.0 });
    let a = Mat::from_fn(m, 2, |i, k| rows[i].2 * rows[i].0[k] / scale[k]);
    let y: Vec<f64> = rows.iter().map(|(_, y, sw)| sw * y).collect();
    let svd = a.thin_svd().map_err(|e| AsymptoticsError::LinearAlgebra(format!("{e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let smax = s[0].max(s[1]);
    let smin = s[0].min(s[1]);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond < 1e12) {
        return Err(AsymptoticsError::RankDeficient(cond));
    }
    // z = Σ⁻¹ Uᵀ y, β_scaled = V z.
    let mut z = [0.0; 2];
    for k in 0..2 {
        z[k] = (0..m).map(|i| u[(i, k)] * y[i]).sum::<f64>() / s[k];
    }
    let mut beta = [0.0; 2];
    for j in 0..2 {
        beta[j] = (0..2).map(|k| v[(j, k)] * z[k]).sum::<f64>() / scale[j];
    }
    let resid2: f64 = rows
        .iter()
        .map(|(x, yv, sw)| (sw * (yv - x[0] * beta[0] - x[1] * beta[1])).powi(2))
        .sum();
    let sigma2 = resid2 / (m - 2) as f64;
    // Cov(β_scaled) = σ² V Σ⁻² Vᵀ.
    let mut se = [0.0; 2];
    for j in 0..2 {
        let var: f64 = (0..2).map(|k| (v[(j, k)] / s[k]).powi(2)).sum::<f64>() * sigma2;
        se[j] = var.sqrt() / scale[j];
    }
    Ok((beta, se, resid2.sqrt(), cond))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryComparison {
    pub theory: f64,
    pub fitted: f64,
    pub rel_dev: f64,
}

pub fn compare_with(fit: &ScalingFit, theory: f64) -> Result<TheoryComparison, AsymptoticsError> {
    if theory == 0.0 {
        return Err(AsymptoticsError::ZeroTheory);
    }
    Ok(TheoryComparison { theory, fitted: fit.a, rel_dev: (fit.a - theory).abs() / theory.abs() })
}

/// Fitted log coefficient against `(1 + α)/(24 α) · J(∂Γ, ∂Ω)`.
pub fn compare_theory(
    fit: &ScalingFit,
    gamma: &Domain,
    omega: &Domain,
    alpha: RenyiOrder,
) -> Result<TheoryComparison, AsymptoticsError> {
    if gamma.dim() != fit.d || omega.dim() != fit.d {
        return Err(GeometryError::DimensionMismatch(gamma.dim(), fit.d).into());
    }
    compare_with(fit, predicted_prefactor(gamma, omega, alpha)?)
}

/// One-parameter fit `N(L) ≈ c · L^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylFit {
    pub c: f64,
    pub stderr: f64,
}

pub fn fit_weyl(points: &[(f64, f64)], d: usize) -> Result<WeylFit, AsymptoticsError> {
    if points.len() < 2 {
        return Err(AsymptoticsError::TooFewPoints { needed: 2, found: points.len() });
    }
    let xs: Vec<f64> = points.iter().map(|&(l, _)| l.powi(d as i32)).collect();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let c = xs.iter().zip(points).map(|(x, &(_, y))| x * y).sum::<f64>() / sxx;
    let rss: f64 = xs.iter().zip(points).map(|(x, &(_, y))| (y - c * x).powi(2)).sum();
    let stderr = (rss / (points.len() - 1) as f64 / sxx).sqrt();
    Ok(WeylFit { c, stderr })
}
