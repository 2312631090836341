//! Finite Hermitian matrices for the localized Fermi projection
//! `D(Γ, LΩ) = χ_{LΩ}(Q) χ_Γ(P) χ_{LΩ}(Q)`.
//!
//! * Nyström: `A_jk = √(w_j w_k) K_Γ(q_j, q_k)` on a quadrature of `LΩ`.
//! * Lattice: the exact Toeplitz sine-kernel block of a half-filled chain.
//! * Tensor: box × box spectra as products of one-dimensional spectra.
//!
//! Position space is scaled (nodes live in `LΩ`) so kernels keep their
//! closed forms; by unitary dilatation this is the same as scaling `Γ`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, GeometryError, Interval, Shape};
use crate::kernels::{FermiKernel, Kernel, KernelError};
use crate::quadrature::{composite_from_reference, gauss_legendre, panel_count, Rule1d};
use crate::spectra::{self, HermitianMatrix, HermitianOperator, SpectraError, Spectrum, SpectrumTolerance};

#[derive(Debug, Error)]
pub enum DiscretizeError {
    #[error("node budget exceeded: {needed} nodes requested, cap is {cap}")]
    BudgetExceeded { needed: usize, cap: usize },
    #[error("node spacing {spacing} is not below π/(2 p_max) = {limit}; raise nodes_per_unit")]
    Nyquist { spacing: f64, limit: f64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("malformed operator file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What to do when the node spacing does not resolve the Fermi wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NyquistPolicy {
    #[default]
    Reject,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NystromConfig {
    /// Explicit node density; overrides `nodes_per_wavelength` when set.
    pub nodes_per_unit: Option<f64>,
    /// Nodes per Fermi wavelength `2π / p_max`.
    pub nodes_per_wavelength: f64,
    /// Gauss–Legendre nodes per panel.
    pub panel_order: usize,
    pub nyquist: NyquistPolicy,
    /// Largest matrix dimension assembled.
    pub max_nodes: usize,
    /// Largest product spectrum built on the tensor route.
    pub max_tensor_eigenvalues: usize,
}

impl Default for NystromConfig {
    fn default() -> Self {
        NystromConfig {
            nodes_per_unit: None,
            nodes_per_wavelength: 8.0,
            panel_order: 16,
            nyquist: NyquistPolicy::Reject,
            max_nodes: 6000,
            max_tensor_eigenvalues: 50_000_000,
        }
    }
}

impl NystromConfig {
    /// Node density for a Fermi sea whose largest momentum is `p_max`.
    pub fn resolve_nodes_per_unit(&self, p_max: f64) -> f64 {
        self.nodes_per_unit
            .unwrap_or(self.nodes_per_wavelength * p_max / (2.0 * PI))
    }

    fn validate(&self) -> Result<(), DiscretizeError> {
        if let Some(npu) = self.nodes_per_unit {
            if !(npu > 0.0 && npu.is_finite()) {
                return Err(DiscretizeError::Invalid(format!("nodes_per_unit must be positive, got {npu}")));
            }
        }
        if !(self.nodes_per_wavelength > 0.0 && self.nodes_per_wavelength.is_finite()) {
            return Err(DiscretizeError::Invalid("nodes_per_wavelength must be positive".into()));
        }
        if self.panel_order == 0 || self.panel_order > 64 {
            return Err(DiscretizeError::Invalid("panel_order must lie in 1..=64".into()));
        }
        Ok(())
    }

    /// Applies the Nyquist guard, returning whether it passed.
    fn check_nyquist(&self, npu: f64, p_max: f64) -> Result<bool, DiscretizeError> {
        let spacing = 1.0 / npu;
        let limit = PI / (2.0 * p_max);
        if spacing < limit {
            return Ok(true);
        }
        match self.nyquist {
            NyquistPolicy::Reject => Err(DiscretizeError::Nyquist { spacing, limit }),
            NyquistPolicy::Warn => Ok(false),
        }
    }
}

/// Quadrature nodes (row-major, `dim` coordinates each) with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorProvenance {
    pub gamma: String,
    pub omega: String,
    pub l: f64,
    pub rule: String,
    pub n: usize,
    pub nodes_per_unit: f64,
    pub nyquist_ok: bool,
}

/// A Nyström matrix for `D(Γ, LΩ)`.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    pub matrix: HermitianMatrix,
    pub nodes: NodeSet,
    pub provenance: OperatorProvenance,
}

impl HermitianOperator for DiscretizedOperator {
    fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }
}

/// Quadrature of `omega` with roughly `npu` nodes per unit length along
/// each direction. Returns the nodes and a rule label.
pub fn omega_nodes(omega: &Domain, npu: f64, order: usize) -> (NodeSet, String) {
    let (x, w) = gauss_legendre(order);
    let line = |lo: f64, hi: f64| composite_from_reference(lo, hi, panel_count(hi - lo, npu, order), &x, &w);
    match omega.shape() {
        Shape::IntervalUnion(iv) => {
            let mut set = NodeSet { dim: 1, points: Vec::new(), weights: Vec::new() };
            for i in iv {
                let r = line(i.lo, i.hi);
                set.points.extend(r.nodes);
                set.weights.extend(r.weights);
            }
            (set, format!("composite_gauss_legendre(order={order})"))
        }
        Shape::Box(axes) => {
            let rules: Vec<Rule1d> = axes.iter().map(|a| line(a.lo, a.hi)).collect();
            (tensor_grid(&rules), format!("tensor_composite_gauss_legendre(order={order})"))
        }
        Shape::Ball { center, radius } => match center.len() {
            1 => {
                let r = line(center[0] - radius, center[0] + radius);
                (NodeSet { dim: 1, points: r.nodes, weights: r.weights }, format!("composite_gauss_legendre(order={order})"))
            }
            2 => (polar_grid(center, *radius, npu, &line), format!("polar_gauss(order={order})")),
            _ => (spherical_grid(center, *radius, npu, order, &line), format!("spherical_gauss(order={order})")),
        },
        Shape::ConvexPolygon(v) => (polygon_grid(v, &line), format!("fan_duffy_gauss(order={order})")),
    }
}

fn tensor_grid(rules: &[Rule1d]) -> NodeSet {
    let dim = rules.len();
    let n: usize = rules.iter().map(Rule1d::len).product();
    let mut points = Vec::with_capacity(n * dim);
    let mut weights = Vec::with_capacity(n);
    let mut idx = vec![0usize; dim];
    for _ in 0..n {
        let mut w = 1.0;
        for (k, r) in rules.iter().enumerate() {
            points.push(r.nodes[idx[k]]);
            w *= r.weights[idx[k]];
        }
        weights.push(w);
        // Last axis fastest.
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < rules[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    NodeSet { dim, points, weights }
}

/// Angular node count giving about `npu` nodes per unit arc length on the rim.
fn angular_count(circumference: f64, npu: f64) -> usize {
    ((circumference * npu).ceil() as usize).max(16)
}

fn polar_grid(center: &[f64], radius: f64, npu: f64, line: &dyn Fn(f64, f64) -> Rule1d) -> NodeSet {
    let rad = line(0.0, radius);
    let nt = angular_count(2.0 * PI * radius, npu);
    let wt = 2.0 * PI / nt as f64;
    let mut set = NodeSet { dim: 2, points: Vec::new(), weights: Vec::new() };
    for (&r, &wr) in rad.nodes.iter().zip(&rad.weights) {
        for k in 0..nt {
            let (s, c) = (wt * k as f64).sin_cos();
            set.points.extend([center[0] + r * c, center[1] + r * s]);
            set.weights.push(r * wr * wt);
        }
    }
    set
}

fn spherical_grid(center: &[f64], radius: f64, npu: f64, order: usize, line: &dyn Fn(f64, f64) -> Rule1d) -> NodeSet {
    let rad = line(0.0, radius);
    let (x, w) = gauss_legendre(order);
    let polar = composite_from_reference(-1.0, 1.0, panel_count(PI * radius, npu, order), &x, &w);
    let nphi = angular_count(2.0 * PI * radius, npu);
    let wphi = 2.0 * PI / nphi as f64;
    let mut set = NodeSet { dim: 3, points: Vec::new(), weights: Vec::new() };
    for (&r, &wr) in rad.nodes.iter().zip(&rad.weights) {
        for (&z, &wz) in polar.nodes.iter().zip(&polar.weights) {
            let rho = (1.0 - z * z).max(0.0).sqrt();
            for k in 0..nphi {
                let (s, c) = (wphi * k as f64).sin_cos();
                set.points
                    .extend([center[0] + r * rho * c, center[1] + r * rho * s, center[2] + r * z]);
                set.weights.push(r * r * wr * wz * wphi);
            }
        }
    }
    set
}

/// Fan triangulation from the first vertex; each triangle `(a, b, c)` is
/// the image of the unit square under `x = a + u((b - a) + v(c - b))`.
fn polygon_grid(v: &[[f64; 2]], line: &dyn Fn(f64, f64) -> Rule1d) -> NodeSet {
    let dist = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
    let a = v[0];
    let mut set = NodeSet { dim: 2, points: Vec::new(), weights: Vec::new() };
    for i in 1..v.len() - 1 {
        let (b, c) = (v[i], v[i + 1]);
        let len_u = dist(a, b).max(dist(a, c));
        let ru = line(0.0, len_u);
        let rv = line(0.0, dist(b, c));
        let len_v = dist(b, c);
        let det = ((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])).abs();
        for (&su, &wu) in ru.nodes.iter().zip(&ru.weights) {
            let u = su / len_u;
            for (&sv, &wv) in rv.nodes.iter().zip(&rv.weights) {
                let t = sv / len_v;
                let x = a[0] + u * ((b[0] - a[0]) + t * (c[0] - b[0]));
                let y = a[1] + u * ((b[1] - a[1]) + t * (c[1] - b[1]));
                set.points.extend([x, y]);
                set.weights.push(u * det * (wu / len_u) * (wv / len_v));
            }
        }
    }
    set
}

/// Assembles `√(w_j w_k) K(q_j, q_k)`, filling the lower triangle in parallel
/// and mirroring, so the result is Hermitian to the last bit.
pub fn assemble<K: Kernel + ?Sized>(kernel: &K, nodes: &NodeSet) -> HermitianMatrix {
    let n = nodes.len();
    let sw: Vec<f64> = nodes.weights.iter().map(|w| w.sqrt()).collect();
    let column = |j: usize| -> Vec<Complex64> {
        (j..n)
            .map(|i| {
                let v = kernel.eval(nodes.point(i), nodes.point(j)) * (sw[i] * sw[j]);
                if i == j {
                    Complex64::new(v.re, 0.0)
                } else {
                    v
                }
            })
            .collect()
    };
    let cols: Vec<Vec<Complex64>> = (0..n).into_par_iter().map(column).collect();
    if kernel.is_real() {
        let mut m = Mat::<f64>::zeros(n, n);
        for (j, col) in cols.iter().enumerate() {
            for (off, v) in col.iter().enumerate() {
                m[(j + off, j)] = v.re;
                m[(j, j + off)] = v.re;
            }
        }
        HermitianMatrix::Real(m)
    } else {
        let mut m = Mat::<Complex64>::zeros(n, n);
        for (j, col) in cols.iter().enumerate() {
            for (off, v) in col.iter().enumerate() {
                m[(j + off, j)] = *v;
                m[(j, j + off)] = v.conj();
            }
        }
        HermitianMatrix::Complex(m)
    }
}

/// Nyström matrix of `D(Γ, LΩ)`.
pub fn nystrom(gamma: &Domain, omega: &Domain, l: f64, cfg: &NystromConfig) -> Result<DiscretizedOperator, DiscretizeError> {
    let kernel = FermiKernel::new(gamma)?;
    nystrom_with_kernel(&kernel, &gamma.label(), gamma.max_norm(), omega, l, cfg)
}

/// Nyström discretization with an arbitrary kernel whose spectral support
/// has radius `p_max`.
pub fn nystrom_with_kernel<K: Kernel + ?Sized>(
    kernel: &K,
    kernel_label: &str,
    p_max: f64,
    omega: &Domain,
    l: f64,
    cfg: &NystromConfig,
) -> Result<DiscretizedOperator, DiscretizeError> {
    cfg.validate()?;
    if kernel.dim() != omega.dim() {
        return Err(GeometryError::DimensionMismatch(kernel.dim(), omega.dim()).into());
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(DiscretizeError::Invalid(format!("scale L must be positive, got {l}")));
    }
    let npu = cfg.resolve_nodes_per_unit(p_max);
    let nyquist_ok = cfg.check_nyquist(npu, p_max)?;
    let scaled = omega.scaled(l)?;
    let needed = estimate_node_count(&scaled, npu, cfg.panel_order);
    if needed > cfg.max_nodes {
        return Err(DiscretizeError::BudgetExceeded { needed, cap: cfg.max_nodes });
    }
    let (nodes, rule) = omega_nodes(&scaled, npu, cfg.panel_order);
    debug_assert_eq!(nodes.len(), needed);
    let matrix = assemble(kernel, &nodes);
    Ok(DiscretizedOperator {
        provenance: OperatorProvenance {
            gamma: kernel_label.to_string(),
            omega: omega.label(),
            l,
            rule: format!("{rule},npu={npu}"),
            n: nodes.len(),
            nodes_per_unit: npu,
            nyquist_ok,
        },
        matrix,
        nodes,
    })
}

/// Node count [`omega_nodes`] would produce, without building the nodes.
pub fn estimate_node_count(omega: &Domain, npu: f64, order: usize) -> usize {
    let line = |len: f64| panel_count(len, npu, order) * order;
    match omega.shape() {
        Shape::IntervalUnion(iv) => iv.iter().map(|i| line(i.len())).sum(),
        Shape::Box(axes) => axes.iter().map(|a| line(a.len())).product(),
        Shape::Ball { center, radius } => {
            let circ = angular_count(2.0 * PI * radius, npu);
            match center.len() {
                1 => line(2.0 * radius),
                2 => line(*radius) * circ,
                _ => line(*radius) * line(PI * radius) * circ,
            }
        }
        Shape::ConvexPolygon(v) => {
            let dist = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
            (1..v.len() - 1)
                .map(|i| line(dist(v[0], v[i]).max(dist(v[0], v[i + 1]))) * line(dist(v[i], v[i + 1])))
                .sum()
        }
    }
}

/// Spectrum of `D(Γ, LΩ)` for box × box as the product of per-axis
/// one-dimensional spectra. Returns the spectrum, the largest factor size
/// and a rule label.
pub fn tensor_box_spectrum(
    gamma: &Domain,
    omega: &Domain,
    l: f64,
    cfg: &NystromConfig,
    tol: SpectrumTolerance,
) -> Result<(Spectrum, usize, String), SpectraError> {
    let (Shape::Box(g_axes), Shape::Box(o_axes)) = (gamma.shape(), omega.shape()) else {
        return Err(DiscretizeError::Unsupported("tensor route needs box × box geometry".into()).into());
    };
    if g_axes.len() != o_axes.len() {
        return Err(DiscretizeError::Geometry(GeometryError::DimensionMismatch(g_axes.len(), o_axes.len())).into());
    }
    let npu = cfg.resolve_nodes_per_unit(gamma.max_norm());
    let mut axis_cfg = cfg.clone();
    axis_cfg.nodes_per_unit = Some(npu);

    let mut sizes = 1usize;
    for o in o_axes {
        let needed = panel_count(l * o.len(), npu, cfg.panel_order) * cfg.panel_order;
        sizes = sizes.saturating_mul(needed);
    }
    if sizes > cfg.max_tensor_eigenvalues {
        return Err(DiscretizeError::BudgetExceeded { needed: sizes, cap: cfg.max_tensor_eigenvalues }.into());
    }

    let mut cache: Vec<((Interval, Interval), Spectrum)> = Vec::new();
    let mut factors = Vec::with_capacity(o_axes.len());
    let mut largest = 0;
    for (g, o) in g_axes.iter().zip(o_axes) {
        let key = (*g, *o);
        let spec = match cache.iter().find(|(k, _)| *k == key) {
            Some((_, s)) => s.clone(),
            None => {
                let g1 = Domain::interval(g.lo, g.hi).map_err(DiscretizeError::from)?;
                let o1 = Domain::interval(o.lo, o.hi).map_err(DiscretizeError::from)?;
                let op = nystrom_axis(&g1, &o1, l, npu, &axis_cfg, gamma.max_norm())?;
                let s = spectra::eigenvalues_with(&op.matrix, tol)?;
                cache.push((key, s.clone()));
                s
            }
        };
        largest = largest.max(spec.len());
        factors.push(spec);
    }
    let mut it = factors.into_iter();
    let first = it.next().expect("at least one axis");
    let spec = it.fold(first, |acc, s| tensor_spectrum(&acc, &s));
    Ok((spec, largest, format!("tensor_composite_gauss_legendre(order={}),npu={npu}", cfg.panel_order)))
}

/// One-dimensional factor of the tensor route. The Nyquist guard is applied
/// against the full Fermi sea so the factors share the direct grid.
fn nystrom_axis(
    gamma: &Domain,
    omega: &Domain,
    l: f64,
    npu: f64,
    cfg: &NystromConfig,
    p_max: f64,
) -> Result<DiscretizedOperator, DiscretizeError> {
    let kernel = FermiKernel::new(gamma)?;
    let mut c = cfg.clone();
    c.nodes_per_unit = Some(npu);
    nystrom_with_kernel(&kernel, &gamma.label(), p_max, omega, l, &c)
}

/// The multiset `{λ_i μ_j}`, ascending.
pub fn tensor_spectrum(a: &Spectrum, b: &Spectrum) -> Spectrum {
    let mut ev = Vec::with_capacity(a.len() * b.len());
    for &x in &a.eigenvalues {
        for &y in &b.eigenvalues {
            ev.push(x * y);
        }
    }
    ev.par_sort_unstable_by(f64::total_cmp);
    Spectrum {
        eigenvalues: ev,
        clamp_count: a.clamp_count + b.clamp_count,
        max_violation: a.max_violation.max(b.max_violation),
        warning: a.warning || b.warning,
    }
}

/// Largest lattice block handled by the dense route.
pub const LATTICE_MAX_SITES: usize = 4000;

/// Correlation matrix of `n` successive sites of an infinite chain with Fermi
/// momentum `k_f`: `C_jk = sin(k_f (j - k)) / (π (j - k))`.
#[derive(Debug, Clone)]
pub struct LatticeCorrelation {
    pub k_f: f64,
    pub n: usize,
    pub matrix: HermitianMatrix,
}

impl HermitianOperator for LatticeCorrelation {
    fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }
}

pub fn lattice_correlation(k_f: f64, n: usize) -> Result<LatticeCorrelation, DiscretizeError> {
    if !(k_f > 0.0 && k_f < PI) {
        return Err(DiscretizeError::Invalid(format!("k_F must lie in (0, π), got {k_f}")));
    }
    if n == 0 {
        return Err(DiscretizeError::Invalid("block length must be at least 1".into()));
    }
    if n > LATTICE_MAX_SITES {
        return Err(DiscretizeError::BudgetExceeded { needed: n, cap: LATTICE_MAX_SITES });
    }
    let row: Vec<f64> = (0..n)
        .map(|m| if m == 0 { k_f / PI } else { (k_f * m as f64).sin() / (PI * m as f64) })
        .collect();
    let m = Mat::from_fn(n, n, |i, j| row[i.abs_diff(j)]);
    Ok(LatticeCorrelation { k_f, n, matrix: HermitianMatrix::Real(m) })
}

/// Correlation matrix of a ring of `sites` sites with the plane waves
/// `e^{2πi m j / sites}`, `m ∈ occupied`, filled.
pub fn ring_correlation(sites: usize, occupied: &[i64]) -> HermitianMatrix {
    let n = sites as f64;
    let table: Vec<Complex64> = (0..sites)
        .map(|delta| {
            occupied
                .iter()
                .map(|&m| {
                    let phase = 2.0 * PI * ((m * delta as i64).rem_euclid(sites as i64)) as f64 / n;
                    Complex64::from_polar(1.0, phase)
                })
                .sum::<Complex64>()
                / n
        })
        .collect();
    let m = Mat::from_fn(sites, sites, |i, j| {
        if i >= j {
            let v = table[i - j];
            if i == j {
                Complex64::new(v.re, 0.0)
            } else {
                v
            }
        } else {
            table[j - i].conj()
        }
    });
    HermitianMatrix::Complex(m)
}

/// Half filling with the contiguous momenta `0..sites/2`.
pub fn half_filled_ring(sites: usize) -> HermitianMatrix {
    let occ: Vec<i64> = (0..(sites / 2) as i64).collect();
    ring_correlation(sites, &occ)
}

/// The submatrix on rows and columns `indices`.
pub fn principal_submatrix(m: &HermitianMatrix, indices: &[usize]) -> HermitianMatrix {
    let k = indices.len();
    match m {
        HermitianMatrix::Real(a) => HermitianMatrix::Real(Mat::from_fn(k, k, |i, j| a[(indices[i], indices[j])])),
        HermitianMatrix::Complex(a) => {
            HermitianMatrix::Complex(Mat::from_fn(k, k, |i, j| a[(indices[i], indices[j])]))
        }
    }
}

/// A uniformly oriented orthogonal projection of rank `rank` on `ℝ^dim`.
pub fn random_projection<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Mat<f64> {
    assert!(rank <= dim, "rank exceeds dimension");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rank);
    while basis.len() < rank {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Two passes of modified Gram–Schmidt.
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    Mat::from_fn(dim, dim, |i, j| basis.iter().map(|b| b[i] * b[j]).sum())
}

/// `(M + Mᵀ) / 2` as a real Hermitian matrix.
pub fn symmetrized(m: &Mat<f64>) -> HermitianMatrix {
    HermitianMatrix::Real(Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
}

/// `Σ_i [λ_i (1 - λ_i)]^γ` over a clamped spectrum.
pub fn trace_power(spec: &Spectrum, gamma_exponent: f64) -> f64 {
    spec.eigenvalues
        .iter()
        .map(|&l| (l * (1.0 - l)).max(0.0).powf(gamma_exponent))
        .sum()
}

/// [`trace_power`] of an operator's spectrum, `γ ∈ (0, 1]`.
pub fn trace_power_diagnostic<O: HermitianOperator + ?Sized>(op: &O, gamma_exponent: f64) -> Result<f64, SpectraError> {
    if !(gamma_exponent > 0.0 && gamma_exponent <= 1.0) {
        return Err(DiscretizeError::Invalid(format!("exponent must lie in (0, 1], got {gamma_exponent}")).into());
    }
    Ok(trace_power(&spectra::eigenvalues(op)?, gamma_exponent))
}

const DUMP_MAGIC: &str = "fermi-ee-operator 1";

impl DiscretizedOperator {
    /// Plain-text dump:
    ///
    /// ```text
    /// fermi-ee-operator 1
    /// n <n>
    /// d <d>
    /// field real|complex
    /// provenance <one-line JSON>
    /// nodes
    /// <q_1 .. q_d w>            (n lines)
    /// matrix
    /// <row entries>             (n lines; complex entries as "re im")
    /// ```
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<(), DiscretizeError> {
        let n = self.matrix.n();
        writeln!(w, "{DUMP_MAGIC}")?;
        writeln!(w, "n {n}")?;
        writeln!(w, "d {}", self.nodes.dim)?;
        writeln!(w, "field {}", if self.matrix.is_real() { "real" } else { "complex" })?;
        let prov = serde_json::to_string(&self.provenance).map_err(|e| DiscretizeError::Format(e.to_string()))?;
        writeln!(w, "provenance {prov}")?;
        writeln!(w, "nodes")?;
        for i in 0..n {
            let mut line: Vec<String> = self.nodes.point(i).iter().map(f64::to_string).collect();
            line.push(self.nodes.weights[i].to_string());
            writeln!(w, "{}", line.join(" "))?;
        }
        writeln!(w, "matrix")?;
        for i in 0..n {
            let row: Vec<String> = match &self.matrix {
                HermitianMatrix::Real(m) => (0..n).map(|j| m[(i, j)].to_string()).collect(),
                HermitianMatrix::Complex(m) => (0..n).map(|j| format!("{} {}", m[(i, j)].re, m[(i, j)].im)).collect(),
            };
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, DiscretizeError> {
        let bad = |m: &str| DiscretizeError::Format(m.to_string());
        let mut lines = r.lines();
        let mut next = || -> Result<String, DiscretizeError> {
            lines.next().ok_or_else(|| bad("unexpected end of file"))?.map_err(DiscretizeError::from)
        };
        if next()? != DUMP_MAGIC {
            return Err(bad("missing header"));
        }
        let field = |line: String, key: &str| -> Result<String, DiscretizeError> {
            line.strip_prefix(key)
                .and_then(|s| s.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(&format!("expected `{key}`")))
        };
        let n: usize = field(next()?, "n")?.parse().map_err(|_| bad("bad n"))?;
        let d: usize = field(next()?, "d")?.parse().map_err(|_| bad("bad d"))?;
        let real = match field(next()?, "field")?.as_str() {
            "real" => true,
            "complex" => false,
            _ => return Err(bad("bad field")),
        };
        let provenance: OperatorProvenance =
            serde_json::from_str(&field(next()?, "provenance")?).map_err(|e| bad(&e.to_string()))?;
        let parse_row = |line: String, len: usize| -> Result<Vec<f64>, DiscretizeError> {
            let v: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| bad("bad number"))?;
            if v.len() != len {
                return Err(bad("wrong row length"));
            }
            Ok(v)
        };
        if next()? != "nodes" {
            return Err(bad("expected `nodes`"));
        }
        let mut nodes = NodeSet { dim: d, points: Vec::with_capacity(n * d), weights: Vec::with_capacity(n) };
        for _ in 0..n {
            let v = parse_row(next()?, d + 1)?;
            nodes.points.extend(&v[..d]);
            nodes.weights.push(v[d]);
        }
        if next()? != "matrix" {
            return Err(bad("expected `matrix`"));
        }
        let matrix = if real {
            let mut m = Mat::<f64>::zeros(n, n);
            for i in 0..n {
                for (j, x) in parse_row(next()?, n)?.into_iter().enumerate() {
                    m[(i, j)] = x;
                }
            }
            HermitianMatrix::Real(m)
        } else {
            let mut m = Mat::<Complex64>::zeros(n, n);
            for i in 0..n {
                let v = parse_row(next()?, 2 * n)?;
                for j in 0..n {
                    m[(i, j)] = Complex64::new(v[2 * j], v[2 * j + 1]);
                }
            }
            HermitianMatrix::Complex(m)
        };
        Ok(DiscretizedOperator { matrix, nodes, provenance })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::RenyiOrder;
    use crate::spectra::{eigenvalues, renyi_entropy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sym_interval() -> Domain {
        Domain::interval(-1.0, 1.0).unwrap()
    }

    fn cfg_npu(npu: f64) -> NystromConfig {
        NystromConfig { nodes_per_unit: Some(npu), ..Default::default() }
    }

    #[test]
    fn ten_node_trace_is_exact() {
        let cfg = NystromConfig { nodes_per_unit: Some(10.0), panel_order: 10, ..Default::default() };
        let op = nystrom(&sym_interval(), &Domain::interval(0.0, 1.0).unwrap(), 1.0, &cfg).unwrap();
        assert_eq!(op.matrix.n(), 10);
        assert!(op.matrix.is_real());
        assert_eq!(op.matrix.hermitian_defect(), 0.0);
        let oracle = op.nodes.total_weight() / PI;
        assert!((op.matrix.trace() - oracle).abs() < 1e-15);
        assert!((op.matrix.trace() - 1.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn particle_number_at_l20() {
        let op = nystrom(&sym_interval(), &Domain::interval(0.0, 1.0).unwrap(), 20.0, &NystromConfig::default()).unwrap();
        let spec = eigenvalues(&op).unwrap();
        let trace = op.matrix.trace();
        assert!((trace - 20.0 / PI).abs() < 1e-12);
        assert!((spec.trace() - trace).abs() < 1e-10);
        let near_one = spec.eigenvalues.iter().filter(|&&l| l > 0.5).count() as f64;
        assert!((near_one - trace).abs() <= 1.0, "{near_one} vs {trace}");
    }

    #[test]
    fn asymmetric_fermi_sea_gives_complex_hermitian_matrix() {
        let gamma = Domain::interval_union(&[(-2.0, -1.0), (0.5, 1.5)]).unwrap();
        let op = nystrom(&gamma, &Domain::interval(0.0, 2.0).unwrap(), 3.0, &NystromConfig::default()).unwrap();
        assert!(!op.matrix.is_real());
        assert_eq!(op.matrix.hermitian_defect(), 0.0);
        let s = eigenvalues(&op).unwrap();
        assert!(s.max_violation < 1e-7);
    }

    #[test]
    fn nyquist_guard_and_budget() {
        let omega = Domain::interval(0.0, 1.0).unwrap();
        let low = cfg_npu(0.5);
        assert!(matches!(nystrom(&sym_interval(), &omega, 5.0, &low), Err(DiscretizeError::Nyquist { .. })));
        let warn = NystromConfig { nyquist: NyquistPolicy::Warn, ..low };
        assert!(!nystrom(&sym_interval(), &omega, 5.0, &warn).unwrap().provenance.nyquist_ok);
        let tiny = NystromConfig { max_nodes: 32, ..Default::default() };
        assert!(matches!(
            nystrom(&sym_interval(), &omega, 100.0, &tiny),
            Err(DiscretizeError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn node_sets_integrate_volume() {
        let order = 16;
        let cases = [
            Domain::interval_union(&[(0.0, 1.0), (2.0, 3.5)]).unwrap(),
            Domain::cuboid(&[(0.0, 2.0), (-1.0, 1.0)]).unwrap(),
            Domain::ball(&[0.3, -0.2], 1.5).unwrap(),
            Domain::centered_ball(3, 1.2).unwrap(),
            Domain::convex_polygon(&[[0.0, 0.0], [2.0, 0.0], [2.5, 1.0], [1.0, 2.0], [-0.5, 1.0]]).unwrap(),
        ];
        for omega in &cases {
            let (nodes, _) = omega_nodes(omega, 3.0, order);
            assert_eq!(nodes.len(), estimate_node_count(omega, 3.0, order));
            assert!(nodes.weights.iter().all(|&w| w > 0.0));
            let rel = (nodes.total_weight() - omega.volume()).abs() / omega.volume();
            assert!(rel < 1e-12, "{omega}: {rel}");
        }
    }

    #[test]
    fn node_sets_integrate_quadratic_moment() {
        // ∫_disk |x - c|² = π R⁴ / 2 and over a triangle the second moment.
        let (nodes, _) = omega_nodes(&Domain::ball(&[1.0, 1.0], 2.0).unwrap(), 2.0, 16);
        let m: f64 = (0..nodes.len())
            .map(|i| {
                let p = nodes.point(i);
                nodes.weights[i] * ((p[0] - 1.0).powi(2) + (p[1] - 1.0).powi(2))
            })
            .sum();
        assert!((m - PI * 8.0).abs() < 1e-11);

        // ∫_T x² over the unit right triangle = 1/12.
        let tri = Domain::convex_polygon(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let (nodes, _) = omega_nodes(&tri, 4.0, 8);
        let m: f64 = (0..nodes.len()).map(|i| nodes.weights[i] * nodes.point(i)[0].powi(2)).sum();
        assert!((m - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn lattice_examples() {
        let c = lattice_correlation(PI / 2.0, 1).unwrap();
        assert_eq!(c.matrix.get(0, 0).re, 0.5);
        let c = lattice_correlation(PI / 2.0, 2).unwrap();
        assert!((c.matrix.get(0, 1).re - 1.0 / PI).abs() < 1e-16);
        assert!(lattice_correlation(0.0, 4).is_err());
        assert!(lattice_correlation(PI, 4).is_err());
        assert!(lattice_correlation(1.0, 0).is_err());
        assert!(matches!(
            lattice_correlation(1.0, LATTICE_MAX_SITES + 1),
            Err(DiscretizeError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn lattice_spectrum_in_unit_interval() {
        let c = lattice_correlation(1.1, 300).unwrap();
        let s = eigenvalues(&c).unwrap();
        assert!(s.max_violation < 1e-12);
    }

    #[test]
    fn tensor_spectrum_examples() {
        let y = Spectrum::from_values(vec![0.1, 0.4, 0.9]);
        let one = Spectrum::from_values(vec![1.0]);
        assert_eq!(tensor_spectrum(&one, &y).eigenvalues, y.eigenvalues);
        let zero = Spectrum::from_values(vec![0.0, 0.0]);
        let p = tensor_spectrum(&zero, &y);
        assert_eq!(p.len(), 6);
        assert_eq!(renyi_entropy(&p, RenyiOrder::One), 0.0);
    }

    #[test]
    fn tensor_spectrum_matches_kronecker_product() {
        let a = Mat::from_fn(2, 2, |i, j| [[0.7, 0.2], [0.2, 0.3]][i][j]);
        let b = Mat::from_fn(2, 2, |i, j| [[0.6, -0.1], [-0.1, 0.25]][i][j]);
        let kron = Mat::from_fn(4, 4, |i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)]);
        let sa = eigenvalues(&HermitianMatrix::Real(a)).unwrap();
        let sb = eigenvalues(&HermitianMatrix::Real(b)).unwrap();
        let sk = eigenvalues(&HermitianMatrix::Real(kron)).unwrap();
        let st = tensor_spectrum(&sa, &sb);
        for (x, y) in st.eigenvalues.iter().zip(&sk.eigenvalues) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn dilatation_equivalence() {
        let omega = Domain::interval(0.0, 1.0).unwrap();
        let l = 7.0;
        let a = eigenvalues(&nystrom(&sym_interval(), &omega, l, &NystromConfig::default()).unwrap()).unwrap();
        let b = eigenvalues(&nystrom(&sym_interval().scaled(l).unwrap(), &omega, 1.0, &NystromConfig::default()).unwrap())
            .unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_changes_entropy_little() {
        let omega = Domain::interval(0.0, 1.0).unwrap();
        let base = NystromConfig::default();
        let p = sym_interval().max_norm();
        let fine = cfg_npu(1.5 * base.resolve_nodes_per_unit(p));
        for l in [1.0, 30.0] {
            let s0 = renyi_entropy(&eigenvalues(&nystrom(&sym_interval(), &omega, l, &base).unwrap()).unwrap(), RenyiOrder::One);
            let s1 = renyi_entropy(&eigenvalues(&nystrom(&sym_interval(), &omega, l, &fine).unwrap()).unwrap(), RenyiOrder::One);
            assert!(s0 > 0.0);
            assert!((s0 - s1).abs() < 1e-4, "L={l}: {s0} vs {s1}");
        }
    }

    #[test]
    fn direct_2d_matches_tensor_route() {
        let gamma = Domain::cuboid(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let omega = Domain::cuboid(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let cfg = NystromConfig::default();
        let direct = eigenvalues(&nystrom(&gamma, &omega, 2.0, &cfg).unwrap()).unwrap();
        let (tensor, _, _) = tensor_box_spectrum(&gamma, &omega, 2.0, &cfg, SpectrumTolerance::default()).unwrap();
        assert_eq!(direct.len(), tensor.len());
        for (x, y) in direct.eigenvalues.iter().zip(&tensor.eigenvalues) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_block_and_complement_agree() {
        let c = half_filled_ring(24);
        let block: Vec<usize> = (0..9).collect();
        let rest: Vec<usize> = (9..24).collect();
        let sa = eigenvalues(&principal_submatrix(&c, &block)).unwrap();
        let sb = eigenvalues(&principal_submatrix(&c, &rest)).unwrap();
        for a in [0.5, 1.0, 2.0] {
            let o = RenyiOrder::new(a).unwrap();
            assert!((renyi_entropy(&sa, o) - renyi_entropy(&sb, o)).abs() < 1e-10);
        }
        // The full ring is a pure state.
        let full = eigenvalues(&c).unwrap();
        assert!(renyi_entropy(&full, RenyiOrder::One).abs() < 1e-10);
    }

    #[test]
    fn random_projection_is_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_projection(12, 5, &mut rng);
        let p2 = &p * &p;
        let mut dev: f64 = 0.0;
        let mut tr = 0.0;
        for i in 0..12 {
            tr += p[(i, i)];
            for j in 0..12 {
                dev = dev.max((p2[(i, j)] - p[(i, j)]).abs());
            }
        }
        assert!(dev < 1e-13);
        assert!((tr - 5.0).abs() < 1e-12);
    }

    #[test]
    fn trace_power_examples() {
        assert_eq!(trace_power(&Spectrum::from_values(vec![0.0, 1.0, 1.0]), 0.5), 0.0);
        assert_eq!(trace_power(&Spectrum::from_values(vec![0.5]), 1.0), 0.25);
        let c = lattice_correlation(PI / 2.0, 8).unwrap();
        assert!(trace_power_diagnostic(&c, 0.0).is_err());
        assert!(trace_power_diagnostic(&c, 0.5).unwrap() > 0.0);
    }

    #[test]
    fn text_dump_round_trip() {
        let gamma = Domain::interval(0.0, 2.0).unwrap();
        let op = nystrom(&gamma, &Domain::interval(0.0, 1.0).unwrap(), 2.0, &NystromConfig::default()).unwrap();
        let mut buf = Vec::new();
        op.write_text(&mut buf).unwrap();
        let back = DiscretizedOperator::read_text(&buf[..]).unwrap();
        assert_eq!(back.provenance, op.provenance);
        assert_eq!(back.nodes, op.nodes);
        for i in 0..op.matrix.n() {
            for j in 0..op.matrix.n() {
                assert_eq!(back.matrix.get(i, j), op.matrix.get(i, j));
            }
        }
        assert!(DiscretizedOperator::read_text(&b"nonsense\n"[..]).is_err());
    }
}
