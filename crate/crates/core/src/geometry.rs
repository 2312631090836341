//! Regions of position and momentum space and the Widom surface coefficient.
//!
//! A [`Domain`] is one of a small catalog of shapes: unions of disjoint
//! intervals (d = 1), axis-aligned boxes, balls and strictly convex polygons
//! (d = 2). The same type describes the Fermi sea `Γ` and the spatial region
//! `Ω`.
//!
//! The coefficient
//!
//! ```text
//! J(∂Γ, ∂Ω) = (2π)^{1-d} ∫_{∂Γ} ∫_{∂Ω} |m(p)·n(q)| dσ(p) dτ(q)
//! ```
//!
//! is available in closed form whenever one side is a ball, exactly for
//! polytope pairs (a finite sum over face pairs), by product quadrature for
//! everything else, and by Monte Carlo as an independent cross-check. For
//! d = 1 it is the product of the two endpoint counts.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::gauss_legendre;
use crate::special::half_integer_factorial;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid domain: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

type Result<T> = std::result::Result<T, GeometryError>;

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(GeometryError::Invalid(format!(
                "interval [{lo}, {hi}] must be finite with positive length"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn abs_max(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Sorted, pairwise disjoint intervals (d = 1).
    IntervalUnion(Vec<Interval>),
    /// Axis-aligned box, one interval per axis.
    Box(Vec<Interval>),
    Ball { center: Vec<f64>, radius: f64 },
    /// Strictly convex polygon, vertices counter-clockwise (d = 2).
    ConvexPolygon(Vec<[f64; 2]>),
}

/// A bounded region of `ℝ^d`, `d ∈ {1, 2, 3}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainSpec", into = "DomainSpec")]
pub struct Domain {
    shape: Shape,
}

/// A flat face of a polytope: its `(d-1)`-measure and outward unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub area: f64,
    pub normal: Vec<f64>,
}

impl Domain {
    pub fn interval_union(intervals: &[(f64, f64)]) -> Result<Self> {
        if intervals.is_empty() {
            return Err(GeometryError::Invalid("interval union needs at least one interval".into()));
        }
        let mut iv = intervals
            .iter()
            .map(|&(a, b)| Interval::new(a, b))
            .collect::<Result<Vec<_>>>()?;
        iv.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for w in iv.windows(2) {
            if w[0].hi >= w[1].lo {
                return Err(GeometryError::Invalid(format!(
                    "intervals [{}, {}] and [{}, {}] are not disjoint",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
        }
        Ok(Domain {
            shape: Shape::IntervalUnion(iv),
        })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::interval_union(&[(lo, hi)])
    }

    pub fn cuboid(axes: &[(f64, f64)]) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(GeometryError::Invalid(format!("box dimension {} not in 1..=3", axes.len())));
        }
        let iv = axes
            .iter()
            .map(|&(a, b)| Interval::new(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Domain { shape: Shape::Box(iv) })
    }

    pub fn ball(center: &[f64], radius: f64) -> Result<Self> {
        if center.is_empty() || center.len() > 3 {
            return Err(GeometryError::Invalid(format!("ball dimension {} not in 1..=3", center.len())));
        }
        if !(radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::Invalid(format!("ball radius {radius} must be positive and finite")));
        }
        Ok(Domain {
            shape: Shape::Ball {
                center: center.to_vec(),
                radius,
            },
        })
    }

    /// Ball of radius `radius` centered at the origin of `ℝ^dim`.
    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(&vec![0.0; dim], radius)
    }

    pub fn convex_polygon(vertices: &[[f64; 2]]) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::Invalid("polygon needs at least three vertices".into()));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(GeometryError::Invalid("polygon vertices must be finite".into()));
        }
        let scale = vertices
            .iter()
            .map(|v| v[0].abs().max(v[1].abs()))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross <= 1e-12 * scale * scale {
                return Err(GeometryError::Invalid(
                    "polygon vertices must be counter-clockwise and strictly convex".into(),
                ));
            }
        }
        // Winding number one: turning angles sum to 2π.
        let mut turn = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let e1 = [b[0] - a[0], b[1] - a[1]];
            let e2 = [c[0] - b[0], c[1] - b[1]];
            turn += (e1[0] * e2[1] - e1[1] * e2[0]).atan2(e1[0] * e2[0] + e1[1] * e2[1]);
        }
        if (turn - 2.0 * PI).abs() > 1e-6 {
            return Err(GeometryError::Invalid("polygon is self-intersecting".into()));
        }
        Ok(Domain {
            shape: Shape::ConvexPolygon(vertices.to_vec()),
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::IntervalUnion(_) => 1,
            Shape::Box(axes) => axes.len(),
            Shape::Ball { center, .. } => center.len(),
            Shape::ConvexPolygon(_) => 2,
        }
    }

    /// Lebesgue measure `|Ω|`.
    pub fn volume(&self) -> f64 {
        match &self.shape {
            Shape::IntervalUnion(iv) => iv.iter().map(Interval::len).sum(),
            Shape::Box(axes) => axes.iter().map(Interval::len).product(),
            Shape::Ball { center, radius } => match center.len() {
                1 => 2.0 * radius,
                2 => PI * radius * radius,
                _ => 4.0 / 3.0 * PI * radius.powi(3),
            },
            Shape::ConvexPolygon(v) => polygon_area(v),
        }
    }

    /// `|∂Ω|`: the number of boundary points for d = 1, otherwise the
    /// perimeter or surface area.
    pub fn boundary_measure(&self) -> f64 {
        match &self.shape {
            Shape::IntervalUnion(iv) => 2.0 * iv.len() as f64,
            Shape::Box(axes) => match axes.len() {
                1 => 2.0,
                2 => 2.0 * (axes[0].len() + axes[1].len()),
                _ => {
                    let (a, b, c) = (axes[0].len(), axes[1].len(), axes[2].len());
                    2.0 * (a * b + b * c + c * a)
                }
            },
            Shape::Ball { center, radius } => match center.len() {
                1 => 2.0,
                2 => 2.0 * PI * radius,
                _ => 4.0 * PI * radius * radius,
            },
            Shape::ConvexPolygon(v) => (0..v.len())
                .map(|i| {
                    let a = v[i];
                    let b = v[(i + 1) % v.len()];
                    (b[0] - a[0]).hypot(b[1] - a[1])
                })
                .sum(),
        }
    }

    /// The dilated region `L·Ω = {L q : q ∈ Ω}`.
    pub fn scaled(&self, l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(GeometryError::Invalid(format!("scale factor {l} must be positive")));
        }
        let scale_iv = |iv: &Vec<Interval>| {
            iv.iter()
                .map(|i| Interval {
                    lo: i.lo * l,
                    hi: i.hi * l,
                })
                .collect()
        };
        let shape = match &self.shape {
            Shape::IntervalUnion(iv) => Shape::IntervalUnion(scale_iv(iv)),
            Shape::Box(axes) => Shape::Box(scale_iv(axes)),
            Shape::Ball { center, radius } => Shape::Ball {
                center: center.iter().map(|c| c * l).collect(),
                radius: radius * l,
            },
            Shape::ConvexPolygon(v) => Shape::ConvexPolygon(v.iter().map(|p| [p[0] * l, p[1] * l]).collect()),
        };
        Ok(Domain { shape })
    }

    /// `max_{p ∈ Ω} |p|`; for a Fermi sea this is the largest momentum.
    pub fn max_norm(&self) -> f64 {
        match &self.shape {
            Shape::IntervalUnion(iv) => iv.iter().map(Interval::abs_max).fold(0.0, f64::max),
            Shape::Box(axes) => axes.iter().map(|a| a.abs_max().powi(2)).sum::<f64>().sqrt(),
            Shape::Ball { center, radius } => center.iter().map(|c| c * c).sum::<f64>().sqrt() + radius,
            Shape::ConvexPolygon(v) => v.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max),
        }
    }

    /// Whether `Ω = -Ω`, which makes the Fermi kernel real.
    pub fn is_centrally_symmetric(&self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * (1.0 + a.abs().max(b.abs()));
        match &self.shape {
            Shape::IntervalUnion(iv) => iv
                .iter()
                .zip(iv.iter().rev())
                .all(|(a, b)| close(a.lo, -b.hi) && close(a.hi, -b.lo)),
            Shape::Box(axes) => axes.iter().all(|a| close(a.lo, -a.hi)),
            Shape::Ball { center, .. } => center.iter().all(|&c| c == 0.0),
            Shape::ConvexPolygon(v) => v.iter().all(|p| {
                v.iter().any(|q| close(p[0], -q[0]) && close(p[1], -q[1]))
            }),
        }
    }

    /// True for boxes of dimension ≥ 2 and polygons.
    pub fn is_polytope(&self) -> bool {
        match &self.shape {
            Shape::Box(axes) => axes.len() >= 2,
            Shape::ConvexPolygon(_) => true,
            _ => false,
        }
    }

    pub fn is_ball(&self) -> bool {
        matches!(self.shape, Shape::Ball { .. })
    }

    /// Faces of a polytope with `d ≥ 2`.
    pub fn faces(&self) -> Option<Vec<Face>> {
        match &self.shape {
            Shape::Box(axes) if axes.len() >= 2 => {
                let d = axes.len();
                let mut faces = Vec::with_capacity(2 * d);
                for k in 0..d {
                    let area: f64 = (0..d).filter(|&j| j != k).map(|j| axes[j].len()).product();
                    for sign in [-1.0, 1.0] {
                        let mut normal = vec![0.0; d];
                        normal[k] = sign;
                        faces.push(Face { area, normal });
                    }
                }
                Some(faces)
            }
            Shape::ConvexPolygon(v) => Some(
                (0..v.len())
                    .map(|i| {
                        let a = v[i];
                        let b = v[(i + 1) % v.len()];
                        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                        let len = dx.hypot(dy);
                        Face {
                            area: len,
                            normal: vec![dy / len, -dx / len],
                        }
                    })
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Short human-readable description, used in provenance records.
    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Uniform random boundary point and its outward normal (d ≥ 2).
    pub fn sample_boundary<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        match &self.shape {
            Shape::Ball { center, radius } if center.len() >= 2 => {
                let n = if center.len() == 2 {
                    let th = 2.0 * PI * rng.random::<f64>();
                    vec![th.cos(), th.sin()]
                } else {
                    let z = 2.0 * rng.random::<f64>() - 1.0;
                    let ph = 2.0 * PI * rng.random::<f64>();
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    vec![rho * ph.cos(), rho * ph.sin(), z]
                };
                let p = center.iter().zip(&n).map(|(c, n)| c + radius * n).collect();
                Ok((p, n))
            }
            Shape::Box(axes) if axes.len() >= 2 => {
                let faces = self.faces().expect("box has faces");
                let k = pick_weighted(rng, faces.iter().map(|f| f.area));
                let axis = k / 2;
                let mut p: Vec<f64> = axes.iter().map(|a| a.lo + a.len() * rng.random::<f64>()).collect();
                p[axis] = if k % 2 == 0 { axes[axis].lo } else { axes[axis].hi };
                Ok((p, faces[k].normal.clone()))
            }
            Shape::ConvexPolygon(v) => {
                let faces = self.faces().expect("polygon has faces");
                let k = pick_weighted(rng, faces.iter().map(|f| f.area));
                let a = v[k];
                let b = v[(k + 1) % v.len()];
                let s = rng.random::<f64>();
                let p = vec![a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                Ok((p, faces[k].normal.clone()))
            }
            _ => Err(GeometryError::Unsupported("boundary sampling needs d ≥ 2".into())),
        }
    }
}

fn pick_weighted<R: Rng + ?Sized>(rng: &mut R, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        last = i;
        if u < w {
            return i;
        }
        u -= w;
    }
    last
}

fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let a = v[i];
            let b = v[(i + 1) % n];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ivs = |iv: &Vec<Interval>| {
            iv.iter()
                .map(|i| format!("[{}, {}]", i.lo, i.hi))
                .collect::<Vec<_>>()
                .join(" ")
        };
        match &self.shape {
            Shape::IntervalUnion(iv) => write!(f, "interval_union({})", ivs(iv)),
            Shape::Box(axes) => write!(f, "box{}d({})", axes.len(), ivs(axes)),
            Shape::Ball { center, radius } => write!(f, "ball{}d(center={center:?}, r={radius})", center.len()),
            Shape::ConvexPolygon(v) => write!(f, "polygon({v:?})"),
        }
    }
}

/// Serialized form of a [`Domain`]: `dim`, `shape` and the shape's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub dim: usize,
    pub shape: ShapeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    IntervalUnion,
    Box,
    Ball,
    ConvexPolygon,
}

impl TryFrom<DomainSpec> for Domain {
    type Error = GeometryError;

    fn try_from(s: DomainSpec) -> Result<Self> {
        let missing = |key: &str| GeometryError::Invalid(format!("shape {:?} requires key `{key}`", s.shape));
        let pairs = |v: &Vec<[f64; 2]>| v.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>();
        let domain = match s.shape {
            ShapeKind::IntervalUnion => Domain::interval_union(&pairs(s.intervals.as_ref().ok_or_else(|| missing("intervals"))?))?,
            ShapeKind::Box => Domain::cuboid(&pairs(s.axes.as_ref().ok_or_else(|| missing("axes"))?))?,
            ShapeKind::Ball => {
                let radius = s.radius.ok_or_else(|| missing("radius"))?;
                let center = s.center.clone().unwrap_or_else(|| vec![0.0; s.dim]);
                Domain::ball(&center, radius)?
            }
            ShapeKind::ConvexPolygon => Domain::convex_polygon(s.vertices.as_ref().ok_or_else(|| missing("vertices"))?)?,
        };
        if domain.dim() != s.dim {
            return Err(GeometryError::Invalid(format!(
                "declared dim = {} but the shape parameters describe d = {}",
                s.dim,
                domain.dim()
            )));
        }
        Ok(domain)
    }
}

impl From<Domain> for DomainSpec {
    fn from(d: Domain) -> Self {
        let dim = d.dim();
        let to_pairs = |iv: &Vec<Interval>| iv.iter().map(|i| [i.lo, i.hi]).collect::<Vec<_>>();
        let mut spec = DomainSpec {
            dim,
            shape: ShapeKind::IntervalUnion,
            intervals: None,
            axes: None,
            center: None,
            radius: None,
            vertices: None,
        };
        match d.shape {
            Shape::IntervalUnion(iv) => spec.intervals = Some(to_pairs(&iv)),
            Shape::Box(axes) => {
                spec.shape = ShapeKind::Box;
                spec.axes = Some(to_pairs(&axes));
            }
            Shape::Ball { center, radius } => {
                spec.shape = ShapeKind::Ball;
                spec.center = Some(center);
                spec.radius = Some(radius);
            }
            Shape::ConvexPolygon(v) => {
                spec.shape = ShapeKind::ConvexPolygon;
                spec.vertices = Some(v);
            }
        }
        spec
    }
}

/// Mean particle density `ρ = |Γ| / (2π)^d` of a Fermi sea.
pub fn mean_density(gamma: &Domain) -> f64 {
    gamma.volume() / (2.0 * PI).powi(gamma.dim() as i32)
}

/// Points, weights and outward unit normals discretizing the surface
/// measure of a boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceQuadrature {
    pub dim: usize,
    /// Row-major, `dim` coordinates per point.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Row-major, `dim` components per normal.
    pub normals: Vec<f64>,
}

impl SurfaceQuadrature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn normal(&self, i: usize) -> &[f64] {
        &self.normals[i * self.dim..(i + 1) * self.dim]
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn push(&mut self, p: &[f64], n: &[f64], w: f64) {
        self.points.extend_from_slice(p);
        self.normals.extend_from_slice(n);
        self.weights.push(w);
    }
}

/// Boundary quadrature with resolution parameter `n`:
///
/// * circle: `n` equispaced angles;
/// * sphere: `n` Gauss nodes in `cos θ` times `2n` equispaced azimuths;
/// * box / polygon: an `n`-point (per face direction) Gauss rule on every
///   face, so corners carry no weight.
pub fn surface_quadrature(domain: &Domain, resolution: usize) -> Result<SurfaceQuadrature> {
    let d = domain.dim();
    if d == 1 {
        return Err(GeometryError::Unsupported(
            "a one-dimensional boundary is a finite point set; no surface quadrature".into(),
        ));
    }
    if resolution == 0 {
        return Err(GeometryError::Invalid("resolution must be positive".into()));
    }
    let n = resolution;
    let mut q = SurfaceQuadrature {
        dim: d,
        points: Vec::new(),
        weights: Vec::new(),
        normals: Vec::new(),
    };
    match domain.shape() {
        Shape::Ball { center, radius } if d == 2 => {
            let w = 2.0 * PI * radius / n as f64;
            for k in 0..n {
                let th = 2.0 * PI * k as f64 / n as f64;
                let nv = [th.cos(), th.sin()];
                let p = [center[0] + radius * nv[0], center[1] + radius * nv[1]];
                q.push(&p, &nv, w);
            }
        }
        Shape::Ball { center, radius } => {
            let (z, wz) = gauss_legendre(n);
            let nphi = 2 * n;
            let wphi = 2.0 * PI / nphi as f64;
            for (&zi, &wi) in z.iter().zip(&wz) {
                let rho = (1.0 - zi * zi).sqrt();
                for k in 0..nphi {
                    let ph = wphi * k as f64;
                    let nv = [rho * ph.cos(), rho * ph.sin(), zi];
                    let p = [
                        center[0] + radius * nv[0],
                        center[1] + radius * nv[1],
                        center[2] + radius * nv[2],
                    ];
                    q.push(&p, &nv, radius * radius * wi * wphi);
                }
            }
        }
        Shape::Box(axes) => {
            let (x, w) = gauss_legendre(n);
            for k in 0..d {
                let others: Vec<usize> = (0..d).filter(|&j| j != k).collect();
                for (side, sign) in [(axes[k].lo, -1.0), (axes[k].hi, 1.0)] {
                    let mut nv = vec![0.0; d];
                    nv[k] = sign;
                    let mut p = vec![0.0; d];
                    p[k] = side;
                    let map = |j: usize, xi: f64| axes[j].mid() + 0.5 * axes[j].len() * xi;
                    let half = |j: usize| 0.5 * axes[j].len();
                    if d == 2 {
                        let j = others[0];
                        for (&xi, &wi) in x.iter().zip(&w) {
                            p[j] = map(j, xi);
                            q.push(&p, &nv, wi * half(j));
                        }
                    } else {
                        let (j1, j2) = (others[0], others[1]);
                        for (&xi, &wi) in x.iter().zip(&w) {
                            for (&yi, &wj) in x.iter().zip(&w) {
                                p[j1] = map(j1, xi);
                                p[j2] = map(j2, yi);
                                q.push(&p, &nv, wi * wj * half(j1) * half(j2));
                            }
                        }
                    }
                }
            }
        }
        Shape::ConvexPolygon(v) => {
            let (x, w) = gauss_legendre(n);
            let faces = domain.faces().expect("polygon has faces");
            for (i, face) in faces.iter().enumerate() {
                let a = v[i];
                let b = v[(i + 1) % v.len()];
                for (&xi, &wi) in x.iter().zip(&w) {
                    let s = 0.5 * (xi + 1.0);
                    let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    q.push(&p, &face.normal, 0.5 * wi * face.area);
                }
            }
        }
        Shape::IntervalUnion(_) => unreachable!("d = 1 handled above"),
    }
    Ok(q)
}

/// How a [`WidomCoefficient`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidomMethod {
    ClosedForm,
    FacePairExact,
    Quadrature,
    MonteCarlo,
}

/// `J(∂Γ, ∂Ω)` with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidomCoefficient {
    pub value: f64,
    pub method: WidomMethod,
    pub error_estimate: f64,
}

fn check_dims(gamma: &Domain, omega: &Domain) -> Result<usize> {
    if gamma.dim() != omega.dim() {
        return Err(GeometryError::DimensionMismatch(gamma.dim(), omega.dim()));
    }
    Ok(gamma.dim())
}

fn normalization(d: usize) -> f64 {
    (2.0 * PI).powi(1 - d as i32)
}

/// `J(∂Γ, ∂Ω)` by the most accurate applicable method: the endpoint product
/// for d = 1, the face-pair sum for two polytopes, the sphere formula when
/// either side is a ball, otherwise product quadrature at `resolution`
/// (error estimated against half resolution).
pub fn widom_j(gamma: &Domain, omega: &Domain, resolution: usize) -> Result<WidomCoefficient> {
    let d = check_dims(gamma, omega)?;
    if d == 1 {
        return widom_j_closed_form(gamma, omega);
    }
    if gamma.is_polytope() && omega.is_polytope() {
        return widom_j_face_pair(gamma, omega);
    }
    if gamma.is_ball() || omega.is_ball() {
        return widom_j_closed_form(gamma, omega);
    }
    widom_j_quadrature(gamma, omega, resolution)
}

/// Exact `J` for two polytopes: `(2π)^{1-d} Σ_{F,G} |F| |G| |m_F · n_G|`.
pub fn widom_j_face_pair(gamma: &Domain, omega: &Domain) -> Result<WidomCoefficient> {
    let d = check_dims(gamma, omega)?;
    let (fg, fo) = match (gamma.faces(), omega.faces()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(GeometryError::Unsupported("face-pair sum needs two polytopes".into())),
    };
    let mut raw = 0.0;
    for f in &fg {
        for g in &fo {
            raw += f.area * g.area * dot(&f.normal, &g.normal).abs();
        }
    }
    Ok(WidomCoefficient {
        value: normalization(d) * raw,
        method: WidomMethod::FacePairExact,
        error_estimate: 0.0,
    })
}

/// Closed form for d = 1 (endpoint counts) or when either domain is a ball.
pub fn widom_j_closed_form(gamma: &Domain, omega: &Domain) -> Result<WidomCoefficient> {
    let d = check_dims(gamma, omega)?;
    let value = if d == 1 {
        gamma.boundary_measure() * omega.boundary_measure()
    } else if let Shape::Ball { radius, .. } = gamma.shape() {
        widom_j_sphere(*radius, omega.boundary_measure(), d)?
    } else if let Shape::Ball { radius, .. } = omega.shape() {
        // The raw double integral is symmetric in the two surfaces.
        widom_j_sphere(*radius, gamma.boundary_measure(), d)?
    } else {
        return Err(GeometryError::Unsupported(
            "closed form needs d = 1 or a ball on one side".into(),
        ));
    };
    Ok(WidomCoefficient {
        value,
        method: WidomMethod::ClosedForm,
        error_estimate: 0.0,
    })
}

/// Product quadrature of the double surface integral. The error estimate is
/// the change against the rule at half the resolution.
pub fn widom_j_quadrature(gamma: &Domain, omega: &Domain, resolution: usize) -> Result<WidomCoefficient> {
    let d = check_dims(gamma, omega)?;
    if d == 1 {
        return Err(GeometryError::Unsupported("no surface quadrature for d = 1".into()));
    }
    let fine = double_surface_sum(&surface_quadrature(gamma, resolution)?, &surface_quadrature(omega, resolution)?);
    let coarse_res = (resolution / 2).max(1);
    let coarse = double_surface_sum(&surface_quadrature(gamma, coarse_res)?, &surface_quadrature(omega, coarse_res)?);
    let norm = normalization(d);
    Ok(WidomCoefficient {
        value: norm * fine,
        method: WidomMethod::Quadrature,
        error_estimate: norm * (fine - coarse).abs(),
    })
}

/// `Σ_{j,k} w_j w_k |m_j · n_k|`, summed row by row in a fixed order so the
/// result does not depend on the number of worker threads.
pub fn double_surface_sum(a: &SurfaceQuadrature, b: &SurfaceQuadrature) -> f64 {
    let rows: Vec<f64> = (0..a.len())
        .into_par_iter()
        .map(|j| {
            let m = a.normal(j);
            let s: f64 = (0..b.len()).map(|k| b.weights[k] * dot(m, b.normal(k)).abs()).sum();
            a.weights[j] * s
        })
        .collect();
    rows.iter().sum()
}

/// Monte Carlo estimate of `J` from `samples` independent boundary pairs;
/// the error estimate is one standard error.
pub fn widom_j_monte_carlo<R: Rng + ?Sized>(
    gamma: &Domain,
    omega: &Domain,
    samples: usize,
    rng: &mut R,
) -> Result<WidomCoefficient> {
    let d = check_dims(gamma, omega)?;
    if d == 1 {
        return widom_j_closed_form(gamma, omega);
    }
    if samples < 2 {
        return Err(GeometryError::Invalid("Monte Carlo needs at least two samples".into()));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..samples {
        let (_, m) = gamma.sample_boundary(rng)?;
        let (_, n) = omega.sample_boundary(rng)?;
        let x = dot(&m, &n).abs();
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = m2 / (samples - 1) as f64;
    let scale = normalization(d) * gamma.boundary_measure() * omega.boundary_measure();
    Ok(WidomCoefficient {
        value: scale * mean,
        method: WidomMethod::MonteCarlo,
        error_estimate: scale * (var / samples as f64).sqrt(),
    })
}

/// `J` for a spherical Fermi surface of radius `p_f`:
/// `2 / ((d-1)/2)! · (p_f² / 4π)^{(d-1)/2} · |∂Ω|`.
pub fn widom_j_sphere(p_f: f64, omega_boundary_measure: f64, d: usize) -> Result<f64> {
    if !(1..=3).contains(&d) {
        return Err(GeometryError::Invalid(format!("dimension {d} not in 1..=3")));
    }
    if !(p_f > 0.0) || !(omega_boundary_measure > 0.0) {
        return Err(GeometryError::Invalid("p_F and |∂Ω| must be positive".into()));
    }
    let half = 0.5 * (d as f64 - 1.0);
    let fact = half_integer_factorial(half).expect("half-integer");
    Ok(2.0 / fact * (p_f * p_f / (4.0 * PI)).powf(half) * omega_boundary_measure)
}

/// `J` for a spherical Fermi sea written through the mean density:
/// `2 / ((d-1)/2)! · [(d/2)!]^{(d-1)/d} · ρ^{(d-1)/d} |∂Ω|`.
pub fn widom_j_density_form(gamma: &Domain, omega: &Domain) -> Result<f64> {
    let d = check_dims(gamma, omega)?;
    if !gamma.is_ball() {
        return Err(GeometryError::Unsupported("density form needs a spherical Fermi sea".into()));
    }
    let df = d as f64;
    let expo = (df - 1.0) / df;
    let rho = mean_density(gamma);
    let f1 = half_integer_factorial(0.5 * (df - 1.0)).expect("half-integer");
    let f2 = half_integer_factorial(0.5 * df).expect("half-integer");
    Ok(2.0 / f1 * f2.powf(expo) * rho.powf(expo) * omega.boundary_measure())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> Domain {
        Domain::cuboid(&[(0.0, 1.0), (0.0, 1.0)]).unwrap()
    }

    #[test]
    fn volumes() {
        assert!((Domain::centered_ball(2, 1.0).unwrap().volume() - PI).abs() < 1e-15);
        assert_eq!(Domain::interval(-1.0, 1.0).unwrap().volume(), 2.0);
        assert_eq!(unit_square().volume(), 1.0);
        let tri = Domain::convex_polygon(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((tri.volume() - 0.5).abs() < 1e-15);
        assert!((Domain::centered_ball(3, 2.0).unwrap().volume() - 32.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn densities() {
        assert!((mean_density(&Domain::interval(-PI, PI).unwrap()) - 1.0).abs() < 1e-15);
        let disk = Domain::centered_ball(2, 1.0).unwrap();
        assert!((mean_density(&disk) - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let kf = 0.7;
        assert!((mean_density(&Domain::interval(-kf, kf).unwrap()) - kf / PI).abs() < 1e-15);
    }

    #[test]
    fn boundary_measures() {
        let two = Domain::interval_union(&[(0.0, 1.0), (2.0, 3.0)]).unwrap();
        assert_eq!(two.boundary_measure(), 4.0);
        assert!((Domain::centered_ball(2, 1.0).unwrap().boundary_measure() - 2.0 * PI).abs() < 1e-15);
        assert_eq!(unit_square().boundary_measure(), 4.0);
        let cube = Domain::cuboid(&[(0.0, 1.0), (0.0, 2.0), (0.0, 3.0)]).unwrap();
        assert_eq!(cube.boundary_measure(), 22.0);
    }

    #[test]
    fn construction_rejects_invalid_shapes() {
        assert!(Domain::interval_union(&[(0.0, 1.0), (0.5, 2.0)]).is_err());
        assert!(Domain::interval_union(&[(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::ball(&[0.0, 0.0], 0.0).is_err());
        assert!(Domain::cuboid(&[(0.0, 1.0), (2.0, 1.0)]).is_err());
        // clockwise
        assert!(Domain::convex_polygon(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
        // collinear vertex
        assert!(Domain::convex_polygon(&[[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
        // sorted on construction
        let u = Domain::interval_union(&[(2.0, 3.0), (0.0, 1.0)]).unwrap();
        assert_eq!(
            u.shape(),
            &Shape::IntervalUnion(vec![Interval { lo: 0.0, hi: 1.0 }, Interval { lo: 2.0, hi: 3.0 }])
        );
    }

    #[test]
    fn surface_quadrature_examples() {
        let disk = Domain::centered_ball(2, 1.0).unwrap();
        let q = surface_quadrature(&disk, 16).unwrap();
        assert_eq!(q.len(), 16);
        assert!(q.weights.iter().all(|&w| (w - 2.0 * PI / 16.0).abs() < 1e-15));
        for i in 0..q.len() {
            let p = q.point(i);
            let n = q.normal(i);
            assert!((p[0] - n[0]).abs() < 1e-15 && (p[1] - n[1]).abs() < 1e-15);
        }

        let sq = surface_quadrature(&unit_square(), 5).unwrap();
        assert_eq!(sq.len(), 20);
        assert!((sq.total_weight() - 4.0).abs() < 1e-14);
        for i in 0..sq.len() {
            let n = sq.normal(i);
            assert!(n.iter().filter(|c| c.abs() == 1.0).count() == 1);
        }

        let tri = Domain::convex_polygon(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let qt = surface_quadrature(&tri, 7).unwrap();
        assert!((qt.total_weight() - tri.boundary_measure()).abs() < 1e-12);

        assert!(surface_quadrature(&Domain::interval(0.0, 1.0).unwrap(), 4).is_err());
    }

    #[test]
    fn surface_quadrature_invariants() {
        let shapes = vec![
            Domain::ball(&[0.3, -0.2], 1.7).unwrap(),
            Domain::ball(&[0.0, 0.0, 1.0], 0.5).unwrap(),
            Domain::cuboid(&[(0.0, 1.0), (-1.0, 2.0), (0.5, 0.75)]).unwrap(),
            Domain::convex_polygon(&[[0.0, 0.0], [2.0, 0.0], [3.0, 1.0], [1.0, 2.0]]).unwrap(),
        ];
        for s in shapes {
            let q = surface_quadrature(&s, 24).unwrap();
            assert!(q.weights.iter().all(|&w| w > 0.0));
            for i in 0..q.len() {
                let n = q.normal(i);
                assert!((dot(n, n).sqrt() - 1.0).abs() < 1e-12);
            }
            let rel = (q.total_weight() - s.boundary_measure()).abs() / s.boundary_measure();
            assert!(rel < 1e-12, "{s}: {rel}");
        }
    }

    #[test]
    fn widom_one_dimensional() {
        let g = Domain::interval(-1.0, 1.0).unwrap();
        let o = Domain::interval(0.0, 1.0).unwrap();
        let j = widom_j(&g, &o, 1).unwrap();
        assert_eq!(j.value, 4.0);
        let o2 = Domain::interval_union(&[(0.0, 1.0), (2.0, 3.0)]).unwrap();
        assert_eq!(widom_j(&g, &o2, 1).unwrap().value, 8.0);
    }

    #[test]
    fn widom_square_square_face_pair_and_monte_carlo() {
        let g = Domain::cuboid(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let j = widom_j(&g, &unit_square(), 8).unwrap();
        assert_eq!(j.method, WidomMethod::FacePairExact);
        assert!((j.value - 8.0 / PI).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mc = widom_j_monte_carlo(&g, &unit_square(), 200_000, &mut rng).unwrap();
        assert!((mc.value - 8.0 / PI).abs() < 4.0 * mc.error_estimate, "{mc:?}");
        let quad = widom_j_quadrature(&g, &unit_square(), 8).unwrap();
        assert!((quad.value - 8.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn widom_disk_disk() {
        let disk = Domain::centered_ball(2, 1.0).unwrap();
        let closed = widom_j_closed_form(&disk, &disk).unwrap();
        assert!((closed.value - 4.0).abs() < 1e-14);
        assert_eq!(widom_j(&disk, &disk, 512).unwrap().method, WidomMethod::ClosedForm);
        let quad = widom_j_quadrature(&disk, &disk, 512).unwrap();
        assert_eq!(quad.method, WidomMethod::Quadrature);
        assert!((quad.value - 4.0).abs() < 1e-3 * 4.0, "{quad:?}");
        assert!((quad.value - 4.0).abs() <= quad.error_estimate.max(1e-12));
    }

    #[test]
    fn widom_sphere_formula() {
        assert!((widom_j_sphere(1.0, 2.0 * PI, 2).unwrap() - 4.0).abs() < 1e-14);
        assert!((widom_j_sphere(1.0, 4.0 * PI, 3).unwrap() - 2.0).abs() < 1e-14);
        assert!((widom_j_sphere(3.7, 2.0, 1).unwrap() - 4.0).abs() < 1e-15);
        assert!(widom_j_sphere(-1.0, 1.0, 2).is_err());
        assert!(widom_j_sphere(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn sphere_sphere_quadrature_matches_closed_form() {
        let s = Domain::centered_ball(3, 1.0).unwrap();
        let q = widom_j_quadrature(&s, &s, 48).unwrap();
        let c = widom_j_sphere(1.0, 4.0 * PI, 3).unwrap();
        assert!((q.value - c).abs() < 1e-3 * c, "{} vs {c}", q.value);
    }

    #[test]
    fn density_form_matches_sphere_formula() {
        for d in 1..=3 {
            for &pf in &[0.5, 1.0, 2.3] {
                let g = Domain::centered_ball(d, pf).unwrap();
                let o = Domain::centered_ball(d, 1.3).unwrap();
                let a = widom_j_density_form(&g, &o).unwrap();
                let b = widom_j_sphere(pf, o.boundary_measure(), d).unwrap();
                assert!((a - b).abs() <= 1e-12 * b, "d={d} pf={pf}: {a} vs {b}");
            }
        }
        assert!(widom_j_density_form(&unit_square(), &unit_square()).is_err());
    }

    #[test]
    fn widom_dimension_mismatch() {
        let a = Domain::interval(0.0, 1.0).unwrap();
        assert!(matches!(widom_j(&a, &unit_square(), 4), Err(GeometryError::DimensionMismatch(1, 2))));
    }

    #[test]
    fn domain_spec_roundtrip() {
        let shapes = vec![
            Domain::interval_union(&[(0.0, 1.0), (2.0, 3.5)]).unwrap(),
            unit_square(),
            Domain::ball(&[0.0, 1.0, 2.0], 0.5).unwrap(),
            Domain::convex_polygon(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap(),
        ];
        for s in shapes {
            let spec = DomainSpec::from(s.clone());
            assert_eq!(Domain::try_from(spec).unwrap(), s);
        }
        let bad = DomainSpec {
            dim: 2,
            shape: ShapeKind::IntervalUnion,
            intervals: Some(vec![[0.0, 1.0]]),
            axes: None,
            center: None,
            radius: None,
            vertices: None,
        };
        assert!(Domain::try_from(bad).is_err());
    }
}
