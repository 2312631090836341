//! The `validate` command: named invariant checks over small problems.

use std::f64::consts::PI;
use std::time::Instant;

use fermi_ee::discretize::{
    half_filled_ring, lattice_correlation, nystrom_with_kernel, principal_submatrix, random_projection,
    symmetrized, NystromConfig,
};
use fermi_ee::functionals::{h, RenyiOrder, H_MAX};
use fermi_ee::geometry::{mean_density, Shape};
use fermi_ee::quadrature::composite_gauss_legendre;
use fermi_ee::spectra::{eigenvalues, eigenvalues_with, renyi_entropy, Spectrum, SpectrumTolerance};
use fermi_ee::{Domain, FermiKernel, Kernel};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;
use crate::record::{CheckOutcome, ValidationReport};

/// Faults that `--inject-fault` can plant to prove the suite notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Adds an odd real part to the kernel, breaking `K(-u) = conj K(u)`.
    CorruptedKernel,
}

/// Kernel test double: a Fermi kernel plus `ε·u₁`.
struct Skewed {
    inner: FermiKernel,
    eps: f64,
}

impl Kernel for Skewed {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval_diff(&self, u: &[f64]) -> Complex64 {
        self.inner.eval_diff(u) + self.eps * u[0]
    }

    fn is_real(&self) -> bool {
        self.inner.is_real()
    }
}

fn kernel_for(gamma: &Domain, fault: Option<Fault>) -> Box<dyn Kernel> {
    let k = FermiKernel::new(gamma).expect("test seas have closed-form kernels");
    match fault {
        Some(Fault::CorruptedKernel) => Box::new(Skewed { inner: k, eps: 1e-3 }),
        None => Box::new(k),
    }
}

fn seas() -> Vec<Domain> {
    vec![
        Domain::interval(-1.0, 1.0).unwrap(),
        Domain::interval_union(&[(-2.0, -0.5), (0.3, 1.2)]).unwrap(),
        Domain::cuboid(&[(-1.0, 1.0), (-0.5, 0.8)]).unwrap(),
        Domain::centered_ball(2, 1.0).unwrap(),
        Domain::ball(&[0.3, -0.2, 0.1], 0.9).unwrap(),
    ]
}

type Check = fn(Option<Fault>) -> Result<String, String>;

pub const CHECKS: [(&str, Check); 9] = [
    ("kernel_hermiticity", kernel_hermiticity),
    ("fourier_consistency", fourier_consistency),
    ("trace_identity", trace_identity),
    ("spectrum_in_unit_interval", spectrum_in_unit_interval),
    ("h_symmetry_and_range", h_symmetry_and_range),
    ("order_monotonicity", order_monotonicity),
    ("complement_purity", complement_purity),
    ("projector_purity", projector_purity),
    ("projection_product_spectra", projection_product_spectra),
];

pub fn run(fault: Option<Fault>) -> ValidationReport {
    let checks = CHECKS
        .iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let r = f(fault);
            let seconds = start.elapsed().as_secs_f64();
            let (passed, detail) = match r {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome { name: name.to_string(), passed, detail, seconds }
        })
        .collect();
    ValidationReport {
        checks,
        injected_fault: fault.map(|f| format!("{f:?}")),
    }
}

pub fn verdict(report: &ValidationReport) -> Result<(), CliError> {
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("invariant violated: {}", failed.join(", "))))
    }
}

pub fn table(report: &ValidationReport) -> String {
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = format!("{:<width$}  {:<6}  {:>9}  detail\n", "check", "status", "time_s");
    for c in &report.checks {
        out.push_str(&format!(
            "{:<width$}  {:<6}  {:>9.4}  {}\n",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.seconds,
            c.detail
        ));
    }
    out
}

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sample_points(dim: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    use rand::Rng;
    (0..count).map(|_| (0..dim).map(|_| rng.random_range(-6.0..6.0)).collect()).collect()
}

fn kernel_hermiticity(fault: Option<Fault>) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for g in seas() {
        let k = kernel_for(&g, fault);
        let pts = sample_points(g.dim(), 40, &mut rng);
        for p in &pts {
            for q in &pts {
                let a = k.eval(p, q);
                let b = k.eval(q, p).conj();
                worst = worst.max((a - b).norm());
            }
        }
    }
    ensure(worst <= 1e-12, format!("max |K(q,q') - conj K(q',q)| = {worst:.2e} (tol 1e-12)"))
}

/// `(2π)^{-d} ∫_Γ e^{ip·u} dp` by tensor Gauss–Legendre, independent of the
/// closed forms.
fn fourier_integral(gamma: &Domain, u: &[f64]) -> Option<Complex64> {
    let interval = |lo: f64, hi: f64, x: f64| {
        let r = composite_gauss_legendre(lo, hi, 40, 20);
        Complex64::new(r.integrate(|p| (p * x).cos()), r.integrate(|p| (p * x).sin())) / (2.0 * PI)
    };
    match gamma.shape() {
        Shape::IntervalUnion(iv) => Some(iv.iter().map(|i| interval(i.lo, i.hi, u[0])).sum()),
        Shape::Box(axes) => Some(axes.iter().zip(u).map(|(a, &x)| interval(a.lo, a.hi, x)).product()),
        Shape::Ball { center, radius } if center.len() == 2 => {
            let rr = composite_gauss_legendre(0.0, *radius, 20, 20);
            let rt = composite_gauss_legendre(0.0, 2.0 * PI, 40, 20);
            let mut acc = Complex64::new(0.0, 0.0);
            for (&r, &wr) in rr.nodes.iter().zip(&rr.weights) {
                for (&t, &wt) in rt.nodes.iter().zip(&rt.weights) {
                    let p = [center[0] + r * t.cos(), center[1] + r * t.sin()];
                    acc += Complex64::from_polar(r * wr * wt, p[0] * u[0] + p[1] * u[1]);
                }
            }
            Some(acc / (4.0 * PI * PI))
        }
        _ => None,
    }
}

fn fourier_consistency(fault: Option<Fault>) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for g in seas() {
        let k = kernel_for(&g, fault);
        for u in sample_points(g.dim(), 12, &mut rng) {
            if let Some(reference) = fourier_integral(&g, &u) {
                worst = worst.max((k.eval_diff(&u) - reference).norm());
                count += 1;
            }
        }
    }
    ensure(worst <= 1e-8, format!("{count} samples, max |K - Fourier integral| = {worst:.2e} (tol 1e-8)"))
}

fn trace_identity(fault: Option<Fault>) -> Result<String, String> {
    let cases = [
        (Domain::interval(-1.0, 1.0).unwrap(), Domain::interval(0.0, 1.0).unwrap(), 12.0),
        (
            Domain::interval_union(&[(-2.0, -0.5), (0.3, 1.2)]).unwrap(),
            Domain::interval_union(&[(0.0, 1.0), (2.0, 2.5)]).unwrap(),
            6.0,
        ),
        (Domain::cuboid(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap(), Domain::cuboid(&[(0.0, 1.0), (0.0, 1.0)]).unwrap(), 4.0),
        (Domain::centered_ball(2, 1.0).unwrap(), Domain::centered_ball(2, 1.0).unwrap(), 3.0),
    ];
    let mut worst: f64 = 0.0;
    for (g, o, l) in cases {
        let k = kernel_for(&g, fault);
        let op = nystrom_with_kernel(k.as_ref(), &g.label(), g.max_norm(), &o, l, &NystromConfig::default())
            .map_err(|e| e.to_string())?;
        let expect = mean_density(&g) * o.volume() * l.powi(o.dim() as i32);
        worst = worst.max((op.matrix.trace() - expect).abs() / expect);
    }
    ensure(worst <= 1e-10, format!("max relative |Tr D - ρ|LΩ|| = {worst:.2e} (tol 1e-10)"))
}

/// Raw eigenvalues of small continuum operators, checked before clamping.
fn spectrum_in_unit_interval(fault: Option<Fault>) -> Result<String, String> {
    let cases = [
        (Domain::interval(-1.0, 1.0).unwrap(), Domain::interval(0.0, 1.0).unwrap(), 15.0),
        (Domain::centered_ball(2, 1.0).unwrap(), Domain::cuboid(&[(0.0, 1.0), (0.0, 1.0)]).unwrap(), 4.0),
    ];
    let loose = SpectrumTolerance { warn: 1e-7, abort: f64::INFINITY };
    let mut worst: f64 = 0.0;
    for (g, o, l) in cases {
        let k = kernel_for(&g, fault);
        let op = nystrom_with_kernel(k.as_ref(), &g.label(), g.max_norm(), &o, l, &NystromConfig::default())
            .map_err(|e| e.to_string())?;
        let spec = eigenvalues_with(&op.matrix, loose).map_err(|e| e.to_string())?;
        worst = worst.max(spec.max_violation);
    }
    ensure(worst <= 1e-7, format!("max distance outside [0, 1] = {worst:.2e} (tol 1e-7)"))
}

fn h_symmetry_and_range(_: Option<Fault>) -> Result<String, String> {
    let orders = [0.25, 0.5, 1.0, 2.0, 7.0, f64::INFINITY];
    let mut sym: f64 = 0.0;
    let mut range_ok = true;
    for a in orders {
        let o = RenyiOrder::new(a).unwrap();
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let v = h(o, t);
            sym = sym.max((v - h(o, 1.0 - t)).abs());
            range_ok &= (0.0..=H_MAX + 1e-15).contains(&v);
        }
        range_ok &= h(o, -0.1) == 0.0 && h(o, 1.1) == 0.0;
    }
    ensure(sym <= 1e-14 && range_ok, format!("max |h(t) - h(1-t)| = {sym:.2e}, range within [0, ln 2]: {range_ok}"))
}

fn ladder(spec: &Spectrum) -> Vec<f64> {
    [0.25, 0.5, 1.0, 2.0, 5.0, f64::INFINITY]
        .iter()
        .map(|&a| renyi_entropy(spec, RenyiOrder::new(a).unwrap()))
        .collect()
}

fn order_monotonicity(_: Option<Fault>) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut spectra = Vec::new();
    for n in [8, 64, 256] {
        spectra.push(eigenvalues(&lattice_correlation(PI / 2.0, n).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?);
    }
    let g = Domain::interval(-1.0, 1.0).unwrap();
    let op = fermi_ee::discretize::nystrom(&g, &Domain::interval(0.0, 1.0).unwrap(), 20.0, &NystromConfig::default())
        .map_err(|e| e.to_string())?;
    spectra.push(eigenvalues(&op).map_err(|e| e.to_string())?);
    for s in &spectra {
        let e = ladder(s);
        for w in e.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
    }
    ensure(worst <= 1e-12, format!("{} spectra, max increase of S_α in α = {worst:.2e}", spectra.len()))
}

fn complement_purity(_: Option<Fault>) -> Result<String, String> {
    let sites = 24;
    let ring = half_filled_ring(sites);
    let block: Vec<usize> = (0..9).collect();
    let rest: Vec<usize> = (9..sites).collect();
    let a = eigenvalues_with(&principal_submatrix(&ring, &block), SpectrumTolerance::default()).map_err(|e| e.to_string())?;
    let b = eigenvalues_with(&principal_submatrix(&ring, &rest), SpectrumTolerance::default()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for o in [RenyiOrder::One, RenyiOrder::new(2.0).unwrap(), RenyiOrder::Infinity] {
        worst = worst.max((renyi_entropy(&a, o) - renyi_entropy(&b, o)).abs());
    }
    ensure(worst <= 1e-10, format!("ring of {sites}: max |S(A) - S(complement)| = {worst:.2e} (tol 1e-10)"))
}

fn projector_purity(_: Option<Fault>) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for (dim, rank) in [(10, 3), (25, 12), (40, 1)] {
        let p = random_projection(dim, rank, &mut rng);
        let spec = eigenvalues_with(&symmetrized(&p), SpectrumTolerance::default()).map_err(|e| e.to_string())?;
        for s in ladder(&spec) {
            worst = worst.max(s.abs());
        }
    }
    ensure(worst == 0.0, format!("max S_α of a projector = {worst:e} (exactly 0 expected)"))
}

/// Nonzero spectra of `EFE` and `FEF` coincide for projections `E`, `F`.
fn projection_product_spectra(_: Option<Fault>) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let dim = 6 + trial;
        let pe = random_projection(dim, 1 + trial % 5, &mut rng);
        let pf = random_projection(dim, 2 + trial % 4, &mut rng);
        let efe = eigenvalues_with(&symmetrized(&(&(&pe * &pf) * &pe)), SpectrumTolerance::default()).map_err(|x| x.to_string())?;
        let fef = eigenvalues_with(&symmetrized(&(&(&pf * &pe) * &pf)), SpectrumTolerance::default()).map_err(|x| x.to_string())?;
        let nz = |s: &Spectrum| -> Vec<f64> { s.eigenvalues.iter().copied().filter(|&x| x > 1e-9).collect() };
        let (a, b) = (nz(&efe), nz(&fef));
        if a.len() != b.len() {
            return Err(format!("trial {trial}: {} vs {} nonzero eigenvalues", a.len(), b.len()));
        }
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    ensure(worst <= 1e-10, format!("20 pairs, max eigenvalue mismatch = {worst:.2e} (tol 1e-10)"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_suite_passes() {
        let r = run(None);
        assert!(verdict(&r).is_ok(), "{}", table(&r));
    }

    #[test]
    fn corrupted_kernel_is_caught() {
        let r = run(Some(Fault::CorruptedKernel));
        let failed: Vec<_> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"kernel_hermiticity"), "{}", table(&r));
        assert!(failed.contains(&"fourier_consistency"));
    }
}
