//! Randomized invariants across modules.

use std::f64::consts::PI;

use fermi_ee::asymptotics::{fit_points, FitWeighting};
use fermi_ee::discretize::{nystrom, tensor_spectrum, NystromConfig};
use fermi_ee::functionals::{h, RenyiOrder, H_MAX};
use fermi_ee::geometry::{surface_quadrature, widom_j, widom_j_quadrature};
use fermi_ee::kernels::{is_hermitian_sample, FermiKernel};
use fermi_ee::special::dilog;
use fermi_ee::spectra::{renyi_entropy, Spectrum};
use fermi_ee::Domain;
use proptest::prelude::*;

fn order() -> impl Strategy<Value = RenyiOrder> {
    prop_oneof![
        (0.05f64..20.0).prop_map(|a| RenyiOrder::new(a).unwrap()),
        Just(RenyiOrder::One),
        Just(RenyiOrder::Infinity),
    ]
}

fn unit_values(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![0.0f64..=1.0, Just(0.0), Just(1.0), 1e-12f64..1e-6], 0..max)
}

/// Disjoint sorted intervals with gaps.
fn interval_union() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.1f64..2.0, 0.05f64..1.0), 1..4).prop_flat_map(|parts| {
        (-3.0f64..3.0).prop_map(move |start| {
            let mut x = start;
            parts
                .iter()
                .map(|&(len, gap)| {
                    let iv = (x, x + len);
                    x += len + gap;
                    iv
                })
                .collect()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn h_is_symmetric_and_bounded(alpha in order(), t in -0.5f64..1.5) {
        let v = h(alpha, t);
        prop_assert!(v >= 0.0 && v <= H_MAX + 1e-15);
        if (0.0..=1.0).contains(&t) {
            prop_assert!((v - h(alpha, 1.0 - t)).abs() < 1e-14);
        } else {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn h_decreases_in_order(a in 0.05f64..20.0, b in 0.05f64..20.0, t in 0.0f64..=1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let x = h(RenyiOrder::new(lo).unwrap(), t);
        let y = h(RenyiOrder::new(hi).unwrap(), t);
        prop_assert!(y <= x + 1e-14);
        prop_assert!(h(RenyiOrder::Infinity, t) <= y + 1e-14);
    }

    #[test]
    fn dilog_reflection(x in 0.001f64..0.999) {
        let lhs = dilog(x).unwrap() + dilog(1.0 - x).unwrap();
        let rhs = PI * PI / 6.0 - x.ln() * (1.0 - x).ln();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn dilog_inversion(x in 1.01f64..1e6) {
        let l = x.ln();
        let lhs = dilog(-x).unwrap() + dilog(-1.0 / x).unwrap();
        prop_assert!((lhs + PI * PI / 6.0 + 0.5 * l * l).abs() < 1e-11 * (1.0 + l * l));
    }

    #[test]
    fn entropy_complement_symmetry(values in unit_values(40), alpha in order()) {
        // 1 - (1 - v) makes both v and 1 - v exact; otherwise t^α near 0
        // amplifies the rounding of 1 - v for small α.
        let s = Spectrum::from_values(values.into_iter().map(|v| 1.0 - (1.0 - v)).collect());
        let a = renyi_entropy(&s, alpha);
        let b = renyi_entropy(&s.complement(), alpha);
        prop_assert!(a >= 0.0 && a <= s.len() as f64 * H_MAX + 1e-12);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn entropy_order_chain(values in unit_values(40)) {
        let s = Spectrum::from_values(values);
        let ladder = [0.2, 0.5, 1.0, 1.7, 3.0, f64::INFINITY];
        let e: Vec<f64> = ladder.iter().map(|&a| renyi_entropy(&s, RenyiOrder::new(a).unwrap())).collect();
        for w in e.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        prop_assert!(((-e[5]).exp() - s.largest_state_eigenvalue()).abs() < 1e-12);
    }

    #[test]
    fn tensor_trace_is_multiplicative(a in unit_values(12), b in unit_values(12)) {
        let (sa, sb) = (Spectrum::from_values(a), Spectrum::from_values(b));
        let t = tensor_spectrum(&sa, &sb);
        prop_assert_eq!(t.len(), sa.len() * sb.len());
        prop_assert!((t.trace() - sa.trace() * sb.trace()).abs() < 1e-12);
        prop_assert!(t.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn fit_recovers_exact_models(a in -2.0f64..2.0, b in -5.0f64..5.0, d in 1usize..=3) {
        let p = d as i32 - 1;
        let pts: Vec<(f64, f64)> = [10.0, 17.0, 30.0, 55.0, 100.0, 180.0]
            .iter()
            .map(|&l: &f64| (l, a * l.powi(p) * l.ln() + b * l.powi(p)))
            .collect();
        for w in [FitWeighting::Unit, FitWeighting::InverseArea] {
            let fit = fit_points(&pts, d, [1.0, 1e3], w).unwrap();
            let scale = 1.0 + a.abs() + b.abs();
            prop_assert!((fit.a - a).abs() < 1e-10 * scale);
            prop_assert!((fit.b - b).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn kernels_are_hermitian(iv in interval_union(), pts in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 1..30)) {
        let gamma = Domain::interval_union(&iv).unwrap();
        let k = FermiKernel::new(&gamma).unwrap();
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = pts.iter().map(|&(x, y)| (vec![x], vec![y])).collect();
        prop_assert!(is_hermitian_sample(&k, &pairs));
    }

    #[test]
    fn widom_j_scales_with_area(l in 1.5f64..4.0, w in 0.3f64..2.0, hgt in 0.3f64..2.0) {
        let gamma = Domain::cuboid(&[(-1.0, 0.7), (-0.4, 1.1)]).unwrap();
        let omega = Domain::cuboid(&[(0.0, w), (0.0, hgt)]).unwrap();
        let j1 = widom_j(&gamma, &omega, 32).unwrap().value;
        let jl = widom_j(&gamma, &omega.scaled(l).unwrap(), 32).unwrap().value;
        prop_assert!((jl - l * j1).abs() < 1e-12 * jl);

        let disk = Domain::ball(&[0.2, -0.1], 0.8).unwrap();
        let a = widom_j_quadrature(&disk, &omega, 128).unwrap().value;
        let b = widom_j_quadrature(&omega, &disk, 128).unwrap().value;
        prop_assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn surface_weights_sum_to_boundary(r in 0.2f64..3.0, res in 8usize..64) {
        for dom in [Domain::centered_ball(2, r).unwrap(), Domain::cuboid(&[(0.0, r), (0.0, 1.0), (-1.0, 0.5)]).unwrap()] {
            let q = surface_quadrature(&dom, res).unwrap();
            prop_assert!(q.weights.iter().all(|&w| w > 0.0));
            prop_assert!((q.total_weight() - dom.boundary_measure()).abs() < 1e-12 * dom.boundary_measure());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nystrom_trace_counts_particles(iv in interval_union(), lo in -2.0f64..2.0, len in 0.2f64..3.0, l in 1.0f64..8.0) {
        let gamma = Domain::interval_union(&iv).unwrap();
        let omega = Domain::interval(lo, lo + len).unwrap();
        let op = nystrom(&gamma, &omega, l, &NystromConfig::default()).unwrap();
        prop_assert_eq!(op.matrix.hermitian_defect(), 0.0);
        let expect = gamma.volume() / (2.0 * PI) * len * l;
        prop_assert!((op.matrix.trace() - expect).abs() < 1e-12 * (1.0 + expect));
    }
}
