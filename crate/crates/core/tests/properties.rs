//! Randomized invariants.

use donaldson_lab::destab;
use donaldson_lab::field::TwistedField;
use donaldson_lab::geometry::TorusGeometry;
use donaldson_lab::io;
use donaldson_lab::linalg;
use donaldson_lab::presets;
use donaldson_lab::series::{Coeff, Exact, TruncSeries};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn exact_series(n: usize, d: u32, terms: Vec<(Vec<u32>, i64, i64)>) -> TruncSeries<Exact> {
    let mut s = TruncSeries::zero(n, (1, 1), d);
    for (md, p, q) in terms {
        s.insert(md, vec![Exact::from_ratio(p, q)]);
    }
    s
}

fn terms(n: usize) -> impl Strategy<Value = Vec<(Vec<u32>, i64, i64)>> {
    prop::collection::vec((prop::collection::vec(0u32..3, 2 * n), -5i64..=5, 1i64..=4), 0..6)
}

/// Random Hermitian positive-definite `r×r` matrix `A A† + εI`.
fn positive(r: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), r * r).prop_map(move |v| {
        let a: Vec<C64> = v.into_iter().map(|(x, y)| C64::new(x, y)).collect();
        let mut h = linalg::mul_sq(&a, &linalg::adjoint(&a, r, r), r);
        for i in 0..r {
            h[i * r + i] += C64::new(0.05, 0.0);
        }
        h
    })
}

fn matrix(r: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), r * r)
        .prop_map(|v| v.into_iter().map(|(x, y)| C64::new(x, y)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dbar_obeys_leibniz(a in terms(2), b in terms(2), j in 0usize..2) {
        let (f, g) = (exact_series(2, 5, a), exact_series(2, 5, b));
        let lhs = f.try_mul(&g).unwrap().dbar(j);
        let rhs = f.dbar(j).try_mul(&g).unwrap().try_add(&f.try_mul(&g.dbar(j)).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs.truncate(4));
    }

    #[test]
    fn antiderivative_inverts_dbar(a in terms(2), j in 0usize..2) {
        let f = exact_series(2, 5, a);
        let back = f.zbar_antiderivative(j).dbar(j);
        prop_assert_eq!(back, f.truncate(4));
    }

    #[test]
    fn unipotent_inverse(a in terms(1)) {
        let mut f = exact_series(1, 6, a);
        // insert adds, so shift the constant term to exactly 1
        let c = f.coeff(&[0, 0])[0].clone();
        f.insert(vec![0, 0], vec![Exact::one() - c]);
        let inv = f.inverse().unwrap();
        prop_assert_eq!(f.try_mul(&inv).unwrap(), TruncSeries::identity(1, 1, 6));
    }

    #[test]
    fn adjoint_is_an_involution(a in terms(2)) {
        let f = exact_series(2, 5, a);
        prop_assert_eq!(f.adjoint().adjoint(), f);
    }

    #[test]
    fn uy_holds_pointwise(h in positive(3), a in matrix(3), b in matrix(3), sigma in 0.05f64..1.0) {
        // ∂₀h is only constrained to be a matrix; both sides are quadratic in it
        let (lhs, rhs) = destab::uy_sides(&h, &[a.clone(), b.clone()], 3, sigma, 1.0);
        prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12, "{} > {}", lhs, rhs);
        let (l1, r1) = destab::uy_sides(&h, &[a, b], 3, 1.0, 1.0);
        prop_assert!((l1 - r1).abs() <= 1e-12 * r1.max(1.0));
    }

    #[test]
    fn sigma_power_composes(seed in 0u64..1000, s in 0.1f64..0.9) {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let spec = presets::build("stable_extension_r2", &g, None, 0, None).unwrap();
        let h = presets::random_metric(&spec, seed, 0.7).unwrap().h;
        let a = destab::sigma_power(&destab::sigma_power(&h, s).unwrap(), 0.5).unwrap();
        let b = destab::sigma_power(&h, 0.5 * s).unwrap();
        prop_assert!(a.try_sub(&b).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn field_files_round_trip(seed in 0u64..1000, n in 1usize..=2) {
        let g = TorusGeometry::standard(n, 16).unwrap();
        let spec = presets::build("random_smooth", &g, Some(&[1, -1]), seed, Some(0.5)).unwrap();
        let f: &TwistedField = &spec.a()[0];
        prop_assert_eq!(&io::field_from_bytes(&io::field_to_bytes(f)).unwrap(), f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn subsheaf_slope_of_identity_is_bundle_slope(seed in 0u64..100, d0 in -2i64..=2, d1 in -2i64..=2) {
        let g = TorusGeometry::standard(1, 16).unwrap();
        let spec = presets::build("random_smooth", &g, Some(&[d0, d1]), seed, None).unwrap();
        let s = destab::slope_subsheaf(&spec, &spec.identity(), 2, None).unwrap();
        prop_assert!((s.mu - spec.slope()).abs() < 1e-12);
        prop_assert!((spec.slope() - (d0 + d1) as f64 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn energy_identity_holds_on_random_metrics(seed in 0u64..100) {
        let g = TorusGeometry::standard(1, 64).unwrap();
        let spec = presets::build("unstable_extension_r2", &g, None, seed, None).unwrap();
        let h = presets::random_metric(&spec, seed + 1, 0.3).unwrap();
        let e = destab::energy_identity(&spec, &h).unwrap();
        prop_assert!(e.defect < 1e-3 * e.gradient_side.abs().max(1.0), "{:?}", e);
    }
}
