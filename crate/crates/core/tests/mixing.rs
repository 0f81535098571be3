use proptest::prelude::*;
use std::f64::consts::PI;
use susflow_core::ceiling::{Harmonic, TrigPolynomial};
use susflow_core::mixing::{
    classify_residual, cobounding_potential, default_depth, default_tolerances,
    eigenfunction_check, tail_bound, unstable_slope, unstable_slope_with, SeriesMode, Verdict,
};

/// Ceilings whose harmonics include multiples of `ell`, so that several
/// levels of the series are active.
fn ceiling() -> impl Strategy<Value = TrigPolynomial> {
    (
        2u32..=3,
        1.0f64..1.5,
        prop::collection::vec((1u32..=9, -0.05f64..0.05, -0.05f64..0.05), 1..=3),
    )
        .prop_map(|(ell, mean, hs)| {
            let mut seen = Vec::new();
            let hs = hs
                .into_iter()
                .filter(|(k, _, _)| {
                    let fresh = !seen.contains(k);
                    seen.push(*k);
                    fresh
                })
                .map(|(k, c, s)| Harmonic::new(k, c, s))
                .collect();
            TrigPolynomial::new(ell, mean, hs).unwrap()
        })
}

/// Coboundaries `c + Psi(l x) - Psi(x)` with `Psi` of degree <= 3.
fn coboundary() -> impl Strategy<Value = (TrigPolynomial, Vec<Harmonic>)> {
    (
        2u32..=3,
        1.0f64..1.5,
        prop::collection::vec((-0.03f64..0.03, -0.03f64..0.03), 1..=3),
    )
        .prop_map(|(ell, c, hs)| {
            let psi: Vec<Harmonic> = hs
                .into_iter()
                .enumerate()
                .map(|(i, (a, b))| Harmonic::new(i as u32 + 1, a, b))
                .collect();
            (TrigPolynomial::coboundary(ell, c, &psi).unwrap(), psi)
        })
}

fn potential_deriv(psi: &[Harmonic], x: f64) -> f64 {
    psi.iter()
        .map(|h| {
            let w = 2.0 * PI * h.k as f64;
            w * (h.sin * (w * x).cos() - h.cos * (w * x).sin())
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn slope_series_has_zero_mean(f in ceiling()) {
        let depth = default_depth(f.ell());
        let r = cobounding_potential(&f, 256, depth, SeriesMode::Aliased).unwrap();
        prop_assert!(r.psi_mean.abs() <= r.tail_bound + 1e-10, "mean {}", r.psi_mean);
    }

    #[test]
    fn aliasing_matches_direct_summation(f in ceiling(), x in 0.0f64..1.0) {
        let depth = if f.ell() == 2 { 8 } else { 5 };
        let a = unstable_slope_with(&f, x, depth, SeriesMode::Aliased).unwrap();
        let d = unstable_slope_with(&f, x, depth, SeriesMode::Direct).unwrap();
        prop_assert!((a - d).abs() < 1e-11, "{a} vs {d}");
    }

    #[test]
    fn shift_keeps_series_and_moves_constant(f in ceiling(), kappa in 0.0f64..2.0) {
        let g = f.shifted(kappa).unwrap();
        let depth = default_depth(f.ell());
        let rf = cobounding_potential(&f, 256, depth, SeriesMode::Aliased).unwrap();
        let rg = cobounding_potential(&g, 256, depth, SeriesMode::Aliased).unwrap();
        prop_assert_eq!(&rf.psi, &rg.psi);
        prop_assert!((rg.c - rf.c - kappa).abs() < 1e-14);
    }

    #[test]
    fn coboundaries_satisfy_the_functional_equation((f, psi) in coboundary(), xs in prop::collection::vec(0.0f64..1.0, 100)) {
        let depth = default_depth(f.ell());
        let tail = tail_bound(&f, depth);
        for x in xs {
            let lhs = unstable_slope(&f, f.tau(x), depth).unwrap();
            let rhs = (f.deriv(x) + unstable_slope(&f, x, depth).unwrap()) / f.ell() as f64;
            prop_assert!((lhs - rhs).abs() <= 2.0 * tail + 1e-12, "{lhs} vs {rhs}");
            let exact = potential_deriv(&psi, x);
            prop_assert!((unstable_slope(&f, x, depth).unwrap() - exact).abs() <= tail + 1e-10);
        }
    }

    #[test]
    fn coboundaries_are_not_weakly_mixing((f, _psi) in coboundary()) {
        let depth = default_depth(f.ell());
        let r = cobounding_potential(&f, 1024, depth, SeriesMode::Aliased).unwrap();
        prop_assert!(r.residual_sup <= 1e-8, "residual {}", r.residual_sup);
        let (strict, clear) = default_tolerances(r.tail_bound);
        let v = classify_residual(r.residual_sup, strict, clear).unwrap();
        prop_assert_eq!(v.verdict, Verdict::NotWeaklyMixing);
        prop_assert!(v.caveat.is_none());
    }
}

#[test]
fn lone_harmonic_is_weakly_mixing() {
    // With k not divisible by l, every level of the series cancels exactly.
    for (ell, k) in [(2, 1), (2, 3), (3, 2)] {
        let f = TrigPolynomial::new(ell, 1.0, vec![Harmonic::new(k, 0.0, 0.2)]).unwrap();
        let r = cobounding_potential(&f, 1024, default_depth(ell), SeriesMode::Aliased).unwrap();
        assert!(r.psi.iter().all(|v| v.abs() <= 1e-10));
        assert!((r.residual_sup - 0.2).abs() <= 1e-6);
        let (strict, clear) = default_tolerances(r.tail_bound);
        assert_eq!(classify_residual(r.residual_sup, strict, clear).unwrap().verdict, Verdict::WeaklyMixing);
    }
}

#[test]
fn constant_ceiling_has_exact_eigenfunction() {
    let f = TrigPolynomial::constant(2, 1.0).unwrap();
    let r = cobounding_potential(&f, 256, default_depth(2), SeriesMode::Aliased).unwrap();
    assert!(r.residual_sup <= 1e-12);
    let defect = eigenfunction_check(&r, &f, &[0.3, 1.7, 4.25], 1e-6, 16, 4).unwrap();
    assert!(defect <= 1e-10, "defect {defect}");
}

#[test]
fn coboundary_eigenfunction_follows_the_flow() {
    let f = TrigPolynomial::coboundary(2, 1.0, &[Harmonic::new(1, 0.0, 0.05)]).unwrap();
    let r = cobounding_potential(&f, 4096, default_depth(2), SeriesMode::Aliased).unwrap();
    let defect = eigenfunction_check(&r, &f, &[0.5, 2.0, 7.3], 1e-6, 16, 4).unwrap();
    assert!(defect <= 1e-8, "defect {defect}");
}

#[test]
fn eigenfunction_check_requires_small_residual() {
    let f = TrigPolynomial::new(2, 1.0, vec![Harmonic::new(1, 0.0, 0.2)]).unwrap();
    let r = cobounding_potential(&f, 256, 12, SeriesMode::Aliased).unwrap();
    assert!(eigenfunction_check(&r, &f, &[1.0], 1e-6, 4, 2).is_err());
}
