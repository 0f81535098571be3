use proptest::prelude::*;
use std::collections::BTreeSet;
use std::f64::consts::PI;
use susflow_core::ceiling::{classify, wrap, Harmonic, TrigPolynomial};
use susflow_core::dynamics::{
    birkhoff, branch_point, flow_count, inverse_branches, time_t_map, FlowPoint, Word,
};

/// Positive ceilings with `ell` in {2, 3} and up to three small harmonics.
fn ceiling() -> impl Strategy<Value = TrigPolynomial> {
    (
        2u32..=3,
        0.8f64..1.5,
        prop::collection::vec((-0.1f64..0.1, -0.1f64..0.1), 0..=3),
    )
        .prop_map(|(ell, mean, hs)| {
            let hs = hs
                .into_iter()
                .enumerate()
                .map(|(i, (c, s))| Harmonic::new(i as u32 + 1, c, s))
                .collect();
            TrigPolynomial::new(ell, mean, hs).unwrap()
        })
}

/// Forward flow by explicit roof crossings.
fn flow_oracle(f: &TrigPolynomial, x: f64, s: f64, t: f64) -> (f64, f64, usize) {
    let (mut x, mut s, mut n) = (x, s + t, 0);
    while s >= f.value(x) {
        s -= f.value(x);
        x = wrap(f.ell() as f64 * x);
        n += 1;
    }
    (x, s, n)
}

/// Inverse branches by enumerating every word up to the deepest possible level.
fn branch_oracle(f: &TrigPolynomial, z: FlowPoint, t: f64) -> BTreeSet<Vec<u8>> {
    let f_min = (0..4096)
        .map(|i| f.value(i as f64 / 4096.0))
        .fold(f64::INFINITY, f64::min);
    let deficit = t - z.s;
    let max_level = (deficit / f_min).ceil().max(0.0) as usize + 1;
    let mut out = BTreeSet::new();
    if deficit <= 0.0 {
        out.insert(Vec::new());
        return out;
    }
    for n in 1..=max_level {
        for w in Word::all(n, f.ell()) {
            let mut y = z.x;
            let mut sum = 0.0;
            let mut last = 0.0;
            for &a in w.letters() {
                y = (y + (a - 1) as f64) / f.ell() as f64;
                last = f.value(y);
                sum += last;
            }
            if sum >= deficit && sum - last < deficit {
                out.insert(w.letters().to_vec());
            }
        }
    }
    out
}

fn interior_point(f: &TrigPolynomial, x: f64, frac: f64) -> FlowPoint {
    FlowPoint::new(x, frac * f.value(x))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn semigroup(f in ceiling(), x in 0.0f64..1.0, frac in 0.05f64..0.95, t1 in 0.0f64..4.0, t2 in 0.0f64..4.0) {
        let z = interior_point(&f, x, frac);
        let mid = time_t_map(&f, z, t1).unwrap();
        // Skip points that sit on a roof crossing at exactly t1.
        prop_assume!(mid.s > 1e-6 && f.value(mid.x) - mid.s > 1e-6);
        let two = time_t_map(&f, mid, t2).unwrap();
        let one = time_t_map(&f, z, t1 + t2).unwrap();
        prop_assert!((two.x - one.x).abs() < 1e-9, "{two:?} vs {one:?}");
        prop_assert!((two.s - one.s).abs() < 1e-9, "{two:?} vs {one:?}");
    }

    #[test]
    fn flow_matches_crossing_oracle(f in ceiling(), x in 0.0f64..1.0, frac in 0.0f64..0.99, t in 0.0f64..6.0) {
        let z = interior_point(&f, x, frac);
        let (ox, os, on) = flow_oracle(&f, z.x, z.s, t);
        let w = time_t_map(&f, z, t).unwrap();
        prop_assert!((w.x - ox).abs() < 1e-12 && (w.s - os).abs() < 1e-12);
        prop_assert_eq!(flow_count(&f, z.x, z.s + t), on);
    }

    #[test]
    fn branches_sum_to_one_and_bound_slopes(f in ceiling(), x in 0.0f64..1.0, frac in 0.0f64..0.99, t in 0.0f64..5.0) {
        let z = interior_point(&f, x, frac);
        let theta = 0.7;
        let branches = inverse_branches(&f, z, t, theta, 1 << 16).unwrap();
        let total: f64 = branches.iter().map(|b| 1.0 / b.expansion).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10, "sum 1/E = {total}");
        let class = classify(&f, 0.9, 1024).unwrap();
        let bound = class.max_abs_deriv / (f.ell() as f64 - 1.0);
        for b in &branches {
            prop_assert!(b.slope.abs() <= bound * (1.0 + 1e-12) + 1e-15);
            prop_assert_eq!(b.cone.half_width, theta * (f.ell() as f64).powi(-(b.level as i32)));
            let fwd = time_t_map(&f, b.preimage, t).unwrap();
            prop_assert!(
                susflow_core::dynamics::circle_dist(fwd.x, z.x) < 1e-9 && (fwd.s - z.s).abs() < 1e-9,
                "branch {} maps to {fwd:?}, not {z:?}", b.word
            );
        }
    }

    #[test]
    fn coboundary_slopes_telescope(
        c in 0.9f64..1.2,
        p1 in -0.05f64..0.05,
        q1 in -0.05f64..0.05,
        p2 in -0.02f64..0.02,
        x in 0.0f64..1.0,
        idx in 0u64..256,
        n in 1usize..=8,
    ) {
        let ell = 2;
        let potential = [Harmonic::new(1, p1, q1), Harmonic::new(2, p2, 0.0)];
        let f = TrigPolynomial::coboundary(ell, c, &potential).unwrap();
        let dpsi = |y: f64| {
            potential
                .iter()
                .map(|h| {
                    let w = 2.0 * PI * h.k as f64;
                    w * (h.sin * (w * y).cos() - h.cos * (w * y).sin())
                })
                .sum::<f64>()
        };
        let word = Word::from_index(idx % (1 << n), n, ell);
        let slope = birkhoff(&f, &word, x, 1).unwrap();
        let expected = dpsi(x) - 0.5f64.powi(n as i32) * dpsi(branch_point(ell, &word, x));
        prop_assert!((slope - expected).abs() < 1e-9, "{slope} vs {expected}");
    }
}

#[test]
fn branches_match_exhaustive_enumeration() {
    let cases = [
        (TrigPolynomial::new(2, 1.0, vec![Harmonic::new(1, 0.0, 0.2)]).unwrap(), 0.37, 0.4, 4.3),
        (TrigPolynomial::new(3, 1.1, vec![Harmonic::new(2, 0.1, -0.05)]).unwrap(), 0.81, 0.2, 3.1),
        (TrigPolynomial::constant(2, 1.0).unwrap(), 0.25, 0.5, 2.5),
    ];
    for (f, x, s, t) in cases {
        let z = FlowPoint::new(x, s);
        let got: BTreeSet<Vec<u8>> = inverse_branches(&f, z, t, 0.0, 1 << 20)
            .unwrap()
            .into_iter()
            .map(|b| b.word.letters().to_vec())
            .collect();
        assert_eq!(got, branch_oracle(&f, z, t), "f = {}", f.descriptor());
    }
}

#[test]
fn branches_come_out_in_word_order() {
    let f = TrigPolynomial::new(2, 1.0, vec![Harmonic::new(1, 0.0, 0.2)]).unwrap();
    let words: Vec<Word> = inverse_branches(&f, FlowPoint::new(0.1, 0.3), 6.0, 1.0, 1 << 20)
        .unwrap()
        .into_iter()
        .map(|b| b.word)
        .collect();
    let mut sorted = words.clone();
    sorted.sort();
    assert_eq!(words, sorted);
}

#[test]
fn branch_cap_reports_admissible_time() {
    let f = TrigPolynomial::constant(2, 1.0).unwrap();
    let err = inverse_branches(&f, FlowPoint::new(0.3, 0.0), 30.0, 1.0, 1 << 10).unwrap_err();
    match err {
        susflow_core::error::Error::ResourceLimit { admissible: Some(t), .. } => {
            assert_eq!(t, 10.0);
            assert!(inverse_branches(&f, FlowPoint::new(0.3, 0.0), t, 1.0, 1 << 10).is_ok());
        }
        other => panic!("unexpected {other:?}"),
    }
}
