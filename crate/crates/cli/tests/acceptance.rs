//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Tolerances are pinned as constants next to the checks that use
//! them.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use susflow_core::aniso::{
    aniso_norm, embedding_check, mask_to_cone, partition_defect, transversal_orthogonality,
    FrequencyCone, GridFunction2D, NormParams, Polarization, Support,
};
use susflow_core::ceiling::{classify, CeilingClass, Harmonic, TrigPolynomial};
use susflow_core::dynamics::{
    birkhoff, branch_point, visit_branches, FlowPoint, Word, DEFAULT_BRANCH_CAP,
};
use susflow_core::fit::exponent_fit;
use susflow_core::genericity::{
    bump_family, default_mu, default_window, g_matrix, jacobian, max_admissible_eps0,
    slope_clusters, GenericityParams, PerturbationFamily,
};
use susflow_core::mixing::{
    classify_residual, cobounding_potential, default_depth, default_tolerances,
    eigenfunction_check, SeriesMode, Verdict, VerdictRecord,
};
use susflow_core::spectral::{build_ulam, correlation, spectrum, BoxPartition, Observable};
use susflow_core::transversality::{
    lambda_min, m_of_t, m_rate, n_of_t, Grid, LambdaMethod, TransversalityEstimate,
};
use susflow_core::Error;

const CAP: usize = DEFAULT_BRANCH_CAP;

/// Outcome of one named check inside a criterion.
struct Check {
    what: String,
    ok: bool,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.0.push(Check { what: what.into(), ok });
    }
}

fn poly(ell: u32, mean: f64, hs: &[(u32, f64, f64)]) -> TrigPolynomial {
    let hs = hs.iter().map(|&(k, c, s)| Harmonic::new(k, c, s)).collect();
    TrigPolynomial::new(ell, mean, hs).unwrap()
}

fn sine() -> TrigPolynomial {
    poly(2, 1.0, &[(1, 0.0, 0.2)])
}

fn mixed() -> TrigPolynomial {
    poly(2, 1.0, &[(1, 0.0, 0.3), (2, 0.1, 0.0)])
}

/// `1 + 0.05 (sin 4 pi x - sin 2 pi x)`, cohomologous to 1 through
/// `Psi = 0.05 sin 2 pi x`.
fn coboundary() -> TrigPolynomial {
    TrigPolynomial::coboundary(2, 1.0, &[Harmonic::new(1, 0.0, 0.05)]).unwrap()
}

fn second_coboundary() -> TrigPolynomial {
    TrigPolynomial::coboundary(2, 1.0, &[Harmonic::new(1, 0.02, 0.03), Harmonic::new(2, 0.01, 0.0)])
        .unwrap()
}

fn generic_suite() -> Vec<(&'static str, TrigPolynomial)> {
    vec![("sine", sine()), ("mixed", mixed())]
}

fn class_of(f: &TrigPolynomial) -> CeilingClass {
    classify(f, 0.9, 4096).unwrap()
}

fn verdict(f: &TrigPolynomial, depth: u32) -> (VerdictRecord, susflow_core::mixing::CoboundaryReport) {
    let report = cobounding_potential(f, 4096, depth, SeriesMode::Aliased).unwrap();
    let (strict, clear) = default_tolerances(report.tail_bound);
    (classify_residual(report.residual_sup, strict, clear).unwrap(), report)
}

fn m_sweep(f: &TrigPolynomial, times: &[f64], nx: usize, ns: usize) -> Vec<TransversalityEstimate> {
    let class = class_of(f);
    times.iter().map(|&t| m_of_t(f, &class, t, nx, ns, false, CAP).unwrap()).collect()
}

/// `(slope, 1/E)` of every inverse branch at `z`, found by scanning all
/// words up to the deepest level any branch can reach.
fn branches_by_words(f: &TrigPolynomial, z: FlowPoint, t: f64) -> Vec<(f64, f64)> {
    let f_min = (0..4096).map(|i| f.value(i as f64 / 4096.0)).fold(f64::INFINITY, f64::min);
    let deficit = t - z.s;
    if deficit <= 0.0 {
        return vec![(0.0, 1.0)];
    }
    let l = f.ell() as f64;
    let max_level = (deficit / f_min).ceil() as usize + 1;
    let mut out = Vec::new();
    for n in 1..=max_level {
        for w in Word::all(n, f.ell()) {
            let (mut y, mut sum, mut last) = (z.x, 0.0, 0.0);
            for &a in w.letters() {
                y = (y + (a - 1) as f64) / l;
                last = f.value(y);
                sum += last;
            }
            if sum >= deficit && sum - last < deficit {
                out.push((birkhoff(f, &w, z.x, 1).unwrap(), l.powi(-(n as i32))));
            }
        }
    }
    out
}

/// `max_w sum_{zeta : cones meet} 1/E(zeta)` by a pairwise scan.
fn m_oracle(branches: &[(f64, f64)], theta: f64) -> f64 {
    branches
        .iter()
        .map(|&(sw, ww)| {
            branches
                .iter()
                .filter(|&&(sz, wz)| (sz - sw).abs() <= theta * (wz + ww))
                .map(|&(_, wz)| wz)
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn criterion_1() -> Checks {
    const TOL: f64 = 1e-10;
    const CASES: usize = 100;
    const MAX_BRANCHES: usize = 1 << 16;
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut accepted, mut most) = (0.0f64, 0, 0);
    while accepted < CASES {
        let ell = rng.random_range(2..=3u32);
        let hs: Vec<(u32, f64, f64)> = (1..=rng.random_range(0..=3u32))
            .map(|k| (k, rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
            .collect();
        let f = poly(ell, rng.random_range(0.9..1.4), &hs);
        let x: f64 = rng.random_range(0.0..1.0);
        let z = FlowPoint::new(x, rng.random_range(0.0..0.999) * f.value(x));
        let t = rng.random_range(0.0..10.0);
        let mut sum = 0.0;
        let l = ell as f64;
        match visit_branches(&f, z, t, MAX_BRANCHES, |leaf| sum += l.powi(-(leaf.level as i32))) {
            Ok(count) => {
                worst = worst.max((sum - 1.0).abs());
                most = most.max(count);
                accepted += 1;
            }
            Err(Error::ResourceLimit { .. }) => continue,
            Err(e) => panic!("{e}"),
        }
    }
    c.check(worst <= TOL, format!("max |sum 1/E - 1| = {worst:.1e} over {CASES} cases (largest {most} branches)"));
    c
}

fn criterion_2() -> Checks {
    let mut c = Checks::default();
    let f = TrigPolynomial::constant(2, 1.0).unwrap();
    for est in m_sweep(&f, &[2.5, 4.2, 8.0], 16, 4) {
        c.check(est.m_value == 1.0, format!("m(f,{}) = {}", est.t, est.m_value));
    }
    let lambda = lambda_min(&f, LambdaMethod::Periodic, 1.0, 16, 4).unwrap().value;
    c.check(lambda == 2.0, format!("lambda_min = {lambda}"));
    let (v, report) = verdict(&f, default_depth(2));
    c.check(v.verdict == Verdict::NotWeaklyMixing, format!("verdict {:?}", v.verdict));
    c.check(v.residual <= 1e-12, format!("residual {:.1e}", v.residual));
    let defect = eigenfunction_check(&report, &f, &[0.5, 2.0, 7.3], v.tol_strict, 16, 4).unwrap();
    c.check(defect <= 1e-10, format!("eigenfunction defect {defect:.1e}"));
    c
}

fn criterion_3() -> Checks {
    const PSI_SLACK: f64 = 1e-8;
    const RESIDUAL_TOL: f64 = 1e-8;
    let mut c = Checks::default();
    let f = coboundary();
    let closed = |x: f64| 1.0 + 0.05 * ((4.0 * PI * x).sin() - (2.0 * PI * x).sin());
    let form_err = (0..1000).map(|i| i as f64 / 1000.0).map(|x| (f.value(x) - closed(x)).abs()).fold(0.0, f64::max);
    c.check(form_err <= 1e-15, format!("ceiling matches closed form within {form_err:.1e}"));

    let (v, report) = verdict(&f, 24);
    let psi_err = report
        .psi
        .iter()
        .enumerate()
        .map(|(i, p)| (p - 0.1 * PI * (2.0 * PI * i as f64 / report.grid as f64).cos()).abs())
        .fold(0.0, f64::max);
    let bound = report.tail_bound + PSI_SLACK;
    c.check(report.grid == 4096 && psi_err <= bound, format!("|psi - Psi'| = {psi_err:.1e} <= {bound:.1e}"));
    c.check(v.residual <= RESIDUAL_TOL, format!("residual {:.1e}", v.residual));
    c.check(v.verdict == Verdict::NotWeaklyMixing, format!("verdict {:?}", v.verdict));

    let obs = Observable::Cutoff(Box::new(Observable::CosS(1)));
    let times: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
    let curve = correlation(&f, &obs, &obs, &times, 256, 32).unwrap();
    let (early, late) = (curve.window_max(0.0, 2.0), curve.window_max(8.0, 10.0));
    c.check(late >= 0.5 * early, format!("late max {late:.4} vs early max {early:.4}"));
    c
}

fn criterion_4() -> Checks {
    const PSI_TOL: f64 = 1e-10;
    const RESIDUAL_TOL: f64 = 1e-6;
    let mut c = Checks::default();
    let f = sine();
    let (v, report) = verdict(&f, default_depth(2));
    let psi_max = report.psi.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    c.check(psi_max <= PSI_TOL, format!("max |psi| = {psi_max:.1e}"));
    c.check((v.residual - 0.2).abs() <= RESIDUAL_TOL, format!("residual {}", v.residual));
    c.check(v.verdict == Verdict::WeaklyMixing, format!("verdict {:?}", v.verdict));

    // Exhaustive oracle at t = 4 on the 32 x 4 grid, pinned at 3/4.
    let class = class_of(&f);
    let (nx, ns, t) = (32, 4, 4.0);
    let mut oracle = 0.0f64;
    for i in 0..nx {
        let x = i as f64 / nx as f64;
        for j in 0..ns {
            let z = FlowPoint::new(x, f.value(x) * j as f64 / ns as f64);
            oracle = oracle.max(m_oracle(&branches_by_words(&f, z, t), class.theta_f));
        }
    }
    let est = m_of_t(&f, &class, t, nx, ns, false, CAP).unwrap();
    c.check(
        est.m_value == oracle && oracle == 0.75 && est.m_value < 1.0,
        format!("m(f,4) = {} (oracle {oracle})", est.m_value),
    );
    let rate = m_rate(&m_sweep(&f, &[2.0, 4.0, 6.0, 8.0], nx, ns)).unwrap();
    c.check(rate < 1.0, format!("fitted m-rate {rate:.5}"));
    c
}

fn criterion_5() -> Checks {
    const RATE_THRESHOLD: f64 = 0.99;
    let mut c = Checks::default();
    let suite = [
        ("constant l=2", TrigPolynomial::constant(2, 1.0).unwrap()),
        ("constant l=3", TrigPolynomial::constant(3, 0.7).unwrap()),
        ("coboundary A", coboundary()),
        ("coboundary B", second_coboundary()),
        ("sine", sine()),
        ("mixed", mixed()),
    ];
    for (name, f) in suite {
        let (v, _) = verdict(&f, default_depth(f.ell()));
        let rate = m_rate(&m_sweep(&f, &[2.0, 4.0, 6.0, 8.0], 16, 4)).unwrap();
        let agree = (rate >= RATE_THRESHOLD) == (v.verdict == Verdict::NotWeaklyMixing)
            && v.verdict != Verdict::Inconclusive;
        c.check(agree, format!("{name}: rate {rate:.4}, {:?}", v.verdict));
    }
    c
}

fn criterion_6() -> Checks {
    // The inequality holds between suprema; grid maxima differ from them
    // only by the rounding allowed here.
    const SLACK: f64 = 1e-9;
    let mut c = Checks::default();
    for (name, f) in generic_suite() {
        let class = class_of(&f);
        let (a, b) = (class.f_min, class.f_max);
        for t in [4.0, 6.0] {
            let s = (b / a) * t + b;
            let m = m_of_t(&f, &class, s, 16, 4, false, CAP).unwrap().m_value;
            let n = n_of_t(&f, &class, t, Grid::new(16, 4, 16), CAP).unwrap();
            c.check(m <= n + SLACK, format!("{name}: m(f,{s:.3}) = {m:.5} <= n(f,{t}) = {n:.5}"));
        }
    }
    c
}

fn criterion_7() -> Checks {
    const LEADING_TOL: f64 = 1e-2;
    let mut c = Checks::default();
    let builds = [
        ("constant", TrigPolynomial::constant(2, 1.0).unwrap(), 1.0, 32, 1, 64),
        ("sine t=1", sine(), 1.0, 32, 4, 32),
        ("sine t=4", sine(), 4.0, 64, 8, 64),
        ("mixed t=2", mixed(), 2.0, 32, 4, 32),
        ("coboundary t=1.5", coboundary(), 1.5, 32, 4, 32),
    ];
    for (name, f, t, nx, ns, ppb) in builds {
        let op = build_ulam(&f, t, BoxPartition::new(nx, ns).unwrap(), ppb, None).unwrap();
        let lead = spectrum(&op, 4).unwrap().eigenvalues[0];
        let dist = (lead[0] - 1.0).hypot(lead[1]);
        c.check(dist <= LEADING_TOL, format!("{name}: |lambda_1 - 1| = {dist:.1e}"));
    }

    let f = TrigPolynomial::constant(2, 1.0).unwrap();
    let (nx, ppb) = (32, 64);
    let m = build_ulam(&f, 1.0, BoxPartition::new(nx, 1).unwrap(), ppb, None).unwrap().to_dense();
    let tol = 2.0 / (ppb as f64).sqrt();
    let mut worst = 0.0f64;
    for j in 0..nx {
        for i in 0..nx {
            let expected = if i == (2 * j) % nx || i == (2 * j + 1) % nx { 0.5 } else { 0.0 };
            worst = worst.max((m[(i, j)] - expected).abs());
        }
    }
    c.check(worst <= tol, format!("doubling matrix max deviation {worst:.1e} <= {tol}"));
    c
}

type Packet = (f64, f64, f64, i32, i32, f64);

fn random_packets(rng: &mut ChaCha8Rng) -> Vec<Packet> {
    (0..rng.random_range(1..=4))
        .map(|_| {
            (
                rng.random_range(0.8 * PI..1.2 * PI),
                rng.random_range(0.8 * PI..1.2 * PI),
                rng.random_range(0.1 * PI..0.25 * PI),
                rng.random_range(-12..=12),
                rng.random_range(-12..=12),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect()
}

fn sample(p: &[Packet], n: usize) -> GridFunction2D {
    GridFunction2D::from_fn(n, Support::Central, |x, y| {
        p.iter()
            .map(|&(cx, cy, r, kx, ky, a)| {
                let q = ((x - cx).powi(2) + (y - cy).powi(2)) / (r * r);
                if q >= 1.0 {
                    0.0
                } else {
                    a * (-1.0 / (1.0 - q)).exp() * (kx as f64 * x + ky as f64 * y).cos()
                }
            })
            .sum()
    })
    .unwrap()
}

fn criterion_8() -> Checks {
    const PARTITION_TOL: f64 = 1e-12;
    const ORTHOGONALITY_TOL: f64 = 1e-12;
    const FUNCTIONS: usize = 100;
    let mut c = Checks::default();
    let polarizations = [(0.5, 2.0), (0.1, 5.0), (0.9, 1.2)]
        .map(|(a, b)| Polarization::new(FrequencyCone::new(-a, a), FrequencyCone::new(b, -b)).unwrap());
    let mut worst = 0.0f64;
    for theta in &polarizations {
        for k in 3..=7 {
            worst = worst.max(partition_defect(theta, 1 << k).unwrap());
        }
    }
    c.check(worst <= PARTITION_TOL, format!("partition defect {worst:.1e}"));

    let theta = &polarizations[0];
    let weak = NormParams::weak(0.25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut ratio_max, mut weak_ok, mut done) = (0.0f64, true, 0);
    while done < FUNCTIONS {
        let u = sample(&random_packets(&mut rng), 32);
        if u.l2_norm() <= 1e-8 {
            continue;
        }
        ratio_max = ratio_max.max(embedding_check(&u, theta).unwrap());
        let strong = aniso_norm(&u, theta, NormParams::strong()).unwrap().total;
        weak_ok &= aniso_norm(&u, theta, weak).unwrap().total <= strong;
        done += 1;
    }
    c.check(ratio_max <= 6f64.sqrt(), format!("embedding ratio max {ratio_max:.4} over {FUNCTIONS}"));
    c.check(weak_ok, "weak norm <= strong norm on every test function");

    let (horizontal, vertical) = (FrequencyCone::new(-0.4, 0.4), FrequencyCone::new(2.5, -2.5));
    let mut pairing_max = 0.0f64;
    for _ in 0..20 {
        let u = mask_to_cone(&sample(&random_packets(&mut rng), 32), &horizontal);
        let v = mask_to_cone(&sample(&random_packets(&mut rng), 32), &vertical);
        pairing_max = pairing_max.max(transversal_orthogonality(&u, &v, theta, &horizontal, &vertical).unwrap());
    }
    c.check(pairing_max <= ORTHOGONALITY_TOL, format!("transversal pairing {pairing_max:.1e}"));
    c
}

/// Largest number of values inside any window `[v, v + w]`.
fn cluster_oracle(mut values: Vec<f64>, w: f64) -> usize {
    values.sort_by(f64::total_cmp);
    (0..values.len())
        .map(|i| values[i..].iter().take_while(|&&v| v <= values[i] + w).count())
        .max()
        .unwrap_or(0)
}

fn criterion_9() -> Checks {
    // Required gap between the fitted cluster growth rate and l.
    const GROWTH_GAP: f64 = 0.25;
    let mut c = Checks::default();

    let params = GenericityParams::new(3, 2.9, 2.8, 2.2, 3, 3).unwrap();
    let mu = params.default_mu();
    let y = 0.3;
    let fam = bump_family(3, y, 3, 0.5 * max_admissible_eps0(3, y, 3, mu), mu).unwrap();
    let pf = PerturbationFamily::new(TrigPolynomial::constant(3, 1.0).unwrap(), fam.doubled(), 1.0).unwrap();
    let subset: Vec<usize> = (0..16).map(|i| (i * 5) % 27).collect();
    let maximal = fam.select_maximal(&subset, params.p + 1).unwrap();
    let mut jac_min = f64::INFINITY;
    for k in 0..20u64 {
        let x = y + fam.eps0 / 3.0 * (k as f64 / 19.0 * 1.8 - 0.9);
        let suffix = Word::from_index(k * 7, 5, 3);
        let sigma: Vec<Word> = maximal.iter().map(|&i| fam.words[i].concat(&suffix)).collect();
        jac_min = jac_min.min(jacobian(&g_matrix(x, &sigma, &pf).unwrap()).unwrap());
    }
    c.check(jac_min >= 1.0, format!("min Jac over 20 x = {jac_min:.4}"));

    let mu2 = default_mu(2, 3, 2);
    let fam2 = bump_family(2, 0.3, 3, 0.5 * max_admissible_eps0(2, 0.3, 3, mu2), mu2).unwrap();
    let sigma: Vec<Word> = (0..3).map(|i| Word::from_index(i * 11, 6, 2)).collect();
    let on_const = PerturbationFamily::new(TrigPolynomial::constant(2, 1.0).unwrap(), fam2.bumps.clone(), 0.01).unwrap();
    let on_mixed = PerturbationFamily::new(mixed(), fam2.bumps.clone(), 0.01).unwrap();
    let same = [0.1, 0.3, 0.77]
        .iter()
        .all(|&x| g_matrix(x, &sigma, &on_const).unwrap() == g_matrix(x, &sigma, &on_mixed).unwrap());
    c.check(same, "g_matrix identical over two base ceilings");

    let mut complete = true;
    for (ell, ns) in [(2u32, 6..=12usize), (3, 4..=8)] {
        let f = TrigPolynomial::constant(ell, 1.0).unwrap();
        let theta_k = classify(&f, 0.9, 1024).unwrap().theta_k;
        for n in ns {
            let r = slope_clusters(&f, n, &Word::from_index(1, n, ell), default_window(theta_k, ell, n)).unwrap();
            complete &= r.max_cluster == (ell as usize).pow(n as u32);
        }
    }
    c.check(complete, "f = 1 clusters equal l^n");

    let pinned: [(&str, [usize; 9]); 2] = [
        ("sine", [64, 128, 256, 382, 512, 798, 972, 1334, 1722]),
        ("mixed", [64, 128, 256, 512, 840, 1024, 1624, 2304, 3177]),
    ];
    for ((name, f), (_, expected)) in generic_suite().into_iter().zip(pinned) {
        let theta_k = class_of(&f).theta_k;
        let mut sizes = Vec::new();
        let mut matches = true;
        for (i, n) in (6..=14usize).enumerate() {
            let word = Word::from_index(0, n, 2);
            let window = default_window(theta_k, 2, n);
            let x_c = branch_point(2, &word, 0.0);
            let slopes: Vec<f64> = Word::all(n, 2).map(|w| birkhoff(&f, &w, x_c, 1).unwrap()).collect();
            let size = slope_clusters(&f, n, &word, window).unwrap().max_cluster;
            matches &= size == cluster_oracle(slopes, window) && size == expected[i];
            sizes.push((n as f64, size as f64));
        }
        c.check(matches, format!("{name}: clusters match oracle and pinned values"));
        let growth: Vec<f64> = sizes.iter().map(|&(n, m)| m.powf(1.0 / n)).collect();
        let monotone = growth.windows(2).all(|g| g[1] <= g[0]);
        let rate = exponent_fit(&sizes).unwrap().rate;
        let last = growth[growth.len() - 1];
        c.check(
            monotone && rate <= 2.0 - GROWTH_GAP && last < 2.0,
            format!("{name}: fitted growth {rate:.4}, max_cluster^(1/n) at n=14 {last:.4}"),
        );
    }
    c
}

fn criterion_10() -> Checks {
    let mut c = Checks::default();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    for path in files {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let text = std::fs::read_to_string(&path).unwrap();
        let cfg = susflow_cli::parse_toml(&text).unwrap();
        if !cfg.deterministic {
            continue;
        }
        let subcommand = name.split('_').next().unwrap().trim_end_matches(".toml");
        let run = |workers: &str| {
            let out = Command::new(env!("CARGO_BIN_EXE_susflow"))
                .args([subcommand, "-c", path.to_str().unwrap()])
                .env("SUSFLOW_WORKERS", workers)
                .output()
                .unwrap();
            assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
            out.stdout
        };
        let (a, b, w3) = (run("1"), run("1"), run("3"));
        c.check(a == b && a == w3 && !a.is_empty(), format!("{name}: identical bytes over runs and 1/3 workers"));
    }
    c
}

type Criterion = fn() -> Checks;

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("branch-sum identity", criterion_1),
        ("constant ceiling", criterion_2),
        ("coboundary round-trip", criterion_3),
        ("weakly mixing example", criterion_4),
        ("dichotomy consistency", criterion_5),
        ("cross-bound", criterion_6),
        ("Ulam sanity", criterion_7),
        ("anisotropic norms", criterion_8),
        ("genericity", criterion_9),
        ("determinism", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let checks = catch_unwind(AssertUnwindSafe(run));
        let (ok, details) = match checks {
            Ok(Checks(list)) => (
                list.iter().all(|c| c.ok),
                list.into_iter()
                    .map(|c| format!("    [{}] {}", if c.ok { "ok" } else { "FAIL" }, c.what))
                    .collect::<Vec<_>>(),
            ),
            Err(_) => (false, vec!["    [FAIL] panicked".to_string()]),
        };
        println!("{} {label}", if ok { "PASS" } else { "FAIL" });
        for d in details {
            println!("{d}");
        }
        failed += usize::from(!ok);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
