//! The weak-mixing dichotomy through the unstable-slope series.
//!
//! If the unstable directions of all backward orbits agree, their slope
//! `psi` satisfies `psi(tau x) = (f'(x) + psi(x)) / l` and is given by the
//! series `psi(x) = sum_n sum_{tau^n y = x} l^-2n f'(y)`. Its antiderivative
//! `Psi` then solves `Psi(tau x) = Psi(x) + f(x) - c` with `c = int f`, and
//! `exp(2 pi i (Psi + s) / c)` is a flow eigenfunction. The sup-norm defect
//! of that cohomological equation decides the verdict.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::ceiling::{max_abs_derivative, wrap, TrigPolynomial};
use crate::dynamics::{flow_unchecked, FlowPoint};
use crate::error::{Error, Result};

/// Largest number of preimages allowed on one level of the series.
pub const MAX_LEVEL_POINTS: f64 = (1u64 << 24) as f64;

/// Attached to an inconclusive verdict: only additive cohomology with
/// eigenvalue parameter `2 pi / c` is tested.
pub const INCONCLUSIVE_CAVEAT: &str =
    "residual between tolerances; eigenfunctions with other frequency parameters are not tested";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    NotWeaklyMixing,
    WeaklyMixing,
    Inconclusive,
}

/// How the preimage sums of the series are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesMode {
    /// Closed form: the `l^n` preimages `(x + k) / l^n` are equally spaced,
    /// so a harmonic `e^(2 pi i j y)` sums to `l^n e^(2 pi i j x / l^n)` when
    /// `l^n` divides `j` and to zero otherwise.
    Aliased,
    /// Explicit summation over every preimage.
    Direct,
}

/// Default truncation depth: the largest `N` with `l^N <= 2^24`.
pub fn default_depth(ell: u32) -> u32 {
    (24.0 / (ell as f64).log2()).floor() as u32
}

fn check_depth(ell: u32, depth: u32) -> Result<()> {
    if depth == 0 {
        return Err(Error::invalid("series depth must be >= 1"));
    }
    if (ell as f64).powi(depth as i32) > MAX_LEVEL_POINTS {
        return Err(Error::resource(
            format!("{ell}^{depth} preimages per level exceed 2^24"),
            Some(default_depth(ell) as f64),
        ));
    }
    Ok(())
}

/// `max|f'| l^-N / (l - 1)`: bound on the neglected levels `n > N`.
pub fn tail_bound(f: &TrigPolynomial, depth: u32) -> f64 {
    let l = f.ell() as f64;
    max_abs_derivative(f) * l.powi(-(depth as i32)) / (l - 1.0)
}

/// `psi_N(x)`, the series truncated after `depth` levels.
pub fn unstable_slope(f: &TrigPolynomial, x: f64, depth: u32) -> Result<f64> {
    unstable_slope_with(f, x, depth, SeriesMode::Aliased)
}

pub fn unstable_slope_with(f: &TrigPolynomial, x: f64, depth: u32, mode: SeriesMode) -> Result<f64> {
    check_depth(f.ell(), depth)?;
    Ok(match mode {
        SeriesMode::Aliased => slope_aliased(f, x, depth),
        SeriesMode::Direct => slope_direct(f, x, depth),
    })
}

fn slope_aliased(f: &TrigPolynomial, x: f64, depth: u32) -> f64 {
    let ell = f.ell() as u64;
    let mut acc = 0.0;
    for h in f.harmonics() {
        // Level n contributes (2 pi j / l^n) times the phase-shifted harmonic
        // at frequency j / l^n, and only while l^n divides j.
        let mut m = 1u64;
        for _ in 0..depth {
            m *= ell;
            if !(h.k as u64).is_multiple_of(m) {
                break;
            }
            let q = (h.k as u64 / m) as f64;
            let arg = 2.0 * PI * wrap(q * x);
            let w = 2.0 * PI * h.k as f64 / m as f64;
            acc += w * (h.sin * arg.cos() - h.cos * arg.sin());
        }
    }
    acc
}

fn slope_direct(f: &TrigPolynomial, x: f64, depth: u32) -> f64 {
    let l = f.ell() as f64;
    let mut acc = 0.0;
    let mut m = 1.0;
    for _ in 0..depth {
        m *= l;
        let count = m as u64;
        let level: f64 = (0..count).map(|k| f.deriv((x + k as f64) / m)).sum();
        acc += level / (m * m);
    }
    acc
}

/// Sampled unstable slope, its antiderivative and the cocycle defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoboundaryReport {
    pub grid: usize,
    pub depth: u32,
    pub mode: SeriesMode,
    /// `psi_N(i / grid)`.
    pub psi: Vec<f64>,
    /// `Psi(i / grid)`, normalised by `Psi(0) = 0`.
    pub potential: Vec<f64>,
    pub c: f64,
    /// Grid mean of `psi` removed before integration.
    pub psi_mean: f64,
    pub tail_bound: f64,
    pub residual_sup: f64,
}

/// Samples `psi_N` on a uniform grid and integrates it spectrally.
/// The cocycle residual is filled in as well.
pub fn cobounding_potential(
    f: &TrigPolynomial,
    grid: usize,
    depth: u32,
    mode: SeriesMode,
) -> Result<CoboundaryReport> {
    if grid < 256 || !grid.is_power_of_two() {
        return Err(Error::invalid(format!("grid must be a power of 2 >= 256, got {grid}")));
    }
    check_depth(f.ell(), depth)?;
    let psi: Vec<f64> = (0..grid)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 / grid as f64;
            match mode {
                SeriesMode::Aliased => slope_aliased(f, x, depth),
                SeriesMode::Direct => slope_direct(f, x, depth),
            }
        })
        .collect();
    let psi_mean = psi.iter().sum::<f64>() / grid as f64;
    let potential = antiderivative(&psi);
    let mut report = CoboundaryReport {
        grid,
        depth,
        mode,
        psi,
        potential,
        c: f.mean_coeff(),
        psi_mean,
        tail_bound: tail_bound(f, depth),
        residual_sup: f64::NAN,
    };
    report.residual_sup = cocycle_residual(&report, f);
    Ok(report)
}

/// Periodic antiderivative of mean-removed samples through the FFT, with
/// the Nyquist mode dropped and the constant fixed by `Psi(0) = 0`.
fn antiderivative(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    buf[n / 2] = Complex64::new(0.0, 0.0);
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        if k == n / 2 {
            continue;
        }
        let freq = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
        *c /= Complex64::new(0.0, 2.0 * PI * freq);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let origin = buf[0].re;
    buf.iter().map(|c| (c.re - origin) / n as f64).collect()
}

/// Barycentric trigonometric interpolation of equispaced periodic samples
/// (even sample count), exact at the nodes.
pub fn trig_interpolate(samples: &[f64], x: f64) -> f64 {
    let n = samples.len();
    let pos = wrap(x) * n as f64;
    let nearest = pos.round();
    if (pos - nearest).abs() < 1e-13 {
        return samples[nearest as usize % n];
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, &v) in samples.iter().enumerate() {
        let half = PI * (pos - j as f64) / n as f64;
        let w = if j % 2 == 0 { 1.0 } else { -1.0 } / half.tan();
        num += w * v;
        den += w;
    }
    num / den
}

/// `max_i |Psi(tau x_i) - Psi(x_i) - f(x_i) + c|` over the report grid.
pub fn cocycle_residual(report: &CoboundaryReport, f: &TrigPolynomial) -> f64 {
    let n = report.grid;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 / n as f64;
            let image = trig_interpolate(&report.potential, f.tau(x));
            (image - report.potential[i] - f.value(x) + report.c).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Default tolerances: `tol_strict = 1e-6 + tail`, `tol_clear = 1e3 tol_strict`.
pub fn default_tolerances(tail: f64) -> (f64, f64) {
    let strict = 1e-6 + tail;
    (strict, 1e3 * strict)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub verdict: Verdict,
    pub residual: f64,
    pub tol_strict: f64,
    pub tol_clear: f64,
    pub caveat: Option<String>,
}

/// Classifies a residual against the two tolerances.
pub fn classify_residual(residual: f64, tol_strict: f64, tol_clear: f64) -> Result<VerdictRecord> {
    if !(tol_strict < tol_clear) {
        return Err(Error::invalid(format!(
            "tol_strict ({tol_strict}) must be below tol_clear ({tol_clear})"
        )));
    }
    let verdict = if residual <= tol_strict {
        Verdict::NotWeaklyMixing
    } else if residual >= tol_clear {
        Verdict::WeaklyMixing
    } else {
        Verdict::Inconclusive
    };
    Ok(VerdictRecord {
        verdict,
        residual,
        tol_strict,
        tol_clear,
        caveat: (verdict == Verdict::Inconclusive).then(|| INCONCLUSIVE_CAVEAT.to_string()),
    })
}

/// Full test at grid 4096 and the default depth.
pub fn weak_mixing_test(f: &TrigPolynomial, tol_strict: f64, tol_clear: f64) -> Result<VerdictRecord> {
    let report = cobounding_potential(f, 4096, default_depth(f.ell()), SeriesMode::Aliased)?;
    classify_residual(report.residual_sup, tol_strict, tol_clear)
}

/// `max |Phi(T^t z) - e^(2 pi i t / c) Phi(z)|` over an `nx * ns` grid of
/// `X_f` and the given times, with `Phi = exp(2 pi i (Psi(x) + s) / c)`.
pub fn eigenfunction_check(
    report: &CoboundaryReport,
    f: &TrigPolynomial,
    t_samples: &[f64],
    tol_strict: f64,
    nx: usize,
    ns: usize,
) -> Result<f64> {
    if !(report.residual_sup <= tol_strict) {
        return Err(Error::PreconditionViolation(format!(
            "cocycle residual {} exceeds {tol_strict}; no eigenfunction to check",
            report.residual_sup
        )));
    }
    if t_samples.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::invalid("times must be nonnegative"));
    }
    let freq = 2.0 * PI / report.c;
    let phi = |z: FlowPoint| {
        Complex64::from_polar(1.0, freq * (trig_interpolate(&report.potential, z.x) + z.s))
    };
    let points: Vec<FlowPoint> = (0..nx)
        .flat_map(|i| {
            let x = (i as f64 + 0.5) / nx as f64;
            let h = f.value(x);
            (0..ns).map(move |j| FlowPoint::new(x, h * (j as f64 + 0.5) / ns as f64))
        })
        .collect();
    let defect = points
        .par_iter()
        .map(|&z| {
            let base = phi(z);
            t_samples
                .iter()
                .map(|&t| {
                    let image = phi(flow_unchecked(f, z, t));
                    (image - Complex64::from_polar(1.0, freq * t) * base).norm()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(defect)
}
