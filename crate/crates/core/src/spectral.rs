//! Ulam discretisation of the transfer operator, its discretized spectrum,
//! and correlation curves by direct quadrature.
//!
//! Boxes tile `X_f` in normalised coordinates `(x, s / f(x))`: `nx` columns
//! in `x`, each split into `ns` equal height fractions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ceiling::TrigPolynomial;
use crate::dynamics::{flow_unchecked, FlowPoint};
use crate::error::{Error, Result};
use crate::fit::{exponent_fit, RateFit};
use crate::smooth::step;
use crate::transversality::TransversalityEstimate;

/// Caveat carried by every spectrum report.
pub const SPECTRUM_CAVEAT: &str = "discretized spectrum";

pub const MAX_BOXES: usize = 1 << 16;

/// Matrices up to this size are diagonalised densely.
pub const DENSE_LIMIT: usize = 1024;

pub const MAX_EIGENVALUES: usize = 32;

/// Fractional part of the golden ratio.
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// `nx` columns by `ns` height slices of `X_f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxPartition {
    pub nx: usize,
    pub ns: usize,
}

impl BoxPartition {
    pub fn new(nx: usize, ns: usize) -> Result<Self> {
        if nx == 0 || ns == 0 {
            return Err(Error::invalid("box counts must be positive"));
        }
        if nx.saturating_mul(ns) > MAX_BOXES {
            return Err(Error::resource(
                format!("{nx} x {ns} boxes exceed {MAX_BOXES}"),
                Some(MAX_BOXES as f64),
            ));
        }
        Ok(BoxPartition { nx, ns })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ns
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Box index `i * ns + j` of a point of `X_f`.
    pub fn locate(&self, f: &TrigPolynomial, z: FlowPoint) -> usize {
        let i = ((z.x * self.nx as f64) as usize).min(self.nx - 1);
        let u = z.s / f.value(z.x);
        let j = ((u * self.ns as f64) as usize).min(self.ns - 1);
        i * self.ns + j
    }

    /// Lebesgue measure of every box, from the exact integral of `f` over
    /// each column.
    pub fn measures(&self, f: &TrigPolynomial) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            let a = i as f64 / self.nx as f64;
            let b = (i + 1) as f64 / self.nx as f64;
            let col = integral(f, a, b) / self.ns as f64;
            out.extend(std::iter::repeat_n(col, self.ns));
        }
        out
    }
}

/// `int_a^b f`.
pub fn integral(f: &TrigPolynomial, a: f64, b: f64) -> f64 {
    let mut acc = f.mean_coeff() * (b - a);
    for h in f.harmonics() {
        let w = 2.0 * PI * h.k as f64;
        acc += h.cos * ((w * b).sin() - (w * a).sin()) / w;
        acc -= h.sin * ((w * b).cos() - (w * a).cos()) / w;
    }
    acc
}

/// Column-stochastic transition matrix between boxes, stored by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlamOperator {
    pub partition: BoxPartition,
    pub t: f64,
    pub points_per_box: usize,
    pub seed: Option<u64>,
    pub descriptor: String,
    /// `columns[j]` lists `(i, P_ij)` with `i` ascending.
    pub columns: Vec<Vec<(u32, f64)>>,
}

impl UlamOperator {
    pub fn dim(&self) -> usize {
        self.partition.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                m[(i as usize, j)] = v;
            }
        }
        m
    }

    /// `P v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, p) in col {
                out[i as usize] += p * v[j];
            }
        }
        out
    }

    fn apply_complex(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, p) in col {
                out[i as usize] += v[j] * p;
            }
        }
        out
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| c.iter().map(|e| e.1).sum())
            .collect()
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Rank-1 lattice in the unit square: `((k + 1/2) / n, {k g / n + 1/2n})`
/// with `g` the integer nearest `n / golden ratio` that is coprime to `n`.
pub fn lattice_points(n: usize) -> Vec<(f64, f64)> {
    let mut g = ((n as f64 * GOLDEN).round() as usize).max(1);
    while gcd(g, n) != 1 {
        g += 1;
    }
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let u = (k as f64 + 0.5) / nf;
            let v = ((k * g) % n) as f64 / nf + 0.5 / nf;
            (u, v)
        })
        .collect()
}

/// Ulam matrix of `T^t`: entry `(i, j)` is the `m_f`-weighted fraction of
/// the sample points of box `j` whose image lies in box `i`. Without a
/// seed the samples form a fixed lattice; a seed adds a random shift.
pub fn build_ulam(
    f: &TrigPolynomial,
    t: f64,
    partition: BoxPartition,
    points_per_box: usize,
    seed: Option<u64>,
) -> Result<UlamOperator> {
    if points_per_box < 16 {
        return Err(Error::invalid(format!(
            "points_per_box must be >= 16, got {points_per_box}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
    }
    let mut lattice = lattice_points(points_per_box);
    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        for p in &mut lattice {
            p.0 = (p.0 + a).fract();
            p.1 = (p.1 + b).fract();
        }
    }
    let (nx, ns) = (partition.nx as f64, partition.ns as f64);
    let columns = (0..partition.len())
        .into_par_iter()
        .map(|j| {
            let (ix, js) = ((j / partition.ns) as f64, (j % partition.ns) as f64);
            let mut hits: Vec<(u32, f64)> = lattice
                .iter()
                .map(|&(u, v)| {
                    let x = (ix + u) / nx;
                    let h = f.value(x);
                    let z = FlowPoint::new(x, (js + v) / ns * h);
                    let image = if t == 0.0 { z } else { flow_unchecked(f, z, t) };
                    // Uniform samples in (x, s / f) carry Lebesgue weight f(x).
                    (partition.locate(f, image) as u32, h)
                })
                .collect();
            hits.sort_by_key(|e| e.0);
            let total: f64 = hits.iter().map(|e| e.1).sum();
            let mut col: Vec<(u32, f64)> = Vec::new();
            for (i, w) in hits {
                match col.last_mut() {
                    Some(last) if last.0 == i => last.1 += w,
                    _ => col.push((i, w)),
                }
            }
            for e in &mut col {
                e.1 /= total;
            }
            col
        })
        .collect();
    Ok(UlamOperator {
        partition,
        t,
        points_per_box,
        seed,
        descriptor: f.descriptor(),
        columns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    Dense,
    Arnoldi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Eigenvalues `[re, im]`, by decreasing modulus.
    pub eigenvalues: Vec<[f64; 2]>,
    /// Number of reported eigenvalues within `1e-6` of each one.
    pub multiplicities: Vec<usize>,
    pub method: EigenMethod,
    pub t: f64,
    pub descriptor: String,
    /// `m(f,t)^(1/2)`, filled in when a transversality estimate is supplied.
    pub essential_bound: Option<f64>,
    pub caveat: String,
}

impl SpectrumReport {
    pub fn moduli(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| e[0].hypot(e[1])).collect()
    }
}

fn sort_by_modulus(values: &mut [Complex64]) {
    values.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
}

/// Top `k` eigenvalues by modulus: dense Schur decomposition for matrices
/// up to [`DENSE_LIMIT`], Arnoldi iteration beyond.
pub fn spectrum(op: &UlamOperator, k: usize) -> Result<SpectrumReport> {
    if k == 0 || k > MAX_EIGENVALUES {
        return Err(Error::invalid(format!("k must lie in 1..={MAX_EIGENVALUES}, got {k}")));
    }
    let n = op.dim();
    let (mut values, method) = if n <= DENSE_LIMIT {
        (dense_eigenvalues(op.to_dense())?, EigenMethod::Dense)
    } else {
        (arnoldi_eigenvalues(op, k)?, EigenMethod::Arnoldi)
    };
    sort_by_modulus(&mut values);
    values.truncate(k);
    let multiplicities = values
        .iter()
        .map(|a| values.iter().filter(|b| (*a - **b).norm() < 1e-6).count())
        .collect();
    Ok(SpectrumReport {
        eigenvalues: values.iter().map(|c| [c.re, c.im]).collect(),
        multiplicities,
        method,
        t: op.t,
        descriptor: op.descriptor.clone(),
        essential_bound: None,
        caveat: SPECTRUM_CAVEAT.to_string(),
    })
}

fn dense_eigenvalues(m: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    let schur = Schur::try_new(m, 1e-14, 1000 * n.max(1)).ok_or_else(|| {
        Error::NumericalFailure(format!("Schur iteration did not converge for n = {n}"))
    })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Ritz values from an `m`-step Arnoldi factorisation.
fn ritz_values(op: &UlamOperator, m: usize) -> Result<Vec<Complex64>> {
    let n = op.dim();
    let m = m.min(n);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
    let start: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + 0.1 * (i as f64).sin(), 0.0))
        .collect();
    let norm = start.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    basis.push(start.iter().map(|c| c / norm).collect());
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut size = m;
    for j in 0..m {
        let mut w = op.apply_complex(&basis[j]);
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c: Complex64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                h[(i, j)] += c.re;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= c * vk;
                }
            }
        }
        let beta = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if j + 1 == m {
            break;
        }
        if beta < 1e-13 {
            size = j + 1;
            break;
        }
        h[(j + 1, j)] = beta;
        basis.push(w.iter().map(|c| c / beta).collect());
    }
    dense_eigenvalues(h.view((0, 0), (size, size)).into_owned())
}

fn arnoldi_eigenvalues(op: &UlamOperator, k: usize) -> Result<Vec<Complex64>> {
    let m = (4 * k).max(40);
    let mut coarse = ritz_values(op, m)?;
    let mut fine = ritz_values(op, 2 * m)?;
    sort_by_modulus(&mut coarse);
    sort_by_modulus(&mut fine);
    let drift = coarse
        .iter()
        .zip(&fine)
        .take(k.min(2))
        .map(|(a, b)| (a.norm() - b.norm()).abs())
        .fold(0.0, f64::max);
    if drift > 1e-3 {
        return Err(Error::NumericalFailure(format!(
            "Arnoldi not converged: leading Ritz moduli moved by {drift:.3e} between {m} and {} steps",
            2 * m
        )));
    }
    Ok(fine)
}

/// Closed-form test functions on `X_f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Constant(f64),
    CosX(u32),
    SinX(u32),
    CosS(u32),
    SinS(u32),
    /// `exp(2 pi i k s)`.
    ExpS(i32),
    Product(Box<Observable>, Box<Observable>),
    Sum(Box<Observable>, Box<Observable>),
    Scale(f64, Box<Observable>),
    /// Multiplies by a smooth cutoff vanishing within `0.05 min f` of the
    /// floor and the roof.
    Cutoff(Box<Observable>),
}

impl Observable {
    /// Evaluates at `z`; `margin` is the cutoff width.
    pub fn eval(&self, f: &TrigPolynomial, margin: f64, z: FlowPoint) -> Complex64 {
        let tau = 2.0 * PI;
        let re = |v: f64| Complex64::new(v, 0.0);
        match self {
            Observable::Constant(c) => re(*c),
            Observable::CosX(k) => re((tau * *k as f64 * z.x).cos()),
            Observable::SinX(k) => re((tau * *k as f64 * z.x).sin()),
            Observable::CosS(k) => re((tau * *k as f64 * z.s).cos()),
            Observable::SinS(k) => re((tau * *k as f64 * z.s).sin()),
            Observable::ExpS(k) => Complex64::from_polar(1.0, tau * *k as f64 * z.s),
            Observable::Product(a, b) => a.eval(f, margin, z) * b.eval(f, margin, z),
            Observable::Sum(a, b) => a.eval(f, margin, z) + b.eval(f, margin, z),
            Observable::Scale(c, a) => a.eval(f, margin, z) * *c,
            Observable::Cutoff(a) => {
                let top = f.value(z.x) - z.s;
                a.eval(f, margin, z) * step(z.s / margin) * step(top / margin)
            }
        }
    }

    pub fn id(&self) -> String {
        match self {
            Observable::Constant(c) => format!("{c}"),
            Observable::CosX(k) => format!("cos(2pi*{k}x)"),
            Observable::SinX(k) => format!("sin(2pi*{k}x)"),
            Observable::CosS(k) => format!("cos(2pi*{k}s)"),
            Observable::SinS(k) => format!("sin(2pi*{k}s)"),
            Observable::ExpS(k) => format!("exp(2pi*i*{k}s)"),
            Observable::Product(a, b) => format!("({})*({})", a.id(), b.id()),
            Observable::Sum(a, b) => format!("({})+({})", a.id(), b.id()),
            Observable::Scale(c, a) => format!("{c}*({})", a.id()),
            Observable::Cutoff(a) => format!("cutoff({})", a.id()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    /// `(t, Cor_t)` with `Cor_t = [re, im]`.
    pub samples: Vec<(f64, [f64; 2])>,
    pub psi_id: String,
    pub phi_id: String,
    pub descriptor: String,
}

impl CorrelationCurve {
    pub fn abs(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|(t, c)| (*t, c[0].hypot(c[1]))).collect()
    }

    /// `max |Cor_t|` over `t` in `[lo, hi]`.
    pub fn window_max(&self, lo: f64, hi: f64) -> f64 {
        self.abs()
            .into_iter()
            .filter(|(t, _)| *t >= lo && *t <= hi)
            .map(|(_, v)| v)
            .fold(0.0, f64::max)
    }
}

/// `Cor_t(psi, phi) = int psi * phi(T^t) dm - int psi dm int phi dm` for
/// normalised Lebesgue measure `m` on `X_f`, by quadrature on `nx * ns`
/// nodes. Column `i` sits at `x = (i + g) / nx` with `g` the golden-ratio
/// fraction, which keeps nodes off short periodic orbits of `tau`; heights
/// are midpoints of `ns` equal slices of `[0, f(x))`.
pub fn correlation(
    f: &TrigPolynomial,
    psi: &Observable,
    phi: &Observable,
    t_list: &[f64],
    nx: usize,
    ns: usize,
) -> Result<CorrelationCurve> {
    if nx == 0 || ns == 0 {
        return Err(Error::invalid("quadrature sizes must be positive"));
    }
    if nx.saturating_mul(ns) > 1 << 24 {
        return Err(Error::resource(
            format!("{nx} x {ns} quadrature nodes exceed 2^24"),
            Some((1u64 << 24) as f64),
        ));
    }
    if t_list.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::invalid("times must be nonnegative"));
    }
    let f_min = (0..1024)
        .map(|i| f.value(i as f64 / 1024.0))
        .fold(f64::INFINITY, f64::min);
    let margin = 0.05 * f_min;
    let nodes: Vec<(FlowPoint, f64)> = (0..nx)
        .flat_map(|i| {
            let x = (i as f64 + GOLDEN) / nx as f64;
            let h = f.value(x);
            (0..ns).map(move |j| (FlowPoint::new(x, h * (j as f64 + 0.5) / ns as f64), h))
        })
        .collect();
    let total: f64 = nodes.iter().map(|n| n.1).sum();
    let zero = Complex64::new(0.0, 0.0);
    let weighted = |g: &(dyn Fn(&(FlowPoint, f64)) -> Complex64 + Sync)| -> Complex64 {
        nodes
            .par_iter()
            .map(|n| g(n) * n.1)
            .collect::<Vec<_>>()
            .into_iter()
            .fold(zero, |a, b| a + b)
            / total
    };
    let psi_vals: Vec<Complex64> = nodes.iter().map(|n| psi.eval(f, margin, n.0)).collect();
    let mean_psi = weighted(&|n| psi.eval(f, margin, n.0));
    let mean_phi = weighted(&|n| phi.eval(f, margin, n.0));
    let samples = t_list
        .iter()
        .map(|&t| {
            let acc: Complex64 = nodes
                .par_iter()
                .zip(&psi_vals)
                .map(|(n, p)| *p * phi.eval(f, margin, flow_unchecked(f, n.0, t)) * n.1)
                .collect::<Vec<_>>()
                .into_iter()
                .fold(zero, |a, b| a + b);
            let c = acc / total - mean_psi * mean_phi;
            (t, [c.re, c.im])
        })
        .collect();
    Ok(CorrelationCurve {
        samples,
        psi_id: psi.id(),
        phi_id: phi.id(),
        descriptor: f.descriptor(),
    })
}

/// Exponential fit of `|Cor_t|`, skipping exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub fit: RateFit,
    pub descriptor: String,
}

pub fn decay_fit(curve: &CorrelationCurve) -> Result<DecayFit> {
    let samples: Vec<(f64, f64)> = curve.abs().into_iter().filter(|s| s.1 > 0.0).collect();
    Ok(DecayFit {
        fit: exponent_fit(&samples)?,
        descriptor: curve.descriptor.clone(),
    })
}

/// Discretized spectrum, correlation decay and the transversality bound on
/// a common per-unit-time scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceComparison {
    pub lambda2_abs: f64,
    /// `|lambda_2|^(1/t)`.
    pub lambda2_rate: f64,
    pub fitted_rate: f64,
    /// `m(f,t)^(1/2t)`.
    pub m_bound: f64,
    /// Whether `fitted_rate <= m_bound + slack`. Advisory only.
    pub fit_within_bound: bool,
    pub slack: f64,
}

pub fn resonance_compare(
    report: &SpectrumReport,
    fit: &DecayFit,
    m_estimate: &TransversalityEstimate,
    slack: f64,
) -> Result<ResonanceComparison> {
    if report.descriptor != fit.descriptor {
        return Err(Error::invalid(format!(
            "spectrum of {} compared with correlations of {}",
            report.descriptor, fit.descriptor
        )));
    }
    if (report.t - m_estimate.t).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "spectrum at t = {} compared with m(f,t) at t = {}",
            report.t, m_estimate.t
        )));
    }
    if !(report.t > 0.0) {
        return Err(Error::invalid("comparison needs t > 0"));
    }
    let moduli = report.moduli();
    let lambda2_abs = moduli.get(1).copied().unwrap_or(0.0);
    let m_bound = m_estimate.m_value.powf(1.0 / (2.0 * report.t));
    Ok(ResonanceComparison {
        lambda2_abs,
        lambda2_rate: lambda2_abs.powf(1.0 / report.t),
        fitted_rate: fit.fit.rate,
        m_bound,
        fit_within_bound: fit.fit.rate <= m_bound + slack,
        slack,
    })
}
