//! Ceiling functions: real trigonometric polynomials on the circle `R/Z`
//! together with the base `l` of the angle-multiplying map they are paired
//! with.
//!
//! Every derivative is evaluated in closed form, so Birkhoff sums of `f'`
//! and `f''` along inverse branches carry no quadrature error.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Caveat attached to every report that depends on `K`.
pub const CR_SURROGATE_CAVEAT: &str =
    "C^r norm surrogate uses derivative orders 0..=3 only";

/// Bisection tolerance (in x) used when refining grid extrema.
const EXTREMUM_TOL: f64 = 1e-10;

/// Largest supported base; letters of a word are stored as `u8`.
pub const MAX_ELL: u32 = 255;

/// One term `cos * cos(2 pi k x) + sin * sin(2 pi k x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub k: u32,
    pub cos: f64,
    pub sin: f64,
}

impl Harmonic {
    pub fn new(k: u32, cos: f64, sin: f64) -> Self {
        Harmonic { k, cos, sin }
    }
}

/// A positive trigonometric polynomial `f` paired with the map `x -> ell*x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    ell: u32,
    mean: f64,
    harmonics: Vec<Harmonic>,
}

impl TrigPolynomial {
    /// Validates the base, the harmonic ordering and strict positivity on a
    /// sampling grid fine enough to resolve the top harmonic.
    pub fn new(ell: u32, mean: f64, harmonics: Vec<Harmonic>) -> Result<Self> {
        let f = Self::unchecked(ell, mean, harmonics)?;
        let n = f.positivity_grid();
        for i in 0..n {
            let x = i as f64 / n as f64;
            let v = f.value(x);
            if !(v > 0.0) {
                return Err(Error::domain(format!(
                    "ceiling must be strictly positive: f({x}) = {v}"
                )));
            }
        }
        Ok(f)
    }

    /// Builds the trigonometric polynomial without the positivity check.
    /// Used for potentials and perturbation directions.
    pub fn unchecked(ell: u32, mean: f64, mut harmonics: Vec<Harmonic>) -> Result<Self> {
        if !(2..=MAX_ELL).contains(&ell) {
            return Err(Error::invalid(format!("ell must lie in 2..={MAX_ELL}, got {ell}")));
        }
        if !mean.is_finite() {
            return Err(Error::invalid("mean coefficient must be finite"));
        }
        for h in &harmonics {
            if h.k == 0 {
                return Err(Error::invalid("harmonic index k must be positive"));
            }
            if !h.cos.is_finite() || !h.sin.is_finite() {
                return Err(Error::invalid(format!("harmonic {} has non-finite coefficients", h.k)));
            }
        }
        if harmonics.windows(2).any(|w| w[0].k >= w[1].k) {
            // Accept unsorted input but reject duplicates.
            harmonics.sort_by_key(|h| h.k);
            if harmonics.windows(2).any(|w| w[0].k == w[1].k) {
                return Err(Error::invalid("harmonic indices must be distinct"));
            }
        }
        Ok(TrigPolynomial {
            ell,
            mean,
            harmonics,
        })
    }

    /// Constant ceiling `f = c`.
    pub fn constant(ell: u32, c: f64) -> Result<Self> {
        Self::new(ell, c, Vec::new())
    }

    /// `f = c + Psi(ell x) - Psi(x)` for the zero-mean potential `Psi` given
    /// by its harmonics.
    pub fn coboundary(ell: u32, c: f64, potential: &[Harmonic]) -> Result<Self> {
        let mut terms: Vec<Harmonic> = Vec::new();
        let mut add = |k: u32, cos: f64, sin: f64| {
            if let Some(h) = terms.iter_mut().find(|h| h.k == k) {
                h.cos += cos;
                h.sin += sin;
            } else {
                terms.push(Harmonic::new(k, cos, sin));
            }
        };
        for h in potential {
            add(h.k * ell, h.cos, h.sin);
            add(h.k, -h.cos, -h.sin);
        }
        terms.retain(|h| h.cos != 0.0 || h.sin != 0.0);
        terms.sort_by_key(|h| h.k);
        Self::new(ell, c, terms)
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn mean_coeff(&self) -> f64 {
        self.mean
    }

    pub fn harmonics(&self) -> &[Harmonic] {
        &self.harmonics
    }

    pub fn max_harmonic(&self) -> u32 {
        self.harmonics.last().map_or(0, |h| h.k)
    }

    /// `f + kappa`.
    pub fn shifted(&self, kappa: f64) -> Result<Self> {
        Self::new(self.ell, self.mean + kappa, self.harmonics.clone())
    }

    fn positivity_grid(&self) -> usize {
        (16 * self.max_harmonic() as usize).max(1024)
    }

    /// The `order`-th derivative at `x`, `order` in `0..=3`.
    pub fn eval(&self, x: f64, order: u32) -> Result<f64> {
        if order > 3 {
            return Err(Error::invalid(format!("derivative order {order} outside 0..=3")));
        }
        let mut acc = if order == 0 { self.mean } else { 0.0 };
        for h in &self.harmonics {
            let w = TAU * h.k as f64;
            let (s, c) = (w * x).sin_cos();
            // d/dx cos = -w sin, d/dx sin = w cos
            let (dc, ds) = match order {
                0 => (c, s),
                1 => (-w * s, w * c),
                2 => (-w * w * c, -w * w * s),
                _ => (w * w * w * s, -w * w * w * c),
            };
            acc += h.cos * dc + h.sin * ds;
        }
        Ok(acc)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let mut acc = self.mean;
        for h in &self.harmonics {
            let (s, c) = (TAU * h.k as f64 * x).sin_cos();
            acc += h.cos * c + h.sin * s;
        }
        acc
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for h in &self.harmonics {
            let w = TAU * h.k as f64;
            let (s, c) = (w * x).sin_cos();
            acc += w * (h.sin * c - h.cos * s);
        }
        acc
    }

    /// `(f, f', f'')` at `x` with one `sin_cos` per harmonic.
    #[inline]
    pub fn jet(&self, x: f64) -> [f64; 3] {
        let mut out = [self.mean, 0.0, 0.0];
        for h in &self.harmonics {
            let w = TAU * h.k as f64;
            let (s, c) = (w * x).sin_cos();
            let v = h.cos * c + h.sin * s;
            out[0] += v;
            out[1] += w * (h.sin * c - h.cos * s);
            out[2] -= w * w * v;
        }
        out
    }

    /// `(f, f')` at `x`.
    #[inline]
    pub fn value_and_deriv(&self, x: f64) -> (f64, f64) {
        let mut v = self.mean;
        let mut d = 0.0;
        for h in &self.harmonics {
            let w = TAU * h.k as f64;
            let (s, c) = (w * x).sin_cos();
            v += h.cos * c + h.sin * s;
            d += w * (h.sin * c - h.cos * s);
        }
        (v, d)
    }

    /// The circle map `x -> ell*x mod 1`.
    #[inline]
    pub fn tau(&self, x: f64) -> f64 {
        wrap(self.ell as f64 * x)
    }

    /// A short canonical description, used to match reports computed for
    /// the same ceiling.
    pub fn descriptor(&self) -> String {
        let mut s = format!("ell={};mean={:e}", self.ell, self.mean);
        for h in &self.harmonics {
            s.push_str(&format!(";[{},{:e},{:e}]", h.k, h.cos, h.sin));
        }
        s
    }
}

/// Reduce to `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Constants of the class `C^r_+(S^1; K)` that `f` belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeilingClass {
    pub gamma0: f64,
    /// Cone aperture `max|f'| / (gamma0 * ell - 1)`.
    pub theta_f: f64,
    pub k: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub argmin: f64,
    pub argmax: f64,
    pub max_abs_deriv: f64,
    /// `max_{order<=3} max|f^(order)|` on the grid.
    pub cr_surrogate: f64,
    /// Slope Lipschitz bound `K / (gamma0 * ell - 1)`.
    pub theta_k: f64,
    /// Second-derivative bound for Birkhoff slopes, `l^-2 K / (1 - l^-2)`.
    pub d2s_bound: f64,
}

/// Locate extrema of `f` and `f'`, derive `K` and the cone constants.
pub fn classify(f: &TrigPolynomial, gamma0: f64, grid_size: usize) -> Result<CeilingClass> {
    classify_with_k(f, gamma0, grid_size, None)
}

/// As [`classify`], optionally raising `K` to a user-supplied value.
pub fn classify_with_k(
    f: &TrigPolynomial,
    gamma0: f64,
    grid_size: usize,
    k_override: Option<f64>,
) -> Result<CeilingClass> {
    let ell = f.ell() as f64;
    if !(gamma0 > 1.0 / ell && gamma0 < 1.0) {
        return Err(Error::invalid(format!(
            "gamma0 must lie in (1/ell, 1) = ({}, 1), got {gamma0}",
            1.0 / ell
        )));
    }
    if grid_size < 64 {
        return Err(Error::invalid(format!("grid_size must be >= 64, got {grid_size}")));
    }
    let grid = grid_size.max(8 * f.max_harmonic() as usize);

    let d0 = |x: f64| f.value(x);
    let d1 = |x: f64| f.deriv(x);
    let d2 = |x: f64| f.eval(x, 2).unwrap_or(f64::NAN);
    let d3 = |x: f64| f.eval(x, 3).unwrap_or(f64::NAN);

    let (f_min, argmin, f_max, argmax) = extrema(&d0, &d1, grid);
    if !(f_min > 0.0) {
        return Err(Error::domain(format!(
            "ceiling is not positive: min f = {f_min} at x = {argmin}"
        )));
    }
    let (dmin, _, dmax, _) = extrema(&d1, &d2, grid);
    let max_abs_deriv = dmax.max(-dmin);

    let mut cr_surrogate = f_max.max(-f_min).max(max_abs_deriv);
    for i in 0..grid {
        let x = i as f64 / grid as f64;
        cr_surrogate = cr_surrogate.max(d2(x).abs()).max(d3(x).abs());
    }

    let target = (1.0 / f_min).max(f_max).max(cr_surrogate) * 1.01;
    let mut k = 1.0f64;
    while k <= target {
        k *= 2.0;
    }
    if let Some(user) = k_override {
        if !(user >= k) {
            return Err(Error::invalid(format!(
                "K may only be raised: computed {k}, requested {user}"
            )));
        }
        k = user;
    }

    let denom = gamma0 * ell - 1.0;
    let l2 = ell.powi(-2);
    Ok(CeilingClass {
        gamma0,
        theta_f: max_abs_deriv / denom,
        k,
        f_min,
        f_max,
        argmin,
        argmax,
        max_abs_deriv,
        cr_surrogate,
        theta_k: k / denom,
        d2s_bound: l2 * k / (1.0 - l2),
    })
}

/// `(min f, max f)`, located by grid scan refined by bisection on `f'`.
pub fn value_range(f: &TrigPolynomial) -> (f64, f64) {
    let grid = 1024.max(16 * f.max_harmonic() as usize);
    let d0 = |x: f64| f.value(x);
    let d1 = |x: f64| f.deriv(x);
    let (lo, _, hi, _) = extrema(&d0, &d1, grid);
    (lo, hi)
}

/// `max |f'|`, located by grid scan refined by bisection on `f''`.
pub fn max_abs_derivative(f: &TrigPolynomial) -> f64 {
    let grid = 1024.max(16 * f.max_harmonic() as usize);
    let d1 = |x: f64| f.deriv(x);
    let d2 = |x: f64| f.eval(x, 2).unwrap_or(f64::NAN);
    let (lo, _, hi, _) = extrema(&d1, &d2, grid);
    hi.abs().max(lo.abs())
}

/// Min and max of `g` on the circle: grid scan, then bisection on sign
/// changes of `dg` between adjacent grid points.
fn extrema(g: &dyn Fn(f64) -> f64, dg: &dyn Fn(f64) -> f64, grid: usize) -> (f64, f64, f64, f64) {
    let xs: Vec<f64> = (0..grid).map(|i| i as f64 / grid as f64).collect();
    let mut lo = (f64::INFINITY, 0.0);
    let mut hi = (f64::NEG_INFINITY, 0.0);
    let mut consider = |x: f64| {
        let v = g(x);
        if v < lo.0 {
            lo = (v, x);
        }
        if v > hi.0 {
            hi = (v, x);
        }
    };
    let ds: Vec<f64> = xs.iter().map(|&x| dg(x)).collect();
    for i in 0..grid {
        consider(xs[i]);
        let j = (i + 1) % grid;
        let (a, b) = (ds[i], ds[j]);
        if a == 0.0 || a.signum() != b.signum() {
            let left = xs[i];
            let right = left + 1.0 / grid as f64;
            consider(wrap(bisect(dg, left, right, a)));
        }
    }
    (lo.0, lo.1, hi.0, hi.1)
}

fn bisect(h: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, ha: f64) -> f64 {
    if ha == 0.0 {
        return a;
    }
    let sa = ha.signum();
    while b - a > EXTREMUM_TOL {
        let m = 0.5 * (a + b);
        let hm = h(m);
        if hm == 0.0 {
            return m;
        }
        if hm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
