//! Anisotropic Sobolev norms on a periodic Fourier grid.
//!
//! Functions live on an `N x N` periodic grid of side `2 pi`, so grid
//! frequencies are the integer vectors `k` in `[-N/2, N/2)^2`. Frequency
//! space is split into dyadic annuli and, through a polarization, into two
//! angular sectors weighted with different regularity exponents.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smooth::{chi, step};

/// Physical side length of the periodic square.
pub const SIDE: f64 = 2.0 * PI;

/// Tolerance for deciding that a line angle lies on a cone boundary.
const ANGLE_TOL: f64 = 1e-12;

/// Angle of the line through `(x, y)`, in `[0, pi)`.
pub fn line_angle(x: f64, y: f64) -> f64 {
    let a = y.atan2(x).rem_euclid(PI);
    if a >= PI {
        0.0
    } else {
        a
    }
}

fn slope_angle(slope: f64) -> f64 {
    if slope.is_infinite() {
        PI / 2.0
    } else {
        slope.atan().rem_euclid(PI)
    }
}

/// A closed double cone given by an interval of line slopes. The arc runs
/// counterclockwise from `slope_lo` to `slope_hi`; `slope_lo > slope_hi`
/// describes a cone containing the vertical direction. Either slope may be
/// infinite, meaning vertical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCone {
    pub slope_lo: f64,
    pub slope_hi: f64,
}

impl FrequencyCone {
    pub fn new(slope_lo: f64, slope_hi: f64) -> Self {
        FrequencyCone { slope_lo, slope_hi }
    }

    fn start(&self) -> f64 {
        slope_angle(self.slope_lo)
    }

    /// Angular length of the arc, in `[0, pi)`.
    fn length(&self) -> f64 {
        (slope_angle(self.slope_hi) - self.start()).rem_euclid(PI)
    }

    /// Counterclockwise offset of a line angle from the start of the arc.
    fn offset(&self, angle: f64) -> f64 {
        (angle - self.start()).rem_euclid(PI)
    }

    pub fn contains_angle(&self, angle: f64) -> bool {
        let d = self.offset(angle);
        d <= self.length() + ANGLE_TOL || d >= PI - ANGLE_TOL
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x != 0.0 || y != 0.0) && self.contains_angle(line_angle(x, y))
    }

    /// Whether the cones share a nonzero vector.
    pub fn intersects(&self, other: &FrequencyCone) -> bool {
        self.contains_angle(other.start()) || other.contains_angle(self.start())
    }

    /// The cone of lines not in `self`'s closure, as a slope interval.
    pub fn complement(&self) -> FrequencyCone {
        FrequencyCone::new(self.slope_hi, self.slope_lo)
    }

    /// Whether `self`'s closure lies in the interior of `other`.
    pub fn compactly_inside(&self, other: &FrequencyCone) -> bool {
        let a = other.offset(self.start());
        a > ANGLE_TOL && a + self.length() < other.length() - ANGLE_TOL
    }
}

/// Two transversal cones with smooth angular weights `phi_plus` and
/// `phi_minus = 1 - phi_plus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polarization {
    pub plus: FrequencyCone,
    pub minus: FrequencyCone,
}

impl Polarization {
    pub fn new(plus: FrequencyCone, minus: FrequencyCone) -> Result<Self> {
        if plus.intersects(&minus) {
            return Err(Error::invalid("polarization cones must meet only at the origin"));
        }
        Ok(Polarization { plus, minus })
    }

    /// `phi_+` at a line angle: 1 on the plus cone, 0 on the minus cone,
    /// a smooth step across each of the two gaps between them.
    pub fn phi_plus(&self, angle: f64) -> f64 {
        if self.plus.contains_angle(angle) {
            return 1.0;
        }
        if self.minus.contains_angle(angle) {
            return 0.0;
        }
        let plus_end = self.plus.start() + self.plus.length();
        let minus_end = self.minus.start() + self.minus.length();
        let d = (angle - plus_end).rem_euclid(PI);
        let gap = (self.minus.start() - plus_end).rem_euclid(PI);
        if d < gap {
            return 1.0 - step(d / gap);
        }
        let d = (angle - minus_end).rem_euclid(PI);
        let gap = (self.plus.start() - minus_end).rem_euclid(PI);
        step(d / gap)
    }

    pub fn phi(&self, sign: Sign, angle: f64) -> f64 {
        match sign {
            Sign::Plus => self.phi_plus(angle),
            Sign::Minus => 1.0 - self.phi_plus(angle),
        }
    }

    /// `self < other`: the complement of `other`'s plus cone lies compactly
    /// inside `self`'s minus cone.
    pub fn precedes(&self, other: &Polarization) -> bool {
        other.plus.complement().compactly_inside(&self.minus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

pub const SIGNS: [Sign; 2] = [Sign::Plus, Sign::Minus];

/// Regularity exponents of a norm: `p` on the plus sector, `q` on the minus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub p: f64,
    pub q: f64,
}

impl NormParams {
    /// The strong norm, `(p, q) = (1, 0)`.
    pub fn strong() -> Self {
        NormParams { p: 1.0, q: 0.0 }
    }

    /// The weak norm, `(p, q) = (1 - eps, -eps)`.
    pub fn weak(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::invalid(format!("eps must lie in (0, 1/2), got {eps}")));
        }
        Ok(NormParams { p: 1.0 - eps, q: -eps })
    }
}

/// Which samples must vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Support {
    /// Nonzero only on the central half `[N/4, 3N/4)^2`, leaving a
    /// zero-padding margin of a quarter on each side.
    Central,
    /// Any periodic function.
    Periodic,
}

/// Real samples on the periodic `N x N` grid, row-major in `(i, j)` with
/// `x = i h`, `y = j h`, `h = 2 pi / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction2D {
    pub n: usize,
    pub samples: Vec<f64>,
    pub support: Support,
}

impl GridFunction2D {
    pub fn new(n: usize, samples: Vec<f64>, support: Support) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::invalid(format!("grid size must be a power of 2 >= 4, got {n}")));
        }
        if samples.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                n * n,
                samples.len()
            )));
        }
        Ok(GridFunction2D { n, samples, support })
    }

    pub fn from_fn(n: usize, support: Support, g: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let h = SIDE / n as f64;
        let samples = (0..n * n)
            .map(|idx| g((idx / n) as f64 * h, (idx % n) as f64 * h))
            .collect();
        Self::new(n, samples, support)
    }

    pub fn spacing(&self) -> f64 {
        SIDE / self.n as f64
    }

    /// `||u||_{L^2}` by the rectangle rule.
    pub fn l2_norm(&self) -> f64 {
        let h = self.spacing();
        (self.samples.iter().map(|v| v * v).sum::<f64>() * h * h).sqrt()
    }

    fn check_support(&self) -> Result<()> {
        if self.support == Support::Periodic {
            return Ok(());
        }
        let (lo, hi) = (self.n / 4, 3 * self.n / 4);
        for (idx, &v) in self.samples.iter().enumerate() {
            let (i, j) = (idx / self.n, idx % self.n);
            let inside = (lo..hi).contains(&i) && (lo..hi).contains(&j);
            if !inside && v != 0.0 {
                return Err(Error::domain(format!(
                    "sample ({i}, {j}) = {v} lies in the zero-padding margin"
                )));
            }
        }
        Ok(())
    }

    /// Fourier coefficients `c_k = N^-2 sum u_j e^(-i k x_j)`, so that
    /// `||u||^2 = (2 pi)^2 sum |c_k|^2`.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2(&mut buf, self.n, false);
        let scale = 1.0 / (self.n * self.n) as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    fn from_spectrum(n: usize, mut coeffs: Vec<Complex64>, support: Support) -> Self {
        fft2(&mut coeffs, n, true);
        GridFunction2D {
            n,
            samples: coeffs.iter().map(|c| c.re).collect(),
            support,
        }
    }
}

/// In-place 2-D FFT (unnormalised), rows then columns.
fn fft2(buf: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    fft.process(buf);
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = buf[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            buf[i * n + j] = col[i];
        }
    }
}

/// Signed integer frequency of FFT index `k`.
pub fn frequency(k: usize, n: usize) -> f64 {
    if k < n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Largest dyadic level needed on an `N` grid: every grid frequency has
/// `|k| <= N / sqrt 2 <= 2^n_max`.
pub fn max_level(n: usize) -> u32 {
    (n as f64 / 2f64.sqrt()).log2().ceil() as u32
}

/// `psi_{n, sigma}(xi)`.
pub fn mask_value(theta: &Polarization, level: u32, sign: Sign, xi: (f64, f64)) -> f64 {
    let r = xi.0.hypot(xi.1);
    if level == 0 {
        return chi(r) / 2.0;
    }
    let scale = 2f64.powi(-(level as i32));
    let radial = chi(scale * r) - chi(2.0 * scale * r);
    if radial == 0.0 {
        return 0.0;
    }
    theta.phi(sign, line_angle(xi.0, xi.1)) * radial
}

/// Frequency-side samples of `psi_{n, sigma}` on the `N x N` grid.
pub fn dyadic_mask(theta: &Polarization, level: u32, sign: Sign, n: usize) -> Result<Vec<f64>> {
    if level > max_level(n) {
        return Err(Error::invalid(format!(
            "level {level} beyond the Nyquist range (max {}) of an {n} grid",
            max_level(n)
        )));
    }
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            out.push(mask_value(theta, level, sign, (frequency(a, n), frequency(b, n))));
        }
    }
    Ok(out)
}

/// Plus and minus semi-norms and the combined norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBreakdown {
    pub plus: f64,
    pub minus: f64,
    pub total: f64,
}

/// `||u||_{Theta,p,q}`, from `||u_{n,sigma}||^2 = (2 pi)^2 sum_k |psi c_k|^2`.
pub fn aniso_norm(u: &GridFunction2D, theta: &Polarization, params: NormParams) -> Result<NormBreakdown> {
    u.check_support()?;
    let coeffs = u.spectrum();
    let mut sums = [0.0f64; 2];
    for level in 0..=max_level(u.n) {
        for (s, sign) in SIGNS.iter().enumerate() {
            let mask = dyadic_mask(theta, level, *sign, u.n)?;
            let piece: f64 = mask.iter().zip(&coeffs).map(|(m, c)| (m * c).norm_sqr()).sum();
            let exponent = if *sign == Sign::Plus { params.p } else { params.q };
            sums[s] += 2f64.powf(2.0 * exponent * level as f64) * piece * SIDE * SIDE;
        }
    }
    Ok(NormBreakdown {
        plus: sums[0].sqrt(),
        minus: sums[1].sqrt(),
        total: (sums[0] + sums[1]).sqrt(),
    })
}

/// `||u||_{L^2} / ||u||_{Theta,1,0}`; at most `sqrt 6`, and at most 2 since
/// no frequency lies in more than four mask supports.
pub fn embedding_check(u: &GridFunction2D, theta: &Polarization) -> Result<f64> {
    let l2 = u.l2_norm();
    if l2 == 0.0 {
        return Err(Error::invalid("embedding ratio of the zero function"));
    }
    Ok(l2 / aniso_norm(u, theta, NormParams::strong())?.total)
}

/// Zeroes every Fourier coefficient outside `cone`, including the zero mode.
/// The result is no longer compactly supported and is marked periodic.
pub fn mask_to_cone(u: &GridFunction2D, cone: &FrequencyCone) -> GridFunction2D {
    let n = u.n;
    let mut coeffs = u.spectrum();
    for a in 0..n {
        for b in 0..n {
            if !cone.contains(frequency(a, n), frequency(b, n)) {
                coeffs[a * n + b] = Complex64::new(0.0, 0.0);
            }
        }
    }
    let mut scaled = coeffs;
    scaled.iter_mut().for_each(|c| *c *= (n * n) as f64);
    GridFunction2D::from_spectrum(n, scaled, Support::Periodic)
}

/// `max_n |(psi_{n,-}(D) u, psi_{n,-}(D) v)_{L^2}|` for pieces with Fourier
/// support in disjoint cones.
pub fn transversal_orthogonality(
    u: &GridFunction2D,
    v: &GridFunction2D,
    theta_hat: &Polarization,
    cone_u: &FrequencyCone,
    cone_v: &FrequencyCone,
) -> Result<f64> {
    if cone_u.intersects(cone_v) {
        return Err(Error::PreconditionViolation(
            "cones of the two functions must meet only at the origin".into(),
        ));
    }
    if u.n != v.n {
        return Err(Error::invalid("functions live on different grids"));
    }
    minus_pairing(u, v, theta_hat)
}

/// `max_n |(psi_{n,-}(D) u, psi_{n,-}(D) v)_{L^2}|` with no cone condition.
pub fn minus_pairing(u: &GridFunction2D, v: &GridFunction2D, theta: &Polarization) -> Result<f64> {
    let (cu, cv) = (u.spectrum(), v.spectrum());
    let mut best = 0.0f64;
    for level in 0..=max_level(u.n) {
        let mask = dyadic_mask(theta, level, Sign::Minus, u.n)?;
        let inner: Complex64 = mask
            .iter()
            .zip(cu.iter().zip(&cv))
            .map(|(m, (a, b))| a * b.conj() * (m * m))
            .sum();
        best = best.max(inner.norm() * SIDE * SIDE);
    }
    Ok(best)
}

/// `| ||u||^2 - sum_{n,sigma} ||sqrt(psi_{n,sigma})(D) u||^2 |`: the square
/// roots of the masks have squares summing to one, so this vanishes.
pub fn parseval_defect(u: &GridFunction2D, theta: &Polarization) -> Result<f64> {
    let coeffs = u.spectrum();
    let mut acc = 0.0;
    for level in 0..=max_level(u.n) {
        for sign in SIGNS {
            let mask = dyadic_mask(theta, level, sign, u.n)?;
            acc += mask.iter().zip(&coeffs).map(|(m, c)| m * c.norm_sqr()).sum::<f64>();
        }
    }
    let l2 = u.l2_norm();
    Ok((l2 * l2 - acc * SIDE * SIDE).abs())
}

/// `max_k |sum_{n,sigma} psi_{n,sigma}(k) - 1|` over the grid.
pub fn partition_defect(theta: &Polarization, n: usize) -> Result<f64> {
    let mut total = vec![0.0; n * n];
    for level in 0..=max_level(n) {
        for sign in SIGNS {
            for (t, m) in total.iter_mut().zip(dyadic_mask(theta, level, sign, n)?) {
                *t += m;
            }
        }
    }
    Ok(total.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max))
}

/// Largest ratio `||u||_{Theta',1,0} / ||u||_{Theta,1,0}` over the inputs.
pub fn norm_comparison(
    us: &[GridFunction2D],
    theta_prime: &Polarization,
    theta: &Polarization,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for u in us {
        let a = aniso_norm(u, theta_prime, NormParams::strong())?.total;
        let b = aniso_norm(u, theta, NormParams::strong())?.total;
        if b > 0.0 {
            worst = worst.max(a / b);
        }
    }
    Ok(worst)
}

/// Relative change of a norm between an `N` grid and a `2N` grid sampling
/// the same function.
pub fn refinement_check(
    g: impl Fn(f64, f64) -> f64 + Copy,
    n: usize,
    support: Support,
    theta: &Polarization,
    params: NormParams,
) -> Result<f64> {
    let coarse = aniso_norm(&GridFunction2D::from_fn(n, support, g)?, theta, params)?.total;
    let fine = aniso_norm(&GridFunction2D::from_fn(2 * n, support, g)?, theta, params)?.total;
    Ok((coarse - fine).abs() / fine.max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> Polarization {
        Polarization::new(FrequencyCone::new(-0.5, 0.5), FrequencyCone::new(2.0, -2.0)).unwrap()
    }

    #[test]
    fn cone_membership() {
        let c = FrequencyCone::new(-0.5, 0.5);
        assert!(c.contains(1.0, 0.0) && c.contains(-1.0, 0.3) && !c.contains(0.0, 1.0));
        let v = FrequencyCone::new(2.0, -2.0);
        assert!(v.contains(0.0, 1.0) && v.contains(1.0, -3.0) && !v.contains(1.0, 1.0));
        assert!(!c.intersects(&v));
        assert!(c.intersects(&FrequencyCone::new(0.4, 1.0)));
        assert!(FrequencyCone::new(-0.1, 0.1).compactly_inside(&c));
        assert!(!c.compactly_inside(&c));
    }

    #[test]
    fn angular_profile() {
        let th = standard();
        assert_eq!(th.phi_plus(0.0), 1.0);
        assert_eq!(th.phi_plus(PI / 2.0), 0.0);
        let mid = th.phi_plus(PI / 4.0);
        assert!(mid > 0.0 && mid < 1.0);
        assert!((th.phi_plus(PI / 4.0) - th.phi_plus(3.0 * PI / 4.0)).abs() < 1e-12);
        assert!(Polarization::new(FrequencyCone::new(-1.0, 1.0), FrequencyCone::new(0.5, 3.0)).is_err());
    }

    #[test]
    fn mask_examples() {
        let th = standard();
        for sign in SIGNS {
            assert_eq!(mask_value(&th, 0, sign, (0.0, 0.0)), 0.5);
        }
        for level in 1..6 {
            let r = 2f64.powi(level as i32);
            assert_eq!(mask_value(&th, level, Sign::Plus, (r, 0.0)), 1.0);
            assert_eq!(mask_value(&th, level, Sign::Minus, (r, 0.0)), 0.0);
        }
        assert!(dyadic_mask(&th, max_level(64) + 1, Sign::Plus, 64).is_err());
    }

    #[test]
    fn partition_of_unity() {
        assert!(partition_defect(&standard(), 64).unwrap() < 1e-12);
    }

    #[test]
    fn single_mode_norm() {
        let th = standard();
        let u = GridFunction2D::from_fn(64, Support::Periodic, |x, _| (8.0 * x).cos()).unwrap();
        let l2 = u.l2_norm();
        let strong = aniso_norm(&u, &th, NormParams::strong()).unwrap();
        assert!((strong.total - 8.0 * l2).abs() < 1e-9 * l2);
        let weak = aniso_norm(&u, &th, NormParams::weak(0.1).unwrap()).unwrap();
        assert!((weak.total - 2f64.powf(3.0 * 0.9) * l2).abs() < 1e-9 * l2);
    }

    #[test]
    fn support_is_enforced() {
        let u = GridFunction2D::from_fn(16, Support::Central, |_, _| 1.0).unwrap();
        assert!(matches!(
            aniso_norm(&u, &standard(), NormParams::strong()),
            Err(Error::DomainViolation(_))
        ));
        let zero = GridFunction2D::from_fn(16, Support::Central, |_, _| 0.0).unwrap();
        assert_eq!(aniso_norm(&zero, &standard(), NormParams::strong()).unwrap().total, 0.0);
        assert!(embedding_check(&zero, &standard()).is_err());
    }

    #[test]
    fn zero_mode_embedding() {
        let u = GridFunction2D::from_fn(32, Support::Periodic, |_, _| 1.0).unwrap();
        let r = embedding_check(&u, &standard()).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn polarization_order() {
        let wide = Polarization::new(FrequencyCone::new(-1.0, 1.0), FrequencyCone::new(3.0, -3.0)).unwrap();
        let narrow = Polarization::new(FrequencyCone::new(-0.3, 0.3), FrequencyCone::new(0.5, -0.5)).unwrap();
        assert!(narrow.precedes(&wide));
        assert!(!wide.precedes(&narrow));
    }
}
