//! Cone-overlap weights of inverse branches: `m(f,t)`, `n(f,t)` and the
//! minimum expansion rate.
//!
//! Both weights are maxima over all of `X_f`; here they are maxima over a
//! grid, hence lower bounds. Certified mode widens every overlap test by the
//! distance slopes can drift between grid points, giving an upper bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ceiling::{CeilingClass, TrigPolynomial};
use crate::dynamics::{branch_slopes, flow_count, FlowPoint};
use crate::error::{Error, Result};
use crate::fit::exponent_fit;

/// Caveat attached to every grid maximum over `X_f`.
pub const GRID_CAVEAT: &str = "grid lower bound";

/// Relative tolerance applied to every slope-overlap comparison.
const OVERLAP_RTOL: f64 = 1e-12;

/// Sampling grid for maxima over `X_f` and over lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ns: usize,
    pub nl: usize,
}

impl Grid {
    pub fn new(nx: usize, ns: usize, nl: usize) -> Self {
        Grid { nx, ns, nl }
    }

    fn points(&self, f: &TrigPolynomial) -> Vec<FlowPoint> {
        let mut out = Vec::with_capacity(self.nx * self.ns);
        for i in 0..self.nx {
            let x = i as f64 / self.nx as f64;
            let h = f.value(x);
            for j in 0..self.ns {
                out.push(FlowPoint::new(x, h * j as f64 / self.ns as f64));
            }
        }
        out
    }
}

/// Where a grid maximum was attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxLocation {
    pub x: f64,
    pub s: f64,
    /// `true` when the maximiser lies on the section `s = 0`.
    pub on_section: bool,
}

/// Grid estimate of `m(f,t)` and optionally `n(f,t)` at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalityEstimate {
    pub t: f64,
    pub m_value: f64,
    /// Equal to `m_value` unless computed in certified mode.
    pub m_upper: f64,
    pub n_value: Option<f64>,
    pub grid: Grid,
    /// Widening `2 * theta_K * h` applied to overlap tests in certified mode.
    pub slack: f64,
    pub m_location: MaxLocation,
}

/// Per-level slopes sorted ascending, with branch weight `l^-level`.
struct LevelSlopes {
    levels: Vec<(u32, f64, Vec<f64>)>,
    /// `l^(N - level)` per level with `N` the deepest level, when it fits;
    /// weights are then summed as an exact integer ratio.
    scaled: Option<(Vec<u128>, f64)>,
}

impl LevelSlopes {
    fn new(ell: u32, mut pairs: Vec<(f64, u32)>) -> Self {
        pairs.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.total_cmp(&b.0)));
        let mut levels: Vec<(u32, f64, Vec<f64>)> = Vec::new();
        for (slope, level) in pairs {
            match levels.last_mut() {
                Some(last) if last.0 == level => last.2.push(slope),
                _ => levels.push((level, (ell as f64).powi(-(level as i32)), vec![slope])),
            }
        }
        let deepest = levels.last().map_or(0, |l| l.0);
        let l = ell as u128;
        // Counts stay below 2^32, so the products fit when l^N < 2^96.
        let scaled = l.checked_pow(deepest).filter(|&d| d < 1 << 96).map(|d| {
            let factors = levels.iter().map(|lv| l.pow(deepest - lv.0)).collect();
            (factors, d as f64)
        });
        LevelSlopes { levels, scaled }
    }

    /// Total weight of branches with slope in `[lo, hi]`, where the interval
    /// half-width may depend on the level.
    fn weight_in(&self, center: f64, half_width: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        let mut exact: u128 = 0;
        for (i, (_, w, slopes)) in self.levels.iter().enumerate() {
            let r = half_width(*w);
            let r = r + OVERLAP_RTOL * (r + center.abs());
            let lo = slopes.partition_point(|&s| s < center - r);
            let hi = slopes.partition_point(|&s| s <= center + r);
            acc += (hi - lo) as f64 * w;
            if let Some((factors, _)) = &self.scaled {
                exact += (hi - lo) as u128 * factors[i];
            }
        }
        match &self.scaled {
            Some((_, denom)) => exact as f64 / denom,
            None => acc,
        }
    }

    fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.levels
            .iter()
            .flat_map(|(_, w, s)| s.iter().map(move |&x| (x, *w)))
    }
}

/// `max_w sum_{zeta : cones of zeta and w meet} 1/E(zeta)` at `z`, with
/// cone aperture `theta` and every overlap test widened by `widen`.
pub fn m_sum_at_widened(
    f: &TrigPolynomial,
    z: FlowPoint,
    t: f64,
    theta: f64,
    widen: f64,
    cap: usize,
) -> Result<f64> {
    let slopes = LevelSlopes::new(f.ell(), branch_slopes(f, z, t, cap)?);
    let mut best = 0.0f64;
    for (slope, w) in slopes.iter() {
        let own = theta * w + widen;
        best = best.max(slopes.weight_in(slope, |v| theta * v + own));
    }
    Ok(best)
}

/// `m(f,t)` summand at a single point: the largest total weight of branches
/// whose cones (aperture `theta`) meet a given branch's cone. The branch
/// itself always counts.
pub fn m_sum_at(f: &TrigPolynomial, z: FlowPoint, t: f64, theta: f64, cap: usize) -> Result<f64> {
    m_sum_at_widened(f, z, t, theta, 0.0, cap)
}

/// `max_L n(f,t,z,L)`: the largest total weight of branches whose widened
/// cone (half-width `2 theta l^-n`) contains a common line. The candidate
/// lines are every cone center and boundary plus `nl` evenly spaced slopes
/// across the slope range; the maximum of a sum of interval indicators is
/// attained at an interval endpoint, so the result is exact.
pub fn n_sum_at(
    f: &TrigPolynomial,
    z: FlowPoint,
    t: f64,
    theta: f64,
    nl: usize,
    cap: usize,
) -> Result<f64> {
    let slopes = LevelSlopes::new(f.ell(), branch_slopes(f, z, t, cap)?);
    let width = |w: f64| 2.0 * theta * w;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut best = 0.0f64;
    for (slope, w) in slopes.iter() {
        let r = width(w);
        lo = lo.min(slope - r);
        hi = hi.max(slope + r);
        for c in [slope - r, slope, slope + r] {
            best = best.max(slopes.weight_in(c, width));
        }
    }
    if nl > 1 && hi > lo {
        for k in 0..nl {
            let c = lo + (hi - lo) * k as f64 / (nl - 1) as f64;
            best = best.max(slopes.weight_in(c, width));
        }
    }
    Ok(best)
}

fn check_grid(nx: usize, ns: usize) -> Result<()> {
    if nx == 0 || ns == 0 {
        return Err(Error::invalid("grid sizes must be positive"));
    }
    Ok(())
}

/// Deterministic argmax: the largest value, ties broken by lowest index.
fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Grid estimate of `m(f,t)`. In certified mode every overlap test is
/// widened by `2 theta_K / nx`, which bounds how far branch slopes move
/// between neighbouring grid columns.
pub fn m_of_t(
    f: &TrigPolynomial,
    class: &CeilingClass,
    t: f64,
    nx: usize,
    ns: usize,
    certified: bool,
    cap: usize,
) -> Result<TransversalityEstimate> {
    check_grid(nx, ns)?;
    let grid = Grid::new(nx, ns, 0);
    let points = grid.points(f);
    let slack = if certified {
        2.0 * class.theta_k / nx as f64
    } else {
        0.0
    };
    let pairs: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&z| {
            let m = m_sum_at(f, z, t, class.theta_f, cap)?;
            let upper = if certified {
                m_sum_at_widened(f, z, t, class.theta_f, slack, cap)?
            } else {
                m
            };
            Ok((m, upper))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (idx, m_value) = argmax(&values);
    let m_upper = pairs.iter().map(|p| p.1).fold(m_value, f64::max);
    let z = points[idx];
    Ok(TransversalityEstimate {
        t,
        m_value,
        m_upper,
        n_value: None,
        grid,
        slack,
        m_location: MaxLocation {
            x: z.x,
            s: z.s,
            on_section: z.s == 0.0,
        },
    })
}

/// Grid estimate of `n(f,t)` (maximum over the grid and over lines).
pub fn n_of_t(
    f: &TrigPolynomial,
    class: &CeilingClass,
    t: f64,
    grid: Grid,
    cap: usize,
) -> Result<f64> {
    check_grid(grid.nx, grid.ns)?;
    if grid.nl < 8 {
        return Err(Error::invalid(format!("nL must be >= 8, got {}", grid.nl)));
    }
    let values: Vec<f64> = grid
        .points(f)
        .par_iter()
        .map(|&z| n_sum_at(f, z, t, class.theta_f, grid.nl, cap))
        .collect::<Result<_>>()?;
    Ok(argmax(&values).1)
}

/// `m` and `n` at one time on the same grid.
pub fn estimate(
    f: &TrigPolynomial,
    class: &CeilingClass,
    t: f64,
    grid: Grid,
    certified: bool,
    cap: usize,
) -> Result<TransversalityEstimate> {
    let mut est = m_of_t(f, class, t, grid.nx, grid.ns, certified, cap)?;
    est.n_value = Some(n_of_t(f, class, t, grid, cap)?);
    est.grid = grid;
    Ok(est)
}

/// Fitted per-unit-time rate of `m_value` over a sweep.
pub fn m_rate(estimates: &[TransversalityEstimate]) -> Result<f64> {
    let samples: Vec<(f64, f64)> = estimates.iter().map(|e| (e.t, e.m_value)).collect();
    Ok(exponent_fit(&samples)?.rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMethod {
    Grid,
    Periodic,
}

/// Estimate of the minimum expansion rate of the semi-flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMinEstimate {
    pub method: LambdaMethod,
    pub value: f64,
    /// The time `t` for the grid method, the maximal period for the
    /// periodic method.
    pub horizon: f64,
    /// Largest Birkhoff average of `f` found (periodic method), or
    /// `t / n` at the slowest grid point.
    pub beta_max: f64,
}

/// Largest period accepted by the periodic-orbit method.
pub const MAX_PERIOD: u32 = 20;

/// Minimum expansion rate.
///
/// The grid method returns `(min_z l^n(x, s + t))^(1/t)` over `nx` section
/// points and `ns` heights. The periodic method scans every point
/// `k / (l^p - 1)` for `p <= horizon`, takes the largest orbit average
/// `beta_max` of `f` and returns `l^(1 / beta_max)`.
pub fn lambda_min(
    f: &TrigPolynomial,
    method: LambdaMethod,
    horizon: f64,
    nx: usize,
    ns: usize,
) -> Result<LambdaMinEstimate> {
    if !(horizon >= 1.0) {
        return Err(Error::invalid(format!("horizon must be >= 1, got {horizon}")));
    }
    let l = f.ell() as f64;
    match method {
        LambdaMethod::Grid => {
            check_grid(nx, ns)?;
            let grid = Grid::new(nx, ns, 0);
            let min_n = grid
                .points(f)
                .par_iter()
                .map(|z| flow_count(f, z.x, z.s + horizon))
                .min()
                .unwrap_or(0);
            let value = l.powf(min_n as f64 / horizon);
            Ok(LambdaMinEstimate {
                method,
                value,
                horizon,
                beta_max: if min_n == 0 {
                    f64::INFINITY
                } else {
                    horizon / min_n as f64
                },
            })
        }
        LambdaMethod::Periodic => {
            let period = horizon.floor() as u32;
            if period > MAX_PERIOD {
                return Err(Error::resource(
                    format!("period {period} exceeds {MAX_PERIOD}"),
                    Some(MAX_PERIOD as f64),
                ));
            }
            let admissible = (24.0 / l.log2()).floor();
            if period as f64 > admissible {
                return Err(Error::resource(
                    format!("l^{period} periodic points exceed 2^24"),
                    Some(admissible),
                ));
            }
            let beta_max = (1..=period)
                .into_par_iter()
                .map(|p| max_orbit_average(f, p))
                .reduce(|| f64::NEG_INFINITY, f64::max);
            Ok(LambdaMinEstimate {
                method,
                value: l.powf(1.0 / beta_max),
                horizon: period as f64,
                beta_max,
            })
        }
    }
}

/// Largest average of `f` over `p` steps of the orbit of a point of
/// period dividing `p`. Orbits are followed exactly in integer arithmetic:
/// `tau(k / q) = (l k mod q) / q` with `q = l^p - 1`.
pub fn max_orbit_average(f: &TrigPolynomial, p: u32) -> f64 {
    let ell = f.ell() as u64;
    let q = ell.pow(p) - 1;
    let qf = q as f64;
    // Each point of period p is visited p times across its orbit; the
    // maximum is unaffected.
    (0..q)
        .into_par_iter()
        .map(|k0| {
            let mut k = k0;
            let mut sum = 0.0;
            for _ in 0..p {
                sum += f.value(k as f64 / qf);
                k = (k * ell) % q;
            }
            sum / p as f64
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}
