//! The suspension semi-flow over `x -> l*x mod 1`, symbolic words and the
//! inverse branches of the time-`t` map.
//!
//! A word `a = (a_1, ..., a_n)` over `{1, ..., l}` names the inverse branch
//! `a(x)` obtained by applying the affine preimages `y -> (y + a_i - 1) / l`
//! for `i = 1, ..., n` in order. The prefix `[a]_i(x)` is the point reached
//! after the first `i` letters, so `tau^(n-i)(a(x)) = [a]_i(x)` and the
//! Birkhoff sum of the roof along the branch is `sum_i f([a]_i(x))`.
//!
//! Slopes follow the convention `ds/dx = sum_i l^-i f'([a]_i(x))`. Only slope
//! differences enter the cone tests, so a global sign flip would change
//! nothing downstream.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ceiling::{wrap, TrigPolynomial};
use crate::error::{Error, Result};

/// Default cap on the number of branches produced by one enumeration.
pub const DEFAULT_BRANCH_CAP: usize = 1 << 24;

/// Points whose height lands within this distance below the roof are
/// assigned to the next level, with height zero.
pub const ROOF_EPS: f64 = 1e-12;

/// A word over the alphabet `{1, ..., l}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(letters: Vec<u8>, ell: u32) -> Result<Self> {
        if let Some(&bad) = letters.iter().find(|&&a| a == 0 || a as u32 > ell) {
            return Err(Error::invalid(format!("letter {bad} outside 1..={ell}")));
        }
        Ok(Word(letters))
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// The word whose base-`l` digits (most significant first) are `index`,
    /// i.e. the `index`-th word of length `n` in lexicographic order.
    pub fn from_index(mut index: u64, n: usize, ell: u32) -> Self {
        let mut letters = vec![1u8; n];
        for slot in letters.iter_mut().rev() {
            *slot = (index % ell as u64) as u8 + 1;
            index /= ell as u64;
        }
        Word(letters)
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `[a]_p`: the first `p` letters.
    pub fn prefix(&self, p: usize) -> Word {
        Word(self.0[..p.min(self.0.len())].to_vec())
    }

    /// Concatenation `self` followed by `other`.
    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// All words of length `n` in lexicographic order.
    pub fn all(n: usize, ell: u32) -> impl Iterator<Item = Word> {
        let total = (ell as u64).pow(n as u32);
        (0..total).map(move |i| Word::from_index(i, n, ell))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&a| a < 10) {
            for a in &self.0 {
                write!(f, "{a}")?;
            }
        } else {
            for (i, a) in self.0.iter().enumerate() {
                if i > 0 {
                    f.write_str(".")?;
                }
                write!(f, "{a}")?;
            }
        }
        Ok(())
    }
}

/// A point `(x, s)` of the region under the graph of the ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub x: f64,
    pub s: f64,
}

impl FlowPoint {
    pub fn new(x: f64, s: f64) -> Self {
        FlowPoint { x, s }
    }

    /// Checks `0 <= x < 1` and `0 <= s < f(x)`.
    pub fn check(&self, f: &TrigPolynomial) -> Result<()> {
        if !(0.0..1.0).contains(&self.x) {
            return Err(Error::domain(format!("x = {} outside [0, 1)", self.x)));
        }
        let h = f.value(self.x);
        if !(self.s >= 0.0 && self.s < h) {
            return Err(Error::domain(format!(
                "s = {} outside [0, f(x)) = [0, {h})",
                self.s
            )));
        }
        Ok(())
    }
}

/// The cone `{(xi, eta) : |eta - center * xi| <= half_width * |xi|}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub center_slope: f64,
    pub half_width: f64,
}

impl Cone {
    pub fn new(center_slope: f64, half_width: f64) -> Self {
        Cone {
            center_slope,
            half_width,
        }
    }

    /// Whether the cones share a nonzero vector.
    pub fn intersects(&self, other: &Cone) -> bool {
        (self.center_slope - other.center_slope).abs() <= self.half_width + other.half_width
    }

    /// Whether the line of slope `sigma` lies in the cone.
    pub fn contains_slope(&self, sigma: f64) -> bool {
        (sigma - self.center_slope).abs() <= self.half_width
    }
}

/// One inverse branch of the time-`t` map at a target point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub word: Word,
    pub preimage: FlowPoint,
    /// `E = l^level`.
    pub expansion: f64,
    pub slope: f64,
    pub level: usize,
    pub cone: Cone,
}

/// Left endpoint `x_a` and width `l^-n` of the cylinder interval `P(a)`.
pub fn word_interval(ell: u32, word: &Word) -> Result<(f64, f64)> {
    if word.is_empty() {
        return Err(Error::invalid("word_interval needs a nonempty word"));
    }
    Ok((branch_point(ell, word, 0.0), (ell as f64).powi(-(word.len() as i32))))
}

/// `a(x)`: the unique point of `P(a)` with `tau^n(a(x)) = x`.
pub fn branch_point(ell: u32, word: &Word, x: f64) -> f64 {
    let l = ell as f64;
    word.letters()
        .iter()
        .fold(x, |y, &a| (y + (a - 1) as f64) / l)
}

/// Birkhoff sums along the branch `word` at `x`:
/// order 0 gives `sum_i f([a]_i(x))`, order 1 gives `sum_i l^-i f'([a]_i(x))`
/// and order 2 gives `sum_i l^-2i f''([a]_i(x))`.
pub fn birkhoff(f: &TrigPolynomial, word: &Word, x: f64, order: u32) -> Result<f64> {
    if order > 2 {
        return Err(Error::invalid(format!("Birkhoff order {order} outside 0..=2")));
    }
    let l = f.ell() as f64;
    let step = l.powi(-(order as i32));
    let mut y = x;
    let mut scale = 1.0;
    let mut acc = 0.0;
    for &a in word.letters() {
        y = (y + (a - 1) as f64) / l;
        scale *= step;
        acc += scale * f.eval(y, order)?;
    }
    Ok(acc)
}

/// `n(x, T; f)`: the largest `n` with `f^(n)(x) <= T`.
pub fn flow_count(f: &TrigPolynomial, x: f64, horizon: f64) -> usize {
    let mut y = x;
    let mut sum = 0.0;
    let mut n = 0;
    loop {
        let next = sum + f.value(y);
        if next > horizon {
            return n;
        }
        sum = next;
        y = f.tau(y);
        n += 1;
    }
}

/// `T^t(x, s) = (tau^n x, s + t - f^(n)(x))` with `n = n(x, s + t; f)`.
pub fn time_t_map(f: &TrigPolynomial, z: FlowPoint, t: f64) -> Result<FlowPoint> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
    }
    z.check(f)?;
    Ok(flow_unchecked(f, z, t))
}

/// [`time_t_map`] without argument checks; used in inner loops.
#[inline]
pub fn flow_unchecked(f: &TrigPolynomial, z: FlowPoint, t: f64) -> FlowPoint {
    let horizon = z.s + t;
    let mut y = z.x;
    let mut sum = 0.0;
    loop {
        let next = sum + f.value(y);
        if next > horizon {
            return FlowPoint::new(y, horizon - sum);
        }
        sum = next;
        y = f.tau(y);
    }
}

/// Per-leaf data handed to a branch visitor.
#[derive(Debug, Clone, Copy)]
pub struct Leaf<'a> {
    pub word: &'a [u8],
    pub y: f64,
    pub s_prime: f64,
    pub slope: f64,
    pub level: usize,
}

/// Depth-first enumeration of the inverse branches of `T^t` at `z`, in
/// lexicographic word order. Fails once more than `cap` branches are found.
pub fn visit_branches<V>(
    f: &TrigPolynomial,
    z: FlowPoint,
    t: f64,
    cap: usize,
    visitor: V,
) -> Result<usize>
where
    V: FnMut(Leaf<'_>),
{
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
    }
    z.check(f)?;
    let mut walker = Walker {
        f,
        l: f.ell() as f64,
        deficit: t - z.s,
        cap,
        count: 0,
        word: Vec::new(),
        visitor,
    };
    walker.descend(z.x, 0.0, 0.0, 1.0).map_err(|_| {
        Error::resource(
            format!("more than {cap} inverse branches at (x={}, s={}), t={t}", z.x, z.s),
            Some(admissible_time(f, z.s, cap)),
        )
    })?;
    Ok(walker.count)
}

struct CapExceeded;

struct Walker<'a, V> {
    f: &'a TrigPolynomial,
    l: f64,
    /// `t - s`: the roof time the branch must accumulate.
    deficit: f64,
    cap: usize,
    count: usize,
    word: Vec<u8>,
    visitor: V,
}

impl<V: FnMut(Leaf<'_>)> Walker<'_, V> {
    /// `y` is the current prefix point, `sum` its Birkhoff sum, `slope` the
    /// partial slope and `scale = l^-depth`.
    fn descend(&mut self, y: f64, sum: f64, slope: f64, scale: f64) -> Result<(), CapExceeded> {
        if sum >= self.deficit - ROOF_EPS {
            self.count += 1;
            if self.count > self.cap {
                return Err(CapExceeded);
            }
            (self.visitor)(Leaf {
                word: &self.word,
                y,
                s_prime: (sum - self.deficit).max(0.0),
                slope,
                level: self.word.len(),
            });
            return Ok(());
        }
        let child_scale = scale / self.l;
        for a in 1..=self.f.ell() {
            let child = (y + (a - 1) as f64) / self.l;
            let (v, d) = self.f.value_and_deriv(child);
            self.word.push(a as u8);
            let r = self.descend(child, sum + v, slope + child_scale * d, child_scale);
            self.word.pop();
            r?;
        }
        Ok(())
    }
}

/// A time up to which enumeration from height `s` is guaranteed to stay
/// within `cap` branches: every branch has level at most
/// `ceil((t - s) / min f)`.
pub fn admissible_time(f: &TrigPolynomial, s: f64, cap: usize) -> f64 {
    let n = 1024;
    let f_min = (0..n)
        .map(|i| f.value(i as f64 / n as f64))
        .fold(f64::INFINITY, f64::min);
    let levels = ((cap as f64).ln() / (f.ell() as f64).ln()).floor();
    s + f_min * levels
}

/// All inverse branches of `T^t` at `z`, with cones of aperture `theta`
/// pushed forward (half-width `theta * l^-n`).
pub fn inverse_branches(
    f: &TrigPolynomial,
    z: FlowPoint,
    t: f64,
    theta: f64,
    cap: usize,
) -> Result<Vec<Branch>> {
    if !(theta >= 0.0) {
        return Err(Error::invalid(format!("cone aperture must be >= 0, got {theta}")));
    }
    let l = f.ell() as f64;
    let ell = f.ell();
    let mut out = Vec::new();
    visit_branches(f, z, t, cap, |leaf| {
        let e = l.powi(leaf.level as i32);
        out.push(Branch {
            word: Word(leaf.word.to_vec()),
            preimage: FlowPoint::new(leaf.y, leaf.s_prime),
            expansion: e,
            slope: leaf.slope,
            level: leaf.level,
            cone: Cone::new(leaf.slope, theta * l.powi(-(leaf.level as i32))),
        });
        debug_assert!(leaf.word.iter().all(|&a| a as u32 <= ell));
    })?;
    Ok(out)
}

/// Compact `(slope, level)` pairs of all branches, for the overlap sums.
pub fn branch_slopes(f: &TrigPolynomial, z: FlowPoint, t: f64, cap: usize) -> Result<Vec<(f64, u32)>> {
    let mut out = Vec::new();
    visit_branches(f, z, t, cap, |leaf| out.push((leaf.slope, leaf.level as u32)))?;
    Ok(out)
}

/// Wrap-aware distance on the circle.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    d.min(1.0 - d)
}
