//! Perturbation machinery for generic ceilings: slope clusters, bump
//! families, the affine maps `G_{x,sigma}`, their Jacobians and a Monte Carlo
//! probe of the bad parameter set.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ceiling::{value_range, wrap, TrigPolynomial};
use crate::dynamics::{birkhoff, branch_point, circle_dist, Word};
use crate::error::{Error, Result};
use crate::fit::wilson_interval;
use crate::smooth::step;

/// Largest number of words `l^n` enumerated by [`slope_clusters`].
pub const MAX_CLUSTER_WORDS: u64 = 1 << 20;
/// Tolerance for deciding `tau^q(b(y)) = a(y)` in the predecessor order.
pub const ORDER_TOL: f64 = 1e-10;
/// Number of Monte Carlo shards in [`bad_set_probe`].
pub const PROBE_SHARDS: u64 = 8;

/// Inner plateau of the bump profile, in units of the support radius.
const PLATEAU: f64 = 1.0 / 3.0;
const RAMP: f64 = 0.2;
const OUTER: f64 = 0.8;
/// Depth of the negative lobe, chosen so the profile integrates to zero.
/// With the symmetric step, `int_0^1 step((v-a)/w) dv = 1 - a - w/2`, so
/// `0 = 1 - (1+b)(17/30) + b/10` gives `b = 13/14`.
const LOBE: f64 = 13.0 / 14.0;

/// Even profile `g` on `[-1, 1]`: 1 on `|v| <= 1/3`, a negative lobe of
/// depth 13/14, zero near `|v| = 1`, and zero mean.
fn profile(v: f64) -> f64 {
    let a = v.abs();
    if a >= 1.0 {
        return 0.0;
    }
    1.0 - (1.0 + LOBE) * step((a - PLATEAU) / RAMP) + LOBE * step((a - OUTER) / RAMP)
}

/// `int_{-1}^{u} g(v) dv` by composite Gauss-Legendre quadrature.
fn profile_integral(u: f64) -> f64 {
    const NODES: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const WEIGHTS: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    let u = u.clamp(-1.0, 1.0);
    // Split at the ends of the ramps so each piece is smooth.
    const BREAKS: [f64; 7] = [-0.8, -PLATEAU - RAMP, -PLATEAU, 0.0, PLATEAU, PLATEAU + RAMP, 0.8];
    let mut cuts = vec![-1.0];
    cuts.extend(BREAKS.iter().copied().filter(|&b| b < u));
    cuts.push(u);
    let panels = 32;
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (node, w) in NODES.iter().zip(WEIGHTS) {
                acc += w * profile(mid + 0.5 * h * node);
            }
        }
        total += 0.5 * h * acc;
    }
    total
}

/// A smooth periodic bump `phi` whose derivative is `amplitude * l^nu` on
/// the inner third of its support `|x - center| < radius`, and bounded by
/// twice that everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub radius: f64,
    pub nu: u32,
    /// Derivative plateau `l^nu` before amplitude scaling.
    pub plateau: f64,
    pub amplitude: f64,
}

impl Bump {
    fn offset(&self, x: f64) -> f64 {
        let d = wrap(x - self.center + 0.5) - 0.5;
        d / self.radius
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.amplitude * self.plateau * profile(self.offset(x))
    }

    pub fn value(&self, x: f64) -> f64 {
        let u = self.offset(x);
        if u.abs() >= 1.0 {
            return 0.0;
        }
        self.amplitude * self.plateau * self.radius * profile_integral(u)
    }

    /// Upper bound on `|phi|`.
    pub fn sup(&self) -> f64 {
        // The antiderivative peaks where the profile changes sign.
        let peak = (0..=200)
            .map(|i| profile_integral(i as f64 / 200.0).abs())
            .fold(0.0, f64::max);
        self.amplitude.abs() * self.plateau * self.radius * peak * 1.01
    }

    pub fn scaled(&self, factor: f64) -> Bump {
        Bump {
            amplitude: self.amplitude * factor,
            ..*self
        }
    }
}

/// `f_t = f + sum_i t_i phi_i` for `t` in the box `[-epsilon, epsilon]^m`.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbationFamily {
    pub base: TrigPolynomial,
    pub directions: Vec<Bump>,
    pub epsilon: f64,
}

impl PerturbationFamily {
    /// Checks that `f_t > 0` throughout the parameter box.
    pub fn new(base: TrigPolynomial, directions: Vec<Bump>, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        let (f_min, _) = value_range(&base);
        let swing: f64 = directions.iter().map(Bump::sup).sum::<f64>() * epsilon;
        if f_min - swing <= 0.0 {
            return Err(Error::domain(format!(
                "f_t may vanish in the box: min f = {f_min}, perturbation bound = {swing}"
            )));
        }
        Ok(Self {
            base,
            directions,
            epsilon,
        })
    }

    pub fn ell(&self) -> u32 {
        self.base.ell()
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn value(&self, t: &[f64], x: f64) -> f64 {
        self.base.value(x) + t.iter().zip(&self.directions).map(|(ti, b)| ti * b.value(x)).sum::<f64>()
    }

    pub fn deriv(&self, t: &[f64], x: f64) -> f64 {
        self.base.deriv(x) + t.iter().zip(&self.directions).map(|(ti, b)| ti * b.deriv(x)).sum::<f64>()
    }

    fn max_nu(&self) -> u32 {
        self.directions.iter().map(|b| b.nu).max().unwrap_or(0)
    }
}

/// The constant chain `1 < beta < alpha < gamma < l` with the derived
/// exponent `delta` and threshold `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenericityParams {
    pub ell: u32,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub p: usize,
    pub nu: u32,
    pub delta: f64,
    pub n_threshold: u32,
}

impl GenericityParams {
    /// Validates the chain and derives `delta` and `N`; all violated
    /// conditions are reported together.
    pub fn new(ell: u32, gamma: f64, alpha: f64, beta: f64, p: usize, nu: u32) -> Result<Self> {
        let l = ell as f64;
        let mut bad = Vec::new();
        if ell < 2 {
            bad.push(format!("ell = {ell} < 2"));
        }
        if p == 0 {
            bad.push("p must be >= 1".to_string());
        }
        if !(1.0 < beta && beta < alpha && alpha < gamma && gamma < l) {
            bad.push(format!("need 1 < beta < alpha < gamma < l, got {beta}, {alpha}, {gamma}, {l}"));
        }
        let counting = beta.powi(-(p as i32)) * l * l;
        if !(counting < 1.0) {
            bad.push(format!("beta^-p l^2 = {counting} is not < 1"));
        }
        let kappa = ((nu + 1) as f64) * ((p + 1) as f64) * alpha.powi(-(nu as i32));
        if !(kappa < 1.0) {
            bad.push(format!("(nu+1)(p+1) alpha^-nu = {kappa} is not < 1"));
        }
        if !bad.is_empty() {
            return Err(Error::invalid(bad.join("; ")));
        }
        let delta = (gamma.ln() - alpha.ln()) / (l.ln() - alpha.ln());
        // l^nu alpha^n < gamma^n for n >= N.
        let first = nu as f64 * l.ln() / (gamma / alpha).ln();
        // l^-nu (gamma/beta)^n' (1 - kappa) >= 1 for n' >= delta N.
        let second = (nu as f64 * l.ln() - (1.0 - kappa).ln()) / (gamma / beta).ln();
        let n_threshold = ((first.floor() + 1.0).max((second / delta).ceil()).max((nu + 1) as f64)) as u32;
        Ok(Self {
            ell,
            gamma,
            alpha,
            beta,
            p,
            nu,
            delta,
            n_threshold,
        })
    }

    /// Smallest `rho` with `gamma^K < rho`.
    pub fn rho_threshold(&self, k: f64) -> f64 {
        self.gamma.powf(k)
    }

    /// Smallest `mu > nu` with `2 l^(nu-mu) / (1 - 1/l) <= 1/(4p)`.
    pub fn default_mu(&self) -> u32 {
        default_mu(self.ell, self.nu, self.p)
    }
}

pub fn default_mu(ell: u32, nu: u32, p: usize) -> u32 {
    let l = ell as f64;
    let target = 1.0 / (4.0 * p.max(1) as f64);
    let mut mu = nu + 1;
    while 2.0 * l.powi(nu as i32 - mu as i32) / (1.0 - 1.0 / l) > target {
        mu += 1;
    }
    mu
}

/// Largest set of length-`n` words whose slopes at `x_c` fit in one window.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeClusterReport {
    pub n: usize,
    pub base_word: Word,
    pub window: f64,
    pub max_cluster: usize,
    pub cluster_words: Vec<Word>,
    /// Slope range covered by the cluster.
    pub lo: f64,
    pub hi: f64,
}

impl SlopeClusterReport {
    /// `max_cluster^(1/n)`.
    pub fn growth(&self) -> f64 {
        (self.max_cluster as f64).powf(1.0 / self.n as f64)
    }

    /// Number of cluster words per `nu`-letter prefix, sorted by prefix.
    pub fn prefix_counts(&self, nu: usize) -> Vec<(Word, usize)> {
        let mut out: Vec<(Word, usize)> = Vec::new();
        let mut prefixes: Vec<Word> = self.cluster_words.iter().map(|w| w.prefix(nu)).collect();
        prefixes.sort();
        for w in prefixes {
            match out.last_mut() {
                Some((last, c)) if *last == w => *c += 1,
                _ => out.push((w, 1)),
            }
        }
        out
    }
}

/// Default cluster window `8 theta_K l^-n`.
pub fn default_window(theta_k: f64, ell: u32, n: usize) -> f64 {
    8.0 * theta_k * (ell as f64).powi(-(n as i32))
}

/// Slopes `sum_i l^-i f'([b]_i(x))` of every length-`n` word, indexed as
/// [`Word::from_index`]; shares prefix sums level by level.
pub fn all_slopes(f: &TrigPolynomial, n: usize, x: f64) -> Result<Vec<f64>> {
    let ell = f.ell();
    let total = (ell as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    if total > MAX_CLUSTER_WORDS {
        return Err(Error::resource(
            format!("l^n = {ell}^{n} words exceeds {MAX_CLUSTER_WORDS}"),
            Some(((MAX_CLUSTER_WORDS as f64).ln() / (ell as f64).ln()).floor()),
        ));
    }
    let l = ell as f64;
    let mut level = vec![(x, 0.0f64)];
    let mut scale = 1.0;
    for _ in 0..n {
        scale /= l;
        let mut next = Vec::with_capacity(level.len() * ell as usize);
        for &(y, acc) in &level {
            for a in 0..ell {
                let z = (y + a as f64) / l;
                next.push((z, acc + scale * f.deriv(z)));
            }
        }
        level = next;
    }
    Ok(level.into_iter().map(|(_, s)| s).collect())
}

/// Largest cluster of length-`n` slopes at `x_c` within `window` (default
/// `8 theta_K l^-n`), with windows anchored at sorted slope values.
pub fn slope_clusters(
    f: &TrigPolynomial,
    n: usize,
    c: &Word,
    window: f64,
) -> Result<SlopeClusterReport> {
    if n == 0 {
        return Err(Error::invalid("cluster length n must be >= 1"));
    }
    if !(window >= 0.0) || !window.is_finite() {
        return Err(Error::invalid(format!("window must be finite and >= 0, got {window}")));
    }
    let ell = f.ell();
    let x_c = branch_point(ell, c, 0.0);
    let slopes = all_slopes(f, n, x_c)?;
    let mut order: Vec<usize> = (0..slopes.len()).collect();
    order.sort_by(|&i, &j| slopes[i].total_cmp(&slopes[j]).then(i.cmp(&j)));
    let (mut best, mut best_at, mut hi_idx) = (0usize, 0usize, 0usize);
    for lo_idx in 0..order.len() {
        hi_idx = hi_idx.max(lo_idx);
        let limit = slopes[order[lo_idx]] + window;
        while hi_idx < order.len() && slopes[order[hi_idx]] <= limit {
            hi_idx += 1;
        }
        if hi_idx - lo_idx > best {
            best = hi_idx - lo_idx;
            best_at = lo_idx;
        }
    }
    let members = &order[best_at..best_at + best];
    let mut cluster_words: Vec<Word> = members
        .iter()
        .map(|&i| Word::from_index(i as u64, n, ell))
        .collect();
    cluster_words.sort();
    Ok(SlopeClusterReport {
        n,
        base_word: c.clone(),
        window,
        max_cluster: best,
        cluster_words,
        lo: slopes[members[0]],
        hi: slopes[*members.last().unwrap()],
    })
}

/// Linear part of `G_{x,sigma}`: row `i` holds
/// `sum_k l^-k (phi_j'([b_i]_k x) - phi_j'([b_0]_k x))` for `i = 1..=p`.
pub fn g_matrix(x: f64, sigma: &[Word], family: &PerturbationFamily) -> Result<DMatrix<f64>> {
    if sigma.len() < 2 {
        return Err(Error::invalid("sigma needs p+1 >= 2 words"));
    }
    let n = sigma[0].len();
    if let Some(w) = sigma.iter().find(|w| w.len() != n) {
        return Err(Error::invalid(format!(
            "word lengths differ: {} vs {n}",
            w.len()
        )));
    }
    let nu = family.max_nu() as usize;
    if n < nu {
        return Err(Error::invalid(format!("word length {n} below nu = {nu}")));
    }
    let m = family.len();
    let rows: Vec<Vec<f64>> = sigma
        .iter()
        .map(|w| path_derivatives(family, w, x))
        .collect();
    let p = sigma.len() - 1;
    Ok(DMatrix::from_fn(p, m, |i, j| rows[i + 1][j] - rows[0][j]))
}

/// `sum_k l^-k phi_j'([b]_k x)` for every direction `j`.
fn path_derivatives(family: &PerturbationFamily, word: &Word, x: f64) -> Vec<f64> {
    let l = family.ell() as f64;
    let mut out = vec![0.0; family.len()];
    let mut y = x;
    let mut scale = 1.0;
    for &a in word.letters() {
        y = (y + (a - 1) as f64) / l;
        scale /= l;
        for (o, b) in out.iter_mut().zip(&family.directions) {
            *o += scale * b.deriv(y);
        }
    }
    out
}

/// `sqrt(det(L L^T))` for a `p x m` matrix of rank `p`, else 0.
pub fn jacobian(l: &DMatrix<f64>) -> Result<f64> {
    let (p, m) = l.shape();
    if p > m {
        return Err(Error::invalid(format!("jacobian needs p <= m, got {p} x {m}")));
    }
    if p == 0 {
        return Ok(1.0);
    }
    let sv = l.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 || sv.iter().any(|&s| s <= 1e-12 * max) {
        return Ok(0.0);
    }
    Ok(sv.iter().product())
}

/// The bumps `phi_a`, `a in A^nu`, around one point `y`, with the
/// predecessor order used to separate their supports.
#[derive(Debug, Clone, Serialize)]
pub struct BumpFamily {
    pub y: f64,
    pub nu: u32,
    pub mu: u32,
    pub eps0: f64,
    /// Supremum of admissible `eps0` for this `(y, nu, mu)`.
    pub eps0_max: f64,
    /// Words of `A^nu` in lexicographic order, matching `bumps`.
    pub words: Vec<Word>,
    pub bumps: Vec<Bump>,
    /// `(i, j)` with `words[i] < words[j]` in the order (`tau^q(b(y)) = a(y)`).
    pub order: Vec<(usize, usize)>,
    /// Number of `b` with `b < a`, reflexively, for each `a`.
    pub predecessors: Vec<usize>,
}

impl BumpFamily {
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.order.contains(&(a, b))
    }

    /// Maximal elements of `subset` under the order, in the given order,
    /// truncated to `count`.
    pub fn select_maximal(&self, subset: &[usize], count: usize) -> Result<Vec<usize>> {
        let maximal: Vec<usize> = subset
            .iter()
            .copied()
            .filter(|&a| !subset.iter().any(|&b| b != a && self.precedes(a, b)))
            .collect();
        if maximal.len() < count {
            return Err(Error::PreconditionViolation(format!(
                "only {} maximal elements, {count} requested",
                maximal.len()
            )));
        }
        Ok(maximal.into_iter().take(count).collect())
    }

    /// The same bumps with every amplitude doubled.
    pub fn doubled(&self) -> Vec<Bump> {
        self.bumps.iter().map(|b| b.scaled(2.0)).collect()
    }
}

/// Points `a(y)` for `a in A^nu` and the order relation with horizon `mu`.
fn order_structure(ell: u32, y: f64, nu: u32, mu: u32) -> (Vec<Word>, Vec<f64>, Vec<(usize, usize)>) {
    let words: Vec<Word> = Word::all(nu as usize, ell).collect();
    let points: Vec<f64> = words.iter().map(|w| branch_point(ell, w, y)).collect();
    let l = ell as f64;
    let mut order = Vec::new();
    for (bi, &pb) in points.iter().enumerate() {
        let mut z = pb;
        for _q in 0..=mu {
            for (ai, &pa) in points.iter().enumerate() {
                if circle_dist(z, pa) < ORDER_TOL && !order.contains(&(ai, bi)) {
                    order.push((ai, bi));
                }
            }
            z = wrap(l * z);
        }
    }
    order.sort_unstable();
    (words, points, order)
}

/// Supremum of `eps0` such that `tau^i(U_b(eps0))` meets `U_a(eps0)` for
/// some `0 <= i <= mu` only when `a` precedes `b`, where `U_a(eps)` is the
/// arc of half-width `eps l^-nu` around `a(y)`.
pub fn max_admissible_eps0(ell: u32, y: f64, nu: u32, mu: u32) -> f64 {
    let (_, points, order) = order_structure(ell, y, nu, mu);
    eps0_bound(ell, nu, mu, &points, &order)
}

fn eps0_bound(ell: u32, nu: u32, mu: u32, points: &[f64], order: &[(usize, usize)]) -> f64 {
    let l = ell as f64;
    let base = l.powi(-(nu as i32));
    // Expanded arcs must stay shorter than the circle.
    let mut best = 0.5 * l.powi(nu as i32 - mu as i32);
    for (bi, &pb) in points.iter().enumerate() {
        let mut z = pb;
        for i in 0..=mu {
            let reach = l.powi(i as i32 - nu as i32) + base;
            for (ai, &pa) in points.iter().enumerate() {
                if order.binary_search(&(ai, bi)).is_ok() {
                    continue;
                }
                best = best.min(circle_dist(z, pa) / reach);
            }
            z = wrap(l * z);
        }
    }
    best
}

/// The bump family around `y`: `phi_a` is supported on `U_a(eps0)` and has
/// derivative `l^nu` on `U_a(eps0/3)`.
pub fn bump_family(ell: u32, y: f64, nu: u32, eps0: f64, mu: u32) -> Result<BumpFamily> {
    if ell < 2 {
        return Err(Error::invalid(format!("ell = {ell} < 2")));
    }
    if nu == 0 || mu <= nu {
        return Err(Error::invalid(format!("need 1 <= nu < mu, got nu = {nu}, mu = {mu}")));
    }
    let words_total = (ell as u64).checked_pow(nu).unwrap_or(u64::MAX);
    if words_total > 1 << 12 {
        return Err(Error::resource(format!("l^nu = {ell}^{nu} bumps exceeds 4096"), None));
    }
    if !(eps0 > 0.0) || !eps0.is_finite() {
        return Err(Error::invalid(format!("eps0 must be positive, got {eps0}")));
    }
    let y = wrap(y);
    let (words, points, order) = order_structure(ell, y, nu, mu);
    let eps0_max = eps0_bound(ell, nu, mu, &points, &order);
    if eps0 >= eps0_max {
        return Err(Error::invalid(format!(
            "eps0 = {eps0} too large: supports collide; maximal admissible eps0 is {eps0_max}"
        )));
    }
    let plateau = (ell as f64).powi(nu as i32);
    let radius = eps0 / plateau;
    let bumps = points
        .iter()
        .map(|&c| Bump {
            center: c,
            radius,
            nu,
            plateau,
            amplitude: 1.0,
        })
        .collect();
    let mut predecessors = vec![0usize; words.len()];
    for &(_, b) in &order {
        predecessors[b] += 1;
    }
    Ok(BumpFamily {
        y,
        nu,
        mu,
        eps0,
        eps0_max,
        words,
        bumps,
        order,
        predecessors,
    })
}

/// Bump families around each of `ys`, each at half its maximal admissible
/// `eps0`, with amplitudes doubled.
pub fn covering_directions(ell: u32, ys: &[f64], nu: u32, mu: u32) -> Result<Vec<Bump>> {
    let mut out = Vec::new();
    for &y in ys {
        let eps_max = max_admissible_eps0(ell, y, nu, mu);
        let fam = bump_family(ell, y, nu, 0.5 * eps_max, mu)?;
        out.extend(fam.doubled());
    }
    Ok(out)
}

/// Settings for [`bad_set_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub n: usize,
    /// Parameter points `t` drawn from the box.
    pub samples: u64,
    /// Number of `(c, sigma)` combinations kept after the Jacobian filter.
    pub combos: usize,
    /// Membership half-width in units of `theta_K l^-n`.
    pub window_factor: f64,
    pub theta_k: f64,
    pub seed: u64,
}

/// Outcome of [`bad_set_probe`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub n: usize,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    pub samples: u64,
    pub combos: usize,
    /// Draws of `(c, sigma)` rejected by the Jacobian filter.
    pub rejected: usize,
    pub window: f64,
}

/// One sampled event `Y(n, c, sigma)`, kept in affine form
/// `offset + L t` for the slope differences.
struct Event {
    offset: Vec<f64>,
    linear: DMatrix<f64>,
}

impl Event {
    fn contains(&self, t: &[f64], window: f64) -> bool {
        (0..self.offset.len()).all(|i| {
            let lt: f64 = (0..t.len()).map(|j| self.linear[(i, j)] * t[j]).sum();
            (self.offset[i] + lt).abs() <= window
        })
    }
}

/// The length-`n` word `c` whose cylinder contains `x`.
fn word_containing(ell: u32, n: usize, x: f64) -> Word {
    let l = ell as f64;
    let mut letters = vec![1u8; n];
    let mut z = wrap(x);
    // x = sum_j (c_{n+1-j} - 1) l^-j: the first base-l digit is the last letter.
    for j in 0..n {
        z *= l;
        let d = (z.floor() as u32).min(ell - 1);
        z -= d as f64;
        letters[n - 1 - j] = d as u8 + 1;
    }
    Word::new(letters, ell).expect("digits are in range")
}

/// Monte Carlo fraction of `t` in the parameter box for which `f_t` lies in
/// the union of sampled events `Y(n, c, sigma)`: all slope differences at
/// `x_c` between `b_i` and `b_0` within `window_factor * theta_K * l^-n`.
///
/// With nonempty directions, `(c, sigma)` pairs are kept only when
/// `Jac(G_{x_c, sigma}) >= 1`, and `x_c` is drawn near the bump centers so
/// that the filter can pass.
pub fn bad_set_probe(
    family: &PerturbationFamily,
    params: &GenericityParams,
    cfg: &ProbeConfig,
) -> Result<ProbeReport> {
    let ell = family.ell();
    if params.ell != ell {
        return Err(Error::invalid(format!(
            "params are for ell = {}, family has ell = {ell}",
            params.ell
        )));
    }
    if cfg.samples == 0 || cfg.combos == 0 {
        return Err(Error::invalid("probe needs samples >= 1 and combos >= 1"));
    }
    let n = cfg.n;
    let p = params.p;
    if n < family.max_nu() as usize || n == 0 {
        return Err(Error::invalid(format!("n = {n} below the bump depth")));
    }
    let m = family.len();
    if m > 0 && p > m {
        return Err(Error::invalid(format!("p = {p} exceeds m = {m} directions")));
    }
    let window = cfg.window_factor * cfg.theta_k * (ell as f64).powi(-(n as i32));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    let random_word = |rng: &mut ChaCha8Rng, len: usize| {
        let letters = (0..len).map(|_| rng.random_range(1..=ell) as u8).collect();
        Word::new(letters, ell).expect("letters are in range")
    };
    let mut events = Vec::with_capacity(cfg.combos);
    let mut rejected = 0usize;
    let max_draws = 200 * cfg.combos;
    let mut draws = 0usize;
    while events.len() < cfg.combos {
        if draws >= max_draws {
            return Err(Error::resource(
                format!("only {} of {} (c, sigma) draws passed the Jacobian filter", events.len(), draws),
                Some(events.len() as f64),
            ));
        }
        draws += 1;
        let c = if m == 0 {
            random_word(&mut rng, n)
        } else {
            // Snap x_c to the cylinder endpoint nearest the point y whose
            // preimage carries a random bump, so its plateau is reachable.
            let b = &family.directions[rng.random_range(0..m)];
            let y = wrap((ell as f64).powi(b.nu as i32) * b.center);
            let cells = (ell as f64).powi(n as i32);
            let k = (y * cells).round() % cells;
            word_containing(ell, n, (k + 0.5) / cells)
        };
        let x_c = branch_point(ell, &c, 0.0);
        let sigma: Vec<Word> = (0..=p).map(|_| random_word(&mut rng, n)).collect();
        let linear = if m == 0 {
            DMatrix::zeros(p, 0)
        } else {
            let l = g_matrix(x_c, &sigma, family)?;
            if jacobian(&l)? < 1.0 {
                rejected += 1;
                continue;
            }
            l
        };
        let s0 = birkhoff(&family.base, &sigma[0], x_c, 1)?;
        let offset = sigma[1..]
            .iter()
            .map(|w| birkhoff(&family.base, w, x_c, 1).map(|s| s - s0))
            .collect::<Result<Vec<_>>>()?;
        events.push(Event { offset, linear });
    }
    let per_shard = cfg.samples.div_ceil(PROBE_SHARDS);
    let hits: u64 = (0..PROBE_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let start = shard * per_shard;
            let count = per_shard.min(cfg.samples.saturating_sub(start));
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(shard);
            let mut t = vec![0.0; m];
            let mut hits = 0u64;
            for _ in 0..count {
                for ti in t.iter_mut() {
                    *ti = if family.epsilon > 0.0 {
                        rng.random_range(-family.epsilon..=family.epsilon)
                    } else {
                        0.0
                    };
                }
                if events.iter().any(|e| e.contains(&t, window)) {
                    hits += 1;
                }
            }
            hits
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let (ci_low, ci_high) = wilson_interval(hits, cfg.samples, 1.96);
    Ok(ProbeReport {
        n,
        fraction: hits as f64 / cfg.samples as f64,
        ci_low,
        ci_high,
        hits,
        samples: cfg.samples,
        combos: cfg.combos,
        rejected,
        window,
    })
}
