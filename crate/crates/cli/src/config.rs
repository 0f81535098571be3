//! Experiment configuration in TOML, validated in full before any run.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use susflow_core::aniso::{FrequencyCone, NormParams, Polarization, Support};
use susflow_core::ceiling::{classify_with_k, Harmonic, TrigPolynomial};
use susflow_core::dynamics::{FlowPoint, DEFAULT_BRANCH_CAP};
use susflow_core::genericity::GenericityParams;
use susflow_core::mixing::SeriesMode;
use susflow_core::spectral::{BoxPartition, Observable, MAX_EIGENVALUES};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Transversality,
    Mixing,
    Spectrum,
    Correlations,
    Norms,
    Genericity,
    Branches,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Experiment::Transversality => "transversality",
            Experiment::Mixing => "mixing",
            Experiment::Spectrum => "spectrum",
            Experiment::Correlations => "correlations",
            Experiment::Norms => "norms",
            Experiment::Genericity => "genericity",
            Experiment::Branches => "branches",
        };
        f.write_str(name)
    }
}

/// `cos * cos(2 pi k x) + sin * sin(2 pi k x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicConfig {
    pub k: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// `f = mean + sum harmonics + Psi(ell x) - Psi(x)`, with `Psi` given by
/// `potential`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeilingConfig {
    pub ell: u32,
    pub mean: f64,
    #[serde(default)]
    pub harmonics: Vec<HarmonicConfig>,
    #[serde(default)]
    pub potential: Vec<HarmonicConfig>,
}

impl CeilingConfig {
    pub fn build(&self) -> susflow_core::Result<TrigPolynomial> {
        let mut terms: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
        let mut add = |k: u32, cos: f64, sin: f64| {
            let e = terms.entry(k).or_insert((0.0, 0.0));
            e.0 += cos;
            e.1 += sin;
        };
        for h in &self.potential {
            add(h.k.saturating_mul(self.ell), h.cos, h.sin);
            add(h.k, -h.cos, -h.sin);
        }
        for h in &self.harmonics {
            add(h.k, h.cos, h.sin);
        }
        let harmonics = terms
            .into_iter()
            .filter(|(_, (c, s))| *c != 0.0 || *s != 0.0)
            .map(|(k, (c, s))| Harmonic::new(k, c, s))
            .collect();
        TrigPolynomial::new(self.ell, self.mean, harmonics)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransversalityBlock {
    pub times: Vec<f64>,
    pub nx: usize,
    pub ns: usize,
    /// Lines per point for `n(f,t)`; 0 skips `n`.
    pub nl: usize,
    pub certified: bool,
    pub cap: usize,
}

impl Default for TransversalityBlock {
    fn default() -> Self {
        TransversalityBlock {
            times: vec![2.0, 4.0, 6.0, 8.0],
            nx: 32,
            ns: 4,
            nl: 16,
            certified: false,
            cap: DEFAULT_BRANCH_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixingBlock {
    pub grid: usize,
    /// Defaults to the largest depth with `ell^depth <= 2^24`.
    pub depth: Option<u32>,
    pub mode: SeriesMode,
    pub tol_strict: Option<f64>,
    pub tol_clear: Option<f64>,
    /// Times for the eigenfunction check, run when the verdict is
    /// `NotWeaklyMixing`.
    pub eigen_times: Vec<f64>,
    pub eigen_nx: usize,
    pub eigen_ns: usize,
}

impl Default for MixingBlock {
    fn default() -> Self {
        MixingBlock {
            grid: 4096,
            depth: None,
            mode: SeriesMode::Aliased,
            tol_strict: None,
            tol_clear: None,
            eigen_times: vec![0.5, 2.0, 7.3],
            eigen_nx: 16,
            eigen_ns: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Fixed lattice of sample points in every box.
    Lattice,
    /// Lattice shifted by a random offset drawn from the run seed.
    Shifted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumBlock {
    pub t: f64,
    pub nx: usize,
    pub ns: usize,
    pub points_per_box: usize,
    pub k: usize,
    pub sampling: Sampling,
    /// Also estimate `m(f,t)^(1/2)` on a 32 x 4 grid.
    pub essential_bound: bool,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        SpectrumBlock {
            t: 1.0,
            nx: 64,
            ns: 8,
            points_per_box: 64,
            k: 6,
            sampling: Sampling::Lattice,
            essential_bound: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationsBlock {
    pub psi: Observable,
    pub phi: Observable,
    /// Explicit sample times; otherwise `0, dt, 2 dt, ...` up to `t_max`.
    pub times: Option<Vec<f64>>,
    pub t_max: f64,
    pub dt: f64,
    pub nx: usize,
    pub ns: usize,
}

impl Default for CorrelationsBlock {
    fn default() -> Self {
        let obs = Observable::Cutoff(Box::new(Observable::CosS(1)));
        CorrelationsBlock {
            psi: obs.clone(),
            phi: obs,
            times: None,
            t_max: 10.0,
            dt: 0.5,
            nx: 256,
            ns: 32,
        }
    }
}

impl CorrelationsBlock {
    pub fn time_list(&self) -> Vec<f64> {
        match &self.times {
            Some(t) => t.clone(),
            None => {
                let steps = (self.t_max / self.dt + 1e-9).floor() as usize;
                (0..=steps).map(|i| i as f64 * self.dt).collect()
            }
        }
    }
}

/// A smooth bump of radius `radius` at `(cx, cy)` modulating
/// `cos(kx x + ky y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Packet {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub kx: i32,
    pub ky: i32,
    pub amp: f64,
}

impl Packet {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let q = ((x - self.cx).powi(2) + (y - self.cy).powi(2)) / (self.radius * self.radius);
        if q >= 1.0 {
            0.0
        } else {
            self.amp * (-1.0 / (1.0 - q)).exp() * (self.kx as f64 * x + self.ky as f64 * y).cos()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub packets: Vec<Packet>,
}

impl TestFunction {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.packets.iter().map(|p| p.value(x, y)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsBlock {
    pub n: usize,
    pub support: Support,
    /// Slope interval `[lo, hi]` of the plus cone.
    pub plus: [f64; 2],
    pub minus: [f64; 2],
    /// Weak-norm exponent in `(0, 1/2)`.
    pub eps: f64,
    pub functions: Vec<TestFunction>,
    /// Additional random wave-packet functions drawn from the run seed.
    pub random: usize,
    /// Also compare with the norm on the `2n` grid.
    pub refinement: bool,
}

impl Default for NormsBlock {
    fn default() -> Self {
        NormsBlock {
            n: 32,
            support: Support::Central,
            plus: [-0.5, 0.5],
            minus: [2.0, -2.0],
            eps: 0.25,
            functions: Vec::new(),
            random: 0,
            refinement: true,
        }
    }
}

impl NormsBlock {
    pub fn polarization(&self) -> susflow_core::Result<Polarization> {
        Polarization::new(
            FrequencyCone::new(self.plus[0], self.plus[1]),
            FrequencyCone::new(self.minus[0], self.minus[1]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterBlock {
    pub n: Vec<usize>,
    /// Index of the base word, reduced modulo `ell^n` at each length.
    pub word: u64,
    /// Fixed window; otherwise `window_factor * theta_K * ell^-n`.
    pub window: Option<f64>,
    pub window_factor: f64,
}

impl Default for ClusterBlock {
    fn default() -> Self {
        ClusterBlock {
            n: (6..=12).collect(),
            word: 0,
            window: None,
            window_factor: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeBlock {
    /// Centers of the bump families.
    pub ys: Vec<f64>,
    /// Depth of the bumps: one bump per word of length `nu`.
    pub nu: u32,
    /// `nu` of the parameter chain `(nu+1)(p+1) alpha^-nu < 1`; defaults to
    /// the smallest value satisfying it.
    pub chain_nu: Option<u32>,
    /// Order-separation horizon; defaults to the smallest admissible value.
    pub mu: Option<u32>,
    pub epsilon: f64,
    pub n: Vec<usize>,
    pub samples: u64,
    pub combos: usize,
    pub window_factor: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub p: usize,
}

impl ProbeBlock {
    pub fn chain_nu(&self) -> u32 {
        self.chain_nu.unwrap_or_else(|| {
            (1..=256u32)
                .find(|&nu| {
                    ((nu + 1) as f64) * ((self.p + 1) as f64) * self.alpha.powi(-(nu as i32)) < 1.0
                })
                .unwrap_or(1)
        })
    }
}

impl Default for ProbeBlock {
    fn default() -> Self {
        ProbeBlock {
            ys: vec![0.25, 0.75],
            nu: 2,
            chain_nu: None,
            mu: None,
            epsilon: 0.2,
            n: vec![4, 6, 8],
            samples: 4000,
            combos: 32,
            window_factor: 10.0,
            gamma: 1.98,
            alpha: 1.95,
            beta: 1.9,
            p: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenericityBlock {
    pub clusters: Option<ClusterBlock>,
    pub probe: Option<ProbeBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchesBlock {
    pub x: f64,
    pub s: f64,
    pub t: f64,
    pub cap: usize,
    /// Cone aperture; defaults to `theta_f`.
    pub theta: Option<f64>,
}

impl Default for BranchesBlock {
    fn default() -> Self {
        BranchesBlock {
            x: 0.0,
            s: 0.0,
            t: 1.0,
            cap: DEFAULT_BRANCH_CAP,
            theta: None,
        }
    }
}

fn default_gamma0() -> f64 {
    0.9
}

fn default_classify_grid() -> usize {
    1024
}

fn yes() -> bool {
    true
}

/// One experiment. Execution settings (`output`, `workers`) are not echoed
/// into reports because they do not affect results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub ceiling: Option<CeilingConfig>,
    #[serde(default = "default_gamma0")]
    pub gamma0: f64,
    #[serde(default = "default_classify_grid")]
    pub classify_grid: usize,
    /// Raises the class constant `K` above its computed value.
    pub k_override: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Omits wall time so that reports are byte-identical across runs.
    #[serde(default = "yes")]
    pub deterministic: bool,
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    pub transversality: Option<TransversalityBlock>,
    pub mixing: Option<MixingBlock>,
    pub spectrum: Option<SpectrumBlock>,
    pub correlations: Option<CorrelationsBlock>,
    pub norms: Option<NormsBlock>,
    pub genericity: Option<GenericityBlock>,
    pub branches: Option<BranchesBlock>,
}

/// Parses and validates a config that names its experiment.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let cfg = parse_toml(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Syntax and schema only: unknown keys are rejected here.
pub fn parse_toml(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => line_column(text, span.start),
            None => (0, 0),
        };
        CliError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn check(errors: &mut Vec<String>, ok: bool, msg: impl FnOnce() -> String) {
    if !ok {
        errors.push(msg());
    }
}

fn check_times(errors: &mut Vec<String>, what: &str, times: &[f64]) {
    check(errors, !times.is_empty(), || format!("{what}: at least one time is required"));
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        errors.push(format!("{what}: times must be finite and >= 0, got {t}"));
    }
}

impl ExperimentConfig {
    /// Sets the experiment, rejecting a conflicting `experiment` key.
    pub fn select(&mut self, experiment: Experiment) -> Result<(), CliError> {
        match self.experiment {
            Some(e) if e != experiment => Err(CliError::Validation(vec![format!(
                "config names experiment `{e}` but `{experiment}` was requested"
            )])),
            _ => {
                self.experiment = Some(experiment);
                Ok(())
            }
        }
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment.expect("validated config names its experiment")
    }

    /// Checks every precondition of the selected experiment and reports all
    /// violations together.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errors = Vec::new();
        let Some(experiment) = self.experiment else {
            return Err(CliError::Validation(vec![
                "`experiment` is required (or run a subcommand)".into(),
            ]));
        };
        if self.workers == Some(0) {
            errors.push("workers must be >= 1".into());
        }
        let ceiling = match (&self.ceiling, experiment) {
            (None, Experiment::Norms) => None,
            (None, _) => {
                errors.push("[ceiling] table is required".into());
                None
            }
            (Some(ceiling), _) => match ceiling.build() {
                Ok(f) => Some(f),
                Err(e) => {
                    errors.push(format!("ceiling: {e}"));
                    None
                }
            },
        };
        if let Some(ceiling) = &self.ceiling {
            let ell = ceiling.ell as f64;
            check(&mut errors, self.gamma0 > 1.0 / ell && self.gamma0 < 1.0, || {
                format!("gamma0 = {} must lie in (1/ell, 1) = ({}, 1)", self.gamma0, 1.0 / ell)
            });
        }
        if let (Some(f), true) = (&ceiling, experiment != Experiment::Norms) {
            if self.gamma0 > 1.0 / f.ell() as f64 && self.gamma0 < 1.0 {
                if let Err(e) = classify_with_k(f, self.gamma0, self.classify_grid, self.k_override) {
                    errors.push(format!("ceiling class: {e}"));
                }
            }
        }
        match experiment {
            Experiment::Transversality => self.check_transversality(&mut errors),
            Experiment::Mixing => self.check_mixing(&mut errors, ceiling.as_ref()),
            Experiment::Spectrum => self.check_spectrum(&mut errors),
            Experiment::Correlations => self.check_correlations(&mut errors),
            Experiment::Norms => self.check_norms(&mut errors),
            Experiment::Genericity => self.check_genericity(&mut errors, ceiling.as_ref()),
            Experiment::Branches => self.check_branches(&mut errors, ceiling.as_ref()),
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(errors))
        }
    }

    fn check_transversality(&self, errors: &mut Vec<String>) {
        let b = self.transversality.clone().unwrap_or_default();
        check_times(errors, "transversality", &b.times);
        check(errors, b.nx >= 1 && b.ns >= 1, || "transversality: nx and ns must be >= 1".into());
        check(errors, b.nl == 0 || b.nl >= 8, || format!("transversality: nl must be 0 or >= 8, got {}", b.nl));
        check(errors, b.cap >= 1, || "transversality: cap must be >= 1".into());
    }

    fn check_mixing(&self, errors: &mut Vec<String>, f: Option<&TrigPolynomial>) {
        let b = self.mixing.clone().unwrap_or_default();
        check(errors, b.grid >= 256 && b.grid.is_power_of_two(), || {
            format!("mixing: grid must be a power of 2 >= 256, got {}", b.grid)
        });
        if let (Some(depth), Some(f)) = (b.depth, f) {
            let points = (f.ell() as f64).powi(depth as i32);
            check(errors, depth >= 1 && points <= (1u64 << 24) as f64, || {
                format!("mixing: depth must lie in 1..=log_ell(2^24), got {depth}")
            });
        }
        if let (Some(s), Some(c)) = (b.tol_strict, b.tol_clear) {
            check(errors, s < c, || format!("mixing: tol_strict ({s}) must be below tol_clear ({c})"));
        }
        if b.tol_strict.is_some() != b.tol_clear.is_some() {
            errors.push("mixing: set both tol_strict and tol_clear, or neither".into());
        }
        if !b.eigen_times.is_empty() {
            check_times(errors, "mixing eigen_times", &b.eigen_times);
        }
        check(errors, b.eigen_nx >= 1 && b.eigen_ns >= 1, || "mixing: eigen_nx and eigen_ns must be >= 1".into());
    }

    fn check_spectrum(&self, errors: &mut Vec<String>) {
        let b = self.spectrum.clone().unwrap_or_default();
        check(errors, b.t.is_finite() && b.t >= 0.0, || format!("spectrum: t must be >= 0, got {}", b.t));
        if let Err(e) = BoxPartition::new(b.nx, b.ns) {
            errors.push(format!("spectrum: {e}"));
        }
        check(errors, b.points_per_box >= 16, || {
            format!("spectrum: points_per_box must be >= 16, got {}", b.points_per_box)
        });
        check(errors, (1..=MAX_EIGENVALUES).contains(&b.k), || {
            format!("spectrum: k must lie in 1..={MAX_EIGENVALUES}, got {}", b.k)
        });
        check(errors, !b.essential_bound || b.t > 0.0, || "spectrum: essential_bound needs t > 0".into());
    }

    fn check_correlations(&self, errors: &mut Vec<String>) {
        let b = self.correlations.clone().unwrap_or_default();
        if b.times.is_none() {
            check(errors, b.dt > 0.0 && b.dt.is_finite(), || format!("correlations: dt must be > 0, got {}", b.dt));
            check(errors, b.t_max >= 0.0 && b.t_max.is_finite(), || {
                format!("correlations: t_max must be >= 0, got {}", b.t_max)
            });
            if b.dt > 0.0 && b.t_max / b.dt > 1e6 {
                errors.push("correlations: more than 10^6 sample times".into());
            }
        }
        if b.times.is_some() || (b.dt > 0.0 && b.t_max >= 0.0) {
            check_times(errors, "correlations", &b.time_list());
        }
        check(errors, b.nx >= 1 && b.ns >= 1, || "correlations: nx and ns must be >= 1".into());
        check(errors, b.nx.saturating_mul(b.ns) <= 1 << 24, || "correlations: nx * ns exceeds 2^24".into());
    }

    fn check_norms(&self, errors: &mut Vec<String>) {
        let b = self.norms.clone().unwrap_or_default();
        check(errors, b.n >= 4 && b.n.is_power_of_two(), || {
            format!("norms: n must be a power of 2 >= 4, got {}", b.n)
        });
        if let Err(e) = b.polarization() {
            errors.push(format!("norms: {e}"));
        }
        if let Err(e) = NormParams::weak(b.eps) {
            errors.push(format!("norms: {e}"));
        }
        check(errors, !b.functions.is_empty() || b.random > 0, || {
            "norms: give at least one test function or random > 0".into()
        });
        for (i, g) in b.functions.iter().enumerate() {
            check(errors, !g.packets.is_empty(), || format!("norms: function {i} has no packets"));
            for p in &g.packets {
                if !(p.radius > 0.0) {
                    errors.push(format!("norms: function {i} has a packet with radius {}", p.radius));
                    continue;
                }
                // Inside [pi/2, 3pi/2]^2 every sample outside the central
                // half of the grid vanishes.
                let inside = |c: f64| c - p.radius >= 0.5 * PI && c + p.radius <= 1.5 * PI;
                if b.support == Support::Central && !(inside(p.cx) && inside(p.cy)) {
                    errors.push(format!(
                        "norms: function {i} has a packet at ({}, {}) with radius {} reaching outside [pi/2, 3pi/2]^2",
                        p.cx, p.cy, p.radius
                    ));
                }
            }
        }
    }

    fn check_genericity(&self, errors: &mut Vec<String>, f: Option<&TrigPolynomial>) {
        let b = self.genericity.clone().unwrap_or_default();
        if b.clusters.is_none() && b.probe.is_none() {
            errors.push("genericity: give a [genericity.clusters] or [genericity.probe] table".into());
        }
        if let Some(c) = &b.clusters {
            check(errors, !c.n.is_empty(), || "genericity.clusters: n is empty".into());
            if let (Some(f), Some(n)) = (f, c.n.iter().max()) {
                let words = (f.ell() as f64).powi(*n as i32);
                check(errors, words <= (1u64 << 20) as f64, || {
                    format!("genericity.clusters: ell^{n} words exceed 2^20")
                });
            }
            check(errors, c.n.iter().all(|&n| n >= 1), || "genericity.clusters: n must be >= 1".into());
            if let Some(w) = c.window {
                check(errors, w >= 0.0 && w.is_finite(), || format!("genericity.clusters: window must be >= 0, got {w}"));
            }
            check(errors, c.window_factor >= 0.0, || "genericity.clusters: window_factor must be >= 0".into());
        }
        if let Some(p) = &b.probe {
            if let Some(f) = f {
                if let Err(e) = GenericityParams::new(f.ell(), p.gamma, p.alpha, p.beta, p.p, p.chain_nu()) {
                    errors.push(format!("genericity.probe: {e}"));
                }
            }
            check(errors, !p.ys.is_empty(), || "genericity.probe: ys is empty".into());
            check(errors, p.ys.iter().all(|y| (0.0..1.0).contains(y)), || {
                "genericity.probe: ys must lie in [0, 1)".into()
            });
            check(errors, !p.n.is_empty(), || "genericity.probe: n is empty".into());
            check(errors, p.n.iter().all(|&n| n >= p.nu as usize && n >= 1), || {
                format!("genericity.probe: every n must be >= nu = {}", p.nu)
            });
            check(errors, p.samples >= 1 && p.combos >= 1, || "genericity.probe: samples and combos must be >= 1".into());
            check(errors, p.epsilon >= 0.0, || "genericity.probe: epsilon must be >= 0".into());
            if let Some(mu) = p.mu {
                check(errors, mu > p.nu, || format!("genericity.probe: mu = {mu} must exceed nu = {}", p.nu));
            }
        }
    }

    fn check_branches(&self, errors: &mut Vec<String>, f: Option<&TrigPolynomial>) {
        let b = self.branches.clone().unwrap_or_default();
        if let Some(f) = f {
            if let Err(e) = FlowPoint::new(b.x, b.s).check(f) {
                errors.push(format!("branches: {e}"));
            }
        }
        check(errors, b.t.is_finite() && b.t >= 0.0, || format!("branches: t must be >= 0, got {}", b.t));
        if let Some(theta) = b.theta {
            check(errors, theta >= 0.0, || format!("branches: theta must be >= 0, got {theta}"));
        }
    }
}
