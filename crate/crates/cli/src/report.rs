//! Experiment dispatch and the report envelope.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use susflow_core::aniso::{
    aniso_norm, embedding_check, parseval_defect, partition_defect, refinement_check,
    GridFunction2D, NormBreakdown, NormParams, Support,
};
use susflow_core::ceiling::{classify_with_k, CeilingClass, TrigPolynomial, CR_SURROGATE_CAVEAT};
use susflow_core::dynamics::{inverse_branches, FlowPoint, Word, DEFAULT_BRANCH_CAP};
use susflow_core::fit::RateFit;
use susflow_core::genericity::{
    bad_set_probe, covering_directions, default_mu, slope_clusters,
    GenericityParams, PerturbationFamily, ProbeConfig, ProbeReport,
};
use susflow_core::mixing::{
    classify_residual, cobounding_potential, default_depth, default_tolerances,
    eigenfunction_check, SeriesMode, Verdict,
};
use susflow_core::spectral::{build_ulam, correlation, decay_fit, spectrum, BoxPartition, SpectrumReport};
use susflow_core::transversality::{estimate, m_of_t, m_rate, Grid, MaxLocation, GRID_CAVEAT};

use crate::config::{Experiment, ExperimentConfig, Packet, Sampling, TestFunction};
use crate::emit::to_json_compact;
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct TransversalityRecord {
    pub t: f64,
    pub m_value: f64,
    pub m_upper: f64,
    pub n_value: Option<f64>,
    pub grid: Grid,
    pub slack: f64,
    /// Per-unit-time rate fitted over the whole sweep (needs >= 3 times).
    pub fitted_rate: Option<f64>,
    pub m_location: MaxLocation,
    pub caveat: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingPayload {
    pub c: f64,
    pub depth: u32,
    pub grid: usize,
    pub mode: SeriesMode,
    pub tail_bound: f64,
    pub residual_sup: f64,
    pub psi_mean: f64,
    pub verdict: Verdict,
    pub tol_strict: f64,
    pub tol_clear: f64,
    pub caveat: Option<String>,
    pub eigenfunction_defect: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationSample {
    pub t: f64,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationPayload {
    pub psi_id: String,
    pub phi_id: String,
    pub descriptor: String,
    pub samples: Vec<CorrelationSample>,
    /// Exponential fit of `|Cor_t|` when at least 3 samples are nonzero.
    pub decay_fit: Option<RateFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormRecord {
    pub index: usize,
    pub source: &'static str,
    pub l2: f64,
    pub strong: NormBreakdown,
    pub weak: NormBreakdown,
    pub weak_le_strong: bool,
    pub embedding_ratio: Option<f64>,
    pub parseval_defect: f64,
    /// Relative change of the strong norm on the doubled grid.
    pub refinement: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormsPayload {
    pub n: usize,
    pub support: Support,
    pub plus: [f64; 2],
    pub minus: [f64; 2],
    pub eps: f64,
    pub partition_defect: f64,
    pub functions: Vec<NormRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterRecord {
    pub n: usize,
    pub base_word: String,
    pub window: f64,
    pub max_cluster: usize,
    pub growth: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRecord {
    pub epsilon: f64,
    pub nu: u32,
    pub mu: u32,
    pub chain_nu: u32,
    pub delta: f64,
    pub n_threshold: u32,
    pub directions: usize,
    #[serde(flatten)]
    pub report: ProbeReport,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GenericityRecord {
    Cluster(ClusterRecord),
    Probe(ProbeRecord),
}

/// One inverse branch in the documented dump schema.
#[derive(Debug, Clone, Serialize)]
pub struct BranchRow {
    pub word: String,
    pub n: usize,
    pub y: f64,
    pub s_prime: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchesPayload {
    pub x: f64,
    pub s: f64,
    pub t: f64,
    pub theta: f64,
    pub count: usize,
    /// `sum 1/E`, equal to 1 up to rounding.
    pub weight_sum: f64,
    pub branches: Vec<BranchRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorPayload {
    pub kind: &'static str,
    pub message: String,
    /// Largest value of the driving parameter known to fit the resource
    /// caps; for branch enumeration this is the admissible time `t`.
    pub admissible: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Transversality(Vec<TransversalityRecord>),
    Mixing(MixingPayload),
    Spectrum(SpectrumReport),
    Correlations(CorrelationPayload),
    Norms(NormsPayload),
    Genericity(Vec<GenericityRecord>),
    Branches(BranchesPayload),
    Error(ErrorPayload),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    /// SHA-256 of `blob <len>\0<config json>`, as git hashes blobs.
    pub config_hash: String,
    /// Seconds; omitted in deterministic mode.
    pub wall_time_s: Option<f64>,
    pub caveats: Vec<String>,
    pub payload: Payload,
}

impl RunReport {
    fn new(cfg: &ExperimentConfig, start: Instant, caveats: Vec<String>, payload: Payload) -> Self {
        RunReport {
            experiment: cfg.experiment(),
            config: cfg.clone(),
            config_hash: config_hash(cfg),
            wall_time_s: (!cfg.deterministic).then(|| start.elapsed().as_secs_f64()),
            caveats,
            payload,
        }
    }

    /// Report for a run that failed after validation.
    pub fn failure(cfg: &ExperimentConfig, err: &CliError) -> Self {
        let admissible = match err {
            CliError::Core(susflow_core::Error::ResourceLimit { admissible, .. }) => *admissible,
            _ => None,
        };
        let payload = Payload::Error(ErrorPayload {
            kind: err.kind(),
            message: err.to_string(),
            admissible,
        });
        let cfg = resolved(cfg);
        RunReport {
            experiment: cfg.experiment(),
            config_hash: config_hash(&cfg),
            config: cfg,
            wall_time_s: None,
            caveats: Vec::new(),
            payload,
        }
    }
}

/// Git-style content hash of the echoed config.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let body = to_json_compact(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", body.len()).as_bytes());
    hasher.update(&body);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// The config with the selected experiment's block filled with defaults,
/// so the echo shows every parameter used.
pub fn resolved(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    match c.experiment() {
        Experiment::Transversality => {
            c.transversality.get_or_insert_with(Default::default);
        }
        Experiment::Mixing => {
            c.mixing.get_or_insert_with(Default::default);
        }
        Experiment::Spectrum => {
            c.spectrum.get_or_insert_with(Default::default);
        }
        Experiment::Correlations => {
            c.correlations.get_or_insert_with(Default::default);
        }
        Experiment::Norms => {
            c.norms.get_or_insert_with(Default::default);
        }
        Experiment::Genericity => {
            c.genericity.get_or_insert_with(Default::default);
        }
        Experiment::Branches => {
            c.branches.get_or_insert_with(Default::default);
        }
    }
    c
}

/// Runs a validated config on the current rayon pool.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let cfg = resolved(cfg);
    let start = Instant::now();
    let (caveats, payload) = match cfg.experiment() {
        Experiment::Transversality => run_transversality(&cfg)?,
        Experiment::Mixing => run_mixing(&cfg)?,
        Experiment::Spectrum => run_spectrum(&cfg)?,
        Experiment::Correlations => run_correlations(&cfg)?,
        Experiment::Norms => run_norms(&cfg)?,
        Experiment::Genericity => run_genericity(&cfg)?,
        Experiment::Branches => run_branches(&cfg)?,
    };
    Ok(RunReport::new(&cfg, start, caveats, payload))
}

type Outcome = Result<(Vec<String>, Payload), CliError>;

fn ceiling(cfg: &ExperimentConfig) -> Result<TrigPolynomial, CliError> {
    Ok(cfg.ceiling.as_ref().expect("validated").build()?)
}

fn class(cfg: &ExperimentConfig, f: &TrigPolynomial) -> Result<CeilingClass, CliError> {
    Ok(classify_with_k(f, cfg.gamma0, cfg.classify_grid, cfg.k_override)?)
}

fn run_transversality(cfg: &ExperimentConfig) -> Outcome {
    let b = cfg.transversality.as_ref().expect("resolved");
    let f = ceiling(cfg)?;
    let class = class(cfg, &f)?;
    let grid = Grid::new(b.nx, b.ns, b.nl);
    let estimates = b
        .times
        .iter()
        .map(|&t| {
            if b.nl > 0 {
                estimate(&f, &class, t, grid, b.certified, b.cap)
            } else {
                m_of_t(&f, &class, t, b.nx, b.ns, b.certified, b.cap)
            }
        })
        .collect::<susflow_core::Result<Vec<_>>>()?;
    let fitted_rate = m_rate(&estimates).ok();
    let records = estimates
        .into_iter()
        .map(|e| TransversalityRecord {
            t: e.t,
            m_value: e.m_value,
            m_upper: e.m_upper,
            n_value: e.n_value,
            grid: e.grid,
            slack: e.slack,
            fitted_rate,
            m_location: e.m_location,
            caveat: GRID_CAVEAT,
        })
        .collect();
    let mut caveats = vec![GRID_CAVEAT.to_string()];
    if b.certified {
        caveats.push(CR_SURROGATE_CAVEAT.to_string());
    }
    Ok((caveats, Payload::Transversality(records)))
}

fn run_mixing(cfg: &ExperimentConfig) -> Outcome {
    let b = cfg.mixing.as_ref().expect("resolved");
    let f = ceiling(cfg)?;
    let depth = b.depth.unwrap_or_else(|| default_depth(f.ell()));
    let report = cobounding_potential(&f, b.grid, depth, b.mode)?;
    let (tol_strict, tol_clear) = match (b.tol_strict, b.tol_clear) {
        (Some(s), Some(c)) => (s, c),
        _ => default_tolerances(report.tail_bound),
    };
    let verdict = classify_residual(report.residual_sup, tol_strict, tol_clear)?;
    let eigenfunction_defect = if verdict.verdict == Verdict::NotWeaklyMixing && !b.eigen_times.is_empty() {
        Some(eigenfunction_check(&report, &f, &b.eigen_times, tol_strict, b.eigen_nx, b.eigen_ns)?)
    } else {
        None
    };
    let caveats = verdict.caveat.iter().cloned().collect();
    let payload = MixingPayload {
        c: report.c,
        depth,
        grid: report.grid,
        mode: report.mode,
        tail_bound: report.tail_bound,
        residual_sup: report.residual_sup,
        psi_mean: report.psi_mean,
        verdict: verdict.verdict,
        tol_strict,
        tol_clear,
        caveat: verdict.caveat,
        eigenfunction_defect,
    };
    Ok((caveats, Payload::Mixing(payload)))
}

fn run_spectrum(cfg: &ExperimentConfig) -> Outcome {
    let b = cfg.spectrum.as_ref().expect("resolved");
    let f = ceiling(cfg)?;
    let seed = (b.sampling == Sampling::Shifted).then_some(cfg.seed);
    let op = build_ulam(&f, b.t, BoxPartition::new(b.nx, b.ns)?, b.points_per_box, seed)?;
    let mut report = spectrum(&op, b.k)?;
    let mut caveats = vec![report.caveat.clone()];
    if b.essential_bound {
        let class = class(cfg, &f)?;
        let m = m_of_t(&f, &class, b.t, 32, 4, false, DEFAULT_BRANCH_CAP)?;
        report.essential_bound = Some(m.m_value.sqrt());
        caveats.push(GRID_CAVEAT.to_string());
    }
    Ok((caveats, Payload::Spectrum(report)))
}

fn run_correlations(cfg: &ExperimentConfig) -> Outcome {
    let b = cfg.correlations.as_ref().expect("resolved");
    let f = ceiling(cfg)?;
    let curve = correlation(&f, &b.psi, &b.phi, &b.time_list(), b.nx, b.ns)?;
    let fit = decay_fit(&curve).ok().map(|d| d.fit);
    let payload = CorrelationPayload {
        psi_id: curve.psi_id,
        phi_id: curve.phi_id,
        descriptor: curve.descriptor,
        samples: curve
            .samples
            .iter()
            .map(|&(t, c)| CorrelationSample { t, re: c[0], im: c[1] })
            .collect(),
        decay_fit: fit,
    };
    Ok((Vec::new(), Payload::Correlations(payload)))
}

/// Wave packets inside `[0.55 pi, 1.45 pi]^2`, clear of the padding margin.
fn random_function(rng: &mut ChaCha8Rng) -> TestFunction {
    let count = rng.random_range(1..=3);
    let packets = (0..count)
        .map(|_| Packet {
            cx: PI * rng.random_range(0.8..1.2),
            cy: PI * rng.random_range(0.8..1.2),
            radius: PI * rng.random_range(0.1..0.25),
            kx: rng.random_range(-12..=12),
            ky: rng.random_range(-12..=12),
            amp: rng.random_range(-1.0..1.0),
        })
        .collect();
    TestFunction { packets }
}

fn run_norms(cfg: &ExperimentConfig) -> Outcome {
    let b = cfg.norms.as_ref().expect("resolved");
    let theta = b.polarization()?;
    let weak_params = NormParams::weak(b.eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let functions: Vec<(&'static str, TestFunction)> = b
        .functions
        .iter()
        .map(|g| ("config", g.clone()))
        .chain((0..b.random).map(|_| ("random", random_function(&mut rng))))
        .collect();
    let mut records = Vec::with_capacity(functions.len());
    for (index, (source, g)) in functions.iter().enumerate() {
        let eval = |x: f64, y: f64| g.value(x, y);
        let u = GridFunction2D::from_fn(b.n, b.support, eval)?;
        let strong = aniso_norm(&u, &theta, NormParams::strong())?;
        let weak = aniso_norm(&u, &theta, weak_params)?;
        let l2 = u.l2_norm();
        records.push(NormRecord {
            index,
            source,
            l2,
            weak_le_strong: weak.total <= strong.total,
            strong,
            weak,
            embedding_ratio: if l2 > 0.0 { Some(embedding_check(&u, &theta)?) } else { None },
            parseval_defect: parseval_defect(&u, &theta)?,
            refinement: if b.refinement {
                Some(refinement_check(eval, b.n, b.support, &theta, NormParams::strong())?)
            } else {
                None
            },
        });
    }
    let payload = NormsPayload {
        n: b.n,
        support: b.support,
        plus: b.plus,
        minus: b.minus,
        eps: b.eps,
        partition_defect: partition_defect(&theta, b.n)?,
        functions: records,
    };
    Ok((Vec::new(), Payload::Norms(payload)))
}

fn run_genericity(cfg: &ExperimentConfig) -> Outcome {
    let b = cfg.genericity.as_ref().expect("resolved");
    let f = ceiling(cfg)?;
    let class = class(cfg, &f)?;
    let ell = f.ell();
    let mut records = Vec::new();
    if let Some(c) = &b.clusters {
        for &n in &c.n {
            let words = (ell as u64).pow(n as u32);
            let base = Word::from_index(c.word % words, n, ell);
            let window = c
                .window
                .unwrap_or_else(|| c.window_factor * class.theta_k * (ell as f64).powi(-(n as i32)));
            let r = slope_clusters(&f, n, &base, window)?;
            records.push(GenericityRecord::Cluster(ClusterRecord {
                n,
                base_word: base.to_string(),
                window,
                max_cluster: r.max_cluster,
                growth: r.growth(),
                lo: r.lo,
                hi: r.hi,
            }));
        }
    }
    if let Some(p) = &b.probe {
        let params = GenericityParams::new(ell, p.gamma, p.alpha, p.beta, p.p, p.chain_nu())?;
        let mu = p.mu.unwrap_or_else(|| default_mu(ell, p.nu, p.p));
        let directions = covering_directions(ell, &p.ys, p.nu, mu)?;
        let m = directions.len();
        let family = PerturbationFamily::new(f.clone(), directions, p.epsilon)?;
        for &n in &p.n {
            let probe = ProbeConfig {
                n,
                samples: p.samples,
                combos: p.combos,
                window_factor: p.window_factor,
                theta_k: class.theta_k,
                seed: cfg.seed,
            };
            records.push(GenericityRecord::Probe(ProbeRecord {
                epsilon: p.epsilon,
                nu: p.nu,
                mu,
                chain_nu: params.nu,
                delta: params.delta,
                n_threshold: params.n_threshold,
                directions: m,
                report: bad_set_probe(&family, &params, &probe)?,
            }));
        }
    }
    Ok((vec![CR_SURROGATE_CAVEAT.to_string()], Payload::Genericity(records)))
}

fn run_branches(cfg: &ExperimentConfig) -> Outcome {
    let b = cfg.branches.as_ref().expect("resolved");
    let f = ceiling(cfg)?;
    let theta = match b.theta {
        Some(theta) => theta,
        None => class(cfg, &f)?.theta_f,
    };
    let branches = inverse_branches(&f, FlowPoint::new(b.x, b.s), b.t, theta, b.cap)?;
    let weight_sum = branches.iter().map(|br| 1.0 / br.expansion).sum();
    let rows = branches
        .iter()
        .map(|br| BranchRow {
            word: br.word.to_string(),
            n: br.level,
            y: br.preimage.x,
            s_prime: br.preimage.s,
            e: br.expansion,
            slope: br.slope,
        })
        .collect::<Vec<_>>();
    let payload = BranchesPayload {
        x: b.x,
        s: b.s,
        t: b.t,
        theta,
        count: rows.len(),
        weight_sum,
        branches: rows,
    };
    Ok((Vec::new(), Payload::Branches(payload)))
}
