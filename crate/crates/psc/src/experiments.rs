//! Deterministic experiment driver: config parsing, synthetic corpora,
//! calibration, scheme sweeps, and sub-problem benchmarks, all emitting CSV.
//!
//! A scenario is described by a TOML file with one section per concern
//! (`[system]`, `[channel]`, `[accuracy]`, `[payload]`, `[sweep]`,
//! `[corpus]`, `[solver]`, `[oracle]`, optional `[overhead]`). Every field
//! has a default, so the empty string is a valid config describing the
//! reference desk scenario (20 MHz, 30 dBm, 5 users, 4 antennas, 1 s
//! deadline). Decibel quantities are converted to linear units at load.
//!
//! Two run modes exist. `sweep` runs the full alternating optimizer for
//! every (scheme, seed, sweep value) cell and records one row per cell.
//! `subproblems` freezes all but one resource block and compares the
//! dedicated block solver against uniform and random allocations of that
//! resource. Cells are independent and run on a work pool; rows are
//! assembled in deterministic order, so identical configs produce
//! byte-identical CSV.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use rayon::prelude::*;
use serde::Deserialize;

use crate::compression::{
    calibrate_overhead, calibrate_theta, CompressError, CompressionMode, OverheadModel,
    OverheadSegment, SemanticSet,
};
use crate::link::{generate_channels, LinkError, PathlossModel, TransmitState};
use crate::optim::{
    self, alternating_optimize, grid_oracle, GridSpec, OptimError, ProblemInstance, Scheme,
    SolutionState, SolverParams,
};
use crate::pkg::{parse_corpus, Pkg, PkgError, RawRow, SampleCorpus, Triple};

/// Errors raised while loading configs or running experiment drivers.
#[derive(Debug)]
pub enum ExperimentError {
    /// Invalid or inconsistent configuration.
    Config(String),
    /// File system failure (path included in the message).
    Io(String),
    Graph(PkgError),
    Compress(CompressError),
    Link(LinkError),
    Solver(OptimError),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::Config(m) => write!(f, "config error: {m}"),
            ExperimentError::Io(m) => write!(f, "io error: {m}"),
            ExperimentError::Graph(e) => write!(f, "graph error: {e}"),
            ExperimentError::Compress(e) => write!(f, "compression error: {e}"),
            ExperimentError::Link(e) => write!(f, "link error: {e}"),
            ExperimentError::Solver(e) => write!(f, "solver error: {e}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<PkgError> for ExperimentError {
    fn from(e: PkgError) -> Self {
        ExperimentError::Graph(e)
    }
}

impl From<CompressError> for ExperimentError {
    fn from(e: CompressError) -> Self {
        ExperimentError::Compress(e)
    }
}

impl From<LinkError> for ExperimentError {
    fn from(e: LinkError) -> Self {
        ExperimentError::Link(e)
    }
}

impl From<OptimError> for ExperimentError {
    fn from(e: OptimError) -> Self {
        ExperimentError::Solver(e)
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// What a `psc run` invocation does with the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// Full alternating optimizer per (scheme, seed, sweep value).
    #[default]
    Sweep,
    /// Per-block comparison against uniform/random allocations.
    Subproblems,
}

/// Radio, compute, and framing parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub bandwidth_hz: f64,
    pub p_max_dbm: f64,
    pub f_max_hz: f64,
    pub t_max_s: f64,
    pub xi: f64,
    pub n0_dbm_hz: f64,
    pub r_bits: u32,
    pub antennas: usize,
    pub users: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            bandwidth_hz: 2.0e7,
            p_max_dbm: 30.0,
            f_max_hz: 1.0e9,
            t_max_s: 1.0,
            xi: 1.0e-28,
            n0_dbm_hz: -174.0,
            r_bits: 32,
            antennas: 4,
            users: 5,
        }
    }
}

/// Pathloss / geometry of the user drop.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// `annulus` (distances uniform in \[min, max\] metres), `fixed`
    /// (every user at `distance_km`), or `unit` (no pathloss).
    pub model: String,
    pub min_distance_m: f64,
    pub max_distance_m: f64,
    pub distance_km: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            model: "annulus".into(),
            min_distance_m: 50.0,
            max_distance_m: 500.0,
            distance_km: 0.2,
        }
    }
}

impl ChannelConfig {
    fn pathloss(&self) -> Result<PathlossModel, ExperimentError> {
        match self.model.as_str() {
            "annulus" => Ok(PathlossModel::UniformAnnulusM {
                min_m: self.min_distance_m,
                max_m: self.max_distance_m,
            }),
            "fixed" => Ok(PathlossModel::FixedDistanceKm(self.distance_km)),
            "unit" => Ok(PathlossModel::Unit),
            other => Err(ExperimentError::Config(format!(
                "unknown channel model {other:?} (expected annulus, fixed, or unit)"
            ))),
        }
    }
}

/// Recovery-accuracy floor and the optional compression-ratio cap override.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccuracyConfig {
    pub a_min: f64,
    /// When set, used as the ratio cap directly; otherwise it is
    /// calibrated from the corpus.
    pub theta_override: Option<f64>,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        AccuracyConfig {
            a_min: 0.9,
            theta_override: None,
        }
    }
}

/// Per-stream payload sizes, either configured directly or counted from
/// per-user semantic sets drawn from the corpus.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayloadConfig {
    /// `config` takes the sizes below as-is; `corpus` draws per-user sets
    /// and counts the shared/private split.
    pub source: String,
    pub shared_triples: u64,
    /// One entry per user, or a single entry broadcast to every user.
    pub private_triples: Vec<u64>,
}

impl Default for PayloadConfig {
    fn default() -> Self {
        PayloadConfig {
            source: "config".into(),
            shared_triples: 2000,
            private_triples: vec![1000],
        }
    }
}

/// Sweep axis, grid, seeds, and scheme list.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// `bandwidth` (values are Hz) or `data-size` (values multiply every
    /// configured payload size).
    pub axis: String,
    pub values: Vec<f64>,
    pub seeds: u32,
    pub seed_base: u64,
    pub schemes: Vec<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            axis: "bandwidth".into(),
            values: vec![5.0e6, 1.0e7, 2.0e7, 4.0e7, 8.0e7],
            seeds: 20,
            seed_base: 1,
            schemes: vec![
                "rsma".into(),
                "sdma".into(),
                "noma".into(),
                "conventional".into(),
            ],
        }
    }
}

/// Corpus source: a tab-separated/JSON-lines file, or a synthetic generator
/// (entity pairs with Zipf-popular relations over random samples).
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub source: String,
    pub path: String,
    pub pairs: usize,
    pub max_relations: usize,
    pub samples: u32,
    pub zipf_s: f64,
    /// Probability that a given pair occurs in a given sample.
    pub density: f64,
    pub corpus_seed: u64,
    /// How many representative sets calibration averages over.
    pub calibration_sets: usize,
    pub calibration_set_len: usize,
    /// CPU cycles charged per probability-cell evaluation when converting
    /// the measured compression cost into a cycle budget.
    pub cycles_per_cell: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            source: "synthetic".into(),
            path: String::new(),
            pairs: 40,
            max_relations: 6,
            samples: 150,
            zipf_s: 1.1,
            density: 0.5,
            corpus_seed: 7,
            calibration_sets: 8,
            calibration_set_len: 100,
            cycles_per_cell: 1000.0,
        }
    }
}

/// Iteration limits and tolerances forwarded to the optimizer.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub sca_max_iters: usize,
    pub outer_max_iters: usize,
    pub obj_rel_tol: f64,
    pub feas_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SolverParams::default();
        SolverConfig {
            sca_max_iters: p.sca_max_iters,
            outer_max_iters: p.outer_max_iters,
            obj_rel_tol: p.obj_rel_tol,
            feas_tol: p.feas_tol,
        }
    }
}

impl SolverConfig {
    fn params(&self) -> SolverParams {
        SolverParams {
            sca_max_iters: self.sca_max_iters,
            outer_max_iters: self.outer_max_iters,
            obj_rel_tol: self.obj_rel_tol,
            feas_tol: self.feas_tol,
        }
    }
}

/// Grid resolution for the exhaustive cross-check.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub power_levels: usize,
    pub ratio_levels: usize,
    pub freq_levels: usize,
    pub max_points: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        OracleConfig {
            power_levels: g.power_levels,
            ratio_levels: g.ratio_levels,
            freq_levels: g.freq_levels,
            max_points: g.max_points as u64,
        }
    }
}

/// Explicit compute-cost curve, bypassing corpus calibration.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OverheadConfig {
    pub segments: Vec<SegmentConfig>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub slope: f64,
    pub intercept: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
}

/// Complete experiment description; every field defaults to the reference
/// desk scenario.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: RunMode,
    pub system: SystemConfig,
    pub channel: ChannelConfig,
    pub accuracy: AccuracyConfig,
    pub payload: PayloadConfig,
    pub sweep: SweepConfig,
    pub corpus: CorpusConfig,
    pub solver: SolverConfig,
    pub oracle: OracleConfig,
    pub overhead: Option<OverheadConfig>,
}

/// Parse a TOML scenario and validate it.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ExperimentError> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
    validate_config(&cfg)?;
    Ok(cfg)
}

/// Load and validate a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ExperimentError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn validate_config(cfg: &ScenarioConfig) -> Result<(), ExperimentError> {
    let bad = |m: String| Err(ExperimentError::Config(m));
    let sys = &cfg.system;
    if sys.users == 0 || sys.antennas == 0 {
        return bad("system.users and system.antennas must be at least 1".into());
    }
    for (name, v) in [
        ("system.bandwidth_hz", sys.bandwidth_hz),
        ("system.f_max_hz", sys.f_max_hz),
        ("system.t_max_s", sys.t_max_s),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return bad(format!("{name} must be positive, got {v}"));
        }
    }
    if !(sys.xi >= 0.0) || !sys.xi.is_finite() {
        return bad(format!("system.xi must be finite and >= 0, got {}", sys.xi));
    }
    if sys.r_bits == 0 {
        return bad("system.r_bits must be at least 1".into());
    }
    if !(0.0..=1.0).contains(&cfg.accuracy.a_min) {
        return bad(format!(
            "accuracy.a_min must be in [0, 1], got {}",
            cfg.accuracy.a_min
        ));
    }
    if let Some(t) = cfg.accuracy.theta_override {
        if !(0.0..=1.0).contains(&t) {
            return bad(format!(
                "accuracy.theta_override must be in [0, 1], got {t}"
            ));
        }
    }
    match cfg.payload.source.as_str() {
        "config" | "corpus" => {}
        other => return bad(format!("payload.source must be config or corpus, got {other:?}")),
    }
    let np = cfg.payload.private_triples.len();
    if np != 1 && np != sys.users {
        return bad(format!(
            "payload.private_triples needs 1 or {} entries, got {np}",
            sys.users
        ));
    }
    SweepAxis::from_str(&cfg.sweep.axis)?;
    if cfg.sweep.values.is_empty() {
        return bad("sweep.values must not be empty".into());
    }
    if cfg.sweep.values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return bad("sweep.values must all be positive".into());
    }
    if cfg.sweep.seeds == 0 {
        return bad("sweep.seeds must be at least 1".into());
    }
    if cfg.sweep.schemes.is_empty() {
        return bad("sweep.schemes must not be empty".into());
    }
    for s in &cfg.sweep.schemes {
        Scheme::from_str(s).map_err(|e| ExperimentError::Config(e.to_string()))?;
    }
    match cfg.corpus.source.as_str() {
        "synthetic" | "file" => {}
        other => return bad(format!("corpus.source must be synthetic or file, got {other:?}")),
    }
    if cfg.corpus.pairs == 0 || cfg.corpus.max_relations == 0 || cfg.corpus.samples == 0 {
        return bad("corpus.pairs, corpus.max_relations, and corpus.samples must be >= 1".into());
    }
    if !(cfg.corpus.density > 0.0 && cfg.corpus.density <= 1.0) {
        return bad(format!(
            "corpus.density must be in (0, 1], got {}",
            cfg.corpus.density
        ));
    }
    if cfg.corpus.calibration_sets == 0 || cfg.corpus.calibration_set_len == 0 {
        return bad("corpus.calibration_sets and corpus.calibration_set_len must be >= 1".into());
    }
    if !(cfg.corpus.cycles_per_cell > 0.0) {
        return bad(format!(
            "corpus.cycles_per_cell must be positive, got {}",
            cfg.corpus.cycles_per_cell
        ));
    }
    cfg.channel.pathloss()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic corpora and calibration
// ---------------------------------------------------------------------------

/// Generate a synthetic corpus: `pairs` disjoint entity pairs, each with
/// 1..=`max_relations` relation slots whose popularity follows Zipf(s);
/// each pair occurs in each sample with probability `density`.
pub fn synth_corpus(cfg: &CorpusConfig) -> Result<SampleCorpus, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.corpus_seed);
    let s = cfg.zipf_s.max(1e-3);
    let mut rows = Vec::new();
    let relation_counts: Vec<usize> = (0..cfg.pairs)
        .map(|_| rng.gen_range(1..=cfg.max_relations))
        .collect();
    for sample in 0..cfg.samples {
        for (pair, &j) in relation_counts.iter().enumerate() {
            if rng.gen::<f64>() >= cfg.density {
                continue;
            }
            let slot = if j == 1 {
                0
            } else {
                let z = Zipf::new(j as u64, s)
                    .map_err(|e| ExperimentError::Config(format!("corpus.zipf_s: {e}")))?;
                (z.sample(&mut rng) as usize).saturating_sub(1).min(j - 1)
            };
            rows.push(RawRow {
                sample_id: u64::from(sample),
                head: format!("h{pair}"),
                relation: format!("r{slot}"),
                tail: format!("t{pair}"),
            });
        }
    }
    if rows.is_empty() {
        // A vanishing density can leave the corpus empty; keep it valid.
        rows.push(RawRow {
            sample_id: 0,
            head: "h0".into(),
            relation: "r0".into(),
            tail: "t0".into(),
        });
    }
    SampleCorpus::new(rows).map_err(ExperimentError::from)
}

/// Draw a semantic set from the graph: pairs uniform, relation slots
/// weighted by their observed counts.
fn draw_semantic_set(pkg: &Pkg, rng: &mut ChaCha8Rng, len: usize, owner: u32) -> SemanticSet {
    let mut triples = Vec::with_capacity(len);
    for _ in 0..len {
        let pair = rng.gen_range(0..pkg.pair_count());
        let entry = &pkg.pairs()[pair];
        let total = entry.total_count();
        let mut pick = rng.gen_range(0..total.max(1));
        let mut slot = 0;
        for (j, rel) in entry.relations().iter().enumerate() {
            if pick < rel.sample_count() {
                slot = j;
                break;
            }
            pick -= rel.sample_count();
        }
        let at = crate::pkg::TripleRef { pair, slot };
        triples.push(pkg.triple_at(at).expect("slot within pair"));
    }
    SemanticSet { owner, triples }
}

/// Group a file corpus into one semantic set per sample (largest first,
/// capped) for calibration.
fn sets_from_corpus(pkg: &Pkg, corpus: &SampleCorpus, cap: usize) -> Vec<SemanticSet> {
    // Canonical sample ids run 1..=Z.
    let mut by_sample: Vec<Vec<Triple>> = vec![Vec::new(); corpus.sample_count() as usize];
    for row in corpus.rows() {
        if let Some(t) = pkg.triple_from_labels(&row.head, &row.relation, &row.tail) {
            by_sample[row.sample as usize - 1].push(t);
        }
    }
    let mut sets: Vec<SemanticSet> = by_sample
        .into_iter()
        .enumerate()
        .filter(|(_, ts)| !ts.is_empty())
        .map(|(i, triples)| SemanticSet {
            owner: i as u32 + 1,
            triples,
        })
        .collect();
    sets.sort_by(|a, b| b.triples.len().cmp(&a.triples.len()).then(a.owner.cmp(&b.owner)));
    sets.truncate(cap.max(1));
    sets
}

/// Multiply every slope and intercept (cells → cycles).
fn scale_overhead(model: &OverheadModel, factor: f64) -> Result<OverheadModel, ExperimentError> {
    let segments = model
        .segments()
        .iter()
        .map(|s| OverheadSegment {
            slope: s.slope * factor,
            intercept: s.intercept * factor,
            omega_lo: s.omega_lo,
            omega_hi: s.omega_hi,
        })
        .collect();
    OverheadModel::new(segments).map_err(ExperimentError::from)
}

/// Scenario with every derived quantity resolved: linear power budget,
/// compute-cost curve, ratio cap, and per-stream payload sizes.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub p_max_w: f64,
    pub pathloss: PathlossModel,
    pub overhead: OverheadModel,
    pub theta: f64,
    /// Base payload per stream (index 0 is the shared stream).
    pub payload: Vec<u64>,
    pub params: SolverParams,
}

/// Resolve a config: convert units, and run corpus calibration for
/// whichever of the cost curve, ratio cap, and payload sizes the config
/// does not pin explicitly.
pub fn resolve(cfg: &ScenarioConfig) -> Result<ResolvedScenario, ExperimentError> {
    validate_config(cfg)?;
    let k = cfg.system.users;
    let p_max_w = 10f64.powf((cfg.system.p_max_dbm - 30.0) / 10.0);
    let pathloss = cfg.channel.pathloss()?;

    let needs_corpus = cfg.overhead.is_none()
        || cfg.accuracy.theta_override.is_none()
        || cfg.payload.source == "corpus";
    let graph = if needs_corpus {
        let corpus = match cfg.corpus.source.as_str() {
            "synthetic" => synth_corpus(&cfg.corpus)?,
            _ => {
                let text = fs::read_to_string(&cfg.corpus.path)
                    .map_err(|e| ExperimentError::Io(format!("{}: {e}", cfg.corpus.path)))?;
                parse_corpus(&text)?
            }
        };
        let pkg = Pkg::build(&corpus);
        let sets = match cfg.corpus.source.as_str() {
            "synthetic" => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.corpus.corpus_seed ^ 0x5ca1ab1e);
                (0..cfg.corpus.calibration_sets)
                    .map(|i| {
                        draw_semantic_set(&pkg, &mut rng, cfg.corpus.calibration_set_len, i as u32)
                    })
                    .collect()
            }
            _ => sets_from_corpus(&pkg, &corpus, cfg.corpus.calibration_sets),
        };
        if sets.is_empty() {
            return Err(ExperimentError::Config(
                "corpus produced no usable calibration sets".into(),
            ));
        }
        Some((pkg, sets))
    } else {
        None
    };

    let overhead = match &cfg.overhead {
        Some(o) => {
            let segments = o
                .segments
                .iter()
                .map(|s| OverheadSegment {
                    slope: s.slope,
                    intercept: s.intercept,
                    omega_lo: s.omega_lo,
                    omega_hi: s.omega_hi,
                })
                .collect();
            OverheadModel::new(segments)?
        }
        None => {
            let (pkg, sets) = graph.as_ref().expect("corpus resolved above");
            let cells = calibrate_overhead(pkg, sets)?;
            scale_overhead(&cells, cfg.corpus.cycles_per_cell)?
        }
    };

    let theta = match cfg.accuracy.theta_override {
        Some(t) => t,
        None => {
            let (pkg, sets) = graph.as_ref().expect("corpus resolved above");
            calibrate_theta(pkg, sets, cfg.accuracy.a_min, CompressionMode::Verified)?
        }
    };

    let payload = if cfg.payload.source == "corpus" {
        let (pkg, _) = graph.as_ref().expect("corpus resolved above");
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.corpus.corpus_seed ^ 0x0ddba11);
        let shared_pool =
            draw_semantic_set(pkg, &mut rng, cfg.payload.shared_triples as usize, 0);
        let sets: Vec<SemanticSet> = (1..=k)
            .map(|user| {
                let n = private_size(&cfg.payload, user - 1);
                let mut triples = shared_pool.triples.clone();
                triples.extend(
                    draw_semantic_set(pkg, &mut rng, n as usize, user as u32).triples,
                );
                SemanticSet {
                    owner: user as u32,
                    triples,
                }
            })
            .collect();
        let (shared, privates) = crate::compression::split_shared_private(&sets)?;
        let mut u = Vec::with_capacity(k + 1);
        u.push(shared.triples.len() as u64);
        u.extend(privates.iter().map(|p| p.triples.len() as u64));
        u
    } else {
        let mut u = Vec::with_capacity(k + 1);
        u.push(cfg.payload.shared_triples);
        u.extend((0..k).map(|i| private_size(&cfg.payload, i)));
        u
    };

    Ok(ResolvedScenario {
        p_max_w,
        pathloss,
        overhead,
        theta,
        payload,
        params: cfg.solver.params(),
    })
}

fn private_size(p: &PayloadConfig, user_idx: usize) -> u64 {
    if p.private_triples.len() == 1 {
        p.private_triples[0]
    } else {
        p.private_triples[user_idx]
    }
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Which quantity the sweep grid varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Values are absolute bandwidths in Hz; channel vectors stay fixed
    /// per seed while the noise power rescales.
    Bandwidth,
    /// Values multiply every configured payload size.
    DataSize,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Bandwidth => "bandwidth",
            SweepAxis::DataSize => "data-size",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bandwidth" => Ok(SweepAxis::Bandwidth),
            "data-size" => Ok(SweepAxis::DataSize),
            other => Err(ExperimentError::Config(format!(
                "unknown sweep axis {other:?} (expected bandwidth or data-size)"
            ))),
        }
    }
}

/// One optimizer run's outcome at a sweep cell.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub seed: u64,
    pub value: f64,
    pub feasible: bool,
    pub outer_iters: usize,
    pub e1: f64,
    pub e2: f64,
    pub e: f64,
    pub omegas: Vec<f64>,
    pub freqs: Vec<f64>,
    pub powers: Vec<f64>,
}

/// One fixed-allocation comparison row from the sub-problem benchmarks.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub subproblem: &'static str,
    pub variant: &'static str,
    pub seed: u64,
    pub value: f64,
    pub feasible: bool,
    pub e1: f64,
    pub e2: f64,
    pub e: f64,
}

/// Rows of one driver run plus everything needed to render the CSV.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub users: usize,
    /// `# key = value` config echo emitted before the header.
    pub echo: Vec<(String, String)>,
    pub sweep_rows: Vec<SweepRow>,
    pub bench_rows: Vec<BenchRow>,
}

impl SweepResult {
    /// Render the result deterministically (config echo, header, rows).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.echo {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        if self.bench_rows.is_empty() {
            out.push_str("scheme,seed,sweep_axis,sweep_value,feasible,outer_iters,e1,e2,e");
            for tag in ["omega", "f", "p"] {
                for s in 0..=self.users {
                    out.push_str(&format!(",{tag}_{s}"));
                }
            }
            out.push('\n');
            for r in &self.sweep_rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}",
                    r.scheme.label(),
                    r.seed,
                    self.axis,
                    fmt_f64(r.value),
                    r.feasible,
                    r.outer_iters,
                    fmt_f64(r.e1),
                    fmt_f64(r.e2),
                    fmt_f64(r.e)
                ));
                for vs in [&r.omegas, &r.freqs, &r.powers] {
                    for v in vs {
                        out.push_str(&format!(",{}", fmt_f64(*v)));
                    }
                }
                out.push('\n');
            }
        } else {
            out.push_str("subproblem,variant,seed,sweep_axis,sweep_value,feasible,e1,e2,e\n");
            for r in &self.bench_rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.subproblem,
                    r.variant,
                    r.seed,
                    self.axis,
                    fmt_f64(r.value),
                    r.feasible,
                    fmt_f64(r.e1),
                    fmt_f64(r.e2),
                    fmt_f64(r.e)
                ));
            }
        }
        out
    }

    /// Write the CSV to a file.
    pub fn write_csv(&self, path: &Path) -> Result<(), ExperimentError> {
        fs::write(path, self.to_csv_string())
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))
    }
}

/// Locale-independent float rendering: plain decimal in a readable range,
/// scientific elsewhere; always round-trips through `f64::from_str`.
fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Build the problem instance for one sweep cell.
fn cell_instance(
    cfg: &ScenarioConfig,
    rs: &ResolvedScenario,
    axis: SweepAxis,
    seed: u64,
    value: f64,
) -> Result<ProblemInstance, ExperimentError> {
    // Channels are always generated at the base bandwidth so a bandwidth
    // sweep sees identical fading per seed, with only the noise rescaled.
    let base = generate_channels(
        seed,
        cfg.system.users,
        cfg.system.antennas,
        &rs.pathloss,
        cfg.system.bandwidth_hz,
        cfg.system.n0_dbm_hz,
    )?;
    let channels = match axis {
        SweepAxis::Bandwidth => base.with_bandwidth(value)?,
        SweepAxis::DataSize => base,
    };
    let payload = match axis {
        SweepAxis::Bandwidth => rs.payload.clone(),
        SweepAxis::DataSize => rs
            .payload
            .iter()
            .map(|&u| (u as f64 * value).round() as u64)
            .collect(),
    };
    Ok(ProblemInstance {
        channels,
        payload,
        overhead: rs.overhead.clone(),
        theta: rs.theta,
        p_max_w: rs.p_max_w,
        f_max_hz: cfg.system.f_max_hz,
        t_max_s: cfg.system.t_max_s,
        xi: cfg.system.xi,
        r_bits: cfg.system.r_bits,
    })
}

fn infeasible_sweep_row(scheme: Scheme, seed: u64, value: f64, streams: usize) -> SweepRow {
    SweepRow {
        scheme,
        seed,
        value,
        feasible: false,
        outer_iters: 0,
        e1: 0.0,
        e2: 0.0,
        e: 0.0,
        omegas: vec![0.0; streams],
        freqs: vec![0.0; streams],
        powers: vec![0.0; streams],
    }
}

/// Run the full optimizer over every (scheme, seed, sweep value) cell.
/// Cells that turn out infeasible (or where the solver fails) are recorded
/// with `feasible = false` rather than aborting the sweep.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<SweepResult, ExperimentError> {
    let rs = resolve(cfg)?;
    let axis = SweepAxis::from_str(&cfg.sweep.axis)?;
    let schemes: Vec<Scheme> = cfg
        .sweep
        .schemes
        .iter()
        .map(|s| Scheme::from_str(s).map_err(|e| ExperimentError::Config(e.to_string())))
        .collect::<Result<_, _>>()?;
    let mut cells = Vec::new();
    for &scheme in &schemes {
        for si in 0..cfg.sweep.seeds {
            for &value in &cfg.sweep.values {
                cells.push((scheme, cfg.sweep.seed_base + u64::from(si), value));
            }
        }
    }
    let streams = cfg.system.users + 1;
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(scheme, seed, value)| -> Result<SweepRow, ExperimentError> {
            let inst = cell_instance(cfg, &rs, axis, seed, value)?;
            match alternating_optimize(&inst, scheme, &rs.params) {
                Ok((state, trace)) => Ok(SweepRow {
                    scheme,
                    seed,
                    value,
                    feasible: state.feasible,
                    outer_iters: trace.records.len().saturating_sub(1),
                    e1: state.e1,
                    e2: state.e2,
                    e: state.objective,
                    omegas: state.ratios,
                    freqs: state.compute,
                    powers: state.powers,
                }),
                Err(OptimError::InvalidInstance(m)) => Err(ExperimentError::Config(m)),
                Err(_) => Ok(infeasible_sweep_row(scheme, seed, value, streams)),
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(SweepResult {
        axis,
        users: cfg.system.users,
        echo: echo_lines(cfg, &rs),
        sweep_rows: rows,
        bench_rows: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Sub-problem benchmarks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Subproblem {
    Power,
    Ratio,
    Frequency,
}

impl Subproblem {
    fn label(self) -> &'static str {
        match self {
            Subproblem::Power => "power",
            Subproblem::Ratio => "ratio",
            Subproblem::Frequency => "frequency",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BenchVariant {
    /// The dedicated block solver.
    Proposed,
    /// The full budget split evenly over active streams (mid-cap ratios).
    Uniform,
    /// Random allocation of the full budget (random ratios in the cap).
    Ra,
    /// No compression at all (ratio sub-problem only).
    None,
}

impl BenchVariant {
    fn label(self) -> &'static str {
        match self {
            BenchVariant::Proposed => "proposed",
            BenchVariant::Uniform => "uniform",
            BenchVariant::Ra => "ra",
            BenchVariant::None => "none",
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn bench_row(
    sub: Subproblem,
    variant: BenchVariant,
    seed: u64,
    value: f64,
    audit: Option<(f64, f64, bool)>,
) -> BenchRow {
    let (e1, e2, ok) = audit.unwrap_or((0.0, 0.0, false));
    let ok = ok && e1.is_finite() && e2.is_finite();
    BenchRow {
        subproblem: sub.label(),
        variant: variant.label(),
        seed,
        value,
        feasible: ok,
        e1: if ok { e1 } else { 0.0 },
        e2: if ok { e2 } else { 0.0 },
        e: if ok { e1 + e2 } else { 0.0 },
    }
}

/// Audit a fixed allocation, mapping any evaluation failure to "infeasible".
fn try_audit(
    inst: &ProblemInstance,
    tx: &TransmitState,
    ratios: &[f64],
    freqs: &[f64],
    u: &[u64],
) -> Option<(f64, f64, bool)> {
    optim::audit(inst, Scheme::Rsma, tx, ratios, freqs, u)
        .ok()
        .map(|(rep, ok)| (rep.e1, rep.e2, ok))
}

/// Benchmark one sub-problem at one cell: freeze the other blocks at the
/// common starting point and compare the block solver against uniform and
/// random allocations of the block's resource.
fn run_bench_cell(
    cfg: &ScenarioConfig,
    rs: &ResolvedScenario,
    axis: SweepAxis,
    sub: Subproblem,
    seed: u64,
    vidx: usize,
) -> Result<Vec<BenchRow>, ExperimentError> {
    let value = cfg.sweep.values[vidx];
    let inst = cell_instance(cfg, rs, axis, seed, value)?;
    let u = optim::effective_payload(&inst, Scheme::Rsma);
    let variants: &[BenchVariant] = match sub {
        Subproblem::Ratio => &[
            BenchVariant::Proposed,
            BenchVariant::Uniform,
            BenchVariant::Ra,
            BenchVariant::None,
        ],
        _ => &[BenchVariant::Proposed, BenchVariant::Uniform, BenchVariant::Ra],
    };
    let Ok((tx0, ratios0, freqs0)) = optim::init_state(&inst, Scheme::Rsma, &u) else {
        return Ok(variants
            .iter()
            .map(|&v| bench_row(sub, v, seed, value, None))
            .collect());
    };
    let active: Vec<usize> = (0..u.len()).filter(|&s| u[s] > 0).collect();
    let n_active = active.len().max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(
        seed ^ (vidx as u64) << 24 ^ (sub.label().len() as u64) << 48,
    ));
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let audit = match (sub, variant) {
            (Subproblem::Power, BenchVariant::Proposed) => {
                // Two starts: the feasibility-margin point and the full
                // budget split evenly; keep the better audited outcome.
                let mut uniform_tx = tx0.clone();
                for (s, p) in uniform_tx.powers.iter_mut().enumerate() {
                    *p = if u[s] > 0 {
                        rs.p_max_w / n_active as f64
                    } else {
                        0.0
                    };
                }
                let mut best: Option<(f64, f64, bool)> = None;
                for start in [&tx0, &uniform_tx] {
                    let Ok(tx) = optim::solve_power_beamforming(
                        &inst,
                        Scheme::Rsma,
                        start,
                        &ratios0,
                        &freqs0,
                        &rs.params,
                    ) else {
                        continue;
                    };
                    if let Some((e1, e2, true)) = try_audit(&inst, &tx, &ratios0, &freqs0, &u) {
                        if best.map_or(true, |(b1, b2, _)| e1 + e2 < b1 + b2) {
                            best = Some((e1, e2, true));
                        }
                    }
                }
                best.or_else(|| try_audit(&inst, &tx0, &ratios0, &freqs0, &u))
            }
            (Subproblem::Power, BenchVariant::Uniform) => {
                let mut tx = tx0.clone();
                for (s, p) in tx.powers.iter_mut().enumerate() {
                    *p = if u[s] > 0 {
                        rs.p_max_w / n_active as f64
                    } else {
                        0.0
                    };
                }
                try_audit(&inst, &tx, &ratios0, &freqs0, &u)
            }
            (Subproblem::Power, BenchVariant::Ra) => {
                let mut tx = tx0.clone();
                let draws: Vec<f64> = active.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
                let total: f64 = draws.iter().sum();
                for p in tx.powers.iter_mut() {
                    *p = 0.0;
                }
                for (&s, d) in active.iter().zip(&draws) {
                    tx.powers[s] = rs.p_max_w * d / total;
                }
                try_audit(&inst, &tx, &ratios0, &freqs0, &u)
            }
            (Subproblem::Ratio, variant) => {
                let report = optim::rates_for(Scheme::Rsma, &inst.channels, &tx0)?;
                let rate_of = |s: usize| {
                    if s == 0 {
                        report.shared
                    } else {
                        report.private[s - 1]
                    }
                };
                let mut ratios = vec![0.0; u.len()];
                match variant {
                    BenchVariant::Proposed => {
                        for &s in &active {
                            ratios[s] = optim::optimal_ratio_for_stream(
                                &inst,
                                0.0,
                                freqs0[s],
                                u[s],
                                tx0.powers[s],
                                rate_of(s),
                            )?;
                        }
                    }
                    BenchVariant::Uniform => {
                        for &s in &active {
                            ratios[s] = 0.5 * rs.theta;
                        }
                    }
                    BenchVariant::Ra => {
                        for &s in &active {
                            ratios[s] = rng.gen_range(0.0..=rs.theta.max(f64::MIN_POSITIVE));
                        }
                    }
                    BenchVariant::None => {}
                }
                try_audit(&inst, &tx0, &ratios, &freqs0, &u)
            }
            (Subproblem::Frequency, variant) => {
                // Fix mid-cap compression so there is compute work to place.
                let mut ratios = vec![0.0; u.len()];
                for &s in &active {
                    ratios[s] = 0.5 * rs.theta;
                }
                let report = optim::rates_for(Scheme::Rsma, &inst.channels, &tx0)?;
                let rates: Vec<f64> = (0..u.len())
                    .map(|s| {
                        if s == 0 {
                            report.shared
                        } else {
                            report.private[s - 1]
                        }
                    })
                    .collect();
                let freqs = match variant {
                    BenchVariant::Proposed => {
                        match optim::solve_frequencies(&inst, &ratios, &u, &rates) {
                            Ok(f) => f,
                            Err(_) => {
                                rows.push(bench_row(sub, variant, seed, value, None));
                                continue;
                            }
                        }
                    }
                    BenchVariant::Uniform => {
                        let mut f = vec![0.0; u.len()];
                        for &s in &active {
                            f[s] = cfg.system.f_max_hz / n_active as f64;
                        }
                        f
                    }
                    _ => {
                        let draws: Vec<f64> =
                            active.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
                        let total: f64 = draws.iter().sum();
                        let mut f = vec![0.0; u.len()];
                        for (&s, d) in active.iter().zip(&draws) {
                            f[s] = cfg.system.f_max_hz * d / total;
                        }
                        f
                    }
                };
                try_audit(&inst, &tx0, &ratios, &freqs, &u)
            }
            _ => unreachable!("power handles its own variants"),
        };
        rows.push(bench_row(sub, variant, seed, value, audit));
    }
    Ok(rows)
}

/// Compare each resource block's dedicated solver against uniform and
/// random allocations, holding the other blocks at the common start.
pub fn run_subproblem_benchmarks(cfg: &ScenarioConfig) -> Result<SweepResult, ExperimentError> {
    let rs = resolve(cfg)?;
    let axis = SweepAxis::from_str(&cfg.sweep.axis)?;
    let mut cells = Vec::new();
    for sub in [Subproblem::Power, Subproblem::Ratio, Subproblem::Frequency] {
        for si in 0..cfg.sweep.seeds {
            for vidx in 0..cfg.sweep.values.len() {
                cells.push((sub, cfg.sweep.seed_base + u64::from(si), vidx));
            }
        }
    }
    let groups: Vec<Vec<BenchRow>> = cells
        .par_iter()
        .map(|&(sub, seed, vidx)| run_bench_cell(cfg, &rs, axis, sub, seed, vidx))
        .collect::<Result<_, _>>()?;
    Ok(SweepResult {
        axis,
        users: cfg.system.users,
        echo: echo_lines(cfg, &rs),
        sweep_rows: Vec::new(),
        bench_rows: groups.into_iter().flatten().collect(),
    })
}

// ---------------------------------------------------------------------------
// CSV echo, oracle cross-check, calibration fragments
// ---------------------------------------------------------------------------

fn echo_lines(cfg: &ScenarioConfig, rs: &ResolvedScenario) -> Vec<(String, String)> {
    let fmt_list = |vs: &[f64]| {
        let inner: Vec<String> = vs.iter().map(|v| fmt_f64(*v)).collect();
        format!("[{}]", inner.join(", "))
    };
    let payload: Vec<String> = rs.payload.iter().map(|u| u.to_string()).collect();
    let segs: Vec<String> = rs
        .overhead
        .segments()
        .iter()
        .map(|s| {
            format!(
                "({} w + {} on [{}, {}])",
                fmt_f64(s.slope),
                fmt_f64(s.intercept),
                fmt_f64(s.omega_lo),
                fmt_f64(s.omega_hi)
            )
        })
        .collect();
    let mut lines: Vec<(String, String)> = vec![
        (
            "mode".into(),
            match cfg.mode {
                RunMode::Sweep => "sweep".into(),
                RunMode::Subproblems => "subproblems".into(),
            },
        ),
        ("system.bandwidth_hz".into(), fmt_f64(cfg.system.bandwidth_hz)),
        ("system.p_max_dbm".into(), fmt_f64(cfg.system.p_max_dbm)),
        ("system.f_max_hz".into(), fmt_f64(cfg.system.f_max_hz)),
        ("system.t_max_s".into(), fmt_f64(cfg.system.t_max_s)),
        ("system.xi".into(), fmt_f64(cfg.system.xi)),
        ("system.n0_dbm_hz".into(), fmt_f64(cfg.system.n0_dbm_hz)),
        ("system.r_bits".into(), cfg.system.r_bits.to_string()),
        ("system.antennas".into(), cfg.system.antennas.to_string()),
        ("system.users".into(), cfg.system.users.to_string()),
        ("channel.model".into(), cfg.channel.model.clone()),
        ("accuracy.a_min".into(), fmt_f64(cfg.accuracy.a_min)),
        ("sweep.axis".into(), cfg.sweep.axis.clone()),
        ("sweep.values".into(), fmt_list(&cfg.sweep.values)),
        ("sweep.seeds".into(), cfg.sweep.seeds.to_string()),
        ("sweep.seed_base".into(), cfg.sweep.seed_base.to_string()),
        ("sweep.schemes".into(), format!("[{}]", cfg.sweep.schemes.join(", "))),
        ("derived.p_max_w".into(), fmt_f64(rs.p_max_w)),
        ("derived.theta".into(), fmt_f64(rs.theta)),
        ("derived.payload".into(), format!("[{}]", payload.join(", "))),
        ("derived.overhead".into(), format!("[{}]", segs.join("; "))),
    ];
    if cfg.payload.source == "corpus" || cfg.overhead.is_none() || cfg.accuracy.theta_override.is_none()
    {
        lines.push(("corpus.source".into(), cfg.corpus.source.clone()));
        if cfg.corpus.source == "synthetic" {
            lines.push(("corpus.pairs".into(), cfg.corpus.pairs.to_string()));
            lines.push((
                "corpus.max_relations".into(),
                cfg.corpus.max_relations.to_string(),
            ));
            lines.push(("corpus.samples".into(), cfg.corpus.samples.to_string()));
            lines.push(("corpus.zipf_s".into(), fmt_f64(cfg.corpus.zipf_s)));
            lines.push(("corpus.density".into(), fmt_f64(cfg.corpus.density)));
            lines.push(("corpus.corpus_seed".into(), cfg.corpus.corpus_seed.to_string()));
        } else {
            lines.push(("corpus.path".into(), cfg.corpus.path.clone()));
        }
        lines.push((
            "corpus.cycles_per_cell".into(),
            fmt_f64(cfg.corpus.cycles_per_cell),
        ));
    }
    lines.push((
        "solver.sca_max_iters".into(),
        cfg.solver.sca_max_iters.to_string(),
    ));
    lines.push((
        "solver.outer_max_iters".into(),
        cfg.solver.outer_max_iters.to_string(),
    ));
    lines.push(("solver.obj_rel_tol".into(), fmt_f64(cfg.solver.obj_rel_tol)));
    lines.push(("solver.feas_tol".into(), fmt_f64(cfg.solver.feas_tol)));
    lines
}

/// Solver-vs-exhaustive-grid comparison for one scheme.
#[derive(Debug, Clone)]
pub struct OracleComparison {
    pub scheme: Scheme,
    pub solver: SolutionState,
    pub oracle: SolutionState,
    /// Grid points the oracle enumerated.
    pub points_enumerated: u128,
}

/// Cross-check the alternating optimizer against the exhaustive grid on the
/// configured scenario (first seed, base sweep value). The oracle also
/// scans the solver's own beams so the comparison is two-sided.
pub fn run_oracle_check(cfg: &ScenarioConfig) -> Result<Vec<OracleComparison>, ExperimentError> {
    let rs = resolve(cfg)?;
    let axis = SweepAxis::from_str(&cfg.sweep.axis)?;
    let value = cfg.sweep.values[0];
    let mut out = Vec::new();
    for name in &cfg.sweep.schemes {
        let scheme = Scheme::from_str(name).map_err(|e| ExperimentError::Config(e.to_string()))?;
        let inst = cell_instance(cfg, &rs, axis, cfg.sweep.seed_base, value)?;
        let (solver, _) = alternating_optimize(&inst, scheme, &rs.params)?;
        let spec = GridSpec {
            power_levels: cfg.oracle.power_levels,
            ratio_levels: cfg.oracle.ratio_levels,
            freq_levels: cfg.oracle.freq_levels,
            max_points: u128::from(cfg.oracle.max_points),
            extra_beams: vec![solver.beams.clone()],
        };
        let (oracle, points_enumerated) = grid_oracle(&inst, scheme, &spec)?;
        out.push(OracleComparison {
            scheme,
            solver,
            oracle,
            points_enumerated,
        });
    }
    Ok(out)
}

/// Calibration output for a corpus: a fitted compute-cost curve and the
/// largest safe compression ratio.
#[derive(Debug, Clone)]
pub struct CalibrationFragment {
    pub overhead: OverheadModel,
    pub theta: f64,
    pub sets_used: usize,
}

/// Calibrate from a corpus file: one semantic set per sample (largest
/// first, up to 64), lossless-mode ratio cap, cost scaled by
/// `cycles_per_cell`.
pub fn calibrate_corpus_file(
    path: &Path,
    a_min: f64,
    cycles_per_cell: f64,
) -> Result<CalibrationFragment, ExperimentError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    let corpus = parse_corpus(&text)?;
    let pkg = Pkg::build(&corpus);
    let sets = sets_from_corpus(&pkg, &corpus, 64);
    if sets.is_empty() {
        return Err(ExperimentError::Config(
            "corpus has no samples with resolvable triples".into(),
        ));
    }
    let cells = calibrate_overhead(&pkg, &sets)?;
    let overhead = scale_overhead(&cells, cycles_per_cell)?;
    let theta = calibrate_theta(&pkg, &sets, a_min, CompressionMode::Verified)?;
    Ok(CalibrationFragment {
        overhead,
        theta,
        sets_used: sets.len(),
    })
}

/// Render a calibration result as a TOML fragment that can be pasted into
/// (or concatenated with) a scenario file.
pub fn fragment_to_toml(frag: &CalibrationFragment) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# calibrated from {} representative sets; cost unit: CPU cycles\n",
        frag.sets_used
    ));
    out.push_str("[accuracy]\n");
    out.push_str(&format!("theta_override = {}\n", fmt_f64(frag.theta)));
    for s in frag.overhead.segments() {
        out.push_str("\n[[overhead.segments]]\n");
        out.push_str(&format!("slope = {}\n", fmt_f64(s.slope)));
        out.push_str(&format!("intercept = {}\n", fmt_f64(s.intercept)));
        out.push_str(&format!("omega_lo = {}\n", fmt_f64(s.omega_lo)));
        out.push_str(&format!("omega_hi = {}\n", fmt_f64(s.omega_hi)));
    }
    out
}
