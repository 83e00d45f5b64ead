//! Joint minimisation of compute + transmit energy for one downlink frame.
//!
//! A frame must deliver every receiver's payload (a shared part on a
//! broadcast stream plus per-receiver private parts) within a latency
//! budget, spending energy on source compression (CPU cycles at the
//! transmitter, modelled by a convex piecewise-linear cycle count in the
//! compression ratio) and on radiated power. The decision variables are,
//! per stream: transmit power, a unit-norm beamforming vector, a
//! compression ratio, and a CPU frequency share.
//!
//! [`alternating_optimize`] cycles through three exact-or-descent blocks
//! until the objective settles:
//!
//! 1. *Power/beams* — a successive-convex-approximation loop whose inner
//!    problems are solved by a log-barrier interior-point method; every
//!    candidate is re-checked against the true rate equations and accepted
//!    only if it is feasible and lowers transmit energy. The superposition
//!    scheme runs an exact coordinate-descent polish on stream powers after
//!    each convex step.
//! 2. *Compression ratios* — an exact per-stream minimiser over the
//!    piecewise-linear energy trade-off.
//! 3. *CPU frequencies* — the closed-form minimal feasible frequency.
//!
//! Each block never increases the true objective, so the iteration trace is
//! non-increasing by construction. [`grid_oracle`] provides an independent
//! brute-force reference for small instances, and [`verify_constraints`]
//! re-validates any returned state against the exact constraint set.

mod barrier;
mod compute;
mod oracle;
mod sca;
mod scr;

pub use oracle::{grid_oracle, GridSpec};
pub(crate) use compute::solve_frequencies;
pub(crate) use sca::solve_power_beamforming;
pub(crate) use scr::optimal_ratio_for_stream;

use crate::compression::{comm_overhead, OverheadModel};
use crate::link::{
    self, noma_rates, rsma_rates, sdma_rates, ChannelSet, EnergyDelayReport, LinkError,
    RateReport, TransmitState,
};
use num_complex::Complex64;
use std::error::Error;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

/// Multiple-access scheme used on the downlink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Rate splitting: one shared stream plus per-user private streams.
    Rsma,
    /// Spatial multiplexing only; the shared payload rides every private
    /// stream (no common stream is transmitted).
    Sdma,
    /// Power-domain superposition with successive interference
    /// cancellation; the shared payload rides every private stream.
    Noma,
    /// Rate splitting with compression disabled (ratios pinned to zero).
    Conventional,
}

impl Scheme {
    pub const ALL: [Scheme; 4] =
        [Scheme::Rsma, Scheme::Sdma, Scheme::Noma, Scheme::Conventional];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Rsma => "rsma",
            Scheme::Sdma => "sdma",
            Scheme::Noma => "noma",
            Scheme::Conventional => "conventional",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rsma" => Ok(Scheme::Rsma),
            "sdma" => Ok(Scheme::Sdma),
            "noma" => Ok(Scheme::Noma),
            "conventional" | "conv" => Ok(Scheme::Conventional),
            other => Err(format!(
                "unknown scheme '{other}' (expected rsma, sdma, noma, or conventional)"
            )),
        }
    }
}

/// One frame's worth of problem data.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub channels: ChannelSet,
    /// Triples to deliver per stream; index 0 is the shared set.
    pub payload: Vec<u64>,
    /// Compression cycle cost as a function of the ratio.
    pub overhead: OverheadModel,
    /// Largest semantically safe compression ratio in `[0, 1]`.
    pub theta: f64,
    pub p_max_w: f64,
    pub f_max_hz: f64,
    pub t_max_s: f64,
    /// Effective switched-capacitance of the transmitter CPU.
    pub xi: f64,
    /// Bits per identifier; a triple costs `4R` intact, `2R` degraded.
    pub r_bits: u32,
}

impl ProblemInstance {
    pub fn users(&self) -> usize {
        self.channels.users()
    }

    pub fn streams(&self) -> usize {
        self.channels.users() + 1
    }
}

/// Iteration limits and tolerances for [`alternating_optimize`].
#[derive(Debug, Clone)]
pub struct SolverParams {
    /// Inner successive-convex-approximation iterations per power step.
    pub sca_max_iters: usize,
    /// Outer alternating iterations.
    pub outer_max_iters: usize,
    /// Relative objective improvement treated as converged.
    pub obj_rel_tol: f64,
    /// Relative slack allowed when re-verifying constraints.
    pub feas_tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            sca_max_iters: 30,
            outer_max_iters: 20,
            obj_rel_tol: 1e-5,
            feas_tol: 1e-6,
        }
    }
}

/// A full decision-variable assignment with its audited energy split.
#[derive(Debug, Clone)]
pub struct SolutionState {
    /// Transmit power per stream (W); index 0 is the shared stream.
    pub powers: Vec<f64>,
    /// Unit-norm beamformer per stream.
    pub beams: Vec<Vec<Complex64>>,
    /// CPU frequency per stream (cycles/s).
    pub compute: Vec<f64>,
    /// Compression ratio per stream.
    pub ratios: Vec<f64>,
    /// Compression energy (J).
    pub e1: f64,
    /// Transmission energy (J).
    pub e2: f64,
    /// Total energy (J).
    pub objective: f64,
    /// Whether the state passed exact constraint verification.
    pub feasible: bool,
}

/// One outer iteration's audit record.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub e1: f64,
    pub e2: f64,
    pub power_ms: f64,
    pub ratio_ms: f64,
    pub compute_ms: f64,
}

/// Objective values and per-block timings across outer iterations.
#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
}

impl IterationTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// Largest relative increase between consecutive objective values
    /// (zero or negative means the trace is monotone non-increasing).
    pub fn max_relative_increase(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for pair in self.records.windows(2) {
            let rel =
                (pair[1].objective - pair[0].objective) / pair[0].objective.abs().max(1e-300);
            worst = worst.max(rel);
        }
        if worst.is_finite() {
            worst
        } else {
            0.0
        }
    }
}

#[derive(Debug)]
pub enum OptimError {
    Link(LinkError),
    InvalidInstance(String),
    Infeasible(String),
    ConstraintViolation {
        name: String,
        value: f64,
        bound: f64,
    },
    /// The brute-force reference refuses instances this large.
    OracleTooLarge {
        users: usize,
        antennas: usize,
        points: u128,
    },
    NoFeasiblePoint,
}

impl fmt::Display for OptimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimError::Link(e) => write!(f, "link model error: {e}"),
            OptimError::InvalidInstance(msg) => write!(f, "invalid problem instance: {msg}"),
            OptimError::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            OptimError::ConstraintViolation { name, value, bound } => {
                write!(f, "constraint '{name}' violated: {value} exceeds {bound}")
            }
            OptimError::OracleTooLarge {
                users,
                antennas,
                points,
            } => write!(
                f,
                "oracle limit exceeded ({users} users, {antennas} antennas, {points} grid points)"
            ),
            OptimError::NoFeasiblePoint => write!(f, "no feasible grid point found"),
        }
    }
}

impl Error for OptimError {
    fn source(&self) -> Option<&(dyn Error + 'static)> {
        match self {
            OptimError::Link(e) => Some(e),
            _ => None,
        }
    }
}

impl From<LinkError> for OptimError {
    fn from(e: LinkError) -> Self {
        OptimError::Link(e)
    }
}

/// Rate equations for the given scheme.
pub(crate) fn rates_for(
    scheme: Scheme,
    ch: &ChannelSet,
    tx: &TransmitState,
) -> Result<RateReport, LinkError> {
    match scheme {
        Scheme::Rsma | Scheme::Conventional => rsma_rates(ch, tx),
        Scheme::Sdma => sdma_rates(ch, tx),
        Scheme::Noma => noma_rates(ch, tx),
    }
}

/// Flatten a rate report to per-stream rates (index 0 = shared stream).
pub(crate) fn stream_rates(report: &RateReport) -> Vec<f64> {
    std::iter::once(report.shared)
        .chain(report.private.iter().copied())
        .collect()
}

/// Payload per stream after scheme folding: schemes without a shared
/// stream deliver the shared set on every private stream instead.
pub fn effective_payload(inst: &ProblemInstance, scheme: Scheme) -> Vec<u64> {
    let mut u = inst.payload.clone();
    match scheme {
        Scheme::Rsma | Scheme::Conventional => u,
        Scheme::Sdma | Scheme::Noma => {
            let shared = u[0];
            u[0] = 0;
            for uk in u.iter_mut().skip(1) {
                *uk += shared;
            }
            u
        }
    }
}

fn validate(inst: &ProblemInstance) -> Result<(), OptimError> {
    let k = inst.users();
    if inst.payload.len() != k + 1 {
        return Err(OptimError::InvalidInstance(format!(
            "payload has {} entries for {} users (need {})",
            inst.payload.len(),
            k,
            k + 1
        )));
    }
    if !(inst.theta >= 0.0 && inst.theta <= 1.0) {
        return Err(OptimError::InvalidInstance(format!(
            "accuracy cap {} outside [0, 1]",
            inst.theta
        )));
    }
    if !(inst.p_max_w > 0.0 && inst.p_max_w.is_finite()) {
        return Err(OptimError::InvalidInstance("power budget must be positive".into()));
    }
    if !(inst.f_max_hz >= 0.0 && inst.f_max_hz.is_finite()) {
        return Err(OptimError::InvalidInstance("cycle budget must be non-negative".into()));
    }
    if !(inst.t_max_s > 0.0 && inst.t_max_s.is_finite()) {
        return Err(OptimError::InvalidInstance("latency budget must be positive".into()));
    }
    if !(inst.xi >= 0.0 && inst.xi.is_finite()) {
        return Err(OptimError::InvalidInstance("capacitance must be non-negative".into()));
    }
    if inst.r_bits == 0 {
        return Err(OptimError::InvalidInstance("identifier width must be positive".into()));
    }
    Ok(())
}

/// Matched-filter beams: each private stream points at its user; the
/// shared stream points at the normalised mean of the user directions.
fn default_beams(ch: &ChannelSet) -> Vec<Vec<Complex64>> {
    let l = ch.antennas();
    let unit = |v: Vec<Complex64>| -> Vec<Complex64> {
        let n: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            v.into_iter().map(|c| c / n).collect()
        } else {
            let mut e = vec![Complex64::new(0.0, 0.0); l];
            e[0] = Complex64::new(1.0, 0.0);
            e
        }
    };
    let directions: Vec<Vec<Complex64>> = ch.channels.iter().map(|h| unit(h.clone())).collect();
    let mut mean = vec![Complex64::new(0.0, 0.0); l];
    for d in &directions {
        for (m, c) in mean.iter_mut().zip(d.iter()) {
            *m += c;
        }
    }
    let mut beams = Vec::with_capacity(ch.users() + 1);
    beams.push(unit(mean));
    beams.extend(directions);
    beams
}

/// Candidate initial beam sets per scheme, matched filters first. Matched
/// filters suit schemes whose private streams are decoded only by their
/// own user, but under successive decoding every stream must also be
/// decoded by every stronger receiver, and a beam matched to one user is
/// nearly orthogonal to the other users' channels — the min-SINR over
/// decoders then collapses and a cell that superposition serves comfortably
/// reads as infeasible. The superposition scheme therefore also offers the
/// single-direction set (every private beam on the weakest user's
/// direction); its power step keeps beams fixed, so the candidate chosen at
/// initialisation is also its beam design.
fn init_beams(ch: &ChannelSet, scheme: Scheme) -> Vec<Vec<Vec<Complex64>>> {
    let matched = default_beams(ch);
    // The successive-decoding rank also identifies the weakest user here.
    let pos = link::sic_positions(ch);
    let weak = (0..ch.users()).find(|&u| pos[u] + 1 == ch.users());
    let mut candidates = vec![matched.clone()];
    match scheme {
        Scheme::Noma => {
            if let Some(weak) = weak {
                let mut single = matched;
                let dir = single[weak + 1].clone();
                for b in single.iter_mut().skip(1) {
                    *b = dir.clone();
                }
                candidates.push(single);
            }
        }
        Scheme::Rsma | Scheme::Conventional => {
            // The shared stream is decoded by everyone, so its rate is the
            // minimum over users; when the mean direction happens to miss
            // one user that minimum collapses. Aiming the shared beam at
            // the weakest user instead is the max-min-friendly fallback.
            if let Some(weak) = weak {
                let mut common_at_weak = matched;
                common_at_weak[0] = common_at_weak[weak + 1].clone();
                candidates.push(common_at_weak);
            }
        }
        Scheme::Sdma => {}
    }
    candidates
}

/// Equal compute-budget split across the active streams (zero when the
/// compression allowance is zero, since no cycles will ever be spent).
fn compute_share(inst: &ProblemInstance, u: &[u64]) -> Vec<f64> {
    let n_active = u.iter().filter(|&&x| x > 0).count();
    let f_share = if inst.theta > 0.0 && n_active > 0 {
        inst.f_max_hz / n_active as f64
    } else {
        0.0
    };
    u.iter()
        .map(|&x| if x > 0 { f_share } else { 0.0 })
        .collect()
}

/// Compression-ratio starting profiles: uncompressed first and, when the
/// allowance is positive, fully compressed — airtime-starved cells are
/// often servable only with the payload already shrunk.
fn ratio_profiles(inst: &ProblemInstance, u: &[u64]) -> Vec<Vec<f64>> {
    let mut profiles = vec![vec![0.0; u.len()]];
    if inst.theta > 0.0 {
        profiles.push(
            u.iter()
                .map(|&x| if x > 0 { inst.theta.min(1.0) } else { 0.0 })
                .collect(),
        );
    }
    profiles
}

/// True when the state's exact rates meet every stream deadline within
/// `margin` under the scheme's own rate model.
fn start_meets_deadlines(
    inst: &ProblemInstance,
    scheme: Scheme,
    tx: &TransmitState,
    ratios: &[f64],
    freqs: &[f64],
    u: &[u64],
    margin: f64,
) -> bool {
    let Ok(report) = rates_for(scheme, &inst.channels, tx) else {
        return false;
    };
    match link::delays(&report, ratios, freqs, u, &inst.overhead, inst.r_bits) {
        Ok(ds) => ds.iter().all(|d| *d <= margin),
        Err(_) => false,
    }
}

/// Per-stream SINR targets implied by the deadlines: each stream must move
/// `u_s` triples at the current compression ratio through what is left of
/// the latency window once compression cycles are paid for. Returns `None`
/// when some stream has work but no time or no compute speed.
fn deadline_gammas(
    inst: &ProblemInstance,
    u: &[u64],
    ratios: &[f64],
    freqs: &[f64],
    margin: f64,
) -> Option<Vec<f64>> {
    let mut gammas = vec![0.0; u.len()];
    for s in 0..u.len() {
        if u[s] == 0 {
            continue;
        }
        let bits = u[s] as f64 * comm_overhead(ratios[s], inst.r_bits).ok()?;
        let cycles = inst.overhead.eval(ratios[s]);
        let window = if cycles <= 0.0 {
            margin
        } else if freqs[s] > 0.0 {
            margin - cycles / freqs[s]
        } else {
            return None;
        };
        if window <= 0.0 {
            return None;
        }
        gammas[s] = (bits / window / inst.channels.bandwidth_hz).exp2() - 1.0;
    }
    Some(gammas)
}

/// Minimum powers hitting every stream's deadline SINR at fixed beams,
/// via the coupled linear system of the private streams' SINR equations
/// (each private is decoded by its own user with the other privates as
/// interference). A uniform split scales all powers together and stalls at
/// its interference ceiling long before the budget is spent; solving the
/// balance equations instead lets a weak or heavily loaded stream take the
/// share it actually needs. The shared stream, decoded by every user before
/// the privates, is then priced at its worst decoder. Returns `None` when
/// the balance system has no non-negative solution (the targets exceed the
/// interference ceiling of these beams) or the budget is exceeded.
fn coupled_power_fill(
    inst: &ProblemInstance,
    scheme: Scheme,
    beams: &[Vec<Complex64>],
    u: &[u64],
    ratios: &[f64],
    freqs: &[f64],
    margin: f64,
) -> Option<TransmitState> {
    let ch = &inst.channels;
    let k = ch.users();
    let gammas = deadline_gammas(inst, u, ratios, freqs, margin)?;
    let proj = |user: usize, s: usize| -> f64 {
        ch.channels[user]
            .iter()
            .zip(beams[s].iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    };
    let privates: Vec<usize> = (1..=k).filter(|&s| u[s] > 0).collect();
    let n = privates.len();
    let mut powers = vec![0.0; k + 1];
    if n > 0 {
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut b = nalgebra::DVector::<f64>::zeros(n);
        for (row, &s) in privates.iter().enumerate() {
            let own = proj(s - 1, s);
            if own <= 0.0 {
                return None;
            }
            let d = gammas[s] / own;
            for (col, &j) in privates.iter().enumerate() {
                a[(row, col)] = if row == col { 1.0 } else { -d * proj(s - 1, j) };
            }
            b[row] = d * ch.noise_power;
        }
        let sol = a.lu().solve(&b)?;
        for (idx, &s) in privates.iter().enumerate() {
            let p = sol[idx];
            if !(p.is_finite() && p >= 0.0) {
                return None;
            }
            powers[s] = p;
        }
    }
    if u[0] > 0 {
        if matches!(scheme, Scheme::Sdma | Scheme::Noma) {
            return None;
        }
        let mut worst = 0.0f64;
        for user in 0..k {
            let g0 = proj(user, 0);
            if g0 <= 0.0 {
                return None;
            }
            let interference: f64 = privates.iter().map(|&j| powers[j] * proj(user, j)).sum();
            worst = worst.max((interference + ch.noise_power) / g0);
        }
        powers[0] = gammas[0] * worst;
    }
    let total: f64 = powers.iter().sum();
    if !(total > 0.0 && total <= inst.p_max_w) {
        return None;
    }
    // Scaling every power by the same factor >= 1 only raises each SINR,
    // so the pad keeps the state feasible while buying interior margin.
    let pad = 1.05f64.min(inst.p_max_w / total);
    for p in powers.iter_mut() {
        *p *= pad;
    }
    Some(TransmitState {
        powers,
        beams: beams.to_vec(),
    })
}

/// Exact minimum-power allocation for the successive-decoding chain at
/// fixed beams. Powers are set strongest-owner-first: each stream's power
/// is priced at its worst decoder, whose interference involves only the
/// already-fixed powers of stronger streams, so the triangular structure
/// solves exactly in one pass. The geometric growth of the fill absorbs
/// any target the power budget allows, including cells where a uniform
/// split is stuck below its interference ceiling.
fn noma_chain_fill(
    inst: &ProblemInstance,
    beams: &[Vec<Complex64>],
    u: &[u64],
    ratios: &[f64],
    freqs: &[f64],
    margin: f64,
) -> Option<TransmitState> {
    let ch = &inst.channels;
    let k = ch.users();
    let pos = link::sic_positions(ch);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&user| pos[user]);
    let proj = |user: usize, s: usize| -> f64 {
        ch.channels[user]
            .iter()
            .zip(beams[s].iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    };
    let gammas = deadline_gammas(inst, u, ratios, freqs, margin)?;
    let mut powers = vec![0.0; k + 1];
    for (rank, &owner) in order.iter().enumerate() {
        let s = owner + 1;
        if u[s] == 0 {
            continue;
        }
        // Every user at this decode position or stronger must decode the
        // stream; the power is priced at the worst of them.
        let mut need = 0.0f64;
        for &decoder in &order[..=rank] {
            let g = proj(decoder, s);
            if g <= 0.0 {
                return None;
            }
            let interference: f64 = order[..rank]
                .iter()
                .map(|&j| powers[j + 1] * proj(decoder, j + 1))
                .sum();
            need = need.max((interference + ch.noise_power) / g);
        }
        powers[s] = gammas[s] * need;
    }
    let total: f64 = powers.iter().sum();
    if !(total > 0.0) || total > inst.p_max_w {
        return None;
    }
    // Scaling every power by the same factor >= 1 only raises each SINR,
    // so the pad keeps the state feasible while buying interior margin.
    let pad = 1.05f64.min(inst.p_max_w / total);
    for p in powers.iter_mut() {
        *p *= pad;
    }
    Some(TransmitState {
        powers,
        beams: beams.to_vec(),
    })
}

/// Feasible initial states, one per workable candidate beam set: the
/// smallest uniform power split that meets every deadline (found by
/// bisection, then padded by 5%) and an equal compute-budget split across
/// the active streams. Each beam set is tried first at zero compression
/// and, when that cannot meet the deadlines inside the power budget, again
/// at the full compression allowance — airtime-starved cells are often
/// servable only with the payload already shrunk. Granting compute speed up
/// front is free at zero compression (no cycles are spent, so no energy and
/// no delay change), but it gives the first ratio update a finite compute
/// speed to plan against; starting from zero frequency instead would
/// deadlock the ratio and frequency updates at (0, 0). The superposition
/// scheme adds an exact sequential power fill on the single-direction
/// beams, which stays feasible well past the point where uniform splits
/// saturate. Candidates keep the matched-first order of [`init_beams`]; an
/// error means no candidate could meet the deadlines.
pub(crate) fn init_candidates(
    inst: &ProblemInstance,
    scheme: Scheme,
    u: &[u64],
) -> Result<Vec<(TransmitState, Vec<f64>, Vec<f64>)>, OptimError> {
    let k = inst.users();
    let candidates = init_beams(&inst.channels, scheme);
    let active: Vec<bool> = u.iter().map(|&x| x > 0).collect();
    let n_active = active.iter().filter(|a| **a).count();
    let freqs = compute_share(inst, u);
    if n_active == 0 {
        let tx = TransmitState {
            powers: vec![0.0; k + 1],
            beams: candidates.into_iter().next().expect("matched set"),
        };
        return Ok(vec![(tx, vec![0.0; k + 1], freqs)]);
    }
    let profiles = ratio_profiles(inst, u);
    let base = inst.p_max_w / (2.0 * (k as f64 + 1.0));
    let scale_max = inst.p_max_w / (n_active as f64 * base);
    let margin = inst.t_max_s * (1.0 - 1e-3);
    let mut out = Vec::new();
    let meets_deadlines = |tx: &TransmitState, ratios: &[f64]| -> bool {
        start_meets_deadlines(inst, scheme, tx, ratios, &freqs, u, margin)
    };
    for beams in &candidates {
        for ratios in &profiles {
            let feasible = |scale: f64| -> bool {
                let powers: Vec<f64> = active
                    .iter()
                    .map(|&a| if a { scale * base } else { 0.0 })
                    .collect();
                let tx = TransmitState {
                    powers,
                    beams: beams.clone(),
                };
                meets_deadlines(&tx, ratios)
            };
            let scale = if feasible(1.0) {
                let mut lo = 0.0f64;
                let mut hi = 1.0f64;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if feasible(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            } else if feasible(scale_max) {
                let mut lo = 1.0f64;
                let mut hi = scale_max;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if feasible(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            } else {
                continue;
            };
            let scale = (scale * 1.05).min(scale_max);
            let powers: Vec<f64> = active
                .iter()
                .map(|&a| if a { scale * base } else { 0.0 })
                .collect();
            out.push((
                TransmitState {
                    powers,
                    beams: beams.clone(),
                },
                ratios.clone(),
                freqs.clone(),
            ));
            break;
        }
    }
    // Balance-equation fills: non-uniform power starts that survive past
    // the uniform split's interference ceiling. Appended after the
    // bisection candidates so they only decide a cell when they win it.
    for beams in &candidates {
        for ratios in &profiles {
            let fill = if scheme == Scheme::Noma {
                noma_chain_fill(inst, beams, u, ratios, &freqs, margin)
            } else {
                coupled_power_fill(inst, scheme, beams, u, ratios, &freqs, margin)
            };
            if let Some(tx) = fill {
                if meets_deadlines(&tx, ratios) {
                    out.push((tx, ratios.clone(), freqs.clone()));
                    break;
                }
            }
        }
    }
    if out.is_empty() {
        return Err(OptimError::Infeasible(format!(
            "deadlines cannot be met even at the full power budget ({} W)",
            inst.p_max_w
        )));
    }
    Ok(out)
}

/// The preferred initial state: the first feasible candidate, so fallback
/// beam sets only ever rescue cells the matched filters cannot serve.
pub(crate) fn init_state(
    inst: &ProblemInstance,
    scheme: Scheme,
    u: &[u64],
) -> Result<(TransmitState, Vec<f64>, Vec<f64>), OptimError> {
    Ok(init_candidates(inst, scheme, u)?
        .into_iter()
        .next()
        .expect("non-empty candidate list"))
}

/// Exact energy/delay audit of a candidate transmit state under the
/// current ratios and frequencies. The flag reports whether budgets,
/// beam norms, and deadlines all hold (with tiny relative slack).
pub(crate) fn audit(
    inst: &ProblemInstance,
    scheme: Scheme,
    tx: &TransmitState,
    ratios: &[f64],
    freqs: &[f64],
    u: &[u64],
) -> Result<(EnergyDelayReport, bool), OptimError> {
    let report = rates_for(scheme, &inst.channels, tx)?;
    let rep = link::energy(
        tx,
        &report,
        ratios,
        freqs,
        u,
        &inst.overhead,
        inst.r_bits,
        inst.xi,
    )?;
    let slack = 1.0 + 1e-9;
    let mut ok = tx.powers.iter().sum::<f64>() <= inst.p_max_w * slack;
    ok &= tx.powers.iter().all(|p| *p >= 0.0);
    ok &= tx
        .beams
        .iter()
        .all(|w| w.iter().map(|c| c.norm_sqr()).sum::<f64>() <= slack);
    ok &= rep.delays.iter().all(|d| *d <= inst.t_max_s * slack);
    Ok((rep, ok))
}

/// Exact coordinate descent on stream powers for the superposition
/// scheme: scan each active stream's power over a grid plus a golden-ratio
/// refinement, accepting only moves that keep every deadline and strictly
/// reduce transmit energy.
fn noma_power_step(
    inst: &ProblemInstance,
    tx: &TransmitState,
    ratios: &[f64],
    freqs: &[f64],
    u: &[u64],
) -> Result<TransmitState, OptimError> {
    let k = inst.users();
    let active: Vec<usize> = (1..=k).filter(|&s| u[s] > 0).collect();
    if active.is_empty() {
        return Ok(tx.clone());
    }
    let eval = |powers: &[f64]| -> f64 {
        let cand = TransmitState {
            powers: powers.to_vec(),
            beams: tx.beams.clone(),
        };
        match audit(inst, Scheme::Noma, &cand, ratios, freqs, u) {
            Ok((rep, true)) => rep.e2,
            _ => f64::INFINITY,
        }
    };
    let mut powers = tx.powers.clone();
    let mut current = eval(&powers);
    if !current.is_finite() {
        // The incoming state is already infeasible; leave it untouched.
        return Ok(tx.clone());
    }
    const GRID: usize = 64;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _sweep in 0..8 {
        let before_sweep = current;
        for &s in &active {
            let others: f64 = powers
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != s)
                .map(|(_, p)| *p)
                .sum();
            let budget = (inst.p_max_w - others).max(0.0);
            if budget <= 0.0 {
                continue;
            }
            let mut best_p = powers[s];
            let mut best_v = current;
            let probe = |p: f64, powers: &mut Vec<f64>| {
                let saved = powers[s];
                powers[s] = p;
                let v = eval(powers);
                powers[s] = saved;
                v
            };
            for i in 0..=GRID {
                let p = budget * i as f64 / GRID as f64;
                let v = probe(p, &mut powers);
                if v < best_v {
                    best_v = v;
                    best_p = p;
                }
            }
            // Golden-section refinement around the best grid cell.
            let step = budget / GRID as f64;
            let mut lo = (best_p - step).max(0.0);
            let mut hi = (best_p + step).min(budget);
            for _ in 0..48 {
                let m1 = hi - inv_phi * (hi - lo);
                let m2 = lo + inv_phi * (hi - lo);
                if probe(m1, &mut powers) <= probe(m2, &mut powers) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let mid = 0.5 * (lo + hi);
            let v = probe(mid, &mut powers);
            if v < best_v {
                best_v = v;
                best_p = mid;
            }
            if best_v < current {
                powers[s] = best_p;
                current = best_v;
            }
        }
        if before_sweep - current <= 1e-9 * before_sweep.abs().max(1e-300) {
            break;
        }
    }
    Ok(TransmitState {
        powers,
        beams: tx.beams.clone(),
    })
}

/// Re-validate a solution against the exact constraint set (budgets, beam
/// norms, ratio caps, and per-stream deadlines recomputed from the true
/// rate equations). `tol` is a relative slack on every bound.
pub fn verify_constraints(
    inst: &ProblemInstance,
    scheme: Scheme,
    state: &SolutionState,
    tol: f64,
) -> Result<(), OptimError> {
    validate(inst)?;
    let k = inst.users();
    let n = k + 1;
    if state.powers.len() != n
        || state.beams.len() != n
        || state.compute.len() != n
        || state.ratios.len() != n
    {
        return Err(OptimError::InvalidInstance(
            "solution arrays must have one entry per stream".into(),
        ));
    }
    let u = effective_payload(inst, scheme);
    let theta_eff = if scheme == Scheme::Conventional {
        0.0
    } else {
        inst.theta.min(1.0)
    };
    let slack = 1.0 + tol;
    let total_p: f64 = state.powers.iter().sum();
    if total_p > inst.p_max_w * slack {
        return Err(OptimError::ConstraintViolation {
            name: "power budget".into(),
            value: total_p,
            bound: inst.p_max_w,
        });
    }
    if let Some(p) = state.powers.iter().find(|p| **p < 0.0) {
        return Err(OptimError::ConstraintViolation {
            name: "power non-negativity".into(),
            value: *p,
            bound: 0.0,
        });
    }
    if matches!(scheme, Scheme::Sdma | Scheme::Noma) && state.powers[0] != 0.0 {
        return Err(OptimError::ConstraintViolation {
            name: "shared-stream power must be zero".into(),
            value: state.powers[0],
            bound: 0.0,
        });
    }
    let total_f: f64 = state.compute.iter().sum();
    if total_f > inst.f_max_hz * slack {
        return Err(OptimError::ConstraintViolation {
            name: "cycle budget".into(),
            value: total_f,
            bound: inst.f_max_hz,
        });
    }
    if let Some(f) = state.compute.iter().find(|f| **f < 0.0) {
        return Err(OptimError::ConstraintViolation {
            name: "frequency non-negativity".into(),
            value: *f,
            bound: 0.0,
        });
    }
    for (s, w) in state.beams.iter().enumerate() {
        let norm: f64 = w.iter().map(|c| c.norm_sqr()).sum();
        if state.powers[s] > 0.0 && norm > slack {
            return Err(OptimError::ConstraintViolation {
                name: format!("beam norm (stream {s})"),
                value: norm,
                bound: 1.0,
            });
        }
    }
    for (s, &r) in state.ratios.iter().enumerate() {
        if r < -tol || r > theta_eff + tol {
            return Err(OptimError::ConstraintViolation {
                name: format!("compression ratio (stream {s})"),
                value: r,
                bound: theta_eff,
            });
        }
    }
    let tx = TransmitState {
        powers: state.powers.clone(),
        beams: state.beams.clone(),
    };
    let report = rates_for(scheme, &inst.channels, &tx)?;
    let delays = link::delays(
        &report,
        &state.ratios,
        &state.compute,
        &u,
        &inst.overhead,
        inst.r_bits,
    )?;
    for (s, d) in delays.iter().enumerate() {
        if *d > inst.t_max_s * slack {
            return Err(OptimError::ConstraintViolation {
                name: format!("deadline (stream {s})"),
                value: *d,
                bound: inst.t_max_s,
            });
        }
    }
    Ok(())
}

/// Run the alternating descent for one scheme. Returns the final state
/// together with the per-iteration objective trace.
pub fn alternating_optimize(
    inst: &ProblemInstance,
    scheme: Scheme,
    params: &SolverParams,
) -> Result<(SolutionState, IterationTrace), OptimError> {
    validate(inst)?;
    let u = effective_payload(inst, scheme);
    let mut work = inst.clone();
    work.payload = u.clone();
    work.theta = if scheme == Scheme::Conventional {
        0.0
    } else {
        inst.theta.min(1.0)
    };
    let k = work.users();

    if u.iter().all(|&x| x == 0) {
        let state = SolutionState {
            powers: vec![0.0; k + 1],
            beams: default_beams(&work.channels),
            compute: vec![0.0; k + 1],
            ratios: vec![0.0; k + 1],
            e1: 0.0,
            e2: 0.0,
            objective: 0.0,
            feasible: true,
        };
        let trace = IterationTrace {
            records: vec![TraceRecord {
                iter: 0,
                objective: 0.0,
                e1: 0.0,
                e2: 0.0,
                power_ms: 0.0,
                ratio_ms: 0.0,
                compute_ms: 0.0,
            }],
        };
        return Ok((state, trace));
    }

    // Multistart: descend from every feasible initial candidate and keep
    // the best verified outcome. Fallback starts land in different valleys
    // than the matched filters, and neither dominates across cells.
    let mut first_err: Option<OptimError> = None;
    let mut inits = match init_candidates(&work, scheme, &u) {
        Ok(v) => v,
        Err(e) if scheme == Scheme::Noma => {
            first_err = Some(e);
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    if scheme == Scheme::Noma {
        // Warm starts derived from the spatial-multiplexing optimum. Its
        // exact state is feasible here whenever its decode caps happen to
        // be slack (successive decoding then sees strictly less
        // interference). But beams tuned for spatial multiplexing steer
        // nulls at exactly the receivers that successive decoding needs as
        // extra decoders, so the caps usually bind; blending each beam
        // toward the weakest user's direction restores a decodable common
        // component, and the chain fill re-prices the powers for the
        // blended beams.
        if let Ok((s, _)) = alternating_optimize(inst, Scheme::Sdma, params) {
            if s.feasible {
                let margin = work.t_max_s * (1.0 - 1e-3);
                let freqs = compute_share(&work, &u);
                let tx = TransmitState {
                    powers: s.powers,
                    beams: s.beams.clone(),
                };
                if start_meets_deadlines(
                    &work,
                    scheme,
                    &tx,
                    &s.ratios,
                    &s.compute,
                    &u,
                    work.t_max_s * (1.0 + 1e-9),
                ) {
                    inits.push((tx, s.ratios.clone(), s.compute.clone()));
                }
                let pos = link::sic_positions(&work.channels);
                let weak = (0..k).find(|&user| pos[user] + 1 == k);
                if let Some(weak) = weak {
                    let norm: f64 = work.channels.channels[weak]
                        .iter()
                        .map(|c| c.norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    if norm > 0.0 {
                        let dir: Vec<Complex64> = work.channels.channels[weak]
                            .iter()
                            .map(|c| c / norm)
                            .collect();
                        for lam in [0.4, 0.7] {
                            let beams: Vec<Vec<Complex64>> = s
                                .beams
                                .iter()
                                .map(|w| {
                                    let mixed: Vec<Complex64> = w
                                        .iter()
                                        .zip(dir.iter())
                                        .map(|(a, d)| (1.0 - lam) * a + lam * d)
                                        .collect();
                                    let n: f64 = mixed
                                        .iter()
                                        .map(|c| c.norm_sqr())
                                        .sum::<f64>()
                                        .sqrt();
                                    if n > 0.0 {
                                        mixed.into_iter().map(|c| c / n).collect()
                                    } else {
                                        dir.clone()
                                    }
                                })
                                .collect();
                            for ratios in ratio_profiles(&work, &u) {
                                if let Some(tx) =
                                    noma_chain_fill(&work, &beams, &u, &ratios, &freqs, margin)
                                {
                                    if start_meets_deadlines(
                                        &work, scheme, &tx, &ratios, &freqs, &u, margin,
                                    ) {
                                        inits.push((tx, ratios, freqs.clone()));
                                        break;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if inits.is_empty() {
        return Err(first_err.unwrap_or_else(|| {
            OptimError::Infeasible(format!(
                "deadlines cannot be met even at the full power budget ({} W)",
                inst.p_max_w
            ))
        }));
    }
    let mut best: Option<(SolutionState, IterationTrace)> = None;
    for init in inits {
        match descend(inst, &work, scheme, params, &u, init) {
            Ok((state, trace)) => {
                let better = match &best {
                    None => true,
                    Some((b, _)) => {
                        (state.feasible && !b.feasible)
                            || (state.feasible == b.feasible && state.objective < b.objective)
                    }
                };
                if better {
                    best = Some((state, trace));
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    match best {
        Some(win) => Ok(win),
        None => Err(first_err.expect("at least one candidate ran")),
    }
}

/// One full alternating descent from a given initial point.
fn descend(
    inst: &ProblemInstance,
    work: &ProblemInstance,
    scheme: Scheme,
    params: &SolverParams,
    u: &[u64],
    init: (TransmitState, Vec<f64>, Vec<f64>),
) -> Result<(SolutionState, IterationTrace), OptimError> {
    let k = work.users();
    let (mut tx, mut ratios, mut freqs) = init;
    let mut trace = IterationTrace::default();
    let mut prev_total = f64::INFINITY;

    // The power block never degrades, but repricing the ratios and
    // frequencies afterwards can, so the last iterate is not always the
    // cheapest point the descent has visited. Remember the best
    // deadline-feasible snapshot and fall back to it at the end.
    let mut best: Option<(TransmitState, Vec<f64>, Vec<f64>, f64)> = None;
    let slack = work.t_max_s * (1.0 + 1e-9);
    if start_meets_deadlines(work, scheme, &tx, &ratios, &freqs, u, slack) {
        if let Ok(report) = rates_for(scheme, &work.channels, &tx) {
            if let Ok(rep) = link::energy(
                &tx,
                &report,
                &ratios,
                &freqs,
                u,
                &work.overhead,
                work.r_bits,
                work.xi,
            ) {
                best = Some((tx.clone(), ratios.clone(), freqs.clone(), rep.total));
            }
        }
    }

    for iter in 0..params.outer_max_iters {
        let t0 = Instant::now();
        tx = sca::solve_power_beamforming(work, scheme, &tx, &ratios, &freqs, params)?;
        if scheme == Scheme::Noma {
            // Exact coordinate-descent polish on the powers at the beams
            // the convex restriction settled on; both stages only accept
            // genuine improvements, so chaining them stays monotone.
            tx = noma_power_step(work, &tx, &ratios, &freqs, u)?;
        }
        let power_ms = t0.elapsed().as_secs_f64() * 1e3;

        let report = rates_for(scheme, &work.channels, &tx)?;
        let srates = stream_rates(&report);

        // Snapshot the post-power point before the ratio block moves the
        // operating point; the power block's output is exactly feasible.
        if let Ok(rep) = link::energy(
            &tx,
            &report,
            &ratios,
            &freqs,
            u,
            &work.overhead,
            work.r_bits,
            work.xi,
        ) {
            if best.as_ref().map_or(true, |b| rep.total < b.3) {
                best = Some((tx.clone(), ratios.clone(), freqs.clone(), rep.total));
            }
        }

        let t1 = Instant::now();
        if scheme != Scheme::Conventional {
            for s in 0..=k {
                ratios[s] = scr::optimal_ratio_for_stream(
                    work,
                    ratios[s],
                    freqs[s],
                    u[s],
                    tx.powers[s],
                    srates[s],
                )?;
            }
        }
        let ratio_ms = t1.elapsed().as_secs_f64() * 1e3;

        let t2 = Instant::now();
        if scheme != Scheme::Conventional {
            freqs = compute::solve_frequencies(work, &ratios, u, &srates)?;
        }
        let compute_ms = t2.elapsed().as_secs_f64() * 1e3;

        let rep = link::energy(
            &tx,
            &report,
            &ratios,
            &freqs,
            u,
            &work.overhead,
            work.r_bits,
            work.xi,
        )?;
        trace.records.push(TraceRecord {
            iter,
            objective: rep.total,
            e1: rep.e1,
            e2: rep.e2,
            power_ms,
            ratio_ms,
            compute_ms,
        });
        if rep.total < best.as_ref().map_or(f64::INFINITY, |b| b.3)
            && start_meets_deadlines(work, scheme, &tx, &ratios, &freqs, u, slack)
        {
            best = Some((tx.clone(), ratios.clone(), freqs.clone(), rep.total));
        }
        let drop = (prev_total - rep.total) / prev_total.abs().max(1e-300);
        prev_total = rep.total;
        if iter > 0 && drop < params.obj_rel_tol {
            break;
        }
    }

    if let Some((btx, bratios, bfreqs, btotal)) = best {
        if btotal < prev_total {
            tx = btx;
            ratios = bratios;
            freqs = bfreqs;
        }
    }
    let report = rates_for(scheme, &work.channels, &tx)?;
    let rep = link::energy(
        &tx,
        &report,
        &ratios,
        &freqs,
        u,
        &work.overhead,
        work.r_bits,
        work.xi,
    )?;
    let mut state = SolutionState {
        powers: tx.powers,
        beams: tx.beams,
        compute: freqs,
        ratios,
        e1: rep.e1,
        e2: rep.e2,
        objective: rep.total,
        feasible: false,
    };
    state.feasible = verify_constraints(inst, scheme, &state, params.feas_tol).is_ok();
    Ok((state, trace))
}
