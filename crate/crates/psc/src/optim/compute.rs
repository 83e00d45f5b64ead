//! Exact CPU-frequency step.
//!
//! With ratios, powers, and rates fixed, the per-stream compute energy
//! `xi * L1(w) * f^2` is increasing in `f`, while the latency constraint
//! `L1(w)/f + payload/rate <= t_max` lower-bounds it. The minimiser is the
//! closed form `f* = L1(w) / (t_max - payload/rate)`, or zero when there is
//! no compute work at all.

use crate::optim::{OptimError, ProblemInstance};

/// Closed-form minimal feasible frequency for one stream.
///
/// `rate` may be `f64::INFINITY` (no transmission time). Returns an error
/// when the communication time alone already exceeds the latency budget.
pub(crate) fn optimal_frequency_for_stream(
    inst: &ProblemInstance,
    ratio: f64,
    u_triples: u64,
    rate: f64,
) -> Result<f64, OptimError> {
    let work = inst.overhead.eval(ratio);
    if work <= 0.0 {
        return Ok(0.0);
    }
    let payload_bits = u_triples as f64 * 2.0 * f64::from(inst.r_bits) * (2.0 - ratio);
    let comm = if payload_bits <= 0.0 || rate.is_infinite() {
        0.0
    } else if rate <= 0.0 {
        return Err(OptimError::Infeasible(
            "frequency step with zero rate but pending payload".into(),
        ));
    } else {
        payload_bits / rate
    };
    let window = inst.t_max_s - comm;
    if window <= 0.0 {
        return Err(OptimError::Infeasible(format!(
            "communication time {comm} leaves no room for compute work within {}",
            inst.t_max_s
        )));
    }
    Ok(work / window)
}

/// Frequency step for all streams; checks the shared cycle budget.
pub(crate) fn solve_frequencies(
    inst: &ProblemInstance,
    ratios: &[f64],
    payload: &[u64],
    rates: &[f64],
) -> Result<Vec<f64>, OptimError> {
    let mut out = Vec::with_capacity(ratios.len());
    for s in 0..ratios.len() {
        let f = if payload[s] == 0 {
            // No payload means no compression work either.
            0.0
        } else {
            optimal_frequency_for_stream(inst, ratios[s], payload[s], rates[s])?
        };
        out.push(f);
    }
    let total: f64 = out.iter().sum();
    if total > inst.f_max_hz * (1.0 + 1e-9) {
        return Err(OptimError::Infeasible(format!(
            "total cpu frequency {total} exceeds budget {}",
            inst.f_max_hz
        )));
    }
    Ok(out)
}
