//! Exact per-stream compression-ratio step.
//!
//! With powers, beams, and rates held fixed, the energy attributable to one
//! stream as a function of its compression ratio `w` is
//!
//! `F(w) = xi * f^2 * L1(w) - (2 R u p / rate) * w + const`
//!
//! a piecewise-linear convex function (the compute overhead `L1` is a convex
//! piecewise-linear model). The feasible set is `[0, min(theta, 1)]`
//! intersected with the latency window, which is an interval because the
//! total delay is convex in `w`. The minimiser therefore sits at an interval
//! endpoint or an `L1` breakpoint, so enumerating those candidates is exact.

use crate::compression::OverheadModel;
use crate::optim::{OptimError, ProblemInstance};

/// Total delay for one stream at ratio `w`, with rate and cpu fixed.
fn stream_delay(
    model: &OverheadModel,
    w: f64,
    f_cycles: f64,
    u_triples: f64,
    rate: f64,
    r_bits: f64,
    t_max: f64,
) -> f64 {
    let work = model.eval(w);
    let compute = if work <= 0.0 {
        0.0
    } else if f_cycles <= 0.0 {
        return f64::INFINITY;
    } else {
        work / f_cycles
    };
    let payload_bits = u_triples * 2.0 * r_bits * (2.0 - w);
    let comm = if payload_bits <= 0.0 {
        0.0
    } else if rate.is_infinite() {
        0.0
    } else if rate <= 0.0 {
        return f64::INFINITY;
    } else {
        payload_bits / rate
    };
    let _ = t_max;
    compute + comm
}

/// Locate the boundary of the latency-feasible interval next to `anchor`
/// (which must itself be feasible) by bisection on the feasibility
/// indicator, which is monotone on each side of a convex function's
/// sublevel set.
fn bisect_boundary(
    feasible: &dyn Fn(f64) -> bool,
    mut good: f64,
    mut bad: f64,
) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (good + bad);
        if feasible(mid) {
            good = mid;
        } else {
            bad = mid;
        }
        if (good - bad).abs() <= f64::EPSILON * good.abs().max(1.0) {
            break;
        }
    }
    good
}

/// Exact single-stream minimiser over the feasible ratio interval.
/// Returns the new ratio; `current` must be latency-feasible.
pub(crate) fn optimal_ratio_for_stream(
    inst: &ProblemInstance,
    current: f64,
    f_cycles: f64,
    u_triples: u64,
    power_w: f64,
    rate: f64,
) -> Result<f64, OptimError> {
    if u_triples == 0 {
        return Ok(0.0);
    }
    let model = &inst.overhead;
    let r_bits = f64::from(inst.r_bits);
    let u = u_triples as f64;
    let hi = inst.theta.min(1.0).max(0.0);
    let delay =
        |w: f64| stream_delay(model, w, f_cycles, u, rate, r_bits, inst.t_max_s);
    // Accept the same hair of relative slack the energy audit grants, so a
    // state another block update let through is a valid anchor here.
    let feasible = |w: f64| delay(w) <= inst.t_max_s * (1.0 + 1e-9);
    let anchor = current.clamp(0.0, hi);
    if !feasible(anchor) {
        return Err(OptimError::Infeasible(format!(
            "ratio step started from a latency-violating point (delay {} > {})",
            delay(anchor),
            inst.t_max_s
        )));
    }
    let lo_end = if feasible(0.0) {
        0.0
    } else {
        bisect_boundary(&feasible, anchor, 0.0)
    };
    let hi_end = if feasible(hi) {
        hi
    } else {
        bisect_boundary(&feasible, anchor, hi)
    };
    // Energy as a function of the ratio, with stream-constant terms dropped.
    let comm_gain = if rate.is_infinite() || rate <= 0.0 {
        0.0
    } else {
        2.0 * r_bits * u * power_w / rate
    };
    let objective = |w: f64| inst.xi * f_cycles * f_cycles * model.eval(w) - comm_gain * w;
    let mut candidates = vec![lo_end, hi_end];
    for b in model.breakpoints() {
        if b > lo_end && b < hi_end {
            candidates.push(b);
        }
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = candidates[0];
    let mut best_val = objective(best);
    for &c in &candidates[1..] {
        let v = objective(c);
        if v < best_val {
            best = c;
            best_val = v;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compression::{OverheadModel, OverheadSegment};
    use crate::link::ChannelSet;
    use crate::optim::ProblemInstance;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_instance(model: OverheadModel, theta: f64, t_max: f64, xi: f64) -> ProblemInstance {
        let h = vec![vec![Complex64::new(1.0, 0.0)]];
        ProblemInstance {
            channels: ChannelSet::from_parts(h, 1.0, 1.0e6).unwrap(),
            payload: vec![0, 1000],
            overhead: model,
            theta,
            p_max_w: 1.0,
            f_max_hz: 1e9,
            t_max_s: t_max,
            xi,
            r_bits: 32,
        }
    }

    fn two_segment_model() -> OverheadModel {
        // Flat-ish start then a steep tail: breakpoint at 0.5.
        OverheadModel::new(vec![
            OverheadSegment {
                slope: 1.0e6,
                intercept: 0.0,
                omega_lo: 0.0,
                omega_hi: 0.5,
            },
            OverheadSegment {
                slope: 8.0e6,
                intercept: -3.5e6,
                omega_lo: 0.5,
                omega_hi: 1.0,
            },
        ])
        .unwrap()
    }

    /// Dense-scan reference used to certify the candidate enumeration.
    fn scan_reference(
        inst: &ProblemInstance,
        f: f64,
        u: u64,
        p: f64,
        rate: f64,
        steps: usize,
    ) -> (f64, f64) {
        let r_bits = f64::from(inst.r_bits);
        let uu = u as f64;
        let hi = inst.theta.min(1.0);
        let comm_gain = if rate.is_infinite() || rate <= 0.0 {
            0.0
        } else {
            2.0 * r_bits * uu * p / rate
        };
        let mut best = f64::INFINITY;
        let mut best_w = f64::NAN;
        for i in 0..=steps {
            let w = hi * i as f64 / steps as f64;
            let d = stream_delay(&inst.overhead, w, f, uu, rate, r_bits, inst.t_max_s);
            if d > inst.t_max_s {
                continue;
            }
            let v = inst.xi * f * f * inst.overhead.eval(w) - comm_gain * w;
            if v < best - 1e-18 {
                best = v;
                best_w = w;
            }
        }
        (best_w, best)
    }

    #[test]
    fn exact_step_matches_dense_scan_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let slope1 = 1.0e5 * (1.0 + rng.gen::<f64>() * 4.0);
            let slope2 = slope1 * (2.0 + rng.gen::<f64>() * 8.0);
            let bp = 0.2 + rng.gen::<f64>() * 0.6;
            let model = OverheadModel::new(vec![
                OverheadSegment {
                    slope: slope1,
                    intercept: 0.0,
                    omega_lo: 0.0,
                    omega_hi: bp,
                },
                OverheadSegment {
                    slope: slope2,
                    intercept: (slope1 - slope2) * bp,
                    omega_lo: bp,
                    omega_hi: 1.0,
                },
            ])
            .unwrap();
            let theta = 0.3 + rng.gen::<f64>() * 0.7;
            let t_max = 0.5 + rng.gen::<f64>();
            let inst = toy_instance(model, theta, t_max, 1e-27);
            let u = 200 + rng.gen_range(0..2000);
            let p = rng.gen::<f64>();
            let rate = 1.0e5 * (1.0 + rng.gen::<f64>() * 40.0);
            let f = 1.0e6 * (1.0 + rng.gen::<f64>() * 50.0);
            // Pick a feasible anchor; skip draws with an empty window.
            let anchor = (0..=100)
                .map(|i| theta * i as f64 / 100.0)
                .find(|&w| {
                    stream_delay(&inst.overhead, w, f, u as f64, rate, 32.0, t_max) <= t_max
                });
            let Some(anchor) = anchor else { continue };
            let got = optimal_ratio_for_stream(&inst, anchor, f, u, p, rate).unwrap();
            let (want_w, want_v) = scan_reference(&inst, f, u, p, rate, 100_000);
            let step = theta / 100_000.0;
            assert!(
                (got - want_w).abs() <= step + 1e-12,
                "trial {trial}: got {got}, scan {want_w}"
            );
            let got_v = inst.xi * f * f * inst.overhead.eval(got)
                - (2.0 * 32.0 * u as f64 * p / rate) * got;
            assert!(
                got_v <= want_v + 1e-8 * want_v.abs().max(1e-12),
                "trial {trial}: objective {got_v} vs scan {want_v}"
            );
        }
    }

    #[test]
    fn zero_payload_pins_ratio_to_zero() {
        let inst = toy_instance(two_segment_model(), 0.9, 1.0, 1e-27);
        let w = optimal_ratio_for_stream(&inst, 0.7, 1e7, 0, 0.5, 1e6).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn expensive_compute_prefers_no_compression() {
        // Huge xi: any compute work dominates, so stay at w = 0.
        let inst = toy_instance(two_segment_model(), 1.0, 10.0, 1.0);
        let w = optimal_ratio_for_stream(&inst, 0.4, 1e6, 500, 0.9, 1e7).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn costly_link_pushes_to_the_accuracy_cap() {
        // Tiny xi and an expensive link: compress as hard as allowed.
        let inst = toy_instance(two_segment_model(), 0.8, 10.0, 1e-40);
        let w = optimal_ratio_for_stream(&inst, 0.1, 1e6, 500, 1.0, 2e5).unwrap();
        assert!((w - 0.8).abs() < 1e-12, "w = {w}");
    }

    #[test]
    fn latency_floor_forces_a_positive_ratio() {
        // At w = 0 the payload misses the deadline; the window starts above 0.
        let inst = toy_instance(two_segment_model(), 1.0, 1.0, 1.0);
        let u = 2000u64;
        let rate = 1.6e5; // 4R u / rate = 1.6 s > 1 s at w = 0; w >= ~0.75 fits
        let f = 1e9;
        let anchor = 0.9;
        assert!(stream_delay(&inst.overhead, anchor, f, u as f64, rate, 32.0, 1.0) <= 1.0);
        let w = optimal_ratio_for_stream(&inst, anchor, f, u, 0.5, rate).unwrap();
        // Deadline: 2 R u (2 - w) / rate <= t_max - L1(w)/f. With the giant
        // xi the objective wants the smallest feasible w, i.e. the interval's
        // lower end.
        let d = stream_delay(&inst.overhead, w, f, u as f64, rate, 32.0, 1.0);
        assert!(d <= 1.0 + 1e-9);
        assert!(w > 0.0);
        let slightly_less = (w - 1e-6).max(0.0);
        assert!(stream_delay(&inst.overhead, slightly_less, f, u as f64, rate, 32.0, 1.0) > 1.0);
    }

    #[test]
    fn tie_breaks_to_the_lowest_ratio() {
        // Flat L1 (zero slope) and zero power: objective identically zero,
        // so every candidate ties and the lowest ratio must win.
        let model = OverheadModel::new(vec![OverheadSegment {
            slope: 0.0,
            intercept: 0.0,
            omega_lo: 0.0,
            omega_hi: 1.0,
        }])
        .unwrap();
        let inst = toy_instance(model, 1.0, 10.0, 1e-27);
        let w = optimal_ratio_for_stream(&inst, 0.6, 1e7, 100, 0.0, 1e7).unwrap();
        assert_eq!(w, 0.0);
    }
}
