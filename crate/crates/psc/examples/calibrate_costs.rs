//! Fit the two scenario inputs that come from data rather than the radio:
//! the compute-cost curve (CPU work as a function of the compression ratio)
//! and the largest compression ratio that still recovers accurately.
//!
//! The cost curve is measured by compressing representative sets to
//! exhaustion, recording (ratio, probability cells evaluated) at each round
//! boundary, and taking the lower convex hull. Round 1 replays a single
//! matrix; round n replays one matrix per (n-1)-combination of the items
//! recovered so far, so the cells-per-ratio curve steepens — that convexity
//! is what the optimizer's ratio step exploits.
//!
//! Run with `cargo run --example calibrate_costs`.

use psc::compression::{calibrate_overhead, calibrate_theta, CompressionMode, SemanticSet};
use psc::pkg::{Pkg, RawRow, SampleCorpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Regime-chain corpus (see the `compress_roundtrip` example): pair 0 marks
/// a regime, pair 1 a sub-regime, and the rest are predictable only through
/// those markers — which is what gives compression its later rounds.
fn chain_corpus(pairs: usize, samples: u64, seed: u64) -> SampleCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut push = |sample: u64, pair: usize, slot: usize| {
        rows.push(RawRow {
            sample_id: sample,
            head: format!("h{pair}"),
            relation: format!("r{slot}"),
            tail: format!("t{pair}"),
        });
    };
    for z in 0..samples {
        let regime = rng.gen::<f64>() < 0.55;
        let sub = regime && rng.gen::<f64>() < 0.7;
        push(z, 0, usize::from(!regime));
        push(z, 1, usize::from(sub));
        for pair in 2..pairs {
            let slot = if !regime {
                if rng.gen::<f64>() < 0.9 {
                    0
                } else {
                    2
                }
            } else if !sub {
                1
            } else if rng.gen::<f64>() < 0.55 {
                2
            } else {
                1
            };
            push(z, pair, slot);
        }
    }
    SampleCorpus::new(rows).expect("corpus is non-empty")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = chain_corpus(10, 400, 23);
    let pkg = Pkg::build(&corpus);

    // Representative sets: what a typical payload drawn from this graph
    // looks like. Calibration quality follows how representative they are.
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let sets: Vec<SemanticSet> = (0..10)
        .map(|owner| {
            let triples = (0..80)
                .map(|_| {
                    let pair = rng.gen_range(0..pkg.pair_count());
                    let slot = rng.gen_range(0..pkg.pairs()[pair].relation_count());
                    pkg.triple_at(psc::pkg::TripleRef { pair, slot }).unwrap()
                })
                .collect();
            SemanticSet {
                owner: owner as u32,
                triples,
            }
        })
        .collect();

    let model = calibrate_overhead(&pkg, &sets)?;
    println!("compute-cost curve (probability cells as a function of the ratio):");
    for seg in model.segments() {
        println!(
            "  [{:.3}, {:.3}]: {:.0} * w + {:.0}",
            seg.omega_lo, seg.omega_hi, seg.slope, seg.intercept
        );
    }
    for w in [0.0, 0.25, 0.5, 0.75, 1.0] {
        println!("  cost({w:.2}) = {:.0} cells", model.eval(w));
    }

    // The ratio ceiling: the deepest mean ratio whose recovery accuracy
    // stays above the floor. Verified compression cannot lose information,
    // so with it the ceiling sits where verified degradation saturates;
    // greedy mode trades accuracy for depth, so its ceiling moves with the
    // floor.
    for a_min in [0.999, 0.9] {
        let verified = calibrate_theta(&pkg, &sets, a_min, CompressionMode::Verified)?;
        let greedy = calibrate_theta(&pkg, &sets, a_min, CompressionMode::Greedy)?;
        println!(
            "accuracy floor {a_min}: ratio ceiling {verified:.3} verified, {greedy:.3} greedy"
        );
    }
    Ok(())
}
