//! Scratch probe: can blending the spatial-multiplexing optimum's beams
//! toward the weakest user's direction produce a cheap decodable start for
//! the successive-decoding scheme? Also times each scheme's solve.

use num_complex::Complex64;
use psc::{
    alternating_optimize, delays, energy, generate_channels, noma_rates, OverheadModel,
    OverheadSegment, PathlossModel, ProblemInstance, Scheme, SolverParams, TransmitState,
};
use std::time::Instant;

fn model() -> OverheadModel {
    OverheadModel::new(vec![
        OverheadSegment {
            slope: 2.0e7,
            intercept: 0.0,
            omega_lo: 0.0,
            omega_hi: 0.5,
        },
        OverheadSegment {
            slope: 8.0e7,
            intercept: -3.0e7,
            omega_lo: 0.5,
            omega_hi: 1.0,
        },
    ])
    .unwrap()
}

fn normalize(v: &[Complex64]) -> Vec<Complex64> {
    let n: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.iter().map(|c| c / n).collect()
}

fn main() {
    for seed in [0u64, 1, 3] {
        for b in [4.0e6_f64, 8.0e6] {
            let channels = generate_channels(
                seed,
                5,
                4,
                &PathlossModel::UniformAnnulusM {
                    min_m: 50.0,
                    max_m: 500.0,
                },
                b,
                -174.0,
            )
            .unwrap();
            let inst = ProblemInstance {
                channels: channels.clone(),
                payload: vec![20_000, 10_000, 10_000, 10_000, 10_000, 10_000],
                theta: 0.6,
                overhead: model(),
                p_max_w: 1.0,
                f_max_hz: 1.0e9,
                t_max_s: 1.0,
                xi: 1.0e-28,
                r_bits: 32,
            };
            let params = SolverParams::default();

            let t = Instant::now();
            let sdma = alternating_optimize(&inst, Scheme::Sdma, &params);
            let sdma_ms = t.elapsed().as_millis();
            let t = Instant::now();
            let noma = alternating_optimize(&inst, Scheme::Noma, &params);
            let noma_ms = t.elapsed().as_millis();

            let (Ok((s, _)), Ok((n, ntrace))) = (&sdma, &noma) else {
                println!("seed {seed} B {b:.1e}: sdma or noma unsolved");
                continue;
            };
            println!(
                "seed {seed} B {b:.1e}: sdma {:.3e} ({sdma_ms} ms)  noma {:.3e} ({noma_ms} ms)",
                s.objective, n.objective
            );
            let objs: Vec<String> = ntrace
                .records
                .iter()
                .map(|r| format!("{:.2e}", r.objective))
                .collect();
            println!("  noma trace: {}", objs.join(" -> "));
            println!(
                "  noma powers: {:?}",
                n.powers.iter().map(|p| (p * 1e4).round() / 1e4).collect::<Vec<_>>()
            );
            println!(
                "  noma ratios: {:?}  sdma powers: {:?}",
                n.ratios.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>(),
                s.powers.iter().map(|p| (p * 1e4).round() / 1e4).collect::<Vec<_>>()
            );

            // Fold the shared payload the way those schemes see it.
            let u: Vec<u64> = {
                let mut v = inst.payload.clone();
                let u0 = v[0];
                v[0] = 0;
                for x in v.iter_mut().skip(1) {
                    *x += u0;
                }
                v
            };
            // Weak direction = user with the smallest channel norm.
            let weak = (0..5)
                .min_by(|&a, &b| {
                    let na: f64 = channels.channels[a].iter().map(|c| c.norm_sqr()).sum();
                    let nb: f64 = channels.channels[b].iter().map(|c| c.norm_sqr()).sum();
                    na.partial_cmp(&nb).unwrap()
                })
                .unwrap();
            let dir = normalize(&channels.channels[weak]);
            for lam in [0.0, 0.25, 0.5, 0.75] {
                // Blend each private beam of the spatial optimum toward the
                // weak direction, keep the spatial powers, re-rate.
                let beams: Vec<Vec<Complex64>> = s
                    .beams
                    .iter()
                    .map(|w| {
                        let mixed: Vec<Complex64> = w
                            .iter()
                            .zip(dir.iter())
                            .map(|(a, d)| (1.0 - lam) * a + lam * d)
                            .collect();
                        normalize(&mixed)
                    })
                    .collect();
                let tx = TransmitState {
                    powers: s.powers.clone(),
                    beams,
                };
                let Ok(rep) = noma_rates(&channels, &tx) else {
                    println!("  lam {lam}: rate model rejected");
                    continue;
                };
                let ds = delays(&rep, &s.ratios, &s.compute, &u, &inst.overhead, inst.r_bits);
                match ds {
                    Ok(ds) => {
                        let worst = ds.iter().cloned().fold(0.0f64, f64::max);
                        let e = energy(
                            &tx,
                            &rep,
                            &s.ratios,
                            &s.compute,
                            &u,
                            &inst.overhead,
                            inst.r_bits,
                            inst.xi,
                        )
                        .map(|r| r.total)
                        .unwrap_or(f64::NAN);
                        println!(
                            "  lam {lam}: worst delay {worst:.3} (budget 1.0), start energy {e:.3e}"
                        );
                    }
                    Err(e) => println!("  lam {lam}: delays err {e}"),
                }
            }
        }
    }
}
