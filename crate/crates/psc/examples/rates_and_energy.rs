//! Channel generation, achievable rates under three transmission schemes,
//! and the frame's delay/energy accounting for a fixed transmit state.
//!
//! Rate splitting carries one shared stream everyone decodes first plus one
//! private stream per user; orthogonal beamforming (SDMA) carries private
//! streams only and treats cross-talk as noise; superposition (NOMA) decodes
//! stronger users' signals before weaker ones.
//!
//! Run with `cargo run --example rates_and_energy`.

use psc::compression::OverheadModel;
use psc::link::{
    delays, energy, generate_channels, noma_rates, rsma_rates, sdma_rates, PathlossModel,
    TransmitState,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Three users dropped uniformly between 50 and 300 metres, four transmit
    // antennas, 10 MHz, thermal noise at -174 dBm/Hz.
    let ch = generate_channels(
        42,
        3,
        4,
        &PathlossModel::UniformAnnulusM {
            min_m: 50.0,
            max_m: 300.0,
        },
        1.0e7,
        -174.0,
    )?;
    println!(
        "noise power: {:.3e} W over {:.0} MHz",
        ch.noise_power,
        ch.bandwidth_hz / 1e6
    );

    // Matched-filter beams: each private beam points at its user; the shared
    // beam points at the user average. Powers: 0.4 W shared, 0.2 W each.
    let unit = |v: Vec<num_complex::Complex64>| {
        let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|c| c / n).collect::<Vec<_>>()
    };
    let mut beams = Vec::new();
    let mut mean = vec![num_complex::Complex64::new(0.0, 0.0); 4];
    for h in &ch.channels {
        for (m, c) in mean.iter_mut().zip(h.iter()) {
            *m += c;
        }
    }
    beams.push(unit(mean));
    for h in &ch.channels {
        beams.push(unit(h.clone()));
    }
    let tx = TransmitState {
        powers: vec![0.4, 0.2, 0.2, 0.2],
        beams,
    };
    // Orthogonal and superposition schemes carry no shared stream, so their
    // state moves the shared watts onto the private streams instead.
    let mut tx_private_only = tx.clone();
    tx_private_only.powers = vec![0.0, 0.333, 0.333, 0.333];

    for (name, report) in [
        ("rate splitting", rsma_rates(&ch, &tx)?),
        ("orthogonal", sdma_rates(&ch, &tx_private_only)?),
        ("superposition", noma_rates(&ch, &tx_private_only)?),
    ] {
        let privates: Vec<String> = report
            .private
            .iter()
            .map(|r| format!("{:.2}", r / 1e6))
            .collect();
        // Schemes without a shared stream report an unconstrained (infinite)
        // shared rate; print a dash instead.
        let shared = if report.shared.is_finite() {
            format!("{:.2}", report.shared / 1e6)
        } else {
            "-".into()
        };
        println!(
            "{name:>14}: shared {shared} Mbit/s, private [{}] Mbit/s",
            privates.join(", ")
        );
    }

    // Delay and energy accounting for the rate-splitting state: 1500 shared
    // and 800 private triples at 32-bit ids, everyone compressing 40% of
    // their items on a 300 MHz core slice.
    let report = rsma_rates(&ch, &tx)?;
    let model = OverheadModel::single(5.0e8, 0.0);
    let u = [1500u64, 800, 800, 800];
    let omega = [0.4; 4];
    let f = [3.0e8; 4];
    let r_bits = 32;
    let ds = delays(&report, &omega, &f, &u, &model, r_bits)?;
    let rep = energy(&tx, &report, &omega, &f, &u, &model, r_bits, 1.0e-28)?;
    for (s, d) in ds.iter().enumerate() {
        let label = if s == 0 { "shared".into() } else { format!("user {s}") };
        println!("{label:>8}: delay {d:.3} s");
    }
    println!(
        "compression energy {:.3e} J + transmission energy {:.3e} J = {:.3e} J",
        rep.e1, rep.e2, rep.total
    );
    Ok(())
}
