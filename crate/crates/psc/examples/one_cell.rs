//! One stressed cell, scheme under inspection only.
use psc::{alternating_optimize, generate_channels, OverheadModel, OverheadSegment, PathlossModel, ProblemInstance, Scheme, SolverParams};
fn main() {
    let channels = generate_channels(0, 5, 4, &PathlossModel::UniformAnnulusM { min_m: 50.0, max_m: 500.0 }, 4.0e6, -174.0).unwrap();
    let inst = ProblemInstance {
        channels,
        payload: vec![20_000, 10_000, 10_000, 10_000, 10_000, 10_000],
        theta: 0.6,
        overhead: OverheadModel::new(vec![
            OverheadSegment { slope: 2.0e7, intercept: 0.0, omega_lo: 0.0, omega_hi: 0.5 },
            OverheadSegment { slope: 8.0e7, intercept: -3.0e7, omega_lo: 0.5, omega_hi: 1.0 },
        ]).unwrap(),
        p_max_w: 1.0,
        f_max_hz: 1.0e9,
        t_max_s: 1.0,
        xi: 1.0e-28,
        r_bits: 32,
    };
    let out = alternating_optimize(&inst, Scheme::Noma, &SolverParams::default());
    match out {
        Ok((s, t)) => println!("noma obj {:.3e} feasible {} iters {}", s.objective, s.feasible, t.records.len()),
        Err(e) => println!("noma err {e}"),
    }
}
