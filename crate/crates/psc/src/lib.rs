//! Semantic compression over multi-antenna downlinks, end to end.
//!
//! The crate models a base station that shares a probabilistic knowledge
//! graph with its users, compresses each user's semantic payload against
//! that graph, and transmits the residue over a rate-splitting downlink
//! while choosing transmit powers, beamformers, CPU frequencies, and
//! per-user compression ratios to minimise total energy under latency
//! constraints.
//!
//! Module map:
//!
//! * [`pkg`] — knowledge graphs from sample corpora: sample-set algebra,
//!   unconditional and conditional probability matrices.
//! * [`compression`] — multi-round graph-guided compression, recovery by
//!   matrix replay, semantic accuracy, wire encoding, and calibration of
//!   the compute-cost curve and the accuracy-safe compression ceiling.
//! * [`link`] — channel generation, achievable rates for rate-splitting,
//!   orthogonal, and superposition transmission, plus delay and energy
//!   accounting.
//! * [`optim`] — the alternating energy minimiser: an interior-point core,
//!   a convexified power/beamforming step, exact compression-ratio and
//!   CPU-frequency steps, baselines, and a brute-force grid oracle.
//! * [`experiments`] — reproducible sweep and benchmark drivers behind the
//!   `psc` binary, with TOML configs and CSV output.
//!
//! The `examples/` directory holds one runnable walkthrough per capability;
//! start with `pkg_basics` and `compress_roundtrip`.

pub mod compression;
pub mod experiments;
pub mod link;
pub mod optim;
pub mod pkg;

pub use compression::{
    calibrate_overhead, calibrate_theta, comm_overhead, compress, decompress, semantic_accuracy,
    split_shared_private, CompressError, CompressedPayload, CompressionMode, DegradedTriple,
    OverheadModel, OverheadSegment, PayloadItem, SemanticSet,
};
pub use link::{
    delays, energy, generate_channels, noma_rates, rsma_rates, sdma_rates, sic_positions,
    ChannelSet, EnergyDelayReport, LinkError, PathlossModel, RateReport, TransmitState,
};
pub use optim::{
    alternating_optimize, effective_payload, grid_oracle, verify_constraints, GridSpec,
    IterationTrace, OptimError, ProblemInstance, Scheme, SolutionState, SolverParams, TraceRecord,
};
pub use experiments::{
    calibrate_corpus_file, fragment_to_toml, load_config, parse_config, resolve,
    run_oracle_check, run_subproblem_benchmarks, run_sweep, synth_corpus, BenchRow,
    CalibrationFragment, ExperimentError, OracleComparison, ResolvedScenario, RunMode,
    ScenarioConfig, SweepAxis, SweepResult, SweepRow,
};
pub use pkg::{
    parse_corpus, EntityId, Pkg, PkgError, ProbabilityMatrix, RelationId, SampleCorpus, Triple,
    TripleRef,
};
