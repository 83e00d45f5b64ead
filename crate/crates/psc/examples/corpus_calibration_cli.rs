//! Calibrate a scenario from a corpus file the way `psc calibrate` does,
//! then feed the emitted TOML fragment straight back into a sweep config.
//!
//! This is the intended workflow for real corpora: measure the compute-cost
//! curve and the safe compression ceiling once, paste the fragment into the
//! scenario file, and run sweeps without re-measuring.
//!
//! Run with `cargo run --example corpus_calibration_cli`.

use psc::experiments::{
    calibrate_corpus_file, fragment_to_toml, parse_config, run_sweep, synth_corpus, CorpusConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Stand-in for a real corpus file: write a synthetic one to disk in the
    // tab-separated format (`sample_id  head  relation  tail` per line).
    let corpus = synth_corpus(&CorpusConfig {
        pairs: 25,
        max_relations: 4,
        samples: 80,
        ..CorpusConfig::default()
    })?;
    let dir = std::env::temp_dir().join("psc-example-calibration");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("corpus.tsv");
    let mut text = String::new();
    for row in corpus.rows() {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            row.sample, row.head, row.relation, row.tail
        ));
    }
    std::fs::write(&path, text)?;

    let frag = calibrate_corpus_file(&path, 0.9, 1000.0)?;
    let fragment = fragment_to_toml(&frag);
    println!("calibration fragment:\n{fragment}");

    // Concatenate the fragment with the radio scenario and run a tiny sweep.
    let scenario = format!(
        r#"
        {fragment}

        [system]
        users = 2
        antennas = 2
        bandwidth_hz = 5.0e6

        [channel]
        model = "fixed"
        distance_km = 0.2

        [payload]
        shared_triples = 1500
        private_triples = [800]

        [sweep]
        values = [5.0e6, 1.0e7]
        seeds = 2
        schemes = ["rsma", "conventional"]
        "#
    );
    let cfg = parse_config(&scenario)?;
    let result = run_sweep(&cfg)?;
    println!("sweep on the calibrated scenario:");
    for row in &result.sweep_rows {
        println!(
            "  {} seed {} at {:>9.1e} Hz: E = {:.4e} J (feasible: {})",
            row.scheme.label(),
            row.seed,
            row.value,
            row.e,
            row.feasible
        );
    }
    Ok(())
}
