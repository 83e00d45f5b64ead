//! Build a probabilistic knowledge graph from a handful of observations and
//! query it: per-pair relation probabilities, conditioning on known triples,
//! and the padded probability matrix the compressor replays.
//!
//! Run with `cargo run --example pkg_basics`.

use psc::pkg::{parse_corpus, Pkg, TripleRef};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Each line is one observation: a sample id and a (head, relation, tail)
    // triple. Sample 1..=4 are four scenes; the same entity pair can appear
    // with different relations in different scenes.
    let corpus_text = "\
1\tcat\tsits_on\tmat
1\tdog\tchases\tcat
2\tcat\tsits_on\tmat
2\tdog\tsleeps_near\tcat
3\tcat\tscratches\tmat
3\tdog\tchases\tcat
4\tcat\tsits_on\tmat
4\tdog\tchases\tcat
";
    let corpus = parse_corpus(corpus_text)?;
    let pkg = Pkg::build(&corpus);

    println!(
        "graph: {} entity pairs, up to {} relations per pair, {} samples",
        pkg.pair_count(),
        pkg.max_relations(),
        pkg.sample_count()
    );

    // Unconditional probabilities: counts over the pair's total observations.
    for pair in 0..pkg.pair_count() {
        let entry = &pkg.pairs()[pair];
        println!("pair {pair}:");
        for slot in 0..entry.relation_count() {
            let triple = pkg.triple_at(TripleRef { pair, slot })?;
            println!(
                "  {} -[{}]-> {}  p = {:.3}",
                pkg.entity_label(triple.head),
                pkg.relation_label(triple.relation),
                pkg.entity_label(triple.tail),
                pkg.probability(pair, slot)?
            );
        }
    }

    // Conditioning: knowing one triple narrows the samples the other pair's
    // counts are taken over. "dog chases cat" holds in samples {1, 3, 4},
    // and "cat sits_on mat" in {1, 2, 4}, so the conditional is 2/3.
    let cat_mat = pkg
        .resolve(&pkg.triple_from_labels("cat", "sits_on", "mat").unwrap())
        .unwrap();
    let dog_cat = pkg
        .resolve(&pkg.triple_from_labels("dog", "chases", "cat").unwrap())
        .unwrap();
    println!(
        "p(cat sits_on mat) = {:.3}",
        pkg.probability(cat_mat.pair, cat_mat.slot)?
    );
    println!(
        "p(cat sits_on mat | dog chases cat) = {:.3}",
        pkg.conditional_probability(cat_mat, &[dog_cat])?
    );

    // The matrix view both sides replay during compression/recovery: one row
    // per pair, zero padding past a pair's own relation count, and condition
    // rows zeroed (a pair never predicts itself).
    let matrix = pkg.probability_matrix(&[dog_cat])?;
    println!(
        "conditional matrix ({} x {}, conditioned on dog chases cat):",
        matrix.rows(),
        matrix.cols()
    );
    for pair in 0..matrix.rows() {
        let cells: Vec<String> = matrix
            .row(pair)
            .iter()
            .map(|v| format!("{v:.3}"))
            .collect();
        println!("  row {pair}: [{}]", cells.join(", "));
    }
    Ok(())
}
