//! Probabilistic knowledge graphs distilled from sample corpora.
//!
//! A corpus is a list of `(sample_id, head, relation, tail)` rows. Distinct
//! `(head, tail)` entity pairs become indexed rows of the graph; each pair
//! carries one slot per distinct relation together with the set of sample ids
//! that produced it. Relative sample-set sizes define per-relation
//! probabilities, and set intersections define probabilities conditioned on
//! already-known triples. Both are exposed as zero-padded matrices whose rows
//! share a common width so downstream code can scan them uniformly.
//!
//! All probabilities are ratios of integer set cardinalities; comparisons that
//! drive compression decisions happen on the integer counts and only the
//! published matrices convert to `f64`.

use std::collections::HashMap;
use std::error::Error;
use std::fmt;

use serde::Deserialize;

/// Index of an entity label in a [`Pkg`] dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

/// Index of a relation label in a [`Pkg`] dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// A directed labelled edge: head entity, relation, tail entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// One corpus observation after canonicalisation (sample ids contiguous).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusRow {
    pub sample: u32,
    pub head: String,
    pub relation: String,
    pub tail: String,
}

/// Raw observation as found in corpus files.
#[derive(Debug, Clone, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
pub struct RawRow {
    pub sample_id: u64,
    pub head: String,
    pub relation: String,
    pub tail: String,
}

/// Errors raised while ingesting corpora or querying the graph.
#[derive(Debug, Clone, PartialEq)]
pub enum PkgError {
    /// The corpus contained no rows.
    EmptyCorpus,
    /// A corpus line could not be parsed.
    Parse { line: usize, message: String },
    /// A pair index was outside `0..pair_count`.
    PairOutOfRange { pair: usize, pairs: usize },
    /// A relation slot was outside `0..relation_count` for its pair.
    SlotOutOfRange { pair: usize, slot: usize, slots: usize },
    /// A conditional query targeted a pair that is itself a condition.
    TargetInConditions { pair: usize },
    /// A conditional query was issued with no conditions.
    NoConditions,
    /// A triple used labels the graph has never seen.
    UnknownTriple {
        head: String,
        relation: String,
        tail: String,
    },
}

impl fmt::Display for PkgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PkgError::EmptyCorpus => write!(f, "corpus has no rows"),
            PkgError::Parse { line, message } => {
                write!(f, "corpus line {line}: {message}")
            }
            PkgError::PairOutOfRange { pair, pairs } => {
                write!(f, "pair index {pair} out of range (graph has {pairs} pairs)")
            }
            PkgError::SlotOutOfRange { pair, slot, slots } => {
                write!(
                    f,
                    "relation slot {slot} out of range for pair {pair} ({slots} slots)"
                )
            }
            PkgError::TargetInConditions { pair } => {
                write!(f, "target pair {pair} also appears among the conditions")
            }
            PkgError::NoConditions => {
                write!(f, "conditional probability requires at least one condition")
            }
            PkgError::UnknownTriple {
                head,
                relation,
                tail,
            } => {
                write!(f, "triple ({head}, {relation}, {tail}) is not in the graph")
            }
        }
    }
}

impl Error for PkgError {}

/// A canonicalised corpus: rows deduplicated, sorted, sample ids remapped to
/// the contiguous range `1..=sample_count` (ascending by original id).
#[derive(Debug, Clone)]
pub struct SampleCorpus {
    rows: Vec<CorpusRow>,
    original_ids: Vec<u64>,
}

impl SampleCorpus {
    /// Canonicalise raw rows. Duplicate rows collapse; sample ids are
    /// remapped to `1..=Z` preserving their original order.
    pub fn new(mut raw: Vec<RawRow>) -> Result<Self, PkgError> {
        if raw.is_empty() {
            return Err(PkgError::EmptyCorpus);
        }
        let mut ids: Vec<u64> = raw.iter().map(|r| r.sample_id).collect();
        ids.sort_unstable();
        ids.dedup();
        let index: HashMap<u64, u32> = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, (i + 1) as u32))
            .collect();
        raw.sort();
        raw.dedup();
        let rows = raw
            .into_iter()
            .map(|r| CorpusRow {
                sample: index[&r.sample_id],
                head: r.head,
                relation: r.relation,
                tail: r.tail,
            })
            .collect();
        Ok(SampleCorpus {
            rows,
            original_ids: ids,
        })
    }

    pub fn rows(&self) -> &[CorpusRow] {
        &self.rows
    }

    /// Number of distinct samples (the `Z` of the graph).
    pub fn sample_count(&self) -> u32 {
        self.original_ids.len() as u32
    }

    /// Original sample id behind a canonical one (1-based).
    pub fn original_sample_id(&self, sample: u32) -> Option<u64> {
        self.original_ids.get(sample as usize - 1).copied()
    }
}

/// Parse a corpus from text. Two line formats are accepted and auto-detected
/// from the first non-empty line: tab-separated `sample_id\thead\trelation\ttail`,
/// or one JSON object per line with those fields.
pub fn parse_corpus(text: &str) -> Result<SampleCorpus, PkgError> {
    let first = text.lines().find(|l| !l.trim().is_empty());
    let Some(first) = first else {
        return Err(PkgError::EmptyCorpus);
    };
    let json = first.trim_start().starts_with('{');
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if json {
            let row: RawRow = serde_json::from_str(line).map_err(|e| PkgError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            raw.push(row);
        } else {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(PkgError::Parse {
                    line: line_no,
                    message: format!("expected 4 tab-separated fields, found {}", fields.len()),
                });
            }
            let sample_id = fields[0].trim().parse::<u64>().map_err(|e| PkgError::Parse {
                line: line_no,
                message: format!("bad sample id {:?}: {e}", fields[0]),
            })?;
            raw.push(RawRow {
                sample_id,
                head: fields[1].to_string(),
                relation: fields[2].to_string(),
                tail: fields[3].to_string(),
            });
        }
    }
    SampleCorpus::new(raw)
}

/// One relation slot of an entity pair and the samples that produced it.
#[derive(Debug, Clone)]
pub struct RelationSlot {
    pub relation: RelationId,
    samples: Vec<u32>,
}

impl RelationSlot {
    pub fn samples(&self) -> &[u32] {
        &self.samples
    }

    pub fn sample_count(&self) -> u64 {
        self.samples.len() as u64
    }
}

/// An entity pair row: all relations observed between `head` and `tail`.
#[derive(Debug, Clone)]
pub struct PairEntry {
    pub head: EntityId,
    pub tail: EntityId,
    relations: Vec<RelationSlot>,
    union_samples: Vec<u32>,
}

impl PairEntry {
    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn relations(&self) -> &[RelationSlot] {
        &self.relations
    }

    pub fn relation(&self, slot: usize) -> &RelationSlot {
        &self.relations[slot]
    }

    /// Union of all sample sets across the pair's relations.
    pub fn union_samples(&self) -> &[u32] {
        &self.union_samples
    }

    /// Total observation count (denominator of the pair's probabilities).
    pub fn total_count(&self) -> u64 {
        self.relations.iter().map(|r| r.sample_count()).sum()
    }
}

/// Resolved reference to a triple as `(pair index, relation slot)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripleRef {
    pub pair: usize,
    pub slot: usize,
}

/// Probability matrix over `pair_count x max_relations` with zero padding on
/// rows that own fewer relations than the widest pair. Unconditional when
/// built with no conditions, otherwise conditioned on the given triples
/// (condition rows are zeroed: a pair never conditions itself).
#[derive(Debug, Clone)]
pub struct ProbabilityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    conditions: Vec<TripleRef>,
}

impl ProbabilityMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, pair: usize, slot: usize) -> f64 {
        self.values[pair * self.cols + slot]
    }

    pub fn row(&self, pair: usize) -> &[f64] {
        &self.values[pair * self.cols..(pair + 1) * self.cols]
    }

    pub fn conditions(&self) -> &[TripleRef] {
        &self.conditions
    }
}

/// The probabilistic knowledge graph.
#[derive(Debug, Clone)]
pub struct Pkg {
    entities: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relations: Vec<String>,
    relation_index: HashMap<String, RelationId>,
    pairs: Vec<PairEntry>,
    pair_index: HashMap<(EntityId, EntityId), usize>,
    sample_count: u32,
}

impl Pkg {
    /// Build the graph from a canonical corpus. Entity, relation, and pair
    /// indices are assigned in first-appearance order over the canonical row
    /// order, so the result does not depend on how the corpus was assembled.
    pub fn build(corpus: &SampleCorpus) -> Pkg {
        let mut entities = Vec::new();
        let mut entity_index: HashMap<String, EntityId> = HashMap::new();
        let mut relations = Vec::new();
        let mut relation_index: HashMap<String, RelationId> = HashMap::new();
        let mut pairs: Vec<PairEntry> = Vec::new();
        let mut pair_index: HashMap<(EntityId, EntityId), usize> = HashMap::new();

        let intern_entity = |name: &str,
                                 entities: &mut Vec<String>,
                                 index: &mut HashMap<String, EntityId>| {
            if let Some(&id) = index.get(name) {
                return id;
            }
            let id = EntityId(entities.len() as u32);
            entities.push(name.to_string());
            index.insert(name.to_string(), id);
            id
        };

        for row in corpus.rows() {
            let head = intern_entity(&row.head, &mut entities, &mut entity_index);
            let tail = intern_entity(&row.tail, &mut entities, &mut entity_index);
            let relation = if let Some(&id) = relation_index.get(&row.relation) {
                id
            } else {
                let id = RelationId(relations.len() as u32);
                relations.push(row.relation.clone());
                relation_index.insert(row.relation.clone(), id);
                id
            };
            let pair = *pair_index.entry((head, tail)).or_insert_with(|| {
                pairs.push(PairEntry {
                    head,
                    tail,
                    relations: Vec::new(),
                    union_samples: Vec::new(),
                });
                pairs.len() - 1
            });
            let entry = &mut pairs[pair];
            let slot = entry
                .relations
                .iter()
                .position(|s| s.relation == relation)
                .unwrap_or_else(|| {
                    entry.relations.push(RelationSlot {
                        relation,
                        samples: Vec::new(),
                    });
                    entry.relations.len() - 1
                });
            entry.relations[slot].samples.push(row.sample);
        }

        for entry in &mut pairs {
            let mut union = Vec::new();
            for slot in &mut entry.relations {
                slot.samples.sort_unstable();
                slot.samples.dedup();
                union.extend_from_slice(&slot.samples);
            }
            union.sort_unstable();
            union.dedup();
            entry.union_samples = union;
        }

        Pkg {
            entities,
            entity_index,
            relations,
            relation_index,
            pairs,
            pair_index,
            sample_count: corpus.sample_count(),
        }
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[PairEntry] {
        &self.pairs
    }

    pub fn pair(&self, pair: usize) -> Result<&PairEntry, PkgError> {
        self.pairs.get(pair).ok_or(PkgError::PairOutOfRange {
            pair,
            pairs: self.pairs.len(),
        })
    }

    /// Widest relation count across pairs (matrix column count).
    pub fn max_relations(&self) -> usize {
        self.pairs
            .iter()
            .map(|p| p.relation_count())
            .max()
            .unwrap_or(0)
    }

    pub fn sample_count(&self) -> u32 {
        self.sample_count
    }

    pub fn entity_label(&self, id: EntityId) -> &str {
        &self.entities[id.0 as usize]
    }

    pub fn relation_label(&self, id: RelationId) -> &str {
        &self.relations[id.0 as usize]
    }

    pub fn entity(&self, label: &str) -> Option<EntityId> {
        self.entity_index.get(label).copied()
    }

    pub fn relation(&self, label: &str) -> Option<RelationId> {
        self.relation_index.get(label).copied()
    }

    pub fn pair_of(&self, head: EntityId, tail: EntityId) -> Option<usize> {
        self.pair_index.get(&(head, tail)).copied()
    }

    /// Slot of `relation` within `pair`, if observed.
    pub fn slot_of(&self, pair: usize, relation: RelationId) -> Option<usize> {
        self.pairs
            .get(pair)?
            .relations
            .iter()
            .position(|s| s.relation == relation)
    }

    /// Resolve a triple to its `(pair, slot)` reference.
    pub fn resolve(&self, triple: &Triple) -> Option<TripleRef> {
        let pair = self.pair_of(triple.head, triple.tail)?;
        let slot = self.slot_of(pair, triple.relation)?;
        Some(TripleRef { pair, slot })
    }

    /// Triple behind a `(pair, slot)` reference.
    pub fn triple_at(&self, at: TripleRef) -> Result<Triple, PkgError> {
        let entry = self.pair(at.pair)?;
        let slot = entry
            .relations
            .get(at.slot)
            .ok_or(PkgError::SlotOutOfRange {
                pair: at.pair,
                slot: at.slot,
                slots: entry.relation_count(),
            })?;
        Ok(Triple {
            head: entry.head,
            relation: slot.relation,
            tail: entry.tail,
        })
    }

    /// Build a triple from labels if every part is known to the graph.
    pub fn triple_from_labels(&self, head: &str, relation: &str, tail: &str) -> Option<Triple> {
        let triple = Triple {
            head: self.entity(head)?,
            relation: self.relation(relation)?,
            tail: self.entity(tail)?,
        };
        self.resolve(&triple).map(|_| triple)
    }

    /// Observation counts for one pair: per-slot sample-set sizes and their
    /// total. The slot probabilities are `counts[j] / total`.
    pub fn row_counts(&self, pair: usize) -> Result<(Vec<u64>, u64), PkgError> {
        let entry = self.pair(pair)?;
        let counts: Vec<u64> = entry.relations.iter().map(|s| s.sample_count()).collect();
        let total = counts.iter().sum();
        Ok((counts, total))
    }

    /// Probability that `slot` is the relation of `pair`, with no prior
    /// knowledge: its sample count over the pair's total.
    pub fn probability(&self, pair: usize, slot: usize) -> Result<f64, PkgError> {
        let (counts, total) = self.row_counts(pair)?;
        let entry = &self.pairs[pair];
        if slot >= counts.len() {
            return Err(PkgError::SlotOutOfRange {
                pair,
                slot,
                slots: entry.relation_count(),
            });
        }
        Ok(counts[slot] as f64 / total as f64)
    }

    /// Intersection of the condition triples' sample sets.
    pub fn condition_samples(&self, conditions: &[TripleRef]) -> Result<Vec<u32>, PkgError> {
        if conditions.is_empty() {
            return Err(PkgError::NoConditions);
        }
        let first = self.slot_samples(conditions[0])?;
        let mut acc = first.to_vec();
        for cond in &conditions[1..] {
            let other = self.slot_samples(*cond)?;
            acc = intersect_sorted(&acc, other);
            if acc.is_empty() {
                break;
            }
        }
        Ok(acc)
    }

    fn slot_samples(&self, at: TripleRef) -> Result<&[u32], PkgError> {
        let entry = self.pair(at.pair)?;
        entry
            .relations
            .get(at.slot)
            .map(|s| s.samples())
            .ok_or(PkgError::SlotOutOfRange {
                pair: at.pair,
                slot: at.slot,
                slots: entry.relation_count(),
            })
    }

    /// Conditional observation counts for one pair against a pre-intersected
    /// condition sample set: per-slot `|N_j ∩ M|` and denominator
    /// `|union ∩ M|`. Probabilities are `counts[j] / denom` when the
    /// denominator is non-zero, and zero otherwise.
    pub fn conditional_row_counts(
        &self,
        pair: usize,
        condition_samples: &[u32],
    ) -> Result<(Vec<u64>, u64), PkgError> {
        let entry = self.pair(pair)?;
        let counts: Vec<u64> = entry
            .relations
            .iter()
            .map(|s| intersect_count(s.samples(), condition_samples))
            .collect();
        let denom = intersect_count(entry.union_samples(), condition_samples);
        Ok((counts, denom))
    }

    /// Probability of the target triple given that the condition triples are
    /// known to hold. Zero when the conditions never co-occur with any
    /// relation of the target pair.
    pub fn conditional_probability(
        &self,
        target: TripleRef,
        conditions: &[TripleRef],
    ) -> Result<f64, PkgError> {
        if conditions.iter().any(|c| c.pair == target.pair) {
            return Err(PkgError::TargetInConditions { pair: target.pair });
        }
        // Validates the slot before any set work.
        self.slot_samples(target)?;
        let m = self.condition_samples(conditions)?;
        let (counts, denom) = self.conditional_row_counts(target.pair, &m)?;
        if denom == 0 {
            return Ok(0.0);
        }
        Ok(counts[target.slot] as f64 / denom as f64)
    }

    /// Full probability matrix: unconditional when `conditions` is empty,
    /// else conditioned on the given triples with condition-pair rows zeroed.
    pub fn probability_matrix(
        &self,
        conditions: &[TripleRef],
    ) -> Result<ProbabilityMatrix, PkgError> {
        let rows = self.pair_count();
        let cols = self.max_relations();
        let mut values = vec![0.0; rows * cols];
        if conditions.is_empty() {
            for pair in 0..rows {
                let (counts, total) = self.row_counts(pair)?;
                for (slot, c) in counts.iter().enumerate() {
                    values[pair * cols + slot] = *c as f64 / total as f64;
                }
            }
        } else {
            for cond in conditions {
                self.slot_samples(*cond)?;
            }
            let m = self.condition_samples(conditions)?;
            for pair in 0..rows {
                if conditions.iter().any(|c| c.pair == pair) {
                    continue;
                }
                let (counts, denom) = self.conditional_row_counts(pair, &m)?;
                if denom == 0 {
                    continue;
                }
                for (slot, c) in counts.iter().enumerate() {
                    values[pair * cols + slot] = *c as f64 / denom as f64;
                }
            }
        }
        Ok(ProbabilityMatrix {
            rows,
            cols,
            values,
            conditions: conditions.to_vec(),
        })
    }
}

/// Count of elements common to two sorted, deduplicated slices.
pub(crate) fn intersect_count(a: &[u32], b: &[u32]) -> u64 {
    let (mut i, mut j, mut n) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Intersection of two sorted, deduplicated slices.
pub(crate) fn intersect_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    fn row(sample_id: u64, head: &str, relation: &str, tail: &str) -> RawRow {
        RawRow {
            sample_id,
            head: head.to_string(),
            relation: relation.to_string(),
            tail: tail.to_string(),
        }
    }

    /// Three pairs with hand-picked sample sets over samples 1..=6:
    ///   (a,b): r1 -> {1,2,3}, r2 -> {4,5}
    ///   (c,d): r3 -> {2,3,4}, r4 -> {5,6}
    ///   (e,f): r5 -> {2,3},   r6 -> {3,4}
    fn hand_corpus() -> SampleCorpus {
        let mut rows = Vec::new();
        for s in [1, 2, 3] {
            rows.push(row(s, "a", "r1", "b"));
        }
        for s in [4, 5] {
            rows.push(row(s, "a", "r2", "b"));
        }
        for s in [2, 3, 4] {
            rows.push(row(s, "c", "r3", "d"));
        }
        for s in [5, 6] {
            rows.push(row(s, "c", "r4", "d"));
        }
        for s in [2, 3] {
            rows.push(row(s, "e", "r5", "f"));
        }
        for s in [3, 4] {
            rows.push(row(s, "e", "r6", "f"));
        }
        SampleCorpus::new(rows).unwrap()
    }

    fn tref(pkg: &Pkg, head: &str, relation: &str, tail: &str) -> TripleRef {
        let triple = pkg.triple_from_labels(head, relation, tail).unwrap();
        pkg.resolve(&triple).unwrap()
    }

    #[test]
    fn sample_sets_survive_ingestion() {
        // A relation observed in samples {1, 4, 7, 23} keeps exactly that
        // set when every id in 1..=23 exists in the corpus.
        let mut rows = Vec::new();
        for s in 1..=23u64 {
            rows.push(row(s, "x", "filler", "y"));
        }
        for s in [1, 4, 7, 23] {
            rows.push(row(s, "p", "owns", "q"));
        }
        let corpus = SampleCorpus::new(rows).unwrap();
        let pkg = Pkg::build(&corpus);
        let at = tref(&pkg, "p", "owns", "q");
        let entry = pkg.pair(at.pair).unwrap();
        assert_eq!(entry.relation(at.slot).samples(), &[1, 4, 7, 23]);
        assert_eq!(pkg.sample_count(), 23);
    }

    #[test]
    fn sample_ids_remap_to_contiguous_range() {
        let rows = vec![
            row(100, "a", "r", "b"),
            row(7, "a", "r", "b"),
            row(829, "c", "r", "d"),
        ];
        let corpus = SampleCorpus::new(rows).unwrap();
        assert_eq!(corpus.sample_count(), 3);
        assert_eq!(corpus.original_sample_id(1), Some(7));
        assert_eq!(corpus.original_sample_id(2), Some(100));
        assert_eq!(corpus.original_sample_id(3), Some(829));
        let samples: Vec<u32> = corpus.rows().iter().map(|r| r.sample).collect();
        assert!(samples.iter().all(|&s| (1..=3).contains(&s)));
    }

    #[test]
    fn probability_is_count_over_row_total() {
        let pkg = Pkg::build(&hand_corpus());
        let r1 = tref(&pkg, "a", "r1", "b");
        let r2 = tref(&pkg, "a", "r2", "b");
        assert_eq!(r1.pair, r2.pair);
        assert!((pkg.probability(r1.pair, r1.slot).unwrap() - 0.6).abs() < 1e-15);
        assert!((pkg.probability(r2.pair, r2.slot).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn conditional_probability_hand_values() {
        let pkg = Pkg::build(&hand_corpus());
        let r1 = tref(&pkg, "a", "r1", "b");
        let r2 = tref(&pkg, "a", "r2", "b");
        let r3 = tref(&pkg, "c", "r3", "d");
        let r4 = tref(&pkg, "c", "r4", "d");
        let r5 = tref(&pkg, "e", "r5", "f");
        let r6 = tref(&pkg, "e", "r6", "f");

        // M = {1,2,3}: r3 hits {2,3}, the (c,d) union hits {2,3} -> 1.0.
        assert_eq!(pkg.conditional_probability(r3, &[r1]).unwrap(), 1.0);
        // r4 = {5,6} misses M entirely -> 0.
        assert_eq!(pkg.conditional_probability(r4, &[r1]).unwrap(), 0.0);
        // M = {4,5}: r3 hits {4}, union hits {4,5} -> 0.5.
        assert_eq!(pkg.conditional_probability(r3, &[r2]).unwrap(), 0.5);
        // Two conditions: M = {1,2,3} ∩ {2,3,4} = {2,3}.
        assert_eq!(pkg.conditional_probability(r5, &[r1, r3]).unwrap(), 1.0);
        assert_eq!(pkg.conditional_probability(r6, &[r1, r3]).unwrap(), 0.5);
        // Conditions that never co-occur: {1,2,3} ∩ {5,6} = ∅ -> 0.
        assert_eq!(pkg.conditional_probability(r5, &[r1, r4]).unwrap(), 0.0);
    }

    #[test]
    fn conditional_rejects_target_among_conditions() {
        let pkg = Pkg::build(&hand_corpus());
        let r1 = tref(&pkg, "a", "r1", "b");
        let r2 = tref(&pkg, "a", "r2", "b");
        let err = pkg.conditional_probability(r2, &[r1]).unwrap_err();
        assert_eq!(err, PkgError::TargetInConditions { pair: r1.pair });
        assert_eq!(
            pkg.conditional_probability(r1, &[]).unwrap_err(),
            PkgError::NoConditions
        );
    }

    #[test]
    fn unconditional_matrix_rows_are_stochastic_and_padded() {
        let pkg = Pkg::build(&hand_corpus());
        let m = pkg.probability_matrix(&[]).unwrap();
        assert_eq!(m.rows(), pkg.pair_count());
        assert_eq!(m.cols(), pkg.max_relations());
        for pair in 0..m.rows() {
            let j = pkg.pair(pair).unwrap().relation_count();
            let sum: f64 = m.row(pair)[..j].iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "row {pair} sums to {sum}");
            for &v in &m.row(pair)[j..] {
                assert_eq!(v, 0.0);
            }
            assert!(m.row(pair).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn conditional_matrix_matches_cell_wise_queries() {
        let pkg = Pkg::build(&hand_corpus());
        let r1 = tref(&pkg, "a", "r1", "b");
        let m = pkg.probability_matrix(&[r1]).unwrap();
        for pair in 0..m.rows() {
            for slot in 0..pkg.pair(pair).unwrap().relation_count() {
                let expect = if pair == r1.pair {
                    0.0
                } else {
                    pkg.conditional_probability(TripleRef { pair, slot }, &[r1])
                        .unwrap()
                };
                assert_eq!(m.get(pair, slot), expect);
            }
        }
    }

    #[test]
    fn build_matches_hash_count_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut rows = Vec::new();
            let mut oracle: HashMap<(String, String, String), HashSet<u64>> = HashMap::new();
            let pairs = rng.gen_range(1..8usize);
            for p in 0..pairs {
                let rels = rng.gen_range(1..4usize);
                for r in 0..rels {
                    let n = rng.gen_range(1..6usize);
                    for _ in 0..n {
                        let s = rng.gen_range(1..30u64);
                        let (h, rel, t) =
                            (format!("h{p}"), format!("r{r}"), format!("t{p}"));
                        oracle
                            .entry((h.clone(), rel.clone(), t.clone()))
                            .or_default()
                            .insert(s);
                        rows.push(row(s, &h, &rel, &t));
                    }
                }
            }
            let corpus = SampleCorpus::new(rows).unwrap();
            let pkg = Pkg::build(&corpus);
            for ((h, rel, t), samples) in &oracle {
                let at = tref(&pkg, h, rel, t);
                let entry = pkg.pair(at.pair).unwrap();
                assert_eq!(
                    entry.relation(at.slot).sample_count(),
                    samples.len() as u64
                );
            }
            let total: u64 = pkg.pairs().iter().map(|p| p.total_count()).sum();
            let oracle_total: u64 = oracle.values().map(|s| s.len() as u64).sum();
            assert_eq!(total, oracle_total);
        }
    }

    #[test]
    fn build_is_insensitive_to_row_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = hand_corpus();
        let pkg = Pkg::build(&base);
        let matrix = pkg.probability_matrix(&[]).unwrap();
        let mut raw: Vec<RawRow> = base
            .rows()
            .iter()
            .map(|r| RawRow {
                sample_id: r.sample as u64,
                head: r.head.clone(),
                relation: r.relation.clone(),
                tail: r.tail.clone(),
            })
            .collect();
        for _ in 0..5 {
            raw.shuffle(&mut rng);
            let shuffled = SampleCorpus::new(raw.clone()).unwrap();
            let other = Pkg::build(&shuffled);
            assert_eq!(other.pair_count(), pkg.pair_count());
            let m2 = other.probability_matrix(&[]).unwrap();
            assert_eq!(matrix.values, m2.values);
            for (a, b) in pkg.pairs().iter().zip(other.pairs().iter()) {
                assert_eq!((a.head, a.tail), (b.head, b.tail));
            }
        }
    }

    #[test]
    fn adding_rows_for_a_relation_never_lowers_its_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..50 {
            let mut rows = vec![
                row(1, "a", "r1", "b"),
                row(2, "a", "r1", "b"),
                row(3, "a", "r2", "b"),
            ];
            for s in 4..rng.gen_range(5..20u64) {
                let rel = if rng.gen_bool(0.5) { "r1" } else { "r2" };
                rows.push(row(s, "a", rel, "b"));
            }
            let corpus = SampleCorpus::new(rows.clone()).unwrap();
            let pkg = Pkg::build(&corpus);
            let at = tref(&pkg, "a", "r1", "b");
            let before = pkg.probability(at.pair, at.slot).unwrap();

            rows.push(row(999, "a", "r1", "b"));
            let corpus2 = SampleCorpus::new(rows).unwrap();
            let pkg2 = Pkg::build(&corpus2);
            let at2 = tref(&pkg2, "a", "r1", "b");
            let after = pkg2.probability(at2.pair, at2.slot).unwrap();
            assert!(after >= before - 1e-15, "{after} < {before}");
        }
    }

    #[test]
    fn full_range_condition_reduces_to_unconditional_when_sets_are_disjoint() {
        // Pair (x, y) covers every sample, so conditioning on it leaves any
        // pair with per-relation disjoint sample sets at its base values.
        let mut rows = Vec::new();
        for s in 1..=10u64 {
            rows.push(row(s, "x", "all", "y"));
        }
        for s in [1, 2, 3] {
            rows.push(row(s, "a", "r1", "b"));
        }
        for s in [4, 5] {
            rows.push(row(s, "a", "r2", "b"));
        }
        let corpus = SampleCorpus::new(rows).unwrap();
        let pkg = Pkg::build(&corpus);
        let all = tref(&pkg, "x", "all", "y");
        let r1 = tref(&pkg, "a", "r1", "b");
        let r2 = tref(&pkg, "a", "r2", "b");
        let u1 = pkg.probability(r1.pair, r1.slot).unwrap();
        let c1 = pkg.conditional_probability(r1, &[all]).unwrap();
        assert!((u1 - c1).abs() < 1e-15);
        let u2 = pkg.probability(r2.pair, r2.slot).unwrap();
        let c2 = pkg.conditional_probability(r2, &[all]).unwrap();
        assert!((u2 - c2).abs() < 1e-15);
    }

    #[test]
    fn parses_tsv_and_json_lines_identically() {
        let tsv = "1\ta\tr1\tb\n2\ta\tr1\tb\n3\tc\tr2\td\n";
        let json = concat!(
            "{\"sample_id\":1,\"head\":\"a\",\"relation\":\"r1\",\"tail\":\"b\"}\n",
            "{\"sample_id\":2,\"head\":\"a\",\"relation\":\"r1\",\"tail\":\"b\"}\n",
            "{\"sample_id\":3,\"head\":\"c\",\"relation\":\"r2\",\"tail\":\"d\"}\n",
        );
        let a = parse_corpus(tsv).unwrap();
        let b = parse_corpus(json).unwrap();
        assert_eq!(a.rows(), b.rows());
        assert_eq!(a.sample_count(), 3);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "1\ta\tr1\tb\nnot-a-number\tx\ty\tz\n";
        match parse_corpus(bad) {
            Err(PkgError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let short = "1\ta\tr1\n";
        match parse_corpus(short) {
            Err(PkgError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_corpus("\n\n") {
            Err(PkgError::EmptyCorpus) => {}
            other => panic!("expected empty-corpus error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_rows_collapse() {
        let rows = vec![
            row(1, "a", "r", "b"),
            row(1, "a", "r", "b"),
            row(2, "a", "r", "b"),
        ];
        let corpus = SampleCorpus::new(rows).unwrap();
        let pkg = Pkg::build(&corpus);
        let at = tref(&pkg, "a", "r", "b");
        assert_eq!(pkg.pair(at.pair).unwrap().relation(at.slot).sample_count(), 2);
    }
}
