//! In-memory corpus representation: event sequences, the name↔index maps,
//! and optional per-type feature matrix.
//!
//! Event types are dense integer indices internally; names live only in the
//! bijective maps. Timestamps are 64-bit floats in user-supplied units and
//! are never converted. A `Database` is immutable after construction: every
//! operation that "modifies" a corpus returns a new value.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// One event sequence: event times with their type indices, the observation
/// window, and optional per-sequence feature vector and label.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    /// Event timestamps, non-decreasing, inside `[t_start, t_stop]`.
    pub times: Vec<f64>,
    /// Event type indices, same length as `times`, each in `[0, C)`.
    pub events: Vec<usize>,
    /// Optional sequence feature vector of dimension `D_s`.
    pub seq_feature: Option<Vec<f64>>,
    /// Observation window start.
    pub t_start: f64,
    /// Observation window end.
    pub t_stop: f64,
    /// Optional label; stored and round-tripped, consumed by no loss.
    pub label: Option<Label>,
}

/// Sequence label. The schema carries it; nothing in the learner reads it.
#[derive(Debug, Clone, PartialEq)]
pub enum Label {
    Int(i64),
    Float(f64),
}

impl EventSequence {
    /// Sequence with no events over the given window. A zero-event sequence
    /// is legal: it contributes only compensator mass in full-sequence
    /// likelihood evaluation.
    pub fn empty(t_start: f64, t_stop: f64) -> Self {
        EventSequence {
            times: Vec::new(),
            events: Vec::new(),
            seq_feature: None,
            t_start,
            t_stop,
            label: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A corpus of event sequences plus the type/sequence name↔index maps and an
/// optional event-feature matrix (one column per type).
#[derive(Debug, Clone, Default)]
pub struct Database {
    /// Number of event types `C`.
    pub num_types: usize,
    /// Event type name → index.
    pub type2idx: HashMap<String, usize>,
    /// Event type index → name.
    pub idx2type: Vec<String>,
    /// Sequence name → index.
    pub seq2idx: HashMap<String, usize>,
    /// Sequence index → name.
    pub idx2seq: Vec<String>,
    /// The sequences, ordered by index.
    pub sequences: Vec<EventSequence>,
    /// Optional event-feature matrix of shape `D_e × C`.
    pub event_features: Option<FeatureMatrix>,
}

/// Column-major feature matrix: `dim` rows, one column per event type.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub dim: usize,
    pub num_cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(dim: usize, num_cols: usize) -> Self {
        FeatureMatrix {
            dim,
            num_cols,
            data: vec![0.0; dim * num_cols],
        }
    }

    pub fn col(&self, c: usize) -> &[f64] {
        &self.data[c * self.dim..(c + 1) * self.dim]
    }

    pub fn col_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.dim..(c + 1) * self.dim]
    }
}

impl Database {
    /// Empty corpus with a fixed type vocabulary. Valid by construction.
    pub fn with_types(names: &[&str]) -> Self {
        let idx2type: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let type2idx = idx2type
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Database {
            num_types: names.len(),
            type2idx,
            idx2type,
            ..Default::default()
        }
    }

    /// Append a sequence under the given name, assigning the next index.
    pub fn push_sequence(&mut self, name: &str, seq: EventSequence) {
        let idx = self.sequences.len();
        self.seq2idx.insert(name.to_string(), idx);
        self.idx2seq.push(name.to_string());
        self.sequences.push(seq);
    }

    /// Total number of events across all sequences.
    pub fn total_events(&self) -> usize {
        self.sequences.iter().map(|s| s.len()).sum()
    }

    /// Dimension of sequence features, if every sequence carries one of the
    /// same width.
    pub fn seq_feature_dim(&self) -> Option<usize> {
        let mut dim = None;
        for s in &self.sequences {
            match (&s.seq_feature, dim) {
                (Some(f), None) => dim = Some(f.len()),
                (Some(f), Some(d)) if f.len() == d => {}
                _ => return None,
            }
        }
        dim
    }

    /// A new corpus holding only the selected sequences (indices into this
    /// corpus, in the given order). Names and features follow.
    pub fn subset(&self, indices: &[usize]) -> Database {
        let mut out = Database {
            num_types: self.num_types,
            type2idx: self.type2idx.clone(),
            idx2type: self.idx2type.clone(),
            event_features: self.event_features.clone(),
            ..Default::default()
        };
        for &i in indices {
            out.push_sequence(&self.idx2seq[i].clone(), self.sequences[i].clone());
        }
        out
    }
}

/// Check every corpus invariant, returning one description per violation.
/// An empty list means the corpus is valid. Diagnostic only: never fails.
pub fn validate_database(db: &Database) -> Vec<String> {
    let mut violations = Vec::new();

    if db.idx2type.len() != db.num_types {
        violations.push(format!(
            "idx2type has {} entries but num_types is {}",
            db.idx2type.len(),
            db.num_types
        ));
    }
    if db.type2idx.len() != db.num_types {
        violations.push(format!(
            "type2idx has {} entries but num_types is {}",
            db.type2idx.len(),
            db.num_types
        ));
    }
    for (name, &idx) in &db.type2idx {
        if db.idx2type.get(idx).map(String::as_str) != Some(name.as_str()) {
            violations.push(format!("type maps disagree on '{name}' ↔ {idx}"));
        }
    }
    if db.idx2seq.len() != db.sequences.len() {
        violations.push(format!(
            "idx2seq has {} entries but there are {} sequences",
            db.idx2seq.len(),
            db.sequences.len()
        ));
    }
    if db.seq2idx.len() != db.sequences.len() {
        violations.push(format!(
            "seq2idx has {} entries but there are {} sequences",
            db.seq2idx.len(),
            db.sequences.len()
        ));
    }
    for (name, &idx) in &db.seq2idx {
        if db.idx2seq.get(idx).map(String::as_str) != Some(name.as_str()) {
            violations.push(format!("sequence maps disagree on '{name}' ↔ {idx}"));
        }
    }

    for (i, seq) in db.sequences.iter().enumerate() {
        if seq.times.len() != seq.events.len() {
            violations.push(format!(
                "sequence {i}: times has {} entries, events has {}",
                seq.times.len(),
                seq.events.len()
            ));
        }
        if seq
            .times
            .windows(2)
            .any(|w| w[1] < w[0])
        {
            violations.push(format!("sequence {i}: times not non-decreasing"));
        }
        for (j, &t) in seq.times.iter().enumerate() {
            if t < seq.t_start || t > seq.t_stop {
                violations.push(format!(
                    "sequence {i}: time {t} at position {j} outside window [{}, {}]",
                    seq.t_start, seq.t_stop
                ));
                break;
            }
        }
        if let Some(&bad) = seq.events.iter().find(|&&e| e >= db.num_types) {
            violations.push(format!(
                "sequence {i}: event type {bad} out of range for {} types",
                db.num_types
            ));
        }
    }

    if let Some(feat) = &db.event_features {
        if feat.num_cols != db.num_types {
            violations.push(format!(
                "event_features has {} columns but there are {} types",
                feat.num_cols, db.num_types
            ));
        }
        if feat.data.len() != feat.dim * feat.num_cols {
            violations.push(format!(
                "event_features data length {} does not match {}×{}",
                feat.data.len(),
                feat.dim,
                feat.num_cols
            ));
        }
    }

    violations
}

/// Keep only the given event types, dropping other events and densely
/// remapping indices. Surviving events keep their relative order and their
/// absolute timestamps.
pub fn relabel_types(db: &Database, keep: &[usize]) -> Result<Database> {
    if keep.is_empty() {
        return Err(Error::NoTypesRetained);
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&t| t >= db.num_types) {
        return Err(Error::TypeOutOfRange(bad, db.num_types));
    }

    let mut old2new = vec![usize::MAX; db.num_types];
    for (new, &old) in kept.iter().enumerate() {
        old2new[old] = new;
    }

    let idx2type: Vec<String> = kept.iter().map(|&t| db.idx2type[t].clone()).collect();
    let type2idx = idx2type
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();

    let event_features = db.event_features.as_ref().map(|m| {
        let mut out = FeatureMatrix::zeros(m.dim, kept.len());
        for (new, &old) in kept.iter().enumerate() {
            out.col_mut(new).copy_from_slice(m.col(old));
        }
        out
    });

    let sequences = db
        .sequences
        .iter()
        .map(|seq| {
            let mut times = Vec::new();
            let mut events = Vec::new();
            for (&t, &e) in seq.times.iter().zip(&seq.events) {
                if old2new[e] != usize::MAX {
                    times.push(t);
                    events.push(old2new[e]);
                }
            }
            EventSequence {
                times,
                events,
                seq_feature: seq.seq_feature.clone(),
                t_start: seq.t_start,
                t_stop: seq.t_stop,
                label: seq.label.clone(),
            }
        })
        .collect();

    Ok(Database {
        num_types: kept.len(),
        type2idx,
        idx2type,
        seq2idx: db.seq2idx.clone(),
        idx2seq: db.idx2seq.clone(),
        sequences,
        event_features,
    })
}
