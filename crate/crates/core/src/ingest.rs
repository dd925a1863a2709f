//! CSV loaders: event sequences, sequence features, event features.
//!
//! Files are UTF-8, comma-delimited, quoted per RFC-4180, with a mandatory
//! header row. Loading is deterministic: the same file bytes and spec
//! produce a bit-identical corpus. Type and sequence indices are assigned
//! by first appearance in the file.

use std::collections::HashMap;
use std::path::Path;

use crate::data::{Database, EventSequence, FeatureMatrix};
use crate::error::{Error, Result};

/// Names of the three mandatory columns of a sequence file, plus optional
/// observation-window override columns. When the overrides are absent,
/// `t_start`/`t_stop` default to each sequence's min/max event time.
#[derive(Debug, Clone)]
pub struct ColumnMapping {
    pub seq_id: String,
    pub time: String,
    pub event: String,
    pub t_start: Option<String>,
    pub t_stop: Option<String>,
}

impl ColumnMapping {
    pub fn new(seq_id: &str, time: &str, event: &str) -> Self {
        ColumnMapping {
            seq_id: seq_id.to_string(),
            time: time.to_string(),
            event: event.to_string(),
            t_start: None,
            t_stop: None,
        }
    }

    fn check(&self) -> Result<()> {
        let names = [&self.seq_id, &self.time, &self.event];
        if names.iter().any(|n| n.is_empty()) {
            return Err(Error::InvalidConfig("column names must be nonempty".into()));
        }
        if names[0] == names[1] || names[0] == names[2] || names[1] == names[2] {
            return Err(Error::InvalidConfig("column names must be distinct".into()));
        }
        Ok(())
    }
}

/// Kind of a feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Encoded as a multi-hot vector over the column's global value set,
    /// accumulated across all rows of the same sequence/type.
    Categorical,
    /// Encoded as the mean of the cell values for the sequence/type.
    Numerical,
}

/// Normalization applied per encoded dimension, over the whole corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalize {
    /// Leave the encoded vectors unscaled.
    #[default]
    None,
    /// Scale each dimension to `[0, 1]`.
    MinMax,
    /// Standardize each dimension to zero mean, unit variance.
    ZScore,
}

/// Which columns to encode as features and how to normalize the result.
/// Column order in `columns` is the encoding order.
#[derive(Debug, Clone)]
pub struct FeatureDomainSpec {
    pub columns: Vec<(String, FeatureKind)>,
    pub normalize: Normalize,
}

impl FeatureDomainSpec {
    pub fn new(columns: Vec<(String, FeatureKind)>, normalize: Normalize) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidConfig(
                "feature spec needs at least one column".into(),
            ));
        }
        for i in 0..columns.len() {
            for j in i + 1..columns.len() {
                if columns[i].0 == columns[j].0 {
                    return Err(Error::InvalidConfig(format!(
                        "duplicate feature column '{}'",
                        columns[i].0
                    )));
                }
            }
        }
        Ok(FeatureDomainSpec { columns, normalize })
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?)
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Load event sequences from a CSV file into a fresh corpus.
///
/// One `EventSequence` per distinct `seq_id` value; events within a sequence
/// are ordered by time with a stable sort, so ties keep file order. Type and
/// sequence indices follow first appearance.
pub fn load_sequences_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Database> {
    mapping.check()?;
    let mut rdr = reader(path.as_ref())?;
    let headers = rdr.headers()?.clone();
    let seq_col = column_index(&headers, &mapping.seq_id)?;
    let time_col = column_index(&headers, &mapping.time)?;
    let event_col = column_index(&headers, &mapping.event)?;
    let start_col = mapping
        .t_start
        .as_deref()
        .map(|n| column_index(&headers, n))
        .transpose()?;
    let stop_col = mapping
        .t_stop
        .as_deref()
        .map(|n| column_index(&headers, n))
        .transpose()?;

    let mut db = Database::default();
    // per sequence, in file order
    type RawSeq = (Vec<f64>, Vec<usize>, Option<(f64, f64)>); // times, events, window override
    let mut raw: Vec<RawSeq> = Vec::new();

    for (row_idx, record) in rdr.records().enumerate() {
        let row = row_idx + 1; // 1-based data row
        let record = record?;
        let time: f64 = record[time_col].trim().parse().map_err(|_| Error::BadTimeCell {
            row,
            value: record[time_col].to_string(),
        })?;
        let seq_name = record[seq_col].to_string();
        let event_name = record[event_col].to_string();

        let type_idx = match db.type2idx.get(&event_name) {
            Some(&i) => i,
            None => {
                let i = db.idx2type.len();
                db.type2idx.insert(event_name.clone(), i);
                db.idx2type.push(event_name);
                i
            }
        };
        let seq_idx = match db.seq2idx.get(&seq_name) {
            Some(&i) => i,
            None => {
                let i = db.idx2seq.len();
                db.seq2idx.insert(seq_name.clone(), i);
                db.idx2seq.push(seq_name.clone());
                raw.push((Vec::new(), Vec::new(), None));
                i
            }
        };

        if raw[seq_idx].2.is_none() {
            if let (Some(sc), Some(ec)) = (start_col, stop_col) {
                let t0: f64 = record[sc].trim().parse().map_err(|_| Error::BadTimeCell {
                    row,
                    value: record[sc].to_string(),
                })?;
                let t1: f64 = record[ec].trim().parse().map_err(|_| Error::BadTimeCell {
                    row,
                    value: record[ec].to_string(),
                })?;
                raw[seq_idx].2 = Some((t0, t1));
            }
        }

        raw[seq_idx].0.push(time);
        raw[seq_idx].1.push(type_idx);
    }

    if raw.iter().all(|(t, _, _)| t.is_empty()) {
        return Err(Error::NoEvents);
    }

    db.num_types = db.idx2type.len();
    for (seq_idx, (times, events, window)) in raw.into_iter().enumerate() {
        // stable sort by time; ties keep file order
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let sorted_times: Vec<f64> = order.iter().map(|&i| times[i]).collect();
        let sorted_events: Vec<usize> = order.iter().map(|&i| events[i]).collect();

        let t_min = sorted_times.first().copied().unwrap_or(0.0);
        let t_max = sorted_times.last().copied().unwrap_or(0.0);
        let (t_start, t_stop) = match window {
            Some((t0, t1)) => {
                if t0 > t_min || t1 < t_max || t0 > t1 {
                    return Err(Error::BadWindowOverride {
                        row: 0,
                        name: db.idx2seq[seq_idx].clone(),
                    });
                }
                (t0, t1)
            }
            None => (t_min, t_max),
        };
        db.sequences.push(EventSequence {
            times: sorted_times,
            events: sorted_events,
            seq_feature: None,
            t_start,
            t_stop,
            label: None,
        });
    }

    Ok(db)
}

/// Raw accumulation of one entity's feature columns before encoding.
struct Accumulator {
    /// Per categorical column: set of value indices seen (into the global
    /// value list of that column).
    cat_seen: Vec<Vec<bool>>,
    /// Per numerical column: running sum and count.
    num_sum: Vec<f64>,
    num_count: Vec<usize>,
}

struct FeatureBuild<'a> {
    spec: &'a FeatureDomainSpec,
    col_indices: Vec<usize>,
    /// Global value list per categorical column (first-appearance order);
    /// empty vec for numerical columns.
    value_lists: Vec<Vec<String>>,
    value_maps: Vec<HashMap<String, usize>>,
}

impl<'a> FeatureBuild<'a> {
    fn new(spec: &'a FeatureDomainSpec, headers: &csv::StringRecord) -> Result<Self> {
        let mut col_indices = Vec::new();
        for (name, _) in &spec.columns {
            col_indices.push(column_index(headers, name)?);
        }
        Ok(FeatureBuild {
            spec,
            col_indices,
            value_lists: vec![Vec::new(); spec.columns.len()],
            value_maps: vec![HashMap::new(); spec.columns.len()],
        })
    }

    fn observe(
        &mut self,
        acc: &mut [Accumulator],
        entity: usize,
        record: &csv::StringRecord,
        row: usize,
    ) -> Result<()> {
        for (k, ((name, kind), &col)) in self
            .spec
            .columns
            .iter()
            .zip(&self.col_indices)
            .enumerate()
        {
            let cell = record[col].trim();
            match kind {
                FeatureKind::Categorical => {
                    let vid = match self.value_maps[k].get(cell) {
                        Some(&v) => v,
                        None => {
                            let v = self.value_lists[k].len();
                            self.value_maps[k].insert(cell.to_string(), v);
                            self.value_lists[k].push(cell.to_string());
                            v
                        }
                    };
                    let seen = &mut acc[entity].cat_seen[k];
                    if seen.len() <= vid {
                        seen.resize(vid + 1, false);
                    }
                    seen[vid] = true;
                }
                FeatureKind::Numerical => {
                    let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                        row,
                        column: name.clone(),
                        value: cell.to_string(),
                    })?;
                    acc[entity].num_sum[k] += v;
                    acc[entity].num_count[k] += 1;
                }
            }
        }
        Ok(())
    }

    /// Encode every entity into a fixed-width vector: multi-hot blocks for
    /// categorical columns, means for numerical ones. Entities never seen in
    /// the file encode to zeros.
    fn encode(&self, acc: &[Accumulator]) -> Vec<Vec<f64>> {
        let widths: Vec<usize> = self
            .spec
            .columns
            .iter()
            .enumerate()
            .map(|(k, (_, kind))| match kind {
                FeatureKind::Categorical => self.value_lists[k].len(),
                FeatureKind::Numerical => 1,
            })
            .collect();
        let total: usize = widths.iter().sum();
        acc.iter()
            .map(|a| {
                let mut v = Vec::with_capacity(total);
                for (k, (_, kind)) in self.spec.columns.iter().enumerate() {
                    match kind {
                        FeatureKind::Categorical => {
                            for vid in 0..widths[k] {
                                let hit = a.cat_seen[k].get(vid).copied().unwrap_or(false);
                                v.push(if hit { 1.0 } else { 0.0 });
                            }
                        }
                        FeatureKind::Numerical => {
                            let mean = if a.num_count[k] > 0 {
                                a.num_sum[k] / a.num_count[k] as f64
                            } else {
                                0.0
                            };
                            v.push(mean);
                        }
                    }
                }
                v
            })
            .collect()
    }
}

fn new_accumulators(n: usize, n_cols: usize) -> Vec<Accumulator> {
    (0..n)
        .map(|_| Accumulator {
            cat_seen: vec![Vec::new(); n_cols],
            num_sum: vec![0.0; n_cols],
            num_count: vec![0; n_cols],
        })
        .collect()
}

/// Apply the chosen normalization in place, per dimension over all vectors.
fn normalize_vectors(vectors: &mut [Vec<f64>], normalize: Normalize) {
    if vectors.is_empty() {
        return;
    }
    let dim = vectors[0].len();
    match normalize {
        Normalize::None => {}
        Normalize::MinMax => {
            for d in 0..dim {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for v in vectors.iter() {
                    lo = lo.min(v[d]);
                    hi = hi.max(v[d]);
                }
                let span = hi - lo;
                for v in vectors.iter_mut() {
                    v[d] = if span > 0.0 { (v[d] - lo) / span } else { 0.0 };
                }
            }
        }
        Normalize::ZScore => {
            let n = vectors.len() as f64;
            for d in 0..dim {
                let mean = vectors.iter().map(|v| v[d]).sum::<f64>() / n;
                let var = vectors.iter().map(|v| (v[d] - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                for v in vectors.iter_mut() {
                    v[d] = if std > 0.0 { (v[d] - mean) / std } else { 0.0 };
                }
            }
        }
    }
}

/// Load per-sequence features from a CSV file, returning a new corpus with
/// every sequence carrying a `seq_feature` of identical width.
///
/// Rows are keyed by the `seq_domain` column, resolved through `seq2idx`.
/// A sequence appearing in many rows accumulates all its categorical values.
pub fn load_seq_features_csv(
    path: impl AsRef<Path>,
    seq_domain: &str,
    spec: &FeatureDomainSpec,
    db: &Database,
) -> Result<Database> {
    let mut rdr = reader(path.as_ref())?;
    let headers = rdr.headers()?.clone();
    let key_col = column_index(&headers, seq_domain)?;
    let mut build = FeatureBuild::new(spec, &headers)?;
    let mut acc = new_accumulators(db.sequences.len(), spec.columns.len());

    for (row_idx, record) in rdr.records().enumerate() {
        let row = row_idx + 1;
        let record = record?;
        let name = record[key_col].to_string();
        let &seq_idx = db
            .seq2idx
            .get(&name)
            .ok_or(Error::UnknownSequence { row, name })?;
        build.observe(&mut acc, seq_idx, &record, row)?;
    }

    let mut vectors = build.encode(&acc);
    normalize_vectors(&mut vectors, spec.normalize);

    let mut out = db.clone();
    for (seq, v) in out.sequences.iter_mut().zip(vectors) {
        seq.seq_feature = Some(v);
    }
    Ok(out)
}

/// Load per-type features from a CSV file, returning a new corpus with an
/// `event_features` matrix of shape `D_e × C` (column `c` = encoded feature
/// of type `c`). Requires the type vocabulary to exist already.
pub fn load_event_features_csv(
    path: impl AsRef<Path>,
    event_domain: &str,
    spec: &FeatureDomainSpec,
    db: &Database,
) -> Result<Database> {
    if db.num_types == 0 {
        return Err(Error::NoEventTypes);
    }
    let mut rdr = reader(path.as_ref())?;
    let headers = rdr.headers()?.clone();
    let key_col = column_index(&headers, event_domain)?;
    let mut build = FeatureBuild::new(spec, &headers)?;
    let mut acc = new_accumulators(db.num_types, spec.columns.len());

    for (row_idx, record) in rdr.records().enumerate() {
        let row = row_idx + 1;
        let record = record?;
        let name = record[key_col].to_string();
        let &type_idx = db
            .type2idx
            .get(&name)
            .ok_or(Error::UnknownEventType { row, name })?;
        build.observe(&mut acc, type_idx, &record, row)?;
    }

    let mut vectors = build.encode(&acc);
    normalize_vectors(&mut vectors, spec.normalize);

    let dim = vectors[0].len();
    let mut matrix = FeatureMatrix::zeros(dim, db.num_types);
    for (c, v) in vectors.iter().enumerate() {
        matrix.col_mut(c).copy_from_slice(v);
    }

    let mut out = db.clone();
    out.event_features = Some(matrix);
    Ok(out)
}
