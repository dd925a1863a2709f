//! Corpus preprocessing: stitching two corpora end-to-start, superposing
//! them on a shared timeline, aggregating sequences into bin-count matrices,
//! and sampling history-window training batches.
//!
//! All operations are pure: inputs are never modified.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Database, EventSequence};
use crate::error::{Error, Result};

/// How a partner sequence is selected when stitching or superposing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityMethod {
    /// Uniform over the second corpus.
    Random,
    /// Weighted by the product of a temporal Gaussian kernel on the window
    /// gap and a Gaussian kernel on sequence-feature distance.
    Feature,
}

/// Bandwidth for one of the two Gaussian kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Half the median pairwise distance, floored at 1e−6.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct SimilarityConfig {
    pub method: SimilarityMethod,
    pub time_bandwidth: Bandwidth,
    pub feature_bandwidth: Bandwidth,
    pub rng_seed: u64,
}

impl SimilarityConfig {
    pub fn random(rng_seed: u64) -> Self {
        SimilarityConfig {
            method: SimilarityMethod::Random,
            time_bandwidth: Bandwidth::Auto,
            feature_bandwidth: Bandwidth::Auto,
            rng_seed,
        }
    }

    pub fn feature(rng_seed: u64) -> Self {
        SimilarityConfig {
            method: SimilarityMethod::Feature,
            ..SimilarityConfig::random(rng_seed)
        }
    }

    fn check(&self) -> Result<()> {
        for (name, bw) in [
            ("time_bandwidth", self.time_bandwidth),
            ("feature_bandwidth", self.feature_bandwidth),
        ] {
            if let Bandwidth::Fixed(h) = bw {
                if h <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "{name} must be positive, got {h}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One target event with its bounded history window. Histories are
/// left-padded to length `memory_size` with the reserved null type index C
/// and time `t_start`, so models must treat type C as "no event".
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub target_type: usize,
    pub target_time: f64,
    /// Time of the immediately preceding event, or `t_start` for the first
    /// event of a sequence; the integration lower bound.
    pub prev_time: f64,
    pub history_types: Vec<usize>,
    pub history_times: Vec<f64>,
    pub seq_index: usize,
    pub seq_feature: Option<Vec<f64>>,
}

fn vocab_matches(db1: &Database, db2: &Database) -> bool {
    db1.num_types == db2.num_types && db1.idx2type == db2.idx2type
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn feature_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn require_features(db: &Database, which: &str) -> Result<()> {
    if db.sequences.iter().any(|s| s.seq_feature.is_none()) {
        return Err(Error::MissingFeatures(format!(
            "feature-based selection needs seq_feature on every sequence of {which}"
        )));
    }
    Ok(())
}

/// Similarity sim(a, b) between a leader `a` (of db1) and every candidate
/// follower in db2, along with the resolved bandwidths.
fn similarities(db1: &Database, db2: &Database, cfg: &SimilarityConfig) -> Result<Vec<Vec<f64>>> {
    require_features(db1, "the first corpus")?;
    require_features(db2, "the second corpus")?;

    let gaps: Vec<f64> = db1
        .sequences
        .iter()
        .flat_map(|a| {
            db2.sequences
                .iter()
                .map(move |b| (b.t_start - a.t_stop).abs())
        })
        .collect();
    let fdists: Vec<f64> = db1
        .sequences
        .iter()
        .flat_map(|a| {
            db2.sequences.iter().map(move |b| {
                feature_distance(
                    a.seq_feature.as_ref().unwrap(),
                    b.seq_feature.as_ref().unwrap(),
                )
            })
        })
        .collect();

    let h_t = match cfg.time_bandwidth {
        Bandwidth::Fixed(h) => h,
        Bandwidth::Auto => (median(gaps) / 2.0).max(1e-6),
    };
    let h_f = match cfg.feature_bandwidth {
        Bandwidth::Fixed(h) => h,
        Bandwidth::Auto => (median(fdists) / 2.0).max(1e-6),
    };

    Ok(db1
        .sequences
        .iter()
        .map(|a| {
            db2.sequences
                .iter()
                .map(|b| {
                    let gap = b.t_start - a.t_stop;
                    let fd = feature_distance(
                        a.seq_feature.as_ref().unwrap(),
                        b.seq_feature.as_ref().unwrap(),
                    );
                    (-gap * gap / (2.0 * h_t * h_t)).exp() * (-fd * fd / (2.0 * h_f * h_f)).exp()
                })
                .collect()
        })
        .collect())
}

/// Selection weights over db2 for each sequence of db1: uniform for the
/// random method; proportional to similarity for stitching; proportional to
/// (max sim − sim + ε) for superposing, so dissimilar partners are favored.
pub fn partner_weights(
    db1: &Database,
    db2: &Database,
    cfg: &SimilarityConfig,
    favor_dissimilar: bool,
) -> Result<Vec<Vec<f64>>> {
    cfg.check()?;
    let n2 = db2.sequences.len();
    if n2 == 0 {
        return Err(Error::InvalidParameter(
            "second corpus has no sequences".into(),
        ));
    }
    let weights = match cfg.method {
        SimilarityMethod::Random => vec![vec![1.0 / n2 as f64; n2]; db1.sequences.len()],
        SimilarityMethod::Feature => {
            let sims = similarities(db1, db2, cfg)?;
            sims.into_iter()
                .map(|row| {
                    let raw: Vec<f64> = if favor_dissimilar {
                        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        row.iter().map(|s| max - s + 1e-8).collect()
                    } else {
                        row
                    };
                    let total: f64 = raw.iter().sum();
                    debug_assert!(total > 0.0);
                    let normed: Vec<f64> = raw.iter().map(|w| w / total).collect();
                    debug_assert!((normed.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    normed
                })
                .collect()
        }
    };
    Ok(weights)
}

fn draw_categorical(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Stitch each sequence of `db1` with a follower drawn from `db2`: the
/// follower's timestamps are shifted so its window begins exactly at the
/// leader's `t_stop`, then appended. Follower selection is uniform or
/// similarity-weighted. The output keeps the leader's name, feature, and
/// label.
pub fn stitching(db1: &Database, db2: &Database, cfg: &SimilarityConfig) -> Result<Database> {
    if !vocab_matches(db1, db2) {
        return Err(Error::TypeVocabMismatch);
    }
    let weights = partner_weights(db1, db2, cfg, false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut out = Database {
        num_types: db1.num_types,
        type2idx: db1.type2idx.clone(),
        idx2type: db1.idx2type.clone(),
        event_features: db1.event_features.clone(),
        ..Default::default()
    };
    for (i, a) in db1.sequences.iter().enumerate() {
        let b = &db2.sequences[draw_categorical(&mut rng, &weights[i])];
        let shift = a.t_stop - b.t_start;
        let mut times = a.times.clone();
        let mut events = a.events.clone();
        times.extend(b.times.iter().map(|t| t + shift));
        events.extend_from_slice(&b.events);
        out.push_sequence(
            &db1.idx2seq[i].clone(),
            EventSequence {
                times,
                events,
                seq_feature: a.seq_feature.clone(),
                t_start: a.t_start,
                t_stop: a.t_stop + (b.t_stop - b.t_start),
                label: a.label.clone(),
            },
        );
    }
    Ok(out)
}

/// Superpose each sequence of `db1` with a partner drawn from `db2` on the
/// shared timeline: event streams are merge-sorted with no shift. With the
/// feature method, dissimilar partners are favored.
pub fn superposing(db1: &Database, db2: &Database, cfg: &SimilarityConfig) -> Result<Database> {
    if !vocab_matches(db1, db2) {
        return Err(Error::TypeVocabMismatch);
    }
    let weights = partner_weights(db1, db2, cfg, true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut out = Database {
        num_types: db1.num_types,
        type2idx: db1.type2idx.clone(),
        idx2type: db1.idx2type.clone(),
        event_features: db1.event_features.clone(),
        ..Default::default()
    };
    for (i, a) in db1.sequences.iter().enumerate() {
        let b = &db2.sequences[draw_categorical(&mut rng, &weights[i])];
        let mut times = Vec::with_capacity(a.len() + b.len());
        let mut events = Vec::with_capacity(a.len() + b.len());
        let (mut ia, mut ib) = (0, 0);
        while ia < a.len() || ib < b.len() {
            let take_a = match (a.times.get(ia), b.times.get(ib)) {
                (Some(&ta), Some(&tb)) => ta <= tb,
                (Some(_), None) => true,
                (None, _) => false,
            };
            if take_a {
                times.push(a.times[ia]);
                events.push(a.events[ia]);
                ia += 1;
            } else {
                times.push(b.times[ib]);
                events.push(b.events[ib]);
                ib += 1;
            }
        }
        out.push_sequence(
            &db1.idx2seq[i].clone(),
            EventSequence {
                times,
                events,
                seq_feature: a.seq_feature.clone(),
                t_start: a.t_start.min(b.t_start),
                t_stop: a.t_stop.max(b.t_stop),
                label: a.label.clone(),
            },
        );
    }
    Ok(out)
}

/// Per-sequence bin-count matrix: `num_bins` rows, one column per type.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    pub num_bins: usize,
    pub num_types: usize,
    /// Row-major counts, `num_bins × num_types`.
    pub counts: Vec<u64>,
}

impl CountMatrix {
    pub fn get(&self, bin: usize, c: usize) -> u64 {
        self.counts[bin * self.num_types + c]
    }
}

/// Discretize each sequence into bins of the given width and count events
/// per (bin, type). Bins are `[t_start + b·Δ, t_start + (b+1)·Δ)`, with the
/// final bin closed on the right so `t_stop` is counted.
pub fn aggregating(db: &Database, bin_width: f64) -> Result<Vec<CountMatrix>> {
    if bin_width <= 0.0 || !bin_width.is_finite() {
        return Err(Error::BadBinWidth(bin_width));
    }
    Ok(db
        .sequences
        .iter()
        .map(|seq| {
            let span = seq.t_stop - seq.t_start;
            let num_bins = (span / bin_width).ceil() as usize;
            let mut counts = vec![0u64; num_bins * db.num_types];
            for (&t, &c) in seq.times.iter().zip(&seq.events) {
                let mut bin = ((t - seq.t_start) / bin_width).floor() as usize;
                if bin >= num_bins {
                    bin = num_bins - 1; // right-closed final bin
                }
                counts[bin * db.num_types + c] += 1;
            }
            CountMatrix {
                num_bins,
                num_types: db.num_types,
                counts,
            }
        })
        .collect())
}

/// Build the training sample for event `i` of a sequence: the last
/// `min(memory_size, i)` events strictly before it, left-padded with the
/// null type.
pub fn sample_for_event(
    seq: &EventSequence,
    seq_index: usize,
    event_index: usize,
    memory_size: usize,
    null_type: usize,
) -> TrainingSample {
    let m = memory_size;
    let lo = event_index.saturating_sub(m);
    let real = event_index - lo;
    let mut history_types = vec![null_type; m];
    let mut history_times = vec![seq.t_start; m];
    for k in 0..real {
        history_types[m - real + k] = seq.events[lo + k];
        history_times[m - real + k] = seq.times[lo + k];
    }
    let prev_time = if event_index == 0 {
        seq.t_start
    } else {
        seq.times[event_index - 1]
    };
    TrainingSample {
        target_type: seq.events[event_index],
        target_time: seq.times[event_index],
        prev_time,
        history_types,
        history_times,
        seq_index,
        seq_feature: seq.seq_feature.clone(),
    }
}

/// All training samples of a corpus, one per event, in (sequence, event)
/// order.
pub fn all_samples(db: &Database, memory_size: usize) -> Vec<TrainingSample> {
    let mut out = Vec::with_capacity(db.total_events());
    for (s, seq) in db.sequences.iter().enumerate() {
        for i in 0..seq.len() {
            out.push(sample_for_event(seq, s, i, memory_size, db.num_types));
        }
    }
    out
}

/// A stream of training-sample batches. One pass over the stream visits
/// every event of every sequence exactly once (a without-replacement
/// permutation when shuffled); the last batch may be short.
pub struct SampleStream<'a> {
    db: &'a Database,
    population: Vec<(usize, usize)>,
    memory_size: usize,
    batch_size: usize,
    cursor: usize,
}

impl<'a> Iterator for SampleStream<'a> {
    type Item = Vec<TrainingSample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor >= self.population.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.population.len());
        let batch = self.population[self.cursor..end]
            .iter()
            .map(|&(s, i)| {
                sample_for_event(
                    &self.db.sequences[s],
                    s,
                    i,
                    self.memory_size,
                    self.db.num_types,
                )
            })
            .collect();
        self.cursor = end;
        Some(batch)
    }
}

/// Batch sampler over every event of every sequence. With `shuffle` off the
/// order is (sequence index, event index); with it on, a seeded permutation.
pub fn make_samples(
    db: &Database,
    memory_size: usize,
    batch_size: usize,
    shuffle: bool,
    rng_seed: u64,
) -> Result<SampleStream<'_>> {
    let all: Vec<usize> = (0..db.sequences.len()).collect();
    make_samples_for(db, &all, memory_size, batch_size, shuffle, rng_seed)
}

/// Batch sampler restricted to the given sequences. Samples keep their
/// original sequence indices (embedding lookups stay valid on splits).
pub fn make_samples_for<'a>(
    db: &'a Database,
    seq_indices: &[usize],
    memory_size: usize,
    batch_size: usize,
    shuffle: bool,
    rng_seed: u64,
) -> Result<SampleStream<'a>> {
    if memory_size < 1 {
        return Err(Error::InvalidParameter("memorysize must be ≥ 1".into()));
    }
    if batch_size < 1 {
        return Err(Error::InvalidParameter("batch size must be ≥ 1".into()));
    }
    let mut population: Vec<(usize, usize)> = seq_indices
        .iter()
        .flat_map(|&s| (0..db.sequences[s].len()).map(move |i| (s, i)))
        .collect();
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        // Fisher–Yates
        for i in (1..population.len()).rev() {
            let j = rng.random_range(0..=i);
            population.swap(i, j);
        }
    }
    Ok(SampleStream {
        db,
        population,
        memory_size,
        batch_size,
        cursor: 0,
    })
}
