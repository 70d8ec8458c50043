//! Concentration of attention: Herfindahl-Hirschman index, attentional
//! degrees (social and semantic), balances and hashtag homophily.
//!
//! The attentional degree of a weight vector is the inverse of its HHI. It
//! reads as the number of neighbors that receive a meaningful share: 1 when
//! all weight sits on one neighbor, `len` when it is split evenly.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backbone::Orientation;
use crate::ingest::{Event, EventKind, TimeWindow};
use crate::network::{Activity, FollowerNetwork, NodeId, RetweetNetwork};
use crate::stats::ccdf;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("weight vector is empty")]
    EmptyWeights,
    #[error("weight {0} is not a finite positive number")]
    InvalidWeight(f64),
    #[error("need at least 2 nodes to sample random pairs, found {0}")]
    TooFewNodes(usize),
    #[error("sample size must be >= 1")]
    EmptySample,
}

fn validate(weights: &[f64]) -> Result<(), MetricsError> {
    if weights.is_empty() {
        return Err(MetricsError::EmptyWeights);
    }
    if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(MetricsError::InvalidWeight(w));
    }
    Ok(())
}

/// Sum of squared shares, in `[1/len, 1]`.
pub fn hhi(weights: &[f64]) -> Result<f64, MetricsError> {
    validate(weights)?;
    // Summing in sorted order makes the result independent of input order.
    let mut sorted = weights.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    let h: f64 = sorted.iter().map(|w| (w / total) * (w / total)).sum();
    Ok(h.clamp(1.0 / weights.len() as f64, 1.0))
}

/// Inverse HHI, in `[1, len]`. Exactly 1 for a single weight and exactly
/// `len` for an even split.
pub fn attentional_degree(weights: &[f64]) -> Result<f64, MetricsError> {
    let h = hhi(weights)?;
    let len = weights.len() as f64;
    if weights.iter().all(|&w| w == weights[0]) {
        return Ok(len);
    }
    Ok((1.0 / h).clamp(1.0, len))
}

fn degree_of_counts(counts: impl Iterator<Item = u64>) -> Option<f64> {
    let weights: Vec<f64> = counts.map(|c| c as f64).collect();
    attentional_degree(&weights).ok()
}

/// Attentional degree of every node with at least one edge in the given
/// orientation, indexed by node id. `Outgoing` gives the social attentional
/// degree `a_u`.
pub fn attentional_degrees(rn: &RetweetNetwork, orientation: Orientation) -> Vec<Option<f64>> {
    (0..rn.node_count() as NodeId)
        .map(|u| {
            let weights = match orientation {
                Orientation::Outgoing => rn.out_weights(u),
                Orientation::Incoming => rn.in_weights(u),
            };
            degree_of_counts(weights.iter().map(|&w| w as u64))
        })
        .collect()
}

/// `a_u` for every user with at least one retweet out-edge.
pub fn social_attention(rn: &RetweetNetwork) -> BTreeMap<String, f64> {
    attentional_degrees(rn, Orientation::Outgoing)
        .into_iter()
        .enumerate()
        .filter_map(|(u, a)| Some((rn.users().name(u as NodeId).to_string(), a?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashtagSource {
    #[default]
    RetweetsOnly,
    AllPosts,
}

impl FromStr for HashtagSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "retweets" | "retweets_only" => Ok(HashtagSource::RetweetsOnly),
            "all" | "all_posts" => Ok(HashtagSource::AllPosts),
            other => Err(format!("unknown hashtag source `{other}`")),
        }
    }
}

impl HashtagSource {
    fn includes(self, kind: EventKind) -> bool {
        self == HashtagSource::AllPosts || kind == EventKind::Retweet
    }
}

/// Raw hashtag occurrence counts for one user. Hapaxes are kept here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashtagProfile {
    pub user: String,
    pub source: HashtagSource,
    pub counts: BTreeMap<String, u64>,
}

impl HashtagProfile {
    pub fn new(user: impl Into<String>, source: HashtagSource) -> Self {
        HashtagProfile {
            user: user.into(),
            source,
            counts: BTreeMap::new(),
        }
    }

    pub fn tags(&self) -> BTreeSet<String> {
        self.counts.keys().cloned().collect()
    }

    /// Hashtags used at least twice.
    pub fn non_hapax_count(&self) -> usize {
        self.counts.values().filter(|&&c| c >= 2).count()
    }

    fn add(&mut self, event: &Event) {
        if self.source.includes(event.kind) {
            for tag in &event.hashtags {
                *self.counts.entry(tag.clone()).or_insert(0) += 1;
            }
        }
    }
}

pub fn hashtag_profile(events: &[Event], user: &str, source: HashtagSource) -> HashtagProfile {
    let mut profile = HashtagProfile::new(user, source);
    for e in events.iter().filter(|e| e.user == user) {
        profile.add(e);
    }
    profile
}

/// Profiles for every user with at least one event, in one pass.
pub fn hashtag_profiles(
    events: &[Event],
    window: TimeWindow,
    source: HashtagSource,
) -> BTreeMap<String, HashtagProfile> {
    let mut out: BTreeMap<String, HashtagProfile> = BTreeMap::new();
    for e in events.iter().filter(|e| window.contains(e.timestamp)) {
        if !out.contains_key(&e.user) {
            out.insert(e.user.clone(), HashtagProfile::new(&e.user, source));
        }
        out.get_mut(&e.user).expect("inserted").add(e);
    }
    out
}

/// Inverse HHI over hashtags used at least twice; `None` if none is.
pub fn semantic_attentional_degree(profile: &HashtagProfile) -> Option<f64> {
    degree_of_counts(profile.counts.values().copied().filter(|&c| c >= 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HapaxMode {
    /// Count every distinct hashtag.
    #[default]
    Keep,
    /// Count only hashtags used at least twice.
    Drop,
}

/// `kappa^s_u`: number of distinct hashtags in the profile.
pub fn semantic_degree(profile: &HashtagProfile, mode: HapaxMode) -> usize {
    match mode {
        HapaxMode::Keep => profile.counts.len(),
        HapaxMode::Drop => profile.non_hapax_count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Balances {
    /// `kappa'_u / kappa_u`
    pub retweet: Option<f64>,
    /// `k'_u / k_u`
    pub follower: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn balances(f: &FollowerNetwork, rn: &RetweetNetwork) -> BTreeMap<String, Balances> {
    (0..f.node_count() as NodeId)
        .map(|u| {
            let b = Balances {
                retweet: ratio(rn.in_degree(u), rn.out_degree(u)),
                follower: ratio(f.in_degree(u), f.out_degree(u)),
            };
            (f.users().name(u).to_string(), b)
        })
        .collect()
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets scoring 0.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JaccardComparison {
    pub connected: Vec<f64>,
    pub random: Vec<f64>,
    pub connected_ccdf: Vec<(f64, f64)>,
    pub random_ccdf: Vec<(f64, f64)>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

impl JaccardComparison {
    pub fn connected_mean(&self) -> f64 {
        mean(&self.connected)
    }

    pub fn random_mean(&self) -> f64 {
        mean(&self.random)
    }
}

/// Hashtag-set similarity of connected pairs versus uniformly sampled pairs.
///
/// Connected pairs are all retweet edges in edge order. Random pairs are
/// unordered distinct pairs over nodes incident to at least one retweet
/// edge, drawn with replacement from a seeded ChaCha8 stream. Users without
/// a profile have an empty tag set.
pub fn jaccard_comparison(
    rn: &RetweetNetwork,
    profiles: &BTreeMap<String, BTreeSet<String>>,
    sample_size: usize,
    seed: u64,
) -> Result<JaccardComparison, MetricsError> {
    if sample_size == 0 {
        return Err(MetricsError::EmptySample);
    }
    let nodes = rn.active_nodes();
    if nodes.len() < 2 {
        return Err(MetricsError::TooFewNodes(nodes.len()));
    }
    let empty = BTreeSet::new();
    let tags = |u: NodeId| profiles.get(rn.users().name(u)).unwrap_or(&empty);

    let connected: Vec<f64> = rn.edges().map(|(u, v, _)| jaccard(tags(u), tags(v))).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = nodes.len();
    let random: Vec<f64> = (0..sample_size)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            jaccard(tags(nodes[i]), tags(nodes[j]))
        })
        .collect();

    Ok(JaccardComparison {
        connected_ccdf: ccdf(&connected),
        random_ccdf: ccdf(&random),
        connected,
        random,
    })
}

/// Per-user measurements. `None` marks an undefined value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UserMetrics {
    pub user: String,
    pub k: u64,
    pub k_in: u64,
    pub kappa: u64,
    pub kappa_in: u64,
    pub s: u64,
    pub s_in: u64,
    pub a: Option<f64>,
    pub kappa_s: u64,
    pub a_s: Option<f64>,
    pub n_tw: u64,
    pub n_rt: u64,
    pub n: u64,
    pub rt_balance: Option<f64>,
    pub f_balance: Option<f64>,
}

pub const METRICS_HEADER: [&str; 15] = [
    "user",
    "k",
    "k_in",
    "kappa",
    "kappa_in",
    "s",
    "s_in",
    "a",
    "kappa_s",
    "a_s",
    "n_tw",
    "n_rt",
    "n",
    "rt_balance",
    "f_balance",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct MetricsOptions {
    pub hashtag_source: HashtagSource,
    pub hapax_mode: HapaxMode,
}

/// Full metrics table over the follower network's node set, sorted by user.
pub fn compute_user_metrics(
    f: &FollowerNetwork,
    rn: &RetweetNetwork,
    activity: &BTreeMap<String, Activity>,
    profiles: &BTreeMap<String, HashtagProfile>,
    options: MetricsOptions,
) -> Vec<UserMetrics> {
    let social = attentional_degrees(rn, Orientation::Outgoing);
    (0..f.node_count() as NodeId)
        .map(|u| {
            let name = f.users().name(u);
            let act = activity.get(name).copied().unwrap_or_default();
            let (kappa_s, a_s) = match profiles.get(name) {
                Some(p) => (
                    semantic_degree(p, options.hapax_mode) as u64,
                    semantic_attentional_degree(p),
                ),
                None => (0, None),
            };
            UserMetrics {
                user: name.to_string(),
                k: f.out_degree(u) as u64,
                k_in: f.in_degree(u) as u64,
                kappa: rn.out_degree(u) as u64,
                kappa_in: rn.in_degree(u) as u64,
                s: rn.out_strength(u),
                s_in: rn.in_strength(u),
                a: social[u as usize],
                kappa_s,
                a_s,
                n_tw: act.n_tw,
                n_rt: act.n_rt,
                n: act.n(),
                rt_balance: ratio(rn.in_degree(u), rn.out_degree(u)),
                f_balance: ratio(f.in_degree(u), f.out_degree(u)),
            }
        })
        .collect()
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics_csv<W: std::io::Write>(rows: &[UserMetrics], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for m in rows {
        w.write_record([
            m.user.clone(),
            m.k.to_string(),
            m.k_in.to_string(),
            m.kappa.to_string(),
            m.kappa_in.to_string(),
            m.s.to_string(),
            m.s_in.to_string(),
            opt_cell(m.a),
            m.kappa_s.to_string(),
            opt_cell(m.a_s),
            m.n_tw.to_string(),
            m.n_rt.to_string(),
            m.n.to_string(),
            opt_cell(m.rt_balance),
            opt_cell(m.f_balance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum MetricsReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("metrics header mismatch: expected {expected:?}")]
    Header { expected: Vec<&'static str> },
    #[error("line {line}, column `{column}`: cannot parse `{value}`")]
    Cell {
        line: u64,
        column: &'static str,
        value: String,
    },
}

pub fn read_metrics_csv<R: std::io::Read>(source: R) -> Result<Vec<UserMetrics>, MetricsReadError> {
    let mut reader = csv::Reader::from_reader(source);
    if reader.headers()?.iter().ne(METRICS_HEADER) {
        return Err(MetricsReadError::Header {
            expected: METRICS_HEADER.to_vec(),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize| record.get(i).unwrap_or("");
        let err = |i: usize| MetricsReadError::Cell {
            line,
            column: METRICS_HEADER[i],
            value: cell(i).to_string(),
        };
        let int = |i: usize| cell(i).parse::<u64>().map_err(|_| err(i));
        let opt = |i: usize| -> Result<Option<f64>, MetricsReadError> {
            match cell(i) {
                "" => Ok(None),
                s => s.parse::<f64>().map(Some).map_err(|_| err(i)),
            }
        };
        rows.push(UserMetrics {
            user: cell(0).to_string(),
            k: int(1)?,
            k_in: int(2)?,
            kappa: int(3)?,
            kappa_in: int(4)?,
            s: int(5)?,
            s_in: int(6)?,
            a: opt(7)?,
            kappa_s: int(8)?,
            a_s: opt(9)?,
            n_tw: int(10)?,
            n_rt: int(11)?,
            n: int(12)?,
            rt_balance: opt(13)?,
            f_balance: opt(14)?,
        });
    }
    Ok(rows)
}
