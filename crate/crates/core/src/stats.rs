//! Distributions, role quadrants, activity-binned correlations and
//! plot-ready tables computed from a metrics table.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backbone::{pearson, Correlation};
use crate::metrics::UserMetrics;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("bin boundaries must be strictly ascending with at least 2 entries")]
    InvalidBins,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("bins_per_decade must be >= 1")]
    ZeroBinsPerDecade,
    #[error("unknown metric field `{0}`")]
    UnknownField(String),
}

/// Sorted distinct values with the fraction of observations `>= value`.
/// Non-finite values are ignored.
pub fn ccdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return Vec::new();
    }
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let x = v[i];
        out.push((x, (v.len() - i) as f64 / n));
        while i < v.len() && v[i] == x {
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogHistogram2d {
    pub bins_per_decade: u32,
    /// `(x bin, y bin) -> count`, where bin `i` spans
    /// `[10^(i/bpd), 10^((i+1)/bpd))`.
    pub cells: BTreeMap<(i32, i32), u64>,
    /// Points with a non-positive or non-finite coordinate.
    pub dropped: u64,
}

impl LogHistogram2d {
    pub fn bin_low(&self, index: i32) -> f64 {
        10f64.powf(index as f64 / self.bins_per_decade as f64)
    }

    pub fn total(&self) -> u64 {
        self.cells.values().sum()
    }

    /// `x_bin_low,y_bin_low,count` with a header line.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_bin_low", "y_bin_low", "count"])?;
        for (&(i, j), &c) in &self.cells {
            w.write_record([
                self.bin_low(i).to_string(),
                self.bin_low(j).to_string(),
                c.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn log_bin(v: f64, bpd: u32) -> i32 {
    // The nudge keeps exact powers of ten on their own lower edge.
    (v.log10() * bpd as f64 + 1e-9).floor() as i32
}

pub fn log_histogram2d(x: &[f64], y: &[f64], bins_per_decade: u32) -> Result<LogHistogram2d, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if bins_per_decade == 0 {
        return Err(StatsError::ZeroBinsPerDecade);
    }
    let mut hist = LogHistogram2d {
        bins_per_decade,
        cells: BTreeMap::new(),
        dropped: 0,
    };
    for (&a, &b) in x.iter().zip(y) {
        if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
            *hist
                .cells
                .entry((log_bin(a, bins_per_decade), log_bin(b, bins_per_decade)))
                .or_insert(0) += 1;
        } else {
            hist.dropped += 1;
        }
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoleQuadrant {
    StrongInfluencer,
    NormalUser,
    HiddenInfluential,
    FakeInfluential,
}

impl RoleQuadrant {
    pub const ALL: [RoleQuadrant; 4] = [
        RoleQuadrant::StrongInfluencer,
        RoleQuadrant::NormalUser,
        RoleQuadrant::HiddenInfluential,
        RoleQuadrant::FakeInfluential,
    ];

    /// Balances equal to 1 fall on the `<= 1` side.
    pub fn classify(retweet_balance: f64, follower_balance: f64) -> Self {
        match (retweet_balance > 1.0, follower_balance > 1.0) {
            (true, true) => RoleQuadrant::StrongInfluencer,
            (false, false) => RoleQuadrant::NormalUser,
            (true, false) => RoleQuadrant::HiddenInfluential,
            (false, true) => RoleQuadrant::FakeInfluential,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RoleQuadrant::StrongInfluencer => "StrongInfluencer",
            RoleQuadrant::NormalUser => "NormalUser",
            RoleQuadrant::HiddenInfluential => "HiddenInfluential",
            RoleQuadrant::FakeInfluential => "FakeInfluential",
        }
    }
}

/// Quadrant for every user whose two balances are defined.
pub fn classify_roles(metrics: &[UserMetrics]) -> BTreeMap<String, RoleQuadrant> {
    metrics
        .iter()
        .filter_map(|m| {
            let q = RoleQuadrant::classify(m.rt_balance?, m.f_balance?);
            Some((m.user.clone(), q))
        })
        .collect()
}

/// Activity bins. Every bin is `[b_i, b_{i+1})` except the last, which also
/// includes its upper boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityBins {
    boundaries: Vec<u64>,
}

impl ActivityBins {
    pub fn new(boundaries: Vec<u64>) -> Result<Self, StatsError> {
        if boundaries.len() < 2 || boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(StatsError::InvalidBins);
        }
        Ok(ActivityBins { boundaries })
    }

    pub fn boundaries(&self) -> &[u64] {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bounds(&self, i: usize) -> (u64, u64) {
        (self.boundaries[i], self.boundaries[i + 1])
    }

    pub fn label(&self, i: usize) -> String {
        let (lo, hi) = self.bounds(i);
        let close = if i + 1 == self.len() { ']' } else { ')' };
        format!("[{lo},{hi}{close}")
    }

    pub fn bin_of(&self, n: u64) -> Option<usize> {
        let last = self.len() - 1;
        (0..self.len()).find(|&i| {
            let (lo, hi) = self.bounds(i);
            lo <= n && (n < hi || (i == last && n == hi))
        })
    }
}

impl Default for ActivityBins {
    /// `[1,40) [40,200) [200,600) [600,6107]`
    fn default() -> Self {
        ActivityBins {
            boundaries: vec![1, 40, 200, 600, 6107],
        }
    }
}

impl FromStr for ActivityBins {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parsed: Result<Vec<u64>, _> = s.split(',').map(|t| t.trim().parse::<u64>()).collect();
        ActivityBins::new(parsed.map_err(|_| StatsError::InvalidBins)?)
    }
}

/// Numeric columns of the metrics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricField {
    K,
    KIn,
    Kappa,
    KappaIn,
    S,
    SIn,
    A,
    KappaS,
    ASemantic,
    NTw,
    NRt,
    N,
    RtBalance,
    FBalance,
}

impl MetricField {
    pub fn get(self, m: &UserMetrics) -> Option<f64> {
        let int = |v: u64| Some(v as f64);
        match self {
            MetricField::K => int(m.k),
            MetricField::KIn => int(m.k_in),
            MetricField::Kappa => int(m.kappa),
            MetricField::KappaIn => int(m.kappa_in),
            MetricField::S => int(m.s),
            MetricField::SIn => int(m.s_in),
            MetricField::A => m.a,
            MetricField::KappaS => int(m.kappa_s),
            MetricField::ASemantic => m.a_s,
            MetricField::NTw => int(m.n_tw),
            MetricField::NRt => int(m.n_rt),
            MetricField::N => int(m.n),
            MetricField::RtBalance => m.rt_balance,
            MetricField::FBalance => m.f_balance,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricField::K => "k",
            MetricField::KIn => "k_in",
            MetricField::Kappa => "kappa",
            MetricField::KappaIn => "kappa_in",
            MetricField::S => "s",
            MetricField::SIn => "s_in",
            MetricField::A => "a",
            MetricField::KappaS => "kappa_s",
            MetricField::ASemantic => "a_s",
            MetricField::NTw => "n_tw",
            MetricField::NRt => "n_rt",
            MetricField::N => "n",
            MetricField::RtBalance => "rt_balance",
            MetricField::FBalance => "f_balance",
        }
    }
}

impl fmt::Display for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricField {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use MetricField::*;
        [K, KIn, Kappa, KappaIn, S, SIn, A, KappaS, ASemantic, NTw, NRt, N, RtBalance, FBalance]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| StatsError::UnknownField(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinCorrelation {
    pub range: String,
    pub n_users: usize,
    pub correlation: Option<Correlation>,
}

/// Pearson R between two fields per activity bin (binned on `n`). Users
/// with either field undefined are skipped; bins where the correlation is
/// undefined report `None`.
pub fn binned_correlation(
    metrics: &[UserMetrics],
    x: MetricField,
    y: MetricField,
    bins: &ActivityBins,
) -> Vec<BinCorrelation> {
    let mut xs = vec![Vec::new(); bins.len()];
    let mut ys = vec![Vec::new(); bins.len()];
    for m in metrics {
        let (Some(b), Some(vx), Some(vy)) = (bins.bin_of(m.n), x.get(m), y.get(m)) else {
            continue;
        };
        xs[b].push(vx);
        ys[b].push(vy);
    }
    (0..bins.len())
        .map(|b| BinCorrelation {
            range: bins.label(b),
            n_users: xs[b].len(),
            correlation: pearson(&xs[b], &ys[b]).ok(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outlier_count: usize,
    pub n: usize,
}

/// Quantile by linear interpolation between order statistics of a sorted
/// slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Five-number summary with whiskers at the most extreme points within
/// 1.5 IQR of the quartiles. `None` for an empty group.
pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_unstable_by(f64::total_cmp);
    let q1 = quantile(&v, 0.25);
    let median = quantile(&v, 0.5);
    let q3 = quantile(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|&x| x >= lo_fence && x <= hi_fence).collect();
    Some(BoxStats {
        q1,
        median,
        q3,
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outlier_count: v.len() - inside.len(),
        n: v.len(),
    })
}

pub fn boxplot_stats(groups: &BTreeMap<String, Vec<f64>>) -> BTreeMap<String, Option<BoxStats>> {
    groups.iter().map(|(k, v)| (k.clone(), box_stats(v))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioBin {
    pub range: String,
    pub ratios: Vec<f64>,
    pub stats: Option<BoxStats>,
}

/// Per-user `numerator / denominator` grouped by activity bin. Users whose
/// ratio is undefined (missing field or zero denominator) are skipped.
pub fn attention_ratio_vs_activity(
    metrics: &[UserMetrics],
    numerator: MetricField,
    denominator: MetricField,
    bins: &ActivityBins,
) -> Vec<RatioBin> {
    let mut groups = vec![Vec::new(); bins.len()];
    for m in metrics {
        let (Some(b), Some(num), Some(den)) = (bins.bin_of(m.n), numerator.get(m), denominator.get(m)) else {
            continue;
        };
        if den != 0.0 {
            groups[b].push(num / den);
        }
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(b, ratios)| RatioBin {
            range: bins.label(b),
            stats: box_stats(&ratios),
            ratios,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryBin {
    pub range: String,
    pub n: usize,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub p: Option<f64>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub users: usize,
    pub edges_follower: u64,
    pub edges_retweet: u64,
    pub quadrants: BTreeMap<String, usize>,
    pub bins: Vec<SummaryBin>,
}

pub fn summarize(
    metrics: &[UserMetrics],
    roles: &BTreeMap<String, RoleQuadrant>,
    correlations: &[BinCorrelation],
) -> Summary {
    let mut quadrants: BTreeMap<String, usize> =
        RoleQuadrant::ALL.iter().map(|q| (q.name().to_string(), 0)).collect();
    for q in roles.values() {
        *quadrants.get_mut(q.name()).expect("all quadrants present") += 1;
    }
    Summary {
        users: metrics.len(),
        edges_follower: metrics.iter().map(|m| m.k).sum(),
        edges_retweet: metrics.iter().map(|m| m.kappa).sum(),
        quadrants,
        bins: correlations
            .iter()
            .map(|c| SummaryBin {
                range: c.range.clone(),
                n: c.n_users,
                r: c.correlation.map(|c| c.r),
                p: c.correlation.map(|c| c.p_value),
            })
            .collect(),
    }
}
