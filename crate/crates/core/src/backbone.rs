//! Disparity-filter backbone of the retweet network.
//!
//! Each edge is tested at one endpoint, chosen by [`Orientation`]. With `k`
//! edges at that endpoint and normalized weight `p = w / strength`, the
//! probability of a share at least as large under a uniform random split of
//! the strength is `alpha_ij = (1 - p)^(k - 1)`. The edge is kept when
//! `alpha_ij < alpha`. A node with a single edge always keeps it.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::network::{write_weighted_edges, NodeId, RetweetNetwork, UserTable};

#[derive(Debug, Error, PartialEq)]
pub enum BackboneError {
    #[error("share p = {0} outside (0, 1]")]
    ShareOutOfRange(f64),
    #[error("degree must be >= 1")]
    ZeroDegree,
    #[error("alpha = {0} outside (0, 1)")]
    AlphaOutOfRange(f64),
    #[error("alpha grid is empty")]
    EmptyGrid,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 observations, found {0}")]
    TooFewObservations(usize),
    #[error("correlation undefined: input is constant or not finite")]
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Shares are taken over the incoming links of the edge's target.
    #[default]
    Incoming,
    /// Shares are taken over the outgoing links of the edge's source.
    Outgoing,
}

impl FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in" | "incoming" => Ok(Orientation::Incoming),
            "out" | "outgoing" => Ok(Orientation::Outgoing),
            other => Err(format!("unknown orientation `{other}`")),
        }
    }
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Orientation::Incoming => "incoming",
            Orientation::Outgoing => "outgoing",
        })
    }
}

/// `(1 - p)^(k - 1)`, and 0 when `k == 1`.
pub fn edge_alpha(p: f64, k: usize) -> Result<f64, BackboneError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(BackboneError::ShareOutOfRange(p));
    }
    match k {
        0 => Err(BackboneError::ZeroDegree),
        1 => Ok(0.0),
        _ => Ok((1.0 - p).powi((k - 1) as i32)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSignificance {
    pub source: NodeId,
    pub target: NodeId,
    pub weight: u32,
    /// Share of the evaluated endpoint's strength.
    pub p: f64,
    pub alpha_ij: f64,
    pub orientation: Orientation,
}

/// Significance of every edge, in the network's `(source, target)` order.
pub fn edge_significances(rn: &RetweetNetwork, orientation: Orientation) -> Vec<EdgeSignificance> {
    let n = rn.node_count();
    let (degree, strength): (Vec<usize>, Vec<u64>) = (0..n as NodeId)
        .map(|u| match orientation {
            Orientation::Incoming => (rn.in_degree(u), rn.in_strength(u)),
            Orientation::Outgoing => (rn.out_degree(u), rn.out_strength(u)),
        })
        .unzip();
    rn.edges()
        .map(|(u, v, w)| {
            let end = match orientation {
                Orientation::Incoming => v as usize,
                Orientation::Outgoing => u as usize,
            };
            let p = w as f64 / strength[end] as f64;
            let alpha_ij = edge_alpha(p, degree[end]).expect("edge shares lie in (0, 1]");
            EdgeSignificance {
                source: u,
                target: v,
                weight: w,
                p,
                alpha_ij,
                orientation,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneResult {
    pub alpha: f64,
    pub orientation: Orientation,
    pub users: Arc<UserTable>,
    pub edges: Vec<EdgeSignificance>,
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
}

impl BackboneResult {
    fn from_retained(
        users: Arc<UserTable>,
        alpha: f64,
        orientation: Orientation,
        edges: Vec<EdgeSignificance>,
    ) -> Self {
        let mut in_degree = vec![0; users.len()];
        let mut out_degree = vec![0; users.len()];
        for e in &edges {
            out_degree[e.source as usize] += 1;
            in_degree[e.target as usize] += 1;
        }
        BackboneResult {
            alpha,
            orientation,
            users,
            edges,
            in_degree,
            out_degree,
        }
    }

    /// Backbone degree of `u` on the side the filter evaluated.
    pub fn degree(&self, u: NodeId) -> usize {
        match self.orientation {
            Orientation::Incoming => self.in_degree[u as usize],
            Orientation::Outgoing => self.out_degree[u as usize],
        }
    }

    pub fn contains(&self, u: &str, v: &str) -> bool {
        let (Some(u), Some(v)) = (self.users.id(u), self.users.id(v)) else {
            return false;
        };
        self.edges.iter().any(|e| e.source == u && e.target == v)
    }

    /// Same `u,v,w` schema as the retweet network export.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), crate::network::NetworkError> {
        write_weighted_edges(
            self.edges
                .iter()
                .map(|e| (self.users.name(e.source), self.users.name(e.target), e.weight)),
            out,
        )
    }
}

fn check_alpha(alpha: f64) -> Result<(), BackboneError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(BackboneError::AlphaOutOfRange(alpha))
    }
}

pub fn extract_backbone(
    rn: &RetweetNetwork,
    alpha: f64,
    orientation: Orientation,
) -> Result<BackboneResult, BackboneError> {
    check_alpha(alpha)?;
    let kept = edge_significances(rn, orientation)
        .into_iter()
        .filter(|e| e.alpha_ij < alpha)
        .collect();
    Ok(BackboneResult::from_retained(
        rn.users().clone(),
        alpha,
        orientation,
        kept,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Pearson product-moment correlation with a two-sided p-value from
/// Student's t on `n - 2` degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, BackboneError> {
    if x.len() != y.len() {
        return Err(BackboneError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(BackboneError::TooFewObservations(n));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(BackboneError::Undefined);
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) || !sxy.is_finite() {
        return Err(BackboneError::Undefined);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Ok(Correlation {
        r,
        p_value: t_test_p_value(r, n),
        n,
    })
}

fn t_test_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let one_minus = 1.0 - r * r;
    if one_minus <= 0.0 {
        return 0.0;
    }
    // P(|T| > t) = I_{df / (df + t^2)}(df / 2, 1 / 2), with
    // df / (df + t^2) = 1 - r^2.
    beta_reg(df / 2.0, 0.5, one_minus).clamp(0.0, 1.0)
}

/// `0.025, 0.050, ..., 0.975`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=39).map(|i| i as f64 / 40.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub correlation: Option<Correlation>,
    pub edges_retained: usize,
    pub nodes_compared: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub orientation: Orientation,
    pub points: Vec<SweepPoint>,
    pub best_alpha: Option<f64>,
}

impl SweepResult {
    /// `alpha,R,p_value,edges_retained,nodes_compared`, empty cells for
    /// undefined correlations.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "R", "p_value", "edges_retained", "nodes_compared"])?;
        for p in &self.points {
            let (r, pv) = p
                .correlation
                .map(|c| (c.r.to_string(), c.p_value.to_string()))
                .unwrap_or_default();
            w.write_record([
                p.alpha.to_string(),
                r,
                pv,
                p.edges_retained.to_string(),
                p.nodes_compared.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Correlates backbone degree with attentional degree for each `alpha`.
///
/// Compared nodes have at least one edge on the evaluated side of the
/// original network and an entry in `attentional`. Points with fewer than
/// three such nodes, or a constant side, are undefined. The best alpha
/// maximizes R, ties going to the smaller alpha.
pub fn alpha_sweep(
    rn: &RetweetNetwork,
    attentional: &BTreeMap<String, f64>,
    grid: &[f64],
    orientation: Orientation,
) -> Result<SweepResult, BackboneError> {
    if grid.is_empty() {
        return Err(BackboneError::EmptyGrid);
    }
    for &a in grid {
        check_alpha(a)?;
    }
    let significances = edge_significances(rn, orientation);
    let compared: Vec<(NodeId, f64)> = (0..rn.node_count() as NodeId)
        .filter(|&u| match orientation {
            Orientation::Incoming => rn.in_degree(u) > 0,
            Orientation::Outgoing => rn.out_degree(u) > 0,
        })
        .filter_map(|u| Some((u, *attentional.get(rn.users().name(u))?)))
        .collect();
    let att: Vec<f64> = compared.iter().map(|&(_, a)| a).collect();

    let points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&alpha| {
            let mut degree = vec![0usize; rn.node_count()];
            let mut retained = 0;
            for e in significances.iter().filter(|e| e.alpha_ij < alpha) {
                retained += 1;
                let end = match orientation {
                    Orientation::Incoming => e.target,
                    Orientation::Outgoing => e.source,
                };
                degree[end as usize] += 1;
            }
            let bb: Vec<f64> = compared.iter().map(|&(u, _)| degree[u as usize] as f64).collect();
            SweepPoint {
                alpha,
                correlation: pearson(&bb, &att).ok(),
                edges_retained: retained,
                nodes_compared: compared.len(),
            }
        })
        .collect();

    let mut best: Option<(f64, f64)> = None;
    for p in &points {
        if let Some(c) = p.correlation {
            let better = match best {
                None => true,
                Some((ba, br)) => c.r > br || (c.r == br && p.alpha < ba),
            };
            if better {
                best = Some((p.alpha, c.r));
            }
        }
    }
    Ok(SweepResult {
        orientation,
        points,
        best_alpha: best.map(|(a, _)| a),
    })
}
