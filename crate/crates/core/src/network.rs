//! Follower (potential attention) and retweet (actual attention) networks.
//!
//! Both networks share one [`UserTable`] so node ids agree. Ids are assigned
//! in sorted user-name order, which makes every export independent of the
//! order edges were read in.
//!
//! A retweet by `u` of content `c` at time `t` credits the link `u -> v` for
//! every followee `v` of `u` that has any event (tweet or retweet) on `c`
//! strictly before `t` inside the window. One retweet may therefore credit
//! several followees, so `s_u` can exceed the number of retweets `u` made.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::{Event, EventKind, FollowEdge, TimeWindow};

pub type NodeId = u32;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("retweet edge {0} -> {1} is not a follower edge")]
    NotInFollowerNetwork(String, String),
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("edge {0} -> {1} has weight 0")]
    ZeroWeight(String, String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Interned user names, sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserTable {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl UserTable {
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = names.into_iter().map(Into::into).collect();
        names.sort_unstable();
        names.dedup();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as NodeId))
            .collect();
        UserTable { names, index }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Compressed adjacency rows; targets within a row are sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

impl Csr {
    /// `edges` must be sorted by (source, target).
    fn from_sorted(n: usize, edges: impl Iterator<Item = (NodeId, NodeId)>) -> Self {
        let mut offsets = vec![0usize; n + 1];
        let mut targets = Vec::new();
        for (u, v) in edges {
            offsets[u as usize + 1] += 1;
            targets.push(v);
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Csr { offsets, targets }
    }

    #[inline]
    fn range(&self, u: NodeId) -> std::ops::Range<usize> {
        self.offsets[u as usize]..self.offsets[u as usize + 1]
    }

    #[inline]
    fn row(&self, u: NodeId) -> &[NodeId] {
        &self.targets[self.range(u)]
    }
}

/// Static directed subscription graph. `u -> v` means `u` follows `v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FollowerNetwork {
    users: Arc<UserTable>,
    out: Csr,
    inc: Csr,
}

impl FollowerNetwork {
    pub fn users(&self) -> &Arc<UserTable> {
        &self.users
    }

    pub fn node_count(&self) -> usize {
        self.users.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.targets.len()
    }

    /// Number of followees, `k_u`.
    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out.range(u).len()
    }

    /// Number of followers, `k'_u`.
    pub fn in_degree(&self, u: NodeId) -> usize {
        self.inc.range(u).len()
    }

    pub fn followees(&self, u: NodeId) -> &[NodeId] {
        self.out.row(u)
    }

    pub fn followers(&self, u: NodeId) -> &[NodeId] {
        self.inc.row(u)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.followees(u).binary_search(&v).is_ok()
    }

    pub fn has_edge_named(&self, u: &str, v: &str) -> bool {
        match (self.users.id(u), self.users.id(v)) {
            (Some(u), Some(v)) => self.has_edge(u, v),
            _ => false,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.node_count() as NodeId)
            .flat_map(move |u| self.followees(u).iter().map(move |&v| (u, v)))
    }

    /// Headerless `u,v` CSV in node-id order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), NetworkError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for (u, v) in self.edges() {
            w.write_record([self.users.name(u), self.users.name(v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the follower network. Self-loops are dropped and duplicate edges
/// collapse to one.
pub fn build_follower_network(edges: &[FollowEdge]) -> FollowerNetwork {
    let users = UserTable::from_names(
        edges
            .iter()
            .filter(|e| e.follower != e.followee)
            .flat_map(|e| [e.follower.as_str(), e.followee.as_str()]),
    );
    let mut pairs: Vec<(NodeId, NodeId)> = edges
        .iter()
        .filter(|e| e.follower != e.followee)
        .map(|e| {
            (
                users.id(&e.follower).expect("interned"),
                users.id(&e.followee).expect("interned"),
            )
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let n = users.len();
    let out = Csr::from_sorted(n, pairs.iter().copied());
    let mut rev: Vec<(NodeId, NodeId)> = pairs.iter().map(|&(u, v)| (v, u)).collect();
    rev.sort_unstable();
    let inc = Csr::from_sorted(n, rev.into_iter());
    FollowerNetwork {
        users: Arc::new(users),
        out,
        inc,
    }
}

/// Weighted directed graph of observed attention over the follower
/// network's node set. Every edge is also a follower edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetweetNetwork {
    users: Arc<UserTable>,
    out: Csr,
    out_weights: Vec<u32>,
    inc: Csr,
    in_weights: Vec<u32>,
}

impl RetweetNetwork {
    /// `edges` must be sorted by (source, target), unique, with weights >= 1.
    fn from_sorted_edges(users: Arc<UserTable>, edges: Vec<(NodeId, NodeId, u32)>) -> Self {
        let n = users.len();
        let out = Csr::from_sorted(n, edges.iter().map(|&(u, v, _)| (u, v)));
        let out_weights = edges.iter().map(|&(_, _, w)| w).collect();
        let mut rev: Vec<(NodeId, NodeId, u32)> = edges.iter().map(|&(u, v, w)| (v, u, w)).collect();
        rev.sort_unstable();
        let inc = Csr::from_sorted(n, rev.iter().map(|&(v, u, _)| (v, u)));
        let in_weights = rev.iter().map(|&(_, _, w)| w).collect();
        RetweetNetwork {
            users,
            out,
            out_weights,
            inc,
            in_weights,
        }
    }

    /// Builds a network from named weighted edges, checking each against the
    /// follower network.
    pub fn from_weighted_edges(
        follower: &FollowerNetwork,
        edges: &[(String, String, u32)],
    ) -> Result<Self, NetworkError> {
        let users = follower.users();
        let mut ids = Vec::with_capacity(edges.len());
        for (u, v, w) in edges {
            let ui = users.id(u).ok_or_else(|| NetworkError::UnknownUser(u.clone()))?;
            let vi = users.id(v).ok_or_else(|| NetworkError::UnknownUser(v.clone()))?;
            if !follower.has_edge(ui, vi) {
                return Err(NetworkError::NotInFollowerNetwork(u.clone(), v.clone()));
            }
            if *w == 0 {
                return Err(NetworkError::ZeroWeight(u.clone(), v.clone()));
            }
            ids.push((ui, vi, *w));
        }
        ids.sort_unstable();
        if let Some(pair) = ids.windows(2).find(|p| (p[0].0, p[0].1) == (p[1].0, p[1].1)) {
            return Err(NetworkError::DuplicateEdge(
                users.name(pair[0].0).to_string(),
                users.name(pair[0].1).to_string(),
            ));
        }
        Ok(Self::from_sorted_edges(users.clone(), ids))
    }

    pub fn users(&self) -> &Arc<UserTable> {
        &self.users
    }

    pub fn node_count(&self) -> usize {
        self.users.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.targets.len()
    }

    /// `kappa_u`: number of distinct followees retweeted.
    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out.range(u).len()
    }

    /// `kappa'_u`: number of distinct followers retweeting `u`.
    pub fn in_degree(&self, u: NodeId) -> usize {
        self.inc.range(u).len()
    }

    /// `s_u`
    pub fn out_strength(&self, u: NodeId) -> u64 {
        self.out_weights[self.out.range(u)].iter().map(|&w| w as u64).sum()
    }

    /// `s'_u`
    pub fn in_strength(&self, u: NodeId) -> u64 {
        self.in_weights[self.inc.range(u)].iter().map(|&w| w as u64).sum()
    }

    /// Out-neighbors of `u` with weights, sorted by neighbor id.
    pub fn out_edges(&self, u: NodeId) -> impl Iterator<Item = (NodeId, u32)> + '_ {
        let r = self.out.range(u);
        self.out.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.out_weights[r].iter().copied())
    }

    /// In-neighbors of `u` with weights, sorted by neighbor id.
    pub fn in_edges(&self, u: NodeId) -> impl Iterator<Item = (NodeId, u32)> + '_ {
        let r = self.inc.range(u);
        self.inc.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.in_weights[r].iter().copied())
    }

    pub fn out_weights(&self, u: NodeId) -> &[u32] {
        &self.out_weights[self.out.range(u)]
    }

    pub fn in_weights(&self, u: NodeId) -> &[u32] {
        &self.in_weights[self.inc.range(u)]
    }

    pub fn weight(&self, u: NodeId, v: NodeId) -> Option<u32> {
        let r = self.out.range(u);
        self.out.targets[r.clone()]
            .binary_search(&v)
            .ok()
            .map(|i| self.out_weights[r.start + i])
    }

    pub fn weight_named(&self, u: &str, v: &str) -> Option<u32> {
        self.weight(self.users.id(u)?, self.users.id(v)?)
    }

    /// All edges `(u, v, w)` sorted by `(u, v)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, u32)> + '_ {
        (0..self.node_count() as NodeId)
            .flat_map(move |u| self.out_edges(u).map(move |(v, w)| (u, v, w)))
    }

    /// Named edges, sorted by user name pair.
    pub fn named_edges(&self) -> BTreeMap<(String, String), u32> {
        self.edges()
            .map(|(u, v, w)| {
                (
                    (self.users.name(u).to_string(), self.users.name(v).to_string()),
                    w,
                )
            })
            .collect()
    }

    /// Nodes with at least one incident retweet edge.
    pub fn active_nodes(&self) -> Vec<NodeId> {
        (0..self.node_count() as NodeId)
            .filter(|&u| self.out_degree(u) + self.in_degree(u) > 0)
            .collect()
    }

    /// Headerless `u,v,w` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), NetworkError> {
        write_weighted_edges(
            self.edges()
                .map(|(u, v, w)| (self.users.name(u), self.users.name(v), w)),
            out,
        )
    }
}

pub fn write_weighted_edges<'a, W: Write>(
    edges: impl Iterator<Item = (&'a str, &'a str, u32)>,
    out: W,
) -> Result<(), NetworkError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for (u, v, weight) in edges {
        w.write_record([u, v, weight.to_string().as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads headerless `u,v,w` CSV. Any malformed line is an error.
pub fn read_weighted_edges<R: Read>(source: R) -> Result<Vec<(String, String, u32)>, NetworkError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(source);
    let mut edges = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(NetworkError::Malformed {
                line,
                reason: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let w: u32 = record[2].parse().map_err(|_| NetworkError::Malformed {
            line,
            reason: format!("bad weight `{}`", &record[2]),
        })?;
        edges.push((record[0].to_string(), record[1].to_string(), w));
    }
    Ok(edges)
}

/// Builds `R_[start,end)` on top of the follower network.
///
/// Events outside the window are ignored on both sides of the match, and
/// events by users unknown to the follower network never create edges.
pub fn build_retweet_network(
    follower: &FollowerNetwork,
    events: &[Event],
    window: TimeWindow,
) -> RetweetNetwork {
    let users = follower.users();

    let mut content_ids: HashMap<&str, u32> = HashMap::new();
    // (content, user, ts) for every in-window event by a known user.
    let mut touches: Vec<(u32, NodeId, i64)> = Vec::new();
    // (user, content, ts) for retweets only.
    let mut retweets: Vec<(NodeId, u32, i64)> = Vec::new();
    for e in events {
        if !window.contains(e.timestamp) {
            continue;
        }
        let Some(u) = users.id(&e.user) else { continue };
        let next = content_ids.len() as u32;
        let c = *content_ids.entry(e.content_id.as_str()).or_insert(next);
        touches.push((c, u, e.timestamp));
        if e.kind == EventKind::Retweet {
            retweets.push((u, c, e.timestamp));
        }
    }

    // Keep each user's earliest touch per content.
    touches.par_sort_unstable();
    touches.dedup_by(|b, a| a.0 == b.0 && a.1 == b.1);
    let n_content = content_ids.len();
    let mut offsets = vec![0usize; n_content + 1];
    for &(c, _, _) in &touches {
        offsets[c as usize + 1] += 1;
    }
    for i in 0..n_content {
        offsets[i + 1] += offsets[i];
    }
    // `by_user[c]` is sorted by user; `by_time[c]` by (ts, user).
    let by_user: Vec<(NodeId, i64)> = touches.iter().map(|&(_, u, t)| (u, t)).collect();
    let mut by_time: Vec<(i64, NodeId)> = touches.iter().map(|&(_, u, t)| (t, u)).collect();
    for c in 0..n_content {
        by_time[offsets[c]..offsets[c + 1]].sort_unstable();
    }

    retweets.par_sort_unstable();
    let mut starts = Vec::new();
    for (i, r) in retweets.iter().enumerate() {
        if i == 0 || retweets[i - 1].0 != r.0 {
            starts.push(i);
        }
    }
    starts.push(retweets.len());

    let rows: Vec<Vec<(NodeId, NodeId, u32)>> = starts
        .par_windows(2)
        .map(|span| {
            let group = &retweets[span[0]..span[1]];
            let u = group[0].0;
            let followees = follower.followees(u);
            let mut counts = vec![0u32; followees.len()];
            for &(_, c, t) in group {
                let range = offsets[c as usize]..offsets[c as usize + 1];
                let timeline = &by_time[range.clone()];
                let earlier = timeline.partition_point(|&(ts, _)| ts < t);
                if earlier <= followees.len() {
                    for &(_, v) in &timeline[..earlier] {
                        if let Ok(pos) = followees.binary_search(&v) {
                            counts[pos] += 1;
                        }
                    }
                } else {
                    let touched = &by_user[range];
                    for (pos, &v) in followees.iter().enumerate() {
                        if let Ok(i) = touched.binary_search_by_key(&v, |&(x, _)| x) {
                            if touched[i].1 < t {
                                counts[pos] += 1;
                            }
                        }
                    }
                }
            }
            followees
                .iter()
                .zip(counts)
                .filter(|&(_, w)| w > 0)
                .map(|(&v, w)| (u, v, w))
                .collect()
        })
        .collect();

    let edges: Vec<(NodeId, NodeId, u32)> = rows.into_iter().flatten().collect();
    debug_assert!(edges.len() <= follower.edge_count());
    RetweetNetwork::from_sorted_edges(users.clone(), edges)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Activity {
    pub n_tw: u64,
    pub n_rt: u64,
}

impl Activity {
    pub fn n(&self) -> u64 {
        self.n_tw + self.n_rt
    }
}

/// Per-user tweet and retweet counts inside the window. Users without
/// events are absent.
pub fn activity_counts(events: &[Event], window: TimeWindow) -> BTreeMap<String, Activity> {
    let mut counts: HashMap<&str, Activity> = HashMap::new();
    for e in events.iter().filter(|e| window.contains(e.timestamp)) {
        let a = counts.entry(e.user.as_str()).or_default();
        match e.kind {
            EventKind::Tweet => a.n_tw += 1,
            EventKind::Retweet => a.n_rt += 1,
        }
    }
    counts
        .into_iter()
        .map(|(u, a)| (u.to_string(), a))
        .collect()
}

/// Writes `user,k,k_in,kappa,kappa_in,s,s_in,n_tw,n_rt` over the union of
/// network nodes and active users, sorted by user.
pub fn write_node_table<W: Write>(
    follower: &FollowerNetwork,
    retweet: &RetweetNetwork,
    activity: &BTreeMap<String, Activity>,
    out: W,
) -> Result<(), NetworkError> {
    let mut names: Vec<&str> = follower.users().names().iter().map(String::as_str).collect();
    names.extend(activity.keys().map(String::as_str));
    names.sort_unstable();
    names.dedup();

    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "user", "k", "k_in", "kappa", "kappa_in", "s", "s_in", "n_tw", "n_rt",
    ])?;
    for name in names {
        let act = activity.get(name).copied().unwrap_or_default();
        let deg = match follower.users().id(name) {
            Some(u) => [
                follower.out_degree(u) as u64,
                follower.in_degree(u) as u64,
                retweet.out_degree(u) as u64,
                retweet.in_degree(u) as u64,
                retweet.out_strength(u),
                retweet.in_strength(u),
            ],
            None => [0; 6],
        };
        let mut row = vec![name.to_string()];
        row.extend(deg.iter().map(u64::to_string));
        row.push(act.n_tw.to_string());
        row.push(act.n_rt.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
