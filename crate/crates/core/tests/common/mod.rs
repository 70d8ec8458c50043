//! Independent reference implementations used by the integration suites.
//! None of these call into the code paths they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::{Command, Output};

use attnet::ingest::{Event, EventKind, FollowEdge, TimeWindow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Literal per-link timeline scan: for every follower link `u -> v`, count
/// the retweets by `u` such that `v` has an event on the same content
/// strictly earlier, both inside the window.
pub fn naive_retweet_network(
    follows: &[FollowEdge],
    events: &[Event],
    window: TimeWindow,
) -> BTreeMap<(String, String), u32> {
    let links: BTreeSet<(String, String)> = follows
        .iter()
        .filter(|e| e.follower != e.followee)
        .map(|e| (e.follower.clone(), e.followee.clone()))
        .collect();
    let inside = |e: &Event| e.timestamp >= window.start && e.timestamp < window.end;
    let mut out = BTreeMap::new();
    for (u, v) in &links {
        let mut w = 0;
        for eu in events {
            if &eu.user != u || eu.kind != EventKind::Retweet || !inside(eu) {
                continue;
            }
            let enabled = events.iter().any(|ev| {
                &ev.user == v
                    && ev.content_id == eu.content_id
                    && inside(ev)
                    && ev.timestamp < eu.timestamp
            });
            if enabled {
                w += 1;
            }
        }
        if w > 0 {
            out.insert((u.clone(), v.clone()), w);
        }
    }
    out
}

/// Small random instance with shared content, timestamp ties and
/// retweets along non-follower links.
pub fn random_instance(seed: u64) -> (Vec<FollowEdge>, Vec<Event>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_users = rng.random_range(2..=50);
    let n_events = rng.random_range(0..=500);
    let n_content = rng.random_range(1..=60);
    let density = rng.random_range(0.02..0.4);
    let name = |i: usize| format!("p{i}");
    let mut follows = Vec::new();
    for u in 0..n_users {
        for v in 0..n_users {
            if u != v && rng.random::<f64>() < density {
                follows.push(FollowEdge::new(name(u), name(v)));
            }
        }
    }
    let mut events = Vec::new();
    for _ in 0..n_events {
        let kind = if rng.random::<f64>() < 0.6 {
            EventKind::Retweet
        } else {
            EventKind::Tweet
        };
        let user = name(rng.random_range(0..n_users + 3));
        let ts = rng.random_range(0..200);
        let content = format!("c{}", rng.random_range(0..n_content));
        events.push(Event::new(user, ts, kind, content, Vec::<String>::new()).unwrap());
    }
    (follows, events)
}

/// Sum of squared shares, computed term by term in input order.
pub fn brute_hhi(weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for w in weights {
        total += w;
    }
    let mut h = 0.0;
    for w in weights {
        let share = w / total;
        h += share * share;
    }
    h
}

/// Textbook two-pass covariance correlation.
pub fn two_pass_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
    let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0);
    let vy = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0);
    cov / (vx.sqrt() * vy.sqrt())
}

/// `(1 - p)^(k - 1)` by repeated multiplication.
pub fn brute_alpha(p: f64, k: usize) -> f64 {
    if k == 1 {
        return 0.0;
    }
    let mut a = 1.0;
    for _ in 0..k - 1 {
        a *= 1.0 - p;
    }
    a
}

/// Incoming-orientation disparity filter on a named edge list: returns the
/// retained edges.
pub fn brute_backbone_incoming(
    edges: &BTreeMap<(String, String), u32>,
    alpha: f64,
) -> BTreeSet<(String, String)> {
    let mut by_target: BTreeMap<&str, Vec<(&str, u32)>> = BTreeMap::new();
    for ((u, v), &w) in edges {
        by_target.entry(v.as_str()).or_default().push((u.as_str(), w));
    }
    let mut kept = BTreeSet::new();
    for (v, ins) in by_target {
        let strength: u32 = ins.iter().map(|&(_, w)| w).sum();
        for &(u, w) in &ins {
            let p = w as f64 / strength as f64;
            if brute_alpha(p, ins.len()) < alpha {
                kept.insert((u.to_string(), v.to_string()));
            }
        }
    }
    kept
}

/// Brute-force sweep: R between backbone in-degree and `attention` over
/// nodes with at least one incoming edge, per alpha. Returns the curve and
/// the argmax (first maximum in grid order).
pub fn brute_sweep(
    edges: &BTreeMap<(String, String), u32>,
    attention: &BTreeMap<String, f64>,
    grid: &[f64],
) -> (Vec<Option<f64>>, Option<f64>) {
    let targets: BTreeSet<&str> = edges.keys().map(|(_, v)| v.as_str()).collect();
    let nodes: Vec<&str> = targets.into_iter().filter(|v| attention.contains_key(*v)).collect();
    let mut curve = Vec::new();
    for &alpha in grid {
        let kept = brute_backbone_incoming(edges, alpha);
        let deg: Vec<f64> = nodes
            .iter()
            .map(|v| kept.iter().filter(|(_, t)| t == v).count() as f64)
            .collect();
        let att: Vec<f64> = nodes.iter().map(|v| attention[*v]).collect();
        let constant = |xs: &[f64]| xs.iter().all(|&x| x == xs[0]);
        if nodes.len() < 3 || constant(&deg) || constant(&att) {
            curve.push(None);
        } else {
            curve.push(Some(two_pass_pearson(&deg, &att)));
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for (&alpha, r) in grid.iter().zip(&curve) {
        if let Some(r) = *r {
            if best.is_none_or(|(_, br)| r > br) {
                best = Some((alpha, r));
            }
        }
    }
    (curve, best.map(|(a, _)| a))
}

/// Runs the `attnet` binary.
pub fn attnet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attnet"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("attnet runs")
}

pub fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

/// The two-user timeline of the retweet-construction figure: `u` follows
/// `v`; `v` tweets Θi and `u` retweets it later; `u` retweets Θj before `v`
/// posts it; `v` retweets Θl and `u` retweets it later.
pub const FIGURE_ONE_EVENTS: &str = concat!(
    r#"{"user":"v","ts":100,"kind":"tweet","id":"theta_i","tags":["a"]}"#,
    "\n",
    r#"{"user":"u","ts":110,"kind":"retweet","id":"theta_i","tags":["a"]}"#,
    "\n",
    r#"{"user":"u","ts":200,"kind":"retweet","id":"theta_j","tags":["b"]}"#,
    "\n",
    r#"{"user":"v","ts":210,"kind":"tweet","id":"theta_j","tags":["b"]}"#,
    "\n",
    r#"{"user":"v","ts":300,"kind":"retweet","id":"theta_l","tags":["a"]}"#,
    "\n",
    r#"{"user":"u","ts":310,"kind":"retweet","id":"theta_l","tags":["a"]}"#,
    "\n",
);
