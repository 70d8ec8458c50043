//! Seeded synthetic datasets with planted attention structure.
//!
//! Every user follows a set of followees and splits retweets among them
//! with planted shares: `concentration` mixes an even split (0) with a
//! single favorite (1), or `planted_shares` fixes the split directly. Each
//! retweet targets a fresh tweet posted by the chosen followee one second
//! earlier, so the retweet network recovers the planted counts exactly.
//!
//! The random stream is ChaCha8 seeded with `seed`; fixtures are portable as
//! long as the generator family and draw order stay fixed.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Event, EventKind, FollowEdge};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FolloweeCount {
    Fixed(usize),
    Uniform { min: usize, max: usize },
}

impl FolloweeCount {
    fn max(self) -> usize {
        match self {
            FolloweeCount::Fixed(k) => k,
            FolloweeCount::Uniform { max, .. } => max,
        }
    }

    fn min(self) -> usize {
        match self {
            FolloweeCount::Fixed(k) => k,
            FolloweeCount::Uniform { min, .. } => min,
        }
    }
}

fn default_retweet_fraction() -> f64 {
    0.8
}

fn default_communities() -> usize {
    4
}

fn default_start_ts() -> i64 {
    1_451_606_400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    pub followees_per_user: FolloweeCount,
    /// 0 splits retweets evenly over followees, 1 sends all to one favorite.
    pub concentration: f64,
    /// Actions per user; each is a retweet with probability
    /// `retweet_fraction`, otherwise a standalone tweet.
    pub events_per_user: usize,
    pub hashtag_pool: usize,
    pub tags_per_event: usize,
    /// Probability that a followee or a hashtag is drawn from the user's
    /// own community.
    pub homophily: f64,
    pub seed: u64,
    #[serde(default = "default_retweet_fraction")]
    pub retweet_fraction: f64,
    #[serde(default = "default_communities")]
    pub communities: usize,
    /// Overrides `concentration`; length must equal the followee count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_shares: Option<Vec<f64>>,
    #[serde(default = "default_start_ts")]
    pub start_ts: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 100,
            followees_per_user: FolloweeCount::Fixed(10),
            concentration: 0.5,
            events_per_user: 50,
            hashtag_pool: 40,
            tags_per_event: 2,
            homophily: 0.8,
            seed: 0,
            retweet_fraction: default_retweet_fraction(),
            communities: default_communities(),
            planted_shares: None,
            start_ts: default_start_ts(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.n_users < 2 {
            return bad("n_users must be >= 2");
        }
        let (lo, hi) = (self.followees_per_user.min(), self.followees_per_user.max());
        if lo < 1 || lo > hi {
            return bad("followees_per_user must be >= 1 with min <= max");
        }
        if hi >= self.n_users {
            return bad("followees_per_user must be < n_users");
        }
        if self.events_per_user < 1 || self.hashtag_pool < 1 || self.communities < 1 {
            return bad("events_per_user, hashtag_pool and communities must be >= 1");
        }
        if self.tags_per_event > self.hashtag_pool {
            return bad("tags_per_event must be <= hashtag_pool");
        }
        for (name, p) in [
            ("concentration", self.concentration),
            ("homophily", self.homophily),
            ("retweet_fraction", self.retweet_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::Invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.start_ts < 0 {
            return bad("start_ts must be >= 0");
        }
        if let Some(shares) = &self.planted_shares {
            if self.followees_per_user != FolloweeCount::Fixed(shares.len()) {
                return bad("planted_shares length must equal a fixed followees_per_user");
            }
            if shares.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || shares.iter().sum::<f64>() <= 0.0 {
                return bad("planted_shares must be non-negative with a positive sum");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub user: String,
    pub followees: Vec<String>,
    /// Planted retweet shares, aligned with `followees`, summing to 1.
    pub shares: Vec<f64>,
    pub expected_retweets: f64,
    pub expected_a: f64,
    /// Three standard deviations of the sampled attentional degree plus its
    /// finite-sample bias.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub follows: Vec<FollowEdge>,
    pub events: Vec<Event>,
    pub ground_truth: Vec<GroundTruth>,
}

impl SynthDataset {
    pub fn write_ground_truth<W: Write>(&self, out: W) -> Result<(), SynthError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user", "expected_a", "tolerance"])?;
        for g in &self.ground_truth {
            w.write_record([g.user.clone(), g.expected_a.to_string(), g.tolerance.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// `1 / sum(p^2)` for shares summing to 1.
pub fn planted_attentional_degree(shares: &[f64]) -> f64 {
    1.0 / shares.iter().map(|p| p * p).sum::<f64>()
}

/// Tolerance band for the attentional degree measured from `m` multinomial
/// draws over `shares`, by the delta method.
pub fn sampling_tolerance(shares: &[f64], m: f64) -> f64 {
    if m <= 0.0 {
        return f64::INFINITY;
    }
    let h: f64 = shares.iter().map(|p| p * p).sum();
    let cube: f64 = shares.iter().map(|p| p * p * p).sum();
    let var_h = (4.0 / m) * (cube - h * h).max(0.0);
    let sd_a = var_h.sqrt() / (h * h);
    let bias_a = (1.0 - h) / (m * h * h);
    3.0 * sd_a + bias_a + 1e-9
}

fn user_name(i: usize, width: usize) -> String {
    format!("u{i:0width$}")
}

struct Topics {
    pool: usize,
    communities: usize,
}

impl Topics {
    fn slice(&self, community: usize) -> std::ops::Range<usize> {
        let lo = community * self.pool / self.communities;
        let hi = (community + 1) * self.pool / self.communities;
        lo..hi
    }

    fn draw(&self, rng: &mut ChaCha8Rng, community: usize, homophily: f64, count: usize) -> Vec<String> {
        let own = self.slice(community);
        let mut picked: Vec<usize> = Vec::with_capacity(count);
        while picked.len() < count {
            let t = if !own.is_empty() && rng.random::<f64>() < homophily {
                rng.random_range(own.clone())
            } else {
                rng.random_range(0..self.pool)
            };
            if !picked.contains(&t) {
                picked.push(t);
            }
        }
        picked.into_iter().map(|t| format!("t{t}")).collect()
    }
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_users;
    let width = (n - 1).to_string().len();
    let names: Vec<String> = (0..n).map(|i| user_name(i, width)).collect();
    let community = |i: usize| i % config.communities;

    // Followees: each slot draws from the own community with probability
    // `homophily`, falling back to the other pool once one runs dry.
    let mut followees: Vec<Vec<usize>> = Vec::with_capacity(n);
    for u in 0..n {
        let k = match config.followees_per_user {
            FolloweeCount::Fixed(k) => k,
            FolloweeCount::Uniform { min, max } => rng.random_range(min..=max),
        };
        let (mut same, mut other): (Vec<usize>, Vec<usize>) =
            (0..n).filter(|&v| v != u).partition(|&v| community(v) == community(u));
        same.shuffle(&mut rng);
        other.shuffle(&mut rng);
        let mut chosen = Vec::with_capacity(k);
        while chosen.len() < k {
            let prefer_same = rng.random::<f64>() < config.homophily;
            let pick = match (prefer_same, same.is_empty(), other.is_empty()) {
                (true, false, _) | (false, false, true) => same.pop(),
                _ => other.pop(),
            };
            chosen.push(pick.expect("k < n_users"));
        }
        followees.push(chosen);
    }

    let shares: Vec<Vec<f64>> = followees
        .iter()
        .map(|f| match &config.planted_shares {
            Some(s) => {
                let total: f64 = s.iter().sum();
                s.iter().map(|x| x / total).collect()
            }
            None => {
                let k = f.len() as f64;
                (0..f.len())
                    .map(|i| {
                        let fav = if i == 0 { config.concentration } else { 0.0 };
                        (1.0 - config.concentration) / k + fav
                    })
                    .collect()
            }
        })
        .collect();
    let pickers: Vec<WeightedIndex<f64>> = shares
        .iter()
        .map(|s| WeightedIndex::new(s).expect("shares have a positive sum"))
        .collect();

    let mut actions: Vec<usize> = (0..n)
        .flat_map(|u| std::iter::repeat_n(u, config.events_per_user))
        .collect();
    actions.shuffle(&mut rng);

    let topics = Topics {
        pool: config.hashtag_pool,
        communities: config.communities,
    };
    let mut events = Vec::new();
    let mut ts = config.start_ts;
    let mut content = 0u64;
    for u in actions {
        let retweet = rng.random::<f64>() < config.retweet_fraction;
        if retweet {
            let v = followees[u][pickers[u].sample(&mut rng)];
            let tags = topics.draw(&mut rng, community(v), config.homophily, config.tags_per_event);
            let id = format!("c{content}");
            events.push(Event::new(&names[v], ts, EventKind::Tweet, &id, &tags).map_err(SynthError::Invalid)?);
            events.push(Event::new(&names[u], ts + 1, EventKind::Retweet, &id, &tags).map_err(SynthError::Invalid)?);
            ts += 2;
        } else {
            let tags = topics.draw(&mut rng, community(u), config.homophily, config.tags_per_event);
            let id = format!("c{content}");
            events.push(Event::new(&names[u], ts, EventKind::Tweet, &id, &tags).map_err(SynthError::Invalid)?);
            ts += 1;
        }
        content += 1;
    }

    let follows = followees
        .iter()
        .enumerate()
        .flat_map(|(u, fs)| fs.iter().map(move |&v| (u, v)))
        .map(|(u, v)| FollowEdge::new(&names[u], &names[v]))
        .collect();

    let m = config.events_per_user as f64 * config.retweet_fraction;
    let ground_truth = (0..n)
        .map(|u| {
            let s = &shares[u];
            GroundTruth {
                user: names[u].clone(),
                followees: followees[u].iter().map(|&v| names[v].clone()).collect(),
                shares: s.clone(),
                expected_retweets: m,
                expected_a: planted_attentional_degree(s),
                tolerance: sampling_tolerance(s, m),
            }
        })
        .collect();

    Ok(SynthDataset {
        follows,
        events,
        ground_truth,
    })
}
