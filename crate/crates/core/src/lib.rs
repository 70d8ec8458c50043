//! Potential- and actual-attention networks from timestamped social-media
//! event logs.
//!
//! The pipeline reads events and follower edges ([`ingest`]), builds the
//! follower and retweet networks ([`network`]), measures how each user
//! concentrates attention ([`metrics`]), compares that reduction with the
//! disparity-filter backbone ([`backbone`]) and produces report tables
//! ([`stats`]). [`synth`] generates seeded datasets with planted structure
//! and [`cli`] drives everything from files.

pub mod backbone;
pub mod cli;
pub mod ingest;
pub mod metrics;
pub mod network;
pub mod stats;
pub mod synth;

pub use backbone::{alpha_sweep, edge_alpha, extract_backbone, pearson, Orientation};
pub use ingest::{filter_window, parse_events, parse_follow_edges, Event, EventKind, FollowEdge, TimeWindow};
pub use metrics::{attentional_degree, hhi, social_attention, UserMetrics};
pub use network::{activity_counts, build_follower_network, build_retweet_network, FollowerNetwork, RetweetNetwork};
