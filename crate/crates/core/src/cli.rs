//! File-based batch pipeline behind the `attnet` binary.
//!
//! Every subcommand reads CSV/JSONL inputs, writes CSV/JSON outputs into
//! `--out`, and records a `manifest.json` with the flags and SHA-256 hashes
//! of everything it read and wrote. Output bytes never depend on
//! `--threads`.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 data-quality failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::backbone::{self, default_alpha_grid, Orientation};
use crate::ingest::{self, EventFormat, ParseReport, TimeWindow};
use crate::metrics::{self, HapaxMode, HashtagSource, MetricsOptions};
use crate::network::{self, FollowerNetwork, RetweetNetwork};
use crate::stats::{self, ActivityBins, MetricField};
use crate::synth::{self, SynthConfig};

pub const FOLLOWER_FILE: &str = "follower.csv";
pub const RETWEET_FILE: &str = "retweet.csv";
pub const NODES_FILE: &str = "nodes.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "attnet", version, about = "Attention networks from social-media event logs")]
pub struct Cli {
    /// Worker threads; affects runtime only.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for random sampling (overrides the synth config seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build follower and retweet networks from events and follow edges.
    Build(BuildArgs),
    /// Compute the per-user metrics table.
    Metrics(MetricsArgs),
    /// Extract a disparity-filter backbone or sweep its alpha.
    Backbone(BackboneArgs),
    /// Produce report tables and summary.json from a metrics table.
    Report(ReportArgs),
    /// Generate a synthetic dataset from a JSON config.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Clone, Copy)]
pub struct WindowArgs {
    /// Window start, epoch seconds (inclusive).
    #[arg(long = "from", default_value_t = 0)]
    pub from: i64,
    /// Window end, epoch seconds (exclusive).
    #[arg(long = "to", default_value_t = i64::MAX)]
    pub to: i64,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub follows: PathBuf,
    /// Event file format; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Largest tolerated share of rejected lines per input file.
    #[arg(long, default_value_t = 0.01)]
    pub max_reject_fraction: f64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Directory written by `build`.
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
    #[command(flatten)]
    pub window: WindowArgs,
    /// `retweets` or `all`.
    #[arg(long, default_value = "retweets")]
    pub hashtag_source: String,
    /// Count only non-hapax hashtags in kappa_s.
    #[arg(long)]
    pub kappa_s_drop_hapax: bool,
    /// Random pairs for the hashtag-similarity comparison (default: retweet edge count).
    #[arg(long)]
    pub jaccard_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BackboneArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// Significance level in (0, 1).
    #[arg(long, conflicts_with = "sweep")]
    pub alpha: Option<f64>,
    /// Sweep alpha over a grid and report the best value.
    #[arg(long)]
    pub sweep: bool,
    /// Comma-separated alpha grid (default 0.025..0.975 step 0.025).
    #[arg(long, requires = "sweep")]
    pub grid: Option<String>,
    /// Endpoint at which the filter evaluates shares: `in` or `out`.
    #[arg(long, default_value = "in")]
    pub orientation: String,
    /// Side used for the attentional degree in the sweep (default: same as --orientation).
    #[arg(long)]
    pub attention_orientation: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub metrics: PathBuf,
    /// Activity bin boundaries, e.g. `1,40,200,600,6107`.
    #[arg(long)]
    pub bins: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub bins_per_decade: u32,
    #[arg(long, default_value = "a")]
    pub x: String,
    #[arg(long, default_value = "a_s")]
    pub y: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        CliError {
            code: 2,
            error: error.into(),
        }
    }

    pub fn data_quality(error: impl Into<anyhow::Error>) -> Self {
        CliError {
            code: 3,
            error: error.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl std::error::Error for CliError {}

impl From<anyhow::Error> for CliError {
    fn from(error: anyhow::Error) -> Self {
        CliError::usage(error)
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

/// Accumulates the reproducibility record for one run.
struct Run {
    out: PathBuf,
    command: &'static str,
    flags: BTreeMap<String, Value>,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
    extra: BTreeMap<String, Value>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Run {
    fn new(out: &Path, command: &'static str) -> CliResult<Self> {
        fs::create_dir_all(out)
            .with_context(|| format!("cannot create output directory {}", out.display()))?;
        Ok(Run {
            out: out.to_path_buf(),
            command,
            flags: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            extra: BTreeMap::new(),
        })
    }

    fn flag(&mut self, name: &str, value: impl Serialize) {
        self.flags
            .insert(name.to_string(), serde_json::to_value(value).expect("serializable flag"));
    }

    fn read_input(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes =
            fs::read(path).with_context(|| format!("cannot read input {}", path.display()))?;
        self.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    fn write_output<F>(&mut self, name: &str, fill: F) -> CliResult<()>
    where
        F: FnOnce(&mut Vec<u8>) -> anyhow::Result<()>,
    {
        let mut buf = Vec::new();
        fill(&mut buf).with_context(|| format!("cannot serialize {name}"))?;
        let path = self.out.join(name);
        fs::write(&path, &buf).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(FileHash {
            path: name.to_string(),
            sha256: sha256_hex(&buf),
        });
        Ok(())
    }

    fn finish(self) -> CliResult<()> {
        let manifest = json!({
            "tool": "attnet",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "flags": self.flags,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "details": self.extra,
        });
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.out.join(MANIFEST_FILE);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

fn window_of(args: WindowArgs) -> CliResult<TimeWindow> {
    TimeWindow::new(args.from, args.to).map_err(CliError::usage)
}

fn event_format(explicit: Option<&str>, path: &Path) -> CliResult<EventFormat> {
    match explicit {
        Some(f) => f.parse().map_err(CliError::usage),
        None => Ok(match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => EventFormat::Csv,
            _ => EventFormat::Jsonl,
        }),
    }
}

fn check_quality(what: &str, report: &ParseReport, max_fraction: f64) -> CliResult<()> {
    if report.rejected_fraction() > max_fraction {
        let first = report
            .rejections
            .first()
            .map(|r| format!(" (first: line {}: {})", r.line, r.reason))
            .unwrap_or_default();
        return Err(CliError::data_quality(anyhow!(
            "{what}: {} of {} lines rejected, above the {max_fraction} threshold{first}",
            report.rejected,
            report.lines_read
        )));
    }
    Ok(())
}

fn parse_orientation(s: &str) -> CliResult<Orientation> {
    s.parse().map_err(|e: String| CliError::usage(anyhow!(e)))
}

fn load_network(run: &mut Run, dir: &Path) -> CliResult<(FollowerNetwork, RetweetNetwork)> {
    let follower_bytes = run.read_input(&dir.join(FOLLOWER_FILE))?;
    let (edges, report) = ingest::parse_follow_edges(follower_bytes.as_slice()).map_err(CliError::usage)?;
    if report.rejected > 0 {
        return Err(CliError::data_quality(anyhow!(
            "{FOLLOWER_FILE}: {} malformed lines",
            report.rejected
        )));
    }
    let follower = network::build_follower_network(&edges);
    let retweet_bytes = run.read_input(&dir.join(RETWEET_FILE))?;
    let weighted = network::read_weighted_edges(retweet_bytes.as_slice()).map_err(CliError::data_quality)?;
    let retweet = RetweetNetwork::from_weighted_edges(&follower, &weighted).map_err(CliError::data_quality)?;
    Ok((follower, retweet))
}

fn required_out(cli: &Cli) -> CliResult<PathBuf> {
    cli.out
        .clone()
        .ok_or_else(|| CliError::usage(anyhow!("--out is required")))
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    let out = required_out(&cli)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage(anyhow!("--threads must be >= 1")));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::usage(anyhow!(e)))?;
    pool.install(|| match &cli.command {
        Command::Build(args) => cmd_build(args, &out),
        Command::Metrics(args) => cmd_metrics(args, cli.seed, &out),
        Command::Backbone(args) => cmd_backbone(args, &out),
        Command::Report(args) => cmd_report(args, &out),
        Command::Synth(args) => cmd_synth(args, cli.seed, &out),
    })
}

pub fn cmd_build(args: &BuildArgs, out: &Path) -> CliResult<()> {
    let window = window_of(args.window)?;
    let format = event_format(args.format.as_deref(), &args.events)?;
    let mut run = Run::new(out, "build")?;
    run.flag("window", window);
    run.flag("format", format!("{format:?}").to_lowercase());
    run.flag("max_reject_fraction", args.max_reject_fraction);

    let event_bytes = run.read_input(&args.events)?;
    let follow_bytes = run.read_input(&args.follows)?;
    let (events, event_report) = ingest::parse_events(event_bytes.as_slice(), format).map_err(CliError::usage)?;
    let (edges, follow_report) = ingest::parse_follow_edges(follow_bytes.as_slice()).map_err(CliError::usage)?;
    check_quality("events", &event_report, args.max_reject_fraction)?;
    check_quality("follows", &follow_report, args.max_reject_fraction)?;

    let follower = network::build_follower_network(&edges);
    let retweet = network::build_retweet_network(&follower, &events, window);
    let activity = network::activity_counts(&events, window);

    run.write_output(FOLLOWER_FILE, |w| Ok(follower.write_csv(w)?))?;
    run.write_output(RETWEET_FILE, |w| Ok(retweet.write_csv(w)?))?;
    run.write_output(NODES_FILE, |w| {
        Ok(network::write_node_table(&follower, &retweet, &activity, w)?)
    })?;
    run.extra.insert("events_report".into(), json!(event_report));
    run.extra.insert("follows_report".into(), json!(follow_report));
    run.extra.insert(
        "counts".into(),
        json!({
            "users": follower.node_count(),
            "edges_follower": follower.edge_count(),
            "edges_retweet": retweet.edge_count(),
        }),
    );
    run.finish()
}

pub fn cmd_metrics(args: &MetricsArgs, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let window = window_of(args.window)?;
    let format = event_format(args.format.as_deref(), &args.events)?;
    let source: HashtagSource = args
        .hashtag_source
        .parse()
        .map_err(|e: String| CliError::usage(anyhow!(e)))?;
    let hapax_mode = if args.kappa_s_drop_hapax {
        HapaxMode::Drop
    } else {
        HapaxMode::Keep
    };
    let seed = seed.unwrap_or(0);
    let mut run = Run::new(out, "metrics")?;
    run.flag("window", window);
    run.flag("hashtag_source", source);
    run.flag("kappa_s_hapax", hapax_mode);
    run.flag("seed", seed);

    let (follower, retweet) = load_network(&mut run, &args.network)?;
    let event_bytes = run.read_input(&args.events)?;
    let (events, report) = ingest::parse_events(event_bytes.as_slice(), format).map_err(CliError::usage)?;
    if report.rejected > 0 {
        eprintln!("warning: {} malformed event lines skipped", report.rejected);
    }
    let activity = network::activity_counts(&events, window);
    let outside = activity
        .keys()
        .filter(|u| follower.users().id(u).is_none())
        .count();
    if outside > 0 {
        eprintln!(
            "warning: {outside} users in the event log are not in the network; they are left out"
        );
    }
    let profiles = metrics::hashtag_profiles(&events, window, source);
    let rows = metrics::compute_user_metrics(
        &follower,
        &retweet,
        &activity,
        &profiles,
        MetricsOptions {
            hashtag_source: source,
            hapax_mode,
        },
    );
    run.write_output(METRICS_FILE, |w| Ok(metrics::write_metrics_csv(&rows, w)?))?;

    let samples = args.jaccard_samples.unwrap_or(retweet.edge_count());
    let tag_sets: BTreeMap<String, _> = profiles.iter().map(|(u, p)| (u.clone(), p.tags())).collect();
    match metrics::jaccard_comparison(&retweet, &tag_sets, samples, seed) {
        Ok(cmp) => {
            run.write_output("jaccard_ccdf.csv", |w| {
                let mut csv = csv::Writer::from_writer(w);
                csv.write_record(["pairs", "jaccard", "fraction_ge"])?;
                for (label, dist) in [("connected", &cmp.connected_ccdf), ("random", &cmp.random_ccdf)] {
                    for (v, f) in dist {
                        csv.write_record([label.to_string(), v.to_string(), f.to_string()])?;
                    }
                }
                csv.flush()?;
                Ok(())
            })?;
            run.extra.insert(
                "jaccard".into(),
                json!({
                    "connected_pairs": cmp.connected.len(),
                    "connected_mean": cmp.connected_mean(),
                    "random_pairs": cmp.random.len(),
                    "random_mean": cmp.random_mean(),
                }),
            );
        }
        Err(e) => eprintln!("warning: hashtag similarity skipped: {e}"),
    }
    run.finish()
}

pub fn cmd_backbone(args: &BackboneArgs, out: &Path) -> CliResult<()> {
    let orientation = parse_orientation(&args.orientation)?;
    let attention_orientation = match &args.attention_orientation {
        Some(s) => parse_orientation(s)?,
        None => orientation,
    };
    if args.alpha.is_none() && !args.sweep {
        return Err(CliError::usage(anyhow!("either --alpha or --sweep is required")));
    }
    let grid = match &args.grid {
        Some(g) => g
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::usage(anyhow!("bad --grid: {e}")))?,
        None => default_alpha_grid(),
    };
    if let Some(alpha) = args.alpha {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CliError::usage(anyhow!("--alpha {alpha} outside (0, 1)")));
        }
    }

    let mut run = Run::new(out, "backbone")?;
    run.flag("orientation", orientation);
    let (_, retweet) = load_network(&mut run, &args.network)?;

    let alpha = if args.sweep {
        run.flag("grid", &grid);
        run.flag("attention_orientation", attention_orientation);
        let attentional: BTreeMap<String, f64> = metrics::attentional_degrees(&retweet, attention_orientation)
            .into_iter()
            .enumerate()
            .filter_map(|(u, a)| Some((retweet.users().name(u as u32).to_string(), a?)))
            .collect();
        let sweep = backbone::alpha_sweep(&retweet, &attentional, &grid, orientation)
            .map_err(CliError::usage)?;
        run.write_output("sweep.csv", |w| Ok(sweep.write_csv(w)?))?;
        run.extra.insert("best_alpha".into(), json!(sweep.best_alpha));
        match sweep.best_alpha {
            Some(a) => {
                println!("best_alpha={a}");
                Some(a)
            }
            None => {
                eprintln!("warning: no grid point had a defined correlation");
                None
            }
        }
    } else {
        args.alpha
    };

    if let Some(alpha) = alpha {
        run.flag("alpha", alpha);
        let bb = backbone::extract_backbone(&retweet, alpha, orientation).map_err(CliError::usage)?;
        run.write_output("backbone.csv", |w| Ok(bb.write_csv(w)?))?;
        run.extra.insert(
            "backbone".into(),
            json!({ "alpha": alpha, "edges_retained": bb.edges.len(), "edges_total": retweet.edge_count() }),
        );
    }
    run.finish()
}

fn write_ccdf(values: &[f64], w: &mut Vec<u8>) -> anyhow::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["value", "fraction_ge"])?;
    for (v, f) in stats::ccdf(values) {
        csv.write_record([v.to_string(), f.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

fn write_ratio_boxes(rows: &[stats::RatioBin], w: &mut Vec<u8>) -> anyhow::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "range", "n", "q1", "median", "q3", "whisker_low", "whisker_high", "outliers",
    ])?;
    for row in rows {
        let mut rec = vec![row.range.clone(), row.ratios.len().to_string()];
        match row.stats {
            Some(s) => rec.extend(
                [s.q1, s.median, s.q3, s.whisker_low, s.whisker_high]
                    .iter()
                    .map(f64::to_string)
                    .chain([s.outlier_count.to_string()]),
            ),
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

fn field(s: &str) -> CliResult<MetricField> {
    s.parse().map_err(CliError::usage)
}

pub fn cmd_report(args: &ReportArgs, out: &Path) -> CliResult<()> {
    let bins = match &args.bins {
        Some(b) => b.parse::<ActivityBins>().map_err(CliError::usage)?,
        None => ActivityBins::default(),
    };
    let (x, y) = (field(&args.x)?, field(&args.y)?);
    if args.bins_per_decade == 0 {
        return Err(CliError::usage(anyhow!("--bins-per-decade must be >= 1")));
    }
    let mut run = Run::new(out, "report")?;
    run.flag("bins", bins.boundaries());
    run.flag("bins_per_decade", args.bins_per_decade);
    run.flag("x", x.name());
    run.flag("y", y.name());

    let bytes = run.read_input(&args.metrics)?;
    let rows = metrics::read_metrics_csv(bytes.as_slice()).map_err(CliError::data_quality)?;

    let roles = stats::classify_roles(&rows);
    run.write_output("quadrants.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["user", "quadrant"])?;
        for (u, q) in &roles {
            csv.write_record([u.as_str(), q.name()])?;
        }
        csv.flush()?;
        Ok(())
    })?;

    let correlations = stats::binned_correlation(&rows, x, y, &bins);
    run.write_output("binned_correlation.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["range", "n_users", "R", "p_value"])?;
        for c in &correlations {
            let (r, p) = c
                .correlation
                .map(|c| (c.r.to_string(), c.p_value.to_string()))
                .unwrap_or_default();
            csv.write_record([c.range.clone(), c.n_users.to_string(), r, p])?;
        }
        csv.flush()?;
        Ok(())
    })?;

    use MetricField::*;
    for f in [K, KIn, Kappa, KappaIn, A, KappaS, ASemantic, N, RtBalance, FBalance] {
        let values: Vec<f64> = rows.iter().filter_map(|m| f.get(m)).collect();
        run.write_output(&format!("ccdf_{}.csv", f.name()), |w| write_ccdf(&values, w))?;
    }

    let heatmaps = [
        (A, K),
        (A, Kappa),
        (ASemantic, KappaS),
        (A, ASemantic),
        (x, y),
    ];
    let mut seen = std::collections::BTreeSet::new();
    for (hx, hy) in heatmaps {
        if !seen.insert((hx.name(), hy.name())) {
            continue;
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter_map(|m| Some((hx.get(m)?, hy.get(m)?)))
            .unzip();
        let hist = stats::log_histogram2d(&xs, &ys, args.bins_per_decade).map_err(CliError::usage)?;
        run.write_output(&format!("heatmap_{}_{}.csv", hx.name(), hy.name()), |w| {
            Ok(hist.write_csv(w)?)
        })?;
    }

    let social = stats::attention_ratio_vs_activity(&rows, A, Kappa, &bins);
    run.write_output("boxplot_a_over_kappa.csv", |w| write_ratio_boxes(&social, w))?;
    let semantic = stats::attention_ratio_vs_activity(&rows, ASemantic, KappaS, &bins);
    run.write_output("boxplot_a_s_over_kappa_s.csv", |w| write_ratio_boxes(&semantic, w))?;

    let summary = stats::summarize(&rows, &roles, &correlations);
    run.write_output("summary.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        w.write_all(b"\n")?;
        Ok(())
    })?;
    run.finish()
}

pub fn cmd_synth(args: &SynthArgs, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let mut run = Run::new(out, "synth")?;
    let bytes = run.read_input(&args.config)?;
    let mut config: SynthConfig = serde_json::from_slice(&bytes)
        .with_context(|| format!("bad synth config {}", args.config.display()))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    run.flag("seed", config.seed);
    let data = synth::generate(&config).map_err(CliError::usage)?;
    run.write_output("events.jsonl", |w| Ok(ingest::write_events_jsonl(&data.events, w)?))?;
    run.write_output("follows.csv", |w| Ok(ingest::write_follow_edges(&data.follows, w)?))?;
    run.write_output("ground_truth.csv", |w| Ok(data.write_ground_truth(w)?))?;
    run.extra.insert(
        "counts".into(),
        json!({ "users": config.n_users, "follow_edges": data.follows.len(), "events": data.events.len() }),
    );
    run.finish()
}
