//! Command-line pipelines.
//!
//! Every command that writes files also writes `manifest.json` holding the
//! resolved configuration, the trace hash and the tool version. Runs take a
//! single master seed; experiment seed `i` is `derive_seed(master, i)`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cpm::CpmParams;
use crate::error::{Error, Result};
use crate::experiment::{self, BubbleTraining, ExperimentConfig, PolicyKind};
use crate::regularity;
use crate::routing;
use crate::slicing::SlicingParams;
use crate::synth::{self, SynthConfig};
use crate::trace::{self, CsvSchema, IngestWarnings, NodeId, Time, Trace, DAY, HOUR};
use crate::tracking;

#[derive(Debug, Parser)]
#[command(name = "groupsnet", version, about = "Group-meeting analytics and forwarding experiments on contact traces")]
pub struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a contact CSV, write the canonical trace and a summary.
    Ingest(IngestArgs),
    /// Generate a synthetic group-structured trace.
    Synth(SynthArgs),
    /// Detect and track group meetings, write timelines and regularity reports.
    Groups(GroupsArgs),
    /// Dump the most probable group route for one origin/destination pair.
    Route(RouteArgs),
    /// Run seeded forwarding experiments.
    Simulate(SimulateArgs),
    /// Write snowball subsets of a trace.
    Subset(SubsetArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Contact CSV file.
    #[arg(long, conflicts_with = "synth_config")]
    pub trace: Option<PathBuf>,
    /// Synthetic generator config (TOML key = value).
    #[arg(long)]
    pub synth_config: Option<PathBuf>,
    #[arg(long, default_value = "a")]
    pub a_col: String,
    #[arg(long, default_value = "b")]
    pub b_col: String,
    #[arg(long, default_value = "start")]
    pub start_col: String,
    /// Optional end-time column; ignored when absent from the header.
    #[arg(long, default_value = "end")]
    pub end_col: String,
    /// Absolute time of the trace's zero.
    #[arg(long, default_value_t = 0)]
    pub epoch: Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightArg {
    Count,
    Duration,
}

#[derive(Debug, Clone, Args)]
pub struct GroupArgs {
    /// Window length in seconds.
    #[arg(long, default_value_t = HOUR)]
    pub tw: Time,
    /// Edge threshold (contacts, or seconds in duration mode). Defaults by mode.
    #[arg(long)]
    pub wth: Option<i64>,
    /// Edge weight mode. Defaults to duration for traces with end times.
    #[arg(long, value_enum)]
    pub weight: Option<WeightArg>,
    /// Clique size for percolation.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub synth_config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GroupsArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub groups: GroupArgs,
    /// Histogram bin for re-encounter and re-meeting PDFs, seconds.
    #[arg(long, default_value_t = HOUR)]
    pub bin: Time,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RouteArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub groups: GroupArgs,
    /// Original id of the origin node.
    #[arg(long)]
    pub origin: u64,
    /// Original id of the destination node.
    #[arg(long)]
    pub dest: u64,
    /// Send time in trace seconds.
    #[arg(long)]
    pub at: Time,
    #[arg(long, default_value_t = 21)]
    pub lookback_days: i64,
    #[arg(long, default_value_t = 168)]
    pub ttl_hours: i64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub groups: GroupArgs,
    #[arg(long, default_value_t = 500)]
    pub messages: usize,
    #[arg(long, default_value_t = 8)]
    pub seeds: usize,
    /// Comma-separated subset of groupsnet, bubble, flooding.
    #[arg(long, value_delimiter = ',', default_value = "groupsnet,bubble,flooding")]
    pub policies: Vec<String>,
    /// One or more TTLs in hours.
    #[arg(long, value_delimiter = ',', default_value = "168")]
    pub ttl_hours: Vec<i64>,
    #[arg(long, default_value_t = 21)]
    pub lookback_days: i64,
    /// Snowball subset sizes for the overhead-scaling report.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Bubble Rap C-Window length in hours.
    #[arg(long, default_value_t = 6)]
    pub cwin_hours: i64,
    /// Train Bubble Rap once on the whole trace instead of each message's lookback.
    #[arg(long)]
    pub bubble_whole_trace: bool,
    /// Earliest send time, days after the trace start.
    #[arg(long, default_value_t = 0)]
    pub warmup_days: i64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SubsetArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    let jobs = cli.jobs;
    let work = move || match cli.command {
        Command::Ingest(a) => cmd_ingest(&a).map(|_| ()),
        Command::Synth(a) => cmd_synth(&a).map(|_| ()),
        Command::Groups(a) => cmd_groups(&a).map(|_| ()),
        Command::Route(a) => cmd_route(&a).map(|_| ()),
        Command::Simulate(a) => cmd_simulate(&a).map(|_| ()),
        Command::Subset(a) => cmd_subset(&a).map(|_| ()),
    };
    match jobs {
        None => work(),
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub source: String,
    pub node_count: usize,
    pub event_count: usize,
    pub span_start: Time,
    pub span_end: Time,
    pub epoch: Time,
    pub duration_mode: String,
    pub sha256: String,
    pub warnings: IngestWarnings,
}

impl TraceSummary {
    fn new(trace: &Trace, source: String, warnings: IngestWarnings) -> Self {
        TraceSummary {
            source,
            node_count: trace.node_count(),
            event_count: trace.len(),
            span_start: trace.events().first().map(|e| e.start).unwrap_or(0),
            span_end: trace.span_end(),
            epoch: trace.epoch(),
            duration_mode: trace.duration_mode().to_string(),
            sha256: experiment::trace_sha256(trace),
            warnings,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    trace: &'a TraceSummary,
    config: C,
    outputs: Vec<String>,
}

fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &'static str,
    trace: &TraceSummary,
    config: C,
    outputs: &[String],
) -> Result<()> {
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        trace,
        config,
        outputs: outputs.to_vec(),
    };
    write_output(dir, "manifest.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &m)?;
        writeln!(w).map_err(|e| Error::io(dir.join("manifest.json"), e))
    })
}

fn write_output<F>(dir: &Path, name: &str, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(&path, e))
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Loads the trace named by `--trace` or generated from `--synth-config`.
pub fn load_source(src: &SourceArgs) -> Result<(Trace, TraceSummary)> {
    match (&src.trace, &src.synth_config) {
        (Some(path), None) => {
            let schema = CsvSchema {
                a_col: src.a_col.clone(),
                b_col: src.b_col.clone(),
                start_col: src.start_col.clone(),
                end_col: Some(src.end_col.clone()),
            };
            let ing = trace::ingest_csv(path, &schema, src.epoch)?;
            let summary = TraceSummary::new(&ing.trace, path.display().to_string(), ing.warnings);
            Ok((ing.trace, summary))
        }
        (None, Some(path)) => {
            let cfg = SynthConfig::from_file(path)?;
            let t = synth::generate_synthetic(&cfg)?;
            let summary = TraceSummary::new(&t, format!("synthetic:{}", path.display()), IngestWarnings::default());
            Ok((t, summary))
        }
        (None, None) => Err(Error::Config("one of --trace or --synth-config is required".into())),
        (Some(_), Some(_)) => Err(Error::Config("--trace and --synth-config are exclusive".into())),
    }
}

/// Slicing and CPM parameters from flags, with defaults chosen by trace mode.
pub fn group_params(args: &GroupArgs, trace: &Trace) -> Result<(SlicingParams, CpmParams)> {
    let base = match args.weight {
        None => SlicingParams::for_trace(trace),
        Some(WeightArg::Count) => SlicingParams::count(),
        Some(WeightArg::Duration) => SlicingParams::duration(),
    };
    let slicing = SlicingParams {
        tw: args.tw,
        w_th: args.wth.unwrap_or(base.w_th),
        weight_mode: base.weight_mode,
    };
    slicing.validate_for(trace)?;
    if args.k < 3 {
        return Err(Error::Config(format!("k must be at least 3, got {}", args.k)));
    }
    Ok((slicing, CpmParams::with_k(args.k)))
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<TraceSummary> {
    if args.source.trace.is_none() {
        return Err(Error::Config("ingest needs --trace".into()));
    }
    let (t, summary) = load_source(&args.source)?;
    prepare_out(&args.out)?;
    t.write_csv_file(args.out.join("trace.csv"))?;
    write_output(&args.out, "summary.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        Ok(())
    })?;
    Ok(summary)
}

#[derive(Serialize)]
struct SynthTruth<'a> {
    groups: &'a [synth::SynthGroup],
}

pub fn cmd_synth(args: &SynthArgs) -> Result<TraceSummary> {
    let mut cfg = match &args.synth_config {
        Some(p) => SynthConfig::from_file(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let gen = synth::generate_with_truth(&cfg)?;
    let summary = TraceSummary::new(&gen.trace, "synthetic".into(), IngestWarnings::default());
    prepare_out(&args.out)?;
    gen.trace.write_csv_file(args.out.join("trace.csv"))?;
    write_output(&args.out, "groups.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &SynthTruth { groups: &gen.groups })?;
        Ok(())
    })?;
    let outputs = vec!["trace.csv".to_string(), "groups.json".to_string()];
    write_manifest(&args.out, "synth", &summary, &cfg, &outputs)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupsReport {
    pub slicing: SlicingParams,
    pub cpm: CpmParams,
    pub bin: Time,
    pub timelines: usize,
    pub meetings: usize,
    pub median_r_squared: Option<f64>,
}

pub fn cmd_groups(args: &GroupsArgs) -> Result<GroupsReport> {
    if args.bin <= 0 {
        return Err(Error::Config("--bin must be positive".into()));
    }
    let (t, summary) = load_source(&args.source)?;
    let (slicing, cpm) = group_params(&args.groups, &t)?;
    let timelines = tracking::timelines_from_trace(&t, &slicing, &cpm)?;
    let fits = regularity::fit_all(&timelines);
    let mut r2: Vec<f64> = fits.iter().map(|(_, f)| f.r_squared).collect();
    let report = GroupsReport {
        slicing,
        cpm,
        bin: args.bin,
        timelines: timelines.len(),
        meetings: timelines.iter().map(|t| t.meetings.len()).sum(),
        median_r_squared: regularity::median(&mut r2),
    };

    let dir = &args.out;
    prepare_out(dir)?;
    write_output(dir, "timelines.json", |w| tracking::write_timelines_json(&timelines, w))?;
    let remeet = regularity::group_remeeting_pdf(&timelines, args.bin);
    let p = dir.join("group_remeeting_pdf.csv");
    write_output(dir, "group_remeeting_pdf.csv", |w| remeet.write_csv(w).map_err(io_at(&p)))?;
    let reenc = regularity::re_encounter_pdf(&t, args.bin);
    let p = dir.join("re_encounter_pdf.csv");
    write_output(dir, "re_encounter_pdf.csv", |w| reenc.write_csv(w).map_err(io_at(&p)))?;
    let hourly = regularity::hourly_contact_histogram(&t)?;
    let p = dir.join("hourly_contacts.csv");
    write_output(dir, "hourly_contacts.csv", |w| hourly.write_csv(w).map_err(io_at(&p)))?;
    let p = dir.join("poisson_fits.csv");
    write_output(dir, "poisson_fits.csv", |w| regularity::write_fits_csv(&fits, w).map_err(io_at(&p)))?;
    let outputs: Vec<String> = [
        "timelines.json",
        "group_remeeting_pdf.csv",
        "re_encounter_pdf.csv",
        "hourly_contacts.csv",
        "poisson_fits.csv",
    ]
    .map(String::from)
    .to_vec();
    write_manifest(dir, "groups", &summary, &report, &outputs)?;
    Ok(report)
}

fn node_by_original(t: &Trace, original: u64) -> Result<NodeId> {
    t.original_ids()
        .binary_search(&original)
        .map(|i| NodeId(i as u32))
        .map_err(|_| Error::InvalidArgument(format!("node {original} not in trace")))
}

#[derive(Debug, Clone, Serialize)]
pub struct RouteReport {
    pub origin: u64,
    pub destination: u64,
    pub at: Time,
    pub lookback: Time,
    pub ttl: Time,
    pub slicing: SlicingParams,
    pub cpm: CpmParams,
    pub found: bool,
    pub groups: Vec<usize>,
    pub probability: f64,
}

pub fn cmd_route(args: &RouteArgs) -> Result<RouteReport> {
    let (t, summary) = load_source(&args.source)?;
    let (slicing, cpm) = group_params(&args.groups, &t)?;
    let origin = node_by_original(&t, args.origin)?;
    let dest = node_by_original(&t, args.dest)?;
    let lookback = args.lookback_days * DAY;
    let ttl = args.ttl_hours * HOUR;
    let timelines = tracking::timelines_from_trace(&t, &slicing, &cpm)?;
    let recent = tracking::recent_groups(&timelines, args.at, lookback);
    let graph = routing::build_group_graph(&recent, lookback, ttl)?;
    let route = routing::most_probable_route(&graph, origin, dest);

    prepare_out(&args.out)?;
    let mut outputs = Vec::new();
    if let Some(r) = &route {
        write_output(&args.out, "route.json", |w| routing::write_route_json(&graph, r, w))?;
        outputs.push("route.json".to_string());
    }
    let report = RouteReport {
        origin: args.origin,
        destination: args.dest,
        at: args.at,
        lookback,
        ttl,
        slicing,
        cpm,
        found: route.is_some(),
        groups: route.as_ref().map(|r| r.groups.clone()).unwrap_or_default(),
        probability: route.as_ref().map(|r| r.probability).unwrap_or(0.0),
    };
    write_manifest(&args.out, "route", &summary, &report, &outputs)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
struct SimulateManifestConfig<'a> {
    master_seed: u64,
    ttls: &'a [Time],
    sizes: &'a [usize],
    experiment: &'a ExperimentConfig,
    seeds: &'a [u64],
}

/// Files written per TTL, relative to the output directory.
pub const CURVE_FILES: [&str; 3] = ["delivery_ratio.csv", "transmissions.csv", "benefit_cost.csv"];

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let (t, summary) = load_source(&args.source)?;
    let (slicing, cpm) = group_params(&args.groups, &t)?;
    let policies = args
        .policies
        .iter()
        .map(|p| p.parse())
        .collect::<Result<Vec<PolicyKind>>>()?;
    if args.ttl_hours.is_empty() || args.ttl_hours.iter().any(|&h| h <= 0) {
        return Err(Error::Config("--ttl-hours needs positive values".into()));
    }
    if args.cwin_hours <= 0 {
        return Err(Error::Config("--cwin-hours must be positive".into()));
    }
    let base = ExperimentConfig {
        n_messages: args.messages,
        n_seeds: args.seeds,
        ttl: args.ttl_hours[0] * HOUR,
        lookback: args.lookback_days * DAY,
        policies,
        grid_step: HOUR,
        warmup: args.warmup_days * DAY,
        master_seed: args.seed,
        slicing,
        cpm,
        bubble: experiment::ExperimentConfig::default().bubble,
        bubble_training: if args.bubble_whole_trace {
            BubbleTraining::WholeTrace
        } else {
            BubbleTraining::Causal
        },
    };
    let base = ExperimentConfig {
        bubble: crate::baselines::BubbleParams {
            cwin_len: args.cwin_hours * HOUR,
            ..base.bubble
        },
        ..base
    };
    base.validate()?;

    prepare_out(&args.out)?;
    let multi = args.ttl_hours.len() > 1;
    let mut outputs: Vec<String> = Vec::new();
    let mut seeds = Vec::new();
    for &h in &args.ttl_hours {
        let cfg = ExperimentConfig {
            ttl: h * HOUR,
            ..base.clone()
        };
        let res = experiment::run_experiment(&t, &cfg)?;
        seeds = res.seeds.clone();
        let sub = if multi { format!("ttl_{h}h") } else { String::new() };
        let dir = args.out.join(&sub);
        prepare_out(&dir)?;
        let rel = |name: &str| {
            if multi {
                format!("{sub}/{name}")
            } else {
                name.to_string()
            }
        };
        let picks: [fn(&experiment::PolicyCurves) -> &experiment::MetricCurve; 3] = [
            |c| &c.delivery_ratio,
            |c| &c.cumulative_transmissions,
            |c| &c.benefit_cost,
        ];
        for (name, pick) in CURVE_FILES.iter().zip(picks) {
            let p = dir.join(name);
            write_output(&dir, name, |w| experiment::write_curve_csv(&res, pick, w).map_err(io_at(&p)))?;
            outputs.push(rel(name));
        }
        if !args.sizes.is_empty() {
            let points = experiment::overhead_scaling(&t, &args.sizes, &cfg)?;
            let p = dir.join("overhead_scaling.csv");
            write_output(&dir, "overhead_scaling.csv", |w| {
                experiment::write_scaling_csv(&points, w).map_err(io_at(&p))
            })?;
            outputs.push(rel("overhead_scaling.csv"));
        }
    }
    let ttls: Vec<Time> = args.ttl_hours.iter().map(|h| h * HOUR).collect();
    let manifest = SimulateManifestConfig {
        master_seed: args.seed,
        ttls: &ttls,
        sizes: &args.sizes,
        experiment: &base,
        seeds: &seeds,
    };
    write_manifest(&args.out, "simulate", &summary, &manifest, &outputs)?;
    Ok(outputs.iter().map(|o| args.out.join(o)).collect())
}

pub fn cmd_subset(args: &SubsetArgs) -> Result<Vec<PathBuf>> {
    let (t, summary) = load_source(&args.source)?;
    prepare_out(&args.out)?;
    let mut outputs = Vec::new();
    for &n in &args.sizes {
        let sub = experiment::snowball_subset(&t, n)?;
        let name = format!("subset_{n}.csv");
        sub.write_csv_file(args.out.join(&name))?;
        outputs.push(name);
    }
    write_manifest(&args.out, "subset", &summary, &args.sizes, &outputs)?;
    Ok(outputs.iter().map(|o| args.out.join(o)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simulate_flags() {
        let cli = Cli::try_parse_from([
            "groupsnet",
            "--jobs",
            "2",
            "simulate",
            "--synth-config",
            "x.toml",
            "--policies",
            "flooding,bubble",
            "--ttl-hours",
            "24,168",
            "--sizes",
            "200,400",
            "--tw",
            "1800",
            "--wth",
            "3",
            "--k",
            "4",
            "--lookback-days",
            "14",
            "--messages",
            "10",
            "--seeds",
            "2",
            "--seed",
            "9",
            "--out",
            "o",
        ])
        .unwrap();
        assert_eq!(cli.jobs, Some(2));
        let Command::Simulate(a) = cli.command else { panic!("wrong subcommand") };
        assert_eq!(a.policies, vec!["flooding", "bubble"]);
        assert_eq!(a.ttl_hours, vec![24, 168]);
        assert_eq!(a.sizes, vec![200, 400]);
        assert_eq!((a.groups.tw, a.groups.wth, a.groups.k), (1800, Some(3), 4));
    }

    #[test]
    fn trace_and_synth_conflict() {
        assert!(Cli::try_parse_from([
            "groupsnet", "groups", "--trace", "a.csv", "--synth-config", "b.toml", "--out", "o"
        ])
        .is_err());
    }
}
