//! Seeded message experiments, confidence-interval curves and snowball
//! subsetting.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::baselines::{self, BubbleParams, BubbleState};
use crate::cpm::CpmParams;
use crate::error::{Error, Result};
use crate::regularity::median;
use crate::replay::{self, MessageSpec, Policy};
use crate::routing;
use crate::slicing::{SlicingParams, WeightMode};
use crate::trace::{NodeId, Time, Trace, DAY, HOUR};
use crate::tracking::{self, GroupTimeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    GroupsNet,
    Bubble,
    Flooding,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::GroupsNet, PolicyKind::Bubble, PolicyKind::Flooding];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::GroupsNet => "groupsnet",
            PolicyKind::Bubble => "bubble",
            PolicyKind::Flooding => "flooding",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "groupsnet" | "groups-net" => Ok(PolicyKind::GroupsNet),
            "bubble" | "bubblerap" | "bubble-rap" => Ok(PolicyKind::Bubble),
            "flooding" | "flood" => Ok(PolicyKind::Flooding),
            other => Err(Error::Config(format!("unknown policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BubbleTraining {
    /// State trained on the lookback before each send time (day-aligned).
    Causal,
    /// One state trained on the entire trace.
    WholeTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_messages: usize,
    pub n_seeds: usize,
    pub ttl: Time,
    pub lookback: Time,
    pub policies: Vec<PolicyKind>,
    pub grid_step: Time,
    /// Earliest send time; messages start in `[warmup, span_end - ttl]`.
    pub warmup: Time,
    pub master_seed: u64,
    pub slicing: SlicingParams,
    pub cpm: CpmParams,
    pub bubble: BubbleParams,
    pub bubble_training: BubbleTraining,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_messages: 500,
            n_seeds: 8,
            ttl: 7 * DAY,
            lookback: 21 * DAY,
            policies: PolicyKind::ALL.to_vec(),
            grid_step: HOUR,
            warmup: 0,
            master_seed: 1,
            slicing: SlicingParams::count(),
            cpm: CpmParams::default(),
            bubble: BubbleParams::default(),
            bubble_training: BubbleTraining::Causal,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_messages == 0 {
            return Err(Error::Config("n_messages must be at least 1".into()));
        }
        if self.n_seeds < 2 {
            return Err(Error::Config("n_seeds must be at least 2 for intervals".into()));
        }
        if self.ttl <= 0 || self.lookback <= 0 || self.grid_step <= 0 {
            return Err(Error::Config("ttl, lookback and grid step must be positive".into()));
        }
        if self.warmup < 0 {
            return Err(Error::Config("warmup must be non-negative".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("no policies selected".into()));
        }
        Ok(())
    }

    /// Bubble Rap reuses the slicing weight mode and threshold.
    pub fn bubble_params(&self) -> BubbleParams {
        BubbleParams {
            w_th: self.slicing.w_th,
            weight_mode: self.slicing.weight_mode,
            k: self.cpm.k,
            clique_cap: self.cpm.clique_cap,
            ..self.bubble
        }
    }
}

/// Stream seed `index` of `master`, via one splitmix64 step over
/// `master + (index + 1) * golden_gamma`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform origin/destination pairs with send times in `[0, span_end - ttl]`.
pub fn sample_messages(trace: &Trace, n: usize, ttl: Time, seed: u64) -> Result<Vec<MessageSpec>> {
    sample_messages_from(trace, n, ttl, 0, seed)
}

/// As [`sample_messages`], with send times no earlier than `earliest`.
pub fn sample_messages_from(
    trace: &Trace,
    n: usize,
    ttl: Time,
    earliest: Time,
    seed: u64,
) -> Result<Vec<MessageSpec>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if ttl <= 0 {
        return Err(Error::InvalidArgument("ttl must be positive".into()));
    }
    let latest = trace.span_end() - ttl;
    if latest < earliest.max(0) {
        return Err(Error::InvalidArgument(format!(
            "trace span {} too short for ttl {ttl} after {earliest}",
            trace.span_end()
        )));
    }
    let nodes = trace.node_count() as u32;
    if nodes < 2 {
        return Err(Error::InvalidArgument("need at least two nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let o = rng.random_range(0..nodes);
            let mut d = rng.random_range(0..nodes - 1);
            if d >= o {
                d += 1;
            }
            MessageSpec {
                origin: NodeId(o),
                destination: NodeId(d),
                send_time: rng.random_range(earliest.max(0)..=latest),
                ttl,
            }
        })
        .collect())
}

/// Outcome of one message under one policy, times relative to send.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageOutcome {
    pub seed_index: usize,
    pub spec: MessageSpec,
    pub delivery_delay: Option<Time>,
    pub transmission_delays: Vec<Time>,
    /// Groups on the GROUPS-NET route, when one was found.
    pub route_groups: Option<usize>,
}

impl MessageOutcome {
    pub fn transmissions(&self) -> usize {
        self.transmission_delays.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurve {
    pub times: Vec<Time>,
    pub mean: Vec<f64>,
    pub ci95_low: Vec<f64>,
    pub ci95_high: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCurves {
    pub delivery_ratio: MetricCurve,
    pub cumulative_transmissions: MetricCurve,
    pub benefit_cost: MetricCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub seeds: Vec<u64>,
    pub curves: BTreeMap<PolicyKind, PolicyCurves>,
    pub outcomes: BTreeMap<PolicyKind, Vec<MessageOutcome>>,
}

impl ExperimentResult {
    /// Mean transmissions per message over the whole TTL.
    pub fn mean_transmissions(&self, policy: PolicyKind) -> Option<f64> {
        let o = self.outcomes.get(&policy)?;
        Some(o.iter().map(|m| m.transmissions() as f64).sum::<f64>() / o.len() as f64)
    }

    pub fn delivery_ratio(&self, policy: PolicyKind) -> Option<f64> {
        let o = self.outcomes.get(&policy)?;
        Some(o.iter().filter(|m| m.delivery_delay.is_some()).count() as f64 / o.len() as f64)
    }
}

/// Mean and two-sided 95% Student-t interval of `xs` (n >= 2).
pub fn mean_ci95(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, mean, mean);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return (mean, mean, mean);
    }
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let half = t * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

/// Aligns a send time down to the slicing grid so only completed windows
/// inform the route.
fn planning_time(send: Time, tw: Time) -> Time {
    send.div_euclid(tw) * tw
}

fn bubble_window(send: Time, lookback: Time) -> (Time, Time) {
    let to = send.div_euclid(DAY) * DAY;
    (to - lookback, to)
}

struct Prepared {
    timelines: Vec<GroupTimeline>,
    bubble: BTreeMap<(Time, Time), BubbleState>,
}

fn prepare(trace: &Trace, cfg: &ExperimentConfig, specs: &[MessageSpec]) -> Result<Prepared> {
    let timelines = if cfg.policies.contains(&PolicyKind::GroupsNet) {
        tracking::timelines_from_trace(trace, &cfg.slicing, &cfg.cpm)?
    } else {
        Vec::new()
    };
    let mut windows: BTreeSet<(Time, Time)> = BTreeSet::new();
    if cfg.policies.contains(&PolicyKind::Bubble) {
        match cfg.bubble_training {
            BubbleTraining::WholeTrace => {
                windows.insert((0, trace.span_end() + 1));
            }
            BubbleTraining::Causal => {
                windows.extend(specs.iter().map(|s| bubble_window(s.send_time, cfg.lookback)));
            }
        }
    }
    let params = cfg.bubble_params();
    let states: Vec<((Time, Time), BubbleState)> = windows
        .into_par_iter()
        .map(|w| baselines::build_bubble_state(trace, w.0, w.1, &params).map(|s| (w, s)))
        .collect::<Result<_>>()?;
    Ok(Prepared {
        timelines,
        bubble: states.into_iter().collect(),
    })
}

fn run_one(
    trace: &Trace,
    cfg: &ExperimentConfig,
    prep: &Prepared,
    policy: PolicyKind,
    seed_index: usize,
    spec: &MessageSpec,
) -> Result<MessageOutcome> {
    let mut route_groups = None;
    let run = match policy {
        PolicyKind::Flooding => replay::replay_message(trace, spec, Policy::Flooding)?,
        PolicyKind::Bubble => {
            let key = match cfg.bubble_training {
                BubbleTraining::WholeTrace => (0, trace.span_end() + 1),
                BubbleTraining::Causal => bubble_window(spec.send_time, cfg.lookback),
            };
            let state = &prep.bubble[&key];
            replay::replay_message(trace, spec, Policy::Bubble { state })?
        }
        PolicyKind::GroupsNet => {
            let now = planning_time(spec.send_time, cfg.slicing.tw);
            let route = routing::plan_route(
                &prep.timelines,
                spec.origin,
                spec.destination,
                now,
                cfg.lookback,
                spec.ttl,
            )?;
            route_groups = route.as_ref().map(|r| r.len());
            // Without a route only a direct contact with the destination delivers.
            let list = routing::forwarding_list(route.as_ref(), spec.destination);
            replay::replay_message(trace, spec, Policy::GroupsNet { forwarding: &list })?
        }
    };
    let delivery_delay = run.delivered_at.map(|t| t - spec.send_time);
    let transmission_delays = run.transmissions.iter().map(|t| t.time - spec.send_time).collect();
    Ok(MessageOutcome {
        seed_index,
        spec: *spec,
        delivery_delay,
        transmission_delays,
        route_groups,
    })
}

/// Curve grid `0, step, ..., ttl` (last point clamped to the TTL).
pub fn time_grid(ttl: Time, step: Time) -> Vec<Time> {
    let mut g: Vec<Time> = (0..).map(|k| k * step).take_while(|&t| t < ttl).collect();
    g.push(ttl);
    g
}

fn curves_for(outcomes: &[MessageOutcome], n_seeds: usize, grid: &[Time]) -> PolicyCurves {
    let mut by_seed: Vec<Vec<&MessageOutcome>> = vec![Vec::new(); n_seeds];
    for o in outcomes {
        by_seed[o.seed_index].push(o);
    }
    let mut dr = Vec::with_capacity(grid.len());
    let mut tx = Vec::with_capacity(grid.len());
    let mut bc = Vec::with_capacity(grid.len());
    for &t in grid {
        let mut dr_s = Vec::with_capacity(n_seeds);
        let mut tx_s = Vec::with_capacity(n_seeds);
        let mut bc_s = Vec::with_capacity(n_seeds);
        for msgs in &by_seed {
            let n = msgs.len() as f64;
            let delivered = msgs
                .iter()
                .filter(|m| m.delivery_delay.is_some_and(|d| d <= t))
                .count() as f64
                / n;
            let sent = msgs
                .iter()
                .map(|m| m.transmission_delays.partition_point(|&d| d <= t) as f64)
                .sum::<f64>()
                / n;
            dr_s.push(delivered);
            tx_s.push(sent);
            bc_s.push(if sent == 0.0 { 0.0 } else { delivered / sent });
        }
        dr.push(mean_ci95(&dr_s));
        tx.push(mean_ci95(&tx_s));
        bc.push(mean_ci95(&bc_s));
    }
    let curve = |v: Vec<(f64, f64, f64)>| MetricCurve {
        times: grid.to_vec(),
        mean: v.iter().map(|x| x.0).collect(),
        ci95_low: v.iter().map(|x| x.1).collect(),
        ci95_high: v.iter().map(|x| x.2).collect(),
    };
    PolicyCurves {
        delivery_ratio: curve(dr),
        cumulative_transmissions: curve(tx),
        benefit_cost: curve(bc),
    }
}

/// Replays `n_messages` per seed under every configured policy.
pub fn run_experiment(trace: &Trace, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    cfg.slicing.validate_for(trace)?;
    let seeds: Vec<u64> = (0..cfg.n_seeds as u64)
        .map(|i| derive_seed(cfg.master_seed, i))
        .collect();
    let mut jobs: Vec<(usize, MessageSpec)> = Vec::with_capacity(cfg.n_seeds * cfg.n_messages);
    for (si, &seed) in seeds.iter().enumerate() {
        for spec in sample_messages_from(trace, cfg.n_messages, cfg.ttl, cfg.warmup, seed)? {
            jobs.push((si, spec));
        }
    }
    let specs: Vec<MessageSpec> = jobs.iter().map(|j| j.1).collect();
    let prep = prepare(trace, cfg, &specs)?;

    let mut policies = cfg.policies.clone();
    policies.sort();
    policies.dedup();
    let grid = time_grid(cfg.ttl, cfg.grid_step);
    let mut curves = BTreeMap::new();
    let mut outcomes = BTreeMap::new();
    for &p in &policies {
        let out: Vec<MessageOutcome> = jobs
            .par_iter()
            .map(|(si, spec)| run_one(trace, cfg, &prep, p, *si, spec))
            .collect::<Result<_>>()?;
        curves.insert(p, curves_for(&out, cfg.n_seeds, &grid));
        outcomes.insert(p, out);
    }
    Ok(ExperimentResult {
        seeds,
        curves,
        outcomes,
    })
}

/// `t_hours,mean,ci_low,ci_high,policy` rows for one metric.
pub fn write_curve_csv<W, F>(result: &ExperimentResult, pick: F, mut w: W) -> std::io::Result<()>
where
    W: Write,
    F: Fn(&PolicyCurves) -> &MetricCurve,
{
    writeln!(w, "t_hours,mean,ci_low,ci_high,policy")?;
    for (p, c) in &result.curves {
        let m = pick(c);
        for i in 0..m.times.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                m.times[i] as f64 / HOUR as f64,
                m.mean[i],
                m.ci95_low[i],
                m.ci95_high[i],
                p
            )?;
        }
    }
    Ok(())
}

/// Weighted degree of every node in the aggregated contact graph, with
/// the neighbor count alongside.
fn aggregated_degrees(trace: &Trace, mode: WeightMode) -> (Vec<i64>, Vec<BTreeSet<NodeId>>) {
    let n = trace.node_count();
    let mut strength = vec![0i64; n];
    let mut adj: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
    for e in trace.events() {
        let w = match mode {
            WeightMode::Count => 1,
            WeightMode::Duration => e.duration(),
        };
        strength[e.a.index()] += w;
        strength[e.b.index()] += w;
        adj[e.a.index()].insert(e.b);
        adj[e.b.index()].insert(e.a);
    }
    (strength, adj)
}

/// Nodes picked by snowball accretion, in pick order.
///
/// Starts at the most central node (weighted degree, then neighbor count,
/// then smaller id) and grows layer by layer, taking each layer's unseen
/// neighbors in centrality order. When the component runs out, the next
/// most central unpicked node seeds a new layer.
pub fn snowball_order(trace: &Trace, target_n: usize, mode: WeightMode) -> Result<Vec<NodeId>> {
    let n = trace.node_count();
    if target_n > n {
        return Err(Error::InvalidArgument(format!(
            "target {target_n} exceeds node count {n}"
        )));
    }
    let (strength, adj) = aggregated_degrees(trace, mode);
    let rank = |v: &NodeId| (std::cmp::Reverse(strength[v.index()]), std::cmp::Reverse(adj[v.index()].len()), *v);
    let mut by_centrality: Vec<NodeId> = trace.nodes().collect();
    by_centrality.sort_by_key(rank);

    let mut picked = vec![false; n];
    let mut order = Vec::with_capacity(target_n);
    let mut restart = by_centrality.iter();
    let mut layer: VecDeque<NodeId> = VecDeque::new();
    while order.len() < target_n {
        if layer.is_empty() {
            let seed = *restart
                .by_ref()
                .find(|v| !picked[v.index()])
                .expect("unpicked node remains");
            picked[seed.index()] = true;
            order.push(seed);
            layer.push_back(seed);
            continue;
        }
        let mut next: Vec<NodeId> = Vec::new();
        for v in layer.drain(..) {
            for &u in &adj[v.index()] {
                if !picked[u.index()] {
                    picked[u.index()] = true;
                    next.push(u);
                }
            }
        }
        next.sort_by_key(rank);
        for u in next {
            if order.len() == target_n {
                break;
            }
            order.push(u);
            layer.push_back(u);
        }
    }
    Ok(order)
}

/// Trace restricted to a snowball subset of `target_n` nodes.
pub fn snowball_subset(trace: &Trace, target_n: usize) -> Result<Trace> {
    let mode = match trace.duration_mode() {
        crate::trace::DurationMode::Interval => WeightMode::Duration,
        crate::trace::DurationMode::Instantaneous => WeightMode::Count,
    };
    let keep: BTreeSet<NodeId> = snowball_order(trace, target_n, mode)?.into_iter().collect();
    Ok(trace.restrict(&keep))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub size: usize,
    pub policy: PolicyKind,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub delivery_ratio: f64,
    /// Mean groups per found GROUPS-NET route.
    pub mean_route_groups: Option<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Runs the experiment on snowball subsets of each size.
pub fn overhead_scaling(trace: &Trace, sizes: &[usize], cfg: &ExperimentConfig) -> Result<Vec<ScalingPoint>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("sizes must be strictly ascending".into()));
    }
    let mut points = Vec::new();
    for &size in sizes {
        let sub = snowball_subset(trace, size)?;
        let res = run_experiment(&sub, cfg)?;
        for (&policy, outs) in &res.outcomes {
            let mut tx: Vec<f64> = outs.iter().map(|o| o.transmissions() as f64).collect();
            let mean = tx.iter().sum::<f64>() / tx.len() as f64;
            let med = median(&mut tx).unwrap_or(0.0);
            let routes: Vec<f64> = outs.iter().filter_map(|o| o.route_groups.map(|g| g as f64)).collect();
            points.push(ScalingPoint {
                size,
                policy,
                mean,
                q1: quantile(&tx, 0.25),
                median: med,
                q3: quantile(&tx, 0.75),
                delivery_ratio: res.delivery_ratio(policy).unwrap_or(0.0),
                mean_route_groups: (policy == PolicyKind::GroupsNet && !routes.is_empty())
                    .then(|| routes.iter().sum::<f64>() / routes.len() as f64),
            });
        }
    }
    Ok(points)
}

/// `size,policy,mean,q1,median,q3,delivery_ratio,mean_route_groups` rows.
pub fn write_scaling_csv<W: Write>(points: &[ScalingPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "size,policy,mean,q1,median,q3,delivery_ratio,mean_route_groups")?;
    for p in points {
        let rg = p.mean_route_groups.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            p.size, p.policy, p.mean, p.q1, p.median, p.q3, p.delivery_ratio, rg
        )?;
    }
    Ok(())
}

/// Hex SHA-256 of the canonical CSV form of the trace.
pub fn trace_sha256(trace: &Trace) -> String {
    let digest = Sha256::digest(trace.to_csv_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
