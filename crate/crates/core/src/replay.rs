//! Single-message replay over a contact trace.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, BubbleState};
use crate::error::{Error, Result};
use crate::trace::{NodeId, Time, Trace};
use crate::tracking::GroupTimeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MessageSpec {
    pub origin: NodeId,
    pub destination: NodeId,
    pub send_time: Time,
    pub ttl: Time,
}

impl MessageSpec {
    pub fn deadline(&self) -> Time {
        self.send_time + self.ttl
    }

    pub fn validate(&self, trace: &Trace) -> Result<()> {
        check_endpoint(trace, self.origin, self.send_time, self.ttl)?;
        if self.destination.index() >= trace.node_count() {
            return Err(Error::InvalidArgument(format!(
                "destination {} out of range",
                self.destination.0
            )));
        }
        if self.origin == self.destination {
            return Err(Error::InvalidArgument(
                "origin and destination coincide".into(),
            ));
        }
        Ok(())
    }
}

fn check_endpoint(trace: &Trace, origin: NodeId, send_time: Time, ttl: Time) -> Result<()> {
    if origin.index() >= trace.node_count() {
        return Err(Error::InvalidArgument(format!(
            "origin {} out of range",
            origin.0
        )));
    }
    if ttl <= 0 {
        return Err(Error::InvalidArgument("ttl must be positive".into()));
    }
    if send_time < 0 || send_time > trace.span_end() {
        return Err(Error::InvalidArgument(format!(
            "send time {send_time} outside trace span [0, {}]",
            trace.span_end()
        )));
    }
    Ok(())
}

/// Forwarding rule applied at every contact between a carrier and a
/// node without the message.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Forwarding list frozen at send time.
    GroupsNet { forwarding: &'a BTreeSet<NodeId> },
    Bubble { state: &'a BubbleState },
    Flooding,
}

impl Policy<'_> {
    fn decide(&self, carrier: NodeId, encountered: NodeId, destination: NodeId) -> bool {
        match self {
            Policy::GroupsNet { forwarding } => {
                encountered == destination || forwarding.contains(&encountered)
            }
            Policy::Bubble { state } => {
                baselines::bubble_forward_decision(carrier, encountered, destination, state)
            }
            Policy::Flooding => baselines::flood_decision(false),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transmission {
    pub time: Time,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimRun {
    pub spec: MessageSpec,
    pub delivered_at: Option<Time>,
    pub transmissions: Vec<Transmission>,
    pub carriers: BTreeSet<NodeId>,
}

impl SimRun {
    pub fn delivered(&self) -> bool {
        self.delivered_at.is_some()
    }

    /// `time,from,to` transcript with original node ids.
    pub fn write_transcript<W: Write>(&self, trace: &Trace, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,from,to")?;
        for t in &self.transmissions {
            writeln!(
                w,
                "{},{},{}",
                t.time,
                trace.original_id(t.from),
                trace.original_id(t.to)
            )?;
        }
        Ok(())
    }
}

/// Streams the contacts starting in `[send, send + ttl]`. A contact is an
/// opportunity when exactly one endpoint holds a copy and that endpoint is
/// not the sink; `decide(carrier, other)` gates the hand-over.
fn propagate<F>(
    trace: &Trace,
    origin: NodeId,
    send_time: Time,
    ttl: Time,
    sink: Option<NodeId>,
    mut decide: F,
) -> (Vec<bool>, Vec<Transmission>)
where
    F: FnMut(NodeId, NodeId) -> bool,
{
    let mut has = vec![false; trace.node_count()];
    has[origin.index()] = true;
    let mut sent = Vec::new();
    for e in trace.events_between(send_time, send_time + ttl) {
        let (carrier, other) = match (has[e.a.index()], has[e.b.index()]) {
            (true, false) => (e.a, e.b),
            (false, true) => (e.b, e.a),
            _ => continue,
        };
        if Some(carrier) == sink {
            continue;
        }
        if decide(carrier, other) {
            has[other.index()] = true;
            sent.push(Transmission {
                time: e.start,
                from: carrier,
                to: other,
            });
        }
    }
    (has, sent)
}

/// Replays one message. The destination keeps its copy and does not relay.
pub fn replay_message(trace: &Trace, spec: &MessageSpec, policy: Policy<'_>) -> Result<SimRun> {
    spec.validate(trace)?;
    let dest = spec.destination;
    let (has, transmissions) = propagate(
        trace,
        spec.origin,
        spec.send_time,
        spec.ttl,
        Some(dest),
        |c, o| policy.decide(c, o, dest),
    );
    let delivered_at = transmissions.iter().find(|t| t.to == dest).map(|t| t.time);
    Ok(SimRun {
        spec: *spec,
        delivered_at,
        transmissions,
        carriers: collect_carriers(&has),
    })
}

fn collect_carriers(has: &[bool]) -> BTreeSet<NodeId> {
    has.iter()
        .enumerate()
        .filter(|(_, &h)| h)
        .map(|(i, _)| NodeId(i as u32))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CogroupOutcome {
    /// `None` when the class is empty.
    pub ratio_cogroup: Option<f64>,
    pub ratio_other: Option<f64>,
    pub cogroup_size: usize,
    pub other_size: usize,
    pub cogroup_reached: usize,
    pub other_reached: usize,
}

/// Nodes that shared a group meeting with `origin` in `[from, to)`.
pub fn cogroup_members(timelines: &[GroupTimeline], origin: NodeId, from: Time, to: Time) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    for m in timelines.iter().flat_map(|t| &t.meetings) {
        if m.time >= from && m.time < to && m.members.binary_search(&origin).is_ok() {
            out.extend(m.members.iter().copied());
        }
    }
    out.remove(&origin);
    out
}

/// Floods from `origin` with no destination and compares how often past
/// group-mates are reached versus everyone else.
pub fn epidemic_cogroup_experiment(
    trace: &Trace,
    timelines: &[GroupTimeline],
    origin: NodeId,
    send_time: Time,
    lookback: Time,
    ttl: Time,
) -> Result<CogroupOutcome> {
    check_endpoint(trace, origin, send_time, ttl)?;
    if lookback <= 0 {
        return Err(Error::InvalidArgument("lookback must be positive".into()));
    }
    let co = cogroup_members(timelines, origin, send_time - lookback, send_time);
    let (has, _) = propagate(trace, origin, send_time, ttl, None, |_, _| true);
    let (mut cs, mut cr, mut os, mut or) = (0, 0, 0, 0);
    for v in trace.nodes().filter(|&v| v != origin) {
        let reached = has[v.index()] as usize;
        if co.contains(&v) {
            cs += 1;
            cr += reached;
        } else {
            os += 1;
            or += reached;
        }
    }
    let ratio = |r: usize, s: usize| (s > 0).then(|| r as f64 / s as f64);
    Ok(CogroupOutcome {
        ratio_cogroup: ratio(cr, cs),
        ratio_other: ratio(or, os),
        cogroup_size: cs,
        other_size: os,
        cogroup_reached: cr,
        other_reached: or,
    })
}
