//! Seeded synthetic traces with daily and weekly group regularity.
//!
//! Each group gets one anchor hour of the day and one anchor weekday. On every
//! day of the horizon the group meets with `daily_meeting_prob`, raised by
//! `weekly_boost` on its anchor weekday. During a meeting every member pair
//! records a contact each `contact_interval` seconds (or one interval contact
//! spanning the meeting). Independent noise contacts between uniform random
//! pairs arrive as a Poisson process.

use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{ContactEvent, NodeId, Time, Trace, DAY, HOUR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub node_count: usize,
    pub group_count: usize,
    /// Inclusive `[min, max]` group size.
    pub group_size_range: (usize, usize),
    pub daily_meeting_prob: f64,
    /// Multiplier on `daily_meeting_prob` for the group's anchor weekday,
    /// clamped to probability 1.
    pub weekly_boost: f64,
    pub meeting_duration: Time,
    /// Spacing between successive contacts of one pair during a meeting.
    pub contact_interval: Time,
    /// Meeting start is shifted uniformly in `[-jitter, +jitter]` seconds.
    pub jitter: Time,
    /// Random pairwise contacts per hour over the whole network.
    pub noise_contact_rate: f64,
    pub horizon_days: u32,
    pub seed: u64,
    /// Emit one interval contact per pair and meeting instead of a train of
    /// instantaneous contacts.
    pub interval_contacts: bool,
    /// Draw group members without reuse across groups.
    pub disjoint_groups: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            node_count: 100,
            group_count: 25,
            group_size_range: (3, 6),
            daily_meeting_prob: 0.8,
            weekly_boost: 1.0,
            meeting_duration: HOUR,
            contact_interval: 300,
            jitter: 0,
            noise_contact_rate: 1.0,
            horizon_days: 35,
            seed: 1,
            interval_contacts: false,
            disjoint_groups: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let (lo, hi) = self.group_size_range;
        if !(0.0..=1.0).contains(&self.daily_meeting_prob) {
            return bad(format!(
                "daily_meeting_prob {} outside [0,1]",
                self.daily_meeting_prob
            ));
        }
        if !(self.weekly_boost >= 0.0 && self.weekly_boost.is_finite()) {
            return bad("weekly_boost must be a finite non-negative factor".into());
        }
        if self.horizon_days < 1 {
            return bad("horizon must be at least one day".into());
        }
        if lo < 2 || lo > hi {
            return bad(format!("group_size_range ({lo},{hi}) must satisfy 2 <= min <= max"));
        }
        if hi > self.node_count {
            return bad(format!(
                "group_size_range max {hi} exceeds node_count {}",
                self.node_count
            ));
        }
        if self.disjoint_groups && self.group_count * hi > self.node_count {
            return bad(format!(
                "{} disjoint groups of up to {hi} members exceed node_count {}",
                self.group_count, self.node_count
            ));
        }
        if self.meeting_duration <= 0 || self.contact_interval <= 0 || self.jitter < 0 {
            return bad("meeting_duration and contact_interval must be positive, jitter non-negative".into());
        }
        if !(self.noise_contact_rate >= 0.0 && self.noise_contact_rate.is_finite()) {
            return bad("noise_contact_rate must be finite and non-negative".into());
        }
        if self.noise_contact_rate > 0.0 && self.node_count < 2 {
            return bad("noise contacts need at least two nodes".into());
        }
        Ok(())
    }

    /// Parses a `key = value` config file. Missing keys keep their defaults.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }
}

/// Ground-truth schedule of one generated group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthGroup {
    pub members: Vec<NodeId>,
    pub anchor_hour: u32,
    pub anchor_weekday: u32,
    /// Start time of each meeting.
    pub meetings: Vec<Time>,
}

#[derive(Debug, Clone)]
pub struct SyntheticTrace {
    pub trace: Trace,
    pub groups: Vec<SynthGroup>,
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Trace> {
    generate_with_truth(cfg).map(|s| s.trace)
}

pub fn generate_with_truth(cfg: &SynthConfig) -> Result<SyntheticTrace> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.group_size_range;

    let mut pool: Vec<u32> = (0..cfg.node_count as u32).collect();
    let mut groups = Vec::with_capacity(cfg.group_count);
    for _ in 0..cfg.group_count {
        let size = rng.random_range(lo..=hi);
        let mut members: Vec<NodeId> = if cfg.disjoint_groups {
            let picked = sample(&mut rng, pool.len(), size).into_vec();
            let mut chosen: Vec<u32> = picked.iter().map(|&i| pool[i]).collect();
            let mut idx = picked;
            idx.sort_unstable_by(|a, b| b.cmp(a));
            for i in idx {
                pool.swap_remove(i);
            }
            chosen.sort_unstable();
            chosen.into_iter().map(NodeId).collect()
        } else {
            sample(&mut rng, cfg.node_count, size)
                .into_iter()
                .map(|i| NodeId(i as u32))
                .collect()
        };
        members.sort_unstable();
        groups.push(SynthGroup {
            members,
            anchor_hour: rng.random_range(0..24),
            anchor_weekday: rng.random_range(0..7),
            meetings: Vec::new(),
        });
    }

    let mut events = Vec::new();
    for day in 0..cfg.horizon_days {
        for g in groups.iter_mut() {
            let p = if day % 7 == g.anchor_weekday {
                (cfg.daily_meeting_prob * cfg.weekly_boost).min(1.0)
            } else {
                cfg.daily_meeting_prob
            };
            if rng.random::<f64>() >= p {
                continue;
            }
            let shift = if cfg.jitter > 0 {
                rng.random_range(-cfg.jitter..=cfg.jitter)
            } else {
                0
            };
            let start = (day as Time * DAY + g.anchor_hour as Time * HOUR + shift).max(0);
            g.meetings.push(start);
            emit_meeting(cfg, &g.members, start, &mut events);
        }
    }

    if cfg.noise_contact_rate > 0.0 {
        let horizon = cfg.horizon_days as Time * DAY;
        let rate_per_sec = cfg.noise_contact_rate / HOUR as f64;
        let mut t = 0.0f64;
        loop {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / rate_per_sec;
            let start = t as Time;
            if start >= horizon {
                break;
            }
            let a = rng.random_range(0..cfg.node_count as u32);
            let mut b = rng.random_range(0..cfg.node_count as u32 - 1);
            if b >= a {
                b += 1;
            }
            let end = cfg.interval_contacts.then_some(start + 60);
            events.push(ContactEvent::new(NodeId(a), NodeId(b), start, end)?);
        }
    }

    let trace = Trace::new(events, cfg.node_count, 0)?;
    Ok(SyntheticTrace { trace, groups })
}

fn emit_meeting(cfg: &SynthConfig, members: &[NodeId], start: Time, out: &mut Vec<ContactEvent>) {
    for (i, &x) in members.iter().enumerate() {
        for &y in &members[i + 1..] {
            if cfg.interval_contacts {
                out.push(ContactEvent {
                    start,
                    a: x,
                    b: y,
                    end: Some(start + cfg.meeting_duration),
                });
            } else {
                let mut t = start;
                while t < start + cfg.meeting_duration {
                    out.push(ContactEvent {
                        start: t,
                        a: x,
                        b: y,
                        end: None,
                    });
                    t += cfg.contact_interval;
                }
            }
        }
    }
}
