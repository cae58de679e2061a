//! Comparison forwarding policies: Bubble Rap and flooding.
//!
//! Bubble Rap uses static CPM communities over an aggregated contact graph
//! plus two popularity ranks estimated with C-Windows: the average number of
//! distinct nodes met per window (global), and the same restricted to one
//! community's members (local).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cpm::{self, CpmParams};
use crate::error::{Error, Result};
use crate::slicing::WeightMode;
use crate::trace::{NodeId, Time, Trace, HOUR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub cwin_len: Time,
    pub k: usize,
    /// Aggregated-graph edge threshold (contacts or seconds).
    pub w_th: i64,
    pub weight_mode: WeightMode,
    pub clique_cap: usize,
}

impl Default for BubbleParams {
    fn default() -> Self {
        BubbleParams {
            cwin_len: 6 * HOUR,
            k: 3,
            w_th: 2,
            weight_mode: WeightMode::Count,
            clique_cap: cpm::DEFAULT_CLIQUE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityAssignment {
    /// Sorted member lists; CPM communities first, then singleton
    /// pseudo-communities for nodes left out.
    pub communities: Vec<Vec<NodeId>>,
    /// Community ids of every node, ascending.
    pub membership: Vec<Vec<usize>>,
}

impl CommunityAssignment {
    pub fn communities_of(&self, n: NodeId) -> &[usize] {
        &self.membership[n.index()]
    }

    pub fn is_member(&self, n: NodeId, community: usize) -> bool {
        self.communities[community].binary_search(&n).is_ok()
    }

    /// Communities holding both nodes.
    pub fn shared(&self, x: NodeId, y: NodeId) -> impl Iterator<Item = usize> + '_ {
        let ys = &self.membership[y.index()];
        self.membership[x.index()]
            .iter()
            .copied()
            .filter(move |c| ys.binary_search(c).is_ok())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub global_rank: Vec<f64>,
    /// `(community id, rank)` for each of the node's own communities.
    pub local_rank: Vec<Vec<(usize, f64)>>,
}

impl RankTable {
    pub fn global(&self, n: NodeId) -> f64 {
        self.global_rank[n.index()]
    }

    /// Local rank inside `community`; zero outside own communities.
    pub fn local(&self, n: NodeId, community: usize) -> f64 {
        self.local_rank[n.index()]
            .iter()
            .find(|(c, _)| *c == community)
            .map(|&(_, r)| r)
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleState {
    pub communities: CommunityAssignment,
    pub ranks: RankTable,
}

/// Trains Bubble Rap on the contacts starting in `[from, to)`.
pub fn build_bubble_state(trace: &Trace, from: Time, to: Time, params: &BubbleParams) -> Result<BubbleState> {
    if params.cwin_len <= 0 {
        return Err(Error::Config("cwin_len must be positive".into()));
    }
    if to <= from {
        return Err(Error::InvalidArgument(format!(
            "empty training window [{from}, {to})"
        )));
    }
    let events = trace.events_in(from, to);
    let n = trace.node_count();

    let mut aggregated: BTreeMap<(NodeId, NodeId), i64> = BTreeMap::new();
    for e in events {
        let w = match params.weight_mode {
            WeightMode::Count => 1,
            WeightMode::Duration => e.end.unwrap_or(e.start).min(to) - e.start,
        };
        *aggregated.entry(e.pair()).or_insert(0) += w;
    }
    let social = aggregated
        .iter()
        .filter(|(_, &w)| w >= params.w_th)
        .map(|(&k, _)| k);
    let found = cpm::communities(
        social,
        &CpmParams {
            k: params.k,
            clique_cap: params.clique_cap,
        },
    )?;

    let mut communities: Vec<Vec<NodeId>> = found.into_iter().map(|c| c.members).collect();
    let mut membership: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ci, c) in communities.iter().enumerate() {
        for m in c {
            membership[m.index()].push(ci);
        }
    }
    for (v, m) in membership.iter_mut().enumerate() {
        if m.is_empty() {
            m.push(communities.len());
            communities.push(vec![NodeId(v as u32)]);
        }
    }

    // C-Window popularity.
    let n_windows = ((to - from) + params.cwin_len - 1) / params.cwin_len;
    let mut distinct_sum = vec![0u64; n];
    let mut local_sum: Vec<Vec<u64>> = membership.iter().map(|m| vec![0; m.len()]).collect();
    let mut by_window: BTreeMap<i64, BTreeMap<NodeId, BTreeSet<NodeId>>> = BTreeMap::new();
    for e in events {
        let w = (e.start - from) / params.cwin_len;
        let win = by_window.entry(w).or_default();
        win.entry(e.a).or_default().insert(e.b);
        win.entry(e.b).or_default().insert(e.a);
    }
    for win in by_window.values() {
        for (v, met) in win {
            distinct_sum[v.index()] += met.len() as u64;
            for (slot, &c) in membership[v.index()].iter().enumerate() {
                let members = &communities[c];
                local_sum[v.index()][slot] +=
                    met.iter().filter(|m| members.binary_search(m).is_ok()).count() as u64;
            }
        }
    }
    let denom = n_windows as f64;
    let global_rank = distinct_sum.iter().map(|&s| s as f64 / denom).collect();
    let local_rank = membership
        .iter()
        .zip(&local_sum)
        .map(|(cs, sums)| cs.iter().zip(sums).map(|(&c, &s)| (c, s as f64 / denom)).collect())
        .collect();

    Ok(BubbleState {
        communities: CommunityAssignment {
            communities,
            membership,
        },
        ranks: RankTable {
            global_rank,
            local_rank,
        },
    })
}

/// Whether `carrier` hands a copy to `encountered` under Bubble Rap.
pub fn bubble_forward_decision(
    carrier: NodeId,
    encountered: NodeId,
    destination: NodeId,
    state: &BubbleState,
) -> bool {
    if encountered == destination {
        return true;
    }
    let comms = &state.communities;
    let ranks = &state.ranks;
    let inside: Vec<usize> = comms.shared(carrier, destination).collect();
    if inside.is_empty() {
        ranks.global(encountered) > ranks.global(carrier)
            || comms.shared(encountered, destination).next().is_some()
    } else {
        inside.iter().any(|&c| {
            comms.is_member(encountered, c) && ranks.local(encountered, c) > ranks.local(carrier, c)
        })
    }
}

/// Flooding hands a copy to every node that lacks one.
pub fn flood_decision(encountered_has_message: bool) -> bool {
    !encountered_has_message
}

/// Community and rank dump for inspection.
pub fn write_bubble_json<W: Write>(state: &BubbleState, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, state)?;
    Ok(())
}
