//! Group-graph construction and most-probable group-to-group routes.
//!
//! Each recently seen group becomes a vertex carrying its probability of
//! meeting again within the message TTL under a Poisson meeting model. Two
//! groups sharing members are linked by an edge whose weight multiplies their
//! member overlap with both re-meeting probabilities. The most probable route
//! maximizes the product of edge weights, found as a shortest path over
//! `-ln w` costs.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{NodeId, Time};
use crate::tracking::{self, intersection_size, GroupTimeline, RecentGroup};

/// `1 - exp(-(meeting_count / lookback) * ttl)`.
pub fn remeet_probability(meeting_count: usize, lookback: Time, ttl: Time) -> Result<f64> {
    if lookback <= 0 || ttl <= 0 {
        return Err(Error::InvalidArgument(format!(
            "lookback ({lookback}) and ttl ({ttl}) must be positive"
        )));
    }
    let lambda = meeting_count as f64 / lookback as f64;
    Ok(remeet_from_rate(lambda, ttl as f64))
}

/// `1 - exp(-lambda * t)`.
pub fn remeet_from_rate(lambda: f64, t: f64) -> f64 {
    -(-lambda * t).exp_m1()
}

/// Probability of exactly `k` meetings in `t` at rate `lambda`.
pub fn poisson_pmf(lambda: f64, t: f64, k: u32) -> f64 {
    let mu = lambda * t;
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (2..=k).map(|i| (i as f64).ln()).sum();
    (-mu + k as f64 * mu.ln() - ln_fact).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupNode {
    pub group_id: usize,
    pub members: Vec<NodeId>,
    /// Meetings per second over the lookback.
    pub lambda: f64,
    pub p_remeet: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEdge {
    /// Indices into [`GroupGraph::nodes`], `from < to`.
    pub from: usize,
    pub to: usize,
    pub overlap: f64,
    pub weight: f64,
}

impl GroupEdge {
    pub fn cost(&self) -> f64 {
        -self.weight.ln()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GroupGraph {
    pub nodes: Vec<GroupNode>,
    pub edges: Vec<GroupEdge>,
    #[serde(skip)]
    adj: Vec<Vec<(usize, usize)>>,
}

impl GroupGraph {
    /// Builds the graph directly from nodes and `(from, to, weight)` edges.
    /// Edges with non-positive weight are dropped.
    pub fn from_parts(nodes: Vec<GroupNode>, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut g = GroupGraph {
            adj: vec![Vec::new(); nodes.len()],
            nodes,
            edges: Vec::new(),
        };
        for (a, b, w) in edges {
            g.push_edge(a, b, f64::NAN, w);
        }
        g
    }

    fn push_edge(&mut self, a: usize, b: usize, overlap: f64, weight: f64) {
        if a == b || weight <= 0.0 {
            return;
        }
        let (from, to) = (a.min(b), a.max(b));
        let ei = self.edges.len();
        self.edges.push(GroupEdge {
            from,
            to,
            overlap,
            weight: weight.min(1.0),
        });
        self.adj[from].push((to, ei));
        self.adj[to].push((from, ei));
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<&GroupEdge> {
        self.adj[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, ei)| &self.edges[ei])
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, &GroupEdge)> + '_ {
        self.adj[v].iter().map(move |&(n, ei)| (n, &self.edges[ei]))
    }

    fn index_of_group(&self, group_id: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.group_id == group_id)
    }
}

/// One vertex per recent group, one edge per pair of groups sharing members.
pub fn build_group_graph(recent: &[RecentGroup], lookback: Time, ttl: Time) -> Result<GroupGraph> {
    let mut nodes = Vec::with_capacity(recent.len());
    for g in recent {
        let p = remeet_probability(g.meeting_count, lookback, ttl)?;
        nodes.push(GroupNode {
            group_id: g.group_id,
            members: g.members.clone(),
            lambda: g.meeting_count as f64 / lookback as f64,
            p_remeet: p,
        });
    }
    nodes.sort_by_key(|n| n.group_id);
    let mut graph = GroupGraph::from_parts(nodes, std::iter::empty());

    let mut by_member: std::collections::HashMap<NodeId, Vec<usize>> = Default::default();
    for (i, n) in graph.nodes.iter().enumerate() {
        for m in &n.members {
            by_member.entry(*m).or_default().push(i);
        }
    }
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for idxs in by_member.values() {
        for (x, &i) in idxs.iter().enumerate() {
            for &j in &idxs[x + 1..] {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    for (i, j) in pairs {
        let (overlap, w) = edge_weight(&graph.nodes[i], &graph.nodes[j]);
        graph.push_edge(i, j, overlap, w);
    }
    Ok(graph)
}

/// Member overlap of two groups and the resulting edge weight
/// `overlap * p_remeet(a) * p_remeet(b)`.
pub fn edge_weight(a: &GroupNode, b: &GroupNode) -> (f64, f64) {
    let inter = intersection_size(&a.members, &b.members);
    let union = a.members.len() + b.members.len() - inter;
    let overlap = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
    (overlap, overlap * a.p_remeet * b.p_remeet)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    /// Group ids from an origin group to a destination group.
    pub groups: Vec<usize>,
    pub edge_weights: Vec<f64>,
    pub probability: f64,
    pub device_set: Vec<NodeId>,
}

impl Route {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

const COST_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Label {
    cost: f64,
    path: Vec<usize>,
}

/// Cost, then fewer groups, then lexicographically smaller group ids.
fn compare_labels(a: &Label, b: &Label, graph: &GroupGraph) -> Ordering {
    let scale = 1.0f64.max(a.cost.abs()).max(b.cost.abs());
    if (a.cost - b.cost).abs() > COST_TOLERANCE * scale {
        return a.cost.total_cmp(&b.cost);
    }
    a.path.len().cmp(&b.path.len()).then_with(|| {
        let ia = a.path.iter().map(|&i| graph.nodes[i].group_id);
        let ib = b.path.iter().map(|&i| graph.nodes[i].group_id);
        ia.cmp(ib)
    })
}

/// Most probable route between any group holding `origin` and any group
/// holding `destination`.
///
/// Groups containing both endpoints short-circuit to a one-group route of
/// probability 1 (smallest such group id). Array-based Dijkstra, `O(V^2)`.
pub fn most_probable_route(graph: &GroupGraph, origin: NodeId, destination: NodeId) -> Option<Route> {
    let holds = |i: usize, n: NodeId| graph.nodes[i].members.binary_search(&n).is_ok();
    let sources: Vec<usize> = (0..graph.node_count()).filter(|&i| holds(i, origin)).collect();
    let sinks: Vec<usize> = (0..graph.node_count())
        .filter(|&i| holds(i, destination))
        .collect();
    if sources.is_empty() || sinks.is_empty() {
        return None;
    }
    if let Some(&shared) = sources
        .iter()
        .filter(|i| sinks.contains(i))
        .min_by_key(|&&i| graph.nodes[i].group_id)
    {
        return Some(route_from_path(graph, vec![shared]));
    }

    let n = graph.node_count();
    let mut best: Vec<Option<Label>> = vec![None; n];
    let mut done = vec![false; n];
    for &s in &sources {
        best[s] = Some(Label {
            cost: 0.0,
            path: vec![s],
        });
    }
    loop {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if done[v] {
                continue;
            }
            if let Some(lv) = &best[v] {
                let better = match pick {
                    None => true,
                    Some(p) => {
                        compare_labels(lv, best[p].as_ref().expect("picked has label"), graph)
                            == Ordering::Less
                    }
                };
                if better {
                    pick = Some(v);
                }
            }
        }
        let Some(u) = pick else { break };
        done[u] = true;
        let lu = best[u].clone().expect("picked has label");
        for (v, e) in graph.neighbors(u) {
            if done[v] {
                continue;
            }
            let mut path = lu.path.clone();
            path.push(v);
            let cand = Label {
                cost: lu.cost + e.cost(),
                path,
            };
            let replace = match &best[v] {
                None => true,
                Some(cur) => compare_labels(&cand, cur, graph) == Ordering::Less,
            };
            if replace {
                best[v] = Some(cand);
            }
        }
    }

    sinks
        .iter()
        .filter_map(|&t| best[t].as_ref())
        .min_by(|a, b| compare_labels(a, b, graph))
        .map(|l| route_from_path(graph, l.path.clone()))
}

fn route_from_path(graph: &GroupGraph, path: Vec<usize>) -> Route {
    let edge_weights: Vec<f64> = path
        .windows(2)
        .map(|w| {
            graph
                .edge_between(w[0], w[1])
                .expect("consecutive route groups are adjacent")
                .weight
        })
        .collect();
    let probability = edge_weights.iter().product();
    let device_set: BTreeSet<NodeId> = path
        .iter()
        .flat_map(|&i| graph.nodes[i].members.iter().copied())
        .collect();
    Route {
        groups: path.iter().map(|&i| graph.nodes[i].group_id).collect(),
        edge_weights,
        probability,
        device_set: device_set.into_iter().collect(),
    }
}

/// Devices that should receive a copy when met: every member of a route
/// group, plus the destination.
pub fn forwarding_list(route: Option<&Route>, destination: NodeId) -> BTreeSet<NodeId> {
    match route {
        None => BTreeSet::new(),
        Some(r) => {
            let mut s: BTreeSet<NodeId> = r.device_set.iter().copied().collect();
            s.insert(destination);
            s
        }
    }
}

/// Route for a message sent at `now`, using groups seen in the lookback.
pub fn plan_route(
    timelines: &[GroupTimeline],
    origin: NodeId,
    destination: NodeId,
    now: Time,
    lookback: Time,
    ttl: Time,
) -> Result<Option<Route>> {
    let recent = tracking::recent_groups(timelines, now, lookback);
    let graph = build_group_graph(&recent, lookback, ttl)?;
    Ok(most_probable_route(&graph, origin, destination))
}

#[derive(Serialize)]
struct RouteJson<'a> {
    groups: Vec<RouteGroupJson<'a>>,
    edge_weights: &'a [f64],
    probability: f64,
}

#[derive(Serialize)]
struct RouteGroupJson<'a> {
    group_id: usize,
    members: &'a [NodeId],
    p_remeet: f64,
}

/// JSON dump: ordered groups with members, edge weights, total probability.
pub fn write_route_json<W: Write>(graph: &GroupGraph, route: &Route, w: W) -> Result<()> {
    let groups = route
        .groups
        .iter()
        .map(|&gid| {
            let i = graph.index_of_group(gid).expect("route group in graph");
            RouteGroupJson {
                group_id: gid,
                members: &graph.nodes[i].members,
                p_remeet: graph.nodes[i].p_remeet,
            }
        })
        .collect();
    serde_json::to_writer_pretty(
        w,
        &RouteJson {
            groups,
            edge_weights: &route.edge_weights,
            probability: route.probability,
        },
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::DAY;
    use proptest::prelude::*;

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn node(gid: usize, members: &[u32], p: f64) -> GroupNode {
        GroupNode {
            group_id: gid,
            members: ids(members),
            lambda: 0.0,
            p_remeet: p,
        }
    }

    #[test]
    fn remeet_examples() {
        assert_eq!(remeet_probability(0, DAY, DAY).unwrap(), 0.0);
        let half = remeet_from_rate(std::f64::consts::LN_2, 1.0);
        assert!((half - 0.5).abs() < 1e-12);
        let p = remeet_probability(21, 21 * DAY, 7 * DAY).unwrap();
        assert!((p - (1.0 - (-7.0f64).exp())).abs() < 1e-15);
        assert!((p - 0.999088).abs() < 1e-6);
        assert!(remeet_probability(1, 0, 1).is_err());
        assert!(remeet_probability(1, 1, 0).is_err());
    }

    #[test]
    fn pmf_examples() {
        assert!((poisson_pmf(0.3, 2.0, 0) - (-0.6f64).exp()).abs() < 1e-15);
        assert!((poisson_pmf(1.0, 1.0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        let s: f64 = (0..=50).map(|k| poisson_pmf(2.0, 1.0, k)).sum();
        assert!((s - 1.0).abs() < 1e-9);
        assert_eq!(poisson_pmf(0.0, 5.0, 0), 1.0);
    }

    #[test]
    fn edge_weight_combines_overlap_and_remeeting() {
        let (overlap, w) = edge_weight(&node(0, &[0, 1, 2], 0.8), &node(1, &[2, 3], 0.5));
        assert_eq!(overlap, 0.25);
        assert!((w - 0.1).abs() < 1e-15);

        let recent = vec![
            RecentGroup { group_id: 0, members: ids(&[0, 1, 2]), meeting_count: 3 },
            RecentGroup { group_id: 1, members: ids(&[2, 3]), meeting_count: 5 },
        ];
        let g = build_group_graph(&recent, 100, 1).unwrap();
        let (p1, p2) = (g.nodes[0].p_remeet, g.nodes[1].p_remeet);
        let e = g.edge_between(0, 1).unwrap();
        assert_eq!(e.overlap, 0.25);
        assert!((e.weight - 0.25 * p1 * p2).abs() < 1e-15);
    }

    #[test]
    fn disjoint_and_identical_groups() {
        let recent = vec![
            RecentGroup { group_id: 0, members: ids(&[0, 1, 2]), meeting_count: 2 },
            RecentGroup { group_id: 1, members: ids(&[5, 6, 7]), meeting_count: 2 },
            RecentGroup { group_id: 2, members: ids(&[0, 1, 2]), meeting_count: 4 },
        ];
        let g = build_group_graph(&recent, DAY, DAY).unwrap();
        assert!(g.edge_between(0, 1).is_none());
        let e = g.edge_between(0, 2).unwrap();
        assert_eq!(e.overlap, 1.0);
        assert!((e.weight - g.nodes[0].p_remeet * g.nodes[2].p_remeet).abs() < 1e-15);
    }

    #[test]
    fn same_group_route_has_probability_one() {
        let g = GroupGraph::from_parts(vec![node(3, &[0, 1, 2], 0.3), node(1, &[0, 1], 0.2)], []);
        let r = most_probable_route(&g, NodeId(0), NodeId(1)).unwrap();
        assert_eq!(r.groups, vec![1]);
        assert_eq!(r.probability, 1.0);
    }

    #[test]
    fn chain_beats_weak_direct_edge() {
        let g = GroupGraph::from_parts(
            vec![node(1, &[0, 10], 1.0), node(2, &[10, 11], 1.0), node(3, &[11, 99], 1.0)],
            [(0, 1, 0.1), (1, 2, 0.2), (0, 2, 0.01)],
        );
        let r = most_probable_route(&g, NodeId(0), NodeId(99)).unwrap();
        assert_eq!(r.groups, vec![1, 2, 3]);
        assert!((r.probability - 0.02).abs() < 1e-15);
    }

    #[test]
    fn missing_endpoint_gives_none() {
        let g = GroupGraph::from_parts(vec![node(0, &[0, 1, 2], 0.5)], []);
        assert!(most_probable_route(&g, NodeId(0), NodeId(9)).is_none());
        assert!(most_probable_route(&g, NodeId(9), NodeId(0)).is_none());
        let split = GroupGraph::from_parts(vec![node(0, &[0, 1], 0.5), node(1, &[5, 6], 0.5)], []);
        assert!(most_probable_route(&split, NodeId(0), NodeId(6)).is_none());
    }

    #[test]
    fn tie_prefers_fewer_groups_then_smaller_ids() {
        // 0 -> 1 -> 3 and 0 -> 2 -> 3 both weigh 1; 0 -> 3 directly also 1.
        let g = GroupGraph::from_parts(
            vec![
                node(0, &[0, 10], 1.0),
                node(1, &[10, 11], 1.0),
                node(2, &[10, 12], 1.0),
                node(3, &[11, 12, 99], 1.0),
            ],
            [(0, 1, 1.0), (1, 3, 1.0), (0, 2, 1.0), (2, 3, 1.0)],
        );
        let r = most_probable_route(&g, NodeId(0), NodeId(99)).unwrap();
        assert_eq!(r.groups, vec![0, 1, 3]);
    }

    #[test]
    fn forwarding_list_examples() {
        let g = GroupGraph::from_parts(
            vec![node(0, &[0, 1, 2], 1.0), node(1, &[2, 3], 1.0), node(2, &[3, 4], 1.0)],
            [(0, 1, 0.5), (1, 2, 0.5)],
        );
        let r = most_probable_route(&g, NodeId(0), NodeId(4)).unwrap();
        let mut short = r.clone();
        short.groups.truncate(2);
        short.device_set = ids(&[0, 1, 2, 3]);
        let fl = forwarding_list(Some(&short), NodeId(4));
        assert_eq!(fl, ids(&[0, 1, 2, 3, 4]).into_iter().collect());
        let single = most_probable_route(&g, NodeId(0), NodeId(1)).unwrap();
        assert_eq!(forwarding_list(Some(&single), NodeId(1)), ids(&[0, 1, 2]).into_iter().collect());
        assert!(forwarding_list(None, NodeId(1)).is_empty());
    }

    #[test]
    fn route_json_dump() {
        let g = GroupGraph::from_parts(
            vec![node(0, &[0, 1], 0.9), node(1, &[1, 2], 0.8)],
            [(0, 1, 0.25)],
        );
        let r = most_probable_route(&g, NodeId(0), NodeId(2)).unwrap();
        let mut buf = Vec::new();
        write_route_json(&g, &r, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["probability"], 0.25);
        assert_eq!(v["groups"][1]["members"], serde_json::json!([1, 2]));
    }

    proptest! {
        #[test]
        fn remeet_monotone_and_bounded(count in 1usize..50, ttl in 1i64..1_000_000, extra in 1i64..1000) {
            let l = 21 * DAY;
            let p = remeet_probability(count, l, ttl).unwrap();
            let p_ttl = remeet_probability(count, l, ttl + extra).unwrap();
            let p_cnt = remeet_probability(count + 1, l, ttl).unwrap();
            prop_assert!((0.0..1.0).contains(&p));
            prop_assert!(p_ttl >= p);
            prop_assert!(p_cnt >= p);
        }

        #[test]
        fn common_rate_scaling_preserves_order(c1 in 1usize..30, c2 in 1usize..30, scale in 1usize..5) {
            let (l, t) = (21 * DAY, 7 * DAY);
            let p = |c: usize| remeet_probability(c, l, t).unwrap();
            if c1 <= c2 {
                prop_assert!(p(c1) <= p(c2));
                prop_assert!(p(c1 * scale) <= p(c2 * scale));
            }
        }
    }
}
