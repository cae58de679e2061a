//! Independent oracles and reference inputs shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use groupsnet::routing::{GroupGraph, GroupNode};
use groupsnet::synth::SynthConfig;
use groupsnet::trace::{NodeId, DAY, HOUR};
use rand::Rng;

/// G(n, p) edge list over nodes `0..n`.
pub fn random_graph<R: Rng>(rng: &mut R, n: u32, p: f64) -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                edges.push((NodeId(a), NodeId(b)));
            }
        }
    }
    edges
}

fn combinations(items: &[u32], k: usize) -> Vec<Vec<u32>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        for mut rest in combinations(&items[i + 1..], k - 1) {
            rest.insert(0, items[i]);
            out.push(rest);
        }
    }
    out
}

/// Clique percolation by definition: enumerate every k-subset that is a
/// clique, join k-cliques sharing k-1 nodes, union each component.
pub fn cpm_oracle(edges: &[(NodeId, NodeId)], n: u32, k: usize) -> Vec<BTreeSet<NodeId>> {
    let mut adj = vec![vec![false; n as usize]; n as usize];
    for &(a, b) in edges {
        adj[a.index()][b.index()] = true;
        adj[b.index()][a.index()] = true;
    }
    let nodes: Vec<u32> = (0..n).collect();
    let cliques: Vec<Vec<u32>> = combinations(&nodes, k)
        .into_iter()
        .filter(|c| {
            c.iter()
                .enumerate()
                .all(|(i, &x)| c[i + 1..].iter().all(|&y| adj[x as usize][y as usize]))
        })
        .collect();
    let m = cliques.len();
    let mut comp: Vec<usize> = (0..m).collect();
    fn find(c: &mut [usize], x: usize) -> usize {
        if c[x] == x {
            x
        } else {
            let r = find(c, c[x]);
            c[x] = r;
            r
        }
    }
    for i in 0..m {
        for j in i + 1..m {
            let shared = cliques[i].iter().filter(|x| cliques[j].contains(x)).count();
            if shared == k - 1 {
                let (ri, rj) = (find(&mut comp, i), find(&mut comp, j));
                comp[ri] = rj;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, BTreeSet<NodeId>> = Default::default();
    for (i, c) in cliques.iter().enumerate() {
        let r = find(&mut comp, i);
        groups.entry(r).or_default().extend(c.iter().map(|&x| NodeId(x)));
    }
    let mut out: Vec<BTreeSet<NodeId>> = groups.into_values().collect();
    out.sort();
    out
}

/// Random group graph: up to `max_groups` groups over ten devices, each
/// pair linked with probability one half. With `discrete` set the weights
/// come from {1/4, 1/2, 1} so exact ties occur.
pub fn random_group_graph<R: Rng>(rng: &mut R, max_groups: usize, discrete: bool) -> GroupGraph {
    let n = rng.random_range(2..=max_groups);
    let nodes: Vec<GroupNode> = (0..n)
        .map(|i| {
            let size = rng.random_range(1..=4);
            let mut members: Vec<NodeId> = (0..size).map(|_| NodeId(rng.random_range(0..10))).collect();
            members.sort();
            members.dedup();
            GroupNode {
                group_id: 10 * i + rng.random_range(0..10),
                members,
                lambda: 0.0,
                p_remeet: 0.0,
            }
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < 0.5 {
                let w = if discrete {
                    [0.25, 0.5, 1.0][rng.random_range(0..3)]
                } else {
                    1.0 - rng.random::<f64>()
                };
                edges.push((a, b, w));
            }
        }
    }
    GroupGraph::from_parts(nodes, edges)
}

/// Route by exhaustive simple-path enumeration. Costs are summed `-ln w`;
/// near-equal costs fall back to fewer groups, then smaller id sequence.
pub fn route_oracle(g: &GroupGraph, origin: NodeId, dest: NodeId) -> Option<(Vec<usize>, f64)> {
    let n = g.node_count();
    let holds = |i: usize, d: NodeId| g.nodes[i].members.contains(&d);
    let shared: Vec<usize> = (0..n).filter(|&i| holds(i, origin) && holds(i, dest)).collect();
    if let Some(&best) = shared.iter().min_by_key(|&&i| g.nodes[i].group_id) {
        return Some((vec![g.nodes[best].group_id], 1.0));
    }
    let mut paths: Vec<(f64, Vec<usize>, f64)> = Vec::new();
    fn dfs(
        g: &GroupGraph,
        path: &mut Vec<usize>,
        cost: f64,
        prob: f64,
        dest: NodeId,
        out: &mut Vec<(f64, Vec<usize>, f64)>,
    ) {
        let u = *path.last().unwrap();
        if g.nodes[u].members.contains(&dest) {
            out.push((cost, path.iter().map(|&i| g.nodes[i].group_id).collect(), prob));
        }
        for v in 0..g.node_count() {
            if path.contains(&v) {
                continue;
            }
            if let Some(e) = g.edge_between(u, v) {
                path.push(v);
                dfs(g, path, cost - e.weight.ln(), prob * e.weight, dest, out);
                path.pop();
            }
        }
    }
    for s in (0..n).filter(|&i| holds(i, origin)) {
        dfs(g, &mut vec![s], 0.0, 1.0, dest, &mut paths);
    }
    let better = |a: &(f64, Vec<usize>, f64), b: &(f64, Vec<usize>, f64)| {
        let scale = 1f64.max(a.0.abs()).max(b.0.abs());
        if (a.0 - b.0).abs() > 1e-12 * scale {
            a.0 < b.0
        } else {
            (a.1.len(), &a.1) < (b.1.len(), &b.1)
        }
    };
    let mut best: Option<(f64, Vec<usize>, f64)> = None;
    for p in paths {
        if best.as_ref().is_none_or(|b| better(&p, b)) {
            best = Some(p);
        }
    }
    best.map(|(_, ids, prob)| (ids, prob))
}

/// Group-regular reference trace for the co-group experiment: 200 nodes
/// in 30 disjoint daily groups, sparse background contacts.
pub fn cogroup_reference() -> SynthConfig {
    SynthConfig {
        node_count: 200,
        group_count: 30,
        group_size_range: (3, 6),
        daily_meeting_prob: 0.8,
        noise_contact_rate: 0.5,
        horizon_days: 42,
        disjoint_groups: true,
        seed: 20_240_601,
        ..SynthConfig::default()
    }
}

/// Group-regular trace sized for the scalability series.
pub fn scaling_reference() -> SynthConfig {
    SynthConfig {
        node_count: 1000,
        group_count: 500,
        group_size_range: (3, 6),
        daily_meeting_prob: 0.8,
        noise_contact_rate: 4.0,
        horizon_days: 35,
        seed: 7,
        ..SynthConfig::default()
    }
}

pub const WEEK: i64 = 7 * DAY;
pub const H: i64 = HOUR;
