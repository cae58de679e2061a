//! Clique percolation community detection.
//!
//! Communities are unions of k-cliques reachable from one another through
//! k-cliques sharing `k - 1` nodes. The implementation works on maximal
//! cliques: two maximal cliques of size `>= k` belong to the same community
//! iff they are connected through pairs sharing at least `k - 1` nodes, which
//! yields the same node sets as percolating individual k-cliques.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::NodeId;

pub const DEFAULT_CLIQUE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpmParams {
    pub k: usize,
    pub clique_cap: usize,
}

impl Default for CpmParams {
    fn default() -> Self {
        CpmParams {
            k: 3,
            clique_cap: DEFAULT_CLIQUE_CAP,
        }
    }
}

impl CpmParams {
    pub fn with_k(k: usize) -> Self {
        CpmParams {
            k,
            ..Self::default()
        }
    }
}

/// Members sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Community {
    pub members: Vec<NodeId>,
}

impl Community {
    pub fn from_set(set: BTreeSet<NodeId>) -> Self {
        Community {
            members: set.into_iter().collect(),
        }
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.members.binary_search(&n).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Simple undirected graph with local dense indexing.
#[derive(Debug, Clone, Default)]
pub struct UndirectedGraph {
    nodes: Vec<NodeId>,
    adj: Vec<Vec<u32>>,
}

impl UndirectedGraph {
    pub fn from_edges<I>(edges: I) -> Self
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut pairs: Vec<(NodeId, NodeId)> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let nodes: Vec<NodeId> = pairs
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let local: HashMap<NodeId, u32> = nodes
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, i as u32))
            .collect();
        let mut adj = vec![Vec::new(); nodes.len()];
        for (a, b) in pairs {
            let (ia, ib) = (local[&a], local[&b]);
            adj[ia as usize].push(ib);
            adj[ib as usize].push(ia);
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
        }
        UndirectedGraph { nodes, adj }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    fn adjacent(&self, a: u32, b: u32) -> bool {
        self.adj[a as usize].binary_search(&b).is_ok()
    }

    /// Maximal cliques of size at least `min_size`, as sorted local indices.
    fn maximal_cliques(&self, min_size: usize, cap: usize) -> Result<Vec<Vec<u32>>> {
        let n = self.nodes.len();
        let order = degeneracy_order(&self.adj);
        let mut pos = vec![0usize; n];
        for (i, &v) in order.iter().enumerate() {
            pos[v as usize] = i;
        }
        let mut out = Vec::new();
        for &v in &order {
            let (mut p, mut x) = (Vec::new(), Vec::new());
            for &u in &self.adj[v as usize] {
                if pos[u as usize] > pos[v as usize] {
                    p.push(u);
                } else {
                    x.push(u);
                }
            }
            let mut r = vec![v];
            self.bron_kerbosch(&mut r, p, x, min_size, cap, &mut out)?;
        }
        for c in out.iter_mut() {
            c.sort_unstable();
        }
        Ok(out)
    }

    fn bron_kerbosch(
        &self,
        r: &mut Vec<u32>,
        p: Vec<u32>,
        x: Vec<u32>,
        min_size: usize,
        cap: usize,
        out: &mut Vec<Vec<u32>>,
    ) -> Result<()> {
        if p.is_empty() {
            if x.is_empty() && r.len() >= min_size {
                if out.len() >= cap {
                    return Err(Error::CliqueCapExceeded { cap });
                }
                out.push(r.clone());
            }
            return Ok(());
        }
        if r.len() + p.len() < min_size {
            return Ok(());
        }
        let pivot = p
            .iter()
            .chain(x.iter())
            .copied()
            .max_by_key(|&u| p.iter().filter(|&&w| self.adjacent(u, w)).count())
            .expect("p is non-empty");
        let candidates: Vec<u32> = p
            .iter()
            .copied()
            .filter(|&v| !self.adjacent(pivot, v))
            .collect();
        let mut p = p;
        let mut x = x;
        for v in candidates {
            let nv = &self.adj[v as usize];
            let p2: Vec<u32> = p.iter().copied().filter(|u| nv.binary_search(u).is_ok()).collect();
            let x2: Vec<u32> = x.iter().copied().filter(|u| nv.binary_search(u).is_ok()).collect();
            r.push(v);
            self.bron_kerbosch(r, p2, x2, min_size, cap, out)?;
            r.pop();
            p.retain(|&u| u != v);
            x.push(v);
        }
        Ok(())
    }
}

fn degeneracy_order(adj: &[Vec<u32>]) -> Vec<u32> {
    let n = adj.len();
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let max_deg = degree.iter().copied().max().unwrap_or(0);
    let mut buckets: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); max_deg + 1];
    for (v, &d) in degree.iter().enumerate() {
        buckets[d].insert(v as u32);
    }
    let mut removed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut lo = 0;
    for _ in 0..n {
        while buckets[lo].is_empty() {
            lo += 1;
        }
        let v = buckets[lo].pop_first().expect("bucket non-empty");
        removed[v as usize] = true;
        order.push(v);
        for &u in &adj[v as usize] {
            if !removed[u as usize] {
                let d = degree[u as usize];
                buckets[d].remove(&u);
                degree[u as usize] = d - 1;
                buckets[d - 1].insert(u);
                lo = lo.min(d - 1);
            }
        }
    }
    order
}

fn check_k(k: usize) -> Result<()> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!("CPM needs k >= 3, got {k}")));
    }
    Ok(())
}

/// Every k-node clique, each as a sorted member list, in lexicographic order.
pub fn k_cliques(graph: &UndirectedGraph, k: usize, cap: usize) -> Result<Vec<Vec<NodeId>>> {
    check_k(k)?;
    let mut out: Vec<Vec<NodeId>> = Vec::new();
    let mut stack: Vec<u32> = Vec::with_capacity(k);
    fn extend(
        g: &UndirectedGraph,
        k: usize,
        cap: usize,
        stack: &mut Vec<u32>,
        cands: &[u32],
        out: &mut Vec<Vec<NodeId>>,
    ) -> Result<()> {
        if stack.len() == k {
            if out.len() >= cap {
                return Err(Error::CliqueCapExceeded { cap });
            }
            out.push(stack.iter().map(|&i| g.nodes[i as usize]).collect());
            return Ok(());
        }
        for (i, &v) in cands.iter().enumerate() {
            let next: Vec<u32> = cands[i + 1..]
                .iter()
                .copied()
                .filter(|&u| g.adjacent(v, u))
                .collect();
            if stack.len() + 1 + next.len() < k {
                continue;
            }
            stack.push(v);
            extend(g, k, cap, stack, &next, out)?;
            stack.pop();
        }
        Ok(())
    }
    for v in 0..graph.nodes.len() as u32 {
        let cands: Vec<u32> = graph.adj[v as usize]
            .iter()
            .copied()
            .filter(|&u| u > v)
            .collect();
        stack.push(v);
        extend(graph, k, cap, &mut stack, &cands, &mut out)?;
        stack.pop();
    }
    out.sort();
    Ok(out)
}

/// k-clique communities, sorted by smallest member (then lexicographically).
pub fn percolate(graph: &UndirectedGraph, params: &CpmParams) -> Result<Vec<Community>> {
    check_k(params.k)?;
    let k = params.k;
    let cliques = graph.maximal_cliques(k, params.clique_cap)?;
    if cliques.is_empty() {
        return Ok(Vec::new());
    }
    let mut uf = UnionFind::new(cliques.len());
    let mut by_node: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (ci, c) in cliques.iter().enumerate() {
        for &v in c {
            by_node.entry(v).or_default().push(ci);
        }
    }
    // Candidate pairs share at least one node; count shared nodes per pair.
    for (ci, c) in cliques.iter().enumerate() {
        let mut shared: HashMap<usize, usize> = HashMap::new();
        for v in c {
            for &cj in &by_node[v] {
                if cj > ci {
                    *shared.entry(cj).or_insert(0) += 1;
                }
            }
        }
        for (cj, s) in shared {
            if s + 1 >= k {
                uf.union(ci, cj);
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<NodeId>> = BTreeMap::new();
    for (ci, c) in cliques.iter().enumerate() {
        let root = uf.find(ci);
        groups
            .entry(root)
            .or_default()
            .extend(c.iter().map(|&i| graph.nodes[i as usize]));
    }
    let mut out: Vec<Community> = groups.into_values().map(Community::from_set).collect();
    out.sort();
    Ok(out)
}

/// Convenience wrapper over an edge list.
pub fn communities<I>(edges: I, params: &CpmParams) -> Result<Vec<Community>>
where
    I: IntoIterator<Item = (NodeId, NodeId)>,
{
    percolate(&UndirectedGraph::from_edges(edges), params)
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}
