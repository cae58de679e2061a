//! Time-window contact graphs.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{DurationMode, NodeId, Time, Trace, HOUR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Number of contacts whose start falls in the window.
    Count,
    /// Seconds of contact overlapping the window.
    Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlicingParams {
    pub tw: Time,
    pub w_th: i64,
    pub weight_mode: WeightMode,
}

impl SlicingParams {
    pub const DEFAULT_COUNT_THRESHOLD: i64 = 2;
    pub const DEFAULT_DURATION_THRESHOLD: i64 = 600;

    pub fn count() -> Self {
        SlicingParams {
            tw: HOUR,
            w_th: Self::DEFAULT_COUNT_THRESHOLD,
            weight_mode: WeightMode::Count,
        }
    }

    pub fn duration() -> Self {
        SlicingParams {
            tw: HOUR,
            w_th: Self::DEFAULT_DURATION_THRESHOLD,
            weight_mode: WeightMode::Duration,
        }
    }

    /// Defaults matching the trace: contact counts for instantaneous traces,
    /// contact seconds for interval traces.
    pub fn for_trace(trace: &Trace) -> Self {
        match trace.duration_mode() {
            DurationMode::Instantaneous => Self::count(),
            DurationMode::Interval => Self::duration(),
        }
    }

    pub fn validate_for(&self, trace: &Trace) -> Result<()> {
        if self.tw <= 0 {
            return Err(Error::Config(format!("tw must be positive, got {}", self.tw)));
        }
        if self.w_th <= 0 {
            return Err(Error::Config(format!("w_th must be positive, got {}", self.w_th)));
        }
        if self.weight_mode == WeightMode::Duration
            && trace.duration_mode() != DurationMode::Interval
            && !trace.is_empty()
        {
            return Err(Error::Config(
                "duration weights need a trace with contact end times".into(),
            ));
        }
        Ok(())
    }
}

impl Default for SlicingParams {
    fn default() -> Self {
        Self::count()
    }
}

/// Contacts aggregated over window `[index*tw, (index+1)*tw)`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WindowGraph {
    pub index: i64,
    pub edges: BTreeMap<(NodeId, NodeId), i64>,
}

impl WindowGraph {
    pub fn new(index: i64) -> Self {
        WindowGraph {
            index,
            edges: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn add(&mut self, a: NodeId, b: NodeId, w: i64) {
        let key = if a < b { (a, b) } else { (b, a) };
        *self.edges.entry(key).or_insert(0) += w;
    }

    pub fn total_weight(&self) -> i64 {
        self.edges.values().sum()
    }

    /// Debug dump as `a,b,weight`.
    pub fn write_edge_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "a,b,weight")?;
        for ((a, b), wt) in &self.edges {
            writeln!(w, "{a},{b},{wt}")?;
        }
        Ok(())
    }
}

/// Non-empty window graphs in window order.
pub fn slice(trace: &Trace, params: &SlicingParams) -> Result<Vec<WindowGraph>> {
    params.validate_for(trace)?;
    let tw = params.tw;
    let mut windows: BTreeMap<i64, WindowGraph> = BTreeMap::new();
    let mut add = |idx: i64, a: NodeId, b: NodeId, w: i64| {
        windows
            .entry(idx)
            .or_insert_with(|| WindowGraph::new(idx))
            .add(a, b, w);
    };
    for ev in trace.events() {
        match params.weight_mode {
            WeightMode::Count => add(ev.start.div_euclid(tw), ev.a, ev.b, 1),
            WeightMode::Duration => {
                let end = ev.end.unwrap_or(ev.start);
                if end <= ev.start {
                    continue;
                }
                let first = ev.start.div_euclid(tw);
                let last = (end - 1).div_euclid(tw);
                for idx in first..=last {
                    let lo = ev.start.max(idx * tw);
                    let hi = end.min((idx + 1) * tw);
                    if hi > lo {
                        add(idx, ev.a, ev.b, hi - lo);
                    }
                }
            }
        }
    }
    Ok(windows.into_values().collect())
}

/// Keeps exactly the edges with weight `>= w_th`.
pub fn threshold(graph: &WindowGraph, w_th: i64) -> WindowGraph {
    WindowGraph {
        index: graph.index,
        edges: graph
            .edges
            .iter()
            .filter(|(_, &w)| w >= w_th)
            .map(|(&k, &w)| (k, w))
            .collect(),
    }
}

/// Slices and thresholds, dropping windows left without edges.
pub fn social_windows(trace: &Trace, params: &SlicingParams) -> Result<Vec<WindowGraph>> {
    Ok(slice(trace, params)?
        .iter()
        .map(|g| threshold(g, params.w_th))
        .filter(|g| !g.is_empty())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::ContactEvent;
    use proptest::prelude::*;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    #[test]
    fn counts_contacts_in_window() {
        let t = Trace::new(
            vec![ContactEvent::instant(0, 1, 100), ContactEvent::instant(1, 0, 200)],
            2,
            0,
        )
        .unwrap();
        let w = slice(&t, &SlicingParams::count()).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].index, 0);
        assert_eq!(w[0].edges[&(n(0), n(1))], 2);
    }

    #[test]
    fn interval_overlap_split_across_windows() {
        let t = Trace::new(vec![ContactEvent::interval(0, 1, 3500, 3700)], 2, 0).unwrap();
        let w = slice(&t, &SlicingParams::duration()).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!((w[0].index, w[0].edges[&(n(0), n(1))]), (0, 100));
        assert_eq!((w[1].index, w[1].edges[&(n(0), n(1))]), (1, 100));
    }

    #[test]
    fn empty_trace_gives_no_windows() {
        let t = Trace::new(vec![], 0, 0).unwrap();
        assert!(slice(&t, &SlicingParams::count()).unwrap().is_empty());
    }

    #[test]
    fn duration_mode_rejects_instantaneous_trace() {
        let t = Trace::new(vec![ContactEvent::instant(0, 1, 0)], 2, 0).unwrap();
        assert!(slice(&t, &SlicingParams::duration()).is_err());
        let bad = SlicingParams { tw: 0, ..SlicingParams::count() };
        assert!(slice(&t, &bad).is_err());
    }

    #[test]
    fn threshold_examples() {
        let mut g = WindowGraph::new(0);
        g.add(n(0), n(1), 1);
        g.add(n(0), n(2), 2);
        let kept = threshold(&g, 2);
        assert_eq!(kept.edges.len(), 1);
        assert_eq!(kept.edges[&(n(0), n(2))], 2);
        assert_eq!(threshold(&g, 1), g);
        assert!(threshold(&g, 3).is_empty());
    }

    #[test]
    fn edge_dump_format() {
        let mut g = WindowGraph::new(3);
        g.add(n(2), n(1), 4);
        let mut buf = Vec::new();
        g.write_edge_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b,weight\n1,2,4\n");
    }

    fn arb_events(interval: bool) -> impl Strategy<Value = Vec<ContactEvent>> {
        proptest::collection::vec((0u32..6, 0u32..6, 0i64..40_000, 0i64..9_000), 0..60).prop_map(
            move |rows| {
                rows.into_iter()
                    .filter(|(a, b, _, _)| a != b)
                    .map(|(a, b, s, d)| {
                        if interval {
                            ContactEvent::interval(a, b, s, s + d)
                        } else {
                            ContactEvent::instant(a, b, s)
                        }
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn count_weights_conserve_events(events in arb_events(false)) {
            let t = Trace::new(events, 6, 0).unwrap();
            let w = slice(&t, &SlicingParams::count()).unwrap();
            let total: i64 = w.iter().map(WindowGraph::total_weight).sum();
            prop_assert_eq!(total as usize, t.len());
        }

        #[test]
        fn duration_weights_conserve_seconds(events in arb_events(true)) {
            let t = Trace::new(events, 6, 0).unwrap();
            let w = slice(&t, &SlicingParams { tw: 1_000, ..SlicingParams::duration() }).unwrap();
            let mut per_pair: BTreeMap<(NodeId, NodeId), i64> = BTreeMap::new();
            for g in &w {
                for (k, v) in &g.edges {
                    prop_assert!(*v > 0);
                    *per_pair.entry(*k).or_default() += v;
                }
            }
            let mut expected: BTreeMap<(NodeId, NodeId), i64> = BTreeMap::new();
            for e in t.events() {
                if e.duration() > 0 {
                    *expected.entry(e.pair()).or_default() += e.duration();
                }
            }
            prop_assert_eq!(per_pair, expected);
        }

        #[test]
        fn threshold_is_monotone(events in arb_events(false), lo in 1i64..4, extra in 0i64..4) {
            let t = Trace::new(events, 6, 0).unwrap();
            for g in slice(&t, &SlicingParams::count()).unwrap() {
                let a = threshold(&g, lo);
                let b = threshold(&g, lo + extra);
                prop_assert!(b.edges.keys().all(|k| a.edges.contains_key(k)));
                prop_assert!(a.edges.values().all(|&w| w >= lo));
            }
        }
    }
}
