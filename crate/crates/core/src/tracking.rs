//! Group-meeting detection per window and identity tracking across windows.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpm::{self, CpmParams};
use crate::error::{Error, Result};
use crate::slicing::{self, SlicingParams, WindowGraph};
use crate::trace::{NodeId, Time, Trace};

/// Two compositions are the same group when their similarity exceeds this.
pub const SAME_GROUP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupMeeting {
    pub window_index: i64,
    /// Midpoint of the window.
    pub time: Time,
    /// Sorted, at least three members.
    pub members: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupTimeline {
    pub group_id: usize,
    pub meetings: Vec<GroupMeeting>,
    pub current_members: Vec<NodeId>,
}

impl GroupTimeline {
    pub fn meeting_times(&self) -> Vec<Time> {
        self.meetings.iter().map(|m| m.time).collect()
    }

    pub fn first_time(&self) -> Time {
        self.meetings[0].time
    }
}

/// Jaccard overlap of two sorted, duplicate-free member lists.
pub fn similarity(g1: &[NodeId], g2: &[NodeId]) -> Result<f64> {
    if g1.is_empty() || g2.is_empty() {
        return Err(Error::InvalidArgument(
            "similarity needs two non-empty groups".into(),
        ));
    }
    let inter = intersection_size(g1, g2);
    let union = g1.len() + g2.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Set-typed convenience over [`similarity`].
pub fn set_similarity(g1: &BTreeSet<NodeId>, g2: &BTreeSet<NodeId>) -> Result<f64> {
    let a: Vec<NodeId> = g1.iter().copied().collect();
    let b: Vec<NodeId> = g2.iter().copied().collect();
    similarity(&a, &b)
}

pub(crate) fn intersection_size(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// CPM communities of every thresholded window, aligned with `windows`.
pub fn detect_meetings(
    windows: &[WindowGraph],
    tw: Time,
    cpm_params: &CpmParams,
) -> Result<Vec<Vec<GroupMeeting>>> {
    windows
        .par_iter()
        .map(|w| {
            let comms = cpm::communities(w.edges.keys().copied(), cpm_params)?;
            Ok(comms
                .into_iter()
                .map(|c| GroupMeeting {
                    window_index: w.index,
                    time: w.index * tw + tw / 2,
                    members: c.members,
                })
                .collect())
        })
        .collect()
}

/// Assigns meetings to timelines, window by window.
///
/// Within a window every (meeting, live timeline) pair with similarity above
/// the threshold is a candidate; candidates are taken greedily by decreasing
/// similarity, then oldest timeline, then meeting order, each meeting and each
/// timeline at most once. Leftover meetings open new timelines.
pub fn track(meetings_by_window: &[Vec<GroupMeeting>]) -> Vec<GroupTimeline> {
    let mut timelines: Vec<GroupTimeline> = Vec::new();
    let mut index: HashMap<NodeId, Vec<usize>> = HashMap::new();
    let mut last_window: Option<i64> = None;

    for window in meetings_by_window {
        if window.is_empty() {
            continue;
        }
        let widx = window[0].window_index;
        debug_assert!(window.iter().all(|m| m.window_index == widx));
        debug_assert!(last_window.is_none_or(|l| widx > l), "windows out of order");
        last_window = Some(widx);

        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (mi, m) in window.iter().enumerate() {
            let mut seen: BTreeSet<usize> = BTreeSet::new();
            for n in &m.members {
                if let Some(ts) = index.get(n) {
                    seen.extend(ts.iter().copied());
                }
            }
            for ti in seen {
                let rho = similarity(&m.members, &timelines[ti].current_members)
                    .expect("members are non-empty");
                if rho > SAME_GROUP_THRESHOLD {
                    candidates.push((rho, ti, mi));
                }
            }
        }
        candidates.sort_by(|x, y| {
            y.0.total_cmp(&x.0)
                .then(x.1.cmp(&y.1))
                .then(x.2.cmp(&y.2))
        });

        let mut meeting_taken = vec![false; window.len()];
        let mut timeline_taken: BTreeSet<usize> = BTreeSet::new();
        let mut assignments: Vec<(usize, usize)> = Vec::new();
        for (_, ti, mi) in candidates {
            if meeting_taken[mi] || timeline_taken.contains(&ti) {
                continue;
            }
            meeting_taken[mi] = true;
            timeline_taken.insert(ti);
            assignments.push((ti, mi));
        }

        for (ti, mi) in assignments {
            let m = &window[mi];
            let tl = &mut timelines[ti];
            for n in &m.members {
                if tl.current_members.binary_search(n).is_err() {
                    index.entry(*n).or_default().push(ti);
                }
            }
            tl.current_members = m.members.clone();
            tl.meetings.push(m.clone());
        }
        for (mi, m) in window.iter().enumerate() {
            if meeting_taken[mi] {
                continue;
            }
            let ti = timelines.len();
            for n in &m.members {
                index.entry(*n).or_default().push(ti);
            }
            timelines.push(GroupTimeline {
                group_id: ti,
                meetings: vec![m.clone()],
                current_members: m.members.clone(),
            });
        }
    }
    timelines
}

/// Slices, thresholds, detects and tracks in one pass.
pub fn timelines_from_trace(
    trace: &Trace,
    slicing: &SlicingParams,
    cpm_params: &CpmParams,
) -> Result<Vec<GroupTimeline>> {
    let windows = slicing::social_windows(trace, slicing)?;
    let meetings = detect_meetings(&windows, slicing.tw, cpm_params)?;
    Ok(track(&meetings))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecentGroup {
    pub group_id: usize,
    /// Composition at the latest meeting inside the lookback.
    pub members: Vec<NodeId>,
    pub meeting_count: usize,
}

/// Timelines with at least one meeting in `[now - lookback, now)`.
pub fn recent_groups(timelines: &[GroupTimeline], now: Time, lookback: Time) -> Vec<RecentGroup> {
    assert!(lookback > 0, "lookback must be positive");
    let from = now - lookback;
    timelines
        .iter()
        .filter_map(|tl| {
            let lo = tl.meetings.partition_point(|m| m.time < from);
            let hi = tl.meetings.partition_point(|m| m.time < now);
            (hi > lo).then(|| RecentGroup {
                group_id: tl.group_id,
                members: tl.meetings[hi - 1].members.clone(),
                meeting_count: hi - lo,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct TimelineJson<'a> {
    group_id: usize,
    windows: Vec<i64>,
    members: Vec<&'a [NodeId]>,
}

/// JSON export: group id, window indices and member list per meeting.
pub fn write_timelines_json<W: Write>(timelines: &[GroupTimeline], w: W) -> Result<()> {
    let doc: Vec<TimelineJson> = timelines
        .iter()
        .map(|t| TimelineJson {
            group_id: t.group_id,
            windows: t.meetings.iter().map(|m| m.window_index).collect(),
            members: t.meetings.iter().map(|m| m.members.as_slice()).collect(),
        })
        .collect();
    serde_json::to_writer_pretty(w, &doc)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::HOUR;
    use proptest::prelude::*;

    fn set(ids: &[u32]) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = ids.iter().map(|&i| NodeId(i)).collect();
        v.sort_unstable();
        v
    }

    fn meeting(window: i64, ids: &[u32]) -> GroupMeeting {
        GroupMeeting {
            window_index: window,
            time: window * HOUR + HOUR / 2,
            members: set(ids),
        }
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity(&set(&[0, 1, 2]), &set(&[0, 1, 2])).unwrap(), 1.0);
        assert_eq!(similarity(&set(&[0, 1, 2]), &set(&[3, 4, 5])).unwrap(), 0.0);
        assert_eq!(similarity(&set(&[0, 1, 2, 3]), &set(&[2, 3, 4])).unwrap(), 0.4);
        assert!(similarity(&[], &set(&[1])).is_err());
    }

    #[test]
    fn same_group_twice_is_one_timeline() {
        let t = track(&[vec![meeting(0, &[0, 1, 2])], vec![meeting(1, &[0, 1, 2])]]);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].meetings.len(), 2);
    }

    #[test]
    fn half_overlap_splits() {
        let t = track(&[vec![meeting(0, &[0, 1, 2])], vec![meeting(1, &[0, 1, 3])]]);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn sixty_percent_overlap_merges() {
        let t = track(&[vec![meeting(0, &[0, 1, 2, 3])], vec![meeting(1, &[0, 1, 2, 4])]]);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].meetings.len(), 2);
        assert_eq!(t[0].current_members, set(&[0, 1, 2, 4]));
    }

    #[test]
    fn matches_across_skipped_windows() {
        let t = track(&[
            vec![meeting(0, &[0, 1, 2])],
            vec![meeting(5, &[7, 8, 9])],
            vec![meeting(24, &[0, 1, 2])],
        ]);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].meetings.len(), 2);
    }

    #[test]
    fn timeline_takes_one_meeting_per_window() {
        let t = track(&[
            vec![meeting(0, &[0, 1, 2, 3, 4, 5])],
            vec![meeting(1, &[0, 1, 2, 3, 4]), meeting(1, &[1, 2, 3, 4, 5])],
        ]);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].meetings.len(), 2);
        assert_eq!(t[1].meetings.len(), 1);
    }

    #[test]
    fn ties_go_to_oldest_timeline() {
        let t = track(&[
            vec![meeting(0, &[0, 1, 2])],
            vec![meeting(1, &[0, 1, 3])],
            vec![meeting(2, &[0, 1, 2, 3])],
        ]);
        // Window 2 scores 0.75 against both timelines.
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].meetings.len(), 2);
        assert_eq!(t[1].meetings.len(), 1);
    }

    #[test]
    fn recent_group_counts() {
        let daily: Vec<Vec<GroupMeeting>> =
            (0..21).map(|d| vec![meeting(d * 24, &[0, 1, 2])]).collect();
        let t = track(&daily);
        let now = 21 * 24 * HOUR;
        let r = recent_groups(&t, now, 21 * 24 * HOUR);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].meeting_count, 21);
        assert!(recent_groups(&t, now + 30 * 24 * HOUR, 24 * HOUR).is_empty());
        let one = recent_groups(&t, 20 * 24 * HOUR + HOUR, HOUR);
        assert_eq!(one[0].meeting_count, 1);
    }

    #[test]
    fn json_export_shape() {
        let t = track(&[vec![meeting(0, &[0, 1, 2])], vec![meeting(3, &[0, 1, 2])]]);
        let mut buf = Vec::new();
        write_timelines_json(&t, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v[0]["group_id"], 0);
        assert_eq!(v[0]["windows"], serde_json::json!([0, 3]));
        assert_eq!(v[0]["members"][1], serde_json::json!([0, 1, 2]));
    }

    fn arb_set() -> impl Strategy<Value = Vec<NodeId>> {
        proptest::collection::btree_set(0u32..12, 1..8)
            .prop_map(|s| s.into_iter().map(NodeId).collect())
    }

    proptest! {
        #[test]
        fn similarity_properties(a in arb_set(), b in arb_set()) {
            let ab = similarity(&a, &b).unwrap();
            let ba = similarity(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab == 1.0, a == b);
            prop_assert_eq!(ab == 0.0, intersection_size(&a, &b) == 0);
        }

        #[test]
        fn tracking_invariants(stream in proptest::collection::vec(
            proptest::collection::vec(arb_set().prop_filter("3+", |s| s.len() >= 3), 0..3), 1..12)
        ) {
            let windows: Vec<Vec<GroupMeeting>> = stream
                .iter()
                .enumerate()
                .map(|(w, ms)| ms.iter().map(|m| GroupMeeting {
                    window_index: w as i64,
                    time: w as i64 * HOUR,
                    members: m.clone(),
                }).collect())
                .collect();
            let t1 = track(&windows);
            let t2 = track(&windows);
            prop_assert_eq!(&t1, &t2);
            let total: usize = windows.iter().map(Vec::len).sum();
            prop_assert_eq!(t1.iter().map(|t| t.meetings.len()).sum::<usize>(), total);
            for tl in &t1 {
                for pair in tl.meetings.windows(2) {
                    prop_assert!(pair[0].window_index < pair[1].window_index);
                    prop_assert!(similarity(&pair[0].members, &pair[1].members).unwrap() > 0.5);
                }
            }
        }
    }
}
