//! Contact-trace data model and CSV ingestion.
//!
//! A trace is an immutable, start-ordered list of pairwise contacts between
//! densely numbered nodes. Timestamps are integer seconds from the trace
//! epoch. The CSV format is `a,b,start[,end]`, one contact per line.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds since the trace epoch.
pub type Time = i64;

pub const HOUR: Time = 3_600;
pub const DAY: Time = 86_400;

/// Dense node index in `0..node_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// One pairwise proximity record, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContactEvent {
    pub start: Time,
    pub a: NodeId,
    pub b: NodeId,
    pub end: Option<Time>,
}

impl ContactEvent {
    /// Builds a canonical event. Fails on self-contacts and on `end < start`.
    pub fn new(x: NodeId, y: NodeId, start: Time, end: Option<Time>) -> Result<Self> {
        if x == y {
            return Err(Error::InvalidArgument(format!("self-contact on node {x}")));
        }
        if let Some(e) = end {
            if e < start {
                return Err(Error::InvalidArgument(format!(
                    "contact end {e} precedes start {start}"
                )));
            }
        }
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        Ok(ContactEvent { start, a, b, end })
    }

    pub fn instant(x: u32, y: u32, start: Time) -> Self {
        Self::new(NodeId(x), NodeId(y), start, None).expect("valid instantaneous contact")
    }

    pub fn interval(x: u32, y: u32, start: Time, end: Time) -> Self {
        Self::new(NodeId(x), NodeId(y), start, Some(end)).expect("valid interval contact")
    }

    #[inline]
    pub fn pair(&self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }

    #[inline]
    pub fn involves(&self, n: NodeId) -> bool {
        self.a == n || self.b == n
    }

    /// The endpoint opposite to `n`. Caller guarantees `n` is an endpoint.
    #[inline]
    pub fn other(&self, n: NodeId) -> NodeId {
        if self.a == n {
            self.b
        } else {
            self.a
        }
    }

    /// Length in seconds; zero for instantaneous contacts.
    pub fn duration(&self) -> Time {
        self.end.map(|e| e - self.start).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DurationMode {
    Instantaneous,
    Interval,
}

impl fmt::Display for DurationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DurationMode::Instantaneous => f.write_str("instantaneous"),
            DurationMode::Interval => f.write_str("interval"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    events: Vec<ContactEvent>,
    node_count: usize,
    duration_mode: DurationMode,
    epoch: Time,
    original_ids: Vec<u64>,
}

impl Trace {
    /// Builds a trace over nodes `0..node_count` with the identity id map.
    /// Events are canonicalized and sorted.
    pub fn new(mut events: Vec<ContactEvent>, node_count: usize, epoch: Time) -> Result<Self> {
        for ev in &events {
            if ev.a == ev.b {
                return Err(Error::InvalidArgument(format!("self-contact on node {}", ev.a)));
            }
            if ev.b.index() >= node_count {
                return Err(Error::InvalidArgument(format!(
                    "node {} out of range for node_count {node_count}",
                    ev.b
                )));
            }
            if matches!(ev.end, Some(e) if e < ev.start) {
                return Err(Error::InvalidArgument("contact end precedes start".into()));
            }
        }
        for ev in events.iter_mut() {
            if ev.a > ev.b {
                std::mem::swap(&mut ev.a, &mut ev.b);
            }
        }
        events.sort_unstable();
        let duration_mode = infer_mode(&events);
        Ok(Trace {
            events,
            node_count,
            duration_mode,
            epoch,
            original_ids: (0..node_count as u64).collect(),
        })
    }

    pub fn events(&self) -> &[ContactEvent] {
        &self.events
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn duration_mode(&self) -> DurationMode {
        self.duration_mode
    }

    pub fn epoch(&self) -> Time {
        self.epoch
    }

    /// Original (pre-remapping) identifier of every dense node id.
    pub fn original_ids(&self) -> &[u64] {
        &self.original_ids
    }

    pub fn original_id(&self, n: NodeId) -> u64 {
        self.original_ids[n.index()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count as u32).map(NodeId)
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// Latest instant covered by any contact (start, or end when present).
    pub fn span_end(&self) -> Time {
        self.events
            .iter()
            .map(|e| e.end.unwrap_or(e.start))
            .max()
            .unwrap_or(0)
    }

    /// Events whose start lies in `[from, to]`.
    pub fn events_between(&self, from: Time, to: Time) -> &[ContactEvent] {
        let lo = self.events.partition_point(|e| e.start < from);
        let hi = self.events.partition_point(|e| e.start <= to);
        &self.events[lo..hi.max(lo)]
    }

    /// Events whose start lies in `[from, to)`.
    pub fn events_in(&self, from: Time, to: Time) -> &[ContactEvent] {
        let lo = self.events.partition_point(|e| e.start < from);
        let hi = self.events.partition_point(|e| e.start < to);
        &self.events[lo..hi.max(lo)]
    }

    /// Restricts the trace to `keep`, renumbering survivors densely in
    /// ascending id order. Original ids carry over.
    pub fn restrict(&self, keep: &BTreeSet<NodeId>) -> Trace {
        let mut remap = vec![u32::MAX; self.node_count];
        let mut original_ids = Vec::with_capacity(keep.len());
        for (new, old) in keep.iter().enumerate() {
            remap[old.index()] = new as u32;
            original_ids.push(self.original_ids[old.index()]);
        }
        let events: Vec<ContactEvent> = self
            .events
            .iter()
            .filter_map(|e| {
                let (a, b) = (remap[e.a.index()], remap[e.b.index()]);
                (a != u32::MAX && b != u32::MAX).then(|| ContactEvent {
                    start: e.start,
                    a: NodeId(a.min(b)),
                    b: NodeId(a.max(b)),
                    end: e.end,
                })
            })
            .collect();
        let mut events = events;
        events.sort_unstable();
        let duration_mode = if events.is_empty() {
            self.duration_mode
        } else {
            infer_mode(&events)
        };
        Trace {
            events,
            node_count: keep.len(),
            duration_mode,
            epoch: self.epoch,
            original_ids,
        }
    }

    /// Writes the canonical CSV form using original node ids.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let with_end = self.duration_mode == DurationMode::Interval;
        if with_end {
            wtr.write_record(["a", "b", "start", "end"])?;
        } else {
            wtr.write_record(["a", "b", "start"])?;
        }
        for e in &self.events {
            let a = self.original_id(e.a).to_string();
            let b = self.original_id(e.b).to_string();
            let s = e.start.to_string();
            if with_end {
                let end = e.end.map(|v| v.to_string()).unwrap_or_default();
                wtr.write_record([a, b, s, end])?;
            } else {
                wtr.write_record([a, b, s])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        buf
    }
}

fn infer_mode(events: &[ContactEvent]) -> DurationMode {
    if !events.is_empty() && events.iter().all(|e| e.end.is_some()) {
        DurationMode::Interval
    } else {
        DurationMode::Instantaneous
    }
}

/// Column names used by [`ingest_csv`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub a_col: String,
    pub b_col: String,
    pub start_col: String,
    /// Read when present in the header; `None` ignores any end column.
    pub end_col: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            a_col: "a".into(),
            b_col: "b".into(),
            start_col: "start".into(),
            end_col: Some("end".into()),
        }
    }
}

/// Rows dropped during ingestion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestWarnings {
    pub self_contacts: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub trace: Trace,
    pub warnings: IngestWarnings,
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema, epoch: Time) -> Result<Ingested> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(std::io::BufReader::new(f), schema, epoch)
}

pub fn ingest_reader<R: Read>(reader: R, schema: &CsvSchema, epoch: Time) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| {
        Error::Schema(format!(
            "missing column `{name}`; expected header `a,b,start[,end]` (found `{}`)",
            headers.iter().collect::<Vec<_>>().join(",")
        ))
    };
    let a_idx = col(&schema.a_col).ok_or_else(|| missing(&schema.a_col))?;
    let b_idx = col(&schema.b_col).ok_or_else(|| missing(&schema.b_col))?;
    let s_idx = col(&schema.start_col).ok_or_else(|| missing(&schema.start_col))?;
    let e_idx = schema.end_col.as_deref().and_then(col);

    let mut raw: Vec<(u64, u64, Time, Option<Time>)> = Vec::new();
    let mut warnings = IngestWarnings::default();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize, name: &str| -> Result<&str> {
            rec.get(idx).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing field `{name}`"),
            })
        };
        let int = |s: &str, name: &str| -> Result<i64> {
            s.parse::<i64>().map_err(|_| Error::Parse {
                line,
                message: format!("field `{name}` is not an integer: `{s}`"),
            })
        };
        let id = |s: &str, name: &str| -> Result<u64> {
            s.parse::<u64>().map_err(|_| Error::Parse {
                line,
                message: format!("field `{name}` is not a non-negative integer id: `{s}`"),
            })
        };
        let a = id(field(a_idx, &schema.a_col)?, &schema.a_col)?;
        let b = id(field(b_idx, &schema.b_col)?, &schema.b_col)?;
        let start = int(field(s_idx, &schema.start_col)?, &schema.start_col)?;
        let end = match e_idx {
            Some(i) => match rec.get(i) {
                Some(s) if !s.is_empty() => Some(int(s, "end")?),
                _ => None,
            },
            None => None,
        };
        if let Some(e) = end {
            if e < start {
                return Err(Error::Parse {
                    line,
                    message: format!("end {e} precedes start {start}"),
                });
            }
        }
        if a == b {
            warnings.self_contacts += 1;
            continue;
        }
        raw.push((a.min(b), a.max(b), start, end));
    }

    let ids: BTreeSet<u64> = raw.iter().flat_map(|r| [r.0, r.1]).collect();
    let original_ids: Vec<u64> = ids.into_iter().collect();
    let dense: HashMap<u64, u32> = original_ids
        .iter()
        .enumerate()
        .map(|(i, &o)| (o, i as u32))
        .collect();

    let mut events: Vec<ContactEvent> = raw
        .into_iter()
        .map(|(a, b, start, end)| ContactEvent {
            start,
            a: NodeId(dense[&a]),
            b: NodeId(dense[&b]),
            end,
        })
        .collect();
    events.sort_unstable();
    let before = events.len();
    events.dedup();
    warnings.duplicates = before - events.len();

    let duration_mode = infer_mode(&events);
    Ok(Ingested {
        trace: Trace {
            node_count: original_ids.len(),
            events,
            duration_mode,
            epoch,
            original_ids,
        },
        warnings,
    })
}
