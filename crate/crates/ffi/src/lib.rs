//! C ABI over the groupsnet core.
//!
//! Traces and group timelines live behind opaque handles owned by the
//! caller and released with the matching `*_free`. Every entry point
//! returns a [`GnStatus`]; on failure `gn_last_error_message` describes the
//! most recent error on the calling thread. Node ids are the dense ids of
//! the trace (`0..node_count`).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use groupsnet::baselines::{self, BubbleParams};
use groupsnet::cpm::CpmParams;
use groupsnet::replay::{self, MessageSpec, Policy};
use groupsnet::routing;
use groupsnet::slicing::SlicingParams;
use groupsnet::synth::{self, SynthConfig};
use groupsnet::trace::{self as gtrace, ContactEvent, CsvSchema, NodeId, Trace, DAY};
use groupsnet::tracking::{self, GroupTimeline};
use groupsnet::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Schema = 5,
    Config = 6,
    CliqueCap = 7,
    Degenerate = 8,
    Serialization = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnPolicy {
    Groupsnet = 0,
    Bubble = 1,
    Flooding = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnWeightMode {
    /// Counts for instantaneous traces, seconds for interval traces.
    Auto = 0,
    Count = 1,
    Duration = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GnReplayResult {
    pub delivered: bool,
    /// Delivery time; meaningful only when `delivered`.
    pub delivered_at: i64,
    pub transmissions: usize,
    pub carriers: usize,
}

pub struct GnTrace {
    inner: Trace,
}

pub struct GnGroups {
    timelines: Vec<GroupTimeline>,
    slicing: SlicingParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GnStatus {
    match e {
        Error::Io { .. } => GnStatus::Io,
        Error::Parse { .. } => GnStatus::Parse,
        Error::Schema(_) => GnStatus::Schema,
        Error::Config(_) => GnStatus::Config,
        Error::InvalidArgument(_) => GnStatus::InvalidArgument,
        Error::CliqueCapExceeded { .. } => GnStatus::CliqueCap,
        Error::Degenerate(_) => GnStatus::Degenerate,
        Error::Serde(_) => GnStatus::Serialization,
    }
}

struct Fail(GnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GnStatus::NullPointer, format!("{what} is null"))
}

fn guard<F>(body: F) -> GnStatus
where
    F: FnOnce() -> Result<(), Fail>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => GnStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GnStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(GnStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn node(t: &Trace, id: u32, what: &str) -> Result<NodeId, Fail> {
    if (id as usize) < t.node_count() {
        Ok(NodeId(id))
    } else {
        Err(Fail(GnStatus::InvalidArgument, format!("{what} {id} out of range")))
    }
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn gn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a contact CSV with columns `a,b,start[,end]`.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gn_trace_load_csv(path: *const c_char, out: *mut *mut GnTrace) -> GnStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let ing = gtrace::ingest_csv(path, &CsvSchema::default(), 0)?;
        write_out(out, Box::into_raw(Box::new(GnTrace { inner: ing.trace })), "out")
    })
}

/// Builds a trace from parallel arrays. `end` may be null for an
/// instantaneous trace.
///
/// # Safety
/// `a`, `b`, `start` (and `end` when non-null) must point to `len` elements.
#[no_mangle]
pub unsafe extern "C" fn gn_trace_from_events(
    a: *const u32,
    b: *const u32,
    start: *const i64,
    end: *const i64,
    len: usize,
    node_count: usize,
    out: *mut *mut GnTrace,
) -> GnStatus {
    guard(|| {
        if len > 0 && (a.is_null() || b.is_null() || start.is_null()) {
            return Err(null("event array"));
        }
        let mut events = Vec::with_capacity(len);
        for i in 0..len {
            let (x, y) = (*a.add(i), *b.add(i));
            if x as usize >= node_count || y as usize >= node_count {
                return Err(Fail(GnStatus::InvalidArgument, format!("event {i} names a node beyond node_count")));
            }
            let e = (!end.is_null()).then(|| *end.add(i));
            events.push(ContactEvent::new(NodeId(x), NodeId(y), *start.add(i), e)?);
        }
        let t = Trace::new(events, node_count, 0)?;
        write_out(out, Box::into_raw(Box::new(GnTrace { inner: t })), "out")
    })
}

/// Generates a synthetic trace. `config_toml` may be null for defaults.
///
/// # Safety
/// `config_toml` must be null or a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gn_trace_synthetic(config_toml: *const c_char, out: *mut *mut GnTrace) -> GnStatus {
    guard(|| {
        let cfg = if config_toml.is_null() {
            SynthConfig::default()
        } else {
            SynthConfig::from_toml_str(c_str(config_toml, "config_toml")?)?
        };
        let t = synth::generate_synthetic(&cfg)?;
        write_out(out, Box::into_raw(Box::new(GnTrace { inner: t })), "out")
    })
}

/// # Safety
/// `trace` must come from a `gn_trace_*` constructor; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gn_trace_node_count(trace: *const GnTrace, out: *mut usize) -> GnStatus {
    guard(|| write_out(out, as_ref(trace, "trace")?.inner.node_count(), "out"))
}

/// # Safety
/// `trace` must come from a `gn_trace_*` constructor; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gn_trace_event_count(trace: *const GnTrace, out: *mut usize) -> GnStatus {
    guard(|| write_out(out, as_ref(trace, "trace")?.inner.len(), "out"))
}

/// Releases a trace. Null is ignored.
///
/// # Safety
/// `trace` must be null or an unreleased handle.
#[no_mangle]
pub unsafe extern "C" fn gn_trace_free(trace: *mut GnTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Slices, thresholds, detects and tracks group meetings. `w_th <= 0`
/// selects the default for the weight mode.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gn_groups_detect(
    trace: *const GnTrace,
    tw: i64,
    w_th: i64,
    weight_mode: GnWeightMode,
    k: usize,
    out: *mut *mut GnGroups,
) -> GnStatus {
    guard(|| {
        let t = &as_ref(trace, "trace")?.inner;
        let base = match weight_mode {
            GnWeightMode::Auto => SlicingParams::for_trace(t),
            GnWeightMode::Count => SlicingParams::count(),
            GnWeightMode::Duration => SlicingParams::duration(),
        };
        let slicing = SlicingParams {
            tw,
            w_th: if w_th > 0 { w_th } else { base.w_th },
            weight_mode: base.weight_mode,
        };
        slicing.validate_for(t)?;
        let timelines = tracking::timelines_from_trace(t, &slicing, &CpmParams::with_k(k))?;
        write_out(out, Box::into_raw(Box::new(GnGroups { timelines, slicing })), "out")
    })
}

/// Number of tracked group timelines.
///
/// # Safety
/// `groups` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gn_groups_count(groups: *const GnGroups, out: *mut usize) -> GnStatus {
    guard(|| write_out(out, as_ref(groups, "groups")?.timelines.len(), "out"))
}

/// Meetings recorded for timeline `index`.
///
/// # Safety
/// `groups` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gn_groups_meeting_count(groups: *const GnGroups, index: usize, out: *mut usize) -> GnStatus {
    guard(|| {
        let g = as_ref(groups, "groups")?;
        let tl = g
            .timelines
            .get(index)
            .ok_or_else(|| Fail(GnStatus::InvalidArgument, format!("timeline {index} out of range")))?;
        write_out(out, tl.meetings.len(), "out")
    })
}

/// # Safety
/// `groups` must be null or an unreleased handle.
#[no_mangle]
pub unsafe extern "C" fn gn_groups_free(groups: *mut GnGroups) {
    if !groups.is_null() {
        drop(Box::from_raw(groups));
    }
}

/// Most probable group route from groups met in `[now - lookback, now)`.
///
/// On success `*found` says whether a route exists. Group ids are written
/// to `group_ids` (capacity `cap`) and the count to `*len`; a short buffer
/// yields `BufferTooSmall` with `*len` set to the required size.
///
/// # Safety
/// Pointers must be valid; `group_ids` may be null when `cap` is 0.
#[no_mangle]
pub unsafe extern "C" fn gn_route(
    groups: *const GnGroups,
    origin: u32,
    destination: u32,
    now: i64,
    lookback: i64,
    ttl: i64,
    found: *mut bool,
    probability: *mut f64,
    group_ids: *mut usize,
    cap: usize,
    len: *mut usize,
) -> GnStatus {
    guard(|| {
        let g = as_ref(groups, "groups")?;
        if lookback <= 0 {
            return Err(Fail(GnStatus::InvalidArgument, "lookback must be positive".into()));
        }
        let route = routing::plan_route(&g.timelines, NodeId(origin), NodeId(destination), now, lookback, ttl)?;
        let ids = route.as_ref().map(|r| r.groups.clone()).unwrap_or_default();
        write_out(found, route.is_some(), "found")?;
        write_out(probability, route.as_ref().map_or(0.0, |r| r.probability), "probability")?;
        write_out(len, ids.len(), "len")?;
        if ids.len() > cap {
            return Err(Fail(GnStatus::BufferTooSmall, format!("route needs {} slots", ids.len())));
        }
        if !ids.is_empty() {
            if group_ids.is_null() {
                return Err(null("group_ids"));
            }
            ptr::copy_nonoverlapping(ids.as_ptr(), group_ids, ids.len());
        }
        Ok(())
    })
}

/// Replays one message.
///
/// GROUPS-NET needs `groups` and plans at the start of the send time's
/// window; Bubble Rap trains on the day-aligned `lookback` before sending.
/// Flooding ignores both.
///
/// # Safety
/// `trace` must be a live handle, `groups` null or live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gn_replay(
    trace: *const GnTrace,
    groups: *const GnGroups,
    policy: GnPolicy,
    origin: u32,
    destination: u32,
    send_time: i64,
    ttl: i64,
    lookback: i64,
    out: *mut GnReplayResult,
) -> GnStatus {
    guard(|| {
        let t = &as_ref(trace, "trace")?.inner;
        let spec = MessageSpec {
            origin: node(t, origin, "origin")?,
            destination: node(t, destination, "destination")?,
            send_time,
            ttl,
        };
        spec.validate(t)?;
        if lookback <= 0 {
            return Err(Fail(GnStatus::InvalidArgument, "lookback must be positive".into()));
        }
        let run = match policy {
            GnPolicy::Flooding => replay::replay_message(t, &spec, Policy::Flooding)?,
            GnPolicy::Bubble => {
                let to = send_time.div_euclid(DAY) * DAY;
                let state = baselines::build_bubble_state(t, to - lookback, to, &BubbleParams::default())?;
                replay::replay_message(t, &spec, Policy::Bubble { state: &state })?
            }
            GnPolicy::Groupsnet => {
                let g = as_ref(groups, "groups")?;
                let now = send_time.div_euclid(g.slicing.tw) * g.slicing.tw;
                let route = routing::plan_route(&g.timelines, spec.origin, spec.destination, now, lookback, ttl)?;
                let list = routing::forwarding_list(route.as_ref(), spec.destination);
                replay::replay_message(t, &spec, Policy::GroupsNet { forwarding: &list })?
            }
        };
        let res = GnReplayResult {
            delivered: run.delivered_at.is_some(),
            delivered_at: run.delivered_at.unwrap_or(0),
            transmissions: run.transmissions.len(),
            carriers: run.carriers.len(),
        };
        write_out(out, res, "out")
    })
}

/// Jaccard similarity of two node-id sets.
///
/// # Safety
/// `a` and `b` must point to `a_len` and `b_len` elements.
#[no_mangle]
pub unsafe extern "C" fn gn_similarity(a: *const u32, a_len: usize, b: *const u32, b_len: usize, out: *mut f64) -> GnStatus {
    guard(|| {
        if (a_len > 0 && a.is_null()) || (b_len > 0 && b.is_null()) {
            return Err(null("member array"));
        }
        let collect = |p: *const u32, n: usize| -> Vec<NodeId> {
            let mut v: Vec<NodeId> = (0..n).map(|i| NodeId(*p.add(i))).collect();
            v.sort();
            v.dedup();
            v
        };
        let s = tracking::similarity(&collect(a, a_len), &collect(b, b_len))?;
        write_out(out, s, "out")
    })
}

/// Probability that a group seen `count` times in `lookback` seconds
/// meets again within `ttl` seconds.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gn_remeet_probability(count: usize, lookback: i64, ttl: i64, out: *mut f64) -> GnStatus {
    guard(|| write_out(out, routing::remeet_probability(count, lookback, ttl)?, "out"))
}
