use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groupsnet")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn p(d: &Path) -> &str {
    d.to_str().unwrap()
}

const DAILY_GROUP: &str = "node_count = 6\ngroup_count = 1\ngroup_size_range = [4, 4]\n\
daily_meeting_prob = 1.0\nnoise_contact_rate = 0.0\nhorizon_days = 7\nseed = 3\n";

#[test]
fn ingest_reports_counts_and_mode() {
    let d = TempDir::new().unwrap();
    let csv = d.path().join("t.csv");
    fs::write(&csv, "a,b,start,end\n10,20,0,60\n20,30,100,160\n").unwrap();
    let out = d.path().join("out");
    ok(&["ingest", "--trace", p(&csv), "--out", p(&out)]);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["node_count"], 3);
    assert_eq!(s["event_count"], 2);
    assert_eq!(s["duration_mode"], "interval");
    assert!(out.join("trace.csv").exists());
}

#[test]
fn missing_column_is_a_schema_error() {
    let d = TempDir::new().unwrap();
    let csv = d.path().join("t.csv");
    fs::write(&csv, "a,start\n1,0\n").unwrap();
    let out = run(&["ingest", "--trace", p(&csv), "--out", p(&d.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn custom_columns_and_instant_mode() {
    let d = TempDir::new().unwrap();
    let csv = d.path().join("t.csv");
    fs::write(&csv, "u,v,ts\n1,2,5\n2,3,9\n").unwrap();
    let out = d.path().join("out");
    ok(&["ingest", "--trace", p(&csv), "--a-col", "u", "--b-col", "v", "--start-col", "ts", "--out", p(&out)]);
    assert_eq!(json(&out.join("summary.json"))["duration_mode"], "instantaneous");
}

#[test]
fn groups_on_daily_group_finds_one_timeline() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("s.toml");
    fs::write(&cfg, DAILY_GROUP).unwrap();
    let out = d.path().join("g");
    ok(&["groups", "--synth-config", p(&cfg), "--out", p(&out)]);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "groups");
    assert_eq!(m["config"]["timelines"], 1);
    assert_eq!(m["config"]["meetings"], 7);
    for f in ["timelines.json", "group_remeeting_pdf.csv", "re_encounter_pdf.csv", "hourly_contacts.csv", "poisson_fits.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn slicing_overrides_reach_manifest() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("s.toml");
    fs::write(&cfg, DAILY_GROUP).unwrap();
    let out = d.path().join("g");
    ok(&["groups", "--synth-config", p(&cfg), "--tw", "1800", "--wth", "3", "--out", p(&out)]);
    let s = &json(&out.join("manifest.json"))["config"]["slicing"];
    assert_eq!(s["tw"], 1800);
    assert_eq!(s["w_th"], 3);
}

#[test]
fn empty_trace_succeeds() {
    let d = TempDir::new().unwrap();
    let csv = d.path().join("t.csv");
    fs::write(&csv, "a,b,start\n").unwrap();
    let out = d.path().join("g");
    ok(&["groups", "--trace", p(&csv), "--out", p(&out)]);
    assert_eq!(json(&out.join("manifest.json"))["config"]["timelines"], 0);
}

#[test]
fn synth_then_simulate_flooding_only() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("s.toml");
    fs::write(&cfg, "node_count = 40\ngroup_count = 10\nhorizon_days = 10\nseed = 5\n").unwrap();
    let syn = d.path().join("syn");
    ok(&["synth", "--synth-config", p(&cfg), "--out", p(&syn)]);
    assert!(syn.join("groups.json").exists());
    let trace = syn.join("trace.csv");
    let sim = d.path().join("sim");
    ok(&[
        "--jobs", "2", "simulate", "--trace", p(&trace), "--messages", "20", "--seeds", "2",
        "--policies", "flooding", "--ttl-hours", "24", "--lookback-days", "3", "--sizes", "20,30",
        "--out", p(&sim),
    ]);
    let dr = fs::read_to_string(sim.join("delivery_ratio.csv")).unwrap();
    let mut lines = dr.lines();
    assert_eq!(lines.next(), Some("t_hours,mean,ci_low,ci_high,policy"));
    assert!(lines.all(|l| l.ends_with(",flooding")));
    let sc = fs::read_to_string(sim.join("overhead_scaling.csv")).unwrap();
    assert_eq!(sc.lines().count(), 3);
}

#[test]
fn multiple_ttls_write_subdirectories() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("s.toml");
    fs::write(&cfg, "node_count = 30\ngroup_count = 8\nhorizon_days = 8\n").unwrap();
    let sim = d.path().join("sim");
    ok(&[
        "simulate", "--synth-config", p(&cfg), "--messages", "10", "--seeds", "2",
        "--policies", "groupsnet,bubble", "--ttl-hours", "12,48", "--lookback-days", "3", "--out", p(&sim),
    ]);
    for h in [12, 48] {
        assert!(sim.join(format!("ttl_{h}h/benefit_cost.csv")).exists());
    }
    let one = run(&["simulate", "--synth-config", p(&cfg), "--seeds", "1", "--out", p(&sim)]);
    assert!(!one.status.success());
}

#[test]
fn route_and_subset() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("s.toml");
    fs::write(&cfg, DAILY_GROUP).unwrap();
    let syn = d.path().join("syn");
    ok(&["synth", "--synth-config", p(&cfg), "--out", p(&syn)]);
    let truth = json(&syn.join("groups.json"));
    let members: Vec<u64> = truth["groups"][0]["members"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    let trace = syn.join("trace.csv");
    let r = d.path().join("r");
    let (o, t) = (members[0].to_string(), members[1].to_string());
    ok(&["route", "--trace", p(&trace), "--origin", &o, "--dest", &t, "--at", "604800", "--lookback-days", "7", "--out", p(&r)]);
    let route = json(&r.join("route.json"));
    assert_eq!(route["probability"], 1.0);

    let s = d.path().join("sub");
    ok(&["subset", "--trace", p(&trace), "--sizes", "3", "--out", p(&s)]);
    assert!(s.join("subset_3.csv").exists());

    let bad = run(&["route", "--trace", p(&trace), "--origin", "999", "--dest", &t, "--at", "0", "--out", p(&r)]);
    assert!(!bad.status.success());
}
