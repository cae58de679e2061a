//! Contact and group-meeting regularity statistics.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slicing::{self, SlicingParams, WeightMode};
use crate::trace::{NodeId, Time, Trace, HOUR};
use crate::tracking::GroupTimeline;

/// Probability mass over fixed-width bins keyed by bin start.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Pmf {
    pub bin_width: i64,
    pub mass: BTreeMap<i64, f64>,
}

impl Pmf {
    /// Bins raw samples by `floor(x / bin_width) * bin_width` and normalizes.
    pub fn from_samples<I: IntoIterator<Item = i64>>(samples: I, bin_width: i64) -> Self {
        assert!(bin_width > 0, "bin width must be positive");
        let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
        for x in samples {
            *counts.entry(x.div_euclid(bin_width) * bin_width).or_insert(0) += 1;
        }
        Self::from_counts(counts, bin_width)
    }

    pub fn from_counts(counts: BTreeMap<i64, u64>, bin_width: i64) -> Self {
        let total: u64 = counts.values().sum();
        let mass = if total == 0 {
            BTreeMap::new()
        } else {
            counts
                .into_iter()
                .map(|(k, c)| (k, c as f64 / total as f64))
                .collect()
        };
        Pmf { bin_width, mass }
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.mass.values().sum()
    }

    pub fn get(&self, bin_start: i64) -> f64 {
        self.mass.get(&bin_start).copied().unwrap_or(0.0)
    }

    /// `bin_start,probability` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_start,probability")?;
        for (k, p) in &self.mass {
            writeln!(w, "{k},{p}")?;
        }
        Ok(())
    }
}

/// Gaps between successive contact starts of the same pair.
pub fn re_encounter_pdf(trace: &Trace, bin: i64) -> Pmf {
    let mut last: HashMap<(NodeId, NodeId), Time> = HashMap::new();
    let mut gaps = Vec::new();
    for e in trace.events() {
        if let Some(prev) = last.insert(e.pair(), e.start) {
            gaps.push(e.start - prev);
        }
    }
    Pmf::from_samples(gaps, bin)
}

/// Distribution of contacts per (pair, hour) over pairs that met in that hour.
pub fn hourly_contact_histogram(trace: &Trace) -> Result<Pmf> {
    let params = SlicingParams {
        tw: HOUR,
        w_th: 1,
        weight_mode: WeightMode::Count,
    };
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for w in slicing::slice(trace, &params)? {
        for &c in w.edges.values() {
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    Ok(Pmf::from_counts(counts, 1))
}

/// Offsets of every later meeting from each timeline's first meeting,
/// pooled over timelines.
pub fn group_remeeting_pdf(timelines: &[GroupTimeline], bin: i64) -> Pmf {
    let offsets = timelines.iter().flat_map(|tl| {
        let t0 = tl.first_time();
        tl.meetings[1..].iter().map(move |m| m.time - t0)
    });
    Pmf::from_samples(offsets, bin)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonFit {
    /// Meetings per second (regression slope).
    pub lambda_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_meetings: usize,
}

/// Least-squares line through `(t_i, i)` for the cumulative meeting count.
pub fn fit_poisson(times: &[Time]) -> Result<PoissonFit> {
    let n = times.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "need at least two meetings, got {n}"
        )));
    }
    let mut ts: Vec<f64> = times.iter().map(|&t| t as f64).collect();
    ts.sort_by(f64::total_cmp);
    let ys: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let nf = n as f64;
    let mx = ts.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in ts.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate(
            "all meetings share one timestamp".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = ts
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(PoissonFit {
        lambda_hat: slope.max(0.0),
        intercept,
        r_squared: 1.0 - ss_res / syy,
        n_meetings: n,
    })
}

/// Fits a timeline's meetings, optionally restricted to `[from, to)`.
pub fn fit_timeline(tl: &GroupTimeline, span: Option<(Time, Time)>) -> Result<PoissonFit> {
    let times: Vec<Time> = tl
        .meetings
        .iter()
        .map(|m| m.time)
        .filter(|&t| span.is_none_or(|(a, b)| t >= a && t < b))
        .collect();
    fit_poisson(&times)
}

/// Fits every timeline with at least two meetings.
pub fn fit_all(timelines: &[GroupTimeline]) -> Vec<(usize, PoissonFit)> {
    timelines
        .iter()
        .filter(|t| t.meetings.len() >= 2)
        .filter_map(|t| fit_timeline(t, None).ok().map(|f| (t.group_id, f)))
        .collect()
}

/// `group_id,lambda,r2,n` rows.
pub fn write_fits_csv<W: Write>(fits: &[(usize, PoissonFit)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "group_id,lambda,r2,n")?;
    for (g, f) in fits {
        writeln!(w, "{g},{},{},{}", f.lambda_hat, f.r_squared, f.n_meetings)?;
    }
    Ok(())
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}
