//! Monte Carlo moments of the exploration observables across replicas.

use std::ops::RangeInclusive;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exploration::{
    bm_hit_prob, observables, BranchingSchedule, ExplorationState, HarmonicMassEntry,
};
use crate::stats::Summary;

/// Observables of one replica, in generation order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicaTrace {
    pub replica: u64,
    pub entries: Vec<HarmonicMassEntry>,
}

impl ReplicaTrace {
    pub fn from_state(replica: u64, state: &ExplorationState) -> Result<Self> {
        let entries = (0..=state.generation)
            .map(|n| observables(state, n))
            .collect::<Result<_>>()?;
        Ok(ReplicaTrace { replica, entries })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub n: usize,
    pub replicas: usize,
    /// Moments of `M_n = -sum_{K_n} vol W`.
    pub active_mass: Summary,
    /// Moments of `Vol_n`.
    pub inactive_volume: Summary,
    /// Moments of `H_n = sum_{V_n} vol W`.
    pub stopped_mass: Summary,
    /// `bm_hit_prob(T_n)`.
    pub oracle: f64,
    /// z-score of mean `Vol_n` against the oracle.
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
}

impl MomentReport {
    pub fn row(&self, n: usize) -> Option<&MomentRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

/// Per-level moments over `traces`, which must be ordered by replica id
/// for the reductions to be reproducible.
pub fn moment_report(
    traces: &[ReplicaTrace],
    levels: RangeInclusive<usize>,
    sched: &BranchingSchedule,
) -> Result<MomentReport> {
    if traces.is_empty() {
        return Err(Error::Input(
            "moment report over an empty replica stream".into(),
        ));
    }
    let mut rows = Vec::new();
    for n in levels {
        let mut m = Vec::with_capacity(traces.len());
        let mut v = Vec::with_capacity(traces.len());
        let mut h = Vec::with_capacity(traces.len());
        for t in traces {
            let e = t.entries.get(n).ok_or_else(|| {
                Error::Range(format!("replica {} has no generation {n}", t.replica))
            })?;
            m.push(e.active_mass);
            v.push(e.inactive_volume);
            h.push(e.stopped_mass);
        }
        let oracle = bm_hit_prob(sched.time(n))?;
        let vol = Summary::from_samples(&v);
        rows.push(MomentRow {
            n,
            replicas: traces.len(),
            active_mass: Summary::from_samples(&m),
            inactive_volume: vol,
            stopped_mass: Summary::from_samples(&h),
            oracle,
            z: vol.z(oracle),
        });
    }
    Ok(MomentReport { rows })
}

/// The quantitative non-thinness signature read off a [`MomentReport`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonThinVerdict {
    /// `mean(M_n) >= 0.5` for every reported `n >= 6`.
    pub mean_floor: bool,
    /// `mean(M_n)` strictly increasing over the reported `n >= 2`.
    pub mean_increasing: bool,
    /// No second moment over `n >= 2` exceeds twice the last one.
    pub second_moment_bounded: bool,
    /// `(n, Delta_n / Delta_(n-1))` for the second-moment increments, `n >= 6`.
    pub increment_ratios: Vec<(usize, f64)>,
    /// Every ratio below one half; `None` when fewer than two increments
    /// beyond `n = 5` were simulated.
    pub increments_halving: Option<bool>,
}

impl NonThinVerdict {
    pub fn passed(&self) -> bool {
        self.mean_floor
            && self.mean_increasing
            && self.second_moment_bounded
            && self.increments_halving != Some(false)
    }
}

pub fn non_thin_verdict(report: &MomentReport) -> NonThinVerdict {
    let rows: Vec<&MomentRow> = report.rows.iter().filter(|r| r.n >= 2).collect();
    let mean_floor = rows
        .iter()
        .filter(|r| r.n >= 6)
        .all(|r| r.active_mass.mean >= 0.5);
    let mean_increasing = rows
        .windows(2)
        .all(|w| w[1].active_mass.mean > w[0].active_mass.mean);
    let last = rows.last().map_or(0.0, |r| r.active_mass.second_moment);
    let second_moment_bounded = rows
        .iter()
        .all(|r| r.active_mass.second_moment <= 2.0 * last);
    let mut increment_ratios = Vec::new();
    for n in 6.. {
        let (Some(a), Some(b), Some(c)) = (report.row(n - 2), report.row(n - 1), report.row(n))
        else {
            break;
        };
        let prev = b.active_mass.second_moment - a.active_mass.second_moment;
        let cur = c.active_mass.second_moment - b.active_mass.second_moment;
        increment_ratios.push((n, cur / prev));
    }
    let increments_halving =
        (!increment_ratios.is_empty()).then(|| increment_ratios.iter().all(|&(_, r)| r < 0.5));
    NonThinVerdict {
        mean_floor,
        mean_increasing,
        second_moment_bounded,
        increment_ratios,
        increments_halving,
    }
}
