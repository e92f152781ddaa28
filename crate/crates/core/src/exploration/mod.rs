//! The non-thin local set construction: cells are explored generation by
//! generation and frozen once the martingale attached to their lineage
//! reaches level 1.
//!
//! Two modes share one state type. In the branching Brownian motion mode
//! each lineage carries an exact Brownian motion on the branching schedule;
//! in the field-coupled mode the martingale is the normalized conditional
//! mean of a lattice GFF sample, read on its intrinsic clock.

mod bbm;
mod field;

pub use bbm::{run_bbm, run_lineage, Lineage};
pub use field::{run_field_coupled, FieldExplorer, FieldRecord};

use serde::Serialize;

use crate::dyadic::DyadicWord;
use crate::error::{Error, Result};
use crate::stats::normal_sf;

/// Largest number of depth-`n_max` cells a run may address.
pub const NODE_BUDGET: u64 = 1 << 24;

/// Branch times `T_n`: `nT` in `d = 2`, and
/// `T (2^((d-2)n) - 1) / (2^(d-2) - 1)` for `d >= 3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchingSchedule {
    pub dim: usize,
    pub base: f64,
}

impl BranchingSchedule {
    pub fn new(dim: usize, base: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!(
                "branching schedule needs d >= 2, got {dim}"
            )));
        }
        if !(base > 0.0 && base.is_finite()) {
            return Err(Error::Config(format!(
                "base interval T must be positive, got {base}"
            )));
        }
        Ok(BranchingSchedule { dim, base })
    }

    pub fn time(&self, n: usize) -> f64 {
        branching_times(self.dim, self.base, n)
    }

    /// `T_(k+1) - T_k = T 2^((d-2)k)`.
    pub fn increment(&self, k: usize) -> f64 {
        self.base * 2f64.powi(((self.dim - 2) * k) as i32)
    }
}

pub fn branching_times(d: usize, t: f64, n: usize) -> f64 {
    if d == 2 {
        return n as f64 * t;
    }
    let r = 2f64.powi(d as i32 - 2);
    t * (r.powi(n as i32) - 1.0) / (r - 1.0)
}

/// `P(sup_{s <= tau} B_s >= 1) = 2 (1 - Phi(1 / sqrt(tau)))`.
pub fn bm_hit_prob(tau: f64) -> Result<f64> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Domain(format!(
            "hitting time horizon must be >= 0, got {tau}"
        )));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * normal_sf(1.0 / tau.sqrt()))
}

/// Probability that a Brownian bridge from `a` to `b` over a time of
/// variance `var` reaches 1. Endpoints at or above 1 count as hits.
pub fn bridge_hit_prob(a: f64, b: f64, var: f64) -> f64 {
    if a >= 1.0 || b >= 1.0 {
        return 1.0;
    }
    if var <= 0.0 {
        return 0.0;
    }
    (-2.0 * (1.0 - a) * (1.0 - b) / var).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Bbm,
    FieldCoupled,
}

/// A cell of `K_n` with its current martingale value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ActiveCell {
    pub word: DyadicWord,
    pub value: f64,
    /// Conditional mean of the cell mass (field-coupled mode).
    pub gamma: Option<f64>,
}

/// All `2^d` children of `parent` were frozen at `generation` with the
/// shared value `value`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InactiveBlock {
    pub parent: DyadicWord,
    pub generation: usize,
    pub value: f64,
}

impl InactiveBlock {
    pub fn cells(&self) -> impl Iterator<Item = DyadicWord> {
        self.parent.children()
    }

    pub fn volume(&self) -> f64 {
        crate::dyadic::Cell::open(self.parent).volume()
    }
}

/// Per-generation aggregates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerationRecord {
    pub n: usize,
    /// `|K_n|`.
    pub active: usize,
    /// `|V_n|`, counting cells.
    pub inactive: usize,
    /// `Vol_n = sum_{V_n} vol(s)`.
    pub inactive_volume: f64,
    /// `M_n = -sum_{K_n} vol(s) W^s`.
    pub active_mass: f64,
    /// `H_n = sum_{V_n} vol(s) W^s`, the stopped-value mass.
    pub stopped_mass: f64,
    /// Martingale clock at generation `n`.
    pub clock: f64,
    pub field: Option<FieldRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExplorationState {
    pub mode: Mode,
    pub dim: usize,
    pub generation: usize,
    pub schedule: BranchingSchedule,
    /// `K_n` at the final generation, in word order.
    pub active: Vec<ActiveCell>,
    /// Frozen blocks in order of deactivation.
    pub inactive: Vec<InactiveBlock>,
    pub records: Vec<GenerationRecord>,
    /// Lineage increments divided by their nominal standard deviation,
    /// per depth of the parent (field-coupled mode).
    #[serde(skip)]
    pub standardized_increments: Vec<Vec<f64>>,
}

/// One entry of the harmonic mass series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HarmonicMassEntry {
    pub n: usize,
    pub inactive_volume: f64,
    pub active_mass: f64,
    pub stopped_mass: f64,
    /// `-sum_{K_n} gamma_n(s)` (field-coupled mode).
    pub harmonic_mass: Option<f64>,
    pub telescoping_residual: Option<f64>,
}

impl ExplorationState {
    pub fn record(&self, n: usize) -> Result<&GenerationRecord> {
        self.records.get(n).ok_or_else(|| {
            Error::Range(format!(
                "generation {n} beyond simulated depth {}",
                self.generation
            ))
        })
    }

    /// Frozen blocks with deactivation generation at most `n`.
    pub fn inactive_by(&self, n: usize) -> impl Iterator<Item = &InactiveBlock> {
        self.inactive.iter().filter(move |b| b.generation <= n)
    }

    /// Structural checks: frozen values reached 1, frozen blocks are not
    /// nested, and active and frozen cells tile the domain.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        for b in &self.inactive {
            if b.value < 1.0 {
                return fail(format!(
                    "frozen block {} has value {} < 1",
                    b.parent, b.value
                ));
            }
        }
        for (i, a) in self.inactive.iter().enumerate() {
            for b in &self.inactive[i + 1..] {
                if a.parent.is_ancestor_of(b.parent) || b.parent.is_ancestor_of(a.parent) {
                    return fail(format!(
                        "frozen blocks {} and {} are nested",
                        a.parent, b.parent
                    ));
                }
            }
        }
        for c in &self.active {
            if c.value >= 1.0 {
                return fail(format!("active cell {} has value {} >= 1", c.word, c.value));
            }
            if let Some(b) = self
                .inactive
                .iter()
                .find(|b| b.parent.is_ancestor_of(c.word))
            {
                return fail(format!(
                    "active cell {} lies under frozen block {}",
                    c.word, b.parent
                ));
            }
        }
        let vol: f64 = self
            .active
            .iter()
            .map(|c| crate::dyadic::Cell::open(c.word).volume())
            .sum::<f64>()
            + self.inactive.iter().map(InactiveBlock::volume).sum::<f64>();
        if (vol - 1.0).abs() > 1e-9 {
            return fail(format!("active and frozen cells cover volume {vol}, not 1"));
        }
        Ok(())
    }
}

/// The harmonic mass series entry at generation `n`.
pub fn observables(state: &ExplorationState, n: usize) -> Result<HarmonicMassEntry> {
    let r = state.record(n)?;
    Ok(HarmonicMassEntry {
        n,
        inactive_volume: r.inactive_volume,
        active_mass: r.active_mass,
        stopped_mass: r.stopped_mass,
        harmonic_mass: r.field.as_ref().map(|f| -f.gamma_active),
        telescoping_residual: r.field.as_ref().map(|f| f.telescoping_residual),
    })
}

/// Number of closed depth-`n` dyadic cells meeting the explored set: every
/// active cell, plus the cells of each frozen cell that touch one of its
/// faces not lying on `dD`.
pub fn box_count(state: &ExplorationState, n: usize) -> Result<u64> {
    let r = state.record(n)?;
    let d = state.dim;
    let mut total = r.active as u64;
    for b in state.inactive_by(n) {
        let s = 1u64 << (n - b.generation);
        let top = 1u64 << b.generation;
        for w in b.cells() {
            let c = w.corner();
            let mut inner = 1u64;
            for &cj in c.iter().take(d) {
                let exposed = (cj > 0) as u64 + (cj + 1 < top) as u64;
                inner *= s.saturating_sub(exposed);
            }
            total += s.pow(d as u32) - inner;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_values() {
        assert_eq!(branching_times(2, 1.0, 5), 5.0);
        assert_eq!(branching_times(3, 1.0, 2), 3.0);
        assert_eq!(branching_times(4, 0.5, 0), 0.0);
        let s = BranchingSchedule::new(3, 0.7).unwrap();
        for k in 0..6 {
            assert_relative_eq!(
                s.time(k + 1) - s.time(k),
                s.increment(k),
                max_relative = 1e-12
            );
        }
        assert!(BranchingSchedule::new(2, 0.0).is_err());
    }

    #[test]
    fn hit_probability_limits() {
        assert_eq!(bm_hit_prob(0.0).unwrap(), 0.0);
        assert_relative_eq!(bm_hit_prob(1e12).unwrap(), 1.0, epsilon = 1e-5);
        assert_relative_eq!(
            bm_hit_prob(1.0).unwrap(),
            0.317_310_507_862_914,
            epsilon = 1e-12
        );
        assert!(matches!(bm_hit_prob(-1.0), Err(Error::Domain(_))));
        assert_eq!(bridge_hit_prob(0.2, 1.0, 1.0), 1.0);
        assert_relative_eq!(bridge_hit_prob(0.0, 0.0, 2.0), (-1.0f64).exp());
    }
}
