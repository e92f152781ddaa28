//! Exact branching Brownian motion on dyadic words.
//!
//! A depth-`k` cell carries one Brownian increment over `[T_k, T_(k+1)]`,
//! which all of its `2^d` children inherit. Level-1 crossings inside the
//! interval are resolved by the bridge maximum, so frozen values are exactly 1.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    bridge_hit_prob, ActiveCell, BranchingSchedule, ExplorationState, GenerationRecord,
    InactiveBlock, Mode, NODE_BUDGET,
};
use crate::dyadic::{Cell, DyadicWord};
use crate::error::{Error, Result};
use crate::rng::{tag, StreamKey};

/// The step of the depth-`depth` node `word` started from `start`:
/// returns the endpoint (stopped at 1) and whether level 1 was reached.
#[inline]
fn node_step(base: StreamKey, word: DyadicWord, start: f64, var: f64) -> (f64, f64, bool) {
    let mut s = base
        .derive(word.depth() as u64)
        .derive(word.code())
        .stream();
    let z: f64 = s.sample(StandardNormal);
    let u = s.open01();
    let end = start + var.sqrt() * z;
    let hit = end >= 1.0 || u < bridge_hit_prob(start, end, var);
    (if hit { 1.0 } else { end }, z, hit)
}

fn budget_check(dim: usize, n_max: usize) -> Result<()> {
    let bits = dim * n_max;
    if bits > 63 || (1u64 << bits) > NODE_BUDGET {
        return Err(Error::Config(format!(
            "2^(d n_max) = 2^{bits} cells exceeds the budget of {NODE_BUDGET}"
        )));
    }
    Ok(())
}

/// Simulate generations `0..=n_max` of the branching Brownian motion for one
/// replica key.
pub fn run_bbm(
    sched: &BranchingSchedule,
    n_max: usize,
    key: StreamKey,
) -> Result<ExplorationState> {
    let d = sched.dim;
    budget_check(d, n_max)?;
    let base = key.derive(tag::BBM);
    let root = DyadicWord::root(d);
    let mut active = vec![ActiveCell {
        word: root,
        value: 0.0,
        gamma: None,
    }];
    let mut inactive = Vec::new();
    let mut records = vec![GenerationRecord {
        n: 0,
        active: 1,
        inactive: 0,
        inactive_volume: 0.0,
        active_mass: 0.0,
        stopped_mass: 0.0,
        clock: 0.0,
        field: None,
    }];
    let mut frozen_cells = 0usize;
    let mut frozen_volume = 0.0;
    let mut stopped_mass = 0.0;
    for k in 0..n_max {
        let var = sched.increment(k);
        let child_volume = Cell::open(root).volume() * 2f64.powi(-((d * (k + 1)) as i32));
        let mut next = Vec::with_capacity(active.len() << d);
        let mut mass = 0.0;
        for cell in &active {
            let (end, _, hit) = node_step(base, cell.word, cell.value, var);
            if hit {
                let block = InactiveBlock {
                    parent: cell.word,
                    generation: k + 1,
                    value: end,
                };
                frozen_cells += 1 << d;
                frozen_volume += block.volume();
                stopped_mass += block.volume() * end;
                inactive.push(block);
            } else {
                mass += child_volume * (1u64 << d) as f64 * end;
                next.extend(cell.word.children().map(|w| ActiveCell {
                    word: w,
                    value: end,
                    gamma: None,
                }));
            }
        }
        active = next;
        records.push(GenerationRecord {
            n: k + 1,
            active: active.len(),
            inactive: frozen_cells,
            inactive_volume: frozen_volume,
            active_mass: -mass,
            stopped_mass,
            clock: sched.time(k + 1),
            field: None,
        });
    }
    Ok(ExplorationState {
        mode: Mode::Bbm,
        dim: d,
        generation: n_max,
        schedule: *sched,
        active,
        inactive,
        records,
        standardized_increments: Vec::new(),
    })
}

/// The path of one fixed lineage, with the same node randomness as
/// [`run_bbm`] under the same key.
#[derive(Clone, Debug, PartialEq)]
pub struct Lineage {
    /// Raw standard normal draws of the nodes along the path.
    pub innovations: Vec<f64>,
    /// `W` at `T_1, .., T_n`, stopped at 1.
    pub values: Vec<f64>,
    /// First generation at which the lineage is frozen.
    pub frozen_at: Option<usize>,
}

impl Lineage {
    pub fn active_at(&self, n: usize) -> bool {
        self.frozen_at.is_none_or(|g| g > n)
    }
}

/// Follow the ancestors of `word` (depth at least `n_max`) through
/// generations `1..=n_max`.
pub fn run_lineage(
    sched: &BranchingSchedule,
    n_max: usize,
    key: StreamKey,
    word: DyadicWord,
) -> Result<Lineage> {
    if word.depth() < n_max {
        return Err(Error::Input(format!(
            "lineage word {word} is shorter than {n_max}"
        )));
    }
    let base = key.derive(tag::BBM);
    let mut value = 0.0;
    let mut out = Lineage {
        innovations: Vec::with_capacity(n_max),
        values: Vec::with_capacity(n_max),
        frozen_at: None,
    };
    for k in 0..n_max {
        let node = word.ancestor(k).expect("depth checked");
        let (end, z, hit) = node_step(base, node, value, sched.increment(k));
        out.innovations.push(z);
        if out.frozen_at.is_none() {
            value = end;
            if hit {
                out.frozen_at = Some(k + 1);
            }
        }
        out.values.push(value);
    }
    Ok(out)
}
