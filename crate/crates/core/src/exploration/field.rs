//! Field-coupled exploration of one lattice GFF sample.
//!
//! Generation `k` reveals the field on the mid-hyperplanes of every active
//! depth-`k` cell. The boundary of each child is then known, so by the
//! Markov property the conditional mean of the child's mass is its discrete
//! harmonic extension, which Green's identity turns into a face sum against
//! the torsion function `u = L^-1 1` of the cube:
//! `gamma(c) = h^d sum_{y on faces of c} Gamma(y) u(x_y)`,
//! `x_y` being the interior neighbour of `y`. By symmetry one face profile
//! per depth serves every face of every cell.

use serde::Serialize;

use super::{
    ActiveCell, BranchingSchedule, ExplorationState, GenerationRecord, InactiveBlock, Mode,
};
use crate::dyadic::{Cell, DyadicWord, MAX_DIM};
use crate::error::{Error, Result};
use crate::green_field::{FieldSample, GreensOperator, LatticeDomain};
use crate::rng::StreamKey;
use crate::stats::pairwise_sum;

/// Ledger of one field-coupled generation. All masses carry the `h^d`
/// quadrature weight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldRecord {
    /// Field mass on all revealed mid-hyperplane vertices.
    pub face_mass: f64,
    /// `sum_{K_n} gamma_n(s)`.
    pub gamma_active: f64,
    /// `sum_{V_n} gamma(s)` at freezing.
    pub gamma_inactive: f64,
    /// `sum_{K_n and V_n} vol(s) W^s`.
    pub weighted_value: f64,
    /// `|sum vol W - (sum gamma + face mass)|`, relative to the sum of the
    /// absolute values of the terms.
    pub telescoping_residual: f64,
    /// `(Gamma, 1)`.
    pub total_mass: f64,
    /// `sum_{V_n} (Gamma, 1_s)` over open frozen cells.
    pub inactive_open_mass: f64,
    /// `sum_{K_n} (Gamma, 1_s)` over open active cells.
    pub active_open_mass: f64,
    /// `(Gamma^A, 1_{A_n}) = sum_{K_n} ((Gamma, 1_s) - gamma_n(s))`.
    pub fluctuation: f64,
    /// Relative residual of
    /// `(Gamma, 1_{A_n}) - ((Gamma_A, 1) - (Gamma_A, 1_{D \ A_n})) = (Gamma^A, 1_{A_n})`.
    pub bridge_residual: f64,
}

#[derive(Clone, Debug)]
struct Profile {
    /// Torsion function on the layer next to one face, indexed row-major by
    /// the remaining `d - 1` coordinates.
    face: Vec<f64>,
    total: f64,
}

fn torsion_profile(dim: usize, side: usize) -> Result<Profile> {
    if side == 2 {
        let v = 1.0 / (2 * dim) as f64;
        return Ok(Profile {
            face: vec![v],
            total: v,
        });
    }
    let dom = LatticeDomain::new(dim, side)?;
    let op = GreensOperator::build(dom)?;
    let scale = op.kernel_scale();
    let u: Vec<f64> = op
        .apply(&vec![1.0; dom.len()])
        .into_iter()
        .map(|v| v / scale)
        .collect();
    let layer = (side - 1).pow(dim as u32 - 1);
    Ok(Profile {
        face: u[..layer].to_vec(),
        total: pairwise_sum(&u),
    })
}

/// Odometer over the box `ranges` on all axes except `skip`, with axis
/// `skip` pinned to `value`.
fn for_each_on_plane(
    d: usize,
    skip: usize,
    value: usize,
    ranges: &[(usize, usize); MAX_DIM],
    mut f: impl FnMut(&[usize; MAX_DIM]),
) {
    let mut c = [0usize; MAX_DIM];
    for j in 0..d {
        if j != skip && ranges[j].0 > ranges[j].1 {
            return;
        }
        c[j] = if j == skip { value } else { ranges[j].0 };
    }
    loop {
        f(&c);
        let mut j = d;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if j == skip {
                continue;
            }
            c[j] += 1;
            if c[j] <= ranges[j].1 {
                break;
            }
            c[j] = ranges[j].0;
        }
    }
}

/// Precomputed per-depth data for exploring samples of one operator.
#[derive(Clone, Debug)]
pub struct FieldExplorer<'a> {
    op: &'a GreensOperator,
    n_max: usize,
    profiles: Vec<Profile>,
    /// Clock increments `c_k = (V_k - 2^d V_(k+1)) 2^(2dk)`.
    increments: Vec<f64>,
}

impl<'a> FieldExplorer<'a> {
    pub fn new(op: &'a GreensOperator, n_max: usize) -> Result<Self> {
        let dom = op.domain();
        let d = dom.dim();
        let m = dom.side();
        if n_max >= usize::BITS as usize || (m >> n_max) < 4 {
            return Err(Error::Resolution(format!(
                "depth {n_max} cells need at least 4 mesh widths (m = {m})"
            )));
        }
        let profiles = (0..=n_max)
            .map(|k| torsion_profile(d, m >> k))
            .collect::<Result<Vec<_>>>()?;
        let mut ex = FieldExplorer {
            op,
            n_max,
            profiles,
            increments: Vec::new(),
        };
        ex.increments = (0..n_max)
            .map(|k| {
                let drop = ex.conditional_variance(k)
                    - (1u64 << d) as f64 * ex.conditional_variance(k + 1);
                drop * 2f64.powi((2 * d * k) as i32)
            })
            .collect();
        Ok(ex)
    }

    pub fn domain(&self) -> &LatticeDomain {
        self.op.domain()
    }

    pub fn depth(&self) -> usize {
        self.n_max
    }

    /// `Var((Gamma, 1_s) | Gamma on ds)` for an open depth-`k` cell.
    pub fn conditional_variance(&self, k: usize) -> f64 {
        let dom = self.domain();
        dom.mesh().powi(dom.dim() as i32 + 2) * self.profiles[k].total
    }

    /// Variance of the lineage increment across generation `k`.
    pub fn clock_increment(&self, k: usize) -> f64 {
        self.increments[k]
    }

    pub fn clock(&self, n: usize) -> f64 {
        self.increments[..n].iter().sum()
    }

    /// The base interval `T`: the intrinsic time of the first generation.
    pub fn base_time(&self) -> f64 {
        self.increments.first().copied().unwrap_or(0.0)
    }

    pub fn schedule(&self) -> BranchingSchedule {
        BranchingSchedule {
            dim: self.domain().dim(),
            base: self.base_time(),
        }
    }

    /// Conditional mean of `(Gamma, 1_s)` for the open cell `s` given the
    /// field on its boundary.
    pub fn cell_gamma(&self, field: &FieldSample, word: DyadicWord) -> f64 {
        let dom = self.domain();
        let d = dom.dim();
        let side = dom.side() >> word.depth();
        let profile = &self.profiles[word.depth()];
        let c = word.corner();
        let mut inner = [(0, 0); MAX_DIM];
        for j in 0..d {
            let lo = c[j] as usize * side;
            inner[j] = (lo + 1, lo + side - 1);
        }
        let mut acc = 0.0;
        for j in 0..d {
            let lo = c[j] as usize * side;
            for face in [lo, lo + side] {
                let mut part = 0.0;
                for_each_on_plane(d, j, face, &inner, |y| {
                    let mut idx = 0;
                    for i in 0..d {
                        if i != j {
                            idx = idx * (side - 1) + (y[i] - inner[i].0);
                        }
                    }
                    part += field.at(y) * profile.face[idx];
                });
                acc += part;
            }
        }
        acc * dom.vertex_volume()
    }

    /// Field mass on the mid-hyperplane vertices strictly inside `word`.
    pub fn midplane_mass(&self, field: &FieldSample, word: DyadicWord) -> f64 {
        let dom = self.domain();
        let d = dom.dim();
        let side = dom.side() >> word.depth();
        let c = word.corner();
        let mut inner = [(0, 0); MAX_DIM];
        let mut mid = [0usize; MAX_DIM];
        for j in 0..d {
            let lo = c[j] as usize * side;
            inner[j] = (lo + 1, lo + side - 1);
            mid[j] = lo + side / 2;
        }
        let mut acc = 0.0;
        for j in 0..d {
            for_each_on_plane(d, j, mid[j], &inner, |y| {
                if (0..j).all(|i| y[i] != mid[i]) {
                    acc += field.at(y);
                }
            });
        }
        acc * dom.vertex_volume()
    }

    fn open_mass(&self, field: &FieldSample, word: DyadicWord) -> f64 {
        field
            .cell_pairing(&Cell::open(word))
            .expect("depth within lattice resolution")
    }

    /// Run all generations on one sample.
    pub fn explore(&self, field: &FieldSample) -> ExplorationState {
        let dom = *self.domain();
        let d = dom.dim();
        let n_max = self.n_max;
        let root = DyadicWord::root(d);
        let total_mass = pairwise_sum(field.values()) * dom.vertex_volume();
        let mut active = vec![ActiveCell {
            word: root,
            value: 0.0,
            gamma: Some(0.0),
        }];
        let mut inactive = Vec::new();
        let mut std_incr = vec![Vec::new(); n_max];
        let mut records = vec![GenerationRecord {
            n: 0,
            active: 1,
            inactive: 0,
            inactive_volume: 0.0,
            active_mass: 0.0,
            stopped_mass: 0.0,
            clock: 0.0,
            field: Some(FieldRecord {
                face_mass: 0.0,
                gamma_active: 0.0,
                gamma_inactive: 0.0,
                weighted_value: 0.0,
                telescoping_residual: 0.0,
                total_mass,
                inactive_open_mass: 0.0,
                active_open_mass: total_mass,
                fluctuation: total_mass,
                bridge_residual: 0.0,
            }),
        }];
        let mut face_mass = 0.0;
        let mut gamma_inactive = 0.0;
        let mut inactive_open_mass = 0.0;
        let mut frozen_cells = 0;
        let mut frozen_volume = 0.0;
        let mut stopped_mass = 0.0;
        for k in 0..n_max {
            let sd = self.increments[k].sqrt();
            let scale = 2f64.powi((d * k) as i32);
            let mut next = Vec::with_capacity(active.len() << d);
            for a in &active {
                let mid = self.midplane_mass(field, a.word);
                let kids: Vec<(DyadicWord, f64)> = a
                    .word
                    .children()
                    .map(|w| (w, self.cell_gamma(field, w)))
                    .collect();
                let gamma_next = kids.iter().map(|(_, g)| g).sum::<f64>() + mid;
                let delta = (gamma_next - a.gamma.expect("field cells carry gamma")) * scale;
                let w = a.value + delta;
                std_incr[k].push(delta / sd);
                face_mass += mid;
                if w >= 1.0 {
                    let block = InactiveBlock {
                        parent: a.word,
                        generation: k + 1,
                        value: w,
                    };
                    frozen_cells += 1 << d;
                    frozen_volume += block.volume();
                    stopped_mass += block.volume() * w;
                    gamma_inactive += kids.iter().map(|(_, g)| g).sum::<f64>();
                    inactive_open_mass += kids
                        .iter()
                        .map(|(c, _)| self.open_mass(field, *c))
                        .sum::<f64>();
                    inactive.push(block);
                } else {
                    next.extend(kids.into_iter().map(|(word, g)| ActiveCell {
                        word,
                        value: w,
                        gamma: Some(g),
                    }));
                }
            }
            active = next;
            let vol = 2f64.powi(-((d * (k + 1)) as i32));
            let gamma_active: f64 = active.iter().map(|c| c.gamma.unwrap()).sum();
            let active_weighted: f64 = active.iter().map(|c| vol * c.value).sum();
            let active_open_mass: f64 = active.iter().map(|c| self.open_mass(field, c.word)).sum();
            let weighted_value = active_weighted + stopped_mass;
            let rhs = gamma_active + gamma_inactive + face_mass;
            let tele_scale = active.iter().map(|c| (vol * c.value).abs()).sum::<f64>()
                + stopped_mass.abs()
                + active.iter().map(|c| c.gamma.unwrap().abs()).sum::<f64>()
                + gamma_inactive.abs()
                + face_mass.abs();
            let fluctuation = active_open_mass - gamma_active;
            let lhs = (total_mass - inactive_open_mass) - (weighted_value - gamma_inactive);
            let bridge_scale = total_mass.abs()
                + inactive_open_mass.abs()
                + weighted_value.abs()
                + gamma_inactive.abs()
                + active_open_mass.abs()
                + gamma_active.abs();
            records.push(GenerationRecord {
                n: k + 1,
                active: active.len(),
                inactive: frozen_cells,
                inactive_volume: frozen_volume,
                active_mass: -active_weighted,
                stopped_mass,
                clock: self.clock(k + 1),
                field: Some(FieldRecord {
                    face_mass,
                    gamma_active,
                    gamma_inactive,
                    weighted_value,
                    telescoping_residual: relative(weighted_value - rhs, tele_scale),
                    total_mass,
                    inactive_open_mass,
                    active_open_mass,
                    fluctuation,
                    bridge_residual: relative(lhs - fluctuation, bridge_scale),
                }),
            });
        }
        ExplorationState {
            mode: Mode::FieldCoupled,
            dim: d,
            generation: n_max,
            schedule: self.schedule(),
            active,
            inactive,
            records,
            standardized_increments: std_incr,
        }
    }
}

fn relative(diff: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        diff.abs()
    } else {
        diff.abs() / scale
    }
}

/// Sample the field for `key` and explore it to depth `n_max`.
pub fn run_field_coupled(
    op: &GreensOperator,
    n_max: usize,
    key: StreamKey,
) -> Result<ExplorationState> {
    let ex = FieldExplorer::new(op, n_max)?;
    Ok(ex.explore(&op.sample(key)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green_field::{markov_decompose, VertexSet};
    use approx::assert_relative_eq;

    #[test]
    fn face_formula_matches_harmonic_extension() {
        let dom = LatticeDomain::new(2, 32).unwrap();
        let op = GreensOperator::build(dom).unwrap();
        let field = op.sample(StreamKey::replica(2, 0));
        let ex = FieldExplorer::new(&op, 2).unwrap();
        let set = VertexSet::from_predicate(dom, |c| c[0] == 16 || c[1] == 16);
        let dec = markov_decompose(&op, &field, &set).unwrap();
        for w in DyadicWord::root(2).children() {
            let r = Cell::open(w).vertex_ranges(&dom).unwrap();
            let mut sum = 0.0;
            dom.for_each_in(&r, |i| sum += dec.harmonic[i]);
            assert_relative_eq!(
                ex.cell_gamma(&field, w),
                sum * dom.vertex_volume(),
                epsilon = 1e-12,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn clock_matches_variance_of_gamma() {
        // Var(gamma_1(root)) = Var(Gamma, 1) - sum of child conditional variances.
        let dom = LatticeDomain::new(3, 16).unwrap();
        let op = GreensOperator::build(dom).unwrap();
        let ex = FieldExplorer::new(&op, 2).unwrap();
        assert_relative_eq!(
            ex.conditional_variance(0),
            op.variance(&vec![1.0; dom.len()]),
            max_relative = 1e-10
        );
        let kids: f64 = (0..8).map(|_| ex.conditional_variance(1)).sum();
        assert_relative_eq!(
            ex.clock_increment(0),
            ex.conditional_variance(0) - kids,
            max_relative = 1e-12
        );
        assert!(ex.clock_increment(1) > ex.clock_increment(0));
    }

    #[test]
    fn ledger_identities_hold() {
        let dom = LatticeDomain::new(2, 64).unwrap();
        let op = GreensOperator::build(dom).unwrap();
        for r in 0..4 {
            let st = run_field_coupled(&op, 4, StreamKey::replica(8, r)).unwrap();
            st.check_invariants().unwrap();
            for rec in &st.records {
                let f = rec.field.as_ref().unwrap();
                assert!(f.telescoping_residual < 1e-12, "{rec:?}");
                assert!(f.bridge_residual < 1e-12, "{rec:?}");
            }
        }
    }

    #[test]
    fn resolution_guard() {
        let dom = LatticeDomain::new(2, 16).unwrap();
        let op = GreensOperator::build(dom).unwrap();
        assert!(matches!(
            FieldExplorer::new(&op, 3),
            Err(Error::Resolution(_))
        ));
        assert!(FieldExplorer::new(&op, 2).is_ok());
    }
}
