//! Green's operator of `D \ C` for an irregular vertex set `C`, and the
//! spatial Markov decomposition `Gamma = Gamma_C + Gamma^C`.
//!
//! `C` is arbitrary, so there is no sine basis; the restricted Laplace
//! system is solved matrix-free by conjugate gradients on the free vertices.

use nalgebra::{DMatrix, DVector};

use super::{FieldSample, GreensOperator, LatticeDomain};
use crate::dyadic::{VertexRanges, MAX_DIM};
use crate::error::{Error, Result};
use crate::stats::pairwise_sum;

const NONE: u32 = u32::MAX;

/// A set of interior lattice vertices.
#[derive(Clone, Debug)]
pub struct VertexSet {
    domain: LatticeDomain,
    mask: Vec<bool>,
    members: Vec<usize>,
}

impl VertexSet {
    pub fn empty(domain: LatticeDomain) -> Self {
        VertexSet {
            domain,
            mask: vec![false; domain.len()],
            members: Vec::new(),
        }
    }

    pub fn all(domain: LatticeDomain) -> Self {
        Self::from_mask(domain, vec![true; domain.len()])
    }

    pub fn from_mask(domain: LatticeDomain, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), domain.len());
        let members = mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
            .collect();
        VertexSet {
            domain,
            mask,
            members,
        }
    }

    pub fn from_indices(
        domain: LatticeDomain,
        idx: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut mask = vec![false; domain.len()];
        for i in idx {
            if i >= domain.len() {
                return Err(Error::Input(format!(
                    "vertex index {i} outside the lattice"
                )));
            }
            mask[i] = true;
        }
        Ok(Self::from_mask(domain, mask))
    }

    /// Vertices whose lattice coordinates satisfy `pred`.
    pub fn from_predicate(domain: LatticeDomain, pred: impl Fn(&[usize]) -> bool) -> Self {
        let d = domain.dim();
        let mask = (0..domain.len())
            .map(|i| pred(&domain.coords(i)[..d]))
            .collect();
        Self::from_mask(domain, mask)
    }

    /// Every interior vertex outside the inclusive box `ranges`.
    pub fn outside_box(domain: LatticeDomain, ranges: &VertexRanges) -> Self {
        let d = domain.dim();
        Self::from_predicate(domain, |c| {
            (0..d).any(|j| c[j] < ranges[j].0 || c[j] > ranges[j].1)
        })
    }

    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
}

/// `G_{D \ C} = h^(2-d) L_free^-1`, with `L_free` the graph Laplacian with
/// Dirichlet conditions on `C` and on the outer boundary.
#[derive(Clone, Debug)]
pub struct RestrictedGreens {
    domain: LatticeDomain,
    free: Vec<usize>,
    compact: Vec<u32>,
    /// `2d` neighbour slots per free vertex, `NONE` where the neighbour is
    /// pinned to zero.
    nbrs: Vec<u32>,
    tol: f64,
}

impl RestrictedGreens {
    pub fn new(removed: &VertexSet) -> Self {
        let domain = removed.domain;
        let d = domain.dim();
        let m = domain.side();
        let free: Vec<usize> = (0..domain.len())
            .filter(|&i| !removed.contains(i))
            .collect();
        let mut compact = vec![NONE; domain.len()];
        for (k, &i) in free.iter().enumerate() {
            compact[i] = k as u32;
        }
        let mut nbrs = Vec::with_capacity(free.len() * 2 * d);
        for &i in &free {
            let c = domain.coords(i);
            for j in 0..d {
                for up in [false, true] {
                    let mut nb = c;
                    let slot = if up && c[j] + 1 < m {
                        nb[j] += 1;
                        compact[domain.index(&nb)]
                    } else if !up && c[j] > 1 {
                        nb[j] -= 1;
                        compact[domain.index(&nb)]
                    } else {
                        NONE
                    };
                    nbrs.push(slot);
                }
            }
        }
        RestrictedGreens {
            domain,
            free,
            compact,
            nbrs,
            tol: 1e-14,
        }
    }

    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn is_free(&self, i: usize) -> bool {
        self.compact[i] != NONE
    }

    /// Relative residual at which conjugate gradients stops.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        let deg = 2 * self.domain.dim();
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = deg as f64 * u[k];
            for &nb in &self.nbrs[k * deg..(k + 1) * deg] {
                if nb != NONE {
                    acc -= u[nb as usize];
                }
            }
            *o = acc;
        }
    }

    /// Solve `L_free x = b` on compact free indices (unscaled).
    pub fn solve_laplace(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.free.len();
        assert_eq!(b.len(), n);
        let mut x = vec![0.0; n];
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let max_iter = 50 * n.max(16);
        for _ in 0..max_iter {
            if rr.sqrt() <= self.tol * bnorm {
                return Ok(x);
            }
            self.laplacian(&p, &mut ap);
            let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..n {
                p[k] = r[k] + beta * p[k];
            }
        }
        Err(Error::Budget(format!(
            "conjugate gradients did not reach tolerance {} on {n} vertices",
            self.tol
        )))
    }

    fn gather(&self, w: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| w[i]).collect()
    }

    fn scatter(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.domain.len()];
        for (&i, &v) in self.free.iter().zip(x) {
            out[i] = v;
        }
        out
    }

    /// `(G_{D\C} w)(x)` for every interior vertex; zero on `C`.
    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        let scale = self.domain.mesh().powi(2 - self.domain.dim() as i32);
        let mut x = self.solve_laplace(&self.gather(w))?;
        x.iter_mut().for_each(|v| *v *= scale);
        Ok(self.scatter(&x))
    }

    pub fn entry(&self, x: usize, y: usize) -> Result<f64> {
        if !self.is_free(x) || !self.is_free(y) {
            return Ok(0.0);
        }
        let mut e = vec![0.0; self.domain.len()];
        e[y] = 1.0;
        Ok(self.apply(&e)?[x])
    }

    /// `h^(2d) f^T G_{D\C} g`.
    pub fn covariance(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        let gg = self.apply(g)?;
        let s: Vec<f64> = f.iter().zip(&gg).map(|(a, b)| a * b).collect();
        Ok(pairwise_sum(&s) * self.domain.vertex_volume().powi(2))
    }

    pub fn variance(&self, f: &[f64]) -> Result<f64> {
        self.covariance(f, f)
    }

    /// Discrete harmonic extension to `D \ C` of `values` (read on `C`),
    /// zero on the outer boundary. Returned over all interior vertices,
    /// equal to `values` on `C`.
    pub fn harmonic_extension(&self, values: &[f64]) -> Result<Vec<f64>> {
        let deg = 2 * self.domain.dim();
        let m = self.domain.side();
        let d = self.domain.dim();
        let mut b = vec![0.0; self.free.len()];
        for (k, &i) in self.free.iter().enumerate() {
            let c = self.domain.coords(i);
            for j in 0..d {
                for delta in [-1i64, 1] {
                    let v = c[j] as i64 + delta;
                    if v < 1 || v >= m as i64 {
                        continue;
                    }
                    let mut nb = c;
                    nb[j] = v as usize;
                    let idx = self.domain.index(&nb);
                    if !self.is_free(idx) {
                        b[k] += values[idx];
                    }
                }
            }
        }
        debug_assert_eq!(self.nbrs.len(), self.free.len() * deg);
        let x = self.solve_laplace(&b)?;
        let mut out = values.to_vec();
        for (&i, &v) in self.free.iter().zip(&x) {
            out[i] = v;
        }
        Ok(out)
    }
}

/// `Gamma = Gamma_C + Gamma^C`: the conditional mean given the values on `C`
/// and the independent remainder, a GFF with covariance `G_{D\C}`.
#[derive(Clone, Debug)]
pub struct HarmonicDecomposition {
    pub set: VertexSet,
    /// `Gamma_C`: equal to the field on `C`, discrete harmonic off `C`.
    pub harmonic: Vec<f64>,
    /// `Gamma^C = Gamma - Gamma_C`, vanishing on `C`.
    pub residual: Vec<f64>,
    pub residual_operator: RestrictedGreens,
    /// `h^d sum_x (G_D - G_{D\C})(x, x)`.
    pub polar_defect: f64,
}

impl HarmonicDecomposition {
    /// Largest violation of the mean-value property of the harmonic part
    /// over vertices of `D \ C`.
    pub fn mean_value_defect(&self) -> f64 {
        let dom = self.set.domain;
        let d = dom.dim();
        let field = FieldSample::from_values(dom, self.harmonic.clone()).expect("length checked");
        let mut worst: f64 = 0.0;
        for i in 0..dom.len() {
            if self.set.contains(i) {
                continue;
            }
            let c = dom.coords(i);
            let mut acc = 0.0;
            for j in 0..d {
                let mut nb: [usize; MAX_DIM] = c;
                nb[j] = c[j] + 1;
                acc += field.at(&nb);
                nb[j] = c[j] - 1;
                acc += field.at(&nb);
            }
            worst = worst.max((self.harmonic[i] - acc / (2 * d) as f64).abs());
        }
        worst
    }
}

/// The spatial Markov decomposition of `field` with respect to `set`.
pub fn markov_decompose(
    op: &GreensOperator,
    field: &FieldSample,
    set: &VertexSet,
) -> Result<HarmonicDecomposition> {
    if set.domain != *op.domain() || field.domain() != op.domain() {
        return Err(Error::Input(
            "field, set and operator live on different lattices".into(),
        ));
    }
    let residual_operator = RestrictedGreens::new(set);
    let harmonic = if set.is_empty() {
        vec![0.0; set.domain.len()]
    } else {
        let mut on_c = vec![0.0; set.domain.len()];
        for &i in set.members() {
            on_c[i] = field.values()[i];
        }
        residual_operator.harmonic_extension(&on_c)?
    };
    let residual = field
        .values()
        .iter()
        .zip(&harmonic)
        .map(|(a, b)| a - b)
        .collect();
    Ok(HarmonicDecomposition {
        set: set.clone(),
        harmonic,
        residual,
        residual_operator,
        polar_defect: polar_defect(op, set)?,
    })
}

/// `h^d sum_x (G_D - G_{D\C})(x, x)`, computed from the conditioning
/// identity `G_D - G_{D\C} = G_{.C} G_CC^-1 G_{C.}`.
pub fn polar_defect(op: &GreensOperator, set: &VertexSet) -> Result<f64> {
    let dom = *op.domain();
    if set.is_empty() {
        return Ok(0.0);
    }
    if set.len() == dom.len() {
        return Ok(op.integrated_trace());
    }
    let k = set.len();
    let cols: Vec<Vec<f64>> = set
        .members()
        .iter()
        .map(|&a| {
            let mut e = vec![0.0; dom.len()];
            e[a] = 1.0;
            op.apply(&e)
        })
        .collect();
    let gcc = DMatrix::from_fn(k, k, |i, j| {
        0.5 * (cols[j][set.members()[i]] + cols[i][set.members()[j]])
    });
    let chol = gcc
        .cholesky()
        .ok_or_else(|| Error::Validation("G restricted to C is not positive definite".into()))?;
    let mut trace = 0.0;
    for a in 0..k {
        let pa = DVector::from_fn(k, |b, _| {
            let prods: Vec<f64> = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).collect();
            pairwise_sum(&prods)
        });
        trace += chol.solve(&pa)[a];
    }
    Ok(trace * dom.vertex_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use approx::assert_relative_eq;

    fn setup(d: usize, m: usize) -> (LatticeDomain, GreensOperator) {
        let dom = LatticeDomain::new(d, m).unwrap();
        (dom, GreensOperator::build(dom).unwrap())
    }

    #[test]
    fn empty_set_reproduces_full_green() {
        let (dom, op) = setup(2, 16);
        let rg = RestrictedGreens::new(&VertexSet::empty(dom));
        let w: Vec<f64> = (0..dom.len()).map(|i| (i as f64 * 0.3).sin()).collect();
        let a = rg.apply(&w).unwrap();
        let b = op.apply(&w);
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, max_relative = 1e-10, epsilon = 1e-13);
        }
        let field = op.sample(StreamKey::replica(1, 0));
        let dec = markov_decompose(&op, &field, &VertexSet::empty(dom)).unwrap();
        assert!(dec.harmonic.iter().all(|&v| v == 0.0));
        assert_eq!(dec.polar_defect, 0.0);
    }

    #[test]
    fn harmonic_part_has_mean_value_property() {
        let (dom, op) = setup(2, 32);
        let set = VertexSet::from_predicate(dom, |c| c[0] == 16 || c[1] == 16);
        let field = op.sample(StreamKey::replica(3, 1));
        let dec = markov_decompose(&op, &field, &set).unwrap();
        assert!(dec.mean_value_defect() < 1e-11);
        for &i in set.members() {
            assert_eq!(dec.harmonic[i], field.values()[i]);
            assert_eq!(dec.residual[i], 0.0);
        }
    }

    #[test]
    fn covariance_splits_exactly() {
        // Var(Gamma, f) = Var(Gamma_C, f) + Var(Gamma^C, f), with the harmonic
        // variance given by the capacitance form.
        let (dom, op) = setup(2, 16);
        let set = VertexSet::from_predicate(dom, |c| c[0] == 8 && c[1] % 3 == 0);
        let f: Vec<f64> = (0..dom.len()).map(|i| 1.0 + (i % 5) as f64).collect();
        let total = op.variance(&f);
        let residual = RestrictedGreens::new(&set).variance(&f).unwrap();
        let gf = op.apply(&f);
        let k = set.len();
        let gcc = DMatrix::from_fn(k, k, |i, j| op.entry(set.members()[i], set.members()[j]));
        let v = DVector::from_fn(k, |i, _| gf[set.members()[i]]);
        let harmonic =
            (v.transpose() * gcc.try_inverse().unwrap() * &v)[(0, 0)] * dom.vertex_volume().powi(2);
        assert_relative_eq!(total, harmonic + residual, max_relative = 1e-9);
    }

    #[test]
    fn restriction_lowers_the_diagonal() {
        let (dom, op) = setup(2, 16);
        let set = VertexSet::from_predicate(dom, |c| c[0] == 5);
        let rg = RestrictedGreens::new(&set);
        for x in (0..dom.len()).step_by(17) {
            assert!(rg.entry(x, x).unwrap() <= op.entry(x, x) + 1e-12);
        }
    }

    #[test]
    fn single_point_defect_vanishes_under_refinement() {
        let mut prev = f64::INFINITY;
        for m in [16, 32, 64, 128] {
            let (dom, op) = setup(2, m);
            let centre = dom.nearest_vertex(&[0.5, 0.5]).unwrap();
            let set = VertexSet::from_indices(dom, [centre]).unwrap();
            let defect = polar_defect(&op, &set).unwrap();
            assert!(defect > 0.0 && defect < prev, "m={m}: {defect} vs {prev}");
            prev = defect;
        }
    }

    #[test]
    fn defect_matches_trace_difference() {
        let (dom, op) = setup(2, 8);
        let set = VertexSet::from_indices(dom, [3, 20, 33]).unwrap();
        let rg = RestrictedGreens::new(&set);
        let direct: f64 = (0..dom.len())
            .map(|x| op.entry(x, x) - rg.entry(x, x).unwrap())
            .sum::<f64>()
            * dom.vertex_volume();
        assert_relative_eq!(
            polar_defect(&op, &set).unwrap(),
            direct,
            max_relative = 1e-9
        );
    }

    #[test]
    fn full_set_leaves_zero_residual() {
        let (dom, op) = setup(2, 8);
        let field = op.sample(StreamKey::replica(0, 0));
        let dec = markov_decompose(&op, &field, &VertexSet::all(dom)).unwrap();
        assert!(dec.residual.iter().all(|&v| v == 0.0));
        assert_eq!(dec.residual_operator.free_count(), 0);
        assert_relative_eq!(dec.polar_defect, op.integrated_trace());
    }
}
