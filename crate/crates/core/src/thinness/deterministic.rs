//! Exact variances `Var(Gamma, f 1_{A_n})` for deterministic sets, and the
//! per-replica bridge identity of the field-coupled exploration.

use std::ops::RangeInclusive;

use serde::Serialize;

use crate::dyadic::{approximate, DyadicScheme, Shape};
use crate::error::{Error, Result};
use crate::exploration::GenerationRecord;
use crate::green_field::GreensOperator;
use crate::stats::Summary;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThinRow {
    pub n: usize,
    /// Closed depth-`n` cells meeting `A`.
    pub cells: usize,
    pub variance: f64,
}

/// `Var(Gamma, f 1_{A_n})` as an exact quadratic form, for each level.
pub fn deterministic_thin_report(
    op: &GreensOperator,
    shape: &Shape,
    weight: Option<&[f64]>,
    levels: RangeInclusive<usize>,
) -> Result<Vec<ThinRow>> {
    let dom = *op.domain();
    if let Some(w) = weight {
        if w.len() != dom.len() {
            return Err(Error::Input("weight does not match the lattice".into()));
        }
    }
    let scheme = DyadicScheme::new(dom.dim());
    levels
        .map(|n| {
            let approx = approximate(shape, n, &scheme, &dom)?;
            let mask = approx.vertex_mask(&dom);
            let f: Vec<f64> = mask
                .iter()
                .enumerate()
                .map(|(i, &on)| {
                    if on {
                        weight.map_or(1.0, |w| w[i])
                    } else {
                        0.0
                    }
                })
                .collect();
            let variance = if f.iter().all(|&v| v == 0.0) {
                0.0
            } else {
                op.variance(&f)
            };
            Ok(ThinRow {
                n,
                cells: approx.count,
                variance,
            })
        })
        .collect()
}

/// Per level, whether `V(A u B) <= V(A) + V(B) + 2 sqrt(V(A) V(B))`.
pub fn union_bound_holds(union: &[ThinRow], a: &[ThinRow], b: &[ThinRow]) -> Vec<(usize, bool)> {
    union
        .iter()
        .zip(a.iter().zip(b))
        .map(|(u, (x, y))| {
            let bound = x.variance + y.variance + 2.0 * (x.variance * y.variance).sqrt();
            (u.n, u.variance <= bound * (1.0 + 1e-12))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BridgeRow {
    pub n: usize,
    /// Largest relative residual of the bridge identity over replicas.
    pub max_residual: f64,
    /// Largest relative telescoping residual over replicas.
    pub max_telescoping: f64,
    /// Moments of `(Gamma^A, 1_{A_n})` over replicas.
    pub fluctuation: Summary,
}

/// Collect the ledger identities of field-coupled runs per generation, from
/// the generation records of each replica.
pub fn bridge_report(replicas: &[Vec<GenerationRecord>]) -> Result<Vec<BridgeRow>> {
    if replicas.is_empty() {
        return Err(Error::Input(
            "bridge report over an empty replica stream".into(),
        ));
    }
    let depth = replicas.iter().map(Vec::len).min().unwrap_or(0);
    (0..depth)
        .map(|n| {
            let mut max_residual: f64 = 0.0;
            let mut max_telescoping: f64 = 0.0;
            let mut fl = Vec::with_capacity(replicas.len());
            for records in replicas {
                let f = records[n].field.as_ref().ok_or_else(|| {
                    Error::Input("bridge report needs field-coupled records".into())
                })?;
                max_residual = max_residual.max(f.bridge_residual);
                max_telescoping = max_telescoping.max(f.telescoping_residual);
                fl.push(f.fluctuation);
            }
            Ok(BridgeRow {
                n: replicas[0][n].n,
                max_residual,
                max_telescoping,
                fluctuation: Summary::from_samples(&fl),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green_field::LatticeDomain;
    use approx::assert_relative_eq;

    #[test]
    fn trivial_sets() {
        let dom = LatticeDomain::new(2, 64).unwrap();
        let op = GreensOperator::build(dom).unwrap();
        let empty = deterministic_thin_report(&op, &Shape::Empty, None, 0..=4).unwrap();
        assert!(empty.iter().all(|r| r.variance == 0.0));
        let full = deterministic_thin_report(&op, &Shape::Domain(2), None, 0..=4).unwrap();
        let v = op.variance(&vec![1.0; dom.len()]);
        for r in &full {
            assert_relative_eq!(r.variance, v, max_relative = 1e-12);
        }
    }

    #[test]
    fn segment_variance_shrinks() {
        let dom = LatticeDomain::new(2, 128).unwrap();
        let op = GreensOperator::build(dom).unwrap();
        let seg = Shape::segment(&[0.1, 0.3], &[0.9, 0.3]);
        let rows = deterministic_thin_report(&op, &seg, None, 0..=5).unwrap();
        for w in rows[1..].windows(2) {
            assert!(w[1].variance < w[0].variance);
        }
        let other = Shape::segment(&[0.3, 0.1], &[0.3, 0.9]);
        let rb = deterministic_thin_report(&op, &other, None, 0..=5).unwrap();
        let ru =
            deterministic_thin_report(&op, &Shape::union(vec![seg, other]), None, 0..=5).unwrap();
        assert!(union_bound_holds(&ru, &rows, &rb).iter().all(|(_, ok)| *ok));
    }
}
