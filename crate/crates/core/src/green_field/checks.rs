//! Structural checks of the lattice Green operator: rescaling between the
//! unit box and its half-size copy, and cell-variance decay.

use rand::Rng;
use serde::Serialize;

use super::{cell_variance, GreensOperator, RestrictedGreens, VertexSet};
use crate::dyadic::{Cell, DyadicWord, MAX_DIM};
use crate::error::{Error, Result};
use crate::rng::{tag, StreamKey};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `G_D(x, y)`.
    pub unit: f64,
    /// `r^(d-2) G_(rD)(rx, ry)` with `r = 1/2`.
    pub rescaled: f64,
    pub relative_gap: f64,
}

/// Compare `G_D(x, y)` with `r^(d-2) G_(rD)(rx, ry)` for `r = 1/2` at
/// `pairs` random pairs at distance at least `1/4`. The half box is
/// `(0, 1/2)^d` on the same lattice, solved with the restricted operator,
/// so it carries half the resolution of the unit box.
pub fn scaling_check(
    op: &GreensOperator,
    pairs: usize,
    key: StreamKey,
) -> Result<Vec<ScalingPair>> {
    let dom = *op.domain();
    let (d, m) = (dom.dim(), dom.side());
    if m < 16 {
        return Err(Error::Resolution(format!(
            "scaling check needs m >= 16, got {m}"
        )));
    }
    let half = m / 2;
    let mut ranges = [(0, 0); MAX_DIM];
    ranges[..d].fill((1, half - 1));
    let sub = RestrictedGreens::new(&VertexSet::outside_box(dom, &ranges));
    let r_scale = 0.5f64.powi(d as i32 - 2);

    let mut rng = key.derive(tag::PAIRS).stream();
    let mut out = Vec::with_capacity(pairs);
    let draw = |rng: &mut crate::rng::CounterStream| -> Vec<usize> {
        (0..d).map(|_| rng.random_range(1..half)).collect()
    };
    while out.len() < pairs {
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let dist2: f64 = a
            .iter()
            .zip(&b)
            .map(|(&p, &q)| ((p as f64 - q as f64) / half as f64).powi(2))
            .sum();
        if dist2 < 1.0 / 16.0 {
            continue;
        }
        let fine = |c: &[usize]| dom.index(&c.iter().map(|&v| 2 * v).collect::<Vec<_>>());
        let unit = op.entry(fine(&a), fine(&b));
        let rescaled = r_scale * sub.entry(dom.index(&a), dom.index(&b))?;
        out.push(ScalingPair {
            x: a.iter().map(|&v| v as f64 / half as f64).collect(),
            y: b.iter().map(|&v| v as f64 / half as f64).collect(),
            unit,
            rescaled,
            relative_gap: (rescaled - unit).abs() / unit.abs(),
        });
    }
    Ok(out)
}

/// The open depth-`n` cell whose upper corner is the centre of the box.
pub fn centre_cell(d: usize, n: usize) -> Result<Cell> {
    let c = ((1u64 << n) / 2).saturating_sub(1);
    Ok(Cell::open(DyadicWord::from_corner(
        d,
        n,
        &[c; MAX_DIM][..d],
    )?))
}

/// `(n, Var(Gamma, 1_s))` for the centre cell at each level.
pub fn centre_cell_variances(
    op: &GreensOperator,
    levels: std::ops::RangeInclusive<usize>,
) -> Result<Vec<(usize, f64)>> {
    let d = op.domain().dim();
    levels
        .map(|n| {
            let c = centre_cell(d, n)?;
            Ok((n, cell_variance(op, &c, &c)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green_field::LatticeDomain;

    #[test]
    fn half_box_rescales() {
        let op = GreensOperator::build(LatticeDomain::new(2, 64).unwrap()).unwrap();
        let pairs = scaling_check(&op, 5, StreamKey::from_seed(3)).unwrap();
        assert_eq!(pairs.len(), 5);
        for p in &pairs {
            assert!(p.relative_gap < 0.05, "{p:?}");
        }
    }

    #[test]
    fn centre_variances_decay() {
        let op = GreensOperator::build(LatticeDomain::new(3, 32).unwrap()).unwrap();
        let v = centre_cell_variances(&op, 0..=3).unwrap();
        assert!(v.windows(2).all(|w| w[1].1 < w[0].1));
    }
}
