//! Checks of the scheme conditions (1)-(3) and the empirical two-dimensional
//! variance and correlation constants of a scheme's cells.

use std::ops::RangeInclusive;

use rand::Rng;
use serde::Serialize;

use super::schemes::{approximate, DasScheme, Piece};
use super::Shape;
use crate::error::{Error, Result};
use crate::green_field::{GreensOperator, LatticeDomain};
use crate::rng::{tag, StreamKey};

/// Pairs sampled per level for the correlation statistic.
const PAIR_SAMPLES: usize = 256;
/// Cells sampled per level for the variance ratio.
const CELL_SAMPLES: usize = 256;

#[derive(Clone, Debug, Serialize)]
pub struct DasLevel {
    pub n: usize,
    pub pieces: usize,
    /// Largest overlap volume between distinct pieces of `C_n`.
    pub max_overlap: f64,
    /// `min vol(c) 2^(nd)`.
    pub min_scaled_volume: f64,
    /// `max diam(c) 2^n`.
    pub max_scaled_diameter: f64,
    pub null_pieces: usize,
    pub null_volume: f64,
    /// Volume of the approximation of the centre point.
    pub probe_volume: f64,
    /// `min/max 2^(-2n) sqrt(n) / (sqrt(2 pi) sqrt(G_D(c)))` over sampled cells (d = 2).
    pub variance_ratio: Option<(f64, f64)>,
    /// `max u_xy n / (1 - ln |x - y|)` over sampled pairs at distance > 1/n (d = 2).
    pub correlation_stat: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DasReport {
    pub scheme: String,
    pub dim: usize,
    pub constant: f64,
    /// Smallest `C` satisfying condition (2) at every checked level.
    pub fitted_constant: f64,
    pub levels: Vec<DasLevel>,
    pub passed: bool,
}

/// Largest pairwise overlap, found by a sweep along the first axis. The
/// first pair overlapping in positive volume is returned as an error.
fn sweep_overlap(pieces: &[Piece]) -> Result<f64> {
    let mut order: Vec<usize> = (0..pieces.len()).collect();
    order.sort_by(|&a, &b| pieces[a].lo[0].total_cmp(&pieces[b].lo[0]));
    let mut worst: f64 = 0.0;
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if pieces[j].lo[0] >= pieces[i].hi[0] {
                break;
            }
            let v = pieces[i].overlap_volume(&pieces[j]);
            if v > 1e-15 {
                return Err(Error::Validation(format!(
                    "pieces {:?} and {:?} overlap in volume {v:e}",
                    pieces[i], pieces[j]
                )));
            }
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

fn sample_indices(len: usize, count: usize, rng: &mut impl Rng) -> Vec<usize> {
    if len <= count {
        (0..len).collect()
    } else {
        (0..count).map(|_| rng.random_range(0..len)).collect()
    }
}

/// Validate `scheme` over `levels`. When `stats` is given and `d = 2`, also
/// report the variance and correlation constants of its cells.
pub fn validate_das(
    scheme: &dyn DasScheme,
    dom: &LatticeDomain,
    levels: RangeInclusive<usize>,
    stats: Option<(&GreensOperator, StreamKey)>,
) -> Result<DasReport> {
    let d = scheme.dim();
    if d != dom.dim() {
        return Err(Error::Input(format!(
            "scheme is {d}-dimensional, lattice {}",
            dom.dim()
        )));
    }
    let probe = Shape::point(&vec![0.5; d]);
    let mut out = Vec::new();
    let mut fitted: f64 = 0.0;
    for n in levels {
        let pieces = scheme.pieces(n);
        let scale = (1u64 << n) as f64;
        let max_overlap = sweep_overlap(&pieces)?;
        let min_scaled_volume = pieces
            .iter()
            .map(|p| p.volume() * scale.powi(d as i32))
            .fold(f64::INFINITY, f64::min);
        let max_scaled_diameter = pieces
            .iter()
            .map(|p| p.diameter() * scale)
            .fold(0.0, f64::max);
        fitted = fitted.max(max_scaled_diameter).max(1.0 / min_scaled_volume);
        let nulls = scheme.null_pieces(n);
        let null_volume = nulls.iter().map(Piece::volume).sum();
        let probe_volume = approximate(&probe, n, scheme, dom)?.volume;

        let (variance_ratio, correlation_stat) = match stats {
            Some((op, key)) if d == 2 && n >= 1 => {
                let (vr, cs) =
                    two_dim_constants(op, &pieces, n, key.derive(tag::PAIRS).derive(n as u64))?;
                (Some(vr), cs)
            }
            _ => (None, None),
        };
        out.push(DasLevel {
            n,
            pieces: pieces.len(),
            max_overlap,
            min_scaled_volume,
            max_scaled_diameter,
            null_pieces: nulls.len(),
            null_volume,
            probe_volume,
            variance_ratio,
            correlation_stat,
        });
    }
    let passed = fitted <= scheme.constant() + 1e-9
        && out
            .iter()
            .all(|l| l.null_volume == 0.0 && l.max_overlap == 0.0);
    Ok(DasReport {
        scheme: scheme.name().to_string(),
        dim: d,
        constant: scheme.constant(),
        fitted_constant: fitted,
        levels: out,
        passed,
    })
}

fn two_dim_constants(
    op: &GreensOperator,
    pieces: &[Piece],
    n: usize,
    key: StreamKey,
) -> Result<((f64, f64), Option<f64>)> {
    let dom = *op.domain();
    if (1usize << n) > dom.side() {
        return Err(Error::Resolution(format!(
            "level {n} is finer than the lattice"
        )));
    }
    let mut rng = key.stream();
    let var = |p: &Piece| {
        let r = p.vertex_ranges(&dom);
        op.box_covariance(&r, &r)
    };
    let nf = n as f64;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in sample_indices(pieces.len(), CELL_SAMPLES, &mut rng) {
        let v = var(&pieces[i]);
        if v > 0.0 {
            let r = 4f64.powi(-(n as i32)) * nf.sqrt()
                / ((2.0 * std::f64::consts::PI).sqrt() * v.sqrt());
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    let mut best: Option<f64> = None;
    let mut tries = 0;
    let mut found = 0;
    while found < PAIR_SAMPLES && tries < 20 * PAIR_SAMPLES {
        tries += 1;
        let i = rng.random_range(0..pieces.len());
        let j = rng.random_range(0..pieces.len());
        let (ci, cj) = (pieces[i].centre(), pieces[j].centre());
        let dist = ci
            .iter()
            .zip(&cj)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if i == j || dist <= 1.0 / nf {
            continue;
        }
        found += 1;
        let (ri, rj) = (pieces[i].vertex_ranges(&dom), pieces[j].vertex_ranges(&dom));
        let (vi, vj) = (op.box_covariance(&ri, &ri), op.box_covariance(&rj, &rj));
        if vi <= 0.0 || vj <= 0.0 {
            continue;
        }
        let u = op.box_covariance(&ri, &rj) / (vi * vj).sqrt();
        let s = u * nf / (1.0 - dist.ln());
        best = Some(best.map_or(s, |b: f64| b.max(s)));
    }
    Ok(((lo, hi), best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{DyadicScheme, ShiftedGridScheme};

    #[test]
    fn dyadic_scheme_has_no_overlap() {
        let dom = LatticeDomain::new(2, 64).unwrap();
        let r = validate_das(&DyadicScheme::new(2), &dom, 3..=6, None).unwrap();
        assert!(r.passed);
        assert!(r.levels.iter().all(|l| l.max_overlap == 0.0));
    }

    #[test]
    fn cube_diameters() {
        let dom = LatticeDomain::new(3, 32).unwrap();
        let r = validate_das(&DyadicScheme::new(3), &dom, 1..=5, None).unwrap();
        for l in &r.levels {
            assert!((l.max_scaled_diameter - 3f64.sqrt()).abs() < 1e-12);
            assert!((l.min_scaled_volume - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_scheme_constant_is_two_to_the_d() {
        // Corner pieces are 2^-n/2 wide in every direction, so vol 2^(nd) = 2^-d.
        for d in [2, 3] {
            let dom = LatticeDomain::new(d, 32).unwrap();
            let r = validate_das(&ShiftedGridScheme::new(d), &dom, 0..=4, None).unwrap();
            assert!(r.passed);
            assert!((r.fitted_constant - (1 << d) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn overlapping_family_is_rejected() {
        let p = vec![
            Piece {
                lo: vec![0.0, 0.0],
                hi: vec![0.6, 1.0],
            },
            Piece {
                lo: vec![0.5, 0.0],
                hi: vec![1.0, 1.0],
            },
        ];
        assert!(matches!(sweep_overlap(&p), Err(Error::Validation(_))));
    }
}
