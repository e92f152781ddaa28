//! Statistics of the cell masses `(Gamma, 1_s)` over one level of cells.

use serde::Serialize;

use crate::dyadic::{Cell, DyadicScheme, DyadicWord, Shape, MAX_DIM};
use crate::error::{Error, Result};
use crate::green_field::{FieldSample, GreensOperator};
use crate::rng::StreamKey;

fn corner_index(w: DyadicWord) -> usize {
    let per_axis = 1usize << w.depth();
    let c = w.corner();
    c[..w.dim()]
        .iter()
        .fold(0, |acc, &x| acc * per_axis + x as usize)
}

fn check_level(field: &FieldSample, n: usize, min_width: usize) -> Result<()> {
    let m = field.domain().side();
    if n >= usize::BITS as usize || (m >> n) < min_width {
        return Err(Error::Resolution(format!(
            "depth {n} cells are narrower than {min_width} mesh widths (m = {m})"
        )));
    }
    Ok(())
}

/// `sup_{s in S_n} |(Gamma, f 1_s)| 2^(beta n)`, with `f = 1` unless a
/// vertex weight is supplied.
pub fn sup_cell_statistic(
    field: &FieldSample,
    beta: f64,
    n: usize,
    weight: Option<&[f64]>,
) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    check_level(field, n, 2)?;
    let masses = match weight {
        None => field.open_cell_masses(n)?,
        Some(w) => {
            if w.len() != field.values().len() {
                return Err(Error::Input("weight does not match the lattice".into()));
            }
            let product: Vec<f64> = field.values().iter().zip(w).map(|(a, b)| a * b).collect();
            FieldSample::from_values(*field.domain(), product)?.open_cell_masses(n)?
        }
    };
    let sup = masses.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    Ok(sup * 2f64.powf(beta * n as f64))
}

/// [`sup_cell_statistic`] on a fresh sample for `key`.
pub fn sup_cell_statistic_sampled(
    op: &GreensOperator,
    beta: f64,
    n: usize,
    key: StreamKey,
) -> Result<f64> {
    sup_cell_statistic(&op.sample(key), beta, n, None)
}

/// `sum |(Gamma, 1_s)|` over closed depth-`n` cells meeting `A`.
pub fn indicator_sum(field: &FieldSample, shape: &Shape, n: usize) -> Result<f64> {
    check_level(field, n, 1)?;
    let d = field.domain().dim();
    let masses = field.open_cell_masses(n)?;
    let hits = DyadicScheme::new(d).hit_words(shape, n);
    Ok(hits.iter().map(|w| masses[corner_index(*w)].abs()).sum())
}

/// The two-dimensional exceedance threshold at level `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdSpec {
    pub n: usize,
    /// `m_n = 4^-n sqrt(n) sqrt(log n + 2 log log n) kappa`.
    pub threshold: f64,
    pub kappa: f64,
    pub strict: bool,
}

/// `sqrt(log 2) / sqrt(2 pi)`.
pub fn paper_kappa() -> f64 {
    (std::f64::consts::LN_2 / (2.0 * std::f64::consts::PI)).sqrt()
}

/// `4^n sqrt(G_D(s)) / sqrt(n)` for the open depth-`n` cell touching the
/// centre of the box from below in every coordinate.
pub fn lattice_kappa(op: &GreensOperator, n: usize) -> Result<f64> {
    let d = op.domain().dim();
    if n == 0 {
        return Err(Error::Domain("kappa is defined for n >= 1".into()));
    }
    let half = (1u64 << n) / 2;
    let corner = [half.saturating_sub(1); MAX_DIM];
    let w = DyadicWord::from_corner(d, n, &corner[..d])?;
    let var = crate::green_field::cell_variance(op, &Cell::open(w), &Cell::open(w))?;
    Ok(4f64.powi(n as i32) * var.sqrt() / (n as f64).sqrt())
}

impl ThresholdSpec {
    /// With `strict`, `kappa = sqrt(log 2 / 2 pi)`; otherwise `kappa` is the
    /// measured lattice value at level `n`.
    pub fn new(op: &GreensOperator, n: usize, strict: bool) -> Result<Self> {
        if n < 3 {
            return Err(Error::Domain(format!(
                "log n + 2 log log n is not positive at n = {n}; the threshold needs n >= 3"
            )));
        }
        let kappa = if strict {
            paper_kappa()
        } else {
            lattice_kappa(op, n)?
        };
        let nf = n as f64;
        let threshold =
            4f64.powi(-(n as i32)) * nf.sqrt() * (nf.ln() + 2.0 * nf.ln().ln()).sqrt() * kappa;
        Ok(ThresholdSpec {
            n,
            threshold,
            kappa,
            strict,
        })
    }

    /// `alpha_x = m_n / sqrt(Var(Gamma, 1_s))`.
    pub fn alpha(&self, op: &GreensOperator, cell: &Cell) -> Result<f64> {
        Ok(self.threshold / crate::green_field::cell_variance(op, cell, cell)?.sqrt())
    }
}

/// `Cov((Gamma, 1_s), (Gamma, 1_s')) / sqrt(Var Var)`.
pub fn cell_correlation(op: &GreensOperator, a: &Cell, b: &Cell) -> Result<f64> {
    let cov = crate::green_field::cell_variance(op, a, b)?;
    let va = crate::green_field::cell_variance(op, a, a)?;
    let vb = crate::green_field::cell_variance(op, b, b)?;
    Ok(cov / (va * vb).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Exceedance {
    /// `R_n`: cells with `|(Gamma, 1_s)| >= m_n`.
    pub count: usize,
    /// `sum |(Gamma, 1_s)| 1{|(Gamma, 1_s)| >= m_n}`.
    pub sum: f64,
}

pub fn exceedance_stats(field: &FieldSample, spec: &ThresholdSpec) -> Result<Exceedance> {
    if field.domain().dim() != 2 {
        return Err(Error::Unsupported(format!(
            "the exceedance threshold is calibrated for d = 2, not d = {}",
            field.domain().dim()
        )));
    }
    check_level(field, spec.n, 2)?;
    let masses = field.open_cell_masses(spec.n)?;
    let mut out = Exceedance { count: 0, sum: 0.0 };
    for v in masses {
        if v.abs() >= spec.threshold {
            out.count += 1;
            out.sum += v.abs();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green_field::LatticeDomain;
    use approx::assert_relative_eq;

    #[test]
    fn zero_field_statistics_vanish() {
        let dom = LatticeDomain::new(2, 64).unwrap();
        let op = GreensOperator::build(dom).unwrap();
        let z = FieldSample::zeros(dom);
        assert_eq!(sup_cell_statistic(&z, 2.0, 3, None).unwrap(), 0.0);
        let spec = ThresholdSpec::new(&op, 4, true).unwrap();
        let e = exceedance_stats(&z, &spec).unwrap();
        assert_eq!((e.count, e.sum), (0, 0.0));
        assert_eq!(indicator_sum(&z, &Shape::Domain(2), 3).unwrap(), 0.0);
    }

    #[test]
    fn indicator_sum_over_the_domain_is_brute_force() {
        let dom = LatticeDomain::new(2, 32).unwrap();
        let op = GreensOperator::build(dom).unwrap();
        let f = op.sample(StreamKey::replica(4, 2));
        for n in 0..4 {
            let brute: f64 = DyadicScheme::new(2)
                .words(n)
                .into_iter()
                .map(|w| f.cell_pairing(&Cell::open(w)).unwrap().abs())
                .sum();
            assert_relative_eq!(
                indicator_sum(&f, &Shape::Domain(2), n).unwrap(),
                brute,
                max_relative = 1e-12
            );
        }
        assert_eq!(indicator_sum(&f, &Shape::Empty, 3).unwrap(), 0.0);
    }

    #[test]
    fn thresholds() {
        let dom = LatticeDomain::new(2, 256).unwrap();
        let op = GreensOperator::build(dom).unwrap();
        assert!(ThresholdSpec::new(&op, 2, true).is_err());
        let mut prev = f64::INFINITY;
        for n in 3..8 {
            let s = ThresholdSpec::new(&op, n, true).unwrap();
            assert!(s.threshold > 0.0 && s.threshold < prev);
            prev = s.threshold;
        }
        let d3 = LatticeDomain::new(3, 16).unwrap();
        let f3 = FieldSample::zeros(d3);
        let spec = ThresholdSpec::new(&op, 3, true).unwrap();
        assert!(matches!(
            exceedance_stats(&f3, &spec),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn correlations_are_in_unit_interval() {
        let dom = LatticeDomain::new(2, 64).unwrap();
        let op = GreensOperator::build(dom).unwrap();
        let a = Cell::open(DyadicWord::from_corner(2, 3, &[1, 2]).unwrap());
        let b = Cell::open(DyadicWord::from_corner(2, 3, &[6, 5]).unwrap());
        let u = cell_correlation(&op, &a, &b).unwrap();
        assert!(u > 0.0 && u < 1.0);
        assert_relative_eq!(cell_correlation(&op, &a, &a).unwrap(), 1.0, epsilon = 1e-12);
    }
}
