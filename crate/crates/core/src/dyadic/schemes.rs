//! Discrete approximation schemes: per level `n`, a family of zero-volume
//! pieces `B_n` and volume-carrying closed boxes `C_n` covering `D`.

use serde::Serialize;

use super::{Cell, DyadicWord, Shape, VertexRanges, MAX_DIM};
use crate::error::{Error, Result};
use crate::green_field::LatticeDomain;

/// A closed axis-aligned box `[lo, hi]` within `[0,1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Piece {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Piece {
    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a).max(0.0))
            .product()
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn centre(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| v >= a && v <= b)
    }

    pub fn overlap_volume(&self, other: &Piece) -> f64 {
        (0..self.lo.len())
            .map(|j| (self.hi[j].min(other.hi[j]) - self.lo[j].max(other.lo[j])).max(0.0))
            .product()
    }

    /// Interior lattice vertices of the closed box.
    pub fn vertex_ranges(&self, dom: &LatticeDomain) -> VertexRanges {
        let m = dom.side() as f64;
        let mut r = [(1, 0); MAX_DIM];
        for j in 0..self.lo.len() {
            let a = (self.lo[j] * m - 1e-9).ceil().max(1.0) as usize;
            let b = (self.hi[j] * m + 1e-9).floor().min(m - 1.0) as usize;
            r[j] = (a, b);
        }
        r
    }

    fn meets_outside_boundary(&self, shape: &Shape) -> bool {
        // A \ dD meets the piece iff A meets the piece with its faces on dD
        // pulled inward by a negligible margin.
        const MARGIN: f64 = 1e-9;
        let lo: Vec<f64> = self
            .lo
            .iter()
            .map(|&v| if v <= 0.0 { MARGIN } else { v })
            .collect();
        let hi: Vec<f64> = self
            .hi
            .iter()
            .map(|&v| if v >= 1.0 { 1.0 - MARGIN } else { v })
            .collect();
        shape.intersects_box(&lo, &hi)
    }
}

pub trait DasScheme: Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// The scheme constant `C` of conditions (2).
    fn constant(&self) -> f64;
    /// Volume-carrying pieces `C_n`.
    fn pieces(&self, n: usize) -> Vec<Piece>;
    /// Zero-volume pieces `B_n`.
    fn null_pieces(&self, n: usize) -> Vec<Piece>;
    /// Whether `B_n` covers `dD`, so that hits are tested against `A \ dD`.
    fn excludes_boundary(&self) -> bool {
        !self.null_pieces(0).is_empty()
    }
    /// Finest lattice spacing the level-`n` pieces need, in units of `2^-n`.
    fn lattice_refinement(&self) -> usize {
        1
    }
    /// Indices into `pieces(n)` of the pieces meeting `A \ B^n`.
    fn hits(&self, shape: &Shape, n: usize) -> Vec<usize> {
        let pieces = self.pieces(n);
        let outside = self.excludes_boundary();
        pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                if outside {
                    p.meets_outside_boundary(shape)
                } else {
                    shape.intersects_box(&p.lo, &p.hi)
                }
            })
            .map(|(i, _)| i)
            .collect()
    }
}

/// Closed dyadic cells `cl(S^u) , |u| = n`, with `B_n` empty.
#[derive(Clone, Copy, Debug)]
pub struct DyadicScheme {
    pub dim: usize,
}

impl DyadicScheme {
    pub fn new(dim: usize) -> Self {
        DyadicScheme { dim }
    }

    /// Depth-`n` words in letter order, matching `pieces(n)`.
    pub fn words(&self, n: usize) -> Vec<DyadicWord> {
        let mut level = vec![DyadicWord::root(self.dim)];
        for _ in 0..n {
            level = level.into_iter().flat_map(|w| w.children()).collect();
        }
        level
    }

    /// Words of the closed depth-`n` cells meeting `shape`, found by
    /// descending only into hit cells.
    pub fn hit_words(&self, shape: &Shape, n: usize) -> Vec<DyadicWord> {
        let mut frontier = Vec::new();
        let root = DyadicWord::root(self.dim);
        if shape.is_empty() {
            return frontier;
        }
        frontier.push(root);
        for _ in 0..n {
            frontier = frontier
                .into_iter()
                .flat_map(|w| w.children())
                .filter(|w| {
                    let c = Cell::closed(*w);
                    shape.intersects_box(&c.lower(), &c.upper())
                })
                .collect();
        }
        let c = Cell::closed(root);
        if n == 0 && !shape.intersects_box(&c.lower(), &c.upper()) {
            frontier.clear();
        }
        frontier
    }
}

fn word_index(w: DyadicWord) -> usize {
    w.code() as usize
}

impl DasScheme for DyadicScheme {
    fn name(&self) -> &str {
        "dyadic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn constant(&self) -> f64 {
        (self.dim as f64).sqrt()
    }

    fn pieces(&self, n: usize) -> Vec<Piece> {
        self.words(n)
            .into_iter()
            .map(|w| {
                let c = Cell::closed(w);
                Piece {
                    lo: c.lower(),
                    hi: c.upper(),
                }
            })
            .collect()
    }

    fn null_pieces(&self, _n: usize) -> Vec<Piece> {
        Vec::new()
    }

    fn excludes_boundary(&self) -> bool {
        false
    }

    fn hits(&self, shape: &Shape, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .hit_words(shape, n)
            .into_iter()
            .map(word_index)
            .collect();
        idx.sort_unstable();
        idx
    }
}

/// Dyadic grid shifted by `2^(-n-1)` in every coordinate and clipped to `D`;
/// `B_n` consists of the `2d` faces of `dD`.
#[derive(Clone, Copy, Debug)]
pub struct ShiftedGridScheme {
    pub dim: usize,
}

impl ShiftedGridScheme {
    pub fn new(dim: usize) -> Self {
        ShiftedGridScheme { dim }
    }

    /// Breakpoints `0, 1/2, 3/2, .., 2^n - 1/2, 2^n` in units of `2^-n`.
    fn breaks(n: usize) -> Vec<f64> {
        let k = 1usize << n;
        let s = 1.0 / k as f64;
        let mut b = vec![0.0];
        b.extend((0..k).map(|i| (i as f64 + 0.5) * s));
        b.push(1.0);
        b
    }
}

impl DasScheme for ShiftedGridScheme {
    fn name(&self) -> &str {
        "shifted"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn constant(&self) -> f64 {
        (1usize << self.dim) as f64
    }

    fn lattice_refinement(&self) -> usize {
        2
    }

    fn pieces(&self, n: usize) -> Vec<Piece> {
        let b = Self::breaks(n);
        let per_axis = b.len() - 1;
        let total = per_axis.pow(self.dim as u32);
        (0..total)
            .map(|mut i| {
                let mut lo = vec![0.0; self.dim];
                let mut hi = vec![0.0; self.dim];
                for j in (0..self.dim).rev() {
                    let k = i % per_axis;
                    i /= per_axis;
                    lo[j] = b[k];
                    hi[j] = b[k + 1];
                }
                Piece { lo, hi }
            })
            .collect()
    }

    fn null_pieces(&self, _n: usize) -> Vec<Piece> {
        let mut faces = Vec::new();
        for j in 0..self.dim {
            for side in [0.0, 1.0] {
                let mut lo = vec![0.0; self.dim];
                let mut hi = vec![1.0; self.dim];
                lo[j] = side;
                hi[j] = side;
                faces.push(Piece { lo, hi });
            }
        }
        faces
    }
}

/// `A[A]_n` and the hit family `A{A}_n` of one scheme at one level.
#[derive(Clone, Debug, Serialize)]
pub struct Approximation {
    pub level: usize,
    pub scheme: String,
    pub hits: Vec<Piece>,
    pub count: usize,
    pub volume: f64,
}

impl Approximation {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.hits.iter().any(|p| p.contains(x))
    }

    /// Interior vertices lying in the union of hit pieces.
    pub fn vertex_mask(&self, dom: &LatticeDomain) -> Vec<bool> {
        let mut mask = vec![false; dom.len()];
        for p in &self.hits {
            dom.for_each_in(&p.vertex_ranges(dom), |i| mask[i] = true);
        }
        mask
    }

    /// Closed-grid raster of the union.
    pub fn raster(&self, dom: &LatticeDomain) -> super::Raster {
        let mut r = super::Raster::empty(dom);
        let m = dom.side() as f64;
        for p in &self.hits {
            let d = p.lo.len();
            let mut rng = [(0usize, 0usize); MAX_DIM];
            for j in 0..d {
                rng[j] = (
                    (p.lo[j] * m - 1e-9).ceil() as usize,
                    (p.hi[j] * m + 1e-9).floor() as usize,
                );
            }
            let mut c = [0usize; MAX_DIM];
            for j in 0..d {
                c[j] = rng[j].0;
            }
            'outer: loop {
                r.set(&c, true);
                let mut j = d;
                loop {
                    if j == 0 {
                        break 'outer;
                    }
                    j -= 1;
                    c[j] += 1;
                    if c[j] <= rng[j].1 {
                        break;
                    }
                    c[j] = rng[j].0;
                }
            }
        }
        r
    }
}

/// Level-`n` approximation of `shape` under `scheme`.
pub fn approximate(
    shape: &Shape,
    n: usize,
    scheme: &dyn DasScheme,
    dom: &LatticeDomain,
) -> Result<Approximation> {
    if (1usize << n) * scheme.lattice_refinement() > dom.side() {
        return Err(Error::Resolution(format!(
            "level {n} of the {} scheme is finer than the lattice (m = {})",
            scheme.name(),
            dom.side()
        )));
    }
    if let Some(d) = shape.dim() {
        if d != scheme.dim() {
            return Err(Error::Input(format!(
                "set has dimension {d}, scheme {}",
                scheme.dim()
            )));
        }
    }
    let hits: Vec<Piece> = if shape.is_empty() {
        Vec::new()
    } else {
        let pieces = scheme.pieces(n);
        scheme
            .hits(shape, n)
            .into_iter()
            .map(|i| pieces[i].clone())
            .collect()
    };
    let volume = crate::stats::pairwise_sum(&hits.iter().map(Piece::volume).collect::<Vec<_>>());
    Ok(Approximation {
        level: n,
        scheme: scheme.name().to_string(),
        count: hits.len(),
        hits,
        volume,
    })
}

/// Number of closed depth-`n` dyadic cells meeting `shape`.
pub fn box_count(shape: &Shape, dim: usize, n: usize) -> usize {
    DyadicScheme::new(dim).hit_words(shape, n).len()
}

/// Lattice volume of `{x : dist(x, A) <= eps}`, by the midpoint rule over
/// the `m^d` lattice cells.
pub fn neighborhood_volume(shape: &Shape, eps: f64, dom: &LatticeDomain) -> Result<f64> {
    if eps < 2.0 * dom.mesh() {
        return Err(Error::Resolution(format!(
            "eps = {eps} is below two mesh widths ({})",
            2.0 * dom.mesh()
        )));
    }
    if shape.is_empty() {
        return Ok(0.0);
    }
    let d = dom.dim();
    let m = dom.side();
    let h = dom.mesh();
    let total = m.pow(d as u32);
    let mut x = vec![0.0; d];
    let mut count = 0usize;
    for mut i in 0..total {
        for j in (0..d).rev() {
            x[j] = ((i % m) as f64 + 0.5) * h;
            i /= m;
        }
        if shape.distance(&x) <= eps {
            count += 1;
        }
    }
    Ok(count as f64 * dom.vertex_volume())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom2() -> LatticeDomain {
        LatticeDomain::new(2, 64).unwrap()
    }

    #[test]
    fn empty_and_full_sets() {
        let dom = dom2();
        let s = DyadicScheme::new(2);
        for n in 0..5 {
            let a = approximate(&Shape::Empty, n, &s, &dom).unwrap();
            assert_eq!((a.count, a.volume), (0, 0.0));
            let full = approximate(&Shape::Domain(2), n, &s, &dom).unwrap();
            assert_eq!(full.count, 1 << (2 * n));
            assert!((full.volume - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_aligned_segment_count() {
        // Brute force: a closed cell [i,i+1]x[j,j+1] (units 2^-n) meets the
        // segment {y = 1/4, x in [0, 1/2]} iff j or j+1 equals 2^n/4 and
        // i < 2^n/2 + 1.
        let dom = dom2();
        let s = DyadicScheme::new(2);
        let seg = Shape::segment(&[0.0, 0.25], &[0.5, 0.25]);
        for n in 2..6 {
            let k = 1usize << n;
            let mut brute = 0;
            for i in 0..k {
                for j in 0..k {
                    if (j == k / 4 || j + 1 == k / 4) && i <= k / 2 {
                        brute += 1;
                    }
                }
            }
            let a = approximate(&seg, n, &s, &dom).unwrap();
            assert_eq!(a.count, brute);
            let l = 0.5 * k as f64;
            // two rows of cells: each row holds between L 2^n and L 2^n + 2
            assert!(a.count as f64 >= 2.0 * l && a.count as f64 <= 2.0 * (l + 2.0));
        }
    }

    #[test]
    fn resolution_guard() {
        let dom = LatticeDomain::new(2, 8).unwrap();
        assert!(matches!(
            approximate(&Shape::Empty, 4, &DyadicScheme::new(2), &dom),
            Err(Error::Resolution(_))
        ));
        assert!(approximate(&Shape::Empty, 3, &ShiftedGridScheme::new(2), &dom).is_err());
    }

    #[test]
    fn shifted_pieces_tile_the_box() {
        let s = ShiftedGridScheme::new(2);
        for n in 0..4 {
            let p = s.pieces(n);
            assert_eq!(p.len(), ((1 << n) + 1) * ((1 << n) + 1));
            let vol: f64 = p.iter().map(Piece::volume).sum();
            assert!((vol - 1.0).abs() < 1e-12);
        }
        assert!(s.null_pieces(3).iter().all(|f| f.volume() == 0.0));
    }

    #[test]
    fn shifted_scheme_ignores_boundary_only_contact() {
        let dom = dom2();
        let s = ShiftedGridScheme::new(2);
        let on_edge = Shape::segment(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(approximate(&on_edge, 3, &s, &dom).unwrap().count, 0);
        let dy = approximate(&on_edge, 3, &DyadicScheme::new(2), &dom).unwrap();
        assert_eq!(dy.count, 8);
    }

    #[test]
    fn neighborhood_volumes() {
        let dom = dom2();
        assert_eq!(neighborhood_volume(&Shape::Empty, 0.1, &dom).unwrap(), 0.0);
        assert!((neighborhood_volume(&Shape::Domain(2), 0.1, &dom).unwrap() - 1.0).abs() < 1e-12);
        assert!(neighborhood_volume(&Shape::Empty, 0.01, &dom).is_err());
    }
}
