use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::green_field::LatticeDomain;

pub const MAX_DIM: usize = 4;

/// A finite word over `{1, ..., 2^d}` naming the dyadic cube `S^u`.
///
/// Letters are stored zero-based and packed `d` bits each, first letter
/// most significant. Bit `d - 1 - j` of a letter selects the lower (0) or
/// upper (1) half along coordinate `j`, so children are ordered
/// lexicographically by their coordinate bit pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicWord {
    dim: u8,
    depth: u8,
    code: u64,
}

impl DyadicWord {
    pub fn root(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        DyadicWord {
            dim: dim as u8,
            depth: 0,
            code: 0,
        }
    }

    /// Build a word from zero-based letters.
    pub fn from_letters(dim: usize, letters: &[u8]) -> Result<Self> {
        let mut w = Self::root(dim);
        for &l in letters {
            if (l as usize) >= (1 << dim) {
                return Err(Error::Input(format!("letter {l} out of range for d={dim}")));
            }
            w = w.checked_child(l)?;
        }
        Ok(w)
    }

    /// Word whose depth-`depth` cube has integer corner `corner`.
    pub fn from_corner(dim: usize, depth: usize, corner: &[u64]) -> Result<Self> {
        let mut letters = Vec::with_capacity(depth);
        for t in 0..depth {
            let shift = depth - 1 - t;
            let mut letter = 0u8;
            for (j, &c) in corner.iter().enumerate() {
                if c >> depth != 0 {
                    return Err(Error::Input(format!("corner {c} outside depth {depth}")));
                }
                letter |= (((c >> shift) & 1) as u8) << (dim - 1 - j);
            }
            letters.push(letter);
        }
        Self::from_letters(dim, &letters)
    }

    pub fn max_depth(dim: usize) -> usize {
        64 / dim
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn depth(&self) -> usize {
        self.depth as usize
    }

    pub fn code(&self) -> u64 {
        self.code
    }

    fn checked_child(self, letter: u8) -> Result<Self> {
        if self.depth() + 1 > Self::max_depth(self.dim()) {
            return Err(Error::Budget(format!(
                "dyadic word depth {} exceeds packing limit for d={}",
                self.depth() + 1,
                self.dim
            )));
        }
        Ok(self.child(letter))
    }

    #[inline]
    pub fn child(self, letter: u8) -> Self {
        debug_assert!((letter as usize) < (1 << self.dim));
        DyadicWord {
            dim: self.dim,
            depth: self.depth + 1,
            code: (self.code << self.dim) | letter as u64,
        }
    }

    /// All `2^d` children in letter order.
    pub fn children(self) -> impl Iterator<Item = DyadicWord> {
        (0..(1u8 << self.dim)).map(move |l| self.child(l))
    }

    pub fn parent(self) -> Option<Self> {
        (self.depth > 0).then(|| DyadicWord {
            dim: self.dim,
            depth: self.depth - 1,
            code: self.code >> self.dim,
        })
    }

    pub fn ancestor(self, depth: usize) -> Option<Self> {
        (depth <= self.depth()).then(|| DyadicWord {
            dim: self.dim,
            depth: depth as u8,
            code: self.code >> (self.dim as usize * (self.depth() - depth)),
        })
    }

    pub fn is_ancestor_of(self, other: DyadicWord) -> bool {
        other.ancestor(self.depth()) == Some(self)
    }

    pub fn letter(self, t: usize) -> u8 {
        let shift = self.dim as usize * (self.depth() - 1 - t);
        ((self.code >> shift) & ((1 << self.dim) - 1)) as u8
    }

    pub fn letters(self) -> Vec<u8> {
        (0..self.depth()).map(|t| self.letter(t)).collect()
    }

    /// Integer corner `c` of the cube `prod [c_j 2^-n, (c_j + 1) 2^-n]`.
    pub fn corner(self) -> [u64; MAX_DIM] {
        let d = self.dim();
        let mut c = [0u64; MAX_DIM];
        for t in 0..self.depth() {
            let l = self.letter(t);
            for (j, cj) in c.iter_mut().enumerate().take(d) {
                *cj = (*cj << 1) | ((l >> (d - 1 - j)) & 1) as u64;
            }
        }
        c
    }
}

impl fmt::Debug for DyadicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Letters printed one-based, e.g. `S[1.4.2]`; the root prints as `S[]`.
impl fmt::Display for DyadicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letters: Vec<String> = self.letters().iter().map(|l| (l + 1).to_string()).collect();
        write!(f, "S[{}]", letters.join("."))
    }
}

impl Serialize for DyadicWord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A dyadic cube of the unit box, open or closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub word: DyadicWord,
    pub closed: bool,
}

/// Inclusive lattice coordinate range per axis; empty when `lo > hi`.
pub type VertexRanges = [(usize, usize); MAX_DIM];

impl Cell {
    pub fn open(word: DyadicWord) -> Self {
        Cell {
            word,
            closed: false,
        }
    }

    pub fn closed(word: DyadicWord) -> Self {
        Cell { word, closed: true }
    }

    pub fn dim(&self) -> usize {
        self.word.dim()
    }

    pub fn depth(&self) -> usize {
        self.word.depth()
    }

    pub fn side(&self) -> f64 {
        (-(self.depth() as f64)).exp2()
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim() as i32)
    }

    pub fn diameter(&self) -> f64 {
        self.side() * (self.dim() as f64).sqrt()
    }

    pub fn lower(&self) -> Vec<f64> {
        let c = self.word.corner();
        (0..self.dim()).map(|j| c[j] as f64 * self.side()).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        let c = self.word.corner();
        (0..self.dim())
            .map(|j| (c[j] + 1) as f64 * self.side())
            .collect()
    }

    /// Lattice side of the cell in mesh units.
    pub fn lattice_side(&self, dom: &LatticeDomain) -> Result<usize> {
        let m = dom.side();
        if (1usize << self.depth()) > m {
            return Err(Error::Resolution(format!(
                "depth {} cells are finer than the lattice (m = {m})",
                self.depth()
            )));
        }
        Ok(m >> self.depth())
    }

    /// Lattice coordinates of the cell's bounding faces, per axis.
    pub fn lattice_bounds(&self, dom: &LatticeDomain) -> Result<[(usize, usize); MAX_DIM]> {
        let side = self.lattice_side(dom)?;
        let c = self.word.corner();
        let mut b = [(0, 0); MAX_DIM];
        for j in 0..self.dim() {
            b[j] = (c[j] as usize * side, (c[j] as usize + 1) * side);
        }
        Ok(b)
    }

    /// Interior lattice vertices of the cell. Vertices on faces belong to the
    /// face, so an open cell keeps only strictly inner vertices; a closed
    /// cell keeps its faces except those on the boundary of the domain.
    pub fn vertex_ranges(&self, dom: &LatticeDomain) -> Result<VertexRanges> {
        let bounds = self.lattice_bounds(dom)?;
        let m = dom.side();
        let mut r = [(1, 0); MAX_DIM];
        for j in 0..self.dim() {
            let (lo, hi) = bounds[j];
            r[j] = if self.closed {
                (lo.max(1), hi.min(m - 1))
            } else {
                (lo + 1, hi - 1)
            };
        }
        Ok(r)
    }

    pub fn vertex_count(&self, dom: &LatticeDomain) -> Result<usize> {
        let r = self.vertex_ranges(dom)?;
        Ok((0..self.dim())
            .map(|j| (r[j].1 + 1).saturating_sub(r[j].0))
            .product())
    }
}

/// `children` as a free function: the `2^d` subcells of `w`.
pub fn children(w: DyadicWord) -> Vec<DyadicWord> {
    w.children().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_children_tile_the_square() {
        let kids = children(DyadicWord::root(2));
        assert_eq!(kids.len(), 4);
        let total: f64 = kids.iter().map(|w| Cell::open(*w).volume()).sum();
        assert_eq!(total, 1.0);
        let corners: Vec<[u64; 2]> = kids
            .iter()
            .map(|w| {
                let c = w.corner();
                [c[0], c[1]]
            })
            .collect();
        assert_eq!(corners, vec![[0, 0], [0, 1], [1, 0], [1, 1]]);
    }

    #[test]
    fn children_halve_the_side() {
        let w = DyadicWord::from_letters(3, &[5, 2, 7]).unwrap();
        let parent = Cell::open(w);
        let kids = children(w);
        assert_eq!(kids.len(), 8);
        let vol: f64 = kids.iter().map(|k| Cell::open(*k).volume()).sum();
        assert_eq!(vol, parent.volume());
        for k in kids {
            assert_eq!(Cell::open(k).side(), 2f64.powi(-4));
            assert_eq!(k.parent(), Some(w));
        }
    }

    #[test]
    fn corner_round_trip_and_display() {
        let w = DyadicWord::from_letters(2, &[3, 0, 2]).unwrap();
        let c = w.corner();
        assert_eq!((c[0], c[1]), (0b101, 0b100));
        assert_eq!(DyadicWord::from_corner(2, 3, &[5, 4]).unwrap(), w);
        assert_eq!(w.to_string(), "S[4.1.3]");
        assert_eq!(DyadicWord::root(2).to_string(), "S[]");
        assert!(w.ancestor(1).unwrap().is_ancestor_of(w));
    }

    #[test]
    fn depth_limit_is_enforced() {
        let letters = vec![0u8; 33];
        assert!(matches!(
            DyadicWord::from_letters(2, &letters),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn open_and_closed_vertex_ranges() {
        let dom = LatticeDomain::new(2, 8).unwrap();
        let w = DyadicWord::from_letters(2, &[0]).unwrap();
        assert_eq!(
            Cell::open(w).vertex_ranges(&dom).unwrap()[..2],
            [(1, 3), (1, 3)]
        );
        assert_eq!(
            Cell::closed(w).vertex_ranges(&dom).unwrap()[..2],
            [(1, 4), (1, 4)]
        );
        assert_eq!(Cell::open(w).vertex_count(&dom).unwrap(), 9);
        let deep = DyadicWord::from_letters(2, &[0, 0, 0, 0]).unwrap();
        assert!(matches!(
            Cell::open(deep).lattice_side(&dom),
            Err(Error::Resolution(_))
        ));
    }
}
