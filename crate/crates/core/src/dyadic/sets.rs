//! Closed subsets of the closed unit box, either as exact geometric
//! primitives or as lattice rasterizations.

use std::fmt;

use crate::error::{Error, Result};
use crate::green_field::LatticeDomain;

use super::MAX_DIM;

const EPS: f64 = 1e-12;

/// Vertices of the closed grid `{0, .., m}^d` belonging to a set.
#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    dim: usize,
    side: usize,
    bits: Vec<bool>,
}

impl fmt::Debug for Raster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on = self.bits.iter().filter(|&&b| b).count();
        write!(
            f,
            "Raster(d={}, m={}, {} vertices)",
            self.dim, self.side, on
        )
    }
}

impl Raster {
    pub fn empty(dom: &LatticeDomain) -> Self {
        Raster {
            dim: dom.dim(),
            side: dom.side(),
            bits: vec![false; (dom.side() + 1).pow(dom.dim() as u32)],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    fn flat(&self, c: &[usize]) -> usize {
        c[..self.dim]
            .iter()
            .fold(0, |acc, &x| acc * (self.side + 1) + x)
    }

    fn unflat(&self, mut i: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        for j in (0..self.dim).rev() {
            c[j] = i % (self.side + 1);
            i /= self.side + 1;
        }
        c
    }

    pub fn set(&mut self, c: &[usize], on: bool) {
        let i = self.flat(c);
        self.bits[i] = on;
    }

    pub fn get(&self, c: &[usize]) -> bool {
        self.bits[self.flat(c)]
    }

    /// Coordinates of the member vertices, in `[0,1]^d`.
    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let h = 1.0 / self.side as f64;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| {
                let c = self.unflat(i);
                (0..self.dim).map(|j| c[j] as f64 * h).collect()
            })
    }

    fn intersects_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        let m = self.side as f64;
        let mut r = [(0usize, 0usize); MAX_DIM];
        for j in 0..self.dim {
            let a = (lo[j] * m - EPS).ceil().max(0.0) as usize;
            let b = (hi[j] * m + EPS).floor().min(m) as usize;
            if a > b {
                return false;
            }
            r[j] = (a, b);
        }
        let mut c = [0; MAX_DIM];
        for j in 0..self.dim {
            c[j] = r[j].0;
        }
        loop {
            if self.get(&c) {
                return true;
            }
            let mut j = self.dim;
            loop {
                if j == 0 {
                    return false;
                }
                j -= 1;
                c[j] += 1;
                if c[j] <= r[j].1 {
                    break;
                }
                c[j] = r[j].0;
            }
        }
    }
}

/// A closed set in `[0,1]^d`.
#[derive(Clone, Debug)]
pub enum Shape {
    Empty,
    /// The whole closed domain.
    Domain(usize),
    Point(Vec<f64>),
    Segment(Vec<f64>, Vec<f64>),
    /// Closed axis-aligned box `[lo, hi]`.
    Box(Vec<f64>, Vec<f64>),
    Union(Vec<Shape>),
    Raster(Raster),
}

impl Shape {
    pub fn point(x: &[f64]) -> Self {
        Shape::Point(x.to_vec())
    }

    pub fn segment(a: &[f64], b: &[f64]) -> Self {
        Shape::Segment(a.to_vec(), b.to_vec())
    }

    pub fn cuboid(lo: &[f64], hi: &[f64]) -> Self {
        Shape::Box(lo.to_vec(), hi.to_vec())
    }

    pub fn union(parts: Vec<Shape>) -> Self {
        Shape::Union(parts)
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Shape::Empty => None,
            Shape::Domain(d) => Some(*d),
            Shape::Point(x) | Shape::Segment(x, _) | Shape::Box(x, _) => Some(x.len()),
            Shape::Union(parts) => parts.iter().find_map(Shape::dim),
            Shape::Raster(r) => Some(r.dim),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Shape::Empty => true,
            Shape::Union(parts) => parts.iter().all(Shape::is_empty),
            Shape::Raster(r) => r.is_empty(),
            Shape::Box(lo, hi) => lo.iter().zip(hi).any(|(a, b)| a > b),
            _ => false,
        }
    }

    /// Whether the set meets the closed box `[lo, hi]`.
    pub fn intersects_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        match self {
            Shape::Empty => false,
            Shape::Domain(_) => lo
                .iter()
                .zip(hi)
                .all(|(a, b)| *a <= 1.0 + EPS && *b >= -EPS && a <= b),
            Shape::Point(x) => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *v >= a - EPS && *v <= b + EPS),
            Shape::Segment(a, b) => segment_meets_box(a, b, lo, hi),
            Shape::Box(a, b) => {
                (0..a.len()).all(|j| a[j] <= hi[j] + EPS && b[j] >= lo[j] - EPS && a[j] <= b[j])
            }
            Shape::Union(parts) => parts.iter().any(|p| p.intersects_box(lo, hi)),
            Shape::Raster(r) => r.intersects_box(lo, hi),
        }
    }

    /// Euclidean distance from `x` to the set; infinite for the empty set.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Empty => f64::INFINITY,
            Shape::Domain(_) => box_distance(&vec![0.0; x.len()], &vec![1.0; x.len()], x),
            Shape::Point(p) => norm(p.iter().zip(x).map(|(a, b)| a - b)),
            Shape::Segment(a, b) => segment_distance(a, b, x),
            Shape::Box(lo, hi) => {
                if lo.iter().zip(hi).any(|(a, b)| a > b) {
                    f64::INFINITY
                } else {
                    box_distance(lo, hi, x)
                }
            }
            Shape::Union(parts) => parts
                .iter()
                .map(|p| p.distance(x))
                .fold(f64::INFINITY, f64::min),
            Shape::Raster(r) => r
                .points()
                .map(|p| norm(p.iter().zip(x).map(|(a, b)| a - b)))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Closed-grid vertices within half a mesh width (sup norm) of the set.
    pub fn rasterize(&self, dom: &LatticeDomain) -> Raster {
        let mut r = Raster::empty(dom);
        if let Shape::Raster(src) = self {
            if src.side == dom.side() {
                return src.clone();
            }
        }
        let h = dom.mesh();
        let n = r.bits.len();
        for i in 0..n {
            let c = r.unflat(i);
            let lo: Vec<f64> = (0..dom.dim()).map(|j| (c[j] as f64 - 0.5) * h).collect();
            let hi: Vec<f64> = (0..dom.dim()).map(|j| (c[j] as f64 + 0.5) * h).collect();
            let half_open_hi: Vec<f64> = hi.iter().map(|v| v - 2.0 * EPS).collect();
            if self.intersects_box(&lo, &half_open_hi) {
                r.bits[i] = true;
            }
        }
        r
    }

    /// Parse the declarative set format: one primitive per line,
    /// `kind=point at=x,y`, `kind=segment from=x,y to=x,y`,
    /// `kind=box lo=x,y hi=x,y`, `kind=domain dim=d`, or `kind=empty`.
    /// Several primitives form their union; a `kind=union` line is accepted
    /// as a no-op header. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Shape> {
        let mut parts = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut kind = None;
            let mut fields = std::collections::BTreeMap::new();
            for tok in line.split_whitespace() {
                let (k, v) = tok.split_once('=').ok_or_else(|| {
                    Error::Input(format!(
                        "line {}: expected key=value, got {tok:?}",
                        lineno + 1
                    ))
                })?;
                if k == "kind" {
                    kind = Some(v.to_string());
                } else {
                    fields.insert(k.to_string(), v.to_string());
                }
            }
            let coords = |key: &str| -> Result<Vec<f64>> {
                let v = fields
                    .get(key)
                    .ok_or_else(|| Error::Input(format!("line {}: missing {key}", lineno + 1)))?;
                let xs = v
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Input(format!("line {}: {key}: {e}", lineno + 1)))?;
                if xs.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::Input(format!(
                        "line {}: {key} outside [0,1]",
                        lineno + 1
                    )));
                }
                Ok(xs)
            };
            let shape = match kind.as_deref() {
                Some("union") => continue,
                Some("empty") => Shape::Empty,
                Some("point") => Shape::Point(coords("at")?),
                Some("segment") => Shape::Segment(coords("from")?, coords("to")?),
                Some("box") => Shape::Box(coords("lo")?, coords("hi")?),
                Some("domain") => {
                    let d = fields
                        .get("dim")
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| {
                            Error::Input(format!("line {}: domain needs dim=", lineno + 1))
                        })?;
                    Shape::Domain(d)
                }
                Some(other) => {
                    return Err(Error::Input(format!(
                        "line {}: unknown kind {other:?}",
                        lineno + 1
                    )))
                }
                None => return Err(Error::Input(format!("line {}: missing kind", lineno + 1))),
            };
            parts.push(shape);
        }
        let dims: Vec<usize> = parts.iter().filter_map(Shape::dim).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Input("set primitives mix dimensions".into()));
        }
        Ok(match parts.len() {
            0 => Shape::Empty,
            1 => parts.pop().unwrap(),
            _ => Shape::Union(parts),
        })
    }
}

fn norm(it: impl Iterator<Item = f64>) -> f64 {
    it.map(|v| v * v).sum::<f64>().sqrt()
}

fn box_distance(lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    norm((0..x.len()).map(|j| (lo[j] - x[j]).max(0.0).max(x[j] - hi[j])))
}

fn segment_distance(a: &[f64], b: &[f64], x: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (ab.iter()
            .zip(a.iter().zip(x))
            .map(|(d, (p, q))| d * (q - p))
            .sum::<f64>()
            / len2)
            .clamp(0.0, 1.0)
    };
    norm((0..x.len()).map(|j| a[j] + t * ab[j] - x[j]))
}

/// Liang-Barsky clipping of the segment `a + t (b - a)`, `t in [0,1]`.
fn segment_meets_box(a: &[f64], b: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for j in 0..a.len() {
        let d = b[j] - a[j];
        let (l, h) = (lo[j] - EPS, hi[j] + EPS);
        if d.abs() < 1e-300 {
            if a[j] < l || a[j] > h {
                return false;
            }
            continue;
        }
        let (mut ta, mut tb) = ((l - a[j]) / d, (h - a[j]) / d);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}
