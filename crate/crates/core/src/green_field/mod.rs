//! Discrete Dirichlet Green's operator on the unit box and exact sampling of
//! the lattice Gaussian free field.
//!
//! The lattice has `m` intervals per side and `(m - 1)^d` interior vertices.
//! With `L` the unscaled graph Laplacian (`2d` on the diagonal, `-1` between
//! neighbours), the Green kernel is `G(x, y) = h^(2-d) (L^-1)(x, y)` with
//! `h = 1/m`, which converges to the continuum Dirichlet Green's function of
//! `-Delta`. Pairings carry quadrature weight `h^d`:
//! `(Gamma, f) = h^d sum_x Gamma(x) f(x)`.

mod checks;
mod restricted;

pub use checks::{centre_cell, centre_cell_variances, scaling_check, ScalingPair};
pub use restricted::{
    markov_decompose, polar_defect, HarmonicDecomposition, RestrictedGreens, VertexSet,
};

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dyadic::{Cell, VertexRanges, MAX_DIM};
use crate::error::{Error, Result};
use crate::rng::{tag, StreamKey};
use crate::sine::SineTransform;

/// The unit hypercube `(0,1)^d` discretized with `m` intervals per side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LatticeDomain {
    dim: usize,
    side: usize,
}

impl LatticeDomain {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::Config(format!(
                "dimension {dim} not supported (2..=4)"
            )));
        }
        if side < 2 || !side.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid side {side} must be a power of two >= 2"
            )));
        }
        Ok(LatticeDomain { dim, side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Intervals per side `m`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn mesh(&self) -> f64 {
        1.0 / self.side as f64
    }

    /// Interior vertices per side, `m - 1`.
    pub fn interior_side(&self) -> usize {
        self.side - 1
    }

    /// Number of interior vertices.
    pub fn len(&self) -> usize {
        self.interior_side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d` of one vertex.
    pub fn vertex_volume(&self) -> f64 {
        self.mesh().powi(self.dim as i32)
    }

    /// Deepest dyadic level whose cells are at least `min_cells` mesh widths wide.
    pub fn max_level(&self, min_cells: usize) -> usize {
        let mut n = 0;
        while (self.side >> (n + 1)) >= min_cells && (self.side >> (n + 1)) > 0 {
            n += 1;
        }
        n
    }

    /// Flat index of an interior vertex given lattice coordinates in `1..m`.
    #[inline]
    pub fn index(&self, coords: &[usize]) -> usize {
        let n = self.interior_side();
        coords[..self.dim]
            .iter()
            .fold(0, |acc, &c| acc * n + (c - 1))
    }

    /// Lattice coordinates (in `1..m`) of a flat interior index.
    #[inline]
    pub fn coords(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let n = self.interior_side();
        let mut c = [0; MAX_DIM];
        for j in (0..self.dim).rev() {
            c[j] = idx % n + 1;
            idx /= n;
        }
        c
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let c = self.coords(idx);
        (0..self.dim).map(|j| c[j] as f64 * self.mesh()).collect()
    }

    /// Interior vertex nearest to `x`, if `x` rounds to an interior vertex.
    pub fn nearest_vertex(&self, x: &[f64]) -> Option<usize> {
        let mut c = [0; MAX_DIM];
        for j in 0..self.dim {
            let r = (x[j] * self.side as f64).round();
            if r < 1.0 || r > (self.side - 1) as f64 {
                return None;
            }
            c[j] = r as usize;
        }
        Some(self.index(&c))
    }

    /// Calls `f(flat index)` for every vertex in the inclusive box `ranges`.
    pub fn for_each_in(&self, ranges: &VertexRanges, mut f: impl FnMut(usize)) {
        let d = self.dim;
        if (0..d).any(|j| ranges[j].0 > ranges[j].1) {
            return;
        }
        let mut c = [0; MAX_DIM];
        for j in 0..d {
            c[j] = ranges[j].0;
        }
        loop {
            let base = self.index(&c);
            let run = ranges[d - 1].1 - ranges[d - 1].0 + 1;
            for t in 0..run {
                f(base + t);
            }
            let mut j = d - 1;
            loop {
                if j == 0 {
                    return;
                }
                j -= 1;
                c[j] += 1;
                if c[j] <= ranges[j].1 {
                    break;
                }
                c[j] = ranges[j].0;
            }
        }
    }

    /// Indicator weight (1 on the box, 0 elsewhere) over interior vertices.
    pub fn indicator(&self, ranges: &VertexRanges) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        self.for_each_in(ranges, |i| w[i] = 1.0);
        w
    }
}

/// `phi_d(x)`: `(1/2pi) log(1/|x|)` for `d = 2`, `1/(c_d |x|^(d-2))` for
/// `d >= 3` with `c_d` the area of the unit sphere in `R^d`.
pub fn free_space_kernel(x: &[f64]) -> Result<f64> {
    let d = x.len();
    if d < 2 {
        return Err(Error::Domain(format!("kernel needs d >= 2, got {d}")));
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::Domain("kernel is singular at the origin".into()));
    }
    if d == 2 {
        Ok((1.0 / r).ln() / (2.0 * PI))
    } else {
        Ok(1.0 / (sphere_area(d) * r.powi(d as i32 - 2)))
    }
}

/// Surface area of the unit `(d-1)`-sphere, `2 pi^(d/2) / Gamma(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * PI.powf(half) / statrs::function::gamma::gamma(half)
}

/// Spectral representation of `G_D` on a [`LatticeDomain`].
#[derive(Debug)]
pub struct GreensOperator {
    domain: LatticeDomain,
    /// `mu_k = 4 sin^2(pi k / 2m)`, `k = 1..m-1`.
    eigen: Vec<f64>,
    transform: SineTransform,
    /// Prefix sums of `sin(pi k i / m)` over `i`, built on first use.
    prefix: OnceLock<Vec<f64>>,
}

impl GreensOperator {
    pub fn build(domain: LatticeDomain) -> Result<Self> {
        let m = domain.side();
        if m < 4 {
            return Err(Error::Config(format!(
                "grid side {m} too small, need m >= 4"
            )));
        }
        let eigen = (1..m)
            .map(|k| 4.0 * (PI * k as f64 / (2.0 * m as f64)).sin().powi(2))
            .collect();
        Ok(GreensOperator {
            domain,
            eigen,
            transform: SineTransform::new(m),
            prefix: OnceLock::new(),
        })
    }

    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    /// `h^(2-d)`: converts unscaled lattice Green values to continuum units.
    pub fn kernel_scale(&self) -> f64 {
        self.domain.mesh().powi(2 - self.domain.dim() as i32)
    }

    /// Eigenvalue of `-Delta_h` (continuum units) for a zero-based mode index.
    pub fn eigenvalue(&self, mode: &[usize]) -> f64 {
        let h = self.domain.mesh();
        mode.iter().map(|&k| self.eigen[k]).sum::<f64>() / (h * h)
    }

    /// `data[k] <- data[k] * f(mu_k)` over all modes.
    fn scale_modes(&self, data: &mut [f64], f: impl Fn(f64) -> f64) {
        let n = self.domain.interior_side();
        let d = self.domain.dim();
        let outer = n.pow(d as u32 - 1);
        for o in 0..outer {
            let mut rest = o;
            let mut partial = 0.0;
            for _ in 0..d - 1 {
                partial += self.eigen[rest % n];
                rest /= n;
            }
            let row = &mut data[o * n..(o + 1) * n];
            for (v, &mu) in row.iter_mut().zip(&self.eigen) {
                *v *= f(partial + mu);
            }
        }
    }

    /// `(G w)(x) = sum_y G(x, y) w(y)`, in `O(N log N)`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.domain.len());
        let d = self.domain.dim() as i32;
        let m = self.domain.side() as f64;
        let mut data = w.to_vec();
        self.transform.transform(&mut data, d as usize);
        self.scale_modes(&mut data, |mu| 1.0 / mu);
        self.transform.transform(&mut data, d as usize);
        let scale = (2.0 / m).powi(d) * self.kernel_scale();
        data.iter_mut().for_each(|v| *v *= scale);
        data
    }

    /// Point evaluation `G(x, y)` for flat vertex indices, by mode summation.
    pub fn entry(&self, x: usize, y: usize) -> f64 {
        let d = self.domain.dim();
        let m = self.domain.side();
        let cx = self.domain.coords(x);
        let cy = self.domain.coords(y);
        let factors: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                (1..m)
                    .map(|k| {
                        let a = PI * k as f64 / m as f64;
                        (2.0 / m as f64) * (a * cx[j] as f64).sin() * (a * cy[j] as f64).sin()
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = factors.iter().map(|v| v.as_slice()).collect();
        mode_sum(&refs, &self.eigen) * self.kernel_scale()
    }

    /// `Cov((Gamma, f), (Gamma, g)) = h^(2d) f^T G g`.
    pub fn covariance(&self, f: &[f64], g: &[f64]) -> f64 {
        let gg = self.apply(g);
        let s: Vec<f64> = f.iter().zip(&gg).map(|(a, b)| a * b).collect();
        crate::stats::pairwise_sum(&s) * self.domain.vertex_volume().powi(2)
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        self.covariance(f, f)
    }

    /// `h^d * sum_x G(x, x)`, the integrated diagonal.
    pub fn integrated_trace(&self) -> f64 {
        let mut ones = vec![1.0; self.domain.len()];
        self.scale_modes(&mut ones, |mu| 1.0 / mu);
        crate::stats::pairwise_sum(&ones) * self.kernel_scale() * self.domain.vertex_volume()
    }

    fn prefix(&self) -> &[f64] {
        self.prefix.get_or_init(|| {
            let m = self.domain.side();
            let mut table = vec![0.0; (m - 1) * m];
            for k in 1..m {
                let row = &mut table[(k - 1) * m..k * m];
                let mut acc = 0.0;
                for (i, slot) in row.iter_mut().enumerate().skip(1) {
                    acc += (PI * (k * i) as f64 / m as f64).sin();
                    *slot = acc;
                }
            }
            table
        })
    }

    /// `sum_{i=lo..=hi} sin(pi k i / m)` for every mode `k`.
    fn range_factor(&self, lo: usize, hi: usize) -> Vec<f64> {
        let m = self.domain.side();
        if lo > hi {
            return vec![0.0; m - 1];
        }
        let p = self.prefix();
        (1..m)
            .map(|k| {
                let row = &p[(k - 1) * m..k * m];
                row[hi] - row[lo - 1]
            })
            .collect()
    }

    /// Exact `h^(2d) sum_{x in a, y in b} G(x, y)` for two vertex boxes.
    pub fn box_covariance(&self, a: &VertexRanges, b: &VertexRanges) -> f64 {
        let d = self.domain.dim();
        let m = self.domain.side() as f64;
        let factors: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                let fa = self.range_factor(a[j].0, a[j].1);
                let fb = self.range_factor(b[j].0, b[j].1);
                fa.iter().zip(&fb).map(|(x, y)| (2.0 / m) * x * y).collect()
            })
            .collect();
        let refs: Vec<&[f64]> = factors.iter().map(|v| v.as_slice()).collect();
        mode_sum(&refs, &self.eigen) * self.kernel_scale() * self.domain.vertex_volume().powi(2)
    }

    /// Draw one exact sample of the lattice GFF for `key`.
    pub fn sample(&self, key: StreamKey) -> FieldSample {
        let d = self.domain.dim() as i32;
        let m = self.domain.side() as f64;
        let mut stream = key.derive(tag::FIELD).stream();
        let mut data: Vec<f64> = (0..self.domain.len())
            .map(|_| stream.sample::<f64, _>(StandardNormal))
            .collect();
        self.scale_modes(&mut data, |mu| 1.0 / mu.sqrt());
        self.transform.transform(&mut data, d as usize);
        let scale = (2.0 / m).powf(d as f64 / 2.0) * self.kernel_scale().sqrt();
        data.iter_mut().for_each(|v| *v *= scale);
        FieldSample {
            domain: self.domain,
            values: data,
            key: Some(key),
        }
    }
}

/// `sum_k prod_j f_j(k_j) / sum_j mu(k_j)` over all multi-indices.
fn mode_sum(factors: &[&[f64]], eigen: &[f64]) -> f64 {
    fn rec(factors: &[&[f64]], eigen: &[f64], prod: f64, lam: f64) -> f64 {
        let (first, rest) = factors.split_first().expect("at least one axis");
        if rest.is_empty() {
            return first
                .iter()
                .zip(eigen)
                .map(|(f, mu)| prod * f / (lam + mu))
                .sum();
        }
        let mut acc = 0.0;
        for (f, mu) in first.iter().zip(eigen) {
            if *f != 0.0 {
                acc += rec(rest, eigen, prod * f, lam + mu);
            }
        }
        acc
    }
    rec(factors, eigen, 1.0, 0.0)
}

/// `sample_gff` under its descriptive name.
pub fn sample_gff(op: &GreensOperator, key: StreamKey) -> FieldSample {
    op.sample(key)
}

/// One realization of the lattice GFF on interior vertices. Boundary values
/// are implicitly zero.
#[derive(Clone, Debug)]
pub struct FieldSample {
    domain: LatticeDomain,
    values: Vec<f64>,
    key: Option<StreamKey>,
}

impl FieldSample {
    pub fn zeros(domain: LatticeDomain) -> Self {
        FieldSample {
            domain,
            values: vec![0.0; domain.len()],
            key: None,
        }
    }

    pub fn from_values(domain: LatticeDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::Input(format!(
                "field has {} values, domain has {} interior vertices",
                values.len(),
                domain.len()
            )));
        }
        Ok(FieldSample {
            domain,
            values,
            key: None,
        })
    }

    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn key(&self) -> Option<StreamKey> {
        self.key
    }

    /// Value at lattice coordinates in `0..=m`; boundary vertices are zero.
    #[inline]
    pub fn at(&self, coords: &[usize]) -> f64 {
        let m = self.domain.side();
        if coords[..self.domain.dim()]
            .iter()
            .any(|&c| c == 0 || c >= m)
        {
            0.0
        } else {
            self.values[self.domain.index(coords)]
        }
    }

    /// `h^d` times the sum of field values over a vertex box.
    pub fn box_mass(&self, ranges: &VertexRanges) -> f64 {
        let mut acc = 0.0;
        self.domain.for_each_in(ranges, |i| acc += self.values[i]);
        acc * self.domain.vertex_volume()
    }

    /// `(Gamma, 1_c)` for a cell.
    pub fn cell_pairing(&self, cell: &Cell) -> Result<f64> {
        Ok(self.box_mass(&cell.vertex_ranges(&self.domain)?))
    }

    /// `(Gamma, 1_s)` for every open depth-`n` cell, in one pass, indexed
    /// row-major by the integer cell corner.
    pub fn open_cell_masses(&self, n: usize) -> Result<Vec<f64>> {
        let m = self.domain.side();
        let d = self.domain.dim();
        if n >= usize::BITS as usize || (1usize << n) > m {
            return Err(Error::Resolution(format!(
                "depth {n} cells are finer than the lattice (m = {m})"
            )));
        }
        let side = m >> n;
        let per_axis = 1usize << n;
        let mut out = vec![0.0; per_axis.pow(d as u32)];
        if side < 2 {
            return Ok(out);
        }
        let mut c = [1usize; MAX_DIM];
        for &v in &self.values {
            if c[..d].iter().all(|&x| x % side != 0) {
                let cell = c[..d].iter().fold(0, |acc, &x| acc * per_axis + x / side);
                out[cell] += v;
            }
            let mut j = d;
            while j > 0 {
                j -= 1;
                c[j] += 1;
                if c[j] < m {
                    break;
                }
                c[j] = 1;
            }
        }
        let w = self.domain.vertex_volume();
        out.iter_mut().for_each(|x| *x *= w);
        Ok(out)
    }
}

/// `(Gamma, f) = h^d sum_x Gamma(x) f(x)`.
///
/// `weight` is either indexed by interior vertices, or by the full
/// `(m+1)^d` grid including the boundary, in which case boundary entries
/// must vanish.
pub fn pair(field: &FieldSample, weight: &[f64]) -> Result<f64> {
    let dom = field.domain;
    let interior = if weight.len() == dom.len() {
        std::borrow::Cow::Borrowed(weight)
    } else if weight.len() == (dom.side() + 1).pow(dom.dim() as u32) {
        std::borrow::Cow::Owned(strip_boundary(&dom, weight)?)
    } else {
        return Err(Error::Input(format!(
            "weight length {} matches neither interior nor full grid",
            weight.len()
        )));
    };
    let prods: Vec<f64> = field
        .values
        .iter()
        .zip(interior.iter())
        .map(|(a, b)| a * b)
        .collect();
    Ok(crate::stats::pairwise_sum(&prods) * dom.vertex_volume())
}

fn strip_boundary(dom: &LatticeDomain, full: &[f64]) -> Result<Vec<f64>> {
    let m = dom.side();
    let d = dom.dim();
    let mut out = vec![0.0; dom.len()];
    let mut c = [0usize; MAX_DIM];
    for (flat, &v) in full.iter().enumerate() {
        let mut rest = flat;
        for j in (0..d).rev() {
            c[j] = rest % (m + 1);
            rest /= m + 1;
        }
        let on_boundary = c[..d].iter().any(|&x| x == 0 || x == m);
        if on_boundary {
            if v != 0.0 {
                return Err(Error::Input(format!(
                    "weight {v} on boundary vertex {:?}",
                    &c[..d]
                )));
            }
        } else {
            out[dom.index(&c)] = v;
        }
    }
    Ok(out)
}

/// Exact `G_D(c, c') = h^(2d) sum_{x in c, y in c'} G(x, y)`.
pub fn cell_variance(op: &GreensOperator, c: &Cell, c2: &Cell) -> Result<f64> {
    let dom = op.domain();
    Ok(op.box_covariance(&c.vertex_ranges(dom)?, &c2.vertex_ranges(dom)?))
}
