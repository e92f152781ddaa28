//! Type-I discrete sine transform on hypercubic arrays.
//!
//! For a grid with `m` intervals per side the interior has `n = m - 1`
//! points and the transform is `X_k = sum_j x_j sin(pi j k / m)`. Applying it
//! twice returns `m / 2` times the input. Lines are transformed two at a time
//! through one complex FFT of length `2m` of the odd extension.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub struct SineTransform {
    intervals: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SineTransform")
            .field("intervals", &self.intervals)
            .finish()
    }
}

impl SineTransform {
    pub fn new(intervals: usize) -> Self {
        assert!(
            intervals >= 2,
            "sine transform needs at least one interior point"
        );
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * intervals);
        SineTransform { intervals, fft }
    }

    /// Number of interior points per line.
    pub fn len(&self) -> usize {
        self.intervals - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Transform two lines in place.
    fn pair(
        &self,
        a: &mut [f64],
        b: &mut [f64],
        buf: &mut [Complex<f64>],
        scratch: &mut [Complex<f64>],
    ) {
        let m = self.intervals;
        let n = m - 1;
        buf[0] = Complex::new(0.0, 0.0);
        buf[m] = Complex::new(0.0, 0.0);
        for j in 1..=n {
            let z = Complex::new(a[j - 1], b[j - 1]);
            buf[j] = z;
            buf[2 * m - j] = -z;
        }
        self.fft.process_with_scratch(buf, scratch);
        for k in 1..=n {
            let zk = buf[k];
            let zr = buf[2 * m - k];
            a[k - 1] = -(zk.im - zr.im) * 0.25;
            b[k - 1] = (zk.re - zr.re) * 0.25;
        }
    }

    /// Transform a single line in place.
    pub fn line(&self, a: &mut [f64]) {
        let mut b = vec![0.0; a.len()];
        let (mut buf, mut scratch) = self.buffers();
        self.pair(a, &mut b, &mut buf, &mut scratch);
    }

    fn buffers(&self) -> (Vec<Complex<f64>>, Vec<Complex<f64>>) {
        (
            vec![Complex::new(0.0, 0.0); 2 * self.intervals],
            vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()],
        )
    }

    /// Transform a `len()^dim` row-major array along every axis.
    pub fn transform(&self, data: &mut [f64], dim: usize) {
        let n = self.len();
        assert_eq!(data.len(), n.pow(dim as u32));
        for axis in 0..dim {
            self.transform_axis(data, dim, axis);
        }
    }

    fn transform_axis(&self, data: &mut [f64], dim: usize, axis: usize) {
        let n = self.len();
        let stride = n.pow((dim - 1 - axis) as u32);
        let lines = n.pow((dim - 1) as u32);
        let (mut buf, mut scratch) = self.buffers();
        let mut la = vec![0.0; n];
        let mut lb = vec![0.0; n];
        let base = |l: usize| (l / stride) * stride * n + l % stride;
        let mut l = 0;
        while l < lines {
            let ba = base(l);
            let bb = if l + 1 < lines {
                Some(base(l + 1))
            } else {
                None
            };
            for j in 0..n {
                la[j] = data[ba + j * stride];
                lb[j] = bb.map_or(0.0, |b| data[b + j * stride]);
            }
            self.pair(&mut la, &mut lb, &mut buf, &mut scratch);
            for j in 0..n {
                data[ba + j * stride] = la[j];
                if let Some(b) = bb {
                    data[b + j * stride] = lb[j];
                }
            }
            l += 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn direct(x: &[f64], m: usize) -> Vec<f64> {
        let n = m - 1;
        (1..=n)
            .map(|k| {
                (1..=n)
                    .map(|j| x[j - 1] * (std::f64::consts::PI * (j * k) as f64 / m as f64).sin())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_direct_sum() {
        for m in [2usize, 4, 8, 13, 32] {
            let t = SineTransform::new(m);
            let x: Vec<f64> = (0..m - 1)
                .map(|i| ((i * 7 + 3) % 11) as f64 - 4.5)
                .collect();
            let mut y = x.clone();
            t.line(&mut y);
            let want = direct(&x, m);
            for (a, b) in y.iter().zip(&want) {
                assert_relative_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn involution_up_to_scale_in_3d() {
        let m = 8;
        let t = SineTransform::new(m);
        let n = m - 1;
        let x: Vec<f64> = (0..n * n * n).map(|i| (i as f64 * 0.37).cos()).collect();
        let mut y = x.clone();
        t.transform(&mut y, 3);
        t.transform(&mut y, 3);
        let scale = (m as f64 / 2.0).powi(3);
        for (a, b) in y.iter().zip(&x) {
            assert_relative_eq!(a / scale, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn separable_along_axes() {
        let m = 6;
        let n = m - 1;
        let t = SineTransform::new(m);
        let xs: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let ys: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut grid: Vec<f64> = (0..n * n).map(|i| xs[i / n] * ys[i % n]).collect();
        t.transform(&mut grid, 2);
        let (fx, fy) = (direct(&xs, m), direct(&ys, m));
        for i in 0..n {
            for j in 0..n {
                assert_relative_eq!(grid[i * n + j], fx[i] * fy[j], epsilon = 1e-10);
            }
        }
    }
}
