//! Monte Carlo reductions and small statistical helpers.
//!
//! All reductions go through [`pairwise_sum`] over values ordered by replica
//! id, which fixes the floating-point summation tree and makes aggregated
//! numbers independent of how replicas were scheduled.

use libm::erfc;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

/// Sum with a fixed balanced binary tree (leaf blocks of 8).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean, standard error, and second moment of one statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub se: f64,
    pub second_moment: f64,
    pub second_moment_se: f64,
}

impl Summary {
    pub fn from_samples(xs: &[f64]) -> Summary {
        let n = xs.len();
        if n == 0 {
            return Summary {
                count: 0,
                mean: f64::NAN,
                se: f64::NAN,
                second_moment: f64::NAN,
                second_moment_se: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = pairwise_sum(xs) / nf;
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let second = pairwise_sum(&sq) / nf;
        let (se, se2) = if n > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
            let var = pairwise_sum(&dev) / (nf - 1.0);
            let dev2: Vec<f64> = sq.iter().map(|x| (x - second).powi(2)).collect();
            let var2 = pairwise_sum(&dev2) / (nf - 1.0);
            ((var / nf).sqrt(), (var2 / nf).sqrt())
        } else {
            (f64::NAN, f64::NAN)
        };
        Summary {
            count: n,
            mean,
            se,
            second_moment: second,
            second_moment_se: se2,
        }
    }

    pub fn variance(&self) -> f64 {
        self.se * self.se * self.count as f64
    }

    /// z-score of the mean against `oracle`. A zero standard error with an
    /// exact match gives 0.
    pub fn z(&self, oracle: f64) -> f64 {
        z_score(self.mean, self.se, oracle)
    }
}

pub fn z_score(estimate: f64, se: f64, oracle: f64) -> f64 {
    let diff = estimate - oracle;
    if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// One-sample Kolmogorov-Smirnov distance and asymptotic p-value.
pub fn kolmogorov_smirnov(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    (d, kolmogorov_q(lambda))
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert_relative_eq!(pairwise_sum(&xs), xs.iter().sum::<f64>(), epsilon = 1e-12);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn summary_of_constant_has_zero_se() {
        let s = Summary::from_samples(&[1.0; 10]);
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.se, 0.0);
        assert_eq!(s.second_moment, 1.0);
        assert_eq!(s.z(1.0), 0.0);
    }

    #[test]
    fn normal_helpers() {
        assert_relative_eq!(normal_cdf(0.0), 0.5);
        assert_relative_eq!(normal_cdf(1.0), 0.841_344_746_068_543, epsilon = 1e-12);
        assert_relative_eq!(
            normal_sf(8.0),
            6.220_960_574_271_78e-16,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            normal_quantile(0.975),
            1.959_963_984_540_054,
            epsilon = 1e-9
        );
    }

    #[test]
    fn ks_accepts_uniform_grid() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let (d, p) = kolmogorov_smirnov(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d <= 0.0005 + 1e-12);
        assert!(p > 0.99);
    }

    #[test]
    fn slope_of_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        assert_relative_eq!(ols_slope(&xs, &ys), 2.0);
    }
}
