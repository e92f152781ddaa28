//! The Gaussian tail inequality `E[XY 1_E] <= C max Var P(E) log(1/P(E))`.
//!
//! For unit-variance `X = Y` the worst event of probability `p` is
//! `{X^2 > x_p}`; for correlation `rho` it is `{XY > t_p}`. Both
//! expectations are evaluated by one-dimensional quadrature.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{normal_pdf, normal_quantile, normal_sf};

const SIMPSON_INTERVALS: usize = 4000;

fn simpson(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    simpson_n(a, b, SIMPSON_INTERVALS, f)
}

fn simpson_n(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

/// `E[X^2 1{X^2 > x}]` with `P(X^2 > x) = p`, in closed form
/// `2 (z phi(z) + (1 - Phi(z)))`, `z = Phi^-1(1 - p/2)`.
pub fn tail_second_moment(p: f64) -> f64 {
    let z = normal_quantile(1.0 - p / 2.0);
    2.0 * (z * normal_pdf(z) + normal_sf(z))
}

fn tail_second_moment_quadrature(p: f64) -> f64 {
    let z = normal_quantile(1.0 - p / 2.0);
    2.0 * simpson_n(z, z + 14.0, 5 * SIMPSON_INTERVALS, |x| {
        x * x * normal_pdf(x)
    })
}

/// `(P(XY > t), E[XY 1{XY > t}])` for unit normals with correlation `rho`.
fn product_tail(rho: f64, t: f64) -> (f64, f64) {
    let s = (1.0 - rho * rho).sqrt();
    // (X, Y) and (-X, -Y) have the same law, so integrate x > 0 and double.
    // The integrands switch on near x ~ |t|, so [0, 1] gets its own grid.
    let pf = |x: f64| {
        if x == 0.0 {
            let lim = match t.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Less) => 1.0,
                Some(std::cmp::Ordering::Equal) => 0.5,
                _ => 0.0,
            };
            return lim * normal_pdf(0.0);
        }
        normal_pdf(x) * normal_sf((t / x - rho * x) / s)
    };
    let mf = |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        let mu = rho * x;
        let a = (t / x - mu) / s;
        normal_pdf(x) * x * (mu * normal_sf(a) + s * normal_pdf(a))
    };
    let prob = simpson(0.0, 1.0, pf) + simpson(1.0, 12.0, pf);
    let mom = simpson(0.0, 1.0, mf) + simpson(1.0, 12.0, mf);
    (2.0 * prob, 2.0 * mom)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailRatio {
    pub p: f64,
    pub closed_form: f64,
    pub quadrature: f64,
    /// `E[X^2 1_E] / (p log(1/p))`.
    pub ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BivariateCheck {
    pub rho: f64,
    pub p: f64,
    /// Threshold `t` with `P(XY > t) = p`.
    pub threshold: f64,
    pub expectation: f64,
    /// `C p log(1/p)` with the fitted `C`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianBound {
    pub fitted_constant: f64,
    pub ratios: Vec<TailRatio>,
    pub bivariate: Vec<BivariateCheck>,
    /// Largest gap between the closed form and the quadrature.
    pub quadrature_error: f64,
}

fn check_probability(p: f64) -> Result<()> {
    if p == 1.0 {
        return Err(Error::Domain(
            "p = 1 makes log(1/p) vanish; E[X^2] = 1 but the ratio is undefined".into(),
        ));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} outside (0, 1)")));
    }
    Ok(())
}

/// Fit `C` as the largest symmetric ratio over `p_grid`, then check the
/// correlated case on `rho_grid x bivariate_p` against it.
pub fn gaussian_bound_check(
    rho_grid: &[f64],
    p_grid: &[f64],
    bivariate_p: &[f64],
) -> Result<GaussianBound> {
    if p_grid.is_empty() {
        return Err(Error::Input("empty probability grid".into()));
    }
    let mut ratios = Vec::with_capacity(p_grid.len());
    let mut quadrature_error: f64 = 0.0;
    for &p in p_grid {
        check_probability(p)?;
        let closed = tail_second_moment(p);
        let quad = tail_second_moment_quadrature(p);
        quadrature_error = quadrature_error.max((closed - quad).abs());
        ratios.push(TailRatio {
            p,
            closed_form: closed,
            quadrature: quad,
            ratio: quad / (p * (1.0 / p).ln()),
        });
    }
    let fitted = ratios.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let mut bivariate = Vec::new();
    for &rho in rho_grid {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::Domain(format!("correlation {rho} outside [0, 1)")));
        }
        for &p in bivariate_p {
            check_probability(p)?;
            // P(XY > t) decreases in t; bracket and bisect.
            let (mut lo, mut hi) = (0.0, 1.0);
            while product_tail(rho, hi).0 > p {
                hi *= 2.0;
            }
            if product_tail(rho, 0.0).0 < p {
                return Err(Error::Domain(format!("P(XY > 0) < {p} at rho = {rho}")));
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if product_tail(rho, mid).0 > p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            let expectation = product_tail(rho, t).1;
            let bound = fitted * p * (1.0 / p).ln();
            bivariate.push(BivariateCheck {
                rho,
                p,
                threshold: t,
                expectation,
                bound,
                holds: expectation <= bound,
            });
        }
    }
    Ok(GaussianBound {
        fitted_constant: fitted,
        ratios,
        bivariate,
        quadrature_error,
    })
}
