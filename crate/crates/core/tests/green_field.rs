use approx::assert_relative_eq;
use gff_thinlab::dyadic::{Cell, DyadicWord};
use gff_thinlab::green_field::{
    cell_variance, markov_decompose, pair, polar_defect, FieldSample, GreensOperator,
    LatticeDomain, RestrictedGreens, VertexSet,
};
use gff_thinlab::rng::StreamKey;
use gff_thinlab::stats::Summary;
use gff_thinlab::Error;
use proptest::prelude::*;

fn op(d: usize, m: usize) -> GreensOperator {
    GreensOperator::build(LatticeDomain::new(d, m).unwrap()).unwrap()
}

#[test]
fn sampled_pairings_have_operator_variance() {
    let g = op(2, 32);
    let dom = *g.domain();
    let w: Vec<f64> = (0..dom.len()).map(|i| 1.0 + dom.point(i)[0]).collect();
    let target = g.variance(&w);
    let xs: Vec<f64> = (0..4000)
        .map(|r| pair(&g.sample(StreamKey::replica(7, r)), &w).unwrap())
        .collect();
    let s = Summary::from_samples(&xs);
    assert!(s.z(0.0).abs() < 4.0);
    let z2 = (s.second_moment - target) / s.second_moment_se;
    assert!(
        z2.abs() < 4.0,
        "second moment {} vs {target}",
        s.second_moment
    );
}

#[test]
fn cell_variance_matches_quadratic_form() {
    let g = op(3, 16);
    let dom = *g.domain();
    let a = Cell::open(DyadicWord::from_corner(3, 2, &[1, 0, 2]).unwrap());
    let b = Cell::closed(DyadicWord::from_corner(3, 1, &[0, 1, 1]).unwrap());
    let fa = dom.indicator(&a.vertex_ranges(&dom).unwrap());
    let fb = dom.indicator(&b.vertex_ranges(&dom).unwrap());
    assert_relative_eq!(
        cell_variance(&g, &a, &b).unwrap(),
        g.covariance(&fa, &fb),
        max_relative = 1e-10
    );
}

#[test]
fn markov_decomposition_reassembles_the_field() {
    let g = op(2, 32);
    let dom = *g.domain();
    let f = g.sample(StreamKey::from_seed(11));
    let set = VertexSet::from_predicate(dom, |c| c[0] == 16 || c[1] == 16);
    let dec = markov_decompose(&g, &f, &set).unwrap();
    for i in 0..dom.len() {
        assert_relative_eq!(
            dec.harmonic[i] + dec.residual[i],
            f.values()[i],
            epsilon = 1e-10
        );
        if set.contains(i) {
            assert_eq!(dec.residual[i], 0.0);
        }
    }
}

#[test]
fn polar_defect_limits() {
    let g = op(2, 16);
    let dom = *g.domain();
    assert_eq!(polar_defect(&g, &VertexSet::empty(dom)).unwrap(), 0.0);
    assert_relative_eq!(
        polar_defect(&g, &VertexSet::all(dom)).unwrap(),
        g.integrated_trace(),
        max_relative = 1e-9
    );
}

#[test]
fn pairing_rejects_boundary_weight() {
    let dom = LatticeDomain::new(2, 8).unwrap();
    let f = FieldSample::zeros(dom);
    let mut w = vec![0.0; 81];
    w[0] = 1.0;
    assert!(matches!(pair(&f, &w), Err(Error::Input(_))));
    assert!(GreensOperator::build(LatticeDomain::new(2, 2).unwrap()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn green_is_symmetric_and_positive(x in 0usize..49, y in 0usize..49) {
        let g = op(2, 8);
        let gxy = g.entry(x, y);
        prop_assert!(gxy > 0.0);
        prop_assert!((gxy - g.entry(y, x)).abs() < 1e-12 * gxy.abs().max(1.0));
    }

    #[test]
    fn restricted_green_is_dominated(x in 0usize..225, y in 0usize..225, cut in 2usize..14) {
        let g = op(2, 16);
        let dom = *g.domain();
        let set = VertexSet::from_predicate(dom, |c| c[0] == cut);
        let r = RestrictedGreens::new(&set);
        let gr = r.entry(x, y).unwrap();
        prop_assert!(gr >= -1e-12);
        prop_assert!(gr <= g.entry(x, y) + 1e-12);
    }

    #[test]
    fn covariance_is_bilinear(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1000) {
        let g = op(2, 8);
        let mut s = StreamKey::from_seed(seed).stream();
        let f: Vec<f64> = (0..49).map(|_| s.open01() - 0.5).collect();
        let h: Vec<f64> = (0..49).map(|_| s.open01() - 0.5).collect();
        let mix: Vec<f64> = f.iter().zip(&h).map(|(x, y)| a * x + b * y).collect();
        let lhs = g.covariance(&mix, &f);
        let rhs = a * g.variance(&f) + b * g.covariance(&h, &f);
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }
}
