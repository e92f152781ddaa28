use approx::assert_relative_eq;
use gff_thinlab::dyadic::Shape;
use gff_thinlab::exploration::{bm_hit_prob, run_bbm, BranchingSchedule};
use gff_thinlab::green_field::{GreensOperator, LatticeDomain};
use gff_thinlab::rng::StreamKey;
use gff_thinlab::thinness::{
    deterministic_thin_report, gaussian_bound_check, moment_report, non_thin_verdict, paper_kappa,
    tail_second_moment, union_bound_holds, ReplicaTrace, ThresholdSpec,
};
use proptest::prelude::*;

#[test]
fn moment_report_matches_oracle() {
    let sched = BranchingSchedule::new(2, 1.0).unwrap();
    let traces: Vec<_> = (0..2000)
        .map(|r| {
            ReplicaTrace::from_state(r, &run_bbm(&sched, 5, StreamKey::replica(3, r)).unwrap())
                .unwrap()
        })
        .collect();
    let rep = moment_report(&traces, 1..=5, &sched).unwrap();
    for row in &rep.rows {
        assert_relative_eq!(row.oracle, bm_hit_prob(row.n as f64).unwrap());
        assert!(row.z.abs() < 4.0, "n = {}: z = {}", row.n, row.z);
        assert!(row.active_mass.se > 0.0);
    }
    let v = non_thin_verdict(&rep);
    assert!(v.mean_increasing && v.second_moment_bounded);
    assert!(v.increments_halving.is_none());
}

#[test]
fn full_domain_variance_is_constant() {
    let op = GreensOperator::build(LatticeDomain::new(2, 32).unwrap()).unwrap();
    let rows = deterministic_thin_report(&op, &Shape::Domain(2), None, 0..=4).unwrap();
    let v0 = rows[0].variance;
    assert!(rows.iter().all(|r| (r.variance - v0).abs() < 1e-12 * v0));
}

#[test]
fn threshold_uses_requested_constant() {
    let op = GreensOperator::build(LatticeDomain::new(2, 256).unwrap()).unwrap();
    let strict = ThresholdSpec::new(&op, 5, true).unwrap();
    assert_relative_eq!(strict.kappa, paper_kappa());
    let lattice = ThresholdSpec::new(&op, 5, false).unwrap();
    assert_relative_eq!(
        lattice.threshold / strict.threshold,
        lattice.kappa / strict.kappa,
        max_relative = 1e-12
    );
}

#[test]
fn gaussian_constant_is_attained_inside_the_grid() {
    let grid: Vec<f64> = (1..=50).map(|i| i as f64 / 100.0).collect();
    let gb = gaussian_bound_check(&[0.5], &grid, &[0.05]).unwrap();
    assert!(gb.fitted_constant > 2.0 && gb.fitted_constant < 3.0);
    assert!(gb.bivariate.iter().all(|b| b.holds));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn union_inequality_for_random_segments(
        a in prop::array::uniform4(0.05f64..0.95),
        b in prop::array::uniform4(0.05f64..0.95),
    ) {
        let op = GreensOperator::build(LatticeDomain::new(2, 32).unwrap()).unwrap();
        let sa = Shape::segment(&a[..2], &a[2..]);
        let sb = Shape::segment(&b[..2], &b[2..]);
        let ra = deterministic_thin_report(&op, &sa, None, 0..=4).unwrap();
        let rb = deterministic_thin_report(&op, &sb, None, 0..=4).unwrap();
        let ru = deterministic_thin_report(&op, &Shape::union(vec![sa, sb]), None, 0..=4).unwrap();
        prop_assert!(union_bound_holds(&ru, &ra, &rb).iter().all(|(_, ok)| *ok));
    }

    #[test]
    fn tail_second_moment_is_monotone(p in 1e-6f64..0.99) {
        let q = (p * 1.01).min(1.0);
        prop_assert!(tail_second_moment(q) >= tail_second_moment(p));
        prop_assert!(tail_second_moment(p) <= 1.0 + 1e-12);
    }
}
