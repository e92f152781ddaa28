use approx::assert_relative_eq;
use gff_thinlab::exploration::{
    bm_hit_prob, box_count, bridge_hit_prob, observables, run_bbm, run_field_coupled,
    BranchingSchedule, FieldExplorer, Mode,
};
use gff_thinlab::green_field::{GreensOperator, LatticeDomain};
use gff_thinlab::rng::StreamKey;
use gff_thinlab::Error;
use proptest::prelude::*;

#[test]
fn schedules() {
    let s2 = BranchingSchedule::new(2, 1.0).unwrap();
    assert_eq!(s2.time(5), 5.0);
    let s3 = BranchingSchedule::new(3, 0.5).unwrap();
    assert_relative_eq!(s3.time(4), 0.5 * 15.0);
    assert!(BranchingSchedule::new(2, 0.0).is_err());
    assert_relative_eq!(
        bm_hit_prob(6.0).unwrap(),
        0.6830913983096086,
        epsilon = 1e-12
    );
    assert!(bm_hit_prob(-1.0).is_err());
}

#[test]
fn bridge_probability_limits() {
    assert_eq!(bridge_hit_prob(0.2, 1.0, 1.0), 1.0);
    assert!(bridge_hit_prob(0.0, 0.0, 1e-6) < 1e-100);
    let p = bridge_hit_prob(0.5, 0.5, 1.0);
    assert_relative_eq!(p, (-0.5f64).exp(), epsilon = 1e-15);
}

#[test]
fn budget_guard() {
    let s = BranchingSchedule::new(3, 1.0).unwrap();
    assert!(matches!(
        run_bbm(&s, 9, StreamKey::from_seed(1)),
        Err(Error::Config(_))
    ));
}

#[test]
fn field_mode_identities_hold_for_every_generation() {
    let op = GreensOperator::build(LatticeDomain::new(2, 64).unwrap()).unwrap();
    for r in 0..6 {
        let st = run_field_coupled(&op, 4, StreamKey::replica(5, r)).unwrap();
        assert_eq!(st.mode, Mode::FieldCoupled);
        st.check_invariants().unwrap();
        for n in 0..=4 {
            let e = observables(&st, n).unwrap();
            assert!(e.telescoping_residual.unwrap() < 1e-9);
            let f = st.records[n].field.as_ref().unwrap();
            assert!(f.bridge_residual < 1e-9);
        }
    }
    assert!(matches!(
        FieldExplorer::new(&op, 5).map(|_| ()),
        Err(Error::Resolution(_))
    ));
}

#[test]
fn field_clock_is_increasing() {
    let op = GreensOperator::build(LatticeDomain::new(3, 32).unwrap()).unwrap();
    let ex = FieldExplorer::new(&op, 3).unwrap();
    assert_eq!(ex.clock(0), 0.0);
    for n in 0..3 {
        assert!(ex.clock(n + 1) > ex.clock(n));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bbm_states_are_consistent(seed in any::<u64>(), d in 2usize..=3, t in 0.1f64..3.0) {
        let sched = BranchingSchedule::new(d, t).unwrap();
        let n_max = if d == 2 { 6 } else { 4 };
        let st = run_bbm(&sched, n_max, StreamKey::from_seed(seed)).unwrap();
        st.check_invariants().unwrap();
        let cells = 1u64 << (d * n_max);
        let mut prev_vol = 0.0;
        for n in 0..=n_max {
            let r = st.record(n).unwrap();
            // Active cells and frozen volume tile the domain.
            let active_vol = r.active as f64 * 0.5f64.powi((d * n) as i32);
            prop_assert!((active_vol + r.inactive_volume - 1.0).abs() < 1e-9);
            prop_assert!(r.inactive_volume >= prev_vol - 1e-12);
            prev_vol = r.inactive_volume;
            // Stopped values are exactly 1 in this mode.
            prop_assert!((r.stopped_mass - r.inactive_volume).abs() < 1e-12);
            let b = box_count(&st, n).unwrap();
            prop_assert!(b >= r.active as u64 && b <= 1u64 << (d * n));
        }
        prop_assert!(box_count(&st, n_max).unwrap() <= cells);
    }

    #[test]
    fn deeper_runs_extend_shallower_ones(seed in any::<u64>()) {
        let sched = BranchingSchedule::new(2, 1.0).unwrap();
        let key = StreamKey::from_seed(seed);
        let a = run_bbm(&sched, 4, key).unwrap();
        let b = run_bbm(&sched, 6, key).unwrap();
        for n in 0..=4 {
            prop_assert_eq!(&a.records[n], &b.records[n]);
        }
    }
}
