use gff_thinlab::dyadic::{
    approximate, box_count, validate_das, DyadicScheme, DyadicWord, Shape, ShiftedGridScheme,
};
use gff_thinlab::green_field::LatticeDomain;
use proptest::prelude::*;

#[test]
fn segment_box_count_grows_linearly() {
    let seg = Shape::segment(&[0.1, 0.3], &[0.9, 0.3]);
    for n in 3..8 {
        let c = box_count(&seg, 2, n) as f64;
        let ideal = 0.8 * (1u64 << n) as f64;
        assert!(c >= ideal && c <= ideal + 3.0, "n = {n}: {c}");
    }
    assert_eq!(box_count(&Shape::Empty, 2, 4), 0);
    assert_eq!(box_count(&Shape::Domain(3), 3, 2), 64);
}

#[test]
fn parsed_union_matches_constructed() {
    let text =
        "# two pieces\nkind=union\nkind=segment from=0.1,0.3 to=0.9,0.3\nkind=point at=0.6,0.6\n";
    let parsed = Shape::parse(text).unwrap();
    let built = Shape::union(vec![
        Shape::segment(&[0.1, 0.3], &[0.9, 0.3]),
        Shape::point(&[0.6, 0.6]),
    ]);
    for n in 0..7 {
        assert_eq!(box_count(&parsed, 2, n), box_count(&built, 2, n));
    }
    assert!(Shape::parse("kind=circle r=1").is_err());
}

#[test]
fn both_schemes_validate() {
    let dom = LatticeDomain::new(2, 64).unwrap();
    let a = validate_das(&DyadicScheme::new(2), &dom, 0..=4, None).unwrap();
    let b = validate_das(&ShiftedGridScheme::new(2), &dom, 0..=4, None).unwrap();
    assert!(a.passed && b.passed);
    assert!(a.levels.iter().all(|l| l.max_overlap == 0.0));
    assert!(b.fitted_constant <= b.constant);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corner_round_trip(d in 2usize..=4, depth in 0usize..8, seed in any::<u64>()) {
        let side = 1u64 << depth;
        let corner: Vec<u64> = (0..d).map(|j| (seed >> (8 * j)) % side).collect();
        let w = DyadicWord::from_corner(d, depth, &corner).unwrap();
        prop_assert_eq!(&w.corner()[..d], &corner[..]);
        prop_assert_eq!(w.depth(), depth);
        for c in w.children() {
            prop_assert_eq!(c.parent(), Some(w));
            prop_assert!(w.is_ancestor_of(c));
        }
    }

    #[test]
    fn approximation_covers_the_set(x in 0.01f64..0.99, y in 0.01f64..0.99, n in 0usize..6) {
        let dom = LatticeDomain::new(2, 64).unwrap();
        let p = Shape::point(&[x, y]);
        let a = approximate(&p, n, &DyadicScheme::new(2), &dom).unwrap();
        prop_assert!(a.contains(&[x, y]));
        prop_assert!(a.count >= 1 && a.count <= 4);
        let cell = 0.5f64.powi(n as i32);
        prop_assert!(a.volume <= 4.0 * cell * cell + 1e-12);
    }

    #[test]
    fn box_counts_are_monotone_in_depth(x0 in 0.0f64..1.0, y0 in 0.0f64..1.0, x1 in 0.0f64..1.0, y1 in 0.0f64..1.0) {
        let seg = Shape::segment(&[x0, y0], &[x1, y1]);
        for n in 0..6 {
            prop_assert!(box_count(&seg, 2, n + 1) >= box_count(&seg, 2, n));
            prop_assert!(box_count(&seg, 2, n + 1) <= 4 * box_count(&seg, 2, n));
        }
    }
}
