mod common;

use mpm_core::metrics::{boundary, boundary_f, default_tolerance, evaluate_sequence, jaccard};
use mpm_core::{BinaryMask, FrameSize, LabelGrid};
use proptest::prelude::*;

fn size(w: usize, h: usize) -> FrameSize {
    FrameSize::new(w, h).unwrap()
}

fn mask_strategy(w: usize, h: usize) -> impl Strategy<Value = BinaryMask> {
    proptest::collection::vec(any::<bool>(), w * h).prop_map(move |bits| BinaryMask::from_bits(size(w, h), bits).unwrap())
}

#[test]
fn hand_pairs_match_enumeration() {
    let pairs = common::hand_pairs();
    assert_eq!(pairs.len(), 20);
    for (i, (pred, gt)) in pairs.iter().enumerate() {
        let j = jaccard(pred, gt).unwrap();
        assert_eq!(j, common::jaccard(pred, gt), "pair {i}");
        for tol in [0.0, 1.0, 1.5, 2.0, 3.0] {
            let f = boundary_f(pred, gt, tol).unwrap();
            let want = common::boundary_f(pred, gt, tol);
            assert!((f - want).abs() < 1e-9, "pair {i} tol {tol}: {f} vs {want}");
        }
        let bp: Vec<(i64, i64)> = boundary(pred).iter_set().map(|(c, r)| (c as i64, r as i64)).collect();
        assert_eq!(bp, common::boundary_pixels(pred), "pair {i}");
    }
}

#[test]
fn hand_counted_values() {
    let pairs = common::hand_pairs();
    // 2 shared pixels out of 4 covered
    assert_eq!(common::jaccard_counts(&pairs[1].0, &pairs[1].1), (2, 4));
    assert_eq!(jaccard(&pairs[1].0, &pairs[1].1).unwrap(), 0.5);
    assert_eq!(jaccard(&pairs[3].0, &pairs[3].1).unwrap(), 0.25);
    assert_eq!(jaccard(&pairs[4].0, &pairs[4].1).unwrap(), 0.5);
    assert_eq!(jaccard(&pairs[7].0, &pairs[7].1).unwrap(), 1.0 / 9.0);
    assert_eq!(jaccard(&pairs[8].0, &pairs[8].1).unwrap(), 1.0);
    assert_eq!(boundary_f(&pairs[8].0, &pairs[8].1, 1.0).unwrap(), 1.0);
    assert_eq!(boundary_f(&pairs[9].0, &pairs[9].1, 1.0).unwrap(), 0.0);
    // one-row shift is matched at tolerance 1 but not 0
    assert_eq!(boundary_f(&pairs[10].0, &pairs[10].1, 0.0).unwrap(), 0.0);
    assert_eq!(boundary_f(&pairs[10].0, &pairs[10].1, 1.0).unwrap(), 1.0);
}

#[test]
fn one_third_overlap_sequence() {
    let sz = size(3, 1);
    let gt = LabelGrid::from_vec(sz, 1, vec![1, 1, 0]).unwrap();
    let pred = LabelGrid::from_vec(sz, 1, vec![0, 1, 1]).unwrap();
    let r = evaluate_sequence(std::slice::from_ref(&pred), std::slice::from_ref(&gt), 0.0).unwrap();
    assert_eq!(r.j, 1.0 / 3.0);
    let f = common::boundary_f(&pred.object_mask(1), &gt.object_mask(1), 0.0);
    assert_eq!(r.f, f);
    assert_eq!(r.jf, (r.j + r.f) / 2.0);
}

#[test]
fn aggregation_averages_frames_then_objects() {
    let sz = size(4, 1);
    let gts = vec![
        LabelGrid::from_vec(sz, 2, vec![1, 1, 2, 2]).unwrap(),
        LabelGrid::from_vec(sz, 2, vec![1, 1, 2, 2]).unwrap(),
    ];
    let preds = vec![
        LabelGrid::from_vec(sz, 2, vec![1, 1, 2, 2]).unwrap(),
        LabelGrid::from_vec(sz, 2, vec![1, 2, 2, 2]).unwrap(),
    ];
    let r = evaluate_sequence(&preds, &gts, 0.0).unwrap();
    let j1 = (1.0 + 0.5) / 2.0;
    let j2 = (1.0 + 2.0 / 3.0) / 2.0;
    assert_eq!(r.per_object[0].j, j1);
    assert_eq!(r.per_object[1].j, j2);
    assert_eq!(r.j, (j1 + j2) / 2.0);
    assert_eq!(r.jf.to_bits(), ((r.j + r.f) / 2.0).to_bits());
}

#[test]
fn tolerance_scales_with_diagonal() {
    assert_eq!(default_tolerance(size(100, 1)), 2.0);
    assert_eq!(default_tolerance(size(1920, 1080)), 23.0);
}

proptest! {
    #[test]
    fn jaccard_is_symmetric_and_bounded(a in mask_strategy(6, 5), b in mask_strategy(6, 5)) {
        let ab = jaccard(&a, &b).unwrap();
        prop_assert_eq!(ab, jaccard(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, common::jaccard(&a, &b));
    }

    #[test]
    fn jaccard_is_translation_invariant(a in mask_strategy(5, 5), b in mask_strategy(5, 5), dx in 0usize..4, dy in 0usize..4) {
        // embed both masks in a larger frame at the same offset
        let shift = |m: &BinaryMask| BinaryMask::from_fn(size(9, 9), |c, r| {
            c >= dx && r >= dy && c - dx < 5 && r - dy < 5 && m.get(c - dx, r - dy)
        });
        prop_assert_eq!(jaccard(&a, &b).unwrap(), jaccard(&shift(&a), &shift(&b)).unwrap());
    }

    #[test]
    fn subset_jaccard_is_area_ratio(gt in mask_strategy(7, 6), keep in proptest::collection::vec(any::<bool>(), 42)) {
        prop_assume!(!gt.is_empty());
        let pred = BinaryMask::from_fn(gt.size(), |c, r| gt.get(c, r) && keep[r * 7 + c]);
        prop_assert_eq!(jaccard(&pred, &gt).unwrap(), pred.area() as f64 / gt.area() as f64);
    }

    #[test]
    fn boundary_f_is_monotone_in_tolerance(a in mask_strategy(8, 7), b in mask_strategy(8, 7), t in 0.0..4.0f64, dt in 0.0..4.0f64) {
        let lo = boundary_f(&a, &b, t).unwrap();
        let hi = boundary_f(&a, &b, t + dt).unwrap();
        prop_assert!(hi >= lo);
        prop_assert!((lo - common::boundary_f(&a, &b, t)).abs() < 1e-9);
    }
}
