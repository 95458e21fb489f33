mod common;

use proptest::prelude::*;
use rand::Rng;
use shutterforge::distillation::{
    error_mask, loss_charbonnier, loss_distill, mask_boundary, mask_combine, mask_dynamic,
    CharbonnierMode, MaskWeights,
};
use shutterforge::flowops::{aggregate_warped, block_flow, flow_diff, flow_magnitude};
use shutterforge::perturbation::translate;
use shutterforge::{FlowField, FrameSequence, Image, MaskMap};

use common::*;

#[test]
fn flow_diff_matches_subtraction_and_is_antisymmetric() {
    let mut r = rng(1);
    for _ in 0..20 {
        let a = random_flow(&mut r, 9, 7, 5.0);
        let b = random_flow(&mut r, 9, 7, 5.0);
        let d = flow_diff(&a, &b).unwrap();
        let want: Vec<f32> = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
        assert_eq!(d.data(), want.as_slice());
        let back = flow_diff(&b, &a).unwrap();
        assert!(d.data().iter().zip(back.data()).all(|(x, y)| *x == -*y));
    }
}

#[test]
fn magnitude_matches_hypot() {
    let flow = random_flow(&mut rng(2), 11, 5, 10.0);
    let mag = flow_magnitude(&flow);
    for y in 0..11 {
        for x in 0..5 {
            let (dx, dy) = flow.get(y, x);
            assert_eq!(mag.get(y, x), (dx as f64).hypot(dy as f64) as f32);
        }
    }
}

#[test]
fn aggregate_lies_between_inputs() {
    let mut r = rng(3);
    for _ in 0..20 {
        let a = random_image(&mut r, 8, 8, 3);
        let b = random_image(&mut r, 8, 8, 3);
        let m = random_mask(&mut r, 8, 8);
        let out = aggregate_warped(&a, &b, &m).unwrap();
        for ((&o, &x), &y) in out.data().iter().zip(a.data()).zip(b.data()) {
            assert!(o >= x.min(y) && o <= x.max(y));
        }
    }
}

#[test]
fn block_flow_recovers_translation_and_matches_oracle() {
    let mut r = rng(4);
    for _ in 0..5 {
        let a = random_image(&mut r, 24, 24, 3);
        // b(p) = a(p - (2, 0)), so a(p) = b(p + (2, 0))
        let b = translate(&a, 2, 0);
        let flow = block_flow(&a, &b, 4, 3).unwrap();
        let oracle = block_flow_oracle(&a, &b, 4, 3);
        for (i, pair) in flow.data().chunks(2).enumerate() {
            assert_eq!((pair[0], pair[1]), oracle[i]);
        }
        for y in 0..24 {
            for x in 0..20 {
                assert_eq!(flow.get(y, x), (2.0, 0.0), "interior block at ({y}, {x})");
            }
        }
    }
}

#[test]
fn block_flow_of_identical_frames_is_zero() {
    let a = random_image(&mut rng(5), 12, 12, 1);
    for block in [1, 2, 3, 4, 6, 12] {
        for radius in 0..4 {
            let f = block_flow(&a, &a, block, radius).unwrap();
            assert!(f.data().iter().all(|&v| v == 0.0));
        }
    }
    let flat = Image::filled(12, 12, 1, 0.3).unwrap();
    assert!(block_flow(&flat, &flat, 4, 3).unwrap().data().iter().all(|&v| v == 0.0));
}

#[test]
fn error_mask_matches_pixel_comparison() {
    let mut r = rng(6);
    for _ in 0..20 {
        let (s, t, g) = (
            random_image(&mut r, 7, 9, 3),
            random_image(&mut r, 7, 9, 3),
            random_image(&mut r, 7, 9, 3),
        );
        let m = error_mask(&s, &t, &g).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                let err = |img: &Image| -> f64 {
                    (0..3).map(|c| (img.get(y, x, c) as f64 - g.get(y, x, c) as f64).abs()).sum()
                };
                let want = if err(&s) > err(&t) { 1.0 } else { 0.0 };
                assert_eq!(m.get(y, x), want);
            }
        }
    }
}

#[test]
fn combine_with_custom_weights_matches_weighted_sum() {
    let mut r = rng(7);
    let w = MaskWeights::new(0.5, 0.25, 0.25).unwrap();
    for _ in 0..20 {
        let (a, b, c) = (random_mask(&mut r, 6, 6), random_mask(&mut r, 6, 6), random_mask(&mut r, 6, 6));
        let m = mask_combine(&a, &b, &c, &w).unwrap();
        for i in 0..36 {
            let want = 0.5 * a.data()[i] as f64 + 0.25 * b.data()[i] as f64 + 0.25 * c.data()[i] as f64;
            assert!((m.data()[i] as f64 - want).abs() <= 1e-7);
        }
    }
    assert!(MaskWeights::new(0.5, 0.5, 0.5).is_err());
}

fn masked_mean_oracle(s: &[FlowField], t: &[FlowField], m: &[MaskMap]) -> f64 {
    let mut total = 0.0;
    for (i, (a, b)) in s.iter().zip(t).enumerate() {
        let mask = if m.len() == 1 { &m[0] } else { &m[i] };
        let (h, w) = a.dims();
        let mut acc = 0.0;
        for y in 0..h {
            for x in 0..w {
                let (ax, ay) = a.get(y, x);
                let (bx, by) = b.get(y, x);
                let l1 = (ax as f64 - bx as f64).abs() + (ay as f64 - by as f64).abs();
                acc += mask.get(y, x) as f64 * l1;
            }
        }
        total += acc / (2 * h * w) as f64;
    }
    total / s.len() as f64
}

#[test]
fn distill_loss_matches_masked_mean() {
    let mut r = rng(8);
    for n in 1..5 {
        let s: Vec<_> = (0..n).map(|_| random_flow(&mut r, 8, 10, 4.0)).collect();
        let t: Vec<_> = (0..n).map(|_| random_flow(&mut r, 8, 10, 4.0)).collect();
        let per: Vec<_> = (0..n).map(|_| random_mask(&mut r, 8, 10)).collect();
        let shared = vec![random_mask(&mut r, 8, 10)];
        for masks in [&per, &shared] {
            let got = loss_distill(&s, &t, masks).unwrap();
            assert!((got - masked_mean_oracle(&s, &t, masks)).abs() <= 1e-6);
            assert_eq!(got, loss_distill(&t, &s, masks).unwrap());
        }
        let zero = vec![MaskMap::filled(8, 10, 0.0).unwrap()];
        assert_eq!(loss_distill(&s, &t, &zero).unwrap(), 0.0);
    }
}

#[test]
fn charbonnier_matches_elementwise_oracle() {
    let mut r = rng(9);
    for _ in 0..10 {
        let a = random_sequence(&mut r, 3, 6, 6, 3);
        let b = random_sequence(&mut r, 3, 6, 6, 3);
        let eps = 1e-3;
        let mut acc = 0.0;
        for (fa, fb) in a.frames().iter().zip(b.frames()) {
            for (&x, &y) in fa.data().iter().zip(fb.data()) {
                acc += ((x as f64 - y as f64).powi(2) + eps * eps).sqrt();
            }
        }
        let want = acc / (3 * 6 * 6 * 3) as f64;
        let got = loss_charbonnier(&a, &b, eps, CharbonnierMode::Elementwise).unwrap();
        assert!((got - want).abs() <= 1e-12);
        let sq: f64 = a
            .frames()
            .iter()
            .zip(b.frames())
            .flat_map(|(fa, fb)| fa.data().iter().zip(fb.data()))
            .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
            .sum();
        let global = loss_charbonnier(&a, &b, eps, CharbonnierMode::Global).unwrap();
        assert!((global - (sq + eps * eps).sqrt()).abs() <= 1e-12);
    }
}

#[test]
fn boundary_mask_ignores_constant_offset() {
    // Dyadic values keep the offset exact in f32.
    let mut r = rng(10);
    let frames: Vec<Image> = (0..4)
        .map(|_| Image::from_fn(10, 10, 3, |_, _, _| r.gen_range(0..32) as f32 / 64.0).unwrap())
        .collect();
    let shifted: Vec<Image> = frames
        .iter()
        .map(|f| Image::from_fn(10, 10, 3, |y, x, c| f.get(y, x, c) + 0.25).unwrap())
        .collect();
    let a = mask_boundary(&FrameSequence::new(frames).unwrap());
    let b = mask_boundary(&FrameSequence::new(shifted).unwrap());
    for (ma, mb) in a.iter().zip(&b) {
        for (&x, &y) in ma.data().iter().zip(mb.data()) {
            assert!((x - y).abs() <= 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masks_are_valid_and_dynamic_mask_is_scale_invariant(seed in any::<u64>(), h in 2usize..20, w in 2usize..20) {
        let mut r = rng(seed);
        let flow = random_flow(&mut r, h, w, 3.0);
        let m = mask_dynamic(&flow, 2.0).unwrap();
        prop_assert!(m.data().iter().all(|&v| v == 0.0 || v == 1.0));
        let oracle = dynamic_mask_oracle(&flow, 2.0);
        prop_assert_eq!(m.data(), oracle.as_slice());
        for c in [0.5f32, 2.0, 10.0] {
            prop_assert_eq!(&mask_dynamic(&flow.scaled(c).unwrap(), 2.0).unwrap(), &m);
        }
    }

    #[test]
    fn distill_loss_is_monotone_in_mask(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = vec![random_flow(&mut r, 6, 6, 2.0)];
        let t = vec![random_flow(&mut r, 6, 6, 2.0)];
        let small = random_mask(&mut r, 6, 6);
        let large = MaskMap::from_fn(6, 6, |y, x| (small.get(y, x) + r.gen::<f32>() * 0.5).min(1.0)).unwrap();
        let a = loss_distill(&s, &t, &[small]).unwrap();
        let b = loss_distill(&s, &t, &[large]).unwrap();
        prop_assert!(b >= a);
    }

    #[test]
    fn charbonnier_is_at_least_eps(seed in any::<u64>(), eps in 1e-6f64..1e-1) {
        let mut r = rng(seed);
        let a = random_sequence(&mut r, 2, 4, 4, 1);
        let b = random_sequence(&mut r, 2, 4, 4, 1);
        prop_assert!(loss_charbonnier(&a, &b, eps, CharbonnierMode::Elementwise).unwrap() > eps);
        prop_assert_eq!(loss_charbonnier(&a, &a, eps, CharbonnierMode::Elementwise).unwrap(), eps);
    }
}
