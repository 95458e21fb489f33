mod common;

use proptest::prelude::*;
use sha2::{Digest, Sha256};
use shutterforge::png_io::{png_export, png_import, BitDepth};
use shutterforge::sft::{self, Tensor};
use shutterforge::{EncodingMap, FlowField, MaskMap};

use common::*;

fn dims() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=64, 1usize..=64, any::<u64>())
}

fn roundtrip(t: Tensor) -> Tensor {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.sft");
    std::fs::write(&path, t.to_bytes()).unwrap();
    sft::read_tensor(&path).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn images_roundtrip((h, w, seed) in dims(), rgb in any::<bool>()) {
        let img = random_image(&mut rng(seed), h, w, if rgb { 3 } else { 1 });
        prop_assert_eq!(roundtrip(img.clone().into()), Tensor::Image(img));
    }

    #[test]
    fn flows_roundtrip((h, w, seed) in dims()) {
        let flow = random_flow(&mut rng(seed), h, w, 50.0);
        prop_assert_eq!(roundtrip(flow.clone().into()), Tensor::Flow(flow));
    }

    #[test]
    fn masks_roundtrip((h, w, seed) in dims()) {
        let mask = random_mask(&mut rng(seed), h, w);
        prop_assert_eq!(roundtrip(mask.clone().into()), Tensor::Mask(mask));
    }

    #[test]
    fn encodings_roundtrip((h, w, seed) in dims()) {
        let mut r = rng(seed);
        let bound = (h - 1) as f32;
        let data = (0..h * w).map(|_| rand::Rng::gen_range(&mut r, -bound..=bound)).collect();
        let enc = EncodingMap::new(h, w, data).unwrap();
        prop_assert_eq!(roundtrip(enc.clone().into()), Tensor::Encoding(enc));
    }

    #[test]
    fn png_roundtrip_within_half_step((h, w, seed) in (1usize..=24, 1usize..=24, any::<u64>()), deep in any::<bool>(), rgb in any::<bool>()) {
        let depth = if deep { BitDepth::Sixteen } else { BitDepth::Eight };
        let img = random_image(&mut rng(seed), h, w, if rgb { 3 } else { 1 });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        png_export(&path, &img, depth).unwrap();
        let back = png_import(&path, depth).unwrap();
        let bound = 1.0 / (2.0 * depth.max_value()) + 1e-7;
        for (&a, &b) in img.data().iter().zip(back.data()) {
            prop_assert!(((a - b) as f64).abs() <= bound);
        }
    }
}

#[test]
fn random_image_roundtrips_exactly() {
    let img = random_image(&mut rng(5), 8, 8, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("img.sft");
    sft::write_tensor(&path, &img).unwrap();
    assert_eq!(sft::read_image(&path).unwrap(), img);
}

#[test]
fn repeated_writes_are_byte_identical() {
    let mut r = rng(6);
    let dir = tempfile::tempdir().unwrap();
    let tensors: Vec<Tensor> = vec![
        random_image(&mut r, 13, 7, 3).into(),
        random_flow(&mut r, 9, 11, 3.0).into(),
        random_mask(&mut r, 5, 5).into(),
        EncodingMap::new(3, 2, vec![0.0, 0.5, -2.0, 1.0, 2.0, -0.25]).unwrap().into(),
    ];
    for (i, t) in tensors.iter().enumerate() {
        let a = dir.path().join(format!("{i}a.sft"));
        let b = dir.path().join(format!("{i}b.sft"));
        std::fs::write(&a, t.to_bytes()).unwrap();
        std::fs::write(&b, t.to_bytes()).unwrap();
        let ha = Sha256::digest(std::fs::read(&a).unwrap());
        let hb = Sha256::digest(std::fs::read(&b).unwrap());
        assert_eq!(ha, hb, "tensor {i}");
    }
}

#[test]
fn typed_readers_reject_other_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flow.sft");
    sft::write_tensor(&path, &FlowField::zeros(2, 2).unwrap()).unwrap();
    assert!(sft::read_image(&path).is_err());
    assert!(sft::read_mask(&path).is_err());
    assert!(sft::read_flow(&path).is_ok());
    let path = dir.path().join("mask.sft");
    sft::write_tensor(&path, &MaskMap::filled(2, 2, 0.5).unwrap()).unwrap();
    assert!(sft::read_encoding(&path).is_err());
    assert!(sft::read_image(dir.path().join("missing.sft")).is_err());
}
