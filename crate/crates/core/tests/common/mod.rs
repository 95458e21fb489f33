//! Independent reference implementations and fixtures for the integration
//! suites. Nothing here calls into the code paths it is used to check.

#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shutterforge::dataset::SynthConfig;
use shutterforge::perturbation::{PerturbKind, PerturbSpec};
use shutterforge::sft;
use shutterforge::{FlowField, FrameSequence, Image, MaskMap};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(r: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Image {
    Image::from_fn(h, w, c, |_, _, _| r.gen::<f32>()).unwrap()
}

pub fn random_sequence(r: &mut ChaCha8Rng, len: usize, h: usize, w: usize, c: usize) -> FrameSequence {
    FrameSequence::new((0..len).map(|_| random_image(r, h, w, c)).collect()).unwrap()
}

pub fn random_flow(r: &mut ChaCha8Rng, h: usize, w: usize, scale: f32) -> FlowField {
    FlowField::from_fn(h, w, |_, _| {
        (r.gen_range(-scale..=scale), r.gen_range(-scale..=scale))
    })
    .unwrap()
}

pub fn random_mask(r: &mut ChaCha8Rng, h: usize, w: usize) -> MaskMap {
    MaskMap::from_fn(h, w, |_, _| r.gen::<f32>()).unwrap()
}

/// Scalar-loop mean over frames `start..start + len`.
pub fn blur_oracle(seq: &FrameSequence, start: usize, len: usize) -> Vec<f64> {
    let (h, w, c) = seq.shape();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut s = 0.0f64;
                for t in start..start + len {
                    s += seq.frame(t).get(y, x, ch) as f64;
                }
                out.push(s / len as f64);
            }
        }
    }
    out
}

/// Pixel-by-pixel row extraction: output `(y, x)` comes from frame `start + y`.
pub fn rs_oracle(seq: &FrameSequence, start: usize) -> Vec<f32> {
    let (h, w, c) = seq.shape();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                out.push(seq.frame(start + y).get(y, x, ch));
            }
        }
    }
    out
}

fn clampi(v: isize, n: usize) -> usize {
    v.clamp(0, n as isize - 1) as usize
}

/// Tent-kernel bilinear sample with clamped coordinates.
pub fn bilinear_oracle(img: &Image, y: f64, x: f64, c: usize) -> f64 {
    let x = x.max(0.0).min((img.width() - 1) as f64);
    let y = y.max(0.0).min((img.height() - 1) as f64);
    let mut acc = 0.0;
    for yi in [y.floor() as isize, y.floor() as isize + 1] {
        for xi in [x.floor() as isize, x.floor() as isize + 1] {
            let wy = (1.0 - (y - yi as f64).abs()).max(0.0);
            let wx = (1.0 - (x - xi as f64).abs()).max(0.0);
            if wy * wx > 0.0 {
                acc += wy * wx * img.get(clampi(yi, img.height()), clampi(xi, img.width()), c) as f64;
            }
        }
    }
    acc
}

/// The four pixels a bilinear sample at `(y, x)` reads, after clamping.
pub fn bilinear_neighbors(img: &Image, y: f64, x: f64, c: usize) -> [f32; 4] {
    let x = x.max(0.0).min((img.width() - 1) as f64);
    let y = y.max(0.0).min((img.height() - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    [img.get(y0, x0, c), img.get(y0, x1, c), img.get(y1, x0, c), img.get(y1, x1, c)]
}

/// `out(y, x) = img(y + dy, x + dx)` with edge clamping, integer offsets only.
pub fn shift_oracle(img: &Image, dx: isize, dy: isize) -> Vec<f32> {
    let (h, w, c) = img.shape();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                out.push(img.get(clampi(y as isize + dy, h), clampi(x as isize + dx, w), ch));
            }
        }
    }
    out
}

/// Exhaustive SAD block matching; candidates sorted by (SAD, |d|², dy, dx).
pub fn block_flow_oracle(a: &Image, b: &Image, block: usize, radius: isize) -> Vec<(f32, f32)> {
    let (h, w, c) = a.shape();
    let mut per_block = Vec::new();
    for by in (0..h).step_by(block) {
        for bx in (0..w).step_by(block) {
            let mut cands = Vec::new();
            for dy in -radius..=radius {
                for dx in -radius..=radius {
                    let mut sad = 0.0f64;
                    for y in by..by + block {
                        for x in bx..bx + block {
                            for ch in 0..c {
                                let vb = b.get(clampi(y as isize + dy, h), clampi(x as isize + dx, w), ch);
                                sad += (a.get(y, x, ch) as f64 - vb as f64).abs();
                            }
                        }
                    }
                    cands.push((sad, dy * dy + dx * dx, dy, dx));
                }
            }
            cands.sort_by(|p, q| {
                p.0.partial_cmp(&q.0)
                    .unwrap()
                    .then(p.1.cmp(&q.1))
                    .then(p.2.cmp(&q.2))
                    .then(p.3.cmp(&q.3))
            });
            per_block.push((cands[0].3 as f32, cands[0].2 as f32));
        }
    }
    let blocks_x = w / block;
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            out.push(per_block[(y / block) * blocks_x + x / block]);
        }
    }
    out
}

/// tOF from the exhaustive block-matching oracle.
pub fn tof_oracle(pred: &FrameSequence, gt: &FrameSequence, block: usize, radius: isize) -> f64 {
    let mut total = 0.0;
    let pairs = pred.len() - 1;
    for t in 0..pairs {
        let fp = block_flow_oracle(pred.frame(t), pred.frame(t + 1), block, radius);
        let fg = block_flow_oracle(gt.frame(t), gt.frame(t + 1), block, radius);
        let s: f64 = fp
            .iter()
            .zip(&fg)
            .map(|(p, g)| (p.0 as f64 - g.0 as f64).abs() + (p.1 as f64 - g.1 as f64).abs())
            .sum();
        total += s / (fp.len() * 2) as f64;
    }
    total / pairs as f64
}

/// Type-7 percentile: sort, then interpolate at rank `p * (n - 1)`.
pub fn percentile_oracle(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= v.len() {
        return v[lo];
    }
    v[lo] + (h - lo as f64) * (v[lo + 1] - v[lo])
}

/// IQR-outlier mask on flow magnitudes via the sort-based percentile oracle.
pub fn dynamic_mask_oracle(flow: &FlowField, k: f64) -> Vec<f32> {
    let mags: Vec<f64> = flow
        .data()
        .chunks(2)
        .map(|v| ((v[0] as f64).powi(2) + (v[1] as f64).powi(2)).sqrt())
        .collect();
    let q1 = percentile_oracle(&mags, 0.25);
    let q3 = percentile_oracle(&mags, 0.75);
    mags.iter()
        .map(|&m| if m > q3 + k * (q3 - q1) { 1.0 } else { 0.0 })
        .collect()
}

/// BT.601 luminance plane.
pub fn luma_oracle(img: &Image) -> Vec<f64> {
    let (h, w, c) = img.shape();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            out.push(if c == 1 {
                img.get(y, x, 0) as f64
            } else {
                0.299 * img.get(y, x, 0) as f64
                    + 0.587 * img.get(y, x, 1) as f64
                    + 0.114 * img.get(y, x, 2) as f64
            });
        }
    }
    out
}

/// Sobel magnitude by explicit stencil, replicate padding, min-max normalized.
pub fn boundary_mask_oracle(img: &Image) -> Vec<f64> {
    let (h, w, _) = img.shape();
    let l = luma_oracle(img);
    let p = |y: isize, x: isize| l[clampi(y, h) * w + clampi(x, w)];
    let mut g = Vec::new();
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (p(y - 1, x + 1) + 2.0 * p(y, x + 1) + p(y + 1, x + 1))
                - (p(y - 1, x - 1) + 2.0 * p(y, x - 1) + p(y + 1, x - 1));
            let gy = (p(y + 1, x - 1) + 2.0 * p(y + 1, x) + p(y + 1, x + 1))
                - (p(y - 1, x - 1) + 2.0 * p(y - 1, x) + p(y - 1, x + 1));
            g.push((gx * gx + gy * gy).sqrt());
        }
    }
    let lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return vec![0.0; g.len()];
    }
    g.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Mean local SSIM with an explicit 11×11 Gaussian window at every pixel.
pub fn ssim_oracle(a: &Image, b: &Image) -> f64 {
    let (h, w, _) = a.shape();
    let la = luma_oracle(a);
    let lb = luma_oracle(b);
    let mut win = [[0.0f64; 11]; 11];
    let mut norm = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let dy = i as f64 - 5.0;
            let dx = j as f64 - 5.0;
            *v = (-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)).exp();
            norm += *v;
        }
    }
    let c1 = 0.0001;
    let c2 = 0.0009;
    let mut total = 0.0;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let idx = clampi(y + i as isize - 5, h) * w + clampi(x + j as isize - 5, w);
                    let wt = win[i][j] / norm;
                    ma += wt * la[idx];
                    mb += wt * lb[idx];
                    saa += wt * la[idx] * la[idx];
                    sbb += wt * lb[idx] * lb[idx];
                    sab += wt * la[idx] * lb[idx];
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    total / (h * w) as f64
}

/// Frame `t` of a scene: a bright square moving right `speed` px per frame
/// over a textured background.
pub fn moving_square_frame(t: usize, h: usize, w: usize, c: usize, speed: usize) -> Image {
    let left = (t * speed) % w;
    Image::from_fn(h, w, c, |y, x, ch| {
        let inside = y >= h / 4 && y < h / 4 + h / 3 && (x + w - left) % w < w / 3;
        if inside {
            0.9 - 0.1 * ch as f32
        } else {
            ((y * 3 + x * 5 + ch * 7) % 17) as f32 / 40.0
        }
    })
    .unwrap()
}

pub fn moving_square_sequence(len: usize, h: usize, w: usize, c: usize, speed: usize) -> FrameSequence {
    FrameSequence::new((0..len).map(|t| moving_square_frame(t, h, w, c, speed)).collect()).unwrap()
}

/// Writes `frames` as `frame_%06d.sft` into `dir`.
pub fn write_scene(dir: &Path, frames: &[Image]) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, f) in frames.iter().enumerate() {
        sft::write_tensor(dir.join(format!("frame_{i:06}.sft")), f).unwrap();
    }
}

/// Three moving-square scenes of unequal length, 20×20 RGB, as SFT frames.
pub fn toy_corpus(root: &Path) {
    for (name, len, speed) in [("alley", 60usize, 1usize), ("bridge", 80, 2), ("canal", 45, 3)] {
        let seq = moving_square_sequence(len, 20, 20, 3, speed);
        write_scene(&root.join(name), seq.frames());
    }
}

/// T=16, D=4, N=5 with one of each perturbation.
pub fn toy_config() -> SynthConfig {
    let mut config = SynthConfig::new(16, 4, 5, 16);
    config.perturbations = vec![
        PerturbSpec::new(PerturbKind::SpatialShift { max_offset: 4 }, 11).unwrap(),
        PerturbSpec::new(PerturbKind::TemporalShift { lo: 5, hi: 15 }, 12).unwrap(),
        PerturbSpec::new(PerturbKind::LowLight { peak: 300.0, gamma_lo: 2.0, gamma_hi: 3.5 }, 13)
            .unwrap(),
        PerturbSpec::new(
            PerturbKind::Stereo { d_up: 20.0, disparity: 0.05, disparity_path: None },
            14,
        )
        .unwrap(),
    ];
    config
}
