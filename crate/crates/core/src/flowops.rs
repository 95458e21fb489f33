//! Flow-based operations: backward warping, motion-residue maps, masked
//! blending and an exhaustive block-matching flow estimator.

use rayon::prelude::*;

use crate::error::{ensure_same_dims, Error, Result};
use crate::tensor::{FlowField, Image, MaskMap, ScalarField};

/// Bilinear sample of channel `c` at `(y, x)`, with the coordinates first
/// clamped into the image rectangle.
#[inline]
pub(crate) fn sample_bilinear(img: &Image, y: f64, x: f64, c: usize) -> f64 {
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);

    let v00 = img.get(y0, x0, c) as f64;
    let v01 = img.get(y0, x1, c) as f64;
    let v10 = img.get(y1, x0, c) as f64;
    let v11 = img.get(y1, x1, c) as f64;
    let top = (1.0 - fx) * v00 + fx * v01;
    let bottom = (1.0 - fx) * v10 + fx * v11;
    (1.0 - fy) * top + fy * bottom
}

/// `out(p) = img(p + flow(p))`, bilinearly interpolated with edge clamping.
pub fn backward_warp(img: &Image, flow: &FlowField) -> Result<Image> {
    ensure_same_dims("backward_warp", img.dims(), flow.dims())?;
    let (h, w, ch) = img.shape();
    let mut data = Vec::with_capacity(h * w * ch);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = flow.get(y, x);
            let sy = y as f64 + dy as f64;
            let sx = x as f64 + dx as f64;
            for c in 0..ch {
                data.push(sample_bilinear(img, sy, sx, c).clamp(0.0, 1.0) as f32);
            }
        }
    }
    Ok(Image::from_parts(h, w, ch, data))
}

/// Motion-residue map: element-wise `blur_flow - rs_flow`.
pub fn flow_diff(blur_flow: &FlowField, rs_flow: &FlowField) -> Result<FlowField> {
    ensure_same_dims("flow_diff", blur_flow.dims(), rs_flow.dims())?;
    FlowField::new(
        blur_flow.height(),
        blur_flow.width(),
        blur_flow
            .data()
            .iter()
            .zip(rs_flow.data())
            .map(|(a, b)| a - b)
            .collect(),
    )
}

/// Convex blend `m * a + (1 - m) * b`, the mask broadcast over channels.
pub fn aggregate_warped(a: &Image, b: &Image, mask: &MaskMap) -> Result<Image> {
    a.ensure_same_shape(b, "aggregate_warped")?;
    ensure_same_dims("aggregate_warped mask", a.dims(), mask.dims())?;
    let ch = a.channels();
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .enumerate()
        .map(|(i, (&va, &vb))| {
            let m = mask.data()[i / ch] as f64;
            (m * va as f64 + (1.0 - m) * vb as f64).clamp(0.0, 1.0) as f32
        })
        .collect();
    Ok(Image::from_parts(a.height(), a.width(), ch, data))
}

/// Per-pixel Euclidean norm of the flow vectors, in f64.
pub(crate) fn magnitudes(flow: &FlowField) -> Vec<f64> {
    flow.data()
        .chunks_exact(2)
        .map(|v| (v[0] as f64).hypot(v[1] as f64))
        .collect()
}

pub fn flow_magnitude(flow: &FlowField) -> ScalarField {
    let data = magnitudes(flow).into_iter().map(|m| m as f32).collect();
    ScalarField::new(flow.height(), flow.width(), data)
        .expect("magnitude of a finite flow is finite")
}

/// Sum of absolute differences between the block of `a` at `(top, left)` and
/// the same block of `b` displaced by `(dy, dx)`, edge-replicated.
fn block_sad(a: &Image, b: &Image, top: usize, left: usize, size: usize, dy: isize, dx: isize) -> f64 {
    let ch = a.channels();
    let mut sad = 0.0f64;
    for y in top..top + size {
        for x in left..left + size {
            let by = y as isize + dy;
            let bx = x as isize + dx;
            for c in 0..ch {
                sad += (a.get(y, x, c) as f64 - b.get_clamped(by, bx, c) as f64).abs();
            }
        }
    }
    sad
}

/// Integer block-matching flow from `a` to `b`.
///
/// Each `block`×`block` tile of `a` takes the displacement `d` in
/// `[-radius, radius]²` minimizing the SAD against `b(p + d)`. Ties go to the
/// smaller `|d|`, then to the lexicographically smaller `(dy, dx)`. The result
/// uses the same convention as [`backward_warp`]: `a(p) ≈ b(p + flow(p))`.
pub fn block_flow(a: &Image, b: &Image, block: usize, radius: usize) -> Result<FlowField> {
    a.ensure_same_shape(b, "block_flow")?;
    let (h, w) = a.dims();
    if block == 0 || h % block != 0 || w % block != 0 {
        return Err(Error::Argument(format!(
            "block size {block} must divide the {h}x{w} frame"
        )));
    }
    let r = radius as isize;
    let blocks_x = w / block;
    let n_blocks = (h / block) * blocks_x;

    let best: Vec<(isize, isize)> = (0..n_blocks)
        .into_par_iter()
        .map(|i| {
            let top = (i / blocks_x) * block;
            let left = (i % blocks_x) * block;
            let mut best = (f64::INFINITY, 0isize, 0isize, 0isize);
            for dy in -r..=r {
                for dx in -r..=r {
                    let sad = block_sad(a, b, top, left, block, dy, dx);
                    let mag = dy * dy + dx * dx;
                    let key = (sad, mag, dy, dx);
                    if key.0 < best.0
                        || (key.0 == best.0 && (key.1, key.2, key.3) < (best.1, best.2, best.3))
                    {
                        best = key;
                    }
                }
            }
            (best.3, best.2)
        })
        .collect();

    FlowField::from_fn(h, w, |y, x| {
        let (dx, dy) = best[(y / block) * blocks_x + x / block];
        (dx as f32, dy as f32)
    })
}
