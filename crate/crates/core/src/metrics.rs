//! Quality, alignment and temporal-consistency metrics.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flowops::block_flow;
use crate::tensor::{FrameSequence, Image};

/// PSNR reported for identical inputs.
pub const PSNR_CAP_DB: f64 = 100.0;
/// Ratio thresholds for the delta-accuracy alignment metric.
pub const DELTA_THRESHOLDS: [f64; 3] = [1.15, 1.25, 1.35];
/// Pixels darker than this are excluded from ratio-based metrics.
pub const DEFAULT_VALID_MIN: f64 = 1.0 / 255.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_shape(b, "mse")?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak signal-to-noise ratio for unit peak; `cap_db` when the inputs match.
pub fn psnr(a: &Image, b: &Image, cap_db: f64) -> Result<f64> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(cap_db);
    }
    Ok(10.0 * (1.0 / e).log10())
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian filter with edge replication.
fn gaussian_filter(plane: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                let sx = (x as isize + i as isize - r).clamp(0, w as isize - 1) as usize;
                acc += t * row[sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                let sy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
                acc += t * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Mean structural similarity over the luminance planes, using an 11×11
/// Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, unit dynamic range and
/// edge replication, evaluated at every pixel.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_shape(b, "ssim")?;
    let (h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Argument(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )));
    }
    let la = a.luma();
    let lb = b.luma();
    let taps = gaussian_taps();
    let product = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();

    let mu_a = gaussian_filter(&la, h, w, &taps);
    let mu_b = gaussian_filter(&lb, h, w, &taps);
    let e_aa = gaussian_filter(&product(&la, &la), h, w, &taps);
    let e_bb = gaussian_filter(&product(&lb, &lb), h, w, &taps);
    let e_ab = gaussian_filter(&product(&la, &lb), h, w, &taps);

    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let mut total = 0.0;
    for i in 0..h * w {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
        total += num / den;
    }
    Ok(total / (h * w) as f64)
}

/// Mean of `|d - gt| / gt` over elements with `gt >= valid_min`.
pub fn abs_rel(d: &Image, gt: &Image, valid_min: f64) -> Result<f64> {
    d.ensure_same_shape(gt, "abs_rel")?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (&p, &g) in d.data().iter().zip(gt.data()) {
        let g = g as f64;
        if g >= valid_min {
            sum += (p as f64 - g).abs() / g;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Degenerate(format!(
            "abs_rel: no ground-truth element reaches {valid_min}"
        )));
    }
    Ok(sum / n as f64)
}

/// Fraction of valid elements with `max(d / gt, gt / d) < thr`; an element is
/// valid when both values reach `valid_min`.
pub fn delta_accuracy(d: &Image, gt: &Image, thr: f64, valid_min: f64) -> Result<f64> {
    d.ensure_same_shape(gt, "delta_accuracy")?;
    if !(thr > 1.0) {
        return Err(Error::Argument(format!("delta threshold must exceed 1, got {thr}")));
    }
    let mut hits = 0usize;
    let mut n = 0usize;
    for (&p, &g) in d.data().iter().zip(gt.data()) {
        let (p, g) = (p as f64, g as f64);
        if p >= valid_min && g >= valid_min {
            n += 1;
            if (p / g).max(g / p) < thr {
                hits += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Degenerate(format!(
            "delta_accuracy: no element pair reaches {valid_min}"
        )));
    }
    Ok(hits as f64 / n as f64)
}

/// H×T image whose column `t` is column `x` of frame `t`.
pub fn temporal_profile(seq: &FrameSequence, x: usize) -> Result<Image> {
    let (h, w, ch) = seq.shape();
    if x >= w {
        return Err(Error::Bounds(format!("column {x} outside width {w}")));
    }
    let t_len = seq.len();
    let mut data = Vec::with_capacity(h * t_len * ch);
    for y in 0..h {
        for frame in seq.frames() {
            for c in 0..ch {
                data.push(frame.get(y, x, c));
            }
        }
    }
    Image::new(h, t_len, ch, data)
}

/// Temporal flow consistency: mean absolute difference between block-matched
/// flows of consecutive predicted frames and of consecutive target frames,
/// averaged over pixels, both components and all frame pairs.
pub fn tof(pred: &FrameSequence, gt: &FrameSequence, block: usize, radius: usize) -> Result<f64> {
    if pred.len() < 2 {
        return Err(Error::Argument(format!(
            "tof needs at least 2 frames, got {}",
            pred.len()
        )));
    }
    pred.ensure_same_shape(gt, "tof")?;
    let per_pair = (0..pred.len() - 1)
        .into_par_iter()
        .map(|t| {
            let fp = block_flow(pred.frame(t), pred.frame(t + 1), block, radius)?;
            let fg = block_flow(gt.frame(t), gt.frame(t + 1), block, radius)?;
            let sum: f64 = fp
                .data()
                .iter()
                .zip(fg.data())
                .map(|(&a, &b)| (a as f64 - b as f64).abs())
                .sum();
            Ok(sum / fp.data().len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_pair.iter().sum::<f64>() / per_pair.len() as f64)
}
