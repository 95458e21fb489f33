//! Seeded robustness perturbations: spatial misalignment, delayed
//! rolling-shutter exposure, low-light photon noise and stereo disparity.
//!
//! Every operation is a deterministic function of its inputs and seed.
//! Per-pixel randomness comes from a stream keyed on `(seed, element index)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::flowops::sample_bilinear;
use crate::rng;
use crate::synthesis::rs_synthesize;
use crate::tensor::{ExposureSchedule, FrameSequence, Image, MaskMap};

/// Maximum offsets evaluated for spatial misalignment.
pub const SPATIAL_SHIFT_OFFSETS: [usize; 3] = [4, 6, 8];
/// Range of the exposure delay, in frames, for temporal misalignment.
pub const TEMPORAL_DELAY_RANGE: (usize, usize) = (5, 15);
/// Photon peaks evaluated for low-light noise.
pub const LOW_LIGHT_PEAKS: [f64; 3] = [300.0, 500.0, 800.0];
/// Default range for the random gamma applied before photon noise.
pub const DEFAULT_GAMMA_RANGE: (f64, f64) = (2.0, 3.5);
/// Disparity upper bounds evaluated for stereo synthesis.
pub const STEREO_D_UP: [f64; 4] = [20.0, 25.0, 30.0, 35.0];

/// Above this mean, Poisson draws use a rounded normal approximation.
pub const POISSON_NORMAL_CUTOVER: f64 = 1000.0;
/// Largest mean handled by a single inversion pass; bigger means are split
/// into independent pieces so `exp(-mean)` never underflows.
const POISSON_INVERSION_CHUNK: f64 = 32.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbKind {
    SpatialShift {
        max_offset: usize,
    },
    TemporalShift {
        lo: usize,
        hi: usize,
    },
    LowLight {
        peak: f64,
        gamma_lo: f64,
        gamma_hi: f64,
    },
    /// Horizontal disparity `d_up * disparity`. The disparity map is either a
    /// constant or an SFT mask file.
    Stereo {
        d_up: f64,
        #[serde(default)]
        disparity: f32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        disparity_path: Option<String>,
    },
}

impl PerturbKind {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbKind::SpatialShift { .. } => "spatial_shift",
            PerturbKind::TemporalShift { .. } => "temporal_shift",
            PerturbKind::LowLight { .. } => "low_light",
            PerturbKind::Stereo { .. } => "stereo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    #[serde(flatten)]
    pub kind: PerturbKind,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn new(kind: PerturbKind, seed: u64) -> Result<Self> {
        let spec = Self { kind, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            PerturbKind::SpatialShift { .. } => Ok(()),
            PerturbKind::TemporalShift { lo, hi } => {
                if lo > hi {
                    return Err(Error::Argument(format!("temporal shift range [{lo}, {hi}] is empty")));
                }
                Ok(())
            }
            PerturbKind::LowLight {
                peak,
                gamma_lo,
                gamma_hi,
            } => check_low_light(*peak, (*gamma_lo, *gamma_hi)),
            PerturbKind::Stereo { d_up, disparity, .. } => {
                check_d_up(*d_up)?;
                if !(0.0..=1.0).contains(disparity) {
                    return Err(Error::Argument(format!(
                        "constant disparity {disparity} outside [0, 1]"
                    )));
                }
                Ok(())
            }
        }
    }
}

fn check_low_light(peak: f64, (g_lo, g_hi): (f64, f64)) -> Result<()> {
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::Argument(format!("photon peak must be positive, got {peak}")));
    }
    if !(g_lo.is_finite() && g_hi.is_finite() && g_lo > 0.0 && g_lo <= g_hi) {
        return Err(Error::Argument(format!(
            "gamma range must satisfy 0 < lo <= hi, got [{g_lo}, {g_hi}]"
        )));
    }
    Ok(())
}

fn check_d_up(d_up: f64) -> Result<()> {
    if !(d_up.is_finite() && d_up >= 0.0) {
        return Err(Error::Argument(format!("d_up must be non-negative, got {d_up}")));
    }
    Ok(())
}

/// Translates by `(dx, dy)`: `out(y, x) = img(y - dy, x - dx)`, edge-replicated.
pub fn translate(img: &Image, dx: isize, dy: isize) -> Image {
    let (h, w, ch) = img.shape();
    let mut data = Vec::with_capacity(h * w * ch);
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                data.push(img.get_clamped(y as isize - dy, x as isize - dx, c));
            }
        }
    }
    Image::from_parts(h, w, ch, data)
}

/// Random integer translation with `dx, dy` uniform in `[-max_offset, max_offset]`.
pub fn spatial_shift(img: &Image, max_offset: usize, seed: u64) -> Result<(Image, isize, isize)> {
    let (h, w) = img.dims();
    if max_offset >= h.min(w) {
        return Err(Error::Argument(format!(
            "max offset {max_offset} must be smaller than min(H, W) = {}",
            h.min(w)
        )));
    }
    let m = max_offset as isize;
    let mut g = rng::global(seed);
    let dx = g.gen_range(-m..=m);
    let dy = g.gen_range(-m..=m);
    Ok((translate(img, dx, dy), dx, dy))
}

/// Rolling-shutter view whose exposure starts `delta` frames late, with
/// `delta` uniform in `[lo, hi]`.
pub fn temporal_shift_rs(
    seq: &FrameSequence,
    window: &ExposureSchedule,
    (lo, hi): (usize, usize),
    seed: u64,
) -> Result<(Image, usize)> {
    if lo > hi {
        return Err(Error::Argument(format!("delay range [{lo}, {hi}] is empty")));
    }
    let needed = window.end() + hi;
    if needed > seq.len() {
        return Err(Error::Bounds(format!(
            "delayed exposure needs {needed} frames, sequence has {}",
            seq.len()
        )));
    }
    let delta = rng::global(seed).gen_range(lo..=hi);
    Ok((rs_synthesize(seq, &window.shifted(delta))?, delta))
}

/// Draws from `Poisson(mean)`.
///
/// Means up to [`POISSON_NORMAL_CUTOVER`] are sampled exactly by sequential
/// inversion, splitting the mean into pieces of at most 32 so the starting
/// probability stays representable. Larger means use
/// `round(mean + sqrt(mean) * z)` with a Box-Muller normal `z`.
pub fn poisson_sample(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean > POISSON_NORMAL_CUTOVER {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        return (mean + mean.sqrt() * z).round().max(0.0) as u64;
    }
    let pieces = (mean / POISSON_INVERSION_CHUNK).ceil();
    let piece_mean = mean / pieces;
    let start = (-piece_mean).exp();
    let mut total = 0u64;
    for _ in 0..pieces as usize {
        let u: f64 = rng.gen();
        let mut k = 0u64;
        let mut p = start;
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= piece_mean / k as f64;
            if p == 0.0 {
                break;
            }
            cdf += p;
        }
        total += k;
    }
    total
}

/// Low-light simulation with a fixed gamma:
/// `y = Poisson(x^gamma * peak) / peak`, clamped to `[0, 1]`.
pub fn low_light_with_gamma(img: &Image, peak: f64, gamma: f64, seed: u64) -> Result<Image> {
    check_low_light(peak, (gamma, gamma))?;
    let base = rng::global(seed);
    let data: Vec<f32> = img
        .data()
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let mean = (v.clamp(0.0, 1.0) as f64).powf(gamma) * peak;
            let mut r = rng::element_stream(&base, i);
            let k = poisson_sample(mean, &mut r);
            (k as f64 / peak).min(1.0) as f32
        })
        .collect();
    let (h, w, c) = img.shape();
    Ok(Image::from_parts(h, w, c, data))
}

/// Low-light simulation: one gamma drawn uniformly from `gamma_range` for the
/// whole image, then per-element photon noise at the given peak.
/// Returns the image and the gamma used.
pub fn low_light(
    img: &Image,
    peak: f64,
    gamma_range: (f64, f64),
    seed: u64,
) -> Result<(Image, f64)> {
    check_low_light(peak, gamma_range)?;
    let gamma = if gamma_range.0 == gamma_range.1 {
        gamma_range.0
    } else {
        rng::global(seed).gen_range(gamma_range.0..=gamma_range.1)
    };
    Ok((low_light_with_gamma(img, peak, gamma, seed)?, gamma))
}

/// Horizontal backward warp by `d_up * disparity(p)` with bilinear sampling
/// and edge clamping.
pub fn stereo_shift(img: &Image, disparity: &MaskMap, d_up: f64) -> Result<Image> {
    ensure_same_dims("stereo_shift", img.dims(), disparity.dims())?;
    check_d_up(d_up)?;
    if d_up == 0.0 {
        return Ok(img.clone());
    }
    let (h, w, ch) = img.shape();
    let mut data = Vec::with_capacity(h * w * ch);
    for y in 0..h {
        for x in 0..w {
            let sx = x as f64 + d_up * disparity.get(y, x) as f64;
            for c in 0..ch {
                data.push(sample_bilinear(img, y as f64, sx, c).clamp(0.0, 1.0) as f32);
            }
        }
    }
    Ok(Image::from_parts(h, w, ch, data))
}
