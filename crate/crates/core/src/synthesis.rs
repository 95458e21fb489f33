//! Forward degradation models: global-shutter blur as the mean of the frames
//! inside an exposure, and rolling-shutter readout as a row-by-row copy from
//! successive frames.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ExposureSchedule, FrameSequence, Image};

/// Placement of one synthesized triple inside its source sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleMeta {
    pub window_start: usize,
    pub exposure_len: usize,
    pub n_latent: usize,
}

/// Blur, rolling-shutter view and sharp targets over one exposure window.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleSample {
    pub blur: Image,
    pub rs: Image,
    pub gt: FrameSequence,
    pub meta: TripleMeta,
}

/// Per-pixel mean of the `exposure_len` frames starting at `window_start`.
pub fn blur_synthesize(seq: &FrameSequence, window: &ExposureSchedule) -> Result<Image> {
    seq.ensure_window(window)?;
    let (h, w, c) = seq.shape();
    let mut acc = vec![0.0f64; h * w * c];
    for frame in &seq.frames()[window.window_start..window.end()] {
        for (a, &v) in acc.iter_mut().zip(frame.data()) {
            *a += v as f64;
        }
    }
    let n = window.exposure_len as f64;
    let data = acc.into_iter().map(|s| (s / n) as f32).collect();
    Ok(Image::from_parts(h, w, c, data))
}

/// Row `k` of the output is row `k` of frame `window_start + k`.
///
/// The exposure must span exactly one frame per image row.
pub fn rs_synthesize(seq: &FrameSequence, window: &ExposureSchedule) -> Result<Image> {
    let (h, w, c) = seq.shape();
    if window.exposure_len != h {
        return Err(Error::Shape(format!(
            "rolling-shutter exposure must equal the image height: exposure_len {} vs height {h}",
            window.exposure_len
        )));
    }
    seq.ensure_window(window)?;
    let mut data = Vec::with_capacity(h * w * c);
    for k in 0..h {
        data.extend_from_slice(seq.frame(window.window_start + k).row(k));
    }
    Ok(Image::from_parts(h, w, c, data))
}

/// Window-relative indices `round(t * (L - 1) / (n - 1))` for `t in 0..n`,
/// rounding halves up.
pub fn latent_indices(window_len: usize, n: usize) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::Argument(format!("need at least 2 latent frames, got {n}")));
    }
    if n > window_len {
        return Err(Error::Argument(format!(
            "cannot sample {n} latent frames from a window of {window_len}"
        )));
    }
    let span = window_len - 1;
    let denom = n - 1;
    Ok((0..n)
        .map(|t| (2 * t * span + denom) / (2 * denom))
        .collect())
}

/// The `n` frames uniformly spaced across the exposure window, endpoints included.
pub fn sample_latent_targets(
    seq: &FrameSequence,
    window: &ExposureSchedule,
    n: usize,
) -> Result<FrameSequence> {
    seq.ensure_window(window)?;
    let frames = latent_indices(window.exposure_len, n)?
        .into_iter()
        .map(|i| seq.frame(window.window_start + i).clone())
        .collect();
    FrameSequence::with_schedule(frames, ExposureSchedule::new(n, 0, 0)?)
}

/// Number of windows of `exposure_len` frames, placed every
/// `exposure_len + deadtime_len` frames, that fit in `frame_count` frames.
pub fn window_count(frame_count: usize, exposure_len: usize, deadtime_len: usize) -> usize {
    if exposure_len == 0 || frame_count < exposure_len {
        return 0;
    }
    (frame_count - exposure_len) / (exposure_len + deadtime_len) + 1
}

/// Centre-crops every frame to `crop`×`crop`, tiles exposure windows with
/// the given deadtime and emits one aligned blur/RS/target triple per window.
///
/// Blur and RS views are computed from the same window, so they capture the
/// same content. `exposure_len` must equal `crop` for the RS readout.
pub fn synthesize_triples(
    seq: &FrameSequence,
    exposure_len: usize,
    deadtime_len: usize,
    n_latent: usize,
    crop: usize,
) -> Result<Vec<TripleSample>> {
    if exposure_len != crop {
        return Err(Error::Argument(format!(
            "exposure length {exposure_len} must equal the crop height {crop}"
        )));
    }
    if n_latent < 2 || n_latent > exposure_len {
        return Err(Error::Argument(format!(
            "n_latent must lie in [2, {exposure_len}], got {n_latent}"
        )));
    }
    let count = window_count(seq.len(), exposure_len, deadtime_len);
    if count == 0 {
        return Err(Error::Pipeline(format!(
            "insufficient frames: need at least {exposure_len}, sequence has {}",
            seq.len()
        )));
    }
    let cropped = seq
        .frames()
        .iter()
        .map(|f| f.center_crop(crop))
        .collect::<Result<Vec<_>>>()?;
    let cropped = FrameSequence::new(cropped)?;
    let period = exposure_len + deadtime_len;

    (0..count)
        .into_par_iter()
        .map(|i| {
            let window = ExposureSchedule::new(exposure_len, deadtime_len, i * period)?;
            Ok(TripleSample {
                blur: blur_synthesize(&cropped, &window)?,
                rs: rs_synthesize(&cropped, &window)?,
                gt: sample_latent_targets(&cropped, &window, n_latent)?,
                meta: TripleMeta {
                    window_start: window.window_start,
                    exposure_len,
                    n_latent,
                },
            })
        })
        .collect()
}
