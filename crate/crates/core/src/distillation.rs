//! Region-adaptive distillation masks and the training losses they feed.
//!
//! Three binary or normalized masks pick out where flow supervision from a
//! privileged teacher matters most:
//!
//! * dynamic: flow magnitudes that are upper outliers by the IQR rule,
//! * boundary: min-max normalized Sobel gradient magnitude of the targets,
//! * error: pixels where the student reconstruction is worse than the teacher's.
//!
//! They are blended into one mask that weights an L1 flow-matching loss.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::flowops::magnitudes;
use crate::tensor::{FlowField, FrameSequence, Image, MaskMap};

/// Outlier coefficient for the dynamic mask.
pub const DEFAULT_OUTLIER_K: f64 = 2.0;
/// Charbonnier smoothing constant.
pub const DEFAULT_CHARBONNIER_EPS: f64 = 1e-3;
/// Weight of the distillation term in the total objective.
pub const DEFAULT_LAMBDA_D: f64 = 1e-4;

/// Blend weights for the dynamic, boundary and error masks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskWeights {
    pub w_d: f64,
    pub w_b: f64,
    pub w_e: f64,
}

impl MaskWeights {
    pub fn new(w_d: f64, w_b: f64, w_e: f64) -> Result<Self> {
        for w in [w_d, w_b, w_e] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Argument(format!("mask weight {w} outside [0, 1]")));
            }
        }
        if (w_d + w_b + w_e - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "mask weights must sum to 1, got {}",
                w_d + w_b + w_e
            )));
        }
        Ok(Self { w_d, w_b, w_e })
    }
}

impl Default for MaskWeights {
    /// The plain mean of the three masks.
    fn default() -> Self {
        Self {
            w_d: 1.0 / 3.0,
            w_b: 1.0 / 3.0,
            w_e: 1.0 / 3.0,
        }
    }
}

/// Percentile `p` in `[0, 1]` of already sorted data, linearly interpolating
/// between order statistics at rank `p * (n - 1)`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = p * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Marks pixels whose flow magnitude exceeds `Q3 + k * (Q3 - Q1)`.
pub fn mask_dynamic(flow: &FlowField, k: f64) -> Result<MaskMap> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::Argument(format!("outlier coefficient must be non-negative, got {k}")));
    }
    let mags = magnitudes(flow);
    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let q1 = percentile_sorted(&sorted, 0.25);
    let q3 = percentile_sorted(&sorted, 0.75);
    let threshold = q3 + k * (q3 - q1);
    let data = mags
        .iter()
        .map(|&m| if m > threshold { 1.0 } else { 0.0 })
        .collect();
    Ok(MaskMap::from_parts(flow.height(), flow.width(), data))
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

fn sobel_magnitude(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let at = |y: isize, x: isize| {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        plane[y * w + x]
    };
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut gx, mut gy) = (0.0, 0.0);
            for (j, (kx_row, ky_row)) in SOBEL_X.iter().zip(&SOBEL_Y).enumerate() {
                for i in 0..3 {
                    let v = at(y + j as isize - 1, x + i as isize - 1);
                    gx += kx_row[i] * v;
                    gy += ky_row[i] * v;
                }
            }
            out.push(gx.hypot(gy));
        }
    }
    out
}

/// Min-max normalized Sobel gradient magnitude of one frame's luminance.
/// A flat response yields an all-zero mask.
pub fn boundary_mask(frame: &Image) -> MaskMap {
    let (h, w) = frame.dims();
    let grad = sobel_magnitude(&frame.luma(), h, w);
    let (lo, hi) = grad
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| (lo.min(g), hi.max(g)));
    let data = if hi > lo {
        let range = hi - lo;
        grad.iter().map(|&g| ((g - lo) / range) as f32).collect()
    } else {
        vec![0.0; h * w]
    };
    MaskMap::from_parts(h, w, data)
}

/// Boundary mask of every target frame.
pub fn mask_boundary(gt: &FrameSequence) -> Vec<MaskMap> {
    gt.frames().iter().map(boundary_mask).collect()
}

/// Marks pixels where the student's channel-summed L1 error against the
/// target strictly exceeds the teacher's.
pub fn error_mask(student: &Image, teacher: &Image, gt: &Image) -> Result<MaskMap> {
    student.ensure_same_shape(teacher, "mask_error")?;
    student.ensure_same_shape(gt, "mask_error")?;
    let ch = student.channels();
    let data = student
        .data()
        .chunks_exact(ch)
        .zip(teacher.data().chunks_exact(ch))
        .zip(gt.data().chunks_exact(ch))
        .map(|((s, t), g)| {
            let mut es = 0.0f64;
            let mut et = 0.0f64;
            for c in 0..ch {
                es += (s[c] as f64 - g[c] as f64).abs();
                et += (t[c] as f64 - g[c] as f64).abs();
            }
            if es > et {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(MaskMap::from_parts(student.height(), student.width(), data))
}

/// Error mask per frame.
pub fn mask_error(
    student: &FrameSequence,
    teacher: &FrameSequence,
    gt: &FrameSequence,
) -> Result<Vec<MaskMap>> {
    student.ensure_same_shape(teacher, "mask_error")?;
    student.ensure_same_shape(gt, "mask_error")?;
    student
        .frames()
        .iter()
        .zip(teacher.frames())
        .zip(gt.frames())
        .map(|((s, t), g)| error_mask(s, t, g))
        .collect()
}

/// Weighted sum `w_d * m_d + w_b * m_b + w_e * m_e`.
pub fn mask_combine(
    m_d: &MaskMap,
    m_b: &MaskMap,
    m_e: &MaskMap,
    weights: &MaskWeights,
) -> Result<MaskMap> {
    ensure_same_dims("mask_combine", m_d.dims(), m_b.dims())?;
    ensure_same_dims("mask_combine", m_d.dims(), m_e.dims())?;
    let data = m_d
        .data()
        .iter()
        .zip(m_b.data())
        .zip(m_e.data())
        .map(|((&d, &b), &e)| {
            let v = weights.w_d * d as f64 + weights.w_b * b as f64 + weights.w_e * e as f64;
            // weights sum to 1 only within 1e-9
            v.clamp(0.0, 1.0) as f32
        })
        .collect();
    Ok(MaskMap::from_parts(m_d.height(), m_d.width(), data))
}

/// Masked L1 flow distillation loss, averaged over flows, pixels and both
/// flow components.
///
/// `masks` holds either a single mask shared by every flow or one mask per flow.
pub fn loss_distill(student: &[FlowField], teacher: &[FlowField], masks: &[MaskMap]) -> Result<f64> {
    if student.is_empty() || student.len() != teacher.len() {
        return Err(Error::Shape(format!(
            "loss_distill: {} student flows vs {} teacher flows",
            student.len(),
            teacher.len()
        )));
    }
    if masks.len() != 1 && masks.len() != student.len() {
        return Err(Error::Shape(format!(
            "loss_distill: need 1 or {} masks, got {}",
            student.len(),
            masks.len()
        )));
    }
    let mut total = 0.0f64;
    let mut count = 0usize;
    for (i, (fs, ft)) in student.iter().zip(teacher).enumerate() {
        let m = &masks[if masks.len() == 1 { 0 } else { i }];
        ensure_same_dims("loss_distill", fs.dims(), ft.dims())?;
        ensure_same_dims("loss_distill mask", fs.dims(), m.dims())?;
        for (p, (a, b)) in fs.data().chunks_exact(2).zip(ft.data().chunks_exact(2)).enumerate() {
            let w = m.data()[p] as f64;
            total += w * ((a[0] as f64 - b[0] as f64).abs() + (a[1] as f64 - b[1] as f64).abs());
        }
        count += fs.data().len();
    }
    Ok(total / count as f64)
}

/// How the Charbonnier penalty is applied to a residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharbonnierMode {
    /// Mean over elements of `sqrt(d^2 + eps^2)`.
    #[default]
    Elementwise,
    /// `sqrt(sum(d^2) + eps^2)` over the whole residual.
    Global,
}

/// Charbonnier reconstruction loss between two clips.
///
/// The elementwise form is evaluated as `eps + mean(d^2 / (sqrt(d^2 + eps^2) + eps))`,
/// which is algebraically identical and returns exactly `eps` for a zero residual.
pub fn loss_charbonnier(
    s: &FrameSequence,
    g: &FrameSequence,
    eps: f64,
    mode: CharbonnierMode,
) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Argument(format!("eps must be positive, got {eps}")));
    }
    s.ensure_same_shape(g, "loss_charbonnier")?;
    let diffs = s
        .frames()
        .iter()
        .zip(g.frames())
        .flat_map(|(a, b)| a.data().iter().zip(b.data()))
        .map(|(&a, &b)| a as f64 - b as f64);
    match mode {
        CharbonnierMode::Elementwise => {
            let mut excess = 0.0f64;
            let mut n = 0usize;
            for d in diffs {
                let d2 = d * d;
                excess += d2 / ((d2 + eps * eps).sqrt() + eps);
                n += 1;
            }
            Ok(eps + excess / n as f64)
        }
        CharbonnierMode::Global => {
            let sq: f64 = diffs.map(|d| d * d).sum();
            Ok((sq + eps * eps).sqrt())
        }
    }
}

/// `l_rec + l_rec_teacher + lambda_d * l_dis`.
pub fn loss_total(l_rec: f64, l_rec_teacher: f64, l_dis: f64, lambda_d: f64) -> Result<f64> {
    for (name, v) in [
        ("l_rec", l_rec),
        ("l_rec_t", l_rec_teacher),
        ("l_dis", l_dis),
        ("lambda_d", lambda_d),
    ] {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("{name} = {v}")));
        }
    }
    Ok(l_rec + l_rec_teacher + lambda_d * l_dis)
}
