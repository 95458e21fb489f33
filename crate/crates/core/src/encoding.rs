//! Temporal positional encodings for rolling-shutter input.
//!
//! Row `k` of a rolling-shutter image is read out at row-time `k`. Latent
//! frame `t` of `n` is placed on the same axis at `(H - 1) * t / (n - 1)`.
//! The relative map for frame `t` is the difference of the two, so its rows
//! read `k - (H - 1) * t / (n - 1)`.
//!
//! Values are raw row units; normalization is left to the consumer.

use crate::error::{Error, Result};
use crate::tensor::EncodingMap;

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height < 2 {
        return Err(Error::Argument(format!("height must be at least 2, got {height}")));
    }
    if width == 0 {
        return Err(Error::Argument("width must be positive".into()));
    }
    Ok(())
}

fn check_latent(n_latent: usize, t: usize) -> Result<()> {
    if n_latent < 2 {
        return Err(Error::Argument(format!("n_latent must be at least 2, got {n_latent}")));
    }
    if t >= n_latent {
        return Err(Error::Argument(format!(
            "latent index {t} out of range for {n_latent} frames"
        )));
    }
    Ok(())
}

/// `(k * (n - 1) - (H - 1) * t) / (n - 1)` rounded once to f32.
///
/// Numerator and denominator are exact integers in f32 for every supported
/// size, so the single division gives the correctly rounded value.
fn relative_value(row: usize, height: usize, n_latent: usize, t: usize) -> f32 {
    let den = (n_latent - 1) as i64;
    let num = row as i64 * den - (height as i64 - 1) * t as i64;
    num as f32 / den as f32
}

fn row_constant(height: usize, width: usize, f: impl Fn(usize) -> f32) -> Result<EncodingMap> {
    let mut data = Vec::with_capacity(height * width);
    for k in 0..height {
        data.extend(std::iter::repeat(f(k)).take(width));
    }
    EncodingMap::new(height, width, data)
}

/// Row-readout map: every pixel of row `k` holds `k`.
pub fn tpe_rs(height: usize, width: usize) -> Result<EncodingMap> {
    check_dims(height, width)?;
    row_constant(height, width, |k| k as f32)
}

/// Constant map holding latent frame `t`'s position on the row-time axis.
pub fn tpe_latent(height: usize, width: usize, n_latent: usize, t: usize) -> Result<EncodingMap> {
    check_dims(height, width)?;
    check_latent(n_latent, t)?;
    let value = ((height - 1) * t) as f32 / (n_latent - 1) as f32;
    row_constant(height, width, |_| value)
}

/// One relative map per latent frame, `tpe_rs - tpe_latent(t)`.
pub fn tpe_relative(height: usize, width: usize, n_latent: usize) -> Result<Vec<EncodingMap>> {
    check_dims(height, width)?;
    check_latent(n_latent, 0)?;
    (0..n_latent)
        .map(|t| row_constant(height, width, |k| relative_value(k, height, n_latent, t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(m: &EncodingMap) -> Vec<f32> {
        (0..m.height()).map(|k| m.get(k, 0)).collect()
    }

    #[test]
    fn rs_rows() {
        assert_eq!(column(&tpe_rs(2, 3).unwrap()), vec![0.0, 1.0]);
        assert_eq!(column(&tpe_rs(5, 1).unwrap()), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(tpe_rs(1, 1).is_err());
    }

    #[test]
    fn latent_constants() {
        assert!(tpe_latent(7, 2, 4, 0).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(tpe_latent(5, 2, 5, 2).unwrap().data().iter().all(|&v| v == 2.0));
        assert!(tpe_latent(9, 2, 3, 1).unwrap().data().iter().all(|&v| v == 4.0));
        assert!(tpe_latent(9, 2, 3, 3).is_err());
        assert!(tpe_latent(9, 2, 1, 0).is_err());
    }

    #[test]
    fn relative_maps() {
        let maps = tpe_relative(5, 2, 3).unwrap();
        assert_eq!(maps.len(), 3);
        assert_eq!(maps[0], tpe_rs(5, 2).unwrap());
        assert_eq!(column(&maps[1]), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(column(&maps[2]), vec![-4.0, -3.0, -2.0, -1.0, 0.0]);
    }

    #[test]
    fn zero_row_iff_integer_offset() {
        for h in 2..20usize {
            for n in 2..8usize {
                let maps = tpe_relative(h, 1, n).unwrap();
                for (t, m) in maps.iter().enumerate() {
                    let integral = ((h - 1) * t) % (n - 1) == 0;
                    let zero_row = column(m).iter().position(|&v| v == 0.0);
                    assert_eq!(zero_row.is_some(), integral, "h={h} n={n} t={t}");
                    if let Some(k) = zero_row {
                        assert_eq!(k, (h - 1) * t / (n - 1));
                    }
                }
            }
        }
    }

    #[test]
    fn sum_over_latents_closed_form() {
        for h in 2..=16usize {
            for n in 2..=8usize {
                let maps = tpe_relative(h, 1, n).unwrap();
                for k in 0..h {
                    let s: f64 = maps.iter().map(|m| m.get(k, 0) as f64).sum();
                    let expected = (n * k) as f64 - (h - 1) as f64 * n as f64 / 2.0;
                    // each stored term carries at most half an f32 ulp
                    let tol = 1e-6 * n as f64 * h as f64;
                    assert!((s - expected).abs() <= tol, "h={h} n={n} k={k}: {s} vs {expected}");
                }
            }
        }
    }
}
