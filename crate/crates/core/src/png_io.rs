//! PNG import/export for 8- and 16-bit grayscale or RGB frames.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            _ => Err(Error::Argument(format!("bit depth must be 8 or 16, got {bits}"))),
        }
    }

    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

/// Reads a grayscale or RGB PNG whose sample depth equals `depth`, dividing
/// every sample by `2^depth - 1`.
pub fn png_import(path: impl AsRef<Path>, depth: BitDepth) -> Result<Image> {
    let path = path.as_ref();
    let import_err = |msg: String| Error::Import {
        path: path.to_path_buf(),
        msg,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| import_err(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| import_err("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| import_err(e.to_string()))?;
    buf.truncate(info.buffer_size());

    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(import_err(format!("unsupported color type {other:?}"))),
    };
    let file_depth = match info.bit_depth {
        png::BitDepth::Eight => BitDepth::Eight,
        png::BitDepth::Sixteen => BitDepth::Sixteen,
        other => return Err(import_err(format!("unsupported bit depth {other:?}"))),
    };
    if file_depth != depth {
        return Err(import_err(format!(
            "file is {file_depth:?}-bit, {depth:?}-bit requested"
        )));
    }

    let scale = depth.max_value();
    let data: Vec<f32> = match depth {
        BitDepth::Eight => buf.iter().map(|&v| (v as f64 / scale) as f32).collect(),
        BitDepth::Sixteen => buf
            .chunks_exact(2)
            .map(|b| (u16::from_be_bytes([b[0], b[1]]) as f64 / scale) as f32)
            .collect(),
    };
    Image::new(info.height as usize, info.width as usize, channels, data)
        .map_err(|e| import_err(e.to_string()))
}

/// Writes `img` as PNG, rounding each intensity to the nearest code value.
pub fn png_export(path: impl AsRef<Path>, img: &Image, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), img.width() as u32, img.height() as u32);
    encoder.set_color(if img.channels() == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    let scale = depth.max_value();
    let bytes: Vec<u8> = match depth {
        BitDepth::Eight => {
            encoder.set_depth(png::BitDepth::Eight);
            img.data()
                .iter()
                .map(|&v| (v as f64 * scale).round() as u8)
                .collect()
        }
        BitDepth::Sixteen => {
            encoder.set_depth(png::BitDepth::Sixteen);
            img.data()
                .iter()
                .flat_map(|&v| ((v as f64 * scale).round() as u16).to_be_bytes())
                .collect()
        }
    };
    let export_err = |e: png::EncodingError| Error::Import {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    let mut writer = encoder.write_header().map_err(export_err)?;
    writer.write_image_data(&bytes).map_err(export_err)?;
    writer.finish().map_err(export_err)
}
