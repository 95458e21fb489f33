//! The SFT tensor container.
//!
//! Layout (all integers little-endian):
//!
//! | bytes  | content                                          |
//! |--------|--------------------------------------------------|
//! | 0..4   | magic `SFT1`                                     |
//! | 4      | kind: 0 image, 1 flow, 2 mask, 3 encoding        |
//! | 5      | dtype: 0 = f32                                   |
//! | 6..8   | reserved, zero                                   |
//! | 8..12  | height (u32)                                     |
//! | 12..16 | width (u32)                                      |
//! | 16..20 | channels (u32)                                   |
//! | 20..28 | reserved, zero                                   |
//! | 28..   | row-major f32 payload                            |
//!
//! Encoding is a pure function of the tensor, so equal tensors always
//! produce identical bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{EncodingMap, FlowField, Image, MaskMap};

pub const MAGIC: &[u8; 4] = b"SFT1";
pub const HEADER_LEN: usize = 28;
const DTYPE_F32: u8 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum TensorKind {
    Image = 0,
    Flow = 1,
    Mask = 2,
    Encoding = 3,
}

impl TensorKind {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(TensorKind::Image),
            1 => Some(TensorKind::Flow),
            2 => Some(TensorKind::Mask),
            3 => Some(TensorKind::Encoding),
            _ => None,
        }
    }
}

/// Anything that can be stored in an SFT container.
pub trait SftTensor {
    const KIND: TensorKind;

    /// `(height, width, channels)` as written to the header.
    fn sft_shape(&self) -> (usize, usize, usize);

    fn sft_payload(&self) -> &[f32];
}

impl SftTensor for Image {
    const KIND: TensorKind = TensorKind::Image;
    fn sft_shape(&self) -> (usize, usize, usize) {
        self.shape()
    }
    fn sft_payload(&self) -> &[f32] {
        self.data()
    }
}

impl SftTensor for FlowField {
    const KIND: TensorKind = TensorKind::Flow;
    fn sft_shape(&self) -> (usize, usize, usize) {
        (self.height(), self.width(), 2)
    }
    fn sft_payload(&self) -> &[f32] {
        self.data()
    }
}

impl SftTensor for MaskMap {
    const KIND: TensorKind = TensorKind::Mask;
    fn sft_shape(&self) -> (usize, usize, usize) {
        (self.height(), self.width(), 1)
    }
    fn sft_payload(&self) -> &[f32] {
        self.data()
    }
}

impl SftTensor for EncodingMap {
    const KIND: TensorKind = TensorKind::Encoding;
    fn sft_shape(&self) -> (usize, usize, usize) {
        (self.height(), self.width(), 1)
    }
    fn sft_payload(&self) -> &[f32] {
        self.data()
    }
}

/// A decoded container of any kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Tensor {
    Image(Image),
    Flow(FlowField),
    Mask(MaskMap),
    Encoding(EncodingMap),
}

impl Tensor {
    pub fn kind(&self) -> TensorKind {
        match self {
            Tensor::Image(_) => TensorKind::Image,
            Tensor::Flow(_) => TensorKind::Flow,
            Tensor::Mask(_) => TensorKind::Mask,
            Tensor::Encoding(_) => TensorKind::Encoding,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Tensor::Image(t) => encode(t),
            Tensor::Flow(t) => encode(t),
            Tensor::Mask(t) => encode(t),
            Tensor::Encoding(t) => encode(t),
        }
    }
}

impl From<Image> for Tensor {
    fn from(t: Image) -> Self {
        Tensor::Image(t)
    }
}

impl From<FlowField> for Tensor {
    fn from(t: FlowField) -> Self {
        Tensor::Flow(t)
    }
}

impl From<MaskMap> for Tensor {
    fn from(t: MaskMap) -> Self {
        Tensor::Mask(t)
    }
}

impl From<EncodingMap> for Tensor {
    fn from(t: EncodingMap) -> Self {
        Tensor::Encoding(t)
    }
}

pub fn encode<T: SftTensor>(t: &T) -> Vec<u8> {
    let (h, w, c) = t.sft_shape();
    let payload = t.sft_payload();
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() * 4);
    out.extend_from_slice(MAGIC);
    out.push(T::KIND as u8);
    out.push(DTYPE_F32);
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(c as u32).to_le_bytes());
    out.extend_from_slice(&[0; 8]);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Writes `t` to `path` in SFT form.
pub fn write_tensor<T: SftTensor>(path: impl AsRef<Path>, t: &T) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(t)).map_err(|e| Error::io(path, e))
}

/// Decodes an SFT byte buffer. `path` is only used to label errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let fail = |offset: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        msg,
    };

    if bytes.len() < HEADER_LEN {
        return Err(fail(
            bytes.len(),
            format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fail(0, format!("bad magic {:?}", &bytes[0..4])));
    }
    let kind = TensorKind::from_byte(bytes[4])
        .ok_or_else(|| fail(4, format!("unknown tensor kind {}", bytes[4])))?;
    if bytes[5] != DTYPE_F32 {
        return Err(fail(5, format!("unsupported dtype {}", bytes[5])));
    }
    if let Some(i) = (6..8).chain(20..28).find(|&i| bytes[i] != 0) {
        return Err(fail(i, "reserved byte is not zero".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (h, w, c) = (u32_at(8), u32_at(12), u32_at(16));

    let expected_c = match kind {
        TensorKind::Image => None,
        TensorKind::Flow => Some(2),
        TensorKind::Mask | TensorKind::Encoding => Some(1),
    };
    if let Some(ec) = expected_c {
        if c != ec {
            return Err(fail(16, format!("{kind:?} tensor must have {ec} channels, got {c}")));
        }
    }

    let count = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .ok_or_else(|| fail(8, "shape overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    let want = count * 4;
    if payload.len() < want {
        return Err(fail(
            bytes.len(),
            format!("truncated payload: {} of {want} bytes", payload.len()),
        ));
    }
    if payload.len() > want {
        return Err(fail(
            HEADER_LEN + want,
            format!("{} trailing bytes after payload", payload.len() - want),
        ));
    }

    let mut data = Vec::with_capacity(count);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(fail(HEADER_LEN + i * 4, format!("non-finite element {v}")));
        }
        data.push(v);
    }

    // Element-level range violations are reported at their byte offset.
    let range_check = |lo: f32, hi: f32, what: &str| -> Result<()> {
        match data.iter().position(|v| *v < lo || *v > hi) {
            Some(i) => Err(fail(
                HEADER_LEN + i * 4,
                format!("{what} element {} outside [{lo}, {hi}]", data[i]),
            )),
            None => Ok(()),
        }
    };
    let wrap = |e: Error| fail(8, e.to_string());
    Ok(match kind {
        TensorKind::Image => {
            range_check(0.0, 1.0, "image")?;
            Tensor::Image(Image::new(h, w, c, data).map_err(wrap)?)
        }
        TensorKind::Flow => Tensor::Flow(FlowField::new(h, w, data).map_err(wrap)?),
        TensorKind::Mask => {
            range_check(0.0, 1.0, "mask")?;
            Tensor::Mask(MaskMap::new(h, w, data).map_err(wrap)?)
        }
        TensorKind::Encoding => {
            let bound = h.saturating_sub(1) as f32;
            range_check(-bound, bound, "encoding")?;
            Tensor::Encoding(EncodingMap::new(h, w, data).map_err(wrap)?)
        }
    })
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

fn wrong_kind(path: &Path, want: TensorKind, got: TensorKind) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset: 4,
        msg: format!("expected {want:?} tensor, found {got:?}"),
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    match read_tensor(path)? {
        Tensor::Image(t) => Ok(t),
        other => Err(wrong_kind(path, TensorKind::Image, other.kind())),
    }
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    match read_tensor(path)? {
        Tensor::Flow(t) => Ok(t),
        other => Err(wrong_kind(path, TensorKind::Flow, other.kind())),
    }
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskMap> {
    let path = path.as_ref();
    match read_tensor(path)? {
        Tensor::Mask(t) => Ok(t),
        other => Err(wrong_kind(path, TensorKind::Mask, other.kind())),
    }
}

pub fn read_encoding(path: impl AsRef<Path>) -> Result<EncodingMap> {
    let path = path.as_ref();
    match read_tensor(path)? {
        Tensor::Encoding(t) => Ok(t),
        other => Err(wrong_kind(path, TensorKind::Encoding, other.kind())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.sft")
    }

    #[test]
    fn single_pixel_layout() {
        let img = Image::filled(1, 1, 1, 0.5).unwrap();
        let bytes = encode(&img);
        assert_eq!(bytes.len(), 32);
        assert_eq!(&bytes[0..4], b"SFT1");
        assert_eq!(bytes[4], 0);
        assert_eq!(bytes[5], 0);
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1u32.to_le_bytes());
        assert!(bytes[6..8].iter().chain(&bytes[20..28]).all(|&b| b == 0));
        assert_eq!(&bytes[28..32], &0.5f32.to_le_bytes());
    }

    #[test]
    fn kinds_and_channel_bytes() {
        let flow = FlowField::constant(2, 3, 1.0, -1.0).unwrap();
        let b = encode(&flow);
        assert_eq!(b[4], 1);
        assert_eq!(&b[16..20], &2u32.to_le_bytes());
        assert_eq!(b.len(), 28 + 2 * 3 * 2 * 4);
        assert_eq!(encode(&MaskMap::filled(1, 1, 1.0).unwrap())[4], 2);
        assert_eq!(encode(&EncodingMap::new(1, 1, vec![0.0]).unwrap())[4], 3);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut b = encode(&Image::filled(2, 2, 1, 0.25).unwrap());
        b[0] = b'X';
        match decode(&b, p()) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let b = encode(&Image::filled(2, 2, 3, 0.25).unwrap());
        assert!(matches!(decode(&b[..b.len() - 1], p()), Err(Error::Format { .. })));
        assert!(matches!(decode(&b[..10], p()), Err(Error::Format { .. })));
    }

    #[test]
    fn non_finite_reports_offset() {
        let mut b = encode(&FlowField::zeros(1, 2).unwrap());
        b[28 + 8..28 + 12].copy_from_slice(&f32::NAN.to_le_bytes());
        match decode(&b, p()) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 36),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_image_reports_offset() {
        let mut b = encode(&Image::filled(1, 3, 1, 0.0).unwrap());
        b[28 + 4..28 + 8].copy_from_slice(&1.5f32.to_le_bytes());
        match decode(&b, p()) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 32),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nonzero_reserved_and_bad_kind() {
        let base = encode(&Image::filled(1, 1, 1, 0.0).unwrap());
        let mut b = base.clone();
        b[25] = 1;
        assert!(matches!(decode(&b, p()), Err(Error::Format { offset: 25, .. })));
        let mut b = base.clone();
        b[4] = 9;
        assert!(matches!(decode(&b, p()), Err(Error::Format { offset: 4, .. })));
        let mut b = base;
        b[5] = 1;
        assert!(matches!(decode(&b, p()), Err(Error::Format { offset: 5, .. })));
    }
}
