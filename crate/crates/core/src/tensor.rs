//! Pixel, flow, mask and encoding containers.
//!
//! Every container validates its contents at construction and is immutable
//! afterwards. Storage is row-major with a top-left origin; `y` grows
//! downward, which is also the rolling-shutter scan direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ITU-R BT.601 luma weights used whenever an RGB frame is reduced to one channel.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

fn check_len(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape(format!(
            "{what}: expected {expected} elements, got {got}"
        )));
    }
    Ok(())
}

fn check_nonempty(what: &str, height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::Shape(format!("{what}: empty extent {height}x{width}")));
    }
    Ok(())
}

fn check_unit_range(what: &str, data: &[f32]) -> Result<()> {
    for (i, &v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("{what}: element {i} is {v}")));
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidValue(format!(
                "{what}: element {i} = {v} outside [0, 1]"
            )));
        }
    }
    Ok(())
}

fn check_finite(what: &str, data: &[f32]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Numeric(format!("{what}: element {i} is {}", data[i]))),
        None => Ok(()),
    }
}

/// H×W×C grid of intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_nonempty("image", height, width)?;
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!(
                "image: channels must be 1 or 3, got {channels}"
            )));
        }
        check_len("image", height * width * channels, data.len())?;
        check_unit_range("image", &data)?;
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds an image from `f(y, x, c)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    /// Internal constructor for operations whose output is in range by
    /// construction.
    pub(crate) fn from_parts(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// `(height, width, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Pixel at `(y, x)` with coordinates clamped into the image rectangle.
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize, c: usize) -> f32 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.get(y, x, c)
    }

    /// Row `y` as a slice of `width * channels` values.
    pub fn row(&self, y: usize) -> &[f32] {
        let stride = self.width * self.channels;
        &self.data[y * stride..(y + 1) * stride]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// Single-channel luminance plane in f64. Grayscale images are returned as-is.
    pub fn luma(&self) -> Vec<f64> {
        if self.channels == 1 {
            return self.data.iter().map(|&v| v as f64).collect();
        }
        self.data
            .chunks_exact(3)
            .map(|p| {
                LUMA_WEIGHTS[0] * p[0] as f64
                    + LUMA_WEIGHTS[1] * p[1] as f64
                    + LUMA_WEIGHTS[2] * p[2] as f64
            })
            .collect()
    }

    pub fn flip_horizontal(&self) -> Image {
        let c = self.channels;
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            let row = self.row(y);
            for x in (0..self.width).rev() {
                data.extend_from_slice(&row[x * c..(x + 1) * c]);
            }
        }
        Image::from_parts(self.height, self.width, c, data)
    }

    pub fn flip_vertical(&self) -> Image {
        let mut data = Vec::with_capacity(self.data.len());
        for y in (0..self.height).rev() {
            data.extend_from_slice(self.row(y));
        }
        Image::from_parts(self.height, self.width, self.channels, data)
    }

    /// Copies the `height`×`width` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Image> {
        check_nonempty("crop", height, width)?;
        if top + height > self.height || left + width > self.width {
            return Err(Error::Bounds(format!(
                "crop {height}x{width} at ({top}, {left}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(height * width * c);
        for y in top..top + height {
            let row = self.row(y);
            data.extend_from_slice(&row[left * c..(left + width) * c]);
        }
        Ok(Image::from_parts(height, width, c, data))
    }

    /// Square `size`×`size` crop centred on the image; odd margins put the
    /// extra pixel on the bottom/right.
    pub fn center_crop(&self, size: usize) -> Result<Image> {
        if size > self.height || size > self.width {
            return Err(Error::Bounds(format!(
                "center crop {size} exceeds {}x{}",
                self.height, self.width
            )));
        }
        self.crop((self.height - size) / 2, (self.width - size) / 2, size, size)
    }
}

/// Exposure window over a frame sequence, in frame units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureSchedule {
    pub exposure_len: usize,
    pub deadtime_len: usize,
    pub window_start: usize,
}

impl ExposureSchedule {
    pub fn new(exposure_len: usize, deadtime_len: usize, window_start: usize) -> Result<Self> {
        if exposure_len == 0 {
            return Err(Error::Argument("exposure_len must be at least 1".into()));
        }
        Ok(Self {
            exposure_len,
            deadtime_len,
            window_start,
        })
    }

    /// A window of `exposure_len` frames starting at `window_start`, no deadtime.
    pub fn window(window_start: usize, exposure_len: usize) -> Result<Self> {
        Self::new(exposure_len, 0, window_start)
    }

    /// One past the last frame index inside the exposure.
    pub fn end(&self) -> usize {
        self.window_start + self.exposure_len
    }

    /// Distance between consecutive window starts.
    pub fn period(&self) -> usize {
        self.exposure_len + self.deadtime_len
    }

    pub fn shifted(&self, delay: usize) -> Self {
        Self {
            window_start: self.window_start + delay,
            ..*self
        }
    }
}

/// Ordered latent frames sharing one shape.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Image>,
    schedule: ExposureSchedule,
}

impl FrameSequence {
    /// Sequence whose schedule spans every frame.
    pub fn new(frames: Vec<Image>) -> Result<Self> {
        let len = frames.len();
        let schedule = ExposureSchedule::new(len.max(1), 0, 0)?;
        Self::with_schedule(frames, schedule)
    }

    pub fn with_schedule(frames: Vec<Image>, schedule: ExposureSchedule) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Argument("frame sequence must hold at least one frame".into()))?;
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| !f.same_shape(first)) {
            return Err(Error::Shape(format!(
                "frame {i} has shape {:?}, frame 0 has {:?}",
                f.shape(),
                first.shape()
            )));
        }
        Ok(Self { frames, schedule })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Image> {
        self.frames
    }

    pub fn schedule(&self) -> ExposureSchedule {
        self.schedule
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, i: usize) -> &Image {
        &self.frames[i]
    }

    /// `(height, width, channels)` shared by all frames.
    pub fn shape(&self) -> (usize, usize, usize) {
        self.frames[0].shape()
    }

    pub(crate) fn ensure_same_shape(&self, other: &FrameSequence, what: &str) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "{what}: {} frames vs {} frames",
                self.len(),
                other.len()
            )));
        }
        self.frames[0].ensure_same_shape(&other.frames[0], what)
    }

    pub(crate) fn ensure_window(&self, window: &ExposureSchedule) -> Result<()> {
        if window.end() > self.len() {
            return Err(Error::Bounds(format!(
                "window [{}, {}) exceeds sequence of {} frames",
                window.window_start,
                window.end(),
                self.len()
            )));
        }
        Ok(())
    }

    pub fn map_frames(&self, f: impl FnMut(&Image) -> Image) -> FrameSequence {
        FrameSequence {
            frames: self.frames.iter().map(f).collect(),
            schedule: self.schedule,
        }
    }
}

/// Per-pixel displacement `(dx, dy)` in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FlowField {
    /// `data` holds interleaved `(dx, dy)` pairs, row-major.
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_nonempty("flow", height, width)?;
        check_len("flow", height * width * 2, data.len())?;
        check_finite("flow", &data)?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0.0; height * width * 2])
    }

    pub fn constant(height: usize, width: usize, dx: f32, dy: f32) -> Result<Self> {
        Self::from_fn(height, width, |_, _| (dx, dy))
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> (f32, f32),
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * 2);
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = f(y, x);
                data.push(dx);
                data.push(dy);
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> (f32, f32) {
        let i = (y * self.width + x) * 2;
        (self.data[i], self.data[i + 1])
    }

    /// Multiplies every component by `factor`.
    pub fn scaled(&self, factor: f32) -> Result<FlowField> {
        FlowField::new(
            self.height,
            self.width,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }
}

/// Per-pixel weights in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskMap {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl MaskMap {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_nonempty("mask", height, width)?;
        check_len("mask", height * width, data.len())?;
        check_unit_range("mask", &data)?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::new(height, width, data)
    }

    pub(crate) fn from_parts(height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

/// Signed per-pixel row offsets, bounded by `±(height - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodingMap {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl EncodingMap {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_nonempty("encoding", height, width)?;
        check_len("encoding", height * width, data.len())?;
        check_finite("encoding", &data)?;
        let bound = (height - 1) as f32;
        if let Some(i) = data.iter().position(|v| v.abs() > bound) {
            return Err(Error::InvalidValue(format!(
                "encoding: element {i} = {} outside [-{bound}, {bound}]",
                data[i]
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

/// Unbounded finite scalar per pixel, e.g. a flow magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ScalarField {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_nonempty("scalar field", height, width)?;
        check_len("scalar field", height * width, data.len())?;
        check_finite("scalar field", &data)?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }
}
