//! Raster types shared by the renderer, the model adapters and the compositor.
//!
//! All three rasters are row-major with the origin at the top-left pixel.
//! PNG is the only interchange encoding: RGB as 8-bit truecolor, depth as
//! 16-bit grayscale scaled by 65535, masks as 8-bit grayscale with 0/255.

use std::io::Cursor;

use thiserror::Error;

/// Depth value stored at pixels not covered by any geometry.
pub const NO_HIT: f32 = 1.0;

/// Mask pixels decoded from 8-bit sources are set when their value is at
/// least this threshold.
pub const MASK_THRESHOLD: u8 = 128;

/// Upper bound on either raster dimension accepted by the PNG decoders.
pub const MAX_DIMENSION: u32 = 8192;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("invalid raster size {0}x{1}")]
    InvalidSize(u32, u32),
    #[error("png decode error: {0}")]
    Decode(String),
    #[error("png encode error: {0}")]
    Encode(String),
    #[error("unsupported png layout: {0}")]
    Unsupported(String),
}

fn check_size(width: u32, height: u32) -> Result<usize, RasterError> {
    if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(RasterError::InvalidSize(width, height));
    }
    Ok(width as usize * height as usize)
}

/// Returns an error unless both rasters have the given dimensions.
pub fn ensure_same_dims(
    expected: (u32, u32),
    actual: (u32, u32),
) -> Result<(), RasterError> {
    if expected != actual {
        return Err(RasterError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// 8-bit, 3-channel image.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RgbImage({}x{})", self.width, self.height)
    }
}

impl RgbImage {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        let n = check_size(width, height).expect("valid raster size");
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&color);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        let n = check_size(width, height)?;
        if data.len() != n * 3 {
            return Err(RasterError::InvalidSize(width, height));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: u32, col: u32) -> [u8; 3] {
        let i = (row as usize * self.width as usize + col as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, row: u32, col: u32, px: [u8; 3]) {
        let i = (row as usize * self.width as usize + col as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&px);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Rec. 601 luma of each pixel, in `0.0..=255.0`.
    pub fn luma(&self) -> Vec<f32> {
        self.pixels()
            .map(|[r, g, b]| (299 * r as u32 + 587 * g as u32 + 114 * b as u32) as f32 / 1000.0)
            .collect()
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        encode_png(
            self.width,
            self.height,
            png::ColorType::Rgb,
            png::BitDepth::Eight,
            &self.data,
        )
    }

    /// Decodes 8-bit RGB, RGBA, gray or gray-alpha PNGs. Alpha is dropped.
    pub fn from_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let decoded = decode_png(bytes)?;
        if decoded.bit_depth != png::BitDepth::Eight {
            return Err(RasterError::Unsupported(format!(
                "rgb image must be 8-bit, got {:?}",
                decoded.bit_depth
            )));
        }
        let channels = decoded.color.samples();
        let data: Vec<u8> = match decoded.color {
            png::ColorType::Rgb => decoded.data,
            png::ColorType::Rgba => decoded
                .data
                .chunks_exact(channels)
                .flat_map(|c| [c[0], c[1], c[2]])
                .collect(),
            png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => decoded
                .data
                .chunks_exact(channels)
                .flat_map(|c| [c[0], c[0], c[0]])
                .collect(),
            other => {
                return Err(RasterError::Unsupported(format!("color type {other:?}")));
            }
        };
        Self::from_raw(decoded.width, decoded.height, data)
    }
}

/// Per-pixel normalized depth in `[0, 1]`; [`NO_HIT`] marks background.
#[derive(Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl std::fmt::Debug for DepthMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DepthMap({}x{})", self.width, self.height)
    }
}

impl DepthMap {
    pub fn empty(width: u32, height: u32) -> Self {
        let n = check_size(width, height).expect("valid raster size");
        Self {
            width,
            height,
            data: vec![NO_HIT; n],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<f32>) -> Result<Self, RasterError> {
        let n = check_size(width, height)?;
        if data.len() != n || data.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(RasterError::InvalidSize(width, height));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: u32, col: u32) -> f32 {
        self.data[row as usize * self.width as usize + col as usize]
    }

    pub fn set(&mut self, row: u32, col: u32, value: f32) {
        self.data[row as usize * self.width as usize + col as usize] = value;
    }

    pub fn is_hit(&self, row: u32, col: u32) -> bool {
        self.get(row, col) < NO_HIT
    }

    /// Pixels covered by geometry.
    pub fn coverage(&self) -> MaskImage {
        MaskImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&d| d < NO_HIT).collect(),
        }
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        let mut bytes = Vec::with_capacity(self.data.len() * 2);
        for &d in &self.data {
            let v = (d.clamp(0.0, 1.0) * 65535.0).round() as u16;
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        encode_png(
            self.width,
            self.height,
            png::ColorType::Grayscale,
            png::BitDepth::Sixteen,
            &bytes,
        )
    }

    /// Decodes a 16-bit (or 8-bit) grayscale PNG into normalized depth.
    pub fn from_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let decoded = decode_png(bytes)?;
        if decoded.color != png::ColorType::Grayscale {
            return Err(RasterError::Unsupported(format!(
                "depth must be grayscale, got {:?}",
                decoded.color
            )));
        }
        let data: Vec<f32> = match decoded.bit_depth {
            png::BitDepth::Sixteen => decoded
                .data
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / 65535.0)
                .collect(),
            png::BitDepth::Eight => decoded.data.iter().map(|&v| v as f32 / 255.0).collect(),
            other => {
                return Err(RasterError::Unsupported(format!("depth bit depth {other:?}")));
            }
        };
        Self::from_raw(decoded.width, decoded.height, data)
    }
}

/// Binary single-channel raster.
#[derive(Clone, PartialEq, Eq)]
pub struct MaskImage {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl std::fmt::Debug for MaskImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MaskImage({}x{}, {} set)", self.width, self.height, self.count())
    }
}

impl MaskImage {
    pub fn empty(width: u32, height: u32) -> Self {
        Self::filled(width, height, false)
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        let n = check_size(width, height).expect("valid raster size");
        Self {
            width,
            height,
            data: vec![value; n],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<bool>) -> Result<Self, RasterError> {
        let n = check_size(width, height)?;
        if data.len() != n {
            return Err(RasterError::InvalidSize(width, height));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds a mask from a predicate over `(row, col)`.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut mask = Self::empty(width, height);
        for row in 0..height {
            for col in 0..width {
                if f(row, col) {
                    mask.set(row, col, true);
                }
            }
        }
        mask
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, row: u32, col: u32) -> bool {
        self.data[row as usize * self.width as usize + col as usize]
    }

    pub fn set(&mut self, row: u32, col: u32, value: bool) {
        self.data[row as usize * self.width as usize + col as usize] = value;
    }

    /// Number of set pixels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Tight bounding box of the set pixels as `(top, left, bottom, right)`,
    /// inclusive, or `None` for an empty mask.
    pub fn bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        let mut bbox: Option<(u32, u32, u32, u32)> = None;
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(row, col) {
                    bbox = Some(match bbox {
                        None => (row, col, row, col),
                        Some((t, l, b, r)) => (t.min(row), l.min(col), b.max(row), r.max(col)),
                    });
                }
            }
        }
        bbox
    }

    pub(crate) fn zip_with(&self, other: &MaskImage, f: impl Fn(bool, bool) -> bool) -> Result<MaskImage, RasterError> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(MaskImage {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        let bytes: Vec<u8> = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        encode_png(
            self.width,
            self.height,
            png::ColorType::Grayscale,
            png::BitDepth::Eight,
            &bytes,
        )
    }

    /// Decodes any 8-bit PNG; a pixel is set when its first channel is at
    /// least [`MASK_THRESHOLD`].
    pub fn from_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let decoded = decode_png(bytes)?;
        if decoded.bit_depth != png::BitDepth::Eight {
            return Err(RasterError::Unsupported(format!(
                "mask must be 8-bit, got {:?}",
                decoded.bit_depth
            )));
        }
        let channels = decoded.color.samples();
        if decoded.color == png::ColorType::Indexed {
            return Err(RasterError::Unsupported("indexed mask".into()));
        }
        let data = decoded
            .data
            .chunks_exact(channels)
            .map(|c| c[0] >= MASK_THRESHOLD)
            .collect();
        Self::from_raw(decoded.width, decoded.height, data)
    }
}

struct DecodedPng {
    width: u32,
    height: u32,
    color: png::ColorType,
    bit_depth: png::BitDepth,
    data: Vec<u8>,
}

fn decode_png(bytes: &[u8]) -> Result<DecodedPng, RasterError> {
    let limits = png::Limits {
        bytes: (MAX_DIMENSION as usize) * (MAX_DIMENSION as usize) * 8,
    };
    let decoder = png::Decoder::new_with_limits(Cursor::new(bytes), limits);
    let mut reader = decoder
        .read_info()
        .map_err(|e| RasterError::Decode(e.to_string()))?;
    let (width, height) = {
        let info = reader.info();
        (info.width, info.height)
    };
    check_size(width, height)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| RasterError::Decode("image too large".into()))?;
    let mut buf = vec![0; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| RasterError::Decode(e.to_string()))?;
    buf.truncate(frame.buffer_size());
    Ok(DecodedPng {
        width: frame.width,
        height: frame.height,
        color: frame.color_type,
        bit_depth: frame.bit_depth,
        data: buf,
    })
}

fn encode_png(
    width: u32,
    height: u32,
    color: png::ColorType,
    depth: png::BitDepth,
    data: &[u8],
) -> Result<Vec<u8>, RasterError> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width, height);
        encoder.set_color(color);
        encoder.set_depth(depth);
        let mut writer = encoder
            .write_header()
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        writer
            .write_image_data(data)
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        writer
            .finish()
            .map_err(|e| RasterError::Encode(e.to_string()))?;
    }
    Ok(out)
}
