//! 8-bit raster frames and bilinear sampling shared by augmentation and
//! backbone preprocessing.

use std::path::Path;

use image::{DynamicImage, GenericImageView};

use crate::data::DataError;
use crate::error::{Error, Result};

/// Row-major, channel-interleaved 8-bit image with 1 (gray) or 3 (RGB)
/// channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self, DataError> {
        if width == 0 || height == 0 {
            return Err(DataError::Invalid(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(DataError::Invalid(format!(
                "image must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(DataError::Invalid(format!(
                "pixel buffer holds {} bytes, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        Ok(RawImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels])
            .expect("valid dimensions")
    }

    /// Decodes an image file. Grayscale files stay single-channel; anything
    /// else is converted to 8-bit RGB.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Data(DataError::Invalid(format!(
                "{}: cannot decode image: {other}",
                path.display()
            ))),
        })?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let (w, h) = img.dimensions();
        let gray = matches!(
            img,
            DynamicImage::ImageLuma8(_)
                | DynamicImage::ImageLumaA8(_)
                | DynamicImage::ImageLuma16(_)
                | DynamicImage::ImageLumaA16(_)
        );
        if gray {
            RawImage::new(w as usize, h as usize, 1, img.to_luma8().into_raw())
        } else {
            RawImage::new(w as usize, h as usize, 3, img.to_rgb8().into_raw())
        }
        .expect("decoded image has consistent dimensions")
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        image::save_buffer(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            color,
        )
        .map_err(|e| Error::Data(DataError::Invalid(format!("{}: {e}", path.display()))))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    fn at(&self, x: isize, y: isize, c: usize, fill: Option<f32>) -> f32 {
        let inside = x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height;
        match (inside, fill) {
            (true, _) => self.pixel(x as usize, y as usize, c) as f32,
            (false, Some(v)) => v,
            (false, None) => {
                let cx = x.clamp(0, self.width as isize - 1) as usize;
                let cy = y.clamp(0, self.height as isize - 1) as usize;
                self.pixel(cx, cy, c) as f32
            }
        }
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers on
    /// integers). Taps outside the frame read `fill`, or the nearest edge
    /// pixel when `fill` is `None`.
    pub fn sample(&self, x: f64, y: f64, c: usize, fill: Option<f32>) -> f32 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = (x - x0) as f32;
        let fy = (y - y0) as f32;
        let (x0, y0) = (x0 as isize, y0 as isize);
        let p00 = self.at(x0, y0, c, fill);
        if fx == 0.0 && fy == 0.0 {
            return p00;
        }
        let p10 = self.at(x0 + 1, y0, c, fill);
        let p01 = self.at(x0, y0 + 1, c, fill);
        let p11 = self.at(x0 + 1, y0 + 1, c, fill);
        let top = p00 + (p10 - p00) * fx;
        let bottom = p01 + (p11 - p01) * fx;
        top + (bottom - top) * fy
    }

    /// Bilinear resize to `width`×`height` with half-pixel-center alignment
    /// and edge clamping. Returns channel-interleaved floats in 0..=255.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Vec<f32> {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = Vec::with_capacity(width * height * self.channels);
        for y in 0..height {
            let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            for x in 0..width {
                let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                for c in 0..self.channels {
                    out.push(self.sample(src_x, src_y, c, None));
                }
            }
        }
        out
    }
}
