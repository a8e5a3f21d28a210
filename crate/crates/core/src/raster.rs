//! Decoded 8-bit rasters and the conversions the clustering stage needs.

use thiserror::Error;

use crate::scalar::Scalar;

/// BT.601 luma weights for R, G, B.
const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("unsupported channel count {0}, expected 1 or 3")]
    UnsupportedChannels(usize),
    #[error("sample buffer has {actual} bytes, expected {expected}")]
    SampleCount { expected: usize, actual: usize },
    #[error("grayscale conversion needs an RGB image, got {0} channel(s)")]
    NotRgb(usize),
    #[error("point {index} has dimension {actual}, expected {expected}")]
    PointDimension {
        index: usize,
        expected: usize,
        actual: usize,
    },
}

/// Row-major, channel-interleaved 8-bit raster with 1 or 3 channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        samples: Vec<u8>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::UnsupportedChannels(channels));
        }
        let expected = width * height * channels;
        if samples.len() != expected {
            return Err(ImageError::SampleCount {
                expected,
                actual: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    /// An image with every sample set to `value`.
    pub fn filled(
        width: usize,
        height: usize,
        channels: usize,
        value: u8,
    ) -> Result<Self, ImageError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
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

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Channel values of the pixel at `(row, col)`.
    pub fn pixel(&self, row: usize, col: usize) -> &[u8] {
        let start = (row * self.width + col) * self.channels;
        &self.samples[start..start + self.channels]
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[u8]> {
        self.samples.chunks_exact(self.channels)
    }

    /// True when both images have the same width, height and channel count.
    pub fn same_shape(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Number of distinct pixel colors.
    pub fn distinct_colors(&self) -> usize {
        let mut colors: Vec<&[u8]> = self.pixels().collect();
        colors.sort_unstable();
        colors.dedup();
        colors.len()
    }
}

/// One pixel as a real-valued feature vector of `channels` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelPoint<F> {
    coords: Vec<F>,
}

impl<F: Scalar> PixelPoint<F> {
    pub fn new(coords: Vec<F>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[F] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn squared_distance(&self, other: &PixelPoint<F>) -> F {
        squared_distance(&self.coords, &other.coords)
    }
}

impl<F: Scalar> From<Vec<F>> for PixelPoint<F> {
    fn from(coords: Vec<F>) -> Self {
        Self { coords }
    }
}

#[inline]
pub(crate) fn squared_distance<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .fold(F::zero(), |acc, (&x, &y)| {
            let d = x - y;
            acc + d * d
        })
}

/// 256-bin tonal histogram per channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    bins: Vec<[u64; 256]>,
}

impl Histogram {
    pub fn channels(&self) -> usize {
        self.bins.len()
    }

    pub fn channel(&self, channel: usize) -> &[u64; 256] {
        &self.bins[channel]
    }

    pub fn count(&self, channel: usize, value: u8) -> u64 {
        self.bins[channel][value as usize]
    }

    pub fn channel_total(&self, channel: usize) -> u64 {
        self.bins[channel].iter().sum()
    }
}

/// One point per pixel in row-major order.
pub fn to_pixel_points<F: Scalar>(image: &RasterImage) -> Vec<PixelPoint<F>> {
    image
        .pixels()
        .map(|px| PixelPoint::new(px.iter().map(|&v| F::lit(v as f64)).collect()))
        .collect()
}

/// Reassembles a raster from row-major points, rounding and clamping each
/// coordinate to `[0, 255]`.
pub fn from_pixel_points<F: Scalar>(
    points: &[PixelPoint<F>],
    width: usize,
    height: usize,
) -> Result<RasterImage, ImageError> {
    let channels = points.first().map(PixelPoint::dim).unwrap_or(1);
    if points.len() != width * height {
        return Err(ImageError::SampleCount {
            expected: width * height * channels,
            actual: points.len() * channels,
        });
    }
    let mut samples = Vec::with_capacity(points.len() * channels);
    for (index, point) in points.iter().enumerate() {
        if point.dim() != channels {
            return Err(ImageError::PointDimension {
                index,
                expected: channels,
                actual: point.dim(),
            });
        }
        samples.extend(point.coords().iter().map(|&c| quantize_sample(c)));
    }
    RasterImage::new(width, height, channels, samples)
}

/// Rounds to the nearest integer and clamps into the 8-bit range.
pub fn quantize_sample<F: Scalar>(value: F) -> u8 {
    let v = value.as_f64();
    if v.is_nan() {
        return 0;
    }
    v.round().clamp(0.0, 255.0) as u8
}

/// BT.601 luma conversion of an RGB raster.
pub fn to_grayscale(image: &RasterImage) -> Result<RasterImage, ImageError> {
    if image.channels() != 3 {
        return Err(ImageError::NotRgb(image.channels()));
    }
    let samples = image
        .pixels()
        .map(|px| {
            let luma: f64 = px
                .iter()
                .zip(LUMA_WEIGHTS)
                .map(|(&v, w)| v as f64 * w)
                .sum();
            quantize_sample(luma)
        })
        .collect();
    RasterImage::new(image.width(), image.height(), 1, samples)
}

pub fn histogram(image: &RasterImage) -> Histogram {
    let mut bins = vec![[0u64; 256]; image.channels()];
    for px in image.pixels() {
        for (channel, &v) in px.iter().enumerate() {
            bins[channel][v as usize] += 1;
        }
    }
    Histogram { bins }
}
