//! Palette + index-plane codec and the `IECC` container.
//!
//! Container layout, all multi-byte integers little-endian:
//!
//! | offset | size | field                                              |
//! |-------:|-----:|----------------------------------------------------|
//! | 0      | 4    | magic `IECC`                                       |
//! | 4      | 1    | version (1)                                        |
//! | 5      | 4    | width (u32)                                        |
//! | 9      | 4    | height (u32)                                       |
//! | 13     | 1    | channels (1 or 3)                                  |
//! | 14     | 2    | K (u16, 1..=256)                                   |
//! | 16     | 1    | algorithm tag (0 kmeans, 1 kmeanspp, 2 fcm, 3 fcmpp, 255 external palette) |
//! | 17     | 8    | seed (u64)                                         |
//! | 25     | K·channels | palette entries                              |
//! | …      | ⌈w·h·b/8⌉ | index plane, `b = max(1, ⌈log₂K⌉)` bits per pixel, row-major, MSB-first, zero padded |

use thiserror::Error;

use crate::clustering::{run_clustering, Algorithm, Centroids, ClusterConfig, ClusterError, ClusterOutcome};
use crate::raster::{quantize_sample, to_pixel_points, ImageError, RasterImage};
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"IECC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 25;
pub const MAX_K: usize = 256;
pub const EXTERNAL_PALETTE_TAG: u8 = 255;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("malformed container: bad magic {0:02x?}")]
    BadMagic(Vec<u8>),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("malformed container: truncated, need {expected} bytes, have {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("malformed container: {actual} bytes where {expected} were expected")]
    InconsistentLength { expected: usize, actual: usize },
    #[error("malformed container: {0}")]
    InvalidHeader(String),
    #[error("malformed container: pixel {position} has index {index} but K = {k}")]
    IndexOutOfRange { position: usize, index: usize, k: usize },
    #[error("K = {0} is outside 1..=256")]
    InvalidK(usize),
    #[error("image has {distinct} distinct color(s), fewer than K = {k}")]
    Degenerate { distinct: usize, k: usize },
    #[error("palette has dimension {palette}, image has {image} channel(s)")]
    DimensionMismatch { palette: usize, image: usize },
    #[error("compression ratio needs K >= 2, got {0}")]
    RatioNeedsTwoColors(usize),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

impl CodecError {
    /// True for errors raised while reading a container.
    pub fn is_malformed(&self) -> bool {
        matches!(
            self,
            CodecError::BadMagic(_)
                | CodecError::UnsupportedVersion(_)
                | CodecError::Truncated { .. }
                | CodecError::InconsistentLength { .. }
                | CodecError::InvalidHeader(_)
                | CodecError::IndexOutOfRange { .. }
        )
    }
}

/// Bits per index: `max(1, ⌈log₂K⌉)`.
pub fn bits_per_index(k: usize) -> u32 {
    if k <= 2 {
        1
    } else {
        usize::BITS - (k - 1).leading_zeros()
    }
}

/// How the palette was produced; stored in the container's tag byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaletteSource {
    Clustered(Algorithm),
    External,
}

impl PaletteSource {
    pub fn tag(self) -> u8 {
        match self {
            PaletteSource::Clustered(a) => a.tag(),
            PaletteSource::External => EXTERNAL_PALETTE_TAG,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        if tag == EXTERNAL_PALETTE_TAG {
            Some(PaletteSource::External)
        } else {
            Algorithm::from_tag(tag).map(PaletteSource::Clustered)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub k: u16,
    pub source: PaletteSource,
    pub seed: u64,
}

/// K colors of `channels` bytes each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    channels: usize,
    entries: Vec<u8>,
}

impl Palette {
    pub fn new(channels: usize, entries: Vec<u8>) -> Result<Self, CodecError> {
        if channels != 1 && channels != 3 {
            return Err(CodecError::InvalidHeader(format!("{channels} channels")));
        }
        if entries.is_empty() || entries.len() % channels != 0 {
            return Err(CodecError::InvalidHeader(format!(
                "palette of {} bytes for {channels} channel(s)",
                entries.len()
            )));
        }
        let k = entries.len() / channels;
        if k > MAX_K {
            return Err(CodecError::InvalidK(k));
        }
        Ok(Self { channels, entries })
    }

    /// Centroids rounded to the nearest integer and clamped to `[0, 255]`.
    pub fn from_centroids<F: Scalar>(centroids: &Centroids<F>) -> Result<Self, CodecError> {
        let entries = centroids
            .iter()
            .flat_map(|c| c.iter().map(|&v| quantize_sample(v)))
            .collect();
        Self::new(centroids.dim(), entries)
    }

    pub fn k(&self) -> usize {
        self.entries.len() / self.channels
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn entry(&self, index: usize) -> &[u8] {
        &self.entries[index * self.channels..(index + 1) * self.channels]
    }

    pub fn bytes(&self) -> &[u8] {
        &self.entries
    }
}

/// The per-pixel palette indices, bit-packed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPlane {
    width: usize,
    height: usize,
    bits: u32,
    packed: Vec<u8>,
}

fn packed_len(pixels: usize, bits: u32) -> usize {
    (pixels * bits as usize).div_ceil(8)
}

impl IndexPlane {
    /// Packs row-major indices for a palette of `k` entries.
    pub fn pack(width: usize, height: usize, k: usize, indices: &[usize]) -> Result<Self, CodecError> {
        if indices.len() != width * height {
            return Err(CodecError::InconsistentLength {
                expected: width * height,
                actual: indices.len(),
            });
        }
        let bits = bits_per_index(k);
        let mut packed = vec![0u8; packed_len(indices.len(), bits)];
        let mut bit_pos = 0usize;
        for (position, &index) in indices.iter().enumerate() {
            if index >= k {
                return Err(CodecError::IndexOutOfRange { position, index, k });
            }
            for b in (0..bits).rev() {
                if (index >> b) & 1 == 1 {
                    packed[bit_pos / 8] |= 0x80 >> (bit_pos % 8);
                }
                bit_pos += 1;
            }
        }
        Ok(Self {
            width,
            height,
            bits,
            packed,
        })
    }

    pub fn from_packed(width: usize, height: usize, bits: u32, packed: Vec<u8>) -> Result<Self, CodecError> {
        let expected = packed_len(width * height, bits);
        if packed.len() != expected {
            return Err(CodecError::InconsistentLength {
                expected,
                actual: packed.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
            packed,
        })
    }

    pub fn bits_per_index(&self) -> u32 {
        self.bits
    }

    pub fn packed(&self) -> &[u8] {
        &self.packed
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let bits = self.bits as usize;
        (0..self.len()).map(move |pixel| {
            let start = pixel * bits;
            (start..start + bits).fold(0usize, |acc, bit| {
                let set = self.packed[bit / 8] & (0x80 >> (bit % 8)) != 0;
                (acc << 1) | set as usize
            })
        })
    }

    pub fn indices(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedImage {
    pub header: Header,
    pub palette: Palette,
    pub indices: IndexPlane,
}

impl CompressedImage {
    pub fn assemble(
        width: usize,
        height: usize,
        source: PaletteSource,
        seed: u64,
        palette: Palette,
        indices: &[usize],
    ) -> Result<Self, CodecError> {
        let k = palette.k();
        let header = Header {
            width: u32::try_from(width).map_err(|_| CodecError::InvalidHeader("width exceeds u32".into()))?,
            height: u32::try_from(height).map_err(|_| CodecError::InvalidHeader("height exceeds u32".into()))?,
            channels: palette.channels() as u8,
            k: k as u16,
            source,
            seed,
        };
        let indices = IndexPlane::pack(width, height, k, indices)?;
        Ok(Self {
            header,
            palette,
            indices,
        })
    }

    pub fn width(&self) -> usize {
        self.header.width as usize
    }

    pub fn height(&self) -> usize {
        self.header.height as usize
    }

    pub fn channels(&self) -> usize {
        self.header.channels as usize
    }

    pub fn k(&self) -> usize {
        self.header.k as usize
    }

    /// Palette plus index-plane bits, i.e. the size the ratio formula counts.
    pub fn payload_bits(&self) -> usize {
        8 * self.palette.bytes().len() + self.len_pixels() * self.indices.bits_per_index() as usize
    }

    fn len_pixels(&self) -> usize {
        self.width() * self.height()
    }

    /// Serialized size in bytes including the header.
    pub fn container_len(&self) -> usize {
        HEADER_LEN + self.palette.bytes().len() + self.indices.packed().len()
    }

    /// Raw raster bytes over serialized container bytes.
    pub fn on_disk_ratio(&self) -> f64 {
        (self.len_pixels() * self.channels()) as f64 / self.container_len() as f64
    }
}

/// Clusters the image's own pixels and packs the result.
pub fn encode<F: Scalar>(image: &RasterImage, config: &ClusterConfig<F>) -> Result<CompressedImage, CodecError> {
    encode_with_outcome(image, config).map(|(c, _)| c)
}

/// [`encode`], also handing back the clustering outcome.
pub fn encode_with_outcome<F: Scalar>(
    image: &RasterImage,
    config: &ClusterConfig<F>,
) -> Result<(CompressedImage, ClusterOutcome<F>), CodecError> {
    if config.k == 0 || config.k > MAX_K {
        return Err(CodecError::InvalidK(config.k));
    }
    let distinct = image.distinct_colors();
    if distinct < config.k {
        return Err(CodecError::Degenerate { distinct, k: config.k });
    }
    let points = to_pixel_points::<F>(image);
    let outcome = run_clustering(&points, config)?;
    let palette = Palette::from_centroids(&outcome.centroids)?;
    let compressed = CompressedImage::assemble(
        image.width(),
        image.height(),
        PaletteSource::Clustered(config.algorithm),
        config.seed,
        palette,
        &outcome.assignments,
    )?;
    Ok((compressed, outcome))
}

/// Encodes against fixed centroids, e.g. ones learned on another frame.
/// Pixels go to the nearest unrounded centroid.
pub fn encode_with_palette<F: Scalar>(
    image: &RasterImage,
    centroids: &Centroids<F>,
) -> Result<CompressedImage, CodecError> {
    if centroids.dim() != image.channels() {
        return Err(CodecError::DimensionMismatch {
            palette: centroids.dim(),
            image: image.channels(),
        });
    }
    if centroids.k() > MAX_K {
        return Err(CodecError::InvalidK(centroids.k()));
    }
    let indices: Vec<usize> = to_pixel_points::<F>(image)
        .iter()
        .map(|p| centroids.nearest(p.coords()).0)
        .collect();
    let palette = Palette::from_centroids(centroids)?;
    CompressedImage::assemble(
        image.width(),
        image.height(),
        PaletteSource::External,
        0,
        palette,
        &indices,
    )
}

pub fn decode(compressed: &CompressedImage) -> Result<RasterImage, CodecError> {
    let k = compressed.palette.k();
    let channels = compressed.palette.channels();
    if k != compressed.k() || channels != compressed.channels() {
        return Err(CodecError::InvalidHeader(format!(
            "header says K={} channels={}, palette has K={k} channels={channels}",
            compressed.k(),
            compressed.channels()
        )));
    }
    let mut samples = Vec::with_capacity(compressed.indices.len() * channels);
    for (position, index) in compressed.indices.iter().enumerate() {
        if index >= k {
            return Err(CodecError::IndexOutOfRange { position, index, k });
        }
        samples.extend_from_slice(compressed.palette.entry(index));
    }
    Ok(RasterImage::new(
        compressed.width(),
        compressed.height(),
        channels,
        samples,
    )?)
}

pub fn serialize(compressed: &CompressedImage) -> Vec<u8> {
    let h = &compressed.header;
    let mut out = Vec::with_capacity(compressed.container_len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&h.width.to_le_bytes());
    out.extend_from_slice(&h.height.to_le_bytes());
    out.push(h.channels);
    out.extend_from_slice(&h.k.to_le_bytes());
    out.push(h.source.tag());
    out.extend_from_slice(&h.seed.to_le_bytes());
    out.extend_from_slice(compressed.palette.bytes());
    out.extend_from_slice(compressed.indices.packed());
    out
}

pub fn deserialize(bytes: &[u8]) -> Result<CompressedImage, CodecError> {
    if bytes.len() < MAGIC.len() || bytes[..4] != MAGIC {
        return Err(CodecError::BadMagic(bytes.iter().take(4).copied().collect()));
    }
    if bytes.len() < 5 {
        return Err(CodecError::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    if bytes[4] != VERSION {
        return Err(CodecError::UnsupportedVersion(bytes[4]));
    }
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let width = u32_at(5);
    let height = u32_at(9);
    let channels = bytes[13];
    let k = u16::from_le_bytes([bytes[14], bytes[15]]);
    let tag = bytes[16];
    let seed = u64::from_le_bytes(bytes[17..25].try_into().unwrap());

    if width == 0 || height == 0 {
        return Err(CodecError::InvalidHeader(format!("dimensions {width}x{height}")));
    }
    if channels != 1 && channels != 3 {
        return Err(CodecError::InvalidHeader(format!("{channels} channels")));
    }
    if k == 0 || k as usize > MAX_K {
        return Err(CodecError::InvalidHeader(format!("K = {k}")));
    }
    let source = PaletteSource::from_tag(tag)
        .ok_or_else(|| CodecError::InvalidHeader(format!("unknown algorithm tag {tag}")))?;

    let pixels = (width as usize)
        .checked_mul(height as usize)
        .ok_or_else(|| CodecError::InvalidHeader("dimensions overflow".into()))?;
    let palette_len = k as usize * channels as usize;
    let bits = bits_per_index(k as usize);
    let expected = HEADER_LEN + palette_len + packed_len(pixels, bits);
    if bytes.len() < expected {
        return Err(CodecError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(CodecError::InconsistentLength {
            expected,
            actual: bytes.len(),
        });
    }
    let palette = Palette::new(
        channels as usize,
        bytes[HEADER_LEN..HEADER_LEN + palette_len].to_vec(),
    )?;
    let indices = IndexPlane::from_packed(
        width as usize,
        height as usize,
        bits,
        bytes[HEADER_LEN + palette_len..].to_vec(),
    )?;
    Ok(CompressedImage {
        header: Header {
            width,
            height,
            channels,
            k,
            source,
            seed,
        },
        palette,
        indices,
    })
}

/// Uncompressed bits over palette-plus-index bits:
/// `8·c·w·h / (⌈log₂K⌉·w·h + 8·c·K)`. Header bytes are not counted.
pub fn compression_ratio<F: Scalar>(
    width: usize,
    height: usize,
    channels: usize,
    k: usize,
) -> Result<F, CodecError> {
    if k < 2 {
        return Err(CodecError::RatioNeedsTwoColors(k));
    }
    let pixels = (width * height) as u128;
    let raw = 8 * channels as u128 * pixels;
    let packed = bits_per_index(k) as u128 * pixels + 8 * channels as u128 * k as u128;
    Ok(F::lit(raw as f64) / F::lit(packed as f64))
}
