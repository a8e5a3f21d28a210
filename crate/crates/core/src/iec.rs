//! Change-gated transmission of a frame stream.
//!
//! Each new frame is compared with the last frame that was sent. Only when
//! the similarity drops below the threshold is the frame encoded, counted
//! as sent and promoted to the new reference; otherwise it is skipped and
//! the reference stays put. The first frame has nothing to compare against
//! and is always sent.

use thiserror::Error;

use crate::clustering::ClusterConfig;
use crate::codec::{encode, serialize, CodecError, CompressedImage};
use crate::metrics::{self, MetricsError, MAX_SAMPLE};
use crate::raster::RasterImage;
use crate::scalar::Scalar;

pub const DEFAULT_THRESHOLD: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IecError {
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("frame does not match the stored reference: {0}")]
    ShapeMismatch(#[from] MetricsError),
    #[error("frame {index}: {source}")]
    ShapeDrift { index: usize, source: MetricsError },
    #[error("empty frame stream")]
    EmptyStream,
    #[error(transparent)]
    Encode(#[from] CodecError),
}

/// How "similar" a new frame is to the reference, 1 meaning identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Similarity {
    #[default]
    Ssim,
    /// 1 − RMSE/255.
    OneMinusNrmse,
}

impl Similarity {
    pub fn name(self) -> &'static str {
        match self {
            Similarity::Ssim => "ssim",
            Similarity::OneMinusNrmse => "one_minus_nrmse",
        }
    }

    pub fn measure<F: Scalar>(self, reference: &RasterImage, frame: &RasterImage) -> Result<F, MetricsError> {
        match self {
            Similarity::Ssim => metrics::ssim(reference, frame),
            Similarity::OneMinusNrmse => {
                metrics::rmse::<F>(reference, frame).map(|r| F::one() - r / F::lit(MAX_SAMPLE))
            }
        }
    }
}

impl std::str::FromStr for Similarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ssim" => Ok(Similarity::Ssim),
            "one_minus_nrmse" | "nrmse" => Ok(Similarity::OneMinusNrmse),
            other => Err(format!("unknown similarity metric `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IecConfig<F = f64> {
    threshold: F,
    pub similarity: Similarity,
    pub encoder: ClusterConfig<F>,
}

impl<F: Scalar> IecConfig<F> {
    pub fn new(threshold: F, similarity: Similarity, encoder: ClusterConfig<F>) -> Result<Self, IecError> {
        if !(threshold >= F::zero() && threshold <= F::one()) {
            return Err(IecError::InvalidThreshold(threshold.as_f64()));
        }
        Ok(Self {
            threshold,
            similarity,
            encoder,
        })
    }

    pub fn threshold(&self) -> F {
        self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransmissionDecision<F> {
    Skip {
        similarity: F,
    },
    Send {
        /// `None` for the first frame of a session.
        similarity: Option<F>,
        compressed: CompressedImage,
        bytes: usize,
    },
}

impl<F> TransmissionDecision<F> {
    pub fn is_send(&self) -> bool {
        matches!(self, TransmissionDecision::Send { .. })
    }
}

/// Single-writer transmission state.
#[derive(Debug, Clone)]
pub struct IecSession<F = f64> {
    config: IecConfig<F>,
    stored: Option<RasterImage>,
    frames_seen: usize,
    frames_sent: usize,
    bytes_sent: usize,
    bytes_baseline: usize,
}

impl<F: Scalar> IecSession<F> {
    pub fn new(config: IecConfig<F>) -> Self {
        Self {
            config,
            stored: None,
            frames_seen: 0,
            frames_sent: 0,
            bytes_sent: 0,
            bytes_baseline: 0,
        }
    }

    pub fn config(&self) -> &IecConfig<F> {
        &self.config
    }

    pub fn stored_image(&self) -> Option<&RasterImage> {
        self.stored.as_ref()
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }

    pub fn frames_sent(&self) -> usize {
        self.frames_sent
    }

    pub fn frames_skipped(&self) -> usize {
        self.frames_seen - self.frames_sent
    }

    /// Serialized container bytes of every sent frame.
    pub fn bytes_sent(&self) -> usize {
        self.bytes_sent
    }

    /// Raw raster bytes of every frame seen.
    pub fn bytes_baseline(&self) -> usize {
        self.bytes_baseline
    }

    /// Processes one frame. On error the session is left unchanged.
    pub fn step(&mut self, frame: &RasterImage) -> Result<TransmissionDecision<F>, IecError> {
        let similarity = match &self.stored {
            None => None,
            Some(reference) => Some(self.config.similarity.measure::<F>(reference, frame)?),
        };
        let send = similarity.is_none_or(|s| s < self.config.threshold);
        let decision = if send {
            let compressed = encode(frame, &self.config.encoder)?;
            let bytes = serialize(&compressed).len();
            self.frames_sent += 1;
            self.bytes_sent += bytes;
            self.stored = Some(frame.clone());
            TransmissionDecision::Send {
                similarity,
                compressed,
                bytes,
            }
        } else {
            TransmissionDecision::Skip {
                similarity: similarity.expect("skips always have a reference"),
            }
        };
        self.frames_seen += 1;
        self.bytes_baseline += frame.samples().len();
        Ok(decision)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord<F> {
    pub index: usize,
    pub similarity: Option<F>,
    pub sent: bool,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IecReport<F = f64> {
    pub frames: Vec<FrameRecord<F>>,
    pub frames_seen: usize,
    pub frames_sent: usize,
    pub frames_skipped: usize,
    pub bytes_sent: usize,
    pub bytes_baseline: usize,
    /// 1 − bytes_sent / bytes_baseline.
    pub savings: F,
}

/// Runs a fresh session over `frames` in order.
pub fn run_stream<'a, F: Scalar>(
    frames: impl IntoIterator<Item = &'a RasterImage>,
    config: &IecConfig<F>,
) -> Result<IecReport<F>, IecError> {
    run_stream_with(frames, config, |_, _| {})
}

/// [`run_stream`], handing every sent container to `on_send`.
pub fn run_stream_with<'a, F: Scalar>(
    frames: impl IntoIterator<Item = &'a RasterImage>,
    config: &IecConfig<F>,
    mut on_send: impl FnMut(usize, &CompressedImage),
) -> Result<IecReport<F>, IecError> {
    let mut session = IecSession::new(config.clone());
    let mut records = Vec::new();
    for (index, frame) in frames.into_iter().enumerate() {
        let decision = session.step(frame).map_err(|e| match e {
            IecError::ShapeMismatch(source) => IecError::ShapeDrift { index, source },
            other => other,
        })?;
        let record = match &decision {
            TransmissionDecision::Skip { similarity } => FrameRecord {
                index,
                similarity: Some(*similarity),
                sent: false,
                bytes: 0,
            },
            TransmissionDecision::Send {
                similarity,
                compressed,
                bytes,
            } => {
                on_send(index, compressed);
                FrameRecord {
                    index,
                    similarity: *similarity,
                    sent: true,
                    bytes: *bytes,
                }
            }
        };
        records.push(record);
    }
    if records.is_empty() {
        return Err(IecError::EmptyStream);
    }
    Ok(IecReport {
        frames: records,
        frames_seen: session.frames_seen(),
        frames_sent: session.frames_sent(),
        frames_skipped: session.frames_skipped(),
        bytes_sent: session.bytes_sent(),
        bytes_baseline: session.bytes_baseline(),
        savings: F::one()
            - F::from_usize_lossy(session.bytes_sent()) / F::from_usize_lossy(session.bytes_baseline()),
    })
}
