//! Palette-quantization image codec for change-gated sensor transmission.
//!
//! Pixels are clustered into a K-entry palette (K-Means, K-Means++, fuzzy
//! C-Means or fuzzy C-Means++), the per-pixel cluster indices are bit-packed
//! into an index plane, and the two together form an `IECC` container. A
//! stream gate ([`iec`]) decides which frames of a sensor stream are worth
//! encoding at all by comparing each frame against the last one sent.
//!
//! The numeric core is generic over the floating-point type through
//! [`Scalar`]; the aliases at the crate root pin the common choices.

pub mod clustering;
pub mod codec;
pub mod iec;
pub mod metrics;
pub mod raster;
pub mod scalar;
pub mod stats;

pub use clustering::{
    run_clustering, Algorithm, Centroids, ClusterConfig, ClusterError, ClusterOutcome,
    MembershipMatrix,
};
pub use codec::{
    bits_per_index, compression_ratio, decode, deserialize, encode, encode_with_outcome,
    encode_with_palette, serialize, CodecError, CompressedImage, Header, IndexPlane, Palette,
    PaletteSource,
};
pub use iec::{
    run_stream, FrameRecord, IecConfig, IecError, IecReport, IecSession, Similarity,
    TransmissionDecision,
};
pub use raster::{Histogram, ImageError, PixelPoint, RasterImage};
pub use metrics::{MetricsError, MetricsReport};
pub use scalar::Scalar;
pub use stats::{
    compare_algorithms, wilcoxon_signed_rank, wilcoxon_signed_rank_with, Comparison, MetricKind, Sidedness, StatsError,
    TestMethod, TestResult,
};

pub type PixelPoint64 = PixelPoint<f64>;
pub type PixelPoint32 = PixelPoint<f32>;
pub type Centroids64 = Centroids<f64>;
pub type Centroids32 = Centroids<f32>;
pub type ClusterConfig64 = ClusterConfig<f64>;
pub type ClusterConfig32 = ClusterConfig<f32>;
pub type ClusterOutcome64 = ClusterOutcome<f64>;
pub type ClusterOutcome32 = ClusterOutcome<f32>;
pub type MetricsReport64 = MetricsReport<f64>;
pub type MetricsReport32 = MetricsReport<f32>;
pub type IecConfig64 = IecConfig<f64>;
pub type IecSession64 = IecSession<f64>;
pub type IecReport64 = IecReport<f64>;
pub type TestResult64 = TestResult<f64>;
