//! Full-reference quality metrics: MSE, RMSE, PSNR and SSIM.
//!
//! MSE pools every sample of every channel. SSIM follows the usual
//! 11×11 Gaussian window (σ = 1.5) with K1 = 0.01, K2 = 0.03, L = 255,
//! averaged over all fully-contained window positions; rasters narrower
//! or shorter than the window fall back to one global window. Color SSIM
//! is the plain mean of the per-channel scores.

use thiserror::Error;

use crate::raster::RasterImage;
use crate::scalar::Scalar;

pub const MAX_SAMPLE: f64 = 255.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error(
        "image shapes differ: {0}x{1}x{2} vs {3}x{4}x{5}",
        .left.0, .left.1, .left.2, .right.0, .right.1, .right.2
    )]
    ShapeMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },
}

fn shape(image: &RasterImage) -> (usize, usize, usize) {
    (image.width(), image.height(), image.channels())
}

fn check_shapes(a: &RasterImage, b: &RasterImage) -> Result<(), MetricsError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(MetricsError::ShapeMismatch {
            left: shape(a),
            right: shape(b),
        })
    }
}

/// Mean squared error over all samples of all channels.
pub fn mse<F: Scalar>(original: &RasterImage, reconstructed: &RasterImage) -> Result<F, MetricsError> {
    check_shapes(original, reconstructed)?;
    let total: u64 = original
        .samples()
        .iter()
        .zip(reconstructed.samples())
        .map(|(&a, &b)| {
            let d = a.abs_diff(b) as u64;
            d * d
        })
        .sum();
    Ok(F::lit(total as f64) / F::from_usize_lossy(original.samples().len()))
}

pub fn rmse<F: Scalar>(original: &RasterImage, reconstructed: &RasterImage) -> Result<F, MetricsError> {
    mse::<F>(original, reconstructed).map(F::sqrt)
}

/// PSNR in dB for a given MSE; `+∞` when the MSE is zero.
pub fn psnr_from_mse<F: Scalar>(mse: F) -> F {
    if mse == F::zero() {
        return F::infinity();
    }
    let peak = F::lit(MAX_SAMPLE);
    F::lit(10.0) * (peak * peak / mse).log10()
}

pub fn psnr<F: Scalar>(original: &RasterImage, reconstructed: &RasterImage) -> Result<F, MetricsError> {
    mse::<F>(original, reconstructed).map(psnr_from_mse)
}

/// Mean structural similarity; color images average their channels.
pub fn ssim<F: Scalar>(original: &RasterImage, reconstructed: &RasterImage) -> Result<F, MetricsError> {
    check_shapes(original, reconstructed)?;
    let channels = original.channels();
    let total: F = (0..channels)
        .map(|c| {
            let x = plane::<F>(original, c);
            let y = plane::<F>(reconstructed, c);
            plane_ssim(&x, &y, original.width(), original.height())
        })
        .sum();
    Ok(total / F::from_usize_lossy(channels))
}

fn plane<F: Scalar>(image: &RasterImage, channel: usize) -> Vec<F> {
    image
        .samples()
        .iter()
        .skip(channel)
        .step_by(image.channels())
        .map(|&v| F::lit(v as f64))
        .collect()
}

fn constants<F: Scalar>() -> (F, F) {
    let c1 = F::lit(SSIM_K1 * MAX_SAMPLE);
    let c2 = F::lit(SSIM_K2 * MAX_SAMPLE);
    (c1 * c1, c2 * c2)
}

#[inline]
fn ssim_formula<F: Scalar>(mx: F, my: F, vx: F, vy: F, cxy: F) -> F {
    let (c1, c2) = constants::<F>();
    let two = F::lit(2.0);
    ((two * mx * my + c1) * (two * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

fn plane_ssim<F: Scalar>(x: &[F], y: &[F], width: usize, height: usize) -> F {
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return global_ssim(x, y);
    }
    let kernel = gaussian_kernel::<F>();
    let products = |f: &dyn Fn(F, F) -> F| -> Vec<F> {
        x.iter().zip(y).map(|(&a, &b)| f(a, b)).collect()
    };
    let mu_x = filter_valid(x, width, height, &kernel);
    let mu_y = filter_valid(y, width, height, &kernel);
    let xx = filter_valid(&products(&|a, _| a * a), width, height, &kernel);
    let yy = filter_valid(&products(&|_, b| b * b), width, height, &kernel);
    let xy = filter_valid(&products(&|a, b| a * b), width, height, &kernel);

    let count = mu_x.len();
    let mut total = F::zero();
    for i in 0..count {
        let (mx, my) = (mu_x[i], mu_y[i]);
        total += ssim_formula(mx, my, xx[i] - mx * mx, yy[i] - my * my, xy[i] - mx * my);
    }
    total / F::from_usize_lossy(count)
}

fn global_ssim<F: Scalar>(x: &[F], y: &[F]) -> F {
    let n = F::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<F>() / n;
    let my = y.iter().copied().sum::<F>() / n;
    let (mut vx, mut vy, mut cxy) = (F::zero(), F::zero(), F::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cxy += da * db;
    }
    ssim_formula(mx, my, vx / n, vy / n, cxy / n)
}

/// Normalized 1-d Gaussian taps; the 2-d window is their outer product.
fn gaussian_kernel<F: Scalar>() -> Vec<F> {
    let half = (SSIM_WINDOW / 2) as f64;
    let taps: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| F::lit(t / sum)).collect()
}

/// Separable correlation keeping only fully-contained window positions.
fn filter_valid<F: Scalar>(data: &[F], width: usize, height: usize, kernel: &[F]) -> Vec<F> {
    let taps = kernel.len();
    let out_w = width + 1 - taps;
    let out_h = height + 1 - taps;
    let mut rows = vec![F::zero(); out_w * height];
    for r in 0..height {
        let line = &data[r * width..(r + 1) * width];
        for c in 0..out_w {
            rows[r * out_w + c] = line[c..c + taps]
                .iter()
                .zip(kernel)
                .fold(F::zero(), |acc, (&v, &k)| acc + v * k);
        }
    }
    let mut out = vec![F::zero(); out_w * out_h];
    for r in 0..out_h {
        for c in 0..out_w {
            out[r * out_w + c] = kernel
                .iter()
                .enumerate()
                .fold(F::zero(), |acc, (t, &k)| acc + rows[(r + t) * out_w + c] * k);
        }
    }
    out
}

/// Quality of one reconstruction against its original.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport<F> {
    pub mse: F,
    pub rmse: F,
    /// dB; `+∞` for identical images.
    pub psnr: F,
    pub ssim: F,
    pub compression_ratio: Option<F>,
}

impl<F: Scalar> MetricsReport<F> {
    pub fn compute(
        original: &RasterImage,
        reconstructed: &RasterImage,
        compression_ratio: Option<F>,
    ) -> Result<Self, MetricsError> {
        let mse = mse::<F>(original, reconstructed)?;
        Ok(Self {
            mse,
            rmse: mse.sqrt(),
            psnr: psnr_from_mse(mse),
            ssim: ssim(original, reconstructed)?,
            compression_ratio,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(width: usize, height: usize, samples: Vec<u8>) -> RasterImage {
        RasterImage::new(width, height, 1, samples).unwrap()
    }

    #[test]
    fn mse_examples() {
        let a = gray(1, 1, vec![0]);
        assert_eq!(mse::<f64>(&a, &a).unwrap(), 0.0);
        assert_eq!(mse::<f64>(&a, &gray(1, 1, vec![255])).unwrap(), 65025.0);
        let m: f64 = mse(&gray(2, 1, vec![0, 0]), &gray(2, 1, vec![3, 4])).unwrap();
        assert_eq!(m, 12.5);
        let r: f64 = rmse(&gray(2, 1, vec![0, 0]), &gray(2, 1, vec![3, 4])).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rmse::<f64>(&a, &gray(1, 1, vec![255])).unwrap(), 255.0);
    }

    #[test]
    fn psnr_examples() {
        assert_eq!(psnr_from_mse(65025.0f64), 0.0);
        assert!((psnr_from_mse(650.25f64) - 20.0).abs() < 1e-12);
        let a = gray(1, 1, vec![9]);
        assert!(psnr::<f64>(&a, &a).unwrap().is_infinite());
        assert_eq!(psnr::<f64>(&gray(1, 1, vec![0]), &gray(1, 1, vec![255])).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = gray(2, 1, vec![0, 0]);
        let b = gray(1, 2, vec![0, 0]);
        assert!(matches!(mse::<f64>(&a, &b), Err(MetricsError::ShapeMismatch { .. })));
        assert!(ssim::<f64>(&a, &b).is_err());
        let rgb = RasterImage::new(2, 1, 3, vec![0; 6]).unwrap();
        assert!(psnr::<f64>(&a, &rgb).is_err());
    }

    #[test]
    fn constant_shift_matches_closed_form() {
        let expected = (2.0 * 100.0 * 110.0 + 6.5025) / (100.0f64.powi(2) + 110.0f64.powi(2) + 6.5025);
        for size in [4, 16] {
            let a = gray(size, size, vec![100; size * size]);
            let b = gray(size, size, vec![110; size * size]);
            let s: f64 = ssim(&a, &b).unwrap();
            assert!((s - expected).abs() < 1e-6, "size {size}: {s} vs {expected}");
        }
        assert!((expected - 0.9955).abs() < 1e-4);
    }

    #[test]
    fn constant_zero_images_are_identical() {
        let z = gray(12, 12, vec![0; 144]);
        assert_eq!(ssim::<f64>(&z, &z).unwrap(), 1.0);
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel::<f64>();
        assert_eq!(k.len(), 11);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..5 {
            assert_eq!(k[i], k[10 - i]);
        }
    }

    #[test]
    fn rgb_ssim_is_channel_mean() {
        let w = 12;
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..w * w {
            a.extend_from_slice(&[(i % 200) as u8, 50, (i * 3 % 256) as u8]);
            b.extend_from_slice(&[(i % 200) as u8, 60, (i * 5 % 256) as u8]);
        }
        let a = RasterImage::new(w, w, 3, a).unwrap();
        let b = RasterImage::new(w, w, 3, b).unwrap();
        let split = |img: &RasterImage, c: usize| {
            gray(w, w, img.samples().iter().skip(c).step_by(3).copied().collect())
        };
        let mean: f64 = (0..3)
            .map(|c| ssim::<f64>(&split(&a, c), &split(&b, c)).unwrap())
            .sum::<f64>()
            / 3.0;
        assert!((ssim::<f64>(&a, &b).unwrap() - mean).abs() < 1e-12);
    }

    fn arb_pair() -> impl Strategy<Value = (RasterImage, RasterImage)> {
        (1usize..24, 1usize..24, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(|(w, h, c)| {
            let n = w * h * c;
            (
                proptest::collection::vec(any::<u8>(), n),
                proptest::collection::vec(any::<u8>(), n),
            )
                .prop_map(move |(a, b)| {
                    (
                        RasterImage::new(w, h, c, a).unwrap(),
                        RasterImage::new(w, h, c, b).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded((a, b) in arb_pair()) {
            prop_assert_eq!(mse::<f64>(&a, &b).unwrap(), mse::<f64>(&b, &a).unwrap());
            let s_ab: f64 = ssim(&a, &b).unwrap();
            let s_ba: f64 = ssim(&b, &a).unwrap();
            prop_assert!((s_ab - s_ba).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&s_ab));
            prop_assert!((ssim::<f64>(&a, &a).unwrap() - 1.0).abs() < 1e-9);
            prop_assert_eq!(mse::<f64>(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn psnr_strictly_decreasing(lo in 1e-6f64..1e5, gap in 1e-6f64..1e5) {
            prop_assert!(psnr_from_mse(lo) > psnr_from_mse(lo + gap));
        }
    }
}
