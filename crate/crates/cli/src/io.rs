//! PNG and container file I/O.

use std::fs;
use std::path::{Path, PathBuf};

use iecc_core::raster::to_grayscale;
use iecc_core::{deserialize, serialize, CompressedImage, RasterImage};
use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::CliError;

/// How a PNG is turned into a raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    /// Keep single-channel files as-is, everything else as RGB.
    Native,
    Gray,
    Rgb,
}

fn from_dynamic(image: DynamicImage, mode: ColorMode) -> Result<RasterImage, String> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let is_luma = !image.color().has_color();
    let raster = if is_luma && mode != ColorMode::Rgb {
        RasterImage::new(w, h, 1, image.into_luma8().into_raw())
    } else {
        RasterImage::new(w, h, 3, image.into_rgb8().into_raw())
    }
    .map_err(|e| e.to_string())?;
    if mode == ColorMode::Gray && raster.channels() == 3 {
        to_grayscale(&raster).map_err(|e| e.to_string())
    } else {
        Ok(raster)
    }
}

pub fn load_png(path: &Path, mode: ColorMode) -> Result<RasterImage, CliError> {
    let image = image::open(path).map_err(|e| CliError::input(path, e))?;
    from_dynamic(image, mode).map_err(|e| CliError::input(path, e))
}

pub fn save_png(path: &Path, raster: &RasterImage) -> Result<(), CliError> {
    let (w, h) = (raster.width() as u32, raster.height() as u32);
    let samples = raster.samples().to_vec();
    let result = match raster.channels() {
        1 => GrayImage::from_raw(w, h, samples).map(|img| img.save(path)),
        _ => RgbImage::from_raw(w, h, samples).map(|img| img.save(path)),
    };
    match result {
        Some(Ok(())) => Ok(()),
        Some(Err(e)) => Err(CliError::write(path, e)),
        None => Err(CliError::Internal("raster buffer does not match its dimensions".into())),
    }
}

pub fn read_container(path: &Path) -> Result<CompressedImage, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(path, e))?;
    deserialize(&bytes).map_err(|source| match CliError::from(source) {
        CliError::Malformed { source, .. } => CliError::Malformed {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Writes the container and returns its size in bytes.
pub fn write_container(path: &Path, compressed: &CompressedImage) -> Result<usize, CliError> {
    let bytes = serialize(compressed);
    write_bytes(path, &bytes)?;
    Ok(bytes.len())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::write(path, e))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::write(path, e))
}

/// `.png` files directly inside `dir`, in lexicographic filename order.
pub fn png_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::input(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::input(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|ext| ext.to_str())
            .is_some_and(|ext| ext.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Expands directories to their PNG files; plain files pass through.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            out.extend(png_files(input)?);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_roundtrip_gray_and_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let gray = RasterImage::new(3, 2, 1, vec![0, 50, 100, 150, 200, 250]).unwrap();
        let rgb = RasterImage::new(2, 1, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        for (name, raster) in [("g.png", &gray), ("c.png", &rgb)] {
            let path = dir.path().join(name);
            save_png(&path, raster).unwrap();
            assert_eq!(&load_png(&path, ColorMode::Native).unwrap(), raster);
        }
        let as_rgb = load_png(&dir.path().join("g.png"), ColorMode::Rgb).unwrap();
        assert_eq!(as_rgb.channels(), 3);
        assert_eq!(as_rgb.pixel(0, 1), &[50, 50, 50]);
        let as_gray = load_png(&dir.path().join("c.png"), ColorMode::Gray).unwrap();
        assert_eq!(as_gray.channels(), 1);
    }

    #[test]
    fn png_listing_is_sorted_and_filtered() {
        let dir = tempfile::tempdir().unwrap();
        let img = RasterImage::new(1, 1, 1, vec![7]).unwrap();
        for name in ["b.png", "a.PNG", "c.png"] {
            save_png(&dir.path().join(name), &img).unwrap();
        }
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let names: Vec<String> = png_files(dir.path())
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["a.PNG", "b.png", "c.png"]);
    }

    #[test]
    fn unreadable_input_is_an_input_error() {
        let err = load_png(Path::new("/nonexistent/x.png"), ColorMode::Native).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::exit::INPUT);
    }
}
