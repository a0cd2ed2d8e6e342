use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{GrayImage, ImageEncoder, ImageFormat, ImageReader};

use super::DataError;

fn invalid(path: &Path, e: impl std::fmt::Display) -> DataError {
    DataError::InvalidFrame {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// Reads an 8-bit grayscale PGM frame.
pub fn read_pgm(path: &Path) -> Result<GrayImage, DataError> {
    let f = File::open(path).map_err(DataError::io(path))?;
    let mut reader = ImageReader::new(BufReader::new(f));
    reader.set_format(ImageFormat::Pnm);
    let img = reader.decode().map_err(|e| invalid(path, e))?;
    match img {
        image::DynamicImage::ImageLuma8(g) => Ok(g),
        other => Err(invalid(path, format!("expected 8-bit grayscale, got {:?}", other.color()))),
    }
}

/// Writes a binary (P5) PGM frame.
pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<(), DataError> {
    let f = File::create(path).map_err(DataError::io(path))?;
    PnmEncoder::new(BufWriter::new(f))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::L8)
        .map_err(|e| invalid(path, e))
}
