use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::GrayImage;

use super::DataError;
use crate::geometry::GazeAngles;
use crate::nnengine::{INPUT_HEIGHT, INPUT_WIDTH};
use crate::normalize::{EyeSide, NormalizedSample};

pub const STORE_MAGIC: &[u8; 8] = b"GZNRM1\0\0";
const IMAGE_LEN: usize = INPUT_WIDTH * INPUT_HEIGHT;
/// Bytes per stored sample.
pub const STORE_RECORD_LEN: usize = 8 + 1 + IMAGE_LEN + 4 * 8;

pub fn write_store_to<W: Write>(mut w: W, samples: &[NormalizedSample]) -> Result<(), std::io::Error> {
    w.write_all(STORE_MAGIC)?;
    let mut buf = Vec::with_capacity(STORE_RECORD_LEN);
    for s in samples {
        buf.clear();
        buf.extend_from_slice(&s.person_id.to_le_bytes());
        buf.push(match s.eye_side {
            EyeSide::Left => 0,
            EyeSide::Right => 1,
        });
        buf.extend_from_slice(s.image.as_raw());
        for v in [s.head.yaw, s.head.pitch, s.gaze.yaw, s.gaze.pitch] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()
}

fn check(samples: &[NormalizedSample]) -> Result<(), DataError> {
    for (index, s) in samples.iter().enumerate() {
        if s.image.dimensions() != (INPUT_WIDTH as u32, INPUT_HEIGHT as u32) {
            return Err(DataError::InvalidSample {
                index,
                reason: format!("image is {:?}, expected 60x36", s.image.dimensions()),
            });
        }
    }
    Ok(())
}

pub fn write_store(path: &Path, samples: &[NormalizedSample]) -> Result<(), DataError> {
    check(samples)?;
    let f = File::create(path).map_err(DataError::io(path))?;
    write_store_to(BufWriter::new(f), samples).map_err(DataError::io(path))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

/// Parses a complete store image held in memory.
pub fn read_store_from<R: Read>(mut r: R) -> Result<Vec<NormalizedSample>, DataError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(DataError::io("<store>"))?;
    if bytes.len() < STORE_MAGIC.len() || &bytes[..8] != STORE_MAGIC {
        return Err(DataError::BadMagic);
    }
    let body = &bytes[8..];
    let complete = body.len() / STORE_RECORD_LEN;
    if body.len() % STORE_RECORD_LEN != 0 {
        return Err(DataError::TruncatedRecord(complete));
    }
    let mut out = Vec::with_capacity(complete);
    for (index, rec) in body.chunks_exact(STORE_RECORD_LEN).enumerate() {
        let person_id = u64::from_le_bytes(rec[..8].try_into().expect("8 bytes"));
        let eye_side = match rec[8] {
            0 => EyeSide::Left,
            1 => EyeSide::Right,
            other => {
                return Err(DataError::CorruptRecord {
                    index,
                    reason: format!("eye side byte {other}"),
                })
            }
        };
        let image = GrayImage::from_raw(
            INPUT_WIDTH as u32,
            INPUT_HEIGHT as u32,
            rec[9..9 + IMAGE_LEN].to_vec(),
        )
        .expect("image length is fixed");
        let a = 9 + IMAGE_LEN;
        out.push(NormalizedSample {
            image,
            head: GazeAngles::new(f64_at(rec, a), f64_at(rec, a + 8)),
            gaze: GazeAngles::new(f64_at(rec, a + 16), f64_at(rec, a + 24)),
            person_id,
            eye_side,
        });
    }
    Ok(out)
}

pub fn read_store(path: &Path) -> Result<Vec<NormalizedSample>, DataError> {
    let f = File::open(path).map_err(DataError::io(path))?;
    read_store_from(BufReader::new(f))
}
