use std::io::{Read, Write};

use super::{CnnConfig, CnnParams, NnError, Tensor};

pub const CNN_MAGIC: &[u8; 8] = b"GZCNN1\0\0";

const FLAG_CONV_RELU: u32 = 1;

/// Writes the magic, a flag word, the layer dimension header and the
/// little-endian parameter blocks in declaration order.
pub fn write_params<W: Write>(mut w: W, params: &CnnParams) -> Result<(), NnError> {
    params.validate()?;
    w.write_all(CNN_MAGIC)?;
    let flags = if params.config.conv_relu { FLAG_CONV_RELU } else { 0 };
    w.write_all(&flags.to_le_bytes())?;
    let blocks = params.tensors();
    w.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for (_, t) in &blocks {
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
    }
    for (_, t) in &blocks {
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), NnError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => NnError::Truncated(what.to_string()),
        _ => NnError::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_params<R: Read>(mut r: R) -> Result<CnnParams, NnError> {
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != CNN_MAGIC {
        return Err(NnError::BadMagic);
    }
    let flags = read_u32(&mut r, "flags")?;
    let config = CnnConfig {
        conv_relu: flags & FLAG_CONV_RELU != 0,
    };
    let expected = CnnParams::expected_shapes();
    let count = read_u32(&mut r, "header")? as usize;
    if count != expected.len() {
        return Err(NnError::ShapeMismatch {
            what: "parameter block count",
            expected: vec![expected.len()],
            got: vec![count],
        });
    }
    let mut params = CnnParams::zeros(config);
    for ((name, _), shape) in params.tensors().iter().zip(&expected) {
        let ndims = read_u32(&mut r, "header")? as usize;
        if ndims > 4 {
            return Err(NnError::ShapeMismatch {
                what: name,
                expected: shape.clone(),
                got: vec![ndims],
            });
        }
        let mut dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            dims.push(read_u32(&mut r, "header")? as usize);
        }
        if &dims != shape {
            return Err(NnError::ShapeMismatch {
                what: name,
                expected: shape.clone(),
                got: dims,
            });
        }
    }
    for (name, t) in params.tensors_mut() {
        let mut buf = vec![0u8; t.len() * 8];
        read_exact(&mut r, &mut buf, name)?;
        let data: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        *t = Tensor::from_vec(t.shape(), data)?;
    }
    if !params.all_finite() {
        return Err(NnError::NonFinite("model file"));
    }
    Ok(params)
}
