use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EstimatorError, KnnMember, KnnModel, TrainedModel};
use crate::geometry::GazeAngles;
use crate::nnengine::{read_params, write_params, CNN_MAGIC};

pub const KNN_MAGIC: &[u8; 8] = b"GZKNN1\0\0";
pub const MEAN_MAGIC: &[u8; 8] = b"GZMEAN1\0";

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N], EstimatorError> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => EstimatorError::Truncated(what.to_string()),
            _ => EstimatorError::Io(e),
        })?;
        Ok(b)
    }

    fn u32(&mut self, what: &str) -> Result<u32, EstimatorError> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64, EstimatorError> {
        Ok(f64::from_le_bytes(self.bytes(what)?))
    }
}

impl TrainedModel {
    pub fn write<W: Write>(&self, mut w: W) -> Result<(), EstimatorError> {
        match self {
            TrainedModel::Cnn(p) => write_params(&mut w, p)?,
            TrainedModel::Mean(g) => {
                w.write_all(MEAN_MAGIC)?;
                w.write_all(&g.yaw.to_le_bytes())?;
                w.write_all(&g.pitch.to_le_bytes())?;
            }
            TrainedModel::Knn(m) => {
                w.write_all(KNN_MAGIC)?;
                for v in [m.k as u32, m.resize_width, m.resize_height, m.centers.len() as u32] {
                    w.write_all(&v.to_le_bytes())?;
                }
                for c in &m.centers {
                    w.write_all(&c[0].to_le_bytes())?;
                    w.write_all(&c[1].to_le_bytes())?;
                }
                for cluster in &m.members {
                    w.write_all(&(cluster.len() as u32).to_le_bytes())?;
                    for member in cluster {
                        for v in &member.features {
                            w.write_all(&v.to_le_bytes())?;
                        }
                        w.write_all(&member.gaze.yaw.to_le_bytes())?;
                        w.write_all(&member.gaze.pitch.to_le_bytes())?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self, EstimatorError> {
        let mut r = Reader(r);
        let magic: [u8; 8] = r.bytes("magic")?;
        if &magic == CNN_MAGIC {
            let rest = std::io::Cursor::new(magic).chain(r.0);
            return Ok(TrainedModel::Cnn(read_params(rest)?));
        }
        if &magic == MEAN_MAGIC {
            let yaw = r.f64("mean gaze")?;
            let pitch = r.f64("mean gaze")?;
            return Ok(TrainedModel::Mean(GazeAngles::new(yaw, pitch)));
        }
        if &magic != KNN_MAGIC {
            return Err(EstimatorError::BadMagic);
        }
        let k = r.u32("header")? as usize;
        let resize_width = r.u32("header")?;
        let resize_height = r.u32("header")?;
        let count = r.u32("header")? as usize;
        if k == 0 || resize_width == 0 || resize_height == 0 || count == 0 {
            return Err(EstimatorError::InvalidSpec("corrupt kNN header".into()));
        }
        let feat = (resize_width * resize_height) as usize;
        let mut centers = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            centers.push([r.f64("centers")?, r.f64("centers")?]);
        }
        let mut members = Vec::with_capacity(centers.len());
        for c in 0..count {
            let n = r.u32("cluster size")? as usize;
            let mut cluster = Vec::with_capacity(n.min(1 << 16));
            for i in 0..n {
                let what = format!("cluster {c} member {i}");
                let mut features = Vec::with_capacity(feat);
                for _ in 0..feat {
                    features.push(r.f64(&what)?);
                }
                let gaze = GazeAngles::new(r.f64(&what)?, r.f64(&what)?);
                cluster.push(KnnMember { features, gaze });
            }
            members.push(cluster);
        }
        Ok(TrainedModel::Knn(KnnModel {
            k,
            resize_width,
            resize_height,
            centers,
            members,
        }))
    }

    pub fn save(&self, path: &Path) -> Result<(), EstimatorError> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, EstimatorError> {
        Self::read(BufReader::new(File::open(path)?))
    }
}
