//! Checkpoint format: one JSON header line, then raw little-endian 64-bit
//! float blobs concatenated in manifest order. Round-trips bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::error::NumError;
use super::params::ParamSet;
use super::scalar::Scalar;
use super::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamManifest {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub params: Vec<ParamManifest>,
    pub seed: u64,
    pub config: serde_json::Value,
}

pub fn save_checkpoint<S: Scalar>(
    path: &Path,
    params: &ParamSet<S>,
    seed: u64,
    config: &serde_json::Value,
) -> Result<(), NumError> {
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        params: params
            .iter()
            .map(|p| ParamManifest {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
        seed,
        config: config.clone(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    let header_line =
        serde_json::to_string(&header).map_err(|e| NumError::Format(e.to_string()))?;
    w.write_all(header_line.as_bytes())?;
    w.write_all(b"\n")?;
    for p in params.iter() {
        for &x in p.value.data() {
            w.write_all(&x.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<S: Scalar>(
    path: &Path,
) -> Result<(ParamSet<S>, CheckpointHeader), NumError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = r.read(&mut byte)?;
        if n == 0 {
            return Err(NumError::Format("missing header line".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
    }
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| NumError::Format(format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(NumError::Format(format!(
            "unsupported format_version {}",
            header.format_version
        )));
    }
    let mut params = ParamSet::new();
    for manifest in &header.params {
        let len: usize = manifest.shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf).map_err(|_| {
                NumError::Format(format!("truncated blob for parameter `{}`", manifest.name))
            })?;
            data.push(S::of(f64::from_le_bytes(buf)));
        }
        let tensor = Tensor::from_vec(&manifest.shape, data)?;
        params.add(&manifest.name, tensor);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(NumError::Format("trailing bytes after final blob".into()));
    }
    Ok((params, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");

        let mut rng = Rng::new(99);
        let mut ps: ParamSet<f64> = ParamSet::new();
        ps.add(
            "enc.w",
            Tensor::from_vec(&[3, 4], (0..12).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap(),
        );
        ps.add(
            "head.b",
            Tensor::from_vec(&[2], vec![f64::MIN_POSITIVE, -0.0]).unwrap(),
        );
        let config = serde_json::json!({"d_model": 8, "task": "locate"});
        save_checkpoint(&path, &ps, 7, &config).unwrap();
        let first = std::fs::read(&path).unwrap();

        let (loaded, header) = load_checkpoint::<f64>(&path).unwrap();
        assert_eq!(header.seed, 7);
        assert_eq!(header.config, config);
        assert_eq!(loaded.len(), 2);
        for (a, b) in ps.iter().zip(loaded.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.value.shape(), b.value.shape());
            for (x, y) in a.value.data().iter().zip(b.value.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }

        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&path2, &loaded, header.seed, &header.config).unwrap();
        let second = std::fs::read(&path2).unwrap();
        assert_eq!(first, second, "write→read→write must be byte-identical");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut ps: ParamSet<f64> = ParamSet::new();
        ps.add(
            "w",
            Tensor::from_vec(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
        );
        save_checkpoint(&path, &ps, 1, &serde_json::Value::Null).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let err = load_checkpoint::<f64>(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }
}
