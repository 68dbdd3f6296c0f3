//! Weight file format (TLM1).
//!
//! Layout, all integers little-endian:
//!   magic "TLM1" | u32 version (=1) | 7 x u64 config
//!   (n_layers, n_heads, d_model, d_head, vocab_size, max_seq_len, seed)
//! followed by row-major f32 tensors in this fixed order:
//!   tok_emb, pos_emb,
//!   per layer: ln1.gain, ln1.bias, wq, wk, wv, wo, ln2.gain, ln2.bias,
//!              w_up, w_down,
//!   final_norm.gain, final_norm.bias, unembed.
//! Loading validates the config and the exact byte length; any mismatch is
//! an error, never a silent truncation.

use ndarray::{Array1, Array2};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{LayerWeights, Model, NormWeights, Weights};
use super::ModelConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TLM1";
const VERSION: u32 = 1;

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let c = model.config();
    for v in [
        c.n_layers as u64,
        c.n_heads as u64,
        c.d_model as u64,
        c.d_head as u64,
        c.vocab_size as u64,
        c.max_seq_len as u64,
        c.seed,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for tensor in model.tensors() {
        for &v in tensor.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Load { line: None, message: "file too short for header".into() })?;
    if &magic != MAGIC {
        return Err(Error::Load {
            line: None,
            message: format!("bad magic {:?}, expected \"TLM1\"", magic),
        });
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Load {
            line: None,
            message: format!("unsupported weight-file version {version}"),
        });
    }
    let mut fields = [0u64; 7];
    for f in &mut fields {
        *f = read_u64(&mut r)?;
    }
    let config = ModelConfig {
        n_layers: fields[0] as usize,
        n_heads: fields[1] as usize,
        d_model: fields[2] as usize,
        d_head: fields[3] as usize,
        vocab_size: fields[4] as usize,
        max_seq_len: fields[5] as usize,
        seed: fields[6],
    };
    config.validate().map_err(|e| Error::Load {
        line: None,
        message: format!("weight file carries an invalid config: {e}"),
    })?;

    let d = config.d_model;
    let ff = config.d_ff();
    let tok_emb = read_matrix(&mut r, config.vocab_size, d)?;
    let pos_emb = read_matrix(&mut r, config.max_seq_len, d)?;
    let mut layers = Vec::with_capacity(config.n_layers);
    for _ in 0..config.n_layers {
        layers.push(LayerWeights {
            ln1: NormWeights {
                gain: read_vector(&mut r, d)?,
                bias: read_vector(&mut r, d)?,
            },
            wq: read_matrix(&mut r, d, d)?,
            wk: read_matrix(&mut r, d, d)?,
            wv: read_matrix(&mut r, d, d)?,
            wo: read_matrix(&mut r, d, d)?,
            ln2: NormWeights {
                gain: read_vector(&mut r, d)?,
                bias: read_vector(&mut r, d)?,
            },
            w_up: read_matrix(&mut r, d, ff)?,
            w_down: read_matrix(&mut r, ff, d)?,
        });
    }
    let final_norm = NormWeights {
        gain: read_vector(&mut r, d)?,
        bias: read_vector(&mut r, d)?,
    };
    let unembed = read_matrix(&mut r, d, config.vocab_size)?;

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Load {
            line: None,
            message: "trailing bytes after final tensor; config does not match payload".into(),
        });
    }

    Ok(Model::from_parts(
        config,
        Weights {
            tok_emb,
            pos_emb,
            layers,
            final_norm,
            unembed,
        },
    ))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_vector(r: &mut impl Read, len: usize) -> Result<Array1<f32>> {
    let mut data = vec![0f32; len];
    for v in &mut data {
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf).map_err(truncated)?;
        *v = f32::from_le_bytes(buf);
    }
    Ok(Array1::from_vec(data))
}

fn read_matrix(r: &mut impl Read, rows: usize, cols: usize) -> Result<Array2<f32>> {
    let flat = read_vector(r, rows * cols)?;
    Ok(flat
        .into_shape_with_order((rows, cols))
        .expect("shape matches length"))
}

fn truncated(_: std::io::Error) -> Error {
    Error::Load {
        line: None,
        message: "file shorter than the config demands; config does not match payload".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_weights_and_id() {
        let model = Model::init(ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 8,
            d_head: 4,
            vocab_size: 16,
            max_seq_len: 8,
            seed: 77,
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tlm");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.weight_checksum(), model.weight_checksum());
        assert_eq!(loaded.model_id(), model.model_id());
        assert_eq!(loaded.config(), model.config());
    }

    #[test]
    fn truncated_file_fails_loudly() {
        let model = Model::init(ModelConfig {
            n_layers: 2,
            n_heads: 1,
            d_model: 4,
            d_head: 4,
            vocab_size: 8,
            max_seq_len: 4,
            seed: 1,
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tlm");
        save_model(&model, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Load { .. })));
    }

    #[test]
    fn trailing_bytes_fail_loudly() {
        let model = Model::init(ModelConfig {
            n_layers: 2,
            n_heads: 1,
            d_model: 4,
            d_head: 4,
            vocab_size: 8,
            max_seq_len: 4,
            seed: 1,
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tlm");
        save_model(&model, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&[0, 0, 0, 0]);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Load { .. })));
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tlm");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(load_model(&path), Err(Error::Load { .. })));
    }
}
