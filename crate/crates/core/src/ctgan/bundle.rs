//! Binary model bundle.
//!
//! Layout (little endian):
//!
//! ```text
//! magic "CSYNBNDL" | version u32 | meta length u64 | meta JSON
//! generator ParamSet | discriminator ParamSet
//! ```
//!
//! The JSON meta block holds the schema, mode models, configuration, both
//! layer chains, category counts and the training history. A ParamSet is a
//! tensor count followed by `name length u64 | name | ndim u64 | dims u64… |
//! f64 data…` per tensor, then the running buffers in the same form.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::cond::CondLayout;
use super::config::CtganConfig;
use super::model::{CtganModel, TrainingHistory};
use crate::error::{Error, Result};
use crate::mode_norm::ModeModel;
use crate::neural::{Network, ParamSet};
use crate::tabular::{DataSchema, Encoder};

const MAGIC: &[u8; 8] = b"CSYNBNDL";
pub const BUNDLE_VERSION: u32 = 1;
const MAX_NAME: u64 = 4096;

#[derive(Serialize, Deserialize)]
struct Meta {
    schema: DataSchema,
    mode_models: Vec<ModeModel>,
    config: CtganConfig,
    generator: Network,
    discriminator: Network,
    category_counts: Vec<Vec<usize>>,
    history: TrainingHistory,
}

impl CtganModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CtganModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<CtganModel> {
        Self::read_from(&mut &bytes[..])
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let meta = Meta {
            schema: self.schema().clone(),
            mode_models: self.encoder.mode_models().to_vec(),
            config: self.config.clone(),
            generator: self.generator.clone(),
            discriminator: self.discriminator.clone(),
            category_counts: self.category_counts.clone(),
            history: self.history.clone(),
        };
        let json = serde_json::to_vec(&meta).map_err(std::io::Error::other)?;
        w.write_all(MAGIC)?;
        w.write_all(&BUNDLE_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        write_params(w, &self.generator_params)?;
        write_params(w, &self.discriminator_params)
    }

    fn read_from<R: Read>(r: &mut R) -> Result<CtganModel> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Bundle("not a model bundle (bad magic)".into()));
        }
        let mut v = [0u8; 4];
        read_exact(r, &mut v)?;
        let version = u32::from_le_bytes(v);
        if version != BUNDLE_VERSION {
            return Err(Error::Bundle(format!("unsupported bundle version {version}")));
        }
        let len = read_u64(r)?;
        let mut json = vec![0u8; usize::try_from(len).map_err(|_| Error::Bundle("meta too large".into()))?];
        read_exact(r, &mut json)?;
        let meta: Meta = serde_json::from_slice(&json).map_err(|e| Error::Bundle(format!("meta block: {e}")))?;
        let generator_params = read_params(r)?;
        let discriminator_params = read_params(r)?;
        meta.config.validate()?;
        let encoder = Encoder::new(Arc::new(meta.schema), meta.mode_models)?;
        let layout = CondLayout::new(encoder.schema());
        meta.generator.check_params(&generator_params)?;
        meta.discriminator.check_params(&discriminator_params)?;
        if meta.generator.input_dim() != meta.config.z_dim + layout.width || meta.generator.output_dim() != encoder.width() {
            return Err(Error::Bundle("generator widths do not match the schema".into()));
        }
        if meta.discriminator.input_dim() != meta.config.pac * (encoder.width() + layout.width) {
            return Err(Error::Bundle("discriminator width does not match the schema".into()));
        }
        if meta.category_counts.len() != layout.columns.len()
            || meta.category_counts.iter().zip(&layout.sizes).any(|(c, &k)| c.len() != k)
        {
            return Err(Error::Bundle("category counts do not match the schema".into()));
        }
        Ok(CtganModel {
            encoder,
            layout,
            config: meta.config,
            generator: meta.generator,
            generator_params,
            discriminator: meta.discriminator,
            discriminator_params,
            category_counts: meta.category_counts,
            history: meta.history,
        })
    }
}

fn write_tensor<W: Write>(w: &mut W, name: &str, dims: &[usize], data: impl Iterator<Item = f64>) -> std::io::Result<()> {
    w.write_all(&(name.len() as u64).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(dims.len() as u64).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_params<W: Write>(w: &mut W, p: &ParamSet) -> std::io::Result<()> {
    w.write_all(&(p.tensors.len() as u64).to_le_bytes())?;
    for (name, t) in p.names.iter().zip(&p.tensors) {
        write_tensor(w, name, t.shape(), t.iter().copied())?;
    }
    w.write_all(&(p.buffers.len() as u64).to_le_bytes())?;
    for (name, b) in p.buffer_names.iter().zip(&p.buffers) {
        write_tensor(w, name, b.shape(), b.iter().copied())?;
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Bundle(format!("truncated bundle: {e}")))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_tensor<R: Read>(r: &mut R) -> Result<(String, Vec<usize>, Vec<f64>)> {
    let len = read_u64(r)?;
    if len > MAX_NAME {
        return Err(Error::Bundle(format!("tensor name of {len} bytes")));
    }
    let mut name = vec![0u8; len as usize];
    read_exact(r, &mut name)?;
    let name = String::from_utf8(name).map_err(|_| Error::Bundle("tensor name is not UTF-8".into()))?;
    let ndim = read_u64(r)?;
    if ndim > 2 {
        return Err(Error::Bundle(format!("tensor {name} has {ndim} dimensions")));
    }
    let dims: Vec<usize> = (0..ndim).map(|_| read_u64(r).map(|d| d as usize)).collect::<Result<_>>()?;
    let count = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| Error::Bundle("tensor too large".into()))?;
    let mut data = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        let mut b = [0u8; 8];
        read_exact(r, &mut b)?;
        let v = f64::from_le_bytes(b);
        if !v.is_finite() {
            return Err(Error::Bundle(format!("tensor {name} holds a non-finite value")));
        }
        data.push(v);
    }
    Ok((name, dims, data))
}

fn read_params<R: Read>(r: &mut R) -> Result<ParamSet> {
    let mut p = ParamSet {
        names: Vec::new(),
        tensors: Vec::new(),
        buffer_names: Vec::new(),
        buffers: Vec::new(),
    };
    for _ in 0..read_u64(r)? {
        let (name, dims, data) = read_tensor(r)?;
        if dims.len() != 2 {
            return Err(Error::Bundle(format!("parameter {name} is not a matrix")));
        }
        p.tensors.push(Array2::from_shape_vec((dims[0], dims[1]), data).expect("dims match data"));
        p.names.push(name);
    }
    for _ in 0..read_u64(r)? {
        let (name, dims, data) = read_tensor(r)?;
        if dims.len() != 1 {
            return Err(Error::Bundle(format!("buffer {name} is not a vector")));
        }
        p.buffers.push(Array1::from(data));
        p.buffer_names.push(name);
    }
    Ok(p)
}
