//! Binary model format.
//!
//! Layout: magic `PCNN`, format version (u16 LE), trained K (u16 LE), then
//! each parameter tensor in fixed order (conv1 w/b, conv2 w/b, conv3 w/b,
//! dense1 w/b, out w/b) as a dimension count (u8), the dimensions (u32 LE
//! each) and the values (f64 LE); then the four normalization statistics
//! (mean_re, mean_im, std_re, std_im as f64 LE) and a CRC-32 trailer over
//! everything before it.

use std::path::Path;

use crate::data::NormStats;
use crate::error::{CnnError, Result};
use crate::model::{
    CnnModel, CONV1_FILTERS, CONV2_FILTERS, CONV3_FILTERS, DENSE_UNITS, FORMAT_VERSION,
};

const MAGIC: &[u8; 4] = b"PCNN";

fn tensor_dims(model: &CnnModel) -> [Vec<u32>; 10] {
    let k = model.trained_k as u32;
    let flat = k * 2 * CONV3_FILTERS as u32;
    [
        vec![2, 2, 1, CONV1_FILTERS as u32],
        vec![CONV1_FILTERS as u32],
        vec![2, 2, CONV1_FILTERS as u32, CONV2_FILTERS as u32],
        vec![CONV2_FILTERS as u32],
        vec![2, 2, CONV2_FILTERS as u32, CONV3_FILTERS as u32],
        vec![CONV3_FILTERS as u32],
        vec![flat, DENSE_UNITS as u32],
        vec![DENSE_UNITS as u32],
        vec![DENSE_UNITS as u32, k],
        vec![k],
    ]
}

pub fn model_to_bytes(model: &CnnModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&model.version.to_le_bytes());
    buf.extend_from_slice(&(model.trained_k as u16).to_le_bytes());
    for (dims, values) in tensor_dims(model).iter().zip(model.param_slices()) {
        buf.push(dims.len() as u8);
        for d in dims {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        for v in values.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for v in [
        model.norm_stats.mean[0],
        model.norm_stats.mean[1],
        model.norm_stats.std[0],
        model.norm_stats.std[1],
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(CnnError::CorruptModel("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn model_from_bytes(buf: &[u8]) -> Result<CnnModel> {
    if buf.len() < MAGIC.len() + 4 + 4 {
        return Err(CnnError::CorruptModel("file too short".into()));
    }
    let (body, trailer) = buf.split_at(buf.len() - 4);
    let stored_crc = u32::from_le_bytes(trailer.try_into().unwrap());
    let actual_crc = crc32fast::hash(body);
    if stored_crc != actual_crc {
        return Err(CnnError::CorruptModel(format!(
            "CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CnnError::CorruptModel("bad magic bytes".into()));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(CnnError::CorruptModel(format!("unsupported format version {version}")));
    }
    let trained_k = r.u16()? as usize;
    if trained_k == 0 {
        return Err(CnnError::CorruptModel("trained K must be positive".into()));
    }

    let mut model = CnnModel::init(trained_k, NormStats::identity(), 0)?;
    model.version = version;
    let expected = tensor_dims(&model);
    for (dims, values) in expected.iter().zip(model.param_slices_mut()) {
        let ndims = r.u8()? as usize;
        if ndims != dims.len() {
            return Err(CnnError::CorruptModel(format!(
                "tensor rank {ndims} does not match expected {}",
                dims.len()
            )));
        }
        for want in dims {
            let got = r.u32()?;
            if got != *want {
                return Err(CnnError::CorruptModel(format!(
                    "tensor dimension {got} does not match expected {want}"
                )));
            }
        }
        for v in values.iter_mut() {
            *v = r.f64()?;
        }
    }
    let mean = [r.f64()?, r.f64()?];
    let std = [r.f64()?, r.f64()?];
    if r.pos != body.len() {
        return Err(CnnError::CorruptModel(format!(
            "{} trailing bytes before the checksum",
            body.len() - r.pos
        )));
    }
    model.norm_stats = NormStats { mean, std };
    Ok(model)
}

pub fn save_model(model: &CnnModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<CnnModel> {
    model_from_bytes(&std::fs::read(path)?)
}
