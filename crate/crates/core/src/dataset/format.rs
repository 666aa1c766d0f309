//! Binary sample format.
//!
//! Little-endian throughout. A 40-byte header
//!
//! | offset | size | field                                             |
//! |--------|------|---------------------------------------------------|
//! | 0      | 4    | magic `NFDS`                                      |
//! | 4      | 2    | version (`u16`, currently 1)                      |
//! | 6      | 2    | dtype (`u16`): 1 = complex f32 interleaved, 2 = f32 |
//! | 8      | 4    | rank (`u32`, 1..=5)                               |
//! | 12     | 20   | dims (`[u32; 5]`, unused trailing entries 0)      |
//! | 32     | 4    | label (`u32`)                                     |
//! | 36     | 4    | metadata length in bytes (`u32`)                  |
//!
//! is followed by UTF-8 JSON metadata and then the row-major payload of
//! 32-bit floats, `(re, im)` pairs for complex data.

use std::path::Path;

use ndarray::{Array4, Array5};
use num_complex::Complex64 as C64;
use serde_json::Value;

use crate::features::RealFeatureTensor;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"NFDS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 40;
pub const MAX_RANK: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum DType {
    Complex32 = 1,
    Float32 = 2,
}

impl DType {
    fn from_code(code: u16) -> Option<Self> {
        match code {
            1 => Some(Self::Complex32),
            2 => Some(Self::Float32),
            _ => None,
        }
    }

    fn floats_per_element(self) -> usize {
        match self {
            Self::Complex32 => 2,
            Self::Float32 => 1,
        }
    }
}

/// Dense row-major tensor of 32-bit floats, interleaved for complex data.
#[derive(Debug, Clone)]
pub struct SampleTensor {
    pub dtype: DType,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

impl PartialEq for SampleTensor {
    /// Bitwise equality of the payload.
    fn eq(&self, other: &Self) -> bool {
        self.dtype == other.dtype
            && self.dims == other.dims
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl SampleTensor {
    pub fn new(dtype: DType, dims: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_RANK {
            return Err(Error::Mismatch(format!("tensor rank must be 1..={MAX_RANK}, got {}", dims.len())));
        }
        let expected = dims.iter().product::<usize>() * dtype.floats_per_element();
        if values.len() != expected {
            return Err(Error::Mismatch(format!("dims {dims:?} need {expected} floats, got {}", values.len())));
        }
        Ok(Self { dtype, dims, values })
    }

    /// Stores a complex `(r, t, k, m)` tensor, rounding to `f32`.
    pub fn from_complex(data: &Array4<C64>) -> Self {
        let dims = data.shape().to_vec();
        let values = data.iter().flat_map(|z| [z.re as f32, z.im as f32]).collect();
        Self { dtype: DType::Complex32, dims, values }
    }

    pub fn to_complex(&self) -> Result<Array4<C64>> {
        if self.dtype != DType::Complex32 || self.dims.len() != 4 {
            return Err(Error::Mismatch(format!("expected a rank-4 complex tensor, got {:?} {:?}", self.dtype, self.dims)));
        }
        let z: Vec<C64> = self.values.chunks_exact(2).map(|p| C64::new(p[0] as f64, p[1] as f64)).collect();
        let d = &self.dims;
        Ok(Array4::from_shape_vec((d[0], d[1], d[2], d[3]), z).expect("length checked at construction"))
    }

    pub fn from_features(u: &RealFeatureTensor) -> Self {
        Self { dtype: DType::Float32, dims: u.data.shape().to_vec(), values: u.data.iter().copied().collect() }
    }

    pub fn to_features(&self, scale: f64, degenerate: bool) -> Result<RealFeatureTensor> {
        if self.dtype != DType::Float32 || self.dims.len() != 5 || self.dims[0] != 2 {
            return Err(Error::Mismatch(format!("expected a (2, ...) rank-5 real tensor, got {:?} {:?}", self.dtype, self.dims)));
        }
        let d = &self.dims;
        let data = Array5::from_shape_vec((d[0], d[1], d[2], d[3], d[4]), self.values.clone()).expect("length checked at construction");
        Ok(RealFeatureTensor { data, scale, degenerate })
    }

    fn payload_bytes(&self) -> usize {
        self.values.len() * 4
    }
}

/// One dataset record: tensor, class label and free-form JSON metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub label: u32,
    pub metadata: Value,
    pub tensor: SampleTensor,
}

impl DatasetSample {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.metadata)?;
        let t = &self.tensor;
        let mut out = Vec::with_capacity(HEADER_LEN + meta.len() + t.payload_bytes());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(t.dtype as u16).to_le_bytes());
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for i in 0..MAX_RANK {
            let d = t.dims.get(i).copied().unwrap_or(0);
            let d = u32::try_from(d).map_err(|_| Error::Mismatch(format!("dimension {d} does not fit the header")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&self.label.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        for v in &t.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    /// Parses a sample; `origin` names the source in error messages.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let fail = |reason: String| Error::Format { path: origin.to_path_buf(), reason };
        if bytes.len() < HEADER_LEN {
            return Err(fail(format!("truncated header: expected {HEADER_LEN} bytes, found {}", bytes.len())));
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
        if bytes[0..4] != MAGIC {
            return Err(fail(format!("bad magic {:?}", &bytes[0..4])));
        }
        let version = u16_at(4);
        if version != VERSION {
            return Err(fail(format!("unsupported version {version}, expected {VERSION}")));
        }
        let dtype = DType::from_code(u16_at(6)).ok_or_else(|| fail(format!("unknown dtype code {}", u16_at(6))))?;
        let rank = u32_at(8) as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(fail(format!("rank {rank} outside 1..={MAX_RANK}")));
        }
        let all_dims: Vec<usize> = (0..MAX_RANK).map(|i| u32_at(12 + 4 * i) as usize).collect();
        if all_dims[..rank].contains(&0) || all_dims[rank..].iter().any(|&d| d != 0) {
            return Err(fail(format!("inconsistent dims {all_dims:?} for rank {rank}")));
        }
        let dims = all_dims[..rank].to_vec();
        let label = u32_at(32);
        let meta_len = u32_at(36) as usize;

        let n_floats = dims
            .iter()
            .try_fold(dtype.floats_per_element(), |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| fail(format!("dims {dims:?} overflow")))?;
        let expected = HEADER_LEN as u128 + meta_len as u128 + 4 * n_floats as u128;
        if (bytes.len() as u128) < expected {
            return Err(fail(format!("truncated file: expected {expected} bytes, found {}", bytes.len())));
        }
        if bytes.len() as u128 != expected {
            return Err(fail(format!(
                "header dims {dims:?} imply {expected} bytes but the file has {}",
                bytes.len()
            )));
        }
        let meta_bytes = &bytes[HEADER_LEN..HEADER_LEN + meta_len];
        let metadata: Value = serde_json::from_slice(meta_bytes).map_err(|e| fail(format!("metadata is not valid JSON: {e}")))?;
        let values = bytes[HEADER_LEN + meta_len..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { label, metadata, tensor: SampleTensor { dtype, dims, values } })
    }
}

pub fn write_sample(path: &Path, sample: &DatasetSample) -> Result<()> {
    std::fs::write(path, sample.to_bytes()?)?;
    Ok(())
}

pub fn read_sample(path: &Path) -> Result<DatasetSample> {
    let bytes = std::fs::read(path)?;
    DatasetSample::from_bytes(&bytes, path)
}
