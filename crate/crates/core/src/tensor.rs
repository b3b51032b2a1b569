//! `PAFT` binary tensor files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | content                         |
//! |--------------|---------------------------------|
//! | 4            | magic `PAFT`                    |
//! | 2            | format version, `u16` = 1       |
//! | 1            | dtype, `u8` = 1 (`f32`)         |
//! | 1            | rank `r`, `u8`                  |
//! | 4·r          | dims, `u32` each, outermost first |
//! | 4·∏dims      | payload, `f32`, row-major       |
//!
//! Grids are stored as `[height, width]`; channel stacks as
//! `[channels, height, width]`. A vector grid occupies two consecutive
//! channels (u then v).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grids::{ScalarGrid, VectorGrid};
use crate::scalar::Real;

pub const MAGIC: [u8; 4] = *b"PAFT";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 1;
const HEADER_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<u32>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        if dims.len() > u8::MAX as usize {
            return Err(Error::InvalidGrid(format!("rank {} too large", dims.len())));
        }
        let n: usize = dims.iter().map(|&d| d as usize).product();
        if n != data.len() {
            return Err(Error::DimensionMismatch(format!("dims {dims:?} need {n} values, got {}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * (self.dims.len() + self.data.len()));
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(DTYPE_F32);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let truncated = |expected| Error::Truncated { expected, found: bytes.len() };
        if bytes.len() < 4 {
            return Err(truncated(HEADER_LEN));
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        if bytes.len() < HEADER_LEN {
            return Err(truncated(HEADER_LEN));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::VersionMismatch(version));
        }
        if bytes[6] != DTYPE_F32 {
            return Err(Error::UnsupportedDtype(bytes[6]));
        }
        let rank = bytes[7] as usize;
        let payload_start = HEADER_LEN + 4 * rank;
        if bytes.len() < payload_start {
            return Err(truncated(payload_start));
        }
        let dims: Vec<u32> = bytes[HEADER_LEN..payload_start]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or_else(|| Error::InvalidGrid(format!("dims {dims:?} overflow")))?;
        let expected = count
            .checked_mul(4)
            .and_then(|n| n.checked_add(payload_start))
            .ok_or_else(|| Error::InvalidGrid(format!("dims {dims:?} overflow")))?;
        if bytes.len() < expected {
            return Err(truncated(expected));
        }
        if bytes.len() > expected {
            return Err(Error::TrailingBytes(bytes.len() - expected));
        }
        let data = bytes[payload_start..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { dims, data })
    }

    /// Stacks equally sized grids as `[n, height, width]`.
    pub fn from_channels<T: Real>(channels: &[ScalarGrid<T>]) -> Result<Self> {
        let Some(first) = channels.first() else {
            return Tensor::new(vec![0, 0, 0], Vec::new());
        };
        if channels.iter().any(|g| !g.same_shape(first)) {
            return Err(Error::DimensionMismatch("channels differ in shape".into()));
        }
        let data = channels.iter().flat_map(|g| g.data().iter().map(|v| to_f32(*v))).collect();
        Tensor::new(vec![channels.len() as u32, first.height() as u32, first.width() as u32], data)
    }

    /// Stacks vector grids as `[2n, height, width]`, u plane before v plane.
    pub fn from_vector_channels<T: Real>(fields: &[VectorGrid<T>]) -> Result<Self> {
        let planes: Vec<ScalarGrid<T>> = fields
            .iter()
            .flat_map(|f| {
                let (u, v) = f.planes();
                [u, v]
            })
            .collect();
        Self::from_channels(&planes)
    }

    pub fn from_grid<T: Real>(grid: &ScalarGrid<T>) -> Self {
        let data = grid.data().iter().map(|v| to_f32(*v)).collect();
        Tensor { dims: vec![grid.height() as u32, grid.width() as u32], data }
    }

    /// Splits a rank-3 tensor into its channels.
    pub fn to_channels<T: Real>(&self) -> Result<Vec<ScalarGrid<T>>> {
        let [n, h, w] = self.dims[..] else {
            return Err(Error::InvalidGrid(format!("expected rank 3, got dims {:?}", self.dims)));
        };
        let plane = (h as usize) * (w as usize);
        if n == 0 {
            return Ok(Vec::new());
        }
        self.data
            .chunks_exact(plane.max(1))
            .take(n as usize)
            .map(|c| ScalarGrid::new(w as usize, h as usize, c.iter().map(|&v| T::lit(v as f64)).collect()))
            .collect()
    }

    pub fn to_vector_channels<T: Real>(&self) -> Result<Vec<VectorGrid<T>>> {
        let planes = self.to_channels::<T>()?;
        if planes.len() % 2 != 0 {
            return Err(Error::InvalidGrid(format!("odd channel count {} for vector fields", planes.len())));
        }
        planes.chunks_exact(2).map(|uv| VectorGrid::from_planes(&uv[0], &uv[1])).collect()
    }

    pub fn to_grid<T: Real>(&self) -> Result<ScalarGrid<T>> {
        let [h, w] = self.dims[..] else {
            return Err(Error::InvalidGrid(format!("expected rank 2, got dims {:?}", self.dims)));
        };
        ScalarGrid::new(w as usize, h as usize, self.data.iter().map(|&v| T::lit(v as f64)).collect())
    }
}

fn to_f32<T: Real>(v: T) -> f32 {
    v.to_f32().expect("finite grid value")
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor.encode()).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_grid_is_32_bytes() {
        let g = ScalarGrid::new(2, 2, vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let bytes = Tensor::from_grid(&g).encode();
        assert_eq!(bytes.len(), 32);
        assert_eq!(&bytes[..8], &[b'P', b'A', b'F', b'T', 1, 0, 1, 2]);
        assert_eq!(&bytes[8..16], &[2, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(Tensor::decode(&bytes).unwrap().to_grid::<f32>().unwrap(), g);
    }

    #[test]
    fn distinct_errors() {
        let good = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap().encode();
        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(Tensor::decode(&bad), Err(Error::BadMagic(m)) if &m == b"XXXX"));
        let mut v2 = good.clone();
        v2[4] = 2;
        assert!(matches!(Tensor::decode(&v2), Err(Error::VersionMismatch(2))));
        let mut f64ty = good.clone();
        f64ty[6] = 2;
        assert!(matches!(Tensor::decode(&f64ty), Err(Error::UnsupportedDtype(2))));
        assert!(matches!(Tensor::decode(&good[..good.len() - 1]), Err(Error::Truncated { .. })));
        assert!(matches!(Tensor::decode(&good[..10]), Err(Error::Truncated { .. })));
        assert!(matches!(Tensor::decode(&good[..2]), Err(Error::Truncated { .. })));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(Tensor::decode(&long), Err(Error::TrailingBytes(1))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.paft");
        let t = Tensor::new(vec![2, 1, 3], vec![0.5, -1.0, 3.25, 0.0, f32::MIN_POSITIVE, 7.0]).unwrap();
        write_tensor(&path, &t).unwrap();
        assert_eq!(read_tensor(&path).unwrap(), t);
        assert!(matches!(read_tensor(dir.path().join("missing.paft")), Err(Error::Io { .. })));
    }

    #[test]
    fn vector_channels_are_planar() {
        let v = VectorGrid::new(2, 1, vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let t = Tensor::from_vector_channels(std::slice::from_ref(&v)).unwrap();
        assert_eq!(t.dims(), &[2, 1, 2]);
        assert_eq!(t.data(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(t.to_vector_channels::<f32>().unwrap(), vec![v]);
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(
            dims in proptest::collection::vec(1u32..5, 0..4),
            seed in any::<u64>(),
        ) {
            let n: usize = dims.iter().map(|&d| d as usize).product();
            let data: Vec<f32> = (0..n as u64)
                .map(|i| f32::from_bits((seed.wrapping_mul(i + 1) >> 7) as u32 & 0x7f7f_ffff))
                .collect();
            let t = Tensor::new(dims, data).unwrap();
            let bytes = t.encode();
            let back = Tensor::decode(&bytes).unwrap();
            prop_assert_eq!(back.encode(), bytes);
        }
    }
}
