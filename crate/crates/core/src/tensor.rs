//! Grayscale 2D/3D intensity grids and the MIMG file format.
//!
//! MIMG layout (all integers and floats little-endian):
//!
//! ```text
//! "MIMG"  u32 version=1  u8 ndim  ndim x u64 dims  f32 values (row-major)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io_util::{read_exact_array, read_u32, read_u64, read_u8};

const MAGIC: &[u8; 4] = b"MIMG";
const VERSION: u32 = 1;

/// A 2D (`[rows, cols]`) or 3D (`[depth, rows, cols]`) grid of intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    dims: Vec<usize>,
    values: Vec<f32>,
}

impl ImageTensor {
    /// Build a tensor from values already in `[0, 1]`.
    pub fn new(dims: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        check_shape(&dims, values.len())?;
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::invalid(format!("intensity {v} outside [0, 1]")));
        }
        Ok(ImageTensor { dims, values })
    }

    /// Build a tensor from arbitrary finite values, min-max normalizing to `[0, 1]`.
    /// A constant input maps to all zeros.
    pub fn normalized(dims: Vec<usize>, mut values: Vec<f32>) -> Result<Self> {
        check_shape(&dims, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::format("non-finite value"));
        }
        min_max_normalize(&mut values);
        Ok(ImageTensor { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, vec![0.0; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of 2D slices along the leading axis (1 for a 2D image).
    pub fn depth(&self) -> usize {
        if self.dims.len() == 3 {
            self.dims[0]
        } else {
            1
        }
    }

    /// `(rows, cols)` of each 2D slice.
    pub fn plane_dims(&self) -> (usize, usize) {
        let n = self.dims.len();
        (self.dims[n - 2], self.dims[n - 1])
    }

    /// Borrow 2D slice `k` along the leading axis.
    pub fn slice(&self, k: usize) -> Option<&[f32]> {
        let (r, c) = self.plane_dims();
        (k < self.depth()).then(|| &self.values[k * r * c..(k + 1) * r * c])
    }

    /// Re-apply min-max normalization (identity for tensors that already span `[0, 1]`).
    pub fn renormalized(&self) -> ImageTensor {
        let mut values = self.values.clone();
        min_max_normalize(&mut values);
        ImageTensor {
            dims: self.dims.clone(),
            values,
        }
    }
}

fn check_shape(dims: &[usize], n_values: usize) -> Result<()> {
    if !(2..=3).contains(&dims.len()) {
        return Err(Error::format(format!("ndim must be 2 or 3, got {}", dims.len())));
    }
    if dims.contains(&0) {
        return Err(Error::format("zero-sized dimension"));
    }
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format("dims overflow"))?;
    if expected != n_values {
        return Err(Error::format(format!(
            "dims {dims:?} require {expected} values, found {n_values}"
        )));
    }
    Ok(())
}

fn min_max_normalize(values: &mut [f32]) {
    let (lo, hi) = values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let (lo, span) = (lo as f64, hi as f64 - lo as f64);
    for v in values.iter_mut() {
        *v = (((*v as f64) - lo) / span).clamp(0.0, 1.0) as f32;
    }
}

/// Read an MIMG file, validating layout and normalizing intensities to `[0, 1]`.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let mut r = BufReader::new(File::open(path)?);
    decode_tensor(&mut r)
}

pub fn decode_tensor(r: &mut impl Read) -> Result<ImageTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format("truncated header"))?;
    if &magic != MAGIC {
        return Err(Error::format("bad magic"));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported version {version}")));
    }
    let ndim = read_u8(r)? as usize;
    if !(2..=3).contains(&ndim) {
        return Err(Error::format(format!("ndim must be 2 or 3, got {ndim}")));
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(read_u64(r)? as usize);
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format("dims overflow"))?;
    let values = read_exact_array(r, n)
        .map_err(|_| Error::format("dim/value count mismatch: truncated values"))?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::format("dim/value count mismatch: trailing bytes"));
    }
    ImageTensor::normalized(dims, values)
}

pub fn encode_tensor(t: &ImageTensor, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[t.dims.len() as u8])?;
    for &d in &t.dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in &t.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_tensor(t: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_tensor(t, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(dims: &[u64], values: &[f32], magic: &[u8; 4]) -> Vec<u8> {
        let mut b = magic.to_vec();
        b.extend(1u32.to_le_bytes());
        b.push(dims.len() as u8);
        for d in dims {
            b.extend(d.to_le_bytes());
        }
        for v in values {
            b.extend(v.to_le_bytes());
        }
        b
    }

    #[test]
    fn min_max_by_hand() {
        let t = decode_tensor(&mut &raw(&[2, 2], &[0., 1., 2., 3.], MAGIC)[..]).unwrap();
        let expect = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in t.values().iter().zip(expect) {
            assert!((*a as f64 - b).abs() < 1e-7);
        }
    }

    #[test]
    fn constant_maps_to_zero() {
        let t = decode_tensor(&mut &raw(&[2, 2], &[5.; 4], MAGIC)[..]).unwrap();
        assert_eq!(t.values(), &[0.0; 4]);
    }

    #[test]
    fn rejects_bad_magic() {
        let err = decode_tensor(&mut &raw(&[2, 2], &[0.; 4], b"XXXX")[..]).unwrap_err();
        assert!(err.to_string().contains("bad magic"));
    }

    #[test]
    fn rejects_count_mismatch_and_nan() {
        assert!(decode_tensor(&mut &raw(&[2, 3], &[0.; 4], MAGIC)[..]).is_err());
        assert!(decode_tensor(&mut &raw(&[2, 2], &[0.; 5], MAGIC)[..]).is_err());
        assert!(decode_tensor(&mut &raw(&[2, 2], &[0., f32::NAN, 1., 1.], MAGIC)[..]).is_err());
        assert!(decode_tensor(&mut &raw(&[4], &[0.; 4], MAGIC)[..]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mimg");
        let t = ImageTensor::normalized(vec![2, 3, 2], (0..12).map(|v| v as f32).collect()).unwrap();
        write_tensor(&t, &p).unwrap();
        assert_eq!(read_tensor(&p).unwrap(), t);
        assert_eq!(t.depth(), 2);
        assert_eq!(t.slice(1).unwrap().len(), 6);
        assert!(t.slice(2).is_none());
    }
}
