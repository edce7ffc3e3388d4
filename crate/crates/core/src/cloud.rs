//! Point clouds: `n` samples in ambient dimension `D`, stored row-major.

use std::io::{Read, Write};

use crate::error::{check_dim, Error, Result};
use crate::linalg::norm;

const MAGIC: &[u8; 4] = b"OMSP";
const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
    normalized: bool,
}

impl PointCloud {
    /// Builds a cloud from row-major data. The `normalized` flag is set when
    /// every row has unit norm within `1e-9`.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("ambient dimension must be positive".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::Dimension {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("point cloud contains non-finite values".into()));
        }
        let normalized =
            !data.is_empty() && data.chunks_exact(dim).all(|r| (norm(r) - 1.0).abs() <= UNIT_TOL);
        Ok(Self {
            dim,
            data,
            normalized,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            check_dim(dim, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Self::new(dim, data)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
            normalized: false,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Scales every row to unit norm. Zero rows are rejected.
    pub fn normalize(&self) -> Result<Self> {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.dim) {
            let n = norm(row);
            if n == 0.0 {
                return Err(Error::DegenerateInput("cannot normalize a zero row"));
            }
            row.iter_mut().for_each(|v| *v /= n);
        }
        Self::new(self.dim, data)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        Self::new(self.dim, data).expect("rows of a valid cloud")
    }

    /// Indices of the first occurrence of every distinct row, in input order.
    pub fn distinct_indices(&self) -> Vec<usize> {
        let mut seen = std::collections::HashSet::with_capacity(self.len());
        (0..self.len())
            .filter(|&i| {
                let key: Vec<u64> = self.point(i).iter().map(|v| (v + 0.0).to_bits()).collect();
                seen.insert(key)
            })
            .collect()
    }

    /// Writes the `OMSP` binary format: magic, `u32` n, `u32` D, then the
    /// `n * D` entries as little-endian `f64`, row-major.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = ByteReader::new(r);
        r.expect_magic(MAGIC)?;
        let n = r.u32_le()? as usize;
        let dim = r.u32_le()? as usize;
        let data = r.f64_vec(n * dim)?;
        Self::new(dim, data)
    }
}

/// Reader that tracks its byte offset for error reporting.
pub(crate) struct ByteReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> ByteReader<R> {
    pub(crate) fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.offset
    }

    pub(crate) fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::format(self.offset, "unexpected end of file")
            } else {
                Error::Io(e)
            }
        })?;
        self.offset += N as u64;
        Ok(buf)
    }

    pub(crate) fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.bytes::<4>()?;
        if &got != magic {
            return Err(Error::format(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(&got),
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    pub(crate) fn u32_be(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.bytes()?))
    }

    pub(crate) fn u64_le(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    pub(crate) fn f64_vec(&mut self, count: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            out.push(f64::from_le_bytes(self.bytes()?));
        }
        Ok(out)
    }

    pub(crate) fn u32_vec(&mut self, count: usize) -> Result<Vec<u32>> {
        (0..count).map(|_| self.u32_le()).collect()
    }
}
