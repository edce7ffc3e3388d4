//! MNIST in the IDX format: big-endian headers, `u8` payloads.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::cloud::{ByteReader, PointCloud};
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

pub const IMAGES_FILE: &str = "train-images-idx3-ubyte";
pub const LABELS_FILE: &str = "train-labels-idx1-ubyte";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` pixels, image-major then row-major.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let len = self.rows * self.cols;
        &self.pixels[i * len..(i + 1) * len]
    }
}

fn read_payload<R: Read>(r: &mut ByteReader<R>, len: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(len.min(1 << 28));
    for _ in 0..len {
        out.push(r.bytes::<1>()?[0]);
    }
    Ok(out)
}

fn expect_be_magic<R: Read>(r: &mut ByteReader<R>, magic: u32) -> Result<()> {
    let got = r.u32_be()?;
    if got != magic {
        return Err(Error::format(0, format!("bad IDX magic {got:#010x}, expected {magic:#010x}")));
    }
    Ok(())
}

pub fn parse_images<R: Read>(reader: R) -> Result<IdxImages> {
    let mut r = ByteReader::new(reader);
    expect_be_magic(&mut r, IMAGE_MAGIC)?;
    let count = r.u32_be()? as usize;
    let rows = r.u32_be()? as usize;
    let cols = r.u32_be()? as usize;
    let pixels = read_payload(&mut r, count * rows * cols)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_labels<R: Read>(reader: R) -> Result<Vec<u8>> {
    let mut r = ByteReader::new(reader);
    expect_be_magic(&mut r, LABEL_MAGIC)?;
    let count = r.u32_be()? as usize;
    read_payload(&mut r, count)
}

/// The first `n` images labelled `digit`, flattened, as raw pixel values or
/// scaled to unit norm. All-black images cannot be normalized and are
/// skipped in that mode.
pub fn select_digit(images: &IdxImages, labels: &[u8], digit: u8, n: usize, normalize: bool) -> Result<PointCloud> {
    if labels.len() != images.count {
        return Err(Error::Dimension {
            expected: images.count,
            found: labels.len(),
        });
    }
    let dim = images.rows * images.cols;
    let mut data = Vec::new();
    let mut taken = 0;
    for (i, &label) in labels.iter().enumerate() {
        if taken == n {
            break;
        }
        if label != digit {
            continue;
        }
        let px = images.image(i);
        let norm = px.iter().map(|&p| f64::from(p).powi(2)).sum::<f64>().sqrt();
        if normalize && norm == 0.0 {
            log::warn!("skipping blank image {i}");
            continue;
        }
        let s = if normalize { 1.0 / norm } else { 1.0 };
        data.extend(px.iter().map(|&p| f64::from(p) * s));
        taken += 1;
    }
    if taken < n {
        log::warn!("digit {digit}: requested {n} images, found {taken}");
    }
    PointCloud::new(dim, data)
}

/// Reads [`IMAGES_FILE`] and [`LABELS_FILE`] from `dir`.
pub fn load_mnist(dir: &Path, digit: u8, n: usize, normalize: bool) -> Result<PointCloud> {
    let images = parse_images(BufReader::new(File::open(dir.join(IMAGES_FILE))?))?;
    let labels = parse_labels(BufReader::new(File::open(dir.join(LABELS_FILE))?))?;
    select_digit(&images, &labels, digit, n, normalize)
}

/// Serializes images in the IDX layout, for fixtures.
pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
