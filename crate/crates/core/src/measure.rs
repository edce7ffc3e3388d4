//! Gaussian measurement ensembles, one-bit quantization and the three
//! distances linking sign patterns to sphere geometry.
//!
//! Entries are standard normal. Sign quantization is invariant under a
//! common positive rescaling of `A`, so the choice of entry variance does not
//! change any bit vector.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::cloud::{ByteReader, PointCloud};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm};
use crate::rng::{derive_seed, rng_from_seed, tags};

const MAGIC: &[u8; 4] = b"OMSA";

/// `sign` with the convention `sign(0) = +1`.
pub fn sign(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

/// An `m x D` matrix of i.i.d. `N(0, 1)` rows `a_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    rows: usize,
    dim: usize,
    seed: u64,
    entries: Vec<f64>,
}

impl Ensemble {
    /// Draws the matrix row-major from the ChaCha20 stream of `seed`.
    ///
    /// Because draws are row-major, the first `m'` rows of an ensemble with
    /// `m > m'` rows equal the ensemble with `m'` rows and the same seed.
    pub fn gaussian(rows: usize, dim: usize, seed: u64) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::Domain("ensemble needs m >= 1 and D >= 1".into()));
        }
        let mut rng = rng_from_seed(seed);
        let entries = (0..rows * dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            rows,
            dim,
            seed,
            entries,
        })
    }

    pub fn from_entries(rows: usize, dim: usize, seed: u64, entries: Vec<f64>) -> Result<Self> {
        check_dim(rows * dim, entries.len())?;
        if rows == 0 || dim == 0 {
            return Err(Error::Domain("ensemble needs m >= 1 and D >= 1".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("ensemble entries must be finite".into()));
        }
        Ok(Self {
            rows,
            dim,
            seed,
            entries,
        })
    }

    /// Number of measurements `m`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.entries[l * self.dim..(l + 1) * self.dim]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Same ensemble with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// `A x`.
    pub fn measure(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(self.entries.chunks_exact(self.dim).map(|a| dot(a, x)).collect())
    }

    /// `sign(A x)`.
    pub fn quantize(&self, x: &[f64]) -> Result<BitVector> {
        check_dim(self.dim, x.len())?;
        Ok(BitVector::from_fn(self.rows, |l| sign(dot(self.row(l), x))))
    }

    /// `w = sum_l (-y_l) a_l`, so that `sum_l (-y_l) <a_l, z> = <w, z>`.
    pub fn objective_vector(&self, y: &BitVector) -> Result<Vec<f64>> {
        check_dim(self.rows, y.len())?;
        let mut w = vec![0.0; self.dim];
        for l in 0..self.rows {
            let s = -f64::from(y.get(l));
            for (wi, ai) in w.iter_mut().zip(self.row(l)) {
                *wi += s * ai;
            }
        }
        Ok(w)
    }

    /// Writes the `OMSA` format: magic, `u32` m, `u32` D, `u64` seed, then
    /// `m * D` little-endian `f64` entries, row-major.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.rows as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.entries {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = ByteReader::new(r);
        r.expect_magic(MAGIC)?;
        let rows = r.u32_le()? as usize;
        let dim = r.u32_le()? as usize;
        let seed = r.u64_le()?;
        let entries = r.f64_vec(rows * dim)?;
        Self::from_entries(rows, dim, seed, entries)
    }
}

/// A sign pattern in `{-1, +1}^m`, packed one bit per entry (set = `-1`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> i8) -> Self {
        let mut words = vec![0u64; len.div_ceil(64)];
        for l in 0..len {
            if f(l) < 0 {
                words[l / 64] |= 1 << (l % 64);
            }
        }
        Self { len, words }
    }

    /// Builds from explicit signs. Any value other than `-1` or `+1` is
    /// rejected.
    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Domain("bit vector entries must be -1 or +1".into()));
        }
        Ok(Self::from_fn(signs.len(), |l| signs[l]))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, l: usize) -> i8 {
        assert!(l < self.len, "bit index {l} out of range {}", self.len);
        if self.words[l / 64] >> (l % 64) & 1 == 1 {
            -1
        } else {
            1
        }
    }

    pub fn to_signs(&self) -> Vec<i8> {
        (0..self.len).map(|l| self.get(l)).collect()
    }

    /// First `len` entries.
    pub fn truncated(&self, len: usize) -> Self {
        Self::from_fn(len.min(self.len), |l| self.get(l))
    }

    /// Text form: one `+` or `-` per entry.
    pub fn to_text(&self) -> String {
        (0..self.len)
            .map(|l| if self.get(l) < 0 { '-' } else { '+' })
            .collect()
    }

    pub fn parse_text(s: &str) -> Result<Self> {
        let signs = s
            .trim()
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::Domain(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::from_signs(&signs)
    }

    /// Positions where the patterns differ, via XOR and popcount.
    pub fn hamming(&self, other: &BitVector) -> Result<usize> {
        check_dim(self.len, other.len)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }
}

/// `d_H(y1, y2)`.
pub fn hamming(y1: &BitVector, y2: &BitVector) -> Result<usize> {
    y1.hamming(y2)
}

/// A vector of unit Euclidean norm (within `1e-12`).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if (norm(&coords) - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("vector is not unit norm".into()));
        }
        Ok(Self(coords))
    }

    /// `P_S(z) = z / |z|`.
    pub fn normalize(z: &[f64]) -> Result<Self> {
        let n = norm(z);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateInput("cannot project a zero vector onto the sphere"));
        }
        Ok(Self(z.iter().map(|v| v / n).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn nonzero(z: &[f64]) -> Result<()> {
    if z.iter().all(|&v| v == 0.0) {
        Err(Error::DegenerateInput("zero vector"))
    } else {
        Ok(())
    }
}

/// `d_A(z1, z2) = d_H(sign(A z1), sign(A z2)) / m`.
pub fn measurement_distance(ensemble: &Ensemble, z1: &[f64], z2: &[f64]) -> Result<f64> {
    nonzero(z1)?;
    nonzero(z2)?;
    let h = ensemble.quantize(z1)?.hamming(&ensemble.quantize(z2)?)?;
    Ok(h as f64 / ensemble.rows() as f64)
}

/// Normalized geodesic distance between `P_S(z1)` and `P_S(z2)`: the angle
/// divided by `pi`, so antipodes are at distance 1.
///
/// The angle is computed as `2 atan2(|u - v|, |u + v|)`, which agrees with
/// `arccos(<u, v>)` but stays accurate for nearly equal or nearly antipodal
/// pairs and never leaves `[0, pi]`.
pub fn geodesic_distance(z1: &[f64], z2: &[f64]) -> Result<f64> {
    check_dim(z1.len(), z2.len())?;
    let u = UnitVector::normalize(z1)?;
    let v = UnitVector::normalize(z2)?;
    let (u, v) = (u.as_slice(), v.as_slice());
    let diff = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let sum = u.iter().zip(v).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
    let angle = 2.0 * diff.atan2(sum);
    Ok((angle / PI).clamp(0.0, 1.0))
}

/// Empirical `delta` of a uniform tessellation: the largest `|d_A - d_G|`
/// over `pairs` point pairs drawn (with replacement) from `points`.
///
/// Pairs come from a stream derived from the ensemble seed, so ensembles
/// sharing a seed are compared on the same pairs.
pub fn tessellation_uniformity(
    ensemble: &Ensemble,
    points: &PointCloud,
    pairs: usize,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyInput("tessellation needs at least one point"));
    }
    if pairs == 0 {
        return Err(Error::Domain("need at least one pair".into()));
    }
    check_dim(ensemble.dim(), points.dim())?;
    let bits = points
        .points()
        .map(|p| {
            nonzero(p)?;
            ensemble.quantize(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = rng_from_seed(derive_seed(ensemble.seed(), tags::PAIRS));
    let n = points.len();
    let m = ensemble.rows() as f64;
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let d_a = bits[i].hamming(&bits[j])? as f64 / m;
        let d_g = geodesic_distance(points.point(i), points.point(j))?;
        worst = worst.max((d_a - d_g).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dist;

    fn fixed_unit(dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        UnitVector::normalize(&v).unwrap().into_inner()
    }

    #[test]
    fn quantize_coordinate_axes() {
        let a = Ensemble::from_entries(2, 2, 0, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a.quantize(&[3.0, -2.0]).unwrap().to_signs(), vec![1, -1]);
    }

    #[test]
    fn sign_of_zero_is_plus() {
        let a = Ensemble::from_entries(1, 2, 0, vec![1.0, 0.0]).unwrap();
        assert_eq!(a.quantize(&[0.0, 5.0]).unwrap().to_signs(), vec![1]);
    }

    #[test]
    fn quantize_matches_naive_double_loop() {
        let a = Ensemble::gaussian(64, 8, 11).unwrap();
        let x = fixed_unit(8, 12);
        let bits = a.quantize(&x).unwrap();
        for l in 0..64 {
            let mut acc = 0.0;
            for i in 0..8 {
                acc += a.entries()[l * 8 + i] * x[i];
            }
            let want = if acc < 0.0 { -1 } else { 1 };
            assert_eq!(bits.get(l), want);
        }
        let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert_eq!(a.quantize(&doubled).unwrap(), bits);
    }

    #[test]
    fn quantize_dimension_error() {
        let a = Ensemble::gaussian(4, 3, 0).unwrap();
        assert!(matches!(a.quantize(&[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn same_seed_same_matrix() {
        let a = Ensemble::gaussian(10, 5, 99).unwrap();
        let b = Ensemble::gaussian(10, 5, 99).unwrap();
        assert_eq!(a.entries(), b.entries());
        let prefix = Ensemble::gaussian(4, 5, 99).unwrap();
        assert_eq!(prefix.entries(), &a.entries()[..20]);
    }

    #[test]
    fn hamming_examples() {
        let y1 = BitVector::from_signs(&[1, -1, 1]).unwrap();
        let y2 = BitVector::from_signs(&[1, 1, -1]).unwrap();
        assert_eq!(hamming(&y1, &y1).unwrap(), 0);
        assert_eq!(hamming(&y1, &y2).unwrap(), 2);
        let short = BitVector::from_signs(&[1]).unwrap();
        assert!(matches!(hamming(&y1, &short), Err(Error::Dimension { .. })));
        assert!(BitVector::from_signs(&[0]).is_err());
    }

    #[test]
    fn hamming_matches_positional_loop() {
        let mut rng = rng_from_seed(5);
        let s1: Vec<i8> = (0..1000).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let s2: Vec<i8> = (0..1000).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let naive = s1.iter().zip(&s2).filter(|(a, b)| a != b).count();
        let h = hamming(&BitVector::from_signs(&s1).unwrap(), &BitVector::from_signs(&s2).unwrap());
        assert_eq!(h.unwrap(), naive);
    }

    #[test]
    fn text_round_trip() {
        let y = BitVector::from_signs(&[1, -1, -1, 1]).unwrap();
        assert_eq!(y.to_text(), "+--+");
        assert_eq!(BitVector::parse_text("+--+\n").unwrap(), y);
        assert!(BitVector::parse_text("+0").is_err());
    }

    #[test]
    fn measurement_distance_examples() {
        let a = Ensemble::gaussian(10, 4, 3).unwrap();
        let z1 = [0.3, -1.0, 0.2, 0.5];
        let z2 = [0.1, 0.4, -0.9, 0.2];
        assert_eq!(measurement_distance(&a, &z1, &z1).unwrap(), 0.0);
        let neg: Vec<f64> = z1.iter().map(|v| -v).collect();
        assert_eq!(measurement_distance(&a, &z1, &neg).unwrap(), 1.0);
        // hand count of disagreements
        let mut count = 0;
        for l in 0..10 {
            let r = a.row(l);
            let s1 = r.iter().zip(&z1).map(|(p, q)| p * q).sum::<f64>() >= 0.0;
            let s2 = r.iter().zip(&z2).map(|(p, q)| p * q).sum::<f64>() >= 0.0;
            if s1 != s2 {
                count += 1;
            }
        }
        assert_eq!(measurement_distance(&a, &z1, &z2).unwrap(), count as f64 / 10.0);
        assert!(matches!(
            measurement_distance(&a, &[0.0; 4], &z2),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn geodesic_examples() {
        assert_eq!(geodesic_distance(&[1.0, 2.0], &[-1.0, -2.0]).unwrap(), 1.0);
        assert_eq!(geodesic_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(geodesic_distance(&[0.3, 0.4], &[0.6, 0.8]).unwrap(), 0.0);
        assert!(matches!(
            geodesic_distance(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn geodesic_lemma_on_random_pairs() {
        let mut rng = rng_from_seed(17);
        for _ in 0..10_000 {
            let dim = rng.random_range(2..12);
            let u = fixed_unit(dim, rng.random());
            let v = fixed_unit(dim, rng.random());
            let dg = geodesic_distance(&u, &v).unwrap();
            let e = dist(&u, &v);
            assert!(dg <= e + 1e-12, "{dg} > {e}");
            assert!(e <= PI * dg + 1e-12, "{e} > pi * {dg}");
        }
    }

    #[test]
    fn tessellation_single_point_is_zero() {
        let a = Ensemble::gaussian(50, 3, 1).unwrap();
        let cloud = PointCloud::new(3, [0.6, 0.0, 0.8].repeat(5)).unwrap();
        assert_eq!(tessellation_uniformity(&a, &cloud, 20).unwrap(), 0.0);
        assert!(matches!(
            tessellation_uniformity(&a, &PointCloud::empty(3), 1),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn antipodal_pair_flips_every_sign() {
        let a = Ensemble::gaussian(10_000, 3, 2).unwrap();
        let z = [0.6, 0.0, 0.8];
        let cloud = PointCloud::new(3, vec![0.6, 0.0, 0.8, -0.6, -0.0, -0.8]).unwrap();
        let d = measurement_distance(&a, &z, &[-0.6, 0.0, -0.8]).unwrap();
        assert!((d - 1.0).abs() <= 0.05);
        assert!(tessellation_uniformity(&a, &cloud, 50).unwrap() <= 0.05);
    }

    #[test]
    fn ensemble_file_round_trip() {
        let a = Ensemble::gaussian(7, 3, u64::MAX - 3).unwrap();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 7 * 3 * 8);
        assert_eq!(Ensemble::read_from(buf.as_slice()).unwrap(), a);
        buf[0] = b'X';
        assert!(matches!(
            Ensemble::read_from(buf.as_slice()),
            Err(Error::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn objective_vector_matches_sum() {
        let a = Ensemble::gaussian(5, 2, 4).unwrap();
        let y = BitVector::from_signs(&[1, -1, 1, 1, -1]).unwrap();
        let w = a.objective_vector(&y).unwrap();
        let z = [0.3, -0.7];
        let direct: f64 = (0..5).map(|l| -f64::from(y.get(l)) * dot(a.row(l), &z)).sum();
        assert!((dot(&w, &z) - direct).abs() < 1e-12);
    }
}
