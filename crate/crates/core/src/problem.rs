//! Sparse ground truth, sensing matrices and the measurement model `y = Φx + v`.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

/// Distribution of the nonzero entries of a generated sparse signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonzeroDist {
    /// Uniform on `[-1, 1]`.
    UniformSym,
    /// Magnitude uniform on `[0.5, 1]` with an independent random sign.
    UniformAnnulus,
}

/// A K-sparse vector of length N.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    values: Vec<f64>,
    support: Vec<usize>,
}

impl SparseSignal {
    /// Draws a K-sparse signal: support by partial Fisher–Yates, then one
    /// value per support index in ascending index order.
    pub fn generate(n: usize, k: usize, dist: NonzeroDist, normalize: bool, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("sparsity K must be at least 1"));
        }
        if k > n {
            return Err(Error::dim(format!("sparsity K={k} exceeds length N={n}")));
        }
        let mut rng = stream(seed);
        let mut idx: Vec<usize> = (0..n).collect();
        for j in 0..k {
            let pick = rng.random_range(j..n);
            idx.swap(j, pick);
        }
        let mut support = idx[..k].to_vec();
        support.sort_unstable();

        let mut values = vec![0.0; n];
        for &s in &support {
            // A zero draw would silently shrink the support.
            let v = loop {
                let v = match dist {
                    NonzeroDist::UniformSym => rng.random_range(-1.0..=1.0),
                    NonzeroDist::UniformAnnulus => {
                        let mag: f64 = rng.random_range(0.5..=1.0);
                        if rng.random::<bool>() {
                            mag
                        } else {
                            -mag
                        }
                    }
                };
                if v != 0.0 {
                    break v;
                }
            };
            values[s] = v;
        }
        if normalize {
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            values.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Self { values, support })
    }

    /// Wraps a dense vector; the support is its set of nonzero indices.
    pub fn from_dense(values: Vec<f64>) -> Self {
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        Self { values, support }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    GaussianIid,
    Rademacher,
    /// Square matrix with orthonormal rows (used for fully determined checks).
    Orthogonal,
}

impl MatrixKind {
    fn tag(self) -> u8 {
        match self {
            MatrixKind::GaussianIid => 0,
            MatrixKind::Rademacher => 1,
            MatrixKind::Orthogonal => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(MatrixKind::GaussianIid),
            1 => Ok(MatrixKind::Rademacher),
            2 => Ok(MatrixKind::Orthogonal),
            t => Err(Error::Format(format!("unknown matrix kind tag {t}"))),
        }
    }
}

/// Dense M×N sensing matrix stored row-major, so row `i` is `φ(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    kind: MatrixKind,
    entry_variance: f64,
}

impl SensingMatrix {
    pub fn generate(m: usize, n: usize, kind: MatrixKind, entry_variance: f64, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::param(format!("matrix dimensions must be positive, got {m}x{n}")));
        }
        if !(entry_variance > 0.0) || !entry_variance.is_finite() {
            return Err(Error::param(format!("entry variance must be positive, got {entry_variance}")));
        }
        let mut rng = stream(seed);
        let scale = entry_variance.sqrt();
        let data = match kind {
            MatrixKind::GaussianIid => (0..m * n)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            MatrixKind::Rademacher => (0..m * n)
                .map(|_| if rng.random::<bool>() { scale } else { -scale })
                .collect(),
            MatrixKind::Orthogonal => {
                if m != n {
                    return Err(Error::dim(format!("orthogonal matrix must be square, got {m}x{n}")));
                }
                return Self::orthogonal(n, entry_variance, seed);
            }
        };
        Ok(Self {
            rows: m,
            cols: n,
            data,
            kind,
            entry_variance,
        })
    }

    /// Square matrix with mutually orthogonal rows of norm `sqrt(n * entry_variance)`,
    /// from modified Gram–Schmidt on a Gaussian draw.
    pub fn orthogonal(n: usize, entry_variance: f64, seed: u64) -> Result<Self> {
        let mut g = Self::generate(n, n, MatrixKind::GaussianIid, 1.0, seed)?;
        let row_norm = (n as f64 * entry_variance).sqrt();
        for i in 0..n {
            for j in 0..i {
                let (head, tail) = g.data.split_at_mut(i * n);
                let prev = &head[j * n..(j + 1) * n];
                let cur = &mut tail[..n];
                let proj = dot(prev, cur);
                cur.iter_mut().zip(prev).for_each(|(c, p)| *c -= proj * p);
            }
            let row = &mut g.data[i * n..(i + 1) * n];
            let norm = dot(row, row).sqrt();
            row.iter_mut().for_each(|v| *v /= norm);
        }
        g.data.iter_mut().for_each(|v| *v *= row_norm);
        g.kind = MatrixKind::Orthogonal;
        g.entry_variance = entry_variance;
        Ok(g)
    }

    /// Builds a matrix from explicit rows.
    pub fn from_rows(rows: Vec<Vec<f64>>, kind: MatrixKind, entry_variance: f64) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(Error::dim("matrix must have at least one row and column"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::dim("ragged matrix rows"));
        }
        Ok(Self {
            rows: m,
            cols: n,
            data: rows.into_iter().flatten().collect(),
            kind,
            entry_variance,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn entry_variance(&self) -> f64 {
        self.entry_variance
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dim(format!(
                "vector length {} does not match matrix column count {}",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y = Φx + v`, with `v = 0` when no noise is supplied.
pub fn measure(phi: &SensingMatrix, x: &[f64], noise: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut y = phi.matvec(x)?;
    if let Some(v) = noise {
        if v.len() != y.len() {
            return Err(Error::dim(format!(
                "noise length {} does not match measurement count {}",
                v.len(),
                y.len()
            )));
        }
        y.iter_mut().zip(v).for_each(|(yi, vi)| *yi += vi);
    }
    Ok(y)
}

/// One-based row index `k = (i mod M) + 1` visited at update `i` when the
/// measurements are reused cyclically.
#[inline]
pub fn recursive_index(i: usize, m: usize) -> usize {
    i % m + 1
}

/// Sensing matrix, measurements and (in simulation) the ground truth.
#[derive(Debug, Clone)]
pub struct ReconstructionProblem {
    pub phi: SensingMatrix,
    pub y: Vec<f64>,
    pub truth: Option<SparseSignal>,
}

const MAGIC: &[u8; 8] = b"MCCSPRB1";

impl ReconstructionProblem {
    pub fn new(phi: SensingMatrix, y: Vec<f64>, truth: Option<SparseSignal>) -> Result<Self> {
        if y.len() != phi.rows() {
            return Err(Error::dim(format!(
                "measurement length {} does not match row count {}",
                y.len(),
                phi.rows()
            )));
        }
        if let Some(x) = &truth {
            if x.len() != phi.cols() {
                return Err(Error::dim(format!(
                    "truth length {} does not match column count {}",
                    x.len(),
                    phi.cols()
                )));
            }
        }
        Ok(Self { phi, y, truth })
    }

    pub fn m(&self) -> usize {
        self.phi.rows()
    }

    pub fn n(&self) -> usize {
        self.phi.cols()
    }

    /// Little-endian binary container: magic, dims, kind, variance, matrix,
    /// measurements, optional truth.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.m() as u64).to_le_bytes())?;
        w.write_all(&(self.n() as u64).to_le_bytes())?;
        w.write_all(&[self.phi.kind.tag()])?;
        w.write_all(&self.phi.entry_variance.to_le_bytes())?;
        w.write_all(&[u8::from(self.truth.is_some())])?;
        for v in self.phi.as_slice().iter().chain(&self.y) {
            w.write_all(&v.to_le_bytes())?;
        }
        if let Some(x) = &self.truth {
            for v in x.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a problem container (bad magic)".into()));
        }
        let m = read_u64(&mut r)? as usize;
        let n = read_u64(&mut r)? as usize;
        let kind = MatrixKind::from_tag(read_u8(&mut r)?)?;
        let var = read_f64(&mut r)?;
        let has_truth = read_u8(&mut r)? != 0;
        let data = read_f64s(&mut r, m * n)?;
        let y = read_f64s(&mut r, m)?;
        let truth = if has_truth {
            Some(SparseSignal::from_dense(read_f64s(&mut r, n)?))
        } else {
            None
        };
        let phi = SensingMatrix {
            rows: m,
            cols: n,
            data,
            kind,
            entry_variance: var,
        };
        Self::new(phi, y, truth)
    }

    /// Matrix as CSV, one row of `Φ` per line.
    pub fn write_matrix_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for i in 0..self.m() {
            wtr.write_record(self.phi.row(i).iter().map(|v| v.to_string()))
                .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Measurements as a single CSV column.
    pub fn write_measurements_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for v in &self.y {
            wtr.write_record([v.to_string()]).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the pair written by [`Self::write_matrix_csv`] and
    /// [`Self::write_measurements_csv`]. The matrix kind and variance are not
    /// part of the CSV form and must be supplied.
    pub fn read_csv<R1: Read, R2: Read>(matrix: R1, measurements: R2, kind: MatrixKind, entry_variance: f64) -> Result<Self> {
        let rows = read_csv_rows(matrix)?;
        let y = read_csv_rows(measurements)?
            .into_iter()
            .map(|r| match r.as_slice() {
                [v] => Ok(*v),
                _ => Err(Error::Format("measurement CSV must have exactly one column".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        let phi = SensingMatrix::from_rows(rows, kind, entry_variance)?;
        Self::new(phi, y, None)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn read_csv_rows<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            rec.iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Format(format!("{f:?}: {e}"))))
                .collect()
        })
        .collect()
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    (0..count).map(|_| read_f64(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_norm_full_support() {
        let x = SparseSignal::generate(4, 4, NonzeroDist::UniformSym, true, 1).unwrap();
        assert!((x.norm_sq().sqrt() - 1.0).abs() < 1e-12);
        assert_eq!(x.support(), &[0, 1, 2, 3]);
    }

    #[test]
    fn desk_scale_signal() {
        let x = SparseSignal::generate(1000, 40, NonzeroDist::UniformSym, true, 11).unwrap();
        assert_eq!(x.sparsity(), 40);
        assert_eq!(x.values().iter().filter(|v| **v != 0.0).count(), 40);
        assert!((x.norm_sq().sqrt() - 1.0).abs() < 1e-12);
        let nz: Vec<usize> = (0..1000).filter(|&i| x.values()[i] != 0.0).collect();
        assert_eq!(nz, x.support());
    }

    #[test]
    fn annulus_magnitudes() {
        for seed in 0..1000 {
            let x = SparseSignal::generate(10, 3, NonzeroDist::UniformAnnulus, false, seed).unwrap();
            assert_eq!(x.sparsity(), 3);
            for &s in x.support() {
                let m = x.values()[s].abs();
                assert!((0.5..=1.0).contains(&m), "seed {seed}: {m}");
            }
        }
    }

    #[test]
    fn signal_errors() {
        assert!(matches!(
            SparseSignal::generate(3, 4, NonzeroDist::UniformSym, true, 0),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            SparseSignal::generate(3, 0, NonzeroDist::UniformSym, true, 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn gaussian_entry_variance() {
        let phi = SensingMatrix::generate(300, 1000, MatrixKind::GaussianIid, 1.0 / 300.0, 5).unwrap();
        let d = phi.as_slice();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        assert!((0.0030..=0.0037).contains(&var), "{var}");
    }

    #[test]
    fn rademacher_support_and_row_norms() {
        let phi = SensingMatrix::generate(2, 2, MatrixKind::Rademacher, 1.0, 9).unwrap();
        assert!(phi.as_slice().iter().all(|v| *v == 1.0 || *v == -1.0));

        let var = 0.25;
        let phi = SensingMatrix::generate(50, 80, MatrixKind::Rademacher, var, 3).unwrap();
        for i in 0..50 {
            assert_eq!(dot(phi.row(i), phi.row(i)), 80.0 * var);
        }
    }

    #[test]
    fn matrix_is_seed_deterministic() {
        let a = SensingMatrix::generate(20, 30, MatrixKind::GaussianIid, 0.1, 42).unwrap();
        let b = SensingMatrix::generate(20, 30, MatrixKind::GaussianIid, 0.1, 42).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn matrix_param_errors() {
        assert!(SensingMatrix::generate(0, 3, MatrixKind::GaussianIid, 1.0, 0).is_err());
        assert!(SensingMatrix::generate(3, 3, MatrixKind::GaussianIid, 0.0, 0).is_err());
        assert!(SensingMatrix::generate(3, 3, MatrixKind::GaussianIid, -1.0, 0).is_err());
    }

    #[test]
    fn orthogonal_rows() {
        let q = SensingMatrix::orthogonal(16, 1.0 / 16.0, 2).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let d = dot(q.row(i), q.row(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn measure_basics() {
        let phi = SensingMatrix::generate(3, 5, MatrixKind::GaussianIid, 1.0, 1).unwrap();
        assert_eq!(measure(&phi, &[0.0; 5], None).unwrap(), vec![0.0; 3]);

        let s = 0.5;
        let id = SensingMatrix::from_rows(
            (0..3).map(|i| (0..3).map(|j| if i == j { s } else { 0.0 }).collect()).collect(),
            MatrixKind::GaussianIid,
            s * s,
        )
        .unwrap();
        assert_eq!(measure(&id, &[1.0, -2.0, 4.0], None).unwrap(), vec![0.5, -1.0, 2.0]);

        assert!(matches!(measure(&phi, &[0.0; 4], None), Err(Error::Dimension(_))));
        assert!(matches!(measure(&phi, &[0.0; 5], Some(&[0.0; 2])), Err(Error::Dimension(_))));
    }

    #[test]
    fn measure_matches_triple_loop() {
        let phi = SensingMatrix::generate(5, 8, MatrixKind::GaussianIid, 1.0, 77).unwrap();
        let x = SparseSignal::generate(8, 3, NonzeroDist::UniformSym, false, 78).unwrap();
        let v = [0.1, -0.2, 0.3, 0.0, 0.05];
        let got = measure(&phi, x.values(), Some(&v)).unwrap();
        let raw = phi.as_slice();
        for i in 0..5 {
            let mut acc = 0.0;
            for j in 0..8 {
                acc += raw[i * 8 + j] * x.values()[j];
            }
            acc += v[i];
            assert!((got[i] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn recursive_index_examples() {
        assert_eq!(recursive_index(0, 300), 1);
        assert_eq!(recursive_index(300, 300), 1);
        assert_eq!(recursive_index(299, 300), 300);
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let phi = SensingMatrix::generate(4, 6, MatrixKind::Rademacher, 0.5, 3).unwrap();
        let x = SparseSignal::generate(6, 2, NonzeroDist::UniformSym, true, 4).unwrap();
        let y = measure(&phi, x.values(), None).unwrap();
        let p = ReconstructionProblem::new(phi, y, Some(x)).unwrap();

        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        let q = ReconstructionProblem::read_binary(buf.as_slice()).unwrap();
        assert_eq!(q.phi, p.phi);
        assert_eq!(q.y, p.y);
        assert_eq!(q.truth, p.truth);

        let (mut a, mut b) = (Vec::new(), Vec::new());
        p.write_matrix_csv(&mut a).unwrap();
        p.write_measurements_csv(&mut b).unwrap();
        let r = ReconstructionProblem::read_csv(a.as_slice(), b.as_slice(), MatrixKind::Rademacher, 0.5).unwrap();
        assert_eq!(r.phi, p.phi);
        assert_eq!(r.y, p.y);

        assert!(ReconstructionProblem::read_binary(&b"NOTMAGIC"[..]).is_err());
    }

    #[test]
    fn problem_dimension_check() {
        let phi = SensingMatrix::generate(4, 6, MatrixKind::GaussianIid, 1.0, 3).unwrap();
        assert!(ReconstructionProblem::new(phi, vec![0.0; 3], None).is_err());
    }

    proptest! {
        #[test]
        fn measure_is_linear(seed in 0u64..10_000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let phi = SensingMatrix::generate(6, 9, MatrixKind::GaussianIid, 1.0, seed).unwrap();
            let x1 = SparseSignal::generate(9, 4, NonzeroDist::UniformSym, false, seed + 1).unwrap();
            let x2 = SparseSignal::generate(9, 5, NonzeroDist::UniformSym, false, seed + 2).unwrap();
            let comb: Vec<f64> = x1.values().iter().zip(x2.values()).map(|(p, q)| a * p + b * q).collect();
            let lhs = measure(&phi, &comb, None).unwrap();
            let y1 = measure(&phi, x1.values(), None).unwrap();
            let y2 = measure(&phi, x2.values(), None).unwrap();
            for i in 0..6 {
                prop_assert!((lhs[i] - (a * y1[i] + b * y2[i])).abs() < 1e-10);
            }
        }

        #[test]
        fn recursive_index_period(m in 1usize..500, start in 0usize..10_000) {
            let mut seen = vec![false; m];
            for i in start..start + m {
                let k = recursive_index(i, m);
                prop_assert!((1..=m).contains(&k));
                prop_assert!(!seen[k - 1]);
                seen[k - 1] = true;
                prop_assert_eq!(k, recursive_index(i + m, m));
            }
        }
    }
}
