//! Block-based image compressive sensing.
//!
//! Each `B×B` patch is taken to the orthonormal 2-D DCT domain, optionally
//! reduced to its `s` largest coefficients, measured through one sensing
//! matrix shared by all blocks, corrupted by noise, and recovered by a solver
//! working on unit-norm measurements. The recovered coefficients are scaled
//! back by the measurement norm and inverted.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::noise::{sample_noise, NoiseModel};
use crate::problem::{measure, MatrixKind, ReconstructionProblem, SensingMatrix};
use crate::rng::derive_seed;
use crate::solver::{run, SolverConfig, Variant};

pub const DEFAULT_BLOCK: usize = 32;

const MATRIX_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const SOLVER_STREAM: u64 = 2;

/// Grayscale image with real-valued pixels in `[0, 255]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::dim("image must have positive height and width"));
        }
        if pixels.len() != height * width {
            return Err(Error::dim(format!(
                "{} pixels do not fill a {height}x{width} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=255.0).contains(p)) {
            return Err(Error::param("pixel values must lie in [0, 255]"));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.width + c]
    }

    /// Reads a binary (P5) PGM with maxval up to 255.
    pub fn read_pgm<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut fields = Vec::new();
        while fields.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Format("truncated PGM header".into()));
            }
            let content = line.split('#').next().unwrap_or("");
            fields.extend(content.split_whitespace().map(str::to_owned));
        }
        if fields.len() != 4 || fields[0] != "P5" {
            return Err(Error::Format("expected a binary P5 PGM header".into()));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad PGM header field `{s}`")))
        };
        let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
        }
        let mut raw = vec![0u8; width * height];
        r.read_exact(&mut raw)
            .map_err(|_| Error::Format("PGM pixel data shorter than header promises".into()))?;
        let scale = 255.0 / maxval as f64;
        Self::new(height, width, raw.iter().map(|&p| (p as f64 * scale).min(255.0)).collect())
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| crate::error::with_path(e, path))?;
        Self::read_pgm(file)
    }

    /// Writes a P5 PGM, rounding and clamping pixels to 8 bits.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().map(|p| p.round().clamp(0.0, 255.0) as u8).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    /// Deterministic test pattern: a diagonal ramp with a bright disc, a dark
    /// square and a band of soft stripes.
    pub fn synthetic(height: usize, width: usize) -> Self {
        let (h, w) = (height as f64, width as f64);
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                let (y, x) = (r as f64 / h, c as f64 / w);
                let mut v = 60.0 + 90.0 * (x + y) / 2.0;
                if (x - 0.35).powi(2) + (y - 0.4).powi(2) < 0.04 {
                    v += 80.0;
                }
                if (0.6..0.85).contains(&x) && (0.55..0.8).contains(&y) {
                    v -= 50.0;
                }
                if y > 0.85 {
                    v += 25.0 * (x * 24.0).sin();
                }
                pixels.push(v.clamp(0.0, 255.0));
            }
        }
        Self { height, width, pixels }
    }

    /// Copies the `b×b` block at block coordinates `(br, bc)`, replicating
    /// edge pixels past the image boundary.
    fn block(&self, br: usize, bc: usize, b: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(b * b);
        for i in 0..b {
            let r = (br * b + i).min(self.height - 1);
            for j in 0..b {
                let c = (bc * b + j).min(self.width - 1);
                out.push(self.pixels[r * self.width + c]);
            }
        }
        out
    }
}

/// Orthonormal type-II 2-D DCT on `b×b` blocks stored row-major.
#[derive(Debug, Clone)]
pub struct Dct2 {
    b: usize,
    /// `basis[k * b + n] = a_k cos(pi (2n + 1) k / 2b)`.
    basis: Vec<f64>,
}

impl Dct2 {
    pub fn new(b: usize) -> Self {
        let mut basis = vec![0.0; b * b];
        let bf = b as f64;
        for k in 0..b {
            let a = if k == 0 { (1.0 / bf).sqrt() } else { (2.0 / bf).sqrt() };
            for n in 0..b {
                basis[k * b + n] = a * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2.0 * bf)).cos();
            }
        }
        Self { b, basis }
    }

    pub fn size(&self) -> usize {
        self.b
    }

    /// `C A C^T`.
    pub fn forward(&self, block: &[f64]) -> Vec<f64> {
        self.apply(block, false)
    }

    /// `C^T X C`.
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        self.apply(coeffs, true)
    }

    fn apply(&self, a: &[f64], transpose: bool) -> Vec<f64> {
        let b = self.b;
        assert_eq!(a.len(), b * b, "block must hold b*b values");
        let m = |i: usize, j: usize| {
            if transpose {
                self.basis[j * b + i]
            } else {
                self.basis[i * b + j]
            }
        };
        let mut t = vec![0.0; b * b];
        for i in 0..b {
            for k in 0..b {
                let mik = m(i, k);
                for j in 0..b {
                    t[i * b + j] += mik * a[k * b + j];
                }
            }
        }
        let mut out = vec![0.0; b * b];
        for i in 0..b {
            for j in 0..b {
                out[i * b + j] = (0..b).map(|k| t[i * b + k] * m(j, k)).sum();
            }
        }
        out
    }
}

pub fn dct2(block: &[f64], b: usize) -> Vec<f64> {
    Dct2::new(b).forward(block)
}

pub fn idct2(coeffs: &[f64], b: usize) -> Vec<f64> {
    Dct2::new(b).inverse(coeffs)
}

/// Keeps the `s` largest-magnitude entries; equal magnitudes favour the lower index.
pub fn sparsify_top_s(coeffs: &[f64], s: usize) -> Vec<f64> {
    if s >= coeffs.len() {
        return coeffs.to_vec();
    }
    let mut order: Vec<usize> = (0..coeffs.len()).collect();
    order.sort_by(|&i, &j| coeffs[j].abs().total_cmp(&coeffs[i].abs()).then(i.cmp(&j)));
    let mut out = vec![0.0; coeffs.len()];
    for &i in &order[..s] {
        out[i] = coeffs[i];
    }
    out
}

/// Peak signal-to-noise ratio in dB with peak 255; infinite when every
/// pixel agrees to within 1e-6.
pub fn psnr(reference: &ImageGrid, other: &ImageGrid) -> Result<f64> {
    if reference.height != other.height || reference.width != other.width {
        return Err(Error::dim("PSNR needs images of equal size"));
    }
    let (mut max_abs, mut sq) = (0.0f64, 0.0);
    for (a, b) in reference.pixels.iter().zip(&other.pixels) {
        let d = a - b;
        max_abs = max_abs.max(d.abs());
        sq += d * d;
    }
    if max_abs < 1e-6 {
        return Ok(f64::INFINITY);
    }
    let mse = sq / reference.pixels.len() as f64;
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

fn serialize_psnr<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageCsConfig {
    pub block: usize,
    /// Retained DCT coefficients per block; `block^2` keeps them all.
    pub s: usize,
    /// Measurements per block.
    pub m_img: usize,
    /// Sensing entries have variance `1 / m_img`.
    pub matrix: MatrixKind,
    pub noise: Option<NoiseModel>,
    pub solver: SolverConfig,
}

impl ImageCsConfig {
    /// 32×32 blocks, 500 Gaussian measurements per block, no sparsification
    /// and [`image_solver_defaults`].
    pub fn new(noise: Option<NoiseModel>) -> Self {
        Self {
            block: DEFAULT_BLOCK,
            s: DEFAULT_BLOCK * DEFAULT_BLOCK,
            m_img: 500,
            matrix: MatrixKind::GaussianIid,
            noise,
            solver: image_solver_defaults(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.block * self.block;
        if self.block == 0 {
            return Err(Error::param("block size must be positive"));
        }
        if self.s == 0 || self.s > n {
            return Err(Error::param(format!("retained coefficients s={} must lie in 1..={n}", self.s)));
        }
        if self.m_img < 2 {
            return Err(Error::param(format!("need at least 2 measurements per block, got {}", self.m_img)));
        }
        if self.matrix == MatrixKind::Orthogonal && self.m_img != n {
            return Err(Error::param(format!("an orthogonal sensing matrix needs m_img = {n}")));
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        self.solver.validate_for(self.m_img)?;
        Ok(())
    }
}

/// Mini-batch solver settings for unit-norm block measurements. Runs the
/// full update budget: DCT blocks are only compressible, and the displacement
/// test fires on the dense least-squares plateau long before zero attraction
/// has done its work.
pub fn image_solver_defaults() -> SolverConfig {
    let mut cfg = SolverConfig::recommended(Variant::MbL0Mcc);
    cfg.lambda = 1e-5;
    cfg.epsilon = 0.0;
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockReport {
    pub index: usize,
    pub row: usize,
    pub col: usize,
    /// Euclidean norm of the noisy measurements the solver was normalized by.
    pub scale: f64,
    pub updates_used: usize,
    pub diverged: bool,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageReport {
    pub height: usize,
    pub width: usize,
    pub block: usize,
    pub s: usize,
    pub m_img: usize,
    pub seed: u64,
    #[serde(serialize_with = "serialize_psnr")]
    pub psnr_db: f64,
    pub diverged_blocks: usize,
    pub blocks: Vec<BlockReport>,
}

impl ImageReport {
    pub fn without_timings(mut self) -> Self {
        self.blocks.iter_mut().for_each(|b| b.wall_time_s = None);
        self
    }
}

#[derive(Debug, Clone)]
pub struct ImageOutcome {
    pub image: ImageGrid,
    pub report: ImageReport,
}

/// Runs the block pipeline and scores the result against `image`.
pub fn reconstruct_image(image: &ImageGrid, cfg: &ImageCsConfig, seed: u64) -> Result<ImageOutcome> {
    let b = cfg.block.max(1);
    let order: Vec<usize> = (0..image.height.div_ceil(b) * image.width.div_ceil(b)).collect();
    reconstruct_image_in_order(image, cfg, seed, &order)
}

/// As [`reconstruct_image`], dispatching blocks in the given order.
pub fn reconstruct_image_in_order(
    image: &ImageGrid,
    cfg: &ImageCsConfig,
    seed: u64,
    order: &[usize],
) -> Result<ImageOutcome> {
    cfg.validate()?;
    let b = cfg.block;
    let n = b * b;
    let (rows, cols) = (image.height.div_ceil(b), image.width.div_ceil(b));
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..rows * cols).collect::<Vec<_>>() {
        return Err(Error::param("block order must be a permutation of the block indices"));
    }

    let var = 1.0 / cfg.m_img as f64;
    let phi = SensingMatrix::generate(cfg.m_img, n, cfg.matrix, var, derive_seed(seed, &[MATRIX_STREAM]))?;
    let noise = cfg.noise.map(|nm| match nm {
        NoiseModel::Gmm { c, sigma_a_sq, sigma_b_sq, .. } => NoiseModel::Gmm {
            c,
            sigma_a_sq,
            m: cfg.m_img as f64,
            sigma_b_sq,
        },
        other => other,
    });
    let dct = Dct2::new(b);

    let results: Vec<(usize, Vec<f64>, BlockReport)> = order
        .par_iter()
        .map(|&idx| -> Result<_> {
            let start = Instant::now();
            let (br, bc) = (idx / cols, idx % cols);
            let coeffs = sparsify_top_s(&dct.forward(&image.block(br, bc, b)), cfg.s);
            let v = match &noise {
                Some(nm) => Some(sample_noise(nm, cfg.m_img, derive_seed(seed, &[NOISE_STREAM, idx as u64]))?),
                None => None,
            };
            let mut y = measure(&phi, &coeffs, v.as_deref())?;
            let scale = y.iter().map(|t| t * t).sum::<f64>().sqrt();
            let mut report = BlockReport {
                index: idx,
                row: br,
                col: bc,
                scale,
                updates_used: 0,
                diverged: false,
                error: None,
                wall_time_s: None,
            };
            let mut w = vec![0.0; n];
            if scale > 0.0 {
                y.iter_mut().for_each(|t| *t /= scale);
                let problem = ReconstructionProblem::new(phi.clone(), y, None)?;
                match run(&problem, &cfg.solver, derive_seed(seed, &[SOLVER_STREAM, idx as u64])) {
                    Ok(out) => {
                        w = out.w.iter().map(|c| c * scale).collect();
                        report.updates_used = out.trace.updates_used;
                    }
                    Err(Error::Divergence { iteration, reason }) => {
                        report.diverged = true;
                        report.updates_used = iteration;
                        report.error = Some(format!("diverged at update {iteration}: {reason}"));
                    }
                    Err(e) => return Err(e),
                }
            }
            let pixels = dct.inverse(&w);
            report.wall_time_s = Some(start.elapsed().as_secs_f64());
            Ok((idx, pixels, report))
        })
        .collect::<Result<_>>()?;

    let mut blocks: Vec<Option<(Vec<f64>, BlockReport)>> = vec![None; rows * cols];
    for (idx, pixels, report) in results {
        blocks[idx] = Some((pixels, report));
    }
    let mut out = vec![0.0; image.height * image.width];
    let mut reports = Vec::with_capacity(blocks.len());
    for (idx, entry) in blocks.into_iter().enumerate() {
        let (pixels, report) = entry.expect("every block index was processed");
        let (br, bc) = (idx / cols, idx % cols);
        for i in 0..b {
            let r = br * b + i;
            if r >= image.height {
                break;
            }
            for j in 0..b {
                let c = bc * b + j;
                if c >= image.width {
                    break;
                }
                out[r * image.width + c] = pixels[i * b + j].clamp(0.0, 255.0);
            }
        }
        reports.push(report);
    }
    let recon = ImageGrid {
        height: image.height,
        width: image.width,
        pixels: out,
    };
    let psnr_db = psnr(image, &recon)?;
    Ok(ImageOutcome {
        image: recon,
        report: ImageReport {
            height: image.height,
            width: image.width,
            block: b,
            s: cfg.s,
            m_img: cfg.m_img,
            seed,
            psnr_db,
            diverged_blocks: reports.iter().filter(|r| r.diverged).count(),
            blocks: reports,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    /// Direct evaluation of the 2-D DCT-II sum, independent of the separable product.
    fn dct_direct(a: &[f64], b: usize) -> Vec<f64> {
        let bf = b as f64;
        let alpha = |k: usize| if k == 0 { (1.0 / bf).sqrt() } else { (2.0 / bf).sqrt() };
        let mut out = vec![0.0; b * b];
        for u in 0..b {
            for v in 0..b {
                let mut s = 0.0;
                for x in 0..b {
                    for y in 0..b {
                        s += a[x * b + y]
                            * (std::f64::consts::PI * (2 * x + 1) as f64 * u as f64 / (2.0 * bf)).cos()
                            * (std::f64::consts::PI * (2 * y + 1) as f64 * v as f64 / (2.0 * bf)).cos();
                    }
                }
                out[u * b + v] = alpha(u) * alpha(v) * s;
            }
        }
        out
    }

    #[test]
    fn dct_constant_block() {
        let c = 37.5;
        let coeffs = dct2(&vec![c; 64], 8);
        assert!((coeffs[0] - 8.0 * c).abs() < 1e-10);
        assert!(coeffs[1..].iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn dct_matches_direct_sum() {
        let block: Vec<f64> = (0..36).map(|i| ((i * 17) % 23) as f64).collect();
        assert!(max_abs_diff(&dct2(&block, 6), &dct_direct(&block, 6)) < 1e-10);
    }

    #[test]
    fn sparsify_examples() {
        assert_eq!(sparsify_top_s(&[3.0, -5.0, 1.0], 1), vec![0.0, -5.0, 0.0]);
        assert_eq!(sparsify_top_s(&[2.0, -2.0, 1.0], 1), vec![2.0, 0.0, 0.0]);
        assert_eq!(sparsify_top_s(&[2.0, -2.0, 1.0], 3), vec![2.0, -2.0, 1.0]);
    }

    proptest! {
        #[test]
        fn dct_round_trip_and_parseval(vals in proptest::collection::vec(0.0f64..255.0, 64)) {
            let d = Dct2::new(8);
            let coeffs = d.forward(&vals);
            prop_assert!(max_abs_diff(&d.inverse(&coeffs), &vals) < 1e-10);
            let e1: f64 = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
            let e2: f64 = coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((e1 - e2).abs() < 1e-10 * e1.max(1.0));
            let kept = sparsify_top_s(&coeffs, 64);
            prop_assert!(max_abs_diff(&d.inverse(&kept), &vals) < 1e-10);
        }

        #[test]
        fn sparsify_keeps_exactly_s(vals in proptest::collection::vec(-10.0f64..10.0, 1..40), s in 1usize..40) {
            let s = s.min(vals.len());
            let out = sparsify_top_s(&vals, s);
            let kept = out.iter().filter(|v| **v != 0.0).count();
            prop_assert_eq!(kept, s.min(vals.iter().filter(|v| **v != 0.0).count()));
            let min_kept = out.iter().filter(|v| **v != 0.0).map(|v| v.abs()).fold(f64::INFINITY, f64::min);
            for (o, v) in out.iter().zip(&vals) {
                if *o == 0.0 {
                    prop_assert!(v.abs() <= min_kept);
                }
            }
        }
    }

    #[test]
    fn pgm_round_trip() {
        let img = ImageGrid::new(2, 3, vec![0.0, 10.0, 20.0, 30.0, 254.0, 255.0]).unwrap();
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n3 2\n255\n"));
        let back = ImageGrid::read_pgm(&buf[..]).unwrap();
        assert_eq!(back, img);
        let commented = b"P5\n# note\n1 1\n255\n\x07";
        assert_eq!(ImageGrid::read_pgm(&commented[..]).unwrap().pixels(), &[7.0]);
        assert!(ImageGrid::read_pgm(&b"P2\n1 1\n255\n7"[..]).is_err());
        assert!(ImageGrid::read_pgm(&b"P5\n2 2\n255\n\x01"[..]).is_err());
    }

    #[test]
    fn psnr_behaviour() {
        let img = ImageGrid::synthetic(16, 16);
        assert_eq!(psnr(&img, &img).unwrap(), f64::INFINITY);
        let mut rng = crate::rng::stream(3);
        let mut prev = f64::INFINITY;
        for sd in [1.0, 4.0, 16.0] {
            let noisy: Vec<f64> = img
                .pixels()
                .iter()
                .map(|p| p + sd * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal))
                .collect();
            let other = ImageGrid { height: 16, width: 16, pixels: noisy };
            let v = psnr(&img, &other).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let shifted = ImageGrid { height: 16, width: 16, pixels: img.pixels().iter().map(|p| p + 1.0).collect() };
        assert!((psnr(&img, &shifted).unwrap() - 20.0 * 255f64.log10()).abs() < 1e-9);
    }

    fn exact_config() -> ImageCsConfig {
        let mut solver = SolverConfig::recommended(Variant::L0Mcc);
        solver.mu = 1.0;
        solver.lambda = 0.0;
        solver.theta = 0.0;
        solver.sigma_max = Some(1.0);
        solver.max_updates = 64 * 40;
        solver.epsilon = 0.0;
        ImageCsConfig {
            block: 8,
            s: 64,
            m_img: 64,
            matrix: MatrixKind::Orthogonal,
            noise: None,
            solver,
        }
    }

    #[test]
    fn noiseless_orthogonal_is_exact() {
        let img = ImageGrid::synthetic(20, 27);
        let out = reconstruct_image(&img, &exact_config(), 5).unwrap();
        assert_eq!(out.report.psnr_db, f64::INFINITY);
        assert_eq!(out.report.blocks.len(), 3 * 4);
        let json = serde_json::to_string(&out.report.clone().without_timings()).unwrap();
        assert!(json.contains("\"psnr_db\":\"inf\""));
    }

    #[test]
    fn block_order_does_not_matter() {
        let img = ImageGrid::synthetic(24, 24);
        let mut cfg = exact_config();
        cfg.noise = Some(NoiseModel::Gmm { c: 0.1, sigma_a_sq: 0.04, m: 1.0, sigma_b_sq: 10.0 });
        cfg.solver.max_updates = 500;
        cfg.solver.sigma_max = None;
        cfg.solver.theta = 20.0;
        cfg.solver.mu = 0.3;
        let forward = reconstruct_image(&img, &cfg, 9).unwrap();
        let reversed = reconstruct_image_in_order(&img, &cfg, 9, &[8, 3, 5, 0, 7, 1, 6, 2, 4]).unwrap();
        assert_eq!(forward.image, reversed.image);
        assert_eq!(forward.report.clone().without_timings(), reversed.report.without_timings());
        assert!(reconstruct_image_in_order(&img, &cfg, 9, &[0, 0, 1, 2, 3, 4, 5, 6, 7]).is_err());
    }
}
