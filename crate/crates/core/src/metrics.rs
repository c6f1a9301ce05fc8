//! Image quality metrics and the alignment applied before comparing images.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

type C = Complex64;

/// Real-valued image on a physical grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridImage {
    pub rows: usize,
    pub cols: usize,
    /// Pitch (x, y).
    pub pitch: (f64, f64),
    /// Coordinates (x, y) of pixel (0, 0).
    pub origin: (f64, f64),
    pub data: Vec<f64>,
}

impl GridImage {
    pub fn new(rows: usize, cols: usize, pitch: (f64, f64), origin: (f64, f64), data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("image must be nonempty"));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("{} samples for a {rows}×{cols} image", data.len())));
        }
        Ok(GridImage { rows, cols, pitch, origin, data })
    }

    /// Same pixel grid as `self`, with unit pitch and zero origin.
    pub fn unit_grid(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(rows, cols, (1.0, 1.0), (0.0, 0.0), data)
    }

    fn at(&self, r: i64, c: i64) -> f64 {
        if r < 0 || c < 0 || r >= self.rows as i64 || c >= self.cols as i64 {
            0.0
        } else {
            self.data[r as usize * self.cols + c as usize]
        }
    }

    /// Bilinear sample at physical (x, y); zero outside the grid.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let fx = (x - self.origin.0) / self.pitch.0;
        let fy = (y - self.origin.1) / self.pitch.1;
        if fx < -1.0 || fy < -1.0 || fx > self.cols as f64 || fy > self.rows as f64 {
            return 0.0;
        }
        let (c0, r0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - c0, fy - r0);
        let (c0, r0) = (c0 as i64, r0 as i64);
        let v00 = self.at(r0, c0);
        let v01 = self.at(r0, c0 + 1);
        let v10 = self.at(r0 + 1, c0);
        let v11 = self.at(r0 + 1, c0 + 1);
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v01) + ty * ((1.0 - tx) * v10 + tx * v11)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }
}

/// Reference and estimate on one grid with unit-max amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub rows: usize,
    pub cols: usize,
    pub reference: Vec<f64>,
    pub estimate: Vec<f64>,
    /// Applied shift (dx, dy) in reference pixels: aligned(p) = resampled(p + shift).
    pub shift: (i64, i64),
    /// Factor applied to the resampled estimate.
    pub scale: f64,
}

/// Default half-width of the integer shift search, in pixels.
pub const DEFAULT_SHIFT_WINDOW: i64 = 8;

/// Resample the estimate onto the reference grid, pick the integer shift with
/// the largest magnitude cross-correlation, and normalize both to unit max.
pub fn align(reference: &GridImage, estimate: &GridImage) -> AlignedPair {
    align_within(reference, estimate, DEFAULT_SHIFT_WINDOW)
}

pub fn align_within(reference: &GridImage, estimate: &GridImage, window: i64) -> AlignedPair {
    let (rows, cols) = (reference.rows, reference.cols);
    let mut res = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let x = reference.origin.0 + c as f64 * reference.pitch.0;
            let y = reference.origin.1 + r as f64 * reference.pitch.1;
            res.push(estimate.sample(x, y).abs());
        }
    }
    let res = GridImage { rows, cols, pitch: reference.pitch, origin: reference.origin, data: res };
    let emax = res.max();
    let rmax = reference.data.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let ref_n: Vec<f64> = reference.data.iter().map(|v| if rmax > 0.0 { v.abs() / rmax } else { 0.0 }).collect();
    if emax == 0.0 {
        return AlignedPair { rows, cols, reference: ref_n, estimate: res.data, shift: (0, 0), scale: 1.0 };
    }
    let mut best = (f64::NEG_INFINITY, (0i64, 0i64));
    for dy in -window..=window {
        for dx in -window..=window {
            let mut acc = 0.0;
            for r in 0..rows {
                for c in 0..cols {
                    let v = ref_n[r * cols + c];
                    if v != 0.0 {
                        acc += v * res.at(r as i64 + dy, c as i64 + dx);
                    }
                }
            }
            // Prefer the smallest shift on ties.
            let better = acc > best.0 || (acc == best.0 && dx.abs() + dy.abs() < best.1 .0.abs() + best.1 .1.abs());
            if better {
                best = (acc, (dx, dy));
            }
        }
    }
    let (dx, dy) = best.1;
    let scale = 1.0 / emax;
    let est = (0..rows * cols)
        .map(|i| res.at((i / cols) as i64 + dy, (i % cols) as i64 + dx) * scale)
        .collect();
    AlignedPair { rows, cols, reference: ref_n, estimate: est, shift: (dx, dy), scale }
}

fn check(a: &[C], b: &[C]) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("metric inputs of length {} and {}", a.len(), b.len())));
    }
    Ok(())
}

pub fn to_complex(v: &[f64]) -> Vec<C> {
    v.iter().map(|&x| C::new(x, 0.0)).collect()
}

/// (1/D)·Σ|a − b|².
pub fn mse(a: &[C], b: &[C]) -> Result<f64> {
    check(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64)
}

/// 10·log10(max|b|² / MSE) with `b` the estimate; +∞ when MSE = 0.
pub fn psnr(a: &[C], b: &[C]) -> Result<f64> {
    let m = mse(a, b)?;
    let peak = b.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    Ok(if m == 0.0 { f64::INFINITY } else { 10.0 * (peak / m).log10() })
}

/// PSNR normalized by the reference peak instead of the estimate peak.
pub fn psnr_reference_peak(a: &[C], b: &[C]) -> Result<f64> {
    psnr(b, a)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Global two-factor SSIM on amplitudes with ε₁ = 0.01², ε₂ = 0.03².
pub fn ssim(a: &[C], b: &[C]) -> Result<f64> {
    check(a, b)?;
    let am: Vec<f64> = a.iter().map(|v| v.norm()).collect();
    let bm: Vec<f64> = b.iter().map(|v| v.norm()).collect();
    let (ma, sa) = mean_std(&am);
    let (mb, sb) = mean_std(&bm);
    let (e1, e2) = (1e-4, 9e-4);
    Ok((2.0 * ma * mb + e1) / (ma * ma + mb * mb + e1) * (2.0 * sa * sb + e2) / (sa * sa + sb * sb + e2))
}

/// |Σ (a − μ_a)*(b − μ_b)| / (‖a − μ_a‖·‖b − μ_b‖); 0 if either is constant.
pub fn pcc(a: &[C], b: &[C]) -> Result<f64> {
    check(a, b)?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<C>() / n;
    let mb = b.iter().sum::<C>() / n;
    let num: C = a.iter().zip(b).map(|(x, y)| (x - ma).conj() * (y - mb)).sum();
    let da = a.iter().map(|x| (x - ma).norm_sqr()).sum::<f64>().sqrt();
    let db = b.iter().map(|y| (y - mb).norm_sqr()).sum::<f64>().sqrt();
    if da == 0.0 || db == 0.0 {
        return Ok(0.0);
    }
    Ok((num.norm() / (da * db)).min(1.0))
}

/// The four reported metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub pcc: f64,
}

impl MetricSet {
    pub fn compute(reference: &[C], estimate: &[C]) -> Result<Self> {
        Ok(MetricSet {
            mse: mse(reference, estimate)?,
            psnr: psnr(reference, estimate)?,
            ssim: ssim(reference, estimate)?,
            pcc: pcc(reference, estimate)?,
        })
    }

    pub fn of_aligned(p: &AlignedPair) -> Result<Self> {
        Self::compute(&to_complex(&p.reference), &to_complex(&p.estimate))
    }

    pub fn named(&self) -> [(&'static str, f64); 4] {
        [("mse", self.mse), ("psnr", self.psnr), ("ssim", self.ssim), ("pcc", self.pcc)]
    }
}
