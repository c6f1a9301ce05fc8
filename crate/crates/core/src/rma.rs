//! Range-migration imaging on the virtual full array, plus the monostatic
//! (SAR) special case.
//!
//! FFT convention: forward transforms are unnormalized, inverse transforms
//! carry 1/N. Wavenumber axes follow `2π·fftfreq(len, Δ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::geometry::{ArrayArchitecture, GridIndex, SubcarrierPlan, Vec3};
use crate::waveform::{MonostaticGrid, PairObservation};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Signed FFT bin index of `i` on an axis of length `len`.
pub fn signed_bin(i: usize, len: usize) -> i64 {
    if i < len.div_ceil(2) {
        i as i64
    } else {
        i as i64 - len as i64
    }
}

/// `2π·fftfreq(len, pitch)`.
pub fn wavenumber_axis(len: usize, pitch: f64) -> Vec<f64> {
    let dk = 2.0 * PI / (len as f64 * pitch);
    (0..len).map(|i| signed_bin(i, len) as f64 * dk).collect()
}

/// Apply a 1-D FFT along `axis` of a row-major array with shape `dims`.
fn fft_axis(data: &mut [C], dims: &[usize], axis: usize, fft: &Arc<dyn Fft<f64>>) {
    let len = dims[axis];
    if len <= 1 {
        return;
    }
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    if inner == 1 {
        fft.process_with_scratch(data, &mut scratch);
        return;
    }
    // Gather blocks of strided lines into a contiguous buffer.
    let mut buf = vec![ZERO; len * inner];
    for o in 0..outer {
        let base = o * len * inner;
        for i in 0..inner {
            for k in 0..len {
                buf[i * len + k] = data[base + k * inner + i];
            }
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for i in 0..inner {
            for k in 0..len {
                data[base + k * inner + i] = buf[i * len + k];
            }
        }
    }
}

/// In-place n-D transform over every axis; `inverse` includes the 1/N factor.
pub fn fftn(data: &mut [C], dims: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    for axis in 0..dims.len() {
        let fft = if inverse { planner.plan_fft_inverse(dims[axis]) } else { planner.plan_fft_forward(dims[axis]) };
        fft_axis(data, dims, axis, &fft);
    }
    if inverse {
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Echo samples s(x_t, y_t, x_r, y_r) of one subcarrier on the virtual grid,
/// zero where no physical antenna pair measured.
#[derive(Debug, Clone)]
pub struct FusedDataMatrix {
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
    /// Coordinates of grid node (0, 0).
    pub origin: (f64, f64),
    pub subcarrier: usize,
    /// Index `((t_row·cols + t_col)·rows + r_row)·cols + r_col`.
    pub data: Vec<C>,
    pub mask: Vec<bool>,
}

impl FusedDataMatrix {
    pub fn index(&self, t: GridIndex, r: GridIndex) -> usize {
        ((t.row * self.cols + t.col) * self.rows + r.row) * self.cols + r.col
    }

    /// Reweight measured pairs so that the number of pairs per
    /// transmit+receive index sum follows `weighting`. Pairs with equal index
    /// sums land on the same image wavenumber to first order, so this
    /// removes the sampling-density imprint of sparse layouts.
    pub fn equalize_coarray(&mut self, weighting: CoarrayWeighting) {
        if weighting == CoarrayWeighting::None {
            return;
        }
        let (rows, cols) = (self.rows, self.cols);
        let (sr, sc) = (2 * rows - 1, 2 * cols - 1);
        let sum_index = |k: usize| {
            let rc = k % cols;
            let rr = (k / cols) % rows;
            let tc = (k / (cols * rows)) % cols;
            let tr = k / (cols * rows * cols);
            (tr + rr) * sc + tc + rc
        };
        let mut count = vec![0u32; sr * sc];
        for (k, _) in self.mask.iter().enumerate().filter(|(_, &m)| m) {
            count[sum_index(k)] += 1;
        }
        let target = |i: usize| match weighting {
            CoarrayWeighting::FullArray => {
                let (a, b) = (i / sc, i % sc);
                let fr = rows - a.abs_diff(rows - 1);
                let fc = cols - b.abs_diff(cols - 1);
                (fr * fc) as f64
            }
            _ => 1.0,
        };
        for k in 0..self.data.len() {
            if self.mask[k] {
                let i = sum_index(k);
                self.data[k] *= target(i) / count[i] as f64;
            }
        }
    }

    /// Share of 4-D cells that carry a measurement.
    pub fn fill_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }
}

/// Place every pair observation of subcarrier `n` on the virtual grid.
pub fn fuse(pairs: &[PairObservation], arch: &ArrayArchitecture, n: usize) -> Result<FusedDataMatrix> {
    let (rows, cols) = arch.full_shape();
    let mut seen = vec![false; rows * cols];
    for g in arch.virtual_index.iter().flatten() {
        if g.row >= rows || g.col >= cols {
            return Err(invalid(format!("virtual index ({}, {}) outside the grid", g.row, g.col)));
        }
        let c = &mut seen[g.row * cols + g.col];
        if *c {
            return Err(Error::DuplicateVirtualIndex { row: g.row, col: g.col });
        }
        *c = true;
    }
    let cells = rows * cols;
    let mut f = FusedDataMatrix {
        rows,
        cols,
        pitch: arch.spacing(),
        origin: arch.grid_origin(),
        subcarrier: n,
        data: vec![ZERO; cells * cells],
        mask: vec![false; cells * cells],
    };
    for p in pairs.iter().filter(|p| p.subcarrier == n) {
        let ri = arch.virtual_index.get(p.rx).ok_or_else(|| invalid(format!("unknown receiver {}", p.rx)))?;
        let ti = arch.virtual_index.get(p.tx).ok_or_else(|| invalid(format!("unknown transmitter {}", p.tx)))?;
        if p.d.nrows() != ri.len() || p.d.ncols() != ti.len() {
            return Err(Error::ShapeMismatch(format!("pair ({}, {}) does not match unit sizes", p.rx, p.tx)));
        }
        for (j, &t) in ti.iter().enumerate() {
            for (i, &r) in ri.iter().enumerate() {
                let k = f.index(t, r);
                f.data[k] = p.d[(i, j)];
                f.mask[k] = true;
            }
        }
    }
    Ok(f)
}

/// 4-D spectrum S(k_y^t, k_x^t, k_y^r, k_x^r) on FFT grids.
#[derive(Debug, Clone)]
pub struct WavenumberSpectrum {
    /// Padded plane shape (rows, cols), shared by both planes.
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
    pub origin: (f64, f64),
    pub subcarrier: usize,
    pub data: Vec<C>,
    /// Wavenumber of the stationary-phase filter once applied.
    pub filtered_at: Option<f64>,
}

impl WavenumberSpectrum {
    pub fn ky(&self) -> Vec<f64> {
        wavenumber_axis(self.rows, self.pitch)
    }

    pub fn kx(&self) -> Vec<f64> {
        wavenumber_axis(self.cols, self.pitch)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Propagating mask over one plane for wavenumber `k`.
    fn plane_support(&self, k: Option<f64>) -> Vec<bool> {
        let (ky, kx) = (self.ky(), self.kx());
        let mut m = Vec::with_capacity(self.rows * self.cols);
        for &a in &ky {
            for &b in &kx {
                m.push(k.is_none_or(|k| a * a + b * b < k * k));
            }
        }
        m
    }
}

/// Cascaded 2-D FFTs over the transmit and receive planes, after zero-padding
/// both to the next power of two.
pub fn forward_spectrum(fused: &FusedDataMatrix) -> WavenumberSpectrum {
    into_spectrum(fused.clone())
}

/// [`forward_spectrum`] consuming its input to avoid a copy of the 4-D array.
pub fn into_spectrum(fused: FusedDataMatrix) -> WavenumberSpectrum {
    let (rp, cp) = (fused.rows.next_power_of_two(), fused.cols.next_power_of_two());
    let mut data = if (rp, cp) == (fused.rows, fused.cols) {
        fused.data
    } else {
        let mut d = vec![ZERO; rp * cp * rp * cp];
        let (r, c) = (fused.rows, fused.cols);
        for tr in 0..r {
            for tc in 0..c {
                for rr in 0..r {
                    let src = ((tr * c + tc) * r + rr) * c;
                    let dst = ((tr * cp + tc) * rp + rr) * cp;
                    d[dst..dst + c].copy_from_slice(&fused.data[src..src + c]);
                }
            }
        }
        d
    };
    fftn(&mut data, &[rp, cp, rp, cp], false);
    WavenumberSpectrum {
        rows: rp,
        cols: cp,
        pitch: fused.pitch,
        origin: fused.origin,
        subcarrier: fused.subcarrier,
        data,
        filtered_at: None,
    }
}

/// Per-plane factor k_z·e^{j k_z z}, zero on and beyond the evanescent circle.
fn plane_factor(kx: f64, ky: f64, k: f64, z: f64) -> C {
    let s = k * k - kx * kx - ky * ky;
    if s <= 0.0 {
        return ZERO;
    }
    let kz = s.sqrt();
    C::from_polar(kz, kz * z)
}

/// Stationary-phase filter gain for one 4-D sample; zero if either plane is
/// evanescent.
pub fn msp_gain(kxt: f64, kyt: f64, kxr: f64, kyr: f64, k: f64, z: f64, cos_center: f64) -> C {
    plane_factor(kxt, kyt, k, z) * plane_factor(kxr, kyr, k, z) / (-PI * cos_center.sqrt())
}

fn check_filter_args(k: f64, z: f64, cos_center: f64) -> Result<()> {
    if !(k > 0.0) || !(z > 0.0) {
        return Err(invalid("filter needs positive wavenumber and distance"));
    }
    if !(cos_center > 0.0) {
        return Err(invalid("scene centre lies behind the array (cos ≤ 0)"));
    }
    Ok(())
}

/// Multiply by k_z^t·k_z^r/(−π√cos_c)·e^{j(k_z^t+k_z^r)z}; evanescent samples become 0.
pub fn msp_filter(spectrum: &WavenumberSpectrum, k: f64, z: f64, cos_center: f64) -> Result<WavenumberSpectrum> {
    let mut s = spectrum.clone();
    msp_filter_in_place(&mut s, k, z, cos_center)?;
    Ok(s)
}

pub fn msp_filter_in_place(s: &mut WavenumberSpectrum, k: f64, z: f64, cos_center: f64) -> Result<()> {
    check_filter_args(k, z, cos_center)?;
    let (ky, kx) = (s.ky(), s.kx());
    let plane: Vec<C> = ky.iter().flat_map(|&a| kx.iter().map(move |&b| plane_factor(b, a, k, z))).collect();
    let c = 1.0 / (-PI * cos_center.sqrt());
    let n = plane.len();
    for (t, ft) in plane.iter().enumerate() {
        let row = &mut s.data[t * n..(t + 1) * n];
        let ft = ft * c;
        for (v, fr) in row.iter_mut().zip(&plane) {
            *v *= ft * fr;
        }
    }
    s.filtered_at = Some(k);
    Ok(())
}

/// Divide a filtered spectrum by the filter on its propagating support.
pub fn msp_unfilter(s: &WavenumberSpectrum, z: f64, cos_center: f64) -> Result<WavenumberSpectrum> {
    let k = s.filtered_at.ok_or_else(|| invalid("spectrum has not been filtered"))?;
    check_filter_args(k, z, cos_center)?;
    let (ky, kx) = (s.ky(), s.kx());
    let plane: Vec<C> = ky.iter().flat_map(|&a| kx.iter().map(move |&b| plane_factor(b, a, k, z))).collect();
    let c = 1.0 / (-PI * cos_center.sqrt());
    let n = plane.len();
    let mut out = s.clone();
    for t in 0..n {
        for r in 0..n {
            let g = plane[t] * plane[r] * c;
            let v = &mut out.data[t * n + r];
            *v = if g == ZERO { ZERO } else { *v / g };
        }
    }
    out.filtered_at = None;
    Ok(out)
}

/// Image spectrum on the (k_x, k_y) grid after Stolt fusion.
#[derive(Debug, Clone)]
pub struct FusedSpectrum {
    pub rows: usize,
    pub cols: usize,
    pub dk_y: f64,
    pub dk_x: f64,
    pub origin: (f64, f64),
    pub subcarrier: usize,
    pub data: Vec<C>,
    pub hits: Vec<u32>,
}

impl FusedSpectrum {
    /// Each node divided by its hit count.
    pub fn mean_normalized(&self) -> FusedSpectrum {
        let mut out = self.clone();
        for (v, &h) in out.data.iter_mut().zip(&self.hits) {
            if h > 0 {
                *v /= h as f64;
            }
        }
        out
    }

    pub fn total(&self) -> C {
        self.data.iter().sum()
    }

    /// Magnitudes with the zero wavenumber moved to the centre, row-major.
    pub fn shifted_magnitude(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let rs = (r + self.rows / 2) % self.rows;
                let cs = (c + self.cols / 2) % self.cols;
                out[rs * self.cols + cs] = self.data[r * self.cols + c].norm();
            }
        }
        out
    }
}

/// Accumulate each propagating 4-D sample into the node at
/// (k_x^t + k_x^r, k_y^t + k_y^r) of a grid twice the plane size.
pub fn stolt_fuse(s: &WavenumberSpectrum) -> FusedSpectrum {
    let (rp, cp) = (s.rows, s.cols);
    let (mr, mc) = (2 * rp, 2 * cp);
    let support = s.plane_support(s.filtered_at);
    let sy: Vec<i64> = (0..rp).map(|i| signed_bin(i, rp)).collect();
    let sx: Vec<i64> = (0..cp).map(|i| signed_bin(i, cp)).collect();
    // Fused node per plane sample split into its row and column parts.
    let wrap = |v: i64, m: usize| v.rem_euclid(m as i64) as usize;
    let mut data = vec![ZERO; mr * mc];
    let mut hits = vec![0u32; mr * mc];
    let n = rp * cp;
    for t in 0..n {
        if !support[t] {
            continue;
        }
        let (ty, tx) = (sy[t / cp], sx[t % cp]);
        let row = &s.data[t * n..(t + 1) * n];
        for (r, &v) in row.iter().enumerate() {
            if !support[r] {
                continue;
            }
            let ky = wrap(ty + sy[r / cp], mr);
            let kx = wrap(tx + sx[r % cp], mc);
            let i = ky * mc + kx;
            data[i] += v;
            hits[i] += 1;
        }
    }
    FusedSpectrum {
        rows: mr,
        cols: mc,
        dk_y: 2.0 * PI / (rp as f64 * s.pitch),
        dk_x: 2.0 * PI / (cp as f64 * s.pitch),
        origin: s.origin,
        subcarrier: s.subcarrier,
        data,
        hits,
    }
}

/// Complex image on a regular grid at depth z.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedImage {
    pub rows: usize,
    pub cols: usize,
    /// Pixel pitch (x, y).
    pub pitch: (f64, f64),
    /// Coordinates (x, y) of pixel (0, 0).
    pub origin: (f64, f64),
    pub depth: f64,
    pub data: Vec<C>,
}

impl ReconstructedImage {
    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm()).collect()
    }

    pub fn argmax(&self) -> (usize, usize) {
        let (i, _) = self
            .data
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, bv), (i, v)| if v.norm() > bv { (i, v.norm()) } else { (bi, bv) });
        (i / self.cols, i % self.cols)
    }

    pub fn pixel_position(&self, row: usize, col: usize) -> (f64, f64) {
        (self.origin.0 + col as f64 * self.pitch.0, self.origin.1 + row as f64 * self.pitch.1)
    }

    pub fn nearest_pixel(&self, x: f64, y: f64) -> (usize, usize) {
        let c = ((x - self.origin.0) / self.pitch.0).round().clamp(0.0, (self.cols - 1) as f64) as usize;
        let r = ((y - self.origin.1) / self.pitch.1).round().clamp(0.0, (self.rows - 1) as f64) as usize;
        (r, c)
    }

    /// Width in meters of the main lobe through the peak along x (`axis` 0) or
    /// y (`axis` 1), measured where |ρ̂| falls to `level` of its peak value.
    pub fn mainlobe_width(&self, axis: usize, level: f64) -> f64 {
        let (pr, pc) = self.argmax();
        let (len, pitch) = if axis == 0 { (self.cols, self.pitch.0) } else { (self.rows, self.pitch.1) };
        let at = |i: usize| if axis == 0 { self.data[pr * self.cols + i].norm() } else { self.data[i * self.cols + pc].norm() };
        let p = if axis == 0 { pc } else { pr };
        let thr = level * at(p);
        let cross = |dir: i64| -> f64 {
            let mut i = p as i64;
            loop {
                let j = i + dir;
                if j < 0 || j >= len as i64 {
                    return (i - p as i64) as f64;
                }
                let (a, b) = (at(i as usize), at(j as usize));
                if b < thr {
                    return (i - p as i64) as f64 + dir as f64 * (a - thr) / (a - b);
                }
                i = j;
            }
        };
        (cross(1) - cross(-1)) * pitch
    }
}

/// Normalized 2-D inverse FFT of the fused spectrum.
pub fn invert(f: &FusedSpectrum, z: f64) -> ReconstructedImage {
    let mut data = f.data.clone();
    fftn(&mut data, &[f.rows, f.cols], true);
    ReconstructedImage {
        rows: f.rows,
        cols: f.cols,
        pitch: (2.0 * PI / (f.cols as f64 * f.dk_x), 2.0 * PI / (f.rows as f64 * f.dk_y)),
        origin: f.origin,
        depth: z,
        data,
    }
}

/// Scalar cosine product between the array centre and the scene centre
/// (0, 0, z) for a target facing the array; squared because transmit and
/// receive both see it.
pub fn center_cosine(arch: &ArrayArchitecture, z: f64) -> f64 {
    let c = arch.center();
    let d = Vec3::new(0.0, 0.0, z) - c;
    let r = d.norm();
    let n = arch.units.first().map(|u| u.normal).unwrap_or(Vec3::new(0.0, 0.0, 1.0));
    let cos_theta = d.dot(n) / r;
    let cos_phi = d.z / r;
    (cos_theta * cos_phi).powi(2)
}

/// Target pair density per transmit+receive index sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoarrayWeighting {
    /// Raw zero-filled data.
    None,
    /// Density of the complete grid.
    #[default]
    FullArray,
    /// Equal weight for every populated sum.
    Uniform,
}

impl std::str::FromStr for CoarrayWeighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "full-array" => Ok(Self::FullArray),
            "uniform" => Ok(Self::Uniform),
            _ => Err(invalid(format!("unknown coarray weighting '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RmaOptions {
    pub weighting: CoarrayWeighting,
    /// Divide each Stolt node by its hit count.
    pub mean_normalized: bool,
}

/// Fuse → 4-D FFT → stationary-phase filter → Stolt fusion → 2-D IFFT for
/// subcarrier `n`.
pub fn rma_pipeline(
    pairs: &[PairObservation],
    arch: &ArrayArchitecture,
    plan: &SubcarrierPlan,
    z: f64,
    n: usize,
    opts: &RmaOptions,
) -> Result<ReconstructedImage> {
    if n >= plan.len() {
        return Err(invalid("subcarrier index out of range"));
    }
    let mut fused = fuse(pairs, arch, n)?;
    fused.equalize_coarray(opts.weighting);
    let mut spec = into_spectrum(fused);
    msp_filter_in_place(&mut spec, plan.wavenumber(n), z, center_cosine(arch, z))?;
    let mut fused = stolt_fuse(&spec);
    if opts.mean_normalized {
        fused = fused.mean_normalized();
    }
    Ok(invert(&fused, z))
}

/// Incoherent average of magnitude images over several subcarriers.
pub fn rma_incoherent(
    pairs: &[PairObservation],
    arch: &ArrayArchitecture,
    plan: &SubcarrierPlan,
    z: f64,
    subcarriers: &[usize],
    opts: &RmaOptions,
) -> Result<ReconstructedImage> {
    let mut acc: Option<ReconstructedImage> = None;
    for &n in subcarriers {
        let img = rma_pipeline(pairs, arch, plan, z, n, opts)?;
        match &mut acc {
            None => {
                let mut a = img;
                a.data.iter_mut().for_each(|v| *v = C::new(v.norm(), 0.0));
                acc = Some(a);
            }
            Some(a) => a.data.iter_mut().zip(&img.data).for_each(|(x, y)| x.re += y.norm()),
        }
    }
    let mut a = acc.ok_or_else(|| invalid("no subcarriers requested"))?;
    let s = 1.0 / subcarriers.len() as f64;
    a.data.iter_mut().for_each(|v| *v *= s);
    Ok(a)
}

/// Monostatic reconstruction: rescale by 4π/cos_c, 2-D FFT, multiply by
/// 2πk_z/(−j e^{−jk_z z}) with k_z = √(4k² − k_x² − k_y²), 2-D IFFT.
pub fn sar_pipeline(grid: &MonostaticGrid, z: f64, k: f64, cos_center: f64) -> Result<ReconstructedImage> {
    check_filter_args(k, z, cos_center)?;
    let (rp, cp) = (grid.rows.next_power_of_two(), grid.cols.next_power_of_two());
    let mut data = vec![ZERO; rp * cp];
    let scale = 4.0 * PI / cos_center;
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            data[r * cp + c] = grid.data[r * grid.cols + c] * scale;
        }
    }
    fftn(&mut data, &[rp, cp], false);
    let (ky, kx) = (wavenumber_axis(rp, grid.pitch), wavenumber_axis(cp, grid.pitch));
    for (r, &a) in ky.iter().enumerate() {
        for (c, &b) in kx.iter().enumerate() {
            data[r * cp + c] *= sar_gain(b, a, k, z);
        }
    }
    fftn(&mut data, &[rp, cp], true);
    Ok(ReconstructedImage { rows: rp, cols: cp, pitch: (grid.pitch, grid.pitch), origin: grid.origin, depth: z, data })
}

/// Monostatic filter 2πk_z/(−j e^{−jk_z z}); zero where k_x² + k_y² ≥ 4k².
pub fn sar_gain(kx: f64, ky: f64, k: f64, z: f64) -> C {
    let s = 4.0 * k * k - kx * kx - ky * ky;
    if s <= 0.0 {
        return ZERO;
    }
    let kz = s.sqrt();
    C::new(0.0, 2.0 * PI * kz) * C::from_polar(1.0, kz * z)
}

/// (j/2π)∬ e^{j k_z r}/k_z dk_x dk_y on the axis point (0, 0, r), over the
/// square |k_x|, |k_y| ≤ `half_width`. Polar quadrature; the radial parts
/// are integrated in k_z (propagating) and κ = |k_z| (evanescent), which
/// removes the 1/k_z singularity.
pub fn weyl_truncated(r: f64, k: f64, half_width: f64, n_phi: usize, n_radial: usize) -> C {
    let n_radial = n_radial + n_radial % 2;
    let simpson = |a: f64, b: f64, f: &dyn Fn(f64) -> C| -> C {
        if b <= a {
            return ZERO;
        }
        let h = (b - a) / n_radial as f64;
        let mut s = f(a) + f(b);
        for i in 1..n_radial {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += f(a + i as f64 * h) * w;
        }
        s * (h / 3.0)
    };
    // 8-fold symmetry of the square: integrate φ ∈ [0, π/4] and multiply.
    let dphi = (PI / 4.0) / n_phi as f64;
    let mut total = ZERO;
    for i in 0..n_phi {
        let phi = (i as f64 + 0.5) * dphi;
        let rho_max = half_width / phi.cos();
        let rho_prop = rho_max.min(k);
        let u_min = (k * k - rho_prop * rho_prop).max(0.0).sqrt();
        let prop = simpson(u_min, k, &|u| C::from_polar(1.0, u * r));
        let evan = if rho_max > k {
            let kmax = (rho_max * rho_max - k * k).sqrt();
            simpson(0.0, kmax, &|kap| C::new((-kap * r).exp(), 0.0)) * C::new(0.0, -1.0)
        } else {
            ZERO
        };
        total += (prop + evan) * dphi;
    }
    total * 8.0 * C::new(0.0, 1.0 / (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_architecture, ArchitectureParams};
    use faer::Mat;

    fn naive_dft4(x: &[C], n: usize) -> Vec<C> {
        let w = |a: usize, b: usize| C::from_polar(1.0, -2.0 * PI * (a * b % n) as f64 / n as f64);
        let mut out = vec![ZERO; n.pow(4)];
        for k0 in 0..n {
            for k1 in 0..n {
                for k2 in 0..n {
                    for k3 in 0..n {
                        let mut acc = ZERO;
                        for a in 0..n {
                            for b in 0..n {
                                for c in 0..n {
                                    for d in 0..n {
                                        acc += x[((a * n + b) * n + c) * n + d] * w(a, k0) * w(b, k1) * w(c, k2) * w(d, k3);
                                    }
                                }
                            }
                        }
                        out[((k0 * n + k1) * n + k2) * n + k3] = acc;
                    }
                }
            }
        }
        out
    }

    fn pseudo_random(len: usize, seed: u64) -> Vec<C> {
        use rand::Rng;
        let mut r = crate::rng::stream(seed, &[99]);
        (0..len).map(|_| C::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)).collect()
    }

    fn fused_from(data: Vec<C>, n: usize) -> FusedDataMatrix {
        FusedDataMatrix {
            rows: n,
            cols: n,
            pitch: 0.01,
            origin: (0.0, 0.0),
            subcarrier: 0,
            mask: vec![true; data.len()],
            data,
        }
    }

    #[test]
    fn forward_spectrum_matches_naive_dft() {
        let x = pseudo_random(256, 1);
        let s = forward_spectrum(&fused_from(x.clone(), 4));
        let naive = naive_dft4(&x, 4);
        let scale = naive.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in s.data.iter().zip(&naive) {
            assert!((a - b).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn parseval() {
        let x = pseudo_random(8usize.pow(4), 2);
        let e: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let s = forward_spectrum(&fused_from(x, 8));
        assert!((s.energy() - 4096.0 * e).abs() <= 1e-9 * s.energy());
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let mut x = vec![ZERO; 256];
        x[0] = C::new(2.0, 0.0);
        let s = forward_spectrum(&fused_from(x, 4));
        assert!(s.data.iter().all(|v| (v.norm() - 2.0).abs() < 1e-12));
    }

    #[test]
    fn wavenumber_axis_matches_fftfreq() {
        let k = wavenumber_axis(4, 0.5);
        let dk = 2.0 * PI / 2.0;
        assert_eq!(k, vec![0.0, dk, -2.0 * dk, -dk]);
    }

    #[test]
    fn on_axis_filter_gain() {
        let (k, z) = (200.0, 3.0);
        let g = msp_gain(0.0, 0.0, 0.0, 0.0, k, z, 0.81);
        assert!((g.norm() - k * k / (PI * 0.9)).abs() < 1e-9);
        let expected = C::from_polar(1.0, 2.0 * k * z) * -1.0;
        assert!((g / g.norm() - expected).norm() < 1e-9);
        assert_eq!(msp_gain(k, 0.0, 0.0, 0.0, k, z, 1.0), ZERO);
    }

    #[test]
    fn filter_round_trip_on_support() {
        let x = pseudo_random(8usize.pow(4), 3);
        let mut f = fused_from(x, 8);
        f.pitch = 0.02;
        let s = forward_spectrum(&f);
        let k = 250.0;
        let filt = msp_filter(&s, k, 2.0, 0.9).unwrap();
        let back = msp_unfilter(&filt, 2.0, 0.9).unwrap();
        let sup = s.plane_support(Some(k));
        let n = 64;
        for t in 0..n {
            for r in 0..n {
                let i = t * n + r;
                if sup[t] && sup[r] {
                    assert!((back.data[i] - s.data[i]).norm() < 1e-9 * s.data[i].norm().max(1.0));
                } else {
                    assert_eq!(filt.data[i], ZERO);
                }
            }
        }
        assert!(msp_filter(&s, k, 2.0, 0.0).is_err());
    }

    #[test]
    fn stolt_single_sample_and_mass() {
        let n = 4;
        let mut s = forward_spectrum(&fused_from(vec![ZERO; 256], n));
        // t = (row 1, col 3), r = (row 2, col 1)
        let t = n + 3;
        let r = 2 * n + 1;
        s.data[t * 16 + r] = C::new(1.0, 2.0);
        let f = stolt_fuse(&s);
        let nz: Vec<usize> = (0..f.data.len()).filter(|&i| f.data[i] != ZERO).collect();
        assert_eq!(nz.len(), 1);
        // signed: t = (1, -1), r = (-2, 1) → (ky, kx) = (-1, 0) on an 8×8 grid.
        assert_eq!(nz[0], 7 * 8);
        // Swap roles: same node.
        let mut s2 = s.clone();
        s2.data.iter_mut().for_each(|v| *v = ZERO);
        s2.data[r * 16 + t] = C::new(1.0, 2.0);
        let f2 = stolt_fuse(&s2);
        assert_eq!(f2.data[nz[0]], C::new(1.0, 2.0));

        let x = pseudo_random(4096, 4);
        let mut g = fused_from(x, 8);
        g.pitch = 0.02;
        let filt = msp_filter(&forward_spectrum(&g), 300.0, 1.0, 1.0).unwrap();
        let f = stolt_fuse(&filt);
        let total: C = filt.data.iter().sum();
        assert!((f.total() - total).norm() < 1e-9 * total.norm());
        assert_eq!(f.hits.iter().map(|&h| h as usize).sum::<usize>(), {
            let sup = filt.plane_support(Some(300.0));
            let c = sup.iter().filter(|&&b| b).count();
            c * c
        });
    }

    #[test]
    fn inverse_round_trip() {
        let img = pseudo_random(64, 5);
        let mut spec = img.clone();
        fftn(&mut spec, &[8, 8], false);
        let f = FusedSpectrum {
            rows: 8,
            cols: 8,
            dk_x: 1.0,
            dk_y: 1.0,
            origin: (0.0, 0.0),
            subcarrier: 0,
            data: spec,
            hits: vec![1; 64],
        };
        let out = invert(&f, 1.0);
        for (a, b) in out.data.iter().zip(&img) {
            assert!((a - b).norm() < 1e-10);
        }
        let zero = FusedSpectrum { data: vec![ZERO; 64], ..f };
        assert!(invert(&zero, 1.0).data.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn fuse_fill_fraction_and_duplicates() {
        let arch = build_architecture(ArchitectureParams::boundary(6, 2, 0.01)).unwrap();
        let pairs: Vec<PairObservation> = (0..4)
            .flat_map(|r| (0..4).map(move |t| (r, t)))
            .map(|(r, t)| PairObservation { rx: r, tx: t, subcarrier: 0, d: Mat::from_fn(12, 12, |_, _| C::new(1.0, 0.0)) })
            .collect();
        let f = fuse(&pairs, &arch, 0).unwrap();
        let nb = 48.0f64;
        assert!((f.fill_fraction() - (nb / 64.0).powi(2)).abs() < 1e-15);
        assert!(f.data.iter().zip(&f.mask).all(|(v, &m)| m || *v == ZERO));

        let empty = fuse(&[], &arch, 0).unwrap();
        assert!(empty.data.iter().all(|v| *v == ZERO));

        let mut bad = arch.clone();
        bad.virtual_index[1][0] = bad.virtual_index[0][0];
        assert!(matches!(fuse(&pairs, &bad, 0), Err(Error::DuplicateVirtualIndex { .. })));
    }

    #[test]
    fn mainlobe_width_of_triangle() {
        let vals = [0.0, 0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25, 0.0];
        let img = ReconstructedImage {
            rows: 1,
            cols: 9,
            pitch: (0.1, 0.1),
            origin: (0.0, 0.0),
            depth: 1.0,
            data: vals.iter().map(|&v| C::new(v, 0.0)).collect(),
        };
        assert!((img.mainlobe_width(0, 0.5) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn sar_gain_on_axis() {
        let g = sar_gain(0.0, 0.0, 100.0, 2.0);
        assert!((g.norm() - 2.0 * PI * 200.0).abs() < 1e-9);
        assert_eq!(sar_gain(200.0, 0.0, 100.0, 2.0), ZERO);
    }
}
