//! Multi-view sparse Bayesian reconstruction of voxel scenes with a
//! Kronecker-structured prior Γ ⊗ Ψ, plus least-squares, greedy and
//! thresholding baselines.
//!
//! Stacking convention: the unknown vector ũ is voxel-outer and
//! subcarrier-inner (`ũ[i·N + n] = ρ_n(p_i)`); the stacked measurement ỹ is
//! measurement-row-outer and subcarrier-inner with padding rows removed.

use std::sync::OnceLock;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Scale, Side};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelTensor;
use crate::error::{invalid, Error, Result};
use crate::geometry::Scene;
use crate::waveform::{ObservationSet, TransmitPlan};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Default EM iteration cap.
pub const DEFAULT_MAX_ITERS: usize = 200;
/// Default relative γ change that stops EM.
pub const DEFAULT_TOL: f64 = 1e-4;
/// Voxels with γ below this fraction of the largest γ are reported inactive.
pub const SUPPORT_FRACTION: f64 = 0.01;
/// Regularization weight used for ISTA and LASSO when none is given.
pub const DEFAULT_ISTA_LAMBDA: f64 = 2e-4;

/// Origin of one row of Φ_n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLabel {
    pub slot: usize,
    pub rx: usize,
    pub antenna: usize,
}

/// Per-subcarrier measurements y_n = Φ_n ρ_n + n_n.
#[derive(Debug, Clone)]
pub struct MmvProblem {
    pub measurements: Vec<Vec<C>>,
    pub sensing: Vec<Mat<C>>,
    pub noise_power: f64,
    pub labels: Vec<Vec<RowLabel>>,
}

impl MmvProblem {
    pub fn new(sensing: Vec<Mat<C>>, measurements: Vec<Vec<C>>, noise_power: f64) -> Result<Self> {
        let labels = sensing
            .iter()
            .map(|p| (0..p.nrows()).map(|a| RowLabel { slot: 0, rx: 0, antenna: a }).collect())
            .collect();
        Self::with_labels(sensing, measurements, noise_power, labels)
    }

    pub fn with_labels(
        sensing: Vec<Mat<C>>,
        measurements: Vec<Vec<C>>,
        noise_power: f64,
        labels: Vec<Vec<RowLabel>>,
    ) -> Result<Self> {
        if sensing.is_empty() {
            return Err(invalid("problem needs at least one subcarrier"));
        }
        if sensing.len() != measurements.len() || sensing.len() != labels.len() {
            return Err(Error::ShapeMismatch("one sensing matrix and measurement per subcarrier".into()));
        }
        let q = sensing[0].ncols();
        if q == 0 {
            return Err(invalid("problem needs at least one cell"));
        }
        for (n, ((p, y), l)) in sensing.iter().zip(&measurements).zip(&labels).enumerate() {
            if p.ncols() != q {
                return Err(Error::ShapeMismatch(format!("subcarrier {n}: Φ has {} columns, expected {q}", p.ncols())));
            }
            if p.nrows() != y.len() || l.len() != y.len() {
                return Err(Error::ShapeMismatch(format!("subcarrier {n}: {} rows but {} samples", p.nrows(), y.len())));
            }
        }
        if !(noise_power >= 0.0) {
            return Err(invalid("noise power must be non-negative"));
        }
        Ok(MmvProblem { measurements, sensing, noise_power, labels })
    }

    pub fn subcarriers(&self) -> usize {
        self.sensing.len()
    }

    /// Problem over a subset of cells, in the given order.
    pub fn restrict(&self, cells: &[usize]) -> MmvProblem {
        let sensing = self.sensing.iter().map(|p| Mat::from_fn(p.nrows(), cells.len(), |r, c| p[(r, cells[c])])).collect();
        MmvProblem { sensing, measurements: self.measurements.clone(), noise_power: self.noise_power, labels: self.labels.clone() }
    }

    pub fn cells(&self) -> usize {
        self.sensing[0].ncols()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.measurements.iter().map(Vec::len).collect()
    }

    pub fn l_max(&self) -> usize {
        self.lengths().into_iter().max().unwrap_or(0)
    }

    /// Total number of measurements Σ_n l_n.
    pub fn l_all(&self) -> usize {
        self.lengths().into_iter().sum()
    }
}

/// Φ_n per subcarrier with the label of every row.
pub type LabeledSensing = (Vec<Mat<C>>, Vec<Vec<RowLabel>>);

/// Rows of every Φ_n: V̄·H_r[n]·diag(Σ_t H_t[n]ᵀ x_t) per (slot, receiver).
pub fn sensing_matrices(scene: &Scene, channels: &ChannelTensor, plan: &TransmitPlan) -> Result<LabeledSensing> {
    if plan.subcarriers != channels.subcarriers() {
        return Err(invalid("plan and channel subcarrier counts differ"));
    }
    let sizes: Vec<usize> = (0..channels.units()).map(|u| channels.unit_range(u).len()).collect();
    plan.validate(&sizes)?;
    let vbar = scene.measure();
    let q = channels.points();
    let mut mats = Vec::with_capacity(plan.subcarriers);
    let mut labels = Vec::with_capacity(plan.subcarriers);
    for n in 0..plan.subcarriers {
        let mut rows: Vec<(RowLabel, Vec<C>)> = Vec::new();
        for s in 0..plan.slots {
            let e = plan.get(s, n);
            if e.receivers.is_empty() {
                return Err(invalid(format!("slot {s}, subcarrier {n} has no receiving unit")));
            }
            let illum: Vec<C> = (0..q)
                .map(|p| {
                    let mut acc = ZERO;
                    for (&t, x) in e.transmitters.iter().zip(&e.signals) {
                        for (j, m) in channels.unit_range(t).enumerate() {
                            acc += channels.gain(m, p, n) * x[j];
                        }
                    }
                    acc * vbar
                })
                .collect();
            for &r in &e.receivers {
                for (a, m) in channels.unit_range(r).enumerate() {
                    let row = (0..q).map(|p| channels.gain(m, p, n) * illum[p]).collect();
                    rows.push((RowLabel { slot: s, rx: r, antenna: a }, row));
                }
            }
        }
        mats.push(Mat::from_fn(rows.len(), q, |i, p| rows[i].1[p]));
        labels.push(rows.into_iter().map(|r| r.0).collect());
    }
    Ok((mats, labels))
}

/// Assemble the MMV problem for a transmit plan and its observations.
pub fn build_problem(
    scene: &Scene,
    channels: &ChannelTensor,
    plan: &TransmitPlan,
    observations: &ObservationSet,
) -> Result<MmvProblem> {
    let (sensing, labels) = sensing_matrices(scene, channels, plan)?;
    let mut measurements = Vec::with_capacity(sensing.len());
    for (n, ls) in labels.iter().enumerate() {
        let mut y = Vec::with_capacity(ls.len());
        let mut last: Option<(usize, usize)> = None;
        for l in ls {
            if last != Some((l.slot, l.rx)) {
                let o = observations
                    .find(l.rx, l.slot, n)
                    .ok_or_else(|| invalid(format!("no observation for unit {} in slot {}, subcarrier {n}", l.rx, l.slot)))?;
                if o.y.len() != ls.iter().filter(|k| k.slot == l.slot && k.rx == l.rx).count() {
                    return Err(Error::ShapeMismatch(format!("observation of unit {} has the wrong length", l.rx)));
                }
                y.extend_from_slice(&o.y);
                last = Some((l.slot, l.rx));
            }
        }
        measurements.push(y);
    }
    MmvProblem::with_labels(sensing, measurements, observations.noise_power, labels)
}

/// Zero-padded measurements and sensing matrices, all with l_max rows.
pub fn zero_pad(problem: &MmvProblem) -> (Vec<Vec<C>>, Vec<Mat<C>>) {
    let lm = problem.l_max();
    let q = problem.cells();
    let ys = problem
        .measurements
        .iter()
        .map(|y| {
            let mut v = y.clone();
            v.resize(lm, ZERO);
            v
        })
        .collect();
    let ps = problem
        .sensing
        .iter()
        .map(|p| Mat::from_fn(lm, q, |r, i| if r < p.nrows() { p[(r, i)] } else { ZERO }))
        .collect();
    (ys, ps)
}

/// Indices of vec(𝕐ᵀ) (length N·l_max) that hold real measurements.
pub fn selection_indices(problem: &MmvProblem) -> Vec<usize> {
    let n = problem.subcarriers();
    let lens = problem.lengths();
    (0..problem.l_max() * n).filter(|&k| k / n < lens[k % n]).collect()
}

/// `acc += a ⊗ b`.
fn kron_add(acc: &mut Mat<C>, a: &Mat<C>, b: &Mat<C>) {
    let (br, bc) = (b.nrows(), b.ncols());
    for ca in 0..a.ncols() {
        for ra in 0..a.nrows() {
            let v = a[(ra, ca)];
            if v == ZERO {
                continue;
            }
            for cb in 0..bc {
                for rb in 0..br {
                    let w = b[(rb, cb)];
                    if w != ZERO {
                        acc[(ra * br + rb, ca * bc + cb)] += v * w;
                    }
                }
            }
        }
    }
}

/// ỹ = S·vec(𝕐ᵀ) and Φ̃ = S·Σ_n Φ̄_n ⊗ Υ_n.
#[derive(Debug, Clone)]
pub struct StackedSystem {
    pub phi: Mat<C>,
    pub y: Vec<C>,
    /// Kept indices into the padded stacking.
    pub selection: Vec<usize>,
    pub subcarriers: usize,
    pub cells: usize,
}

pub fn stack(problem: &MmvProblem) -> StackedSystem {
    let n = problem.subcarriers();
    let q = problem.cells();
    let lm = problem.l_max();
    let (ys, ps) = zero_pad(problem);
    let mut vec_yt = vec![ZERO; lm * n];
    for (k, v) in vec_yt.iter_mut().enumerate() {
        *v = ys[k % n][k / n];
    }
    let mut padded = Mat::<C>::zeros(lm * n, q * n);
    for (idx, p) in ps.iter().enumerate() {
        let upsilon = Mat::from_fn(n, n, |a, b| if a == idx && b == idx { C::new(1.0, 0.0) } else { ZERO });
        kron_add(&mut padded, p, &upsilon);
    }
    let selection = selection_indices(problem);
    let phi = Mat::from_fn(selection.len(), q * n, |r, c| padded[(selection[r], c)]);
    let y = selection.iter().map(|&k| vec_yt[k]).collect();
    StackedSystem { phi, y, selection, subcarriers: n, cells: q }
}

/// Which matrix is inverted in the E-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosteriorForm {
    /// Smaller of the two dimensions; the measurement form when σ² = 0.
    #[default]
    Auto,
    /// σ²I + Φ̃Γ̃Φ̃ᴴ of size l_all (the Woodbury expression).
    Measurement,
    /// I + Γ̃^{1/2}Φ̃ᴴΦ̃Γ̃^{1/2}/σ² of size NQ.
    Parameter,
}

/// Posterior mean, diagonal covariance blocks and the evidence objective
/// log det Σ_ȳ + ȳᴴΣ_ȳ⁻¹ȳ at the hyperparameters used.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub mu: Vec<C>,
    pub sigma: Vec<Mat<C>>,
    pub objective: f64,
}

type NormalEquations = (Vec<Mat<C>>, Vec<Vec<C>>);

/// Stacked system plus the products reused across EM iterations.
///
/// Every row of Φ̃ touches a single subcarrier, so the posterior is computed
/// from the per-subcarrier blocks recovered from Φ̃ with the rows regrouped
/// subcarrier-major. Regrouping permutes measurements only and leaves the
/// posterior and the objective unchanged.
pub struct Prepared {
    pub system: StackedSystem,
    pub noise_power: f64,
    /// Φ_n as read back from Φ̃.
    blocks: Vec<Mat<C>>,
    /// ỹ regrouped by subcarrier.
    ys: Vec<Vec<C>>,
    y_norm2: f64,
    /// Φ_nᴴΦ_n and Φ_nᴴy_n.
    normal: OnceLock<NormalEquations>,
}

impl Prepared {
    pub fn new(problem: &MmvProblem) -> Self {
        let system = stack(problem);
        let (n, q) = (system.subcarriers, system.cells);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, &k) in system.selection.iter().enumerate() {
            rows[k % n].push(r);
        }
        let blocks = rows
            .iter()
            .enumerate()
            .map(|(s, rs)| Mat::from_fn(rs.len(), q, |m, i| system.phi[(rs[m], i * n + s)]))
            .collect();
        let ys = rows.iter().map(|rs| rs.iter().map(|&r| system.y[r]).collect()).collect();
        let y_norm2 = system.y.iter().map(|v| v.norm_sqr()).sum();
        Prepared { system, noise_power: problem.noise_power, blocks, ys, y_norm2, normal: OnceLock::new() }
    }

    fn dims(&self) -> (usize, usize, usize) {
        (self.system.subcarriers, self.system.cells, self.system.y.len())
    }

    fn normal_equations(&self) -> &(Vec<Mat<C>>, Vec<Vec<C>>) {
        self.normal.get_or_init(|| {
            let grams = self.blocks.iter().map(|p| p.adjoint() * p).collect();
            let proj = self
                .blocks
                .iter()
                .zip(&self.ys)
                .map(|(p, y)| {
                    let b = p.adjoint() * col(y);
                    (0..b.nrows()).map(|i| b[(i, 0)]).collect()
                })
                .collect();
            (grams, proj)
        })
    }

    pub fn resolve(&self, form: PosteriorForm) -> PosteriorForm {
        let (n, q, l) = self.dims();
        match form {
            PosteriorForm::Auto if self.noise_power > 0.0 && n * q < l => PosteriorForm::Parameter,
            PosteriorForm::Auto => PosteriorForm::Measurement,
            f => f,
        }
    }

    pub fn posterior(&self, gamma: &[f64], psi: &Mat<C>, form: PosteriorForm) -> Result<Posterior> {
        let (n, q, _) = self.dims();
        check_hyper(gamma, psi, n, q)?;
        match self.resolve(form) {
            PosteriorForm::Parameter => self.parameter_form(gamma, psi),
            _ => self.measurement_form(gamma, psi),
        }
    }

    /// K = I + D Φ̃ᴴΦ̃ D/σ² with D = blockdiag(√γ_i Ψ^{1/2}).
    fn parameter_form(&self, gamma: &[f64], psi: &Mat<C>) -> Result<Posterior> {
        if !(self.noise_power > 0.0) {
            return Err(Error::Numerical("the parameter-space form needs σ² > 0".into()));
        }
        let (n, q, l) = self.dims();
        let nq = n * q;
        let s2 = self.noise_power;
        let (grams, proj) = self.normal_equations();
        let h = hermitian_sqrt(psi)?;
        let d: Vec<Mat<C>> = gamma.iter().map(|&g| &h * Scale(C::new(g.sqrt(), 0.0))).collect();
        // (Φ̃ᴴΦ̃)_{ij} = diag_n(G_n[i, j]), so K_ij = d_i diag_n(G_n[i, j]) d_j / σ².
        let mut k = Mat::<C>::zeros(nq, nq);
        for i in 0..q {
            for j in 0..q {
                for r in 0..n {
                    for c in 0..n {
                        let v: C = (0..n).map(|m| d[i][(r, m)] * grams[m][(i, j)] * d[j][(m, c)]).sum();
                        k[(i * n + r, j * n + c)] = v / s2;
                    }
                }
            }
        }
        let mut k = hermitize(&k);
        for i in 0..nq {
            k[(i, i)] += C::new(1.0, 0.0);
        }
        let llt = k
            .llt(Side::Lower)
            .map_err(|_| Error::Numerical("I + Γ̃^{1/2}Φ̃ᴴΦ̃Γ̃^{1/2}/σ² is not positive definite".into()))?;
        let logdet_k: f64 = (0..nq).map(|i| 2.0 * llt.L()[(i, i)].re.ln()).sum();
        let kinv = llt.inverse();
        let mut c = vec![ZERO; nq];
        for i in 0..q {
            for r in 0..n {
                c[i * n + r] = (0..n).map(|m| d[i][(r, m)] * proj[m][i]).sum::<C>() / s2;
            }
        }
        let kc = &kinv * col(&c);
        let quad: f64 = self.y_norm2 / s2 - (0..nq).map(|i| (c[i].conj() * kc[(i, 0)]).re).sum::<f64>();
        let mut mu = vec![ZERO; nq];
        for i in 0..q {
            for r in 0..n {
                mu[i * n + r] = (0..n).map(|m| d[i][(r, m)] * kc[(i * n + m, 0)]).sum();
            }
        }
        let sigma = (0..q)
            .into_par_iter()
            .map(|i| hermitize(&(&d[i] * kinv.submatrix(i * n, i * n, n, n) * &d[i])))
            .collect();
        let objective = l as f64 * s2.ln() + logdet_k + quad;
        Ok(Posterior { mu, sigma, objective })
    }

    /// C = σ²I + Φ̃Γ̃Φ̃ᴴ, whose (n, n') block is Ψ[n, n']·Φ_n Γ Φ_{n'}ᴴ.
    fn measurement_form(&self, gamma: &[f64], psi: &Mat<C>) -> Result<Posterior> {
        let (n, q, l) = self.dims();
        let mut off = vec![0];
        for b in &self.blocks {
            off.push(off.last().unwrap() + b.nrows());
        }
        let scaled: Vec<Mat<C>> = self
            .blocks
            .iter()
            .map(|p| Mat::from_fn(p.nrows(), q, |r, i| p[(r, i)] * gamma[i]))
            .collect();
        let mut cm = Mat::<C>::zeros(l, l);
        for a in 0..n {
            for b in a..n {
                let blk = &scaled[a] * self.blocks[b].adjoint() * Scale(psi[(a, b)]);
                let (ra, rb) = (self.blocks[a].nrows(), self.blocks[b].nrows());
                for c in 0..rb {
                    for r in 0..ra {
                        cm[(off[a] + r, off[b] + c)] = blk[(r, c)];
                        cm[(off[b] + c, off[a] + r)] = blk[(r, c)].conj();
                    }
                }
            }
        }
        let cm = hermitize(&cm);
        let mut cm = cm;
        for i in 0..l {
            cm[(i, i)] += C::new(self.noise_power, 0.0);
        }
        let llt = cm.llt(Side::Lower).map_err(|_| {
            Error::Numerical(format!(
                "σ²I + Φ̃Γ̃Φ̃ᴴ is singular (σ² = {:e}, {l} measurements, rank at most NQ = {}); use σ² > 0",
                self.noise_power,
                n * q
            ))
        })?;
        let lower = llt.L();
        let logdet: f64 = (0..l).map(|i| 2.0 * lower[(i, i)].re.ln()).sum();
        if !logdet.is_finite() {
            return Err(Error::Numerical("non-finite log-determinant".into()));
        }
        let y: Vec<C> = self.ys.iter().flatten().copied().collect();
        let cy = llt.solve(col(&y));
        let quad: f64 = (0..l).map(|i| (y[i].conj() * cy[(i, 0)]).re).sum();
        // z_n = Φ_nᴴ (C⁻¹ỹ)_n, μ_i = γ_i Ψ z_{·i}.
        let z: Vec<Mat<C>> = (0..n)
            .map(|a| self.blocks[a].adjoint() * cy.submatrix(off[a], 0, off[a + 1] - off[a], 1))
            .collect();
        let mut mu = vec![ZERO; n * q];
        for i in 0..q {
            for r in 0..n {
                mu[i * n + r] = (0..n).map(|m| psi[(r, m)] * z[m][(i, 0)]).sum::<C>() * gamma[i];
            }
        }
        // Y = L⁻¹·blockdiag(Φ_n); rows above a block's offset stay zero.
        let ys: Vec<Mat<C>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let rows = l - off[a];
                let mut rhs = Mat::<C>::zeros(rows, q);
                rhs.submatrix_mut(0, 0, self.blocks[a].nrows(), q).copy_from(&self.blocks[a]);
                faer::linalg::triangular_solve::solve_lower_triangular_in_place(
                    lower.submatrix(off[a], off[a], rows, rows),
                    rhs.as_mut(),
                    faer::Par::Seq,
                );
                rhs
            })
            .collect();
        let sigma = (0..q)
            .into_par_iter()
            .map(|i| {
                // Φ̃_iᴴC⁻¹Φ̃_i = Y_iᴴY_i.
                let mut g = Mat::<C>::zeros(n, n);
                for a in 0..n {
                    for b in a..n {
                        let lo = off[a].max(off[b]);
                        let v: C = (lo..l).map(|r| ys[a][(r - off[a], i)].conj() * ys[b][(r - off[b], i)]).sum();
                        g[(a, b)] = v;
                        g[(b, a)] = v.conj();
                    }
                }
                let t = psi * &g * psi;
                hermitize(&(psi * Scale(C::new(gamma[i], 0.0)) - t * Scale(C::new(gamma[i] * gamma[i], 0.0))))
            })
            .collect();
        Ok(Posterior { mu, sigma, objective: logdet + quad })
    }
}

fn col(v: &[C]) -> Mat<C> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn hermitize(m: &Mat<C>) -> Mat<C> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

fn check_hyper(gamma: &[f64], psi: &Mat<C>, n: usize, q: usize) -> Result<()> {
    if gamma.len() != q {
        return Err(Error::ShapeMismatch(format!("{} hyperparameters for {q} cells", gamma.len())));
    }
    if gamma.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(invalid("every γ must be positive and finite"));
    }
    if psi.nrows() != n || psi.ncols() != n {
        return Err(Error::ShapeMismatch(format!("Ψ must be {n}×{n}")));
    }
    Ok(())
}

/// Hermitian square root through the eigendecomposition; fails unless PD.
pub fn hermitian_sqrt(m: &Mat<C>) -> Result<Mat<C>> {
    let h = hermitize(m);
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Numerical("eigendecomposition did not converge".into()))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let n = h.nrows();
    if (0..n).any(|i| !(s[i].re > 0.0)) {
        return Err(Error::Numerical("Ψ is not positive definite".into()));
    }
    let su = Mat::from_fn(n, n, |i, j| u[(i, j)] * s[j].re.sqrt());
    Ok(&su * u.adjoint())
}

/// Posterior at (γ, Ψ) with the automatically chosen form.
pub fn posterior_update(problem: &MmvProblem, gamma: &[f64], psi: &Mat<C>) -> Result<Posterior> {
    Prepared::new(problem).posterior(gamma, psi, PosteriorForm::Auto)
}

/// Hyperparameters with the latest posterior.
#[derive(Debug, Clone)]
pub struct SblState {
    pub gamma: Vec<f64>,
    pub psi: Mat<C>,
    pub mu: Vec<C>,
    pub sigma: Vec<Mat<C>>,
    pub iteration: usize,
    /// Objective before each M-step.
    pub objective_trace: Vec<f64>,
}

impl SblState {
    /// γ = 1, Ψ = I, posterior equal to the prior.
    pub fn initial(subcarriers: usize, cells: usize) -> Self {
        let psi = Mat::<C>::identity(subcarriers, subcarriers);
        SblState {
            gamma: vec![1.0; cells],
            sigma: vec![psi.clone(); cells],
            psi,
            mu: vec![ZERO; subcarriers * cells],
            iteration: 0,
            objective_trace: Vec::new(),
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.psi.nrows()
    }

    /// R_i = μ̄_i μ̄_iᴴ + Σ̄_i.
    pub fn second_moment(&self, i: usize) -> Mat<C> {
        let n = self.subcarriers();
        let m = &self.mu[i * n..(i + 1) * n];
        Mat::from_fn(n, n, |a, b| m[a] * m[b].conj() + self.sigma[i][(a, b)])
    }

    pub fn with_posterior(mut self, p: Posterior) -> Self {
        self.mu = p.mu;
        self.sigma = p.sigma;
        self.objective_trace.push(p.objective);
        self
    }
}

/// Cells entering the Ψ update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationUpdate {
    /// Ψ stays at its current value.
    Fixed,
    /// Ψ = (1/Q) Σ_i R_i/γ_i over every cell.
    AllCells,
    /// The same average over cells with γ_i ≥ 0.01·max γ.
    #[default]
    ActiveCells,
}

impl std::str::FromStr for CorrelationUpdate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "all-cells" => Ok(Self::AllCells),
            "active-cells" => Ok(Self::ActiveCells),
            _ => Err(invalid(format!("unknown correlation update '{s}'"))),
        }
    }
}

/// M-step: γ_i = tr(R_i Ψ⁻¹)/N with the current Ψ, then
/// Ψ = avg R_i/γ_i with the new γ; Ψ is hermitized, jittered and scaled
/// to unit mean diagonal with the scale moved into γ.
pub fn em_step(state: &SblState, update: CorrelationUpdate) -> Result<SblState> {
    let n = state.subcarriers();
    let q = state.gamma.len();
    let psi_inv = hermitize(&state.psi)
        .llt(Side::Lower)
        .map_err(|_| Error::Numerical("Ψ lost positive definiteness".into()))?
        .inverse();
    let moments: Vec<Mat<C>> = (0..q).into_par_iter().map(|i| state.second_moment(i)).collect();
    let mut gamma: Vec<f64> = moments
        .iter()
        .map(|r| {
            let t: C = (0..n).map(|a| (0..n).map(|b| r[(a, b)] * psi_inv[(b, a)]).sum::<C>()).sum();
            t.re / n as f64
        })
        .collect();
    let gmax = gamma.iter().cloned().fold(0.0, f64::max);
    if !(gmax > 0.0 && gmax.is_finite()) {
        return Err(Error::Numerical(format!("γ update produced max {gmax}")));
    }
    let floor = 1e-12 * gmax;
    gamma.iter_mut().for_each(|g| *g = g.max(floor));
    let psi = if update != CorrelationUpdate::Fixed {
        let gm = gamma.iter().cloned().fold(0.0, f64::max);
        let used = |g: f64| update == CorrelationUpdate::AllCells || g >= SUPPORT_FRACTION * gm;
        let cnt = gamma.iter().filter(|&&g| used(g)).count();
        let mut acc = Mat::<C>::zeros(n, n);
        for (r, &g) in moments.iter().zip(&gamma) {
            if used(g) {
                acc += r * Scale(C::new(1.0 / (g * cnt as f64), 0.0));
            }
        }
        let mut p = hermitize(&acc);
        let tr: f64 = (0..n).map(|i| p[(i, i)].re).sum();
        for i in 0..n {
            p[(i, i)] += C::new(1e-10 * tr / n as f64, 0.0);
        }
        let scale: f64 = (0..n).map(|i| p[(i, i)].re).sum::<f64>() / n as f64;
        gamma.iter_mut().for_each(|g| *g *= scale);
        p * Scale(C::new(1.0 / scale, 0.0))
    } else {
        state.psi.clone()
    };
    Ok(SblState { gamma, psi, iteration: state.iteration + 1, ..state.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SblOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub form: PosteriorForm,
    pub correlation: CorrelationUpdate,
}

impl Default for SblOptions {
    fn default() -> Self {
        SblOptions { max_iters: DEFAULT_MAX_ITERS, tol: DEFAULT_TOL, form: PosteriorForm::Auto, correlation: CorrelationUpdate::ActiveCells }
    }
}

/// Reconstructed ρ̂_n for every subcarrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectivityEstimate {
    /// `rho[n][i]`.
    pub rho: Vec<Vec<C>>,
    pub support: Vec<bool>,
    /// Learned voxel powers, when the solver has them.
    pub gamma: Option<Vec<f64>>,
}

impl ReflectivityEstimate {
    /// Rows of mat(μ, N, Q).
    pub fn from_stacked(mu: &[C], subcarriers: usize, gamma: Option<Vec<f64>>) -> Self {
        let q = mu.len() / subcarriers;
        let rho: Vec<Vec<C>> = (0..subcarriers).map(|n| (0..q).map(|i| mu[i * subcarriers + n]).collect()).collect();
        let support = match &gamma {
            Some(g) => threshold(g),
            None => threshold(&voxel_power(&rho)),
        };
        ReflectivityEstimate { rho, support, gamma }
    }

    pub fn from_rows(rho: Vec<Vec<C>>) -> Self {
        let support = threshold(&voxel_power(&rho));
        ReflectivityEstimate { rho, support, gamma: None }
    }

    pub fn cells(&self) -> usize {
        self.rho.first().map_or(0, Vec::len)
    }

    /// (1/N)·Σ_n |ρ̂_n(i)|² per voxel.
    pub fn power(&self) -> Vec<f64> {
        voxel_power(&self.rho)
    }

    /// √power, the magnitude used for voxel renders and metrics.
    pub fn magnitude(&self) -> Vec<f64> {
        self.power().into_iter().map(f64::sqrt).collect()
    }
}

fn voxel_power(rho: &[Vec<C>]) -> Vec<f64> {
    let q = rho.first().map_or(0, Vec::len);
    (0..q).map(|i| rho.iter().map(|r| r[i].norm_sqr()).sum::<f64>() / rho.len() as f64).collect()
}

fn threshold(v: &[f64]) -> Vec<bool> {
    let m = v.iter().cloned().fold(0.0, f64::max);
    v.iter().map(|&x| m > 0.0 && x >= SUPPORT_FRACTION * m).collect()
}

/// Outcome of an EM run.
#[derive(Debug, Clone)]
pub struct SblRun {
    pub estimate: ReflectivityEstimate,
    pub state: SblState,
    pub converged: bool,
}

/// EM from γ = 1, Ψ = I until the relative γ change drops below `tol` or
/// `max_iters` iterations ran. Returns the posterior mean of the last E-step.
///
/// Cells whose sensing columns vanish on every subcarrier carry no
/// information; they are left out of EM and reported with ρ̂ = 0, γ = 0.
pub fn sbl_em(problem: &MmvProblem, opts: &SblOptions) -> Result<SblRun> {
    let keep = observable_cells(problem);
    if keep.len() == problem.cells() {
        return sbl_em_prepared(&Prepared::new(problem), opts);
    }
    if keep.is_empty() {
        return Err(Error::Numerical("no cell is observed by any measurement".into()));
    }
    let run = sbl_em_prepared(&Prepared::new(&problem.restrict(&keep)), opts)?;
    let (n, q) = (problem.subcarriers(), problem.cells());
    let s = run.state;
    let mut gamma = vec![0.0; q];
    let mut mu = vec![ZERO; n * q];
    let mut sigma = vec![Mat::<C>::zeros(n, n); q];
    for (j, &i) in keep.iter().enumerate() {
        gamma[i] = s.gamma[j];
        mu[i * n..(i + 1) * n].copy_from_slice(&s.mu[j * n..(j + 1) * n]);
        sigma[i] = s.sigma[j].clone();
    }
    let estimate = ReflectivityEstimate::from_stacked(&mu, n, Some(gamma.clone()));
    let state = SblState { gamma, mu, sigma, ..s };
    Ok(SblRun { estimate, state, converged: run.converged })
}

/// Cells with a nonzero sensing column on at least one subcarrier.
pub fn observable_cells(problem: &MmvProblem) -> Vec<usize> {
    (0..problem.cells())
        .filter(|&i| problem.sensing.iter().any(|p| (0..p.nrows()).any(|r| p[(r, i)] != ZERO)))
        .collect()
}

pub fn sbl_em_prepared(prep: &Prepared, opts: &SblOptions) -> Result<SblRun> {
    if opts.max_iters == 0 {
        return Err(invalid("EM needs at least one iteration"));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("EM tolerance must be positive"));
    }
    let (n, q) = (prep.system.subcarriers, prep.system.cells);
    let mut state = SblState::initial(n, q);
    let mut converged = false;
    for _ in 0..opts.max_iters {
        let post = prep.posterior(&state.gamma, &state.psi, opts.form)?;
        state = state.with_posterior(post);
        let next = em_step(&state, opts.correlation)?;
        let num: f64 = next.gamma.iter().zip(&state.gamma).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den: f64 = state.gamma.iter().map(|g| g * g).sum::<f64>().sqrt();
        let mu = std::mem::take(&mut state.mu);
        let sigma = std::mem::take(&mut state.sigma);
        state = SblState { mu, sigma, ..next };
        if num / den < opts.tol {
            converged = true;
            break;
        }
    }
    let estimate = ReflectivityEstimate::from_stacked(&state.mu, n, Some(state.gamma.clone()));
    Ok(SblRun { estimate, state, converged })
}

fn hpd_solve(m: &Mat<C>, rhs: &Mat<C>, what: &str) -> Result<Mat<C>> {
    let llt = hermitize(m)
        .llt(Side::Lower)
        .map_err(|_| Error::Numerical(format!("{what} is not positive definite")))?;
    Ok(llt.solve(rhs))
}

fn ridge(m: &mut Mat<C>, rel: f64) {
    let n = m.nrows();
    let tr: f64 = (0..n).map(|i| m[(i, i)].re).sum();
    let d = if tr > 0.0 { rel * tr / n as f64 } else { rel };
    for i in 0..n {
        m[(i, i)] += C::new(d, 0.0);
    }
}

/// Minimum-norm least squares per subcarrier through ridge-regularized
/// normal equations (ridge 1e-9 of the mean Gram diagonal).
pub fn ls(problem: &MmvProblem) -> Result<ReflectivityEstimate> {
    let rows = problem
        .sensing
        .iter()
        .zip(&problem.measurements)
        .map(|(phi, y)| -> Result<Vec<C>> {
            let yv = col(y);
            let x = if phi.nrows() < phi.ncols() {
                let mut g = phi * phi.adjoint();
                ridge(&mut g, 1e-9);
                phi.adjoint() * hpd_solve(&g, &yv, "ΦΦᴴ")?
            } else {
                let mut g = phi.adjoint() * phi;
                ridge(&mut g, 1e-9);
                hpd_solve(&g, &(phi.adjoint() * &yv), "ΦᴴΦ")?
            };
            Ok((0..x.nrows()).map(|i| x[(i, 0)]).collect())
        })
        .collect::<Result<_>>()?;
    Ok(ReflectivityEstimate::from_rows(rows))
}

/// Orthogonal matching pursuit with `k` atoms per subcarrier.
pub fn omp(problem: &MmvProblem, k: usize) -> Result<ReflectivityEstimate> {
    let q = problem.cells();
    if k > q {
        return Err(invalid(format!("OMP sparsity {k} exceeds the {q} cells")));
    }
    let rows = problem
        .sensing
        .iter()
        .zip(&problem.measurements)
        .map(|(phi, y)| omp_single(phi, y, k))
        .collect::<Result<_>>()?;
    Ok(ReflectivityEstimate::from_rows(rows))
}

fn omp_single(phi: &Mat<C>, y: &[C], k: usize) -> Result<Vec<C>> {
    let (l, q) = (phi.nrows(), phi.ncols());
    let norms: Vec<f64> = (0..q).map(|i| (0..l).map(|r| phi[(r, i)].norm_sqr()).sum::<f64>().sqrt()).collect();
    let mut support: Vec<usize> = Vec::with_capacity(k);
    let mut residual = y.to_vec();
    let mut coef = Vec::new();
    for _ in 0..k.min(l) {
        let corr = phi.adjoint() * col(&residual);
        let pick = (0..q)
            .filter(|i| !support.contains(i) && norms[*i] > 0.0)
            .max_by(|&a, &b| (corr[(a, 0)].norm() / norms[a]).total_cmp(&(corr[(b, 0)].norm() / norms[b])));
        let Some(pick) = pick else { break };
        support.push(pick);
        let sub = Mat::from_fn(l, support.len(), |r, c| phi[(r, support[c])]);
        let mut g = sub.adjoint() * &sub;
        ridge(&mut g, 1e-12);
        let x = hpd_solve(&g, &(sub.adjoint() * col(y)), "OMP Gram")?;
        coef = (0..x.nrows()).map(|i| x[(i, 0)]).collect();
        let fit = &sub * &x;
        residual = (0..l).map(|r| y[r] - fit[(r, 0)]).collect();
    }
    let mut out = vec![ZERO; q];
    for (&i, &c) in support.iter().zip(&coef) {
        out[i] = c;
    }
    Ok(out)
}

/// Largest eigenvalue of ΦᴴΦ by power iteration.
pub fn spectral_norm_sq(phi: &Mat<C>, iters: usize) -> f64 {
    let q = phi.ncols();
    let mut v = Mat::from_fn(q, 1, |i, _| C::new(1.0 + 0.01 * i as f64, 0.0));
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = phi.adjoint() * (phi * &v);
        let nrm = w.norm_l2();
        if nrm == 0.0 {
            return 0.0;
        }
        lambda = nrm / v.norm_l2();
        v = w * Scale(C::new(1.0 / nrm, 0.0));
    }
    lambda
}

/// Iterative shrinkage-thresholding for ½‖y − Φρ‖² + λ_abs‖ρ‖₁ per
/// subcarrier with step 1/L̂. `lambda` is relative to ‖Φᴴy‖_∞, so
/// λ_abs = lambda·‖Φᴴy‖_∞.
pub fn ista(problem: &MmvProblem, lambda: f64, iters: usize) -> Result<ReflectivityEstimate> {
    if !(lambda >= 0.0) {
        return Err(invalid("ISTA λ must be non-negative"));
    }
    if iters == 0 {
        return Err(invalid("ISTA needs at least one iteration"));
    }
    let rows = problem
        .sensing
        .iter()
        .zip(&problem.measurements)
        .map(|(phi, y)| {
            let q = phi.ncols();
            let lhat = spectral_norm_sq(phi, 100) * 1.01;
            if lhat == 0.0 {
                return vec![ZERO; q];
            }
            let aty = phi.adjoint() * col(y);
            let scale = (0..q).map(|i| aty[(i, 0)].norm()).fold(0.0, f64::max);
            let tau = lambda * scale / lhat;
            let gram = phi.adjoint() * phi;
            let mut x = Mat::<C>::zeros(q, 1);
            for _ in 0..iters {
                let g = &aty - &gram * &x;
                for i in 0..q {
                    let v = x[(i, 0)] + g[(i, 0)] / lhat;
                    let m = v.norm();
                    x[(i, 0)] = if m > tau { v * ((m - tau) / m) } else { ZERO };
                }
            }
            (0..q).map(|i| x[(i, 0)]).collect()
        })
        .collect();
    Ok(ReflectivityEstimate::from_rows(rows))
}

/// LASSO in its Lagrangian form, solved by [`ista`].
pub fn lasso(problem: &MmvProblem, lambda: f64, iters: usize) -> Result<ReflectivityEstimate> {
    ista(problem, lambda, iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, stream};

    fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat<C> {
        let mut rng = stream(seed, &[77]);
        Mat::from_fn(rows, cols, |_, _| complex_normal(&mut rng, 1.0))
    }

    fn random_vec(len: usize, seed: u64) -> Vec<C> {
        let mut rng = stream(seed, &[78]);
        (0..len).map(|_| complex_normal(&mut rng, 1.0)).collect()
    }

    fn toy(lens: &[usize], q: usize, sigma2: f64, seed: u64) -> MmvProblem {
        let sensing: Vec<Mat<C>> = lens.iter().enumerate().map(|(n, &l)| random_mat(l, q, seed * 10 + n as u64)).collect();
        let ys = lens.iter().enumerate().map(|(n, &l)| random_vec(l, seed * 10 + n as u64)).collect();
        MmvProblem::new(sensing, ys, sigma2).unwrap()
    }

    fn ar1(n: usize, rho: f64) -> Mat<C> {
        Mat::from_fn(n, n, |a, b| C::new(rho.powi((a as i32 - b as i32).abs()), 0.0))
    }

    #[test]
    fn scalar_wiener() {
        let phi = C::new(0.3, -1.2);
        let y = C::new(0.7, 0.1);
        let p = MmvProblem::new(vec![Mat::from_fn(1, 1, |_, _| phi)], vec![vec![y]], 0.5).unwrap();
        let g = 2.0;
        let psi = Mat::<C>::identity(1, 1);
        let expect = phi.conj() * y * g / (0.5 + g * phi.norm_sqr());
        for form in [PosteriorForm::Measurement, PosteriorForm::Parameter] {
            let post = Prepared::new(&p).posterior(&[g], &psi, form).unwrap();
            assert!((post.mu[0] - expect).norm() < 1e-14);
            let var = g - g * g * phi.norm_sqr() / (0.5 + g * phi.norm_sqr());
            assert!((post.sigma[0][(0, 0)].re - var).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_sensing_returns_prior() {
        let p = MmvProblem::new(vec![Mat::zeros(3, 2), Mat::zeros(2, 2)], vec![random_vec(3, 1), random_vec(2, 2)], 0.1).unwrap();
        let psi = ar1(2, 0.5);
        let gamma = [0.7, 2.0];
        for form in [PosteriorForm::Measurement, PosteriorForm::Parameter] {
            let post = Prepared::new(&p).posterior(&gamma, &psi, form).unwrap();
            assert!(post.mu.iter().all(|v| v.norm() < 1e-15));
            for (i, s) in post.sigma.iter().enumerate() {
                for a in 0..2 {
                    for b in 0..2 {
                        assert!((s[(a, b)] - psi[(a, b)] * gamma[i]).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn forms_agree_with_direct_inverse() {
        let p = toy(&[4, 3], 3, 0.3, 4);
        let gamma = [0.5, 1.5, 0.9];
        let psi = ar1(2, 0.6);
        let prep = Prepared::new(&p);
        let a = prep.posterior(&gamma, &psi, PosteriorForm::Measurement).unwrap();
        let b = prep.posterior(&gamma, &psi, PosteriorForm::Parameter).unwrap();
        // Direct: Σ = (Φ̃ᴴΦ̃/σ² + Γ̃⁻¹)⁻¹, μ = ΣΦ̃ᴴỹ/σ².
        let (n, q) = (2, 3);
        let gt = Mat::from_fn(n * q, n * q, |r, c| if r / n == c / n { psi[(r % n, c % n)] * gamma[r / n] } else { ZERO });
        let gti = gt.llt(Side::Lower).unwrap().inverse();
        let phi = &prep.system.phi;
        let prec = phi.adjoint() * phi * Scale(C::new(1.0 / 0.3, 0.0)) + gti;
        let sig = prec.llt(Side::Lower).unwrap().inverse();
        let mu = &sig * phi.adjoint() * col(&prep.system.y) * Scale(C::new(1.0 / 0.3, 0.0));
        for post in [&a, &b] {
            for i in 0..n * q {
                assert!((post.mu[i] - mu[(i, 0)]).norm() <= 1e-10 * mu[(i, 0)].norm().max(1e-3));
            }
            for i in 0..q {
                for r in 0..n {
                    for c in 0..n {
                        assert!((post.sigma[i][(r, c)] - sig[(i * n + r, i * n + c)]).norm() < 1e-10);
                    }
                }
            }
        }
        assert!((a.objective - b.objective).abs() < 1e-9 * a.objective.abs());
    }

    #[test]
    fn stacking_matches_block_layout() {
        let p = toy(&[3, 5, 2], 4, 0.1, 9);
        let s = stack(&p);
        assert_eq!(s.y.len(), p.l_all());
        let n = 3;
        let mut row = 0;
        for r in 0..p.l_max() {
            for k in 0..n {
                if r < p.measurements[k].len() {
                    assert_eq!(s.y[row], p.measurements[k][r]);
                    for i in 0..4 {
                        for m in 0..n {
                            let want = if m == k { p.sensing[k][(r, i)] } else { ZERO };
                            assert_eq!(s.phi[(row, i * n + m)], want);
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    #[test]
    fn em_fixed_point_without_data() {
        let psi = ar1(3, 0.4);
        let scale = (0..3).map(|i| psi[(i, i)].re).sum::<f64>() / 3.0;
        assert!((scale - 1.0).abs() < 1e-15);
        let gamma = vec![0.5, 2.0];
        let state = SblState {
            gamma: gamma.clone(),
            psi: psi.clone(),
            mu: vec![ZERO; 6],
            sigma: gamma.iter().map(|&g| &psi * Scale(C::new(g, 0.0))).collect(),
            iteration: 0,
            objective_trace: vec![],
        };
        let next = em_step(&state, CorrelationUpdate::AllCells).unwrap();
        for (a, b) in next.gamma.iter().zip(&gamma) {
            assert!((a - b).abs() < 1e-9);
        }
        for r in 0..3 {
            for c in 0..3 {
                assert!((next.psi[(r, c)] - psi[(r, c)]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn single_subcarrier_gamma_is_classic() {
        let mut state = SblState::initial(1, 2);
        state.mu = vec![C::new(0.3, 0.4), C::new(1.0, 0.0)];
        state.sigma = vec![Mat::from_fn(1, 1, |_, _| C::new(0.1, 0.0)), Mat::from_fn(1, 1, |_, _| C::new(0.2, 0.0))];
        let next = em_step(&state, CorrelationUpdate::AllCells).unwrap();
        assert!((next.psi[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((next.gamma[0] - 0.35).abs() < 1e-9);
        assert!((next.gamma[1] - 1.2).abs() < 1e-9);
    }

    #[test]
    fn objective_non_increasing() {
        let p = toy(&[12, 9], 6, 0.05, 21);
        let run = sbl_em(&p, &SblOptions { max_iters: 50, tol: 1e-12, ..Default::default() }).unwrap();
        let t = &run.state.objective_trace;
        assert!(t.len() >= 2);
        for w in t.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn zero_measurements_give_zero_estimate() {
        let mut p = toy(&[5, 5], 4, 0.01, 3);
        p.measurements.iter_mut().for_each(|y| y.iter_mut().for_each(|v| *v = ZERO));
        let run = sbl_em(&p, &SblOptions { max_iters: 5, ..Default::default() }).unwrap();
        assert!(run.estimate.rho.iter().flatten().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn singular_noiseless_system_is_reported() {
        let p = toy(&[6], 2, 0.0, 5);
        let r = Prepared::new(&p).posterior(&[1.0, 1.0], &Mat::identity(1, 1), PosteriorForm::Auto);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn ls_recovers_orthonormal_system() {
        let q = 4;
        let phi = Mat::from_fn(q, q, |r, c| C::from_polar(0.5, std::f64::consts::PI * 2.0 * (r * c) as f64 / q as f64));
        let x = random_vec(q, 8);
        let y: Vec<C> = (0..q).map(|r| (0..q).map(|c| phi[(r, c)] * x[c]).sum()).collect();
        let p = MmvProblem::new(vec![phi], vec![y], 0.0).unwrap();
        let est = ls(&p).unwrap();
        for (a, b) in est.rho[0].iter().zip(&x) {
            assert!((a - b).norm() < 1e-7);
        }
    }

    #[test]
    fn omp_rejects_large_k() {
        let p = toy(&[4], 3, 0.1, 1);
        assert!(omp(&p, 4).is_err());
    }

    #[test]
    fn ista_small_lambda_approaches_ls() {
        let phi = random_mat(20, 4, 12);
        let x = random_vec(4, 13);
        let y: Vec<C> = (0..20).map(|r| (0..4).map(|c| phi[(r, c)] * x[c]).sum::<C>() + C::new(0.01 * r as f64, 0.0)).collect();
        let p = MmvProblem::new(vec![phi], vec![y], 0.0).unwrap();
        let a = ls(&p).unwrap();
        let b = ista(&p, 0.0, 5000).unwrap();
        for (u, v) in a.rho[0].iter().zip(&b.rho[0]) {
            assert!((u - v).norm() < 1e-6);
        }
    }

    #[test]
    fn empty_receiver_set_rejected_by_validation_shape() {
        let p = MmvProblem::new(vec![Mat::zeros(2, 3)], vec![vec![ZERO; 3]], 0.1);
        assert!(matches!(p, Err(Error::ShapeMismatch(_))));
    }
}
