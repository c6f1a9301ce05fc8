//! Transmit signals, echo synthesis and per-antenna-pair observations.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{assemble_channels_occupied, ChannelTensor};
use crate::error::{invalid, Error, Result};
use crate::geometry::{ArrayArchitecture, Scene, SubcarrierPlan};
use crate::rng::{complex_normal, complex_normal_vec, stream, tag};

type C = Complex64;

/// DFT space-time precoder: M_t × S with entries √(P/(N·M_t))·e^{−j2π m s / S}.
pub fn dft_precoder(m_t: usize, slots: usize, power: f64, subcarriers: usize) -> Result<Mat<C>> {
    if m_t == 0 || subcarriers == 0 {
        return Err(invalid("precoder needs at least one antenna and one subcarrier"));
    }
    if slots < m_t {
        return Err(invalid(format!("precoder needs S ≥ M_t, got S = {slots} < {m_t}")));
    }
    if !(power >= 0.0) {
        return Err(invalid("transmit power must be non-negative"));
    }
    let a = (power / (subcarriers as f64 * m_t as f64)).sqrt();
    let w = -2.0 * std::f64::consts::PI / slots as f64;
    // Reduce m·s modulo S first so the phase stays exact for large grids.
    Ok(Mat::from_fn(m_t, slots, |m, s| C::from_polar(a, w * ((m * s) % slots) as f64)))
}

/// One DFT precoder per transmitting unit.
#[derive(Debug, Clone)]
pub struct Precoders {
    pub slots: usize,
    pub power: f64,
    pub subcarriers: usize,
    pub matrices: Vec<Mat<C>>,
}

impl Precoders {
    pub fn dft(unit_sizes: &[usize], slots: usize, power: f64, subcarriers: usize) -> Result<Self> {
        let matrices = unit_sizes
            .iter()
            .map(|&m| dft_precoder(m, slots, power, subcarriers))
            .collect::<Result<_>>()?;
        Ok(Precoders { slots, power, subcarriers, matrices })
    }

    /// Gain PS/(N·M_t) of X·Xᴴ for unit `u`.
    pub fn gram_scale(&self, u: usize) -> f64 {
        self.power * self.slots as f64 / (self.subcarriers as f64 * self.matrices[u].nrows() as f64)
    }
}

/// Transmitters, receivers and transmit vectors for one (slot, subcarrier).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSchedule {
    pub transmitters: Vec<usize>,
    pub receivers: Vec<usize>,
    /// One vector per entry of `transmitters`.
    pub signals: Vec<Vec<C>>,
}

/// Illumination schedule and transmit signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitPlan {
    pub slots: usize,
    pub subcarriers: usize,
    pub power: f64,
    /// Indexed by `s * subcarriers + n`.
    pub schedule: Vec<SlotSchedule>,
}

impl TransmitPlan {
    pub fn get(&self, s: usize, n: usize) -> &SlotSchedule {
        &self.schedule[s * self.subcarriers + n]
    }

    /// Check power budget, set disjointness and signal lengths.
    pub fn validate(&self, unit_sizes: &[usize]) -> Result<()> {
        if self.schedule.len() != self.slots * self.subcarriers {
            return Err(Error::ShapeMismatch("schedule length differs from S·N".into()));
        }
        let budget = self.power / self.subcarriers as f64;
        for (i, e) in self.schedule.iter().enumerate() {
            if e.signals.len() != e.transmitters.len() {
                return Err(Error::ShapeMismatch(format!("entry {i}: one signal per transmitter required")));
            }
            if e.transmitters.iter().any(|t| e.receivers.contains(t)) {
                return Err(invalid(format!("entry {i}: a unit both transmits and receives")));
            }
            for (&t, x) in e.transmitters.iter().zip(&e.signals) {
                let size = *unit_sizes.get(t).ok_or_else(|| invalid(format!("unknown unit {t}")))?;
                if x.len() != size {
                    return Err(Error::ShapeMismatch(format!("entry {i}: unit {t} has {size} antennas")));
                }
                let e2: f64 = x.iter().map(|v| v.norm_sqr()).sum();
                if e2 > budget * (1.0 + 1e-9) {
                    return Err(invalid(format!("entry {i}: unit {t} exceeds the per-subcarrier power budget")));
                }
            }
            if e.receivers.iter().any(|&r| r >= unit_sizes.len()) {
                return Err(invalid(format!("entry {i}: unknown receiver")));
            }
        }
        Ok(())
    }

    fn random_pilot(unit: usize, s: usize, n: usize, size: usize, budget: f64, seed: u64) -> Vec<C> {
        let mut rng = stream(seed, &[tag::PILOT, unit as u64, s as u64, n as u64]);
        let mut x = complex_normal_vec(&mut rng, size, 1.0);
        let e: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let scale = budget.sqrt() / e;
        x.iter_mut().for_each(|v| *v *= scale);
        x
    }

    /// Each slot one unit receives (taking turns) and all others transmit
    /// seeded random pilots at the full per-subcarrier budget.
    pub fn round_robin(unit_sizes: &[usize], slots: usize, subcarriers: usize, power: f64, seed: u64) -> Result<Self> {
        Self::with_receiver(unit_sizes, slots, subcarriers, power, seed, |s| s % unit_sizes.len())
    }

    /// Unit `receiver` receives in every slot.
    pub fn single_view(unit_sizes: &[usize], receiver: usize, slots: usize, subcarriers: usize, power: f64, seed: u64) -> Result<Self> {
        if receiver >= unit_sizes.len() {
            return Err(invalid("receiver index out of range"));
        }
        Self::with_receiver(unit_sizes, slots, subcarriers, power, seed, |_| receiver)
    }

    fn with_receiver(
        unit_sizes: &[usize],
        slots: usize,
        subcarriers: usize,
        power: f64,
        seed: u64,
        rx: impl Fn(usize) -> usize,
    ) -> Result<Self> {
        if unit_sizes.len() < 2 || slots == 0 || subcarriers == 0 {
            return Err(invalid("cooperative schedule needs ≥ 2 units, ≥ 1 slot and ≥ 1 subcarrier"));
        }
        let budget = power / subcarriers as f64;
        let mut schedule = Vec::with_capacity(slots * subcarriers);
        for s in 0..slots {
            let r = rx(s);
            for n in 0..subcarriers {
                let transmitters: Vec<usize> = (0..unit_sizes.len()).filter(|&u| u != r).collect();
                let signals = transmitters
                    .iter()
                    .map(|&t| Self::random_pilot(t, s, n, unit_sizes[t], budget, seed))
                    .collect();
                schedule.push(SlotSchedule { transmitters, receivers: vec![r], signals });
            }
        }
        let plan = TransmitPlan { slots, subcarriers, power, schedule };
        plan.validate(unit_sizes)?;
        Ok(plan)
    }
}

/// Received vector of one unit in one (slot, subcarrier).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub rx: usize,
    pub tx: Vec<usize>,
    pub slot: usize,
    pub subcarrier: usize,
    pub y: Vec<C>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub noise_power: f64,
    pub seed: u64,
    pub records: Vec<Observation>,
}

impl ObservationSet {
    pub fn find(&self, rx: usize, slot: usize, subcarrier: usize) -> Option<&Observation> {
        self.records.iter().find(|o| o.rx == rx && o.slot == slot && o.subcarrier == subcarrier)
    }
}

fn noise(seed: u64, rx: usize, tx: &[usize], slot: usize, n: usize, len: usize, var: f64) -> Vec<C> {
    if var == 0.0 {
        return vec![C::new(0.0, 0.0); len];
    }
    let mut key = vec![tag::NOISE, rx as u64, slot as u64, n as u64];
    key.extend(tx.iter().map(|&t| t as u64 + 1000));
    let mut rng = stream(seed, &key);
    (0..len).map(|_| complex_normal(&mut rng, var)).collect()
}

fn check_plan(scene: &Scene, channels: &ChannelTensor) -> Result<()> {
    if scene.subcarrier_rows() > 1 && scene.subcarrier_rows() != channels.subcarriers() {
        return Err(invalid("scene reflectivity and channel subcarrier plans differ"));
    }
    Ok(())
}

/// Noiseless echo operator V̄·H[n]·diag(ρ_n)·H[n]ᵀ over all antennas.
pub fn echo_operator(scene: &Scene, channels: &ChannelTensor, n: usize) -> Mat<C> {
    let h = channels.matrix(n);
    let vbar = scene.measure();
    let mut b = h.clone();
    for (p, &q) in channels.cells.iter().enumerate() {
        let w = scene.reflectivity(n, q) * vbar;
        for m in 0..b.nrows() {
            b[(m, p)] *= w;
        }
    }
    &b * h.transpose()
}

/// Orthogonal operation: each unit transmits alone with its DFT precoder
/// while every unit (itself included) receives.
pub fn simulate_orthogonal(
    scene: &Scene,
    channels: &ChannelTensor,
    precoders: &Precoders,
    noise_power: f64,
    seed: u64,
) -> Result<ObservationSet> {
    check_plan(scene, channels)?;
    let ops: Vec<Mat<C>> = (0..channels.subcarriers()).map(|n| echo_operator(scene, channels, n)).collect();
    simulate_orthogonal_with(&ops, channels, precoders, noise_power, seed)
}

/// [`simulate_orthogonal`] with precomputed echo operators per subcarrier.
pub fn simulate_orthogonal_with(
    ops: &[Mat<C>],
    channels: &ChannelTensor,
    precoders: &Precoders,
    noise_power: f64,
    seed: u64,
) -> Result<ObservationSet> {
    let units = channels.units();
    if precoders.matrices.len() != units {
        return Err(Error::ShapeMismatch("one precoder per unit required".into()));
    }
    if precoders.subcarriers != ops.len() {
        return Err(invalid("precoder and channel subcarrier counts differ"));
    }
    let mut records = Vec::new();
    for (n, g) in ops.iter().enumerate() {
        for t in 0..units {
            let tr = channels.unit_range(t);
            let x = &precoders.matrices[t];
            if x.nrows() != tr.len() {
                return Err(Error::ShapeMismatch(format!("precoder {t} has {} rows, unit has {}", x.nrows(), tr.len())));
            }
            for r in 0..units {
                let rr = channels.unit_range(r);
                let block = g.submatrix(rr.start, tr.start, rr.len(), tr.len());
                let y = block * x;
                for s in 0..precoders.slots {
                    let w = noise(seed, r, &[t], s, n, rr.len(), noise_power);
                    let col = (0..rr.len()).map(|i| y[(i, s)] + w[i]).collect();
                    records.push(Observation { rx: r, tx: vec![t], slot: s, subcarrier: n, y: col });
                }
            }
        }
    }
    Ok(ObservationSet { noise_power, seed, records })
}

/// Cooperative operation following a transmit plan.
pub fn simulate_cooperative(
    scene: &Scene,
    channels: &ChannelTensor,
    plan: &TransmitPlan,
    noise_power: f64,
    seed: u64,
) -> Result<ObservationSet> {
    check_plan(scene, channels)?;
    if plan.subcarriers != channels.subcarriers() {
        return Err(invalid("plan and channel subcarrier counts differ"));
    }
    let sizes: Vec<usize> = (0..channels.units()).map(|u| channels.unit_range(u).len()).collect();
    plan.validate(&sizes)?;
    let vbar = scene.measure();
    let np = channels.points();
    let mut records = Vec::new();
    for s in 0..plan.slots {
        for n in 0..plan.subcarriers {
            let e = plan.get(s, n);
            // b_p = V̄ ρ_n(p) Σ_t h_t(p)ᵀ x_t
            let mut b = vec![C::new(0.0, 0.0); np];
            for (&t, x) in e.transmitters.iter().zip(&e.signals) {
                let tr = channels.unit_range(t);
                for (p, bp) in b.iter_mut().enumerate() {
                    let mut acc = C::new(0.0, 0.0);
                    for (i, m) in tr.clone().enumerate() {
                        acc += channels.gain(m, p, n) * x[i];
                    }
                    *bp += acc;
                }
            }
            for (p, bp) in b.iter_mut().enumerate() {
                *bp *= scene.reflectivity(n, channels.cells[p]) * vbar;
            }
            for &r in &e.receivers {
                let rr = channels.unit_range(r);
                let w = noise(seed, r, &e.transmitters, s, n, rr.len(), noise_power);
                let y = rr
                    .clone()
                    .enumerate()
                    .map(|(i, m)| (0..np).map(|p| channels.gain(m, p, n) * b[p]).sum::<C>() + w[i])
                    .collect();
                records.push(Observation { rx: r, tx: e.transmitters.clone(), slot: s, subcarrier: n, y });
            }
        }
    }
    Ok(ObservationSet { noise_power, seed, records })
}

/// Monostatic measurements on a planar grid of co-located transceivers.
#[derive(Debug, Clone, PartialEq)]
pub struct MonostaticGrid {
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
    /// Coordinates of node (0, 0).
    pub origin: (f64, f64),
    pub subcarrier: usize,
    /// Row-major samples.
    pub data: Vec<C>,
}

/// One grid per subcarrier of Σ_q ρ·v·cosθ·cosφ/(4πr²)·e^{−j2kr} + w.
pub fn simulate_monostatic(
    scene: &Scene,
    grid: &ArrayArchitecture,
    plan: &SubcarrierPlan,
    noise_power: f64,
    seed: u64,
) -> Result<Vec<MonostaticGrid>> {
    let (rows, cols) = grid.full_shape();
    let ch = assemble_channels_occupied(scene, &grid.units, plan)?;
    let mut out = Vec::with_capacity(plan.len());
    for n in 0..plan.len() {
        let mut data = vec![C::new(0.0, 0.0); rows * cols];
        let mut rng = stream(seed, &[tag::NOISE, u64::MAX, 0, n as u64]);
        for (u, idx) in grid.virtual_index.iter().enumerate() {
            let off = ch.unit_range(u).start;
            for (i, g) in idx.iter().enumerate() {
                let m = off + i;
                let echo: C = (0..ch.points())
                    .map(|p| {
                        let h = ch.gain(m, p, n);
                        scene.reflectivity(n, ch.cells[p]) * h * h
                    })
                    .sum();
                data[g.row * cols + g.col] = echo;
            }
        }
        if noise_power > 0.0 {
            for v in &mut data {
                *v += complex_normal(&mut rng, noise_power);
            }
        }
        out.push(MonostaticGrid { rows, cols, pitch: grid.spacing(), origin: grid.grid_origin(), subcarrier: n, data });
    }
    Ok(out)
}

/// D = Y·Xᴴ for one (receiver, transmitter, subcarrier).
#[derive(Debug, Clone)]
pub struct PairObservation {
    pub rx: usize,
    pub tx: usize,
    pub subcarrier: usize,
    pub d: Mat<C>,
}

/// Collect Y per (rx, tx, n) from single-transmitter records and right-multiply
/// by the transmitter's precoder adjoint.
pub fn extract_pair_observation(observations: &ObservationSet, precoders: &Precoders) -> Result<Vec<PairObservation>> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(usize, usize, usize), Vec<&Observation>> = BTreeMap::new();
    for o in &observations.records {
        if o.tx.len() != 1 {
            return Err(invalid("pair extraction needs single-transmitter records"));
        }
        groups.entry((o.subcarrier, o.rx, o.tx[0])).or_default().push(o);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((n, r, t), recs) in groups {
        let x = precoders.matrices.get(t).ok_or_else(|| invalid(format!("no precoder for unit {t}")))?;
        let slots = x.ncols();
        if recs.len() != slots {
            return Err(Error::ShapeMismatch(format!("pair ({r},{t}) has {} slots, precoder has {slots}", recs.len())));
        }
        let mr = recs[0].y.len();
        let mut y = Mat::<C>::zeros(mr, slots);
        for o in recs {
            if o.slot >= slots || o.y.len() != mr {
                return Err(Error::ShapeMismatch(format!("pair ({r},{t}) record out of shape")));
            }
            for i in 0..mr {
                y[(i, o.slot)] = o.y[i];
            }
        }
        out.push(PairObservation { rx: r, tx: t, subcarrier: n, d: &y * x.adjoint() });
    }
    Ok(out)
}
