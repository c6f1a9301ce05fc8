//! Non-isotropic near-field line-of-sight channel with occlusion.

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{RadioUnit, Scene, SceneKind, SubcarrierPlan, Vec3};

const INV_SQRT_4PI: f64 = 0.282_094_791_773_878_14;

/// Visibility bit per (antenna, cell), antenna-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMap {
    pub antennas: usize,
    pub cells: usize,
    pub bits: Vec<bool>,
}

impl VisibilityMap {
    pub fn get(&self, m: usize, q: usize) -> bool {
        self.bits[m * self.cells + q]
    }
}

/// Antenna positions of several units, concatenated in unit order.
pub fn stacked_positions(units: &[RadioUnit]) -> Vec<(Vec3, Vec3)> {
    units.iter().flat_map(|u| u.positions.iter().map(move |&p| (p, u.normal))).collect()
}

fn visible_from(scene: &Scene, occupied: &[usize], a: Vec3, q: usize) -> bool {
    let target = scene.cell_center(q);
    occupied.iter().all(|&o| o == q || !scene.cell_box(o).segment_hits_interior(a, target))
}

/// Bit (m, q) is set iff the open segment from antenna m to the centre of
/// cell q crosses no occupied cell other than q.
pub fn compute_visibility(scene: &Scene, units: &[RadioUnit]) -> VisibilityMap {
    let cells: Vec<usize> = (0..scene.cell_count()).collect();
    visibility_for(scene, units, &cells)
}

/// Visibility restricted to a list of cells; column p refers to `cells[p]`.
pub fn visibility_for(scene: &Scene, units: &[RadioUnit], cells: &[usize]) -> VisibilityMap {
    let ants = stacked_positions(units);
    let n = cells.len();
    let bits = match scene.kind {
        // Zero-thickness pixels on one plane cannot block a segment that
        // starts off that plane.
        SceneKind::PlanarTarget => vec![true; ants.len() * n],
        SceneKind::VoxelGrid => {
            let occupied = scene.occupied();
            ants.par_iter()
                .flat_map_iter(|&(a, _)| {
                    let occ = &occupied;
                    cells.iter().map(move |&q| visible_from(scene, occ, a, q))
                })
                .collect()
        }
    };
    VisibilityMap { antennas: ants.len(), cells: n, bits }
}

/// Cosine between the array normal and the direction to the point, and the
/// best face-normal cosine towards the antenna, both unclamped.
fn projections(antenna: Vec3, normal: Vec3, point: Vec3, point_normals: &[Vec3]) -> (f64, f64, f64) {
    let d = point - antenna;
    let r = d.norm();
    let cos_theta = d.dot(normal) / r;
    let cos_phi = point_normals.iter().map(|n| -d.dot(*n) / r).fold(f64::NEG_INFINITY, f64::max);
    (r, cos_theta, cos_phi)
}

/// Single channel coefficient between an antenna and a scene point.
pub fn channel_element(
    antenna_pos: Vec3,
    unit_normal: Vec3,
    point: Vec3,
    point_normals: &[Vec3],
    k: f64,
    visible: bool,
) -> Result<Complex64> {
    if ((unit_normal.norm() - 1.0).abs()) > 1e-9 {
        return Err(invalid("array normal must be a unit vector"));
    }
    if !(k > 0.0) {
        return Err(invalid("wavenumber must be positive"));
    }
    if point_normals.is_empty() {
        return Err(invalid("scene point needs at least one normal"));
    }
    let (r, ct, cp) = projections(antenna_pos, unit_normal, point, point_normals);
    if r == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    if !visible {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let amp = INV_SQRT_4PI / r * ct.max(0.0).sqrt() * cp.max(0.0).sqrt();
    Ok(Complex64::from_polar(amp, -k * r))
}

/// Channel coefficients for every (antenna, cell, subcarrier), kept factored.
///
/// The same coefficient serves the transmit and receive direction.
#[derive(Debug, Clone)]
pub struct ChannelTensor {
    /// Scene cell of each column.
    pub cells: Vec<usize>,
    /// Antenna offsets per unit; unit `u` owns `unit_offsets[u]..unit_offsets[u+1]`.
    pub unit_offsets: Vec<usize>,
    pub wavenumbers: Vec<f64>,
    pub visibility: VisibilityMap,
    /// Distances r, antenna-major.
    pub distance: Vec<f64>,
    /// Clamped cos θ (array side).
    pub cos_theta: Vec<f64>,
    /// Clamped cos φ* (scene side).
    pub cos_phi: Vec<f64>,
}

impl ChannelTensor {
    pub fn antennas(&self) -> usize {
        *self.unit_offsets.last().unwrap_or(&0)
    }

    pub fn points(&self) -> usize {
        self.cells.len()
    }

    pub fn subcarriers(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn unit_range(&self, u: usize) -> std::ops::Range<usize> {
        self.unit_offsets[u]..self.unit_offsets[u + 1]
    }

    pub fn units(&self) -> usize {
        self.unit_offsets.len() - 1
    }

    fn at(&self, m: usize, p: usize) -> usize {
        m * self.cells.len() + p
    }

    pub fn pathloss(&self, m: usize, p: usize) -> f64 {
        INV_SQRT_4PI / self.distance[self.at(m, p)]
    }

    /// |gain| = v · pathloss · √cosθ · √cosφ.
    pub fn magnitude(&self, m: usize, p: usize) -> f64 {
        let i = self.at(m, p);
        if !self.visibility.bits[i] {
            return 0.0;
        }
        INV_SQRT_4PI / self.distance[i] * self.cos_theta[i].sqrt() * self.cos_phi[i].sqrt()
    }

    pub fn phase(&self, m: usize, p: usize, n: usize) -> Complex64 {
        Complex64::from_polar(1.0, -self.wavenumbers[n] * self.distance[self.at(m, p)])
    }

    pub fn gain(&self, m: usize, p: usize, n: usize) -> Complex64 {
        self.phase(m, p, n) * self.magnitude(m, p)
    }

    /// Gains of unit `u` on subcarrier `n` as an (antennas × points) matrix.
    pub fn unit_matrix(&self, u: usize, n: usize) -> Mat<Complex64> {
        let r = self.unit_range(u);
        let off = r.start;
        Mat::from_fn(r.len(), self.points(), |i, p| self.gain(off + i, p, n))
    }

    /// Gains of all antennas on subcarrier `n`.
    pub fn matrix(&self, n: usize) -> Mat<Complex64> {
        Mat::from_fn(self.antennas(), self.points(), |m, p| self.gain(m, p, n))
    }
}

/// Channels to every cell of the scene.
pub fn assemble_channels(scene: &Scene, units: &[RadioUnit], plan: &SubcarrierPlan) -> Result<ChannelTensor> {
    let cells: Vec<usize> = (0..scene.cell_count()).collect();
    assemble_channels_for(scene, units, plan, &cells)
}

/// Channels to the occupied cells only (enough to synthesize echoes).
pub fn assemble_channels_occupied(scene: &Scene, units: &[RadioUnit], plan: &SubcarrierPlan) -> Result<ChannelTensor> {
    assemble_channels_for(scene, units, plan, &scene.occupied())
}

pub fn assemble_channels_for(
    scene: &Scene,
    units: &[RadioUnit],
    plan: &SubcarrierPlan,
    cells: &[usize],
) -> Result<ChannelTensor> {
    let mut unit_offsets = vec![0];
    for u in units {
        unit_offsets.push(unit_offsets.last().unwrap() + u.antenna_count());
    }
    let ants = stacked_positions(units);
    let visibility = visibility_for(scene, units, cells);
    let centers: Vec<Vec3> = cells.iter().map(|&q| scene.cell_center(q)).collect();
    let factors: Vec<(f64, f64, f64)> = ants
        .par_iter()
        .flat_map_iter(|&(a, n)| centers.iter().map(move |&p| projections(a, n, p, &scene.normals)))
        .collect();
    let mut distance = Vec::with_capacity(factors.len());
    let mut cos_theta = Vec::with_capacity(factors.len());
    let mut cos_phi = Vec::with_capacity(factors.len());
    for (r, ct, cp) in factors {
        if r == 0.0 {
            return Err(Error::CoincidentPositions);
        }
        distance.push(r);
        cos_theta.push(ct.clamp(0.0, 1.0));
        cos_phi.push(cp.clamp(0.0, 1.0));
    }
    Ok(ChannelTensor {
        cells: cells.to_vec(),
        unit_offsets,
        wavenumbers: plan.wavenumbers(),
        visibility,
        distance,
        cos_theta,
        cos_phi,
    })
}

/// √(cosθ·cosφ) from the centre of `unit` to every cell, zero where the
/// centre cannot see the cell.
pub fn projected_strength(scene: &Scene, unit: &RadioUnit) -> Vec<f64> {
    let c = unit.center();
    let occupied = scene.occupied();
    (0..scene.cell_count())
        .map(|q| {
            let (_, ct, cp) = projections(c, unit.normal, scene.cell_center(q), &scene.normals);
            let vis = scene.kind == SceneKind::PlanarTarget || visible_from(scene, &occupied, c, q);
            if vis {
                (ct.max(0.0) * cp.max(0.0)).sqrt()
            } else {
                0.0
            }
        })
        .collect()
}
