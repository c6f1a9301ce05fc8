//! Array architectures, scenes and the derived geometric bounds.
//!
//! Frame convention: planar arrays for range-migration imaging lie in the
//! z = 0 plane facing +z, planar targets sit at depth z > 0. Voxel scenes use
//! an arbitrary frame; outdoor demos put height on z.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{complex_normal, stream, tag};
use crate::units::{wavelength, wavenumber, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn component(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|a| p.component(a) >= self.min.component(a) && p.component(a) <= self.max.component(a))
    }

    /// True iff the open segment (a, b) meets the open interior of the box.
    /// Touching a face, edge or corner does not count.
    pub fn segment_hits_interior(&self, a: Vec3, b: Vec3) -> bool {
        let d = b - a;
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for axis in 0..3 {
            let o = a.component(axis);
            let v = d.component(axis);
            let lo = self.min.component(axis);
            let hi = self.max.component(axis);
            if v == 0.0 {
                if o <= lo || o >= hi {
                    return false;
                }
            } else {
                let (mut ta, mut tb) = ((lo - o) / v, (hi - o) / v);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 >= t1 {
                    return false;
                }
            }
        }
        t0 < t1
    }
}

/// Identifier of a radio unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuId(pub usize);

/// A cell on the enclosing full (virtual) array grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridIndex {
    pub row: usize,
    pub col: usize,
}

/// A radio unit carrying a uniform planar array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioUnit {
    pub id: RuId,
    /// Antenna positions, row-major over `rows × cols`.
    pub positions: Vec<Vec3>,
    pub normal: Vec3,
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
}

impl RadioUnit {
    /// UPA centred at `center`. Columns run along `col_axis`, rows along
    /// `normal × col_axis`.
    pub fn planar(
        id: RuId,
        center: Vec3,
        normal: Vec3,
        col_axis: Vec3,
        rows: usize,
        cols: usize,
        spacing: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("radio unit needs at least one antenna"));
        }
        if !(spacing > 0.0) {
            return Err(invalid("antenna spacing must be positive"));
        }
        let n = normal.normalized();
        // Remove any normal component from the column axis.
        let u = (col_axis - n * col_axis.dot(n)).normalized();
        if !n.is_finite() || !u.is_finite() {
            return Err(invalid("degenerate radio unit orientation"));
        }
        let v = n.cross(u);
        let mut positions = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let du = (c as f64 - (cols as f64 - 1.0) / 2.0) * spacing;
                let dv = (r as f64 - (rows as f64 - 1.0) / 2.0) * spacing;
                positions.push(center + u * du + v * dv);
            }
        }
        Ok(RadioUnit { id, positions, normal: n, rows, cols, spacing })
    }

    pub fn antenna_count(&self) -> usize {
        self.positions.len()
    }

    pub fn center(&self) -> Vec3 {
        let s = self.positions.iter().fold(Vec3::default(), |a, &p| a + p);
        s * (1.0 / self.positions.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchitectureKind {
    Full,
    Boundary,
    DistributedBoundary,
    SarVirtual,
}

impl std::str::FromStr for ArchitectureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ArchitectureKind::Full),
            "boundary" => Ok(ArchitectureKind::Boundary),
            "distributed-boundary" => Ok(ArchitectureKind::DistributedBoundary),
            "sar-virtual" => Ok(ArchitectureKind::SarVirtual),
            other => Err(invalid(format!("unknown architecture `{other}`"))),
        }
    }
}

impl ArchitectureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ArchitectureKind::Full => "full",
            ArchitectureKind::Boundary => "boundary",
            ArchitectureKind::DistributedBoundary => "distributed-boundary",
            ArchitectureKind::SarVirtual => "sar-virtual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureParams {
    pub kind: ArchitectureKind,
    pub full_rows: usize,
    pub full_cols: usize,
    pub spacing: f64,
    /// Boundary strip length M_l.
    pub strip_length: usize,
    /// Boundary strip width M_w.
    pub strip_width: usize,
    /// Fraction τ of each strip removed from its middle.
    pub removal_fraction: f64,
}

impl ArchitectureParams {
    pub fn full(rows: usize, cols: usize, spacing: f64) -> Self {
        ArchitectureParams {
            kind: ArchitectureKind::Full,
            full_rows: rows,
            full_cols: cols,
            spacing,
            strip_length: 0,
            strip_width: 0,
            removal_fraction: 0.0,
        }
    }

    /// Boundary array whose enclosing grid is (M_l + M_w)².
    pub fn boundary(strip_length: usize, strip_width: usize, spacing: f64) -> Self {
        let side = strip_length + strip_width;
        ArchitectureParams {
            kind: ArchitectureKind::Boundary,
            full_rows: side,
            full_cols: side,
            spacing,
            strip_length,
            strip_width,
            removal_fraction: 0.0,
        }
    }

    pub fn distributed(strip_length: usize, strip_width: usize, spacing: f64, tau: f64) -> Self {
        ArchitectureParams {
            kind: ArchitectureKind::DistributedBoundary,
            removal_fraction: tau,
            ..Self::boundary(strip_length, strip_width, spacing)
        }
    }

    pub fn with_kind(self, kind: ArchitectureKind) -> Self {
        ArchitectureParams { kind, ..self }
    }
}

/// Radio units plus their map onto the enclosing virtual full grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayArchitecture {
    pub params: ArchitectureParams,
    pub units: Vec<RadioUnit>,
    /// `virtual_index[u][m]` is the grid cell of antenna `m` of unit `u`.
    pub virtual_index: Vec<Vec<GridIndex>>,
}

/// A rectangular block of grid cells `[r0, r0+rows) × [c0, c0+cols)`.
#[derive(Debug, Clone, Copy)]
struct Block {
    r0: usize,
    c0: usize,
    rows: usize,
    cols: usize,
}

pub fn build_architecture(params: ArchitectureParams) -> Result<ArrayArchitecture> {
    let ArchitectureParams { kind, full_rows: fr, full_cols: fc, spacing, .. } = params;
    if fr == 0 || fc == 0 {
        return Err(Error::InvalidArchitecture("full grid shape must be positive".into()));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::InvalidArchitecture("spacing must be positive".into()));
    }
    let blocks = match kind {
        ArchitectureKind::Full | ArchitectureKind::SarVirtual => {
            vec![Block { r0: 0, c0: 0, rows: fr, cols: fc }]
        }
        ArchitectureKind::Boundary | ArchitectureKind::DistributedBoundary => {
            let (ml, mw) = (params.strip_length, params.strip_width);
            if mw == 0 || ml == 0 {
                return Err(Error::InvalidArchitecture("strip length and width must be positive".into()));
            }
            if 2 * mw >= fr.min(fc) {
                return Err(Error::InvalidArchitecture(format!(
                    "strips overlap: 2·M_w = {} must be below min(full shape) = {}",
                    2 * mw,
                    fr.min(fc)
                )));
            }
            if fr != ml + mw || fc != ml + mw {
                return Err(Error::InvalidArchitecture(format!(
                    "strips of {ml}×{mw} do not tile the boundary of a {fr}×{fc} grid (need {0}×{0})",
                    ml + mw
                )));
            }
            let side = ml + mw;
            // Pinwheel: every strip is exactly M_l × M_w and owns one corner block.
            let strips = [
                (Block { r0: 0, c0: 0, rows: mw, cols: ml }, false),
                (Block { r0: 0, c0: ml, rows: ml, cols: mw }, true),
                (Block { r0: side - mw, c0: mw, rows: mw, cols: ml }, false),
                (Block { r0: mw, c0: 0, rows: ml, cols: mw }, true),
            ];
            if kind == ArchitectureKind::Boundary {
                strips.iter().map(|s| s.0).collect()
            } else {
                let tau = params.removal_fraction;
                if !(tau > 0.0 && tau < 1.0) {
                    return Err(Error::InvalidArchitecture(format!("removal fraction {tau} outside (0, 1)")));
                }
                let removed = (tau * ml as f64).floor() as usize;
                let kept = ml - removed;
                let first = kept / 2;
                let second = kept - first;
                if first == 0 {
                    return Err(Error::InvalidArchitecture("removal leaves an empty strip half".into()));
                }
                let mut out = Vec::with_capacity(8);
                for (b, vertical) in strips {
                    if vertical {
                        out.push(Block { rows: first, ..b });
                        out.push(Block { r0: b.r0 + ml - second, rows: second, ..b });
                    } else {
                        out.push(Block { cols: first, ..b });
                        out.push(Block { c0: b.c0 + ml - second, cols: second, ..b });
                    }
                }
                out
            }
        }
    };

    let mut claimed = vec![false; fr * fc];
    let mut units = Vec::with_capacity(blocks.len());
    let mut virtual_index = Vec::with_capacity(blocks.len());
    for (u, b) in blocks.iter().enumerate() {
        let mut idx = Vec::with_capacity(b.rows * b.cols);
        let mut positions = Vec::with_capacity(b.rows * b.cols);
        for r in b.r0..b.r0 + b.rows {
            for c in b.c0..b.c0 + b.cols {
                let cell = &mut claimed[r * fc + c];
                if *cell {
                    return Err(Error::InvalidArchitecture(format!("cell ({r}, {c}) claimed twice")));
                }
                *cell = true;
                let g = GridIndex { row: r, col: c };
                idx.push(g);
                positions.push(grid_position(fr, fc, spacing, g));
            }
        }
        units.push(RadioUnit {
            id: RuId(u),
            positions,
            normal: Vec3::new(0.0, 0.0, 1.0),
            rows: b.rows,
            cols: b.cols,
            spacing,
        });
        virtual_index.push(idx);
    }
    Ok(ArrayArchitecture { params, units, virtual_index })
}

fn grid_position(rows: usize, cols: usize, spacing: f64, g: GridIndex) -> Vec3 {
    Vec3::new(
        (g.col as f64 - (cols as f64 - 1.0) / 2.0) * spacing,
        (g.row as f64 - (rows as f64 - 1.0) / 2.0) * spacing,
        0.0,
    )
}

impl ArrayArchitecture {
    pub fn kind(&self) -> ArchitectureKind {
        self.params.kind
    }

    pub fn full_shape(&self) -> (usize, usize) {
        (self.params.full_rows, self.params.full_cols)
    }

    pub fn spacing(&self) -> f64 {
        self.params.spacing
    }

    pub fn antenna_count(&self) -> usize {
        self.units.iter().map(|u| u.antenna_count()).sum()
    }

    /// Physical position of a virtual grid node.
    pub fn grid_position(&self, g: GridIndex) -> Vec3 {
        grid_position(self.params.full_rows, self.params.full_cols, self.params.spacing, g)
    }

    /// Coordinate of grid node (0, 0).
    pub fn grid_origin(&self) -> (f64, f64) {
        let p = self.grid_position(GridIndex { row: 0, col: 0 });
        (p.x, p.y)
    }

    /// Enclosing aperture (L_x, L_y) = element count × spacing.
    pub fn aperture(&self) -> (f64, f64) {
        (self.params.full_cols as f64 * self.params.spacing, self.params.full_rows as f64 * self.params.spacing)
    }

    /// Min and max corners over all physical antenna positions.
    pub fn corner_coordinates(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for p in self.units.iter().flat_map(|u| u.positions.iter()) {
            lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        (lo, hi)
    }

    /// Mask over the full grid (row-major) of cells occupied by antennas.
    pub fn occupancy_mask(&self) -> Vec<bool> {
        let (r, c) = self.full_shape();
        let mut m = vec![false; r * c];
        for g in self.virtual_index.iter().flatten() {
            m[g.row * c + g.col] = true;
        }
        m
    }

    pub fn center(&self) -> Vec3 {
        let (lo, hi) = self.corner_coordinates();
        (lo + hi) * 0.5
    }
}

/// Cross-range resolution (δ_x, δ_y) of a MIMO array whose transmit and
/// receive apertures are both the enclosing aperture of `arch`.
pub fn resolution_bound(arch: &ArrayArchitecture, f_c: f64, z: f64) -> Result<(f64, f64)> {
    let (lx, ly) = arch.aperture();
    Ok((
        resolution_from_apertures(lx, lx, f_c, z)?,
        resolution_from_apertures(ly, ly, f_c, z)?,
    ))
}

pub fn resolution_from_apertures(l_tx: f64, l_rx: f64, f_c: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(invalid("distance must be positive"));
    }
    if !(f_c > 0.0) {
        return Err(invalid("carrier frequency must be positive"));
    }
    let l = l_tx + l_rx;
    if !(l > 0.0) {
        return Err(invalid("zero aperture"));
    }
    Ok(SPEED_OF_LIGHT * z / (f_c * l))
}

/// Largest spacing free of spatial aliasing for aperture `l`, target extent
/// `d`, distance `z` and shortest wavelength `lambda_min`.
pub fn aliasing_bound(l: f64, d: f64, z: f64, lambda_min: f64) -> Result<f64> {
    if !(l > 0.0 && d > 0.0 && z > 0.0 && lambda_min > 0.0) {
        return Err(invalid("aliasing bound needs positive arguments"));
    }
    let s = l + d;
    Ok(lambda_min * (s * s / 4.0 + z * z).sqrt() / s)
}

/// OFDM subcarrier layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierPlan {
    count: usize,
    center: f64,
    bandwidth: f64,
}

impl SubcarrierPlan {
    pub fn new(count: usize, center: f64, bandwidth: f64) -> Result<Self> {
        if count == 0 {
            return Err(invalid("at least one subcarrier is required"));
        }
        if !(center > 0.0) || !center.is_finite() {
            return Err(invalid("carrier frequency must be positive"));
        }
        if !(bandwidth >= 0.0) || (count > 1 && bandwidth == 0.0) {
            return Err(invalid("bandwidth must be positive when more than one subcarrier is used"));
        }
        let p = SubcarrierPlan { count, center, bandwidth };
        if p.frequency(0) <= 0.0 {
            return Err(invalid("lowest subcarrier frequency is not positive"));
        }
        Ok(p)
    }

    pub fn single(center: f64) -> Self {
        SubcarrierPlan { count: 1, center, bandwidth: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Frequency of subcarrier `n` (zero-based).
    pub fn frequency(&self, n: usize) -> f64 {
        let nn = self.count as f64;
        self.center + self.bandwidth / nn * (n as f64 - (nn - 1.0) / 2.0)
    }

    pub fn wavenumber(&self, n: usize) -> f64 {
        wavenumber(self.frequency(n))
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.count).map(|n| self.wavenumber(n)).collect()
    }

    /// Shortest wavelength, at the highest subcarrier.
    pub fn lambda_min(&self) -> f64 {
        wavelength(self.frequency(self.count - 1))
    }

    /// Index of the centre subcarrier (lower middle for even counts).
    pub fn center_index(&self) -> usize {
        (self.count - 1) / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SceneKind {
    PlanarTarget,
    VoxelGrid,
}

/// Discretized scene: planar pixel target or voxel grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub kind: SceneKind,
    pub region: Aabb,
    /// (Q_x, Q_y, Q_z); Q_z = 1 for planar targets.
    pub shape: [usize; 3],
    /// Cell sides; the z side of a planar pixel is 0.
    pub cell: Vec3,
    pub occupancy: Vec<bool>,
    /// `reflectivity[n][q]`; a single row applies to every subcarrier.
    pub reflectivity: Vec<Vec<Complex64>>,
    /// Outward face normals shared by every cell.
    pub normals: Vec<Vec3>,
}

const FACE_NORMALS: [Vec3; 6] = [
    Vec3::new(1.0, 0.0, 0.0),
    Vec3::new(-1.0, 0.0, 0.0),
    Vec3::new(0.0, 1.0, 0.0),
    Vec3::new(0.0, -1.0, 0.0),
    Vec3::new(0.0, 0.0, 1.0),
    Vec3::new(0.0, 0.0, -1.0),
];

impl Scene {
    /// Planar pixel target of `nx × ny` pixels with pitch `pitch`, centred
    /// at (cx, cy) on the plane z = depth. Occupancy is row-major over (y, x).
    pub fn planar(nx: usize, ny: usize, pitch: f64, center: (f64, f64), depth: f64, occupancy: Vec<bool>) -> Result<Self> {
        if nx == 0 || ny == 0 || !(pitch > 0.0) {
            return Err(invalid("planar target needs positive dimensions"));
        }
        if !(depth > 0.0) {
            return Err(invalid("planar target depth must be positive"));
        }
        if occupancy.len() != nx * ny {
            return Err(Error::ShapeMismatch(format!("occupancy has {} cells, expected {}", occupancy.len(), nx * ny)));
        }
        let half = Vec3::new(nx as f64 * pitch / 2.0, ny as f64 * pitch / 2.0, 0.0);
        let c = Vec3::new(center.0, center.1, depth);
        let refl = occupancy.iter().map(|&o| if o { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }).collect();
        Ok(Scene {
            kind: SceneKind::PlanarTarget,
            region: Aabb::new(c - half, c + half),
            shape: [nx, ny, 1],
            cell: Vec3::new(pitch, pitch, 0.0),
            occupancy,
            reflectivity: vec![refl],
            // Facing the array, which sits on z = 0 looking towards +z.
            normals: vec![Vec3::new(0.0, 0.0, -1.0)],
        })
    }

    /// Single reflecting pixel centred at `position`.
    pub fn point(position: Vec3, pitch: f64) -> Result<Self> {
        Self::planar(1, 1, pitch, (position.x, position.y), position.z, vec![true])
    }

    /// Voxel grid filling `region` with `shape` cells.
    pub fn voxels(region: Aabb, shape: [usize; 3], occupancy: Vec<bool>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(invalid("voxel grid shape must be positive"));
        }
        let size = region.size();
        if !(size.x > 0.0 && size.y > 0.0 && size.z > 0.0) {
            return Err(invalid("voxel region must have positive extent"));
        }
        let q = shape[0] * shape[1] * shape[2];
        if occupancy.len() != q {
            return Err(Error::ShapeMismatch(format!("occupancy has {} cells, expected {q}", occupancy.len())));
        }
        let refl = occupancy.iter().map(|&o| if o { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }).collect();
        Ok(Scene {
            kind: SceneKind::VoxelGrid,
            region,
            shape,
            cell: Vec3::new(size.x / shape[0] as f64, size.y / shape[1] as f64, size.z / shape[2] as f64),
            occupancy,
            reflectivity: vec![refl],
            normals: FACE_NORMALS.to_vec(),
        })
    }

    pub fn cell_count(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    /// Flat index of cell (i, j, k), x fastest.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.shape[0] * (j + self.shape[1] * k)
    }

    pub fn coords(&self, q: usize) -> (usize, usize, usize) {
        let i = q % self.shape[0];
        let j = (q / self.shape[0]) % self.shape[1];
        let k = q / (self.shape[0] * self.shape[1]);
        (i, j, k)
    }

    pub fn cell_center(&self, q: usize) -> Vec3 {
        let (i, j, k) = self.coords(q);
        let m = self.region.min;
        let z = match self.kind {
            SceneKind::PlanarTarget => m.z,
            SceneKind::VoxelGrid => m.z + (k as f64 + 0.5) * self.cell.z,
        };
        Vec3::new(m.x + (i as f64 + 0.5) * self.cell.x, m.y + (j as f64 + 0.5) * self.cell.y, z)
    }

    pub fn cell_box(&self, q: usize) -> Aabb {
        let c = self.cell_center(q);
        let h = self.cell * 0.5;
        Aabb::new(c - h, c + h)
    }

    /// Discretization measure V̄: pixel area for planar targets, voxel volume
    /// otherwise.
    pub fn measure(&self) -> f64 {
        match self.kind {
            SceneKind::PlanarTarget => self.cell.x * self.cell.y,
            SceneKind::VoxelGrid => self.cell.x * self.cell.y * self.cell.z,
        }
    }

    pub fn occupied(&self) -> Vec<usize> {
        (0..self.cell_count()).filter(|&q| self.occupancy[q]).collect()
    }

    pub fn subcarrier_rows(&self) -> usize {
        self.reflectivity.len()
    }

    /// ρ_n(p_q); a single stored row is shared by all subcarriers.
    pub fn reflectivity(&self, n: usize, q: usize) -> Complex64 {
        let row = if self.reflectivity.len() == 1 { 0 } else { n };
        self.reflectivity[row][q]
    }

    /// Replace reflectivities; rows must vanish on unoccupied cells.
    pub fn with_reflectivity(mut self, rows: Vec<Vec<Complex64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("reflectivity needs at least one subcarrier row"));
        }
        for row in &rows {
            if row.len() != self.cell_count() {
                return Err(Error::ShapeMismatch("reflectivity row length differs from cell count".into()));
            }
            if row.iter().zip(&self.occupancy).any(|(r, &o)| !o && r.norm_sqr() != 0.0) {
                return Err(invalid("reflectivity must be zero on unoccupied cells"));
            }
        }
        self.reflectivity = rows;
        Ok(self)
    }

    /// Reflectivities correlated across subcarriers as a first-order
    /// autoregression: ρ_0 ~ CN(0,1), ρ_n = ψρ_{n−1} + √(1−ψ²)·w_n on every
    /// occupied cell, so that E[ρ_n ρ_m*] = ψ^|n−m|.
    pub fn with_ar1_reflectivity(self, subcarriers: usize, psi: f64, seed: u64) -> Result<Self> {
        if subcarriers == 0 {
            return Err(invalid("at least one subcarrier is required"));
        }
        if !(psi.abs() <= 1.0) {
            return Err(invalid("AR-1 coefficient must lie in [-1, 1]"));
        }
        let q = self.cell_count();
        let innov = (1.0 - psi * psi).sqrt();
        let mut rows = vec![vec![Complex64::new(0.0, 0.0); q]; subcarriers];
        for cell in self.occupied() {
            let mut rng = stream(seed, &[tag::SCENE, cell as u64]);
            let mut v = complex_normal(&mut rng, 1.0);
            rows[0][cell] = v;
            for row in rows.iter_mut().skip(1) {
                v = v * psi + complex_normal(&mut rng, 1.0) * innov;
                row[cell] = v;
            }
        }
        self.with_reflectivity(rows)
    }

    /// Move a planar target to a new depth.
    pub fn with_depth(mut self, depth: f64) -> Result<Self> {
        if self.kind != SceneKind::PlanarTarget || !(depth > 0.0) {
            return Err(invalid("only planar targets at positive depth can be moved"));
        }
        self.region.min.z = depth;
        self.region.max.z = depth;
        Ok(self)
    }

    pub fn depth(&self) -> f64 {
        self.region.min.z
    }

    /// Ground-truth magnitude grid of subcarrier `n` for planar scenes,
    /// row-major over (y, x).
    pub fn magnitude_grid(&self, n: usize) -> Vec<f64> {
        (0..self.cell_count()).map(|q| self.reflectivity(n, q).norm()).collect()
    }
}

/// Siemens star of alternating angular sectors, at default depth 10 m.
pub fn make_siemens_star(diameter: f64, pixel_size: f64, spokes: usize) -> Result<Scene> {
    if !(diameter > 0.0 && pixel_size > 0.0) || spokes == 0 {
        return Err(invalid("siemens star needs positive diameter, pixel size and spoke count"));
    }
    if pixel_size > diameter {
        return Err(invalid("pixel size exceeds star diameter"));
    }
    let n = (diameter / pixel_size).round() as usize;
    let radius = diameter / 2.0;
    let sector = std::f64::consts::PI / spokes as f64;
    let mut occ = vec![false; n * n];
    for j in 0..n {
        for i in 0..n {
            let x = (i as f64 + 0.5 - n as f64 / 2.0) * pixel_size;
            let y = (j as f64 + 0.5 - n as f64 / 2.0) * pixel_size;
            let r = x.hypot(y);
            let th = y.atan2(x).rem_euclid(2.0 * std::f64::consts::PI);
            occ[j * n + i] = r <= radius && ((th / sector).floor() as usize) % 2 == 0;
        }
    }
    Scene::planar(n, n, pixel_size, (0.0, 0.0), 10.0, occ)
}

/// Rectangle `w × h` with a centred rectangular hole inset by a quarter of the
/// shorter side, at default depth 10 m.
pub fn make_hollow_rectangle(w: f64, h: f64, pixel_size: f64) -> Result<Scene> {
    if !(w > 0.0 && h > 0.0 && pixel_size > 0.0) {
        return Err(invalid("rectangle needs positive dimensions"));
    }
    if pixel_size > w.min(h) {
        return Err(invalid("pixel size exceeds rectangle side"));
    }
    let nx = (w / pixel_size).round() as usize;
    let ny = (h / pixel_size).round() as usize;
    let t = nx.min(ny) / 4;
    let occ = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| !(i >= t && i < nx - t && j >= t && j < ny - t)))
        .collect();
    Scene::planar(nx, ny, pixel_size, (0.0, 0.0), 10.0, occ)
}

/// Street-corner demo: a thin wall across the middle, a pole and a low box on
/// the ground (z is height). Placement is in fractions of the region, so any
/// grid shape works; the wall hides part of the ground from each side.
pub fn make_voxel_demo(region: Aabb, shape: [usize; 3]) -> Result<Scene> {
    let parts: [([f64; 2], [f64; 2], [f64; 2]); 3] = [
        ([0.4, 0.6], [0.2, 0.8], [0.0, 0.6]),
        ([0.8, 1.0], [0.8, 1.0], [0.0, 0.8]),
        ([0.0, 0.4], [0.6, 1.0], [0.0, 0.2]),
    ];
    let q = shape.iter().product::<usize>();
    let mut occ = vec![false; q];
    let inside = |f: f64, r: [f64; 2]| f >= r[0] && f < r[1];
    for k in 0..shape[2] {
        for j in 0..shape[1] {
            for i in 0..shape[0] {
                let fx = (i as f64 + 0.5) / shape[0] as f64;
                let fy = (j as f64 + 0.5) / shape[1] as f64;
                let fz = (k as f64 + 0.5) / shape[2] as f64;
                if parts.iter().any(|p| inside(fx, p.0) && inside(fy, p.1) && inside(fz, p.2)) {
                    occ[i + shape[0] * (j + shape[1] * k)] = true;
                }
            }
        }
    }
    Scene::voxels(region, shape, occ)
}

/// Four 8×8-style radio units on the top corners of `region`, tilted down by
/// `downtilt` radians towards the region's vertical axis.
pub fn corner_radio_units(region: Aabb, rows: usize, cols: usize, spacing: f64, downtilt: f64) -> Result<Vec<RadioUnit>> {
    let top = region.max.z;
    let mid = (region.min + region.max) * 0.5;
    let corners = [
        Vec3::new(region.min.x, region.min.y, top),
        Vec3::new(region.max.x, region.min.y, top),
        Vec3::new(region.max.x, region.max.y, top),
        Vec3::new(region.min.x, region.max.y, top),
    ];
    corners
        .iter()
        .enumerate()
        .map(|(u, &c)| {
            let h = Vec3::new(mid.x - c.x, mid.y - c.y, 0.0).normalized();
            let n = h * downtilt.cos() + Vec3::new(0.0, 0.0, -downtilt.sin());
            let axis = Vec3::new(0.0, 0.0, 1.0).cross(h);
            RadioUnit::planar(RuId(u), c, n, axis, rows, cols, spacing)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn full_architecture_is_identity_map() {
        let a = build_architecture(ArchitectureParams::full(4, 4, 0.015)).unwrap();
        assert_eq!(a.units.len(), 1);
        assert_eq!(a.antenna_count(), 16);
        let cells: HashSet<_> = a.virtual_index[0].iter().copied().collect();
        assert_eq!(cells.len(), 16);
    }

    #[test]
    fn boundary_strips_are_60_by_4() {
        let a = build_architecture(ArchitectureParams::boundary(60, 4, 0.06)).unwrap();
        assert_eq!(a.units.len(), 4);
        for u in &a.units {
            assert_eq!(u.rows * u.cols, 240);
            assert!((u.rows, u.cols) == (4, 60) || (u.rows, u.cols) == (60, 4));
        }
        assert_eq!(a.antenna_count(), 960);
        let (lx, ly) = a.aperture();
        assert!((lx - 3.84).abs() < 1e-12 && (ly - 3.84).abs() < 1e-12);
        // Every boundary-band cell is claimed exactly once.
        let mask = a.occupancy_mask();
        for r in 0..64 {
            for c in 0..64 {
                let band = !(4..60).contains(&r) || !(4..60).contains(&c);
                assert_eq!(mask[r * 64 + c], band, "cell ({r},{c})");
            }
        }
    }

    #[test]
    fn distributed_boundary_has_eight_20x4_strips() {
        let a = build_architecture(ArchitectureParams::distributed(60, 4, 0.06, 1.0 / 3.0)).unwrap();
        assert_eq!(a.units.len(), 8);
        for u in &a.units {
            assert_eq!(u.rows * u.cols, 80);
        }
        assert_eq!(a.antenna_count(), 960 - 4 * 20 * 4);
    }

    #[test]
    fn apertures_match_across_kinds() {
        let full = build_architecture(ArchitectureParams::boundary(60, 4, 0.06).with_kind(ArchitectureKind::Full)).unwrap();
        let b = build_architecture(ArchitectureParams::boundary(60, 4, 0.06)).unwrap();
        let d = build_architecture(ArchitectureParams::distributed(60, 4, 0.06, 1.0 / 3.0)).unwrap();
        assert_eq!(full.corner_coordinates(), b.corner_coordinates());
        assert_eq!(full.corner_coordinates(), d.corner_coordinates());
        assert_eq!(full.aperture(), d.aperture());
    }

    #[test]
    fn overlapping_strips_rejected() {
        let mut p = ArchitectureParams::boundary(4, 4, 0.06);
        assert!(matches!(build_architecture(p), Err(Error::InvalidArchitecture(_))));
        p = ArchitectureParams::boundary(60, 4, 0.06);
        p.full_rows = 70;
        assert!(matches!(build_architecture(p), Err(Error::InvalidArchitecture(_))));
    }

    #[test]
    fn resolution_example() {
        let d = resolution_from_apertures(3.84, 3.84, 10e9, 10.0).unwrap();
        assert!((d - 3e8 * 10.0 / (1e10 * 7.68)).abs() < 1e-15);
        assert!((d - 0.0391).abs() < 1e-4);
        assert!(resolution_from_apertures(0.0, 0.0, 10e9, 10.0).is_err());
    }

    #[test]
    fn aliasing_example() {
        let d = aliasing_bound(3.84, 0.96, 10.0, 0.03).unwrap();
        assert!((d - 0.03 * (5.76f64 + 100.0).sqrt() / 4.8).abs() < 1e-15);
        assert!((d - 0.0643).abs() < 1e-4);
    }

    #[test]
    fn subcarrier_layout() {
        let p = SubcarrierPlan::new(4, 10e9, 8e6).unwrap();
        let f: Vec<f64> = (0..4).map(|n| p.frequency(n)).collect();
        assert_eq!(f[1] - f[0], 2e6);
        assert!(((f[0] + f[3]) / 2.0 - 10e9).abs() < 1e-9 * 10e9);
        assert!(SubcarrierPlan::new(0, 10e9, 0.0).is_err());
    }

    #[test]
    fn star_and_rectangle_shapes() {
        let s = make_siemens_star(0.8, 0.01, 12).unwrap();
        assert_eq!(s.shape, [80, 80, 1]);
        let frac = s.occupied().len() as f64 / 6400.0;
        // About half of the inscribed disk.
        assert!((frac - std::f64::consts::PI / 8.0).abs() < 0.02, "{frac}");
        let r = make_hollow_rectangle(1.28, 0.64, 0.01).unwrap();
        assert_eq!(r.shape, [128, 64, 1]);
        assert!(make_siemens_star(0.01, 0.02, 4).is_err());
    }

    #[test]
    fn empty_scene_has_zero_reflectivity() {
        let s = Scene::planar(3, 3, 0.1, (0.0, 0.0), 5.0, vec![false; 9]).unwrap();
        assert!((0..9).all(|q| s.reflectivity(0, q) == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn cell_centers_inside_region() {
        let region = Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(10.0, 10.0, 10.0));
        let s = make_voxel_demo(region, [5, 5, 5]).unwrap();
        assert_eq!(s.occupied().len(), 17);
        assert!((0..s.cell_count()).all(|q| region.contains(s.cell_center(q))));
        assert_eq!(s.measure(), 8.0);
    }

    #[test]
    fn segment_box_open_test() {
        let b = Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0));
        assert!(b.segment_hits_interior(Vec3::new(-1.0, 0.5, 0.5), Vec3::new(2.0, 0.5, 0.5)));
        // Grazing along a face.
        assert!(!b.segment_hits_interior(Vec3::new(-1.0, 1.0, 0.5), Vec3::new(2.0, 1.0, 0.5)));
        // Stops short.
        assert!(!b.segment_hits_interior(Vec3::new(-1.0, 0.5, 0.5), Vec3::new(0.0, 0.5, 0.5)));
    }

    #[test]
    fn corner_units_face_the_region() {
        let region = Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(10.0, 10.0, 10.0));
        let units = corner_radio_units(region, 8, 8, 0.015, std::f64::consts::FRAC_PI_4).unwrap();
        for u in &units {
            assert!((u.normal.norm() - 1.0).abs() < 1e-12);
            let to_mid = (Vec3::new(5.0, 5.0, 5.0) - u.center()).normalized();
            assert!(u.normal.dot(to_mid) > 0.9);
            assert_eq!(u.antenna_count(), 64);
        }
    }
}
