//! Run configuration: a TOML document with unit-suffixed quantities.
//!
//! Every quantity is converted to SI (and dBm to watts) once, here. Parsing
//! collects every violation before failing, and unknown keys are violations.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::geometry::{ArchitectureKind, ArchitectureParams, SubcarrierPlan};
use crate::rma::CoarrayWeighting;
use crate::sbl::{CorrelationUpdate, PosteriorForm, SblOptions, DEFAULT_ISTA_LAMBDA};
use crate::units::{Angle, Frequency, Length, Power};

/// Voxel reflectivity model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reflectivity {
    /// ρ = 1 on every occupied voxel and subcarrier.
    Unit,
    /// First-order autoregression across subcarriers.
    Ar1 { psi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneConfig {
    SiemensStar { diameter: Length, spokes: usize, pixel: Length },
    HollowRectangle { width: Length, height: Length, pixel: Length },
    Point { x: Length, y: Length, pixel: Length },
    /// Cube `[0, extent]³` split into `grid` cells holding the street demo.
    VoxelDemo { extent: Length, grid: [usize; 3], reflectivity: Reflectivity },
    /// `active` voxels drawn per seed among those some transmit/receive pair sees.
    RandomVoxels { extent: Length, grid: [usize; 3], active: usize, reflectivity: Reflectivity },
}

impl SceneConfig {
    pub fn is_voxel(&self) -> bool {
        matches!(self, SceneConfig::VoxelDemo { .. } | SceneConfig::RandomVoxels { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SceneConfig::SiemensStar { .. } => "siemens-star",
            SceneConfig::HollowRectangle { .. } => "hollow-rectangle",
            SceneConfig::Point { .. } => "point",
            SceneConfig::VoxelDemo { .. } => "voxel-demo",
            SceneConfig::RandomVoxels { .. } => "random-voxels",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArraysConfig {
    /// A single planar array on z = 0 with a virtual full grid.
    Planar(ArchitectureParams),
    /// One UPA on each top corner of the voxel region.
    CornerUnits { rows: usize, cols: usize, spacing: Length, downtilt: Angle },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubcarrierConfig {
    pub carrier: Frequency,
    pub count: usize,
    pub spacing: Frequency,
}

impl SubcarrierConfig {
    pub fn plan(&self) -> Result<SubcarrierPlan> {
        if self.count == 1 {
            Ok(SubcarrierPlan::single(self.carrier.0))
        } else {
            SubcarrierPlan::new(self.count, self.carrier.0, self.spacing.0 * self.count as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// Every unit transmits alone with its DFT precoder.
    Orthogonal,
    /// Units take turns receiving while the others transmit random pilots.
    RoundRobin,
    /// One unit always receives.
    SingleView { receiver: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    /// Slots S; for the orthogonal schedule `None` means the largest unit size.
    pub slots: Option<usize>,
    pub noise: Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Rma,
    Sbl,
    Ls,
    Omp,
    Ista,
    Lasso,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Rma => "rma",
            SolverKind::Sbl => "sbl",
            SolverKind::Ls => "ls",
            SolverKind::Omp => "omp",
            SolverKind::Ista => "ista",
            SolverKind::Lasso => "lasso",
        }
    }

    pub fn is_voxel(&self) -> bool {
        *self != SolverKind::Rma
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        enum_from_str(s).ok_or_else(|| Error::InvalidArgument(format!("unknown solver '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub name: SolverKind,
    /// ISTA/LASSO weight relative to ‖Φᴴy‖∞.
    pub lambda: f64,
    /// OMP sparsity; `None` uses the true occupied count.
    pub k: Option<usize>,
    pub max_iters: usize,
    pub eps: f64,
    pub ista_iters: usize,
    pub correlation: CorrelationUpdate,
    pub form: PosteriorForm,
    pub weighting: CoarrayWeighting,
}

impl SolverConfig {
    pub fn sbl_options(&self) -> SblOptions {
        SblOptions { max_iters: self.max_iters, tol: self.eps, form: self.form, correlation: self.correlation }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub run_id: String,
    pub seeds: Vec<u64>,
    pub powers: Vec<Power>,
    /// Target depths z for planar scenes.
    pub depths: Vec<Length>,
    pub solvers: Vec<SolverKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scene: SceneConfig,
    pub arrays: ArraysConfig,
    pub subcarriers: SubcarrierConfig,
    pub schedule: ScheduleConfig,
    pub solver: SolverConfig,
    pub experiment: ExperimentConfig,
}

fn enum_from_str<T: DeserializeOwned>(s: &str) -> Option<T> {
    Value::String(s.to_string()).try_into().ok()
}

fn enum_to_str<T: Serialize>(v: &T) -> String {
    match Value::try_from(v) {
        Ok(Value::String(s)) => s,
        _ => unreachable!("unit variants serialize as strings"),
    }
}

/// Walks a table, records every violation and tracks which keys were read.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    seen: Vec<&'static str>,
}

struct Checker {
    errors: Vec<String>,
}

impl Checker {
    fn section<'a>(&mut self, root: &'a Table, name: &'static str) -> Section<'a> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.errors.push(format!("{name}: expected a table"));
                None
            }
        };
        Section { name, table, seen: Vec::new() }
    }

    fn finish(&mut self, s: Section<'_>) {
        if let Some(t) = s.table {
            for k in t.keys() {
                if !s.seen.contains(&k.as_str()) {
                    self.errors.push(format!("{}.{k}: unknown key", s.name));
                }
            }
        }
    }

    fn raw<'a>(&mut self, s: &mut Section<'a>, key: &'static str) -> Option<&'a Value> {
        s.seen.push(key);
        s.table.and_then(|t| t.get(key))
    }

    fn quantity<T: std::str::FromStr<Err = String>>(&mut self, s: &mut Section<'_>, key: &'static str, default: T) -> T {
        match self.raw(s, key) {
            None => default,
            Some(Value::String(text)) => text.parse().unwrap_or_else(|e| {
                self.errors.push(format!("{}.{key}: {e}", s.name));
                default
            }),
            Some(_) => {
                self.errors.push(format!("{}.{key}: expected a quoted quantity with a unit", s.name));
                default
            }
        }
    }

    fn positive_length(&mut self, s: &mut Section<'_>, key: &'static str, default: f64) -> Length {
        let v = self.quantity(s, key, Length(default));
        if !(v.0 > 0.0) {
            self.errors.push(format!("{}.{key}: must be positive, got {v}", s.name));
        }
        v
    }

    fn float(&mut self, s: &mut Section<'_>, key: &'static str, default: f64) -> f64 {
        match self.raw(s, key) {
            None => default,
            Some(Value::Float(v)) => *v,
            Some(Value::Integer(v)) => *v as f64,
            Some(_) => {
                self.errors.push(format!("{}.{key}: expected a number", s.name));
                default
            }
        }
    }

    fn count(&mut self, s: &mut Section<'_>, key: &'static str, default: Option<usize>, min: usize) -> Option<usize> {
        match self.raw(s, key) {
            None => default,
            Some(Value::Integer(v)) if *v >= min as i64 => Some(*v as usize),
            Some(Value::Integer(v)) => {
                self.errors.push(format!("{}.{key}: must be at least {min}, got {v}", s.name));
                default
            }
            Some(_) => {
                self.errors.push(format!("{}.{key}: expected an integer", s.name));
                default
            }
        }
    }

    fn string(&mut self, s: &mut Section<'_>, key: &'static str, default: &str) -> String {
        match self.raw(s, key) {
            None => default.to_string(),
            Some(Value::String(v)) => v.clone(),
            Some(_) => {
                self.errors.push(format!("{}.{key}: expected a string", s.name));
                default.to_string()
            }
        }
    }

    fn choice<T: DeserializeOwned>(&mut self, s: &mut Section<'_>, key: &'static str, default: T, allowed: &str) -> T {
        let Some(v) = self.raw(s, key) else { return default };
        match v.as_str().and_then(enum_from_str) {
            Some(t) => t,
            None => {
                self.errors.push(format!("{}.{key}: expected one of {allowed}, got {v}", s.name));
                default
            }
        }
    }

    fn list<T>(&mut self, s: &mut Section<'_>, key: &'static str, mut item: impl FnMut(&Value) -> std::result::Result<T, String>) -> Option<Vec<T>> {
        let v = self.raw(s, key)?;
        let Value::Array(a) = v else {
            self.errors.push(format!("{}.{key}: expected an array", s.name));
            return None;
        };
        if a.is_empty() {
            self.errors.push(format!("{}.{key}: must not be empty", s.name));
            return None;
        }
        let mut out = Vec::with_capacity(a.len());
        for (i, x) in a.iter().enumerate() {
            match item(x) {
                Ok(t) => out.push(t),
                Err(e) => self.errors.push(format!("{}.{key}[{i}]: {e}", s.name)),
            }
        }
        (out.len() == a.len()).then_some(out)
    }

    fn grid(&mut self, s: &mut Section<'_>, key: &'static str, default: [usize; 3]) -> [usize; 3] {
        let g = self.list(s, key, |v| match v {
            Value::Integer(i) if *i > 0 => Ok(*i as usize),
            _ => Err(format!("expected a positive integer, got {v}")),
        });
        match g {
            Some(g) if g.len() == 3 => [g[0], g[1], g[2]],
            Some(g) => {
                self.errors.push(format!("{}.{key}: expected three cell counts, got {}", s.name, g.len()));
                default
            }
            None => default,
        }
    }
}

fn quantity_item<T: std::str::FromStr<Err = String>>(v: &Value) -> std::result::Result<T, String> {
    v.as_str().ok_or_else(|| format!("expected a quoted quantity, got {v}"))?.parse()
}

const SCENE_KINDS: &str = "siemens-star, hollow-rectangle, point, voxel-demo, random-voxels";

fn parse_scene(c: &mut Checker, root: &Table) -> SceneConfig {
    let mut s = c.section(root, "scene");
    let kind = c.string(&mut s, "kind", "siemens-star");
    let reflectivity = |c: &mut Checker, s: &mut Section<'_>| match c.string(s, "reflectivity", "unit").as_str() {
        "unit" => Reflectivity::Unit,
        "ar1" => {
            let psi = c.float(s, "psi", 0.9);
            if !(psi.abs() <= 1.0) {
                c.errors.push(format!("scene.psi: must lie in [-1, 1], got {psi}"));
            }
            Reflectivity::Ar1 { psi }
        }
        other => {
            c.errors.push(format!("scene.reflectivity: expected unit or ar1, got '{other}'"));
            Reflectivity::Unit
        }
    };
    let scene = match kind.as_str() {
        "siemens-star" => SceneConfig::SiemensStar {
            diameter: c.positive_length(&mut s, "diameter", 0.8),
            spokes: c.count(&mut s, "spokes", Some(8), 1).unwrap_or(8),
            pixel: c.positive_length(&mut s, "pixel", 0.01),
        },
        "hollow-rectangle" => SceneConfig::HollowRectangle {
            width: c.positive_length(&mut s, "width", 1.28),
            height: c.positive_length(&mut s, "height", 0.64),
            pixel: c.positive_length(&mut s, "pixel", 0.01),
        },
        "point" => SceneConfig::Point {
            x: c.quantity(&mut s, "x", Length(0.0)),
            y: c.quantity(&mut s, "y", Length(0.0)),
            pixel: c.positive_length(&mut s, "pixel", 0.01),
        },
        "voxel-demo" => SceneConfig::VoxelDemo {
            extent: c.positive_length(&mut s, "extent", 10.0),
            grid: c.grid(&mut s, "grid", [10, 10, 10]),
            reflectivity: reflectivity(c, &mut s),
        },
        "random-voxels" => {
            let extent = c.positive_length(&mut s, "extent", 10.0);
            let grid = c.grid(&mut s, "grid", [5, 5, 5]);
            let active = c.count(&mut s, "active", Some(8), 1).unwrap_or(8);
            if active > grid.iter().product() {
                c.errors.push(format!("scene.active: {active} exceeds the {} cells of the grid", grid.iter().product::<usize>()));
            }
            SceneConfig::RandomVoxels { extent, grid, active, reflectivity: reflectivity(c, &mut s) }
        }
        other => {
            c.errors.push(format!("scene.kind: expected one of {SCENE_KINDS}, got '{other}'"));
            // Mark every key as read so that the kind error is the only one.
            s.seen.extend(["diameter", "spokes", "pixel", "width", "height", "x", "y", "extent", "grid", "active", "reflectivity", "psi"]);
            SceneConfig::SiemensStar { diameter: Length(0.8), spokes: 8, pixel: Length(0.01) }
        }
    };
    c.finish(s);
    scene
}

fn parse_arrays(c: &mut Checker, root: &Table) -> ArraysConfig {
    let mut s = c.section(root, "arrays");
    let kind = c.string(&mut s, "kind", "boundary");
    let arrays = match kind.as_str() {
        "corner-units" => {
            let rows = c.count(&mut s, "rows", Some(8), 1).unwrap_or(8);
            let cols = c.count(&mut s, "cols", Some(8), 1).unwrap_or(8);
            let spacing = c.positive_length(&mut s, "spacing", 0.015);
            let downtilt = c.quantity(&mut s, "downtilt", Angle(std::f64::consts::FRAC_PI_4));
            if !(downtilt.0 >= 0.0 && downtilt.0 < std::f64::consts::FRAC_PI_2) {
                c.errors.push(format!("arrays.downtilt: must lie in [0, 90) deg, got {downtilt}"));
            }
            ArraysConfig::CornerUnits { rows, cols, spacing, downtilt }
        }
        k => {
            let kind: ArchitectureKind = k.parse().unwrap_or_else(|_| {
                c.errors.push(format!(
                    "arrays.kind: expected one of full, boundary, distributed-boundary, sar-virtual, corner-units, got '{k}'"
                ));
                ArchitectureKind::Boundary
            });
            let spacing = c.positive_length(&mut s, "spacing", 0.06).0;
            let params = match kind {
                ArchitectureKind::Full | ArchitectureKind::SarVirtual => {
                    let rows = c.count(&mut s, "rows", Some(64), 1).unwrap_or(64);
                    let cols = c.count(&mut s, "cols", Some(64), 1).unwrap_or(64);
                    ArchitectureParams::full(rows, cols, spacing).with_kind(kind)
                }
                ArchitectureKind::Boundary | ArchitectureKind::DistributedBoundary => {
                    let ml = c.count(&mut s, "strip_length", Some(60), 1).unwrap_or(60);
                    let mw = c.count(&mut s, "strip_width", Some(4), 1).unwrap_or(4);
                    if kind == ArchitectureKind::Boundary {
                        ArchitectureParams::boundary(ml, mw, spacing)
                    } else {
                        let tau = c.float(&mut s, "tau", 1.0 / 3.0);
                        if !(tau > 0.0 && tau < 1.0) {
                            c.errors.push(format!("arrays.tau: must lie in (0, 1), got {tau}"));
                        }
                        ArchitectureParams::distributed(ml, mw, spacing, tau)
                    }
                }
            };
            ArraysConfig::Planar(params)
        }
    };
    c.finish(s);
    arrays
}

fn parse_subcarriers(c: &mut Checker, root: &Table) -> SubcarrierConfig {
    let mut s = c.section(root, "subcarriers");
    let carrier = c.quantity(&mut s, "carrier", Frequency(10e9));
    let count = c.count(&mut s, "count", Some(1), 1).unwrap_or(1);
    let spacing = c.quantity(&mut s, "spacing", Frequency(2e6));
    if !(carrier.0 > 0.0) {
        c.errors.push(format!("subcarriers.carrier: must be positive, got {carrier}"));
    }
    if !(spacing.0 > 0.0) {
        c.errors.push(format!("subcarriers.spacing: must be positive, got {spacing}"));
    } else if carrier.0 > 0.0 && spacing.0 * count as f64 >= 2.0 * carrier.0 {
        c.errors.push("subcarriers.spacing: band extends below 0 Hz".into());
    }
    c.finish(s);
    SubcarrierConfig { carrier, count, spacing }
}

fn parse_schedule(c: &mut Checker, root: &Table, arrays: &ArraysConfig) -> ScheduleConfig {
    let mut s = c.section(root, "schedule");
    let default_kind = if matches!(arrays, ArraysConfig::CornerUnits { .. }) { "round-robin" } else { "orthogonal" };
    let kind = match c.string(&mut s, "kind", default_kind).as_str() {
        "orthogonal" => ScheduleKind::Orthogonal,
        "round-robin" => ScheduleKind::RoundRobin,
        "single-view" => ScheduleKind::SingleView { receiver: c.count(&mut s, "receiver", Some(0), 0).unwrap_or(0) },
        other => {
            c.errors.push(format!("schedule.kind: expected orthogonal, round-robin or single-view, got '{other}'"));
            ScheduleKind::Orthogonal
        }
    };
    let default_slots = if kind == ScheduleKind::Orthogonal { None } else { Some(4) };
    let slots = c.count(&mut s, "slots", default_slots, 1);
    let noise = c.quantity(&mut s, "noise", Power::from_dbm(-50.0));
    c.finish(s);
    ScheduleConfig { kind, slots, noise }
}

fn parse_solver(c: &mut Checker, root: &Table, default: SolverKind) -> SolverConfig {
    let mut s = c.section(root, "solver");
    let allowed = "rma, sbl, ls, omp, ista, lasso";
    let name = c.choice(&mut s, "name", default, allowed);
    let lambda = c.float(&mut s, "lambda", DEFAULT_ISTA_LAMBDA);
    if !(lambda > 0.0) {
        c.errors.push(format!("solver.lambda: must be positive, got {lambda}"));
    }
    let k = c.count(&mut s, "k", None, 1);
    let max_iters = c.count(&mut s, "max_iters", Some(200), 1).unwrap_or(200);
    let eps = c.float(&mut s, "eps", 1e-4);
    if !(eps > 0.0) {
        c.errors.push(format!("solver.eps: must be positive, got {eps}"));
    }
    let ista_iters = c.count(&mut s, "ista_iters", Some(500), 1).unwrap_or(500);
    let correlation = c.choice(&mut s, "correlation", CorrelationUpdate::default(), "fixed, all-cells, active-cells");
    let form = c.choice(&mut s, "form", PosteriorForm::default(), "auto, measurement, parameter");
    let weighting = c.choice(&mut s, "weighting", CoarrayWeighting::default(), "none, full-array, uniform");
    c.finish(s);
    SolverConfig { name, lambda, k, max_iters, eps, ista_iters, correlation, form, weighting }
}

fn parse_experiment(c: &mut Checker, root: &Table, solver: SolverKind) -> ExperimentConfig {
    let mut s = c.section(root, "experiment");
    let run_id = c.string(&mut s, "run_id", "run");
    if run_id.is_empty() || !run_id.chars().all(|ch| ch.is_ascii_alphanumeric() || "-_.".contains(ch)) || run_id.starts_with('.') {
        c.errors.push(format!("experiment.run_id: use letters, digits, '-', '_' or '.', got '{run_id}'"));
    }
    let seeds = c
        .list(&mut s, "seeds", |v| match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            _ => Err(format!("expected a non-negative integer, got {v}")),
        })
        .unwrap_or_else(|| vec![0]);
    let powers = c.list(&mut s, "powers", quantity_item::<Power>).unwrap_or_else(|| vec![Power::from_dbm(30.0)]);
    let depths = c.list(&mut s, "depths", quantity_item::<Length>).unwrap_or_else(|| vec![Length(10.0)]);
    for d in &depths {
        if !(d.0 > 0.0) {
            c.errors.push(format!("experiment.depths: must be positive, got {d}"));
        }
    }
    let solvers = c
        .list(&mut s, "solvers", |v| v.as_str().and_then(enum_from_str).ok_or_else(|| format!("unknown solver {v}")))
        .unwrap_or_else(|| vec![solver]);
    c.finish(s);
    ExperimentConfig { run_id, seeds, powers, depths, solvers }
}

/// Cross-section consistency.
fn check_combination(c: &mut Checker, cfg: &Config) {
    let voxel = cfg.scene.is_voxel();
    let corner = matches!(cfg.arrays, ArraysConfig::CornerUnits { .. });
    if voxel != corner {
        c.errors.push("arrays.kind: voxel scenes need corner-units and planar scenes need a planar array".into());
    }
    for solver in &cfg.experiment.solvers {
        if solver.is_voxel() != voxel {
            c.errors.push(format!("experiment.solvers: '{}' does not apply to a {} scene", solver.as_str(), cfg.scene.kind()));
        }
    }
    if cfg.solver.name.is_voxel() != voxel {
        c.errors.push(format!("solver.name: '{}' does not apply to a {} scene", cfg.solver.name.as_str(), cfg.scene.kind()));
    }
    match cfg.schedule.kind {
        ScheduleKind::Orthogonal if voxel => c.errors.push("schedule.kind: voxel scenes use a cooperative schedule".into()),
        ScheduleKind::RoundRobin | ScheduleKind::SingleView { .. } if !voxel => {
            c.errors.push("schedule.kind: planar scenes use the orthogonal schedule".into())
        }
        ScheduleKind::SingleView { receiver } if receiver >= 4 => {
            c.errors.push(format!("schedule.receiver: there are 4 corner units, got {receiver}"))
        }
        _ => {}
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
        let mut c = Checker { errors: Vec::new() };
        for k in root.keys() {
            if !["scene", "arrays", "subcarriers", "schedule", "solver", "experiment"].contains(&k.as_str()) {
                c.errors.push(format!("{k}: unknown section"));
            }
        }
        let scene = parse_scene(&mut c, &root);
        let arrays = parse_arrays(&mut c, &root);
        let subcarriers = parse_subcarriers(&mut c, &root);
        let schedule = parse_schedule(&mut c, &root, &arrays);
        let default_solver = if scene.is_voxel() { SolverKind::Sbl } else { SolverKind::Rma };
        let solver = parse_solver(&mut c, &root, default_solver);
        let experiment = parse_experiment(&mut c, &root, solver.name);
        let cfg = Config { scene, arrays, subcarriers, schedule, solver, experiment };
        check_combination(&mut c, &cfg);
        if c.errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(c.errors))
        }
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_toml_str(&text)
    }

    /// Canonical TOML with every field spelled out; parses back to `self`.
    pub fn to_toml_string(&self) -> String {
        let q = |s: String| Value::String(s);
        let mut scene = Table::new();
        scene.insert("kind".into(), q(self.scene.kind().into()));
        let put_refl = |t: &mut Table, r: &Reflectivity| match r {
            Reflectivity::Unit => {
                t.insert("reflectivity".into(), q("unit".into()));
            }
            Reflectivity::Ar1 { psi } => {
                t.insert("reflectivity".into(), q("ar1".into()));
                t.insert("psi".into(), Value::Float(*psi));
            }
        };
        let grid = |g: &[usize; 3]| Value::Array(g.iter().map(|&v| Value::Integer(v as i64)).collect());
        match &self.scene {
            SceneConfig::SiemensStar { diameter, spokes, pixel } => {
                scene.insert("diameter".into(), q(diameter.to_string()));
                scene.insert("spokes".into(), Value::Integer(*spokes as i64));
                scene.insert("pixel".into(), q(pixel.to_string()));
            }
            SceneConfig::HollowRectangle { width, height, pixel } => {
                scene.insert("width".into(), q(width.to_string()));
                scene.insert("height".into(), q(height.to_string()));
                scene.insert("pixel".into(), q(pixel.to_string()));
            }
            SceneConfig::Point { x, y, pixel } => {
                scene.insert("x".into(), q(x.to_string()));
                scene.insert("y".into(), q(y.to_string()));
                scene.insert("pixel".into(), q(pixel.to_string()));
            }
            SceneConfig::VoxelDemo { extent, grid: g, reflectivity } => {
                scene.insert("extent".into(), q(extent.to_string()));
                scene.insert("grid".into(), grid(g));
                put_refl(&mut scene, reflectivity);
            }
            SceneConfig::RandomVoxels { extent, grid: g, active, reflectivity } => {
                scene.insert("extent".into(), q(extent.to_string()));
                scene.insert("grid".into(), grid(g));
                scene.insert("active".into(), Value::Integer(*active as i64));
                put_refl(&mut scene, reflectivity);
            }
        }

        let mut arrays = Table::new();
        match &self.arrays {
            ArraysConfig::CornerUnits { rows, cols, spacing, downtilt } => {
                arrays.insert("kind".into(), q("corner-units".into()));
                arrays.insert("rows".into(), Value::Integer(*rows as i64));
                arrays.insert("cols".into(), Value::Integer(*cols as i64));
                arrays.insert("spacing".into(), q(spacing.to_string()));
                arrays.insert("downtilt".into(), q(downtilt.to_string()));
            }
            ArraysConfig::Planar(p) => {
                arrays.insert("kind".into(), q(p.kind.as_str().into()));
                arrays.insert("spacing".into(), q(Length(p.spacing).to_string()));
                match p.kind {
                    ArchitectureKind::Full | ArchitectureKind::SarVirtual => {
                        arrays.insert("rows".into(), Value::Integer(p.full_rows as i64));
                        arrays.insert("cols".into(), Value::Integer(p.full_cols as i64));
                    }
                    ArchitectureKind::Boundary | ArchitectureKind::DistributedBoundary => {
                        arrays.insert("strip_length".into(), Value::Integer(p.strip_length as i64));
                        arrays.insert("strip_width".into(), Value::Integer(p.strip_width as i64));
                        if p.kind == ArchitectureKind::DistributedBoundary {
                            arrays.insert("tau".into(), Value::Float(p.removal_fraction));
                        }
                    }
                }
            }
        }

        let mut sub = Table::new();
        sub.insert("carrier".into(), q(self.subcarriers.carrier.to_string()));
        sub.insert("count".into(), Value::Integer(self.subcarriers.count as i64));
        sub.insert("spacing".into(), q(self.subcarriers.spacing.to_string()));

        let mut sched = Table::new();
        match self.schedule.kind {
            ScheduleKind::Orthogonal => {
                sched.insert("kind".into(), q("orthogonal".into()));
            }
            ScheduleKind::RoundRobin => {
                sched.insert("kind".into(), q("round-robin".into()));
            }
            ScheduleKind::SingleView { receiver } => {
                sched.insert("kind".into(), q("single-view".into()));
                sched.insert("receiver".into(), Value::Integer(receiver as i64));
            }
        }
        if let Some(sl) = self.schedule.slots {
            sched.insert("slots".into(), Value::Integer(sl as i64));
        }
        sched.insert("noise".into(), q(self.schedule.noise.to_string()));

        let s = &self.solver;
        let mut solver = Table::new();
        solver.insert("name".into(), q(s.name.as_str().into()));
        solver.insert("lambda".into(), Value::Float(s.lambda));
        if let Some(k) = s.k {
            solver.insert("k".into(), Value::Integer(k as i64));
        }
        solver.insert("max_iters".into(), Value::Integer(s.max_iters as i64));
        solver.insert("eps".into(), Value::Float(s.eps));
        solver.insert("ista_iters".into(), Value::Integer(s.ista_iters as i64));
        solver.insert("correlation".into(), q(enum_to_str(&s.correlation)));
        solver.insert("form".into(), q(enum_to_str(&s.form)));
        solver.insert("weighting".into(), q(enum_to_str(&s.weighting)));

        let e = &self.experiment;
        let mut exp = Table::new();
        exp.insert("run_id".into(), q(e.run_id.clone()));
        exp.insert("seeds".into(), Value::Array(e.seeds.iter().map(|&v| Value::Integer(v as i64)).collect()));
        exp.insert("powers".into(), Value::Array(e.powers.iter().map(|p| q(p.to_string())).collect()));
        exp.insert("depths".into(), Value::Array(e.depths.iter().map(|d| q(d.to_string())).collect()));
        exp.insert("solvers".into(), Value::Array(e.solvers.iter().map(|v| q(v.as_str().into())).collect()));

        let mut root = Table::new();
        root.insert("scene".into(), Value::Table(scene));
        root.insert("arrays".into(), Value::Table(arrays));
        root.insert("subcarriers".into(), Value::Table(sub));
        root.insert("schedule".into(), Value::Table(sched));
        root.insert("solver".into(), Value::Table(solver));
        root.insert("experiment".into(), Value::Table(exp));
        toml::to_string(&root).expect("config tables always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scene]
kind = "siemens-star"

[arrays]
kind = "boundary"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = Config::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.subcarriers.carrier, Frequency(10e9));
        assert_eq!(c.experiment.powers, vec![Power::from_dbm(30.0)]);
        assert_eq!(c.schedule.noise, Power::from_dbm(-50.0));
        assert_eq!(c.experiment.depths, vec![Length(10.0)]);
        assert_eq!(c.solver.name, SolverKind::Rma);
        match c.arrays {
            ArraysConfig::Planar(p) => {
                assert_eq!((p.strip_length, p.strip_width), (60, 4));
                assert!((p.spacing - 0.06).abs() < 1e-15);
            }
            _ => panic!("expected a planar array"),
        }
        assert!((c.experiment.powers[0].watts() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_document_is_valid() {
        assert!(Config::from_toml_str("").is_ok());
    }

    #[test]
    fn negative_spacing_is_named() {
        let err = Config::from_toml_str("[arrays]\nkind = \"boundary\"\nspacing = \"-0.06 m\"\n").unwrap_err();
        let Error::Config(v) = err else { panic!() };
        assert!(v.iter().any(|e| e.starts_with("arrays.spacing")), "{v:?}");
    }

    #[test]
    fn all_violations_reported() {
        let text = r#"
[scene]
kind = "siemens-star"
spokes = 0
colour = "red"

[arrays]
spacing = "30 dBm"

[subcarriers]
carrier = 10

[bogus]
"#;
        let Error::Config(v) = Config::from_toml_str(text).unwrap_err() else { panic!() };
        for key in ["scene.spokes", "scene.colour: unknown key", "arrays.spacing: unit mismatch", "subcarriers.carrier", "bogus: unknown section"] {
            assert!(v.iter().any(|e| e.starts_with(key)), "missing {key} in {v:?}");
        }
        assert_eq!(v.len(), 5, "{v:?}");
    }

    #[test]
    fn solver_scene_mismatch_rejected() {
        let Error::Config(v) = Config::from_toml_str("[solver]\nname = \"sbl\"\n").unwrap_err() else { panic!() };
        assert!(v.iter().any(|e| e.starts_with("solver.name")));
    }

    #[test]
    fn voxel_config_round_trip() {
        let text = r#"
[scene]
kind = "random-voxels"
grid = [5, 5, 5]
active = 8
reflectivity = "ar1"
psi = 0.9

[arrays]
kind = "corner-units"
downtilt = "45 deg"

[subcarriers]
count = 4

[schedule]
kind = "single-view"
receiver = 2

[solver]
name = "omp"
k = 8

[experiment]
seeds = [1, 2, 3]
powers = ["10 dBm", "0.5 W"]
solvers = ["sbl", "ls", "omp"]
"#;
        let a = Config::from_toml_str(text).unwrap();
        let b = Config::from_toml_str(&a.to_toml_string()).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.schedule.kind, ScheduleKind::SingleView { receiver: 2 });
        assert_eq!(b.experiment.powers[1].watts(), 0.5);
    }

    #[test]
    fn planar_config_round_trip() {
        let text = "[scene]\nkind = \"hollow-rectangle\"\n[arrays]\nkind = \"distributed-boundary\"\ntau = 0.25\n[experiment]\ndepths = [\"10 m\", \"2000 cm\"]\n";
        let a = Config::from_toml_str(text).unwrap();
        assert_eq!(a.experiment.depths[1], Length(20.0));
        assert_eq!(Config::from_toml_str(&a.to_toml_string()).unwrap(), a);
    }

    #[test]
    fn malformed_toml_is_a_config_error() {
        assert!(matches!(Config::from_toml_str("[scene"), Err(Error::Config(_))));
    }
}
