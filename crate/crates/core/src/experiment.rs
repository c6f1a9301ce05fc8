//! Experiment orchestration: simulate, reconstruct, align and score every
//! (solver, power, depth, seed) cell of a sweep.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use faer::Mat;
use num_complex::Complex64 as C;
use rand::seq::index::sample;
use rayon::prelude::*;

use crate::channel::{assemble_channels, assemble_channels_occupied, compute_visibility, ChannelTensor};
use crate::config::{ArraysConfig, Config, Reflectivity, ScheduleKind, SceneConfig, SolverKind};
use crate::error::{invalid, Error, Result};
use crate::geometry::{
    build_architecture, corner_radio_units, make_hollow_rectangle, make_siemens_star, make_voxel_demo, Aabb,
    ArrayArchitecture, RadioUnit, Scene, SubcarrierPlan, Vec3,
};
use crate::io::{self, MetricRow};
use crate::metrics::{align, psnr_reference_peak, to_complex, GridImage, MetricSet};
use crate::rma::{rma_incoherent, RmaOptions};
use crate::rng::{stream, tag};
use crate::sbl::{build_problem, ista, ls, omp, sbl_em, ReflectivityEstimate};
use crate::units::Power;
use crate::waveform::{echo_operator, extract_pair_observation, simulate_cooperative, simulate_orthogonal_with, ObservationSet, Precoders, TransmitPlan};

/// Draws made before giving up on an observable random support.
const SUPPORT_DRAWS: u64 = 1000;

/// Scene, arrays and channels of one (depth, scene seed) combination.
pub struct Setup {
    pub scene: Scene,
    pub plan: SubcarrierPlan,
    /// Present for planar arrays.
    pub arch: Option<ArrayArchitecture>,
    pub units: Vec<RadioUnit>,
    pub channels: ChannelTensor,
    echo: OnceLock<Vec<Mat<C>>>,
}

/// What the transmitters send.
pub enum Stimulus {
    Orthogonal(Precoders),
    Cooperative(TransmitPlan),
}

pub enum Reconstruction {
    Image(GridImage),
    Voxels(ReflectivityEstimate),
}

fn voxel_region(extent: f64) -> Aabb {
    Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(extent, extent, extent))
}

fn unit_sizes(units: &[RadioUnit]) -> Vec<usize> {
    units.iter().map(|u| u.antenna_count()).collect()
}

fn transmit_plan(cfg: &Config, sizes: &[usize], power: Power, seed: u64) -> Result<TransmitPlan> {
    let slots = cfg.schedule.slots.unwrap_or(4);
    let n = cfg.subcarriers.count;
    match cfg.schedule.kind {
        ScheduleKind::RoundRobin => TransmitPlan::round_robin(sizes, slots, n, power.watts(), seed),
        ScheduleKind::SingleView { receiver } => TransmitPlan::single_view(sizes, receiver, slots, n, power.watts(), seed),
        ScheduleKind::Orthogonal => Err(invalid("the orthogonal schedule has no transmit plan")),
    }
}

/// For each cell, whether some slot pairs a receiving and a transmitting unit
/// that both see it.
pub fn observable_cells_under(scene: &Scene, units: &[RadioUnit], plan: &TransmitPlan) -> Vec<bool> {
    let vis = compute_visibility(scene, units);
    let mut offset = 0;
    let seen_by: Vec<Vec<bool>> = units
        .iter()
        .map(|u| {
            let range = offset..offset + u.antenna_count();
            offset += u.antenna_count();
            (0..scene.cell_count()).map(|q| range.clone().any(|m| vis.get(m, q))).collect()
        })
        .collect();
    (0..scene.cell_count())
        .map(|q| {
            plan.schedule.iter().any(|e| {
                e.receivers.iter().any(|&r| seen_by[r][q]) && e.transmitters.iter().any(|&t| seen_by[t][q])
            })
        })
        .collect()
}

/// `active` voxels drawn uniformly, redrawn until every one is observable
/// under the schedule.
pub fn random_observable_voxels(
    region: Aabb,
    grid: [usize; 3],
    active: usize,
    units: &[RadioUnit],
    plan: &TransmitPlan,
    seed: u64,
) -> Result<Scene> {
    let q = grid.iter().product::<usize>();
    if active == 0 || active > q {
        return Err(invalid(format!("cannot place {active} voxels in {q} cells")));
    }
    for draw in 0..SUPPORT_DRAWS {
        let mut rng = stream(seed, &[tag::SCENE, u64::MAX, draw]);
        let mut occ = vec![false; q];
        for c in sample(&mut rng, q, active) {
            occ[c] = true;
        }
        let scene = Scene::voxels(region, grid, occ)?;
        let ok = observable_cells_under(&scene, units, plan);
        if scene.occupied().iter().all(|&c| ok[c]) {
            return Ok(scene);
        }
    }
    Err(Error::Numerical(format!("no observable support of {active} voxels after {SUPPORT_DRAWS} draws")))
}

/// Whether the scene itself changes with the seed.
pub fn scene_uses_seed(cfg: &Config) -> bool {
    match cfg.scene {
        SceneConfig::RandomVoxels { .. } => true,
        SceneConfig::VoxelDemo { reflectivity, .. } => reflectivity != Reflectivity::Unit,
        _ => false,
    }
}

impl Setup {
    pub fn new(cfg: &Config, depth: f64, seed: u64) -> Result<Setup> {
        let plan = cfg.subcarriers.plan()?;
        let n = cfg.subcarriers.count;
        let (arch, units) = match &cfg.arrays {
            ArraysConfig::Planar(p) => {
                let a = build_architecture(*p)?;
                let u = a.units.clone();
                (Some(a), u)
            }
            ArraysConfig::CornerUnits { rows, cols, spacing, downtilt } => {
                let extent = match cfg.scene {
                    SceneConfig::VoxelDemo { extent, .. } | SceneConfig::RandomVoxels { extent, .. } => extent.0,
                    _ => return Err(invalid("corner units need a voxel scene")),
                };
                (None, corner_radio_units(voxel_region(extent), *rows, *cols, spacing.0, downtilt.0)?)
            }
        };
        let with_refl = |scene: Scene, r: Reflectivity| match r {
            Reflectivity::Unit => Ok(scene),
            Reflectivity::Ar1 { psi } => scene.with_ar1_reflectivity(n, psi, seed),
        };
        let scene = match &cfg.scene {
            SceneConfig::SiemensStar { diameter, spokes, pixel } => make_siemens_star(diameter.0, pixel.0, *spokes)?.with_depth(depth)?,
            SceneConfig::HollowRectangle { width, height, pixel } => make_hollow_rectangle(width.0, height.0, pixel.0)?.with_depth(depth)?,
            SceneConfig::Point { x, y, pixel } => Scene::point(Vec3::new(x.0, y.0, depth), pixel.0)?,
            SceneConfig::VoxelDemo { extent, grid, reflectivity } => with_refl(make_voxel_demo(voxel_region(extent.0), *grid)?, *reflectivity)?,
            SceneConfig::RandomVoxels { extent, grid, active, reflectivity } => {
                // Observability depends on the schedule's unit pairing only,
                // not on the pilots, so any power and seed will do here.
                let tp = transmit_plan(cfg, &unit_sizes(&units), Power::from_dbm(0.0), 0)?;
                let s = random_observable_voxels(voxel_region(extent.0), *grid, *active, &units, &tp, seed)?;
                with_refl(s, *reflectivity)?
            }
        };
        let channels = if arch.is_some() {
            assemble_channels_occupied(&scene, &units, &plan)?
        } else {
            assemble_channels(&scene, &units, &plan)?
        };
        Ok(Setup { scene, plan, arch, units, channels, echo: OnceLock::new() })
    }

    fn echo_operators(&self) -> &[Mat<C>] {
        self.echo.get_or_init(|| (0..self.plan.len()).map(|n| echo_operator(&self.scene, &self.channels, n)).collect())
    }

    pub fn stimulus(&self, cfg: &Config, power: Power, seed: u64) -> Result<Stimulus> {
        let sizes = unit_sizes(&self.units);
        match cfg.schedule.kind {
            ScheduleKind::Orthogonal => {
                let slots = cfg.schedule.slots.unwrap_or_else(|| sizes.iter().copied().max().unwrap_or(1));
                Ok(Stimulus::Orthogonal(Precoders::dft(&sizes, slots, power.watts(), self.plan.len())?))
            }
            _ => Ok(Stimulus::Cooperative(transmit_plan(cfg, &sizes, power, seed)?)),
        }
    }

    pub fn simulate(&self, cfg: &Config, stim: &Stimulus, seed: u64) -> Result<ObservationSet> {
        let noise = cfg.schedule.noise.watts();
        match stim {
            Stimulus::Orthogonal(p) => simulate_orthogonal_with(self.echo_operators(), &self.channels, p, noise, seed),
            Stimulus::Cooperative(tp) => simulate_cooperative(&self.scene, &self.channels, tp, noise, seed),
        }
    }

    pub fn reconstruct(&self, cfg: &Config, stim: &Stimulus, obs: &ObservationSet, solver: SolverKind) -> Result<Reconstruction> {
        let s = &cfg.solver;
        match (solver, stim) {
            (SolverKind::Rma, Stimulus::Orthogonal(pre)) => {
                let arch = self.arch.as_ref().ok_or_else(|| invalid("range migration needs a planar array"))?;
                let pairs = extract_pair_observation(obs, pre)?;
                let subs: Vec<usize> = (0..self.plan.len()).collect();
                let opts = RmaOptions { weighting: s.weighting, ..Default::default() };
                let img = rma_incoherent(&pairs, arch, &self.plan, self.scene.depth(), &subs, &opts)?;
                Ok(Reconstruction::Image(GridImage::new(img.rows, img.cols, img.pitch, img.origin, img.magnitude())?))
            }
            (SolverKind::Rma, _) => Err(invalid("range migration needs the orthogonal schedule")),
            (_, Stimulus::Cooperative(tp)) => {
                let problem = build_problem(&self.scene, &self.channels, tp, obs)?;
                let est = match solver {
                    SolverKind::Sbl => sbl_em(&problem, &s.sbl_options())?.estimate,
                    SolverKind::Ls => ls(&problem)?,
                    SolverKind::Omp => omp(&problem, s.k.unwrap_or_else(|| self.scene.occupied().len()))?,
                    SolverKind::Ista | SolverKind::Lasso => ista(&problem, s.lambda, s.ista_iters)?,
                    SolverKind::Rma => unreachable!(),
                };
                Ok(Reconstruction::Voxels(est))
            }
            (_, Stimulus::Orthogonal(_)) => Err(invalid("voxel solvers need a cooperative schedule")),
        }
    }

    /// Ground-truth magnitude: the pixel grid for planar scenes, RMS |ρ| over
    /// subcarriers for voxels.
    pub fn truth(&self) -> Result<Reconstruction> {
        let s = &self.scene;
        if self.arch.is_some() {
            let (nx, ny) = (s.shape[0], s.shape[1]);
            let origin = (s.region.min.x + 0.5 * s.cell.x, s.region.min.y + 0.5 * s.cell.y);
            Ok(Reconstruction::Image(GridImage::new(ny, nx, (s.cell.x, s.cell.y), origin, s.magnitude_grid(0))?))
        } else {
            let n = self.plan.len();
            let rho: Vec<Vec<C>> = (0..n).map(|k| (0..s.cell_count()).map(|q| s.reflectivity(k, q)).collect()).collect();
            Ok(Reconstruction::Voxels(ReflectivityEstimate::from_rows(rho)))
        }
    }

    /// The four metrics plus the reference-peak PSNR, in a fixed order.
    pub fn score(&self, recon: &Reconstruction) -> Result<Vec<(&'static str, f64)>> {
        let (reference, estimate) = match (self.truth()?, recon) {
            (Reconstruction::Image(r), Reconstruction::Image(e)) => {
                let a = align(&r, e);
                (a.reference, a.estimate)
            }
            (Reconstruction::Voxels(r), Reconstruction::Voxels(e)) => (unit_max(&r.magnitude()), unit_max(&e.magnitude())),
            _ => return Err(invalid("reconstruction and truth differ in kind")),
        };
        let (a, b) = (to_complex(&reference), to_complex(&estimate));
        let m = MetricSet::compute(&a, &b)?;
        let mut out = m.named().to_vec();
        out.push(("psnr_ref", psnr_reference_peak(&a, &b)?));
        Ok(out)
    }

    /// Writes the reconstruction as `<stem>.csv` plus a PGM preview for
    /// images or a per-unit projected-strength table for voxels.
    pub fn save(&self, recon: &Reconstruction, dir: &Path, stem: &str) -> Result<()> {
        match recon {
            Reconstruction::Image(img) => {
                io::save_grid_csv(&dir.join(format!("{stem}.csv")), img)?;
                io::save_pgm(&dir.join(format!("{stem}.pgm")), img.rows, img.cols, &img.data)
            }
            Reconstruction::Voxels(est) => io::save_voxel_csv(&dir.join(format!("{stem}.csv")), &self.scene, &est.magnitude()),
        }
    }
}

pub fn unit_max(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(0.0, f64::max);
    v.iter().map(|x| if m > 0.0 { x / m } else { 0.0 }).collect()
}

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub solver: SolverKind,
    pub power: Power,
    pub depth: f64,
    pub seed: u64,
}

impl CellKey {
    /// File-name-safe identifier.
    pub fn id(&self) -> String {
        format!("{}_p{}dBm_z{}m_s{}", self.solver.as_str(), self.power.dbm(), self.depth, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub key: CellKey,
    pub outcome: std::result::Result<Vec<(&'static str, f64)>, String>,
}

/// Mean and population standard deviation over the seeds that succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub solver: SolverKind,
    pub power_dbm: f64,
    pub depth: f64,
    pub metric: &'static str,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<Aggregate>,
}

impl SweepResult {
    pub fn mean(&self, solver: SolverKind, power_dbm: f64, depth: f64, metric: &str) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.solver == solver && a.power_dbm == power_dbm && a.depth == depth && a.metric == metric)
            .map(|a| a.mean)
    }
}

fn sweep_cells(cfg: &Config) -> Vec<CellKey> {
    let e = &cfg.experiment;
    let mut keys = Vec::new();
    for &solver in &e.solvers {
        for &power in &e.powers {
            for depth in &e.depths {
                for &seed in &e.seeds {
                    keys.push(CellKey { solver, power, depth: depth.0, seed });
                }
            }
        }
    }
    keys
}

fn setup_key(cfg: &Config, depth: f64, seed: u64) -> (u64, u64) {
    (depth.to_bits(), if scene_uses_seed(cfg) { seed } else { 0 })
}

/// Simulate, reconstruct and score one cell, saving its image when `out`
/// is given.
pub fn run_cell(cfg: &Config, setup: &Setup, key: &CellKey, out: Option<&Path>) -> Result<Vec<(&'static str, f64)>> {
    let stim = setup.stimulus(cfg, key.power, key.seed)?;
    let obs = setup.simulate(cfg, &stim, key.seed)?;
    let recon = setup.reconstruct(cfg, &stim, &obs, key.solver)?;
    if let Some(dir) = out {
        setup.save(&recon, dir, &format!("image_{}", key.id()))?;
    }
    setup.score(&recon)
}

/// Run every cell, continuing past failures, and aggregate over seeds.
/// With `out`, writes `cells.csv`, `summary.csv`, `metrics.csv` and one image
/// per cell into it.
pub fn run(cfg: &Config, out: Option<&Path>) -> Result<SweepResult> {
    if cfg.experiment.seeds.is_empty() {
        return Err(invalid("at least one seed is required"));
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let keys = sweep_cells(cfg);
    let mut setup_keys: Vec<(f64, u64)> = Vec::new();
    for k in &keys {
        let sk = (k.depth, if scene_uses_seed(cfg) { k.seed } else { 0 });
        if !setup_keys.contains(&sk) {
            setup_keys.push(sk);
        }
    }
    let setups: BTreeMap<(u64, u64), std::result::Result<Setup, String>> = setup_keys
        .par_iter()
        .map(|&(d, s)| (setup_key(cfg, d, s), Setup::new(cfg, d, s).map_err(|e| e.to_string())))
        .collect();
    let cells: Vec<CellResult> = keys
        .into_par_iter()
        .map(|key| {
            let outcome = match &setups[&setup_key(cfg, key.depth, key.seed)] {
                Ok(setup) => run_cell(cfg, setup, &key, out).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            CellResult { key, outcome }
        })
        .collect();
    let aggregates = aggregate(&cells);
    let result = SweepResult { cells, aggregates };
    if let Some(dir) = out {
        write_outputs(cfg, &result, dir)?;
    }
    Ok(result)
}

type Scores = Vec<(&'static str, f64)>;

fn aggregate(cells: &[CellResult]) -> Vec<Aggregate> {
    let mut groups: Vec<(CellKey, Vec<&Scores>)> = Vec::new();
    for c in cells {
        let pos = groups.iter().position(|(k, _)| k.solver == c.key.solver && k.power == c.key.power && k.depth == c.key.depth);
        let slot = match pos {
            Some(p) => p,
            None => {
                groups.push((c.key.clone(), Vec::new()));
                groups.len() - 1
            }
        };
        if let Ok(m) = &c.outcome {
            groups[slot].1.push(m);
        }
    }
    let mut out = Vec::new();
    for (k, runs) in groups {
        let Some(first) = runs.first() else { continue };
        for (i, &(metric, _)) in first.iter().enumerate() {
            let v: Vec<f64> = runs.iter().map(|r| r[i].1).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            out.push(Aggregate { solver: k.solver, power_dbm: k.power.dbm(), depth: k.depth, metric, mean, std, count: v.len() });
        }
    }
    out
}

fn write_outputs(cfg: &Config, r: &SweepResult, dir: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("cells.csv"))?;
    w.write_record(["solver", "power_dbm", "depth_m", "seed", "metric", "value", "error"])?;
    for c in &r.cells {
        let k = &c.key;
        let head = [k.solver.as_str().to_string(), k.power.dbm().to_string(), k.depth.to_string(), k.seed.to_string()];
        match &c.outcome {
            Ok(ms) => {
                for (m, v) in ms {
                    w.write_record(head.iter().cloned().chain([m.to_string(), format!("{v:e}"), String::new()]))?;
                }
            }
            Err(e) => w.write_record(head.iter().cloned().chain([String::new(), String::new(), e.clone()]))?,
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(["solver", "power_dbm", "depth_m", "metric", "mean", "std", "count"])?;
    for a in &r.aggregates {
        w.write_record([
            a.solver.as_str().to_string(),
            a.power_dbm.to_string(),
            a.depth.to_string(),
            a.metric.to_string(),
            format!("{:e}", a.mean),
            format!("{:e}", a.std),
            a.count.to_string(),
        ])?;
    }
    w.flush()?;

    let rows: Vec<MetricRow> = r
        .cells
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok().map(|m| (c, m)))
        .flat_map(|(c, m)| {
            let id = format!("{}/{}", cfg.experiment.run_id, c.key.id());
            m.iter().map(move |(name, v)| MetricRow { run_id: id.clone(), metric: name.to_string(), value: *v })
        })
        .collect();
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("metrics.csv"))?);
    io::write_metric_rows(&mut f, &rows)?;
    std::io::Write::flush(&mut f)?;
    Ok(())
}

/// `runs/<run-id>` under `out`.
pub fn run_dir(out: &Path, cfg: &Config) -> PathBuf {
    out.join("runs").join(&cfg.experiment.run_id)
}
