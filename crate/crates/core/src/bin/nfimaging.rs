use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nfimaging::config::{Config, SolverKind};
use nfimaging::experiment::{self, unit_max, CellKey, Setup};
use nfimaging::io::{self, MetricRow, Table};
use nfimaging::metrics::{align, to_complex, MetricSet};
use nfimaging::{Error, Result};

#[derive(Parser)]
#[command(name = "nfimaging", version, about = "Near-field radio imaging simulator and reconstructor")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the first sweep cell and store its observations.
    Simulate(RunArgs),
    /// Range-migration image from stored observations.
    ImageRma(RunArgs),
    /// Voxel reconstruction from stored observations.
    ImageSbl(SolverArgs),
    /// Compare two image or voxel tables.
    Metrics {
        reference: PathBuf,
        estimate: PathBuf,
        #[arg(long, default_value = "cli")]
        run_id: String,
    },
    /// Run the whole experiment grid.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces the configured seed list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SolverArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    solver: Option<SolverKind>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
}

fn load(args: &RunArgs) -> Result<Config> {
    let mut cfg = Config::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.experiment.seeds = vec![s];
    }
    Ok(cfg)
}

/// The first cell of the sweep grid for `solver`.
fn first_cell(cfg: &Config, solver: SolverKind) -> CellKey {
    let e = &cfg.experiment;
    CellKey { solver, power: e.powers[0], depth: e.depths[0].0, seed: e.seeds[0] }
}

fn prepare_dir(cfg: &Config, out: &Path) -> Result<PathBuf> {
    let dir = experiment::run_dir(out, cfg);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.snapshot"), cfg.to_toml_string())?;
    Ok(dir)
}

fn write_metrics(path: &Path, run_id: &str, metrics: &[(&str, f64)]) -> Result<()> {
    let rows: Vec<MetricRow> =
        metrics.iter().map(|(m, v)| MetricRow { run_id: run_id.to_string(), metric: m.to_string(), value: *v }).collect();
    let mut buf = Vec::new();
    io::write_metric_rows(&mut buf, &rows)?;
    std::fs::write(path, buf)?;
    Ok(())
}

fn simulate(args: &RunArgs) -> Result<()> {
    let cfg = load(args)?;
    let key = first_cell(&cfg, cfg.experiment.solvers[0]);
    let setup = Setup::new(&cfg, key.depth, key.seed)?;
    let stim = setup.stimulus(&cfg, key.power, key.seed)?;
    let obs = setup.simulate(&cfg, &stim, key.seed)?;
    let dir = prepare_dir(&cfg, &args.out)?;
    io::save_observations(&dir.join("observations.bin"), &obs)?;
    println!("{}", dir.join("observations.bin").display());
    Ok(())
}

fn image(cfg: &Config, out: &Path, solver: SolverKind) -> Result<()> {
    let key = first_cell(cfg, solver);
    let dir = experiment::run_dir(out, cfg);
    let obs = io::load_observations(&dir.join("observations.bin"))?;
    if obs.seed != key.seed {
        return Err(Error::InvalidArgument(format!("observations were simulated with seed {}, config asks for {}", obs.seed, key.seed)));
    }
    let setup = Setup::new(cfg, key.depth, key.seed)?;
    let stim = setup.stimulus(cfg, key.power, key.seed)?;
    let recon = setup.reconstruct(cfg, &stim, &obs, solver)?;
    let stem = format!("image_{}", key.id());
    setup.save(&recon, &dir, &stem)?;
    let metrics = setup.score(&recon)?;
    write_metrics(&dir.join("metrics.csv"), &format!("{}/{}", cfg.experiment.run_id, key.id()), &metrics)?;
    println!("{}", dir.join(format!("{stem}.csv")).display());
    Ok(())
}

fn image_sbl(args: &SolverArgs) -> Result<()> {
    let mut cfg = load(&args.run)?;
    let s = &mut cfg.solver;
    if let Some(v) = args.solver {
        s.name = v;
    }
    if let Some(v) = args.lambda {
        s.lambda = v;
    }
    if let Some(v) = args.k {
        s.k = Some(v);
    }
    if let Some(v) = args.max_iters {
        s.max_iters = v;
    }
    if let Some(v) = args.eps {
        s.eps = v;
    }
    if cfg.solver.name == SolverKind::Rma {
        return Err(Error::InvalidArgument("image-sbl runs voxel solvers; use image-rma".into()));
    }
    image(&cfg, &args.run.out, cfg.solver.name)
}

fn metrics(reference: &Path, estimate: &Path, run_id: &str) -> Result<()> {
    let m = match (io::read_table(reference)?, io::read_table(estimate)?) {
        (Table::Grid(r), Table::Grid(e)) => MetricSet::of_aligned(&align(&r, &e))?,
        (Table::Voxels(r), Table::Voxels(e)) => MetricSet::compute(&to_complex(&unit_max(&r)), &to_complex(&unit_max(&e)))?,
        _ => return Err(Error::Format("cannot compare an image table with a voxel table".into())),
    };
    let rows: Vec<MetricRow> =
        m.named().iter().map(|(k, v)| MetricRow { run_id: run_id.to_string(), metric: k.to_string(), value: *v }).collect();
    let mut out = std::io::stdout().lock();
    io::write_metric_rows(&mut out, &rows)
}

fn sweep(args: &RunArgs) -> Result<()> {
    let cfg = load(args)?;
    let dir = prepare_dir(&cfg, &args.out)?;
    let r = experiment::run(&cfg, Some(&dir))?;
    let failed = r.cells.iter().filter(|c| c.outcome.is_err()).count();
    println!("{} cells, {failed} failed, results in {}", r.cells.len(), dir.display());
    Ok(())
}

fn error_line(e: &Error) -> String {
    let mut v = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    if let Error::Config(list) = e {
        v["violations"] = serde_json::json!(list);
    }
    v.to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Simulate(a) => simulate(a),
        Command::ImageRma(a) => load(a).and_then(|cfg| image(&cfg, &a.out, SolverKind::Rma)),
        Command::ImageSbl(a) => image_sbl(a),
        Command::Metrics { reference, estimate, run_id } => metrics(reference, estimate, run_id),
        Command::Sweep(a) => sweep(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
