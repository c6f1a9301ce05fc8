//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! pass criterion numbers as arguments to run a subset.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use faer::Mat;
use nfimaging::channel::assemble_channels;
use nfimaging::config::{Config, SolverKind};
use nfimaging::experiment::{self, Setup, Stimulus};
use nfimaging::geometry::{
    build_architecture, make_voxel_demo, resolution_bound, Aabb, ArchitectureParams, Scene, SubcarrierPlan, Vec3,
};
use nfimaging::rma::{rma_pipeline, weyl_truncated, RmaOptions};
use nfimaging::sbl::{
    build_problem, sbl_em, selection_indices, stack, zero_pad, MmvProblem, PosteriorForm, Prepared, SblRun,
};
use nfimaging::waveform::{
    dft_precoder, extract_pair_observation, simulate_cooperative, simulate_orthogonal, Precoders, TransmitPlan,
};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn config(text: &str) -> Config {
    Config::from_toml_str(text).expect("acceptance config parses")
}

fn max_abs_diff(a: &Mat<C>, b: &Mat<C>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

fn rel_diff(a: &[C], b: &[C]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<C> {
    Mat::from_fn(rows, cols, |_, _| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<C> {
    (0..len).map(|_| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
}

fn precoder_orthogonality() -> Outcome {
    let (power, n) = (2.0, 4);
    let mut worst: f64 = 0.0;
    for (m_t, s) in [(4, 4), (8, 16), (60 * 4 * 4, 60 * 4 * 4)] {
        let x = match dft_precoder(m_t, s, power, n) {
            Ok(x) => x,
            Err(e) => return outcome(false, format!("({m_t}, {s}): {e}")),
        };
        let g = &x * x.adjoint();
        let c = power * s as f64 / (n * m_t) as f64;
        let want = Mat::from_fn(m_t, m_t, |i, j| if i == j { C::new(c, 0.0) } else { C::new(0.0, 0.0) });
        worst = worst.max(max_abs_diff(&g, &want));
    }
    outcome(worst <= 1e-12, format!("max entry error {worst:.2e}"))
}

fn forward_model() -> Outcome {
    let region = Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(4.0, 4.0, 4.0));
    let scene = match make_voxel_demo(region, [4, 4, 4]).and_then(|s| s.with_ar1_reflectivity(2, 0.9, 11)) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let units = nfimaging::geometry::corner_radio_units(region, 4, 4, 0.015, 45f64.to_radians()).unwrap();
    let plan = SubcarrierPlan::new(2, 10e9, 4e6).unwrap();
    let ch = assemble_channels(&scene, &units, &plan).unwrap();
    let sizes: Vec<usize> = units.iter().map(|u| u.antenna_count()).collect();
    let tp = TransmitPlan::round_robin(&sizes, 4, 2, 1.0, 5).unwrap();
    let obs = simulate_cooperative(&scene, &ch, &tp, 0.0, 5).unwrap();
    let prob = build_problem(&scene, &ch, &tp, &obs).unwrap();
    let mut worst: f64 = 0.0;
    for n in 0..2 {
        let rho: Vec<C> = ch.cells.iter().map(|&q| scene.reflectivity(n, q)).collect();
        let phi = &prob.sensing[n];
        let pred: Vec<C> = (0..phi.nrows()).map(|r| (0..phi.ncols()).map(|p| phi[(r, p)] * rho[p]).sum()).collect();
        worst = worst.max(rel_diff(&prob.measurements[n], &pred));
    }
    let cells = scene.cell_count();
    outcome(worst <= 1e-9 && cells == 64 && units.len() == 4, format!("relative error {worst:.2e} over Q = {cells}"))
}

fn weyl_identity() -> Outcome {
    let k = 2.0 * PI * 10e9 / 299_792_458.0;
    let mut worst: f64 = 0.0;
    for r in [5.0, 10.0] {
        let got = weyl_truncated(r, k, 0.95 * k, 4000, 4000);
        let want = C::from_polar(1.0 / r, k * r);
        worst = worst.max((got.norm() - want.norm()).abs() / want.norm());
    }
    outcome(worst <= 0.05, format!("worst magnitude error {:.2}%", 100.0 * worst))
}

fn rma_point_spread() -> Outcome {
    let z = 10.0;
    let arch = build_architecture(ArchitectureParams::boundary(60, 4, 0.06)).unwrap();
    let plan = SubcarrierPlan::single(10e9);
    let sizes: Vec<usize> = arch.units.iter().map(|u| u.antenna_count()).collect();
    let slots = sizes.iter().copied().max().unwrap();
    let pre = Precoders::dft(&sizes, slots, 1.0, 1).unwrap();
    let scene = Scene::point(Vec3::new(0.0, 0.0, z), 0.01).unwrap();
    let ch = nfimaging::channel::assemble_channels_occupied(&scene, &arch.units, &plan).unwrap();
    let obs = simulate_orthogonal(&scene, &ch, &pre, 0.0, 1).unwrap();
    let pairs = extract_pair_observation(&obs, &pre).unwrap();
    let img = rma_pipeline(&pairs, &arch, &plan, z, 0, &RmaOptions::default()).unwrap();
    let (r, c) = img.argmax();
    let (x, y) = img.pixel_position(r, c);
    let on_target = x.abs() <= img.pitch.0 * 1.0001 && y.abs() <= img.pitch.1 * 1.0001;
    let (bx, by) = resolution_bound(&arch, 10e9, z).unwrap();
    let (wx, wy) = (img.mainlobe_width(0, 0.5), img.mainlobe_width(1, 0.5));
    outcome(
        on_target && wx <= 2.0 * bx && wy <= 2.0 * by,
        format!("peak at ({x:.4}, {y:.4}) m, widths {wx:.4}/{wy:.4} m vs bound {bx:.4}/{by:.4} m"),
    )
}

const STAR: &str = r#"
[scene]
kind = "siemens-star"
diameter = "0.8 m"
spokes = 8
pixel = "0.01 m"

[arrays]
kind = "boundary"

[schedule]
noise = "-50 dBm"

[experiment]
seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
powers = ["10 dBm", "20 dBm", "30 dBm"]
depths = ["10 m"]
"#;

fn rma_snr_trend() -> Outcome {
    let cfg = config(STAR);
    let r = match experiment::run(&cfg, None) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let pcc: Vec<f64> = [10.0, 20.0, 30.0].iter().map(|&p| r.mean(SolverKind::Rma, p, 10.0, "pcc").unwrap_or(f64::NAN)).collect();
    let increasing = pcc.windows(2).all(|w| w[1] > w[0]);
    outcome(increasing && pcc[2] >= 0.7, format!("mean PCC at 10/20/30 dBm: {:.4} {:.4} {:.4}", pcc[0], pcc[1], pcc[2]))
}

const RECTANGLE: &str = r#"
[scene]
kind = "hollow-rectangle"
width = "1.28 m"
height = "0.64 m"
pixel = "0.01 m"

[arrays]
kind = "boundary"

[experiment]
seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
powers = ["30 dBm"]
depths = ["10 m", "20 m", "30 m"]
"#;

fn rma_distance_trend() -> Outcome {
    let cfg = config(RECTANGLE);
    let r = match experiment::run(&cfg, None) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let pcc: Vec<f64> = [10.0, 20.0, 30.0].iter().map(|&z| r.mean(SolverKind::Rma, 30.0, z, "pcc").unwrap_or(f64::NAN)).collect();
    let decreasing = pcc.windows(2).all(|w| w[1] < w[0]);
    outcome(decreasing, format!("mean PCC at 10/20/30 m: {:.4} {:.4} {:.4}", pcc[0], pcc[1], pcc[2]))
}

fn voxel_config(scene: &str, schedule: &str, solvers: &str, seeds: usize) -> Config {
    let seeds: Vec<String> = (0..seeds).map(|s| s.to_string()).collect();
    config(&format!(
        r#"
[scene]
{scene}

[arrays]
kind = "corner-units"
rows = 8
cols = 8

[subcarriers]
count = 4

[schedule]
{schedule}
slots = 4
noise = "-50 dBm"

[solver]
name = "sbl"
max_iters = 200
eps = 1e-4

[experiment]
seeds = [{}]
powers = ["30 dBm"]
solvers = [{solvers}]
"#,
        seeds.join(", ")
    ))
}

const DEMO_5: &str = "kind = \"voxel-demo\"\ngrid = [5, 5, 5]\nreflectivity = \"ar1\"\npsi = 0.9";
const DEMO_7: &str = "kind = \"voxel-demo\"\ngrid = [7, 7, 7]\nreflectivity = \"ar1\"\npsi = 0.9";
const RANDOM_8: &str = "kind = \"random-voxels\"\ngrid = [5, 5, 5]\nactive = 8";
const COOPERATIVE: &str = "kind = \"round-robin\"";

/// EM on the config's first power for one seed.
fn sbl_run(cfg: &Config, seed: u64) -> nfimaging::Result<(Setup, SblRun)> {
    let setup = Setup::new(cfg, 10.0, seed)?;
    let stim = setup.stimulus(cfg, cfg.experiment.powers[0], seed)?;
    let obs = setup.simulate(cfg, &stim, seed)?;
    let Stimulus::Cooperative(tp) = &stim else { unreachable!("voxel configs are cooperative") };
    let prob = build_problem(&setup.scene, &setup.channels, tp, &obs)?;
    let run = sbl_em(&prob, &cfg.solver.sbl_options())?;
    Ok((setup, run))
}

fn sbl_monotone() -> Outcome {
    let cfg = voxel_config(DEMO_5, COOPERATIVE, "\"sbl\"", 1);
    let (_, run) = match sbl_run(&cfg, 0) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let t = &run.state.objective_trace;
    let violations = t.windows(2).filter(|w| w[1] > w[0] + 1e-6).count();
    outcome(
        violations == 0 && run.converged && run.state.iteration <= 200,
        format!("{} iterations, converged {}, {violations} increases", run.state.iteration, run.converged),
    )
}

fn sbl_support() -> Outcome {
    let cfg = voxel_config(RANDOM_8, COOPERATIVE, "\"sbl\"", 1);
    let mut hits = 0;
    for seed in 0..20 {
        let (setup, run) = match sbl_run(&cfg, seed) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        let g = run.estimate.gamma.unwrap_or_default();
        let mut idx: Vec<usize> = (0..g.len()).collect();
        idx.sort_by(|a, b| g[*b].total_cmp(&g[*a]));
        let mut top = idx[..8.min(idx.len())].to_vec();
        top.sort_unstable();
        let mut truth = setup.scene.occupied();
        truth.sort_unstable();
        hits += usize::from(top == truth);
    }
    outcome(hits >= 18, format!("{hits}/20 seeds recover the support"))
}

fn correlation_recovery() -> Outcome {
    let cfg = voxel_config(DEMO_5, COOPERATIVE, "\"sbl\"", 1);
    let mut acc = 0.0;
    for seed in 0..20 {
        let (_, run) = match sbl_run(&cfg, seed) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        let p = &run.state.psi;
        let n = p.nrows();
        acc += (0..n - 1).map(|k| p[(k, k + 1)].re / (p[(k, k)].re * p[(k + 1, k + 1)].re).sqrt()).sum::<f64>() / (n - 1) as f64;
    }
    let mean = acc / 20.0;
    outcome((mean - 0.9).abs() <= 0.15, format!("mean first off-diagonal {mean:.4}"))
}

fn solver_ordering() -> Outcome {
    let multi = voxel_config(DEMO_7, COOPERATIVE, "\"sbl\", \"ls\", \"omp\"", 10);
    let single = voxel_config(DEMO_7, "kind = \"single-view\"\nreceiver = 0", "\"sbl\"", 10);
    let (rm, rs) = match (experiment::run(&multi, None), experiment::run(&single, None)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, e.to_string()),
    };
    let get = |r: &experiment::SweepResult, s, m| r.mean(s, 30.0, 10.0, m).unwrap_or(f64::NAN);
    let (sbl, ls, omp) = (get(&rm, SolverKind::Sbl, "psnr"), get(&rm, SolverKind::Ls, "psnr"), get(&rm, SolverKind::Omp, "psnr"));
    let (ssim_multi, ssim_single) = (get(&rm, SolverKind::Sbl, "ssim"), get(&rs, SolverKind::Sbl, "ssim"));
    outcome(
        sbl > ls && sbl > omp && ssim_multi > ssim_single,
        format!("PSNR sbl {sbl:.2} ls {ls:.2} omp {omp:.2} dB; SSIM multi-view {ssim_multi:.3} single-view {ssim_single:.3}"),
    )
}

fn random_problem(rng: &mut ChaCha8Rng, n: usize, q: usize, lens: &[usize], noise: f64) -> MmvProblem {
    let sensing = lens.iter().map(|&l| random_mat(rng, l, q)).collect();
    let meas = lens.iter().map(|&l| random_vec(rng, l)).collect();
    let p = MmvProblem::new(sensing, meas, noise).unwrap();
    assert_eq!(p.subcarriers(), n);
    p
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> Mat<C> {
    let a = random_mat(rng, n, n);
    let mut p = &a * a.adjoint();
    for i in 0..n {
        p[(i, i)] += C::new(0.5, 0.0);
    }
    p
}

fn woodbury() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let shapes: [(usize, &[usize]); 5] =
        [(4, &[30, 45, 20, 60]), (2, &[150, 90]), (1, &[120]), (5, &[10, 12, 8, 15, 9]), (3, &[40, 70, 55])];
    let qs = [50, 100, 200, 40, 60];
    let mut worst: f64 = 0.0;
    for ((n, lens), q) in shapes.iter().zip(qs) {
        let prob = random_problem(&mut rng, *n, q, lens, 0.05);
        let gamma: Vec<f64> = (0..q).map(|_| 0.01 + rng.random::<f64>()).collect();
        let psi = random_psd(&mut rng, *n);
        let prep = Prepared::new(&prob);
        let (a, b) = match (prep.posterior(&gamma, &psi, PosteriorForm::Measurement), prep.posterior(&gamma, &psi, PosteriorForm::Parameter)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return outcome(false, e.to_string()),
        };
        worst = worst.max(rel_diff(&b.mu, &a.mu));
        let sa: Vec<C> = a.sigma.iter().flat_map(|m| (0..m.ncols()).flat_map(move |j| (0..m.nrows()).map(move |i| m[(i, j)]))).collect();
        let sb: Vec<C> = b.sigma.iter().flat_map(|m| (0..m.ncols()).flat_map(move |j| (0..m.nrows()).map(move |i| m[(i, j)]))).collect();
        worst = worst.max(rel_diff(&sb, &sa));
        worst = worst.max((a.objective - b.objective).abs() / a.objective.abs());
    }
    outcome(worst <= 1e-8, format!("worst relative disagreement {worst:.2e} up to NQ = 200"))
}

/// Rows measurement-major then subcarrier, column i·N + n, built directly.
fn direct_blocks(prob: &MmvProblem) -> (Mat<C>, Vec<C>) {
    let (n, q) = (prob.subcarriers(), prob.cells());
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for r in 0..prob.l_max() {
        for k in 0..n {
            if r < prob.sensing[k].nrows() {
                rows.push((r, k));
            }
        }
    }
    let phi = Mat::from_fn(rows.len(), n * q, |row, col| {
        let (r, k) = rows[row];
        if col % n == k {
            prob.sensing[k][(r, col / n)]
        } else {
            C::new(0.0, 0.0)
        }
    });
    let y = rows.iter().map(|&(r, k)| prob.measurements[k][r]).collect();
    (phi, y)
}

fn heterogeneous_dimensions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for lens in [&[3usize, 5][..], &[6, 2], &[4, 1, 7], &[5, 5, 2, 8]] {
        let prob = random_problem(&mut rng, lens.len(), 6, lens, 0.1);
        let (direct, y) = direct_blocks(&prob);
        let s = stack(&prob);
        if s.phi.nrows() != direct.nrows() || s.phi.ncols() != direct.ncols() {
            return outcome(false, format!("lengths {lens:?}: stacked shape differs"));
        }
        worst = worst.max(max_abs_diff(&s.phi, &direct)).max(rel_diff(&s.y, &y));
        // The padded measurements picked by the selection equal the raw ones.
        let (ys, _) = zero_pad(&prob);
        let n = lens.len();
        let picked: Vec<C> = selection_indices(&prob).iter().map(|&k| ys[k % n][k / n]).collect();
        worst = worst.max(rel_diff(&picked, &y));
    }
    outcome(worst <= 1e-9, format!("worst deviation {worst:.2e}"))
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { name: "precoder orthogonality", budget: Duration::from_secs(1), run: precoder_orthogonality },
        Criterion { name: "forward model consistency", budget: Duration::from_secs(10), run: forward_model },
        Criterion { name: "truncated Weyl integral", budget: Duration::from_secs(30), run: weyl_identity },
        Criterion { name: "RMA point spread", budget: Duration::from_secs(60), run: rma_point_spread },
        Criterion { name: "RMA PCC rises with power", budget: Duration::from_secs(600), run: rma_snr_trend },
        Criterion { name: "RMA PCC falls with distance", budget: Duration::from_secs(600), run: rma_distance_trend },
        Criterion { name: "SBL objective monotone", budget: Duration::from_secs(300), run: sbl_monotone },
        Criterion { name: "SBL support recovery", budget: Duration::from_secs(600), run: sbl_support },
        Criterion { name: "correlation recovery", budget: Duration::from_secs(600), run: correlation_recovery },
        Criterion { name: "solver ordering", budget: Duration::from_secs(900), run: solver_ordering },
        Criterion { name: "posterior form equivalence", budget: Duration::from_secs(10), run: woodbury },
        Criterion { name: "heterogeneous stacking", budget: Duration::from_secs(5), run: heterogeneous_dimensions },
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let id = i + 1;
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let o = (c.run)();
        let elapsed = t.elapsed();
        let in_time = elapsed <= c.budget;
        let pass = o.pass && in_time;
        failed += usize::from(!pass);
        let late = if in_time { String::new() } else { format!(", over the {:?} budget", c.budget) };
        println!(
            "criterion {id:2} {}: {} ({}; {:.2} s{late})",
            if pass { "PASS" } else { "FAIL" },
            c.name,
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
