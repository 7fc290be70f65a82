//! Batch driver: run one element end to end, write its artifacts to disk,
//! and sweep element lists into combined tables.
//!
//! A run writes into `<out>/<element>/`:
//! - `report.json`: the full [`RunReport`], deterministic for a given
//!   configuration and seed except for the `timestamp_unix` field
//! - `pair_<k>.csv`, `total.csv`: densities sampled on the export grid
//!   (columns r, theta, phi, density), pairs sorted most bound first
//! - `iterations.log`: per-iteration residual/free-energy trace (optional)
//! - `slice_theta_<deg>_{pair_<k>|total}[_log].ppm`: grayscale density
//!   slices at fixed polar angle (optional)

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, BasisSet};
use crate::config::RunConfig;
use crate::elements;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, QuadGrid};
use crate::observables::{
    check_constraints, default_grid, eigen_density_on_grid, energy_report, kinetic_energy,
    EnergyReport,
};
use crate::reference;
use crate::scf::{run_scf, ScfContext, ScfState};
use crate::solver::density_at;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    /// Wall-clock seconds since the epoch; the one field exempt from the
    /// determinism guarantee.
    pub timestamp_unix: u64,
    pub element: String,
    pub z: u32,
    /// "angular" or "spherical", after the basis restriction.
    pub variant: String,
    pub basis_size: usize,
    pub beta: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub free_energy: f64,
    pub binding: f64,
    pub kinetic: f64,
    pub ratio1: f64,
    pub ratio2: f64,
    /// Electrons per pair, sorted like the energy rows.
    pub pair_electrons: Vec<u32>,
    /// Energy table with pairs sorted by free energy, most bound first.
    pub energy: EnergyReport,
    pub comparison: Option<Comparison>,
    /// The resolved configuration the run actually used.
    pub config: RunConfig,
}

/// Deviations against the bundled reference tables.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Comparison {
    pub published: f64,
    pub hartree_fock: f64,
    /// |binding - HF| / binding * 100, the tables' own convention.
    pub dev_vs_hf_percent: f64,
    /// |binding - published| / published * 100.
    pub dev_vs_published_percent: f64,
    pub ratio1_published: f64,
    pub ratio2_published: f64,
}

pub fn compare_reference(z: u32, spherical: bool, binding: f64) -> Result<Comparison> {
    let e = reference::element_ref(z)
        .ok_or_else(|| Error::UnknownElement(format!("Z = {z} not in reference tables")))?;
    let published = if spherical { e.spherical } else { e.angular };
    Ok(Comparison {
        published,
        hartree_fock: e.hartree_fock,
        dev_vs_hf_percent: reference::percent_deviation(binding, e.hartree_fock),
        dev_vs_published_percent: ((binding - published) / published).abs() * 100.0,
        ratio1_published: e.ratio1,
        ratio2_published: e.ratio2,
    })
}

pub struct RunArtifacts {
    pub report: RunReport,
    pub state: ScfState,
    pub ctx: ScfContext,
    /// The element's output directory.
    pub dir: PathBuf,
}

/// A finished run held in memory, for callers that do their own output
/// (the C API, embedding code). `run` adds the artifact files on top.
pub struct Evaluation {
    pub report: RunReport,
    pub state: ScfState,
    pub ctx: ScfContext,
    /// Maps presentation index (most bound first, as in the report) to the
    /// internal pair index used by `state`.
    pub pair_order: Vec<usize>,
}

/// Run one element in memory: converge, decompose, compare. Writes nothing.
/// Non-convergence is not an error; the report says `converged: false` and
/// keeps the residual history.
pub fn evaluate(config: &RunConfig) -> Result<Evaluation> {
    config.validate()?;
    let basis = build_basis(&config.active_channels()?)?;
    let ctx = ScfContext::new(basis, config.eig_threshold)?;
    let state = run_scf(&config.scf_config(), &ctx)?;

    let quad = QuadGrid::build(default_grid(&ctx.basis))?;
    let mut energy = energy_report(&state, &ctx, &quad)?;
    let kinetic = kinetic_energy(&state, &ctx);
    let (ratio1, ratio2) = check_constraints(&state, &ctx, &quad, kinetic)?;

    // present pairs most bound first, like the published tables
    let mut order: Vec<usize> = (0..energy.pairs.len()).collect();
    order.sort_by(|&a, &b| energy.pairs[a].f.total_cmp(&energy.pairs[b].f));
    energy.pairs = order.iter().map(|&i| energy.pairs[i]).collect();
    energy.pair_norms = order.iter().map(|&i| energy.pair_norms[i]).collect();
    let pair_electrons: Vec<u32> = order.iter().map(|&i| state.electrons[i]).collect();

    let spherical = ctx.basis.lmax() == 0;
    let comparison = if config.compare {
        Some(compare_reference(config.z, spherical, energy.binding)?)
    } else {
        None
    };

    let element = elements::symbol(config.z)?.to_string();
    let report = RunReport {
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        element,
        z: config.z,
        variant: if spherical { "spherical" } else { "angular" }.to_string(),
        basis_size: ctx.basis.len(),
        beta: config.beta,
        converged: state.converged,
        iterations: state.iterations,
        residual: state.residual,
        free_energy: state.free_energy,
        binding: energy.binding,
        kinetic,
        ratio1,
        ratio2,
        pair_electrons,
        energy,
        comparison,
        config: config.clone(),
    };
    Ok(Evaluation { report, state, ctx, pair_order: order })
}

/// Run one element and write its artifacts under
/// `config.out_dir/<element>/`. Non-convergence is not an error here: the
/// report (and its residual history) is still written, with `converged:
/// false` for the caller to turn into an exit status.
pub fn run(config: &RunConfig) -> Result<RunArtifacts> {
    let Evaluation { report, state, ctx, pair_order } = evaluate(config)?;
    let dir = config.out_dir.join(report.element.to_lowercase());
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("report.json"), to_json(&report)?)?;
    write_densities(&dir, config, &state, &ctx, &pair_order)?;
    if config.emit_iteration_log {
        write_iteration_log(&dir, &state)?;
    }
    if config.emit_heatmap {
        write_heatmaps(&dir, &state, &ctx, &pair_order)?;
    }
    Ok(RunArtifacts { report, state, ctx, dir })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Export grid for density files: compact atomic window, radial-only when
/// the basis is spherical. The quadrature grids used for energies are much
/// wider; this one is sized for plotting.
pub fn export_grid(basis: &BasisSet) -> GridSpec {
    if basis.lmax() == 0 {
        GridSpec { n_radial: 240, r_min: 1e-4, r_max: 30.0, n_theta: 1, n_phi: 1 }
    } else {
        GridSpec { n_radial: 120, r_min: 1e-4, r_max: 16.0, n_theta: 16, n_phi: 32 }
    }
}

fn write_densities(
    dir: &std::path::Path,
    config: &RunConfig,
    state: &ScfState,
    ctx: &ScfContext,
    order: &[usize],
) -> Result<()> {
    let spec = config.grid.unwrap_or_else(|| export_grid(&ctx.basis));
    let grid = QuadGrid::build(spec)?;
    let dg = eigen_density_on_grid(state, ctx, &grid);
    for (k, &mu) in order.iter().enumerate() {
        write_density_csv(&dir.join(format!("pair_{k}.csv")), &grid, &dg.pairs[mu])?;
    }
    write_density_csv(&dir.join("total.csv"), &grid, &dg.total)
}

fn write_density_csv(path: &std::path::Path, grid: &QuadGrid, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "r,theta,phi,density")?;
    let mut idx = 0;
    for &r in &grid.r {
        for &theta in &grid.theta {
            for &phi in &grid.phi {
                writeln!(w, "{r:e},{theta:e},{phi:e},{:e}", values[idx])?;
                idx += 1;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_iteration_log(dir: &std::path::Path, state: &ScfState) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(dir.join("iterations.log"))?);
    writeln!(w, "# iter residual free_energy alpha")?;
    for rec in &state.history {
        writeln!(w, "{} {:e} {:.12e} {:.4}", rec.iter, rec.residual, rec.free_energy, rec.alpha)?;
    }
    w.flush()?;
    Ok(())
}

const SLICE_PIXELS: usize = 200;
const SLICE_HALF_WIDTH: f64 = 8.0;
/// Log color scale spans this many decades below the maximum.
const SLICE_LOG_DECADES: f64 = 6.0;

fn write_heatmaps(
    dir: &std::path::Path,
    state: &ScfState,
    ctx: &ScfContext,
    order: &[usize],
) -> Result<()> {
    for &(deg, theta) in
        &[(45u32, std::f64::consts::FRAC_PI_4), (90, std::f64::consts::FRAC_PI_2)]
    {
        for (k, &mu) in order.iter().enumerate() {
            let img = raster_slice(state, ctx, Some(mu), theta);
            write_slice_scales(dir, &format!("slice_theta_{deg}_pair_{k}"), &img)?;
        }
        let img = raster_slice(state, ctx, None, theta);
        write_slice_scales(dir, &format!("slice_theta_{deg}_total"), &img)?;
    }
    Ok(())
}

/// Sample the density on the cone of fixed polar angle, image axes being
/// the cone's projection onto the xy plane.
fn raster_slice(state: &ScfState, ctx: &ScfContext, pair: Option<usize>, theta: f64) -> Vec<f64> {
    let n = SLICE_PIXELS;
    let sin_theta = theta.sin();
    let mut img = vec![0.0; n * n];
    for iy in 0..n {
        let y = SLICE_HALF_WIDTH * (1.0 - (2.0 * iy as f64 + 1.0) / n as f64);
        for ix in 0..n {
            let x = SLICE_HALF_WIDTH * ((2.0 * ix as f64 + 1.0) / n as f64 - 1.0);
            let rho = x.hypot(y);
            let r = rho / sin_theta;
            let phi = y.atan2(x);
            img[iy * n + ix] = sample_density(state, ctx, pair, r, theta, phi);
        }
    }
    img
}

fn sample_density(
    state: &ScfState,
    ctx: &ScfContext,
    pair: Option<usize>,
    r: f64,
    theta: f64,
    phi: f64,
) -> f64 {
    let one = |mu: usize| {
        let p = &state.pairs[mu];
        density_at(&ctx.basis, &p.prop, &p.eig, state.electrons[mu], r, theta, phi)
    };
    match pair {
        Some(mu) => one(mu),
        None => (0..state.n_pairs()).map(one).sum(),
    }
}

fn write_slice_scales(dir: &std::path::Path, stem: &str, img: &[f64]) -> Result<()> {
    let max = img.iter().cloned().fold(0.0, f64::max);
    let linear: Vec<u8> = img
        .iter()
        .map(|&v| if max > 0.0 { (v / max * 255.0).round().clamp(0.0, 255.0) as u8 } else { 0 })
        .collect();
    let log: Vec<u8> = img
        .iter()
        .map(|&v| {
            if max > 0.0 && v > 0.0 {
                let t = ((v / max).log10() + SLICE_LOG_DECADES) / SLICE_LOG_DECADES;
                (t.clamp(0.0, 1.0) * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    write_pgm(&dir.join(format!("{stem}.ppm")), &linear)?;
    write_pgm(&dir.join(format!("{stem}_log.ppm")), &log)
}

fn write_pgm(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", SLICE_PIXELS, SLICE_PIXELS)?;
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub binding: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub ratio1: f64,
    pub ratio2: f64,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub element: String,
    pub z: u32,
    pub error: Option<String>,
    pub summary: Option<RunSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub variant: String,
    pub beta: f64,
    pub rows: Vec<SweepRow>,
}

fn sweep_one(z: u32, template: &RunConfig) -> SweepRow {
    let mut cfg = template.clone();
    cfg.z = z;
    cfg.compare = true;
    let element = elements::symbol(z).map(str::to_string).unwrap_or_else(|_| format!("Z{z}"));
    match run(&cfg) {
        Ok(art) => SweepRow {
            element,
            z,
            error: None,
            summary: Some(RunSummary {
                binding: art.report.binding,
                converged: art.report.converged,
                iterations: art.report.iterations,
                residual: art.report.residual,
                ratio1: art.report.ratio1,
                ratio2: art.report.ratio2,
                comparison: art.report.comparison.expect("compare forced on"),
            }),
        },
        Err(e) => SweepRow { element, z, error: Some(e.to_string()), summary: None },
    }
}

/// Run every element in `zs` with the template configuration (element and
/// output subdirectory swapped per run). Elements run in parallel, capped at
/// the core count; each run owns its output subdirectory, and rows come back
/// in input order regardless of which finished first. Per-element failures
/// are recorded in their row; the sweep itself only fails on unwritable
/// sweep files.
pub fn sweep(zs: &[u32], template: &RunConfig) -> Result<SweepReport> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(zs.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<SweepRow>>> =
        zs.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(&z) = zs.get(i) else { break };
                *slots[i].lock().unwrap() = Some(sweep_one(z, template));
            });
        }
    });
    let rows = slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every slot filled"))
        .collect();
    let report = SweepReport {
        variant: if template.spherical_only { "spherical" } else { "angular" }.to_string(),
        beta: template.beta,
        rows,
    };
    fs::create_dir_all(&template.out_dir)?;
    fs::write(template.out_dir.join("sweep.json"), to_json(&report)?)?;
    fs::write(template.out_dir.join("sweep.txt"), report.table())?;
    Ok(report)
}

impl SweepReport {
    /// Text table mirroring the published layout: binding energies against
    /// the bundled model and Hartree-Fock values, plus the constraint
    /// ratios.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<8} {:>13} {:>13} {:>14} {:>10} {:>10} {:>9} {:>9} {:>6} {:>6}\n",
            "element",
            "binding",
            "published",
            "hartree-fock",
            "%dev(HF)",
            "%dev(pub)",
            "ratio1",
            "ratio2",
            "conv",
            "iters"
        );
        for row in &self.rows {
            match (&row.summary, &row.error) {
                (Some(sum), _) => {
                    let c = &sum.comparison;
                    s.push_str(&format!(
                        "{:<8} {:>13.7} {:>13.7} {:>14.10} {:>10.5} {:>10.5} {:>9.5} {:>9.5} {:>6} {:>6}\n",
                        row.element,
                        sum.binding,
                        c.published,
                        c.hartree_fock,
                        c.dev_vs_hf_percent,
                        c.dev_vs_published_percent,
                        sum.ratio1,
                        sum.ratio2,
                        if sum.converged { "yes" } else { "NO" },
                        sum.iterations,
                    ));
                }
                (None, Some(err)) => s.push_str(&format!("{:<8} FAILED: {err}\n", row.element)),
                (None, None) => s.push_str(&format!("{:<8} FAILED\n", row.element)),
            }
        }
        s
    }
}
