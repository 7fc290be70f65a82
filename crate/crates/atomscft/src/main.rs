use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use atomscft::config::RunConfig;
use atomscft::elements;
use atomscft::runner;

#[derive(Parser)]
#[command(
    name = "atomscft",
    about = "Ground-state electron pair densities and binding energies of light atoms \
             from a polymer-style self-consistent field theory",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one element and write report.json, density CSVs, and optional
    /// heatmaps/iteration log into the output directory.
    Run(RunArgs),
    /// Run a list of elements and combine them into one table.
    Sweep(SweepArgs),
}

/// Shared knobs; every flag overrides the corresponding config-file key.
#[derive(Args)]
struct CommonArgs {
    /// Config file (flat key = value lines; flags win over the file)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inverse temperature (imaginary-time contour length)
    #[arg(long)]
    beta: Option<f64>,
    /// Pauli contact coupling
    #[arg(long)]
    g0: Option<f64>,
    /// Give each pair its own g0 on an arithmetic ladder around g0
    #[arg(long)]
    g0_per_pair: bool,
    /// Convergence threshold on the density-coefficient residual
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Linear mixing weight
    #[arg(long)]
    mixing: Option<f64>,
    /// Seed for the symmetry-breaking perturbation
    #[arg(long)]
    seed: Option<u64>,
    /// Relative amplitude of the initial perturbation
    #[arg(long)]
    perturb: Option<f64>,
    /// Keep only l = 0 basis channels
    #[arg(long)]
    spherical_only: bool,
    /// Basis channels as l:count:cmin:cmax[,...]
    #[arg(long)]
    basis: Option<String>,
    /// Density-export grid as nr:rmin:rmax:ntheta:nphi, or "auto"
    #[arg(long)]
    grid: Option<String>,
    /// Output directory (element subdirectories are created inside)
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Emit fixed-theta density slices as PPM images
    #[arg(long)]
    heatmap: bool,
    /// Emit the per-iteration residual log
    #[arg(long)]
    iteration_log: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Element symbol, name, or charge number
    #[arg(short = 'Z', long)]
    element: Option<String>,
    /// Compare against the bundled reference tables in the report
    #[arg(long)]
    compare: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated element list, or "all" for H through Ne
    #[arg(long, default_value = "all")]
    elements: String,
    #[command(flatten)]
    common: CommonArgs,
}

fn build_config(common: &CommonArgs) -> Result<RunConfig, atomscft::Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = common.beta {
        cfg.set("beta", &v.to_string())?;
    }
    if let Some(v) = common.g0 {
        cfg.set("g0", &v.to_string())?;
    }
    if common.g0_per_pair {
        cfg.set("g0_per_pair", "true")?;
    }
    if let Some(v) = common.tol {
        cfg.set("tol", &v.to_string())?;
    }
    if let Some(v) = common.max_iter {
        cfg.set("max_iter", &v.to_string())?;
    }
    if let Some(v) = common.mixing {
        cfg.set("mixing", &v.to_string())?;
    }
    if let Some(v) = common.seed {
        cfg.set("seed", &v.to_string())?;
    }
    if let Some(v) = common.perturb {
        cfg.set("perturb", &v.to_string())?;
    }
    if common.spherical_only {
        cfg.set("spherical_only", "true")?;
    }
    if let Some(v) = &common.basis {
        cfg.set("basis", v)?;
    }
    if let Some(v) = &common.grid {
        cfg.set("grid", v)?;
    }
    cfg.out_dir = common.out.clone();
    if common.heatmap {
        cfg.set("heatmap", "true")?;
    }
    if common.iteration_log {
        cfg.set("iteration_log", "true")?;
    }
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode, atomscft::Error> {
    let mut cfg = build_config(&args.common)?;
    if let Some(el) = &args.element {
        cfg.set("element", el)?;
    }
    if args.compare {
        cfg.set("compare", "true")?;
    }
    let art = runner::run(&cfg)?;
    let r = &art.report;
    println!(
        "{} ({}): binding = {:.7}, F = {:.7}, {} iterations, residual {:.3e}",
        r.element, r.variant, r.binding, r.free_energy, r.iterations, r.residual
    );
    println!("ratios: L3 {:.5}, von Weizsacker {:.5}", r.ratio1, r.ratio2);
    if let Some(c) = &r.comparison {
        println!(
            "reference: published {:.7} (dev {:.5}%), Hartree-Fock {:.10} (dev {:.5}%)",
            c.published, c.dev_vs_published_percent, c.hartree_fock, c.dev_vs_hf_percent
        );
    }
    println!("artifacts in {}", art.dir.display());
    if !r.converged {
        eprintln!(
            "warning: not converged after {} iterations (residual {:.3e})",
            r.iterations, r.residual
        );
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, atomscft::Error> {
    let cfg = build_config(&args.common)?;
    let zs: Vec<u32> = if args.elements.trim().eq_ignore_ascii_case("all") {
        (1..=elements::MAX_Z).collect()
    } else {
        args.elements
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(elements::parse_element)
            .collect::<Result<_, _>>()?
    };
    let report = runner::sweep(&zs, &cfg)?;
    print!("{}", report.table());
    println!("artifacts in {}", cfg.out_dir.display());
    let any_failed = report.rows.iter().any(|r| r.error.is_some());
    let any_unconverged = report
        .rows
        .iter()
        .filter_map(|r| r.summary.as_ref())
        .any(|s| !s.converged);
    Ok(if any_failed {
        ExitCode::FAILURE
    } else if any_unconverged {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
