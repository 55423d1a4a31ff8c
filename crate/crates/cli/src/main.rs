//! `glpinn`: point generation, vector search, integration sweeps, training
//! runs and run reports.
//!
//! Exit status is 0 on success, 1 for invalid input and 2 when a valid
//! request fails while running.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use glpinn::domains::Domain;
use glpinn::lowdisc::io::{save_points_csv, VectorCache};
use glpinn::lowdisc::{
    discrepancy_report, has_primitive_root, korobov_search, lattice_points, p2_merit, resolve_glp_vector, sample_unit_cube, Provenance,
};
use glpinn::qmcbench::{gaussian_bump, midpoint_quadrature, rate_sweep};
use glpinn::train::{train_run_with, ExperimentConfig};
use glpinn::{Error, Result};

const DEFAULT_CACHE: &str = "configs/vectors.txt";

#[derive(Parser)]
#[command(name = "glpinn", version, about = "Good-lattice-point sampling and PINN training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a point set, write it as CSV and print `n dim star l2star`.
    Points {
        /// glp, uniform, lhs, halton, hammersley or sobol.
        #[arg(long)]
        sampler: Provenance,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `unit`, `disk` or `box:LO,HI` (the same bounds on every axis).
        #[arg(long, default_value = "unit")]
        domain: String,
        /// Defaults to `<sampler>_<n>_<dim>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Vector cache used for GLP sets that are not Fibonacci lattices.
        #[arg(long, default_value = DEFAULT_CACHE)]
        cache: PathBuf,
    },
    /// Search the Korobov vector with the smallest P2 and add it to the cache.
    Search {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        dim: usize,
        /// Search every unit mod n instead of the primitive roots only.
        #[arg(long)]
        all_units: bool,
        #[arg(long, default_value = DEFAULT_CACHE)]
        out: PathBuf,
    },
    /// Integration-error sweep of the Gaussian bump on the unit cube.
    Qmc {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "uniform,glp")]
        samplers: Vec<Provenance>,
        #[arg(long, value_delimiter = ',', default_value = "55,144,377,987,2584,6765,10946")]
        ns: Vec<usize>,
        /// Number of seeds for the random samplers.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Midpoint nodes per axis of the reference quadrature.
        #[arg(long, default_value_t = 2000)]
        quadrature: usize,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Run a training config and write metrics, predictions and a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Override the config's Adam epoch count.
        #[arg(long)]
        adam_epochs: Option<usize>,
        /// Override the config's L-BFGS epoch count.
        #[arg(long)]
        lbfgs_epochs: Option<usize>,
        #[arg(long)]
        log_every: Option<usize>,
        /// Suppress per-row progress on standard error.
        #[arg(long)]
        quiet: bool,
    },
    /// Final errors of several runs side by side.
    Report {
        /// Metric CSVs written by `train`.
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Points { sampler, n, dim, seed, domain, out, cache } => points(sampler, n, dim, seed, &domain, out, &cache),
        Command::Search { n, dim, all_units, out } => search(n, dim, all_units, &out),
        Command::Qmc { dim, samplers, ns, seeds, quadrature, out } => qmc(dim, &samplers, &ns, seeds, quadrature, &out),
        Command::Train { config, out, adam_epochs, lbfgs_epochs, log_every, quiet } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(e) = adam_epochs {
                cfg.adam.epochs = e;
            }
            if let Some(e) = lbfgs_epochs {
                cfg.lbfgs.epochs = e;
            }
            if let Some(k) = log_every {
                cfg.log_every = k;
            }
            train(&cfg, &out, quiet)
        }
        Command::Report { metrics } => report(&metrics),
    }
}

fn parse_domain(s: &str, dim: usize) -> Result<Domain> {
    match s {
        "unit" => Ok(Domain::unit_cube(dim)),
        "disk" if dim == 2 => Ok(Domain::Disk),
        "disk" => Err(Error::InvalidArgument("the disk domain is 2-d".into())),
        _ => {
            let bounds = s
                .strip_prefix("box:")
                .and_then(|b| b.split_once(','))
                .and_then(|(lo, hi)| Some((lo.trim().parse::<f64>().ok()?, hi.trim().parse::<f64>().ok()?)));
            let (lo, hi) = bounds
                .ok_or_else(|| Error::InvalidArgument(format!("domain `{s}` is not unit, disk or box:LO,HI")))?;
            Domain::new_box(vec![lo; dim], vec![hi; dim])
        }
    }
}

fn points(
    sampler: Provenance,
    n: usize,
    dim: usize,
    seed: u64,
    domain: &str,
    out: Option<PathBuf>,
    cache: &Path,
) -> Result<()> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidArgument("--n and --dim must be positive".into()));
    }
    let domain = parse_domain(domain, dim)?;
    let (unit, gv) = if sampler == Provenance::Glp {
        let gv = resolve_glp_vector(n as u64, dim, Some(&VectorCache::load(cache)?))?;
        (lattice_points(&gv), Some(gv))
    } else {
        (sample_unit_cube(sampler, n, dim, seed, None)?, None)
    };
    let report = discrepancy_report(&unit, gv.as_ref())?;
    let mapped = domain.map_from_unit(&unit)?;
    let out = out.unwrap_or_else(|| PathBuf::from(format!("{sampler}_{n}_{dim}.csv")));
    save_points_csv(&mapped, &out)?;
    let star = report.star.map(|s| format!("{s:e}")).unwrap_or_default();
    println!("{n} {dim} {star} {:e}", report.l2_star);
    Ok(())
}

fn search(n: u64, dim: usize, all_units: bool, out: &Path) -> Result<()> {
    let restrict = !all_units;
    if restrict && !has_primitive_root(n) {
        return Err(Error::InvalidArgument(format!(
            "n = {n} has no primitive roots; pass --all-units to search every unit"
        )));
    }
    let gv = korobov_search(n, dim, restrict)?;
    let added = VectorCache::append(out, &gv)?;
    println!("{gv} P2 = {:e}", p2_merit(&gv));
    if !added {
        eprintln!("{} already holds a vector for n = {n}, d = {dim}", out.display());
    }
    Ok(())
}

fn qmc(dim: usize, samplers: &[Provenance], ns: &[usize], seeds: u64, quadrature: usize, out: &Path) -> Result<()> {
    if seeds == 0 {
        return Err(Error::InvalidArgument("--seeds must be at least 1".into()));
    }
    let exact = midpoint_quadrature(gaussian_bump, dim, quadrature)?;
    let seeds: Vec<u64> = (0..seeds).collect();
    let result = rate_sweep(gaussian_bump, exact, dim, samplers, ns, &seeds)?;
    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    fs::write(out, buf)?;
    for fit in &result.fits {
        match fit.slope {
            Some(s) => println!("{} slope {s:.4}", fit.sampler),
            None => println!("{} slope undefined", fit.sampler),
        }
    }
    Ok(())
}

fn train(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<()> {
    let report = train_run_with(cfg, |r| {
        if !quiet {
            eprintln!("epoch {:>7}  loss {:.6e}  e_inf {:.4e}  e_2 {:.4e}", r.epoch, r.loss, r.e_inf, r.e_2);
        }
    })?;
    for e in &report.lbfgs_failures {
        eprintln!("lbfgs line search failed at epoch {e}; step skipped");
    }
    for path in report.write_artifacts(out)? {
        println!("{}", path.display());
    }
    Ok(())
}

/// Final row of a metric CSV as `(epoch, e_inf, e_2, k_abs_err)`.
fn final_row(path: &Path) -> Result<(String, String, String, Option<String>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.starts_with("epoch,loss,e_inf,e_2") {
        return Err(Error::Parse { path: path.into(), line: 1, msg: "not a metric CSV".into() });
    }
    let count = text.lines().count();
    let last = lines.last().ok_or_else(|| Error::Parse { path: path.into(), line: 2, msg: "no metric rows".into() })?;
    let f: Vec<&str> = last.split(',').collect();
    if f.len() < 4 {
        return Err(Error::Parse { path: path.into(), line: count, msg: "too few fields".into() });
    }
    Ok((f[0].into(), f[2].into(), f[3].into(), f.get(4).map(|s| s.to_string())))
}

fn report(paths: &[PathBuf]) -> Result<()> {
    let mut rows = Vec::new();
    for p in paths {
        let name = p.file_stem().map(|s| s.to_string_lossy().trim_end_matches("_metrics").to_string()).unwrap_or_default();
        rows.push((name, final_row(p)?));
    }
    let with_k = rows.iter().any(|(_, r)| r.3.is_some());
    let mut out = io::stdout().lock();
    writeln!(out, "run,epoch,e_inf,e_2{}", if with_k { ",k_abs_err" } else { "" })?;
    for (name, (epoch, e_inf, e_2, k)) in &rows {
        write!(out, "{name},{epoch},{e_inf},{e_2}")?;
        if with_k {
            write!(out, ",{}", k.as_deref().unwrap_or(""))?;
        }
        writeln!(out)?;
    }
    if rows.len() > 1 {
        let parsed: Vec<(usize, f64)> =
            rows.iter().enumerate().map(|(i, (_, r))| (i, r.2.parse::<f64>().unwrap_or(f64::INFINITY))).collect();
        let best = parsed.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
        writeln!(out, "verdict: {} has the lowest e_2 ({:e})", rows[best.0].0, best.1)?;
    }
    Ok(())
}
