//! `mcs`: configuration-driven solves, studies, verification suites, spectral
//! estimates and matrix export for the mixed-stress Stokes discretization.
//!
//! Exit status: 0 on success, 1 when a solve did not converge or a
//! verification report failed, 2 for invalid input or runtime errors.

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mcs_core::experiment::{
    export_system, run_solve, run_spectrum, run_study, run_verification, write_records, write_reports,
    write_solve_outputs, RunConfig, RunRecord, Suite,
};
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "mcs",
    version,
    about = "Hybridized mixed-stress Stokes solver with auxiliary-space preconditioning"
)]
struct Cli {
    /// TOML run configuration; defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 1 gives bit-reproducible records.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed, overriding `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one configuration and write record.csv, residuals.csv and optionally solution.json.
    Solve,
    /// Run the (k, level) sweep of the `[study]` table and write study.csv.
    Study,
    /// Run a verification suite and write its reports.
    Verify {
        /// identities, constants, preconditioner or all
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
    /// Write K, S, S^∂, B and M_p as MatrixMarket files with a JSON sidecar.
    Export,
    /// Lanczos estimate of the preconditioned spectrum; writes spectrum.csv.
    Spectrum,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_table(cfg: &RunConfig, name: &str, rows: &[RunRecord]) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    let p = cfg.output.dir.join(name);
    write_records(BufWriter::new(File::create(&p)?), rows)?;
    Ok(p)
}

fn print_row(r: &RunRecord) {
    let spec = match (r.lambda_min, r.lambda_max, r.cond) {
        (Some(a), Some(b), Some(c)) => format!(" λ=[{a:.4}, {b:.4}] cond={c:.3}"),
        _ => String::new(),
    };
    let err = r.error.as_deref().map(|e| format!(" error: {e}")).unwrap_or_default();
    println!(
        "k={} level={} {:?}: |T|={} #D={} #IT={} t_tot={:.3}s t_sup={:.3}s t_sol={:.3}s converged={}{spec}{err}",
        r.k, r.level, r.composition, r.triangles, r.dofs, r.iterations, r.t_tot, r.t_sup, r.t_sol, r.converged
    );
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = load(cli)?;
    let failed = |bad: bool| if bad { ExitCode::from(1) } else { ExitCode::SUCCESS };
    match &cli.command {
        Command::Solve => {
            let (rec, sol) = run_solve(&cfg)?;
            print_row(&rec);
            println!("max div {:.3e}, nt-jump {:.3e}", rec.max_div, rec.nt_jump);
            for p in write_solve_outputs(&cfg, &rec, &sol)? {
                println!("wrote {}", p.display());
            }
            if !rec.converged {
                eprintln!("not converged after {} iterations", rec.iterations);
            }
            Ok(failed(!rec.converged))
        }
        Command::Study => {
            let rows = run_study(&cfg);
            rows.iter().for_each(print_row);
            println!("wrote {}", write_table(&cfg, "study.csv", &rows)?.display());
            Ok(failed(rows.iter().any(|r| !r.converged)))
        }
        Command::Verify { suite } => {
            let reports = run_verification(*suite, cfg.seed)?;
            for r in &reports {
                println!("{r}");
            }
            write_reports(&cfg.output.dir.join("verification"), &reports)?;
            let bad: Vec<&str> = reports
                .iter()
                .filter(|r| !r.passed)
                .map(|r| r.experiment.as_str())
                .collect();
            if !bad.is_empty() {
                eprintln!("failed: {}", bad.join(", "));
            }
            Ok(failed(!bad.is_empty()))
        }
        Command::Export => {
            let side = export_system(&cfg, &cfg.output.dir)?;
            println!(
                "wrote {} and system.json to {} (dimension {})",
                side.files.join(", "),
                cfg.output.dir.display(),
                side.dimension
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Spectrum => {
            let rec = run_spectrum(&cfg)?;
            print_row(&rec);
            println!(
                "wrote {}",
                write_table(&cfg, "spectrum.csv", std::slice::from_ref(&rec))?.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
