//! `dpw`: runs surface jobs and splits loop files.

use clap::{Args, Parser, Subcommand};
use dpw_core::factorization::{FactorizationError, IwasawaConfig};
use dpw_core::io::loopfile::{factorize_text, write_loop, LoopFileError};
use dpw_core::io::report::{RunReport, Status};
use dpw_core::io::{load_config, run_job, JobError, JobSpec, Verb};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dpw", version, about = "Loop-group construction of spherical frontals and CMC surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a job, run its oracles, classify singularities and write mesh and report.
    Solve(JobArgs),
    /// Classify singularities and trace the singular locus; no oracles, no mesh.
    Classify(JobArgs),
    /// Run the configured oracles only.
    Verify(JobArgs),
    /// Split a loop file into unitary and positive factors.
    Factorize(FactorizeArgs),
}

#[derive(Args)]
struct JobArgs {
    /// Job file (TOML).
    config: PathBuf,
    /// Mesh path, overriding `output.mesh`.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Report path, overriding `output.report`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Grid points along x, overriding `grid.nx`.
    #[arg(long)]
    nx: Option<usize>,
    /// Grid points along y, overriding `grid.ny`.
    #[arg(long)]
    ny: Option<usize>,
    /// Print nothing on success.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct FactorizeArgs {
    /// Loop coefficient file.
    input: PathBuf,
    /// Directory for `<stem>.unitary.loop` and `<stem>.plus.loop`; defaults to the input's directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Truncation order of the factors.
    #[arg(long)]
    n_trunc: Option<usize>,
    /// Residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve(a) => job(&a, Verb::Solve),
        Command::Classify(a) => job(&a, Verb::Classify),
        Command::Verify(a) => job(&a, Verb::Verify),
        Command::Factorize(a) => factorize(&a),
    };
    ExitCode::from(code)
}

fn absolute(p: &Path) -> PathBuf {
    std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
}

fn load(args: &JobArgs) -> Result<JobSpec, JobError> {
    let mut spec = load_config(&args.config)?;
    if let Some(m) = &args.mesh {
        spec.output.mesh = Some(absolute(m).display().to_string());
    }
    if let Some(r) = &args.report {
        spec.output.report = Some(absolute(r).display().to_string());
    }
    if let Some(nx) = args.nx {
        spec.grid.nx = nx;
    }
    if let Some(ny) = args.ny {
        spec.grid.ny = ny;
    }
    spec.grid_spec()?;
    spec.check_output_dirs()?;
    Ok(spec)
}

fn job(args: &JobArgs, verb: Verb) -> u8 {
    let out = load(args).and_then(|spec| run_job(&spec, verb));
    match out {
        Ok(out) => {
            let code = out.exit_code();
            if !args.quiet || code != 0 {
                print_summary(&out.report);
            }
            code as u8
        }
        Err(e) => {
            eprintln!("dpw: {e}");
            e.exit_code() as u8
        }
    }
}

fn print_summary(r: &RunReport) {
    println!("{} {} ({} surface): {}", r.verb, r.kind, r.surface, status_name(r.status));
    println!(
        "  splitting: {} points, {} failed, max residual {:.3e}",
        r.iwasawa.points, r.iwasawa.failures, r.iwasawa.max_residual
    );
    for w in &r.warnings {
        println!("  warning: {w}");
    }
    for o in &r.oracles {
        println!("  oracle {}: {} (value {:.3e}, tolerance {:.3e}; {})", o.name, status_name(o.status), o.value, o.tolerance, o.detail);
    }
    for s in &r.singularities {
        let note = s.note.as_deref().map(|n| format!(" [{n}]")).unwrap_or_default();
        println!("  point ({:.6}, {:.6}): {}{} via {}", s.x, s.y, s.label, note, s.criterion);
    }
    if r.locus.polylines > 0 {
        println!("  singular locus: {} polylines, length {:.4}", r.locus.polylines, r.locus.length);
    }
    if let Some(c) = &r.cone {
        println!("  cone: strictly convex {}, c in [{:.4}, {:.4}]", c.strictly_convex, c.c_min, c.c_max);
    }
    if let Some(m) = &r.artifacts.mesh {
        println!("  mesh: {m}");
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::Skipped => "skipped",
    }
}

fn factorize(args: &FactorizeArgs) -> u8 {
    let text = match std::fs::read_to_string(&args.input) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("dpw: cannot read {}: {e}", args.input.display());
            return 2;
        }
    };
    let mut cfg = IwasawaConfig::default();
    if let Some(n) = args.n_trunc {
        if n == 0 {
            eprintln!("dpw: --n-trunc must be positive");
            return 2;
        }
        cfg.n_trunc = n;
    }
    if let Some(t) = args.tol {
        if !(t > 0.0 && t.is_finite()) {
            eprintln!("dpw: --tol must be positive and finite");
            return 2;
        }
        cfg.iwasawa_tol = t;
    }
    let res = match factorize_text(&text, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("dpw: {}: {e}", args.input.display());
            return match e {
                LoopFileError::Line { .. } | LoopFileError::Empty => 2,
                LoopFileError::Factorization(FactorizationError::NotTwisted(_) | FactorizationError::Determinant { .. }) => 2,
                LoopFileError::Factorization(_) => 3,
            };
        }
    };
    let dir = args
        .out_dir
        .clone()
        .or_else(|| args.input.parent().map(Path::to_path_buf))
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or_else(|| PathBuf::from("."));
    let stem = args.input.file_stem().map_or("loop".into(), |s| s.to_string_lossy().into_owned());
    let r = &res.residual;
    println!("rho = {:.17e}", res.rho);
    println!(
        "residual: reconstruction {:.3e}, unitarity {:.3e}, determinant {:.3e}, twisting {:.3e}",
        r.reconstruction, r.unitarity, r.determinant, r.twisting
    );
    for (suffix, l) in [("unitary", &res.unitary_part), ("plus", &res.plus_part)] {
        let path = dir.join(format!("{stem}.{suffix}.loop"));
        if let Err(e) = std::fs::write(&path, write_loop(l)) {
            eprintln!("dpw: writing {}: {e}", path.display());
            return 2;
        }
        println!("wrote {}", path.display());
    }
    0
}
