//! Argument definitions and command implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use nodalquad_core::analysis::{run_convergence_study_observed, StudyConfig, StudyError, StudyReport, StudyRows};
use nodalquad_core::exec::{Clock, NoClock};
use nodalquad_core::mesh::{make_mesh, MeshFamily, DEFAULT_RANDOM_DELTA, DEFAULT_TRAPEZOID_DELTA};
use nodalquad_core::quadrature::DEFAULT_ORDER;
use nodalquad_core::verify::{verify_elements, verify_exact_sequence, QuadFamily};

use crate::config::{texts, FileConfig, MeshKind};
use crate::io::{matrix_market, mesh_document, mesh_from_document, read_mesh, write_mesh};
use crate::parallel::{RayonExecutor, WallClock};
use crate::params::{
    brinkman_rows, default_brinkman_rows, default_scalar_rows, parse_ns, scalar_row, split_list,
};
use crate::report::{certificate_markdown, render_study, sequence_markdown, to_json, to_markdown, Format};

/// Failure classes mapped to exit codes 2 and 1.
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
    /// A verification ran but some property failed.
    Failed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Failed => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Usage(e.into())
}

fn numerical<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Numerical(e.into())
}

#[derive(Debug, Parser)]
#[command(name = "nodalquad", version, about = "Nodal nonconforming quadrilateral elements: studies, verification, meshes")]
pub struct Cli {
    /// Worker threads for per-cell work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a convergence study over a list of mesh sizes.
    #[command(subcommand)]
    Study(StudyCommand),
    /// Check element identities or the discrete exact sequence.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Export or import meshes as JSON.
    #[command(subcommand)]
    Mesh(MeshCommand),
}

#[derive(Debug, Subcommand)]
pub enum StudyCommand {
    /// eps^2 (D^2 u, D^2 v) + (grad u, grad v) = (f, v) with clamped boundary.
    Scalar {
        /// Comma-separated eps values, e.g. `1,2^-6,0`; also `biharmonic`
        /// and `poisson`.
        #[arg(long)]
        eps: Option<String>,
        /// Exact solution sin^2(k pi x) sin^2(k pi y).
        #[arg(long)]
        frequency: Option<f64>,
        #[command(flatten)]
        common: StudyArgs,
    },
    /// -nu Laplace u + alpha u + grad p = f, div u = g with no-slip boundary.
    Brinkman {
        /// Comma-separated nu values, paired entrywise with --alpha.
        #[arg(long)]
        nu: Option<String>,
        /// Comma-separated alpha values; one value is broadcast.
        #[arg(long)]
        alpha: Option<String>,
        #[command(flatten)]
        common: StudyArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct MeshArgs {
    #[arg(long, value_enum)]
    pub mesh: Option<MeshKind>,
    /// Perturbation amplitude relative to h (default 0.2).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Seed of the random mesh family.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Comma-separated cells per side (default 4,8,16,32,64).
    #[arg(long)]
    pub n: Option<String>,
    /// Gauss points per axis for assembly.
    #[arg(long)]
    pub quad_order: Option<usize>,
    /// Gauss points per axis for error norms (default assembly + 2).
    #[arg(long)]
    pub error_quad_order: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Report file; the format follows --format or the extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with defaults for the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write every assembled matrix to this directory (MatrixMarket).
    #[arg(long)]
    pub dump_matrix: Option<PathBuf>,
    /// Record wall-clock times in the report (makes output nondeterministic).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Determinant oracles and basis identities on random cells.
    Element {
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "random")]
        family: QuadFamilyArg,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ranks of curl_h and div_h on a mesh.
    Sequence {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum QuadFamilyArg {
    Rect,
    Trap,
    Random,
    Sweep,
}

impl From<QuadFamilyArg> for QuadFamily {
    fn from(f: QuadFamilyArg) -> Self {
        match f {
            QuadFamilyArg::Rect => QuadFamily::Rect,
            QuadFamilyArg::Trap => QuadFamily::Trap,
            QuadFamilyArg::Random => QuadFamily::Random,
            QuadFamilyArg::Sweep => QuadFamily::Sweep,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum MeshCommand {
    /// Generate a mesh and write it as JSON (stdout without --out).
    Export {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read a JSON mesh, check it, and print a summary.
    Import {
        file: PathBuf,
        /// Write the mesh back out after validation.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn mesh_family(kind: MeshKind, delta: Option<f64>, seed: Option<u64>) -> CliResult<MeshFamily> {
    if let Some(d) = delta {
        if !(0.0..=0.25).contains(&d) {
            return Err(usage(anyhow!("--delta {d} outside [0, 0.25]")));
        }
    }
    Ok(match kind {
        MeshKind::Rect => MeshFamily::Rectangular,
        MeshKind::Trap => MeshFamily::Trapezoidal { delta: delta.unwrap_or(DEFAULT_TRAPEZOID_DELTA) },
        MeshKind::Random => {
            MeshFamily::Random { delta: delta.unwrap_or(DEFAULT_RANDOM_DELTA), seed: seed.unwrap_or(1) }
        }
    })
}

fn format_for(format: Option<Format>, out: &Path) -> Format {
    format.unwrap_or_else(|| match out.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        Some("md") => Format::Md,
        _ => Format::Csv,
    })
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(numerical)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(numerical)
}

/// Resolves flags against the optional config file.
pub fn study_config(command: &StudyCommand) -> CliResult<(StudyConfig, StudyArgs, FileConfig)> {
    let common = match command {
        StudyCommand::Scalar { common, .. } | StudyCommand::Brinkman { common, .. } => common.clone(),
    };
    let file = match &common.config {
        Some(p) => FileConfig::load(p).map_err(usage)?,
        None => FileConfig::default(),
    };
    let (rows, frequency) = match command {
        StudyCommand::Scalar { eps, frequency, .. } => {
            let list = eps.as_deref().map(split_list).or_else(|| texts(&file.eps));
            let rows = match list {
                Some(l) => l.iter().map(|t| scalar_row(t)).collect::<anyhow::Result<Vec<_>>>().map_err(usage)?,
                None => default_scalar_rows(),
            };
            let k = frequency.or(file.frequency).unwrap_or(1.0);
            if !(k > 0.0 && k.fract() == 0.0) {
                return Err(usage(anyhow!("--frequency must be a positive integer, got {k}")));
            }
            (StudyRows::Scalar(rows), k)
        }
        StudyCommand::Brinkman { nu, alpha, .. } => {
            let nu = nu.as_deref().map(split_list).or_else(|| texts(&file.nu));
            let alpha = alpha.as_deref().map(split_list).or_else(|| texts(&file.alpha));
            let rows = match (nu, alpha) {
                (None, None) => default_brinkman_rows(),
                (nu, alpha) => brinkman_rows(
                    &nu.unwrap_or_else(|| vec!["1".into()]),
                    &alpha.unwrap_or_else(|| vec!["1".into()]),
                )
                .map_err(usage)?,
            };
            (StudyRows::Brinkman(rows), 1.0)
        }
    };
    let kind = common.mesh.mesh.or(file.mesh).unwrap_or(MeshKind::Rect);
    let family = mesh_family(kind, common.mesh.delta.or(file.delta), common.mesh.seed.or(file.seed))?;
    let ns = match common.n.as_deref() {
        Some(t) => parse_ns(t).map_err(usage)?,
        None => {
            let ns = file.n.clone().unwrap_or_else(|| vec![4, 8, 16, 32, 64]);
            parse_ns(&ns.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")).map_err(usage)?
        }
    };
    let quad_order = common.quad_order.or(file.quad_order).unwrap_or(DEFAULT_ORDER);
    if !(2..=8).contains(&quad_order) {
        return Err(usage(anyhow!("--quad-order {quad_order} outside 2..=8")));
    }
    let error_quad_order = common.error_quad_order.or(file.error_quad_order).unwrap_or(quad_order + 2);
    let config = StudyConfig { rows, family, ns, quad_order, error_quad_order, frequency };
    config.validate().map_err(usage)?;
    Ok((config, common, file))
}

fn sanitize(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

pub fn run_study(command: &StudyCommand) -> CliResult<StudyReport> {
    let (config, common, file) = study_config(command)?;
    let problem = match config.rows {
        StudyRows::Scalar(_) => "scalar",
        StudyRows::Brinkman(_) => "brinkman",
    };
    let dump = common.dump_matrix.clone();
    if let Some(d) = &dump {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display())).map_err(usage)?;
    }
    let mut dump_error = None;
    let observe = |n: usize, label: &str, sys: &nodalquad_core::assembly::SparseSystem| {
        if let Some(d) = &dump {
            let path = d.join(format!("{problem}_{}_n{n}.mtx", sanitize(label)));
            if let Err(e) = fs::write(&path, matrix_market(&sys.matrix)) {
                dump_error.get_or_insert(anyhow!("writing {}: {e}", path.display()));
            }
        }
    };
    let result = if common.timings {
        study_with_clock(&config, &WallClock::default(), observe)
    } else {
        study_with_clock(&config, &NoClock, observe)
    };
    let report = result.map_err(|e| match e {
        StudyError::Config(_) => usage(e),
        _ => numerical(e),
    })?;
    if let Some(e) = dump_error {
        return Err(numerical(e));
    }
    print!("{}", to_markdown(&report));
    if let Some(out) = common.out.clone().or(file.out) {
        let format = format_for(common.format.or(file.format), &out);
        write_file(&out, &render_study(&report, format).map_err(numerical)?)?;
    } else if common.format.is_some() {
        return Err(usage(anyhow!("--format needs --out")));
    }
    Ok(report)
}

fn study_with_clock<C: Clock, O>(config: &StudyConfig, clock: &C, observe: O) -> Result<StudyReport, StudyError>
where
    O: FnMut(usize, &str, &nodalquad_core::assembly::SparseSystem),
{
    run_convergence_study_observed(config, &RayonExecutor, clock, observe)
}

pub fn run_verify(command: &VerifyCommand) -> CliResult<bool> {
    let (markdown, json, passed, format, out) = match command {
        VerifyCommand::Element { samples, seed, family, format, out } => {
            if *samples == 0 {
                return Err(usage(anyhow!("--samples must be positive")));
            }
            let cert = verify_elements((*family).into(), *samples, *seed).map_err(numerical)?;
            (certificate_markdown(&cert), to_json(&cert).map_err(numerical)?, cert.passed, *format, out.clone())
        }
        VerifyCommand::Sequence { mesh, n, format, out } => {
            if *n < 2 {
                return Err(usage(anyhow!("--n must be at least 2")));
            }
            let family = mesh_family(mesh.mesh.unwrap_or(MeshKind::Rect), mesh.delta, mesh.seed)?;
            let m = make_mesh(*n, family).map_err(numerical)?;
            let report = verify_exact_sequence(&m, &RayonExecutor).map_err(numerical)?;
            (sequence_markdown(&report), to_json(&report).map_err(numerical)?, report.exact, *format, out.clone())
        }
    };
    print!("{markdown}");
    if let Some(out) = out {
        let text = match format.unwrap_or_else(|| format_for(None, &out)) {
            Format::Json | Format::Csv => json,
            Format::Md => markdown,
        };
        write_file(&out, &text)?;
    }
    Ok(passed)
}

pub fn run_mesh(command: &MeshCommand) -> CliResult<()> {
    match command {
        MeshCommand::Export { mesh, n, out } => {
            if *n < 2 {
                return Err(usage(anyhow!("--n must be at least 2")));
            }
            let family = mesh_family(mesh.mesh.unwrap_or(MeshKind::Rect), mesh.delta, mesh.seed)?;
            let m = make_mesh(*n, family).map_err(numerical)?;
            let doc = mesh_document(&m, Some(*n));
            match out {
                Some(p) => write_mesh(p, &doc).map_err(numerical)?,
                None => print!("{}", to_json(&doc).map_err(numerical)?),
            }
        }
        MeshCommand::Import { file, out } => {
            let doc = read_mesh(file).map_err(usage)?;
            let n = doc.n;
            let mesh = mesh_from_document(doc).map_err(|e| usage(e.context("invalid mesh document")))?;
            let doc = mesh_document(&mesh, n);
            println!(
                "{}: {} vertices, {} cells, {} edges, euler {}, hash {}",
                file.display(),
                mesh.vertices.len(),
                mesh.num_cells(),
                mesh.edges.len(),
                mesh.euler_characteristic(),
                doc.geometry_hash.as_deref().unwrap_or("")
            );
            if let Some(p) = out {
                write_mesh(p, &doc).map_err(numerical)?;
            }
        }
    }
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return 2;
        }
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let result = match &cli.command {
        Command::Study(c) => run_study(c).map(|_| ()),
        Command::Verify(c) => match run_verify(c) {
            Ok(true) => Ok(()),
            Ok(false) => Err(CliError::Failed),
            Err(e) => Err(e),
        },
        Command::Mesh(c) => run_mesh(c),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(err) => eprintln!("usage error: {err:#}"),
                CliError::Numerical(err) => eprintln!("error: {err:#}"),
                CliError::Failed => eprintln!("verification failed"),
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("nodalquad").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults_resolve() {
        let Command::Study(c) = parse(&["study", "scalar"]).command else { panic!() };
        let (cfg, _, _) = study_config(&c).unwrap();
        assert_eq!(cfg.ns, [4, 8, 16, 32, 64]);
        assert_eq!((cfg.quad_order, cfg.error_quad_order), (4, 6));
        assert_eq!(cfg.family, MeshFamily::Rectangular);
        let StudyRows::Scalar(rows) = cfg.rows else { panic!() };
        assert_eq!(rows.len(), 5);
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("nodalquad-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.toml");
        fs::write(&path, "mesh = \"trap\"\nn = [4, 8]\ndelta = 0.1\nnu = [1]\nalpha = [0]\n").unwrap();
        let p = path.to_str().unwrap();
        let Command::Study(c) = parse(&["study", "brinkman", "--config", p, "--n", "2,4"]).command else { panic!() };
        let (cfg, _, _) = study_config(&c).unwrap();
        assert_eq!(cfg.ns, [2, 4]);
        assert_eq!(cfg.family, MeshFamily::Trapezoidal { delta: 0.1 });
        let StudyRows::Brinkman(rows) = cfg.rows else { panic!() };
        assert_eq!(rows[0].label, "Stokes");
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let Command::Study(c) = parse(&["study", "scalar", "--eps", "abc"]).command else { panic!() };
        assert_eq!(study_config(&c).unwrap_err().exit_code(), 2);
        let Command::Study(c) = parse(&["study", "scalar", "--mesh", "trap", "--delta", "0.5"]).command else {
            panic!()
        };
        assert_eq!(study_config(&c).unwrap_err().exit_code(), 2);
    }
}
