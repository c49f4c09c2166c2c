//! `plate-hdg`: mesh generation, single solves and convergence studies.
//!
//! Exit status is 0 on success, 1 for invalid configuration and 2 when a
//! solve fails.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use plate_hdg::verification::{run_convergence, run_level, ConvergenceSetup, ERROR_QUAD_DEGREE};
use plate_hdg::{
    Discretization, MaterialParams, Mesh, MeshKind, PipelineConfig, Preconditioner, SpaceConfig,
};
use plate_hdg_cli::export::export_trace_operators;
use plate_hdg_cli::meshio::{load_mesh, perturb, save_mesh};
use plate_hdg_cli::report::{self, Metadata};
use plate_hdg_cli::{init_threads, parse_threads};

#[derive(Parser)]
#[command(
    name = "plate-hdg",
    version,
    about = "HDG solver for Reissner-Mindlin plates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a structured mesh of the unit square.
    Mesh {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Subdivisions per side.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Random displacement of interior vertices, relative to the shortest edge.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve the manufactured problem once and print the errors.
    Solve {
        #[arg(long, value_enum, default_value_t = Kind::Tri)]
        mesh: Kind,
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Read the mesh from a file instead of generating it.
        #[arg(long)]
        mesh_file: Option<PathBuf>,
        #[command(flatten)]
        opts: SolveOpts,
        /// Write the condensed operators of the three stages as Matrix Market files.
        #[arg(long)]
        export_matrix: Option<PathBuf>,
    },
    /// Run a convergence study over structured meshes.
    Convergence {
        #[arg(long, value_enum, default_value_t = Kind::Tri)]
        mesh: Kind,
        /// Comma-separated subdivision counts.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        levels: Vec<usize>,
        #[command(flatten)]
        opts: SolveOpts,
        /// CSV table path.
        #[arg(long)]
        out: PathBuf,
        /// Metadata path; defaults to the CSV path with a `.json` extension.
        #[arg(long)]
        meta: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Tri,
    Quad,
}

impl From<Kind> for MeshKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Tri => MeshKind::Triangle,
            Kind::Quad => MeshKind::Quadrilateral,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Pc {
    None,
    Jacobi,
    Direct,
}

impl From<Pc> for Preconditioner {
    fn from(p: Pc) -> Self {
        match p {
            Pc::None => Preconditioner::None,
            Pc::Jacobi => Preconditioner::Jacobi,
            Pc::Direct => Preconditioner::Direct,
        }
    }
}

#[derive(Args)]
struct SolveOpts {
    /// Polynomial degree.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Rotation trace degree, max(1, k-1) <= ell <= k; defaults to k.
    #[arg(long)]
    ell: Option<usize>,
    /// Plate thickness in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    e: f64,
    #[arg(long, default_value_t = 0.3)]
    nu: f64,
    #[arg(long, default_value_t = 5.0 / 6.0)]
    kappa: f64,
    /// Relative residual tolerance of every CG solve.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Preconditioner of the Step Two trace solve.
    #[arg(long, value_enum, default_value_t = Pc::Direct)]
    preconditioner: Pc,
    /// Preconditioner of the Step One and Step Three solves.
    #[arg(long, value_enum, default_value_t = Pc::Jacobi)]
    poisson_preconditioner: Pc,
}

enum Failure {
    Config(String),
    Solver(String),
}

fn config<E: ToString>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

fn solver<E: ToString>(e: E) -> Failure {
    Failure::Solver(e.to_string())
}

fn setup(o: &SolveOpts, kind: MeshKind) -> Result<ConvergenceSetup, Failure> {
    let spaces = SpaceConfig::new(o.k, o.ell.unwrap_or(o.k)).map_err(config)?;
    let params = MaterialParams::new(o.e, o.nu, o.kappa, o.t).map_err(config)?;
    let mut cfg = PipelineConfig::default();
    for (s, pc) in [
        (&mut cfg.poisson, o.poisson_preconditioner),
        (&mut cfg.saddle, o.preconditioner),
    ] {
        s.tol = o.tol;
        s.max_iter = o.max_iter;
        s.preconditioner = pc.into();
        s.validate().map_err(config)?;
    }
    if o.max_iter == 0 {
        return Err(config("max-iter must be at least 1"));
    }
    Ok(ConvergenceSetup {
        params,
        kind,
        spaces,
        config: cfg,
        error_degree: ERROR_QUAD_DEGREE,
    })
}

fn check_n(n: usize) -> Result<(), Failure> {
    if n == 0 {
        return Err(config("n must be at least 1"));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let threads =
        init_threads(parse_threads(std::env::var("HDG_THREADS").ok().as_deref()).map_err(config)?);
    match cli.command {
        Command::Mesh {
            kind,
            n,
            out,
            jitter,
            seed,
        } => {
            check_n(n)?;
            if !(0.0..0.5).contains(&jitter) {
                return Err(config(format!("jitter must lie in [0, 0.5), got {jitter}")));
            }
            let mesh = perturb(&Mesh::structured(kind.into(), n), jitter, seed).map_err(config)?;
            save_mesh(&mesh, &out).map_err(|e| config(format!("{}: {e}", out.display())))?;
        }
        Command::Solve {
            mesh,
            n,
            mesh_file,
            opts,
            export_matrix,
        } => {
            let s = setup(&opts, mesh.into())?;
            let (m, label, n) = match &mesh_file {
                Some(p) => {
                    let m = load_mesh(p).map_err(|e| config(format!("{}: {e}", p.display())))?;
                    (m, p.display().to_string(), 0)
                }
                None => {
                    check_n(n)?;
                    (Mesh::structured(s.kind, n), s.kind.label().to_string(), n)
                }
            };
            let rep = run_level(&s, &m, n).map_err(solver)?;
            println!(
                "{}",
                report::error_line(s.spaces.k(), &label, mesh_file.is_none(), opts.t, &rep)
            );
            if let Some(dir) = export_matrix {
                let disc = Discretization::new(&m, s.spaces).map_err(solver)?;
                export_trace_operators(&disc, &s.params, &s.config.assembly, &dir)
                    .map_err(solver)?;
            }
        }
        Command::Convergence {
            mesh,
            levels,
            opts,
            out,
            meta,
        } => {
            let s = setup(&opts, mesh.into())?;
            if levels.is_empty() {
                return Err(config("levels must not be empty"));
            }
            for &n in &levels {
                check_n(n)?;
            }
            let table = run_convergence(&s, &levels).map_err(solver)?;
            let io =
                |p: &PathBuf, e: &dyn std::fmt::Display| config(format!("{}: {e}", p.display()));
            let f = File::create(&out).map_err(|e| io(&out, &e))?;
            report::write_csv(&table, BufWriter::new(f)).map_err(|e| io(&out, &e))?;
            let (poisson, saddle) = Metadata::solvers(&s.config);
            let md = Metadata {
                version: env!("CARGO_PKG_VERSION"),
                git_revision: report::GIT_REVISION,
                mesh_kind: s.kind.label(),
                k: s.spaces.k(),
                ell: s.spaces.ell(),
                levels: levels.clone(),
                material: report::Material {
                    young: opts.e,
                    poisson: opts.nu,
                    kappa: opts.kappa,
                    thickness: opts.t,
                },
                quadrature: report::Quadrature {
                    bilinear: 2 * s.spaces.k() + 2,
                    load: s.config.assembly.load_degree(s.spaces.k()),
                    error: s.error_degree,
                },
                step1_step3_solver: poisson,
                step2_solver: saddle,
                rescale_r: s.config.assembly.rescale_r,
                threads,
                timings: Metadata::timings(&table),
            };
            let meta = meta.unwrap_or_else(|| out.with_extension("json"));
            let f = File::create(&meta).map_err(|e| io(&meta, &e))?;
            md.write(BufWriter::new(f)).map_err(|e| io(&meta, &e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver failure: {m}");
            ExitCode::from(2)
        }
    }
}
