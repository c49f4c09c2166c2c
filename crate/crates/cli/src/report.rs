//! Convergence tables as CSV and the JSON run metadata that goes next to
//! them.
//!
//! The CSV holds only deterministic columns, so repeated runs with the same
//! configuration produce identical files. Wall times go to the metadata.

use std::io::{self, Write};

use plate_hdg::{ErrorReport, PipelineConfig, Preconditioner, RateTable, SolverConfig};
use serde::Serialize;

pub const CSV_HEADER: [&str; 13] = [
    "k",
    "mesh_kind",
    "n",
    "t",
    "iter",
    "err_theta",
    "rate_theta",
    "err_tgamma",
    "rate_tgamma",
    "err_sigma",
    "rate_sigma",
    "err_omega",
    "rate_omega",
];

pub fn write_csv<W: Write>(table: &RateTable, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for (row, rates) in table.rows.iter().zip(table.rates()) {
        let mut rec = vec![
            table.k.to_string(),
            table.kind.label().to_string(),
            row.n.to_string(),
            format!("{:e}", table.t),
            row.iterations.to_string(),
        ];
        for (err, rate) in row.errors().iter().zip(rates) {
            rec.push(format!("{err:e}"));
            rec.push(rate.map(|r| format!("{r:.4}")).unwrap_or_default());
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// One human-readable line for a single solve; `n` is `-` for meshes read
/// from a file.
pub fn error_line(k: usize, mesh: &str, structured: bool, t: f64, r: &ErrorReport) -> String {
    let n = if structured {
        r.n.to_string()
    } else {
        "-".to_string()
    };
    format!(
        "k={k} mesh={mesh} n={n} t={t:e} iter={} err_theta={:e} err_tgamma={:e} err_sigma={:e} err_omega={:e}",
        r.iterations, r.err_theta, r.err_tgamma, r.err_sigma, r.err_omega
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct Material {
    pub young: f64,
    pub poisson: f64,
    pub kappa: f64,
    pub thickness: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Solver {
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: &'static str,
    pub deflate_kernel: bool,
}

impl From<&SolverConfig> for Solver {
    fn from(c: &SolverConfig) -> Self {
        Solver {
            tol: c.tol,
            max_iter: c.max_iter,
            preconditioner: preconditioner_name(c.preconditioner),
            deflate_kernel: c.deflate_kernel,
        }
    }
}

pub fn preconditioner_name(p: Preconditioner) -> &'static str {
    match p {
        Preconditioner::None => "none",
        Preconditioner::Jacobi => "jacobi",
        Preconditioner::Direct => "direct",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Quadrature {
    pub bilinear: usize,
    pub load: usize,
    pub error: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelTiming {
    pub n: usize,
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub version: &'static str,
    pub git_revision: &'static str,
    pub mesh_kind: &'static str,
    pub k: usize,
    pub ell: usize,
    pub levels: Vec<usize>,
    pub material: Material,
    pub quadrature: Quadrature,
    pub step1_step3_solver: Solver,
    pub step2_solver: Solver,
    pub rescale_r: bool,
    pub threads: usize,
    pub timings: Vec<LevelTiming>,
}

impl Metadata {
    pub fn solvers(cfg: &PipelineConfig) -> (Solver, Solver) {
        ((&cfg.poisson).into(), (&cfg.saddle).into())
    }

    pub fn timings(table: &RateTable) -> Vec<LevelTiming> {
        table
            .rows
            .iter()
            .map(|r| LevelTiming {
                n: r.n,
                wall_time_s: r.wall_time,
            })
            .collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)
    }
}

pub const GIT_REVISION: &str = env!("PLATE_HDG_GIT_REVISION");
