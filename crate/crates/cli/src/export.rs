//! Matrix Market export of the condensed trace operators.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use plate_hdg::assembly::BlockSystem;
use plate_hdg::solver::condense;
use plate_hdg::sparse::CsrMatrix;
use plate_hdg::{
    assemble_step1, assemble_step2, assemble_step3, AssemblyError, AssemblyOptions, DiscreteField,
    Discretization, MaterialParams, PipelineError, Rank,
};

/// Coordinate format, general storage, 1-based indices.
pub fn write_matrix_market<W: Write>(a: &CsrMatrix, w: &mut W) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows, a.ncols, a.nnz())?;
    for i in 0..a.nrows {
        for (j, v) in a.row(i) {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// The matrices do not depend on the loads, so every stage is assembled
/// with zero data.
fn stage_systems(
    disc: &Discretization,
    params: &MaterialParams,
    opts: &AssemblyOptions,
) -> Result<[BlockSystem; 3], PipelineError> {
    let k = disc.k();
    let ne = disc.mesh.n_elements();
    let l = DiscreteField::zeros(Rank::Vector2, k - 1, ne);
    let theta = DiscreteField::zeros(Rank::Vector2, k, ne);
    let asm = |step, r: Result<BlockSystem, AssemblyError>| {
        r.map_err(|source| PipelineError::Assembly { step, source })
    };
    Ok([
        asm(1, assemble_step1(disc, &|_| 0.0, opts))?,
        asm(2, assemble_step2(disc, params, &l, &|_| [0.0, 0.0], opts))?,
        asm(3, assemble_step3(disc, params, &theta, &|_| 0.0, opts))?,
    ])
}

/// Writes `step1.mtx`, `step2.mtx` and `step3.mtx` into `dir`.
pub fn export_trace_operators(
    disc: &Discretization,
    params: &MaterialParams,
    opts: &AssemblyOptions,
    dir: &Path,
) -> Result<(), ExportError> {
    std::fs::create_dir_all(dir)?;
    for (i, sys) in stage_systems(disc, params, opts)?.iter().enumerate() {
        let step = i as u8 + 1;
        let cs = condense(sys).map_err(|source| PipelineError::Solver { step, source })?;
        let mut w = BufWriter::new(File::create(dir.join(format!("step{step}.mtx")))?);
        write_matrix_market(&cs.s, &mut w)?;
        w.flush()?;
    }
    Ok(())
}
