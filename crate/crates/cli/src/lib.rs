//! File formats, reports and the command-line front end for `plate-hdg`.

pub mod export;
pub mod meshio;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("HDG_THREADS must be a non-negative integer, got `{0}`")]
pub struct ThreadsError(pub String);

/// Worker count from the value of `HDG_THREADS`; unset or `0` means one
/// worker per available core.
pub fn parse_threads(var: Option<&str>) -> Result<usize, ThreadsError> {
    match var.map(str::trim) {
        None | Some("") => Ok(0),
        Some(s) => s.parse().map_err(|_| ThreadsError(s.to_string())),
    }
}

/// Sizes the global rayon pool and returns the number of workers in it.
pub fn init_threads(requested: usize) -> usize {
    // only fails if the pool already exists, which leaves it as it was
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(requested)
        .build_global();
    rayon::current_num_threads()
}
