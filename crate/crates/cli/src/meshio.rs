//! Text mesh files.
//!
//! ```text
//! polymesh 1
//! vertices V
//! x y            (V lines)
//! elements N
//! m v0 .. v(m-1) (N lines, counter-clockwise)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Coordinates are
//! written in shortest round-trip form, so a save/load cycle is bit-exact.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use plate_hdg::{Mesh, MeshError, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid mesh: {0}")]
    Topology(#[from] MeshError),
}

pub fn write_mesh<W: Write>(mesh: &Mesh, w: &mut W) -> io::Result<()> {
    writeln!(w, "polymesh 1")?;
    writeln!(w, "vertices {}", mesh.n_vertices())?;
    for v in &mesh.vertices {
        writeln!(w, "{} {}", v.x, v.y)?;
    }
    writeln!(w, "elements {}", mesh.n_elements())?;
    for el in &mesh.elements {
        write!(w, "{}", el.vertices.len())?;
        for v in &el.vertices {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mesh(mesh, &mut w)?;
    w.flush()
}

pub fn load_mesh(path: &Path) -> Result<Mesh, MeshFileError> {
    read_mesh(BufReader::new(File::open(path)?))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
struct Lines<R> {
    inner: io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self, what: &str) -> Result<(usize, String), MeshFileError> {
        loop {
            match self.inner.next() {
                None => {
                    return Err(MeshFileError::Parse {
                        line: self.line + 1,
                        message: format!("unexpected end of file, expected {what}"),
                    })
                }
                Some(l) => {
                    self.line += 1;
                    let l = l?;
                    let t = l.trim();
                    if !t.is_empty() && !t.starts_with('#') {
                        return Ok((self.line, t.to_string()));
                    }
                }
            }
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshFileError {
    MeshFileError::Parse {
        line,
        message: message.into(),
    }
}

fn count_line<R: BufRead>(lines: &mut Lines<R>, keyword: &str) -> Result<usize, MeshFileError> {
    let (n, l) = lines.next_line(&format!("`{keyword} <count>`"))?;
    let mut it = l.split_whitespace();
    match (it.next(), it.next().map(str::parse::<usize>), it.next()) {
        (Some(k), Some(Ok(c)), None) if k == keyword => Ok(c),
        _ => Err(parse_err(
            n,
            format!("expected `{keyword} <count>`, found `{l}`"),
        )),
    }
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<Mesh, MeshFileError> {
    let mut lines = Lines {
        inner: r.lines(),
        line: 0,
    };
    let (n, header) = lines.next_line("header `polymesh 1`")?;
    if header.split_whitespace().collect::<Vec<_>>() != ["polymesh", "1"] {
        return Err(parse_err(
            n,
            format!("expected header `polymesh 1`, found `{header}`"),
        ));
    }
    let nv = count_line(&mut lines, "vertices")?;
    let mut points: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = lines.next_line("a vertex line `x y`")?;
        let vals: Vec<&str> = l.split_whitespace().collect();
        let parsed: Option<Vec<f64>> = vals.iter().map(|s| s.parse::<f64>().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 && v.iter().all(|c| c.is_finite()) => points.push([v[0], v[1]]),
            _ => {
                return Err(parse_err(
                    n,
                    format!("expected two finite coordinates, found `{l}`"),
                ))
            }
        }
    }
    let ne = count_line(&mut lines, "elements")?;
    let mut loops = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (n, l) = lines.next_line("an element line `m v0 .. v(m-1)`")?;
        let parsed: Option<Vec<usize>> = l
            .split_whitespace()
            .map(|s| s.parse::<usize>().ok())
            .collect();
        let vals = parsed
            .ok_or_else(|| parse_err(n, format!("expected non-negative integers, found `{l}`")))?;
        let (m, ids) = vals
            .split_first()
            .ok_or_else(|| parse_err(n, "empty element line"))?;
        if *m != ids.len() {
            return Err(parse_err(
                n,
                format!("element declares {m} vertices but lists {}", ids.len()),
            ));
        }
        if let Some(&bad) = ids.iter().find(|&&v| v >= nv) {
            return Err(parse_err(
                n,
                format!("vertex id {bad} out of range (file has {nv} vertices)"),
            ));
        }
        loops.push(ids.to_vec());
    }
    if let Ok((n, l)) = lines.next_line("") {
        return Err(parse_err(n, format!("unexpected trailing content `{l}`")));
    }
    let mesh = Mesh::from_polygons(points, loops)?;
    if let Some(e) = (0..mesh.n_elements()).find(|&e| !mesh.is_convex(e)) {
        return Err(MeshFileError::Parse {
            line: 0,
            message: format!("element {e} is not strictly convex"),
        });
    }
    Ok(mesh)
}

/// Moves every interior vertex by a uniform random offset of at most
/// `amount` times the shortest edge length in each coordinate. Boundary
/// vertices stay put, so the domain is unchanged.
pub fn perturb(mesh: &Mesh, amount: f64, seed: u64) -> Result<Mesh, MeshError> {
    let hmin = mesh
        .edges
        .iter()
        .map(|e| e.length)
        .fold(f64::INFINITY, f64::min);
    let mut on_boundary = vec![false; mesh.n_vertices()];
    for e in mesh.boundary_edges() {
        on_boundary[e.vertices[0]] = true;
        on_boundary[e.vertices[1]] = true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = mesh
        .vertices
        .iter()
        .zip(&on_boundary)
        .map(|(v, &b)| {
            if b || amount == 0.0 {
                [v.x, v.y]
            } else {
                let d = amount * hmin;
                [
                    v.x + d * rng.gen_range(-1.0..1.0),
                    v.y + d * rng.gen_range(-1.0..1.0),
                ]
            }
        })
        .collect();
    let loops = mesh.elements.iter().map(|e| e.vertices.clone()).collect();
    Mesh::from_polygons(points, loops)
}
