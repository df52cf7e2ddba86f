//! Plain-text mesh files.
//!
//! ```text
//! vemhr-mesh v1
//! <vertex count>
//! <x> <y>                  one line per vertex, 17 significant digits
//! <cell count>
//! <k> <v_0> ... <v_{k-1}>  one line per cell, counterclockwise
//! ```

use std::fmt::Write as _;

use super::{build_topology, PolyMesh};
use crate::error::{Error, Result};
use crate::Point2;

pub const MESH_HEADER: &str = "vemhr-mesh v1";

pub fn write_mesh(mesh: &PolyMesh) -> String {
    let mut out = String::new();
    out.push_str(MESH_HEADER);
    out.push('\n');
    let _ = writeln!(out, "{}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.16e} {:.16e}", v.x, v.y);
    }
    let _ = writeln!(out, "{}", mesh.cells.len());
    for c in &mesh.cells {
        let _ = write!(out, "{}", c.vertices.len());
        for v in &c.vertices {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn read_mesh(text: &str) -> Result<PolyMesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: &str| Error::MeshFormat { line, msg: msg.to_string() };

    match lines.next() {
        Some((_, MESH_HEADER)) => {}
        Some((n, _)) => return Err(err(n, "expected header 'vemhr-mesh v1'")),
        None => return Err(err(0, "empty file")),
    }

    let mut count = |what: &str| -> Result<usize> {
        let (n, l) = lines.next().ok_or_else(|| err(0, &format!("missing {what} count")))?;
        l.parse().map_err(|_| err(n, &format!("bad {what} count '{l}'")))
    };
    let nv = count("vertex")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = lines.next().ok_or_else(|| err(0, "truncated vertex list"))?;
        let xy: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| err(n, "bad coordinate"))?;
        if xy.len() != 2 || !xy.iter().all(|x| x.is_finite()) {
            return Err(err(n, "expected two finite coordinates"));
        }
        vertices.push(Point2::new(xy[0], xy[1]));
    }

    let (n, l) = lines.next().ok_or_else(|| err(0, "missing cell count"))?;
    let nc: usize = l.parse().map_err(|_| err(n, "bad cell count"))?;
    let mut loops = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (n, l) = lines.next().ok_or_else(|| err(0, "truncated cell list"))?;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| err(n, "bad vertex id"))?;
        match ids.split_first() {
            Some((&k, rest)) if k == rest.len() => loops.push(rest.to_vec()),
            _ => return Err(err(n, "vertex count does not match the id list")),
        }
    }
    if let Some((n, _)) = lines.next() {
        return Err(err(n, "trailing content"));
    }
    build_topology(vertices, loops)
}
