//! Line-oriented text format for meshes.
//!
//! ```text
//! polycdg-mesh v1 <family> <level>
//! vertices <n>
//! <id> <x> <y>
//! cells <n>
//! <id> <k> <v0> ... <v{k-1}>
//! edges <n>                      (optional, ignored on load)
//! <id> <v0> <v1> <left> <right|-1>
//! ```
//!
//! Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::path::Path;

use super::{Mesh, MeshFamily};
use crate::error::{Error, Result};

const MAGIC: &str = "polycdg-mesh";
const VERSION: &str = "v1";

pub fn write_mesh_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION} {} {}", mesh.family, mesh.level);
    let _ = writeln!(s, "vertices {}", mesh.n_vertices());
    for (i, v) in mesh.vertices.iter().enumerate() {
        let _ = writeln!(s, "{i} {:.16e} {:.16e}", v.x, v.y);
    }
    let _ = writeln!(s, "cells {}", mesh.n_cells());
    for (i, c) in mesh.cells.iter().enumerate() {
        let _ = write!(s, "{i} {}", c.vertices.len());
        for v in &c.vertices {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "edges {}", mesh.n_edges());
    for (i, e) in mesh.edges.iter().enumerate() {
        let right = e.cell_right.map_or(-1, |r| r as i64);
        let _ = writeln!(s, "{i} {} {} {} {right}", e.v0, e.v1, e.cell_left);
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), write_mesh_string(mesh)).map_err(|e| Error::io(path, e))
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))?;
    read_mesh_str(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            self.last = i + 1;
            return Some((i + 1, t.split_whitespace().collect()));
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.next_tokens().ok_or_else(|| Error::Parse {
            line: self.last + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| err(line, format!("invalid {what} '{tok}'")))
}

fn section_count(lines: &mut Lines<'_>, name: &str) -> Result<usize> {
    let (ln, toks) = lines.expect(&format!("'{name} <n>'"))?;
    if toks.len() != 2 || toks[0] != name {
        return Err(err(ln, format!("expected '{name} <n>'")));
    }
    parse(ln, toks[1], "count")
}

pub fn read_mesh_str(text: &str) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };

    let (ln, header) = lines.expect("header")?;
    if header.len() != 4 || header[0] != MAGIC || header[1] != VERSION {
        return Err(err(ln, format!("expected '{MAGIC} {VERSION} <family> <level>'")));
    }
    let family: MeshFamily = header[2].parse().map_err(|_| err(ln, format!("unknown family '{}'", header[2])))?;
    let level: u32 = parse(ln, header[3], "level")?;

    let nv = section_count(&mut lines, "vertices")?;
    let mut points = Vec::with_capacity(nv);
    for i in 0..nv {
        let (ln, toks) = lines.expect("vertex line")?;
        if toks.len() != 3 {
            return Err(err(ln, format!("vertex line needs 3 fields, found {}", toks.len())));
        }
        let id: usize = parse(ln, toks[0], "vertex id")?;
        if id != i {
            return Err(err(ln, format!("vertex id {id} out of sequence (expected {i})")));
        }
        let x: f64 = parse(ln, toks[1], "coordinate")?;
        let y: f64 = parse(ln, toks[2], "coordinate")?;
        points.push([x, y]);
    }

    let nc = section_count(&mut lines, "cells")?;
    let mut loops = Vec::with_capacity(nc);
    for i in 0..nc {
        let (ln, toks) = lines.expect("cell line")?;
        if toks.len() < 2 {
            return Err(err(ln, "cell line needs an id and a vertex count"));
        }
        let id: usize = parse(ln, toks[0], "cell id")?;
        if id != i {
            return Err(err(ln, format!("cell id {id} out of sequence (expected {i})")));
        }
        let k: usize = parse(ln, toks[1], "vertex count")?;
        if k < 3 {
            return Err(err(ln, format!("cell {id} has {k} vertices (need at least 3)")));
        }
        if toks.len() != k + 2 {
            return Err(err(
                ln,
                format!("cell {id} declares {k} vertices but lists {}", toks.len() - 2),
            ));
        }
        let mut lp = Vec::with_capacity(k);
        for t in &toks[2..] {
            let v: usize = parse(ln, t, "vertex index")?;
            if v >= nv {
                return Err(err(ln, format!("cell {id} references missing vertex {v}")));
            }
            lp.push(v);
        }
        loops.push((ln, lp));
    }

    if let Some((ln, toks)) = lines.next_tokens() {
        if toks.len() != 2 || toks[0] != "edges" {
            return Err(err(ln, "unexpected content after cells section"));
        }
        let ne: usize = parse(ln, toks[1], "count")?;
        for _ in 0..ne {
            let (ln, toks) = lines.expect("edge line")?;
            if toks.len() != 5 {
                return Err(err(ln, format!("edge line needs 5 fields, found {}", toks.len())));
            }
        }
        if let Some((ln, _)) = lines.next_tokens() {
            return Err(err(ln, "unexpected trailing content"));
        }
    }

    let cell_lines: Vec<usize> = loops.iter().map(|(ln, _)| *ln).collect();
    Mesh::from_cells(points, loops.into_iter().map(|(_, l)| l).collect(), family, level).map_err(|e| {
        // Point at the first cell line when incidence construction fails.
        let line = cell_lines.first().copied().unwrap_or(0);
        match e {
            Error::InvalidArgument(m) => err(line, m),
            other => other,
        }
    })
}
