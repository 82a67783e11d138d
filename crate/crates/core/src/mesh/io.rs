//! Line-oriented text format:
//!
//! ```text
//! polymesh 1
//! v <x> <y>
//! c <i0> <i1> ... <ik>
//! b <i> <j> D|N
//! ```
//!
//! Indices are zero-based, cells are counter-clockwise, and every boundary
//! edge needs one `b` line.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{BoundaryLabel, PolyMesh};
use crate::error::{Error, Result};
use crate::Vec2;

pub fn write_mesh(mesh: &PolyMesh) -> String {
    let mut out = String::from("polymesh 1\n");
    for v in mesh.vertices() {
        writeln!(out, "v {:?} {:?}", v.x, v.y).unwrap();
    }
    for c in mesh.cells() {
        out.push('c');
        for i in c {
            write!(out, " {i}").unwrap();
        }
        out.push('\n');
    }
    for ((a, b), label) in mesh.boundary_labels() {
        writeln!(out, "b {a} {b} {label}").unwrap();
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} '{tok}'")))
}

pub fn read_mesh(text: &str) -> Result<PolyMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, "polymesh 1")) => {}
        Some((n, other)) => {
            return Err(parse_err(
                n,
                format!("expected header 'polymesh 1', found '{other}'"),
            ))
        }
        None => return Err(parse_err(1, "empty file")),
    }
    let mut vertices = Vec::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut labels = HashMap::new();
    let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
    for (n, line) in lines {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let x: f64 = field(tok.next(), n, "x coordinate")?;
                let y: f64 = field(tok.next(), n, "y coordinate")?;
                if tok.next().is_some() {
                    return Err(parse_err(n, "trailing fields"));
                }
                vertices.push(Vec2::new(x, y));
            }
            Some("c") => {
                let cyc = tok
                    .map(|t| {
                        t.parse::<usize>()
                            .map_err(|_| parse_err(n, format!("bad vertex index '{t}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if cyc.len() < 3 {
                    return Err(parse_err(n, "cell needs at least 3 vertices"));
                }
                if let Some(&bad) = cyc.iter().find(|&&v| v >= vertices.len()) {
                    return Err(parse_err(n, format!("vertex index {bad} not defined")));
                }
                for i in 0..cyc.len() {
                    let (a, b) = (cyc[i], cyc[(i + 1) % cyc.len()]);
                    let uses = edge_use.entry((a.min(b), a.max(b))).or_default();
                    *uses += 1;
                    if *uses > 2 {
                        return Err(parse_err(
                            n,
                            format!("edge ({a}, {b}) is shared by more than two cells"),
                        ));
                    }
                }
                cells.push(cyc);
            }
            Some("b") => {
                let a: usize = field(tok.next(), n, "edge start")?;
                let b: usize = field(tok.next(), n, "edge end")?;
                let label = match tok.next() {
                    Some("D") => BoundaryLabel::Dirichlet,
                    Some("N") => BoundaryLabel::Neumann,
                    Some(other) => {
                        return Err(parse_err(
                            n,
                            format!("label must be D or N, found '{other}'"),
                        ))
                    }
                    None => return Err(parse_err(n, "missing label")),
                };
                if tok.next().is_some() {
                    return Err(parse_err(n, "trailing fields"));
                }
                if labels.insert((a.min(b), a.max(b)), label).is_some() {
                    return Err(parse_err(n, format!("edge ({a}, {b}) labelled twice")));
                }
            }
            Some(other) => return Err(parse_err(n, format!("unknown record '{other}'"))),
            None => unreachable!(),
        }
    }
    PolyMesh::new(vertices, cells, &labels).map_err(|e| parse_err(0, e.to_string()))
}
