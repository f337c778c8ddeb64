//! OFF and OBJ readers and writers (positions and triangular faces only).
//! Boundary loops are recomputed on load.

use std::fmt::Write as _;
use std::path::Path;

use super::TriMesh;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("off") => Ok(Self::Off),
            Some("obj") => Ok(Self::Obj),
            _ => Err(Error::InvalidArgument(format!(
                "cannot infer mesh format from {}",
                path.display()
            ))),
        }
    }
}

fn fmt_coord(x: f64) -> String {
    // 17 significant digits round-trip every f64.
    format!("{x:.16e}")
}

pub fn to_off_string(mesh: &TriMesh) -> String {
    let mut out = String::new();
    writeln!(out, "OFF").unwrap();
    writeln!(out, "{} {} 0", mesh.num_vertices(), mesh.num_faces()).unwrap();
    for p in mesh.vertices() {
        writeln!(out, "{} {} {}", fmt_coord(p.x), fmt_coord(p.y), fmt_coord(p.z)).unwrap();
    }
    for f in mesh.faces() {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    out
}

pub fn to_obj_string(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for p in mesh.vertices() {
        writeln!(out, "v {} {} {}", fmt_coord(p.x), fmt_coord(p.y), fmt_coord(p.z)).unwrap();
    }
    for f in mesh.faces() {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|e| parse_err(line, format!("bad number {tok:?}: {e}")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|e| parse_err(line, format!("bad index {tok:?}: {e}")))
}

pub fn parse_off(text: &str) -> Result<TriMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut counts_line = None;
    if header != "OFF" {
        // Header and counts may share a line: "OFF V F E".
        let rest = header
            .strip_prefix("OFF")
            .ok_or_else(|| parse_err(ln, "missing OFF header"))?;
        counts_line = Some((ln, rest.trim()));
    }
    let (ln, counts) = match counts_line {
        Some(c) => c,
        None => lines.next().ok_or_else(|| parse_err(ln, "missing counts"))?,
    };
    let toks: Vec<&str> = counts.split_whitespace().collect();
    if toks.len() < 2 {
        return Err(parse_err(ln, "expected vertex and face counts"));
    }
    let nv = parse_usize(toks[0], ln)?;
    let nf = parse_usize(toks[1], ln)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(ln, "unexpected end of vertex list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 3 {
            return Err(parse_err(ln, "vertex needs three coordinates"));
        }
        vertices.push(Vec3::new(
            parse_f64(t[0], ln)?,
            parse_f64(t[1], ln)?,
            parse_f64(t[2], ln)?,
        ));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(ln, "unexpected end of face list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.first().map(|s| parse_usize(s, ln)).transpose()? != Some(3) || t.len() < 4 {
            return Err(parse_err(ln, "only triangular faces are supported"));
        }
        faces.push([
            parse_usize(t[1], ln)?,
            parse_usize(t[2], ln)?,
            parse_usize(t[3], ln)?,
        ]);
    }
    TriMesh::build(vertices, faces)
}

pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut t = l.split_whitespace();
        match t.next() {
            Some("v") => {
                let c: Vec<&str> = t.collect();
                if c.len() < 3 {
                    return Err(parse_err(ln, "vertex needs three coordinates"));
                }
                vertices.push(Vec3::new(
                    parse_f64(c[0], ln)?,
                    parse_f64(c[1], ln)?,
                    parse_f64(c[2], ln)?,
                ));
            }
            Some("f") => {
                let idx = t
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        let k: i64 = first
                            .parse()
                            .map_err(|e| parse_err(ln, format!("bad index {tok:?}: {e}")))?;
                        // Negative indices count back from the current vertex list.
                        let resolved = if k < 0 { vertices.len() as i64 + k } else { k - 1 };
                        usize::try_from(resolved).map_err(|_| parse_err(ln, "index out of range"))
                    })
                    .collect::<Result<Vec<usize>>>()?;
                if idx.len() != 3 {
                    return Err(parse_err(ln, "only triangular faces are supported"));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    TriMesh::build(vertices, faces)
}

pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path)?;
    match MeshFormat::from_path(path)? {
        MeshFormat::Off => parse_off(&text),
        MeshFormat::Obj => parse_obj(&text),
    }
}

pub fn write_mesh(mesh: &TriMesh, path: &Path) -> Result<()> {
    let text = match MeshFormat::from_path(path)? {
        MeshFormat::Off => to_off_string(mesh),
        MeshFormat::Obj => to_obj_string(mesh),
    };
    std::fs::write(path, text)?;
    Ok(())
}
