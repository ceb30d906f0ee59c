//! Minimal PLY point-cloud I/O.
//!
//! Writing is always ASCII. Reading accepts `ascii` and
//! `binary_little_endian` files and returns the `x y z` properties of the
//! `vertex` element. Elements before `vertex` must have fixed-size rows.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ArborError, Result};
use crate::geom::Vec3;

const FMT: &str = "PLY";

/// ASCII PLY text for `points`, with `nx ny nz` columns when `normals` is given.
pub fn to_ascii(points: &[Vec3], normals: Option<&[Vec3]>) -> Result<String> {
    if let Some(n) = normals {
        if n.len() != points.len() {
            return Err(ArborError::invalid("normal count does not match point count"));
        }
    }
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", points.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if normals.is_some() {
        s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    s.push_str("end_header\n");
    for (i, p) in points.iter().enumerate() {
        let _ = write!(s, "{} {} {}", p.x, p.y, p.z);
        if let Some(n) = normals {
            let _ = write!(s, " {} {} {}", n[i].x, n[i].y, n[i].z);
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn write_points(path: &Path, points: &[Vec3], normals: Option<&[Vec3]>) -> Result<()> {
    crate::pipeline::write_atomic(path, to_ascii(points, normals)?.as_bytes())
}

pub fn read_points(path: &Path) -> Result<Vec<Vec3>> {
    parse_points(&std::fs::read(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Result<Scalar> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(ArborError::format(FMT, format!("unknown scalar type {other}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Element {
    name: String,
    count: usize,
    // None marks a list property.
    props: Vec<(String, Option<Scalar>)>,
}

pub fn parse_points(bytes: &[u8]) -> Result<Vec<Vec3>> {
    Ok(parse_points_normals(bytes)?.0)
}

/// Points plus per-point normals when the vertex element has `nx ny nz`.
pub fn parse_points_normals(bytes: &[u8]) -> Result<(Vec<Vec3>, Option<Vec<Vec3>>)> {
    let (names, rows) = parse_vertex_table(bytes)?;
    let col = |n: &str| names.iter().position(|p| p == n);
    let need = |n: &str| col(n).ok_or_else(|| ArborError::format(FMT, format!("vertex has no {n} property")));
    let xyz = [need("x")?, need("y")?, need("z")?];
    let pick = |r: &Vec<f64>, c: [usize; 3]| Vec3::new(r[c[0]], r[c[1]], r[c[2]]);
    let points: Vec<Vec3> = rows.iter().map(|r| pick(r, xyz)).collect();
    if points.iter().any(|p| !p.is_finite()) {
        return Err(ArborError::format(FMT, "non-finite coordinate"));
    }
    let normals = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some(rows.iter().map(|r| pick(r, [a, b, c])).collect()),
        _ => None,
    };
    Ok((points, normals))
}

pub fn read_points_normals(path: &Path) -> Result<(Vec<Vec3>, Option<Vec<Vec3>>)> {
    parse_points_normals(&std::fs::read(path)?)
}

/// Property names and rows of the vertex element.
fn parse_vertex_table(bytes: &[u8]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let header_end = find_header_end(bytes)?;
    let header =
        std::str::from_utf8(&bytes[..header_end]).map_err(|_| ArborError::format(FMT, "header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(ArborError::format(FMT, "missing magic"));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, _] => return Err(ArborError::format(FMT, format!("unsupported format {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| ArborError::format(FMT, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", _, _, name] => last(&mut elements)?.props.push((name.to_string(), None)),
            ["property", ty, name] => last(&mut elements)?
                .props
                .push((name.to_string(), Some(Scalar::parse(ty)?))),
            ["comment", ..] | ["obj_info", ..] | ["end_header"] | [] => {}
            _ => return Err(ArborError::format(FMT, format!("unrecognized header line {line:?}"))),
        }
    }
    let binary = binary.ok_or_else(|| ArborError::format(FMT, "missing format line"))?;
    let vi = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| ArborError::format(FMT, "no vertex element"))?;
    let vertex = &elements[vi];
    let names: Vec<String> = vertex.props.iter().map(|(n, _)| n.clone()).collect();
    let body = &bytes[header_end..];

    let mut rows = Vec::with_capacity(vertex.count);
    if binary {
        let mut off = 0;
        for e in &elements[..vi] {
            let mut row = 0;
            for (_, t) in &e.props {
                row += t
                    .ok_or_else(|| ArborError::format(FMT, "list property before vertex element"))?
                    .size();
            }
            off += row * e.count;
        }
        let types: Vec<Scalar> = vertex
            .props
            .iter()
            .map(|(_, t)| t.ok_or_else(|| ArborError::format(FMT, "list property in vertex element")))
            .collect::<Result<_>>()?;
        let row: usize = types.iter().map(|t| t.size()).sum();
        if body.len() < off + row * vertex.count {
            return Err(ArborError::format(FMT, "truncated binary body"));
        }
        for i in 0..vertex.count {
            let mut o = off + i * row;
            let mut vals = Vec::with_capacity(types.len());
            for t in &types {
                vals.push(t.read_le(&body[o..]));
                o += t.size();
            }
            rows.push(vals);
        }
    } else {
        let text = std::str::from_utf8(body).map_err(|_| ArborError::format(FMT, "body is not UTF-8"))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let skip: usize = elements[..vi].iter().map(|e| e.count).sum();
        for _ in 0..skip {
            lines.next();
        }
        for _ in 0..vertex.count {
            let line = lines
                .next()
                .ok_or_else(|| ArborError::format(FMT, "truncated ascii body"))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .take(names.len())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| ArborError::format(FMT, format!("bad vertex row {line:?}")))?;
            if vals.len() != names.len() {
                return Err(ArborError::format(FMT, format!("short vertex row {line:?}")));
            }
            rows.push(vals);
        }
    }
    Ok((names, rows))
}

fn last(elements: &mut [Element]) -> Result<&mut Element> {
    elements
        .last_mut()
        .ok_or_else(|| ArborError::format(FMT, "property before any element"))
}

fn find_header_end(bytes: &[u8]) -> Result<usize> {
    let tag = b"end_header";
    let pos = bytes
        .windows(tag.len())
        .position(|w| w == tag)
        .ok_or_else(|| ArborError::format(FMT, "missing end_header"))?;
    let mut end = pos + tag.len();
    if bytes.get(end) == Some(&b'\r') {
        end += 1;
    }
    if bytes.get(end) == Some(&b'\n') {
        end += 1;
    }
    Ok(end)
}
