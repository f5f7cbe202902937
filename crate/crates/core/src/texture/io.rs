//! ASCII PLY with per-vertex colors, and OBJ export with UVs.
//!
//! Written PLY files carry `red green blue` as 8-bit channels and an extra
//! `known` byte (1 = observed, 0 = to be filled). Files without `known`
//! are read as fully observed.

use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use super::{UvCoords, VertexColorMap};
use crate::error::{Error, Result};
use crate::mesh::{write_obj, HeadMesh};

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_ply<W: Write>(mesh: &HeadMesh, colors: &VertexColorMap, w: &mut W) -> Result<()> {
    if colors.len() != mesh.n_vertices() {
        return Err(Error::ShapeMismatch(format!(
            "{} colors for {} vertices",
            colors.len(),
            mesh.n_vertices()
        )));
    }
    writeln!(w, "ply\nformat ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.n_vertices())?;
    for p in ["x", "y", "z"] {
        writeln!(w, "property double {p}")?;
    }
    for p in ["red", "green", "blue", "known"] {
        writeln!(w, "property uchar {p}")?;
    }
    writeln!(w, "element face {}", mesh.faces().len())?;
    writeln!(w, "property list uchar int vertex_indices\nend_header")?;
    for ((p, c), &k) in mesh.vertices().iter().zip(colors.colors()).zip(colors.known_mask()) {
        writeln!(
            w,
            "{:.16e} {:.16e} {:.16e} {} {} {} {}",
            p.x,
            p.y,
            p.z,
            to_byte(c[0]),
            to_byte(c[1]),
            to_byte(c[2]),
            u8::from(k)
        )?;
    }
    for f in mesh.faces() {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

pub fn save_ply(mesh: &HeadMesh, colors: &VertexColorMap, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_ply(mesh, colors, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

struct Element {
    name: String,
    count: usize,
    /// (property name, is 8-bit integer); list properties are recorded by name only.
    props: Vec<(String, bool)>,
}

pub fn parse_ply(text: &str) -> Result<(HeadMesh, VertexColorMap)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::format(1, "missing `ply` magic")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut ended = false;
    for (n, line) in lines.by_ref() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => return Err(Error::format(n, format!("unsupported PLY format `{other}`"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| Error::format(n, format!("bad element count `{count}`")))?,
                props: Vec::new(),
            }),
            ["property", "list", _, _, name] => elements
                .last_mut()
                .ok_or_else(|| Error::format(n, "property before element"))?
                .props
                .push((name.to_string(), false)),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::format(n, "property before element"))?
                .props
                .push((name.to_string(), matches!(*ty, "uchar" | "uint8" | "char" | "int8"))),
            ["end_header"] => {
                ended = true;
                break;
            }
            _ => return Err(Error::format(n, format!("unrecognised header line `{line}`"))),
        }
    }
    if !ended {
        return Err(Error::format(0, "PLY header has no end_header"));
    }

    let mut vertices = Vec::new();
    let mut colors = Vec::new();
    let mut known = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        let col = |name: &str| el.props.iter().position(|(p, _)| p == name);
        for _ in 0..el.count {
            let (n, line) = lines.next().ok_or_else(|| Error::format(0, format!("truncated `{}` element", el.name)))?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::format(n, format!("bad number `{t}`"))))
                .collect::<Result<_>>()?;
            match el.name.as_str() {
                "vertex" => {
                    let get = |name: &str| -> Result<Option<f64>> {
                        match col(name) {
                            None => Ok(None),
                            Some(k) => values
                                .get(k)
                                .copied()
                                .map(Some)
                                .ok_or_else(|| Error::format(n, format!("missing `{name}`"))),
                        }
                    };
                    let xyz = ["x", "y", "z"]
                        .map(|a| get(a).and_then(|v| v.ok_or_else(|| Error::format(n, format!("vertex has no `{a}`")))));
                    let [x, y, z] = xyz;
                    vertices.push(Point3::new(x?, y?, z?));
                    let mut rgb = [0.0; 3];
                    for (ch, name) in ["red", "green", "blue"].iter().enumerate() {
                        let byte = col(name).map(|k| el.props[k].1).unwrap_or(true);
                        let v = get(name)?.unwrap_or(0.0);
                        rgb[ch] = if byte { v / 255.0 } else { v };
                    }
                    colors.push(rgb);
                    known.push(get("known")?.is_none_or(|v| v != 0.0));
                }
                "face" => {
                    let count = values.first().copied().unwrap_or(0.0) as usize;
                    if count != 3 || values.len() != 4 {
                        return Err(Error::format(n, "only triangular faces are supported"));
                    }
                    faces.push([values[1] as usize, values[2] as usize, values[3] as usize]);
                }
                _ => {}
            }
        }
    }
    let mesh = HeadMesh::new(vertices, faces)?;
    Ok((mesh, VertexColorMap::new(colors, known)?))
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<(HeadMesh, VertexColorMap)> {
    let path = path.as_ref();
    parse_ply(&std::fs::read_to_string(path)?).map_err(|e| e.with_path(path))
}

/// OBJ with `vt` lines and `f a/a b/b c/c` faces.
pub fn write_uv_obj<W: Write>(mesh: &HeadMesh, uv: &UvCoords, w: &mut W) -> Result<()> {
    let textured = mesh.clone().with_uvs(uv.uv.clone())?;
    write_obj(&textured, None, w)
}
