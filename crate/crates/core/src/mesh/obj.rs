use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use super::HeadMesh;
use crate::error::{Error, Result};

/// Parsed OBJ contents: the mesh plus optional per-vertex colours from the
/// `v x y z r g b` extension.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjData {
    pub mesh: HeadMesh,
    pub colors: Option<Vec<[f64; 3]>>,
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<HeadMesh> {
    Ok(load_obj(path)?.mesh)
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<ObjData> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_obj(&text).map_err(|e| e.with_path(path))
}

pub fn parse_obj(text: &str) -> Result<ObjData> {
    let mut vertices = Vec::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut uvs = Vec::new();
    let mut faces = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        let rest: Vec<&str> = tokens.collect();
        match tag {
            "v" => {
                if rest.len() != 3 && rest.len() != 6 {
                    return Err(Error::format(
                        line_no,
                        format!("vertex line needs 3 or 6 numbers, found {}", rest.len()),
                    ));
                }
                let nums = parse_floats(&rest, line_no)?;
                vertices.push(Point3::new(nums[0], nums[1], nums[2]));
                if nums.len() == 6 {
                    if colors.len() + 1 != vertices.len() {
                        return Err(Error::format(line_no, "vertex colours given for only some vertices"));
                    }
                    colors.push([nums[3], nums[4], nums[5]]);
                }
            }
            "vt" => {
                if rest.len() < 2 {
                    return Err(Error::format(line_no, "texture coordinate needs 2 numbers"));
                }
                let nums = parse_floats(&rest[..2], line_no)?;
                uvs.push([nums[0], nums[1]]);
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(Error::format(
                        line_no,
                        format!("only triangle faces are supported, found {} vertices", rest.len()),
                    ));
                }
                let mut face = [0usize; 3];
                for (slot, tok) in face.iter_mut().zip(&rest) {
                    *slot = parse_index(tok, vertices.len(), line_no)?;
                }
                faces.push(face);
            }
            // normals, groups, materials and smoothing are not part of the model
            _ => {}
        }
    }

    if !colors.is_empty() && colors.len() != vertices.len() {
        return Err(Error::format(0, "vertex colours given for only some vertices"));
    }
    for (fi, f) in faces.iter().enumerate() {
        if f.iter().any(|&i| i >= vertices.len()) {
            return Err(Error::format(0, format!("face {fi} references a missing vertex")));
        }
    }
    let mut mesh = HeadMesh::new(vertices, faces)?;
    if !uvs.is_empty() && uvs.len() == mesh.n_vertices() {
        mesh = mesh.with_uvs(uvs)?;
    }
    Ok(ObjData {
        mesh,
        colors: (!colors.is_empty()).then_some(colors),
    })
}

fn parse_floats(tokens: &[&str], line: usize) -> Result<Vec<f64>> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(line, format!("invalid number `{t}`")))
        })
        .collect()
}

fn parse_index(token: &str, n_seen: usize, line: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let idx: i64 = head
        .parse()
        .map_err(|_| Error::format(line, format!("invalid face index `{token}`")))?;
    let resolved = match idx {
        0 => return Err(Error::format(line, "face indices are 1-based")),
        i if i > 0 => i - 1,
        i => n_seen as i64 + i,
    };
    usize::try_from(resolved).map_err(|_| Error::format(line, format!("face index `{token}` out of range")))
}

pub fn save_mesh(mesh: &HeadMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_obj(mesh, None, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes OBJ text. Coordinates use 17 significant digits so a reload is
/// bit-exact. Faces are 1-indexed; when the mesh carries texture
/// coordinates they are emitted as `vt` lines and faces as `a/a b/b c/c`.
pub fn write_obj<W: Write>(mesh: &HeadMesh, colors: Option<&[[f64; 3]]>, w: &mut W) -> Result<()> {
    if let Some(c) = colors {
        if c.len() != mesh.n_vertices() {
            return Err(Error::ShapeMismatch(format!(
                "{} colours for {} vertices",
                c.len(),
                mesh.n_vertices()
            )));
        }
    }
    for (i, p) in mesh.vertices().iter().enumerate() {
        write!(w, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
        if let Some(c) = colors {
            write!(w, " {:.9} {:.9} {:.9}", c[i][0], c[i][1], c[i][2])?;
        }
        writeln!(w)?;
    }
    if let Some(uvs) = mesh.uvs() {
        for uv in uvs {
            writeln!(w, "vt {:.16e} {:.16e}", uv[0], uv[1])?;
        }
        for f in mesh.faces() {
            let [a, b, c] = f.map(|i| i + 1);
            writeln!(w, "f {a}/{a} {b}/{b} {c}/{c}")?;
        }
    } else {
        for f in mesh.faces() {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
    }
    Ok(())
}
