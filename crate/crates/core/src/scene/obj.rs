//! Minimal Wavefront OBJ reader: `o` groups become entities.
//!
//! Only `v`, `f` and `o` records are interpreted. Faces must be triangles;
//! `f` tokens may carry texture/normal indices (`1/2/3`, `1//3`), which are
//! ignored. Negative indices are relative to the vertices read so far.

use std::collections::{HashMap, HashSet};

use super::SceneError;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjGroup {
    pub id: String,
    pub label: String,
    /// Line of the `o` record.
    pub line: usize,
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

struct Pending {
    id: String,
    label: String,
    line: usize,
    faces: Vec<[usize; 3]>,
}

fn err(line: usize, message: impl Into<String>) -> SceneError {
    SceneError::ObjParse { line, message: message.into() }
}

fn parse_index(token: &str, vertex_count: usize, line: usize) -> Result<usize, SceneError> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head.parse().map_err(|_| err(line, format!("bad vertex reference {token:?}")))?;
    let resolved = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        vertex_count as i64 + raw
    } else {
        return Err(err(line, "vertex index 0 is invalid"));
    };
    if resolved < 0 || resolved as usize >= vertex_count {
        return Err(err(line, format!("vertex index {raw} out of range ({vertex_count} vertices defined)")));
    }
    Ok(resolved as usize)
}

fn finish(pending: Pending, positions: &[[f64; 3]]) -> Result<ObjGroup, SceneError> {
    if pending.faces.is_empty() {
        return Err(err(pending.line, format!("object {:?} has no faces", pending.id)));
    }
    let mut remap: HashMap<usize, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let triangles = pending
        .faces
        .iter()
        .map(|face| {
            face.map(|global| {
                *remap.entry(global).or_insert_with(|| {
                    vertices.push(positions[global]);
                    (vertices.len() - 1) as u32
                })
            })
        })
        .collect();
    Ok(ObjGroup { id: pending.id, label: pending.label, line: pending.line, vertices, triangles })
}

pub fn parse_obj(text: &str) -> Result<Vec<ObjGroup>, SceneError> {
    let mut positions: Vec<[f64; 3]> = Vec::new();
    let mut groups = Vec::new();
    let mut current: Option<Pending> = None;
    let mut seen = HashSet::new();

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        match tag {
            "v" => {
                let coords: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| err(line_no, "vertex coordinates must be numbers"))?;
                if !(3..=4).contains(&coords.len()) {
                    return Err(err(line_no, format!("vertex needs 3 coordinates, got {}", coords.len())));
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(err(line_no, "vertex coordinates must be finite"));
                }
                positions.push([coords[0], coords[1], coords[2]]);
            }
            "f" => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err(err(
                        line_no,
                        format!("only triangles are supported, face has {} vertices", refs.len()),
                    ));
                }
                let group =
                    current.as_mut().ok_or_else(|| err(line_no, "face appears before any `o` record"))?;
                let mut face = [0usize; 3];
                for (slot, token) in face.iter_mut().zip(&refs) {
                    *slot = parse_index(token, positions.len(), line_no)?;
                }
                group.faces.push(face);
            }
            "o" => {
                let id =
                    tokens.next().ok_or_else(|| err(line_no, "`o` record needs an entity id"))?.to_string();
                let label = tokens.collect::<Vec<_>>().join(" ");
                if !seen.insert(id.clone()) {
                    return Err(err(line_no, format!("duplicate entity id {id:?}")));
                }
                if let Some(done) = current.take() {
                    groups.push(finish(done, &positions)?);
                }
                current = Some(Pending {
                    label: if label.is_empty() { id.clone() } else { label },
                    id,
                    line: line_no,
                    faces: Vec::new(),
                });
            }
            // Normals, texture coordinates, materials and smoothing groups
            // carry nothing the index needs.
            "vn" | "vt" | "vp" | "g" | "s" | "usemtl" | "mtllib" | "l" | "p" => {}
            other => return Err(err(line_no, format!("unsupported record {other:?}"))),
        }
    }
    if let Some(done) = current.take() {
        groups.push(finish(done, &positions)?);
    }
    Ok(groups)
}
