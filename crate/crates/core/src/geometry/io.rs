//! Mesh input and output: Wavefront OBJ, PLY, and the sidecar label map.

use super::{Labels, TriangleMesh};
use crate::error::{Error, Result};
use nalgebra::Point3;
use std::io::{BufRead, Write};
use std::path::Path;

/// Source axis convention. Meshes are stored z-up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpAxis {
    #[default]
    Z,
    Y,
}

impl std::str::FromStr for UpAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "z" => Ok(UpAxis::Z),
            "y" => Ok(UpAxis::Y),
            _ => Err(Error::InvalidParams(format!("up axis `{s}` is not `z` or `y`"))),
        }
    }
}

fn to_z_up(p: Point3<f64>, up: UpAxis) -> Point3<f64> {
    match up {
        UpAxis::Z => p,
        // +90 degree rotation about x.
        UpAxis::Y => Point3::new(p.x, -p.z, p.y),
    }
}

/// Parses OBJ text. Each `o`/`g` group becomes one mesh; polygons are
/// triangulated.
pub fn read_obj<R: BufRead>(reader: &mut R, up: UpAxis) -> Result<Vec<TriangleMesh>> {
    let opts = tobj::LoadOptions {
        triangulate: true,
        ignore_points: true,
        ignore_lines: true,
        ..Default::default()
    };
    let (models, _) = tobj::load_obj_buf(reader, &opts, |_| Err(tobj::LoadError::OpenFileFailed))
        .map_err(|e| Error::Parse {
            format: "obj",
            message: e.to_string(),
        })?;
    let meshes = models
        .into_iter()
        .filter(|m| !m.mesh.indices.is_empty())
        .map(|m| {
            let vertices = m
                .mesh
                .positions
                .chunks_exact(3)
                .map(|c| to_z_up(Point3::new(c[0], c[1], c[2]), up))
                .collect();
            let triangles = m
                .mesh
                .indices
                .chunks_exact(3)
                .map(|c| [c[0], c[1], c[2]])
                .collect();
            TriangleMesh {
                name: m.name,
                vertices,
                triangles,
            }
        })
        .collect();
    Ok(meshes)
}

pub fn write_obj<W: Write>(w: &mut W, meshes: &[TriangleMesh]) -> Result<()> {
    let mut base = 1;
    for m in meshes {
        writeln!(w, "o {}", m.name)?;
        for v in &m.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in &m.triangles {
            writeln!(w, "f {} {} {}", t[0] + base, t[1] + base, t[2] + base)?;
        }
        base += m.vertices.len() as u32;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PlyFormat {
    Ascii,
    LittleEndian,
    BigEndian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
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
    fn parse(s: &str) -> Result<Scalar> {
        Ok(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(ply_err(format!("unknown scalar type `{other}`"))),
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
}

#[derive(Clone, Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn ply_err(message: impl Into<String>) -> Error {
    Error::Parse {
        format: "ply",
        message: message.into(),
    }
}

struct PlyCursor<'a> {
    data: &'a [u8],
    pos: usize,
    format: PlyFormat,
    tokens: std::vec::IntoIter<String>,
}

impl PlyCursor<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64> {
        if self.format == PlyFormat::Ascii {
            let tok = self.tokens.next().ok_or_else(|| ply_err("unexpected end of data"))?;
            return tok.parse::<f64>().map_err(|_| ply_err(format!("bad number `{tok}`")));
        }
        let n = ty.size();
        let bytes = self
            .data
            .get(self.pos..self.pos + n)
            .ok_or_else(|| ply_err("unexpected end of data"))?;
        self.pos += n;
        let mut buf = [0u8; 8];
        buf[..n].copy_from_slice(bytes);
        if self.format == PlyFormat::BigEndian {
            buf[..n].reverse();
        }
        Ok(match ty {
            Scalar::I8 => buf[0] as i8 as f64,
            Scalar::U8 => buf[0] as f64,
            Scalar::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(buf),
        })
    }
}

/// Parses an ASCII or binary PLY file into a single mesh named `name`.
pub fn read_ply(data: &[u8], name: &str, up: UpAxis) -> Result<TriangleMesh> {
    let marker = b"end_header";
    let end = data
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| ply_err("missing end_header"))?;
    let mut body = end + marker.len();
    if data.get(body) == Some(&b'\r') {
        body += 1;
    }
    if data.get(body) == Some(&b'\n') {
        body += 1;
    }
    let header = std::str::from_utf8(&data[..end]).map_err(|_| ply_err("header is not utf-8"))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(ply_err("missing ply magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            ["format", fmt, _] => {
                format = Some(match *fmt {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::LittleEndian,
                    "binary_big_endian" => PlyFormat::BigEndian,
                    other => return Err(ply_err(format!("unknown format `{other}`"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| ply_err("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", count_ty, item_ty, name] => elements
                .last_mut()
                .ok_or_else(|| ply_err("property before element"))?
                .props
                .push(Property::List(
                    name.to_string(),
                    Scalar::parse(count_ty)?,
                    Scalar::parse(item_ty)?,
                )),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| ply_err("property before element"))?
                .props
                .push(Property::Scalar(name.to_string(), Scalar::parse(ty)?)),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(ply_err(format!("unexpected header line `{line}`"))),
        }
    }
    let format = format.ok_or_else(|| ply_err("missing format line"))?;
    let tokens: Vec<String> = if format == PlyFormat::Ascii {
        std::str::from_utf8(&data[body..])
            .map_err(|_| ply_err("ascii body is not utf-8"))?
            .split_whitespace()
            .map(str::to_string)
            .collect()
    } else {
        Vec::new()
    };
    let mut cur = PlyCursor {
        data,
        pos: body,
        format,
        tokens: tokens.into_iter(),
    };

    let mut mesh = TriangleMesh::new(name);
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            let mut poly: Vec<u32> = Vec::new();
            for prop in &el.props {
                match prop {
                    Property::Scalar(pname, ty) => {
                        let v = cur.next(*ty)?;
                        match pname.as_str() {
                            "x" => xyz[0] = v,
                            "y" => xyz[1] = v,
                            "z" => xyz[2] = v,
                            _ => {}
                        }
                    }
                    Property::List(pname, count_ty, item_ty) => {
                        let n = cur.next(*count_ty)? as usize;
                        for _ in 0..n {
                            let v = cur.next(*item_ty)?;
                            if pname == "vertex_indices" || pname == "vertex_index" {
                                poly.push(v as u32);
                            }
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => mesh.vertices.push(to_z_up(xyz.into(), up)),
                "face" => {
                    for k in 1..poly.len().saturating_sub(1) {
                        mesh.triangles.push([poly[0], poly[k], poly[k + 1]]);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(mesh)
}

/// Writes a binary little-endian PLY with optional per-vertex RGB colors.
pub fn write_ply<W: Write>(w: &mut W, mesh: &TriangleMesh, colors: Option<&[[u8; 3]]>) -> Result<()> {
    if let Some(c) = colors {
        if c.len() != mesh.vertices.len() {
            return Err(ply_err("color count does not match vertex count"));
        }
    }
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertices.len())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    if colors.is_some() {
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
    }
    writeln!(w, "element face {}", mesh.triangles.len())?;
    writeln!(w, "property list uchar uint vertex_indices")?;
    writeln!(w, "end_header")?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        for c in [v.x, v.y, v.z] {
            w.write_all(&c.to_le_bytes())?;
        }
        if let Some(c) = colors {
            w.write_all(&c[i])?;
        }
    }
    for t in &mesh.triangles {
        w.write_all(&[3u8])?;
        for i in t {
            w.write_all(&i.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_labels(json: &str) -> Result<Labels> {
    Ok(serde_json::from_str(json)?)
}

/// Loads a mesh file by extension (`.obj` or `.ply`).
pub fn load_mesh_file(path: &Path, up: UpAxis) -> Result<Vec<TriangleMesh>> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let data = std::fs::read(path)?;
    match ext.as_str() {
        "obj" => read_obj(&mut data.as_slice(), up),
        "ply" => {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
            Ok(vec![read_ply(&data, stem, up)?])
        }
        other => Err(Error::Parse {
            format: "mesh",
            message: format!("unsupported extension `{other}`"),
        }),
    }
}
