//! Minimal PLY support: ASCII and binary little-endian, vertex element with
//! `x y z red green blue` and an optional integer `label`. Other elements are
//! parsed and discarded.

use std::io::Write;
use std::path::Path;

use crate::data::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
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

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => f64::from(b[0] as i8),
            Scalar::U8 => f64::from(b[0]),
            Scalar::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            Scalar::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            Scalar::I32 => f64::from(i32::from_le_bytes(b[..4].try_into().unwrap())),
            Scalar::U32 => f64::from(u32::from_le_bytes(b[..4].try_into().unwrap())),
            Scalar::F32 => f64::from(f32::from_le_bytes(b[..4].try_into().unwrap())),
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let err = |msg: String| Error::parse(path, msg);
    let mut pos = 0;
    let mut next_line = || -> Option<String> {
        if pos >= bytes.len() {
            return None;
        }
        let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
        let line = String::from_utf8_lossy(&bytes[pos..end]).trim_end_matches('\r').to_string();
        pos = (end + 1).min(bytes.len());
        Some(line)
    };

    if next_line().as_deref() != Some("ply") {
        return Err(err("malformed header: missing 'ply' magic line".into()));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = next_line().ok_or_else(|| err("malformed header: no end_header".into()))?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                encoding = Some(match (tok.next(), tok.next()) {
                    (Some("ascii"), Some("1.0")) => PlyEncoding::Ascii,
                    (Some("binary_little_endian"), Some("1.0")) => PlyEncoding::BinaryLittleEndian,
                    (f, _) => {
                        return Err(err(format!("malformed header: unsupported format {f:?}")))
                    }
                });
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| err("malformed header: element without name".into()))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| err(format!("malformed header: bad count for element {name}")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err("malformed header: property before element".into()))?;
                let t = tok.next().ok_or_else(|| err("malformed header: empty property".into()))?;
                let prop = if t == "list" {
                    let count = tok.next().and_then(Scalar::parse);
                    let item = tok.next().and_then(Scalar::parse);
                    let name = tok.next();
                    match (count, item, name) {
                        (Some(count), Some(item), Some(name)) if count.is_integer() => Property::List {
                            name: name.to_string(),
                            count,
                            item,
                        },
                        _ => return Err(err(format!("malformed header: bad list property '{line}'"))),
                    }
                } else {
                    let ty = Scalar::parse(t)
                        .ok_or_else(|| err(format!("malformed header: unknown type '{t}'")))?;
                    let name = tok
                        .next()
                        .ok_or_else(|| err(format!("malformed header: unnamed property '{line}'")))?;
                    Property::Scalar {
                        name: name.to_string(),
                        ty,
                    }
                };
                el.properties.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(err(format!("malformed header: unexpected keyword '{other}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| err("malformed header: missing format line".into()))?;
    Ok(Header {
        encoding,
        elements,
        body_offset: pos,
    })
}

/// Pulls one numeric value at a time from the body, in either encoding.
enum Body<'a> {
    Ascii(std::str::SplitAsciiWhitespace<'a>),
    Binary { buf: &'a [u8], pos: usize },
}

impl Body<'_> {
    fn next(&mut self, ty: Scalar) -> Option<f64> {
        match self {
            Body::Ascii(tokens) => {
                let t = tokens.next()?;
                match ty {
                    _ if ty.is_integer() => t.parse::<i64>().ok().map(|v| v as f64),
                    // A declared `float` holds float32 values, whatever the
                    // number of digits written.
                    Scalar::F32 => t.parse::<f32>().ok().map(f64::from),
                    _ => t.parse::<f64>().ok(),
                }
            }
            Body::Binary { buf, pos } => {
                let end = *pos + ty.size();
                let bytes = buf.get(*pos..end)?;
                *pos = end;
                Some(ty.decode(bytes))
            }
        }
    }
}

/// Reads a PLY point cloud. The scene ID is the file stem.
pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(path, &bytes)?;
    let err = |msg: String| Error::parse(path, msg);

    let vertex = header
        .elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| err("missing element 'vertex'".into()))?;
    if vertex.count == 0 {
        return Err(err("element 'vertex': N ≥ 1 violated (no vertices)".into()));
    }
    let find = |name: &str| -> Result<Option<(usize, Scalar)>> {
        match vertex.properties.iter().position(|p| p.name() == name) {
            None => Ok(None),
            Some(i) => match &vertex.properties[i] {
                Property::Scalar { ty, .. } => Ok(Some((i, *ty))),
                Property::List { .. } => Err(err(format!("vertex property '{name}' is a list"))),
            },
        }
    };
    let require = |name: &str| -> Result<(usize, Scalar)> {
        find(name)?.ok_or_else(|| err(format!("element 'vertex': missing property '{name}'")))
    };
    let xyz = [require("x")?, require("y")?, require("z")?];
    let rgb = [require("red")?, require("green")?, require("blue")?];
    for (i, ty) in rgb {
        if !matches!(ty, Scalar::U8 | Scalar::F32 | Scalar::F64) {
            return Err(err(format!(
                "element 'vertex': color property '{}' must be uchar or float",
                vertex.properties[i].name()
            )));
        }
    }
    let label = find("label")?;
    if let Some((_, ty)) = label {
        if !ty.is_integer() {
            return Err(err("element 'vertex': 'label' must be an integer property".into()));
        }
    }

    let body_bytes = &bytes[header.body_offset..];
    let mut body = match header.encoding {
        PlyEncoding::Ascii => Body::Ascii(
            std::str::from_utf8(body_bytes)
                .map_err(|_| err("ASCII body is not valid UTF-8".into()))?
                .split_ascii_whitespace(),
        ),
        PlyEncoding::BinaryLittleEndian => Body::Binary {
            buf: body_bytes,
            pos: 0,
        },
    };

    let mut positions = Vec::with_capacity(vertex.count);
    let mut colors = Vec::with_capacity(vertex.count);
    let mut labels = label.map(|_| Vec::with_capacity(vertex.count));
    let mut row = Vec::new();
    for element in &header.elements {
        let is_vertex = element.name == "vertex";
        for idx in 0..element.count {
            row.clear();
            for prop in &element.properties {
                let short = || err(format!("element '{}' {idx}: body ends early", element.name));
                match prop {
                    Property::Scalar { ty, .. } => row.push(body.next(*ty).ok_or_else(short)?),
                    Property::List { count, item, .. } => {
                        let n = body.next(*count).ok_or_else(short)?;
                        if n < 0.0 {
                            return Err(err(format!("element '{}' {idx}: negative list length", element.name)));
                        }
                        for _ in 0..n as usize {
                            body.next(*item).ok_or_else(short)?;
                        }
                        row.push(n);
                    }
                }
            }
            if !is_vertex {
                continue;
            }
            let p = xyz.map(|(i, _)| row[i]);
            if p.iter().any(|v| !v.is_finite()) {
                return Err(err(format!("vertex {idx}: non-finite coordinate {p:?}")));
            }
            let c = rgb.map(|(i, ty)| if ty == Scalar::U8 { row[i] / 255.0 } else { row[i] });
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(err(format!("vertex {idx}: color {c:?} outside [0,1]")));
            }
            positions.push(p);
            colors.push(c);
            if let (Some(labels), Some((i, _))) = (labels.as_mut(), label) {
                labels.push(row[i] as i32);
            }
        }
    }
    if let Body::Binary { buf, pos } = body {
        if pos != buf.len() {
            return Err(err(format!("{} trailing bytes after last element", buf.len() - pos)));
        }
    }

    let scene_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    PointCloud::new(scene_id, positions, colors, labels).map_err(|e| err(e.to_string()))
}

/// Writes positions as `float`, colors as `uchar` (rounded from `[0,1]`) and
/// ground-truth labels, when present, as `int label`.
pub fn write_point_cloud(
    cloud: &PointCloud,
    path: impl AsRef<Path>,
    encoding: PlyEncoding,
) -> Result<()> {
    let path = path.as_ref();
    cloud.validate()?;
    let mut out = Vec::new();
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let io = |e| Error::io(path, e);
    write!(
        out,
        "ply\nformat {format} 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\n",
        cloud.len()
    )
    .map_err(io)?;
    if cloud.gt_labels.is_some() {
        out.extend_from_slice(b"property int label\n");
    }
    out.extend_from_slice(b"end_header\n");

    let to_u8 = |c: f64| (c * 255.0).round() as u8;
    for i in 0..cloud.len() {
        let p = cloud.positions[i].map(|v| v as f32);
        let c = cloud.colors[i].map(to_u8);
        let label = cloud.gt_labels.as_ref().map(|l| l[i]);
        match encoding {
            PlyEncoding::Ascii => {
                write!(out, "{} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2]).map_err(io)?;
                if let Some(l) = label {
                    write!(out, " {l}").map_err(io)?;
                }
                out.push(b'\n');
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in p {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&c);
                if let Some(l) = label {
                    out.extend_from_slice(&l.to_le_bytes());
                }
            }
        }
    }
    std::fs::write(path, out).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_text(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    const ONE_POINT: &str = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n\
        property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n0 0 0 255 0 0\n";

    #[test]
    fn one_point_ascii() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(dir.path(), "scene0.ply", ONE_POINT);
        let cloud = read_point_cloud(&p).unwrap();
        assert_eq!(cloud.scene_id, "scene0");
        assert_eq!(cloud.positions, vec![[0.0, 0.0, 0.0]]);
        assert_eq!(cloud.colors, vec![[1.0, 0.0, 0.0]]);
        assert!(cloud.gt_labels.is_none());
    }

    #[test]
    fn empty_vertex_element() {
        let dir = tempfile::tempdir().unwrap();
        let text = ONE_POINT.replace("vertex 1", "vertex 0").replace("0 0 0 255 0 0\n", "");
        let p = write_text(dir.path(), "e.ply", &text);
        let err = read_point_cloud(&p).unwrap_err();
        assert!(err.to_string().contains("N ≥ 1 violated"), "{err}");
    }

    #[test]
    fn missing_color_property() {
        let dir = tempfile::tempdir().unwrap();
        let text = ONE_POINT.replace("property uchar blue\n", "").replace("255 0 0", "255 0");
        let p = write_text(dir.path(), "m.ply", &text);
        let err = read_point_cloud(&p).unwrap_err();
        assert!(err.to_string().contains("missing property 'blue'"), "{err}");
    }

    #[test]
    fn non_finite_coordinate_named() {
        let dir = tempfile::tempdir().unwrap();
        let text = ONE_POINT.replace("0 0 0 255", "0 nan 0 255");
        let p = write_text(dir.path(), "n.ply", &text);
        let err = read_point_cloud(&p).unwrap_err();
        assert!(err.to_string().contains("vertex 0"), "{err}");
    }

    #[test]
    fn faces_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let text = "ply\nformat ascii 1.0\ncomment mesh\nelement vertex 3\nproperty float x\nproperty float y\n\
            property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nproperty int label\n\
            element face 1\nproperty list uchar int vertex_indices\nend_header\n\
            0 0 0 0 0 0 2\n1 0 0 0 0 0 -1\n0 1 0 0 0 0 5\n3 0 1 2\n";
        let p = write_text(dir.path(), "f.ply", text);
        let cloud = read_point_cloud(&p).unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(cloud.gt_labels, Some(vec![2, -1, 5]));
    }

    #[test]
    fn ascii_write_read() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = PointCloud::new(
            "a",
            vec![[0.5, -1.25, 3.0], [1.0, 2.0, 3.0]],
            vec![[0.0, 1.0, 128.0 / 255.0], [1.0, 1.0, 1.0]],
            Some(vec![1, -1]),
        )
        .unwrap();
        let p = dir.path().join("a.ply");
        write_point_cloud(&cloud, &p, PlyEncoding::Ascii).unwrap();
        assert_eq!(read_point_cloud(&p).unwrap(), cloud);
    }

    #[test]
    fn big_endian_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let text = ONE_POINT.replace("ascii", "binary_big_endian");
        let p = write_text(dir.path(), "b.ply", &text);
        assert!(read_point_cloud(&p).is_err());
    }
}
