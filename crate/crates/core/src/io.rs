//! Mesh and point-cloud files: Wavefront OBJ, PLY (binary little-endian and
//! ASCII) and whitespace-separated XYZ text with optional score and label
//! columns.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, TriMesh};

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), message: message.into() }
}

/// Parse OBJ text. Polygons are fan-triangulated; `v/vt/vn` forms and
/// negative (relative) indices are accepted.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(path, format!("line {}: bad vertex: {e}", ln + 1)))?;
                if c.len() != 3 {
                    return Err(parse_err(path, format!("line {}: vertex needs 3 coordinates", ln + 1)));
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in it {
                    let first = tok.split('/').next().unwrap_or("");
                    let k: i64 = first
                        .parse()
                        .map_err(|_| parse_err(path, format!("line {}: bad face index `{tok}`", ln + 1)))?;
                    let n = vertices.len() as i64;
                    let abs = if k < 0 { n + k } else { k - 1 };
                    if abs < 0 || abs >= n {
                        return Err(parse_err(path, format!("line {}: face index {k} out of range", ln + 1)));
                    }
                    idx.push(abs as usize);
                }
                if idx.len() < 3 {
                    return Err(parse_err(path, format!("line {}: face needs 3 vertices", ln + 1)));
                }
                for w in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[w], idx[w + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces).map_err(|e| parse_err(path, e.to_string()))
}

pub fn obj_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for f in &mesh.faces {
        s.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    s
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Element rows as numbers: scalars are one value, lists are their items.
type Rows = Vec<Vec<Vec<f64>>>;

fn parse_ply(bytes: &[u8], path: &Path) -> Result<(Vec<Element>, Rows)> {
    let end = bytes
        .windows(10)
        .position(|w| w == b"end_header")
        .ok_or_else(|| parse_err(path, "missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| parse_err(path, "header is not UTF-8"))?;
    let mut body = end + 10;
    while body < bytes.len() && (bytes[body] == b'\r' || bytes[body] == b'\n') {
        body += 1;
        if bytes[body - 1] == b'\n' {
            break;
        }
    }
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(parse_err(path, "line 1: expected `ply`"));
    }
    let mut ascii = None;
    let mut elements: Vec<Element> = Vec::new();
    for (ln, line) in lines.enumerate() {
        let ln = ln + 2;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => ascii = Some(true),
            ["format", "binary_little_endian", _] => ascii = Some(false),
            ["format", other, ..] => return Err(parse_err(path, format!("line {ln}: unsupported format `{other}`"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count.parse().map_err(|_| parse_err(path, format!("line {ln}: bad element count")))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            ["property", "list", c, t, _] => {
                let (c, t) = Scalar::parse(c)
                    .zip(Scalar::parse(t))
                    .ok_or_else(|| parse_err(path, format!("line {ln}: unknown list type")))?;
                let el = elements.last_mut().ok_or_else(|| parse_err(path, format!("line {ln}: property before element")))?;
                el.props.push(Property::List(c, t));
            }
            ["property", t, name] => {
                let t = Scalar::parse(t).ok_or_else(|| parse_err(path, format!("line {ln}: unknown type `{t}`")))?;
                let el = elements.last_mut().ok_or_else(|| parse_err(path, format!("line {ln}: property before element")))?;
                el.props.push(Property::Scalar(name.to_string(), t));
            }
            _ => return Err(parse_err(path, format!("line {ln}: unrecognized header line `{line}`"))),
        }
    }
    let ascii = ascii.ok_or_else(|| parse_err(path, "missing format line"))?;
    let mut rows: Rows = Vec::new();
    if ascii {
        let text = std::str::from_utf8(&bytes[body..]).map_err(|_| parse_err(path, "ASCII body is not UTF-8"))?;
        let mut toks = text.split_whitespace();
        let mut next = |what: &str| -> Result<f64> {
            toks.next()
                .ok_or_else(|| parse_err(path, format!("unexpected end of data reading {what}")))?
                .parse::<f64>()
                .map_err(|e| parse_err(path, format!("bad number in {what}: {e}")))
        };
        for el in &elements {
            let mut r = Vec::with_capacity(el.count);
            for _ in 0..el.count {
                let mut row = Vec::new();
                for p in &el.props {
                    match p {
                        Property::Scalar(..) => row.push(next(&el.name)?),
                        Property::List(..) => {
                            let n = next(&el.name)? as usize;
                            for _ in 0..n {
                                row.push(next(&el.name)?);
                            }
                        }
                    }
                }
                r.push(row);
            }
            rows.push(r);
        }
    } else {
        let mut pos = body;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            if pos + n > bytes.len() {
                return Err(parse_err(path, format!("unexpected end of data reading {what}")));
            }
            let s = &bytes[pos..pos + n];
            pos += n;
            Ok(s)
        };
        for el in &elements {
            let mut r = Vec::with_capacity(el.count);
            for _ in 0..el.count {
                let mut row = Vec::new();
                for p in &el.props {
                    match *p {
                        Property::Scalar(_, t) => row.push(t.read(take(t.size(), &el.name)?)),
                        Property::List(c, t) => {
                            let n = c.read(take(c.size(), &el.name)?) as usize;
                            for _ in 0..n {
                                row.push(t.read(take(t.size(), &el.name)?));
                            }
                        }
                    }
                }
                r.push(row);
            }
            rows.push(r);
        }
    }
    Ok((elements, rows))
}

fn scalar_column(el: &Element, name: &str) -> Option<usize> {
    el.props.iter().position(|p| matches!(p, Property::Scalar(n, _) if n == name))
}

fn vertex_points(el: &Element, rows: &[Vec<f64>], path: &Path) -> Result<Vec<Point3>> {
    let cols: Vec<usize> = ["x", "y", "z"]
        .iter()
        .map(|c| scalar_column(el, c).ok_or_else(|| parse_err(path, format!("vertex element lacks `{c}`"))))
        .collect::<Result<_>>()?;
    if el.props.iter().any(|p| matches!(p, Property::List(..))) {
        return Err(parse_err(path, "list properties on vertices are not supported"));
    }
    Ok(rows.iter().map(|r| Point3::new(r[cols[0]], r[cols[1]], r[cols[2]])).collect())
}

pub fn parse_ply_mesh(bytes: &[u8], path: &Path) -> Result<TriMesh> {
    let (elements, rows) = parse_ply(bytes, path)?;
    let vi = elements.iter().position(|e| e.name == "vertex").ok_or_else(|| parse_err(path, "no vertex element"))?;
    let vertices = vertex_points(&elements[vi], &rows[vi], path)?;
    let fi = elements.iter().position(|e| e.name == "face").ok_or_else(|| parse_err(path, "no face element"))?;
    let mut faces = Vec::new();
    for (k, r) in rows[fi].iter().enumerate() {
        if r.len() < 3 {
            return Err(parse_err(path, format!("face {k} has fewer than 3 vertices")));
        }
        let idx: Vec<usize> = r.iter().map(|&v| v as usize).collect();
        for w in 1..idx.len() - 1 {
            faces.push([idx[0], idx[w], idx[w + 1]]);
        }
    }
    TriMesh::new(vertices, faces).map_err(|e| parse_err(path, e.to_string()))
}

/// Points with optional `score` (stability score) and `label` columns.
pub fn parse_ply_cloud(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let (elements, rows) = parse_ply(bytes, path)?;
    let vi = elements.iter().position(|e| e.name == "vertex").ok_or_else(|| parse_err(path, "no vertex element"))?;
    let el = &elements[vi];
    let pts = vertex_points(el, &rows[vi], path)?;
    let mut cloud = PointCloud::new(pts).map_err(|e| parse_err(path, e.to_string()))?;
    if let Some(c) = scalar_column(el, "score") {
        cloud = cloud.with_scores(rows[vi].iter().map(|r| r[c]).collect()).map_err(|e| parse_err(path, e.to_string()))?;
    }
    if let Some(c) = scalar_column(el, "label") {
        cloud = cloud
            .with_labels(rows[vi].iter().map(|r| r[c] as i64).collect())
            .map_err(|e| parse_err(path, e.to_string()))?;
    }
    Ok(cloud)
}

/// Binary little-endian PLY of a mesh (double vertices, int indices).
pub fn ply_mesh_bytes(mesh: &TriMesh) -> Vec<u8> {
    let mut out = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.faces.len()
    )
    .into_bytes();
    for v in &mesh.vertices {
        for c in [v.x, v.y, v.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for f in &mesh.faces {
        out.push(3);
        for &i in f {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    out
}

/// Binary little-endian PLY of a cloud, with `score`/`label` when present.
pub fn ply_cloud_bytes(cloud: &PointCloud) -> Vec<u8> {
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        cloud.len()
    );
    if cloud.scores().is_some() {
        header.push_str("property double score\n");
    }
    if cloud.labels().is_some() {
        header.push_str("property int label\n");
    }
    header.push_str("end_header\n");
    let mut out = header.into_bytes();
    for (i, p) in cloud.points().iter().enumerate() {
        for c in [p.x, p.y, p.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
        if let Some(s) = cloud.scores() {
            out.extend_from_slice(&s[i].to_le_bytes());
        }
        if let Some(l) = cloud.labels() {
            out.extend_from_slice(&(l[i] as i32).to_le_bytes());
        }
    }
    out
}

/// `x y z [score] [label]` per line; `#` starts a comment. All data lines
/// must have the same column count.
pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let mut pts = Vec::new();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(path, format!("line {}: {e}", ln + 1)))?;
        if !(3..=5).contains(&vals.len()) {
            return Err(parse_err(path, format!("line {}: expected 3 to 5 columns, found {}", ln + 1, vals.len())));
        }
        if *width.get_or_insert(vals.len()) != vals.len() {
            return Err(parse_err(path, format!("line {}: column count changed", ln + 1)));
        }
        pts.push(Point3::new(vals[0], vals[1], vals[2]));
        if vals.len() >= 4 {
            scores.push(vals[3]);
        }
        if vals.len() == 5 {
            labels.push(vals[4] as i64);
        }
    }
    let mut cloud = PointCloud::new(pts).map_err(|e| parse_err(path, e.to_string()))?;
    if width.unwrap_or(3) >= 4 {
        cloud = cloud.with_scores(scores).map_err(|e| parse_err(path, e.to_string()))?;
    }
    if width == Some(5) {
        cloud = cloud.with_labels(labels).map_err(|e| parse_err(path, e.to_string()))?;
    }
    Ok(cloud)
}

pub fn xyz_string(cloud: &PointCloud) -> String {
    let mut s = String::new();
    for (i, p) in cloud.points().iter().enumerate() {
        s.push_str(&format!("{} {} {}", p.x, p.y, p.z));
        if let Some(sc) = cloud.scores() {
            s.push_str(&format!(" {}", sc[i]));
        }
        if let Some(l) = cloud.labels() {
            if cloud.scores().is_none() {
                s.push_str(" 0");
            }
            s.push_str(&format!(" {}", l[i]));
        }
        s.push('\n');
    }
    s
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Load a mesh by extension (`.obj` or `.ply`).
pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    match extension(path).as_str() {
        "obj" => parse_obj(&fs::read_to_string(path)?, path),
        "ply" => parse_ply_mesh(&fs::read(path)?, path),
        other => Err(parse_err(path, format!("unsupported mesh extension `{other}`"))),
    }
}

/// Load a cloud by extension (`.ply`, `.xyz` or `.txt`).
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    match extension(path).as_str() {
        "ply" => parse_ply_cloud(&fs::read(path)?, path),
        "xyz" | "txt" => parse_xyz(&fs::read_to_string(path)?, path),
        other => Err(parse_err(path, format!("unsupported cloud extension `{other}`"))),
    }
}

pub fn mesh_bytes(mesh: &TriMesh, path: &Path) -> Result<Vec<u8>> {
    match extension(path).as_str() {
        "obj" => Ok(obj_string(mesh).into_bytes()),
        "ply" => Ok(ply_mesh_bytes(mesh)),
        other => Err(parse_err(path, format!("unsupported mesh extension `{other}`"))),
    }
}

pub fn cloud_bytes(cloud: &PointCloud, path: &Path) -> Result<Vec<u8>> {
    match extension(path).as_str() {
        "ply" => Ok(ply_cloud_bytes(cloud)),
        "xyz" | "txt" => Ok(xyz_string(cloud).into_bytes()),
        other => Err(parse_err(path, format!("unsupported cloud extension `{other}`"))),
    }
}

/// Write through a sibling temporary file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
