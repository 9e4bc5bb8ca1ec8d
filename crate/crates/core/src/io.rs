//! OFF meshes, measurement-set and point-configuration JSON, and a
//! byte-stable JSON writer.
//!
//! Measurement sets look like
//!
//! ```json
//! {"dim": 3, "measurements": [{"type": "face_distance", "ids": [0, 1]}]}
//! ```
//!
//! with types `face_distance`, `face_angle` (apex first), `dihedral` (face
//! ids), `distance`, `angle` (apex in the middle) and `diagonal_angle`. All
//! ids are 0-based, like OFF.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{fit_realization, Measurement3D, Realization};
use crate::incidence::AbstractPolyhedron;
use crate::measure::{Point, SimpleMeasurement};
use crate::rigidity::SufficiencyReport;

/// Vertex coordinates and face cycles from OFF text.
pub fn parse_off(text: &str) -> Result<(Vec<Point>, Vec<Vec<usize>>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: &str| Error::Parse(format!("line {line}: {msg}"));

    let (mut ln, mut first) = lines.next().ok_or_else(|| Error::Parse("empty OFF input".into()))?;
    if first == "OFF" {
        (ln, first) = lines.next().ok_or_else(|| err(ln, "missing counts line"))?;
    } else if let Some(rest) = first.strip_prefix("OFF") {
        first = rest.trim();
    }
    let counts: Vec<usize> = first
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(ln, &format!("bad count `{t}`"))))
        .collect::<Result<_>>()?;
    if counts.len() < 2 {
        return Err(err(ln, "counts line needs vertex and face counts"));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| Error::Parse("unexpected end of vertex list".into()))?;
        let c: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(ln, &format!("bad coordinate `{t}`"))))
            .collect::<Result<_>>()?;
        if c.len() != 3 || c.iter().any(|x| !x.is_finite()) {
            return Err(err(ln, "vertex line needs three finite coordinates"));
        }
        vertices.push(Point::new(c[0], c[1], c[2]));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| Error::Parse("unexpected end of face list".into()))?;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(ln, &format!("bad index `{t}`"))))
            .collect::<Result<_>>()?;
        let (&k, rest) = ids.split_first().ok_or_else(|| err(ln, "empty face line"))?;
        // Trailing values after the cycle (colours) are ignored.
        if rest.len() < k {
            return Err(err(ln, &format!("face declares {k} vertices but lists {}", rest.len())));
        }
        let cycle = rest[..k].to_vec();
        if let Some(&bad) = cycle.iter().find(|&&v| v >= nv) {
            return Err(err(ln, &format!("vertex index {bad} out of range")));
        }
        faces.push(cycle);
    }
    Ok((vertices, faces))
}

/// Parses OFF text into a validated polyhedron and its fitted realization.
pub fn load_polyhedron(text: &str) -> Result<(AbstractPolyhedron, Realization)> {
    let (vertices, faces) = parse_off(text)?;
    let poly = AbstractPolyhedron::from_faces(faces)?;
    if poly.vertex_count() != vertices.len() {
        return Err(Error::Parse(format!(
            "{} vertices declared but faces use {}",
            vertices.len(),
            poly.vertex_count()
        )));
    }
    let r = fit_realization(&poly, &vertices)?;
    Ok((poly, r))
}

pub fn write_off(vertices: &[Point], faces: &[Vec<usize>]) -> String {
    let mut s = format!("OFF\n{} {} 0\n", vertices.len(), faces.len());
    for p in vertices {
        let _ = writeln!(s, "{} {} {}", fmt_float(p.x), fmt_float(p.y), fmt_float(p.z));
    }
    for f in faces {
        let ids: Vec<String> = f.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{} {}", f.len(), ids.join(" "));
    }
    s
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    format!("{x:e}")
}

/// A parsed measurement file.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementSet {
    Polyhedral(Vec<Measurement3D>),
    Points { dim: usize, measurements: Vec<SimpleMeasurement> },
}

pub fn parse_measurements(text: &str) -> Result<MeasurementSet> {
    let v: Value = serde_json::from_str(text)?;
    let dim = v.get("dim").and_then(Value::as_u64).ok_or_else(|| Error::Parse("missing integer `dim`".into()))? as usize;
    if dim != 2 && dim != 3 {
        return Err(Error::Parse(format!("dim must be 2 or 3, got {dim}")));
    }
    let items = v
        .get("measurements")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("missing `measurements` array".into()))?;
    let mut poly = Vec::new();
    let mut simple = Vec::new();
    for (k, item) in items.iter().enumerate() {
        let ty = item.get("type").and_then(Value::as_str).ok_or_else(|| Error::Parse(format!("measurement {k}: missing `type`")))?;
        let ids: Vec<usize> = item
            .get("ids")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse(format!("measurement {k}: missing `ids`")))?
            .iter()
            .map(|x| x.as_u64().map(|u| u as usize).ok_or_else(|| Error::Parse(format!("measurement {k}: ids must be non-negative integers"))))
            .collect::<Result<_>>()?;
        let arity = |n: usize| {
            if ids.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!("measurement {k}: `{ty}` needs {n} ids, got {}", ids.len())))
            }
        };
        match ty {
            "face_distance" => {
                arity(2)?;
                poly.push(Measurement3D::FaceDistance(ids[0], ids[1]));
            }
            "face_angle" => {
                arity(3)?;
                poly.push(Measurement3D::FaceAngle { apex: ids[0], end1: ids[1], end2: ids[2] });
            }
            "dihedral" => {
                arity(2)?;
                poly.push(Measurement3D::DihedralAngle(ids[0], ids[1]));
            }
            "distance" => {
                arity(2)?;
                simple.push(SimpleMeasurement::Distance(ids[0], ids[1]));
            }
            "angle" => {
                arity(3)?;
                simple.push(SimpleMeasurement::Angle(ids[0], ids[1], ids[2]));
            }
            "diagonal_angle" => {
                arity(4)?;
                simple.push(SimpleMeasurement::DiagonalAngle(ids[0], ids[1], ids[2], ids[3]));
            }
            other => return Err(Error::Parse(format!("measurement {k}: unknown type `{other}`"))),
        }
    }
    match (poly.is_empty(), simple.is_empty()) {
        (false, false) => Err(Error::Parse("cannot mix polyhedral and point measurements".into())),
        (false, true) if dim != 3 => Err(Error::Parse("polyhedral measurements need dim 3".into())),
        (false, true) => Ok(MeasurementSet::Polyhedral(poly)),
        _ => Ok(MeasurementSet::Points { dim, measurements: simple }),
    }
}

pub fn measurement3d_json(m: &Measurement3D) -> Value {
    match *m {
        Measurement3D::FaceDistance(v, w) => json!({"type": "face_distance", "ids": [v, w]}),
        Measurement3D::FaceAngle { apex, end1, end2 } => json!({"type": "face_angle", "ids": [apex, end1, end2]}),
        Measurement3D::DihedralAngle(f, g) => json!({"type": "dihedral", "ids": [f, g]}),
    }
}

pub fn simple_measurement_json(m: &SimpleMeasurement) -> Value {
    let ty = match m {
        SimpleMeasurement::Distance(..) => "distance",
        SimpleMeasurement::Angle(..) => "angle",
        SimpleMeasurement::DiagonalAngle(..) => "diagonal_angle",
    };
    json!({"type": ty, "ids": m.ids()})
}

pub fn measurement_set_json(set: &MeasurementSet) -> Value {
    match set {
        MeasurementSet::Polyhedral(ms) => json!({"dim": 3, "measurements": ms.iter().map(measurement3d_json).collect::<Vec<_>>()}),
        MeasurementSet::Points { dim, measurements } => {
            json!({"dim": dim, "measurements": measurements.iter().map(simple_measurement_json).collect::<Vec<_>>()})
        }
    }
}

pub fn report_json(r: &SufficiencyReport) -> Value {
    json!({
        "mode": r.mode,
        "E": r.edge_count,
        "achievedRank": r.achieved_rank,
        "targetRank": r.target_rank,
        "sufficient": r.sufficient,
        "flexDimension": r.flex_dimension,
        "selected": r.selected.iter().map(measurement3d_json).collect::<Vec<_>>(),
        "tolerance": r.tolerance,
    })
}

/// Labelled points, optionally with faces (3D coplanarity plus convexity)
/// or a convex-polygon requirement (2D).
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfigFile {
    pub dim: usize,
    pub points: Vec<Point>,
    pub faces: Vec<Vec<usize>>,
    pub convex: bool,
}

pub fn parse_config(text: &str) -> Result<PointConfigFile> {
    let v: Value = serde_json::from_str(text)?;
    let dim = v.get("dim").and_then(Value::as_u64).ok_or_else(|| Error::Parse("missing integer `dim`".into()))? as usize;
    if dim != 2 && dim != 3 {
        return Err(Error::Parse(format!("dim must be 2 or 3, got {dim}")));
    }
    let raw = v.get("points").and_then(Value::as_array).ok_or_else(|| Error::Parse("missing `points` array".into()))?;
    let mut points = Vec::with_capacity(raw.len());
    for (k, p) in raw.iter().enumerate() {
        let c: Vec<f64> = p
            .as_array()
            .ok_or_else(|| Error::Parse(format!("point {k} is not an array")))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::Parse(format!("point {k}: non-numeric coordinate"))))
            .collect::<Result<_>>()?;
        if c.len() != dim {
            return Err(Error::Parse(format!("point {k} has {} coordinates, expected {dim}", c.len())));
        }
        points.push(Point::new(c[0], c[1], if dim == 3 { c[2] } else { 0.0 }));
    }
    let faces = match v.get("faces") {
        None | Some(Value::Null) => Vec::new(),
        Some(f) => serde_json::from_value::<Vec<Vec<usize>>>(f.clone())
            .map_err(|e| Error::Parse(format!("bad `faces`: {e}")))?,
    };
    if faces.iter().flatten().any(|&i| i >= points.len()) {
        return Err(Error::Parse("face references a missing point".into()));
    }
    let convex = v.get("convex").and_then(Value::as_bool).unwrap_or(false);
    Ok(PointConfigFile { dim, points, faces, convex })
}

pub fn config_json(dim: usize, points: &[Point], faces: &[Vec<usize>], convex: bool) -> Value {
    let mut m = Map::new();
    m.insert("dim".into(), json!(dim));
    m.insert("points".into(), points_json(dim, points));
    if !faces.is_empty() {
        m.insert("faces".into(), json!(faces));
    }
    if convex {
        m.insert("convex".into(), json!(true));
    }
    Value::Object(m)
}

pub fn points_json(dim: usize, points: &[Point]) -> Value {
    Value::Array(points.iter().map(|p| json!(p.iter().take(dim).copied().collect::<Vec<f64>>())).collect())
}

/// Pretty JSON with sorted keys and every float at 17 significant digits, so
/// identical values always give identical bytes.
pub fn to_canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => out.push_str(&i.to_string()),
            (_, Some(u), _) => out.push_str(&u.to_string()),
            (_, _, Some(f)) => out.push_str(&fmt_float(f)),
            _ => out.push_str(&n.to_string()),
        },
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(|x| x.is_number()) {
                out.push('[');
                for (k, x) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, indent);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (k, x) in items.iter().enumerate() {
                    out.push_str(&pad(indent + 1));
                    write_value(out, x, indent + 1);
                    out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&pad(indent));
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*key], indent + 1);
                out.push_str(if k + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}
