//! Platonic solids and the two families of hexahedra whose twelve face
//! diagonals all have length √2.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{fit_realization_with_tol, Realization, PLANARITY_TOL};
use crate::incidence::AbstractPolyhedron;
use crate::measure::Point;

pub const PLATONIC_NAMES: [&str; 5] = ["tetrahedron", "cube", "octahedron", "dodecahedron", "icosahedron"];

/// Regular solid with edge length `scale`, vertex centroid at the origin.
pub fn platonic(name: &str, scale: f64) -> Result<(AbstractPolyhedron, Realization)> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let pts = platonic_points(name)?;
    let edge = min_pairwise_distance(&pts);
    let pts: Vec<Point> = pts.into_iter().map(|p| p * (scale / edge)).collect();
    let poly = AbstractPolyhedron::from_faces(convex_hull_faces(&pts)?)?;
    let r = fit_realization_with_tol(&poly, &pts, PLANARITY_TOL)?;
    Ok((poly, r))
}

fn platonic_points(name: &str) -> Result<Vec<Point>> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut pts = Vec::new();
    let signs = [1.0, -1.0];
    match name {
        "tetrahedron" => {
            for p in [[1., 1., 1.], [1., -1., -1.], [-1., 1., -1.], [-1., -1., 1.]] {
                pts.push(Point::from(p));
            }
        }
        "cube" => {
            for &x in &signs {
                for &y in &signs {
                    for &z in &signs {
                        pts.push(Point::new(x, y, z));
                    }
                }
            }
        }
        "octahedron" => {
            for k in 0..3 {
                for &s in &signs {
                    let mut p = Point::zeros();
                    p[k] = s;
                    pts.push(p);
                }
            }
        }
        "icosahedron" => {
            for &s in &signs {
                for &t in &signs {
                    pts.extend(cyclic(Point::new(0.0, s, t * phi)));
                }
            }
        }
        "dodecahedron" => {
            for &x in &signs {
                for &y in &signs {
                    for &z in &signs {
                        pts.push(Point::new(x, y, z));
                    }
                }
            }
            for &s in &signs {
                for &t in &signs {
                    pts.extend(cyclic(Point::new(0.0, s / phi, t * phi)));
                }
            }
        }
        other => return Err(Error::UnknownName(other.to_string())),
    }
    Ok(pts)
}

fn cyclic(p: Point) -> [Point; 3] {
    [p, Point::new(p.z, p.x, p.y), Point::new(p.y, p.z, p.x)]
}

fn min_pairwise_distance(pts: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min((pts[i] - pts[j]).norm());
        }
    }
    best
}

/// Face cycles of the convex hull of points in convex position, oriented
/// counter-clockwise seen from outside.
///
/// Brute force over vertex triples; only meant for small solids.
pub fn convex_hull_faces(pts: &[Point]) -> Result<Vec<Vec<usize>>> {
    let n = pts.len();
    let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1.0);
    let eps = 1e-9 * scale;
    let mut faces: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let normal = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
                if normal.norm() <= eps {
                    continue;
                }
                let normal = normal.normalize();
                let offsets: Vec<f64> = pts.iter().map(|p| normal.dot(&(p - pts[i]))).collect();
                let above = offsets.iter().any(|&d| d > eps);
                let below = offsets.iter().any(|&d| d < -eps);
                if above && below {
                    continue;
                }
                let on: Vec<usize> = (0..n).filter(|&v| offsets[v].abs() <= eps).collect();
                if on[0] != i || on[1] != j || on[2] != k {
                    // The same face is reached from its lexicographically first triple.
                    continue;
                }
                let outward = if below { normal } else { -normal };
                faces.push(order_cycle(pts, &on, &outward));
            }
        }
    }
    if faces.len() < 4 {
        return Err(Error::InvalidArgument("points span no solid hull".into()));
    }
    faces.sort();
    Ok(faces)
}

/// Sorts coplanar vertex ids counter-clockwise about `normal`, starting at
/// the smallest id.
fn order_cycle(pts: &[Point], ids: &[usize], normal: &Vector3<f64>) -> Vec<usize> {
    let c = ids.iter().map(|&v| pts[v]).sum::<Point>() / ids.len() as f64;
    let e1 = (pts[ids[0]] - c).normalize();
    let e2 = normal.cross(&e1);
    let mut keyed: Vec<(f64, usize)> = ids
        .iter()
        .map(|&v| {
            let d = pts[v] - c;
            (d.dot(&e2).atan2(d.dot(&e1)).rem_euclid(std::f64::consts::TAU), v)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cycle: Vec<usize> = keyed.into_iter().map(|(_, v)| v).collect();
    let start = cycle.iter().enumerate().min_by_key(|(_, &v)| v).map(|(i, _)| i).unwrap_or(0);
    cycle.rotate_left(start);
    cycle
}

/// Rotation matrix of the unit quaternion `q0 + q1 i + q2 j + q3 k`.
pub fn quaternion_rotation(q0: f64, q1: f64, q2: f64, q3: f64) -> Matrix3<f64> {
    Matrix3::new(
        1.0 - 2.0 * (q2 * q2 + q3 * q3),
        2.0 * (q1 * q2 - q0 * q3),
        2.0 * (q1 * q3 + q0 * q2),
        2.0 * (q1 * q2 + q0 * q3),
        1.0 - 2.0 * (q1 * q1 + q3 * q3),
        2.0 * (q2 * q3 - q0 * q1),
        2.0 * (q1 * q3 - q0 * q2),
        2.0 * (q2 * q3 + q0 * q1),
        1.0 - 2.0 * (q1 * q1 + q2 * q2),
    )
}

/// The regular tetrahedron `a_0..a_3` shared by both families.
pub fn tetrahedron_a() -> [Point; 4] {
    [Point::new(0., 0., 0.), Point::new(0., 1., 1.), Point::new(1., 0., 1.), Point::new(1., 1., 0.)]
}

/// Which family a hexahedron belongs to, with its quaternion parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HexahedronParams {
    /// `q1 = q2 = q3`.
    A { q1: f64 },
    /// `q3 = 0`.
    B { q1: f64, q2: f64 },
}

impl HexahedronParams {
    pub fn check(&self) -> Result<()> {
        match *self {
            HexahedronParams::A { q1 } => {
                if !(q1.abs() < 1.0 / 12f64.sqrt()) {
                    return Err(Error::OutOfValidityRegion(format!("family a needs |q1| < 1/sqrt(12), got {q1}")));
                }
            }
            HexahedronParams::B { q1, q2 } => {
                let s = q1.abs() + q2.abs();
                let inside = s < 1.0 / 2f64.sqrt()
                    && (1.0 - s * s) * (1.0 - 2.0 * s * s) > 2.0 * (q1 * q2).abs() * s * s;
                if !inside {
                    return Err(Error::OutOfValidityRegion(format!("family b region excludes (q1, q2) = ({q1}, {q2})")));
                }
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<(AbstractPolyhedron, Realization)> {
        match *self {
            HexahedronParams::A { q1 } => hexahedron_family_a(q1),
            HexahedronParams::B { q1, q2 } => hexahedron_family_b(q1, q2),
        }
    }
}

/// Three-fold symmetric family; `q1 = 0` is the unit cube.
///
/// Vertex ids: `a_i` is `i`, `b_i` is `4 + i`.
pub fn hexahedron_family_a(q1: f64) -> Result<(AbstractPolyhedron, Realization)> {
    HexahedronParams::A { q1 }.check()?;
    let q0 = (1.0 - 3.0 * q1 * q1).sqrt();
    let b = (1.0 - 4.0 * q1 * q1) / (1.0 - 6.0 * q1 * q1);
    let b0 = Point::new(b, b, b);
    let b1 = b0 - Point::new(4.0 * q1 * q1, (q0 - q1).powi(2), (q0 + q1).powi(2));
    let b2 = Point::new(b1.z, b1.x, b1.y);
    let b3 = Point::new(b2.z, b2.x, b2.y);
    assemble_hexahedron([b0, b1, b2, b3])
}

/// Family with a plane of symmetry (`q3 = 0`); `q1 = q2 = 0` is the unit cube.
pub fn hexahedron_family_b(q1: f64, q2: f64) -> Result<(AbstractPolyhedron, Realization)> {
    HexahedronParams::B { q1, q2 }.check()?;
    let q0 = (1.0 - q1 * q1 - q2 * q2).sqrt();
    let b0 = Point::new(
        1.0 + q0 * q2 + q1 * q2 - q2 * q2 + 2.0 * q1 * q2 * q2 / q0,
        q0 * q0 - q0 * q1 + q1 * q2 + q2 * q2 - 2.0 * q1 * q1 * q2 / q0,
        q0 * q0 + q0 * q1 - q0 * q2 + 2.0 * q1 * q2,
    );
    let l = quaternion_rotation(q0, q1, q2, 0.0);
    let a = tetrahedron_a();
    assemble_hexahedron([b0, b0 - l * a[1], b0 - l * a[2], b0 - l * a[3]])
}

/// Face cycles `(a_i, b_j, a_k, b_l)` for every pair `{i, k}`, with `{j, l}`
/// the complementary pair, oriented outward.
fn assemble_hexahedron(b: [Point; 4]) -> Result<(AbstractPolyhedron, Realization)> {
    let a = tetrahedron_a();
    let pts: Vec<Point> = a.iter().chain(b.iter()).copied().collect();
    let centroid = pts.iter().sum::<Point>() / 8.0;
    let mut faces = Vec::new();
    for i in 0..4 {
        for k in i + 1..4 {
            let rest: Vec<usize> = (0..4).filter(|&x| x != i && x != k).collect();
            let mut cycle = vec![i, 4 + rest[0], k, 4 + rest[1]];
            if newell_normal(&pts, &cycle).dot(&(face_centroid(&pts, &cycle) - centroid)) < 0.0 {
                cycle.reverse();
                cycle.rotate_right(1);
            }
            faces.push(cycle);
        }
    }
    let poly = AbstractPolyhedron::from_faces(faces)?;
    let r = fit_realization_with_tol(&poly, &pts, PLANARITY_TOL)?;
    Ok((poly, r))
}

fn face_centroid(pts: &[Point], cycle: &[usize]) -> Point {
    cycle.iter().map(|&v| pts[v]).sum::<Point>() / cycle.len() as f64
}

fn newell_normal(pts: &[Point], cycle: &[usize]) -> Vector3<f64> {
    let mut n = Vector3::zeros();
    for (k, &v) in cycle.iter().enumerate() {
        let p = pts[v];
        let q = pts[cycle[(k + 1) % cycle.len()]];
        n += p.cross(&q);
    }
    n
}

/// Maximum deviation of the face diagonals from their mean length.
pub fn verify_equal_face_diagonals(poly: &AbstractPolyhedron, r: &Realization) -> Result<f64> {
    let mut lengths = Vec::new();
    for (f, cycle) in poly.faces().iter().enumerate() {
        let &[p, q, s, t] = cycle.as_slice() else {
            return Err(Error::NonQuadFace(f));
        };
        lengths.push((r.vertices[p] - r.vertices[s]).norm());
        lengths.push((r.vertices[q] - r.vertices[t]).norm());
    }
    let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
    Ok(lengths.iter().map(|l| (l - mean).abs()).fold(0.0, f64::max))
}

/// Mean face-diagonal length of a quad-faced polyhedron.
pub fn mean_face_diagonal(poly: &AbstractPolyhedron, r: &Realization) -> Result<f64> {
    let mut sum = 0.0;
    for (f, cycle) in poly.faces().iter().enumerate() {
        let &[p, q, s, t] = cycle.as_slice() else {
            return Err(Error::NonQuadFace(f));
        };
        sum += (r.vertices[p] - r.vertices[s]).norm() + (r.vertices[q] - r.vertices[t]).norm();
    }
    Ok(sum / (2 * poly.face_count()) as f64)
}
