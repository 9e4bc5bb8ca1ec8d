//! Realizations of abstract polyhedra and measurements on them.
//!
//! A realization stores a point per vertex and, per face, the coefficients
//! `(a, b, c)` of its plane `a x + b y + c z = 1`. The full coordinate vector
//! is ordered `(x_1, y_1, z_1, …, x_V, y_V, z_V, a_1, b_1, c_1, …, a_F, b_F, c_F)`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::incidence::AbstractPolyhedron;
use crate::measure::{self, Point};

/// Default planarity tolerance, in units of the model diameter.
pub const PLANARITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub vertices: Vec<Point>,
    pub planes: Vec<Vector3<f64>>,
}

/// A measurement on a realized polyhedron.
///
/// `FaceAngle` is the angle at `apex` between the rays to `end1` and `end2`;
/// `DihedralAngle` is the interior angle between two adjacent faces, in
/// `(0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measurement3D {
    FaceDistance(usize, usize),
    FaceAngle { apex: usize, end1: usize, end2: usize },
    DihedralAngle(usize, usize),
}

impl Measurement3D {
    pub fn is_scale_invariant(&self) -> bool {
        !matches!(self, Measurement3D::FaceDistance(..))
    }

    /// Checks ids and incidence preconditions against `poly`.
    pub fn validate(&self, poly: &AbstractPolyhedron) -> Result<()> {
        let nv = poly.vertex_count();
        let bad = |msg: String| Err(Error::InvalidMeasurement(msg));
        match *self {
            Measurement3D::FaceDistance(v, w) => {
                if v >= nv || w >= nv || v == w {
                    return bad(format!("face distance ({v}, {w}): bad vertex ids"));
                }
                if !poly.share_face(&[v, w]) {
                    return bad(format!("vertices {v} and {w} share no face"));
                }
            }
            Measurement3D::FaceAngle { apex, end1, end2 } => {
                let ids = [apex, end1, end2];
                if ids.iter().any(|&i| i >= nv) {
                    return bad(format!("face angle {ids:?}: vertex id out of range"));
                }
                if !poly.share_face(&ids) {
                    return bad(format!("face angle {ids:?}: vertices share no face"));
                }
            }
            Measurement3D::DihedralAngle(f, g) => {
                if f >= poly.face_count() || g >= poly.face_count() || f == g {
                    return bad(format!("dihedral ({f}, {g}): bad face ids"));
                }
                let shared = poly.face(f).iter().filter(|v| poly.face(g).contains(v)).count();
                if shared < 2 {
                    return bad(format!("faces {f} and {g} share no edge"));
                }
            }
        }
        Ok(())
    }
}

impl Realization {
    pub fn coordinate_count(&self) -> usize {
        3 * (self.vertices.len() + self.planes.len())
    }

    pub fn plane_offset(&self) -> usize {
        3 * self.vertices.len()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.coordinate_count(),
            self.vertices.iter().chain(self.planes.iter()).flat_map(|p| p.iter().copied()),
        )
    }

    pub fn from_vector(x: &DVector<f64>, vertex_count: usize, face_count: usize) -> Self {
        let pt = |k: usize| Vector3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]);
        Self {
            vertices: (0..vertex_count).map(pt).collect(),
            planes: (vertex_count..vertex_count + face_count).map(pt).collect(),
        }
    }

    pub fn centroid(&self) -> Point {
        self.vertices.iter().sum::<Point>() / self.vertices.len() as f64
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, p) in self.vertices.iter().enumerate() {
            for q in &self.vertices[i + 1..] {
                d = d.max((p - q).norm());
            }
        }
        d
    }

    /// Uniform scaling about the origin; plane coefficients scale inversely.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| p * s).collect(),
            planes: self.planes.iter().map(|n| n / s).collect(),
        }
    }

    /// Applies `p ↦ rot · p + shift` to every vertex and moves the planes along.
    pub fn moved(&self, rot: &Matrix3<f64>, shift: &Vector3<f64>) -> Self {
        let planes = self
            .planes
            .iter()
            .map(|n| {
                let rn = rot * n;
                rn / (1.0 + rn.dot(shift))
            })
            .collect();
        Self { vertices: self.vertices.iter().map(|p| rot * p + shift).collect(), planes }
    }

    pub fn max_vertex_distance(&self, other: &Self) -> f64 {
        self.vertices
            .iter()
            .zip(&other.vertices)
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max)
    }
}

/// Builds a realization from vertex positions: recentres the vertex centroid
/// at the origin and fits each face plane by least squares on
/// `a x + b y + c z = 1`.
pub fn fit_realization(poly: &AbstractPolyhedron, coords: &[Point]) -> Result<Realization> {
    fit_realization_with_tol(poly, coords, PLANARITY_TOL)
}

pub fn fit_realization_with_tol(poly: &AbstractPolyhedron, coords: &[Point], tol: f64) -> Result<Realization> {
    if coords.len() != poly.vertex_count() {
        return Err(Error::InvalidArgument(format!(
            "{} coordinates for {} vertices",
            coords.len(),
            poly.vertex_count()
        )));
    }
    let centre = coords.iter().sum::<Point>() / coords.len() as f64;
    let vertices: Vec<Point> = coords.iter().map(|p| p - centre).collect();
    let scale = Realization { vertices: vertices.clone(), planes: vec![] }.diameter();
    if scale == 0.0 {
        return Err(Error::InvalidArgument("all vertices coincide".into()));
    }

    let mut planes = Vec::with_capacity(poly.face_count());
    for (f, cycle) in poly.faces().iter().enumerate() {
        // Fit on unit-diameter coordinates so the tolerance is scale free.
        let rows: Vec<Point> = cycle.iter().map(|&v| vertices[v] / scale).collect();
        let m = DMatrix::from_fn(rows.len(), 3, |i, k| rows[i][k]);
        let sv = crate::linalg::singular_values(&m);
        if sv.len() < 3 || sv[2] <= 1e-10 * sv[0] {
            return Err(Error::DegenerateFace {
                face: f,
                reason: "vertices are collinear or the plane passes through the centroid".into(),
            });
        }
        let ones = DVector::from_element(rows.len(), 1.0);
        let sol = crate::linalg::min_norm_solve(&m, &ones, 1e-14);
        let n = Vector3::new(sol[0], sol[1], sol[2]);
        let residual = rows.iter().map(|p| (n.dot(p) - 1.0).abs() / n.norm()).fold(0.0, f64::max);
        if residual > tol {
            return Err(Error::NonPlanarFace { face: f, residual });
        }
        planes.push(n / scale);
    }

    for (f, n) in planes.iter().enumerate() {
        for (v, p) in vertices.iter().enumerate() {
            if (n.dot(p) - 1.0) / n.norm() > tol * scale {
                return Err(Error::NotConvexPolyhedron { vertex: v, face: f });
            }
        }
    }
    Ok(Realization { vertices, planes })
}

/// Vertex-on-face residuals `a_j x_i + b_j y_i + c_j z_i − 1`, in incidence order.
pub fn phi(poly: &AbstractPolyhedron, r: &Realization) -> DVector<f64> {
    DVector::from_iterator(
        poly.incidence().len(),
        poly.incidence().iter().map(|i| r.planes[i.face].dot(&r.vertices[i.vertex]) - 1.0),
    )
}

/// Jacobian of [`phi`], `2E × (3V + 3F)`.
pub fn d_phi(poly: &AbstractPolyhedron, r: &Realization) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(poly.incidence().len(), r.coordinate_count());
    let off = r.plane_offset();
    for (row, inc) in poly.incidence().iter().enumerate() {
        let (n, p) = (&r.planes[inc.face], &r.vertices[inc.vertex]);
        for k in 0..3 {
            m[(row, 3 * inc.vertex + k)] = n[k];
            m[(row, off + 3 * inc.face + k)] = p[k];
        }
    }
    m
}

pub fn evaluate(m: &Measurement3D, r: &Realization) -> Result<f64> {
    Ok(value_and_gradient(m, r)?.0)
}

/// Analytic gradient of `m` with respect to the full coordinate vector.
pub fn gradient(m: &Measurement3D, r: &Realization) -> Result<DVector<f64>> {
    Ok(value_and_gradient(m, r)?.1)
}

pub fn value_and_gradient(m: &Measurement3D, r: &Realization) -> Result<(f64, DVector<f64>)> {
    let mut g = DVector::zeros(r.coordinate_count());
    let mut put = |block: usize, v: &Point| {
        for k in 0..3 {
            g[3 * block + k] += v[k];
        }
    };
    let value = match *m {
        Measurement3D::FaceDistance(v, w) => {
            let (d, gv, gw) = measure::distance(&r.vertices[v], &r.vertices[w])?;
            put(v, &gv);
            put(w, &gw);
            d
        }
        Measurement3D::FaceAngle { apex, end1, end2 } => {
            let (a, gs) = measure::angle_at(&r.vertices[apex], &r.vertices[end1], &r.vertices[end2])?;
            put(apex, &gs[0]);
            put(end1, &gs[1]);
            put(end2, &gs[2]);
            a
        }
        Measurement3D::DihedralAngle(f, h) => {
            // (a, b, c) points away from the origin; flip it where the
            // origin is outside, using the vertex centroid as interior point.
            let nv = r.vertices.len();
            let c = r.centroid();
            let side = |n: &Vector3<f64>| if n.dot(&c) < 1.0 { 1.0 } else { -1.0 };
            let (sf, sh) = (side(&r.planes[f]), side(&r.planes[h]));
            let (between, gf, gh) = measure::vector_angle(&(sf * r.planes[f]), &(sh * r.planes[h]))?;
            put(nv + f, &(-sf * gf));
            put(nv + h, &(-sh * gh));
            std::f64::consts::PI - between
        }
    };
    Ok((value, g))
}

/// Stacked gradients of a measurement list, `|S| × (3V + 3F)`.
pub fn d_psi(measurements: &[Measurement3D], r: &Realization) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(measurements.len(), r.coordinate_count());
    for (i, m) in measurements.iter().enumerate() {
        out.set_row(i, &gradient(m, r)?.transpose());
    }
    Ok(out)
}

/// Rotation taking `v_1 → v_2` to the +x direction and `v_3` into the upper
/// half of the plane through `v_1` parallel to the xy-plane.
pub fn normalizing_rotation(r: &Realization) -> Result<Matrix3<f64>> {
    if r.vertices.len() < 3 {
        return Err(Error::CollinearFrame);
    }
    let (p1, p2, p3) = (r.vertices[0], r.vertices[1], r.vertices[2]);
    let ex = p2 - p1;
    let scale = ex.norm().max((p3 - p1).norm());
    if ex.norm() <= 1e-12 * scale {
        return Err(Error::CollinearFrame);
    }
    let ex = ex.normalize();
    let w = p3 - p1;
    let ey = w - ex * ex.dot(&w);
    if ey.norm() <= 1e-10 * scale {
        return Err(Error::CollinearFrame);
    }
    let ey = ey.normalize();
    let ez = ex.cross(&ey);
    Ok(Matrix3::from_rows(&[ex.transpose(), ey.transpose(), ez.transpose()]))
}

/// Canonical representative of the congruence class of `r`.
///
/// The orientation is fixed by the first three vertices (`v_1 v_2` along +x,
/// `v_3` at larger y, `z_1 = z_2 = z_3`) and the translation by putting the
/// vertex centroid at the origin, which keeps every face plane off the origin.
pub fn normalize(r: &Realization) -> Result<Realization> {
    let rot = normalizing_rotation(r)?;
    let c = r.centroid();
    Ok(r.moved(&rot, &(-(rot * c))))
}

/// Whether two realizations are properly congruent within `tol` (maximum
/// vertex distance after normalization).
pub fn congruent(r1: &Realization, r2: &Realization, tol: f64) -> Result<bool> {
    Ok(normalize(r1)?.max_vertex_distance(&normalize(r2)?) <= tol)
}

/// Congruence allowing reflections: `r2` is also compared with its mirror image.
pub fn congruent_or_mirror(r1: &Realization, r2: &Realization, tol: f64) -> Result<bool> {
    if congruent(r1, r2, tol)? {
        return Ok(true);
    }
    let mirror = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
    congruent(r1, &r2.moved(&mirror, &Vector3::zeros()), tol)
}

/// Enclosed volume (divergence theorem over fan-triangulated faces). Faces
/// must be oriented counterclockwise seen from outside.
pub fn volume(poly: &AbstractPolyhedron, r: &Realization) -> f64 {
    poly.faces()
        .iter()
        .map(|cycle| {
            let p0 = r.vertices[cycle[0]];
            (1..cycle.len() - 1)
                .map(|k| p0.dot(&r.vertices[cycle[k]].cross(&r.vertices[cycle[k + 1]])))
                .sum::<f64>()
        })
        .sum::<f64>()
        / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn cube_faces() -> Vec<Vec<usize>> {
        vec![
            vec![0, 3, 2, 1],
            vec![4, 5, 6, 7],
            vec![0, 1, 5, 4],
            vec![1, 2, 6, 5],
            vec![2, 3, 7, 6],
            vec![3, 0, 4, 7],
        ]
    }

    fn cube_coords(h: f64) -> Vec<Point> {
        [[0., 0., 0.], [1., 0., 0.], [1., 1., 0.], [0., 1., 0.], [0., 0., h], [1., 0., h], [1., 1., h], [0., 1., h]]
            .iter()
            .map(|c| Point::new(c[0], c[1], c[2]))
            .collect()
    }

    fn cube() -> (AbstractPolyhedron, Realization) {
        let p = AbstractPolyhedron::from_faces(cube_faces()).unwrap();
        let r = fit_realization(&p, &cube_coords(1.0)).unwrap();
        (p, r)
    }

    #[test]
    fn cube_planes_are_axis_aligned() {
        let (p, r) = cube();
        assert!((r.planes[0] - Vector3::new(0., 0., -2.)).norm() < 1e-12);
        assert!((r.planes[3] - Vector3::new(2., 0., 0.)).norm() < 1e-12);
        assert!(phi(&p, &r).amax() <= 1e-12);
    }

    #[test]
    fn displaced_vertex_is_non_planar() {
        let p = AbstractPolyhedron::from_faces(cube_faces()).unwrap();
        let mut c = cube_coords(1.0);
        c[6] += Vector3::new(0.1, 0.1, 0.1);
        assert!(matches!(fit_realization(&p, &c), Err(Error::NonPlanarFace { .. })));
    }

    #[test]
    fn regular_tetrahedron_fit() {
        let p = AbstractPolyhedron::from_faces(vec![vec![0, 1, 2], vec![0, 3, 1], vec![1, 3, 2], vec![2, 3, 0]])
            .unwrap();
        let coords = [[0., 1., 1.], [1., 0., 1.], [1., 1., 0.], [0., 0., 0.]].map(|c| Point::new(c[0], c[1], c[2]));
        let r = fit_realization(&p, &coords).unwrap();
        assert!(phi(&p, &r).amax() <= 1e-12);
    }

    #[test]
    fn perturbed_vertex_phi_entry() {
        let (p, mut r) = cube();
        // Vertex 1 sits at x = 0.5 on face 3 (plane 2x = 1).
        r.vertices[1].x = 0.6;
        let ph = phi(&p, &r);
        let row = p.incidence().iter().position(|i| i.vertex == 1 && i.face == 3).unwrap();
        assert!((ph[row] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cube_measurement_values() {
        let (_, r) = cube();
        let diag = evaluate(&Measurement3D::FaceDistance(0, 2), &r).unwrap();
        assert!((diag - SQRT_2).abs() < 1e-12);
        let corner = evaluate(&Measurement3D::FaceAngle { apex: 0, end1: 1, end2: 3 }, &r).unwrap();
        assert!((corner - FRAC_PI_2).abs() < 1e-12);
        let dihedral = evaluate(&Measurement3D::DihedralAngle(0, 2), &r).unwrap();
        assert!((dihedral - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn distance_gradient_is_unit_direction() {
        let (_, r) = cube();
        // Vertices 0 and 1 differ only in x.
        let g = gradient(&Measurement3D::FaceDistance(0, 1), &r).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-15 && (g[3] - 1.0).abs() < 1e-15);
        assert!((g.norm_squared() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_length_ray_is_degenerate() {
        let (_, r) = cube();
        let m = Measurement3D::FaceAngle { apex: 0, end1: 0, end2: 1 };
        assert!(matches!(evaluate(&m, &r), Err(Error::DegenerateMeasurement(_))));
    }

    #[test]
    fn normalize_is_idempotent_and_detects_collinear_frames() {
        let (_, r) = cube();
        let n = normalize(&r).unwrap();
        assert!(normalize(&n).unwrap().max_vertex_distance(&n) < 1e-12);
        let mut bad = r.clone();
        bad.vertices[2] = bad.vertices[0] + (bad.vertices[1] - bad.vertices[0]) * 2.0;
        assert_eq!(normalize(&bad), Err(Error::CollinearFrame));
    }

    #[test]
    fn congruence_checks() {
        let (p, r) = cube();
        let rot = Matrix3::new(0., -1., 0., 1., 0., 0., 0., 0., 1.);
        assert!(congruent(&r, &r.moved(&rot, &Vector3::zeros()), 1e-10).unwrap());
        let stretched = fit_realization(&p, &cube_coords(1.01)).unwrap();
        assert!(!congruent(&r, &stretched, 1e-6).unwrap());
    }

    #[test]
    fn cube_mirror_image() {
        let (p, r) = cube();
        let mirror = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
        let m = r.moved(&mirror, &Vector3::zeros());
        // With labels kept, a reflection reverses the frame of v1 v2 v3.
        assert!(!congruent(&r, &m, 1e-6).unwrap());
        assert!(congruent_or_mirror(&r, &m, 1e-10).unwrap());
        // The mirror image as a shape is a cube again: relabel by the
        // symmetry x -> -x of the centred cube.
        let relabel = [1, 0, 3, 2, 5, 4, 7, 6];
        let shape = fit_realization(&p, &relabel.map(|i| m.vertices[i])).unwrap();
        assert!(congruent(&r, &shape, 1e-10).unwrap());
        assert!((volume(&p, &r) - 1.0).abs() < 1e-12);
    }
}
