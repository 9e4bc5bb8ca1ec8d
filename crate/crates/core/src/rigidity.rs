//! Rank-based sufficiency of measurement sets on polyhedra.
//!
//! A measurement set `S` determines a convex polyhedron locally up to
//! congruence when the stacked Jacobian of the vertex-on-face map and the
//! measurements reaches rank `3E`, the maximum allowed by the six rigid
//! motions. For similarity the extra scaling motion lowers the target to
//! `3E − 1`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, d_phi, d_psi, phi, Measurement3D, Realization};
use crate::incidence::AbstractPolyhedron;
use crate::linalg::{self, IncrementalBasis, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Congruence,
    Similarity,
}

impl Mode {
    /// Dimension of the motion group: 6 rigid motions, plus scaling.
    pub fn generator_count(self) -> usize {
        match self {
            Mode::Congruence => 6,
            Mode::Similarity => 7,
        }
    }

    pub fn generators(self, r: &Realization) -> DMatrix<f64> {
        match self {
            Mode::Congruence => congruence_generators(r),
            Mode::Similarity => similarity_generators(r),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "congruence" => Ok(Mode::Congruence),
            "similarity" => Ok(Mode::Similarity),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

/// Infinitesimal translations along x, y, z and rotations about x, y, z, as
/// columns over the full coordinate vector.
pub fn congruence_generators(r: &Realization) -> DMatrix<f64> {
    let n = r.coordinate_count();
    let off = r.plane_offset();
    let mut g = DMatrix::zeros(n, 6);
    for (i, p) in r.vertices.iter().enumerate() {
        let (x, y, z) = (p.x, p.y, p.z);
        let b = 3 * i;
        for k in 0..3 {
            g[(b + k, k)] = 1.0;
        }
        g[(b + 1, 3)] = -z;
        g[(b + 2, 3)] = y;
        g[(b, 4)] = z;
        g[(b + 2, 4)] = -x;
        g[(b, 5)] = -y;
        g[(b + 1, 5)] = x;
    }
    for (j, nrm) in r.planes.iter().enumerate() {
        let (a, bb, c) = (nrm.x, nrm.y, nrm.z);
        let b = off + 3 * j;
        let coeff = [a, bb, c];
        // Translating a plane n·x = 1 by t e_k rescales n by 1/(1 + t n_k).
        for k in 0..3 {
            for l in 0..3 {
                g[(b + l, k)] = -coeff[k] * coeff[l];
            }
        }
        g[(b + 1, 3)] = -c;
        g[(b + 2, 3)] = bb;
        g[(b, 4)] = c;
        g[(b + 2, 4)] = -a;
        g[(b, 5)] = -bb;
        g[(b + 1, 5)] = a;
    }
    g
}

/// Congruence generators plus uniform scaling about the origin.
pub fn similarity_generators(r: &Realization) -> DMatrix<f64> {
    let mut g = congruence_generators(r).insert_column(6, 0.0);
    let off = r.plane_offset();
    for (i, p) in r.vertices.iter().enumerate() {
        for k in 0..3 {
            g[(3 * i + k, 6)] = p[k];
        }
    }
    for (j, n) in r.planes.iter().enumerate() {
        for k in 0..3 {
            g[(off + 3 * j + k, 6)] = -n[k];
        }
    }
    g
}

/// Selector rows for `x_1, y_1, z_1, y_2, z_2, z_3`, the coordinates pinned by
/// the normalized frame.
pub fn normalization_rows(r: &Realization) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(6, r.coordinate_count());
    for (row, col) in [0usize, 1, 2, 4, 5, 8].into_iter().enumerate() {
        m[(row, col)] = 1.0;
    }
    m
}

/// Jacobians of one analysis, all evaluated at the same realization.
#[derive(Debug, Clone)]
pub struct RigidityBundle {
    pub mode: Mode,
    pub d_phi: DMatrix<f64>,
    pub d_psi: DMatrix<f64>,
    pub generators: DMatrix<f64>,
    pub d_chi: DMatrix<f64>,
}

impl RigidityBundle {
    pub fn new(
        poly: &AbstractPolyhedron,
        r: &Realization,
        measurements: &[Measurement3D],
        mode: Mode,
    ) -> Result<Self> {
        Ok(Self {
            mode,
            d_phi: d_phi(poly, r),
            d_psi: d_psi(measurements, r)?,
            generators: mode.generators(r),
            d_chi: normalization_rows(r),
        })
    }

    pub fn stacked(&self) -> DMatrix<f64> {
        stack(&self.d_phi, &self.d_psi)
    }

    /// `max |stack(Dφ, Dψ) · G|`.
    pub fn annihilation_residual(&self) -> f64 {
        (self.stacked() * &self.generators).amax()
    }
}

fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    m.view_mut((0, 0), top.shape()).copy_from(top);
    m.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficiencyReport {
    pub mode: Mode,
    pub edge_count: usize,
    pub measurement_count: usize,
    pub achieved_rank: usize,
    pub target_rank: usize,
    pub sufficient: bool,
    pub flex_dimension: usize,
    pub selected: Vec<Measurement3D>,
    pub tolerance: f64,
}

/// Copy of `r` scaled to unit vertex diameter.
pub fn unit_diameter(r: &Realization) -> Realization {
    let d = r.diameter();
    if d > 0.0 {
        r.scaled(1.0 / d)
    } else {
        r.clone()
    }
}

fn check_measurements(poly: &AbstractPolyhedron, s: &[Measurement3D], mode: Mode) -> Result<()> {
    for m in s {
        m.validate(poly)?;
        if mode == Mode::Similarity && !m.is_scale_invariant() {
            return Err(Error::InvalidMeasurement(format!(
                "{m:?} is not scale invariant and cannot be used for similarity"
            )));
        }
    }
    Ok(())
}

fn target_rank(r: &Realization, mode: Mode) -> usize {
    r.coordinate_count() - mode.generator_count()
}

/// First-order sufficiency test for a measurement set.
pub fn is_sufficient(
    poly: &AbstractPolyhedron,
    r: &Realization,
    s: &[Measurement3D],
    mode: Mode,
    tol_rel: f64,
) -> Result<SufficiencyReport> {
    check_measurements(poly, s, mode)?;
    let unit = unit_diameter(r);
    let bundle = RigidityBundle::new(poly, &unit, s, mode)?;
    let achieved = linalg::numeric_rank(&bundle.stacked(), tol_rel);
    let target = target_rank(&unit, mode);
    Ok(SufficiencyReport {
        mode,
        edge_count: poly.edge_count(),
        measurement_count: s.len(),
        achieved_rank: achieved,
        target_rank: target,
        sufficient: achieved == target,
        flex_dimension: unit.coordinate_count().saturating_sub(achieved + mode.generator_count()),
        selected: Vec::new(),
        tolerance: tol_rel,
    })
}

/// Extracts a sufficient subset from an ordered pool.
///
/// Walks the pool in order and keeps a measurement exactly when its gradient
/// is not in the span of `Dφ` and the gradients already kept. For a
/// sufficient pool this keeps `E` measurements (`E − 1` for similarity).
pub fn greedy_minimal_subset(
    poly: &AbstractPolyhedron,
    r: &Realization,
    pool: &[Measurement3D],
    mode: Mode,
    tol_rel: f64,
) -> Result<SufficiencyReport> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("empty measurement pool".into()));
    }
    check_measurements(poly, pool, mode)?;
    let unit = unit_diameter(r);
    let target = target_rank(&unit, mode);

    let mut basis = IncrementalBasis::new(unit.coordinate_count(), tol_rel);
    for row in d_phi(poly, &unit).row_iter() {
        basis.try_push(&row.transpose());
    }
    let mut selected = Vec::new();
    for m in pool {
        if basis.rank() >= target {
            break;
        }
        if basis.try_push(&geometry::gradient(m, &unit)?) {
            selected.push(*m);
        }
    }
    let achieved = basis.rank();
    Ok(SufficiencyReport {
        mode,
        edge_count: poly.edge_count(),
        measurement_count: pool.len(),
        achieved_rank: achieved,
        target_rank: target,
        sufficient: achieved == target,
        flex_dimension: unit.coordinate_count().saturating_sub(achieved + mode.generator_count()),
        selected,
        tolerance: tol_rel,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct FlexOptions {
    pub step: f64,
    pub max_iter: usize,
    /// Residual target for the projection back onto the level set.
    pub residual_tol: f64,
    /// Congruence tolerance; a result closer than `10 · tol` to the input
    /// (after normalization) is not reported as a witness.
    pub tol: f64,
    pub rank_tol: f64,
}

impl Default for FlexOptions {
    fn default() -> Self {
        Self { step: 1e-2, max_iter: 100, residual_tol: 1e-10, tol: 1e-6, rank_tol: DEFAULT_RANK_TOL }
    }
}

#[derive(Debug, Clone)]
pub struct FlexWitness {
    pub realization: Realization,
    /// Maximum normalized vertex distance from the input realization.
    pub separation: f64,
    /// Max-norm of the vertex-on-face and measurement residuals.
    pub residual: f64,
    pub iterations: usize,
}

/// Walks along a non-trivial kernel direction of `stack(Dφ, Dψ)` and projects
/// back onto `{φ = 0, ψ = ψ(R)}` by minimum-norm Gauss-Newton steps.
///
/// `Ok(None)` means the projection returned to a realization congruent to
/// `r`: the kernel direction is an infinitesimal flex only (possible
/// second-order rigidity).
pub fn flex_witness(
    poly: &AbstractPolyhedron,
    r: &Realization,
    s: &[Measurement3D],
    mode: Mode,
    opts: &FlexOptions,
) -> Result<Option<FlexWitness>> {
    check_measurements(poly, s, mode)?;
    let diameter = r.diameter();
    let unit = unit_diameter(r);
    let (nv, nf) = (unit.vertices.len(), unit.planes.len());
    let bundle = RigidityBundle::new(poly, &unit, s, mode)?;

    let kernel = linalg::null_space(&bundle.stacked(), opts.rank_tol);
    let g = bundle.generators.clone().qr().q();
    let nontrivial = &kernel - &g * (g.transpose() * &kernel);
    let svd = linalg::thin_svd(&nontrivial);
    let u_mat = svd.u;
    let best = (0..svd.s.len())
        .filter(|&k| svd.s[k] > 0.5)
        .max_by(|&a, &b| svd.s[a].total_cmp(&svd.s[b]));
    let Some(k) = best else {
        return Err(Error::NoKernelDirection);
    };
    let direction: DVector<f64> = u_mat.column(k).into_owned();

    let targets: Vec<f64> = s.iter().map(|m| geometry::evaluate(m, &unit)).collect::<Result<_>>()?;
    let residual_of = |q: &Realization| -> Result<DVector<f64>> {
        let ph = phi(poly, q);
        let mut out = DVector::zeros(ph.len() + s.len());
        out.rows_mut(0, ph.len()).copy_from(&ph);
        for (i, m) in s.iter().enumerate() {
            out[ph.len() + i] = geometry::evaluate(m, q)? - targets[i];
        }
        Ok(out)
    };

    let mut x = unit.to_vector() + direction * opts.step;
    let mut iterations = 0;
    let mut res;
    loop {
        let q = Realization::from_vector(&x, nv, nf);
        res = residual_of(&q)?;
        if res.amax() <= opts.residual_tol {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::ProjectionDiverged { iterations, residual: res.amax() });
        }
        let jac = stack(&d_phi(poly, &q), &d_psi(s, &q)?);
        x += linalg::min_norm_solve(&jac, &(-&res), 1e-12);
        iterations += 1;
    }

    let found = Realization::from_vector(&x, nv, nf);
    let separation = geometry::normalize(&found)?.max_vertex_distance(&geometry::normalize(&unit)?);
    if separation <= 10.0 * opts.tol {
        return Ok(None);
    }
    Ok(Some(FlexWitness {
        realization: found.scaled(diameter),
        separation: separation * diameter,
        residual: res.amax(),
        iterations,
    }))
}

/// Named measurement pools over an abstract polyhedron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    FaceDistances,
    Edges,
    FaceDiagonals,
    FaceAngles,
    Dihedrals,
    All,
}

impl std::str::FromStr for Pool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "face-distances" => Pool::FaceDistances,
            "edges" | "edges-only" => Pool::Edges,
            "face-diagonals" => Pool::FaceDiagonals,
            "face-angles" => Pool::FaceAngles,
            "dihedrals" => Pool::Dihedrals,
            "all" => Pool::All,
            other => return Err(Error::UnknownName(other.to_string())),
        })
    }
}

impl Pool {
    /// Enumerates the pool in its canonical order. In similarity mode the
    /// scale-dependent measurements are dropped.
    pub fn measurements(self, poly: &AbstractPolyhedron, mode: Mode) -> Vec<Measurement3D> {
        let all = match self {
            Pool::FaceDistances => face_distances(poly),
            Pool::Edges => edge_lengths(poly),
            Pool::FaceDiagonals => face_diagonals(poly),
            Pool::FaceAngles => face_angles(poly),
            Pool::Dihedrals => dihedral_angles(poly),
            Pool::All => {
                let mut v = face_distances(poly);
                v.extend(face_angles(poly));
                v.extend(dihedral_angles(poly));
                v
            }
        };
        match mode {
            Mode::Congruence => all,
            Mode::Similarity => all.into_iter().filter(Measurement3D::is_scale_invariant).collect(),
        }
    }
}

/// All vertex pairs sharing a face, sorted by `(min id, max id)`.
pub fn face_distances(poly: &AbstractPolyhedron) -> Vec<Measurement3D> {
    let n = poly.vertex_count();
    (0..n)
        .flat_map(|v| (v + 1..n).map(move |w| (v, w)))
        .filter(|&(v, w)| poly.share_face(&[v, w]))
        .map(|(v, w)| Measurement3D::FaceDistance(v, w))
        .collect()
}

pub fn edge_lengths(poly: &AbstractPolyhedron) -> Vec<Measurement3D> {
    poly.edges().iter().map(|&(v, w)| Measurement3D::FaceDistance(v, w)).collect()
}

/// Face distances that are not edges.
pub fn face_diagonals(poly: &AbstractPolyhedron) -> Vec<Measurement3D> {
    face_distances(poly)
        .into_iter()
        .filter(|m| matches!(*m, Measurement3D::FaceDistance(v, w) if !poly.is_edge(v, w)))
        .collect()
}

/// Angles at a vertex between rays to two other vertices of a common face,
/// sorted by `(apex, end1, end2)` with `end1 < end2`.
pub fn face_angles(poly: &AbstractPolyhedron) -> Vec<Measurement3D> {
    let n = poly.vertex_count();
    let mut out = Vec::new();
    for apex in 0..n {
        for end1 in 0..n {
            for end2 in end1 + 1..n {
                if end1 != apex && end2 != apex && poly.share_face(&[apex, end1, end2]) {
                    out.push(Measurement3D::FaceAngle { apex, end1, end2 });
                }
            }
        }
    }
    out
}

pub fn dihedral_angles(poly: &AbstractPolyhedron) -> Vec<Measurement3D> {
    poly.adjacent_faces().into_iter().map(|(f, g)| Measurement3D::DihedralAngle(f, g)).collect()
}
