//! Random-restart search for point configurations that share every
//! measurement with a reference but are not congruent to it.
//!
//! Rank tests cannot see determination that only holds to second order (a
//! measurement at a strict maximum, say). This engine probes it globally:
//! it solves the measurement equations from many perturbed starts, clusters
//! the solutions modulo isometry, and reports any cluster away from the
//! reference.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::aligned_max_deviation;
use crate::measure::{triple_product, Point, SimpleMeasurement};

/// Extra conditions a solution must meet to count as a competitor.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Admissibility {
    #[default]
    Any,
    /// The points, in label order, form a strictly convex polygon.
    ConvexPolygon,
    /// Every listed face keeps all other points strictly on one side.
    ConvexPolyhedron(Vec<Vec<usize>>),
}

#[derive(Debug, Clone)]
pub struct PointProblem {
    /// 2 or 3. Planar problems keep `z = 0`.
    pub dim: usize,
    pub reference: Vec<Point>,
    pub measurements: Vec<SimpleMeasurement>,
    /// Point groups constrained to stay coplanar.
    pub coplanar: Vec<Vec<usize>>,
    pub admissibility: Admissibility,
}

impl PointProblem {
    pub fn new(dim: usize, reference: Vec<Point>, measurements: Vec<SimpleMeasurement>) -> Self {
        Self { dim, reference, measurements, coplanar: Vec::new(), admissibility: Admissibility::Any }
    }

    pub fn with_coplanar(mut self, groups: Vec<Vec<usize>>) -> Self {
        self.coplanar = groups;
        self
    }

    pub fn with_admissibility(mut self, a: Admissibility) -> Self {
        self.admissibility = a;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidArgument(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        let n = self.reference.len();
        if n < 2 {
            return Err(Error::InvalidArgument("need at least two points".into()));
        }
        if self.dim == 2 && self.reference.iter().any(|p| p.z != 0.0) {
            return Err(Error::InvalidArgument("planar points must have z = 0".into()));
        }
        if min_separation(&self.reference) <= 1e-12 * diameter(&self.reference) {
            return Err(Error::InvalidArgument("reference points are not distinct".into()));
        }
        for m in &self.measurements {
            m.validate(n)?;
        }
        for g in &self.coplanar {
            if g.len() < 4 || g.iter().any(|&v| v >= n) {
                return Err(Error::InvalidArgument(format!("bad coplanar group {g:?}")));
            }
        }
        if let Admissibility::ConvexPolyhedron(faces) = &self.admissibility {
            if faces.iter().flatten().any(|&v| v >= n) {
                return Err(Error::InvalidArgument("face references a missing point".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WitnessOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Start perturbation, as a multiple of the reference diameter.
    pub noise: f64,
    /// Cluster modulo all isometries rather than proper ones.
    pub allow_reflection: bool,
    /// Clustering tolerance on unit-diameter configurations.
    pub cluster_tol: f64,
    /// A restart counts as converged when every residual is at most this.
    pub residual_tol: f64,
    pub max_iter: usize,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        Self {
            restarts: 200,
            seed: 0,
            noise: 0.5,
            allow_reflection: true,
            cluster_tol: 1e-6,
            residual_tol: 1e-10,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cluster {
    /// First solution that opened the cluster, in the reference's units. The
    /// reference cluster is represented by the reference itself.
    pub representative: Vec<Point>,
    pub size: usize,
    pub contains_reference: bool,
}

#[derive(Debug, Clone)]
pub struct WitnessReport {
    pub restarts: usize,
    pub converged: usize,
    /// Converged solutions that failed admissibility or had coincident points.
    pub rejected: usize,
    pub clusters: Vec<Cluster>,
    pub witness: Option<Vec<Point>>,
    /// Largest residual among the witness cluster's representative.
    pub witness_residual: Option<f64>,
}

impl WitnessReport {
    pub fn reference_hits(&self) -> usize {
        self.clusters.iter().filter(|c| c.contains_reference).map(|c| c.size).sum()
    }
}

/// Runs `opts.restarts` independent solves and clusters the results.
///
/// Restart `i` draws its start from a ChaCha8 stream `i` under `opts.seed`,
/// so the report does not depend on thread scheduling.
pub fn point_set_witness(problem: &PointProblem, opts: &WitnessOptions) -> Result<WitnessReport> {
    problem.validate()?;
    let diam = diameter(&problem.reference);
    let unit: Vec<Point> = problem.reference.iter().map(|p| p / diam).collect();
    let system = System::new(problem, &unit)?;

    let solutions: Vec<Option<(Vec<Point>, f64)>> = (0..opts.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let mut x = system.pack(&unit);
            for k in 0..x.len() {
                let z: f64 = StandardNormal.sample(&mut rng);
                x[k] += opts.noise * z;
            }
            system.solve(x, opts.max_iter).filter(|(_, res)| *res <= opts.residual_tol)
        })
        .collect();

    let converged = solutions.iter().filter(|s| s.is_some()).count();
    if converged == 0 {
        return Err(Error::NoConvergedRestarts);
    }

    // The reference opens the first cluster so near-reference solutions are
    // never split across clusters.
    let mut reps: Vec<(DMatrix<f64>, f64)> = vec![(rows(&unit), 0.0)];
    let mut clusters = vec![Cluster { representative: problem.reference.clone(), size: 0, contains_reference: true }];
    let mut rejected = 0;
    for (pts, res) in solutions.into_iter().flatten() {
        if min_separation(&pts) <= 1e-6 || !admissible(&problem.admissibility, &pts) {
            rejected += 1;
            continue;
        }
        let m = rows(&pts);
        match reps.iter().position(|(r, _)| aligned_max_deviation(r, &m, opts.allow_reflection) <= opts.cluster_tol) {
            Some(k) => clusters[k].size += 1,
            None => {
                clusters.push(Cluster {
                    representative: pts.iter().map(|p| p * diam).collect(),
                    size: 1,
                    contains_reference: false,
                });
                reps.push((m, res));
            }
        }
    }

    let found = clusters.iter().position(|c| !c.contains_reference);
    Ok(WitnessReport {
        restarts: opts.restarts,
        converged,
        rejected,
        witness: found.map(|k| clusters[k].representative.clone()),
        witness_residual: found.map(|k| reps[k].1),
        clusters,
    })
}

/// Residual system on unit-diameter coordinates.
struct System<'a> {
    problem: &'a PointProblem,
    targets: Vec<f64>,
}

impl<'a> System<'a> {
    fn new(problem: &'a PointProblem, unit: &[Point]) -> Result<Self> {
        let targets = problem.measurements.iter().map(|m| m.evaluate(unit)).collect::<Result<_>>()?;
        Ok(Self { problem, targets })
    }

    fn unknowns(&self) -> usize {
        self.problem.dim * self.problem.reference.len()
    }

    fn pack(&self, pts: &[Point]) -> DVector<f64> {
        let d = self.problem.dim;
        DVector::from_iterator(pts.len() * d, pts.iter().flat_map(|p| (0..d).map(move |k| p[k])))
    }

    fn unpack(&self, x: &DVector<f64>) -> Vec<Point> {
        let d = self.problem.dim;
        (0..self.problem.reference.len())
            .map(|i| {
                let mut p = Point::zeros();
                for k in 0..d {
                    p[k] = x[d * i + k];
                }
                p
            })
            .collect()
    }

    fn residual_count(&self) -> usize {
        self.targets.len() + self.problem.coplanar.iter().map(|g| g.len() - 3).sum::<usize>()
    }

    fn eval(&self, x: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let d = self.problem.dim;
        let pts = self.unpack(x);
        let mut r = DVector::zeros(self.residual_count());
        let mut j = DMatrix::zeros(r.len(), self.unknowns());
        let mut row = 0;
        let put = |row: usize, id: usize, g: &Point, j: &mut DMatrix<f64>| {
            for k in 0..d {
                j[(row, d * id + k)] += g[k];
            }
        };
        for (m, t) in self.problem.measurements.iter().zip(&self.targets) {
            let (v, grads) = m.value_and_gradient(&pts).ok()?;
            r[row] = v - t;
            for (id, g) in &grads {
                put(row, *id, g, &mut j);
            }
            row += 1;
        }
        for g in &self.problem.coplanar {
            for &s in &g[3..] {
                let (v, grads) = triple_product(&pts[g[0]], &pts[g[1]], &pts[g[2]], &pts[s]);
                r[row] = v;
                for (id, gr) in [g[0], g[1], g[2], s].into_iter().zip(grads.iter()) {
                    put(row, id, gr, &mut j);
                }
                row += 1;
            }
        }
        Some((r, j))
    }

    /// Levenberg-Marquardt, run until the cost stops decreasing.
    ///
    /// Stopping only at the rounding floor matters: at second-order points the
    /// residual is quadratic in the distance to the solution, so a residual of
    /// 1e-10 alone would leave the iterate about 1e-5 away.
    fn solve(&self, mut x: DVector<f64>, max_iter: usize) -> Option<(Vec<Point>, f64)> {
        let (mut r, mut j) = self.eval(&x)?;
        let mut cost = r.norm_squared();
        let mut lambda = 1e-3;
        for _ in 0..max_iter {
            if r.amax() <= 1e-15 {
                break;
            }
            let svd = crate::linalg::thin_svd(&j);
            let (u, vt) = (&svd.u, &svd.v_t);
            let s = &svd.s;
            let smax = s.iter().cloned().fold(0.0, f64::max);
            let g = u.transpose() * &r;
            let mut accepted = false;
            for _ in 0..12 {
                let mut coeff = DVector::zeros(s.len());
                for k in 0..s.len() {
                    if s[k] > 1e-12 * smax {
                        coeff[k] = -s[k] * g[k] / (s[k] * s[k] + lambda);
                    }
                }
                let step = vt.transpose() * coeff;
                let trial = &x + &step;
                if let Some((rt, jt)) = self.eval(&trial) {
                    let ct = rt.norm_squared();
                    if ct < cost {
                        x = trial;
                        r = rt;
                        j = jt;
                        cost = ct;
                        lambda = (lambda / 3.0).max(1e-15);
                        accepted = true;
                        break;
                    }
                }
                lambda *= 4.0;
            }
            if !accepted {
                break;
            }
        }
        Some((self.unpack(&x), r.amax()))
    }
}

fn rows(pts: &[Point]) -> DMatrix<f64> {
    DMatrix::from_fn(pts.len(), 3, |i, k| pts[i][k])
}

pub fn diameter(pts: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max((pts[i] - pts[j]).norm());
        }
    }
    d
}

fn min_separation(pts: &[Point]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.min((pts[i] - pts[j]).norm());
        }
    }
    d
}

fn admissible(a: &Admissibility, pts: &[Point]) -> bool {
    match a {
        Admissibility::Any => true,
        Admissibility::ConvexPolygon => {
            let p2: Vec<[f64; 2]> = pts.iter().map(|p| [p.x, p.y]).collect();
            is_strictly_convex(&p2, 1e-12)
        }
        Admissibility::ConvexPolyhedron(faces) => faces.iter().all(|f| {
            let c = f.iter().map(|&v| pts[v]).sum::<Point>() / f.len() as f64;
            let mut n = Point::zeros();
            for k in 0..f.len() {
                n += pts[f[k]].cross(&pts[f[(k + 1) % f.len()]]);
            }
            if n.norm() <= 1e-12 {
                return false;
            }
            let n = n.normalize();
            let side: Vec<f64> =
                (0..pts.len()).filter(|v| !f.contains(v)).map(|v| n.dot(&(pts[v] - c))).collect();
            side.iter().all(|&s| s < -1e-9) || side.iter().all(|&s| s > 1e-9)
        }),
    }
}

/// Cross products of consecutive edges all share one strict sign.
pub fn is_strictly_convex(pts: &[[f64; 2]], tol: f64) -> bool {
    let n = pts.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0.0;
    for k in 0..n {
        let (a, b, c) = (pts[k], pts[(k + 1) % n], pts[(k + 2) % n]);
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cross.abs() <= tol {
            return false;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    // Consistent turning alone admits star polygons; the total turn must be one loop.
    let mut turn = 0.0;
    for k in 0..n {
        let (a, b, c) = (pts[k], pts[(k + 1) % n], pts[(k + 2) % n]);
        let u = [b[0] - a[0], b[1] - a[1]];
        let w = [c[0] - b[0], c[1] - b[1]];
        turn += (u[0] * w[1] - u[1] * w[0]).atan2(u[0] * w[0] + u[1] * w[1]);
    }
    (turn.abs() - std::f64::consts::TAU).abs() < 1e-6
}
