//! Planar point configurations, simple measurements, and maximization
//! oracles for exceptional polygons.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::linalg::{aligned_max_deviation, numeric_rank};
use crate::measure::{Point, SimpleMeasurement};
use crate::witness::is_strictly_convex;

pub type Point2 = Vector2<f64>;

/// Labelled planar points in the normalized chart: `A_1` at the origin and
/// `A_2` on the positive x-axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig2D {
    points: Vec<Point2>,
}

impl PointConfig2D {
    /// Moves `points` into the chart by a proper rigid motion.
    pub fn new(points: Vec<Point2>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("need at least two points".into()));
        }
        let scale = points.iter().map(|p| (p - points[0]).norm()).fold(0.0, f64::max);
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if (points[i] - points[j]).norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::InvalidArgument(format!("points {i} and {j} coincide")));
                }
            }
        }
        let d = points[1] - points[0];
        let (c, s) = (d.x / d.norm(), d.y / d.norm());
        let rot = Matrix2::new(c, s, -s, c);
        let origin = points[0];
        let mut points: Vec<Point2> = points.iter().map(|p| rot * (p - origin)).collect();
        points[0] = Point2::zeros();
        points[1].y = 0.0;
        Ok(Self { points })
    }

    pub fn from_free(x: &DVector<f64>) -> Result<Self> {
        if x.is_empty() || x.len() % 2 == 0 {
            return Err(Error::InvalidArgument(format!("free vector length {} is not 2n - 3", x.len())));
        }
        let mut pts = vec![Point2::zeros(), Point2::new(x[0], 0.0)];
        for k in (1..x.len()).step_by(2) {
            pts.push(Point2::new(x[k], x[k + 1]));
        }
        Self::new(pts)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// `(x_2, x_3, y_3, ..., x_n, y_n)`.
    pub fn free_coords(&self) -> DVector<f64> {
        let mut v = vec![self.points[1].x];
        for p in &self.points[2..] {
            v.push(p.x);
            v.push(p.y);
        }
        DVector::from_vec(v)
    }

    pub fn free_dim(&self) -> usize {
        2 * self.len() - 3
    }

    /// Points embedded at `z = 0`.
    pub fn to_points3(&self) -> Vec<Point> {
        self.points.iter().map(|p| Point::new(p.x, p.y, 0.0)).collect()
    }

    pub fn is_convex(&self) -> bool {
        let p: Vec<[f64; 2]> = self.points.iter().map(|p| [p.x, p.y]).collect();
        is_strictly_convex(&p, 1e-12)
    }
}

pub fn evaluate2d(m: &SimpleMeasurement, cfg: &PointConfig2D) -> Result<f64> {
    m.validate(cfg.len())?;
    m.evaluate(&cfg.to_points3())
}

/// Gradient with respect to the free chart coordinates.
pub fn gradient2d(m: &SimpleMeasurement, cfg: &PointConfig2D) -> Result<DVector<f64>> {
    m.validate(cfg.len())?;
    let (_, blocks) = m.value_and_gradient(&cfg.to_points3())?;
    let mut g = DVector::zeros(cfg.free_dim());
    for (id, b) in blocks {
        match id {
            0 => {}
            1 => g[0] += b.x,
            _ => {
                g[2 * id - 3] += b.x;
                g[2 * id - 2] += b.y;
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sufficiency2D {
    pub rank: usize,
    pub target: usize,
    pub sufficient: bool,
}

/// First-order test: the gradients span all `2n - 3` chart directions.
///
/// A deficient set may still determine the configuration to second order;
/// that question belongs to the oracles and the witness search.
pub fn sufficiency2d(cfg: &PointConfig2D, s: &[SimpleMeasurement], tol_rel: f64) -> Result<Sufficiency2D> {
    let target = cfg.free_dim();
    let rows: Vec<DVector<f64>> = s.iter().map(|m| gradient2d(m, cfg)).collect::<Result<_>>()?;
    let rank = if rows.is_empty() {
        0
    } else {
        let m = DMatrix::from_fn(rows.len(), target, |i, j| rows[i][j]);
        numeric_rank(&m, tol_rel)
    };
    Ok(Sufficiency2D { rank, target, sufficient: rank == target })
}

/// Maximum distance between corresponding points after the best isometric
/// alignment.
pub fn aligned_deviation_2d(a: &[Point2], b: &[Point2], allow_reflection: bool) -> f64 {
    let ma = DMatrix::from_fn(a.len(), 2, |i, k| a[i][k]);
    let mb = DMatrix::from_fn(b.len(), 2, |i, k| b[i][k]);
    aligned_max_deviation(&ma, &mb, allow_reflection)
}

fn angle(apex: Point2, p: Point2, q: Point2) -> f64 {
    let (u, w) = (p - apex, q - apex);
    (u.x * w.y - u.y * w.x).abs().atan2(u.dot(&w))
}

/// Result of a maximization oracle.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub value: f64,
    /// Parameters of the maximizer.
    pub params: Vec<f64>,
    pub argmax: Vec<Point2>,
    /// Every refined local maximizer whose value is within 1e-6 of the best.
    pub near_maximizers: Vec<Vec<Point2>>,
}

/// Grid seeding followed by Newton refinement on finite differences.
///
/// `f` returns `None` outside its domain. Returns refined maxima sorted by
/// decreasing value.
pub fn maximize<F>(f: F, bounds: &[(f64, f64)], grid: usize) -> Vec<(f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let dim = bounds.len();
    let total = grid.pow(dim as u32);
    let mut samples: Vec<(f64, Vec<f64>, Vec<usize>)> = Vec::new();
    let mut values = vec![f64::NEG_INFINITY; total];
    for idx in 0..total {
        let mut rem = idx;
        let mut cell = Vec::with_capacity(dim);
        let mut x = Vec::with_capacity(dim);
        for &(lo, hi) in bounds {
            let k = rem % grid;
            rem /= grid;
            cell.push(k);
            x.push(lo + (hi - lo) * (k as f64 + 0.5) / grid as f64);
        }
        if let Some(v) = f(&x) {
            values[idx] = v;
            samples.push((v, x, cell));
        }
    }
    // Seeds: grid points no worse than any grid neighbour.
    let index = |cell: &[usize]| cell.iter().rev().fold(0, |acc, &k| acc * grid + k);
    let mut seeds: Vec<(f64, Vec<f64>)> = samples
        .into_iter()
        .filter(|(v, _, cell)| {
            (0..dim).all(|d| {
                [-1i64, 1].iter().all(|&step| {
                    let k = cell[d] as i64 + step;
                    if k < 0 || k >= grid as i64 {
                        return true;
                    }
                    let mut c = cell.clone();
                    c[d] = k as usize;
                    values[index(&c)] <= *v
                })
            })
        })
        .map(|(v, x, _)| (v, x))
        .collect();
    seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
    seeds.truncate(16);

    let mut out: Vec<(f64, Vec<f64>)> = seeds.into_iter().filter_map(|(_, x)| newton_refine(&f, x)).collect();
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out
}

fn newton_refine<F: Fn(&[f64]) -> Option<f64>>(f: &F, mut x: Vec<f64>) -> Option<(f64, Vec<f64>)> {
    let dim = x.len();
    let mut fx = f(&x)?;
    let hg = 1e-5;
    let hh = 1e-4;
    for _ in 0..200 {
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        let eval = |dx: &[(usize, f64)]| -> Option<f64> {
            let mut y = x.clone();
            for &(k, d) in dx {
                y[k] += d;
            }
            f(&y)
        };
        for i in 0..dim {
            g[i] = (eval(&[(i, hg)])? - eval(&[(i, -hg)])?) / (2.0 * hg);
            h[(i, i)] = (eval(&[(i, hh)])? - 2.0 * fx + eval(&[(i, -hh)])?) / (hh * hh);
            for j in 0..i {
                let v = (eval(&[(i, hh), (j, hh)])? - eval(&[(i, hh), (j, -hh)])? - eval(&[(i, -hh), (j, hh)])?
                    + eval(&[(i, -hh), (j, -hh)])?)
                    / (4.0 * hh * hh);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let negdef = h.clone().symmetric_eigen().eigenvalues.iter().all(|&e| e < 0.0);
        let mut step = if negdef {
            -h.clone().lu().solve(&g)?
        } else {
            g.clone() * (1e-2 / g.norm().max(1e-300))
        };
        let mut moved = false;
        for _ in 0..40 {
            let y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if let Some(fy) = f(&y) {
                if fy >= fx {
                    moved = step.norm() > 1e-15;
                    x = y;
                    fx = fy;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved || step.norm() < 1e-14 {
            break;
        }
    }
    Some((fx, x))
}

fn finish(results: Vec<(f64, Vec<f64>)>, build: impl Fn(&[f64]) -> Vec<Point2>) -> Result<OracleResult> {
    let (value, params) = results
        .first()
        .cloned()
        .ok_or_else(|| Error::OracleInconclusive("no feasible grid point".into()))?;
    let near_maximizers = results.iter().filter(|(v, _)| *v >= value - 1e-6).map(|(_, x)| build(x)).collect();
    Ok(OracleResult { value, argmax: build(&params), params, near_maximizers })
}

/// Largest `∠B'C'D'` with `|A'B'| = |A'D'| = d` and `|A'C'| = d√2`.
///
/// Points are returned in the order `A', B', C', D'`.
pub fn square_angle_oracle(d: f64) -> Result<OracleResult> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!("side must be positive, got {d}")));
    }
    let build = move |x: &[f64]| {
        vec![
            Point2::zeros(),
            d * Point2::new(x[0].cos(), x[0].sin()),
            Point2::new(d * SQRT_2, 0.0),
            d * Point2::new(x[1].cos(), x[1].sin()),
        ]
    };
    let f = |x: &[f64]| {
        let p = build(x);
        Some(angle(p[2], p[1], p[3]))
    };
    finish(maximize(f, &[(-PI, PI), (-PI, PI)], 64), build)
}

/// Largest `∠BCD` with `|AB|`, `|AD|`, `|AC|` fixed and `B`, `D` on
/// opposite sides of `AC`. Points in the order `A, B, C, D`.
pub fn right_angle_quad_oracle(ab: f64, ad: f64, ac: f64) -> Result<OracleResult> {
    if !(ab > 0.0 && ad > 0.0 && ac > 0.0) {
        return Err(Error::InfeasibleRadii(format!("radii must be positive: ({ab}, {ad}, {ac})")));
    }
    if ab >= ac || ad >= ac {
        return Err(Error::InfeasibleRadii(format!("need |AB| < |AC| and |AD| < |AC|, got ({ab}, {ad}, {ac})")));
    }
    let build = move |x: &[f64]| {
        vec![
            Point2::zeros(),
            ab * Point2::new(x[0].cos(), x[0].sin()),
            Point2::new(ac, 0.0),
            ad * Point2::new(x[1].cos(), -x[1].sin()),
        ]
    };
    let f = |x: &[f64]| {
        let p = build(x);
        Some(angle(p[2], p[1], p[3]))
    };
    finish(maximize(f, &[(0.0, PI), (0.0, PI)], 64), build)
}

/// Largest `|AC|` with `|BD|` fixed, `∠DAB = θ1`, `∠DCB = θ2`, and `A`, `C`
/// on opposite sides of `BD`. Points in the order `A, B, C, D`.
pub fn max_diagonal_oracle(bd: f64, theta1: f64, theta2: f64) -> Result<OracleResult> {
    if !(bd > 0.0) {
        return Err(Error::InvalidArgument(format!("|BD| must be positive, got {bd}")));
    }
    for t in [theta1, theta2] {
        if !(t > 0.0 && t < FRAC_PI_2) {
            return Err(Error::InvalidArgument(format!("angles must be acute, got {t}")));
        }
    }
    // A runs over the arc above BD that sees BD under θ1; C likewise below.
    let arc = move |theta: f64, t: f64, sign: f64| {
        let r = bd / (2.0 * theta.sin());
        let h = bd / (2.0 * theta.tan());
        Point2::new(r * t.sin(), sign * (h + r * t.cos()))
    };
    let build = move |x: &[f64]| {
        vec![arc(theta1, x[0], 1.0), Point2::new(-bd / 2.0, 0.0), arc(theta2, x[1], -1.0), Point2::new(bd / 2.0, 0.0)]
    };
    let f = |x: &[f64]| {
        let p = build(x);
        Some((p[0] - p[2]).norm())
    };
    let (l1, l2) = (PI - theta1, PI - theta2);
    finish(maximize(f, &[(-l1, l1), (-l2, l2)], 64), build)
}

/// Polygon with `∠A_1A_kA_(k+1) = π/2` and `∠A_kA_(k+1)A_1 = α_k` for
/// `k = 2..n-1`; `angles` lists `α_2..α_(n-1)`.
pub fn staircase_polygon(n: usize, a12: f64, angles: &[f64]) -> Result<PointConfig2D> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("staircase needs n >= 4, got {n}")));
    }
    if angles.len() != n - 2 {
        return Err(Error::InvalidArgument(format!("expected {} angles, got {}", n - 2, angles.len())));
    }
    if !(a12 > 0.0) {
        return Err(Error::InvalidArgument(format!("|A1A2| must be positive, got {a12}")));
    }
    if let Some(a) = angles.iter().find(|&&a| !(a > 0.0 && a < FRAC_PI_2)) {
        return Err(Error::InvalidArgument(format!("angles must lie in (0, pi/2), got {a}")));
    }
    let mut pts = vec![Point2::zeros(), Point2::new(a12, 0.0)];
    let (mut radius, mut heading) = (a12, 0.0);
    for &a in angles {
        radius /= a.sin();
        heading += FRAC_PI_2 - a;
        pts.push(radius * Point2::new(heading.cos(), heading.sin()));
    }
    let cfg = PointConfig2D::new(pts)?;
    if !cfg.is_convex() {
        return Err(Error::NotConvex);
    }
    Ok(cfg)
}

/// `{|A_1A_2|, |A_1A_n|, α_2..α_(n-1)}` with 0-based ids.
pub fn staircase_measurements(n: usize) -> Vec<SimpleMeasurement> {
    let mut s = vec![SimpleMeasurement::Distance(0, 1), SimpleMeasurement::Distance(0, n - 1)];
    for k in 1..n - 1 {
        s.push(SimpleMeasurement::Angle(k, k + 1, 0));
    }
    s
}

/// Regular polygon with the given side, counter-clockwise.
pub fn regular_ngon(n: usize, side: f64) -> Result<PointConfig2D> {
    if n < 3 || !(side > 0.0) {
        return Err(Error::InvalidArgument(format!("need n >= 3 and a positive side, got ({n}, {side})")));
    }
    let r = side / (2.0 * (PI / n as f64).sin());
    PointConfig2D::new(
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                r * Point2::new(t.cos(), t.sin())
            })
            .collect(),
    )
}

/// The eight sides plus `|A_1A_5|`, `|A_8A_6|`, `|A_2A_4|`, `|A_3A_7|`, 0-based.
pub fn octagon_measurements() -> Vec<SimpleMeasurement> {
    let mut s: Vec<SimpleMeasurement> = (0..8).map(|k| SimpleMeasurement::Distance(k, (k + 1) % 8)).collect();
    s.extend([
        SimpleMeasurement::Distance(0, 4),
        SimpleMeasurement::Distance(7, 5),
        SimpleMeasurement::Distance(1, 3),
        SimpleMeasurement::Distance(2, 6),
    ]);
    s
}

#[derive(Debug, Clone)]
pub struct OctagonReport {
    /// `|A_3A_7|` of the regular octagon with side 1.
    pub regular_distance: f64,
    /// Largest `|A_3A_7|` over configurations sharing the other 11 distances.
    pub max_distance: f64,
    pub argmax: Vec<Point2>,
    /// Deviation of the maximizer from the regular octagon, after alignment.
    pub argmax_deviation: f64,
    /// `∠A_5A_1A_8` and `∠A_6A_5A_1` where the distance between the midpoints
    /// of `A_1A_5` and `A_6A_8` is largest.
    pub midpoint_angles: (f64, f64),
    pub midpoint_distance: f64,
}

/// The two intersections of circles `(c1, r1)` and `(c2, r2)`; `branch`
/// picks the one left (`false`) or right (`true`) of `c1 → c2`.
fn circle_intersection(c1: Point2, r1: f64, c2: Point2, r2: f64, branch: bool) -> Option<Point2> {
    let d = (c2 - c1).norm();
    if d <= 1e-15 || d > r1 + r2 || d < (r1 - r2).abs() {
        return None;
    }
    let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let h = (r1 * r1 - a * a).max(0.0).sqrt();
    let e = (c2 - c1) / d;
    let perp = Point2::new(-e.y, e.x);
    let sign = if branch { -1.0 } else { 1.0 };
    Some(c1 + a * e + sign * h * perp)
}

/// Maximizes `|A_3A_7|` over every octagon sharing the other 11 distances
/// with the regular octagon of side 1, and locates the maximum of the
/// midpoint distance between `A_1A_5` and `A_6A_8`.
///
/// With `A_1A_5` fixed, `A_1A_2A_4A_5` and `A_1A_8A_6A_5` are four-bar
/// linkages carrying the rigid triangles `A_2A_3A_4` and `A_6A_7A_8`. Each
/// linkage is parametrized by its crank angle at `A_1`; every assembly branch
/// and triangle flip is searched.
pub fn octagon_distance_oracle() -> Result<OctagonReport> {
    let regular = regular_ngon(8, 1.0)?;
    let reg = regular.points().to_vec();
    let dist = |i: usize, j: usize| (reg[i] - reg[j]).norm();
    let (l15, d24, d68, regular_distance) = (dist(0, 4), dist(1, 3), dist(7, 5), dist(2, 6));
    let (a1, a5) = (Point2::zeros(), Point2::new(l15, 0.0));

    // One half: crank point P at A_1, far point Q on the circle about A_5,
    // apex T of the rigid triangle on PQ.
    let half = move |t: f64, branch: bool, flip: bool, pq: f64| -> Option<[Point2; 3]> {
        let p = a1 + Point2::new(t.cos(), t.sin());
        let q = circle_intersection(p, pq, a5, 1.0, branch)?;
        let apex = circle_intersection(p, 1.0, q, 1.0, flip)?;
        Some([p, apex, q])
    };
    let assemble = move |x: &[f64], bits: u8| -> Option<Vec<Point2>> {
        let [p2, p3, p4] = half(x[0], bits & 1 != 0, bits & 2 != 0, d24)?;
        let [p8, p7, p6] = half(x[1], bits & 4 != 0, bits & 8 != 0, d68)?;
        Some(vec![a1, p2, p3, p4, a5, p6, p7, p8])
    };

    let mut best: Option<(f64, Vec<Point2>)> = None;
    for bits in 0..16u8 {
        let f = |x: &[f64]| assemble(x, bits).map(|p| (p[2] - p[6]).norm());
        if let Some((v, x)) = maximize(f, &[(-PI, PI), (-PI, PI)], 64).into_iter().next() {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, assemble(&x, bits).expect("maximizer is feasible")));
            }
        }
    }
    let (max_distance, argmax) = best.ok_or_else(|| Error::OracleInconclusive("no feasible assembly".into()))?;
    let argmax_deviation = aligned_deviation_2d(&argmax, &reg, true);

    let m15 = (a1 + a5) / 2.0;
    let mut mid: Option<(f64, Vec<Point2>)> = None;
    for bits in 0..2u8 {
        let build = move |x: &[f64]| half(x[0], bits & 1 != 0, false, d68);
        let f = |x: &[f64]| build(x).map(|[p8, _, p6]| ((p8 + p6) / 2.0 - m15).norm());
        if let Some((v, x)) = maximize(f, &[(-PI, PI)], 64).into_iter().next() {
            if mid.as_ref().is_none_or(|(b, _)| v > *b) {
                let [p8, _, p6] = build(&x).expect("maximizer is feasible");
                mid = Some((v, vec![p8, p6]));
            }
        }
    }
    let (midpoint_distance, m) = mid.ok_or_else(|| Error::OracleInconclusive("midpoint search failed".into()))?;
    let midpoint_angles = (angle(a1, a5, m[0]), angle(a5, m[1], a1));

    Ok(OctagonReport { regular_distance, max_distance, argmax, argmax_deviation, midpoint_angles, midpoint_distance })
}
