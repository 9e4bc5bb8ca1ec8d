//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polyrig::generators::{self, hexahedron_family_a, hexahedron_family_b, quaternion_rotation, PLATONIC_NAMES};
use polyrig::geometry::{self, Measurement3D, Realization};
use polyrig::incidence::AbstractPolyhedron;
use polyrig::linalg::aligned_max_deviation;
use polyrig::measure::{Point, SimpleMeasurement};
use polyrig::polygon::{self, Point2, PointConfig2D};
use polyrig::rigidity::{self, FlexOptions, Mode, Pool};
use polyrig::witness::{point_set_witness, Admissibility, PointProblem, WitnessOptions};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 13] = [
        ("rank of the incidence derivative", rank_of_d_phi),
        ("all face distances are sufficient", face_distances_sufficient),
        ("greedy selection keeps E face distances", greedy_counts),
        ("dodecahedron up to similarity from 29 angles", dodecahedron_similarity),
        ("generator identities", generator_identities),
        ("equal-diagonal hexahedra", hexahedra),
        ("insufficiency witnesses on the cube", cube_flex_witnesses),
        ("square exceptionality", square),
        ("right-angle quadrilaterals", right_angle_quads),
        ("staircase polygons", staircases),
        ("cube distance sets", cube_distance_sets),
        ("octagon", octagon),
        ("gradients against finite differences", gradients),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2}: {name} ({detail}) [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2}: {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------- oracles

fn svd_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > tol * max).count()
}

fn unit(r: &Realization) -> Realization {
    let c = r.centroid();
    let shifted = r.moved(&nalgebra::Matrix3::identity(), &(-c));
    shifted.scaled(1.0 / r.diameter())
}

fn stacked(poly: &AbstractPolyhedron, r: &Realization, s: &[Measurement3D]) -> DMatrix<f64> {
    let dp = geometry::d_phi(poly, r);
    if s.is_empty() {
        return dp;
    }
    let ds = geometry::d_psi(s, r).unwrap();
    let mut m = DMatrix::zeros(dp.nrows() + ds.nrows(), dp.ncols());
    m.rows_mut(0, dp.nrows()).copy_from(&dp);
    m.rows_mut(dp.nrows(), ds.nrows()).copy_from(&ds);
    m
}

fn cycle_edges(faces: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = faces
        .iter()
        .flat_map(|f| (0..f.len()).map(move |k| (f[k].min(f[(k + 1) % f.len()]), f[k].max(f[(k + 1) % f.len()]))))
        .collect();
    e.sort();
    e.dedup();
    e
}

fn solids() -> Vec<(String, AbstractPolyhedron, Realization)> {
    let mut out: Vec<_> = PLATONIC_NAMES
        .iter()
        .map(|n| {
            let (p, r) = generators::platonic(n, 1.0).unwrap();
            (n.to_string(), p, r)
        })
        .collect();
    for q in [-0.2, -0.1, 0.0, 0.1, 0.2] {
        let (p, r) = hexahedron_family_a(q).unwrap();
        out.push((format!("hexa-a({q})"), p, r));
    }
    for q1 in [-0.2, -0.1, 0.0, 0.1, 0.2] {
        for q2 in [-0.2, -0.1, 0.0, 0.1, 0.2] {
            let (p, r) = hexahedron_family_b(q1, q2).unwrap();
            out.push((format!("hexa-b({q1},{q2})"), p, r));
        }
    }
    out
}

fn random_rotation(rng: &mut ChaCha8Rng) -> nalgebra::Matrix3<f64> {
    let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
    quaternion_rotation(q[0] / n, q[1] / n, q[2] / n, q[3] / n)
}

/// Labelled unit cube: `A_1..D_1` at `z = 0`, `A_2..D_2` above them.
fn cube_points() -> (Vec<Point>, Vec<Vec<usize>>) {
    let base = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let pts = (0..8).map(|i| Point::new(base[i % 4].0, base[i % 4].1, (i / 4) as f64)).collect();
    let faces = vec![
        vec![0, 3, 2, 1],
        vec![4, 5, 6, 7],
        vec![0, 1, 5, 4],
        vec![1, 2, 6, 5],
        vec![2, 3, 7, 6],
        vec![3, 0, 4, 7],
    ];
    (pts, faces)
}

fn angle2(apex: Point2, p: Point2, q: Point2) -> f64 {
    let (u, w) = (p - apex, q - apex);
    (u.x * w.y - u.y * w.x).abs().atan2(u.dot(&w))
}

// ---------------------------------------------------------------- criteria

fn rank_of_d_phi() -> Result<String, String> {
    let all = solids();
    for (name, poly, r) in &all {
        let e = poly.edge_count();
        let rank = svd_rank(&geometry::d_phi(poly, &unit(r)), 1e-9);
        ensure!(rank == 2 * e, "{name}: rank {rank}, expected {}", 2 * e);
    }
    Ok(format!("{} solids", all.len()))
}

fn face_distances_sufficient() -> Result<String, String> {
    for name in PLATONIC_NAMES {
        let (poly, r) = generators::platonic(name, 1.0).map_err(|e| e.to_string())?;
        let pool = rigidity::face_distances(&poly);
        let rep = rigidity::is_sufficient(&poly, &r, &pool, Mode::Congruence, 1e-9).map_err(|e| e.to_string())?;
        let e = poly.edge_count();
        ensure!(rep.achieved_rank == 3 * e && rep.flex_dimension == 0, "{name}: rank {} flex {}", rep.achieved_rank, rep.flex_dimension);
        let oracle = svd_rank(&stacked(&poly, &unit(&r), &pool), 1e-9);
        ensure!(oracle == 3 * e, "{name}: independent rank {oracle}");
    }
    Ok("5 solids at rank 3E".into())
}

fn greedy_counts() -> Result<String, String> {
    let mut counts = Vec::new();
    for name in PLATONIC_NAMES {
        let (poly, r) = generators::platonic(name, 1.0).map_err(|e| e.to_string())?;
        let e = poly.edge_count();
        let rep = rigidity::greedy_minimal_subset(&poly, &r, &rigidity::face_distances(&poly), Mode::Congruence, 1e-9)
            .map_err(|e| e.to_string())?;
        ensure!(rep.selected.len() == e, "{name}: selected {} of E = {e}", rep.selected.len());
        ensure!(rep.selected.iter().all(|m| matches!(m, Measurement3D::FaceDistance(..))), "{name}: non-distance selected");
        let oracle = svd_rank(&stacked(&poly, &unit(&r), &rep.selected), 1e-9);
        ensure!(oracle == 3 * e, "{name}: selection re-verifies at rank {oracle}");
        counts.push(rep.selected.len().to_string());
    }
    Ok(counts.join("/"))
}

fn dodecahedron_similarity() -> Result<String, String> {
    let (poly, r) = generators::platonic("dodecahedron", 1.0).map_err(|e| e.to_string())?;
    let pool = Pool::FaceAngles.measurements(&poly, Mode::Similarity);
    let rep = rigidity::greedy_minimal_subset(&poly, &r, &pool, Mode::Similarity, 1e-9).map_err(|e| e.to_string())?;
    ensure!(rep.selected.len() == 29, "selected {}", rep.selected.len());
    ensure!(rep.achieved_rank == 89, "rank {}", rep.achieved_rank);
    let oracle = svd_rank(&stacked(&poly, &unit(&r), &rep.selected), 1e-9);
    ensure!(oracle == 89, "independent rank {oracle}");
    Ok("29 angles, rank 89".into())
}

fn generator_identities() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut worst_det: f64 = 0.0;
    for (name, poly, r) in solids() {
        let u = unit(&r);
        let all = Pool::All.measurements(&poly, Mode::Congruence);
        let res = (stacked(&poly, &u, &all) * rigidity::congruence_generators(&u)).amax();
        let inv = Pool::All.measurements(&poly, Mode::Similarity);
        let res_sim = (stacked(&poly, &u, &inv) * rigidity::similarity_generators(&u)).amax();
        worst = worst.max(res).max(res_sim);
        ensure!(res <= 1e-8 && res_sim <= 1e-8, "{name}: residual {res:.2e} / {res_sim:.2e}");

        let n = geometry::normalize(&r).map_err(|e| e.to_string())?;
        let det = (rigidity::normalization_rows(&n) * rigidity::congruence_generators(&n)).determinant();
        let (v1, v2, v3) = (n.vertices[0], n.vertices[1], n.vertices[2]);
        let expect = (v3.y - v1.y) * (v2.x - v1.x).powi(2);
        let rel = (det - expect).abs() / expect.abs().max(1e-300);
        worst_det = worst_det.max(rel);
        ensure!(expect.abs() > 1e-6 && rel <= 1e-8, "{name}: det {det} vs {expect}");
    }
    Ok(format!("max residual {worst:.1e}, det rel err {worst_det:.1e}"))
}

fn check_hexahedron(label: &str, poly: &AbstractPolyhedron, r: &Realization) -> Result<(), String> {
    for f in poly.faces() {
        ensure!(f.len() == 4, "{label}: face {f:?} is not a quadrilateral");
        let p: Vec<Point> = f.iter().map(|&v| r.vertices[v]).collect();
        let planar = (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0]));
        ensure!(planar.abs() <= 1e-9, "{label}: face {f:?} off-plane by {planar:.2e}");
        for (a, b) in [(0, 2), (1, 3)] {
            let d = (p[a] - p[b]).norm();
            ensure!((d - SQRT_2).abs() <= 1e-9, "{label}: diagonal {d} on face {f:?}");
        }
    }
    geometry::fit_realization(poly, &r.vertices).map_err(|e| format!("{label}: {e}"))?;
    Ok(())
}

/// The configuration is a unit cube: the edges at vertex 0 are orthonormal
/// and every vertex sits at a 0/1 combination of them.
fn is_unit_cube(poly: &AbstractPolyhedron, r: &Realization, tol: f64) -> bool {
    let edges = cycle_edges(poly.faces());
    let o = r.vertices[0];
    let frame: Vec<Vector3<f64>> = edges
        .iter()
        .filter_map(|&(a, b)| match (a, b) {
            (0, w) => Some(r.vertices[w] - o),
            _ => None,
        })
        .collect();
    if frame.len() != 3 {
        return false;
    }
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            if (frame[i].dot(&frame[j]) - want).abs() > tol {
                return false;
            }
        }
    }
    let mut used = [false; 8];
    for v in &r.vertices {
        let hit = (0..8).find(|&m| {
            let c = o + (0..3).filter(|b| m >> b & 1 == 1).map(|b| frame[b]).sum::<Vector3<f64>>();
            (v - c).norm() <= tol
        });
        match hit {
            Some(m) if !used[m] => used[m] = true,
            _ => return false,
        }
    }
    true
}

fn hexahedra() -> Result<String, String> {
    for q in [0.0, 0.1, -0.1, 0.2, -0.2, 0.28, -0.28] {
        let (poly, r) = hexahedron_family_a(q).map_err(|e| format!("a({q}): {e}"))?;
        check_hexahedron(&format!("a({q})"), &poly, &r)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut samples = vec![(0.2, 0.0)];
    while samples.len() < 10 {
        samples.push((rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25)));
    }
    for &(q1, q2) in &samples {
        let (poly, r) = hexahedron_family_b(q1, q2).map_err(|e| format!("b({q1},{q2}): {e}"))?;
        check_hexahedron(&format!("b({q1:.3},{q2:.3})"), &poly, &r)?;
    }
    let (pa, ra) = hexahedron_family_a(0.0).map_err(|e| e.to_string())?;
    ensure!(is_unit_cube(&pa, &ra, 1e-10), "family a at 0 is not a unit cube");
    let (pb, rb) = hexahedron_family_b(0.0, 0.0).map_err(|e| e.to_string())?;
    ensure!(is_unit_cube(&pb, &rb, 1e-10), "family b at 0 is not a unit cube");
    for q in [0.3, -0.29, 0.5] {
        ensure!(hexahedron_family_a(q).is_err(), "family a accepted q1 = {q}");
    }
    for (q1, q2) in [(0.4, 0.4), (0.5, -0.3), (0.0, 0.75)] {
        ensure!(hexahedron_family_b(q1, q2).is_err(), "family b accepted ({q1}, {q2})");
    }
    Ok(format!("7 family-a, {} family-b samples", samples.len()))
}

fn cube_flex_witnesses() -> Result<String, String> {
    let (poly, r) = generators::platonic("cube", 1.0).map_err(|e| e.to_string())?;
    let mut seps = Vec::new();
    for (label, set) in [("edges", rigidity::edge_lengths(&poly)), ("diagonals", rigidity::face_diagonals(&poly))] {
        ensure!(set.len() == 12, "{label}: {} measurements", set.len());
        let w = rigidity::flex_witness(&poly, &r, &set, Mode::Congruence, &FlexOptions::default())
            .map_err(|e| format!("{label}: {e}"))?
            .ok_or_else(|| format!("{label}: no witness"))?;
        let wr = &w.realization;
        let mut res: f64 = geometry::phi(&poly, wr).amax();
        for m in &set {
            let a = geometry::evaluate(m, wr).map_err(|e| e.to_string())?;
            let b = geometry::evaluate(m, &r).map_err(|e| e.to_string())?;
            res = res.max((a - b).abs());
        }
        ensure!(res <= 1e-8, "{label}: residual {res:.2e}");
        let a = DMatrix::from_fn(8, 3, |i, k| r.vertices[i][k]);
        let b = DMatrix::from_fn(8, 3, |i, k| wr.vertices[i][k]);
        let sep = aligned_max_deviation(&a, &b, false) / r.diameter();
        ensure!(sep >= 1e-4, "{label}: separation {sep:.2e}");
        seps.push(format!("{label} {sep:.1e}"));
    }
    Ok(seps.join(", "))
}

fn square() -> Result<String, String> {
    let o = polygon::square_angle_oracle(1.0).map_err(|e| e.to_string())?;
    ensure!((o.value - FRAC_PI_2).abs() <= 1e-9, "max angle {}", o.value);
    let unit_sq = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)];
    let dev = polygon::aligned_deviation_2d(&o.argmax, &unit_sq, true);
    ensure!(dev <= 1e-6, "argmax is {dev:.2e} from the unit square");

    use SimpleMeasurement::*;
    let pts: Vec<Point> = unit_sq.iter().map(|p| Point::new(p.x, p.y, 0.0)).collect();
    let four = vec![Distance(0, 1), Distance(0, 2), Distance(0, 3), Angle(1, 2, 3)];
    let opts = WitnessOptions { restarts: 200, ..WitnessOptions::default() };
    let rep = point_set_witness(&PointProblem::new(2, pts.clone(), four), &opts).map_err(|e| e.to_string())?;
    ensure!(rep.clusters.len() == 1 && rep.witness.is_none(), "{} clusters from the 4-set", rep.clusters.len());
    let hits = rep.reference_hits();

    let five = vec![Angle(1, 0, 3), Angle(2, 3, 0), Distance(0, 1), Distance(2, 3), Angle(0, 1, 2)];
    let rep = point_set_witness(&PointProblem::new(2, pts, five), &opts).map_err(|e| e.to_string())?;
    let w = rep.witness.as_ref().ok_or("no witness for the 5-set")?;
    let q: Vec<Point2> = w.iter().map(|p| Point2::new(p.x, p.y)).collect();
    for k in 0..4 {
        let a = angle2(q[k], q[(k + 1) % 4], q[(k + 3) % 4]);
        ensure!((a - FRAC_PI_2).abs() <= 1e-6, "witness angle {a} at {k}");
    }
    let (w01, w12) = ((q[1] - q[0]).norm(), (q[2] - q[1]).norm());
    ensure!((w01 - 1.0).abs() <= 1e-6 && (w12 - 1.0).abs() > 1e-3, "witness sides {w01}, {w12}");
    Ok(format!("4-set: {hits}/200 to the square; rectangle {w01:.3} x {w12:.3}"))
}

fn right_angle_quads() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let ac = rng.random_range(0.8..2.0);
        let ab = ac * rng.random_range(0.2..0.9);
        let ad = ac * rng.random_range(0.2..0.9);
        let o = polygon::right_angle_quad_oracle(ab, ad, ac).map_err(|e| e.to_string())?;
        let p = &o.argmax;
        let abc = angle2(p[1], p[0], p[2]);
        let adc = angle2(p[3], p[0], p[2]);
        worst = worst.max((abc - FRAC_PI_2).abs()).max((adc - FRAC_PI_2).abs());
        ensure!(worst <= 1e-8, "({ab:.3}, {ad:.3}, {ac:.3}): angles {abc}, {adc}");
        ensure!(((p[1] - p[0]).norm() - ab).abs() <= 1e-9 && ((p[2] - p[0]).norm() - ac).abs() <= 1e-9, "lengths drift");
    }
    Ok(format!("10 triples, worst angle error {worst:.1e}"))
}

fn staircases() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for n in 4..=8 {
        let spread = PI / (2.0 * (n - 2) as f64);
        let angles: Vec<f64> = (0..n - 2).map(|_| rng.random_range(FRAC_PI_2 - spread..FRAC_PI_2 - 0.05)).collect();
        let a12 = rng.random_range(0.5..2.0);
        let cfg = polygon::staircase_polygon(n, a12, &angles).map_err(|e| format!("n = {n}: {e}"))?;
        let p = cfg.points();
        for k in 1..n - 1 {
            let (prev, next) = ((p[k] - p[0]).norm(), (p[k + 1] - p[0]).norm());
            let rel = (next - prev / angles[k - 1].sin()).abs() / next;
            worst = worst.max(rel);
            ensure!(rel <= 1e-10, "n = {n}: chain breaks at k = {k} ({rel:.2e})");
            ensure!((angle2(p[k], p[0], p[k + 1]) - FRAC_PI_2).abs() <= 1e-10, "n = {n}: angle at A_{}", k + 1);
        }
        let pts = cfg.to_points3();
        let problem = PointProblem::new(2, pts, polygon::staircase_measurements(n)).with_admissibility(Admissibility::ConvexPolygon);
        let rep = point_set_witness(&problem, &WitnessOptions { restarts: 200, seed: n as u64, ..WitnessOptions::default() })
            .map_err(|e| format!("n = {n}: {e}"))?;
        ensure!(rep.witness.is_none(), "n = {n}: witness found");
        ensure!(rep.reference_hits() > 0, "n = {n}: reference never reached");
    }
    Ok(format!("n = 4..8, chain error {worst:.1e}"))
}

fn cube_distance_sets() -> Result<String, String> {
    use SimpleMeasurement::Distance;
    let (pts, faces) = cube_points();
    let ten = vec![
        Distance(0, 1),
        Distance(0, 3),
        Distance(0, 4),
        Distance(1, 3),
        Distance(1, 4),
        Distance(3, 4),
        Distance(0, 6),
        Distance(5, 6),
        Distance(7, 6),
        Distance(2, 6),
    ];
    let problem = |s: Vec<SimpleMeasurement>| {
        PointProblem::new(3, pts.clone(), s)
            .with_coplanar(faces.clone())
            .with_admissibility(Admissibility::ConvexPolyhedron(faces.clone()))
    };
    let opts = WitnessOptions { restarts: 500, ..WitnessOptions::default() };
    let rep = point_set_witness(&problem(ten.clone()), &opts).map_err(|e| e.to_string())?;
    ensure!(rep.witness.is_none(), "10-set produced a witness");
    let nine: Vec<_> = ten.into_iter().filter(|m| *m != Distance(2, 6)).collect();
    let rep9 = point_set_witness(&problem(nine), &WitnessOptions { restarts: 200, ..WitnessOptions::default() })
        .map_err(|e| e.to_string())?;
    ensure!(rep9.witness.is_some(), "9-set found no witness");
    Ok(format!("10-set: {}/{} to the cube; 9-set: witness", rep.reference_hits(), rep.restarts))
}

fn octagon() -> Result<String, String> {
    let r = polygon::octagon_distance_oracle().map_err(|e| e.to_string())?;
    let reg = polygon::regular_ngon(8, 1.0).map_err(|e| e.to_string())?;
    let p = reg.points();
    let oracle = (p[2] - p[6]).norm();
    let closed = 1.0 / (PI / 8.0).sin();
    ensure!((oracle - closed).abs() <= 1e-12, "regular |A3A7| {oracle} vs {closed}");
    ensure!((r.max_distance - oracle).abs() <= 1e-6, "max {} vs regular {oracle}", r.max_distance);
    ensure!(r.argmax_deviation <= 1e-6, "argmax {:.2e} from regular", r.argmax_deviation);
    let t = 3.0 * PI / 8.0;
    let (a, b) = r.midpoint_angles;
    ensure!((a - t).abs() <= 1e-6 && (b - t).abs() <= 1e-6, "midpoint angles {a}, {b}");
    Ok(format!("|A3A7| = {:.12}, angles within {:.1e}", r.max_distance, (a - t).abs().max((b - t).abs())))
}

fn rel_err(g: &DVector<f64>, fd: &DVector<f64>) -> f64 {
    (g - fd).amax() / g.amax().max(fd.amax()).max(1e-8)
}

fn gradients() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for inst in 0..100 {
        // 3D polyhedral measurements.
        let (poly, r) = if inst % 2 == 0 {
            hexahedron_family_b(rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25)).unwrap()
        } else {
            generators::platonic(PLATONIC_NAMES[rng.random_range(0..5)], 1.0).unwrap()
        };
        let shift = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let r = r.scaled(rng.random_range(0.5..2.0)).moved(&random_rotation(&mut rng), &shift);
        let pick = |v: Vec<Measurement3D>, rng: &mut ChaCha8Rng| v[rng.random_range(0..v.len())];
        let ms = [
            pick(rigidity::face_distances(&poly), &mut rng),
            pick(rigidity::face_angles(&poly), &mut rng),
            pick(rigidity::dihedral_angles(&poly), &mut rng),
        ];
        let x = r.to_vector();
        let (nv, nf) = (r.vertices.len(), r.planes.len());
        for m in &ms {
            let g = geometry::gradient(m, &r).map_err(|e| e.to_string())?;
            let fd = DVector::from_fn(x.len(), |i, _| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fp = geometry::evaluate(m, &Realization::from_vector(&xp, nv, nf)).unwrap();
                let fm = geometry::evaluate(m, &Realization::from_vector(&xm, nv, nf)).unwrap();
                (fp - fm) / (2.0 * h)
            });
            let e = rel_err(&g, &fd);
            worst = worst.max(e);
            ensure!(e <= 1e-6, "instance {inst}: {m:?} error {e:.2e}");
        }

        // Simple measurements on free points, in 3D and in the planar chart.
        let n = 5;
        let pts: Vec<Point> = loop {
            let p: Vec<Point> = (0..n)
                .map(|_| Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let ok = (0..n).all(|i| (i + 1..n).all(|j| (p[i] - p[j]).norm() > 0.2));
            if ok {
                break p;
            }
        };
        let mut ids: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            ids.swap(i, rng.random_range(0..=i));
        }
        let simple = [
            SimpleMeasurement::Distance(ids[0], ids[1]),
            SimpleMeasurement::Angle(ids[0], ids[1], ids[2]),
            SimpleMeasurement::DiagonalAngle(ids[0], ids[1], ids[2], ids[3]),
        ];
        for m in &simple {
            let (_, blocks) = m.value_and_gradient(&pts).map_err(|e| e.to_string())?;
            let mut g = DVector::zeros(3 * n);
            for (id, b) in blocks {
                for k in 0..3 {
                    g[3 * id + k] += b[k];
                }
            }
            let fd = DVector::from_fn(3 * n, |i, _| {
                let mut pp = pts.clone();
                let mut pm = pts.clone();
                pp[i / 3][i % 3] += h;
                pm[i / 3][i % 3] -= h;
                (m.evaluate(&pp).unwrap() - m.evaluate(&pm).unwrap()) / (2.0 * h)
            });
            let e = rel_err(&g, &fd);
            worst = worst.max(e);
            ensure!(e <= 1e-6, "instance {inst}: 3D {m:?} error {e:.2e}");

            let cfg = PointConfig2D::new(pts.iter().map(|p| Point2::new(p.x, p.y)).collect()).map_err(|e| e.to_string())?;
            let far = (0..n).all(|i| (i + 1..n).all(|j| (cfg.points()[i] - cfg.points()[j]).norm() > 0.1));
            if !far {
                continue;
            }
            let g2 = polygon::gradient2d(m, &cfg).map_err(|e| e.to_string())?;
            let x = cfg.free_coords();
            let fd2 = DVector::from_fn(x.len(), |i, _| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fp = polygon::evaluate2d(m, &PointConfig2D::from_free(&xp).unwrap()).unwrap();
                let fm = polygon::evaluate2d(m, &PointConfig2D::from_free(&xm).unwrap()).unwrap();
                (fp - fm) / (2.0 * h)
            });
            let e = rel_err(&g2, &fd2);
            worst = worst.max(e);
            ensure!(e <= 1e-6, "instance {inst}: 2D {m:?} error {e:.2e}");
        }
    }
    Ok(format!("100 instances, worst relative error {worst:.1e}"))
}
