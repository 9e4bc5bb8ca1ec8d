//! Distance and angle kernels with analytic gradients.
//!
//! Points are `Vector3`; planar configurations embed with `z = 0` and drop the
//! `z` components of the gradients.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// Rays shorter than this (relative to the other ray) count as degenerate.
const DEGENERATE_LEN: f64 = 1e-14;

/// `|q - p|` and its gradients with respect to `p` and `q`.
pub fn distance(p: &Point, q: &Point) -> Result<(f64, Point, Point)> {
    let d = q - p;
    let len = d.norm();
    if len <= DEGENERATE_LEN {
        return Err(Error::DegenerateMeasurement("coincident points".into()));
    }
    let u = d / len;
    Ok((len, -u, u))
}

/// Unsigned angle between vectors `u` and `w` and its gradients.
///
/// The derivative with respect to `u` is `-ŵ⊥ / |u|`, where `ŵ⊥` is the unit
/// component of `w` orthogonal to `u`. It does not exist when the vectors
/// are parallel.
pub fn vector_angle(u: &Point, w: &Point) -> Result<(f64, Point, Point)> {
    let (nu, nw) = (u.norm(), w.norm());
    if nu <= DEGENERATE_LEN || nw <= DEGENERATE_LEN {
        return Err(Error::DegenerateMeasurement("zero-length ray".into()));
    }
    let cross = u.cross(w).norm();
    let dot = u.dot(w);
    let angle = cross.atan2(dot);
    let w_perp = w - u * (dot / (nu * nu));
    let u_perp = u - w * (dot / (nw * nw));
    let (np_w, np_u) = (w_perp.norm(), u_perp.norm());
    if np_w <= 1e-12 * nw || np_u <= 1e-12 * nu {
        return Err(Error::DegenerateMeasurement("parallel rays: angle not differentiable".into()));
    }
    let du = -w_perp / (np_w * nu);
    let dw = -u_perp / (np_u * nw);
    Ok((angle, du, dw))
}

/// Angle at `apex` between rays to `p` and `q`; gradients `(apex, p, q)`.
pub fn angle_at(apex: &Point, p: &Point, q: &Point) -> Result<(f64, [Point; 3])> {
    let (a, du, dw) = vector_angle(&(p - apex), &(q - apex))?;
    Ok((a, [-(du + dw), du, dw]))
}

/// Angle between segments `p0p1` and `q0q1`; gradients `(p0, p1, q0, q1)`.
pub fn segment_angle(p0: &Point, p1: &Point, q0: &Point, q1: &Point) -> Result<(f64, [Point; 4])> {
    let (a, du, dw) = vector_angle(&(p1 - p0), &(q1 - q0))?;
    Ok((a, [-du, du, -dw, dw]))
}

/// Signed volume-type triple product `[q - p, r - p, s - p]`; vanishes when the
/// four points are coplanar. Gradients `(p, q, r, s)`.
pub fn triple_product(p: &Point, q: &Point, r: &Point, s: &Point) -> (f64, [Point; 4]) {
    let (a, b, c) = (q - p, r - p, s - p);
    let value = a.dot(&b.cross(&c));
    let ga = b.cross(&c);
    let gb = c.cross(&a);
    let gc = a.cross(&b);
    (value, [-(ga + gb + gc), ga, gb, gc])
}

/// Distance and angle measurements on labelled point sets.
///
/// `Angle(i, j, k)` is the angle at `j`; `DiagonalAngle(i, j, k, l)` is the
/// angle between segments `ij` and `kl`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SimpleMeasurement {
    Distance(usize, usize),
    Angle(usize, usize, usize),
    DiagonalAngle(usize, usize, usize, usize),
}

impl SimpleMeasurement {
    pub fn ids(&self) -> Vec<usize> {
        match *self {
            SimpleMeasurement::Distance(i, j) => vec![i, j],
            SimpleMeasurement::Angle(i, j, k) => vec![i, j, k],
            SimpleMeasurement::DiagonalAngle(i, j, k, l) => vec![i, j, k, l],
        }
    }

    pub fn is_scale_invariant(&self) -> bool {
        !matches!(self, SimpleMeasurement::Distance(..))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let ids = self.ids();
        if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidMeasurement(format!("{self:?}: point {bad} out of range (n = {n})")));
        }
        let distinct = match *self {
            SimpleMeasurement::Distance(i, j) => i != j,
            SimpleMeasurement::Angle(i, j, k) => i != j && j != k && i != k,
            SimpleMeasurement::DiagonalAngle(i, j, k, l) => i != j && k != l && (i, j) != (k, l) && (i, j) != (l, k),
        };
        if !distinct {
            return Err(Error::InvalidMeasurement(format!("{self:?}: repeated point ids")));
        }
        Ok(())
    }

    /// Value and the nonzero gradient blocks as `(point id, block)` pairs.
    pub fn value_and_gradient(&self, pts: &[Point]) -> Result<(f64, Vec<(usize, Point)>)> {
        Ok(match *self {
            SimpleMeasurement::Distance(i, j) => {
                let (v, gi, gj) = distance(&pts[i], &pts[j])?;
                (v, vec![(i, gi), (j, gj)])
            }
            SimpleMeasurement::Angle(i, j, k) => {
                let (v, [gj, gi, gk]) = angle_at(&pts[j], &pts[i], &pts[k])?;
                (v, vec![(i, gi), (j, gj), (k, gk)])
            }
            SimpleMeasurement::DiagonalAngle(i, j, k, l) => {
                let (v, [gi, gj, gk, gl]) = segment_angle(&pts[i], &pts[j], &pts[k], &pts[l])?;
                (v, vec![(i, gi), (j, gj), (k, gk), (l, gl)])
            }
        })
    }

    pub fn evaluate(&self, pts: &[Point]) -> Result<f64> {
        Ok(self.value_and_gradient(pts)?.0)
    }
}
