//! Rank-revealing helpers on dense `f64` matrices.

use nalgebra::{DMatrix, DVector};

/// Default relative singular-value threshold.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Singular value decomposition with singular values in decreasing order.
///
/// Backed by faer: nalgebra's SVD can stop with reconstruction errors near
/// 1e-7 when two singular values nearly coincide.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn decompose(m: &DMatrix<f64>, full: bool) -> Svd {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        let (ur, vr) = if full { (r, c) } else { (0, 0) };
        return Svd { u: DMatrix::identity(r, ur), s: DVector::zeros(0), v_t: DMatrix::identity(vr, c) };
    }
    let f = to_faer(m);
    let (u, s, v) = if full {
        let d = f.svd().expect("SVD converges");
        (from_faer(d.U()), d.S().column_vector().iter().copied().collect::<Vec<_>>(), from_faer(d.V()))
    } else {
        let d = f.thin_svd().expect("SVD converges");
        (from_faer(d.U()), d.S().column_vector().iter().copied().collect::<Vec<_>>(), from_faer(d.V()))
    };
    Svd { u, s: DVector::from_vec(s), v_t: v.transpose() }
}

/// Thin SVD: `u` is `m × k`, `v_t` is `k × n` with `k = min(m, n)`.
pub fn thin_svd(m: &DMatrix<f64>) -> Svd {
    decompose(m, false)
}

/// Full SVD: `u` is `m × m`, `v_t` is `n × n`.
pub fn full_svd(m: &DMatrix<f64>) -> Svd {
    decompose(m, true)
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = to_faer(m).singular_values().expect("SVD converges");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `tol_rel * σ_max`; zero for a zero matrix.
pub fn numeric_rank(m: &DMatrix<f64>, tol_rel: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&max) if max > 0.0 => s.iter().filter(|&&x| x > tol_rel * max).count(),
        _ => 0,
    }
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn null_space(m: &DMatrix<f64>, tol_rel: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let svd = full_svd(m);
    let max = svd.s.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&k| k >= svd.s.len() || max <= 0.0 || svd.s[k] <= tol_rel * max)
        .map(|k| svd.v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Minimum-norm least-squares solution of `m x = b`, truncating singular
/// values below `tol_rel * σ_max`.
pub fn min_norm_solve(m: &DMatrix<f64>, b: &DVector<f64>, tol_rel: f64) -> DVector<f64> {
    let svd = thin_svd(m);
    let max = svd.s.iter().cloned().fold(0.0, f64::max);
    let g = svd.u.transpose() * b;
    let mut coeff = DVector::zeros(svd.s.len());
    for k in 0..svd.s.len() {
        if svd.s[k] > tol_rel * max {
            coeff[k] = g[k] / svd.s[k];
        }
    }
    svd.v_t.transpose() * coeff
}

/// Orthonormal basis grown one row at a time.
///
/// Candidate rows are orthogonalized against the current basis with two
/// passes of modified Gram-Schmidt; a row is accepted only when its residual
/// exceeds `tol_rel` times its own norm.
#[derive(Debug, Clone)]
pub struct IncrementalBasis {
    dim: usize,
    tol_rel: f64,
    vectors: Vec<DVector<f64>>,
}

impl IncrementalBasis {
    pub fn new(dim: usize, tol_rel: f64) -> Self {
        Self { dim, tol_rel, vectors: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Relative residual of `row` after projecting out the span.
    pub fn residual_ratio(&self, row: &DVector<f64>) -> f64 {
        let norm = row.norm();
        if norm == 0.0 {
            return 0.0;
        }
        self.orthogonalize(row).norm() / norm
    }

    fn orthogonalize(&self, row: &DVector<f64>) -> DVector<f64> {
        let mut r = row.clone();
        for _ in 0..2 {
            for q in &self.vectors {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        r
    }

    /// Adds `row` if it is independent of the current span; returns whether it
    /// was accepted.
    pub fn try_push(&mut self, row: &DVector<f64>) -> bool {
        let norm = row.norm();
        if norm == 0.0 {
            return false;
        }
        let r = self.orthogonalize(row);
        let rn = r.norm();
        if rn > self.tol_rel * norm {
            self.vectors.push(r / rn);
            true
        } else {
            false
        }
    }
}

/// Best alignment of point set `b` onto `a` (Kabsch), returning the maximum
/// point deviation after alignment.
///
/// Points are rows of `dim` columns. With `allow_reflection` the optimal
/// orthogonal map may have determinant -1.
pub fn aligned_max_deviation(a: &DMatrix<f64>, b: &DMatrix<f64>, allow_reflection: bool) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let n = a.nrows() as f64;
    let ca = a.row_sum() / n;
    let cb = b.row_sum() / n;
    let mut a0 = a.clone();
    let mut b0 = b.clone();
    for mut r in a0.row_iter_mut() {
        r -= &ca;
    }
    for mut r in b0.row_iter_mut() {
        r -= &cb;
    }
    let (u, vt) = svd_sorted(&(b0.transpose() * &a0));
    let mut rot = &u * &vt;
    if !allow_reflection && rot.determinant() < 0.0 {
        let mut d = DMatrix::identity(rot.nrows(), rot.ncols());
        let last = d.nrows() - 1;
        d[(last, last)] = -1.0;
        rot = u * d * vt;
    }
    let moved = &b0 * rot;
    (0..a.nrows())
        .map(|i| (moved.row(i) - a0.row(i)).norm())
        .fold(0.0, f64::max)
}

fn svd_sorted(h: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let svd = full_svd(h);
    (svd.u, svd.v_t)
}
