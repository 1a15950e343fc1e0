//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Outcome of a thresholded rank decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankDecision {
    pub rank: usize,
    /// Some singular value sits within a factor of ten of the threshold.
    pub ambiguous: bool,
    /// Ratio of the smallest kept singular value to the largest discarded one.
    pub gap: f64,
}

/// Numerical rank with threshold `tol * scale`.
///
/// `scale` is usually the norm of the pencil the matrix was built from, so
/// that block matrices assembled from it are judged on a common footing.
pub fn rank_decision(m: &CMat, tol: f64, scale: f64) -> RankDecision {
    let sv = singular_values(m);
    let thresh = tol * scale;
    let rank = sv.iter().filter(|&&s| s > thresh).count();
    let ambiguous = sv.iter().any(|&s| s > thresh / 10.0 && s < thresh * 10.0);
    let kept = if rank > 0 { sv[rank - 1] } else { f64::INFINITY };
    let dropped = sv.get(rank).copied().unwrap_or(0.0);
    let gap = if dropped > 0.0 { kept / dropped } else { f64::INFINITY };
    RankDecision { rank, ambiguous, gap }
}

/// Kronecker product of two complex matrices.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Eigenvalues of a square complex matrix via the complex Schur form.
pub fn eigenvalues(m: &CMat) -> Option<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Some(Vec::new());
    }
    if n == 1 {
        return Some(vec![m[(0, 0)]]);
    }
    let schur = Schur::try_new(m.clone(), 1e-15, 10_000)?;
    let (_, t) = schur.unpack();
    Some((0..n).map(|i| t[(i, i)]).collect())
}

/// Hermitian positive definite inverse square root.
pub fn herm_inv_sqrt(m: &CMat) -> CMat {
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| Complex64::new(1.0 / v.max(f64::MIN_POSITIVE).sqrt(), 0.0));
    let v = &eig.eigenvectors;
    v * CMat::from_diagonal(&vals) * v.adjoint()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn herm_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut vals: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    vals
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number(m: &CMat) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / std::f64::consts::SQRT_2
    })
}

/// Haar-ish random unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let g = random_gaussian(rng, n, n);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // Fix the column phases so the distribution does not depend on QR sign conventions.
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            for i in 0..n {
                q[(i, j)] *= ph;
            }
        }
    }
    q
}

/// Random matrix of determinant one with moderate condition number.
pub fn random_special_linear<R: Rng>(rng: &mut R, n: usize) -> CMat {
    loop {
        let g = random_gaussian(rng, n, n) + CMat::identity(n, n) * Complex64::new(1.5, 0.0);
        if condition_number(&g) > 1e3 {
            continue;
        }
        let det = g.determinant();
        let root = det.powf(1.0 / n as f64);
        return g / root;
    }
}

/// Horizontal and vertical block placement helper.
pub fn set_block(target: &mut CMat, row: usize, col: usize, block: &CMat) {
    target.view_mut((row, col), (block.nrows(), block.ncols())).copy_from(block);
}
