use num_complex::Complex64;

use super::{EigenvalueLocus, KroneckerStructure, Locus, MatrixPencil};
use crate::error::{Error, Result};
use crate::linalg::{CMat, ONE, ZERO};

/// Moebius transformation `x -> (a x + b) / (c x + d)`, stored with unit determinant.
///
/// On pencils it acts as `(R, S) -> (a R + b S, c R + d S)`, which is the
/// qubit operator `[[a, b], [c, d]]` applied to the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moebius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Moebius {
    /// Normalizes the determinant to one; fails for singular matrices.
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if det.norm() <= 1e-300 || !det.norm().is_finite() {
            return Err(Error::PreconditionViolated("singular Moebius matrix".into()));
        }
        let s = det.sqrt();
        Ok(Self { a: a / s, b: b / s, c: c / s, d: d / s })
    }

    pub fn identity() -> Self {
        Self { a: ONE, b: ZERO, c: ZERO, d: ONE }
    }

    pub fn from_matrix(m: &CMat) -> Result<Self> {
        Self::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
    }

    pub fn matrix(&self) -> CMat {
        CMat::from_row_slice(2, 2, &[self.a, self.b, self.c, self.d])
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// `self o other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn apply(&self, x: &EigenvalueLocus) -> EigenvalueLocus {
        let [p, q] = x.homogeneous();
        EigenvalueLocus::from_homogeneous(self.a * p + self.b * q, self.c * p + self.d * q)
    }

    pub fn apply_pencil(&self, p: &MatrixPencil) -> MatrixPencil {
        MatrixPencil {
            mu_coeff: &p.mu_coeff * self.a + &p.lambda_coeff * self.b,
            lambda_coeff: &p.mu_coeff * self.c + &p.lambda_coeff * self.d,
        }
    }

    /// Sends `p -> 0`, `q -> 1`, `r -> infinity`.
    fn to_standard(p: &EigenvalueLocus, q: &EigenvalueLocus, r: &EigenvalueLocus) -> Result<Self> {
        let [p1, p2] = p.homogeneous();
        let [q1, q2] = q.homogeneous();
        let [r1, r2] = r.homogeneous();
        // Linear forms vanishing at p and r, scaled so that q lands on 1.
        let lp_q = q1 * p2 - q2 * p1;
        let lr_q = q1 * r2 - q2 * r1;
        if lp_q.norm() == 0.0 || lr_q.norm() == 0.0 {
            return Err(Error::PreconditionViolated("three points must be distinct".into()));
        }
        let k = lr_q / lp_q;
        Self::new(k * p2, -k * p1, r2, -r1)
    }

    /// The unique map sending `src[i] -> dst[i]` for three distinct points.
    pub fn from_three_points(src: [&EigenvalueLocus; 3], dst: [&EigenvalueLocus; 3]) -> Result<Self> {
        let s = Self::to_standard(src[0], src[1], src[2])?;
        let t = Self::to_standard(dst[0], dst[1], dst[2])?;
        Ok(t.inverse().compose(&s))
    }
}

/// Relabels every eigenvalue of `ks` through `g`.
pub fn moebius_on_kcf(ks: &KroneckerStructure, g: &Moebius) -> Result<KroneckerStructure> {
    let loci = ks.loci().iter().map(|l| Locus::new(g.apply(&l.value), l.signature.clone())).collect();
    KroneckerStructure::new(ks.col_indices().to_vec(), ks.row_indices().to_vec(), loci)
}

/// Two structures describe the same SLOCC class: equal minimal indices and a
/// Moebius map carrying the loci of one onto the loci of the other with
/// matching signatures (eigenvalues compared in chordal distance `tol`).
pub fn moebius_equivalent(a: &KroneckerStructure, b: &KroneckerStructure, tol: f64) -> bool {
    if !a.same_shape(b) {
        return false;
    }
    let la = a.loci();
    let lb = b.loci();
    if la.len() <= 3 {
        return true;
    }
    for i in 0..lb.len() {
        if lb[i].signature != la[0].signature {
            continue;
        }
        for j in 0..lb.len() {
            if j == i || lb[j].signature != la[1].signature {
                continue;
            }
            for k in 0..lb.len() {
                if k == i || k == j || lb[k].signature != la[2].signature {
                    continue;
                }
                let Ok(g) = Moebius::from_three_points(
                    [&la[0].value, &la[1].value, &la[2].value],
                    [&lb[i].value, &lb[j].value, &lb[k].value],
                ) else {
                    continue;
                };
                let mut used = vec![false; lb.len()];
                used[i] = true;
                used[j] = true;
                used[k] = true;
                let all_match = la[3..].iter().all(|l| {
                    let img = g.apply(&l.value);
                    match (0..lb.len())
                        .find(|&t| !used[t] && lb[t].signature == l.signature && lb[t].value.chordal_distance(&img) <= tol)
                    {
                        Some(t) => {
                            used[t] = true;
                            true
                        }
                        None => false,
                    }
                });
                if all_match {
                    return true;
                }
            }
        }
    }
    false
}
