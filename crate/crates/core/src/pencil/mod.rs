//! Matrix pencils attached to `2 x m x n` states and their Kronecker structure.
//!
//! A state with slices `R = psi[0,.,.]` and `S = psi[1,.,.]` defines the pencil
//! `mu*R + lambda*S`.  Local operators act as `B (mu R + lambda S) C^T` on the
//! qudit legs and as a Moebius transformation of `(mu, lambda)` on the qubit leg.

mod kcf;
mod moebius;

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, ONE};
use crate::tensor::StateTensor;

pub use kcf::{compute_kcf, compute_kcf_exact, compute_kcf_with, ExactPencil, KcfOptions};
pub use moebius::{moebius_equivalent, moebius_on_kcf, Moebius};

/// An eigenvalue of a pencil: a point of the Riemann sphere.
///
/// The value `x` belongs to the block with diagonal `x*mu + lambda`, so
/// `mu*R + lambda*S` loses rank at `(mu, lambda) = (1, -x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenvalueLocus {
    Finite(Complex64),
    Infinity,
}

impl EigenvalueLocus {
    pub fn finite(re: f64, im: f64) -> Self {
        EigenvalueLocus::Finite(Complex64::new(re, im))
    }

    pub fn real(x: f64) -> Self {
        Self::finite(x, 0.0)
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, EigenvalueLocus::Infinity)
    }

    /// Homogeneous coordinates `[x : 1]` or `[1 : 0]`.
    pub fn homogeneous(&self) -> [Complex64; 2] {
        match *self {
            EigenvalueLocus::Finite(x) => [x, ONE],
            EigenvalueLocus::Infinity => [ONE, Complex64::new(0.0, 0.0)],
        }
    }

    /// Point with homogeneous coordinates `[p : q]`; tiny `q` is read as infinity.
    pub fn from_homogeneous(p: Complex64, q: Complex64) -> Self {
        if q.norm() <= 1e-300 || q.norm() <= 1e-14 * p.norm() {
            EigenvalueLocus::Infinity
        } else {
            EigenvalueLocus::Finite(p / q)
        }
    }

    /// Chordal distance on the Riemann sphere, in `[0, 1]`.
    /// Rounds real or imaginary parts below `1e-12` (relative to the modulus
    /// when it exceeds one) to exact zeros.
    pub fn cleaned(&self) -> Self {
        match *self {
            EigenvalueLocus::Finite(x) => {
                let floor = 1e-12 * x.norm().max(1.0);
                let clean = |t: f64| if t.abs() < floor { 0.0 } else { t };
                EigenvalueLocus::Finite(Complex64::new(clean(x.re), clean(x.im)))
            }
            EigenvalueLocus::Infinity => EigenvalueLocus::Infinity,
        }
    }

    pub fn chordal_distance(&self, other: &Self) -> f64 {
        let [p1, q1] = self.homogeneous();
        let [p2, q2] = other.homogeneous();
        let cross = (p1 * q2 - p2 * q1).norm();
        let n1 = (p1.norm_sqr() + q1.norm_sqr()).sqrt();
        let n2 = (p2.norm_sqr() + q2.norm_sqr()).sqrt();
        cross / (n1 * n2)
    }

    fn sort_key(&self) -> (u8, f64, f64) {
        match *self {
            EigenvalueLocus::Finite(x) => (0, x.re, x.im),
            EigenvalueLocus::Infinity => (1, 0.0, 0.0),
        }
    }
}

impl fmt::Display for EigenvalueLocus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EigenvalueLocus::Infinity => write!(f, "inf"),
            EigenvalueLocus::Finite(x) => {
                if x.im == 0.0 {
                    write!(f, "{}", x.re)
                } else if x.im < 0.0 || (x.im == 0.0 && x.im.is_sign_negative()) {
                    write!(f, "{}-{}i", x.re, -x.im)
                } else {
                    write!(f, "{}+{}i", x.re, x.im)
                }
            }
        }
    }
}

/// An eigenvalue together with its Segre characteristic (Jordan block sizes, descending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Locus {
    pub value: EigenvalueLocus,
    pub signature: Vec<usize>,
}

impl Locus {
    pub fn new(value: EigenvalueLocus, signature: Vec<usize>) -> Self {
        let mut signature = signature;
        signature.sort_unstable_by(|a, b| b.cmp(a));
        Self { value, signature }
    }

    pub fn multiplicity(&self) -> usize {
        self.signature.iter().sum()
    }

    pub fn is_semisimple(&self) -> bool {
        self.signature.iter().all(|&e| e == 1)
    }
}

/// Kronecker canonical form data of a pencil.
///
/// `col_indices` are the sizes `e` of the `L_e` blocks (shape `e x (e+1)`),
/// `row_indices` the sizes `v` of the `L^T_v` blocks (shape `(v+1) x v`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KroneckerStructure {
    col_indices: Vec<usize>,
    row_indices: Vec<usize>,
    loci: Vec<Locus>,
}

impl KroneckerStructure {
    /// Validates and normalizes: index lists are sorted ascending, signatures descending.
    pub fn new(col_indices: Vec<usize>, row_indices: Vec<usize>, loci: Vec<Locus>) -> Result<Self> {
        if col_indices.iter().chain(&row_indices).any(|&e| e == 0) {
            return Err(Error::InvalidStructure("minimal indices must be at least 1".into()));
        }
        let mut loci: Vec<Locus> = loci.into_iter().map(|l| Locus::new(l.value, l.signature)).collect();
        for l in &loci {
            if l.signature.is_empty() || l.signature.contains(&0) {
                return Err(Error::InvalidStructure("signatures must be non-empty with positive parts".into()));
            }
            if let EigenvalueLocus::Finite(x) = l.value {
                if !x.re.is_finite() || !x.im.is_finite() {
                    return Err(Error::InvalidStructure("eigenvalues must be finite numbers or inf".into()));
                }
            }
        }
        for i in 0..loci.len() {
            for j in (i + 1)..loci.len() {
                if loci[i].value.chordal_distance(&loci[j].value) <= 1e-12 {
                    return Err(Error::InvalidStructure(format!("repeated eigenvalue {}", loci[i].value)));
                }
            }
        }
        let mut col_indices = col_indices;
        let mut row_indices = row_indices;
        col_indices.sort_unstable();
        row_indices.sort_unstable();
        loci.shrink_to_fit();
        let ks = Self { col_indices, row_indices, loci };
        if ks.rows() == 0 || ks.cols() == 0 {
            return Err(Error::InvalidStructure("empty pencil".into()));
        }
        Ok(ks)
    }

    /// Structure consisting of eigenvalue blocks only.
    pub fn regular(loci: Vec<Locus>) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), loci)
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_indices
    }

    pub fn loci(&self) -> &[Locus] {
        &self.loci
    }

    pub fn regular_size(&self) -> usize {
        self.loci.iter().map(Locus::multiplicity).sum()
    }

    /// Number of rows of the pencil (the `m` of `2 x m x n`).
    pub fn rows(&self) -> usize {
        self.col_indices.iter().sum::<usize>()
            + self.row_indices.iter().map(|v| v + 1).sum::<usize>()
            + self.regular_size()
    }

    /// Number of columns of the pencil (the `n` of `2 x m x n`).
    pub fn cols(&self) -> usize {
        self.col_indices.iter().map(|e| e + 1).sum::<usize>()
            + self.row_indices.iter().sum::<usize>()
            + self.regular_size()
    }

    pub fn has_singular_blocks(&self) -> bool {
        !self.col_indices.is_empty() || !self.row_indices.is_empty()
    }

    /// Only 1x1 eigenvalue blocks.
    pub fn is_diagonal(&self) -> bool {
        !self.has_singular_blocks() && self.loci.iter().all(Locus::is_semisimple)
    }

    /// Algebraic multiplicities, descending.
    pub fn multiplicities(&self) -> Vec<usize> {
        let mut ms: Vec<usize> = self.loci.iter().map(Locus::multiplicity).collect();
        ms.sort_unstable_by(|a, b| b.cmp(a));
        ms
    }

    /// The pencil comes from a fully entangled state.
    ///
    /// With positive minimal indices the marginals on the qudits have full
    /// rank; the qubit marginal is singular exactly when `R` and `S` are
    /// proportional, which for a regular pencil means a single semisimple locus.
    pub fn is_fully_entangled(&self) -> bool {
        !(!self.has_singular_blocks() && self.loci.len() == 1 && self.loci[0].is_semisimple())
    }

    /// Same eigenvalues with every Jordan block split into 1x1 blocks.
    ///
    /// Only meaningful for regular pencils; singular blocks are kept as they are.
    pub fn diagonal_reduct(&self) -> Self {
        let loci = self
            .loci
            .iter()
            .map(|l| Locus { value: l.value, signature: vec![1; l.multiplicity()] })
            .collect();
        Self { col_indices: self.col_indices.clone(), row_indices: self.row_indices.clone(), loci }
    }

    /// Structure of the transposed pencil.
    pub fn transposed(&self) -> Self {
        Self { col_indices: self.row_indices.clone(), row_indices: self.col_indices.clone(), loci: self.loci.clone() }
    }

    /// Loci sorted by multiplicity, then signature (both descending), then value.
    pub fn canonical_loci(&self) -> Vec<Locus> {
        let mut loci = self.loci.clone();
        loci.sort_by(|a, b| {
            b.multiplicity()
                .cmp(&a.multiplicity())
                .then_with(|| b.signature.cmp(&a.signature))
                .then_with(|| a.value.sort_key().partial_cmp(&b.value.sort_key()).unwrap_or(Ordering::Equal))
        });
        loci
    }

    /// Equality of structure and eigenvalues up to reordering of loci.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.col_indices != other.col_indices
            || self.row_indices != other.row_indices
            || self.loci.len() != other.loci.len()
        {
            return false;
        }
        let mut used = vec![false; other.loci.len()];
        for l in &self.loci {
            let hit = other.loci.iter().enumerate().find(|(j, o)| {
                !used[*j] && o.signature == l.signature && o.value.chordal_distance(&l.value) <= tol
            });
            match hit {
                Some((j, _)) => used[j] = true,
                None => return false,
            }
        }
        true
    }

    /// Same minimal indices and the same multiset of signatures.
    pub fn same_shape(&self, other: &Self) -> bool {
        let sigs = |k: &Self| {
            let mut s: Vec<Vec<usize>> = k.loci.iter().map(|l| l.signature.clone()).collect();
            s.sort();
            s
        };
        self.col_indices == other.col_indices && self.row_indices == other.row_indices && sigs(self) == sigs(other)
    }

    /// Position of every block in the canonical pencil built by [`kcf_to_pencil`].
    pub fn layout(&self) -> Vec<BlockSpan> {
        let mut spans = Vec::new();
        let (mut r, mut c) = (0, 0);
        for &e in &self.col_indices {
            spans.push(BlockSpan { kind: BlockKind::L(e), row: r, col: c, rows: e, cols: e + 1 });
            r += e;
            c += e + 1;
        }
        for &v in &self.row_indices {
            spans.push(BlockSpan { kind: BlockKind::Lt(v), row: r, col: c, rows: v + 1, cols: v });
            r += v + 1;
            c += v;
        }
        for (li, l) in self.loci.iter().enumerate() {
            for &e in &l.signature {
                spans.push(BlockSpan { kind: BlockKind::Jordan { locus: li, size: e }, row: r, col: c, rows: e, cols: e });
                r += e;
                c += e;
            }
        }
        spans
    }
}

/// Kind of a block in the canonical pencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    L(usize),
    Lt(usize),
    Jordan { locus: usize, size: usize },
}

/// Placement of a block inside the canonical pencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpan {
    pub kind: BlockKind,
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

/// The pencil `mu * mu_coeff + lambda * lambda_coeff`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPencil {
    pub mu_coeff: CMat,
    pub lambda_coeff: CMat,
}

impl MatrixPencil {
    pub fn new(mu_coeff: CMat, lambda_coeff: CMat) -> Result<Self> {
        if mu_coeff.shape() != lambda_coeff.shape() {
            return Err(Error::InvalidDims("pencil coefficients differ in shape".into()));
        }
        Ok(Self { mu_coeff, lambda_coeff })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mu_coeff.shape()
    }

    /// `B P C^T`.
    pub fn transform(&self, b: &CMat, c: &CMat) -> Self {
        let ct = c.transpose();
        Self { mu_coeff: b * &self.mu_coeff * &ct, lambda_coeff: b * &self.lambda_coeff * &ct }
    }

    pub fn transpose(&self) -> Self {
        Self { mu_coeff: self.mu_coeff.transpose(), lambda_coeff: self.lambda_coeff.transpose() }
    }

    /// Combined Frobenius norm of both coefficients.
    pub fn norm(&self) -> f64 {
        (crate::linalg::frobenius(&self.mu_coeff).powi(2) + crate::linalg::frobenius(&self.lambda_coeff).powi(2)).sqrt()
    }

    /// The state whose two slices are the pencil coefficients.
    pub fn to_state(&self) -> Result<StateTensor> {
        StateTensor::from_slices(&self.mu_coeff, &self.lambda_coeff)
    }
}

/// Pencil of a state: `R = psi[0,.,.]`, `S = psi[1,.,.]`.
pub fn pencil_from_state(state: &StateTensor) -> MatrixPencil {
    MatrixPencil { mu_coeff: state.slice(0), lambda_coeff: state.slice(1) }
}

/// Canonical block-diagonal pencil: L blocks, then L^T blocks, then Jordan blocks
/// in the order of the loci.
pub fn kcf_to_pencil(ks: &KroneckerStructure) -> MatrixPencil {
    let (m, n) = (ks.rows(), ks.cols());
    let mut mu = CMat::zeros(m, n);
    let mut lambda = CMat::zeros(m, n);
    for span in ks.layout() {
        let (r, c) = (span.row, span.col);
        match span.kind {
            BlockKind::L(e) => {
                for i in 0..e {
                    lambda[(r + i, c + i)] = ONE;
                    mu[(r + i, c + i + 1)] = ONE;
                }
            }
            BlockKind::Lt(v) => {
                for i in 0..v {
                    lambda[(r + i, c + i)] = ONE;
                    mu[(r + i + 1, c + i)] = ONE;
                }
            }
            BlockKind::Jordan { locus, size } => match ks.loci[locus].value {
                EigenvalueLocus::Finite(x) => {
                    for i in 0..size {
                        mu[(r + i, c + i)] = x;
                        lambda[(r + i, c + i)] = ONE;
                        if i + 1 < size {
                            mu[(r + i, c + i + 1)] = ONE;
                        }
                    }
                }
                EigenvalueLocus::Infinity => {
                    for i in 0..size {
                        mu[(r + i, c + i)] = ONE;
                        if i + 1 < size {
                            lambda[(r + i, c + i + 1)] = ONE;
                        }
                    }
                }
            },
        }
    }
    MatrixPencil { mu_coeff: mu, lambda_coeff: lambda }
}

/// Unnormalized state whose pencil is the canonical pencil of `ks`.
pub fn representative_state(ks: &KroneckerStructure) -> Result<StateTensor> {
    kcf_to_pencil(ks).to_state()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn locus(x: EigenvalueLocus, sig: &[usize]) -> Locus {
        Locus::new(x, sig.to_vec())
    }

    #[test]
    fn l_block_shapes() {
        let ks = KroneckerStructure::new(vec![2], vec![1], vec![]).unwrap();
        assert_eq!((ks.rows(), ks.cols()), (4, 4));
        let p = kcf_to_pencil(&ks);
        assert_eq!(p.lambda_coeff[(0, 0)], ONE);
        assert_eq!(p.mu_coeff[(0, 1)], ONE);
        assert_eq!(p.lambda_coeff[(2, 3)], ONE);
        assert_eq!(p.mu_coeff[(3, 3)], ONE);
    }

    #[test]
    fn zero_and_infinity_diagonal() {
        let ks = KroneckerStructure::regular(vec![
            locus(EigenvalueLocus::real(0.0), &[1]),
            locus(EigenvalueLocus::Infinity, &[1]),
        ])
        .unwrap();
        let p = kcf_to_pencil(&ks);
        assert_eq!(p.mu_coeff, CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0.into(), ONE])));
        assert_eq!(p.lambda_coeff, CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, 0.0.into()])));
    }

    #[test]
    fn repeated_locus_rejected() {
        let r = KroneckerStructure::regular(vec![
            locus(EigenvalueLocus::real(1.0), &[1]),
            locus(EigenvalueLocus::real(1.0), &[2]),
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn chordal_distance_to_infinity() {
        let d = EigenvalueLocus::real(1.0).chordal_distance(&EigenvalueLocus::Infinity);
        assert!((d - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(EigenvalueLocus::real(0.0).chordal_distance(&EigenvalueLocus::Infinity), 1.0);
    }

    #[test]
    fn full_entanglement_excludes_proportional_slices() {
        let ks = KroneckerStructure::regular(vec![locus(EigenvalueLocus::real(0.0), &[1, 1])]).unwrap();
        assert!(!ks.is_fully_entangled());
        let ks = KroneckerStructure::regular(vec![locus(EigenvalueLocus::real(0.0), &[2])]).unwrap();
        assert!(ks.is_fully_entangled());
    }
}
