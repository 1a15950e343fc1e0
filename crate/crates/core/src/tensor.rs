//! Pure states of a qubit and two qudits, and local operators acting on them.
//!
//! A state of shape `2 x m x n` is stored as a flat vector of amplitudes in
//! row-major order `(i, j, k) -> i*m*n + j*n + k`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, singular_values, CMat, ONE, ZERO};

/// One of the three subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
    C,
}

impl Party {
    pub const ALL: [Party; 3] = [Party::A, Party::B, Party::C];

    fn axis(self) -> usize {
        match self {
            Party::A => 0,
            Party::B => 1,
            Party::C => 2,
        }
    }
}

/// Amplitude tensor of a `2 x m x n` pure state (not necessarily normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct StateTensor {
    m: usize,
    n: usize,
    amps: Vec<Complex64>,
}

impl StateTensor {
    /// Builds a state from a flat amplitude vector.
    pub fn new(m: usize, n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if m < 2 || n < 2 {
            return Err(Error::InvalidDims(format!("local dimensions must be at least 2, got 2x{m}x{n}")));
        }
        if amps.len() != 2 * m * n {
            return Err(Error::InvalidDims(format!(
                "expected {} amplitudes for 2x{m}x{n}, got {}",
                2 * m * n,
                amps.len()
            )));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Malformed("non-finite amplitude".into()));
        }
        if amps.iter().all(|z| *z == ZERO) {
            return Err(Error::ZeroState);
        }
        Ok(Self { m, n, amps })
    }

    /// Builds a state from its two `m x n` slices (qubit index 0 and 1).
    pub fn from_slices(slice0: &CMat, slice1: &CMat) -> Result<Self> {
        let (m, n) = slice0.shape();
        if slice1.shape() != (m, n) {
            return Err(Error::InvalidDims("slices differ in shape".into()));
        }
        let mut amps = Vec::with_capacity(2 * m * n);
        for slice in [slice0, slice1] {
            for j in 0..m {
                for k in 0..n {
                    amps.push(slice[(j, k)]);
                }
            }
        }
        Self::new(m, n, amps)
    }

    /// Builds a state from a sparse list of `((i, j, k), amplitude)` entries.
    pub fn from_entries(m: usize, n: usize, entries: &[([usize; 3], Complex64)]) -> Result<Self> {
        let mut amps = vec![ZERO; 2 * m * n];
        for &(idx, v) in entries {
            if idx[0] >= 2 || idx[1] >= m || idx[2] >= n {
                return Err(Error::IndexOutOfRange { index: idx, dims: [2, m, n] });
            }
            amps[idx[0] * m * n + idx[1] * n + idx[2]] += v;
        }
        Self::new(m, n, amps)
    }

    pub fn dims(&self) -> [usize; 3] {
        [2, self.m, self.n]
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.amps[i * self.m * self.n + j * self.n + k]
    }

    /// The `m x n` slice for qubit value `i`.
    pub fn slice(&self, i: usize) -> CMat {
        CMat::from_fn(self.m, self.n, |j, k| self.get(i, j, k))
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let nrm = self.norm();
        Self { m: self.m, n: self.n, amps: self.amps.iter().map(|z| z / nrm).collect() }
    }

    pub fn scaled(&self, factor: Complex64) -> Result<Self> {
        Self::new(self.m, self.n, self.amps.iter().map(|z| z * factor).collect())
    }

    /// Unfolding with `party` as the row index.
    fn unfold(&self, party: Party) -> CMat {
        let d = self.dims();
        let rows = d[party.axis()];
        let cols = 2 * self.m * self.n / rows;
        let mut out = CMat::zeros(rows, cols);
        for i in 0..2 {
            for j in 0..self.m {
                for k in 0..self.n {
                    let (r, c) = match party {
                        Party::A => (i, j * self.n + k),
                        Party::B => (j, i * self.n + k),
                        Party::C => (k, i * self.m + j),
                    };
                    out[(r, c)] = self.get(i, j, k);
                }
            }
        }
        out
    }

    /// Reduced density matrix of one party (trace equals the squared norm).
    pub fn reduced_density(&self, party: Party) -> CMat {
        let u = self.unfold(party);
        &u * u.adjoint()
    }

    /// Applies `A (x) B (x) C` to the state.
    pub fn apply_local(&self, ops: &LocalOperatorTriple) -> Result<Self> {
        if ops.a.shape() != (2, 2) || ops.b.shape() != (self.m, self.m) || ops.c.shape() != (self.n, self.n) {
            return Err(Error::InvalidDims("operator shapes do not match the state".into()));
        }
        let s0 = self.slice(0);
        let s1 = self.slice(1);
        let ct = ops.c.transpose();
        let t0 = &ops.b * &s0 * &ct;
        let t1 = &ops.b * &s1 * &ct;
        let out0 = &t0 * ops.a[(0, 0)] + &t1 * ops.a[(0, 1)];
        let out1 = &t0 * ops.a[(1, 0)] + &t1 * ops.a[(1, 1)];
        Self::from_slices(&out0, &out1)
    }

    /// Every single-party reduced density matrix has full rank.
    ///
    /// Ranks are judged relative to the largest eigenvalue of each marginal.
    pub fn is_fully_entangled(&self, tol: f64) -> bool {
        Party::ALL.iter().all(|&p| {
            let sv = singular_values(&self.reduced_density(p));
            let top = sv[0];
            sv.iter().all(|&s| s > tol * top)
        })
    }

    /// Largest Frobenius distance between a normalized marginal and the maximally mixed state.
    pub fn criticality_defect(&self) -> f64 {
        let total = self.norm().powi(2);
        Party::ALL
            .iter()
            .map(|&p| {
                let rho = self.reduced_density(p) / Complex64::new(total, 0.0);
                let d = rho.nrows();
                frobenius(&(rho - CMat::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0)))
            })
            .fold(0.0, f64::max)
    }

    /// All normalized marginals are maximally mixed within `tol`.
    pub fn is_critical(&self, tol: f64) -> bool {
        self.criticality_defect() <= tol
    }

    /// Serializes to the sparse JSON state format.
    pub fn to_json(&self) -> StateJson {
        let mut amps = Vec::new();
        for i in 0..2 {
            for j in 0..self.m {
                for k in 0..self.n {
                    let z = self.get(i, j, k);
                    if z != ZERO {
                        amps.push(AmpJson { idx: [i, j, k], re: z.re, im: z.im });
                    }
                }
            }
        }
        StateJson { dims: vec![2, self.m, self.n], amps }
    }

    /// Dirac-notation rendering such as `|0>(|01>+|22>) + |1>(|00>)`.
    pub fn to_ket_string(&self) -> String {
        let mut parts = Vec::new();
        for i in 0..2 {
            let mut terms = Vec::new();
            for j in 0..self.m {
                for k in 0..self.n {
                    let z = self.get(i, j, k);
                    if z.norm() > 0.0 {
                        terms.push(format!("{}|{}{}>", coefficient_prefix(z), j, k));
                    }
                }
            }
            if !terms.is_empty() {
                parts.push(format!("|{}>({})", i, terms.join("+").replace("+-", "-")));
            }
        }
        parts.join(" + ")
    }
}

fn coefficient_prefix(z: Complex64) -> String {
    if (z - ONE).norm() < 1e-14 {
        String::new()
    } else if (z + ONE).norm() < 1e-14 {
        "-".into()
    } else if z.im.abs() < 1e-14 {
        format!("{}", trim_float(z.re))
    } else {
        format!("({}{:+}i)", trim_float(z.re), trim_float(z.im))
    }
}

fn trim_float(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Sparse JSON form of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub dims: Vec<usize>,
    pub amps: Vec<AmpJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpJson {
    pub idx: [usize; 3],
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// A triple of local operators `(A, B, C)` of shapes 2x2, m x m, n x n.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperatorTriple {
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
}

impl LocalOperatorTriple {
    pub fn new(a: CMat, b: CMat, c: CMat) -> Result<Self> {
        if a.shape() != (2, 2) || !b.is_square() || !c.is_square() {
            return Err(Error::InvalidDims("local operators must be square with a 2x2 qubit factor".into()));
        }
        Ok(Self { a, b, c })
    }

    pub fn identity(m: usize, n: usize) -> Self {
        Self { a: DMatrix::identity(2, 2), b: DMatrix::identity(m, m), c: DMatrix::identity(n, n) }
    }

    pub fn determinants(&self) -> [Complex64; 3] {
        [self.a.determinant(), self.b.determinant(), self.c.determinant()]
    }

    /// All three determinants equal one within `1e-10`.
    pub fn is_special_linear(&self) -> bool {
        self.determinants().iter().all(|d| (d - ONE).norm() <= 1e-10)
    }

    /// `self * other`, i.e. apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self { a: &self.a * &other.a, b: &self.b * &other.b, c: &self.c * &other.c }
    }

    /// Largest condition number among the three factors.
    pub fn max_condition(&self) -> f64 {
        [&self.a, &self.b, &self.c]
            .iter()
            .map(|m| crate::linalg::condition_number(m))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ghz() -> StateTensor {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        StateTensor::from_entries(2, 2, &[([0, 0, 0], h), ([1, 1, 1], h)]).unwrap()
    }

    #[test]
    fn ghz_is_critical_and_entangled() {
        let g = ghz();
        assert!(g.is_critical(1e-12));
        assert!(g.is_fully_entangled(1e-9));
    }

    #[test]
    fn product_state_is_not_entangled() {
        let p = StateTensor::from_entries(2, 2, &[([0, 0, 0], ONE)]).unwrap();
        assert!(!p.is_fully_entangled(1e-9));
    }

    #[test]
    fn zero_state_rejected() {
        assert_eq!(StateTensor::new(2, 2, vec![ZERO; 8]), Err(Error::ZeroState));
    }

    #[test]
    fn marginal_traces_equal_squared_norm() {
        let s = StateTensor::from_entries(3, 2, &[([0, 2, 1], ONE * 2.0), ([1, 0, 0], Complex64::new(0.0, 1.0))]).unwrap();
        for p in Party::ALL {
            let tr: Complex64 = s.reduced_density(p).trace();
            assert!((tr.re - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_local_matches_index_contraction() {
        let s = StateTensor::from_entries(2, 3, &[([0, 1, 2], ONE), ([1, 0, 1], ONE * 3.0)]).unwrap();
        let a = CMat::from_row_slice(2, 2, &[ONE, ONE * 2.0, ZERO, ONE]);
        let b = CMat::from_fn(2, 2, |r, c| Complex64::new((r + 2 * c) as f64, 1.0));
        let c = CMat::from_fn(3, 3, |r, cc| Complex64::new(1.0, (r * 3 + cc) as f64));
        let ops = LocalOperatorTriple::new(a.clone(), b.clone(), c.clone()).unwrap();
        let out = s.apply_local(&ops).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..3 {
                    let mut acc = ZERO;
                    for i2 in 0..2 {
                        for j2 in 0..2 {
                            for k2 in 0..3 {
                                acc += a[(i, i2)] * b[(j, j2)] * c[(k, k2)] * s.get(i2, j2, k2);
                            }
                        }
                    }
                    assert!((acc - out.get(i, j, k)).norm() < 1e-12);
                }
            }
        }
    }
}
