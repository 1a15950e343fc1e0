//! Invariant-theoretic type of a SLOCC class.
//!
//! The decision procedure works on the Kronecker structure alone:
//!
//! * rectangular pencils (`m < n`) are stable exactly for the structure made of
//!   `n - m` equal blocks `L_{m/(n-m)}`, and in the null cone otherwise;
//! * square pencils with any singular block are in the null cone;
//! * square regular pencils are decided by the multiplicities of their
//!   eigenvalues, with Jordan chains pushing a polystable reduct down to
//!   strictly semistable.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank_decision, singular_values, CMat, ONE};
use crate::pencil::{compute_kcf, pencil_from_state, EigenvalueLocus, KroneckerStructure, Locus};
use crate::tensor::{LocalOperatorTriple, StateTensor};

/// Position of an orbit in the semistability hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OrbitType {
    NullCone,
    StrictlySemistable,
    StrictlyPolystable,
    Stable,
}

impl OrbitType {
    pub fn is_polystable(self) -> bool {
        matches!(self, OrbitType::StrictlyPolystable | OrbitType::Stable)
    }

    pub fn is_semistable(self) -> bool {
        self != OrbitType::NullCone
    }

    pub fn label(self) -> &'static str {
        match self {
            OrbitType::NullCone => "null cone",
            OrbitType::StrictlySemistable => "strictly semistable",
            OrbitType::StrictlyPolystable => "strictly polystable",
            OrbitType::Stable => "stable",
        }
    }
}

impl fmt::Display for OrbitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Everything the classifier reports about one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub orbit_type: OrbitType,
    pub kcf: KroneckerStructure,
    /// Complex dimension of the stabilizer; only for semistable diagonal classes.
    pub stabilizer_dim: Option<usize>,
    /// Complex dimension of the orbit; only for semistable diagonal classes.
    pub orbit_dim: Option<usize>,
    /// Null cone because the diagonal reduct has a single eigenvalue.
    pub biseparable_reduct: bool,
}

fn not_entangled() -> Error {
    Error::NotFullyEntangled("the two pencil coefficients are proportional".into())
}

/// Type of a class given by its Kronecker structure.
pub fn classify(ks: &KroneckerStructure) -> Result<OrbitType> {
    if !ks.is_fully_entangled() {
        return Err(not_entangled());
    }
    let (m, n) = (ks.rows(), ks.cols());
    if m > n {
        return classify(&ks.transposed());
    }
    if m < n {
        let copies = n - m;
        let stable = ks.row_indices().is_empty()
            && ks.loci().is_empty()
            && m % copies == 0
            && ks.col_indices().len() == copies
            && ks.col_indices().iter().all(|&e| e == m / copies);
        return Ok(if stable { OrbitType::Stable } else { OrbitType::NullCone });
    }
    if ks.has_singular_blocks() {
        return Ok(OrbitType::NullCone);
    }
    let reduct = diagonal_type(&ks.multiplicities());
    if ks.is_diagonal() {
        return Ok(reduct);
    }
    Ok(match reduct {
        OrbitType::NullCone => OrbitType::NullCone,
        _ => OrbitType::StrictlySemistable,
    })
}

/// Type of the diagonal pencil with the given eigenvalue multiplicities.
pub fn diagonal_type(mults: &[usize]) -> OrbitType {
    let mut ms = mults.to_vec();
    ms.sort_unstable_by(|a, b| b.cmp(a));
    let size: usize = ms.iter().sum();
    let distinct = ms.len();
    let top = ms[0];
    let rest = size - top;
    if distinct == 1 || top > rest {
        OrbitType::NullCone
    } else if distinct == 2 {
        if size == 2 {
            OrbitType::Stable
        } else {
            OrbitType::StrictlyPolystable
        }
    } else if top == rest {
        OrbitType::StrictlySemistable
    } else if distinct == size {
        OrbitType::Stable
    } else {
        OrbitType::StrictlyPolystable
    }
}

/// Full report for a structure.
pub fn classify_report(ks: &KroneckerStructure) -> Result<ClassReport> {
    let orbit_type = classify(ks)?;
    let square = ks.rows() == ks.cols();
    let (stabilizer_dim, orbit_dim) = if square && ks.is_diagonal() && orbit_type.is_semistable() {
        let mults = ks.multiplicities();
        (Some(stabilizer_dim_diagonal(&mults)), Some(orbit_dim_diagonal(&mults)))
    } else {
        (None, None)
    };
    let biseparable_reduct = square && !ks.has_singular_blocks() && ks.loci().len() == 1;
    Ok(ClassReport { orbit_type, kcf: ks.clone(), stabilizer_dim, orbit_dim, biseparable_reduct })
}

/// Dimension of `SL(2) x SL(m) x SL(n)`.
pub fn group_dim(m: usize, n: usize) -> usize {
    3 + (m * m - 1) + (n * n - 1)
}

/// Stabilizer dimension of a semistable diagonal pencil with these multiplicities.
///
/// The qubit factor keeps `max(3 - l, 0)` dimensions (Moebius maps fixing the
/// `l` eigenvalues) and the qudit factors contribute the centralizer
/// `sum m_i^2 - 1`.
pub fn stabilizer_dim_diagonal(mults: &[usize]) -> usize {
    3usize.saturating_sub(mults.len()) + mults.iter().map(|m| m * m).sum::<usize>() - 1
}

pub fn orbit_dim_diagonal(mults: &[usize]) -> usize {
    let n: usize = mults.iter().sum();
    group_dim(n, n) - stabilizer_dim_diagonal(mults)
}

/// Complex dimension of the orbit through `state`, from the rank of the Lie algebra action.
pub fn orbit_dimension(state: &StateTensor, tol: f64) -> usize {
    let [_, m, n] = state.dims();
    let gens = |d: usize| -> Vec<CMat> {
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    let mut e = CMat::zeros(d, d);
                    e[(i, j)] = ONE;
                    out.push(e);
                }
            }
        }
        for i in 0..d - 1 {
            let mut h = CMat::zeros(d, d);
            h[(i, i)] = ONE;
            h[(i + 1, i + 1)] = -ONE;
            out.push(h);
        }
        out
    };
    let mut cols: Vec<Vec<Complex64>> = Vec::new();
    let zero = |d: usize| CMat::zeros(d, d);
    for g in gens(2) {
        cols.push(tangent(state, LocalOperatorTriple { a: g, b: zero(m), c: zero(n) }));
    }
    for g in gens(m) {
        cols.push(tangent(state, LocalOperatorTriple { a: zero(2), b: g, c: zero(n) }));
    }
    for g in gens(n) {
        cols.push(tangent(state, LocalOperatorTriple { a: zero(2), b: zero(m), c: g }));
    }
    let mat = CMat::from_fn(2 * m * n, cols.len(), |r, c| cols[c][r]);
    let top = singular_values(&mat).first().copied().unwrap_or(0.0);
    rank_decision(&mat, tol, top).rank
}

/// `(X (x) 1 (x) 1 + 1 (x) Y (x) 1 + 1 (x) 1 (x) Z) psi` for a Lie algebra triple.
fn tangent(state: &StateTensor, x: LocalOperatorTriple) -> Vec<Complex64> {
    let [_, m, n] = state.dims();
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * m * n];
    for i in 0..2 {
        for j in 0..m {
            for k in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..2 {
                    acc += x.a[(i, t)] * state.get(t, j, k);
                }
                for t in 0..m {
                    acc += x.b[(j, t)] * state.get(i, t, k);
                }
                for t in 0..n {
                    acc += x.c[(k, t)] * state.get(i, j, t);
                }
                out[i * m * n + j * n + k] = acc;
            }
        }
    }
    out
}

/// Value of the inclusion-exclusion criterion for critical states of shape `dims`.
///
/// A critical state exists iff the value is non-negative.
pub fn critical_exists_value(dims: &[usize]) -> Result<i128> {
    if dims.is_empty() || dims.len() > 20 || dims.contains(&0) {
        return Err(Error::InvalidDims("need between 1 and 20 positive dimensions".into()));
    }
    let product: i128 = dims.iter().map(|&d| d as i128).product();
    let mut correction: i128 = 0;
    for mask in 1u32..(1 << dims.len()) {
        let mut g: i128 = 0;
        for (i, &d) in dims.iter().enumerate() {
            if mask & (1 << i) != 0 {
                g = num_integer::gcd(g, (d * d) as i128);
            }
        }
        let size = mask.count_ones();
        if size % 2 == 1 {
            correction += g;
        } else {
            correction -= g;
        }
    }
    Ok(product - correction)
}

pub fn critical_exists(dims: &[usize]) -> Result<bool> {
    Ok(critical_exists_value(dims)? >= 0)
}

/// Whether some `2 x m x n` class is strictly semistable.
///
/// Rectangular shapes only have L-type structures, which are stable or null.
/// Square shapes need either an equal split `m1 = rest` over at least three
/// eigenvalues (`n >= 4` even) or a Jordan chain over a semistable reduct
/// (`n >= 5`); together this is `n >= 4`.
pub fn strictly_semistable_exists(m: usize, n: usize) -> bool {
    m == n && n >= 4
}

/// Result of checking that strictly semistable classes exist exactly when
/// polystable orbits come in several dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub m: usize,
    pub n: usize,
    pub polystable_orbit_dims: Vec<usize>,
    pub polystable_families: usize,
    pub strictly_semistable_families: usize,
    pub consistent: bool,
}

pub fn verify_main_theorem(m: usize, n: usize) -> Result<TheoremCheck> {
    let families = crate::enumerate::enumerate_classes(m, n)?;
    let mut dims = Vec::new();
    let mut polystable = 0;
    let mut semistable = 0;
    for fam in &families {
        match fam.orbit_type {
            t if t.is_polystable() => {
                polystable += 1;
                let ks = fam.instantiate_default()?;
                let dim = if ks.is_diagonal() && ks.rows() == ks.cols() {
                    orbit_dim_diagonal(&ks.multiplicities())
                } else {
                    orbit_dimension(&crate::pencil::representative_state(&ks)?, 1e-9)
                };
                dims.push(dim);
            }
            OrbitType::StrictlySemistable => semistable += 1,
            _ => {}
        }
    }
    dims.sort_unstable();
    dims.dedup();
    let consistent = (semistable > 0) == (dims.len() > 1);
    Ok(TheoremCheck {
        m,
        n,
        polystable_orbit_dims: dims,
        polystable_families: polystable,
        strictly_semistable_families: semistable,
        consistent,
    })
}

/// Structure of the unique polystable class in the closure of a strictly semistable class.
///
/// Jordan chains are split into 1x1 blocks.  If that diagonal reduct is still
/// strictly semistable (one eigenvalue carries exactly half the multiplicity),
/// the remaining eigenvalues collapse onto a single one, which is kept at the
/// value of the first non-dominant locus.
pub fn polystable_limit(ks: &KroneckerStructure) -> Result<KroneckerStructure> {
    if classify(ks)? != OrbitType::StrictlySemistable {
        return Err(Error::PreconditionViolated("polystable limit needs a strictly semistable class".into()));
    }
    let reduct = ks.diagonal_reduct();
    if diagonal_type(&reduct.multiplicities()) != OrbitType::StrictlySemistable {
        return Ok(reduct);
    }
    let loci = ks.canonical_loci();
    let top = loci[0].multiplicity();
    let dominant: EigenvalueLocus = loci[0].value;
    let other: EigenvalueLocus = loci[1].value;
    KroneckerStructure::regular(vec![Locus::new(dominant, vec![1; top]), Locus::new(other, vec![1; top])])
}

/// Classifies a state: entanglement check, pencil, Kronecker structure, type.
pub fn classify_state(state: &StateTensor, tol: f64) -> Result<ClassReport> {
    if !state.is_fully_entangled(tol) {
        return Err(Error::NotFullyEntangled("some single-party marginal is rank deficient".into()));
    }
    let ks = compute_kcf(&pencil_from_state(state), tol)?;
    classify_report(&ks)
}
