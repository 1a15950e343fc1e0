//! Kronecker canonical form from rank information.
//!
//! Minimal indices come from the nullities of the block matrices
//!
//! ```text
//!   [R          ]
//!   [S  R       ]
//!   [   S  ...  ]      (k+2 block rows, k+1 block columns)
//!   [      S  R ]
//!   [         S ]
//! ```
//!
//! whose kernels are the polynomial null vectors of degree at most `k`.
//! Eigenvalues are found on a random projection of the pencil to its normal
//! rank, filtered by a rank test on the original pencil, clustered, and their
//! Segre characteristics read off from the nullities of block Toeplitz
//! matrices built from `R - c S` and `S`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EigenvalueLocus, KroneckerStructure, Locus, MatrixPencil, Moebius};
use crate::error::{Error, Result};
use crate::exact::{ExactMatrix, GaussRational};
use crate::linalg::{random_gaussian, random_unitary, rank_decision, set_block, singular_values, CMat};

/// Tunables of [`compute_kcf_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KcfOptions {
    /// Singular values below `rank_tol` times the largest one count as zero.
    pub rank_tol: f64,
    /// Initial chordal radius for grouping computed eigenvalues.
    pub cluster_tol: f64,
    /// Seed for the random projections.
    pub seed: u64,
}

impl Default for KcfOptions {
    fn default() -> Self {
        Self { rank_tol: 1e-9, cluster_tol: 1e-6, seed: 0 }
    }
}

/// Numerical Kronecker structure with default clustering and seed 0.
pub fn compute_kcf(p: &MatrixPencil, tol: f64) -> Result<KroneckerStructure> {
    compute_kcf_with(p, &KcfOptions { rank_tol: tol, ..KcfOptions::default() })
}

pub fn compute_kcf_with(p: &MatrixPencil, opts: &KcfOptions) -> Result<KroneckerStructure> {
    let fp = FloatPencil::normalized(p)?;
    let nr = fp.normal_rank(opts)?;
    let col = minimal_indices(|k| fp.stack_nullity(k, false, opts.rank_tol), fp.n, fp.m, fp.n - nr)?;
    let row = minimal_indices(|k| fp.stack_nullity(k, true, opts.rank_tol), fp.m, fp.n, fp.m - nr)?;
    check_counts(&col, &row, nr, fp.m, fp.n)?;
    let regular = regular_size(&col, &row, fp.m)?;
    let loci = fp.eigen_loci(nr, regular, col.len(), opts)?;
    KroneckerStructure::new(col, row, loci.into_iter().map(|(v, s)| Locus::new(v, s)).collect())
}

fn regular_size(col: &[usize], row: &[usize], m: usize) -> Result<usize> {
    let used: usize = col.iter().sum::<usize>() + row.iter().map(|v| v + 1).sum::<usize>();
    m.checked_sub(used)
        .ok_or_else(|| Error::IllConditioned("minimal indices exceed the pencil size".into()))
}

fn check_counts(col: &[usize], row: &[usize], nr: usize, m: usize, n: usize) -> Result<()> {
    if col.len() + nr != n || row.len() + nr != m {
        return Err(Error::IllConditioned(format!(
            "rank sequences disagree: {} column and {} row indices for normal rank {nr} of a {m}x{n} pencil",
            col.len(),
            row.len()
        )));
    }
    if col.contains(&0) || row.contains(&0) {
        return Err(Error::NotFullyEntangled("pencil has a zero row or column block".into()));
    }
    Ok(())
}

/// Recovers minimal indices from `d_k = nullity(stack_k)`, `k = 0..`.
///
/// A block with index `e` contributes `k - e + 1` to `d_k` for `k >= e`, so the
/// number of blocks of index exactly `e` is the second difference of `d`.
fn minimal_indices(
    mut nullity: impl FnMut(usize) -> Result<usize>,
    cols: usize,
    rows: usize,
    expected: usize,
) -> Result<Vec<usize>> {
    let kmax = rows.min(cols.saturating_sub(1));
    let mut d: Vec<i64> = Vec::with_capacity(kmax + 1);
    let mut out = Vec::new();
    for k in 0..=kmax {
        d.push(nullity(k)? as i64);
        let prev1 = if k >= 1 { d[k - 1] } else { 0 };
        let prev2 = if k >= 2 { d[k - 2] } else { 0 };
        let count = d[k] - 2 * prev1 + prev2;
        if count < 0 {
            return Err(Error::IllConditioned("non-monotone nullity sequence".into()));
        }
        out.extend(std::iter::repeat_n(k, count as usize));
        if out.len() >= expected {
            break;
        }
    }
    Ok(out)
}

/// Converts Toeplitz nullities `t_k - k * (#L blocks)` into a Segre characteristic.
fn segre_from_nullities(nu: &[usize]) -> Option<Vec<usize>> {
    // nu[k-1] = sum_j min(e_j, k); blocks of size >= k number nu[k-1] - nu[k-2].
    let mut at_least = Vec::with_capacity(nu.len());
    let mut prev = 0usize;
    for &v in nu {
        at_least.push(v.checked_sub(prev)?);
        prev = v;
    }
    let mut sig = Vec::new();
    for k in 0..at_least.len() {
        let next = at_least.get(k + 1).copied().unwrap_or(0);
        let exactly = at_least[k].checked_sub(next)?;
        sig.extend(std::iter::repeat_n(k + 1, exactly));
    }
    sig.sort_unstable_by(|a, b| b.cmp(a));
    Some(sig)
}

struct FloatPencil {
    r: CMat,
    s: CMat,
    m: usize,
    n: usize,
}

impl FloatPencil {
    fn normalized(p: &MatrixPencil) -> Result<Self> {
        let nrm = p.norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::ZeroState);
        }
        let (m, n) = p.shape();
        let scale = Complex64::new(1.0 / nrm, 0.0);
        Ok(Self { r: &p.mu_coeff * scale, s: &p.lambda_coeff * scale, m, n })
    }

    fn stack_nullity(&self, k: usize, transposed: bool, tol: f64) -> Result<usize> {
        let (r, s) = if transposed { (self.r.transpose(), self.s.transpose()) } else { (self.r.clone(), self.s.clone()) };
        let (m, n) = r.shape();
        let mut big = CMat::zeros(m * (k + 2), n * (k + 1));
        for j in 0..=k {
            set_block(&mut big, j * m, j * n, &r);
            set_block(&mut big, (j + 1) * m, j * n, &s);
        }
        nullity_checked(&big, tol)
    }

    fn normal_rank(&self, opts: &KcfOptions) -> Result<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_0001);
        let mut best = 0;
        for _ in 0..3 {
            let x = random_gaussian(&mut rng, 1, 1)[(0, 0)];
            let p = &self.r - &self.s * x;
            let sv = singular_values(&p);
            let top = sv.first().copied().unwrap_or(0.0);
            let rank = sv.iter().filter(|&&v| v > opts.rank_tol * top.max(1e-300)).count();
            best = best.max(rank);
        }
        Ok(best)
    }

    fn eigen_loci(&self, nr: usize, regular: usize, n_l: usize, opts: &KcfOptions) -> Result<Vec<(EigenvalueLocus, Vec<usize>)>> {
        if regular == 0 {
            return Ok(Vec::new());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut last_err = Error::IllConditioned("eigenvalue extraction failed".into());
        for _ in 0..6 {
            match self.eigen_attempt(&mut rng, nr, regular, n_l, opts) {
                Ok(v) => return Ok(v),
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    }

    fn eigen_attempt(
        &self,
        rng: &mut ChaCha8Rng,
        nr: usize,
        regular: usize,
        n_l: usize,
        opts: &KcfOptions,
    ) -> Result<Vec<(EigenvalueLocus, Vec<usize>)>> {
        // Pick a unitary frame in which the projected lambda-coefficient is well conditioned.
        let mut best: Option<(f64, Moebius, CMat, CMat, CMat, CMat)> = None;
        for _ in 0..8 {
            let u = Moebius::from_matrix(&random_unitary(rng, 2))?;
            let framed = u.apply_pencil(&MatrixPencil { mu_coeff: self.r.clone(), lambda_coeff: self.s.clone() });
            let left = orthonormal_columns(&random_gaussian(rng, self.m, nr)).adjoint();
            let right = orthonormal_columns(&random_gaussian(rng, self.n, nr));
            let rp = &left * &framed.mu_coeff * &right;
            let sp = &left * &framed.lambda_coeff * &right;
            let sv = singular_values(&sp);
            let quality = sv.last().copied().unwrap_or(0.0) / sv[0].max(1e-300);
            if best.as_ref().is_none_or(|b| quality > b.0) {
                best = Some((quality, u, framed.mu_coeff, framed.lambda_coeff, rp, sp));
            }
        }
        let (_, frame, r, s, rp, sp) = best.expect("at least one frame");
        let reduced = sp
            .lu()
            .solve(&rp)
            .ok_or_else(|| Error::IllConditioned("projected pencil is singular".into()))?;
        let candidates = crate::linalg::eigenvalues(&reduced)
            .ok_or_else(|| Error::IllConditioned("eigenvalue iteration did not converge".into()))?;

        // Rank test on the full pencil separates true eigenvalues from projection artefacts.
        let (r_norm, s_norm) = (r.norm(), s.norm());
        let mut scored: Vec<(f64, Complex64)> = candidates
            .iter()
            .map(|&c| {
                let sv = singular_values(&(&r - &s * c));
                (sv[nr - 1] / (r_norm + c.norm() * s_norm).max(1e-300), c)
            })
            .collect();
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        // True eigenvalues leave a residual near machine precision even inside a
        // Jordan cluster; artefacts must sit clearly above both the tolerance and
        // the worst accepted residual.
        let worst_true = scored[regular - 1].0;
        let separated = regular == scored.len()
            || scored[regular].0 > (100.0 * worst_true).max(10.0 * opts.rank_tol);
        if worst_true > opts.rank_tol.sqrt() || !separated {
            return Err(Error::IllConditioned("cannot separate eigenvalues from projection artefacts".into()));
        }
        let mut remaining: Vec<Complex64> = scored[..regular].iter().map(|x| x.1).collect();

        let mut loci = Vec::new();
        let mut radius = opts.cluster_tol;
        while !remaining.is_empty() {
            if radius > 0.1 {
                return Err(Error::IllConditioned("eigenvalue clusters could not be resolved".into()));
            }
            let mut keep = Vec::new();
            for cluster in single_linkage(&remaining, radius) {
                let members: Vec<Complex64> = cluster.iter().map(|&i| remaining[i]).collect();
                let center = members.iter().sum::<Complex64>() / members.len() as f64;
                match segre_at(&r, &s, center, members.len(), n_l, opts.rank_tol) {
                    Some(sig) => {
                        let [p, q] = frame.inverse().apply_homogeneous(center);
                        let value = snap_infinity(EigenvalueLocus::from_homogeneous(p, q));
                        loci.push((value, sig));
                    }
                    None => keep.extend(members),
                }
            }
            remaining = keep;
            radius *= 10.0;
        }
        for i in 0..loci.len() {
            for j in (i + 1)..loci.len() {
                if loci[i].0.chordal_distance(&loci[j].0) <= opts.cluster_tol {
                    return Err(Error::IllConditioned("two eigenvalue clusters coincide".into()));
                }
            }
        }
        Ok(loci)
    }
}

impl Moebius {
    fn apply_homogeneous(&self, x: Complex64) -> [Complex64; 2] {
        [self.a * x + self.b, self.c * x + self.d]
    }
}

/// Values next to the south pole become infinity; tiny parts become zeros.
fn snap_infinity(v: EigenvalueLocus) -> EigenvalueLocus {
    if v.chordal_distance(&EigenvalueLocus::Infinity) < 1e-11 {
        EigenvalueLocus::Infinity
    } else {
        v.cleaned()
    }
}

fn orthonormal_columns(g: &CMat) -> CMat {
    g.clone().qr().q()
}

fn nullity_checked(mat: &CMat, tol: f64) -> Result<usize> {
    // Blocks of the normalized pencil have norm at most one, so the threshold
    // is taken against that scale rather than the matrix's own top singular
    // value: a matrix that is entirely rounding noise must count as zero.
    let sv = singular_values(mat);
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(mat.ncols());
    }
    let d = rank_decision(mat, tol, top.max(1.0));
    if d.ambiguous {
        return Err(Error::IllConditioned(format!(
            "rank decision within a factor of 10 of tolerance {tol:e} on a {}x{} matrix",
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(mat.ncols() - d.rank)
}

/// Block Toeplitz matrix with `R - c S` on the diagonal and `-S` below it.
fn toeplitz(r: &CMat, s: &CMat, c: Complex64, k: usize) -> CMat {
    let (m, n) = r.shape();
    let diag = r - s * c;
    let sub = -s;
    let mut big = CMat::zeros(k * m, k * n);
    for j in 0..k {
        set_block(&mut big, j * m, j * n, &diag);
        if j + 1 < k {
            set_block(&mut big, (j + 1) * m, j * n, &sub);
        }
    }
    big
}

/// Segre characteristic at `c` if its algebraic multiplicity equals `size`.
fn segre_at(r: &CMat, s: &CMat, c: Complex64, size: usize, n_l: usize, tol: f64) -> Option<Vec<usize>> {
    let mut nu = Vec::with_capacity(size + 1);
    for k in 1..=size + 1 {
        let t = nullity_checked(&toeplitz(r, s, c, k), tol).ok()?;
        nu.push(t.checked_sub(k * n_l)?);
    }
    if nu[size] != size || nu[size - 1] != size {
        return None;
    }
    let sig = segre_from_nullities(&nu[..size])?;
    (sig.iter().sum::<usize>() == size).then_some(sig)
}

/// Groups points whose chordal distance chains stay below `radius`.
fn single_linkage(points: &[Complex64], radius: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = EigenvalueLocus::Finite(points[i]).chordal_distance(&EigenvalueLocus::Finite(points[j]));
            if d <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Pencil with Gaussian-rational entries for tolerance-free rank decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPencil {
    pub mu_coeff: ExactMatrix,
    pub lambda_coeff: ExactMatrix,
}

impl ExactPencil {
    pub fn new(mu_coeff: ExactMatrix, lambda_coeff: ExactMatrix) -> Result<Self> {
        if (mu_coeff.rows, mu_coeff.cols) != (lambda_coeff.rows, lambda_coeff.cols) {
            return Err(Error::InvalidDims("pencil coefficients differ in shape".into()));
        }
        Ok(Self { mu_coeff, lambda_coeff })
    }

    /// Reads every entry as a rational with denominator at most `max_den`.
    ///
    /// Fails when some entry is farther than `1e-12` from such a rational.
    pub fn from_pencil(p: &MatrixPencil, max_den: i64) -> Result<Self> {
        let conv = |m: &CMat| -> Result<ExactMatrix> {
            let mut out = ExactMatrix::zeros(m.nrows(), m.ncols());
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    let z = m[(r, c)];
                    let q = GaussRational::approximate(z, max_den)
                        .filter(|q| (q.to_complex() - z).norm() <= 1e-12 * (1.0 + z.norm()))
                        .ok_or_else(|| Error::PreconditionViolated(format!("entry {z} is not a small rational")))?;
                    out.set(r, c, q);
                }
            }
            Ok(out)
        };
        Self::new(conv(&p.mu_coeff)?, conv(&p.lambda_coeff)?)
    }

    pub fn to_float(&self) -> MatrixPencil {
        let conv = |m: &ExactMatrix| CMat::from_fn(m.rows, m.cols, |r, c| m.get(r, c).to_complex());
        MatrixPencil { mu_coeff: conv(&self.mu_coeff), lambda_coeff: conv(&self.lambda_coeff) }
    }

    fn shape(&self) -> (usize, usize) {
        (self.mu_coeff.rows, self.mu_coeff.cols)
    }

    fn stack_rank_nullity(&self, k: usize, transposed: bool) -> usize {
        let (r, s) = if transposed {
            (self.mu_coeff.transpose(), self.lambda_coeff.transpose())
        } else {
            (self.mu_coeff.clone(), self.lambda_coeff.clone())
        };
        let (m, n) = (r.rows, r.cols);
        let one = GaussRational::one();
        let mut big = ExactMatrix::zeros(m * (k + 2), n * (k + 1));
        for j in 0..=k {
            big.set_block(j * m, j * n, &r, &one);
            big.set_block((j + 1) * m, j * n, &s, &one);
        }
        big.cols - big.rank()
    }

    fn evaluated(&self, point: &ExactPoint) -> (ExactMatrix, ExactMatrix) {
        let one = GaussRational::one();
        match point {
            ExactPoint::Finite(c) => (self.mu_coeff.combine(&one, &self.lambda_coeff, &(-c)), self.lambda_coeff.clone()),
            ExactPoint::Infinity => (self.lambda_coeff.clone(), self.mu_coeff.clone()),
        }
    }

    fn toeplitz_nullity(&self, point: &ExactPoint, k: usize) -> usize {
        let (diag, sub) = self.evaluated(point);
        let (m, n) = self.shape();
        let one = GaussRational::one();
        let mut big = ExactMatrix::zeros(k * m, k * n);
        for j in 0..k {
            big.set_block(j * m, j * n, &diag, &one);
            if j + 1 < k {
                big.set_block((j + 1) * m, j * n, &sub, &one);
            }
        }
        big.cols - big.rank()
    }
}

enum ExactPoint {
    Finite(GaussRational),
    Infinity,
}

/// Kronecker structure with exact rank decisions.
///
/// Minimal indices and Segre characteristics are decided in exact arithmetic.
/// Eigenvalues are located numerically, rounded to Gaussian rationals with
/// denominators up to `10^6`, and accepted only if the exact rank tests confirm
/// them; otherwise the call fails with `IllConditioned`.
pub fn compute_kcf_exact(p: &ExactPencil, opts: &KcfOptions) -> Result<KroneckerStructure> {
    let (m, n) = p.shape();
    if p.mu_coeff.is_zero() && p.lambda_coeff.is_zero() {
        return Err(Error::ZeroState);
    }
    let probes = [
        GaussRational::approximate(Complex64::new(1.0 / 3.0, 2.0 / 7.0), 100).expect("finite"),
        GaussRational::approximate(Complex64::new(-5.0 / 11.0, 0.0), 100).expect("finite"),
        GaussRational::approximate(Complex64::new(13.0 / 17.0, -1.0), 100).expect("finite"),
    ];
    let nr = probes
        .iter()
        .map(|x| p.mu_coeff.combine(&GaussRational::one(), &p.lambda_coeff, &(-x)).rank())
        .max()
        .unwrap_or(0);
    let col = minimal_indices(|k| Ok(p.stack_rank_nullity(k, false)), n, m, n - nr)?;
    let row = minimal_indices(|k| Ok(p.stack_rank_nullity(k, true)), m, n, m - nr)?;
    check_counts(&col, &row, nr, m, n)?;
    let regular = regular_size(&col, &row, m)?;
    let float_loci = if regular == 0 {
        Vec::new()
    } else {
        FloatPencil::normalized(&p.to_float())?.eigen_loci(nr, regular, col.len(), opts)?
    };
    let mut loci = Vec::new();
    for (value, sig) in float_loci {
        let size: usize = sig.iter().sum();
        let point = match value {
            EigenvalueLocus::Infinity => ExactPoint::Infinity,
            EigenvalueLocus::Finite(x) => ExactPoint::Finite(
                GaussRational::approximate(x, 1_000_000)
                    .ok_or_else(|| Error::IllConditioned(format!("eigenvalue {x} is not representable")))?,
            ),
        };
        let mut nu = Vec::with_capacity(size + 1);
        for k in 1..=size + 1 {
            let t = p.toeplitz_nullity(&point, k);
            nu.push(t.checked_sub(k * col.len()).ok_or_else(|| Error::IllConditioned("inconsistent exact nullity".into()))?);
        }
        let exact_sig = if nu[size] == size { segre_from_nullities(&nu[..size]) } else { None };
        let exact_sig = exact_sig.ok_or_else(|| {
            Error::IllConditioned(format!("eigenvalue {value} is not confirmed by exact rank tests"))
        })?;
        let value = match point {
            ExactPoint::Infinity => EigenvalueLocus::Infinity,
            ExactPoint::Finite(q) => EigenvalueLocus::Finite(q.to_complex()),
        };
        loci.push(Locus::new(value, exact_sig));
    }
    KroneckerStructure::new(col, row, loci)
}
