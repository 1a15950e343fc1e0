//! Explicit determinant-one operator families that realize orbit-closure limits.
//!
//! Every family has the shape `A(alpha) (x) B(alpha) (x) C(alpha)` where each
//! side is `diag(e^{k_1 alpha}, ..., e^{k_d alpha}) * M` for rational
//! exponents `k_i` summing to zero and an optional constant matrix `M` of
//! determinant one.  Families are written for the canonical representative
//! of a Kronecker structure (the state built by
//! [`representative_state`](crate::pencil::representative_state)).
//!
//! Exponents are rescaled so that the slowest decaying amplitude decays like
//! `e^{-alpha}`; this makes a fixed `alpha` comparable across families.

use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::classifier::{classify, diagonal_type, polystable_limit, OrbitType};
use crate::dsl::render_pencil_spec;
use crate::error::{Error, Result};
use crate::linalg::{CMat, ONE, ZERO};
use crate::pencil::{
    compute_kcf, pencil_from_state, BlockKind, BlockSpan, EigenvalueLocus, KroneckerStructure, Locus, Moebius,
};
use crate::tensor::{LocalOperatorTriple, StateTensor};

/// One side `diag(e^{k alpha}) * constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct SideOperator {
    pub exponents: Vec<Rational64>,
    pub constant: Option<CMat>,
}

impl SideOperator {
    pub fn identity(dim: usize) -> Self {
        Self { exponents: vec![Rational64::zero(); dim], constant: None }
    }

    fn exponential(exponents: Vec<Rational64>) -> Self {
        Self { exponents, constant: None }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponent_sum(&self) -> Rational64 {
        self.exponents.iter().copied().sum()
    }

    /// Materialized matrix at `alpha` (may overflow for large `alpha`).
    pub fn matrix_at(&self, alpha: f64) -> CMat {
        let diag = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.exponents.iter().map(|k| Complex64::new((to_f64(*k) * alpha).exp(), 0.0)),
        ));
        match &self.constant {
            Some(m) => diag * m,
            None => diag,
        }
    }

    fn constant_det(&self) -> Complex64 {
        self.constant.as_ref().map_or(ONE, |m| m.determinant())
    }

    fn scaled(&self, factor: Rational64) -> Self {
        Self { exponents: self.exponents.iter().map(|k| k * factor).collect(), constant: self.constant.clone() }
    }
}

fn to_f64(r: Rational64) -> f64 {
    r.to_f64().expect("small rational")
}

fn rat(num: i64, den: i64) -> Rational64 {
    Rational64::new(num, den)
}

fn int(v: usize) -> Rational64 {
    Rational64::from_integer(v as i64)
}

/// What the family converges to as `alpha` grows.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// The state is driven to zero.
    ZeroVector,
    /// The normalized limit lies in the polystable class with this structure.
    CriticalClass(KroneckerStructure),
    /// The limit is the diagonal reduct of the input (used when only the
    /// Jordan chains are being removed).
    Reduct(KroneckerStructure),
}

/// Which construction produced a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    LWithLt,
    TwoL,
    LWithJordan,
    Dominant,
    OffDiagonal,
    EqualSplit,
    Composite,
}

impl WitnessKind {
    pub fn label(self) -> &'static str {
        match self {
            WitnessKind::LWithLt => "l_lt",
            WitnessKind::TwoL => "l_l",
            WitnessKind::LWithJordan => "l_m",
            WitnessKind::Dominant => "dominant",
            WitnessKind::OffDiagonal => "offdiag",
            WitnessKind::EqualSplit => "equal_split",
            WitnessKind::Composite => "composite",
        }
    }
}

/// A determinant-one family `A(alpha) (x) B(alpha) (x) C(alpha)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFamily {
    pub kind: WitnessKind,
    pub a: SideOperator,
    pub b: SideOperator,
    pub c: SideOperator,
    pub target: Target,
}

impl OperatorFamily {
    pub fn dims(&self) -> [usize; 3] {
        [self.a.dim(), self.b.dim(), self.c.dim()]
    }

    /// The three operators at `alpha` as explicit matrices.
    pub fn operators_at(&self, alpha: f64) -> LocalOperatorTriple {
        LocalOperatorTriple { a: self.a.matrix_at(alpha), b: self.b.matrix_at(alpha), c: self.c.matrix_at(alpha) }
    }

    /// Exact check that every exponential factor has zero trace.
    pub fn exponents_balanced(&self) -> bool {
        [&self.a, &self.b, &self.c].iter().all(|s| s.exponent_sum().is_zero())
    }

    /// `|det A det B det C - 1|`, with the exponential parts exactly one.
    pub fn determinant_drift(&self) -> f64 {
        if !self.exponents_balanced() {
            return f64::INFINITY;
        }
        (self.a.constant_det() * self.b.constant_det() * self.c.constant_det() - ONE).norm()
    }

    /// JSON description: kind, dims, factor list (product order, left to right) and target.
    pub fn to_json(&self) -> Value {
        let mut factors = Vec::new();
        for (name, side) in [("A", &self.a), ("B", &self.b), ("C", &self.c)] {
            factors.push(json!({
                "side": name,
                "kind": "expdiag",
                "exponents": side.exponents.iter().map(|k| k.to_string()).collect::<Vec<_>>(),
            }));
            if let Some(m) = &side.constant {
                let part = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
                    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
                };
                factors.push(json!({ "side": name, "kind": "const", "re": part(|z| z.re), "im": part(|z| z.im) }));
            }
        }
        let target = match &self.target {
            Target::ZeroVector => json!({ "type": "zero_vector" }),
            Target::CriticalClass(ks) => json!({ "type": "critical_class", "pencil": render_pencil_spec(ks) }),
            Target::Reduct(ks) => json!({ "type": "reduct", "pencil": render_pencil_spec(ks) }),
        };
        json!({
            "kind": self.kind.label(),
            "dims": [2, self.b.dim(), self.c.dim()],
            "factors": factors,
            "target": target,
        })
    }
}

/// Amplitudes of the transformed state at `alpha`.
///
/// Constant factors are applied first; the exponential factors are then
/// combined into one exponent per amplitude before exponentiating, so no
/// intermediate factor overflows even when single entries exceed `e^300`.
pub fn evaluate_amplitudes(fam: &OperatorFamily, alpha: f64, state: &StateTensor) -> Result<Vec<Complex64>> {
    let [_, m, n] = state.dims();
    if fam.dims() != [2, m, n] {
        return Err(Error::InvalidDims(format!("family acts on {:?}, state has dims {:?}", fam.dims(), state.dims())));
    }
    let drift = fam.determinant_drift();
    if drift > 1e-6 {
        return Err(Error::DeterminantDrift(drift));
    }
    let base = if fam.a.constant.is_some() || fam.b.constant.is_some() || fam.c.constant.is_some() {
        let ops = LocalOperatorTriple {
            a: fam.a.constant.clone().unwrap_or_else(|| CMat::identity(2, 2)),
            b: fam.b.constant.clone().unwrap_or_else(|| CMat::identity(m, m)),
            c: fam.c.constant.clone().unwrap_or_else(|| CMat::identity(n, n)),
        };
        state.apply_local(&ops)?
    } else {
        state.clone()
    };
    let ea: Vec<f64> = fam.a.exponents.iter().map(|k| to_f64(*k) * alpha).collect();
    let eb: Vec<f64> = fam.b.exponents.iter().map(|k| to_f64(*k) * alpha).collect();
    let ec: Vec<f64> = fam.c.exponents.iter().map(|k| to_f64(*k) * alpha).collect();
    let mut out = Vec::with_capacity(2 * m * n);
    for i in 0..2 {
        for j in 0..m {
            for k in 0..n {
                let z = base.get(i, j, k);
                out.push(if z == ZERO { ZERO } else { z * (ea[i] + eb[j] + ec[k]).exp() });
            }
        }
    }
    Ok(out)
}

/// Transformed state at `alpha`; fails with `ZeroState` once it underflows to zero.
pub fn evaluate_family(fam: &OperatorFamily, alpha: f64, state: &StateTensor) -> Result<StateTensor> {
    let [_, m, n] = state.dims();
    StateTensor::new(m, n, evaluate_amplitudes(fam, alpha, state)?)
}

/// `||family(alpha) psi|| / ||psi||`.
pub fn norm_ratio(fam: &OperatorFamily, alpha: f64, state: &StateTensor) -> Result<f64> {
    let amps = evaluate_amplitudes(fam, alpha, state)?;
    Ok(amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / state.norm())
}

/// Kronecker structure of the normalized state at `alpha`.
pub fn limit_structure(fam: &OperatorFamily, alpha: f64, state: &StateTensor, tol: f64) -> Result<KroneckerStructure> {
    let limit = evaluate_family(fam, alpha, state)?.normalized();
    compute_kcf(&pencil_from_state(&limit), tol)
}

// ---------------------------------------------------------------------------
// Singular-block constructions.
//
// Each works on a list of block spans plus the pencil size, and returns row
// and column exponents.  The mirrored cases (two L^T blocks, or L^T with a
// Jordan block) run the same code on transposed spans and swap the roles of
// rows and columns afterwards.
// ---------------------------------------------------------------------------

fn transpose_span(s: &BlockSpan) -> BlockSpan {
    let kind = match s.kind {
        BlockKind::L(e) => BlockKind::Lt(e),
        BlockKind::Lt(v) => BlockKind::L(v),
        other => other,
    };
    BlockSpan { kind, row: s.col, col: s.row, rows: s.cols, cols: s.rows }
}

/// Column exponents damping every column by `1 / (2 (n - 1))` except `boost`,
/// which grows at rate `1 / 2`.  The sum is zero.
fn column_boost(n: usize, boost: usize) -> Vec<Rational64> {
    let damp = rat(-1, 2 * (n as i64 - 1));
    (0..n).map(|j| if j == boost { rat(1, 2) } else { damp }).collect()
}

fn add_into(target: &mut [Rational64], other: &[Rational64]) {
    for (t, o) in target.iter_mut().zip(other) {
        *t += o;
    }
}

struct SingularPlan {
    rows: Vec<Rational64>,
    cols: Vec<Rational64>,
}

impl SingularPlan {
    fn zeros(m: usize, n: usize) -> Self {
        Self { rows: vec![Rational64::zero(); m], cols: vec![Rational64::zero(); n] }
    }

    /// Adds the column boost and rescales so the slowest rate is one.
    fn finish(mut self, boost: usize) -> Self {
        let n = self.cols.len();
        add_into(&mut self.cols, &column_boost(n, boost));
        let scale = int(2 * (n - 1));
        self.rows.iter_mut().for_each(|k| *k *= scale);
        self.cols.iter_mut().for_each(|k| *k *= scale);
        self
    }
}

/// `L_eps (+) L^T_nu`: graded exponents `i - (eps + nu) / 2` on the joint rows and
/// `(eps + nu) / 2 - j` on the joint columns leave diagonal entries fixed and
/// damp the rest; the last column of `L_eps` then only holds damped entries
/// and can absorb the boost that damps everything else.
fn plan_l_lt(l: &BlockSpan, lt: &BlockSpan, m: usize, n: usize) -> SingularPlan {
    let (BlockKind::L(eps), BlockKind::Lt(nu)) = (l.kind, lt.kind) else { unreachable!("caller passes L and L^T") };
    let half = rat((eps + nu) as i64, 2);
    let mut plan = SingularPlan::zeros(m, n);
    let joint_rows = (l.row..l.row + eps).chain(lt.row..lt.row + nu + 1);
    for (i, r) in joint_rows.enumerate() {
        plan.rows[r] = int(i) - half;
    }
    let joint_cols = (l.col..l.col + eps + 1).chain(lt.col..lt.col + nu);
    for (j, c) in joint_cols.enumerate() {
        plan.cols[c] = half - int(j);
    }
    plan.finish(l.col + eps)
}

/// `L_e1 (+) L_e2` with `e1 != e2`: block scalings that fix every entry except
/// the first column of the second block, which is damped and then boosted.
fn plan_l_l(l1: &BlockSpan, l2: &BlockSpan, m: usize, n: usize) -> SingularPlan {
    let (BlockKind::L(e1), BlockKind::L(e2)) = (l1.kind, l2.kind) else { unreachable!("caller passes two L blocks") };
    let gap = e2 as i64 - e1 as i64;
    let (w1, w2) = (rat(e1 as i64, gap), rat(e2 as i64, gap));
    let mut plan = SingularPlan::zeros(m, n);
    (l1.row..l1.row + e1).for_each(|r| plan.rows[r] = -w2);
    (l2.row..l2.row + e2).for_each(|r| plan.rows[r] = w1);
    (l1.col..l1.col + e1 + 1).for_each(|c| plan.cols[c] = w2);
    plan.cols[l2.col] = -w2;
    (l2.col + 1..l2.col + e2 + 1).for_each(|c| plan.cols[c] = -w1);
    plan.finish(l2.col)
}

/// `L_eps (+) M` for a Jordan block of size `e`: the `L` block keeps all but its
/// last column, the Jordan block is fixed by opposite row and column scalings.
fn plan_l_m(l: &BlockSpan, jordan: &BlockSpan, m: usize, n: usize) -> SingularPlan {
    let BlockKind::L(eps) = l.kind else { unreachable!("caller passes an L block") };
    let e = jordan.rows;
    let w = rat(eps as i64, e as i64);
    let mut plan = SingularPlan::zeros(m, n);
    (l.row..l.row + eps).for_each(|r| plan.rows[r] = -Rational64::one());
    (jordan.row..jordan.row + e).for_each(|r| plan.rows[r] = w);
    (l.col..l.col + eps).for_each(|c| plan.cols[c] = Rational64::one());
    (jordan.col..jordan.col + e).for_each(|c| plan.cols[c] = -w);
    plan.finish(l.col + eps)
}

fn singular_family(kind: WitnessKind, plan: SingularPlan, mirrored: bool) -> OperatorFamily {
    let (rows, cols) = if mirrored { (plan.cols, plan.rows) } else { (plan.rows, plan.cols) };
    OperatorFamily {
        kind,
        a: SideOperator::identity(2),
        b: SideOperator::exponential(rows),
        c: SideOperator::exponential(cols),
        target: Target::ZeroVector,
    }
}

fn spans_of(ks: &KroneckerStructure) -> Vec<BlockSpan> {
    ks.layout()
}

fn is_l(s: &BlockSpan) -> bool {
    matches!(s.kind, BlockKind::L(_))
}

fn is_lt(s: &BlockSpan) -> bool {
    matches!(s.kind, BlockKind::Lt(_))
}

fn is_jordan(s: &BlockSpan) -> bool {
    matches!(s.kind, BlockKind::Jordan { .. })
}

/// Family driving a structure with both an `L` and an `L^T` block to zero.
pub fn witness_l_lt(ks: &KroneckerStructure) -> Result<OperatorFamily> {
    let spans = spans_of(ks);
    let (Some(l), Some(lt)) = (spans.iter().find(|s| is_l(s)), spans.iter().find(|s| is_lt(s))) else {
        return Err(Error::PreconditionViolated("structure needs both an L and an L^T block".into()));
    };
    Ok(singular_family(WitnessKind::LWithLt, plan_l_lt(l, lt, ks.rows(), ks.cols()), false))
}

fn distinct_pair(spans: &[BlockSpan], pick: fn(&BlockSpan) -> bool) -> Option<(BlockSpan, BlockSpan)> {
    let blocks: Vec<&BlockSpan> = spans.iter().filter(|s| pick(s)).collect();
    let first = *blocks.first()?;
    let other = blocks.iter().find(|s| s.rows != first.rows)?;
    Some((*first, **other))
}

/// Family for two `L` blocks of different sizes (or, mirrored, two `L^T` blocks).
pub fn witness_l_l(ks: &KroneckerStructure) -> Result<OperatorFamily> {
    let spans = spans_of(ks);
    if let Some((a, b)) = distinct_pair(&spans, is_l) {
        return Ok(singular_family(WitnessKind::TwoL, plan_l_l(&a, &b, ks.rows(), ks.cols()), false));
    }
    let transposed: Vec<BlockSpan> = spans.iter().map(transpose_span).collect();
    if let Some((a, b)) = distinct_pair(&transposed, is_l) {
        return Ok(singular_family(WitnessKind::TwoL, plan_l_l(&a, &b, ks.cols(), ks.rows()), true));
    }
    Err(Error::PreconditionViolated("structure needs two L (or two L^T) blocks of different sizes".into()))
}

/// Family for an `L` block together with a Jordan block (or, mirrored, `L^T` with a Jordan block).
pub fn witness_l_m(ks: &KroneckerStructure) -> Result<OperatorFamily> {
    let spans = spans_of(ks);
    let jordan = spans.iter().find(|s| is_jordan(s));
    if let (Some(l), Some(j)) = (spans.iter().find(|s| is_l(s)), jordan) {
        return Ok(singular_family(WitnessKind::LWithJordan, plan_l_m(l, j, ks.rows(), ks.cols()), false));
    }
    if let (Some(lt), Some(j)) = (spans.iter().find(|s| is_lt(s)), jordan) {
        let plan = plan_l_m(&transpose_span(lt), &transpose_span(j), ks.cols(), ks.rows());
        return Ok(singular_family(WitnessKind::LWithJordan, plan, true));
    }
    Err(Error::PreconditionViolated("structure needs an L or L^T block and a Jordan block".into()))
}

// ---------------------------------------------------------------------------
// Regular (square, M-only) constructions.
// ---------------------------------------------------------------------------

fn require_regular(ks: &KroneckerStructure) -> Result<()> {
    if ks.has_singular_blocks() || ks.loci().is_empty() {
        return Err(Error::PreconditionViolated("structure must consist of Jordan blocks only".into()));
    }
    Ok(())
}

/// Locus index of every row of a regular structure.
fn row_loci(ks: &KroneckerStructure) -> Vec<usize> {
    let mut out = vec![0; ks.rows()];
    for span in ks.layout() {
        if let BlockKind::Jordan { locus, .. } = span.kind {
            (span.row..span.row + span.rows).for_each(|r| out[r] = locus);
        }
    }
    out
}

fn dominant_locus(ks: &KroneckerStructure) -> usize {
    let loci = ks.loci();
    (0..loci.len()).max_by_key(|&i| (loci[i].multiplicity(), std::cmp::Reverse(i))).expect("nonempty")
}

/// Moebius map sending `x` to `0` and some point away from all eigenvalues to `inf`.
fn send_to_zero(x: &EigenvalueLocus, eigenvalues: &[EigenvalueLocus]) -> Result<Moebius> {
    let mut candidates = vec![EigenvalueLocus::Infinity];
    for k in 1..=8 {
        let r = k as f64;
        candidates.extend([
            EigenvalueLocus::real(r),
            EigenvalueLocus::real(-r),
            EigenvalueLocus::finite(0.0, r),
            EigenvalueLocus::finite(0.0, -r),
        ]);
    }
    let far = |p: &EigenvalueLocus| eigenvalues.iter().all(|e| e.chordal_distance(p) >= 0.05);
    let pole = candidates.iter().find(|p| far(p)).ok_or_else(|| Error::IllConditioned("no free pole".into()))?;
    let unit = candidates
        .iter()
        .find(|q| q.chordal_distance(x) >= 0.05 && q.chordal_distance(pole) >= 0.05)
        .expect("plenty of candidates");
    Moebius::from_three_points([x, unit, pole], [&EigenvalueLocus::real(0.0), &EigenvalueLocus::real(1.0), &EigenvalueLocus::Infinity])
}

/// Images `(R', S')` of the diagonal entries of each locus under `g`.
fn moved_diagonal(ks: &KroneckerStructure, g: &Moebius) -> Vec<(Complex64, Complex64)> {
    ks.loci()
        .iter()
        .map(|l| {
            let [p, q] = l.value.homogeneous();
            (g.a * p + g.b * q, g.c * p + g.d * q)
        })
        .collect()
}

fn dominant_family(ks: &KroneckerStructure) -> Result<OperatorFamily> {
    let n = ks.rows();
    let top = dominant_locus(ks);
    let m1 = ks.loci()[top].multiplicity();
    if 2 * m1 <= n {
        return Err(Error::PreconditionViolated("no eigenvalue carries more than half of the multiplicity".into()));
    }
    let values: Vec<EigenvalueLocus> = ks.loci().iter().map(|l| l.value).collect();
    let g = send_to_zero(&values[top], &values)?;
    // After g the dominant rows only have lambda entries: growing the mu slice
    // and shrinking the lambda slice, with rows rebalanced, damps every entry
    // at rate (2 m1 - n) / n before rescaling.
    let scale = rat(n as i64, (2 * m1 - n) as i64);
    let up = rat(2 * (n - m1) as i64, n as i64) * scale;
    let down = rat(-2 * m1 as i64, n as i64) * scale;
    let rows = row_loci(ks).iter().map(|&l| if l == top { up } else { down }).collect();
    Ok(OperatorFamily {
        kind: WitnessKind::Dominant,
        a: SideOperator { exponents: vec![scale, -scale], constant: Some(g.matrix()) },
        b: SideOperator::exponential(rows),
        c: SideOperator::identity(n),
        target: Target::ZeroVector,
    })
}

fn equal_split_family(ks: &KroneckerStructure) -> Result<OperatorFamily> {
    let n = ks.rows();
    let top = dominant_locus(ks);
    let m1 = ks.loci()[top].multiplicity();
    if 2 * m1 != n || ks.loci().len() < 3 {
        return Err(Error::PreconditionViolated("needs three or more eigenvalues with one carrying exactly half".into()));
    }
    let values: Vec<EigenvalueLocus> = ks.loci().iter().map(|l| l.value).collect();
    let g = send_to_zero(&values[top], &values)?;
    let moved = moved_diagonal(ks, &g);
    let loci_of_rows = row_loci(ks);
    // Normalize every surviving diagonal entry to a common constant: lambda on
    // the dominant rows, mu elsewhere.
    let pivots: Vec<Complex64> =
        loci_of_rows.iter().map(|&l| if l == top { moved[l].1 } else { moved[l].0 }).collect();
    let log_sum: Complex64 = pivots.iter().map(|p| p.ln()).sum();
    let common = (log_sum / n as f64).exp();
    let b_const = CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, pivots.iter().map(|p| common / p)));
    let half = rat(1, 2);
    let rows = loci_of_rows.iter().map(|&l| if l == top { half } else { -half }).collect();
    let limit = KroneckerStructure::regular(vec![
        Locus::new(EigenvalueLocus::real(0.0), vec![1; m1]),
        Locus::new(EigenvalueLocus::Infinity, vec![1; m1]),
    ])?;
    Ok(OperatorFamily {
        kind: WitnessKind::EqualSplit,
        a: SideOperator { exponents: vec![half, -half], constant: Some(g.matrix()) },
        b: SideOperator { exponents: rows, constant: Some(b_const) },
        c: SideOperator::identity(n),
        target: Target::CriticalClass(limit),
    })
}

/// Family for a diagonal structure in which one eigenvalue carries more than half the size.
pub fn witness_dominant(ks: &KroneckerStructure) -> Result<OperatorFamily> {
    require_regular(ks)?;
    if !ks.is_diagonal() {
        return Err(Error::PreconditionViolated("dominant witness expects a diagonal structure".into()));
    }
    dominant_family(ks)
}

/// Family for a diagonal structure with three or more eigenvalues, one carrying exactly half.
pub fn witness_equal_split(ks: &KroneckerStructure) -> Result<OperatorFamily> {
    require_regular(ks)?;
    if !ks.is_diagonal() {
        return Err(Error::PreconditionViolated("equal-split witness expects a diagonal structure".into()));
    }
    equal_split_family(ks)
}

/// Graded scaling `B = diag(e^{(i - (n-1)/2) alpha})`, `C = diag(e^{((n-1)/2 - j) alpha})`
/// that removes the superdiagonal Jordan entries and keeps the diagonal.
pub fn witness_offdiag(ks: &KroneckerStructure) -> Result<OperatorFamily> {
    require_regular(ks)?;
    if ks.is_diagonal() {
        return Err(Error::PreconditionViolated("structure is already diagonal".into()));
    }
    let n = ks.rows();
    let half = rat(n as i64 - 1, 2);
    Ok(OperatorFamily {
        kind: WitnessKind::OffDiagonal,
        a: SideOperator::identity(2),
        b: SideOperator::exponential((0..n).map(|i| int(i) - half).collect()),
        c: SideOperator::exponential((0..n).map(|j| half - int(j)).collect()),
        target: Target::Reduct(ks.diagonal_reduct()),
    })
}

/// Largest growth rate `a_s + b_i + c_{i+1}` of `fam` on superdiagonal Jordan entries.
fn superdiagonal_growth(ks: &KroneckerStructure, fam: &OperatorFamily) -> Rational64 {
    let mut worst = Rational64::zero();
    for span in ks.layout() {
        for i in span.row..span.row + span.rows.saturating_sub(1) {
            let col = i - span.row + span.col + 1;
            for a in &fam.a.exponents {
                worst = worst.max(a + fam.b.exponents[i] + fam.c.exponents[col]);
            }
        }
    }
    worst
}

/// Runs the graded scaling fast enough to beat `inner`, composed with `inner`.
fn compose_with_offdiag(ks: &KroneckerStructure, inner: OperatorFamily, target: Target) -> Result<OperatorFamily> {
    let off = witness_offdiag(ks)?;
    let speed = (superdiagonal_growth(ks, &inner) + Rational64::one()).ceil().max(Rational64::one());
    let off = OperatorFamily { b: off.b.scaled(speed), c: off.c.scaled(speed), ..off };
    let merge = |x: &SideOperator, y: &SideOperator| SideOperator {
        exponents: x.exponents.iter().zip(&y.exponents).map(|(p, q)| p + q).collect(),
        constant: x.constant.clone(),
    };
    // All B and C factors are diagonal, so the two phases commute and merge.
    Ok(OperatorFamily {
        kind: WitnessKind::Composite,
        a: inner.a.clone(),
        b: merge(&inner.b, &off.b),
        c: merge(&inner.c, &off.c),
        target,
    })
}

/// Family realizing the limit predicted by the classifier.
///
/// Null-cone structures get a family driving the state to zero; strictly
/// semistable structures get one whose normalized limit lies in the
/// polystable class of [`polystable_limit`].  Polystable input is refused.
pub fn witness_for(ks: &KroneckerStructure) -> Result<OperatorFamily> {
    let kind = classify(ks)?;
    if kind.is_polystable() {
        return Err(Error::PreconditionViolated(format!("class is {kind}; its orbit is already closed")));
    }
    if ks.has_singular_blocks() {
        let spans = spans_of(ks);
        if spans.iter().any(is_l) && spans.iter().any(is_lt) {
            return witness_l_lt(ks);
        }
        if let Ok(f) = witness_l_l(ks) {
            return Ok(f);
        }
        return witness_l_m(ks);
    }
    let reduct = diagonal_type(&ks.multiplicities());
    let target = if kind == OrbitType::NullCone {
        Target::ZeroVector
    } else {
        Target::CriticalClass(polystable_limit(ks)?)
    };
    if ks.is_diagonal() {
        return match reduct {
            OrbitType::NullCone => dominant_family(ks),
            _ => equal_split_family(ks),
        };
    }
    match reduct {
        OrbitType::NullCone => compose_with_offdiag(ks, dominant_family(ks)?, target),
        OrbitType::StrictlySemistable => compose_with_offdiag(ks, equal_split_family(ks)?, target),
        _ => Ok(OperatorFamily { target, ..witness_offdiag(ks)? }),
    }
}

/// Largest exponent over the support of the canonical pencil (negative means
/// every amplitude decays).  Constants are ignored, so this is meaningful for
/// families without an `A` constant.
pub fn support_rate(ks: &KroneckerStructure, fam: &OperatorFamily) -> f64 {
    let rep = crate::pencil::kcf_to_pencil(ks);
    let mut worst = f64::NEG_INFINITY;
    for (s, slice) in [&rep.mu_coeff, &rep.lambda_coeff].into_iter().enumerate() {
        for i in 0..slice.nrows() {
            for j in 0..slice.ncols() {
                if slice[(i, j)] != ZERO {
                    let e = fam.a.exponents[s] + fam.b.exponents[i] + fam.c.exponents[j];
                    worst = worst.max(to_f64(e));
                }
            }
        }
    }
    worst
}
