//! Text formats: the pencil block language and the JSON state format.
//!
//! Pencil specifications look like `L2+Lt1+M2(0)+M1(1+0.5i)+N1`:
//!
//! ```text
//! spec := term ("+" term)*
//! term := "L" nat | "Lt" nat | "M" nat "(" eig ")" | "N" nat
//! eig  := "inf" | complex
//! ```
//!
//! Complex literals are plain decimals without exponent, optionally followed
//! by a signed imaginary part ending in `i` (e.g. `-1.5`, `2-0.25i`).
//! Whitespace between tokens is ignored, `N k` is shorthand for `M k(inf)`,
//! and repeated eigenvalues merge into one locus.  Decimal literals are kept
//! as exact rationals so the exact rank mode sees the values that were typed.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{ExactMatrix, GaussRational};
use crate::pencil::{BlockKind, EigenvalueLocus, ExactPencil, KroneckerStructure, Locus};
use crate::tensor::{StateJson, StateTensor};

/// An eigenvalue literal as written.
#[derive(Debug, Clone, PartialEq)]
pub enum EigenLiteral {
    Infinity,
    Finite { exact: GaussRational, value: Complex64 },
}

impl EigenLiteral {
    fn locus(&self) -> EigenvalueLocus {
        match self {
            EigenLiteral::Infinity => EigenvalueLocus::Infinity,
            EigenLiteral::Finite { value, .. } => EigenvalueLocus::Finite(*value),
        }
    }
}

/// One block of a specification.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    L(usize),
    Lt(usize),
    Jordan { size: usize, eig: EigenLiteral, offset: usize },
}

/// Reported when two terms share an eigenvalue and were merged into one locus.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeNotice {
    pub eigenvalue: String,
    pub offset: usize,
}

/// Parsed specification.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilSpec {
    pub terms: Vec<Term>,
}

impl PencilSpec {
    /// Groups Jordan blocks by eigenvalue, in order of first appearance.
    fn grouped(&self) -> (Vec<usize>, Vec<usize>, Vec<(EigenLiteral, Vec<usize>)>, Vec<MergeNotice>) {
        let mut cols = Vec::new();
        let mut rows = Vec::new();
        let mut loci: Vec<(EigenLiteral, Vec<usize>)> = Vec::new();
        let mut notices = Vec::new();
        for t in &self.terms {
            match t {
                Term::L(e) => cols.push(*e),
                Term::Lt(v) => rows.push(*v),
                Term::Jordan { size, eig, offset } => match loci.iter_mut().find(|(l, _)| same_literal(l, eig)) {
                    Some((_, sig)) => {
                        sig.push(*size);
                        notices.push(MergeNotice { eigenvalue: eig.locus().to_string(), offset: *offset });
                    }
                    None => loci.push((eig.clone(), vec![*size])),
                },
            }
        }
        (cols, rows, loci, notices)
    }

    pub fn to_structure(&self) -> Result<(KroneckerStructure, Vec<MergeNotice>)> {
        let (cols, rows, loci, notices) = self.grouped();
        let loci = loci.into_iter().map(|(l, sig)| Locus::new(l.locus(), sig)).collect();
        Ok((KroneckerStructure::new(cols, rows, loci)?, notices))
    }

    /// Canonical pencil with the literal eigenvalues kept exact.
    pub fn to_exact_pencil(&self) -> Result<ExactPencil> {
        let (ks, _) = self.to_structure()?;
        let (_, _, literals, _) = self.grouped();
        let (m, n) = (ks.rows(), ks.cols());
        let mut mu = ExactMatrix::zeros(m, n);
        let mut lambda = ExactMatrix::zeros(m, n);
        let one = GaussRational::one();
        for span in ks.layout() {
            let (r, c) = (span.row, span.col);
            match span.kind {
                BlockKind::L(e) => {
                    for i in 0..e {
                        lambda.set(r + i, c + i, one.clone());
                        mu.set(r + i, c + i + 1, one.clone());
                    }
                }
                BlockKind::Lt(v) => {
                    for i in 0..v {
                        lambda.set(r + i, c + i, one.clone());
                        mu.set(r + i + 1, c + i, one.clone());
                    }
                }
                BlockKind::Jordan { locus, size } => {
                    let (diag_mu, diag_lambda, upper_mu) = match &literals[locus].0 {
                        EigenLiteral::Finite { exact, .. } => (exact.clone(), one.clone(), true),
                        EigenLiteral::Infinity => (one.clone(), GaussRational::zero(), false),
                    };
                    for i in 0..size {
                        mu.set(r + i, c + i, diag_mu.clone());
                        lambda.set(r + i, c + i, diag_lambda.clone());
                        if i + 1 < size {
                            if upper_mu {
                                mu.set(r + i, c + i + 1, one.clone());
                            } else {
                                lambda.set(r + i, c + i + 1, one.clone());
                            }
                        }
                    }
                }
            }
        }
        ExactPencil::new(mu, lambda)
    }
}

fn same_literal(a: &EigenLiteral, b: &EigenLiteral) -> bool {
    match (a, b) {
        (EigenLiteral::Infinity, EigenLiteral::Infinity) => true,
        (EigenLiteral::Finite { exact: x, .. }, EigenLiteral::Finite { exact: y, .. }) => x == y,
        _ => false,
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn fail<T>(&mut self, expected: &str) -> Result<T> {
        self.skip_ws();
        Err(Error::Syntax { offset: self.pos, expected: expected.to_string() })
    }

    fn digits(&mut self) -> &'a str {
        let start = self.pos;
        while self.text[self.pos..].chars().next().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn nat(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        let ds = self.digits();
        if ds.is_empty() {
            return self.fail("block size");
        }
        let v: usize = ds.parse().map_err(|_| Error::Syntax { offset: start, expected: "block size that fits in memory".into() })?;
        if v == 0 {
            return Err(Error::SizeZero { offset: start });
        }
        Ok(v)
    }

    /// Unsigned decimal; returns the literal text.
    fn decimal(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let start = self.pos;
        let int = self.digits();
        if int.is_empty() {
            return self.fail("digit");
        }
        if self.text[self.pos..].starts_with('.') {
            self.pos += 1;
            if self.digits().is_empty() {
                return self.fail("digit after decimal point");
            }
        }
        Ok(&self.text[start..self.pos])
    }

    fn eigen(&mut self) -> Result<EigenLiteral> {
        if self.eat("inf") {
            return Ok(EigenLiteral::Infinity);
        }
        let negative = if self.eat("-") {
            true
        } else {
            self.eat("+");
            false
        };
        let re_text = self.decimal()?;
        let mut re = decimal_rational(re_text);
        let mut re_f: f64 = re_text.parse().expect("validated decimal");
        if negative {
            re = -re;
            re_f = -re_f;
        }
        let mut im = BigRational::zero();
        let mut im_f = 0.0;
        match self.peek() {
            Some(c @ ('+' | '-')) => {
                self.pos += 1;
                let im_text = self.decimal()?;
                if !self.eat("i") {
                    return self.fail("'i'");
                }
                im = decimal_rational(im_text);
                im_f = im_text.parse().expect("validated decimal");
                if c == '-' {
                    im = -im;
                    im_f = -im_f;
                }
            }
            _ => {}
        }
        Ok(EigenLiteral::Finite { exact: GaussRational::new(re, im), value: Complex64::new(re_f, im_f) })
    }

    fn term(&mut self) -> Result<Term> {
        self.skip_ws();
        let offset = self.pos;
        if self.eat("Lt") {
            Ok(Term::Lt(self.nat()?))
        } else if self.eat("L") {
            Ok(Term::L(self.nat()?))
        } else if self.eat("N") {
            Ok(Term::Jordan { size: self.nat()?, eig: EigenLiteral::Infinity, offset })
        } else if self.eat("M") {
            let size = self.nat()?;
            if !self.eat("(") {
                return self.fail("'('");
            }
            let eig = self.eigen()?;
            if !self.eat(")") {
                return self.fail("')' or imaginary part");
            }
            Ok(Term::Jordan { size, eig, offset })
        } else {
            self.fail("one of L, Lt, M, N")
        }
    }
}

fn decimal_rational(text: &str) -> BigRational {
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    let digits: BigInt = format!("{int}{frac}").parse().expect("digits");
    let mut den = BigInt::one();
    for _ in 0..frac.len() {
        den *= 10;
    }
    BigRational::new(digits, den)
}

/// Parses a specification into its syntax tree.
pub fn parse_pencil_ast(text: &str) -> Result<PencilSpec> {
    let mut cur = Cursor { text, pos: 0 };
    let mut terms = vec![cur.term()?];
    loop {
        match cur.peek() {
            None => break,
            Some('+') => {
                cur.pos += 1;
                terms.push(cur.term()?);
            }
            Some(_) => return cur.fail("'+' or end of input"),
        }
    }
    Ok(PencilSpec { terms })
}

/// Parses a specification, also returning notices about merged eigenvalues.
pub fn parse_pencil_spec_with_notices(text: &str) -> Result<(KroneckerStructure, Vec<MergeNotice>)> {
    parse_pencil_ast(text)?.to_structure()
}

pub fn parse_pencil_spec(text: &str) -> Result<KroneckerStructure> {
    Ok(parse_pencil_spec_with_notices(text)?.0)
}

/// Canonical text: L blocks, L^T blocks, then each locus with its blocks largest first.
pub fn render_pencil_spec(ks: &KroneckerStructure) -> String {
    let mut parts: Vec<String> = Vec::new();
    parts.extend(ks.col_indices().iter().map(|e| format!("L{e}")));
    parts.extend(ks.row_indices().iter().map(|v| format!("Lt{v}")));
    for l in ks.loci() {
        for e in &l.signature {
            parts.push(format!("M{e}({})", l.value));
        }
    }
    parts.join("+")
}

/// Parses and validates the sparse JSON state format.
pub fn parse_state_json(text: &str) -> Result<StateTensor> {
    let raw: StateJson = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    state_from_json(&raw)
}

pub fn state_from_json(raw: &StateJson) -> Result<StateTensor> {
    if raw.dims.len() != 3 {
        return Err(Error::InvalidDims(format!("expected three dimensions, got {}", raw.dims.len())));
    }
    if raw.dims[0] != 2 {
        return Err(Error::InvalidDims(format!("first dimension must be 2, got {}", raw.dims[0])));
    }
    let (m, n) = (raw.dims[1], raw.dims[2]);
    if m < 2 || n < 2 {
        return Err(Error::InvalidDims(format!("qudit dimensions must be at least 2, got {m} and {n}")));
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(raw.amps.len());
    for a in &raw.amps {
        if a.idx[0] >= 2 || a.idx[1] >= m || a.idx[2] >= n {
            return Err(Error::IndexOutOfRange { index: a.idx, dims: [2, m, n] });
        }
        if !seen.insert(a.idx) {
            return Err(Error::DuplicateIndex(a.idx));
        }
        entries.push((a.idx, Complex64::new(a.re, a.im)));
    }
    StateTensor::from_entries(m, n, &entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_spec() {
        let ks = parse_pencil_spec("L2 + Lt1+M2(0)+M1(1-0.5i)+N1").unwrap();
        assert_eq!(ks.col_indices(), &[2]);
        assert_eq!(ks.row_indices(), &[1]);
        assert_eq!(ks.loci().len(), 3);
        assert_eq!(ks.loci()[1].value, EigenvalueLocus::finite(1.0, -0.5));
        assert_eq!(ks.loci()[2].value, EigenvalueLocus::Infinity);
    }

    #[test]
    fn merges_repeated_eigenvalues() {
        let (ks, notes) = parse_pencil_spec_with_notices("M2(0)+M1(0)+M1(1)").unwrap();
        assert_eq!(ks.loci()[0].signature, vec![2, 1]);
        assert_eq!(notes.len(), 1);
    }

    #[test]
    fn reports_offsets() {
        assert_eq!(parse_pencil_spec("M1(0)+L0"), Err(Error::SizeZero { offset: 7 }));
        assert!(matches!(parse_pencil_spec("M1(0"), Err(Error::Syntax { offset: 4, .. })));
        assert!(matches!(parse_pencil_spec("X1"), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse_pencil_spec("L1 L2"), Err(Error::Syntax { offset: 3, .. })));
    }

    #[test]
    fn decimal_literals_are_exact() {
        let ast = parse_pencil_ast("M1(0.1)").unwrap();
        match &ast.terms[0] {
            Term::Jordan { eig: EigenLiteral::Finite { exact, .. }, .. } => {
                assert_eq!(exact.re, BigRational::new(1.into(), 10.into()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn render_canonical() {
        let ks = parse_pencil_spec("M1(0)+M1(1)").unwrap();
        assert_eq!(render_pencil_spec(&ks), "M1(0)+M1(1)");
        let ks = parse_pencil_spec("N2+M1(-2.5+3i)").unwrap();
        assert_eq!(render_pencil_spec(&ks), "M2(inf)+M1(-2.5+3i)");
    }

    #[test]
    fn json_validation() {
        let ok = r#"{"dims":[2,2,2],"amps":[{"idx":[0,0,0],"re":1,"im":0},{"idx":[1,1,1],"re":1,"im":0}]}"#;
        assert!(parse_state_json(ok).is_ok());
        let dup = r#"{"dims":[2,2,2],"amps":[{"idx":[0,0,0],"re":1,"im":0},{"idx":[0,0,0],"re":1,"im":0}]}"#;
        assert_eq!(parse_state_json(dup), Err(Error::DuplicateIndex([0, 0, 0])));
        let bad = r#"{"dims":[3,2,2],"amps":[{"idx":[0,0,0],"re":1,"im":0}]}"#;
        assert!(matches!(parse_state_json(bad), Err(Error::InvalidDims(_))));
        let zero = r#"{"dims":[2,2,2],"amps":[]}"#;
        assert_eq!(parse_state_json(zero), Err(Error::ZeroState));
        let oob = r#"{"dims":[2,2,2],"amps":[{"idx":[0,2,0],"re":1,"im":0}]}"#;
        assert!(matches!(parse_state_json(oob), Err(Error::IndexOutOfRange { .. })));
    }
}
