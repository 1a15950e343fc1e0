//! Exhaustive listing of SLOCC class families of fully entangled `2 x m x n` states.
//!
//! A class is fixed by its minimal indices, the signatures of its eigenvalues
//! and the eigenvalues themselves up to a Moebius map.  Any three distinct
//! eigenvalues can be moved to `0, 1, inf`, so a family is determined by the
//! singular blocks together with the multiset of signatures, and every locus
//! past the third carries a free parameter.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{classify, orbit_dim_diagonal, polystable_limit, OrbitType};
use crate::dsl::render_pencil_spec;
use crate::error::{Error, Result};
use crate::pencil::{representative_state, BlockKind, EigenvalueLocus, KroneckerStructure, Locus};
use crate::tensor::{StateJson, StateTensor};

/// Largest qudit dimension accepted by [`enumerate_classes`].
pub const MAX_DIM: usize = 12;

/// Value carried by one eigenvalue locus of a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EigenSlot {
    Fixed(EigenvalueLocus),
    /// Free parameter `x_{k+1}`.
    Param(usize),
}

impl EigenSlot {
    pub fn name(&self) -> String {
        match self {
            EigenSlot::Fixed(v) => v.to_string(),
            EigenSlot::Param(k) => format!("x{}", k + 1),
        }
    }
}

/// Kronecker structure whose eigenvalues may be symbolic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyStructure {
    pub col_indices: Vec<usize>,
    pub row_indices: Vec<usize>,
    pub loci: Vec<(EigenSlot, Vec<usize>)>,
}

impl FamilyStructure {
    pub fn param_count(&self) -> usize {
        self.loci.iter().filter(|(s, _)| matches!(s, EigenSlot::Param(_))).count()
    }

    pub fn signatures(&self) -> Vec<Vec<usize>> {
        self.loci.iter().map(|(_, s)| s.clone()).collect()
    }

    /// Fills the parameters with `values` (one per parameter, in order).
    pub fn instantiate(&self, values: &[Complex64]) -> Result<KroneckerStructure> {
        if values.len() != self.param_count() {
            return Err(Error::InvalidStructure(format!(
                "family has {} parameters, got {} values",
                self.param_count(),
                values.len()
            )));
        }
        let loci = self
            .loci
            .iter()
            .map(|(slot, sig)| {
                let value = match slot {
                    EigenSlot::Fixed(v) => *v,
                    EigenSlot::Param(k) => EigenvalueLocus::Finite(values[*k]),
                };
                Locus::new(value, sig.clone())
            })
            .collect();
        KroneckerStructure::new(self.col_indices.clone(), self.row_indices.clone(), loci)
    }

    /// Parameters `x_k = k + 1`, i.e. `2, 3, 4, ...`.
    pub fn default_params(&self) -> Vec<Complex64> {
        (0..self.param_count()).map(|k| Complex64::new(k as f64 + 2.0, 0.0)).collect()
    }

    pub fn instantiate_default(&self) -> Result<KroneckerStructure> {
        self.instantiate(&self.default_params())
    }

    /// Random admissible parameters, kept at chordal distance at least `0.05`
    /// from `0, 1, inf` and from each other.
    pub fn random_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let mut taken = vec![EigenvalueLocus::real(0.0), EigenvalueLocus::real(1.0), EigenvalueLocus::Infinity];
        let mut out = Vec::new();
        while out.len() < self.param_count() {
            let z = Complex64::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let candidate = EigenvalueLocus::Finite(z);
            if taken.iter().all(|t| t.chordal_distance(&candidate) >= 0.05) {
                taken.push(candidate);
                out.push(z);
            }
        }
        out
    }

    /// Canonical block text with parameter names in place of values.
    pub fn render(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        parts.extend(self.col_indices.iter().map(|e| format!("L{e}")));
        parts.extend(self.row_indices.iter().map(|v| format!("Lt{v}")));
        for (slot, sig) in &self.loci {
            for e in sig {
                parts.push(format!("M{e}({})", slot.name()));
            }
        }
        parts.join("+")
    }

    /// Distinctness condition on the eigenvalues, if any parameter is present.
    pub fn constraints(&self) -> Vec<String> {
        if self.param_count() == 0 {
            return Vec::new();
        }
        let names: Vec<String> = self.loci.iter().map(|(s, _)| s.name()).collect();
        vec![format!("set {{{}}} has cardinality {}", names.join(", "), names.len())]
    }

    /// Representative ket of the canonical pencil with symbolic parameters.
    pub fn template_ket(&self) -> Result<String> {
        let ks = self.instantiate_default()?;
        let wide = ks.rows() > 10 || ks.cols() > 10;
        let ket = |j: usize, k: usize| if wide { format!("|{j},{k}>") } else { format!("|{j}{k}>") };
        // Terms for slice 0 (mu) and slice 1 (lambda).
        let mut slices: [Vec<String>; 2] = [Vec::new(), Vec::new()];
        for span in ks.layout() {
            let (r, c) = (span.row, span.col);
            match span.kind {
                BlockKind::L(e) => {
                    for i in 0..e {
                        slices[0].push(ket(r + i, c + i + 1));
                        slices[1].push(ket(r + i, c + i));
                    }
                }
                BlockKind::Lt(v) => {
                    for i in 0..v {
                        slices[0].push(ket(r + i + 1, c + i));
                        slices[1].push(ket(r + i, c + i));
                    }
                }
                BlockKind::Jordan { locus, size } => {
                    let slot = self.locus_slot(&ks, locus);
                    for i in 0..size {
                        match slot {
                            EigenSlot::Fixed(EigenvalueLocus::Infinity) => {
                                slices[0].push(ket(r + i, c + i));
                                if i + 1 < size {
                                    slices[1].push(ket(r + i, c + i + 1));
                                }
                            }
                            EigenSlot::Fixed(EigenvalueLocus::Finite(z)) => {
                                if z.norm() > 0.0 {
                                    slices[0].push(format!("{}{}", coefficient(z), ket(r + i, c + i)));
                                }
                                if i + 1 < size {
                                    slices[0].push(ket(r + i, c + i + 1));
                                }
                                slices[1].push(ket(r + i, c + i));
                            }
                            EigenSlot::Param(k) => {
                                slices[0].push(format!("x{}{}", k + 1, ket(r + i, c + i)));
                                if i + 1 < size {
                                    slices[0].push(ket(r + i, c + i + 1));
                                }
                                slices[1].push(ket(r + i, c + i));
                            }
                        }
                    }
                }
            }
        }
        let parts: Vec<String> = slices
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_empty())
            .map(|(i, t)| format!("|{i}>({})", t.join("+")))
            .collect();
        Ok(parts.join(" + "))
    }

    /// Slot of the `idx`-th locus of an instantiated structure.
    fn locus_slot(&self, ks: &KroneckerStructure, idx: usize) -> EigenSlot {
        let defaults = self.default_params();
        let target = ks.loci()[idx].value;
        self.loci
            .iter()
            .map(|(s, _)| *s)
            .find(|s| {
                let v = match s {
                    EigenSlot::Fixed(v) => *v,
                    EigenSlot::Param(k) => EigenvalueLocus::Finite(defaults[*k]),
                };
                v.chordal_distance(&target) < 1e-12
            })
            .expect("instantiated locus comes from a slot")
    }
}

fn coefficient(z: Complex64) -> String {
    if (z - Complex64::new(1.0, 0.0)).norm() == 0.0 {
        String::new()
    } else {
        format!("({})", EigenvalueLocus::Finite(z))
    }
}

/// One row of a class table.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFamily {
    pub structure: FamilyStructure,
    pub orbit_type: OrbitType,
    /// State for the default parameter values.
    pub representative: StateTensor,
    pub constraints: Vec<String>,
}

impl ClassFamily {
    pub fn instantiate_default(&self) -> Result<KroneckerStructure> {
        self.structure.instantiate_default()
    }

    fn sort_key(&self) -> (OrbitType, Vec<usize>, Vec<usize>, Vec<Vec<usize>>) {
        (self.orbit_type, self.structure.col_indices.clone(), self.structure.row_indices.clone(), self.structure.signatures())
    }
}

/// Multisets of positive sizes with `count` parts and sum at most `budget`,
/// each listed in non-increasing order.
fn size_multisets(count: usize, budget: usize) -> Vec<Vec<usize>> {
    fn rec(count: usize, max_part: usize, budget: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if count == 0 {
            out.push(cur.clone());
            return;
        }
        // Each remaining part is at least one.
        let cap = max_part.min(budget.saturating_sub(count - 1));
        for p in (1..=cap).rev() {
            cur.push(p);
            rec(count - 1, p, budget - p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if count == 0 {
        out.push(Vec::new());
    } else if budget >= count {
        rec(count, budget, budget, &mut Vec::new(), &mut out);
    }
    out
}

/// All integer partitions of `k`, parts in non-increasing order.
fn partitions(k: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, max_part: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for p in (1..=max_part.min(rest)).rev() {
            cur.push(p);
            rec(rest - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, k, &mut Vec::new(), &mut out);
    out
}

/// Multisets of signatures with total size `size`, in canonical locus order
/// (multiplicity descending, then signature descending).
fn signature_multisets(size: usize) -> Vec<Vec<Vec<usize>>> {
    let mut pool: Vec<Vec<usize>> = (1..=size).flat_map(partitions).collect();
    pool.sort_by(|a, b| b.iter().sum::<usize>().cmp(&a.iter().sum::<usize>()).then_with(|| b.cmp(a)));
    fn rec(pool: &[Vec<usize>], start: usize, rest: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            let s: usize = pool[i].iter().sum();
            if s <= rest {
                cur.push(pool[i].clone());
                rec(pool, i, rest - s, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&pool, 0, size, &mut Vec::new(), &mut out);
    out
}

fn slots_for(signatures: Vec<Vec<usize>>) -> Vec<(EigenSlot, Vec<usize>)> {
    let fixed = [EigenvalueLocus::real(0.0), EigenvalueLocus::real(1.0), EigenvalueLocus::Infinity];
    signatures
        .into_iter()
        .enumerate()
        .map(|(i, sig)| {
            let slot = if i < 3 { EigenSlot::Fixed(fixed[i]) } else { EigenSlot::Param(i - 3) };
            (slot, sig)
        })
        .collect()
}

/// Every family of SLOCC classes of fully entangled `2 x m x n` states.
///
/// Requires `2 <= m <= n <= 12`.  Rows come out ordered by type (null cone
/// first, stable last) and then by block structure.
pub fn enumerate_classes(m: usize, n: usize) -> Result<Vec<ClassFamily>> {
    if !(2 <= m && m <= n && n <= MAX_DIM) {
        return Err(Error::InvalidDims(format!("enumeration needs 2 <= m <= n <= {MAX_DIM}, got m={m}, n={n}")));
    }
    let mut out = Vec::new();
    let excess = n - m;
    // Each L^T block uses at least two rows, so at most m / 2 of them.
    for lt_count in 0..=m / 2 {
        let l_count = lt_count + excess;
        for lts in size_multisets(lt_count, m) {
            let lt_rows: usize = lts.iter().map(|v| v + 1).sum();
            if lt_rows > m {
                continue;
            }
            for ls in size_multisets(l_count, m - lt_rows) {
                let used_rows = lt_rows + ls.iter().sum::<usize>();
                if used_rows > m {
                    continue;
                }
                let regular = m - used_rows;
                for sigs in signature_multisets(regular) {
                    let mut cols = ls.clone();
                    cols.reverse();
                    let mut rows = lts.clone();
                    rows.reverse();
                    let structure = FamilyStructure { col_indices: cols, row_indices: rows, loci: slots_for(sigs) };
                    let ks = structure.instantiate_default()?;
                    if !ks.is_fully_entangled() {
                        continue;
                    }
                    let orbit_type = classify(&ks)?;
                    let representative = representative_state(&ks)?;
                    let constraints = structure.constraints();
                    out.push(ClassFamily { structure, orbit_type, representative, constraints });
                }
            }
        }
    }
    out.sort_by_key(|f| f.sort_key());
    Ok(out)
}

/// Output format of [`render_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "md" | "markdown" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::InvalidStructure(format!("unknown table format '{other}' (use md, csv or json)"))),
        }
    }
}

/// Flat, serializable table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub no: usize,
    pub pencil: String,
    pub params: Vec<String>,
    pub constraints: Vec<String>,
    pub representative: String,
    pub representative_state: StateJson,
    #[serde(rename = "type")]
    pub orbit_type: OrbitType,
    pub comments: String,
}

pub fn table_rows(families: &[ClassFamily]) -> Result<Vec<TableRow>> {
    families
        .iter()
        .enumerate()
        .map(|(i, fam)| {
            let ks = fam.instantiate_default()?;
            let mut comments = fam.constraints.clone();
            if fam.orbit_type == OrbitType::StrictlySemistable {
                comments.push(format!("closure contains {}", render_pencil_spec(&polystable_limit(&ks)?)));
            }
            if fam.orbit_type.is_polystable() && ks.is_diagonal() && ks.rows() == ks.cols() {
                comments.push(format!("orbit dimension {}", orbit_dim_diagonal(&ks.multiplicities())));
            }
            Ok(TableRow {
                no: i + 1,
                pencil: fam.structure.render(),
                params: (0..fam.structure.param_count()).map(|k| format!("x{}", k + 1)).collect(),
                constraints: fam.constraints.clone(),
                representative: fam.structure.template_ket()?,
                representative_state: fam.representative.to_json(),
                orbit_type: fam.orbit_type,
                comments: comments.join("; "),
            })
        })
        .collect()
}

/// Renders a class table.  Output depends only on `families`.
pub fn render_table(families: &[ClassFamily], format: TableFormat) -> Result<String> {
    let rows = table_rows(families)?;
    match format {
        TableFormat::Markdown => {
            let mut s = String::from("| No. | Pencil | Representative | Type | Comments |\n|---|---|---|---|---|\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "| {} | `{}` | `{}` | {} | {} |",
                    r.no, r.pencil, r.representative, r.orbit_type, r.comments
                );
            }
            Ok(s)
        }
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(e.to_string());
            w.write_record(["no", "pencil", "representative", "type", "comments"]).map_err(io)?;
            for r in &rows {
                w.write_record([r.no.to_string(), r.pencil.clone(), r.representative.clone(), r.orbit_type.to_string(), r.comments.clone()])
                    .map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
        }
        TableFormat::Json => serde_json::to_string_pretty(&rows).map(|s| s + "\n").map_err(|e| Error::Io(e.to_string())),
    }
}

/// Reads back the JSON table format.
pub fn parse_table_json(text: &str) -> Result<Vec<TableRow>> {
    serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
}
