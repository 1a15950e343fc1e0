//! Helpers shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use slocc_core::linalg::{random_special_linear, CMat};
use slocc_core::pencil::{EigenvalueLocus, KroneckerStructure, Locus, MatrixPencil, Moebius};

/// Random partition of `n` (parts descending).
pub fn random_partition<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut parts = Vec::new();
    let mut left = n;
    while left > 0 {
        let p = rng.random_range(1..=left);
        parts.push(p);
        left -= p;
    }
    parts.sort_unstable_by(|a, b| b.cmp(a));
    parts
}

/// Random point of the sphere, with a small chance of infinity.
pub fn random_locus<R: Rng>(rng: &mut R) -> EigenvalueLocus {
    if rng.random_bool(0.15) {
        return EigenvalueLocus::Infinity;
    }
    let r: f64 = rng.random_range(0.0..3.0);
    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    EigenvalueLocus::Finite(Complex64::from_polar(r, t))
}

/// Random fully entangled structure with at most `max_dim` rows and columns,
/// eigenvalues pairwise at chordal distance at least `sep`.
pub fn random_structure<R: Rng>(rng: &mut R, max_dim: usize, sep: f64) -> KroneckerStructure {
    loop {
        let nl = rng.random_range(0..=2usize);
        let nt = rng.random_range(0..=2usize);
        let cols: Vec<usize> = (0..nl).map(|_| rng.random_range(1..=3)).collect();
        let rows: Vec<usize> = (0..nt).map(|_| rng.random_range(1..=3)).collect();
        let nloci = rng.random_range(0..=5usize);
        let mut loci: Vec<Locus> = Vec::new();
        for _ in 0..nloci {
            let size = rng.random_range(1..=4);
            let sig = random_partition(rng, size);
            let mut v = random_locus(rng);
            let mut tries = 0;
            while loci.iter().any(|l| l.value.chordal_distance(&v) < sep) && tries < 50 {
                v = random_locus(rng);
                tries += 1;
            }
            if tries == 50 {
                continue;
            }
            loci.push(Locus::new(v, sig));
        }
        let Ok(ks) = KroneckerStructure::new(cols, rows, loci) else { continue };
        if ks.rows() < 2 || ks.cols() < 2 || ks.rows() > max_dim || ks.cols() > max_dim || !ks.is_fully_entangled() {
            continue;
        }
        return ks;
    }
}

/// Applies random determinant-one operators on all three legs.
///
/// Returns the scrambled pencil and the Moebius map applied to the eigenvalues.
pub fn scramble<R: Rng>(rng: &mut R, p: &MatrixPencil) -> (MatrixPencil, Moebius) {
    let (m, n) = p.shape();
    let b: CMat = random_special_linear(rng, m);
    let c: CMat = random_special_linear(rng, n);
    let a = Moebius::from_matrix(&random_special_linear(rng, 2)).unwrap();
    (a.apply_pencil(&p.transform(&b, &c)), a)
}

/// Random weights with at least three entries, total at most 8, and the
/// largest strictly below the sum of the rest.
pub fn feasible_mults<R: Rng>(rng: &mut R) -> Vec<usize> {
    loop {
        let l = rng.random_range(3..=8);
        let mut ms: Vec<usize> = (0..l).map(|_| rng.random_range(1..=3)).collect();
        let total: usize = ms.iter().sum();
        let top = *ms.iter().max().unwrap();
        if total <= 8 && 2 * top < total {
            ms.sort_unstable_by(|a, b| b.cmp(a));
            return ms;
        }
    }
}

/// Uniformly distributed direction on the sphere with the given weight.
pub fn random_direction<R: Rng>(rng: &mut R, mult: usize) -> slocc_core::geometry::WeightedVector {
    let z: f64 = rng.random_range(-1.0..1.0);
    slocc_core::geometry::WeightedVector::new(z.acos(), rng.random_range(0.0..std::f64::consts::TAU), mult).unwrap()
}
