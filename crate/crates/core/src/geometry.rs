//! Bloch-sphere picture of diagonal square pencils.
//!
//! An eigenvalue `x = e^{i phi} tan(theta / 2)` is the point `(theta, phi)` on
//! the unit sphere, with `0` at the north pole and `inf` at the south pole.  A
//! diagonal pencil is SLOCC equivalent to a critical state exactly when some
//! qubit operator moves its weighted points to a configuration summing to
//! zero.  Unitaries rotate the sphere; the positive diagonal part pulls every
//! point along its meridian towards the south pole ("hinging").

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::classifier::diagonal_type;
use crate::error::{Error, Result};
use crate::pencil::EigenvalueLocus;
use crate::tensor::StateTensor;

/// A point on the sphere with an integer weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedVector {
    pub theta: f64,
    pub phi: f64,
    pub mult: usize,
}

impl WeightedVector {
    /// Validates the ranges `theta in [0, pi]`, `phi in [0, 2 pi)` and `mult >= 1`.
    pub fn new(theta: f64, phi: f64, mult: usize) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) || !(0.0..TAU).contains(&phi) || mult == 0 {
            return Err(Error::PreconditionViolated(format!(
                "weighted vector out of range: theta={theta}, phi={phi}, mult={mult}"
            )));
        }
        Ok(Self { theta, phi, mult })
    }

    fn from_cartesian(v: &Vector3<f64>, mult: usize) -> Self {
        let v = v.normalize();
        let theta = v.z.clamp(-1.0, 1.0).acos();
        Self { theta, phi: wrap_angle(v.y.atan2(v.x)), mult }
    }

    pub fn cartesian(&self) -> Vector3<f64> {
        Vector3::new(self.theta.sin() * self.phi.cos(), self.theta.sin() * self.phi.sin(), self.theta.cos())
    }

    pub fn with_mult(self, mult: usize) -> Self {
        Self { mult, ..self }
    }
}

fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Direction of an eigenvalue, with weight one.
pub fn eigenvalue_to_vector(x: &EigenvalueLocus) -> WeightedVector {
    match x {
        EigenvalueLocus::Infinity => WeightedVector { theta: PI, phi: 0.0, mult: 1 },
        EigenvalueLocus::Finite(z) => {
            let phi = if z.norm() == 0.0 { 0.0 } else { wrap_angle(z.arg()) };
            WeightedVector { theta: 2.0 * z.norm().atan(), phi, mult: 1 }
        }
    }
}

pub fn vector_to_eigenvalue(v: &WeightedVector) -> EigenvalueLocus {
    let half = v.theta / 2.0;
    // Parametrize homogeneously so the south pole maps cleanly to infinity.
    EigenvalueLocus::from_homogeneous(Complex64::from_polar(half.sin(), v.phi), Complex64::new(half.cos(), 0.0))
}

/// `theta -> 2 atan(tan(theta / 2) / (1 - alpha))` with `phi` unchanged.
pub fn hinging(v: &WeightedVector, alpha: f64) -> Result<WeightedVector> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::PreconditionViolated(format!("hinging parameter must lie in [0, 1), got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(*v);
    }
    let theta = if v.theta >= PI { PI } else { 2.0 * ((v.theta / 2.0).tan() / (1.0 - alpha)).atan() };
    Ok(WeightedVector { theta, ..*v })
}

fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_y_prime(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn rot_z_prime(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// Hinging written in Cartesian coordinates with stretch `k = 1 / (1 - alpha)`:
/// `h(w) = (2k w1, 2k w2, (1 + w3) - k^2 (1 - w3)) / ((1 + w3) + k^2 (1 - w3))`.
/// Returns `h`, `dh/dw` and `dh/dk`.
fn hinge_cartesian(w: &Vector3<f64>, k: f64) -> (Vector3<f64>, Matrix3<f64>, Vector3<f64>) {
    let k2 = k * k;
    let num = Vector3::new(2.0 * k * w.x, 2.0 * k * w.y, (1.0 + w.z) - k2 * (1.0 - w.z));
    let den = (1.0 + w.z) + k2 * (1.0 - w.z);
    let h = num / den;
    let dnum_dw = Matrix3::new(2.0 * k, 0.0, 0.0, 0.0, 2.0 * k, 0.0, 0.0, 0.0, 1.0 + k2);
    let dden_dw = Vector3::new(0.0, 0.0, 1.0 - k2);
    let dh_dw = (dnum_dw - h * dden_dw.transpose()) / den;
    let dnum_dk = Vector3::new(2.0 * w.x, 2.0 * w.y, -2.0 * k * (1.0 - w.z));
    let dden_dk = 2.0 * k * (1.0 - w.z);
    let dh_dk = (dnum_dk - h * dden_dk) / den;
    (h, dh_dw, dh_dk)
}

/// Weighted sum after rotating by `R_y(theta) R_z(phi)` and hinging with
/// stretch `e^t`, and its Jacobian in `(t, theta, phi)`.
fn weighted_sum(vectors: &[WeightedVector], t: f64, theta: f64, phi: f64) -> (Vector3<f64>, Matrix3<f64>) {
    let k = t.exp();
    let (ry, rz) = (rot_y(theta), rot_z(phi));
    let rot = ry * rz;
    let d_theta = rot_y_prime(theta) * rz;
    let d_phi = ry * rot_z_prime(phi);
    let mut sum = Vector3::zeros();
    let mut jac = Matrix3::zeros();
    for v in vectors {
        let u = v.cartesian();
        let (h, dh_dw, dh_dk) = hinge_cartesian(&(rot * u), k);
        let m = v.mult as f64;
        sum += h * m;
        jac.set_column(0, &(jac.column(0) + dh_dk * (k * m)));
        jac.set_column(1, &(jac.column(1) + dh_dw * (d_theta * u) * m));
        jac.set_column(2, &(jac.column(2) + dh_dw * (d_phi * u) * m));
    }
    (sum, jac)
}

fn alpha_to_t(alpha: f64) -> f64 {
    -(1.0 - alpha).ln()
}

/// Squared norm of the weighted vector sum after rotating all vectors by
/// `R_y(theta) R_z(phi)` and hinging with `alpha`.
pub fn imbalance(vectors: &[WeightedVector], alpha: f64, theta: f64, phi: f64) -> f64 {
    weighted_sum(vectors, alpha_to_t(alpha), theta, phi).0.norm_squared()
}

/// Gradient of [`imbalance`] with respect to `(alpha, theta, phi)`.
pub fn imbalance_gradient(vectors: &[WeightedVector], alpha: f64, theta: f64, phi: f64) -> [f64; 3] {
    let (sum, jac) = weighted_sum(vectors, alpha_to_t(alpha), theta, phi);
    let g = jac.transpose() * sum * 2.0;
    [g[0] / (1.0 - alpha), g[1], g[2]]
}

/// Transformed configuration found by [`balance`].
#[derive(Debug, Clone, PartialEq)]
pub struct BalancePoint {
    pub alpha: f64,
    pub theta: f64,
    pub phi: f64,
    /// Value of [`imbalance`] at the point.
    pub residual: f64,
    /// The vectors after rotation and hinging, in input order.
    pub vectors: Vec<WeightedVector>,
}

fn check_distinct(vectors: &[WeightedVector]) -> Result<()> {
    for (i, a) in vectors.iter().enumerate() {
        for b in &vectors[i + 1..] {
            if (a.cartesian() - b.cartesian()).norm() <= 1e-9 {
                return Err(Error::PreconditionViolated(
                    "vectors must be pairwise distinct; express repeats through the multiplicity".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Points of a Fibonacci lattice on the unit sphere, as `(theta, phi)`.
fn fibonacci_sphere(count: usize) -> Vec<(f64, f64)> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            (z.acos(), wrap_angle(golden * i as f64))
        })
        .collect()
}

/// Levenberg-Marquardt on the weighted sum; returns the best `(t, theta, phi, f)`.
fn refine(vectors: &[WeightedVector], start: [f64; 3], target: f64) -> ([f64; 3], f64) {
    let mut p = Vector3::from(start);
    let (mut sum, mut jac) = weighted_sum(vectors, p[0], p[1], p[2]);
    let mut f = sum.norm_squared();
    let mut damping = 1e-3;
    for _ in 0..400 {
        if f <= target {
            break;
        }
        let jtj = jac.transpose() * jac;
        let rhs = -(jac.transpose() * sum);
        let mut improved = false;
        for _ in 0..30 {
            let lhs = jtj + Matrix3::from_diagonal(&jtj.diagonal().map(|d| d.max(1e-12))) * damping;
            let Some(step) = lhs.lu().solve(&rhs) else {
                damping *= 10.0;
                continue;
            };
            let mut trial = p + step;
            trial[0] = trial[0].clamp(-60.0, 60.0);
            let (s2, j2) = weighted_sum(vectors, trial[0], trial[1], trial[2]);
            let f2 = s2.norm_squared();
            if f2 < f {
                p = trial;
                sum = s2;
                jac = j2;
                f = f2;
                damping = (damping / 3.0).max(1e-15);
                improved = true;
                break;
            }
            damping *= 4.0;
        }
        if !improved {
            break;
        }
    }
    ([p[0], p[1], p[2]], f)
}

/// Expresses `(t, theta, phi)` with `t >= 0` and `theta in [0, pi]`.
///
/// Flipping the hinging direction is a half turn about the y axis, and a
/// negative polar angle is absorbed by a half turn about z.  Both leave the
/// norm of the weighted sum unchanged since rotations about z commute with
/// hinging.
fn canonical_parameters(mut t: f64, mut theta: f64, mut phi: f64) -> (f64, f64, f64) {
    if t < 0.0 {
        t = -t;
        theta += PI;
    }
    theta = theta.rem_euclid(TAU);
    if theta > PI {
        theta = TAU - theta;
        phi -= PI;
    }
    (t, theta, wrap_angle(phi))
}

fn finish(vectors: &[WeightedVector], t: f64, theta: f64, phi: f64) -> BalancePoint {
    let (t, theta, phi) = canonical_parameters(t, theta, phi);
    let rot = rot_y(theta) * rot_z(phi);
    let k = t.exp();
    let moved = vectors
        .iter()
        .map(|v| WeightedVector::from_cartesian(&hinge_cartesian(&(rot * v.cartesian()), k).0, v.mult))
        .collect();
    let alpha = -(-t).exp_m1();
    BalancePoint { alpha, theta, phi, residual: weighted_sum(vectors, t, theta, phi).0.norm_squared(), vectors: moved }
}

/// Finds a rotation and hinging that balances `vectors` to `imbalance <= tol`.
///
/// Needs at least two distinct vectors.  Two vectors of equal weight are
/// solved in closed form (hinge along their bisector until they are
/// antipodal).  Otherwise the largest weight must be strictly smaller than
/// the sum of the others.
pub fn balance(vectors: &[WeightedVector], tol: f64) -> Result<BalancePoint> {
    check_distinct(vectors)?;
    let total: usize = vectors.iter().map(|v| v.mult).sum();
    let top = vectors.iter().map(|v| v.mult).max().unwrap_or(0);
    if vectors.len() < 2 {
        return Err(Error::PreconditionViolated("balancing needs at least two distinct vectors".into()));
    }
    if vectors.len() == 2 && vectors[0].mult == vectors[1].mult {
        return Ok(balance_pair(vectors));
    }
    if 2 * top >= total {
        return Err(Error::PreconditionViolated(format!(
            "a vector of weight {top} dominates the remaining weight {}",
            total - top
        )));
    }
    if imbalance(vectors, 0.0, 0.0, 0.0) <= tol {
        return Ok(finish(vectors, 0.0, 0.0, 0.0));
    }
    let mut starts: Vec<(f64, [f64; 3])> = Vec::new();
    for (theta, phi) in fibonacci_sphere(512) {
        for t in [0.0, 0.7, 2.0] {
            let p = [t, theta, phi];
            starts.push((weighted_sum(vectors, t, theta, phi).0.norm_squared(), p));
        }
    }
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = (f64::INFINITY, [0.0; 3]);
    for (_, start) in starts.iter().take(24) {
        let (p, f) = refine(vectors, *start, tol * 1e-3);
        if f < best.0 {
            best = (f, p);
        }
        if best.0 <= tol * 1e-3 {
            break;
        }
    }
    if best.0 > tol {
        return Err(Error::NoConvergence { best: best.0 });
    }
    // The states built from the result need the sum itself small, not its square.
    let ([t, theta, phi], _) = refine(vectors, best.1, 0.0);
    Ok(finish(vectors, t, theta, phi))
}

fn balance_pair(vectors: &[WeightedVector]) -> BalancePoint {
    let (a, b) = (vectors[0].cartesian(), vectors[1].cartesian());
    let gamma = a.dot(&b).clamp(-1.0, 1.0).acos();
    let bisector = a + b;
    if bisector.norm() < 1e-12 {
        return finish(vectors, 0.0, 0.0, 0.0);
    }
    // Rotate the bisector to the north pole; both points then sit at polar
    // angle gamma / 2 on opposite meridians, and hinging by
    // k = 1 / tan(gamma / 4) brings both to the equator.
    let dir = bisector.normalize();
    let beta = dir.z.clamp(-1.0, 1.0).acos();
    let psi = dir.y.atan2(dir.x);
    let t = -(gamma / 4.0).tan().ln();
    finish(vectors, t, -beta, -psi)
}

/// The `2 x n x n` state `sum_i (e^{i phi_i} sin(theta_i/2)|0> + cos(theta_i/2)|1>)|i, i> / sqrt(n)`
/// with every vector repeated according to its weight.
///
/// Fails with [`Error::Unbalanced`] when the weighted sum has norm above `tol`.
pub fn critical_diag_state(vectors: &[WeightedVector], tol: f64) -> Result<StateTensor> {
    let sum: Vector3<f64> = vectors.iter().map(|v| v.cartesian() * v.mult as f64).sum();
    if sum.norm() > tol {
        return Err(Error::Unbalanced(sum.norm()));
    }
    let n: usize = vectors.iter().map(|v| v.mult).sum();
    let scale = 1.0 / (n as f64).sqrt();
    let mut entries = Vec::new();
    let mut i = 0;
    for v in vectors {
        let half = v.theta / 2.0;
        for _ in 0..v.mult {
            entries.push(([0, i, i], Complex64::from_polar(half.sin() * scale, v.phi)));
            entries.push(([1, i, i], Complex64::new(half.cos() * scale, 0.0)));
            i += 1;
        }
    }
    StateTensor::from_entries(n, n, &entries)
}

fn chain_amplitude(m: usize, i: usize, j: usize, k: usize) -> f64 {
    let norm = 1.0 / ((m + 1) as f64).sqrt();
    match i {
        0 if k == j => ((m - j) as f64 / m as f64).sqrt() * norm,
        1 if k == j + 1 => ((j + 1) as f64 / m as f64).sqrt() * norm,
        _ => 0.0,
    }
}

/// The critical state of `2 x m x (m+1)`, whose pencil is a single `L_m` block.
pub fn critical_2m_mplus1(m: usize) -> Result<StateTensor> {
    critical_tensor_product(m, m + 1)
}

/// Critical state of `2 x m x n` for `(n - m) | m`: the chain state of
/// `2 x q x (q+1)` with `q = m / (n - m)`, tensored with a maximally entangled
/// pair of dimension `n - m` shared by the two qudits.
///
/// Qudit indices are `j = j1 (n - m) + j2` and `k = k1 (n - m) + k2`.
pub fn critical_tensor_product(m: usize, n: usize) -> Result<StateTensor> {
    if m < 2 || n <= m || m % (n - m) != 0 {
        return Err(Error::PreconditionViolated(format!(
            "need n > m >= 2 with (n - m) dividing m, got m={m}, n={n}"
        )));
    }
    let d = n - m;
    let q = m / d;
    let pair = 1.0 / (d as f64).sqrt();
    let mut entries = Vec::new();
    for i in 0..2 {
        for j1 in 0..q {
            for k1 in 0..=q {
                let a = chain_amplitude(q, i, j1, k1);
                if a == 0.0 {
                    continue;
                }
                for r in 0..d {
                    entries.push(([i, j1 * d + r, k1 * d + r], Complex64::new(a * pair, 0.0)));
                }
            }
        }
    }
    StateTensor::from_entries(m, n, &entries)
}

/// Eigenvalues, one per multiplicity, whose weighted sphere points sum to zero.
///
/// Two equal weights give `0` and `inf`.  Otherwise the points start as roots
/// of unity on the equator and are balanced by [`balance`].
pub fn balanced_eigenvalues(mults: &[usize]) -> Result<Vec<EigenvalueLocus>> {
    if mults.is_empty() || mults.contains(&0) || !diagonal_type(mults).is_polystable() {
        return Err(Error::PreconditionViolated(format!("multiplicities {mults:?} admit no critical diagonal state")));
    }
    if mults.len() == 2 {
        return Ok(vec![EigenvalueLocus::real(0.0), EigenvalueLocus::Infinity]);
    }
    let l = mults.len();
    let start: Vec<WeightedVector> = mults
        .iter()
        .enumerate()
        .map(|(i, &m)| WeightedVector { theta: PI / 2.0, phi: TAU * i as f64 / l as f64, mult: m })
        .collect();
    let point = balance(&start, 1e-24)?;
    Ok(point.vectors.iter().map(|v| vector_to_eigenvalue(v).cleaned()).collect())
}
