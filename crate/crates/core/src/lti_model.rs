//! Problem definition and the change of coordinates to controllable canonical form.
//!
//! For a controllable single-input pair `(A, b)` let `q^T` be the last row of the inverse
//! controllability matrix. Stacking `q^T, q^T A, …, q^T A^{n-1}` gives `M`, and `x = M z`
//! turns `ż = A z + b v` into `ẋ = A_con x + b_con v` with `A_con` a companion matrix and
//! `b_con = e_n`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ReachError, Result};
use crate::linalg;

/// Relative pivot threshold below which the controllability matrix is declared singular.
pub const CONTROLLABILITY_PIVOT_TOL: f64 = 1e-12;
/// Largest off-pattern entry of `M A M^-1` accepted before it is snapped to companion form.
pub const STRUCTURE_TOL: f64 = 1e-8;

/// Numerical knobs shared by every stage of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericalSettings {
    /// Time-grid and quadrature step.
    pub dt: f64,
    /// Root residual tolerance for kernel zeros, relative to `1 + max|φ|`.
    pub zero_tol: f64,
    /// Relative eigenvalue separation below which eigenvalues count as repeated.
    pub distinct_tol: f64,
    /// Allowed relative imaginary residue of quantities that must be real.
    pub imag_tol: f64,
    /// Switching-parameter grid points per axis.
    pub sigma_grid: usize,
    /// Blend-parameter quadrature points for the volume integral.
    pub lambda_grid: usize,
    /// Direction count for membership tests; `None` picks 720 in 2D and 2000 otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere_samples: Option<usize>,
    pub seed: u64,
    /// RK4 step for bulk Monte Carlo simulation.
    pub ode_dt: f64,
    /// Membership tolerance, scaled by `1 + ‖point‖`.
    pub containment_tol: f64,
}

impl Default for NumericalSettings {
    fn default() -> Self {
        Self {
            dt: 0.01,
            zero_tol: 1e-12,
            distinct_tol: 1e-8,
            imag_tol: 1e-9,
            sigma_grid: 200,
            lambda_grid: 200,
            sphere_samples: None,
            seed: 0,
            ode_dt: 1e-3,
            containment_tol: 1e-5,
        }
    }
}

impl NumericalSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("zero_tol", self.zero_tol),
            ("distinct_tol", self.distinct_tol),
            ("imag_tol", self.imag_tol),
            ("ode_dt", self.ode_dt),
            ("containment_tol", self.containment_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ReachError::Validation(format!("{name} must be a positive finite number, got {v}")));
            }
        }
        if self.sigma_grid < 2 || self.lambda_grid < 2 {
            return Err(ReachError::Validation(format!(
                "sigma_grid and lambda_grid must be >= 2, got {} and {}",
                self.sigma_grid, self.lambda_grid
            )));
        }
        if let Some(k) = self.sphere_samples {
            if k < 2 {
                return Err(ReachError::Validation(format!("sphere_samples must be >= 2, got {k}")));
            }
        }
        Ok(())
    }

    /// Direction count used for membership tests in dimension `n`.
    pub fn sphere_samples_for(&self, n: usize) -> usize {
        self.sphere_samples.unwrap_or(match n {
            0 | 1 => 2,
            2 => 720,
            _ => 2000,
        })
    }
}

/// A single-input LTI system `ż = A z + b v` with `v ∈ [v_min, v_max]` on `[0, t_final]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub v_min: f64,
    pub v_max: f64,
    pub z0: DVector<f64>,
    pub t_final: f64,
    pub settings: NumericalSettings,
}

impl LtiProblem {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        v_min: f64,
        v_max: f64,
        z0: DVector<f64>,
        t_final: f64,
        settings: NumericalSettings,
    ) -> Result<Self> {
        let problem = Self { a, b, v_min, v_max, z0, t_final, settings };
        problem.validate()?;
        Ok(problem)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.b.len();
        if n == 0 {
            return Err(ReachError::Validation("state dimension must be at least 1".into()));
        }
        if self.a.nrows() != n || self.a.ncols() != n {
            return Err(ReachError::Validation(format!(
                "A is {}x{} but b has length {n}",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.z0.len() != n {
            return Err(ReachError::Validation(format!("z0 has length {} but n = {n}", self.z0.len())));
        }
        if self.a.iter().chain(self.b.iter()).chain(self.z0.iter()).any(|v| !v.is_finite()) {
            return Err(ReachError::Validation("A, b and z0 must have finite entries".into()));
        }
        if !(self.v_min.is_finite() && self.v_max.is_finite()) || self.v_min > self.v_max {
            return Err(ReachError::Validation(format!(
                "input bounds must satisfy v_min <= v_max, got [{}, {}]",
                self.v_min, self.v_max
            )));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(ReachError::Validation(format!("t_final must be positive, got {}", self.t_final)));
        }
        self.settings.validate()
    }
}

/// Result of the canonical transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub m: DMatrix<f64>,
    pub m_inv: DMatrix<f64>,
    /// Last row of the inverse controllability matrix.
    pub q: DVector<f64>,
    /// Characteristic coefficients `c_0..c_{n-1}`.
    pub c: DVector<f64>,
    pub a_con: DMatrix<f64>,
    pub b_con: DVector<f64>,
    /// Eigenvalues sorted by (re, im); all zero for a nilpotent `A`.
    pub eigs: Vec<Complex64>,
    pub det_m: f64,
    /// `true` when every characteristic coefficient vanishes (`A` nilpotent, `φ ≡ 0`).
    pub nilpotent: bool,
}

impl CanonicalForm {
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn to_canonical(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.m * z
    }

    pub fn to_original(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.m_inv * x
    }
}

/// `[b, A b, …, A^{n-1} b]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let n = b.len();
    assert_eq!(a.nrows(), n, "controllability_matrix: A and b disagree");
    let mut out = DMatrix::zeros(n, n);
    let mut col = b.clone();
    for k in 0..n {
        out.set_column(k, &col);
        col = a * col;
    }
    out
}

/// Companion matrix with super-diagonal ones and last row `-c^T`.
pub fn companion_matrix(c: &DVector<f64>) -> DMatrix<f64> {
    let n = c.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -c[j];
    }
    a
}

pub fn char_poly_coeffs(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_vec(linalg::faddeev_leverrier(a))
}

/// Eigenvalues of `A` as roots of its characteristic polynomial.
///
/// Sorted by (re, im), conjugate pairs symmetrized. Fails with `RepeatedEigenvalues`
/// when two eigenvalues are closer than `distinct_tol * max(1, max|λ|)`.
pub fn eigenvalues(a: &DMatrix<f64>, distinct_tol: f64) -> Result<Vec<Complex64>> {
    let c = linalg::faddeev_leverrier(a);
    let eigs = roots_from_coeffs(&c);
    check_distinct(&c, &eigs, distinct_tol)?;
    Ok(eigs)
}

fn roots_from_coeffs(c: &[f64]) -> Vec<Complex64> {
    let roots = linalg::monic_roots(c);
    let mut eigs = symmetrize_conjugates(c, roots);
    eigs.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    eigs
}

fn check_distinct(c: &[f64], eigs: &[Complex64], distinct_tol: f64) -> Result<()> {
    let scale = eigs.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
    let threshold = distinct_tol * scale;
    let mut separation = f64::INFINITY;
    let mut unresolved = false;
    for i in 0..eigs.len() {
        for j in i + 1..eigs.len() {
            let d = (eigs[i] - eigs[j]).norm();
            separation = separation.min(d);
            if d < 1e-4 * scale && !pair_resolved(c, eigs[i], eigs[j], threshold) {
                unresolved = true;
            }
        }
    }
    if separation <= threshold || unresolved {
        return Err(ReachError::RepeatedEigenvalues { separation, threshold });
    }
    Ok(())
}

/// A close root pair is resolved when `p` at its midpoint sits clearly above rounding
/// noise; otherwise the coefficients cannot tell it from a double root.
fn pair_resolved(c: &[f64], a: Complex64, b: Complex64, threshold: f64) -> bool {
    let m = (a + b) * 0.5;
    let (mut p, mut dp, mut ddp) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    let mut magnitude = 1.0;
    for &ck in c.iter().rev() {
        ddp = ddp * m + dp * 2.0;
        dp = dp * m + p;
        p = p * m + ck;
        magnitude = magnitude * m.norm() + ck.abs();
    }
    let curvature = 0.5 * ddp.norm();
    if curvature == 0.0 {
        return true;
    }
    let implied = 2.0 * (p.norm() / curvature).sqrt();
    let noise = 2.0 * (8.0 * f64::EPSILON * magnitude / curvature).sqrt();
    implied > threshold.max(4.0 * noise)
}

/// Force exact conjugate pairing: near-real roots get `im = 0` (then a real Newton
/// polish), the rest are matched with their nearest conjugate and averaged.
fn symmetrize_conjugates(c: &[f64], roots: Vec<Complex64>) -> Vec<Complex64> {
    let scale = roots.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
    let real_tol = 1e-9 * scale;
    let mut out = Vec::with_capacity(roots.len());
    let mut upper: Vec<Complex64> = Vec::new();
    let mut lower: Vec<Complex64> = Vec::new();
    for z in roots {
        if z.im.abs() <= real_tol {
            out.push(Complex64::new(polish_real(c, z.re), 0.0));
        } else if z.im > 0.0 {
            upper.push(z);
        } else {
            lower.push(z);
        }
    }
    for z in upper {
        let best = lower
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (z - a.conj()).norm().total_cmp(&(z - b.conj()).norm()))
            .map(|(i, _)| i);
        match best {
            Some(i) => {
                let partner = lower.swap_remove(i);
                let avg = (z + partner.conj()) * 0.5;
                out.push(avg);
                out.push(avg.conj());
            }
            None => out.push(Complex64::new(polish_real(c, z.re), 0.0)),
        }
    }
    for z in lower {
        out.push(Complex64::new(polish_real(c, z.re), 0.0));
    }
    out
}

fn polish_real(c: &[f64], mut x: f64) -> f64 {
    for _ in 0..3 {
        let (p, dp) = linalg::monic_eval(c, Complex64::new(x, 0.0));
        if dp.re == 0.0 {
            break;
        }
        let step = p.re / dp.re;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    x
}

/// Build `M`, `M^-1`, the companion pair and the spectrum for `problem`.
pub fn canonical_transform(problem: &LtiProblem) -> Result<CanonicalForm> {
    let a = &problem.a;
    let b = &problem.b;
    let n = b.len();
    let ctrb = controllability_matrix(a, b);
    let ctrb_inv = linalg::invert(&ctrb, CONTROLLABILITY_PIVOT_TOL)
        .map_err(|e| ReachError::NotControllable { pivot: e.pivot, threshold: e.threshold })?;
    let q: DVector<f64> = ctrb_inv.row(n - 1).transpose();

    let mut m = DMatrix::zeros(n, n);
    let mut row = q.transpose();
    for k in 0..n {
        m.set_row(k, &row);
        row = &row * a;
    }
    let m_inv = linalg::invert(&m, CONTROLLABILITY_PIVOT_TOL)
        .map_err(|e| ReachError::NotControllable { pivot: e.pivot, threshold: e.threshold })?;

    let scale = linalg::max_abs(a).max(1.0);
    let mut c = char_poly_coeffs(a);
    let nilpotent = c
        .iter()
        .enumerate()
        .all(|(k, ck)| ck.abs() <= 1e-14 * scale.powi((n - k) as i32));
    if nilpotent {
        c.fill(0.0);
    }

    let raw = &m * a * &m_inv;
    let target = companion_matrix(&c);
    let deviation = (&raw - &target).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let limit = STRUCTURE_TOL * scale;
    if deviation > limit {
        return Err(ReachError::StructureViolation { deviation, limit });
    }

    let mut b_con = DVector::zeros(n);
    b_con[n - 1] = 1.0;

    let eigs = if nilpotent {
        vec![Complex64::new(0.0, 0.0); n]
    } else {
        let eigs = roots_from_coeffs(c.as_slice());
        check_distinct(c.as_slice(), &eigs, problem.settings.distinct_tol)?;
        eigs
    };

    let det_m = linalg::determinant(&m);
    Ok(CanonicalForm { m, m_inv, q, c, a_con: target, b_con, eigs, det_m, nilpotent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn controllability_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, -0.3, 0.1]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let c = controllability_matrix(&a, &b);
        assert_abs_diff_eq!(c, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 2.0, -0.1]), epsilon = 1e-15);

        let zero = DMatrix::zeros(2, 2);
        let e2 = DVector::from_vec(vec![0.0, 1.0]);
        assert_eq!(controllability_matrix(&zero, &e2), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));

        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let ident = DMatrix::identity(2, 2);
        assert_eq!(controllability_matrix(&ident, &e1), DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn example_system_matches_published_transform() {
        let cf = canonical_transform(&fixtures::planar_oscillator(3.0)).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[20.0 / 11.0, -10.0 / 11.0, 5.0 / 11.0, 3.0 / 11.0]);
        let m_inv = DMatrix::from_row_slice(2, 2, &[0.3, 1.0, -0.5, 2.0]);
        assert_abs_diff_eq!(cf.m, m, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.m_inv, m_inv, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.c[0], 0.07, epsilon = 1e-15);
        assert_abs_diff_eq!(cf.c[1], -0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(cf.det_m, 10.0 / 11.0, epsilon = 1e-14);
    }

    #[test]
    fn brunovsky_pair_is_its_own_canonical_form() {
        let cf = canonical_transform(&fixtures::chain_integrator(3, 1.0)).unwrap();
        assert_abs_diff_eq!(cf.m, DMatrix::identity(3, 3), epsilon = 1e-15);
        assert!(cf.nilpotent);
        assert!(cf.c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn literal_zero_dynamics_is_not_controllable() {
        let p = LtiProblem::new(
            DMatrix::zeros(2, 2),
            DVector::from_vec(vec![0.0, 1.0]),
            -1.0,
            1.0,
            DVector::zeros(2),
            1.0,
            NumericalSettings::default(),
        )
        .unwrap();
        assert!(matches!(canonical_transform(&p), Err(ReachError::NotControllable { .. })));
    }

    #[test]
    fn repeated_spectrum_is_rejected() {
        // diag(2, 2) plus a nilpotent part: controllable but a double eigenvalue
        let p = LtiProblem::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            -1.0,
            1.0,
            DVector::zeros(2),
            1.0,
            NumericalSettings::default(),
        )
        .unwrap();
        assert!(matches!(canonical_transform(&p), Err(ReachError::RepeatedEigenvalues { .. })));
    }

    #[test]
    fn twisted_cubic_system_coefficients_annihilate_spectrum() {
        let p = fixtures::twisted_three_state(2.0);
        let cf = canonical_transform(&p).unwrap();
        // det(λI - A) evaluated directly at a few points
        for lam in [-1.5, 0.3, 2.0] {
            let det = linalg::determinant(&(DMatrix::identity(3, 3) * lam - &p.a));
            let (poly, _) = linalg::monic_eval(cf.c.as_slice(), Complex64::new(lam, 0.0));
            assert_abs_diff_eq!(poly.re, det, epsilon = 1e-9 * det.abs().max(1.0));
        }
        for z in &cf.eigs {
            let (poly, _) = linalg::monic_eval(cf.c.as_slice(), *z);
            assert!(poly.norm() < 1e-9 * (1.0 + z.norm().powi(3)), "p({z}) = {poly}");
        }
    }

    #[test]
    fn example_eigenvalues_in_polar_form() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, -0.3, 0.1]);
        let eigs = eigenvalues(&a, 1e-8).unwrap();
        assert_eq!(eigs[0], eigs[1].conj());
        assert!((eigs[0].norm() - 0.2646).abs() < 5e-5);
        assert!((eigs[1].arg() - 1.1832).abs() < 5e-5);
    }

    #[test]
    fn simple_spectra() {
        let eigs = eigenvalues(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])), 1e-8).unwrap();
        assert_abs_diff_eq!(eigs[0].re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eigs[1].re, 1.0, epsilon = 1e-14);

        let cubic = companion_matrix(&DVector::from_vec(vec![-1.0, 1.0, -1.0]));
        let eigs = eigenvalues(&cubic, 1e-8).unwrap();
        let want = [Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)];
        for (g, w) in eigs.iter().zip(want) {
            assert!((g - w).norm() < 1e-13, "{eigs:?}");
        }
        assert!(matches!(
            eigenvalues(&DMatrix::identity(2, 2), 1e-8),
            Err(ReachError::RepeatedEigenvalues { .. })
        ));
        let close = eigenvalues(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0 + 1e-5])), 1e-8).unwrap();
        assert!((close[1].re - close[0].re - 1e-5).abs() < 1e-9);
    }

    #[test]
    fn char_poly_examples() {
        let c = char_poly_coeffs(&DMatrix::from_row_slice(2, 2, &[0.1, 0.2, -0.3, 0.1]));
        assert_abs_diff_eq!(c[0], 0.07, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1], -0.2, epsilon = 1e-15);
        assert!(char_poly_coeffs(&DMatrix::zeros(4, 4)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let s = NumericalSettings::default();
        let a = DMatrix::identity(2, 2);
        let b2 = DVector::from_vec(vec![1.0, 0.0]);
        let z2 = DVector::zeros(2);
        assert!(LtiProblem::new(a.clone(), DVector::zeros(3), -1.0, 1.0, z2.clone(), 1.0, s.clone()).is_err());
        assert!(LtiProblem::new(a.clone(), b2.clone(), 1.0, -1.0, z2.clone(), 1.0, s.clone()).is_err());
        assert!(LtiProblem::new(a.clone(), b2.clone(), -1.0, 1.0, z2.clone(), 0.0, s.clone()).is_err());
        let bad = NumericalSettings { sigma_grid: 1, ..s };
        assert!(LtiProblem::new(a, b2, -1.0, 1.0, z2, 1.0, bad).is_err());
    }
}
