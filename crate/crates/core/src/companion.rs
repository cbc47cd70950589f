//! Companion-matrix exponential kernel and the integrator primitives `ξ`, `χ`.
//!
//! With distinct eigenvalues `λ_i` of `A` and `p'(λ_i) = Π_{j≠i}(λ_i - λ_j)`, the top-right
//! entry of `e^{θ A_con}` is `g(θ) = Σ_i e^{λ_i θ} / p'(λ_i)` and successive rows of the last
//! column are its derivatives. The scalar kernel
//! `φ(θ) = ⟨c, e^{θ A_con} b_con⟩ = -Σ_i λ_i^n e^{λ_i θ} / p'(λ_i)`
//! drives the whole input envelope.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{ReachError, Result};
use crate::lti_model::CanonicalForm;

#[derive(Debug, Clone)]
pub struct Kernel {
    pub eigs: Vec<Complex64>,
    /// `λ_i^n / p'(λ_i)`.
    pub weights: Vec<Complex64>,
    /// `p'(λ_i)`.
    pub pprime: Vec<Complex64>,
    pub imag_tol: f64,
    /// Set when `A` is nilpotent: `φ ≡ 0` and `g` is a monomial.
    pub nilpotent: bool,
}

impl Kernel {
    /// Kernel for a spectrum that is assumed distinct.
    pub fn from_eigenvalues(eigs: Vec<Complex64>, imag_tol: f64) -> Self {
        let n = eigs.len();
        let pprime: Vec<Complex64> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .fold(Complex64::new(1.0, 0.0), |acc, j| acc * (eigs[i] - eigs[j]))
            })
            .collect();
        let weights = eigs.iter().zip(&pprime).map(|(l, pp)| l.powu(n as u32) / pp).collect();
        Self { eigs, weights, pprime, imag_tol, nilpotent: false }
    }

    /// Kernel of a nilpotent companion matrix (all characteristic coefficients zero).
    pub fn nilpotent(n: usize, imag_tol: f64) -> Self {
        Self {
            eigs: vec![Complex64::new(0.0, 0.0); n],
            weights: vec![Complex64::new(0.0, 0.0); n],
            pprime: vec![Complex64::new(0.0, 0.0); n],
            imag_tol,
            nilpotent: true,
        }
    }

    pub fn new(canonical: &CanonicalForm, imag_tol: f64) -> Self {
        if canonical.nilpotent {
            Self::nilpotent(canonical.dim(), imag_tol)
        } else {
            Self::from_eigenvalues(canonical.eigs.clone(), imag_tol)
        }
    }

    pub fn dim(&self) -> usize {
        self.eigs.len()
    }

    fn real_part(&self, terms: impl Iterator<Item = Complex64>) -> Result<f64> {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut mag = 0.0_f64;
        for term in terms {
            sum += term;
            mag += term.norm();
        }
        let residue = sum.im.abs() / mag.max(1.0);
        if residue > self.imag_tol {
            return Err(ReachError::ImaginaryResidue { residue, tol: self.imag_tol });
        }
        Ok(sum.re)
    }
}

/// `φ(θ) = ⟨c, e^{θ A_con} b_con⟩`.
pub fn phi(theta: f64, kernel: &Kernel) -> Result<f64> {
    if kernel.nilpotent {
        return Ok(0.0);
    }
    kernel.real_part(
        kernel
            .eigs
            .iter()
            .zip(&kernel.weights)
            .map(|(l, w)| -w * (l * theta).exp()),
    )
}

/// `g^{(k)}(θ) = Σ_i λ_i^k e^{λ_i θ} / p'(λ_i)`, i.e. entry `k` of `e^{θ A_con} b_con`.
pub fn g_derivative(theta: f64, kernel: &Kernel, k: usize) -> Result<f64> {
    let n = kernel.dim();
    if k >= n {
        return Err(ReachError::WrongDimension { expected: n.saturating_sub(1), got: k });
    }
    if kernel.nilpotent {
        let p = n - 1 - k;
        return Ok(theta.powi(p as i32) / factorial(p));
    }
    kernel.real_part(
        kernel
            .eigs
            .iter()
            .zip(&kernel.pprime)
            .map(|(l, pp)| l.powu(k as u32) * (l * theta).exp() / pp),
    )
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// `e^{s A} x` for a small dense `A`, by scaling and a truncated Taylor series.
pub fn expm_action(a: &DMatrix<f64>, s: f64, x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    if s == 0.0 || n == 0 {
        return x.clone();
    }
    let norm1 = (0..n).map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let steps = ((norm1 * s.abs()) / 0.5).ceil().max(1.0) as usize;
    let h = s / steps as f64;
    let step = taylor_exp(&(a * h));
    let mut y = x.clone();
    for _ in 0..steps {
        y = &step * y;
    }
    y
}

/// `e^{B}` for `‖B‖₁ ≤ 1/2`; 20 terms leave a remainder below 1e-25.
pub(crate) fn taylor_exp(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=20 {
        term = (&term * b) / k as f64;
        sum += &term;
    }
    sum
}

/// `e^{s A_con} x`.
pub fn expm_action_con(s: f64, x: &DVector<f64>, canonical: &CanonicalForm) -> DVector<f64> {
    expm_action(&canonical.a_con, s, x)
}

/// `ξ(s)_k = s^{n-k} / (n-k)!`, the last column of `e^{s A_int}`.
pub fn xi(s: f64, n: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    xi_into(s, out.as_mut_slice());
    out
}

pub(crate) fn xi_into(s: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    // fill from the bottom: 1, s, s^2/2, ...
    let mut v = 1.0;
    out[n - 1] = 1.0;
    for p in 1..n {
        v *= s / p as f64;
        out[n - 1 - p] = v;
    }
}

/// `χ(t, x0) = e^{t A_int} x0`, i.e. `χ_k = Σ_{ℓ ≥ k} t^{ℓ-k} / (ℓ-k)! · x0_ℓ`.
pub fn chi(t: f64, x0: &DVector<f64>) -> DVector<f64> {
    let n = x0.len();
    DVector::from_fn(n, |k, _| {
        let mut acc = 0.0;
        let mut coeff = 1.0;
        for l in k..n {
            if l > k {
                coeff *= t / (l - k) as f64;
            }
            acc += coeff * x0[l];
        }
        acc
    })
}
