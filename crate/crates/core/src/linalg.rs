//! Small dense kernels for the n ≤ ~10 matrices this crate works with.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Outcome of a Gauss-Jordan inversion that hit a pivot below the threshold.
#[derive(Debug, Clone, Copy)]
pub struct SingularPivot {
    pub pivot: f64,
    pub threshold: f64,
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
///
/// Fails when the best available pivot in some column is smaller than
/// `rel_tol * max|m_ij|`.
pub fn invert(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>, SingularPivot> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "invert: matrix must be square");
    let threshold = rel_tol * max_abs(m);
    let mut a = m.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for col in 0..n {
        let (piv_row, piv_val) = (col..n)
            .map(|r| (r, a[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_val <= threshold || piv_val == 0.0 {
            return Err(SingularPivot { pivot: piv_val, threshold });
        }
        if piv_row != col {
            a.swap_rows(piv_row, col);
            inv.swap_rows(piv_row, col);
        }
        let p = a[(col, col)];
        for j in 0..n {
            a[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[(r, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[(r, j)] -= f * a[(col, j)];
                inv[(r, j)] -= f * inv[(col, j)];
            }
        }
    }
    Ok(inv)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "determinant: matrix must be square");
    let mut a = m.clone();
    let mut det = 1.0;
    for col in 0..n {
        let piv_row = (col..n)
            .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
            .unwrap_or(col);
        let p = a[(piv_row, col)];
        if p == 0.0 {
            return 0.0;
        }
        if piv_row != col {
            a.swap_rows(piv_row, col);
            det = -det;
        }
        det *= p;
        for r in col + 1..n {
            let f = a[(r, col)] / p;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[(r, j)] -= f * a[(col, j)];
            }
        }
    }
    det
}

/// Characteristic coefficients `c_0..c_{n-1}` of `det(λI - A) = λ^n + c_{n-1}λ^{n-1} + … + c_0`
/// via the Faddeev–LeVerrier recursion.
pub fn faddeev_leverrier(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "faddeev_leverrier: matrix must be square");
    let mut c = vec![0.0; n];
    let ident = DMatrix::<f64>::identity(n, n);
    // M_k = A M_{k-1} + c_{n-k+1} I with M_0 = 0, c_n = 1.
    let mut mk = DMatrix::<f64>::zeros(n, n);
    let mut prev_coeff = 1.0;
    for k in 1..=n {
        mk = a * &mk + &ident * prev_coeff;
        let am = a * &mk;
        let coeff = -am.trace() / k as f64;
        c[n - k] = coeff;
        prev_coeff = coeff;
    }
    c
}

/// Evaluate the monic polynomial `λ^n + Σ c_k λ^k` and its derivative at `z` by Horner.
pub fn monic_eval(c: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

/// All complex roots of the monic polynomial with coefficients `c` (low order first),
/// by Aberth–Ehrlich simultaneous iteration followed by Newton polishing.
pub fn monic_roots(c: &[f64]) -> Vec<Complex64> {
    let n = c.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Complex64::new(-c[0], 0.0)];
    }
    // Start on a circle between the geometric-mean root radius and the Cauchy bound.
    let cauchy = 1.0 + c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let r0 = cauchy.min(c[0].abs().powf(1.0 / n as f64).max(1e-2) * 1.5);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let ang = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4;
            Complex64::from_polar(r0, ang)
        })
        .collect();

    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let (p, dp) = monic_eval(c, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut repulse = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() > 0.0 {
                        repulse += d.inv();
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - ratio * repulse;
            let step = if denom.norm() > 0.0 { ratio / denom } else { ratio };
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }

    for zi in z.iter_mut() {
        for _ in 0..4 {
            let (p, dp) = monic_eval(c, *zi);
            if dp.norm() == 0.0 || p.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if !step.is_finite() {
                break;
            }
            *zi -= step;
            if step.norm() <= 1e-17 * (1.0 + zi.norm()) {
                break;
            }
        }
    }
    z
}
