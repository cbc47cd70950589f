//! Bundled reference systems used by the tests, the acceptance suite and `reachkit demo`.

use nalgebra::{DMatrix, DVector};

use crate::lti_model::{LtiProblem, NumericalSettings};

fn build(a: DMatrix<f64>, b: Vec<f64>, bounds: (f64, f64), z0: Vec<f64>, t_final: f64) -> LtiProblem {
    LtiProblem::new(
        a,
        DVector::from_vec(b),
        bounds.0,
        bounds.1,
        DVector::from_vec(z0),
        t_final,
        NumericalSettings::default(),
    )
    .expect("bundled fixture is valid")
}

/// Lightly unstable planar oscillator `A = [[0.1, 0.2], [-0.3, 0.1]]`, `b = (1, 2)`,
/// `v ∈ [-0.2, 0.2]`, `z0 = 0`.
pub fn planar_oscillator(t_final: f64) -> LtiProblem {
    build(
        DMatrix::from_row_slice(2, 2, &[0.1, 0.2, -0.3, 0.1]),
        vec![1.0, 2.0],
        (-0.2, 0.2),
        vec![0.0, 0.0],
        t_final,
    )
}

/// Same as [`planar_oscillator`] with a nonzero initial state.
pub fn planar_oscillator_offset(t_final: f64) -> LtiProblem {
    let mut p = planar_oscillator(t_final);
    p.z0 = DVector::from_vec(vec![0.4, -0.3]);
    p
}

/// `n`-th order chain of integrators in Brunovsky form with `u ∈ [-1, 1]`, `x0 = 0`.
pub fn chain_integrator(n: usize, t_final: f64) -> LtiProblem {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    build(a, b, (-1.0, 1.0), vec![0.0; n], t_final)
}

/// Three-state system with one real and a pair of fast complex eigenvalues,
/// `A = [[6, 7, 2], [-4, -2, 1], [-5, 3, 2]]`, `b = e_1`.
pub fn twisted_three_state(t_final: f64) -> LtiProblem {
    build(
        DMatrix::from_row_slice(3, 3, &[6.0, 7.0, 2.0, -4.0, -2.0, 1.0, -5.0, 3.0, 2.0]),
        vec![1.0, 0.0, 0.0],
        (-1.0, 1.0),
        vec![0.0, 0.0, 0.0],
        t_final,
    )
}

/// Companion system of `λ³ - λ² + λ - 1` (eigenvalues `1, ±i`), `b = e_3`, `v ∈ [-1, 1]`.
pub fn unit_spectrum_cubic(t_final: f64) -> LtiProblem {
    build(
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, -1.0, 1.0]),
        vec![0.0, 0.0, 1.0],
        (-1.0, 1.0),
        vec![0.0, 0.0, 0.0],
        t_final,
    )
}

/// Damped three-state system whose kernel changes sign inside a short horizon,
/// with asymmetric bounds and a nonzero initial state.
pub fn damped_three_state(t_final: f64) -> LtiProblem {
    build(
        DMatrix::from_row_slice(3, 3, &[-0.5, 1.0, 0.0, -1.0, -0.5, 0.5, 0.0, 0.3, -1.2]),
        vec![0.0, 0.5, 1.0],
        (-0.5, 1.0),
        vec![0.2, -0.1, 0.3],
        t_final,
    )
}
