//! Lebesgue volume of the reach set from the Jacobian of the boundary parameterization.
//!
//! `π(σ, λ) = λ x_upper(σ) + (1-λ) x_lower(σ)` covers the set once for `σ ∈ W_t`,
//! `λ ∈ [0, 1]`, and
//!
//! ```text
//! |det Dπ| = μ(σ_1)…μ(σ_{n-1}) · |4λ-2|^{n-1} · |det[ξ(t-σ_1) … ξ(t-σ_{n-1}) ζ(σ)]|
//! ```
//!
//! with `ζ = x_upper - x_lower`. Original-coordinate volume is `volume_X / |det M|`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{weyl_grid, ReachSet, WeylPoint};
use crate::companion::xi_into;
use crate::envelope::InputEnvelope;
use crate::error::{ReachError, Result};
use crate::linalg;
use crate::lti_model::{CanonicalForm, LtiProblem};

/// `|det Dπ|` at one chamber node with the `λ` factor divided out.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianSample {
    pub sigma: WeylPoint,
    /// `Π μ(σ_k) · |det[ξ(t-σ_1) … ζ]|`.
    pub base: f64,
}

impl JacobianSample {
    /// Full `|det Dπ|(σ, λ)`.
    pub fn at(&self, lambda: f64) -> f64 {
        self.base * lambda_factor(lambda, self.sigma.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeResult {
    #[serde(rename = "volume_Z")]
    pub volume_z: f64,
    #[serde(rename = "volume_X")]
    pub volume_x: f64,
    #[serde(rename = "det_M")]
    pub det_m: f64,
    pub sigma_grid: usize,
    pub lambda_grid: usize,
    pub dt: f64,
    #[serde(skip)]
    pub t: f64,
    #[serde(skip)]
    pub jacobian_grid: Vec<JacobianSample>,
}

/// `ζ(σ) = x_upper(σ) - x_lower(σ) = 2 (x_upper(σ) - η_t)`.
pub fn zeta(sigma: &WeylPoint, reach: &ReachSet<'_>) -> Result<DVector<f64>> {
    Ok(reach.switching_sum(sigma)? * 2.0)
}

fn lambda_factor(lambda: f64, power: usize) -> f64 {
    (4.0 * lambda - 2.0).abs().powi(power as i32)
}

fn jacobian_base(sigma: &WeylPoint, reach: &ReachSet<'_>) -> Result<f64> {
    let n = reach.dim();
    let z = zeta(sigma, reach)?;
    let env = reach.envelope();
    let mut cols = DMatrix::zeros(n, n);
    let mut buf = vec![0.0; n];
    let mut weight = 1.0;
    for (k, &s) in sigma.as_slice().iter().enumerate() {
        xi_into(reach.t() - s, &mut buf);
        cols.column_mut(k).copy_from_slice(&buf);
        weight *= env.mu_at(s);
    }
    cols.column_mut(n - 1).copy_from(&z);
    Ok(weight * linalg::determinant(&cols).abs())
}

/// `|det Dπ|(σ, λ)`.
pub fn jacobian_abs_det(sigma: &WeylPoint, lambda: f64, reach: &ReachSet<'_>) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(ReachError::Validation(format!("λ must lie in [0, 1], got {lambda}")));
    }
    Ok(jacobian_base(sigma, reach)? * lambda_factor(lambda, reach.dim() - 1))
}

fn trapezoid_weights(len: f64, nodes: usize) -> Vec<f64> {
    let h = len / (nodes - 1) as f64;
    (0..nodes).map(|i| if i == 0 || i + 1 == nodes { 0.5 * h } else { h }).collect()
}

/// Sum in a fixed binary-tree order, independent of thread scheduling.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        len if len <= 8 => xs.iter().sum(),
        len => {
            let (a, b) = xs.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Volume at the problem's final time with the problem's grids.
pub fn volume_reach_set(problem: &LtiProblem, envelope: &InputEnvelope, canonical: &CanonicalForm) -> Result<VolumeResult> {
    let s = &problem.settings;
    let x0 = canonical.to_canonical(&problem.z0);
    let reach = ReachSet::new(envelope, x0, problem.t_final)?;
    volume_of(&reach, canonical.det_m, s.sigma_grid, s.lambda_grid, s.dt)
}

/// Tensor-trapezoid quadrature over `W_t × [0, 1]`, the chamber handled by restricting
/// the cube grid to ordered tuples with weight `Π w_i / Π (multiplicity)!`.
pub fn volume_of(reach: &ReachSet<'_>, det_m: f64, sigma_grid: usize, lambda_grid: usize, dt: f64) -> Result<VolumeResult> {
    if sigma_grid < 2 || lambda_grid < 2 {
        return Err(ReachError::Validation("sigma_grid and lambda_grid must be at least 2".into()));
    }
    if det_m == 0.0 || !det_m.is_finite() {
        return Err(ReachError::Validation(format!("det M must be finite and nonzero, got {det_m}")));
    }
    let n = reach.dim();
    let t = reach.t();
    let sigma_w = trapezoid_weights(t, sigma_grid);
    let lambda_w = trapezoid_weights(1.0, lambda_grid);
    let lambda_integral = pairwise_sum(
        &lambda_w
            .iter()
            .enumerate()
            .map(|(i, w)| {
                // |4λ-2| at node i, symmetric in i ↔ N-1-i
                let gap = (2 * i).abs_diff(lambda_grid - 1) as f64;
                w * (2.0 * gap / (lambda_grid - 1) as f64).powi((n - 1) as i32)
            })
            .collect::<Vec<_>>(),
    );
    let grid = weyl_grid(t, n, sigma_grid)?;
    let index_of = |s: f64| -> usize { ((s / t) * (sigma_grid - 1) as f64).round() as usize };
    let samples: Vec<JacobianSample> = grid
        .into_par_iter()
        .map(|sigma| jacobian_base(&sigma, reach).map(|base| JacobianSample { sigma, base }))
        .collect::<Result<_>>()?;
    let terms: Vec<f64> = samples
        .par_iter()
        .map(|sample| {
            let mut weight = 1.0;
            let mut run = 1usize;
            let s = sample.sigma.as_slice();
            for (k, &v) in s.iter().enumerate() {
                weight *= sigma_w[index_of(v)];
                if k > 0 && s[k - 1] == v {
                    run += 1;
                    weight /= run as f64;
                } else {
                    run = 1;
                }
            }
            weight * sample.base
        })
        .collect();
    let volume_x = pairwise_sum(&terms) * lambda_integral;
    Ok(VolumeResult {
        volume_z: volume_x / det_m.abs(),
        volume_x,
        det_m,
        sigma_grid,
        lambda_grid,
        dt,
        t,
        jacobian_grid: samples,
    })
}

/// Shoelace area of a polygon (closed or open, either orientation).
pub fn polygon_area_2d(polygon: &[[f64; 2]]) -> f64 {
    let m = polygon.len();
    if m < 3 {
        return 0.0;
    }
    let twice: f64 = (0..m)
        .map(|i| {
            let (a, b) = (polygon[i], polygon[(i + 1) % m]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    0.5 * twice.abs()
}
