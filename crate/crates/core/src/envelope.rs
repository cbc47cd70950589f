//! Time-varying input range induced on the Brunovsky input.
//!
//! Under `u = -⟨c, x⟩ + v` the pointwise extremes of `u(s)` over all admissible `v` are
//! `u_{min/max}(s) = -⟨c, e^{s A_con} x0⟩ + I_{min/max}(s)` where `I_{min/max}` integrate the
//! kernel over its nonpositive and positive parts. Because the kernel depends on `(s, τ)`
//! only through `θ = s - τ`, both level-set integrals reduce to cumulative integrals
//! `F⁻(s) = ∫_0^s min(φ, 0)` and `F⁺(s) = ∫_0^s max(φ, 0)`, tabulated once.

use nalgebra::DVector;

use crate::companion::{expm_action_con, phi, Kernel};
use crate::error::{ReachError, Result};
use crate::format::sig12;
use crate::lti_model::{CanonicalForm, LtiProblem, NumericalSettings};

/// Which time the kernel is anchored to when forming the level-set integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeAnchor {
    /// `f(τ) = φ(s - τ)`: the envelope of the actual closed-loop input. Sound.
    Running,
    /// `f(τ) = φ(t - τ)` with `t` fixed for every `s`. Kept only to compare against
    /// values computed that way; it under-approximates the reach set.
    Horizon,
}

#[derive(Debug, Clone)]
pub struct InputEnvelope {
    pub s_grid: Vec<f64>,
    pub zeros: Vec<f64>,
    pub f_minus: Vec<f64>,
    pub f_plus: Vec<f64>,
    pub i_min: Vec<f64>,
    pub i_max: Vec<f64>,
    /// `⟨c, e^{s A_con} x0⟩` at each knot.
    pub offset: Vec<f64>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub v_min: f64,
    pub v_max: f64,
    pub step: f64,
    pub anchor: EnvelopeAnchor,
}

/// Envelope values at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSample {
    pub u_min: f64,
    pub u_max: f64,
    pub mu: f64,
    pub nu: f64,
}

impl InputEnvelope {
    pub fn horizon(&self) -> f64 {
        *self.s_grid.last().expect("grid is never empty")
    }

    pub fn len(&self) -> usize {
        self.s_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_grid.is_empty()
    }

    /// Cell `j` with `s_grid[j] <= s <= s_grid[j + 1]`, and the interpolation weight.
    #[inline]
    pub(crate) fn locate(&self, s: f64) -> (usize, f64) {
        let last = self.s_grid.len() - 1;
        if last == 0 {
            return (0, 0.0);
        }
        let mut j = ((s / self.step).floor().max(0.0) as usize).min(last - 1);
        while j > 0 && self.s_grid[j] > s {
            j -= 1;
        }
        while j + 1 < last && self.s_grid[j + 1] < s {
            j += 1;
        }
        let w = ((s - self.s_grid[j]) / (self.s_grid[j + 1] - self.s_grid[j])).clamp(0.0, 1.0);
        (j, w)
    }

    #[inline]
    fn interp(&self, table: &[f64], s: f64) -> f64 {
        let (j, w) = self.locate(s);
        if w == 0.0 || table.len() == 1 {
            table[j]
        } else {
            table[j] + w * (table[j + 1] - table[j])
        }
    }

    #[inline]
    pub fn mu_at(&self, s: f64) -> f64 {
        self.interp(&self.mu, s)
    }

    #[inline]
    pub fn nu_at(&self, s: f64) -> f64 {
        self.interp(&self.nu, s)
    }

    #[inline]
    pub fn u_min_at(&self, s: f64) -> f64 {
        self.interp(&self.u_min, s)
    }

    #[inline]
    pub fn u_max_at(&self, s: f64) -> f64 {
        self.interp(&self.u_max, s)
    }

    /// CSV with header `s,u_min,u_max,mu,nu`, one row per knot.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,u_min,u_max,mu,nu\n");
        for k in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                sig12(self.s_grid[k]),
                sig12(self.u_min[k]),
                sig12(self.u_max[k]),
                sig12(self.mu[k]),
                sig12(self.nu[k])
            ));
        }
        out
    }
}

/// Linear interpolation of the tabulated envelope; exact at knots.
pub fn envelope_at(envelope: &InputEnvelope, s: f64) -> Result<EnvelopeSample> {
    let horizon = envelope.horizon();
    let slack = 1e-12 * horizon.max(1.0);
    if !(s >= -slack && s <= horizon + slack) {
        return Err(ReachError::OutOfHorizon { s, horizon });
    }
    let s = s.clamp(0.0, horizon);
    Ok(EnvelopeSample {
        u_min: envelope.u_min_at(s),
        u_max: envelope.u_max_at(s),
        mu: envelope.mu_at(s),
        nu: envelope.nu_at(s),
    })
}

/// Uniform grid on `[0, horizon]` with step at most `dt` and `horizon` as a knot.
pub fn time_grid(horizon: f64, dt: f64) -> Vec<f64> {
    let cells = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let step = horizon / cells as f64;
    (0..=cells).map(|k| if k == cells { horizon } else { k as f64 * step }).collect()
}

/// Sign changes of `φ` on `[0, horizon]`, located by a scan at step `dt/10` and refined
/// by bisection. Tangential zeros without a sign change are not reported.
pub fn find_zeros_phi(kernel: &Kernel, horizon: f64, settings: &NumericalSettings) -> Result<Vec<f64>> {
    if kernel.nilpotent {
        return Ok(Vec::new());
    }
    let scan = time_grid(horizon, settings.dt / 10.0);
    let values: Vec<f64> = scan.iter().map(|&th| phi(th, kernel)).collect::<Result<_>>()?;
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(Vec::new());
    }
    let mut zeros = Vec::new();
    let mut k = 0;
    while k + 1 < scan.len() {
        let (fa, fb) = (values[k], values[k + 1]);
        if fa == 0.0 {
            // exact hit on a scan node: a root only if the neighbours straddle it
            if k > 0 && values[k - 1] * fb < 0.0 {
                zeros.push(scan[k]);
            }
        } else if fa * fb < 0.0 {
            zeros.push(bisect(kernel, scan[k], scan[k + 1], fa)?);
        }
        k += 1;
    }
    Ok(zeros)
}

fn bisect(kernel: &Kernel, mut lo: f64, mut hi: f64, f_lo: f64) -> Result<f64> {
    let lo_negative = f_lo < 0.0;
    let mut best = (lo, f_lo.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = phi(mid, kernel)?;
        if fm.abs() < best.1 {
            best = (mid, fm.abs());
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let f_hi = phi(hi, kernel)?.abs();
    if f_hi < best.1 {
        best = (hi, f_hi);
    }
    Ok(best.0)
}

/// Running cumulative integrals of the kernel's negative and positive parts on `grid`,
/// with `zeros` inserted as extra trapezoid knots. Ties `φ = 0` go to the negative part.
fn cumulative_split(kernel: &Kernel, grid: &[f64], zeros: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut f_minus = vec![0.0; grid.len()];
    let mut f_plus = vec![0.0; grid.len()];
    if kernel.nilpotent {
        return Ok((f_minus, f_plus));
    }
    let mut zi = 0;
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(4);
    let mut f_left = phi(grid[0], kernel)?;
    for k in 0..grid.len() - 1 {
        let (a, b) = (grid[k], grid[k + 1]);
        let f_right = phi(b, kernel)?;
        knots.clear();
        knots.push((a, f_left));
        while zi < zeros.len() && zeros[zi] <= a {
            zi += 1;
        }
        while zi < zeros.len() && zeros[zi] < b {
            knots.push((zeros[zi], phi(zeros[zi], kernel)?));
            zi += 1;
        }
        knots.push((b, f_right));
        let (mut neg, mut pos) = (0.0, 0.0);
        for w in knots.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x1 <= x0 {
                continue;
            }
            let piece = 0.5 * (y0 + y1) * (x1 - x0);
            if phi(0.5 * (x0 + x1), kernel)? > 0.0 {
                pos += piece;
            } else {
                neg += piece;
            }
        }
        f_minus[k + 1] = f_minus[k] + neg;
        f_plus[k + 1] = f_plus[k] + pos;
        f_left = f_right;
    }
    Ok((f_minus, f_plus))
}

/// Tabulate the Brunovsky input envelope on `[0, problem.t_final]`.
pub fn build_envelope(problem: &LtiProblem, canonical: &CanonicalForm, kernel: &Kernel) -> Result<InputEnvelope> {
    build_envelope_anchored(problem, canonical, kernel, problem.t_final, EnvelopeAnchor::Running)
}

/// As [`build_envelope`] on `[0, horizon]` with an explicit kernel anchor.
pub fn build_envelope_anchored(
    problem: &LtiProblem,
    canonical: &CanonicalForm,
    kernel: &Kernel,
    horizon: f64,
    anchor: EnvelopeAnchor,
) -> Result<InputEnvelope> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(ReachError::Validation(format!("envelope horizon must be positive, got {horizon}")));
    }
    let settings = &problem.settings;
    let s_grid = time_grid(horizon, settings.dt);
    let step = s_grid[1] - s_grid[0];
    let zeros = find_zeros_phi(kernel, horizon, settings)?;
    let (running_minus, running_plus) = cumulative_split(kernel, &s_grid, &zeros)?;
    let (f_minus, f_plus) = match anchor {
        EnvelopeAnchor::Running => (running_minus, running_plus),
        EnvelopeAnchor::Horizon => {
            // ∫_{[0,s]} φ(t - τ)^± dτ = F^±(t) - F^±(t - s); t - s_k is the knot N - k.
            let last = s_grid.len() - 1;
            let flip = |f: &[f64]| (0..=last).map(|k| f[last] - f[last - k]).collect::<Vec<_>>();
            (flip(&running_minus), flip(&running_plus))
        }
    };

    let (v_min, v_max) = (problem.v_min, problem.v_max);
    let x0 = canonical.to_canonical(&problem.z0);
    let offset = canonical_offsets(canonical, &x0, &s_grid);

    let len = s_grid.len();
    let mut i_min = Vec::with_capacity(len);
    let mut i_max = Vec::with_capacity(len);
    let mut u_min = Vec::with_capacity(len);
    let mut u_max = Vec::with_capacity(len);
    let mut mu = Vec::with_capacity(len);
    let mut nu = Vec::with_capacity(len);
    for k in 0..len {
        let lo = v_min - v_min * f_minus[k] - v_max * f_plus[k];
        let hi = v_max - v_max * f_minus[k] - v_min * f_plus[k];
        let umin = lo - offset[k];
        let umax = hi - offset[k];
        i_min.push(lo);
        i_max.push(hi);
        u_min.push(umin);
        u_max.push(umax);
        mu.push(0.5 * (hi - lo));
        nu.push(0.5 * (umax + umin));
    }
    Ok(InputEnvelope {
        s_grid,
        zeros,
        f_minus,
        f_plus,
        i_min,
        i_max,
        offset,
        u_min,
        u_max,
        mu,
        nu,
        v_min,
        v_max,
        step,
        anchor,
    })
}

/// `⟨c, e^{s A_con} x0⟩` on the grid.
fn canonical_offsets(canonical: &CanonicalForm, x0: &DVector<f64>, grid: &[f64]) -> Vec<f64> {
    if x0.iter().all(|&v| v == 0.0) || canonical.c.iter().all(|&v| v == 0.0) {
        return vec![0.0; grid.len()];
    }
    grid.iter().map(|&s| canonical.c.dot(&expm_action_con(s, x0, canonical))).collect()
}
