//! Simulation oracles: fixed-step RK4 on `ż = A z + b v(t)` under sampled and extremal
//! inputs, and Monte Carlo containment checks against the computed reach set.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{contains, Coords, ReachSet, SupportTable, WeylPoint};
use crate::envelope::InputEnvelope;
use crate::error::{ReachError, Result};
use crate::format::sig12;
use crate::lti_model::{CanonicalForm, LtiProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    PiecewiseConstant,
    ClippedSmooth,
    BangBang,
}

/// An admissible input signal on `[0, t_final]`.
#[derive(Debug, Clone)]
pub enum InputPath<'a> {
    /// `values[i]` on `[i h, (i+1) h)`, `h = t_final / values.len()`.
    PiecewiseConstant { t_final: f64, values: Vec<f64> },
    /// `mid + half · tanh(Σ a_k sin(ω_k s + φ_k))`.
    ClippedSmooth { v_min: f64, v_max: f64, terms: Vec<[f64; 3]> },
    /// `v_max` until the first switch, then alternating.
    BangBang { switches: Vec<f64>, v_min: f64, v_max: f64 },
    /// Canonical extremal input: `u_max(s)` until the first switch, then alternating
    /// with `u_min(s)`.
    EnvelopeBangBang { switches: Vec<f64>, envelope: &'a InputEnvelope },
}

impl InputPath<'_> {
    pub fn kind(&self) -> PathKind {
        match self {
            Self::PiecewiseConstant { .. } => PathKind::PiecewiseConstant,
            Self::ClippedSmooth { .. } => PathKind::ClippedSmooth,
            Self::BangBang { .. } | Self::EnvelopeBangBang { .. } => PathKind::BangBang,
        }
    }

    /// Constant input `v` on `[0, t_final]`.
    pub fn constant(v: f64, t_final: f64) -> InputPath<'static> {
        InputPath::PiecewiseConstant { t_final, values: vec![v] }
    }

    /// Switching times in `(0, t)` where the signal (or its derivative) jumps.
    pub fn breakpoints(&self, t: f64) -> Vec<f64> {
        let mut out = match self {
            Self::PiecewiseConstant { t_final, values } => {
                let h = t_final / values.len() as f64;
                (1..values.len()).map(|i| i as f64 * h).collect()
            }
            Self::ClippedSmooth { .. } => Vec::new(),
            Self::BangBang { switches, .. } => switches.clone(),
            Self::EnvelopeBangBang { switches, envelope } => {
                let mut v: Vec<f64> = envelope.s_grid.clone();
                v.extend_from_slice(switches);
                v
            }
        };
        out.retain(|&s| s > 0.0 && s < t);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn high_at(switches: &[f64], s: f64) -> bool {
        switches.iter().take_while(|&&w| w <= s).count() % 2 == 0
    }

    pub fn value(&self, s: f64) -> f64 {
        self.value_within(s, s)
    }

    /// Value at `s`, with the active piece chosen at `probe` (a point inside the same
    /// integration segment, so step endpoints see the segment's own piece).
    fn value_within(&self, s: f64, probe: f64) -> f64 {
        match self {
            Self::PiecewiseConstant { t_final, values } => {
                let i = ((probe / t_final) * values.len() as f64).floor().max(0.0) as usize;
                values[i.min(values.len() - 1)]
            }
            Self::ClippedSmooth { v_min, v_max, terms } => {
                let arg: f64 = terms.iter().map(|[a, w, p]| a * (w * s + p).sin()).sum();
                0.5 * (v_max + v_min) + 0.5 * (v_max - v_min) * arg.tanh()
            }
            Self::BangBang { switches, v_min, v_max } => {
                if Self::high_at(switches, probe) {
                    *v_max
                } else {
                    *v_min
                }
            }
            Self::EnvelopeBangBang { switches, envelope } => {
                if Self::high_at(switches, probe) {
                    envelope.u_max_at(s)
                } else {
                    envelope.u_min_at(s)
                }
            }
        }
    }
}

/// Endpoint of `ż = A z + b v(s)`, `z(0) = z0`, by RK4. Each segment between input
/// breakpoints gets an integer number of equal steps no longer than `dt_ode`.
pub fn integrate_lti(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    path: &InputPath<'_>,
    z0: &DVector<f64>,
    t: f64,
    dt_ode: f64,
) -> Result<DVector<f64>> {
    let mut last = z0.clone();
    simulate(a, b, path, z0, t, dt_ode, |_, z| last.copy_from(z))?;
    Ok(last)
}

/// Like [`integrate_lti`], calling `visit(time, state)` at `0` and after every step.
pub fn simulate(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    path: &InputPath<'_>,
    z0: &DVector<f64>,
    t: f64,
    dt_ode: f64,
    mut visit: impl FnMut(f64, &DVector<f64>),
) -> Result<()> {
    if dt_ode.is_nan() || dt_ode <= 0.0 || t.is_nan() || t < 0.0 {
        return Err(ReachError::Validation(format!("need dt_ode > 0 and t ≥ 0, got {dt_ode}, {t}")));
    }
    let n = z0.len();
    if a.shape() != (n, n) || b.len() != n {
        return Err(ReachError::WrongDimension { expected: n, got: b.len() });
    }
    let f = |z: &DVector<f64>, u: f64| a * z + b * u;
    let mut z = z0.clone();
    visit(0.0, &z);
    let mut knots = path.breakpoints(t);
    knots.insert(0, 0.0);
    knots.push(t);
    for seg in knots.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let steps = ((hi - lo) / dt_ode).ceil().max(1.0) as usize;
        let h = (hi - lo) / steps as f64;
        let probe = 0.5 * (lo + hi);
        for i in 0..steps {
            let s = lo + i as f64 * h;
            let s_end = if i + 1 == steps { hi } else { s + h };
            let (u0, um, u1) = (
                path.value_within(s, probe),
                path.value_within(s + 0.5 * h, probe),
                path.value_within(s_end, probe),
            );
            let k1 = f(&z, u0);
            let k2 = f(&(&z + &k1 * (0.5 * h)), um);
            let k3 = f(&(&z + &k2 * (0.5 * h)), um);
            let k4 = f(&(&z + &k3 * h), u1);
            z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            visit(s_end, &z);
        }
    }
    Ok(())
}

/// The chain-of-integrators drift `A_int` (ones on the superdiagonal).
pub fn integrator_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// Canonical endpoint under the extremal input that starts on `u_max` and switches at `σ`.
pub fn bang_bang_endpoint(
    envelope: &InputEnvelope,
    x0: &DVector<f64>,
    sigma: &WeylPoint,
    t: f64,
    dt_ode: f64,
) -> Result<DVector<f64>> {
    let n = x0.len();
    let path = InputPath::EnvelopeBangBang { switches: sigma.as_slice().to_vec(), envelope };
    let mut e_n = DVector::zeros(n);
    e_n[n - 1] = 1.0;
    integrate_lti(&integrator_matrix(n), &e_n, &path, x0, t, dt_ode)
}

/// Random admissible path of the requested kind on `[0, t_final]`. Bang-bang paths get
/// `n - 1` switches and start on either bound with equal probability.
pub fn sample_input_path<R: Rng>(kind: PathKind, problem: &LtiProblem, rng: &mut R) -> InputPath<'static> {
    let (v_min, v_max, t) = (problem.v_min, problem.v_max, problem.t_final);
    match kind {
        PathKind::PiecewiseConstant => InputPath::PiecewiseConstant {
            t_final: t,
            values: (0..30).map(|_| sample_in(rng, v_min, v_max)).collect(),
        },
        PathKind::ClippedSmooth => {
            let count = 8;
            let terms = (0..count)
                .map(|_| {
                    let amp = 3.0 * (2.0 * rng.random::<f64>() - 1.0) / (count as f64).sqrt();
                    let omega = rng.random::<f64>() * 6.0 * std::f64::consts::PI / t;
                    let phase = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
                    [amp, omega, phase]
                })
                .collect();
            InputPath::ClippedSmooth { v_min, v_max, terms }
        }
        PathKind::BangBang => {
            let mut switches: Vec<f64> = (0..problem.dim().saturating_sub(1)).map(|_| rng.random::<f64>() * t).collect();
            switches.sort_by(f64::total_cmp);
            if rng.random::<bool>() {
                switches.insert(0, 0.0);
            }
            InputPath::BangBang { switches, v_min, v_max }
        }
    }
}

fn sample_in<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub sample_id: usize,
    pub kind: PathKind,
    pub margin: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentReport {
    pub samples: usize,
    pub t: f64,
    pub seed: u64,
    pub directions: usize,
    pub violations: Vec<Violation>,
    /// Largest `max_y ⟨y, z⟩ - h(y)` over all endpoints; negative when all are interior.
    pub worst_margin: Option<f64>,
    #[serde(skip)]
    pub endpoints: Vec<DVector<f64>>,
}

impl ContainmentReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Kind of Monte Carlo sample `i`: the three samplers in rotation.
pub fn kind_for(i: usize) -> PathKind {
    [PathKind::ClippedSmooth, PathKind::PiecewiseConstant, PathKind::BangBang][i % 3]
}

/// Simulate `samples` endpoints in original coordinates and test each against the
/// support function at `tol = containment_tol · (1 + ‖z‖)`. Sample `i` draws from its
/// own ChaCha stream, so the result does not depend on scheduling.
pub fn monte_carlo_containment(
    problem: &LtiProblem,
    canonical: &CanonicalForm,
    reach: &ReachSet<'_>,
    samples: usize,
    seed: u64,
) -> Result<ContainmentReport> {
    let settings = &problem.settings;
    let n = problem.dim();
    let directions = settings.sphere_samples_for(n);
    let t = reach.t();
    let horizon_problem = LtiProblem { t_final: t, ..problem.clone() };
    let endpoints: Vec<DVector<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let path = sample_input_path(kind_for(i), &horizon_problem, &mut rng);
            integrate_lti(&problem.a, &problem.b, &path, &problem.z0, t, settings.ode_dt)
        })
        .collect::<Result<_>>()?;
    let mut report = ContainmentReport {
        samples,
        t,
        seed,
        directions,
        violations: Vec::new(),
        worst_margin: None,
        endpoints: Vec::new(),
    };
    if samples == 0 {
        return Ok(report);
    }
    let table = SupportTable::new(reach, Coords::Original, Some(canonical), directions, settings.seed)?;
    let checks: Vec<(f64, f64)> = endpoints
        .par_iter()
        .map(|z| {
            let tol = settings.containment_tol * (1.0 + z.norm());
            contains(z, &table, tol).map(|c| (c.violation, tol))
        })
        .collect::<Result<_>>()?;
    for (i, &(margin, tol)) in checks.iter().enumerate() {
        if margin > tol {
            report.violations.push(Violation { sample_id: i, kind: kind_for(i), margin, tol });
        }
    }
    report.worst_margin = checks.iter().map(|c| c.0).reduce(f64::max);
    report.endpoints = endpoints;
    Ok(report)
}

/// CSV `sample_id,time,z_1..z_n`, one row every `stride` RK4 steps plus the endpoint.
pub fn trajectory_csv(problem: &LtiProblem, paths: &[InputPath<'_>], stride: usize) -> Result<String> {
    let n = problem.dim();
    let mut out = String::from("sample_id,time");
    for k in 1..=n {
        out.push_str(&format!(",z_{k}"));
    }
    out.push('\n');
    let stride = stride.max(1);
    for (id, path) in paths.iter().enumerate() {
        let mut rows: Vec<(f64, DVector<f64>)> = Vec::new();
        let mut last = (0.0, problem.z0.clone());
        let mut count = 0usize;
        simulate(&problem.a, &problem.b, path, &problem.z0, problem.t_final, problem.settings.ode_dt, |s, z| {
            if count.is_multiple_of(stride) {
                rows.push((s, z.clone()));
            }
            count += 1;
            last = (s, z.clone());
        })?;
        if rows.last().map(|r| r.0) != Some(last.0) {
            rows.push(last);
        }
        for (s, z) in rows {
            out.push_str(&format!("{id},{}", sig12(s)));
            for v in z.iter() {
                out.push(',');
                out.push_str(&sig12(*v));
            }
            out.push('\n');
        }
    }
    Ok(out)
}

/// Convex hull (counter-clockwise, not closed) by the monotone chain.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}
