//! Parametric boundary, support function and membership tests of the integrator reach set.
//!
//! With `μ = (u_max - u_min)/2`, `ν = (u_max + u_min)/2` and `ξ` the last column of
//! `e^{s A_int}`, the reach set at time `t` from `x0` is centred at
//! `η_t = χ(t, x0) + ∫_0^t ν(s) ξ(t-s) ds` and its two bounding surfaces are
//!
//! ```text
//! x_upper(σ) = η_t + Σ_{k=1}^{n} (-1)^{k+1} ∫_{σ_{k-1}}^{σ_k} μ(s) ξ(t-s) ds
//! x_lower(σ) = 2 η_t - x_upper(σ)
//! ```
//!
//! over the ordered switching times `0 = σ_0 ≤ σ_1 ≤ … ≤ σ_{n-1} ≤ σ_n = t`. The upper
//! surface is the endpoint of the bang-bang input that starts on `u_max` and alternates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::companion::{chi, xi_into};
use crate::envelope::InputEnvelope;
use crate::error::{ReachError, Result};
use crate::lti_model::CanonicalForm;

/// Coordinate system of a point or direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coords {
    /// Brunovsky / canonical coordinates `x = M z`.
    Canonical,
    /// The user's coordinates `z`.
    Original,
}

/// Ordered switching times `0 ≤ σ_1 ≤ … ≤ σ_{n-1} ≤ t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylPoint(Vec<f64>);

impl WeylPoint {
    pub fn new(sigma: Vec<f64>, t: f64) -> Result<Self> {
        let slack = 1e-12 * t.max(1.0);
        let in_range = sigma.iter().all(|&s| s.is_finite() && s >= -slack && s <= t + slack);
        let ordered = sigma.windows(2).all(|w| w[0] <= w[1]);
        if !(in_range && ordered) {
            return Err(ReachError::SigmaOutOfChamber { sigma, t });
        }
        Ok(Self(sigma.into_iter().map(|s| s.clamp(0.0, t)).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    pub sigma: WeylPoint,
    pub x_upper: DVector<f64>,
    pub x_lower: DVector<f64>,
    /// Filled by [`to_original`].
    pub z_upper: Option<DVector<f64>>,
    pub z_lower: Option<DVector<f64>>,
    pub eta: DVector<f64>,
}

/// All ordered `(n-1)`-tuples from a uniform grid of `resolution` points on `[0, t]`,
/// in lexicographic order. `n = 1` yields the single empty tuple.
pub fn weyl_grid(t: f64, n: usize, resolution: usize) -> Result<Vec<WeylPoint>> {
    if n == 0 {
        return Err(ReachError::DimensionTooSmall("state dimension must be at least 1".into()));
    }
    if resolution < 2 {
        return Err(ReachError::DimensionTooSmall(format!("resolution must be >= 2, got {resolution}")));
    }
    let values: Vec<f64> = (0..resolution)
        .map(|i| if i + 1 == resolution { t } else { t * i as f64 / (resolution - 1) as f64 })
        .collect();
    let dim = n - 1;
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        out.push(WeylPoint(idx.iter().map(|&i| values[i]).collect()));
        // next non-decreasing index tuple
        let mut pos = dim;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            if idx[pos] + 1 < resolution {
                idx[pos] += 1;
                let v = idx[pos];
                for slot in idx.iter_mut().skip(pos + 1) {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// The integrator reach set at a fixed time `t`, with the quadrature tables it needs.
///
/// Integrals run over the envelope grid restricted to `[0, t]`, with `t` and any switching
/// time inserted as trapezoid knots; `μ` and `ν` are linearly interpolated between knots.
#[derive(Debug, Clone)]
pub struct ReachSet<'a> {
    envelope: &'a InputEnvelope,
    x0: DVector<f64>,
    t: f64,
    n: usize,
    knots: Vec<f64>,
    mu_k: Vec<f64>,
    /// `ξ(t - knot)`, `n` entries per knot.
    xi_k: Vec<f64>,
    /// `∫_0^{knot} μ(s) ξ(t - s) ds`, `n` entries per knot.
    cum_mu: Vec<f64>,
    eta: DVector<f64>,
}

impl<'a> ReachSet<'a> {
    pub fn new(envelope: &'a InputEnvelope, x0: DVector<f64>, t: f64) -> Result<Self> {
        let horizon = envelope.horizon();
        if !(t > 0.0 && t <= horizon * (1.0 + 1e-12)) {
            return Err(ReachError::OutOfHorizon { s: t, horizon });
        }
        let t = t.min(horizon);
        let n = x0.len();
        if n == 0 {
            return Err(ReachError::DimensionTooSmall("state dimension must be at least 1".into()));
        }
        let mut knots: Vec<f64> = envelope.s_grid.iter().copied().take_while(|&s| s < t).collect();
        knots.push(t);
        let m = knots.len();
        let mu_k: Vec<f64> = knots.iter().map(|&s| envelope.mu_at(s)).collect();
        let nu_k: Vec<f64> = knots.iter().map(|&s| envelope.nu_at(s)).collect();
        let mut xi_k = vec![0.0; m * n];
        for (j, &s) in knots.iter().enumerate() {
            xi_into(t - s, &mut xi_k[j * n..(j + 1) * n]);
        }
        let mut cum_mu = vec![0.0; m * n];
        let mut eta = chi(t, &x0);
        for j in 0..m - 1 {
            let h = knots[j + 1] - knots[j];
            for k in 0..n {
                let (a, b) = (xi_k[j * n + k], xi_k[(j + 1) * n + k]);
                cum_mu[(j + 1) * n + k] = cum_mu[j * n + k] + 0.5 * h * (mu_k[j] * a + mu_k[j + 1] * b);
                eta[k] += 0.5 * h * (nu_k[j] * a + nu_k[j + 1] * b);
            }
        }
        Ok(Self { envelope, x0, t, n, knots, mu_k, xi_k, cum_mu, eta })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn envelope(&self) -> &InputEnvelope {
        self.envelope
    }

    /// Centre `η_t` of the set.
    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    #[inline]
    fn cell(&self, s: f64) -> usize {
        self.envelope.locate(s).0.min(self.knots.len().saturating_sub(2))
    }

    /// `μ(s) ξ(t - s)` accumulated into `out` with weight `w`.
    #[inline]
    fn add_integrand(&self, s: f64, w: f64, out: &mut [f64]) {
        let mut buf = [0.0; 16];
        let scratch: &mut [f64] = if self.n <= 16 { &mut buf[..self.n] } else { &mut vec![0.0; self.n] };
        xi_into(self.t - s, scratch);
        let m = self.envelope.mu_at(s) * w;
        for (o, x) in out.iter_mut().zip(scratch.iter()) {
            *o += m * x;
        }
    }

    /// Trapezoid value of `∫_a^b μ(s) ξ(t-s) ds` with `a` and `b` inserted as knots.
    pub fn mu_integral(&self, a: f64, b: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        self.mu_integral_into(a, b, 1.0, out.as_mut_slice());
        out
    }

    fn mu_integral_into(&self, a: f64, b: f64, sign: f64, out: &mut [f64]) {
        if b <= a {
            return;
        }
        let n = self.n;
        let (ja, jb) = (self.cell(a), self.cell(b));
        if ja == jb {
            let h = 0.5 * (b - a) * sign;
            self.add_integrand(a, h, out);
            self.add_integrand(b, h, out);
            return;
        }
        let right_a = self.knots[ja + 1];
        let h = 0.5 * (right_a - a) * sign;
        self.add_integrand(a, h, out);
        for (k, o) in out.iter_mut().enumerate() {
            *o += h * self.mu_k[ja + 1] * self.xi_k[(ja + 1) * n + k];
            *o += sign * (self.cum_mu[jb * n + k] - self.cum_mu[(ja + 1) * n + k]);
        }
        let left_b = self.knots[jb];
        let h = 0.5 * (b - left_b) * sign;
        for (k, o) in out.iter_mut().enumerate() {
            *o += h * self.mu_k[jb] * self.xi_k[jb * n + k];
        }
        self.add_integrand(b, h, out);
    }

    /// `Σ_k (-1)^{k+1} ∫_{σ_{k-1}}^{σ_k} μ ξ`, i.e. `x_upper(σ) - η_t`.
    pub fn switching_sum(&self, sigma: &WeylPoint) -> Result<DVector<f64>> {
        if sigma.len() + 1 != self.n {
            return Err(ReachError::WrongDimension { expected: self.n - 1, got: sigma.len() });
        }
        let s = sigma.as_slice();
        if s.last().is_some_and(|&last| last > self.t) {
            return Err(ReachError::SigmaOutOfChamber { sigma: s.to_vec(), t: self.t });
        }
        let mut out = DVector::zeros(self.n);
        let mut left = 0.0;
        let mut sign = 1.0;
        for &right in s.iter().chain(std::iter::once(&self.t)) {
            self.mu_integral_into(left, right, sign, out.as_mut_slice());
            left = right;
            sign = -sign;
        }
        Ok(out)
    }

    /// Upper/lower boundary pair in canonical coordinates.
    pub fn boundary_pair(&self, sigma: &WeylPoint) -> Result<BoundarySample> {
        let offset = self.switching_sum(sigma)?;
        Ok(BoundarySample {
            sigma: sigma.clone(),
            x_upper: &self.eta + &offset,
            x_lower: &self.eta - &offset,
            z_upper: None,
            z_lower: None,
            eta: self.eta.clone(),
        })
    }

    /// Boundary pairs for every point of `grid`, mapped to original coordinates when a
    /// canonical form is given. Order follows `grid`.
    pub fn sweep(&self, grid: &[WeylPoint], canonical: Option<&CanonicalForm>) -> Result<Vec<BoundarySample>> {
        grid.par_iter()
            .map(|sigma| {
                let mut sample = self.boundary_pair(sigma)?;
                if let Some(cf) = canonical {
                    to_original(&mut sample, cf);
                }
                Ok(sample)
            })
            .collect()
    }

    /// `⟨ŷ, ξ(t - s)⟩` for a unit direction.
    #[inline]
    fn direction_poly(&self, y: &[f64], s: f64) -> f64 {
        let mut buf = [0.0; 16];
        let scratch: &mut [f64] = if self.n <= 16 { &mut buf[..self.n] } else { &mut vec![0.0; self.n] };
        xi_into(self.t - s, scratch);
        y.iter().zip(scratch.iter()).map(|(a, b)| a * b).sum()
    }

    /// Support function in canonical coordinates:
    /// `h(y) = ⟨y, η_t⟩ + ∫_0^t μ(s) |⟨y, ξ(t-s)⟩| ds`, sign changes of the polynomial
    /// inserted as knots.
    pub fn support(&self, y: &DVector<f64>) -> Result<f64> {
        if y.len() != self.n {
            return Err(ReachError::WrongDimension { expected: self.n, got: y.len() });
        }
        let norm = y.norm();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(ReachError::ZeroDirection);
        }
        let unit: Vec<f64> = y.iter().map(|v| v / norm).collect();
        let n = self.n;
        let m = self.knots.len();
        let poly: Vec<f64> = (0..m)
            .map(|j| unit.iter().zip(&self.xi_k[j * n..(j + 1) * n]).map(|(a, b)| a * b).sum())
            .collect();
        let mut integral = 0.0;
        for j in 0..m - 1 {
            let (a, b) = (self.knots[j], self.knots[j + 1]);
            let (pa, pb) = (poly[j], poly[j + 1]);
            let (fa, fb) = (self.mu_k[j] * pa.abs(), self.mu_k[j + 1] * pb.abs());
            if pa * pb < 0.0 {
                let r = self.poly_root(&unit, a, b, pa);
                let fr = self.envelope.mu_at(r) * self.direction_poly(&unit, r).abs();
                integral += 0.5 * (r - a) * (fa + fr) + 0.5 * (b - r) * (fr + fb);
            } else {
                integral += 0.5 * (b - a) * (fa + fb);
            }
        }
        let centre: f64 = unit.iter().zip(self.eta.iter()).map(|(a, b)| a * b).sum();
        Ok(norm * (centre + integral))
    }

    fn poly_root(&self, unit: &[f64], mut lo: f64, mut hi: f64, p_lo: f64) -> f64 {
        let lo_negative = p_lo < 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let pm = self.direction_poly(unit, mid);
            if pm == 0.0 {
                return mid;
            }
            if (pm < 0.0) == lo_negative {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Support function in original coordinates, `h_Z(y) = h_X(M^{-T} y)`.
    pub fn support_original(&self, y: &DVector<f64>, canonical: &CanonicalForm) -> Result<f64> {
        if y.len() != self.n {
            return Err(ReachError::WrongDimension { expected: self.n, got: y.len() });
        }
        if y.norm().is_nan() || y.norm() <= 0.0 {
            return Err(ReachError::ZeroDirection);
        }
        self.support(&(canonical.m_inv.transpose() * y))
    }
}

/// Boundary pair at `sigma` for the set reached at `t` from canonical state `x0`.
pub fn boundary_pair(sigma: &WeylPoint, envelope: &InputEnvelope, x0: &DVector<f64>, t: f64) -> Result<BoundarySample> {
    ReachSet::new(envelope, x0.clone(), t)?.boundary_pair(sigma)
}

/// Fill `z_upper` and `z_lower` with `M^{-1} x`.
pub fn to_original(sample: &mut BoundarySample, canonical: &CanonicalForm) {
    sample.z_upper = Some(canonical.to_original(&sample.x_upper));
    sample.z_lower = Some(canonical.to_original(&sample.x_lower));
}

pub fn support_function(y: &DVector<f64>, envelope: &InputEnvelope, x0: &DVector<f64>, t: f64) -> Result<f64> {
    ReachSet::new(envelope, x0.clone(), t)?.support(y)
}

pub fn support_function_original(reach: &ReachSet<'_>, canonical: &CanonicalForm, y: &DVector<f64>) -> Result<f64> {
    reach.support_original(y, canonical)
}

/// Unit directions: a uniform angle grid in 2D, a Fibonacci lattice in 3D and seeded
/// Gaussian samples above that.
pub fn sphere_directions(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    match n {
        0 => Vec::new(),
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                DVector::from_vec(vec![a.cos(), a.sin()])
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let a = golden * k as f64;
                    DVector::from_vec(vec![r * a.cos(), r * a.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| loop {
                    let v = DVector::from_fn(n, |_, _| {
                        // Box–Muller
                        let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                        let u2: f64 = rng.random();
                        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                    });
                    let norm = v.norm();
                    if norm > 1e-12 {
                        break v / norm;
                    }
                })
                .collect()
        }
    }
}

/// Support values on a fixed direction set, reused across many membership queries.
#[derive(Debug, Clone)]
pub struct SupportTable<'r> {
    pub coords: Coords,
    pub directions: Vec<DVector<f64>>,
    pub values: Vec<f64>,
    reach: &'r ReachSet<'r>,
    /// `M^{-T}` for original-coordinate directions.
    pullback: Option<DMatrix<f64>>,
    spacing: f64,
}

impl<'r> SupportTable<'r> {
    pub fn new(
        reach: &'r ReachSet<'r>,
        coords: Coords,
        canonical: Option<&CanonicalForm>,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        let pullback = match coords {
            Coords::Canonical => None,
            Coords::Original => Some(
                canonical
                    .ok_or_else(|| {
                        ReachError::Validation("original-coordinate support table needs the canonical form".into())
                    })?
                    .m_inv
                    .transpose(),
            ),
        };
        let n = reach.dim();
        let directions = sphere_directions(n, count, seed);
        let spacing = match n {
            1 => 0.0,
            _ => (4.0 * std::f64::consts::PI / directions.len().max(1) as f64).powf(1.0 / (n - 1) as f64),
        };
        let mut table = Self { coords, directions, values: Vec::new(), reach, pullback, spacing };
        table.values = table.directions.par_iter().map(|y| table.support(y)).collect::<Result<Vec<_>>>()?;
        Ok(table)
    }

    /// Support value in this table's coordinates.
    pub fn support(&self, y: &DVector<f64>) -> Result<f64> {
        match &self.pullback {
            None => self.reach.support(y),
            Some(m) => self.reach.support(&(m * y)),
        }
    }

    /// Local ascent of `⟨y, p⟩ - h(y)` over unit directions, from `start`.
    fn refine(&self, point: &DVector<f64>, start: &DVector<f64>, mut best: f64, tol: f64) -> Result<f64> {
        let n = point.len();
        let mut y = start.clone();
        let mut step = self.spacing;
        for _ in 0..14 {
            let mut improved = true;
            while improved && best <= tol {
                improved = false;
                for i in 0..n {
                    for sign in [1.0, -1.0] {
                        let mut cand = y.clone();
                        cand[i] += sign * step;
                        let norm = cand.norm();
                        if norm == 0.0 {
                            continue;
                        }
                        cand /= norm;
                        let value = cand.dot(point) - self.support(&cand)?;
                        if value > best {
                            best = value;
                            y = cand;
                            improved = true;
                        }
                    }
                }
            }
            if best > tol {
                break;
            }
            step *= 0.5;
        }
        Ok(best)
    }
}

/// Outcome of a membership test.
#[derive(Debug, Clone, PartialEq)]
pub struct Containment {
    pub inside: bool,
    /// `max_y ⟨y, p⟩ - h(y)` over unit directions; `≤ 0` inside, `≈ 0` on the boundary.
    pub violation: f64,
    pub worst_direction: usize,
}

/// Membership via the Fenchel conjugate of the support function: the sampled maximum,
/// refined by local ascent when the point is near the boundary.
pub fn contains(point: &DVector<f64>, table: &SupportTable<'_>, tol: f64) -> Result<Containment> {
    let n = table.reach.dim();
    if point.len() != n {
        return Err(ReachError::WrongDimension { expected: n, got: point.len() });
    }
    let (worst_direction, sampled) = table
        .directions
        .iter()
        .zip(&table.values)
        .map(|(y, h)| y.dot(point) - h)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let band = table.spacing * table.spacing * (1.0 + point.norm() + table.reach.eta().norm());
    let violation = if sampled <= tol && sampled > -band && n > 1 {
        table.refine(point, &table.directions[worst_direction], sampled, tol)?
    } else {
        sampled
    };
    Ok(Containment { inside: violation <= tol, violation, worst_direction })
}

fn signed_area(poly: &[[f64; 2]]) -> f64 {
    poly.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum::<f64>() * 0.5
}

/// Closed counter-clockwise boundary polygon of a planar set: the upper sweep
/// `σ_1: 0 → t` followed by the lower sweep. First and last points coincide.
pub fn boundary_polygon_2d(
    reach: &ReachSet<'_>,
    resolution: usize,
    coords: Coords,
    canonical: Option<&CanonicalForm>,
) -> Result<Vec<[f64; 2]>> {
    if reach.dim() != 2 {
        return Err(ReachError::WrongDimension { expected: 2, got: reach.dim() });
    }
    let grid = weyl_grid(reach.t(), 2, resolution)?;
    let cf = match coords {
        Coords::Canonical => None,
        Coords::Original => Some(canonical.ok_or_else(|| {
            ReachError::Validation("original-coordinate polygon needs the canonical form".into())
        })?),
    };
    let samples = reach.sweep(&grid, cf)?;
    let pick = |s: &BoundarySample, upper: bool| -> [f64; 2] {
        let v = match (coords, upper) {
            (Coords::Canonical, true) => &s.x_upper,
            (Coords::Canonical, false) => &s.x_lower,
            (Coords::Original, true) => s.z_upper.as_ref().expect("mapped"),
            (Coords::Original, false) => s.z_lower.as_ref().expect("mapped"),
        };
        [v[0], v[1]]
    };
    let mut poly: Vec<[f64; 2]> = samples.iter().map(|s| pick(s, true)).collect();
    poly.extend(samples.iter().skip(1).map(|s| pick(s, false)));
    if signed_area(&poly_closed(&poly)) < 0.0 {
        poly.reverse();
    }
    Ok(poly_closed(&poly))
}

fn poly_closed(open: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = open.to_vec();
    if let Some(&first) = open.first() {
        if open.last() != Some(&first) {
            out.push(first);
        }
    }
    out
}

/// `true` when all turns of the closed polygon have the same orientation, ignoring
/// turns smaller than `tol` (collinear runs and duplicated points).
pub fn is_convex_polygon(poly: &[[f64; 2]], tol: f64) -> bool {
    let pts = if poly.len() > 1 && poly.first() == poly.last() { &poly[..poly.len() - 1] } else { poly };
    let m = pts.len();
    if m < 3 {
        return true;
    }
    let (mut pos, mut neg) = (false, false);
    for i in 0..m {
        let a = pts[i];
        let b = pts[(i + 1) % m];
        let c = pts[(i + 2) % m];
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cross > tol {
            pos = true;
        } else if cross < -tol {
            neg = true;
        }
    }
    !(pos && neg)
}
