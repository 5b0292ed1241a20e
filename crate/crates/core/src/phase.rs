//! The coefficient a(x,t), the Hölder condition on it, and the scalar
//! function algebra of the double-phase growth φ(v) = v^p + a v^q.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::geometry::{distance, GridDomain, Point};

/// Growth exponents and structure constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublePhaseParams {
    pub p: f64,
    pub q: f64,
    pub c1: f64,
    pub c2: f64,
    pub dim: usize,
}

impl DoublePhaseParams {
    pub fn new(p: f64, q: f64, c1: f64, c2: f64, dim: usize) -> Result<Self> {
        if !(p > 2.0 && q > p && q.is_finite()) {
            return Err(invalid("p, q", format!("need 2 < p < q, got p = {p}, q = {q}")));
        }
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(invalid("C1, C2", format!("need positive constants, got {c1}, {c2}")));
        }
        if dim != 1 && dim != 2 {
            return Err(invalid("N", format!("{dim} is not 1 or 2")));
        }
        Ok(Self { p, q, c1, c2, dim })
    }

    /// Convenience constructor with C1 = C2 = 1.
    pub fn with_exponents(p: f64, q: f64, dim: usize) -> Result<Self> {
        Self::new(p, q, 1.0, 1.0, dim)
    }

    pub fn exponent(&self, mode: Mode) -> f64 {
        match mode {
            Mode::P => self.p,
            Mode::Q => self.q,
        }
    }
}

/// Which phase governs the boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    P,
    Q,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::P => "p",
            Mode::Q => "q",
        }
    }
}

/// Closed-form shapes of a(x,t).
#[derive(Debug, Clone)]
pub enum PhaseShape {
    Zero,
    Constant(f64),
    /// coef · dist(x, ∂Ω)^exponent, with ∂Ω given by the boundary nodes.
    DistancePower { coef: f64, exponent: f64, boundary: Arc<Vec<Point>> },
    /// base + coef · |x − center|^exponent.
    Radial { base: f64, coef: f64, center: Point, exponent: f64 },
    /// value on even periods ⌊t/period⌋, zero on odd ones.
    TimeCheckerboard { value: f64, period: f64 },
}

/// a(x,t) >= 0 with its Hölder constants (A0, R0).
#[derive(Debug, Clone)]
pub struct PhaseField {
    shape: PhaseShape,
    a0: f64,
    r0: f64,
}

impl PhaseField {
    pub fn new(shape: PhaseShape, a0: f64, r0: f64) -> Result<Self> {
        if !(a0 > 0.0 && r0 > 0.0) {
            return Err(invalid("A0, R0", format!("need positive constants, got {a0}, {r0}")));
        }
        let bad_coef = match &shape {
            PhaseShape::Zero => false,
            PhaseShape::Constant(c) => !(*c >= 0.0),
            PhaseShape::DistancePower { coef, exponent, boundary } => {
                !(*coef >= 0.0 && *exponent > 0.0) || boundary.is_empty()
            }
            PhaseShape::Radial { base, coef, exponent, .. } => !(*base >= 0.0 && *coef >= 0.0 && *exponent > 0.0),
            PhaseShape::TimeCheckerboard { value, period } => !(*value >= 0.0 && *period > 0.0),
        };
        if bad_coef {
            return Err(invalid("phase", "coefficients must keep a(x,t) >= 0"));
        }
        Ok(Self { shape, a0, r0 })
    }

    pub fn zero() -> Self {
        Self { shape: PhaseShape::Zero, a0: 1.0, r0: 1.0 }
    }

    pub fn constant(c: f64, a0: f64, r0: f64) -> Result<Self> {
        Self::new(PhaseShape::Constant(c), a0, r0)
    }

    /// c · dist(x, ∂Ω)^(q−p) for the boundary nodes of `domain`.
    pub fn distance_power(domain: &GridDomain, params: &DoublePhaseParams, c: f64, a0: f64, r0: f64) -> Result<Self> {
        let boundary = Arc::new(domain.boundary_points());
        Self::new(PhaseShape::DistancePower { coef: c, exponent: params.q - params.p, boundary }, a0, r0)
    }

    pub fn shape(&self) -> &PhaseShape {
        &self.shape
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn is_time_independent(&self) -> bool {
        !matches!(self.shape, PhaseShape::TimeCheckerboard { .. })
    }

    pub fn is_identically_zero(&self) -> bool {
        match self.shape {
            PhaseShape::Zero => true,
            PhaseShape::Constant(c) => c == 0.0,
            PhaseShape::DistancePower { coef, .. } => coef == 0.0,
            PhaseShape::Radial { base, coef, .. } => base == 0.0 && coef == 0.0,
            PhaseShape::TimeCheckerboard { value, .. } => value == 0.0,
        }
    }

    pub fn value(&self, x: &Point, t: f64) -> f64 {
        match &self.shape {
            PhaseShape::Zero => 0.0,
            PhaseShape::Constant(c) => *c,
            PhaseShape::DistancePower { coef, exponent, boundary } => {
                let d = boundary.iter().map(|b| distance(x, b)).fold(f64::INFINITY, f64::min);
                if d == 0.0 {
                    0.0
                } else {
                    coef * d.powf(*exponent)
                }
            }
            PhaseShape::Radial { base, coef, center, exponent } => {
                let d = distance(x, center);
                base + if d == 0.0 { 0.0 } else { coef * d.powf(*exponent) }
            }
            PhaseShape::TimeCheckerboard { value, period } => {
                if (t / period).floor().rem_euclid(2.0) == 0.0 {
                    *value
                } else {
                    0.0
                }
            }
        }
    }

    /// (inf, sup) of a over the closed ball × [t_lo, t_hi], by sampling a
    /// polar stencil and nine time levels.
    pub fn extrema(&self, dim: usize, center: &Point, radius: f64, t_lo: f64, t_hi: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let times: Vec<f64> = if self.is_time_independent() {
            vec![t_hi]
        } else {
            (0..=8).map(|k| t_lo + (t_hi - t_lo) * k as f64 / 8.0).collect()
        };
        for x in sample_ball(dim, center, radius) {
            for &t in &times {
                let v = self.value(&x, t);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

/// Polar sample of the closed ball: center, 8 rings, 32 angles (2-D) or
/// 33 uniform points (1-D).
pub fn sample_ball(dim: usize, center: &Point, radius: f64) -> Vec<Point> {
    if dim == 1 {
        return (0..=32).map(|k| [center[0] - radius + 2.0 * radius * k as f64 / 32.0, 0.0]).collect();
    }
    let mut pts = vec![*center];
    for ring in 1..=8 {
        let rr = radius * ring as f64 / 8.0;
        for a in 0..32 {
            let th = 2.0 * std::f64::consts::PI * a as f64 / 32.0;
            pts.push([center[0] + rr * th.cos(), center[1] + rr * th.sin()]);
        }
    }
    pts
}

/// Empirical constants of the measure-reduction steps. Only their existence
/// is known; these values are calibrated regression constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionConstants {
    pub delta_cm: f64,
    pub nu: f64,
    pub c_h: f64,
    pub b: f64,
    pub c_p: f64,
    pub c_q: f64,
    pub gamma_star: f64,
    pub gamma_lower_star: f64,
    pub gamma_hat: f64,
    pub gamma3: f64,
    pub gamma4: f64,
}

impl Default for ReductionConstants {
    fn default() -> Self {
        Self {
            delta_cm: 0.5,
            nu: 0.5,
            c_h: 1.0,
            b: 1.0,
            c_p: 1.0,
            c_q: 1.0,
            gamma_star: 1.0,
            gamma_lower_star: 1.0,
            gamma_hat: 1.0,
            gamma3: 3.0,
            gamma4: 4.0,
        }
    }
}

impl ReductionConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.delta_cm,
            self.nu,
            self.c_h,
            self.b,
            self.c_p,
            self.c_q,
            self.gamma_star,
            self.gamma_lower_star,
            self.gamma_hat,
            self.gamma3,
            self.gamma4,
        ];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("reduction constants", "all must be positive and finite"));
        }
        if self.delta_cm >= 1.0 || self.nu >= 1.0 {
            return Err(invalid("reduction constants", "delta_cm and nu must be below 1"));
        }
        Ok(())
    }
}

/// φ(v) = v^p + a v^q.
pub fn phi(params: &DoublePhaseParams, a: f64, v: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(invalid("v", format!("{v} must be nonnegative")));
    }
    if !(a >= 0.0) {
        return Err(invalid("a", format!("{a} must be nonnegative")));
    }
    Ok(v.powf(params.p) + a * v.powf(params.q))
}

/// φ⁺_{k,r} = (k/r)^p + a⁺ (k/r)^q.
pub fn phi_plus_kr(params: &DoublePhaseParams, a_plus: f64, k: f64, r: f64) -> Result<f64> {
    if !(r > 0.0 && k > 0.0) {
        return Err(invalid("k, r", format!("need positive values, got k = {k}, r = {r}")));
    }
    phi(params, a_plus, k / r)
}

/// φ_Q⁺(v) = v^{p−2} + a⁺ v^{q−2}.
pub fn phi_q(a_plus: f64, p: f64, q: f64, v: f64) -> f64 {
    v.powf(p - 2.0) + a_plus * v.powf(q - 2.0)
}

/// Bisection for an increasing function on [lo, hi] to relative width `rel`.
fn bisect_increasing(f: impl Fn(f64) -> f64, y: f64, mut lo: f64, mut hi: f64, rel: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= rel * hi {
            break;
        }
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The unique v >= 0 with v^{p−2} + a⁺ v^{q−2} = y.
pub fn phi_q_inverse(a_plus: f64, p: f64, q: f64, y: f64) -> Result<f64> {
    if !(y >= 0.0 && y.is_finite()) {
        return Err(invalid("y", format!("{y} must be finite and nonnegative")));
    }
    if !(a_plus >= 0.0) {
        return Err(invalid("a_plus", format!("{a_plus} must be nonnegative")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let (ep, eq) = (1.0 / (p - 2.0), 1.0 / (q - 2.0));
    let mut hi = y.powf(ep);
    if a_plus > 0.0 {
        hi = hi.min((y / a_plus).powf(eq));
    }
    let z = y / (1.0 + a_plus);
    let lo = z.powf(ep).min(z.powf(eq));
    Ok(bisect_increasing(|v| phi_q(a_plus, p, q, v), y, lo, hi.max(lo), 1e-14))
}

/// Ψ(s) = s² / (s^p + a⁺ s^q).
pub fn psi(a_plus: f64, p: f64, q: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(invalid("s", format!("{s} must be positive")));
    }
    Ok(s * s / (s.powf(p) + a_plus * s.powf(q)))
}

/// Solves Ψ(v) = y. Since Ψ = 1/φ_Q⁺, this is φ_Q⁺ inverted at 1/y.
pub fn psi_inverse(a_plus: f64, p: f64, q: f64, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(invalid("y", format!("{y} must be positive")));
    }
    phi_q_inverse(a_plus, p, q, 1.0 / y)
}

/// η_k = k² / φ⁺_{k,2r}.
pub fn eta_k(params: &DoublePhaseParams, a_plus_2r: f64, k: f64, r: f64) -> Result<f64> {
    Ok(k * k / phi_plus_kr(params, a_plus_2r, k, 2.0 * r)?)
}

/// A sampled cylinder Q_{r,r²}(x0, t0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSample {
    pub center: Point,
    pub time: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionAReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Ratios osc(a)/r^{q−p} over sampled full cylinders Q_{r,r²}; pass iff
/// the largest is at most A0.
pub fn check_condition_a(
    phase: &PhaseField,
    params: &DoublePhaseParams,
    samples: &[PhaseSample],
) -> Result<ConditionAReport> {
    let mut ratios = Vec::with_capacity(samples.len());
    for s in samples {
        if !(s.radius > 0.0 && s.radius < phase.r0) {
            return Err(Error::Precondition(format!("sample radius {} not in (0, R0 = {})", s.radius, phase.r0)));
        }
        let r2 = s.radius * s.radius;
        let (lo, hi) = phase.extrema(params.dim, &s.center, s.radius, s.time - r2, s.time + r2);
        ratios.push((hi - lo) / s.radius.powf(params.q - params.p));
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(ConditionAReport { pass: max_ratio <= phase.a0, max_ratio, ratios })
}

/// Maximal radius R and the phase control a⁺ <= 2a⁻ on Q⁻_{r,r²} at
/// r = min{R, R0}/24.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximalRadius {
    pub radius: f64,
    pub control_radius: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    pub control_holds: bool,
}

pub fn maximal_radius(phase: &PhaseField, params: &DoublePhaseParams, x0: &Point, t0: f64) -> Result<MaximalRadius> {
    let a = phase.value(x0, t0);
    if !(a > 0.0) {
        return Err(Error::Precondition("maximal radius requires a(x0,t0) > 0 (q-mode)".into()));
    }
    let radius = (a / (2.0 * phase.a0)).powf(1.0 / (params.q - params.p));
    let control_radius = radius.min(phase.r0) / 24.0;
    let eta = control_radius * control_radius;
    let (a_minus, a_plus) = phase.extrema(params.dim, x0, control_radius, t0 - eta, t0);
    Ok(MaximalRadius { radius, control_radius, a_minus, a_plus, control_holds: a_plus <= 2.0 * a_minus })
}
