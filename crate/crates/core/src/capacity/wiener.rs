use rayon::prelude::*;

use super::{compute_capacity, CapacityOptions};
use crate::error::{invalid, Error, Result};
use crate::geometry::{in_closed_ball, Ball, Condenser, GridDomain, Lattice, Point};
use crate::phase::{Mode, PhaseField};

const LN2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WienerOptions {
    pub capacity: CapacityOptions,
    /// Raw ratios above 1 by less than this are clamped to 1.
    pub clamp_tol: f64,
    /// Tail values of δ at or above this floor count as divergence-consistent.
    pub divergence_floor: f64,
}

impl Default for WienerOptions {
    fn default() -> Self {
        Self { capacity: CapacityOptions::default(), clamp_tol: 1e-3, divergence_floor: 0.1 }
    }
}

/// δ_s(r) together with the two capacities it is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaValue {
    pub r: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub raw: f64,
    pub delta: f64,
}

fn is_complement(d: &GridDomain, x: &Point) -> bool {
    d.node_at(x).map_or(true, |i| !d.inside(i))
}

/// δ_s(r) = (C_s(B̄_r ∖ Ω; B_2r) / C_s(B̄_r; B_2r))^{1/(s−1)} at a lattice
/// node x0. Boundary points are the intended centres; interior centres give
/// the density of whatever complement reaches B̄_r, possibly 0.
pub fn delta_s(d: &GridDomain, x0: &Point, r: f64, s: f64, opts: &WienerOptions) -> Result<DeltaValue> {
    if !(s > 1.0) {
        return Err(invalid("s", format!("{s} must exceed 1")));
    }
    d.node_at(x0).ok_or_else(|| Error::Precondition(format!("x0 = {x0:?} is not a lattice node")))?;
    let ball = Ball::new(*x0, 2.0 * r)?;
    let window = Lattice::covering(d.dim(), d.h(), x0, 2.0 * r, 1)?;
    if !d.lattice().contains_lattice(&window) {
        return Err(Error::OutsideGrid(format!("B_2r with r = {r} around {x0:?}")));
    }
    let full = Condenser::from_predicate(d.dim(), d.h(), ball, |x| in_closed_ball(x, x0, r))
        .map_err(|e| Error::ResolutionLimited(format!("r = {r}: {e}")))?;
    let part = Condenser::from_predicate(d.dim(), d.h(), ball, |x| in_closed_ball(x, x0, r) && is_complement(d, x))?;
    let (numerator, denominator) = if part.k_mask() == full.k_mask() {
        let v = compute_capacity(&full, s, &opts.capacity)?.value;
        (v, v)
    } else if part.k_count() == 0 {
        (0.0, compute_capacity(&full, s, &opts.capacity)?.value)
    } else {
        let (a, b) = rayon::join(
            || compute_capacity(&part, s, &opts.capacity),
            || compute_capacity(&full, s, &opts.capacity),
        );
        (a?.value, b?.value)
    };
    if !(denominator > 0.0) {
        return Err(Error::ResolutionLimited(format!("zero reference capacity at r = {r}")));
    }
    let raw = (numerator / denominator).powf(1.0 / (s - 1.0));
    let delta = if raw <= 1.0 {
        raw
    } else if raw < 1.0 + opts.clamp_tol {
        1.0
    } else {
        return Err(Error::DeltaOutOfRange { raw });
    };
    Ok(DeltaValue { r, numerator, denominator, raw, delta })
}

/// δ_s sampled at dyadic radii r_j = 2^{−j} r0 with partial Wiener sums.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerProfile {
    pub s: f64,
    pub center: Point,
    pub radii: Vec<f64>,
    pub deltas: Vec<f64>,
    pub numerators: Vec<f64>,
    pub denominators: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Levels were dropped because the lattice cannot resolve them.
    pub truncated: bool,
    pub divergence_consistent: bool,
}

impl WienerProfile {
    /// Profile from given δ values at r0, r0/2, ... (synthetic or precomputed).
    pub fn from_deltas(s: f64, center: Point, r0: f64, deltas: Vec<f64>, floor: f64) -> Result<Self> {
        let n = deltas.len();
        Self::assemble(s, center, r0, deltas, vec![f64::NAN; n], vec![f64::NAN; n], false, floor)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        s: f64,
        center: Point,
        r0: f64,
        deltas: Vec<f64>,
        numerators: Vec<f64>,
        denominators: Vec<f64>,
        truncated: bool,
        floor: f64,
    ) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::ResolutionLimited(format!("no resolvable level at r0 = {r0}")));
        }
        if deltas.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(invalid("deltas", "values must lie in [0, 1]"));
        }
        let radii: Vec<f64> = (0..deltas.len()).map(|j| r0 * 0.5f64.powi(j as i32)).collect();
        let partial_sums: Vec<f64> = deltas
            .iter()
            .scan(0.0, |acc, d| {
                *acc += d * LN2;
                Some(*acc)
            })
            .collect();
        let tail = deltas.len().div_ceil(3).max(1);
        let divergence_consistent = deltas[deltas.len() - tail..].iter().all(|&d| d >= floor);
        Ok(Self { s, center, radii, deltas, numerators, denominators, partial_sums, truncated, divergence_consistent })
    }

    pub fn levels(&self) -> usize {
        self.deltas.len()
    }

    pub fn r0(&self) -> f64 {
        self.radii[0]
    }

    pub fn smallest_radius(&self) -> f64 {
        *self.radii.last().expect("profile is nonempty")
    }

    /// δ at radius r, linear in log r between samples; `None` outside range.
    pub fn delta_at(&self, r: f64) -> Option<f64> {
        let r0 = self.r0();
        let rmin = self.smallest_radius();
        if !(r <= r0 * (1.0 + 1e-12) && r >= rmin * (1.0 - 1e-12)) {
            return None;
        }
        let x = (r0 / r).log2().max(0.0);
        let j = (x.floor() as usize).min(self.levels() - 1);
        if j + 1 >= self.levels() {
            return Some(self.deltas[self.levels() - 1]);
        }
        let w = x - j as f64;
        Some((1.0 - w) * self.deltas[j] + w * self.deltas[j + 1])
    }

    /// ∫_ρ^{ρ1} δ(s) ds/s by the trapezoid rule in log s over the sampled
    /// radii, with the interpolated δ at the end points.
    pub fn integral_between(&self, rho: f64, rho1: f64) -> Option<f64> {
        if rho > rho1 {
            return None;
        }
        let d_lo = self.delta_at(rho)?;
        let d_hi = self.delta_at(rho1)?;
        let mut knots: Vec<(f64, f64)> = vec![(rho, d_lo)];
        for (&r, &d) in self.radii.iter().zip(&self.deltas).rev() {
            if r > rho * (1.0 + 1e-12) && r < rho1 * (1.0 - 1e-12) {
                knots.push((r, d));
            }
        }
        knots.push((rho1, d_hi));
        Some(knots.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 / w[0].0).ln()).sum())
    }

    /// Trapezoid quadrature of ∫ δ dr/r over the whole sampled range.
    pub fn trapezoid_integral(&self) -> f64 {
        self.deltas.windows(2).map(|w| 0.5 * (w[0] + w[1]) * LN2).sum()
    }
}

/// δ_s at r_j = 2^{−j} r0 for j = 0..=levels. Levels the lattice cannot
/// resolve end the profile early and set the truncation flag.
pub fn wiener_sum(
    d: &GridDomain,
    x0: &Point,
    r0: f64,
    levels: usize,
    s: f64,
    opts: &WienerOptions,
) -> Result<WienerProfile> {
    if levels < 1 {
        return Err(invalid("levels", "at least one level required"));
    }
    let results: Vec<Result<DeltaValue>> = (0..=levels)
        .into_par_iter()
        .map(|j| delta_s(d, x0, r0 * 0.5f64.powi(j as i32), s, opts))
        .collect();
    let mut values = Vec::new();
    let mut truncated = false;
    for r in results {
        match r {
            Ok(v) => values.push(v),
            Err(Error::ResolutionLimited(_)) => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    WienerProfile::assemble(
        s,
        *x0,
        r0,
        values.iter().map(|v| v.delta).collect(),
        values.iter().map(|v| v.numerator).collect(),
        values.iter().map(|v| v.denominator).collect(),
        truncated,
        opts.divergence_floor,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FatnessSpec {
    pub s: f64,
    pub lambda: f64,
    pub radius_limit: f64,
}

impl FatnessSpec {
    pub fn new(s: f64, lambda: f64, radius_limit: f64) -> Result<Self> {
        if !(s > 1.0 && lambda > 0.0 && radius_limit > 0.0) {
            return Err(invalid("fatness", "need s > 1 and positive lambda, R_s"));
        }
        Ok(Self { s, lambda, radius_limit })
    }
}

/// Outcome of a fatness test; `violation` names the first failing (y, ρ)
/// with its capacity value.
#[derive(Debug, Clone, PartialEq)]
pub struct FatnessWitness {
    pub fat: bool,
    pub violation: Option<(Point, f64, f64)>,
    pub min_ratio: f64,
}

/// Tests C_s(B̄_ρ(y) ∩ X; B_2ρ(y)) >= λ ρ^{N−s} at every sampled pair.
/// `x_mask` is a node mask over the domain lattice.
pub fn is_uniformly_fat(
    d: &GridDomain,
    x_mask: &[bool],
    spec: &FatnessSpec,
    points: &[Point],
    radii: &[f64],
    opts: &CapacityOptions,
) -> Result<FatnessWitness> {
    if x_mask.len() != d.len() {
        return Err(invalid("X", "mask size does not match the domain"));
    }
    if let Some(r) = radii.iter().find(|&&r| !(r > 0.0 && r < spec.radius_limit)) {
        return Err(Error::Precondition(format!("sample radius {r} not in (0, R_s)")));
    }
    let pairs: Vec<(Point, f64)> = points.iter().flat_map(|&y| radii.iter().map(move |&r| (y, r))).collect();
    let values: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(y, rho)| {
            let ball = Ball::new(y, 2.0 * rho)?;
            let c = Condenser::from_predicate(d.dim(), d.h(), ball, |x| {
                in_closed_ball(x, &y, rho) && d.node_at(x).is_some_and(|i| x_mask[i])
            })?;
            Ok(compute_capacity(&c, spec.s, opts)?.value)
        })
        .collect();
    let mut min_ratio = f64::INFINITY;
    let mut violation = None;
    for (&(y, rho), v) in pairs.iter().zip(values) {
        let v = v?;
        let ratio = v / (spec.lambda * rho.powf(d.dim() as f64 - spec.s));
        min_ratio = min_ratio.min(ratio);
        if ratio < 1.0 && violation.is_none() {
            violation = Some((y, rho, v));
        }
    }
    Ok(FatnessWitness { fat: violation.is_none(), violation, min_ratio })
}

/// Node-count test |Ω ∩ B_ρ(x0)| <= (1 − α)|B_ρ| at each radius.
pub fn density_condition(d: &GridDomain, x0: &Point, alpha: f64, radii: &[f64]) -> Result<bool> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("{alpha} not in (0, 1)")));
    }
    for &rho in radii {
        if !d.contains_ball(x0, rho) {
            return Err(Error::OutsideGrid(format!("B_rho with rho = {rho}")));
        }
        let nodes = d.lattice().nodes_in_ball(x0, rho);
        if nodes.is_empty() {
            return Err(Error::EmptySet(format!("no node in B_rho with rho = {rho}")));
        }
        let omega = nodes.iter().filter(|&&i| d.inside(i)).count();
        if omega as f64 > (1.0 - alpha) * nodes.len() as f64 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// p-mode iff a(x0, t0) is exactly zero.
pub fn classify_phase_mode(phase: &PhaseField, x0: &Point, t0: f64) -> Mode {
    if phase.value(x0, t0) == 0.0 {
        Mode::P
    } else {
        Mode::Q
    }
}
