//! Verifiers that evaluate both sides of the local energy, critical-mass,
//! negative-power, reverse Hölder and weak Harnack inequalities on discrete
//! space-time fields.
//!
//! The constants in those inequalities are only known to exist, so every
//! verifier reports the ratio lhs/rhs with the constant removed. Integrals
//! are nodal sums times h^N and the stored level spacing.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::geometry::{distance, Point};
use crate::pde::SpaceTimeField;
use crate::phase::{phi_plus_kr, phi_q, phi_q_inverse, psi_inverse};

/// Guard against division by a vanishing right-hand side.
pub const RATIO_FLOOR: f64 = 1e-300;

/// Outcome of one inequality evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub check: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
    /// Named parameters of the evaluation (levels, σ, radii, branch flags).
    pub context: Vec<(&'static str, f64)>,
}

impl InequalityReport {
    /// Ratio lhs / max(rhs, floor); a vanishing lhs gives ratio 0.
    pub fn new(check: &'static str, lhs: f64, rhs: f64) -> Self {
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs.max(RATIO_FLOOR) };
        Self { check, lhs, rhs, ratio, pass: ratio.is_finite(), context: Vec::new() }
    }

    pub fn with(mut self, key: &'static str, value: f64) -> Self {
        self.context.push((key, value));
        self
    }

    /// Requires the ratio to stay at or below `cap`.
    pub fn with_cap(mut self, cap: f64) -> Self {
        self.pass = self.pass && self.ratio <= cap;
        self
    }

    pub fn context_value(&self, key: &str) -> Option<f64> {
        self.context.iter().find(|(k, _)| *k == key).map(|&(_, v)| v)
    }
}

impl fmt::Display for InequalityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: lhs {:.6e} rhs {:.6e} ratio {:.6e} {}", self.check, self.lhs, self.rhs, self.ratio, if self.pass { "pass" } else { "FAIL" })?;
        for (k, v) in &self.context {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

/// Piecewise-linear cutoffs on a forward cylinder B_r(x̄) × (t̄, t̄+η):
/// ζ₁ = 1 on B_{r(1−σ)}, 0 outside B_r; ζ₂ = 1 up to t̄+η(1−σ), 0 from t̄+η.
/// With `q_power` set the product is raised to the power q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    pub sigma: f64,
    pub center: Point,
    pub radius: f64,
    pub t0: f64,
    pub eta: f64,
    pub q_power: bool,
}

impl CutoffSpec {
    pub fn new(sigma: f64, center: Point, radius: f64, t0: f64, eta: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(invalid("sigma", format!("{sigma} not in (0, 1)")));
        }
        if !(radius > 0.0 && eta > 0.0 && t0 >= 0.0) {
            return Err(invalid("cylinder", format!("r = {radius}, eta = {eta}, t0 = {t0}")));
        }
        Ok(Self { sigma, center, radius, t0, eta, q_power: true })
    }

    pub fn zeta1(&self, x: &Point) -> f64 {
        ((self.radius - distance(x, &self.center)) / (self.sigma * self.radius)).clamp(0.0, 1.0)
    }

    pub fn zeta2(&self, t: f64) -> f64 {
        ((self.t0 + self.eta - t) / (self.sigma * self.eta)).clamp(0.0, 1.0)
    }

    /// ζ(x,t) for exponent q.
    pub fn zeta(&self, x: &Point, t: f64, q: f64) -> f64 {
        let z = self.zeta1(x) * self.zeta2(t);
        if self.q_power {
            z.powf(q)
        } else {
            z
        }
    }

    /// ∇ζ₁, nonzero only on the open ramp annulus.
    pub fn grad_zeta1(&self, x: &Point) -> [f64; 2] {
        let rho = distance(x, &self.center);
        let z = self.zeta1(x);
        if z <= 0.0 || z >= 1.0 || rho == 0.0 {
            return [0.0, 0.0];
        }
        let s = -1.0 / (self.sigma * self.radius * rho);
        [s * (x[0] - self.center[0]), s * (x[1] - self.center[1])]
    }

    /// ∇ₓζ(x,t) for exponent q.
    pub fn grad_zeta(&self, x: &Point, t: f64, q: f64) -> [f64; 2] {
        let z2 = self.zeta2(t);
        let g1 = self.grad_zeta1(x);
        let f = if self.q_power { q * (self.zeta1(x) * z2).powf(q - 1.0) * z2 } else { z2 };
        [f * g1[0], f * g1[1]]
    }

    /// Bound on |∇ζ| (the q-th power multiplies the ramp slope by q).
    pub fn grad_bound(&self, q: f64) -> f64 {
        let slope = 1.0 / (self.sigma * self.radius);
        if self.q_power {
            q * slope
        } else {
            slope
        }
    }

    /// Bound on |∂ₜζ|.
    pub fn time_bound(&self, q: f64) -> f64 {
        let slope = 1.0 / (self.sigma * self.eta);
        if self.q_power {
            q * slope
        } else {
            slope
        }
    }
}

/// Discrete forward cylinder: nodes of B_r, cells touching it, and the
/// stored levels in (t̄, t̄+η].
struct Window {
    nodes: Vec<usize>,
    cells: Vec<usize>,
    levels: Vec<usize>,
    dv: f64,
    dt: f64,
}

fn window(u: &SpaceTimeField, center: &Point, r: f64, t0: f64, eta: f64) -> Result<Window> {
    let d = u.domain();
    if !d.contains_ball(center, r) {
        return Err(Error::OutsideGrid(format!("ball of radius {r} at {center:?}")));
    }
    let t_last = *u.times().last().expect("field has levels");
    if t0 < 0.0 || t0 + eta > t_last * (1.0 + 1e-12) {
        return Err(Error::OutsideGrid(format!("time window ({t0}, {}] outside [0, {t_last}]", t0 + eta)));
    }
    let lat = d.lattice();
    let nodes = lat.nodes_in_ball(center, r);
    if nodes.is_empty() {
        return Err(Error::EmptySet(format!("no node in the ball of radius {r}")));
    }
    let mut in_ball = vec![false; lat.len()];
    nodes.iter().for_each(|&i| in_ball[i] = true);
    let cells = lat.cells().filter(|&c| lat.cell_corners(c).iter().any(|&i| in_ball[i])).collect();
    let levels = u.levels_in(t0, t0 + eta);
    if levels.is_empty() {
        return Err(Error::EmptySet(format!("no stored level in ({t0}, {}]", t0 + eta)));
    }
    Ok(Window { nodes, cells, levels, dv: lat.cell_volume(), dt: u.time_step() })
}

/// Sub-cell quadrature points per axis.
const SUB: usize = 4;

/// Integral over one cell of w |∇(ζ v)|^s, with v bilinear on the cell and
/// (ζ, ∇ζ, w) exact at SUB×SUB midpoints; sampling the kinked cutoff only at nodes
/// would bias the sum on coarse grids.
fn cell_power(
    u: &SpaceTimeField,
    cell: usize,
    v: &[f64],
    s: f64,
    zeta: &dyn Fn(&Point) -> (f64, [f64; 2], f64),
) -> f64 {
    let lat = u.domain().lattice();
    let [c00, c10, c01, c11] = lat.cell_corners(cell);
    let h = lat.h();
    let origin = lat.coords(cell);
    let two_d = lat.dim() == 2;
    let ny = if two_d { SUB } else { 1 };
    let mut acc = 0.0;
    for a in 0..SUB {
        let fx = (a as f64 + 0.5) / SUB as f64;
        for b in 0..ny {
            let fy = if two_d { (b as f64 + 0.5) / SUB as f64 } else { 0.0 };
            let val = v[c00] * (1.0 - fx) * (1.0 - fy) + v[c10] * fx * (1.0 - fy) + v[c01] * (1.0 - fx) * fy + v[c11] * fx * fy;
            let gx = ((1.0 - fy) * (v[c10] - v[c00]) + fy * (v[c11] - v[c01])) / h;
            let gy = if two_d { ((1.0 - fx) * (v[c01] - v[c00]) + fx * (v[c11] - v[c10])) / h } else { 0.0 };
            let x = [origin[0] + fx * h, if two_d { origin[1] + fy * h } else { origin[1] }];
            let (z, [zx, zy], outer) = zeta(&x);
            if outer == 0.0 {
                continue;
            }
            let (px, py) = (val * zx + z * gx, val * zy + z * gy);
            acc += outer * (px * px + py * py).sqrt().powf(s);
        }
    }
    acc * lat.cell_volume() / (SUB * ny) as f64
}

fn level_at(u: &SpaceTimeField, t: f64) -> Result<usize> {
    let tol = 1e-9 * u.time_step().max(1e-300);
    u.times()
        .iter()
        .position(|&s| (s - t).abs() <= tol)
        .ok_or_else(|| Error::EmptySet(format!("no stored level at t = {t}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyVariant {
    /// Space-time cutoff; right side carries the k²/η term.
    SpaceTime,
    /// Time-independent cutoff; right side carries the initial-slab term.
    InitialSlab,
}

/// Energy estimate for (u−k)₋ on the cutoff's cylinder.
pub fn check_energy_estimate(u: &SpaceTimeField, cutoff: &CutoffSpec, k: f64, variant: EnergyVariant) -> Result<InequalityReport> {
    if !(k > 0.0) {
        return Err(invalid("k", format!("{k} must be positive")));
    }
    let params = *u.params();
    let (p, q) = (params.p, params.q);
    let (r, eta) = (cutoff.radius, cutoff.eta);
    let w = window(u, &cutoff.center, r, cutoff.t0, eta)?;
    let d = u.domain();
    let (a_minus, a_plus) = u.phase().extrema(d.dim(), &cutoff.center, r, cutoff.t0, cutoff.t0 + eta);
    let phi_minus = phi_plus_kr(&params, a_minus, k, r)?;
    let phi_plus = phi_plus_kr(&params, a_plus, k, r)?;
    let weight = |x: &Point, t: f64| match variant {
        EnergyVariant::SpaceTime => cutoff.zeta(x, t, q),
        EnergyVariant::InitialSlab => cutoff.zeta1(x).powf(q),
    };
    let weight_grad = |x: &Point, t: f64| match variant {
        EnergyVariant::SpaceTime => cutoff.grad_zeta(x, t, q),
        EnergyVariant::InitialSlab => {
            let f = q * cutoff.zeta1(x).powf(q - 1.0);
            let g = cutoff.grad_zeta1(x);
            [f * g[0], f * g[1]]
        }
    };
    let lat = d.lattice();
    let mut sup_term: f64 = 0.0;
    let mut grad_term = 0.0;
    let mut sublevel = 0usize;
    let mut g = vec![0.0; d.len()];
    for &lvl in &w.levels {
        let t = u.times()[lvl];
        let slice = u.slice(lvl);
        let mut mass = 0.0;
        for &i in &w.nodes {
            let neg = (k - slice[i]).max(0.0);
            mass += weight(&d.coords(i), t) * neg * neg;
            if slice[i] <= k {
                sublevel += 1;
            }
        }
        sup_term = sup_term.max(mass * w.dv);
        for &c in &w.cells {
            for i in lat.cell_corners(c) {
                g[i] = (k - slice[i]).max(0.0);
            }
        }
        let zeta = |x: &Point| (weight(x, t), weight_grad(x, t), 1.0);
        grad_term += w.cells.iter().map(|&c| cell_power(u, c, &g, p, &zeta)).sum::<f64>() * w.dt;
    }
    let a_measure = sublevel as f64 * w.dv * w.dt;
    let lhs = sup_term + (r / k).powf(p) * phi_minus * grad_term;
    let sigma_q = cutoff.sigma.powf(-q);
    let rhs = match variant {
        EnergyVariant::SpaceTime => sigma_q * phi_plus * (1.0 + k * k / (eta * phi_plus)) * a_measure,
        EnergyVariant::InitialSlab => {
            let l0 = level_at(u, cutoff.t0)?;
            let initial: f64 = w
                .nodes
                .iter()
                .map(|&i| {
                    let neg = (k - u.slice(l0)[i]).max(0.0);
                    cutoff.zeta1(&d.coords(i)).powf(q) * neg * neg
                })
                .sum::<f64>()
                * w.dv;
            initial + sigma_q * phi_plus * a_measure
        }
    };
    let name = match variant {
        EnergyVariant::SpaceTime => "energy-spacetime",
        EnergyVariant::InitialSlab => "energy-initial",
    };
    Ok(InequalityReport::new(name, lhs, rhs)
        .with("k", k)
        .with("sigma", cutoff.sigma)
        .with("r", r)
        .with("eta", eta)
        .with("sublevel_measure", a_measure)
        .with("sup_term", sup_term)
        .with("grad_term", grad_term))
}

/// η_k = k²/[φ⁺_{k,2r}] with a⁺ over the forward cylinder of radius 2r and
/// length (2r)², and the two guards η_k ≤ (4r)² ≤ R₀².
fn critical_time(u: &SpaceTimeField, x0: &Point, t0: f64, r: f64, k: f64) -> Result<f64> {
    let params = *u.params();
    let (_, a_plus) = u.phase().extrema(params.dim, x0, 2.0 * r, t0, t0 + 4.0 * r * r);
    let eta = k * k / phi_plus_kr(&params, a_plus, k, 2.0 * r)?;
    let r0 = u.phase().r0();
    if eta > 16.0 * r * r || 16.0 * r * r > r0 * r0 {
        return Err(Error::Precondition(format!(
            "time guard fails: eta_k = {eta:.4e}, (4r)^2 = {:.4e}, R0^2 = {:.4e}",
            16.0 * r * r,
            r0 * r0
        )));
    }
    Ok(eta)
}

fn check_initial_mass(u: &SpaceTimeField, x0: &Point, t0: f64, r: f64, k: f64) -> Result<()> {
    if !(k > 0.0 && r > 0.0) {
        return Err(invalid("k, r", format!("need positive values, got k = {k}, r = {r}")));
    }
    let d = u.domain();
    if !d.contains_ball(x0, r) {
        return Err(Error::OutsideGrid(format!("ball of radius {r} at {x0:?}")));
    }
    let l0 = level_at(u, t0)?;
    let nodes = d.lattice().nodes_in_ball(x0, r);
    if nodes.is_empty() {
        return Err(Error::EmptySet(format!("no node in the ball of radius {r}")));
    }
    if let Some(&i) = nodes.iter().find(|&&i| u.slice(l0)[i] < k) {
        return Err(Error::Precondition(format!(
            "initial mass hypothesis fails: u = {} < k = {k} at {:?}",
            u.slice(l0)[i],
            d.coords(i)
        )));
    }
    Ok(())
}

/// Result of the critical-mass check: δ_emp = inf u / k on Q⁺_{r/2,η_k}.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalMass {
    pub report: InequalityReport,
    pub delta_emp: f64,
    pub eta_k: f64,
}

pub fn check_critical_mass(u: &SpaceTimeField, x0: &Point, t0: f64, r: f64, k: f64) -> Result<CriticalMass> {
    check_initial_mass(u, x0, t0, r, k)?;
    let eta_k = critical_time(u, x0, t0, r, k)?;
    let w = window(u, x0, 0.5 * r, t0, eta_k)?;
    let inf = w
        .levels
        .iter()
        .flat_map(|&l| w.nodes.iter().map(move |&i| u.slice(l)[i]))
        .fold(f64::INFINITY, f64::min);
    let delta_emp = inf / k;
    let mut report = InequalityReport::new("critical-mass", inf, k).with("k", k).with("r", r).with("eta_k", eta_k);
    report.ratio = delta_emp;
    report.pass = delta_emp > 0.0;
    Ok(CriticalMass { report, delta_emp, eta_k })
}

/// Per-slab ratio inf_{B_{r/2}} u(·,t) / (δ k Ψ⁻¹(1 + (t−t̄)/η_k)) for
/// stored levels t ∈ [t̄, t̄+(4r)²].
#[derive(Debug, Clone, PartialEq)]
pub struct PsiDecay {
    pub report: InequalityReport,
    pub slabs: Vec<(f64, f64)>,
}

pub fn check_psi_decay(
    u: &SpaceTimeField,
    x0: &Point,
    t0: f64,
    r: f64,
    k: f64,
    delta: f64,
    slack: f64,
) -> Result<PsiDecay> {
    check_initial_mass(u, x0, t0, r, k)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("{delta} must be positive")));
    }
    let eta_k = critical_time(u, x0, t0, r, k)?;
    let params = *u.params();
    let (_, a_plus) = u.phase().extrema(params.dim, x0, 4.0 * r, t0, t0 + 16.0 * r * r);
    let t_last = *u.times().last().expect("field has levels");
    let levels = u.levels_closed(t0, (t0 + 16.0 * r * r).min(t_last));
    let nodes = u.domain().lattice().nodes_in_ball(x0, 0.5 * r);
    if nodes.is_empty() || levels.is_empty() {
        return Err(Error::EmptySet("no node or level in the decay window".into()));
    }
    let mut slabs = Vec::with_capacity(levels.len());
    for &l in &levels {
        let t = u.times()[l];
        let inf = nodes.iter().map(|&i| u.slice(l)[i]).fold(f64::INFINITY, f64::min);
        let bound = delta * k * psi_inverse(a_plus, params.p, params.q, 1.0 + (t - t0).max(0.0) / eta_k)?;
        slabs.push((t, inf / bound));
    }
    let (t_min, min_ratio) = slabs.iter().copied().fold((t0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let mut report = InequalityReport::new("psi-decay", min_ratio, 1.0)
        .with("k", k)
        .with("r", r)
        .with("delta", delta)
        .with("eta_k", eta_k)
        .with("t_min", t_min);
    report.ratio = min_ratio;
    report.pass = min_ratio >= 1.0 - slack;
    Ok(PsiDecay { report, slabs })
}

/// The six terms of the negative-power energy inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativePowerTerms {
    pub sup: f64,
    pub grad_p: f64,
    pub grad_q: f64,
    pub time: f64,
    pub power_p: f64,
    pub power_q: f64,
}

/// Energy inequality for the fractional powers (u+δ)^{1−α} and
/// (u+δ)^{(s−α−1)/s}, s ∈ {p, q}. The cutoff multiplies the gradient
/// densities rather than entering them.
pub fn check_negative_power_energy(
    u: &SpaceTimeField,
    cutoff: &CutoffSpec,
    alpha: f64,
    shift: f64,
) -> Result<(InequalityReport, NegativePowerTerms)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("{alpha} not in (0, 1)")));
    }
    if !(shift >= 0.0) {
        return Err(invalid("delta_shift", format!("{shift} must be nonnegative")));
    }
    let params = *u.params();
    let (p, q) = (params.p, params.q);
    let w = window(u, &cutoff.center, cutoff.radius, cutoff.t0, cutoff.eta)?;
    let d = u.domain();
    let lat = d.lattice();
    let min = w
        .levels
        .iter()
        .flat_map(|&l| w.nodes.iter().map(move |&i| u.slice(l)[i]))
        .fold(f64::INFINITY, f64::min);
    if !(min + shift > 0.0) {
        return Err(Error::Precondition(format!("u + delta_shift vanishes (min u = {min}, shift = {shift})")));
    }
    let (_, a_plus) = u.phase().extrema(d.dim(), &cutoff.center, cutoff.radius, cutoff.t0, cutoff.t0 + cutoff.eta);
    let (bp, bq) = ((p - alpha - 1.0) / p, (q - alpha - 1.0) / q);
    let mut terms = NegativePowerTerms { sup: 0.0, grad_p: 0.0, grad_q: 0.0, time: 0.0, power_p: 0.0, power_q: 0.0 };
    let (mut gp, mut gq) = (vec![0.0; d.len()], vec![0.0; d.len()]);
    for &lvl in &w.levels {
        let t = u.times()[lvl];
        let s = u.slice(lvl);
        let mut mass = 0.0;
        for &i in &w.nodes {
            let v = s[i] + shift;
            mass += v.powf(1.0 - alpha) * cutoff.zeta(&d.coords(i), t, q);
            terms.time += v.powf(1.0 - alpha);
            terms.power_p += v.powf(p - alpha - 1.0);
            terms.power_q += v.powf(q - alpha - 1.0);
        }
        terms.sup = terms.sup.max(mass * w.dv);
        for &c in &w.cells {
            for i in lat.cell_corners(c) {
                let v = (s[i] + shift).max(0.0);
                gp[i] = v.powf(bp);
                gq[i] = v.powf(bq);
            }
        }
        let zp = |x: &Point| (1.0, [0.0, 0.0], cutoff.zeta(x, t, q));
        let zq = |x: &Point| (1.0, [0.0, 0.0], cutoff.zeta(x, t, q) * u.phase().value(x, t));
        for &c in &w.cells {
            terms.grad_p += cell_power(u, c, &gp, p, &zp) * w.dt;
            terms.grad_q += cell_power(u, c, &gq, q, &zq) * w.dt;
        }
    }
    let vol = w.dv * w.dt;
    terms.sup /= 1.0 - alpha;
    terms.grad_p *= alpha;
    terms.grad_q *= alpha;
    terms.time *= vol * cutoff.time_bound(q) / (1.0 - alpha);
    terms.power_p *= vol * alpha.powf(1.0 - p) * cutoff.grad_bound(q).powf(p);
    terms.power_q *= vol * alpha.powf(1.0 - q) * cutoff.grad_bound(q).powf(q) * a_plus;
    let lhs = terms.sup + terms.grad_p + terms.grad_q;
    let rhs = terms.time + terms.power_p + terms.power_q;
    let report = InequalityReport::new("negative-power", lhs, rhs)
        .with("alpha", alpha)
        .with("delta_shift", shift)
        .with("sigma", cutoff.sigma)
        .with("blowup", 1.0 / (1.0 - alpha));
    Ok((report, terms))
}

/// Reverse Hölder inequality on Q⁺_{r,η}(x̄,t̄) with I computed from u+δ.
pub fn check_reverse_holder(
    u: &SpaceTimeField,
    x0: &Point,
    t0: f64,
    r: f64,
    eta: f64,
    m: f64,
    shift: f64,
) -> Result<InequalityReport> {
    if !(m > 0.0 && m < 1.0) {
        return Err(invalid("m", format!("{m} not in (0, 1)")));
    }
    if !(shift >= 0.0) {
        return Err(invalid("delta_shift", format!("{shift} must be nonnegative")));
    }
    let r0 = u.phase().r0();
    if !(r < r0) {
        return Err(Error::Precondition(format!("radius {r} not below R0 = {r0}")));
    }
    if !(eta <= r * r) {
        return Err(Error::Precondition(format!("eta = {eta} exceeds r^2 = {}", r * r)));
    }
    let params = *u.params();
    let (p, q, n) = (params.p, params.q, params.dim as f64);
    let outer = window(u, x0, r, t0, eta)?;
    let inner = u.domain().lattice().nodes_in_ball(x0, 0.5 * r);
    if inner.is_empty() {
        return Err(Error::EmptySet(format!("no node in the ball of radius {}", 0.5 * r)));
    }
    let (_, a_plus) = u.phase().extrema(params.dim, x0, r, (t0 - eta).max(0.0), t0 + eta);
    let e = m * (p + n) / n;
    let mean = |l: usize, nodes: &[usize], f: &dyn Fn(f64) -> f64| {
        nodes.iter().map(|&i| f(u.slice(l)[i] + shift)).sum::<f64>() / nodes.len() as f64
    };
    let mut lhs_p = 0.0;
    let mut lhs_q = 0.0;
    let mut big_i: f64 = 0.0;
    for &l in &outer.levels {
        lhs_p += mean(l, &inner, &|v| v.powf(p - 2.0 + e)) * outer.dt;
        lhs_q += mean(l, &inner, &|v| v.powf(q - 2.0 + e)) * outer.dt;
        big_i = big_i.max(mean(l, &outer.nodes, &|v| v));
    }
    let lhs = lhs_p / r.powf(p) + a_plus * lhs_q / r.powf(q);
    let rhs = big_i.powf(e) * (1.0 + eta * (big_i.powf(p - 2.0) / r.powf(p) + a_plus * big_i.powf(q - 2.0) / r.powf(q)));
    Ok(InequalityReport::new("reverse-holder", lhs, rhs)
        .with("m", m)
        .with("r", r)
        .with("eta", eta)
        .with("I", big_i)
        .with("q_at_least_n", if q >= n { 1.0 } else { 0.0 }))
}

/// Ī = mean of u(·,t̄) over B_r and the window length
/// η₁ = min(η, b r²/φ⁺(Ī/r)) with a⁺ over the cylinder of radius 12r.
pub fn weak_harnack_window(u: &SpaceTimeField, x0: &Point, t0: f64, r: f64, eta: f64, b: f64) -> Result<(f64, f64)> {
    if !(r > 0.0 && eta > 0.0 && b > 0.0) {
        return Err(invalid("r, eta, b", format!("need positive values, got {r}, {eta}, {b}")));
    }
    let d = u.domain();
    if !d.contains_ball(x0, 16.0 * r) {
        return Err(Error::OutsideGrid(format!("ball of radius {} at {x0:?}", 16.0 * r)));
    }
    let params = *u.params();
    let l0 = level_at(u, t0)?;
    let ball = d.lattice().nodes_in_ball(x0, r);
    if ball.is_empty() {
        return Err(Error::EmptySet(format!("no node in the ball of radius {r}")));
    }
    let i_bar = ball.iter().map(|&i| u.slice(l0)[i]).sum::<f64>() / ball.len() as f64;
    let (_, a_plus) = u.phase().extrema(params.dim, x0, 12.0 * r, t0, t0 + 144.0 * r * r);
    let intrinsic = if i_bar > 0.0 { b * r * r / phi_q(a_plus, params.p, params.q, i_bar / r) } else { f64::INFINITY };
    Ok((i_bar, eta.min(intrinsic)))
}

/// Weak Harnack: C_emp = max over the window [t̄+η₁/2, t̄+η₁] of
/// Ī / (r + r φ⁻¹(r²/η) + inf_{B_2r} u(·,t)).
pub fn check_weak_harnack(u: &SpaceTimeField, x0: &Point, t0: f64, r: f64, eta: f64, b: f64) -> Result<InequalityReport> {
    let (i_bar, eta1) = weak_harnack_window(u, x0, t0, r, eta, b)?;
    let params = *u.params();
    let (_, a_plus) = u.phase().extrema(params.dim, x0, 12.0 * r, t0, t0 + 144.0 * r * r);
    let levels = u.levels_closed(t0 + 0.5 * eta1, t0 + eta1);
    if levels.is_empty() {
        return Err(Error::EmptySet(format!("no stored level in [{}, {}]", t0 + 0.5 * eta1, t0 + eta1)));
    }
    let ball2 = u.domain().lattice().nodes_in_ball(x0, 2.0 * r);
    let floor = r + r * phi_q_inverse(a_plus, params.p, params.q, r * r / eta)?;
    let min_bracket = levels
        .iter()
        .map(|&l| floor + ball2.iter().map(|&i| u.slice(l)[i]).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    Ok(InequalityReport::new("weak-harnack", i_bar, min_bracket)
        .with("r", r)
        .with("eta", eta)
        .with("eta1", eta1)
        .with("intrinsic_branch", if eta1 < eta { 1.0 } else { 0.0 })
        .with("b", b))
}
