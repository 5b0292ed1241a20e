//! Explicit conservative finite-difference solver for
//! u_t = div((|∇u|^{p−2} + a(x,t)|∇u|^{q−2})∇u) with Dirichlet data, plus the
//! truncation and averaging operations applied to its output.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{Cylinder, GridDomain, NodeLabel, Point};
use crate::phase::{DoublePhaseParams, PhaseField};

/// Gradient regularization inside |∇u|.
pub const EPS_REG: f64 = 1e-6;

/// Minimum work items per rayon task in the stepper loops.
const PAR_CHUNK: usize = 2048;

type DatumFn = dyn Fn(&Point, f64) -> f64 + Send + Sync;

/// Dirichlet datum f(x,t) on the closure of Ω_T. Also supplies u(·,0).
#[derive(Clone)]
pub struct BoundaryDatum {
    name: String,
    f: Arc<DatumFn>,
    /// Optional (constant, exponent) of a Hölder modulus.
    pub holder: Option<(f64, f64)>,
}

impl fmt::Debug for BoundaryDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryDatum").field("name", &self.name).field("holder", &self.holder).finish()
    }
}

impl BoundaryDatum {
    pub fn new(name: impl Into<String>, f: impl Fn(&Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f), holder: None }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), move |_, _| c)
    }

    pub fn with_holder(mut self, constant: f64, exponent: f64) -> Self {
        self.holder = Some((constant, exponent));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &Point, t: f64) -> f64 {
        (self.f)(x, t)
    }
}

/// (m^{p−2} + a m^{q−2}) g with m = sqrt(|g|² + ε²).
pub fn flux(params: &DoublePhaseParams, a: f64, g: &[f64]) -> Vec<f64> {
    let m = (g.iter().map(|v| v * v).sum::<f64>() + EPS_REG * EPS_REG).sqrt();
    let c = m.powf(params.p - 2.0) + a * m.powf(params.q - 2.0);
    g.iter().map(|v| c * v).collect()
}

/// The diffusion operator advanced by the solver.
#[derive(Debug, Clone)]
pub enum Operator {
    DoublePhase { params: DoublePhaseParams, phase: Arc<PhaseField> },
    /// Pure p-Laplacian path, without any phase evaluation.
    PLaplace { p: f64 },
}

impl Operator {
    /// Flux coefficient and the diffusivity used for the step bound.
    #[inline]
    fn coefficients(&self, a: f64, m: f64) -> (f64, f64) {
        match self {
            Operator::DoublePhase { params, .. } => {
                let mp = m.powf(params.p - 2.0);
                let mq = m.powf(params.q - 2.0);
                (mp + a * mq, (params.p - 1.0) * mp + a * (params.q - 1.0) * mq)
            }
            Operator::PLaplace { p } => {
                let mp = m.powf(p - 2.0);
                (mp, (p - 1.0) * mp)
            }
        }
    }

    fn phase_value(&self, x: &Point, t: f64) -> f64 {
        match self {
            Operator::DoublePhase { phase, .. } => phase.value(x, t),
            Operator::PLaplace { .. } => 0.0,
        }
    }

    fn time_independent(&self) -> bool {
        match self {
            Operator::DoublePhase { phase, .. } => phase.is_time_independent(),
            Operator::PLaplace { .. } => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub t_end: f64,
    pub cfl: f64,
    /// Spacing of stored time levels; the stepper lands on each exactly.
    pub output_interval: f64,
}

impl SolveOptions {
    pub fn new(t_end: f64, cfl: f64, output_interval: f64) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(invalid("T", format!("{t_end} must be positive")));
        }
        if !(cfl > 0.0 && cfl < 1.0) {
            return Err(invalid("cfl", format!("{cfl} not in (0, 1)")));
        }
        if !(output_interval > 0.0 && output_interval <= t_end) {
            return Err(invalid("output_interval", format!("{output_interval} not in (0, T]")));
        }
        Ok(Self { t_end, cfl, output_interval })
    }
}

/// Face list for one axis: (left node, right node, transverse stencil).
struct Faces {
    left: Vec<usize>,
    right: Vec<usize>,
    /// Nodes (l−, l+, r−, r+) for the averaged transverse difference (2-D).
    transverse: Vec<[usize; 4]>,
    midpoints: Vec<Point>,
    a_cache: Option<Vec<f64>>,
    flux: Vec<f64>,
}

/// Time stepper holding the current state. `prepare` computes face fluxes
/// and the admissible step; `apply` advances by a chosen step.
pub struct Stepper {
    domain: Arc<GridDomain>,
    op: Operator,
    datum: BoundaryDatum,
    cfl: f64,
    u: Vec<f64>,
    t: f64,
    steps: usize,
    faces: Vec<Faces>,
    interior: Vec<usize>,
    /// For each interior node: (axis, face id, sign) contributions.
    stencil: Vec<Vec<(usize, usize, f64)>>,
    dirichlet: Vec<usize>,
    prepared: bool,
}

impl Stepper {
    pub fn new(domain: Arc<GridDomain>, op: Operator, datum: BoundaryDatum, cfl: f64) -> Result<Self> {
        let u = (0..domain.len()).map(|i| datum.eval(&domain.coords(i), 0.0)).collect();
        Self::with_initial(domain, op, datum, cfl, u)
    }

    /// Starts from explicit nodal values; Dirichlet nodes are reset to f(·,0).
    pub fn with_initial(
        domain: Arc<GridDomain>,
        op: Operator,
        datum: BoundaryDatum,
        cfl: f64,
        mut u: Vec<f64>,
    ) -> Result<Self> {
        if u.len() != domain.len() {
            return Err(invalid("initial", "length does not match the domain"));
        }
        if !(cfl > 0.0 && cfl < 1.0) {
            return Err(invalid("cfl", format!("{cfl} not in (0, 1)")));
        }
        if let Operator::DoublePhase { params, .. } = &op {
            if params.dim != domain.dim() {
                return Err(invalid("N", "parameter dimension differs from the domain"));
            }
        }
        let lat = domain.lattice().clone();
        let [nx, ny] = lat.shape();
        let dim = lat.dim();
        let periodic = domain.is_periodic();
        let wrap = |i: i64, n: usize| -> Option<usize> {
            if periodic {
                Some(i.rem_euclid(n as i64) as usize)
            } else if i < 0 || i >= n as i64 {
                None
            } else {
                Some(i as usize)
            }
        };
        let interior: Vec<usize> = (0..lat.len()).filter(|&i| domain.inside(i)).collect();
        let dirichlet: Vec<usize> = (0..lat.len()).filter(|&i| !domain.inside(i)).collect();
        let mut faces = Vec::new();
        let mut face_of: Vec<Vec<Option<usize>>> = Vec::new();
        for axis in 0..dim {
            let mut f = Faces {
                left: Vec::new(),
                right: Vec::new(),
                transverse: Vec::new(),
                midpoints: Vec::new(),
                a_cache: None,
                flux: Vec::new(),
            };
            let mut ids = vec![None; lat.len()];
            for node in 0..lat.len() {
                let [i, j] = lat.multi(node);
                let (ri, rj) = if axis == 0 { (i as i64 + 1, j as i64) } else { (i as i64, j as i64 + 1) };
                let (Some(ri), Some(rj)) = (wrap(ri, nx), wrap(rj, ny)) else { continue };
                let right = lat.index([ri, rj]);
                if !(domain.inside(node) || domain.inside(right)) {
                    continue;
                }
                let mut tr = [node, node, right, right];
                if dim == 2 {
                    let other = 1 - axis;
                    let shift = |n: usize, d: i64| -> usize {
                        let [a, b] = lat.multi(n);
                        let mut c = [a as i64, b as i64];
                        c[other] += d;
                        let sz = if other == 0 { nx } else { ny };
                        match wrap(c[other], sz) {
                            Some(v) => {
                                let mut cc = [a, b];
                                cc[other] = v;
                                lat.index(cc)
                            }
                            None => n,
                        }
                    };
                    tr = [shift(node, -1), shift(node, 1), shift(right, -1), shift(right, 1)];
                }
                let x = lat.coords(node);
                let mut mid = x;
                mid[axis] += 0.5 * lat.h();
                ids[node] = Some(f.left.len());
                f.left.push(node);
                f.right.push(right);
                f.transverse.push(tr);
                f.midpoints.push(mid);
            }
            f.flux = vec![0.0; f.left.len()];
            if op.time_independent() {
                f.a_cache = Some(f.midpoints.iter().map(|m| op.phase_value(m, 0.0)).collect());
            }
            faces.push(f);
            face_of.push(ids);
        }
        let stencil = interior
            .iter()
            .map(|&node| {
                let mut s = Vec::with_capacity(2 * dim);
                for axis in 0..dim {
                    if let Some(fid) = face_of[axis][node] {
                        s.push((axis, fid, 1.0));
                    }
                    let [i, j] = lat.multi(node);
                    let (li, lj) = if axis == 0 { (i as i64 - 1, j as i64) } else { (i as i64, j as i64 - 1) };
                    if let (Some(li), Some(lj)) = (wrap(li, nx), wrap(lj, ny)) {
                        if let Some(fid) = face_of[axis][lat.index([li, lj])] {
                            s.push((axis, fid, -1.0));
                        }
                    }
                }
                s
            })
            .collect();
        for &i in &dirichlet {
            u[i] = datum.eval(&lat.coords(i), 0.0);
        }
        Ok(Self { domain, op, datum, cfl, u, t: 0.0, steps: 0, faces, interior, stencil, dirichlet, prepared: false })
    }

    /// Moves the clock to `t0` and reimposes the datum there.
    pub fn starting_at(mut self, t0: f64) -> Self {
        self.t = t0;
        let lat = self.domain.lattice();
        for &i in &self.dirichlet {
            self.u[i] = self.datum.eval(&lat.coords(i), t0);
        }
        self
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    /// Computes face fluxes at the current state and returns the largest
    /// step allowed by the diffusivity bound.
    pub fn prepare(&mut self) -> f64 {
        let h = self.domain.h();
        let dim = self.domain.dim();
        let inv_h = 1.0 / h;
        let eps2 = EPS_REG * EPS_REG;
        let (u, op, t) = (&self.u, &self.op, self.t);
        let mut d_max: f64 = 0.0;
        for f in &mut self.faces {
            let Faces { left, right, transverse, midpoints, a_cache, flux } = f;
            let face_max = flux
                .par_iter_mut()
                .with_min_len(PAR_CHUNK)
                .enumerate()
                .map(|(k, out)| {
                    let (l, r) = (left[k], right[k]);
                    let gn = (u[r] - u[l]) * inv_h;
                    let gt = if dim == 2 {
                        let [lm, lp, rm, rp] = transverse[k];
                        ((u[lp] - u[lm]) + (u[rp] - u[rm])) * 0.25 * inv_h
                    } else {
                        0.0
                    };
                    let m = (gn * gn + gt * gt + eps2).sqrt();
                    let a = match a_cache.as_deref() {
                        Some(c) => c[k],
                        None => op.phase_value(&midpoints[k], t),
                    };
                    let (c, d) = op.coefficients(a, m);
                    *out = c * gn;
                    d
                })
                .reduce(|| 0.0, f64::max);
            d_max = d_max.max(face_max);
        }
        self.prepared = true;
        if d_max > 0.0 {
            self.cfl * h * h / (2.0 * dim as f64 * d_max)
        } else {
            f64::INFINITY
        }
    }

    /// Advances by `dt` using the fluxes from the last `prepare`.
    pub fn apply(&mut self, dt: f64) -> Result<()> {
        if !self.prepared {
            self.prepare();
        }
        let scale = dt / self.domain.h();
        let (u, faces) = (&self.u, &self.faces);
        let updated: Vec<f64> = self
            .interior
            .par_iter()
            .with_min_len(PAR_CHUNK)
            .zip(&self.stencil)
            .map(|(&node, st)| {
                let div: f64 = st.iter().map(|&(axis, fid, sign)| sign * faces[axis].flux[fid]).sum();
                u[node] + scale * div
            })
            .collect();
        if let Some(k) = updated.iter().position(|v| !v.is_finite()) {
            return Err(Error::SolverAborted {
                step: self.steps,
                time: self.t,
                reason: format!("non-finite value at node {:?}", self.domain.coords(self.interior[k])),
            });
        }
        self.t += dt;
        self.steps += 1;
        let (lat, datum, t) = (self.domain.lattice(), &self.datum, self.t);
        let boundary: Vec<f64> =
            self.dirichlet.par_iter().with_min_len(PAR_CHUNK).map(|&i| datum.eval(&lat.coords(i), t)).collect();
        for (&node, v) in self.interior.iter().zip(updated) {
            self.u[node] = v;
        }
        for (&node, v) in self.dirichlet.iter().zip(boundary) {
            self.u[node] = v;
        }
        self.prepared = false;
        Ok(())
    }

    /// Advances to `target` with admissible steps, landing on it exactly.
    pub fn advance_to(&mut self, target: f64, t_scale: f64) -> Result<(f64, f64)> {
        let mut dt_min = f64::INFINITY;
        let mut dt_max: f64 = 0.0;
        while target - self.t > 1e-12 * t_scale {
            let bound = self.prepare();
            let remaining = target - self.t;
            let dt = bound.min(remaining);
            if dt < 1e-12 * t_scale {
                return Err(Error::SolverAborted {
                    step: self.steps,
                    time: self.t,
                    reason: format!("time step {dt:e} underflows"),
                });
            }
            if dt < remaining {
                dt_min = dt_min.min(dt);
            }
            dt_max = dt_max.max(dt);
            self.apply(dt)?;
        }
        self.t = target;
        Ok((dt_min, dt_max))
    }
}

/// Discrete solution on Ω × [0, T] at uniformly spaced stored time levels.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    domain: Arc<GridDomain>,
    phase: Arc<PhaseField>,
    params: DoublePhaseParams,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl SpaceTimeField {
    /// Field sampled from a closed form, for synthetic verifier inputs.
    pub fn from_fn(
        domain: Arc<GridDomain>,
        phase: Arc<PhaseField>,
        params: DoublePhaseParams,
        times: Vec<f64>,
        f: impl Fn(&Point, f64) -> f64,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(invalid("times", "at least one time level required"));
        }
        let values = times
            .iter()
            .map(|&t| (0..domain.len()).map(|i| f(&domain.coords(i), t)).collect())
            .collect();
        Ok(Self { domain, phase, params, times, values, steps: 0, dt_min: f64::NAN, dt_max: f64::NAN })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn phase(&self) -> &Arc<PhaseField> {
        &self.phase
    }

    pub fn params(&self) -> &DoublePhaseParams {
        &self.params
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn len_times(&self) -> usize {
        self.times.len()
    }

    /// Spacing of the stored levels (the first gap).
    pub fn time_step(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    /// M = sup |u| over all stored values.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Level indices with lo < t <= hi (up to roundoff).
    pub fn levels_in(&self, lo: f64, hi: f64) -> Vec<usize> {
        let tol = 1e-9 * self.time_step().max(1e-300);
        (0..self.times.len()).filter(|&k| self.times[k] > lo + tol && self.times[k] <= hi + tol).collect()
    }

    /// Level indices with lo <= t <= hi (up to roundoff).
    pub fn levels_closed(&self, lo: f64, hi: f64) -> Vec<usize> {
        let tol = 1e-9 * self.time_step().max(1e-300);
        (0..self.times.len()).filter(|&k| self.times[k] >= lo - tol && self.times[k] <= hi + tol).collect()
    }

    /// Same geometry and times with values transformed pointwise.
    pub fn map(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, slice)| slice.iter().enumerate().map(|(i, &v)| f(k, i, v)).collect())
            .collect();
        Self { values, ..self.clone() }
    }
}

/// Runs the explicit scheme from u(·,0) = f(·,0) up to T.
pub fn solve(
    domain: Arc<GridDomain>,
    phase: Arc<PhaseField>,
    params: DoublePhaseParams,
    datum: &BoundaryDatum,
    opts: &SolveOptions,
) -> Result<SpaceTimeField> {
    let op = Operator::DoublePhase { params, phase: phase.clone() };
    let stepper = Stepper::new(domain.clone(), op, datum.clone(), opts.cfl)?;
    run_stepper(stepper, phase, params, opts)
}

/// Runs an already initialized stepper, storing uniform output levels.
pub fn run_stepper(
    mut stepper: Stepper,
    phase: Arc<PhaseField>,
    params: DoublePhaseParams,
    opts: &SolveOptions,
) -> Result<SpaceTimeField> {
    let t_start = stepper.time();
    if !(opts.t_end > t_start) {
        return Err(invalid("T", format!("{} does not exceed the start time {t_start}", opts.t_end)));
    }
    let n_out = ((opts.t_end - t_start) / opts.output_interval - 1e-9).ceil() as usize;
    let mut times = vec![t_start];
    let mut values = vec![stepper.values().to_vec()];
    let (mut dt_min, mut dt_max) = (f64::INFINITY, 0.0f64);
    for k in 1..=n_out {
        let target = (t_start + k as f64 * opts.output_interval).min(opts.t_end);
        let (lo, hi) = stepper.advance_to(target, opts.t_end)?;
        dt_min = dt_min.min(lo);
        dt_max = dt_max.max(hi);
        times.push(target);
        values.push(stepper.values().to_vec());
    }
    let domain = stepper.domain.clone();
    Ok(SpaceTimeField { domain, phase, params, times, values, steps: stepper.steps(), dt_min, dt_max })
}

/// Re-solves from stored level `level` over `span` with `n_levels` evenly
/// spaced outputs, resolving windows shorter than the stored spacing.
pub fn restart(
    u: &SpaceTimeField,
    level: usize,
    datum: &BoundaryDatum,
    span: f64,
    n_levels: usize,
    cfl: f64,
) -> Result<SpaceTimeField> {
    if n_levels == 0 || !(span > 0.0) {
        return Err(invalid("span", format!("{span} with {n_levels} levels")));
    }
    let t0 = u.times()[level];
    let op = Operator::DoublePhase { params: u.params, phase: u.phase.clone() };
    let stepper = Stepper::with_initial(u.domain.clone(), op, datum.clone(), cfl, u.slice(level).to_vec())?.starting_at(t0);
    let opts = SolveOptions { t_end: t0 + span, cfl, output_interval: span / n_levels as f64 };
    run_stepper(stepper, u.phase.clone(), u.params, &opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Truncated field u_k^± (zero outside Ω and outside the cylinder) and,
/// for a supplied μ, the super-solution w = μ − u_k.
#[derive(Debug, Clone)]
pub struct Truncation {
    pub uk: SpaceTimeField,
    pub w: Option<SpaceTimeField>,
}

pub fn truncation_extension(
    u: &SpaceTimeField,
    k: f64,
    sign: Sign,
    cylinder: &Cylinder,
    mu: Option<f64>,
) -> Result<Truncation> {
    let d = u.domain().clone();
    let nodes = d.lattice().nodes_in_ball(&cylinder.center, cylinder.radius);
    let levels = u.levels_in(cylinder.t_start(), cylinder.t_end());
    for &lvl in &levels {
        for &i in &nodes {
            if d.label(i) != NodeLabel::Boundary {
                continue;
            }
            let f = u.slice(lvl)[i];
            let bad = match sign {
                Sign::Plus => f > k,
                Sign::Minus => f < k,
            };
            if bad {
                return Err(Error::Precondition(format!(
                    "level k = {k} violates the lateral datum {f} at {:?}, t = {}",
                    d.coords(i),
                    u.times()[lvl]
                )));
            }
        }
    }
    let mut in_cyl = vec![false; d.len()];
    for &i in &nodes {
        in_cyl[i] = d.inside(i);
    }
    let level_in: Vec<bool> = (0..u.len_times()).map(|l| levels.contains(&l)).collect();
    let uk = u.map(|lvl, i, v| {
        if !(level_in[lvl] && in_cyl[i]) {
            return 0.0;
        }
        match sign {
            Sign::Plus => (v - k).max(0.0),
            Sign::Minus => (k - v).max(0.0),
        }
    });
    let w = match mu {
        None => None,
        Some(mu) => {
            let sup = uk.sup_abs();
            if mu < sup {
                return Err(Error::Precondition(format!("mu = {mu} below sup u_k = {sup}")));
            }
            Some(uk.map(|_, _, v| mu - v))
        }
    };
    Ok(Truncation { uk, w })
}

/// 𝓘(η, r) = max over stored levels t ∈ [t0 − η, t0 − η/4] of the mean of
/// w over nodes of B_2r(x0).
pub fn sup_average_i(w: &SpaceTimeField, x0: &Point, r: f64, eta: f64, t0: f64) -> Result<f64> {
    let d = w.domain();
    if !d.contains_ball(x0, 2.0 * r) {
        return Err(Error::OutsideGrid(format!("B_2r with r = {r}")));
    }
    let t_last = *w.times().last().expect("field has levels");
    if t0 - eta < -1e-12 || t0 > t_last * (1.0 + 1e-12) {
        return Err(Error::OutsideGrid(format!("window [{}, {t0}] outside [0, {t_last}]", t0 - eta)));
    }
    let nodes = d.lattice().nodes_in_ball(x0, 2.0 * r);
    if nodes.is_empty() {
        return Err(Error::EmptySet(format!("no node in B_2r with r = {r}")));
    }
    let levels = w.levels_closed(t0 - eta, t0 - 0.25 * eta);
    if levels.is_empty() {
        return Err(Error::EmptySet(format!("no stored level in [{}, {}]", t0 - eta, t0 - 0.25 * eta)));
    }
    Ok(levels
        .iter()
        .map(|&l| nodes.iter().map(|&i| w.slice(l)[i]).sum::<f64>() / nodes.len() as f64)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec, Scenario};

    fn params(dim: usize) -> DoublePhaseParams {
        DoublePhaseParams::with_exponents(3.0, 4.0, dim).unwrap()
    }

    #[test]
    fn flux_examples() {
        let pr = DoublePhaseParams::with_exponents(4.0, 5.0, 2).unwrap();
        assert_eq!(flux(&pr, 0.3, &[0.0, 0.0]), vec![0.0, 0.0]);
        let f = flux(&pr, 0.0, &[2.0, 0.0]);
        // |g|^2 g = 4 * (2, 0)
        assert!((f[0] - 8.0).abs() < 1e-9 && f[1] == 0.0);
        let g = [0.3, -1.7];
        let a = flux(&pr, 0.5, &g);
        let b = flux(&pr, 0.5, &[-0.3, 1.7]);
        assert_eq!(a[0], -b[0]);
        assert_eq!(a[1], -b[1]);
    }

    #[test]
    fn constant_state_is_stationary() {
        let d = Arc::new(build_domain(&DomainSpec::new(Scenario::FlatHalfspace, 2), 0.1).unwrap());
        let phase = Arc::new(PhaseField::constant(1.0, 1.0, 1.0).unwrap());
        let opts = SolveOptions::new(0.05, 0.5, 0.01).unwrap();
        let u = solve(d, phase, params(2), &BoundaryDatum::constant(0.7), &opts).unwrap();
        assert!(u.values.iter().flatten().all(|&v| v == 0.7));
    }

    #[test]
    fn linear_datum_is_steady_in_one_dimension() {
        // Interior (0, 1) of the half-line scenario on [-1, 1] is (0, 1).
        let d = Arc::new(build_domain(&DomainSpec::new(Scenario::FlatHalfspace, 1), 1.0 / 16.0).unwrap());
        let datum = BoundaryDatum::new("linear", |x, t| if t == 0.0 { 0.0 } else { x[0].max(0.0) });
        let opts = SolveOptions::new(2.0, 0.5, 0.5).unwrap();
        let u = solve(d.clone(), Arc::new(PhaseField::zero()), params(1), &datum, &opts).unwrap();
        let last = u.slice(u.len_times() - 1);
        for i in 0..d.len() {
            if d.inside(i) {
                assert!((last[i] - d.coords(i)[0]).abs() < 1e-3, "{} vs {}", last[i], d.coords(i)[0]);
            }
        }
    }

    #[test]
    fn sup_average_examples() {
        let d = Arc::new(build_domain(&DomainSpec::new(Scenario::FlatHalfspace, 2), 0.1).unwrap());
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let w = SpaceTimeField::from_fn(d.clone(), Arc::new(PhaseField::zero()), params(2), times.clone(), |_, _| 2.5)
            .unwrap();
        assert_eq!(sup_average_i(&w, &[0.0, 0.0], 0.2, 0.8, 1.0).unwrap(), 2.5);
        let w = SpaceTimeField::from_fn(d, Arc::new(PhaseField::zero()), params(2), times, |_, t| t).unwrap();
        assert!((sup_average_i(&w, &[0.0, 0.0], 0.2, 0.8, 1.0).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn truncation_examples() {
        let d = Arc::new(build_domain(&DomainSpec::new(Scenario::FlatHalfspace, 2), 0.1).unwrap());
        let times: Vec<f64> = (0..=4).map(|k| k as f64 * 0.25).collect();
        let u = SpaceTimeField::from_fn(d.clone(), Arc::new(PhaseField::zero()), params(2), times, |_, _| 0.4).unwrap();
        let cyl = Cylinder::backward([0.0, 0.0], 1.0, 0.5, 0.6).unwrap();
        let t = truncation_extension(&u, 0.4, Sign::Plus, &cyl, Some(1.0)).unwrap();
        assert!(t.uk.values.iter().flatten().all(|&v| v == 0.0));
        assert!(t.w.unwrap().values.iter().flatten().all(|&v| v == 1.0));
        let t = truncation_extension(&u, 0.9, Sign::Plus, &cyl, None).unwrap();
        assert!(t.uk.values.iter().flatten().all(|&v| v == 0.0));
        assert!(truncation_extension(&u, 0.1, Sign::Plus, &cyl, None).is_err());
    }
}
