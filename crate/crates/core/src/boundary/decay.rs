use std::fmt;

use super::profile::DeltaProfile;
use crate::capacity::classify_phase_mode;
use crate::error::{invalid, Error, Result};
use crate::geometry::{Cylinder, NodeLabel, Point};
use crate::pde::SpaceTimeField;
use crate::phase::{maximal_radius, Mode};

#[derive(Debug, Clone, PartialEq)]
pub struct AccommodationConfig {
    /// Slack exponent ε ∈ (0, 1).
    pub epsilon: f64,
    pub gamma_star: f64,
    pub c_p: f64,
    pub c_q: f64,
    /// Candidate radii, scanned from the largest; empty means the profile's
    /// sample radii.
    pub candidates: Vec<f64>,
}

impl Default for AccommodationConfig {
    fn default() -> Self {
        Self { epsilon: 0.5, gamma_star: 1.0, c_p: 1.0, c_q: 1.0, candidates: Vec::new() }
    }
}

/// The starting cylinder Q₀ and the quantities measured on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Accommodation {
    pub mode: Mode,
    pub exponent: f64,
    pub epsilon: f64,
    pub gamma_star: f64,
    pub center: Point,
    pub t0: f64,
    pub rho0: f64,
    pub delta0: f64,
    /// η̃₀ = 3γ* δ(ρ₀)^{2−s} ρ₀^{s−ε}.
    pub eta_tilde0: f64,
    pub q0: Cylinder,
    /// osc u over the closure of Ω × (0, T].
    pub omega0: f64,
    pub k_plus: f64,
    pub k_minus: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    /// osc of the lateral values over Q₀.
    pub datum_osc: f64,
    pub maximal_radius: Option<f64>,
}

/// Ω nodes and lateral nodes: the closure on which oscillations of a solution
/// continuous up to the boundary are measured.
fn in_closure(d: &crate::geometry::GridDomain, i: usize) -> bool {
    d.label(i) != NodeLabel::Exterior
}

fn global_oscillation(u: &SpaceTimeField) -> f64 {
    let d = u.domain();
    let (lo, hi) = (0..u.len_times())
        .filter(|&l| u.times()[l] > 0.0)
        .flat_map(|l| (0..d.len()).filter(|&i| in_closure(d, i)).map(move |i| u.slice(l)[i]))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Extremes of u over the lateral nodes and over Ω inside B_ρ × (t0 − η, t0].
fn cylinder_extremes(u: &SpaceTimeField, cyl: &Cylinder) -> Option<((f64, f64), (f64, f64))> {
    let d = u.domain();
    let nodes = d.lattice().nodes_in_ball(&cyl.center, cyl.radius);
    let levels = u.levels_in(cyl.t_start(), cyl.t_end());
    let mut lateral = (f64::INFINITY, f64::NEG_INFINITY);
    let mut omega = (f64::INFINITY, f64::NEG_INFINITY);
    for &l in &levels {
        for &i in &nodes {
            let v = u.slice(l)[i];
            let slot = match d.label(i) {
                NodeLabel::Boundary => &mut lateral,
                NodeLabel::Interior => &mut omega,
                NodeLabel::Exterior => continue,
            };
            slot.0 = slot.0.min(v);
            slot.1 = slot.1.max(v);
        }
    }
    (lateral.1 >= lateral.0 && omega.1 >= omega.0).then_some((lateral, omega))
}

/// Largest candidate ρ₀ whose cylinder B_ρ₀ × (t0 − η̃₀, t0] fits the time
/// range, satisfies the alternative threshold for every nonzero μ₀^±, and
/// contains the intrinsic cylinder of radius ρ₀ built on ω₀.
pub fn accommodate_degeneracy(
    u: &SpaceTimeField,
    profile: &dyn DeltaProfile,
    x0: &Point,
    t0: f64,
    cfg: &AccommodationConfig,
) -> Result<Accommodation> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(invalid("epsilon", format!("{} not in (0, 1)", cfg.epsilon)));
    }
    if !(cfg.gamma_star > 0.0 && cfg.c_p > 0.0 && cfg.c_q > 0.0) {
        return Err(invalid("gamma_star, C_p, C_q", "must be positive"));
    }
    let params = *u.params();
    let phase = u.phase();
    let mode = classify_phase_mode(phase, x0, t0);
    let s = params.exponent(mode);
    let r0 = phase.r0();
    let (radius_cap, big_r) = match mode {
        Mode::P => (r0, None),
        Mode::Q => {
            let big_r = maximal_radius(phase, &params, x0, t0)?.radius;
            (big_r.min(r0) / 24.0, Some(big_r))
        }
    };
    let time_cap = t0.min(r0 * r0);
    let omega0 = global_oscillation(u);
    let mut candidates = if cfg.candidates.is_empty() { profile.sample_radii() } else { cfg.candidates.clone() };
    candidates.sort_by(|a, b| b.total_cmp(a));

    let mut any_positive_delta = false;
    for rho in candidates {
        if !(rho < radius_cap) || !u.domain().contains_ball(x0, rho) {
            continue;
        }
        let Some(delta) = profile.delta(rho).filter(|&d| d > 0.0) else { continue };
        any_positive_delta = true;
        let eta_tilde = 3.0 * cfg.gamma_star * delta.powf(2.0 - s) * rho.powf(s - cfg.epsilon);
        if !(eta_tilde < time_cap) {
            continue;
        }
        if omega0 > 0.0 && cfg.gamma_star * rho.powf(s) * omega0.powf(2.0 - s) > eta_tilde {
            continue;
        }
        let q0 = Cylinder::backward(*x0, t0, rho, eta_tilde)?;
        let Some(((f_lo, f_hi), (u_lo, u_hi))) = cylinder_extremes(u, &q0) else { continue };
        let (k_plus, k_minus) = (f_hi, f_lo);
        let (mu_plus, mu_minus) = ((u_hi - k_plus).max(0.0), (k_minus - u_lo).max(0.0));
        let threshold = match mode {
            Mode::P => 2.0 * cfg.c_p * rho,
            Mode::Q => {
                4.0 * cfg.c_q * rho + (4.0 * cfg.c_q).powf(1.0 / (s - 1.0)) * rho / big_r.expect("q-mode has R")
            }
        };
        if [mu_plus, mu_minus].iter().any(|&mu| mu > 0.0 && !(mu * delta > threshold)) {
            continue;
        }
        return Ok(Accommodation {
            mode,
            exponent: s,
            epsilon: cfg.epsilon,
            gamma_star: cfg.gamma_star,
            center: *x0,
            t0,
            rho0: rho,
            delta0: delta,
            eta_tilde0: eta_tilde,
            q0,
            omega0,
            k_plus,
            k_minus,
            mu_plus,
            mu_minus,
            datum_osc: f_hi - f_lo,
            maximal_radius: big_r,
        });
    }
    if any_positive_delta {
        Err(Error::ResolutionLimited(format!("no candidate radius meets the {} threshold and time bounds", mode.label())))
    } else {
        Err(Error::NoAdmissibleRadius(format!("delta vanishes at every candidate radius around {x0:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayConfig {
    /// Dyadic radii ρ₀ 2^{−j}, j < levels, are tried.
    pub levels: usize,
    /// Constant of the additive ρ₀^{ε/(s−2)} term in the envelope.
    pub gamma_hat: f64,
    /// Log floor relative to ω₀.
    pub floor: f64,
    pub min_levels: usize,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { levels: 6, gamma_hat: 1.0, floor: 1e-12, min_levels: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub rho: f64,
    pub cylinder: Cylinder,
    pub osc: f64,
    pub wiener_integral: f64,
    pub datum_osc: f64,
    /// ω₀ e^{−∫} + datum osc + ρ₀^{ε/(s−2)}, constants set to 1.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationTrace {
    pub mode: Mode,
    pub rho0: f64,
    pub omega0: f64,
    pub entries: Vec<TraceEntry>,
}

impl OscillationTrace {
    pub fn is_monotone(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].osc <= w[0].osc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Fitted 1/γ.
    pub slope: f64,
    pub intercept: f64,
    /// Slope of log osc against log ρ.
    pub holder_exponent: f64,
    /// Smallest γ̂ for which the fitted envelope holds.
    pub gamma_hat_needed: f64,
    pub envelope_holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayStatus {
    Pass,
    Fail,
    /// The Wiener integral does not look divergent; nothing is asserted.
    Inconclusive,
}

impl fmt::Display for DecayStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecayStatus::Pass => "pass",
            DecayStatus::Fail => "fail",
            DecayStatus::Inconclusive => "criterion-inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub trace: OscillationTrace,
    /// `None` when the oscillation vanishes identically.
    pub fit: Option<DecayFit>,
    pub status: DecayStatus,
}

/// Least-squares line y = a + b x.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Oscillation of u over the intrinsic cylinders B_ρ × (t0 − γ*ρ^s ω₀^{2−s}, t0]
/// at dyadic ρ below ρ₀, fitted against the Wiener integral.
pub fn verify_decay(
    u: &SpaceTimeField,
    acc: &Accommodation,
    profile: &dyn DeltaProfile,
    cfg: &DecayConfig,
) -> Result<DecayReport> {
    let d = u.domain();
    let s = acc.exponent;
    let slack = acc.rho0.powf(acc.epsilon / (s - 2.0));
    let mut entries = Vec::new();
    for j in 0..cfg.levels {
        let rho = acc.rho0 * 0.5f64.powi(j as i32);
        let Some(integral) = profile.integral(rho, acc.rho0) else { break };
        let eta = if acc.omega0 > 0.0 {
            acc.gamma_star * rho.powf(s) * acc.omega0.powf(2.0 - s)
        } else {
            acc.eta_tilde0 * (rho / acc.rho0).powf(s)
        };
        let cylinder = Cylinder::backward(acc.center, acc.t0, rho, eta)?;
        let nodes: Vec<usize> =
            d.lattice().nodes_in_ball(&acc.center, rho).into_iter().filter(|&i| in_closure(d, i)).collect();
        let levels = u.levels_in(cylinder.t_start(), cylinder.t_end());
        if !nodes.iter().any(|&i| d.inside(i)) || levels.is_empty() {
            break;
        }
        let (lo, hi) = levels
            .iter()
            .flat_map(|&l| nodes.iter().map(move |&i| u.slice(l)[i]))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        entries.push(TraceEntry {
            rho,
            cylinder,
            osc: hi - lo,
            wiener_integral: integral,
            datum_osc: acc.datum_osc,
            rhs: acc.omega0 * (-integral).exp() + acc.datum_osc + slack,
        });
    }
    if entries.len() < cfg.min_levels {
        return Err(Error::InsufficientScale { found: entries.len(), needed: cfg.min_levels });
    }
    let trace = OscillationTrace { mode: acc.mode, rho0: acc.rho0, omega0: acc.omega0, entries };
    let floor = cfg.floor * acc.omega0;
    if acc.omega0 == 0.0 || trace.entries.iter().all(|e| e.osc <= floor) {
        return Ok(DecayReport { trace, fit: None, status: DecayStatus::Pass });
    }
    let xs: Vec<f64> = trace.entries.iter().map(|e| -e.wiener_integral).collect();
    let ys: Vec<f64> = trace.entries.iter().map(|e| (e.osc - e.datum_osc).max(floor).ln()).collect();
    let (intercept, slope) = linear_fit(&xs, &ys);
    let positive: Vec<&TraceEntry> = trace.entries.iter().filter(|e| e.osc > floor).collect();
    let holder_exponent = if positive.len() >= 2 {
        let lx: Vec<f64> = positive.iter().map(|e| e.rho.ln()).collect();
        let ly: Vec<f64> = positive.iter().map(|e| e.osc.ln()).collect();
        linear_fit(&lx, &ly).1
    } else {
        f64::NAN
    };
    let excess = trace
        .entries
        .iter()
        .map(|e| e.osc - acc.omega0 * (-slope * e.wiener_integral).exp() - e.datum_osc)
        .fold(0.0, f64::max);
    let gamma_hat_needed = excess / slack;
    let envelope_holds = gamma_hat_needed <= cfg.gamma_hat;
    let fit = DecayFit { slope, intercept, holder_exponent, gamma_hat_needed, envelope_holds };
    let status = if !profile.divergence_consistent() {
        DecayStatus::Inconclusive
    } else if slope > 0.0 && slope.is_finite() && envelope_holds && trace.is_monotone() {
        DecayStatus::Pass
    } else {
        DecayStatus::Fail
    };
    Ok(DecayReport { trace, fit: Some(fit), status })
}
