//! Intrinsic geometry at a lateral boundary point: time-lengths, the
//! capacity estimate, the oscillation alternative, radii extraction and the
//! oscillation-decay verifier.

mod decay;
mod profile;
mod radii;

pub use decay::{
    accommodate_degeneracy, verify_decay, Accommodation, AccommodationConfig, DecayConfig, DecayFit, DecayReport,
    DecayStatus, OscillationTrace, TraceEntry,
};
pub use profile::{DeltaProfile, FnProfile};
pub use radii::{extract_radii, minimal_index, RadiiConfig, RadiiProperties, RadiiSequence, Termination};

use crate::error::{invalid, Error, Result};
use crate::estimates::InequalityReport;
use crate::geometry::{Cylinder, NodeLabel, Point};
use crate::pde::{sup_average_i, truncation_extension, Sign, SpaceTimeField};
use crate::phase::{DoublePhaseParams, Mode};

/// An intrinsic time-length and whether it fits the parabolic cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaStar {
    pub eta: f64,
    /// η ≤ r².
    pub within: bool,
}

/// η* = γ r^p / (μδ)^{p−2} in p-mode, η_* = γ r^q / (a (μδ)^{q−2}) in q-mode.
pub fn eta_star(
    mode: Mode,
    params: &DoublePhaseParams,
    gamma: f64,
    mu_delta: f64,
    r: f64,
    a_at_point: f64,
) -> Result<EtaStar> {
    if !(gamma > 0.0) {
        return Err(invalid("gamma_star", format!("{gamma} must be positive")));
    }
    if !(mu_delta > 0.0 && r > 0.0) {
        return Err(invalid("mu_delta, r", format!("({mu_delta}, {r}) must be positive")));
    }
    let s = params.exponent(mode);
    let eta = match mode {
        Mode::P => gamma * r.powf(s) / mu_delta.powf(s - 2.0),
        Mode::Q => {
            if !(a_at_point > 0.0) {
                return Err(Error::Precondition(format!("q-mode needs a(x0, t0) > 0, got {a_at_point}")));
            }
            gamma * r.powf(s) / (a_at_point * mu_delta.powf(s - 2.0))
        }
    };
    Ok(EtaStar { eta, within: eta <= r * r })
}

/// Cylinder data of one step of the boundary iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricSetting {
    pub mode: Mode,
    pub exponent: f64,
    pub gamma: f64,
    pub mu: f64,
    pub r: f64,
    pub eta: f64,
    pub eta_within: bool,
    /// R₀ of the phase.
    pub r0: f64,
    /// Maximal radius R (q-mode only).
    pub maximal_radius: Option<f64>,
}

impl GeometricSetting {
    pub fn p_mode(params: &DoublePhaseParams, gamma: f64, mu: f64, delta: f64, r: f64, r0: f64) -> Result<Self> {
        let e = eta_star(Mode::P, params, gamma, mu * delta, r, 0.0)?;
        Ok(Self {
            mode: Mode::P,
            exponent: params.p,
            gamma,
            mu,
            r,
            eta: e.eta,
            eta_within: e.within,
            r0,
            maximal_radius: None,
        })
    }

    /// Rejects r > min{R, R₀}/24.
    #[allow(clippy::too_many_arguments)]
    pub fn q_mode(
        params: &DoublePhaseParams,
        gamma: f64,
        mu: f64,
        delta: f64,
        r: f64,
        r0: f64,
        a_at_point: f64,
        maximal_radius: f64,
    ) -> Result<Self> {
        if r > maximal_radius.min(r0) / 24.0 {
            return Err(Error::Precondition(format!(
                "q-mode radius {r} exceeds min(R, R0)/24 = {}",
                maximal_radius.min(r0) / 24.0
            )));
        }
        let e = eta_star(Mode::Q, params, gamma, mu * delta, r, a_at_point)?;
        Ok(Self {
            mode: Mode::Q,
            exponent: params.q,
            gamma,
            mu,
            r,
            eta: e.eta,
            eta_within: e.within,
            r0,
            maximal_radius: Some(maximal_radius),
        })
    }

    fn big_r(&self) -> f64 {
        self.maximal_radius.unwrap_or(f64::INFINITY)
    }
}

/// μδ against 𝓘 (p-mode) or 𝓘 + (r/R)^{q−1}/(μδ)^{q−2} (q-mode), constant
/// removed.
pub fn check_capacity_estimate(setting: &GeometricSetting, delta: f64, i_val: f64) -> Result<InequalityReport> {
    let s = setting.exponent;
    let r = setting.r;
    let mu_delta = setting.mu * delta;
    let rhs = match setting.mode {
        Mode::P => {
            if !(r < setting.r0 / 2.0) {
                return Err(Error::Precondition(format!("p-mode radius {r} not below R0/2 = {}", setting.r0 / 2.0)));
            }
            i_val
        }
        Mode::Q => {
            let big_r = setting.big_r();
            if !(r < setting.r0.min(big_r / 24.0)) {
                return Err(Error::Precondition(format!("q-mode radius {r} not below min(R0, R/24)")));
            }
            let tail = if mu_delta > 0.0 { (r / big_r).powf(s - 1.0) / mu_delta.powf(s - 2.0) } else { 0.0 };
            i_val + tail
        }
    };
    Ok(InequalityReport::new("capacity-estimate", mu_delta, rhs)
        .with("r", r)
        .with("eta", setting.eta)
        .with("mu", setting.mu)
        .with("delta", delta)
        .with("i", i_val)
        .with("eta_within", f64::from(u8::from(setting.eta_within))))
}

/// Level k and bound μ for the truncation on B_{2r} × (t0 − η, t0]: k is the
/// extreme lateral value (max for `Plus`, min for `Minus`) and μ = sup u_k.
pub fn truncation_level(u: &SpaceTimeField, x0: &Point, t0: f64, radius: f64, eta: f64, sign: Sign) -> Result<(f64, f64)> {
    let d = u.domain();
    let nodes = d.lattice().nodes_in_ball(x0, radius);
    let levels = u.levels_in(t0 - eta, t0);
    let lateral = levels
        .iter()
        .flat_map(|&l| nodes.iter().filter(|&&i| d.label(i) == NodeLabel::Boundary).map(move |&i| u.slice(l)[i]));
    let k = match sign {
        Sign::Plus => lateral.fold(f64::NEG_INFINITY, f64::max),
        Sign::Minus => lateral.fold(f64::INFINITY, f64::min),
    };
    if !k.is_finite() {
        return Err(Error::EmptySet(format!("no lateral node in B_{radius} over ({}, {t0}]", t0 - eta)));
    }
    let mu = levels
        .iter()
        .flat_map(|&l| nodes.iter().filter(|&&i| d.inside(i)).map(move |&i| u.slice(l)[i]))
        .map(|v| match sign {
            Sign::Plus => (v - k).max(0.0),
            Sign::Minus => (k - v).max(0.0),
        })
        .fold(0.0, f64::max);
    Ok((k, mu))
}

/// 𝓘(η, r) for w = μ − u_k with the truncation taken on B_{2r} × (t0 − η, t0].
pub fn capacity_average(u: &SpaceTimeField, x0: &Point, t0: f64, setting: &GeometricSetting, k: f64, sign: Sign) -> Result<f64> {
    let cyl = Cylinder::backward(*x0, t0, 2.0 * setting.r, setting.eta)?;
    let w = truncation_extension(u, k, sign, &cyl, Some(setting.mu))?.w.expect("mu supplied");
    sup_average_i(&w, x0, setting.r, setting.eta, t0)
}

/// Branch of the oscillation alternative at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alternative {
    /// μδ is already at the scale of the radius.
    SmallRadius,
    /// The supremum of u_k on the half cylinder drops to `mu_reduced`.
    Reduction { mu_reduced: f64 },
}

/// Threshold 2C r (p-mode) or 4C r + (4C)^{1/(q−1)} r/R (q-mode).
pub fn alternative_threshold(setting: &GeometricSetting, c: f64) -> f64 {
    match setting.mode {
        Mode::P => 2.0 * c * setting.r,
        Mode::Q => {
            4.0 * c * setting.r + (4.0 * c).powf(1.0 / (setting.exponent - 1.0)) * setting.r / setting.big_r()
        }
    }
}

pub fn oscillation_alternative(setting: &GeometricSetting, delta: f64, c: f64) -> Result<Alternative> {
    if !(c > 0.0) {
        return Err(invalid("C", format!("{c} must be positive")));
    }
    if setting.mu * delta <= alternative_threshold(setting, c) {
        Ok(Alternative::SmallRadius)
    } else {
        Ok(Alternative::Reduction { mu_reduced: setting.mu * (1.0 - delta / (2.0 * c)) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> DoublePhaseParams {
        DoublePhaseParams::with_exponents(3.0, 4.0, 2).unwrap()
    }

    #[test]
    fn eta_star_examples() {
        let e = eta_star(Mode::P, &params(), 1.0, 1.0, 0.5, 0.0).unwrap();
        assert_relative_eq!(e.eta, 0.125);
        assert!(e.within);
        let e = eta_star(Mode::Q, &params(), 1.0, 1.0, 0.5, 2.0).unwrap();
        assert_relative_eq!(e.eta, 1.0 / 32.0);
        assert!(matches!(eta_star(Mode::Q, &params(), 1.0, 1.0, 0.5, 0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn alternative_branches() {
        let s = GeometricSetting::p_mode(&params(), 1.0, 2.0, 0.5, 0.1, 1.0).unwrap();
        assert_eq!(oscillation_alternative(&s, 0.0, 1.0).unwrap(), Alternative::SmallRadius);
        // μδ = 4C r with C = 2.5, r = 0.1, μ = 2, δ = 0.5.
        let alt = oscillation_alternative(&s, 0.5, 2.5).unwrap();
        assert_eq!(alt, Alternative::Reduction { mu_reduced: 2.0 * (1.0 - 0.5 / 5.0) });
        let q = GeometricSetting::q_mode(&params(), 1.0, 2.0, 0.5, 0.01, 1.0, 1.0, 4.0).unwrap();
        assert_relative_eq!(alternative_threshold(&q, 2.0), 0.08 + 2.0 * 0.0025);
    }

    #[test]
    fn capacity_estimate_guards_and_tail() {
        let s = GeometricSetting::p_mode(&params(), 1.0, 1.0, 0.5, 0.6, 1.0).unwrap();
        assert!(matches!(check_capacity_estimate(&s, 0.5, 1.0), Err(Error::Precondition(_))));
        let q = GeometricSetting::q_mode(&params(), 1.0, 1.0, 0.5, 0.01, 1.0, 1.0, 2.0).unwrap();
        let rep = check_capacity_estimate(&q, 0.5, 0.25).unwrap();
        assert_relative_eq!(rep.rhs, 0.25 + 0.005f64.powi(3) / 0.25);
        assert!(GeometricSetting::q_mode(&params(), 1.0, 1.0, 0.5, 0.1, 1.0, 1.0, 2.0).is_err());
    }
}
