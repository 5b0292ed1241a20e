use super::profile::DeltaProfile;
use crate::error::{invalid, Error, Result};

/// Inputs of the radii extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiiConfig {
    pub rho0: f64,
    pub mu0: f64,
    pub c1: f64,
    pub c_bar: f64,
    pub gamma_tilde: f64,
    /// p or q.
    pub exponent: f64,
    pub max_terms: usize,
}

impl RadiiConfig {
    /// C̄ = C̃(1 + 1/R + R^{(p−q)/(q−2)}) for the q-mode sequence.
    pub fn q_mode_c_bar(c_tilde: f64, big_r: f64, p: f64, q: f64) -> f64 {
        c_tilde * (1.0 + 1.0 / big_r + big_r.powf((p - q) / (q - 2.0)))
    }

    pub fn sigma(&self) -> f64 {
        0.5 * (1.0 - 0.5 / self.c1)
    }

    fn validate(&self) -> Result<()> {
        if !(self.c1 > 1.0 && self.c_bar > 0.0) {
            return Err(invalid("C1, C_bar", format!("need C1 > 1 and C_bar > 0, got ({}, {})", self.c1, self.c_bar)));
        }
        if !(self.rho0 > 0.0 && self.mu0 > 0.0 && self.gamma_tilde > 0.0 && self.exponent > 2.0) {
            return Err(invalid("radii config", "rho0, mu0, gamma_tilde positive and exponent > 2 required"));
        }
        if self.max_terms == 0 {
            return Err(invalid("max_terms", "at least one term"));
        }
        Ok(())
    }
}

/// Why the extraction stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The next candidate radius is below the resolvable range.
    Resolution,
    /// Candidates in range were all rejected before the range ran out.
    NoRecovery,
    MaxTerms,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiiSequence {
    pub sigma: f64,
    pub indices: Vec<usize>,
    pub rho: Vec<f64>,
    pub mu: Vec<f64>,
    pub delta: Vec<f64>,
    pub eta: Vec<f64>,
    pub c_bar: f64,
    pub termination: Termination,
}

/// Smallest i > `start` with δ(σ^i ρ0) ≥ 2^{start−i} `delta_start`. `Err`
/// carries whether any in-range candidate was rejected.
pub fn minimal_index(
    profile: &dyn DeltaProfile,
    rho0: f64,
    sigma: f64,
    start: usize,
    delta_start: f64,
) -> std::result::Result<(usize, f64), bool> {
    let mut rejected = false;
    for i in start + 1.. {
        let Some(d) = profile.delta(rho0 * sigma.powi(i as i32)) else {
            return Err(rejected);
        };
        if d >= delta_start * 0.5f64.powi((i - start) as i32) {
            return Ok((i, d));
        }
        rejected = true;
    }
    unreachable!("the candidate radii leave every bounded range")
}

/// Decreasing radii ρ_j = σ^{i_j} ρ0 with μ_j = (2σ)^j μ0, each index the
/// smallest one at which δ has not dropped faster than 2^{−i}.
pub fn extract_radii(profile: &dyn DeltaProfile, cfg: &RadiiConfig) -> Result<RadiiSequence> {
    cfg.validate()?;
    let sigma = cfg.sigma();
    let d0 = profile
        .delta(cfg.rho0)
        .ok_or_else(|| Error::ResolutionLimited(format!("delta not available at rho0 = {}", cfg.rho0)))?;
    if cfg.mu0 * d0 < cfg.c_bar * cfg.rho0 {
        return Err(Error::Precondition(format!(
            "property (1) fails at rho0: mu0*delta = {} < C_bar*rho0 = {}",
            cfg.mu0 * d0,
            cfg.c_bar * cfg.rho0
        )));
    }
    let s = cfg.exponent;
    let eta = |rho: f64, mu: f64, d: f64| cfg.gamma_tilde * rho.powf(s) * (mu * d).powf(2.0 - s);
    let mut seq = RadiiSequence {
        sigma,
        indices: vec![0],
        rho: vec![cfg.rho0],
        mu: vec![cfg.mu0],
        delta: vec![d0],
        eta: vec![eta(cfg.rho0, cfg.mu0, d0)],
        c_bar: cfg.c_bar,
        termination: Termination::MaxTerms,
    };
    while seq.rho.len() < cfg.max_terms {
        let (&i_n, &d_n) = (seq.indices.last().unwrap(), seq.delta.last().unwrap());
        match minimal_index(profile, cfg.rho0, sigma, i_n, d_n) {
            Ok((i, d)) => {
                let rho = cfg.rho0 * sigma.powi(i as i32);
                let mu = seq.mu.last().unwrap() * 2.0 * sigma;
                seq.indices.push(i);
                seq.rho.push(rho);
                seq.mu.push(mu);
                seq.delta.push(d);
                seq.eta.push(eta(rho, mu, d));
            }
            Err(rejected) => {
                seq.termination = if rejected { Termination::NoRecovery } else { Termination::Resolution };
                break;
            }
        }
    }
    Ok(seq)
}

/// Stored-data checks of the three extraction properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiiProperties {
    /// μ_j δ(ρ_j) ≥ C̄ ρ_j for every j.
    pub lower_bound: bool,
    /// 2η_{j+1} ≤ η_j for every j.
    pub halving: bool,
    /// Σ_{j≤l} δ(ρ_j) ≥ (1/3) Σ_{i≤i_l} δ(σ^i ρ0) for every l.
    pub partial_sums: bool,
    /// max_l ∫_{ρ_l}^{ρ0} δ ds/s / Σ_{j≤l} δ(ρ_j).
    pub gamma4: f64,
}

impl RadiiSequence {
    pub const GAMMA3: f64 = 3.0;

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn properties(&self, profile: &dyn DeltaProfile) -> Result<RadiiProperties> {
        let lower_bound = (0..self.len()).all(|j| self.mu[j] * self.delta[j] >= self.c_bar * self.rho[j]);
        let halving = self.eta.windows(2).all(|w| 2.0 * w[1] <= w[0]);
        let rho0 = self.rho[0];
        let mut partial_sums = true;
        let mut gamma4: f64 = 0.0;
        let mut chosen = 0.0;
        for l in 0..self.len() {
            chosen += self.delta[l];
            let scanned = (0..=self.indices[l])
                .map(|i| profile.delta(rho0 * self.sigma.powi(i as i32)))
                .sum::<Option<f64>>()
                .ok_or_else(|| Error::ResolutionLimited(format!("delta unavailable below rho_{l}")))?;
            partial_sums &= Self::GAMMA3 * chosen >= scanned;
            if l > 0 {
                let integral = profile
                    .integral(self.rho[l], rho0)
                    .ok_or_else(|| Error::ResolutionLimited(format!("integral unavailable down to rho_{l}")))?;
                gamma4 = gamma4.max(integral / chosen);
            }
        }
        Ok(RadiiProperties { lower_bound, halving, partial_sums, gamma4 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::FnProfile;

    fn cfg(c1: f64) -> RadiiConfig {
        RadiiConfig { rho0: 0.5, mu0: 1.0, c1, c_bar: 1.0, gamma_tilde: 1.0, exponent: 3.0, max_terms: 50 }
    }

    #[test]
    fn constant_profile_steps_consecutively() {
        let prof = FnProfile::new(|_| 0.8, 1e-4, 0.5, 0.1);
        let seq = extract_radii(&prof, &cfg(2.0)).unwrap();
        let sigma: f64 = 0.375;
        for (j, (&i, &rho)) in seq.indices.iter().zip(&seq.rho).enumerate() {
            assert_eq!(i, j);
            assert_eq!(rho, 0.5 * sigma.powi(j as i32));
            approx::assert_relative_eq!(seq.mu[j], 0.75f64.powi(j as i32), max_relative = 1e-14);
        }
        assert_eq!(seq.termination, Termination::Resolution);
    }

    #[test]
    fn precondition_names_property_one() {
        let prof = FnProfile::new(|_| 0.1, 1e-4, 0.5, 0.1);
        let err = extract_radii(&prof, &cfg(2.0)).unwrap_err();
        assert!(matches!(err, Error::Precondition(ref m) if m.contains("property (1)")));
    }

    #[test]
    fn vanishing_tail_truncates_with_flag() {
        let prof = FnProfile::new(|r| if r > 0.1 { 1.0 } else { 0.0 }, 1e-4, 0.5, 0.1);
        let seq = extract_radii(&prof, &cfg(2.0)).unwrap();
        assert_eq!(seq.termination, Termination::NoRecovery);
        assert_eq!(seq.indices, vec![0, 1]);
    }
}
