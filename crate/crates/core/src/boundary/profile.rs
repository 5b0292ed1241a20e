use crate::capacity::WienerProfile;

/// A capacity-density profile r ↦ δ(r) on a radius range.
pub trait DeltaProfile {
    /// δ(r), or `None` outside the resolvable range.
    fn delta(&self, r: f64) -> Option<f64>;
    /// ∫_ρ^{ρ1} δ(s) ds/s.
    fn integral(&self, rho: f64, rho1: f64) -> Option<f64>;
    /// Radii at which δ was sampled, largest first.
    fn sample_radii(&self) -> Vec<f64>;
    /// Whether the tail of the profile is consistent with a divergent
    /// Wiener integral.
    fn divergence_consistent(&self) -> bool;
}

impl DeltaProfile for WienerProfile {
    fn delta(&self, r: f64) -> Option<f64> {
        self.delta_at(r)
    }

    fn integral(&self, rho: f64, rho1: f64) -> Option<f64> {
        self.integral_between(rho, rho1)
    }

    fn sample_radii(&self) -> Vec<f64> {
        self.radii.clone()
    }

    fn divergence_consistent(&self) -> bool {
        self.divergence_consistent
    }
}

/// Closed-form profile on [r_min, r_max]; integrals use the trapezoid rule
/// in log r with 64 panels per octave.
pub struct FnProfile<F> {
    f: F,
    r_min: f64,
    r_max: f64,
    floor: f64,
}

impl<F: Fn(f64) -> f64> FnProfile<F> {
    pub fn new(f: F, r_min: f64, r_max: f64, floor: f64) -> Self {
        Self { f, r_min, r_max, floor }
    }

    fn in_range(&self, r: f64) -> bool {
        r >= self.r_min * (1.0 - 1e-12) && r <= self.r_max * (1.0 + 1e-12)
    }
}

impl<F: Fn(f64) -> f64> DeltaProfile for FnProfile<F> {
    fn delta(&self, r: f64) -> Option<f64> {
        self.in_range(r).then(|| (self.f)(r))
    }

    fn integral(&self, rho: f64, rho1: f64) -> Option<f64> {
        if rho > rho1 || !self.in_range(rho) || !self.in_range(rho1) {
            return None;
        }
        let span = (rho1 / rho).ln();
        let n = ((span / std::f64::consts::LN_2) * 64.0).ceil().max(1.0) as usize;
        let step = span / n as f64;
        let g = |j: usize| (self.f)(rho * (j as f64 * step).exp());
        let inner: f64 = (1..n).map(g).sum();
        Some(step * (0.5 * (g(0) + g(n)) + inner))
    }

    fn sample_radii(&self) -> Vec<f64> {
        std::iter::successors(Some(self.r_max), |r| Some(r * 0.5)).take_while(|&r| self.in_range(r)).collect()
    }

    /// δ stays at or above the floor over the last third of the octaves.
    fn divergence_consistent(&self) -> bool {
        let radii = self.sample_radii();
        let tail = radii.len().div_ceil(3).max(1);
        radii[radii.len() - tail..].iter().all(|&r| (self.f)(r) >= self.floor)
    }
}
