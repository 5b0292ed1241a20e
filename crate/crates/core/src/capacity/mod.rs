//! Variational s-capacity of lattice condensers, Wiener quantities and the
//! fatness and density predicates built on them.

mod energy;
mod harmonic;
mod wiener;

pub use harmonic::harmonic_capacity;
pub use wiener::{
    classify_phase_mode, delta_s, density_condition, is_uniformly_fat, wiener_sum, DeltaValue, FatnessSpec,
    FatnessWitness, WienerOptions, WienerProfile,
};

use crate::error::{invalid, Error, Result};
use crate::geometry::Condenser;
use energy::Problem;

/// Minimization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Newton steps with conjugate-gradient inner solves and backtracking;
    /// falls back to relaxation sweeps if the budget is exhausted.
    Newton,
    /// Nodal convex relaxation sweeps only.
    Relaxation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityOptions {
    /// Relative energy tolerance.
    pub tol: f64,
    /// Iteration budget (Newton steps, or sweeps for relaxation).
    pub max_iterations: usize,
    pub method: Method,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 100_000, method: Method::Newton }
    }
}

impl CapacityOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Minimal discrete energy and its minimizer on the condenser lattice.
#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub value: f64,
    pub minimizer: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Newton budget before switching to relaxation sweeps.
const NEWTON_BUDGET: usize = 200;

pub fn compute_capacity(c: &Condenser, s: f64, opts: &CapacityOptions) -> Result<CapacityResult> {
    if !(s > 1.0 && s.is_finite()) {
        return Err(invalid("s", format!("{s} must exceed 1")));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("tol", format!("{} must be positive", opts.tol)));
    }
    let n = c.lattice().len();
    let mut f: Vec<f64> = c.k_mask().iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
    if c.k_count() == 0 {
        return Ok(CapacityResult { value: 0.0, minimizer: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let problem = Problem::new(c, s);
    let outcome = match opts.method {
        Method::Relaxation => energy::relaxation(&problem, &mut f, opts.tol, opts.max_iterations),
        Method::Newton => {
            if s != 2.0 {
                let warm = Problem::new(c, 2.0);
                energy::newton(&warm, &mut f, opts.tol, NEWTON_BUDGET.min(opts.max_iterations));
                clamp_unit(&mut f);
            }
            let first = energy::newton(&problem, &mut f, opts.tol, NEWTON_BUDGET.min(opts.max_iterations));
            if first.converged {
                first
            } else {
                let rest = opts.max_iterations.saturating_sub(first.iterations);
                let mut second = energy::relaxation(&problem, &mut f, opts.tol, rest);
                second.iterations += first.iterations;
                second
            }
        }
    };
    if !outcome.converged {
        return Err(Error::NotConverged { iterations: outcome.iterations, residual: outcome.residual });
    }
    // Truncation to [0,1] removes roundoff excursions; it cannot raise the
    // energy of an exact minimizer.
    clamp_unit(&mut f);
    let value = problem.energy(&f);
    if value > outcome.energy * (1.0 + 1e3 * opts.tol) + f64::MIN_POSITIVE {
        return Err(Error::NotConverged { iterations: outcome.iterations, residual: outcome.residual });
    }
    Ok(CapacityResult { value, minimizer: f, iterations: outcome.iterations, residual: outcome.residual })
}

fn clamp_unit(f: &mut [f64]) {
    f.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}
