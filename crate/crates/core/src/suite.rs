//! The standard scenario suite shared by the verifier sweeps, the acceptance
//! tests and the command-line runner.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::Result;
use crate::geometry::{build_domain, DomainSpec, Point, Scenario};
use crate::pde::{solve, BoundaryDatum, SolveOptions, SpaceTimeField};
use crate::phase::{DoublePhaseParams, PhaseField};

/// Flat boundary, a cone and a ball complement, all on [−1, 1]².
pub fn standard_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::FlatHalfspace,
        Scenario::ExteriorCone { angle: std::f64::consts::FRAC_PI_2 },
        Scenario::FullBallComplement { radius: 0.5 },
    ]
}

/// Interior sample point at distance ≥ 0.2 from every suite complement.
pub const SUITE_CENTER: Point = [0.7, 0.0];

pub fn suite_params() -> DoublePhaseParams {
    DoublePhaseParams::with_exponents(3.0, 4.0, 2).expect("valid suite exponents")
}

/// Positive, time-dependent datum; also the initial state.
pub fn suite_datum() -> BoundaryDatum {
    BoundaryDatum::new("suite-wave", |x, t| 0.6 + 0.3 * (2.0 * PI * x[0]).sin() * (PI * x[1]).cos() + 0.2 * t)
}

/// Run parameters for one suite case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteRun {
    pub h: f64,
    pub t_end: f64,
    pub cfl: f64,
    pub output_interval: f64,
}

impl Default for SuiteRun {
    fn default() -> Self {
        Self { h: 1.0 / 32.0, t_end: 0.2, cfl: 0.5, output_interval: 0.002 }
    }
}

/// Solves the suite problem for one scenario with a(x) = dist(x, ∂Ω)^{q−p}.
pub fn run_case(scenario: &Scenario, run: &SuiteRun) -> Result<SpaceTimeField> {
    let params = suite_params();
    let domain = Arc::new(build_domain(&DomainSpec::new(scenario.clone(), params.dim), run.h)?);
    let phase = Arc::new(PhaseField::distance_power(&domain, &params, 1.0, 1.0, 1.0)?);
    let opts = SolveOptions::new(run.t_end, run.cfl, run.output_interval)?;
    solve(domain, phase, params, &suite_datum(), &opts)
}
