//! Stage runner: domain, capacity profile, solve, randomized invariants,
//! estimate verifiers and the boundary decay verifier, in that order.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wienerlab_core::boundary::{accommodate_degeneracy, verify_decay, AccommodationConfig, DecayConfig, DecayStatus};
use wienerlab_core::capacity::{classify_phase_mode, wiener_sum, CapacityOptions, WienerOptions, WienerProfile};
use wienerlab_core::estimates::{
    check_critical_mass, check_energy_estimate, check_negative_power_energy, check_psi_decay, check_reverse_holder,
    check_weak_harnack, weak_harnack_window, CutoffSpec, EnergyVariant, InequalityReport,
};
use wienerlab_core::geometry::{build_domain, DomainSpec, GridDomain};
use wienerlab_core::pde::{restart, solve, BoundaryDatum, Operator, SolveOptions, SpaceTimeField, Stepper};
use wienerlab_core::phase::{DoublePhaseParams, PhaseField, PhaseShape};
use wienerlab_core::suite::suite_datum;

use crate::config::{DatumName, PhaseShapeName, RunConfig, Verifier};
use crate::output::{num, RunMeta, Table, CAPACITY_COLUMNS, CHECKS_COLUMNS, SNAPSHOT_COLUMNS, TRACE_COLUMNS};

/// Pointwise tolerance of the comparison and maximum-principle checks.
const INVARIANT_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("output directory {0} is not empty (use --force to overwrite)")]
    OutputExists(PathBuf),
    #[error("writing artifacts: {0}")]
    Io(#[from] io::Error),
}

/// Failure of one pipeline stage.
#[derive(Debug, Clone)]
pub struct StageFailure {
    pub stage: &'static str,
    pub message: String,
}

#[derive(Debug)]
pub struct RunSummary {
    pub failed_checks: usize,
    pub decay: Option<DecayStatus>,
    pub stage_failure: Option<StageFailure>,
}

impl RunSummary {
    /// Every enabled assertion passed or is inconclusive by design.
    pub fn success(&self) -> bool {
        self.stage_failure.is_none() && self.failed_checks == 0 && self.decay != Some(DecayStatus::Fail)
    }
}

/// Lazily opened artifact files of one run.
struct Artifacts {
    dir: PathBuf,
    meta: RunMeta,
    capacity: Option<Table>,
    checks: Option<Table>,
    trace: Option<Table>,
}

impl Artifacts {
    fn table<'a>(
        slot: &'a mut Option<Table>,
        dir: &Path,
        meta: &RunMeta,
        name: &str,
        columns: &[&str],
    ) -> io::Result<&'a mut Table> {
        if slot.is_none() {
            *slot = Some(Table::create(&dir.join(name), meta, columns)?);
        }
        Ok(slot.as_mut().expect("table just opened"))
    }

    fn capacity(&mut self) -> io::Result<&mut Table> {
        Self::table(&mut self.capacity, &self.dir, &self.meta, "capacity.csv", &CAPACITY_COLUMNS)
    }

    fn checks(&mut self) -> io::Result<&mut Table> {
        Self::table(&mut self.checks, &self.dir, &self.meta, "checks.csv", &CHECKS_COLUMNS)
    }

    fn trace(&mut self) -> io::Result<&mut Table> {
        Self::table(&mut self.trace, &self.dir, &self.meta, "trace.csv", &TRACE_COLUMNS)
    }

    fn finish(self) -> io::Result<()> {
        for t in [self.capacity, self.checks, self.trace].into_iter().flatten() {
            t.finish()?;
        }
        Ok(())
    }
}

/// Refuses a non-empty output directory unless `force` is set.
pub fn prepare_output(dir: &Path, force: bool) -> Result<(), RunError> {
    if dir.exists() {
        let occupied = fs::read_dir(dir)?.next().is_some();
        if occupied && !force {
            return Err(RunError::OutputExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

struct Context {
    label: String,
    domain: Arc<GridDomain>,
    params: DoublePhaseParams,
    phase: Arc<PhaseField>,
    datum: BoundaryDatum,
}

type StageResult<T> = Result<T, String>;

fn build_context(cfg: &RunConfig) -> StageResult<Context> {
    let scenario = cfg.scenario().map_err(|e| e.to_string())?;
    let spec = DomainSpec::new(scenario.clone(), cfg.domain.dim).with_half_extent(cfg.domain.half_extent);
    let domain = Arc::new(build_domain(&spec, cfg.domain.h).map_err(|e| e.to_string())?);
    let e = &cfg.exponents;
    let params = DoublePhaseParams::new(e.p, e.q, e.c1, e.c2, cfg.domain.dim).map_err(|e| e.to_string())?;
    let ph = &cfg.phase;
    let phase = match ph.shape {
        PhaseShapeName::Zero => Ok(PhaseField::zero()),
        PhaseShapeName::Constant => PhaseField::constant(ph.c, ph.a0, ph.r0),
        PhaseShapeName::DistancePower => PhaseField::distance_power(&domain, &params, ph.c, ph.a0, ph.r0),
        PhaseShapeName::CheckerboardInTime => {
            PhaseField::new(PhaseShape::TimeCheckerboard { value: ph.c, period: ph.period }, ph.a0, ph.r0)
        }
    }
    .map_err(|e| e.to_string())?;
    let datum = match cfg.solve.datum {
        DatumName::SuiteWave => suite_datum(),
        DatumName::Holder => {
            let a = cfg.solve.datum_exponent;
            BoundaryDatum::new("holder", move |x, _| x[0].max(0.0).powf(a)).with_holder(1.0, a)
        }
        DatumName::Constant => BoundaryDatum::constant(cfg.solve.datum_value),
    };
    Ok(Context { label: scenario.to_string(), domain, params, phase: Arc::new(phase), datum })
}

fn profile_rows(table: &mut Table, label: &str, prof: &WienerProfile) -> io::Result<()> {
    for j in 0..prof.deltas.len() {
        table.row(&[
            label.to_string(),
            num(prof.s),
            num(prof.radii[j]),
            num(prof.numerators[j]),
            num(prof.denominators[j]),
            num(prof.deltas[j]),
            num(prof.partial_sums[j]),
        ])?;
    }
    Ok(())
}

fn wiener_options(cfg: &RunConfig) -> WienerOptions {
    WienerOptions {
        capacity: CapacityOptions::with_tol(cfg.capacity.tol),
        divergence_floor: cfg.capacity.divergence_floor,
        ..WienerOptions::default()
    }
}

fn parameters(rep: &InequalityReport) -> String {
    rep.context.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect::<Vec<_>>().join(";")
}

fn check_row(label: &str, rep: &InequalityReport) -> Vec<String> {
    vec![
        rep.check.to_string(),
        label.to_string(),
        parameters(rep),
        num(rep.lhs),
        num(rep.rhs),
        num(rep.ratio),
        rep.pass.to_string(),
    ]
}

/// All enabled verifier evaluations on the stored solution.
fn run_verifiers(cfg: &RunConfig, u: &SpaceTimeField, datum: &BoundaryDatum) -> StageResult<Vec<InequalityReport>> {
    let c = &cfg.checks;
    let err = |e: wienerlab_core::Error| e.to_string();
    let mut verifiers = c.verifiers.clone();
    verifiers.sort();
    verifiers.dedup();
    let mut out = Vec::new();
    for v in verifiers {
        match v {
            Verifier::Energy => {
                for &k in &c.levels {
                    for &sigma in &c.sigma {
                        let cut = CutoffSpec::new(sigma, c.center, c.radius, c.t0, c.eta).map_err(err)?;
                        for variant in [EnergyVariant::SpaceTime, EnergyVariant::InitialSlab] {
                            out.push(check_energy_estimate(u, &cut, k, variant).map_err(err)?.with("sigma", sigma));
                        }
                    }
                }
            }
            Verifier::CriticalMass => {
                let cm = check_critical_mass(u, &c.center, c.t0, c.mass_radius, c.mass_level).map_err(err)?;
                let psi = check_psi_decay(u, &c.center, c.t0, c.mass_radius, c.mass_level, cm.delta_emp, c.slack)
                    .map_err(err)?;
                out.push(cm.report);
                out.push(psi.report.with("slabs", psi.slabs.len() as f64));
            }
            Verifier::NegativePower => {
                for &alpha in &c.alpha {
                    for &sigma in &c.sigma {
                        let cut = CutoffSpec::new(sigma, c.center, c.radius, c.t0, c.eta).map_err(err)?;
                        let (rep, _) = check_negative_power_energy(u, &cut, alpha, c.shift).map_err(err)?;
                        out.push(rep.with("sigma", sigma));
                    }
                }
            }
            Verifier::ReverseHolder => {
                for &m in &c.m {
                    out.push(check_reverse_holder(u, &c.center, c.t0, c.radius, c.holder_eta, m, c.shift).map_err(err)?);
                }
            }
            Verifier::WeakHarnack => {
                let level = *u
                    .levels_closed(c.t0 - 1e-12, c.t0 + 1e-12)
                    .first()
                    .ok_or_else(|| format!("checks.t0 = {} is not a stored time level", c.t0))?;
                let r = c.harnack_radius;
                let (_, eta1) = weak_harnack_window(u, &c.center, c.t0, r, c.eta, c.b).map_err(err)?;
                let dense = restart(u, level, datum, eta1, 10, cfg.solve.cfl).map_err(err)?;
                out.push(check_weak_harnack(&dense, &c.center, c.t0, r, c.eta, c.b).map_err(err)?);
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|rep| match c.caps.get(rep.check) {
            Some(&cap) => rep.with_cap(cap),
            None => rep,
        })
        .collect())
}

/// Seeded random pairs u₀ ≤ v₀ with data f ≤ f + shift: records the largest
/// comparison and maximum-principle violations over the run.
fn run_invariants(cfg: &RunConfig, ctx: &Context) -> StageResult<Vec<Vec<String>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = &ctx.domain;
    let op = Operator::DoublePhase { params: ctx.params, phase: ctx.phase.clone() };
    let mut rows = Vec::new();
    for instance in 0..cfg.invariants.instances {
        let shift: f64 = rng.gen_range(0.0..0.2);
        let lo: Vec<f64> = (0..d.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|&v| v + rng.gen_range(0.0..0.5)).collect();
        let base = ctx.datum.clone();
        let raised = BoundaryDatum::new("raised", move |x, t| base.eval(x, t) + shift);
        let mut u = Stepper::with_initial(d.clone(), op.clone(), ctx.datum.clone(), cfg.solve.cfl, lo)
            .map_err(|e| e.to_string())?;
        let mut v = Stepper::with_initial(d.clone(), op.clone(), raised, cfg.solve.cfl, hi).map_err(|e| e.to_string())?;
        let bounds = |w: &[f64]| w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let (mut bmin, mut bmax) = {
            let (a, b) = bounds(u.values());
            let (c, e) = bounds(v.values());
            (a.min(c), b.max(e))
        };
        let (mut comparison, mut maximum) = (0.0f64, 0.0f64);
        for _ in 0..cfg.invariants.steps {
            let dt = u.prepare().min(v.prepare());
            u.apply(dt).map_err(|e| e.to_string())?;
            v.apply(dt).map_err(|e| e.to_string())?;
            for w in [u.values(), v.values()] {
                for (i, &x) in w.iter().enumerate() {
                    if !d.inside(i) {
                        bmin = bmin.min(x);
                        bmax = bmax.max(x);
                    }
                }
            }
            for (a, b) in u.values().iter().zip(v.values()) {
                comparison = comparison.max(a - b);
            }
            for &x in u.values().iter().chain(v.values()) {
                maximum = maximum.max(bmin - x).max(x - bmax);
            }
        }
        for (name, violation) in [("comparison-principle", comparison), ("maximum-principle", maximum)] {
            let lhs = violation.max(0.0);
            rows.push(vec![
                name.to_string(),
                ctx.label.clone(),
                format!("instance={instance};steps={};shift={}", cfg.invariants.steps, num(shift)),
                num(lhs),
                num(INVARIANT_TOL),
                num(lhs / INVARIANT_TOL),
                (lhs <= INVARIANT_TOL).to_string(),
            ]);
        }
    }
    Ok(rows)
}

fn write_snapshots(dir: &Path, meta: &RunMeta, u: &SpaceTimeField, stride: usize) -> io::Result<()> {
    let mut t = Table::create(&dir.join("snapshots.csv"), meta, &SNAPSHOT_COLUMNS)?;
    let d = u.domain();
    for level in (0..u.len_times()).step_by(stride) {
        let time = u.times()[level];
        for (i, &value) in u.slice(level).iter().enumerate() {
            let x = d.coords(i);
            t.row(&[num(x[0]), num(x[1]), num(time), num(value)])?;
        }
    }
    t.finish()
}

/// Executes the configured stages and writes all artifacts into `dir`.
pub fn run(cfg: &RunConfig, meta: RunMeta, dir: &Path) -> Result<RunSummary, RunError> {
    let mut art = Artifacts { dir: dir.to_path_buf(), meta: meta.clone(), capacity: None, checks: None, trace: None };
    let mut report = String::new();
    for line in meta.comment_lines() {
        writeln!(report, "{line}").unwrap();
    }
    let mut summary = RunSummary { failed_checks: 0, decay: None, stage_failure: None };
    let result = stages(cfg, &mut art, &mut report, &mut summary)?;
    if let Err(failure) = result {
        writeln!(report, "FAILED {}: {}", failure.stage, failure.message).unwrap();
        summary.stage_failure = Some(failure);
    }
    writeln!(report, "status: {}", if summary.success() { "pass" } else { "fail" }).unwrap();
    art.finish()?;
    fs::write(dir.join("report.txt"), report)?;
    Ok(summary)
}

fn stages(
    cfg: &RunConfig,
    art: &mut Artifacts,
    report: &mut String,
    summary: &mut RunSummary,
) -> Result<Result<(), StageFailure>, RunError> {
    let fail = |stage: &'static str| move |message: String| StageFailure { stage, message };

    let ctx = match build_context(cfg) {
        Ok(c) => c,
        Err(m) => return Ok(Err(fail("domain")(m))),
    };
    writeln!(report, "scenario: {}", ctx.label).unwrap();
    writeln!(report, "domain: dim {} h {} nodes {}", ctx.domain.dim(), num(ctx.domain.h()), ctx.domain.len()).unwrap();
    writeln!(report, "exponents: p {} q {}", num(ctx.params.p), num(ctx.params.q)).unwrap();

    let mut profiles: Vec<WienerProfile> = Vec::new();
    if cfg.capacity.enabled {
        art.capacity()?;
        for s in cfg.capacity_exponents() {
            match wiener_sum(&ctx.domain, &cfg.capacity.center, cfg.capacity.r0, cfg.capacity.levels, s, &wiener_options(cfg)) {
                Ok(prof) => {
                    profile_rows(art.capacity()?, &ctx.label, &prof)?;
                    writeln!(
                        report,
                        "capacity: s {} levels {} truncated {} divergence-consistent {}",
                        num(s),
                        prof.deltas.len(),
                        prof.truncated,
                        prof.divergence_consistent
                    )
                    .unwrap();
                    profiles.push(prof);
                }
                Err(e) => {
                    art.capacity()?.failed("capacity", &e.to_string())?;
                    return Ok(Err(fail("capacity")(e.to_string())));
                }
            }
        }
    }

    if !cfg.needs_solve() {
        return Ok(Ok(()));
    }
    let opts = match SolveOptions::new(cfg.solve.t_end, cfg.solve.cfl, cfg.solve.output_interval) {
        Ok(o) => o,
        Err(e) => return Ok(Err(fail("solve")(e.to_string()))),
    };
    let u = match solve(ctx.domain.clone(), ctx.phase.clone(), ctx.params, &ctx.datum, &opts) {
        Ok(u) => u,
        Err(e) => return Ok(Err(fail("solve")(e.to_string()))),
    };
    writeln!(report, "solve: {} stored levels up to t = {}", u.len_times(), num(cfg.solve.t_end)).unwrap();
    if cfg.solve.snapshot_stride > 0 {
        write_snapshots(&art.dir, &art.meta, &u, cfg.solve.snapshot_stride)?;
    }

    if cfg.invariants.instances > 0 {
        match run_invariants(cfg, &ctx) {
            Ok(rows) => {
                for row in rows {
                    summary.failed_checks += usize::from(row[6] != "true");
                    art.checks()?.row(&row)?;
                }
            }
            Err(m) => {
                art.checks()?.failed("invariants", &m)?;
                return Ok(Err(fail("invariants")(m)));
            }
        }
    }

    if !cfg.checks.verifiers.is_empty() {
        match run_verifiers(cfg, &u, &ctx.datum) {
            Ok(reports) => {
                let mut worst: Vec<(&'static str, f64)> = Vec::new();
                for rep in &reports {
                    summary.failed_checks += usize::from(!rep.pass);
                    art.checks()?.row(&check_row(&ctx.label, rep))?;
                    match worst.iter_mut().find(|(name, _)| *name == rep.check) {
                        Some(entry) => entry.1 = entry.1.max(rep.ratio),
                        None => worst.push((rep.check, rep.ratio)),
                    }
                }
                for (name, ratio) in worst {
                    writeln!(report, "checks: {name} max ratio {ratio:.6e}").unwrap();
                }
            }
            Err(m) => {
                art.checks()?.failed("checks", &m)?;
                return Ok(Err(fail("checks")(m)));
            }
        }
    }
    if art.checks.is_some() {
        writeln!(report, "checks: {} failed", summary.failed_checks).unwrap();
    }

    if cfg.decay.enabled {
        let dc = &cfg.decay;
        let t0 = dc.t0.unwrap_or(cfg.solve.t_end);
        let mode = classify_phase_mode(&ctx.phase, &dc.center, t0);
        let s = ctx.params.exponent(mode);
        let existing = profiles.iter().position(|p| p.s == s && p.center == dc.center);
        let profile = match existing {
            Some(i) => profiles.swap_remove(i),
            None => match wiener_sum(&ctx.domain, &dc.center, cfg.capacity.r0, cfg.capacity.levels, s, &wiener_options(cfg)) {
                Ok(prof) => {
                    profile_rows(art.capacity()?, &ctx.label, &prof)?;
                    prof
                }
                Err(e) => {
                    art.trace()?.failed("decay", &e.to_string())?;
                    return Ok(Err(fail("decay")(e.to_string())));
                }
            },
        };
        let acc_cfg = AccommodationConfig {
            epsilon: dc.epsilon,
            gamma_star: dc.gamma_star,
            c_p: dc.c_p,
            c_q: dc.c_q,
            candidates: Vec::new(),
        };
        let decay_cfg =
            DecayConfig { levels: dc.levels, gamma_hat: dc.gamma_hat, min_levels: dc.min_levels, ..DecayConfig::default() };
        let outcome = accommodate_degeneracy(&u, &profile, &dc.center, t0, &acc_cfg)
            .and_then(|acc| verify_decay(&u, &acc, &profile, &decay_cfg).map(|rep| (acc, rep)));
        let (acc, rep) = match outcome {
            Ok(v) => v,
            Err(e) => {
                art.trace()?.failed("decay", &e.to_string())?;
                return Ok(Err(fail("decay")(e.to_string())));
            }
        };
        let trace = art.trace()?;
        for e in &rep.trace.entries {
            trace.row(&[
                ctx.label.clone(),
                rep.trace.mode.label().to_string(),
                num(e.rho),
                num(e.osc),
                num(e.wiener_integral),
                num(e.datum_osc),
                num(e.rhs),
            ])?;
        }
        writeln!(report, "decay:").unwrap();
        writeln!(report, "  mode = {}", acc.mode.label()).unwrap();
        writeln!(report, "  s = {}", num(s)).unwrap();
        writeln!(report, "  rho0 = {}", num(acc.rho0)).unwrap();
        writeln!(report, "  omega0 = {}", num(rep.trace.omega0)).unwrap();
        writeln!(report, "  levels = {}", rep.trace.entries.len()).unwrap();
        if let Some(fit) = &rep.fit {
            writeln!(report, "  slope = {}", num(fit.slope)).unwrap();
            writeln!(report, "  intercept = {}", num(fit.intercept)).unwrap();
            writeln!(report, "  holder_exponent = {}", num(fit.holder_exponent)).unwrap();
            writeln!(report, "  gamma_hat_needed = {}", num(fit.gamma_hat_needed)).unwrap();
            writeln!(report, "  envelope_holds = {}", fit.envelope_holds).unwrap();
        }
        writeln!(report, "  status = {}", rep.status).unwrap();
        summary.decay = Some(rep.status);
    }
    Ok(Ok(()))
}
