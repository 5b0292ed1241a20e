//! Acceptance run: one PASS/FAIL line per criterion at the stated
//! tolerances. The process fails if a criterion that is reachable on this
//! lattice fails; criteria whose premise cannot be realised are reported as
//! FAIL with the reason and listed in the summary.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wienerlab_core::boundary::{
    accommodate_degeneracy, extract_radii, minimal_index, verify_decay, AccommodationConfig, DecayConfig, DecayReport,
    DecayStatus, FnProfile, RadiiConfig,
};
use wienerlab_core::capacity::{
    compute_capacity, delta_s, harmonic_capacity, wiener_sum, CapacityOptions, WienerOptions, WienerProfile,
};
use wienerlab_core::estimates::{
    check_critical_mass, check_energy_estimate, check_psi_decay, check_reverse_holder, check_weak_harnack,
    weak_harnack_window, CutoffSpec, EnergyVariant,
};
use wienerlab_core::geometry::{build_domain, distance, Ball, Condenser, DomainSpec, GridDomain, Scenario};
use wienerlab_core::pde::{restart, run_stepper, solve, BoundaryDatum, Operator, SolveOptions, SpaceTimeField, Stepper};
use wienerlab_core::phase::{DoublePhaseParams, PhaseField};
use wienerlab_core::suite::{run_case, standard_scenarios, suite_datum, SuiteRun, SUITE_CENTER};

struct Outcome {
    pass: bool,
    detail: String,
    /// Reason the criterion cannot be met on this lattice, if any.
    unattainable: Option<&'static str>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, unattainable: None }
    }
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
}

fn disk_condenser(h: f64, inner: f64, outer: f64) -> Condenser {
    let ball = Ball::new([0.0, 0.0], outer).unwrap();
    Condenser::from_predicate(2, h, ball, |x| distance(x, &[0.0, 0.0]) <= inner).unwrap()
}

fn halfspace(dim: usize, h: f64) -> Arc<GridDomain> {
    Arc::new(build_domain(&DomainSpec::new(Scenario::FlatHalfspace, dim), h).unwrap())
}

fn capacity_scaling() -> Outcome {
    let h = 1.0 / 128.0;
    let mut parts = Vec::new();
    let mut pass = true;
    for p in [3.0, 4.0] {
        let points: Vec<(f64, f64)> = [0.125, 0.25, 0.5, 1.0]
            .iter()
            .map(|&r| {
                let v = compute_capacity(&disk_condenser(h, r, 2.0 * r), p, &CapacityOptions::default()).unwrap().value;
                (f64::ln(r), v.ln())
            })
            .collect();
        let s = slope(&points);
        pass &= (s - (2.0 - p)).abs() <= 0.1;
        parts.push(format!("p={p} slope {s:.3} (target {})", 2.0 - p));
    }
    Outcome::new(pass, parts.join(", "))
}

/// 2π (∫_r^R ρ^{−1/(s−1)} dρ)^{1−s} by composite Simpson.
fn radial_oracle(s: f64, r: f64, big_r: f64) -> f64 {
    let n = 4096;
    let w = (big_r - r) / n as f64;
    let f = |rho: f64| rho.powf(-1.0 / (s - 1.0));
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(r + i as f64 * w)).sum();
    2.0 * PI * ((f(r) + f(big_r) + inner) * w / 3.0).powf(1.0 - s)
}

fn linear_oracle() -> Outcome {
    let h = 1.0 / 32.0;
    let condensers = [
        disk_condenser(h, 0.25, 0.6),
        Condenser::from_predicate(2, h, Ball::new([0.1, -0.05], 0.7).unwrap(), |x| x[0].abs().max(x[1].abs()) <= 0.2)
            .unwrap(),
        Condenser::from_predicate(2, h, Ball::new([0.0, 0.0], 0.8).unwrap(), |x| {
            distance(x, &[0.3, 0.1]) <= 0.15 || distance(x, &[-0.25, -0.2]) <= 0.1
        })
        .unwrap(),
    ];
    let worst = condensers
        .iter()
        .map(|c| {
            let a = compute_capacity(c, 2.0, &CapacityOptions::default()).unwrap().value;
            let b = harmonic_capacity(c).unwrap();
            (a - b).abs() / b
        })
        .fold(0.0, f64::max);
    let v = compute_capacity(&disk_condenser(1.0 / 128.0, 0.5, 1.0), 2.0, &CapacityOptions::default()).unwrap().value;
    let oracle = radial_oracle(2.0, 0.5, 1.0);
    let annulus = (v - oracle).abs() / oracle;
    Outcome::new(
        worst <= 1e-8 && annulus <= 0.02,
        format!("max rel. diff vs harmonic solve {worst:.1e}; annulus {v:.4} vs radial {oracle:.4} ({:.2}%)", 100.0 * annulus),
    )
}

fn delta_extremes() -> Outcome {
    let opts = WienerOptions::default();
    let ball = build_domain(&DomainSpec::new(Scenario::FullBallComplement { radius: 0.5 }, 2), 1.0 / 32.0).unwrap();
    let full = delta_s(&ball, &[0.0, 0.0], 0.25, 3.0, &opts).unwrap().delta;
    let flat = halfspace(2, 1.0 / 32.0);
    let empty = delta_s(&flat, &[0.5, 0.0], 0.2, 3.0, &opts).unwrap().delta;
    let d2: Vec<f64> = [0.4, 0.2, 0.1].iter().map(|&r| delta_s(&flat, &[0.0, 0.0], r, 2.0, &opts).unwrap().delta).collect();
    let (lo, hi) = d2.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    Outcome::new(
        full == 1.0 && empty == 0.0 && hi / lo - 1.0 <= 0.05,
        format!("filled {full}, empty {empty}, flat delta_2 {d2:.4?} (spread {:.2}%)", 100.0 * (hi / lo - 1.0)),
    )
}

fn double_phase_op(d: &GridDomain) -> Operator {
    let params = DoublePhaseParams::with_exponents(3.0, 4.0, d.dim()).unwrap();
    let phase = PhaseField::distance_power(d, &params, 1.0, 1.0, 0.5).unwrap();
    Operator::DoublePhase { params, phase: Arc::new(phase) }
}

fn solver_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0usize;
    for instance in 0..20 {
        let dim = if instance % 2 == 0 { 1 } else { 2 };
        let d = halfspace(dim, 1.0 / 16.0);
        let shift: f64 = rng.gen_range(0.0..0.2);
        let freq: f64 = rng.gen_range(1.0..4.0);
        let lo: Vec<f64> = (0..d.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|&v| v + rng.gen_range(0.0..0.5)).collect();
        let (bmin, bmax) = (lo.iter().copied().fold(-1.0f64, f64::min), hi.iter().copied().fold(1.0 + shift, f64::max));
        let fu = BoundaryDatum::new("lower", move |x, t| (freq * (x[0] + x[1])).sin() * (1.0 - t));
        let fv = BoundaryDatum::new("upper", move |x, t| (freq * (x[0] + x[1])).sin() * (1.0 - t) + shift);
        let op = double_phase_op(&d);
        let mut u = Stepper::with_initial(d.clone(), op.clone(), fu, 0.5, lo).unwrap();
        let mut v = Stepper::with_initial(d.clone(), op, fv, 0.5, hi).unwrap();
        for _ in 0..100 {
            let dt = u.prepare().min(v.prepare());
            u.apply(dt).unwrap();
            v.apply(dt).unwrap();
            violations += u.values().iter().zip(v.values()).filter(|(a, b)| **a > **b + 1e-12).count();
            violations += u.values().iter().chain(v.values()).filter(|&&w| w < bmin - 1e-12 || w > bmax + 1e-12).count();
        }
    }

    let d = halfspace(2, 1.0 / 16.0);
    let datum = BoundaryDatum::new("ramp", |x, t| x[0].max(0.0) * (1.0 + t) + 0.3 * x[1]);
    let opts = SolveOptions::new(0.02, 0.5, 0.005).unwrap();
    let params = DoublePhaseParams::with_exponents(3.0, 4.0, 2).unwrap();
    let a = solve(d.clone(), Arc::new(PhaseField::zero()), params, &datum, &opts).unwrap();
    let s = Stepper::new(d, Operator::PLaplace { p: 3.0 }, datum, 0.5).unwrap();
    let b = run_stepper(s, Arc::new(PhaseField::zero()), params, &opts).unwrap();
    let bitwise = a.len_times() == b.len_times()
        && (0..a.len_times()).all(|k| a.slice(k).iter().zip(b.slice(k)).all(|(x, y)| x.to_bits() == y.to_bits()));

    let run = |h: f64| {
        let d = halfspace(1, h);
        let datum =
            BoundaryDatum::new("bump", |x, t| if t == 0.0 && x[0] > 0.0 && x[0] < 1.0 { (PI * x[0]).sin() } else { 0.0 });
        let params = DoublePhaseParams::with_exponents(3.0, 4.0, 1).unwrap();
        let u = solve(d.clone(), Arc::new(PhaseField::zero()), params, &datum, &SolveOptions::new(0.1, 0.5, 0.1).unwrap())
            .unwrap();
        let last = u.slice(u.len_times() - 1).to_vec();
        (d, last)
    };
    let sols: Vec<_> = [32.0, 64.0, 128.0].iter().map(|n| run(1.0 / n)).collect();
    let diff = |c: usize, f: usize| {
        let ((dc, uc), (df, uf)) = (&sols[c], &sols[f]);
        (0..dc.len()).map(|i| (uc[i] - uf[df.node_at(&dc.coords(i)).unwrap()]).abs()).fold(0.0, f64::max)
    };
    let factor = diff(0, 1) / diff(1, 2);
    Outcome::new(
        violations == 0 && bitwise && factor >= 1.5,
        format!("20 instances, {violations} violations; a = 0 bit-identical: {bitwise}; self-convergence factor {factor:.2}"),
    )
}

struct SuiteCase {
    scenario: Scenario,
    coarse: SpaceTimeField,
    fine: SpaceTimeField,
}

fn suite_runs() -> Vec<SuiteCase> {
    standard_scenarios()
        .into_iter()
        .map(|scenario| {
            let coarse = run_case(&scenario, &SuiteRun::default()).unwrap();
            let fine = run_case(&scenario, &SuiteRun { h: 1.0 / 64.0, ..SuiteRun::default() }).unwrap();
            SuiteCase { scenario, coarse, fine }
        })
        .collect()
}

fn max_energy_ratio(u: &SpaceTimeField) -> f64 {
    let mut worst = 0.0f64;
    for k in [0.4, 0.5, 0.6] {
        for sigma in [0.5, 0.25, 0.125] {
            let c = CutoffSpec::new(sigma, SUITE_CENTER, 0.15, 0.02, 0.05).unwrap();
            for variant in [EnergyVariant::SpaceTime, EnergyVariant::InitialSlab] {
                worst = worst.max(check_energy_estimate(u, &c, k, variant).unwrap().ratio);
            }
        }
    }
    worst
}

fn energy_suite(cases: &[SuiteCase]) -> Outcome {
    let mut pass = true;
    let parts: Vec<String> = cases
        .iter()
        .map(|c| {
            let (a, b) = (max_energy_ratio(&c.coarse), max_energy_ratio(&c.fine));
            let change = (b / a).max(a / b);
            pass &= a.is_finite() && b.is_finite() && change <= 1.25;
            format!("{} {a:.4e} -> {b:.4e} (x{:.3})", c.scenario.name(), b / a)
        })
        .collect();
    Outcome::new(pass, format!("max ratio h=1/32 -> 1/64: {}", parts.join("; ")))
}

fn critical_mass(cases: &[SuiteCase]) -> Outcome {
    let (r, k) = (0.1, 0.25);
    let mut pass = true;
    let mut min_delta = f64::INFINITY;
    let mut min_psi = f64::INFINITY;
    let mut min_slabs = usize::MAX;
    for u in cases.iter().flat_map(|c| [&c.coarse, &c.fine]) {
        let cm = check_critical_mass(u, &SUITE_CENTER, 0.0, r, k).unwrap();
        let psi = check_psi_decay(u, &SUITE_CENTER, 0.0, r, k, cm.delta_emp, 0.1).unwrap();
        pass &= cm.delta_emp > 0.0 && psi.slabs.len() >= 10 && psi.report.ratio >= 0.9;
        min_delta = min_delta.min(cm.delta_emp);
        min_psi = min_psi.min(psi.report.ratio);
        min_slabs = min_slabs.min(psi.slabs.len());
    }
    Outcome::new(pass, format!("6 runs: min delta_emp {min_delta:.3}, min Psi ratio {min_psi:.3} over >= {min_slabs} slabs"))
}

fn reverse_holder() -> Outcome {
    let d = halfspace(2, 1.0 / 32.0);
    let params = DoublePhaseParams::with_exponents(3.0, 4.0, 2).unwrap();
    let phase = Arc::new(PhaseField::distance_power(&d, &params, 1.0, 1.0, 1.0).unwrap());
    let c = [0.5, 0.0];
    let datum = BoundaryDatum::new("bump", move |x, _| 0.1 + (-distance(x, &c).powi(2) / 0.04).exp());
    let u = solve(d, phase, params, &datum, &SolveOptions::new(0.03, 0.5, 0.001).unwrap()).unwrap();
    let ratios: Vec<f64> =
        [0.5, 0.9, 0.99].iter().map(|&m| check_reverse_holder(&u, &c, 0.02, 0.15, 0.005, m, 0.0).unwrap().ratio).collect();
    let pass = ratios.iter().all(|r| r.is_finite()) && ratios.windows(2).all(|w| w[1] > w[0]);
    Outcome::new(pass, format!("ratios for m = 0.5, 0.9, 0.99: {ratios:.4?}"))
}

fn weak_harnack_ratio(u: &SpaceTimeField) -> f64 {
    let (level, r, eta) = (10, 0.3 / 16.0, 0.05);
    let t0 = u.times()[level];
    let (_, eta1) = weak_harnack_window(u, &SUITE_CENTER, t0, r, eta, 1.0).unwrap();
    let fine = restart(u, level, &suite_datum(), eta1, 10, 0.5).unwrap();
    check_weak_harnack(&fine, &SUITE_CENTER, t0, r, eta, 1.0).unwrap().ratio
}

fn weak_harnack(cases: &[SuiteCase]) -> Outcome {
    let mut pass = true;
    let parts: Vec<String> = cases
        .iter()
        .map(|c| {
            let (a, b) = (weak_harnack_ratio(&c.coarse), weak_harnack_ratio(&c.fine));
            pass &= a.is_finite() && b.is_finite() && a > 0.0 && (0.5..=2.0).contains(&(b / a));
            format!("{} {a:.3} -> {b:.3}", c.scenario.name())
        })
        .collect();
    Outcome::new(pass, format!("C_emp h=1/32 -> 1/64: {}", parts.join("; ")))
}

/// Indices by scanning every i against the halving rule.
fn brute_force_indices(delta: &dyn Fn(f64) -> f64, rho0: f64, sigma: f64, r_min: f64, max_terms: usize) -> Vec<usize> {
    let mut out = vec![0usize];
    let mut i = 1;
    while out.len() < max_terms && rho0 * sigma.powi(i as i32) >= r_min {
        let last = *out.last().unwrap();
        if delta(rho0 * sigma.powi(i as i32)) >= delta(rho0 * sigma.powi(last as i32)) / 2f64.powi((i - last) as i32) {
            out.push(i);
        }
        i += 1;
    }
    out
}

fn radii_extraction() -> Outcome {
    let cfg = RadiiConfig { rho0: 1.0, mu0: 1.0, c1: 2.0, c_bar: 0.5, gamma_tilde: 1.0, exponent: 3.0, max_terms: 40 };
    let profiles: [(&str, Box<dyn Fn(f64) -> f64>); 3] = [
        ("constant", Box::new(|_| 0.6)),
        ("power", Box::new(|r: f64| r.powf(0.1))),
        ("staircase", Box::new(|r: f64| if r >= 0.5 { 1.0 } else { 0.125 })),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, f) in &profiles {
        let prof = FnProfile::new(|r| f(r), 1e-4, 1.0, 0.1);
        let seq = extract_radii(&prof, &cfg).unwrap();
        let props = seq.properties(&prof).unwrap();
        let brute = brute_force_indices(&|r| f(r), 1.0, cfg.sigma(), 1e-4, 40);
        let first = minimal_index(&prof, 1.0, cfg.sigma(), 0, f(1.0)).ok().map(|(i, _)| i);
        let ok = props.lower_bound && props.halving && props.partial_sums && seq.indices == brute;
        pass &= ok && first == brute.get(1).copied();
        parts.push(format!("{name}: {} radii, indices {:?}..", seq.len(), &seq.indices[..seq.len().min(3)]));
    }
    Outcome::new(pass, parts.join("; "))
}

/// Half-extent 0.25 box at h = 1/128 with the datum (x1⁺)^{3/4}.
fn decay_run(phase: PhaseField, t_end: f64) -> SpaceTimeField {
    let spec = DomainSpec::new(Scenario::FlatHalfspace, 2).with_half_extent(0.25);
    let d = Arc::new(build_domain(&spec, 1.0 / 128.0).unwrap());
    let params = DoublePhaseParams::with_exponents(3.0, 4.0, 2).unwrap();
    let datum = BoundaryDatum::new("holder", |x, _| x[0].max(0.0).powf(0.75)).with_holder(1.0, 0.75);
    solve(d, Arc::new(phase), params, &datum, &SolveOptions::new(t_end, 0.5, t_end / 50.0).unwrap()).unwrap()
}

fn decay_profile(s: f64) -> WienerProfile {
    let d = build_domain(&DomainSpec::new(Scenario::FlatHalfspace, 2), 1.0 / 128.0).unwrap();
    wiener_sum(&d, &[0.0, 0.0], 0.2, 4, s, &WienerOptions::default()).unwrap()
}

fn decay_in(u: &SpaceTimeField, profile: &WienerProfile) -> DecayReport {
    let cfg = AccommodationConfig { c_p: 0.25, c_q: 0.25, ..Default::default() };
    let t0 = *u.times().last().unwrap();
    let acc = accommodate_degeneracy(u, profile, &[0.0, 0.0], t0, &cfg).unwrap();
    verify_decay(u, &acc, profile, &DecayConfig::default()).unwrap()
}

fn describe(mode: &str, rep: &DecayReport) -> (bool, String) {
    let levels = rep.trace.entries.len();
    match &rep.fit {
        Some(fit) => (
            rep.status == DecayStatus::Pass && fit.slope > 0.0 && fit.envelope_holds && levels >= 5,
            format!("{mode}: {}, slope {:.3}, {levels} levels, envelope {}", rep.status, fit.slope, fit.envelope_holds),
        ),
        None => (false, format!("{mode}: {} without a fit, {levels} levels", rep.status)),
    }
}

fn decay() -> Outcome {
    let p_rep = decay_in(&decay_run(PhaseField::zero(), 0.1), &decay_profile(3.0));
    let q_rep = decay_in(&decay_run(PhaseField::constant(1.0, 1e-3, 8.0).unwrap(), 0.03), &decay_profile(4.0));
    let (a, da) = describe("p-mode", &p_rep);
    let (b, db) = describe("q-mode", &q_rep);
    Outcome::new(a && b, format!("{da}; {db}"))
}

fn negative_scenario() -> Outcome {
    let d = build_domain(&DomainSpec::new(Scenario::Spike { width_exponent: 3.0 }, 2), 1.0 / 64.0).unwrap();
    let spike = wiener_sum(&d, &[0.25, 0.0], 0.2, 4, 3.0, &WienerOptions::default()).unwrap();

    let sqrt = {
        let d = halfspace(2, 1.0 / 64.0);
        let params = DoublePhaseParams::with_exponents(3.0, 4.0, 2).unwrap();
        let times = (0..=100).map(|k| k as f64 * 0.001).collect();
        SpaceTimeField::from_fn(d, Arc::new(PhaseField::zero()), params, times, |x, _| x[0].max(0.0).sqrt()).unwrap()
    };
    let halving: Vec<f64> = (0..6).map(|j| 0.5f64.powi(j)).collect();
    let convergent = WienerProfile::from_deltas(3.0, [0.0, 0.0], 0.2, halving, 0.1).unwrap();
    let synthetic = decay_in(&sqrt, &convergent).status;

    let tail = spike.deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = Outcome::new(
        false,
        format!(
            "spike(3) delta_3 >= {tail:.2} on all {} levels (divergent); synthetic convergent profile reports {synthetic}",
            spike.deltas.len()
        ),
    );
    if spike.divergence_consistent && synthetic == DecayStatus::Inconclusive {
        out.unattainable = Some("points have positive 3-capacity in the plane, so no spike has a convergent Wiener sum");
    }
    out
}

fn main() {
    let start = Instant::now();
    let suite = suite_runs();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("capacity scaling", Box::new(capacity_scaling)),
        ("linear-case oracle", Box::new(linear_oracle)),
        ("delta bounds and extremes", Box::new(delta_extremes)),
        ("solver invariants", Box::new(solver_invariants)),
        ("energy estimate", Box::new(|| energy_suite(&suite))),
        ("critical mass and Psi decay", Box::new(|| critical_mass(&suite))),
        ("reverse Hoelder", Box::new(reverse_holder)),
        ("weak Harnack", Box::new(|| weak_harnack(&suite))),
        ("radii extraction", Box::new(radii_extraction)),
        ("oscillation decay", Box::new(decay)),
        ("negative scenario", Box::new(negative_scenario)),
    ];
    let mut failed = Vec::new();
    let mut unattainable = Vec::new();
    for (name, run) in &criteria {
        let t = Instant::now();
        let out = run();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        let reason = out.unattainable.map(|r| format!(" [unattainable: {r}]")).unwrap_or_default();
        println!("{tag} {name}: {}{reason} ({:.1}s)", out.detail, t.elapsed().as_secs_f64());
        match (out.pass, out.unattainable) {
            (true, _) => {}
            (false, Some(_)) => unattainable.push(*name),
            (false, None) => failed.push(*name),
        }
    }
    let passed = criteria.len() - failed.len() - unattainable.len();
    println!(
        "acceptance: {passed}/{} pass; unattainable: {unattainable:?}; failed: {failed:?} ({:.0}s)",
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
