use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use wienerlab_core::boundary::*;
use wienerlab_core::capacity::WienerProfile;
use wienerlab_core::geometry::{build_domain, DomainSpec, Scenario};
use wienerlab_core::pde::{Sign, SpaceTimeField};
use wienerlab_core::phase::{DoublePhaseParams, Mode, PhaseField};
use wienerlab_core::Error;

fn params() -> DoublePhaseParams {
    DoublePhaseParams::with_exponents(3.0, 4.0, 2).unwrap()
}

fn field(h: f64, t_end: f64, f: impl Fn(&[f64; 2], f64) -> f64) -> SpaceTimeField {
    let d = Arc::new(build_domain(&DomainSpec::new(Scenario::FlatHalfspace, 2), h).unwrap());
    let n = (t_end / 0.001).round() as usize;
    let times = (0..=n).map(|k| k as f64 * 0.001).collect();
    SpaceTimeField::from_fn(d, Arc::new(PhaseField::zero()), params(), times, f).unwrap()
}

fn radii_cfg(rho0: f64, c_bar: f64) -> RadiiConfig {
    RadiiConfig { rho0, mu0: 1.0, c1: 2.0, c_bar, gamma_tilde: 1.0, exponent: 3.0, max_terms: 40 }
}

/// Full index sequence by scanning every i against the halving rule.
fn brute_force_indices(delta: &dyn Fn(f64) -> f64, rho0: f64, sigma: f64, r_min: f64, max_terms: usize) -> Vec<usize> {
    let mut out = vec![0usize];
    let mut i = 1;
    while out.len() < max_terms && rho0 * sigma.powi(i as i32) >= r_min {
        let last = *out.last().unwrap();
        let bound = delta(rho0 * sigma.powi(last as i32)) / 2f64.powi((i - last) as i32);
        if delta(rho0 * sigma.powi(i as i32)) >= bound {
            out.push(i);
        }
        i += 1;
    }
    out
}

#[test]
fn eta_within_matches_radius_threshold() {
    let p = params();
    for gamma in [0.25, 1.0, 3.0] {
        for r in [0.01, 0.1, 0.3] {
            for md in [0.003, 0.02, 0.2, 0.9, 2.5] {
                let e = eta_star(Mode::P, &p, gamma, md, r, 0.0).unwrap();
                assert_eq!(e.within, md >= gamma.powf(1.0 / (p.p - 2.0)) * r, "p: gamma {gamma} r {r} mu_delta {md}");
                for a in [0.5, 1.0, 4.0] {
                    let e = eta_star(Mode::Q, &p, gamma, md, r, a).unwrap();
                    let threshold = (gamma / a).powf(1.0 / (p.q - 2.0)) * r;
                    assert_eq!(e.within, md >= threshold, "q: gamma {gamma} r {r} mu_delta {md} a {a}");
                }
            }
        }
    }
}

#[test]
fn capacity_estimate_of_level_field_is_delta() {
    let k = 0.4;
    let u = field(1.0 / 32.0, 0.1, |_, _| k);
    let setting = GeometricSetting::p_mode(&params(), 1.0, 0.7, 0.6, 0.1, 1.0).unwrap();
    let i_val = capacity_average(&u, &[0.0, 0.0], 0.1, &setting, k, Sign::Minus).unwrap();
    assert_relative_eq!(i_val, 0.7, max_relative = 1e-14);
    let rep = check_capacity_estimate(&setting, 0.6, i_val).unwrap();
    assert_relative_eq!(rep.ratio, 0.6, max_relative = 1e-14);
}

#[test]
fn q_mode_tail_vanishes_as_radius_ratio_shrinks() {
    let mut prev = f64::INFINITY;
    for big_r in [1.0, 10.0, 100.0, 1e4] {
        let s = GeometricSetting::q_mode(&params(), 1.0, 1.0, 0.5, 0.01, 1.0, 1.0, big_r).unwrap();
        let rep = check_capacity_estimate(&s, 0.5, 0.25).unwrap();
        let tail = rep.rhs - 0.25;
        assert!(tail < prev);
        prev = tail;
    }
    assert!(prev < 1e-12);
}

#[test]
fn staircase_profile_skips_to_brute_force_index() {
    let stair = |r: f64| if r >= 0.5 { 1.0 } else { 0.125 };
    let prof = FnProfile::new(stair, 1e-4, 1.0, 0.1);
    let seq = extract_radii(&prof, &radii_cfg(1.0, 0.5)).unwrap();
    let expected = brute_force_indices(&stair, 1.0, 0.375, 1e-4, 40);
    assert_eq!(expected[..2], [0, 3]);
    assert_eq!(seq.indices, expected);
    let props = seq.properties(&prof).unwrap();
    assert!(props.lower_bound && props.halving && props.partial_sums);
    assert!(props.gamma4.is_finite() && props.gamma4 > 0.0);
}

#[test]
fn power_law_profile_steps_consecutively() {
    let prof = FnProfile::new(|r: f64| r.powf(0.1), 1e-5, 1.0, 0.1);
    let seq = extract_radii(&prof, &radii_cfg(1.0, 0.5)).unwrap();
    assert!(seq.indices.iter().enumerate().all(|(j, &i)| i == j));
    assert_eq!(seq.indices, brute_force_indices(&|r: f64| r.powf(0.1), 1.0, 0.375, 1e-5, 40));
    let props = seq.properties(&prof).unwrap();
    assert!(props.lower_bound && props.halving && props.partial_sums);
    assert!(props.gamma4.is_finite());
}

#[test]
fn q_mode_radii_use_the_q_exponent() {
    let c_bar = RadiiConfig::q_mode_c_bar(0.1, 2.0, 3.0, 4.0);
    assert_relative_eq!(c_bar, 0.1 * (1.0 + 0.5 + 2f64.powf(-0.5)));
    let cfg = RadiiConfig { exponent: 4.0, c_bar, ..radii_cfg(0.5, c_bar) };
    let prof = FnProfile::new(|_| 0.9, 1e-4, 0.5, 0.1);
    let seq = extract_radii(&prof, &cfg).unwrap();
    for j in 0..seq.len() {
        let expected = seq.rho[j].powi(4) * (seq.mu[j] * 0.9).powi(-2);
        assert_relative_eq!(seq.eta[j], expected, max_relative = 1e-12);
    }
    assert!(seq.properties(&prof).unwrap().halving);
}

#[test]
fn accommodation_of_full_density_takes_largest_timely_radius() {
    let u = field(1.0 / 32.0, 0.1, |_, _| 0.3);
    let prof = FnProfile::new(|_| 1.0, 1e-3, 0.5, 0.1);
    let acc = accommodate_degeneracy(&u, &prof, &[0.0, 0.0], 0.1, &AccommodationConfig::default()).unwrap();
    // Direct scan of η̃₀ = 3 ρ^{5/2} < 0.1 over 0.5, 0.25, ...
    let expected = prof.sample_radii().into_iter().find(|&r| 3.0 * r.powf(2.5) < 0.1).unwrap();
    assert_eq!(acc.rho0, expected);
    assert_eq!(acc.rho0, 0.25);
    assert_eq!(acc.mode, Mode::P);
    assert_eq!((acc.omega0, acc.mu_plus, acc.mu_minus, acc.datum_osc), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn vanishing_density_has_no_admissible_radius() {
    let u = field(1.0 / 32.0, 0.1, |_, _| 0.3);
    let prof = FnProfile::new(|_| 0.0, 1e-3, 0.5, 0.1);
    let err = accommodate_degeneracy(&u, &prof, &[0.0, 0.0], 0.1, &AccommodationConfig::default()).unwrap_err();
    assert!(matches!(err, Error::NoAdmissibleRadius(_)));
}

#[test]
fn larger_epsilon_never_enlarges_rho0() {
    let u = field(1.0 / 32.0, 0.06, |_, _| 0.3);
    let prof = FnProfile::new(|_| 1.0, 1e-3, 0.5, 0.1);
    let rho0: Vec<f64> = [0.1, 0.5]
        .iter()
        .map(|&epsilon| {
            let cfg = AccommodationConfig { epsilon, ..Default::default() };
            accommodate_degeneracy(&u, &prof, &[0.0, 0.0], 0.06, &cfg).unwrap().rho0
        })
        .collect();
    assert_eq!(rho0, vec![0.25, 0.125]);
}

#[test]
fn constant_solution_decays_trivially() {
    let u = field(1.0 / 64.0, 0.1, |_, _| 0.3);
    let prof = FnProfile::new(|_| 1.0, 1e-3, 0.5, 0.1);
    let acc = accommodate_degeneracy(&u, &prof, &[0.0, 0.0], 0.1, &AccommodationConfig::default()).unwrap();
    let rep = verify_decay(&u, &acc, &prof, &DecayConfig::default()).unwrap();
    assert_eq!(rep.status, DecayStatus::Pass);
    assert!(rep.fit.is_none());
    assert!(rep.trace.entries.iter().all(|e| e.osc == 0.0));
}

/// u = sqrt(x1⁺), time independent, zero on the lateral boundary.
fn sqrt_field() -> SpaceTimeField {
    field(1.0 / 128.0, 0.1, |x, _| x[0].max(0.0).sqrt())
}

fn decay_with(deltas: Vec<f64>) -> (Accommodation, DecayReport) {
    let u = sqrt_field();
    let prof = WienerProfile::from_deltas(3.0, [0.0, 0.0], 0.2, deltas, 0.1).unwrap();
    let cfg = AccommodationConfig { c_p: 0.25, ..Default::default() };
    let acc = accommodate_degeneracy(&u, &prof, &[0.0, 0.0], 0.1, &cfg).unwrap();
    let rep = verify_decay(&u, &acc, &prof, &DecayConfig::default()).unwrap();
    (acc, rep)
}

#[test]
fn divergent_profile_fits_the_square_root_decay() {
    let (acc, rep) = decay_with(vec![1.0; 6]);
    assert_eq!(acc.rho0, 0.2);
    assert_eq!(rep.status, DecayStatus::Pass);
    let fit = rep.fit.unwrap();
    // On the lattice osc(ρ) = max sqrt(x1) over nodes of the open ball, and
    // ∫ = ln(ρ₀/ρ); regress ln osc on −∫ directly.
    let u = sqrt_field();
    let lat = u.domain().lattice();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rep
        .trace
        .entries
        .iter()
        .map(|e| {
            let osc = lat.nodes_in_ball(&[0.0, 0.0], e.rho).iter().map(|&i| lat.coords(i)[0].max(0.0).sqrt()).fold(0.0, f64::max);
            assert_eq!(e.osc, osc);
            (-(0.2 / e.rho).ln(), osc.ln())
        })
        .unzip();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    assert_relative_eq!(fit.slope, slope, max_relative = 1e-9);
    assert_relative_eq!(fit.holder_exponent, slope, max_relative = 1e-9);
    assert!(fit.slope > 0.0 && fit.envelope_holds);
    assert!(rep.trace.is_monotone());
}

#[test]
fn convergent_profile_is_inconclusive() {
    let (_, rep) = decay_with(vec![1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]);
    assert_eq!(rep.status, DecayStatus::Inconclusive);
    assert_eq!(rep.status.to_string(), "criterion-inconclusive");
}

#[test]
fn too_few_levels_is_insufficient_scale() {
    let u = sqrt_field();
    let prof = WienerProfile::from_deltas(3.0, [0.0, 0.0], 0.2, vec![1.0; 6], 0.1).unwrap();
    let cfg = AccommodationConfig { c_p: 0.25, ..Default::default() };
    let acc = accommodate_degeneracy(&u, &prof, &[0.0, 0.0], 0.1, &cfg).unwrap();
    let err = verify_decay(&u, &acc, &prof, &DecayConfig { min_levels: 12, levels: 12, ..Default::default() }).unwrap_err();
    assert!(matches!(err, Error::InsufficientScale { needed: 12, .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extracted_radii_satisfy_stored_properties(
        steps in prop::collection::vec(0.02f64..1.0, 12),
        c1 in 1.2f64..6.0,
        s in prop::sample::select(vec![3.0, 4.0]),
    ) {
        let levels = steps.clone();
        let profile = move |r: f64| {
            let j = ((1.0 / r).log2().floor().max(0.0) as usize).min(levels.len() - 1);
            levels[j]
        };
        let prof = FnProfile::new(profile.clone(), 1e-3, 1.0, 0.01);
        let c_bar = 0.5 * steps[0];
        let cfg = RadiiConfig { rho0: 1.0, mu0: 1.0, c1, c_bar, gamma_tilde: 1.0, exponent: s, max_terms: 60 };
        let seq = extract_radii(&prof, &cfg).unwrap();
        prop_assert!(seq.rho.windows(2).all(|w| w[1] < w[0]));
        let props = seq.properties(&prof).unwrap();
        prop_assert!(props.lower_bound);
        prop_assert!(props.halving);
        prop_assert!(props.partial_sums);
        prop_assert!(props.gamma4.is_finite());
        let sigma = seq.sigma;
        prop_assert_eq!(&seq.indices, &brute_force_indices(&profile, 1.0, sigma, 1e-3, 60));
    }

    #[test]
    fn intrinsic_cylinders_nest_in_q0(scale in 0.2f64..2.0, t0 in 0.05f64..0.1) {
        let u = field(1.0 / 64.0, 0.1, move |x, _| scale * x[0].max(0.0).sqrt());
        let prof = WienerProfile::from_deltas(3.0, [0.0, 0.0], 0.2, vec![1.0; 5], 0.1).unwrap();
        let cfg = AccommodationConfig { c_p: 0.25, ..Default::default() };
        let t0 = (t0 * 1000.0).round() / 1000.0;
        if let Ok(acc) = accommodate_degeneracy(&u, &prof, &[0.0, 0.0], t0, &cfg) {
            if let Ok(rep) = verify_decay(&u, &acc, &prof, &DecayConfig::default()) {
                for e in &rep.trace.entries {
                    prop_assert!(e.rho <= acc.rho0);
                    prop_assert!(e.cylinder.eta_minus <= acc.eta_tilde0);
                    prop_assert!(e.cylinder.t_end() <= acc.q0.t_end());
                }
                prop_assert!(rep.trace.is_monotone());
            }
        }
    }

    #[test]
    fn alternative_reduces_only_above_threshold(mu in 0.01f64..2.0, delta in 0.0f64..1.0, r in 0.001f64..0.4, c in 0.1f64..4.0) {
        let s = GeometricSetting::p_mode(&params(), 1.0, mu, delta.max(1e-3), r, 1.0).unwrap();
        match oscillation_alternative(&s, delta, c).unwrap() {
            Alternative::SmallRadius => prop_assert!(mu * delta <= 2.0 * c * r),
            Alternative::Reduction { mu_reduced } => {
                prop_assert!(mu * delta > 2.0 * c * r);
                prop_assert!(mu_reduced < mu);
            }
        }
    }
}
