//! Scenario catalog printed by `list-scenarios`.

use wienerlab_core::geometry::Scenario;

pub struct Entry {
    pub name: &'static str,
    pub parameter: &'static str,
    pub modes: &'static str,
    pub exercises: &'static str,
}

pub const CATALOG: [Entry; 5] = [
    Entry {
        name: "flat-halfspace",
        parameter: "none",
        modes: "p-mode, q-mode",
        exercises: "scale-invariant capacity density, divergent Wiener integral, oscillation decay at a flat boundary point",
    },
    Entry {
        name: "exterior-cone",
        parameter: "opening angle in (0, 2pi), default pi/2",
        modes: "p-mode, q-mode",
        exercises: "uniform fatness of the complement, energy and expansion-of-positivity verifiers near a corner",
    },
    Entry {
        name: "slit",
        parameter: "none",
        modes: "p-mode, q-mode",
        exercises: "thin complement with positive capacity density for s > N - 1",
    },
    Entry {
        name: "spike",
        parameter: "width exponent of |x2| <= x1^k, default 3",
        modes: "p-mode",
        exercises: "Wiener-sum diagnostics on a cusp; the decay verifier must not report a pass on a convergent profile",
    },
    Entry {
        name: "full-ball-complement",
        parameter: "radius, default 0.5",
        modes: "p-mode, q-mode",
        exercises: "capacity density identically 1, the suite geometry for the interior verifiers",
    },
];

/// Human-readable catalog.
pub fn render() -> String {
    debug_assert!(CATALOG.iter().map(|e| e.name).eq(Scenario::NAMES));
    let mut out = String::new();
    for e in &CATALOG {
        out.push_str(&format!(
            "{}\n  parameter: {}\n  modes: {}\n  exercises: {}\n",
            e.name, e.parameter, e.modes, e.exercises
        ));
    }
    out
}

/// One tab-separated line per scenario: name, parameter, modes.
pub fn render_machine() -> String {
    CATALOG.iter().map(|e| format!("{}\t{}\t{}\n", e.name, e.parameter, e.modes.replace(' ', ""))).collect()
}
