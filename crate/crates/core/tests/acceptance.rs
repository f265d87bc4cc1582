//! One test per acceptance criterion at full scale. Each prints a PASS/FAIL line.

use nfkit::acceptance::{CriterionOutcome, Suite};

fn report(outcome: CriterionOutcome) {
    println!("{outcome}");
    assert!(outcome.passed, "{outcome}");
}

#[test]
fn criterion_1_boundaries() {
    report(Suite::default().boundaries());
}

#[test]
fn criterion_2_phase_error() {
    report(Suite::default().phase_error());
}

#[test]
fn criterion_3_dof_vs_distance() {
    report(Suite::default().dof_distance());
}

#[test]
fn criterion_4_dof_vs_aperture() {
    report(Suite::default().dof_aperture());
}

#[test]
fn criterion_5_positioning() {
    report(Suite::default().positioning());
}

#[test]
fn criterion_6_beam_split() {
    report(Suite::default().beam_split());
}

#[test]
fn criterion_7_polar_sparsity() {
    report(Suite::default().polar_sparsity());
}

#[test]
fn criterion_8_properties() {
    report(Suite::default().properties());
}

#[test]
fn tampered_rayleigh_is_caught() {
    fn wrong(d: f64, lambda: f64) -> nfkit::Result<f64> {
        Ok(d * d / lambda)
    }
    let suite = Suite {
        rayleigh: wrong,
        ..Suite::default()
    };
    assert!(!suite.boundaries().passed);
}
