//! Plain gradient echo pinned at the canonical working point: absorb one
//! Gaussian pulse at optical depth 5.4, reverse the gradient, and check the
//! echo against the ideal absorb-then-release efficiency (1 - e^-d)^2.

mod common;

use std::sync::OnceLock;

use gem_core::metrics::{detect_pulses, retrieval_efficiency};
use gem_core::presets;
use gem_core::solver::{run, SimulationRecord};

use common::*;

fn echo() -> &'static (presets::ReadoutPreset, SimulationRecord) {
    static CACHE: OnceLock<(presets::ReadoutPreset, SimulationRecord)> = OnceLock::new();
    CACHE.get_or_init(|| {
        let preset = presets::plain_echo();
        let plan = preset.plan().expect("plain echo must plan");
        let record = run(&preset.params, &plan.schedule).expect("plain echo must run");
        (preset, record)
    })
}

#[test]
fn efficiency_matches_the_absorption_model() {
    let (preset, record) = echo();
    let depth = preset.params.optical_depth(preset.eta_bar);
    let span_end = *record.times.last().unwrap();
    let eff = retrieval_efficiency(record, (preset.t0, span_end)).unwrap().efficiency;
    let ideal = (1.0 - (-depth).exp()).powi(2);
    assert!(
        (eff - ideal).abs() < 5e-3,
        "echo efficiency {eff:.6} vs ideal {ideal:.6} at depth {depth}"
    );
}

#[test]
fn echo_returns_at_the_mirrored_time() {
    let (preset, record) = echo();
    let found = detect_pulses(record, 0.1);
    assert_eq!(found.len(), 1, "exactly one echo, got {found:?}");
    let expected = 2.0 * preset.t0 - preset.pulse.center_tbar;
    assert!(
        (found[0].peak_time - expected).abs() <= record.sample_dt(),
        "echo at {:.4}, expected {expected:.4}",
        found[0].peak_time
    );
}

#[test]
fn echo_keeps_the_input_shape() {
    let (preset, record) = echo();
    let found = detect_pulses(record, 0.1);
    let slice = &record.output_intensity[found[0].sample_range.0..=found[0].sample_range.1];
    let (_, scores) = matched_input(slice, &[preset.pulse], record.sample_dt());
    assert!(scores[0] > 0.995, "echo correlates {:.4} with the input shape", scores[0]);
}
