//! Helpers and independent oracles shared by the integration tests. The
//! Bessel oracle here is a plain ascending power series, deliberately a
//! different algorithm from the library's downward recurrence.
#![allow(dead_code)]

use gem_core::metrics::max_normalized_correlation;
use gem_core::model::InputPulse;
use gem_core::solver::{input_pulse_amplitude, SimulationRecord};

/// J_n(x) by the ascending series. Accurate to ~1e-13 for |x| <= 12; that
/// is plenty for cross-checking and far from the recurrence code path.
pub fn series_jn(n: i32, x: f64) -> f64 {
    let m = n.unsigned_abs();
    let sign = if n < 0 && m % 2 == 1 { -1.0 } else { 1.0 };
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=m {
        term *= half / k as f64;
    }
    let mut sum = term;
    for j in 1..=80u32 {
        term *= -(half * half) / (j as f64 * (j + m) as f64);
        sum += term;
        if term.abs() < 1e-20 * sum.abs().max(1e-300) {
            break;
        }
    }
    sign * sum
}

/// First positive root of J_0 from the series oracle, by bisection.
pub fn series_j0_root() -> f64 {
    let (mut lo, mut hi) = (2.0, 3.0);
    assert!(series_jn(0, lo) > 0.0 && series_jn(0, hi) < 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if series_jn(0, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Output energy in [a, b], trapezoid over the fully contained cells.
pub fn output_energy_between(record: &SimulationRecord, a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for i in 1..record.times.len() {
        let (t0, t1) = (record.times[i - 1], record.times[i]);
        if t0 >= a && t1 <= b {
            total +=
                0.5 * (record.output_intensity[i - 1] + record.output_intensity[i]) * (t1 - t0);
        }
    }
    total
}

/// Index of the first sample at or past `t`.
pub fn sample_at(record: &SimulationRecord, t: f64) -> usize {
    record.times.iter().position(|&s| s >= t).expect("time inside the record span")
}

/// Intensity template of one input pulse on a uniform grid of spacing `dt`.
pub fn intensity_template(pulse: &InputPulse, dt: f64) -> Vec<f64> {
    let n = (8.0 * pulse.width_tbar / dt).ceil() as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 * dt - 4.0 * pulse.width_tbar;
            let x = t / pulse.width_tbar;
            pulse.amplitude.norm_sqr() * (-2.0 * x * x).exp()
        })
        .collect()
}

/// Best-match input index (1-based) for one detected output slice, plus the
/// full score vector against every pulse template.
pub fn matched_input(slice: &[f64], pulses: &[InputPulse], dt: f64) -> (usize, Vec<f64>) {
    let scores: Vec<f64> = pulses
        .iter()
        .map(|p| max_normalized_correlation(slice, &intensity_template(p, dt)))
        .collect();
    let best = (0..scores.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
    (best + 1, scores)
}

/// Input-train intensity sampled on the record grid, truncated once every
/// pulse tail has entered.
pub fn input_train(record: &SimulationRecord, pulses: &[InputPulse]) -> Vec<f64> {
    let span = pulses.iter().map(|p| p.center_tbar + 4.0 * p.width_tbar).fold(0.0, f64::max);
    record
        .times
        .iter()
        .take_while(|&&t| t <= span)
        .map(|&t| input_pulse_amplitude(pulses, t).norm_sqr())
        .collect()
}

/// Least-squares scale `a` for y ~ a * model, and the fit's R^2.
pub fn scaled_fit(model: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(model.len(), y.len());
    let num: f64 = model.iter().zip(y).map(|(m, v)| m * v).sum();
    let den: f64 = model.iter().map(|m| m * m).sum();
    let a = num / den;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = model.iter().zip(y).map(|(m, v)| (v - a * m).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    (a, 1.0 - ss_res / ss_tot)
}

/// Vertex abscissa of the parabola through three points.
pub fn parabolic_min(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d21 = (y[1] - y[0]) / (x[1] - x[0]);
    let d32 = (y[2] - y[1]) / (x[2] - x[1]);
    let curv = (d32 - d21) / (x[2] - x[0]);
    0.5 * (x[0] + x[1] - d21 / curv)
}

/// Small deterministic xorshift generator so the random-state tests do not
/// depend on an external RNG crate or platform.
pub struct Xorshift(pub u64);

impl Xorshift {
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in [-1, 1).
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0
    }

    /// Uniform in [lo, hi).
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (self.next_unit() + 1.0) * 0.5 * (hi - lo)
    }
}

pub fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}
