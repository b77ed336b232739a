//! Spin-wave spectral analysis: discrete transforms of the field state, the
//! polariton amplitude, diffraction-order populations, and the analytic
//! prediction for what an impulsive sinusoidal light shift does to the
//! stored spectrum.
//!
//! Transform convention: f_hat(k_m) = dz * sum_j f_j exp(-i k_m z_j) on the
//! centered grid, with k_m = m * dk for m in -nz/2 .. nz/2 - 1 and
//! dk = 2 pi / L. Parseval then reads
//! sum_j |f_j|^2 dz = sum_m |f_hat_m|^2 / L.

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::bessel::bessel_jn_all;
use crate::model::{FieldState, SimulationParams};

#[derive(Debug, Error, PartialEq)]
pub enum SpectrumError {
    #[error("state has {got} grid points, parameters say {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("transform lost energy: spatial {spatial:.6e} vs spectral {spectral:.6e}")]
    Parseval { spatial: f64, spectral: f64 },
    #[error("grating wavenumber {k_bar:.6} is not a multiple of the grid spacing {dk:.6}")]
    IncommensurateGrating { k_bar: f64, dk: f64 },
}

/// Momentum-space view of one field state.
#[derive(Debug, Clone)]
pub struct PolaritonSpectrum {
    pub time_tbar: f64,
    /// Ascending wavenumbers, m * dk for m in -nz/2 .. nz/2 - 1.
    pub k_values: Vec<f64>,
    /// Transform of the coherence sigma12.
    pub sigma_hat: Vec<Complex64>,
    /// Transform of the field envelope.
    pub e_hat: Vec<Complex64>,
    /// Polariton amplitude psi(k) = k e_hat(k) + N sigma_hat(k). Diagnostic
    /// combination; the solver never propagates it.
    pub psi: Vec<Complex64>,
    /// Density the polariton combination was built with.
    pub density_n: f64,
}

impl PolaritonSpectrum {
    pub fn dk(&self) -> f64 {
        self.k_values[1] - self.k_values[0]
    }

    /// Stored excitation integral(|sigma12|^2 dz), evaluated spectrally.
    pub fn total_stored(&self) -> f64 {
        let length = 2.0 * std::f64::consts::PI / self.dk();
        self.sigma_hat.iter().map(|v| v.norm_sqr()).sum::<f64>() / length
    }
}

fn transform(values: &[Complex64], dz: f64, length: f64) -> Vec<Complex64> {
    let nz = values.len();
    let mut buf = values.to_vec();
    FftPlanner::new().plan_fft_forward(nz).process(&mut buf);
    let dk = 2.0 * std::f64::consts::PI / length;
    let mut out = vec![Complex64::new(0.0, 0.0); nz];
    for (s, slot) in out.iter_mut().enumerate() {
        let m = (s + nz / 2) % nz;
        let k = (s as f64 - (nz / 2) as f64) * dk;
        // The FFT assumes the first sample sits at z = 0; the grid starts at
        // -L/2, so each bin picks up exp(-i k z0).
        *slot = buf[m] * dz * Complex64::from_polar(1.0, k * length / 2.0);
    }
    out
}

/// Transforms a field state to momentum space and forms the polariton
/// amplitude. Checks Parseval's identity on the coherence as an internal
/// consistency guard.
pub fn to_spectrum(
    state: &FieldState,
    params: &SimulationParams,
) -> Result<PolaritonSpectrum, SpectrumError> {
    let nz = params.grid_points_z;
    if state.sigma12.len() != nz || state.field_e.len() != nz {
        return Err(SpectrumError::LengthMismatch {
            expected: nz,
            got: state.sigma12.len().min(state.field_e.len()),
        });
    }
    let dz = params.dz();
    let length = params.sample_length_lbar;
    let dk = 2.0 * std::f64::consts::PI / length;

    let sigma_hat = transform(&state.sigma12, dz, length);
    let e_hat = transform(&state.field_e, dz, length);

    let spatial: f64 = state.sigma12.iter().map(|s| s.norm_sqr()).sum::<f64>() * dz;
    let spectral: f64 = sigma_hat.iter().map(|s| s.norm_sqr()).sum::<f64>() / length;
    let scale = spatial.abs().max(spectral.abs()).max(1e-300);
    if (spatial - spectral).abs() > 1e-9 * scale {
        return Err(SpectrumError::Parseval { spatial, spectral });
    }

    let half = nz / 2;
    let k_values: Vec<f64> = (0..nz).map(|s| (s as f64 - half as f64) * dk).collect();
    let n = params.atomic_density_n;
    let psi: Vec<Complex64> = (0..nz)
        .map(|s| k_values[s] * e_hat[s] + n * sigma_hat[s])
        .collect();

    Ok(PolaritonSpectrum {
        time_tbar: state.time_tbar,
        k_values,
        sigma_hat,
        e_hat,
        psi,
        density_n: n,
    })
}

/// Predicted coherence spectrum after an impulsive grating of area
/// `nu_bar * tau` at wavenumber `k_bar_r` and phase `phase`:
///
///   sigma_hat'(k) = sum_n i^n exp(i n phase) J_n(nu_bar tau)
///                   sigma_hat(k - n k_bar_r)
///
/// truncated at |n| <= n_trunc. Exact (up to truncation) when the impulse
/// approximation holds, i.e. nothing else acts during tau. The grating must
/// be commensurate with the box (k_bar_r an integer number of dk), so each
/// order is a whole-bin shift; shifts wrap around the momentum window, which
/// is harmless while the populated band plus n_trunc orders fits inside it.
pub fn kd_oracle(
    spectrum: &PolaritonSpectrum,
    nu_bar: f64,
    tau: f64,
    k_bar_r: f64,
    phase: f64,
    n_trunc: i32,
) -> Result<PolaritonSpectrum, SpectrumError> {
    let nz = spectrum.sigma_hat.len();
    let dk = spectrum.dk();
    let ratio = k_bar_r / dk;
    let bins_per_order = ratio.round();
    if (ratio - bins_per_order).abs() > 1e-6 * ratio.abs().max(1.0) {
        return Err(SpectrumError::IncommensurateGrating { k_bar: k_bar_r, dk });
    }
    let bins_per_order = bins_per_order as i64;

    let area = nu_bar * tau;
    let ladder = bessel_jn_all(n_trunc as usize, area.abs());
    let jn = |n: i32| -> f64 {
        // J_{-n}(x) = (-1)^n J_n(x); J_n(-x) = (-1)^n J_n(x).
        let mut v = ladder[n.unsigned_abs() as usize];
        if n < 0 && n % 2 != 0 {
            v = -v;
        }
        if area < 0.0 && n % 2 != 0 {
            v = -v;
        }
        v
    };

    let mut sigma_new = vec![Complex64::new(0.0, 0.0); nz];
    for n in -n_trunc..=n_trunc {
        let coef = Complex64::from_polar(1.0, n as f64 * (std::f64::consts::FRAC_PI_2 + phase))
            * jn(n);
        let shift = n as i64 * bins_per_order;
        for s in 0..nz {
            let src = (s as i64 - shift).rem_euclid(nz as i64) as usize;
            sigma_new[s] += coef * spectrum.sigma_hat[src];
        }
    }

    let psi: Vec<Complex64> = (0..nz)
        .map(|s| spectrum.k_values[s] * spectrum.e_hat[s] + spectrum.density_n * sigma_new[s])
        .collect();

    Ok(PolaritonSpectrum {
        time_tbar: spectrum.time_tbar + tau,
        k_values: spectrum.k_values.clone(),
        sigma_hat: sigma_new,
        e_hat: spectrum.e_hat.clone(),
        psi,
        density_n: spectrum.density_n,
    })
}

/// Population of each diffraction order: the coherence energy in a window of
/// one order spacing centered on `k_center + n * k_bar_r`, for |n| <= n_max.
/// Returned as (order, population) pairs in ascending order; populations sum
/// to the total stored energy when the windows tile the populated band.
pub fn mode_populations(
    spectrum: &PolaritonSpectrum,
    k_bar_r: f64,
    k_center: f64,
    n_max: i32,
) -> Vec<(i32, f64)> {
    let length = 2.0 * std::f64::consts::PI / spectrum.dk();
    let half_window = k_bar_r.abs() / 2.0;
    (-n_max..=n_max)
        .map(|n| {
            let center = k_center + n as f64 * k_bar_r;
            let pop: f64 = spectrum
                .k_values
                .iter()
                .zip(&spectrum.sigma_hat)
                .filter(|(k, _)| (**k - center).abs() < half_window)
                .map(|(_, v)| v.norm_sqr())
                .sum::<f64>()
                / length;
            (n, pop)
        })
        .collect()
}

/// Smallest truncation order keeping the neglected diffraction weight below
/// `epsilon`: sum_{|n| > n_t} J_n(area)^2 < epsilon.
pub fn orders_needed(area: f64, epsilon: f64) -> i32 {
    let a = area.abs();
    let ladder = bessel_jn_all((a.ceil() as usize + 40).min(200), a);
    let mut tail = 1.0 - ladder[0] * ladder[0];
    for (n, j) in ladder.iter().enumerate().skip(1) {
        if tail < epsilon {
            return n as i32 - 1;
        }
        tail -= 2.0 * j * j;
    }
    ladder.len() as i32 - 1
}
