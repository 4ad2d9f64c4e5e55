//! Intensity and intensity-rate observables, their correlation functions on
//! the interferometer state, closed-form amplitudes, and the classical
//! (c-number) approximation together with its phase-averaged repair.
//!
//! An intensity *rate* is the fraction of the locally detected intensity
//! falling on one detector, with the value 0 assigned whenever the total
//! local intensity vanishes. On photon-number observables this is the
//! operator `Pi [n_x / (n_c + n_d)] Pi` with `Pi` projecting out the local
//! two-mode vacuum; it is diagonal in the detector number basis, so all
//! correlators are evaluated by propagating the state through the local
//! beamsplitters and reading diagonal eigenvalues.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fock::{min_cutoff, C64, FockOperator, FockVector, ModeLayout};
use crate::optics::{apply_measurement_stage, prepare_state, photon_pair_state, InitialStateParams, Setting, Station};

/// Number of points in the uniform theta-difference grid used for sinusoidal
/// amplitude fits.
pub const SIN_FIT_POINTS: usize = 24;

/// Which detector (or their normalized difference) a rate observable reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateTarget {
    /// Transmitted output `c`.
    C,
    /// Reflected output `d`.
    D,
    /// `(n_c - n_d) / (n_c + n_d)`, the homodyne photocurrent-difference rate.
    Difference,
}

/// Rate eigenvalue on occupations `(n_c, n_d)`; vacuum is assigned 0.
pub fn rate_eigenvalue(target: RateTarget, n_c: usize, n_d: usize) -> f64 {
    let tot = n_c + n_d;
    if tot == 0 {
        return 0.0;
    }
    let tot = tot as f64;
    match target {
        RateTarget::C => n_c as f64 / tot,
        RateTarget::D => n_d as f64 / tot,
        RateTarget::Difference => (n_c as f64 - n_d as f64) / tot,
    }
}

/// A rate observable bound to a detector pair of a layout: carries the dense
/// matrix on the two-mode pair (identity implied elsewhere) and the diagonal
/// over the full layout for cheap expectation values.
#[derive(Debug, Clone)]
pub struct RateObservable {
    pub layout: ModeLayout,
    pub pair: (String, String),
    pub target: RateTarget,
    /// Dense matrix on the `(mode_c, mode_d)` sublayout.
    pub matrix: FockOperator,
    /// Eigenvalue per basis index of the full layout.
    pub diagonal: Vec<f64>,
}

/// Build the rate observable for detectors `mode_c`, `mode_d` of `layout`.
pub fn rate_operator(
    layout: &ModeLayout,
    mode_c: &str,
    mode_d: &str,
    target: RateTarget,
) -> Result<RateObservable> {
    let p = layout.mode_index(mode_c)?;
    let q = layout.mode_index(mode_d)?;
    let pair_layout = ModeLayout::new([
        (mode_c, layout.modes()[p].cutoff),
        (mode_d, layout.modes()[q].cutoff),
    ])?;
    let pair_diag: Vec<f64> = (0..pair_layout.dim())
        .map(|i| {
            let occ = pair_layout.occupations_of(i);
            rate_eigenvalue(target, occ[0], occ[1])
        })
        .collect();
    let matrix = FockOperator::from_diagonal(pair_layout, &pair_diag)?;
    let diagonal: Vec<f64> = (0..layout.dim())
        .map(|i| {
            let occ = layout.occupations_of(i);
            rate_eigenvalue(target, occ[p], occ[q])
        })
        .collect();
    Ok(RateObservable {
        layout: layout.clone(),
        pair: (mode_c.to_string(), mode_d.to_string()),
        target,
        matrix,
        diagonal,
    })
}

fn staged_station_indices(layout: &ModeLayout, station: Station) -> Result<(usize, usize)> {
    let (_, _, c, d) = station.mode_names();
    Ok((layout.mode_index(c)?, layout.mode_index(d)?))
}

/// `<state| R-style(station 1) R-style(station 2) |state>` where each factor
/// is the chosen rate target behind that station's measurement beamsplitter.
pub fn rate_product(
    state: &FockVector,
    s1: &Setting,
    s2: &Setting,
    t1: RateTarget,
    t2: RateTarget,
) -> Result<f64> {
    let staged = apply_measurement_stage(state, Station::One, s1)?;
    let staged = apply_measurement_stage(&staged, Station::Two, s2)?;
    let (c1, d1) = staged_station_indices(&staged.layout, Station::One)?;
    let (c2, d2) = staged_station_indices(&staged.layout, Station::Two)?;
    Ok(staged.expect_diag(|occ| {
        rate_eigenvalue(t1, occ[c1], occ[d1]) * rate_eigenvalue(t2, occ[c2], occ[d2])
    }))
}

/// Single-station rate expectation behind that station's beamsplitter.
pub fn rate_single(
    state: &FockVector,
    station: Station,
    setting: &Setting,
    target: RateTarget,
) -> Result<f64> {
    let staged = apply_measurement_stage(state, station, setting)?;
    let (c, d) = staged_station_indices(&staged.layout, station)?;
    Ok(staged.expect_diag(|occ| rate_eigenvalue(target, occ[c], occ[d])))
}

/// `<state| dn_1(s1) dn_2(s2) |state>` with `dn_j = n_{c_j} - n_{d_j}`.
pub fn intensity_difference_product(
    state: &FockVector,
    s1: &Setting,
    s2: &Setting,
) -> Result<f64> {
    let staged = apply_measurement_stage(state, Station::One, s1)?;
    let staged = apply_measurement_stage(&staged, Station::Two, s2)?;
    let (c1, d1) = staged_station_indices(&staged.layout, Station::One)?;
    let (c2, d2) = staged_station_indices(&staged.layout, Station::Two)?;
    Ok(staged.expect_diag(|occ| {
        (occ[c1] as f64 - occ[d1] as f64) * (occ[c2] as f64 - occ[d2] as f64)
    }))
}

/// `<state| n_tot1 n_tot2 |state>`; setting-independent by the total-number
/// operator identity, so it is read off the unpropagated register.
pub fn total_intensity_product(state: &FockVector) -> Result<f64> {
    let a1 = state.layout.mode_index("a1")?;
    let b1 = state.layout.mode_index("b1")?;
    let b2 = state.layout.mode_index("b2")?;
    let a2 = state.layout.mode_index("a2")?;
    Ok(state.expect_diag(|occ| {
        ((occ[a1] + occ[b1]) as f64) * ((occ[a2] + occ[b2]) as f64)
    }))
}

/// `<state| Pi_1 Pi_2 |state>`, the joint no-vacuum probability. The
/// projectors are invariant under the local beamsplitters, so no propagation
/// is needed.
pub fn no_vacuum_product(state: &FockVector) -> Result<f64> {
    let a1 = state.layout.mode_index("a1")?;
    let b1 = state.layout.mode_index("b1")?;
    let b2 = state.layout.mode_index("b2")?;
    let a2 = state.layout.mode_index("a2")?;
    Ok(state.expect_diag(|occ| {
        let p1 = occ[a1] + occ[b1] > 0;
        let p2 = occ[a2] + occ[b2] > 0;
        if p1 && p2 {
            1.0
        } else {
            0.0
        }
    }))
}

/// A correlator evaluation: the value at the requested phases plus the
/// amplitude of its sinusoidal dependence on `theta1 - theta2`, fitted by
/// least squares over a [`SIN_FIT_POINTS`]-point uniform difference grid.
#[derive(Debug, Clone)]
pub struct CorrelatorValue {
    pub value: f64,
    pub amplitude: f64,
    pub fit_residual: f64,
    pub alpha: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub cutoff: usize,
}

/// Uniform midpoint grid of `n` theta differences covering `(-pi, pi)`.
pub fn theta_difference_grid(n: usize) -> Vec<f64> {
    let step = 2.0 * std::f64::consts::PI / n as f64;
    (0..n)
        .map(|k| -std::f64::consts::PI + (k as f64 + 0.5) * step)
        .collect()
}

/// Least-squares amplitude of `value = A sin(delta)` over `(delta, value)`
/// samples, with the maximal pointwise residual.
pub fn fit_sin_amplitude(samples: &[(f64, f64)]) -> (f64, f64) {
    let num: f64 = samples.iter().map(|(d, v)| v * d.sin()).sum();
    let den: f64 = samples.iter().map(|(d, _)| d.sin().powi(2)).sum();
    let amplitude = num / den;
    let residual = samples
        .iter()
        .map(|(d, v)| (v - amplitude * d.sin()).abs())
        .fold(0.0f64, f64::max);
    (amplitude, residual)
}

fn check_cutoff(alpha: f64, cutoff: usize) -> Result<()> {
    let required = min_cutoff(alpha);
    if cutoff < required {
        return Err(Error::CutoffTooSmall { alpha, given: cutoff, required });
    }
    Ok(())
}

/// Rate correlation function `E_R(theta1, theta2)` of the joint homodyne
/// measurement on the equal-amplitude interferometer state: expectation of
/// the product of the two photocurrent-difference rates behind balanced
/// beamsplitters.
pub fn rate_correlator_er(
    alpha: f64,
    theta1: f64,
    theta2: f64,
    cutoff: usize,
) -> Result<CorrelatorValue> {
    check_cutoff(alpha, cutoff)?;
    let state = prepare_state(&InitialStateParams::single_photon(alpha), cutoff)?;
    let eval = |t1: f64, t2: f64| -> Result<f64> {
        rate_product(
            &state,
            &Setting::new(std::f64::consts::FRAC_PI_4, alpha, t1),
            &Setting::new(std::f64::consts::FRAC_PI_4, alpha, t2),
            RateTarget::Difference,
            RateTarget::Difference,
        )
    };
    let value = eval(theta1, theta2)?;
    let mut samples = Vec::with_capacity(SIN_FIT_POINTS);
    for delta in theta_difference_grid(SIN_FIT_POINTS) {
        samples.push((delta, eval(delta, 0.0)?));
    }
    let (amplitude, fit_residual) = fit_sin_amplitude(&samples);
    Ok(CorrelatorValue { value, amplitude, fit_residual, alpha, theta1, theta2, cutoff })
}

/// Intensity correlation function `E_T(theta1, theta2)`: the ratio of the
/// photocurrent-difference product to the total-intensity product on the
/// same state.
pub fn intensity_correlator_et(
    alpha: f64,
    theta1: f64,
    theta2: f64,
    cutoff: usize,
) -> Result<CorrelatorValue> {
    check_cutoff(alpha, cutoff)?;
    let state = prepare_state(&InitialStateParams::single_photon(alpha), cutoff)?;
    let den = total_intensity_product(&state)?;
    if den < 1e-14 {
        return Err(Error::ZeroDenominator);
    }
    let eval = |t1: f64, t2: f64| -> Result<f64> {
        Ok(intensity_difference_product(
            &state,
            &Setting::new(std::f64::consts::FRAC_PI_4, alpha, t1),
            &Setting::new(std::f64::consts::FRAC_PI_4, alpha, t2),
        )? / den)
    };
    let value = eval(theta1, theta2)?;
    let mut samples = Vec::with_capacity(SIN_FIT_POINTS);
    for delta in theta_difference_grid(SIN_FIT_POINTS) {
        samples.push((delta, eval(delta, 0.0)?));
    }
    let (amplitude, fit_residual) = fit_sin_amplitude(&samples);
    Ok(CorrelatorValue { value, amplitude, fit_residual, alpha, theta1, theta2, cutoff })
}

/// Closed-form amplitude of `E_R`: `e^{-2a^2}(e^{a^2}-1)^2 / a^2`, i.e.
/// `(1 - e^{-a^2})^2 / a^2`, with the removable singularity at 0 resolved to
/// its limit value 0.
pub fn amplitude_ar(alpha: f64) -> f64 {
    let x = alpha * alpha;
    if x == 0.0 {
        return 0.0;
    }
    let t = -(-x).exp_m1();
    t * t / x
}

/// Closed-form amplitude of `E_T`: `1 / (1 + a^2)`.
pub fn amplitude_at(alpha: f64) -> f64 {
    1.0 / (1.0 + alpha * alpha)
}

/// Closed-form amplitude of the rate-based entanglement-witness correlator:
/// `(1 - e^{-a^2}) / a^2`, limit 1 at 0.
pub fn amplitude_arew(alpha: f64) -> f64 {
    let x = alpha * alpha;
    if x == 0.0 {
        return 1.0;
    }
    -(-x).exp_m1() / x
}

/// Closed-form amplitude of the phase-averaged classical approximation:
/// `a^2 e^{-2a^2} / (1 + a^2)`.
pub fn amplitude_arc(alpha: f64) -> f64 {
    let x = alpha * alpha;
    x * (-2.0 * x).exp() / (1.0 + x)
}

/// The c-number approximation of the rate correlator: the auxiliary beams
/// are replaced by their amplitudes, leaving the single-mode observable
/// `(a^2 + n)^{-1/2} [a (e^{i th} b^dag + e^{-i th} b)] (a^2 + n)^{-1/2}`
/// per side, evaluated on the bare photon-pair superposition. Reproduces
/// `A_T(alpha) sin(theta1 - theta2)`.
pub fn classical_approx_correlator(
    alpha: f64,
    theta1: f64,
    theta2: f64,
    cutoff: usize,
) -> Result<CorrelatorValue> {
    check_cutoff(alpha, cutoff)?;
    let pair = photon_pair_state(C64::default(), C64::new(1.0, 0.0), cutoff)?;

    let side_matrix = |theta: f64| -> Array2<C64> {
        let d = cutoff + 1;
        let mut m = Array2::zeros((d, d));
        // operator inverse (a^2 + n)^{-1/2} is diagonal, computed entrywise;
        // the n = 0 entry at alpha = 0 follows the zero-intensity convention
        let dinv = |n: usize| {
            let v = alpha * alpha + n as f64;
            if v > 0.0 {
                1.0 / v.sqrt()
            } else {
                0.0
            }
        };
        for n in 1..d {
            let coupling = alpha * (n as f64).sqrt();
            m[(n, n - 1)] = C64::from_polar(coupling * dinv(n) * dinv(n - 1), theta);
            m[(n - 1, n)] = C64::from_polar(coupling * dinv(n) * dinv(n - 1), -theta);
        }
        m
    };

    let eval = |t1: f64, t2: f64| -> Result<f64> {
        let s = pair.apply_two_mode("b1", "b2", &kron_pair(&side_matrix(t1), &side_matrix(t2)))?;
        Ok(pair.inner(&s)?.re)
    };
    let value = eval(theta1, theta2)?;
    let mut samples = Vec::with_capacity(SIN_FIT_POINTS);
    for delta in theta_difference_grid(SIN_FIT_POINTS) {
        samples.push((delta, eval(delta, 0.0)?));
    }
    let (amplitude, fit_residual) = fit_sin_amplitude(&samples);
    Ok(CorrelatorValue { value, amplitude, fit_residual, alpha, theta1, theta2, cutoff })
}

fn kron_pair(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    ndarray::linalg::kron(a, b)
}

/// Phase density of a weak coherent beam around its mean phase:
/// `(1 + 2 a e^{-a^2} cos(dtheta)) / (2 pi)`. `valid` reports whether the
/// expression is non-negative for every angle (it is, for all real
/// `a >= 0`, since `a e^{-a^2} <= 0.429`; the flag guards the formula's
/// small-amplitude provenance anyway).
#[derive(Debug, Clone, Copy)]
pub struct PhaseDensity {
    pub value: f64,
    pub valid: bool,
}

pub fn pegg_barnett_density(alpha: f64, dtheta: f64) -> PhaseDensity {
    let peak = 2.0 * alpha * (-alpha * alpha).exp();
    PhaseDensity {
        value: (1.0 + peak * dtheta.cos()) / (2.0 * std::f64::consts::PI),
        valid: peak <= 1.0,
    }
}

/// Closed-form amplitude after phase-averaging the c-number approximation;
/// equals [`amplitude_arc`].
pub fn phase_averaged_amplitude(alpha: f64) -> f64 {
    amplitude_arc(alpha)
}

/// Phase-averaged amplitude by direct tensor-product trapezoid quadrature of
/// `A_T(a) * P(x) P(y) sin(pi/2 + x - y)` over `[-pi, pi]^2` with `n` points
/// per axis. Smooth periodic integrand, so the rule is spectrally accurate.
pub fn phase_averaged_amplitude_quadrature(alpha: f64, n: usize) -> f64 {
    let pi = std::f64::consts::PI;
    let h = 2.0 * pi / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|k| -pi + k as f64 * h).collect();
    let weight = |k: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
    let density: Vec<f64> = grid.iter().map(|&x| pegg_barnett_density(alpha, x).value).collect();
    let mut integral = 0.0;
    for (i, &x) in grid.iter().enumerate() {
        let mut row = 0.0;
        for (j, &y) in grid.iter().enumerate() {
            row += weight(j) * density[j] * (std::f64::consts::FRAC_PI_2 + x - y).sin();
        }
        integral += weight(i) * density[i] * row;
    }
    amplitude_at(alpha) * integral * h * h
}
