//! Effective single-mode POVM operators: the auxiliary coherent beam, the
//! local beamsplitter and the detection of a rate observable together act on
//! the signal mode alone, as `M = <alpha| O(chi, theta) |alpha>` with the
//! sandwich taken over the oscillator mode.
//!
//! Two constructions are implemented and cross-checked: the explicit series
//!
//! ```text
//! homodyne difference:
//!   M(a,th) = e^{-a^2} sum_n a^{2n+1}/n! sum_{m>=1} sqrt(m)/(n+m)
//!             (e^{i th} |m><m-1| + e^{-i th} |m-1><m|)
//!
//! reflected-detector rate:
//!   M(v) = e^{-a^2} [ cos^2(chi) (I - |0><0|)
//!          + sum_{n>=1} a^{2n}/n! (n sin^2(chi) + m cos^2(chi))/(n + m)
//!          - (1/2) sin(2 chi) * (homodyne series) ]
//! ```
//!
//! and the mechanical route: propagate the two-mode observable through the
//! beamsplitter and contract with truncated coherent amplitudes. The series
//! is easy to mistype; their agreement is this module's core test.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fock::{coherent_state, coherent_tail, min_cutoff, C64, FockOperator, ModeLayout};
use crate::inequalities::{ch_correlator_k_fock, ch_local_s_fock};
use crate::linalg::hermitian_eigenvalues;
use crate::observables::{rate_eigenvalue, rate_product, theta_difference_grid, RateTarget};
use crate::optics::{
    beamsplitter_unitary, photon_pair_state, prepare_state, InitialStateParams, Setting, Station,
};

/// Which measurement the element represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PovmKind {
    /// Photocurrent-difference rate behind a balanced splitter.
    HomodyneDifference,
    /// Reflected-detector rate behind an arbitrary splitter.
    RateD,
}

/// Effective single-mode operator with its series-truncation metadata.
#[derive(Debug, Clone)]
pub struct PovmElement {
    pub kind: PovmKind,
    pub setting: Setting,
    /// Dense single-mode operator on occupations `0..=cutoff`.
    pub operator: FockOperator,
    /// Oscillator-sum truncation index.
    pub n_max: usize,
    /// Signal occupations kept (the mode cutoff).
    pub m_max: usize,
    /// Bound on the weight of the discarded oscillator terms.
    pub tail_bound: f64,
}

impl PovmElement {
    pub fn matrix(&self) -> &Array2<C64> {
        &self.operator.matrix
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.operator.hermiticity_defect()
    }

    /// `(min, max)` of the spectrum.
    pub fn spectral_range(&self) -> (f64, f64) {
        let ev = hermitian_eigenvalues(&self.operator.matrix);
        (ev[0], *ev.last().unwrap())
    }
}

fn check_cutoff(alpha: f64, cutoff: usize) -> Result<usize> {
    let required = min_cutoff(alpha);
    if cutoff == 0 {
        Ok(required)
    } else if cutoff < required {
        Err(Error::CutoffTooSmall { alpha, given: cutoff, required })
    } else {
        Ok(cutoff)
    }
}

/// Off-diagonal band coefficients of the homodyne series:
/// `band[m] = e^{-a^2} sum_{n<=n_max} a^{2n+1}/n! sqrt(m)/(n+m)` for the
/// `|m><m-1|` element.
fn homodyne_band(alpha: f64, n_max: usize, m_max: usize) -> Vec<f64> {
    let x = alpha * alpha;
    let scale = (-x).exp();
    let mut band = vec![0.0; m_max + 1];
    for m in 1..=m_max {
        let mut weight = alpha; // a^{2n+1}/n! at n = 0
        let mut sum = 0.0;
        for n in 0..=n_max {
            sum += weight * (m as f64).sqrt() / (n + m) as f64;
            weight *= x / (n + 1) as f64;
        }
        band[m] = scale * sum;
    }
    band
}

fn place_band(matrix: &mut Array2<C64>, band: &[f64], theta: f64, factor: f64) {
    for (m, &b) in band.iter().enumerate().skip(1) {
        matrix[(m, m - 1)] += C64::from_polar(factor * b, theta);
        matrix[(m - 1, m)] += C64::from_polar(factor * b, -theta);
    }
}

/// Homodyne-difference element for a balanced splitter with oscillator
/// amplitude `alpha` and phase `theta`.
pub fn povm_homodyne(alpha: f64, theta: f64, cutoff: usize) -> Result<PovmElement> {
    let cutoff = check_cutoff(alpha, cutoff)?;
    let n_max = min_cutoff(alpha);
    let d = cutoff + 1;
    let mut matrix = Array2::zeros((d, d));
    place_band(&mut matrix, &homodyne_band(alpha, n_max, cutoff), theta, 1.0);
    let layout = ModeLayout::single("b", cutoff)?;
    Ok(PovmElement {
        kind: PovmKind::HomodyneDifference,
        setting: Setting::new(std::f64::consts::FRAC_PI_4, alpha, theta),
        operator: FockOperator::new(layout, matrix)?.flagged(true, false),
        n_max,
        m_max: cutoff,
        tail_bound: alpha * coherent_tail(alpha, n_max),
    })
}

/// Reflected-detector rate element for an arbitrary setting.
pub fn povm_rate(setting: &Setting, cutoff: usize) -> Result<PovmElement> {
    let alpha = setting.alpha;
    let cutoff = check_cutoff(alpha, cutoff)?;
    let n_max = min_cutoff(alpha);
    let x = alpha * alpha;
    let scale = (-x).exp();
    let (sin_chi, cos_chi) = setting.chi.sin_cos();
    let (s2, c2) = (sin_chi * sin_chi, cos_chi * cos_chi);
    let d = cutoff + 1;
    let mut matrix = Array2::zeros((d, d));
    for m in 0..=d - 1 {
        let mut diag = if m > 0 { c2 } else { 0.0 };
        let mut weight = x; // a^{2n}/n! at n = 1
        for n in 1..=n_max {
            diag += weight * (n as f64 * s2 + m as f64 * c2) / (n + m) as f64;
            weight *= x / (n + 1) as f64;
        }
        matrix[(m, m)] = C64::new(scale * diag, 0.0);
    }
    place_band(
        &mut matrix,
        &homodyne_band(alpha, n_max, cutoff),
        setting.theta,
        -0.5 * (2.0 * setting.chi).sin(),
    );
    let layout = ModeLayout::single("b", cutoff)?;
    Ok(PovmElement {
        kind: PovmKind::RateD,
        setting: *setting,
        operator: FockOperator::new(layout, matrix)?.flagged(true, false),
        n_max,
        m_max: cutoff,
        tail_bound: (1.0 + alpha) * coherent_tail(alpha, n_max),
    })
}

/// The rate observable (or homodyne difference) in the beamsplitter's input
/// representation: `U^dag D U` on the two-mode `(a, b)` layout, with `D`
/// diagonal in the output occupations.
pub fn observable_in_input_representation(
    kind: PovmKind,
    setting: &Setting,
    cutoff: usize,
) -> Result<FockOperator> {
    let layout = ModeLayout::new([("a", cutoff), ("b", cutoff)])?;
    let params = match kind {
        PovmKind::HomodyneDifference => {
            crate::optics::BeamsplitterParams::balanced(setting.theta)
        }
        PovmKind::RateD => setting.beamsplitter(),
    };
    let u = beamsplitter_unitary(&layout, "a", "b", &params)?;
    let diag: Vec<f64> = (0..layout.dim())
        .map(|i| {
            let occ = layout.occupations_of(i);
            match kind {
                PovmKind::HomodyneDifference => {
                    rate_eigenvalue(RateTarget::Difference, occ[0], occ[1])
                }
                PovmKind::RateD => rate_eigenvalue(RateTarget::D, occ[0], occ[1]),
            }
        })
        .collect();
    let d = FockOperator::from_diagonal(layout, &diag)?;
    u.dagger().compose(&d)?.compose(&u)
}

/// Independent construction path: contract the propagated two-mode
/// observable with truncated coherent amplitudes over the oscillator mode.
pub fn coherent_sandwich(kind: PovmKind, setting: &Setting, cutoff: usize) -> Result<Array2<C64>> {
    let cutoff = check_cutoff(setting.alpha, cutoff)?;
    let observable = observable_in_input_representation(kind, setting, cutoff)?;
    let osc = coherent_state("a", setting.alpha, cutoff)?;
    let d = cutoff + 1;
    let mut out = Array2::zeros((d, d));
    for mp in 0..d {
        for m in 0..d {
            let mut acc = C64::default();
            for np in 0..d {
                let cn_p = osc.amplitudes[np].conj();
                if cn_p == C64::default() {
                    continue;
                }
                for n in 0..d {
                    acc += cn_p * osc.amplitudes[n] * observable.matrix[(np * d + mp, n * d + m)];
                }
            }
            out[(mp, m)] = acc;
        }
    }
    Ok(out)
}

/// `<psi| M1 (x) M2 |psi>` on the single-photon pair superposition.
pub fn povm_pair_expectation(m1: &PovmElement, m2: &PovmElement) -> Result<f64> {
    let cutoff = m1.m_max;
    if m2.m_max != cutoff {
        return Err(Error::UnequalCutoffs(cutoff, m2.m_max));
    }
    let pair = photon_pair_state(C64::default(), C64::new(1.0, 0.0), cutoff)?;
    let joint = ndarray::linalg::kron(m1.matrix(), m2.matrix());
    let applied = pair.apply_two_mode("b1", "b2", &joint)?;
    Ok(pair.inner(&applied)?.re)
}

/// `<psi| M (x) I |psi>`.
pub fn povm_local_expectation(m: &PovmElement, station: Station) -> Result<f64> {
    let cutoff = m.m_max;
    let pair = photon_pair_state(C64::default(), C64::new(1.0, 0.0), cutoff)?;
    let eye = Array2::eye(cutoff + 1);
    let joint = match station {
        Station::One => ndarray::linalg::kron(m.matrix(), &eye),
        Station::Two => ndarray::linalg::kron(&eye, m.matrix()),
    };
    let applied = pair.apply_two_mode("b1", "b2", &joint)?;
    Ok(pair.inner(&applied)?.re)
}

/// What to compare in an equivalence check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquivalenceScenario {
    /// Homodyne-difference correlator at fixed `alpha`, phases swept over the
    /// standard difference grid.
    Homodyne { alpha: f64 },
    /// Rate correlator and local averages at two settings, the first phase
    /// swept over the grid.
    Rate { v1: Setting, v2: Setting },
}

/// Result of comparing the full four-mode expectations against the
/// single-mode POVM route.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub scenario: EquivalenceScenario,
    pub max_abs_deviation: f64,
    pub points: usize,
    pub cutoff: usize,
}

/// Sweep a 24-point phase grid and report the worst absolute deviation
/// between the four-mode and the POVM evaluation.
pub fn verify_povm_equivalence(
    scenario: EquivalenceScenario,
    cutoff: usize,
) -> Result<EquivalenceReport> {
    let grid = theta_difference_grid(crate::observables::SIN_FIT_POINTS);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    let used_cutoff;
    match scenario {
        EquivalenceScenario::Homodyne { alpha } => {
            used_cutoff = check_cutoff(alpha, cutoff)?;
            let state = prepare_state(&InitialStateParams::single_photon(alpha), used_cutoff)?;
            let m2 = povm_homodyne(alpha, 0.0, used_cutoff)?;
            for &delta in &grid {
                let full = rate_product(
                    &state,
                    &Setting::new(std::f64::consts::FRAC_PI_4, alpha, delta),
                    &Setting::new(std::f64::consts::FRAC_PI_4, alpha, 0.0),
                    RateTarget::Difference,
                    RateTarget::Difference,
                )?;
                let m1 = povm_homodyne(alpha, delta, used_cutoff)?;
                let reduced = povm_pair_expectation(&m1, &m2)?;
                worst = worst.max((full - reduced).abs());
                points += 1;
            }
        }
        EquivalenceScenario::Rate { v1, v2 } => {
            used_cutoff = check_cutoff(v1.alpha.max(v2.alpha), cutoff)?;
            let m2 = povm_rate(&v2, used_cutoff)?;
            for &delta in &grid {
                let v1_shift = Setting::new(v1.chi, v1.alpha, v1.theta + delta);
                let full = ch_correlator_k_fock(&v1_shift, &v2, 0.0, used_cutoff)?;
                let m1 = povm_rate(&v1_shift, used_cutoff)?;
                let reduced = povm_pair_expectation(&m1, &m2)?;
                worst = worst.max((full - reduced).abs());
                points += 1;
            }
            // local averages, theta-independent
            let s1_full = ch_local_s_fock(&v1, Station::One, 0.0, used_cutoff)?;
            let s1_povm = povm_local_expectation(&povm_rate(&v1, used_cutoff)?, Station::One)?;
            worst = worst.max((s1_full - s1_povm).abs());
            let s2_full = ch_local_s_fock(&v2, Station::Two, 0.0, used_cutoff)?;
            let s2_povm = povm_local_expectation(&m2, Station::Two)?;
            worst = worst.max((s2_full - s2_povm).abs());
            points += 2;
        }
    }
    Ok(EquivalenceReport { scenario, max_abs_deviation: worst, points, cutoff: used_cutoff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inequalities::{ch_correlator_k_closed, ch_local_s_closed, hardy_reference_settings};
    use crate::observables::amplitude_ar;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn homodyne_element_vanishes_without_oscillator() {
        let m = povm_homodyne(0.0, 1.3, 12).unwrap();
        assert!(m.matrix().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn homodyne_matrix_element_against_partial_sum_oracle() {
        // <1|M(0.5, 0)|0>: partial sums until the tail is at machine level
        let alpha: f64 = 0.5;
        let x = alpha * alpha;
        let mut oracle = 0.0;
        let mut weight = alpha * (-x).exp();
        for n in 0..60 {
            oracle += weight / (n + 1) as f64;
            weight *= x / (n + 1) as f64;
        }
        // the series telescopes to (1 - e^{-a^2})/a
        assert_abs_diff_eq!(oracle, (1.0 - (-x).exp()) / alpha, epsilon = 1e-15);
        assert_abs_diff_eq!(oracle, 0.442_398_320_298_281, epsilon = 1e-12);

        let m = povm_homodyne(alpha, 0.0, 12).unwrap();
        assert_abs_diff_eq!(m.matrix()[(1, 0)].re, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(m.matrix()[(1, 0)].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn homodyne_pair_expectation_reproduces_rate_amplitude() {
        for &alpha in &[0.25, 0.5, 1.0] {
            let cutoff = min_cutoff(alpha);
            for &delta in &[FRAC_PI_2, 0.9, -2.0] {
                let m1 = povm_homodyne(alpha, delta, cutoff).unwrap();
                let m2 = povm_homodyne(alpha, 0.0, cutoff).unwrap();
                let reduced = povm_pair_expectation(&m1, &m2).unwrap();
                assert_abs_diff_eq!(reduced, amplitude_ar(alpha) * delta.sin(), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn rate_element_reduces_to_projector_with_everything_off() {
        let m = povm_rate(&Setting::off(), 10).unwrap();
        for i in 0..=10 {
            for j in 0..=10 {
                let expect = if i == j && i > 0 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(m.matrix()[(i, j)].re, expect, epsilon = 1e-15);
                assert_abs_diff_eq!(m.matrix()[(i, j)].im, 0.0, epsilon = 1e-15);
            }
        }
        // with a nonzero oscillator the identity-splitter element is *not*
        // the bare projector: the oscillator photons dilute the rate
        let m = povm_rate(&Setting::new(0.0, 0.5, 0.0), 12).unwrap();
        assert!(m.matrix()[(1, 1)].re < 1.0 - 1e-3);
        assert_abs_diff_eq!(m.matrix()[(0, 0)].re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rate_element_reproduces_closed_form_correlators() {
        let s = hardy_reference_settings();
        let cutoff = min_cutoff(s.v1p.alpha);
        let m1 = povm_rate(&s.v1p, cutoff).unwrap();
        let m2 = povm_rate(&s.v2p, cutoff).unwrap();
        let k = povm_pair_expectation(&m1, &m2).unwrap();
        assert_abs_diff_eq!(k, ch_correlator_k_closed(&s.v1p, &s.v2p), epsilon = 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..6 {
            let v = Setting::new(
                rng.random_range(0.0..FRAC_PI_2),
                rng.random_range(0.05..1.2),
                rng.random_range(-PI..PI),
            );
            let cutoff = min_cutoff(v.alpha);
            let m = povm_rate(&v, cutoff).unwrap();
            let s_povm = povm_local_expectation(&m, Station::One).unwrap();
            assert_abs_diff_eq!(s_povm, ch_local_s_closed(&v), epsilon = 1e-6);
        }
    }

    #[test]
    fn series_and_sandwich_paths_agree() {
        for (kind, setting) in [
            (PovmKind::HomodyneDifference, Setting::new(FRAC_PI_4, 0.7, 0.9)),
            (PovmKind::RateD, Setting::new(0.5, 0.7, -1.2)),
            (PovmKind::RateD, Setting::new(1.2, 0.3, 0.4)),
        ] {
            let cutoff = min_cutoff(setting.alpha);
            let series = match kind {
                PovmKind::HomodyneDifference => {
                    povm_homodyne(setting.alpha, setting.theta, cutoff).unwrap()
                }
                PovmKind::RateD => povm_rate(&setting, cutoff).unwrap(),
            };
            let sandwich = coherent_sandwich(kind, &setting, cutoff).unwrap();
            // compare away from the top of the truncated space, where the
            // sandwich path feels the beamsplitter truncation
            let keep = cutoff - 2;
            for i in 0..keep {
                for j in 0..keep {
                    let d = (series.matrix()[(i, j)] - sandwich[(i, j)]).norm();
                    assert!(d <= 1e-10, "{kind:?} entry ({i},{j}) differs by {d}");
                }
            }
        }
    }

    #[test]
    fn series_truncation_is_converged() {
        let alpha = 0.8;
        let cutoff = min_cutoff(alpha);
        let m = povm_homodyne(alpha, 0.4, cutoff).unwrap();
        assert!(m.tail_bound <= 1e-12);
        // extending the oscillator sum by 5 terms moves nothing
        let extended = {
            let mut matrix = Array2::zeros((cutoff + 1, cutoff + 1));
            place_band(&mut matrix, &homodyne_band(alpha, m.n_max + 5, cutoff), 0.4, 1.0);
            matrix
        };
        let drift = (&extended - m.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        assert!(drift <= 1e-12, "drift {drift}");
    }

    #[test]
    fn hermiticity_and_spectral_bounds() {
        let homodyne = povm_homodyne(0.9, 1.7, 0).unwrap();
        assert!(homodyne.hermiticity_defect() <= 1e-12);
        let (lo, hi) = homodyne.spectral_range();
        assert!(lo >= -1.0 - 1e-10 && hi <= 1.0 + 1e-10, "spectrum [{lo}, {hi}]");

        let rate = povm_rate(&Setting::new(0.8, 0.9, -0.3), 0).unwrap();
        assert!(rate.hermiticity_defect() <= 1e-12);
        let (lo, hi) = rate.spectral_range();
        assert!(lo >= -1e-10 && hi <= 1.0 + 1e-10, "spectrum [{lo}, {hi}]");
    }

    #[test]
    fn equivalence_reports_stay_below_tolerance() {
        let homodyne = verify_povm_equivalence(
            EquivalenceScenario::Homodyne { alpha: 0.5 },
            0,
        )
        .unwrap();
        assert!(homodyne.max_abs_deviation <= 1e-6, "{}", homodyne.max_abs_deviation);

        let s = hardy_reference_settings();
        let rate = verify_povm_equivalence(
            EquivalenceScenario::Rate { v1: s.v1p, v2: s.v2p },
            0,
        )
        .unwrap();
        assert!(rate.max_abs_deviation <= 1e-6, "{}", rate.max_abs_deviation);
    }

    #[test]
    fn degenerate_alpha_equivalence_is_exact() {
        let report = verify_povm_equivalence(EquivalenceScenario::Homodyne { alpha: 0.0 }, 0)
            .unwrap();
        assert!(report.max_abs_deviation <= 1e-12);
        let report = verify_povm_equivalence(
            EquivalenceScenario::Rate { v1: Setting::off(), v2: Setting::off() },
            0,
        )
        .unwrap();
        assert!(report.max_abs_deviation <= 1e-12);
    }
}
