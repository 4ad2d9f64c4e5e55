//! Mode-entanglement witnesses built from CHSH-type Bell operators, for
//! plain intensities and for intensity rates, plus random separable states
//! to validate the separability bounds.
//!
//! Each witness combines four correlation terms taken at fully complementary
//! local settings: Alice's pair is `(theta1, theta1 + pi/2)`, Bob's pair is
//! `(theta2, theta2 - pi/2)`. A non-negative expectation is guaranteed for
//! every separable state; a negative value certifies mode entanglement. The
//! opposite orientations of the two complementary offsets matter: with both
//! offsets equal the four-term combination cancels identically on states
//! whose correlations are sinusoidal in the phase difference, which is
//! exactly the family under study.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fock::{min_cutoff, C64, FockVector, ModeLayout};
use crate::observables::{
    amplitude_arew, amplitude_at, intensity_difference_product, no_vacuum_product, rate_product,
    total_intensity_product, RateTarget,
};
use crate::optics::{prepare_state, InitialStateParams, Setting};

/// A witness value below `-DETECTION_TOLERANCE` counts as detection.
pub const DETECTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    /// Correlators of photocurrent differences, normalized by nothing;
    /// separability bound `sqrt(2) <n_tot1 n_tot2>`.
    Intensities,
    /// Correlators of rate differences; separability bound
    /// `sqrt(2) <Pi_1 Pi_2>`.
    Rates,
}

/// One witness evaluation.
#[derive(Debug, Clone)]
pub struct WitnessReport {
    pub kind: WitnessKind,
    pub alpha: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// The unnormalized expectation as written; negative means entanglement.
    pub witness_value: f64,
    /// `<n_tot1 n_tot2>` or `<Pi_1 Pi_2>`, the positive normalization.
    pub normalization: f64,
    /// Closed-form amplitude of the underlying correlator; detection at
    /// optimal phases happens exactly when it exceeds 1/2.
    pub amplitude: f64,
    pub detects_entanglement: bool,
    pub cutoff: usize,
}

fn balanced(theta: f64) -> Setting {
    Setting::new(FRAC_PI_4, 0.0, theta)
}

/// Witness expectation on an arbitrary four-mode register state
/// (`a1, b1, b2, a2`).
pub fn witness_value_on(
    kind: WitnessKind,
    state: &FockVector,
    theta1: f64,
    theta2: f64,
) -> Result<f64> {
    let term = |t1: f64, t2: f64| -> Result<f64> {
        match kind {
            WitnessKind::Intensities => {
                intensity_difference_product(state, &balanced(t1), &balanced(t2))
            }
            WitnessKind::Rates => rate_product(
                state,
                &balanced(t1),
                &balanced(t2),
                RateTarget::Difference,
                RateTarget::Difference,
            ),
        }
    };
    let bracket = term(theta1, theta2)? + term(theta1, theta2 - FRAC_PI_2)?
        + term(theta1 + FRAC_PI_2, theta2)?
        - term(theta1 + FRAC_PI_2, theta2 - FRAC_PI_2)?;
    let normalization = match kind {
        WitnessKind::Intensities => total_intensity_product(state)?,
        WitnessKind::Rates => no_vacuum_product(state)?,
    };
    Ok(SQRT_2 * normalization - bracket)
}

fn witness_report(
    kind: WitnessKind,
    alpha: f64,
    theta1: f64,
    theta2: f64,
    cutoff: usize,
) -> Result<WitnessReport> {
    let required = min_cutoff(alpha);
    let cutoff = if cutoff == 0 { required } else { cutoff };
    if cutoff < required {
        return Err(Error::CutoffTooSmall { alpha, given: cutoff, required });
    }
    let state = prepare_state(&InitialStateParams::single_photon(alpha), cutoff)?;
    let witness_value = witness_value_on(kind, &state, theta1, theta2)?;
    let normalization = match kind {
        WitnessKind::Intensities => total_intensity_product(&state)?,
        WitnessKind::Rates => no_vacuum_product(&state)?,
    };
    let amplitude = match kind {
        WitnessKind::Intensities => amplitude_at(alpha),
        WitnessKind::Rates => amplitude_arew(alpha),
    };
    Ok(WitnessReport {
        kind,
        alpha,
        theta1,
        theta2,
        witness_value,
        normalization,
        amplitude,
        detects_entanglement: witness_value < -DETECTION_TOLERANCE,
        cutoff,
    })
}

/// Intensity-based witness on the interferometer state; detects mode
/// entanglement for `alpha^2 < 1`.
pub fn witness_intensities(
    alpha: f64,
    theta1: f64,
    theta2: f64,
    cutoff: usize,
) -> Result<WitnessReport> {
    witness_report(WitnessKind::Intensities, alpha, theta1, theta2, cutoff)
}

/// Rate-based witness; detects mode entanglement for `alpha^2 < ~1.594`, a
/// strictly wider range than the intensity version.
pub fn witness_rates(alpha: f64, theta1: f64, theta2: f64, cutoff: usize) -> Result<WitnessReport> {
    witness_report(WitnessKind::Rates, alpha, theta1, theta2, cutoff)
}

/// Phases maximizing the witness bracket (`theta1 - theta2 = pi/4`).
pub fn witness_optimal_phases() -> (f64, f64) {
    (FRAC_PI_4, 0.0)
}

/// The detection threshold in `alpha^2`: the root of `A(alpha) = 1/2` found
/// by bisection of the closed-form amplitude.
pub fn detection_threshold_alpha_sq(kind: WitnessKind) -> f64 {
    let amp = |x: f64| match kind {
        WitnessKind::Intensities => amplitude_at(x.sqrt()),
        WitnessKind::Rates => amplitude_arew(x.sqrt()),
    };
    let (mut lo, mut hi) = (1e-6, 16.0);
    debug_assert!(amp(lo) > 0.5 && amp(hi) < 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if amp(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A pure "product" state of the two stations: each local factor is a random
/// polynomial in the station's two creation operators applied to vacuum,
/// with complex-Gaussian coefficients of total degree up to `degree`.
/// A degenerate (zero-norm) draw is retried with an incremented sub-seed.
pub fn random_separable_state(
    layout: &ModeLayout,
    seed: u64,
    degree: usize,
) -> Result<FockVector> {
    let names: Vec<&str> = layout.modes().iter().map(|m| m.name.as_str()).collect();
    if names != ["a1", "b1", "b2", "a2"] {
        return Err(Error::LayoutMismatch(
            "separable sampling expects the standard register a1, b1, b2, a2".into(),
        ));
    }
    let cutoff = layout.modes()[0].cutoff;
    if layout.modes().iter().any(|m| m.cutoff != cutoff) {
        return Err(Error::LayoutMismatch("uniform cutoff required".into()));
    }
    if degree > cutoff {
        return Err(Error::CutoffTooSmall { alpha: f64::NAN, given: cutoff, required: degree });
    }

    let mut sub_seed = seed;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
        let factor_1 = random_local_factor(&mut rng, "a1", "b1", cutoff, degree, false);
        let factor_2 = random_local_factor(&mut rng, "b2", "a2", cutoff, degree, true);
        let (norm_1, norm_2) = (factor_1.norm_sqr(), factor_2.norm_sqr());
        if norm_1 < 1e-12 || norm_2 < 1e-12 {
            sub_seed = sub_seed.wrapping_add(1);
            continue;
        }
        return factor_1.normalized().tensor(&factor_2.normalized());
    }
}

/// Local polynomial factor on a mode pair. `swapped` builds the factor with
/// the second layout mode as the polynomial's first argument (station 2 is
/// laid out as `b2, a2` while its operators are `a2, b2`).
fn random_local_factor(
    rng: &mut ChaCha8Rng,
    first: &str,
    second: &str,
    cutoff: usize,
    degree: usize,
    swapped: bool,
) -> FockVector {
    let layout = ModeLayout::new([(first, cutoff), (second, cutoff)]).unwrap();
    let mut fact = vec![1.0f64; cutoff + 1];
    for n in 1..=cutoff {
        fact[n] = fact[n - 1] * n as f64;
    }
    let mut state = FockVector::zero(layout.clone());
    for j in 0..=degree {
        for k in 0..=(degree - j) {
            let g = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            // (x^dag)^j (y^dag)^k |00> = sqrt(j! k!) |j k>
            let amp = g * (fact[j] * fact[k]).sqrt();
            let occ = if swapped { [k, j] } else { [j, k] };
            state.amplitudes[layout.index_of(&occ)] += amp;
        }
    }
    state
}

/// Deterministic random Hermitian matrix on a `d x d` space.
fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> Array2<C64> {
    let mut g: Array2<C64> = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            g[(i, j)] = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    let dag = g.t().mapv(|c| c.conj());
    (&g + &dag).mapv(|c| c * C64::new(0.5, 0.0))
}

/// Largest deviation `|<O1 O2> - <O1><O2>|` over a few random pairs of local
/// Hermitian observables; vanishes on product states of the two stations.
pub fn factorization_defect(state: &FockVector, seed: u64, draws: usize) -> Result<f64> {
    let cutoff = state.layout.modes()[0].cutoff;
    let d = (cutoff + 1) * (cutoff + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let o1 = random_hermitian(&mut rng, d);
        let o2 = random_hermitian(&mut rng, d);
        let s1 = state.apply_two_mode("a1", "b1", &o1)?;
        let s2 = state.apply_two_mode("b2", "a2", &o2)?;
        let joint = s1.apply_two_mode("b2", "a2", &o2)?;
        let e_joint = state.inner(&joint)?.re;
        let e1 = state.inner(&s1)?.re;
        let e2 = state.inner(&s2)?.re;
        worst = worst.max((e_joint - e1 * e2).abs());
    }
    Ok(worst)
}
