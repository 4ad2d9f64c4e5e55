//! CHSH and Clauser-Horne inequalities for intensity rates: direct
//! evaluation on the interferometer state, closed-form correlators, violation
//! search over measurement settings, and the amplitude-landscape sweep.
//!
//! Local settings are triples `v = (chi, alpha, theta)`: local beamsplitter
//! angle, auxiliary coherent amplitude and phase. The CH combination used
//! throughout is
//!
//! ```text
//! -1 <= K(v1,v2) + K(v1',v2) + K(v1,v2') - K(v1',v2') - S1(v1) - S2(v2) <= 0
//! ```
//!
//! with `K` the joint and `S` the local expectation of the reflected-detector
//! rate. Because the auxiliary amplitudes are part of the settings, the
//! prepared state is setting-dependent and every Fock-numeric term is
//! evaluated in its own state.

use crate::error::{Error, Result};
use crate::fock::{min_cutoff, C64};
use crate::observables::{
    amplitude_ar, intensity_difference_product, rate_product, rate_single,
    total_intensity_product, RateTarget,
};
use crate::optics::{prepare_state, InitialStateParams, Station};
use crate::optim::{multi_start, BoxBounds, OptimizerConfig, SearchOutcome, StartRecord};

pub use crate::optics::Setting;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A value is declared violating only when it exceeds a bound by more than
/// this tolerance.
pub const VIOLATION_TOLERANCE: f64 = 1e-9;

/// Classical interval of the CH combination.
pub const CH_BOUNDS: (f64, f64) = (-1.0, 0.0);

/// Classical bound of the CHSH combinations.
pub const CHSH_BOUND: f64 = 2.0;

/// Amplitudes below this (squared) switch the closed forms to their
/// analytic limits; the removable singularities cancel catastrophically in
/// floating point otherwise.
const LIMIT_EPS: f64 = 1e-8;

/// `(e^x - 1)/x` with its limit value 1 at 0.
fn f_ratio(x: f64) -> f64 {
    if x < LIMIT_EPS {
        1.0 + x / 2.0
    } else {
        x.exp_m1() / x
    }
}

/// `(1 + e^x (x - 1))/x` with its limit value 0 at 0.
fn f_defect(x: f64) -> f64 {
    if x < LIMIT_EPS {
        x / 2.0
    } else {
        1.0 - f_ratio(x) * (1.0 - x)
    }
}

/// The four settings of one CH evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChSettings {
    pub v1: Setting,
    pub v1p: Setting,
    pub v2: Setting,
    pub v2p: Setting,
}

impl ChSettings {
    pub fn new(v1: Setting, v1p: Setting, v2: Setting, v2p: Setting) -> Self {
        Self { v1, v1p, v2, v2p }
    }

    /// Largest auxiliary amplitude over the four settings.
    pub fn max_alpha(&self) -> f64 {
        [self.v1, self.v1p, self.v2, self.v2p]
            .iter()
            .map(|v| v.alpha.abs())
            .fold(0.0, f64::max)
    }
}

/// The near-optimal violation settings: first setting of each observer has
/// the auxiliary field off, the primed settings use transmissivity
/// `cos^2(3 pi / 20) ~ 0.79` and mean photon number 1/2.
pub fn hardy_reference_settings() -> ChSettings {
    let chi = 3.0 * std::f64::consts::PI / 20.0;
    let alpha = std::f64::consts::FRAC_1_SQRT_2;
    ChSettings::new(
        Setting::off(),
        Setting::new(chi, alpha, 0.0),
        Setting::off(),
        Setting::new(chi, alpha, -std::f64::consts::FRAC_PI_2),
    )
}

/// Closed-form joint correlator `K(v1, v2) = <R_d1(v1) R_d2(v2)>`.
pub fn ch_correlator_k_closed(v1: &Setting, v2: &Setting) -> f64 {
    let x1 = v1.alpha * v1.alpha;
    let x2 = v2.alpha * v2.alpha;
    let e1 = x1.exp_m1();
    let e2 = x2.exp_m1();
    let (s1, c1) = v1.chi.sin_cos();
    let (s2, c2) = v2.chi.sin_cos();
    let (s1s, c1s) = (s1 * s1, c1 * c1);
    let (s2s, c2s) = (s2 * s2, c2 * c2);

    let mixed = (e2 * f_defect(x1) + e1 * f_defect(x2)) * s1s * s2s;
    let trans_1 = e1 * f_ratio(x2) * s1s * c2s;
    let trans_2 = f_ratio(x1) * e2 * c1s * s2s;
    let interference = 0.5
        * (v1.alpha * f_ratio(x1))
        * (v2.alpha * f_ratio(x2))
        * (2.0 * v1.chi).sin()
        * (2.0 * v2.chi).sin()
        * (v1.theta - v2.theta).sin();

    0.5 * (-(x1 + x2)).exp() * (mixed + trans_1 + trans_2 + interference)
}

/// Closed-form local average `S(v) = <R_d(v)>`; independent of `theta`.
pub fn ch_local_s_closed(v: &Setting) -> f64 {
    let x = v.alpha * v.alpha;
    let (s, c) = v.chi.sin_cos();
    0.5 * (-x).exp() * (s * s * (x.exp_m1() + f_defect(x)) + c * c * f_ratio(x))
}

/// Evaluation route for the CH combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChMethod {
    ClosedForm,
    FockNumeric,
}

/// One evaluation of the rate CH combination, with its building blocks.
#[derive(Debug, Clone)]
pub struct CHEvaluation {
    pub settings: ChSettings,
    /// `K(v1,v2), K(v1',v2), K(v1,v2'), K(v1',v2')`.
    pub k_values: [f64; 4],
    /// `S1(v1), S2(v2)`.
    pub s_values: [f64; 2],
    pub ch_value: f64,
    pub bounds: (f64, f64),
    pub method: ChMethod,
    /// Cutoff used by the Fock route (0 for closed form).
    pub cutoff: usize,
}

impl CHEvaluation {
    /// `|ch_value - (K + K' + K'' - K''' - S1 - S2)|`, the internal
    /// consistency of the stored pieces.
    pub fn consistency_defect(&self) -> f64 {
        let recomputed = self.k_values[0] + self.k_values[1] + self.k_values[2]
            - self.k_values[3]
            - self.s_values[0]
            - self.s_values[1];
        (self.ch_value - recomputed).abs()
    }

    pub fn violates_lower_bound(&self) -> bool {
        self.ch_value < self.bounds.0 - VIOLATION_TOLERANCE
    }

    pub fn violates_upper_bound(&self) -> bool {
        self.ch_value > self.bounds.1 + VIOLATION_TOLERANCE
    }
}

fn ch_closed_terms(s: &ChSettings) -> ([f64; 4], [f64; 2]) {
    (
        [
            ch_correlator_k_closed(&s.v1, &s.v2),
            ch_correlator_k_closed(&s.v1p, &s.v2),
            ch_correlator_k_closed(&s.v1, &s.v2p),
            ch_correlator_k_closed(&s.v1p, &s.v2p),
        ],
        [ch_local_s_closed(&s.v1), ch_local_s_closed(&s.v2)],
    )
}

/// Fast closed-form CH value, the optimization objective.
pub fn ch_value_closed(s: &ChSettings) -> f64 {
    let (k, sl) = ch_closed_terms(s);
    k[0] + k[1] + k[2] - k[3] - sl[0] - sl[1]
}

fn resolve_cutoff(requested: usize, needed_alpha: f64) -> Result<usize> {
    let required = min_cutoff(needed_alpha);
    if requested == 0 {
        Ok(required)
    } else if requested < required {
        Err(Error::CutoffTooSmall { alpha: needed_alpha, given: requested, required })
    } else {
        Ok(requested)
    }
}

/// Joint rate correlator by direct Fock propagation: the state carries the
/// amplitudes of the two settings being measured.
pub fn ch_correlator_k_fock(v1: &Setting, v2: &Setting, q: f64, cutoff: usize) -> Result<f64> {
    let cutoff = resolve_cutoff(cutoff, v1.alpha.max(v2.alpha))?;
    let params = source_params(q, v1.alpha, v2.alpha)?;
    let state = prepare_state(&params, cutoff)?;
    rate_product(&state, v1, v2, RateTarget::D, RateTarget::D)
}

/// Local rate average by direct Fock propagation. The partner station's
/// amplitude is irrelevant for the marginal and is set to zero.
pub fn ch_local_s_fock(v: &Setting, station: Station, q: f64, cutoff: usize) -> Result<f64> {
    let cutoff = resolve_cutoff(cutoff, v.alpha)?;
    let (alpha1, alpha2) = match station {
        Station::One => (v.alpha, 0.0),
        Station::Two => (0.0, v.alpha),
    };
    let state = prepare_state(&source_params(q, alpha1, alpha2)?, cutoff)?;
    rate_single(&state, station, v, RateTarget::D)
}

fn source_params(q: f64, alpha1: f64, alpha2: f64) -> Result<InitialStateParams> {
    if q == 0.0 {
        Ok(InitialStateParams::single_photon_pair(alpha1, alpha2))
    } else {
        InitialStateParams::with_vacuum_fraction(q, alpha1, alpha2)
    }
}

/// Evaluate the CH combination. For `FockNumeric`, `cutoff = 0` resolves the
/// tail-rule cutoff per term; the state is rebuilt per term because it is
/// setting-dependent.
pub fn ch_rates_value(
    settings: &ChSettings,
    method: ChMethod,
    cutoff: usize,
) -> Result<CHEvaluation> {
    ch_rates_value_with_source(settings, method, cutoff, 0.0)
}

/// Same as [`ch_rates_value`] with a vacuum admixture `q` in the source mode
/// (`r = sqrt(1 - q^2)`); the closed forms only cover `q = 0`.
pub fn ch_rates_value_with_source(
    settings: &ChSettings,
    method: ChMethod,
    cutoff: usize,
    q: f64,
) -> Result<CHEvaluation> {
    let (k_values, s_values, used_cutoff) = match method {
        ChMethod::ClosedForm => {
            if q != 0.0 {
                return Err(Error::InvalidGrid(
                    "closed-form CH correlators require a pure single-photon source".into(),
                ));
            }
            let (k, s) = ch_closed_terms(settings);
            (k, s, 0)
        }
        ChMethod::FockNumeric => {
            let k = [
                ch_correlator_k_fock(&settings.v1, &settings.v2, q, cutoff)?,
                ch_correlator_k_fock(&settings.v1p, &settings.v2, q, cutoff)?,
                ch_correlator_k_fock(&settings.v1, &settings.v2p, q, cutoff)?,
                ch_correlator_k_fock(&settings.v1p, &settings.v2p, q, cutoff)?,
            ];
            let s = [
                ch_local_s_fock(&settings.v1, Station::One, q, cutoff)?,
                ch_local_s_fock(&settings.v2, Station::Two, q, cutoff)?,
            ];
            let resolved = resolve_cutoff(cutoff, settings.max_alpha())?;
            (k, s, resolved)
        }
    };
    let ch_value = k_values[0] + k_values[1] + k_values[2] - k_values[3] - s_values[0] - s_values[1];
    Ok(CHEvaluation {
        settings: *settings,
        k_values,
        s_values,
        ch_value,
        bounds: CH_BOUNDS,
        method,
        cutoff: used_cutoff,
    })
}

/// The transformed CH-for-rates combination obtained by trading the
/// reflected detector for the transmitted one on Alice's first setting and
/// swapping Bob's primed/unprimed roles. Unlike the dichotomic-outcome case
/// this is *not* equivalent to the original combination; the value is
/// returned for diagnostic comparison.
pub fn ch_alternative_form_value(settings: &ChSettings, cutoff: usize) -> Result<f64> {
    let q = 0.0;
    let k_c = |va: &Setting, vb: &Setting| -> Result<f64> {
        let cutoff = resolve_cutoff(cutoff, va.alpha.max(vb.alpha))?;
        let state = prepare_state(&source_params(q, va.alpha, vb.alpha)?, cutoff)?;
        rate_product(&state, va, vb, RateTarget::C, RateTarget::D)
    };
    let k_d = |va: &Setting, vb: &Setting| -> Result<f64> {
        ch_correlator_k_fock(va, vb, q, cutoff)
    };
    let s_c1 = {
        let cutoff = resolve_cutoff(cutoff, settings.v1.alpha)?;
        let state = prepare_state(&source_params(q, settings.v1.alpha, 0.0)?, cutoff)?;
        rate_single(&state, Station::One, &settings.v1, RateTarget::C)?
    };
    let s_d2p = ch_local_s_fock(&settings.v2p, Station::Two, q, cutoff)?;

    Ok(k_c(&settings.v1, &settings.v2)?
        + k_c(&settings.v1, &settings.v2p)?
        + k_d(&settings.v1p, &settings.v2p)?
        - k_d(&settings.v1p, &settings.v2)?
        - s_c1
        - s_d2p)
}

/// Which inequality a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InequalityId {
    /// CHSH for intensity rates (assumption-free).
    ChshRates,
    /// CHSH-like inequality for plain intensities (assumption-laden).
    ChshTwc,
    /// Clauser-Horne for rates.
    ChRates,
}

/// Outcome of one inequality evaluation.
#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub id: InequalityId,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub violated: bool,
    /// How far outside the classical interval the value lies (negative when
    /// inside).
    pub margin: f64,
    /// Set for the intensity-based CHSH form, whose derivation needs the
    /// setting-independent total-intensity assumption; it is an entanglement
    /// indicator, not a loophole-free Bell test.
    pub assumption_caveat: bool,
    pub alpha: f64,
    pub cutoff: usize,
    pub angles: [f64; 4],
}

fn build_report(
    id: InequalityId,
    value: f64,
    lower: f64,
    upper: f64,
    caveat: bool,
    alpha: f64,
    cutoff: usize,
    angles: [f64; 4],
) -> InequalityReport {
    let margin = (value - upper).max(lower - value);
    InequalityReport {
        id,
        value,
        lower,
        upper,
        violated: margin > VIOLATION_TOLERANCE,
        margin,
        assumption_caveat: caveat,
        alpha,
        cutoff,
        angles,
    }
}

/// Angles maximizing the four-term sine combination
/// `sin(t1-t2) + sin(t1'-t2) + sin(t1-t2') - sin(t1'-t2')` at `2 sqrt(2)`.
pub fn chsh_optimal_angles() -> (f64, f64, f64, f64) {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
    (0.0, FRAC_PI_2, -FRAC_PI_4, -(3.0 * PI / 4.0))
}

fn balanced(alpha: f64, theta: f64) -> Setting {
    Setting::new(std::f64::consts::FRAC_PI_4, alpha, theta)
}

/// CHSH combination of the rate correlator `E_R` at fixed auxiliary
/// amplitude, evaluated by Fock propagation. Classical bound 2, never
/// violated.
pub fn chsh_rates_value(
    alpha: f64,
    theta1: f64,
    theta1p: f64,
    theta2: f64,
    theta2p: f64,
    cutoff: usize,
) -> Result<InequalityReport> {
    let cutoff = resolve_cutoff(cutoff, alpha)?;
    let state = prepare_state(&InitialStateParams::single_photon(alpha), cutoff)?;
    let er = |t1: f64, t2: f64| -> Result<f64> {
        rate_product(
            &state,
            &balanced(alpha, t1),
            &balanced(alpha, t2),
            RateTarget::Difference,
            RateTarget::Difference,
        )
    };
    let combo = er(theta1, theta2)? + er(theta1p, theta2)? + er(theta1, theta2p)?
        - er(theta1p, theta2p)?;
    Ok(build_report(
        InequalityId::ChshRates,
        combo.abs(),
        0.0,
        CHSH_BOUND,
        false,
        alpha,
        cutoff,
        [theta1, theta1p, theta2, theta2p],
    ))
}

/// CHSH-like combination of the intensity correlator `E_T`. Carries the
/// assumption caveat; shows a spurious violation for weak fields.
pub fn chsh_twc_value(
    alpha: f64,
    theta1: f64,
    theta1p: f64,
    theta2: f64,
    theta2p: f64,
    cutoff: usize,
) -> Result<InequalityReport> {
    let cutoff = resolve_cutoff(cutoff, alpha)?;
    let state = prepare_state(&InitialStateParams::single_photon(alpha), cutoff)?;
    let den = total_intensity_product(&state)?;
    if den < 1e-14 {
        return Err(Error::ZeroDenominator);
    }
    let et = |t1: f64, t2: f64| -> Result<f64> {
        Ok(intensity_difference_product(&state, &balanced(alpha, t1), &balanced(alpha, t2))? / den)
    };
    let combo = et(theta1, theta2)? + et(theta1p, theta2)? + et(theta1, theta2p)?
        - et(theta1p, theta2p)?;
    Ok(build_report(
        InequalityId::ChshTwc,
        combo.abs(),
        0.0,
        CHSH_BOUND,
        true,
        alpha,
        cutoff,
        [theta1, theta1p, theta2, theta2p],
    ))
}

/// Search spaces for the CH optimization. Beamsplitter angles live in
/// `[0, pi/2]` (transmissivity covers `[0, 1]` there), amplitudes in
/// `[0, alpha_max]`, phases are periodic and unconstrained.
#[derive(Debug, Clone)]
pub enum ChSearchSpace {
    /// First setting of each observer pinned to `(0, 0, 0)`; the primed
    /// settings are free.
    HardyPattern { alpha_max: f64 },
    /// Both observers share amplitude `alpha` for the unprimed and
    /// `alpha_prime` for the primed setting; all angles free.
    SharedAmplitude { alpha: f64, alpha_prime: f64 },
    /// Like `SharedAmplitude` with `alpha = alpha_prime`, the common value
    /// being a free parameter.
    SharedAmplitudeEqual { alpha_max: f64 },
    /// A degenerate space holding a single settings tuple.
    SinglePoint(ChSettings),
}

impl ChSearchSpace {
    pub fn dim(&self) -> usize {
        match self {
            ChSearchSpace::HardyPattern { .. } => 6,
            ChSearchSpace::SharedAmplitude { .. } => 8,
            ChSearchSpace::SharedAmplitudeEqual { .. } => 9,
            ChSearchSpace::SinglePoint(_) => 0,
        }
    }

    pub fn bounds(&self) -> BoxBounds {
        use std::f64::consts::{FRAC_PI_2, PI};
        let chi = (0.0, FRAC_PI_2, true);
        let theta = (-PI, PI, false);
        let dims: Vec<(f64, f64, bool)> = match self {
            ChSearchSpace::HardyPattern { alpha_max } => {
                let amp = (0.0, *alpha_max, true);
                vec![chi, amp, theta, chi, amp, theta]
            }
            ChSearchSpace::SharedAmplitude { .. } => {
                vec![chi, theta, chi, theta, chi, theta, chi, theta]
            }
            ChSearchSpace::SharedAmplitudeEqual { alpha_max } => {
                let mut v = vec![(0.0, *alpha_max, true)];
                v.extend([chi, theta, chi, theta, chi, theta, chi, theta]);
                v
            }
            ChSearchSpace::SinglePoint(_) => vec![],
        };
        BoxBounds {
            lower: dims.iter().map(|d| d.0).collect(),
            upper: dims.iter().map(|d| d.1).collect(),
            clamped: dims.iter().map(|d| d.2).collect(),
        }
    }

    pub fn decode(&self, x: &[f64]) -> ChSettings {
        match self {
            ChSearchSpace::HardyPattern { .. } => ChSettings::new(
                Setting::off(),
                Setting::new(x[0], x[1], x[2]),
                Setting::off(),
                Setting::new(x[3], x[4], x[5]),
            ),
            ChSearchSpace::SharedAmplitude { alpha, alpha_prime } => ChSettings::new(
                Setting::new(x[0], *alpha, x[1]),
                Setting::new(x[2], *alpha_prime, x[3]),
                Setting::new(x[4], *alpha, x[5]),
                Setting::new(x[6], *alpha_prime, x[7]),
            ),
            ChSearchSpace::SharedAmplitudeEqual { .. } => ChSettings::new(
                Setting::new(x[1], x[0], x[2]),
                Setting::new(x[3], x[0], x[4]),
                Setting::new(x[5], x[0], x[6]),
                Setting::new(x[7], x[0], x[8]),
            ),
            ChSearchSpace::SinglePoint(s) => *s,
        }
    }
}

/// Objective backing the CH search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChObjective {
    ClosedForm,
    /// Direct Fock evaluation; supports a vacuum admixture `q` in the source
    /// (exploratory searches). Much slower than the closed form.
    FockNumeric { vacuum_amplitude: f64, cutoff: usize },
}

/// Result of a CH minimization.
#[derive(Debug, Clone)]
pub struct ChOptimum {
    pub best: CHEvaluation,
    pub search: SearchOutcome,
}

fn objective_value(objective: &ChObjective, settings: &ChSettings) -> f64 {
    match objective {
        ChObjective::ClosedForm => ch_value_closed(settings),
        ChObjective::FockNumeric { vacuum_amplitude, cutoff } => {
            ch_rates_value_with_source(settings, ChMethod::FockNumeric, *cutoff, *vacuum_amplitude)
                .map(|e| e.ch_value)
                .unwrap_or(f64::INFINITY)
        }
    }
}

/// Minimize the CH combination over `space`. Deterministic for a fixed seed
/// and configuration; the trace records every start.
pub fn optimize_ch(
    space: &ChSearchSpace,
    objective: ChObjective,
    cfg: &OptimizerConfig,
) -> Result<ChOptimum> {
    if cfg.starts == 0 && !matches!(space, ChSearchSpace::SinglePoint(_)) {
        return Err(Error::EmptySearchSpace);
    }
    if let ChSearchSpace::SinglePoint(settings) = space {
        let value = objective_value(&objective, settings);
        let best = evaluate_for_report(&objective, settings)?;
        let record = StartRecord {
            index: 0,
            start: vec![],
            best: vec![],
            value,
            iterations: 0,
            evaluations: 1,
            max_value_seen: value,
        };
        return Ok(ChOptimum {
            best,
            search: SearchOutcome {
                best_point: vec![],
                best_value: value,
                max_value_seen: value,
                records: vec![record],
                seed: cfg.seed,
            },
        });
    }

    let f = |x: &[f64]| objective_value(&objective, &space.decode(x));
    let search = multi_start(&f, &space.bounds(), &[], cfg);
    let best_settings = space.decode(&search.best_point);
    let best = evaluate_for_report(&objective, &best_settings)?;
    Ok(ChOptimum { best, search })
}

fn evaluate_for_report(objective: &ChObjective, settings: &ChSettings) -> Result<CHEvaluation> {
    match objective {
        ChObjective::ClosedForm => ch_rates_value(settings, ChMethod::ClosedForm, 0),
        ChObjective::FockNumeric { vacuum_amplitude, cutoff } => {
            ch_rates_value_with_source(settings, ChMethod::FockNumeric, *cutoff, *vacuum_amplitude)
        }
    }
}

/// One cell of the amplitude landscape.
#[derive(Debug, Clone)]
pub struct ChSweepCell {
    pub alpha: f64,
    pub alpha_prime: f64,
    /// Minimal CH value over all remaining parameters.
    pub value: f64,
    pub settings: ChSettings,
}

/// Optimized CH values over an `alpha x alpha_prime` grid.
#[derive(Debug, Clone)]
pub struct ChSweep {
    pub alpha_grid: Vec<f64>,
    pub alpha_prime_grid: Vec<f64>,
    /// Row-major over `(alpha, alpha_prime)`.
    pub cells: Vec<ChSweepCell>,
    pub max_value_seen: f64,
    pub seed: u64,
    pub starts: usize,
}

impl ChSweep {
    pub fn cell(&self, i: usize, j: usize) -> &ChSweepCell {
        &self.cells[i * self.alpha_prime_grid.len() + j]
    }
}

/// For each `(alpha, alpha_prime)` pair, minimize the closed-form CH value
/// over the two beamsplitter angles and two phases of both observers; the
/// previous cell in the row seeds one warm start, which stabilizes the
/// envelope on smooth landscapes. Rows run in parallel.
pub fn sweep_alpha_landscape(
    alpha_grid: &[f64],
    alpha_prime_grid: &[f64],
    cfg: &OptimizerConfig,
) -> ChSweep {
    let sweep_row = |&alpha: &f64| -> (Vec<ChSweepCell>, f64) {
        let mut row = Vec::with_capacity(alpha_prime_grid.len());
        let mut warm: Vec<Vec<f64>> = Vec::new();
        let mut max_seen = f64::NEG_INFINITY;
        for &alpha_prime in alpha_prime_grid {
            let space = ChSearchSpace::SharedAmplitude { alpha, alpha_prime };
            let f = |x: &[f64]| ch_value_closed(&space.decode(x));
            let out = multi_start(&f, &space.bounds(), &warm, cfg);
            warm = vec![out.best_point.clone()];
            max_seen = max_seen.max(out.max_value_seen);
            row.push(ChSweepCell {
                alpha,
                alpha_prime,
                value: out.best_value,
                settings: space.decode(&out.best_point),
            });
        }
        (row, max_seen)
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<(Vec<ChSweepCell>, f64)> = alpha_grid.par_iter().map(sweep_row).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<(Vec<ChSweepCell>, f64)> = alpha_grid.iter().map(sweep_row).collect();

    let mut cells = Vec::with_capacity(alpha_grid.len() * alpha_prime_grid.len());
    let mut max_value_seen = f64::NEG_INFINITY;
    for (row, max_seen) in rows {
        cells.extend(row);
        max_value_seen = max_value_seen.max(max_seen);
    }
    ChSweep {
        alpha_grid: alpha_grid.to_vec(),
        alpha_prime_grid: alpha_prime_grid.to_vec(),
        cells,
        max_value_seen,
        seed: cfg.seed,
        starts: cfg.starts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, SQRT_2};

    fn random_setting(rng: &mut ChaCha8Rng, alpha_range: (f64, f64)) -> Setting {
        Setting::new(
            rng.random_range(0.0..FRAC_PI_2),
            rng.random_range(alpha_range.0..alpha_range.1),
            rng.random_range(-PI..PI),
        )
    }

    #[test]
    fn k_closed_vanishes_without_beamsplitters() {
        for &(a1, a2) in &[(0.1, 0.1), (0.5, 1.3), (2.0, 0.01)] {
            let v1 = Setting::new(0.0, a1, 0.4);
            let v2 = Setting::new(0.0, a2, -1.0);
            assert_eq!(ch_correlator_k_closed(&v1, &v2), 0.0);
        }
    }

    #[test]
    fn k_closed_depends_on_phases_only_through_their_difference() {
        let v1 = Setting::new(0.5, 0.8, 0.3);
        let v2 = Setting::new(1.1, 0.4, -0.9);
        let k = ch_correlator_k_closed(&v1, &v2);
        for shift in [0.7, -2.0, PI] {
            let v1s = Setting::new(v1.chi, v1.alpha, v1.theta + shift);
            let v2s = Setting::new(v2.chi, v2.alpha, v2.theta + shift);
            assert_abs_diff_eq!(ch_correlator_k_closed(&v1s, &v2s), k, epsilon = 1e-15);
        }
    }

    #[test]
    fn s_closed_examples_and_theta_independence() {
        // chi = 0, alpha -> 0 limit is 1/2
        assert_abs_diff_eq!(
            ch_local_s_closed(&Setting::new(0.0, 1e-9, 0.0)),
            0.5,
            epsilon = 1e-12
        );
        // chi = 0, alpha = 1: e^{-1}(e - 1)/2
        assert_abs_diff_eq!(
            ch_local_s_closed(&Setting::new(0.0, 1.0, 0.0)),
            (-1.0f64).exp() * (std::f64::consts::E - 1.0) / 2.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            ch_local_s_closed(&Setting::new(0.0, 1.0, 0.0)),
            0.316_060_279_414_279,
            epsilon = 1e-12
        );
        // theta never enters
        let s = ch_local_s_closed(&Setting::new(0.7, 0.9, 0.0));
        assert_eq!(s, ch_local_s_closed(&Setting::new(0.7, 0.9, 2.2)));
        // and S stays a rate expectation, inside [0, 1]
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let v = random_setting(&mut rng, (0.0, 2.5));
            let s = ch_local_s_closed(&v);
            assert!((0.0..=1.0).contains(&s), "S({v:?}) = {s}");
        }
    }

    #[test]
    fn ch_at_all_off_settings_is_minus_one() {
        let off = ChSettings::new(Setting::off(), Setting::off(), Setting::off(), Setting::off());
        let closed = ch_rates_value(&off, ChMethod::ClosedForm, 0).unwrap();
        assert_eq!(closed.ch_value, -1.0);
        assert!(closed.consistency_defect() <= 1e-12);

        // brute-force oracle at a tiny but nonzero amplitude
        let tiny = Setting::new(0.0, 1e-4, 0.0);
        let near_off = ChSettings::new(tiny, tiny, tiny, tiny);
        let fock = ch_rates_value(&near_off, ChMethod::FockNumeric, 0).unwrap();
        assert_abs_diff_eq!(fock.ch_value, -1.0, epsilon = 1e-6);
    }

    #[test]
    fn reference_settings_reproduce_known_violation() {
        let eval = ch_rates_value(&hardy_reference_settings(), ChMethod::ClosedForm, 0).unwrap();
        // frozen closed-form value at the reference settings
        assert_abs_diff_eq!(eval.ch_value, -1.023_790_959_976, epsilon = 1e-9);
        assert_abs_diff_eq!(eval.ch_value, -1.0239, epsilon = 2e-3);
        assert!(eval.violates_lower_bound());
        assert!(!eval.violates_upper_bound());

        // dual-path check on the K entering the violation
        let s = hardy_reference_settings();
        let k_closed = ch_correlator_k_closed(&s.v1p, &s.v2p);
        let k_fock = ch_correlator_k_fock(&s.v1p, &s.v2p, 0.0, 0).unwrap();
        assert_abs_diff_eq!(k_closed, k_fock, epsilon = 1e-6);
        let full_fock = ch_rates_value(&s, ChMethod::FockNumeric, 0).unwrap();
        assert_abs_diff_eq!(full_fock.ch_value, eval.ch_value, epsilon = 1e-6);
    }

    #[test]
    fn closed_and_fock_routes_agree_on_random_settings() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let settings = ChSettings::new(
                random_setting(&mut rng, (0.05, 1.5)),
                random_setting(&mut rng, (0.05, 1.5)),
                random_setting(&mut rng, (0.05, 1.5)),
                random_setting(&mut rng, (0.05, 1.5)),
            );
            let closed = ch_rates_value(&settings, ChMethod::ClosedForm, 0).unwrap();
            let fock = ch_rates_value(&settings, ChMethod::FockNumeric, 0).unwrap();
            assert_abs_diff_eq!(closed.ch_value, fock.ch_value, epsilon = 1e-6);
            for i in 0..4 {
                assert_abs_diff_eq!(closed.k_values[i], fock.k_values[i], epsilon = 1e-6);
            }
            assert!(closed.consistency_defect() <= 1e-12);
            assert!(fock.consistency_defect() <= 1e-12);
        }
    }

    #[test]
    fn local_average_ignores_partner_amplitude() {
        let v = Setting::new(0.6, 0.7, 0.2);
        let direct = ch_local_s_fock(&v, Station::One, 0.0, 0).unwrap();
        // same marginal out of a state carrying a strong partner field
        let cutoff = min_cutoff(1.8);
        let state =
            prepare_state(&InitialStateParams::single_photon_pair(0.7, 1.8), cutoff).unwrap();
        let with_partner = rate_single(&state, Station::One, &v, RateTarget::D).unwrap();
        assert_abs_diff_eq!(direct, with_partner, epsilon = 1e-9);
        assert_abs_diff_eq!(direct, ch_local_s_closed(&v), epsilon = 1e-7);
    }

    #[test]
    fn alternative_form_differs_from_original() {
        // at the all-off settings the transformed combination evaluates to
        // -<R_d2> = -1/2 while the original reaches -1
        let off = ChSettings::new(Setting::off(), Setting::off(), Setting::off(), Setting::off());
        let alt = ch_alternative_form_value(&off, 0).unwrap();
        assert_abs_diff_eq!(alt, -0.5, epsilon = 1e-9);

        let reference = hardy_reference_settings();
        let alt_ref = ch_alternative_form_value(&reference, 0).unwrap();
        let orig = ch_rates_value(&reference, ChMethod::ClosedForm, 0).unwrap().ch_value;
        assert!((alt_ref - orig).abs() > 1e-3, "forms coincide: {alt_ref} vs {orig}");
    }

    #[test]
    fn chsh_rates_never_violates_but_matches_amplitude() {
        let (t1, t1p, t2, t2p) = chsh_optimal_angles();
        let report = chsh_rates_value(1.0, t1, t1p, t2, t2p, 0).unwrap();
        let expected = 2.0 * SQRT_2 * amplitude_ar(1.0);
        assert_abs_diff_eq!(report.value, expected, epsilon = 1e-5);
        assert_abs_diff_eq!(report.value, 1.130_172_852, epsilon = 1e-5);
        assert!(!report.violated);
        assert!(report.value < CHSH_BOUND);

        let flat = chsh_rates_value(1.0, 0.3, 0.3, 0.3, 0.3, 0).unwrap();
        assert!(flat.value.abs() < 1e-10);
    }

    #[test]
    fn chsh_twc_shows_spurious_violation_for_weak_fields() {
        let (t1, t1p, t2, t2p) = chsh_optimal_angles();
        // alpha^2 = 0.2: combination reaches 2 sqrt(2) / 1.2
        let weak = chsh_twc_value(0.2f64.sqrt(), t1, t1p, t2, t2p, 0).unwrap();
        assert_abs_diff_eq!(weak.value, 2.0 * SQRT_2 / 1.2, epsilon = 1e-6);
        assert_abs_diff_eq!(weak.value, 2.356_690_3, epsilon = 1e-6);
        assert!(weak.violated);
        assert!(weak.assumption_caveat);

        // boundary alpha^2 = 0.414
        let boundary = chsh_twc_value(0.414f64.sqrt(), t1, t1p, t2, t2p, 0).unwrap();
        assert_abs_diff_eq!(boundary.value, 2.0, epsilon = 2e-3);

        // alpha^2 = 1: sqrt(2) < 2
        let strong = chsh_twc_value(1.0, t1, t1p, t2, t2p, 0).unwrap();
        assert_abs_diff_eq!(strong.value, SQRT_2, epsilon = 1e-6);
        assert!(!strong.violated);
    }

    #[test]
    fn hardy_pattern_search_finds_the_violation() {
        let cfg = OptimizerConfig { starts: 32, ..Default::default() };
        let out = optimize_ch(
            &ChSearchSpace::HardyPattern { alpha_max: 2.0 },
            ChObjective::ClosedForm,
            &cfg,
        )
        .unwrap();
        assert!(out.best.ch_value <= -1.0219, "best {}", out.best.ch_value);
        assert!(out.search.max_value_seen <= VIOLATION_TOLERANCE);

        // optimum sits near transmissivity 0.79 and mean photon number 1/2
        let v1p = out.best.settings.v1p;
        let v2p = out.best.settings.v2p;
        for v in [v1p, v2p] {
            assert_abs_diff_eq!(v.chi.cos().powi(2), 0.79, epsilon = 0.04);
            assert_abs_diff_eq!(v.alpha * v.alpha, 0.5, epsilon = 0.06);
        }
    }

    #[test]
    fn equal_amplitudes_cannot_violate() {
        let cfg = OptimizerConfig { starts: 48, ..Default::default() };
        let out = optimize_ch(
            &ChSearchSpace::SharedAmplitudeEqual { alpha_max: 1.5 },
            ChObjective::ClosedForm,
            &cfg,
        )
        .unwrap();
        assert!(out.best.ch_value >= -1.0 - VIOLATION_TOLERANCE, "best {}", out.best.ch_value);
    }

    #[test]
    fn single_point_space_returns_that_point() {
        let settings = hardy_reference_settings();
        let out = optimize_ch(
            &ChSearchSpace::SinglePoint(settings),
            ChObjective::ClosedForm,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(out.best.settings, settings);
        assert_abs_diff_eq!(out.best.ch_value, -1.023_790_959_976, epsilon = 1e-9);
    }

    #[test]
    fn optimizer_trace_is_deterministic() {
        let cfg = OptimizerConfig { starts: 8, seed: 11, ..Default::default() };
        let space = ChSearchSpace::HardyPattern { alpha_max: 1.5 };
        let a = optimize_ch(&space, ChObjective::ClosedForm, &cfg).unwrap();
        let b = optimize_ch(&space, ChObjective::ClosedForm, &cfg).unwrap();
        assert_eq!(a.search.records, b.search.records);
        assert_eq!(a.best.ch_value, b.best.ch_value);
    }

    #[test]
    fn sweep_diagonal_respects_bound_and_off_diagonal_violates() {
        let cfg = OptimizerConfig { starts: 12, ..Default::default() };
        let alpha_grid = [0.0, 0.3, 0.6, 0.9, 1.2];
        let sweep = sweep_alpha_landscape(&alpha_grid, &alpha_grid, &cfg);
        for (i, &a) in alpha_grid.iter().enumerate() {
            let diag = sweep.cell(i, i);
            assert!(
                diag.value >= -1.0 - VIOLATION_TOLERANCE,
                "diagonal violation at alpha = {a}: {}",
                diag.value
            );
        }
        // the off state paired with a moderate amplitude violates
        let cell = sweep.cell(0, 2);
        assert!(cell.value < -1.0, "expected violation at (0, 0.6), got {}", cell.value);
        // and the global upper bound audit holds
        assert!(sweep.max_value_seen <= VIOLATION_TOLERANCE);
    }

    #[test]
    fn exploratory_vacuum_admixture_search_runs() {
        // original on/off source superposition; reduced budget, no gating
        let cfg = OptimizerConfig { starts: 2, max_iters: 60, ..Default::default() };
        let out = optimize_ch(
            &ChSearchSpace::HardyPattern { alpha_max: 1.0 },
            ChObjective::FockNumeric { vacuum_amplitude: 0.5, cutoff: 0 },
            &cfg,
        )
        .unwrap();
        assert!(out.best.ch_value.is_finite());
        assert!(out.best.consistency_defect() <= 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn prop_chsh_rates_closed_combination_below_two(
            alpha in 0.01f64..3.0,
            t1 in -PI..PI, t1p in -PI..PI, t2 in -PI..PI, t2p in -PI..PI,
        ) {
            let combo = amplitude_ar(alpha)
                * ((t1 - t2).sin() + (t1p - t2).sin() + (t1 - t2p).sin() - (t1p - t2p).sin());
            prop_assert!(combo.abs() < 2.0);
        }

        #[test]
        fn prop_ch_closed_within_algebraic_range(
            chi1 in 0.0..FRAC_PI_2, a1 in 0.0..2.0f64, th1 in -PI..PI,
            chi2 in 0.0..FRAC_PI_2, a2 in 0.0..2.0f64, th2 in -PI..PI,
        ) {
            let v1 = Setting::new(chi1, a1, th1);
            let v2 = Setting::new(chi2, a2, th2);
            let k = ch_correlator_k_closed(&v1, &v2);
            // K is an expectation of a product of [0,1]-valued rates
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&k), "K = {k}");
            let settings = ChSettings::new(v1, v1, v2, v2);
            let ch = ch_value_closed(&settings);
            prop_assert!(ch >= -2.0 - 1e-9, "ch = {ch}");
            prop_assert!(ch <= VIOLATION_TOLERANCE, "ch = {ch}");
        }
    }

    #[test]
    fn f_helpers_match_reference_series() {
        assert_eq!(f_ratio(0.0), 1.0);
        assert_eq!(f_defect(0.0), 0.0);
        assert_abs_diff_eq!(f_ratio(0.5), (0.5f64.exp() - 1.0) / 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            f_defect(0.5),
            (1.0 + 0.5f64.exp() * (0.5 - 1.0)) / 0.5,
            epsilon = 1e-14
        );
        // series behavior near zero
        assert_abs_diff_eq!(f_ratio(1e-9), 1.0 + 5e-10, epsilon = 1e-15);
        assert_abs_diff_eq!(f_defect(1e-9), 5e-10, epsilon = 1e-15);
    }

    #[test]
    fn reference_k_value_matches_frozen_oracle() {
        let v = Setting::new(3.0 * PI / 20.0, FRAC_1_SQRT_2, 0.0);
        let k = ch_correlator_k_closed(&v, &v);
        let k_fock = ch_correlator_k_fock(&v, &v, 0.0, 0).unwrap();
        assert_abs_diff_eq!(k, k_fock, epsilon = 1e-6);
    }
}
