//! Beamsplitter mode transformations lifted to Fock-space unitaries, and the
//! interferometer's initial states.
//!
//! A beamsplitter with transmissivity `cos^2 chi` and reflection phase
//! `theta` maps the input annihilation operators `(a, b)` of its two ports to
//!
//! ```text
//! c =  cos(chi) a + e^{-i theta} sin(chi) b
//! d = -e^{i theta} sin(chi) a + cos(chi) b
//! ```
//!
//! The state-space lift is built per photon-number block as the symmetric
//! tensor power of that 2x2 matrix, which makes photon-number conservation
//! exact by construction. The sign convention is pinned by the single-photon
//! check: a photon in the second port of a balanced splitter with
//! `theta = -pi/2` comes out as `(|01> + i|10>)/sqrt(2)`.

use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::fock::{coherent_state, min_cutoff, C64, FockOperator, FockVector, ModeLayout};

/// Tunable beamsplitter: `chi` sets the transmissivity `cos^2 chi`, `theta`
/// the phase of the reflected beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamsplitterParams {
    pub chi: f64,
    pub theta: f64,
}

impl BeamsplitterParams {
    pub fn new(chi: f64, theta: f64) -> Self {
        Self { chi, theta }
    }

    /// Balanced splitter (50/50) with reflection phase `theta`.
    pub fn balanced(theta: f64) -> Self {
        Self { chi: FRAC_PI_4, theta }
    }

    /// The defining 2x2 mode matrix.
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        let (s, c) = self.chi.sin_cos();
        [
            [C64::new(c, 0.0), C64::from_polar(s, -self.theta)],
            [-C64::from_polar(s, self.theta), C64::new(c, 0.0)],
        ]
    }
}

/// One local measurement setting: beamsplitter angle `chi`, auxiliary
/// coherent amplitude `alpha` (real, non-negative) and phase `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setting {
    pub chi: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl Setting {
    pub fn new(chi: f64, alpha: f64, theta: f64) -> Self {
        Self { chi, alpha, theta }
    }

    /// The all-off setting: identity beamsplitter, no auxiliary field.
    pub fn off() -> Self {
        Self { chi: 0.0, alpha: 0.0, theta: 0.0 }
    }

    pub fn beamsplitter(&self) -> BeamsplitterParams {
        BeamsplitterParams::new(self.chi, self.theta)
    }
}

/// Photon-number blocks of the two-mode lift of a beamsplitter at a given
/// per-mode cutoff. Block `n` connects occupations `(k, n - k)`; for
/// `n > cutoff` the block is the truncation of the full symmetric power
/// (occupations beyond the cutoff are annihilated).
#[derive(Debug, Clone)]
pub struct PairUnitary {
    pub cutoff: usize,
    blocks: Vec<Array2<C64>>,
}

fn block_bounds(n: usize, cutoff: usize) -> (usize, usize) {
    (n.saturating_sub(cutoff), n.min(cutoff))
}

impl PairUnitary {
    pub fn new(params: &BeamsplitterParams, cutoff: usize) -> Self {
        let m = params.matrix();
        let max_n = 2 * cutoff;
        // factorials up to 2*cutoff stay well inside f64 range for the
        // cutoffs used here (<= ~60)
        let mut fact = vec![1.0f64; max_n + 1];
        for i in 1..=max_n {
            fact[i] = fact[i - 1] * i as f64;
        }
        let binom = |n: usize, k: usize| fact[n] / (fact[k] * fact[n - k]);

        let mut blocks = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            let (lo, hi) = block_bounds(n, cutoff);
            let size = hi - lo + 1;
            let mut block = Array2::zeros((size, size));
            for k in lo..=hi {
                // U |k, n-k> expanded over |j, n-j>
                for j in lo..=hi {
                    let mut sum = C64::default();
                    let i_min = j.saturating_sub(n - k);
                    let i_max = k.min(j);
                    if i_min > i_max {
                        continue;
                    }
                    for i in i_min..=i_max {
                        let combinatorial = binom(k, i) * binom(n - k, j - i);
                        sum += m[0][0].powu(i as u32)
                            * m[1][0].powu((k - i) as u32)
                            * m[0][1].powu((j - i) as u32)
                            * m[1][1].powu((n - k - (j - i)) as u32)
                            * combinatorial;
                    }
                    let weight = (fact[j] * fact[n - j] / (fact[k] * fact[n - k])).sqrt();
                    block[(j - lo, k - lo)] = sum * weight;
                }
            }
            blocks.push(block);
        }
        Self { cutoff, blocks }
    }

    pub fn block(&self, n: usize) -> &Array2<C64> {
        &self.blocks[n]
    }

    /// Dense matrix on the two-mode basis (row-major over `(first, second)`
    /// occupations).
    pub fn to_dense(&self) -> Array2<C64> {
        let d = self.cutoff + 1;
        let mut out = Array2::zeros((d * d, d * d));
        for n in 0..=2 * self.cutoff {
            let (lo, _) = block_bounds(n, self.cutoff);
            let block = &self.blocks[n];
            for (bj, bk) in (0..block.nrows()).flat_map(|r| (0..block.ncols()).map(move |c| (r, c)))
            {
                let j = bj + lo;
                let k = bk + lo;
                out[((j * d + (n - j)), (k * d + (n - k)))] = block[(bj, bk)];
            }
        }
        out
    }

    /// Apply to the named pair of a multimode state (identity elsewhere).
    pub fn apply(&self, state: &FockVector, mode_x: &str, mode_y: &str) -> Result<FockVector> {
        let p = state.layout.mode_index(mode_x)?;
        let q = state.layout.mode_index(mode_y)?;
        let (cx, cy) = (
            state.layout.modes()[p].cutoff,
            state.layout.modes()[q].cutoff,
        );
        if cx != cy {
            return Err(Error::UnequalCutoffs(cx, cy));
        }
        if cx != self.cutoff {
            return Err(Error::LayoutMismatch(format!(
                "pair unitary built for cutoff {} applied to cutoff {}",
                self.cutoff, cx
            )));
        }
        let (sp, sq) = (state.layout.stride(p), state.layout.stride(q));
        let mut out = FockVector::zero(state.layout.clone());
        let mut sub = vec![C64::default(); self.cutoff + 1];
        for base in state.layout.rest_offsets(p, q) {
            for n in 0..=2 * self.cutoff {
                let (lo, hi) = block_bounds(n, self.cutoff);
                for k in lo..=hi {
                    sub[k - lo] = state.amplitudes[base + k * sp + (n - k) * sq];
                }
                let block = &self.blocks[n];
                for j in lo..=hi {
                    let mut acc = C64::default();
                    for k in lo..=hi {
                        acc += block[(j - lo, k - lo)] * sub[k - lo];
                    }
                    out.amplitudes[base + j * sp + (n - j) * sq] = acc;
                }
            }
        }
        Ok(out)
    }
}

/// Fock-space beamsplitter unitary acting on the two named modes of `layout`
/// (identity on all other modes). Both modes must share a cutoff.
pub fn beamsplitter_unitary(
    layout: &ModeLayout,
    mode_a: &str,
    mode_b: &str,
    params: &BeamsplitterParams,
) -> Result<FockOperator> {
    let p = layout.mode_index(mode_a)?;
    let q = layout.mode_index(mode_b)?;
    let (ca, cb) = (layout.modes()[p].cutoff, layout.modes()[q].cutoff);
    if ca != cb {
        return Err(Error::UnequalCutoffs(ca, cb));
    }
    let pair = PairUnitary::new(params, ca);
    let (sp, sq) = (layout.stride(p), layout.stride(q));
    let dim = layout.dim();
    let mut matrix = Array2::zeros((dim, dim));
    for base in layout.rest_offsets(p, q) {
        for n in 0..=2 * ca {
            let (lo, hi) = block_bounds(n, ca);
            let block = pair.block(n);
            for j in lo..=hi {
                for k in lo..=hi {
                    let v = block[(j - lo, k - lo)];
                    if v != C64::default() {
                        matrix[(base + j * sp + (n - j) * sq, base + k * sp + (n - k) * sq)] = v;
                    }
                }
            }
        }
    }
    Ok(FockOperator::new(layout.clone(), matrix)?.flagged(false, true))
}

/// Initial-state parameters: vacuum/single-photon superposition amplitudes
/// of the source mode and the two auxiliary coherent amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialStateParams {
    pub q: C64,
    pub r: C64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl InitialStateParams {
    pub fn new(q: C64, r: C64, alpha1: f64, alpha2: f64) -> Result<Self> {
        let norm = q.norm_sqr() + r.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { q, r, alpha1, alpha2 })
    }

    /// Pure single-photon source with equal auxiliary amplitudes.
    pub fn single_photon(alpha: f64) -> Self {
        Self {
            q: C64::default(),
            r: C64::new(1.0, 0.0),
            alpha1: alpha,
            alpha2: alpha,
        }
    }

    /// Pure single-photon source with independent auxiliary amplitudes.
    pub fn single_photon_pair(alpha1: f64, alpha2: f64) -> Self {
        Self {
            q: C64::default(),
            r: C64::new(1.0, 0.0),
            alpha1,
            alpha2,
        }
    }

    /// Real vacuum amplitude `q`, `r = sqrt(1 - q^2)`.
    pub fn with_vacuum_fraction(q: f64, alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::NotNormalized(q * q));
        }
        Ok(Self {
            q: C64::new(q, 0.0),
            r: C64::new((1.0 - q * q).sqrt(), 0.0),
            alpha1,
            alpha2,
        })
    }

    /// Minimal uniform cutoff admissible for both auxiliary amplitudes.
    pub fn required_cutoff(&self) -> usize {
        min_cutoff(self.alpha1).max(min_cutoff(self.alpha2))
    }
}

/// Which measurement station a stage acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Station {
    One,
    Two,
}

impl Station {
    /// `(input coherent mode, input signal mode, output transmitted, output reflected)`
    pub fn mode_names(&self) -> (&'static str, &'static str, &'static str, &'static str) {
        match self {
            Station::One => ("a1", "b1", "c1", "d1"),
            Station::Two => ("a2", "b2", "c2", "d2"),
        }
    }
}

/// The standard four-mode register `a1, b1, b2, a2` at a uniform cutoff.
pub fn standard_layout(cutoff: usize) -> ModeLayout {
    ModeLayout::new([("a1", cutoff), ("b1", cutoff), ("b2", cutoff), ("a2", cutoff)])
        .expect("static mode names are unique")
}

/// Source superposition `q|0> + r|1>` split on the balanced `theta = -pi/2`
/// beamsplitter, producing `q|00> + r(|01> + i|10>)/sqrt(2)` on `(b1, b2)`.
/// The phase convention is inherited from the beamsplitter lift rather than
/// asserted by hand.
pub fn photon_pair_state(q: C64, r: C64, cutoff: usize) -> Result<FockVector> {
    let norm = q.norm_sqr() + r.norm_sqr();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(norm));
    }
    let layout = ModeLayout::new([("b1", cutoff), ("b2", cutoff)])?;
    let mut state = FockVector::zero(layout.clone());
    state.amplitudes[layout.index_of(&[0, 0])] = q;
    state.amplitudes[layout.index_of(&[0, 1])] = r;
    let splitter = PairUnitary::new(&BeamsplitterParams::new(FRAC_PI_4, -std::f64::consts::FRAC_PI_2), cutoff);
    splitter.apply(&state, "b1", "b2")
}

/// Total input state `|alpha1>_{a1} (x) [q|00> + r(|01>+i|10>)/sqrt(2)]_{b1 b2} (x) |alpha2>_{a2}`
/// on the standard layout at a uniform `cutoff` (which must satisfy the tail
/// rule for both amplitudes).
pub fn prepare_state(params: &InitialStateParams, cutoff: usize) -> Result<FockVector> {
    let required = params.required_cutoff();
    if cutoff < required {
        return Err(Error::CutoffTooSmall {
            alpha: params.alpha1.abs().max(params.alpha2.abs()),
            given: cutoff,
            required,
        });
    }
    let pair = photon_pair_state(params.q, params.r, cutoff)?;
    let osc1 = coherent_state("a1", params.alpha1, cutoff)?;
    let osc2 = coherent_state("a2", params.alpha2, cutoff)?;
    osc1.tensor(&pair)?.tensor(&osc2)
}

/// Propagate the state through the station's measurement beamsplitter
/// `U(chi_j, theta_j)` acting on `(a_j, b_j)` and relabel the output modes
/// `(c_j, d_j)`. The setting's `alpha` plays no role here; it belongs to
/// state preparation.
pub fn apply_measurement_stage(
    state: &FockVector,
    station: Station,
    setting: &Setting,
) -> Result<FockVector> {
    let (in_a, in_b, out_c, out_d) = station.mode_names();
    let cutoff = state.layout.cutoff_of(in_a)?;
    let unitary = PairUnitary::new(&setting.beamsplitter(), cutoff);
    let propagated = unitary.apply(state, in_a, in_b)?;
    let layout = propagated.layout.renamed(&[(in_a, out_c), (in_b, out_d)])?;
    FockVector::new(layout, propagated.amplitudes)
}
