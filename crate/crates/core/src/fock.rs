//! Truncated multimode Fock-space algebra: layouts, state vectors, dense
//! operators, ladder operators, coherent states and expectation values.
//!
//! A [`ModeLayout`] is an ordered list of named modes with per-mode cutoffs;
//! the basis index runs row-major over the mode list (first mode slowest), so
//! for modes `(m0, m1)` with cutoffs `(N0, N1)` the state `|n0 n1>` sits at
//! index `n0 * (N1 + 1) + n1`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Truncation budget for coherent states: the admissible cutoff must keep the
/// Poisson tail below this value.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Coherent-state cutoffs never go below this, whatever the amplitude.
pub const MIN_CUTOFF: usize = 12;

/// One named mode with its occupation cutoff (allowed occupations are
/// `0..=cutoff`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mode {
    pub name: String,
    pub cutoff: usize,
}

/// Ordered list of modes defining a truncated multimode photon-number basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeLayout {
    modes: Vec<Mode>,
}

impl ModeLayout {
    pub fn new<S: Into<String>>(modes: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let modes: Vec<Mode> = modes
            .into_iter()
            .map(|(name, cutoff)| Mode { name: name.into(), cutoff })
            .collect();
        for (i, m) in modes.iter().enumerate() {
            if m.cutoff == 0 {
                return Err(Error::InvalidCutoff(m.name.clone()));
            }
            if modes[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::DuplicateMode(m.name.clone()));
            }
        }
        Ok(Self { modes })
    }

    /// Single mode helper.
    pub fn single(name: impl Into<String>, cutoff: usize) -> Result<Self> {
        Self::new([(name.into(), cutoff)])
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Total basis dimension: product of `(cutoff + 1)` over modes.
    pub fn dim(&self) -> usize {
        self.modes.iter().map(|m| m.cutoff + 1).product()
    }

    pub fn mode_index(&self, name: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| Error::UnknownMode(name.to_string()))
    }

    pub fn cutoff_of(&self, name: &str) -> Result<usize> {
        Ok(self.modes[self.mode_index(name)?].cutoff)
    }

    /// Stride of mode `k` in the row-major basis index.
    pub fn stride(&self, k: usize) -> usize {
        self.modes[k + 1..].iter().map(|m| m.cutoff + 1).product()
    }

    /// Basis index of an occupation tuple (must be within cutoffs).
    pub fn index_of(&self, occ: &[usize]) -> usize {
        debug_assert_eq!(occ.len(), self.modes.len());
        let mut idx = 0;
        for (k, (&n, m)) in occ.iter().zip(&self.modes).enumerate() {
            debug_assert!(n <= m.cutoff, "occupation out of range in mode {k}");
            idx = idx * (m.cutoff + 1) + n;
        }
        idx
    }

    /// Occupation tuple of a basis index.
    pub fn occupations_of(&self, mut idx: usize) -> Vec<usize> {
        let mut occ = vec![0; self.modes.len()];
        for k in (0..self.modes.len()).rev() {
            let d = self.modes[k].cutoff + 1;
            occ[k] = idx % d;
            idx /= d;
        }
        occ
    }

    /// Same layout with modes renamed through `map: (old, new)` pairs.
    pub fn renamed(&self, map: &[(&str, &str)]) -> Result<Self> {
        let mut modes = self.modes.clone();
        for (old, new) in map {
            let k = self.mode_index(old)?;
            modes[k].name = new.to_string();
        }
        Self::new(modes.into_iter().map(|m| (m.name, m.cutoff)))
    }

    /// Concatenation of two layouts (mode names must stay unique).
    pub fn join(&self, other: &Self) -> Result<Self> {
        Self::new(
            self.modes
                .iter()
                .chain(&other.modes)
                .map(|m| (m.name.clone(), m.cutoff)),
        )
    }

    /// Offsets of all basis states whose occupation vanishes on the two given
    /// modes; adding `i * stride(p) + j * stride(q)` reaches any `(i, j)`
    /// occupation of the pair. Used to sweep a two-mode operator over the
    /// rest of the register.
    pub(crate) fn rest_offsets(&self, p: usize, q: usize) -> Vec<usize> {
        let mut offsets = vec![0usize];
        for (k, m) in self.modes.iter().enumerate() {
            if k == p || k == q {
                continue;
            }
            let stride = self.stride(k);
            let mut next = Vec::with_capacity(offsets.len() * (m.cutoff + 1));
            for n in 0..=m.cutoff {
                next.extend(offsets.iter().map(|&b| b + n * stride));
            }
            offsets = next;
        }
        offsets
    }
}

/// Complex amplitude vector over a layout's truncated photon-number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub layout: ModeLayout,
    pub amplitudes: Array1<C64>,
}

impl FockVector {
    pub fn new(layout: ModeLayout, amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "vector length {} vs layout dimension {}",
                amplitudes.len(),
                layout.dim()
            )));
        }
        Ok(Self { layout, amplitudes })
    }

    pub fn zero(layout: ModeLayout) -> Self {
        let dim = layout.dim();
        Self { layout, amplitudes: Array1::zeros(dim) }
    }

    pub fn vacuum(layout: ModeLayout) -> Self {
        let mut v = Self::zero(layout);
        v.amplitudes[0] = C64::new(1.0, 0.0);
        v
    }

    /// Basis state for an occupation tuple.
    pub fn basis_state(layout: ModeLayout, occ: &[usize]) -> Self {
        let idx = layout.index_of(occ);
        let mut v = Self::zero(layout);
        v.amplitudes[idx] = C64::new(1.0, 0.0);
        v
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_same_layout(&other.layout)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { layout: self.layout.clone(), amplitudes: self.amplitudes.mapv(|a| a * c) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_layout(&other.layout)?;
        Ok(Self {
            layout: self.layout.clone(),
            amplitudes: &self.amplitudes + &other.amplitudes,
        })
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        self.scaled(C64::new(1.0 / n, 0.0))
    }

    /// Tensor product; mode names must be disjoint, result order is
    /// `self` modes then `other` modes.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.join(&other.layout)?;
        let (da, db) = (self.amplitudes.len(), other.amplitudes.len());
        let mut amplitudes = Array1::zeros(da * db);
        for i in 0..da {
            let ai = self.amplitudes[i];
            if ai == C64::default() {
                continue;
            }
            for j in 0..db {
                amplitudes[i * db + j] = ai * other.amplitudes[j];
            }
        }
        Ok(Self { layout, amplitudes })
    }

    /// Expectation of a diagonal observable given as eigenvalue per
    /// occupation tuple.
    pub fn expect_diag(&self, eigenvalue: impl Fn(&[usize]) -> f64) -> f64 {
        let n_modes = self.layout.n_modes();
        let mut occ = vec![0usize; n_modes];
        let mut acc = 0.0;
        for a in self.amplitudes.iter() {
            if *a != C64::default() {
                acc += eigenvalue(&occ) * a.norm_sqr();
            }
            // row-major occupation counter
            for k in (0..n_modes).rev() {
                if occ[k] < self.layout.modes()[k].cutoff {
                    occ[k] += 1;
                    break;
                }
                occ[k] = 0;
            }
        }
        acc
    }

    /// Apply a dense operator living on the two named modes (identity on the
    /// rest). `op` is indexed row-major over `(mode_x, mode_y)` occupations.
    pub fn apply_two_mode(&self, mode_x: &str, mode_y: &str, op: &Array2<C64>) -> Result<Self> {
        let p = self.layout.mode_index(mode_x)?;
        let q = self.layout.mode_index(mode_y)?;
        let (dp, dq) = (
            self.layout.modes()[p].cutoff + 1,
            self.layout.modes()[q].cutoff + 1,
        );
        let d = dp * dq;
        if op.nrows() != d || op.ncols() != d {
            return Err(Error::ShapeMismatch { rows: op.nrows(), cols: op.ncols(), dim: d });
        }
        let (sp, sq) = (self.layout.stride(p), self.layout.stride(q));
        let mut out = Array1::zeros(self.amplitudes.len());
        let mut sub = vec![C64::default(); d];
        for base in self.layout.rest_offsets(p, q) {
            for i in 0..dp {
                for j in 0..dq {
                    sub[i * dq + j] = self.amplitudes[base + i * sp + j * sq];
                }
            }
            for (r, row) in op.rows().into_iter().enumerate() {
                let mut acc = C64::default();
                for (c, m) in row.iter().enumerate() {
                    acc += *m * sub[c];
                }
                out[base + (r / dq) * sp + (r % dq) * sq] = acc;
            }
        }
        Ok(Self { layout: self.layout.clone(), amplitudes: out })
    }

    fn check_same_layout(&self, other: &ModeLayout) -> Result<()> {
        if self.layout != *other {
            return Err(Error::LayoutMismatch(format!(
                "{:?} vs {:?}",
                self.layout.modes().iter().map(|m| &m.name).collect::<Vec<_>>(),
                other.modes().iter().map(|m| &m.name).collect::<Vec<_>>()
            )));
        }
        Ok(())
    }
}

/// Dense complex matrix acting on a layout's basis. The `is_hermitian` /
/// `is_unitary` flags are advisory and validated on demand.
#[derive(Debug, Clone)]
pub struct FockOperator {
    pub layout: ModeLayout,
    pub matrix: Array2<C64>,
    pub is_hermitian: bool,
    pub is_unitary: bool,
}

impl FockOperator {
    pub fn new(layout: ModeLayout, matrix: Array2<C64>) -> Result<Self> {
        let dim = layout.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::ShapeMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                dim,
            });
        }
        Ok(Self { layout, matrix, is_hermitian: false, is_unitary: false })
    }

    pub fn identity(layout: ModeLayout) -> Self {
        let dim = layout.dim();
        Self {
            layout,
            matrix: Array2::eye(dim),
            is_hermitian: true,
            is_unitary: true,
        }
    }

    pub fn from_diagonal(layout: ModeLayout, diag: &[f64]) -> Result<Self> {
        let dim = layout.dim();
        if diag.len() != dim {
            return Err(Error::ShapeMismatch { rows: diag.len(), cols: diag.len(), dim });
        }
        let mut matrix = Array2::zeros((dim, dim));
        for (i, &v) in diag.iter().enumerate() {
            matrix[(i, i)] = C64::new(v, 0.0);
        }
        Ok(Self { layout, matrix, is_hermitian: true, is_unitary: false })
    }

    pub fn flagged(mut self, hermitian: bool, unitary: bool) -> Self {
        self.is_hermitian = hermitian;
        self.is_unitary = unitary;
        self
    }

    pub fn dagger(&self) -> Self {
        let matrix = self.matrix.t().mapv(|a| a.conj());
        Self {
            layout: self.layout.clone(),
            matrix,
            is_hermitian: self.is_hermitian,
            is_unitary: self.is_unitary,
        }
    }

    /// Operator product `self * other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch("operator product".into()));
        }
        Ok(Self {
            layout: self.layout.clone(),
            matrix: self.matrix.dot(&other.matrix),
            is_hermitian: false,
            is_unitary: self.is_unitary && other.is_unitary,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch("operator sum".into()));
        }
        Ok(Self {
            layout: self.layout.clone(),
            matrix: &self.matrix + &other.matrix,
            is_hermitian: self.is_hermitian && other.is_hermitian,
            is_unitary: false,
        })
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            layout: self.layout.clone(),
            matrix: self.matrix.mapv(|a| a * c),
            is_hermitian: self.is_hermitian && c.im == 0.0,
            is_unitary: false,
        }
    }

    /// Kronecker composition consistent with basis indexing (self's modes
    /// first).
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.join(&other.layout)?;
        let matrix = ndarray::linalg::kron(&self.matrix, &other.matrix);
        Ok(Self {
            layout,
            matrix,
            is_hermitian: self.is_hermitian && other.is_hermitian,
            is_unitary: self.is_unitary && other.is_unitary,
        })
    }

    pub fn apply(&self, state: &FockVector) -> Result<FockVector> {
        state.check_same_layout(&self.layout)?;
        FockVector::new(self.layout.clone(), self.matrix.dot(&state.amplitudes))
    }

    /// `max |M - M^dagger|`, the advertised Hermiticity defect.
    pub fn hermiticity_defect(&self) -> f64 {
        let dim = self.matrix.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in i..dim {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `max |M^dagger M - I|` over the full truncated basis.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.dagger().matrix.dot(&self.matrix);
        let dim = gram.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j { C64::new(1.0, 0.0) } else { C64::default() };
                worst = worst.max((gram[(i, j)] - expect).norm());
            }
        }
        worst
    }
}

/// `<state|op|state>`; the imaginary part is reported so Hermiticity drift
/// stays detectable.
pub fn expectation(state: &FockVector, op: &FockOperator) -> Result<C64> {
    let applied = op.apply(state)?;
    state.inner(&applied)
}

/// Annihilate (`Lower`) or create (`Raise`) a photon in one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    Lower,
    Raise,
}

/// Standard ladder operator on the named mode, identity elsewhere.
/// Occupations above the cutoff are annihilated: `Raise` maps the top level
/// to the zero vector, which is the truncation convention used throughout.
pub fn ladder(layout: &ModeLayout, mode: &str, kind: LadderKind) -> Result<FockOperator> {
    let k = layout.mode_index(mode)?;
    let stride = layout.stride(k);
    let cutoff = layout.modes()[k].cutoff;
    let dim = layout.dim();
    let mut matrix = Array2::zeros((dim, dim));
    for idx in 0..dim {
        let n = idx / stride % (cutoff + 1);
        if n > 0 {
            // <n-1| a |n> = sqrt(n)
            let amp = C64::new((n as f64).sqrt(), 0.0);
            match kind {
                LadderKind::Lower => matrix[(idx - stride, idx)] = amp,
                LadderKind::Raise => matrix[(idx, idx - stride)] = amp,
            }
        }
    }
    FockOperator::new(layout.clone(), matrix)
}

/// Photon-number operator of one mode: diagonal, equals raise . lower.
pub fn number_operator(layout: &ModeLayout, mode: &str) -> Result<FockOperator> {
    let k = layout.mode_index(mode)?;
    let stride = layout.stride(k);
    let cutoff = layout.modes()[k].cutoff;
    let dim = layout.dim();
    let diag: Vec<f64> = (0..dim).map(|idx| (idx / stride % (cutoff + 1)) as f64).collect();
    FockOperator::from_diagonal(layout.clone(), &diag)
}

/// Poisson weight `e^{-a^2} a^{2n} / n!` left above the cutoff, i.e. the
/// squared-norm deficit of a truncated coherent state.
pub fn coherent_tail(alpha: f64, cutoff: usize) -> f64 {
    let x = alpha * alpha;
    let mut term = (-x).exp();
    let mut sum = term;
    for n in 1..=cutoff {
        term *= x / n as f64;
        sum += term;
    }
    (1.0 - sum).max(0.0)
}

/// Minimal admissible cutoff for amplitude `alpha`: the smallest `N >= 12`
/// whose Poisson tail stays below [`TAIL_TOLERANCE`].
pub fn min_cutoff(alpha: f64) -> usize {
    let mut n = MIN_CUTOFF;
    while coherent_tail(alpha, n) >= TAIL_TOLERANCE {
        n += 1;
    }
    n
}

/// Truncated coherent state `sum_n e^{-a^2/2} a^n / sqrt(n!) |n>` with real
/// amplitude. Not renormalized: the norm deficit is exactly the Poisson tail
/// and the cutoff precondition keeps it below [`TAIL_TOLERANCE`].
pub fn coherent_state(mode: impl Into<String>, alpha: f64, cutoff: usize) -> Result<FockVector> {
    let required = min_cutoff(alpha);
    if cutoff < required {
        return Err(Error::CutoffTooSmall { alpha, given: cutoff, required });
    }
    let layout = ModeLayout::single(mode, cutoff)?;
    let mut amplitudes = Array1::zeros(cutoff + 1);
    let mut c = (-alpha * alpha / 2.0).exp();
    amplitudes[0] = C64::new(c, 0.0);
    for n in 1..=cutoff {
        c *= alpha / (n as f64).sqrt();
        amplitudes[n] = C64::new(c, 0.0);
    }
    FockVector::new(layout, amplitudes)
}
