//! Block Gaussian Hermitian random matrices, partial traces, and Monte Carlo
//! estimates of the limit moments.
//!
//! The ground set `[n]` splits into `N1 = {0..n1}` and `N2 = {n1..n}` with
//! `n1 = floor(n^rho)`, so the asymptotic dimensions are `d1 = 0`, `d2 = 1`.
//! Matrices are stored with separate real and imaginary parts: complex
//! matrix products then run as three real `gemm`s, which is roughly an order
//! of magnitude faster than a generic complex multiply.

use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::jacobi::{MomentMethod, MomentTable};
use crate::{Error, MeixnerParams, Result};

/// Tolerance on the imaginary residue of partial traces of Hermitian words.
pub const IMAG_TOLERANCE: f64 = 1e-10;

/// Monte Carlo moment order cap (variance grows quickly with the power).
pub const MC_MAX_MOMENT: usize = 8;

/// Selector for the two partial traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockId {
    N1,
    N2,
}

/// Block geometry of the matrix ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    n: usize,
    n1: usize,
}

impl BlockSpec {
    /// Geometry with `n1 = floor(n^rho)`, `rho` in `(0, 1)`.
    pub fn with_exponent(n: usize, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::BlockExponent(rho));
        }
        let n1 = (n as f64).powf(rho).floor() as usize;
        Self::explicit(n, n1)
    }

    pub fn explicit(n: usize, n1: usize) -> Result<Self> {
        if n1 < 1 || n1 >= n {
            return Err(Error::BlockSizes { n1, n });
        }
        Ok(BlockSpec { n, n1 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n - self.n1
    }

    pub fn block_range(&self, block: BlockId) -> Range<usize> {
        match block {
            BlockId::N1 => 0..self.n1,
            BlockId::N2 => self.n1..self.n,
        }
    }

    fn block_of(&self, i: usize) -> usize {
        usize::from(i >= self.n1)
    }

    /// Finite-size dimension ratios `(|N1|/n, |N2|/n)`; they tend to the
    /// asymptotic dimensions `(0, 1)` under the exponent schedule.
    pub fn dimension_ratios(&self) -> (f64, f64) {
        let n = self.n as f64;
        (self.n1 as f64 / n, self.n2() as f64 / n)
    }
}

/// Symmetric 2x2 variance matrix of a block matrix; `v12 = v21`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceMatrix {
    pub v11: f64,
    pub v12: f64,
    pub v22: f64,
}

impl VarianceMatrix {
    pub fn new(v11: f64, v12: f64, v22: f64) -> Result<Self> {
        for v in [v11, v12, v22] {
            if !(v >= 0.0) {
                return Err(Error::NegativeVariance(v));
            }
        }
        Ok(VarianceMatrix { v11, v12, v22 })
    }

    fn entry(&self, p: usize, q: usize) -> f64 {
        match (p, q) {
            (0, 0) => self.v11,
            (1, 1) => self.v22,
            _ => self.v12,
        }
    }

    /// `beta1 = v21`, the off-diagonal block variance.
    pub fn beta1(&self) -> f64 {
        self.v12
    }

    /// `beta2 = v22`, the balanced diagonal block variance.
    pub fn beta2(&self) -> f64 {
        self.v22
    }
}

/// Per-label matrix parameters: diagonal shifts and block variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixParams {
    pub a1: f64,
    pub a2: f64,
    pub v: VarianceMatrix,
}

impl MatrixParams {
    pub fn new(a1: f64, a2: f64, v: VarianceMatrix) -> Self {
        MatrixParams { a1, a2, v }
    }

    /// The free Meixner law this matrix converges to under `tau_1`.
    pub fn meixner(&self) -> MeixnerParams {
        MeixnerParams::new(self.a1, self.a2, self.v.beta1(), self.v.beta2())
            .expect("variances validated non-negative")
    }

    /// `B = D V` with `D = diag(d1, d2)`; with `d1 = 0`, `d2 = 1` this
    /// collapses to the second row of `V`. Reported for diagnostics.
    pub fn b_matrix(&self) -> [[f64; 2]; 2] {
        [[0.0, 0.0], [self.v.v12, self.v.v22]]
    }
}

/// A family of independent matrices sharing one block geometry.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub geometry: BlockSpec,
    pub labels: Vec<MatrixParams>,
    pub trials: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    fn check_label(&self, u: usize) -> Result<()> {
        if u >= self.labels.len() {
            return Err(Error::UnknownLabel {
                label: u,
                labels: self.labels.len(),
            });
        }
        Ok(())
    }
}

/// Dense complex matrix stored as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl CMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CMatrix {
            re: DMatrix::zeros(nrows, ncols),
            im: DMatrix::zeros(nrows, ncols),
        }
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    pub fn re(&self) -> &DMatrix<f64> {
        &self.re
    }

    pub fn im(&self) -> &DMatrix<f64> {
        &self.im
    }

    pub fn from_complex(m: &DMatrix<Complex64>) -> Self {
        CMatrix {
            re: m.map(|z| z.re),
            im: m.map(|z| z.im),
        }
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| {
            Complex64::new(self.re[(i, j)], self.im[(i, j)])
        })
    }

    /// Columns `range` of the identity matrix.
    pub fn identity_columns(n: usize, range: Range<usize>) -> Self {
        let mut m = CMatrix::zeros(n, range.len());
        for (c, i) in range.enumerate() {
            m.re[(i, c)] = 1.0;
        }
        m
    }

    /// Complex product by the three-multiplication scheme
    /// (`re = P1 - P2`, `im = P3 - P1 - P2`), each factor a real `gemm`.
    pub fn mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.ncols(), rhs.nrows());
        let (r, c) = (self.nrows(), rhs.ncols());
        let mut p1 = DMatrix::zeros(r, c);
        p1.gemm(1.0, &self.re, &rhs.re, 0.0);
        let mut p2 = DMatrix::zeros(r, c);
        p2.gemm(1.0, &self.im, &rhs.im, 0.0);
        let sa = &self.re + &self.im;
        let sb = &rhs.re + &rhs.im;
        let mut p3 = DMatrix::zeros(r, c);
        p3.gemm(1.0, &sa, &sb, 0.0);
        let re = &p1 - &p2;
        let im = p3 - p1 - p2;
        CMatrix { re, im }
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.nrows().min(self.ncols()))
            .map(|i| Complex64::new(self.re[(i, i)], self.im[(i, i)]))
            .collect()
    }

    /// Diagonal of `self * rhs` without forming the product.
    pub fn product_diagonal(&self, rhs: &CMatrix) -> Vec<Complex64> {
        assert_eq!(self.ncols(), rhs.nrows());
        let n = self.nrows().min(rhs.ncols());
        let k = self.ncols();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut re = 0.0;
            let mut im = 0.0;
            for t in 0..k {
                let (ar, ai) = (self.re[(i, t)], self.im[(i, t)]);
                let (br, bi) = (rhs.re[(t, i)], rhs.im[(t, i)]);
                re += ar * br - ai * bi;
                im += ar * bi + ai * br;
            }
            out.push(Complex64::new(re, im));
        }
        out
    }

    /// Add `a1` to the first `n1` diagonal entries and `a2` to the rest.
    pub fn add_diagonal_blocks(&mut self, n1: usize, a1: f64, a2: f64) {
        let n = self.nrows().min(self.ncols());
        for i in 0..n {
            self.re[(i, i)] += if i < n1 { a1 } else { a2 };
        }
    }

    /// `max |A - A^dagger|`; zero for matrices built by mirrored sampling.
    pub fn max_adjoint_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                let dre = (self.re[(i, j)] - self.re[(j, i)]).abs();
                let dim = (self.im[(i, j)] + self.im[(j, i)]).abs();
                worst = worst.max(dre).max(dim);
            }
        }
        worst
    }
}

/// One draw of a block Gaussian Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianSample {
    pub matrix: CMatrix,
    pub label: usize,
    pub draw: u64,
}

/// Seed for `(trial, label)` derived from the master seed by three rounds of
/// splitmix64 finalization; each stream is independent and reproducible.
pub fn derive_seed(master: u64, trial: u64, label: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let mut s = mix(master);
    s = mix(s ^ trial.wrapping_mul(0xA24B_AED4_963E_E407));
    s = mix(s ^ label.wrapping_mul(0x9FB2_1C65_1E98_DF25));
    s
}

fn trial_rng(master: u64, trial: u64, label: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, trial, label))
}

/// Draw `Y(u, n)`: entry `(i, j)` in block `(p, q)` is complex Gaussian with
/// `E |Y_ij|^2 = v_pq / n`, split evenly between the real and imaginary
/// parts; diagonal entries are real with variance `v_qq / n`.
///
/// Draw order is fixed for reproducibility: rows in order, each row from the
/// diagonal rightwards, one normal per diagonal entry and two (real then
/// imaginary) per off-diagonal entry; zero-variance blocks still consume
/// their draws so that streams align across variance choices.
pub fn sample_matrix<R: Rng>(
    spec: &BlockSpec,
    v: &VarianceMatrix,
    label: usize,
    draw: u64,
    rng: &mut R,
) -> HermitianSample {
    let n = spec.n();
    let mut re = DMatrix::zeros(n, n);
    let mut im = DMatrix::zeros(n, n);
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let p = spec.block_of(i);
        let sigma_diag = (v.entry(p, p) * inv_n).sqrt();
        let g: f64 = rng.sample(StandardNormal);
        re[(i, i)] = sigma_diag * g;
        for j in (i + 1)..n {
            let q = spec.block_of(j);
            let sigma = (v.entry(p, q) * inv_n / 2.0).sqrt();
            let gr: f64 = rng.sample(StandardNormal);
            let gi: f64 = rng.sample(StandardNormal);
            re[(i, j)] = sigma * gr;
            im[(i, j)] = sigma * gi;
            re[(j, i)] = sigma * gr;
            im[(j, i)] = -sigma * gi;
        }
    }
    HermitianSample {
        matrix: CMatrix { re, im },
        label,
        draw,
    }
}

/// `M(u, n) = Y(u, n) + a1 I_1(n) + a2 I_2(n)`.
pub fn meixner_matrix(y: &HermitianSample, spec: &BlockSpec, params: &MatrixParams) -> CMatrix {
    let mut m = y.matrix.clone();
    m.add_diagonal_blocks(spec.n1(), params.a1, params.a2);
    m
}

/// Normalized partial trace over `N_j`, taking the real part. The imaginary
/// residue must stay below [`IMAG_TOLERANCE`]; a larger residue means a
/// non-Hermitian word was evaluated without the caller acknowledging it.
pub fn partial_trace(a: &DMatrix<Complex64>, block: BlockId, spec: &BlockSpec) -> Result<f64> {
    let range = spec.block_range(block);
    let len = range.len() as f64;
    let mut re = 0.0;
    let mut im = 0.0;
    for i in range {
        re += a[(i, i)].re;
        im += a[(i, i)].im;
    }
    re /= len;
    im /= len;
    if im.abs() > IMAG_TOLERANCE {
        return Err(Error::ImaginaryResidue {
            residue: im.abs(),
            tolerance: IMAG_TOLERANCE,
        });
    }
    Ok(re)
}

fn block_mean(diag: &[Complex64], range: Range<usize>) -> (f64, f64) {
    let len = range.len() as f64;
    let mut re = 0.0;
    let mut im = 0.0;
    for i in range {
        re += diag[i].re;
        im += diag[i].im;
    }
    (re / len, im / len)
}

/// Trial-indexed accumulator; sums run in trial order so results do not
/// depend on any scheduling.
struct MomentStats {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    trials: usize,
}

impl MomentStats {
    fn new(len: usize) -> Self {
        MomentStats {
            sum: vec![0.0; len],
            sumsq: vec![0.0; len],
            trials: 0,
        }
    }

    fn push(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.sum.len());
        for (k, &v) in values.iter().enumerate() {
            self.sum[k] += v;
            self.sumsq[k] += v * v;
        }
        self.trials += 1;
    }

    fn mean_stderr(&self) -> (Vec<f64>, Vec<f64>) {
        let t = self.trials as f64;
        let means: Vec<f64> = self.sum.iter().map(|s| s / t).collect();
        let stderr: Vec<f64> = self
            .sumsq
            .iter()
            .zip(&means)
            .map(|(&sq, &m)| {
                if self.trials < 2 {
                    0.0
                } else {
                    let var = ((sq - t * m * m) / (t - 1.0)).max(0.0);
                    (var / t).sqrt()
                }
            })
            .collect();
        (means, stderr)
    }
}

/// Diagonals of `M^k`, `k = 0..=m_max`, by full matrix powers: `M^2` and the
/// higher even/odd products come from at most three `gemm`s total.
fn power_diagonals_full(m: &CMatrix, m_max: usize) -> Vec<Vec<Complex64>> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(vec![Complex64::new(1.0, 0.0); n]);
    if m_max >= 1 {
        out.push(m.diagonal());
    }
    if m_max >= 2 {
        out.push(m.product_diagonal(m));
    }
    let m2 = if m_max >= 3 { Some(m.mul(m)) } else { None };
    if let Some(m2) = &m2 {
        out.push(m2.product_diagonal(m));
        if m_max >= 4 {
            out.push(m2.product_diagonal(m2));
        }
        let m3 = if m_max >= 5 { Some(m2.mul(m)) } else { None };
        if let Some(m3) = &m3 {
            out.push(m3.product_diagonal(m2));
            if m_max >= 6 {
                out.push(m3.product_diagonal(m3));
            }
            let m4 = if m_max >= 7 { Some(m3.mul(m)) } else { None };
            if let Some(m4) = &m4 {
                out.push(m4.product_diagonal(m3));
                if m_max >= 8 {
                    out.push(m4.product_diagonal(m4));
                }
            }
        }
    }
    out.truncate(m_max + 1);
    out
}

/// Diagonal entries of `M^k` over one block only, by repeated multiplication
/// against the identity restricted to the block's columns.
fn power_diagonals_restricted(
    m: &CMatrix,
    range: Range<usize>,
    m_max: usize,
) -> Vec<Vec<Complex64>> {
    let width = range.len();
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(vec![Complex64::new(1.0, 0.0); width]);
    let mut cols = CMatrix::identity_columns(m.nrows(), range.clone());
    for _ in 1..=m_max {
        cols = m.mul(&cols);
        let diag: Vec<Complex64> = range
            .clone()
            .enumerate()
            .map(|(c, i)| Complex64::new(cols.re[(i, c)], cols.im[(i, c)]))
            .collect();
        out.push(diag);
    }
    out
}

fn check_moment_budget(m_max: usize) -> Result<()> {
    if m_max > MC_MAX_MOMENT {
        return Err(Error::MomentBudget {
            m_max,
            max: MC_MAX_MOMENT,
        });
    }
    Ok(())
}

/// Monte Carlo estimates of `tau_block(M^m)`, `m = 0..=m_max`, by the
/// restricted-columns power scheme.
pub fn mc_moments(
    spec: &BlockSpec,
    params: &MatrixParams,
    label: usize,
    m_max: usize,
    trials: usize,
    seed: u64,
    block: BlockId,
) -> Result<MomentTable> {
    check_moment_budget(m_max)?;
    let range = spec.block_range(block);
    let mut stats = MomentStats::new(m_max + 1);
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64, label as u64);
        let y = sample_matrix(spec, &params.v, label, trial as u64, &mut rng);
        let m = meixner_matrix(&y, spec, params);
        let diags = power_diagonals_restricted(&m, range.clone(), m_max);
        let values = hermitian_trace_row(&diags, 0..range.len())?;
        stats.push(&values);
    }
    let (means, stderr) = stats.mean_stderr();
    Ok(MomentTable::with_stderr(
        means,
        stderr,
        MomentMethod::MonteCarlo,
    ))
}

/// Both partial traces of `M^m` from one stream of full matrix powers.
pub struct DualMoments {
    pub tau1: MomentTable,
    pub tau2: MomentTable,
}

pub fn mc_moments_dual(
    spec: &BlockSpec,
    params: &MatrixParams,
    label: usize,
    m_max: usize,
    trials: usize,
    seed: u64,
) -> Result<DualMoments> {
    check_moment_budget(m_max)?;
    let mut stats1 = MomentStats::new(m_max + 1);
    let mut stats2 = MomentStats::new(m_max + 1);
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64, label as u64);
        let y = sample_matrix(spec, &params.v, label, trial as u64, &mut rng);
        let m = meixner_matrix(&y, spec, params);
        let diags = power_diagonals_full(&m, m_max);
        let v1 = hermitian_trace_row(&diags, spec.block_range(BlockId::N1))?;
        let v2 = hermitian_trace_row(&diags, spec.block_range(BlockId::N2))?;
        stats1.push(&v1);
        stats2.push(&v2);
    }
    let (mean1, se1) = stats1.mean_stderr();
    let (mean2, se2) = stats2.mean_stderr();
    Ok(DualMoments {
        tau1: MomentTable::with_stderr(mean1, se1, MomentMethod::MonteCarlo),
        tau2: MomentTable::with_stderr(mean2, se2, MomentMethod::MonteCarlo),
    })
}

/// Partial traces of Hermitian powers: the imaginary residue is asserted.
fn hermitian_trace_row(diags: &[Vec<Complex64>], range: Range<usize>) -> Result<Vec<f64>> {
    diags
        .iter()
        .map(|diag| {
            let (re, im) = block_mean(diag, range.clone());
            if im.abs() > IMAG_TOLERANCE {
                return Err(Error::ImaginaryResidue {
                    residue: im.abs(),
                    tolerance: IMAG_TOLERANCE,
                });
            }
            Ok(re)
        })
        .collect()
}

/// Monte Carlo estimate of `tau_block(M(u_1) ... M(u_m))` for a word of
/// labels; matrices sharing a label within one trial are the same sample.
/// Mixed words need not be Hermitian, so the real part is taken knowingly
/// here and no residue error is raised.
pub fn mc_mixed_moments(
    espec: &EnsembleSpec,
    word: &[usize],
    block: BlockId,
) -> Result<(f64, f64)> {
    for &u in word {
        espec.check_label(u)?;
    }
    let spec = &espec.geometry;
    let range = spec.block_range(block);
    let mut stats = MomentStats::new(1);
    for trial in 0..espec.trials {
        let matrices = sample_word_matrices(espec, word, trial)?;
        let mut cols = CMatrix::identity_columns(spec.n(), range.clone());
        for &u in word.iter().rev() {
            cols = matrices[u].as_ref().expect("sampled").mul(&cols);
        }
        let diag: Vec<Complex64> = range
            .clone()
            .enumerate()
            .map(|(c, i)| Complex64::new(cols.re[(i, c)], cols.im[(i, c)]))
            .collect();
        let (re, _im) = block_mean(&diag, 0..diag.len());
        stats.push(&[re]);
    }
    let (means, stderr) = stats.mean_stderr();
    Ok((means[0], stderr[0]))
}

fn sample_word_matrices(
    espec: &EnsembleSpec,
    word: &[usize],
    trial: usize,
) -> Result<Vec<Option<CMatrix>>> {
    let mut out: Vec<Option<CMatrix>> = vec![None; espec.labels.len()];
    let mut used: Vec<usize> = word.to_vec();
    used.sort_unstable();
    used.dedup();
    for u in used {
        let params = &espec.labels[u];
        let mut rng = trial_rng(espec.seed, trial as u64, u as u64);
        let y = sample_matrix(&espec.geometry, &params.v, u, trial as u64, &mut rng);
        out[u] = Some(meixner_matrix(&y, &espec.geometry, params));
    }
    Ok(out)
}

/// Monte Carlo estimate of `tau_block( P_1(M(u_1)) ... P_k(M(u_k)) )` where
/// each element is a polynomial (ascending coefficients) in one matrix.
pub fn mc_polynomial_word(
    espec: &EnsembleSpec,
    elements: &[(usize, Vec<f64>)],
    block: BlockId,
) -> Result<(f64, f64)> {
    if elements.is_empty() {
        return Err(Error::BadWordShape);
    }
    for (u, coeffs) in elements {
        espec.check_label(*u)?;
        if coeffs.is_empty() {
            return Err(Error::BadWordShape);
        }
    }
    let word: Vec<usize> = elements.iter().map(|(u, _)| *u).collect();
    let spec = &espec.geometry;
    let range = spec.block_range(block);
    let mut stats = MomentStats::new(1);
    for trial in 0..espec.trials {
        let matrices = sample_word_matrices(espec, &word, trial)?;
        let mut cols = CMatrix::identity_columns(spec.n(), range.clone());
        for (u, coeffs) in elements.iter().rev() {
            let m = matrices[*u].as_ref().expect("sampled");
            cols = apply_matrix_polynomial(m, coeffs, &cols);
        }
        let diag: Vec<Complex64> = range
            .clone()
            .enumerate()
            .map(|(c, i)| Complex64::new(cols.re[(i, c)], cols.im[(i, c)]))
            .collect();
        let (re, _im) = block_mean(&diag, 0..diag.len());
        stats.push(&[re]);
    }
    let (means, stderr) = stats.mean_stderr();
    Ok((means[0], stderr[0]))
}

/// Horner evaluation of `p(M) * cols`.
fn apply_matrix_polynomial(m: &CMatrix, coeffs: &[f64], cols: &CMatrix) -> CMatrix {
    let degree = coeffs.len() - 1;
    let mut acc = cols.clone();
    acc.re *= coeffs[degree];
    acc.im *= coeffs[degree];
    for k in (0..degree).rev() {
        let mut next = m.mul(&acc);
        let c = coeffs[k];
        if c != 0.0 {
            next.re.zip_apply(&cols.re, |y, x| *y += c * x);
            next.im.zip_apply(&cols.im, |y, x| *y += c * x);
        }
        acc = next;
    }
    acc
}

/// One row of a finite-size convergence sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub n1: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub limit: f64,
    /// Least-squares slope of `ln |error|` against `ln n`, negated; `None`
    /// when an error vanishes or fewer than two sizes were run.
    pub decay_exponent: Option<f64>,
}

/// Estimate `tau_block(M^m)` at each size in `n_list` (strictly increasing)
/// and report the empirical decay of the error against the known limit.
#[allow(clippy::too_many_arguments)]
pub fn finite_size_sweep(
    params: &MatrixParams,
    label: usize,
    m: usize,
    n_list: &[usize],
    rho: f64,
    trials: usize,
    seed: u64,
    limit: f64,
    block: BlockId,
) -> Result<SweepReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadSizeList);
    }
    check_moment_budget(m)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let spec = BlockSpec::with_exponent(n, rho)?;
        let table = mc_moments(&spec, params, label, m, trials, seed, block)?;
        let estimate = table.moments[m];
        let stderr = table.stderr.as_ref().map(|s| s[m]).unwrap_or(0.0);
        rows.push(SweepRow {
            n,
            n1: spec.n1(),
            estimate,
            stderr,
            abs_error: (estimate - limit).abs(),
        });
    }
    let decay_exponent = fit_decay(&rows);
    Ok(SweepReport {
        rows,
        limit,
        decay_exponent,
    })
}

fn fit_decay(rows: &[SweepRow]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|r| r.abs_error == 0.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.n as f64).ln(), r.abs_error.ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return None;
    }
    Some(-(n * sxy - sx * sy) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{meixner_moment_fock, meixner_moment_fock_psi2};
    use approx::assert_relative_eq;

    fn small_spec() -> BlockSpec {
        BlockSpec::explicit(8, 2).unwrap()
    }

    fn unit_params() -> MatrixParams {
        MatrixParams::new(0.0, 0.0, VarianceMatrix::new(0.0, 1.0, 1.0).unwrap())
    }

    #[test]
    fn block_spec_schedule() {
        for (n, n1) in [(64usize, 8usize), (128, 11), (256, 16), (512, 22)] {
            let spec = BlockSpec::with_exponent(n, 0.5).unwrap();
            assert_eq!(spec.n1(), n1, "n = {n}");
        }
        assert!(matches!(
            BlockSpec::with_exponent(64, 1.2),
            Err(Error::BlockExponent(_))
        ));
        assert!(matches!(
            BlockSpec::explicit(4, 4),
            Err(Error::BlockSizes { .. })
        ));
        let (d1, d2) = BlockSpec::explicit(100, 10).unwrap().dimension_ratios();
        assert_relative_eq!(d1, 0.1);
        assert_relative_eq!(d2, 0.9);
    }

    #[test]
    fn sampling_is_deterministic_and_hermitian() {
        let spec = small_spec();
        let v = VarianceMatrix::new(0.5, 1.0, 2.0).unwrap();
        let mut rng_a = trial_rng(42, 3, 1);
        let mut rng_b = trial_rng(42, 3, 1);
        let a = sample_matrix(&spec, &v, 1, 3, &mut rng_a);
        let b = sample_matrix(&spec, &v, 1, 3, &mut rng_b);
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.matrix.max_adjoint_residual(), 0.0);
        let mut rng_c = trial_rng(43, 3, 1);
        let c = sample_matrix(&spec, &v, 1, 3, &mut rng_c);
        assert_ne!(a.matrix, c.matrix);
    }

    #[test]
    fn zero_variance_block_vanishes() {
        let spec = BlockSpec::explicit(10, 3).unwrap();
        let v = VarianceMatrix::new(0.0, 1.0, 1.0).unwrap();
        let mut rng = trial_rng(7, 0, 0);
        let y = sample_matrix(&spec, &v, 0, 0, &mut rng);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(y.matrix.re[(i, j)], 0.0);
                assert_eq!(y.matrix.im[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn entry_variance_statistic() {
        // E |Y_ij|^2 over many draws at fixed (i, j) in N2 x N1 is v12 / n
        // within three standard errors.
        let spec = small_spec();
        let v = VarianceMatrix::new(0.3, 1.7, 0.9).unwrap();
        let draws = 100_000;
        let mut rng = trial_rng(11, 0, 0);
        let (i, j) = (5usize, 1usize); // i in N2, j in N1
        let mut sum = 0.0;
        for _ in 0..draws {
            let y = sample_matrix(&spec, &v, 0, 0, &mut rng);
            let z = Complex64::new(y.matrix.re[(i, j)], y.matrix.im[(i, j)]);
            sum += z.norm_sqr();
        }
        let mean = sum / draws as f64;
        let expect = v.v12 / spec.n() as f64;
        // sd of |Y|^2 equals v/n, so the standard error is (v/n)/sqrt(draws)
        let se = expect / (draws as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * se,
            "mean {mean} vs {expect} (se {se})"
        );
    }

    #[test]
    fn meixner_matrix_shifts_diagonal() {
        let spec = BlockSpec::explicit(6, 2).unwrap();
        let v = VarianceMatrix::new(0.0, 0.0, 0.0).unwrap();
        let params = MatrixParams::new(1.0, 2.0, v);
        let mut rng = trial_rng(1, 0, 0);
        let y = sample_matrix(&spec, &v, 0, 0, &mut rng);
        let m = meixner_matrix(&y, &spec, &params);
        let diag: Vec<f64> = m.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        // trace identity for a random draw
        let v = VarianceMatrix::new(0.4, 1.0, 1.3).unwrap();
        let params = MatrixParams::new(0.7, -0.2, v);
        let y = sample_matrix(&spec, &v, 0, 0, &mut rng);
        let m = meixner_matrix(&y, &spec, &params);
        let tr_y: f64 = y.matrix.diagonal().iter().map(|z| z.re).sum();
        let tr_m: f64 = m.diagonal().iter().map(|z| z.re).sum();
        assert_relative_eq!(
            tr_m,
            tr_y + 2.0 * 0.7 + 4.0 * (-0.2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn partial_trace_basics() {
        let spec = BlockSpec::explicit(5, 2).unwrap();
        let id = DMatrix::<Complex64>::identity(5, 5);
        assert_relative_eq!(partial_trace(&id, BlockId::N1, &spec).unwrap(), 1.0);
        assert_relative_eq!(partial_trace(&id, BlockId::N2, &spec).unwrap(), 1.0);
        let mut i1 = DMatrix::<Complex64>::zeros(5, 5);
        i1[(0, 0)] = Complex64::new(1.0, 0.0);
        i1[(1, 1)] = Complex64::new(1.0, 0.0);
        assert_relative_eq!(partial_trace(&i1, BlockId::N1, &spec).unwrap(), 1.0);
        assert_relative_eq!(partial_trace(&i1, BlockId::N2, &spec).unwrap(), 0.0);
        let mut bad = DMatrix::<Complex64>::zeros(5, 5);
        bad[(0, 0)] = Complex64::new(0.0, 1.0);
        assert!(matches!(
            partial_trace(&bad, BlockId::N1, &spec),
            Err(Error::ImaginaryResidue { .. })
        ));
    }

    #[test]
    fn complex_product_matches_naive() {
        let mut rng = trial_rng(5, 0, 0);
        let spec = BlockSpec::explicit(7, 3).unwrap();
        let v = VarianceMatrix::new(0.6, 1.1, 0.8).unwrap();
        let a = sample_matrix(&spec, &v, 0, 0, &mut rng).matrix;
        let b = sample_matrix(&spec, &v, 0, 1, &mut rng).matrix;
        let fast = a.mul(&b).to_complex();
        let naive = a.to_complex() * b.to_complex();
        for i in 0..7 {
            for j in 0..7 {
                assert!((fast[(i, j)] - naive[(i, j)]).norm() < 1e-12);
            }
        }
        // product_diagonal agrees with the full product
        let diag = a.product_diagonal(&b);
        for i in 0..7 {
            assert!((diag[i] - naive[(i, i)]).norm() < 1e-12);
        }
    }

    #[test]
    fn restricted_and_full_power_paths_agree() {
        let spec = BlockSpec::explicit(24, 5).unwrap();
        let params = MatrixParams::new(0.3, -0.4, VarianceMatrix::new(0.2, 1.0, 1.5).unwrap());
        let restricted = mc_moments(&spec, &params, 0, 6, 20, 99, BlockId::N1).unwrap();
        let dual = mc_moments_dual(&spec, &params, 0, 6, 20, 99).unwrap();
        for m in 0..=6 {
            assert_relative_eq!(
                restricted.moments[m],
                dual.tau1.moments[m],
                epsilon = 1e-10,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn mc_moment_edge_rows() {
        let spec = small_spec();
        let table = mc_moments(&spec, &unit_params(), 0, 1, 30, 5, BlockId::N1).unwrap();
        assert_eq!(table.moments[0], 1.0);
        assert_eq!(table.stderr.as_ref().unwrap()[0], 0.0);
        // m = 1 estimates a1 = 0 up to noise
        let se = table.stderr.as_ref().unwrap()[1];
        assert!(table.moments[1].abs() <= 4.0 * se + 0.05);
        assert!(matches!(
            mc_moments(&spec, &unit_params(), 0, 9, 2, 5, BlockId::N1),
            Err(Error::MomentBudget { .. })
        ));
    }

    #[test]
    fn zero_offdiagonal_variance_kills_tau1_second_moment() {
        // With v11 = v12 = 0, rows of N1 vanish entirely so tau_1(M^2) = 0
        // exactly, trial by trial.
        let spec = BlockSpec::explicit(16, 4).unwrap();
        let params = MatrixParams::new(0.0, 0.0, VarianceMatrix::new(0.0, 0.0, 1.0).unwrap());
        let table = mc_moments(&spec, &params, 0, 2, 25, 3, BlockId::N1).unwrap();
        assert_eq!(table.moments[2], 0.0);
        assert_eq!(table.stderr.unwrap()[2], 0.0);
    }

    #[test]
    fn moments_converge_to_fock_oracle() {
        // Moderate size keeps this test quick; the band allows for the
        // systematic finite-size error, which scales like n1/n + 1/n1 (about
        // 10% relative here). The acceptance suite runs the full-scale
        // version and documents the deficit precisely.
        let spec = BlockSpec::with_exponent(192, 0.5).unwrap();
        let params = MatrixParams::new(0.0, 0.0, VarianceMatrix::new(0.0, 1.0, 2.0).unwrap());
        let p = params.meixner();
        let dual = mc_moments_dual(&spec, &params, 0, 4, 120, 2024).unwrap();
        for m in 0..=4 {
            let oracle = meixner_moment_fock(&p, m, 4).unwrap();
            let se = dual.tau1.stderr.as_ref().unwrap()[m];
            let band = (4.0 * se).max(0.15 * oracle.abs() + 0.05);
            assert!(
                (dual.tau1.moments[m] - oracle).abs() <= band,
                "tau1 m={m}: {} vs {oracle} (band {band})",
                dual.tau1.moments[m]
            );
            let oracle2 = meixner_moment_fock_psi2(&p, m, 4).unwrap();
            let se2 = dual.tau2.stderr.as_ref().unwrap()[m];
            let band2 = (4.0 * se2).max(0.15 * oracle2.abs() + 0.05);
            assert!(
                (dual.tau2.moments[m] - oracle2).abs() <= band2,
                "tau2 m={m}: {} vs {oracle2} (band {band2})",
                dual.tau2.moments[m]
            );
        }
    }

    #[test]
    fn vanishing_v22_limits_come_from_the_degenerate_route() {
        // With v22 = 0 only the off-diagonal block survives under tau_1 and
        // the limit moments are those of (a1, a2, b1, 0).
        use crate::fock::meixner_moment_fock_beta2_zero;
        let spec = BlockSpec::with_exponent(192, 0.5).unwrap();
        let params = MatrixParams::new(0.0, 0.5, VarianceMatrix::new(0.0, 1.0, 0.0).unwrap());
        let table = mc_moments(&spec, &params, 0, 4, 150, 11, BlockId::N1).unwrap();
        for m in 0..=4 {
            let oracle = meixner_moment_fock_beta2_zero(&params.meixner(), m, 3).unwrap();
            let se = table.stderr.as_ref().unwrap()[m];
            let band = (4.0 * se).max(0.15 * oracle.abs() + 0.05);
            assert!(
                (table.moments[m] - oracle).abs() <= band,
                "m={m}: {} vs {oracle}",
                table.moments[m]
            );
        }
    }

    #[test]
    fn evanescent_block_variance_is_a_finite_size_effect() {
        // v11 = 0 and v11 = v21 share the same limit; at finite n they
        // differ by an O(n1/n) correction, here well under 10%.
        let spec = BlockSpec::with_exponent(192, 0.5).unwrap();
        let v_zero = VarianceMatrix::new(0.0, 1.0, 2.0).unwrap();
        let v_full = VarianceMatrix::new(1.0, 1.0, 2.0).unwrap();
        let a = mc_moments(
            &spec,
            &MatrixParams::new(0.0, 0.0, v_zero),
            0,
            4,
            120,
            2024,
            BlockId::N1,
        )
        .unwrap();
        let b = mc_moments(
            &spec,
            &MatrixParams::new(0.0, 0.0, v_full),
            0,
            4,
            120,
            2024,
            BlockId::N1,
        )
        .unwrap();
        for m in 0..=4 {
            let scale = a.moments[m].abs().max(1.0);
            assert!(
                (a.moments[m] - b.moments[m]).abs() <= 0.1 * scale,
                "m={m}: {} vs {}",
                a.moments[m],
                b.moments[m]
            );
        }
    }

    #[test]
    fn mixed_moments_orthogonality() {
        let geometry = BlockSpec::with_exponent(128, 0.5).unwrap();
        let v = VarianceMatrix::new(0.0, 1.0, 1.5).unwrap();
        let espec = EnsembleSpec {
            geometry,
            labels: vec![
                MatrixParams::new(0.0, 0.0, v),
                MatrixParams::new(0.0, 0.0, v),
            ],
            trials: 150,
            seed: 31,
        };
        let (same, se_same) = mc_mixed_moments(&espec, &[0, 0], BlockId::N1).unwrap();
        assert!(
            (same - 1.0).abs() <= (3.0 * se_same).max(0.1),
            "same-label second moment {same} (se {se_same})"
        );
        let (cross, se_cross) = mc_mixed_moments(&espec, &[0, 1], BlockId::N1).unwrap();
        assert!(
            cross.abs() <= (3.0 * se_cross).max(0.05),
            "cross-label moment {cross} (se {se_cross})"
        );
        assert!(matches!(
            mc_mixed_moments(&espec, &[0, 2], BlockId::N1),
            Err(Error::UnknownLabel { .. })
        ));
    }

    #[test]
    fn sweep_shapes_and_guards() {
        let params = unit_params();
        let report =
            finite_size_sweep(&params, 0, 0, &[16, 32], 0.5, 4, 1, 1.0, BlockId::N1).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert_eq!(row.estimate, 1.0);
            assert_eq!(row.abs_error, 0.0);
        }
        assert_eq!(report.decay_exponent, None);
        assert!(matches!(
            finite_size_sweep(&params, 0, 2, &[32, 16], 0.5, 4, 1, 1.0, BlockId::N1),
            Err(Error::BadSizeList)
        ));
    }

    #[test]
    fn seed_derivation_separates_streams() {
        let a = derive_seed(1, 0, 0);
        let b = derive_seed(1, 1, 0);
        let c = derive_seed(1, 0, 1);
        let d = derive_seed(2, 0, 0);
        assert!(a != b && a != c && a != d && b != c);
        assert_eq!(a, derive_seed(1, 0, 0));
    }

    #[test]
    fn polynomial_word_constant_and_identity() {
        let geometry = BlockSpec::explicit(12, 3).unwrap();
        let espec = EnsembleSpec {
            geometry,
            labels: vec![unit_params()],
            trials: 5,
            seed: 9,
        };
        // constant polynomial 1 -> tau(I) = 1 with zero spread
        let (est, se) = mc_polynomial_word(&espec, &[(0, vec![1.0])], BlockId::N1).unwrap();
        assert_relative_eq!(est, 1.0, epsilon = 1e-12);
        assert!(se < 1e-12);
        // linear polynomial reproduces the mixed-moment path
        let (lin, _) = mc_polynomial_word(&espec, &[(0, vec![0.0, 1.0])], BlockId::N1).unwrap();
        let (word, _) = mc_mixed_moments(&espec, &[0], BlockId::N1).unwrap();
        assert_relative_eq!(lin, word, epsilon = 1e-12);
    }
}

