//! Truncated matricially free Fock space of tracial type, sparse creation
//! and annihilation operators, and exact vacuum-state moments.
//!
//! The space is spanned by two vacua and by words over a finite label set.
//! A word `e2(u1,...,uk)` lives in the second summand; a word
//! `e2(u1,...,u_{k-1}) (x) e1(u_k)` lives in the first. Creation prepends a
//! letter; words at the truncation depth are annihilated by creation, which
//! keeps every moment of length `<= 2 (depth - 1)` exact.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::{Error, MeixnerParams, Result};

pub type Label = usize;

/// Cap on the truncated basis size; enumeration fails loudly beyond it.
pub const BASIS_BUDGET: usize = 4_000_000;

/// Maximum polynomial degree accepted by moment evaluators downstream.
pub const MAX_DEGREE: usize = 6;

/// A basis vector of the truncated space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BasisWord {
    Omega1,
    Omega2,
    Word {
        letters: Vec<Label>,
        /// `true` encodes `e2(u1,...,u_{k-1}) (x) e1(u_k)`, `false` encodes
        /// `e2(u1,...,uk)`.
        terminal_e1: bool,
    },
}

impl BasisWord {
    /// Whether the vector lies in the first summand (vacuum `Omega1` or a
    /// word ending in `e1`).
    pub fn in_m1(&self) -> bool {
        match self {
            BasisWord::Omega1 => true,
            BasisWord::Omega2 => false,
            BasisWord::Word { terminal_e1, .. } => *terminal_e1,
        }
    }

    pub fn word_len(&self) -> usize {
        match self {
            BasisWord::Word { letters, .. } => letters.len(),
            _ => 0,
        }
    }
}

impl fmt::Display for BasisWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisWord::Omega1 => write!(f, "Omega1"),
            BasisWord::Omega2 => write!(f, "Omega2"),
            BasisWord::Word {
                letters,
                terminal_e1,
            } => {
                let (head, tail) = if *terminal_e1 {
                    (&letters[..letters.len() - 1], Some(letters[letters.len() - 1]))
                } else {
                    (&letters[..], None)
                };
                let mut first = true;
                for u in head {
                    if !first {
                        write!(f, "*")?;
                    }
                    write!(f, "e2({u})")?;
                    first = false;
                }
                if let Some(u) = tail {
                    if !first {
                        write!(f, "*")?;
                    }
                    write!(f, "e1({u})")?;
                }
                Ok(())
            }
        }
    }
}

/// Vacuum state selector: `Psi1` is the vector state of `Omega1`, `Psi2` of
/// `Omega2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum State {
    Psi1,
    Psi2,
}

impl State {
    fn vacuum_index(&self) -> usize {
        match self {
            State::Psi1 => 0,
            State::Psi2 => 1,
        }
    }
}

/// Operator tokens of the model. `P1`/`P2` create, starred tokens
/// annihilate, `W1 = P1 + P1*`, `W2 = P2 + P2*`, `W = W1 + W2`, `Gamma` is
/// the diagonal shift, `Gamma1` its rank-one variant used by the `beta2 = 0`
/// route, and `Y = W + Gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpToken {
    P1(Label),
    P1Star(Label),
    P2(Label),
    P2Star(Label),
    W1(Label),
    W2(Label),
    W(Label),
    Gamma(Label),
    Gamma1(Label),
    Y(Label),
}

impl OpToken {
    pub fn label(&self) -> Label {
        match *self {
            OpToken::P1(u)
            | OpToken::P1Star(u)
            | OpToken::P2(u)
            | OpToken::P2Star(u)
            | OpToken::W1(u)
            | OpToken::W2(u)
            | OpToken::W(u)
            | OpToken::Gamma(u)
            | OpToken::Gamma1(u)
            | OpToken::Y(u) => u,
        }
    }
}

/// Column-major sparse matrix with real entries; every operator of the model
/// has at most a handful of entries per column.
#[derive(Debug, Clone)]
pub struct SparseOp {
    dim: usize,
    cols: Vec<Vec<(usize, f64)>>,
}

impl SparseOp {
    fn zero(dim: usize) -> Self {
        SparseOp {
            dim,
            cols: vec![Vec::new(); dim],
        }
    }

    fn from_diagonal(diag: Vec<f64>) -> Self {
        let dim = diag.len();
        let cols = diag
            .into_iter()
            .enumerate()
            .map(|(i, v)| if v != 0.0 { vec![(i, v)] } else { Vec::new() })
            .collect();
        SparseOp { dim, cols }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transpose(&self) -> SparseOp {
        let mut out = SparseOp::zero(self.dim);
        for (col, entries) in self.cols.iter().enumerate() {
            for &(row, v) in entries {
                out.cols[row].push((col, v));
            }
        }
        for entries in out.cols.iter_mut() {
            entries.sort_by_key(|&(row, _)| row);
        }
        out
    }

    /// Entrywise sum.
    pub fn add(&self, other: &SparseOp) -> SparseOp {
        assert_eq!(self.dim, other.dim);
        let mut out = SparseOp::zero(self.dim);
        for col in 0..self.dim {
            let mut merged: Vec<(usize, f64)> = self.cols[col].clone();
            for &(row, v) in &other.cols[col] {
                match merged.iter_mut().find(|(r, _)| *r == row) {
                    Some(entry) => entry.1 += v,
                    None => merged.push((row, v)),
                }
            }
            merged.sort_by_key(|&(row, _)| row);
            out.cols[col] = merged;
        }
        out
    }

    /// `out += self * v`.
    pub fn apply_add(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for (col, entries) in self.cols.iter().enumerate() {
            let x = v[col];
            if x != 0.0 {
                for &(row, a) in entries {
                    out[row] += a * x;
                }
            }
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_add(v, &mut out);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (col, entries) in self.cols.iter().enumerate() {
            for &(row, v) in entries {
                m[(row, col)] = v;
            }
        }
        m
    }
}

struct LabelOps {
    p1: SparseOp,
    p1_star: SparseOp,
    p2: SparseOp,
    p2_star: SparseOp,
    w1: SparseOp,
    w2: SparseOp,
    w: SparseOp,
    gamma: SparseOp,
    gamma1: SparseOp,
    y: SparseOp,
}

/// The truncated model: enumerated basis plus sparse matrices for every
/// operator token of every label.
pub struct FockModel {
    depth: usize,
    params: Vec<MeixnerParams>,
    basis: Vec<BasisWord>,
    index: HashMap<BasisWord, usize>,
    ops: Vec<LabelOps>,
}

impl FockModel {
    /// Build the truncated model over `params.len()` labels with words of
    /// length at most `depth`.
    pub fn build(depth: usize, params: Vec<MeixnerParams>) -> Result<FockModel> {
        if depth == 0 {
            return Err(Error::ZeroDepth);
        }
        if params.is_empty() {
            return Err(Error::NoLabels);
        }
        let labels = params.len();
        let mut size: usize = 2;
        let mut pow: usize = 1;
        for _ in 1..=depth {
            pow = pow.saturating_mul(labels);
            size = size.saturating_add(2 * pow);
            if size > BASIS_BUDGET {
                return Err(Error::BasisBudget {
                    size,
                    max: BASIS_BUDGET,
                });
            }
        }

        // Basis order: the two vacua, then words by length, within a length
        // lexicographically by letters with the e2-terminal variant first.
        let mut basis = Vec::with_capacity(size);
        basis.push(BasisWord::Omega1);
        basis.push(BasisWord::Omega2);
        let mut letters = Vec::new();
        for len in 1..=depth {
            letters.clear();
            letters.resize(len, 0usize);
            loop {
                basis.push(BasisWord::Word {
                    letters: letters.clone(),
                    terminal_e1: false,
                });
                basis.push(BasisWord::Word {
                    letters: letters.clone(),
                    terminal_e1: true,
                });
                // odometer over labels^len
                let mut i = len;
                loop {
                    if i == 0 {
                        break;
                    }
                    letters[i - 1] += 1;
                    if letters[i - 1] < labels {
                        break;
                    }
                    letters[i - 1] = 0;
                    i -= 1;
                }
                if letters.iter().all(|&u| u == 0) {
                    break;
                }
            }
        }
        let index: HashMap<BasisWord, usize> = basis
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, w)| (w, i))
            .collect();

        let mut model = FockModel {
            depth,
            params,
            basis,
            index,
            ops: Vec::new(),
        };
        model.ops = (0..labels).map(|u| model.build_label_ops(u)).collect();
        Ok(model)
    }

    /// Single-label convenience constructor.
    pub fn single(p: MeixnerParams, depth: usize) -> Result<FockModel> {
        FockModel::build(depth, vec![p])
    }

    fn build_label_ops(&self, u: Label) -> LabelOps {
        let dim = self.basis.len();
        let p = self.params[u];
        let sqrt_b1 = p.b1.sqrt();
        let sqrt_b2 = p.b2.sqrt();

        let mut p1 = SparseOp::zero(dim);
        let mut p2 = SparseOp::zero(dim);
        let mut gamma_diag = vec![0.0f64; dim];
        let mut gamma1_diag = vec![0.0f64; dim];

        for (col, word) in self.basis.iter().enumerate() {
            match word {
                BasisWord::Omega1 => {
                    // p1(u) Omega1 = sqrt(b1) e1(u); p2(u) Omega1 = 0.
                    if sqrt_b1 != 0.0 {
                        let target = BasisWord::Word {
                            letters: vec![u],
                            terminal_e1: true,
                        };
                        p1.cols[col].push((self.index[&target], sqrt_b1));
                    }
                    gamma_diag[col] = p.a1;
                    gamma1_diag[col] = p.a1;
                }
                BasisWord::Omega2 => {
                    // p2(u) Omega2 = sqrt(b2) e2(u).
                    if sqrt_b2 != 0.0 {
                        let target = BasisWord::Word {
                            letters: vec![u],
                            terminal_e1: false,
                        };
                        p2.cols[col].push((self.index[&target], sqrt_b2));
                    }
                    gamma_diag[col] = p.a1;
                    gamma1_diag[col] = p.a1;
                }
                BasisWord::Word {
                    letters,
                    terminal_e1,
                } => {
                    // p2(u) prepends e2(u) to any word below the truncation
                    // depth; p1(u) annihilates every word.
                    if letters.len() < self.depth && sqrt_b2 != 0.0 {
                        let mut target_letters = Vec::with_capacity(letters.len() + 1);
                        target_letters.push(u);
                        target_letters.extend_from_slice(letters);
                        let target = BasisWord::Word {
                            letters: target_letters,
                            terminal_e1: *terminal_e1,
                        };
                        p2.cols[col].push((self.index[&target], sqrt_b2));
                    }
                    // gamma(u) = a1 + (a2 - a1) (b1^{-1} p1 p1* + b2^{-1}
                    // p2 p2*): the projection part hits exactly e1(u) and
                    // the words whose first factor is e2(u), i.e. all words
                    // with first letter u.
                    gamma_diag[col] = if letters[0] == u { p.a2 } else { p.a1 };
                    // gamma1(u) keeps only the b1^{-1} p1 p1* term: the
                    // projection onto e1(u) alone.
                    let is_e1_u = *terminal_e1 && letters.len() == 1 && letters[0] == u;
                    gamma1_diag[col] = if is_e1_u { p.a2 } else { p.a1 };
                }
            }
        }

        let p1_star = p1.transpose();
        let p2_star = p2.transpose();
        let w1 = p1.add(&p1_star);
        let w2 = p2.add(&p2_star);
        let w = w1.add(&w2);
        let gamma = SparseOp::from_diagonal(gamma_diag);
        let gamma1 = SparseOp::from_diagonal(gamma1_diag);
        let y = w.add(&gamma);
        LabelOps {
            p1,
            p1_star,
            p2,
            p2_star,
            w1,
            w2,
            w,
            gamma,
            gamma1,
            y,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn labels(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[MeixnerParams] {
        &self.params
    }

    pub fn basis(&self) -> &[BasisWord] {
        &self.basis
    }

    pub fn basis_len(&self) -> usize {
        self.basis.len()
    }

    pub fn basis_index(&self, word: &BasisWord) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Longest operator word whose vacuum moment is exact at this truncation.
    pub fn exactness_bound(&self) -> usize {
        2 * (self.depth - 1)
    }

    fn check_label(&self, u: Label) -> Result<()> {
        if u >= self.params.len() {
            return Err(Error::UnknownLabel {
                label: u,
                labels: self.params.len(),
            });
        }
        Ok(())
    }

    /// The sparse matrix of a token.
    pub fn op(&self, token: OpToken) -> Result<&SparseOp> {
        self.check_label(token.label())?;
        let ops = &self.ops[token.label()];
        Ok(match token {
            OpToken::P1(_) => &ops.p1,
            OpToken::P1Star(_) => &ops.p1_star,
            OpToken::P2(_) => &ops.p2,
            OpToken::P2Star(_) => &ops.p2_star,
            OpToken::W1(_) => &ops.w1,
            OpToken::W2(_) => &ops.w2,
            OpToken::W(_) => &ops.w,
            OpToken::Gamma(_) => &ops.gamma,
            OpToken::Gamma1(_) => &ops.gamma1,
            OpToken::Y(_) => &ops.y,
        })
    }

    pub fn op_dense(&self, token: OpToken) -> Result<DMatrix<f64>> {
        Ok(self.op(token)?.to_dense())
    }

    /// Unit coordinate vector of a vacuum.
    pub fn vacuum_vector(&self, state: State) -> Vec<f64> {
        let mut v = vec![0.0; self.basis.len()];
        v[state.vacuum_index()] = 1.0;
        v
    }

    /// `<Omega_q, Op_1 Op_2 ... Op_m Omega_q>`, applied right to left as
    /// sparse matrix-vector products. Words longer than the exactness bound
    /// are rejected: truncation would silently clip them.
    pub fn state_moment(&self, state: State, word: &[OpToken]) -> Result<f64> {
        if word.len() > self.exactness_bound() {
            return Err(Error::WordTooLong {
                len: word.len(),
                max: self.exactness_bound(),
            });
        }
        for token in word {
            self.check_label(token.label())?;
        }
        let mut v = self.vacuum_vector(state);
        for token in word.iter().rev() {
            v = self.op(*token).expect("label checked").apply(&v);
        }
        Ok(v[state.vacuum_index()])
    }

    /// `Psi_q((sum of step operators)^m)` without materializing the sum.
    fn power_moment(&self, state: State, steps: &[&SparseOp], m: usize) -> Result<f64> {
        if m > self.exactness_bound() {
            return Err(Error::WordTooLong {
                len: m,
                max: self.exactness_bound(),
            });
        }
        let mut v = self.vacuum_vector(state);
        let mut next = vec![0.0; self.basis.len()];
        for _ in 0..m {
            next.iter_mut().for_each(|x| *x = 0.0);
            for op in steps {
                op.apply_add(&v, &mut next);
            }
            std::mem::swap(&mut v, &mut next);
        }
        Ok(v[state.vacuum_index()])
    }

    /// `Psi_q(y(u_1) ... y(u_m))`, or the same with `omega(u_i)` in place of
    /// `y(u_i)` when `with_gamma` is false.
    pub fn ensemble_moment(&self, state: State, word: &[Label], with_gamma: bool) -> Result<f64> {
        let tokens: Vec<OpToken> = word
            .iter()
            .map(|&u| if with_gamma { OpToken::Y(u) } else { OpToken::W(u) })
            .collect();
        self.state_moment(state, &tokens)
    }
}

/// Smallest depth at which an operator word of length `m` is exact.
pub fn depth_for_moment(m: usize) -> usize {
    m.div_ceil(2) + 1
}

/// `Psi_1((omega + gamma)^m)` on the single-label model: the m-th moment of
/// the free Meixner law with `b1, b2 > 0`.
pub fn meixner_moment_fock(p: &MeixnerParams, m: usize, depth: usize) -> Result<f64> {
    if p.b1 == 0.0 || p.b2 == 0.0 {
        return Err(Error::PositiveBetasRequired {
            beta1: p.b1,
            beta2: p.b2,
        });
    }
    let model = FockModel::single(*p, depth)?;
    let ops = &model.ops[0];
    model.power_moment(State::Psi1, &[&ops.w, &ops.gamma], m)
}

/// `Psi_1((omega_1 + gamma_1)^m)`: the moment route for laws with `b2 = 0`.
pub fn meixner_moment_fock_beta2_zero(p: &MeixnerParams, m: usize, depth: usize) -> Result<f64> {
    if p.b2 != 0.0 {
        return Err(Error::ExpectedBetaTwoZero { beta2: p.b2 });
    }
    let model = FockModel::single(*p, depth)?;
    let ops = &model.ops[0];
    model.power_moment(State::Psi1, &[&ops.w1, &ops.gamma1], m)
}

/// `Psi_2((omega_2 + gamma_2)^m)`: equals the moments of the law
/// `(a1, a2, b2, b2)`. Requires `b2 > 0`.
pub fn meixner_moment_fock_psi2(p: &MeixnerParams, m: usize, depth: usize) -> Result<f64> {
    if !(p.b2 > 0.0) {
        return Err(Error::BetaTwoMustBePositive);
    }
    let model = FockModel::single(*p, depth)?;
    // Restricted to the second summand, gamma acts exactly as gamma_2.
    let ops = &model.ops[0];
    model.power_moment(State::Psi2, &[&ops.w2, &ops.gamma], m)
}

/// Route-dispatching moment: Dirac (`b1 = 0`), the `b2 = 0` reduction, or
/// the generic two-operator realization.
pub fn meixner_moment_fock_auto(p: &MeixnerParams, m: usize, depth: usize) -> Result<f64> {
    if p.b1 == 0.0 {
        // Dirac at a1: the reduced operators already degenerate to a1 * Id
        // on the reachable subspace, so the same machinery applies.
        let q = MeixnerParams::new(p.a1, p.a2, 0.0, 0.0)?;
        return meixner_moment_fock_beta2_zero(&q, m, depth);
    }
    if p.b2 == 0.0 {
        return meixner_moment_fock_beta2_zero(p, m, depth);
    }
    meixner_moment_fock(p, m, depth)
}

/// Parse the operator mini-language: whitespace-separated tokens
/// `p1 p1* p2 p2* w1 w2 w g y`, each optionally labelled as in `p2(3)`.
/// Bare tokens require a single-label model.
pub fn parse_op_word(input: &str, labels: usize) -> Result<Vec<OpToken>> {
    let mut tokens = Vec::new();
    for (position, raw) in input.split_whitespace().enumerate() {
        let (base, label) = match raw.find('(') {
            Some(open) => {
                if !raw.ends_with(')') {
                    return Err(Error::ParseWord {
                        position,
                        token: raw.to_string(),
                    });
                }
                let inner = &raw[open + 1..raw.len() - 1];
                let label: usize = inner.parse().map_err(|_| Error::ParseWord {
                    position,
                    token: raw.to_string(),
                })?;
                (&raw[..open], label)
            }
            None => {
                if labels != 1 {
                    // With several labels the label must be written out.
                    return Err(Error::ParseWord {
                        position,
                        token: raw.to_string(),
                    });
                }
                (raw, 0)
            }
        };
        if label >= labels {
            return Err(Error::UnknownLabel { label, labels });
        }
        let token = match base {
            "p1" => OpToken::P1(label),
            "p1*" => OpToken::P1Star(label),
            "p2" => OpToken::P2(label),
            "p2*" => OpToken::P2Star(label),
            "w1" => OpToken::W1(label),
            "w2" => OpToken::W2(label),
            "w" => OpToken::W(label),
            "g" => OpToken::Gamma(label),
            "y" => OpToken::Y(label),
            _ => {
                return Err(Error::ParseWord {
                    position,
                    token: raw.to_string(),
                })
            }
        };
        tokens.push(token);
    }
    Ok(tokens)
}
