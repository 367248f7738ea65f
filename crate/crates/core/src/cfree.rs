//! Conditional freeness checks.
//!
//! The per-label algebras generated by `y(u)` are conditionally free with
//! respect to `(Psi1, Psi2)`: an alternating product vanishes under `Psi1`
//! whenever the inner factors are `Psi2`-centered and the last factor is
//! `Psi1`-centered. This module verifies the kernel property exactly on the
//! Fock model, reproduces the plain-freeness violation witness, and runs the
//! matrix-model analogue statistically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fock::{FockModel, Label, OpToken, State, MAX_DEGREE};
use crate::rmt::{mc_polynomial_word, BlockId, EnsembleSpec};
use crate::{Error, Result};

/// A polynomial in the single generator `y(u)` of one label's algebra,
/// stored by ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    label: Label,
    coeffs: Vec<f64>,
}

impl AlgebraElement {
    pub fn new(label: Label, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::BadWordShape);
        }
        if coeffs.len() - 1 > MAX_DEGREE {
            return Err(Error::DegreeBudget {
                degree: coeffs.len() - 1,
                max: MAX_DEGREE,
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "polynomial coefficients must be finite".into(),
            ));
        }
        Ok(AlgebraElement { label, coeffs })
    }

    /// The generator `y(u)` itself.
    pub fn generator(label: Label) -> Self {
        AlgebraElement {
            label,
            coeffs: vec![0.0, 1.0],
        }
    }

    /// `y(u)^k`.
    pub fn power(label: Label, k: usize) -> Result<Self> {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        AlgebraElement::new(label, coeffs)
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `Psi_q(e)` on the model.
    pub fn expectation(&self, model: &FockModel, state: State) -> Result<f64> {
        let mut value = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                let moment = model.state_moment(state, &vec![OpToken::Y(self.label); k])?;
                value += c * moment;
            }
        }
        Ok(value)
    }

    /// Apply the element to a coordinate vector of the model.
    fn apply(&self, model: &FockModel, v: &[f64]) -> Result<Vec<f64>> {
        let y = model.op(OpToken::Y(self.label))?;
        let mut acc = vec![0.0; v.len()];
        let mut power = v.to_vec();
        for (k, &c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                power = y.apply(&power);
            }
            if c != 0.0 {
                for (a, p) in acc.iter_mut().zip(&power) {
                    *a += c * p;
                }
            }
        }
        Ok(acc)
    }
}

/// `e - Psi_q(e) 1`: the element recentered to have zero `Psi_q`-expectation.
pub fn center(e: &AlgebraElement, model: &FockModel, state: State) -> Result<AlgebraElement> {
    let mean = e.expectation(model, state)?;
    let mut coeffs = e.coeffs.clone();
    coeffs[0] -= mean;
    AlgebraElement::new(e.label, coeffs)
}

/// `Psi_state(a_1 a_2 ... a_k)` evaluated exactly on the model.
///
/// The total degree must stay within the model's exactness bound, otherwise
/// truncation would silently clip the word.
pub fn alternating_moment(
    model: &FockModel,
    elements: &[AlgebraElement],
    state: State,
) -> Result<f64> {
    let total_degree: usize = elements.iter().map(AlgebraElement::degree).sum();
    if total_degree > model.exactness_bound() {
        return Err(Error::WordTooLong {
            len: total_degree,
            max: model.exactness_bound(),
        });
    }
    let mut v = model.vacuum_vector(state);
    for e in elements.iter().rev() {
        v = e.apply(model, &v)?;
    }
    let vac = match state {
        State::Psi1 => 0,
        State::Psi2 => 1,
    };
    Ok(v[vac])
}

fn check_alternating(labels: &[Label], degrees: &[usize]) -> Result<()> {
    if labels.is_empty() || labels.len() != degrees.len() {
        return Err(Error::BadWordShape);
    }
    for (position, pair) in labels.windows(2).enumerate() {
        if pair[0] == pair[1] {
            return Err(Error::AdjacentLabelsEqual { position });
        }
    }
    Ok(())
}

/// Kernel property of conditional freeness, tested over random polynomials:
/// inner elements are centered against `inner_state`, the last element
/// against `Psi1`, and the maximum `|Psi1(a_1 ... a_k)|` over `draws`
/// coefficient draws is returned.
///
/// With `inner_state = Psi2` (the conditional-freeness hypothesis) the
/// maximum must vanish to rounding; centering the inner factors against
/// `Psi1` instead is the power check, which stays strictly positive whenever
/// `beta1 != beta2`.
pub fn kernel_property_test_with_inner(
    model: &FockModel,
    labels: &[Label],
    degrees: &[usize],
    seed: u64,
    draws: usize,
    inner_state: State,
) -> Result<f64> {
    check_alternating(labels, degrees)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let mut elements = Vec::with_capacity(labels.len());
        for (i, (&label, &degree)) in labels.iter().zip(degrees).enumerate() {
            let coeffs: Vec<f64> = (0..=degree).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let raw = AlgebraElement::new(label, coeffs)?;
            let state = if i + 1 == labels.len() {
                State::Psi1
            } else {
                inner_state
            };
            elements.push(center(&raw, model, state)?);
        }
        let value = alternating_moment(model, &elements, State::Psi1)?;
        worst = worst.max(value.abs());
    }
    Ok(worst)
}

/// The conditional-freeness kernel test proper (inner centering `Psi2`).
pub fn kernel_property_test(
    model: &FockModel,
    labels: &[Label],
    degrees: &[usize],
    seed: u64,
    draws: usize,
) -> Result<f64> {
    kernel_property_test_with_inner(model, labels, degrees, seed, draws, State::Psi2)
}

/// The plain-freeness violation witness: with centered parameters and shared
/// `(beta1, beta2)`, `Psi1(w1 w2 w1) = beta1 (beta2 - beta1)` for
/// `w1 = y(s)`, `w2 = y(u)^2 - beta1` (both `Psi1`-centered), so the family
/// is not free with respect to `Psi1` alone; the `Psi2`-centered variant
/// `w3 = y(u)^2 - beta2` gives zero, as conditional freeness demands.
/// Returns `(Psi1(w1 w2 w1), Psi1(w1 w3 w1))`.
pub fn freeness_witness(model: &FockModel, s: Label, u: Label) -> Result<(f64, f64)> {
    if s == u {
        return Err(Error::AdjacentLabelsEqual { position: 0 });
    }
    let params = model.params();
    for p in params {
        if p.a1 != 0.0 || p.a2 != 0.0 {
            return Err(Error::InvalidParameter(
                "freeness witness requires centered parameters (a1 = a2 = 0)".into(),
            ));
        }
        if p.b1 != params[0].b1 || p.b2 != params[0].b2 {
            return Err(Error::InvalidParameter(
                "freeness witness requires shared (b1, b2) across labels".into(),
            ));
        }
    }
    let (b1, b2) = (params[0].b1, params[0].b2);
    if !(b1 > 0.0 && b2 > 0.0) {
        return Err(Error::InvalidParameter(
            "freeness witness requires b1 > 0 and b2 > 0".into(),
        ));
    }
    let w1 = AlgebraElement::generator(s);
    let w2 = AlgebraElement::new(u, vec![-b1, 0.0, 1.0])?;
    let w3 = AlgebraElement::new(u, vec![-b2, 0.0, 1.0])?;
    let value_w2 = alternating_moment(model, &[w1.clone(), w2, w1.clone()], State::Psi1)?;
    let value_w3 = alternating_moment(model, &[w1.clone(), w3, w1], State::Psi1)?;
    Ok((value_w2, value_w3))
}

/// Matrix-model analogue of the kernel test: the elements are centered
/// against the Fock states (inner factors by `inner_state`, the last by
/// `Psi1`) and the centered product is averaged under `tau_1` over the
/// ensemble's trials. Returns `(estimate, stderr)`.
pub fn matrix_cfree_test(
    espec: &EnsembleSpec,
    elements: &[AlgebraElement],
    inner_state: State,
    depth: usize,
) -> Result<(f64, f64)> {
    if elements.is_empty() {
        return Err(Error::BadWordShape);
    }
    let params = espec.labels.iter().map(|l| l.meixner()).collect::<Vec<_>>();
    let model = FockModel::build(depth, params)?;
    let mut centered = Vec::with_capacity(elements.len());
    for (i, e) in elements.iter().enumerate() {
        let state = if i + 1 == elements.len() {
            State::Psi1
        } else {
            inner_state
        };
        centered.push(center(e, &model, state)?);
    }
    let polys: Vec<(usize, Vec<f64>)> = centered
        .iter()
        .map(|e| (e.label(), e.coeffs().to_vec()))
        .collect();
    mc_polynomial_word(espec, &polys, BlockId::N1)
}

/// Acceptance band for the matrix-model kernel estimate.
pub fn passes_matrix_threshold(estimate: f64, stderr: f64) -> bool {
    estimate.abs() <= (3.0 * stderr).max(0.03)
}
