//! Jacobi parameter sequences, free Meixner quadruples, the continued-fraction
//! Cauchy transform, and a tridiagonal-matrix moment oracle.

use num_complex::Complex64;

use crate::{Error, Result};

/// A pair of Jacobi sequences with an eventually constant tail.
///
/// The sequences are stored as a finite head of length `L >= 1` followed by a
/// constant tail, so `alpha(n)` and `beta(n)` are total for every `n >= 1`.
/// Construction normalizes the termination rule: once some `beta(k) = 0`,
/// every later `alpha` and `beta` is zero as well.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiParams {
    alpha_head: Vec<f64>,
    alpha_tail: f64,
    beta_head: Vec<f64>,
    beta_tail: f64,
}

impl JacobiParams {
    pub fn new(
        alpha_head: Vec<f64>,
        alpha_tail: f64,
        beta_head: Vec<f64>,
        beta_tail: f64,
    ) -> Result<Self> {
        if alpha_head.is_empty() || beta_head.is_empty() {
            return Err(Error::EmptyHead);
        }
        if alpha_head.len() != beta_head.len() {
            return Err(Error::HeadLengthMismatch {
                alpha: alpha_head.len(),
                beta: beta_head.len(),
            });
        }
        for &b in beta_head.iter().chain(std::iter::once(&beta_tail)) {
            if !(b >= 0.0) {
                return Err(Error::NegativeBeta(b));
            }
        }
        let mut params = JacobiParams {
            alpha_head,
            alpha_tail,
            beta_head,
            beta_tail,
        };
        params.apply_termination_rule();
        Ok(params)
    }

    /// Zero out everything past the first vanishing beta.
    fn apply_termination_rule(&mut self) {
        let len = self.beta_head.len();
        if let Some(k) = self.beta_head.iter().position(|&b| b == 0.0) {
            for i in (k + 1)..len {
                self.alpha_head[i] = 0.0;
                self.beta_head[i] = 0.0;
            }
            self.alpha_tail = 0.0;
            self.beta_tail = 0.0;
        } else if self.beta_tail == 0.0 {
            // The first zero sits at index L+1 (the tail); alpha at that
            // index keeps its tail value, everything after is zero.
            self.alpha_head.push(self.alpha_tail);
            self.beta_head.push(0.0);
            self.alpha_tail = 0.0;
        }
    }

    pub fn head_len(&self) -> usize {
        self.alpha_head.len()
    }

    /// The n-th diagonal Jacobi coefficient, 1-indexed.
    pub fn alpha(&self, n: usize) -> f64 {
        assert!(n >= 1, "jacobi coefficients are 1-indexed");
        if n <= self.alpha_head.len() {
            self.alpha_head[n - 1]
        } else {
            self.alpha_tail
        }
    }

    /// The n-th off-diagonal Jacobi coefficient, 1-indexed.
    pub fn beta(&self, n: usize) -> f64 {
        assert!(n >= 1, "jacobi coefficients are 1-indexed");
        if n <= self.beta_head.len() {
            self.beta_head[n - 1]
        } else {
            self.beta_tail
        }
    }

    /// Upper bound on the support radius: `max |alpha| + 2 max sqrt(beta)`.
    ///
    /// This bounds the spectrum of every truncation of the Jacobi matrix, so
    /// all moments satisfy `|M_m| <= radius^m`.
    pub fn support_radius(&self) -> f64 {
        let max_alpha = self
            .alpha_head
            .iter()
            .chain(std::iter::once(&self.alpha_tail))
            .fold(0.0f64, |m, &a| m.max(a.abs()));
        let max_beta = self
            .beta_head
            .iter()
            .chain(std::iter::once(&self.beta_tail))
            .fold(0.0f64, |m, &b| m.max(b));
        max_alpha + 2.0 * max_beta.sqrt()
    }

    /// Cauchy transform via the continued fraction, evaluated bottom-up from
    /// `depth` levels with the tail initialized at the fixed point of the
    /// constant-tail fraction.
    ///
    /// Accepts `z` off the real axis, or real `z` outside the estimated
    /// support radius. For `Im z > 0` the result has `Im <= 0`.
    pub fn cauchy_transform(&self, z: Complex64, depth: usize) -> Result<Complex64> {
        if depth == 0 {
            return Err(Error::ZeroDepth);
        }
        let bound = self.support_radius();
        if z.im == 0.0 && z.re.abs() <= bound {
            return Err(Error::RealPointInSupport { x: z.re, bound });
        }
        let mut w = self.tail_fixed_point(z);
        for k in (1..=depth).rev() {
            let a = self.alpha(k);
            let b = self.beta(k);
            // A zero beta terminates the fraction: the level is 1/(z - a)
            // regardless of anything below it.
            w = if b == 0.0 {
                (z - a).inv()
            } else {
                (z - a - b * w).inv()
            };
        }
        Ok(w)
    }

    /// Fixed point of `w = 1 / (z - alpha_tail - beta_tail * w)`, choosing the
    /// branch that behaves like a Cauchy transform (the small root).
    fn tail_fixed_point(&self, z: Complex64) -> Complex64 {
        let a = self.alpha_tail;
        let b = self.beta_tail;
        if b == 0.0 {
            return (z - a).inv();
        }
        let s = z - a;
        let disc = (s * s - 4.0 * b).sqrt();
        let w_plus = (s + disc) / (2.0 * b);
        let w_minus = (s - disc) / (2.0 * b);
        // The two roots multiply to 1/b; the physical branch is the one of
        // smaller modulus (it decays like 1/z and has Im <= 0 for Im z > 0).
        if w_minus.norm_sqr() <= w_plus.norm_sqr() {
            w_minus
        } else {
            w_plus
        }
    }

    /// Moments via the truncated tridiagonal Jacobi matrix.
    ///
    /// The truncation dimension `m_max/2 + 2` exceeds every level reachable by
    /// an `m`-step walk returning to the corner entry, so the values are exact
    /// (up to rounding) for all `m <= m_max`.
    pub fn moments_tridiagonal(&self, m_max: usize) -> MomentTable {
        let dim = m_max / 2 + 2;
        let diag: Vec<f64> = (1..=dim).map(|k| self.alpha(k)).collect();
        let off: Vec<f64> = (1..dim).map(|k| self.beta(k).sqrt()).collect();
        let mut u = vec![0.0f64; dim];
        u[0] = 1.0;
        let mut moments = Vec::with_capacity(m_max + 1);
        moments.push(1.0);
        let mut next = vec![0.0f64; dim];
        for _ in 1..=m_max {
            for i in 0..dim {
                let mut s = diag[i] * u[i];
                if i > 0 {
                    s += off[i - 1] * u[i - 1];
                }
                if i + 1 < dim {
                    s += off[i] * u[i + 1];
                }
                next[i] = s;
            }
            std::mem::swap(&mut u, &mut next);
            moments.push(u[0]);
        }
        MomentTable::new(moments, MomentMethod::Tridiagonal)
    }
}

/// The quadruple `(a1, a2, b1, b2)` of a free Meixner law.
///
/// `b1 = 0` degenerates to the Dirac mass at `a1`, in which case `b2` is
/// irrelevant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeixnerParams {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl MeixnerParams {
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64) -> Result<Self> {
        if !(b1 >= 0.0) {
            return Err(Error::NegativeBeta(b1));
        }
        if !(b2 >= 0.0) {
            return Err(Error::NegativeBeta(b2));
        }
        Ok(MeixnerParams { a1, a2, b1, b2 })
    }

    /// Jacobi sequences `alpha = (a1, a2, a2, ...)`, `beta = (b1, b2, b2, ...)`
    /// (with the termination rule applied when a beta vanishes).
    pub fn to_jacobi(&self) -> JacobiParams {
        JacobiParams::new(
            vec![self.a1, self.a2],
            self.a2,
            vec![self.b1, self.b2],
            self.b2,
        )
        .expect("validated parameters")
    }

    /// Whether the law is in the standardized form `a1 = 0`, `b1 = 1` (mean
    /// zero, variance one) required by the closed-form density.
    pub fn is_standardized(&self) -> bool {
        self.a1 == 0.0 && self.b1 == 1.0
    }

    pub fn is_dirac(&self) -> bool {
        self.b1 == 0.0
    }
}

/// Tag identifying which route produced a moment table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    Combinatorial,
    Tridiagonal,
    Fock,
    DensityQuadrature,
    MonteCarlo,
}

impl MomentMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            MomentMethod::Combinatorial => "combinatorial",
            MomentMethod::Tridiagonal => "tridiagonal",
            MomentMethod::Fock => "fock",
            MomentMethod::DensityQuadrature => "density-quadrature",
            MomentMethod::MonteCarlo => "monte-carlo",
        }
    }
}

/// Moments `M_0..M_m` of a law, with per-entry standard errors for Monte
/// Carlo estimates. `moments[0]` is always 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub moments: Vec<f64>,
    pub method: MomentMethod,
    pub stderr: Option<Vec<f64>>,
}

impl MomentTable {
    pub fn new(moments: Vec<f64>, method: MomentMethod) -> Self {
        debug_assert!(!moments.is_empty() && moments[0] == 1.0);
        MomentTable {
            moments,
            method,
            stderr: None,
        }
    }

    pub fn with_stderr(moments: Vec<f64>, stderr: Vec<f64>, method: MomentMethod) -> Self {
        debug_assert_eq!(moments.len(), stderr.len());
        debug_assert!(stderr.iter().all(|&s| s >= 0.0));
        MomentTable {
            moments,
            method,
            stderr: Some(stderr),
        }
    }

    pub fn m_max(&self) -> usize {
        self.moments.len() - 1
    }

    /// CSV rendering with header `m,moment,stderr,method`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,moment,stderr,method\n");
        for (m, value) in self.moments.iter().enumerate() {
            let se = match &self.stderr {
                Some(s) => s[m].to_string(),
                None => String::new(),
            };
            out.push_str(&format!("{},{},{},{}\n", m, value, se, self.method.tag()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn semicircle() -> MeixnerParams {
        MeixnerParams::new(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn meixner_to_jacobi_standard_case() {
        let j = semicircle().to_jacobi();
        for n in 1..20 {
            assert_eq!(j.alpha(n), 0.0);
            assert_eq!(j.beta(n), 1.0);
        }
    }

    #[test]
    fn meixner_to_jacobi_terminates_on_beta2_zero() {
        let j = MeixnerParams::new(1.5, -0.5, 2.0, 0.0).unwrap().to_jacobi();
        assert_eq!(j.alpha(1), 1.5);
        assert_eq!(j.alpha(2), -0.5);
        assert_eq!(j.beta(1), 2.0);
        assert_eq!(j.beta(2), 0.0);
        for n in 3..10 {
            assert_eq!(j.alpha(n), 0.0);
            assert_eq!(j.beta(n), 0.0);
        }
    }

    #[test]
    fn meixner_to_jacobi_dirac() {
        let j = MeixnerParams::new(5.0, 7.0, 0.0, 3.0).unwrap().to_jacobi();
        assert_eq!(j.alpha(1), 5.0);
        assert_eq!(j.beta(1), 0.0);
        for n in 2..10 {
            assert_eq!(j.alpha(n), 0.0);
            assert_eq!(j.beta(n), 0.0);
        }
    }

    #[test]
    fn negative_beta_rejected() {
        assert!(matches!(
            MeixnerParams::new(0.0, 0.0, -1.0, 1.0),
            Err(Error::NegativeBeta(_))
        ));
        assert!(matches!(
            JacobiParams::new(vec![0.0], 0.0, vec![f64::NAN], 1.0),
            Err(Error::NegativeBeta(_))
        ));
    }

    #[test]
    fn cauchy_semicircle_matches_closed_form() {
        // Oracle: G(z) = (z - sqrt(z^2 - 4)) / 2 on the branch with
        // sqrt(z^2 - 4) ~ z at infinity, written as z * sqrt(1 - 4/z^2).
        let j = semicircle().to_jacobi();
        for &(re, im) in &[(0.0, 2.0), (1.0, 1.0), (-2.5, 0.5), (3.0, 3.0), (0.3, 10.0)] {
            let z = Complex64::new(re, im);
            let oracle = (z - z * (1.0 - 4.0 / (z * z)).sqrt()) / 2.0;
            let g = j.cauchy_transform(z, 60).unwrap();
            assert!((g - oracle).norm() < 1e-9, "z = {z}, g = {g}, oracle = {oracle}");
            assert!(g.im <= 0.0);
        }
        // Spot value at z = 2i: G = i(1 - sqrt(2)).
        let g = j
            .cauchy_transform(Complex64::new(0.0, 2.0), 60)
            .unwrap();
        assert_relative_eq!(g.re, 0.0, epsilon = 1e-12);
        assert_relative_eq!(g.im, 1.0 - 2f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn cauchy_large_z_asymptotics() {
        let j = MeixnerParams::new(0.7, -0.3, 1.4, 2.2).unwrap().to_jacobi();
        let z = Complex64::new(0.0, 1e6);
        let g = j.cauchy_transform(z, 40).unwrap();
        let lead = z.inv();
        // |G - 1/z| <= (|M_1| + o(1)) / |z|^2
        assert!((g - lead).norm() <= (j.support_radius() + 1.0) / z.norm_sqr());
    }

    #[test]
    fn cauchy_dirac_terminates() {
        let j = MeixnerParams::new(5.0, 7.0, 0.0, 3.0).unwrap().to_jacobi();
        for &(re, im) in &[(0.0, 1.0), (9.0, 0.0), (2.0, -0.7)] {
            let z = Complex64::new(re, im);
            let g = j.cauchy_transform(z, 25).unwrap();
            assert!((g - (z - 5.0).inv()).norm() < 1e-14);
        }
    }

    #[test]
    fn cauchy_rejects_depth_zero_and_support_points() {
        let j = semicircle().to_jacobi();
        assert!(matches!(
            j.cauchy_transform(Complex64::new(0.0, 1.0), 0),
            Err(Error::ZeroDepth)
        ));
        assert!(matches!(
            j.cauchy_transform(Complex64::new(0.5, 0.0), 30),
            Err(Error::RealPointInSupport { .. })
        ));
        // Real points beyond the support bound are fine.
        assert!(j.cauchy_transform(Complex64::new(2.5, 0.0), 30).is_ok());
    }

    #[test]
    fn tridiagonal_semicircle_gives_catalan() {
        let table = semicircle().to_jacobi().moments_tridiagonal(10);
        let catalan = [1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 5.0, 0.0, 14.0, 0.0, 42.0];
        for (m, &expect) in catalan.iter().enumerate() {
            assert_relative_eq!(table.moments[m], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn tridiagonal_low_moments() {
        let p = MeixnerParams::new(0.8, -1.1, 1.7, 0.9).unwrap();
        let table = p.to_jacobi().moments_tridiagonal(4);
        assert_relative_eq!(table.moments[0], 1.0);
        assert_relative_eq!(table.moments[1], p.a1, epsilon = 1e-14);
        // M_4 for the centered case: beta1^2 + beta1*beta2 (the two
        // non-crossing pairings of [4], at depths (1,1) and (1,2)).
        let c = MeixnerParams::new(0.0, 0.0, 1.7, 0.9).unwrap();
        let t = c.to_jacobi().moments_tridiagonal(4);
        assert_relative_eq!(t.moments[4], 1.7f64.powi(2) + 1.7 * 0.9, epsilon = 1e-12);
    }

    #[test]
    fn moment_table_csv_shape() {
        let table = semicircle().to_jacobi().moments_tridiagonal(2);
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("m,moment,stderr,method"));
        assert_eq!(lines.next(), Some("0,1,,tridiagonal"));
    }
}
