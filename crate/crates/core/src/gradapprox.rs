//! Conic approximations of the negative gradient `μ_K − ν_t`.
//!
//! Each approximator builds `d = Σ cᵢ (K(yᵢ, ·) − ν_t)` with `cᵢ ≥ 0` and
//! returns it with `Λ = Σ cᵢ`, so that `ν_t + d/Λ` stays in the convex hull of
//! the atoms and the nodes of `ν_t`.
//!
//! All inner products are carried as scalars: `q = ⟨μ_K − ν_t, d⟩`,
//! `‖d‖²`, and `βᶜ = ⟨K(yᶜ, ·) − ν_t, d⟩` for every candidate, updated per
//! accepted atom in O(m).

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::residual::{OpCounter, ResidualState};
use crate::scalar::Scalar;
use crate::simplexopt::{nnls, QuadraticProblem};

/// Largest closed-form step accepted as finite.
pub const MAX_STEP: f64 = 1e12;
/// Norms at or below this count as zero in [`align`].
pub const ALIGN_ZERO_NORM: f64 = 1e-300;
/// Atoms with a smaller NNLS coefficient are dropped.
pub const PRUNE_TOL: f64 = 1e-10;

/// Default truncation parameter for matching pursuit.
pub const DEFAULT_DELTA_PMP: f64 = -1e-4;
/// Default truncation parameter for greedy cos maximization.
pub const DEFAULT_DELTA_GCOS: f64 = 1e-4;

/// `⟨f₁, f₂⟩ / (‖f₁‖ ‖f₂‖)` clamped to `[−1, 1]`, or `−1` when either norm vanishes.
pub fn align<F: Scalar>(f1_norm_sq: F, f2_norm_sq: F, inner: F) -> F {
    let zero = F::lit(ALIGN_ZERO_NORM).max(F::min_positive_value());
    let n1 = f1_norm_sq.max(F::zero()).sqrt();
    let n2 = f2_norm_sq.max(F::zero()).sqrt();
    if n1 <= zero || n2 <= zero {
        return -F::one();
    }
    (inner / n1 / n2).max(-F::one()).min(F::one())
}

/// Approximation to the negative gradient at one outer iteration.
#[derive(Debug, Clone)]
pub struct Direction<F> {
    /// `(candidate index, cᵢ)` with `cᵢ ≥ 0`.
    pub atoms: Vec<(usize, F)>,
    /// `Λ`; `g_t = d / Λ`.
    pub lambda: F,
    /// `⟨μ_K − ν_t, d⟩`.
    pub inner: F,
    /// `‖d‖²`.
    pub norm_sq: F,
    /// `cos θ_t = align(μ_K − ν_t, d)`.
    pub cos_theta: F,
    /// Accepted inner rounds `K_t`.
    pub rounds: usize,
    pub trace: Vec<InnerRound<F>>,
}

impl<F: Scalar> Direction<F> {
    /// `⟨μ_K − ν_t, g_t⟩`.
    pub fn g_inner(&self) -> F {
        self.inner / self.lambda
    }

    /// `‖g_t‖²`.
    pub fn g_norm_sq(&self) -> F {
        self.norm_sq / (self.lambda * self.lambda)
    }

    /// Atoms of `g_t`, coefficients `cᵢ / Λ`.
    pub fn normalized_atoms(&self) -> Vec<(usize, F)> {
        self.atoms
            .iter()
            .map(|&(c, a)| (c, a / self.lambda))
            .collect()
    }

    /// `Σ cᵢ`.
    pub fn coefficient_sum(&self) -> F {
        self.atoms.iter().map(|&(_, a)| a).sum()
    }
}

/// One accepted inner round.
#[derive(Debug, Clone)]
pub struct InnerRound<F> {
    /// `cos θ_{t,k}` after the round.
    pub cos_theta: F,
    /// `‖(μ_K − ν_t) − d_k‖²` after the round.
    pub residual_sq: F,
    /// `‖d_k‖²` after the round.
    pub direction_norm_sq: F,
    /// Step taken: `λ_k` for matching pursuit, `c_k` for greedy cos.
    pub step: F,
    pub backward: bool,
    /// `Λ` after the round.
    pub lambda: F,
    /// Candidate added (forward rounds).
    pub atom: Option<usize>,
    /// Work spent in this round.
    pub ops: OpCounter,
}

/// `p, q, α, β, γ` of the greedy cos step for one trial atom `y`.
#[derive(Debug, Clone, Copy)]
pub struct CosStepScalars<F> {
    /// `⟨μ_K − ν_t, K(y, ·) − ν_t⟩`
    pub p: F,
    /// `⟨μ_K − ν_t, d_k⟩`
    pub q: F,
    /// `‖K(y, ·) − ν_t‖²`
    pub alpha: F,
    /// `⟨K(y, ·) − ν_t, d_k⟩`
    pub beta: F,
    /// `‖d_k‖²`
    pub gamma: F,
}

impl<F: Scalar> CosStepScalars<F> {
    /// `g(c) = (c p + q) / √(α c² + 2 β c + γ)`.
    pub fn value(&self, c: F) -> F {
        let den = self.alpha * c * c + F::lit(2.0) * self.beta * c + self.gamma;
        (c * self.p + self.q) / den.max(F::zero()).sqrt()
    }
}

/// Maximizer of `g(c)` over `c > 0` when it beats `c = 0`.
///
/// The stationary point is `c* = (qβ − pγ)/(pβ − qα)`; it is kept only when
/// `c* > 0`, `c* p + q ≥ 0`, `c*` is finite (≤ [`MAX_STEP`]) and
/// `g(c*) > g(0)`. Returns `(c*, g(c*))`.
pub fn gcos_closed_form<F: Scalar>(s: &CosStepScalars<F>) -> Option<(F, F)> {
    let den = s.p * s.beta - s.q * s.alpha;
    if den.abs() < F::lit(1e-300).max(F::min_positive_value()) {
        return None;
    }
    let c = (s.q * s.beta - s.p * s.gamma) / den;
    if !(c > F::zero()) || c > F::lit(MAX_STEP) || c * s.p + s.q < F::zero() {
        return None;
    }
    let value = s.value(c);
    let at_zero = s.q / s.gamma.sqrt();
    if !(value > at_zero) {
        return None;
    }
    Some((c, value))
}

/// Best greedy-cos step over all candidates: `(candidate, c*, g(c*))`,
/// lowest index on ties.
pub fn best_cos_step<F: Scalar>(
    p: &[F],
    alpha: &[F],
    beta: &[F],
    q: F,
    gamma: F,
) -> Option<(usize, F, F)> {
    let mut best: Option<(usize, F, F)> = None;
    for c in 0..p.len() {
        if !(alpha[c] > F::zero()) {
            continue;
        }
        let s = CosStepScalars {
            p: p[c],
            q,
            alpha: alpha[c],
            beta: beta[c],
            gamma,
        };
        if let Some((step, value)) = gcos_closed_form(&s) {
            if best.is_none_or(|(_, _, v)| value > v) {
                best = Some((c, step, value));
            }
        }
    }
    best
}

/// Direction under construction with per-candidate scalars.
struct Builder<F> {
    atoms: Vec<(usize, F)>,
    inner: F,
    norm_sq: F,
    beta: Vec<F>,
}

impl<F: Scalar> Builder<F> {
    fn new(m: usize) -> Self {
        Self {
            atoms: Vec::new(),
            inner: F::zero(),
            norm_sq: F::zero(),
            beta: vec![F::zero(); m],
        }
    }

    /// `d ← d + coef (K(yᶜ, ·) − ν)`.
    fn add(&mut self, st: &mut ResidualState<F>, sc: &OuterScalars<F>, c: usize, coef: F) {
        self.inner += coef * sc.p[c];
        self.norm_sq += F::lit(2.0) * coef * self.beta[c] + coef * coef * sc.alpha[c];
        self.add_beta(st, c, coef);
        match self.atoms.iter_mut().find(|(a, _)| *a == c) {
            Some((_, v)) => *v += coef,
            None => self.atoms.push((c, coef)),
        }
    }

    fn add_beta(&mut self, st: &mut ResidualState<F>, c: usize, coef: F) {
        let e = st.self_energy();
        let nu_c = st.nu_at(c);
        let m = self.beta.len();
        let col = st.column(c).to_vec();
        let nu = st.nu_values();
        for i in 0..m {
            self.beta[i] += coef * (col[i] - nu[i] - nu_c + e);
        }
        st.count_scalar(m);
    }

    fn scale(&mut self, s: F) {
        self.inner *= s;
        self.norm_sq *= s * s;
        self.beta.iter_mut().for_each(|b| *b *= s);
        self.atoms.iter_mut().for_each(|(_, a)| *a *= s);
    }

    /// Replaces all coefficients; recomputes every scalar.
    fn reset(&mut self, st: &mut ResidualState<F>, sc: &OuterScalars<F>, atoms: Vec<(usize, F)>) {
        self.atoms.clear();
        self.inner = F::zero();
        self.norm_sq = F::zero();
        self.beta.iter_mut().for_each(|b| *b = F::zero());
        for (c, a) in atoms {
            if a > F::zero() {
                self.add(st, sc, c, a);
            }
        }
    }
}

/// Per-outer-iteration scalars `pᶜ`, `αᶜ`, `‖R‖²`.
struct OuterScalars<F> {
    p: Vec<F>,
    alpha: Vec<F>,
    r2: F,
}

impl<F: Scalar> OuterScalars<F> {
    fn compute(st: &mut ResidualState<F>) -> Self {
        let m = st.candidate_count();
        let p = (0..m).map(|c| st.inner_residual(c)).collect();
        let alpha = (0..m).map(|c| st.atom_norm_sq(c)).collect();
        st.count_scalar(2 * m);
        Self {
            p,
            alpha,
            r2: st.residual_sq(),
        }
    }

    fn cos(&self, inner: F, norm_sq: F) -> F {
        align(self.r2, norm_sq, inner)
    }
}

/// Non-negative re-optimization of atom coefficients:
/// `min ‖(μ_K − ν_t) − Σ cᵢ aᵢ‖²` over `cᵢ ≥ 0`.
fn refit_nonnegative<F: Scalar>(
    st: &mut ResidualState<F>,
    sc: &OuterScalars<F>,
    atoms: &[usize],
) -> Result<Vec<(usize, F)>> {
    let k = atoms.len();
    let mut g = SquareMatrix::zeros(k);
    for a in 0..k {
        for b in 0..=a {
            let v = st.atom_inner(atoms[a], atoms[b]);
            g.set(a, b, v);
            g.set(b, a, v);
        }
    }
    let rhs: Vec<F> = atoms.iter().map(|&c| sc.p[c]).collect();
    let sol = nnls(&QuadraticProblem::new(g, rhs)?)?;
    Ok(atoms
        .iter()
        .zip(sol.x)
        .filter(|(_, c)| *c > F::lit(PRUNE_TOL))
        .map(|(&a, c)| (a, c))
        .collect())
}

fn check_k_max(k_max: usize) -> Result<()> {
    if k_max == 0 {
        return Err(Error::Argument("K_max must be at least 1".into()));
    }
    Ok(())
}

/// Positive matching pursuit with optional fully-corrective refits.
///
/// Returns `None` when no candidate gives a descent direction.
fn matching_pursuit<F: Scalar>(
    st: &mut ResidualState<F>,
    k_max: usize,
    delta: F,
    fully_corrective: bool,
) -> Result<Option<Direction<F>>> {
    check_k_max(k_max)?;
    if !(delta < F::one()) {
        return Err(Error::Argument(format!("PMP needs δ < 1, got {delta}")));
    }
    let sc = OuterScalars::compute(st);
    if !(sc.r2 > F::zero()) {
        return Ok(None);
    }
    let m = st.candidate_count();
    let mut b = Builder::new(m);
    let mut lambda = F::zero();
    let mut cos = -F::one();
    let mut trace = Vec::new();

    for k in 0..k_max {
        let before = st.counter();
        // Forward candidate: argmax ⟨r_k, K(yᶜ, ·)⟩ = argmax pᶜ − βᶜ.
        st.count_scalar(m);
        let mut v = None;
        let mut fwd = F::neg_infinity();
        for c in 0..m {
            if !(sc.alpha[c] > F::zero()) {
                continue;
            }
            let s = sc.p[c] - b.beta[c];
            if s > fwd {
                fwd = s;
                v = Some(c);
            }
        }
        let dnorm = b.norm_sq.max(F::zero()).sqrt();
        let bwd = if k == 0 || dnorm <= F::zero() {
            F::neg_infinity()
        } else {
            (b.norm_sq - b.inner) / dnorm
        };
        let backward = bwd > fwd;
        let (step, new_inner, new_norm, refit) = if backward {
            let step = bwd;
            let s = F::one() - step / dnorm;
            (step, s * b.inner, s * s * b.norm_sq, None)
        } else {
            let Some(v) = v else { break };
            let step = fwd / sc.alpha[v];
            let plain_inner = b.inner + step * sc.p[v];
            let plain_norm = b.norm_sq + F::lit(2.0) * step * b.beta[v] + step * step * sc.alpha[v];
            if fully_corrective {
                let mut idx: Vec<usize> = b.atoms.iter().map(|&(c, _)| c).collect();
                if !idx.contains(&v) {
                    idx.push(v);
                }
                let coefs = refit_nonnegative(st, &sc, &idx)?;
                let (qi, nn) = direction_scalars(st, &sc, &coefs);
                // The refit is only as accurate as the solver tolerance; near a
                // tiny residual the plain forward point can be better.
                if nn - F::lit(2.0) * qi <= plain_norm - F::lit(2.0) * plain_inner {
                    (step, qi, nn, Some(coefs))
                } else {
                    (step, plain_inner, plain_norm, None)
                }
            } else {
                (step, plain_inner, plain_norm, None)
            }
        };
        if !(step > F::zero()) {
            break;
        }
        if backward && new_norm <= F::lit(ALIGN_ZERO_NORM).max(F::min_positive_value()) {
            break;
        }
        let new_cos = sc.cos(new_inner, new_norm);
        if !(new_cos - cos > delta) {
            break;
        }
        let mut atom = None;
        if backward {
            let s = F::one() - step / dnorm;
            b.scale(s);
            lambda *= s;
        } else if let Some(coefs) = refit {
            b.reset(st, &sc, coefs);
            lambda = b.atoms.iter().map(|&(_, a)| a).sum();
            atom = v;
        } else {
            let v = v.expect("forward step has a vertex");
            b.add(st, &sc, v, step);
            lambda += step;
            atom = Some(v);
        }
        cos = sc.cos(b.inner, b.norm_sq);
        trace.push(InnerRound {
            cos_theta: cos,
            residual_sq: sc.r2 - F::lit(2.0) * b.inner + b.norm_sq,
            direction_norm_sq: b.norm_sq,
            step,
            backward,
            lambda,
            atom,
            ops: st.counter().since(before),
        });
    }
    finish(b, lambda, cos, trace)
}

fn direction_scalars<F: Scalar>(
    st: &mut ResidualState<F>,
    sc: &OuterScalars<F>,
    coefs: &[(usize, F)],
) -> (F, F) {
    let inner = coefs.iter().map(|&(c, a)| a * sc.p[c]).sum();
    let mut norm = F::zero();
    for &(c, a) in coefs {
        for &(j, bj) in coefs {
            norm += a * bj * st.atom_inner(c, j);
        }
    }
    (inner, norm)
}

fn finish<F: Scalar>(
    b: Builder<F>,
    lambda: F,
    cos: F,
    trace: Vec<InnerRound<F>>,
) -> Result<Option<Direction<F>>> {
    if trace.is_empty() || !(lambda > F::zero()) {
        return Ok(None);
    }
    if let Some(&(c, a)) = b.atoms.iter().find(|(_, a)| *a < -F::lit(1e-12)) {
        return Err(Error::Invariant(format!(
            "negative coefficient {a} on candidate {c}"
        )));
    }
    Ok(Some(Direction {
        atoms: b.atoms,
        lambda,
        inner: b.inner,
        norm_sq: b.norm_sq,
        cos_theta: cos,
        rounds: trace.len(),
        trace,
    }))
}

/// Greedy cos maximization with optional fully-corrective refits.
fn greedy_cos<F: Scalar>(
    st: &mut ResidualState<F>,
    k_max: usize,
    delta: F,
    fully_corrective: bool,
) -> Result<Option<Direction<F>>> {
    check_k_max(k_max)?;
    if !(delta >= F::zero()) {
        return Err(Error::Argument(format!(
            "greedy cos needs δ ≥ 0, got {delta}"
        )));
    }
    let before = st.counter();
    let sc = OuterScalars::compute(st);
    if !(sc.r2 > F::zero()) {
        return Ok(None);
    }
    let m = st.candidate_count();
    // d₁: the candidate direction best aligned with μ_K − ν_t.
    st.count_scalar(m);
    let mut first = None;
    let mut best = F::neg_infinity();
    for c in 0..m {
        if !(sc.alpha[c] > F::zero()) {
            continue;
        }
        let a = sc.p[c] / sc.alpha[c].sqrt();
        if a > best {
            best = a;
            first = Some(c);
        }
    }
    let Some(first) = first else { return Ok(None) };
    if !(sc.p[first] > F::zero()) {
        return Ok(None);
    }
    let mut b = Builder::new(m);
    b.add(st, &sc, first, F::one());
    let mut lambda = F::one();
    let mut cos = sc.cos(b.inner, b.norm_sq);
    let mut trace = vec![InnerRound {
        cos_theta: cos,
        residual_sq: sc.r2 - F::lit(2.0) * b.inner + b.norm_sq,
        direction_norm_sq: b.norm_sq,
        step: F::one(),
        backward: false,
        lambda,
        atom: Some(first),
        ops: st.counter().since(before),
    }];

    for _ in 1..k_max {
        let before = st.counter();
        if !(b.inner > F::zero()) {
            return Err(Error::Invariant(format!(
                "q = ⟨μ_K − ν_t, d_k⟩ = {} is not positive",
                b.inner
            )));
        }
        st.count_scalar(m);
        let Some((y, step, _)) = best_cos_step(&sc.p, &sc.alpha, &b.beta, b.inner, b.norm_sq)
        else {
            break;
        };
        let (new_inner, new_norm, refit) = if fully_corrective {
            let mut idx: Vec<usize> = b.atoms.iter().map(|&(c, _)| c).collect();
            if !idx.contains(&y) {
                idx.push(y);
            }
            let coefs = refit_nonnegative(st, &sc, &idx)?;
            let (qi, nn) = direction_scalars(st, &sc, &coefs);
            (qi, nn, Some(coefs))
        } else {
            (
                b.inner + step * sc.p[y],
                b.norm_sq + F::lit(2.0) * step * b.beta[y] + step * step * sc.alpha[y],
                None,
            )
        };
        let new_cos = sc.cos(new_inner, new_norm);
        if !(new_cos - cos > delta) {
            break;
        }
        match refit {
            Some(coefs) => {
                b.reset(st, &sc, coefs);
                lambda = b.atoms.iter().map(|&(_, a)| a).sum();
            }
            None => {
                b.add(st, &sc, y, step);
                lambda += step;
            }
        }
        cos = sc.cos(b.inner, b.norm_sq);
        trace.push(InnerRound {
            cos_theta: cos,
            residual_sq: sc.r2 - F::lit(2.0) * b.inner + b.norm_sq,
            direction_norm_sq: b.norm_sq,
            step,
            backward: false,
            lambda,
            atom: Some(y),
            ops: st.counter().since(before),
        });
    }
    finish(b, lambda, cos, trace)
}

/// Positive matching pursuit (forward vertex steps and backward shrink steps).
pub fn pmp<F: Scalar>(
    st: &mut ResidualState<F>,
    k_max: usize,
    delta: F,
) -> Result<Option<Direction<F>>> {
    matching_pursuit(st, k_max, delta, false)
}

/// Matching pursuit with a non-negative least-squares refit after each round.
pub fn fc_pmp<F: Scalar>(
    st: &mut ResidualState<F>,
    k_max: usize,
    delta: F,
) -> Result<Option<Direction<F>>> {
    matching_pursuit(st, k_max, delta, true)
}

/// Greedy maximization of `cos θ_t` using the closed-form step.
pub fn gcos<F: Scalar>(
    st: &mut ResidualState<F>,
    k_max: usize,
    delta: F,
) -> Result<Option<Direction<F>>> {
    greedy_cos(st, k_max, delta, false)
}

/// Greedy cos maximization with all coefficients refitted by NNLS each round.
pub fn fc_gcos<F: Scalar>(
    st: &mut ResidualState<F>,
    k_max: usize,
    delta: F,
) -> Result<Option<Direction<F>>> {
    greedy_cos(st, k_max, delta, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn align_cases() {
        assert_eq!(align(4.0, 4.0, 4.0), 1.0);
        assert_eq!(align(4.0, 0.0, 0.0), -1.0);
        assert_eq!(align(1.0, 1.0, 0.0), 0.0);
        // rounding above 1 is clamped
        assert_eq!(align(1.0, 1.0, 1.0 + 1e-15), 1.0);
    }

    #[test]
    fn closed_form_orthogonal_atom() {
        let s = CosStepScalars {
            p: 0.0,
            q: 1.0,
            alpha: 1.0,
            beta: 0.0,
            gamma: 1.0,
        };
        assert!(gcos_closed_form(&s).is_none());
    }

    #[test]
    fn closed_form_improving_atom() {
        let s = CosStepScalars::<f64> {
            p: 1.0,
            q: 1.0,
            alpha: 1.0,
            beta: 0.0,
            gamma: 1.0,
        };
        let (c, v) = gcos_closed_form(&s).unwrap();
        assert!((c - 1.0).abs() < 1e-15);
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn closed_form_rejects_minimum() {
        let s = CosStepScalars {
            p: -1.0,
            q: 1.0,
            alpha: 1.0,
            beta: 0.0,
            gamma: 1.0,
        };
        assert!(gcos_closed_form(&s).is_none());
    }

    #[test]
    fn closed_form_degenerate_denominator() {
        // pβ − qα = 0
        let s = CosStepScalars {
            p: 1.0,
            q: 1.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: 2.0,
        };
        assert!(gcos_closed_form(&s).is_none());
    }
}
