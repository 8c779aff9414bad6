//! Discrete measures and the RKHS inner-product engine.
//!
//! Every inner product between `μ_K`, a discrete measure `ν = Σ ωⱼ K(xⱼ, ·)` and
//! kernel atoms reduces to kernel evaluations, values `zⱼ = μ_K(xⱼ)`, the
//! scalar `⟨μ_K, μ_K⟩` and the self energy `⟨ν, ν⟩ = ωᵀ K_X ω`.

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, MeanEmbedding};
use crate::linalg::{cholesky_with_jitter, most_collinear_pair, SquareMatrix};
use crate::scalar::{distance, Scalar};

/// Nodes closer than this are the same node.
pub const MERGE_TOL: f64 = 1e-12;
/// Allowed negativity of a simplex weight.
pub const SIMPLEX_NEG_TOL: f64 = 1e-12;
/// Allowed deviation of the weight sum from one.
pub const SIMPLEX_SUM_TOL: f64 = 1e-10;
/// Number of incremental self-energy updates between full recomputations.
pub const REFRESH_PERIOD: usize = 64;

/// A quadrature rule `Σ ωᵢ δ_{xᵢ}` with pairwise distinct nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<F> {
    nodes: Vec<Vec<F>>,
    weights: Vec<F>,
}

impl<F: Scalar> Default for DiscreteMeasure<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> DiscreteMeasure<F> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Dirac measure at `x`.
    pub fn dirac(x: Vec<F>) -> Self {
        Self {
            nodes: vec![x],
            weights: vec![F::one()],
        }
    }

    /// Builds a measure, merging nodes closer than [`MERGE_TOL`].
    pub fn from_parts(nodes: Vec<Vec<F>>, weights: Vec<F>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::Argument(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        let mut m = Self::new();
        for (x, w) in nodes.into_iter().zip(weights) {
            m.push(x, w);
        }
        Ok(m)
    }

    /// Adds `w δ_x`; returns the index of the (possibly merged) node.
    pub fn push(&mut self, x: Vec<F>, w: F) -> usize {
        if let Some(i) = self.find(&x) {
            self.weights[i] += w;
            i
        } else {
            self.nodes.push(x);
            self.weights.push(w);
            self.nodes.len() - 1
        }
    }

    /// Index of a node within [`MERGE_TOL`] of `x`.
    pub fn find(&self, x: &[F]) -> Option<usize> {
        let tol = F::lit(MERGE_TOL);
        self.nodes.iter().position(|n| distance(n, x) <= tol)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<F>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [F] {
        &mut self.weights
    }

    pub fn total_weight(&self) -> F {
        self.weights.iter().copied().sum()
    }

    /// Number of nodes carrying positive weight.
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&w| w > F::zero()).count()
    }

    /// `(min weight, |Σω − 1|)`.
    pub fn simplex_violation(&self) -> (F, F) {
        let min = self.weights.iter().copied().fold(F::infinity(), F::min);
        (min, (self.total_weight() - F::one()).abs())
    }

    pub fn is_on_simplex(&self) -> bool {
        let (min, dev) = self.simplex_violation();
        min >= -F::lit(SIMPLEX_NEG_TOL) && dev <= F::tol(SIMPLEX_SUM_TOL)
    }

    /// Drops nodes whose weight is at most `threshold`.
    pub fn prune(&mut self, threshold: F) {
        let keep: Vec<bool> = self.weights.iter().map(|&w| w > threshold).collect();
        let mut k = keep.iter();
        self.nodes.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.weights.retain(|_| *k.next().unwrap());
    }

    /// `Σ ωᵢ f(xᵢ)`.
    pub fn integrate(&self, f: impl Fn(&[F]) -> F) -> F {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, &w)| w * f(x))
            .sum()
    }
}

/// Cached Gram matrix, embedding values and self energy of a node set.
#[derive(Debug, Clone)]
pub struct GramCache<F> {
    nodes: Vec<Vec<F>>,
    gram: Vec<Vec<F>>,
    z: Vec<F>,
    weights: Vec<F>,
    self_energy: F,
    updates_since_refresh: usize,
}

impl<F: Scalar> Default for GramCache<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> GramCache<F> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            gram: Vec::new(),
            z: Vec::new(),
            weights: Vec::new(),
            self_energy: F::zero(),
            updates_since_refresh: 0,
        }
    }

    /// Cache for the nodes and weights of `measure`.
    pub fn build(
        kernel: &KernelSpec<F>,
        emb: &MeanEmbedding<F>,
        measure: &DiscreteMeasure<F>,
    ) -> Self {
        let mut cache = Self::new();
        for x in measure.nodes() {
            let row: Vec<F> = cache
                .nodes
                .iter()
                .map(|n| kernel.eval_unchecked(n, x))
                .collect();
            let diag = kernel.eval_unchecked(x, x);
            cache.push_node(x.clone(), emb.eval_unchecked(x), row, diag);
        }
        cache.set_weights(measure.weights());
        cache
    }

    /// Appends a node with weight zero. `row[j] = K(nodes[j], x)`.
    pub fn push_node(&mut self, x: Vec<F>, z: F, row: Vec<F>, diag: F) -> usize {
        assert_eq!(row.len(), self.nodes.len(), "kernel row has wrong length");
        for (r, &v) in self.gram.iter_mut().zip(&row) {
            r.push(v);
        }
        let mut new_row = row;
        new_row.push(diag);
        self.gram.push(new_row);
        self.nodes.push(x);
        self.z.push(z);
        self.weights.push(F::zero());
        self.nodes.len() - 1
    }

    /// Removes the nodes whose `keep` flag is false.
    pub fn retain(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.nodes.len());
        let filter = |v: &mut Vec<F>| {
            let mut k = keep.iter();
            v.retain(|_| *k.next().unwrap());
        };
        for row in self.gram.iter_mut() {
            filter(row);
        }
        let mut k = keep.iter();
        self.gram.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.nodes.retain(|_| *k.next().unwrap());
        filter(&mut self.z);
        filter(&mut self.weights);
        self.recompute_self_energy();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<F>] {
        &self.nodes
    }

    #[inline]
    pub fn gram(&self, i: usize, j: usize) -> F {
        self.gram[i][j]
    }

    pub fn gram_row(&self, i: usize) -> &[F] {
        &self.gram[i]
    }

    pub fn gram_matrix(&self) -> SquareMatrix<F> {
        SquareMatrix::from_rows(&self.gram)
    }

    pub fn z(&self) -> &[F] {
        &self.z
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    /// `ωᵀ K_X ω` as maintained.
    pub fn self_energy(&self) -> F {
        self.self_energy
    }

    /// `Σ ωⱼ zⱼ = ⟨μ_K, ν⟩`.
    pub fn mu_dot_nu(&self) -> F {
        self.weights.iter().zip(&self.z).map(|(&w, &z)| w * z).sum()
    }

    /// `(K_X ω)_i = ν(xᵢ)`.
    pub fn nu_at_node(&self, i: usize) -> F {
        self.gram[i]
            .iter()
            .zip(&self.weights)
            .map(|(&g, &w)| g * w)
            .sum()
    }

    /// `ωᵀ K_X ω` from scratch.
    pub fn quad_form(&self, w: &[F]) -> F {
        let mut s = F::zero();
        for (i, row) in self.gram.iter().enumerate() {
            if w[i] == F::zero() {
                continue;
            }
            let ri: F = row.iter().zip(w).map(|(&g, &v)| g * v).sum();
            s += w[i] * ri;
        }
        s
    }

    pub fn recompute_self_energy(&mut self) -> F {
        self.self_energy = self.quad_form(&self.weights);
        self.updates_since_refresh = 0;
        self.self_energy
    }

    /// Replaces all weights and recomputes the self energy.
    pub fn set_weights(&mut self, w: &[F]) {
        assert_eq!(w.len(), self.weights.len());
        self.weights.copy_from_slice(w);
        self.recompute_self_energy();
    }

    /// `ω ← (1 − γ) ω + γ a` where `a` is given sparsely as `(node, weight)`.
    ///
    /// The self energy is updated in O(n·|a|) and recomputed in full every
    /// [`REFRESH_PERIOD`] updates.
    pub fn convex_update(&mut self, gamma: F, atoms: &[(usize, F)]) {
        let one_minus = F::one() - gamma;
        // ⟨ν, a⟩ and ‖a‖² with the old weights.
        let cross: F = atoms.iter().map(|&(i, a)| a * self.nu_at_node(i)).sum();
        let mut aa = F::zero();
        for &(i, ai) in atoms {
            for &(j, aj) in atoms {
                aa += ai * aj * self.gram[i][j];
            }
        }
        for w in self.weights.iter_mut() {
            *w *= one_minus;
        }
        for &(i, a) in atoms {
            self.weights[i] += gamma * a;
        }
        self.self_energy = one_minus * one_minus * self.self_energy
            + F::lit(2.0) * gamma * one_minus * cross
            + gamma * gamma * aa;
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= REFRESH_PERIOD {
            self.recompute_self_energy();
        }
    }

    /// True when the cached nodes are exactly the nodes of `measure`.
    pub fn matches(&self, measure: &DiscreteMeasure<F>) -> bool {
        self.nodes.as_slice() == measure.nodes()
    }
}

fn check_cache<F: Scalar>(measure: &DiscreteMeasure<F>, cache: &GramCache<F>) -> Result<()> {
    if !cache.matches(measure) {
        return Err(Error::Internal(format!(
            "Gram cache holds {} nodes, measure has {} (or node lists differ)",
            cache.len(),
            measure.len()
        )));
    }
    Ok(())
}

fn self_energy_for<F: Scalar>(measure: &DiscreteMeasure<F>, cache: &GramCache<F>) -> F {
    if cache.weights() == measure.weights() {
        cache.self_energy()
    } else {
        cache.quad_form(measure.weights())
    }
}

/// `‖μ_K − ν‖² = ⟨μ_K, μ_K⟩ − 2 Σ ωᵢ zᵢ + ΣΣ ωᵢ ωⱼ K(xᵢ, xⱼ)`, unclamped.
pub fn mmd_squared<F: Scalar>(
    measure: &DiscreteMeasure<F>,
    emb: &MeanEmbedding<F>,
    cache: &GramCache<F>,
) -> Result<F> {
    check_cache(measure, cache)?;
    let mu_nu: F = measure
        .weights()
        .iter()
        .zip(cache.z())
        .map(|(&w, &z)| w * z)
        .sum();
    Ok(emb.double_integral() - F::lit(2.0) * mu_nu + self_energy_for(measure, cache))
}

/// MMD `‖μ_K − ν‖`, with small negative rounding clamped to zero.
pub fn mmd<F: Scalar>(
    measure: &DiscreteMeasure<F>,
    emb: &MeanEmbedding<F>,
    cache: &GramCache<F>,
) -> Result<F> {
    Ok(mmd_squared(measure, emb, cache)?.max(F::zero()).sqrt())
}

/// `⟨μ_K − ν, K(y, ·) − ν⟩ = μ_K(y) − Σ ωⱼ K(y, xⱼ) − Σ ωⱼ zⱼ + ⟨ν, ν⟩`.
pub fn inner_residual_vs_atom<F: Scalar>(
    emb: &MeanEmbedding<F>,
    measure: &DiscreteMeasure<F>,
    cache: &GramCache<F>,
    y: &[F],
) -> Result<F> {
    check_cache(measure, cache)?;
    let kernel = emb.kernel();
    kernel.domain().check(y)?;
    let nu_y: F = measure
        .nodes()
        .iter()
        .zip(measure.weights())
        .map(|(x, &w)| w * kernel.eval_unchecked(y, x))
        .sum();
    let mu_nu: F = measure
        .weights()
        .iter()
        .zip(cache.z())
        .map(|(&w, &z)| w * z)
        .sum();
    Ok(emb.eval_unchecked(y) - nu_y - mu_nu + self_energy_for(measure, cache))
}

/// Weights minimizing the MMD over all real weights on fixed nodes.
#[derive(Debug, Clone)]
pub struct OptimalWeights<F> {
    pub weights: Vec<F>,
    /// `⟨μ_K, μ_K⟩ − zᵀ K_X⁻¹ z`.
    pub worst_case_error_sq: F,
    /// Diagonal jitter added to `K_X`, zero when none was needed.
    pub jitter: F,
}

impl<F: Scalar> OptimalWeights<F> {
    pub fn worst_case_error(&self) -> F {
        self.worst_case_error_sq.max(F::zero()).sqrt()
    }

    pub fn jitter_applied(&self) -> bool {
        self.jitter > F::zero()
    }
}

/// Solves `K_X ω = z_X` and returns the squared worst-case error.
pub fn optimal_weights<F: Scalar>(
    nodes: &[Vec<F>],
    emb: &MeanEmbedding<F>,
) -> Result<OptimalWeights<F>> {
    if nodes.is_empty() {
        return Err(Error::Argument(
            "optimal_weights needs at least one node".into(),
        ));
    }
    let kernel = emb.kernel();
    for x in nodes {
        kernel.domain().check(x)?;
    }
    let gram = SquareMatrix::from_fn(nodes.len(), |i, j| {
        kernel.eval_unchecked(&nodes[i], &nodes[j])
    });
    let z: Vec<F> = nodes.iter().map(|x| emb.eval_unchecked(x)).collect();
    let chol = cholesky_with_jitter(&gram).map_err(|_| {
        let (i, j) = most_collinear_pair(&gram);
        Error::Conditioning { i, j }
    })?;
    let weights = chol.factor.solve(&z);
    let zw: F = z.iter().zip(&weights).map(|(&a, &b)| a * b).sum();
    Ok(OptimalWeights {
        weights,
        worst_case_error_sq: emb.double_integral() - zw,
        jitter: chol.jitter,
    })
}

/// KKT report of a simplex-constrained quadrature rule.
#[derive(Debug, Clone, Copy)]
pub struct OrthogonalityReport<F> {
    /// `max |⟨μ_K − ν, K(xⱼ, ·) − ν⟩|` over the support `ωⱼ > 1e−8`.
    pub support_residual: F,
    /// `max ⟨μ_K − ν, K(xⱼ, ·) − ν⟩` over zero-weight nodes; ≤ 0 at the optimum.
    pub off_support_max: F,
}

/// Support threshold for the orthogonality check.
pub const SUPPORT_TOL: f64 = 1e-8;

/// Full KKT report; see [`fc_orthogonality_residual`].
pub fn fc_orthogonality_report<F: Scalar>(
    measure: &DiscreteMeasure<F>,
    emb: &MeanEmbedding<F>,
    cache: &GramCache<F>,
) -> Result<OrthogonalityReport<F>> {
    check_cache(measure, cache)?;
    for x in measure.nodes() {
        emb.kernel().domain().check(x)?;
    }
    if !measure.is_on_simplex() {
        let (min, dev) = measure.simplex_violation();
        return Err(Error::Argument(format!(
            "weights not on the simplex (min {min}, |sum − 1| = {dev})"
        )));
    }
    let w = measure.weights();
    let mu_nu: F = w.iter().zip(cache.z()).map(|(&a, &b)| a * b).sum();
    let energy = self_energy_for(measure, cache);
    let mut support_residual = F::zero();
    let mut off_support_max = F::neg_infinity();
    for j in 0..measure.len() {
        let nu_j: F = cache.gram_row(j).iter().zip(w).map(|(&g, &v)| g * v).sum();
        let inner = cache.z()[j] - nu_j - mu_nu + energy;
        if w[j] > F::lit(SUPPORT_TOL) {
            support_residual = support_residual.max(inner.abs());
        } else {
            off_support_max = off_support_max.max(inner);
        }
    }
    Ok(OrthogonalityReport {
        support_residual,
        off_support_max,
    })
}

/// Stationarity residual `max_{j: ωⱼ > 1e−8} |⟨μ_K − ν, K(xⱼ, ·) − ν⟩|` of a
/// simplex-optimal rule; zero when `K ω = z − ε 𝟙` holds on the support.
pub fn fc_orthogonality_residual<F: Scalar>(
    measure: &DiscreteMeasure<F>,
    emb: &MeanEmbedding<F>,
    cache: &GramCache<F>,
) -> Result<F> {
    Ok(fc_orthogonality_report(measure, emb, cache)?.support_residual)
}
