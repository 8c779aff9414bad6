//! The herding iterate `ν_t` expressed over a fixed candidate pool.
//!
//! Nodes of `ν_t` are always candidate points, so every quantity the
//! optimizers need is a combination of
//!
//! * `zᶜ = μ_K(yᶜ)` and `K(yᶜ, yᶜ)` (precomputed per pool),
//! * kernel columns `K(·, yʲ)` over all candidates (computed once per atom),
//! * `ν_t(yᶜ)`, `⟨μ_K, ν_t⟩` and `⟨ν_t, ν_t⟩` (maintained incrementally).
//!
//! With `R = μ_K − ν_t` and atoms `aᶜ = K(yᶜ, ·) − ν_t`:
//!
//! ```text
//! ⟨R, aᶜ⟩   = zᶜ − ν(yᶜ) − ⟨μ_K, ν⟩ + ⟨ν, ν⟩
//! ‖aᶜ‖²     = K(yᶜ, yᶜ) − 2 ν(yᶜ) + ⟨ν, ν⟩
//! ⟨aᶜ, aʲ⟩  = K(yᶜ, yʲ) − ν(yᶜ) − ν(yʲ) + ⟨ν, ν⟩
//! ‖R‖²      = ⟨μ_K, μ_K⟩ − 2 ⟨μ_K, ν⟩ + ⟨ν, ν⟩
//! ```

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::embedding::{DiscreteMeasure, GramCache, REFRESH_PERIOD};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, MeanEmbedding};
use crate::scalar::Scalar;

/// Candidate points with their embedding values; immutable and shareable
/// between runs on the same candidate set.
#[derive(Debug, Clone)]
pub struct CandidatePool<F> {
    kernel: KernelSpec<F>,
    points: Vec<Vec<F>>,
    z: Vec<F>,
    diag: Vec<F>,
    mu_mu: F,
}

impl<F: Scalar> CandidatePool<F> {
    /// Evaluates `μ_K` at every candidate (in parallel).
    pub fn new(emb: &MeanEmbedding<F>, points: Vec<Vec<F>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Argument("candidate set is empty".into()));
        }
        let kernel = emb.kernel().clone();
        for p in &points {
            kernel.domain().check(p)?;
        }
        let z = emb.eval_many(&points);
        let diag = points.iter().map(|p| kernel.eval_unchecked(p, p)).collect();
        Ok(Self {
            kernel,
            points,
            z,
            diag,
            mu_mu: emb.double_integral(),
        })
    }

    pub fn kernel(&self) -> &KernelSpec<F> {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<F>] {
        &self.points
    }

    pub fn point(&self, c: usize) -> &[F] {
        &self.points[c]
    }

    /// `μ_K(yᶜ)`.
    pub fn z(&self) -> &[F] {
        &self.z
    }

    /// `⟨μ_K, μ_K⟩`.
    pub fn mu_mu(&self) -> F {
        self.mu_mu
    }

    /// Candidate maximizing `μ_K`, lowest index on ties.
    pub fn best_single_atom(&self) -> usize {
        argmax(self.z.iter().copied()).expect("pool is nonempty")
    }
}

/// Index of the largest value, lowest index on ties; NaNs are skipped.
pub fn argmax<F: Scalar>(values: impl IntoIterator<Item = F>) -> Option<usize> {
    let mut best: Option<(usize, F)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Operation counters for cost instrumentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    /// Kernel evaluations `K(yᶜ, yʲ)`.
    pub kernel_evals: u64,
    /// Per-candidate scalar updates (closed-form steps, inner-product updates).
    pub scalar_evals: u64,
}

impl OpCounter {
    pub fn since(self, earlier: OpCounter) -> OpCounter {
        OpCounter {
            kernel_evals: self.kernel_evals - earlier.kernel_evals,
            scalar_evals: self.scalar_evals - earlier.scalar_evals,
        }
    }
}

/// Mutable herding iterate over a [`CandidatePool`].
#[derive(Debug, Clone)]
pub struct ResidualState<F> {
    pool: Arc<CandidatePool<F>>,
    columns: Vec<Option<Vec<F>>>,
    /// Candidate index of every node, aligned with the Gram cache.
    node_cands: Vec<usize>,
    node_of: HashMap<usize, usize>,
    cache: GramCache<F>,
    nu_at: Vec<F>,
    mu_nu: F,
    steps_since_refresh: usize,
    counter: OpCounter,
}

impl<F: Scalar> ResidualState<F> {
    /// `ν = δ_{y_start}`.
    pub fn new(pool: Arc<CandidatePool<F>>, start: usize) -> Result<Self> {
        if start >= pool.len() {
            return Err(Error::Argument(format!(
                "start index {start} out of range for {} candidates",
                pool.len()
            )));
        }
        let m = pool.len();
        let mut s = Self {
            pool,
            columns: vec![None; m],
            node_cands: Vec::new(),
            node_of: HashMap::new(),
            cache: GramCache::new(),
            nu_at: vec![F::zero(); m],
            mu_nu: F::zero(),
            steps_since_refresh: 0,
            counter: OpCounter::default(),
        };
        let node = s.ensure_node(start);
        let mut w = vec![F::zero(); s.cache.len()];
        w[node] = F::one();
        s.set_node_weights(&w);
        Ok(s)
    }

    pub fn pool(&self) -> &CandidatePool<F> {
        &self.pool
    }

    pub fn candidate_count(&self) -> usize {
        self.pool.len()
    }

    pub fn counter(&self) -> OpCounter {
        self.counter
    }

    pub(crate) fn count_scalar(&mut self, n: usize) {
        self.counter.scalar_evals += n as u64;
    }

    /// Column `K(yᶜ, yʲ)` over all candidates `c`.
    pub fn column(&mut self, j: usize) -> &[F] {
        if self.columns[j].is_none() {
            let pool = &self.pool;
            let yj = &pool.points[j];
            let col: Vec<F> = pool
                .points
                .par_iter()
                .map(|y| pool.kernel.eval_unchecked(y, yj))
                .collect();
            self.counter.kernel_evals += col.len() as u64;
            self.columns[j] = Some(col);
        }
        self.columns[j].as_deref().expect("column just computed")
    }

    fn column_ref(&self, j: usize) -> &[F] {
        self.columns[j]
            .as_deref()
            .expect("column must be computed first")
    }

    /// Makes sure candidate `c` is a node (weight zero if new); returns its node index.
    fn ensure_node(&mut self, c: usize) -> usize {
        if let Some(&i) = self.node_of.get(&c) {
            return i;
        }
        self.column(c);
        let col = self.column_ref(c);
        let row: Vec<F> = self.node_cands.iter().map(|&j| col[j]).collect();
        let diag = col[c];
        let point = self.pool.points[c].clone();
        let i = self.cache.push_node(point, self.pool.z[c], row, diag);
        self.node_cands.push(c);
        self.node_of.insert(c, i);
        i
    }

    /// `ν(yᶜ)`.
    #[inline]
    pub fn nu_at(&self, c: usize) -> F {
        self.nu_at[c]
    }

    pub fn nu_values(&self) -> &[F] {
        &self.nu_at
    }

    /// `⟨ν, ν⟩`.
    #[inline]
    pub fn self_energy(&self) -> F {
        self.cache.self_energy()
    }

    /// `⟨μ_K, ν⟩`.
    #[inline]
    pub fn mu_nu(&self) -> F {
        self.mu_nu
    }

    /// `‖μ_K − ν‖²`, unclamped.
    pub fn residual_sq(&self) -> F {
        self.pool.mu_mu - F::lit(2.0) * self.mu_nu + self.self_energy()
    }

    /// `ε = ½ ‖μ_K − ν‖²`.
    pub fn epsilon(&self) -> F {
        self.residual_sq() * F::lit(0.5)
    }

    /// `⟨μ_K − ν, K(yᶜ, ·) − ν⟩`.
    #[inline]
    pub fn inner_residual(&self, c: usize) -> F {
        self.pool.z[c] - self.nu_at[c] - self.mu_nu + self.self_energy()
    }

    /// `‖K(yᶜ, ·) − ν‖²`.
    #[inline]
    pub fn atom_norm_sq(&self, c: usize) -> F {
        self.pool.diag[c] - F::lit(2.0) * self.nu_at[c] + self.self_energy()
    }

    /// `⟨K(yᶜ, ·) − ν, K(yʲ, ·) − ν⟩`.
    pub fn atom_inner(&mut self, c: usize, j: usize) -> F {
        let k = self.column(j)[c];
        k - self.nu_at[c] - self.nu_at[j] + self.self_energy()
    }

    /// Vertex maximizing the Frank–Wolfe score `⟨μ_K − ν, K(yᶜ, ·) − ν⟩`.
    pub fn argmax_vertex(&mut self) -> usize {
        let m = self.pool.len();
        self.count_scalar(m);
        argmax((0..m).map(|c| self.inner_residual(c))).expect("pool is nonempty")
    }

    pub fn node_count(&self) -> usize {
        self.cache.len()
    }

    /// Candidate index of each node.
    pub fn node_candidates(&self) -> &[usize] {
        &self.node_cands
    }

    pub fn weights(&self) -> &[F] {
        self.cache.weights()
    }

    pub fn cache(&self) -> &GramCache<F> {
        &self.cache
    }

    /// Node index of candidate `c`, if it is a node.
    pub fn node_of(&self, c: usize) -> Option<usize> {
        self.node_of.get(&c).copied()
    }

    /// `ν ← (1 − γ) ν + γ Σ aᵢ K(y_{cᵢ}, ·)` for `atoms = [(cᵢ, aᵢ)]`.
    pub fn convex_step(&mut self, gamma: F, atoms: &[(usize, F)]) {
        let node_atoms: Vec<(usize, F)> = atoms
            .iter()
            .map(|&(c, a)| (self.ensure_node(c), a))
            .collect();
        let one_minus = F::one() - gamma;
        self.mu_nu = one_minus * self.mu_nu
            + gamma * atoms.iter().map(|&(c, a)| a * self.pool.z[c]).sum::<F>();
        self.cache.convex_update(gamma, &node_atoms);
        for v in self.nu_at.iter_mut() {
            *v *= one_minus;
        }
        for &(c, a) in atoms {
            let scale = gamma * a;
            let col = self.columns[c].as_deref().expect("atom column computed");
            for (v, &k) in self.nu_at.iter_mut().zip(col) {
                *v += scale * k;
            }
        }
        self.counter.scalar_evals += (self.nu_at.len() * (atoms.len() + 1)) as u64;
        self.steps_since_refresh += 1;
        if self.steps_since_refresh >= REFRESH_PERIOD {
            self.refresh();
        }
    }

    /// Adds candidate `c` as a node with weight zero.
    pub fn add_node(&mut self, c: usize) -> usize {
        self.ensure_node(c)
    }

    /// Replaces all node weights and recomputes every maintained quantity.
    pub fn set_node_weights(&mut self, w: &[F]) {
        self.cache.set_weights(w);
        self.refresh();
    }

    /// Removes nodes with weight at most `threshold`.
    pub fn prune(&mut self, threshold: F) {
        let keep: Vec<bool> = self
            .cache
            .weights()
            .iter()
            .map(|&w| w > threshold)
            .collect();
        if keep.iter().all(|&k| k) {
            return;
        }
        self.cache.retain(&keep);
        let mut k = keep.iter();
        self.node_cands.retain(|_| *k.next().unwrap());
        self.node_of = self
            .node_cands
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();
        self.refresh();
    }

    /// Recomputes `ν(yᶜ)`, `⟨μ_K, ν⟩` and `⟨ν, ν⟩` from cached columns.
    pub fn refresh(&mut self) {
        self.cache.recompute_self_energy();
        self.mu_nu = self.cache.mu_dot_nu();
        let w = self.cache.weights().to_vec();
        self.nu_at.iter_mut().for_each(|v| *v = F::zero());
        for (&c, &wi) in self.node_cands.iter().zip(&w) {
            if wi == F::zero() {
                continue;
            }
            let col = self.columns[c].as_deref().expect("node column computed");
            for (v, &k) in self.nu_at.iter_mut().zip(col) {
                *v += wi * k;
            }
        }
        self.counter.scalar_evals += (self.nu_at.len() * self.node_cands.len()) as u64;
        self.steps_since_refresh = 0;
    }

    /// The iterate as a quadrature rule (nodes with positive weight only).
    pub fn to_measure(&self) -> DiscreteMeasure<F> {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (i, &w) in self.cache.weights().iter().enumerate() {
            if w > F::zero() {
                nodes.push(self.cache.nodes()[i].clone());
                weights.push(w);
            }
        }
        DiscreteMeasure::from_parts(nodes, weights).expect("aligned lengths")
    }

    /// Number of nodes with positive weight.
    pub fn support_size(&self) -> usize {
        self.cache
            .weights()
            .iter()
            .filter(|&&w| w > F::zero())
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{inner_residual_vs_atom, mmd_squared, GramCache};
    use crate::kernels::sampling::{rng_for, Stream};
    use crate::kernels::{analytic_embedding, sample_measure, BaseMeasure};

    fn setup(m: usize) -> (MeanEmbedding<f64>, Arc<CandidatePool<f64>>) {
        let k = KernelSpec::gaussian(2).unwrap();
        let e = analytic_embedding(&k, BaseMeasure::TruncatedGaussian).unwrap();
        let pts = sample_measure(
            k.domain(),
            BaseMeasure::TruncatedGaussian,
            m,
            &mut rng_for(5, Stream::Candidates),
        )
        .unwrap();
        let pool = Arc::new(CandidatePool::new(&e, pts).unwrap());
        (e, pool)
    }

    #[test]
    fn maintained_scalars_match_direct_evaluation() {
        let (e, pool) = setup(60);
        let mut s = ResidualState::new(pool.clone(), pool.best_single_atom()).unwrap();
        for step in 0..150 {
            let a = (step * 13 + 7) % 60;
            let b = (step * 29 + 3) % 60;
            s.convex_step(0.2, &[(a, 0.7), (b, 0.3)]);
        }
        let meas = s.to_measure();
        let kernel = pool.kernel().clone();
        let cache = GramCache::build(&kernel, &e, &meas);
        let direct = mmd_squared(&meas, &e, &cache).unwrap();
        assert!((s.residual_sq() - direct).abs() < 1e-12);
        for c in [0, 17, 59] {
            let y = pool.point(c).to_vec();
            let d = inner_residual_vs_atom(&e, &meas, &cache, &y).unwrap();
            assert!((s.inner_residual(c) - d).abs() < 1e-12);
        }
    }

    #[test]
    fn prune_and_reweight() {
        let (_, pool) = setup(10);
        let mut s = ResidualState::new(pool, 0).unwrap();
        s.add_node(3);
        s.add_node(4);
        s.set_node_weights(&[0.5, 0.0, 0.5]);
        s.prune(1e-10);
        assert_eq!(s.node_candidates(), &[0, 4]);
        assert_eq!(s.node_of(4), Some(1));
        let w: f64 = s.weights().iter().sum();
        assert!((w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax([1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax([f64::NAN, 0.0]), Some(1));
        assert_eq!(argmax(Vec::<f64>::new()), None);
    }
}
