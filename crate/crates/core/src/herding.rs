//! Herding drivers: equal-weight and line-search herding, fully-corrective
//! herding, and the accelerated scheme `ν_{t+1} = ν_t + γ_t g_t`.
//!
//! [`Herder`] advances one outer iteration per [`Herder::step`] so callers can
//! inspect every iterate; [`herd`] runs to completion.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::embedding::{inner_residual_vs_atom, DiscreteMeasure, GramCache};
use crate::error::{Error, Result};
use crate::gradapprox::{
    self, align, Direction, InnerRound, DEFAULT_DELTA_GCOS, DEFAULT_DELTA_PMP,
};
use crate::kernels::MeanEmbedding;
use crate::residual::{argmax, CandidatePool, OpCounter, ResidualState};
use crate::scalar::Scalar;
use crate::simplexopt::{simplex_qp_warm, QuadraticProblem};

/// Runs stop once `ε_t` drops below this.
pub const EPSILON_FLOOR: f64 = 1e-14;
/// Fully-corrective weights below this leave the active set.
pub const FC_PRUNE_TOL: f64 = 1e-10;

/// Gradient approximator of the accelerated scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Approximator {
    Pmp,
    Gcos,
    FcPmp,
    FcGcos,
}

impl Approximator {
    pub fn default_delta(self) -> f64 {
        match self {
            Self::Pmp | Self::FcPmp => DEFAULT_DELTA_PMP,
            Self::Gcos | Self::FcGcos => DEFAULT_DELTA_GCOS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Step `1/(t+1)`.
    EqWeight,
    /// Exact line search along the selected vertex.
    LineSearch,
    /// Simplex-constrained reoptimization of all weights after each vertex.
    FullyCorrective,
    Accelerated(Approximator),
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::EqWeight,
        Variant::LineSearch,
        Variant::FullyCorrective,
        Variant::Accelerated(Approximator::Pmp),
        Variant::Accelerated(Approximator::Gcos),
        Variant::Accelerated(Approximator::FcPmp),
        Variant::Accelerated(Approximator::FcGcos),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::EqWeight => "eq_weight",
            Variant::LineSearch => "linesearch",
            Variant::FullyCorrective => "fc",
            Variant::Accelerated(Approximator::Pmp) => "pmp",
            Variant::Accelerated(Approximator::Gcos) => "gcos",
            Variant::Accelerated(Approximator::FcPmp) => "fc_pmp",
            Variant::Accelerated(Approximator::FcGcos) => "fc_gcos",
        }
    }

    /// `δ` used when none is configured; zero for variants without inner loops.
    pub fn default_delta(self) -> f64 {
        match self {
            Variant::Accelerated(a) => a.default_delta(),
            _ => 0.0,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct HerdingConfig<F> {
    pub variant: Variant,
    /// Maximum number of iterates `ν_1, …, ν_T`.
    pub iterations: usize,
    pub k_max: usize,
    pub delta: F,
    /// Keep every inner round in the trace.
    pub record_inner: bool,
}

impl<F: Scalar> HerdingConfig<F> {
    /// Defaults: `K_max = 10` and the variant's default `δ`.
    pub fn new(variant: Variant, iterations: usize) -> Self {
        Self {
            variant,
            iterations,
            k_max: 10,
            delta: F::lit(variant.default_delta()),
            record_inner: false,
        }
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn with_delta(mut self, delta: F) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_inner_trace(mut self) -> Self {
        self.record_inner = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Config("K_max must be at least 1".into()));
        }
        match self.variant {
            Variant::Accelerated(Approximator::Gcos | Approximator::FcGcos)
                if !(self.delta >= F::zero()) =>
            {
                Err(Error::Config(format!(
                    "{} needs δ ≥ 0, got {}",
                    self.variant, self.delta
                )))
            }
            Variant::Accelerated(Approximator::Pmp | Approximator::FcPmp)
                if !(self.delta < F::one()) =>
            {
                Err(Error::Config(format!(
                    "{} needs δ < 1, got {}",
                    self.variant, self.delta
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Row `t` of a trace: the state of `ν_t` and the step from `ν_t` to `ν_{t+1}`.
#[derive(Debug, Clone)]
pub struct IterationRecord<F> {
    /// 1-based iterate index.
    pub t: usize,
    /// `ε_t = ½ ‖μ_K − ν_t‖²`.
    pub epsilon: F,
    /// `√(2 ε_t)`.
    pub mmd: F,
    /// Distinct nodes of `ν_t`.
    pub node_count: usize,
    /// Seconds since the run started, at the time `ν_t` was formed.
    pub wall_time: f64,
    /// `cos θ_t` of the direction taken from `ν_t`; NaN on the last row.
    pub cos_theta: F,
    /// Step size `γ_t`; NaN on the last row.
    pub gamma: F,
    /// Inner rounds `K_t` spent on the step (1 for vertex steps, 0 on the last row).
    pub inner_rounds: usize,
    /// Work spent forming `ν_{t+1}`.
    pub ops: OpCounter,
    /// Present when the config asks for it.
    pub inner: Vec<InnerRound<F>>,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    /// `ε_t` fell below [`EPSILON_FLOOR`].
    Converged,
    /// No descent direction among the candidates.
    NoDescent,
}

#[derive(Debug, Clone)]
pub struct IterationTrace<F> {
    pub variant: Variant,
    pub rows: Vec<IterationRecord<F>>,
    pub stop: StopReason,
}

/// `γ = clamp(⟨μ_K − ν, g⟩ / ‖g‖², 0, 1)`.
pub fn line_search_step<F: Scalar>(inner: F, norm_sq: F) -> Result<F> {
    if !(norm_sq > F::zero()) {
        return Err(Error::DegenerateDirection);
    }
    Ok((inner / norm_sq).max(F::zero()).min(F::one()))
}

/// Line-search step along an approximator's output `g = d / Λ`.
pub fn direction_step<F: Scalar>(dir: &Direction<F>) -> Result<F> {
    line_search_step(dir.g_inner(), dir.g_norm_sq())
}

/// Index of the candidate maximizing `⟨μ_K − ν, K(y, ·) − ν⟩`; lowest index on ties.
pub fn argmax_vertex<F: Scalar>(
    emb: &MeanEmbedding<F>,
    measure: &DiscreteMeasure<F>,
    cache: &GramCache<F>,
    candidates: &[Vec<F>],
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Argument("candidate set is empty".into()));
    }
    let scores = candidates
        .iter()
        .map(|y| inner_residual_vs_atom(emb, measure, cache, y))
        .collect::<Result<Vec<F>>>()?;
    argmax(scores).ok_or_else(|| Error::Argument("no finite score among candidates".into()))
}

/// Step-by-step herding run over a candidate pool.
pub struct Herder<F> {
    config: HerdingConfig<F>,
    state: ResidualState<F>,
    start: Instant,
    pending: Option<IterationRecord<F>>,
    t: usize,
    done: Option<StopReason>,
}

impl<F: Scalar> Herder<F> {
    /// Starts from `ν_1 = K(y*, ·)` with `y* = argmax_c μ_K(y_c)`.
    pub fn new(config: HerdingConfig<F>, pool: Arc<CandidatePool<F>>) -> Result<Self> {
        config.validate()?;
        let start_at = pool.best_single_atom();
        let start = Instant::now();
        let state = ResidualState::new(pool, start_at)?;
        let mut h = Self {
            config,
            state,
            start,
            pending: None,
            t: 1,
            done: None,
        };
        h.pending = Some(h.snapshot());
        Ok(h)
    }

    pub fn state(&self) -> &ResidualState<F> {
        &self.state
    }

    pub fn config(&self) -> &HerdingConfig<F> {
        &self.config
    }

    /// Index `t` of the current iterate `ν_t`.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.done
    }

    /// Distinct nodes of the current iterate.
    pub fn node_count(&self) -> usize {
        match self.config.variant {
            Variant::FullyCorrective => self.state.support_size(),
            _ => self.state.node_count(),
        }
    }

    fn snapshot(&self) -> IterationRecord<F> {
        let eps = self.state.epsilon();
        IterationRecord {
            t: self.t,
            epsilon: eps,
            mmd: (eps * F::lit(2.0)).max(F::zero()).sqrt(),
            node_count: self.node_count(),
            wall_time: self.start.elapsed().as_secs_f64(),
            cos_theta: F::nan(),
            gamma: F::nan(),
            inner_rounds: 0,
            ops: OpCounter::default(),
            inner: Vec::new(),
        }
    }

    /// Advances to `ν_{t+1}` and returns the completed row for `ν_t`, or
    /// finishes the run and returns its last row. `None` once finished.
    pub fn step(&mut self) -> Result<Option<IterationRecord<F>>> {
        let Some(mut row) = self.pending.take() else {
            return Ok(None);
        };
        if self.t >= self.config.iterations {
            self.done = Some(StopReason::MaxIterations);
            return Ok(Some(row));
        }
        if row.epsilon < F::lit(EPSILON_FLOOR) {
            self.done = Some(StopReason::Converged);
            return Ok(Some(row));
        }
        let before = self.state.counter();
        let moved = match self.config.variant {
            Variant::EqWeight | Variant::LineSearch => self.vertex_step(&mut row)?,
            Variant::FullyCorrective => self.fully_corrective_step(&mut row)?,
            Variant::Accelerated(a) => self.accelerated_step(a, &mut row)?,
        };
        row.ops = self.state.counter().since(before);
        if !moved {
            row.cos_theta = F::nan();
            row.gamma = F::nan();
            row.inner_rounds = 0;
            row.inner.clear();
            self.done = Some(StopReason::NoDescent);
            return Ok(Some(row));
        }
        self.t += 1;
        self.pending = Some(self.snapshot());
        Ok(Some(row))
    }

    /// Runs the remaining iterations and returns the final rule and trace.
    pub fn run(mut self) -> Result<(DiscreteMeasure<F>, IterationTrace<F>)> {
        let mut rows = Vec::new();
        while let Some(r) = self.step()? {
            rows.push(r);
        }
        let trace = IterationTrace {
            variant: self.config.variant,
            rows,
            stop: self.done.unwrap_or(StopReason::MaxIterations),
        };
        Ok((self.state.to_measure(), trace))
    }

    /// Vertex `v` and the line-search data along `K(v, ·) − ν_t`:
    /// `(v, cos θ, γ*)`, or `None` when no vertex descends.
    fn best_vertex(&mut self) -> Option<(usize, F, F)> {
        let v = self.state.argmax_vertex();
        let p = self.state.inner_residual(v);
        let a = self.state.atom_norm_sq(v);
        if !(p > F::zero()) || !(a > F::zero()) {
            return None;
        }
        let cos = align(self.state.residual_sq(), a, p);
        let gamma = line_search_step(p, a).ok()?;
        Some((v, cos, gamma))
    }

    fn vertex_step(&mut self, row: &mut IterationRecord<F>) -> Result<bool> {
        let eq = self.config.variant == Variant::EqWeight;
        let (v, cos, gamma) = if eq {
            let v = self.state.argmax_vertex();
            let p = self.state.inner_residual(v);
            let a = self.state.atom_norm_sq(v);
            (
                v,
                align(self.state.residual_sq(), a, p),
                F::one() / F::from_usize_lossy(self.t + 1),
            )
        } else {
            match self.best_vertex() {
                Some(s) => s,
                None => return Ok(false),
            }
        };
        if !eq && !(gamma > F::zero()) {
            return Ok(false);
        }
        self.state.convex_step(gamma, &[(v, F::one())]);
        row.cos_theta = cos;
        row.gamma = gamma;
        row.inner_rounds = 1;
        Ok(true)
    }

    fn fully_corrective_step(&mut self, row: &mut IterationRecord<F>) -> Result<bool> {
        let Some((v, cos, gamma)) = self.best_vertex() else {
            return Ok(false);
        };
        row.cos_theta = cos;
        row.gamma = gamma;
        row.inner_rounds = 1;

        // Line-search point, as a fallback and a bound for the QP.
        let mut line_w: Vec<F> = self
            .state
            .weights()
            .iter()
            .map(|&w| (F::one() - gamma) * w)
            .collect();
        let node = self.state.add_node(v);
        line_w.resize(self.state.node_count(), F::zero());
        line_w[node] += gamma;
        let mut warm: Vec<F> = self.state.weights().to_vec();
        warm.resize(self.state.node_count(), F::zero());

        let cache = self.state.cache();
        let prob = QuadraticProblem::new(cache.gram_matrix(), cache.z().to_vec())?;
        let sol = simplex_qp_warm(&prob, Some(&warm))?;
        let k = prob.dim();
        self.state.count_scalar(k * k * sol.iterations.max(1));
        let w = if prob.objective(&sol.x) <= prob.objective(&line_w) {
            sol.x
        } else {
            line_w
        };
        // Below the solver tolerance the new vertex is dropped again; stop
        // instead of repeating the same iterate.
        if w[node] <= F::lit(FC_PRUNE_TOL) && !(prob.objective(&w) < prob.objective(&warm)) {
            self.state.prune(F::zero());
            return Ok(false);
        }
        self.state.set_node_weights(&w);
        self.state.prune(F::lit(FC_PRUNE_TOL));
        let total: F = self.state.weights().iter().copied().sum();
        if total != F::one() {
            let w: Vec<F> = self.state.weights().iter().map(|&x| x / total).collect();
            self.state.set_node_weights(&w);
        }
        Ok(true)
    }

    fn accelerated_step(&mut self, a: Approximator, row: &mut IterationRecord<F>) -> Result<bool> {
        let (k, d) = (self.config.k_max, self.config.delta);
        let dir = match a {
            Approximator::Pmp => gradapprox::pmp(&mut self.state, k, d)?,
            Approximator::Gcos => gradapprox::gcos(&mut self.state, k, d)?,
            Approximator::FcPmp => gradapprox::fc_pmp(&mut self.state, k, d)?,
            Approximator::FcGcos => gradapprox::fc_gcos(&mut self.state, k, d)?,
        };
        let Some(dir) = dir else { return Ok(false) };
        let gamma = match direction_step(&dir) {
            Ok(g) => g,
            Err(Error::DegenerateDirection) => return Ok(false),
            Err(e) => return Err(e),
        };
        if !(gamma > F::zero()) {
            return Ok(false);
        }
        self.state.convex_step(gamma, &dir.normalized_atoms());
        row.cos_theta = dir.cos_theta;
        row.gamma = gamma;
        row.inner_rounds = dir.rounds;
        if self.config.record_inner {
            row.inner = dir.trace;
        }
        Ok(true)
    }
}

/// Runs `config` over a prepared pool.
pub fn herd<F: Scalar>(
    config: &HerdingConfig<F>,
    pool: Arc<CandidatePool<F>>,
) -> Result<(DiscreteMeasure<F>, IterationTrace<F>)> {
    Herder::new(config.clone(), pool)?.run()
}

fn herd_points<F: Scalar>(
    config: &HerdingConfig<F>,
    emb: &MeanEmbedding<F>,
    candidates: &[Vec<F>],
) -> Result<(DiscreteMeasure<F>, IterationTrace<F>)> {
    if candidates.is_empty() {
        return Err(Error::Argument("candidate set is empty".into()));
    }
    let pool = Arc::new(CandidatePool::new(emb, candidates.to_vec())?);
    herd(config, pool)
}

/// Equal-weight or line-search herding.
pub fn herd_vanilla<F: Scalar>(
    config: &HerdingConfig<F>,
    emb: &MeanEmbedding<F>,
    candidates: &[Vec<F>],
) -> Result<(DiscreteMeasure<F>, IterationTrace<F>)> {
    match config.variant {
        Variant::EqWeight | Variant::LineSearch => herd_points(config, emb, candidates),
        v => Err(Error::Config(format!("herd_vanilla cannot run `{v}`"))),
    }
}

pub fn herd_fully_corrective<F: Scalar>(
    config: &HerdingConfig<F>,
    emb: &MeanEmbedding<F>,
    candidates: &[Vec<F>],
) -> Result<(DiscreteMeasure<F>, IterationTrace<F>)> {
    match config.variant {
        Variant::FullyCorrective => herd_points(config, emb, candidates),
        v => Err(Error::Config(format!(
            "herd_fully_corrective cannot run `{v}`"
        ))),
    }
}

pub fn herd_accelerated<F: Scalar>(
    config: &HerdingConfig<F>,
    emb: &MeanEmbedding<F>,
    candidates: &[Vec<F>],
) -> Result<(DiscreteMeasure<F>, IterationTrace<F>)> {
    match config.variant {
        Variant::Accelerated(_) => herd_points(config, emb, candidates),
        v => Err(Error::Config(format!("herd_accelerated cannot run `{v}`"))),
    }
}
