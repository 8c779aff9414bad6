//! Small dense constrained quadratic programs in Gram form.
//!
//! Both solvers minimize `cᵀ G c − 2 bᵀ c` with `G` symmetric positive
//! semidefinite, either over the nonnegative orthant ([`nnls`]) or over the
//! probability simplex ([`simplex_qp`]). Termination is decided by a KKT
//! certificate with tolerance `τ = 1e−8 (1 + ‖b‖∞)`.
//!
//! Problems with at most [`ACTIVE_SET_MAX`] variables, and all warm-started
//! problems, go straight to a primal active-set method in the style of
//! Lawson–Hanson. Larger cold starts first run a Barzilai–Borwein projected
//! gradient and hand its support to the active-set method.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_regularized, SquareMatrix};
use crate::scalar::{dot, Scalar};

pub const ACTIVE_SET_MAX: usize = 256;
/// Rows closer than this (max-abs) are treated as duplicate atoms.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// `min cᵀ G c − 2 bᵀ c` data.
#[derive(Debug, Clone)]
pub struct QuadraticProblem<F> {
    g: SquareMatrix<F>,
    b: Vec<F>,
}

impl<F: Scalar> QuadraticProblem<F> {
    pub fn new(g: SquareMatrix<F>, b: Vec<F>) -> Result<Self> {
        if g.dim() != b.len() {
            return Err(Error::Argument(format!(
                "G is {0}×{0} but b has length {1}",
                g.dim(),
                b.len()
            )));
        }
        if g.dim() == 0 {
            return Err(Error::Argument("empty quadratic problem".into()));
        }
        let scale = F::one().max(
            (0..g.dim())
                .map(|i| g.get(i, i).abs())
                .fold(F::zero(), F::max),
        );
        if g.asymmetry() > F::tol(1e-12) * scale {
            return Err(Error::Argument("G is not symmetric".into()));
        }
        if let Some(i) = (0..g.dim()).find(|&i| g.get(i, i) < F::zero()) {
            return Err(Error::Argument(format!("G has negative diagonal at {i}")));
        }
        Ok(Self { g, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn g(&self) -> &SquareMatrix<F> {
        &self.g
    }

    pub fn b(&self) -> &[F] {
        &self.b
    }

    pub fn objective(&self, c: &[F]) -> F {
        self.g.quad_form(c) - F::lit(2.0) * dot(&self.b, c)
    }

    /// `G c − b`, half the gradient.
    pub fn half_gradient(&self, c: &[F]) -> Vec<F> {
        self.g
            .mul_vec(c)
            .into_iter()
            .zip(&self.b)
            .map(|(a, &b)| a - b)
            .collect()
    }

    /// Certificate tolerance `1e−8 (1 + ‖b‖∞)`.
    pub fn tolerance(&self) -> F {
        let binf = self.b.iter().fold(F::zero(), |a, &v| a.max(v.abs()));
        F::tol(1e-8) * (F::one() + binf)
    }
}

/// Solver output with its certificate data.
#[derive(Debug, Clone)]
pub struct QpSolution<F> {
    pub x: Vec<F>,
    pub objective: F,
    /// Simplex multiplier `s` (zero for NNLS).
    pub multiplier: F,
    /// Smallest achievable KKT violation; at most the tolerance on success.
    pub kkt_violation: F,
    pub iterations: usize,
    /// Objective after every accepted primal move.
    pub history: Vec<F>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Feasible {
    Orthant,
    Simplex,
}

/// Non-negative least squares in Gram form.
pub fn nnls<F: Scalar>(prob: &QuadraticProblem<F>) -> Result<QpSolution<F>> {
    nnls_warm(prob, None)
}

/// [`nnls`] started from `init` (clamped to the orthant).
pub fn nnls_warm<F: Scalar>(
    prob: &QuadraticProblem<F>,
    init: Option<&[F]>,
) -> Result<QpSolution<F>> {
    solve(prob, init, Feasible::Orthant)
}

/// Quadratic program over the probability simplex.
pub fn simplex_qp<F: Scalar>(prob: &QuadraticProblem<F>) -> Result<QpSolution<F>> {
    simplex_qp_warm(prob, None)
}

/// [`simplex_qp`] started from `init` (projected back onto the simplex).
pub fn simplex_qp_warm<F: Scalar>(
    prob: &QuadraticProblem<F>,
    init: Option<&[F]>,
) -> Result<QpSolution<F>> {
    solve(prob, init, Feasible::Simplex)
}

fn solve<F: Scalar>(
    prob: &QuadraticProblem<F>,
    init: Option<&[F]>,
    kind: Feasible,
) -> Result<QpSolution<F>> {
    if let Some(w) = init {
        if w.len() != prob.dim() {
            return Err(Error::Argument("warm start has wrong length".into()));
        }
    }
    let groups = duplicate_groups(prob);
    let reps: Vec<usize> = groups.iter().map(|g| g[0]).collect();
    let reduced = if reps.len() == prob.dim() {
        None
    } else {
        Some(QuadraticProblem {
            g: prob.g.submatrix(&reps),
            b: reps.iter().map(|&i| prob.b[i]).collect(),
        })
    };
    let work = reduced.as_ref().unwrap_or(prob);
    let init_reduced = init.map(|w| {
        groups
            .iter()
            .map(|grp| grp.iter().map(|&i| w[i]).sum::<F>())
            .collect::<Vec<F>>()
    });
    let start = match kind {
        Feasible::Orthant => start_orthant(work, init_reduced.as_deref()),
        Feasible::Simplex => start_simplex(work, init_reduced.as_deref()),
    };
    // A warm start is usually one or two active-set moves from optimal.
    let start = if work.dim() > ACTIVE_SET_MAX && init.is_none() {
        projected_gradient(work, start, kind)
    } else {
        start
    };
    let mut sol = active_set(work, start, kind)?;
    if reduced.is_some() {
        let mut full = vec![F::zero(); prob.dim()];
        for (&r, &v) in reps.iter().zip(&sol.x) {
            full[r] = v;
        }
        sol.x = full;
        sol.objective = prob.objective(&sol.x);
    }
    Ok(sol)
}

/// Index groups of identical atoms (rows of `G` and entries of `b`).
fn duplicate_groups<F: Scalar>(prob: &QuadraticProblem<F>) -> Vec<Vec<usize>> {
    let k = prob.dim();
    let tol = F::lit(DUPLICATE_TOL);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    'outer: for i in 0..k {
        for grp in groups.iter_mut() {
            let r = grp[0];
            let same = (prob.b[i] - prob.b[r]).abs() <= tol
                && prob
                    .g
                    .row(i)
                    .iter()
                    .zip(prob.g.row(r))
                    .all(|(&a, &b)| (a - b).abs() <= tol);
            if same {
                grp.push(i);
                continue 'outer;
            }
        }
        groups.push(vec![i]);
    }
    groups
}

fn start_orthant<F: Scalar>(prob: &QuadraticProblem<F>, init: Option<&[F]>) -> Vec<F> {
    match init {
        Some(w) => w.iter().map(|&v| v.max(F::zero())).collect(),
        None => vec![F::zero(); prob.dim()],
    }
}

fn start_simplex<F: Scalar>(prob: &QuadraticProblem<F>, init: Option<&[F]>) -> Vec<F> {
    if let Some(w) = init {
        let clamped: Vec<F> = w.iter().map(|&v| v.max(F::zero())).collect();
        let s: F = clamped.iter().copied().sum();
        if s > F::zero() && s.is_finite() {
            return clamped.into_iter().map(|v| v / s).collect();
        }
    }
    // Best vertex: argmin G_ii − 2 b_i.
    let k = prob.dim();
    let best = (0..k)
        .min_by(|&i, &j| {
            let fi = prob.g.get(i, i) - F::lit(2.0) * prob.b[i];
            let fj = prob.g.get(j, j) - F::lit(2.0) * prob.b[j];
            fi.partial_cmp(&fj).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let mut x = vec![F::zero(); k];
    x[best] = F::one();
    x
}

/// Minimizer of the equality-constrained problem on the passive set.
/// Returns `(z restricted to passive, multiplier)`.
fn solve_passive<F: Scalar>(
    prob: &QuadraticProblem<F>,
    passive: &[usize],
    kind: Feasible,
) -> (Vec<F>, F) {
    let g = prob.g.submatrix(passive);
    let b: Vec<F> = passive.iter().map(|&i| prob.b[i]).collect();
    let (chol, _) = cholesky_regularized(&g);
    let y1 = chol.solve(&b);
    match kind {
        Feasible::Orthant => (y1, F::zero()),
        Feasible::Simplex => {
            let y2 = chol.solve(&vec![F::one(); passive.len()]);
            let s1: F = y1.iter().copied().sum();
            let s2: F = y2.iter().copied().sum();
            let s = (F::one() - s1) / s2;
            (y1.iter().zip(&y2).map(|(&a, &c)| a + s * c).collect(), s)
        }
    }
}

fn active_set<F: Scalar>(
    prob: &QuadraticProblem<F>,
    mut x: Vec<F>,
    kind: Feasible,
) -> Result<QpSolution<F>> {
    let k = prob.dim();
    let tau = prob.tolerance();
    let mut passive: Vec<bool> = x.iter().map(|&v| v > F::zero()).collect();
    let mut blocked = vec![false; k];
    let mut history = vec![prob.objective(&x)];
    let cap = 30 * k + 100;
    let mut iterations = 0;
    let mut multiplier;
    let mut just_added: Option<usize> = None;

    loop {
        iterations += 1;
        if iterations > cap {
            let (v, _) = kkt_violation(prob, &x, kind);
            return Err(Error::Solver {
                iterations: cap,
                kkt_violation: v.as_f64(),
            });
        }
        let entering = just_added.take();
        let mut first_solve = true;
        // Inner loop: optimal point on the passive face, staying feasible.
        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            if idx.is_empty() {
                // Only reachable for the orthant: the origin.
                x.iter_mut().for_each(|v| *v = F::zero());
                multiplier = F::zero();
                break;
            }
            let (z, s) = solve_passive(prob, &idx, kind);
            if first_solve {
                first_solve = false;
                if let Some(j) = entering {
                    let pos = idx
                        .iter()
                        .position(|&i| i == j)
                        .expect("entering index is passive");
                    if !(z[pos] > F::zero()) {
                        // Rejected by the face solve; keep it out until x moves.
                        passive[j] = false;
                        blocked[j] = true;
                        first_solve = true;
                        continue;
                    }
                }
            }
            if z.iter().all(|&v| v > F::zero()) {
                x.iter_mut().for_each(|v| *v = F::zero());
                for (&i, &v) in idx.iter().zip(&z) {
                    x[i] = v;
                }
                multiplier = s;
                break;
            }
            // Step from x towards z until the first coordinate hits zero.
            let mut alpha = F::one();
            let mut leaving = None;
            for (&i, &zi) in idx.iter().zip(&z) {
                if zi <= F::zero() {
                    let a = x[i] / (x[i] - zi);
                    if a < alpha {
                        alpha = a;
                        leaving = Some(i);
                    }
                }
            }
            for (&i, &zi) in idx.iter().zip(&z) {
                x[i] = x[i] + alpha * (zi - x[i]);
            }
            if let Some(l) = leaving {
                x[l] = F::zero();
            }
            for &i in &idx {
                if x[i] <= F::zero() {
                    x[i] = F::zero();
                    passive[i] = false;
                }
            }
            if kind == Feasible::Simplex {
                renormalize(&mut x);
            }
            history.push(prob.objective(&x));
        }
        history.push(prob.objective(&x));
        if let Some(j) = entering {
            if passive[j] || !blocked[j] {
                blocked.iter_mut().for_each(|b| *b = false);
            }
        }

        // Dual check on the inactive coordinates.
        let w = prob.half_gradient(&x);
        let shift = match kind {
            Feasible::Orthant => F::zero(),
            Feasible::Simplex => multiplier,
        };
        let entering = (0..k)
            .filter(|&i| !passive[i] && !blocked[i])
            .map(|i| (i, w[i] - shift))
            .filter(|&(_, r)| r < -tau)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        match entering {
            Some((j, _)) => {
                passive[j] = true;
                just_added = Some(j);
            }
            None => break,
        }
    }

    if kind == Feasible::Simplex {
        renormalize(&mut x);
    }
    let (violation, s) = kkt_violation(prob, &x, kind);
    if violation > tau {
        return Err(Error::Solver {
            iterations,
            kkt_violation: violation.as_f64(),
        });
    }
    let objective = prob.objective(&x);
    Ok(QpSolution {
        x,
        objective,
        multiplier: s,
        kkt_violation: violation,
        iterations,
        history,
    })
}

fn renormalize<F: Scalar>(x: &mut [F]) {
    let s: F = x.iter().copied().sum();
    if s > F::zero() {
        x.iter_mut().for_each(|v| *v /= s);
    }
}

/// `(violation, multiplier)`: the smallest achievable worst KKT violation of `x`.
pub fn kkt_violation_of<F: Scalar>(prob: &QuadraticProblem<F>, x: &[F], simplex: bool) -> F {
    let kind = if simplex {
        Feasible::Simplex
    } else {
        Feasible::Orthant
    };
    kkt_violation(prob, x, kind).0
}

fn kkt_violation<F: Scalar>(prob: &QuadraticProblem<F>, x: &[F], kind: Feasible) -> (F, F) {
    let w = prob.half_gradient(x);
    let tau = prob.tolerance();
    match kind {
        Feasible::Orthant => {
            let mut v = F::zero();
            for (i, &wi) in w.iter().enumerate() {
                v = v.max(-wi);
                if x[i] > tau {
                    v = v.max(wi.abs());
                }
            }
            (v, F::zero())
        }
        Feasible::Simplex => {
            let min_all = w.iter().copied().fold(F::infinity(), F::min);
            let max_sup = w
                .iter()
                .zip(x)
                .filter(|(_, &xi)| xi > F::zero())
                .map(|(&wi, _)| wi)
                .fold(F::neg_infinity(), F::max);
            let s = (max_sup + min_all) * F::lit(0.5);
            ((max_sup - min_all).max(F::zero()) * F::lit(0.5), s)
        }
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex<F: Scalar>(v: &[F]) -> Vec<F> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut css = F::zero();
    let mut theta = F::zero();
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - F::one()) / F::from_usize_lossy(i + 1);
        if ui - t > F::zero() {
            theta = t;
        }
    }
    v.iter().map(|&vi| (vi - theta).max(F::zero())).collect()
}

/// Barzilai–Borwein projected gradient; returns its last iterate.
fn projected_gradient<F: Scalar>(prob: &QuadraticProblem<F>, x0: Vec<F>, kind: Feasible) -> Vec<F> {
    let project = |v: &[F]| -> Vec<F> {
        match kind {
            Feasible::Orthant => v.iter().map(|&a| a.max(F::zero())).collect(),
            Feasible::Simplex => project_simplex(v),
        }
    };
    let mut x = project(&x0);
    let mut grad = prob.half_gradient(&x);
    let lmax = (0..prob.dim())
        .map(|i| prob.g.get(i, i))
        .fold(F::zero(), F::max)
        * F::from_usize_lossy(prob.dim());
    let mut step = F::one() / lmax.max(F::min_positive_value());
    let mut best = x.clone();
    let mut best_obj = prob.objective(&x);
    for _ in 0..2000 {
        let trial: Vec<F> = x.iter().zip(&grad).map(|(&a, &g)| a - step * g).collect();
        let xn = project(&trial);
        let gn = prob.half_gradient(&xn);
        let s: Vec<F> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<F> = gn.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        let ss = dot(&s, &s);
        x = xn;
        grad = gn;
        let obj = prob.objective(&x);
        if obj < best_obj {
            best_obj = obj;
            best = x.clone();
        }
        if ss <= F::min_positive_value() {
            break;
        }
        step = if sy > F::zero() {
            ss / sy
        } else {
            step * F::lit(2.0)
        };
    }
    best
}
