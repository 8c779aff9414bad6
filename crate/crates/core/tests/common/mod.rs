#![allow(dead_code)]

use std::sync::Arc;

use kernel_herding::bench::generate_candidates;
use kernel_herding::kernels::sampling::{rng_for, Stream};
use kernel_herding::kernels::{analytic_embedding, BaseMeasure, KernelSpec, MeanEmbedding};
use kernel_herding::residual::CandidatePool;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng_for(seed, Stream::Instance)
}

/// Adaptive Simpson on `[a, b]`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

pub fn uniform_box(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn uniform_sphere(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

pub fn gaussian_setup(m: usize, seed: u64) -> (MeanEmbedding<f64>, Arc<CandidatePool<f64>>) {
    let k = KernelSpec::gaussian(2).unwrap();
    let emb = analytic_embedding(&k, BaseMeasure::TruncatedGaussian).unwrap();
    let pts = generate_candidates(k.domain(), BaseMeasure::TruncatedGaussian, m, seed).unwrap();
    let pool = Arc::new(CandidatePool::new(&emb, pts).unwrap());
    (emb, pool)
}

pub fn sphere_setup(m: usize, seed: u64) -> (MeanEmbedding<f64>, Arc<CandidatePool<f64>>) {
    let k = KernelSpec::sphere_distance();
    let emb = analytic_embedding(&k, BaseMeasure::Uniform).unwrap();
    let pts = generate_candidates(k.domain(), BaseMeasure::Uniform, m, seed).unwrap();
    let pool = Arc::new(CandidatePool::new(&emb, pts).unwrap());
    (emb, pool)
}

/// `‖μ_K − Σ ωᵢ K(xᵢ, ·)‖²` by direct double sums.
pub fn brute_mmd_sq(emb: &MeanEmbedding<f64>, nodes: &[Vec<f64>], w: &[f64]) -> f64 {
    let k = emb.kernel();
    let mut s = emb.double_integral();
    for i in 0..nodes.len() {
        s -= 2.0 * w[i] * emb.eval(&nodes[i]).unwrap();
        for j in 0..nodes.len() {
            s += w[i] * w[j] * k.eval(&nodes[i], &nodes[j]).unwrap();
        }
    }
    s
}

pub fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn quad_objective(g: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..c.len() {
        s -= 2.0 * b[i] * c[i];
        for j in 0..c.len() {
            s += c[i] * g[i][j] * c[j];
        }
    }
    s
}

pub fn random_spd(rng: &mut ChaCha8Rng, k: usize) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let s: f64 = (0..k).map(|l| a[i][l] * a[j][l]).sum();
                    s + if i == j { 0.1 } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

/// Exact minimum of `cᵀGc − 2bᵀc` over `c ≥ 0` (or the simplex) by solving the
/// stationarity system on every support set and keeping the best feasible one.
pub fn enumerate_supports(g: &[Vec<f64>], b: &[f64], simplex: bool) -> (f64, Vec<f64>) {
    let k = b.len();
    let mut best = (if simplex { f64::INFINITY } else { 0.0 }, vec![0.0; k]);
    for mask in 1u32..(1 << k) {
        let s: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        let n = s.len() + usize::from(simplex);
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut rhs = nalgebra::DVector::<f64>::zeros(n);
        for (a, &i) in s.iter().enumerate() {
            for (bb, &j) in s.iter().enumerate() {
                m[(a, bb)] = g[i][j];
            }
            rhs[a] = b[i];
            if simplex {
                m[(a, s.len())] = -1.0;
                m[(s.len(), a)] = 1.0;
            }
        }
        if simplex {
            rhs[s.len()] = 1.0;
        }
        let Some(sol) = m.lu().solve(&rhs) else {
            continue;
        };
        if s.iter().enumerate().any(|(a, _)| sol[a] < 0.0) {
            continue;
        }
        let mut c = vec![0.0; k];
        for (a, &i) in s.iter().enumerate() {
            c[i] = sol[a];
        }
        let v = quad_objective(g, b, &c);
        if v < best.0 {
            best = (v, c);
        }
    }
    best
}

/// Best objective over a uniform grid on `[0, c_max]^k`.
pub fn grid_search_orthant(g: &[Vec<f64>], b: &[f64], c_max: f64, steps: usize) -> f64 {
    let k = b.len();
    let mut idx = vec![0usize; k];
    let mut best = f64::INFINITY;
    let h = c_max / steps as f64;
    loop {
        let c: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
        best = best.min(quad_objective(g, b, &c));
        let mut d = 0;
        loop {
            if d == k {
                return best;
            }
            idx[d] += 1;
            if idx[d] <= steps {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Best objective over `n` Dirichlet(1, …, 1) samples plus the vertices.
pub fn dirichlet_search(rng: &mut ChaCha8Rng, g: &[Vec<f64>], b: &[f64], n: usize) -> f64 {
    let k = b.len();
    let mut best = f64::INFINITY;
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        best = best.min(quad_objective(g, b, &e));
    }
    for _ in 0..n {
        let w = random_simplex(rng, k);
        best = best.min(quad_objective(g, b, &w));
    }
    best
}
