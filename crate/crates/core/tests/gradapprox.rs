mod common;

use std::sync::Arc;

use common::{rng, uniform_box};
use kernel_herding::gradapprox::{
    align, best_cos_step, fc_gcos, fc_pmp, gcos, gcos_closed_form, pmp,
};
use kernel_herding::herding::{herd, Approximator, Herder, HerdingConfig, Variant};
use kernel_herding::kernels::mean::embedding_from_sample;
use kernel_herding::{CandidatePool, CosStepScalars, Direction, Error, KernelSpec, ResidualState};

/// An RKHS element `Σ aᵢ K(xᵢ, ·)`.
type Element = Vec<(Vec<f64>, f64)>;

/// Explicit-expansion oracle over an empirical target.
struct Oracle {
    kernel: KernelSpec,
    sample: Vec<Vec<f64>>,
    candidates: Vec<Vec<f64>>,
    nu: Element,
}

impl Oracle {
    fn new(st: &ResidualState, sample: &[Vec<f64>]) -> Self {
        let pool = st.pool();
        let nu = st
            .node_candidates()
            .iter()
            .zip(st.weights())
            .map(|(&c, &w)| (pool.point(c).to_vec(), w))
            .collect();
        Self {
            kernel: pool.kernel().clone(),
            sample: sample.to_vec(),
            candidates: pool.points().to_vec(),
            nu,
        }
    }

    fn inner(&self, f: &Element, g: &Element) -> f64 {
        let mut s = 0.0;
        for (x, a) in f {
            for (y, b) in g {
                s += a * b * self.kernel.eval(x, y).unwrap();
            }
        }
        s
    }

    fn residual(&self) -> Element {
        let n = self.sample.len() as f64;
        let mut r: Element = self.sample.iter().map(|x| (x.clone(), 1.0 / n)).collect();
        r.extend(self.nu.iter().map(|(x, w)| (x.clone(), -w)));
        r
    }

    /// `Σ cᵢ (K(yᶜ, ·) − ν)`.
    fn combination(&self, atoms: &[(usize, f64)]) -> Element {
        let mut out = Element::new();
        for &(c, a) in atoms {
            out.push((self.candidates[c].clone(), a));
            out.extend(self.nu.iter().map(|(x, w)| (x.clone(), -a * w)));
        }
        out
    }

    fn atom(&self, c: usize) -> Element {
        self.combination(&[(c, 1.0)])
    }

    fn minus(&self, f: &Element, g: &Element) -> Element {
        let mut out = f.clone();
        out.extend(g.iter().map(|(x, a)| (x.clone(), -a)));
        out
    }
}

struct Instance {
    sample: Vec<Vec<f64>>,
    state: ResidualState,
}

/// Matérn kernel, empirical target on `n` points, `m` candidates, `t0`
/// line-search iterations already taken.
fn instance(seed: u64, n: usize, m: usize, t0: usize) -> Instance {
    let kernel = KernelSpec::matern32(2).unwrap();
    let mut r = rng(seed);
    let sample: Vec<Vec<f64>> = (0..n).map(|_| uniform_box(&mut r, 2)).collect();
    let candidates: Vec<Vec<f64>> = (0..m).map(|_| uniform_box(&mut r, 2)).collect();
    let emb = embedding_from_sample(&kernel, sample.clone());
    let pool = Arc::new(CandidatePool::new(&emb, candidates).unwrap());
    let mut h = Herder::new(HerdingConfig::new(Variant::LineSearch, t0 + 1), pool).unwrap();
    for _ in 0..t0 {
        h.step().unwrap();
    }
    Instance {
        sample,
        state: h.state().clone(),
    }
}

fn check_against_oracle(o: &Oracle, dir: &Direction) {
    let r = o.residual();
    let d = o.combination(&dir.atoms);
    let scale = o.inner(&r, &r).max(1e-300);
    assert!((o.inner(&r, &d) - dir.inner).abs() < 1e-10 * (1.0 + scale.sqrt()));
    assert!((o.inner(&d, &d) - dir.norm_sq).abs() < 1e-10 * (1.0 + dir.norm_sq));
    let cos = align(o.inner(&r, &r), o.inner(&d, &d), o.inner(&r, &d));
    assert!((cos - dir.cos_theta).abs() < 1e-8);
    assert!((dir.coefficient_sum() - dir.lambda).abs() < 1e-10 * dir.lambda.max(1.0));
    assert!(dir.atoms.iter().all(|&(_, a)| a >= -1e-12));
    assert!(dir.lambda > 0.0);
}

#[test]
fn argument_errors() {
    let mut inst = instance(0, 20, 30, 3);
    assert!(matches!(
        pmp(&mut inst.state, 0, -1e-4),
        Err(Error::Argument(_))
    ));
    assert!(matches!(
        pmp(&mut inst.state, 5, 1.0),
        Err(Error::Argument(_))
    ));
    assert!(matches!(
        gcos(&mut inst.state, 0, 0.0),
        Err(Error::Argument(_))
    ));
    assert!(matches!(
        gcos(&mut inst.state, 5, -1e-3),
        Err(Error::Argument(_))
    ));
    assert!(matches!(
        fc_gcos(&mut inst.state, 5, -1e-3),
        Err(Error::Argument(_))
    ));
}

#[test]
fn pmp_single_round_is_vertex() {
    for seed in 0..10 {
        let mut inst = instance(seed, 25, 40, 4);
        let o = Oracle::new(&inst.state, &inst.sample);
        let r = o.residual();
        let scores: Vec<f64> = (0..40).map(|c| o.inner(&r, &o.atom(c))).collect();
        let best = (0..40).fold(0, |b, c| if scores[c] > scores[b] { c } else { b });
        let dir = pmp(&mut inst.state, 1, -1e-4).unwrap().unwrap();
        assert_eq!(dir.rounds, 1);
        assert_eq!(dir.atoms.len(), 1);
        assert_eq!(dir.atoms[0].0, best);
        check_against_oracle(&o, &dir);
    }
}

#[test]
fn pmp_k1_reproduces_linesearch_herding() {
    let inst = instance(3, 30, 60, 0);
    let pool = Arc::new(inst.state.pool().clone());
    let ls = herd(&HerdingConfig::new(Variant::LineSearch, 25), pool.clone()).unwrap();
    let cfg = HerdingConfig::new(Variant::Accelerated(Approximator::Pmp), 25).with_k_max(1);
    let acc = herd(&cfg, pool).unwrap();
    assert_eq!(ls.1.rows.len(), acc.1.rows.len());
    for (a, b) in ls.1.rows.iter().zip(&acc.1.rows) {
        assert!((a.epsilon - b.epsilon).abs() <= 1e-12 * a.epsilon.max(1e-300) + 1e-15);
        assert_eq!(a.node_count, b.node_count);
    }
}

#[test]
fn pmp_residual_monotone_and_lambda_replay() {
    let mut backward_seen = 0;
    let mut rounds = 0;
    // Few candidates and a permissive δ run long enough for backward steps.
    let runs = (0..20).flat_map(|s| [(s, 40, 30, -1e-4), (s, 8, 200, -2.0)]);
    for (seed, m, k_max, delta) in runs {
        let mut inst = instance(seed, 30, m, 6);
        let o = Oracle::new(&inst.state, &inst.sample);
        let r = o.residual();
        let r2 = o.inner(&r, &r);
        let Some(dir) = pmp(&mut inst.state, k_max, delta).unwrap() else {
            continue;
        };
        check_against_oracle(&o, &dir);

        let mut prev_res = r2;
        let mut lambda = 0.0f64;
        let mut prev_norm_sq = 0.0f64;
        for round in &dir.trace {
            assert!(round.residual_sq <= prev_res + 1e-12, "seed {seed}");
            prev_res = round.residual_sq;
            if round.backward {
                backward_seen += 1;
                lambda *= 1.0 - round.step / prev_norm_sq.sqrt();
            } else {
                lambda += round.step;
            }
            assert!((lambda - round.lambda).abs() <= 1e-12 * lambda.max(1.0));
            prev_norm_sq = round.direction_norm_sq;
            rounds += 1;
        }
        assert!((lambda - dir.lambda).abs() <= 1e-12 * lambda.max(1.0));
        let d = o.combination(&dir.atoms);
        let resid = o.minus(&r, &d);
        assert!((o.inner(&resid, &resid) - prev_res).abs() < 1e-10);
    }
    assert!(rounds > 100);
    assert!(
        backward_seen > 0,
        "no backward steps exercised in {rounds} rounds"
    );
}

#[test]
fn gcos_single_round_is_align_argmax() {
    for seed in 0..10 {
        let mut inst = instance(seed, 25, 40, 4);
        let o = Oracle::new(&inst.state, &inst.sample);
        let r = o.residual();
        let r2 = o.inner(&r, &r);
        let aligns: Vec<f64> = (0..40)
            .map(|c| {
                let a = o.atom(c);
                align(r2, o.inner(&a, &a), o.inner(&r, &a))
            })
            .collect();
        let best = (0..40).fold(0, |b, c| if aligns[c] > aligns[b] { c } else { b });
        let dir = gcos(&mut inst.state, 1, 0.0).unwrap().unwrap();
        assert_eq!(dir.atoms, vec![(best, 1.0)]);
        assert!((dir.cos_theta - aligns[best]).abs() < 1e-10);
        let fc = fc_gcos(&mut inst.state, 1, 0.0).unwrap().unwrap();
        assert_eq!(fc.atoms[0].0, best);
        assert!((fc.cos_theta - dir.cos_theta).abs() < 1e-12);
    }
}

#[test]
fn gcos_k1_herding_uses_aligned_atom() {
    let inst = instance(5, 30, 50, 0);
    let pool = Arc::new(inst.state.pool().clone());
    let cfg = HerdingConfig::new(Variant::Accelerated(Approximator::Gcos), 15).with_k_max(1);
    let (rule, trace) = herd(&cfg, pool).unwrap();
    assert!(trace.rows.iter().all(|r| r.inner_rounds <= 1));
    for w in trace.rows.windows(2) {
        assert!(w[1].node_count <= w[0].node_count + 1);
        assert!(w[1].epsilon <= w[0].epsilon + 1e-12);
    }
    assert!(rule.is_on_simplex());
}

/// Replays the accepted gcos rounds and checks each choice against a
/// brute-force grid over `c` and all candidates.
#[test]
fn gcos_rounds_beat_grid() {
    let grid: Vec<f64> = (0..=10_000).map(|i| i as f64 * 1e-3).collect();
    let mut checked = 0;
    for seed in 0..8 {
        let m = 40;
        let mut inst = instance(seed, 30, m, 5);
        let o = Oracle::new(&inst.state, &inst.sample);
        let r = o.residual();
        let r2 = o.inner(&r, &r);
        let Some(dir) = gcos(&mut inst.state, 6, 0.0).unwrap() else {
            continue;
        };
        check_against_oracle(&o, &dir);
        let atoms_of: Vec<Element> = (0..m).map(|c| o.atom(c)).collect();
        let p: Vec<f64> = atoms_of.iter().map(|a| o.inner(&r, a)).collect();
        let alpha: Vec<f64> = atoms_of.iter().map(|a| o.inner(a, a)).collect();

        let mut d_atoms = vec![(dir.trace[0].atom.unwrap(), 1.0)];
        for round in &dir.trace[1..] {
            let d = o.combination(&d_atoms);
            let q = o.inner(&r, &d);
            let gamma = o.inner(&d, &d);
            assert!(q > 0.0);
            let mut best = q / gamma.sqrt();
            for c in 0..m {
                let beta = o.inner(&atoms_of[c], &d);
                let s = CosStepScalars {
                    p: p[c],
                    q,
                    alpha: alpha[c],
                    beta,
                    gamma,
                };
                for &x in &grid {
                    best = best.max(s.value(x));
                }
            }
            let chosen = round.cos_theta * r2.sqrt();
            assert!(chosen >= best - 1e-6, "seed {seed}: {chosen} < {best}");
            assert!(round.step <= 1e12);
            d_atoms.push((round.atom.unwrap(), round.step));
            checked += 1;
        }
    }
    assert!(checked >= 10, "only {checked} rounds compared");
}

#[test]
fn gcos_cos_monotone_at_zero_delta() {
    let mut rounds = 0;
    for seed in 0..15 {
        let mut inst = instance(seed, 30, 60, 8);
        for fc in [false, true] {
            let mut st = inst.state.clone();
            let dir = if fc {
                fc_gcos(&mut st, 10, 0.0)
            } else {
                gcos(&mut st, 10, 0.0)
            };
            let Some(dir) = dir.unwrap() else { continue };
            for w in dir.trace.windows(2) {
                assert!(w[1].cos_theta >= w[0].cos_theta - 1e-10);
                rounds += 1;
            }
        }
        inst.state.refresh();
    }
    assert!(rounds > 50);
}

#[test]
fn scale_invariance_of_selection() {
    let mut inst = instance(9, 30, 50, 6);
    let o = Oracle::new(&inst.state, &inst.sample);
    let dir = gcos(&mut inst.state, 3, 0.0).unwrap().unwrap();
    let r = o.residual();
    let d = o.combination(&dir.atoms);
    let atoms_of: Vec<Element> = (0..50).map(|c| o.atom(c)).collect();
    let p: Vec<f64> = atoms_of.iter().map(|a| o.inner(&r, a)).collect();
    let alpha: Vec<f64> = atoms_of.iter().map(|a| o.inner(a, a)).collect();
    let beta: Vec<f64> = atoms_of.iter().map(|a| o.inner(a, &d)).collect();
    let (q, gamma) = (o.inner(&r, &d), o.inner(&d, &d));
    let base = best_cos_step(&p, &alpha, &beta, q, gamma);
    for s in [1e-3, 0.5, 7.0, 1e4] {
        let scaled_beta: Vec<f64> = beta.iter().map(|b| b * s).collect();
        let got = best_cos_step(&p, &alpha, &scaled_beta, q * s, gamma * s * s);
        match (base, got) {
            (Some((i, c, v)), Some((j, c2, v2))) => {
                assert_eq!(i, j);
                assert!((v - v2).abs() < 1e-10);
                assert!((c * s - c2).abs() < 1e-8 * c2.max(1.0));
            }
            (None, None) => {}
            other => panic!("selection changed under scaling: {other:?}"),
        }
    }
}

#[test]
fn closed_form_examples() {
    let s = |p, q, alpha, beta, gamma| CosStepScalars {
        p,
        q,
        alpha,
        beta,
        gamma,
    };
    assert!(gcos_closed_form(&s(0.0, 1.0, 1.0, 0.0, 1.0)).is_none());
    let (c, v) = gcos_closed_form(&s(1.0, 1.0, 1.0, 0.0, 1.0)).unwrap();
    assert!((c - 1.0f64).abs() < 1e-15 && (v - 2f64.sqrt()).abs() < 1e-15);
    assert!(gcos_closed_form(&s(-1.0, 1.0, 1.0, 0.0, 1.0)).is_none());

    // Dense scan of g over [0, 10].
    let mut r = rng(77);
    use rand::Rng;
    for _ in 0..200 {
        let (p, beta): (f64, f64) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let st = s(
            p,
            r.gen_range(0.1..1.0),
            r.gen_range(1.0..2.0),
            beta,
            r.gen_range(1.0..2.0),
        );
        // Inside a run d_k is at least as aligned as any single atom.
        if st.alpha * st.gamma <= st.beta * st.beta
            || st.p / st.alpha.sqrt() > st.q / st.gamma.sqrt()
        {
            continue;
        }
        let scan = (0..=100_000)
            .map(|i| st.value(i as f64 * 1e-4))
            .fold(f64::MIN, f64::max);
        let best = gcos_closed_form(&st).map_or(st.value(0.0), |(_, v)| v);
        assert!(best >= scan - 1e-9, "{st:?}: {best} < {scan}");
    }
}

#[test]
fn fc_gcos_nnls_kkt() {
    for seed in 0..10 {
        let mut inst = instance(seed, 30, 50, 6);
        let o = Oracle::new(&inst.state, &inst.sample);
        let Some(dir) = fc_gcos(&mut inst.state, 8, 0.0).unwrap() else {
            continue;
        };
        check_against_oracle(&o, &dir);
        let r = o.residual();
        let resid = o.minus(&r, &o.combination(&dir.atoms));
        for &(c, a) in &dir.atoms {
            let g = o.inner(&resid, &o.atom(c));
            assert!(g <= 1e-8);
            if a > 1e-10 {
                assert!(g.abs() <= 1e-8, "seed {seed}: gradient {g} on support");
            }
        }
    }
}

#[test]
fn fully_corrective_variants_beat_plain() {
    for seed in 0..20 {
        let inst = instance(seed, 30, 60, 7);
        let mut a = inst.state.clone();
        let mut b = inst.state.clone();
        let plain = gcos(&mut a, 6, 0.0).unwrap();
        let fc = fc_gcos(&mut b, 6, 0.0).unwrap();
        if let (Some(plain), Some(fc)) = (plain, fc) {
            for (x, y) in plain.trace.iter().zip(&fc.trace) {
                assert!(y.cos_theta >= x.cos_theta - 1e-10, "seed {seed}");
            }
        }
        let mut a = inst.state.clone();
        let mut b = inst.state.clone();
        let plain = pmp(&mut a, 6, -1e-4).unwrap();
        let fc = fc_pmp(&mut b, 6, -1e-4).unwrap();
        if let (Some(plain), Some(fc)) = (plain, fc) {
            for (x, y) in plain.trace.iter().zip(&fc.trace) {
                assert!(y.residual_sq <= x.residual_sq + 1e-12, "seed {seed}");
            }
            assert!(fc.atoms.iter().all(|&(_, c)| c >= -1e-12));
        }
    }
}

#[test]
fn fc_pmp_single_round_matches_pmp() {
    for seed in 0..5 {
        let inst = instance(seed, 30, 40, 5);
        let mut a = inst.state.clone();
        let mut b = inst.state.clone();
        let p = pmp(&mut a, 1, -1e-4).unwrap().unwrap();
        let f = fc_pmp(&mut b, 1, -1e-4).unwrap().unwrap();
        assert_eq!(p.atoms[0].0, f.atoms[0].0);
        assert!((p.cos_theta - f.cos_theta).abs() < 1e-12);
        assert!((p.atoms[0].1 - f.atoms[0].1).abs() < 1e-9 * p.atoms[0].1);
    }
}

#[test]
fn round_cost_tracks_candidate_count() {
    let mut per_round = Vec::new();
    for m in [100, 200, 400] {
        let mut inst = instance(1, 30, m, 5);
        let dir = gcos(&mut inst.state, 4, 0.0).unwrap().unwrap();
        let r = &dir.trace[dir.trace.len() - 1];
        per_round.push((m, r.ops.kernel_evals + r.ops.scalar_evals));
    }
    for w in per_round.windows(2) {
        let ratio = w[1].1 as f64 / w[0].1 as f64;
        assert!((1.6..2.4).contains(&ratio), "{per_round:?}");
    }
}
