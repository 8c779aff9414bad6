//! Property checks runnable from the command line (`check --suite invariants`).

use std::sync::Arc;

use super::rows::{read_rows, write_rows, ResultRow};
use crate::embedding::{SIMPLEX_NEG_TOL, SIMPLEX_SUM_TOL};
use crate::error::{Error, Result};
use crate::herding::{Approximator, Herder, HerdingConfig, Variant};
use crate::kernels::{analytic_embedding, BaseMeasure, KernelSpec};
use crate::residual::CandidatePool;

use super::points::generate_candidates;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

pub const SUITES: [&str; 1] = ["invariants"];

pub fn run_suite(name: &str) -> Result<Vec<CheckOutcome>> {
    match name {
        "invariants" => invariants(),
        _ => Err(Error::Argument(format!(
            "unknown suite `{name}`; known: {SUITES:?}"
        ))),
    }
}

#[derive(Default)]
struct Worst {
    simplex: f64,
    monotone: f64,
    product: f64,
    cos_drop: f64,
    residual_rise: f64,
    node_jump: usize,
    inner_rounds: usize,
}

type NamedPool = (&'static str, Arc<CandidatePool<f64>>);

fn pools() -> Result<Vec<NamedPool>> {
    let g = KernelSpec::gaussian(2)?;
    let ge = analytic_embedding(&g, BaseMeasure::TruncatedGaussian)?;
    let gp = generate_candidates(g.domain(), BaseMeasure::TruncatedGaussian, 400, 0)?;
    let s = KernelSpec::sphere_distance();
    let se = analytic_embedding(&s, BaseMeasure::Uniform)?;
    let sp = generate_candidates(s.domain(), BaseMeasure::Uniform, 400, 0)?;
    Ok(vec![
        ("gaussian", Arc::new(CandidatePool::new(&ge, gp)?)),
        ("sphere", Arc::new(CandidatePool::new(&se, sp)?)),
    ])
}

fn invariants() -> Result<Vec<CheckOutcome>> {
    let mut w = Worst::default();
    let mut rows_seen = Vec::new();
    for (_, pool) in pools()? {
        for v in Variant::ALL {
            let mut cfg = HerdingConfig::new(v, 40).with_inner_trace();
            if let Variant::Accelerated(Approximator::Gcos | Approximator::FcGcos) = v {
                cfg = cfg.with_delta(0.0);
            }
            let mut h = Herder::new(cfg, pool.clone())?;
            let mut prev: Option<(f64, usize)> = None;
            let mut pending: Option<(f64, f64, f64, usize)> = None;
            while let Some(r) = h.step()? {
                let eps = r.epsilon;
                if let Some((e0, cos, gamma, k)) = pending.take() {
                    if gamma < 1.0 && matches!(v, Variant::Accelerated(_)) {
                        let rel = (eps - (1.0 - cos * cos) * e0).abs() / e0;
                        w.product = w.product.max(rel);
                    }
                    let (_, n0) = prev.expect("previous row");
                    if v != Variant::FullyCorrective && r.node_count > n0 + k {
                        w.node_jump = w.node_jump.max(r.node_count - n0 - k);
                    }
                }
                if let Some((e0, _)) = prev {
                    if v != Variant::EqWeight {
                        w.monotone = w.monotone.max(eps - e0);
                    }
                }
                let ws = h.state().weights();
                let min = ws.iter().copied().fold(f64::INFINITY, f64::min);
                let sum: f64 = ws.iter().sum();
                w.simplex = w
                    .simplex
                    .max((-min - SIMPLEX_NEG_TOL).max(0.0))
                    .max((sum - 1.0).abs() - SIMPLEX_SUM_TOL);
                for pair in r.inner.windows(2) {
                    w.inner_rounds += 1;
                    match v {
                        Variant::Accelerated(Approximator::Gcos | Approximator::FcGcos) => {
                            w.cos_drop = w.cos_drop.max(pair[0].cos_theta - pair[1].cos_theta);
                        }
                        Variant::Accelerated(Approximator::Pmp) => {
                            let (a, b) = (
                                pair[0].residual_sq.max(0.0).sqrt(),
                                pair[1].residual_sq.max(0.0).sqrt(),
                            );
                            w.residual_rise = w.residual_rise.max(b - a);
                        }
                        _ => {}
                    }
                }
                if !r.cos_theta.is_nan() {
                    pending = Some((eps, r.cos_theta, r.gamma, r.inner_rounds));
                }
                prev = Some((eps, r.node_count));
                rows_seen.push(ResultRow::from_record(v, 0, &r));
            }
        }
    }
    let mut buf = Vec::new();
    write_rows(&mut buf, &rows_seen)?;
    let back = read_rows(buf.as_slice())?;
    let round_trip =
        back.len() == rows_seen.len() && back.iter().zip(&rows_seen).all(|(a, b)| a.same_bits(b));

    let check = |name, passed, detail: String| CheckOutcome {
        name,
        passed,
        detail,
    };
    Ok(vec![
        check(
            "simplex feasibility",
            w.simplex <= 0.0,
            format!("worst excess {:.3e}", w.simplex.max(0.0)),
        ),
        check(
            "monotone epsilon",
            w.monotone <= 1e-12,
            format!("worst increase {:.3e}", w.monotone),
        ),
        check(
            "product identity",
            w.product <= 1e-6,
            format!("worst relative gap {:.3e}", w.product),
        ),
        check(
            "greedy cos monotone rounds",
            w.cos_drop <= 1e-10,
            format!(
                "worst drop {:.3e} over {} consecutive round pairs",
                w.cos_drop, w.inner_rounds
            ),
        ),
        check(
            "pursuit residual monotone",
            w.residual_rise <= 1e-12,
            format!("worst rise {:.3e}", w.residual_rise),
        ),
        check(
            "node growth bounded by K_t",
            w.node_jump == 0,
            format!("worst excess {}", w.node_jump),
        ),
        check(
            "CSV round trip",
            round_trip,
            format!("{} rows", rows_seen.len()),
        ),
    ])
}
