//! Candidate sets and fill distance.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::sampling::{rng_for, sample_measure, Stream};
use crate::kernels::{BaseMeasure, Domain};
use crate::scalar::{squared_distance, Scalar};

/// `m` i.i.d. draws from `measure`, deterministic per seed.
pub fn generate_candidates<F: Scalar>(
    domain: &Domain<F>,
    measure: BaseMeasure,
    m: usize,
    seed: u64,
) -> Result<Vec<Vec<F>>> {
    if m == 0 {
        return Err(Error::Argument("candidate count must be at least 1".into()));
    }
    sample_measure(domain, measure, m, &mut rng_for(seed, Stream::Candidates))
}

/// Dense surrogate for Ω: `m` uniform points plus the corners of a box.
pub fn probe_points<F: Scalar>(domain: &Domain<F>, m: usize, seed: u64) -> Result<Vec<Vec<F>>> {
    let mut pts = sample_measure(
        domain,
        BaseMeasure::Uniform,
        m,
        &mut rng_for(seed, Stream::Probe),
    )?;
    pts.extend(domain.corners());
    Ok(pts)
}

/// `max_{x ∈ probe} min_j ‖x − x_j‖`.
pub fn fill_distance<F: Scalar>(nodes: &[Vec<F>], probe: &[Vec<F>]) -> Result<F> {
    if nodes.is_empty() {
        return Err(Error::Argument(
            "fill distance needs at least one node".into(),
        ));
    }
    let worst = probe
        .par_iter()
        .map(|x| {
            nodes
                .iter()
                .map(|n| squared_distance(x, n))
                .fold(F::infinity(), F::min)
        })
        .collect::<Vec<F>>()
        .into_iter()
        .fold(F::zero(), F::max);
    Ok(worst.sqrt())
}
