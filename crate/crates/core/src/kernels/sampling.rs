//! Samplers for the base measures.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use super::{BaseMeasure, Domain};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Candidates = 1,
    Embedding = 2,
    Probe = 3,
    Instance = 4,
}

/// Deterministic generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// `m` i.i.d. draws from `measure` on `domain`.
///
/// The truncated Gaussian (density ∝ `exp(−‖x‖²)`) is sampled by rejection
/// from `N(0, ½ I)` with the box as acceptance region. Sphere points are
/// normalized standard Gaussians.
pub fn sample_measure<F: Scalar, R: Rng + ?Sized>(
    domain: &Domain<F>,
    measure: BaseMeasure,
    m: usize,
    rng: &mut R,
) -> Result<Vec<Vec<F>>> {
    let mut out = Vec::with_capacity(m);
    match domain {
        Domain::Sphere => {
            if measure != BaseMeasure::Uniform {
                return Err(Error::Argument(
                    "only the uniform measure is supported on the sphere".into(),
                ));
            }
            while out.len() < m {
                let v: [f64; 3] = [
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                ];
                let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if norm < 1e-8 {
                    continue;
                }
                out.push(v.iter().map(|&c| F::lit(c / norm)).collect());
            }
        }
        Domain::Box { lower, upper } => {
            let lo: Vec<f64> = lower.iter().map(|v| v.as_f64()).collect();
            let hi: Vec<f64> = upper.iter().map(|v| v.as_f64()).collect();
            match measure {
                BaseMeasure::Uniform => {
                    let axes: Vec<Uniform<f64>> = lo
                        .iter()
                        .zip(&hi)
                        .map(|(&l, &h)| Uniform::new_inclusive(l, h))
                        .collect();
                    for _ in 0..m {
                        out.push(axes.iter().map(|a| F::lit(a.sample(rng))).collect());
                    }
                }
                BaseMeasure::TruncatedGaussian => {
                    let normal =
                        Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
                    let mut x = vec![0.0f64; lo.len()];
                    while out.len() < m {
                        x.iter_mut().for_each(|v| *v = normal.sample(rng));
                        let inside = x
                            .iter()
                            .zip(lo.iter().zip(&hi))
                            .all(|(&v, (&l, &h))| v >= l && v <= h);
                        if inside {
                            out.push(x.iter().map(|&v| F::lit(v)).collect());
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
