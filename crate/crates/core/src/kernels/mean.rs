//! Kernel mean embeddings `μ_K(y) = ∫ K(x, y) μ(dx)` and `⟨μ_K, μ_K⟩`.

use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;

use super::quadrature;
use super::sampling::sample_measure;
use super::{BaseMeasure, Domain, KernelKind, KernelSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gauss–Legendre order for the per-axis double integral of the Gaussian case.
const GAUSSIAN_AXIS_ORDER: usize = 64;

/// How the embedding is evaluated.
#[derive(Debug, Clone)]
pub enum EmbeddingKind<F> {
    /// Gaussian kernel against the truncated Gaussian measure on a box; the
    /// embedding factors over axes into erf expressions.
    GaussianBox { axes: Vec<GaussianAxis> },
    /// Sphere distance kernel against the uniform measure: `μ_K ≡ 4/3`.
    SphereConstant { value: F },
    /// Equal-weight average over a fixed sample.
    Empirical { sample: Vec<Vec<F>> },
}

/// One axis `[lo, hi]` of the Gaussian closed form.
#[derive(Debug, Clone, Copy)]
pub struct GaussianAxis {
    lo: f64,
    hi: f64,
    /// `∫_lo^hi e^{−x²} dx`.
    norm: f64,
}

impl GaussianAxis {
    fn new(lo: f64, hi: f64) -> Self {
        let norm = 0.5 * std::f64::consts::PI.sqrt() * (libm::erf(hi) - libm::erf(lo));
        Self { lo, hi, norm }
    }

    /// `∫_lo^hi e^{−(x−y)²} e^{−x²} dx / norm`
    /// `= e^{−y²/2} √(π/8) [erf(√2(hi − y/2)) − erf(√2(lo − y/2))] / norm`.
    fn embed<F: Scalar>(&self, y: F) -> F {
        let sqrt2 = F::lit(std::f64::consts::SQRT_2);
        let half_y = y * F::lit(0.5);
        let bracket =
            (sqrt2 * (F::lit(self.hi) - half_y)).erf() - (sqrt2 * (F::lit(self.lo) - half_y)).erf();
        (-(y * y) * F::lit(0.5)).exp() * F::lit((std::f64::consts::PI / 8.0).sqrt()) * bracket
            / F::lit(self.norm)
    }

    /// `∫ embed(y) e^{−y²} dy / norm`, a smooth one-dimensional integral.
    fn double_integral(&self) -> f64 {
        quadrature::integrate(
            |y| self.embed::<f64>(y) * (-y * y).exp(),
            self.lo,
            self.hi,
            GAUSSIAN_AXIS_ORDER,
        ) / self.norm
    }
}

/// Evaluator for `μ_K` together with `⟨μ_K, μ_K⟩`.
#[derive(Debug, Clone)]
pub struct MeanEmbedding<F> {
    kernel: KernelSpec<F>,
    kind: EmbeddingKind<F>,
    double_integral: OnceLock<F>,
}

impl<F: Scalar> MeanEmbedding<F> {
    pub fn kernel(&self) -> &KernelSpec<F> {
        &self.kernel
    }

    pub fn kind(&self) -> &EmbeddingKind<F> {
        &self.kind
    }

    pub fn is_empirical(&self) -> bool {
        matches!(self.kind, EmbeddingKind::Empirical { .. })
    }

    /// `μ_K(y)` with a domain check.
    pub fn eval(&self, y: &[F]) -> Result<F> {
        self.kernel.domain().check(y)?;
        Ok(self.eval_unchecked(y))
    }

    pub fn eval_unchecked(&self, y: &[F]) -> F {
        match &self.kind {
            EmbeddingKind::GaussianBox { axes } => axes
                .iter()
                .zip(y)
                .map(|(a, &v)| a.embed(v))
                .fold(F::one(), |p, v| p * v),
            EmbeddingKind::SphereConstant { value } => *value,
            EmbeddingKind::Empirical { sample } => {
                let mut s = F::zero();
                for x in sample {
                    s += self.kernel.eval_unchecked(x, y);
                }
                s / F::from_usize_lossy(sample.len())
            }
        }
    }

    /// `μ_K` at every point, evaluated in parallel; results are index-ordered.
    pub fn eval_many(&self, ys: &[Vec<F>]) -> Vec<F> {
        ys.par_iter().map(|y| self.eval_unchecked(y)).collect()
    }

    /// `⟨μ_K, μ_K⟩ = ∬ K dμ dμ`.
    pub fn double_integral(&self) -> F {
        *self.double_integral.get_or_init(|| match &self.kind {
            EmbeddingKind::GaussianBox { axes } => F::lit(
                axes.iter()
                    .map(GaussianAxis::double_integral)
                    .product::<f64>(),
            ),
            EmbeddingKind::SphereConstant { value } => *value,
            EmbeddingKind::Empirical { sample } => {
                // Row sums in parallel, reduced in index order for bit-stability.
                let rows: Vec<F> = sample
                    .par_iter()
                    .map(|x| {
                        let mut s = F::zero();
                        for y in sample {
                            s += self.kernel.eval_unchecked(x, y);
                        }
                        s
                    })
                    .collect();
                let m = F::from_usize_lossy(sample.len());
                rows.into_iter().fold(F::zero(), |a, b| a + b) / (m * m)
            }
        })
    }
}

/// Closed-form embedding for the supported (kernel, measure) pairs: Gaussian
/// kernel with truncated Gaussian measure on a box, and the sphere distance
/// kernel with the uniform measure on the sphere.
pub fn analytic_embedding<F: Scalar>(
    spec: &KernelSpec<F>,
    measure: BaseMeasure,
) -> Result<MeanEmbedding<F>> {
    let kind = match (spec.kind(), spec.domain(), measure) {
        (KernelKind::Gaussian, Domain::Box { lower, upper }, BaseMeasure::TruncatedGaussian) => {
            EmbeddingKind::GaussianBox {
                axes: lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| GaussianAxis::new(l.as_f64(), u.as_f64()))
                    .collect(),
            }
        }
        (KernelKind::SphereDistance, Domain::Sphere, BaseMeasure::Uniform) => {
            // E‖x − y‖ = 4/3 for independent uniform points on the unit sphere.
            EmbeddingKind::SphereConstant {
                value: F::lit(4.0 / 3.0),
            }
        }
        _ => {
            return Err(Error::UnsupportedEmbedding(format!(
                "{} kernel with {} measure",
                spec.name(),
                measure.name()
            )))
        }
    };
    Ok(MeanEmbedding {
        kernel: spec.clone(),
        kind,
        double_integral: OnceLock::new(),
    })
}

/// Empirical embedding over `m` i.i.d. draws from `measure`.
pub fn empirical_embedding<F: Scalar, R: Rng + ?Sized>(
    spec: &KernelSpec<F>,
    measure: BaseMeasure,
    m: usize,
    rng: &mut R,
) -> Result<MeanEmbedding<F>> {
    if m == 0 {
        return Err(Error::Argument("empirical embedding needs m ≥ 1".into()));
    }
    let sample = sample_measure(spec.domain(), measure, m, rng)?;
    Ok(embedding_from_sample(spec, sample))
}

/// Empirical embedding over an explicit sample with equal weights.
pub fn embedding_from_sample<F: Scalar>(
    spec: &KernelSpec<F>,
    sample: Vec<Vec<F>>,
) -> MeanEmbedding<F> {
    assert!(!sample.is_empty(), "sample must be nonempty");
    MeanEmbedding {
        kernel: spec.clone(),
        kind: EmbeddingKind::Empirical { sample },
        double_integral: OnceLock::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::sampling::{rng_for, Stream};

    #[test]
    fn single_atom_empirical() {
        let k = KernelSpec::<f64>::gaussian(2).unwrap();
        let x0 = vec![0.2, -0.4];
        let e = embedding_from_sample(&k, vec![x0.clone()]);
        let y = [0.5, 0.1];
        assert_eq!(e.eval(&y).unwrap(), k.eval(&x0, &y).unwrap());
        assert_eq!(e.double_integral(), 1.0);
    }

    #[test]
    fn empirical_rejects_zero_sample() {
        let k = KernelSpec::<f64>::sphere_distance();
        let r = empirical_embedding(
            &k,
            BaseMeasure::Uniform,
            0,
            &mut rng_for(0, Stream::Embedding),
        );
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn unsupported_pairs() {
        let k = KernelSpec::<f64>::matern32(2).unwrap();
        assert!(matches!(
            analytic_embedding(&k, BaseMeasure::Uniform),
            Err(Error::UnsupportedEmbedding(_))
        ));
        let g = KernelSpec::<f64>::gaussian(2).unwrap();
        assert!(analytic_embedding(&g, BaseMeasure::Uniform).is_err());
    }

    #[test]
    fn gaussian_factorizes_over_axes() {
        let k1 = KernelSpec::<f64>::gaussian(1).unwrap();
        let k2 = KernelSpec::<f64>::gaussian(2).unwrap();
        let e1 = analytic_embedding(&k1, BaseMeasure::TruncatedGaussian).unwrap();
        let e2 = analytic_embedding(&k2, BaseMeasure::TruncatedGaussian).unwrap();
        let a = e1.eval(&[0.0]).unwrap();
        assert_eq!(e2.eval(&[0.0, 0.0]).unwrap(), a * a);
        let d1 = e1.double_integral();
        assert!((e2.double_integral() - d1 * d1).abs() < 1e-15);
    }
}
