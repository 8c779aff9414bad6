//! Positive-definite kernels, their domains and base measures.
//!
//! Three kernels are provided:
//!
//! | kind | formula | domain |
//! |------|---------|--------|
//! | [`KernelKind::Gaussian`] | `exp(−‖x−y‖²)` | box |
//! | [`KernelKind::Matern32`] | `(1 + √3 r/ρ) exp(−√3 r/ρ)` | box |
//! | [`KernelKind::SphereDistance`] | `8/3 − ‖x−y‖` | unit sphere in ℝ³ |
//!
//! Mean embeddings `μ_K(y) = ∫ K(x, y) μ(dx)` live in [`mean`]; samplers for the
//! base measures live in [`sampling`].

pub mod mean;
mod quadrature;
pub mod sampling;

pub use mean::{analytic_embedding, empirical_embedding, EmbeddingKind, MeanEmbedding};
pub use sampling::sample_measure;

use crate::error::{Error, Result};
use crate::scalar::{distance, squared_distance, Scalar};

/// Tolerance on `‖x‖ = 1` for points on the sphere.
pub const SPHERE_NORM_TOL: f64 = 1e-12;

/// Domain Ω on which a kernel and its base measure live.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain<F> {
    /// Axis-aligned box `Π [lowerᵢ, upperᵢ]`.
    Box { lower: Vec<F>, upper: Vec<F> },
    /// Unit sphere centred at the origin of ℝ³.
    Sphere,
}

impl<F: Scalar> Domain<F> {
    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: F, hi: F) -> Result<Self> {
        Self::new_box(vec![lo; dim], vec![hi; dim])
    }

    pub fn new_box(lower: Vec<F>, upper: Vec<F>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Argument(format!(
                "box bounds must be nonempty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = lower.iter().zip(&upper).position(|(l, u)| !(l < u)) {
            return Err(Error::Argument(format!("box axis {i} has lower ≥ upper")));
        }
        Ok(Domain::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Sphere => 3,
        }
    }

    /// Checks that `x` belongs to the domain.
    pub fn check(&self, x: &[F]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Domain(format!(
                "expected dimension {}, got {}",
                self.dim(),
                x.len()
            )));
        }
        match self {
            Domain::Box { lower, upper } => {
                for (i, ((&v, &l), &u)) in x.iter().zip(lower).zip(upper).enumerate() {
                    if !(v >= l && v <= u) {
                        return Err(Error::Domain(format!(
                            "coordinate {i} = {v} outside [{l}, {u}]"
                        )));
                    }
                }
                Ok(())
            }
            Domain::Sphere => {
                let norm = x.iter().map(|&v| v * v).sum::<F>().sqrt();
                if (norm - F::one()).abs() > F::tol(SPHERE_NORM_TOL) {
                    return Err(Error::Domain(format!("norm {norm} is not 1")));
                }
                Ok(())
            }
        }
    }

    /// Corners of a box domain; empty for the sphere.
    pub fn corners(&self) -> Vec<Vec<F>> {
        match self {
            Domain::Box { lower, upper } => {
                let d = lower.len();
                (0..(1usize << d))
                    .map(|mask| {
                        (0..d)
                            .map(|i| {
                                if mask >> i & 1 == 1 {
                                    upper[i]
                                } else {
                                    lower[i]
                                }
                            })
                            .collect()
                    })
                    .collect()
            }
            Domain::Sphere => Vec::new(),
        }
    }
}

/// Kernel family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind<F> {
    /// `exp(−‖x−y‖²)`.
    Gaussian,
    /// Matérn ν = 3/2 with length scale `rho`.
    Matern32 { rho: F },
    /// `8/3 − ‖x−y‖` on the unit sphere.
    SphereDistance,
}

/// A kernel together with the domain its arguments live in.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec<F> {
    kind: KernelKind<F>,
    domain: Domain<F>,
}

impl<F: Scalar> KernelSpec<F> {
    pub fn new(kind: KernelKind<F>, domain: Domain<F>) -> Result<Self> {
        match (&kind, &domain) {
            (KernelKind::SphereDistance, Domain::Sphere) => {}
            (KernelKind::SphereDistance, _) => {
                return Err(Error::Argument(
                    "sphere_distance kernel requires the sphere domain".into(),
                ))
            }
            (KernelKind::Matern32 { rho }, _) if !(*rho > F::zero()) => {
                return Err(Error::Argument(format!(
                    "Matérn rho must be positive, got {rho}"
                )))
            }
            _ => {}
        }
        Ok(Self { kind, domain })
    }

    pub fn gaussian(dim: usize) -> Result<Self> {
        Self::new(
            KernelKind::Gaussian,
            Domain::cube(dim, -F::one(), F::one())?,
        )
    }

    /// Matérn 3/2 with ρ = √3 on `[−1, 1]^dim`, i.e. `(1 + r) e^{−r}`.
    pub fn matern32(dim: usize) -> Result<Self> {
        Self::new(
            KernelKind::Matern32 {
                rho: F::lit(3.0).sqrt(),
            },
            Domain::cube(dim, -F::one(), F::one())?,
        )
    }

    pub fn sphere_distance() -> Self {
        Self {
            kind: KernelKind::SphereDistance,
            domain: Domain::Sphere,
        }
    }

    pub fn kind(&self) -> &KernelKind<F> {
        &self.kind
    }

    pub fn domain(&self) -> &Domain<F> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `K(x, y)` after checking both points against the domain.
    pub fn eval(&self, x: &[F], y: &[F]) -> Result<F> {
        self.domain.check(x)?;
        self.domain.check(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    /// `K(x, y)` for points already known to lie in the domain.
    #[inline]
    pub fn eval_unchecked(&self, x: &[F], y: &[F]) -> F {
        match self.kind {
            KernelKind::Gaussian => (-squared_distance(x, y)).exp(),
            KernelKind::Matern32 { rho } => {
                let r = F::lit(3.0).sqrt() * distance(x, y) / rho;
                (F::one() + r) * (-r).exp()
            }
            KernelKind::SphereDistance => F::lit(8.0 / 3.0) - distance(x, y),
        }
    }

    /// `K(x, x)`, constant for every supported kernel.
    #[inline]
    pub fn diagonal(&self) -> F {
        match self.kind {
            KernelKind::Gaussian | KernelKind::Matern32 { .. } => F::one(),
            KernelKind::SphereDistance => F::lit(8.0 / 3.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Matern32 { .. } => "matern32",
            KernelKind::SphereDistance => "sphere_distance",
        }
    }
}

/// Base probability measure μ on the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseMeasure {
    /// Uniform on the box or on the sphere.
    Uniform,
    /// Density `∝ exp(−‖x‖²)` restricted to the box.
    TruncatedGaussian,
}

impl BaseMeasure {
    pub fn name(self) -> &'static str {
        match self {
            BaseMeasure::Uniform => "uniform",
            BaseMeasure::TruncatedGaussian => "truncated_gaussian",
        }
    }
}

/// `kernel_eval` with domain checks.
pub fn kernel_eval<F: Scalar>(spec: &KernelSpec<F>, x: &[F], y: &[F]) -> Result<F> {
    spec.eval(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_diagonal_is_one() {
        let k = KernelSpec::<f64>::gaussian(2).unwrap();
        assert_eq!(k.eval(&[0.3, -0.2], &[0.3, -0.2]).unwrap(), 1.0);
    }

    #[test]
    fn matern_at_zero_distance() {
        let k = KernelSpec::<f64>::matern32(2).unwrap();
        assert_eq!(k.eval(&[0.1, 0.4], &[0.1, 0.4]).unwrap(), 1.0);
        let r: f64 = 0.5;
        let v = k.eval(&[0.0, 0.0], &[0.3, 0.4]).unwrap();
        assert!((v - (1.0 + r) * (-r).exp()).abs() < 1e-15);
    }

    #[test]
    fn sphere_antipodal() {
        let k = KernelSpec::<f64>::sphere_distance();
        let v = k.eval(&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0]).unwrap();
        assert!((v - (8.0 / 3.0 - 2.0)).abs() < 1e-15);
        assert_eq!(
            k.eval(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(),
            8.0 / 3.0
        );
    }

    #[test]
    fn domain_errors() {
        let k = KernelSpec::<f64>::sphere_distance();
        assert!(matches!(
            k.eval(&[1.0, 1.0, 0.0], &[1.0, 0.0, 0.0]),
            Err(Error::Domain(_))
        ));
        let g = KernelSpec::<f64>::gaussian(2).unwrap();
        assert!(matches!(
            g.eval(&[1.5, 0.0], &[0.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(g.eval(&[0.0], &[0.0, 0.0]), Err(Error::Domain(_))));
        assert!(Domain::<f64>::new_box(vec![1.0], vec![1.0]).is_err());
        assert!(KernelSpec::new(
            KernelKind::SphereDistance,
            Domain::cube(3, -1.0, 1.0).unwrap()
        )
        .is_err());
    }

    #[test]
    fn corners_of_square() {
        let d = Domain::<f64>::cube(2, -1.0, 1.0).unwrap();
        let c = d.corners();
        assert_eq!(c.len(), 4);
        assert!(c.contains(&vec![1.0, -1.0]));
    }

    #[test]
    fn single_precision_kernel() {
        let k = KernelSpec::<f32>::gaussian(2).unwrap();
        let v = k.eval(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((v - (-1.0f32).exp()).abs() < 1e-6);
    }
}
