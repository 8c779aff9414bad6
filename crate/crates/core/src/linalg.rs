//! Small dense linear algebra: row-major square matrices and Cholesky solves.

use crate::scalar::Scalar;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<F> {
    n: usize,
    data: Vec<F>,
}

impl<F: Scalar> SquareMatrix<F> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![F::zero(); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Builds a matrix from rows; panics when the rows are ragged.
    pub fn from_rows(rows: &[Vec<F>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { F::one() } else { F::zero() })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> F {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, x: &[F]) -> Vec<F> {
        (0..self.n)
            .map(|i| crate::scalar::dot(self.row(i), x))
            .collect()
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[F]) -> F {
        crate::scalar::dot(x, &self.mul_vec(x))
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Largest asymmetry `|A_ij − A_ji|`.
    pub fn asymmetry(&self) -> F {
        let mut worst = F::zero();
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<F> {
    l: SquareMatrix<F>,
}

/// Failure of a Cholesky factorization at pivot `index`.
#[derive(Debug, Clone, Copy)]
pub struct NotPositiveDefinite {
    pub index: usize,
}

impl<F: Scalar> Cholesky<F> {
    pub fn factor(a: &SquareMatrix<F>) -> Result<Self, NotPositiveDefinite> {
        let n = a.dim();
        let mut l = SquareMatrix::zeros(n);
        for j in 0..n {
            let mut diag = a.get(j, j);
            for k in 0..j {
                let v = l.get(j, k);
                diag -= v * v;
            }
            if !(diag > F::zero()) || !diag.is_finite() {
                return Err(NotPositiveDefinite { index: j });
            }
            let ljj = diag.sqrt();
            l.set(j, j, ljj);
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / ljj);
            }
        }
        Ok(Self { l })
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[F]) -> Vec<F> {
        let n = self.l.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l.get(i, k) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l.get(k, i) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        y
    }
}

/// Outcome of a jittered Cholesky factorization.
#[derive(Debug, Clone)]
pub struct JitteredCholesky<F> {
    pub factor: Cholesky<F>,
    /// Diagonal shift that was added, zero when the plain factorization succeeded.
    pub jitter: F,
}

/// Factor `a`, retrying once with `1e-12 · trace / n` on the diagonal.
pub fn cholesky_with_jitter<F: Scalar>(
    a: &SquareMatrix<F>,
) -> Result<JitteredCholesky<F>, NotPositiveDefinite> {
    match Cholesky::factor(a) {
        Ok(factor) => Ok(JitteredCholesky {
            factor,
            jitter: F::zero(),
        }),
        Err(_) => {
            let n = a.dim().max(1);
            let jitter = F::tol(1e-12) * a.trace().abs() / F::from_usize_lossy(n);
            let mut shifted = a.clone();
            for i in 0..a.dim() {
                shifted.set(i, i, a.get(i, i) + jitter);
            }
            Cholesky::factor(&shifted).map(|factor| JitteredCholesky { factor, jitter })
        }
    }
}

/// Factor with an escalating diagonal shift, for solvers that must make progress
/// on positive semidefinite blocks. Returns the factor and the shift used.
pub fn cholesky_regularized<F: Scalar>(a: &SquareMatrix<F>) -> (Cholesky<F>, F) {
    if let Ok(f) = Cholesky::factor(a) {
        return (f, F::zero());
    }
    let n = a.dim().max(1);
    let scale = (a.trace().abs() / F::from_usize_lossy(n)).max(F::min_positive_value());
    let mut shift = F::tol(1e-14) * scale;
    loop {
        let mut shifted = a.clone();
        for i in 0..a.dim() {
            shifted.set(i, i, a.get(i, i) + shift);
        }
        if let Ok(f) = Cholesky::factor(&shifted) {
            return (f, shift);
        }
        shift *= F::lit(10.0);
    }
}

/// Index pair with the largest normalized correlation `|A_ij| / sqrt(A_ii A_jj)`.
pub fn most_collinear_pair<F: Scalar>(a: &SquareMatrix<F>) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_val = F::neg_infinity();
    for i in 0..a.dim() {
        for j in 0..i {
            let denom = (a.get(i, i) * a.get(j, j)).sqrt();
            let c = if denom > F::zero() {
                a.get(i, j).abs() / denom
            } else {
                F::infinity()
            };
            if c > best_val {
                best_val = c;
                best = (j, i);
            }
        }
    }
    best
}
