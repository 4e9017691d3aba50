//! Dense complex operators: Hermitian checks, Kronecker products, traces and
//! Hermitian exponentials.
//!
//! Kronecker convention: `(A ⊗ B)[i·dB + k, j·dB + l] = A[i, j]·B[k, l]`, so the
//! first factor is the most significant index. All evolution operators in this
//! crate are `exp(+i·t·H)` with ħ = 1.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{c, cr, modulus, Complex, Real};

/// Numerical tolerances for operator validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    pub herm: T,
    pub trace: T,
    pub psd: T,
    pub unitary: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        let t = T::lit(1e-10);
        Self {
            herm: t,
            trace: t,
            psd: t,
            unitary: t,
        }
    }
}

/// Size caps for dense storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_vector_dim: usize,
    pub max_matrix_dim: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_vector_dim: 1 << 13,
            max_matrix_dim: 1 << 11,
        }
    }
}

/// Square complex matrix acting on a finite-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexOperator<T: Real> {
    mat: DMatrix<Complex<T>>,
}

impl<T: Real> ComplexOperator<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        Self {
            mat: DMatrix::from_fn(dim, dim, f),
        }
    }

    /// Builds an operator from row-major entries; `entries.len()` must be a
    /// perfect square.
    pub fn from_row_slice(entries: &[Complex<T>]) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim * dim != entries.len() || dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: dim.max(1) * dim.max(1),
                found: entries.len(),
            });
        }
        Ok(Self {
            mat: DMatrix::from_row_slice(dim, dim, entries),
        })
    }

    pub fn from_matrix(mat: DMatrix<Complex<T>>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        Ok(Self { mat })
    }

    pub fn from_real_diagonal(diag: &[T]) -> Self {
        let mut op = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            op.mat[(i, i)] = cr(d);
        }
        op
    }

    /// Rank-one operator `|u⟩⟨v|`.
    pub fn outer(u: &[Complex<T>], v: &[Complex<T>]) -> Self {
        assert_eq!(u.len(), v.len(), "outer product of unequal lengths");
        Self::from_fn(u.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn pauli_x() -> Self {
        let (o, l) = (cr(T::ZERO), cr(T::ONE));
        Self {
            mat: DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        }
    }

    pub fn pauli_y() -> Self {
        let o = cr(T::ZERO);
        Self {
            mat: DMatrix::from_row_slice(2, 2, &[o, c(T::ZERO, -T::ONE), c(T::ZERO, T::ONE), o]),
        }
    }

    pub fn pauli_z() -> Self {
        Self::from_real_diagonal(&[T::ONE, -T::ONE])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.mat[(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex<T>) {
        self.mat[(i, j)] = v;
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex<T>> {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
        }
    }

    pub fn trace(&self) -> Complex<T> {
        self.mat.trace()
    }

    pub fn scale(&self, k: Complex<T>) -> Self {
        Self {
            mat: self.mat.map(|z| z * k),
        }
    }

    pub fn scale_real(&self, k: T) -> Self {
        self.scale(cr(k))
    }

    /// Checked product `self · rhs`.
    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        check_dims(self, rhs)?;
        Ok(Self {
            mat: &self.mat * &rhs.mat,
        })
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(v.len(), self.dim(), "vector length does not match operator");
        (0..self.dim())
            .map(|i| (0..self.dim()).fold(cr(T::ZERO), |acc, j| acc + self.mat[(i, j)] * v[j]))
            .collect()
    }

    /// Largest entrywise modulus of `self − rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> T {
        assert_eq!(
            self.dim(),
            rhs.dim(),
            "comparing operators of unequal dimension"
        );
        self.mat
            .iter()
            .zip(rhs.mat.iter())
            .fold(T::ZERO, |acc, (a, b)| acc.max(modulus(*a - *b)))
    }

    /// Largest entrywise modulus of `self − self†`.
    pub fn hermitian_deviation(&self) -> T {
        let n = self.dim();
        let mut dev = T::ZERO;
        for i in 0..n {
            for j in i..n {
                dev = dev.max(modulus(self.mat[(i, j)] - self.mat[(j, i)].conj()));
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Largest entrywise deviation of `self·self†` from the identity.
    pub fn unitary_deviation(&self) -> T {
        let prod = &self.mat * self.mat.adjoint();
        Self { mat: prod }.max_abs_diff(&Self::identity(self.dim()))
    }

    /// Real spectrum of the Hermitian part `(A + A†)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        let mut vals: Vec<T> = self
            .hermitian_part()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        vals
    }

    /// Eigenvalues (ascending) and matching orthonormal eigenvectors, as the
    /// columns of a unitary, of the Hermitian part.
    pub fn hermitian_eigen(&self) -> (Vec<T>, ComplexOperator<T>) {
        let eig = self.hermitian_part().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |i, k| {
            eig.eigenvectors[(i, order[k])]
        });
        (values, ComplexOperator { mat: vectors })
    }

    fn hermitian_part(&self) -> DMatrix<Complex<T>> {
        (&self.mat + self.mat.adjoint()).map(|z| z * cr(T::HALF))
    }
}

fn check_dims<T: Real>(a: &ComplexOperator<T>, b: &ComplexOperator<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

impl<'a, T: Real> Mul<&'a ComplexOperator<T>> for &'a ComplexOperator<T> {
    type Output = ComplexOperator<T>;

    fn mul(self, rhs: &'a ComplexOperator<T>) -> ComplexOperator<T> {
        ComplexOperator {
            mat: &self.mat * &rhs.mat,
        }
    }
}

impl<'a, T: Real> Add<&'a ComplexOperator<T>> for &'a ComplexOperator<T> {
    type Output = ComplexOperator<T>;

    fn add(self, rhs: &'a ComplexOperator<T>) -> ComplexOperator<T> {
        ComplexOperator {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl<'a, T: Real> Sub<&'a ComplexOperator<T>> for &'a ComplexOperator<T> {
    type Output = ComplexOperator<T>;

    fn sub(self, rhs: &'a ComplexOperator<T>) -> ComplexOperator<T> {
        ComplexOperator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl<T: Real> Neg for ComplexOperator<T> {
    type Output = ComplexOperator<T>;

    fn neg(self) -> ComplexOperator<T> {
        ComplexOperator { mat: -self.mat }
    }
}

/// Kronecker product `A ⊗ B` under the default [`Limits`].
pub fn kron<T: Real>(a: &ComplexOperator<T>, b: &ComplexOperator<T>) -> Result<ComplexOperator<T>> {
    kron_limited(a, b, &Limits::default())
}

pub fn kron_limited<T: Real>(
    a: &ComplexOperator<T>,
    b: &ComplexOperator<T>,
    limits: &Limits,
) -> Result<ComplexOperator<T>> {
    let dim = a.dim().checked_mul(b.dim()).ok_or(Error::SizeLimit {
        dim: usize::MAX,
        max: limits.max_matrix_dim,
    })?;
    if dim > limits.max_matrix_dim {
        return Err(Error::SizeLimit {
            dim,
            max: limits.max_matrix_dim,
        });
    }
    Ok(ComplexOperator {
        mat: a.mat.kronecker(&b.mat),
    })
}

/// `Tr(A·B)` without forming the product.
pub fn trace_product<T: Real>(
    a: &ComplexOperator<T>,
    b: &ComplexOperator<T>,
) -> Result<Complex<T>> {
    check_dims(a, b)?;
    let n = a.dim();
    let mut acc = cr(T::ZERO);
    for i in 0..n {
        for j in 0..n {
            acc += a.mat[(i, j)] * b.mat[(j, i)];
        }
    }
    Ok(acc)
}

/// `exp(i·scale·H)` for Hermitian `H`, via its eigendecomposition.
pub fn expm_hermitian<T: Real>(h: &ComplexOperator<T>, scale: T) -> Result<ComplexOperator<T>> {
    expm_hermitian_with(h, scale, &Tolerances::default())
}

pub fn expm_hermitian_with<T: Real>(
    h: &ComplexOperator<T>,
    scale: T,
    tol: &Tolerances<T>,
) -> Result<ComplexOperator<T>> {
    let deviation = h.hermitian_deviation();
    if !(deviation <= tol.herm) {
        return Err(Error::NotHermitian {
            deviation: deviation.as_f64(),
        });
    }
    let eig = h.hermitian_part().symmetric_eigen();
    let q = &eig.eigenvectors;
    let phases: Vec<Complex<T>> = eig
        .eigenvalues
        .iter()
        .map(|&lambda| {
            let theta = scale * lambda;
            c(theta.cos(), theta.sin())
        })
        .collect();
    let n = h.dim();
    let scaled = DMatrix::from_fn(n, n, |i, k| q[(i, k)] * phases[k]);
    Ok(ComplexOperator {
        mat: scaled * q.adjoint(),
    })
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator<T: Real> {
    op: ComplexOperator<T>,
}

impl<T: Real> DensityOperator<T> {
    pub fn new(op: ComplexOperator<T>) -> Result<Self> {
        Self::with_tolerances(op, &Tolerances::default())
    }

    pub fn with_tolerances(op: ComplexOperator<T>, tol: &Tolerances<T>) -> Result<Self> {
        let deviation = op.hermitian_deviation();
        if !(deviation <= tol.herm) {
            return Err(Error::NotHermitian {
                deviation: deviation.as_f64(),
            });
        }
        let tr = op.trace();
        if !(modulus(tr - cr(T::ONE)) <= tol.trace) {
            return Err(Error::InvalidDensity(format!("trace {tr} differs from 1")));
        }
        let spectrum = op.hermitian_eigenvalues();
        if spectrum.iter().any(|v| v.is_nan_value()) {
            return Err(Error::InvalidDensity("eigensolver returned NaN".into()));
        }
        let lowest = spectrum.first().copied().unwrap_or(T::ZERO);
        if !(lowest >= -tol.psd) {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {lowest}"
            )));
        }
        Ok(Self { op })
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn pure(psi: &[Complex<T>]) -> Result<Self> {
        Self::new(ComplexOperator::outer(psi, psi))
    }

    /// Maximally mixed state `I/dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: ComplexOperator::identity(dim).scale_real(T::ONE / T::of_usize(dim)),
        }
    }

    /// `self ⊗ other`. A product of states is a state, so no spectrum is
    /// recomputed.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            op: kron(&self.op, &other.op)?,
        })
    }

    pub fn op(&self) -> &ComplexOperator<T> {
        &self.op
    }

    pub fn into_inner(self) -> ComplexOperator<T> {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }
}

/// Orthogonal projector (Hermitian and idempotent).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorOperator<T: Real> {
    op: ComplexOperator<T>,
}

impl<T: Real> ProjectorOperator<T> {
    pub fn new(op: ComplexOperator<T>) -> Result<Self> {
        Self::with_tolerance(op, T::lit(1e-10))
    }

    pub fn with_tolerance(op: ComplexOperator<T>, tol: T) -> Result<Self> {
        let herm = op.hermitian_deviation();
        if !(herm <= tol) {
            return Err(Error::NotHermitian {
                deviation: herm.as_f64(),
            });
        }
        let idem = (&op * &op).max_abs_diff(&op);
        if !(idem <= tol) {
            return Err(Error::NotProjector {
                deviation: idem.as_f64(),
            });
        }
        Ok(Self { op })
    }

    /// Projector onto the span of the selected standard basis vectors.
    pub fn from_basis_mask(mask: &[bool]) -> Self {
        let diag: Vec<T> = mask
            .iter()
            .map(|&b| if b { T::ONE } else { T::ZERO })
            .collect();
        Self {
            op: ComplexOperator::from_real_diagonal(&diag),
        }
    }

    /// Projector onto the span of orthonormal vectors.
    pub fn from_orthonormal(vectors: &[Vec<Complex<T>>], dim: usize) -> Result<Self> {
        let mut op = ComplexOperator::zeros(dim);
        for v in vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            op = &op + &ComplexOperator::outer(v, v);
        }
        Self::new(op)
    }

    pub fn op(&self) -> &ComplexOperator<T> {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn rank(&self) -> T {
        self.op.trace().re
    }
}
