//! Complex and real matrix foundations: unitaries acting on mode operators,
//! their real quadrature lifts, and the symplectic form.
//!
//! Quadratures follow x = a + a†, p = −i a + i a† (ħ = 2), so the vacuum
//! covariance is the identity. Every public 2N-dimensional object uses the
//! interleaved ordering (x1, p1, x2, p2, …).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Tolerance used when validating user-supplied matrices.
pub const VALIDATION_TOL: f64 = 1e-10;
/// Tolerance for comparisons after propagated arithmetic.
pub const ARITHMETIC_TOL: f64 = 1e-9;

/// Quadrature conventions shared by every module.
pub struct QuadratureConvention;

impl QuadratureConvention {
    pub const HBAR: f64 = 2.0;
    pub const VACUUM_VARIANCE: f64 = 1.0;
}

/// Frobenius norm of `M M† − I`.
pub fn unitarity_deviation(m: &CMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    Ok((m * m.adjoint() - CMatrix::identity(n, n)).norm())
}

/// True iff `‖M M† − I‖_F ≤ tol`.
pub fn is_unitary(m: &CMatrix, tol: f64) -> Result<bool> {
    Ok(unitarity_deviation(m)? <= tol)
}

/// An N×N unitary acting on the annihilation operators: a_out = U a_in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexRows", into = "ComplexRows")]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let deviation = unitarity_deviation(&m)?;
        if deviation > VALIDATION_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix produced by trusted arithmetic on unitaries.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        debug_assert!(unitarity_deviation(&m).map(|d| d < 1e-8).unwrap_or(false));
        Self(m)
    }

    /// Wraps without any check; callers validate separately.
    pub(crate) fn from_trusted_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    /// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
    /// R's diagonal moved into Q.
    pub fn haar<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let g = CMatrix::from_fn(n, n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) / std::f64::consts::SQRT_2
        });
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            let d = r[(j, j)];
            let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
        Self(q)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn conjugate(&self) -> Self {
        Self(self.0.conjugate())
    }

    pub fn mul(&self, rhs: &UnitaryMatrix) -> Self {
        Self(&self.0 * &rhs.0)
    }

    /// Frobenius distance to `other`.
    pub fn distance(&self, other: &UnitaryMatrix) -> f64 {
        (&self.0 - &other.0).norm()
    }

    /// Frobenius distance to `other` after removing the best global phase.
    /// Returns `(distance, phase)` with `self ≈ e^{i phase} other`.
    pub fn distance_up_to_phase(&self, other: &UnitaryMatrix) -> (f64, f64) {
        let overlap = (other.0.adjoint() * &self.0).trace();
        let phase = if overlap.norm() > 0.0 { overlap.arg() } else { 0.0 };
        let aligned = &other.0 * Complex64::from_polar(1.0, phase);
        ((&self.0 - aligned).norm(), phase)
    }

    /// Largest element modulus of `self − e^{iφ} other` at the best global phase.
    pub fn max_deviation_up_to_phase(&self, other: &UnitaryMatrix) -> f64 {
        let (_, phase) = self.distance_up_to_phase(other);
        let aligned = &other.0 * Complex64::from_polar(1.0, phase);
        (&self.0 - aligned).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Row-major JSON form of a complex matrix: `[[[re, im], …], …]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComplexRows(pub Vec<Vec<[f64; 2]>>);

impl ComplexRows {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect())
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        if rows == 0 || self.0.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse("complex matrix rows are empty or ragged".into()));
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            let [re, im] = self.0[i][j];
            Complex64::new(re, im)
        }))
    }
}

impl TryFrom<ComplexRows> for UnitaryMatrix {
    type Error = Error;

    fn try_from(rows: ComplexRows) -> Result<Self> {
        UnitaryMatrix::new(rows.to_matrix()?)
    }
}

impl From<UnitaryMatrix> for ComplexRows {
    fn from(u: UnitaryMatrix) -> Self {
        ComplexRows::from_matrix(&u.0)
    }
}

/// Standard symplectic form for the interleaved ordering: N blocks `[[0, 1], [−1, 0]]`.
pub fn symplectic_form(n_modes: usize) -> RMatrix {
    let mut omega = RMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// A real 2N×2N matrix acting on interleaved quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix(RMatrix);

impl SymplecticMatrix {
    pub fn new(m: RMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() % 2 != 0 {
            return Err(Error::Dimension(format!("symplectic matrix must be 2N×2N, got {}x{}", m.nrows(), m.ncols())));
        }
        let s = Self(m);
        let dev = s.symplectic_deviation();
        if dev > VALIDATION_TOL {
            return Err(Error::Numerical(format!("matrix violates S Ω Sᵀ = Ω by {dev:.3e}")));
        }
        Ok(s)
    }

    pub fn identity(n_modes: usize) -> Self {
        Self(RMatrix::identity(2 * n_modes, 2 * n_modes))
    }

    pub fn n_modes(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.0
    }

    pub fn mul(&self, rhs: &SymplecticMatrix) -> Self {
        Self(&self.0 * &rhs.0)
    }

    /// `‖S Ω Sᵀ − Ω‖_F`.
    pub fn symplectic_deviation(&self) -> f64 {
        let omega = symplectic_form(self.n_modes());
        (&self.0 * &omega * self.0.transpose() - omega).norm()
    }

    /// `‖Sᵀ S − I‖_F`; zero for passive transformations.
    pub fn orthogonality_deviation(&self) -> f64 {
        let n = self.0.nrows();
        (self.0.transpose() * &self.0 - RMatrix::identity(n, n)).norm()
    }
}

/// Column-permutation matrix A taking interleaved quadratures to block order
/// (x1…xN, p1…pN).
fn interleave_to_block(n: usize) -> CMatrix {
    let mut a = CMatrix::zeros(2 * n, 2 * n);
    // A_ij = 1 for (j odd, i = (j+1)/2) and (j even, i = N + j/2), 1-based.
    for j in 1..=2 * n {
        let i = if j % 2 == 1 { j.div_ceil(2) } else { n + j / 2 };
        a[(i - 1, j - 1)] = Complex64::new(1.0, 0.0);
    }
    a
}

/// `W = [[I, iI], [I, −iI]]`, mapping block quadratures to (2a, 2a†).
fn quadrature_to_ladder(n: usize) -> CMatrix {
    let mut w = CMatrix::zeros(2 * n, 2 * n);
    let i = Complex64::new(0.0, 1.0);
    for k in 0..n {
        w[(k, k)] = Complex64::new(1.0, 0.0);
        w[(k, n + k)] = i;
        w[(n + k, k)] = Complex64::new(1.0, 0.0);
        w[(n + k, n + k)] = -i;
    }
    w
}

/// Real quadrature lift `S = (WA)⁻¹ diag(U, U*) WA` of a passive unitary.
pub fn symplectic_from_unitary(u: &UnitaryMatrix) -> Result<SymplecticMatrix> {
    let deviation = unitarity_deviation(u.matrix())?;
    if deviation > VALIDATION_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    let n = u.dim();
    let wa = quadrature_to_ladder(n) * interleave_to_block(n);
    let wa_inv = wa.clone().try_inverse().ok_or_else(|| Error::Numerical("WA is singular".into()))?;
    let mut block = CMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(u.matrix());
    block.view_mut((n, n), (n, n)).copy_from(&u.matrix().conjugate());
    let s = wa_inv * block * wa;

    let residue = s.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > 1e-8 {
        return Err(Error::Numerical(format!("symplectic lift has imaginary residue {residue:.3e}")));
    }
    Ok(SymplecticMatrix(s.map(|z| z.re)))
}

/// Per-mode p-sign flip `diag(1, −1, 1, −1, …)`; conjugates the lift of U into the lift of U*.
pub fn p_flip(n_modes: usize) -> RMatrix {
    RMatrix::from_diagonal(&nalgebra::DVector::from_fn(2 * n_modes, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = theta.rem_euclid(tau);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= tau {
        0.0
    } else {
        w
    }
}
