//! Figures of merit for output states: quadrature-combination variances,
//! inseparability sums, Gaussian fidelity and dB conversions.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;
use crate::linops::{symplectic_form, RMatrix};

/// Full-inseparability threshold for a sum of two combination variances.
pub const INSEPARABILITY_THRESHOLD: f64 = 4.0;

/// Arguments of the fidelity square root below this magnitude are exact zeros.
/// They arise for pure states, where rounding would otherwise leave a
/// √ε-sized artefact.
const PURE_SNAP: f64 = 1e-10;

/// A real linear combination of the quadratures (x1, p1, …).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureCombo {
    pub coefficients: Vec<f64>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Q {
    X(usize),
    P(usize),
}

impl QuadratureCombo {
    pub fn new(coefficients: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if coefficients.len() % 2 != 0 || coefficients.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidParameter("combination needs 2N coefficients, not all zero".into()));
        }
        Ok(Self { coefficients, label: label.into() })
    }

    /// Builds a combination over `n_modes` from `(coefficient, quadrature)`
    /// terms with 1-based mode numbers; the label is generated.
    pub fn from_terms(n_modes: usize, terms: &[(f64, Q)]) -> Result<Self> {
        let mut coefficients = vec![0.0; 2 * n_modes];
        let mut label = String::new();
        for (k, &(c, q)) in terms.iter().enumerate() {
            let (idx, name) = match q {
                Q::X(m) => (2 * m.wrapping_sub(1), format!("x{m}")),
                Q::P(m) => (2 * m.wrapping_sub(1) + 1, format!("p{m}")),
            };
            if idx >= coefficients.len() {
                return Err(Error::Dimension(format!("{name} outside {n_modes} modes")));
            }
            coefficients[idx] += c;
            let sign = if c < 0.0 {
                "-"
            } else if k > 0 {
                "+"
            } else {
                ""
            };
            let mag = if (c.abs() - 1.0).abs() < f64::EPSILON { String::new() } else { format!("{}", c.abs()) };
            let _ = write!(label, "{sign}{mag}{name}");
        }
        Self::new(coefficients, label)
    }

    pub fn n_modes(&self) -> usize {
        self.coefficients.len() / 2
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { coefficients: self.coefficients.iter().map(|c| c * k).collect(), label: format!("{k}*({})", self.label) }
    }
}

/// `cᵀ Γ c`.
pub fn combo_variance(g: &CovarianceMatrix, c: &QuadratureCombo) -> Result<f64> {
    if c.coefficients.len() != g.matrix().nrows() {
        return Err(Error::Dimension(format!(
            "combination has {} coefficients, covariance is {}x{}",
            c.coefficients.len(),
            g.matrix().nrows(),
            g.matrix().ncols()
        )));
    }
    let v = DVector::from_column_slice(&c.coefficients);
    Ok((v.transpose() * g.matrix() * &v)[(0, 0)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InseparabilityEntry {
    pub label: String,
    pub terms: [f64; 2],
    pub value: f64,
    pub threshold: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InseparabilityReport {
    pub entries: Vec<InseparabilityEntry>,
}

impl InseparabilityReport {
    pub fn all_pass(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.passes)
    }

    pub fn max_value(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.value).reduce(f64::max)
    }
}

/// Evaluates each pair of combinations against the threshold of 4.
pub fn inseparability_pairs(
    g: &CovarianceMatrix,
    pairs: &[(QuadratureCombo, QuadratureCombo)],
) -> Result<InseparabilityReport> {
    let entries = pairs
        .iter()
        .map(|(a, b)| {
            let terms = [combo_variance(g, a)?, combo_variance(g, b)?];
            let value = terms[0] + terms[1];
            Ok(InseparabilityEntry {
                label: format!("V({}) + V({})", a.label, b.label),
                terms,
                value,
                threshold: INSEPARABILITY_THRESHOLD,
                passes: value < INSEPARABILITY_THRESHOLD,
            })
        })
        .collect::<Result<_>>()?;
    Ok(InseparabilityReport { entries })
}

/// Inseparability sums of `preset`'s tabulated combination pairs.
pub fn inseparability(g: &CovarianceMatrix, preset: crate::presets::Preset) -> Result<InseparabilityReport> {
    inseparability_pairs(g, &preset.inseparability_pairs())
}

/// Uhlmann fidelity of two zero-mean Gaussian states.
///
/// With V = Γ/2, V_aux = Ωᵀ(V₁+V₂)⁻¹(Ω/4 + V₂ΩV₁) and A = V_aux Ω,
/// F = √(det[2(√(I + A⁻²/4) + I) V_aux] / det(V₁+V₂)).
/// The matrix square root is evaluated on the eigenvalues of A.
/// For pure states F = 2ᴺ/√det(Γ₁+Γ₂).
pub fn gaussian_fidelity(g1: &CovarianceMatrix, g2: &CovarianceMatrix) -> Result<f64> {
    if g1.matrix().shape() != g2.matrix().shape() {
        return Err(Error::Dimension("fidelity needs states with the same number of modes".into()));
    }
    g1.check_physical()?;
    g2.check_physical()?;
    let n = g1.n_modes();
    let omega = symplectic_form(n);
    let v1 = g1.matrix() * 0.5;
    let v2 = g2.matrix() * 0.5;
    let sum = &v1 + &v2;
    let sum_inv = sum.clone().try_inverse().ok_or_else(|| Error::Numerical("V₁ + V₂ is singular".into()))?;
    let vaux: RMatrix = omega.transpose() * &sum_inv * (&omega * 0.25 + &v2 * &omega * &v1);
    let a = &vaux * &omega;

    let mut prod = Complex64::new(1.0, 0.0);
    for mu in a.complex_eigenvalues().iter() {
        let arg = Complex64::new(1.0, 0.0) + (Complex64::new(4.0, 0.0) * mu * mu).inv();
        let root = if arg.norm() < PURE_SNAP { Complex64::new(0.0, 0.0) } else { arg.sqrt() };
        prod *= Complex64::new(2.0, 0.0) * (root + 1.0);
    }
    let det = prod.re * vaux.determinant() / sum.determinant();
    if !det.is_finite() || det < -1e-9 {
        return Err(Error::Numerical(format!("fidelity determinant ratio is {det}")));
    }
    Ok(det.max(0.0).sqrt().min(1.0))
}

/// Squeezing in dB → variance relative to vacuum, `10^{−dB/10}`.
pub fn db_to_variance(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Variance relative to vacuum → squeezing in dB, `−10 log₁₀ v`.
pub fn variance_to_db(v: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!("variance must be positive, got {v}")));
    }
    Ok(-10.0 * v.log10())
}

/// Mean and standard error of per-batch estimates.
pub fn batch_mean_and_error(estimates: &[f64]) -> Option<(f64, f64)> {
    let k = estimates.len();
    if k < 2 {
        return None;
    }
    let mean = estimates.iter().sum::<f64>() / k as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    Some((mean, (var / k as f64).sqrt()))
}
