//! Triangular factorization of an N-mode unitary into two-mode T matrices that
//! always couple mode 1 with one other mode, followed by a diagonal phase.
//!
//! The factorization reads
//! `U = D · (T⁽ᴺ⁻¹⁾₁₂)⁻¹ · … · (T⁽¹⁾₁ₙ)⁻¹ · … · (T⁽¹⁾₁₂)⁻¹`, where layer k holds
//! `T⁽ᵏ⁾₁ₘ` for m = 2..N−k+1. Layer k is solved by right-multiplying the current
//! matrix so that its last row collapses onto the diagonal.
//!
//! Nulling order: within a layer, `T₁ₘ` for m < n folds the row-n entry of
//! column m into column 1, and the final `T₁ₙ` clears column 1 into the
//! diagonal. This is one valid realization of the block form; others exist.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::linops::{wrap_angle, CMatrix, UnitaryMatrix, VALIDATION_TOL};

/// Magnitudes below this are treated as exact zeros when choosing angles.
const ZERO_TOL: f64 = 1e-14;
/// Maximum residual left in a nulled row before the reduction is rejected.
const RESIDUAL_TOL: f64 = 1e-8;

/// Parameters of one `T₁ₘ`. `m` is 1-based; `l` is always 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TParams {
    pub m: usize,
    pub omega: f64,
    pub phi: f64,
}

impl TParams {
    pub const L: usize = 1;

    pub fn identity(m: usize) -> Self {
        Self { m, omega: FRAC_PI_2, phi: 0.0 }
    }

    /// True when the T matrix equals the identity within `tol`.
    pub fn is_identity(&self, tol: f64) -> bool {
        let s = self.omega.sin();
        let c = self.omega.cos();
        c.abs() <= tol && (Complex64::from_polar(s, self.phi) - 1.0).norm() <= tol && (s - 1.0).abs() <= tol
    }

    /// Power fraction exchanged between the two modes, `cos² ω`.
    pub fn exchange_fraction(&self) -> f64 {
        self.omega.cos().powi(2)
    }

    fn normalized(m: usize, omega: f64, phi: f64) -> Self {
        Self { m, omega: wrap_angle(omega), phi: wrap_angle(phi) }
    }
}

/// The 2×2 core of `T₁ₘ` on rows/columns (1, m).
pub fn t_block(omega: f64, phi: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = omega.sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    [[e * s, -e * c], [Complex64::new(c, 0.0), Complex64::new(s, 0.0)]]
}

/// Embeds `T₁ₘ` into an N×N identity.
pub fn t_matrix(n: usize, p: &TParams) -> Result<UnitaryMatrix> {
    if p.m < 2 || p.m > n {
        return Err(Error::Dimension(format!("T matrix index m = {} outside 2..={n}", p.m)));
    }
    let mut t = CMatrix::identity(n, n);
    let b = t_block(p.omega, p.phi);
    let (l, m) = (0, p.m - 1);
    t[(l, l)] = b[0][0];
    t[(l, m)] = b[0][1];
    t[(m, l)] = b[1][0];
    t[(m, m)] = b[1][1];
    Ok(UnitaryMatrix::from_trusted(t))
}

/// Right-multiplies columns 1 and m of `x` by `T₁ₘ` in place.
fn apply_t_right(x: &mut CMatrix, p: &TParams) {
    let b = t_block(p.omega, p.phi);
    let m = p.m - 1;
    for r in 0..x.nrows() {
        let (u, v) = (x[(r, 0)], x[(r, m)]);
        x[(r, 0)] = u * b[0][0] + v * b[1][0];
        x[(r, m)] = u * b[0][1] + v * b[1][1];
    }
}

/// Left-multiplies rows 1 and m of `x` by `T₁ₘ⁻¹ = T₁ₘ†` in place.
fn apply_t_inverse_left(x: &mut CMatrix, p: &TParams) {
    let b = t_block(p.omega, p.phi);
    let m = p.m - 1;
    for col in 0..x.ncols() {
        let (u, v) = (x[(0, col)], x[(m, col)]);
        x[(0, col)] = b[0][0].conj() * u + b[1][0].conj() * v;
        x[(m, col)] = b[0][1].conj() * u + b[1][1].conj() * v;
    }
}

/// Ordered layers of T parameters plus the final diagonal phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlan")]
pub struct DecompositionPlan {
    pub dim: usize,
    pub layers: Vec<Vec<TParams>>,
    pub alphas: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPlan {
    dim: usize,
    layers: Vec<Vec<TParams>>,
    alphas: Vec<f64>,
}

impl TryFrom<RawPlan> for DecompositionPlan {
    type Error = Error;

    fn try_from(raw: RawPlan) -> Result<Self> {
        DecompositionPlan::new(raw.dim, raw.layers, raw.alphas)
    }
}

impl DecompositionPlan {
    /// Validates the layer shape: layer k has m = 2..N−k+1 in order.
    pub fn new(dim: usize, layers: Vec<Vec<TParams>>, alphas: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("plan dimension must be positive".into()));
        }
        if alphas.len() != dim {
            return Err(Error::Dimension(format!("expected {dim} alphas, got {}", alphas.len())));
        }
        if layers.len() != dim.saturating_sub(1) {
            return Err(Error::Dimension(format!("expected {} layers, got {}", dim.saturating_sub(1), layers.len())));
        }
        for (k, layer) in layers.iter().enumerate() {
            let expected = dim - (k + 1);
            let ms: Vec<usize> = layer.iter().map(|p| p.m).collect();
            if ms != (2..=expected + 1).collect::<Vec<_>>() {
                return Err(Error::Dimension(format!(
                    "layer {} must cover m = 2..={}, got {ms:?}",
                    k + 1,
                    expected + 1
                )));
            }
        }
        let all_finite = layers.iter().flatten().all(|p| p.omega.is_finite() && p.phi.is_finite())
            && alphas.iter().all(|a| a.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter("plan angles must be finite".into()));
        }
        Ok(Self { dim, layers, alphas })
    }

    /// Plan whose every T is the identity and every α is zero.
    pub fn identity(dim: usize) -> Self {
        let layers = (1..dim).map(|k| (2..=dim - k + 1).map(TParams::identity).collect()).collect();
        Self { dim, layers, alphas: vec![0.0; dim] }
    }

    pub fn t_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// `(layer, params)` pairs in application order, layers 1-based.
    pub fn interactions(&self) -> impl Iterator<Item = (usize, &TParams)> {
        self.layers.iter().enumerate().flat_map(|(k, layer)| layer.iter().map(move |p| (k + 1, p)))
    }
}

/// Folds the last row of `u` onto its diagonal with `T₁₂ … T₁ₙ`.
///
/// Returns the parameters, the leading (N−1)×(N−1) block and the phase of the
/// remaining diagonal entry.
pub fn reduce_step(u: &UnitaryMatrix) -> Result<(Vec<TParams>, UnitaryMatrix, f64)> {
    let n = u.dim();
    if n < 2 {
        return Err(Error::Dimension("reduce_step needs N ≥ 2".into()));
    }
    let mut x = u.matrix().clone();
    let params = reduce_in_place(&mut x)?;
    let alpha = wrap_angle(x[(n - 1, n - 1)].arg());
    let reduced = x.view((0, 0), (n - 1, n - 1)).into_owned();
    Ok((params, UnitaryMatrix::from_trusted(reduced), alpha))
}

fn reduce_in_place(x: &mut CMatrix) -> Result<Vec<TParams>> {
    let n = x.nrows();
    let row = n - 1;
    let mut params = Vec::with_capacity(n - 1);
    for m in 2..=n {
        let a = x[(row, 0)];
        let b = x[(row, m - 1)];
        let p = if m < n {
            if b.norm() <= ZERO_TOL {
                TParams::identity(m)
            } else if a.norm() <= ZERO_TOL {
                TParams::normalized(m, 0.0, 0.0)
            } else {
                TParams::normalized(m, a.norm().atan2(b.norm()), b.arg() - a.arg())
            }
        } else if a.norm() <= ZERO_TOL {
            TParams::identity(m)
        } else {
            TParams::normalized(m, b.norm().atan2(a.norm()), b.arg() - a.arg() + PI)
        };
        apply_t_right(x, &p);
        params.push(p);
    }
    let residual: f64 = (0..n - 1).map(|j| x[(row, j)].norm_sqr() + x[(j, row)].norm_sqr()).sum::<f64>().sqrt();
    if residual > RESIDUAL_TOL {
        return Err(Error::Numerical(format!("row reduction left residual {residual:.3e}")));
    }
    for j in 0..n - 1 {
        x[(row, j)] = Complex64::new(0.0, 0.0);
        x[(j, row)] = Complex64::new(0.0, 0.0);
    }
    Ok(params)
}

/// Full factorization of `u`.
pub fn decompose(u: &UnitaryMatrix) -> Result<DecompositionPlan> {
    let deviation = crate::linops::unitarity_deviation(u.matrix())?;
    if deviation > VALIDATION_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    let n = u.dim();
    let mut x = u.matrix().clone();
    let mut layers = Vec::with_capacity(n.saturating_sub(1));
    for size in (2..=n).rev() {
        let mut block = x.view((0, 0), (size, size)).into_owned();
        layers.push(reduce_in_place(&mut block)?);
        x.view_mut((0, 0), (size, size)).copy_from(&block);
    }
    let alphas = (0..n).map(|j| wrap_angle(x[(j, j)].arg())).collect();
    DecompositionPlan::new(n, layers, alphas)
}

/// Evaluates `D · (T⁽ᴺ⁻¹⁾₁₂)⁻¹ · … · (T⁽¹⁾₁₂)⁻¹`.
pub fn reconstruct(plan: &DecompositionPlan) -> UnitaryMatrix {
    let n = plan.dim;
    let mut acc = CMatrix::identity(n, n);
    // Build right to left: the innermost factor is the first T applied.
    for (_, p) in plan.interactions() {
        apply_t_inverse_left(&mut acc, p);
    }
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        plan.alphas.iter().map(|&a| Complex64::from_polar(1.0, a)),
    ));
    UnitaryMatrix::from_trusted(d * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::unitarity_deviation;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Element-by-element construction, independent of `t_block`.
    fn t_by_elements(n: usize, m: usize, omega: f64, phi: f64) -> CMatrix {
        let mut t = CMatrix::identity(n, n);
        t[(0, 0)] = c(phi.cos() * omega.sin(), phi.sin() * omega.sin());
        t[(0, m - 1)] = c(-phi.cos() * omega.cos(), -phi.sin() * omega.cos());
        t[(m - 1, 0)] = c(omega.cos(), 0.0);
        t[(m - 1, m - 1)] = c(omega.sin(), 0.0);
        t
    }

    fn product_of_ts(n: usize, params: &[TParams]) -> CMatrix {
        params.iter().fold(CMatrix::identity(n, n), |acc, p| acc * t_matrix(n, p).unwrap().into_matrix())
    }

    #[test]
    fn t_matrix_identity_and_swap() {
        let id = t_matrix(3, &TParams { m: 2, omega: FRAC_PI_2, phi: 0.0 }).unwrap();
        assert!((id.matrix() - CMatrix::identity(3, 3)).norm() < 1e-15);

        let swap = t_matrix(2, &TParams { m: 2, omega: 0.0, phi: 0.0 }).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!((swap.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn t_matrix_balanced_with_quarter_phase() {
        let t = t_matrix(2, &TParams { m: 2, omega: FRAC_PI_4, phi: FRAC_PI_2 }).unwrap();
        let h = FRAC_1_SQRT_2;
        let expected = CMatrix::from_row_slice(2, 2, &[c(0.0, h), c(0.0, -h), c(h, 0.0), c(h, 0.0)]);
        assert!((t.matrix() - &expected).norm() < 1e-15);
        assert!((t.matrix() - t_by_elements(2, 2, FRAC_PI_4, FRAC_PI_2)).norm() < 1e-15);
    }

    #[test]
    fn t_matrix_rejects_bad_index() {
        assert!(t_matrix(3, &TParams { m: 4, omega: 0.0, phi: 0.0 }).is_err());
        assert!(t_matrix(3, &TParams { m: 1, omega: 0.0, phi: 0.0 }).is_err());
    }

    #[test]
    fn reduce_step_on_identity_and_diagonal() {
        let (params, reduced, alpha) = reduce_step(&UnitaryMatrix::identity(3)).unwrap();
        assert!(params.iter().all(|p| p.is_identity(1e-15)));
        assert_eq!(alpha, 0.0);
        assert!((reduced.matrix() - CMatrix::identity(2, 2)).norm() < 1e-15);

        let beta = 1.1;
        let mut d = CMatrix::identity(3, 3);
        d[(2, 2)] = Complex64::from_polar(1.0, beta);
        let (params, _, alpha) = reduce_step(&UnitaryMatrix::new(d).unwrap()).unwrap();
        assert!(params.iter().all(|p| p.is_identity(1e-15)));
        assert!((alpha - beta).abs() < 1e-15);
    }

    #[test]
    fn reduce_step_block_form_on_random_u3() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let u = UnitaryMatrix::haar(3, &mut rng);
            let (params, reduced, alpha) = reduce_step(&u).unwrap();
            let lhs = u.matrix() * product_of_ts(3, &params);
            let mut rhs = CMatrix::zeros(3, 3);
            rhs.view_mut((0, 0), (2, 2)).copy_from(reduced.matrix());
            rhs[(2, 2)] = Complex64::from_polar(1.0, alpha);
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn decompose_identity() {
        for n in 1..6 {
            let plan = decompose(&UnitaryMatrix::identity(n)).unwrap();
            assert!(plan.interactions().all(|(_, p)| p.is_identity(1e-15)));
            assert!(plan.alphas.iter().all(|&a| a == 0.0));
            assert_eq!(plan, DecompositionPlan::identity(n));
        }
    }

    #[test]
    fn decompose_embedded_balanced_splitter() {
        let h = FRAC_1_SQRT_2;
        let mut u = CMatrix::identity(3, 3);
        u[(0, 0)] = c(h, 0.0);
        u[(0, 1)] = c(h, 0.0);
        u[(1, 0)] = c(h, 0.0);
        u[(1, 1)] = c(-h, 0.0);
        let u = UnitaryMatrix::new(u).unwrap();
        let plan = decompose(&u).unwrap();
        let active: Vec<(usize, usize)> =
            plan.interactions().filter(|(_, p)| !p.is_identity(1e-12)).map(|(k, p)| (k, p.m)).collect();
        // Row 3 is already diagonal, so the coupling surfaces in the last layer.
        assert_eq!(active, vec![(2, 2)]);
        let p = plan.layers[1][0];
        assert!((p.exchange_fraction() - 0.5).abs() < 1e-12);
        assert!(reconstruct(&plan).distance(&u) < 1e-12);
    }

    #[test]
    fn reconstruct_alphas_only() {
        let mut plan = DecompositionPlan::identity(3);
        plan.alphas = vec![0.1, 0.2, 0.3];
        let u = reconstruct(&plan);
        for j in 0..3 {
            assert!((u.matrix()[(j, j)] - Complex64::from_polar(1.0, plan.alphas[j])).norm() < 1e-15);
        }
        assert!((u.matrix() - CMatrix::from_diagonal(&u.matrix().diagonal())).norm() < 1e-15);
    }

    #[test]
    fn round_trip_random_up_to_eight_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..=8 {
            for _ in 0..20 {
                let u = UnitaryMatrix::haar(n, &mut rng);
                let plan = decompose(&u).unwrap();
                assert_eq!(plan.layers.len(), n - 1);
                assert_eq!(plan.t_count(), n * (n - 1) / 2);
                assert!(reconstruct(&plan).distance(&u) < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_non_unitary() {
        let m = CMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(UnitaryMatrix::new(m.clone()).is_err());
        assert!(matches!(decompose(&UnitaryMatrix::from_trusted_unchecked(m)), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn plan_json_shape_and_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let plan = decompose(&UnitaryMatrix::haar(3, &mut rng)).unwrap();
        let value = serde_json::to_value(&plan).unwrap();
        assert_eq!(value["dim"], 3);
        assert_eq!(value["layers"][0][1]["m"], 3);
        assert!(value["layers"][1][0]["omega"].is_number());
        let back: DecompositionPlan = serde_json::from_value(value).unwrap();
        assert_eq!(back, plan);

        let bad = r#"{"dim":3,"layers":[[{"m":2,"omega":0,"phi":0}],[{"m":2,"omega":0,"phi":0}]],"alphas":[0,0,0]}"#;
        assert!(serde_json::from_str::<DecompositionPlan>(bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn t_matrices_are_unitary_with_adjoint_inverse(omega in 0.0..6.3f64, phi in 0.0..6.3f64, n in 2usize..6) {
            let m = n;
            let t = t_matrix(n, &TParams { m, omega, phi }).unwrap();
            prop_assert!(unitarity_deviation(t.matrix()).unwrap() < 1e-12);
            let mut inv = CMatrix::identity(n, n);
            apply_t_inverse_left(&mut inv, &TParams { m, omega, phi });
            prop_assert!((inv - t.matrix().adjoint()).norm() < 1e-12);
            prop_assert!((t.matrix() - t_by_elements(n, m, omega, phi)).norm() < 1e-12);
        }

        #[test]
        fn round_trip_and_determinant(seed in any::<u64>(), n in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = UnitaryMatrix::haar(n, &mut rng);
            let plan = decompose(&u).unwrap();
            prop_assert!(reconstruct(&plan).distance(&u) < 1e-9);
            for (_, p) in plan.interactions() {
                prop_assert!((0.0..std::f64::consts::TAU).contains(&p.omega));
                prop_assert!((0.0..std::f64::consts::TAU).contains(&p.phi));
            }
            let phase: f64 = plan.alphas.iter().sum::<f64>() - plan.interactions().map(|(_, p)| p.phi).sum::<f64>();
            let det = u.matrix().clone().determinant();
            prop_assert!((Complex64::from_polar(1.0, phase) - det).norm() < 1e-9);
        }
    }
}
