//! Homodyne readout: temporal mode functions, quadrature sampling in a
//! fixed set of local-oscillator bases, and covariance reconstruction.
//!
//! Sampling happens at the quadrature level. A basis assigns each mode an
//! angle φ and measures `x cos φ + p sin φ`; the measured vector is then
//! Gaussian with covariance `B Γ Bᵀ`.
//!
//! The standard basis set for N modes has N "one-p" bases (mode i at 90°,
//! the rest at 0°), one all-90° basis and one all-45° basis. For N = 3 these
//! are exactly `90-0-0`, `0-90-0`, `0-0-90`, `90-90-90`, `45-45-45`.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gaussian::{format_float, CovarianceMatrix};
use crate::linops::RMatrix;

/// Parameters of the odd Gaussian-derivative window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeFunctionParams {
    /// Decay rate γ in 1/s.
    pub gamma: f64,
    /// Full window width Δt in ns.
    pub delta_t_ns: f64,
    /// Bin spacing τ in ns.
    pub tau_ns: f64,
    /// Center of the first mode in ns.
    pub t0_ns: f64,
}

impl Default for ModeFunctionParams {
    fn default() -> Self {
        Self { gamma: 6e7, delta_t_ns: 46.0, tau_ns: 66.0, t0_ns: 0.0 }
    }
}

/// Grid spacing, in ns, on which mode functions are normalized.
pub const NORMALIZATION_STEP_NS: f64 = 1.0;

impl ModeFunctionParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.gamma) || !ok(self.delta_t_ns) || !ok(self.tau_ns) || !self.t0_ns.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid mode-function parameters {self:?}")));
        }
        Ok(())
    }

    /// Center t_k of mode `k` (1-based), in ns.
    pub fn center_ns(&self, k: usize) -> f64 {
        self.t0_ns + (k as f64 - 1.0) * self.tau_ns
    }

    fn raw(&self, offset_ns: f64) -> f64 {
        if 2.0 * offset_ns.abs() > self.delta_t_ns {
            return 0.0;
        }
        let s = offset_ns * 1e-9;
        (-(self.gamma * s).powi(2)).exp() * s
    }

    /// Offsets from t_k of the normalization grid points inside the window.
    fn grid_offsets_ns(&self) -> impl Iterator<Item = f64> + '_ {
        let half = (0.5 * self.delta_t_ns / NORMALIZATION_STEP_NS).floor() as i64;
        (-half..=half).map(|j| j as f64 * NORMALIZATION_STEP_NS)
    }

    /// Scale making Σ f² dt = 1 on the normalization grid, with dt in seconds.
    fn norm(&self) -> f64 {
        let dt = NORMALIZATION_STEP_NS * 1e-9;
        self.grid_offsets_ns().map(|o| self.raw(o).powi(2) * dt).sum::<f64>().sqrt()
    }
}

/// Value of the normalized mode function of mode `k` at time `t_ns`, in s^-1/2.
pub fn mode_function(t_ns: f64, p: &ModeFunctionParams, k: usize) -> Result<f64> {
    p.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("mode index is 1-based".into()));
    }
    Ok(p.raw(t_ns - p.center_ns(k)) / p.norm())
}

/// Mode-`k` quadrature of a homodyne record sampled every `dt_ns` from `start_ns`.
pub fn extract_quadrature(record: &[f64], start_ns: f64, dt_ns: f64, p: &ModeFunctionParams, k: usize) -> Result<f64> {
    if dt_ns.is_nan() || dt_ns <= 0.0 {
        return Err(Error::InvalidParameter(format!("sample spacing {dt_ns} ns must be positive")));
    }
    let mut acc = 0.0;
    for (i, v) in record.iter().enumerate() {
        acc += mode_function(start_ns + i as f64 * dt_ns, p, k)? * v * dt_ns * 1e-9;
    }
    Ok(acc)
}

/// Local-oscillator angles in degrees, one per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub angles_deg: Vec<f64>,
}

impl Basis {
    pub fn new(angles_deg: Vec<f64>) -> Result<Self> {
        if angles_deg.is_empty() || angles_deg.iter().any(|a| !a.is_finite() || *a < 0.0 || *a >= 360.0) {
            return Err(Error::InvalidParameter(format!("basis angles {angles_deg:?} must lie in [0, 360)")));
        }
        Ok(Self { angles_deg })
    }

    pub fn n_modes(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    /// N×2N map from interleaved quadratures to measured ones.
    pub fn projection(&self) -> RMatrix {
        let n = self.n_modes();
        let mut b = RMatrix::zeros(n, 2 * n);
        for (i, a) in self.angles_deg.iter().enumerate() {
            let (s, c) = a.to_radians().sin_cos();
            b[(i, 2 * i)] = c;
            b[(i, 2 * i + 1)] = s;
        }
        b
    }

    fn is_at(&self, mode: usize, deg: f64) -> bool {
        (self.angles_deg[mode] - deg).abs() < 1e-9
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .angles_deg
            .iter()
            .map(|a| if a.fract() == 0.0 { format!("{}", *a as i64) } else { format_float(*a) })
            .collect();
        f.write_str(&parts.join("-"))
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let angles = s
            .trim()
            .split('-')
            .map(|a| a.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad basis label '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        Basis::new(angles)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    pub bases: Vec<Basis>,
}

impl BasisSet {
    /// One-p bases, the all-90° basis and the all-45° basis.
    pub fn standard(n_modes: usize) -> Result<Self> {
        if n_modes < 3 {
            return Err(Error::Dimension(format!("the standard basis set needs at least 3 modes, got {n_modes}")));
        }
        let mut bases: Vec<Basis> = (0..n_modes)
            .map(|i| Basis { angles_deg: (0..n_modes).map(|j| if i == j { 90.0 } else { 0.0 }).collect() })
            .collect();
        bases.push(Basis { angles_deg: vec![90.0; n_modes] });
        bases.push(Basis { angles_deg: vec![45.0; n_modes] });
        Ok(Self { bases })
    }

    pub fn labels(&self) -> Vec<String> {
        self.bases.iter().map(Basis::label).collect()
    }
}

/// Samples of the measured quadratures in one basis, one row per shot.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub basis: Basis,
    pub samples: DMatrix<f64>,
}

fn factor(cov: &RMatrix) -> RMatrix {
    if let Some(ch) = Cholesky::new(cov.clone()) {
        return ch.l();
    }
    // Positive semidefinite but singular: fall back to a clamped square root.
    let eig = SymmetricEigen::new(cov.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * RMatrix::from_diagonal(&roots)
}

fn draw(g: &CovarianceMatrix, basis: &Basis, n: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
    if basis.n_modes() != g.n_modes() {
        return Err(Error::Dimension(format!(
            "basis {basis} has {} angles for {} modes",
            basis.n_modes(),
            g.n_modes()
        )));
    }
    g.check_physical()?;
    let b = basis.projection();
    let cov = &b * g.matrix() * b.transpose();
    let l = factor(&cov);
    let m = g.n_modes();
    let z = DMatrix::<f64>::from_fn(n, m, |_, _| StandardNormal.sample(rng));
    Ok(SampleSet { basis: basis.clone(), samples: z * l.transpose() })
}

/// `n` zero-mean Gaussian shots with covariance `B Γ Bᵀ`, reproducible from `seed`.
pub fn sample_quadratures(g: &CovarianceMatrix, basis: &Basis, n: usize, seed: u64) -> Result<SampleSet> {
    draw(g, basis, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Samples every basis of `set`, each from its own stream of `seed`.
pub fn sample_basis_set(g: &CovarianceMatrix, set: &BasisSet, n: usize, seed: u64) -> Result<Vec<SampleSet>> {
    set.bases
        .iter()
        .enumerate()
        .map(|(i, basis)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            draw(g, basis, n, &mut rng)
        })
        .collect()
}

/// Unbiased sample covariance of the measured quadratures.
pub fn sample_moments(s: &SampleSet) -> Result<RMatrix> {
    let n = s.samples.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("basis {} has {n} samples; need at least 2", s.basis)));
    }
    let mean = s.samples.row_mean();
    let mut centered = s.samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    Ok(centered.transpose() * &centered / (n as f64 - 1.0))
}

/// Indices (row, col) of interleaved Γ elements, row ≤ col, that no basis determines.
pub fn undetermined_elements(bases: &[Basis], n_modes: usize) -> Vec<(usize, usize)> {
    let mut missing = Vec::new();
    for r in 0..2 * n_modes {
        for c in r..2 * n_modes {
            if sources(bases, r, c).is_empty() {
                missing.push((r, c));
            }
        }
    }
    missing
}

/// How one basis contributes to a Γ element.
enum Source {
    /// Directly an entry of the measured covariance.
    Direct(usize, usize),
    /// Same-mode x-p covariance from a 45° variance.
    Diagonal45(usize),
}

fn angle_of(q: usize) -> f64 {
    if q % 2 == 0 {
        0.0
    } else {
        90.0
    }
}

fn sources(bases: &[Basis], r: usize, c: usize) -> Vec<(usize, Source)> {
    let (mi, mj) = (r / 2, c / 2);
    let mut out = Vec::new();
    for (k, b) in bases.iter().enumerate() {
        if b.n_modes() <= mj {
            continue;
        }
        if mi == mj && r != c {
            if b.is_at(mi, 45.0) {
                out.push((k, Source::Diagonal45(mi)));
            }
        } else if b.is_at(mi, angle_of(r)) && b.is_at(mj, angle_of(c)) {
            out.push((k, Source::Direct(mi, mj)));
        }
    }
    out
}

/// Γ from per-basis covariances of measured quadratures.
///
/// Diagonal and cross-mode elements average every basis that measures them
/// directly. Same-mode `cov(x_i, p_i)` is `var₄₅ − (var x_i + var p_i)/2`,
/// using the already averaged variances.
pub fn estimate_from_moments(moments: &[(Basis, RMatrix)]) -> Result<CovarianceMatrix> {
    let n =
        moments.first().map(|(b, _)| b.n_modes()).ok_or_else(|| Error::InvalidParameter("no sample sets".into()))?;
    for (b, m) in moments {
        if b.n_modes() != n || m.nrows() != n || m.ncols() != n {
            return Err(Error::Dimension(format!("basis {b} does not match {n} modes")));
        }
    }
    let bases: Vec<Basis> = moments.iter().map(|(b, _)| b.clone()).collect();
    let missing = undetermined_elements(&bases, n);
    if !missing.is_empty() {
        return Err(Error::InvalidParameter(format!("bases leave elements {missing:?} undetermined")));
    }

    let mut g = RMatrix::zeros(2 * n, 2 * n);
    let mut deferred = Vec::new();
    for r in 0..2 * n {
        for c in r..2 * n {
            let src = sources(&bases, r, c);
            if matches!(src[0].1, Source::Diagonal45(_)) {
                deferred.push((r, c, src));
                continue;
            }
            let mean = src
                .iter()
                .map(|(k, s)| match s {
                    Source::Direct(i, j) => moments[*k].1[(*i, *j)],
                    Source::Diagonal45(_) => unreachable!(),
                })
                .sum::<f64>()
                / src.len() as f64;
            g[(r, c)] = mean;
            g[(c, r)] = mean;
        }
    }
    for (r, c, src) in deferred {
        let half_sum = 0.5 * (g[(r, r)] + g[(c, c)]);
        let mean = src
            .iter()
            .map(|(k, s)| match s {
                Source::Diagonal45(i) => moments[*k].1[(*i, *i)] - half_sum,
                Source::Direct(..) => unreachable!(),
            })
            .sum::<f64>()
            / src.len() as f64;
        g[(r, c)] = mean;
        g[(c, r)] = mean;
    }
    CovarianceMatrix::new(g)
}

/// Γ̂ from sample sets; may be unphysical through sampling noise.
pub fn estimate_covariance(sets: &[SampleSet]) -> Result<CovarianceMatrix> {
    let moments = sets.iter().map(|s| Ok((s.basis.clone(), sample_moments(s)?))).collect::<Result<Vec<_>>>()?;
    estimate_from_moments(&moments)
}

/// CSV with a `basis` column followed by `q1..qN`, one row per shot.
pub fn samples_to_csv(sets: &[SampleSet]) -> String {
    let n = sets.first().map_or(0, |s| s.basis.n_modes());
    let mut out = String::from("basis");
    for i in 1..=n {
        out.push_str(&format!(",q{i}"));
    }
    out.push('\n');
    for s in sets {
        let label = s.basis.label();
        for row in s.samples.row_iter() {
            out.push_str(&label);
            for v in row.iter() {
                out.push(',');
                out.push_str(&format_float(*v));
            }
            out.push('\n');
        }
    }
    out
}

/// Inverse of [`samples_to_csv`]; bases keep their order of first appearance.
pub fn samples_from_csv(text: &str) -> Result<Vec<SampleSet>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty sample CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"basis") || cols.len() < 2 {
        return Err(Error::Parse(format!("unexpected sample CSV header '{header}'")));
    }
    let n = cols.len() - 1;
    let mut groups: Vec<(Basis, Vec<f64>)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            return Err(Error::Parse(format!("row {} has {} fields, expected {}", i + 2, fields.len(), n + 1)));
        }
        let basis: Basis = fields[0].parse()?;
        if basis.n_modes() != n {
            return Err(Error::Parse(format!("basis '{}' does not have {n} angles", fields[0])));
        }
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("bad value '{f}' on row {}", i + 2))))
            .collect::<Result<Vec<_>>>()?;
        match groups.iter_mut().find(|(b, _)| *b == basis) {
            Some((_, data)) => data.extend(values),
            None => groups.push((basis, values)),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(basis, data)| {
            let rows = data.len() / n;
            SampleSet { basis, samples: DMatrix::from_row_slice(rows, n, &data) }
        })
        .collect())
}

/// Largest absolute element difference between two covariance matrices.
pub fn max_element_error(a: &CovarianceMatrix, b: &CovarianceMatrix) -> Result<f64> {
    if a.n_modes() != b.n_modes() {
        return Err(Error::Dimension("covariance matrices differ in size".into()));
    }
    Ok((a.matrix() - b.matrix()).abs().max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{apply_symplectic, squeezed_vacuum_cov, Quadrature};
    use crate::linops::{symplectic_from_unitary, UnitaryMatrix};

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
        let h = (b - a) / intervals as f64;
        let mut acc = f(a) + f(b);
        for i in 1..intervals {
            acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    fn mixed_state(seed: u64) -> CovarianceMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parts: Vec<CovarianceMatrix> = [(5.0, Quadrature::P), (3.0, Quadrature::X), (6.0, Quadrature::P)]
            .iter()
            .map(|&(db, q)| squeezed_vacuum_cov(db, q).unwrap())
            .collect();
        let s = symplectic_from_unitary(&UnitaryMatrix::haar(3, &mut rng)).unwrap();
        let g = apply_symplectic(&CovarianceMatrix::direct_sum(&parts), &s).unwrap();
        crate::gaussian::apply_loss(&g, 1, 0.3).unwrap()
    }

    #[test]
    fn mode_function_shape() {
        let p = ModeFunctionParams::default();
        for k in 1..=3 {
            let tk = p.center_ns(k);
            assert_eq!(mode_function(tk, &p, k).unwrap(), 0.0);
            for s in [0.5, 3.0, 11.0, 22.9] {
                let (a, b) = (mode_function(tk + s, &p, k).unwrap(), mode_function(tk - s, &p, k).unwrap());
                assert!(a > 0.0);
                assert!((a + b).abs() < 1e-12 * a.abs());
            }
            assert_eq!(mode_function(tk + 23.01, &p, k).unwrap(), 0.0);
            assert_eq!(mode_function(tk - 40.0, &p, k).unwrap(), 0.0);
            assert!(mode_function(tk + 23.0, &p, k).unwrap() != 0.0);
        }
        assert!(mode_function(0.0, &ModeFunctionParams { delta_t_ns: 0.0, ..p }, 1).is_err());
    }

    #[test]
    fn mode_function_normalization() {
        let p = ModeFunctionParams::default();
        let tk = p.center_ns(2);
        let discrete: f64 = (-23..=23).map(|j| mode_function(tk + j as f64, &p, 2).unwrap().powi(2) * 1e-9).sum();
        assert!((discrete - 1.0).abs() < 1e-6);
        // The continuous integral differs from the 1 ns Riemann sum only by the window edges.
        let continuous = simpson(|t| mode_function(t, &p, 2).unwrap().powi(2) * 1e-9, tk - 23.0, tk + 23.0, 4600);
        assert!((continuous - 1.0).abs() < 0.03, "{continuous}");
    }

    #[test]
    fn mode_function_extracts_its_own_weight() {
        let p = ModeFunctionParams::default();
        let record: Vec<f64> = (0..200).map(|i| 2.5 * mode_function(i as f64, &p, 2).unwrap()).collect();
        let q = extract_quadrature(&record, 0.0, 1.0, &p, 2).unwrap();
        assert!((q - 2.5).abs() < 1e-9);
        assert!(extract_quadrature(&record, 0.0, 1.0, &p, 1).unwrap().abs() < 0.1);
    }

    #[test]
    fn standard_bases_for_three_modes() {
        let set = BasisSet::standard(3).unwrap();
        assert_eq!(set.labels(), vec!["90-0-0", "0-90-0", "0-0-90", "90-90-90", "45-45-45"]);
        assert!(BasisSet::standard(2).is_err());
        assert_eq!("45-45-45".parse::<Basis>().unwrap(), set.bases[4]);
        assert!("45-x".parse::<Basis>().is_err());
    }

    #[test]
    fn every_basis_is_needed() {
        for n in [3, 4] {
            let set = BasisSet::standard(n).unwrap();
            assert!(undetermined_elements(&set.bases, n).is_empty());
            for drop in 0..set.bases.len() {
                let mut fewer = set.bases.clone();
                fewer.remove(drop);
                assert!(!undetermined_elements(&fewer, n).is_empty(), "n={n} without {}", set.bases[drop]);
            }
        }
    }

    #[test]
    fn exact_moments_reconstruct_exactly() {
        for n in [3, 4] {
            let g = if n == 3 {
                mixed_state(4)
            } else {
                let parts = vec![mixed_state(5), squeezed_vacuum_cov(2.0, Quadrature::X).unwrap()];
                CovarianceMatrix::direct_sum(&parts)
            };
            let moments: Vec<(Basis, RMatrix)> = BasisSet::standard(n)
                .unwrap()
                .bases
                .into_iter()
                .map(|b| {
                    let p = b.projection();
                    let m = &p * g.matrix() * p.transpose();
                    (b, m)
                })
                .collect();
            let est = estimate_from_moments(&moments).unwrap();
            assert!(max_element_error(&est, &g).unwrap() < 1e-12);
        }
    }

    #[test]
    fn sampling_marginals_and_determinism() {
        let n = 100_000;
        let set = BasisSet::standard(3).unwrap();
        let vac = CovarianceMatrix::vacuum(3);
        for basis in &set.bases {
            let m = sample_moments(&sample_quadratures(&vac, basis, n, 3).unwrap()).unwrap();
            for i in 0..3 {
                assert!((m[(i, i)] - 1.0).abs() < 0.02, "{basis}: {}", m[(i, i)]);
            }
        }

        let sq = CovarianceMatrix::direct_sum(&vec![squeezed_vacuum_cov(7.4, Quadrature::P).unwrap(); 3]);
        let m = sample_moments(&sample_quadratures(&sq, &set.bases[0], n, 9).unwrap()).unwrap();
        let want = 10f64.powf(-0.74);
        assert!((m[(0, 0)] - want).abs() < 3.0 * (2.0 / n as f64).sqrt() * want);

        let a = sample_basis_set(&sq, &set, 50, 11).unwrap();
        let b = sample_basis_set(&sq, &set, 50, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].samples, a[1].samples);

        let bad = CovarianceMatrix::new(RMatrix::identity(6, 6) * 0.5).unwrap();
        assert!(sample_quadratures(&bad, &set.bases[0], 10, 0).is_err());
    }

    #[test]
    fn singular_covariances_still_sample() {
        // A rank-deficient projected covariance exercises the eigen fallback.
        let l = factor(&RMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert!((&l * l.transpose() - RMatrix::from_element(2, 2, 1.0_f64)).abs().max() < 1e-12);
    }

    #[test]
    fn vacuum_estimate_and_csv_round_trip() {
        let set = BasisSet::standard(3).unwrap();
        let sets = sample_basis_set(&CovarianceMatrix::vacuum(3), &set, 5000, 21).unwrap();
        let est = estimate_covariance(&sets).unwrap();
        assert!(max_element_error(&est, &CovarianceMatrix::vacuum(3)).unwrap() < 0.1);

        let back = samples_from_csv(&samples_to_csv(&sets)).unwrap();
        assert_eq!(back, sets);
        assert!(estimate_covariance(&sets[..4]).is_err());
        let one: Vec<SampleSet> = sets
            .iter()
            .map(|s| SampleSet { basis: s.basis.clone(), samples: s.samples.rows(0, 1).into_owned() })
            .collect();
        assert!(estimate_covariance(&one).is_err());
    }
}
