//! Zero-mean Gaussian states: covariance construction, symplectic and loss
//! channels, and bin-by-bin simulation of a control timeline.
//!
//! Covariances use the interleaved ordering with vacuum equal to the identity.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linops::{symplectic_form, RMatrix, SymplecticMatrix, UnitaryMatrix};
use crate::loopcompiler::routing::{run, Medium};
use crate::loopcompiler::{ControlTimeline, FinalPhaseMode};

const SYMMETRY_TOL: f64 = 1e-10;
/// Lowest admissible eigenvalue of Γ + iΩ.
pub const PHYSICALITY_TOL: f64 = -1e-8;

/// Real symmetric 2N×2N quadrature covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovarianceJson", into = "CovarianceJson")]
pub struct CovarianceMatrix(RMatrix);

#[derive(Serialize, Deserialize)]
struct CovarianceJson {
    n_modes: usize,
    ordering: String,
    entries: Vec<Vec<f64>>,
}

impl TryFrom<CovarianceJson> for CovarianceMatrix {
    type Error = Error;

    fn try_from(raw: CovarianceJson) -> Result<Self> {
        let dim = 2 * raw.n_modes;
        if raw.entries.len() != dim || raw.entries.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension(format!("covariance for {} modes must be {dim}×{dim}", raw.n_modes)));
        }
        CovarianceMatrix::new(RMatrix::from_fn(dim, dim, |i, j| raw.entries[i][j]))
    }
}

impl From<CovarianceMatrix> for CovarianceJson {
    fn from(g: CovarianceMatrix) -> Self {
        let dim = g.0.nrows();
        CovarianceJson {
            n_modes: g.n_modes(),
            ordering: "interleaved".into(),
            entries: (0..dim).map(|i| (0..dim).map(|j| g.0[(i, j)]).collect()).collect(),
        }
    }
}

impl CovarianceMatrix {
    /// Checks shape and symmetry, then symmetrizes. Physicality is not enforced.
    pub fn new(m: RMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() % 2 != 0 || m.nrows() == 0 {
            return Err(Error::Dimension(format!("covariance must be 2N×2N, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("covariance has non-finite entries".into()));
        }
        let asym = (&m - m.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidParameter(format!("covariance is not symmetric (deviation {asym:.3e})")));
        }
        Ok(Self::symmetrized(m))
    }

    /// Like `new`, additionally requiring Γ + iΩ ≥ 0.
    pub fn new_physical(m: RMatrix) -> Result<Self> {
        let g = Self::new(m)?;
        g.check_physical()?;
        Ok(g)
    }

    fn symmetrized(m: RMatrix) -> Self {
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    pub fn vacuum(n_modes: usize) -> Self {
        Self(RMatrix::identity(2 * n_modes, 2 * n_modes))
    }

    pub fn n_modes(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Block-diagonal combination of independent states.
    pub fn direct_sum(parts: &[CovarianceMatrix]) -> Self {
        let dim: usize = parts.iter().map(|p| p.0.nrows()).sum();
        let mut m = RMatrix::zeros(dim, dim);
        let mut offset = 0;
        for p in parts {
            let d = p.0.nrows();
            m.view_mut((offset, offset), (d, d)).copy_from(&p.0);
            offset += d;
        }
        Self(m)
    }

    /// Smallest eigenvalue of the Hermitian matrix Γ + iΩ.
    pub fn min_uncertainty_eigenvalue(&self) -> f64 {
        let omega = symplectic_form(self.n_modes());
        let h = DMatrix::from_fn(self.0.nrows(), self.0.ncols(), |i, j| Complex64::new(self.0[(i, j)], omega[(i, j)]));
        SymmetricEigen::new(h).eigenvalues.min()
    }

    pub fn is_physical(&self) -> bool {
        self.min_uncertainty_eigenvalue() >= PHYSICALITY_TOL
    }

    pub fn check_physical(&self) -> Result<()> {
        let min_eigenvalue = self.min_uncertainty_eigenvalue();
        if min_eigenvalue < PHYSICALITY_TOL {
            return Err(Error::Unphysical { min_eigenvalue });
        }
        Ok(())
    }

    /// Sub-covariance of the listed modes, in the given order.
    pub fn select_modes(&self, modes: &[usize]) -> Result<Self> {
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        if idx.iter().any(|&i| i >= self.0.nrows()) {
            return Err(Error::Dimension("mode index out of range".into()));
        }
        Ok(Self(RMatrix::from_fn(idx.len(), idx.len(), |i, j| self.0[(idx[i], idx[j])])))
    }

    /// Row-major CSV with header `x1,p1,…`.
    pub fn to_csv(&self) -> String {
        let mut out = quadrature_labels(self.n_modes()).join(",");
        out.push('\n');
        for i in 0..self.0.nrows() {
            let row: Vec<String> = (0..self.0.ncols()).map(|j| format_float(self.0[(i, j)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty covariance CSV".into()))?;
        let n = header.split(',').count();
        let rows: Vec<Vec<f64>> = lines
            .map(|l| {
                l.split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad number `{v}`: {e}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parse("covariance CSV is not square".into()));
        }
        Self::new(RMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Flat element list for plotting tools: one entry per matrix element.
    pub fn element_list(&self) -> Vec<CovarianceElement> {
        let labels = quadrature_labels(self.n_modes());
        let mut out = Vec::with_capacity(self.0.len());
        for i in 0..self.0.nrows() {
            for j in 0..self.0.ncols() {
                out.push(CovarianceElement { row: labels[i].clone(), col: labels[j].clone(), value: self.0[(i, j)] });
            }
        }
        out
    }

    /// Tab-separated rendering of `element_list`.
    pub fn element_table(&self) -> String {
        let mut out = String::from("row\tcol\tvalue\n");
        for e in self.element_list() {
            let _ = writeln!(out, "{}\t{}\t{}", e.row, e.col, format_float(e.value));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceElement {
    pub row: String,
    pub col: String,
    pub value: f64,
}

/// `x1, p1, x2, p2, …`.
pub fn quadrature_labels(n_modes: usize) -> Vec<String> {
    (1..=n_modes).flat_map(|k| [format!("x{k}"), format!("p{k}")]).collect()
}

/// Shortest representation that parses back to the same float.
pub(crate) fn format_float(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    X,
    P,
}

/// Single-mode squeezed vacuum: the squeezed quadrature has variance 10^{−dB/10}.
pub fn squeezed_vacuum_cov(squeezing_db: f64, squeezed: Quadrature) -> Result<CovarianceMatrix> {
    if !(squeezing_db.is_finite() && squeezing_db >= 0.0) {
        return Err(Error::InvalidParameter(format!("squeezing must be ≥ 0 dB, got {squeezing_db}")));
    }
    let small = 10f64.powf(-squeezing_db / 10.0);
    let large = 10f64.powf(squeezing_db / 10.0);
    let (vx, vp) = match squeezed {
        Quadrature::X => (small, large),
        Quadrature::P => (large, small),
    };
    Ok(CovarianceMatrix(RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![vx, vp]))))
}

/// `Γ → S Γ Sᵀ`.
pub fn apply_symplectic(g: &CovarianceMatrix, s: &SymplecticMatrix) -> Result<CovarianceMatrix> {
    if g.0.nrows() != s.matrix().nrows() {
        return Err(Error::Dimension(format!(
            "covariance is {}x{}, symplectic is {}x{}",
            g.0.nrows(),
            g.0.ncols(),
            s.matrix().nrows(),
            s.matrix().ncols()
        )));
    }
    Ok(CovarianceMatrix::symmetrized(s.matrix() * &g.0 * s.matrix().transpose()))
}

/// Pure-loss channel of strength `loss` on `mode` (0-based).
pub fn apply_loss(g: &CovarianceMatrix, mode: usize, loss: f64) -> Result<CovarianceMatrix> {
    if mode >= g.n_modes() {
        return Err(Error::Dimension(format!("mode {mode} out of range for {} modes", g.n_modes())));
    }
    check_fraction("loss", loss)?;
    let mut m = g.0.clone();
    loss_in_place(&mut m, mode, loss);
    Ok(CovarianceMatrix::symmetrized(m))
}

fn loss_in_place(m: &mut RMatrix, mode: usize, loss: f64) {
    let k = (1.0 - loss).sqrt();
    for q in [2 * mode, 2 * mode + 1] {
        m.row_mut(q).scale_mut(k);
        m.column_mut(q).scale_mut(k);
        m[(q, q)] += loss;
    }
}

/// Applies a 2k×2k local matrix to the listed modes: rows then columns.
fn local_congruence(m: &mut RMatrix, modes: &[usize], s: &RMatrix) {
    let idx: Vec<usize> = modes.iter().flat_map(|&q| [2 * q, 2 * q + 1]).collect();
    let dim = m.nrows();
    let rows = RMatrix::from_fn(idx.len(), dim, |i, j| m[(idx[i], j)]);
    let new_rows = s * rows;
    for (i, &r) in idx.iter().enumerate() {
        for j in 0..dim {
            m[(r, j)] = new_rows[(i, j)];
        }
    }
    let cols = RMatrix::from_fn(dim, idx.len(), |i, j| m[(i, idx[j])]);
    let new_cols = cols * s.transpose();
    for (j, &c) in idx.iter().enumerate() {
        for i in 0..dim {
            m[(i, c)] = new_cols[(i, j)];
        }
    }
}

fn rotation(theta: f64) -> RMatrix {
    let (s, c) = theta.sin_cos();
    RMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// Loss budget of the loop and its readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    /// Applied once per input pulse; lumps source, propagation and detection.
    pub source_detection_loss: f64,
    /// Per inner-loop round trip.
    pub inner_trip_loss: f64,
    /// Per outer-loop round trip.
    pub outer_trip_loss: f64,
    pub input_squeezing_db: f64,
    /// Whether parking a pulse into an empty inner loop costs a round trip.
    #[serde(default)]
    pub charge_injection_trip: bool,
}

impl Default for LossModel {
    fn default() -> Self {
        Self {
            source_detection_loss: 0.23,
            inner_trip_loss: 0.15,
            outer_trip_loss: 0.20,
            input_squeezing_db: 7.4,
            charge_injection_trip: false,
        }
    }
}

impl LossModel {
    pub fn lossless(input_squeezing_db: f64) -> Self {
        Self {
            source_detection_loss: 0.0,
            inner_trip_loss: 0.0,
            outer_trip_loss: 0.0,
            input_squeezing_db,
            charge_injection_trip: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_fraction("source_detection_loss", self.source_detection_loss)?;
        check_fraction("inner_trip_loss", self.inner_trip_loss)?;
        check_fraction("outer_trip_loss", self.outer_trip_loss)?;
        if !(self.input_squeezing_db.is_finite() && self.input_squeezing_db >= 0.0) {
            return Err(Error::InvalidParameter("input squeezing must be ≥ 0 dB".into()));
        }
        Ok(())
    }

    /// Identical squeezed inputs at the model's squeezing level.
    pub fn default_inputs(&self, n_modes: usize) -> Vec<SqueezedInput> {
        vec![SqueezedInput { squeezing_db: self.input_squeezing_db, quadrature: Quadrature::P }; n_modes]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedInput {
    pub squeezing_db: f64,
    pub quadrature: Quadrature,
}

/// Registers are mode indices into a covariance that grows with ancillas.
struct CovarianceMedium {
    cov: RMatrix,
    lm: LossModel,
    exported: Vec<Option<usize>>,
}

impl CovarianceMedium {
    fn grow(&mut self) -> usize {
        let d = self.cov.nrows();
        let mut bigger = RMatrix::identity(d + 2, d + 2);
        bigger.view_mut((0, 0), (d, d)).copy_from(&self.cov);
        self.cov = bigger;
        d / 2
    }
}

impl Medium for CovarianceMedium {
    type Reg = usize;

    fn input(&mut self, pulse: usize) -> usize {
        pulse
    }

    fn vacuum(&mut self) -> usize {
        self.grow()
    }

    fn phase(&mut self, reg: usize, theta: f64) {
        local_congruence(&mut self.cov, &[reg], &rotation(theta));
    }

    fn mix(&mut self, inner: usize, arriving: usize, m: &[[f64; 2]; 2]) {
        let s = RMatrix::from_fn(4, 4, |i, j| if i % 2 == j % 2 { m[i / 2][j / 2] } else { 0.0 });
        local_congruence(&mut self.cov, &[inner, arriving], &s);
    }

    fn inner_trip(&mut self, reg: usize, injection: bool) {
        if !injection || self.lm.charge_injection_trip {
            loss_in_place(&mut self.cov, reg, self.lm.inner_trip_loss);
        }
    }

    fn outer_trip(&mut self, reg: usize) {
        loss_in_place(&mut self.cov, reg, self.lm.outer_trip_loss);
    }

    fn export(&mut self, reg: usize, label: usize) {
        self.exported[label - 1] = Some(reg);
    }
}

/// Output covariance of `t` for the given inputs under loss model `lm`.
///
/// In measurement-basis mode the homodyne offsets are applied as final
/// rotations, so both final-phase modes describe the state in the target frame.
pub fn simulate(t: &ControlTimeline, inputs: &[SqueezedInput], lm: &LossModel) -> Result<CovarianceMatrix> {
    lm.validate()?;
    let n = t.n_modes;
    if inputs.len() != n {
        return Err(Error::Dimension(format!("timeline has {n} modes but {} inputs were given", inputs.len())));
    }
    let parts = inputs.iter().map(|i| squeezed_vacuum_cov(i.squeezing_db, i.quadrature)).collect::<Result<Vec<_>>>()?;
    let mut cov = CovarianceMatrix::direct_sum(&parts).0;
    for mode in 0..n {
        loss_in_place(&mut cov, mode, lm.source_detection_loss);
    }
    let mut medium = CovarianceMedium { cov, lm: *lm, exported: vec![None; n] };
    run(n, &t.bins, &mut medium)?;

    let order: Vec<usize> = medium
        .exported
        .iter()
        .map(|r| r.ok_or_else(|| Error::Routing("an output label is never exported".into())))
        .collect::<Result<_>>()?;
    let mut out = CovarianceMatrix::symmetrized(medium.cov).select_modes(&order)?.0;
    if t.final_phase_mode == FinalPhaseMode::MeasurementBasis {
        for (label, &offset) in t.homodyne_offsets.iter().enumerate() {
            local_congruence(&mut out, &[label], &rotation(-offset));
        }
    }
    let out = CovarianceMatrix::symmetrized(out);
    out.check_physical()?;
    Ok(out)
}

/// Lossless reference output: `S Γ_in Sᵀ` with S the lift of `u`.
pub fn ideal_output(u: &UnitaryMatrix, inputs: &[SqueezedInput]) -> Result<CovarianceMatrix> {
    let parts = inputs.iter().map(|i| squeezed_vacuum_cov(i.squeezing_db, i.quadrature)).collect::<Result<Vec<_>>>()?;
    let s = crate::linops::symplectic_from_unitary(u)?;
    apply_symplectic(&CovarianceMatrix::direct_sum(&parts), &s)
}
