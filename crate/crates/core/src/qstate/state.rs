use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec, EIG_CLAMP};
use crate::qstate::layout::SystemLayout;

/// Internal validation tolerance for states produced by library operations.
pub const STATE_TOL: f64 = 1e-9;

/// Corrections applied while validating a matrix into a state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Corrections {
    /// Largest |M - M†| entry removed by symmetrization.
    pub hermiticity: f64,
    /// Most negative eigenvalue clamped to zero (0 if none).
    pub clamped_min_eigenvalue: f64,
    /// |Tr M - 1| removed by renormalization.
    pub trace_shift: f64,
}

/// A Hermitian, positive semidefinite, unit-trace matrix bound to a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: SystemLayout,
    entries: CMat,
    corrections: Corrections,
}

/// Check a matrix against a layout and return it as a state.
///
/// The matrix is symmetrized, negative eigenvalues are clamped at zero and the
/// trace renormalized, but only when every violation is within `tol`.
pub fn validate_state(entries: CMat, layout: SystemLayout, tol: f64) -> Result<DensityMatrix> {
    let d = layout.total_dim();
    if entries.nrows() != d || entries.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, layout {} needs {}x{}",
            entries.nrows(),
            entries.ncols(),
            layout,
            d,
            d
        )));
    }
    if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalIntegrity("non-finite matrix entry".into()));
    }
    let herm = linalg::hermiticity_deviation(&entries);
    if herm > tol {
        return Err(Error::HermiticityViolation(herm));
    }
    let sym = linalg::hermitian_part(&entries);
    let tr = linalg::trace(&sym).re;
    if (tr - 1.0).abs() > tol {
        return Err(Error::TraceViolation(tr));
    }
    let (vals, vecs) = linalg::eigh(&sym);
    let min = vals.last().copied().unwrap_or(0.0);
    if min < -tol {
        return Err(Error::PositivityViolation(min));
    }
    let mut corrections = Corrections { hermiticity: herm, clamped_min_eigenvalue: 0.0, trace_shift: 0.0 };
    let mut m = sym;
    if min < 0.0 {
        corrections.clamped_min_eigenvalue = min;
        m = linalg::spectral_map(&vals, &vecs, |l| cr(l.max(0.0)));
    }
    let tr2 = linalg::trace(&m).re;
    corrections.trace_shift = (tr2 - 1.0).abs();
    m /= cr(tr2);
    Ok(DensityMatrix { layout, entries: m, corrections })
}

impl DensityMatrix {
    /// Wrap a matrix known to be a valid state up to rounding; it is
    /// symmetrized and trace-normalized but not spectrally checked.
    pub(crate) fn from_trusted(layout: SystemLayout, entries: CMat) -> Self {
        debug_assert_eq!(entries.nrows(), layout.total_dim());
        let mut m = linalg::hermitian_part(&entries);
        let tr = linalg::trace(&m).re;
        if tr > 0.0 {
            m /= cr(tr);
        }
        Self { layout, entries: m, corrections: Corrections::default() }
    }

    pub fn new(entries: CMat, layout: SystemLayout) -> Result<Self> {
        validate_state(entries, layout, STATE_TOL)
    }

    pub fn maximally_mixed(layout: SystemLayout) -> Self {
        let d = layout.total_dim();
        Self::from_trusted(layout, linalg::identity(d) * cr(1.0 / d as f64))
    }

    /// Computational-basis projector |index⟩⟨index|.
    pub fn basis(layout: SystemLayout, index: usize) -> Result<Self> {
        let d = layout.total_dim();
        if index >= d {
            return Err(Error::OutOfRange(format!("basis index {index} ≥ {d}")));
        }
        let mut m = linalg::zeros(d, d);
        m[(index, index)] = cr(1.0);
        Ok(Self::from_trusted(layout, m))
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn into_matrix(self) -> CMat {
        self.entries
    }

    pub fn corrections(&self) -> Corrections {
        self.corrections
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.entries)
    }

    /// Number of eigenvalues above the clamp.
    pub fn rank(&self) -> usize {
        self.eigenvalues().iter().filter(|&&l| l > EIG_CLAMP).count()
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        (self.purity() - 1.0).abs() <= tol
    }

    /// Same matrix, systems renamed in order.
    pub fn relabel<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        if names.len() != self.layout.len() {
            return Err(Error::InvalidLayout("relabel needs one name per system".into()));
        }
        let layout = SystemLayout::new(
            names.iter().zip(self.layout.dims()).map(|(n, d)| (n.as_ref().to_string(), d)),
        )?;
        Ok(Self { layout, entries: self.entries.clone(), corrections: self.corrections })
    }

    /// Convex combination Σ p_i ρ_i of states on one layout.
    pub fn mixture(components: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::Degenerate("empty mixture".into()))?;
        let layout = first.1.layout.clone();
        let total: f64 = components.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > 1e-9 || components.iter().any(|(p, _)| *p < 0.0) {
            return Err(Error::OutOfRange(format!("mixture weights sum to {total}")));
        }
        let d = layout.total_dim();
        let mut m = linalg::zeros(d, d);
        for (p, s) in components {
            if s.layout != layout {
                return Err(Error::DimensionMismatch("mixture components differ in layout".into()));
            }
            m += s.matrix() * cr(*p);
        }
        Ok(Self::from_trusted(layout, m))
    }
}

/// ρ_a ⊗ ρ_b on the concatenated layout.
pub fn tensor_product(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    let layout = a.layout.concat(&b.layout)?;
    Ok(DensityMatrix::from_trusted(layout, linalg::kron(&a.entries, &b.entries)))
}

/// Marginal on the systems in `keep`, in the order given.
pub fn reduce_to<S: AsRef<str>>(state: &DensityMatrix, keep: &[S]) -> Result<DensityMatrix> {
    let idx = state.layout.indices_of(keep)?;
    if idx.is_empty() {
        return Ok(DensityMatrix::from_trusted(SystemLayout::empty(), linalg::identity(1)));
    }
    let m = linalg::reduce_matrix(&state.entries, &state.layout.dims(), &idx);
    Ok(DensityMatrix::from_trusted(state.layout.select_indices(&idx), m))
}

/// Trace out the named systems; the remaining systems keep their order.
pub fn partial_trace<S: AsRef<str>>(state: &DensityMatrix, discard: &[S]) -> Result<DensityMatrix> {
    let drop = state.layout.indices_of(discard)?;
    let keep: Vec<usize> = (0..state.layout.len()).filter(|i| !drop.contains(i)).collect();
    if keep.is_empty() {
        return Err(Error::InvalidLayout("cannot discard every system".into()));
    }
    let m = linalg::reduce_matrix(&state.entries, &state.layout.dims(), &keep);
    Ok(DensityMatrix::from_trusted(state.layout.select_indices(&keep), m))
}

/// Re-index so the tensor basis follows `new_order`.
pub fn permute_systems<S: AsRef<str>>(state: &DensityMatrix, new_order: &[S]) -> Result<DensityMatrix> {
    if new_order.len() != state.layout.len() {
        return Err(Error::InvalidLayout("new order is not a permutation of the layout".into()));
    }
    let order = state.layout.indices_of(new_order)?;
    let m = linalg::permute_matrix(&state.entries, &state.layout.dims(), &order);
    Ok(DensityMatrix { layout: state.layout.select_indices(&order), entries: m, corrections: state.corrections })
}

/// Permute `state` into the system order of `layout` (same names and dims).
pub fn align_layout(state: &DensityMatrix, layout: &SystemLayout) -> Result<DensityMatrix> {
    if state.layout == *layout {
        return Ok(state.clone());
    }
    let out = permute_systems(state, &layout.names())?;
    if out.layout != *layout {
        return Err(Error::DimensionMismatch(format!("cannot align {} to {}", state.layout, layout)));
    }
    Ok(out)
}

/// A unit vector bound to a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    layout: SystemLayout,
    amplitudes: CVec,
}

impl PureState {
    pub fn new(amplitudes: CVec, layout: SystemLayout) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for layout {}",
                amplitudes.len(),
                layout
            )));
        }
        let n = amplitudes.norm();
        if (n - 1.0).abs() > STATE_TOL {
            return Err(Error::TraceViolation(n * n));
        }
        Ok(Self { layout, amplitudes })
    }

    /// Normalize an arbitrary nonzero vector.
    pub fn normalized(amplitudes: CVec, layout: SystemLayout) -> Result<Self> {
        let n = amplitudes.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::Degenerate("zero vector".into()));
        }
        Self::new(amplitudes / cr(n), layout)
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn to_density(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix::from_trusted(self.layout.clone(), m)
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(PureState { layout, amplitudes: self.amplitudes.kronecker(&other.amplitudes) })
    }

    pub fn overlap(&self, other: &PureState) -> num_complex::Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn permute<S: AsRef<str>>(&self, new_order: &[S]) -> Result<PureState> {
        if new_order.len() != self.layout.len() {
            return Err(Error::InvalidLayout("new order is not a permutation of the layout".into()));
        }
        let order = self.layout.indices_of(new_order)?;
        let v = linalg::permute_vector(&self.amplitudes, &self.layout.dims(), &order);
        Ok(PureState { layout: self.layout.select_indices(&order), amplitudes: v })
    }

    pub(crate) fn from_trusted(amplitudes: CVec, layout: SystemLayout) -> Self {
        Self { layout, amplitudes }
    }
}

/// Canonical eigendecomposition purification Σᵢ √λᵢ |eᵢ⟩|i⟩ with the
/// reference appended last.
///
/// Eigenvalues are sorted descending and each eigenvector is rotated so its
/// first nonzero amplitude is real positive, making the output a deterministic
/// function of the input.
pub fn purify(state: &DensityMatrix, ref_name: &str) -> Result<PureState> {
    if state.layout.contains(ref_name) {
        return Err(Error::NameCollision(ref_name.to_string()));
    }
    let (vals, vecs) = canonical_spectrum(state);
    let r = vals.len().max(1);
    let d = state.dim();
    let layout = state.layout.with(ref_name, r)?;
    let mut amp = CVec::zeros(d * r);
    for (i, &l) in vals.iter().enumerate() {
        let s = l.sqrt();
        for x in 0..d {
            amp[x * r + i] = vecs[(x, i)] * cr(s);
        }
    }
    let n = amp.norm();
    Ok(PureState::from_trusted(amp / cr(n), layout))
}

/// Support eigenpairs of a state (eigenvalues > clamp, descending) with the
/// phase convention used by [`purify`].
pub fn canonical_spectrum(state: &DensityMatrix) -> (Vec<f64>, CMat) {
    let (vals, vecs) = linalg::eigh(&state.entries);
    let rank = vals.iter().filter(|&&l| l > EIG_CLAMP).count().max(1);
    let d = state.dim();
    let mut out = CMat::zeros(d, rank);
    for k in 0..rank {
        let col = vecs.column(k);
        let pivot = col.iter().find(|z| z.norm() > 1e-10).copied().unwrap_or(cr(1.0));
        let phase = pivot.conj() / pivot.norm();
        for x in 0..d {
            out[(x, k)] = col[x] * phase;
        }
    }
    (vals[..rank].to_vec(), out)
}

/// Rotate `phi`'s reference by the unitary maximizing |⟨ψ|(1⊗U)|φ⟩|.
///
/// Both inputs must purify states on the same non-reference layout. A smaller
/// reference is zero-padded to the larger dimension; the output carries the
/// larger reference dimension.
pub fn align_purifications(psi: &PureState, phi: &PureState, ref_name: &str) -> Result<PureState> {
    let (psi_m, r_psi) = reference_matrix(psi, ref_name)?;
    let (phi_m, r_phi) = reference_matrix(phi, ref_name)?;
    let base_psi = without(psi.layout(), ref_name)?;
    let base_phi = without(phi.layout(), ref_name)?;
    if base_psi != base_phi {
        return Err(Error::DimensionMismatch(format!(
            "purified layouts differ: {base_psi} vs {base_phi}"
        )));
    }
    let r = r_psi.max(r_phi);
    let pad = |m: &CMat| -> CMat {
        let mut out = CMat::zeros(m.nrows(), r);
        out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
        out
    };
    let psi_m = pad(&psi_m);
    let phi_m = pad(&phi_m);
    // ⟨ψ|(1⊗U)|φ⟩ = Tr[Uᵀ Ψ†Φ]; with Ψ†Φ = P Σ Q†, the optimum is Uᵀ = Q P†.
    let y = psi_m.adjoint() * &phi_m;
    let svd = y.svd(true, true);
    let p = svd.u.expect("svd u");
    let q = svd.v_t.expect("svd v_t").adjoint();
    let ut = q * p.adjoint();
    let aligned = &phi_m * &ut;
    let layout = base_psi.with(ref_name, r)?;
    let d = base_psi.total_dim();
    let amp = CVec::from_fn(d * r, |i, _| aligned[(i / r, i % r)]);
    Ok(PureState::from_trusted(amp, layout))
}

/// Amplitude matrix (non-reference × reference) with the reference last.
fn reference_matrix(state: &PureState, ref_name: &str) -> Result<(CMat, usize)> {
    let idx = state.layout.index_of(ref_name)?;
    let mut order: Vec<&str> = state.layout.names().into_iter().filter(|n| *n != ref_name).collect();
    order.push(ref_name);
    let moved = if idx + 1 == state.layout.len() { state.clone() } else { state.permute(&order)? };
    let r = moved.layout.dim_of(ref_name)?;
    let d = moved.layout.total_dim() / r;
    Ok((CMat::from_fn(d, r, |x, k| moved.amplitudes[x * r + k]), r))
}

fn without(layout: &SystemLayout, name: &str) -> Result<SystemLayout> {
    let keep: Vec<&str> = layout.names().into_iter().filter(|n| *n != name).collect();
    layout.select(&keep)
}

fn check_same_layout(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.layout != b.layout {
        return Err(Error::DimensionMismatch(format!("layouts differ: {} vs {}", a.layout, b.layout)));
    }
    Ok(())
}

/// F(a,b) = ‖√a√b‖₁².
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_same_layout(a, b)?;
    Ok(fidelity_matrices(&a.entries, &b.entries))
}

pub(crate) fn fidelity_matrices(a: &CMat, b: &CMat) -> f64 {
    // zero round-off eigenvalues before the square root: √(1e-17) would
    // otherwise leak ~1e-8 into F
    let sqrt_psd = |m: &CMat| {
        let (vals, vecs) = linalg::eigh(m);
        linalg::spectral_map(&vals, &vecs, |l| cr(if l > 1e-14 { l.sqrt() } else { 0.0 }))
    };
    let prod = sqrt_psd(a) * sqrt_psd(b);
    let root: f64 = prod.singular_values().iter().sum();
    (root * root).clamp(0.0, 1.0)
}

/// ½‖a − b‖₁.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_same_layout(a, b)?;
    Ok((0.5 * linalg::trace_norm_hermitian(&(&a.entries - &b.entries))).clamp(0.0, 1.0))
}
