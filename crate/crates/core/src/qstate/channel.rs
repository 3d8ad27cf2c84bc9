use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, EIG_CLAMP};
use crate::qstate::layout::SystemLayout;
use crate::qstate::state::DensityMatrix;

/// Isometry tolerance for channel construction.
pub const ISOMETRY_TOL: f64 = 1e-9;

/// A CPTP map in Stinespring form: X ↦ Tr_env[V X V†].
///
/// Row index of `V` is `out * env_dim + g`, so the Kraus operators are the
/// row-blocks `K_g[o, i] = V[o * env_dim + g, i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannel {
    in_layout: SystemLayout,
    out_layout: SystemLayout,
    isometry: CMat,
    env_dim: usize,
}

impl QuantumChannel {
    pub fn new(in_layout: SystemLayout, out_layout: SystemLayout, isometry: CMat, env_dim: usize) -> Result<Self> {
        let (din, dout) = (in_layout.total_dim(), out_layout.total_dim());
        if env_dim == 0 || isometry.nrows() != dout * env_dim || isometry.ncols() != din {
            return Err(Error::DimensionMismatch(format!(
                "isometry is {}x{}, expected {}x{}",
                isometry.nrows(),
                isometry.ncols(),
                dout * env_dim,
                din
            )));
        }
        let dev = linalg::isometry_deviation(&isometry);
        if dev > ISOMETRY_TOL {
            return Err(Error::NotIsometry(dev));
        }
        Ok(Self { in_layout, out_layout, isometry, env_dim })
    }

    /// Build from Kraus operators (each `dout × din`), checking Σ K†K = 1.
    pub fn from_kraus(in_layout: SystemLayout, out_layout: SystemLayout, kraus: &[CMat]) -> Result<Self> {
        let v = stack_kraus(in_layout.total_dim(), out_layout.total_dim(), kraus)?;
        Self::new(in_layout, out_layout, v, kraus.len())
    }

    /// Like [`from_kraus`](Self::from_kraus) but with the looser tolerance used
    /// for maps built from numerically inverted operators.
    pub(crate) fn from_kraus_tol(
        in_layout: SystemLayout,
        out_layout: SystemLayout,
        kraus: &[CMat],
        tol: f64,
    ) -> Result<Self> {
        let v = stack_kraus(in_layout.total_dim(), out_layout.total_dim(), kraus)?;
        let dev = linalg::isometry_deviation(&v);
        if dev > tol {
            return Err(Error::NotIsometry(dev));
        }
        Ok(Self { in_layout, out_layout, isometry: v, env_dim: kraus.len() })
    }

    pub(crate) fn from_isometry_unchecked(
        in_layout: SystemLayout,
        out_layout: SystemLayout,
        isometry: CMat,
        env_dim: usize,
    ) -> Self {
        Self { in_layout, out_layout, isometry, env_dim }
    }

    pub fn identity(layout: SystemLayout) -> Self {
        let d = layout.total_dim();
        Self { in_layout: layout.clone(), out_layout: layout, isometry: linalg::identity(d), env_dim: 1 }
    }

    pub fn unitary(layout: SystemLayout, u: CMat) -> Result<Self> {
        Self::new(layout.clone(), layout, u, 1)
    }

    /// ρ ↦ (1−p)ρ + p·Tr(ρ)·1/d.
    pub fn depolarizing(layout: SystemLayout, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange(format!("depolarizing strength {p}")));
        }
        let d = layout.total_dim();
        let mut kraus = vec![linalg::identity(d) * cr((1.0 - p).sqrt())];
        let w = (p / d as f64).sqrt();
        for a in 0..d {
            for b in 0..d {
                let mut k = linalg::zeros(d, d);
                k[(a, b)] = cr(w);
                kraus.push(k);
            }
        }
        Self::from_kraus(layout.clone(), layout, &kraus)
    }

    /// Complete dephasing in the computational basis.
    pub fn dephasing(layout: SystemLayout) -> Self {
        let d = layout.total_dim();
        let kraus: Vec<CMat> = (0..d)
            .map(|a| {
                let mut k = linalg::zeros(d, d);
                k[(a, a)] = cr(1.0);
                k
            })
            .collect();
        Self::from_kraus(layout.clone(), layout, &kraus).expect("dephasing is CPTP")
    }

    /// X ↦ Tr(X)·τ.
    pub fn discard_and_prepare(in_layout: SystemLayout, tau: &DensityMatrix) -> Result<Self> {
        let din = in_layout.total_dim();
        let dout = tau.dim();
        let (vals, vecs) = linalg::eigh(tau.matrix());
        let mut kraus = Vec::new();
        for (k, &t) in vals.iter().enumerate() {
            if t <= EIG_CLAMP {
                continue;
            }
            for j in 0..din {
                let mut m = linalg::zeros(dout, din);
                for o in 0..dout {
                    m[(o, j)] = vecs[(o, k)] * cr(t.sqrt());
                }
                kraus.push(m);
            }
        }
        let v = stack_kraus(din, dout, &kraus)?;
        let v = linalg::polar_isometry(&v);
        Self::new(in_layout, tau.layout().clone(), v, kraus.len())
    }

    /// Trace out the input entirely (output is the empty layout).
    pub fn trace_out(in_layout: SystemLayout) -> Self {
        let d = in_layout.total_dim();
        Self { in_layout, out_layout: SystemLayout::empty(), isometry: linalg::identity(d), env_dim: d }
    }

    pub fn in_layout(&self) -> &SystemLayout {
        &self.in_layout
    }

    pub fn out_layout(&self) -> &SystemLayout {
        &self.out_layout
    }

    pub fn isometry(&self) -> &CMat {
        &self.isometry
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    pub fn kraus(&self) -> Vec<CMat> {
        let (din, dout) = (self.in_layout.total_dim(), self.out_layout.total_dim());
        (0..self.env_dim)
            .map(|g| CMat::from_fn(dout, din, |o, i| self.isometry[(o * self.env_dim + g, i)]))
            .collect()
    }

    /// Same map with the layouts renamed (dimensions must agree).
    pub fn with_layouts(&self, in_layout: SystemLayout, out_layout: SystemLayout) -> Result<Self> {
        if in_layout.total_dim() != self.in_layout.total_dim() || out_layout.total_dim() != self.out_layout.total_dim() {
            return Err(Error::DimensionMismatch("relabeled channel changes dimensions".into()));
        }
        Ok(Self { in_layout, out_layout, isometry: self.isometry.clone(), env_dim: self.env_dim })
    }

    /// Apply to a bare matrix on the input space.
    pub fn apply_matrix(&self, x: &CMat) -> CMat {
        let dout = self.out_layout.total_dim();
        let mut out = linalg::zeros(dout, dout);
        for k in self.kraus() {
            out += &k * x * k.adjoint();
        }
        out
    }

    /// Choi operator Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|) (input first).
    pub fn choi(&self) -> CMat {
        let (din, dout) = (self.in_layout.total_dim(), self.out_layout.total_dim());
        let mut j = linalg::zeros(din * dout, din * dout);
        for k in self.kraus() {
            // vec(K) with input index most significant
            let v = crate::linalg::CVec::from_fn(din * dout, |r, _| k[(r % dout, r / dout)]);
            j += &v * v.adjoint();
        }
        j
    }

    /// Worst violation of complete positivity (negative Choi eigenvalue) and of
    /// trace preservation (max entry of Tr_out J − 1).
    pub fn cptp_deviation(&self) -> (f64, f64) {
        let (din, dout) = (self.in_layout.total_dim(), self.out_layout.total_dim());
        let j = self.choi();
        let min = linalg::eigvalsh(&j).last().copied().unwrap_or(0.0);
        let tr_out = linalg::reduce_matrix(&j, &[din, dout], &[0]);
        let tp = linalg::max_abs(&(tr_out - linalg::identity(din)));
        ((-min).max(0.0), tp)
    }

    pub fn is_cptp(&self, tol: f64) -> bool {
        let (cp, tp) = self.cptp_deviation();
        cp <= tol && tp <= tol
    }

    /// Sequential composition: `self` then `next`.
    pub fn then(&self, next: &QuantumChannel) -> Result<Self> {
        if self.out_layout.total_dim() != next.in_layout.total_dim() {
            return Err(Error::DimensionMismatch("composed channels do not chain".into()));
        }
        let mut kraus = Vec::new();
        for b in next.kraus() {
            for a in self.kraus() {
                kraus.push(&b * &a);
            }
        }
        let v = stack_kraus(self.in_layout.total_dim(), next.out_layout.total_dim(), &kraus)?;
        Self::new(self.in_layout.clone(), next.out_layout.clone(), linalg::polar_isometry(&v), kraus.len())
    }

    /// Parallel composition on the concatenated layouts.
    pub fn tensor(&self, other: &QuantumChannel) -> Result<Self> {
        let in_layout = self.in_layout.concat(&other.in_layout)?;
        let out_layout = self.out_layout.concat(&other.out_layout)?;
        let mut kraus = Vec::new();
        for a in self.kraus() {
            for b in other.kraus() {
                kraus.push(linalg::kron(&a, &b));
            }
        }
        let v = stack_kraus(in_layout.total_dim(), out_layout.total_dim(), &kraus)?;
        Self::new(in_layout, out_layout, v, kraus.len())
    }
}

fn stack_kraus(din: usize, dout: usize, kraus: &[CMat]) -> Result<CMat> {
    if kraus.is_empty() {
        return Err(Error::Degenerate("no Kraus operators".into()));
    }
    let env = kraus.len();
    let mut v = linalg::zeros(dout * env, din);
    for (g, k) in kraus.iter().enumerate() {
        if k.nrows() != dout || k.ncols() != din {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator is {}x{}, expected {}x{}",
                k.nrows(),
                k.ncols(),
                dout,
                din
            )));
        }
        for o in 0..dout {
            for i in 0..din {
                v[(o * env + g, i)] = k[(o, i)];
            }
        }
    }
    Ok(v)
}

/// Apply `channel` to the `target` systems of `state`, identity elsewhere.
///
/// The output systems take the place of the first target system; all other
/// systems keep their relative order.
pub fn apply_channel<S: AsRef<str>>(state: &DensityMatrix, channel: &QuantumChannel, target: &[S]) -> Result<DensityMatrix> {
    let layout = state.layout();
    let tidx = layout.indices_of(target)?;
    let tl = layout.select_indices(&tidx);
    if tl.dims() != channel.in_layout.dims() {
        return Err(Error::DimensionMismatch(format!(
            "channel input {} does not match target {}",
            channel.in_layout, tl
        )));
    }
    let rest: Vec<usize> = (0..layout.len()).filter(|i| !tidx.contains(i)).collect();
    let mut order = rest.clone();
    order.extend_from_slice(&tidx);
    let m = linalg::permute_matrix(state.matrix(), &layout.dims(), &order);
    let dr = layout.select_indices(&rest).total_dim();
    let id = linalg::identity(dr);
    let mut out = linalg::zeros(dr * channel.out_layout.total_dim(), dr * channel.out_layout.total_dim());
    for k in channel.kraus() {
        let kk = linalg::kron(&id, &k);
        out += &kk * &m * kk.adjoint();
    }
    let rest_layout = layout.select_indices(&rest);
    let joined = rest_layout.concat(&channel.out_layout)?;
    let out_state = DensityMatrix::from_trusted(joined, out);
    let first = *tidx.iter().min().expect("nonempty target");
    let pos = rest.iter().filter(|&&r| r < first).count();
    let rest_names = rest_layout.names();
    let mut final_order: Vec<&str> = rest_names[..pos].to_vec();
    final_order.extend(channel.out_layout.names());
    final_order.extend_from_slice(&rest_names[pos..]);
    crate::qstate::state::permute_systems(&out_state, &final_order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::state::{partial_trace, tensor_product, PureState};
    use crate::linalg::CVec;

    fn q(name: &str) -> SystemLayout {
        SystemLayout::single(name, 2).unwrap()
    }

    fn phi_plus() -> DensityMatrix {
        let amp = CVec::from_vec(vec![cr(1.0), cr(0.0), cr(0.0), cr(1.0)]) / cr(2f64.sqrt());
        PureState::new(amp, q("A").concat(&q("C")).unwrap()).unwrap().to_density()
    }

    #[test]
    fn identity_channel_is_noop() {
        let rho = phi_plus();
        let out = apply_channel(&rho, &QuantumChannel::identity(q("A")), &["A"]).unwrap();
        assert!(linalg::max_abs(&(out.matrix() - rho.matrix())) < 1e-14);
    }

    #[test]
    fn full_depolarizing_on_a_of_bell() {
        let ch = QuantumChannel::depolarizing(q("A"), 1.0).unwrap();
        let out = apply_channel(&phi_plus(), &ch, &["A"]).unwrap();
        assert!(linalg::max_abs(&(out.matrix() - linalg::identity(4) * cr(0.25))) < 1e-14);
        assert!(ch.is_cptp(1e-12));
    }

    #[test]
    fn discard_and_prepare_on_middle_system() {
        let l = SystemLayout::new([("A", 2), ("B", 2), ("C", 2)]).unwrap();
        let rho = crate::qstate::random::random_density(&l, 8, crate::qstate::random::RngSeed(3)).unwrap();
        let zero = DensityMatrix::basis(q("B"), 0).unwrap();
        let ch = QuantumChannel::discard_and_prepare(q("B"), &zero).unwrap();
        let out = apply_channel(&rho, &ch, &["B"]).unwrap();
        assert_eq!(out.layout().names(), vec!["A", "B", "C"]);
        let ac = partial_trace(&rho, &["B"]).unwrap();
        let expect = crate::qstate::state::permute_systems(&tensor_product(&ac, &zero).unwrap(), &["A", "B", "C"]).unwrap();
        assert!(linalg::max_abs(&(out.matrix() - expect.matrix())) < 1e-12);
    }

    #[test]
    fn trace_out_removes_target() {
        let out = apply_channel(&phi_plus(), &QuantumChannel::trace_out(q("C")), &["C"]).unwrap();
        assert_eq!(out.layout().names(), vec!["A"]);
    }

    #[test]
    fn non_tp_kraus_rejected() {
        let k = linalg::identity(2) * cr(0.5);
        assert!(QuantumChannel::from_kraus(q("A"), q("A"), &[k]).is_err());
    }

    #[test]
    fn composition_and_tensor_are_cptp() {
        let a = QuantumChannel::depolarizing(q("A"), 0.3).unwrap();
        let b = QuantumChannel::dephasing(q("A"));
        assert!(a.then(&b).unwrap().is_cptp(1e-10));
        let c = QuantumChannel::dephasing(q("C"));
        assert!(a.tensor(&c).unwrap().is_cptp(1e-10));
    }
}
