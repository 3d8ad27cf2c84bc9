//! Example state families with their known values attached.

use crate::entropic::{self, Bits};
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec};
use crate::parties::Parties;
use crate::qstate::{permute_systems, tensor_product, DensityMatrix, PureState, SystemLayout};
use crate::squash::{candidate_from_extension, trivial_extension, ExtensionCandidate, Provenance};

/// Analytically known values of a generated state.
#[derive(Debug, Clone, Default)]
pub struct Known {
    pub qcmi: Option<Bits>,
    pub sqnm: Option<Bits>,
    pub optimal_extension: Option<ExtensionCandidate>,
    /// I(A;C|BX) of the flagged state, for flag mixtures.
    pub flagged_qcmi: Option<Bits>,
    pub source: String,
}

#[derive(Debug, Clone)]
pub struct CertifiedState {
    pub state: DensityMatrix,
    pub known: Known,
    /// ρ_ABCX with the classical flag X, for flag mixtures.
    pub flagged: Option<DensityMatrix>,
}

impl CertifiedState {
    fn new(state: DensityMatrix, known: Known) -> Self {
        Self { state, known, flagged: None }
    }

    /// Largest discrepancy between the stored values and their recomputation.
    pub fn verify(&self) -> Result<f64> {
        let p = Parties::default();
        let mut worst: f64 = 0.0;
        let tripartite = self.state.layout().contains("B");
        if let Some(q) = self.known.qcmi {
            let v = if tripartite {
                entropic::qcmi(&self.state, &p.a, &p.c, &p.b)?
            } else {
                entropic::mutual_information(&self.state, &["A"], &["C"])?
            };
            worst = worst.max((v - q).abs());
        }
        if let (Some(s), Some(ext)) = (self.known.sqnm, &self.known.optimal_extension) {
            let parties = if tripartite { p.clone() } else { Parties::bipartite() };
            worst = worst.max((ext.objective(&parties)? - s).abs());
        }
        if let (Some(fq), Some(f)) = (self.known.flagged_qcmi, &self.flagged) {
            let v = entropic::qcmi(f, &["A"], &["C"], &["B", "X"])?;
            worst = worst.max((v - fq).abs());
        }
        Ok(worst)
    }
}

fn ac_layout(da: usize, dc: usize) -> SystemLayout {
    SystemLayout::new([("A", da), ("C", dc)]).expect("valid layout")
}

fn pure_from(amps: &[f64], layout: SystemLayout) -> DensityMatrix {
    let v = CVec::from_iterator(amps.len(), amps.iter().map(|&a| cr(a)));
    PureState::normalized(v, layout).expect("nonzero").to_density()
}

/// The four Bell states on A, C: φ⁺, φ⁻, ψ⁺, ψ⁻.
pub fn bell(index: usize) -> Result<CertifiedState> {
    let amps: [f64; 4] = match index {
        0 => [1.0, 0.0, 0.0, 1.0],
        1 => [1.0, 0.0, 0.0, -1.0],
        2 => [0.0, 1.0, 1.0, 0.0],
        3 => [0.0, 1.0, -1.0, 0.0],
        _ => return Err(Error::OutOfRange(format!("Bell index {index}"))),
    };
    let s = pure_from(&amps, ac_layout(2, 2));
    let ext = trivial_extension(&s, &Parties::bipartite())?;
    Ok(CertifiedState::new(
        s,
        Known { qcmi: Some(2.0), sqnm: Some(1.0), optimal_extension: Some(ext), source: "bell".into(), ..Default::default() },
    ))
}

/// (1/√d) Σₙ |nn⟩ on A, C.
pub fn maximally_entangled(d: usize) -> Result<CertifiedState> {
    if d < 2 {
        return Err(Error::OutOfRange(format!("d = {d}")));
    }
    let mut amps = vec![0.0; d * d];
    for n in 0..d {
        amps[n * d + n] = 1.0;
    }
    let s = pure_from(&amps, ac_layout(d, d));
    let ext = trivial_extension(&s, &Parties::bipartite())?;
    let l = (d as f64).log2();
    Ok(CertifiedState::new(
        s,
        Known { qcmi: Some(2.0 * l), sqnm: Some(l), optimal_extension: Some(ext), source: "max_ent".into(), ..Default::default() },
    ))
}

/// Insert a condition system B between A and C: ρ_AC ⊗ ρ_B in A, B, C order.
pub fn with_condition(cs: &CertifiedState, rho_b: &DensityMatrix) -> Result<CertifiedState> {
    let b = rho_b.relabel(&["B"])?;
    let mut names: Vec<String> = Vec::new();
    for n in cs.state.layout().names() {
        names.push(n.to_string());
        if n == "A" {
            names.push("B".into());
        }
    }
    let s = permute_systems(&tensor_product(&cs.state, &b)?, &names)?;
    let ext = match &cs.known.optimal_extension {
        Some(_) => Some(trivial_extension(&s, &Parties::default())?),
        None => None,
    };
    let known = Known {
        qcmi: cs.known.qcmi,
        sqnm: cs.known.sqnm,
        optimal_extension: ext,
        source: format!("{} with condition", cs.known.source),
        ..Default::default()
    };
    Ok(CertifiedState::new(s, known))
}

/// (|000⟩ + |111⟩)/√2 on A, B, C.
pub fn ghz() -> CertifiedState {
    let l = SystemLayout::new([("A", 2), ("B", 2), ("C", 2)]).expect("valid layout");
    let mut amps = [0.0; 8];
    amps[0] = 1.0;
    amps[7] = 1.0;
    let s = pure_from(&amps, l);
    let ext = trivial_extension(&s, &Parties::default()).expect("valid state");
    CertifiedState::new(
        s,
        Known { qcmi: Some(1.0), sqnm: Some(0.5), optimal_extension: Some(ext), source: "ghz".into(), ..Default::default() },
    )
}

/// One sector of a Markov state: p, a state on A ⊗ B^L, a state on B^R ⊗ C.
#[derive(Debug, Clone)]
pub struct MarkovBlock {
    pub p: f64,
    pub left: DensityMatrix,
    pub right: DensityMatrix,
}

/// Σᵢ pᵢ ρ_{A Bᴸᵢ} ⊗ σ_{Bᴿᵢ C}, with the blocks in orthogonal sectors of B
/// ordered as given.
pub fn markov_state(blocks: &[MarkovBlock]) -> Result<CertifiedState> {
    let first = blocks.first().ok_or_else(|| Error::Degenerate("no Markov blocks".into()))?;
    let total: f64 = blocks.iter().map(|b| b.p).sum();
    if (total - 1.0).abs() > 1e-9 || blocks.iter().any(|b| b.p < 0.0) {
        return Err(Error::OutOfRange(format!("block probabilities sum to {total}")));
    }
    let dim2 = |m: &DensityMatrix| -> Result<(usize, usize)> {
        let d = m.layout().dims();
        if d.len() != 2 {
            return Err(Error::InvalidLayout("Markov block factors must be bipartite".into()));
        }
        Ok((d[0], d[1]))
    };
    let (da, _) = dim2(&first.left)?;
    let (_, dc) = dim2(&first.right)?;
    let mut db = 0;
    for b in blocks {
        let (a, l) = dim2(&b.left)?;
        let (r, c) = dim2(&b.right)?;
        if a != da || c != dc {
            return Err(Error::DimensionMismatch("Markov blocks disagree on A or C".into()));
        }
        db += l * r;
    }
    let n = da * db * dc;
    let mut m = linalg::zeros(n, n);
    let mut offset = 0;
    for b in blocks {
        let (_, dl) = dim2(&b.left)?;
        let (dr, _) = dim2(&b.right)?;
        let t = linalg::kron(b.left.matrix(), b.right.matrix()); // (a, l, r, c)
        let index = |f: usize| {
            let c = f % dc;
            let r = (f / dc) % dr;
            let l = (f / (dc * dr)) % dl;
            let a = f / (dc * dr * dl);
            (a * db + offset + l * dr + r) * dc + c
        };
        let sz = da * dl * dr * dc;
        for i in 0..sz {
            for j in 0..sz {
                m[(index(i), index(j))] += t[(i, j)] * cr(b.p);
            }
        }
        offset += dl * dr;
    }
    let layout = SystemLayout::new([("A", da), ("B", db), ("C", dc)])?;
    let s = DensityMatrix::new(m, layout)?;
    let ext = trivial_extension(&s, &Parties::default())?;
    Ok(CertifiedState::new(
        s,
        Known { qcmi: Some(0.0), sqnm: Some(0.0), optimal_extension: Some(ext), source: "markov".into(), ..Default::default() },
    ))
}

/// Σₓ pₓ ρˣ together with the flagged state Σₓ pₓ ρˣ ⊗ |x⟩⟨x|_X.
pub fn classical_flag_mixture(components: &[(f64, DensityMatrix)]) -> Result<CertifiedState> {
    if components.is_empty() {
        return Err(Error::Degenerate("empty mixture".into()));
    }
    let refs: Vec<(f64, &DensityMatrix)> = components.iter().map(|(p, s)| (*p, s)).collect();
    let mix = DensityMatrix::mixture(&refs)?;
    let nx = components.len();
    let d = mix.dim();
    let mut f = linalg::zeros(d * nx, d * nx);
    let p = Parties::default();
    let mut flagged_qcmi = 0.0;
    for (x, (px, s)) in components.iter().enumerate() {
        let mut flag = linalg::zeros(nx, nx);
        flag[(x, x)] = cr(*px);
        f += linalg::kron(s.matrix(), &flag);
        flagged_qcmi += px * entropic::qcmi(s, &p.a, &p.c, &p.b)?;
    }
    let flagged = DensityMatrix::new(f, mix.layout().with("X", nx)?)?;
    let qcmi = entropic::qcmi(&mix, &p.a, &p.c, &p.b)?;
    Ok(CertifiedState {
        state: mix,
        known: Known { qcmi: Some(qcmi), flagged_qcmi: Some(flagged_qcmi), source: "flag_mixture".into(), ..Default::default() },
        flagged: Some(flagged),
    })
}

/// ¼ Σᵢ |i⟩⟨i|_B ⊗ Bellᵢ_AC with its pure extension ½ Σᵢ |ii⟩_BE |φᵢ⟩_AC.
pub fn observation1_family() -> Result<CertifiedState> {
    let bells: Vec<DensityMatrix> = (0..4).map(|i| bell(i).map(|b| b.state)).collect::<Result<_>>()?;
    let layout = SystemLayout::new([("A", 2), ("B", 4), ("C", 2)])?;
    let mut m = linalg::zeros(16, 16);
    // index (a, b, c) = a*8 + b*2 + c; Bell index (a, c) = a*2 + c
    for (i, bl) in bells.iter().enumerate() {
        for (ac1, ac2) in (0..4).flat_map(|x| (0..4).map(move |y| (x, y))) {
            let (a1, c1, a2, c2) = (ac1 / 2, ac1 % 2, ac2 / 2, ac2 % 2);
            m[(a1 * 8 + i * 2 + c1, a2 * 8 + i * 2 + c2)] += bl.matrix()[(ac1, ac2)] * cr(0.25);
        }
    }
    let sigma = DensityMatrix::new(m, layout)?;
    let ext_layout = SystemLayout::new([("A", 2), ("B", 4), ("C", 2), ("E", 4)])?;
    let mut v = CVec::zeros(64);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bell_amps: [[f64; 4]; 4] = [[h, 0.0, 0.0, h], [h, 0.0, 0.0, -h], [0.0, h, h, 0.0], [0.0, h, -h, 0.0]];
    for (i, amps) in bell_amps.iter().enumerate() {
        for (ac, &amp) in amps.iter().enumerate() {
            let (a, c) = (ac / 2, ac % 2);
            v[((a * 4 + i) * 2 + c) * 4 + i] += cr(0.5 * amp);
        }
    }
    let psi = PureState::new(v, ext_layout)?.to_density();
    let cand = candidate_from_extension(&sigma, &Parties::default(), &psi, Provenance::User)?;
    let qcmi = entropic::qcmi(&sigma, &["A"], &["C"], &["B"])?;
    Ok(CertifiedState::new(
        sigma,
        Known { qcmi: Some(qcmi), sqnm: Some(0.0), optimal_extension: Some(cand), source: "observation1".into(), ..Default::default() },
    ))
}

/// Optional local isometries on the grouped parties A = A₁A₂, B = B₁B₂, C = C₁C₂.
#[derive(Debug, Clone, Default)]
pub struct TriangleIsometries {
    pub a: Option<CMat>,
    pub b: Option<CMat>,
    pub c: Option<CMat>,
}

/// (V₁⊗V₂⊗V₃)|α⟩_{A₁C₁}|β⟩_{A₂B₁}|γ⟩_{C₂B₂}; sQNM equals S(A₁)_α.
pub fn triangle_state(
    alpha: &PureState,
    beta: &PureState,
    gamma: &PureState,
    iso: &TriangleIsometries,
) -> Result<CertifiedState> {
    let two = |p: &PureState| -> Result<(usize, usize)> {
        let d = p.layout().dims();
        if d.len() != 2 {
            return Err(Error::InvalidLayout("triangle factors must be bipartite".into()));
        }
        Ok((d[0], d[1]))
    };
    let (a1, c1) = two(alpha)?;
    let (a2, b1) = two(beta)?;
    let (c2, b2) = two(gamma)?;
    let la = SystemLayout::new([("A1", a1), ("C1", c1)])?;
    let lb = SystemLayout::new([("A2", a2), ("B1", b1)])?;
    let lc = SystemLayout::new([("C2", c2), ("B2", b2)])?;
    let al = PureState::new(alpha.amplitudes().clone(), la)?;
    let be = PureState::new(beta.amplitudes().clone(), lb)?;
    let ga = PureState::new(gamma.amplitudes().clone(), lc)?;
    let joint = al.tensor(&be)?.tensor(&ga)?.permute(&["A1", "A2", "B1", "B2", "C1", "C2"])?;
    let grouped = SystemLayout::new([("A", a1 * a2), ("B", b1 * b2), ("C", c1 * c2)])?;
    let mut amps = joint.amplitudes().clone();
    let mut dims = [a1 * a2, b1 * b2, c1 * c2];
    for (slot, v) in [&iso.a, &iso.b, &iso.c].into_iter().enumerate() {
        if let Some(v) = v {
            if v.ncols() != dims[slot] || linalg::isometry_deviation(v) > 1e-9 {
                return Err(Error::DimensionMismatch(format!("triangle isometry {slot} does not fit")));
            }
            let mut ops = [linalg::identity(dims[0]), linalg::identity(dims[1]), linalg::identity(dims[2])];
            ops[slot] = v.clone();
            let full = linalg::kron(&linalg::kron(&ops[0], &ops[1]), &ops[2]);
            amps = &full * amps;
            dims[slot] = v.nrows();
        }
    }
    let layout = SystemLayout::new([("A", dims[0]), ("B", dims[1]), ("C", dims[2])])?;
    let _ = grouped;
    let s = PureState::normalized(amps, layout)?.to_density();
    let sa1 = entropic::entropy(&al.to_density(), &["A1"])?;
    let parties = Parties::default();
    let ext = trivial_extension(&s, &parties)?;
    Ok(CertifiedState::new(
        s,
        Known { sqnm: Some(sa1), optimal_extension: Some(ext), source: "triangle".into(), ..Default::default() },
    ))
}

/// p·φ⁺ + (1−p)·1/d² on A, C.
pub fn isotropic(d: usize, p: f64) -> Result<CertifiedState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("p = {p}")));
    }
    let phi = maximally_entangled(d.max(2))?.state;
    if d < 2 {
        return Err(Error::OutOfRange(format!("d = {d}")));
    }
    let mix = DensityMatrix::maximally_mixed(ac_layout(d, d));
    let s = DensityMatrix::mixture(&[(p, &phi), (1.0 - p, &mix)])?;
    Ok(CertifiedState::new(s, Known { source: "isotropic".into(), ..Default::default() }))
}

/// Bipartite pure state Σ √λᵢ |ii⟩ with the given Schmidt coefficients squared.
pub fn schmidt_state(names: (&str, &str), probs: &[f64]) -> Result<PureState> {
    let d = probs.len();
    if d == 0 {
        return Err(Error::Degenerate("no Schmidt coefficients".into()));
    }
    let mut v = CVec::zeros(d * d);
    for (i, &p) in probs.iter().enumerate() {
        if p < 0.0 {
            return Err(Error::OutOfRange(format!("negative Schmidt weight {p}")));
        }
        v[i * d + i] = cr(p.sqrt());
    }
    PureState::normalized(v, SystemLayout::new([(names.0, d), (names.1, d)])?)
}

/// |0⟩|0⟩ on two named systems of the given dimensions.
pub fn product_pure(names: (&str, &str), dims: (usize, usize)) -> Result<PureState> {
    let mut v = CVec::zeros(dims.0 * dims.1);
    v[0] = cr(1.0);
    PureState::new(v, SystemLayout::new([(names.0, dims.0), (names.1, dims.1)])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{fidelity, random_density, RngSeed};

    #[test]
    fn bell_states_are_orthogonal_and_certified() {
        let b: Vec<CertifiedState> = (0..4).map(|i| bell(i).unwrap()).collect();
        for i in 0..4 {
            assert!(b[i].verify().unwrap() < 1e-9);
            assert!((entropic::entropy(&b[i].state, &["A"]).unwrap() - 1.0).abs() < 1e-12);
            for j in 0..i {
                assert!(fidelity(&b[i].state, &b[j].state).unwrap() < 1e-12);
            }
        }
        assert!(bell(4).is_err());
    }

    #[test]
    fn max_ent_marginals() {
        let m = maximally_entangled(2).unwrap();
        let a = crate::qstate::reduce_to(&m.state, &["A"]).unwrap();
        assert!(linalg::max_abs(&(a.matrix() - linalg::identity(2) * cr(0.5))) < 1e-12);
        assert!(maximally_entangled(3).unwrap().verify().unwrap() < 1e-9);
    }

    #[test]
    fn ghz_certified() {
        let g = ghz();
        assert!(g.verify().unwrap() < 1e-9);
        // separable A|C marginal yet positive sQNM
        let ac = crate::qstate::reduce_to(&g.state, &["A", "C"]).unwrap();
        assert!(entropic::coherent_information(&ac, &["A"], &["C"]).unwrap() <= 1e-12);
    }

    #[test]
    fn markov_blocks_have_zero_qcmi() {
        let a_bl = random_density(&SystemLayout::new([("A", 2), ("L", 2)]).unwrap(), 2, RngSeed(1)).unwrap();
        let br_c = random_density(&SystemLayout::new([("R", 1), ("C", 2)]).unwrap(), 2, RngSeed(2)).unwrap();
        let a2 = random_density(&SystemLayout::new([("A", 2), ("L", 1)]).unwrap(), 2, RngSeed(3)).unwrap();
        let c2 = random_density(&SystemLayout::new([("R", 2), ("C", 2)]).unwrap(), 4, RngSeed(4)).unwrap();
        let m = markov_state(&[
            MarkovBlock { p: 0.4, left: a_bl, right: br_c },
            MarkovBlock { p: 0.6, left: a2, right: c2 },
        ])
        .unwrap();
        assert_eq!(m.state.layout().dim_of("B").unwrap(), 4);
        assert!(m.verify().unwrap() < 1e-9);
    }

    #[test]
    fn flag_mixture_of_product_kets() {
        let l = SystemLayout::new([("A", 2), ("B", 2), ("C", 2)]).unwrap();
        let k000 = DensityMatrix::basis(l.clone(), 0).unwrap();
        let k101 = DensityMatrix::basis(l, 5).unwrap();
        let f = classical_flag_mixture(&[(0.5, k000), (0.5, k101)]).unwrap();
        assert!(f.known.qcmi.unwrap() > 0.5);
        assert!(f.known.flagged_qcmi.unwrap().abs() < 1e-12);
        assert!(f.verify().unwrap() < 1e-9);
    }

    #[test]
    fn observation1_extension_vanishes() {
        let o = observation1_family().unwrap();
        assert!((o.known.qcmi.unwrap() - 2.0).abs() < 1e-9);
        let ext = o.known.optimal_extension.as_ref().unwrap();
        assert!(ext.objective(&Parties::default()).unwrap() < 1e-9);
        assert!(ext.marginal_deviation(&o.state).unwrap() < 1e-9);
    }

    #[test]
    fn triangle_values() {
        let alpha = schmidt_state(("x", "y"), &[0.8, 0.2]).unwrap();
        let beta = product_pure(("x", "y"), (2, 2)).unwrap();
        let gamma = schmidt_state(("x", "y"), &[0.5, 0.5]).unwrap();
        let t = triangle_state(&alpha, &beta, &gamma, &TriangleIsometries::default()).unwrap();
        let h = entropic::binary_entropy(0.2).unwrap();
        assert!((t.known.sqnm.unwrap() - h).abs() < 1e-12);
        // pure: trivial extension value is I(A;C)/2
        assert!(t.verify().unwrap() < 1e-9);
    }

    #[test]
    fn isotropic_endpoints() {
        let z = isotropic(2, 0.0).unwrap().state;
        assert!(linalg::max_abs(&(z.matrix() - linalg::identity(4) * cr(0.25))) < 1e-15);
        let one = isotropic(2, 1.0).unwrap().state;
        assert!(one.is_pure(1e-12));
        assert!(isotropic(2, 1.5).is_err());
    }
}
