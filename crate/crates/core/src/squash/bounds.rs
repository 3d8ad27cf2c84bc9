//! Analytic sandwich and the variational upper bounds from splitting the
//! condition system.

use serde::Serialize;

use super::optimizer::{sqnm_estimate_with, Estimate, OptimizerConfig};
use super::{candidate_from_extension, party_marginal, Provenance};
use crate::entropic::{self, Bits};
use crate::error::{Error, Result};
use crate::extendibility::{extendibility_cap, symmetric_extension_feasibility, FeasibilityConfig};
use crate::linalg::{self, CMat};
use crate::parties::Parties;
use crate::qstate::{apply_channel, reduce_to, DensityMatrix, QuantumChannel, SystemLayout};

/// max{I(A⟩C), I(C⟩A)} ≤ N_sq ≤ min{S(A), S(C)}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sandwich {
    pub lower: Bits,
    pub upper: Bits,
    pub coherent_a_to_c: Bits,
    pub coherent_c_to_a: Bits,
    pub entropy_a: Bits,
    pub entropy_c: Bits,
}

pub fn sandwich_bounds(rho: &DensityMatrix, parties: &Parties) -> Result<Sandwich> {
    parties.validate(rho.layout())?;
    let ac = entropic::coherent_information(rho, &parties.a, &parties.c)?;
    let ca = entropic::coherent_information(rho, &parties.c, &parties.a)?;
    let sa = entropic::entropy(rho, &parties.a)?;
    let sc = entropic::entropy(rho, &parties.c)?;
    Ok(Sandwich {
        lower: ac.max(ca),
        upper: sa.min(sc),
        coherent_a_to_c: ac,
        coherent_c_to_a: ca,
        entropy_a: sa,
        entropy_c: sc,
    })
}

/// An isometry B → B^L ⊗ B^R.
#[derive(Debug, Clone)]
pub struct BSplit {
    pub left: (String, usize),
    pub right: (String, usize),
    /// (d_L·d_R) × d_B.
    pub isometry: CMat,
}

impl BSplit {
    pub fn new(left: (&str, usize), right: (&str, usize), isometry: CMat) -> Result<Self> {
        if isometry.nrows() != left.1 * right.1 {
            return Err(Error::DimensionMismatch("split isometry rows must equal d_L·d_R".into()));
        }
        let dev = linalg::isometry_deviation(&isometry);
        if dev > 1e-9 {
            return Err(Error::NotIsometry(dev));
        }
        Ok(Self { left: (left.0.into(), left.1), right: (right.0.into(), right.1), isometry })
    }
}

#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub lower: Bits,
    pub upper_entropy: Bits,
    pub upper_lemma1: Bits,
    pub estimate: Bits,
    /// (k, log₂|A|/k) for each k at which ρ_AC was found k-extendible in C.
    pub extendibility_caps: Vec<(usize, Bits)>,
    pub esq_ab_c: Bits,
    pub esq_a_bc: Bits,
    pub esq_split: Option<Bits>,
    pub sandwich: Sandwich,
    pub sqnm: Estimate,
}

/// Upper bounds E_sq(AB;C), E_sq(A;BC) and (optionally) E_sq(AB^L;B^RC),
/// each cross-seeded into the sQNM search, plus the full sandwich.
pub fn lemma1_bounds(
    rho: &DensityMatrix,
    split: Option<&BSplit>,
    cfg: &OptimizerConfig,
    extendibility_ks: &[usize],
) -> Result<BoundsReport> {
    let parties = Parties::default();
    let base = party_marginal(rho, &parties)?;
    let ab_c = Parties::new(&["A", "B"], &[], &["C"]);
    let a_bc = Parties::new(&["A"], &[], &["B", "C"]);
    let est_ab_c = sqnm_estimate_with(&base, &ab_c, cfg)?;
    let est_a_bc = sqnm_estimate_with(&base, &a_bc, cfg)?;
    let mut seeds = vec![
        candidate_from_extension(&base, &parties, &est_ab_c.certificate.extended_state, from_bound())?,
        candidate_from_extension(&base, &parties, &est_a_bc.certificate.extended_state, from_bound())?,
    ];
    let mut esq_split = None;
    if let Some(sp) = split {
        let (est, pulled) = split_bound(&base, sp, cfg)?;
        esq_split = Some(est);
        seeds.push(candidate_from_extension(&base, &parties, &pulled, from_bound())?);
    }
    let mut seeded = cfg.clone();
    seeded.extra_seeds.extend(seeds);
    let sqnm = sqnm_estimate_with(&base, &parties, &seeded)?;
    let sandwich = sandwich_bounds(&base, &parties)?;

    let mut caps = Vec::new();
    let dim_a = base.layout().dim_of("A")?;
    let ac = reduce_to(&base, &["A", "C"])?;
    for &k in extendibility_ks {
        match symmetric_extension_feasibility(&ac, "C", k, &FeasibilityConfig::default()) {
            Ok(rep) if rep.feasible => caps.push((k, extendibility_cap(dim_a, k)?)),
            Ok(_) | Err(Error::MemoryCap(_)) => {}
            Err(e) => return Err(e),
        }
    }

    let mut upper_lemma1 = est_ab_c.value.min(est_a_bc.value);
    if let Some(s) = esq_split {
        upper_lemma1 = upper_lemma1.min(s);
    }
    Ok(BoundsReport {
        lower: sandwich.lower,
        upper_entropy: sandwich.upper,
        upper_lemma1,
        estimate: sqnm.value,
        extendibility_caps: caps,
        esq_ab_c: est_ab_c.value,
        esq_a_bc: est_a_bc.value,
        esq_split,
        sandwich,
        sqnm,
    })
}

fn from_bound() -> Provenance {
    Provenance::SeededFrom(Box::new(Provenance::User))
}

/// E_sq(AB^L; B^R C) estimate and its certificate pulled back to an
/// extension of ρ_ABC through V†.
fn split_bound(base: &DensityMatrix, sp: &BSplit, cfg: &OptimizerConfig) -> Result<(Bits, DensityMatrix)> {
    let db = base.layout().dim_of("B")?;
    if sp.isometry.ncols() != db {
        return Err(Error::DimensionMismatch(format!("split isometry has {} columns, B has {}", sp.isometry.ncols(), db)));
    }
    let out = SystemLayout::new([(sp.left.0.as_str(), sp.left.1), (sp.right.0.as_str(), sp.right.1)])?;
    let ch = QuantumChannel::new(SystemLayout::single("B", db)?, out, sp.isometry.clone(), 1)?;
    let split_state = apply_channel(base, &ch, &["B"])?;
    let (l, r) = (sp.left.0.as_str(), sp.right.0.as_str());
    let parties = Parties::new(&["A", l], &[], &[r, "C"]);
    let est = sqnm_estimate_with(&split_state, &parties, cfg)?;
    // certificate layout: A, B^L, B^R, C, E...
    let ext = &est.certificate.extended_state;
    let da = base.layout().dim_of("A")?;
    let rest = ext.dim() / (da * sp.isometry.nrows());
    let w = linalg::kron(&linalg::kron(&linalg::identity(da), &sp.isometry.adjoint()), &linalg::identity(rest));
    let pulled = &w * ext.matrix() * w.adjoint();
    let dc = base.layout().dim_of("C")?;
    let mut systems = vec![("A".to_string(), da), ("B".to_string(), db), ("C".to_string(), dc)];
    for s in ext.layout().systems().iter().skip(4) {
        systems.push((s.name.clone(), s.dim));
    }
    let layout = SystemLayout::new(systems)?;
    Ok((est.value, DensityMatrix::from_trusted(layout, pulled)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cr, CVec};
    use crate::qstate::{permute_systems, tensor_product, PureState};

    fn bell_plus_b() -> DensityMatrix {
        let l = SystemLayout::new([("A", 2), ("C", 2)]).unwrap();
        let mut v = CVec::zeros(4);
        v[0] = cr(1.0);
        v[3] = cr(1.0);
        let bell = PureState::normalized(v, l).unwrap().to_density();
        let b = DensityMatrix::maximally_mixed(SystemLayout::single("B", 2).unwrap());
        permute_systems(&tensor_product(&bell, &b).unwrap(), &["A", "B", "C"]).unwrap()
    }

    #[test]
    fn bell_sandwich_pins_one() {
        let s = sandwich_bounds(&bell_plus_b(), &Parties::default()).unwrap();
        assert!((s.lower - 1.0).abs() < 1e-12 && (s.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ghz_sandwich() {
        let l = SystemLayout::new([("A", 2), ("B", 2), ("C", 2)]).unwrap();
        let mut v = CVec::zeros(8);
        v[0] = cr(1.0);
        v[7] = cr(1.0);
        let g = PureState::normalized(v, l).unwrap().to_density();
        let s = sandwich_bounds(&g, &Parties::default()).unwrap();
        assert!(s.lower.abs() < 1e-12 && (s.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lemma1_report_on_bell() {
        let cfg = OptimizerConfig { restarts: 1, max_evals_per_restart: 100, e_dims: Some(vec![2]), ..Default::default() };
        let rep = lemma1_bounds(&bell_plus_b(), None, &cfg, &[]).unwrap();
        assert!((rep.estimate - 1.0).abs() < 1e-6);
        assert!(rep.estimate <= rep.upper_lemma1 + 1e-6);
        assert!(rep.lower - 1e-9 <= rep.estimate);
    }
}
