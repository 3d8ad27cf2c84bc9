//! State extensions, the variational sQNM estimator and its analytic bounds.
//!
//! An extension ρ_ABCE of ρ_ABC is represented by a channel Λ: R → E on the
//! canonical purifying reference R, in Stinespring form V: R → E ⊗ G. The
//! objective of an extension is I(A;C|BE)/2.

pub mod bounds;
pub mod objective;
pub mod optimizer;

use serde::{Deserialize, Serialize};

use crate::entropic::{self, Bits};
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat};
use crate::parties::Parties;
use crate::qstate::{
    canonical_spectrum, permute_systems, purify, reduce_to, DensityMatrix, QuantumChannel, SystemLayout,
};

pub use bounds::{lemma1_bounds, sandwich_bounds, BSplit, BoundsReport, Sandwich};
pub use optimizer::{
    squashed_entanglement_estimate, sqnm_estimate, sqnm_estimate_with, Estimate, OptimizerConfig, RunSummary,
};

/// Where an extension came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Trivial,
    ClassicalFlag,
    /// Identity channel R → E: the extended state is pure.
    Purification,
    User,
    RandomRestart(usize),
    SeededFrom(Box<Provenance>),
}

/// A channel on the purifying system and the extension it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionCandidate {
    pub channel: QuantumChannel,
    /// State on the party systems (A, B, C order) followed by the E systems.
    pub extended_state: DensityMatrix,
    pub e_dim: usize,
    pub provenance: Provenance,
}

impl ExtensionCandidate {
    /// Names of the extension systems.
    pub fn e_names(&self) -> Vec<String> {
        self.channel.out_layout().names().iter().map(|s| s.to_string()).collect()
    }

    /// I(A;C|BE)/2 recomputed from the extended state.
    pub fn objective(&self, parties: &Parties) -> Result<Bits> {
        extension_objective(&self.extended_state, parties, &self.e_names())
    }

    /// Largest entry deviation of Tr_E from `rho`.
    pub fn marginal_deviation(&self, rho: &DensityMatrix) -> Result<f64> {
        let keep: Vec<&str> = rho.layout().names();
        let m = reduce_to(&self.extended_state, &keep)?;
        Ok(linalg::max_abs(&(m.matrix() - rho.matrix())))
    }
}

/// I(A;C|B,E)/2 of an extended state.
pub fn extension_objective<S: AsRef<str>>(ext: &DensityMatrix, parties: &Parties, e: &[S]) -> Result<Bits> {
    let mut cond = parties.b.clone();
    cond.extend(e.iter().map(|s| s.as_ref().to_string()));
    Ok(entropic::qcmi(ext, &parties.a, &parties.c, &cond)? / 2.0)
}

/// A system name not present in `layout`, starting from `base`.
pub fn fresh_name(layout: &SystemLayout, base: &str) -> String {
    let mut name = base.to_string();
    while layout.contains(&name) {
        name.push('\'');
    }
    name
}

/// The party-restricted state in A, B, C order; the extension problem is
/// always posed on this marginal.
pub fn party_marginal(rho: &DensityMatrix, parties: &Parties) -> Result<DensityMatrix> {
    parties.validate(rho.layout())?;
    reduce_to(rho, &parties.all())
}

/// Purification data: M (D × r) with M[x,i] = √λᵢ·eᵢ[x] and the eigenvectors.
pub(crate) struct Purification {
    pub m: CMat,
    pub vecs: CMat,
    pub vals: Vec<f64>,
}

pub(crate) fn purification_matrix(rho: &DensityMatrix) -> Purification {
    let (vals, vecs) = canonical_spectrum(rho);
    let d = rho.dim();
    let r = vals.len();
    let m = CMat::from_fn(d, r, |x, i| vecs[(x, i)] * cr(vals[i].sqrt()));
    Purification { m, vecs, vals }
}

/// (id ⊗ Λ)(ψ_ABCR) for the canonical purification ψ of the party marginal.
pub fn extension_from_channel(
    rho: &DensityMatrix,
    parties: &Parties,
    channel: &QuantumChannel,
    provenance: Provenance,
) -> Result<ExtensionCandidate> {
    let base = party_marginal(rho, parties)?;
    let p = purification_matrix(&base);
    let r = p.vals.len();
    if channel.in_layout().total_dim() != r {
        return Err(Error::DimensionMismatch(format!(
            "channel input dimension {} but purification rank {}",
            channel.in_layout().total_dim(),
            r
        )));
    }
    for n in channel.out_layout().names() {
        if base.layout().contains(n) {
            return Err(Error::NameCollision(n.to_string()));
        }
    }
    let e = channel.out_layout().total_dim();
    let g = channel.env_dim();
    let ext = extended_state_from_isometry(&base, &p.m, channel.isometry(), e, g, channel.out_layout())?;
    Ok(ExtensionCandidate { channel: channel.clone(), extended_state: ext, e_dim: e, provenance })
}

/// Tr_G |Ω⟩⟨Ω| with Ω = M Vᵀ on (party systems, E, G).
pub(crate) fn extended_state_from_isometry(
    base: &DensityMatrix,
    m: &CMat,
    v: &CMat,
    e: usize,
    g: usize,
    e_layout: &SystemLayout,
) -> Result<DensityMatrix> {
    let d = base.dim();
    let omega = m * v.transpose(); // D × (e g)
    let mut out = linalg::zeros(d * e, d * e);
    // ρ[(x,a),(y,b)] = Σ_k Ω[x, a g + k] conj(Ω[y, b g + k])
    let block = CMat::from_fn(d * e, g, |row, k| omega[(row / e, (row % e) * g + k)]);
    out += &block * block.adjoint();
    let layout = base.layout().concat(e_layout)?;
    Ok(DensityMatrix::from_trusted(layout, out))
}

/// Channel Λ: R → E reproducing a given extension from the canonical
/// purification of its marginal.
///
/// `ext` must contain every system of the party marginal; the remaining
/// systems (in their order in `ext`) form E.
pub fn channel_from_extension(rho: &DensityMatrix, parties: &Parties, ext: &DensityMatrix) -> Result<QuantumChannel> {
    let base = party_marginal(rho, parties)?;
    let base_names: Vec<String> = base.layout().names().iter().map(|s| s.to_string()).collect();
    let extra: Vec<String> = ext
        .layout()
        .names()
        .iter()
        .filter(|n| !base.layout().contains(n))
        .map(|s| s.to_string())
        .collect();
    if extra.is_empty() {
        return Err(Error::InvalidLayout("extension has no extra systems".into()));
    }
    let mut order = base_names.clone();
    order.extend(extra.iter().cloned());
    let ext = permute_systems(ext, &order)?;
    if ext.layout().select(&base_names)? != *base.layout() {
        return Err(Error::DimensionMismatch("extension layout does not contain the state layout".into()));
    }
    let marg = reduce_to(&ext, &base_names)?;
    let dev = linalg::max_abs(&(marg.matrix() - base.matrix()));
    if dev > 1e-8 {
        return Err(Error::Precondition(format!("extension marginal deviates by {dev:e}")));
    }
    let e_layout = ext.layout().select(&extra)?;
    let e = e_layout.total_dim();
    let g_name = fresh_name(ext.layout(), "G");
    let phi = purify(&ext, &g_name)?;
    let g = phi.layout().dim_of(&g_name)?;
    let d = base.dim();
    let amp = phi.amplitudes();
    let big = CMat::from_fn(d, e * g, |x, j| amp[x * e * g + j]);
    let p = purification_matrix(&base);
    let r = p.vals.len();
    // V column i = (⟨eᵢ| ⊗ 1)|Φ⟩ / √λᵢ
    let proj = p.vecs.adjoint() * &big; // r × (e g)
    let mut v = CMat::zeros(e * g, r);
    for i in 0..r {
        let s = 1.0 / p.vals[i].sqrt();
        for j in 0..e * g {
            v[(j, i)] = proj[(i, j)] * cr(s);
        }
    }
    let v = linalg::polar_isometry(&v);
    let r_layout = SystemLayout::single(&fresh_name(&e_layout, "R"), r)?;
    QuantumChannel::new(r_layout, e_layout, v, g)
}

/// Candidate from a plain extended state.
pub fn candidate_from_extension(
    rho: &DensityMatrix,
    parties: &Parties,
    ext: &DensityMatrix,
    provenance: Provenance,
) -> Result<ExtensionCandidate> {
    let ch = channel_from_extension(rho, parties, ext)?;
    extension_from_channel(rho, parties, &ch, provenance)
}

/// Trivial extension (E of dimension 1).
pub fn trivial_extension(rho: &DensityMatrix, parties: &Parties) -> Result<ExtensionCandidate> {
    let base = party_marginal(rho, parties)?;
    let r = purification_matrix(&base).vals.len();
    let e_name = fresh_name(base.layout(), "E");
    let ch = QuantumChannel::new(
        SystemLayout::single("R", r)?,
        SystemLayout::single(&e_name, 1)?,
        linalg::identity(r),
        r,
    )?;
    extension_from_channel(rho, parties, &ch, Provenance::Trivial)
}

/// Σᵢ λᵢ |eᵢ⟩⟨eᵢ| ⊗ |i⟩⟨i|_E: the eigenbasis classical flag.
pub fn classical_flag_extension(rho: &DensityMatrix, parties: &Parties) -> Result<ExtensionCandidate> {
    let base = party_marginal(rho, parties)?;
    let r = purification_matrix(&base).vals.len();
    let e_name = fresh_name(base.layout(), "E");
    let mut v = linalg::zeros(r * r, r);
    for i in 0..r {
        v[(i * r + i, i)] = cr(1.0);
    }
    let ch = QuantumChannel::new(SystemLayout::single("R", r)?, SystemLayout::single(&e_name, r)?, v, r)?;
    extension_from_channel(rho, parties, &ch, Provenance::ClassicalFlag)
}

/// Identity channel R → E: E holds the whole purification.
pub fn purification_extension(rho: &DensityMatrix, parties: &Parties) -> Result<ExtensionCandidate> {
    let base = party_marginal(rho, parties)?;
    let r = purification_matrix(&base).vals.len();
    let e_name = fresh_name(base.layout(), "E");
    let ch = QuantumChannel::new(
        SystemLayout::single("R", r)?,
        SystemLayout::single(&e_name, r)?,
        linalg::identity(r),
        1,
    )?;
    extension_from_channel(rho, parties, &ch, Provenance::Purification)
}

/// Σₘ pₘ ρᵐ_ABCE ⊗ |m⟩⟨m|_F from component certificates.
///
/// Each component's E systems are merged into one register and zero-padded
/// to the largest dimension, so the output lives on the party systems, `E`
/// and the flag `F`. Its objective is Σₘ pₘ I(A;C|BE)ᵐ/2 exactly.
pub fn flagged_mixture_extension(parts: &[(f64, &ExtensionCandidate)], parties: &Parties) -> Result<DensityMatrix> {
    let first = parts.first().ok_or_else(|| Error::Degenerate("empty mixture".into()))?;
    let names = parties.all();
    let base = reduce_to(&first.1.extended_state, &names)?.layout().clone();
    let d = base.total_dim();
    let e_max = parts.iter().map(|(_, c)| c.channel.out_layout().total_dim()).max().unwrap_or(1);
    let m = parts.len();
    let total = d * e_max * m;
    let mut out = linalg::zeros(total, total);
    for (k, (p, c)) in parts.iter().enumerate() {
        if *p < 0.0 {
            return Err(Error::OutOfRange(format!("weight {p}")));
        }
        let mut order = names.clone();
        order.extend(c.e_names());
        let ext = permute_systems(&c.extended_state, &order)?;
        if reduce_to(&ext, &names)?.layout() != &base {
            return Err(Error::DimensionMismatch("components live on different party systems".into()));
        }
        let e = c.channel.out_layout().total_dim();
        let idx = |x: usize| {
            let (a, i) = (x / e, x % e);
            (a * e_max + i) * m + k
        };
        let em = ext.matrix();
        for r in 0..d * e {
            for s in 0..d * e {
                out[(idx(r), idx(s))] += em[(r, s)] * cr(*p);
            }
        }
    }
    let layout = base.with(&fresh_name(&base, "E"), e_max)?;
    let layout = layout.with(&fresh_name(&layout, "F"), m)?;
    DensityMatrix::new(out, layout)
}
