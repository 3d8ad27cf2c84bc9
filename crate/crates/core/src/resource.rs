//! Resource-theory formulas: conversion rates, quantum communication costs,
//! free operations and monotonicity audits.
//!
//! Rates and costs are evaluated at the level of their formulas; no n-copy
//! protocol is simulated.

use serde::Serialize;

use crate::entropic::{self, Bits};
use crate::error::{Error, Result};
use crate::linalg::{self, cr};
use crate::parties::Parties;
use crate::qstate::{apply_channel, permute_systems, tensor_product, DensityMatrix, QuantumChannel, SystemLayout};
use crate::squash::{
    candidate_from_extension, extension_objective, party_marginal, sandwich_bounds, sqnm_estimate_with, Estimate,
    OptimizerConfig, Sandwich,
};

/// Denominator guard of the converse rate.
pub const FREE_TARGET_GUARD: Bits = 1e-6;

/// Sandwich width below which an sQNM value counts as analytically pinned.
pub const PINNED_WIDTH: Bits = 1e-6;

fn pinned(s: &Sandwich) -> bool {
    s.upper - s.lower <= PINNED_WIDTH
}

#[derive(Debug, Clone)]
pub struct ConverseRate {
    /// Estimate of the converse bound R_C: ratio of variational upper bounds.
    pub rate: f64,
    pub source: Estimate,
    pub target: Estimate,
}

/// estimate(ρ₁) / estimate(ρ₂).
pub fn converse_rate(rho1: &DensityMatrix, rho2: &DensityMatrix, cfg: &OptimizerConfig) -> Result<ConverseRate> {
    let source = sqnm_estimate_with(rho1, &Parties::infer(rho1.layout()), cfg)?;
    let target = sqnm_estimate_with(rho2, &Parties::infer(rho2.layout()), cfg)?;
    if target.value <= FREE_TARGET_GUARD {
        return Err(Error::Degenerate("target state is free; rate unbounded".into()));
    }
    Ok(ConverseRate { rate: source.value / target.value, source, target })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AchievableRate {
    /// max{numerator, 0} / denominator.
    pub rate: f64,
    /// max{I(A⟩C), I(C⟩A)} of the source.
    pub numerator: Bits,
    /// min{S(A), S(C)} of the target.
    pub denominator: Bits,
    /// The numerator is negative, so the merging protocol fails.
    pub protocol_fails: bool,
    pub source: Sandwich,
    pub target: Sandwich,
}

pub fn achievable_rate(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<AchievableRate> {
    let source = sandwich_bounds(rho1, &Parties::infer(rho1.layout()))?;
    let target = sandwich_bounds(rho2, &Parties::infer(rho2.layout()))?;
    if target.upper <= 1e-9 {
        return Err(Error::Degenerate("target has min{S(A), S(C)} = 0".into()));
    }
    let numerator = source.lower;
    Ok(AchievableRate {
        rate: numerator.max(0.0) / target.upper,
        numerator,
        denominator: target.upper,
        protocol_fails: numerator < 0.0,
        source,
        target,
    })
}

#[derive(Debug, Clone)]
pub struct RateReport {
    /// None when the target is free.
    pub converse: Option<ConverseRate>,
    pub converse_error: Option<String>,
    pub achievable: AchievableRate,
    /// R_A ≤ R_C within 1e-6, if the converse exists.
    pub consistent: Option<bool>,
    /// Both sQNM values are pinned by their sandwiches, so the comparison
    /// is a real check rather than a report.
    pub pinned: bool,
}

pub fn rate_report(rho1: &DensityMatrix, rho2: &DensityMatrix, cfg: &OptimizerConfig) -> Result<RateReport> {
    let achievable = achievable_rate(rho1, rho2)?;
    let (converse, converse_error) = match converse_rate(rho1, rho2, cfg) {
        Ok(c) => (Some(c), None),
        Err(Error::Degenerate(m)) => (None, Some(m)),
        Err(e) => return Err(e),
    };
    let consistent = converse.as_ref().map(|c| achievable.rate <= c.rate + 1e-6);
    Ok(RateReport {
        converse,
        converse_error,
        achievable,
        consistent,
        pinned: pinned(&achievable.source) && pinned(&achievable.target),
    })
}

impl RateReport {
    /// Largest discrepancy between the stored rates and their formulas.
    pub fn recompute_error(&self) -> f64 {
        let a = &self.achievable;
        let mut worst = (a.rate - a.numerator.max(0.0) / a.denominator).abs();
        worst = worst.max((a.numerator - a.source.coherent_a_to_c.max(a.source.coherent_c_to_a)).abs());
        worst = worst.max((a.denominator - a.target.entropy_a.min(a.target.entropy_c)).abs());
        if let Some(c) = &self.converse {
            worst = worst.max((c.rate - c.source.value / c.target.value).abs());
        }
        worst
    }
}

/// Communication-cost bounds. Fields not requested are None.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CommCostReport {
    /// Lower bound on the cost of preparing ρ: its sQNM estimate.
    pub prepare_lower: Option<Bits>,
    /// I(A;C)/2 when ρ is pure, where the bound is attained.
    pub pure_exact: Option<Bits>,
    pub transform_necessary: Option<Bits>,
    pub transform_sufficient: Option<Bits>,
    /// Sufficient cost with max{I(A⟩C), I(B⟩C)} in place of the pair above.
    pub transform_sufficient_alt: Option<Bits>,
    pub inputs: CostInputs,
    /// Private rate of the conditional one-time pad: the sQNM estimate.
    pub otp_private_rate: Option<Bits>,
    /// Deconstruction cost: I(A;C|B).
    pub deconstruction_cost: Option<Bits>,
    /// Deconstruction cost with extension: the sQNM estimate.
    pub deconstruction_extended: Option<Bits>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CostInputs {
    pub estimate_rho: Option<Bits>,
    pub estimate_sigma: Option<Bits>,
    pub qcmi_rho: Option<Bits>,
    pub coherent_a_to_c_rho: Option<Bits>,
    pub coherent_c_to_a_rho: Option<Bits>,
    pub coherent_b_to_c_rho: Option<Bits>,
    pub entropy_a_sigma: Option<Bits>,
    pub entropy_c_sigma: Option<Bits>,
}

const CONVENTION_NOTE: &str = "sufficient cost uses max{I(A>C), I(C>A)} of the source; \
the variant with I(B>C) is reported as transform_sufficient_alt";

pub fn prepare_cost_bound(rho: &DensityMatrix, cfg: &OptimizerConfig) -> Result<CommCostReport> {
    let parties = Parties::infer(rho.layout());
    let base = party_marginal(rho, &parties)?;
    let est = sqnm_estimate_with(&base, &parties, cfg)?;
    let qcmi = entropic::qcmi(&base, &parties.a, &parties.c, &parties.b)?;
    let mut rep = CommCostReport {
        prepare_lower: Some(est.value),
        otp_private_rate: Some(est.value),
        deconstruction_cost: Some(qcmi),
        deconstruction_extended: Some(est.value),
        ..Default::default()
    };
    rep.inputs.estimate_rho = Some(est.value);
    rep.inputs.qcmi_rho = Some(qcmi);
    if base.is_pure(1e-10) {
        rep.pure_exact = Some(entropic::mutual_information(&base, &parties.a, &parties.c)? / 2.0);
    }
    Ok(rep)
}

pub fn transform_cost_bounds(rho: &DensityMatrix, sigma: &DensityMatrix, cfg: &OptimizerConfig) -> Result<CommCostReport> {
    if rho.layout().names() != sigma.layout().names() {
        return Err(Error::DimensionMismatch(format!("layouts differ: {} vs {}", rho.layout(), sigma.layout())));
    }
    let parties = Parties::infer(rho.layout());
    let est_rho = sqnm_estimate_with(rho, &parties, cfg)?.value;
    let est_sigma = if rho == sigma { est_rho } else { sqnm_estimate_with(sigma, &parties, cfg)?.value };
    let sr = sandwich_bounds(rho, &parties)?;
    let ss = sandwich_bounds(sigma, &parties)?;
    let mut notes = vec![CONVENTION_NOTE.to_string()];
    let necessary_raw = est_sigma - est_rho;
    if necessary_raw < 0.0 {
        notes.push(format!("necessary cost {necessary_raw:.3e} clamped to 0"));
    }
    let sufficient_raw = ss.upper - sr.lower;
    if sufficient_raw < 0.0 {
        notes.push(format!("sufficient cost {sufficient_raw:.3e} clamped to 0"));
    }
    let coh_bc = if parties.b.is_empty() {
        None
    } else {
        Some(entropic::coherent_information(rho, &parties.b, &parties.c)?)
    };
    let alt = coh_bc.map(|b| (ss.upper - sr.coherent_a_to_c.max(b)).max(0.0));
    Ok(CommCostReport {
        transform_necessary: Some(if rho == sigma { 0.0 } else { necessary_raw.max(0.0) }),
        transform_sufficient: Some(sufficient_raw.max(0.0)),
        transform_sufficient_alt: alt,
        inputs: CostInputs {
            estimate_rho: Some(est_rho),
            estimate_sigma: Some(est_sigma),
            qcmi_rho: Some(entropic::qcmi(rho, &parties.a, &parties.c, &parties.b)?),
            coherent_a_to_c_rho: Some(sr.coherent_a_to_c),
            coherent_c_to_a_rho: Some(sr.coherent_c_to_a),
            coherent_b_to_c_rho: coh_bc,
            entropy_a_sigma: Some(ss.entropy_a),
            entropy_c_sigma: Some(ss.entropy_c),
        },
        notes,
        ..Default::default()
    })
}

impl CommCostReport {
    /// Largest discrepancy between the stored bounds and their formulas.
    pub fn recompute_error(&self) -> f64 {
        let i = &self.inputs;
        let mut worst: f64 = 0.0;
        let mut check = |got: Option<f64>, want: Option<f64>| {
            if let (Some(g), Some(w)) = (got, want) {
                worst = worst.max((g - w).abs());
            }
        };
        check(self.prepare_lower, i.estimate_rho.filter(|_| self.transform_necessary.is_none()));
        check(self.transform_necessary, i.estimate_sigma.zip(i.estimate_rho).map(|(s, r)| (s - r).max(0.0)));
        let lower = i.coherent_a_to_c_rho.zip(i.coherent_c_to_a_rho).map(|(a, c)| a.max(c));
        let upper = i.entropy_a_sigma.zip(i.entropy_c_sigma).map(|(a, c)| a.min(c));
        check(self.transform_sufficient, upper.zip(lower).map(|(u, l)| (u - l).max(0.0)));
        let alt_lower = i.coherent_a_to_c_rho.zip(i.coherent_b_to_c_rho).map(|(a, b)| a.max(b));
        check(self.transform_sufficient_alt, upper.zip(alt_lower).map(|(u, l)| (u - l).max(0.0)));
        check(self.deconstruction_cost, i.qcmi_rho);
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum Party {
    A,
    B,
    C,
}

fn party_list(p: &mut Parties, party: Party) -> &mut Vec<String> {
    match party {
        Party::A => &mut p.a,
        Party::B => &mut p.b,
        Party::C => &mut p.c,
    }
}

/// The operations under which sQNM is non-increasing.
#[derive(Debug, Clone)]
pub enum FreeOperation {
    /// A channel whose input systems all belong to `party`; its outputs join it.
    LocalChannel { party: Party, channel: QuantumChannel },
    /// A quantum instrument on A or C. Branch x is the CP map with Kraus
    /// operators `branches[x]` from `inputs` to `outputs`; the outcome is
    /// stored in `flag` on the acting party and, if `broadcast`, also in
    /// `flag` + "'" on the other of A and C.
    InstrumentWithFlag {
        party: Party,
        inputs: SystemLayout,
        outputs: SystemLayout,
        branches: Vec<Vec<linalg::CMat>>,
        flag: String,
        broadcast: bool,
    },
    /// Send a subsystem of A or C to the condition.
    MoveSubsystem { from: Party, to: Party, system: String },
    /// Tensor in a state on two fresh systems, the first joining `with`
    /// (A or C) and the second joining B.
    AttachState { with: Party, state: DensityMatrix },
}

impl FreeOperation {
    pub fn describe(&self) -> String {
        match self {
            FreeOperation::LocalChannel { party, channel } => {
                format!("local channel on {:?} ({} -> {})", party, channel.in_layout(), channel.out_layout())
            }
            FreeOperation::InstrumentWithFlag { party, branches, flag, .. } => {
                format!("instrument on {:?} with {} outcomes into {}", party, branches.len(), flag)
            }
            FreeOperation::MoveSubsystem { from, to, system } => format!("move {system} from {from:?} to {to:?}"),
            FreeOperation::AttachState { with, state } => format!("attach {} shared by {:?} and B", state.layout(), with),
        }
    }

    /// Reject operations outside the free set.
    pub fn check_free(&self, parties: &Parties) -> Result<()> {
        let owned = |p: Party, names: &[&str]| -> Result<()> {
            let mut pp = parties.clone();
            let list = party_list(&mut pp, p).clone();
            for n in names {
                if !list.iter().any(|s| s == n) {
                    return Err(Error::NotFree(format!("{n} is not held by {p:?}")));
                }
            }
            Ok(())
        };
        match self {
            FreeOperation::LocalChannel { party, channel } => owned(*party, &channel.in_layout().names()),
            FreeOperation::InstrumentWithFlag { party, inputs, .. } => {
                if *party == Party::B {
                    return Err(Error::NotFree("instruments on B would signal from B to A or C".into()));
                }
                owned(*party, &inputs.names())
            }
            FreeOperation::MoveSubsystem { from, to, system } => {
                if *to != Party::B || *from == Party::B {
                    return Err(Error::NotFree(format!(
                        "moving {system} from {from:?} to {to:?}: communication is only allowed into B"
                    )));
                }
                owned(*from, &[system.as_str()])
            }
            FreeOperation::AttachState { with, state } => {
                if *with == Party::B {
                    return Err(Error::NotFree("attached states must be shared between B and A or C".into()));
                }
                if state.layout().len() != 2 {
                    return Err(Error::InvalidLayout("attached state must be on exactly two systems".into()));
                }
                Ok(())
            }
        }
    }
}

/// Where environments of B-channels and flag copies go.
enum Sink<'a> {
    Discard,
    /// Keep them as new extension systems, appended to this list.
    Keep(&'a mut Vec<String>),
}

fn fresh(layout: &SystemLayout, base: &str) -> String {
    crate::squash::fresh_name(layout, base)
}

fn check_new_names(state: &DensityMatrix, names: &[&str], replaced: &[&str]) -> Result<()> {
    for n in names {
        if state.layout().contains(n) && !replaced.contains(n) {
            return Err(Error::NameCollision(n.to_string()));
        }
    }
    Ok(())
}

fn apply_op(
    state: &DensityMatrix,
    parties: &Parties,
    op: &FreeOperation,
    sink: Sink<'_>,
) -> Result<(DensityMatrix, Parties)> {
    op.check_free(parties)?;
    let mut out_parties = parties.clone();
    match op {
        FreeOperation::LocalChannel { party, channel } => {
            let ins = channel.in_layout().names();
            let outs = channel.out_layout().names();
            check_new_names(state, &outs, &ins)?;
            let list = party_list(&mut out_parties, *party);
            let pos = list.iter().position(|s| s == ins[0]).unwrap_or(list.len());
            list.retain(|s| !ins.contains(&s.as_str()));
            let pos = pos.min(list.len());
            for (k, o) in outs.iter().enumerate() {
                list.insert(pos + k, o.to_string());
            }
            let out = match (party, sink) {
                (Party::B, Sink::Keep(e)) => {
                    // keep the Stinespring environment as part of E
                    let f = fresh(state.layout(), "F");
                    let layout = channel.out_layout().with(&f, channel.env_dim())?;
                    let iso = QuantumChannel::new(channel.in_layout().clone(), layout, channel.isometry().clone(), 1)?;
                    let s = apply_channel(state, &iso, &ins)?;
                    e.push(f.clone());
                    let mut order: Vec<String> =
                        s.layout().names().iter().filter(|n| **n != f).map(|n| n.to_string()).collect();
                    order.push(f);
                    permute_systems(&s, &order)?
                }
                _ => apply_channel(state, channel, &ins)?,
            };
            Ok((out, out_parties))
        }
        FreeOperation::InstrumentWithFlag { party, inputs, outputs, branches, flag, broadcast } => {
            if branches.is_empty() {
                return Err(Error::Degenerate("instrument without outcomes".into()));
            }
            let ins = inputs.names();
            check_new_names(state, &outputs.names(), &ins)?;
            let nx = branches.len();
            let other = if *party == Party::A { Party::C } else { Party::A };
            let copy_name = format!("{flag}'");
            let mut flags = vec![flag.clone()];
            if *broadcast {
                flags.push(copy_name.clone());
            }
            let keep_copy = matches!(sink, Sink::Keep(_));
            let e_copy = fresh(&state.layout().with(flag, 1)?.with(&copy_name, 1)?, "X");
            if keep_copy {
                flags.push(e_copy.clone());
            }
            for f in &flags {
                check_new_names(state, &[f.as_str()], &[])?;
            }
            // the full instrument as one channel inputs -> outputs ⊗ flags
            let nf = flags.len();
            let mut kraus = Vec::new();
            for (x, ks) in branches.iter().enumerate() {
                let mut reg = linalg::zeros(nx.pow(nf as u32), 1);
                let idx = (0..nf).fold(0, |acc, _| acc * nx + x);
                reg[(idx, 0)] = cr(1.0);
                for k in ks {
                    kraus.push(linalg::kron(k, &reg));
                }
            }
            let mut out_layout = outputs.clone();
            for f in &flags {
                out_layout = out_layout.with(f, nx)?;
            }
            let ch = QuantumChannel::from_kraus(inputs.clone(), out_layout, &kraus)?;
            let s = apply_channel(state, &ch, &ins)?;
            // outputs join the party in place of the inputs; flags at the end
            let list = party_list(&mut out_parties, *party);
            list.retain(|n| !ins.contains(&n.as_str()));
            list.extend(outputs.names().iter().map(|s| s.to_string()));
            list.push(flag.clone());
            if *broadcast {
                party_list(&mut out_parties, other).push(copy_name);
            }
            let mut order: Vec<String> =
                s.layout().names().iter().filter(|n| **n != e_copy).map(|n| n.to_string()).collect();
            if let Sink::Keep(e) = sink {
                order.push(e_copy.clone());
                e.push(e_copy);
            }
            Ok((permute_systems(&s, &order)?, out_parties))
        }
        FreeOperation::MoveSubsystem { from, system, .. } => {
            party_list(&mut out_parties, *from).retain(|s| s != system);
            out_parties.b.push(system.clone());
            if out_parties.a.is_empty() || out_parties.c.is_empty() {
                return Err(Error::Precondition(format!("moving {system} would leave {from:?} empty")));
            }
            Ok((state.clone(), out_parties))
        }
        FreeOperation::AttachState { with, state: omega } => {
            let names = omega.layout().names();
            check_new_names(state, &names, &[])?;
            party_list(&mut out_parties, *with).push(names[0].to_string());
            out_parties.b.push(names[1].to_string());
            Ok((tensor_product(state, omega)?, out_parties))
        }
    }
}

/// Apply a free operation, returning the new state and party assignment.
pub fn apply_free_operation(
    state: &DensityMatrix,
    parties: &Parties,
    op: &FreeOperation,
) -> Result<(DensityMatrix, Parties)> {
    apply_op(state, parties, op, Sink::Discard)
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditStep {
    pub op: String,
    /// Objective of the pushed certificate before and after the step.
    pub fixed_before: Bits,
    pub fixed_after: Bits,
    pub fixed_ok: bool,
    pub estimate_before: Bits,
    pub estimate_after: Bits,
    pub estimate_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub initial_estimate: Bits,
    pub steps: Vec<AuditStep>,
    pub pass: bool,
    pub final_parties: Parties,
}

/// Push the certificate extension through every operation (exact data
/// processing at fixed extension) and re-optimize each output seeded with
/// the pushed extension.
pub fn monotonicity_audit(
    state: &DensityMatrix,
    parties: &Parties,
    ops: &[FreeOperation],
    cfg: &OptimizerConfig,
) -> Result<AuditReport> {
    monotonicity_audit_with(state, parties, ops, cfg, cfg)
}

/// As [`monotonicity_audit`], with separate configurations for the initial
/// estimate and for the seeded re-optimization after each step.
pub fn monotonicity_audit_with(
    state: &DensityMatrix,
    parties: &Parties,
    ops: &[FreeOperation],
    initial_cfg: &OptimizerConfig,
    step_cfg: &OptimizerConfig,
) -> Result<AuditReport> {
    // reject non-free lists up front, tracking party changes
    let mut p = parties.clone();
    for op in ops {
        op.check_free(&p)?;
        p = dry_run_parties(&p, op)?;
    }

    let mut rho = party_marginal(state, parties)?;
    let mut parties = parties.clone();
    let est = sqnm_estimate_with(&rho, &parties, initial_cfg)?;
    let initial = est.value;
    let mut estimate = est.value;
    let mut ext = est.certificate.extended_state.clone();
    let mut e_names = est.certificate.e_names();
    let mut steps = Vec::new();
    for op in ops {
        let fixed_before = extension_objective(&ext, &parties, &e_names)?;
        let (new_rho, new_parties) = apply_op(&rho, &parties, op, Sink::Discard)?;
        let (new_ext, _) = apply_op(&ext, &parties, op, Sink::Keep(&mut e_names))?;
        let fixed_after = extension_objective(&new_ext, &new_parties, &e_names)?;
        let base = party_marginal(&new_rho, &new_parties)?;
        let seed = candidate_from_extension(&base, &new_parties, &reorder_extension(&new_ext, &base, &e_names)?, crate::squash::Provenance::User)?;
        let mut c = step_cfg.clone();
        c.extra_seeds.push(seed);
        let new_est = sqnm_estimate_with(&base, &new_parties, &c)?;
        steps.push(AuditStep {
            op: op.describe(),
            fixed_before,
            fixed_after,
            fixed_ok: fixed_after <= fixed_before + 1e-9,
            estimate_before: estimate,
            estimate_after: new_est.value,
            estimate_ok: new_est.value <= estimate + 1e-6,
        });
        estimate = new_est.value;
        ext = new_ext;
        rho = base;
        parties = new_parties;
    }
    let pass = steps.iter().all(|s| s.fixed_ok && s.estimate_ok);
    Ok(AuditReport { initial_estimate: initial, steps, pass, final_parties: parties })
}

fn dry_run_parties(p: &Parties, op: &FreeOperation) -> Result<Parties> {
    let mut out = p.clone();
    match op {
        FreeOperation::LocalChannel { party, channel } => {
            let ins = channel.in_layout().names();
            let list = party_list(&mut out, *party);
            list.retain(|s| !ins.contains(&s.as_str()));
            list.extend(channel.out_layout().names().iter().map(|s| s.to_string()));
        }
        FreeOperation::InstrumentWithFlag { party, inputs, outputs, flag, broadcast, .. } => {
            let ins = inputs.names();
            let list = party_list(&mut out, *party);
            list.retain(|s| !ins.contains(&s.as_str()));
            list.extend(outputs.names().iter().map(|s| s.to_string()));
            list.push(flag.clone());
            if *broadcast {
                let other = if *party == Party::A { Party::C } else { Party::A };
                party_list(&mut out, other).push(format!("{flag}'"));
            }
        }
        FreeOperation::MoveSubsystem { from, system, .. } => {
            party_list(&mut out, *from).retain(|s| s != system);
            out.b.push(system.clone());
        }
        FreeOperation::AttachState { with, state } => {
            let names = state.layout().names();
            party_list(&mut out, *with).push(names[0].to_string());
            out.b.push(names[1].to_string());
        }
    }
    Ok(out)
}

/// Extended state in (party marginal order, E...) order.
fn reorder_extension(ext: &DensityMatrix, base: &DensityMatrix, e_names: &[String]) -> Result<DensityMatrix> {
    let mut order: Vec<String> = base.layout().names().iter().map(|s| s.to_string()).collect();
    let keep: Vec<String> = order.iter().cloned().chain(e_names.iter().cloned()).collect();
    let reduced = crate::qstate::reduce_to(ext, &keep)?;
    order.extend(e_names.iter().cloned());
    permute_systems(&reduced, &order)
}

/// I(AM;C|BE) − I(A;C|BME) for a state on the named systems; nonnegative by
/// the chain rule.
pub fn weak_chain_rule_gap<S: AsRef<str>>(ext: &DensityMatrix, a: &[S], m: &[S], b: &[S], c: &[S], e: &[S]) -> Result<Bits> {
    let own = |v: &[S]| v.iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>();
    let am: Vec<String> = own(a).into_iter().chain(own(m)).collect();
    let be: Vec<String> = own(b).into_iter().chain(own(e)).collect();
    let bme: Vec<String> = own(b).into_iter().chain(own(m)).chain(own(e)).collect();
    Ok(entropic::qcmi_raw(ext, &am, &own(c), &be)? - entropic::qcmi_raw(ext, &own(a), &own(c), &bme)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{random_density, random_unitary, RngSeed};
    use crate::states;

    fn quick() -> OptimizerConfig {
        OptimizerConfig { restarts: 1, max_evals_per_restart: 80, e_dims: Some(vec![2]), ..Default::default() }
    }

    fn bell_b() -> DensityMatrix {
        let b = DensityMatrix::maximally_mixed(SystemLayout::single("B", 2).unwrap());
        states::with_condition(&states::bell(0).unwrap(), &b).unwrap().state
    }

    #[test]
    fn converse_examples() {
        let r = converse_rate(&bell_b(), &bell_b(), &quick()).unwrap();
        assert!((r.rate - 1.0).abs() < 1e-6);
        let r = converse_rate(&states::maximally_entangled(4).unwrap().state, &states::bell(0).unwrap().state, &quick())
            .unwrap();
        assert!((r.rate - 2.0).abs() < 1e-6);
        let m = states::with_condition(
            &states::CertifiedState { state: DensityMatrix::maximally_mixed(SystemLayout::new([("A", 2), ("C", 2)]).unwrap()), known: Default::default(), flagged: None },
            &DensityMatrix::maximally_mixed(SystemLayout::single("B", 2).unwrap()),
        )
        .unwrap()
        .state;
        assert!(matches!(converse_rate(&bell_b(), &m, &quick()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn achievable_examples() {
        let a = states::schmidt_state(("A", "C"), &[0.7, 0.3]).unwrap().to_density();
        let b = states::schmidt_state(("A", "C"), &[0.5, 0.5]).unwrap().to_density();
        let rep = rate_report(&a, &b, &quick()).unwrap();
        let rc = rep.converse.as_ref().unwrap().rate;
        assert!((rep.achievable.rate - rc).abs() < 1e-6);
        assert!(rep.pinned && rep.consistent.unwrap());
        assert!(rep.recompute_error() < 1e-12);

        let prod = DensityMatrix::basis(SystemLayout::new([("A", 2), ("C", 2)]).unwrap(), 0).unwrap();
        let mixed = DensityMatrix::maximally_mixed(SystemLayout::new([("A", 2), ("C", 2)]).unwrap());
        let r = achievable_rate(&mixed, &b).unwrap();
        assert_eq!(r.rate, 0.0);
        assert!(r.protocol_fails);
        assert!(achievable_rate(&b, &prod).is_err());
    }

    #[test]
    fn cost_examples() {
        let rep = prepare_cost_bound(&bell_b(), &quick()).unwrap();
        assert!(rep.prepare_lower.unwrap() >= 1.0 - 1e-6);
        let g = prepare_cost_bound(&states::ghz().state, &quick()).unwrap();
        assert!((g.pure_exact.unwrap() - 0.5).abs() < 1e-12);
        assert!(g.recompute_error() < 1e-12);

        let same = transform_cost_bounds(&bell_b(), &bell_b(), &quick()).unwrap();
        assert_eq!(same.transform_necessary, Some(0.0));
        let d2 = states::bell(0).unwrap().state;
        let d4 = states::maximally_entangled(4).unwrap().state;
        let up = transform_cost_bounds(&d2, &d4, &quick()).unwrap();
        assert!((up.transform_necessary.unwrap() - 1.0).abs() < 1e-6);
        assert!(up.recompute_error() < 1e-12);
        assert!(up.transform_sufficient_alt.is_none());
    }

    #[test]
    fn depolarizing_a_of_bell() {
        let p = Parties::default();
        let ch = QuantumChannel::depolarizing(SystemLayout::single("A", 2).unwrap(), 1.0).unwrap();
        let op = FreeOperation::LocalChannel { party: Party::A, channel: ch };
        let (out, _) = apply_free_operation(&bell_b(), &p, &op).unwrap();
        let ac = crate::qstate::reduce_to(&out, &["A", "C"]).unwrap();
        assert!(linalg::max_abs(&(ac.matrix() - linalg::identity(4) * cr(0.25))) < 1e-12);
    }

    #[test]
    fn non_free_moves_rejected() {
        let p = Parties::default();
        let bc = FreeOperation::MoveSubsystem { from: Party::B, to: Party::C, system: "B".into() };
        assert!(matches!(apply_free_operation(&bell_b(), &p, &bc), Err(Error::NotFree(_))));
        let ac = FreeOperation::MoveSubsystem { from: Party::A, to: Party::C, system: "A".into() };
        assert!(matches!(apply_free_operation(&bell_b(), &p, &ac), Err(Error::NotFree(_))));
        let inst = FreeOperation::InstrumentWithFlag {
            party: Party::B,
            inputs: SystemLayout::single("B", 2).unwrap(),
            outputs: SystemLayout::single("B", 2).unwrap(),
            branches: vec![vec![linalg::identity(2)]],
            flag: "X".into(),
            broadcast: false,
        };
        assert!(matches!(apply_free_operation(&bell_b(), &p, &inst), Err(Error::NotFree(_))));
        assert!(monotonicity_audit(&bell_b(), &p, &[bc], &quick()).is_err());
    }

    #[test]
    fn move_half_of_bell_into_b() {
        // A = {A0, A1}, φ⁺ on A1 C
        let a0 = DensityMatrix::basis(SystemLayout::single("A0", 2).unwrap(), 0).unwrap();
        let bell = states::bell(0).unwrap().state.relabel(&["A1", "C"]).unwrap();
        let b = DensityMatrix::maximally_mixed(SystemLayout::single("B", 2).unwrap());
        let s = tensor_product(&tensor_product(&a0, &bell).unwrap(), &b).unwrap();
        let p = Parties::new(&["A0", "A1"], &["B"], &["C"]);
        let mv = FreeOperation::MoveSubsystem { from: Party::A, to: Party::B, system: "A1".into() };
        let rep = monotonicity_audit(&s, &p, &[mv], &quick()).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!((rep.initial_estimate - 1.0).abs() < 1e-6);
        assert!(rep.steps[0].estimate_after < 1e-6);
    }

    #[test]
    fn unitary_on_b_is_invariant() {
        let rho = random_density(&SystemLayout::new([("A", 2), ("B", 2), ("C", 2)]).unwrap(), 2, RngSeed(8)).unwrap();
        let u = random_unitary(2, RngSeed(9)).unwrap();
        let ch = QuantumChannel::unitary(SystemLayout::single("B", 2).unwrap(), u).unwrap();
        let ops = vec![FreeOperation::LocalChannel { party: Party::B, channel: ch }];
        let rep = monotonicity_audit(&rho, &Parties::default(), &ops, &quick()).unwrap();
        let s = &rep.steps[0];
        assert!((s.fixed_after - s.fixed_before).abs() < 1e-9);
        assert!(rep.pass);
    }

    #[test]
    fn instrument_and_attach_are_monotone() {
        let rho = random_density(&SystemLayout::new([("A", 2), ("B", 2), ("C", 2)]).unwrap(), 3, RngSeed(11)).unwrap();
        let p0 = linalg::CMat::from_fn(2, 2, |i, j| cr(if i == 0 && j == 0 { 1.0 } else { 0.0 }));
        let p1 = linalg::identity(2) - &p0;
        let inst = FreeOperation::InstrumentWithFlag {
            party: Party::A,
            inputs: SystemLayout::single("A", 2).unwrap(),
            outputs: SystemLayout::single("A", 2).unwrap(),
            branches: vec![vec![p0], vec![p1]],
            flag: "X".into(),
            broadcast: true,
        };
        let omega = states::bell(0).unwrap().state.relabel(&["C2", "B2"]).unwrap();
        let att = FreeOperation::AttachState { with: Party::C, state: omega };
        let rep = monotonicity_audit(&rho, &Parties::default(), &[inst, att], &quick()).unwrap();
        assert!(rep.steps.iter().all(|s| s.fixed_ok), "{rep:?}");
        assert_eq!(rep.final_parties.a, vec!["A", "X"]);
        assert_eq!(rep.final_parties.c, vec!["C", "X'", "C2"]);
    }

    #[test]
    fn chain_rule_gap_nonnegative() {
        let l = SystemLayout::new([("A", 2), ("M", 2), ("B", 2), ("C", 2), ("E", 2)]).unwrap();
        for seed in 0..5 {
            let s = random_density(&l, 4, RngSeed(seed)).unwrap();
            assert!(weak_chain_rule_gap(&s, &["A"], &["M"], &["B"], &["C"], &["E"]).unwrap() >= -1e-9);
        }
    }
}
