//! Riemannian descent over Stinespring isometries with seeded and random
//! starts, merged deterministically.

use rayon::prelude::*;

use super::objective::Problem;
use super::{
    classical_flag_extension, extended_state_from_isometry, fresh_name, party_marginal, purification_extension,
    purification_matrix, trivial_extension, ExtensionCandidate, Provenance,
};
use crate::entropic::Bits;
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat};
use crate::parties::Parties;
use crate::qstate::{random_isometry, DensityMatrix, QuantumChannel, RngSeed, SystemLayout};

/// Values within this window of the minimum count as ties.
pub const TIE_WINDOW: f64 = 1e-6;
/// A seed whose QCMI is below this is reported as exactly 0.
pub const EXACT_SEED: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_evals_per_restart: usize,
    /// Extension dimensions to sweep; `None` means 1..=min(8, |ABC|), an empty
    /// list evaluates the seeds only.
    pub e_dims: Option<Vec<usize>>,
    /// Cap on the Stinespring environment G of each random start.
    pub g_cap: usize,
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo: f64,
    pub grad_tol: f64,
    /// Relative decrease below which an iteration counts as stalled.
    pub stall_tol: f64,
    pub seed: RngSeed,
    pub extra_seeds: Vec<ExtensionCandidate>,
    /// Include the eigenbasis-flag and full-purification seeds.
    pub structured_seeds: bool,
    /// Run local descent from every seed as well.
    pub refine_seeds: bool,
    /// Keep every evaluated objective value (halved) in the estimate.
    pub record_evaluations: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_evals_per_restart: 1000,
            e_dims: None,
            g_cap: 16,
            initial_step: 0.5,
            shrink: 0.5,
            armijo: 1e-4,
            grad_tol: 1e-7,
            stall_tol: 1e-12,
            seed: RngSeed(0),
            extra_seeds: Vec::new(),
            structured_seeds: true,
            refine_seeds: true,
            record_evaluations: false,
        }
    }
}

impl OptimizerConfig {
    /// Seeds only: no random restarts and no descent.
    pub fn seeds_only() -> Self {
        Self { e_dims: Some(Vec::new()), refine_seeds: false, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: RngSeed) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_extra_seed(mut self, c: ExtensionCandidate) -> Self {
        self.extra_seeds.push(c);
        self
    }

    pub fn e_dims_for(&self, base_dim: usize) -> Vec<usize> {
        match &self.e_dims {
            Some(v) => v.iter().copied().filter(|&e| e >= 1 && e <= base_dim).collect(),
            None => (1..=base_dim.min(8)).collect(),
        }
    }
}

/// One start of the search.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub index: usize,
    pub e_dim: usize,
    pub provenance: Provenance,
    /// Objective at the start (halved QCMI).
    pub initial: Bits,
    /// Objective of the returned candidate (halved QCMI).
    pub value: Bits,
    pub evals: usize,
    pub converged: bool,
    pub candidate: ExtensionCandidate,
}

#[derive(Debug, Clone)]
pub struct Estimate {
    /// Upper bound on the infimum (bits).
    pub value: Bits,
    pub certificate: ExtensionCandidate,
    pub trace: Vec<RunSummary>,
    pub converged: bool,
    /// The value was pinned to 0 by a seed with vanishing QCMI.
    pub exact_seed: bool,
    pub best_by_e_dim: Vec<(usize, Bits)>,
    pub evaluations: Vec<Bits>,
    pub parties: Parties,
}

impl Estimate {
    /// The best value improved (beyond the tie window) only at the largest
    /// extension dimension tried.
    pub fn improved_at_largest_e(&self) -> bool {
        let Some(&(last_e, last_v)) = self.best_by_e_dim.last() else { return false };
        let rest = self
            .best_by_e_dim
            .iter()
            .filter(|(e, _)| *e < last_e)
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min);
        rest.is_finite() && last_v < rest - TIE_WINDOW
    }
}

struct DescentResult {
    v: CMat,
    evals: usize,
    converged: bool,
    history: Vec<f64>,
}

fn riemannian(v: &CMat, g: &CMat) -> CMat {
    let vg = v.adjoint() * g;
    let herm = linalg::hermitian_part(&vg);
    g - v * herm
}

fn re_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn descend(pr: &Problem, v0: CMat, e: usize, cfg: &OptimizerConfig) -> DescentResult {
    let budget = cfg.max_evals_per_restart.max(1);
    let mut history = Vec::new();
    let record = cfg.record_evaluations;
    let mut v = v0;
    let (mut f, grad) = pr.value_grad(&v, e);
    let mut evals = 1;
    if record {
        history.push(f);
    }
    let mut rg = riemannian(&v, &grad);
    let mut step = cfg.initial_step;
    let mut stalls = 0;
    let mut converged = false;
    loop {
        let gn2 = re_inner(&rg, &rg);
        if gn2.sqrt() < cfg.grad_tol {
            converged = true;
            break;
        }
        if evals >= budget {
            break;
        }
        let mut s = step;
        let mut accepted = None;
        while evals < budget {
            let vt = linalg::orthonormalize(&(&v - &rg * cr(s)));
            let ft = pr.value(&vt, e);
            evals += 1;
            if record {
                history.push(ft);
            }
            if ft <= f - cfg.armijo * s * gn2 {
                accepted = Some((vt, ft));
                break;
            }
            s *= cfg.shrink;
            if s < 1e-14 {
                break;
            }
        }
        let Some((vt, ft)) = accepted else {
            // no admissible step left: stationary to working precision
            converged = evals < budget;
            break;
        };
        if evals >= budget {
            v = vt;
            break;
        }
        let (_, gt) = pr.value_grad(&vt, e);
        evals += 1;
        if record {
            history.push(ft);
        }
        let rgt = riemannian(&vt, &gt);
        let sv = &vt - &v;
        let yv = &rgt - &rg;
        let sy = re_inner(&sv, &yv);
        step = if sy > 0.0 { (re_inner(&sv, &sv) / sy).clamp(1e-6, 1e3) } else { (2.0 * s).min(1e3) };
        let dec = f - ft;
        v = vt;
        f = ft;
        rg = rgt;
        if dec <= cfg.stall_tol * (1.0 + f.abs()) {
            stalls += 1;
            if stalls >= 5 {
                converged = true;
                break;
            }
        } else {
            stalls = 0;
        }
    }
    DescentResult { v, evals, converged, history }
}

enum Start {
    Seed(ExtensionCandidate),
    Random { restart: usize },
}

struct Task {
    index: usize,
    e: usize,
    g: usize,
    start: Start,
}

struct Context<'a> {
    base: DensityMatrix,
    parties: &'a Parties,
    problem: Problem,
    m: CMat,
    e_name: String,
}

fn axes(layout: &SystemLayout, names: &[String]) -> Result<Vec<usize>> {
    layout.indices_of(names)
}

/// Minimize I(A;C|BE)/2 over extensions of the party marginal of `rho`.
pub fn sqnm_estimate_with(rho: &DensityMatrix, parties: &Parties, cfg: &OptimizerConfig) -> Result<Estimate> {
    let base = party_marginal(rho, parties)?;
    let pur = purification_matrix(&base);
    let r = pur.vals.len();
    let layout = base.layout().clone();
    let problem = Problem::new(
        pur.m.clone(),
        layout.dims(),
        axes(&layout, &parties.a)?,
        axes(&layout, &parties.c)?,
        axes(&layout, &parties.b)?,
    );
    let ctx = Context { e_name: fresh_name(&layout, "E"), base, parties, problem, m: pur.m };

    let mut seeds = vec![trivial_extension(rho, parties)?];
    if cfg.structured_seeds {
        seeds.push(classical_flag_extension(rho, parties)?);
        seeds.push(purification_extension(rho, parties)?);
    }
    for s in &cfg.extra_seeds {
        if s.channel.in_layout().total_dim() != r {
            return Err(Error::DimensionMismatch(format!(
                "seed channel input {} but purification rank {}",
                s.channel.in_layout().total_dim(),
                r
            )));
        }
        seeds.push(s.clone());
    }
    let mut tasks: Vec<Task> = seeds
        .into_iter()
        .enumerate()
        .map(|(i, s)| Task { index: i, e: s.e_dim, g: s.channel.env_dim(), start: Start::Seed(s) })
        .collect();
    let n_seeds = tasks.len();
    for e in cfg.e_dims_for(ctx.base.dim()) {
        let g = (r * e).min(cfg.g_cap).max(r.div_ceil(e));
        for restart in 0..cfg.restarts {
            tasks.push(Task { index: tasks.len(), e, g, start: Start::Random { restart } });
        }
    }

    let results: Vec<Result<(RunSummary, Vec<f64>)>> = tasks.par_iter().map(|t| run_task(&ctx, t, cfg, r)).collect();
    let mut trace = Vec::with_capacity(results.len());
    let mut evaluations = Vec::new();
    for res in results {
        let (run, hist) = res?;
        evaluations.extend(hist.into_iter().map(|f| f / 2.0));
        trace.push(run);
    }

    let exact = trace[..n_seeds].iter().find(|run| 2.0 * run.initial <= EXACT_SEED);
    let (value, certificate, converged, exact_seed) = if let Some(run) = exact {
        let cand = match &tasks[run.index].start {
            Start::Seed(c) => c.clone(),
            Start::Random { .. } => unreachable!(),
        };
        (0.0, cand, true, true)
    } else {
        let min = trace.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
        let win = trace
            .iter()
            .filter(|r| r.value <= min + TIE_WINDOW)
            .min_by_key(|r| (r.e_dim, r.index))
            .expect("at least the trivial seed");
        (win.value, win.candidate.clone(), win.converged, false)
    };

    let mut best_by_e_dim: Vec<(usize, Bits)> = Vec::new();
    for run in &trace {
        match best_by_e_dim.iter_mut().find(|(e, _)| *e == run.e_dim) {
            Some(entry) => entry.1 = entry.1.min(run.value),
            None => best_by_e_dim.push((run.e_dim, run.value)),
        }
    }
    best_by_e_dim.sort_by_key(|(e, _)| *e);

    Ok(Estimate {
        value,
        certificate,
        trace,
        converged,
        exact_seed,
        best_by_e_dim,
        evaluations,
        parties: parties.clone(),
    })
}

fn run_task(ctx: &Context<'_>, t: &Task, cfg: &OptimizerConfig, r: usize) -> Result<(RunSummary, Vec<f64>)> {
    let (v0, provenance, e_layout, initial_candidate) = match &t.start {
        Start::Seed(c) => (c.channel.isometry().clone(), c.provenance.clone(), c.channel.out_layout().clone(), Some(c)),
        Start::Random { restart } => {
            let seed = cfg.seed.derive(t.e as u64).derive(*restart as u64);
            let v = random_isometry(r, t.e * t.g, seed)?;
            (v, Provenance::RandomRestart(t.index), SystemLayout::single(&ctx.e_name, t.e)?, None)
        }
    };
    let initial = match initial_candidate {
        Some(c) => c.objective(ctx.parties)?,
        None => ctx.problem.value(&v0, t.e) / 2.0,
    };
    let refine = matches!(t.start, Start::Random { .. }) || cfg.refine_seeds;
    if !refine {
        let c = initial_candidate.expect("seed").clone();
        let hist = if cfg.record_evaluations { vec![2.0 * initial] } else { Vec::new() };
        let run = RunSummary {
            index: t.index,
            e_dim: t.e,
            provenance,
            initial,
            value: initial,
            evals: 1,
            converged: true,
            candidate: c,
        };
        return Ok((run, hist));
    }
    let d = descend(&ctx.problem, v0.clone(), t.e, cfg);
    let mut candidate = candidate_from_isometry(ctx, &d.v, t.e, t.g, &e_layout, provenance.clone())?;
    let mut value = candidate.objective(ctx.parties)?;
    if let Some(c) = initial_candidate {
        // descent never increases the objective, but keep the exact seed on ties
        if initial <= value {
            candidate = c.clone();
            value = initial;
        } else {
            candidate.provenance = Provenance::SeededFrom(Box::new(provenance.clone()));
        }
    }
    let run = RunSummary {
        index: t.index,
        e_dim: t.e,
        provenance,
        initial,
        value,
        evals: d.evals,
        converged: d.converged,
        candidate,
    };
    Ok((run, d.history))
}

fn candidate_from_isometry(
    ctx: &Context<'_>,
    v: &CMat,
    e: usize,
    g: usize,
    e_layout: &SystemLayout,
    provenance: Provenance,
) -> Result<ExtensionCandidate> {
    let r = v.ncols();
    let ext = extended_state_from_isometry(&ctx.base, &ctx.m, v, e, g, e_layout)?;
    let channel = QuantumChannel::from_isometry_unchecked(
        SystemLayout::single(&fresh_name(e_layout, "R"), r)?,
        e_layout.clone(),
        v.clone(),
        g,
    );
    Ok(ExtensionCandidate { channel, extended_state: ext, e_dim: e, provenance })
}

/// sQNM estimate with the standard parties A | B | C.
pub fn sqnm_estimate(rho: &DensityMatrix, cfg: &OptimizerConfig) -> Result<Estimate> {
    sqnm_estimate_with(rho, &Parties::default(), cfg)
}

/// Variational upper bound on E_sq(A;C) = ½ inf I(A;C|F).
pub fn squashed_entanglement_estimate(
    rho: &DensityMatrix,
    a: &[&str],
    c: &[&str],
    cfg: &OptimizerConfig,
) -> Result<Estimate> {
    sqnm_estimate_with(rho, &Parties::new(a, &[], c), cfg)
}
