//! The ten acceptance criteria as runnable checks.
//!
//! `Suite::Full` uses the stated sample sizes; `Suite::Fast` runs every
//! criterion on smaller corpora. Each criterion reports its worst measured
//! deviation per check next to the tolerance it is held to.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use sqnm::entropic::{self, continuity_bound, qcmi_raw};
use sqnm::extendibility::{extendibility_cap, symmetric_extension_feasibility, FeasibilityConfig};
use sqnm::linalg;
use sqnm::parties::Parties;
use sqnm::qstate::*;
use sqnm::recovery::{
    best_rotated_recovery, petz_map, recovery_fidelity, rotated_petz_map, universal_recovery_map, RecoveryMap, TGrid,
    UNIVERSAL_POINTS,
};
use sqnm::resource::{
    achievable_rate, converse_rate, monotonicity_audit, monotonicity_audit_with, prepare_cost_bound, rate_report,
    transform_cost_bounds, FreeOperation, Party,
};
use sqnm::squash::{
    candidate_from_extension, extension_objective, flagged_mixture_extension, sandwich_bounds, sqnm_estimate,
    sqnm_estimate_with, trivial_extension, OptimizerConfig, Provenance,
};
use sqnm::states::{self, TriangleIsometries};
use sqnm::{Error, Result};

use crate::descriptor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Fast,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub bound: f64,
    pub relation: Relation,
    pub samples: usize,
    pub pass: bool,
}

impl Check {
    fn at_most(label: &str, measured: f64, bound: f64, samples: usize) -> Self {
        Self { label: label.into(), measured, bound, relation: Relation::AtMost, samples, pass: measured <= bound }
    }

    fn at_least(label: &str, measured: f64, bound: f64, samples: usize) -> Self {
        Self { label: label.into(), measured, bound, relation: Relation::AtLeast, samples, pass: measured >= bound }
    }

    /// Number of failing samples, which must be zero.
    fn count(label: &str, failures: usize, samples: usize) -> Self {
        Self::at_most(label, failures as f64, 0.0, samples)
    }

    fn describe(&self) -> String {
        let op = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        format!("{} {:.3e} {op} {:.0e} [n={}]", self.label, self.measured, self.bound, self.samples)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CriterionOutcome {
    /// One human-readable line.
    pub fn line(&self) -> String {
        let checks: Vec<String> = self.checks.iter().map(Check::describe).collect();
        let mut s = format!(
            "criterion {:>2} {:<28} {} in {:.1}s: {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            checks.join("; ")
        );
        if !self.pass && !self.notes.is_empty() {
            s.push_str(&format!(" ({})", self.notes.join("; ")));
        }
        s
    }
}

pub const NAMES: [&str; 10] = [
    "pure-state identity",
    "pinned values",
    "sandwich invariant",
    "entropic identities",
    "recovery suite",
    "convexity and additivity",
    "continuity",
    "free-operation monotonicity",
    "extendibility",
    "rates and costs",
];

/// Per-suite corpus sizes.
#[derive(Debug, Clone, Copy)]
struct Sizes {
    pure: usize,
    markov: usize,
    sandwich: usize,
    ssa: usize,
    identities: usize,
    maps: usize,
    universal: usize,
    mixtures: usize,
    pairs: usize,
    chains: usize,
    continuity: usize,
    products: usize,
    sweep_seeds: usize,
    sweep_ks: &'static [usize],
    sweep_steps: usize,
    rates: usize,
}

impl Sizes {
    fn of(suite: Suite) -> Self {
        match suite {
            Suite::Full => Self {
                pure: 50,
                markov: 10,
                sandwich: 200,
                ssa: 1000,
                identities: 100,
                maps: 20,
                universal: 200,
                mixtures: 50,
                pairs: 20,
                chains: 50,
                continuity: 50,
                products: 5,
                sweep_seeds: 3,
                sweep_ks: &[2, 3],
                sweep_steps: 12,
                rates: 10,
            },
            Suite::Fast => Self {
                pure: 10,
                markov: 4,
                sandwich: 20,
                ssa: 200,
                identities: 20,
                maps: 5,
                universal: 20,
                mixtures: 8,
                pairs: 4,
                chains: 10,
                continuity: 8,
                products: 2,
                sweep_seeds: 2,
                sweep_ks: &[2],
                sweep_steps: 8,
                rates: 3,
            },
        }
    }
}

struct Ctx {
    sizes: Sizes,
    seed: RngSeed,
}

impl Ctx {
    /// Seed for sample `i` of corpus `tag`.
    fn seed(&self, tag: u64, i: usize) -> RngSeed {
        self.seed.derive(tag).derive(i as u64)
    }
}

/// A small optimizer budget, enough where the criterion does not hinge on
/// the optimum itself.
pub fn reduced_config(seed: RngSeed) -> OptimizerConfig {
    OptimizerConfig { restarts: 1, max_evals_per_restart: 150, e_dims: Some(vec![2, 4]), seed, ..Default::default() }
}

fn abc() -> SystemLayout {
    SystemLayout::new([("A", 2), ("B", 2), ("C", 2)]).expect("layout")
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

fn min_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

pub fn run_criterion(id: u32, suite: Suite, seed: u64) -> CriterionOutcome {
    let ctx = Ctx { sizes: Sizes::of(suite), seed: RngSeed(seed).derive(1000 + id as u64) };
    let start = Instant::now();
    let mut notes = Vec::new();
    let result = match id {
        1 => c1_pure(&ctx),
        2 => c2_pinned(&ctx, &mut notes),
        3 => c3_sandwich(&ctx),
        4 => c4_entropic(&ctx),
        5 => c5_recovery(&ctx),
        6 => c6_constructive(&ctx),
        7 => c7_continuity(&ctx),
        8 => c8_monotonicity(&ctx),
        9 => c9_extendibility(&ctx, &mut notes),
        10 => c10_rates(&ctx),
        _ => Err(Error::OutOfRange(format!("criterion {id}"))),
    };
    let (checks, pass) = match result {
        Ok(checks) => {
            let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
            (checks, pass)
        }
        Err(e) => {
            notes.push(format!("error: {e}"));
            (Vec::new(), false)
        }
    };
    let name = NAMES.get(id as usize - 1).copied().unwrap_or("unknown").to_string();
    CriterionOutcome { id, name, pass, checks, notes, elapsed: start.elapsed() }
}

pub fn run_suite(suite: Suite, seed: u64) -> Vec<CriterionOutcome> {
    (1..=10).map(|id| run_criterion(id, suite, seed)).collect()
}

// Criterion 1: for pure states every extension is a product, so N_sq = I(A;C)/2.

fn c1_pure(ctx: &Ctx) -> Result<Vec<Check>> {
    let n = ctx.sizes.pure;
    let rows: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let psi = random_pure(&abc(), ctx.seed(1, i)).to_density();
            let half = entropic::mutual_information(&psi, &["A"], &["C"])? / 2.0;
            let est = sqnm_estimate(&psi, &reduced_config(ctx.seed(2, i)))?;
            let triv = trivial_extension(&psi, &Parties::default())?.objective(&Parties::default())?;
            Ok(((est.value - half).abs(), (triv - half).abs()))
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        Check::at_most("|estimate - I(A;C)/2|", max_of(rows.iter().map(|r| r.0)), 1e-6, n),
        Check::at_most("|trivial seed - I(A;C)/2|", max_of(rows.iter().map(|r| r.1)), 1e-9, n),
    ])
}

// Criterion 2: values pinned analytically.

fn c2_pinned(ctx: &Ctx, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let cfg = reduced_config(ctx.seed(0, 0));

    let mut bell_dev: f64 = 0.0;
    for (i, (db, rank)) in [(1, 1), (2, 1), (2, 2), (3, 3)].into_iter().enumerate() {
        let b = random_density(&SystemLayout::single("B", db)?, rank, ctx.seed(1, i))?;
        let s = states::with_condition(&states::bell(i % 4)?, &b)?;
        bell_dev = bell_dev.max((sqnm_estimate(&s.state, &cfg)?.value - 1.0).abs());
    }
    checks.push(Check::at_most("bell x rho_B: |v - 1|", bell_dev, 1e-6, 4));

    let me = states::maximally_entangled(3)?;
    let v = sqnm_estimate_with(&me.state, &Parties::bipartite(), &cfg)?.value;
    checks.push(Check::at_most("max_ent d=3: |v - log2 3|", (v - 3f64.log2()).abs(), 1e-6, 1));

    let v = sqnm_estimate(&states::ghz().state, &cfg)?.value;
    checks.push(Check::at_most("ghz: |v - 1/2|", (v - 0.5).abs(), 1e-6, 1));

    let n = ctx.sizes.markov;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let params = json!({"blocks": 1 + i % 3, "left_dim": 1 + i % 2, "right_dim": 1 + (i / 2) % 2, "seed": i});
        let cs = descriptor::generate("markov", params.as_object().expect("object"))
            .map_err(|e| Error::Precondition(e.message))?;
        worst = worst.max(sqnm_estimate(&cs.state, &cfg)?.value);
    }
    checks.push(Check::at_most("markov corpus: v", worst, 1e-9, n));

    let obs = states::observation1_family()?;
    let seed = obs.known.optimal_extension.clone().expect("bundled certificate");
    let v = sqnm_estimate(&obs.state, &OptimizerConfig::seeds_only().with_extra_seed(seed))?.value;
    checks.push(Check::at_most("observation1, bundled seed: v", v, 1e-9, 1));
    // random restarts only: the structured seeds would find the flag answer
    let restarts = OptimizerConfig {
        restarts: 16,
        e_dims: Some(vec![4]),
        structured_seeds: false,
        seed: ctx.seed(3, 0),
        ..Default::default()
    };
    let est = sqnm_estimate(&obs.state, &restarts)?;
    checks.push(Check::at_most("observation1, 16 restarts: v", est.value, 0.02, 1));
    notes.push(format!("observation1 restart estimate {:.6}", est.value));

    let mut worst: f64 = 0.0;
    let triangles = [([0.5, 0.5], false), ([0.8, 0.2], false), ([0.9, 0.1], true), ([0.65, 0.35], true)];
    for (i, (alpha, rotate)) in triangles.iter().enumerate() {
        let a = states::schmidt_state(("A1", "C1"), alpha)?;
        let b = states::schmidt_state(("A2", "B1"), &[0.7, 0.3])?;
        let g = states::schmidt_state(("C2", "B2"), &[0.6, 0.4])?;
        let iso = if *rotate {
            TriangleIsometries {
                a: Some(random_unitary(4, ctx.seed(4, i))?),
                b: Some(random_unitary(4, ctx.seed(5, i))?),
                c: Some(random_unitary(4, ctx.seed(6, i))?),
            }
        } else {
            TriangleIsometries::default()
        };
        let cs = states::triangle_state(&a, &b, &g, &iso)?;
        let sa1 = entropic::binary_entropy(alpha[0])?;
        worst = worst.max((sqnm_estimate(&cs.state, &cfg)?.value - sa1).abs());
    }
    checks.push(Check::at_most("triangle: |v - S(A1)|", worst, 1e-6, triangles.len()));
    Ok(checks)
}

// Criterion 3: every evaluated extension respects max{I(A>C), I(C>A)} <= obj <= min{S(A), S(C)}.

fn c3_sandwich(ctx: &Ctx) -> Result<Vec<Check>> {
    let n = ctx.sizes.sandwich;
    let rows: Vec<(f64, f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let rank = 2 + i % 7;
            let rho = random_density(&abc(), rank, ctx.seed(1, i))?;
            let cfg = OptimizerConfig { record_evaluations: true, ..reduced_config(ctx.seed(2, i)) };
            let est = sqnm_estimate(&rho, &cfg)?;
            let s = sandwich_bounds(&rho, &Parties::default())?;
            let below = max_of(est.evaluations.iter().map(|v| s.lower - v));
            let above = max_of(est.evaluations.iter().map(|v| v - s.upper));
            Ok((below, above, est.evaluations.len()))
        })
        .collect::<Result<_>>()?;
    let evals: usize = rows.iter().map(|r| r.2).sum();
    Ok(vec![
        Check::at_most("lower - objective", max_of(rows.iter().map(|r| r.0)), 1e-9, evals),
        Check::at_most("objective - upper", max_of(rows.iter().map(|r| r.1)), 1e-9, evals),
    ])
}

// Criterion 4: SSA, symmetry, chain rule, data processing.

fn c4_entropic(ctx: &Ctx) -> Result<Vec<Check>> {
    let n = ctx.sizes.ssa;
    let l232 = SystemLayout::new([("A", 2), ("B", 3), ("C", 2)])?;
    let ssa = (0..n)
        .into_par_iter()
        .map(|i| {
            let l = if i % 2 == 0 { abc() } else { l232.clone() };
            let rank = 1 + i % l.total_dim();
            let rho = random_density(&l, rank, ctx.seed(1, i))?;
            qcmi_raw(&rho, &["A"], &["C"], &["B"])
        })
        .collect::<Result<Vec<f64>>>()?;

    let m = ctx.sizes.identities;
    let four = SystemLayout::new([("A", 2), ("A2", 2), ("B", 2), ("C", 2)])?;
    let rows = (0..m)
        .into_par_iter()
        .map(|i| {
            let rho = random_density(&four, 1 + i % 16, ctx.seed(2, i))?;
            let sym = (qcmi_raw(&rho, &["A"], &["C"], &["B"])? - qcmi_raw(&rho, &["C"], &["A"], &["B"])?).abs();
            let chain = (qcmi_raw(&rho, &["A", "A2"], &["C"], &["B"])?
                - qcmi_raw(&rho, &["A2"], &["C"], &["B"])?
                - qcmi_raw(&rho, &["A"], &["C"], &["B", "A2"])?)
            .abs();
            // random channel on A or on C, with a random output dimension
            let three = random_density(&abc(), 1 + i % 8, ctx.seed(3, i))?;
            let target = if i % 2 == 0 { "A" } else { "C" };
            let (d_out, env) = (1 + i % 3, 1 + (i / 3) % 3);
            let env = if d_out * env < 2 { 2 } else { env };
            let v = random_isometry(2, d_out * env, ctx.seed(4, i))?;
            let ch = QuantumChannel::new(SystemLayout::single(target, 2)?, SystemLayout::single(target, d_out)?, v, env)?;
            let out = apply_channel(&three, &ch, &[target])?;
            let dpi = qcmi_raw(&out, &["A"], &["C"], &["B"])? - qcmi_raw(&three, &["A"], &["C"], &["B"])?;
            Ok((sym, chain, dpi))
        })
        .collect::<Result<Vec<(f64, f64, f64)>>>()?;
    Ok(vec![
        Check::at_least("min I(A;C|B)", min_of(ssa.iter().copied()), -1e-9, n),
        Check::at_most("symmetry", max_of(rows.iter().map(|r| r.0)), 1e-9, m),
        Check::at_most("chain rule", max_of(rows.iter().map(|r| r.1)), 1e-9, m),
        Check::at_most("data processing increase", max_of(rows.iter().map(|r| r.2)), 1e-9, m),
    ])
}

// Criterion 5: recovery maps.

fn map_errors(map: &RecoveryMap, rho_bc: &DensityMatrix) -> Result<(f64, f64)> {
    let (neg, tp) = map.base.cptp_deviation();
    let rho_b = reduce_to(rho_bc, &["B"])?;
    let out = align_layout(&map.apply(&rho_b)?, rho_bc.layout())?;
    Ok((neg.max(tp), linalg::max_abs(&(out.matrix() - rho_bc.matrix()))))
}

fn c5_recovery(ctx: &Ctx) -> Result<Vec<Check>> {
    let n = ctx.sizes.maps;
    let bc = SystemLayout::new([("B", 2), ("C", 2)])?;
    let maps = (0..n)
        .into_par_iter()
        .map(|i| {
            let rho = random_density(&bc, 1 + i % 4, ctx.seed(1, i))?;
            let t = -2.0 + 4.0 * (i as f64 + 0.5) / n as f64;
            let mut worst = (0.0f64, 0.0f64);
            for map in [
                petz_map(&rho, &["B"])?,
                rotated_petz_map(&rho, &["B"], t)?,
                universal_recovery_map(&rho, &["B"], UNIVERSAL_POINTS)?,
            ] {
                let (c, r) = map_errors(&map, &rho)?;
                worst = (worst.0.max(c), worst.1.max(r));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let m = ctx.sizes.universal;
    let slack = (0..m)
        .into_par_iter()
        .map(|i| {
            let rho = random_density(&abc(), 1 + i % 8, ctx.seed(2, i))?;
            let bc = reduce_to(&rho, &["B", "C"])?;
            let rep = recovery_fidelity(&rho, &universal_recovery_map(&bc, &["B"], UNIVERSAL_POINTS)?)?;
            Ok(rep.fidelity - (-rep.qcmi).exp2())
        })
        .collect::<Result<Vec<f64>>>()?;

    let k = ctx.sizes.markov;
    let markov = (0..k)
        .into_par_iter()
        .map(|i| {
            let params = json!({"blocks": 1 + i % 3, "left_dim": 1 + i % 2, "right_dim": 2, "seed": 100 + i});
            let cs = descriptor::generate("markov", params.as_object().expect("object"))
                .map_err(|e| Error::Precondition(e.message))?;
            Ok(best_rotated_recovery(&cs.state, &TGrid::default())?.fidelity)
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(vec![
        Check::at_most("CPTP deviation", max_of(maps.iter().map(|r| r.0)), 1e-7, 3 * n),
        Check::at_most("|R(rho_B) - rho_BC|", max_of(maps.iter().map(|r| r.1)), 1e-7, 3 * n),
        Check::at_least("F - 2^-I (universal)", min_of(slack.iter().copied()), -1e-4, m),
        Check::at_least("markov recovery fidelity", min_of(markov.iter().copied()), 1.0 - 1e-6, k),
    ])
}

// Criterion 6: constructive convexity, additivity and chain-rule forms.

fn c6_constructive(ctx: &Ctx) -> Result<Vec<Check>> {
    let p = Parties::default();
    let n = ctx.sizes.mixtures;
    let mixtures = (0..n)
        .into_par_iter()
        .map(|i| {
            let m = 2 + i % 2;
            let raw: Vec<f64> = (0..m).map(|j| 1.0 + ((i * 7 + j * 3) % 5) as f64).collect();
            let total: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let comps = (0..m)
                .map(|j| random_density(&abc(), 1 + (i + j) % 4, ctx.seed(1, i * 4 + j)))
                .collect::<Result<Vec<_>>>()?;
            let ests = comps
                .iter()
                .enumerate()
                .map(|(j, c)| sqnm_estimate(c, &reduced_config(ctx.seed(2, i * 4 + j))))
                .collect::<Result<Vec<_>>>()?;
            let parts: Vec<(f64, _)> = weights.iter().copied().zip(ests.iter().map(|e| &e.certificate)).collect();
            let flagged = flagged_mixture_extension(&parts, &p)?;
            let e_names: Vec<String> = flagged.layout().names()[3..].iter().map(|s| s.to_string()).collect();
            let weighted: f64 = weights.iter().zip(&ests).map(|(w, e)| w * e.value).sum();
            let eq = (extension_objective(&flagged, &p, &e_names)? - weighted).abs();
            let pairs: Vec<(f64, &DensityMatrix)> = weights.iter().copied().zip(comps.iter()).collect();
            let mix = DensityMatrix::mixture(&pairs)?;
            let seed = candidate_from_extension(&mix, &p, &flagged, Provenance::User)?;
            let est = sqnm_estimate(&mix, &reduced_config(ctx.seed(3, i)).with_extra_seed(seed))?;
            Ok((eq, est.value - weighted))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let k = ctx.sizes.pairs;
    let additivity = (0..k)
        .into_par_iter()
        .map(|i| tensor_pair(ctx, i))
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let c = ctx.sizes.chains;
    let seven = SystemLayout::new([("A", 2), ("A2", 2), ("B", 2), ("B2", 2), ("C", 2), ("C2", 2), ("E", 2)])?;
    let chains = (0..c)
        .into_par_iter()
        .map(|i| {
            let x = random_density(&seven, 1 + i % 6, ctx.seed(5, i))?;
            let q = |a: &[&str], cc: &[&str], b: &[&str]| qcmi_raw(&x, a, cc, b);
            // super-additivity: I(AA';CC'|BB'E) = I(A;CC'|BB'EA') + I(A';CC'|BB'E)
            let joint = q(&["A", "A2"], &["C", "C2"], &["B", "B2", "E"])?;
            let first = q(&["A"], &["C", "C2"], &["B", "B2", "E", "A2"])?;
            let second = q(&["A2"], &["C", "C2"], &["B", "B2", "E"])?;
            let split = (joint - first - second).abs();
            let drop1 = q(&["A"], &["C"], &["B", "B2", "E", "A2"])? - first;
            let drop2 = q(&["A2"], &["C2"], &["B", "B2", "E"])? - second;
            // monogamy: I(AA';C|BE) = I(A;C|BEA') + I(A';C|BE)
            let mono = (q(&["A", "A2"], &["C"], &["B", "E"])?
                - q(&["A"], &["C"], &["B", "E", "A2"])?
                - q(&["A2"], &["C"], &["B", "E"])?)
            .abs();
            Ok((split, drop1.max(drop2), mono))
        })
        .collect::<Result<Vec<(f64, f64, f64)>>>()?;

    Ok(vec![
        Check::at_most("flag convexity equality", max_of(mixtures.iter().map(|r| r.0)), 1e-9, n),
        Check::at_most("mixture estimate - weighted sum", max_of(mixtures.iter().map(|r| r.1)), 1e-6, n),
        Check::at_most("|product certificate - sum|", max_of(additivity.iter().map(|r| r.0)), 1e-6, k),
        Check::at_most("tensor estimate - sum", max_of(additivity.iter().map(|r| r.1)), 1e-6, k),
        Check::at_most("super-additivity split", max_of(chains.iter().map(|r| r.0)), 1e-9, c),
        Check::at_most("super-additivity drop", max_of(chains.iter().map(|r| r.1)), 1e-9, c),
        Check::at_most("monogamy split", max_of(chains.iter().map(|r| r.2)), 1e-9, c),
    ])
}

/// Certificates of ρ and ρ′ tensored into one for ρ ⊗ ρ′; returns
/// (|objective − sum|, seeded estimate − sum).
fn tensor_pair(ctx: &Ctx, i: usize) -> Result<(f64, f64)> {
    let cfg = OptimizerConfig { e_dims: Some(vec![2]), ..reduced_config(ctx.seed(4, i)) };
    let r1 = random_density(&abc(), 2, ctx.seed(3, 2 * i))?;
    let r2 = random_density(&abc(), 2, ctx.seed(3, 2 * i + 1))?;
    let e1 = sqnm_estimate(&r1, &cfg)?;
    let e2 = sqnm_estimate(&r2, &cfg)?;
    let rename = |c: &sqnm::squash::ExtensionCandidate, suffix: &str| -> Result<DensityMatrix> {
        let names: Vec<String> = c.extended_state.layout().names().iter().map(|n| format!("{n}{suffix}")).collect();
        c.extended_state.relabel(&names)
    };
    let x1 = rename(&e1.certificate, "")?;
    let x2 = rename(&e2.certificate, "2")?;
    let rho2 = r2.relabel(&["A2", "B2", "C2"])?;
    let joint = tensor_product(&r1, &rho2)?;
    let ext = tensor_product(&x1, &x2)?;
    let parties = Parties::new(&["A", "A2"], &["B", "B2"], &["C", "C2"]);
    let seed = candidate_from_extension(&joint, &parties, &ext, Provenance::User)?;
    let sum = e1.value + e2.value;
    let product_obj = seed.objective(&parties)?;
    let joint_cfg = OptimizerConfig { structured_seeds: false, ..OptimizerConfig::seeds_only() }.with_extra_seed(seed);
    let est = sqnm_estimate_with(&joint, &parties, &joint_cfg)?;
    Ok(((product_obj - sum).abs(), est.value - sum))
}

// Criterion 7: continuity: one certificate channel applied to aligned purifications.

fn c7_continuity(ctx: &Ctx) -> Result<Vec<Check>> {
    let n = ctx.sizes.continuity;
    let eps = [1e-3, 1e-2, 1e-1];
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let rho = random_density(&abc(), 8, ctx.seed(1, i))?;
            let est = sqnm_estimate(&rho, &reduced_config(ctx.seed(2, i)))?;
            let p = Parties::default();
            let psi = purify(&rho, "R")?;
            let r = psi.layout().dim_of("R")?;
            let ch = est.certificate.channel.with_layouts(
                SystemLayout::single("R", r)?,
                est.certificate.channel.out_layout().clone(),
            )?;
            let e_names = est.certificate.e_names();
            let ext_rho = apply_channel(&psi.to_density(), &ch, &["R"])?;
            let obj_rho = extension_objective(&ext_rho, &p, &e_names)?;
            let cert_dev = (obj_rho - est.value).abs();
            let mut worst: f64 = f64::NEG_INFINITY;
            let mut marg: f64 = 0.0;
            for (j, &e) in eps.iter().enumerate() {
                let sigma = perturb(&rho, e, ctx.seed(3, i * 3 + j))?;
                let phi = align_purifications(&psi, &purify(&sigma, "R")?, "R")?;
                let ext_sigma = apply_channel(&phi.to_density(), &ch, &["R"])?;
                let back = reduce_to(&ext_sigma, &["A", "B", "C"])?;
                marg = marg.max(linalg::max_abs(&(back.matrix() - sigma.matrix())));
                let obj_sigma = extension_objective(&ext_sigma, &p, &e_names)?;
                // f bounds the QCMI difference, i.e. twice the objective difference
                let f = continuity_bound(e, 2, 2)?;
                worst = worst.max(2.0 * (obj_rho - obj_sigma).abs() - f);
            }
            Ok((worst, cert_dev, marg))
        })
        .collect::<Result<Vec<(f64, f64, f64)>>>()?;
    let samples = n * eps.len();
    Ok(vec![
        Check::at_most("2|d objective| - f(eps)", rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max), 1e-6, samples),
        Check::at_most("certificate recomputation", max_of(rows.iter().map(|r| r.1)), 1e-9, n),
        Check::at_most("transported marginal error", max_of(rows.iter().map(|r| r.2)), 1e-9, samples),
    ])
}

/// σ = (1−λ)ρ + λτ with ½‖ρ − σ‖₁ = eps exactly.
fn perturb(rho: &DensityMatrix, eps: f64, seed: RngSeed) -> Result<DensityMatrix> {
    for k in 0..16 {
        let tau = random_density(rho.layout(), rho.dim(), seed.derive(k))?;
        let t = trace_distance(rho, &tau)?;
        if t > eps {
            let lambda = eps / t;
            return DensityMatrix::mixture(&[(1.0 - lambda, rho), (lambda, &tau)]);
        }
    }
    Err(Error::Degenerate("no perturbation direction found".into()))
}

// Criterion 8: monotonicity audits.

fn c8_monotonicity(ctx: &Ctx) -> Result<Vec<Check>> {
    let cfg = reduced_config(ctx.seed(0, 0));
    let p = Parties::default();
    let q1 = |name: &str| SystemLayout::single(name, 2);
    let mut fixed_worst = f64::NEG_INFINITY;
    let mut est_worst = f64::NEG_INFINITY;
    let mut steps = 0;
    let mut record = |rep: &sqnm::resource::AuditReport| {
        for s in &rep.steps {
            fixed_worst = fixed_worst.max(s.fixed_after - s.fixed_before);
            est_worst = est_worst.max(s.estimate_after - s.estimate_before);
        }
        steps += rep.steps.len();
    };

    let bell_b = states::with_condition(&states::bell(0)?, &random_density(&q1("B")?, 2, ctx.seed(1, 0))?)?.state;
    let inputs = [bell_b, random_density(&abc(), 8, ctx.seed(1, 1))?, random_density(&abc(), 3, ctx.seed(1, 2))?];
    let ladder = [0.1, 0.25, 0.5, 1.0];
    for rho in &inputs {
        let mut ops = Vec::new();
        for party in [Party::A, Party::C] {
            let name = if party == Party::A { "A" } else { "C" };
            for &pd in &ladder {
                ops.push(FreeOperation::LocalChannel { party, channel: QuantumChannel::depolarizing(q1(name)?, pd)? });
            }
        }
        record(&monotonicity_audit(rho, &p, &ops, &cfg)?);
    }

    // channels on B
    for (i, rho) in inputs.iter().enumerate() {
        let ops = (0..3)
            .map(|k| -> Result<FreeOperation> {
                let v = random_isometry(2, 2 * (1 + k), ctx.seed(2, i * 3 + k))?;
                Ok(FreeOperation::LocalChannel { party: Party::B, channel: QuantumChannel::new(q1("B")?, q1("B")?, v, 1 + k)? })
            })
            .collect::<Result<Vec<_>>>()?;
        record(&monotonicity_audit(rho, &p, &ops, &cfg)?);
    }

    // moves of a subsystem of A or C into B
    let four = SystemLayout::new([("A", 2), ("A2", 2), ("B", 2), ("C", 2), ("C2", 2)])?;
    let big = random_density(&four, 4, ctx.seed(3, 0))?;
    let pp = Parties::new(&["A", "A2"], &["B"], &["C", "C2"]);
    let moves = vec![
        FreeOperation::MoveSubsystem { from: Party::A, to: Party::B, system: "A2".into() },
        FreeOperation::MoveSubsystem { from: Party::C, to: Party::B, system: "C2".into() },
    ];
    record(&monotonicity_audit(&big, &pp, &moves, &cfg)?);

    // unitaries on B: the certificate value and the seeded estimate stay put
    let mut inv_fixed: f64 = 0.0;
    let mut inv_est: f64 = 0.0;
    let mut inv_steps = 0;
    for (i, rho) in inputs.iter().enumerate() {
        let ops = (0..3)
            .map(|k| -> Result<FreeOperation> {
                let u = random_unitary(2, ctx.seed(4, i * 3 + k))?;
                Ok(FreeOperation::LocalChannel { party: Party::B, channel: QuantumChannel::unitary(q1("B")?, u)? })
            })
            .collect::<Result<Vec<_>>>()?;
        let rep = monotonicity_audit_with(rho, &p, &ops, &cfg, &OptimizerConfig::seeds_only())?;
        for s in &rep.steps {
            inv_fixed = inv_fixed.max((s.fixed_after - s.fixed_before).abs());
            inv_est = inv_est.max((s.estimate_after - s.estimate_before).abs());
        }
        inv_steps += rep.steps.len();
    }

    // B → C is signalling out of the condition
    let bad = [FreeOperation::MoveSubsystem { from: Party::B, to: Party::C, system: "B".into() }];
    let rejected = matches!(monotonicity_audit(&inputs[1], &p, &bad, &cfg), Err(Error::NotFree(_)));
    let also = FreeOperation::MoveSubsystem { from: Party::A, to: Party::C, system: "A".into() }.check_free(&p).is_err();

    Ok(vec![
        Check::at_most("fixed-extension increase", fixed_worst, 1e-9, steps),
        Check::at_most("seeded estimate increase", est_worst, 1e-6, steps),
        Check::at_most("B-unitary |d fixed|", inv_fixed, 1e-6, inv_steps),
        Check::at_most("B-unitary |d estimate|", inv_est, 1e-6, inv_steps),
        Check::count("non-free moves accepted", usize::from(!rejected) + usize::from(!also), 2),
    ])
}

// Criterion 9: extendibility.

fn c9_extendibility(ctx: &Ctx, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let cfg = FeasibilityConfig::default();
    let bell = states::bell(0)?.state;
    let rep = symmetric_extension_feasibility(&bell, "C", 2, &cfg)?;
    let mut checks = vec![
        Check::count("bell k=2 reported feasible", usize::from(rep.feasible), 1),
        Check::at_least("bell k=2 residual", rep.residual, 1e-3, 1),
    ];

    let mut certified: Vec<(DensityMatrix, usize)> = Vec::new();
    let mut prod_res: f64 = 0.0;
    let mut prod_fail = 0;
    let np = ctx.sizes.products;
    for i in 0..np {
        let ra = random_density(&SystemLayout::single("A", 2)?, 1 + i % 2, ctx.seed(1, i))?;
        let rc = random_density(&SystemLayout::single("C", 2)?, 1 + (i / 2) % 2, ctx.seed(2, i))?;
        let prod = tensor_product(&ra, &rc)?;
        for k in 2..=4 {
            let rep = symmetric_extension_feasibility(&prod, "C", k, &cfg)?;
            prod_res = prod_res.max(rep.residual);
            if rep.feasible {
                certified.push((prod.clone(), k));
            } else {
                prod_fail += 1;
            }
        }
    }
    checks.push(Check::count("products not certified (k<=4)", prod_fail, 3 * np));
    checks.push(Check::at_most("product residual", prod_res, 1e-7, 3 * np));

    // isotropic sweeps: bisection on p from the seedless start and from random starts
    let mut spread_worst: f64 = 0.0;
    for &k in ctx.sizes.sweep_ks {
        let mut thresholds = Vec::new();
        for s in 0..ctx.sizes.sweep_seeds {
            let seed = if s == 0 { None } else { Some(ctx.seed(3, k * 10 + s)) };
            let fc = FeasibilityConfig { seed, ..cfg.clone() };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..ctx.sizes.sweep_steps {
                let mid = 0.5 * (lo + hi);
                let rho = states::isotropic(2, mid)?.state;
                if symmetric_extension_feasibility(&rho, "C", k, &fc)?.feasible {
                    certified.push((rho, k));
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            thresholds.push(0.5 * (lo + hi));
        }
        let spread = max_of(thresholds.iter().copied()) - min_of(thresholds.iter().copied());
        spread_worst = spread_worst.max(spread);
        // isotropic qubit pairs are k-extendible iff p <= (k + 2)/(3k)
        let exact = (k as f64 + 2.0) / (3.0 * k as f64);
        notes.push(format!(
            "isotropic k={k} thresholds {:?} (known {exact:.4})",
            thresholds.iter().map(|t| (t * 1e4).round() / 1e4).collect::<Vec<_>>()
        ));
    }
    checks.push(Check::at_most("isotropic threshold spread", spread_worst, 0.02, ctx.sizes.sweep_ks.len()));

    let mut chain = f64::NEG_INFINITY;
    for (rho, k) in &certified {
        let lower = sandwich_bounds(rho, &Parties::bipartite())?.lower;
        chain = chain.max(lower - extendibility_cap(2, *k)?);
    }
    checks.push(Check::at_most("coherent info - log2|A|/k", chain, 1e-9, certified.len()));
    Ok(checks)
}

// Criterion 10: rates and costs.

fn c10_rates(ctx: &Ctx) -> Result<Vec<Check>> {
    let cfg = reduced_config(ctx.seed(0, 0));
    let n = ctx.sizes.rates;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut recompute: f64 = 0.0;
            let schmidt = |j: usize| -> Result<DensityMatrix> {
                let d = 2 + (i + j) % 2;
                let mut rng = (i * 31 + j * 17 + 5) as f64;
                let raw: Vec<f64> = (0..d)
                    .map(|_| {
                        rng = (rng * 1.618_033_988_75).fract() + 0.1;
                        rng
                    })
                    .collect();
                let t: f64 = raw.iter().sum();
                let probs: Vec<f64> = raw.iter().map(|x| x / t).collect();
                Ok(states::schmidt_state(("A", "C"), &probs)?.to_density())
            };
            let (a, b) = (schmidt(0)?, schmidt(1)?);
            let rep = rate_report(&a, &b, &cfg)?;
            let rc = rep.converse.as_ref().map(|c| c.rate).unwrap_or(f64::INFINITY);
            let ex1 = (rep.achievable.rate - rc).abs();
            recompute = recompute.max(rep.recompute_error());

            let m1 = random_density(&abc(), 1 + i % 8, ctx.seed(1, i))?;
            let m2 = random_density(&abc(), 1 + (i + 3) % 8, ctx.seed(2, i))?;
            recompute = recompute.max(rate_report(&m1, &m2, &cfg)?.recompute_error());
            recompute = recompute.max(prepare_cost_bound(&m1, &cfg)?.recompute_error());
            let t = transform_cost_bounds(&m1, &m2, &cfg)?;
            recompute = recompute.max(t.recompute_error());
            let same = transform_cost_bounds(&m1, &m1, &cfg)?;
            recompute = recompute.max(same.recompute_error()).max(same.transform_necessary.unwrap_or(f64::INFINITY));
            Ok((ex1, recompute))
        })
        .collect::<Result<Vec<_>>>()?;
    let ex1 = max_of(rows.iter().map(|r| r.0));
    let recompute = max_of(rows.iter().map(|r| r.1));
    let k = ctx.sizes.markov;
    let markov = (0..k)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let params = json!({"blocks": 1 + i % 2, "seed": 200 + i});
            let target = descriptor::generate("markov", params.as_object().expect("object"))
                .map_err(|e| Error::Precondition(e.message))?
                .state;
            let source = random_density(&abc(), 8, ctx.seed(3, i))?;
            let errs = matches!(converse_rate(&source, &target, &cfg), Err(Error::Degenerate(_)));
            let reported = rate_report(&source, &target, &cfg)?.converse_error.is_some();
            let still_achievable = achievable_rate(&source, &target).is_ok();
            Ok(errs && reported && still_achievable)
        })
        .collect::<Result<Vec<bool>>>()?;
    let markov_ok = markov.iter().filter(|ok| **ok).count();
    Ok(vec![
        Check::at_most("pure |R_A - R_C|", ex1, 1e-6, n),
        Check::at_most("recompute error", recompute, 0.0, 5 * n),
        Check::count("markov targets not rejected", k - markov_ok, k),
    ])
}
