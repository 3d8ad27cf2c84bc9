//! Command definitions and their implementations.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use sqnm::entropic;
use sqnm::extendibility::{extendibility_cap, symmetric_extension_feasibility, two_sided_cap, FeasibilityConfig};
use sqnm::parties::Parties;
use sqnm::qstate::{DensityMatrix, RngSeed};
use sqnm::resource::{monotonicity_audit, prepare_cost_bound, rate_report, transform_cost_bounds};
use sqnm::squash::{
    candidate_from_extension, lemma1_bounds, sandwich_bounds, sqnm_estimate_with, OptimizerConfig, Provenance,
};

use crate::criteria::{self, Suite};
use crate::descriptor::{self, LoadedState};
use crate::report::{estimate_json, estimate_summary, sig12, Report};
use crate::{ops, CliError, CliResult, Exit};

#[derive(Debug, Parser)]
#[command(name = "sqnm", version, about = "Squashed quantum non-Markovianity toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropic quantities of a state.
    Compute {
        state: PathBuf,
        /// entropy:A,B  mi:A|C  qcmi  qcmi:A|C|B  coherent:A>C
        #[arg(short, long = "quantity", required = true, value_delimiter = ' ')]
        q: Vec<String>,
    },
    /// Variational sQNM estimate with its bounds.
    Sqnm {
        state: PathBuf,
        #[command(flatten)]
        opt: OptArgs,
        /// Extended state (descriptor file) used as an extra seed.
        #[arg(long)]
        seed_extension: Option<PathBuf>,
        /// k values at which to try extendibility caps.
        #[arg(long = "ext-k", value_delimiter = ',', default_value = "2,3")]
        ext_k: Vec<usize>,
    },
    /// Symmetric-extension search in one system.
    Extendibility {
        state: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "C")]
        system: String,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        /// Random initial point instead of the product start.
        #[arg(long)]
        init_seed: Option<u64>,
        /// Also report the two-sided cap with this k on the other system.
        #[arg(long)]
        k_other: Option<usize>,
    },
    /// Converse and achievable conversion rates from one state to another.
    Rates {
        source: PathBuf,
        target: PathBuf,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Communication-cost bounds: preparation, or transformation to a second state.
    Cost {
        state: PathBuf,
        target: Option<PathBuf>,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Apply free operations in order and check monotonicity after each.
    Audit {
        state: PathBuf,
        ops: PathBuf,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Run the acceptance criteria.
    Selftest {
        #[arg(long, value_enum, default_value = "fast")]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

#[derive(Debug, Args, Clone)]
pub struct OptArgs {
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    /// Extension dimensions, e.g. 1,2,4.
    #[arg(long, value_delimiter = ',')]
    pub edims: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Objective evaluations per restart.
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,
}

impl OptArgs {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            restarts: self.restarts,
            max_evals_per_restart: self.budget,
            e_dims: (!self.edims.is_empty()).then(|| self.edims.clone()),
            seed: RngSeed(self.seed),
            ..Default::default()
        }
    }

    fn json(&self) -> Value {
        json!({"restarts": self.restarts, "edims": self.edims, "budget": self.budget})
    }
}

pub struct Outcome {
    pub report: Report,
    pub exit: Exit,
}

impl Outcome {
    fn ok(report: Report) -> Self {
        Self { report, exit: Exit::Ok }
    }
}

fn load(path: &PathBuf) -> CliResult<LoadedState> {
    descriptor::load_file(&path.to_string_lossy())
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    match &cli.command {
        Command::Compute { state, q } => compute(state, q),
        Command::Sqnm { state, opt, seed_extension, ext_k } => sqnm(state, opt, seed_extension.as_ref(), ext_k),
        Command::Extendibility { state, k, system, tol, max_iter, init_seed, k_other } => {
            extendibility(state, *k, system, *tol, *max_iter, *init_seed, *k_other)
        }
        Command::Rates { source, target, opt } => rates(source, target, opt),
        Command::Cost { state, target, opt } => cost(state, target.as_ref(), opt),
        Command::Audit { state, ops, opt } => audit(state, ops, opt),
        Command::Selftest { suite, seed, only } => selftest(*suite, *seed, only),
    }
}

fn systems(list: &str) -> Vec<&str> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn quantity(st: &LoadedState, q: &str) -> CliResult<f64> {
    let rho = &st.state;
    let p = &st.parties;
    let bad = || CliError::input(format!("unknown quantity {q:?}"));
    let (kind, arg) = q.split_once(':').unwrap_or((q, ""));
    let v = match kind {
        "entropy" | "S" => entropic::entropy(rho, &systems(arg))?,
        "mi" => {
            let (a, c) = arg.split_once('|').ok_or_else(bad)?;
            entropic::mutual_information(rho, &systems(a), &systems(c))?
        }
        "qcmi" if arg.is_empty() => entropic::qcmi(rho, &p.a, &p.c, &p.b)?,
        "qcmi" => {
            let parts: Vec<&str> = arg.split('|').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            entropic::qcmi(rho, &systems(parts[0]), &systems(parts[1]), &systems(parts[2]))?
        }
        "coherent" => {
            let (a, c) = arg.split_once('>').ok_or_else(bad)?;
            entropic::coherent_information(rho, &systems(a), &systems(c))?
        }
        _ => return Err(bad()),
    };
    Ok(v)
}

fn compute(path: &PathBuf, qs: &[String]) -> CliResult<Outcome> {
    let st = load(path)?;
    let mut values = serde_json::Map::new();
    for q in qs {
        values.insert(q.clone(), json!(sig12(quantity(&st, q)?)));
    }
    let mut r = Report::new("compute", &[st.canonical.clone()], json!({"quantities": qs}), json!({}));
    r.results = json!({"values": values, "layout": layout_json(&st.state), "parties": st.parties});
    Ok(Outcome::ok(r))
}

fn layout_json(rho: &DensityMatrix) -> Value {
    let l = rho.layout();
    Value::Array(l.names().iter().zip(l.dims()).map(|(n, d)| json!({"name": n, "dim": d})).collect())
}

fn sqnm(path: &PathBuf, opt: &OptArgs, seed_ext: Option<&PathBuf>, ks: &[usize]) -> CliResult<Outcome> {
    let st = load(path)?;
    let mut cfg = opt.config();
    let mut inputs = vec![st.canonical.clone()];
    let mut seeds = Vec::new();
    if let Some(ext) = &st.extension_seed {
        seeds.push(ext.clone());
    }
    if let Some(p) = seed_ext {
        let ext = load(p)?;
        inputs.push(ext.canonical.clone());
        seeds.push(ext.state);
    }
    for ext in &seeds {
        cfg.extra_seeds.push(candidate_from_extension(&st.state, &st.parties, ext, Provenance::User)?);
    }
    let seeds_json = json!({"seed": opt.seed, "extension_seeds": seeds.len()});
    let mut r = Report::new("sqnm", &inputs, json!({"optimizer": opt.json(), "ext_k": ks}), seeds_json);
    let default_parties = st.parties == Parties::default() && st.state.layout().len() == 3;
    let est = if default_parties {
        let b = lemma1_bounds(&st.state, None, &cfg, ks)?;
        r.results = json!({
            "estimate": estimate_json(&b.sqnm),
            "bounds": {
                "lower": b.lower,
                "upper_entropy": b.upper_entropy,
                "upper_lemma1": b.upper_lemma1,
                "esq_ab_c": b.esq_ab_c,
                "esq_a_bc": b.esq_a_bc,
                "extendibility_caps": b.extendibility_caps,
                "sandwich": b.sandwich,
            },
        });
        b.sqnm
    } else {
        let est = sqnm_estimate_with(&st.state, &st.parties, &cfg)?;
        let s = sandwich_bounds(&st.state, &st.parties)?;
        r.results = json!({
            "estimate": estimate_json(&est),
            "bounds": {"lower": s.lower, "upper_entropy": s.upper, "sandwich": s},
        });
        est
    };
    // the winner can converge at a stationary seed while restarts ran out of budget
    let exhausted = est.trace.iter().filter(|run| !run.converged).count();
    r.results["starts_out_of_budget"] = json!(exhausted);
    let exit = if est.converged && exhausted == 0 {
        Exit::Ok
    } else {
        r.flags.push("budget_exhausted".into());
        Exit::Budget
    };
    Ok(Outcome { report: r, exit })
}

fn extendibility(
    path: &PathBuf,
    k: usize,
    system: &str,
    tol: f64,
    max_iter: usize,
    init_seed: Option<u64>,
    k_other: Option<usize>,
) -> CliResult<Outcome> {
    let st = load(path)?;
    let cfg = FeasibilityConfig { tol, max_iter, seed: init_seed.map(RngSeed), ..Default::default() };
    let params = json!({"k": k, "system": system, "tol": tol, "max_iter": max_iter, "k_other": k_other});
    let mut r = Report::new("extendibility", &[st.canonical.clone()], params, json!({"init_seed": init_seed}));
    let rep = symmetric_extension_feasibility(&st.state, system, k, &cfg)?;
    let l = st.state.layout();
    let other: Vec<&str> = l.names().into_iter().filter(|n| *n != system && !st.parties.b.iter().any(|b| b == n)).collect();
    let d_other: usize = other.iter().map(|n| l.dim_of(n)).product::<sqnm::Result<usize>>().unwrap_or(1);
    let d_copy = l.dim_of(system)?;
    let mut caps = serde_json::Map::new();
    if rep.feasible {
        caps.insert("one_sided".into(), json!(extendibility_cap(d_other, k)?));
        if let Some(ko) = k_other {
            caps.insert("two_sided".into(), json!(two_sided_cap(d_other, d_copy, ko, k)?));
        }
        let s = sandwich_bounds(&st.state, &st.parties)?;
        caps.insert("coherent_lower".into(), json!(s.lower));
    }
    r.results = json!({
        "k": rep.k,
        "verdict": rep.verdict(),
        "feasible": rep.feasible,
        "residual": rep.residual,
        "iterations": rep.iterations,
        "plateau": rep.plateau,
        "caps": caps,
        "note": "infeasible means not found within budget; alternating projections cannot certify infeasibility",
    });
    if !rep.feasible {
        r.flags.push("not_found_within_budget".into());
    }
    Ok(Outcome::ok(r))
}

fn rates(src: &PathBuf, tgt: &PathBuf, opt: &OptArgs) -> CliResult<Outcome> {
    let (a, b) = (load(src)?, load(tgt)?);
    let mut r = Report::new(
        "rates",
        &[a.canonical.clone(), b.canonical.clone()],
        json!({"optimizer": opt.json()}),
        json!({"seed": opt.seed}),
    );
    let rep = rate_report(&a.state, &b.state, &opt.config())?;
    r.results = json!({
        "achievable": rep.achievable,
        "converse": rep.converse.as_ref().map(|c| json!({
            "rate": c.rate,
            "source": estimate_summary(&c.source),
            "target": estimate_summary(&c.target),
        })),
        "converse_error": rep.converse_error,
        "consistent": rep.consistent,
        "pinned": rep.pinned,
    });
    if let Some(m) = &rep.converse_error {
        return Err(CliError::infeasible(format!("{m}\n{}", r.to_json())));
    }
    Ok(Outcome::ok(r))
}

fn cost(path: &PathBuf, target: Option<&PathBuf>, opt: &OptArgs) -> CliResult<Outcome> {
    let st = load(path)?;
    let cfg = opt.config();
    let (inputs, rep) = match target {
        Some(t) => {
            let s2 = load(t)?;
            (vec![st.canonical.clone(), s2.canonical.clone()], transform_cost_bounds(&st.state, &s2.state, &cfg)?)
        }
        None => (vec![st.canonical.clone()], prepare_cost_bound(&st.state, &cfg)?),
    };
    let mut r = Report::new("cost", &inputs, json!({"optimizer": opt.json()}), json!({"seed": opt.seed}));
    r.results = serde_json::to_value(&rep).expect("cost report serializes");
    Ok(Outcome::ok(r))
}

fn audit(path: &PathBuf, ops_path: &PathBuf, opt: &OptArgs) -> CliResult<Outcome> {
    let st = load(path)?;
    let text = std::fs::read_to_string(ops_path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", ops_path.display())))?;
    let descs = ops::parse(&text)?;
    let layout = st.state.layout().clone();
    let built = ops::build(&descs, |n| layout.dim_of(n).ok())?;
    let ops_json = serde_json::to_value(&descs).expect("ops serialize");
    let mut r =
        Report::new("audit", &[st.canonical.clone(), ops_json], json!({"optimizer": opt.json()}), json!({"seed": opt.seed}));
    let rep = match monotonicity_audit(&st.state, &st.parties, &built, &opt.config()) {
        Ok(rep) => rep,
        // a listed operation that is not free is an input error
        Err(sqnm::Error::NotFree(m)) => return Err(CliError::input(format!("not a free operation: {m}"))),
        Err(e) => return Err(e.into()),
    };
    r.results = serde_json::to_value(&rep).expect("audit serializes");
    if !rep.pass {
        r.flags.push("monotonicity_violated".into());
    }
    Ok(Outcome::ok(r))
}

fn selftest(suite: Suite, seed: u64, only: &[u32]) -> CliResult<Outcome> {
    let ids: Vec<u32> = if only.is_empty() { (1..=10).collect() } else { only.to_vec() };
    let mut r = Report::new("selftest", &[], json!({"suite": suite, "criteria": ids}), json!({"seed": seed}));
    let mut outcomes = Vec::new();
    for id in ids {
        if !(1..=10).contains(&id) {
            return Err(CliError::input(format!("no criterion {id}")));
        }
        let o = criteria::run_criterion(id, suite, seed);
        eprintln!("{}", o.line());
        r.timings_ms.insert(format!("criterion_{id:02}"), o.elapsed.as_millis() as u64);
        outcomes.push(o);
    }
    let pass = outcomes.iter().all(|o| o.pass);
    r.results = json!({"pass": pass, "criteria": outcomes});
    let exit = if pass {
        Exit::Ok
    } else {
        r.flags.push("selftest_failed".into());
        Exit::SelfTest
    };
    Ok(Outcome { report: r, exit })
}
