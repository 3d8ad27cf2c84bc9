//! State descriptor files.
//!
//! A descriptor is either an explicit matrix,
//!
//! ```json
//! {"layout": [{"name": "A", "dim": 2}, {"name": "C", "dim": 2}],
//!  "matrix": [[[0.5, 0], [0, 0], [0, 0], [0.5, 0]], ...]}
//! ```
//!
//! with entries as `[re, im]` pairs in row-major order of the tensor basis, or
//! a generator call `{"generator": "isotropic", "params": {"d": 2, "p": 0.5}}`.
//! Either form may carry `parties` and an `extension_seed` (itself a
//! descriptor for a state on the party systems plus extension systems).

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use sqnm::linalg::{c, CMat};
use sqnm::parties::Parties;
use sqnm::qstate::{random_density, random_pure, validate_state, DensityMatrix, RngSeed, SystemLayout};
use sqnm::states::{self, CertifiedState, MarkovBlock, TriangleIsometries};

use crate::{CliError, CliResult};

/// Validation tolerance for states read from files.
pub const FILE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemEntry {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartiesSpec {
    pub a: Vec<String>,
    #[serde(default)]
    pub b: Vec<String>,
    pub c: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDescriptor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Vec<SystemEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Map<String, Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parties: Option<PartiesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension_seed: Option<Box<StateDescriptor>>,
}

/// A descriptor resolved to numbers.
#[derive(Debug, Clone)]
pub struct LoadedState {
    pub state: DensityMatrix,
    pub parties: Parties,
    /// Extended state used to seed the optimizer.
    pub extension_seed: Option<DensityMatrix>,
    pub canonical: Value,
}

/// Parse descriptor text; syntax and type errors carry line and column.
pub fn parse(text: &str) -> CliResult<StateDescriptor> {
    serde_json::from_str(text).map_err(|e| {
        CliError::input(format!("descriptor parse error at line {}, column {}: {}", e.line(), e.column(), e))
    })
}

pub fn load_file(path: &str) -> CliResult<LoadedState> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{path}: {e}")))?;
    let d = parse(&text).map_err(|e| CliError::input(format!("{path}: {}", e.message)))?;
    resolve(&d)
}

/// The canonical JSON form: object keys sorted, absent fields omitted.
pub fn canonical(d: &StateDescriptor) -> Value {
    serde_json::to_value(d).expect("descriptor serializes")
}

/// SHA-256 of the compact canonical serialization.
pub fn digest(v: &Value) -> String {
    hex::encode(Sha256::digest(v.to_string().as_bytes()))
}

pub fn resolve(d: &StateDescriptor) -> CliResult<LoadedState> {
    let (state, bundled) = match (&d.layout, &d.matrix, &d.generator) {
        (Some(l), Some(m), None) => (explicit(l, m)?, None),
        (None, None, Some(g)) => {
            let params = d.params.clone().unwrap_or_default();
            let cs = generate(g, &params)?;
            let use_bundled = params.get("bundled_seed").and_then(Value::as_bool).unwrap_or(true);
            let seed = if use_bundled { cs.known.optimal_extension.map(|e| e.extended_state) } else { None };
            (cs.state, seed)
        }
        _ => {
            return Err(CliError::input(
                "descriptor needs either {layout, matrix} or {generator, params}, not both",
            ))
        }
    };
    let parties = match &d.parties {
        Some(p) => Parties {
            a: p.a.clone(),
            b: p.b.clone(),
            c: p.c.clone(),
        },
        None => Parties::infer(state.layout()),
    };
    parties.validate(state.layout())?;
    let extension_seed = match &d.extension_seed {
        Some(inner) => Some(resolve(inner)?.state),
        None => bundled,
    };
    Ok(LoadedState { state, parties, extension_seed, canonical: canonical(d) })
}

fn explicit(layout: &[SystemEntry], matrix: &[Vec<[f64; 2]>]) -> CliResult<DensityMatrix> {
    let l = SystemLayout::new(layout.iter().map(|s| (s.name.clone(), s.dim)))?;
    let n = l.total_dim();
    if matrix.len() != n {
        return Err(CliError::input(format!("matrix has {} rows; layout {} needs {n}", matrix.len(), l)));
    }
    if let Some((i, row)) = matrix.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(CliError::input(format!("matrix row {i} has {} entries; expected {n}", row.len())));
    }
    let m = CMat::from_fn(n, n, |i, j| c(matrix[i][j][0], matrix[i][j][1]));
    Ok(validate_state(m, l, FILE_TOL)?)
}

/// Descriptor for an explicit state, in the file format.
pub fn to_descriptor(state: &DensityMatrix) -> StateDescriptor {
    let layout = state.layout().systems().iter().map(|s| SystemEntry { name: s.name.clone(), dim: s.dim }).collect();
    let m = state.matrix();
    let matrix = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
    StateDescriptor { layout: Some(layout), matrix: Some(matrix), ..empty() }
}

fn empty() -> StateDescriptor {
    StateDescriptor { layout: None, matrix: None, generator: None, params: None, parties: None, extension_seed: None }
}

/// Generator descriptor.
pub fn generator(name: &str, params: Value) -> StateDescriptor {
    let params = match params {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    StateDescriptor { generator: Some(name.into()), params: Some(params), ..empty() }
}

fn num(p: &Map<String, Value>, key: &str) -> CliResult<Option<f64>> {
    match p.get(key) {
        None => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| CliError::input(format!("param {key:?} must be a number"))),
    }
}

fn uint(p: &Map<String, Value>, key: &str, default: usize) -> CliResult<usize> {
    match p.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .map(|x| x as usize)
            .ok_or_else(|| CliError::input(format!("param {key:?} must be a nonnegative integer"))),
    }
}

fn nums(p: &Map<String, Value>, key: &str, default: &[f64]) -> CliResult<Vec<f64>> {
    match p.get(key) {
        None => Ok(default.to_vec()),
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| CliError::input(format!("param {key:?} must hold numbers"))))
            .collect(),
        Some(_) => Err(CliError::input(format!("param {key:?} must be an array"))),
    }
}

const GENERATORS: &str = "bell, max_ent, ghz, observation1, isotropic, markov, flag_mixture, triangle, schmidt, random";

/// Run a named generator.
pub fn generate(name: &str, p: &Map<String, Value>) -> CliResult<CertifiedState> {
    let cs = match name {
        "bell" => {
            let bell = states::bell(uint(p, "index", 0)?)?;
            match uint(p, "b_dim", 0)? {
                0 => bell,
                d => states::with_condition(&bell, &DensityMatrix::maximally_mixed(SystemLayout::single("B", d)?))?,
            }
        }
        "max_ent" => states::maximally_entangled(uint(p, "d", 2)?)?,
        "ghz" => states::ghz(),
        "observation1" => states::observation1_family()?,
        "isotropic" => {
            let pv = num(p, "p")?.ok_or_else(|| CliError::input("isotropic needs param \"p\""))?;
            states::isotropic(uint(p, "d", 2)?, pv)?
        }
        "markov" => markov(p)?,
        "flag_mixture" => flag_mixture(p)?,
        "triangle" => {
            let schmidt = |key: &str, names: (&str, &str)| -> CliResult<_> {
                Ok(states::schmidt_state(names, &nums(p, key, &[0.5, 0.5])?)?)
            };
            let alpha = schmidt("alpha", ("A1", "C1"))?;
            let beta = schmidt("beta", ("A2", "B1"))?;
            let gamma = schmidt("gamma", ("C2", "B2"))?;
            states::triangle_state(&alpha, &beta, &gamma, &TriangleIsometries::default())?
        }
        "schmidt" => {
            let psi = states::schmidt_state(("A", "C"), &nums(p, "probs", &[0.5, 0.5])?)?;
            plain(psi.to_density(), "schmidt")
        }
        "random" => {
            let dims: Vec<usize> = nums(p, "dims", &[2.0, 2.0, 2.0])?.into_iter().map(|d| d as usize).collect();
            let names: &[&str] = match dims.len() {
                2 => &["A", "C"],
                3 => &["A", "B", "C"],
                _ => return Err(CliError::input("random generator takes 2 or 3 dims")),
            };
            let l = SystemLayout::new(names.iter().zip(&dims).map(|(n, &d)| (*n, d)))?;
            let seed = RngSeed(uint(p, "seed", 0)? as u64);
            let rho = if p.get("pure").and_then(Value::as_bool).unwrap_or(false) {
                random_pure(&l, seed).to_density()
            } else {
                random_density(&l, uint(p, "rank", l.total_dim())?, seed)?
            };
            plain(rho, "random")
        }
        other => return Err(CliError::input(format!("unknown generator {other:?}; known: {GENERATORS}"))),
    };
    Ok(cs)
}

fn plain(state: DensityMatrix, source: &str) -> CertifiedState {
    CertifiedState {
        state,
        known: states::Known { source: source.into(), ..Default::default() },
        flagged: None,
    }
}

/// Σₓ pₓ ρˣ from `components` (state descriptors) and `weights`.
fn flag_mixture(p: &Map<String, Value>) -> CliResult<CertifiedState> {
    let comps = match p.get("components") {
        Some(Value::Array(a)) if !a.is_empty() => a,
        _ => return Err(CliError::input("flag_mixture needs a nonempty \"components\" array")),
    };
    let uniform = vec![1.0 / comps.len() as f64; comps.len()];
    let weights = nums(p, "weights", &uniform)?;
    if weights.len() != comps.len() {
        return Err(CliError::input("flag_mixture: one weight per component"));
    }
    let parts = comps
        .iter()
        .zip(&weights)
        .map(|(c, &w)| -> CliResult<(f64, DensityMatrix)> {
            let d: StateDescriptor = serde_json::from_value(c.clone())
                .map_err(|e| CliError::input(format!("flag_mixture component: {e}")))?;
            Ok((w, resolve(&d)?.state))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(states::classical_flag_mixture(&parts)?)
}

/// Random Markov state with `blocks` sectors of B^L ⊗ B^R dimensions
/// `left_dim` × `right_dim`.
fn markov(p: &Map<String, Value>) -> CliResult<CertifiedState> {
    let n = uint(p, "blocks", 2)?.max(1);
    let (dl, dr) = (uint(p, "left_dim", 2)?, uint(p, "right_dim", 2)?);
    let seed = RngSeed(uint(p, "seed", 0)? as u64);
    let weights: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0) / n as f64).collect();
    let total: f64 = weights.iter().sum();
    let l = SystemLayout::new([("A", 2), ("BL", dl)])?;
    let r = SystemLayout::new([("BR", dr), ("C", 2)])?;
    let blocks = (0..n)
        .map(|i| -> CliResult<MarkovBlock> {
            let s = seed.derive(i as u64);
            Ok(MarkovBlock {
                p: weights[i] / total,
                left: random_density(&l, 2 * dl, s.derive(1))?,
                right: random_density(&r, 2 * dr, s.derive(2))?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(states::markov_state(&blocks)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn explicit_round_trip_is_canonical() {
        let cs = states::bell(0).unwrap();
        let d = to_descriptor(&cs.state);
        let text = serde_json::to_string_pretty(&d).unwrap();
        let back = parse(&text).unwrap();
        assert_eq!(canonical(&back), canonical(&d));
        assert_eq!(digest(&canonical(&back)), digest(&canonical(&d)));
        let loaded = resolve(&back).unwrap();
        // validation re-diagonalizes, so entries agree to round-off
        assert!(sqnm::linalg::max_abs(&(loaded.state.matrix() - cs.state.matrix())) < 1e-14);
    }

    #[test]
    fn key_order_does_not_change_digest() {
        let a = parse(r#"{"generator": "isotropic", "params": {"d": 2, "p": 0.5}}"#).unwrap();
        let b = parse(r#"{"params": {"p": 0.5, "d": 2}, "generator": "isotropic"}"#).unwrap();
        assert_eq!(digest(&canonical(&a)), digest(&canonical(&b)));
    }

    #[test]
    fn malformed_matrix_reports_position() {
        let text = "{\n  \"layout\": [{\"name\": \"A\", \"dim\": 1}],\n  \"matrix\": [[[1.0, \"x\"]]]\n}";
        let e = parse(text).unwrap_err();
        assert!(e.message.contains("line 3"), "{}", e.message);
    }

    #[test]
    fn non_state_is_rejected() {
        let d = parse(r#"{"layout": [{"name": "A", "dim": 2}], "matrix": [[[1,0],[0,0]],[[0,0],[1,0]]]}"#).unwrap();
        assert!(resolve(&d).is_err());
    }

    #[test]
    fn generators_resolve() {
        for (g, p) in [
            ("bell", json!({"b_dim": 2})),
            ("max_ent", json!({"d": 3})),
            ("ghz", json!({})),
            ("observation1", json!({})),
            ("isotropic", json!({"p": 0.3})),
            ("markov", json!({"blocks": 2, "seed": 4})),
            (
                "flag_mixture",
                json!({"components": [{"generator": "ghz"}, {"generator": "bell", "params": {"b_dim": 2}}], "weights": [0.3, 0.7]}),
            ),
            ("triangle", json!({"alpha": [0.8, 0.2]})),
            ("schmidt", json!({"probs": [0.6, 0.4]})),
            ("random", json!({"dims": [2, 2, 2], "rank": 3, "seed": 1})),
        ] {
            let d = generator(g, p);
            assert!(resolve(&d).is_ok(), "{g}");
        }
        assert!(resolve(&generator("nope", json!({}))).is_err());
    }

    #[test]
    fn observation1_carries_its_seed() {
        let l = resolve(&generator("observation1", json!({}))).unwrap();
        assert!(l.extension_seed.is_some());
        let l = resolve(&generator("observation1", json!({"bundled_seed": false}))).unwrap();
        assert!(l.extension_seed.is_none());
    }
}
