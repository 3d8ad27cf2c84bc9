//! k-extendibility by alternating projections between the density matrices and
//! the affine set of symmetric operators with the prescribed marginal, and the
//! resulting caps on sQNM.
//!
//! No infeasibility certificate is produced: a negative answer only means no
//! extension was found within the iteration budget.

use crate::entropic::Bits;
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat};
use crate::parties::Parties;
use crate::qstate::{random_density, reduce_to, DensityMatrix, RngSeed, SystemLayout};
use crate::squash::{sandwich_bounds, sqnm_estimate_with, OptimizerConfig};

#[derive(Debug, Clone)]
pub struct FeasibilityConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Largest allowed dim(A)·dim(C)^k.
    pub memory_cap: usize,
    /// Random initial point; `None` starts from Sym(ρ_AC ⊗ ρ_C^{⊗(k−1)}).
    pub seed: Option<RngSeed>,
    pub plateau_window: usize,
    pub plateau_rel: f64,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 5000, memory_cap: 256, seed: None, plateau_window: 200, plateau_rel: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub k: usize,
    pub feasible: bool,
    /// Largest Frobenius marginal error over the copy slots of the witness.
    pub residual: f64,
    pub iterations: usize,
    /// Stopped because the residual stopped improving.
    pub plateau: bool,
    /// Symmetric PSD state on A C₁…C_k; present when feasible.
    pub witness: Option<DensityMatrix>,
}

impl FeasibilityReport {
    pub fn verdict(&self) -> &'static str {
        if self.feasible {
            "feasible"
        } else {
            "not found within budget"
        }
    }
}

/// Bipartite (other, copy) marginal used for the test.
fn bipartite(rho: &DensityMatrix, copy_system: &str) -> Result<DensityMatrix> {
    let l = rho.layout();
    l.index_of(copy_system)?;
    let other = if l.len() == 2 {
        l.names().into_iter().find(|n| *n != copy_system).expect("two systems").to_string()
    } else {
        match copy_system {
            "C" => "A".to_string(),
            "A" => "C".to_string(),
            _ => return Err(Error::InvalidLayout("multipartite input needs copy system A or C".into())),
        }
    };
    reduce_to(rho, &[other.as_str(), copy_system])
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            prefix.push(x);
            rec(prefix, rest, out);
            prefix.pop();
            rest.insert(i, x);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..k).collect(), &mut out);
    out
}

struct Geometry {
    dims: Vec<usize>,
    k: usize,
    rho: CMat,
    d_rest: usize,
    orders: Vec<Vec<usize>>,
}

impl Geometry {
    fn symmetrize(&self, x: &CMat) -> CMat {
        let mut acc = linalg::zeros(x.nrows(), x.ncols());
        for o in &self.orders {
            acc += linalg::permute_matrix(x, &self.dims, o);
        }
        acc / cr(self.orders.len() as f64)
    }

    /// Sym(δ ⊗ 1) for an operator δ on (A, C₁).
    fn lift(&self, delta: &CMat) -> CMat {
        self.symmetrize(&linalg::kron(delta, &linalg::identity(self.d_rest)))
    }

    /// Pseudo-inverse of δ ↦ Tr_{C₂…C_k} Sym(δ ⊗ 1), as a matrix on vec(δ).
    fn gram_pinv(&self) -> CMat {
        let n = self.rho.nrows();
        let mut g = linalg::zeros(n * n, n * n);
        for col in 0..n * n {
            let mut e = linalg::zeros(n, n);
            e[(col / n, col % n)] = cr(1.0);
            let img = linalg::reduce_matrix(&self.lift(&e), &self.dims, &[0, 1]);
            for row in 0..n * n {
                g[(row, col)] = img[(row / n, row % n)];
            }
        }
        g.pseudo_inverse(1e-12).expect("nonnegative tolerance")
    }

    /// Orthogonal projection onto the affine set of symmetric X with
    /// Tr_{C₂…C_k} X = ρ.
    fn project_affine(&self, x: &CMat, gram_pinv: &CMat) -> CMat {
        let n = self.rho.nrows();
        let s = self.symmetrize(x);
        let r = linalg::reduce_matrix(&s, &self.dims, &[0, 1]) - &self.rho;
        let v = CMat::from_fn(n * n, 1, |i, _| r[(i / n, i % n)]);
        let y = gram_pinv * v;
        let delta = CMat::from_fn(n, n, |i, j| y[(i * n + j, 0)]);
        s - self.lift(&delta)
    }

    fn residual(&self, w: &CMat) -> f64 {
        (1..=self.k)
            .map(|slot| linalg::frobenius(&(linalg::reduce_matrix(w, &self.dims, &[0, slot]) - &self.rho)))
            .fold(0.0, f64::max)
    }
}

/// Projection of a Hermitian matrix onto {X ⪰ 0, Tr X = 1}.
fn project_density(x: &CMat) -> CMat {
    let (vals, vecs) = linalg::eigh(x);
    // Euclidean projection of the spectrum onto the probability simplex
    let mut sorted = vals.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (i as f64 + 1.0);
        if u - t > 0.0 {
            theta = t;
        }
    }
    linalg::spectral_map(&vals, &vecs, |l| cr((l - theta).max(0.0)))
}

/// Search for a state on A C₁…C_k, symmetric under permutations of the copies,
/// whose (A, Cᵢ) marginals all equal ρ.
///
/// Tripartite inputs are reduced to (A, C) first.
pub fn symmetric_extension_feasibility(
    rho: &DensityMatrix,
    copy_system: &str,
    k: usize,
    cfg: &FeasibilityConfig,
) -> Result<FeasibilityReport> {
    if k < 2 {
        return Err(Error::OutOfRange(format!("k = {k}; need k ≥ 2")));
    }
    let pair = bipartite(rho, copy_system)?;
    let dims2 = pair.layout().dims();
    let (da, dc) = (dims2[0], dims2[1]);
    let total = dc.checked_pow(k as u32).and_then(|p| p.checked_mul(da));
    let total = match total {
        Some(t) if t <= cfg.memory_cap => t,
        _ => {
            return Err(Error::MemoryCap(format!(
                "dim {da}·{dc}^{k} exceeds the cap {}",
                cfg.memory_cap
            )))
        }
    };
    let mut dims = vec![da];
    dims.extend(std::iter::repeat_n(dc, k));
    let orders = permutations(k)
        .into_iter()
        .map(|p| std::iter::once(0).chain(p.into_iter().map(|s| s + 1)).collect())
        .collect();
    let geo = Geometry { dims, k, rho: pair.matrix().clone(), d_rest: total / (da * dc), orders };

    let layout = witness_layout(pair.layout(), k)?;
    let mut x = match cfg.seed {
        Some(s) => random_density(&layout, total, s)?.into_matrix(),
        None => {
            let c_marg = linalg::reduce_matrix(pair.matrix(), &dims2, &[1]);
            let mut g = pair.matrix().clone();
            for _ in 1..k {
                g = linalg::kron(&g, &c_marg);
            }
            geo.symmetrize(&g)
        }
    };
    let gram = geo.gram_pinv();
    let mut best = f64::INFINITY;
    let mut witness = x.clone();
    let mut marker = f64::INFINITY;
    let mut plateau = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        iterations = it;
        let y = project_density(&x);
        x = geo.project_affine(&y, &gram);

        let w = geo.symmetrize(&y);
        let res = geo.residual(&w);
        if res < best {
            best = res;
            witness = w;
        }
        if best <= cfg.tol {
            break;
        }
        if it % cfg.plateau_window == 0 {
            if marker.is_finite() && (marker - best) <= cfg.plateau_rel * marker {
                plateau = true;
                break;
            }
            marker = best;
        }
    }
    let feasible = best <= cfg.tol;
    let witness = if feasible { Some(DensityMatrix::from_trusted(layout, witness)) } else { None };
    Ok(FeasibilityReport { k, feasible, residual: best, iterations, plateau, witness })
}

fn witness_layout(pair: &SystemLayout, k: usize) -> Result<SystemLayout> {
    let s = pair.systems();
    let mut v = vec![(s[0].name.clone(), s[0].dim)];
    for i in 1..=k {
        v.push((format!("{}{}", s[1].name, i), s[1].dim));
    }
    SystemLayout::new(v)
}

/// log₂(dim_a)/k.
pub fn extendibility_cap(dim_a: usize, k: usize) -> Result<Bits> {
    if k < 2 {
        return Err(Error::OutOfRange(format!("k = {k}; need k ≥ 2")));
    }
    Ok((dim_a as f64).log2() / k as f64)
}

/// log₂ min(d_A, d_C)/(k_A + k_C); a zero on one side falls back to the
/// one-sided cap of the other.
pub fn two_sided_cap(dim_a: usize, dim_c: usize, k_a: usize, k_c: usize) -> Result<Bits> {
    let ok = |k: usize| k == 0 || k >= 2;
    if !ok(k_a) || !ok(k_c) {
        return Err(Error::OutOfRange(format!("k_a = {k_a}, k_c = {k_c}; each must be 0 or ≥ 2")));
    }
    match (k_a, k_c) {
        (0, 0) => Err(Error::OutOfRange("both extendibility orders are zero".into())),
        (ka, 0) => extendibility_cap(dim_a, ka),
        (0, kc) => extendibility_cap(dim_c, kc),
        (ka, kc) => Ok((dim_a.min(dim_c) as f64).log2() / (ka + kc) as f64),
    }
}

#[derive(Debug, Clone)]
pub struct Theorem1Report {
    pub k: usize,
    pub feasibility: FeasibilityReport,
    pub cap: Bits,
    pub lower: Bits,
    pub estimate: Option<Bits>,
    /// lower ≤ cap + 1e-9.
    pub holds: bool,
}

/// Certify k-extendibility of ρ_AC in C, then check the sandwich lower bound
/// against log₂|A|/k.
pub fn theorem1_check(
    rho: &DensityMatrix,
    k: usize,
    feas: &FeasibilityConfig,
    opt: Option<&OptimizerConfig>,
) -> Result<Theorem1Report> {
    let rep = symmetric_extension_feasibility(rho, "C", k, feas)?;
    if !rep.feasible {
        return Err(Error::Precondition(format!(
            "state not certified {k}-extendible (residual {:e})",
            rep.residual
        )));
    }
    let parties = Parties::infer(rho.layout());
    let dim_a = rho.layout().dim_of("A")?;
    let cap = extendibility_cap(dim_a, k)?;
    let lower = sandwich_bounds(rho, &parties)?.lower;
    let estimate = match opt {
        Some(cfg) => Some(sqnm_estimate_with(rho, &parties, cfg)?.value),
        None => None,
    };
    Ok(Theorem1Report { k, feasibility: rep, cap, lower, estimate, holds: lower <= cap + 1e-9 })
}

/// Bisection for the largest parameter in [lo, hi] at which `family(p)` is
/// found k-extendible, assuming feasibility at `lo`.
pub fn feasibility_threshold(
    family: impl Fn(f64) -> Result<DensityMatrix>,
    copy_system: &str,
    k: usize,
    cfg: &FeasibilityConfig,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if symmetric_extension_feasibility(&family(mid)?, copy_system, k, cfg)?.feasible {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;
    use crate::qstate::{tensor_product, PureState};

    fn bell() -> DensityMatrix {
        let l = SystemLayout::new([("A", 2), ("C", 2)]).unwrap();
        let mut v = CVec::zeros(4);
        v[0] = cr(1.0);
        v[3] = cr(1.0);
        PureState::normalized(v, l).unwrap().to_density()
    }

    #[test]
    fn caps() {
        assert!((extendibility_cap(2, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!((extendibility_cap(4, 4).unwrap() - 0.5).abs() < 1e-15);
        assert!(extendibility_cap(2, 1).is_err());
        assert!((two_sided_cap(2, 2, 2, 2).unwrap() - 0.25).abs() < 1e-15);
        assert!((two_sided_cap(2, 3, 2, 2).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(two_sided_cap(2, 2, 2, 0).unwrap(), extendibility_cap(2, 2).unwrap());
        assert!(two_sided_cap(2, 2, 0, 0).is_err());
        let mut prev = f64::INFINITY;
        for k in 2..50 {
            let c = extendibility_cap(2, k).unwrap();
            assert!(c < prev);
            prev = c;
        }
    }

    #[test]
    fn product_is_extendible() {
        let a = random_density(&SystemLayout::single("A", 2).unwrap(), 2, RngSeed(1)).unwrap();
        let c = random_density(&SystemLayout::single("C", 2).unwrap(), 2, RngSeed(2)).unwrap();
        let rho = tensor_product(&a, &c).unwrap();
        let rep = symmetric_extension_feasibility(&rho, "C", 3, &FeasibilityConfig::default()).unwrap();
        assert!(rep.feasible, "residual {}", rep.residual);
        let w = rep.witness.unwrap();
        assert!(*w.eigenvalues().last().unwrap() > -1e-9);
    }

    #[test]
    fn bell_is_not_two_extendible() {
        let rep = symmetric_extension_feasibility(&bell(), "C", 2, &FeasibilityConfig::default()).unwrap();
        assert!(!rep.feasible);
        assert!(rep.residual > 1e-3);
    }

    #[test]
    fn memory_cap_enforced() {
        let l = SystemLayout::new([("A", 3), ("C", 3)]).unwrap();
        let rho = DensityMatrix::maximally_mixed(l);
        let err = symmetric_extension_feasibility(&rho, "C", 6, &FeasibilityConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MemoryCap(_)));
    }

    #[test]
    fn density_projection_is_a_state() {
        let x = crate::qstate::random::ginibre(4, 4, &mut RngSeed(3).rng());
        let h = linalg::hermitian_part(&x);
        let p = project_density(&h);
        assert!((linalg::trace(&p).re - 1.0).abs() < 1e-12);
        assert!(*linalg::eigvalsh(&p).last().unwrap() > -1e-12);
    }
}
