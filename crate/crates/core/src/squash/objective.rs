//! The extension objective I(X;Y|Z,E) as a function of a Stinespring
//! isometry V, with its Euclidean gradient.
//!
//! The global pure state is Ω = M·Vᵀ on axes (party systems, E, G), where M
//! is the purification matrix of the party marginal. Each entropy is read
//! from whichever side of the bipartition is smaller.

use crate::linalg::{self, cr, CMat, CVec};

/// Floor on eigenvalues inside log₂ for gradient evaluation.
const LOG_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct Problem {
    m: CMat,
    base_dims: Vec<usize>,
    x: Vec<usize>,
    y: Vec<usize>,
    z: Vec<usize>,
}

struct Term {
    axes: Vec<usize>,
    coeff: f64,
}

impl Problem {
    /// `m` is D × r; `x`, `y`, `z` are axis indices into `base_dims`.
    pub fn new(m: CMat, base_dims: Vec<usize>, x: Vec<usize>, y: Vec<usize>, z: Vec<usize>) -> Self {
        debug_assert_eq!(m.nrows(), base_dims.iter().product::<usize>());
        Self { m, base_dims, x, y, z }
    }

    pub fn rank(&self) -> usize {
        self.m.ncols()
    }

    pub fn base_dim(&self) -> usize {
        self.m.nrows()
    }

    fn dims(&self, e: usize, g: usize) -> Vec<usize> {
        let mut d = self.base_dims.clone();
        d.push(e);
        d.push(g);
        d
    }

    fn terms(&self) -> [Term; 4] {
        let e_axis = self.base_dims.len();
        let join = |parts: &[&[usize]], with_e: bool| {
            let mut v: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
            if with_e {
                v.push(e_axis);
            }
            v
        };
        [
            Term { axes: join(&[&self.x, &self.z], true), coeff: 1.0 },
            Term { axes: join(&[&self.y, &self.z], true), coeff: 1.0 },
            Term { axes: join(&[&self.x, &self.y, &self.z], true), coeff: -1.0 },
            Term { axes: join(&[&self.z], true), coeff: -1.0 },
        ]
    }

    /// Global pure vector for isometry `v` ((e·g) × r).
    pub fn omega(&self, v: &CMat) -> CVec {
        let om = &self.m * v.transpose();
        let (d, n) = om.shape();
        CVec::from_fn(d * n, |i, _| om[(i / n, i % n)])
    }

    /// Smaller side of the bipartition (axes, is_complement).
    fn side(dims: &[usize], axes: &[usize]) -> Vec<usize> {
        let dk: usize = axes.iter().map(|&a| dims[a]).product();
        let total: usize = dims.iter().product();
        if dk * dk <= total {
            axes.to_vec()
        } else {
            (0..dims.len()).filter(|a| !axes.contains(a)).collect()
        }
    }

    /// I(X;Y|Z,E) in bits.
    pub fn value(&self, v: &CMat, e: usize) -> f64 {
        let g = v.nrows() / e;
        let dims = self.dims(e, g);
        let om = self.omega(v);
        self.terms()
            .iter()
            .map(|t| {
                let side = Self::side(&dims, &t.axes);
                if side.is_empty() {
                    return 0.0;
                }
                let rho = linalg::pure_marginal(&om, &dims, &side);
                t.coeff * linalg::spectrum_entropy(&linalg::eigvalsh(&rho))
            })
            .sum()
    }

    /// Value and Euclidean gradient G with df = Re Tr(G† dV).
    pub fn value_grad(&self, v: &CMat, e: usize) -> (f64, CMat) {
        let g = v.nrows() / e;
        let dims = self.dims(e, g);
        let om = self.omega(v);
        let mut w = CVec::zeros(om.len());
        let mut f = 0.0;
        for t in self.terms() {
            let side = Self::side(&dims, &t.axes);
            if side.is_empty() {
                continue;
            }
            let b = linalg::bipartition_matrix(&om, &dims, &side);
            let rho = &b * b.adjoint();
            let (vals, vecs) = linalg::eigh(&rho);
            f += t.coeff * linalg::spectrum_entropy(&vals);
            let log = linalg::spectral_map(&vals, &vecs, |l| cr(l.max(LOG_FLOOR).log2()));
            let lb = log * b;
            w += linalg::unbipartition_matrix(&lb, &dims, &side) * cr(t.coeff);
        }
        let d = self.base_dim();
        let n = v.nrows();
        let wm = CMat::from_fn(d, n, |x, j| w[x * n + j]);
        let grad = wm.transpose() * self.m.map(|z| z.conj()) * cr(-2.0);
        (f, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{random_density, random_isometry, RngSeed, SystemLayout};
    use crate::squash::purification_matrix;

    fn problem(seed: u64) -> Problem {
        let l = SystemLayout::new([("A", 2), ("B", 2), ("C", 2)]).unwrap();
        let rho = random_density(&l, 4, RngSeed(seed)).unwrap();
        let p = purification_matrix(&rho);
        Problem::new(p.m, vec![2, 2, 2], vec![0], vec![2], vec![1])
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pr = problem(21);
        let (e, g) = (2, 3);
        let v = random_isometry(pr.rank(), e * g, RngSeed(22)).unwrap();
        let (_, grad) = pr.value_grad(&v, e);
        let dir = crate::qstate::random::ginibre(e * g, pr.rank(), &mut RngSeed(23).rng());
        let h = 1e-6;
        // the objective is defined for unit-norm Ω; stay on the manifold by
        // differentiating along an isometric curve
        let curve = |s: f64| linalg::orthonormalize(&(&v + &dir * cr(s)));
        let fd = (pr.value(&curve(h), e) - pr.value(&curve(-h), e)) / (2.0 * h);
        let tangent = (curve(h) - curve(-h)) / cr(2.0 * h);
        let analytic: f64 = grad.iter().zip(tangent.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        assert!((fd - analytic).abs() < 1e-5 * (1.0 + fd.abs()), "fd {fd} analytic {analytic}");
    }

    #[test]
    fn value_matches_density_path() {
        let pr = problem(31);
        let v = random_isometry(pr.rank(), 6, RngSeed(32)).unwrap();
        let (f, _) = pr.value_grad(&v, 3);
        assert!((f - pr.value(&v, 3)).abs() < 1e-12);
    }
}
