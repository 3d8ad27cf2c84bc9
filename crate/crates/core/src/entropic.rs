//! Entropic functionals in bits.
//!
//! Every quantity is computed from eigenvalues of marginals, never from
//! matrix-logarithm products.

use crate::error::{Error, Result};
use crate::linalg;
use crate::qstate::{reduce_to, DensityMatrix};

/// Values in bits (log base 2).
pub type Bits = f64;

/// QCMI values in (−QCMI_FLOOR, 0) are reported as 0; anything lower is an error.
pub const QCMI_FLOOR: f64 = 1e-9;

/// S of the marginal on `subset`; the empty subset has entropy 0.
pub fn entropy<S: AsRef<str>>(state: &DensityMatrix, subset: &[S]) -> Result<Bits> {
    if subset.is_empty() {
        return Ok(0.0);
    }
    let m = reduce_to(state, subset)?;
    Ok(linalg::spectrum_entropy(&m.eigenvalues()).max(0.0))
}

fn union<S: AsRef<str>>(parts: &[&[S]]) -> Vec<String> {
    parts.iter().flat_map(|p| p.iter().map(|s| s.as_ref().to_string())).collect()
}

fn check_disjoint<S: AsRef<str>>(state: &DensityMatrix, parts: &[&[S]]) -> Result<()> {
    state.layout().indices_of(&union(parts)).map(|_| ())
}

/// S(A|B) = S(AB) − S(B).
pub fn conditional_entropy<S: AsRef<str>>(state: &DensityMatrix, a: &[S], b: &[S]) -> Result<Bits> {
    check_disjoint(state, &[a, b])?;
    Ok(entropy(state, &union(&[a, b]))? - entropy(state, b)?)
}

/// I(A;B) = S(A) + S(B) − S(AB).
pub fn mutual_information<S: AsRef<str>>(state: &DensityMatrix, a: &[S], b: &[S]) -> Result<Bits> {
    check_disjoint(state, &[a, b])?;
    let v = entropy(state, a)? + entropy(state, b)? - entropy(state, &union(&[a, b]))?;
    clamp_nonnegative(v)
}

/// I(A;C|B) = S(AB) + S(BC) − S(ABC) − S(B).
pub fn qcmi<S: AsRef<str>>(state: &DensityMatrix, a: &[S], c: &[S], b: &[S]) -> Result<Bits> {
    check_disjoint(state, &[a, c, b])?;
    let v = qcmi_raw(state, a, c, b)?;
    clamp_nonnegative(v)
}

/// Unclamped QCMI, for invariant checks that must see the raw float.
pub fn qcmi_raw<S: AsRef<str>>(state: &DensityMatrix, a: &[S], c: &[S], b: &[S]) -> Result<Bits> {
    Ok(entropy(state, &union(&[a, b]))? + entropy(state, &union(&[b, c]))?
        - entropy(state, &union(&[a, b, c]))?
        - entropy(state, b)?)
}

pub(crate) fn clamp_nonnegative(v: f64) -> Result<Bits> {
    if v >= 0.0 {
        Ok(v)
    } else if v > -QCMI_FLOOR {
        Ok(0.0)
    } else {
        Err(Error::NumericalIntegrity(format!("negative correlation measure {v:e}")))
    }
}

/// I(A⟩B) = S(B) − S(AB).
pub fn coherent_information<S: AsRef<str>>(state: &DensityMatrix, from: &[S], to: &[S]) -> Result<Bits> {
    check_disjoint(state, &[from, to])?;
    Ok(entropy(state, to)? - entropy(state, &union(&[from, to]))?)
}

/// h₂(p) with h₂(0) = h₂(1) = 0.
pub fn binary_entropy(p: f64) -> Result<Bits> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("probability {p}")));
    }
    Ok(h2(p))
}

fn h2(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Uniform continuity envelope for the extension objective:
/// f(ε) = 4√ε·log₂ min(d_A, d_C) + 2(1+2√ε)·h₂(2√ε/(1+2√ε)).
pub fn continuity_bound(eps: f64, dim_a: usize, dim_c: usize) -> Result<Bits> {
    if !(0.0..=1.0).contains(&eps) || !eps.is_finite() {
        return Err(Error::OutOfRange(format!("eps {eps}")));
    }
    if dim_a == 0 || dim_c == 0 {
        return Err(Error::OutOfRange("zero dimension".into()));
    }
    let s = eps.sqrt();
    let d = dim_a.min(dim_c) as f64;
    let g = 2.0 * s;
    Ok(4.0 * s * d.log2() + 2.0 * (1.0 + g) * h2(g / (1.0 + g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cr, CVec};
    use crate::qstate::{tensor_product, PureState, SystemLayout};

    fn pure(names: &[(&str, usize)], amps: &[(usize, f64)]) -> DensityMatrix {
        let l = SystemLayout::new(names.iter().copied()).unwrap();
        let mut v = CVec::zeros(l.total_dim());
        for &(i, a) in amps {
            v[i] = cr(a);
        }
        PureState::normalized(v, l).unwrap().to_density()
    }

    fn ghz() -> DensityMatrix {
        pure(&[("A", 2), ("B", 2), ("C", 2)], &[(0, 1.0), (7, 1.0)])
    }

    fn bell_ac() -> DensityMatrix {
        pure(&[("A", 2), ("C", 2)], &[(0, 1.0), (3, 1.0)])
    }

    #[test]
    fn entropy_examples() {
        assert!(entropy(&ghz(), &["A", "B", "C"]).unwrap().abs() < 1e-12);
        let q = DensityMatrix::maximally_mixed(SystemLayout::single("A", 2).unwrap());
        assert!((entropy(&q, &["A"]).unwrap() - 1.0).abs() < 1e-12);
        let t = DensityMatrix::maximally_mixed(SystemLayout::single("A", 3).unwrap());
        assert!((entropy(&t, &["A"]).unwrap() - 3f64.log2()).abs() < 1e-12);
        assert_eq!(entropy::<&str>(&t, &[]).unwrap(), 0.0);
        assert!(matches!(entropy(&t, &["Z"]), Err(Error::UnknownSystem(_))));
    }

    #[test]
    fn conditional_entropy_examples() {
        assert!((conditional_entropy(&bell_ac(), &["A"], &["C"]).unwrap() + 1.0).abs() < 1e-12);
        let mut cc = crate::linalg::zeros(4, 4);
        cc[(0, 0)] = cr(0.5);
        cc[(3, 3)] = cr(0.5);
        let l = SystemLayout::new([("A", 2), ("B", 2)]).unwrap();
        let cc = DensityMatrix::new(cc, l).unwrap();
        assert!(conditional_entropy(&cc, &["A"], &["B"]).unwrap().abs() < 1e-12);
        assert!(matches!(conditional_entropy(&cc, &["A"], &["A"]), Err(Error::Overlap(_))));
    }

    #[test]
    fn ghz_values() {
        let g = ghz();
        assert!((mutual_information(&g, &["A"], &["C"]).unwrap() - 1.0).abs() < 1e-12);
        assert!((qcmi(&g, &["A"], &["C"], &["B"]).unwrap() - 1.0).abs() < 1e-12);
        assert!(coherent_information(&g, &["A"], &["C"]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bell_with_spectator() {
        let b = DensityMatrix::maximally_mixed(SystemLayout::single("B", 2).unwrap());
        let s = tensor_product(&bell_ac(), &b).unwrap();
        assert!((qcmi(&s, &["A"], &["C"], &["B"]).unwrap() - 2.0).abs() < 1e-12);
        assert!((mutual_information(&s, &["A"], &["C"]).unwrap() - 2.0).abs() < 1e-12);
        assert!((coherent_information(&s, &["A"], &["C"]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        // 2 - (3/4) log2 3
        assert!((binary_entropy(0.25).unwrap() - 0.811_278_124_459_132_9).abs() < 1e-12);
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn continuity_envelope() {
        assert_eq!(continuity_bound(0.0, 2, 2).unwrap(), 0.0);
        let expect = 4.0 + 6.0 * binary_entropy(2.0 / 3.0).unwrap();
        assert!((continuity_bound(1.0, 2, 2).unwrap() - expect).abs() < 1e-12);
        let mut prev = 0.0;
        for i in 0..=100 {
            let f = continuity_bound(i as f64 / 100.0, 2, 3).unwrap();
            assert!(f >= prev);
            prev = f;
        }
        assert!(continuity_bound(-0.1, 2, 2).is_err());
    }

    #[test]
    fn negative_qcmi_floor() {
        assert_eq!(clamp_nonnegative(-1e-12).unwrap(), 0.0);
        assert!(clamp_nonnegative(-1e-6).is_err());
    }
}
