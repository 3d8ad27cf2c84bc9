use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, cr, CMat, CVec};
use crate::qstate::layout::SystemLayout;
use crate::qstate::state::{DensityMatrix, PureState};

/// Seed for every random construction. Equal seeds and parameters give
/// bit-identical outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Independent child seed (splitmix64 of the parent mixed with `tag`).
    pub fn derive(self, tag: u64) -> RngSeed {
        let mut z = self.0 ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }

    pub fn rng(self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.0)
    }
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re * s, im * s)
    })
}

/// Haar-random isometry `d_out × d_in`.
pub fn random_isometry(d_in: usize, d_out: usize, seed: RngSeed) -> Result<CMat> {
    if d_out < d_in || d_in == 0 {
        return Err(Error::OutOfRange(format!("isometry {d_in} → {d_out}")));
    }
    let g = ginibre(d_out, d_in, &mut seed.rng());
    Ok(linalg::orthonormalize(&g))
}

pub fn random_unitary(d: usize, seed: RngSeed) -> Result<CMat> {
    random_isometry(d, d, seed)
}

/// Haar-random pure state.
pub fn random_pure(layout: &SystemLayout, seed: RngSeed) -> PureState {
    let g = ginibre(layout.total_dim(), 1, &mut seed.rng());
    let v = CVec::from_iterator(g.nrows(), g.iter().copied());
    PureState::normalized(v, layout.clone()).expect("gaussian vector is nonzero")
}

/// Ginibre-induced random state of the given rank: G G† / Tr, G of size d × rank.
pub fn random_density(layout: &SystemLayout, rank: usize, seed: RngSeed) -> Result<DensityMatrix> {
    let d = layout.total_dim();
    if rank == 0 || rank > d {
        return Err(Error::OutOfRange(format!("rank {rank} for dimension {d}")));
    }
    let g = ginibre(d, rank, &mut seed.rng());
    let m = &g * g.adjoint();
    let tr = linalg::trace(&m).re;
    Ok(DensityMatrix::from_trusted(layout.clone(), m / cr(tr)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> SystemLayout {
        SystemLayout::new([("A", 2), ("B", 2), ("C", 2)]).unwrap()
    }

    #[test]
    fn rank_one_is_pure() {
        let s = random_density(&abc(), 1, RngSeed(1)).unwrap();
        assert!(linalg::spectrum_entropy(&s.eigenvalues()) < 1e-9);
    }

    #[test]
    fn seeded_reproducibility() {
        let a = random_density(&abc(), 3, RngSeed(9)).unwrap();
        let b = random_density(&abc(), 3, RngSeed(9)).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert_eq!(random_isometry(2, 5, RngSeed(4)).unwrap(), random_isometry(2, 5, RngSeed(4)).unwrap());
    }

    #[test]
    fn full_rank_has_positive_spectrum() {
        let s = random_density(&abc(), 8, RngSeed(2)).unwrap();
        assert!(*s.eigenvalues().last().unwrap() > 0.0);
        assert!(random_density(&abc(), 9, RngSeed(2)).is_err());
    }

    #[test]
    fn isometries_are_isometric() {
        let u = random_unitary(4, RngSeed(5)).unwrap();
        assert!(linalg::isometry_deviation(&u) < 1e-9);
        assert!(linalg::isometry_deviation(&u.adjoint()) < 1e-9);
        assert!(linalg::isometry_deviation(&random_isometry(3, 7, RngSeed(6)).unwrap()) < 1e-9);
        assert!(random_isometry(3, 2, RngSeed(0)).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let s = RngSeed(0);
        assert_ne!(s.derive(1), s.derive(2));
        assert_eq!(s.derive(7), s.derive(7));
    }
}
