use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::SelfTerm;
use crate::em::{dyadic_green_unchecked, Wavenumber};
use crate::scene::ScattererSnapshot;
use crate::Result;

/// The discretized VIE operator acting on `3 N_s` stacked field unknowns
/// (voxel-major, xyz-minor):
///
/// `(L E)_n = (1 - C_self χ_n) E_n - Σ_{n' ≠ n} k0² ΔV G(r_n, r_n') χ_n' E_n'`
pub trait InteractionOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
    /// Diagonal coefficient `1 - C_self χ_n` per voxel.
    fn voxel_diagonal(&self) -> &[C64];
}

/// Self-term coefficient `C_self` of a cubic cell.
pub fn self_coefficient(term: SelfTerm, k0: f64, delta_v: f64) -> C64 {
    let static_part = C64::from(-1.0 / 3.0);
    match term {
        SelfTerm::StaticOnly => static_part,
        SelfTerm::StaticPlusRadiative => {
            static_part - C64::new(0.0, k0.powi(3) * delta_v / (6.0 * std::f64::consts::PI))
        }
    }
}

pub(crate) fn voxel_diagonal(chi: &[C64], c_self: C64) -> Vec<C64> {
    chi.iter().map(|&x| C64::from(1.0) - c_self * x).collect()
}

/// Explicitly assembled `3N × 3N` operator.
#[derive(Debug, Clone)]
pub struct DenseInteraction {
    matrix: DMatrix<C64>,
    diag: Vec<C64>,
}

impl DenseInteraction {
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

impl InteractionOperator for DenseInteraction {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let n = self.matrix.nrows();
        y.iter_mut().for_each(|v| *v = C64::default());
        for (j, xj) in x.iter().enumerate() {
            if *xj == C64::default() {
                continue;
            }
            let col = self.matrix.column(j);
            for i in 0..n {
                y[i] += col[i] * xj;
            }
        }
    }

    fn voxel_diagonal(&self) -> &[C64] {
        &self.diag
    }
}

/// Assembles the interaction operator of a snapshot at one subcarrier.
pub fn assemble_interaction(snapshot: &ScattererSnapshot, k: &Wavenumber, self_term: SelfTerm) -> Result<DenseInteraction> {
    snapshot.validate()?;
    snapshot.check_distinct()?;
    let chi = snapshot.contrasts(k);
    let c_self = self_coefficient(self_term, k.k0, snapshot.delta_v);
    Ok(assemble_with(snapshot, k, &chi, c_self))
}

pub(crate) fn assemble_with(snapshot: &ScattererSnapshot, k: &Wavenumber, chi: &[C64], c_self: C64) -> DenseInteraction {
    let n = snapshot.n_voxels();
    let diag = voxel_diagonal(chi, c_self);
    let scale = k.k0 * k.k0 * snapshot.delta_v;
    let mut matrix = DMatrix::<C64>::zeros(3 * n, 3 * n);
    for a in 0..n {
        for c in 0..3 {
            matrix[(3 * a + c, 3 * a + c)] = diag[a];
        }
        for b in a + 1..n {
            let g = dyadic_green_unchecked(&(snapshot.centers[a] - snapshot.centers[b]), k.k0) * C64::from(scale);
            // G is symmetric and reciprocal, so the (b, a) block is G χ_a.
            for i in 0..3 {
                for j in 0..3 {
                    matrix[(3 * a + i, 3 * b + j)] = -g[(i, j)] * chi[b];
                    matrix[(3 * b + i, 3 * a + j)] = -g[(i, j)] * chi[a];
                }
            }
        }
    }
    DenseInteraction { matrix, diag }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{dyadic_green, Position};
    use crate::scene::{Material, PartTag};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> Wavenumber {
        Wavenumber::from_frequency(4.9e9).unwrap()
    }

    #[test]
    fn zero_contrast_is_identity() {
        let vac = Material::new(1.0, 0.0, PartTag::Body).unwrap();
        let s = ScattererSnapshot::cube(Position::new(5.0, 0.0, 0.0), 2, 0.005, vac).unwrap();
        let op = assemble_interaction(&s, &k(), SelfTerm::StaticPlusRadiative).unwrap();
        assert_eq!(op.matrix(), &DMatrix::identity(24, 24));
    }

    #[test]
    fn two_voxel_off_diagonal_block() {
        let mat = Material::new(2.5, 0.01, PartTag::Body).unwrap();
        let c = vec![Position::new(5.0, 0.0, 0.0), Position::new(5.004, 0.003, -0.002)];
        let s = ScattererSnapshot::new(c.clone(), 1e-7, vec![mat; 2], 0).unwrap();
        let kk = k();
        let op = assemble_interaction(&s, &kk, SelfTerm::StaticOnly).unwrap();
        let chi = mat.contrast_at(&kk);
        let g = dyadic_green(&c[0], &c[1], &kk).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = -(kk.k0 * kk.k0 * 1e-7) * g[(i, j)] * chi;
                assert!((op.matrix()[(i, 3 + j)] - expected).norm() <= 1e-14 * expected.norm().max(1e-300));
            }
            assert_eq!(op.matrix()[(i, i)], C64::from(1.0) + chi / 3.0);
        }
    }

    #[test]
    fn matvec_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kk = k();
        let n = 12;
        let centers: Vec<Position> = (0..n)
            .map(|_| Position::new(5.0 + rng.random_range(0.0..0.05), rng.random_range(0.0..0.05), rng.random_range(0.0..0.05)))
            .collect();
        let mats: Vec<Material> = (0..n)
            .map(|_| Material::new(rng.random_range(1.0..4.0), rng.random_range(0.0..0.5), PartTag::Body).unwrap())
            .collect();
        let dv = 2e-7;
        let s = ScattererSnapshot::new(centers.clone(), dv, mats.clone(), 0).unwrap();
        let op = assemble_interaction(&s, &kk, SelfTerm::StaticPlusRadiative).unwrap();
        let x: Vec<C64> = (0..3 * n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let mut y = vec![C64::default(); 3 * n];
        op.apply(&x, &mut y);

        // Brute-force summation straight from the operator definition.
        let c_self = C64::from(-1.0 / 3.0) - C64::new(0.0, kk.k0.powi(3) * dv / (6.0 * std::f64::consts::PI));
        let chi: Vec<C64> = mats.iter().map(|m| m.contrast_at(&kk)).collect();
        let mut expect = vec![C64::default(); 3 * n];
        for a in 0..n {
            for i in 0..3 {
                let mut acc = (C64::from(1.0) - c_self * chi[a]) * x[3 * a + i];
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    let g = dyadic_green(&centers[a], &centers[b], &kk).unwrap();
                    for j in 0..3 {
                        acc -= kk.k0 * kk.k0 * dv * g[(i, j)] * chi[b] * x[3 * b + j];
                    }
                }
                expect[3 * a + i] = acc;
            }
        }
        let err: f64 = y.iter().zip(&expect).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let scale: f64 = expect.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / scale < 1e-12, "{}", err / scale);
    }

    #[test]
    fn duplicate_centers_rejected() {
        let mat = Material::new(2.0, 0.0, PartTag::Body).unwrap();
        let p = Position::new(5.0, 0.0, 0.0);
        let s = ScattererSnapshot::new(vec![p, p], 1e-6, vec![mat; 2], 0).unwrap();
        assert!(assemble_interaction(&s, &k(), SelfTerm::StaticOnly).is_err());
    }
}
