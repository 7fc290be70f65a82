//! The four interaction fields in spectral form.
//!
//! Three of them are Poisson problems L w = rhs: the nuclear attraction
//! (point source at the origin), the Hartree repulsion of the total density,
//! and the per-pair Fermi-Amaldi self-interaction correction. The Laplacian
//! is block diagonal over (l, m) and identical across m within an l, so one
//! Cholesky factor per l serves every block. The Pauli field needs no solve:
//! it is a contact term, a scaled coefficient-wise sum of the other pairs'
//! densities.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::basis::{basis_at_origin, BasisSet};
use crate::error::{Error, Result};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

pub struct PoissonSolver {
    groups: Vec<((u32, i32), Vec<usize>)>,
    /// Cholesky of -L restricted to one (l, m) block, keyed by l. -L is the
    /// Gram matrix of basis gradients, hence SPD on any independent set.
    factor_by_l: HashMap<u32, Cholesky<f64, Dyn>>,
    dim: usize,
}

impl PoissonSolver {
    pub fn new(basis: &BasisSet, laplace: &DMatrix<f64>) -> Result<Self> {
        let groups = basis.lm_groups();
        let mut factor_by_l = HashMap::new();
        for ((l, _), idx) in &groups {
            if factor_by_l.contains_key(l) {
                continue;
            }
            let k = idx.len();
            let neg_block = DMatrix::from_fn(k, k, |a, b| -laplace[(idx[a], idx[b])]);
            let chol = Cholesky::new(neg_block).ok_or_else(|| {
                Error::Linalg(format!("laplacian block l={l} is not negative definite"))
            })?;
            factor_by_l.insert(*l, chol);
        }
        Ok(PoissonSolver { groups, factor_by_l, dim: basis.len() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solve L x = rhs blockwise. Blocks whose right-hand side is entirely
    /// zero are skipped and stay zero.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        assert_eq!(rhs.len(), self.dim);
        let mut x = DVector::zeros(self.dim);
        for ((l, _), idx) in &self.groups {
            if idx.iter().all(|&i| rhs[i] == 0.0) {
                continue;
            }
            // L x = rhs  <=>  (-L) x = -rhs
            let sub = DVector::from_fn(idx.len(), |a, _| -rhs[idx[a]]);
            let sol = self.factor_by_l[l].solve(&sub);
            for (a, &i) in idx.iter().enumerate() {
                x[i] = sol[a];
            }
        }
        x
    }
}

/// Nuclear attraction field: L w = 4 pi Z f(0). Only l = 0 functions are
/// finite at the origin, so the solve touches only the spherical blocks; the
/// reconstructed field approximates -Z/r on the represented window.
pub fn build_w_en(solver: &PoissonSolver, basis: &BasisSet, z: u32) -> DVector<f64> {
    let rhs = basis_at_origin(basis) * (FOUR_PI * z as f64);
    solver.solve(&rhs)
}

/// Hartree field of the total density: L w = -4 pi m, where m holds the
/// density moments <f_i, n>. Moments come straight from the Gamma
/// contraction; see `solver::pair_moments` for why they must not be rebuilt
/// from the coefficient representation.
pub fn build_w_ee(solver: &PoissonSolver, moments_total: &DVector<f64>) -> DVector<f64> {
    solver.solve(&(moments_total * -FOUR_PI))
}

/// Fermi-Amaldi self-interaction correction for one pair:
/// L w = +4 pi / N_mu m_mu, i.e. -1/N_mu times the pair's own Hartree field.
pub fn build_w_sic(
    solver: &PoissonSolver,
    moments_pair: &DVector<f64>,
    n_mu: u32,
) -> DVector<f64> {
    solver.solve(&(moments_pair * (FOUR_PI / n_mu as f64)))
}

/// Contact Pauli field felt by pair mu: (1/g0_mu) sum of the other pairs'
/// density coefficients.
pub fn build_w_pauli(densities: &[DVector<f64>], g0: &[f64], mu: usize) -> DVector<f64> {
    assert_eq!(densities.len(), g0.len());
    let dim = densities[mu].len();
    let mut w = DVector::zeros(dim);
    for (gamma, n) in densities.iter().enumerate() {
        if gamma != mu {
            w += n;
        }
    }
    w / g0[mu]
}
