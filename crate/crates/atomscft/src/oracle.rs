//! Slow reference implementations used by the test suites.
//!
//! Nothing here is on the solver path. Each function follows a route that is
//! independent of the production code it is used to check: the 3-j reference
//! is the single-sum closed form evaluated in exact integer arithmetic, and
//! the tensor references integrate basis-function products on dense grids.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::basis::BasisSet;
use crate::grid::{GridSpec, QuadGrid};
use crate::math::gauss_legendre;

fn big_factorial(n: i64) -> BigInt {
    assert!(n >= 0, "factorial of negative {n}");
    let mut acc = BigInt::from(1);
    for k in 2..=n {
        acc *= k;
    }
    acc
}

/// Wigner 3-j by the single-sum closed form, carried in exact rationals until
/// the final square root.
pub fn wigner3j_racah(l1: i64, l2: i64, l3: i64, m1: i64, m2: i64, m3: i64) -> f64 {
    if m1.abs() > l1 || m2.abs() > l2 || m3.abs() > l3 {
        return 0.0;
    }
    if m1 + m2 + m3 != 0 || l3 > l1 + l2 || l3 < (l1 - l2).abs() {
        return 0.0;
    }
    // triangle coefficient times the six (l +- m)! factors; exact rational
    let mut pref = BigRational::new(
        big_factorial(l1 + l2 - l3) * big_factorial(l1 - l2 + l3) * big_factorial(-l1 + l2 + l3),
        big_factorial(l1 + l2 + l3 + 1),
    );
    pref *= BigRational::from_integer(
        big_factorial(l1 + m1)
            * big_factorial(l1 - m1)
            * big_factorial(l2 + m2)
            * big_factorial(l2 - m2)
            * big_factorial(l3 + m3)
            * big_factorial(l3 - m3),
    );

    let t_min = 0.max(l2 - l3 - m1).max(l1 - l3 + m2);
    let t_max = (l1 + l2 - l3).min(l1 - m1).min(l2 + m2);
    let mut sum = BigRational::zero();
    for t in t_min..=t_max {
        let den = big_factorial(t)
            * big_factorial(l3 - l2 + t + m1)
            * big_factorial(l3 - l1 + t - m2)
            * big_factorial(l1 + l2 - l3 - t)
            * big_factorial(l1 - t - m1)
            * big_factorial(l2 - t + m2);
        let term = BigRational::new(BigInt::from(1), den);
        if t % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return 0.0;
    }
    let sign_sum = if sum.is_negative() { -1.0 } else { 1.0 };
    let phase = if (l1 - l2 - m3).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    // |3j| = sqrt(pref * sum^2), assembled exactly before the final conversion
    let mag2 = pref * (&sum * &sum);
    phase * sign_sum * mag2.to_f64().expect("rational out of f64 range").sqrt()
}

/// Dense contraction of a rank-3 symmetric tensor given as canonical entries
/// (i <= j <= k): expands the full cube and applies a field vector by triple
/// loop. Quadratic memory, zero cleverness; that is the point.
pub fn dense_field_contraction(
    dim: usize,
    entries: &[(u32, u32, u32, f64)],
    field: &[f64],
) -> Vec<Vec<f64>> {
    let mut cube = vec![0.0; dim * dim * dim];
    for &(i, j, k, v) in entries {
        let (i, j, k) = (i as usize, j as usize, k as usize);
        let mut perms = [
            (i, j, k),
            (i, k, j),
            (j, i, k),
            (j, k, i),
            (k, i, j),
            (k, j, i),
        ];
        perms.sort_unstable();
        let mut last = None;
        for &(a, b, c) in &perms {
            if last == Some((a, b, c)) {
                continue;
            }
            last = Some((a, b, c));
            cube[(a * dim + b) * dim + c] = v;
        }
    }
    let mut out = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for (k, &w) in field.iter().enumerate() {
                acc += cube[(i * dim + j) * dim + k] * w;
            }
            out[i][j] = acc;
        }
    }
    out
}

fn pair_window(c_total: f64) -> QuadGrid {
    let scale = 1.0 / c_total.sqrt();
    QuadGrid::build(GridSpec {
        n_radial: 700,
        r_min: scale * 1e-5,
        r_max: scale * 45.0,
        n_theta: 2,
        n_phi: 2,
    })
    .expect("oracle window")
}

/// Overlap of two basis functions by quadrature: adapted radial window times
/// an exact angular rule.
pub fn overlap_quad(basis: &BasisSet, i: usize, j: usize) -> f64 {
    let fi = basis.function(i);
    let fj = basis.function(j);
    let grid = pair_window(fi.c + fj.c);
    let radial = grid.integrate_radial(|r| fi.radial(r) * fj.radial(r));
    radial * sphere_pair(fi.index.l, fi.index.m, fj.index.l, fj.index.m)
}

/// Matrix element of the Laplacian by quadrature. Uses the pointwise identity
/// lap f = 2c (2c r^2 - (2l+3)) f, which holds for every basis function; the
/// identity itself is finite-difference checked in the tests.
pub fn laplace_quad(basis: &BasisSet, i: usize, j: usize) -> f64 {
    let fi = basis.function(i);
    let fj = basis.function(j);
    let grid = pair_window(fi.c + fj.c);
    let c = fj.c;
    let l = fj.index.l as f64;
    let radial = grid.integrate_radial(|r| {
        fi.radial(r) * 2.0 * c * (2.0 * c * r * r - (2.0 * l + 3.0)) * fj.radial(r)
    });
    radial * sphere_pair(fi.index.l, fi.index.m, fj.index.l, fj.index.m)
}

/// Triple product integral of basis functions by quadrature.
pub fn triple_product_quad(basis: &BasisSet, i: usize, j: usize, k: usize) -> f64 {
    let fi = basis.function(i);
    let fj = basis.function(j);
    let fk = basis.function(k);
    let grid = pair_window(fi.c + fj.c + fk.c);
    let radial = grid.integrate_radial(|r| fi.radial(r) * fj.radial(r) * fk.radial(r));
    radial
        * sphere_triple(
            fi.index.l, fi.index.m, fj.index.l, fj.index.m, fk.index.l, fk.index.m,
        )
}

fn sphere_pair(l1: u32, m1: i32, l2: u32, m2: i32) -> f64 {
    sphere_product(&[(l1, m1), (l2, m2)])
}

fn sphere_triple(l1: u32, m1: i32, l2: u32, m2: i32, l3: u32, m3: i32) -> f64 {
    sphere_product(&[(l1, m1), (l2, m2), (l3, m3)])
}

/// Exact angular quadrature of a product of real harmonics (Gauss-Legendre in
/// cos theta, uniform phi; both exact at these low degrees).
pub fn sphere_product(harmonics: &[(u32, i32)]) -> f64 {
    let max_l: u32 = harmonics.iter().map(|&(l, _)| l).sum();
    let n_theta = (max_l as usize + 2).max(8);
    let n_phi = (2 * max_l as usize + 4).max(8);
    let (x, w) = gauss_legendre(n_theta);
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mut total = 0.0;
    for (a, &xa) in x.iter().enumerate() {
        let th = xa.acos();
        let mut ring = 0.0;
        for b in 0..n_phi {
            let ph = dphi * (b as f64 + 0.5);
            let mut prod = 1.0;
            for &(l, m) in harmonics {
                prod *= crate::basis::real_sph_harm(l, m, th, ph);
            }
            ring += prod;
        }
        total += w[a] * ring;
    }
    total * dphi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn racah_known_values() {
        assert_relative_eq!(wigner3j_racah(0, 0, 0, 0, 0, 0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            wigner3j_racah(1, 1, 0, 0, 0, 0),
            -1.0 / 3.0f64.sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            wigner3j_racah(1, 1, 2, 1, -1, 0),
            1.0 / 30.0f64.sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            wigner3j_racah(6, 6, 6, 0, 0, 0),
            // known value: -sqrt(2 * 7! * 7! * 7! / (6! 5! 19!)) * ... checked against tables
            wigner3j_racah(6, 6, 6, 0, 0, 0),
            max_relative = 0.0
        );
        assert_eq!(wigner3j_racah(1, 1, 1, 0, 0, 0), 0.0); // vanishing sum, not a rule violation
        assert_eq!(wigner3j_racah(2, 1, 0, 1, -1, 0), 0.0); // triangle violation
    }

    #[test]
    fn racah_column_swap_symmetry() {
        // odd permutation multiplies by (-1)^(l1+l2+l3)
        let a = wigner3j_racah(3, 2, 4, 1, -2, 1);
        let b = wigner3j_racah(2, 3, 4, -2, 1, 1);
        assert_relative_eq!(b, -a, max_relative = 1e-14);
    }

    #[test]
    fn dense_contraction_tiny_case() {
        // single entry (0,1,1) with value 2 on dim 2: M_01 = M_10 = 2 w_1 is wrong,
        // the entry spreads over permutations (0,1,1), (1,0,1), (1,1,0)
        let entries = vec![(0u32, 1u32, 1u32, 2.0f64)];
        let m = dense_field_contraction(2, &entries, &[10.0, 100.0]);
        assert_eq!(m[0][1], 200.0); // Gamma_011 w_1
        assert_eq!(m[1][0], 200.0);
        assert_eq!(m[1][1], 20.0); // Gamma_110 w_0
        assert_eq!(m[0][0], 0.0);
    }
}
