//! Wigner 3-j symbols, Gaunt coefficients, and their real-harmonic analogues.
//!
//! 3-j values come from the classic downward three-term recursion in l3,
//! seeded by the closed form at l3 = l1 + l2. Running the recursion downward
//! only is deliberate: that direction is the numerically benign one, and the
//! shallow l range used here never approaches the regime where two-sided
//! matching would pay off.

use nalgebra::Complex;
use std::collections::HashMap;

use crate::math::factorial;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn phase(n: i32) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn triangle_ok(l1: u32, l2: u32, l3: u32) -> bool {
    l3 <= l1 + l2 && l3 >= l1.abs_diff(l2)
}

/// Seed value 3j(l1, l2, l1+l2; m1, m2, -(m1+m2)).
fn top_value(l1: u32, l2: u32, m1: i32, m2: i32) -> f64 {
    let m3 = -(m1 + m2);
    let top = l1 + l2;
    let num = factorial(2 * l1)
        * factorial(2 * l2)
        * factorial((top as i32 + m3) as u32)
        * factorial((top as i32 - m3) as u32);
    let den = factorial(2 * top + 1)
        * factorial((l1 as i32 + m1) as u32)
        * factorial((l1 as i32 - m1) as u32)
        * factorial((l2 as i32 + m2) as u32)
        * factorial((l2 as i32 - m2) as u32);
    phase(l1 as i32 - l2 as i32 - m3) * (num / den).sqrt()
}

fn a_coef(l1: u32, l2: u32, m3: i32, l3: f64) -> f64 {
    let dl = l1 as f64 - l2 as f64;
    let sl = (l1 + l2 + 1) as f64;
    ((l3 * l3 - dl * dl) * (sl * sl - l3 * l3) * (l3 * l3 - (m3 * m3) as f64)).sqrt()
}

fn b_coef(l1: u32, l2: u32, m1: i32, m2: i32, m3: i32, l3: f64) -> f64 {
    let t1 = (l1 * (l1 + 1)) as f64 * m3 as f64;
    let t2 = (l2 * (l2 + 1)) as f64 * m3 as f64;
    let t3 = l3 * (l3 + 1.0) * (m2 - m1) as f64;
    -(2.0 * l3 + 1.0) * (t1 - t2 - t3)
}

/// Wigner 3-j symbol. Selection-rule violations give exactly 0.
pub fn wigner3j(l1: u32, l2: u32, l3: u32, m1: i32, m2: i32, m3: i32) -> f64 {
    if m1.unsigned_abs() > l1 || m2.unsigned_abs() > l2 || m3.unsigned_abs() > l3 {
        return 0.0;
    }
    if m1 + m2 + m3 != 0 || !triangle_ok(l1, l2, l3) {
        return 0.0;
    }
    if m1 == 0 && m2 == 0 && m3 == 0 {
        return wigner3j_zero_m(l1, l2, l3);
    }
    let top = l1 + l2;
    let mut v_here = top_value(l1, l2, m1, m2);
    if l3 == top {
        return v_here;
    }
    let mut v_above = 0.0; // A(top + 1) vanishes, so a zero placeholder is exact
    let mut l = top;
    while l > l3 {
        let lf = l as f64;
        let v_below = -(lf * a_coef(l1, l2, m3, lf + 1.0) * v_above
            + b_coef(l1, l2, m1, m2, m3, lf) * v_here)
            / ((lf + 1.0) * a_coef(l1, l2, m3, lf));
        v_above = v_here;
        v_here = v_below;
        l -= 1;
    }
    v_here
}

/// All-m-zero 3-j symbol via the two-step downward recursion; odd l1+l2+l3 gives 0.
pub fn wigner3j_zero_m(l1: u32, l2: u32, l3: u32) -> f64 {
    if !triangle_ok(l1, l2, l3) || (l1 + l2 + l3) % 2 == 1 {
        return 0.0;
    }
    let top = l1 + l2;
    // (-1)^(l1-l2) sqrt[(2l1)!(2l2)!/(2l1+2l2+1)!] (l1+l2)!/(l1! l2!)
    let mut v = phase(l1 as i32 - l2 as i32)
        * (factorial(2 * l1) * factorial(2 * l2) / factorial(2 * top + 1)).sqrt()
        * factorial(top)
        / (factorial(l1) * factorial(l2));
    let k = |l: f64| {
        let dl = l1 as f64 - l2 as f64;
        let sl = (l1 + l2 + 1) as f64;
        ((l * l - dl * dl) * (sl * sl - l * l)).sqrt()
    };
    let mut l = top;
    while l > l3 {
        let lf = l as f64;
        v *= -k(lf) / k(lf - 1.0);
        l -= 2;
    }
    v
}

/// Gaunt coefficient for complex spherical harmonics:
/// integral of Y_l1^m1 Y_l2^m2 Y_l3^m3 over the sphere.
pub fn gaunt(l1: u32, l2: u32, l3: u32, m1: i32, m2: i32, m3: i32) -> f64 {
    let pref = (((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1)) as f64 / FOUR_PI).sqrt();
    pref * wigner3j_zero_m(l1, l2, l3) * wigner3j(l1, l2, l3, m1, m2, m3)
}

/// Element of the unitary map from complex to real harmonics:
/// Z_l^m = sum_m' U^m_m' Y_l^m'. Nonzero only for |m'| = |m|.
pub fn real_unitary_elem(m: i32, mp: i32) -> Complex<f64> {
    if m.abs() != mp.abs() {
        return Complex::new(0.0, 0.0);
    }
    let mut u = Complex::new(0.0, 0.0);
    if m == 0 && mp == 0 {
        u += Complex::new(1.0, 0.0);
    }
    if m > 0 && mp == m {
        u += Complex::new(FRAC_1_SQRT_2, 0.0);
    }
    if m < 0 && mp == m {
        u += Complex::new(0.0, phase(mp - m) * FRAC_1_SQRT_2);
    }
    if m < 0 && mp == -m {
        u -= Complex::new(0.0, phase(-m) * FRAC_1_SQRT_2);
    }
    if m > 0 && mp == -m {
        u += Complex::new(phase(mp) * FRAC_1_SQRT_2, 0.0);
    }
    u
}

/// Real Gaunt coefficient: integral of Z_l1^m1 Z_l2^m2 Z_l3^m3 over the sphere,
/// assembled from complex Gaunt values through the unitary map.
pub fn real_gaunt(l1: u32, l2: u32, l3: u32, m1: i32, m2: i32, m3: i32) -> f64 {
    let cols = |m: i32| -> Vec<(i32, Complex<f64>)> {
        if m == 0 {
            vec![(0, real_unitary_elem(0, 0))]
        } else {
            vec![(m, real_unitary_elem(m, m)), (-m, real_unitary_elem(m, -m))]
        }
    };
    let mut total = 0.0;
    for &(mp1, u1) in &cols(m1) {
        for &(mp2, u2) in &cols(m2) {
            for &(mp3, u3) in &cols(m3) {
                if mp1 + mp2 + mp3 != 0 {
                    continue;
                }
                let coef = (u1 * u2 * u3).re;
                if coef != 0.0 {
                    total += coef * gaunt(l1, l2, l3, mp1, mp2, mp3);
                }
            }
        }
    }
    total
}

/// Table of nonzero real Gaunt coefficients for all l up to `lmax`, keyed by
/// the sorted multiset of (l, m) pairs (the coefficient is permutation
/// symmetric, so one canonical entry per triple suffices).
#[derive(Debug, Clone)]
pub struct RealGauntTable {
    lmax: u32,
    map: HashMap<[(u32, i32); 3], f64>,
}

fn canonical_key(mut key: [(u32, i32); 3]) -> [(u32, i32); 3] {
    key.sort_unstable();
    key
}

pub fn build_real_gaunt_table(lmax: u32) -> RealGauntTable {
    let mut map = HashMap::new();
    let pairs: Vec<(u32, i32)> = (0..=lmax)
        .flat_map(|l| (-(l as i32)..=(l as i32)).map(move |m| (l, m)))
        .collect();
    for (i, &(l1, m1)) in pairs.iter().enumerate() {
        for (j, &(l2, m2)) in pairs.iter().enumerate().skip(i) {
            for &(l3, m3) in pairs.iter().skip(j) {
                if !triangle_ok(l1, l2, l3) || (l1 + l2 + l3) % 2 == 1 {
                    continue;
                }
                let val = real_gaunt(l1, l2, l3, m1, m2, m3);
                if val != 0.0 {
                    map.insert(canonical_key([(l1, m1), (l2, m2), (l3, m3)]), val);
                }
            }
        }
    }
    RealGauntTable { lmax, map }
}

impl RealGauntTable {
    pub fn lmax(&self) -> u32 {
        self.lmax
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, l1: u32, m1: i32, l2: u32, m2: i32, l3: u32, m3: i32) -> f64 {
        debug_assert!(
            l1 <= self.lmax && l2 <= self.lmax && l3 <= self.lmax,
            "table built for lmax = {}, asked for ({l1},{l2},{l3})",
            self.lmax
        );
        self.map
            .get(&canonical_key([(l1, m1), (l2, m2), (l3, m3)]))
            .copied()
            .unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::real_sph_harm;
    use crate::math::gauss_legendre;
    use crate::oracle::wigner3j_racah;
    use approx::assert_relative_eq;

    #[test]
    fn selection_rules_return_exact_zero() {
        assert_eq!(wigner3j(1, 1, 3, 0, 0, 0), 0.0); // triangle violated
        assert_eq!(wigner3j(1, 1, 1, 1, 1, 1), 0.0); // m sum nonzero
        assert_eq!(wigner3j(2, 1, 1, 2, 0, -2), 0.0); // |m3| > l3
        assert_eq!(wigner3j(1, 1, 2, 2, 0, -2), 0.0); // |m1| > l1
        assert_eq!(wigner3j_zero_m(1, 1, 1), 0.0); // odd parity
        assert_eq!(wigner3j_zero_m(0, 1, 3), 0.0);
    }

    #[test]
    fn known_closed_forms() {
        assert_relative_eq!(wigner3j_zero_m(0, 0, 0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(
            wigner3j_zero_m(1, 1, 0),
            -1.0 / 3.0f64.sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            wigner3j_zero_m(1, 1, 2),
            (2.0 / 15.0f64).sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            wigner3j(1, 1, 1, 1, -1, 0),
            1.0 / 6.0f64.sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            wigner3j(2, 1, 3, 2, 1, -3),
            1.0 / 7.0f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn zero_m_case_is_bit_identical_through_the_general_entry_point() {
        for l1 in 0..=6u32 {
            for l2 in 0..=6u32 {
                for l3 in l1.abs_diff(l2)..=(l1 + l2).min(6) {
                    let a = wigner3j(l1, l2, l3, 0, 0, 0);
                    let b = wigner3j_zero_m(l1, l2, l3);
                    assert_eq!(a.to_bits(), b.to_bits(), "({l1},{l2},{l3})");
                }
            }
        }
    }

    #[test]
    fn recursion_matches_exact_arithmetic_up_to_l6() {
        let mut checked = 0usize;
        let mut worst = 0.0f64;
        for l1 in 0..=6u32 {
            for l2 in 0..=6u32 {
                for l3 in l1.abs_diff(l2)..=(l1 + l2).min(6) {
                    for m1 in -(l1 as i32)..=(l1 as i32) {
                        for m2 in -(l2 as i32)..=(l2 as i32) {
                            let m3 = -(m1 + m2);
                            if m3.unsigned_abs() > l3 {
                                continue;
                            }
                            let fast = wigner3j(l1, l2, l3, m1, m2, m3);
                            let exact =
                                wigner3j_racah(l1 as i64, l2 as i64, l3 as i64, m1 as i64, m2 as i64, m3 as i64);
                            worst = worst.max((fast - exact).abs());
                            checked += 1;
                        }
                    }
                }
            }
        }
        assert!(checked > 5000, "sweep too small: {checked}");
        assert!(worst < 1e-12, "worst deviation {worst:e}");
    }

    #[test]
    fn unitary_elem_known_entries() {
        let u = real_unitary_elem(-1, -1);
        assert_relative_eq!(u.im, FRAC_1_SQRT_2, max_relative = 1e-15);
        assert_eq!(u.re, 0.0);
        assert_eq!(real_unitary_elem(0, 0), Complex::new(1.0, 0.0));
        assert_eq!(real_unitary_elem(1, 0), Complex::new(0.0, 0.0));
        assert_eq!(real_unitary_elem(2, 1), Complex::new(0.0, 0.0));
        // row m = 1: (1/sqrt2, (-1)^1/sqrt2) on columns (1, -1)
        assert_relative_eq!(real_unitary_elem(1, 1).re, FRAC_1_SQRT_2, max_relative = 1e-15);
        assert_relative_eq!(real_unitary_elem(1, -1).re, -FRAC_1_SQRT_2, max_relative = 1e-15);
    }

    #[test]
    fn unitary_blocks_are_unitary() {
        for m in 1..=4i32 {
            // 2x2 block on (m, -m)
            let rows = [m, -m];
            for &ra in &rows {
                for &rb in &rows {
                    let mut dot = Complex::new(0.0, 0.0);
                    for &col in &[m, -m] {
                        dot += real_unitary_elem(ra, col) * real_unitary_elem(rb, col).conj();
                    }
                    let expect = if ra == rb { 1.0 } else { 0.0 };
                    assert!((dot.re - expect).abs() < 1e-14 && dot.im.abs() < 1e-14);
                }
            }
        }
    }

    /// The unitary map must reproduce the real harmonics exactly as implemented
    /// in the basis module; this pins both phase conventions together.
    #[test]
    fn unitary_map_reconstructs_real_harmonics() {
        let y = |l: u32, m: i32, th: f64, ph: f64| -> Complex<f64> {
            // complex harmonic from the real pair, inverting the m > 0 / m < 0 combination
            let k = m.unsigned_abs();
            if m == 0 {
                return Complex::new(real_sph_harm(l, 0, th, ph), 0.0);
            }
            let zp = real_sph_harm(l, k as i32, th, ph);
            let zm = real_sph_harm(l, -(k as i32), th, ph);
            let s = phase(k as i32);
            if m > 0 {
                Complex::new(zp, s * zm) / std::f64::consts::SQRT_2
            } else {
                Complex::new(s * zp, -zm) / std::f64::consts::SQRT_2
            }
        };
        for l in 0..=3u32 {
            for m in -(l as i32)..=(l as i32) {
                for &(th, ph) in &[(0.7, 1.3), (2.1, 4.9)] {
                    let mut rebuilt = Complex::new(0.0, 0.0);
                    for mp in -(l as i32)..=(l as i32) {
                        rebuilt += real_unitary_elem(m, mp) * y(l, mp, th, ph);
                    }
                    let direct = real_sph_harm(l, m, th, ph);
                    assert!(
                        (rebuilt.re - direct).abs() < 1e-13 && rebuilt.im.abs() < 1e-13,
                        "l={l} m={m}: {rebuilt} vs {direct}"
                    );
                }
            }
        }
    }

    /// Quadrature oracle for the real Gaunt coefficients: Gauss-Legendre in
    /// cos(theta) and uniform phi integrate these trigonometric polynomials
    /// exactly, independent of any 3-j machinery.
    fn real_gaunt_quad(l1: u32, m1: i32, l2: u32, m2: i32, l3: u32, m3: i32) -> f64 {
        let (x, w) = gauss_legendre(24);
        let nphi = 64;
        let dphi = 2.0 * std::f64::consts::PI / nphi as f64;
        let mut total = 0.0;
        for (a, &xa) in x.iter().enumerate() {
            let th = xa.acos();
            let mut ring = 0.0;
            for b in 0..nphi {
                let ph = dphi * (b as f64 + 0.5);
                ring += real_sph_harm(l1, m1, th, ph)
                    * real_sph_harm(l2, m2, th, ph)
                    * real_sph_harm(l3, m3, th, ph);
            }
            total += w[a] * ring;
        }
        total * dphi
    }

    #[test]
    fn real_gaunt_matches_sphere_quadrature_up_to_l4() {
        let mut worst = 0.0f64;
        let mut nonzero = 0usize;
        for l1 in 0..=4u32 {
            for l2 in l1..=4u32 {
                for l3 in l2..=4u32 {
                    if !triangle_ok(l1, l2, l3) || (l1 + l2 + l3) % 2 == 1 {
                        continue;
                    }
                    for m1 in -(l1 as i32)..=(l1 as i32) {
                        for m2 in -(l2 as i32)..=(l2 as i32) {
                            for m3 in -(l3 as i32)..=(l3 as i32) {
                                let fast = real_gaunt(l1, l2, l3, m1, m2, m3);
                                let slow = real_gaunt_quad(l1, m1, l2, m2, l3, m3);
                                worst = worst.max((fast - slow).abs());
                                if fast.abs() > 1e-14 {
                                    nonzero += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!(nonzero > 50);
        assert!(worst < 1e-10, "worst deviation {worst:e}");
    }

    #[test]
    fn real_gaunt_examples() {
        // all-zero m reduces to the complex Gaunt value
        assert_relative_eq!(
            real_gaunt(0, 0, 0, 0, 0, 0),
            1.0 / FOUR_PI.sqrt(),
            max_relative = 1e-14
        );
        // <Z11 Z11 Z00> = 1/sqrt(4 pi) by normalization of Z11^2
        assert_relative_eq!(
            real_gaunt(1, 1, 0, 1, 1, 0),
            1.0 / FOUR_PI.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn real_gaunt_is_permutation_symmetric() {
        let perms: [(u32, i32, u32, i32, u32, i32); 3] = [
            (1, 1, 2, -1, 1, 0),
            (2, -1, 1, 1, 1, 0),
            (1, 0, 1, 1, 2, -1),
        ];
        let base = real_gaunt(perms[0].0, perms[0].2, perms[0].4, perms[0].1, perms[0].3, perms[0].5);
        for p in &perms {
            let v = real_gaunt(p.0, p.2, p.4, p.1, p.3, p.5);
            assert_relative_eq!(v, base, max_relative = 1e-13);
        }
    }

    #[test]
    fn table_lookup_agrees_with_direct_evaluation() {
        let table = build_real_gaunt_table(2);
        assert!(!table.is_empty());
        for l1 in 0..=2u32 {
            for l2 in 0..=2u32 {
                for l3 in 0..=2u32 {
                    for m1 in -(l1 as i32)..=(l1 as i32) {
                        for m2 in -(l2 as i32)..=(l2 as i32) {
                            for m3 in -(l3 as i32)..=(l3 as i32) {
                                let direct = if triangle_ok(l1, l2, l3) {
                                    real_gaunt(l1, l2, l3, m1, m2, m3)
                                } else {
                                    0.0
                                };
                                let cached = table.get(l1, m1, l2, m2, l3, m3);
                                assert_relative_eq!(cached, direct, max_relative = 1e-14);
                            }
                        }
                    }
                }
            }
        }
    }
}
