//! Normalized angular Gaussian basis on an even-tempered exponent ladder.
//!
//! Each function is f(r, theta, phi) = N r^l exp(-c r^2) Z_l^m(theta, phi) with
//! N fixed by unit L2 norm and Z a real spherical harmonic. Functions sharing
//! (l, m) form contiguous blocks, which is what makes the overlap and Laplace
//! matrices block diagonal downstream.

use crate::error::{Error, Result};
use crate::math::gamma_half;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// One angular-momentum channel: `count` radial exponents spanning
/// [c_min, c_max] geometrically, replicated over all m in -l..=l.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub l: u32,
    pub count: usize,
    pub c_min: f64,
    pub c_max: f64,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count < 1 {
            return Err(Error::InvalidBasis(format!("channel l={} has count 0", self.l)));
        }
        if !(self.c_min > 0.0) {
            return Err(Error::InvalidBasis(format!(
                "channel l={}: c_min = {:e} must be positive",
                self.l, self.c_min
            )));
        }
        if self.c_max < self.c_min {
            return Err(Error::InvalidBasis(format!(
                "channel l={}: c_max = {:e} below c_min = {:e}",
                self.l, self.c_max, self.c_min
            )));
        }
        Ok(())
    }

    /// Geometric ladder c_p = c_min (c_max/c_min)^(p/(count-1)), p = 0..count.
    pub fn exponents(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.c_min];
        }
        let log_min = self.c_min.ln();
        let step = (self.c_max.ln() - log_min) / (self.count - 1) as f64;
        (0..self.count).map(|p| (log_min + step * p as f64).exp()).collect()
    }
}

/// `l:count:c_min:c_max` entries joined by commas,
/// e.g. `0:60:1e-15:1e11,1:20:1e-10:1e5,2:10:1e-6:1e3`.
pub fn parse_channels(s: &str) -> Result<Vec<ChannelSpec>> {
    let mut channels = Vec::new();
    for part in s.split(',') {
        let fields: Vec<&str> = part.trim().split(':').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "channel '{part}' must be l:count:c_min:c_max"
            )));
        }
        let bad = |f: &str| Error::Parse(format!("channel '{part}': bad field '{f}'"));
        let spec = ChannelSpec {
            l: fields[0].parse().map_err(|_| bad(fields[0]))?,
            count: fields[1].parse().map_err(|_| bad(fields[1]))?,
            c_min: fields[2].parse().map_err(|_| bad(fields[2]))?,
            c_max: fields[3].parse().map_err(|_| bad(fields[3]))?,
        };
        spec.validate()?;
        channels.push(spec);
    }
    if channels.is_empty() {
        return Err(Error::Parse("empty channel list".into()));
    }
    Ok(channels)
}

pub fn channels_to_string(channels: &[ChannelSpec]) -> String {
    channels
        .iter()
        .map(|c| format!("{}:{}:{:e}:{:e}", c.l, c.count, c.c_min, c.c_max))
        .collect::<Vec<_>>()
        .join(",")
}

/// Position of one function: radial slot `p` (0-based) within channel `l`, harmonic `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisIndex {
    pub l: u32,
    pub m: i32,
    pub p: usize,
}

#[derive(Debug, Clone)]
pub struct BasisFunction {
    pub index: BasisIndex,
    pub c: f64,
    pub norm: f64,
}

impl BasisFunction {
    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        self.norm * r.powi(self.index.l as i32) * (-self.c * r * r).exp()
    }

    /// d/dr of the radial factor.
    #[inline]
    pub fn radial_deriv(&self, r: f64) -> f64 {
        let l = self.index.l as i32;
        let gauss = (-self.c * r * r).exp();
        let power = if l == 0 { 0.0 } else { l as f64 * r.powi(l - 1) };
        self.norm * gauss * (power - 2.0 * self.c * r.powi(l + 1))
    }
}

/// Contiguous run of functions sharing (l, m); all blocks of a channel share
/// the same exponent ladder.
#[derive(Debug, Clone, Copy)]
pub struct BasisBlock {
    pub l: u32,
    pub m: i32,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone)]
pub struct BasisSet {
    channels: Vec<ChannelSpec>,
    functions: Vec<BasisFunction>,
    blocks: Vec<BasisBlock>,
    lmax: u32,
}

/// Unit-norm prefactor sqrt(2 (2c)^(l+3/2) / Gamma(l+3/2)).
pub fn norm_factor(l: u32, c: f64) -> f64 {
    let power = l as f64 + 1.5;
    (2.0 * (2.0 * c).powf(power) / gamma_half(2 * l + 3)).sqrt()
}

pub fn build_basis(channels: &[ChannelSpec]) -> Result<BasisSet> {
    if channels.is_empty() {
        return Err(Error::InvalidBasis("no channels given".into()));
    }
    let mut functions = Vec::new();
    let mut blocks = Vec::new();
    let mut lmax = 0;
    for spec in channels {
        spec.validate()?;
        lmax = lmax.max(spec.l);
        let exps = spec.exponents();
        let l = spec.l;
        for m in -(l as i32)..=(l as i32) {
            let start = functions.len();
            for (p, &c) in exps.iter().enumerate() {
                functions.push(BasisFunction {
                    index: BasisIndex { l, m, p },
                    c,
                    norm: norm_factor(l, c),
                });
            }
            blocks.push(BasisBlock { l, m, start, len: exps.len() });
        }
    }
    Ok(BasisSet { channels: channels.to_vec(), functions, blocks, lmax })
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    pub fn function(&self, i: usize) -> &BasisFunction {
        &self.functions[i]
    }

    pub fn blocks(&self) -> &[BasisBlock] {
        &self.blocks
    }

    pub fn channels(&self) -> &[ChannelSpec] {
        &self.channels
    }

    pub fn lmax(&self) -> u32 {
        self.lmax
    }

    /// Restriction to the l = 0 channels (the spherical sector).
    pub fn spherical_channels(&self) -> Vec<ChannelSpec> {
        self.channels.iter().filter(|c| c.l == 0).copied().collect()
    }

    /// Global function indices grouped by (l, m), in first-appearance order.
    /// Channels sharing an (l, m) contribute to one group, so a group is the
    /// complete radial ladder for that angular momentum component.
    pub fn lm_groups(&self) -> Vec<((u32, i32), Vec<usize>)> {
        let mut groups: Vec<((u32, i32), Vec<usize>)> = Vec::new();
        for b in &self.blocks {
            let indices = b.start..b.start + b.len;
            match groups.iter_mut().find(|(key, _)| *key == (b.l, b.m)) {
                Some((_, v)) => v.extend(indices),
                None => groups.push(((b.l, b.m), indices.collect())),
            }
        }
        groups
    }
}

pub fn eval_basis(basis: &BasisSet, r: f64, theta: f64, phi: f64) -> DVector<f64> {
    let mut out = DVector::zeros(basis.len());
    for block in basis.blocks() {
        let z = real_sph_harm(block.l, block.m, theta, phi);
        for k in 0..block.len {
            let f = &basis.functions[block.start + k];
            out[block.start + k] = f.radial(r) * z;
        }
    }
    out
}

/// Values at r = 0: only l = 0 survives (r^l kills the rest), and Z_0^0 = (4 pi)^(-1/2).
pub fn basis_at_origin(basis: &BasisSet) -> DVector<f64> {
    let z00 = 1.0 / FOUR_PI.sqrt();
    let mut out = DVector::zeros(basis.len());
    for (i, f) in basis.functions.iter().enumerate() {
        if f.index.l == 0 {
            out[i] = f.norm * z00;
        }
    }
    out
}

/// Real spherical harmonic: sqrt(2) Re Y_l^m for m > 0, Y_l^0 for m = 0,
/// sqrt(2) (-1)^|m| Im Y_l^|m| for m < 0, with the Condon-Shortley phase kept
/// inside the associated Legendre factor.
pub fn real_sph_harm(l: u32, m: i32, theta: f64, phi: f64) -> f64 {
    real_sph_harm_grad(l, m, theta, phi).0
}

/// Value plus partial derivatives with respect to theta and phi.
pub fn real_sph_harm_grad(l: u32, m: i32, theta: f64, phi: f64) -> (f64, f64, f64) {
    let k = m.unsigned_abs();
    assert!(k <= l, "|m| = {k} exceeds l = {l}");
    let (p, dp) = legendre_theta(l, k, theta);
    let pref = harmonic_norm(l, k);
    if m == 0 {
        return (pref * p, pref * dp, 0.0);
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let kf = k as f64;
    if m > 0 {
        let (c, s) = ((kf * phi).cos(), (kf * phi).sin());
        (sqrt2 * pref * p * c, sqrt2 * pref * dp * c, -kf * sqrt2 * pref * p * s)
    } else {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let (c, s) = ((kf * phi).cos(), (kf * phi).sin());
        (
            sign * sqrt2 * pref * p * s,
            sign * sqrt2 * pref * dp * s,
            sign * kf * sqrt2 * pref * p * c,
        )
    }
}

fn harmonic_norm(l: u32, k: u32) -> f64 {
    let mut ratio = 1.0; // (l-k)! / (l+k)!
    for j in (l - k + 1)..=(l + k) {
        ratio /= j as f64;
    }
    ((2 * l + 1) as f64 / FOUR_PI * ratio).sqrt()
}

/// Associated Legendre P_l^k(cos theta) with Condon-Shortley phase, plus
/// d/d theta, carried through the recurrence so the poles stay finite.
fn legendre_theta(l: u32, k: u32, theta: f64) -> (f64, f64) {
    let x = theta.cos();
    let s = theta.sin();
    // P_k^k and its theta-derivative
    let mut dfact = 1.0;
    for j in 1..=k {
        dfact *= (2 * j - 1) as f64;
    }
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut p_prev = sign * dfact * s.powi(k as i32); // P_k^k
    let mut dp_prev = if k == 0 {
        0.0
    } else {
        sign * dfact * k as f64 * s.powi(k as i32 - 1) * x
    };
    if l == k {
        return (p_prev, dp_prev);
    }
    // P_{k+1}^k = x (2k+1) P_k^k
    let fac = (2 * k + 1) as f64;
    let mut p = x * fac * p_prev;
    let mut dp = fac * (-s * p_prev + x * dp_prev);
    for ll in (k + 2)..=l {
        let a = (2 * ll - 1) as f64;
        let b = (ll + k - 1) as f64;
        let denom = (ll - k) as f64;
        let p_next = (a * x * p - b * p_prev) / denom;
        let dp_next = (a * (-s * p + x * dp) - b * dp_prev) / denom;
        p_prev = p;
        dp_prev = dp;
        p = p_next;
        dp = dp_next;
    }
    (p, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, QuadGrid};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn angular_grid() -> QuadGrid {
        QuadGrid::build(GridSpec { n_radial: 2, r_min: 1.0, r_max: 2.0, n_theta: 24, n_phi: 48 })
            .unwrap()
    }

    /// Quadrature of Z_lm Z_l'm' over the sphere.
    fn harmonic_overlap(l1: u32, m1: i32, l2: u32, m2: i32) -> f64 {
        let g = angular_grid();
        let mut total = 0.0;
        for (a, &th) in g.theta.iter().enumerate() {
            let mut ring = 0.0;
            for &ph in &g.phi {
                ring += real_sph_harm(l1, m1, th, ph) * real_sph_harm(l2, m2, th, ph);
            }
            total += g.w_theta[a] * ring;
        }
        total * g.w_phi
    }

    #[test]
    fn harmonics_orthonormal_up_to_l4() {
        let mut pairs = Vec::new();
        for l in 0..=4u32 {
            for m in -(l as i32)..=(l as i32) {
                pairs.push((l, m));
            }
        }
        for (i, &(l1, m1)) in pairs.iter().enumerate() {
            for &(l2, m2) in &pairs[i..] {
                let val = harmonic_overlap(l1, m1, l2, m2);
                let expect = if (l1, m1) == (l2, m2) { 1.0 } else { 0.0 };
                assert!(
                    (val - expect).abs() < 1e-12,
                    "<Z{l1}{m1}|Z{l2}{m2}> = {val}, expected {expect}"
                );
            }
        }
    }

    #[test]
    fn polar_value_matches_closed_form() {
        let expect = (3.0 / FOUR_PI).sqrt();
        assert_relative_eq!(real_sph_harm(1, 0, 0.0, 0.3), expect, max_relative = 1e-14);
        // Z_1^1 = -sqrt(3/4pi) sin(theta) cos(phi) under this phase convention
        let th = 1.1;
        let ph = 0.7;
        assert_relative_eq!(
            real_sph_harm(1, 1, th, ph),
            -(3.0 / FOUR_PI).sqrt() * th.sin() * ph.cos(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            real_sph_harm(1, -1, th, ph),
            (3.0 / FOUR_PI).sqrt() * th.sin() * ph.sin(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-6;
        for l in 0..=4u32 {
            for m in -(l as i32)..=(l as i32) {
                for &(th, ph) in &[(0.9, 0.4), (2.2, 5.1), (1.57, 3.3)] {
                    let (_, dth, dph) = real_sph_harm_grad(l, m, th, ph);
                    let num_th =
                        (real_sph_harm(l, m, th + h, ph) - real_sph_harm(l, m, th - h, ph))
                            / (2.0 * h);
                    let num_ph =
                        (real_sph_harm(l, m, th, ph + h) - real_sph_harm(l, m, th, ph - h))
                            / (2.0 * h);
                    assert!((dth - num_th).abs() < 1e-7, "l={l} m={m} dtheta");
                    assert!((dph - num_ph).abs() < 1e-7, "l={l} m={m} dphi");
                }
            }
        }
    }

    proptest! {
        // Z_l^m(pi - theta, phi + pi) = (-1)^l Z_l^m(theta, phi)
        #[test]
        fn parity_property(l in 0u32..=4, m_shift in 0u32..9, theta in 0.01f64..3.13, phi in 0.0f64..6.28) {
            let m_range = 2 * l + 1;
            let m = (m_shift % m_range) as i32 - l as i32;
            let direct = real_sph_harm(l, m, theta, phi);
            let flipped = real_sph_harm(l, m, std::f64::consts::PI - theta, phi + std::f64::consts::PI);
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((flipped - sign * direct).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_factor_example() {
        // l = 0, c = 1e-2
        assert_relative_eq!(norm_factor(0, 1e-2), 0.0798938, max_relative = 1e-5);
    }

    #[test]
    fn every_function_has_unit_norm() {
        let basis = build_basis(&[
            ChannelSpec { l: 0, count: 5, c_min: 1e-4, c_max: 1e6 },
            ChannelSpec { l: 1, count: 4, c_min: 1e-3, c_max: 1e4 },
            ChannelSpec { l: 2, count: 3, c_min: 1e-2, c_max: 1e2 },
        ])
        .unwrap();
        for f in basis.functions() {
            // window scaled to the exponent so the quadrature sees the whole function
            let scale = 1.0 / (2.0 * f.c).sqrt();
            let g = QuadGrid::build(GridSpec {
                n_radial: 400,
                r_min: scale * 1e-4,
                r_max: scale * 40.0,
                n_theta: 8,
                n_phi: 8,
            })
            .unwrap();
            let radial = g.integrate_radial(|r| {
                let v = f.radial(r);
                v * v
            });
            // angular part is exactly normalized; radial quadrature carries the error
            assert_relative_eq!(radial, 1.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn even_tempered_ratio_example() {
        let spec = ChannelSpec { l: 0, count: 150, c_min: 1e-15, c_max: 1e11 };
        let exps = spec.exponents();
        assert_eq!(exps.len(), 150);
        assert_relative_eq!(exps[1] / exps[0], 10f64.powf(26.0 / 149.0), max_relative = 1e-12);
        assert_relative_eq!(exps[0], 1e-15, max_relative = 1e-12);
        assert_relative_eq!(exps[149], 1e11, max_relative = 1e-12);
        // strictly increasing
        for p in 1..150 {
            assert!(exps[p] > exps[p - 1]);
        }
    }

    #[test]
    fn single_exponent_channel() {
        let spec = ChannelSpec { l: 0, count: 1, c_min: 0.5, c_max: 3.0 };
        assert_eq!(spec.exponents(), vec![0.5]);
    }

    #[test]
    fn production_scale_count() {
        let basis = build_basis(&[
            ChannelSpec { l: 0, count: 150, c_min: 1e-15, c_max: 1e11 },
            ChannelSpec { l: 1, count: 50, c_min: 1e-10, c_max: 1e5 },
            ChannelSpec { l: 2, count: 25, c_min: 1e-6, c_max: 1e3 },
        ])
        .unwrap();
        assert_eq!(basis.len(), 150 + 3 * 50 + 5 * 25);
        assert_eq!(basis.blocks().len(), 1 + 3 + 5);
    }

    #[test]
    fn rejects_bad_channels() {
        assert!(build_basis(&[]).is_err());
        assert!(build_basis(&[ChannelSpec { l: 0, count: 0, c_min: 1.0, c_max: 2.0 }]).is_err());
        assert!(build_basis(&[ChannelSpec { l: 0, count: 3, c_min: -1.0, c_max: 2.0 }]).is_err());
        assert!(build_basis(&[ChannelSpec { l: 0, count: 3, c_min: 1.0, c_max: 0.5 }]).is_err());
    }

    #[test]
    fn origin_values() {
        let basis = build_basis(&[
            ChannelSpec { l: 0, count: 2, c_min: 0.5, c_max: 2.0 },
            ChannelSpec { l: 1, count: 2, c_min: 0.5, c_max: 2.0 },
        ])
        .unwrap();
        let at0 = basis_at_origin(&basis);
        for (i, f) in basis.functions().iter().enumerate() {
            if f.index.l == 0 {
                assert_relative_eq!(at0[i], f.norm / FOUR_PI.sqrt(), max_relative = 1e-15);
            } else {
                assert_eq!(at0[i], 0.0);
            }
        }
        // matches the limit of eval_basis at tiny r
        let near0 = eval_basis(&basis, 1e-9, 0.3, 0.4);
        for i in 0..basis.len() {
            if basis.function(i).index.l == 0 {
                assert_relative_eq!(near0[i], at0[i] , max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn channel_string_round_trip() {
        let channels = parse_channels("0:60:1e-15:1e11,1:20:1e-10:1e5,2:10:1e-6:1e3").unwrap();
        assert_eq!(channels.len(), 3);
        assert_eq!(channels[1].count, 20);
        let s = channels_to_string(&channels);
        assert_eq!(parse_channels(&s).unwrap(), channels);
        assert!(parse_channels("0:60:1e-15").is_err());
        assert!(parse_channels("").is_err());
    }

    #[test]
    fn radial_deriv_matches_finite_difference() {
        let basis = build_basis(&[
            ChannelSpec { l: 0, count: 2, c_min: 0.3, c_max: 5.0 },
            ChannelSpec { l: 2, count: 2, c_min: 0.3, c_max: 5.0 },
        ])
        .unwrap();
        let h = 1e-7;
        for f in basis.functions() {
            for &r in &[0.05, 0.7, 2.5] {
                let num = (f.radial(r + h) - f.radial(r - h)) / (2.0 * h);
                assert_relative_eq!(f.radial_deriv(r), num, max_relative = 1e-5);
            }
        }
    }
}
