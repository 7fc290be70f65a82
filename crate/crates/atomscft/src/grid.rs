//! Product quadrature grid: log-spaced radial shells, Gauss-Legendre in cos(theta),
//! uniform in phi.
//!
//! The radial rule is a trapezoid in t = ln r with the r^2 volume jacobian folded
//! into the weights. Physical integrands here decay fast at both ends of the
//! radial window, where the trapezoid rule on a uniform t-grid converges
//! spectrally; the angular rules are exact for the low-degree harmonics the
//! basis can produce.

use crate::error::{Error, Result};
use crate::math::gauss_legendre;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_radial: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n_radial: 400, r_min: 1e-6, r_max: 50.0, n_theta: 32, n_phi: 64 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_radial < 2 {
            return Err(Error::InvalidConfig("grid needs at least 2 radial nodes".into()));
        }
        if !(self.r_min > 0.0) || !(self.r_max > self.r_min) {
            return Err(Error::InvalidConfig(format!(
                "grid radial window [{:e}, {:e}] must satisfy 0 < r_min < r_max",
                self.r_min, self.r_max
            )));
        }
        if self.n_theta < 1 || self.n_phi < 1 {
            return Err(Error::InvalidConfig("grid needs at least one angular node per axis".into()));
        }
        Ok(())
    }
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    /// Compact form `nr:rmin:rmax:ntheta:nphi`, e.g. `400:1e-6:50:32:64`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 5 {
            return Err(Error::Parse(format!(
                "grid spec '{s}' must have 5 fields nr:rmin:rmax:ntheta:nphi"
            )));
        }
        let bad = |field: &str| Error::Parse(format!("grid spec '{s}': bad field '{field}'"));
        let spec = GridSpec {
            n_radial: parts[0].parse().map_err(|_| bad(parts[0]))?,
            r_min: parts[1].parse().map_err(|_| bad(parts[1]))?,
            r_max: parts[2].parse().map_err(|_| bad(parts[2]))?,
            n_theta: parts[3].parse().map_err(|_| bad(parts[3]))?,
            n_phi: parts[4].parse().map_err(|_| bad(parts[4]))?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct QuadGrid {
    pub spec: GridSpec,
    pub r: Vec<f64>,
    /// Radial weights with the r^2 jacobian folded in: sum_k w_r[k] g(r_k) ~ int g r^2 dr.
    pub w_r: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub theta: Vec<f64>,
    pub w_theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub w_phi: f64,
}

impl QuadGrid {
    pub fn build(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_radial;
        let t0 = spec.r_min.ln();
        let h = (spec.r_max.ln() - t0) / (n - 1) as f64;
        let r: Vec<f64> = (0..n).map(|k| (t0 + h * k as f64).exp()).collect();
        let w_r: Vec<f64> = r
            .iter()
            .enumerate()
            .map(|(k, &rk)| {
                let end = k == 0 || k == n - 1;
                let trap = if end { 0.5 } else { 1.0 };
                trap * h * rk * rk * rk
            })
            .collect();

        let (x, w_theta) = gauss_legendre(spec.n_theta);
        let theta: Vec<f64> = x.iter().map(|&xi| xi.acos()).collect();

        let w_phi = 2.0 * std::f64::consts::PI / spec.n_phi as f64;
        let phi: Vec<f64> =
            (0..spec.n_phi).map(|b| (b as f64 + 0.5) * w_phi).collect();

        Ok(QuadGrid { spec, r, w_r, cos_theta: x, theta, w_theta, phi, w_phi })
    }

    pub fn n_nodes(&self) -> usize {
        self.r.len() * self.theta.len() * self.phi.len()
    }

    /// Full 3D integral of a field given as values[ir][itheta][iphi] flattened.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.n_nodes());
        let nt = self.theta.len();
        let np = self.phi.len();
        let mut total = 0.0;
        for (k, &wr) in self.w_r.iter().enumerate() {
            let mut shell = 0.0;
            for (a, &wt) in self.w_theta.iter().enumerate() {
                let base = (k * nt + a) * np;
                let ring: f64 = values[base..base + np].iter().sum();
                shell += wt * ring;
            }
            total += wr * shell;
        }
        total * self.w_phi
    }

    pub fn integrate_fn(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let mut total = 0.0;
        for (k, &rk) in self.r.iter().enumerate() {
            let mut shell = 0.0;
            for (a, &th) in self.theta.iter().enumerate() {
                let mut ring = 0.0;
                for &ph in &self.phi {
                    ring += f(rk, th, ph);
                }
                shell += self.w_theta[a] * ring;
            }
            total += self.w_r[k] * shell;
        }
        total * self.w_phi
    }

    /// Radial-only integral including the r^2 jacobian.
    pub fn integrate_radial(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.r.iter().zip(&self.w_r).map(|(&rk, &wk)| wk * f(rk)).sum()
    }
}
