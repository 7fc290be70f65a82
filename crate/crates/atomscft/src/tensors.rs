//! Overlap, Laplacian and triple-product tensors over the Gaussian basis.
//!
//! All three have closed forms because every integrand is a polynomial times
//! a single Gaussian. The triple-product tensor is the expensive one (it
//! couples angular blocks through the real Gaunt coefficients), so it is
//! stored sparsely as canonical i <= j <= k entries and can be cached on disk
//! keyed by a fingerprint of the basis.

use std::io::{Read as _, Write as _};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::angular::{build_real_gaunt_table, RealGauntTable};
use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::math::ln_gamma_half;

/// Largest tolerated relative asymmetry of the raw Laplacian matrix before
/// symmetrization. The closed form is symmetric up to rounding; anything
/// beyond rounding noise means the assembly is wrong.
const LAPLACE_ASYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Tensors {
    pub overlap: DMatrix<f64>,
    pub laplace: DMatrix<f64>,
    pub gamma: GammaTensor,
}

/// Overlap matrix: block diagonal in (l, m), with
/// S_ij = (2 sqrt(c_i c_j) / (c_i + c_j))^(l + 3/2) inside a block.
pub fn overlap_matrix(basis: &BasisSet) -> DMatrix<f64> {
    let n = basis.len();
    let mut s = DMatrix::zeros(n, n);
    for (_, idx) in basis.lm_groups() {
        for &i in &idx {
            let fi = basis.function(i);
            for &j in &idx {
                let fj = basis.function(j);
                let ratio = 2.0 * (fi.c * fj.c).sqrt() / (fi.c + fj.c);
                s[(i, j)] = ratio.powf(fi.index.l as f64 + 1.5);
            }
        }
    }
    s
}

/// Laplacian matrix, assembled from the closed form
/// L_ij = [2 c_i / (c_i + c_j)] [c_i (l_i - l_j) - c_j (2 l_i + 3)] S_ji
/// and then symmetrized. Within a block l_i = l_j, so the value reduces to
/// -(2l + 3) 2 c_i c_j / (c_i + c_j) S_ij; the raw form is kept because its
/// residual asymmetry is a free consistency check on the assembly.
pub fn laplace_matrix(basis: &BasisSet) -> Result<DMatrix<f64>> {
    let s = overlap_matrix(basis);
    let n = basis.len();
    let mut raw = DMatrix::zeros(n, n);
    for (_, idx) in basis.lm_groups() {
        for &i in &idx {
            let fi = basis.function(i);
            for &j in &idx {
                let fj = basis.function(j);
                let li = fi.index.l as f64;
                let lj = fj.index.l as f64;
                raw[(i, j)] = 2.0 * fi.c / (fi.c + fj.c)
                    * (fi.c * (li - lj) - fj.c * (2.0 * li + 3.0))
                    * s[(j, i)];
            }
        }
    }
    let scale = raw.amax();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((raw[(i, j)] - raw[(j, i)]).abs());
        }
    }
    if worst > LAPLACE_ASYMMETRY_TOL * scale {
        return Err(Error::Linalg(format!(
            "laplacian asymmetry {:.3e} exceeds {:.1e} of scale {:.3e}",
            worst, LAPLACE_ASYMMETRY_TOL, scale
        )));
    }
    let sym = (&raw + raw.transpose()) * 0.5;
    Ok(sym)
}

/// Sparse symmetric rank-3 tensor of triple products
/// Gamma_ijk = integral of f_i f_j f_k over space, stored once per canonical
/// (i <= j <= k) index triple.
#[derive(Debug, Clone)]
pub struct GammaTensor {
    dim: usize,
    entries: Vec<(u32, u32, u32, f64)>,
}

impl GammaTensor {
    pub fn build(basis: &BasisSet, table: &RealGauntTable) -> Self {
        let ln_norm: Vec<f64> = basis.functions().iter().map(|f| f.norm.ln()).collect();
        let blocks = basis.blocks();
        let mut entries = Vec::new();
        for (bi, b1) in blocks.iter().enumerate() {
            for (bj, b2) in blocks.iter().enumerate().skip(bi) {
                for b3 in blocks.iter().skip(bj) {
                    let alpha = table.get(b1.l, b1.m, b2.l, b2.m, b3.l, b3.m);
                    if alpha == 0.0 {
                        continue;
                    }
                    let l_sum = b1.l + b2.l + b3.l;
                    // radial prefactor: Gamma((L+3)/2) / (2 (c_i+c_j+c_k)^((L+3)/2))
                    let ln_pref = ln_gamma_half(l_sum + 3) - std::f64::consts::LN_2;
                    let half_pow = 0.5 * (l_sum + 3) as f64;
                    for i in b1.start..b1.start + b1.len {
                        let j_lo = if b2.start == b1.start { i } else { b2.start };
                        for j in j_lo..b2.start + b2.len {
                            let k_lo = if b3.start == b2.start { j } else { b3.start };
                            for k in k_lo..b3.start + b3.len {
                                let c_sum = basis.function(i).c
                                    + basis.function(j).c
                                    + basis.function(k).c;
                                let v = alpha
                                    * (ln_norm[i] + ln_norm[j] + ln_norm[k] + ln_pref
                                        - half_pow * c_sum.ln())
                                    .exp();
                                entries.push((i as u32, j as u32, k as u32, v));
                            }
                        }
                    }
                }
            }
        }
        GammaTensor { dim: basis.len(), entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(u32, u32, u32, f64)] {
        &self.entries
    }

    /// M_ab = sum_c Gamma_abc w_c. Symmetric because the permutation set of
    /// each canonical entry is closed under swapping the first two slots.
    pub fn contract_field(&self, w: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(w.len(), self.dim);
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, k, v) in &self.entries {
            for &(a, b, c) in distinct_perms(i, j, k).as_slice() {
                m[(a as usize, b as usize)] += v * w[c as usize];
            }
        }
        m
    }

    /// v_c = sum_ab Gamma_abc q_ab.
    pub fn contract_matrix(&self, q: &DMatrix<f64>) -> DVector<f64> {
        assert_eq!(q.nrows(), self.dim);
        assert_eq!(q.ncols(), self.dim);
        let mut out = DVector::zeros(self.dim);
        for &(i, j, k, v) in &self.entries {
            for &(a, b, c) in distinct_perms(i, j, k).as_slice() {
                out[c as usize] += v * q[(a as usize, b as usize)];
            }
        }
        out
    }

    pub fn save(&self, path: &Path, fingerprint: u64) -> Result<()> {
        let mut buf = Vec::with_capacity(32 + self.entries.len() * 20);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&fingerprint.to_le_bytes());
        buf.extend_from_slice(&(self.dim as u64).to_le_bytes());
        buf.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for &(i, j, k, v) in &self.entries {
            buf.extend_from_slice(&i.to_le_bytes());
            buf.extend_from_slice(&j.to_le_bytes());
            buf.extend_from_slice(&k.to_le_bytes());
            buf.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    /// Load a cached tensor. A missing file, a stale fingerprint, or any
    /// corruption yields Ok(None): the caller rebuilds and overwrites.
    pub fn load(path: &Path, dim: usize, fingerprint: u64) -> Result<Option<Self>> {
        let mut raw = Vec::new();
        match std::fs::File::open(path) {
            Ok(mut f) => {
                f.read_to_end(&mut raw)?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        if raw.len() < 32 || &raw[0..4] != MAGIC {
            return Ok(None);
        }
        let rd_u32 = |o: usize| u32::from_le_bytes(raw[o..o + 4].try_into().unwrap());
        let rd_u64 = |o: usize| u64::from_le_bytes(raw[o..o + 8].try_into().unwrap());
        if rd_u32(4) != VERSION || rd_u64(8) != fingerprint || rd_u64(16) != dim as u64 {
            return Ok(None);
        }
        let count = rd_u64(24) as usize;
        if raw.len() != 32 + count * 20 {
            return Ok(None);
        }
        let mut entries = Vec::with_capacity(count);
        for e in 0..count {
            let o = 32 + e * 20;
            let i = rd_u32(o);
            let j = rd_u32(o + 4);
            let k = rd_u32(o + 8);
            let v = f64::from_le_bytes(raw[o + 12..o + 20].try_into().unwrap());
            if (k as usize) >= dim || i > j || j > k || !v.is_finite() {
                return Ok(None);
            }
            entries.push((i, j, k, v));
        }
        Ok(Some(GammaTensor { dim, entries }))
    }
}

const MAGIC: &[u8; 4] = b"ASG1";
const VERSION: u32 = 1;

/// Distinct permutations of a sorted triple, at most six.
fn distinct_perms(i: u32, j: u32, k: u32) -> smallvec::SmallVec6 {
    use smallvec::SmallVec6;
    let mut out = SmallVec6::new();
    if i == j && j == k {
        out.push((i, i, i));
    } else if i == j {
        out.push((i, i, k));
        out.push((i, k, i));
        out.push((k, i, i));
    } else if j == k {
        out.push((i, j, j));
        out.push((j, i, j));
        out.push((j, j, i));
    } else {
        out.push((i, j, k));
        out.push((i, k, j));
        out.push((j, i, k));
        out.push((j, k, i));
        out.push((k, i, j));
        out.push((k, j, i));
    }
    out
}

/// A fixed-capacity vector of up to six index triples, enough for every
/// permutation set; avoids a heap allocation in the contraction inner loop.
mod smallvec {
    pub struct SmallVec6 {
        items: [(u32, u32, u32); 6],
        len: usize,
    }

    impl SmallVec6 {
        pub fn new() -> Self {
            SmallVec6 { items: [(0, 0, 0); 6], len: 0 }
        }

        pub fn push(&mut self, t: (u32, u32, u32)) {
            self.items[self.len] = t;
            self.len += 1;
        }

        pub fn as_slice(&self) -> &[(u32, u32, u32)] {
            &self.items[..self.len]
        }
    }
}

/// FNV-1a over the channel definitions; identifies a basis for cache reuse.
pub fn basis_fingerprint(basis: &BasisSet) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for ch in basis.channels() {
        eat(&ch.l.to_le_bytes());
        eat(&(ch.count as u64).to_le_bytes());
        eat(&ch.c_min.to_bits().to_le_bytes());
        eat(&ch.c_max.to_bits().to_le_bytes());
    }
    h
}

pub fn build_tensors(basis: &BasisSet) -> Result<Tensors> {
    let table = build_real_gaunt_table(basis.lmax());
    Ok(Tensors {
        overlap: overlap_matrix(basis),
        laplace: laplace_matrix(basis)?,
        gamma: GammaTensor::build(basis, &table),
    })
}

/// Like [`build_tensors`] but reusing a cached triple-product tensor when the
/// fingerprint matches; cache misses rebuild and overwrite.
pub fn build_tensors_cached(basis: &BasisSet, cache_dir: &Path) -> Result<Tensors> {
    let fp = basis_fingerprint(basis);
    let path = cache_dir.join(format!("gamma-{fp:016x}.bin"));
    let gamma = match GammaTensor::load(&path, basis.len(), fp)? {
        Some(g) => g,
        None => {
            let table = build_real_gaunt_table(basis.lmax());
            let g = GammaTensor::build(basis, &table);
            g.save(&path, fp)?;
            g
        }
    };
    Ok(Tensors {
        overlap: overlap_matrix(basis),
        laplace: laplace_matrix(basis)?,
        gamma,
    })
}
