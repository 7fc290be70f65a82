//! Bundled reference values for H through Ne: model binding energies on the
//! angular and spherically-restricted bases, numerical Hartree-Fock totals,
//! density-constraint ratios, and the carbon/fluorine per-pair energy
//! decompositions. The numbers live in `data/reference.txt` and are parsed
//! once on first access.

use std::sync::OnceLock;

use crate::elements;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementRef {
    pub z: u32,
    pub symbol: &'static str,
    /// Binding energy, full angular basis (Hartree).
    pub angular: f64,
    /// Binding energy, spherically-restricted basis.
    pub spherical: f64,
    pub hartree_fock: f64,
    /// L^3 bound ratio; must not exceed 1.
    pub ratio1: f64,
    /// von Weizsacker bound ratio; must not exceed 1.
    pub ratio2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Angular,
    Spherical,
}

/// One decomposition-table row. Same column conventions as
/// [`crate::observables::EnergyRow`], without the kinetic column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefRow {
    pub u_en: f64,
    pub u_ee: f64,
    pub u_sic: f64,
    pub u_pauli: f64,
    pub u: f64,
    pub minus_sc_over_beta: f64,
    pub minus_st_over_beta: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRef {
    pub z: u32,
    pub variant: Variant,
    pub pairs: Vec<RefRow>,
    pub total: RefRow,
}

/// Deviation as printed in the binding tables: the model value is the
/// denominator, |model - hf| / model * 100.
pub fn percent_deviation(model: f64, hartree_fock: f64) -> f64 {
    ((model - hartree_fock) / model).abs() * 100.0
}

pub fn element_ref(z: u32) -> Option<&'static ElementRef> {
    tables().elements.iter().find(|e| e.z == z)
}

pub fn decomposition_ref(z: u32, variant: Variant) -> Option<&'static DecompositionRef> {
    tables().decomps.iter().find(|d| d.z == z && d.variant == variant)
}

struct Tables {
    elements: Vec<ElementRef>,
    decomps: Vec<DecompositionRef>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| parse(include_str!("../data/reference.txt")).expect("bundled data"))
}

fn parse(text: &str) -> Result<Tables> {
    let bad = |line: &str| Error::Validation(format!("reference data: bad line: {line}"));
    let mut elements: Vec<ElementRef> = Vec::new();
    // (z, variant, pair# or None for total, row)
    let mut rows: Vec<(u32, Variant, Option<usize>, RefRow)> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let sym = tok.get(1).copied().unwrap_or("");
        let z = elements::parse_element(sym).map_err(|_| bad(line))?;
        let symbol = elements::symbol(z).expect("z in range");
        let nums: Vec<f64> = tok[2..]
            .iter()
            .skip(if tok[0] == "decomp" { 2 } else { 0 })
            .map(|t| t.parse::<f64>().map_err(|_| bad(line)))
            .collect::<Result<_>>()?;
        match tok[0] {
            "binding" if nums.len() == 4 => {
                // nums[0] is Z; keep symbol order authoritative
                if nums[0] as u32 != z {
                    return Err(bad(line));
                }
                elements.push(ElementRef {
                    z,
                    symbol,
                    angular: nums[1],
                    spherical: nums[2],
                    hartree_fock: nums[3],
                    ratio1: f64::NAN,
                    ratio2: f64::NAN,
                });
            }
            "constraint" if nums.len() == 2 => {
                let e = elements
                    .iter_mut()
                    .find(|e| e.z == z)
                    .ok_or_else(|| bad(line))?;
                e.ratio1 = nums[0];
                e.ratio2 = nums[1];
            }
            "decomp" if nums.len() == 8 => {
                let variant = match tok[2] {
                    "ang" => Variant::Angular,
                    "sph" => Variant::Spherical,
                    _ => return Err(bad(line)),
                };
                let pair = match tok[3] {
                    "total" => None,
                    p => Some(p.parse::<usize>().map_err(|_| bad(line))?),
                };
                rows.push((
                    z,
                    variant,
                    pair,
                    RefRow {
                        u_en: nums[0],
                        u_ee: nums[1],
                        u_sic: nums[2],
                        u_pauli: nums[3],
                        u: nums[4],
                        minus_sc_over_beta: nums[5],
                        minus_st_over_beta: nums[6],
                        f: nums[7],
                    },
                ));
            }
            _ => return Err(bad(line)),
        }
    }
    if elements.len() != 10 || elements.iter().any(|e| e.ratio1.is_nan()) {
        return Err(Error::Validation("reference data: incomplete tables".into()));
    }

    let mut decomps: Vec<DecompositionRef> = Vec::new();
    for (z, variant, pair, row) in rows {
        let d = match decomps.iter_mut().find(|d| d.z == z && d.variant == variant) {
            Some(d) => d,
            None => {
                decomps.push(DecompositionRef {
                    z,
                    variant,
                    pairs: Vec::new(),
                    total: RefRow {
                        u_en: f64::NAN,
                        u_ee: f64::NAN,
                        u_sic: f64::NAN,
                        u_pauli: f64::NAN,
                        u: f64::NAN,
                        minus_sc_over_beta: f64::NAN,
                        minus_st_over_beta: f64::NAN,
                        f: f64::NAN,
                    },
                });
                decomps.last_mut().expect("just pushed")
            }
        };
        match pair {
            Some(p) => {
                if p != d.pairs.len() + 1 {
                    return Err(Error::Validation(format!(
                        "reference data: pair rows out of order for Z={z}"
                    )));
                }
                d.pairs.push(row);
            }
            None => d.total = row,
        }
    }
    for d in &decomps {
        if d.total.f.is_nan() || d.pairs.is_empty() {
            return Err(Error::Validation(format!(
                "reference data: incomplete decomposition for Z={}",
                d.z
            )));
        }
    }
    Ok(Tables { elements, decomps })
}
