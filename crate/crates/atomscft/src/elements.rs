//! Symbol/name lookup for the elements this model covers (Z = 1..=10).

use crate::error::{Error, Result};

pub const MAX_Z: u32 = 10;

pub const SYMBOLS: [&str; 10] = ["H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne"];

const NAMES: [&str; 10] = [
    "hydrogen", "helium", "lithium", "beryllium", "boron", "carbon", "nitrogen", "oxygen",
    "fluorine", "neon",
];

pub fn symbol(z: u32) -> Result<&'static str> {
    if (1..=MAX_Z).contains(&z) {
        Ok(SYMBOLS[(z - 1) as usize])
    } else {
        Err(Error::UnknownElement(format!("Z = {z}")))
    }
}

/// Accepts a symbol ("C"), a full name ("carbon"), or a bare number ("6").
pub fn parse_element(input: &str) -> Result<u32> {
    let trimmed = input.trim();
    if let Ok(z) = trimmed.parse::<u32>() {
        return if (1..=MAX_Z).contains(&z) {
            Ok(z)
        } else {
            Err(Error::UnknownElement(input.to_string()))
        };
    }
    let lower = trimmed.to_ascii_lowercase();
    for (i, sym) in SYMBOLS.iter().enumerate() {
        if sym.to_ascii_lowercase() == lower || NAMES[i] == lower {
            return Ok(i as u32 + 1);
        }
    }
    Err(Error::UnknownElement(input.to_string()))
}
