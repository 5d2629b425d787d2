//! Walsh transform over spin configurations: expansion of a function of the
//! 2^N classical configurations in products of sigma_z operators.
//!
//! Coefficients are indexed by a subset mask; bit h of the mask selects spin
//! h. The inversion uses orthogonality, `c_S = 2^-N sum_sigma prod_{h in S}
//! sigma_h * value(sigma)`, and is exact.

use crate::circuit::SpinConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WalshError {
    #[error("missing config index {0}")]
    MissingConfig(usize),
    #[error("duplicate config index {0}")]
    DuplicateConfig(usize),
    #[error("expected {expected} entries for {n} spins, got {got}")]
    WrongCount { n: usize, expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalshCoefficients {
    num_spins: usize,
    /// Indexed by subset mask, 0..2^N.
    coeffs: Vec<f64>,
}

impl WalshCoefficients {
    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    /// Coefficient of the product over the spins in `mask`.
    pub fn get(&self, mask: usize) -> f64 {
        self.coeffs[mask]
    }

    /// Order-0 term.
    pub fn constant(&self) -> f64 {
        self.coeffs[0]
    }

    /// Order-1 term of spin h (0-based).
    pub fn single(&self, h: usize) -> f64 {
        self.coeffs[1 << h]
    }

    /// Order-2 term of the pair (h, j), 0-based.
    pub fn pair(&self, h: usize, j: usize) -> f64 {
        assert_ne!(h, j);
        self.coeffs[(1 << h) | (1 << j)]
    }

    /// All unordered pairs `((h, j), coefficient)` with h < j.
    pub fn pairs(&self) -> Vec<((usize, usize), f64)> {
        let mut out = Vec::new();
        for h in 0..self.num_spins {
            for j in h + 1..self.num_spins {
                out.push(((h, j), self.pair(h, j)));
            }
        }
        out
    }

    /// Largest |coefficient| among terms with an odd number of spins.
    pub fn max_abs_odd(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask.count_ones() % 2 == 1)
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }

    /// Largest |coefficient| among even orders above the constant.
    pub fn max_abs_even_nonconstant(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(mask, _)| *mask != 0 && mask.count_ones() % 2 == 0)
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }

    /// Value of the expansion at one configuration (exact inverse transform).
    pub fn reconstruct(&self, config: SpinConfig) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(mask, c)| c * config.product(mask))
            .sum()
    }

    /// Coefficients grouped by order, for summaries.
    pub fn by_order(&self) -> Vec<Vec<(usize, f64)>> {
        let mut groups = vec![Vec::new(); self.num_spins + 1];
        for (mask, &c) in self.coeffs.iter().enumerate() {
            groups[mask.count_ones() as usize].push((mask, c));
        }
        groups
    }
}

/// Extract all 2^N Walsh coefficients from a complete per-config table.
pub fn walsh_extract(entries: &[(SpinConfig, f64)]) -> Result<WalshCoefficients, WalshError> {
    let n = entries
        .first()
        .map(|(c, _)| c.num_spins())
        .unwrap_or(0);
    let size = 1usize << n;
    if entries.len() != size {
        // Identify a duplicate or missing index for the error message.
        let mut seen = vec![false; size];
        for (c, _) in entries {
            if seen[c.index()] {
                return Err(WalshError::DuplicateConfig(c.index()));
            }
            seen[c.index()] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(WalshError::MissingConfig(missing));
        }
        return Err(WalshError::WrongCount {
            n,
            expected: size,
            got: entries.len(),
        });
    }
    let mut values = vec![f64::NAN; size];
    let mut seen = vec![false; size];
    for (c, v) in entries {
        if seen[c.index()] {
            return Err(WalshError::DuplicateConfig(c.index()));
        }
        seen[c.index()] = true;
        values[c.index()] = *v;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(WalshError::MissingConfig(missing));
    }
    Ok(walsh_from_dense(n, &values))
}

/// Transform of a dense table indexed by config index.
pub fn walsh_from_dense(num_spins: usize, values: &[f64]) -> WalshCoefficients {
    let size = 1usize << num_spins;
    assert_eq!(values.len(), size);
    let norm = 1.0 / size as f64;
    let coeffs = (0..size)
        .map(|mask| {
            let mut acc = 0.0;
            for index in 0..size {
                let config = SpinConfig::from_index(num_spins, index);
                acc += config.product(mask) * values[index];
            }
            acc * norm
        })
        .collect();
    WalshCoefficients { num_spins, coeffs }
}
