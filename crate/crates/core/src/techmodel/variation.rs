//! Per-cell discharge-current variation for Monte Carlo runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::TechProfile;
use crate::error::{Error, Result};

/// Lower bound on a sampled current, relative to `i_sat0`.
pub const CURRENT_FLOOR: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationConfig {
    /// 1σ relative deviation of each cell's discharge current.
    pub sigma_isat_rel: f64,
    pub seed: u64,
    pub trials: usize,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self::none()
    }
}

impl VariationConfig {
    /// No variation, a single trial.
    pub fn none() -> Self {
        VariationConfig {
            sigma_isat_rel: 0.0,
            seed: 0,
            trials: 1,
        }
    }

    pub fn new(sigma_isat_rel: f64, seed: u64, trials: usize) -> Result<Self> {
        let v = VariationConfig {
            sigma_isat_rel,
            seed,
            trials,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_isat_rel >= 0.0) || !self.sigma_isat_rel.is_finite() {
            return Err(Error::config("variation.sigma", "must be finite and >= 0"));
        }
        if self.trials == 0 {
            return Err(Error::config("variation.trials", "must be >= 1"));
        }
        Ok(())
    }

    pub fn is_nominal(&self) -> bool {
        self.sigma_isat_rel == 0.0
    }
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn row_stream_seed(seed: u64, trial: usize, bank: usize, row: usize) -> u64 {
    let mut s = splitmix(seed);
    for part in [trial as u64, bank as u64, row as u64] {
        s = splitmix(s ^ part);
    }
    s
}

/// Fills `out` with the currents of one row's cells.
///
/// Each row draws from its own stream keyed by `(seed, trial, bank, row)`, and
/// column `j` is the `j`-th draw, so a cell's current depends on nothing else.
pub fn sample_row_currents(
    profile: &TechProfile,
    variation: &VariationConfig,
    bank: usize,
    row: usize,
    trial: usize,
    out: &mut [f64],
) {
    if variation.is_nominal() {
        out.fill(profile.i_sat0);
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(row_stream_seed(variation.seed, trial, bank, row));
    let sigma = variation.sigma_isat_rel;
    for cell in out.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *cell = profile.i_sat0 * (1.0 + sigma * z).max(CURRENT_FLOOR);
    }
}

/// Row-major `rows × cols` matrix of cell currents.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl CurrentMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Samples every cell of array `bank` for `trial`.
pub fn sample_bank_currents(
    profile: &TechProfile,
    variation: &VariationConfig,
    rows: usize,
    cols: usize,
    bank: usize,
    trial: usize,
) -> Result<CurrentMatrix> {
    if trial >= variation.trials {
        return Err(Error::Precondition(format!(
            "trial {trial} out of range for {} trials",
            variation.trials
        )));
    }
    let mut data = vec![0.0; rows * cols];
    for (r, chunk) in data.chunks_mut(cols.max(1)).enumerate().take(rows) {
        sample_row_currents(profile, variation, bank, r, trial, chunk);
    }
    Ok(CurrentMatrix { rows, cols, data })
}

/// Samples the cells of a single array (bank 0).
pub fn sample_cell_currents(
    profile: &TechProfile,
    variation: &VariationConfig,
    rows: usize,
    cols: usize,
    trial: usize,
) -> Result<CurrentMatrix> {
    sample_bank_currents(profile, variation, rows, cols, 0, trial)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sot() -> TechProfile {
        TechProfile::builtin("sot").unwrap()
    }

    #[test]
    fn zero_sigma_gives_nominal_current() {
        let p = sot();
        let m = sample_cell_currents(&p, &VariationConfig::none(), 4, 16, 0).unwrap();
        assert!(m.data.iter().all(|&i| i == p.i_sat0));
    }

    #[test]
    fn sampling_is_deterministic_and_keyed() {
        let p = sot();
        let v = VariationConfig::new(0.05, 42, 3).unwrap();
        let a = sample_cell_currents(&p, &v, 8, 32, 1).unwrap();
        let b = sample_cell_currents(&p, &v, 8, 32, 1).unwrap();
        assert_eq!(a, b);
        let other_trial = sample_cell_currents(&p, &v, 8, 32, 2).unwrap();
        assert_ne!(a, other_trial);
        let other_bank = sample_bank_currents(&p, &v, 8, 32, 1, 1).unwrap();
        assert_ne!(a, other_bank);
        // A cell's value does not depend on the matrix shape.
        let wide = sample_cell_currents(&p, &v, 9, 40, 1).unwrap();
        assert_eq!(a.row(3)[..32], wide.row(3)[..32]);
    }

    #[test]
    fn trial_must_be_in_range() {
        let p = sot();
        let v = VariationConfig::new(0.05, 1, 2).unwrap();
        assert!(sample_cell_currents(&p, &v, 2, 2, 2).is_err());
    }

    #[test]
    fn sample_mean_converges_to_nominal() {
        let p = sot();
        let v = VariationConfig::new(0.05, 7, 1).unwrap();
        let m = sample_cell_currents(&p, &v, 1000, 1000, 0).unwrap();
        let mean = m.data.iter().sum::<f64>() / m.data.len() as f64;
        assert!(
            (mean / p.i_sat0 - 1.0).abs() < 1e-3,
            "mean ratio {}",
            mean / p.i_sat0
        );
        let var = m
            .data
            .iter()
            .map(|&i| (i / p.i_sat0 - 1.0).powi(2))
            .sum::<f64>()
            / m.data.len() as f64;
        assert!((var.sqrt() - 0.05).abs() < 1e-3);
    }

    #[test]
    fn currents_are_floored() {
        let p = sot();
        let v = VariationConfig::new(5.0, 3, 1).unwrap();
        let m = sample_cell_currents(&p, &v, 50, 50, 0).unwrap();
        assert!(m.data.iter().all(|&i| i >= CURRENT_FLOOR * p.i_sat0));
    }
}
