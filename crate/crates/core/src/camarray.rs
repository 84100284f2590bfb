//! Banked CAM arrays: storage, per-row matchline delays, latch-clock
//! thresholding, and per-search energy/latency.
//!
//! A row is a match when its matchline is still above the sense threshold at
//! its latch clock edge, i.e. when its discharge delay exceeds the clock time.
//! Rows with no mismatching cell never discharge and always match.

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::techmodel::{
    sample_row_currents, MitigationConfig, MitigationKind, TechProfile, VariationConfig,
};

/// Geometry, technology and mitigation of one physical array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    pub profile: TechProfile,
    pub mitigation: MitigationConfig,
}

impl ArrayConfig {
    pub fn new(
        rows: usize,
        cols: usize,
        profile: TechProfile,
        mitigation: MitigationConfig,
    ) -> Result<Self> {
        let config = ArrayConfig {
            rows,
            cols,
            profile,
            mitigation,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 {
            return Err(Error::config("array.rows", "must be >= 1"));
        }
        if self.cols == 0 {
            return Err(Error::config("array.cols", "must be >= 1"));
        }
        self.profile.validate()?;
        self.mitigation.validate()
    }

    /// Variation-free delay from search start to a valid latch input for a
    /// row with `n` mismatches.
    pub fn nominal_row_delay(&self, n: usize, row: usize) -> f64 {
        self.profile
            .nominal_discharge_delay(self.cols, &self.mitigation, n, row)
            + self.profile.t_sa_latch
    }

    /// Energy of one search over one array of this configuration, in pJ.
    pub fn energy_per_search(&self) -> f64 {
        self.profile
            .energy_per_search(self.rows, self.cols, &self.mitigation)
            .expect("rows validated at construction")
    }
}

/// Items of one physical array; `ids[r]` is the global id stored in row `r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bank {
    pub vectors: Vec<BitVector>,
    pub ids: Vec<usize>,
}

impl Bank {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Stored items split row-major across as many arrays as needed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CamBankSet {
    rows: usize,
    cols: usize,
    banks: Vec<Bank>,
    items: usize,
}

impl CamBankSet {
    /// Stores `items` with ids `ids[i]`, in input order, filling each array
    /// before starting the next.
    pub fn with_ids(config: &ArrayConfig, items: &[BitVector], ids: &[usize]) -> Result<Self> {
        if items.len() != ids.len() {
            return Err(Error::Precondition(format!(
                "{} items but {} ids",
                items.len(),
                ids.len()
            )));
        }
        if let Some((index, item)) = items
            .iter()
            .enumerate()
            .find(|(_, v)| v.width() != config.cols)
        {
            return Err(Error::WidthMismatch {
                index,
                expected: config.cols,
                found: item.width(),
            });
        }
        let banks = items
            .chunks(config.rows)
            .zip(ids.chunks(config.rows))
            .map(|(v, i)| Bank {
                vectors: v.to_vec(),
                ids: i.to_vec(),
            })
            .collect();
        Ok(CamBankSet {
            rows: config.rows,
            cols: config.cols,
            banks,
            items: items.len(),
        })
    }

    pub fn banks(&self) -> &[Bank] {
        &self.banks
    }

    pub fn bank_count(&self) -> usize {
        self.banks.len()
    }

    pub fn len(&self) -> usize {
        self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items == 0
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `(bank, row)` holding the item at input position `position`.
    pub fn locate(&self, position: usize) -> Option<(usize, usize)> {
        (position < self.items).then(|| (position / self.rows, position % self.rows))
    }
}

/// Stores `items` with ids `0..items.len()`.
pub fn build_banks(config: &ArrayConfig, items: &[BitVector]) -> Result<CamBankSet> {
    let ids: Vec<usize> = (0..items.len()).collect();
    CamBankSet::with_ids(config, items, &ids)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    /// Uniform clock placed with the interconnect-free delay law.
    Ideal,
    /// Uniform clock placed with the fastest row's nominal delays.
    #[default]
    Fixed,
    /// Per-row clock that follows searchline arrival (needs clock matching).
    Matched,
}

impl std::str::FromStr for ClockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ideal" => Ok(ClockKind::Ideal),
            "fixed" => Ok(ClockKind::Fixed),
            "matched" => Ok(ClockKind::Matched),
            other => Err(Error::config(
                "clock.kind",
                format!("unknown clock policy `{other}` (ideal, fixed, matched)"),
            )),
        }
    }
}

/// Where the latch clock edge sits relative to the matchline delays.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockPolicy {
    pub kind: ClockKind,
    pub hdist_limit: usize,
    /// Moves the edge from the midpoint between the delays of `limit` and
    /// `limit + 1` mismatches (0) toward the `limit` delay (1).
    pub guard: f64,
}

impl ClockPolicy {
    pub fn new(kind: ClockKind, hdist_limit: usize) -> Self {
        ClockPolicy {
            kind,
            hdist_limit,
            guard: 0.0,
        }
    }
}

/// Delay from search start until row `row`, with `mismatches` discharging
/// cells, presents a valid result to its latch. `f64::INFINITY` when no cell
/// mismatches.
pub fn row_delay(
    config: &ArrayConfig,
    row: usize,
    mismatches: &[usize],
    cell_currents: &[f64],
) -> f64 {
    if mismatches.is_empty() {
        return f64::INFINITY;
    }
    let total: f64 = mismatches.iter().map(|&j| cell_currents[j]).sum();
    delay_for_current(config, row, total)
}

#[inline]
fn delay_for_current(config: &ArrayConfig, row: usize, total_current: f64) -> f64 {
    let p = &config.profile;
    let m = &config.mitigation;
    p.searchline_arrival(m, row)
        + p.ml_capacitance(config.cols) * p.sense_swing()
            / (p.ir_current_factor(m, row) * total_current)
        + p.t_sa_latch
}

/// Latch clock time for every physical row of the array.
pub fn clock_threshold(config: &ArrayConfig, policy: &ClockPolicy) -> Result<Vec<f64>> {
    let limit = policy.hdist_limit;
    if limit == 0 {
        return Err(Error::Precondition(
            "clock threshold needs hdist_limit >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&policy.guard) {
        return Err(Error::config("clock.guard", "must lie in [0, 1]"));
    }
    let p = &config.profile;
    let place = |at_limit: f64, beyond: f64| {
        let mid = 0.5 * (at_limit + beyond);
        mid + policy.guard * (at_limit - mid)
    };
    let ideal = || {
        place(
            p.ideal_discharge_delay(config.cols, limit),
            p.ideal_discharge_delay(config.cols, limit + 1),
        ) + p.t_sa_latch
    };
    Ok(match policy.kind {
        ClockKind::Ideal => vec![ideal(); config.rows],
        ClockKind::Fixed => {
            let fastest = |n| {
                (0..config.rows)
                    .map(|r| config.nominal_row_delay(n, r))
                    .fold(f64::INFINITY, f64::min)
            };
            vec![place(fastest(limit), fastest(limit + 1)); config.rows]
        }
        ClockKind::Matched => {
            if config.mitigation.kind != MitigationKind::ClkMatch {
                return Err(Error::config(
                    "clock.kind",
                    "matched clock requires the clkmatch mitigation",
                ));
            }
            let base = ideal();
            let gain = config.mitigation.clk_match_gain;
            (0..config.rows)
                .map(|r| gain * p.searchline_arrival(&config.mitigation, r) + base)
                .collect()
        }
    })
}

/// Result of one query against a bank set.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    /// `delays[bank][row]`; infinite for rows that never discharge.
    pub delays: Vec<Vec<f64>>,
    /// Ids of matching rows, ascending.
    pub retrieved: Vec<usize>,
    pub energy_pj: f64,
    /// Seconds, rounded up to the profile's latency step.
    pub latency: f64,
    /// Latch clock time of each physical row.
    pub clock_times: Vec<f64>,
}

/// Rounds `t` up to a multiple of `step`, ignoring float noise below 1e-9 steps.
pub fn quantize_up(t: f64, step: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (t / step - 1e-9).ceil() * step
}

/// Evaluates `query` against every stored row for Monte Carlo `trial`.
pub fn search(
    banks: &CamBankSet,
    config: &ArrayConfig,
    query: &BitVector,
    policy: &ClockPolicy,
    variation: &VariationConfig,
    trial: usize,
) -> Result<SearchOutcome> {
    if query.width() != config.cols {
        return Err(Error::WidthMismatch {
            index: 0,
            expected: config.cols,
            found: query.width(),
        });
    }
    if banks.cols() != config.cols || banks.rows() != config.rows {
        return Err(Error::Precondition(format!(
            "bank set built for {}x{} arrays, config is {}x{}",
            banks.rows(),
            banks.cols(),
            config.rows,
            config.cols
        )));
    }
    if trial >= variation.trials {
        return Err(Error::Precondition(format!(
            "trial {trial} out of range for {} trials",
            variation.trials
        )));
    }
    let clock_times = clock_threshold(config, policy)?;
    let nominal = variation.is_nominal();
    let mut currents = vec![0.0; config.cols];
    let mut retrieved = Vec::new();
    let mut slowest_event: f64 = 0.0;
    let mut delays = Vec::with_capacity(banks.bank_count());

    for (b, bank) in banks.banks().iter().enumerate() {
        let mut bank_delays = Vec::with_capacity(bank.len());
        for (r, (stored, &id)) in bank.vectors.iter().zip(&bank.ids).enumerate() {
            let delay = if nominal {
                match stored.distance(query) {
                    0 => f64::INFINITY,
                    n => delay_for_current(config, r, n as f64 * config.profile.i_sat0),
                }
            } else {
                let mismatches = stored.mismatches(query);
                if mismatches.is_empty() {
                    f64::INFINITY
                } else {
                    sample_row_currents(&config.profile, variation, b, r, trial, &mut currents);
                    row_delay(config, r, &mismatches, &currents)
                }
            };
            let clock = clock_times[r];
            if delay.is_infinite() || delay > clock {
                retrieved.push(id);
            }
            slowest_event = slowest_event.max(delay.min(clock));
            bank_delays.push(delay);
        }
        delays.push(bank_delays);
    }
    retrieved.sort_unstable();

    Ok(SearchOutcome {
        delays,
        retrieved,
        energy_pj: banks.bank_count() as f64 * config.energy_per_search(),
        latency: quantize_up(slowest_event, config.profile.latency_step),
        clock_times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn normalized(rows: usize) -> ArrayConfig {
        let mut p = TechProfile::builtin("sram_0v5").unwrap();
        p.c_cell = 0.0;
        p.c_fixed = 1.0;
        p.v_ml = 1.5;
        p.v_sa_threshold = 0.5;
        p.i_sat0 = 1.0;
        p.r_sl_row = 0.0;
        p.c_sl_row = 0.0;
        p.ir_gamma = 0.0;
        p.t_sa_latch = 0.25;
        ArrayConfig::new(rows, 8, p, MitigationConfig::baseline()).unwrap()
    }

    fn random_items(n: usize, width: usize, seed: u64) -> Vec<BitVector> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let bits: Vec<bool> = (0..width).map(|_| rng.random()).collect();
                BitVector::from_bools(&bits)
            })
            .collect()
    }

    #[test]
    fn banking_splits_row_major() {
        let p = TechProfile::builtin("sot").unwrap();
        let config = ArrayConfig::new(128, 16, p, MitigationConfig::baseline()).unwrap();
        let items = vec![BitVector::zeros(16); 10_000];
        let set = build_banks(&config, &items).unwrap();
        assert_eq!(set.bank_count(), 79);
        assert_eq!(set.banks().last().unwrap().len(), 16);
        assert_eq!(set.locate(128), Some((1, 0)));
        assert_eq!(set.banks()[1].ids[0], 128);

        let one = build_banks(&config, &items[..1]).unwrap();
        assert_eq!(one.bank_count(), 1);
        assert_eq!(one.banks()[0].len(), 1);
    }

    #[test]
    fn banking_rejects_wrong_width() {
        let config = normalized(4);
        let mut items = vec![BitVector::zeros(8); 5];
        items[3] = BitVector::zeros(9);
        match build_banks(&config, &items) {
            Err(Error::WidthMismatch { index, .. }) => assert_eq!(index, 3),
            other => panic!("expected width error, got {other:?}"),
        }
    }

    #[test]
    fn row_delay_reduces_to_ideal_law() {
        let config = normalized(4);
        let currents = vec![1.0; 8];
        let d = row_delay(&config, 2, &[0, 3, 5], &currents);
        assert_relative_eq!(d, 0.25 + 1.0 / 3.0, max_relative = 1e-15);
        assert!(row_delay(&config, 2, &[], &currents).is_infinite());
    }

    #[test]
    fn far_row_current_loss_stretches_delay() {
        let mut config = normalized(256);
        config.profile.t_sa_latch = 0.0;
        config.profile.ir_gamma = 0.2;
        config.profile.ir_ref_rows = 256;
        let currents = vec![1.0; 8];
        let near = row_delay(&config, 0, &[1, 2], &currents);
        let far = row_delay(&config, 255, &[1, 2], &currents);
        assert_relative_eq!(far, near / 0.8, max_relative = 1e-12);
    }

    #[test]
    fn clocks_coincide_without_skew() {
        let config = normalized(16);
        let ideal = clock_threshold(&config, &ClockPolicy::new(ClockKind::Ideal, 20)).unwrap();
        let fixed = clock_threshold(&config, &ClockPolicy::new(ClockKind::Fixed, 20)).unwrap();
        let expected = 0.5 * (1.0 / 20.0 + 1.0 / 21.0) + 0.25;
        for (a, b) in ideal.iter().zip(&fixed) {
            assert_relative_eq!(*a, expected, max_relative = 1e-15);
            assert_relative_eq!(*b, expected, max_relative = 1e-15);
        }
    }

    #[test]
    fn matched_clock_tracks_arrival() {
        let mut config = normalized(64);
        config.profile.r_sl_row = 1e-3;
        config.profile.c_sl_row = 1.0;
        assert!(clock_threshold(&config, &ClockPolicy::new(ClockKind::Matched, 4)).is_err());
        config.mitigation = MitigationConfig::clk_match(1.0, 0.0);
        let clocks = clock_threshold(&config, &ClockPolicy::new(ClockKind::Matched, 4)).unwrap();
        let offsets: Vec<f64> = clocks
            .iter()
            .enumerate()
            .map(|(r, c)| c - config.profile.searchline_arrival(&config.mitigation, r))
            .collect();
        for o in &offsets {
            assert_relative_eq!(*o, offsets[0], max_relative = 1e-12);
        }
        assert!(clocks[63] > clocks[0]);
    }

    #[test]
    fn zero_limit_is_rejected() {
        let config = normalized(4);
        assert!(clock_threshold(&config, &ClockPolicy::new(ClockKind::Fixed, 0)).is_err());
    }

    #[test]
    fn exact_match_is_always_retrieved() {
        let config = normalized(4);
        let items = random_items(10, 8, 3);
        let set = build_banks(&config, &items).unwrap();
        let policy = ClockPolicy::new(ClockKind::Ideal, 1);
        let out = search(
            &set,
            &config,
            &items[6],
            &policy,
            &VariationConfig::none(),
            0,
        )
        .unwrap();
        assert!(out.retrieved.contains(&6));
        assert!(out.delays[1][2].is_infinite());
    }

    #[test]
    fn ideal_search_matches_brute_force() {
        let config = normalized(8);
        let items = random_items(100, 8, 11);
        let set = build_banks(&config, &items).unwrap();
        for limit in 1..8 {
            let policy = ClockPolicy::new(ClockKind::Ideal, limit);
            for q in random_items(10, 8, 100 + limit as u64) {
                let out = search(&set, &config, &q, &policy, &VariationConfig::none(), 0).unwrap();
                let expected: Vec<usize> = (0..items.len())
                    .filter(|&i| items[i].distance(&q) <= limit)
                    .collect();
                assert_eq!(out.retrieved, expected);
            }
        }
    }

    #[test]
    fn energy_counts_every_bank() {
        let config = normalized(4);
        let items = random_items(9, 8, 5);
        let set = build_banks(&config, &items).unwrap();
        let policy = ClockPolicy::new(ClockKind::Fixed, 2);
        let out = search(
            &set,
            &config,
            &items[0],
            &policy,
            &VariationConfig::none(),
            0,
        )
        .unwrap();
        assert_relative_eq!(
            out.energy_pj,
            3.0 * config.energy_per_search(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn latency_is_quantized_up() {
        assert_relative_eq!(quantize_up(1.09e-9, 0.4e-9), 1.2e-9, max_relative = 1e-12);
        assert_relative_eq!(quantize_up(1.2e-9, 0.4e-9), 1.2e-9, max_relative = 1e-12);
        assert_relative_eq!(quantize_up(1.21e-9, 0.4e-9), 1.6e-9, max_relative = 1e-12);
    }

    #[test]
    fn query_width_is_checked() {
        let config = normalized(4);
        let set = build_banks(&config, &random_items(3, 8, 1)).unwrap();
        let policy = ClockPolicy::new(ClockKind::Fixed, 2);
        assert!(search(
            &set,
            &config,
            &BitVector::zeros(7),
            &policy,
            &VariationConfig::none(),
            0
        )
        .is_err());
    }
}
