//! Fixed-radius near-neighbour search runs and their aggregation.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::workload::{anchored_workload, derive_seed};
use crate::bits::BitVector;
use crate::camarray::{build_banks, search, ArrayConfig, CamBankSet, ClockKind, ClockPolicy};
use crate::encode::CategoricalDataset;
use crate::error::{Error, Result};
use crate::io::OutcomeRecord;
use crate::metrics::{harmonic_mean, retrieval_metrics, RetrievalMetrics};
use crate::stats::{mean, std_dev};
use crate::techmodel::VariationConfig;

/// Where stored items and queries come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    /// One anchored workload per query (see [`anchored_workload`]).
    Synthetic { items: usize, seed: u64 },
    /// Explicit items and queries sharing one bank set.
    Vectors {
        items: Arc<Vec<BitVector>>,
        queries: Vec<BitVector>,
    },
    /// `queries` stored items drawn without replacement serve as queries.
    StoredQueries {
        items: Arc<Vec<BitVector>>,
        queries: usize,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub array: ArrayConfig,
    /// Clock placement; its `hdist_limit` is the search radius.
    pub clock: ClockPolicy,
    /// Number of queries for synthetic sources; other sources carry their own.
    pub queries: usize,
    pub variation: VariationConfig,
    pub dataset: DatasetSource,
    /// JSON-lines file receiving one [`OutcomeRecord`] per query and trial.
    pub outcome_log: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn hdist_limit(&self) -> usize {
        self.clock.hdist_limit
    }

    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        self.variation.validate()?;
        if self.clock.hdist_limit == 0 || self.clock.hdist_limit > self.array.cols {
            return Err(Error::config(
                "search.limit",
                format!("must lie in 1..={}", self.array.cols),
            ));
        }
        match &self.dataset {
            DatasetSource::Synthetic { items, .. } => {
                if *items == 0 {
                    return Err(Error::config("data.items", "must be >= 1"));
                }
                if self.queries == 0 {
                    return Err(Error::config("search.queries", "must be >= 1"));
                }
            }
            DatasetSource::Vectors { items, queries } => {
                if items.is_empty() || queries.is_empty() {
                    return Err(Error::Data("empty item or query set".into()));
                }
            }
            DatasetSource::StoredQueries { items, queries, .. } => {
                if *queries == 0 || *queries > items.len() {
                    return Err(Error::config(
                        "search.queries",
                        format!("must lie in 1..={}", items.len()),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Aggregated retrieval quality, energy and latency of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub profile: String,
    pub rows: usize,
    pub cols: usize,
    pub mitigation: String,
    pub clock: ClockKind,
    pub hdist_limit: usize,
    pub items: usize,
    pub queries: usize,
    pub trials: usize,
    pub sigma_isat_rel: f64,
    pub banks: usize,
    /// Mean over queries and trials, percent.
    pub precision: f64,
    pub recall: f64,
    /// Harmonic mean of the mean precision and mean recall.
    pub f_score: f64,
    /// Standard deviation across trials of the per-trial means.
    pub precision_std: f64,
    pub recall_std: f64,
    pub f_score_std: f64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    /// Energy per search of one array.
    pub eps_pj: f64,
    /// Energy of one query over all banks.
    pub energy_pj: f64,
    /// Slowest quantized search latency observed.
    pub latency_ns: f64,
    /// Same workload without variation, for Monte Carlo runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<Box<MetricsReport>>,
}

struct Workload {
    items: Arc<Vec<BitVector>>,
    banks: CamBankSet,
    queries: Vec<BitVector>,
    relevant: Vec<BTreeSet<usize>>,
}

fn brute_force(items: &[BitVector], query: &BitVector, limit: usize) -> BTreeSet<usize> {
    items
        .iter()
        .enumerate()
        .filter(|(_, v)| v.distance(query) <= limit)
        .map(|(i, _)| i)
        .collect()
}

fn workloads(spec: &ExperimentSpec) -> Result<Vec<Workload>> {
    let limit = spec.hdist_limit();
    let cols = spec.array.cols;
    let finish = |items: Arc<Vec<BitVector>>, queries: Vec<BitVector>| -> Result<Workload> {
        if let Some((index, q)) = queries.iter().enumerate().find(|(_, q)| q.width() != cols) {
            return Err(Error::WidthMismatch {
                index,
                expected: cols,
                found: q.width(),
            });
        }
        let banks = build_banks(&spec.array, &items)?;
        let relevant = queries
            .iter()
            .map(|q| brute_force(&items, q, limit))
            .collect();
        Ok(Workload {
            items,
            banks,
            queries,
            relevant,
        })
    };
    match &spec.dataset {
        DatasetSource::Synthetic { items, seed } => (0..spec.queries)
            .into_par_iter()
            .map(|q| {
                let w = anchored_workload(*items, cols, derive_seed(*seed, q as u64));
                finish(Arc::new(w.items), vec![w.query])
            })
            .collect(),
        DatasetSource::Vectors { items, queries } => {
            Ok(vec![finish(items.clone(), queries.clone())?])
        }
        DatasetSource::StoredQueries {
            items,
            queries,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let picks = sample(&mut rng, items.len(), *queries).into_vec();
            let qs = picks.iter().map(|&i| items[i].clone()).collect();
            Ok(vec![finish(items.clone(), qs)?])
        }
    }
}

struct UnitResult {
    metrics: RetrievalMetrics,
    latency: f64,
    energy_pj: f64,
    record: Option<OutcomeRecord>,
}

/// Runs every query for every Monte Carlo trial and scores the retrieved
/// sets against exact fixed-radius search.
pub fn fixed_radius_experiment(spec: &ExperimentSpec) -> Result<MetricsReport> {
    spec.validate()?;
    let workloads = workloads(spec)?;
    let trials = spec.variation.trials;
    let units: Vec<(usize, usize, usize, usize)> = {
        let mut units = Vec::new();
        let mut global = 0;
        for (w, wl) in workloads.iter().enumerate() {
            for j in 0..wl.queries.len() {
                for t in 0..trials {
                    units.push((w, j, t, global));
                }
                global += 1;
            }
        }
        units
    };
    let log = spec.outcome_log.is_some();
    let results: Vec<UnitResult> = units
        .par_iter()
        .map(|&(w, j, t, global)| {
            let wl = &workloads[w];
            let out = search(
                &wl.banks,
                &spec.array,
                &wl.queries[j],
                &spec.clock,
                &spec.variation,
                t,
            )?;
            let retrieved: BTreeSet<usize> = out.retrieved.iter().copied().collect();
            Ok(UnitResult {
                metrics: retrieval_metrics(&retrieved, &wl.relevant[j]),
                latency: out.latency,
                energy_pj: out.energy_pj,
                record: log.then(|| OutcomeRecord::new(global, t, &out)),
            })
        })
        .collect::<Result<_>>()?;

    if let Some(path) = &spec.outcome_log {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for r in results.iter().filter_map(|r| r.record.as_ref()) {
            writeln!(w, "{}", r.to_json_line()).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }

    let queries: usize = workloads.iter().map(|w| w.queries.len()).sum();
    let items = workloads[0].items.len();
    let banks = workloads[0].banks.bank_count();
    Ok(aggregate(spec, &results, queries, items, banks))
}

fn aggregate(
    spec: &ExperimentSpec,
    results: &[UnitResult],
    queries: usize,
    items: usize,
    banks: usize,
) -> MetricsReport {
    let trials = spec.variation.trials;
    // Results are ordered query-major with trials innermost.
    let per_trial = |t: usize, f: fn(&RetrievalMetrics) -> f64| -> f64 {
        let v: Vec<f64> = (0..queries)
            .map(|q| f(&results[q * trials + t].metrics))
            .collect();
        mean(&v)
    };
    let p_t: Vec<f64> = (0..trials).map(|t| per_trial(t, |m| m.precision)).collect();
    let r_t: Vec<f64> = (0..trials).map(|t| per_trial(t, |m| m.recall)).collect();
    let f_t: Vec<f64> = p_t
        .iter()
        .zip(&r_t)
        .map(|(p, r)| harmonic_mean(p / 100.0, r / 100.0))
        .collect();
    let precision = mean(&p_t);
    let recall = mean(&r_t);
    let sum =
        |f: fn(&RetrievalMetrics) -> usize| results.iter().map(|r| f(&r.metrics) as u64).sum();
    MetricsReport {
        profile: spec.array.profile.label.clone(),
        rows: spec.array.rows,
        cols: spec.array.cols,
        mitigation: spec.array.mitigation.kind.as_str().to_string(),
        clock: spec.clock.kind,
        hdist_limit: spec.clock.hdist_limit,
        items,
        queries,
        trials,
        sigma_isat_rel: spec.variation.sigma_isat_rel,
        banks,
        precision,
        recall,
        f_score: harmonic_mean(precision / 100.0, recall / 100.0),
        precision_std: std_dev(&p_t),
        recall_std: std_dev(&r_t),
        f_score_std: std_dev(&f_t),
        true_positives: sum(|m| m.true_positives),
        false_positives: sum(|m| m.false_positives),
        false_negatives: sum(|m| m.false_negatives),
        eps_pj: spec.array.energy_per_search(),
        energy_pj: results.first().map_or(0.0, |r| r.energy_pj),
        latency_ns: results.iter().map(|r| r.latency).fold(0.0, f64::max) * 1e9,
        reference: None,
    }
}

/// Monte Carlo run with per-trial mean and spread, plus the variation-free
/// result on the same workload as `reference`.
pub fn variation_experiment(spec: &ExperimentSpec) -> Result<MetricsReport> {
    let mut report = fixed_radius_experiment(spec)?;
    let nominal = ExperimentSpec {
        variation: VariationConfig {
            sigma_isat_rel: 0.0,
            trials: 1,
            ..spec.variation
        },
        outcome_log: None,
        ..spec.clone()
    };
    report.reference = Some(Box::new(fixed_radius_experiment(&nominal)?));
    Ok(report)
}

/// Encoded dataset with the selected feature names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub features: Vec<String>,
    pub metrics: MetricsReport,
}

/// Searches a categorical dataset with `queries` of its own rows, drawn
/// without replacement from `seed`.
pub fn dataset_search_experiment(
    dataset: &CategoricalDataset,
    array: &ArrayConfig,
    clock: ClockPolicy,
    variation: VariationConfig,
    queries: usize,
    seed: u64,
) -> Result<DatasetReport> {
    if dataset.schema.width() != array.cols {
        return Err(Error::config(
            "array.cols",
            format!(
                "dataset encodes to {} bits, array has {} columns",
                dataset.schema.width(),
                array.cols
            ),
        ));
    }
    let items = Arc::new(dataset.encode_all()?);
    let spec = ExperimentSpec {
        array: array.clone(),
        clock,
        queries,
        variation,
        dataset: DatasetSource::StoredQueries {
            items,
            queries,
            seed,
        },
        outcome_log: None,
    };
    Ok(DatasetReport {
        features: dataset.feature_names(),
        metrics: fixed_radius_experiment(&spec)?,
    })
}
