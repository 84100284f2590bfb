//! Candidate generation for next-item recommendation: a CAM pre-filter in
//! front of exact dot-product ranking.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::camarray::{search, ArrayConfig, CamBankSet, ClockKind, ClockPolicy};
use crate::encode::{dot, EmbeddingMatrix, LshEncoder};
use crate::error::{Error, Result};
use crate::stats::pairwise_sum;
use crate::techmodel::VariationConfig;

/// Candidates per test instance: 1000 negatives and the ground truth.
pub const CANDIDATES_PER_INSTANCE: usize = 1001;

/// One user's next-item prediction task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestInstance {
    pub predicted: Vec<f32>,
    /// Item ids; must include `ground_truth`.
    pub candidates: Vec<usize>,
    pub ground_truth: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecsysSpec {
    /// Cut-off of HR@k.
    pub k: usize,
    pub hdist_limit: usize,
    pub clock: ClockKind,
    /// Seed of the LSH hyperplanes; the code width is the array width.
    pub lsh_seed: u64,
}

impl Default for RecsysSpec {
    fn default() -> Self {
        RecsysSpec {
            k: 10,
            hdist_limit: 30,
            clock: ClockKind::Fixed,
            lsh_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecsysReport {
    pub profile: String,
    pub rows: usize,
    pub mitigation: String,
    pub hdist_limit: usize,
    pub k: usize,
    pub instances: usize,
    pub candidates: usize,
    pub mean_pool_size: f64,
    pub cam_hr_at_k: f64,
    pub baseline_hr_at_k: f64,
    /// `candidates / mean_pool_size`.
    pub dpr_reduction: f64,
    /// Instances whose ground truth was filtered out by the CAM.
    pub ground_truth_escapes: usize,
    /// Instances whose pool holds the whole baseline top-k.
    pub topk_covered: usize,
    pub energy_pj: f64,
    pub latency_ns: f64,
    /// Dot-product speedup at the mean pool size (see [`cycle_speedup`]).
    pub speedup: f64,
}

/// Candidate ids ordered by descending dot product with `query`, ties by
/// ascending id.
pub fn rank_by_dot(embeddings: &EmbeddingMatrix, query: &[f32], ids: &[usize]) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = ids
        .iter()
        .map(|&id| (dot(embeddings.row(id), query), id))
        .collect();
    scored.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => a.1.cmp(&b.1),
        o => o,
    });
    scored.into_iter().map(|(_, id)| id).collect()
}

fn check_instances(embeddings: &EmbeddingMatrix, instances: &[TestInstance]) -> Result<()> {
    if instances.is_empty() {
        return Err(Error::Data("no test instances".into()));
    }
    for (i, inst) in instances.iter().enumerate() {
        if inst.candidates.len() != CANDIDATES_PER_INSTANCE {
            return Err(Error::Data(format!(
                "instance {i} has {} candidates, expected {CANDIDATES_PER_INSTANCE}",
                inst.candidates.len()
            )));
        }
        if inst.predicted.len() != embeddings.dim {
            return Err(Error::DimensionMismatch {
                expected: embeddings.dim,
                found: inst.predicted.len(),
            });
        }
        if let Some(&id) = inst.candidates.iter().find(|&&id| id >= embeddings.len()) {
            return Err(Error::Data(format!(
                "instance {i}: no embedding for item {id} ({} items)",
                embeddings.len()
            )));
        }
        if !inst.candidates.contains(&inst.ground_truth) {
            return Err(Error::Data(format!(
                "instance {i}: ground truth {} is not a candidate",
                inst.ground_truth
            )));
        }
    }
    Ok(())
}

fn item_codes(encoder: &LshEncoder, embeddings: &EmbeddingMatrix) -> Result<Vec<BitVector>> {
    (0..embeddings.len())
        .into_par_iter()
        .map(|i| encoder.encode(embeddings.row(i)))
        .collect()
}

struct InstanceResult {
    pool: usize,
    cam_hit: bool,
    baseline_hit: bool,
    escaped: bool,
    covered: bool,
    energy_pj: f64,
    latency: f64,
}

pub fn recsys_experiment(
    embeddings: &EmbeddingMatrix,
    instances: &[TestInstance],
    spec: &RecsysSpec,
    array: &ArrayConfig,
) -> Result<RecsysReport> {
    array.validate()?;
    if spec.k == 0 {
        return Err(Error::config("recsys.k", "must be >= 1"));
    }
    if spec.hdist_limit == 0 || spec.hdist_limit > array.cols {
        return Err(Error::config(
            "recsys.limit",
            format!("must lie in 1..={}", array.cols),
        ));
    }
    check_instances(embeddings, instances)?;
    let encoder = LshEncoder::new(array.cols, embeddings.dim, spec.lsh_seed)?;
    let codes = item_codes(&encoder, embeddings)?;
    let policy = ClockPolicy::new(spec.clock, spec.hdist_limit);
    let nominal = VariationConfig::none();

    let results: Vec<InstanceResult> = instances
        .par_iter()
        .map(|inst| {
            let stored: Vec<BitVector> = inst
                .candidates
                .iter()
                .map(|&id| codes[id].clone())
                .collect();
            let banks = CamBankSet::with_ids(array, &stored, &inst.candidates)?;
            let query = encoder.encode(&inst.predicted)?;
            let out = search(&banks, array, &query, &policy, &nominal, 0)?;

            let baseline = rank_by_dot(embeddings, &inst.predicted, &inst.candidates);
            let top = &baseline[..spec.k.min(baseline.len())];
            let ranked = rank_by_dot(embeddings, &inst.predicted, &out.retrieved);
            let pool: BTreeSet<usize> = out.retrieved.iter().copied().collect();
            Ok(InstanceResult {
                pool: out.retrieved.len(),
                cam_hit: ranked
                    .iter()
                    .take(spec.k)
                    .any(|&id| id == inst.ground_truth),
                baseline_hit: top.contains(&inst.ground_truth),
                escaped: !pool.contains(&inst.ground_truth),
                covered: top.iter().all(|id| pool.contains(id)),
                energy_pj: out.energy_pj,
                latency: out.latency,
            })
        })
        .collect::<Result<_>>()?;

    let n = results.len() as f64;
    let pools: Vec<f64> = results.iter().map(|r| r.pool as f64).collect();
    let mean_pool_size = pairwise_sum(&pools) / n;
    let count = |f: fn(&InstanceResult) -> bool| results.iter().filter(|r| f(r)).count();
    let latency = results.iter().map(|r| r.latency).fold(0.0, f64::max);
    let cam_cycles = (latency / array.profile.latency_step).round();
    let candidates = CANDIDATES_PER_INSTANCE as f64;
    Ok(RecsysReport {
        profile: array.profile.label.clone(),
        rows: array.rows,
        mitigation: array.mitigation.kind.as_str().to_string(),
        hdist_limit: spec.hdist_limit,
        k: spec.k,
        instances: results.len(),
        candidates: CANDIDATES_PER_INSTANCE,
        mean_pool_size,
        cam_hr_at_k: count(|r| r.cam_hit) as f64 / n,
        baseline_hr_at_k: count(|r| r.baseline_hit) as f64 / n,
        dpr_reduction: candidates / mean_pool_size,
        ground_truth_escapes: count(|r| r.escaped),
        topk_covered: count(|r| r.covered),
        energy_pj: results[0].energy_pj,
        latency_ns: latency * 1e9,
        speedup: speedup(
            mean_pool_size,
            candidates,
            embeddings.dim as f64,
            cam_cycles,
        ),
    })
}

/// Smallest Hamming radius at which every instance's LSH neighbourhood holds
/// its baseline top-`k` and its ground truth.
pub fn covering_limit(
    embeddings: &EmbeddingMatrix,
    instances: &[TestInstance],
    k: usize,
    bits: usize,
    lsh_seed: u64,
) -> Result<usize> {
    check_instances(embeddings, instances)?;
    let encoder = LshEncoder::new(bits, embeddings.dim, lsh_seed)?;
    let codes = item_codes(&encoder, embeddings)?;
    let per_instance: Vec<usize> = instances
        .par_iter()
        .map(|inst| {
            let query = encoder.encode(&inst.predicted)?;
            let ranked = rank_by_dot(embeddings, &inst.predicted, &inst.candidates);
            Ok(ranked
                .iter()
                .take(k)
                .chain(std::iter::once(&inst.ground_truth))
                .map(|&id| codes[id].distance(&query))
                .max()
                .unwrap_or(0))
        })
        .collect::<Result<_>>()?;
    Ok(per_instance.into_iter().max().unwrap_or(0).max(1))
}

/// Cycle counts of exact dot-product scoring with one multiply-accumulate
/// per cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleSpeedup {
    pub speedup: f64,
    pub full_cycles: u64,
    pub filtered_cycles: u64,
}

fn speedup(pool: f64, total: f64, dim: f64, cam_cycles: f64) -> f64 {
    total * dim / (pool * dim + cam_cycles)
}

/// Speedup of scoring `pool` CAM-filtered candidates (after `cam_cycles` of
/// search) over scoring all `total`.
pub fn cycle_speedup(
    pool: usize,
    total: usize,
    dim: usize,
    cam_cycles: usize,
) -> Result<CycleSpeedup> {
    if pool == 0 || total == 0 || dim == 0 {
        return Err(Error::Precondition(
            "cycle_speedup needs positive pool, total and dim".into(),
        ));
    }
    let full = (total * dim) as u64;
    let filtered = (pool * dim + cam_cycles) as u64;
    Ok(CycleSpeedup {
        speedup: speedup(pool as f64, total as f64, dim as f64, cam_cycles as f64),
        full_cycles: full,
        filtered_cycles: filtered,
    })
}

/// Comparisons of a size-`k` heap selection over `n` scores.
pub fn ranking_comparisons(n: usize, k: usize) -> f64 {
    n as f64 * (k.max(2) as f64).log2()
}

/// Parameters of the clustered synthetic catalogue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSynth {
    pub items: usize,
    pub dim: usize,
    pub clusters: usize,
    pub instances: usize,
    /// Spread of items around their cluster centre, relative to unit norm.
    pub spread: f64,
    /// Norm of the prediction error relative to the unit item norm.
    pub noise: f64,
    pub seed: u64,
}

impl Default for EmbeddingSynth {
    fn default() -> Self {
        EmbeddingSynth {
            items: 3000,
            dim: 64,
            clusters: 20,
            instances: 500,
            spread: 0.1,
            noise: 0.6,
            seed: 0,
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn unit(v: &[f64]) -> Vec<f32> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x / norm) as f32).collect()
}

/// Unit-norm item embeddings around Gaussian cluster centres, and test
/// instances whose predicted embedding is a noisy copy of a random ground
/// truth item.
pub fn synthesize_embeddings(cfg: &EmbeddingSynth) -> Result<(EmbeddingMatrix, Vec<TestInstance>)> {
    if cfg.dim == 0 || cfg.clusters == 0 || cfg.instances == 0 {
        return Err(Error::Precondition(
            "embedding synthesis needs positive counts".into(),
        ));
    }
    if cfg.items < CANDIDATES_PER_INSTANCE {
        return Err(Error::Precondition(format!(
            "need at least {CANDIDATES_PER_INSTANCE} items to draw candidates"
        )));
    }
    if !(cfg.spread >= 0.0 && cfg.noise >= 0.0) {
        return Err(Error::Precondition("spread and noise must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let per_dim = 1.0 / (cfg.dim as f64).sqrt();
    let centres: Vec<Vec<f64>> = (0..cfg.clusters)
        .map(|_| gaussian(&mut rng, cfg.dim, per_dim))
        .collect();
    let mut data = Vec::with_capacity(cfg.items * cfg.dim);
    for i in 0..cfg.items {
        let offset = gaussian(&mut rng, cfg.dim, cfg.spread * per_dim);
        let v: Vec<f64> = centres[i % cfg.clusters]
            .iter()
            .zip(&offset)
            .map(|(c, o)| c + o)
            .collect();
        data.extend(unit(&v));
    }
    let embeddings = EmbeddingMatrix::new(cfg.dim, data)?;

    let instances = (0..cfg.instances)
        .map(|_| {
            let truth = rng.random_range(0..cfg.items);
            let noise = gaussian(&mut rng, cfg.dim, cfg.noise * per_dim);
            let predicted = embeddings
                .row(truth)
                .iter()
                .zip(&noise)
                .map(|(&x, n)| (x as f64 + n) as f32)
                .collect();
            let mut candidates: Vec<usize> =
                sample(&mut rng, cfg.items - 1, CANDIDATES_PER_INSTANCE - 1)
                    .into_iter()
                    .map(|i| if i >= truth { i + 1 } else { i })
                    .collect();
            candidates.push(truth);
            candidates.shuffle(&mut rng);
            TestInstance {
                predicted,
                candidates,
                ground_truth: truth,
            }
        })
        .collect();
    Ok((embeddings, instances))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::techmodel::{MitigationConfig, TechProfile};

    fn small(
        noise: f64,
        clusters: usize,
        instances: usize,
    ) -> (EmbeddingMatrix, Vec<TestInstance>) {
        synthesize_embeddings(&EmbeddingSynth {
            items: 1200,
            dim: 32,
            clusters,
            instances,
            noise,
            ..EmbeddingSynth::default()
        })
        .unwrap()
    }

    #[test]
    fn instances_are_well_formed() {
        let (emb, inst) = small(0.2, 5, 20);
        assert_eq!(emb.len(), 1200);
        for i in &inst {
            assert_eq!(i.candidates.len(), CANDIDATES_PER_INSTANCE);
            let distinct: BTreeSet<_> = i.candidates.iter().collect();
            assert_eq!(distinct.len(), CANDIDATES_PER_INSTANCE);
            assert!(i.candidates.contains(&i.ground_truth));
        }
        for r in 0..emb.len() {
            let n: f64 = emb.row(r).iter().map(|&x| (x as f64).powi(2)).sum();
            assert!((n - 1.0).abs() < 1e-5);
        }
        assert_eq!(small(0.2, 5, 20), (emb, inst));
    }

    #[test]
    fn noiseless_prediction_ranks_truth_first() {
        let (emb, inst) = small(0.0, 5, 30);
        for i in &inst {
            assert_eq!(
                rank_by_dot(&emb, &i.predicted, &i.candidates)[0],
                i.ground_truth
            );
        }
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let emb = EmbeddingMatrix::new(1, vec![1.0, 1.0, 2.0, 1.0]).unwrap();
        assert_eq!(rank_by_dot(&emb, &[1.0], &[3, 1, 0, 2]), vec![2, 0, 1, 3]);
    }

    #[test]
    fn cycle_speedup_examples() {
        assert_eq!(cycle_speedup(1001, 1001, 64, 0).unwrap().speedup, 1.0);
        let s = cycle_speedup(1000, 4600, 64, 3).unwrap().speedup;
        assert!((s - 4.6).abs() < 0.001);
        assert!(cycle_speedup(0, 10, 1, 0).is_err());
    }

    #[test]
    fn covering_limit_makes_ideal_cam_lossless() {
        let (emb, inst) = small(0.3, 8, 15);
        let limit = covering_limit(&emb, &inst, 10, 128, 5).unwrap();
        let p = TechProfile::builtin("sot").unwrap().without_interconnect();
        let array = ArrayConfig::new(64, 128, p, MitigationConfig::baseline()).unwrap();
        let spec = RecsysSpec {
            k: 10,
            hdist_limit: limit,
            clock: ClockKind::Ideal,
            lsh_seed: 5,
        };
        let r = recsys_experiment(&emb, &inst, &spec, &array).unwrap();
        assert_eq!(r.topk_covered, 15);
        assert_eq!(r.ground_truth_escapes, 0);
        assert_eq!(r.cam_hr_at_k, r.baseline_hr_at_k);
        assert!((r.dpr_reduction * r.mean_pool_size - 1001.0).abs() < 1e-9);
    }

    #[test]
    fn missing_embedding_is_a_data_error() {
        let (emb, mut inst) = small(0.3, 8, 2);
        inst[1].candidates[0] = 5000;
        let array = ArrayConfig::new(
            64,
            128,
            TechProfile::builtin("sot").unwrap(),
            MitigationConfig::baseline(),
        )
        .unwrap();
        let err = recsys_experiment(&emb, &inst, &RecsysSpec::default(), &array).unwrap_err();
        assert!(err.to_string().contains("5000"));
    }
}
