//! Binary encodings for CAM storage: one-hot categorical fields and
//! random-hyperplane LSH codes for real-valued embeddings.

use std::collections::BTreeSet;
use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::error::{Error, Result};

/// Number of differing bit positions. Widths must agree.
pub fn hamming(a: &BitVector, b: &BitVector) -> Result<usize> {
    if a.width() != b.width() {
        return Err(Error::WidthMismatch {
            index: 1,
            expected: a.width(),
            found: b.width(),
        });
    }
    Ok(a.distance(b))
}

/// Ordered categorical features, each one-hot encoded into a fixed-width field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalSchema {
    pub features: Vec<(String, usize)>,
    pub bits_per_feature: usize,
}

impl CategoricalSchema {
    pub fn new(features: Vec<(String, usize)>, bits_per_feature: usize) -> Result<Self> {
        if bits_per_feature == 0 {
            return Err(Error::config("bits_per_feature", "must be >= 1"));
        }
        if let Some((name, card)) = features
            .iter()
            .find(|(_, c)| *c == 0 || *c > bits_per_feature)
        {
            return Err(Error::config(
                format!("feature.{name}"),
                format!("cardinality {card} must lie in 1..={bits_per_feature}"),
            ));
        }
        Ok(CategoricalSchema {
            features,
            bits_per_feature,
        })
    }

    pub fn width(&self) -> usize {
        self.features.len() * self.bits_per_feature
    }
}

/// Sets bit `value` inside each feature's field.
pub fn one_hot_encode(schema: &CategoricalSchema, record: &[usize]) -> Result<BitVector> {
    if record.len() != schema.features.len() {
        return Err(Error::Data(format!(
            "record has {} values, schema has {} features",
            record.len(),
            schema.features.len()
        )));
    }
    let mut v = BitVector::zeros(schema.width());
    for (f, (&value, (name, cardinality))) in record.iter().zip(&schema.features).enumerate() {
        if value >= *cardinality {
            return Err(Error::ValueOutOfRange {
                feature: name.clone(),
                value,
                cardinality: *cardinality,
            });
        }
        v.set(f * schema.bits_per_feature + value, true);
    }
    Ok(v)
}

/// Categorical table selected from a CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalDataset {
    pub schema: CategoricalSchema,
    /// Category labels per feature, indexed by value index.
    pub categories: Vec<Vec<String>>,
    pub records: Vec<Vec<usize>>,
}

impl CategoricalDataset {
    /// Reads a CSV with a header row and keeps the first `take` columns that
    /// have fewer than `max_distinct` distinct values. Empty cells and `NA`
    /// count as a category of their own. Category indices follow sorted label
    /// order.
    pub fn from_csv<R: Read>(
        reader: R,
        max_distinct: usize,
        take: usize,
        bits_per_feature: usize,
    ) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers: Vec<String> = csv
            .headers()
            .map_err(|e| Error::Data(format!("csv header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows: Vec<Vec<String>> = Vec::new();
        for (i, rec) in csv.records().enumerate() {
            let rec = rec.map_err(|e| Error::Data(format!("csv row {}: {e}", i + 2)))?;
            if rec.len() != headers.len() {
                return Err(Error::Data(format!(
                    "csv row {} has {} fields, header has {}",
                    i + 2,
                    rec.len(),
                    headers.len()
                )));
            }
            rows.push(rec.iter().map(|s| s.trim().to_string()).collect());
        }

        let mut selected = Vec::new();
        for (c, name) in headers.iter().enumerate() {
            let distinct: BTreeSet<&str> = rows.iter().map(|r| r[c].as_str()).collect();
            if distinct.len() < max_distinct {
                selected.push((
                    c,
                    name.clone(),
                    distinct.into_iter().map(str::to_string).collect::<Vec<_>>(),
                ));
                if selected.len() == take {
                    break;
                }
            }
        }
        if selected.len() < take {
            return Err(Error::Data(format!(
                "only {} columns have fewer than {max_distinct} distinct values, need {take}",
                selected.len()
            )));
        }

        let schema = CategoricalSchema::new(
            selected
                .iter()
                .map(|(_, name, cats)| (name.clone(), cats.len()))
                .collect(),
            bits_per_feature,
        )?;
        let records = rows
            .iter()
            .map(|row| {
                selected
                    .iter()
                    .map(|(c, _, cats)| {
                        cats.binary_search(&row[*c])
                            .expect("category collected from the same rows")
                    })
                    .collect()
            })
            .collect();
        Ok(CategoricalDataset {
            schema,
            categories: selected.into_iter().map(|(_, _, cats)| cats).collect(),
            records,
        })
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.schema
            .features
            .iter()
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn encode_all(&self) -> Result<Vec<BitVector>> {
        self.records
            .iter()
            .map(|r| one_hot_encode(&self.schema, r))
            .collect()
    }
}

/// Row-major `items × dim` matrix of embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::Data(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        Ok(EmbeddingMatrix { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Sign-of-random-projection hash with Gaussian hyperplanes.
#[derive(Clone, Debug, PartialEq)]
pub struct LshEncoder {
    hyperplanes: Vec<f32>,
    bits: usize,
    dim: usize,
    seed: u64,
}

impl LshEncoder {
    /// Draws `bits` hyperplanes in `dim` dimensions; identical arguments give
    /// identical hyperplanes.
    pub fn new(bits: usize, dim: usize, seed: u64) -> Result<Self> {
        if bits == 0 || dim == 0 {
            return Err(Error::config("lsh", "bits and dim must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hyperplanes = (0..bits * dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z as f32
            })
            .collect();
        Ok(LshEncoder {
            hyperplanes,
            bits,
            dim,
            seed,
        })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hyperplane(&self, i: usize) -> &[f32] {
        &self.hyperplanes[i * self.dim..(i + 1) * self.dim]
    }

    /// Bit `i` is set when the embedding lies on the non-negative side of
    /// hyperplane `i`.
    pub fn encode(&self, embedding: &[f32]) -> Result<BitVector> {
        if embedding.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: embedding.len(),
            });
        }
        let mut v = BitVector::zeros(self.bits);
        for i in 0..self.bits {
            if dot(self.hyperplane(i), embedding) >= 0.0 {
                v.set(i, true);
            }
        }
        Ok(v)
    }
}

pub fn lsh_encode(encoder: &LshEncoder, embedding: &[f32]) -> Result<BitVector> {
    encoder.encode(embedding)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn housing_like(features: usize) -> CategoricalSchema {
        CategoricalSchema::new((0..features).map(|i| (format!("f{i}"), 7)).collect(), 8).unwrap()
    }

    #[test]
    fn one_hot_sets_value_bit() {
        let schema = CategoricalSchema::new(vec![("a".into(), 8)], 8).unwrap();
        let v = one_hot_encode(&schema, &[2]).unwrap();
        assert_eq!(v.to_packed_bytes(), vec![0b0000_0100]);
    }

    #[test]
    fn sixteen_features_fill_128_bits() {
        let schema = housing_like(16);
        let record: Vec<usize> = (0..16).map(|i| i % 7).collect();
        let v = one_hot_encode(&schema, &record).unwrap();
        assert_eq!(v.width(), 128);
        assert_eq!(v.count_ones(), 16);
    }

    #[test]
    fn differing_features_cost_two_bits_each() {
        let schema = housing_like(16);
        let a: Vec<usize> = vec![0; 16];
        let mut b = a.clone();
        b[3] = 4;
        b[9] = 1;
        b[15] = 6;
        let d = hamming(
            &one_hot_encode(&schema, &a).unwrap(),
            &one_hot_encode(&schema, &b).unwrap(),
        )
        .unwrap();
        assert_eq!(d, 6);
    }

    #[test]
    fn out_of_range_value_is_rejected() {
        let schema = housing_like(2);
        assert!(matches!(
            one_hot_encode(&schema, &[0, 7]),
            Err(Error::ValueOutOfRange { value: 7, .. })
        ));
        assert!(one_hot_encode(&schema, &[0]).is_err());
    }

    #[test]
    fn schema_rejects_oversized_cardinality() {
        assert!(CategoricalSchema::new(vec![("x".into(), 9)], 8).is_err());
    }

    #[test]
    fn hamming_basics() {
        let a = BitVector::parse01("1111").unwrap();
        let b = BitVector::parse01("0000").unwrap();
        assert_eq!(hamming(&a, &a).unwrap(), 0);
        assert_eq!(hamming(&a, &b).unwrap(), 4);
        assert!(hamming(&a, &BitVector::zeros(5)).is_err());
    }

    #[test]
    fn csv_selects_low_cardinality_columns() {
        let csv = "Id,Street,Rooms,Price,Alley\n\
                   1,Pave,3,100,NA\n\
                   2,Grvl,4,120,Grvl\n\
                   3,Pave,3,130,\n";
        let ds = CategoricalDataset::from_csv(csv.as_bytes(), 3, 2, 8).unwrap();
        // Id and Price have 3 distinct values; Alley has NA, Grvl and empty.
        assert_eq!(ds.feature_names(), vec!["Street", "Rooms"]);
        assert_eq!(ds.records[1], vec![0, 1]);
        assert!(CategoricalDataset::from_csv(csv.as_bytes(), 3, 3, 8).is_err());
        let wider = CategoricalDataset::from_csv(csv.as_bytes(), 4, 5, 8).unwrap();
        assert_eq!(wider.categories[4], vec!["", "Grvl", "NA"]);
    }

    #[test]
    fn zero_embedding_hashes_to_all_ones() {
        let enc = LshEncoder::new(64, 16, 9).unwrap();
        assert_eq!(enc.encode(&[0.0; 16]).unwrap(), BitVector::ones(64));
    }

    #[test]
    fn negation_complements_code() {
        let enc = LshEncoder::new(128, 8, 2).unwrap();
        let v = [0.3f32, -1.2, 0.7, 0.01, 2.0, -0.4, 0.9, -0.05];
        let neg: Vec<f32> = v.iter().map(|x| -x).collect();
        assert_eq!(
            enc.encode(&neg).unwrap(),
            enc.encode(&v).unwrap().complement()
        );
    }

    #[test]
    fn encoder_is_reproducible() {
        assert_eq!(
            LshEncoder::new(32, 5, 77).unwrap(),
            LshEncoder::new(32, 5, 77).unwrap()
        );
        assert_ne!(
            LshEncoder::new(32, 5, 77).unwrap(),
            LshEncoder::new(32, 5, 78).unwrap()
        );
        assert!(LshEncoder::new(32, 5, 1)
            .unwrap()
            .encode(&[1.0; 4])
            .is_err());
    }
}
