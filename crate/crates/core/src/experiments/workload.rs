//! Synthetic data generators.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::BitVector;

pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 33)).wrapping_mul(0xff51_afd7_ed55_8ccd);
    z = (z ^ (z >> 33)).wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    z ^ (z >> 33)
}

/// A random anchor query plus `items` stored vectors, each made by flipping
/// `h` distinct bits of the anchor with `h` uniform over `0..cols`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchoredWorkload {
    pub query: BitVector,
    pub items: Vec<BitVector>,
    /// Planted Hamming distance of each item from the query.
    pub distances: Vec<usize>,
}

pub fn anchored_workload(items: usize, cols: usize, seed: u64) -> AnchoredWorkload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<bool> = (0..cols).map(|_| rng.random()).collect();
    let query = BitVector::from_bools(&bits);
    let mut stored = Vec::with_capacity(items);
    let mut distances = Vec::with_capacity(items);
    for _ in 0..items {
        let h = rng.random_range(0..cols);
        let mut v = query.clone();
        for i in sample(&mut rng, cols, h) {
            v.flip(i);
        }
        stored.push(v);
        distances.push(h);
    }
    AnchoredWorkload {
        query,
        items: stored,
        distances,
    }
}

const HOUSING_CATEGORICAL: [&str; 30] = [
    "MSZoning",
    "Street",
    "Alley",
    "LotShape",
    "LandContour",
    "Utilities",
    "LotConfig",
    "LandSlope",
    "BldgType",
    "RoofStyle",
    "MasVnrType",
    "ExterQual",
    "ExterCond",
    "Foundation",
    "BsmtQual",
    "BsmtCond",
    "BsmtExposure",
    "BsmtFinType1",
    "BsmtFinType2",
    "Heating",
    "HeatingQC",
    "CentralAir",
    "Electrical",
    "KitchenQual",
    "Functional",
    "FireplaceQu",
    "GarageFinish",
    "GarageQual",
    "PavedDrive",
    "PoolQC",
];

const HOUSING_NUMERIC: [&str; 49] = [
    "MSSubClass",
    "LotFrontage",
    "LotArea",
    "Neighborhood",
    "Condition1",
    "Condition2",
    "HouseStyle",
    "OverallQual",
    "OverallCond",
    "YearBuilt",
    "YearRemodAdd",
    "RoofMatl",
    "Exterior1st",
    "Exterior2nd",
    "MasVnrArea",
    "BsmtFinSF1",
    "BsmtFinSF2",
    "BsmtUnfSF",
    "TotalBsmtSF",
    "1stFlrSF",
    "2ndFlrSF",
    "LowQualFinSF",
    "GrLivArea",
    "BsmtFullBath",
    "BsmtHalfBath",
    "FullBath",
    "HalfBath",
    "BedroomAbvGr",
    "KitchenAbvGr",
    "TotRmsAbvGrd",
    "Fireplaces",
    "GarageType",
    "GarageYrBlt",
    "GarageCars",
    "GarageArea",
    "WoodDeckSF",
    "OpenPorchSF",
    "EnclosedPorch",
    "3SsnPorch",
    "ScreenPorch",
    "PoolArea",
    "Fence",
    "MiscFeature",
    "MiscVal",
    "MoSold",
    "YrSold",
    "SaleType",
    "SaleCondition",
    "SalePrice",
];

/// A housing-style table: an `Id` column, 30 low-cardinality categorical
/// columns (up to 7 labels, some with `NA`) and 49 high-cardinality columns,
/// interleaved. Rows are drawn around a few latent house archetypes so that
/// near neighbours exist.
pub fn synthesize_housing_csv(items: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let archetypes = 12;
    let cardinality: Vec<usize> = (0..HOUSING_CATEGORICAL.len())
        .map(|i| 2 + (i * 5 + 3) % 6)
        .collect();
    let prototypes: Vec<Vec<usize>> = (0..archetypes)
        .map(|_| {
            cardinality
                .iter()
                .map(|&c| rng.random_range(0..c))
                .collect()
        })
        .collect();

    // Interleave: after every two categorical columns place three numeric ones.
    let mut columns: Vec<(bool, usize)> = Vec::new();
    let (mut ci, mut ni) = (0, 0);
    while ci < HOUSING_CATEGORICAL.len() || ni < HOUSING_NUMERIC.len() {
        for _ in 0..2 {
            if ci < HOUSING_CATEGORICAL.len() {
                columns.push((true, ci));
                ci += 1;
            }
        }
        for _ in 0..3 {
            if ni < HOUSING_NUMERIC.len() {
                columns.push((false, ni));
                ni += 1;
            }
        }
    }

    let mut out = String::from("Id");
    for &(cat, i) in &columns {
        out.push(',');
        out.push_str(if cat {
            HOUSING_CATEGORICAL[i]
        } else {
            HOUSING_NUMERIC[i]
        });
    }
    out.push('\n');
    for id in 1..=items {
        let proto = &prototypes[rng.random_range(0..archetypes)];
        let _ = write!(out, "{id}");
        for &(cat, i) in &columns {
            if cat {
                let v = if rng.random_bool(0.9) {
                    proto[i]
                } else {
                    rng.random_range(0..cardinality[i])
                };
                // The last label of every third feature reads as missing.
                if i % 3 == 0 && v + 1 == cardinality[i] {
                    out.push_str(",NA");
                } else {
                    let _ = write!(out, ",L{v}");
                }
            } else {
                let _ = write!(out, ",{}", rng.random_range(0..5000u32));
            }
        }
        out.push('\n');
    }
    out
}
