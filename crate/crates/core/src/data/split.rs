use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CausalPair, DataError, Domain};
use crate::scalar::Real;

/// Benchmark ids excluded because they have more than one cause or effect column.
pub const MULTIVARIATE_IDS: [u32; 6] = [52, 53, 54, 55, 71, 105];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

const TABLE: [(Domain, &[u32], &[u32]); 5] = [
    (
        Domain::Biology,
        &[7, 9, 70, 78, 79, 90, 92],
        &[5, 6, 8, 10, 11, 80, 89, 91],
    ),
    (
        Domain::ClimateEnvironment,
        &[1, 3, 4, 13, 15, 19, 21, 42, 48, 50, 72, 77, 82, 83, 94, 95],
        &[2, 14, 16, 20, 43, 44, 45, 46, 49, 51, 69, 73, 81, 87, 93, 96],
    ),
    (
        Domain::EconomicsFinance,
        &[12, 47, 57, 58, 60, 61, 62, 63, 67, 68, 86],
        &[17, 56, 59, 64, 65, 66, 74, 75, 76, 84, 99],
    ),
    (
        Domain::Medicine,
        &[18, 22, 34, 36, 39, 40, 88, 107],
        &[23, 24, 33, 35, 37, 38, 41, 85],
    ),
    (
        Domain::Physics,
        &[26, 28, 30, 31, 32, 97, 103, 104],
        &[25, 27, 29, 98, 100, 101, 102, 106, 108],
    ),
];

/// Domain and train/test assignment of every univariate benchmark pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitTable {
    entries: BTreeMap<u32, (Domain, Split)>,
}

impl SplitTable {
    pub fn lookup(&self, id: u32) -> Result<(Domain, Split), DataError> {
        self.entries
            .get(&id)
            .copied()
            .ok_or(DataError::UnknownId(id))
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.keys().copied()
    }

    pub fn ids_in(&self, split: Split) -> Vec<u32> {
        self.entries
            .iter()
            .filter(|(_, (_, s))| *s == split)
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, Domain, Split)> + '_ {
        self.entries.iter().map(|(id, (d, s))| (*id, *d, *s))
    }
}

pub fn split_table() -> SplitTable {
    let mut entries = BTreeMap::new();
    for (domain, train, test) in TABLE {
        for &id in train {
            entries.insert(id, (domain, Split::Train));
        }
        for &id in test {
            entries.insert(id, (domain, Split::Test));
        }
    }
    SplitTable { entries }
}

/// Deterministic 50/50 split stratified by domain: within each domain, pairs
/// ordered by id alternate between train and test (train first).
pub fn stratified_split<T: Real>(
    pairs: &[CausalPair<T>],
) -> (Vec<CausalPair<T>>, Vec<CausalPair<T>>) {
    let mut by_domain: BTreeMap<Domain, Vec<&CausalPair<T>>> = BTreeMap::new();
    for p in pairs {
        by_domain.entry(p.domain).or_default().push(p);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut group) in by_domain {
        group.sort_by_key(|p| p.id);
        for (i, p) in group.into_iter().enumerate() {
            if i % 2 == 0 {
                train.push(p.clone());
            } else {
                test.push(p.clone());
            }
        }
    }
    train.sort_by_key(|p| p.id);
    test.sort_by_key(|p| p.id);
    (train, test)
}
