//! Scaled training subsets for data-scaling experiments.
//!
//! Ratio mixing samples `floor(f * N_d)` utterances from each source dataset.
//! Total mixing samples the same overall count from the merged pool, so both
//! strategies always produce subsets of identical size.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_file, Address, Corpus, Split};
use crate::error::{Error, Result};

/// A rational sampling fraction in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num > den {
            return Err(Error::Config(format!("fraction {num}/{den} is outside (0, 1]")));
        }
        let g = gcd(num, den);
        Ok(Fraction { num: num / g, den: den / g })
    }

    pub fn numerator(self) -> u64 {
        self.num
    }

    pub fn denominator(self) -> u64 {
        self.den
    }

    /// `floor(self * n)`, computed exactly.
    pub fn of(self, n: usize) -> usize {
        (n as u128 * self.num as u128 / self.den as u128) as usize
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Fraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse fraction {s:?}"));
        let (num, den) = match s.trim().split_once('/') {
            Some((n, d)) => (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
            None => (s.trim().parse().map_err(|_| bad())?, 1),
        };
        Fraction::new(num, den)
    }
}

impl Serialize for Fraction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fractions of the data-scaling grid: 1, 1/2, ..., 1/64.
pub fn default_fractions() -> Vec<Fraction> {
    (0..7).map(|k| Fraction::new(1, 1 << k).expect("valid")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Uniform sampling from all datasets pooled together.
    Total,
    /// Independent sampling per dataset, then concatenation.
    Ratio,
    /// Sampling from one dataset only.
    Single(String),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Total => f.write_str("total"),
            Strategy::Ratio => f.write_str("ratio"),
            Strategy::Single(d) => write!(f, "single:{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MixPlan {
    pub strategy: Strategy,
    pub fraction: Fraction,
    pub seed: u64,
}

/// Cartesian product, strategy-major.
pub fn plan_grid(fractions: &[Fraction], strategies: &[Strategy], seed: u64) -> Vec<MixPlan> {
    strategies
        .iter()
        .flat_map(|s| fractions.iter().map(move |f| MixPlan { strategy: s.clone(), fraction: *f, seed }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixSample {
    pub plan: MixPlan,
    /// Sampled utterances in seeded-shuffle order.
    pub addresses: Vec<Address>,
    /// Sampled count per source dataset, in corpus order of first appearance.
    pub per_dataset: Vec<(String, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MixSample {
    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    /// Portable description of the subset: plan plus sorted addresses.
    pub fn manifest(&self, config_hash: &str) -> SubsetManifest {
        let mut addresses = self.addresses.clone();
        addresses.sort();
        SubsetManifest {
            config_hash: config_hash.to_string(),
            plan: self.plan.clone(),
            count: addresses.len(),
            per_dataset: self.per_dataset.clone(),
            addresses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetManifest {
    pub config_hash: String,
    pub plan: MixPlan,
    pub count: usize,
    pub per_dataset: Vec<(String, usize)>,
    pub addresses: Vec<Address>,
}

impl SubsetManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &(serde_json::to_string_pretty(self)? + "\n"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Draws the training subset described by `plan` from the corpus's train split.
pub fn sample(corpus: &Corpus, plan: &MixPlan) -> Result<MixSample> {
    let mut pools: Vec<(String, Vec<Address>)> =
        corpus.source_datasets().into_iter().map(|d| (d, Vec::new())).collect();
    for (conv, u) in corpus.utterances().filter(|(c, _)| c.split == Split::Train) {
        let pool = pools.iter_mut().find(|(d, _)| *d == conv.dataset_id).expect("dataset listed");
        pool.1.push(conv.address(u.index));
    }
    pools.retain(|(_, p)| !p.is_empty());

    if let Strategy::Single(d) = &plan.strategy {
        if !pools.iter().any(|(name, _)| name == d) {
            return Err(Error::Config(format!("dataset {d} has no training utterances")));
        }
        pools.retain(|(name, _)| name == d);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut warnings = Vec::new();
    let quotas: Vec<usize> = pools.iter().map(|(_, p)| plan.fraction.of(p.len())).collect();
    for ((d, p), q) in pools.iter().zip(&quotas) {
        if *q == 0 {
            warnings.push(format!("{d}: fraction {} of {} utterances rounds down to zero", plan.fraction, p.len()));
        }
    }

    let mut addresses: Vec<Address> = match plan.strategy {
        Strategy::Ratio | Strategy::Single(_) => {
            let mut out = Vec::new();
            for ((_, pool), &q) in pools.iter().zip(&quotas) {
                let mut picks = rand::seq::index::sample(&mut rng, pool.len(), q).into_vec();
                picks.sort_unstable();
                out.extend(picks.into_iter().map(|i| pool[i].clone()));
            }
            out
        }
        Strategy::Total => {
            let merged: Vec<&Address> = pools.iter().flat_map(|(_, p)| p).collect();
            let target: usize = quotas.iter().sum();
            let mut picks = rand::seq::index::sample(&mut rng, merged.len(), target).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| merged[i].clone()).collect()
        }
    };
    addresses.shuffle(&mut rng);

    let per_dataset =
        pools.iter().map(|(d, _)| (d.clone(), addresses.iter().filter(|a| &a.dataset == d).count())).collect();
    Ok(MixSample { plan: plan.clone(), addresses, per_dataset, warnings })
}
