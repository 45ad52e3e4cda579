//! Seeded synthetic data: a document corpus with planted cluster
//! structure for scalability runs, and random elimination instances for
//! property tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use crate::bitset::ResultSet;
use crate::corpus::{Document, Keyword, Query};
use crate::universe::ResultUniverse;

/// Parameters of the planted-cluster corpus. Every document carries the
/// query word; documents of cluster `c` carry each of the cluster's
/// `signature_words` with probability `signature_prob`, plus
/// `noise_per_result` words drawn from a shared noise vocabulary.
#[derive(Clone, Debug)]
pub struct SyntheticCorpusConfig {
    pub results: usize,
    pub clusters: usize,
    pub signature_words: usize,
    pub signature_prob: f64,
    pub noise_vocab: usize,
    pub noise_per_result: usize,
    pub query_word: String,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        SyntheticCorpusConfig {
            results: 100,
            clusters: 3,
            signature_words: 5,
            signature_prob: 0.9,
            noise_vocab: 60,
            noise_per_result: 6,
            query_word: "topic".to_string(),
            seed: 7,
        }
    }
}

pub fn synthetic_corpus(config: &SyntheticCorpusConfig) -> Vec<Document> {
    assert!(config.results >= 1 && config.clusters >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.results)
        .map(|i| {
            let cluster = i % config.clusters;
            let mut text = config.query_word.clone();
            for w in 0..config.signature_words {
                if rng.gen_bool(config.signature_prob) {
                    text.push_str(&format!(" sig{cluster}w{w}"));
                }
            }
            for _ in 0..config.noise_per_result {
                let w = rng.gen_range(0..config.noise_vocab);
                text.push_str(&format!(" noise{w}"));
            }
            Document::text(format!("r{i:05}"), &text, 1.0)
        })
        .collect()
}

/// A randomly generated universe split into one cluster and its
/// complement, with the full keyword pool. Used to fuzz the expansion
/// algorithms against the exhaustive optimizer.
#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub universe: ResultUniverse,
    pub cluster: ResultSet,
    pub others: ResultSet,
    pub pool: Vec<Keyword>,
    pub base: Query,
}

#[derive(Clone, Debug)]
pub struct RandomInstanceConfig {
    pub max_results: usize,
    pub max_keywords: usize,
    /// Probability that a given keyword eliminates a given result.
    pub elim_prob: f64,
    pub weighted: bool,
}

impl Default for RandomInstanceConfig {
    fn default() -> Self {
        RandomInstanceConfig {
            max_results: 15,
            max_keywords: 10,
            elim_prob: 0.35,
            weighted: false,
        }
    }
}

pub fn random_instance(seed: u64, config: &RandomInstanceConfig) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=config.max_results.max(2));
    let m = rng.gen_range(1..=config.max_keywords.max(1));

    let base_keyword = Keyword::new("q");
    let base = Query::new([base_keyword.clone()]);

    let pool: Vec<Keyword> = (0..m).map(|i| Keyword::new(&format!("k{i}"))).collect();
    let mut contains: Vec<Vec<bool>> = vec![vec![false; m]; n];
    for row in contains.iter_mut() {
        for cell in row.iter_mut() {
            *cell = !rng.gen_bool(config.elim_prob);
        }
    }

    let ids: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
    let scores: Vec<f64> = (0..n)
        .map(|_| {
            if config.weighted {
                // One decimal place keeps sums reproducible in prints.
                (rng.gen_range(1..=40) as f64) / 10.0
            } else {
                1.0
            }
        })
        .collect();
    let tokens: Vec<BTreeMap<Keyword, u32>> = (0..n)
        .map(|i| {
            let mut counts: BTreeMap<Keyword, u32> = BTreeMap::new();
            counts.insert(base_keyword.clone(), 1);
            for (j, keyword) in pool.iter().enumerate() {
                if contains[i][j] {
                    counts.insert(keyword.clone(), 1);
                }
            }
            counts
        })
        .collect();

    let universe = ResultUniverse::from_parts(
        ids,
        scores,
        tokens,
        base.keywords().cloned().collect(),
    )
    .expect("generated universe is valid");

    let cluster_size = rng.gen_range(1..=n);
    let cluster = ResultSet::from_indices(n, 0..cluster_size);
    let others = cluster.complement();

    RandomInstance {
        universe,
        cluster,
        others,
        pool,
        base,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::universe::Ranking;

    #[test]
    fn corpus_is_deterministic_and_sized() {
        let config = SyntheticCorpusConfig {
            results: 40,
            ..SyntheticCorpusConfig::default()
        };
        let a = synthetic_corpus(&config);
        let b = synthetic_corpus(&config);
        assert_eq!(a.len(), 40);
        assert_eq!(
            a.iter().map(|d| d.id.clone()).collect::<Vec<_>>(),
            b.iter().map(|d| d.id.clone()).collect::<Vec<_>>()
        );
        let query = Query::new([Keyword::new("topic")]);
        let universe = ResultUniverse::build(&a, &query, Ranking::Uniform).unwrap();
        assert_eq!(universe.len(), 40);
    }

    #[test]
    fn random_instances_are_well_formed() {
        for seed in 0..50 {
            let instance = random_instance(seed, &RandomInstanceConfig::default());
            let n = instance.universe.len();
            assert!(n >= 2 && n <= 15);
            assert!(!instance.cluster.is_empty());
            assert_eq!(instance.cluster.union(&instance.others).count(), n);
            assert!(!instance.cluster.intersects(&instance.others));
            // Pool keywords never cover the base query keyword.
            assert!(instance.pool.iter().all(|k| !instance.base.contains(k)));
        }
    }
}
