//! Bare instance files: a result universe given directly by its
//! elimination sets, for algorithm-level tests and small experiments.
//!
//! Format (JSON, one object per file):
//!
//! ```json
//! {
//!   "cluster":    ["R1", "R2"],
//!   "others":     ["O1"],
//!   "scores":     {"R1": 0.5},
//!   "eliminates": {"store": ["R1", "O1"]}
//! }
//! ```
//!
//! `cluster` is the ground-truth cluster, `others` everything else;
//! `eliminates` maps each candidate keyword to the results it would
//! remove from a query. Scores default to 1.0. Every listed result
//! implicitly contains the user query's keywords.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bitset::ResultSet;
use crate::cluster::ClusterPartition;
use crate::corpus::{Keyword, Query};
use crate::error::{Error, Result};
use crate::universe::ResultUniverse;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub cluster: Vec<String>,
    pub others: Vec<String>,
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
    pub eliminates: BTreeMap<String, Vec<String>>,
}

pub fn load_instance(path: &Path) -> Result<InstanceFile> {
    let data = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&data).map_err(|e| Error::MalformedLine {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

impl InstanceFile {
    /// Materialize the universe and the implied two-way partition
    /// (`cluster`, `others`). Results are indexed in file order, cluster
    /// first.
    pub fn into_universe(&self, query: &Query) -> Result<(ResultUniverse, ClusterPartition)> {
        if query.is_empty() {
            return Err(Error::EmptyQuery);
        }
        if self.cluster.is_empty() {
            return Err(Error::InvalidInstance("cluster must be nonempty".into()));
        }

        let ids: Vec<String> = self.cluster.iter().chain(&self.others).cloned().collect();
        let n = ids.len();
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.as_str(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }

        let query_keywords: BTreeSet<Keyword> = query.keywords().cloned().collect();
        let mut postings: BTreeMap<Keyword, ResultSet> = BTreeMap::new();
        for (raw, eliminated) in &self.eliminates {
            let keyword = Keyword::new(raw);
            let mut elimination = ResultSet::empty(n);
            for id in eliminated {
                match index.get(id.as_str()) {
                    Some(&i) => elimination.insert(i),
                    None => {
                        return Err(Error::InvalidInstance(format!(
                            "eliminates[{raw}] references unknown result `{id}`"
                        )))
                    }
                }
            }
            if query_keywords.contains(&keyword) && !elimination.is_empty() {
                return Err(Error::InvalidInstance(format!(
                    "query keyword `{keyword}` cannot eliminate universe results"
                )));
            }
            postings.insert(keyword, elimination.complement());
        }
        for keyword in &query_keywords {
            postings.insert(keyword.clone(), ResultSet::full(n));
        }

        let mut scores = Vec::with_capacity(n);
        for id in &ids {
            let score = self.scores.get(id).copied().unwrap_or(1.0);
            if !score.is_finite() || score < 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "score for `{id}` must be a non-negative real"
                )));
            }
            scores.push(score);
        }

        let tokens: Vec<BTreeMap<Keyword, u32>> = (0..n)
            .map(|i| {
                postings
                    .iter()
                    .filter(|(_, posting)| posting.contains(i))
                    .map(|(k, _)| (k.clone(), 1))
                    .collect()
            })
            .collect();

        let universe =
            ResultUniverse::from_parts(ids, scores, tokens, query_keywords)?;

        let cluster_set = ResultSet::from_indices(n, 0..self.cluster.len());
        let mut clusters = vec![cluster_set];
        if !self.others.is_empty() {
            clusters.push(ResultSet::from_indices(n, self.cluster.len()..n));
        }
        let partition = ClusterPartition::new(clusters, n)?;
        Ok((universe, partition))
    }

    /// Every keyword named by the instance, minus the user query.
    pub fn pool(&self, query: &Query) -> Vec<Keyword> {
        self.eliminates
            .keys()
            .map(|raw| Keyword::new(raw))
            .filter(|k| !query.contains(k))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kw(s: &str) -> Keyword {
        Keyword::new(s)
    }

    fn toy() -> InstanceFile {
        serde_json::from_str(
            r#"{
                "cluster": ["R1", "R2"],
                "others": ["O1", "O2"],
                "scores": {"O2": 0.5},
                "eliminates": {"store": ["R1", "O1"], "job": ["O1", "O2"]}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn builds_universe_with_implied_partition() {
        let q = Query::new([kw("apple")]);
        let (universe, partition) = toy().into_universe(&q).unwrap();
        assert_eq!(universe.len(), 4);
        assert_eq!(universe.elimination(&kw("store")).iter().collect::<Vec<_>>(), vec![0, 2]);
        assert!(universe.elimination(&kw("apple")).is_empty());
        assert_eq!(universe.score(3), 0.5);
        assert_eq!(partition.k(), 2);
        assert_eq!(partition.clusters()[0].iter().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn rejects_unknown_result_reference() {
        let mut inst = toy();
        inst.eliminates.insert("bad".into(), vec!["missing".into()]);
        let err = inst.into_universe(&Query::new([kw("apple")])).unwrap_err();
        assert!(matches!(err, Error::InvalidInstance(_)));
    }

    #[test]
    fn rejects_eliminating_query_keyword() {
        let mut inst = toy();
        inst.eliminates.insert("apple".into(), vec!["R1".into()]);
        let err = inst.into_universe(&Query::new([kw("apple")])).unwrap_err();
        assert!(matches!(err, Error::InvalidInstance(_)));
    }

    #[test]
    fn pool_excludes_query_keywords() {
        let inst = toy();
        let pool = inst.pool(&Query::new([kw("job")]));
        assert_eq!(pool, vec![kw("store")]);
    }
}
