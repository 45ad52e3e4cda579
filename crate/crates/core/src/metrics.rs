//! Weighted precision, recall, and F-measure against a cluster ground
//! truth, plus the collective score over a set of expanded queries.
//!
//! With `S(.)` the total ranking score of a result set and `C` the
//! cluster, a query retrieving `R` scores
//! `precision = S(R & C) / S(R)` and `recall = S(R & C) / S(C)`; the
//! F-measure is their harmonic mean. Degenerate cases (nothing
//! retrieved, zero precision or recall) score 0, the continuous limit.

use serde::{Deserialize, Serialize};

use crate::bitset::ResultSet;
use crate::error::{Error, Result};
use crate::universe::ResultUniverse;

/// Total ranking score of a result set.
pub fn total_score(universe: &ResultUniverse, set: &ResultSet) -> f64 {
    universe.score_sum(set)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryEvaluation {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Score a retrieved result set against a cluster ground truth.
pub fn evaluate(
    universe: &ResultUniverse,
    retrieved: &ResultSet,
    cluster: &ResultSet,
) -> Result<QueryEvaluation> {
    if cluster.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let hit = total_score(universe, &retrieved.intersect(cluster));
    let s_retrieved = total_score(universe, retrieved);
    let s_cluster = total_score(universe, cluster);

    let precision = if s_retrieved > 0.0 { hit / s_retrieved } else { 0.0 };
    let recall = if s_cluster > 0.0 { hit / s_cluster } else { 0.0 };
    let f_measure = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(QueryEvaluation {
        precision,
        recall,
        f_measure,
    })
}

/// Harmonic mean of per-cluster F-measures; 0 as soon as any input is 0.
pub fn collective_score(f_measures: &[f64]) -> Result<f64> {
    if f_measures.is_empty() {
        return Err(Error::NoScores);
    }
    if f_measures.iter().any(|&f| f == 0.0) {
        return Ok(0.0);
    }
    let denom: f64 = f_measures.iter().map(|&f| 1.0 / f).sum();
    Ok(f_measures.len() as f64 / denom)
}
