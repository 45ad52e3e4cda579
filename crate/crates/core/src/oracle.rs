//! Exhaustive small-instance optimizer: enumerate every expansion subset
//! of the pool up to a length cap and keep the query with the best
//! F-measure. Guarded against blowup, it exists to ground-truth the
//! heuristics on desk-scale instances.

use std::cmp::Ordering;

use crate::bitset::ResultSet;
use crate::corpus::{Keyword, Query};
use crate::error::{Error, Result};
use crate::metrics;
use crate::universe::ResultUniverse;

const MAX_POOL: usize = 20;

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub best_query: Query,
    pub best_f: f64,
    pub evaluated_count: u64,
}

/// Under weights s, F = 2a/d with a = S(R & C) and d = S(R) + S(C).
/// Comparing a1*d2 against a2*d1 avoids the division, so integer-weight
/// comparisons are exact.
fn cmp_f(a1: f64, d1: f64, a2: f64, d2: f64) -> Ordering {
    let zero1 = a1 == 0.0 || d1 == 0.0;
    let zero2 = a2 == 0.0 || d2 == 0.0;
    match (zero1, zero2) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => (a1 * d2).partial_cmp(&(a2 * d1)).unwrap(),
    }
}

struct Search<'a> {
    universe: &'a ResultUniverse,
    cluster: &'a ResultSet,
    s_cluster: f64,
    pool: Vec<Keyword>,
    postings: Vec<ResultSet>,
    max_len: usize,
    evaluated: u64,
    best_a: f64,
    best_d: f64,
    best_expansion: Vec<Keyword>,
}

impl Search<'_> {
    fn visit(&mut self, retained: &ResultSet, expansion: &mut Vec<Keyword>, next: usize) {
        self.evaluated += 1;
        let a = self.universe.score_sum(&retained.intersect(self.cluster));
        let d = self.universe.score_sum(retained) + self.s_cluster;
        let replace = match cmp_f(a, d, self.best_a, self.best_d) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                // Fewer keywords, then lexicographically smaller.
                (expansion.len(), &*expansion)
                    < (self.best_expansion.len(), &self.best_expansion)
            }
        };
        if replace {
            self.best_a = a;
            self.best_d = d;
            self.best_expansion = expansion.clone();
        }
        if expansion.len() == self.max_len {
            return;
        }
        for i in next..self.pool.len() {
            let narrowed = retained.intersect(&self.postings[i]);
            expansion.push(self.pool[i].clone());
            self.visit(&narrowed, expansion, i + 1);
            expansion.pop();
        }
    }
}

/// Best expansion subset of the pool with at most `max_len` keywords.
/// Ties prefer fewer keywords, then lexicographic order.
pub fn brute_force_best(
    universe: &ResultUniverse,
    base: &Query,
    cluster: &ResultSet,
    others: &ResultSet,
    pool: &[Keyword],
    max_len: usize,
) -> Result<OracleResult> {
    let _ = others;
    if cluster.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let mut sorted: Vec<Keyword> = pool.to_vec();
    sorted.sort();
    sorted.dedup();
    sorted.retain(|k| !base.contains(k));
    if sorted.len() > MAX_POOL {
        return Err(Error::PoolTooLarge(sorted.len()));
    }

    let postings: Vec<ResultSet> = sorted
        .iter()
        .map(|k| universe.elimination(k).complement())
        .collect();
    let effective_max = max_len.min(sorted.len());
    let mut search = Search {
        universe,
        cluster,
        s_cluster: universe.score_sum(cluster),
        pool: sorted,
        postings,
        max_len: effective_max,
        evaluated: 0,
        best_a: 0.0,
        best_d: 0.0,
        best_expansion: Vec::new(),
    };
    let base_retained = universe.eval(base);
    search.visit(&base_retained, &mut Vec::new(), 0);

    let mut best_query = base.clone();
    for keyword in &search.best_expansion {
        best_query.add_expansion(keyword.clone());
    }
    let best_f = metrics::evaluate(universe, &universe.eval(&best_query), cluster)?.f_measure;
    Ok(OracleResult {
        best_query,
        best_f,
        evaluated_count: search.evaluated,
    })
}
