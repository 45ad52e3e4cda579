//! The result universe of a user query: matching results with ranking
//! scores, per-keyword postings, and derived elimination sets.
//!
//! For every keyword `k` occurring in the universe, `E(k)` is the set of
//! results that do not contain `k`; adding `k` to a conjunctive query
//! removes exactly `E(k)` from its result set. Keywords of the original
//! query have empty elimination sets by construction.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::bitset::ResultSet;
use crate::corpus::{Document, Keyword, Query};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ranking {
    /// Every result scores 1.0, so set scores reduce to cardinalities.
    Uniform,
    /// Sum over the query keywords of tf(k, result) * idf(k), with idf
    /// taken over the input document collection.
    TfIdfSum,
}

/// Immutable once built; safe to share across threads.
#[derive(Clone, Debug)]
pub struct ResultUniverse {
    ids: Vec<String>,
    scores: Vec<f64>,
    tokens: Vec<BTreeMap<Keyword, u32>>,
    postings: BTreeMap<Keyword, ResultSet>,
    original_query: BTreeSet<Keyword>,
}

/// Indices of the documents containing every keyword of the query.
pub fn matching_documents(documents: &[Document], query: &Query) -> Vec<usize> {
    documents
        .iter()
        .enumerate()
        .filter(|(_, d)| d.contains_all(query.keywords()))
        .map(|(i, _)| i)
        .collect()
}

impl ResultUniverse {
    /// Evaluate the user query over a document collection and materialize
    /// the universe. Fails when nothing matches.
    pub fn build(documents: &[Document], query: &Query, ranking: Ranking) -> Result<Self> {
        if query.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let matching = matching_documents(documents, query);
        if matching.is_empty() {
            return Err(Error::EmptyUniverse);
        }

        let scores = match ranking {
            Ranking::Uniform => vec![1.0; matching.len()],
            Ranking::TfIdfSum => {
                // Corpus-level idf: within the universe every result contains
                // every query keyword, which would pin idf to ln(1) = 0.
                let n = documents.len() as f64;
                let idf: BTreeMap<&Keyword, f64> = query
                    .keywords()
                    .map(|k| {
                        let df = documents.iter().filter(|d| d.contains(k)).count() as f64;
                        (k, (n / df).ln())
                    })
                    .collect();
                matching
                    .iter()
                    .map(|&i| {
                        query
                            .keywords()
                            .map(|k| {
                                let tf = *documents[i].token_counts().get(k).unwrap_or(&0) as f64;
                                tf * idf[k]
                            })
                            .sum()
                    })
                    .collect()
            }
        };

        let ids = matching.iter().map(|&i| documents[i].id.clone()).collect();
        let tokens = matching
            .iter()
            .map(|&i| documents[i].token_counts().clone())
            .collect();
        Self::from_parts(ids, scores, tokens, query.keywords().cloned().collect())
    }

    /// Assemble a universe from per-result token counts. Postings and
    /// elimination sets are derived from the tokens.
    pub(crate) fn from_parts(
        ids: Vec<String>,
        scores: Vec<f64>,
        tokens: Vec<BTreeMap<Keyword, u32>>,
        original_query: BTreeSet<Keyword>,
    ) -> Result<Self> {
        debug_assert_eq!(ids.len(), scores.len());
        debug_assert_eq!(ids.len(), tokens.len());
        debug_assert!(tokens.iter().all(|t| !t.is_empty()));

        let n = ids.len();
        let mut postings: BTreeMap<Keyword, ResultSet> = BTreeMap::new();
        for (index, counts) in tokens.iter().enumerate() {
            for keyword in counts.keys() {
                postings
                    .entry(keyword.clone())
                    .or_insert_with(|| ResultSet::empty(n))
                    .insert(index);
            }
        }
        for keyword in &original_query {
            debug_assert!(
                postings.get(keyword).is_some_and(|p| p.count() == n),
                "query keyword `{keyword}` must occur in every result"
            );
        }
        Ok(ResultUniverse {
            ids,
            scores,
            tokens,
            postings,
            original_query,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn score(&self, index: usize) -> f64 {
        self.scores[index]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Total ranking score of a result set.
    pub fn score_sum(&self, set: &ResultSet) -> f64 {
        set.iter().map(|i| self.scores[i]).sum()
    }

    /// Multiply every rank score by a positive constant.
    pub fn scale_scores(&mut self, factor: f64) {
        assert!(factor > 0.0 && factor.is_finite());
        for score in &mut self.scores {
            *score *= factor;
        }
    }

    pub fn token_counts(&self, index: usize) -> &BTreeMap<Keyword, u32> {
        &self.tokens[index]
    }

    /// Distinct keywords occurring anywhere in the universe.
    pub fn keywords(&self) -> impl Iterator<Item = &Keyword> {
        self.postings.keys()
    }

    pub fn original_query(&self) -> &BTreeSet<Keyword> {
        &self.original_query
    }

    pub fn postings(&self, keyword: &Keyword) -> Option<&ResultSet> {
        self.postings.get(keyword)
    }

    /// E(k): results that do not contain the keyword. Keywords unknown to
    /// the universe eliminate everything.
    pub fn elimination(&self, keyword: &Keyword) -> ResultSet {
        match self.postings.get(keyword) {
            Some(posting) => posting.complement(),
            None => ResultSet::full(self.len()),
        }
    }

    pub fn full_set(&self) -> ResultSet {
        ResultSet::full(self.len())
    }

    /// Results containing every keyword of the query: the universe minus
    /// the union of the keywords' elimination sets.
    pub fn eval(&self, query: &Query) -> ResultSet {
        let mut retained = self.full_set();
        for keyword in query.keywords() {
            match self.postings.get(keyword) {
                Some(posting) => retained.intersect_with(posting),
                None => return ResultSet::empty(self.len()),
            }
        }
        retained
    }

    /// Total occurrences of a keyword across the universe.
    pub fn total_tf(&self, keyword: &Keyword) -> u64 {
        match self.postings.get(keyword) {
            Some(posting) => posting
                .iter()
                .map(|i| u64::from(self.tokens[i][keyword]))
                .sum(),
            None => 0,
        }
    }

    /// Expansion candidates: the top fraction of non-query keywords by
    /// tf-idf over the universe (tf = total occurrences, idf = ln(N/df)),
    /// ties broken lexicographically.
    pub fn candidate_pool(&self, fraction: f64) -> Vec<Keyword> {
        assert!(
            fraction > 0.0 && fraction <= 1.0,
            "candidate fraction must be in (0, 1]"
        );
        let n = self.len() as f64;
        let mut scored: Vec<(f64, &Keyword)> = self
            .postings
            .iter()
            .filter(|(k, _)| !self.original_query.contains(k))
            .map(|(k, posting)| {
                let df = posting.count() as f64;
                let idf = (n / df).ln();
                (self.total_tf(k) as f64 * idf, k)
            })
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
        if scored.is_empty() {
            return Vec::new();
        }
        // Small slack so products like 0.2 * 10 do not ceil to 3.
        let take = (((fraction * scored.len() as f64) - 1e-9).ceil() as usize).clamp(1, scored.len());
        scored.into_iter().take(take).map(|(_, k)| k.clone()).collect()
    }

    /// Keep the K highest-scored results (ties by id ascending) and
    /// rebuild postings over the truncation.
    pub fn top_k(&self, k: usize) -> Self {
        assert!(k >= 1, "top-k requires k >= 1");
        if k >= self.len() {
            return self.clone();
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.scores[b]
                .partial_cmp(&self.scores[a])
                .unwrap()
                .then_with(|| self.ids[a].cmp(&self.ids[b]))
        });
        order.truncate(k);
        let ids = order.iter().map(|&i| self.ids[i].clone()).collect();
        let scores = order.iter().map(|&i| self.scores[i]).collect();
        let tokens = order.iter().map(|&i| self.tokens[i].clone()).collect();
        Self::from_parts(ids, scores, tokens, self.original_query.clone())
            .expect("truncation preserves universe invariants")
    }

    /// Map external result ids to universe indices.
    pub fn indices_for<'a, I: IntoIterator<Item = &'a str>>(&self, ids: I) -> Result<ResultSet> {
        let lookup: HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut set = ResultSet::empty(self.len());
        for id in ids {
            match lookup.get(id) {
                Some(&i) => set.insert(i),
                None => {
                    return Err(Error::InvalidPartition(format!(
                        "unknown result id `{id}`"
                    )))
                }
            }
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kw(s: &str) -> Keyword {
        Keyword::new(s)
    }

    fn docs(specs: &[(&str, &str)]) -> Vec<Document> {
        specs
            .iter()
            .map(|(id, text)| Document::text(*id, text, 1.0))
            .collect()
    }

    #[test]
    fn uniform_build_scores_one() {
        let documents = docs(&[("a", "apple pie"), ("b", "apple tree"), ("c", "apple")]);
        let universe =
            ResultUniverse::build(&documents, &Query::new([kw("apple")]), Ranking::Uniform)
                .unwrap();
        assert_eq!(universe.len(), 3);
        assert!(universe.scores().iter().all(|&s| s == 1.0));
        assert_eq!(universe.score_sum(&universe.full_set()), 3.0);
    }

    #[test]
    fn empty_universe_is_an_error() {
        let documents = docs(&[("a", "apple")]);
        let err = ResultUniverse::build(&documents, &Query::new([kw("zzz")]), Ranking::Uniform)
            .unwrap_err();
        assert!(matches!(err, Error::EmptyUniverse));
    }

    #[test]
    fn query_over_own_universe_is_full() {
        let documents = docs(&[("a", "apple pie"), ("b", "apple tree")]);
        let q = Query::new([kw("apple")]);
        let universe = ResultUniverse::build(&documents, &q, Ranking::Uniform).unwrap();
        assert_eq!(universe.eval(&q), universe.full_set());
        assert!(universe.elimination(&kw("apple")).is_empty());
    }

    #[test]
    fn unknown_keyword_evaluates_empty() {
        let documents = docs(&[("a", "apple")]);
        let q = Query::new([kw("apple")]);
        let universe = ResultUniverse::build(&documents, &q, Ranking::Uniform).unwrap();
        let probe = q.clone().with_expansion(kw("missing"));
        assert!(universe.eval(&probe).is_empty());
    }

    #[test]
    fn tfidf_sum_ranking_uses_corpus_level_idf() {
        let documents = docs(&[
            ("a", "apple apple store"),
            ("b", "apple store"),
            ("c", "pear orchard"),
            ("d", "pear tree"),
        ]);
        let q = Query::new([kw("apple")]);
        let universe = ResultUniverse::build(&documents, &q, Ranking::TfIdfSum).unwrap();
        let idf = (4.0f64 / 2.0).ln();
        assert_eq!(universe.score(0), 2.0 * idf);
        assert_eq!(universe.score(1), idf);
    }

    #[test]
    fn candidate_pool_fraction_and_ties() {
        // 10 distinct non-query keywords; fraction 0.2 keeps exactly 2.
        let documents = docs(&[
            ("a", "q w0 w1 w2 w3 w4"),
            ("b", "q w5 w6 w7 w8 w9"),
            ("c", "q w0 w1"),
        ]);
        let q = Query::new([kw("q")]);
        let universe = ResultUniverse::build(&documents, &q, Ranking::Uniform).unwrap();
        let pool = universe.candidate_pool(0.2);
        assert_eq!(pool.len(), 2);
        // w2..w9 score 1 * ln 3 each and beat w0/w1 (2 * ln 1.5); the
        // eight-way tie breaks lexicographically.
        assert_eq!(pool, vec![kw("w2"), kw("w3")]);
    }

    #[test]
    fn keyword_in_every_result_ranks_last() {
        let documents = docs(&[("a", "q common rare"), ("b", "q common")]);
        let q = Query::new([kw("q")]);
        let universe = ResultUniverse::build(&documents, &q, Ranking::Uniform).unwrap();
        let pool = universe.candidate_pool(1.0);
        assert_eq!(pool, vec![kw("rare"), kw("common")]);
    }

    #[test]
    fn elimination_table_from_documents() {
        // Encode the refinement fixture as plain text documents and check
        // that the derived elimination sets split as expected.
        let instance = crate::instance::load_instance(std::path::Path::new(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/fixtures/apple.json"
        )))
        .unwrap();
        let all_ids: Vec<String> = instance
            .cluster
            .iter()
            .chain(&instance.others)
            .cloned()
            .collect();
        let documents: Vec<Document> = all_ids
            .iter()
            .map(|id| {
                let mut text = String::from("apple");
                for (keyword, eliminated) in &instance.eliminates {
                    if !eliminated.contains(id) {
                        text.push(' ');
                        text.push_str(keyword);
                    }
                }
                Document::text(id.clone(), &text, 1.0)
            })
            .collect();
        let universe =
            ResultUniverse::build(&documents, &Query::new([kw("apple")]), Ranking::Uniform)
                .unwrap();
        assert_eq!(universe.len(), 18);
        let e_job = universe.elimination(&kw("job"));
        let ids: Vec<&str> = e_job.iter().map(|i| universe.id(i)).collect();
        assert_eq!(
            ids,
            ["R1", "R2", "R3", "R4", "R5", "R6", "O1", "O2", "O3", "O4", "O5", "O6", "O7", "O8"]
        );
    }

    #[test]
    fn top_k_truncates_by_score_then_id() {
        let documents = docs(&[("d1", "q x"), ("d2", "q y"), ("d3", "q z")]);
        let q = Query::new([kw("q")]);
        let mut universe = ResultUniverse::build(&documents, &q, Ranking::Uniform).unwrap();
        // Uniform ranking flattens scores; override to exercise ordering.
        universe.scores = vec![1.0, 5.0, 1.0];
        let top = universe.top_k(2);
        assert_eq!(top.ids(), ["d2", "d1"]);
        let identity = universe.top_k(10);
        assert_eq!(identity.ids(), universe.ids());
    }

    #[test]
    fn top_k_equal_scores_takes_first_ids() {
        let documents = docs(&[("b", "q"), ("a", "q"), ("c", "q")]);
        let q = Query::new([kw("q")]);
        let universe = ResultUniverse::build(&documents, &q, Ranking::Uniform).unwrap();
        let top = universe.top_k(2);
        assert_eq!(top.ids(), ["a", "b"]);
    }

    proptest! {
        /// E(k) is exactly the complement of postings(k), and adding a
        /// keyword removes exactly E(k) from any result set.
        #[test]
        fn elimination_complements_postings(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..8usize);
            let vocab = ["red", "green", "blue", "cyan"];
            let documents: Vec<Document> = (0..n)
                .map(|i| {
                    let mut text = String::from("q");
                    for word in vocab {
                        if rng.gen_bool(0.5) {
                            text.push(' ');
                            text.push_str(word);
                        }
                    }
                    Document::text(format!("d{i}"), &text, 1.0)
                })
                .collect();
            let q = Query::new([kw("q")]);
            let universe = ResultUniverse::build(&documents, &q, Ranking::Uniform).unwrap();

            for keyword in universe.keywords() {
                let posting = universe.postings(keyword).unwrap();
                let elim = universe.elimination(keyword);
                prop_assert!(posting.union(&elim) == universe.full_set());
                prop_assert!(!posting.intersects(&elim));
            }

            for word in vocab {
                let k = kw(word);
                let extended = q.clone().with_expansion(k.clone());
                let expect = universe.eval(&q).difference(&universe.elimination(&k));
                prop_assert!(universe.eval(&extended) == expect);
                prop_assert!(universe.eval(&extended).is_subset_of(&universe.eval(&q)));
            }

            // Pool output is deterministic for a fixed universe.
            prop_assert_eq!(universe.candidate_pool(0.5), universe.candidate_pool(0.5));
        }
    }
}
