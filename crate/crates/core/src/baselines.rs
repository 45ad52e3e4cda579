//! Comparison methods: an F-measure-driven refinement variant, global
//! important-word queries, and tf-icf cluster labels.

use serde::Serialize;
use std::collections::BTreeMap;

use crate::bitset::ResultSet;
use crate::cluster::ClusterPartition;
use crate::corpus::{Keyword, Query};
use crate::iskr::Direction;
use crate::metrics;
use crate::universe::ResultUniverse;

/// A scored candidate word.
#[derive(Clone, Debug, Serialize)]
pub struct WordScore {
    pub keyword: Keyword,
    pub score: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FmeasureMove {
    #[serde(rename = "move")]
    pub direction: Direction,
    pub keyword: Keyword,
    pub delta_f: f64,
}

#[derive(Clone, Debug)]
pub struct FmeasureResult {
    pub query: Query,
    pub f: f64,
    pub moves: Vec<FmeasureMove>,
}

/// Same greedy loop as single-keyword refinement, but a keyword's value
/// is the F-measure change its move would cause. Every candidate is
/// re-scored after every move, which is exact but slow; moves apply only
/// while the best change is strictly positive.
pub fn refine_fmeasure(
    universe: &ResultUniverse,
    base: &Query,
    cluster: &ResultSet,
    others: &ResultSet,
    pool: &[Keyword],
    move_cap: Option<usize>,
) -> FmeasureResult {
    let _ = others;
    let f_of = |q: &Query| -> f64 {
        metrics::evaluate(universe, &universe.eval(q), cluster)
            .expect("cluster is nonempty")
            .f_measure
    };

    let mut query = base.clone();
    let mut current_f = f_of(&query);
    let cap = move_cap.unwrap_or(4 * pool.len());
    let mut moves = Vec::new();

    while moves.len() < cap {
        let mut best: Option<(Keyword, Direction, f64)> = None;
        let mut consider = |keyword: &Keyword, direction: Direction, f: f64| {
            let better = match &best {
                None => true,
                Some((bk, bd, bf)) => {
                    f > *bf
                        || (f == *bf
                            && (keyword, direction_rank(direction))
                                < (bk, direction_rank(*bd)))
                }
            };
            if better {
                best = Some((keyword.clone(), direction, f));
            }
        };

        for keyword in pool {
            if query.contains(keyword) {
                continue;
            }
            let trial = query.clone().with_expansion(keyword.clone());
            consider(keyword, Direction::Add, f_of(&trial));
        }
        let expansion: Vec<Keyword> = query.expansion().iter().cloned().collect();
        for keyword in &expansion {
            let trial = query.without(keyword);
            consider(keyword, Direction::Remove, f_of(&trial));
        }

        match best {
            Some((keyword, direction, f)) if f > current_f => {
                match direction {
                    Direction::Add => query.add_expansion(keyword.clone()),
                    Direction::Remove => {
                        query.remove_expansion(&keyword);
                    }
                }
                moves.push(FmeasureMove {
                    direction,
                    keyword,
                    delta_f: f - current_f,
                });
                current_f = f;
            }
            _ => break,
        }
    }

    FmeasureResult {
        query,
        f: current_f,
        moves,
    }
}

fn direction_rank(direction: Direction) -> u8 {
    match direction {
        Direction::Add => 0,
        Direction::Remove => 1,
    }
}

/// Global word importance: idf times the rank-weighted term frequency
/// over the results containing the word.
pub fn word_scores(universe: &ResultUniverse) -> Vec<WordScore> {
    let n = universe.len() as f64;
    let mut scored: Vec<WordScore> = universe
        .keywords()
        .filter(|k| !universe.original_query().contains(*k))
        .map(|keyword| {
            let posting = universe.postings(keyword).expect("keyword occurs");
            let idf = (n / posting.count() as f64).ln();
            let weighted_tf: f64 = posting
                .iter()
                .map(|i| {
                    universe.score(i) * f64::from(universe.token_counts(i)[keyword])
                })
                .sum();
            WordScore {
                keyword: keyword.clone(),
                score: weighted_tf * idf,
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| a.keyword.cmp(&b.keyword))
    });
    scored
}

/// Top-m important words of the whole result set, one expanded query per
/// word. No clustering involved.
pub fn data_clouds(universe: &ResultUniverse, base: &Query, m: usize) -> Vec<Query> {
    assert!(m >= 1, "word count must be at least 1");
    word_scores(universe)
        .into_iter()
        .take(m)
        .map(|w| base.clone().with_expansion(w.keyword))
        .collect()
}

/// Label each cluster with its top-m words by term frequency times
/// inverse cluster frequency, and turn each label into a query.
pub fn cs_labels(
    universe: &ResultUniverse,
    partition: &ClusterPartition,
    base: &Query,
    m: usize,
) -> Vec<Query> {
    assert!(m >= 1, "label length must be at least 1");
    let k = partition.k() as f64;

    let cluster_tfs: Vec<BTreeMap<&Keyword, u64>> = partition
        .clusters()
        .iter()
        .map(|cluster| {
            let mut tf: BTreeMap<&Keyword, u64> = BTreeMap::new();
            for i in cluster.iter() {
                for (keyword, &count) in universe.token_counts(i) {
                    *tf.entry(keyword).or_insert(0) += u64::from(count);
                }
            }
            tf
        })
        .collect();

    let mut cluster_frequency: BTreeMap<&Keyword, u32> = BTreeMap::new();
    for tf in &cluster_tfs {
        for keyword in tf.keys() {
            *cluster_frequency.entry(keyword).or_insert(0) += 1;
        }
    }

    cluster_tfs
        .iter()
        .map(|tf| {
            let mut scored: Vec<(f64, &Keyword)> = tf
                .iter()
                .filter(|(keyword, _)| !base.contains(keyword))
                .map(|(keyword, &count)| {
                    let icf = (k / f64::from(cluster_frequency[keyword])).ln();
                    (count as f64 * icf, *keyword)
                })
                .collect();
            scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
            let mut query = base.clone();
            for (_, keyword) in scored.into_iter().take(m) {
                query.add_expansion(keyword.clone());
            }
            query
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::instance::load_instance;
    use crate::universe::Ranking;

    fn kw(s: &str) -> Keyword {
        Keyword::new(s)
    }

    fn apple_setup() -> (ResultUniverse, ResultSet, ResultSet, Vec<Keyword>, Query) {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/apple.json");
        let instance = load_instance(std::path::Path::new(path)).unwrap();
        let base = Query::new([kw("apple")]);
        let (universe, partition) = instance.into_universe(&base).unwrap();
        let cluster = partition.clusters()[0].clone();
        let others = partition.clusters()[1].clone();
        let pool = instance.pool(&base);
        (universe, cluster, others, pool, base)
    }

    #[test]
    fn fmeasure_variant_rejects_job() {
        // F({apple}) = 8/13 on the refinement fixture; adding `job` drops
        // F to 1/3, and no other single keyword helps, so the variant
        // keeps the plain query.
        let (universe, cluster, others, pool, base) = apple_setup();
        let base_f = metrics::evaluate(&universe, &universe.eval(&base), &cluster)
            .unwrap()
            .f_measure;
        assert!((base_f - 8.0 / 13.0).abs() < 1e-12);

        let with_job = base.clone().with_expansion(kw("job"));
        let f_job = metrics::evaluate(&universe, &universe.eval(&with_job), &cluster)
            .unwrap()
            .f_measure;
        assert_eq!(f_job, 1.0 / 3.0);
        assert!((f_job - base_f - (-0.282)).abs() < 1e-3);

        let out = refine_fmeasure(&universe, &base, &cluster, &others, &pool, None);
        assert_eq!(out.query, base);
        assert_eq!(out.f, base_f);
        assert!(out.moves.is_empty());
    }

    #[test]
    fn fmeasure_variant_takes_pure_precision_wins() {
        // One keyword eliminates only noise: precision rises, recall is
        // untouched, so the move is accepted.
        let instance: crate::instance::InstanceFile = serde_json::from_str(
            r#"{
                "cluster": ["R1", "R2"],
                "others": ["O1", "O2"],
                "eliminates": {"clean": ["O1", "O2"]}
            }"#,
        )
        .unwrap();
        let base = Query::new([kw("q")]);
        let (universe, partition) = instance.into_universe(&base).unwrap();
        let cluster = partition.clusters()[0].clone();
        let others = partition.clusters()[1].clone();
        let out = refine_fmeasure(&universe, &base, &cluster, &others, &[kw("clean")], None);
        assert_eq!(out.query, base.clone().with_expansion(kw("clean")));
        assert_eq!(out.f, 1.0);
        assert!(out.f >= metrics::evaluate(&universe, &universe.eval(&base), &cluster).unwrap().f_measure);
    }

    #[test]
    fn fmeasure_variant_empty_pool() {
        let (universe, cluster, others, _, base) = apple_setup();
        let out = refine_fmeasure(&universe, &base, &cluster, &others, &[], None);
        assert_eq!(out.query, base);
    }

    #[test]
    fn word_score_formula() {
        // 4 results, `rare` in exactly one with tf 2 and rank 1.0:
        // score = 2 * ln 4.
        let documents = vec![
            Document::text("d0", "q rare rare", 1.0),
            Document::text("d1", "q x", 1.0),
            Document::text("d2", "q y", 1.0),
            Document::text("d3", "q z", 1.0),
        ];
        let base = Query::new([kw("q")]);
        let universe = ResultUniverse::build(&documents, &base, Ranking::Uniform).unwrap();
        let scores = word_scores(&universe);
        let rare = scores.iter().find(|w| w.keyword == kw("rare")).unwrap();
        assert!((rare.score - 2.0 * 4.0f64.ln()).abs() < 1e-12);
        assert!((rare.score - 2.772).abs() < 1e-3);
    }

    #[test]
    fn data_clouds_boundaries() {
        let documents = vec![
            Document::text("d0", "q alpha", 1.0),
            Document::text("d1", "q beta", 1.0),
        ];
        let base = Query::new([kw("q")]);
        let universe = ResultUniverse::build(&documents, &base, Ranking::Uniform).unwrap();
        let queries = data_clouds(&universe, &base, 10);
        assert_eq!(queries.len(), 2); // capped by the vocabulary
        for q in &queries {
            assert!(q.original().contains(&kw("q")));
            assert!(!q.expansion().contains(&kw("q")));
            assert_eq!(q.expansion().len(), 1);
        }
    }

    #[test]
    #[should_panic(expected = "at least 1")]
    fn data_clouds_rejects_zero() {
        let documents = vec![Document::text("d0", "q alpha", 1.0)];
        let base = Query::new([kw("q")]);
        let universe = ResultUniverse::build(&documents, &base, Ranking::Uniform).unwrap();
        data_clouds(&universe, &base, 0);
    }

    #[test]
    fn cs_label_scores() {
        // `everywhere` appears in all clusters (icf 0); `marker` only in
        // the first cluster with tf 3 over k = 3 clusters: 3 * ln 3.
        let documents = vec![
            Document::text("d0", "q marker marker marker everywhere", 1.0),
            Document::text("d1", "q everywhere left", 1.0),
            Document::text("d2", "q everywhere right", 1.0),
        ];
        let base = Query::new([kw("q")]);
        let universe = ResultUniverse::build(&documents, &base, Ranking::Uniform).unwrap();
        let partition = ClusterPartition::new(
            vec![
                ResultSet::from_indices(3, [0]),
                ResultSet::from_indices(3, [1]),
                ResultSet::from_indices(3, [2]),
            ],
            3,
        )
        .unwrap();
        let queries = cs_labels(&universe, &partition, &base, 1);
        assert_eq!(queries.len(), 3);
        assert_eq!(
            queries[0].expansion().iter().cloned().collect::<Vec<_>>(),
            vec![kw("marker")]
        );
        // The winning score is tf * ln(k / cf) = 3 * ln 3.
        assert!((3.0 * 3.0f64.ln() - 3.296).abs() < 1e-3);
        // No query ever re-emits the user's keywords.
        for q in &queries {
            assert!(!q.expansion().contains(&kw("q")));
        }
    }

    #[test]
    fn cs_labels_default_length() {
        let documents = vec![
            Document::text("d0", "q a b c d", 1.0),
            Document::text("d1", "q e f g h", 1.0),
        ];
        let base = Query::new([kw("q")]);
        let universe = ResultUniverse::build(&documents, &base, Ranking::Uniform).unwrap();
        let partition = ClusterPartition::new(
            vec![ResultSet::from_indices(2, [0]), ResultSet::from_indices(2, [1])],
            2,
        )
        .unwrap();
        let queries = cs_labels(&universe, &partition, &base, 3);
        assert!(queries.iter().all(|q| q.expansion().len() == 3));
    }
}
