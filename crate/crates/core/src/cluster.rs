//! Result clustering: k-means over term-frequency vectors with cosine
//! similarity, plus partition import/export so externally produced
//! clusterings can be injected.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::ResultSet;
use crate::corpus::Keyword;
use crate::error::{Error, Result};
use crate::universe::ResultUniverse;

const MAX_ITERATIONS: usize = 100;

/// A term-frequency vector over a result's keywords.
pub type ResultVector = BTreeMap<Keyword, u32>;

/// Cosine similarity of two term-frequency vectors.
pub fn cosine(u: &ResultVector, v: &ResultVector) -> Result<f64> {
    let norm = |x: &ResultVector| -> f64 {
        x.values()
            .map(|&c| f64::from(c) * f64::from(c))
            .sum::<f64>()
            .sqrt()
    };
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = u
        .iter()
        .filter_map(|(k, &c)| v.get(k).map(|&d| f64::from(c) * f64::from(d)))
        .sum();
    Ok(dot / (nu * nv))
}

/// Disjoint nonempty clusters covering the universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterPartition {
    clusters: Vec<ResultSet>,
}

#[derive(Serialize, Deserialize)]
struct PartitionFile {
    clusters: Vec<Vec<String>>,
}

impl ClusterPartition {
    pub fn new(clusters: Vec<ResultSet>, universe_len: usize) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::InvalidPartition("no clusters".into()));
        }
        let mut union = ResultSet::empty(universe_len);
        for (i, cluster) in clusters.iter().enumerate() {
            if cluster.universe_len() != universe_len {
                return Err(Error::InvalidPartition(format!(
                    "cluster {i} ranges over a different universe"
                )));
            }
            if cluster.is_empty() {
                return Err(Error::InvalidPartition(format!("cluster {i} is empty")));
            }
            if union.intersects(cluster) {
                return Err(Error::InvalidPartition(format!(
                    "cluster {i} overlaps an earlier cluster"
                )));
            }
            union.union_with(cluster);
        }
        if union != ResultSet::full(universe_len) {
            return Err(Error::InvalidPartition(
                "clusters do not cover the universe".into(),
            ));
        }
        Ok(ClusterPartition { clusters })
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[ResultSet] {
        &self.clusters
    }

    /// Everything outside one cluster.
    pub fn others(&self, index: usize) -> ResultSet {
        self.clusters[index].complement()
    }

    pub fn to_json(&self, universe: &ResultUniverse) -> String {
        let file = PartitionFile {
            clusters: self
                .clusters
                .iter()
                .map(|c| c.iter().map(|i| universe.id(i).to_string()).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("partition serializes")
    }

    pub fn from_json(data: &str, universe: &ResultUniverse) -> Result<Self> {
        let file: PartitionFile = serde_json::from_str(data)
            .map_err(|e| Error::InvalidPartition(e.to_string()))?;
        let clusters = file
            .clusters
            .iter()
            .map(|ids| universe.indices_for(ids.iter().map(String::as_str)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(clusters, universe.len())
    }

    pub fn load(path: &Path, universe: &ResultUniverse) -> Result<Self> {
        let data = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&data, universe)
    }

    /// Restrict the partition to a truncated universe, dropping clusters
    /// that lost all members.
    pub fn project(&self, from: &ResultUniverse, to: &ResultUniverse) -> Result<Self> {
        let clusters: Vec<ResultSet> = self
            .clusters
            .iter()
            .map(|cluster| {
                let ids = cluster.iter().map(|i| from.id(i));
                ResultSet::from_indices(
                    to.len(),
                    ids.filter_map(|id| to.index_of(id)),
                )
            })
            .filter(|c| !c.is_empty())
            .collect();
        Self::new(clusters, to.len())
    }
}

/// Seeded k-means over normalized term-frequency vectors with cosine
/// distance. Deterministic for a fixed (universe, k, seed); empty
/// clusters are repaired by stealing the point farthest from its
/// centroid.
pub fn kmeans(universe: &ResultUniverse, k: usize, seed: u64) -> Result<ClusterPartition> {
    let (partition, _stats) = kmeans_with_stats(universe, k, seed)?;
    Ok(partition)
}

pub(crate) struct LloydStats {
    /// Mean cosine distance to the assigned centroid after each iteration.
    pub objective: Vec<f64>,
    pub repairs: usize,
}

pub(crate) fn kmeans_with_stats(
    universe: &ResultUniverse,
    k: usize,
    seed: u64,
) -> Result<(ClusterPartition, LloydStats)> {
    let n = universe.len();
    if k < 1 || k > n {
        return Err(Error::ClusterCount { k, n });
    }

    // Unit-normalized points; documents admitted to a universe always
    // have at least one token.
    let points: Vec<BTreeMap<Keyword, f64>> = (0..n)
        .map(|i| {
            let counts = universe.token_counts(i);
            let norm = counts
                .values()
                .map(|&c| f64::from(c) * f64::from(c))
                .sum::<f64>()
                .sqrt();
            counts
                .iter()
                .map(|(kw, &c)| (kw.clone(), f64::from(c) / norm))
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(&points, k, &mut rng);
    let mut assignment: Vec<usize> = vec![usize::MAX; n];
    let mut stats = LloydStats {
        objective: Vec::new(),
        repairs: 0,
    };

    for _ in 0..MAX_ITERATIONS {
        let mut next: Vec<usize> = points
            .iter()
            .map(|p| nearest_centroid(p, &centroids))
            .collect();

        repair_empty_clusters(&points, &centroids, &mut next, k, &mut stats.repairs);

        centroids = (0..k)
            .map(|c| {
                let members: Vec<usize> = (0..n).filter(|&i| next[i] == c).collect();
                mean_direction(&points, &members)
            })
            .collect();

        let objective = (0..n)
            .map(|i| 1.0 - similarity(&points[i], &centroids[next[i]]))
            .sum::<f64>()
            / n as f64;
        stats.objective.push(objective);

        let converged = next == assignment;
        assignment = next;
        if converged {
            break;
        }
    }

    let clusters: Vec<ResultSet> = (0..k)
        .map(|c| ResultSet::from_indices(n, (0..n).filter(|&i| assignment[i] == c)))
        .collect();
    let partition = ClusterPartition::new(clusters, n)?;
    Ok((partition, stats))
}

fn similarity(point: &BTreeMap<Keyword, f64>, centroid: &BTreeMap<Keyword, f64>) -> f64 {
    let dot: f64 = point
        .iter()
        .filter_map(|(kw, &x)| centroid.get(kw).map(|&y| x * y))
        .sum();
    let norm: f64 = centroid.values().map(|&y| y * y).sum::<f64>().sqrt();
    if norm == 0.0 {
        0.0
    } else {
        dot / norm
    }
}

fn nearest_centroid(point: &BTreeMap<Keyword, f64>, centroids: &[BTreeMap<Keyword, f64>]) -> usize {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let sim = similarity(point, centroid);
        if sim > best_sim {
            best_sim = sim;
            best = c;
        }
    }
    best
}

fn mean_direction(points: &[BTreeMap<Keyword, f64>], members: &[usize]) -> BTreeMap<Keyword, f64> {
    let mut sum: BTreeMap<Keyword, f64> = BTreeMap::new();
    for &i in members {
        for (kw, &x) in &points[i] {
            *sum.entry(kw.clone()).or_insert(0.0) += x;
        }
    }
    sum
}

/// k-means++ style seeding: first centroid uniform, the rest sampled with
/// probability proportional to squared cosine distance from the nearest
/// chosen centroid.
fn seed_centroids(
    points: &[BTreeMap<Keyword, f64>],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<BTreeMap<Keyword, f64>> {
    let n = points.len();
    let mut chosen: Vec<usize> = vec![rng.gen_range(0..n)];
    while chosen.len() < k {
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                if chosen.contains(&i) {
                    return 0.0;
                }
                let d = chosen
                    .iter()
                    .map(|&c| 1.0 - similarity(&points[i], &points[c]))
                    .fold(f64::INFINITY, f64::min);
                d * d
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                target -= w;
                if target <= 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| (0..n).rev().find(|i| weights[*i] > 0.0).unwrap())
        } else {
            // All remaining points coincide with a centroid; take the
            // first index not chosen yet.
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(pick);
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn repair_empty_clusters(
    points: &[BTreeMap<Keyword, f64>],
    centroids: &[BTreeMap<Keyword, f64>],
    assignment: &mut [usize],
    k: usize,
    repairs: &mut usize,
) {
    for empty in 0..k {
        if assignment.iter().any(|&a| a == empty) {
            continue;
        }
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        // Farthest point from its centroid among clusters that can spare
        // one; ties go to the smallest index.
        let victim = assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| counts[a] > 1)
            .map(|(i, &a)| (i, 1.0 - similarity(&points[i], &centroids[a])))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(i, _)| i);
        if let Some(i) = victim {
            assignment[i] = empty;
            *repairs += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Query};
    use crate::universe::Ranking;

    fn kw(s: &str) -> Keyword {
        Keyword::new(s)
    }

    fn universe_from(texts: &[&str]) -> ResultUniverse {
        let documents: Vec<Document> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::text(format!("d{i}"), &format!("q {t}"), 1.0))
            .collect();
        ResultUniverse::build(&documents, &Query::new([kw("q")]), Ranking::Uniform).unwrap()
    }

    #[test]
    fn cosine_identity_and_orthogonality() {
        let u: ResultVector = [(kw("a"), 2), (kw("b"), 1)].into_iter().collect();
        let v: ResultVector = [(kw("c"), 3)].into_iter().collect();
        assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&u, &v).unwrap(), 0.0);
    }

    #[test]
    fn cosine_half_overlap() {
        let u: ResultVector = [(kw("a"), 1), (kw("b"), 1)].into_iter().collect();
        let v: ResultVector = [(kw("a"), 1), (kw("c"), 1)].into_iter().collect();
        assert!((cosine(&u, &v).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cosine_zero_vector_is_an_error() {
        let u: ResultVector = BTreeMap::new();
        let v: ResultVector = [(kw("a"), 1)].into_iter().collect();
        assert!(matches!(cosine(&u, &v), Err(Error::ZeroVector)));
    }

    #[test]
    fn single_cluster_is_the_universe() {
        let universe = universe_from(&["x", "y", "z"]);
        let partition = kmeans(&universe, 1, 0).unwrap();
        assert_eq!(partition.k(), 1);
        assert_eq!(partition.clusters()[0], universe.full_set());
    }

    #[test]
    fn duplicate_groups_split_exactly() {
        let universe = universe_from(&[
            "red red wine",
            "red red wine",
            "blue sky high",
            "blue sky high",
        ]);
        let partition = kmeans(&universe, 2, 3).unwrap();
        let groups: Vec<Vec<usize>> = partition
            .clusters()
            .iter()
            .map(|c| c.iter().collect())
            .collect();
        assert!(groups.contains(&vec![0, 1]));
        assert!(groups.contains(&vec![2, 3]));
    }

    #[test]
    fn kmeans_is_deterministic_per_seed() {
        let universe = universe_from(&["a b", "a c", "d e", "d f", "g h"]);
        let first = kmeans(&universe, 3, 42).unwrap();
        let second = kmeans(&universe, 3, 42).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn k_out_of_range() {
        let universe = universe_from(&["a", "b"]);
        assert!(matches!(
            kmeans(&universe, 0, 0),
            Err(Error::ClusterCount { .. })
        ));
        assert!(matches!(
            kmeans(&universe, 3, 0),
            Err(Error::ClusterCount { .. })
        ));
    }

    #[test]
    fn objective_non_increasing_without_repairs() {
        use rand::{Rng, SeedableRng};
        let mut checked = 0;
        for seed in 0..30u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xbeef);
            let texts: Vec<String> = (0..10)
                .map(|_| {
                    let vocab = ["ant", "bee", "cat", "dog", "elk", "fox"];
                    let mut t = String::new();
                    for w in vocab {
                        if rng.gen_bool(0.5) {
                            t.push(' ');
                            t.push_str(w);
                        }
                    }
                    if t.is_empty() {
                        t.push_str("ant");
                    }
                    t
                })
                .collect();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let universe = universe_from(&refs);
            let (_, stats) = kmeans_with_stats(&universe, 3, seed).unwrap();
            if stats.repairs > 0 {
                continue;
            }
            checked += 1;
            for pair in stats.objective.windows(2) {
                assert!(
                    pair[1] <= pair[0] + 1e-9,
                    "objective increased: {:?}",
                    stats.objective
                );
            }
        }
        assert!(checked > 0, "no repair-free runs to check");
    }

    #[test]
    fn partition_validation() {
        let a = ResultSet::from_indices(4, [0, 1]);
        let b = ResultSet::from_indices(4, [2, 3]);
        assert!(ClusterPartition::new(vec![a.clone(), b.clone()], 4).is_ok());
        assert!(ClusterPartition::new(vec![a.clone()], 4).is_err()); // no cover
        assert!(ClusterPartition::new(vec![a.clone(), a.clone()], 4).is_err()); // overlap
        assert!(ClusterPartition::new(vec![], 4).is_err());
        let empty = ResultSet::empty(4);
        assert!(ClusterPartition::new(vec![a, b, empty], 4).is_err());
    }

    #[test]
    fn partition_json_round_trip() {
        let universe = universe_from(&["x", "y", "z"]);
        let partition = ClusterPartition::new(
            vec![
                ResultSet::from_indices(3, [0, 2]),
                ResultSet::from_indices(3, [1]),
            ],
            3,
        )
        .unwrap();
        let json = partition.to_json(&universe);
        let back = ClusterPartition::from_json(&json, &universe).unwrap();
        assert_eq!(back, partition);
    }

    #[test]
    fn partition_rejects_foreign_ids() {
        let universe = universe_from(&["x", "y"]);
        let err = ClusterPartition::from_json(
            r#"{"clusters": [["d0"], ["nope"]]}"#,
            &universe,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidPartition(_)));
    }
}
