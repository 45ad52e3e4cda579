//! Partial elimination based convergence.
//!
//! Sample queries are built to eliminate roughly x% of the other
//! clusters' score while keeping the target cluster intact, for a grid
//! of x values. The pair of adjacent samples with the best average
//! F-measure picks the interval to zoom into; after a fixed number of
//! iterations the best sample ever seen wins.
//!
//! A sample query grows one keyword at a time: pick a random
//! not-yet-eliminated result of `U`, then among the pool keywords able
//! to eliminate it take the one with the best benefit/cost ratio against
//! the current un-eliminated sets (ties prefer the keyword eliminating
//! fewer `U` results, then lexicographic order). Once the target is
//! crossed, the last keyword is kept or dropped depending on which side
//! lands closer to x%.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::bitset::ResultSet;
use crate::corpus::{Keyword, Query};
use crate::error::{Error, Result};
use crate::metrics;
use crate::universe::ResultUniverse;

/// How elimination progress is measured against the x% target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMetric {
    /// Ranking-score mass (the default).
    Weighted,
    /// Plain result counts.
    Count,
}

#[derive(Clone, Debug)]
pub struct ConvergeConfig {
    /// Segments per iteration; each iteration evaluates `nseg + 1` points.
    pub nseg: usize,
    pub nit: usize,
    pub seed: u64,
    pub target: TargetMetric,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            nseg: 2,
            nit: 3,
            seed: 0,
            target: TargetMetric::Weighted,
        }
    }
}

/// Supplies the random "next result to eliminate" choice, so tests can
/// script the walk.
pub trait ResultPicker {
    /// Pick one element of `candidates` (ascending universe indices,
    /// nonempty).
    fn pick(&mut self, candidates: &[usize]) -> usize;
}

pub struct RngPicker<R: RngCore>(pub R);

impl<R: RngCore> ResultPicker for RngPicker<R> {
    fn pick(&mut self, candidates: &[usize]) -> usize {
        candidates[self.0.gen_range(0..candidates.len())]
    }
}

/// Replays a fixed pick sequence; panics if a scripted pick is not
/// available, which fails the test that scripted it.
pub struct ScriptedPicker {
    picks: std::collections::VecDeque<usize>,
}

impl ScriptedPicker {
    pub fn new<I: IntoIterator<Item = usize>>(picks: I) -> Self {
        ScriptedPicker {
            picks: picks.into_iter().collect(),
        }
    }
}

impl ResultPicker for ScriptedPicker {
    fn pick(&mut self, candidates: &[usize]) -> usize {
        let next = self.picks.pop_front().expect("scripted picks exhausted");
        assert!(
            candidates.contains(&next),
            "scripted pick {next} not among candidates {candidates:?}"
        );
        next
    }
}

/// One keyword selection during partial elimination.
#[derive(Clone, Debug, Serialize)]
pub struct EliminationStep {
    pub picked: usize,
    pub keyword: Keyword,
    pub benefit: f64,
    pub cost: f64,
    /// Eliminated `U`-mass after applying this keyword.
    pub eliminated_after: f64,
}

#[derive(Clone, Debug)]
pub struct PartialElimination {
    pub query: Query,
    pub steps: Vec<EliminationStep>,
    /// True when the overshooting last keyword was dropped again.
    pub dropped_last: bool,
}

/// Build a query eliminating as close to x% of `U` as possible while
/// retaining `C`.
pub fn partial_eliminate(
    universe: &ResultUniverse,
    base: &Query,
    cluster: &ResultSet,
    others: &ResultSet,
    pool: &[Keyword],
    x_percent: f64,
    target: TargetMetric,
    picker: &mut dyn ResultPicker,
) -> PartialElimination {
    assert!((0.0..=100.0).contains(&x_percent), "x must be in [0, 100]");
    let weigh = |set: &ResultSet| -> f64 {
        match target {
            TargetMetric::Weighted => universe.score_sum(set),
            TargetMetric::Count => set.count() as f64,
        }
    };

    let eliminations: BTreeMap<&Keyword, ResultSet> = pool
        .iter()
        .map(|k| (k, universe.elimination(k)))
        .collect();

    let total_u = weigh(others);
    let target_mass = total_u * x_percent / 100.0;

    let mut query = base.clone();
    let mut curr_c = cluster.clone();
    let mut curr_u = others.clone();
    let mut blocked = ResultSet::empty(universe.len());
    let mut steps: Vec<EliminationStep> = Vec::new();

    loop {
        let eliminated = total_u - weigh(&curr_u);
        if eliminated >= target_mass {
            break;
        }
        let candidates: Vec<usize> = curr_u.iter().filter(|i| !blocked.contains(*i)).collect();
        if candidates.is_empty() {
            break;
        }
        let picked = picker.pick(&candidates);

        // Keywords that can eliminate the picked result, best
        // benefit/cost first; ties prefer fewer eliminated U results,
        // then the lexicographically smaller keyword.
        let mut best: Option<(&Keyword, f64, f64, usize)> = None;
        for keyword in pool {
            if query.contains(keyword) {
                continue;
            }
            let elimination = &eliminations[keyword];
            if !elimination.contains(picked) {
                continue;
            }
            let benefit = weigh(&elimination.intersect(&curr_u));
            let cost = weigh(&elimination.intersect(&curr_c));
            let eliminated_u = elimination.intersect(&curr_u).count();
            let better = match &best {
                None => true,
                Some((bk, bb, bc, bn)) => match crate::iskr::cmp_value(benefit, cost, *bb, *bc) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => (eliminated_u, keyword) < (*bn, *bk),
                },
            };
            if better {
                best = Some((keyword, benefit, cost, eliminated_u));
            }
        }

        match best {
            None => {
                // No available keyword eliminates this result; never pick
                // it again.
                blocked.insert(picked);
            }
            Some((keyword, benefit, cost, _)) => {
                let elimination = &eliminations[keyword];
                curr_c.subtract(elimination);
                curr_u.subtract(elimination);
                query.add_expansion(keyword.clone());
                steps.push(EliminationStep {
                    picked,
                    keyword: keyword.clone(),
                    benefit,
                    cost,
                    eliminated_after: total_u - weigh(&curr_u),
                });
            }
        }
    }

    // Keep or drop the overshooting keyword, whichever lands closer to
    // the target; ties drop it (fewer keywords, higher recall).
    let mut dropped_last = false;
    if let Some(last) = steps.last() {
        if last.eliminated_after >= target_mass {
            let before = if steps.len() >= 2 {
                steps[steps.len() - 2].eliminated_after
            } else {
                0.0
            };
            let keep_distance = last.eliminated_after - target_mass;
            let drop_distance = target_mass - before;
            if drop_distance <= keep_distance {
                query.remove_expansion(&last.keyword.clone());
                dropped_last = true;
            }
        }
    }

    PartialElimination {
        query,
        steps,
        dropped_last,
    }
}

/// One evaluated sample query.
#[derive(Clone, Debug, Serialize)]
pub struct SamplePoint {
    pub iteration: usize,
    pub x: f64,
    pub query: Query,
    pub f: f64,
}

/// The adjacent pair with the highest average F-measure; ties take the
/// smaller left endpoint. Samples must be in strictly increasing x.
pub fn pick_zoom_interval(samples: &[SamplePoint]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    debug_assert!(samples.windows(2).all(|w| w[0].x < w[1].x));
    let mut best = 0;
    let mut best_avg = f64::NEG_INFINITY;
    for i in 0..samples.len() - 1 {
        let avg = (samples[i].f + samples[i + 1].f) / 2.0;
        if avg > best_avg {
            best_avg = avg;
            best = i;
        }
    }
    Ok((samples[best].x, samples[best + 1].x))
}

#[derive(Clone, Debug)]
pub struct ConvergeResult {
    pub query: Query,
    pub f: f64,
    /// Every sample ever evaluated, in evaluation order.
    pub samples: Vec<SamplePoint>,
}

fn sample_rng(seed: u64, iteration: u64, x_bits: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&iteration.to_le_bytes());
    bytes[16..24].copy_from_slice(&x_bits.to_le_bytes());
    bytes[24..32].copy_from_slice(&0x5eed_cafe_f00d_u64.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}

/// Zoom toward the best-scoring elimination percentage and return the
/// best sample query observed. Deterministic for a fixed config: each
/// sample draws from its own RNG stream keyed by (seed, iteration, x).
pub fn converge(
    universe: &ResultUniverse,
    base: &Query,
    cluster: &ResultSet,
    others: &ResultSet,
    pool: &[Keyword],
    config: &ConvergeConfig,
) -> ConvergeResult {
    assert!(!cluster.is_empty(), "cluster ground truth must be nonempty");
    assert!(config.nseg >= 1 && config.nit >= 1);

    let mut samples: Vec<SamplePoint> = Vec::new();
    let mut memo: BTreeMap<u64, usize> = BTreeMap::new();
    let (mut left, mut right) = (0.0f64, 100.0f64);

    for iteration in 1..=config.nit {
        let mut indices = Vec::with_capacity(config.nseg + 1);
        for i in 0..=config.nseg {
            let x = if i == config.nseg {
                right
            } else {
                left + (right - left) * i as f64 / config.nseg as f64
            };
            let index = *memo.entry(x.to_bits()).or_insert_with(|| {
                let rng = sample_rng(config.seed, iteration as u64, x.to_bits());
                let elimination = partial_eliminate(
                    universe,
                    base,
                    cluster,
                    others,
                    pool,
                    x,
                    config.target,
                    &mut RngPicker(rng),
                );
                let retrieved = universe.eval(&elimination.query);
                let f = metrics::evaluate(universe, &retrieved, cluster)
                    .expect("cluster is nonempty")
                    .f_measure;
                samples.push(SamplePoint {
                    iteration,
                    x,
                    query: elimination.query,
                    f,
                });
                samples.len() - 1
            });
            indices.push(index);
        }
        let batch: Vec<SamplePoint> = indices.iter().map(|&i| samples[i].clone()).collect();
        let (l, r) = pick_zoom_interval(&batch).expect("nseg >= 1 yields two samples");
        left = l;
        right = r;
    }

    let best = samples
        .iter()
        .max_by(|a, b| {
            a.f.partial_cmp(&b.f)
                .unwrap()
                .then_with(|| b.x.partial_cmp(&a.x).unwrap())
                .then_with(|| {
                    b.query
                        .expansion()
                        .len()
                        .cmp(&a.query.expansion().len())
                })
        })
        .expect("at least one sample");
    ConvergeResult {
        query: best.query.clone(),
        f: best.f,
        samples: samples.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{load_instance, InstanceFile};

    fn kw(s: &str) -> Keyword {
        Keyword::new(s)
    }

    fn elimination_fixture() -> InstanceFile {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/partial.json");
        load_instance(std::path::Path::new(path)).unwrap()
    }

    fn setup() -> (ResultUniverse, ResultSet, ResultSet, Vec<Keyword>, Query) {
        let instance = elimination_fixture();
        let base = Query::new([kw("base")]);
        let (universe, partition) = instance.into_universe(&base).unwrap();
        let cluster = partition.clusters()[0].clone();
        let others = partition.clusters()[1].clone();
        let pool = instance.pool(&base);
        (universe, cluster, others, pool, base)
    }

    #[test]
    fn zero_target_returns_base() {
        let (universe, cluster, others, pool, base) = setup();
        let mut picker = ScriptedPicker::new(std::iter::empty());
        let out = partial_eliminate(
            &universe, &base, &cluster, &others, &pool, 0.0,
            TargetMetric::Weighted, &mut picker,
        );
        assert_eq!(out.query, base);
        assert!(out.steps.is_empty());
    }

    #[test]
    fn scripted_walk_hits_seven_of_ten() {
        let (universe, cluster, others, pool, base) = setup();
        let r5 = universe.index_of("R5").unwrap();
        let r1 = universe.index_of("R1").unwrap();
        let mut picker = ScriptedPicker::new([r5, r1]);
        let out = partial_eliminate(
            &universe, &base, &cluster, &others, &pool, 70.0,
            TargetMetric::Weighted, &mut picker,
        );
        let expansion: Vec<_> = out.query.expansion().iter().cloned().collect();
        assert_eq!(expansion, vec![kw("k1"), kw("k4")]);
        assert!(!out.dropped_last);

        let eliminated = others.difference(&universe.eval(&out.query).intersect(&others));
        let expected: Vec<usize> = (1..=7)
            .map(|i| universe.index_of(&format!("R{i}")).unwrap())
            .collect();
        assert_eq!(eliminated, ResultSet::from_indices(universe.len(), expected));
    }

    #[test]
    fn full_target_eliminates_everything() {
        let (universe, cluster, others, pool, base) = setup();
        for seed in 0..5u64 {
            let mut picker = RngPicker(ChaCha8Rng::seed_from_u64(seed));
            let out = partial_eliminate(
                &universe, &base, &cluster, &others, &pool, 100.0,
                TargetMetric::Weighted, &mut picker,
            );
            let retained_u = universe.eval(&out.query).intersect(&others);
            assert!(retained_u.is_empty(), "seed {seed} left {retained_u:?}");
        }
    }

    #[test]
    fn benefit_cost_match_scratch_recomputation() {
        let (universe, cluster, others, pool, base) = setup();
        let mut picker = RngPicker(ChaCha8Rng::seed_from_u64(11));
        let out = partial_eliminate(
            &universe, &base, &cluster, &others, &pool, 60.0,
            TargetMetric::Weighted, &mut picker,
        );
        // Replay the keyword sequence and recompute each step's benefit
        // and cost against from-scratch current sets.
        let mut q = base.clone();
        for step in &out.steps {
            let retained = universe.eval(&q);
            let curr_u = retained.intersect(&others);
            let curr_c = retained.intersect(&cluster);
            let elimination = universe.elimination(&step.keyword);
            assert_eq!(step.benefit, universe.score_sum(&elimination.intersect(&curr_u)));
            assert_eq!(step.cost, universe.score_sum(&elimination.intersect(&curr_c)));
            q.add_expansion(step.keyword.clone());
        }
    }

    #[test]
    fn keep_drop_lands_closest_to_the_target() {
        use crate::synth::{random_instance, RandomInstanceConfig};
        for seed in 0..80u64 {
            let instance = random_instance(seed, &RandomInstanceConfig::default());
            if instance.others.is_empty() {
                continue;
            }
            let total = instance.universe.score_sum(&instance.others);
            for x in [10.0, 30.0, 50.0, 70.0, 90.0] {
                let mut picker = RngPicker(ChaCha8Rng::seed_from_u64(seed ^ x as u64));
                let out = partial_eliminate(
                    &instance.universe,
                    &instance.base,
                    &instance.cluster,
                    &instance.others,
                    &instance.pool,
                    x,
                    TargetMetric::Weighted,
                    &mut picker,
                );
                let Some(last) = out.steps.last() else { continue };
                let target = total * x / 100.0;
                if last.eliminated_after < target {
                    // Ran out of eliminable results before the target;
                    // nothing to decide.
                    assert!(!out.dropped_last);
                    continue;
                }
                let before = if out.steps.len() >= 2 {
                    out.steps[out.steps.len() - 2].eliminated_after
                } else {
                    0.0
                };
                let achieved = if out.dropped_last { before } else { last.eliminated_after };
                let alternative = if out.dropped_last { last.eliminated_after } else { before };
                assert!(
                    (achieved - target).abs() <= (alternative - target).abs(),
                    "seed {seed} x {x}: kept the farther option"
                );
                // Overshoot is bounded by the last keyword's marginal mass.
                let final_elim = total
                    - instance.universe.score_sum(
                        &instance.universe.eval(&out.query).intersect(&instance.others),
                    );
                assert!(final_elim - target <= last.eliminated_after - before + 1e-9);
            }
        }
    }

    #[test]
    fn zoom_interval_golden() {
        let samples: Vec<SamplePoint> = [(0.0, 0.5), (25.0, 0.6), (50.0, 0.4), (75.0, 0.8), (100.0, 0.1)]
            .iter()
            .map(|&(x, f)| SamplePoint {
                iteration: 1,
                x,
                query: Query::new([kw("q")]),
                f,
            })
            .collect();
        assert_eq!(pick_zoom_interval(&samples).unwrap(), (50.0, 75.0));
    }

    #[test]
    fn zoom_interval_edge_cases() {
        let mk = |x: f64, f: f64| SamplePoint {
            iteration: 1,
            x,
            query: Query::new([kw("q")]),
            f,
        };
        assert!(matches!(
            pick_zoom_interval(&[mk(0.0, 0.4)]),
            Err(Error::TooFewSamples(1))
        ));
        assert_eq!(pick_zoom_interval(&[mk(0.0, 0.4), mk(100.0, 0.2)]).unwrap(), (0.0, 100.0));
        // All-equal averages take the leftmost pair.
        assert_eq!(
            pick_zoom_interval(&[mk(0.0, 0.6), mk(50.0, 0.6), mk(100.0, 0.6)]).unwrap(),
            (0.0, 50.0)
        );
    }

    #[test]
    fn converge_with_empty_others_returns_base() {
        let instance: InstanceFile = serde_json::from_str(
            r#"{"cluster": ["R1", "R2"], "others": [], "eliminates": {"k": ["R1"]}}"#,
        )
        .unwrap();
        let base = Query::new([kw("q")]);
        let (universe, partition) = instance.into_universe(&base).unwrap();
        let cluster = partition.clusters()[0].clone();
        let others = cluster.complement();
        let out = converge(&universe, &base, &cluster, &others, &[kw("k")], &ConvergeConfig::default());
        assert_eq!(out.query, base);
        assert_eq!(out.f, 1.0);
    }

    #[test]
    fn converge_is_deterministic() {
        let (universe, cluster, others, pool, base) = setup();
        let config = ConvergeConfig {
            seed: 9,
            ..ConvergeConfig::default()
        };
        let a = converge(&universe, &base, &cluster, &others, &pool, &config);
        let b = converge(&universe, &base, &cluster, &others, &pool, &config);
        assert_eq!(a.query, b.query);
        assert_eq!(a.f, b.f);
        assert_eq!(a.samples.len(), b.samples.len());
    }

    #[test]
    fn converge_never_beats_its_best_sample() {
        let (universe, cluster, others, pool, base) = setup();
        let out = converge(&universe, &base, &cluster, &others, &pool, &ConvergeConfig::default());
        let max_f = out.samples.iter().map(|s| s.f).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.f, max_f);
        // x = 0 is always sampled, so the base query's F is a floor.
        let base_f = out.samples.iter().find(|s| s.x == 0.0).unwrap().f;
        assert!(out.f >= base_f);
        assert!(out.query.original().contains(&kw("base")));
    }
}
