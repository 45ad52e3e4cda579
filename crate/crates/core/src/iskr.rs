//! Iterative single-keyword refinement.
//!
//! Starting from the user query, repeatedly apply the single keyword
//! move (add or remove) with the best benefit/cost value until no move
//! values above 1. For an addition, benefit is the score eliminated from
//! the other clusters `U` and cost the score eliminated from the target
//! cluster `C`; for a removal of an expansion keyword, benefit is the
//! score regained in `C` and cost the score regained in `U`.
//!
//! The candidate table is maintained incrementally. After a move with
//! delta results `D`, an add-direction entry changes iff its keyword is
//! missing from at least one result of `D`, so only those entries are
//! recomputed. Remove-direction entries do not obey that rule: their
//! deltas live outside the retrieved set,  so they are kept exact by
//! intersecting stored deltas on additions and rebuilding them on
//! removals.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bitset::ResultSet;
use crate::corpus::{Keyword, Query};
use crate::error::{Error, Result};
use crate::universe::ResultUniverse;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Add,
    Remove,
}

/// Benefit/cost ratio; +inf when only the cost is zero, 0 when the
/// benefit is zero.
pub fn value(benefit: f64, cost: f64) -> f64 {
    if benefit == 0.0 {
        0.0
    } else if cost == 0.0 {
        f64::INFINITY
    } else {
        benefit / cost
    }
}

/// Compare two benefit/cost ratios without dividing, so integer-weight
/// ties stay exact.
pub(crate) fn cmp_value(b1: f64, c1: f64, b2: f64, c2: f64) -> std::cmp::Ordering {
    fn class(b: f64, c: f64) -> u8 {
        if b == 0.0 {
            0 // value 0
        } else if c == 0.0 {
            2 // value +inf
        } else {
            1 // positive finite ratio
        }
    }
    let (k1, k2) = (class(b1, c1), class(b2, c2));
    k1.cmp(&k2)
        .then_with(|| {
            if k1 == 1 && k2 == 1 {
                (b1 * c2).partial_cmp(&(b2 * c1)).unwrap()
            } else {
                std::cmp::Ordering::Equal
            }
        })
}

/// One candidate move in the table.
#[derive(Clone, Debug, PartialEq)]
pub struct KeywordEntry {
    pub keyword: Keyword,
    pub direction: Direction,
    pub benefit: f64,
    pub cost: f64,
}

impl KeywordEntry {
    pub fn value(&self) -> f64 {
        value(self.benefit, self.cost)
    }
}

/// An applied move, as recorded in the trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MoveRecord {
    #[serde(rename = "move")]
    pub direction: Direction,
    pub keyword: Keyword,
    pub benefit: f64,
    pub cost: f64,
    /// `null` in JSON when the value is infinite.
    #[serde(serialize_with = "serialize_value")]
    pub value: f64,
}

fn serialize_value<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// A move together with its delta results (the results whose retrieval
/// status the move changed).
#[derive(Clone, Debug)]
pub struct AppliedMove {
    pub record: MoveRecord,
    pub delta: ResultSet,
}

#[derive(Clone, Debug, Default)]
pub struct RefineConfig {
    /// Hard cap on applied moves; defaults to 4x the pool size.
    pub move_cap: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RefineResult {
    pub query: Query,
    pub moves: Vec<MoveRecord>,
}

/// Results no longer retrieved after adding a keyword, or regained by
/// removing one, computed from scratch.
pub fn delta_results(
    universe: &ResultUniverse,
    query: &Query,
    keyword: &Keyword,
    direction: Direction,
) -> Result<ResultSet> {
    match direction {
        Direction::Add => {
            if query.contains(keyword) {
                return Err(Error::BadMove {
                    keyword: keyword.to_string(),
                    reason: "is already part of the query".into(),
                });
            }
            Ok(universe.eval(query).intersect(&universe.elimination(keyword)))
        }
        Direction::Remove => {
            if !query.expansion().contains(keyword) {
                return Err(Error::BadMove {
                    keyword: keyword.to_string(),
                    reason: "is not an expansion keyword of the query".into(),
                });
            }
            let without = query.without(keyword);
            Ok(universe.eval(&without).difference(&universe.eval(query)))
        }
    }
}

/// Benefit and cost of a move, computed from scratch.
pub fn benefit_cost(
    universe: &ResultUniverse,
    query: &Query,
    keyword: &Keyword,
    direction: Direction,
    cluster: &ResultSet,
    others: &ResultSet,
) -> Result<(f64, f64)> {
    let delta = delta_results(universe, query, keyword, direction)?;
    match direction {
        Direction::Add => Ok((
            universe.score_sum(&delta.intersect(others)),
            universe.score_sum(&delta.intersect(cluster)),
        )),
        Direction::Remove => Ok((
            universe.score_sum(&delta.intersect(cluster)),
            universe.score_sum(&delta.intersect(others)),
        )),
    }
}

/// Pool keywords whose candidate-table entry can change after a move
/// with the given delta: exactly those missing from at least one delta
/// result.
pub fn affected_keywords(
    universe: &ResultUniverse,
    delta: &ResultSet,
    pool: &[Keyword],
) -> Vec<Keyword> {
    if delta.is_empty() {
        return Vec::new();
    }
    pool.iter()
        .filter(|k| universe.elimination(k).intersects(delta))
        .cloned()
        .collect()
}

struct EntryState {
    direction: Direction,
    benefit: f64,
    cost: f64,
    /// Delta results of the removal, kept only for remove entries.
    remove_delta: Option<ResultSet>,
}

/// Incremental refinement state: the current query, its retained results
/// split by cluster, and the candidate table.
pub struct Refiner<'a> {
    universe: &'a ResultUniverse,
    cluster: &'a ResultSet,
    others: &'a ResultSet,
    query: Query,
    retained_c: ResultSet,
    retained_u: ResultSet,
    entries: BTreeMap<Keyword, EntryState>,
    eliminations: BTreeMap<Keyword, ResultSet>,
    moves: Vec<MoveRecord>,
    cap: usize,
}

impl<'a> Refiner<'a> {
    pub fn new(
        universe: &'a ResultUniverse,
        base: &Query,
        cluster: &'a ResultSet,
        others: &'a ResultSet,
        pool: &[Keyword],
        config: &RefineConfig,
    ) -> Self {
        let query = base.clone();
        let retained = universe.eval(&query);
        let retained_c = retained.intersect(cluster);
        let retained_u = retained.intersect(others);

        let mut eliminations = BTreeMap::new();
        for keyword in pool {
            debug_assert!(!query.original().contains(keyword));
            eliminations
                .entry(keyword.clone())
                .or_insert_with(|| universe.elimination(keyword));
        }

        let mut refiner = Refiner {
            universe,
            cluster,
            others,
            query,
            retained_c,
            retained_u,
            entries: BTreeMap::new(),
            eliminations,
            moves: Vec::new(),
            cap: config.move_cap.unwrap_or(4 * pool.len()),
        };
        let keywords: Vec<Keyword> = refiner.eliminations.keys().cloned().collect();
        for keyword in keywords {
            if refiner.query.expansion().contains(&keyword) {
                let delta = refiner.rebuild_remove_delta(&keyword);
                refiner.entries.insert(
                    keyword,
                    EntryState {
                        direction: Direction::Remove,
                        benefit: refiner.universe.score_sum(&delta.intersect(cluster)),
                        cost: refiner.universe.score_sum(&delta.intersect(others)),
                        remove_delta: Some(delta),
                    },
                );
            } else {
                let entry = refiner.add_entry(&keyword);
                refiner.entries.insert(keyword, entry);
            }
        }
        refiner
    }

    fn add_entry(&self, keyword: &Keyword) -> EntryState {
        let elimination = &self.eliminations[keyword];
        EntryState {
            direction: Direction::Add,
            benefit: self.universe.score_sum(&self.retained_u.intersect(elimination)),
            cost: self.universe.score_sum(&self.retained_c.intersect(elimination)),
            remove_delta: None,
        }
    }

    /// R(q \ k) \ R(q) over the full universe.
    fn rebuild_remove_delta(&self, keyword: &Keyword) -> ResultSet {
        let mut regained = self.universe.full_set();
        for other in self.query.expansion() {
            if other == keyword {
                continue;
            }
            match self.universe.postings(other) {
                Some(posting) => regained.intersect_with(posting),
                None => return ResultSet::empty(self.universe.len()),
            }
        }
        regained.intersect(&self.eliminations[keyword])
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn retained(&self) -> (&ResultSet, &ResultSet) {
        (&self.retained_c, &self.retained_u)
    }

    pub fn moves(&self) -> &[MoveRecord] {
        &self.moves
    }

    /// Current table, sorted by keyword.
    pub fn entries(&self) -> Vec<KeywordEntry> {
        self.entries
            .iter()
            .map(|(keyword, state)| KeywordEntry {
                keyword: keyword.clone(),
                direction: state.direction,
                benefit: state.benefit,
                cost: state.cost,
            })
            .collect()
    }

    /// Top-1 entry under (value desc, benefit desc, cost asc, keyword asc).
    pub fn best(&self) -> Option<KeywordEntry> {
        self.entries
            .iter()
            .max_by(|(ka, a), (kb, b)| {
                cmp_value(a.benefit, a.cost, b.benefit, b.cost)
                    .then_with(|| a.benefit.partial_cmp(&b.benefit).unwrap())
                    .then_with(|| b.cost.partial_cmp(&a.cost).unwrap())
                    .then_with(|| kb.cmp(ka))
            })
            .map(|(keyword, state)| KeywordEntry {
                keyword: keyword.clone(),
                direction: state.direction,
                benefit: state.benefit,
                cost: state.cost,
            })
    }

    /// Apply the best move if its value exceeds 1 (benefit > cost).
    pub fn step(&mut self) -> Option<AppliedMove> {
        let best = self.best()?;
        if !(best.benefit > best.cost) {
            return None;
        }
        let delta = match best.direction {
            Direction::Add => self.apply_add(&best.keyword),
            Direction::Remove => self.apply_remove(&best.keyword),
        };
        let record = MoveRecord {
            direction: best.direction,
            keyword: best.keyword,
            benefit: best.benefit,
            cost: best.cost,
            value: value(best.benefit, best.cost),
        };
        self.moves.push(record.clone());
        Some(AppliedMove { record, delta })
    }

    fn apply_add(&mut self, keyword: &Keyword) -> ResultSet {
        let elimination = self.eliminations[keyword].clone();
        let delta_c = self.retained_c.intersect(&elimination);
        let delta_u = self.retained_u.intersect(&elimination);
        let delta = delta_c.union(&delta_u);

        self.retained_c.subtract(&elimination);
        self.retained_u.subtract(&elimination);
        self.query.add_expansion(keyword.clone());

        // The added keyword flips to a removal candidate whose delta is
        // exactly this move's delta.
        self.entries.insert(
            keyword.clone(),
            EntryState {
                direction: Direction::Remove,
                benefit: self.universe.score_sum(&delta_c),
                cost: self.universe.score_sum(&delta_u),
                remove_delta: Some(delta.clone()),
            },
        );

        // Existing removal candidates lose the part of their delta that
        // the new keyword eliminates: D_j(q + k) = D_j(q) & postings(k).
        let posting = elimination.complement();
        let remove_keys: Vec<Keyword> = self
            .entries
            .iter()
            .filter(|(k, s)| s.direction == Direction::Remove && k != &keyword)
            .map(|(k, _)| k.clone())
            .collect();
        for k in remove_keys {
            let state = self.entries.get_mut(&k).unwrap();
            let d = state.remove_delta.as_mut().unwrap();
            d.intersect_with(&posting);
            state.benefit = self.universe.score_sum(&d.intersect(self.cluster));
            state.cost = self.universe.score_sum(&d.intersect(self.others));
        }

        self.refresh_affected_add_entries(&delta);
        delta
    }

    fn apply_remove(&mut self, keyword: &Keyword) -> ResultSet {
        let delta = self.entries[keyword]
            .remove_delta
            .clone()
            .expect("remove entry keeps its delta");
        self.query.remove_expansion(keyword);
        self.retained_c.union_with(&delta.intersect(self.cluster));
        self.retained_u.union_with(&delta.intersect(self.others));

        // Back to an addition candidate, valued against the new state.
        let entry = self.add_entry(keyword);
        self.entries.insert(keyword.clone(), entry);

        // Dropping a keyword can grow the deltas of the other removal
        // candidates in ways the delta-results rule does not cover, so
        // rebuild them exactly.
        let remove_keys: Vec<Keyword> = self
            .entries
            .iter()
            .filter(|(_, s)| s.direction == Direction::Remove)
            .map(|(k, _)| k.clone())
            .collect();
        for k in remove_keys {
            let d = self.rebuild_remove_delta(&k);
            let state = self.entries.get_mut(&k).unwrap();
            state.benefit = self.universe.score_sum(&d.intersect(self.cluster));
            state.cost = self.universe.score_sum(&d.intersect(self.others));
            state.remove_delta = Some(d);
        }

        self.refresh_affected_add_entries(&delta);
        delta
    }

    /// Recompute add-direction entries whose keyword misses at least one
    /// delta result; all others are provably unchanged.
    fn refresh_affected_add_entries(&mut self, delta: &ResultSet) {
        if delta.is_empty() {
            return;
        }
        let affected: Vec<Keyword> = self
            .entries
            .iter()
            .filter(|(k, s)| {
                s.direction == Direction::Add && self.eliminations[*k].intersects(delta)
            })
            .map(|(k, _)| k.clone())
            .collect();
        for k in affected {
            let entry = self.add_entry(&k);
            self.entries.insert(k, entry);
        }
    }

    /// Run to quiescence or the move cap.
    pub fn run(&mut self) -> usize {
        while self.moves.len() < self.cap {
            if self.step().is_none() {
                break;
            }
        }
        self.moves.len()
    }
}

/// Refine the user query against one cluster. Pure in its inputs.
pub fn refine(
    universe: &ResultUniverse,
    base: &Query,
    cluster: &ResultSet,
    others: &ResultSet,
    pool: &[Keyword],
    config: &RefineConfig,
) -> RefineResult {
    let mut refiner = Refiner::new(universe, base, cluster, others, pool, config);
    refiner.run();
    RefineResult {
        query: refiner.query.clone(),
        moves: refiner.moves,
    }
}
