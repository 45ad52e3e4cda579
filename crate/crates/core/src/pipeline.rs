//! End-to-end pipeline: ingest, retrieve, truncate, cluster, expand per
//! cluster, score, report. Also the scalability harness.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines;
use crate::bitset::ResultSet;
use crate::cluster::{kmeans, ClusterPartition};
use crate::corpus::{load_corpus, tokenize_text, CorpusFormat, Keyword, LoadOptions, Query};
use crate::error::{Error, Result};
use crate::instance::load_instance;
use crate::iskr::{self, RefineConfig};
use crate::metrics;
use crate::oracle;
use crate::pebc::{self, ConvergeConfig, TargetMetric};
use crate::synth::{synthetic_corpus, SyntheticCorpusConfig};
use crate::universe::{Ranking, ResultUniverse};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Iskr,
    Pebc,
    Fmeasure,
    DataClouds,
    Cs,
    Oracle,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Iskr => "iskr",
            Algorithm::Pebc => "pebc",
            Algorithm::Fmeasure => "fmeasure",
            Algorithm::DataClouds => "dataclouds",
            Algorithm::Cs => "cs",
            Algorithm::Oracle => "oracle",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iskr" => Ok(Algorithm::Iskr),
            "pebc" => Ok(Algorithm::Pebc),
            "fmeasure" => Ok(Algorithm::Fmeasure),
            "dataclouds" => Ok(Algorithm::DataClouds),
            "cs" => Ok(Algorithm::Cs),
            "oracle" => Ok(Algorithm::Oracle),
            other => Err(Error::InvalidConfig(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Where the results come from.
#[derive(Clone, Debug)]
pub enum CorpusSource {
    /// A JSONL corpus of text or structured documents.
    File { path: PathBuf, format: CorpusFormat },
    /// A bare instance file (universe given by elimination sets).
    Instance { path: PathBuf },
    /// The seeded planted-cluster generator.
    Synthetic(SyntheticCorpusConfig),
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub source: CorpusSource,
    /// Raw query terms; terms containing `:` are kept whole as feature
    /// keywords, everything else is tokenized as text.
    pub query: Vec<String>,
    pub algorithm: Algorithm,
    pub k_clusters: usize,
    pub top_k: usize,
    pub candidate_fraction: f64,
    pub max_queries: usize,
    pub ranking: Ranking,
    pub seed: u64,
    pub nseg: usize,
    pub nit: usize,
    pub target: TargetMetric,
    /// Optional externally produced partition to inject.
    pub partition: Option<PathBuf>,
    /// Expansion-length cap for the exhaustive optimizer.
    pub max_len: usize,
    /// Label length for cluster-summarization queries.
    pub label_words: usize,
    pub stopwords: BTreeSet<Keyword>,
    /// Attach per-cluster traces to the report.
    pub trace: bool,
}

impl PipelineConfig {
    pub fn new(source: CorpusSource, query: Vec<String>, algorithm: Algorithm) -> Self {
        PipelineConfig {
            source,
            query,
            algorithm,
            k_clusters: 3,
            top_k: 30,
            candidate_fraction: 0.2,
            max_queries: 5,
            ranking: Ranking::Uniform,
            seed: 0,
            nseg: 2,
            nit: 3,
            target: TargetMetric::Weighted,
            partition: None,
            max_len: 4,
            label_words: 3,
            stopwords: BTreeSet::new(),
            trace: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k_clusters < 1 || self.top_k < 1 || self.max_queries < 1 {
            return Err(Error::InvalidConfig("counts must be positive".into()));
        }
        if !(self.candidate_fraction > 0.0 && self.candidate_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "candidate fraction must be in (0, 1]".into(),
            ));
        }
        if self.nseg < 1 || self.nit < 1 || self.max_len < 1 || self.label_words < 1 {
            return Err(Error::InvalidConfig("counts must be positive".into()));
        }
        Ok(())
    }
}

/// Parse user-facing query terms into a query. A term containing `:` is
/// treated as one feature keyword; other terms are tokenized as text.
pub fn parse_query_terms(terms: &[String]) -> Result<Query> {
    let mut keywords: BTreeSet<Keyword> = BTreeSet::new();
    for term in terms {
        if term.contains(':') {
            keywords.insert(Keyword::new(term));
        } else {
            keywords.extend(tokenize_text(term).into_keys());
        }
    }
    if keywords.is_empty() {
        return Err(Error::EmptyQuery);
    }
    Ok(Query::new(keywords))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    pub algorithm: Algorithm,
    pub query: Vec<String>,
    pub k_clusters: usize,
    pub top_k: usize,
    pub candidate_fraction: f64,
    pub max_queries: usize,
    pub ranking: &'static str,
    pub seed: u64,
    pub nseg: usize,
    pub nit: usize,
    pub target: TargetMetric,
    pub max_len: usize,
    pub label_words: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterReport {
    pub cluster_size: usize,
    pub query: Query,
    pub result_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_measure: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<serde_json::Value>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub clustering_ms: f64,
    pub expansion_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub config: ConfigEcho,
    pub universe_size: usize,
    pub pool_size: usize,
    /// Result ids per cluster of the partition that was expanded; absent
    /// for the cluster-free important-words baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<String>>>,
    pub clusters: Vec<ClusterReport>,
    /// Harmonic mean of the per-cluster F-measures; absent for the
    /// cluster-free important-words baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collective_score: Option<f64>,
    pub timings: Timings,
}

impl ExpansionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON value with the timing fields stripped, for determinism
    /// comparisons.
    pub fn comparable(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("report serializes");
        value.as_object_mut().unwrap().remove("timings");
        value
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "algorithm: {}   query: {}",
            self.config.algorithm.as_str(),
            self.config.query.join(" ")
        );
        let _ = writeln!(
            out,
            "universe: {} results, pool: {} candidate keywords",
            self.universe_size, self.pool_size
        );
        for (i, cluster) in self.clusters.iter().enumerate() {
            let expansion: Vec<String> = cluster
                .query
                .expansion()
                .iter()
                .map(|k| k.as_str().to_string())
                .collect();
            let mut line = format!(
                "  q{} [{} results -> {}]: + {}",
                i + 1,
                cluster.cluster_size,
                cluster.result_count,
                if expansion.is_empty() {
                    "(none)".to_string()
                } else {
                    expansion.join(" ")
                }
            );
            if let (Some(p), Some(r), Some(f)) =
                (cluster.precision, cluster.recall, cluster.f_measure)
            {
                let _ = write!(line, "   P={p:.4} R={r:.4} F={f:.4}");
            }
            let _ = writeln!(out, "{line}");
        }
        if let Some(score) = self.collective_score {
            let _ = writeln!(out, "collective score: {score:.4}");
        }
        let _ = writeln!(
            out,
            "timings: clustering {:.2} ms, expansion {:.2} ms",
            self.timings.clustering_ms, self.timings.expansion_ms
        );
        out
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn load_universe(
    config: &PipelineConfig,
    base: &Query,
) -> Result<(ResultUniverse, Option<ClusterPartition>)> {
    match &config.source {
        CorpusSource::File { path, format } => {
            let options = LoadOptions {
                stopwords: config.stopwords.clone(),
            };
            let documents = load_corpus(path, *format, &options)?;
            let universe = ResultUniverse::build(&documents, base, config.ranking)?;
            Ok((universe, None))
        }
        CorpusSource::Instance { path } => {
            let instance = load_instance(path)?;
            let (universe, partition) = instance.into_universe(base)?;
            Ok((universe, Some(partition)))
        }
        CorpusSource::Synthetic(synth) => {
            let documents = synthetic_corpus(synth);
            let universe = ResultUniverse::build(&documents, base, config.ranking)?;
            Ok((universe, None))
        }
    }
}

/// Run the full pipeline once and assemble the report.
pub fn run_pipeline(config: &PipelineConfig) -> Result<ExpansionReport> {
    config.validate()?;
    let base = parse_query_terms(&config.query)?;
    let (full_universe, implied) = load_universe(config, &base)?;

    let universe = if config.top_k < full_universe.len() {
        full_universe.top_k(config.top_k)
    } else {
        full_universe.clone()
    };

    let clustering_start = Instant::now();
    let partition = match (&config.partition, implied) {
        (Some(path), _) => ClusterPartition::load(path, &universe)?,
        (None, Some(partition)) => {
            if universe.len() == full_universe.len() {
                partition
            } else {
                partition.project(&full_universe, &universe)?
            }
        }
        (None, None) => {
            let k = config.k_clusters.min(config.max_queries);
            kmeans(&universe, k, config.seed)?
        }
    };
    let clustering_ms = clustering_start.elapsed().as_secs_f64() * 1e3;

    let pool = universe.candidate_pool(config.candidate_fraction);
    let expansion_start = Instant::now();
    let clusters = expand_clusters(config, &universe, &partition, &pool, &base)?;
    let expansion_ms = expansion_start.elapsed().as_secs_f64() * 1e3;

    let collective_score = if config.algorithm == Algorithm::DataClouds {
        None
    } else {
        let fs: Vec<f64> = clusters.iter().filter_map(|c| c.f_measure).collect();
        Some(metrics::collective_score(&fs)?)
    };

    Ok(ExpansionReport {
        config: ConfigEcho {
            algorithm: config.algorithm,
            query: base.terms(),
            k_clusters: config.k_clusters,
            top_k: config.top_k,
            candidate_fraction: config.candidate_fraction,
            max_queries: config.max_queries,
            ranking: match config.ranking {
                Ranking::Uniform => "uniform",
                Ranking::TfIdfSum => "tfidf-sum",
            },
            seed: config.seed,
            nseg: config.nseg,
            nit: config.nit,
            target: config.target,
            max_len: config.max_len,
            label_words: config.label_words,
        },
        universe_size: universe.len(),
        pool_size: pool.len(),
        clusters,
        collective_score,
        timings: Timings {
            clustering_ms,
            expansion_ms,
        },
    })
}

fn expand_clusters(
    config: &PipelineConfig,
    universe: &ResultUniverse,
    partition: &ClusterPartition,
    pool: &[Keyword],
    base: &Query,
) -> Result<Vec<ClusterReport>> {
    if config.algorithm == Algorithm::DataClouds {
        // Cluster-free: one query per important word, no ground truth to
        // score against.
        let queries = baselines::data_clouds(universe, base, config.max_queries);
        return Ok(queries
            .into_iter()
            .map(|query| {
                let result_count = universe.eval(&query).count();
                ClusterReport {
                    cluster_size: universe.len(),
                    query,
                    result_count,
                    precision: None,
                    recall: None,
                    f_measure: None,
                    trace: None,
                }
            })
            .collect());
    }

    let selected: Vec<(usize, &ResultSet)> = partition
        .clusters()
        .iter()
        .enumerate()
        .take(config.max_queries)
        .collect();

    if config.algorithm == Algorithm::Cs {
        // Labels need cluster frequencies over the whole partition.
        let queries = baselines::cs_labels(universe, partition, base, config.label_words);
        return selected
            .iter()
            .map(|&(i, cluster)| score_cluster(universe, cluster, queries[i].clone(), None))
            .collect();
    }

    selected
        .par_iter()
        .map(|&(i, cluster)| {
            let others = cluster.complement();
            let (query, trace) = match config.algorithm {
                Algorithm::Iskr => {
                    let out = iskr::refine(
                        universe,
                        base,
                        cluster,
                        &others,
                        pool,
                        &RefineConfig::default(),
                    );
                    let trace = config
                        .trace
                        .then(|| serde_json::to_value(&out.moves).unwrap());
                    (out.query, trace)
                }
                Algorithm::Pebc => {
                    let converge_config = ConvergeConfig {
                        nseg: config.nseg,
                        nit: config.nit,
                        seed: splitmix64(config.seed ^ (i as u64)),
                        target: config.target,
                    };
                    let out = pebc::converge(
                        universe,
                        base,
                        cluster,
                        &others,
                        pool,
                        &converge_config,
                    );
                    let trace = config
                        .trace
                        .then(|| serde_json::to_value(&out.samples).unwrap());
                    (out.query, trace)
                }
                Algorithm::Fmeasure => {
                    let out = baselines::refine_fmeasure(
                        universe, base, cluster, &others, pool, None,
                    );
                    let trace = config
                        .trace
                        .then(|| serde_json::to_value(&out.moves).unwrap());
                    (out.query, trace)
                }
                Algorithm::Oracle => {
                    let out = oracle::brute_force_best(
                        universe,
                        base,
                        cluster,
                        &others,
                        pool,
                        config.max_len,
                    )?;
                    (out.best_query, None)
                }
                Algorithm::DataClouds | Algorithm::Cs => unreachable!("handled above"),
            };
            score_cluster(universe, cluster, query, trace)
        })
        .collect()
}

fn score_cluster(
    universe: &ResultUniverse,
    cluster: &ResultSet,
    query: Query,
    trace: Option<serde_json::Value>,
) -> Result<ClusterReport> {
    let retrieved = universe.eval(&query);
    let eval = metrics::evaluate(universe, &retrieved, cluster)?;
    Ok(ClusterReport {
        cluster_size: cluster.count(),
        query,
        result_count: retrieved.count(),
        precision: Some(eval.precision),
        recall: Some(eval.recall),
        f_measure: Some(eval.f_measure),
        trace,
    })
}

/// Score an externally supplied query set against a partition, one query
/// per cluster in order.
pub fn evaluate_queries(
    universe: &ResultUniverse,
    partition: &ClusterPartition,
    queries: &[Query],
) -> Result<(Vec<ClusterReport>, f64)> {
    if queries.len() != partition.k() {
        return Err(Error::InvalidConfig(format!(
            "{} queries for {} clusters",
            queries.len(),
            partition.k()
        )));
    }
    let clusters: Vec<ClusterReport> = partition
        .clusters()
        .iter()
        .zip(queries)
        .map(|(cluster, query)| score_cluster(universe, cluster, query.clone(), None))
        .collect::<Result<_>>()?;
    let fs: Vec<f64> = clusters.iter().filter_map(|c| c.f_measure).collect();
    let collective = metrics::collective_score(&fs)?;
    Ok((clusters, collective))
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub size: usize,
    pub clustering_ms: f64,
    pub expansion_ms: f64,
}

/// Run the pipeline at each result-count size and collect timings. A
/// synthetic source is regenerated per size; file corpora are truncated
/// to the size via top-k.
pub fn bench_scalability(config: &PipelineConfig, sizes: &[usize]) -> Result<Vec<BenchRow>> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "sizes must be ascending and nonempty".into(),
        ));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut run = config.clone();
        match &mut run.source {
            CorpusSource::Synthetic(synth) => {
                synth.results = size;
                run.top_k = size;
            }
            _ => run.top_k = size,
        }
        let report = run_pipeline(&run)?;
        rows.push(BenchRow {
            size,
            clustering_ms: report.timings.clustering_ms,
            expansion_ms: report.timings.expansion_ms,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("size,clustering_ms,expansion_ms\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{:.3},{:.3}",
            row.size, row.clustering_ms, row.expansion_ms
        );
    }
    out
}
