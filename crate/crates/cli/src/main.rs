//! Command-line front end for cluster-guided query expansion.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use clusterq_core::cluster::ClusterPartition;
use clusterq_core::corpus::{CorpusFormat, Keyword, LoadOptions, Query};
use clusterq_core::pebc::TargetMetric;
use clusterq_core::pipeline::{
    bench_csv, bench_scalability, evaluate_queries, parse_query_terms, run_pipeline, Algorithm,
    CorpusSource, PipelineConfig,
};
use clusterq_core::synth::SyntheticCorpusConfig;
use clusterq_core::universe::{Ranking, ResultUniverse};

#[derive(Parser)]
#[command(
    name = "clusterq",
    about = "Cluster a query's results and generate one expanded query per cluster",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: retrieve, cluster, expand, score.
    Run(RunArgs),
    /// Time the pipeline over increasing result counts and emit CSV.
    Bench(BenchArgs),
    /// Exhaustive optimum per cluster (small instances only).
    Oracle(RunArgs),
    /// Score externally supplied queries against a partition.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Structured,
    Instance,
}

#[derive(Clone, Copy, ValueEnum)]
enum RankingArg {
    Uniform,
    #[value(name = "tfidf")]
    TfIdf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Iskr,
    Pebc,
    Fmeasure,
    Dataclouds,
    Cs,
    Oracle,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Iskr => Algorithm::Iskr,
            AlgorithmArg::Pebc => Algorithm::Pebc,
            AlgorithmArg::Fmeasure => Algorithm::Fmeasure,
            AlgorithmArg::Dataclouds => Algorithm::DataClouds,
            AlgorithmArg::Cs => Algorithm::Cs,
            AlgorithmArg::Oracle => Algorithm::Oracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Weighted,
    Count,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Corpus file (JSONL documents or a bare instance).
    #[arg(long)]
    corpus: PathBuf,

    /// Corpus file format.
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,

    /// Query terms; terms with `:` are kept whole as feature keywords,
    /// others are tokenized as text. Repeatable.
    #[arg(long, required = true)]
    query: Vec<String>,

    /// Number of clusters (capped by --max-queries).
    #[arg(long, default_value_t = 3)]
    clusters: usize,

    /// Keep only the top-K ranked results.
    #[arg(long, default_value_t = 30)]
    top_k: usize,

    /// Fraction of distinct non-query keywords kept as candidates.
    #[arg(long, default_value_t = 0.2)]
    fraction: f64,

    /// Cap on emitted expanded queries.
    #[arg(long, default_value_t = 5)]
    max_queries: usize,

    /// Result ranking scheme.
    #[arg(long, value_enum, default_value = "uniform")]
    ranking: RankingArg,

    /// RNG seed for clustering and sampling.
    #[arg(long, env = "CLUSTERQ_SEED", default_value_t = 0)]
    seed: u64,

    /// Segments per convergence iteration.
    #[arg(long, default_value_t = 2)]
    nseg: usize,

    /// Convergence iterations.
    #[arg(long, default_value_t = 3)]
    nit: usize,

    /// How elimination progress is measured.
    #[arg(long, value_enum, default_value = "weighted")]
    target: TargetArg,

    /// Inject an externally produced partition (JSON).
    #[arg(long)]
    partition: Option<PathBuf>,

    /// Expansion-length cap for the exhaustive optimizer.
    #[arg(long, default_value_t = 4)]
    max_len: usize,

    /// Words per cluster-summarization label.
    #[arg(long, default_value_t = 3)]
    label_words: usize,

    /// Comma-separated stopwords dropped at tokenization.
    #[arg(long, value_delimiter = ',')]
    stopwords: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Expansion algorithm.
    #[arg(long, value_enum, default_value = "iskr")]
    algorithm: AlgorithmArg,

    /// Emit the report as JSON instead of text.
    #[arg(long)]
    json: bool,

    /// Attach per-cluster traces to the JSON report.
    #[arg(long)]
    trace: bool,

    /// Write the partition that was used to this file (JSON).
    #[arg(long)]
    dump_partition: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Result counts to benchmark, ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,

    /// Expansion algorithm.
    #[arg(long, value_enum, default_value = "iskr")]
    algorithm: AlgorithmArg,

    /// Optional corpus to truncate per size; defaults to the synthetic
    /// generator.
    #[arg(long)]
    corpus: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,

    /// Query terms (defaults to the synthetic query word).
    #[arg(long)]
    query: Vec<String>,

    #[arg(long, default_value_t = 3)]
    clusters: usize,

    #[arg(long, default_value_t = 0.2)]
    fraction: f64,

    #[arg(long, default_value_t = 5)]
    max_queries: usize,

    #[arg(long, env = "CLUSTERQ_SEED", default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 2)]
    nseg: usize,

    #[arg(long, default_value_t = 3)]
    nit: usize,

    /// Planted clusters in the synthetic corpus.
    #[arg(long, default_value_t = 3)]
    synth_clusters: usize,

    /// Shared noise vocabulary size of the synthetic corpus.
    #[arg(long, default_value_t = 60)]
    synth_noise_vocab: usize,

    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// JSON file with one keyword list per cluster:
    /// [["apple","store"], ...].
    #[arg(long)]
    queries: PathBuf,

    /// Emit the scores as JSON instead of text.
    #[arg(long)]
    json: bool,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args, None),
        Command::Oracle(args) => run(args, Some(Algorithm::Oracle)),
        Command::Bench(args) => bench(args),
        Command::Eval(args) => eval(args),
    };
    if let Err(error) = outcome {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}

fn to_source(corpus: PathBuf, format: FormatArg) -> CorpusSource {
    match format {
        FormatArg::Text => CorpusSource::File {
            path: corpus,
            format: CorpusFormat::JsonlText,
        },
        FormatArg::Structured => CorpusSource::File {
            path: corpus,
            format: CorpusFormat::JsonlStructured,
        },
        FormatArg::Instance => CorpusSource::Instance { path: corpus },
    }
}

fn to_config(common: &CommonArgs, algorithm: Algorithm) -> PipelineConfig {
    let mut config = PipelineConfig::new(
        to_source(common.corpus.clone(), common.format),
        common.query.clone(),
        algorithm,
    );
    config.k_clusters = common.clusters;
    config.top_k = common.top_k;
    config.candidate_fraction = common.fraction;
    config.max_queries = common.max_queries;
    config.ranking = match common.ranking {
        RankingArg::Uniform => Ranking::Uniform,
        RankingArg::TfIdf => Ranking::TfIdfSum,
    };
    config.seed = common.seed;
    config.nseg = common.nseg;
    config.nit = common.nit;
    config.target = match common.target {
        TargetArg::Weighted => TargetMetric::Weighted,
        TargetArg::Count => TargetMetric::Count,
    };
    config.partition = common.partition.clone();
    config.max_len = common.max_len;
    config.label_words = common.label_words;
    config.stopwords = common
        .stopwords
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| Keyword::new(s.trim()))
        .collect();
    config
}

fn run(args: RunArgs, force: Option<Algorithm>) -> anyhow::Result<()> {
    let algorithm = force.unwrap_or_else(|| args.algorithm.into());
    let mut config = to_config(&args.common, algorithm);
    config.trace = args.trace;
    let report = run_pipeline(&config)?;
    if args.json || args.trace {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.render_text());
    }
    Ok(())
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let synth = SyntheticCorpusConfig {
        clusters: args.synth_clusters,
        noise_vocab: args.synth_noise_vocab,
        seed: args.seed,
        ..SyntheticCorpusConfig::default()
    };
    let (source, query) = match &args.corpus {
        Some(path) => {
            if args.query.is_empty() {
                bail!("--query is required when benchmarking a corpus file");
            }
            (to_source(path.clone(), args.format), args.query.clone())
        }
        None => {
            let query = if args.query.is_empty() {
                vec![synth.query_word.clone()]
            } else {
                args.query.clone()
            };
            (CorpusSource::Synthetic(synth), query)
        }
    };

    let mut config = PipelineConfig::new(source, query, args.algorithm.into());
    config.k_clusters = args.clusters;
    config.candidate_fraction = args.fraction;
    config.max_queries = args.max_queries;
    config.seed = args.seed;
    config.nseg = args.nseg;
    config.nit = args.nit;

    let rows = bench_scalability(&config, &args.sizes)?;
    let csv = bench_csv(&rows);
    match &args.out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let config = to_config(&args.common, Algorithm::Iskr);
    let base = parse_query_terms(&config.query)?;

    let (universe, implied) = match &config.source {
        CorpusSource::Instance { path } => {
            let instance = clusterq_core::instance::load_instance(path)?;
            let (universe, partition) = instance.into_universe(&base)?;
            (universe, Some(partition))
        }
        CorpusSource::File { path, format } => {
            let options = LoadOptions {
                stopwords: config.stopwords.clone(),
            };
            let documents = clusterq_core::corpus::load_corpus(path, *format, &options)?;
            (
                ResultUniverse::build(&documents, &base, config.ranking)?,
                None,
            )
        }
        CorpusSource::Synthetic(_) => unreachable!("eval always reads a file"),
    };
    let universe = if config.top_k < universe.len() {
        universe.top_k(config.top_k)
    } else {
        universe
    };

    let partition = match (&config.partition, implied) {
        (Some(path), _) => ClusterPartition::load(path, &universe)?,
        (None, Some(partition)) => partition,
        (None, None) => bail!("--partition is required for document corpora"),
    };

    let term_lists: Vec<Vec<String>> = serde_json::from_str(
        &fs::read_to_string(&args.queries)
            .with_context(|| format!("reading {}", args.queries.display()))?,
    )
    .context("queries file must be a JSON array of keyword arrays")?;
    let queries: Vec<Query> = term_lists
        .iter()
        .map(|terms| parse_query_terms(terms))
        .collect::<Result<_, _>>()?;

    let (clusters, collective) = evaluate_queries(&universe, &partition, &queries)?;
    if args.json {
        let value = serde_json::json!({
            "clusters": clusters,
            "collective_score": collective,
        });
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        for (i, cluster) in clusters.iter().enumerate() {
            println!(
                "q{} [{} results -> {}]: P={:.4} R={:.4} F={:.4}",
                i + 1,
                cluster.cluster_size,
                cluster.result_count,
                cluster.precision.unwrap_or(0.0),
                cluster.recall.unwrap_or(0.0),
                cluster.f_measure.unwrap_or(0.0),
            );
        }
        println!("collective score: {collective:.4}");
    }
    Ok(())
}
