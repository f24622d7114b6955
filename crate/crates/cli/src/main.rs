//! `seismic`: build, query and evaluate sparse retrieval indexes.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Deserialize;

use seismic_core::analysis::{self, ip_preservation_with_neighbours, l1_concentration};
use seismic_core::eval::{self, SweepOptions};
use seismic_core::index::{load_index, save_index, INDEX_MAGIC};
use seismic_core::io::{self as sio, ResultSet, COLLECTION_MAGIC};
use seismic_core::synthetic::{Clustered, ClusteredShape, HeavyTailed};
use seismic_core::{
    BlockingStrategy, BuildParams, Collection, InvertedIndex, Precision, Quantization,
    SearchParams, SummaryStrategy,
};

const EXIT_VALIDATION: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "seismic",
    version,
    about = "Approximate top-k retrieval over learned sparse embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert JSONL vectors into a collection file.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        dim: u32,
        /// Accept negative values (query vectors).
        #[arg(long)]
        queries: bool,
    },
    /// Build an index from a collection file.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 6000)]
        lambda: usize,
        #[arg(long, default_value_t = 400)]
        beta: usize,
        #[arg(long, default_value_t = 0.4)]
        alpha: f64,
        /// `geometric` or `fixed:<block size>`.
        #[arg(long, default_value = "geometric")]
        blocking: BlockingStrategy,
        /// `alpha-mass` or `fixed:<entries>`.
        #[arg(long, default_value = "alpha-mass")]
        summary: SummaryStrategy,
        /// `u8` or `none`.
        #[arg(long, default_value = "u8")]
        quantize: Quantization,
        /// `full` or `half`.
        #[arg(long, default_value = "full")]
        precision: Precision,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Build threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Search an index; writes a results file.
    Search {
        #[arg(long)]
        index: PathBuf,
        /// Collection file or JSONL.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        cut: usize,
        #[arg(long = "heap-factor", default_value_t = 0.9)]
        heap_factor: f32,
    },
    /// Exhaustive search; writes a ground-truth file.
    Exact {
        #[arg(long)]
        collection: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Accuracy of a results file against ground truth.
    Evaluate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long = "ground-truth")]
        ground_truth: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Concentration-of-importance tables as CSV.
    Analyze {
        #[arg(long, value_enum)]
        mode: AnalyzeMode,
        /// Vectors measured by `l1`; documents searched by `ip`.
        #[arg(long)]
        collection: PathBuf,
        /// Required by `ip`.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(
            long = "top-counts",
            value_delimiter = ',',
            default_value = "1,2,5,10,20,50,100"
        )]
        top_counts: Vec<usize>,
        #[arg(long = "q-keep", value_delimiter = ',', default_value = "5,9,12")]
        q_keep: Vec<usize>,
        #[arg(long = "d-keep", value_delimiter = ',', default_value = "10,20,25")]
        d_keep: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time a grid of search configurations.
    Sweep {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long = "ground-truth")]
        ground_truth: PathBuf,
        /// TOML with `k`, `cut` and `heap_factor` lists.
        #[arg(long)]
        grid: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Run configurations concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Describe an index or collection file.
    Info { path: PathBuf },
    /// Write a synthetic collection and matching queries.
    Generate {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        docs: usize,
        #[arg(long, default_value_t = 100)]
        queries: usize,
        #[arg(long)]
        output: PathBuf,
        #[arg(long = "queries-output")]
        queries_output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyzeMode {
    L1,
    Ip,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    HeavyTailed,
    Clustered,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default = "default_cuts")]
    cut: Vec<usize>,
    #[serde(default = "default_heap_factors")]
    heap_factor: Vec<f32>,
}

fn default_k() -> usize {
    10
}

fn default_cuts() -> Vec<usize> {
    (1..=10).collect()
}

fn default_heap_factors() -> Vec<f32> {
    vec![0.7, 0.8, 0.9, 1.0]
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<seismic_core::Error>() {
            return if err.is_io() {
                EXIT_IO
            } else {
                EXIT_VALIDATION
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Ingest {
            input,
            output,
            dim,
            queries,
        } => {
            let source = BufReader::new(open(&input)?);
            let collection = if queries {
                sio::ingest_jsonl_queries(source, dim)
            } else {
                sio::ingest_jsonl(source, dim)
            }
            .with_context(|| format!("ingesting {}", input.display()))?;
            let bytes = sio::save_collection(&collection, &output)
                .with_context(|| format!("writing {}", output.display()))?;
            println!("vectors: {}", collection.len());
            println!("nnz: {}", collection.nnz());
            println!("bytes: {bytes}");
        }
        Command::Build {
            input,
            output,
            lambda,
            beta,
            alpha,
            blocking,
            summary,
            quantize,
            precision,
            seed,
            threads,
        } => {
            let params = BuildParams {
                lambda,
                beta,
                alpha,
                blocking,
                summary,
                quantization: quantize,
                precision,
                seed,
            };
            params.validate()?;
            let collection = load_collection(&input)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()?;
            let started = Instant::now();
            let index = pool.install(|| InvertedIndex::build(&collection, &params))?;
            info!(
                "built {} blocks in {:.1?}",
                index.n_blocks(),
                started.elapsed()
            );
            let bytes = save_index(&index, &output)
                .with_context(|| format!("writing {}", output.display()))?;
            println!("documents: {}", index.n_docs());
            println!("blocks: {}", index.n_blocks());
            println!("bytes: {bytes}");
        }
        Command::Search {
            index,
            queries,
            output,
            k,
            cut,
            heap_factor,
        } => {
            let params = SearchParams::new(k, cut, heap_factor);
            params.validate()?;
            let index = load_index_file(&index)?;
            let queries = load_queries(&queries, index.dim())?;
            let mut searcher = index.searcher();
            let mut results = ResultSet::new();
            let mut scored = 0usize;
            for (i, q) in queries.iter().enumerate() {
                let r = searcher
                    .search(q, &params)
                    .with_context(|| format!("query {i}"))?;
                scored += r.stats.documents_scored;
                results.insert(i as u32, r.hits);
            }
            sio::save_results(&results, &output)
                .with_context(|| format!("writing {}", output.display()))?;
            println!("queries: {}", queries.len());
            println!(
                "documents_scored_mean: {:.1}",
                scored as f64 / queries.len().max(1) as f64
            );
        }
        Command::Exact {
            collection,
            queries,
            output,
            k,
        } => {
            if k == 0 {
                bail!(seismic_core::Error::InvalidParameter(
                    "k must be at least 1".into()
                ));
            }
            let collection = load_collection(&collection)?;
            let queries = load_queries(&queries, collection.dim())?;
            if let Some(bad) = queries
                .iter()
                .enumerate()
                .find(|(_, q)| q.max_coordinate() >= Some(collection.dim()))
            {
                bail!(seismic_core::Error::DimensionMismatch {
                    coordinate: bad.1.max_coordinate().unwrap(),
                    dim: collection.dim(),
                });
            }
            let truth = eval::ground_truth(&collection, &queries, k);
            sio::save_results(&truth, &output)
                .with_context(|| format!("writing {}", output.display()))?;
            println!("queries: {}", queries.len());
        }
        Command::Evaluate {
            results,
            ground_truth,
            k,
        } => {
            let approx = load_results(&results)?;
            let exact = load_results(&ground_truth)?;
            let acc = eval::accuracy(&approx, &exact, k)?;
            println!("queries: {}", approx.len());
            println!("accuracy: {acc:.6}");
        }
        Command::Analyze {
            mode,
            collection,
            queries,
            top_counts,
            q_keep,
            d_keep,
            k,
            output,
        } => {
            let collection = load_collection(&collection)?;
            let out = output_writer(output.as_deref())?;
            match mode {
                AnalyzeMode::L1 => {
                    analysis::write_csv(&l1_concentration(&collection, &top_counts), out)?;
                }
                AnalyzeMode::Ip => {
                    let Some(queries) = queries else {
                        bail!(seismic_core::Error::InvalidParameter(
                            "--mode ip needs --queries".into()
                        ));
                    };
                    if q_keep.len() != d_keep.len() {
                        bail!(seismic_core::Error::InvalidParameter(
                            "--q-keep and --d-keep must have the same length".into()
                        ));
                    }
                    let queries = load_queries(&queries, collection.dim())?;
                    let truth = eval::ground_truth(&collection, &queries, k);
                    let neighbours: Vec<Vec<u32>> = (0..queries.len() as u32)
                        .map(|q| truth.get(q).unwrap_or(&[]).iter().map(|h| h.doc).collect())
                        .collect();
                    let rows: Vec<_> = q_keep
                        .iter()
                        .zip(&d_keep)
                        .map(|(&qk, &dk)| {
                            ip_preservation_with_neighbours(
                                &collection,
                                &queries,
                                &neighbours,
                                qk,
                                dk,
                            )
                        })
                        .collect();
                    analysis::write_csv(&rows, out)?;
                }
            }
        }
        Command::Sweep {
            index,
            queries,
            ground_truth,
            grid,
            output,
            parallel,
        } => {
            let text = std::fs::read_to_string(&grid)
                .with_context(|| format!("reading {}", grid.display()))?;
            let spec: GridSpec = toml::from_str(&text).map_err(|e| {
                seismic_core::Error::InvalidParameter(format!("grid {}: {e}", grid.display()))
            })?;
            let configs: Vec<SearchParams> = spec
                .cut
                .iter()
                .flat_map(|&c| {
                    spec.heap_factor
                        .iter()
                        .map(move |&h| SearchParams::new(spec.k, c, h))
                })
                .collect();
            let index = load_index_file(&index)?;
            let queries = load_queries(&queries, index.dim())?;
            let exact = load_results(&ground_truth)?;
            let rows = eval::latency_sweep(
                &index,
                &queries,
                &exact,
                &configs,
                SweepOptions { parallel },
            )?;
            eval::write_sweep_csv(&rows, output_writer(output.as_deref())?)?;
        }
        Command::Info { path } => info_command(&path)?,
        Command::Generate {
            kind,
            docs,
            queries,
            output,
            queries_output,
            seed,
        } => {
            let (d, q) = match kind {
                Kind::HeavyTailed => {
                    let shape = HeavyTailed::default();
                    (
                        shape.generate(docs, seed),
                        HeavyTailed {
                            mean_nnz: 20,
                            ..shape
                        }
                        .generate(queries, seed.wrapping_add(1)),
                    )
                }
                Kind::Clustered => {
                    let model = Clustered::new(ClusteredShape::default(), seed);
                    (
                        model.documents(docs, seed.wrapping_add(1)),
                        model.queries(queries, seed.wrapping_add(2)),
                    )
                }
            };
            sio::save_collection(&d, &output)
                .with_context(|| format!("writing {}", output.display()))?;
            sio::save_collection(&q, &queries_output)
                .with_context(|| format!("writing {}", queries_output.display()))?;
            println!("documents: {}", d.len());
            println!("queries: {}", q.len());
        }
    }
    Ok(())
}

fn info_command(path: &Path) -> anyhow::Result<()> {
    let magic = read_magic(path)?;
    if magic == INDEX_MAGIC {
        let index = load_index_file(path)?;
        let p = index.params();
        let size = index.size_report();
        println!("kind: index");
        println!("documents: {}", index.n_docs());
        println!("dim: {}", index.dim());
        println!("blocks: {}", index.n_blocks());
        println!("lambda: {}", p.lambda);
        println!("beta: {}", p.beta);
        println!("alpha: {}", p.alpha);
        println!("blocking: {}", p.blocking);
        println!("summary: {}", p.summary);
        println!("quantize: {}", p.quantization);
        println!("precision: {}", p.precision);
        println!("seed: {}", p.seed);
        println!("bytes.header: {}", size.header);
        println!("bytes.postings: {}", size.postings);
        println!("bytes.summaries: {}", size.summaries());
        println!("bytes.summary_coordinates: {}", size.summary_coordinates);
        println!("bytes.summary_values: {}", size.summary_values);
        println!("bytes.summary_overhead: {}", size.summary_overhead);
        println!("bytes.forward: {}", size.forward);
        println!("bytes.total: {}", size.total);
    } else if magic == COLLECTION_MAGIC {
        let c = load_collection(path)?;
        println!("kind: collection");
        println!("count: {}", c.len());
        println!("dim: {}", c.dim());
        println!("nnz: {}", c.nnz());
    } else {
        bail!(seismic_core::Error::BadMagic {
            expected: INDEX_MAGIC,
            found: magic,
        });
    }
    Ok(())
}

fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn read_magic(path: &Path) -> anyhow::Result<[u8; 4]> {
    let mut magic = [0u8; 4];
    let mut file = open(path)?;
    let mut filled = 0;
    while filled < 4 {
        let n = file.read(&mut magic[filled..])?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    Ok(magic)
}

fn load_collection(path: &Path) -> anyhow::Result<Collection> {
    sio::load_collection(path).with_context(|| format!("reading {}", path.display()))
}

fn load_index_file(path: &Path) -> anyhow::Result<InvertedIndex> {
    load_index(path).with_context(|| format!("reading {}", path.display()))
}

fn load_results(path: &Path) -> anyhow::Result<ResultSet> {
    sio::load_results(path).with_context(|| format!("reading {}", path.display()))
}

/// Queries from a collection file, or from JSONL when the magic is absent.
fn load_queries(path: &Path, dim: u32) -> anyhow::Result<Collection> {
    if read_magic(path)? == COLLECTION_MAGIC {
        return load_collection(path);
    }
    let reader: Box<dyn BufRead> = Box::new(BufReader::new(open(path)?));
    sio::ingest_jsonl_queries(reader, dim).with_context(|| format!("reading {}", path.display()))
}

fn output_writer(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}
