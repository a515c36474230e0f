use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use task_trickle::engine::{read_labels, Engine, EngineError, InferOptions, OUTPUT_FORMAT_VERSION};
use task_trickle::eval::{evaluate, Corpus, EvalRecord, CORPUS_FORMAT_VERSION};
use task_trickle::index::{IndexError, IndexSummary};
use task_trickle::labels::{DEFAULT_DEDUP_THRESHOLD, DEFAULT_FLOOR};
use task_trickle::testkit::{generate_labels, generate_ontology, labels_for_article, GeneratorConfig, SplitMix64};

const EXIT_INPUT: u8 = 2;
const EXIT_BUILD: u8 = 3;
const EXIT_INFERENCE: u8 = 4;

#[derive(Parser)]
#[command(name = "task-trickle", version, about = "Suggest real-world tasks for a set of scene labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute category embeddings for an ontology and write the index.
    BuildIndex {
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank tasks for one label document.
    Infer {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_FLOOR)]
        floor: f64,
        #[arg(long, default_value_t = DEFAULT_DEDUP_THRESHOLD)]
        dedup: f64,
        #[arg(long, default_value = "all")]
        rank_with: String,
        /// Include trickle diagnostics in the output.
        #[arg(long)]
        explain: bool,
    },
    /// Score a corpus of labelled queries: hit@1, hit@5, MRR.
    Eval {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Write a seeded synthetic ontology, embedding table and label files.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        min_nodes: usize,
        #[arg(long, default_value_t = 50)]
        max_nodes: usize,
        #[arg(long, default_value_t = 4)]
        max_fanout: usize,
        #[arg(long, default_value_t = 6)]
        max_depth: usize,
        #[arg(long, default_value_t = 0)]
        min_articles: usize,
        #[arg(long, default_value_t = 3)]
        max_articles: usize,
        #[arg(long, default_value_t = 8)]
        dimension: usize,
        #[arg(long, default_value_t = 100)]
        vocabulary: usize,
        /// Also write this many single-article queries and a corpus file.
        #[arg(long, default_value_t = 0)]
        queries: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn engine_failure(err: EngineError) -> Failure {
    let code = match &err {
        EngineError::Index {
            source: IndexError::Unusable,
            ..
        } => EXIT_BUILD,
        _ => EXIT_INPUT,
    };
    Failure::new(code, err.to_string())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Failure::new(EXIT_BUILD, e.to_string()))?;
    writeln!(out).map_err(|e| Failure::new(EXIT_BUILD, e.to_string()))
}

#[derive(Serialize)]
struct BuildReport<'a> {
    format_version: u32,
    index: &'a Path,
    dimension: usize,
    #[serde(flatten)]
    summary: IndexSummary,
}

fn build_index_cmd(ontology: &Path, embeddings: &Path, out: &Path) -> Result<(), Failure> {
    let engine = Engine::build_from_files(ontology, embeddings).map_err(engine_failure)?;
    engine
        .save_index(out)
        .map_err(|e| Failure::new(EXIT_BUILD, e.to_string()))?;
    print_json(&BuildReport {
        format_version: OUTPUT_FORMAT_VERSION,
        index: out,
        dimension: engine.index.dimension,
        summary: engine.index.summary(),
    })
}

fn infer_cmd(index: &Path, labels: &Path, options: InferOptions, explain: bool) -> Result<(), Failure> {
    let engine = Engine::open(index).map_err(engine_failure)?;
    let labels = read_labels(labels)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", labels.display())))?;
    let inference = engine
        .infer(&labels, &options)
        .map_err(|e| Failure::new(EXIT_INFERENCE, format!("{}: {e}", e.name())))?;
    print_json(&engine.document(&inference, explain))
}

fn eval_cmd(index: &Path, corpus_path: &Path, k: usize) -> Result<(), Failure> {
    if k == 0 {
        return Err(Failure::new(EXIT_INPUT, "k must be at least 1"));
    }
    let engine = Engine::open(index).map_err(engine_failure)?;
    let file = File::open(corpus_path)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", corpus_path.display())))?;
    let corpus = Corpus::load(BufReader::new(file))
        .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", corpus_path.display())))?;
    let base = corpus_path.parent().unwrap_or(Path::new("."));
    let options = InferOptions {
        k,
        ..InferOptions::default()
    };
    print_json(&evaluate(&engine, &corpus, base, &options))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::new(EXIT_BUILD, format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::new(EXIT_BUILD, e.to_string()))?;
    writeln!(w).map_err(io)
}

#[derive(Serialize)]
struct LabelRecord<'a> {
    text: &'a str,
    confidence: f64,
}

#[derive(Serialize)]
struct LabelDoc<'a> {
    source: Option<&'a str>,
    labels: Vec<LabelRecord<'a>>,
}

fn label_doc(set: &task_trickle::LabelSet) -> LabelDoc<'_> {
    LabelDoc {
        source: set.source.as_deref(),
        labels: set
            .labels()
            .iter()
            .map(|l| LabelRecord {
                text: &l.text,
                confidence: l.confidence,
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct GenReport<'a> {
    format_version: u32,
    out: &'a Path,
    nodes: usize,
    articles: usize,
    vocabulary: usize,
    queries: usize,
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::new(EXIT_BUILD, format!("{}: {e}", path.display()))
}

fn gen_synthetic_cmd(out: &Path, config: GeneratorConfig, queries: usize) -> Result<(), Failure> {
    let synthetic = generate_ontology(&config).map_err(|e| Failure::new(EXIT_INPUT, e.to_string()))?;
    fs::create_dir_all(out).map_err(io(out))?;

    write_json(&out.join("ontology.json"), &synthetic.ontology)?;
    let emb_path = out.join("embeddings.txt");
    let file = File::create(&emb_path).map_err(io(&emb_path))?;
    let mut w = BufWriter::new(file);
    synthetic.store.write(&mut w).map_err(io(&emb_path))?;
    w.flush().map_err(io(&emb_path))?;

    // Label draws use a stream separate from the ontology so adding queries
    // never changes the generated tree.
    let mut rng = SplitMix64::new(config.seed ^ 0x001A_BE15);
    let labels = generate_labels(&mut rng, &synthetic.tokens, 5);
    write_json(&out.join("labels.json"), &label_doc(&labels))?;

    if queries > 0 {
        let qdir = out.join("queries");
        fs::create_dir_all(&qdir).map_err(io(&qdir))?;
        let mut records = Vec::with_capacity(queries);
        for q in 0..queries {
            let article = &synthetic.ontology.articles[rng.below(synthetic.ontology.articles.len())];
            let set = labels_for_article(&mut rng, article);
            let name = format!("q{q:04}.json");
            write_json(&qdir.join(&name), &label_doc(&set))?;
            records.push(EvalRecord {
                labels: Path::new("queries").join(name),
                gold: article.id.clone(),
            });
        }
        write_json(
            &out.join("corpus.json"),
            &Corpus {
                format_version: CORPUS_FORMAT_VERSION,
                records,
            },
        )?;
    }

    print_json(&GenReport {
        format_version: OUTPUT_FORMAT_VERSION,
        out,
        nodes: synthetic.ontology.nodes.len(),
        articles: synthetic.ontology.articles.len(),
        vocabulary: synthetic.store.len(),
        queries,
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::BuildIndex {
            ontology,
            embeddings,
            out,
        } => build_index_cmd(&ontology, &embeddings, &out),
        Command::Infer {
            index,
            labels,
            k,
            floor,
            dedup,
            rank_with,
            explain,
        } => infer_cmd(
            &index,
            &labels,
            InferOptions {
                k,
                floor,
                dedup_threshold: dedup,
                rank_with,
            },
            explain,
        ),
        Command::Eval { index, corpus, k } => eval_cmd(&index, &corpus, k),
        Command::GenSynthetic {
            out,
            seed,
            min_nodes,
            max_nodes,
            max_fanout,
            max_depth,
            min_articles,
            max_articles,
            dimension,
            vocabulary,
            queries,
        } => gen_synthetic_cmd(
            &out,
            GeneratorConfig {
                seed,
                nodes: (min_nodes, max_nodes),
                max_fanout,
                max_depth,
                articles_per_node: (min_articles, max_articles),
                dimension,
                vocabulary,
            },
            queries,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
