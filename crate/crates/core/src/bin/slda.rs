//! `slda` — generate synthetic supervised-LDA corpora, recover model
//! parameters by the spectral method-of-moments pipelines, and evaluate
//! recovered models on held-out data.
//!
//! Every command writes a JSON run manifest (full configuration, seed,
//! input/output paths, per-stage timings) next to its outputs, and is
//! byte-reproducible given identical inputs and seed.
//!
//! Exit codes: 0 success; 2 usage/configuration error; 10 rank-deficient
//! moments (k too large); 11 negative tensor eigenvalue (no decomposition
//! at this k); 12 file I/O or parse error; 1 anything else.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use slda_spectral::{
    estimate_moments, evaluate, generate_corpus, read_docword, read_model, read_responses,
    recover_joint, recover_two_stage, sample_model, write_docword, write_model, write_responses,
    Corpus, Error, EvalReport, GibbsConfig, Method, RecoveredModel, RecoveryConfig, Result,
    SldaModel, WhiteningKind,
};

#[derive(Parser)]
#[command(
    name = "slda",
    version,
    about = "Spectral method-of-moments recovery for supervised LDA",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a ground-truth model and a synthetic corpus from it
    Generate(GenerateArgs),
    /// Recover model parameters from a corpus with responses
    Recover(RecoverArgs),
    /// Evaluate a model on held-out documents and responses
    Eval(EvalArgs),
    /// Convergence sweep: generate once, recover/evaluate over corpus sizes
    Sweep(SweepArgs),
}

#[derive(Args, Serialize)]
struct GenerateArgs {
    /// Vocabulary size V
    #[arg(long)]
    vocab: usize,
    /// Number of topics k
    #[arg(long)]
    topics: usize,
    /// Number of documents
    #[arg(long)]
    docs: usize,
    /// Words per document (≥ 3)
    #[arg(long = "doc-len")]
    doc_len: usize,
    /// Dirichlet concentration α₀ (spread evenly over topics)
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    /// Response noise standard deviation
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Also write `test-docword.txt`/`test-responses.txt` with this many
    /// held-out documents drawn from the same ground-truth model
    #[arg(long = "test-docs", default_value_t = 0)]
    test_docs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: $SLDA_OUT_DIR or the working directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    TwoStage,
    Joint,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum WhiteningArg {
    Exact,
    Randomized,
}

#[derive(Args, Serialize)]
struct RecoverArgs {
    /// Bag-of-words file (docword format)
    #[arg(long)]
    docword: PathBuf,
    /// Per-document responses, one value per line
    #[arg(long)]
    responses: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Dirichlet concentration α₀ (assumed known)
    #[arg(long)]
    alpha0: f64,
    /// Number of topics k to recover
    #[arg(long)]
    topics: usize,
    /// Assumed response noise (joint method only)
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Word-coordinate scaling constant (joint method only)
    #[arg(long, default_value_t = 100.0)]
    scale: f64,
    #[arg(long, value_enum, default_value_t = WhiteningArg::Exact)]
    whitening: WhiteningArg,
    /// Sketch width multiplier for randomized whitening
    #[arg(long, default_value_t = 10)]
    oversample: usize,
    /// Tensor power method restarts per topic (L)
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    /// Power iteration sweeps (T)
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Relative rank tolerance for whitening
    #[arg(long = "rank-tolerance", default_value_t = 1e-10)]
    rank_tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the estimated word moments to moments.txt
    #[arg(long = "dump-moments", default_value_t = false)]
    dump_moments: bool,
    /// Output directory (default: $SLDA_OUT_DIR or the working directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    /// Model file to evaluate
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "test-docs")]
    test_docs: PathBuf,
    #[arg(long = "test-responses")]
    test_responses: PathBuf,
    /// Ground-truth model; enables parameter-error metrics
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Gibbs burn-in sweeps
    #[arg(long, default_value_t = 200)]
    burnin: usize,
    /// Gibbs retained sweeps
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: $SLDA_OUT_DIR or the working directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    /// Vocabulary size V of the synthetic model
    #[arg(long)]
    vocab: usize,
    /// Number of topics k
    #[arg(long)]
    topics: usize,
    /// Comma-separated training corpus sizes, e.g. 1024,4096,16384
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long = "doc-len")]
    doc_len: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    /// True response noise of the synthetic model (also assumed by joint)
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Methods to sweep
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::TwoStage, MethodArg::Joint])]
    methods: Vec<MethodArg>,
    /// Held-out documents for prediction metrics
    #[arg(long = "test-docs", default_value_t = 500)]
    test_docs: usize,
    #[arg(long, default_value_t = 100.0)]
    scale: f64,
    #[arg(long, value_enum, default_value_t = WhiteningArg::Exact)]
    whitening: WhiteningArg,
    #[arg(long, default_value_t = 10)]
    oversample: usize,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Gibbs burn-in sweeps for evaluation
    #[arg(long, default_value_t = 200)]
    burnin: usize,
    /// Gibbs retained sweeps for evaluation
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: $SLDA_OUT_DIR or the working directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Run manifest: everything needed to reproduce a run and audit its cost.
#[derive(Serialize)]
struct RunManifest {
    tool_version: &'static str,
    command: &'static str,
    config: serde_json::Value,
    seed: u64,
    inputs: BTreeMap<&'static str, String>,
    outputs: BTreeMap<&'static str, String>,
    timings_seconds: BTreeMap<&'static str, f64>,
}

impl RunManifest {
    fn new(command: &'static str, config: impl Serialize, seed: u64) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            config: serde_json::to_value(config).expect("flags serialize"),
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timings_seconds: BTreeMap::new(),
        }
    }

    fn input(&mut self, name: &'static str, path: &Path) {
        self.inputs.insert(name, path.display().to_string());
    }

    fn output(&mut self, name: &'static str, path: &Path) {
        self.outputs.insert(name, path.display().to_string());
    }

    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let value = f();
        self.timings_seconds.insert(stage, start.elapsed().as_secs_f64());
        value
    }

    fn write(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidModel(format!("manifest serialization failed: {e}")))?;
        write_text(path, &(body + "\n"))
    }
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Resolve the output directory: --out flag, else $SLDA_OUT_DIR, else ".".
fn out_dir(flag: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag
        .clone()
        .or_else(|| std::env::var_os("SLDA_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|source| Error::Io { path: dir.clone(), source })?;
    Ok(dir)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidConfig("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| {
                Error::InvalidConfig(format!("could not build a {n}-thread worker pool: {e}"))
            })?;
            Ok(pool.install(f))
        }
    }
}

fn load_corpus(docword: &Path, responses: &Path) -> Result<Corpus> {
    let mut corpus = read_docword(docword)?;
    let y = read_responses(responses, corpus.num_docs())?;
    corpus.attach_responses(&y)?;
    Ok(corpus)
}

fn read_model_reporting(path: &Path) -> Result<SldaModel> {
    let (model, warnings) = read_model(path)?;
    for w in warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(model)
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let dir = out_dir(&args.out)?;
    let mut manifest = RunManifest::new("generate", &args, args.seed);

    let model = manifest.time("sample_model", || {
        sample_model(args.topics, args.vocab, args.alpha0, args.sigma, args.seed)
    })?;
    // Per-document seeds are derived from the document index, so the first
    // `docs` documents are identical whether or not a test split is added.
    let full = manifest.time("generate_corpus", || {
        generate_corpus(&model, args.docs + args.test_docs, args.doc_len, args.seed)
    })?;
    let (corpus, test) = if args.test_docs == 0 {
        (full, None)
    } else {
        let train = Corpus::new(full.documents()[..args.docs].to_vec(), full.vocab_size())?;
        let test = Corpus::new(full.documents()[args.docs..].to_vec(), full.vocab_size())?;
        (train, Some(test))
    };

    let docword = dir.join("docword.txt");
    let responses = dir.join("responses.txt");
    let model_path = dir.join("model.json");
    manifest.time("write", || -> Result<()> {
        write_docword(&corpus, &docword)?;
        write_responses(&corpus, &responses)?;
        write_model(&model, &model_path)
    })?;
    manifest.output("docword", &docword);
    manifest.output("responses", &responses);
    manifest.output("model", &model_path);
    if let Some(test) = &test {
        let test_docword = dir.join("test-docword.txt");
        let test_responses = dir.join("test-responses.txt");
        write_docword(test, &test_docword)?;
        write_responses(test, &test_responses)?;
        manifest.output("test_docword", &test_docword);
        manifest.output("test_responses", &test_responses);
    }

    let manifest_path = dir.join("generate.manifest.json");
    manifest.write(&manifest_path)?;
    let stats = corpus.stats();
    eprintln!(
        "generated {} documents ({} tokens, vocabulary {}) under {}",
        stats.num_docs,
        stats.total_tokens,
        stats.vocab_size,
        dir.display()
    );
    Ok(())
}

fn recovery_config(args: &RecoverArgs) -> RecoveryConfig {
    let mut cfg = RecoveryConfig::new(
        match args.method {
            MethodArg::TwoStage => Method::TwoStage,
            MethodArg::Joint => Method::Joint,
        },
        args.alpha0,
        args.topics,
    );
    cfg.restarts = args.restarts;
    cfg.iters = args.iters;
    cfg.sigma_assumed = args.sigma;
    cfg.scale = args.scale;
    cfg.whitening = match args.whitening {
        WhiteningArg::Exact => WhiteningKind::Exact,
        WhiteningArg::Randomized => WhiteningKind::Randomized { oversample: args.oversample },
    };
    cfg.rank_tol_rel = args.rank_tolerance;
    cfg.seed = args.seed;
    cfg
}

/// Provenance sidecar of a recovered model: configuration + diagnostics.
#[derive(Serialize)]
struct Provenance<'a> {
    config: &'a RecoveryConfig,
    diagnostics: &'a slda_spectral::Diagnostics,
}

fn cmd_recover(args: RecoverArgs) -> Result<()> {
    let dir = out_dir(&args.out)?;
    let mut manifest = RunManifest::new("recover", &args, args.seed);
    manifest.input("docword", &args.docword);
    manifest.input("responses", &args.responses);

    let corpus = manifest.time("read", || load_corpus(&args.docword, &args.responses))?;
    let cfg = recovery_config(&args);

    let start = Instant::now();
    let recovered: RecoveredModel = with_threads(args.threads, || match cfg.method {
        Method::TwoStage => recover_two_stage(&corpus, &cfg),
        Method::Joint => recover_joint(&corpus, &cfg),
    })??;
    manifest.timings_seconds.insert("recover", start.elapsed().as_secs_f64());

    for w in &recovered.diagnostics.warnings {
        eprintln!("warning: {w}");
    }

    let model_path = dir.join("recovered.json");
    let provenance_path = dir.join("recovered.provenance.json");
    manifest.time("write", || -> Result<()> {
        write_model(&recovered.model, &model_path)?;
        let body = serde_json::to_string_pretty(&Provenance {
            config: &recovered.config,
            diagnostics: &recovered.diagnostics,
        })
        .map_err(|e| Error::InvalidModel(format!("provenance serialization failed: {e}")))?;
        write_text(&provenance_path, &(body + "\n"))
    })?;
    manifest.output("model", &model_path);
    manifest.output("provenance", &provenance_path);

    if args.dump_moments {
        let moments = estimate_moments(&corpus, args.alpha0)?;
        let dump_path = dir.join("moments.txt");
        slda_spectral::moments::write_moment_dump(&moments, &dump_path)?;
        manifest.output("moments", &dump_path);
    }

    manifest.write(&dir.join("recover.manifest.json"))?;
    eprintln!(
        "recovered {} topics (sigma_k {:.3e}, tensor residual {:.3e}) into {}",
        recovered.model.k(),
        recovered.diagnostics.sigma_k,
        recovered.diagnostics.tpm_residual,
        model_path.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let dir = out_dir(&args.out)?;
    let mut manifest = RunManifest::new("eval", &args, args.seed);
    manifest.input("model", &args.model);
    manifest.input("test_docs", &args.test_docs);
    manifest.input("test_responses", &args.test_responses);

    let model = read_model_reporting(&args.model)?;
    let truth = match &args.truth {
        Some(path) => {
            manifest.input("truth", path);
            Some(read_model_reporting(path)?)
        }
        None => None,
    };
    let corpus = manifest.time("read", || load_corpus(&args.test_docs, &args.test_responses))?;

    let gibbs = GibbsConfig { burnin: args.burnin, samples: args.samples, seed: args.seed };
    let report: EvalReport = with_threads(args.threads, || {
        evaluate(truth.as_ref(), &model, &corpus, &gibbs)
    })??;

    let text_path = dir.join("eval.txt");
    let csv_path = dir.join("eval.csv");
    manifest.time("write", || -> Result<()> {
        write_text(&text_path, &report.to_text())?;
        let csv = format!("# slda-eval v1\n{}\n{}\n", EvalReport::csv_header(), report.to_csv_row());
        write_text(&csv_path, &csv)
    })?;
    manifest.output("report_text", &text_path);
    manifest.output("report_csv", &csv_path);
    manifest.write(&dir.join("eval.manifest.json"))?;

    print!("{}", report.to_text());
    Ok(())
}

const SWEEP_CSV_COLUMNS: &str =
    "method,num_docs,status,l1_alpha,l1_eta,l1_mu,sigma_abs_err,mse,pr2,neg_perword_ll,error";

fn sweep_row(method: MethodArg, n: usize, outcome: &Result<EvalReport>) -> String {
    let method = match method {
        MethodArg::TwoStage => "two-stage",
        MethodArg::Joint => "joint",
    };
    match outcome {
        Ok(report) => {
            let p = report.params.as_ref().expect("sweep always evaluates against truth");
            format!(
                "{method},{n},ok,{},{},{},{},{},{},{},",
                p.l1_alpha,
                p.l1_eta,
                p.l1_mu,
                p.sigma_abs_err,
                report.mse,
                report.pr2.map(|v| v.to_string()).unwrap_or_default(),
                report.neg_perword_ll,
            )
        }
        Err(e) => format!("{method},{n},failed,,,,,,,,\"{}\"", e.to_string().replace('"', "'")),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    if args.sizes.is_empty() {
        return Err(Error::InvalidConfig("--sizes must list at least one corpus size".into()));
    }
    let dir = out_dir(&args.out)?;
    let mut manifest = RunManifest::new("sweep", &args, args.seed);

    let model = manifest.time("sample_model", || {
        sample_model(args.topics, args.vocab, args.alpha0, args.sigma, args.seed)
    })?;
    let max_n = *args.sizes.iter().max().expect("nonempty");
    // One corpus: training prefixes share documents across ladder steps,
    // and the suffix serves as the held-out split.
    let full = manifest.time("generate_corpus", || {
        generate_corpus(&model, max_n + args.test_docs, args.doc_len, args.seed)
    })?;
    let test = Corpus::new(full.documents()[max_n..].to_vec(), full.vocab_size())?;

    let gibbs = GibbsConfig { burnin: args.burnin, samples: args.samples, seed: args.seed };
    let mut rows = Vec::new();
    let cells: Vec<(MethodArg, usize)> = args
        .methods
        .iter()
        .flat_map(|&m| args.sizes.iter().map(move |&n| (m, n)))
        .collect();

    manifest.time("sweep", || -> Result<()> {
        for &(method_arg, n) in &cells {
            let train = Corpus::new(full.documents()[..n].to_vec(), full.vocab_size())?;
            let mut cfg = RecoveryConfig::new(
                match method_arg {
                    MethodArg::TwoStage => Method::TwoStage,
                    MethodArg::Joint => Method::Joint,
                },
                args.alpha0,
                args.topics,
            );
            cfg.restarts = args.restarts;
            cfg.iters = args.iters;
            cfg.sigma_assumed = args.sigma;
            cfg.scale = args.scale;
            cfg.whitening = match args.whitening {
                WhiteningArg::Exact => WhiteningKind::Exact,
                WhiteningArg::Randomized => {
                    WhiteningKind::Randomized { oversample: args.oversample }
                }
            };
            cfg.seed = args.seed;

            let outcome: Result<EvalReport> = with_threads(args.threads, || {
                let recovered = match cfg.method {
                    Method::TwoStage => recover_two_stage(&train, &cfg),
                    Method::Joint => recover_joint(&train, &cfg),
                }?;
                evaluate(Some(&model), &recovered.model, &test, &gibbs)
            })?;
            if let Err(e) = &outcome {
                eprintln!("sweep cell ({:?}, {n}) failed: {e}", cfg.method);
            }
            rows.push(sweep_row(method_arg, n, &outcome));
        }
        Ok(())
    })?;

    let csv_path = dir.join("sweep.csv");
    let mut csv = format!("# slda-sweep v1\n{SWEEP_CSV_COLUMNS}\n");
    for row in &rows {
        csv.push_str(row);
        csv.push('\n');
    }
    write_text(&csv_path, &csv)?;
    manifest.output("csv", &csv_path);
    manifest.write(&dir.join("sweep.manifest.json"))?;
    eprintln!("sweep complete: {} rows in {}", rows.len(), csv_path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Recover(args) => cmd_recover(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
