//! `liminal`: runs one pipeline stage per invocation against a workspace
//! directory. Exit status 0 on success, 1 on usage errors, 2 on data errors.

use std::collections::HashSet;
use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::Utc;
use clap::{Args, Parser, Subcommand, ValueEnum};

use liminal_core::centrality::{betweenness_with, liminal_nodes, CentralityScores, LiminalReport, PathMetric};
use liminal_core::classifier::{
    classify, evaluate, load_classifications, save_classifications, train, AdjudicationStore, ClassifierModel,
};
use liminal_core::community::{louvain, Partition};
use liminal_core::config::{PipelineConfig, DOCUMENTED_DEFAULTS};
use liminal_core::corpus::{anonymize_account, generate_synthetic, load_corpus, save_corpus, Corpus};
use liminal_core::detection::{campaign_report, disruption_candidates};
use liminal_core::graph::{build_graph, WeightedGraph};
use liminal_core::parallel::Execution;
use liminal_core::snowball::{snowball, SampleSet};
use liminal_core::source::FixtureSource;
use liminal_core::stratagem::{append_to_log, LabelRecord, LabelStore, Stratagem, StratagemLabel};
use liminal_core::workspace::{self as ws, Workspace};

#[derive(Parser, Debug)]
#[command(name = "liminal", version, about = "Echo chambers, liminal accounts and stratagem detection")]
struct Cli {
    /// Workspace directory holding every artifact.
    #[arg(long, global = true, default_value = ".")]
    workspace: PathBuf,
    /// Overrides every stage seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pipeline config (TOML). Defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run the data-parallel kernels on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic corpus with ground-truth labels.
    GenSynthetic {
        #[arg(long)]
        n_tweets: Option<usize>,
        #[arg(long)]
        n_positive: Option<usize>,
        #[arg(long)]
        n_accounts: Option<usize>,
    },
    /// Layered retweeter sampling over the workspace corpus.
    Snowball {
        /// Anonymized seed account (repeatable).
        #[arg(long = "seed-account")]
        seed_accounts: Vec<String>,
        /// Raw platform id, anonymized with the configured salt (repeatable).
        #[arg(long = "raw-seed")]
        raw_seeds: Vec<String>,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        retweeters_per_tweet: Option<usize>,
        #[command(flatten)]
        io: InOut,
    },
    /// Weighted interaction graph from the corpus.
    BuildGraph {
        /// Keep only interactions between accounts of this sample file.
        #[arg(long)]
        sample: Option<PathBuf>,
        #[arg(long)]
        like: Option<f64>,
        #[arg(long)]
        retweet: Option<f64>,
        #[arg(long)]
        follow_or_friend: Option<f64>,
        #[command(flatten)]
        io: InOut,
    },
    /// Louvain communities.
    Communities {
        #[arg(long)]
        resolution: Option<f64>,
        #[arg(long)]
        shuffle_seed: Option<u64>,
        #[command(flatten)]
        io: InOut,
    },
    /// Betweenness centrality and liminal nodes.
    Centrality {
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long)]
        liminal_out: Option<PathBuf>,
        #[arg(long, value_enum)]
        metric: Option<Metric>,
        #[arg(long)]
        top_fraction: Option<f64>,
        #[command(flatten)]
        io: InOut,
    },
    /// Append stratagem labels to the label log.
    Label(LabelArgs),
    /// Train the stratagem classifier on the label log.
    Train {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        input_length: Option<usize>,
    },
    /// Score every tweet and flag those at or above the threshold.
    Classify {
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Confusion counts against a label file, plus adjudication findings.
    Evaluate {
        /// Label log used as ground truth (defaults to the workspace log).
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Campaign and disruption-candidate report.
    Report {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Serve the workspace over HTTP until interrupted.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Inspect configuration.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand, Debug)]
enum ConfigAction {
    /// Print the documented defaults.
    Show,
    /// Print the effective configuration after --config and --seed.
    Effective,
    /// Validate a config file.
    Check { file: PathBuf },
}

#[derive(Args, Debug)]
struct InOut {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LabelArgs {
    /// Label log lines to import (e.g. the synthetic truth.jsonl).
    #[arg(long, conflicts_with_all = ["tweet", "stratagem"])]
    from: Option<PathBuf>,
    #[arg(long, requires = "annotator")]
    tweet: Option<String>,
    /// Stratagems present; omit for a negative label.
    #[arg(long, value_enum, value_delimiter = ',')]
    stratagem: Vec<StratagemArg>,
    #[arg(long)]
    annotator: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StratagemArg {
    Inform,
    Invoke,
    Deflect,
    Recast,
}

impl From<StratagemArg> for Stratagem {
    fn from(s: StratagemArg) -> Self {
        match s {
            StratagemArg::Inform => Stratagem::Inform,
            StratagemArg::Invoke => Stratagem::Invoke,
            StratagemArg::Deflect => Stratagem::Deflect,
            StratagemArg::Recast => Stratagem::Recast,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Metric {
    Unweighted,
    InverseWeight,
}

enum CliError {
    Usage(String),
    Data(liminal_core::Error),
}

impl From<liminal_core::Error> for CliError {
    fn from(e: liminal_core::Error) -> Self {
        CliError::Data(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult = Result<(), CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

struct Ctx {
    ws: Workspace,
    cfg: PipelineConfig,
    exec: Execution,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.ws.path(name)
    }

    fn pick(&self, flag: &Option<PathBuf>, name: &str) -> PathBuf {
        flag.clone().unwrap_or_else(|| self.path(name))
    }

    /// Checks workspace inputs against the manifest before reading.
    fn inputs(&self, names: &[&str]) -> CliResult {
        Ok(self.ws.verify_inputs(names)?)
    }

    fn seal(&self) -> CliResult {
        self.ws.seal()?;
        Ok(())
    }

    fn corpus(&self, path: &Path) -> Result<Corpus, CliError> {
        let report = load_corpus(path)?;
        if report.skipped() > 0 {
            eprintln!("skipped {} malformed lines in {}", report.skipped(), path.display());
        }
        Ok(report.corpus)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 1,
                CliError::Data(_) => 2,
            })
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    cfg.training.execution = exec;

    if let Command::Config { action } = &cli.command {
        return config(action, &cfg);
    }
    let ws = match cli.command {
        Command::GenSynthetic { .. } => Workspace::create(&cli.workspace)?,
        _ => Workspace::open(&cli.workspace)?,
    };
    let ctx = Ctx { ws, cfg, exec };

    match cli.command {
        Command::GenSynthetic { n_tweets, n_positive, n_accounts } => {
            gen_synthetic(ctx, n_tweets, n_positive, n_accounts)
        }
        Command::Snowball { seed_accounts, raw_seeds, layers, retweeters_per_tweet, io } => {
            run_snowball(ctx, seed_accounts, raw_seeds, layers, retweeters_per_tweet, io)
        }
        Command::BuildGraph { sample, like, retweet, follow_or_friend, io } => {
            let mut ctx = ctx;
            set(&mut ctx.cfg.graph.like, like);
            set(&mut ctx.cfg.graph.retweet, retweet);
            set(&mut ctx.cfg.graph.follow_or_friend, follow_or_friend);
            ctx.cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            build(ctx, sample, io)
        }
        Command::Communities { resolution, shuffle_seed, io } => {
            let mut ctx = ctx;
            set(&mut ctx.cfg.communities.resolution, resolution);
            if shuffle_seed.is_some() {
                ctx.cfg.communities.shuffle_seed = shuffle_seed;
            }
            ctx.cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            communities(ctx, io)
        }
        Command::Centrality { partition, liminal_out, metric, top_fraction, io } => {
            let mut ctx = ctx;
            if let Some(m) = metric {
                ctx.cfg.centrality.metric = match m {
                    Metric::Unweighted => PathMetric::Unweighted,
                    Metric::InverseWeight => PathMetric::InverseWeight,
                };
            }
            set(&mut ctx.cfg.centrality.top_fraction, top_fraction);
            ctx.cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            centrality(ctx, partition, liminal_out, io)
        }
        Command::Label(args) => label(ctx, args),
        Command::Train { epochs, learning_rate, input_length } => {
            let mut ctx = ctx;
            set(&mut ctx.cfg.training.epochs, epochs);
            set(&mut ctx.cfg.training.learning_rate, learning_rate);
            set(&mut ctx.cfg.training.input_length, input_length);
            ctx.cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            train_model(ctx)
        }
        Command::Classify { threshold } => {
            let mut ctx = ctx;
            set(&mut ctx.cfg.classify.threshold, threshold);
            ctx.cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            run_classify(ctx)
        }
        Command::Evaluate { truth, threshold } => {
            let mut ctx = ctx;
            set(&mut ctx.cfg.classify.threshold, threshold);
            ctx.cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            run_evaluate(ctx, truth)
        }
        Command::Report { k } => {
            let mut ctx = ctx;
            set(&mut ctx.cfg.report.top_k, k);
            ctx.cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            report(ctx)
        }
        Command::Serve { addr } => serve(ctx, addr),
        Command::Config { .. } => unreachable!("handled above"),
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn config(action: &ConfigAction, cfg: &PipelineConfig) -> CliResult {
    match action {
        ConfigAction::Show => print!("{DOCUMENTED_DEFAULTS}"),
        ConfigAction::Effective => print!("{}", cfg.to_toml()),
        ConfigAction::Check { file } => {
            PipelineConfig::load(file)?;
            println!("{}: ok", file.display());
        }
    }
    Ok(())
}

fn gen_synthetic(mut ctx: Ctx, n_tweets: Option<usize>, n_positive: Option<usize>, n_accounts: Option<usize>) -> CliResult {
    set(&mut ctx.cfg.synthetic.n_tweets, n_tweets);
    set(&mut ctx.cfg.synthetic.n_positive, n_positive);
    set(&mut ctx.cfg.synthetic.n_accounts, n_accounts);
    let spec = ctx.cfg.synthetic_spec();
    if spec.n_positive > spec.n_tweets {
        return usage(format!("n_positive {} exceeds n_tweets {}", spec.n_positive, spec.n_tweets));
    }
    let (corpus, truth) = generate_synthetic(&spec)?;
    save_corpus(&corpus, &ctx.path(ws::CORPUS))?;
    let truth = LabelStore::replay(truth.into_iter().map(|(tweet_id, label)| LabelRecord { tweet_id, label }));
    truth.write_log(&ctx.path(ws::TRUTH))?;
    ctx.seal()?;
    println!(
        "wrote {} tweets, {} interactions, {} positives to {}",
        corpus.tweets.len(),
        corpus.interactions.len(),
        truth.positive_count(),
        ctx.ws.root().display()
    );
    Ok(())
}

fn run_snowball(
    mut ctx: Ctx,
    seed_accounts: Vec<String>,
    raw_seeds: Vec<String>,
    layers: Option<usize>,
    per_tweet: Option<usize>,
    io: InOut,
) -> CliResult {
    set(&mut ctx.cfg.snowball.layers, layers);
    set(&mut ctx.cfg.snowball.retweeters_per_tweet, per_tweet);
    let mut seeds = seed_accounts;
    for raw in &raw_seeds {
        seeds.push(anonymize_account(raw, ctx.cfg.salt.as_bytes())?.as_str().to_owned());
    }
    let cfg = ctx.cfg.snowball_config(&seeds).map_err(|e| CliError::Usage(e.to_string()))?;
    if cfg.seeds.is_empty() {
        return usage("snowball needs --seed-account, --raw-seed or snowball.seeds in the config");
    }
    ctx.inputs(&[ws::CORPUS, ws::INTERACTIONS])?;
    let corpus = ctx.corpus(&ctx.pick(&io.input, ws::CORPUS))?;
    let sample = snowball(&FixtureSource::new(&corpus), &cfg)?;
    sample.save(&ctx.pick(&io.out, ws::SAMPLE))?;
    ctx.seal()?;
    let per_layer: Vec<String> = sample.accounts_by_layer.iter().map(|l| l.len().to_string()).collect();
    println!(
        "sampled {} accounts (per layer {}) and {} tweets",
        sample.account_count(),
        per_layer.join("/"),
        sample.tweets.len()
    );
    Ok(())
}

fn build(ctx: Ctx, sample: Option<PathBuf>, io: InOut) -> CliResult {
    ctx.inputs(&[ws::CORPUS, ws::INTERACTIONS, ws::SAMPLE])?;
    let corpus = ctx.corpus(&ctx.pick(&io.input, ws::CORPUS))?;
    let events = match sample {
        Some(path) => {
            let s = SampleSet::load(&path)?;
            let keep: HashSet<_> = s.accounts_by_layer.iter().flatten().collect();
            corpus
                .interactions
                .into_iter()
                .filter(|e| keep.contains(&e.actor) && keep.contains(&e.target))
                .collect()
        }
        None => corpus.interactions,
    };
    let (graph, stats) = build_graph(&events, &ctx.cfg.edge_weights());
    graph.save(&ctx.pick(&io.out, ws::GRAPH))?;
    ctx.seal()?;
    println!(
        "graph: {} nodes, {} edges from {} interactions ({} self-interactions skipped)",
        graph.node_count(),
        graph.edge_count(),
        stats.events,
        stats.skipped_self_interactions
    );
    Ok(())
}

fn communities(ctx: Ctx, io: InOut) -> CliResult {
    ctx.inputs(&[ws::GRAPH, ws::NODE_MAP])?;
    let graph = WeightedGraph::load(&ctx.pick(&io.input, ws::GRAPH))?;
    let result = louvain(&graph, &ctx.cfg.louvain())?;
    result.partition.save(&ctx.pick(&io.out, ws::PARTITION))?;
    ctx.seal()?;
    println!(
        "{} communities, modularity {:.6} after {} levels",
        result.partition.community_count(),
        result.modularity(),
        result.levels.len()
    );
    Ok(())
}

fn centrality(ctx: Ctx, partition: Option<PathBuf>, liminal_out: Option<PathBuf>, io: InOut) -> CliResult {
    ctx.inputs(&[ws::GRAPH, ws::NODE_MAP, ws::PARTITION])?;
    let graph = WeightedGraph::load(&ctx.pick(&io.input, ws::GRAPH))?;
    let partition = Partition::load(&ctx.pick(&partition, ws::PARTITION))?;
    let scores = betweenness_with(&graph, &ctx.cfg.betweenness(ctx.exec));
    let liminal = liminal_nodes(&graph, &partition, &scores, ctx.cfg.centrality.top_fraction)?;
    scores.save(&ctx.pick(&io.out, ws::CENTRALITY))?;
    liminal.save(&ctx.pick(&liminal_out, ws::LIMINAL))?;
    ctx.seal()?;
    println!(
        "{} liminal nodes of {} bridging candidates",
        liminal.ranked.len(),
        liminal.candidate_count
    );
    for e in liminal.ranked.iter().take(10) {
        println!("  node {:>5}  betweenness {:>12.3}  communities {:?}", e.node, e.betweenness, e.communities);
    }
    Ok(())
}

/// Same flags and annotator; the timestamp alone is not a new revision.
fn same_label(a: &StratagemLabel, b: &StratagemLabel) -> bool {
    (a.inform, a.invoke, a.deflect, a.recast, &a.annotator) == (b.inform, b.invoke, b.deflect, b.recast, &b.annotator)
}

fn label(ctx: Ctx, args: LabelArgs) -> CliResult {
    ctx.inputs(&[ws::CORPUS])?;
    let corpus = ctx.corpus(&ctx.path(ws::CORPUS))?;
    let known = corpus.tweet_ids();
    let records: Vec<LabelRecord> = match (&args.from, &args.tweet) {
        (Some(path), _) => LabelStore::read_log(path)?.log().to_vec(),
        (None, Some(tweet)) => {
            let mut label = StratagemLabel::negative(args.annotator.clone().unwrap_or_default(), Utc::now());
            for s in &args.stratagem {
                label = label.with((*s).into(), true);
            }
            vec![LabelRecord { tweet_id: tweet.clone(), label }]
        }
        (None, None) => return usage("label needs --from FILE or --tweet ID --annotator NAME"),
    };
    let log_path = ctx.path(ws::LABELS);
    let mut store = LabelStore::read_log(&log_path)?;
    let mut appended = 0;
    for r in records {
        if !known.contains(r.tweet_id.as_str()) {
            return Err(liminal_core::Error::UnknownTweet(r.tweet_id).into());
        }
        if store.get(&r.tweet_id).is_some_and(|cur| same_label(cur, &r.label)) {
            continue;
        }
        append_to_log(&log_path, &r)?;
        store = LabelStore::replay(store.log().iter().cloned().chain([r]));
        appended += 1;
    }
    println!(
        "appended {appended} revisions; {} tweets labeled, {} positive",
        store.len(),
        store.positive_count()
    );
    Ok(())
}

fn train_model(ctx: Ctx) -> CliResult {
    ctx.inputs(&[ws::CORPUS])?;
    let corpus = ctx.corpus(&ctx.path(ws::CORPUS))?;
    let labels = LabelStore::read_log(&ctx.path(ws::LABELS))?;
    let (mut model, history) = train(&corpus, &labels, &ctx.cfg.training)?;
    model.threshold = ctx.cfg.classify.threshold;
    model.save(&ctx.path(ws::CHECKPOINT), &ctx.path(ws::VOCAB))?;
    let json = serde_json::to_string_pretty(&history).expect("history serializes") + "\n";
    std::fs::write(ctx.path(ws::HISTORY), json).map_err(|e| CliError::Data(io_error(&ctx.path(ws::HISTORY), e)))?;
    ctx.seal()?;
    let best = history.best();
    println!(
        "trained {} epochs on {} examples ({} validation); best epoch {} val accuracy {:.4} val loss {:.4}",
        history.epochs.len(),
        history.train_size,
        history.validation_size,
        history.best_epoch,
        best.val_accuracy,
        best.val_loss
    );
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> liminal_core::Error {
    liminal_core::Error::Io { path: path.to_owned(), source: e }
}

fn load_model(ctx: &Ctx) -> Result<ClassifierModel, CliError> {
    ctx.inputs(&[ws::CHECKPOINT, ws::MODEL_META, ws::VOCAB])?;
    Ok(ClassifierModel::load(&ctx.path(ws::CHECKPOINT), &ctx.path(ws::VOCAB))?)
}

fn run_classify(ctx: Ctx) -> CliResult {
    let model = load_model(&ctx)?;
    ctx.inputs(&[ws::CORPUS])?;
    let corpus = ctx.corpus(&ctx.path(ws::CORPUS))?;
    let rows = classify(&model, &corpus.tweets, ctx.cfg.classify.threshold, ctx.exec)?;
    save_classifications(&ctx.path(ws::CLASSIFICATIONS), &rows)?;
    ctx.seal()?;
    let flagged = rows.iter().filter(|r| r.flagged).count();
    println!("flagged {flagged} of {} tweets at threshold {}", rows.len(), ctx.cfg.classify.threshold);
    Ok(())
}

fn run_evaluate(ctx: Ctx, truth: Option<PathBuf>) -> CliResult {
    let mut model = load_model(&ctx)?;
    model.threshold = ctx.cfg.classify.threshold;
    ctx.inputs(&[ws::CORPUS, ws::TRUTH])?;
    let corpus = ctx.corpus(&ctx.path(ws::CORPUS))?;
    let labels = LabelStore::read_log(&truth.unwrap_or_else(|| ctx.path(ws::LABELS)))?;
    let adj_path = ctx.path(ws::ADJUDICATIONS);
    let adjudications = if adj_path.exists() { Some(AdjudicationStore::read_log(&adj_path)?) } else { None };
    let eval = evaluate(&model, &corpus, &labels, adjudications.as_ref(), ctx.exec)?;
    let json = serde_json::to_string_pretty(&eval).expect("evaluation serializes") + "\n";
    std::fs::write(ctx.path(ws::EVALUATION), &json).map_err(|e| CliError::Data(io_error(&ctx.path(ws::EVALUATION), e)))?;
    ctx.seal()?;
    println!(
        "accuracy {:.4}  precision {:.4}  recall {:.4}  (tp {} fp {} tn {} fn {})",
        eval.accuracy,
        eval.precision,
        eval.recall,
        eval.true_positive,
        eval.false_positive,
        eval.true_negative,
        eval.false_negative
    );
    if let Some(f) = &eval.findings {
        println!(
            "adjudicated: obvious {:.2}%  context {:.2}%  false positive {:.2}%  ({} unadjudicated)",
            f.obvious_true_pct, f.context_dependent_true_pct, f.false_positive_pct, f.unadjudicated
        );
    }
    Ok(())
}

fn report(ctx: Ctx) -> CliResult {
    ctx.inputs(&[
        ws::CORPUS,
        ws::INTERACTIONS,
        ws::GRAPH,
        ws::NODE_MAP,
        ws::PARTITION,
        ws::CENTRALITY,
        ws::LIMINAL,
        ws::CLASSIFICATIONS,
    ])?;
    let corpus = ctx.corpus(&ctx.path(ws::CORPUS))?;
    let graph = WeightedGraph::load(&ctx.path(ws::GRAPH))?;
    let partition = Partition::load(&ctx.path(ws::PARTITION))?;
    let scores = CentralityScores::load(&ctx.path(ws::CENTRALITY))?;
    let liminal = LiminalReport::load(&ctx.path(ws::LIMINAL))?;
    let rows = load_classifications(&ctx.path(ws::CLASSIFICATIONS))?;
    let mut report = campaign_report(&rows, &corpus, &graph, &partition, &scores, &liminal)?;
    report.candidates = disruption_candidates(&report, ctx.cfg.report.top_k)?;
    report.save(&ctx.path(ws::REPORT_LINES), &ctx.path(ws::REPORT_TABLE))?;
    ctx.seal()?;
    print!("{}", report.to_table());
    Ok(())
}

fn serve(ctx: Ctx, addr: SocketAddr) -> CliResult {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let handle = liminal_service::serve(ctx.ws, addr).await?;
        println!("serving on http://{}/api (ctrl-c to stop)", handle.addr);
        let _ = tokio::signal::ctrl_c().await;
        handle
            .shutdown()
            .await
            .map_err(|e| CliError::Data(liminal_core::Error::InvalidInput(format!("server error: {e}"))))
    })
}
