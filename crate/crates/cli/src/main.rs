use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use marketrank::eval::DEFAULT_K;
use marketrank::{
    evaluate, fit, generate, load_sessions, rank_of, Config, FitError, ItemsPerQuery, Link,
    LsBaseline, LsConfig, Method, Model, ObjectiveWeights, Scorer, Session, SyntheticSpec,
};

mod manifest;

use manifest::{manifest_path, RunManifest};

const EXIT_INPUT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<marketrank::Error> for Failure {
    fn from(e: marketrank::Error) -> Self {
        match e {
            marketrank::Error::Config(_) => Failure::config(e.to_string()),
            _ => Failure::input(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "marketrank", version, about = "Margin-aware re-ranking of search results")]
struct Cli {
    /// Worker threads for the parallel passes (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic session corpus.
    Gen(GenArgs),
    /// Train the learned margin weight.
    Train(TrainArgs),
    /// Fit the constant-weight line-search baseline.
    Baseline(BaselineArgs),
    /// Apply a model and write the new ranks.
    Rerank(RerankArgs),
    /// Compare the original sort, the baseline and learned models.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Number of query groups.
    #[arg(long, default_value_t = 1000)]
    queries: usize,
    /// Mean items per query.
    #[arg(long, default_value_t = 30)]
    items: usize,
    /// Half-width of the items-per-query range; defaults to a third of --items.
    #[arg(long)]
    items_spread: Option<usize>,
    #[arg(long, default_value_t = 4)]
    feature_dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Model artifact.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch trace CSV; defaults to `<out>.trace.csv`.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    theta_rank: Option<f64>,
    #[arg(long)]
    theta_kendall: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// `softplus` or `identity`.
    #[arg(long)]
    link: Option<Link>,
    #[arg(long)]
    seed: Option<u64>,
}

impl TrainArgs {
    fn config(&self) -> Config {
        let d = Config::default();
        Config {
            alpha: self.alpha.unwrap_or(d.alpha),
            gamma: self.gamma.unwrap_or(d.gamma),
            theta_rank: self.theta_rank.unwrap_or(d.theta_rank),
            theta_kendall: self.theta_kendall.unwrap_or(d.theta_kendall),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            epochs: self.epochs.unwrap_or(d.epochs),
            link: self.link.unwrap_or(d.link),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Comma-separated, strictly increasing candidate weights.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    beta_grid: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Weight of the distance to the consumer ranking.
    #[arg(long)]
    consumer_weight: Option<f64>,
    /// Weight of the distance to the margin-percent ranking.
    #[arg(long)]
    margin_weight: Option<f64>,
}

impl BaselineArgs {
    fn config(&self) -> LsConfig<f64> {
        let d = LsConfig::default();
        LsConfig {
            beta_grid: self.beta_grid.clone().unwrap_or(d.beta_grid),
            alpha: self.alpha.unwrap_or(d.alpha),
            weights: ObjectiveWeights {
                consumer: self.consumer_weight.unwrap_or(d.weights.consumer),
                margin: self.margin_weight.unwrap_or(d.weights.margin),
            },
        }
    }
}

#[derive(Debug, Args)]
struct RerankArgs {
    #[arg(long)]
    data: PathBuf,
    /// A trained model or a line-search baseline file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Trained model, as `PATH` or `NAME=PATH`; repeatable.
    #[arg(long = "model")]
    models: Vec<String>,
    /// Line-search baseline file; reported as method `ls`.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Method that risk/reward is measured against; `ls` when a baseline
    /// is given, otherwise `original`.
    #[arg(long)]
    versus: Option<String>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Report CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write the text table here.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_data(path: &Path) -> Result<Vec<Session>, Failure> {
    let text = read_text(path)?;
    load_sessions(text.as_bytes()).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn finish(manifest: &RunManifest, explicit: Option<&Path>, primary: &Path, start: Instant) -> CmdResult {
    let path = manifest_path(explicit, primary);
    write_bytes(&path, manifest.render(start.elapsed()).as_bytes())
}

fn cmd_gen(args: &GenArgs) -> CmdResult {
    let start = Instant::now();
    let spec = SyntheticSpec {
        n_queries: args.queries,
        items_per_query: ItemsPerQuery {
            mean: args.items,
            spread: args.items_spread.unwrap_or(args.items / 3),
        },
        feature_dim: args.feature_dim,
        seed: args.seed,
        ..SyntheticSpec::default()
    };
    spec.validate()?;
    let sessions: Vec<Session> = generate(&spec)?;
    let csv = marketrank::io::sessions_to_csv_string(&sessions);
    write_bytes(&args.out, csv.as_bytes())?;

    let mut m = RunManifest::new("gen");
    m.config("queries", spec.n_queries)
        .config("items", spec.items_per_query.mean)
        .config("items_spread", spec.items_per_query.spread)
        .config("feature_dim", spec.feature_dim)
        .seed(spec.seed)
        .output("sessions", &args.out, csv.as_bytes());
    finish(&m, args.manifest.as_deref(), &args.out, start)?;
    println!("wrote {} queries to {}", sessions.len(), args.out.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> CmdResult {
    let start = Instant::now();
    let config = args.config();
    config.validate()?;
    let sessions = load_data(&args.data)?;
    let trace_path = args.trace.clone().unwrap_or_else(|| {
        let mut name = args.out.as_os_str().to_os_string();
        name.push(".trace.csv");
        PathBuf::from(name)
    });

    let (model, trace) = match fit(&sessions, &config) {
        Ok(done) => done,
        Err(FitError::Invalid(e)) => return Err(e.into()),
        Err(err @ FitError::Diverged { .. }) => {
            if let FitError::Diverged { trace, .. } = &err {
                write_bytes(&trace_path, trace.to_csv().as_bytes())?;
            }
            return Err(Failure {
                code: EXIT_DIVERGED,
                message: err.to_string(),
            });
        }
    };
    let model_text = model.to_text();
    let trace_csv = trace.to_csv();
    write_bytes(&args.out, model_text.as_bytes())?;
    write_bytes(&trace_path, trace_csv.as_bytes())?;

    let mut m = RunManifest::new("train");
    m.config("alpha", config.alpha)
        .config("gamma", config.gamma)
        .config("theta_rank", config.theta_rank)
        .config("theta_kendall", config.theta_kendall)
        .config("learning_rate", config.learning_rate)
        .config("epochs", config.epochs)
        .config("link", config.link.to_string())
        .seed(config.seed)
        .input("data", &args.data)
        .output("model", &args.out, model_text.as_bytes())
        .output("trace", &trace_path, trace_csv.as_bytes());
    finish(&m, args.manifest.as_deref(), &args.out, start)?;
    if let Some(r) = trace.last() {
        println!(
            "epoch {}: rank_loss={} regularizer={} total={} mean_tau={}",
            r.epoch, r.rank_loss, r.regularizer, r.total, r.mean_tau
        );
    }
    Ok(())
}

fn cmd_baseline(args: &BaselineArgs) -> CmdResult {
    let start = Instant::now();
    let config = args.config();
    config.validate()?;
    let sessions = load_data(&args.data)?;
    let baseline = LsBaseline::fit(&sessions, &config)?;
    let text = baseline.to_text();
    write_bytes(&args.out, text.as_bytes())?;

    let grid: Vec<f64> = config.beta_grid.clone();
    let mut m = RunManifest::new("baseline");
    m.config("beta_grid", grid)
        .config("alpha", config.alpha)
        .config("consumer_weight", config.weights.consumer)
        .config("margin_weight", config.weights.margin)
        .input("data", &args.data)
        .output("baseline", &args.out, text.as_bytes());
    finish(&m, args.manifest.as_deref(), &args.out, start)?;
    println!("beta={}", baseline.beta);
    Ok(())
}

/// Reads either artifact kind; the baseline becomes a constant-weight model.
fn load_any_model(path: &Path, feature_dim: usize) -> Result<Model, Failure> {
    let text = read_text(path)?;
    let model = match Model::from_text(&text) {
        Ok(model) => model,
        Err(model_err) => match LsBaseline::<f64>::from_text(&text) {
            Ok(b) => b.to_model(feature_dim),
            Err(_) => return Err(Failure::input(format!("{}: {model_err}", path.display()))),
        },
    };
    Ok(model)
}

fn check_dim(model: &Model, sessions: &[Session], path: &Path) -> CmdResult {
    match sessions.iter().find(|s| s.feature_dim() != model.feature_dim()) {
        Some(s) => Err(Failure::input(format!(
            "{}: {}",
            path.display(),
            marketrank::Error::ModelDim {
                model: model.feature_dim(),
                data: s.feature_dim()
            }
        ))),
        None => Ok(()),
    }
}

fn data_dim(sessions: &[Session]) -> usize {
    sessions.first().map_or(0, Session::feature_dim)
}

fn cmd_rerank(args: &RerankArgs) -> CmdResult {
    let start = Instant::now();
    let sessions = load_data(&args.data)?;
    let model = load_any_model(&args.model, data_dim(&sessions))?;
    check_dim(&model, &sessions, &args.model)?;

    let mut out = String::from("query_id,item_id,original_rank,new_rank,adjusted_score\n");
    for s in &sessions {
        let adjusted = model.adjust(s);
        let before = rank_of(&s.base_utilities());
        let after = rank_of(&adjusted);
        for (i, item) in s.items().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.query_id(),
                item.item_id,
                before[i],
                after[i],
                marketrank::scalar::format_significant(adjusted[i], 9)
            ));
        }
    }
    write_bytes(&args.out, out.as_bytes())?;

    let mut m = RunManifest::new("rerank");
    m.input("data", &args.data)
        .input("model", &args.model)
        .output("ranks", &args.out, out.as_bytes());
    finish(&m, args.manifest.as_deref(), &args.out, start)
}

fn parse_model_arg(arg: &str, count: usize, index: usize) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() && !name.contains(['/', '\\']) => {
            (name.to_string(), PathBuf::from(path))
        }
        _ if count == 1 => ("lrr".to_string(), PathBuf::from(arg)),
        _ => (format!("lrr{}", index + 1), PathBuf::from(arg)),
    }
}

fn cmd_eval(args: &EvalArgs) -> CmdResult {
    let start = Instant::now();
    let sessions = load_data(&args.data)?;
    let dim = data_dim(&sessions);
    let mut m = RunManifest::new("eval");
    m.input("data", &args.data);

    let mut methods = vec![Method::new("original", Scorer::Original)];
    if let Some(path) = &args.baseline {
        let text = read_text(path)?;
        let b = LsBaseline::<f64>::from_text(&text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        methods.push(Method::new("ls", Scorer::Adjusted(b.to_model(dim))));
        m.input("baseline", path);
    }
    for (i, arg) in args.models.iter().enumerate() {
        let (name, path) = parse_model_arg(arg, args.models.len(), i);
        if methods.iter().any(|x| x.name == name) {
            return Err(Failure::config(format!("method name {name:?} is used twice")));
        }
        let text = read_text(&path)?;
        let model = Model::from_text(&text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        check_dim(&model, &sessions, &path)?;
        m.input(&format!("model:{name}"), &path);
        methods.push(Method::new(name, Scorer::Adjusted(model)));
    }
    let versus = args.versus.clone().unwrap_or_else(|| {
        if args.baseline.is_some() { "ls" } else { "original" }.to_string()
    });

    let report = evaluate(&sessions, &methods, "original", &versus, args.k)?;
    let csv = report.to_csv();
    let table = report.to_table();
    write_bytes(&args.out, csv.as_bytes())?;
    m.config("k", args.k)
        .config("reference", "original")
        .config("versus", versus.as_str())
        .output("report", &args.out, csv.as_bytes());
    if let Some(path) = &args.table {
        write_bytes(path, table.as_bytes())?;
        m.output("table", path, table.as_bytes());
    }
    finish(&m, args.manifest.as_deref(), &args.out, start)?;
    print!("{table}");
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(e.to_string()))?;
    }
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Rerank(a) => cmd_rerank(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
