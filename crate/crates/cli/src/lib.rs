//! The `lstp` command line: generate, train, evaluate, chat and serve.
//!
//! Every stage reads its inputs from a checkpoint directory (`--engine`,
//! defaulting to `--out`) and writes only inside `--out`.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use lstp::checkpoint::{Checkpoint, RunConfig};
use lstp::data::{read_jsonl, UserProfile};
use lstp::datagen::{gen_corpus, gen_kg, gen_profiles, GenConfig, Split};
use lstp::dialog::{DialogState, Engine, RandomGrounding, RandomTarget, ShortTermPlanner};
use lstp::eval::{
    episodes, eval_ablation, eval_cases, eval_generation, eval_grounding, eval_interactive, eval_recommendation, EvalReport, Pipeline, TargetSource,
};
use lstp::kge::train_kge;
use lstp::ltp::train_ltp;
use lstp::stp::{retrieval_accuracy, train_linker, train_stp, StpVariant};
use lstp::Error;

#[derive(Parser, Debug)]
#[command(name = "lstp", version, about = "Long- and short-term planning conversational recommender")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON file with `gen`, `kge`, `linker`, `ltp`, `stp`, `engine` and `interactive` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every module; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print training losses and per-turn planner decisions.
    #[arg(long, global = true)]
    debug: bool,
}

#[derive(Args, Debug, Clone)]
struct Stage {
    /// Directory receiving this stage's artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Checkpoint directory holding earlier artifacts (defaults to --out).
    #[arg(long, alias = "from")]
    engine: Option<PathBuf>,
}

impl Stage {
    fn input(&self) -> Checkpoint {
        Checkpoint::new(self.engine.clone().unwrap_or_else(|| self.out.clone()))
    }

    fn output(&self) -> Checkpoint {
        Checkpoint::new(self.out.clone())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Recommendation,
    Grounding,
    Generation,
    Ablation,
    Interactive,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Target {
    Gold,
    Predicted,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Baseline {
    RandomGrounding,
    RandomTarget,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Variant {
    Full,
    WithHistory,
    WithoutLongTerm,
    WithoutLatestUtterance,
    All,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic knowledge graph into <out>/kg.
    GenKg {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
    },
    /// Train TransE embeddings into <out>/kge.bin.
    TrainKge {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
    },
    /// Generate profiles and dialogs into <out>/corpus.
    GenCorpus {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
    },
    /// Train the entity linker into <out>/linker.bin.
    TrainLinker {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
    },
    /// Train the long-term planner into <out>/ltp.bin.
    TrainLtp {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
    },
    /// Train the short-term planner into <out>/stp.bin (or stp_<variant>.bin).
    TrainStp {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "full")]
        variant: Variant,
    },
    /// Evaluate on the test split or with simulated users; writes <out>/reports/<mode>.json.
    Eval {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Target fed to the short-term planner in grounding and ablation modes.
        #[arg(long, value_enum)]
        target: Option<Target>,
        /// Replace a trained planner with a random one (interactive mode).
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
    },
    /// Chat with the trained engine on standard input.
    Chat {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        engine: PathBuf,
        /// Directory for the session trace (trace.jsonl); defaults to --engine.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON-lines profile file seeding the session.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Serve the HTTP session API.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        engine: PathBuf,
        /// Listening port; falls back to LSTP_PORT, then 8080.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
    },
}

/// Failure of a subcommand, mapped to its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => CliError::Usage(e.to_string()),
            e => CliError::Domain(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return 0;
            }
            let mut cmd = Cli::command();
            let help = match argv.get(1).and_then(|a| a.to_str()).and_then(|a| cmd.find_subcommand_mut(a)) {
                Some(sub) => sub.render_help(),
                None => cmd.render_help(),
            };
            eprintln!("\n{help}");
            return 2;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("usage error: {m}"),
                CliError::Domain(m) => eprintln!("error: {m}"),
            }
            e.exit_code()
        }
    }
}

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io(io) => CliError::Usage(format!("{}: {io}", p.display())),
            Error::Parse { .. } | Error::Config(_) => CliError::Usage(e.to_string()),
            e => e.into(),
        })?,
        None => RunConfig::desk(),
    };
    Ok(match common.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn log_losses(debug: bool, what: &str, losses: &[f64]) {
    if debug {
        for (i, l) in losses.iter().enumerate() {
            eprintln!("{what} epoch {}: loss {l:.6}", i + 1);
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::GenKg { stage, common } => {
            let cfg = load_config(&common)?;
            let g = gen_kg(&cfg.gen)?;
            g.save_dir(&stage.output().kg_dir())?;
            eprintln!("wrote {} entities, {} triples", g.num_entities(), g.num_triples());
        }
        Command::TrainKge { stage, common } => {
            let cfg = load_config(&common)?;
            let g = stage.input().load_graph()?;
            let emb = train_kge(&g, &cfg.kge)?;
            create_out(&stage.out)?;
            emb.save(&stage.output().kge(), cfg.kge.seed)?;
        }
        Command::GenCorpus { stage, common } => {
            let cfg = load_config(&common)?;
            let input = stage.input();
            let g = input.load_graph()?;
            let emb = input.load_embeddings(&g)?;
            let c = gen_corpus(&g, &emb, &cfg.gen)?;
            c.save(&stage.output().corpus_dir())?;
            eprintln!("wrote {} dialogs for {} users", c.dialogs.len(), c.profiles.len());
        }
        Command::TrainLinker { stage, common } => {
            let cfg = load_config(&common)?;
            let input = stage.input();
            let g = input.load_graph()?;
            let emb = input.load_embeddings(&g)?;
            let c = input.load_corpus()?;
            let (linker, losses) = train_linker(&g, &emb, &c.link_pairs(Split::Train), &c.link_pairs(Split::Valid), &cfg.linker)?;
            log_losses(common.debug, "linker", &losses);
            if common.debug {
                eprintln!("valid acc@{}: {:.4}", linker.top_k, retrieval_accuracy(&linker, &emb, &c.link_pairs(Split::Valid), linker.top_k)?);
            }
            create_out(&stage.out)?;
            linker.save(&stage.output().linker())?;
        }
        Command::TrainLtp { stage, common } => {
            let cfg = load_config(&common)?;
            let input = stage.input();
            let g = input.load_graph()?;
            let emb = input.load_embeddings(&g)?;
            let c = input.load_corpus()?;
            let (m, losses) = train_ltp(&g, &emb, &c.ltp_examples(Split::Train)?, &cfg.ltp)?;
            log_losses(common.debug, "ltp", &losses);
            create_out(&stage.out)?;
            m.save(&stage.output().ltp())?;
        }
        Command::TrainStp { stage, common, variant } => {
            let cfg = load_config(&common)?;
            let input = stage.input();
            let g = input.load_graph()?;
            let emb = input.load_embeddings(&g)?;
            let c = input.load_corpus()?;
            let (examples, histories) = c.stp_examples(Split::Train)?;
            create_out(&stage.out)?;
            for v in variants(variant) {
                let stp_cfg = lstp::stp::StpConfig { variant: v, ..cfg.stp.clone() };
                let (m, losses) = train_stp(&g, &emb, &examples, &histories, &stp_cfg)?;
                log_losses(common.debug, v.name(), &losses);
                m.save(&stage.output().stp(v))?;
            }
        }
        Command::Eval {
            stage,
            common,
            mode,
            target,
            baseline,
        } => {
            let cfg = load_config(&common)?;
            let report = evaluate(&stage.input(), &cfg, mode, target, baseline)?;
            let config = serde_json::json!({
                "run": cfg,
                "target": target.map(value_name),
                "baseline": baseline.map(value_name),
            });
            let report = report.with_config(config, cfg.interactive.seed);
            let path = stage.output().report(&report.mode);
            create_out(path.parent().expect("reports dir"))?;
            report.save(&path)?;
            println!("{}", serde_json::to_string(&report).map_err(Error::from)?);
        }
        Command::Chat {
            common,
            engine,
            out,
            profile,
        } => {
            let cfg = load_config(&common)?;
            let ck = Checkpoint::new(&engine);
            let eng = ck.load_engine(cfg.engine)?;
            let mut state = DialogState::new("chat", UserProfile::default());
            if let Some(p) = profile {
                state.profile = load_profile(&eng, &p, None)?;
            }
            let stdin = std::io::stdin();
            let stdout = std::io::stdout();
            let state = chat_repl(&eng, state, stdin.lock(), stdout.lock(), common.debug)?;
            let dir = out.unwrap_or(engine);
            create_out(&dir)?;
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(TRACE_FILE))?);
            state.write_trace(&mut f)?;
            f.flush()?;
        }
        Command::Serve { common, engine, port, host } => {
            let cfg = load_config(&common)?;
            let eng = Checkpoint::new(&engine).load_engine(cfg.engine)?;
            let port = lstp_service::resolve_port(port).map_err(CliError::Usage)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(lstp_service::serve(eng, lstp_service::ServiceConfig::default(), SocketAddr::new(host, port)))?;
        }
    }
    Ok(())
}

fn value_name(v: impl ValueEnum) -> String {
    v.to_possible_value().expect("no skipped values").get_name().to_string()
}

pub const TRACE_FILE: &str = "trace.jsonl";

fn create_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn variants(v: Variant) -> Vec<StpVariant> {
    match v {
        Variant::Full => vec![StpVariant::Full],
        Variant::WithHistory => vec![StpVariant::WithHistory],
        Variant::WithoutLongTerm => vec![StpVariant::WithoutLongTerm],
        Variant::WithoutLatestUtterance => vec![StpVariant::WithoutLatestUtterance],
        Variant::All => StpVariant::ALL.to_vec(),
    }
}

fn target_source(t: Option<Target>, default: TargetSource) -> TargetSource {
    match t {
        Some(Target::Gold) => TargetSource::Gold,
        Some(Target::Predicted) => TargetSource::Predicted,
        None => default,
    }
}

fn evaluate(ck: &Checkpoint, cfg: &RunConfig, mode: Mode, target: Option<Target>, baseline: Option<Baseline>) -> CliResult<EvalReport> {
    if baseline.is_some() && mode != Mode::Interactive {
        return Err(CliError::Usage("--baseline only applies to --mode interactive".into()));
    }
    let g = ck.load_graph()?;
    let emb = ck.load_embeddings(&g)?;
    if mode == Mode::Interactive {
        let mut engine = ck.load_engine(cfg.engine)?;
        match baseline {
            Some(Baseline::RandomGrounding) => engine.stp = Arc::new(RandomGrounding { seed: cfg.interactive.seed }),
            Some(Baseline::RandomTarget) => engine.ltp = Arc::new(RandomTarget { seed: cfg.interactive.seed }),
            None => {}
        }
        let profiles = gen_profiles(
            &g,
            &GenConfig {
                n_users: cfg.interactive.n_users,
                seed: cfg.interactive.seed.wrapping_add(1),
                ..cfg.gen.clone()
            },
        )?;
        let eps = episodes(&g, &emb, &profiles, &cfg.interactive)?;
        return Ok(eval_interactive(&engine, &eps, &cfg.interactive)?);
    }
    let corpus = ck.load_corpus()?;
    let cases = eval_cases(&corpus, Split::Test)?;
    if mode == Mode::Generation {
        return Ok(eval_generation(&g, &cases)?);
    }
    let ltp = ck.load_ltp()?;
    match mode {
        Mode::Recommendation | Mode::Grounding => {
            let stp = ck.load_stp(StpVariant::Full)?;
            let default = if mode == Mode::Grounding { TargetSource::Gold } else { TargetSource::Predicted };
            let p = Pipeline {
                graph: &g,
                emb: &emb,
                ltp: &ltp,
                stp: &stp,
                target: target_source(target, default),
            };
            Ok(if mode == Mode::Recommendation {
                eval_recommendation(&cases, |c| p.item_ranking(c))?
            } else {
                eval_grounding(&cases, |c| p.grounding(c))?
            })
        }
        Mode::Ablation => {
            let models = StpVariant::ALL.iter().map(|&v| Ok((v, ck.load_stp(v)?))).collect::<CliResult<Vec<_>>>()?;
            let planners: Vec<(StpVariant, &dyn ShortTermPlanner)> = models.iter().map(|(v, m)| (*v, m as &dyn ShortTermPlanner)).collect();
            Ok(eval_ablation(&g, &emb, &ltp, &planners, &cases, target_source(target, TargetSource::Predicted))?)
        }
        Mode::Generation | Mode::Interactive => unreachable!("handled above"),
    }
}

/// Reads a JSON-lines profile file and picks `user` (or the first record).
pub fn load_profile(engine: &Engine, path: &Path, user: Option<&str>) -> lstp::Result<UserProfile> {
    let profiles: Vec<UserProfile> = read_jsonl(path)?;
    let p = match user {
        Some(u) => profiles.into_iter().find(|p| p.user_id == u),
        None => profiles.into_iter().next(),
    }
    .ok_or_else(|| Error::Domain(format!("{} has no matching profile", path.display())))?;
    p.validate(&engine.graph)?;
    Ok(p)
}

/// Line-oriented chat loop. Commands: `/quit`, `/profile load FILE [USER]`.
/// Empty lines are ignored; end of input ends the session.
pub fn chat_repl(engine: &Engine, mut state: DialogState, input: impl BufRead, mut output: impl Write, debug: bool) -> lstp::Result<DialogState> {
    let g = &engine.graph;
    for line in input.lines() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == "/quit" {
            break;
        }
        if let Some(rest) = text.strip_prefix("/profile load") {
            let mut args = rest.split_whitespace();
            let Some(path) = args.next() else {
                writeln!(output, "usage: /profile load FILE [USER]")?;
                continue;
            };
            match load_profile(engine, Path::new(path), args.next()) {
                Ok(p) => {
                    writeln!(output, "loaded profile {} ({} interactions)", p.user_id, p.interactions.len())?;
                    state.profile = p;
                }
                Err(e) => writeln!(output, "could not load profile: {e}")?,
            }
            continue;
        }
        let out = engine.step(&mut state, text)?;
        writeln!(output, "{}", out.action.response_text)?;
        if debug {
            let kind = serde_json::to_value(out.action.kind)?;
            writeln!(
                output,
                "[target={} grounding={} action={}]",
                g.name(out.ltp_target),
                g.name(out.stp_top),
                kind.as_str().unwrap_or_default()
            )?;
        }
    }
    output.flush()?;
    Ok(state)
}
