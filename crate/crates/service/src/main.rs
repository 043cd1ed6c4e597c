use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use valrec::commands::{self, EvaluateArgs, RecommendArgs, TrainArgs};
use valrec::config::Settings;
use valrec::engine::Engine;
use valrec::wire::{parse_field_arg, parse_pair_arg};
use valrec_core::eval::EvalFields;
use valrec_core::model::{FieldSlot, FieldValuePair};

#[derive(Parser)]
#[command(name = "valrec", version, about = "Context-aware value recommendations for metadata templates")]
struct Cli {
    /// TOML settings file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct MiningFlags {
    #[arg(long)]
    min_support: Option<u64>,
    #[arg(long)]
    min_confidence: Option<f64>,
    /// Largest antecedent mined; unbounded by default.
    #[arg(long)]
    max_antecedent: Option<usize>,
}

#[derive(Args)]
struct RecommendFlags {
    #[arg(long)]
    score_cutoff: Option<f64>,
    #[arg(long)]
    max_results: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Mine rules from an instance file into a rule store directory.
    Train {
        /// JSON-lines instance file.
        instances: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        mappings: Option<PathBuf>,
        #[command(flatten)]
        mining: MiningFlags,
    },
    /// Rank values for a target field given already-entered pairs.
    Recommend {
        /// Rule store directory (or rules.jsonl with manifest.json beside it).
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        mappings: Option<PathBuf>,
        /// `field=value` or `field<uri>=value<uri>`; repeatable.
        #[arg(long = "context", short = 'c', value_parser = parse_pair_arg)]
        context: Vec<FieldValuePair>,
        /// `field` or `field<uri>`.
        #[arg(long, value_parser = parse_field_arg)]
        target: FieldSlot,
        #[command(flatten)]
        opts: RecommendFlags,
    },
    /// Split, train, and report MRR against the majority baseline.
    Evaluate {
        instances: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        mappings: Option<PathBuf>,
        #[command(flatten)]
        mining: MiningFlags,
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated field labels, or `*` for every field.
        #[arg(long, value_delimiter = ',')]
        eval_fields: Option<Vec<String>>,
        #[arg(long)]
        max_context_size: Option<usize>,
    },
    /// Serve the HTTP API over a rule store.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        mappings: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        #[command(flatten)]
        opts: RecommendFlags,
    },
}

impl MiningFlags {
    fn apply(self, s: &mut Settings) {
        s.mining.min_support = self.min_support.or(s.mining.min_support);
        s.mining.min_confidence = self.min_confidence.or(s.mining.min_confidence);
        s.mining.max_antecedent_size = self.max_antecedent.or(s.mining.max_antecedent_size);
    }
}

impl RecommendFlags {
    fn apply(self, s: &mut Settings) {
        s.recommend.score_cutoff = self.score_cutoff.or(s.recommend.score_cutoff);
        s.recommend.max_results = self.max_results.or(s.recommend.max_results);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut settings = Settings::load_or_default(cli.config.as_deref())?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Train { instances, out: dir, mappings, mining } => {
            mining.apply(&mut settings);
            let args = TrainArgs {
                instances,
                mappings: mappings.or(settings.mappings.clone()),
                params: settings.mining_params(),
                out: dir,
            };
            commands::train(&args, &mut out)?;
        }
        Command::Recommend { store, mappings, context, target, opts } => {
            opts.apply(&mut settings);
            let args = RecommendArgs {
                store,
                mappings: mappings.or(settings.mappings.clone()),
                context,
                target,
                options: settings.recommend_options(),
            };
            commands::recommend(&args, &mut out)?;
        }
        Command::Evaluate {
            instances,
            out: dir,
            mappings,
            mining,
            train_fraction,
            seed,
            eval_fields,
            max_context_size,
        } => {
            mining.apply(&mut settings);
            settings.evaluation.train_fraction = train_fraction.or(settings.evaluation.train_fraction);
            settings.evaluation.seed = seed.or(settings.evaluation.seed);
            settings.evaluation.eval_fields = eval_fields.or(settings.evaluation.eval_fields.clone());
            settings.evaluation.max_context_size = max_context_size.or(settings.evaluation.max_context_size);
            let eval_fields: EvalFields = settings.eval_fields();
            let args = EvaluateArgs {
                instances,
                mappings: mappings.or(settings.mappings.clone()),
                params: settings.mining_params(),
                split: settings.split(),
                eval_fields,
                max_context_size: settings.evaluation.max_context_size,
                out: dir,
            };
            commands::evaluate_command(&args, &mut out)?;
        }
        Command::Serve { store, mappings, bind, opts } => {
            opts.apply(&mut settings);
            let mappings = mappings.or(settings.mappings.clone());
            let engine = Arc::new(Engine::from_store(store, mappings, settings.recommend_options())?);
            let bind = bind.unwrap_or_else(|| settings.bind().to_string());
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(valrec::server::serve(engine, &bind))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
