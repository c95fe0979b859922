mod render;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use emagent_core::agent::Session;
use emagent_core::corpus::{chunk_corpus, load_corpus, ChunkParams, Species, DEFAULT_MAX_TOKENS};
use emagent_core::efrec::{EfQuery, RecommendOutcome};
use emagent_core::evalkit::{load_benchmark, load_expert_scores, pairwise_win_rates, DEFAULT_TAU};
use emagent_core::inventory::{load_inventory, ChartKind, FilterSpec, GroupKey, InventoryQuery};
use emagent_core::tools::analysis_registry;
use emagent_service::{Backend, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "emagent", version, about = "Emissions-domain assistant: document QA, inventory analytics, emission factors and evaluation")]
struct Cli {
    #[command(flatten)]
    provider: ProviderArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct ProviderArgs {
    /// Model provider, `stub` or `live`. Falls back to EMAGENT_PROVIDER_MODE, then stub.
    #[arg(long, global = true)]
    provider: Option<String>,
    /// JSON map of scripted stub replies.
    #[arg(long, global = true, value_name = "FILE")]
    stub_fixtures: Option<PathBuf>,
}

impl ProviderArgs {
    fn config(&self) -> ServiceConfig {
        ServiceConfig {
            provider: self.provider.clone(),
            stub_fixtures: self.stub_fixtures.clone(),
            ..ServiceConfig::default()
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and chunk a JSON Lines corpus.
    Ingest {
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_TOKENS)]
        max_tokens: usize,
        /// Write the chunks as JSON Lines.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Vector index operations.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Analysis function registry.
    #[command(subcommand)]
    Tools(ToolsCommand),
    /// Aggregate an emission inventory.
    Analyze(AnalyzeArgs),
    /// Recommend emission factors for a vehicle category.
    Ef(EfArgs),
    /// Benchmark evaluation and expert score comparison.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Answer one question through the routed agent.
    Ask(AskArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
enum IndexCommand {
    /// Chunk and embed a corpus, writing the index file.
    Build {
        corpus: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_TOKENS)]
        max_tokens: usize,
    },
}

#[derive(Debug, Subcommand)]
enum ToolsCommand {
    /// List registered functions.
    List {
        /// Emit the schema array used in function-calling prompts.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    inventory: PathBuf,
    #[arg(long)]
    pollutant: Option<Species>,
    #[arg(long, conflicts_with_all = ["from_year", "to_year"])]
    year: Option<i32>,
    #[arg(long, requires = "to_year")]
    from_year: Option<i32>,
    #[arg(long, requires = "from_year")]
    to_year: Option<i32>,
    #[arg(long)]
    region: Option<String>,
    #[arg(long)]
    sector: Option<String>,
    #[arg(long)]
    subsector: Option<String>,
    #[arg(long, default_value = "sector")]
    group_by: GroupKey,
    /// pie, stacked_bar or line.
    #[arg(long)]
    chart: Option<ChartKind>,
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct EfArgs {
    #[arg(long)]
    vehicle: Option<String>,
    #[arg(long)]
    fuel: Option<String>,
    #[arg(long)]
    standard: Option<String>,
    #[arg(long)]
    region: Option<String>,
    #[arg(long)]
    guidelines: Option<PathBuf>,
    #[arg(long)]
    literature: Option<PathBuf>,
    /// Region hierarchy JSON; the built-in gazetteer otherwise.
    #[arg(long)]
    regions: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Score the retrieval and answering pipeline on a benchmark.
    Run {
        benchmark: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long)]
        top_k: Option<usize>,
        /// Write the full JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Pairwise win rates from expert scores.
    Experts {
        scores: PathBuf,
        /// Two model ids, `A,B`.
        #[arg(long, value_parser = parse_pair)]
        pair: (String, String),
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
struct AskArgs {
    question: String,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    inventory: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// TOML file with the same keys as these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    host: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    inventory: Option<PathBuf>,
    #[arg(long)]
    ef_guidelines: Option<PathBuf>,
    #[arg(long)]
    ef_literature: Option<PathBuf>,
    #[arg(long)]
    regions: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<PathBuf>,
    #[arg(long)]
    prompts: Option<PathBuf>,
    #[arg(long)]
    session_ttl_secs: Option<u64>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    max_retries: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    match s.split(',').map(str::trim).collect::<Vec<_>>()[..] {
        [a, b] if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
        _ => Err(format!("expected two model ids as `A,B`, got `{s}`")),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Ingest { corpus, max_tokens, out: dest } => ingest(&corpus, max_tokens, dest.as_deref(), &mut out),
        Command::Index(IndexCommand::Build { corpus, out: dest, max_tokens }) => {
            let config = ServiceConfig { corpus: Some(corpus), max_tokens, ..cli.provider.config() };
            let backend = Backend::load(&config)?;
            backend.index.save(&dest).with_context(|| format!("writing {}", dest.display()))?;
            writeln!(out, "indexed {} chunks into {}", backend.index.len(), dest.display())?;
            Ok(())
        }
        Command::Tools(ToolsCommand::List { json }) => {
            let registry = analysis_registry();
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&registry.schema_json())?)?;
            } else {
                render::tools(&registry.describe_registry(), &mut out)?;
            }
            Ok(())
        }
        Command::Analyze(args) => analyze(args, &mut out),
        Command::Ef(args) => ef(args, &cli.provider, &mut out),
        Command::Eval(cmd) => eval(cmd, &cli.provider, &mut out),
        Command::Ask(args) => ask(args, &cli.provider, &mut out),
        Command::Serve(args) => serve(args, &cli.provider),
    }
}

fn ingest(corpus: &Path, max_tokens: usize, dest: Option<&Path>, out: &mut impl Write) -> Result<()> {
    let docs = load_corpus(corpus).with_context(|| format!("reading {}", corpus.display()))?;
    let chunks = chunk_corpus(&docs, ChunkParams { max_tokens, ..ChunkParams::default() })?;
    if let Some(dest) = dest {
        let mut file = std::io::BufWriter::new(std::fs::File::create(dest)?);
        for chunk in &chunks {
            serde_json::to_writer(&mut file, chunk)?;
            file.write_all(b"\n")?;
        }
        file.flush()?;
    }
    let tokens: usize = chunks.iter().map(|c| c.token_count).sum();
    writeln!(out, "{} documents, {} chunks, {} tokens", docs.len(), chunks.len(), tokens)?;
    Ok(())
}

fn analyze(args: AnalyzeArgs, out: &mut impl Write) -> Result<()> {
    let store = load_inventory(&args.inventory).with_context(|| format!("reading {}", args.inventory.display()))?;
    let query = InventoryQuery {
        filters: FilterSpec {
            region: args.region,
            year: args.year,
            sector: args.sector,
            subsector: args.subsector,
            pollutant: args.pollutant,
            year_range: args.from_year.zip(args.to_year),
        },
        group_key: args.group_by,
        chart: args.chart,
    };
    let output = query.run(&store)?;
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&output)?)?;
    } else if args.csv {
        render::output_csv(&output, out)?;
    } else {
        render::output_text(&output, out)?;
    }
    Ok(())
}

fn ef(args: EfArgs, provider: &ProviderArgs, out: &mut impl Write) -> Result<()> {
    let config = ServiceConfig {
        ef_guidelines: args.guidelines,
        ef_literature: args.literature,
        regions: args.regions,
        ..provider.config()
    };
    let backend = Backend::load(&config)?;
    let query = EfQuery {
        vehicle_type: args.vehicle,
        fuel_type: args.fuel,
        emission_standard: args.standard,
        region: args.region,
    };
    let outcome = backend.recommender.recommend(&query, backend.provider.as_ref())?;
    if args.json {
        let body = match &outcome {
            RecommendOutcome::Missing(missing) => json!({"complete": false, "missing": missing, "recommendations": []}),
            RecommendOutcome::Recommendations(recs) => json!({"complete": true, "missing": [], "recommendations": recs}),
        };
        writeln!(out, "{}", serde_json::to_string_pretty(&body)?)?;
        return Ok(());
    }
    match outcome {
        RecommendOutcome::Missing(missing) => {
            let flags: Vec<String> = missing.iter().map(|a| format!("--{}", render::attribute_flag(*a))).collect();
            writeln!(out, "More detail needed. Please supply: {}", flags.join(", "))?;
        }
        RecommendOutcome::Recommendations(recs) if recs.is_empty() => writeln!(out, "No matching emission factors.")?,
        RecommendOutcome::Recommendations(recs) => render::recommendations(&recs, out)?,
    }
    Ok(())
}

fn eval(cmd: EvalCommand, provider: &ProviderArgs, out: &mut impl Write) -> Result<()> {
    match cmd {
        EvalCommand::Run { benchmark, corpus, index, tau, top_k, report } => {
            if !(0.0..=1.0).contains(&tau) {
                bail!("--tau must lie in [0, 1]");
            }
            let items = load_benchmark(&benchmark).with_context(|| format!("reading {}", benchmark.display()))?;
            let mut config = ServiceConfig { corpus: Some(corpus), index, ..provider.config() };
            if let Some(k) = top_k {
                config.top_k = k;
            }
            let backend = Backend::load(&config)?;
            let result = backend.evaluate(&items, tau)?;
            if let Some(path) = report {
                std::fs::write(&path, serde_json::to_string_pretty(&result)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            render::eval_report(&result, out)?;
        }
        EvalCommand::Experts { scores, pair, json } => {
            let rows = load_expert_scores(&scores).with_context(|| format!("reading {}", scores.display()))?;
            let report = pairwise_win_rates(&rows, &pair.0, &pair.1)?;
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                render::pairwise(&report, out)?;
            }
        }
    }
    Ok(())
}

fn ask(args: AskArgs, provider: &ProviderArgs, out: &mut impl Write) -> Result<()> {
    let config = ServiceConfig {
        corpus: args.corpus,
        index: args.index,
        inventory: args.inventory,
        ..provider.config()
    };
    let backend = Backend::load(&config)?;
    let mut session = Session::new();
    let turn = backend.agent().handle(&mut session, &args.question)?;
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(turn)?)?;
    } else {
        writeln!(out, "{}", turn.answer_text)?;
        if !turn.citations.is_empty() {
            writeln!(out, "\nSources: {}", turn.citations.join(", "))?;
        }
        if let Some(chart) = &turn.chart {
            writeln!(out)?;
            render::chart(chart, out)?;
        }
    }
    Ok(())
}

fn serve(args: ServeArgs, provider: &ProviderArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = args.$field { config.$field = v; } )* };
    }
    macro_rules! set_opt {
        ($($field:ident),*) => { $( if args.$field.is_some() { config.$field = args.$field; } )* };
    }
    set!(host, port, session_ttl_secs, top_k, max_retries, max_tokens);
    set_opt!(corpus, index, inventory, ef_guidelines, ef_literature, regions, benchmark, prompts);
    if provider.provider.is_some() {
        config.provider = provider.provider.clone();
    }
    if provider.stub_fixtures.is_some() {
        config.stub_fixtures = provider.stub_fixtures.clone();
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(emagent_service::serve(config))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn pair_needs_two_models() {
        assert!(Cli::try_parse_from(["emagent", "eval", "experts", "s.csv", "--pair", "a"]).is_err());
        let cli = Cli::try_parse_from(["emagent", "eval", "experts", "s.csv", "--pair", "a,b"]).unwrap();
        let Command::Eval(EvalCommand::Experts { pair, .. }) = cli.command else { panic!() };
        assert_eq!(pair, ("a".to_string(), "b".to_string()));
    }

    #[test]
    fn year_and_range_conflict() {
        let base = ["emagent", "analyze", "--inventory", "x.csv"];
        assert!(Cli::try_parse_from(base.iter().chain(&["--year", "2020", "--from-year", "2018", "--to-year", "2020"])).is_err());
        assert!(Cli::try_parse_from(base.iter().chain(&["--from-year", "2018"])).is_err());
        assert!(Cli::try_parse_from(base.iter().chain(&["--pollutant", "XYZ"])).is_err());
        assert!(Cli::try_parse_from(base.iter().chain(&["--pollutant", "NOx", "--chart", "pie"])).is_ok());
    }
}
