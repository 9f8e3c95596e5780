//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for user errors (bad input, usage, too little
//! data), 2 for engine failures.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;

use birdspot_core::geo::GeoPoint;
use birdspot_core::ingest::canonicalize_species;
use birdspot_core::verifier::{Answer, Status};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::{EngineConfig, PolicyKind};
use crate::engine::{load_dataset_path, train_models, Engine};
use crate::error::{Error, ErrorKind, Result};
use crate::events::{read_event_log, replay, write_event_log};
use crate::formats::{format_timestamp, parse_timestamp, read_route, write_dataset_cache, write_model, write_rarity, RARITY_FILE};
use crate::server::{serve, AppState};
use crate::simulate::{simulate, SIM_PLAYER};

#[derive(Debug, Parser)]
#[command(name = "birdspot", version, about = "Location-based bird-spotting game engine")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset cache, checklist file or checklist directory.
    #[arg(long, global = true, visible_alias = "dataset")]
    pub data: Option<PathBuf>,
    /// Directory holding species models and rarity.csv.
    #[arg(long, global = true)]
    pub models: Option<PathBuf>,
    /// Species attribute matrix (CSV).
    #[arg(long, global = true)]
    pub attributes: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse checklist files and write a dataset cache.
    Ingest(IngestArgs),
    /// Fit per-species models and the rarity table.
    Train(TrainArgs),
    /// Rank species likely to be seen at a place and time.
    Suggest(SuggestArgs),
    /// Run a verification dialogue for a claimed sighting.
    Verify(VerifyArgs),
    /// Simulate a hike along a route.
    Simulate(SimulateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Replay an event log and print the player's state.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Checklist files or directories of `*.csv` files; `--data` also works.
    pub inputs: Vec<PathBuf>,
    /// Where to write the dataset cache.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Species to train (repeatable); all species when omitted.
    #[arg(long)]
    pub species: Vec<String>,
    /// Output directory; defaults to the configured models path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SuggestArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub lat: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lon: f64,
    /// Local time, `YYYY-MM-DDTHH:MM[:SS]`.
    #[arg(long)]
    pub time: String,
    #[arg(long, default_value_t = 1)]
    pub level: u32,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub claimed: String,
    /// Photo attributes as comma-separated 0/1 values, in matrix column order.
    #[arg(long)]
    pub photo: String,
    /// Answers as comma-separated y/n; read from stdin once exhausted.
    #[arg(long)]
    pub answers: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Truthful,
    Noisy,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Route JSON file.
    #[arg(long)]
    pub route: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long)]
    pub p_flip: Option<f64>,
    #[arg(long)]
    pub level: Option<u32>,
    /// Start time, `YYYY-MM-DDTHH:MM[:SS]`.
    #[arg(long)]
    pub start: Option<String>,
    /// Write the transcript here instead of stdout.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Write the game event log here.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub listen: Option<SocketAddr>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Event log (JSON lines).
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long, default_value = SIM_PLAYER)]
    pub player: String,
}

/// Run the CLI and return the process exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            return match e.kind() {
                K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{}", e.render());
                    if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand {
                        1
                    } else {
                        0
                    }
                }
                _ => {
                    let text = e.render().to_string();
                    let first = text.lines().next().unwrap_or("invalid arguments");
                    let _ = writeln!(err, "{first}");
                    let _ = writeln!(err, "try `birdspot --help` or `birdspot <command> --help`");
                    1
                }
            };
        }
    };
    match execute(cli, input, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e.kind() {
                ErrorKind::User => 1,
                ErrorKind::Engine => 2,
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<EngineConfig> {
    let mut config = match &cli.config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    if let Some(p) = &cli.data {
        config.paths.data = p.clone();
    }
    if let Some(p) = &cli.models {
        config.paths.models = p.clone();
    }
    if let Some(p) = &cli.attributes {
        config.paths.attributes = p.clone();
    }
    config.validate()?;
    Ok(config)
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn print_json(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    writeln!(out, "{text}").map_err(io_out)
}

fn execute(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<()> {
    let config = load_config(&cli)?;
    match &cli.command {
        Command::Ingest(a) => ingest(cli.data.as_ref(), a, out),
        Command::Train(a) => train(&config, a, out),
        Command::Suggest(a) => suggest(config, a, cli.json, out),
        Command::Verify(a) => verify(config, a, cli.json, input, out),
        Command::Simulate(a) => run_simulation(config, a, cli.json, out),
        Command::Serve(a) => run_server(config, a),
        Command::Report(a) => report(a, out),
    }
}

fn ingest(data: Option<&PathBuf>, a: &IngestArgs, out: &mut dyn Write) -> Result<()> {
    let mut inputs = a.inputs.clone();
    inputs.extend(data.cloned());
    if inputs.is_empty() {
        return Err(Error::Usage("nothing to ingest; pass checklist files or `--data <dir>`".into()));
    }
    let dataset = crate::checklist_file::load_dataset_from(&inputs)?;
    let dest = &a.out;
    write_dataset_cache(dest, &dataset)?;
    writeln!(
        out,
        "ingested {} checklists ({} species) into {}",
        dataset.checklists().len(),
        dataset.species().count(),
        dest.display()
    )
    .map_err(io_out)
}

fn train(config: &EngineConfig, a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let dataset = load_dataset_path(&config.paths.data)?;
    let species = a
        .species
        .iter()
        .map(|s| canonicalize_species(s).map_err(|e| Error::Usage(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let (models, rarity) = train_models(&dataset, &species, config)?;
    let dir = a.out.clone().unwrap_or_else(|| config.paths.models.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for model in models.values() {
        let path = write_model(&dir, model)?;
        writeln!(out, "wrote {}", path.display()).map_err(io_out)?;
    }
    let path = dir.join(RARITY_FILE);
    write_rarity(&path, &rarity)?;
    writeln!(out, "wrote {}", path.display()).map_err(io_out)
}

fn suggest(config: EngineConfig, a: &SuggestArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let ts = parse_timestamp(&a.time).map_err(Error::Usage)?;
    let point = GeoPoint::new(a.lat, a.lon)?;
    let engine = Engine::load(config)?;
    let suggestions = engine.suggest(point, ts, a.level)?;
    if json {
        return print_json(out, &json!({ "suggestions": suggestions }));
    }
    for s in &suggestions {
        writeln!(
            out,
            "{:<28} tier {}  p {:.4}  freq {:.3}  nearest {:.3} km",
            s.species,
            s.tier.get(),
            s.probability,
            s.local_frequency,
            s.distance_km
        )
        .map_err(io_out)?;
    }
    Ok(())
}

fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.split(',')
        .map(|t| match t.trim() {
            "1" => Ok(true),
            "0" => Ok(false),
            other => Err(Error::Usage(format!("photo attribute `{other}` is not 0 or 1"))),
        })
        .collect()
}

fn parse_answer(s: &str) -> Result<Answer> {
    match s.trim().to_ascii_lowercase().as_str() {
        "y" | "yes" | "1" | "true" => Ok(Answer::Yes),
        "n" | "no" | "0" | "false" => Ok(Answer::No),
        other => Err(Error::Usage(format!("answer `{other}` is not y or n"))),
    }
}

fn verify(config: EngineConfig, a: &VerifyArgs, json: bool, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<()> {
    let claimed = canonicalize_species(&a.claimed).map_err(|e| Error::Usage(e.to_string()))?;
    let photo = parse_bits(&a.photo)?;
    let engine = Engine::load(config)?;
    let mut session = engine.open_verification("cli", &claimed, &photo)?;
    let mut scripted = match &a.answers {
        Some(s) => s.split(',').map(parse_answer).collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    }
    .into_iter();

    let mut transcript = Vec::new();
    while session.status() == Status::Open {
        let Some(attribute) = session.next_question()?.map(str::to_string) else { break };
        let answer = match scripted.next() {
            Some(ans) => ans,
            None => {
                if !json {
                    write!(out, "{attribute}? [y/n] ").map_err(io_out)?;
                    out.flush().map_err(io_out)?;
                }
                let mut line = String::new();
                let n = input.read_line(&mut line).map_err(|e| Error::io("<stdin>", e))?;
                if n == 0 {
                    return Err(Error::Usage(format!("no answer for `{attribute}`")));
                }
                parse_answer(&line)?
            }
        };
        session.submit_answer(&attribute, answer)?;
        transcript.push(json!({
            "attribute": attribute,
            "answer": answer,
            "posterior_claimed": session.posterior_claimed(),
        }));
    }

    if json {
        return print_json(
            out,
            &json!({
                "species": claimed,
                "status": session.status(),
                "posterior_claimed": session.posterior_claimed(),
                "questions": transcript,
            }),
        );
    }
    let status = serde_json::to_value(session.status()).expect("status serializes");
    writeln!(
        out,
        "{claimed}: {} (posterior {:.4} after {} questions)",
        status.as_str().unwrap_or_default(),
        session.posterior_claimed(),
        transcript.len()
    )
    .map_err(io_out)
}

fn run_simulation(mut config: EngineConfig, a: &SimulateArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let sim = &mut config.simulate;
    if let Some(seed) = a.seed {
        sim.seed = seed;
    }
    if let Some(policy) = a.policy {
        sim.policy = match policy {
            PolicyArg::Truthful => PolicyKind::Truthful,
            PolicyArg::Noisy => PolicyKind::Noisy,
        };
    }
    if let Some(p) = a.p_flip {
        sim.p_flip = p;
    }
    if let Some(level) = a.level {
        sim.level = level;
    }
    if let Some(start) = &a.start {
        sim.start = parse_timestamp(start).map_err(Error::Usage)?;
    }
    let sim_cfg = config.simulate.clone();
    let route = read_route(&a.route)?;
    let engine = Engine::load(config)?;
    let result = simulate(&engine, &route, &sim_cfg)?;

    if let Some(path) = &a.events {
        write_event_log(path, &result.events)?;
    }
    let transcript = result.render_transcript();
    match &a.transcript {
        Some(path) => std::fs::write(path, &transcript).map_err(|e| Error::io(path, e))?,
        None if !json => return out.write_all(transcript.as_bytes()).map_err(io_out),
        None => {}
    }
    if json {
        return print_json(
            out,
            &json!({
                "attempts": result.attempts,
                "verified": result.verified,
                "points": result.player.points,
                "level": result.player.level,
                "report": result.report,
            }),
        );
    }
    let r = &result.report;
    writeln!(
        out,
        "walked {:.3} km of {:.3} km; spotted {}/{} expected; {} of {} verifications passed; {} points, level {}",
        r.trace_distance_km,
        r.route_length_km,
        r.spotted.intersection(&r.expected_species).count(),
        r.expected_species.len(),
        result.verified,
        result.attempts,
        result.player.points,
        result.player.level
    )
    .map_err(io_out)
}

fn run_server(mut config: EngineConfig, a: &ServeArgs) -> Result<()> {
    if let Some(addr) = a.listen {
        config.server.listen = addr;
    }
    let addr = config.server.listen;
    let events_dir = config.paths.events.clone();
    if let Some(dir) = &events_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let engine = Engine::load(config)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
    runtime
        .block_on(serve(AppState::new(engine, events_dir), addr))
        .map_err(|e| Error::Usage(format!("cannot serve on {addr}: {e}")))
}

fn report(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let lines = read_event_log(&a.events)?;
    let record = replay(&a.player, &lines)?;
    let last = lines.last().map(|l| format_timestamp(l.ts));
    print_json(
        out,
        &json!({
            "player_id": record.player.id,
            "points": record.player.points,
            "level": record.player.level,
            "captures": record.player.captures,
            "last_event": last,
            "reports": record.reports,
        }),
    )
}
