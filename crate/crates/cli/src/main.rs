mod commands;
mod config;
mod error;

use std::path::Path;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};

use config::{flag_name, Settings, ENV_PREFIX, KEYS};
use error::{CliError, EXIT_INPUT, EXIT_OK};

fn cli() -> Command {
    let mut cmd = Command::new("txgraph")
        .about("Bitcoin blockchain to graph ETL")
        .after_help(format!(
            "Settings are layered: defaults, --config file, {ENV_PREFIX}<KEY> environment variables, flags.\n\
             Run `txgraph config dump` for every key and its default."
        ))
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .global(true)
                .help("flat key = value settings file"),
        )
        .subcommand(Command::new("build").about("ingest, build and serialize a height range"))
        .subcommand(Command::new("append").about("extend an existing graph with later heights"))
        .subcommand(Command::new("sample").about("extract labeled subgraphs from a serialized graph"))
        .subcommand(Command::new("profile").about("per-block statistics and degree summaries"))
        .subcommand(
            Command::new("config")
                .about("inspect settings")
                .subcommand_required(true)
                .subcommand(Command::new("dump").about("print effective settings")),
        );
    for k in KEYS {
        let long: &'static str = flag_name(k.name).leak();
        cmd = cmd.arg(Arg::new(k.name).long(long).global(true).help(k.help));
    }
    cmd
}

fn settings(m: &ArgMatches) -> Result<Settings, CliError> {
    let mut s = Settings::defaults();
    if let Some(path) = m.get_one::<String>("config") {
        s.merge_file(Path::new(path))?;
    }
    s.merge_env(std::env::vars())?;
    // global args resolve on the leaf subcommand
    let mut leaf = m;
    while let Some((_, sub)) = leaf.subcommand() {
        leaf = sub;
    }
    for k in KEYS {
        if let Some(v) = leaf.get_one::<String>(k.name) {
            s.set(k.name, v)?;
        }
    }
    Ok(s)
}

fn run(m: &ArgMatches) -> Result<(), CliError> {
    let s = settings(m)?;
    let threads: usize = s.parse("parallelism")?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match m.subcommand() {
        Some(("build", _)) => commands::build(&s),
        Some(("append", _)) => commands::append(&s),
        Some(("sample", _)) => commands::sample_cmd(&s),
        Some(("profile", _)) => commands::profile(&s),
        Some(("config", _)) => {
            print!("{}", s.dump());
            Ok(())
        }
        _ => unreachable!("subcommand required"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let m = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { EXIT_OK as u8 });
        }
    };
    match run(&m) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
