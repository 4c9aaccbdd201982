use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use advbloom_cli::config::{ConfigError, Experiment, ExperimentConfig, Format, DEFAULT_TRIALS};
use clap::{Arg, ArgAction, ArgMatches, Command};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn common_args(cmd: Command) -> Command {
    cmd.arg(Arg::new("trials").long("trials").value_parser(clap::value_parser!(u64)).help("trials per grid point"))
        .arg(Arg::new("seed").long("seed").value_parser(clap::value_parser!(u64)).help("master seed [default: 0]"))
        .arg(Arg::new("format").long("format").value_parser(["csv", "json"]).help("output format [default: csv]"))
        .arg(Arg::new("output").long("output").short('o').value_parser(clap::value_parser!(PathBuf)).help("write to a file instead of stdout"))
        .arg(Arg::new("timing").long("timing").action(ArgAction::SetTrue).help("add an elapsed_ms column"))
}

fn cli() -> Command {
    let mut cmd = Command::new("advbloom")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Seeded Bloom filter experiments")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for e in Experiment::ALL {
        let mut sub = Command::new(e.name()).about(e.about());
        for key in e.keys() {
            let mut help = key.help.to_string();
            if let Some(d) = key.default {
                help.push_str(&format!(" [default: {d}]"));
            }
            sub = sub.arg(Arg::new(key.name).long(key.name).value_name("LIST").allow_hyphen_values(true).help(help));
        }
        cmd = cmd.subcommand(common_args(sub));
    }
    cmd.subcommand(
        Command::new("config")
            .about("Run an experiment described by a JSON file")
            .arg(Arg::new("file").required(true).value_parser(clap::value_parser!(PathBuf)))
            .arg(Arg::new("output").long("output").short('o').value_parser(clap::value_parser!(PathBuf)).help("overrides the file's output")),
    )
}

fn from_flags(e: Experiment, m: &ArgMatches) -> Result<ExperimentConfig, ConfigError> {
    let trials = m.get_one::<u64>("trials").copied().unwrap_or(DEFAULT_TRIALS);
    let seed = m.get_one::<u64>("seed").copied().unwrap_or(0);
    let mut config = ExperimentConfig::from_raw(e, |k| m.get_one::<String>(k).map(String::as_str), trials, seed)?;
    if let Some(f) = m.get_one::<String>("format") {
        config.format = Format::from_name(f)?;
    }
    config.output = m.get_one::<PathBuf>("output").cloned();
    config.timing = m.get_flag("timing");
    Ok(config)
}

fn load(matches: &ArgMatches) -> Result<ExperimentConfig, ConfigError> {
    let (name, sub) = matches.subcommand().expect("subcommand required");
    if name == "config" {
        let path = sub.get_one::<PathBuf>("file").expect("required");
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File(format!("{}: {e}", path.display())))?;
        let mut config = ExperimentConfig::from_json(&text)?;
        if let Some(o) = sub.get_one::<PathBuf>("output") {
            config.output = Some(o.clone());
        }
        return Ok(config);
    }
    from_flags(Experiment::from_name(name)?, sub)
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let config = match load(&matches) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let out = advbloom_cli::run(&config);
    let bytes = out.render(config.format);
    let written = match &config.output {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::stdout().lock().write_all(&bytes),
    };
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    for r in out.records.iter().filter(|r| !r.is_ok()) {
        if let Some(advbloom_cli::Value::Text(msg)) = r.get("error") {
            eprintln!("error: grid point failed: {msg}");
        }
    }
    if out.failures() > 0 {
        ExitCode::from(EXIT_RUNTIME)
    } else {
        ExitCode::SUCCESS
    }
}
