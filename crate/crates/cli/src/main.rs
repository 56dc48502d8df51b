mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use horocell::suite::{self, SuiteContext};
use serde_json::json;

use crate::error::CliError;
use crate::run::ResultRecord;

#[derive(Debug, Parser)]
#[command(name = "horocell", version, about = "Frame-bundle convolutions and diffusion means on manifolds")]
struct Cli {
    /// Worker threads for the parallel Monte-Carlo loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment config and write its result record.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Replace the seed given in the config.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run an acceptance bundle and print its pass/fail table.
    Suite {
        /// flat-reductions, sphere-oracles, theorem1, wdm or all.
        name: String,
        /// Also write the reports as JSON into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, value_enum, hide = true)]
        mutation: Option<Mutation>,
    },
    /// Check that a result record belongs to a config.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        result: PathBuf,
        /// Also re-run the config and require bitwise-identical values.
        #[arg(long)]
        rerun: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mutation {
    ChristoffelSignFlip,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HOROCELL_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", json!({ "error_class": e.class(), "message": e.to_string() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8, CliError> {
    match cmd {
        Command::Run { config, out_dir, seed_override } => {
            let loaded = config::load(&config)?;
            let written = run::run(&config, &loaded, &out_dir, seed_override)?;
            println!("{}", written.json.display());
            if let Some(csv) = written.csv {
                println!("{}", csv.display());
            }
            Ok(0)
        }
        Command::Suite { name, out_dir, mutation } => {
            let ctx = match mutation {
                None => SuiteContext::reference(),
                Some(Mutation::ChristoffelSignFlip) => SuiteContext::christoffel_sign_flip(),
            };
            let reports = suite::run_suite(&name, &ctx).map_err(|e| match e {
                horocell::Error::UnknownSuite(s) => CliError::UnknownSuite(s),
                other => error::failed(other),
            })?;
            for r in &reports {
                println!("{r}");
            }
            if name == "theorem1" {
                print_commutator_table(&ctx)?;
            }
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                let path = dir.join(format!("suite_{name}.json"));
                let text = serde_json::to_string_pretty(&reports).expect("reports serialize");
                std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
            }
            let failed = reports.iter().filter(|r| !r.passed()).count();
            println!("{} of {} criteria passed", reports.len() - failed, reports.len());
            Ok(if failed == 0 { 0 } else { 1 })
        }
        Command::Verify { config, result, rerun } => {
            let loaded = config::load(&config)?;
            let text = std::fs::read_to_string(&result).map_err(|e| CliError::io(&result, e))?;
            let record: ResultRecord =
                serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(format!("result record: {e}")))?;
            let mut ok = record.config_hash == loaded.hash;
            println!("config_hash {} (record {}, config {})", if ok { "match" } else { "MISMATCH" }, record.config_hash, loaded.hash);
            if rerun && ok {
                let (again, _) = run::execute(&loaded, Some(record.seed))?;
                let same = again.values == record.values && again.stderr == record.stderr;
                println!("values {}", if same { "reproduced" } else { "DIFFER" });
                ok &= same;
            }
            Ok(if ok { 0 } else { 1 })
        }
    }
}

/// Commutator defect against the bracket term on the sphere for each radius.
fn print_commutator_table(ctx: &SuiteContext) -> Result<(), CliError> {
    let rows = suite::commutator_table(ctx.sphere.as_ref()).map_err(error::failed)?;
    println!("{:>6}  {:>14}  {:>14}  {:>8}", "r", "defect", "bracket_term", "ratio");
    for (r, defect, bracket) in rows {
        println!("{r:>6}  {defect:>14.6e}  {bracket:>14.6e}  {:>8.4}", defect / bracket);
    }
    Ok(())
}
