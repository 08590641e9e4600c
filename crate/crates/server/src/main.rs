use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use clinanno_server::cli;
use clinanno_server::Config;

#[derive(Parser)]
#[command(name = "clinanno", version, about = "Double annotation of clinical narratives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Draw annotator pairs and an adjudicator for a batch of documents.
    Assign(cli::AssignArgs),
    /// Agreement report for one double-annotated document.
    Iaa(cli::IaaArgs),
    /// Split a directory of gold exports into gold and platinum.
    Segment(cli::SegmentArgs),
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();

    let result = match Cli::parse().command {
        Command::Serve { config } => Config::load(config.as_deref())
            .map_err(anyhow::Error::from)
            .and_then(clinanno_server::serve),
        Command::Assign(args) => cli::assign(&args).map(|out| println!("{out}")),
        Command::Iaa(args) => cli::iaa(&args).map(|out| println!("{out}")),
        Command::Segment(args) => cli::segment(&args).map(|out| println!("{out}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
