use std::io::BufReader;
use std::process::ExitCode;

use clap::Parser;

use fae_cli::config::{Cli, Command, ExplainArgs};
use fae_cli::explain::{run_explain, write_plot_data};
use fae_cli::setup::resolve_model;
use fae_cli::toy_table::{compute_toy_table, mismatches, render};
use fae_cli::{audit, emit, CliError, EXIT_OK};
use fae_core::models::serve_stdio;
use fae_core::report::to_json_string;
use fae_core::Error;

fn explain(args: &ExplainArgs) -> Result<(), CliError> {
    let run = || -> Result<(), CliError> {
        let out = run_explain(args)?;
        let text = to_json_string(&out.report)?;
        emit(args.output.as_deref(), &text)?;
        if let Some(path) = &args.plot_data {
            let file = std::fs::File::create(path)?;
            write_plot_data(&out.sample, &out.report.features, std::io::BufWriter::new(file))?;
        }
        Ok(())
    };
    match args.threads {
        Some(0) => Err(Error::InvalidArgument("--threads must be at least 1".into()).into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Explain(args) => explain(&args),
        Command::ToyTable(args) => {
            let cells = compute_toy_table()?;
            print!("{}", render(&cells));
            if let Some(path) = &args.output {
                emit(Some(path), &to_json_string(&cells)?)?;
            }
            let bad = mismatches(&cells);
            if bad.is_empty() {
                Ok(())
            } else {
                Err(CliError::ToyMismatch(bad))
            }
        }
        Command::AxiomAudit(args) => {
            let report = audit::run_audit(&args)?;
            emit(args.output.as_deref(), &to_json_string(&report)?)?;
            Ok(())
        }
        Command::ServeModel(args) => {
            let model = resolve_model(&args.model)?;
            let stdin = BufReader::new(std::io::stdin().lock());
            serve_stdio(model.as_ref(), stdin, std::io::stdout().lock())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("{}", e.render());
            ExitCode::from(e.exit_code())
        }
    }
}
