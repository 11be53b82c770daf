mod args;
mod commands;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::error::CliResult;
use crate::output::RunOutput;

fn run(cli: &Cli) -> CliResult<bool> {
    let name = match &cli.command {
        Command::Constants(_) => "constants",
        Command::Kernel(_) => "kernel",
        Command::Profile(_) => "profile",
        Command::Ode(_) => "ode",
        Command::Evolve(_) => "evolve",
        Command::Fit(_) => "fit",
        Command::Report(_) => "report",
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(usize::from(cli.workers))
        .build()
        .map_err(|e| error::usage(e.to_string()))?;
    let dir = cli.out.join(cli.label.as_deref().unwrap_or(name));
    let mut out = RunOutput::create(dir, name)?;
    pool.install(|| match &cli.command {
        Command::Constants(a) => commands::constants(a, &mut out),
        Command::Kernel(a) => commands::kernel(a, &mut out),
        Command::Profile(a) => commands::profile(a, &mut out),
        Command::Ode(a) => commands::ode(a, &mut out),
        Command::Evolve(a) => commands::evolve_run(a, &mut out),
        Command::Fit(a) => commands::fit(a, &mut out),
        Command::Report(a) => commands::report(a, &cli.out, &mut out),
    })?;
    out.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(passed) if passed || !cli.strict => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("strict mode: at least one diagnostic gate failed");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
