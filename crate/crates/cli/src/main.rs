use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use entropy_phase_cli::acceptance::{self, Reference};
use entropy_phase_cli::{execute, write_outputs, Cli, CliError, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log_level).init();

    if let Command::Selftest(args) = &cli.command {
        let report = if args.json {
            let report = acceptance::run_all(&Reference::default());
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            report
        } else {
            let report = acceptance::run_with(&Reference::default(), |c| println!("{c}"));
            for failed in report.failures() {
                eprintln!("failed: criterion {} ({})", failed.id, failed.title);
            }
            report
        };
        return ExitCode::from(report.exit_code() as u8);
    }

    let result = execute(&cli.command).and_then(|out| {
        write_outputs(&cli.command, &out)?;
        Ok(out)
    });
    match result.and_then(|out| out.deferred.map_or(Ok(()), |msg| Err(CliError::Calibration(msg)))) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
