use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rflab::acceptance::{run_suite, Suite, CRITERIA};
use rflab_cli::config::CheckId;
use rflab_cli::{run_command, EXIT_CHECK_FAILURE, EXIT_CONFIG_ERROR, EXIT_OK};

#[derive(Parser)]
#[command(name = "lab", version, about = "Entropy and reduced-volume checks on Ricci flow testbeds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenarios of a JSON config and write reports.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "lab-out")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the acceptance suite and print one verdict line per criterion.
    Accept {
        #[arg(long, default_value = "fast")]
        suite: Suite,
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
    /// List check identifiers, model kinds and acceptance criteria.
    List,
}

fn accept(suite: Suite, only: Vec<usize>) -> i32 {
    let ids: Vec<usize> = if only.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { only };
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
        eprintln!("unknown criterion {bad}");
        return EXIT_CONFIG_ERROR;
    }
    let start = Instant::now();
    let results = run_suite(suite, &ids);
    for r in &results {
        println!("{}", r.summary_line());
        for line in r.detail_lines() {
            println!("        {line}");
        }
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("{} of {} criteria passed in {:.1} s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILURE
    }
}

fn list() {
    println!("checks:");
    for c in CheckId::ALL {
        println!("  {:<12} {} (default tolerance {:e})", c.name(), c.describe(), c.default_tolerance());
    }
    println!("models: hyperbolic, model_space, heisenberg, round_sphere, homogeneous, torus");
    println!("acceptance criteria:");
    for (id, title) in CRITERIA {
        println!("  {id:>2} {title}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, threads } => run_command(&config, &out, threads),
        Command::Accept { suite, only } => accept(suite, only),
        Command::List => {
            list();
            EXIT_OK
        }
    };
    ExitCode::from(code as u8)
}
