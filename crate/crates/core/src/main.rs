use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use nestasp::cli::{run, Format, RunConfig};
use nestasp::engine::DEFAULT_MAX_DEPTH;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Default,
    Facts,
    JsonLines,
}

/// Evaluate a HEX-lite program and print its answer sets.
#[derive(Debug, Parser)]
#[command(name = "nestasp", version)]
struct Args {
    /// Maximum subprogram nesting depth.
    #[arg(long, env = "NESTASP_MAX_DEPTH", default_value_t = DEFAULT_MAX_DEPTH as u64,
          value_parser = clap::value_parser!(u64).range(1..))]
    max_depth: u64,

    /// Only print literals over these predicates.
    #[arg(long, value_delimiter = ',')]
    filter: Option<Vec<String>>,

    #[arg(long, value_enum, default_value = "default")]
    format: FormatArg,

    /// Report each subprogram evaluation on stderr.
    #[arg(long)]
    trace_calls: bool,

    /// Print at most this many answer sets (0 prints all).
    #[arg(short = 'n', default_value_t = 0)]
    max_answer_sets: usize,

    /// Solve independent branches in parallel.
    #[arg(long)]
    parallel: bool,

    file: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = RunConfig {
        program_path: args.file,
        max_depth: usize::try_from(args.max_depth).unwrap_or(usize::MAX),
        max_answer_sets: args.max_answer_sets,
        filter_predicates: args.filter.map(|f| f.into_iter().collect()),
        trace_calls: args.trace_calls,
        format: match args.format {
            FormatArg::Default => Format::Default,
            FormatArg::Facts => Format::Facts,
            FormatArg::JsonLines => Format::JsonLines,
        },
        parallel: args.parallel,
    };
    let stdout = io::stdout();
    let stderr = io::stderr();
    let status = run(&config, &mut stdout.lock(), &mut stderr.lock());
    let _ = io::stdout().flush();
    ExitCode::from(status)
}
