//! `rk`: chromatic subdivisions, the `R_k` affine task, and exhaustive
//! checks of the simulations between `k`-set consensus, `k`-concurrency
//! and `R_k*`.
//!
//! Exit status: 0 when every checked property holds, 1 on a violation
//! (a counterexample file is written), 2 on a usage error.

mod alg1;
mod alg2;
mod analysis;
mod common;
mod figures;
mod replay;

use alg1::{Alg1Args, Alg1Check, RuleArg, Schedule};
use alg2::{Alg2Args, Alg2Check, ClientSpec, ParticipationArg, StreamSpec};
use analysis::{PatternSpec, TaskSpec};
use clap::{Parser, Subcommand};
use common::{Outcome, BUDGET_VAR};
use figures::Format;
use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rk", version, about, after_help = format!(
    "Enumeration sizes are capped by {BUDGET_VAR} (default 1000000 facets)."
))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// The m-th iterated standard chromatic subdivision of the n-process simplex.
    Chr {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        out: Format,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// The affine task R_k; as SVG, Chr² with the R_k facets filled.
    Rk {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        out: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Contention classes, R_k membership and leaders of every facet of Chr².
    Contention {
        #[arg(long)]
        n: usize,
        /// Leaders are computed for this k.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Checks at most k leaders and a visible leader on every R_k run and
    /// undecided subset.
    Leaders {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        out: Format,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "counterexample.json")]
        counterexample: PathBuf,
    },
    /// Runs k-set consensus to k-process memory (Algorithm 1).
    Alg1 {
        /// Simulators.
        #[arg(long)]
        n: usize,
        /// Simulated memory slots.
        #[arg(long)]
        k: usize,
        /// `exhaustive` or `seed:<u64>`.
        #[arg(long, default_value = "exhaustive")]
        schedule: Schedule,
        /// Simulation rounds per simulator.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Alg1Check::Claims, Alg1Check::Linearize, Alg1Check::Progress])]
        check: Vec<Alg1Check>,
        #[arg(long, value_enum, default_value_t = RuleArg::AdoptedOnly)]
        commit_rule: RuleArg,
        /// Seeded schedules sampled, besides the round-robin one, for the
        /// progress check under `exhaustive`.
        #[arg(long, default_value_t = 200)]
        samples: u64,
        /// Trace file (JSON lines) of a seeded schedule.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "counterexample.jsonl")]
        counterexample: PathBuf,
    },
    /// Runs read-write memory and k-set agreement in R_k* (Algorithm 2).
    Alg2 {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// `kset`, `consensus`, `echo` or `file:<path>`.
        #[arg(long, default_value = "kset")]
        client: ClientSpec,
        /// `exhaustive`, `seed:<u64>` or `replay:<path>`.
        #[arg(long, default_value = "exhaustive")]
        stream: StreamSpec,
        #[arg(long, default_value_t = 6)]
        rounds: usize,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Alg2Check::Claims, Alg2Check::Agreement, Alg2Check::Linearize, Alg2Check::Progress])]
        check: Vec<Alg2Check>,
        /// Comma-separated inputs; defaults to 1..=n.
        #[arg(long, value_delimiter = ',')]
        inputs: Option<Vec<u64>>,
        #[arg(long, value_enum, default_value_t = ParticipationArg::All)]
        participation: ParticipationArg,
        /// Round-by-round trace (JSON) of a seeded or replayed stream.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "counterexample.json")]
        counterexample: PathBuf,
    },
    /// Searches for a decision map on iterations of an affine pattern.
    Solve {
        /// `consensus`, `echo`, `kset:<k>` or `file:<path>`.
        #[arg(long)]
        task: TaskSpec,
        #[arg(long)]
        n: Option<usize>,
        /// Input and output values of a builtin task.
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        values: Vec<u64>,
        /// `ordered`, `rk:<k>`, `ktas:<k>` or `chr:<rounds>`.
        #[arg(long)]
        pattern: PatternSpec,
        #[arg(long, default_value_t = 2)]
        max_rounds: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Connectivity of the iterations of a pattern and what it says about consensus.
    Connectivity {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "ordered")]
        pattern: PatternSpec,
        #[arg(long, default_value_t = 3)]
        t_max: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-executes a trace or counterexample file.
    Replay {
        file: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn dispatch(command: Command) -> common::CmdResult {
    match command {
        Command::Chr { n, m, out, output } => figures::chr(n, m, out, output.as_ref()),
        Command::Rk { n, k, out, output } => figures::rk(n, k, out, output.as_ref()),
        Command::Contention { n, k, output } => figures::contention(n, k, output.as_ref()),
        Command::Leaders {
            n,
            k,
            out,
            output,
            counterexample,
        } => figures::leaders_cmd(n, k, out, output.as_ref(), &counterexample),
        Command::Alg1 {
            n,
            k,
            schedule,
            depth,
            check,
            commit_rule,
            samples,
            trace_out,
            output,
            counterexample,
        } => alg1::run(Alg1Args {
            n,
            k,
            schedule,
            depth,
            checks: check,
            rule: commit_rule,
            samples,
            trace_out,
            output,
            counterexample,
        }),
        Command::Alg2 {
            n,
            k,
            client,
            stream,
            rounds,
            check,
            inputs,
            participation,
            trace_out,
            output,
            counterexample,
        } => alg2::run(Alg2Args {
            n,
            k,
            client,
            stream,
            rounds,
            checks: check,
            inputs,
            participation,
            trace_out,
            output,
            counterexample,
        }),
        Command::Solve {
            task,
            n,
            values,
            pattern,
            max_rounds,
            output,
        } => analysis::solve(&task, n, &values, &pattern, max_rounds, output.as_ref()),
        Command::Connectivity {
            n,
            pattern,
            t_max,
            output,
        } => analysis::connectivity(n, &pattern, t_max, output.as_ref()),
        Command::Replay { file, output } => replay::run(&file, output.as_ref()),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome::Holds) => 0,
        Ok(Outcome::Violated) => 1,
        Err(e) => {
            eprintln!("rk: {}", e.0);
            2
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

#[cfg(test)]
mod tests;
