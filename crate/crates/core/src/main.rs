use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tirfuzz::cli::{cmd_analyze, cmd_fuzz, cmd_replay, FuzzOverrides};

/// Directed grey-box fuzzer for TIR programs.
#[derive(Parser)]
#[command(name = "tirfuzz", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the static analyzer and emit the JSON report.
    Analyze {
        /// TIR source file.
        program: PathBuf,
        /// Target location `func:block[:index]`; repeatable.
        #[arg(long = "target", required = true)]
        targets: Vec<String>,
        /// Report path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for Graphviz dumps of the call graph and VFG.
        #[arg(long)]
        dot_dir: Option<PathBuf>,
    },
    /// Run a fuzzing campaign against the targets.
    Fuzz {
        /// TIR source file.
        program: PathBuf,
        /// Target location `func:block[:index]`; repeatable.
        #[arg(long = "target", required = true)]
        targets: Vec<String>,
        /// Campaign config file (`key = value` lines).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for the report and crash inputs.
        #[arg(long, default_value = "tirfuzz-out")]
        out_dir: PathBuf,
        /// RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Budget: executions in virtual-time mode, seconds otherwise.
        #[arg(long)]
        time_budget: Option<u64>,
        /// Cooling time-to-exploitation, same unit as the budget.
        #[arg(long)]
        t_x: Option<f64>,
        /// Per-execution instruction limit.
        #[arg(long)]
        step_limit: Option<u64>,
        /// Coverage bitmap size (power of two).
        #[arg(long)]
        bitmap_size: Option<usize>,
        /// Length of the initial all-zero seed.
        #[arg(long)]
        seed_len: Option<usize>,
        /// Maximum mutated input length.
        #[arg(long)]
        max_input_len: Option<usize>,
        /// Count time in executions instead of wall-clock seconds.
        #[arg(long)]
        virtual_time: bool,
        /// End the campaign at the first crash.
        #[arg(long)]
        stop_on_first_crash: bool,
        /// Disable one component: nodist, novalue, or noselect.
        #[arg(long)]
        ablation: Option<String>,
    },
    /// Execute one input and print outcome, trace, and feedback.
    Replay {
        /// TIR source file.
        program: PathBuf,
        /// Raw input file.
        input: PathBuf,
        /// Target location `func:block[:index]`; repeatable.
        #[arg(long = "target", required = true)]
        targets: Vec<String>,
        /// Per-execution instruction limit.
        #[arg(long, default_value_t = 100_000)]
        step_limit: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Analyze { program, targets, out, dot_dir } => {
            cmd_analyze(&program, &targets, out.as_deref(), dot_dir.as_deref())
        }
        Command::Fuzz {
            program,
            targets,
            config,
            out_dir,
            seed,
            time_budget,
            t_x,
            step_limit,
            bitmap_size,
            seed_len,
            max_input_len,
            virtual_time,
            stop_on_first_crash,
            ablation,
        } => {
            let over = FuzzOverrides {
                seed,
                time_budget,
                t_x,
                step_limit,
                bitmap_size,
                virtual_time,
                stop_on_first_crash,
                ablation,
                seed_len,
                max_input_len,
            };
            cmd_fuzz(&program, &targets, config.as_deref(), &out_dir, &over)
        }
        Command::Replay { program, input, targets, step_limit } => {
            cmd_replay(&program, &targets, &input, step_limit)
        }
    };
    ExitCode::from(code as u8)
}
