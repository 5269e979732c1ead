//! `efq` — evaluate FO(𝒬) formulas over finite structures, solve the
//! comparison and formula-size games, synthesize minimal separators, list
//! type partitions, check quantifier invariance, and play any game
//! interactively against the solved optimal opponent.
//!
//! Exit codes: 0 = completed, 1 = input error, 2 = Player II wins under
//! `--expect-player-i`, 3 = a resource cap refused the instance.

mod commands;
mod play;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "efq",
    about = "First-order logic with generalized quantifiers: evaluation, comparison games, formula-size games, synthesis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a formula on a structure under an assignment.
    Eval(EvalArgs),
    /// Solve the round-based comparison game between two structures.
    EfGame(EfGameArgs),
    /// Solve the class formula-size game between two classes of contexts.
    SizeGame(SizeGameArgs),
    /// Solve the model-pair formula-size game between two structures.
    PairGame(PairGameArgs),
    /// Solve the weak formula-size game between two classes.
    WeakGame(WeakGameArgs),
    /// Synthesize a minimal separating formula by exhaustive enumeration.
    Synth(SynthArgs),
    /// List the joint type partition of one or more structures.
    Types(TypesArgs),
    /// Play one side of a game against the solved optimal opponent.
    Play(PlayArgs),
    /// Check a quantifier for isomorphism invariance.
    CheckQuantifier(CheckQuantifierArgs),
}

#[derive(Args)]
struct EvalArgs {
    /// Workspace JSON file (vocabulary, structures, assignments, quantifiers, caps).
    #[arg(short, long)]
    workspace: PathBuf,
    /// Structure to evaluate on.
    #[arg(short, long)]
    structure: String,
    /// Named assignment from the workspace.
    #[arg(short, long)]
    assignment: Option<String>,
    /// Inline assignment, e.g. `x=0,y=2`; entries override the named assignment.
    #[arg(long)]
    assign: Option<String>,
    /// Formula text, e.g. `exactly=3 x. (B(x)|R(x))`.
    formula: String,
    /// Print the extension of each quantified subformula closed at the root.
    #[arg(long)]
    trace: bool,
    /// Emit a machine-readable JSON report (includes the workspace).
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EfGameArgs {
    #[arg(short, long)]
    workspace: PathBuf,
    /// Left structure (`NAME` or `NAME:ASSIGNMENT`).
    #[arg(long)]
    left: String,
    /// Right structure (`NAME` or `NAME:ASSIGNMENT`).
    #[arg(long)]
    right: String,
    /// Number of rounds (required unless --find-min).
    #[arg(long)]
    rounds: Option<usize>,
    /// Scan for the least number of rounds at which Player I wins.
    #[arg(long)]
    find_min: bool,
    /// Print a sample optimal-play transcript.
    #[arg(long)]
    transcript: bool,
    #[arg(long)]
    json: bool,
    /// Exit with code 2 if Player II wins.
    #[arg(long)]
    expect_player_i: bool,
}

#[derive(Args)]
struct SizeGameArgs {
    #[arg(short, long)]
    workspace: PathBuf,
    /// Comma-separated left class, entries `NAME` or `NAME:ASSIGNMENT`.
    #[arg(long)]
    left_class: String,
    /// Comma-separated right class.
    #[arg(long)]
    right_class: String,
    /// Size budget (required unless --find-min).
    #[arg(long)]
    budget: Option<usize>,
    /// Scan for the least budget at which Player I wins.
    #[arg(long)]
    find_min: bool,
    #[arg(long)]
    transcript: bool,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    expect_player_i: bool,
}

#[derive(Args)]
struct PairGameArgs {
    #[arg(short, long)]
    workspace: PathBuf,
    #[arg(long)]
    left: String,
    #[arg(long)]
    right: String,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    find_min: bool,
    #[arg(long)]
    transcript: bool,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    expect_player_i: bool,
}

#[derive(Args)]
struct WeakGameArgs {
    #[arg(short, long)]
    workspace: PathBuf,
    #[arg(long)]
    left_class: String,
    #[arg(long)]
    right_class: String,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    find_min: bool,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    expect_player_i: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SynthMode {
    /// Enumerate formulas by size and report the minimal separating size.
    Size,
    /// Search for a separating formula of bounded quantifier depth.
    Depth,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(short, long)]
    workspace: PathBuf,
    /// Comma-separated left class.
    #[arg(long)]
    left: String,
    /// Comma-separated right class.
    #[arg(long)]
    right: String,
    #[arg(long, value_enum, default_value = "size")]
    mode: SynthMode,
    /// Size bound (mode size) or depth bound (mode depth).
    #[arg(long)]
    max: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TypesArgs {
    #[arg(short, long)]
    workspace: PathBuf,
    /// Comma-separated contexts to partition jointly.
    #[arg(long)]
    structures: String,
    /// Comma-separated variable tuple, e.g. `x` or `x,y`.
    #[arg(long)]
    vars: String,
    #[arg(long)]
    depth: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum GameKind {
    Ef,
    Class,
    Pair,
    Weak,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum HumanSide {
    /// Play Player I (the attacker / spender).
    #[value(name = "I", alias = "i", alias = "1")]
    I,
    /// Play Player II (the defender / chooser).
    #[value(name = "II", alias = "ii", alias = "2")]
    Ii,
}

#[derive(Args)]
struct PlayArgs {
    #[arg(short, long)]
    workspace: PathBuf,
    #[arg(long, value_enum)]
    game: GameKind,
    /// Which player the human controls.
    #[arg(long, value_enum)]
    side: HumanSide,
    /// Left structure (games ef, pair).
    #[arg(long)]
    left: Option<String>,
    /// Right structure (games ef, pair).
    #[arg(long)]
    right: Option<String>,
    /// Left class (games class, weak).
    #[arg(long)]
    left_class: Option<String>,
    /// Right class (games class, weak).
    #[arg(long)]
    right_class: Option<String>,
    /// Rounds (game ef).
    #[arg(long)]
    rounds: Option<usize>,
    /// Budget (games class, pair, weak).
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args)]
struct CheckQuantifierArgs {
    #[arg(short, long)]
    workspace: PathBuf,
    /// Quantifier name from the workspace set.
    #[arg(long)]
    name: String,
    /// Largest domain to check (default: the workspace max-domain cap).
    #[arg(long)]
    max_domain: Option<usize>,
    /// Seed for sampled (non-exhaustive) domains.
    #[arg(long, default_value = "7")]
    seed: u64,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let cap_refusal = e.chain().any(|cause| {
                matches!(
                    cause.downcast_ref::<efq_core::Error>(),
                    Some(efq_core::Error::CapExceeded { .. })
                )
            });
            ExitCode::from(if cap_refusal { 3 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Eval(args) => commands::eval(args),
        Command::EfGame(args) => commands::ef_game(args),
        Command::SizeGame(args) => commands::size_game(args),
        Command::PairGame(args) => commands::pair_game(args),
        Command::WeakGame(args) => commands::weak_game(args),
        Command::Synth(args) => commands::synth(args),
        Command::Types(args) => commands::types(args),
        Command::Play(args) => play::play(args),
        Command::CheckQuantifier(args) => commands::check_quantifier(args),
    }
}
