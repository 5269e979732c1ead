//! Batch commands: each resolves its inputs from the workspace, runs the
//! library front door, prints a line-oriented report (or JSON with
//! `--json`), and returns the process exit code.

use std::collections::BTreeMap;

use anyhow::{bail, Context as _, Result};
use efq_core::ef_game::{
    apply_move, legal_moves, solve_ef, status, EFOutcome, GameStatus, Player, Transcript,
    TranscriptStep,
};
use efq_core::formulas::{extension, parse, Formula};
use efq_core::oracle::{min_separating_size, separable_at_depth};
use efq_core::quantifiers::{check_iso_invariance, q_accepts, QuantifierSet};
use efq_core::size_games::{
    min_winning_budget, solve_class_game, solve_pair_game, solve_weak_game, ClassPosition,
    GameInstance, PairPosition,
};
use efq_core::structures::{Assignment, Context, VarTuple};
use efq_core::types::joint_partition;
use efq_core::Caps;
use serde::Serialize;

use crate::workspace::{parse_inline_assignment, Workspace, WorkspaceFile};
use crate::{
    CheckQuantifierArgs, EfGameArgs, EvalArgs, PairGameArgs, SizeGameArgs, SynthArgs, SynthMode,
    TypesArgs, WeakGameArgs,
};

#[derive(Serialize)]
struct Report<'a, R: Serialize> {
    command: &'a str,
    workspace: &'a WorkspaceFile,
    result: R,
}

fn emit_json<R: Serialize>(command: &str, ws: &Workspace, result: R) -> Result<()> {
    let report = Report {
        command,
        workspace: &ws.file,
        result,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn exit_for(winner: Player, expect_player_i: bool) -> u8 {
    if expect_player_i && winner == Player::Two {
        2
    } else {
        0
    }
}

// ---------------------------------------------------------------- eval

#[derive(Serialize)]
struct TraceSlot {
    variables: Vec<String>,
    extension: Vec<Vec<usize>>,
}

#[derive(Serialize)]
struct TraceEntry {
    formula: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    slots: Vec<TraceSlot>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accepts: Option<bool>,
}

/// Walk the formula and record, for every quantified subformula whose free
/// variables are bound at the root, the extension of each component and the
/// quantifier's verdict. Subformulas that depend on variables bound further
/// up are listed but skipped (their extension varies with the outer tuple).
fn collect_trace(
    f: &Formula,
    ctx: &Context,
    qset: &QuantifierSet,
    out: &mut Vec<TraceEntry>,
) -> Result<()> {
    match f {
        Formula::Eq(..) | Formula::Rel(..) => Ok(()),
        Formula::Not(g) => collect_trace(g, ctx, qset, out),
        Formula::And(a, b) => {
            collect_trace(a, ctx, qset, out)?;
            collect_trace(b, ctx, qset, out)
        }
        Formula::Quant {
            quantifier,
            tuples,
            components,
        } => {
            let bound = ctx.assignment().domain_set();
            let unbound: Vec<String> = f
                .free_vars()
                .into_iter()
                .filter(|v| !bound.contains(v))
                .collect();
            if unbound.is_empty() {
                let q = qset
                    .get(quantifier)
                    .with_context(|| format!("unknown quantifier `{quantifier}`"))?;
                let mut slots = Vec::new();
                let mut sets = Vec::new();
                for (t, c) in tuples.iter().zip(components) {
                    let e = extension(c, ctx, t, qset)?;
                    slots.push(TraceSlot {
                        variables: t.vars().to_vec(),
                        extension: e.iter().cloned().collect(),
                    });
                    sets.push(e);
                }
                let accepts = q_accepts(q, ctx.structure().domain_size(), &sets)?;
                out.push(TraceEntry {
                    formula: f.to_string(),
                    skipped: None,
                    slots,
                    accepts: Some(accepts),
                });
            } else {
                out.push(TraceEntry {
                    formula: f.to_string(),
                    skipped: Some(format!(
                        "depends on enclosing bound variables: {}",
                        unbound.join(", ")
                    )),
                    slots: Vec::new(),
                    accepts: None,
                });
            }
            for c in components {
                collect_trace(c, ctx, qset, out)?;
            }
            Ok(())
        }
    }
}

fn tuple_text(tuple: &[usize]) -> String {
    let inner: Vec<String> = tuple.iter().map(|e| e.to_string()).collect();
    format!("({})", inner.join(","))
}

fn extension_text(tuples: &[Vec<usize>]) -> String {
    let inner: Vec<String> = tuples.iter().map(|t| tuple_text(t)).collect();
    format!("{{{}}}", inner.join(", "))
}

#[derive(Serialize)]
struct EvalResult {
    formula: String,
    structure: String,
    value: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    trace: Vec<TraceEntry>,
}

pub fn eval(args: EvalArgs) -> Result<u8> {
    let ws = Workspace::load(&args.workspace)?;
    let mut bindings: BTreeMap<String, usize> = match &args.assignment {
        Some(name) => ws.assignment(name)?.iter().map(|(v, e)| (v.to_string(), e)).collect(),
        None => BTreeMap::new(),
    };
    if let Some(inline) = &args.assign {
        bindings.extend(parse_inline_assignment(inline)?);
    }
    let ctx = Context::new(
        ws.structure(&args.structure)?.clone(),
        Assignment::new(bindings),
    )?;
    let f = parse(&args.formula, &ws.vocabulary, &ws.qset)?;
    let value = f.eval(&ctx, &ws.qset)?;

    let mut trace = Vec::new();
    if args.trace || args.json {
        collect_trace(&f, &ctx, &ws.qset, &mut trace)?;
    }
    if args.json {
        emit_json(
            "eval",
            &ws,
            EvalResult {
                formula: f.to_string(),
                structure: args.structure.clone(),
                value,
                trace,
            },
        )?;
        return Ok(0);
    }
    println!("{value}");
    if args.trace {
        let stats = f.stats();
        println!(
            "formula: {f}  (size {}, or-primitive size {}, depth {})",
            stats.size, stats.or_primitive_size, stats.depth
        );
        for entry in &trace {
            match &entry.skipped {
                Some(reason) => println!("  {} — skipped ({reason})", entry.formula),
                None => {
                    println!("  {}", entry.formula);
                    for slot in &entry.slots {
                        println!(
                            "    ({}): extension = {}",
                            slot.variables.join(","),
                            extension_text(&slot.extension)
                        );
                    }
                    println!(
                        "    accepts on domain of size {}: {}",
                        ctx.structure().domain_size(),
                        entry.accepts.unwrap()
                    );
                }
            }
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------- games

fn print_transcript(t: &Transcript) {
    println!("transcript:");
    for (i, step) in t.steps.iter().enumerate() {
        if step.note.is_empty() {
            println!("  {}. [{}] {}", i + 1, step.actor, step.action);
        } else {
            println!("  {}. [{}] {} — {}", i + 1, step.actor, step.action, step.note);
        }
    }
}

/// A sample optimal-vs-first-legal transcript of the comparison game: the
/// winner follows the stored strategy, the loser plays its first legal move.
fn ef_sample_transcript(
    outcome: &EFOutcome,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<Transcript> {
    let mut steps = Vec::new();
    let mut pos = outcome.start().clone();
    loop {
        match status(&pos, qset, caps)? {
            GameStatus::Won(winner, reason) => {
                steps.push(TranscriptStep {
                    position: pos.key(),
                    actor: winner.to_string(),
                    action: "game over".into(),
                    note: reason,
                });
                return Ok(Transcript { steps, winner });
            }
            GameStatus::Ongoing(mover) => {
                let mv = if mover == outcome.winner() {
                    outcome
                        .best_move(&pos)?
                        .context("the stored winner has no move at an ongoing position")?
                } else {
                    match legal_moves(&pos, qset, caps)?.into_iter().next() {
                        Some(m) => m,
                        None => {
                            let winner = mover.other();
                            steps.push(TranscriptStep {
                                position: pos.key(),
                                actor: winner.to_string(),
                                action: "game over".into(),
                                note: format!("{mover} has no legal move"),
                            });
                            return Ok(Transcript { steps, winner });
                        }
                    }
                };
                steps.push(TranscriptStep {
                    position: pos.key(),
                    actor: mover.to_string(),
                    action: mv.to_string(),
                    note: String::new(),
                });
                pos = apply_move(&pos, &mv, qset, caps)?;
            }
        }
    }
}

#[derive(Serialize)]
struct GameResult {
    game: String,
    winner: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    minimal_winning_parameter: Option<Option<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transcript: Option<Vec<TranscriptStep>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair_values: Option<Vec<PairValue>>,
}

#[derive(Serialize)]
struct PairValue {
    left: usize,
    right: usize,
    winner: String,
}

pub fn ef_game(args: EfGameArgs) -> Result<u8> {
    let ws = Workspace::load(&args.workspace)?;
    let left = ws.context_spec(&args.left)?;
    let right = ws.context_spec(&args.right)?;
    if args.rounds.is_none() && !args.find_min {
        bail!("either --rounds or --find-min is required");
    }

    let mut minimum: Option<Option<usize>> = None;
    if args.find_min {
        let mut found = None;
        for d in 0..=ws.caps.max_rounds {
            if solve_ef(&left, &right, d, &ws.qset, &ws.caps)?.winner() == Player::One {
                found = Some(d);
                break;
            }
        }
        minimum = Some(found);
    }

    let (winner, rounds, transcript) = match args.rounds {
        Some(d) => {
            let outcome = solve_ef(&left, &right, d, &ws.qset, &ws.caps)?;
            let t = if args.transcript || args.json {
                Some(ef_sample_transcript(&outcome, &ws.qset, &ws.caps)?)
            } else {
                None
            };
            (outcome.winner(), Some(d), t)
        }
        None => {
            let w = if minimum == Some(None) { Player::Two } else { Player::One };
            (w, None, None)
        }
    };

    if args.json {
        emit_json(
            "ef-game",
            &ws,
            GameResult {
                game: "ef".into(),
                winner: winner.to_string(),
                rounds,
                budget: None,
                minimal_winning_parameter: minimum,
                transcript: transcript.map(|t| t.steps),
                pair_values: None,
            },
        )?;
        return Ok(exit_for(winner, args.expect_player_i));
    }

    if let Some(d) = rounds {
        println!("{winner} wins the {d}-round comparison game");
    }
    match minimum {
        Some(Some(d)) => println!("minimal rounds for a Player I win: {d}"),
        Some(None) => println!(
            "Player I does not win within {} rounds (the max-rounds cap)",
            ws.caps.max_rounds
        ),
        None => {}
    }
    if args.transcript {
        if let Some(t) = &transcript {
            print_transcript(t);
        }
    }
    Ok(exit_for(winner, args.expect_player_i))
}

/// Shared driver for the three size games.
struct SizeGameRun {
    game: &'static str,
    budget: Option<usize>,
    find_min: bool,
    transcript: bool,
    json: bool,
    expect_player_i: bool,
}

fn run_size_game(
    ws: &Workspace,
    left: Vec<Context>,
    right: Vec<Context>,
    cfg: SizeGameRun,
) -> Result<u8> {
    if cfg.budget.is_none() && !cfg.find_min {
        bail!("either --budget or --find-min is required");
    }

    let instance = match cfg.game {
        "class" => GameInstance::Class {
            left: &left,
            right: &right,
        },
        "weak" => GameInstance::Weak {
            left: &left,
            right: &right,
        },
        _ => GameInstance::Pair {
            left: &left[0],
            right: &right[0],
        },
    };
    let minimum = if cfg.find_min {
        Some(min_winning_budget(&instance, ws.caps.max_budget, &ws.qset, &ws.caps)?)
    } else {
        None
    };

    let mut transcript = None;
    let mut pair_values = None;
    let (winner, budget) = match cfg.budget {
        Some(s) => {
            let winner = match cfg.game {
                "class" => {
                    let p = ClassPosition::new(s, left.clone(), right.clone())?;
                    let outcome = solve_class_game(&p, &ws.qset, &ws.caps)?;
                    if cfg.transcript || cfg.json {
                        transcript = Some(outcome.sample_transcript()?);
                    }
                    outcome.winner()
                }
                "weak" => {
                    let outcome = solve_weak_game(s, &left, &right, &ws.qset, &ws.caps)?;
                    pair_values = Some(
                        outcome
                            .pair_values()
                            .iter()
                            .map(|&(i, j, w)| PairValue {
                                left: i,
                                right: j,
                                winner: w.to_string(),
                            })
                            .collect::<Vec<_>>(),
                    );
                    outcome.winner()
                }
                _ => {
                    let p = PairPosition::new(s, left[0].clone(), right[0].clone())?;
                    let outcome = solve_pair_game(&p, &ws.qset, &ws.caps)?;
                    if cfg.transcript || cfg.json {
                        transcript = Some(outcome.sample_transcript()?);
                    }
                    outcome.winner()
                }
            };
            (winner, Some(s))
        }
        None => {
            let w = if minimum == Some(None) { Player::Two } else { Player::One };
            (w, None)
        }
    };

    if cfg.json {
        emit_json(
            &format!("{}-game", cfg.game),
            ws,
            GameResult {
                game: cfg.game.into(),
                winner: winner.to_string(),
                rounds: None,
                budget,
                minimal_winning_parameter: minimum,
                transcript: transcript.map(|t| t.steps),
                pair_values,
            },
        )?;
        return Ok(exit_for(winner, cfg.expect_player_i));
    }

    if let Some(s) = budget {
        println!("{winner} wins the {} game at budget {s}", cfg.game);
    }
    match minimum {
        Some(Some(s)) => println!("minimal budget for a Player I win: {s}"),
        Some(None) => println!(
            "Player I does not win within budget {} (the max-budget cap)",
            ws.caps.max_budget
        ),
        None => {}
    }
    if let Some(values) = &pair_values {
        println!("pair values (class game on the committed singletons):");
        for v in values {
            println!("  left[{}] vs right[{}]: {}", v.left, v.right, v.winner);
        }
    }
    if cfg.transcript {
        if let Some(t) = &transcript {
            print_transcript(t);
        }
    }
    Ok(exit_for(winner, cfg.expect_player_i))
}

pub fn size_game(args: SizeGameArgs) -> Result<u8> {
    let ws = Workspace::load(&args.workspace)?;
    let left = ws.class(&args.left_class)?;
    let right = ws.class(&args.right_class)?;
    run_size_game(
        &ws,
        left,
        right,
        SizeGameRun {
            game: "class",
            budget: args.budget,
            find_min: args.find_min,
            transcript: args.transcript,
            json: args.json,
            expect_player_i: args.expect_player_i,
        },
    )
}

pub fn pair_game(args: PairGameArgs) -> Result<u8> {
    let ws = Workspace::load(&args.workspace)?;
    let left = ws.context_spec(&args.left)?;
    let right = ws.context_spec(&args.right)?;
    run_size_game(
        &ws,
        vec![left],
        vec![right],
        SizeGameRun {
            game: "pair",
            budget: args.budget,
            find_min: args.find_min,
            transcript: args.transcript,
            json: args.json,
            expect_player_i: args.expect_player_i,
        },
    )
}

pub fn weak_game(args: WeakGameArgs) -> Result<u8> {
    let ws = Workspace::load(&args.workspace)?;
    let left = ws.class(&args.left_class)?;
    let right = ws.class(&args.right_class)?;
    run_size_game(
        &ws,
        left,
        right,
        SizeGameRun {
            game: "weak",
            budget: args.budget,
            find_min: args.find_min,
            transcript: false,
            json: args.json,
            expect_player_i: args.expect_player_i,
        },
    )
}

// ---------------------------------------------------------------- synth

#[derive(Serialize)]
struct SynthResult {
    mode: String,
    bound: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    minimal_size: Option<usize>,
    witness: Option<String>,
    verified: bool,
}

/// Re-check a reported separator before printing it: true on every left
/// context, false on every right context.
fn verify_separator(
    w: &Formula,
    left: &[Context],
    right: &[Context],
    qset: &QuantifierSet,
) -> Result<()> {
    for ctx in left {
        if !w.eval(ctx, qset)? {
            bail!("internal error: the witness `{w}` is false on a left context");
        }
    }
    for ctx in right {
        if w.eval(ctx, qset)? {
            bail!("internal error: the witness `{w}` is true on a right context");
        }
    }
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<u8> {
    let ws = Workspace::load(&args.workspace)?;
    let left = ws.class(&args.left)?;
    let right = ws.class(&args.right)?;

    let (mode, minimal_size, witness) = match args.mode {
        SynthMode::Size => {
            let found = min_separating_size(&left, &right, args.max, &ws.qset, &ws.caps)?;
            match found {
                Some((s, w)) => ("size", Some(s), Some(w)),
                None => ("size", None, None),
            }
        }
        SynthMode::Depth => {
            if left.len() != 1 || right.len() != 1 {
                bail!("--mode depth works on a single context per side");
            }
            let found = separable_at_depth(&left[0], &right[0], args.max, &ws.qset, &ws.caps)?;
            ("depth", None, found)
        }
    };
    let verified = match &witness {
        Some(w) => {
            verify_separator(w, &left, &right, &ws.qset)?;
            true
        }
        None => false,
    };

    if args.json {
        emit_json(
            "synth",
            &ws,
            SynthResult {
                mode: mode.into(),
                bound: args.max,
                minimal_size,
                witness: witness.as_ref().map(|w| w.to_string()),
                verified,
            },
        )?;
        return Ok(0);
    }

    match (mode, minimal_size, &witness) {
        ("size", Some(s), Some(w)) => {
            println!("minimal separating size: {s}");
            println!("witness: {w}");
            println!("verified: true on every left context, false on every right context");
        }
        ("size", None, _) => {
            println!("no separating formula of size at most {}", args.max)
        }
        ("depth", _, Some(w)) => {
            println!("separating formula of depth at most {}: {w}", args.max);
            println!("depth: {}, size: {}", w.depth(), w.size());
            println!("verified: true on the left context, false on the right context");
        }
        ("depth", _, None) => println!(
            "the contexts agree on every formula of depth at most {}",
            args.max
        ),
        _ => unreachable!(),
    }
    Ok(0)
}

// ---------------------------------------------------------------- types

#[derive(Serialize)]
struct TypeCell {
    formula: String,
    members: Vec<TypeMember>,
}

#[derive(Serialize)]
struct TypeMember {
    context: String,
    tuple: Vec<usize>,
}

#[derive(Serialize)]
struct TypesResult {
    depth: usize,
    cell_count: usize,
    cells: Vec<TypeCell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fixpoint_depth: Option<usize>,
}

pub fn types(args: TypesArgs) -> Result<u8> {
    let ws = Workspace::load(&args.workspace)?;
    let labels: Vec<String> = args
        .structures
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let contexts = ws.class(&args.structures)?;
    let vars: Vec<String> = args.vars.split(',').map(|v| v.trim().to_string()).collect();
    let vt = VarTuple::new(vars)?;

    let partition = joint_partition(&contexts, &vt, args.depth, &ws.qset, &ws.caps)?;
    let universe = partition.universe().to_vec();

    // Re-verify every defining formula by evaluation before printing.
    let mut cells = Vec::new();
    for cell in 0..partition.cell_count() {
        let f = partition.type_formula(cell)?;
        let mut members = Vec::new();
        for (m, (ctx_idx, tuple)) in universe.iter().enumerate() {
            let extended = contexts[*ctx_idx].extend(&vt, tuple)?;
            let holds = f.eval(&extended, &ws.qset)?;
            if holds != (partition.cell_of(m) == cell) {
                bail!("internal error: the defining formula of cell {cell} misclassifies a member");
            }
            if holds {
                members.push(TypeMember {
                    context: labels[*ctx_idx].clone(),
                    tuple: tuple.clone(),
                });
            }
        }
        cells.push(TypeCell {
            formula: f.to_string(),
            members,
        });
    }

    // The refinement fixpoint: the first depth whose stratum equals the next.
    let mut fixpoint = None;
    for t in 0..args.depth {
        if partition.cells_at_depth(t) == partition.cells_at_depth(t + 1) {
            fixpoint = Some(t);
            break;
        }
    }

    if args.json {
        emit_json(
            "types",
            &ws,
            TypesResult {
                depth: args.depth,
                cell_count: cells.len(),
                cells,
                fixpoint_depth: fixpoint,
            },
        )?;
        return Ok(0);
    }

    println!(
        "joint type partition at depth {} over ({}): {} member(s), {} cell(s)",
        args.depth,
        vt.vars().join(","),
        universe.len(),
        partition.cell_count()
    );
    for (i, cell) in cells.iter().enumerate() {
        println!("cell {i}: defined by {}", cell.formula);
        for m in &cell.members {
            println!("  {}: {}", m.context, tuple_text(&m.tuple));
        }
    }
    if let Some(t) = fixpoint {
        if args.depth > t {
            println!(
                "note: the refinement stabilized at depth {t}; depths beyond it give the same partition"
            );
        }
    }
    Ok(0)
}

// ------------------------------------------------------ check-quantifier

#[derive(Serialize)]
struct IsoResult {
    quantifier: String,
    invariant: bool,
    domains: Vec<IsoDomain>,
    violations: Vec<IsoViolationOut>,
}

#[derive(Serialize)]
struct IsoDomain {
    domain: usize,
    cases: u64,
    exhaustive: bool,
}

#[derive(Serialize)]
struct IsoViolationOut {
    domain: usize,
    sets: Vec<Vec<Vec<usize>>>,
    permutation: Vec<usize>,
    accepts_original: bool,
    accepts_image: bool,
}

pub fn check_quantifier(args: CheckQuantifierArgs) -> Result<u8> {
    let ws = Workspace::load(&args.workspace)?;
    let q = ws
        .qset
        .get(&args.name)
        .with_context(|| {
            format!(
                "unknown quantifier `{}`; the workspace defines: {}",
                args.name,
                ws.qset.names().join(", ")
            )
        })?
        .clone();
    let max_domain = args.max_domain.unwrap_or(ws.caps.max_domain);
    let report = check_iso_invariance(&q, max_domain, args.seed)?;

    let result = IsoResult {
        quantifier: report.quantifier.clone(),
        invariant: report.invariant(),
        domains: report
            .domains
            .iter()
            .map(|d| IsoDomain {
                domain: d.domain,
                cases: d.cases,
                exhaustive: d.exhaustive,
            })
            .collect(),
        violations: report
            .violations
            .iter()
            .map(|v| IsoViolationOut {
                domain: v.domain,
                sets: v.sets.iter().map(|s| s.iter().cloned().collect()).collect(),
                permutation: v.permutation.clone(),
                accepts_original: v.accepts_original,
                accepts_image: v.accepts_image,
            })
            .collect(),
    };

    if args.json {
        emit_json("check-quantifier", &ws, result)?;
        return Ok(0);
    }

    println!("quantifier `{}` on domains 1..={max_domain}:", report.quantifier);
    for d in &result.domains {
        println!(
            "  domain {}: {} case(s), {}",
            d.domain,
            d.cases,
            if d.exhaustive { "exhaustive" } else { "sampled" }
        );
    }
    if result.invariant {
        println!("isomorphism-invariant: yes");
    } else {
        println!(
            "isomorphism-invariant: NO ({} recorded counterexample(s))",
            result.violations.len()
        );
        for v in &result.violations {
            let sets: Vec<String> = v
                .sets
                .iter()
                .map(|s| extension_text(s))
                .collect();
            println!(
                "  domain {}: sets [{}] under permutation {:?}: accepts {} but image accepts {}",
                v.domain,
                sets.join(" "),
                v.permutation,
                v.accepts_original,
                v.accepts_image
            );
        }
    }
    Ok(0)
}

// Re-exported for the play REPL (witness offers after a finished game).
pub fn oracle_witness_line(
    left: &[Context],
    right: &[Context],
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<String> {
    match min_separating_size(left, right, caps.max_budget, qset, caps)? {
        Some((s, w)) => {
            verify_separator(&w, left, right, qset)?;
            Ok(format!("the oracle's minimal separator (size {s}): {w}"))
        }
        None => Ok(format!(
            "the oracle finds no separating formula of size at most {}",
            caps.max_budget
        )),
    }
}

pub fn ef_witness_line(
    left: &Context,
    right: &Context,
    rounds: usize,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<String> {
    match separable_at_depth(left, right, rounds, qset, caps)? {
        Some(w) => {
            verify_separator(
                &w,
                std::slice::from_ref(left),
                std::slice::from_ref(right),
                qset,
            )?;
            Ok(format!("a separating formula of depth at most {rounds}: {w}"))
        }
        None => Ok(format!(
            "no separating formula of depth at most {rounds} exists (the contexts are {rounds}-equivalent)"
        )),
    }
}
