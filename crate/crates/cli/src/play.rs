//! The interactive REPL: the human plays one side of any game against the
//! engine's solved strategy. Every prompt is numbered, out-of-range input
//! re-prompts without changing the game state, and end-of-input aborts
//! cleanly.

use std::io::{self, BufRead, Write};

use anyhow::{Context as _, Result};
use efq_core::ef_game::{
    apply_move, legal_moves, solve_ef, status, GameStatus, Player, TupleSet,
};
use efq_core::size_games::{
    class_apply, class_replies, class_status, pair_apply, pair_replies, pair_status,
    solve_class_game, solve_pair_game, solve_weak_game, ClassMove, ClassPosition, PairMove,
    PairPosition, SplitMove, SupplementMove,
};
use efq_core::structures::{tuples_respecting, Context, VarTuple};
use crate::commands::{ef_witness_line, oracle_witness_line};
use crate::workspace::Workspace;
use crate::{GameKind, HumanSide, PlayArgs};

pub fn play(args: PlayArgs) -> Result<u8> {
    let ws = Workspace::load(&args.workspace)?;
    let human = match args.side {
        HumanSide::I => Player::One,
        HumanSide::Ii => Player::Two,
    };
    let stdin = io::stdin();
    let mut input = stdin.lock();
    match args.game {
        GameKind::Ef => play_ef(&ws, human, &args, &mut input),
        GameKind::Class => {
            let left = ws.class(args.left_class.as_deref().context("--left-class is required for --game class")?)?;
            let right = ws.class(args.right_class.as_deref().context("--right-class is required for --game class")?)?;
            let budget = args.budget.context("--budget is required for --game class")?;
            let p0 = ClassPosition::new(budget, left, right)?;
            play_class_from(&ws, human, p0, &mut input)
        }
        GameKind::Pair => play_pair(&ws, human, &args, &mut input),
        GameKind::Weak => play_weak(&ws, human, &args, &mut input),
    }
}

// ---------------------------------------------------------------- console

fn read_line(input: &mut impl BufRead, prompt: &str) -> Result<Option<String>> {
    print!("{prompt}");
    io::stdout().flush()?;
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        println!();
        return Ok(None);
    }
    Ok(Some(line.trim().to_string()))
}

/// A numbered selection in `1..=n`; re-prompts on anything else.
fn select(input: &mut impl BufRead, n: usize) -> Result<Option<usize>> {
    loop {
        let Some(line) = read_line(input, &format!("select 1-{n} > "))? else {
            return Ok(None);
        };
        match line.parse::<usize>() {
            Ok(k) if (1..=n).contains(&k) => return Ok(Some(k - 1)),
            _ => println!("`{line}` is not one of the offered options; enter a number between 1 and {n}"),
        }
    }
}

fn read_number(
    input: &mut impl BufRead,
    prompt: &str,
    lo: usize,
    hi: usize,
) -> Result<Option<usize>> {
    loop {
        let Some(line) = read_line(input, &format!("{prompt} > "))? else {
            return Ok(None);
        };
        match line.parse::<usize>() {
            Ok(k) if (lo..=hi).contains(&k) => return Ok(Some(k)),
            _ => println!("enter a number between {lo} and {hi}"),
        }
    }
}

/// A comma-separated list of 1-based indices into `1..=n` (empty allowed);
/// returns 0-based indices.
fn read_index_list(
    input: &mut impl BufRead,
    prompt: &str,
    n: usize,
) -> Result<Option<Vec<usize>>> {
    'retry: loop {
        let Some(line) = read_line(input, &format!("{prompt} > "))? else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for part in line.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            match part.parse::<usize>() {
                Ok(k) if (1..=n).contains(&k) => out.push(k - 1),
                _ => {
                    println!("`{part}` is not an index between 1 and {n}");
                    continue 'retry;
                }
            }
        }
        return Ok(Some(out));
    }
}

fn abort() -> Result<u8> {
    println!("aborted (end of input)");
    Ok(0)
}

fn tuple_text(tuple: &[usize]) -> String {
    let inner: Vec<String> = tuple.iter().map(|e| e.to_string()).collect();
    format!("({})", inner.join(","))
}

fn set_text(set: &TupleSet) -> String {
    let inner: Vec<String> = set.iter().map(|t| tuple_text(t)).collect();
    format!("{{{}}}", inner.join(" "))
}

fn context_text(c: &Context) -> String {
    let mut parts = vec![format!("domain {}", c.structure().domain_size())];
    for (r, ts) in c.structure().relations() {
        parts.push(format!("{r}={}", set_text(ts)));
    }
    let bindings: Vec<String> = c.assignment().iter().map(|(v, e)| format!("{v}={e}")).collect();
    if !bindings.is_empty() {
        parts.push(bindings.join(" "));
    }
    parts.join("; ")
}

fn offer_witness(
    input: &mut impl BufRead,
    line: impl FnOnce() -> Result<String>,
) -> Result<()> {
    let Some(ans) = read_line(input, "show the oracle's witness? [y/N] > ")? else {
        return Ok(());
    };
    if ans.eq_ignore_ascii_case("y") || ans.eq_ignore_ascii_case("yes") {
        println!("{}", line()?);
    }
    Ok(())
}

// ---------------------------------------------------------------- EF game

fn play_ef(
    ws: &Workspace,
    human: Player,
    args: &PlayArgs,
    input: &mut impl BufRead,
) -> Result<u8> {
    let left = ws.context_spec(args.left.as_deref().context("--left is required for --game ef")?)?;
    let right = ws.context_spec(args.right.as_deref().context("--right is required for --game ef")?)?;
    let rounds = args.rounds.context("--rounds is required for --game ef")?;

    let outcome = solve_ef(&left, &right, rounds, &ws.qset, &ws.caps)?;
    println!(
        "comparison game over {rounds} round(s); you play {human}, the engine plays {}",
        human.other()
    );
    println!("left:  {}", context_text(&left));
    println!("right: {}", context_text(&right));
    println!("solved value: {} has a winning strategy", outcome.winner());

    let mut pos = outcome.start().clone();
    loop {
        match status(&pos, &ws.qset, &ws.caps)? {
            GameStatus::Won(winner, reason) => {
                println!("game over: {winner} wins — {reason}");
                offer_witness(input, || {
                    ef_witness_line(&left, &right, rounds, &ws.qset, &ws.caps)
                })?;
                return Ok(0);
            }
            GameStatus::Ongoing(mover) => {
                println!();
                println!("position: {}", pos.key());
                let mv = if mover == human {
                    let mut moves = legal_moves(&pos, &ws.qset, &ws.caps)?;
                    if moves.is_empty() {
                        println!("game over: {} wins — {mover} has no legal move", mover.other());
                        offer_witness(input, || {
                            ef_witness_line(&left, &right, rounds, &ws.qset, &ws.caps)
                        })?;
                        return Ok(0);
                    }
                    println!("your moves as {mover}:");
                    for (i, m) in moves.iter().enumerate() {
                        println!("  {}. {m}", i + 1);
                    }
                    let Some(k) = select(input, moves.len())? else {
                        return abort();
                    };
                    moves.swap_remove(k)
                } else {
                    let stored = outcome.best_move(&pos)?;
                    let mv = match stored {
                        Some(m) => m,
                        // The engine can be on the losing side (the human
                        // picked the winner's seat); fall back to a legal move.
                        None => match legal_moves(&pos, &ws.qset, &ws.caps)?.into_iter().next() {
                            Some(m) => m,
                            None => {
                                println!(
                                    "game over: {} wins — {mover} has no legal move",
                                    mover.other()
                                );
                                offer_witness(input, || {
                                    ef_witness_line(&left, &right, rounds, &ws.qset, &ws.caps)
                                })?;
                                return Ok(0);
                            }
                        },
                    };
                    println!("engine ({mover}) plays: {mv}");
                    mv
                };
                pos = apply_move(&pos, &mv, &ws.qset, &ws.caps)?;
            }
        }
    }
}

// ---------------------------------------------------------------- class game

fn play_class_from(
    ws: &Workspace,
    human: Player,
    p0: ClassPosition,
    input: &mut impl BufRead,
) -> Result<u8> {
    let outcome = solve_class_game(&p0, &ws.qset, &ws.caps)?;
    let (wleft, wright) = (p0.left_class.clone(), p0.right_class.clone());
    println!(
        "class formula-size game at budget {}; you play {human}, the engine plays {}",
        p0.budget,
        human.other()
    );
    println!("solved value: {} has a winning strategy", outcome.winner());

    let mut pos = p0;
    loop {
        match class_status(&pos) {
            GameStatus::Won(winner, reason) => {
                println!("game over: {winner} wins — {reason}");
                offer_witness(input, || {
                    oracle_witness_line(&wleft, &wright, &ws.qset, &ws.caps)
                })?;
                return Ok(0);
            }
            GameStatus::Ongoing(_) => {
                println!();
                print_class_position(&pos);
                let mv = if human == Player::One {
                    match compose_class_move(ws, &pos, input)? {
                        Some(mv) => mv,
                        None => return abort(),
                    }
                } else {
                    let mv = outcome
                        .best_move(&pos)?
                        .context("the engine has no move at an ongoing position")?;
                    println!("engine (Player I) plays: {mv}");
                    mv
                };
                let replies = class_replies(&mv);
                let reply = if replies.is_empty() {
                    None
                } else if human == Player::Two {
                    println!("your replies as Player II:");
                    for (i, r) in replies.iter().enumerate() {
                        println!("  {}. {r}", i + 1);
                    }
                    let Some(k) = select(input, replies.len())? else {
                        return abort();
                    };
                    Some(replies[k])
                } else {
                    let r = outcome
                        .best_reply(&pos, &mv)?
                        .context("Player II has no reply at an ongoing position")?;
                    println!("engine (Player II) replies: {r}");
                    Some(r)
                };
                pos = class_apply(&pos, &mv, reply.as_ref(), &ws.qset, &ws.caps)?;
            }
        }
    }
}

fn print_class_position(p: &ClassPosition) {
    println!("budget {}", p.budget);
    println!("left class:");
    for (i, c) in p.left_class.iter().enumerate() {
        println!("  {}. {}", i + 1, context_text(c));
    }
    if p.left_class.is_empty() {
        println!("  (empty)");
    }
    println!("right class:");
    for (i, c) in p.right_class.iter().enumerate() {
        println!("  {}. {}", i + 1, context_text(c));
    }
    if p.right_class.is_empty() {
        println!("  (empty)");
    }
}

fn compose_class_move(
    ws: &Workspace,
    p: &ClassPosition,
    input: &mut impl BufRead,
) -> Result<Option<ClassMove>> {
    loop {
        let qnames: Vec<String> = ws.qset.names().iter().map(|s| s.to_string()).collect();
        println!("your move as Player I:");
        println!("  1. swap the classes (costs 1)");
        println!("  2. split the budget and the right class");
        for (i, q) in qnames.iter().enumerate() {
            println!("  {}. supplement with `{q}`", i + 3);
        }
        let Some(k) = select(input, qnames.len() + 2)? else {
            return Ok(None);
        };
        let mv = match k {
            0 => Some(ClassMove::Swap),
            1 => compose_class_split(p, input)?,
            _ => compose_class_supplement(ws, p, &qnames[k - 2], input)?,
        };
        let Some(mv) = mv else { return Ok(None) };
        let trial_reply = class_replies(&mv).into_iter().next();
        match class_apply(p, &mv, trial_reply.as_ref(), &ws.qset, &ws.caps) {
            Ok(_) => return Ok(Some(mv)),
            Err(e) => {
                println!("illegal move: {e}");
            }
        }
    }
}

fn compose_class_split(
    p: &ClassPosition,
    input: &mut impl BufRead,
) -> Result<Option<ClassMove>> {
    println!("the split divides the right class into two halves that together cover it;");
    println!("Player II keeps one half together with its share of the budget");
    let Some(u) = read_number(
        input,
        &format!("budget for the first half (1..={})", p.budget - 1),
        1,
        p.budget - 1,
    )?
    else {
        return Ok(None);
    };
    let n = p.right_class.len();
    let Some(first) = read_index_list(
        input,
        &format!("right-class indices for the first half (1..={n}, comma-separated, may be empty)"),
        n,
    )?
    else {
        return Ok(None);
    };
    let Some(second) = read_index_list(
        input,
        &format!("right-class indices for the second half (must cover the rest)"),
        n,
    )?
    else {
        return Ok(None);
    };
    Ok(Some(ClassMove::Split(SplitMove {
        u,
        v: p.budget - u,
        first,
        second,
    })))
}

fn read_var_tuple(
    input: &mut impl BufRead,
    label: &str,
    arity: usize,
) -> Result<Option<VarTuple>> {
    loop {
        let Some(line) = read_line(
            input,
            &format!("{label}: {arity} variable name(s), comma-separated > "),
        )?
        else {
            return Ok(None);
        };
        let names: Vec<String> = line
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if names.len() != arity {
            println!("need exactly {arity} name(s)");
            continue;
        }
        match VarTuple::new(names) {
            Ok(t) => return Ok(Some(t)),
            Err(e) => println!("{e}"),
        }
    }
}

fn read_tuple_set(
    input: &mut impl BufRead,
    label: &str,
    ctx: &Context,
    tuple: &VarTuple,
) -> Result<Option<TupleSet>> {
    let universe = tuples_respecting(ctx.structure().domain_size(), tuple);
    println!("{label}: the tuple universe over ({}):", tuple.vars().join(","));
    for (i, t) in universe.iter().enumerate() {
        println!("  {}. {}", i + 1, tuple_text(t));
    }
    let Some(idx) = read_index_list(input, "chosen set (comma-separated numbers, empty = ∅)", universe.len())?
    else {
        return Ok(None);
    };
    Ok(Some(idx.into_iter().map(|i| universe[i].clone()).collect()))
}

fn compose_class_supplement(
    ws: &Workspace,
    p: &ClassPosition,
    qname: &str,
    input: &mut impl BufRead,
) -> Result<Option<ClassMove>> {
    let q = ws.qset.get(qname).expect("menu offered a known quantifier");
    let arities = q.qtype().arities().to_vec();
    let width = arities.len();
    println!(
        "supplement with `{qname}` (width {width}); the chosen sets must make it accept on every left context and reject on every right context"
    );
    let mut tuples = Vec::new();
    for (j, &a) in arities.iter().enumerate() {
        let Some(t) = read_var_tuple(input, &format!("component {}", j + 1), a)? else {
            return Ok(None);
        };
        tuples.push(t);
    }
    let spend = p.budget - 1;
    let splits = if width == 1 {
        println!("component budget: {spend}");
        vec![spend]
    } else {
        'budgets: loop {
            let mut out = Vec::new();
            for j in 0..width {
                let Some(b) = read_number(
                    input,
                    &format!(
                        "budget for component {} (the {width} budgets must sum to {spend})",
                        j + 1
                    ),
                    1,
                    spend,
                )?
                else {
                    return Ok(None);
                };
                out.push(b);
            }
            if out.iter().sum::<usize>() == spend {
                break 'budgets out;
            }
            println!("those budgets sum to {}, not {spend}", out.iter().sum::<usize>());
        }
    };
    let mut sets = Vec::new();
    let contexts: Vec<(String, &Context)> = p
        .left_class
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("left #{}", i + 1), c))
        .chain(
            p.right_class
                .iter()
                .enumerate()
                .map(|(i, c)| (format!("right #{}", i + 1), c)),
        )
        .collect();
    for (label, ctx) in contexts {
        let mut per_ctx = Vec::new();
        for (j, t) in tuples.iter().enumerate() {
            let Some(set) = read_tuple_set(
                input,
                &format!("{label}, component {}", j + 1),
                ctx,
                t,
            )?
            else {
                return Ok(None);
            };
            per_ctx.push(set);
        }
        sets.push(per_ctx);
    }
    Ok(Some(ClassMove::Supplement(SupplementMove {
        quantifier: qname.to_string(),
        tuples,
        splits,
        sets,
    })))
}

// ---------------------------------------------------------------- pair game

fn play_pair(
    ws: &Workspace,
    human: Player,
    args: &PlayArgs,
    input: &mut impl BufRead,
) -> Result<u8> {
    let left = ws.context_spec(args.left.as_deref().context("--left is required for --game pair")?)?;
    let right = ws.context_spec(args.right.as_deref().context("--right is required for --game pair")?)?;
    let budget = args.budget.context("--budget is required for --game pair")?;
    let p0 = PairPosition::new(budget, left.clone(), right.clone())?;
    let outcome = solve_pair_game(&p0, &ws.qset, &ws.caps)?;
    println!(
        "pair formula-size game at budget {budget}; you play {human}, the engine plays {}",
        human.other()
    );
    println!("solved value: {} has a winning strategy", outcome.winner());

    let wleft = vec![left.clone()];
    let wright = vec![right.clone()];

    let mut pos = p0;
    loop {
        match pair_status(&pos) {
            GameStatus::Won(winner, reason) => {
                println!("game over: {winner} wins — {reason}");
                offer_witness(input, || oracle_witness_line(&wleft, &wright, &ws.qset, &ws.caps))?;
                return Ok(0);
            }
            GameStatus::Ongoing(_) => {
                println!();
                println!("budget {}", pos.budget);
                println!("left:  {}", context_text(&pos.left));
                println!("right: {}", context_text(&pos.right));
                let mv = if human == Player::One {
                    match compose_pair_move(ws, &pos, input)? {
                        Some(mv) => mv,
                        None => return abort(),
                    }
                } else {
                    let mv = outcome
                        .best_move(&pos)?
                        .context("the engine has no move at an ongoing position")?;
                    println!("engine (Player I) plays: {mv}");
                    mv
                };
                let replies = pair_replies(&pos, &mv, &ws.qset, &ws.caps)?;
                let needs_reply = !matches!(mv, PairMove::Swap);
                let reply = if !needs_reply {
                    None
                } else if replies.is_empty() {
                    println!("Player II has no reply to this move");
                    println!("game over: Player I wins — a player who must move but cannot loses");
                    offer_witness(input, || oracle_witness_line(&wleft, &wright, &ws.qset, &ws.caps))?;
                    return Ok(0);
                } else if human == Player::Two {
                    println!("your replies as Player II:");
                    for (i, r) in replies.iter().enumerate() {
                        println!("  {}. {r}", i + 1);
                    }
                    let Some(k) = select(input, replies.len())? else {
                        return abort();
                    };
                    Some(replies[k].clone())
                } else {
                    match outcome.best_reply(&pos, &mv)? {
                        Some(r) => {
                            println!("engine (Player II) replies: {r}");
                            Some(r)
                        }
                        None => {
                            println!("engine (Player II) has no reply");
                            println!("game over: Player I wins — a player who must move but cannot loses");
                            offer_witness(input, || oracle_witness_line(&wleft, &wright, &ws.qset, &ws.caps))?;
                            return Ok(0);
                        }
                    }
                };
                pos = pair_apply(&pos, &mv, reply.as_ref(), &ws.qset, &ws.caps)?;
            }
        }
    }
}

fn compose_pair_move(
    ws: &Workspace,
    p: &PairPosition,
    input: &mut impl BufRead,
) -> Result<Option<PairMove>> {
    loop {
        let qnames: Vec<String> = ws
            .qset
            .iter()
            .filter(|q| q.width() == 1)
            .map(|q| q.name().to_string())
            .collect();
        println!("your move as Player I:");
        println!("  1. swap the models (costs 1)");
        println!("  2. split the budget");
        for (i, q) in qnames.iter().enumerate() {
            println!("  {}. supplement with `{q}`", i + 3);
        }
        let Some(k) = select(input, qnames.len() + 2)? else {
            return Ok(None);
        };
        let mv = match k {
            0 => Some(PairMove::Swap),
            1 => {
                let Some(u) = read_number(
                    input,
                    &format!("budget for the first option (1..={})", p.budget - 1),
                    1,
                    p.budget - 1,
                )?
                else {
                    return Ok(None);
                };
                Some(PairMove::Split {
                    u,
                    v: p.budget - u,
                })
            }
            _ => {
                let qname = &qnames[k - 2];
                let q = ws.qset.get(qname).expect("menu offered a known quantifier");
                let arity = q.qtype().arities()[0];
                println!(
                    "supplement with `{qname}`: it must accept the left set and reject the right set"
                );
                let Some(tuple) = read_var_tuple(input, "bound tuple", arity)? else {
                    return Ok(None);
                };
                let Some(left_set) = read_tuple_set(input, "left model", &p.left, &tuple)? else {
                    return Ok(None);
                };
                let Some(right_set) = read_tuple_set(input, "right model", &p.right, &tuple)?
                else {
                    return Ok(None);
                };
                Some(PairMove::Supplement {
                    quantifier: qname.clone(),
                    tuple,
                    left_set,
                    right_set,
                })
            }
        };
        let Some(mv) = mv else { return Ok(None) };
        // Validate without committing: replies run the full move check.
        match pair_replies(p, &mv, &ws.qset, &ws.caps) {
            Ok(_) => match &mv {
                PairMove::Swap | PairMove::Split { .. } => {
                    let trial = pair_replies(p, &mv, &ws.qset, &ws.caps)?.into_iter().next();
                    match pair_apply(p, &mv, trial.as_ref(), &ws.qset, &ws.caps) {
                        Ok(_) => return Ok(Some(mv)),
                        Err(e) => println!("illegal move: {e}"),
                    }
                }
                PairMove::Supplement { .. } => return Ok(Some(mv)),
            },
            Err(e) => println!("illegal move: {e}"),
        }
    }
}

// ---------------------------------------------------------------- weak game

fn play_weak(
    ws: &Workspace,
    human: Player,
    args: &PlayArgs,
    input: &mut impl BufRead,
) -> Result<u8> {
    let left = ws.class(args.left_class.as_deref().context("--left-class is required for --game weak")?)?;
    let right = ws.class(args.right_class.as_deref().context("--right-class is required for --game weak")?)?;
    let budget = args.budget.context("--budget is required for --game weak")?;

    let outcome = solve_weak_game(budget, &left, &right, &ws.qset, &ws.caps)?;
    println!(
        "weak formula-size game at budget {budget}; you play {human}, the engine plays {}",
        human.other()
    );
    println!("solved value: {} has a winning strategy", outcome.winner());

    if left.is_empty() || right.is_empty() {
        println!("game over: Player I wins — Player II cannot commit to a context from an empty class");
        offer_witness(input, || oracle_witness_line(&left, &right, &ws.qset, &ws.caps))?;
        return Ok(0);
    }

    let (i, j) = if human == Player::Two {
        println!("as Player II, commit to one context from each class");
        println!("left class:");
        for (i, c) in left.iter().enumerate() {
            println!("  {}. {}", i + 1, context_text(c));
        }
        let Some(i) = select(input, left.len())? else {
            return abort();
        };
        println!("right class:");
        for (j, c) in right.iter().enumerate() {
            println!("  {}. {}", j + 1, context_text(c));
        }
        let Some(j) = select(input, right.len())? else {
            return abort();
        };
        (i, j)
    } else {
        let pick = outcome
            .pair_values()
            .iter()
            .find(|&&(_, _, w)| w == Player::Two)
            .or_else(|| outcome.pair_values().first())
            .copied()
            .context("the weak game has no context pairs")?;
        println!(
            "engine (Player II) commits to left #{} and right #{}",
            pick.0 + 1,
            pick.1 + 1
        );
        (pick.0, pick.1)
    };

    let p0 = ClassPosition::new(budget, vec![left[i].clone()], vec![right[j].clone()])?;
    println!("the game continues as the class game on the committed pair");
    play_class_from(ws, human, p0, input)
}
