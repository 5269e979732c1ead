//! Formula-size games: the class game, its weak variant, and the pair game.
//!
//! All three games pit Player I (who claims a small separating formula
//! exists) against Player II (who denies it).  Positions carry a *size
//! budget* instead of a round count: every connective Player I commits to
//! spends part of the budget, and Player II steers the play toward the part
//! of the alleged formula they believe cannot exist.
//!
//! * The **class game** ([`solve_class_game`]) starts from two classes of
//!   contexts.  Player I wins the budget-`s` game exactly when a formula of
//!   size at most `s` holds on every left context and on no right context.
//! * The **weak game** ([`solve_weak_game`]) lets Player II first commit to
//!   one context from each class; the class game is then played on the two
//!   singletons.  Player I wins exactly when every such pair is separable
//!   within the budget (each pair may use a different formula).
//! * The **pair game** ([`solve_pair_game`]) is a lighter game on a single
//!   pair of models.  A formula of size at most `s` that separates the pair
//!   gives Player I a win at budget `s`, but not conversely: Player I can
//!   win with a budget strictly below the least separating size, because
//!   different replies of Player II may be answered by different formulas.
//!
//! The class-game solver does not walk the move tree directly: the
//! supplementing move quantifies over one tuple-set-valued function per
//! argument slot, and enumerating those functions per position is hopeless
//! beyond toy budgets.  Instead, for each reachable *universe* (the
//! orbit-distinct contexts in play) and each budget it computes every left
//! side of a bipartition that Player I can win: atoms seed the collection,
//! complements (swap), pairwise intersections (budget splits), and
//! quantifier acceptance patterns of winnable child selections (supplements)
//! close it.  A short exchange argument shows a winnable position is exactly
//! one whose left class sits inside such a set and whose right class avoids
//! it, so the closure reproduces the move-by-move value; the test
//! `the_engine_matches_the_literal_rules_on_tiny_instances` cross-checks
//! this against a literal implementation of the rules.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::caps::Caps;
use crate::ef_game::{index_combos, var_words, GameStatus, Player, Transcript, TranscriptStep, TupleSet};
use crate::error::{Error, Result};
use crate::formulas::Formula;
use crate::quantifiers::{q_accepts, Quantifier, QuantifierSet};
use crate::structures::{canonical_bound_tuples, fresh_names, tuples_respecting, Context, VarTuple, Vocabulary};

// ---------------------------------------------------------------------------
// positions
// ---------------------------------------------------------------------------

/// A class-game position: Player I claims a formula of size at most `budget`
/// is true on every context in `left_class` and false on every context in
/// `right_class`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPosition {
    pub budget: usize,
    pub left_class: Vec<Context>,
    pub right_class: Vec<Context>,
}

impl ClassPosition {
    /// Build a validated position.  The budget must be positive, all
    /// contexts must share one vocabulary, and all assignments must bind the
    /// same variables (the atomic step compares one atom across every
    /// context).  Classes are sets: duplicate contexts are dropped.
    pub fn new(budget: usize, left_class: Vec<Context>, right_class: Vec<Context>) -> Result<ClassPosition> {
        if budget == 0 {
            return Err(Error::Invalid("the class game needs a positive budget".into()));
        }
        check_uniform(left_class.iter().chain(right_class.iter()))?;
        Ok(ClassPosition {
            budget,
            left_class: dedup_contexts(left_class),
            right_class: dedup_contexts(right_class),
        })
    }
}

impl fmt::Display for ClassPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "budget {}; left {{{}}}; right {{{}}}",
            self.budget,
            class_key(&self.left_class),
            class_key(&self.right_class)
        )
    }
}

/// A pair-game position on two models with equally named assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPosition {
    pub budget: usize,
    pub left: Context,
    pub right: Context,
}

impl PairPosition {
    pub fn new(budget: usize, left: Context, right: Context) -> Result<PairPosition> {
        if budget == 0 {
            return Err(Error::Invalid("the pair game needs a positive budget".into()));
        }
        check_uniform([&left, &right].into_iter())?;
        Ok(PairPosition { budget, left, right })
    }
}

impl fmt::Display for PairPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "budget {}; {} vs {}",
            self.budget,
            self.left.canonical_key(),
            self.right.canonical_key()
        )
    }
}

fn check_uniform<'a>(mut contexts: impl Iterator<Item = &'a Context>) -> Result<()> {
    let Some(first) = contexts.next() else {
        return Ok(());
    };
    let vocab = first.structure().vocabulary();
    let dom = first.assignment().domain_set();
    for c in contexts {
        if c.structure().vocabulary() != vocab {
            return Err(Error::VocabularyMismatch);
        }
        if c.assignment().domain_set() != dom {
            return Err(Error::AssignmentDomainMismatch);
        }
    }
    Ok(())
}

fn dedup_contexts(contexts: Vec<Context>) -> Vec<Context> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(contexts.len());
    for c in contexts {
        if seen.insert(c.canonical_key()) {
            out.push(c);
        }
    }
    out
}

fn class_key(contexts: &[Context]) -> String {
    contexts.iter().map(Context::canonical_key).collect::<Vec<_>>().join(", ")
}

// ---------------------------------------------------------------------------
// moves and replies
// ---------------------------------------------------------------------------

/// Player I's budget split: `u + v` must equal the position budget and the
/// two index sets (into the right class) must together cover it.  Player II
/// keeps the left class and picks one half of the cover with its budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMove {
    pub u: usize,
    pub v: usize,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

/// Player I's supplementing move: a quantifier, one bound variable tuple and
/// one positive budget per argument slot (budgets sum to `budget - 1`), and
/// for every context — left class first, then right class — one
/// repetition-respecting tuple set per slot.  The quantifier must accept the
/// chosen sets on every left context and reject them on every right one.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplementMove {
    pub quantifier: String,
    pub tuples: Vec<VarTuple>,
    pub splits: Vec<usize>,
    pub sets: Vec<Vec<TupleSet>>,
}

/// A Player I move in the class game.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassMove {
    /// Exchange the classes (the negation step); costs one budget unit.
    Swap,
    Split(SplitMove),
    Supplement(SupplementMove),
}

impl fmt::Display for ClassMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassMove::Swap => write!(f, "swap the classes"),
            ClassMove::Split(s) => write!(
                f,
                "split the budget {}+{} covering the right class with {:?} and {:?}",
                s.u, s.v, s.first, s.second
            ),
            ClassMove::Supplement(m) => {
                let tuples = m
                    .tuples
                    .iter()
                    .map(|t| format!("({})", t.vars().join(",")))
                    .collect::<Vec<_>>()
                    .join(" ");
                write!(f, "supplement with {} on {} splitting {:?}", m.quantifier, tuples, m.splits)
            }
        }
    }
}

/// Player II's answer to a class-game move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassReply {
    /// Take the first half of a split.
    First,
    /// Take the second half of a split.
    Second,
    /// Descend into argument slot `j` (0-based) of a supplementing move.
    Component(usize),
}

impl fmt::Display for ClassReply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassReply::First => write!(f, "play on the first half"),
            ClassReply::Second => write!(f, "play on the second half"),
            ClassReply::Component(j) => write!(f, "descend into argument slot {}", j + 1),
        }
    }
}

/// A Player I move in the pair game.
#[derive(Debug, Clone, PartialEq)]
pub enum PairMove {
    /// Exchange the models; costs one budget unit.
    Swap,
    /// Offer the budgets `u` and `v` (summing to the position budget);
    /// Player II keeps the models and picks one.
    Split { u: usize, v: usize },
    /// A quantifier, a bound tuple, and one tuple set per model: the
    /// quantifier must accept `left_set` on the left model and reject
    /// `right_set` on the right model.
    Supplement {
        quantifier: String,
        tuple: VarTuple,
        left_set: TupleSet,
        right_set: TupleSet,
    },
}

impl fmt::Display for PairMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairMove::Swap => write!(f, "swap the models"),
            PairMove::Split { u, v } => write!(f, "offer the budgets {u} and {v}"),
            PairMove::Supplement { quantifier, tuple, left_set, right_set } => write!(
                f,
                "supplement with {} on ({}): left picks {}, right picks {}",
                quantifier,
                tuple.vars().join(","),
                fmt_tuple_set(left_set),
                fmt_tuple_set(right_set)
            ),
        }
    }
}

/// Player II's answer to a pair-game move.  Every supplement reply costs the
/// one budget unit the move reserved.
#[derive(Debug, Clone, PartialEq)]
pub enum PairReply {
    /// Take the first offered budget.
    First,
    /// Take the second offered budget.
    Second,
    /// Extend the left model by a chosen tuple and the right by an unchosen
    /// one; sides stay as they are.
    Matched { left: Vec<usize>, right: Vec<usize> },
    /// Extend the left model by an unchosen tuple and the right by a chosen
    /// one; the models then swap sides.
    Crossed { left: Vec<usize>, right: Vec<usize> },
    /// Continue on the left model alone: a chosen tuple against an unchosen
    /// one.
    LeftPair { inside: Vec<usize>, outside: Vec<usize> },
    /// Continue on the right model alone: a chosen tuple against an unchosen
    /// one.
    RightPair { inside: Vec<usize>, outside: Vec<usize> },
}

impl fmt::Display for PairReply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairReply::First => write!(f, "take the first budget"),
            PairReply::Second => write!(f, "take the second budget"),
            PairReply::Matched { left, right } => {
                write!(f, "extend left by {} and right by {}", fmt_tuple(left), fmt_tuple(right))
            }
            PairReply::Crossed { left, right } => write!(
                f,
                "extend left by {} and right by {}, then swap sides",
                fmt_tuple(left),
                fmt_tuple(right)
            ),
            PairReply::LeftPair { inside, outside } => {
                write!(f, "play {} against {} on the left model", fmt_tuple(inside), fmt_tuple(outside))
            }
            PairReply::RightPair { inside, outside } => {
                write!(f, "play {} against {} on the right model", fmt_tuple(inside), fmt_tuple(outside))
            }
        }
    }
}

fn fmt_tuple(tuple: &[usize]) -> String {
    format!("({})", tuple.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
}

fn fmt_tuple_set(set: &TupleSet) -> String {
    format!("{{{}}}", set.iter().map(|t| fmt_tuple(t)).collect::<Vec<_>>().join(","))
}

// ---------------------------------------------------------------------------
// the atomic step
// ---------------------------------------------------------------------------

/// An atom — an equality or a relation atom over variables bound in every
/// context — true on all of `left` and false on all of `right`, if one
/// exists.  With no contexts at all every atom separates vacuously, and the
/// designated witness `x = x` is returned.
pub fn atomic_separates(left: &[Context], right: &[Context]) -> Option<Formula> {
    if left.is_empty() && right.is_empty() {
        return Some(Formula::eq("x", "x"));
    }
    let qset = QuantifierSet::default();
    let mut shared: Option<BTreeSet<String>> = None;
    for c in left.iter().chain(right.iter()) {
        let dom = c.assignment().domain_set();
        shared = Some(match shared {
            None => dom,
            Some(acc) => acc.intersection(&dom).cloned().collect(),
        });
    }
    let vars: Vec<String> = shared.unwrap_or_default().into_iter().collect();
    let vocab = left
        .iter()
        .chain(right.iter())
        .next()
        .expect("some context exists")
        .structure()
        .vocabulary()
        .clone();
    atom_candidates(&vars, &vocab).into_iter().find(|atom| {
        left.iter().all(|c| atom.eval(c, &qset).unwrap_or(false))
            && right.iter().all(|c| !atom.eval(c, &qset).unwrap_or(true))
    })
}

fn atom_candidates(vars: &[String], vocab: &Vocabulary) -> Vec<Formula> {
    let mut out = Vec::new();
    for (i, a) in vars.iter().enumerate() {
        for b in &vars[i..] {
            out.push(Formula::eq(a.clone(), b.clone()));
        }
    }
    for (name, arity) in vocab.symbols() {
        for word in var_words(vars, arity) {
            out.push(Formula::rel(name, word));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// class game: status, replies, apply
// ---------------------------------------------------------------------------

/// Referee view of a class-game position: an atomic separation hands the win
/// to Player I before any budget is spent; otherwise a budget of one is too
/// small for anything else and Player II wins; otherwise Player I moves.
pub fn class_status(p: &ClassPosition) -> GameStatus {
    if let Some(atom) = atomic_separates(&p.left_class, &p.right_class) {
        return GameStatus::Won(Player::One, format!("the atom {atom} separates the classes"));
    }
    if p.budget == 1 {
        return GameStatus::Won(Player::Two, "the budget is spent and no atom separates".into());
    }
    GameStatus::Ongoing(Player::One)
}

/// The replies Player II may choose against a move; a swap admits none.
pub fn class_replies(mv: &ClassMove) -> Vec<ClassReply> {
    match mv {
        ClassMove::Swap => Vec::new(),
        ClassMove::Split(_) => vec![ClassReply::First, ClassReply::Second],
        ClassMove::Supplement(m) => (0..m.tuples.len()).map(ClassReply::Component).collect(),
    }
}

/// Validate a move (and the reply when one is due) and produce the next
/// position.
pub fn class_apply(
    p: &ClassPosition,
    mv: &ClassMove,
    reply: Option<&ClassReply>,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<ClassPosition> {
    if let GameStatus::Won(..) = class_status(p) {
        return Err(Error::IllegalMove("the game is already decided".into()));
    }
    match mv {
        ClassMove::Swap => {
            if reply.is_some() {
                return Err(Error::IllegalMove("a swap admits no reply".into()));
            }
            ClassPosition::new(p.budget - 1, p.right_class.clone(), p.left_class.clone())
        }
        ClassMove::Split(s) => {
            if s.u == 0 || s.v == 0 || s.u + s.v != p.budget {
                return Err(Error::IllegalMove(format!(
                    "a split needs positive halves summing to {}",
                    p.budget
                )));
            }
            let n = p.right_class.len();
            let mut covered = vec![false; n];
            for &i in s.first.iter().chain(s.second.iter()) {
                if i >= n {
                    return Err(Error::IllegalMove(format!("index {i} is outside the right class")));
                }
                covered[i] = true;
            }
            if covered.iter().any(|c| !c) {
                return Err(Error::IllegalMove("the two halves must cover the right class".into()));
            }
            let (budget, picked) = match reply {
                Some(ClassReply::First) => (s.u, &s.first),
                Some(ClassReply::Second) => (s.v, &s.second),
                _ => return Err(Error::IllegalMove("a split needs one half to be chosen".into())),
            };
            let chosen: Vec<Context> = picked.iter().map(|&i| p.right_class[i].clone()).collect();
            ClassPosition::new(budget, p.left_class.clone(), chosen)
        }
        ClassMove::Supplement(m) => {
            let successors = supplement_successors(p, m, qset, caps)?;
            let j = match reply {
                Some(&ClassReply::Component(j)) if j < m.tuples.len() => j,
                _ => {
                    return Err(Error::IllegalMove(
                        "a supplementing move needs one argument slot to be chosen".into(),
                    ))
                }
            };
            let (plus, minus) = successors[j].clone();
            ClassPosition::new(m.splits[j], plus, minus)
        }
    }
}

/// Validate a supplementing move and build the successor classes of every
/// argument slot: the chosen extensions on the left, the rest on the right.
fn supplement_successors(
    p: &ClassPosition,
    m: &SupplementMove,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<Vec<(Vec<Context>, Vec<Context>)>> {
    let q = qset
        .get(&m.quantifier)
        .ok_or_else(|| Error::UnknownQuantifier(m.quantifier.clone()))?;
    let k = q.width();
    if p.budget < k + 1 {
        return Err(Error::IllegalMove(format!(
            "supplementing with `{}` needs a budget of at least {}",
            m.quantifier,
            k + 1
        )));
    }
    if m.tuples.len() != k {
        return Err(Error::IllegalMove(format!(
            "`{}` takes {} argument slot(s), got {}",
            m.quantifier,
            k,
            m.tuples.len()
        )));
    }
    for (j, t) in m.tuples.iter().enumerate() {
        if t.len() != q.qtype().arity(j) {
            return Err(Error::IllegalMove(format!(
                "argument slot {} of `{}` binds {} variable(s), got {}",
                j + 1,
                m.quantifier,
                q.qtype().arity(j),
                t.len()
            )));
        }
    }
    if m.splits.len() != k || m.splits.iter().any(|&u| u == 0) || m.splits.iter().sum::<usize>() != p.budget - 1 {
        return Err(Error::IllegalMove(format!(
            "the slot budgets must be positive and sum to {}",
            p.budget - 1
        )));
    }
    let all: Vec<&Context> = p.left_class.iter().chain(p.right_class.iter()).collect();
    if m.sets.len() != all.len() {
        return Err(Error::IllegalMove(format!(
            "expected one tuple-set vector per context ({}), got {}",
            all.len(),
            m.sets.len()
        )));
    }
    // the move assigns tuple sets to contexts as a function on the union of
    // the classes, so a context appearing on both sides gets one value
    for (i, a) in all.iter().enumerate() {
        for (i2, b) in all.iter().enumerate().skip(i + 1) {
            if a.canonical_key() == b.canonical_key() && m.sets[i] != m.sets[i2] {
                return Err(Error::IllegalMove(
                    "identical contexts must receive identical tuple sets".into(),
                ));
            }
        }
    }
    for (i, c) in all.iter().enumerate() {
        if m.sets[i].len() != k {
            return Err(Error::IllegalMove(format!(
                "context {i} needs one tuple set per argument slot ({k})"
            )));
        }
        let dom = c.structure().domain_size();
        for (j, t) in m.tuples.iter().enumerate() {
            let universe = tuples_respecting(dom, t);
            caps.check("max-tuple-universe", caps.max_tuple_universe, universe.len())?;
            for tuple in &m.sets[i][j] {
                if !universe.contains(tuple) {
                    return Err(Error::IllegalMove(format!(
                        "tuple {} does not respect ({}) on context {i}",
                        fmt_tuple(tuple),
                        t.vars().join(",")
                    )));
                }
            }
        }
        let accepted = q_accepts(q, dom, &m.sets[i])?;
        let is_left = i < p.left_class.len();
        if accepted != is_left {
            return Err(Error::IllegalMove(format!(
                "`{}` must accept the sets on every left context and reject them on every right context (context {i} fails)",
                m.quantifier
            )));
        }
    }
    let mut out = Vec::with_capacity(k);
    for (j, t) in m.tuples.iter().enumerate() {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (i, c) in all.iter().enumerate() {
            for tuple in tuples_respecting(c.structure().domain_size(), t) {
                let ext = c.extend(t, &tuple)?;
                if m.sets[i][j].contains(&tuple) {
                    plus.push(ext);
                } else {
                    minus.push(ext);
                }
            }
        }
        out.push((dedup_contexts(plus), dedup_contexts(minus)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// the class engine: winnable bipartitions per universe and budget
// ---------------------------------------------------------------------------

/// Bitmask over the contexts of one universe; universes can outgrow 64
/// contexts a few supplements down, hence a block vector.
type Bits = Vec<u64>;

fn bits_blocks(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

fn bits_zero(n: usize) -> Bits {
    vec![0u64; bits_blocks(n)]
}

fn set_bit(bits: &mut Bits, i: usize) {
    bits[i / 64] |= 1u64 << (i % 64);
}

fn get_bit(bits: &[u64], i: usize) -> bool {
    bits[i / 64] >> (i % 64) & 1 == 1
}

fn bits_and(a: &[u64], b: &[u64]) -> Bits {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

fn bits_not(a: &[u64], n: usize) -> Bits {
    let mut out: Bits = a.iter().map(|x| !x).collect();
    let rem = n % 64;
    if rem != 0 {
        let last = out.len() - 1;
        out[last] &= (1u64 << rem) - 1;
    } else if n == 0 {
        out[0] = 0;
    }
    out
}

/// The orbit-distinct contexts in play at some point of the game, sorted by
/// orbit key so equal universes intern to one id.
#[derive(Debug)]
struct Universe {
    contexts: Vec<Context>,
    vars: Vec<String>,
    domains: Vec<usize>,
}

#[derive(Debug, Default)]
struct UniverseStore {
    list: Vec<Arc<Universe>>,
    index: HashMap<String, usize>,
}

/// For one parent universe and one bound tuple: the child universe of
/// orbit-distinct extensions, and per parent context the respecting tuples
/// with the child index each lands on.
#[derive(Debug)]
struct ChildMap {
    universe: usize,
    slices: Vec<Vec<(Vec<usize>, usize)>>,
}

#[derive(Debug)]
struct ClassEngine {
    qset: QuantifierSet,
    caps: Caps,
    /// The variable pool the game may bind: the variables of the start
    /// position plus `fresh_vars` fresh names — the same pool exhaustive
    /// formula enumeration searches, so the two sides explore one space.
    allowed: BTreeSet<String>,
    store: Mutex<UniverseStore>,
    children: Mutex<HashMap<(usize, String), Arc<ChildMap>>>,
    rsets: Mutex<HashMap<(usize, usize), Arc<Vec<Bits>>>>,
}

impl ClassEngine {
    fn new(seed_vars: &BTreeSet<String>, qset: &QuantifierSet, caps: &Caps) -> ClassEngine {
        let mut allowed = seed_vars.clone();
        allowed.extend(fresh_names(seed_vars, caps.fresh_vars));
        ClassEngine {
            qset: qset.clone(),
            caps: caps.clone(),
            allowed,
            store: Mutex::new(UniverseStore::default()),
            children: Mutex::new(HashMap::new()),
            rsets: Mutex::new(HashMap::new()),
        }
    }

    fn universe(&self, id: usize) -> Arc<Universe> {
        self.store.lock().expect("engine store").list[id].clone()
    }

    /// Intern a universe given by contexts pre-sorted by their orbit keys.
    fn intern_universe(&self, contexts: Vec<Context>, keys: &[String]) -> usize {
        let key = keys.join("|");
        let mut store = self.store.lock().expect("engine store");
        if let Some(&id) = store.index.get(&key) {
            return id;
        }
        let vars: Vec<String> = contexts
            .first()
            .map(|c| c.assignment().domain_set().into_iter().collect())
            .unwrap_or_default();
        let domains = contexts.iter().map(|c| c.structure().domain_size()).collect();
        let id = store.list.len();
        store.list.push(Arc::new(Universe { contexts, vars, domains }));
        store.index.insert(key, id);
        id
    }

    /// The honest game value of `(budget, left, right)`.  Orbit-equivalent
    /// contexts satisfy the same formulas, so both sides are deduplicated up
    /// to automorphism first, and a context shared by the two sides (up to
    /// automorphism) hands the game to Player II at every budget.
    fn value(&self, budget: usize, left: &[Context], right: &[Context]) -> Result<Player> {
        debug_assert!(budget >= 1);
        let mut reps: BTreeMap<String, (Context, bool)> = BTreeMap::new();
        for c in right {
            reps.entry(c.orbit_key()).or_insert_with(|| (c.clone(), false));
        }
        for c in left {
            match reps.entry(c.orbit_key()) {
                std::collections::btree_map::Entry::Occupied(e) => {
                    if !e.get().1 {
                        return Ok(Player::Two);
                    }
                }
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert((c.clone(), true));
                }
            }
        }
        if reps.is_empty() {
            // no context constrains the formula at all
            return Ok(Player::One);
        }
        let n = reps.len();
        let keys: Vec<String> = reps.keys().cloned().collect();
        let mut contexts = Vec::with_capacity(n);
        let mut need = bits_zero(n);
        for (i, (_, (c, is_left))) in reps.into_iter().enumerate() {
            if is_left {
                set_bit(&mut need, i);
            }
            contexts.push(c);
        }
        let id = self.intern_universe(contexts, &keys);
        let r = self.rset(id, budget)?;
        Ok(if r.binary_search(&need).is_ok() { Player::One } else { Player::Two })
    }

    /// The child map of `id` under the bound tuple `vars`.
    fn child(&self, id: usize, vars: &VarTuple) -> Result<Arc<ChildMap>> {
        let key = (id, vars.vars().join(","));
        if let Some(m) = self.children.lock().expect("engine children").get(&key) {
            return Ok(m.clone());
        }
        let uni = self.universe(id);
        let mut index: BTreeMap<String, Context> = BTreeMap::new();
        let mut rows: Vec<Vec<(Vec<usize>, String)>> = Vec::with_capacity(uni.contexts.len());
        for c in &uni.contexts {
            let tuples = tuples_respecting(c.structure().domain_size(), vars);
            self.caps
                .check("max-tuple-universe", self.caps.max_tuple_universe, tuples.len())?;
            let mut row = Vec::with_capacity(tuples.len());
            for t in tuples {
                let ext = c.extend(vars, &t)?;
                let k = ext.orbit_key();
                index.entry(k.clone()).or_insert(ext);
                row.push((t, k));
            }
            rows.push(row);
        }
        let keys: Vec<String> = index.keys().cloned().collect();
        let contexts: Vec<Context> = index.into_values().collect();
        let child_id = self.intern_universe(contexts, &keys);
        let pos: HashMap<&String, usize> = keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let slices = rows
            .into_iter()
            .map(|row| row.into_iter().map(|(t, k)| (t, pos[&k])).collect())
            .collect();
        let map = Arc::new(ChildMap { universe: child_id, slices });
        self.children.lock().expect("engine children").insert(key, map.clone());
        Ok(map)
    }

    /// Every left side of a bipartition of universe `id` that Player I wins
    /// with `budget`:
    ///
    /// * budget 1 — exactly the truth sets of atoms;
    /// * swap — complements of sets winnable with one unit less;
    /// * split — intersections of sets winnable with the two halves (the
    ///   halves cover the complements of the factors);
    /// * supplement — acceptance patterns of the quantifier over winnable
    ///   child selections, one per argument slot.
    fn rset(&self, id: usize, budget: usize) -> Result<Arc<Vec<Bits>>> {
        debug_assert!(budget >= 1);
        if let Some(r) = self.rsets.lock().expect("engine rsets").get(&(id, budget)) {
            return Ok(r.clone());
        }
        let uni = self.universe(id);
        let n = uni.contexts.len();
        let mut out: BTreeSet<Bits> = BTreeSet::new();
        if let Some(first) = uni.contexts.first() {
            let vocab = first.structure().vocabulary().clone();
            for atom in atom_candidates(&uni.vars, &vocab) {
                let mut mask = bits_zero(n);
                for (i, c) in uni.contexts.iter().enumerate() {
                    if atom.eval(c, &self.qset)? {
                        set_bit(&mut mask, i);
                    }
                }
                out.insert(mask);
            }
        }
        if budget >= 2 {
            for s in self.rset(id, budget - 1)?.iter() {
                out.insert(bits_not(s, n));
            }
            for u in 1..budget {
                let v = budget - u;
                if u > v {
                    break;
                }
                let ru = self.rset(id, u)?;
                let rv = self.rset(id, v)?;
                self.caps.check(
                    "max-synth-entries",
                    self.caps.max_synth_entries,
                    ru.len().saturating_mul(rv.len()),
                )?;
                for a in ru.iter() {
                    for b in rv.iter() {
                        out.insert(bits_and(a, b));
                    }
                }
            }
            let quantifiers: Vec<Quantifier> = self.qset.iter().cloned().collect();
            for q in &quantifiers {
                let k = q.width();
                if budget < k + 1 {
                    continue;
                }
                let existing: BTreeSet<String> = uni.vars.iter().cloned().collect();
                let mut slot_tuples: Vec<Vec<VarTuple>> = Vec::with_capacity(k);
                for j in 0..k {
                    let ts: Vec<VarTuple> = canonical_bound_tuples(&existing, q.qtype().arity(j))
                        .into_iter()
                        .filter(|t| t.vars().iter().all(|v| self.allowed.contains(v)))
                        .collect();
                    slot_tuples.push(ts);
                }
                if slot_tuples.iter().any(Vec::is_empty) {
                    continue;
                }
                let sizes: Vec<usize> = slot_tuples.iter().map(Vec::len).collect();
                for combo in index_combos(&sizes) {
                    let tuples: Vec<&VarTuple> = combo.iter().zip(&slot_tuples).map(|(&i, ts)| &ts[i]).collect();
                    let mut maps = Vec::with_capacity(k);
                    for t in &tuples {
                        maps.push(self.child(id, t)?);
                    }
                    for split in compositions(budget - 1, k) {
                        let mut rs = Vec::with_capacity(k);
                        for (j, map) in maps.iter().enumerate() {
                            rs.push(self.rset(map.universe, split[j])?);
                        }
                        let mut product = 1usize;
                        for r in &rs {
                            product = product.saturating_mul(r.len());
                        }
                        self.caps
                            .check("max-synth-entries", self.caps.max_synth_entries, product)?;
                        let pick_sizes: Vec<usize> = rs.iter().map(|r| r.len()).collect();
                        for pick in index_combos(&pick_sizes) {
                            let sel: Vec<&Bits> = pick.iter().zip(&rs).map(|(&i, r)| &r[i]).collect();
                            let mut mask = bits_zero(n);
                            for i in 0..n {
                                let accepted = if q.cardinality_only() {
                                    let counts: Vec<usize> = (0..k)
                                        .map(|j| {
                                            maps[j].slices[i]
                                                .iter()
                                                .filter(|(_, ci)| get_bit(sel[j], *ci))
                                                .count()
                                        })
                                        .collect();
                                    q.accepts_counts(uni.domains[i], &counts)?
                                } else {
                                    let sets: Vec<TupleSet> = (0..k)
                                        .map(|j| {
                                            maps[j].slices[i]
                                                .iter()
                                                .filter(|(_, ci)| get_bit(sel[j], *ci))
                                                .map(|(t, _)| t.clone())
                                                .collect()
                                        })
                                        .collect();
                                    q_accepts(q, uni.domains[i], &sets)?
                                };
                                if accepted {
                                    set_bit(&mut mask, i);
                                }
                            }
                            out.insert(mask);
                        }
                    }
                }
            }
        }
        self.caps
            .check("max-synth-entries", self.caps.max_synth_entries, out.len())?;
        let arc = Arc::new(out.into_iter().collect::<Vec<_>>());
        self.rsets
            .lock()
            .expect("engine rsets")
            .insert((id, budget), arc.clone());
        Ok(arc)
    }
}

/// Ordered splits of `total` into `parts` positive summands.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if parts == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    if total < parts {
        return out;
    }
    if parts == 1 {
        out.push(vec![total]);
        return out;
    }
    for head in 1..=total - (parts - 1) {
        for mut tail in compositions(total - head, parts - 1) {
            let mut c = Vec::with_capacity(parts);
            c.push(head);
            c.append(&mut tail);
            out.push(c);
        }
    }
    out
}

/// Every ordered pair of index sets whose union covers `0..n`: each index
/// goes to the first set, the second, or both.
fn ordered_covers(n: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let total = 3usize.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut first = Vec::new();
        let mut second = Vec::new();
        let mut c = code;
        for i in 0..n {
            match c % 3 {
                0 => first.push(i),
                1 => second.push(i),
                _ => {
                    first.push(i);
                    second.push(i);
                }
            }
            c /= 3;
        }
        out.push((first, second));
    }
    out
}

// ---------------------------------------------------------------------------
// class game: solver
// ---------------------------------------------------------------------------

/// A solved class game.
#[derive(Debug)]
pub struct ClassOutcome {
    winner: Player,
    start: ClassPosition,
    engine: ClassEngine,
}

/// Solve the class game.  An empty left class is vacuously separated — from
/// anything, itself included — so Player I wins it at every budget; all
/// other positions get their honest game value.
pub fn solve_class_game(p: &ClassPosition, qset: &QuantifierSet, caps: &Caps) -> Result<ClassOutcome> {
    let engine = class_engine_for(p, qset, caps)?;
    let winner = if p.left_class.is_empty() {
        Player::One
    } else {
        engine.value(p.budget, &p.left_class, &p.right_class)?
    };
    Ok(ClassOutcome {
        winner,
        start: p.clone(),
        engine,
    })
}

fn class_engine_for(p: &ClassPosition, qset: &QuantifierSet, caps: &Caps) -> Result<ClassEngine> {
    caps.check("max-budget", caps.max_budget, p.budget)?;
    caps.check("max-class-contexts", caps.max_class_contexts, p.left_class.len())?;
    caps.check("max-class-contexts", caps.max_class_contexts, p.right_class.len())?;
    for c in p.left_class.iter().chain(p.right_class.iter()) {
        caps.check_domain(c.structure().domain_size())?;
    }
    let seed = p
        .left_class
        .iter()
        .chain(p.right_class.iter())
        .next()
        .map(|c| c.assignment().domain_set())
        .unwrap_or_default();
    Ok(ClassEngine::new(&seed, qset, caps))
}

impl ClassOutcome {
    pub fn winner(&self) -> Player {
        self.winner
    }

    pub fn start(&self) -> &ClassPosition {
        &self.start
    }

    /// A winning Player I move at `p` if the position is won for Player I,
    /// a stalling swap if it is lost, `None` if it is already decided.
    pub fn best_move(&self, p: &ClassPosition) -> Result<Option<ClassMove>> {
        if let GameStatus::Won(..) = class_status(p) {
            return Ok(None);
        }
        if self.engine.value(p.budget, &p.left_class, &p.right_class)? == Player::Two {
            return Ok(Some(ClassMove::Swap));
        }
        if self.engine.value(p.budget - 1, &p.right_class, &p.left_class)? == Player::One {
            return Ok(Some(ClassMove::Swap));
        }
        if let Some(mv) = self.winning_split(p)? {
            return Ok(Some(mv));
        }
        if let Some(mv) = self.winning_supplement(p)? {
            return Ok(Some(mv));
        }
        Err(Error::Invalid(
            "the move search could not reproduce the computed winner".into(),
        ))
    }

    fn winning_split(&self, p: &ClassPosition) -> Result<Option<ClassMove>> {
        let n = p.right_class.len();
        let covers = 3usize
            .checked_pow(n as u32)
            .ok_or_else(|| Error::cap("max-synth-entries", self.engine.caps.max_synth_entries, usize::MAX))?;
        self.engine
            .caps
            .check("max-synth-entries", self.engine.caps.max_synth_entries, covers)?;
        for u in 1..p.budget {
            let v = p.budget - u;
            for (first, second) in ordered_covers(n) {
                let fs: Vec<Context> = first.iter().map(|&i| p.right_class[i].clone()).collect();
                let ss: Vec<Context> = second.iter().map(|&i| p.right_class[i].clone()).collect();
                if self.engine.value(u, &p.left_class, &fs)? == Player::One
                    && self.engine.value(v, &p.left_class, &ss)? == Player::One
                {
                    return Ok(Some(ClassMove::Split(SplitMove { u, v, first, second })));
                }
            }
        }
        Ok(None)
    }

    fn winning_supplement(&self, p: &ClassPosition) -> Result<Option<ClassMove>> {
        let caps = &self.engine.caps;
        let all: Vec<&Context> = p.left_class.iter().chain(p.right_class.iter()).collect();
        let existing: BTreeSet<String> = all
            .first()
            .map(|c| c.assignment().domain_set())
            .unwrap_or_default();
        let quantifiers: Vec<Quantifier> = self.engine.qset.iter().cloned().collect();
        for q in &quantifiers {
            let k = q.width();
            if p.budget < k + 1 {
                continue;
            }
            let mut slot_tuples: Vec<Vec<VarTuple>> = Vec::with_capacity(k);
            for j in 0..k {
                let ts: Vec<VarTuple> = canonical_bound_tuples(&existing, q.qtype().arity(j))
                    .into_iter()
                    .filter(|t| t.vars().iter().all(|v| self.engine.allowed.contains(v)))
                    .collect();
                slot_tuples.push(ts);
            }
            if slot_tuples.iter().any(Vec::is_empty) {
                continue;
            }
            let sizes: Vec<usize> = slot_tuples.iter().map(Vec::len).collect();
            'combo: for combo in index_combos(&sizes) {
                let tuples: Vec<VarTuple> = combo
                    .iter()
                    .zip(&slot_tuples)
                    .map(|(&i, ts)| ts[i].clone())
                    .collect();
                // per context, every slot-set selection the quantifier
                // accepts on the left and rejects on the right
                let mut options: Vec<Vec<Vec<TupleSet>>> = Vec::with_capacity(all.len());
                for (i, c) in all.iter().enumerate() {
                    let is_left = i < p.left_class.len();
                    let dom = c.structure().domain_size();
                    let mut universes = Vec::with_capacity(k);
                    let mut mask_sizes = Vec::with_capacity(k);
                    let mut selections = 1usize;
                    for t in &tuples {
                        let u = tuples_respecting(dom, t);
                        caps.check("max-tuple-universe", caps.max_tuple_universe, u.len())?;
                        selections = selections.saturating_mul(1usize << u.len());
                        mask_sizes.push(1usize << u.len());
                        universes.push(u);
                    }
                    caps.check("max-synth-entries", caps.max_synth_entries, selections)?;
                    let mut opts = Vec::new();
                    for masks in index_combos(&mask_sizes) {
                        let sets: Vec<TupleSet> = masks
                            .iter()
                            .zip(&universes)
                            .map(|(&m, u)| {
                                u.iter()
                                    .enumerate()
                                    .filter(|(b, _)| m >> b & 1 == 1)
                                    .map(|(_, t)| t.clone())
                                    .collect()
                            })
                            .collect();
                        if q_accepts(q, dom, &sets)? == is_left {
                            opts.push(sets);
                        }
                    }
                    if opts.is_empty() {
                        continue 'combo;
                    }
                    opts.sort_by_key(|sets| sets.iter().map(BTreeSet::len).sum::<usize>());
                    options.push(opts);
                }
                let option_sizes: Vec<usize> = options.iter().map(Vec::len).collect();
                let mut assemblies = 1usize;
                for &s in &option_sizes {
                    assemblies = assemblies.saturating_mul(s);
                }
                caps.check("max-synth-entries", caps.max_synth_entries, assemblies)?;
                for assembly in index_combos(&option_sizes) {
                    let sets: Vec<Vec<TupleSet>> = assembly
                        .iter()
                        .zip(&options)
                        .map(|(&i, opts)| opts[i].clone())
                        .collect();
                    // successors per slot
                    let mut slots = Vec::with_capacity(k);
                    for (j, t) in tuples.iter().enumerate() {
                        let mut plus = Vec::new();
                        let mut minus = Vec::new();
                        for (i, c) in all.iter().enumerate() {
                            for tuple in tuples_respecting(c.structure().domain_size(), t) {
                                let ext = c.extend(t, &tuple)?;
                                if sets[i][j].contains(&tuple) {
                                    plus.push(ext);
                                } else {
                                    minus.push(ext);
                                }
                            }
                        }
                        slots.push((dedup_contexts(plus), dedup_contexts(minus)));
                    }
                    for split in compositions(p.budget - 1, k) {
                        let mut winning = true;
                        for (j, (plus, minus)) in slots.iter().enumerate() {
                            if self.engine.value(split[j], plus, minus)? == Player::Two {
                                winning = false;
                                break;
                            }
                        }
                        if winning {
                            return Ok(Some(ClassMove::Supplement(SupplementMove {
                                quantifier: q.name().to_string(),
                                tuples,
                                splits: split,
                                sets,
                            })));
                        }
                    }
                }
            }
        }
        Ok(None)
    }

    /// Player II's best reply to `mv` at `p`: a branch Player II wins if one
    /// exists, the first branch otherwise; `None` when the move admits no
    /// reply (a swap).
    pub fn best_reply(&self, p: &ClassPosition, mv: &ClassMove) -> Result<Option<ClassReply>> {
        let replies = class_replies(mv);
        let Some(&first) = replies.first() else {
            return Ok(None);
        };
        for r in &replies {
            let next = class_apply(p, mv, Some(r), &self.engine.qset, &self.engine.caps)?;
            if self.engine.value(next.budget, &next.left_class, &next.right_class)? == Player::Two {
                return Ok(Some(*r));
            }
        }
        Ok(Some(first))
    }

    /// Replay the game with both sides following the solver.
    pub fn sample_transcript(&self) -> Result<Transcript> {
        let mut steps = Vec::new();
        let mut p = self.start.clone();
        if p.left_class.is_empty() {
            steps.push(TranscriptStep {
                position: p.to_string(),
                actor: Player::One.to_string(),
                action: "game over".into(),
                note: "the empty left class is separable from anything, itself included".into(),
            });
            return Ok(Transcript { steps, winner: self.winner });
        }
        loop {
            match class_status(&p) {
                GameStatus::Won(winner, reason) => {
                    steps.push(TranscriptStep {
                        position: p.to_string(),
                        actor: winner.to_string(),
                        action: "game over".into(),
                        note: reason,
                    });
                    return Ok(Transcript { steps, winner });
                }
                GameStatus::Ongoing(_) => {}
            }
            let mv = self
                .best_move(&p)?
                .ok_or_else(|| Error::Invalid("no move available in an ongoing position".into()))?;
            let reply = self.best_reply(&p, &mv)?;
            let next = class_apply(&p, &mv, reply.as_ref(), &self.engine.qset, &self.engine.caps)?;
            steps.push(TranscriptStep {
                position: p.to_string(),
                actor: Player::One.to_string(),
                action: mv.to_string(),
                note: format!("budget {} remains in play", p.budget),
            });
            if let Some(r) = reply {
                steps.push(TranscriptStep {
                    position: p.to_string(),
                    actor: Player::Two.to_string(),
                    action: r.to_string(),
                    note: format!("continues with budget {}", next.budget),
                });
            }
            p = next;
        }
    }
}

// ---------------------------------------------------------------------------
// weak game
// ---------------------------------------------------------------------------

/// A solved weak game: the winner and the class-game value of every pair
/// Player II could commit to (indices into the deduplicated classes).
#[derive(Debug)]
pub struct WeakOutcome {
    winner: Player,
    pair_values: Vec<(usize, usize, Player)>,
}

impl WeakOutcome {
    pub fn winner(&self) -> Player {
        self.winner
    }

    pub fn pair_values(&self) -> &[(usize, usize, Player)] {
        &self.pair_values
    }
}

/// Solve the weak game: Player II commits to one context from each class,
/// then the class game is played on the singletons.  With an empty class
/// Player II cannot commit to a pair and loses outright.
pub fn solve_weak_game(
    budget: usize,
    left: &[Context],
    right: &[Context],
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<WeakOutcome> {
    let p = ClassPosition::new(budget, left.to_vec(), right.to_vec())?;
    let engine = class_engine_for(&p, qset, caps)?;
    if p.left_class.is_empty() || p.right_class.is_empty() {
        return Ok(WeakOutcome {
            winner: Player::One,
            pair_values: Vec::new(),
        });
    }
    let mut winner = Player::One;
    let mut pair_values = Vec::with_capacity(p.left_class.len() * p.right_class.len());
    for (i, a) in p.left_class.iter().enumerate() {
        for (j, b) in p.right_class.iter().enumerate() {
            let w = engine.value(budget, std::slice::from_ref(a), std::slice::from_ref(b))?;
            if w == Player::Two {
                winner = Player::Two;
            }
            pair_values.push((i, j, w));
        }
    }
    Ok(WeakOutcome { winner, pair_values })
}

// ---------------------------------------------------------------------------
// pair game: status, replies, apply
// ---------------------------------------------------------------------------

/// Referee view of a pair-game position, mirroring [`class_status`].
pub fn pair_status(p: &PairPosition) -> GameStatus {
    if let Some(atom) = atomic_separates(std::slice::from_ref(&p.left), std::slice::from_ref(&p.right)) {
        return GameStatus::Won(Player::One, format!("the atom {atom} separates the pair"));
    }
    if p.budget == 1 {
        return GameStatus::Won(Player::Two, "the budget is spent and no atom separates".into());
    }
    GameStatus::Ongoing(Player::One)
}

/// Validate a supplementing move and return the respecting tuple universes
/// of the two models.
fn pair_supplement_data(
    p: &PairPosition,
    quantifier: &str,
    tuple: &VarTuple,
    left_set: &TupleSet,
    right_set: &TupleSet,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
    let q = qset
        .get(quantifier)
        .ok_or_else(|| Error::UnknownQuantifier(quantifier.to_string()))?;
    if q.width() != 1 {
        return Err(Error::IllegalMove(format!(
            "the pair game supplements with one tuple set per model, so `{}` (width {}) cannot be played",
            quantifier,
            q.width()
        )));
    }
    if tuple.len() != q.qtype().arity(0) {
        return Err(Error::IllegalMove(format!(
            "`{}` binds {} variable(s), got {}",
            quantifier,
            q.qtype().arity(0),
            tuple.len()
        )));
    }
    let tm = tuples_respecting(p.left.structure().domain_size(), tuple);
    let tn = tuples_respecting(p.right.structure().domain_size(), tuple);
    let limit = caps.max_tuple_universe.min(u32::BITS as usize - 1);
    caps.check("max-tuple-universe", limit, tm.len())?;
    caps.check("max-tuple-universe", limit, tn.len())?;
    for t in left_set {
        if !tm.contains(t) {
            return Err(Error::IllegalMove(format!(
                "tuple {} does not respect ({}) on the left model",
                fmt_tuple(t),
                tuple.vars().join(",")
            )));
        }
    }
    for t in right_set {
        if !tn.contains(t) {
            return Err(Error::IllegalMove(format!(
                "tuple {} does not respect ({}) on the right model",
                fmt_tuple(t),
                tuple.vars().join(",")
            )));
        }
    }
    if !q_accepts(q, p.left.structure().domain_size(), std::slice::from_ref(left_set))? {
        return Err(Error::IllegalMove(format!(
            "`{quantifier}` must accept the chosen set on the left model"
        )));
    }
    if q_accepts(q, p.right.structure().domain_size(), std::slice::from_ref(right_set))? {
        return Err(Error::IllegalMove(format!(
            "`{quantifier}` must reject the chosen set on the right model"
        )));
    }
    Ok((tm, tn))
}

/// The replies Player II may choose against a pair-game move.  A
/// supplementing move admits four families of replies; when all four are
/// empty Player II must move but cannot, and loses.
pub fn pair_replies(
    p: &PairPosition,
    mv: &PairMove,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<Vec<PairReply>> {
    match mv {
        PairMove::Swap => Ok(Vec::new()),
        PairMove::Split { .. } => Ok(vec![PairReply::First, PairReply::Second]),
        PairMove::Supplement { quantifier, tuple, left_set, right_set } => {
            let (tm, tn) = pair_supplement_data(p, quantifier, tuple, left_set, right_set, qset, caps)?;
            let m_out: Vec<&Vec<usize>> = tm.iter().filter(|t| !left_set.contains(*t)).collect();
            let n_out: Vec<&Vec<usize>> = tn.iter().filter(|t| !right_set.contains(*t)).collect();
            let mut out = Vec::new();
            for a in left_set {
                for b in &n_out {
                    out.push(PairReply::Matched { left: a.clone(), right: (*b).clone() });
                }
            }
            for a in &m_out {
                for b in right_set {
                    out.push(PairReply::Crossed { left: (*a).clone(), right: b.clone() });
                }
            }
            for a in left_set {
                for a2 in &m_out {
                    out.push(PairReply::LeftPair { inside: a.clone(), outside: (*a2).clone() });
                }
            }
            for b in right_set {
                for b2 in &n_out {
                    out.push(PairReply::RightPair { inside: b.clone(), outside: (*b2).clone() });
                }
            }
            Ok(out)
        }
    }
}

/// Validate a pair-game move (and the reply when one is due) and produce the
/// next position.
pub fn pair_apply(
    p: &PairPosition,
    mv: &PairMove,
    reply: Option<&PairReply>,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<PairPosition> {
    if let GameStatus::Won(..) = pair_status(p) {
        return Err(Error::IllegalMove("the game is already decided".into()));
    }
    match mv {
        PairMove::Swap => {
            if reply.is_some() {
                return Err(Error::IllegalMove("a swap admits no reply".into()));
            }
            PairPosition::new(p.budget - 1, p.right.clone(), p.left.clone())
        }
        PairMove::Split { u, v } => {
            if *u == 0 || *v == 0 || u + v != p.budget {
                return Err(Error::IllegalMove(format!(
                    "a split needs positive budgets summing to {}",
                    p.budget
                )));
            }
            let budget = match reply {
                Some(PairReply::First) => *u,
                Some(PairReply::Second) => *v,
                _ => return Err(Error::IllegalMove("a split needs one budget to be chosen".into())),
            };
            PairPosition::new(budget, p.left.clone(), p.right.clone())
        }
        PairMove::Supplement { quantifier, tuple, left_set, right_set } => {
            let (tm, tn) = pair_supplement_data(p, quantifier, tuple, left_set, right_set, qset, caps)?;
            let reply = reply.ok_or_else(|| Error::IllegalMove("a supplementing move needs a reply".into()))?;
            let chosen = |set: &TupleSet, t: &Vec<usize>| set.contains(t);
            match reply {
                PairReply::Matched { left, right } => {
                    if !chosen(left_set, left) || !tn.contains(right) || chosen(right_set, right) {
                        return Err(Error::IllegalMove(
                            "a matched reply pairs a chosen left tuple with an unchosen right tuple".into(),
                        ));
                    }
                    PairPosition::new(p.budget - 1, p.left.extend(tuple, left)?, p.right.extend(tuple, right)?)
                }
                PairReply::Crossed { left, right } => {
                    if !tm.contains(left) || chosen(left_set, left) || !chosen(right_set, right) {
                        return Err(Error::IllegalMove(
                            "a crossed reply pairs an unchosen left tuple with a chosen right tuple".into(),
                        ));
                    }
                    PairPosition::new(p.budget - 1, p.right.extend(tuple, right)?, p.left.extend(tuple, left)?)
                }
                PairReply::LeftPair { inside, outside } => {
                    if !chosen(left_set, inside) || !tm.contains(outside) || chosen(left_set, outside) {
                        return Err(Error::IllegalMove(
                            "a left-pair reply plays a chosen tuple against an unchosen one on the left model".into(),
                        ));
                    }
                    PairPosition::new(p.budget - 1, p.left.extend(tuple, inside)?, p.left.extend(tuple, outside)?)
                }
                PairReply::RightPair { inside, outside } => {
                    if !chosen(right_set, inside) || !tn.contains(outside) || chosen(right_set, outside) {
                        return Err(Error::IllegalMove(
                            "a right-pair reply plays a chosen tuple against an unchosen one on the right model".into(),
                        ));
                    }
                    PairPosition::new(p.budget - 1, p.right.extend(tuple, inside)?, p.right.extend(tuple, outside)?)
                }
                PairReply::First | PairReply::Second => Err(Error::IllegalMove(
                    "budget choices answer splits, not supplements".into(),
                )),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// pair game: solver
// ---------------------------------------------------------------------------

/// Options for the pair-game solver.
#[derive(Debug, Clone)]
pub struct PairOptions {
    /// Offer the budget-split move to Player I.  The split never helps —
    /// a conjunction separates only if one conjunct does — and the solver's
    /// value is the same either way; the toggle exists to check that.
    pub include_split: bool,
}

impl Default for PairOptions {
    fn default() -> PairOptions {
        PairOptions { include_split: true }
    }
}

#[derive(Debug)]
struct PairEngine {
    qset: QuantifierSet,
    caps: Caps,
    include_split: bool,
    memo: Mutex<HashMap<String, Player>>,
}

impl PairEngine {
    fn value(&self, budget: usize, left: &Context, right: &Context) -> Result<Player> {
        if atomic_separates(std::slice::from_ref(left), std::slice::from_ref(right)).is_some() {
            return Ok(Player::One);
        }
        if budget == 1 {
            return Ok(Player::Two);
        }
        let key = format!("{}|{}|{}", budget, left.orbit_key(), right.orbit_key());
        if let Some(&w) = self.memo.lock().expect("pair memo").get(&key) {
            return Ok(w);
        }
        let mut won = self.value(budget - 1, right, left)? == Player::One;
        if !won && self.include_split {
            for u in 1..budget {
                if u > budget - u {
                    break;
                }
                if self.value(u, left, right)? == Player::One
                    && self.value(budget - u, left, right)? == Player::One
                {
                    won = true;
                    break;
                }
            }
        }
        if !won {
            won = self.winning_supplement(budget, left, right)?.is_some();
        }
        let w = if won { Player::One } else { Player::Two };
        self.memo.lock().expect("pair memo").insert(key, w);
        Ok(w)
    }

    /// A supplementing move all four reply families of which land Player II
    /// in losing positions, if one exists.  Replies are checked through
    /// per-extension win masks, so each candidate set pair costs a few mask
    /// operations once the child values are in.
    fn winning_supplement(&self, budget: usize, left: &Context, right: &Context) -> Result<Option<PairMove>> {
        let existing = left.assignment().domain_set();
        let quantifiers: Vec<Quantifier> = self.qset.iter().cloned().collect();
        for q in &quantifiers {
            if q.width() != 1 {
                continue;
            }
            let arity = q.qtype().arity(0);
            for tuple in canonical_bound_tuples(&existing, arity) {
                let tm = tuples_respecting(left.structure().domain_size(), &tuple);
                let tn = tuples_respecting(right.structure().domain_size(), &tuple);
                let limit = self.caps.max_tuple_universe.min(u32::BITS as usize - 1);
                self.caps.check("max-tuple-universe", limit, tm.len())?;
                self.caps.check("max-tuple-universe", limit, tn.len())?;
                let ml: Vec<Context> = tm.iter().map(|t| left.extend(&tuple, t)).collect::<Result<_>>()?;
                let nr: Vec<Context> = tn.iter().map(|t| right.extend(&tuple, t)).collect::<Result<_>>()?;
                let full_m = mask_full(tm.len());
                let full_n = mask_full(tn.len());
                // per-extension win masks for the four reply kinds
                let mut w1 = vec![0u32; tm.len()];
                let mut w3 = vec![0u32; tm.len()];
                for (a, la) in ml.iter().enumerate() {
                    for (b, rb) in nr.iter().enumerate() {
                        if self.value(budget - 1, la, rb)? == Player::One {
                            w1[a] |= 1 << b;
                        }
                    }
                    for (a2, la2) in ml.iter().enumerate() {
                        if self.value(budget - 1, la, la2)? == Player::One {
                            w3[a] |= 1 << a2;
                        }
                    }
                }
                let mut w2 = vec![0u32; tn.len()];
                let mut w4 = vec![0u32; tn.len()];
                for (b, rb) in nr.iter().enumerate() {
                    for (a, la) in ml.iter().enumerate() {
                        if self.value(budget - 1, rb, la)? == Player::One {
                            w2[b] |= 1 << a;
                        }
                    }
                    for (b2, rb2) in nr.iter().enumerate() {
                        if self.value(budget - 1, rb, rb2)? == Player::One {
                            w4[b] |= 1 << b2;
                        }
                    }
                }
                let accepted_m = classify_masks(q, left.structure().domain_size(), &tm, true)?;
                let rejected_n = classify_masks(q, right.structure().domain_size(), &tn, false)?;
                for &m in &accepted_m {
                    let m_out = full_m & !m;
                    // every chosen-against-unchosen pair on the left must be
                    // a Player I win
                    if mask_bits(m).any(|a| m_out & !w3[a] != 0) {
                        continue;
                    }
                    let mut and1 = full_n;
                    for a in mask_bits(m) {
                        and1 &= w1[a];
                    }
                    for &nmask in &rejected_n {
                        let n_out = full_n & !nmask;
                        if n_out & !and1 != 0 {
                            continue;
                        }
                        if mask_bits(nmask).any(|b| n_out & !w4[b] != 0) {
                            continue;
                        }
                        let mut and2 = full_m;
                        for b in mask_bits(nmask) {
                            and2 &= w2[b];
                        }
                        if m_out & !and2 != 0 {
                            continue;
                        }
                        let left_set: TupleSet = mask_bits(m).map(|a| tm[a].clone()).collect();
                        let right_set: TupleSet = mask_bits(nmask).map(|b| tn[b].clone()).collect();
                        return Ok(Some(PairMove::Supplement {
                            quantifier: q.name().to_string(),
                            tuple: tuple.clone(),
                            left_set,
                            right_set,
                        }));
                    }
                }
            }
        }
        Ok(None)
    }
}

fn mask_full(n: usize) -> u32 {
    if n == 0 {
        0
    } else {
        (1u32 << n) - 1
    }
}

fn mask_bits(mask: u32) -> impl Iterator<Item = usize> {
    (0..u32::BITS as usize).filter(move |i| mask >> i & 1 == 1)
}

/// All subsets of `tuples` (as masks) the quantifier accepts (`want` true)
/// or rejects (`want` false) on a domain of the given size.
fn classify_masks(q: &Quantifier, domain_size: usize, tuples: &[Vec<usize>], want: bool) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    if q.cardinality_only() {
        let mut by_count = Vec::with_capacity(tuples.len() + 1);
        for count in 0..=tuples.len() {
            by_count.push(q.accepts_counts(domain_size, &[count])?);
        }
        for mask in 0..=mask_full(tuples.len()) {
            if by_count[mask.count_ones() as usize] == want {
                out.push(mask);
            }
        }
    } else {
        for mask in 0..=mask_full(tuples.len()) {
            let set: TupleSet = mask_bits(mask).map(|i| tuples[i].clone()).collect();
            if q_accepts(q, domain_size, std::slice::from_ref(&set))? == want {
                out.push(mask);
            }
        }
    }
    Ok(out)
}

/// A solved pair game.
#[derive(Debug)]
pub struct PairOutcome {
    winner: Player,
    start: PairPosition,
    engine: PairEngine,
}

/// Solve the pair game with the default options.
pub fn solve_pair_game(p: &PairPosition, qset: &QuantifierSet, caps: &Caps) -> Result<PairOutcome> {
    solve_pair_game_with(p, qset, caps, &PairOptions::default())
}

/// Solve the pair game.
pub fn solve_pair_game_with(
    p: &PairPosition,
    qset: &QuantifierSet,
    caps: &Caps,
    options: &PairOptions,
) -> Result<PairOutcome> {
    caps.check("max-budget", caps.max_budget, p.budget)?;
    caps.check_domain(p.left.structure().domain_size())?;
    caps.check_domain(p.right.structure().domain_size())?;
    let engine = PairEngine {
        qset: qset.clone(),
        caps: caps.clone(),
        include_split: options.include_split,
        memo: Mutex::new(HashMap::new()),
    };
    let winner = engine.value(p.budget, &p.left, &p.right)?;
    Ok(PairOutcome {
        winner,
        start: p.clone(),
        engine,
    })
}

impl PairOutcome {
    pub fn winner(&self) -> Player {
        self.winner
    }

    pub fn start(&self) -> &PairPosition {
        &self.start
    }

    /// A winning Player I move at `p` if the position is won for Player I,
    /// a stalling swap if it is lost, `None` if it is already decided.
    pub fn best_move(&self, p: &PairPosition) -> Result<Option<PairMove>> {
        if let GameStatus::Won(..) = pair_status(p) {
            return Ok(None);
        }
        if self.engine.value(p.budget, &p.left, &p.right)? == Player::Two {
            return Ok(Some(PairMove::Swap));
        }
        if self.engine.value(p.budget - 1, &p.right, &p.left)? == Player::One {
            return Ok(Some(PairMove::Swap));
        }
        if self.engine.include_split {
            for u in 1..p.budget {
                if self.engine.value(u, &p.left, &p.right)? == Player::One
                    && self.engine.value(p.budget - u, &p.left, &p.right)? == Player::One
                {
                    return Ok(Some(PairMove::Split { u, v: p.budget - u }));
                }
            }
        }
        if let Some(mv) = self.engine.winning_supplement(p.budget, &p.left, &p.right)? {
            return Ok(Some(mv));
        }
        Err(Error::Invalid(
            "the move search could not reproduce the computed winner".into(),
        ))
    }

    /// Player II's best reply to `mv` at `p`: a branch Player II wins if one
    /// exists, any branch otherwise; `None` when no reply is available (after
    /// a swap, or when a supplement leaves Player II stuck — then Player II
    /// must move but cannot, and loses).
    pub fn best_reply(&self, p: &PairPosition, mv: &PairMove) -> Result<Option<PairReply>> {
        let replies = pair_replies(p, mv, &self.engine.qset, &self.engine.caps)?;
        let Some(first) = replies.first().cloned() else {
            return Ok(None);
        };
        for r in &replies {
            let next = pair_apply(p, mv, Some(r), &self.engine.qset, &self.engine.caps)?;
            if self.engine.value(next.budget, &next.left, &next.right)? == Player::Two {
                return Ok(Some(r.clone()));
            }
        }
        Ok(Some(first))
    }

    /// Replay the game with both sides following the solver.
    pub fn sample_transcript(&self) -> Result<Transcript> {
        let mut steps = Vec::new();
        let mut p = self.start.clone();
        loop {
            match pair_status(&p) {
                GameStatus::Won(winner, reason) => {
                    steps.push(TranscriptStep {
                        position: p.to_string(),
                        actor: winner.to_string(),
                        action: "game over".into(),
                        note: reason,
                    });
                    return Ok(Transcript { steps, winner });
                }
                GameStatus::Ongoing(_) => {}
            }
            let mv = self
                .best_move(&p)?
                .ok_or_else(|| Error::Invalid("no move available in an ongoing position".into()))?;
            let reply = self.best_reply(&p, &mv)?;
            steps.push(TranscriptStep {
                position: p.to_string(),
                actor: Player::One.to_string(),
                action: mv.to_string(),
                note: format!("budget {} remains in play", p.budget),
            });
            if matches!(mv, PairMove::Split { .. } | PairMove::Supplement { .. }) {
                let Some(r) = reply else {
                    steps.push(TranscriptStep {
                        position: p.to_string(),
                        actor: Player::Two.to_string(),
                        action: "game over".into(),
                        note: "no reply is available; a player who must move but cannot loses".into(),
                    });
                    return Ok(Transcript { steps, winner: Player::One });
                };
                let next = pair_apply(&p, &mv, Some(&r), &self.engine.qset, &self.engine.caps)?;
                steps.push(TranscriptStep {
                    position: p.to_string(),
                    actor: Player::Two.to_string(),
                    action: r.to_string(),
                    note: format!("continues with budget {}", next.budget),
                });
                p = next;
            } else {
                p = pair_apply(&p, &mv, None, &self.engine.qset, &self.engine.caps)?;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// least winning budget
// ---------------------------------------------------------------------------

/// Which game [`min_winning_budget`] scans.
#[derive(Debug, Clone, Copy)]
pub enum GameInstance<'a> {
    Class { left: &'a [Context], right: &'a [Context] },
    Weak { left: &'a [Context], right: &'a [Context] },
    Pair { left: &'a Context, right: &'a Context },
}

/// The least budget at which Player I wins the given game, scanned up to
/// `s_max`; solver work is shared across budgets.
pub fn min_winning_budget(
    instance: &GameInstance<'_>,
    s_max: usize,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<Option<usize>> {
    caps.check("max-budget", caps.max_budget, s_max)?;
    match *instance {
        GameInstance::Class { left, right } => {
            let p = ClassPosition::new(s_max.max(1), left.to_vec(), right.to_vec())?;
            let engine = class_engine_for(&p, qset, caps)?;
            if s_max == 0 {
                return Ok(None);
            }
            if p.left_class.is_empty() {
                return Ok(Some(1));
            }
            for s in 1..=s_max {
                if engine.value(s, &p.left_class, &p.right_class)? == Player::One {
                    return Ok(Some(s));
                }
            }
            Ok(None)
        }
        GameInstance::Weak { left, right } => {
            let p = ClassPosition::new(s_max.max(1), left.to_vec(), right.to_vec())?;
            let engine = class_engine_for(&p, qset, caps)?;
            if s_max == 0 {
                return Ok(None);
            }
            if p.left_class.is_empty() || p.right_class.is_empty() {
                return Ok(Some(1));
            }
            's: for s in 1..=s_max {
                for a in &p.left_class {
                    for b in &p.right_class {
                        if engine.value(s, std::slice::from_ref(a), std::slice::from_ref(b))? == Player::Two {
                            continue 's;
                        }
                    }
                }
                return Ok(Some(s));
            }
            Ok(None)
        }
        GameInstance::Pair { left, right } => {
            let p = PairPosition::new(s_max.max(1), left.clone(), right.clone())?;
            caps.check_domain(p.left.structure().domain_size())?;
            caps.check_domain(p.right.structure().domain_size())?;
            if s_max == 0 {
                return Ok(None);
            }
            let engine = PairEngine {
                qset: qset.clone(),
                caps: caps.clone(),
                include_split: true,
                memo: Mutex::new(HashMap::new()),
            };
            for s in 1..=s_max {
                if engine.value(s, &p.left, &p.right)? == Player::One {
                    return Ok(Some(s));
                }
            }
            Ok(None)
        }
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::min_separating_size;
    use crate::structures::{Assignment, Structure};
    use std::collections::BTreeMap;

    fn unary_vocab(names: &[&str]) -> Vocabulary {
        Vocabulary::new(names.iter().map(|n| (n.to_string(), 1))).unwrap()
    }

    fn structure(vocab: &Vocabulary, n: usize, rels: &[(&str, &[&[usize]])]) -> Structure {
        let map: BTreeMap<String, BTreeSet<Vec<usize>>> = rels
            .iter()
            .map(|(name, tuples)| {
                (
                    name.to_string(),
                    tuples.iter().map(|t| t.to_vec()).collect::<BTreeSet<_>>(),
                )
            })
            .collect();
        Structure::new(vocab.clone(), n, map).unwrap()
    }

    fn sentence(structure: &Structure) -> Context {
        Context::new(structure.clone(), Assignment::empty()).unwrap()
    }

    /// The running example: in a vocabulary of two unary relations, the
    /// four-element model `A` colors {0,1,2} with `B` and nothing with `R`;
    /// `B1` additionally marks 3 with `R`; `B2` colors only 0 with `B` and
    /// 1 with `R`.
    fn running_example() -> (Context, Context, Context) {
        let vocab = unary_vocab(&["B", "R"]);
        let a = structure(&vocab, 4, &[("B", &[&[0], &[1], &[2]]), ("R", &[])]);
        let b1 = structure(&vocab, 4, &[("B", &[&[0], &[1], &[2]]), ("R", &[&[3]])]);
        let b2 = structure(&vocab, 4, &[("B", &[&[0]]), ("R", &[&[1]])]);
        (sentence(&a), sentence(&b1), sentence(&b2))
    }

    /// Four singleton colors against a bare point: minimum separating size 3
    /// with `exactly=3`, yet Player I wins the pair game with budget 2.
    fn gap_pair() -> (Context, Context) {
        let vocab = unary_vocab(&["P1", "P2", "P3"]);
        let m = structure(&vocab, 4, &[("P1", &[&[0]]), ("P2", &[&[1]]), ("P3", &[&[2]])]);
        let n = structure(&vocab, 1, &[("P1", &[]), ("P2", &[]), ("P3", &[])]);
        (sentence(&m), sentence(&n))
    }

    fn qset(names: &[&str]) -> QuantifierSet {
        QuantifierSet::new(names.iter().map(|n| Quantifier::builtin(n).unwrap()).collect()).unwrap()
    }

    fn class_winner(budget: usize, left: &[Context], right: &[Context], qs: &QuantifierSet) -> Player {
        let p = ClassPosition::new(budget, left.to_vec(), right.to_vec()).unwrap();
        solve_class_game(&p, qs, &Caps::default()).unwrap().winner()
    }

    #[test]
    fn atomic_separation_finds_relation_atoms() {
        let (a, _, b2) = running_example();
        let vocab = a.structure().vocabulary().clone();
        let with_x = |s: &Structure, e: usize| {
            Context::new(s.clone(), Assignment::new([("x", e)])).unwrap()
        };
        let left = [with_x(a.structure(), 1)];
        let right = [with_x(b2.structure(), 1)];
        let atom = atomic_separates(&left, &right).unwrap();
        assert_eq!(atom.to_string(), "B(x)");
        assert!(atomic_separates(&left, std::slice::from_ref(&left[0])).is_none());
        assert_eq!(atomic_separates(&[], &[]).unwrap().to_string(), "x = x");
        // with an empty left class the vacuity is honest: an atom false on
        // the whole right class still must exist
        let empty_b = structure(&vocab, 2, &[("B", &[]), ("R", &[&[0]])]);
        let found = atomic_separates(&[], &[with_x(&empty_b, 0)]).unwrap();
        assert_eq!(found.to_string(), "B(x)");
        // ... and with every atom true on the right there is none
        let full = structure(&vocab, 1, &[("B", &[&[0]]), ("R", &[&[0]])]);
        assert!(atomic_separates(&[], &[with_x(&full, 0)]).is_none());
    }

    #[test]
    fn the_class_game_reproduces_the_running_example_on_budgets_one_and_two() {
        let (a, _, b2) = running_example();
        let qs = qset(&["exactly=3"]);
        let caps = Caps::default();
        assert_eq!(class_winner(1, &[a.clone()], &[b2.clone()], &qs), Player::Two);
        let p = ClassPosition::new(2, vec![a.clone()], vec![b2.clone()]).unwrap();
        let outcome = solve_class_game(&p, &qs, &caps).unwrap();
        assert_eq!(outcome.winner(), Player::One);
        let mv = outcome.best_move(&p).unwrap().unwrap();
        let ClassMove::Supplement(ref m) = mv else {
            panic!("expected a supplementing move, got {mv}");
        };
        assert_eq!(m.quantifier, "exactly=3");
        // every reply lands in a position already decided for Player I
        for reply in class_replies(&mv) {
            let next = class_apply(&p, &mv, Some(&reply), &qs, &caps).unwrap();
            assert!(matches!(class_status(&next), GameStatus::Won(Player::One, _)));
        }
    }

    #[test]
    fn a_class_is_never_separated_from_itself() {
        let (a, b1, _) = running_example();
        let qs = qset(&["exists", "exactly=3"]);
        for s in 1..=5 {
            assert_eq!(
                class_winner(s, &[a.clone(), b1.clone()], &[b1.clone(), a.clone()], &qs),
                Player::Two
            );
        }
    }

    #[test]
    fn an_empty_left_class_wins_immediately() {
        let (a, b1, _) = running_example();
        let qs = qset(&["exists"]);
        for s in 1..=3 {
            assert_eq!(class_winner(s, &[], &[a.clone(), b1.clone()], &qs), Player::One);
            assert_eq!(class_winner(s, &[], &[], &qs), Player::One);
        }
        let p = ClassPosition::new(2, vec![], vec![a.clone()]).unwrap();
        let outcome = solve_class_game(&p, &qs, &Caps::default()).unwrap();
        let transcript = outcome.sample_transcript().unwrap();
        assert_eq!(transcript.winner, Player::One);
        assert_eq!(transcript.steps.len(), 1);
    }

    #[test]
    fn swap_handles_the_mirrored_classes() {
        let (a, _, b2) = running_example();
        let qs = qset(&["exactly=3"]);
        assert_eq!(class_winner(2, &[b2.clone()], &[a.clone()], &qs), Player::Two);
        assert_eq!(class_winner(3, &[b2.clone()], &[a.clone()], &qs), Player::One);
        let caps = Caps::default();
        let instance = GameInstance::Class {
            left: std::slice::from_ref(&b2),
            right: std::slice::from_ref(&a),
        };
        assert_eq!(min_winning_budget(&instance, 6, &qs, &caps).unwrap(), Some(3));
        let (size, witness) =
            min_separating_size(std::slice::from_ref(&b2), std::slice::from_ref(&a), 6, &qs, &caps)
                .unwrap()
                .unwrap();
        assert_eq!(size, 3);
        assert!(witness.eval(&b2, &qs).unwrap());
        assert!(!witness.eval(&a, &qs).unwrap());
    }

    #[test]
    fn haertig_separates_equal_cardinality_classes() {
        let vocab = unary_vocab(&["U", "V"]);
        let balanced = structure(&vocab, 3, &[("U", &[&[0]]), ("V", &[&[1]])]);
        let skewed = structure(&vocab, 3, &[("U", &[&[0], &[1]]), ("V", &[&[2]])]);
        let left = [sentence(&balanced)];
        let right = [sentence(&skewed)];
        let qs = qset(&["haertig"]);
        let caps = Caps::default();
        assert_eq!(class_winner(2, &left, &right, &qs), Player::Two);
        assert_eq!(class_winner(3, &left, &right, &qs), Player::One);
        let instance = GameInstance::Class { left: &left, right: &right };
        assert_eq!(min_winning_budget(&instance, 6, &qs, &caps).unwrap(), Some(3));
        let (size, _) = min_separating_size(&left, &right, 6, &qs, &caps).unwrap().unwrap();
        assert_eq!(size, 3);
    }

    #[test]
    fn ham_detects_the_path_at_width_one_type_two() {
        let vocab = Vocabulary::new([("E".to_string(), 2)]).unwrap();
        let path = structure(&vocab, 3, &[("E", &[&[0, 1], &[1, 2]])]);
        let bare = structure(&vocab, 3, &[("E", &[])]);
        let left = [sentence(&path)];
        let right = [sentence(&bare)];
        let qs = qset(&["ham"]);
        let caps = Caps::default();
        assert_eq!(class_winner(1, &left, &right, &qs), Player::Two);
        assert_eq!(class_winner(2, &left, &right, &qs), Player::One);
        let instance = GameInstance::Class { left: &left, right: &right };
        assert_eq!(min_winning_budget(&instance, 4, &qs, &caps).unwrap(), Some(2));
        let (size, _) = min_separating_size(&left, &right, 4, &qs, &caps).unwrap().unwrap();
        assert_eq!(size, 2);
    }

    /// A literal move-by-move solver: no interning, no orbits, no sharing —
    /// the rules as stated, for cross-checking the engine on tiny inputs.
    fn direct_value(
        budget: usize,
        left: &[Context],
        right: &[Context],
        qs: &QuantifierSet,
        caps: &Caps,
    ) -> Player {
        if atomic_separates(left, right).is_some() {
            return Player::One;
        }
        if budget == 1 {
            return Player::Two;
        }
        if direct_value(budget - 1, right, left, qs, caps) == Player::One {
            return Player::One;
        }
        for u in 1..budget {
            for (first, second) in ordered_covers(right.len()) {
                let fs: Vec<Context> = first.iter().map(|&i| right[i].clone()).collect();
                let ss: Vec<Context> = second.iter().map(|&i| right[i].clone()).collect();
                if direct_value(u, left, &fs, qs, caps) == Player::One
                    && direct_value(budget - u, left, &ss, qs, caps) == Player::One
                {
                    return Player::One;
                }
            }
        }
        let all: Vec<&Context> = left.iter().chain(right.iter()).collect();
        let existing: BTreeSet<String> = all
            .first()
            .map(|c| c.assignment().domain_set())
            .unwrap_or_default();
        for q in qs.iter() {
            let k = q.width();
            if budget < k + 1 {
                continue;
            }
            let slot_tuples: Vec<Vec<VarTuple>> =
                (0..k).map(|j| canonical_bound_tuples(&existing, q.qtype().arity(j))).collect();
            let sizes: Vec<usize> = slot_tuples.iter().map(Vec::len).collect();
            for combo in index_combos(&sizes) {
                let tuples: Vec<&VarTuple> = combo.iter().zip(&slot_tuples).map(|(&i, ts)| &ts[i]).collect();
                let mut options: Vec<Vec<Vec<TupleSet>>> = Vec::new();
                let mut feasible = true;
                for (i, c) in all.iter().enumerate() {
                    let is_left = i < left.len();
                    let dom = c.structure().domain_size();
                    let universes: Vec<Vec<Vec<usize>>> =
                        tuples.iter().map(|t| tuples_respecting(dom, t)).collect();
                    let mask_sizes: Vec<usize> = universes.iter().map(|u| 1usize << u.len()).collect();
                    let mut opts = Vec::new();
                    for masks in index_combos(&mask_sizes) {
                        let sets: Vec<TupleSet> = masks
                            .iter()
                            .zip(&universes)
                            .map(|(&m, u)| {
                                u.iter()
                                    .enumerate()
                                    .filter(|(b, _)| m >> b & 1 == 1)
                                    .map(|(_, t)| t.clone())
                                    .collect()
                            })
                            .collect();
                        if q_accepts(q, dom, &sets).unwrap() == is_left {
                            opts.push(sets);
                        }
                    }
                    if opts.is_empty() {
                        feasible = false;
                        break;
                    }
                    options.push(opts);
                }
                if !feasible {
                    continue;
                }
                let option_sizes: Vec<usize> = options.iter().map(Vec::len).collect();
                for assembly in index_combos(&option_sizes) {
                    let sets: Vec<&Vec<TupleSet>> =
                        assembly.iter().zip(&options).map(|(&i, opts)| &opts[i]).collect();
                    for split in compositions(budget - 1, k) {
                        let winning = (0..k).all(|j| {
                            let mut plus = Vec::new();
                            let mut minus = Vec::new();
                            for (i, c) in all.iter().enumerate() {
                                for tuple in tuples_respecting(c.structure().domain_size(), tuples[j]) {
                                    let ext = c.extend(tuples[j], &tuple).unwrap();
                                    if sets[i][j].contains(&tuple) {
                                        plus.push(ext);
                                    } else {
                                        minus.push(ext);
                                    }
                                }
                            }
                            direct_value(
                                split[j],
                                &dedup_contexts(plus),
                                &dedup_contexts(minus),
                                qs,
                                caps,
                            ) == Player::One
                        });
                        if winning {
                            return Player::One;
                        }
                    }
                }
            }
        }
        Player::Two
    }

    #[test]
    fn the_engine_matches_the_literal_rules_on_tiny_instances() {
        let vocab = unary_vocab(&["P"]);
        let mut contexts = Vec::new();
        for n in 1..=2usize {
            for bits in 0..1usize << n {
                let members: Vec<Vec<usize>> =
                    (0..n).filter(|i| bits >> i & 1 == 1).map(|i| vec![i]).collect();
                let refs: Vec<&[usize]> = members.iter().map(Vec::as_slice).collect();
                contexts.push(sentence(&structure(&vocab, n, &[("P", &refs)])));
            }
        }
        let caps = Caps::default();
        for names in [&["exists"][..], &["forall"][..], &["exactly=2"][..]] {
            let qs = qset(names);
            for a in &contexts {
                for b in &contexts {
                    for budget in 1..=3usize {
                        let direct = direct_value(
                            budget,
                            std::slice::from_ref(a),
                            std::slice::from_ref(b),
                            &qs,
                            &caps,
                        );
                        let engine = class_winner(
                            budget,
                            std::slice::from_ref(a),
                            std::slice::from_ref(b),
                            &qs,
                        );
                        assert_eq!(
                            direct,
                            engine,
                            "{} vs {} at budget {budget} with {names:?}",
                            a.canonical_key(),
                            b.canonical_key()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn weak_game_follows_the_singleton_values() {
        let (a, b1, b2) = running_example();
        let qs = qset(&["exactly=3"]);
        let caps = Caps::default();
        let left = [a.clone()];
        let right = [b1.clone(), b2.clone()];
        let weak = solve_weak_game(4, &left, &right, &qs, &caps).unwrap();
        assert_eq!(weak.winner(), Player::One);
        for &(i, j, w) in weak.pair_values() {
            assert_eq!(
                w,
                class_winner(4, &left[i..=i], &right[j..=j], &qs),
                "pair ({i},{j})"
            );
        }
        assert_eq!(solve_weak_game(3, &left, &right, &qs, &caps).unwrap().winner(), Player::Two);
        assert_eq!(solve_weak_game(2, &[], &right, &qs, &caps).unwrap().winner(), Player::One);
        assert_eq!(solve_weak_game(2, &left, &[], &qs, &caps).unwrap().winner(), Player::One);
        let instance = GameInstance::Weak { left: &left, right: &right };
        assert_eq!(min_winning_budget(&instance, 6, &qs, &caps).unwrap(), Some(4));
    }

    #[test]
    fn example_pair_shows_the_gap_below_the_least_separating_size() {
        let (m, n) = gap_pair();
        let qs = qset(&["exactly=3"]);
        let caps = Caps::default();
        let at = |s: usize| {
            let p = PairPosition::new(s, m.clone(), n.clone()).unwrap();
            solve_pair_game(&p, &qs, &caps).unwrap().winner()
        };
        assert_eq!(at(1), Player::Two);
        assert_eq!(at(2), Player::One);
        let instance = GameInstance::Pair { left: &m, right: &n };
        assert_eq!(min_winning_budget(&instance, 4, &qs, &caps).unwrap(), Some(2));
        // the least separating formula is strictly larger than the least
        // winning budget
        let (size, witness) = min_separating_size(
            std::slice::from_ref(&m),
            std::slice::from_ref(&n),
            5,
            &qs,
            &caps,
        )
        .unwrap()
        .unwrap();
        assert_eq!(size, 3);
        assert!(witness.eval(&m, &qs).unwrap());
        assert!(!witness.eval(&n, &qs).unwrap());
        // a separating formula of size s still forces a Player I win at s
        assert_eq!(at(3), Player::One);
        assert_eq!(at(4), Player::One);
    }

    #[test]
    fn pair_game_split_move_is_redundant() {
        let (m, n) = gap_pair();
        let (a, b1, _) = running_example();
        let caps = Caps::default();
        for (l, r, names) in [
            (&m, &n, &["exactly=3"][..]),
            (&a, &b1, &["exists", "exactly=3"][..]),
        ] {
            let qs = qset(names);
            for s in 1..=4usize {
                let p = PairPosition::new(s, l.clone(), r.clone()).unwrap();
                let with = solve_pair_game_with(&p, &qs, &caps, &PairOptions { include_split: true })
                    .unwrap()
                    .winner();
                let without = solve_pair_game_with(&p, &qs, &caps, &PairOptions { include_split: false })
                    .unwrap()
                    .winner();
                assert_eq!(with, without, "budget {s}");
            }
        }
    }

    #[test]
    fn isomorphic_pairs_resist_separation() {
        let vocab = Vocabulary::new([("E".to_string(), 2)]).unwrap();
        let path = structure(&vocab, 3, &[("E", &[&[0, 1], &[1, 2]])]);
        let relabeled = structure(&vocab, 3, &[("E", &[&[2, 0], &[0, 1]])]);
        let qs = qset(&["exists", "forall"]);
        let caps = Caps::default();
        for s in 1..=6usize {
            let p = PairPosition::new(s, sentence(&path), sentence(&relabeled)).unwrap();
            assert_eq!(solve_pair_game(&p, &qs, &caps).unwrap().winner(), Player::Two, "budget {s}");
        }
    }

    #[test]
    fn pair_replies_cover_the_four_kinds() {
        let (m, n) = gap_pair();
        let qs = qset(&["exactly=3"]);
        let caps = Caps::default();
        let p = PairPosition::new(2, m, n).unwrap();
        let tuple = VarTuple::new(["y0"]).unwrap();
        let mv = PairMove::Supplement {
            quantifier: "exactly=3".into(),
            tuple,
            left_set: [vec![0], vec![1], vec![2]].into_iter().collect(),
            right_set: TupleSet::new(),
        };
        let replies = pair_replies(&p, &mv, &qs, &caps).unwrap();
        let matched = replies.iter().filter(|r| matches!(r, PairReply::Matched { .. })).count();
        let left_pairs = replies.iter().filter(|r| matches!(r, PairReply::LeftPair { .. })).count();
        assert_eq!((matched, left_pairs, replies.len()), (3, 3, 6));
        for r in &replies {
            let next = pair_apply(&p, &mv, Some(r), &qs, &caps).unwrap();
            assert!(
                matches!(pair_status(&next), GameStatus::Won(Player::One, _)),
                "reply {r} should leave an atomically separated pair"
            );
        }
    }

    #[test]
    fn min_winning_budget_scans_all_three_games() {
        let (a, _, b2) = running_example();
        let qs = qset(&["exactly=3"]);
        let caps = Caps::default();
        let class = GameInstance::Class {
            left: std::slice::from_ref(&a),
            right: std::slice::from_ref(&b2),
        };
        assert_eq!(min_winning_budget(&class, 4, &qs, &caps).unwrap(), Some(2));
        assert_eq!(min_winning_budget(&class, 1, &qs, &caps).unwrap(), None);
        let (m, n) = gap_pair();
        let pair = GameInstance::Pair { left: &m, right: &n };
        assert_eq!(min_winning_budget(&pair, 4, &qs, &caps).unwrap(), Some(2));
        assert_eq!(min_winning_budget(&pair, 1, &qs, &caps).unwrap(), None);
    }

    #[test]
    fn caps_are_enforced_by_name_for_size_games() {
        let (a, _, b2) = running_example();
        let qs = qset(&["exists"]);
        let caps = Caps::default();
        let cap_of = |r: Result<ClassOutcome>| match r {
            Err(Error::CapExceeded { cap, .. }) => cap,
            other => panic!("expected a cap refusal, got {other:?}"),
        };
        let p = ClassPosition::new(9, vec![a.clone()], vec![b2.clone()]).unwrap();
        assert_eq!(cap_of(solve_class_game(&p, &qs, &caps)), "max-budget");
        let vocab = a.structure().vocabulary().clone();
        let many: Vec<Context> = (0..5)
            .map(|i| {
                let members: Vec<Vec<usize>> = (0..=i).map(|e| vec![e]).collect();
                let refs: Vec<&[usize]> = members.iter().map(Vec::as_slice).collect();
                sentence(&structure(&vocab, 6, &[("B", &refs), ("R", &[])]))
            })
            .collect();
        let p = ClassPosition::new(2, many.clone(), vec![b2.clone()]).unwrap();
        assert_eq!(cap_of(solve_class_game(&p, &qs, &caps)), "max-class-contexts");
        let p = ClassPosition::new(2, vec![many[0].clone()], vec![b2.clone()]).unwrap();
        assert_eq!(cap_of(solve_class_game(&p, &qs, &caps)), "max-domain");
        let evocab = Vocabulary::new([("E".to_string(), 2)]).unwrap();
        let dense = structure(&evocab, 4, &[("E", &[&[0, 1], &[1, 2], &[2, 3]])]);
        let sparse = structure(&evocab, 4, &[("E", &[])]);
        let p = PairPosition::new(3, sentence(&dense), sentence(&sparse)).unwrap();
        match solve_pair_game(&p, &qset(&["ham"]), &caps) {
            Err(Error::CapExceeded { cap, .. }) => assert_eq!(cap, "max-tuple-universe"),
            other => panic!("expected a cap refusal, got {other:?}"),
        }
    }

    #[test]
    fn sample_transcripts_report_the_winner() {
        let (a, _, b2) = running_example();
        let qs = qset(&["exactly=3"]);
        let caps = Caps::default();
        let p = ClassPosition::new(2, vec![a.clone()], vec![b2.clone()]).unwrap();
        let transcript = solve_class_game(&p, &qs, &caps).unwrap().sample_transcript().unwrap();
        assert_eq!(transcript.winner, Player::One);
        assert_eq!(transcript.steps.last().unwrap().action, "game over");
        let (m, n) = gap_pair();
        let p = PairPosition::new(2, m.clone(), n.clone()).unwrap();
        let transcript = solve_pair_game(&p, &qs, &caps).unwrap().sample_transcript().unwrap();
        assert_eq!(transcript.winner, Player::One);
        let vocab = Vocabulary::new([("E".to_string(), 2)]).unwrap();
        let path = structure(&vocab, 3, &[("E", &[&[0, 1], &[1, 2]])]);
        let relabeled = structure(&vocab, 3, &[("E", &[&[2, 0], &[0, 1]])]);
        let p = PairPosition::new(3, sentence(&path), sentence(&relabeled)).unwrap();
        let transcript = solve_pair_game(&p, &qset(&["exists"]), &caps)
            .unwrap()
            .sample_transcript()
            .unwrap();
        assert_eq!(transcript.winner, Player::Two);
    }
}
