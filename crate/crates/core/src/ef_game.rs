//! The model-comparison game for logics with generalized quantifiers.
//!
//! Two players argue about a pair of contexts `(𝔐, h)` and `(𝔑, h′)` whose
//! assignments share a domain. The *attacker* claims the contexts can be told
//! apart by a formula of quantifier depth at most `d`; the *defender* claims
//! they cannot. A round runs through six sub-stages:
//!
//! 1. **Announce** — the attacker picks a quantifier `Q` with components of
//!    arities `n₁..n_k`, one variable tuple `x̄ⱼ` per component, a side (which
//!    of the two models plays the witness role `𝔐`), witness sets
//!    `X₁..X_k` of repetition-respecting tuples over `𝔐` with
//!    `(𝔐, X̄) ∈ Q`, and spillover sets `P₁..P_k` over the other model `𝔑`.
//! 2. **Witness window** — the defender may contest some `Xⱼ` by picking
//!    `ū ∈ Xⱼ` and `ū′ ∉ Xⱼ`; play moves to two copies of `𝔐` extended with
//!    `ū` and `ū′` and the round ends (no role swap: the contester is the
//!    defender).
//! 3. **Spillover window** — the defender may instead contest some spillover
//!    element `v̄′ ∈ Pⱼ` together with any `v̄` over `𝔐`, ending the round on
//!    the extended `(𝔐, 𝔑)` pair; otherwise the defender supplies witness
//!    sets `X′₁..X′_k` over `𝔑` with `(𝔑, X̄′) ∈ Q` and `Pⱼ ⊆ X′ⱼ`.
//! 4. **Defender-witness window** — the attacker may contest some `X′ⱼ`
//!    (`v̄ ∈ X′ⱼ`, `v̄′ ∉ X′ⱼ`, play on two copies of `𝔑`), and because the
//!    contester is the attacker **the players swap roles**.
//! 5. **Pick** — otherwise the attacker picks a component `j` and either
//!    (a) `w̄′ ∉ X′ⱼ` answered by his own `w̄ ∈ Xⱼ`, which **swaps roles**, or
//!    (b) `w̄′ ∈ X′ⱼ`, handing the reply to the defender.
//! 6. **Reply** — the defender answers a pick-inside with `w̄ ∈ Xⱼ`
//!    (extending both assignments) or with `w̄ ∈ Pⱼ`, which moves play to two
//!    copies of `𝔑` under fresh singleton assignments.
//!
//! Every round — contested or not — costs one unit of the round budget, and
//! each new round starts with a partial-isomorphism check: if the current
//! assignments disagree on an atomic formula the attacker wins immediately;
//! if `d` rounds are exhausted while they still agree the defender wins. A
//! player who must move but has no legal move loses immediately.
//!
//! [`solve_ef`] computes the exact backward-induction value with
//! memoization on automorphism-canonical position keys; the returned
//! [`EFOutcome`] replays the winning strategy move by move.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::caps::Caps;
use crate::quantifiers::{q_accepts, Quantifier, QuantifierSet};
use crate::structures::{
    canonical_bound_tuples, tuples_respecting, Assignment, Context, Structure, VarTuple,
};
use crate::{Error, Result};

/// A set of repetition-respecting element tuples, the payload of every set
/// move in the game.
pub type TupleSet = BTreeSet<Vec<usize>>;

/// The two players. Player I opens the game as the attacker; contestation
/// and pick-outside moves may swap the roles mid-game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::One => write!(f, "Player I"),
            Player::Two => write!(f, "Player II"),
        }
    }
}

impl Serialize for Player {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

/// Which of the two models the attacker picked as the witness side `𝔐`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

/// The attacker's opening move of a round: quantifier, bound variable
/// tuples, witness side, witness sets on that side, and spillover sets on
/// the other side.
#[derive(Debug, Clone, PartialEq)]
pub struct Announcement {
    pub quantifier: String,
    pub tuples: Vec<VarTuple>,
    pub side: Side,
    pub witness: Vec<TupleSet>,
    pub spillover: Vec<TupleSet>,
}

impl fmt::Display for Announcement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.quantifier)?;
        for (i, t) in self.tuples.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, " ({})", t.vars().join(","))?;
        }
        write!(f, " on the {} model, X={}", self.side, sets_text(&self.witness))?;
        write!(f, ", P={}", sets_text(&self.spillover))
    }
}

fn tuple_text(tuple: &[usize]) -> String {
    let inner: Vec<String> = tuple.iter().map(|e| e.to_string()).collect();
    format!("({})", inner.join(","))
}

fn set_text(set: &TupleSet) -> String {
    let inner: Vec<String> = set.iter().map(|t| tuple_text(t)).collect();
    format!("{{{}}}", inner.join(" "))
}

fn sets_text(sets: &[TupleSet]) -> String {
    let inner: Vec<String> = sets.iter().map(set_text).collect();
    format!("[{}]", inner.join(" "))
}

/// The sub-stage of the current round, carrying everything announced so far.
#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    /// The attacker is to announce (or the position is terminal).
    RoundStart,
    /// The defender may contest one of the announced witness sets.
    AfterWitnessX(Announcement),
    /// The defender may contest a spillover element or supply witness sets.
    AfterSpillover(Announcement),
    /// The attacker may contest one of the defender's witness sets.
    AfterDefenderWitness(Announcement, Vec<TupleSet>),
    /// The attacker picks a component and an element inside or outside of
    /// the defender's witness set for it.
    AttackerPick(Announcement, Vec<TupleSet>),
    /// The defender answers the attacker's pick-inside of `component` at
    /// `element` from the witness set or from the spillover set.
    DefenderReply(Announcement, Vec<TupleSet>, usize, Vec<usize>),
}

impl Phase {
    fn tag(&self) -> String {
        match self {
            Phase::RoundStart => "round-start".to_string(),
            Phase::AfterWitnessX(ann) => format!("after-witness[{ann}]"),
            Phase::AfterSpillover(ann) => format!("after-spillover[{ann}]"),
            Phase::AfterDefenderWitness(ann, xp) => {
                format!("after-defender-witness[{ann}; X'={}]", sets_text(xp))
            }
            Phase::AttackerPick(ann, xp) => {
                format!("attacker-pick[{ann}; X'={}]", sets_text(xp))
            }
            Phase::DefenderReply(ann, xp, j, w) => format!(
                "defender-reply[{ann}; X'={}; j={}; w'={}]",
                sets_text(xp),
                j,
                tuple_text(w)
            ),
        }
    }
}

/// A game position: the two contexts, who currently attacks, how many rounds
/// remain, and the sub-stage of the round in progress.
#[derive(Debug, Clone)]
pub struct EFPosition {
    pub left: Context,
    pub right: Context,
    pub attacker: Player,
    pub rounds_left: usize,
    pub phase: Phase,
}

impl EFPosition {
    /// The opening position: Player I attacks, no round in progress.
    pub fn start(left: Context, right: Context, rounds: usize) -> Result<EFPosition> {
        check_pair(&left, &right)?;
        Ok(EFPosition {
            left,
            right,
            attacker: Player::One,
            rounds_left: rounds,
            phase: Phase::RoundStart,
        })
    }

    /// The player who currently defends.
    pub fn defender(&self) -> Player {
        self.attacker.other()
    }

    /// The player to move at this sub-stage.
    pub fn mover(&self) -> Player {
        match self.phase {
            Phase::RoundStart
            | Phase::AfterDefenderWitness(..)
            | Phase::AttackerPick(..) => self.attacker,
            Phase::AfterWitnessX(_) | Phase::AfterSpillover(_) | Phase::DefenderReply(..) => {
                self.defender()
            }
        }
    }

    /// A deterministic key describing the position exactly (structure
    /// identities, assignments, attacker, budget, and sub-stage).
    pub fn key(&self) -> String {
        format!(
            "attacker {} | rounds {} | L {} | R {} | {}",
            self.attacker,
            self.rounds_left,
            self.left.canonical_key(),
            self.right.canonical_key(),
            self.phase.tag()
        )
    }
}

fn check_pair(left: &Context, right: &Context) -> Result<()> {
    let lv: Vec<(String, usize)> = left
        .structure()
        .vocabulary()
        .symbols()
        .map(|(n, a)| (n.to_string(), a))
        .collect();
    let rv: Vec<(String, usize)> = right
        .structure()
        .vocabulary()
        .symbols()
        .map(|(n, a)| (n.to_string(), a))
        .collect();
    if lv != rv {
        return Err(Error::VocabularyMismatch);
    }
    if left.assignment().domain_set() != right.assignment().domain_set() {
        return Err(Error::AssignmentDomainMismatch);
    }
    Ok(())
}

/// A move in the game. Which variants are legal depends on the phase; see
/// [`legal_moves`].
#[derive(Debug, Clone, PartialEq)]
pub enum EFMove {
    /// Attacker, at `RoundStart`.
    Announce(Announcement),
    /// Defender at `AfterWitnessX` (contesting `X_j`, no swap) or attacker
    /// at `AfterDefenderWitness` (contesting `X'_j`, swapping roles):
    /// `inside` is in the contested set, `outside` in its complement.
    ContestWitness {
        component: usize,
        inside: Vec<usize>,
        outside: Vec<usize>,
    },
    /// Defender at `AfterSpillover`: `inside ∈ P_j` together with a reply
    /// tuple over the witness-side model.
    ContestSpillover {
        component: usize,
        inside: Vec<usize>,
        reply: Vec<usize>,
    },
    /// Defender at `AfterSpillover`: supply witness sets over the other
    /// model (accepted by the quantifier and covering every spillover set).
    SupplyWitness { witness: Vec<TupleSet> },
    /// Decline to contest at a contest window.
    Proceed,
    /// Attacker option (a): pick `outside ∉ X'_j` answered by
    /// `witness_elem ∈ X_j`; the players swap roles.
    PickOutside {
        component: usize,
        outside: Vec<usize>,
        witness_elem: Vec<usize>,
    },
    /// Attacker option (b): pick `element ∈ X'_j`; the defender replies.
    PickInside { component: usize, element: Vec<usize> },
    /// Defender reply to a pick-inside from the original witness set.
    ReplyFromWitness { element: Vec<usize> },
    /// Defender reply to a pick-inside from the spillover set: play moves to
    /// two copies of the second model under fresh singleton assignments.
    ReplyFromSpillover { element: Vec<usize> },
}

impl fmt::Display for EFMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EFMove::Announce(ann) => write!(f, "announce {ann}"),
            EFMove::ContestWitness { component, inside, outside } => write!(
                f,
                "contest witness set {} with {} inside, {} outside",
                component,
                tuple_text(inside),
                tuple_text(outside)
            ),
            EFMove::ContestSpillover { component, inside, reply } => write!(
                f,
                "contest spillover set {} at {} answered by {}",
                component,
                tuple_text(inside),
                tuple_text(reply)
            ),
            EFMove::SupplyWitness { witness } => {
                write!(f, "supply witness sets X'={}", sets_text(witness))
            }
            EFMove::Proceed => write!(f, "proceed"),
            EFMove::PickOutside { component, outside, witness_elem } => write!(
                f,
                "pick {} outside X'_{} answered by {} (roles swap)",
                tuple_text(outside),
                component,
                tuple_text(witness_elem)
            ),
            EFMove::PickInside { component, element } => {
                write!(f, "pick {} inside X'_{}", tuple_text(element), component)
            }
            EFMove::ReplyFromWitness { element } => {
                write!(f, "reply with {} from the witness set", tuple_text(element))
            }
            EFMove::ReplyFromSpillover { element } => {
                write!(f, "reply with {} from the spillover set", tuple_text(element))
            }
        }
    }
}

/// Whether a position is still being played and who must move, or who has
/// won and why.
#[derive(Debug, Clone, PartialEq)]
pub enum GameStatus {
    Ongoing(Player),
    Won(Player, String),
}

/// A replayed game: one entry per decision, plus a terminal entry.
#[derive(Debug, Clone, Serialize)]
pub struct TranscriptStep {
    pub position: String,
    pub actor: String,
    #[serde(rename = "move")]
    pub action: String,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Transcript {
    pub steps: Vec<TranscriptStep>,
    pub winner: Player,
}

/// Do the two assignments agree on every atomic formula (equalities and
/// relation atoms) over their shared variable domain?
pub fn partial_isomorphism(left: &Context, right: &Context) -> Result<bool> {
    check_pair(left, right)?;
    let dom: Vec<String> = left.assignment().domain_set().into_iter().collect();
    for a in &dom {
        for b in &dom {
            let l = left.assignment().get(a) == left.assignment().get(b);
            let r = right.assignment().get(a) == right.assignment().get(b);
            if l != r {
                return Ok(false);
            }
        }
    }
    let symbols: Vec<(String, usize)> = left
        .structure()
        .vocabulary()
        .symbols()
        .map(|(n, a)| (n.to_string(), a))
        .collect();
    for (rel, arity) in symbols {
        for word in var_words(&dom, arity) {
            let lt: Vec<usize> = word
                .iter()
                .map(|v| left.assignment().get(v).expect("variable in domain"))
                .collect();
            let rt: Vec<usize> = word
                .iter()
                .map(|v| right.assignment().get(v).expect("variable in domain"))
                .collect();
            if left.structure().holds(&rel, &lt)? != right.structure().holds(&rel, &rt)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub(crate) fn var_words(vars: &[String], len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for word in &out {
            for v in vars {
                let mut w = word.clone();
                w.push(v.clone());
                next.push(w);
            }
        }
        out = next;
    }
    if len == 0 {
        // a zero-length word contributes nothing; relations have arity ≥ 1
        return Vec::new();
    }
    out
}

type Mask = u32;

fn bit(i: usize) -> Mask {
    1 << i
}

fn full_mask(n: usize) -> Mask {
    if n == 0 {
        0
    } else {
        (1u32 << n) - 1
    }
}

fn mask_bits(mask: Mask) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

/// All subsets of `mask`, empty set first.
fn all_subsets(mask: Mask) -> Vec<Mask> {
    let mut out = Vec::new();
    let mut s = mask;
    loop {
        out.push(s);
        if s == 0 {
            break;
        }
        s = (s - 1) & mask;
    }
    out.reverse();
    out
}

/// Index odometer over `sizes` (cartesian product of index ranges).
pub(crate) fn index_combos(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in sizes {
        let mut next = Vec::new();
        for combo in &out {
            for i in 0..n {
                let mut c = combo.clone();
                c.push(i);
                next.push(c);
            }
        }
        out = next;
    }
    out
}

/// All accepted witness mask combinations for `q` on `structure` with the
/// given bound tuples: entry `j` of a combination is a bitmask over
/// `tuples_respecting(n, tuples[j])`.
fn accepted_mask_combos(
    structure: &Structure,
    q: &Quantifier,
    tuples: &[VarTuple],
    caps: &Caps,
) -> Result<Vec<Vec<Mask>>> {
    let n = structure.domain_size();
    let universes: Vec<Vec<Vec<usize>>> =
        tuples.iter().map(|t| tuples_respecting(n, t)).collect();
    for u in &universes {
        caps.check("max-tuple-universe", caps.max_tuple_universe, u.len())?;
    }
    let sizes: Vec<usize> = universes.iter().map(|u| 1usize << u.len()).collect();
    let mut out = Vec::new();
    for combo in index_combos(&sizes) {
        let masks: Vec<Mask> = combo.iter().map(|&m| m as Mask).collect();
        let accepted = if q.cardinality_only() {
            let counts: Vec<usize> = masks.iter().map(|m| m.count_ones() as usize).collect();
            q.accepts_counts(n, &counts)?
        } else {
            let sets: Vec<TupleSet> = masks
                .iter()
                .zip(&universes)
                .map(|(&m, univ)| decode_mask(m, univ))
                .collect();
            q_accepts(q, n, &sets)?
        };
        if accepted {
            out.push(masks);
        }
    }
    Ok(out)
}

fn decode_mask(mask: Mask, universe: &[Vec<usize>]) -> TupleSet {
    mask_bits(mask)
        .into_iter()
        .map(|i| universe[i].clone())
        .collect()
}

fn encode_set(set: &TupleSet, universe: &[Vec<usize>]) -> Result<Mask> {
    let mut mask = 0;
    for tuple in set {
        match universe.iter().position(|t| t == tuple) {
            Some(i) => mask |= bit(i),
            None => {
                return Err(Error::Invalid(format!(
                    "tuple {} does not respect the bound tuple's repetitions or leaves the domain",
                    tuple_text(tuple)
                )))
            }
        }
    }
    Ok(mask)
}

/// The game value of a position relative to the current roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Attacker,
    Defender,
}

/// Everything the solver needs about one `(quantifier, tuples, side)` choice
/// from a round-start position: the per-component tuple universes on both
/// sides, the accepted witness mask combinations, and the values of every
/// possible continuation position one round down. All matrix entries store
/// "the *defender* of the continuation wins", which is exactly the flag each
/// branch formula needs (branches that swap roles want the old attacker to
/// be the new defender).
struct RoundSetup {
    tuples: Vec<VarTuple>,
    side: Side,
    /// Repetition-respecting tuples per component on the witness side.
    wuniv: Vec<Vec<Vec<usize>>>,
    /// … and on the other side.
    ouniv: Vec<Vec<Vec<usize>>>,
    /// `cross[j][w][o]`: continue on `(𝔐 + w, 𝔑 + o)`.
    cross: Vec<Vec<Vec<bool>>>,
    /// `same_w[j][u][u']`: two copies of the witness side, `u` and `u'`.
    same_w: Vec<Vec<Vec<bool>>>,
    /// `same_o[j][v][v']`: two copies of the other side (kept assignment).
    same_o: Vec<Vec<Vec<bool>>>,
    /// `reset_o[j][v][v']`: two copies of the other side, fresh singleton
    /// assignments.
    reset_o: Vec<Vec<Vec<bool>>>,
    /// Accepted witness combos on the witness / other side.
    acc_w: Arc<Vec<Vec<Mask>>>,
    acc_o: Arc<Vec<Vec<Mask>>>,
    /// `cross_col[j][o]`: mask over `wuniv[j]` of rows with `cross` set.
    cross_col: Vec<Vec<Mask>>,
    /// `reset_col[j][o]`: mask over `ouniv[j]` of rows with `reset_o` set.
    reset_col: Vec<Vec<Mask>>,
    /// `def_p_col[j]`: columns `o` the defender could contest profitably.
    def_p_col: Vec<Mask>,
    /// Pairs with `same_w` / `same_o` set, for contest checks.
    same_w_pairs: Vec<Vec<(usize, usize)>>,
    same_o_pairs: Vec<Vec<(usize, usize)>>,
}

impl RoundSetup {
    fn components(&self) -> usize {
        self.tuples.len()
    }

    /// Ordered `(left, right)` pair for a cross continuation: `w` extends the
    /// witness side, `o` the other side.
    fn cross_pair(
        &self,
        left: &Context,
        right: &Context,
        j: usize,
        w: &[usize],
        o: &[usize],
    ) -> Result<(Context, Context)> {
        let t = &self.tuples[j];
        Ok(match self.side {
            Side::Left => (left.extend(t, w)?, right.extend(t, o)?),
            Side::Right => (left.extend(t, o)?, right.extend(t, w)?),
        })
    }
}

fn singleton_context(ctx: &Context, tuple_vars: &VarTuple, tuple: &[usize]) -> Result<Context> {
    let assignment = Assignment::new(
        tuple_vars
            .vars()
            .iter()
            .cloned()
            .zip(tuple.iter().copied()),
    );
    ctx.with_assignment(assignment)
}

#[derive(Debug)]
struct Solver {
    qset: QuantifierSet,
    caps: Caps,
    memo: Mutex<HashMap<String, Role>>,
    accepted: Mutex<HashMap<String, Arc<Vec<Vec<Mask>>>>>,
}

impl Solver {
    fn new(qset: &QuantifierSet, caps: &Caps) -> Solver {
        Solver {
            qset: qset.clone(),
            caps: caps.clone(),
            memo: Mutex::new(HashMap::new()),
            accepted: Mutex::new(HashMap::new()),
        }
    }

    /// Role-relative value of a round-start position: who wins with `rounds`
    /// rounds left, the current attacker or the current defender?
    fn value(&self, left: &Context, right: &Context, rounds: usize) -> Result<Role> {
        if !partial_isomorphism(left, right)? {
            return Ok(Role::Attacker);
        }
        if rounds == 0 {
            return Ok(Role::Defender);
        }
        let key = format!("r{rounds}|{}|{}", left.orbit_key(), right.orbit_key());
        if let Some(&cached) = self.memo.lock().unwrap().get(&key) {
            return Ok(cached);
        }
        let mut winner = Role::Defender;
        'search: for side in [Side::Left, Side::Right] {
            for q in self.qset.iter() {
                for tuples in self.tuple_combos(left, q) {
                    let setup = self.round_setup(left, right, q, &tuples, side, rounds)?;
                    if self.winning_announcement(&setup)?.is_some() {
                        winner = Role::Attacker;
                        break 'search;
                    }
                }
            }
        }
        self.memo.lock().unwrap().insert(key, winner);
        Ok(winner)
    }

    /// Canonical bound-tuple choices for each component of `q`: tuples over
    /// the current assignment domain plus canonically named fresh variables.
    fn tuple_combos(&self, left: &Context, q: &Quantifier) -> Vec<Vec<VarTuple>> {
        let dom = left.assignment().domain_set();
        let per: Vec<Vec<VarTuple>> = q
            .qtype()
            .arities()
            .iter()
            .map(|&a| canonical_bound_tuples(&dom, a))
            .collect();
        let sizes: Vec<usize> = per.iter().map(|p| p.len()).collect();
        index_combos(&sizes)
            .into_iter()
            .map(|combo| {
                combo
                    .iter()
                    .enumerate()
                    .map(|(j, &i)| per[j][i].clone())
                    .collect()
            })
            .collect()
    }

    fn accepted_sets(
        &self,
        structure: &Structure,
        q: &Quantifier,
        tuples: &[VarTuple],
    ) -> Result<Arc<Vec<Vec<Mask>>>> {
        let patterns: Vec<String> = tuples.iter().map(repetition_pattern).collect();
        let key = format!("s{}|{}|{}", structure.id(), q.name(), patterns.join(";"));
        if let Some(found) = self.accepted.lock().unwrap().get(&key) {
            return Ok(found.clone());
        }
        let combos = Arc::new(accepted_mask_combos(structure, q, tuples, &self.caps)?);
        self.accepted.lock().unwrap().insert(key, combos.clone());
        Ok(combos)
    }

    /// Build the continuation-value matrices for one announcement skeleton.
    fn round_setup(
        &self,
        left: &Context,
        right: &Context,
        q: &Quantifier,
        tuples: &[VarTuple],
        side: Side,
        rounds: usize,
    ) -> Result<RoundSetup> {
        let (wctx, octx) = match side {
            Side::Left => (left, right),
            Side::Right => (right, left),
        };
        let k = tuples.len();
        let wn = wctx.structure().domain_size();
        let on = octx.structure().domain_size();
        let wuniv: Vec<Vec<Vec<usize>>> =
            tuples.iter().map(|t| tuples_respecting(wn, t)).collect();
        let ouniv: Vec<Vec<Vec<usize>>> =
            tuples.iter().map(|t| tuples_respecting(on, t)).collect();
        for u in wuniv.iter().chain(ouniv.iter()) {
            self.caps
                .check("max-tuple-universe", self.caps.max_tuple_universe, u.len())?;
        }
        let mut setup = RoundSetup {
            tuples: tuples.to_vec(),
            side,
            wuniv,
            ouniv,
            cross: Vec::new(),
            same_w: Vec::new(),
            same_o: Vec::new(),
            reset_o: Vec::new(),
            acc_w: self.accepted_sets(wctx.structure(), q, tuples)?,
            acc_o: self.accepted_sets(octx.structure(), q, tuples)?,
            cross_col: Vec::new(),
            reset_col: Vec::new(),
            def_p_col: Vec::new(),
            same_w_pairs: Vec::new(),
            same_o_pairs: Vec::new(),
        };
        for j in 0..k {
            let t = &tuples[j];
            let wu = setup.wuniv[j].clone();
            let ou = setup.ouniv[j].clone();
            let mut cross = vec![vec![false; ou.len()]; wu.len()];
            for (wi, w) in wu.iter().enumerate() {
                for (oi, o) in ou.iter().enumerate() {
                    let (l, r) = setup.cross_pair(left, right, j, w, o)?;
                    cross[wi][oi] = self.value(&l, &r, rounds - 1)? == Role::Defender;
                }
            }
            let mut same_w = vec![vec![false; wu.len()]; wu.len()];
            for (ai, a) in wu.iter().enumerate() {
                for (bi, b) in wu.iter().enumerate() {
                    same_w[ai][bi] = self.value(&wctx.extend(t, a)?, &wctx.extend(t, b)?, rounds - 1)?
                        == Role::Defender;
                }
            }
            let mut same_o = vec![vec![false; ou.len()]; ou.len()];
            let mut reset_o = vec![vec![false; ou.len()]; ou.len()];
            for (ai, a) in ou.iter().enumerate() {
                for (bi, b) in ou.iter().enumerate() {
                    same_o[ai][bi] = self.value(&octx.extend(t, a)?, &octx.extend(t, b)?, rounds - 1)?
                        == Role::Defender;
                    reset_o[ai][bi] = self.value(
                        &singleton_context(octx, t, a)?,
                        &singleton_context(octx, t, b)?,
                        rounds - 1,
                    )? == Role::Defender;
                }
            }
            let cross_col: Vec<Mask> = (0..ou.len())
                .map(|oi| {
                    (0..wu.len())
                        .filter(|&wi| cross[wi][oi])
                        .fold(0, |m, wi| m | bit(wi))
                })
                .collect();
            let reset_col: Vec<Mask> = (0..ou.len())
                .map(|oi| {
                    (0..ou.len())
                        .filter(|&vi| reset_o[vi][oi])
                        .fold(0, |m, vi| m | bit(vi))
                })
                .collect();
            let def_p_col = (0..ou.len())
                .filter(|&oi| cross_col[oi] != 0)
                .fold(0, |m, oi| m | bit(oi));
            let pairs = |matrix: &Vec<Vec<bool>>| -> Vec<(usize, usize)> {
                let mut out = Vec::new();
                for (a, row) in matrix.iter().enumerate() {
                    for (b, &set) in row.iter().enumerate() {
                        if set {
                            out.push((a, b));
                        }
                    }
                }
                out
            };
            setup.same_w_pairs.push(pairs(&same_w));
            setup.same_o_pairs.push(pairs(&same_o));
            setup.cross.push(cross);
            setup.same_w.push(same_w);
            setup.same_o.push(same_o);
            setup.reset_o.push(reset_o);
            setup.cross_col.push(cross_col);
            setup.reset_col.push(reset_col);
            setup.def_p_col.push(def_p_col);
        }
        Ok(setup)
    }

    /// Search for a winning `(witness masks, spillover masks)` announcement.
    ///
    /// Announcements the defender can refute by contesting a witness set or
    /// a spillover element are skipped outright (the contest wins for the
    /// defender, so they cannot be winning for the attacker); the remaining
    /// candidates are evaluated against every legal defender supply.
    fn winning_announcement(&self, setup: &RoundSetup) -> Result<Option<(Vec<Mask>, Vec<Mask>)>> {
        let k = setup.components();
        'witness: for wmasks in setup.acc_w.iter() {
            for j in 0..k {
                if contestable(&setup.same_w_pairs[j], wmasks[j]) {
                    continue 'witness;
                }
            }
            let allowed: Vec<Mask> = (0..k)
                .map(|j| full_mask(setup.ouniv[j].len()) & !setup.def_p_col[j])
                .collect();
            let subset_lists: Vec<Vec<Mask>> = allowed.iter().map(|&a| all_subsets(a)).collect();
            let sizes: Vec<usize> = subset_lists.iter().map(|s| s.len()).collect();
            'spillover: for combo in index_combos(&sizes) {
                let pmasks: Vec<Mask> = combo
                    .iter()
                    .enumerate()
                    .map(|(j, &i)| subset_lists[j][i])
                    .collect();
                for omasks in setup.acc_o.iter() {
                    if (0..k).any(|j| pmasks[j] & !omasks[j] != 0) {
                        continue;
                    }
                    if !step4_attacker_wins(setup, wmasks, &pmasks, omasks) {
                        // the defender survives by supplying these sets
                        continue 'spillover;
                    }
                }
                // every legal supply loses (or none exists) and no contest
                // helps: the announcement wins
                return Ok(Some((wmasks.clone(), pmasks)));
            }
        }
        Ok(None)
    }
}

/// Is there a contest pair `(u ∈ set, u' ∉ set)` whose continuation the
/// contester wins?
fn contestable(pairs: &[(usize, usize)], mask: Mask) -> bool {
    pairs
        .iter()
        .any(|&(u, v)| mask & bit(u) != 0 && mask & bit(v) == 0)
}

/// Given the full announcement and the defender's supply, does the attacker
/// have a winning step-4 continuation (contest, pick-outside, or
/// pick-inside)? An attacker with no legal step-4 move loses, which this
/// reports as `false`.
fn step4_attacker_wins(
    setup: &RoundSetup,
    wmasks: &[Mask],
    pmasks: &[Mask],
    omasks: &[Mask],
) -> bool {
    let k = setup.components();
    for j in 0..k {
        let full_o = full_mask(setup.ouniv[j].len());
        let xo = omasks[j];
        let comp = full_o & !xo;
        let xm = wmasks[j];
        let pm = pmasks[j];
        // contest X'_j (roles swap: the attacker wants the continuation's
        // defender — himself — to win)
        if setup.same_o_pairs[j]
            .iter()
            .any(|&(v, v2)| xo & bit(v) != 0 && comp & bit(v2) != 0)
        {
            return true;
        }
        // option (a): w' outside X'_j, answered from X_j, roles swap
        if xm != 0 {
            for v2 in mask_bits(comp) {
                if setup.cross_col[j][v2] & xm != 0 {
                    return true;
                }
            }
        }
        // option (b): w' inside X'_j; wins unless the defender has a good
        // reply from X_j or from P_j (no reply at all also loses for the
        // defender)
        for v2 in mask_bits(xo) {
            if setup.cross_col[j][v2] & xm == 0 && setup.reset_col[j][v2] & pm == 0 {
                return true;
            }
        }
    }
    false
}

fn repetition_pattern(tuple: &VarTuple) -> String {
    let mut seen: Vec<&String> = Vec::new();
    let mut out = String::new();
    for v in tuple.vars() {
        let idx = match seen.iter().position(|s| *s == v) {
            Some(i) => i,
            None => {
                seen.push(v);
                seen.len() - 1
            }
        };
        out.push_str(&idx.to_string());
        out.push('.');
    }
    out
}

fn tuple_combos_for(dom: &BTreeSet<String>, q: &Quantifier) -> Vec<Vec<VarTuple>> {
    let per: Vec<Vec<VarTuple>> = q
        .qtype()
        .arities()
        .iter()
        .map(|&a| canonical_bound_tuples(dom, a))
        .collect();
    let sizes: Vec<usize> = per.iter().map(|p| p.len()).collect();
    index_combos(&sizes)
        .into_iter()
        .map(|combo| {
            combo
                .iter()
                .enumerate()
                .map(|(j, &i)| per[j][i].clone())
                .collect()
        })
        .collect()
}

/// The witness-side and other-side contexts of a position, per the
/// announced side.
fn oriented<'a>(p: &'a EFPosition, side: Side) -> (&'a Context, &'a Context) {
    match side {
        Side::Left => (&p.left, &p.right),
        Side::Right => (&p.right, &p.left),
    }
}

fn oriented_pair(side: Side, wctx: Context, octx: Context) -> (Context, Context) {
    match side {
        Side::Left => (wctx, octx),
        Side::Right => (octx, wctx),
    }
}

fn universes(p: &EFPosition, ann: &Announcement) -> (Vec<Vec<Vec<usize>>>, Vec<Vec<Vec<usize>>>) {
    let (wctx, octx) = oriented(p, ann.side);
    let wn = wctx.structure().domain_size();
    let on = octx.structure().domain_size();
    let wuniv = ann.tuples.iter().map(|t| tuples_respecting(wn, t)).collect();
    let ouniv = ann.tuples.iter().map(|t| tuples_respecting(on, t)).collect();
    (wuniv, ouniv)
}

/// Every legal move at `p`. An empty list at a phase where a player must
/// move means that player loses immediately.
///
/// At `RoundStart` the list enumerates complete announcements (quantifier,
/// bound tuples, side, accepted witness sets, all spillover sets), so it
/// grows with `2^|universe|` per component; the per-component universes are
/// capped by `max-tuple-universe`.
pub fn legal_moves(p: &EFPosition, qset: &QuantifierSet, caps: &Caps) -> Result<Vec<EFMove>> {
    let mut out = Vec::new();
    match &p.phase {
        Phase::RoundStart => {
            if p.rounds_left == 0 || !partial_isomorphism(&p.left, &p.right)? {
                return Ok(out);
            }
            let dom = p.left.assignment().domain_set();
            for side in [Side::Left, Side::Right] {
                let (wctx, octx) = oriented(p, side);
                for q in qset.iter() {
                    for tuples in tuple_combos_for(&dom, q) {
                        let acc = accepted_mask_combos(wctx.structure(), q, &tuples, caps)?;
                        if acc.is_empty() {
                            continue;
                        }
                        let wn = wctx.structure().domain_size();
                        let on = octx.structure().domain_size();
                        let wuniv: Vec<Vec<Vec<usize>>> =
                            tuples.iter().map(|t| tuples_respecting(wn, t)).collect();
                        let ouniv: Vec<Vec<Vec<usize>>> =
                            tuples.iter().map(|t| tuples_respecting(on, t)).collect();
                        for u in &ouniv {
                            caps.check("max-tuple-universe", caps.max_tuple_universe, u.len())?;
                        }
                        let spill_lists: Vec<Vec<Mask>> = ouniv
                            .iter()
                            .map(|u| all_subsets(full_mask(u.len())))
                            .collect();
                        let spill_sizes: Vec<usize> =
                            spill_lists.iter().map(|s| s.len()).collect();
                        for wmasks in &acc {
                            let witness: Vec<TupleSet> = wmasks
                                .iter()
                                .zip(&wuniv)
                                .map(|(&m, u)| decode_mask(m, u))
                                .collect();
                            for combo in index_combos(&spill_sizes) {
                                let spillover: Vec<TupleSet> = combo
                                    .iter()
                                    .enumerate()
                                    .map(|(j, &i)| decode_mask(spill_lists[j][i], &ouniv[j]))
                                    .collect();
                                out.push(EFMove::Announce(Announcement {
                                    quantifier: q.name().to_string(),
                                    tuples: tuples.clone(),
                                    side,
                                    witness: witness.clone(),
                                    spillover,
                                }));
                            }
                        }
                    }
                }
            }
        }
        Phase::AfterWitnessX(ann) => {
            let (wuniv, _) = universes(p, ann);
            for (j, set) in ann.witness.iter().enumerate() {
                for inside in set {
                    for outside in &wuniv[j] {
                        if !set.contains(outside) {
                            out.push(EFMove::ContestWitness {
                                component: j,
                                inside: inside.clone(),
                                outside: outside.clone(),
                            });
                        }
                    }
                }
            }
            out.push(EFMove::Proceed);
        }
        Phase::AfterSpillover(ann) => {
            let (wuniv, ouniv) = universes(p, ann);
            for (j, set) in ann.spillover.iter().enumerate() {
                for inside in set {
                    for reply in &wuniv[j] {
                        out.push(EFMove::ContestSpillover {
                            component: j,
                            inside: inside.clone(),
                            reply: reply.clone(),
                        });
                    }
                }
            }
            let (_, octx) = oriented(p, ann.side);
            let q = qset
                .get(&ann.quantifier)
                .ok_or_else(|| Error::Invalid(format!("unknown quantifier `{}`", ann.quantifier)))?;
            let acc = accepted_mask_combos(octx.structure(), q, &ann.tuples, caps)?;
            let pmasks: Vec<Mask> = ann
                .spillover
                .iter()
                .zip(&ouniv)
                .map(|(s, u)| encode_set(s, u))
                .collect::<Result<_>>()?;
            for omasks in &acc {
                if (0..ann.tuples.len()).any(|j| pmasks[j] & !omasks[j] != 0) {
                    continue;
                }
                let witness: Vec<TupleSet> = omasks
                    .iter()
                    .zip(&ouniv)
                    .map(|(&m, u)| decode_mask(m, u))
                    .collect();
                out.push(EFMove::SupplyWitness { witness });
            }
        }
        Phase::AfterDefenderWitness(ann, xp) => {
            let (_, ouniv) = universes(p, ann);
            for (j, set) in xp.iter().enumerate() {
                for inside in set {
                    for outside in &ouniv[j] {
                        if !set.contains(outside) {
                            out.push(EFMove::ContestWitness {
                                component: j,
                                inside: inside.clone(),
                                outside: outside.clone(),
                            });
                        }
                    }
                }
            }
            out.push(EFMove::Proceed);
        }
        Phase::AttackerPick(ann, xp) => {
            let (_, ouniv) = universes(p, ann);
            for (j, set) in xp.iter().enumerate() {
                for outside in &ouniv[j] {
                    if !set.contains(outside) {
                        for witness_elem in &ann.witness[j] {
                            out.push(EFMove::PickOutside {
                                component: j,
                                outside: outside.clone(),
                                witness_elem: witness_elem.clone(),
                            });
                        }
                    }
                }
                for element in set {
                    out.push(EFMove::PickInside {
                        component: j,
                        element: element.clone(),
                    });
                }
            }
        }
        Phase::DefenderReply(ann, _, j, _) => {
            for element in &ann.witness[*j] {
                out.push(EFMove::ReplyFromWitness { element: element.clone() });
            }
            for element in &ann.spillover[*j] {
                out.push(EFMove::ReplyFromSpillover { element: element.clone() });
            }
        }
    }
    Ok(out)
}

fn advance(p: &EFPosition, left: Context, right: Context, swap: bool) -> EFPosition {
    EFPosition {
        left,
        right,
        attacker: if swap { p.attacker.other() } else { p.attacker },
        rounds_left: p.rounds_left - 1,
        phase: Phase::RoundStart,
    }
}

fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Invalid(msg.into()))
    }
}

/// Apply a move, validating it against the phase.
pub fn apply_move(
    p: &EFPosition,
    mv: &EFMove,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<EFPosition> {
    match (&p.phase, mv) {
        (Phase::RoundStart, EFMove::Announce(ann)) => {
            require(p.rounds_left > 0, "the round budget is exhausted")?;
            let q = qset
                .get(&ann.quantifier)
                .ok_or_else(|| Error::Invalid(format!("unknown quantifier `{}`", ann.quantifier)))?;
            let arities = q.qtype().arities();
            require(
                ann.tuples.len() == arities.len(),
                format!("`{}` takes {} bound tuples", q.name(), arities.len()),
            )?;
            for (t, &a) in ann.tuples.iter().zip(arities) {
                require(
                    t.len() == a,
                    format!("bound tuple ({}) must have arity {a}", t.vars().join(",")),
                )?;
            }
            require(
                ann.witness.len() == ann.tuples.len() && ann.spillover.len() == ann.tuples.len(),
                "one witness set and one spillover set per component",
            )?;
            let (wuniv, ouniv) = universes(p, ann);
            for u in wuniv.iter().chain(ouniv.iter()) {
                caps.check("max-tuple-universe", caps.max_tuple_universe, u.len())?;
            }
            for (set, u) in ann.witness.iter().zip(&wuniv) {
                encode_set(set, u)?;
            }
            for (set, u) in ann.spillover.iter().zip(&ouniv) {
                encode_set(set, u)?;
            }
            let (wctx, _) = oriented(p, ann.side);
            require(
                q_accepts(q, wctx.structure().domain_size(), &ann.witness)?,
                "the quantifier rejects the announced witness sets",
            )?;
            let mut next = p.clone();
            next.phase = Phase::AfterWitnessX(ann.clone());
            Ok(next)
        }
        (Phase::AfterWitnessX(ann), EFMove::ContestWitness { component, inside, outside }) => {
            let j = *component;
            require(j < ann.tuples.len(), "no such component")?;
            let (wuniv, _) = universes(p, ann);
            require(ann.witness[j].contains(inside), "`inside` must lie in the witness set")?;
            require(
                wuniv[j].contains(outside) && !ann.witness[j].contains(outside),
                "`outside` must respect the repetitions and avoid the witness set",
            )?;
            let (wctx, _) = oriented(p, ann.side);
            let t = &ann.tuples[j];
            Ok(advance(p, wctx.extend(t, inside)?, wctx.extend(t, outside)?, false))
        }
        (Phase::AfterWitnessX(ann), EFMove::Proceed) => {
            let mut next = p.clone();
            next.phase = Phase::AfterSpillover(ann.clone());
            Ok(next)
        }
        (Phase::AfterSpillover(ann), EFMove::ContestSpillover { component, inside, reply }) => {
            let j = *component;
            require(j < ann.tuples.len(), "no such component")?;
            let (wuniv, _) = universes(p, ann);
            require(ann.spillover[j].contains(inside), "`inside` must lie in the spillover set")?;
            require(wuniv[j].contains(reply), "`reply` must respect the repetitions")?;
            let (wctx, octx) = oriented(p, ann.side);
            let t = &ann.tuples[j];
            let (l, r) = oriented_pair(ann.side, wctx.extend(t, reply)?, octx.extend(t, inside)?);
            Ok(advance(p, l, r, false))
        }
        (Phase::AfterSpillover(ann), EFMove::SupplyWitness { witness }) => {
            require(
                witness.len() == ann.tuples.len(),
                "one witness set per component",
            )?;
            let (_, ouniv) = universes(p, ann);
            for (set, u) in witness.iter().zip(&ouniv) {
                encode_set(set, u)?;
            }
            for (j, (xp, pj)) in witness.iter().zip(&ann.spillover).enumerate() {
                require(
                    pj.is_subset(xp),
                    format!("witness set {j} must cover the spillover set"),
                )?;
            }
            let q = qset
                .get(&ann.quantifier)
                .ok_or_else(|| Error::Invalid(format!("unknown quantifier `{}`", ann.quantifier)))?;
            let (_, octx) = oriented(p, ann.side);
            require(
                q_accepts(q, octx.structure().domain_size(), witness)?,
                "the quantifier rejects the supplied witness sets",
            )?;
            let mut next = p.clone();
            next.phase = Phase::AfterDefenderWitness(ann.clone(), witness.clone());
            Ok(next)
        }
        (
            Phase::AfterDefenderWitness(ann, xp),
            EFMove::ContestWitness { component, inside, outside },
        ) => {
            let j = *component;
            require(j < ann.tuples.len(), "no such component")?;
            let (_, ouniv) = universes(p, ann);
            require(xp[j].contains(inside), "`inside` must lie in the defender's witness set")?;
            require(
                ouniv[j].contains(outside) && !xp[j].contains(outside),
                "`outside` must respect the repetitions and avoid the witness set",
            )?;
            let (_, octx) = oriented(p, ann.side);
            let t = &ann.tuples[j];
            Ok(advance(p, octx.extend(t, inside)?, octx.extend(t, outside)?, true))
        }
        (Phase::AfterDefenderWitness(ann, xp), EFMove::Proceed) => {
            let mut next = p.clone();
            next.phase = Phase::AttackerPick(ann.clone(), xp.clone());
            Ok(next)
        }
        (
            Phase::AttackerPick(ann, xp),
            EFMove::PickOutside { component, outside, witness_elem },
        ) => {
            let j = *component;
            require(j < ann.tuples.len(), "no such component")?;
            let (_, ouniv) = universes(p, ann);
            require(
                ouniv[j].contains(outside) && !xp[j].contains(outside),
                "`outside` must respect the repetitions and avoid the defender's witness set",
            )?;
            require(
                ann.witness[j].contains(witness_elem),
                "the answer must come from the original witness set",
            )?;
            let (wctx, octx) = oriented(p, ann.side);
            let t = &ann.tuples[j];
            let (l, r) =
                oriented_pair(ann.side, wctx.extend(t, witness_elem)?, octx.extend(t, outside)?);
            Ok(advance(p, l, r, true))
        }
        (Phase::AttackerPick(ann, xp), EFMove::PickInside { component, element }) => {
            let j = *component;
            require(j < ann.tuples.len(), "no such component")?;
            require(xp[j].contains(element), "`element` must lie in the defender's witness set")?;
            let mut next = p.clone();
            next.phase = Phase::DefenderReply(ann.clone(), xp.clone(), j, element.clone());
            Ok(next)
        }
        (Phase::DefenderReply(ann, _, j, picked), EFMove::ReplyFromWitness { element }) => {
            require(
                ann.witness[*j].contains(element),
                "the reply must come from the witness set",
            )?;
            let (wctx, octx) = oriented(p, ann.side);
            let t = &ann.tuples[*j];
            let (l, r) =
                oriented_pair(ann.side, wctx.extend(t, element)?, octx.extend(t, picked)?);
            Ok(advance(p, l, r, false))
        }
        (Phase::DefenderReply(ann, _, j, picked), EFMove::ReplyFromSpillover { element }) => {
            require(
                ann.spillover[*j].contains(element),
                "the reply must come from the spillover set",
            )?;
            let (_, octx) = oriented(p, ann.side);
            let t = &ann.tuples[*j];
            Ok(advance(
                p,
                singleton_context(octx, t, element)?,
                singleton_context(octx, t, picked)?,
                false,
            ))
        }
        _ => Err(Error::Invalid(format!("`{mv}` does not fit the current phase"))),
    }
}

/// Terminal analysis of a position: who must move, or who has won and why.
pub fn status(p: &EFPosition, qset: &QuantifierSet, caps: &Caps) -> Result<GameStatus> {
    match &p.phase {
        Phase::RoundStart => {
            if !partial_isomorphism(&p.left, &p.right)? {
                return Ok(GameStatus::Won(
                    p.attacker,
                    "the assignments disagree on an atomic formula; the attacker wins".into(),
                ));
            }
            if p.rounds_left == 0 {
                return Ok(GameStatus::Won(
                    p.defender(),
                    "the round budget is exhausted while the assignments agree on every atomic formula".into(),
                ));
            }
            let dom = p.left.assignment().domain_set();
            for side in [Side::Left, Side::Right] {
                let (wctx, _) = oriented(p, side);
                for q in qset.iter() {
                    for tuples in tuple_combos_for(&dom, q) {
                        if !accepted_mask_combos(wctx.structure(), q, &tuples, caps)?.is_empty() {
                            return Ok(GameStatus::Ongoing(p.attacker));
                        }
                    }
                }
            }
            Ok(GameStatus::Won(
                p.defender(),
                "the attacker cannot announce: no quantifier accepts a witness family on either side".into(),
            ))
        }
        Phase::AfterWitnessX(_) | Phase::AfterDefenderWitness(..) => Ok(GameStatus::Ongoing(p.mover())),
        Phase::AfterSpillover(ann) => {
            if ann.spillover.iter().any(|s| !s.is_empty()) {
                return Ok(GameStatus::Ongoing(p.defender()));
            }
            let q = qset
                .get(&ann.quantifier)
                .ok_or_else(|| Error::Invalid(format!("unknown quantifier `{}`", ann.quantifier)))?;
            let (_, octx) = oriented(p, ann.side);
            let acc = accepted_mask_combos(octx.structure(), q, &ann.tuples, caps)?;
            let (_, ouniv) = universes(p, ann);
            let pmasks: Vec<Mask> = ann
                .spillover
                .iter()
                .zip(&ouniv)
                .map(|(s, u)| encode_set(s, u))
                .collect::<Result<_>>()?;
            if acc
                .iter()
                .any(|om| (0..ann.tuples.len()).all(|j| pmasks[j] & !om[j] == 0))
            {
                Ok(GameStatus::Ongoing(p.defender()))
            } else {
                Ok(GameStatus::Won(
                    p.attacker,
                    "the defender can neither contest a spillover element nor supply accepted witness sets".into(),
                ))
            }
        }
        Phase::AttackerPick(ann, xp) => {
            let (_, ouniv) = universes(p, ann);
            let inside_possible = xp.iter().any(|s| !s.is_empty());
            let outside_possible = (0..xp.len())
                .any(|j| xp[j].len() < ouniv[j].len() && !ann.witness[j].is_empty());
            if inside_possible || outside_possible {
                Ok(GameStatus::Ongoing(p.attacker))
            } else {
                Ok(GameStatus::Won(
                    p.defender(),
                    "the attacker has no pick: the witness sets leave no legal choice".into(),
                ))
            }
        }
        Phase::DefenderReply(ann, _, j, _) => {
            if !ann.witness[*j].is_empty() || !ann.spillover[*j].is_empty() {
                Ok(GameStatus::Ongoing(p.defender()))
            } else {
                Ok(GameStatus::Won(
                    p.attacker,
                    "the defender has no reply: both the witness set and the spillover set are empty".into(),
                ))
            }
        }
    }
}

impl Solver {
    /// Rebuild the round setup the phase's announcement came from.
    fn phase_setup(&self, p: &EFPosition, ann: &Announcement) -> Result<RoundSetup> {
        let q = self
            .qset
            .get(&ann.quantifier)
            .ok_or_else(|| Error::Invalid(format!("unknown quantifier `{}`", ann.quantifier)))?;
        self.round_setup(&p.left, &p.right, q, &ann.tuples, ann.side, p.rounds_left)
    }

    fn encode_announcement(
        setup: &RoundSetup,
        ann: &Announcement,
    ) -> Result<(Vec<Mask>, Vec<Mask>)> {
        let wmasks = ann
            .witness
            .iter()
            .zip(&setup.wuniv)
            .map(|(s, u)| encode_set(s, u))
            .collect::<Result<Vec<Mask>>>()?;
        let pmasks = ann
            .spillover
            .iter()
            .zip(&setup.ouniv)
            .map(|(s, u)| encode_set(s, u))
            .collect::<Result<Vec<Mask>>>()?;
        Ok((wmasks, pmasks))
    }

    /// The best move for the player to move: a winning move if one exists,
    /// otherwise an arbitrary legal move, otherwise `None` (the mover is
    /// stuck and loses).
    fn phase_best(&self, p: &EFPosition) -> Result<Option<EFMove>> {
        match &p.phase {
            Phase::RoundStart => self.best_announce(p),
            Phase::AfterWitnessX(ann) => {
                let setup = self.phase_setup(p, ann)?;
                let (wmasks, _) = Solver::encode_announcement(&setup, ann)?;
                for j in 0..setup.components() {
                    for &(u, v) in &setup.same_w_pairs[j] {
                        if wmasks[j] & bit(u) != 0 && wmasks[j] & bit(v) == 0 {
                            return Ok(Some(EFMove::ContestWitness {
                                component: j,
                                inside: setup.wuniv[j][u].clone(),
                                outside: setup.wuniv[j][v].clone(),
                            }));
                        }
                    }
                }
                Ok(Some(EFMove::Proceed))
            }
            Phase::AfterSpillover(ann) => {
                let setup = self.phase_setup(p, ann)?;
                let (wmasks, pmasks) = Solver::encode_announcement(&setup, ann)?;
                for j in 0..setup.components() {
                    for oi in mask_bits(pmasks[j] & setup.def_p_col[j]) {
                        let wi = mask_bits(setup.cross_col[j][oi])[0];
                        return Ok(Some(EFMove::ContestSpillover {
                            component: j,
                            inside: setup.ouniv[j][oi].clone(),
                            reply: setup.wuniv[j][wi].clone(),
                        }));
                    }
                }
                let covering = |omasks: &Vec<Mask>| {
                    (0..setup.components()).all(|j| pmasks[j] & !omasks[j] == 0)
                };
                for omasks in setup.acc_o.iter().filter(|om| covering(om)) {
                    if !step4_attacker_wins(&setup, &wmasks, &pmasks, omasks) {
                        let witness = omasks
                            .iter()
                            .zip(&setup.ouniv)
                            .map(|(&m, u)| decode_mask(m, u))
                            .collect();
                        return Ok(Some(EFMove::SupplyWitness { witness }));
                    }
                }
                // no winning move; fall back to any legal one
                if let Some(omasks) = setup.acc_o.iter().find(|om| covering(om)) {
                    let witness = omasks
                        .iter()
                        .zip(&setup.ouniv)
                        .map(|(&m, u)| decode_mask(m, u))
                        .collect();
                    return Ok(Some(EFMove::SupplyWitness { witness }));
                }
                for j in 0..setup.components() {
                    if let Some(inside) = ann.spillover[j].iter().next() {
                        return Ok(Some(EFMove::ContestSpillover {
                            component: j,
                            inside: inside.clone(),
                            reply: setup.wuniv[j][0].clone(),
                        }));
                    }
                }
                Ok(None)
            }
            Phase::AfterDefenderWitness(ann, xp) => {
                let setup = self.phase_setup(p, ann)?;
                let omasks = xp
                    .iter()
                    .zip(&setup.ouniv)
                    .map(|(s, u)| encode_set(s, u))
                    .collect::<Result<Vec<Mask>>>()?;
                for j in 0..setup.components() {
                    let comp = full_mask(setup.ouniv[j].len()) & !omasks[j];
                    for &(v, v2) in &setup.same_o_pairs[j] {
                        if omasks[j] & bit(v) != 0 && comp & bit(v2) != 0 {
                            return Ok(Some(EFMove::ContestWitness {
                                component: j,
                                inside: setup.ouniv[j][v].clone(),
                                outside: setup.ouniv[j][v2].clone(),
                            }));
                        }
                    }
                }
                Ok(Some(EFMove::Proceed))
            }
            Phase::AttackerPick(ann, xp) => {
                let setup = self.phase_setup(p, ann)?;
                let (wmasks, pmasks) = Solver::encode_announcement(&setup, ann)?;
                let omasks = xp
                    .iter()
                    .zip(&setup.ouniv)
                    .map(|(s, u)| encode_set(s, u))
                    .collect::<Result<Vec<Mask>>>()?;
                for j in 0..setup.components() {
                    let comp = full_mask(setup.ouniv[j].len()) & !omasks[j];
                    for v2 in mask_bits(comp) {
                        let answers = setup.cross_col[j][v2] & wmasks[j];
                        if answers != 0 {
                            return Ok(Some(EFMove::PickOutside {
                                component: j,
                                outside: setup.ouniv[j][v2].clone(),
                                witness_elem: setup.wuniv[j][mask_bits(answers)[0]].clone(),
                            }));
                        }
                    }
                    for v2 in mask_bits(omasks[j]) {
                        if setup.cross_col[j][v2] & wmasks[j] == 0
                            && setup.reset_col[j][v2] & pmasks[j] == 0
                        {
                            return Ok(Some(EFMove::PickInside {
                                component: j,
                                element: setup.ouniv[j][v2].clone(),
                            }));
                        }
                    }
                }
                // no winning pick; any legal pick
                for j in 0..setup.components() {
                    if let Some(element) = xp[j].iter().next() {
                        return Ok(Some(EFMove::PickInside { component: j, element: element.clone() }));
                    }
                    let comp = full_mask(setup.ouniv[j].len()) & !omasks[j];
                    if comp != 0 {
                        if let Some(w) = ann.witness[j].iter().next() {
                            return Ok(Some(EFMove::PickOutside {
                                component: j,
                                outside: setup.ouniv[j][mask_bits(comp)[0]].clone(),
                                witness_elem: w.clone(),
                            }));
                        }
                    }
                }
                Ok(None)
            }
            Phase::DefenderReply(ann, _, j, picked) => {
                let setup = self.phase_setup(p, ann)?;
                let (wmasks, pmasks) = Solver::encode_announcement(&setup, ann)?;
                let oi = setup.ouniv[*j]
                    .iter()
                    .position(|t| t == picked)
                    .ok_or_else(|| Error::Invalid("picked tuple left the universe".into()))?;
                let from_witness = setup.cross_col[*j][oi] & wmasks[*j];
                if from_witness != 0 {
                    return Ok(Some(EFMove::ReplyFromWitness {
                        element: setup.wuniv[*j][mask_bits(from_witness)[0]].clone(),
                    }));
                }
                let from_spill = setup.reset_col[*j][oi] & pmasks[*j];
                if from_spill != 0 {
                    return Ok(Some(EFMove::ReplyFromSpillover {
                        element: setup.ouniv[*j][mask_bits(from_spill)[0]].clone(),
                    }));
                }
                if let Some(element) = ann.witness[*j].iter().next() {
                    return Ok(Some(EFMove::ReplyFromWitness { element: element.clone() }));
                }
                if let Some(element) = ann.spillover[*j].iter().next() {
                    return Ok(Some(EFMove::ReplyFromSpillover { element: element.clone() }));
                }
                Ok(None)
            }
        }
    }

    fn best_announce(&self, p: &EFPosition) -> Result<Option<EFMove>> {
        if p.rounds_left == 0 || !partial_isomorphism(&p.left, &p.right)? {
            return Ok(None);
        }
        let dom = p.left.assignment().domain_set();
        let mut fallback: Option<EFMove> = None;
        for side in [Side::Left, Side::Right] {
            for q in self.qset.iter() {
                for tuples in tuple_combos_for(&dom, q) {
                    let setup = self.round_setup(&p.left, &p.right, q, &tuples, side, p.rounds_left)?;
                    let build = |wmasks: &[Mask], pmasks: &[Mask]| {
                        EFMove::Announce(Announcement {
                            quantifier: q.name().to_string(),
                            tuples: tuples.clone(),
                            side,
                            witness: wmasks
                                .iter()
                                .zip(&setup.wuniv)
                                .map(|(&m, u)| decode_mask(m, u))
                                .collect(),
                            spillover: pmasks
                                .iter()
                                .zip(&setup.ouniv)
                                .map(|(&m, u)| decode_mask(m, u))
                                .collect(),
                        })
                    };
                    if let Some((wmasks, pmasks)) = self.winning_announcement(&setup)? {
                        return Ok(Some(build(&wmasks, &pmasks)));
                    }
                    if fallback.is_none() {
                        if let Some(wmasks) = setup.acc_w.first() {
                            let pmasks = vec![0; setup.components()];
                            fallback = Some(build(wmasks, &pmasks));
                        }
                    }
                }
            }
        }
        Ok(fallback)
    }
}

fn move_note(p: &EFPosition, mv: &EFMove) -> String {
    match (&p.phase, mv) {
        (Phase::RoundStart, EFMove::Announce(ann)) => format!(
            "the attacker opens a round with `{}` on the {} model",
            ann.quantifier, ann.side
        ),
        (Phase::AfterWitnessX(ann), EFMove::ContestWitness { .. }) => format!(
            "the defender contests a witness set; play continues on two copies of the {} model",
            ann.side
        ),
        (Phase::AfterWitnessX(_), EFMove::Proceed) => "the defender lets the witness sets stand".into(),
        (Phase::AfterSpillover(_), EFMove::ContestSpillover { .. }) => {
            "the defender contests a spillover element; the round ends on the extended pair".into()
        }
        (Phase::AfterSpillover(ann), EFMove::SupplyWitness { .. }) => format!(
            "the defender supplies witness sets on the {} model",
            ann.side.other()
        ),
        (Phase::AfterDefenderWitness(ann, _), EFMove::ContestWitness { .. }) => format!(
            "the attacker contests the defender's witness set and the players swap roles; play continues on two copies of the {} model",
            ann.side.other()
        ),
        (Phase::AfterDefenderWitness(..), EFMove::Proceed) => {
            "the attacker lets the defender's witness sets stand".into()
        }
        (Phase::AttackerPick(..), EFMove::PickOutside { .. }) => {
            "the attacker picks outside the defender's witness set; the players swap roles".into()
        }
        (Phase::AttackerPick(..), EFMove::PickInside { .. }) => {
            "the attacker picks inside the defender's witness set; the defender must answer".into()
        }
        (Phase::DefenderReply(..), EFMove::ReplyFromWitness { .. }) => {
            "the defender answers from the original witness set".into()
        }
        (Phase::DefenderReply(ann, ..), EFMove::ReplyFromSpillover { .. }) => format!(
            "the defender answers from the spillover set; play restarts on two copies of the {} model under fresh assignments",
            ann.side.other()
        ),
        _ => String::new(),
    }
}

/// The solved game: the winner and a queryable winning strategy.
#[derive(Debug)]
pub struct EFOutcome {
    winner: Player,
    start: EFPosition,
    solver: Solver,
}

impl EFOutcome {
    pub fn winner(&self) -> Player {
        self.winner
    }

    pub fn start(&self) -> &EFPosition {
        &self.start
    }

    /// The stored strategy's move at `p` (a winning move whenever `p` is
    /// winning for the player to move), or `None` if the mover is stuck.
    pub fn best_move(&self, p: &EFPosition) -> Result<Option<EFMove>> {
        self.solver.phase_best(p)
    }

    /// Materialize the winner's strategy: a map from every position
    /// reachable under it (over all opponent replies) where the winner is to
    /// move, to the winner's chosen move. The map is closed — following it
    /// from the start position always reaches a terminal win.
    pub fn strategy_map(&self) -> Result<BTreeMap<String, EFMove>> {
        let mut map = BTreeMap::new();
        let mut seen = BTreeSet::new();
        let mut queue = vec![self.start.clone()];
        while let Some(p) = queue.pop() {
            if !seen.insert(p.key()) {
                continue;
            }
            match status(&p, &self.solver.qset, &self.solver.caps)? {
                GameStatus::Won(..) => {}
                GameStatus::Ongoing(mover) => {
                    if mover == self.winner {
                        let mv = self.solver.phase_best(&p)?.ok_or_else(|| {
                            Error::Invalid(
                                "the stored winner has no move at an ongoing position".into(),
                            )
                        })?;
                        queue.push(apply_move(&p, &mv, &self.solver.qset, &self.solver.caps)?);
                        map.insert(p.key(), mv);
                    } else {
                        for mv in legal_moves(&p, &self.solver.qset, &self.solver.caps)? {
                            queue.push(apply_move(&p, &mv, &self.solver.qset, &self.solver.caps)?);
                        }
                    }
                }
            }
        }
        Ok(map)
    }

    /// Play the stored strategy against the supplied opponent moves and
    /// record the game. The opponent moves are consumed in order whenever it
    /// is the opponent's turn; an illegal move is rejected together with a
    /// sample of the legal ones.
    pub fn replay(&self, opponent: &[EFMove]) -> Result<Transcript> {
        let mut steps = Vec::new();
        let mut pos = self.start.clone();
        let mut supplied = opponent.iter();
        loop {
            match status(&pos, &self.solver.qset, &self.solver.caps)? {
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
                    let mv = if mover == self.winner {
                        self.solver.phase_best(&pos)?.ok_or_else(|| {
                            Error::Invalid(
                                "the stored winner has no move at an ongoing position".into(),
                            )
                        })?
                    } else {
                        match supplied.next() {
                            Some(m) => m.clone(),
                            None => {
                                return Err(Error::Invalid(
                                    "the opponent move sequence ended before the game did".into(),
                                ))
                            }
                        }
                    };
                    let next = apply_move(&pos, &mv, &self.solver.qset, &self.solver.caps)
                        .map_err(|e| {
                            let legal = legal_moves(&pos, &self.solver.qset, &self.solver.caps)
                                .unwrap_or_default();
                            let sample: Vec<String> =
                                legal.iter().take(8).map(|m| m.to_string()).collect();
                            Error::Invalid(format!(
                                "illegal move `{mv}`: {e}; legal moves include: {}",
                                sample.join(" | ")
                            ))
                        })?;
                    steps.push(TranscriptStep {
                        position: pos.key(),
                        actor: mover.to_string(),
                        action: mv.to_string(),
                        note: move_note(&pos, &mv),
                    });
                    pos = next;
                }
            }
        }
    }
}

/// Solve the `rounds`-round comparison game from `(left, right)`. Player I
/// opens as the attacker; the winner is exact by backward induction.
pub fn solve_ef(
    left: &Context,
    right: &Context,
    rounds: usize,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<EFOutcome> {
    caps.check_domain(left.structure().domain_size())?;
    caps.check_domain(right.structure().domain_size())?;
    caps.check("max-rounds", caps.max_rounds, rounds)?;
    let start = EFPosition::start(left.clone(), right.clone(), rounds)?;
    let solver = Solver::new(qset, caps);
    let winner = match solver.value(left, right, rounds)? {
        Role::Attacker => Player::One,
        Role::Defender => Player::Two,
    };
    Ok(EFOutcome { winner, start, solver })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::Vocabulary;
    use crate::types;

    fn unary_vocab() -> Vocabulary {
        Vocabulary::new([("B", 1), ("R", 1)]).unwrap()
    }

    fn structure(vocab: &Vocabulary, n: usize, rels: &[(&str, &[usize])]) -> Structure {
        let mut map: BTreeMap<String, TupleSet> = BTreeMap::new();
        for (name, elems) in rels {
            map.insert(
                name.to_string(),
                elems.iter().map(|&e| vec![e]).collect(),
            );
        }
        Structure::new(vocab.clone(), n, map).unwrap()
    }

    fn fig1() -> (Context, Context, Context) {
        let v = unary_vocab();
        let a = structure(&v, 4, &[("B", &[0, 1, 2])]);
        let b1 = structure(&v, 4, &[("B", &[0, 1, 2]), ("R", &[3])]);
        let b2 = structure(&v, 4, &[("B", &[0]), ("R", &[1])]);
        (
            Context::sentence(a),
            Context::sentence(b1),
            Context::sentence(b2),
        )
    }

    fn exactly_three() -> QuantifierSet {
        QuantifierSet::builtins(["exactly=3"]).unwrap()
    }

    #[test]
    fn partial_isomorphism_checks_every_atom() {
        let (a, _, b2) = fig1();
        assert!(partial_isomorphism(&a, &b2).unwrap());

        let v = unary_vocab();
        let with = structure(&v, 2, &[("B", &[0])]);
        let without = structure(&v, 2, &[]);
        let bind =
            |s: &Structure| Context::new(s.clone(), Assignment::new([("x", 0)])).unwrap();
        assert!(!partial_isomorphism(&bind(&with), &bind(&without)).unwrap());
        assert!(partial_isomorphism(&bind(&with), &bind(&with)).unwrap());

        let unbound = Context::sentence(with.clone());
        assert!(matches!(
            partial_isomorphism(&bind(&with), &unbound),
            Err(Error::AssignmentDomainMismatch)
        ));
    }

    #[test]
    fn running_example_attacker_wins_in_one_round() {
        let (a, b1, b2) = fig1();
        let qset = exactly_three();
        let caps = Caps::default();
        assert_eq!(solve_ef(&a, &b2, 1, &qset, &caps).unwrap().winner(), Player::One);
        assert_eq!(solve_ef(&a, &b1, 1, &qset, &caps).unwrap().winner(), Player::One);
        assert_eq!(solve_ef(&a, &b2, 0, &qset, &caps).unwrap().winner(), Player::Two);
        assert_eq!(solve_ef(&a, &b1, 0, &qset, &caps).unwrap().winner(), Player::Two);
    }

    #[test]
    fn isomorphic_structures_are_never_separated() {
        let v = unary_vocab();
        let left = Context::sentence(structure(&v, 4, &[("B", &[0, 1])]));
        let right = Context::sentence(structure(&v, 4, &[("B", &[2, 3])]));
        let qset = QuantifierSet::builtins(["exists", "exactly=2", "most"]).unwrap();
        let caps = Caps::default();
        for d in 0..=3 {
            assert_eq!(
                solve_ef(&left, &right, d, &qset, &caps).unwrap().winner(),
                Player::Two,
                "isomorphic pair separated at {d} rounds"
            );
        }
    }

    #[test]
    fn zero_rounds_is_the_partial_isomorphism_check() {
        let v = unary_vocab();
        let with = structure(&v, 2, &[("B", &[0])]);
        let without = structure(&v, 2, &[]);
        let qset = exactly_three();
        let caps = Caps::default();
        let left = Context::new(with, Assignment::new([("x", 0)])).unwrap();
        let right = Context::new(without, Assignment::new([("x", 0)])).unwrap();
        assert_eq!(solve_ef(&left, &right, 0, &qset, &caps).unwrap().winner(), Player::One);
    }

    #[test]
    fn forall_announcements_use_the_full_domain() {
        let (a, _, b2) = fig1();
        let qset = QuantifierSet::builtins(["forall"]).unwrap();
        let caps = Caps::default();
        let start = EFPosition::start(a, b2, 1).unwrap();
        let moves = legal_moves(&start, &qset, &caps).unwrap();
        assert!(!moves.is_empty());
        for mv in &moves {
            let EFMove::Announce(ann) = mv else {
                panic!("round start only offers announcements");
            };
            assert_eq!(ann.witness[0].len(), 4, "forall witness must be the full domain");
        }
    }

    #[test]
    fn cardinality_constraints_rule_out_small_sides() {
        let v = unary_vocab();
        let small = Context::sentence(structure(&v, 2, &[("B", &[0])]));
        let large = Context::sentence(structure(&v, 4, &[("B", &[0])]));
        let qset = exactly_three();
        let caps = Caps::default();
        let start = EFPosition::start(small, large, 1).unwrap();
        let mut right_witnesses = BTreeSet::new();
        for mv in legal_moves(&start, &qset, &caps).unwrap() {
            let EFMove::Announce(ann) = mv else { panic!("unexpected move") };
            assert_eq!(ann.side, Side::Right, "domain 2 has no 3-element subsets");
            assert_eq!(ann.witness[0].len(), 3);
            right_witnesses.insert(ann.witness[0].clone());
        }
        assert_eq!(right_witnesses.len(), 4, "all 3-subsets of a 4-element domain");
    }

    #[test]
    fn defender_supplies_enumerate_matching_subsets() {
        let (a, _, b2) = fig1();
        let qset = exactly_three();
        let caps = Caps::default();
        let start = EFPosition::start(a, b2, 1).unwrap();
        let announce = EFMove::Announce(Announcement {
            quantifier: "exactly=3".into(),
            tuples: vec![VarTuple::single("y0")],
            side: Side::Left,
            witness: vec![[vec![0], vec![1], vec![2]].into_iter().collect()],
            spillover: vec![TupleSet::new()],
        });
        let after_witness = apply_move(&start, &announce, &qset, &caps).unwrap();
        let after_spill =
            apply_move(&after_witness, &EFMove::Proceed, &qset, &caps).unwrap();
        let moves = legal_moves(&after_spill, &qset, &caps).unwrap();
        assert_eq!(moves.len(), 4, "all 3-subsets of the other domain, no contests");
        for mv in &moves {
            let EFMove::SupplyWitness { witness } = mv else {
                panic!("an empty spillover set cannot be contested");
            };
            assert_eq!(witness[0].len(), 3);
        }
    }

    #[test]
    fn winners_match_type_equivalence() {
        let (a, b1, b2) = fig1();
        let qset = exactly_three();
        let caps = Caps::default();
        for (left, right) in [(&a, &b1), (&a, &b2), (&b1, &b2)] {
            for d in 0..=2 {
                let equivalent = types::d_equivalent(left, right, d, &qset, &caps).unwrap();
                let winner = solve_ef(left, right, d, &qset, &caps).unwrap().winner();
                assert_eq!(
                    winner == Player::One,
                    !equivalent,
                    "game and type partition disagree at depth {d}"
                );
            }
        }
    }

    #[test]
    fn haertig_compares_cardinalities_across_components() {
        let v = unary_vocab();
        let balanced = Context::sentence(structure(&v, 2, &[("B", &[0]), ("R", &[1])]));
        let lopsided = Context::sentence(structure(&v, 2, &[("B", &[0, 1])]));
        let qset = QuantifierSet::builtins(["haertig"]).unwrap();
        let caps = Caps::default();
        assert_eq!(
            solve_ef(&balanced, &lopsided, 1, &qset, &caps).unwrap().winner(),
            Player::One
        );
        assert_eq!(
            solve_ef(&balanced, &balanced, 2, &qset, &caps).unwrap().winner(),
            Player::Two
        );
    }

    #[test]
    fn the_stored_strategy_is_closed_and_always_wins() {
        let (a, _, b2) = fig1();
        let qset = exactly_three();
        let caps = Caps::default();
        let outcome = solve_ef(&a, &b2, 1, &qset, &caps).unwrap();
        assert_eq!(outcome.winner(), Player::One);
        let map = outcome.strategy_map().unwrap();
        assert!(!map.is_empty());

        // walk every opponent reply; the strategy must always reach a win
        let mut queue = vec![outcome.start().clone()];
        let mut seen = BTreeSet::new();
        let mut terminals = 0usize;
        while let Some(p) = queue.pop() {
            if !seen.insert(p.key()) {
                continue;
            }
            match status(&p, &qset, &caps).unwrap() {
                GameStatus::Won(w, _) => {
                    terminals += 1;
                    assert_eq!(w, Player::One, "strategy leaked a defender win");
                }
                GameStatus::Ongoing(mover) => {
                    if mover == Player::One {
                        let mv = map.get(&p.key()).expect("strategy map is closed");
                        queue.push(apply_move(&p, mv, &qset, &caps).unwrap());
                    } else {
                        for mv in legal_moves(&p, &qset, &caps).unwrap() {
                            queue.push(apply_move(&p, &mv, &qset, &caps).unwrap());
                        }
                    }
                }
            }
        }
        assert!(terminals > 0);
    }

    #[test]
    fn replay_reports_the_stored_winner() {
        let (a, _, b2) = fig1();
        let qset = exactly_three();
        let caps = Caps::default();
        let outcome = solve_ef(&a, &b2, 1, &qset, &caps).unwrap();

        // harvest a defender line by letting both sides play their best
        let mut defender_line = Vec::new();
        let mut pos = outcome.start().clone();
        while let GameStatus::Ongoing(mover) = status(&pos, &qset, &caps).unwrap() {
            let mv = outcome.best_move(&pos).unwrap().expect("mover has a move");
            if mover == Player::Two {
                defender_line.push(mv.clone());
            }
            pos = apply_move(&pos, &mv, &qset, &caps).unwrap();
        }

        let transcript = outcome.replay(&defender_line).unwrap();
        assert_eq!(transcript.winner, Player::One);
        assert_eq!(transcript.steps.last().unwrap().action, "game over");
        let rounds_played = transcript
            .steps
            .iter()
            .filter(|s| s.action.starts_with("announce"))
            .count();
        assert_eq!(rounds_played, 1, "the example pairs fall in a single round");

        let zero = solve_ef(&a, &b2, 0, &qset, &caps).unwrap();
        let transcript = zero.replay(&[]).unwrap();
        assert_eq!(transcript.winner, Player::Two);
        assert_eq!(transcript.steps.len(), 1, "a 0-round game is just the atom check");
    }

    #[test]
    fn sides_are_interchangeable() {
        let (a, b1, b2) = fig1();
        let qset = exactly_three();
        let caps = Caps::default();
        for (left, right) in [(&a, &b1), (&a, &b2)] {
            for d in 0..=1 {
                let forward = solve_ef(left, right, d, &qset, &caps).unwrap().winner();
                let backward = solve_ef(right, left, d, &qset, &caps).unwrap().winner();
                assert_eq!(forward, backward);
            }
        }
    }

    #[test]
    fn an_attacker_without_announcements_loses() {
        let v = unary_vocab();
        let left = Context::sentence(structure(&v, 2, &[("B", &[0])]));
        let right = Context::sentence(structure(&v, 2, &[]));
        let qset = exactly_three();
        let caps = Caps::default();
        // both domains have two elements: no 3-element witness set exists
        assert_eq!(solve_ef(&left, &right, 3, &qset, &caps).unwrap().winner(), Player::Two);
        let start = EFPosition::start(left, right, 3).unwrap();
        match status(&start, &qset, &caps).unwrap() {
            GameStatus::Won(w, reason) => {
                assert_eq!(w, Player::Two);
                assert!(reason.contains("cannot announce"));
            }
            other => panic!("expected an immediate defender win, got {other:?}"),
        }
    }

    #[test]
    fn caps_are_enforced_by_name() {
        let (a, _, b2) = fig1();
        let qset = exactly_three();
        let caps = Caps::default();
        match solve_ef(&a, &b2, 7, &qset, &caps) {
            Err(Error::CapExceeded { cap, .. }) => assert_eq!(cap, "max-rounds"),
            other => panic!("expected a cap refusal, got {other:?}"),
        }
        let v = unary_vocab();
        let big = Context::sentence(structure(&v, 5, &[("B", &[0])]));
        match solve_ef(&big, &b2, 1, &qset, &caps) {
            Err(Error::CapExceeded { cap, .. }) => assert_eq!(cap, "max-domain"),
            other => panic!("expected a cap refusal, got {other:?}"),
        }
        let ev = Vocabulary::new([("E", 2)]).unwrap();
        let edges = Context::sentence(
            Structure::new(ev.clone(), 4, BTreeMap::new()).unwrap(),
        );
        let ham = QuantifierSet::builtins(["ham"]).unwrap();
        match solve_ef(&edges, &edges.clone(), 1, &ham, &caps) {
            Err(Error::CapExceeded { cap, .. }) => assert_eq!(cap, "max-tuple-universe"),
            other => panic!("expected a cap refusal, got {other:?}"),
        }
    }
}
