//! Brute-force ground truth: exhaustive semantic enumeration of formulas.
//!
//! Over a fixed finite family of contexts (one vocabulary, one shared
//! assignment domain) and a bounded variable pool, every formula is
//! characterized by its *truth table*: one bit per evaluation point, where
//! the points are all total valuations of the pool in each family member.
//! Formulas with equal tables and equal free-variable sets are
//! interchangeable for separability, so bottom-up synthesis keeps one
//! minimum-size representative per (free variables, table) key:
//!
//! * size 1: the atoms over the pool;
//! * size `s`: negations of size `s-1`, conjunctions of sizes `u+v = s`,
//!   and quantifier applications with component sizes summing to `s-1`.
//!
//! Tables compose: negation and conjunction are bitwise, and a quantifier
//! application reads its component extensions straight out of the component
//! tables (the point set is closed under rebinding pool variables), so no
//! formula is ever re-evaluated during synthesis.
//!
//! Completeness is relative to the variable pool — the assignment domain
//! plus a configurable number of fresh names (`caps.fresh_vars`). Bound
//! variables can be reused across nesting levels, so a small pool covers
//! every formula at desk scales, but no sufficiency proof is attempted and
//! callers of the agreement suites size their instances accordingly.
//!
//! The oracle is the acceptance arbiter: it implements the satisfaction
//! clauses directly, with no game-theoretic reasoning, so wherever a game
//! solver and the oracle disagree, the solver is wrong.

use std::collections::{BTreeSet, HashMap};

use crate::caps::Caps;
use crate::formulas::Formula;
use crate::quantifiers::{q_accepts, QuantifierSet};
use crate::structures::{fresh_names, tuples_respecting, Context, VarTuple};
use crate::types;
use crate::{Error, Result};

/// One synthesized representative: the smallest formula found for its
/// (free variables, truth table) key.
#[derive(Debug, Clone)]
pub struct Entry {
    formula: Formula,
    size: usize,
    free: BTreeSet<String>,
    table: Vec<u64>,
}

impl Entry {
    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn free_vars(&self) -> &BTreeSet<String> {
        &self.free
    }
}

/// The result of size-stratified synthesis over a context family.
#[derive(Debug)]
pub struct Enumeration {
    family: Vec<Context>,
    dom: BTreeSet<String>,
    /// Sorted variable pool: the assignment domain plus fresh names.
    pool: Vec<String>,
    /// Point-index offset of each family member's valuation block.
    offsets: Vec<usize>,
    point_count: usize,
    entries: Vec<Entry>,
    /// Entry indices per size (index 0 unused).
    by_size: Vec<Vec<usize>>,
    s_max: usize,
}

impl Enumeration {
    pub fn family(&self) -> &[Context] {
        &self.family
    }

    pub fn pool(&self) -> &[String] {
        &self.pool
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Representatives of exactly the given size, in synthesis order.
    pub fn entries_of_size(&self, s: usize) -> impl Iterator<Item = &Entry> {
        self.by_size
            .get(s)
            .into_iter()
            .flatten()
            .map(move |&i| &self.entries[i])
    }

    /// Number of distinct (free variables, table) keys reachable at exactly
    /// the given size (and not at any smaller size).
    pub fn distinct_at_size(&self, s: usize) -> usize {
        self.by_size.get(s).map_or(0, Vec::len)
    }

    /// The evaluation point of a family member: its own assignment on the
    /// domain variables, fresh pool variables pinned to element 0. Entries
    /// whose free variables lie in the domain are constant across the fresh
    /// coordinates, so this is the member's truth value for them.
    fn member_point(&self, member: usize) -> usize {
        let ctx = &self.family[member];
        let n = ctx.structure().domain_size();
        let mut idx = 0usize;
        for var in &self.pool {
            idx = idx * n + ctx.assignment().get(var).unwrap_or(0);
        }
        self.offsets[member] + idx
    }

    fn bit(&self, entry: &Entry, point: usize) -> bool {
        entry.table[point / 64] & (1u64 << (point % 64)) != 0
    }

    /// Is the entry a separator: free variables within the assignment
    /// domain, true on every `left` member, false on every `right` member
    /// (member indices into the family)?
    pub fn separates(&self, entry: &Entry, left: &[usize], right: &[usize]) -> bool {
        entry.free.is_subset(&self.dom)
            && left.iter().all(|&m| self.bit(entry, self.member_point(m)))
            && right.iter().all(|&m| !self.bit(entry, self.member_point(m)))
    }
}

/// Exhaustive synthesis of all formulas of size at most `s_max` over the
/// family's pool, deduplicated semantically.
pub fn enumerate_by_size(
    family: &[Context],
    s_max: usize,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<Enumeration> {
    let mut builder = Builder::new(family, qset, caps)?;
    builder.extend_to(s_max)?;
    Ok(builder.finish())
}

/// The least size at which some formula (free variables within the shared
/// assignment domain) holds on all of `left` and on none of `right`,
/// searched up to `s_max`; returns the witness.
pub fn min_separating_size(
    left: &[Context],
    right: &[Context],
    s_max: usize,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<Option<(usize, Formula)>> {
    let family: Vec<Context> = left.iter().chain(right).cloned().collect();
    let mut builder = Builder::new(&family, qset, caps)?;
    let left_idx: Vec<usize> = (0..left.len()).collect();
    let right_idx: Vec<usize> = (left.len()..family.len()).collect();
    for s in 1..=s_max {
        builder.extend_to(s)?;
        let en = &builder.en;
        for &i in &en.by_size[s] {
            let entry = &en.entries[i];
            if en.separates(entry, &left_idx, &right_idx) {
                return Ok(Some((s, entry.formula.clone())));
            }
        }
    }
    Ok(None)
}

/// Depth-bounded separation via the types engine: `None` when the contexts
/// are `d`-equivalent, otherwise a verified witness of depth at most `d`
/// that is true on `left` and false on `right`.
pub fn separable_at_depth(
    left: &Context,
    right: &Context,
    d: usize,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<Option<Formula>> {
    match types::separating_formula(left, right, d, qset, caps)? {
        None => Ok(None),
        Some(witness) => {
            let ok = witness.depth() <= d
                && witness.eval(left, qset)?
                && !witness.eval(right, qset)?;
            if !ok {
                return Err(Error::Invalid(
                    "type-based separator failed re-evaluation".into(),
                ));
            }
            Ok(Some(witness))
        }
    }
}

/// The weak-versus-strong comparison for finite classes: per-pair minimal
/// separators, the single disjunction-of-conjunctions separator assembled
/// from them, and the true class minimum where the search can afford it.
#[derive(Debug)]
pub struct WeakStrongReport {
    /// `pair_minima[i][j]`: minimal separator of (`a[i]`, `b[j]`) within
    /// `s_max`.
    pub pair_minima: Vec<Vec<Option<(usize, Formula)>>>,
    /// Every pair separable within the bound (vacuously true when a class
    /// is empty).
    pub weakly_separable: bool,
    /// A class was empty, so separation is vacuous and no formula is
    /// assembled.
    pub vacuous: bool,
    /// `⋁_i ⋀_j φ_{i,j}` over the pair witnesses, when all exist.
    pub psi: Option<Formula>,
    /// The assembled formula re-evaluated as a class separator.
    pub psi_verified: bool,
    /// Minimal class separator within `s_max`, if the search completed.
    pub true_minimum: Option<(usize, Formula)>,
    /// False when the class-level search was refused by a cap or exhausted
    /// the bound; the constructive bound `size(psi)` still stands.
    pub true_minimum_known: bool,
}

pub fn weak_vs_strong_report(
    a: &[Context],
    b: &[Context],
    s_max: usize,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<WeakStrongReport> {
    if a.is_empty() || b.is_empty() {
        return Ok(WeakStrongReport {
            pair_minima: vec![Vec::new(); a.len()],
            weakly_separable: true,
            vacuous: true,
            psi: None,
            psi_verified: false,
            true_minimum: None,
            true_minimum_known: false,
        });
    }
    let mut pair_minima = Vec::with_capacity(a.len());
    for ai in a {
        let mut row = Vec::with_capacity(b.len());
        for bj in b {
            row.push(min_separating_size(
                std::slice::from_ref(ai),
                std::slice::from_ref(bj),
                s_max,
                qset,
                caps,
            )?);
        }
        pair_minima.push(row);
    }
    let weakly_separable = pair_minima
        .iter()
        .all(|row| row.iter().all(Option::is_some));

    let (psi, psi_verified) = if weakly_separable {
        let disjuncts: Vec<Formula> = pair_minima
            .iter()
            .map(|row| {
                Formula::and_all(
                    row.iter()
                        .map(|m| m.as_ref().unwrap().1.clone())
                        .collect(),
                )
                .expect("b is non-empty")
            })
            .collect();
        let psi = Formula::or_all(disjuncts).expect("a is non-empty");
        let mut verified = true;
        for ai in a {
            verified &= psi.eval(ai, qset)?;
        }
        for bj in b {
            verified &= !psi.eval(bj, qset)?;
        }
        (Some(psi), verified)
    } else {
        (None, false)
    };

    let (true_minimum, true_minimum_known) = match min_separating_size(a, b, s_max, qset, caps) {
        Ok(Some(found)) => (Some(found), true),
        Ok(None) => (None, false),
        Err(Error::CapExceeded { .. }) => (None, false),
        Err(e) => return Err(e),
    };

    Ok(WeakStrongReport {
        pair_minima,
        weakly_separable,
        vacuous: false,
        psi,
        psi_verified,
        true_minimum,
        true_minimum_known,
    })
}

// ---------------------------------------------------------------------------
// the synthesis core
// ---------------------------------------------------------------------------

/// Per (family member, bound word) quantification data: the
/// repetition-respecting tuples and, for every valuation of the pool, the
/// point reached by rebinding the word to each tuple.
struct WordData {
    tuples: Vec<Vec<usize>>,
    /// `targets[valuation][tuple]` — point indices, member offset included.
    targets: Vec<Vec<u32>>,
}

struct Builder {
    en: Enumeration,
    qset: QuantifierSet,
    caps: Caps,
    seen: HashMap<(BTreeSet<String>, Vec<u64>), ()>,
    words: HashMap<(usize, Vec<String>), WordData>,
    /// Acceptance per (quantifier index, member, component fiber masks) for
    /// set-dependent quantifiers.
    accept_memo: HashMap<(usize, usize, Vec<u64>), bool>,
    built: usize,
}

impl Builder {
    fn new(family: &[Context], qset: &QuantifierSet, caps: &Caps) -> Result<Builder> {
        if family.is_empty() {
            return Err(Error::Invalid("need at least one context".into()));
        }
        let vocab = family[0].structure().vocabulary();
        let dom = family[0].assignment().domain_set();
        for ctx in family {
            if ctx.structure().vocabulary() != vocab {
                return Err(Error::VocabularyMismatch);
            }
            if ctx.assignment().domain_set() != dom {
                return Err(Error::AssignmentDomainMismatch);
            }
            caps.check_domain(ctx.structure().domain_size())?;
        }
        let mut pool: Vec<String> = dom.iter().cloned().collect();
        pool.extend(fresh_names(&dom, caps.fresh_vars));
        pool.sort();

        let mut offsets = Vec::with_capacity(family.len());
        let mut point_count = 0usize;
        for ctx in family {
            offsets.push(point_count);
            point_count += ctx.structure().domain_size().pow(pool.len() as u32);
        }
        caps.check("max-family", caps.max_family, point_count)?;

        Ok(Builder {
            en: Enumeration {
                family: family.to_vec(),
                dom,
                pool,
                offsets,
                point_count,
                entries: Vec::new(),
                by_size: vec![Vec::new()],
                s_max: 0,
            },
            qset: qset.clone(),
            caps: caps.clone(),
            seen: HashMap::new(),
            words: HashMap::new(),
            accept_memo: HashMap::new(),
            built: 0,
        })
    }

    fn finish(self) -> Enumeration {
        self.en
    }

    fn blocks(&self) -> usize {
        self.en.point_count.div_ceil(64)
    }

    /// Mask clearing the unused bits of the last block.
    fn tail_mask(&self) -> u64 {
        match self.en.point_count % 64 {
            0 => !0u64,
            r => (1u64 << r) - 1,
        }
    }

    fn extend_to(&mut self, s_max: usize) -> Result<()> {
        self.caps.check("max-budget", self.caps.max_budget, s_max)?;
        while self.built < s_max {
            let s = self.built + 1;
            // a stratum can come out empty (all candidates deduplicated);
            // keep the index aligned regardless
            while self.en.by_size.len() <= s {
                self.en.by_size.push(Vec::new());
            }
            if s == 1 {
                self.atoms()?;
            } else {
                self.negations(s)?;
                self.conjunctions(s)?;
                self.quantifications(s)?;
            }
            self.built = s;
            self.en.s_max = s;
        }
        Ok(())
    }

    fn offer(&mut self, formula: Formula, size: usize, table: Vec<u64>) -> Result<()> {
        let free = formula.free_vars();
        let key = (free.clone(), table.clone());
        if self.seen.contains_key(&key) {
            return Ok(());
        }
        self.caps.check(
            "max-synth-entries",
            self.caps.max_synth_entries,
            self.en.entries.len() + 1,
        )?;
        self.seen.insert(key, ());
        while self.en.by_size.len() <= size {
            self.en.by_size.push(Vec::new());
        }
        self.en.by_size[size].push(self.en.entries.len());
        self.en.entries.push(Entry {
            formula,
            size,
            free,
            table,
        });
        Ok(())
    }

    /// Decode a within-member valuation index into pool values (base `n`).
    fn decode(&self, mut idx: usize, n: usize) -> Vec<usize> {
        let mut vals = vec![0usize; self.en.pool.len()];
        for slot in (0..vals.len()).rev() {
            vals[slot] = idx % n;
            idx /= n;
        }
        vals
    }

    fn atoms(&mut self) -> Result<()> {
        let pool = self.en.pool.clone();
        // equalities, diagonal included (`x = x` is the canonical tautology)
        for a in &pool {
            for b in &pool {
                let table = self.atom_table(|vals, _ctx, pi| {
                    vals[pi[a.as_str()]] == vals[pi[b.as_str()]]
                });
                self.offer(Formula::eq(a.clone(), b.clone()), 1, table)?;
            }
        }
        let vocab = self.en.family[0].structure().vocabulary().clone();
        for (rel, arity) in vocab.symbols() {
            for word in words(&pool, arity) {
                let table = self.atom_table(|vals, ctx, pi| {
                    let tuple: Vec<usize> =
                        word.iter().map(|v| vals[pi[v.as_str()]]).collect();
                    ctx.structure()
                        .holds(rel, &tuple)
                        .expect("atom tuples stay within the domain")
                });
                self.offer(Formula::rel(rel, word.clone()), 1, table)?;
            }
        }
        Ok(())
    }

    fn atom_table(&self, pred: impl Fn(&[usize], &Context, &PoolIndex) -> bool) -> Vec<u64> {
        let pi: PoolIndex = self
            .en
            .pool
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        let mut table = vec![0u64; self.blocks()];
        for (m, ctx) in self.en.family.iter().enumerate() {
            let n = ctx.structure().domain_size();
            for local in 0..n.pow(self.en.pool.len() as u32) {
                let vals = self.decode(local, n);
                if pred(&vals, ctx, &pi) {
                    let p = self.en.offsets[m] + local;
                    table[p / 64] |= 1u64 << (p % 64);
                }
            }
        }
        table
    }

    fn negations(&mut self, s: usize) -> Result<()> {
        let tail = self.tail_mask();
        for i in self.en.by_size[s - 1].clone() {
            let mut table: Vec<u64> = self.en.entries[i].table.iter().map(|b| !b).collect();
            if let Some(last) = table.last_mut() {
                *last &= tail;
            }
            let formula = Formula::not(self.en.entries[i].formula.clone());
            self.offer(formula, s, table)?;
        }
        Ok(())
    }

    fn conjunctions(&mut self, s: usize) -> Result<()> {
        for u in 1..=s / 2 {
            let v = s - u;
            if self.en.by_size.len() <= v {
                continue;
            }
            for ai in self.en.by_size[u].clone() {
                for bi in self.en.by_size[v].clone() {
                    if u == v && bi < ai {
                        continue;
                    }
                    let table: Vec<u64> = self.en.entries[ai]
                        .table
                        .iter()
                        .zip(&self.en.entries[bi].table)
                        .map(|(x, y)| x & y)
                        .collect();
                    let formula = Formula::and(
                        self.en.entries[ai].formula.clone(),
                        self.en.entries[bi].formula.clone(),
                    );
                    self.offer(formula, s, table)?;
                }
            }
        }
        Ok(())
    }

    fn quantifications(&mut self, s: usize) -> Result<()> {
        let pool = self.en.pool.clone();
        let q_count = self.qset.iter().count();
        for qi in 0..q_count {
            let arities: Vec<usize> = self
                .qset
                .iter()
                .nth(qi)
                .unwrap()
                .qtype()
                .arities()
                .to_vec();
            for split in compositions(s - 1, arities.len()) {
                // the per-component choice space: (word, entry index)
                let mut per_component: Vec<Vec<(Vec<String>, usize)>> = Vec::new();
                let mut feasible = true;
                for (j, &arity) in arities.iter().enumerate() {
                    let entries = self
                        .en
                        .by_size
                        .get(split[j])
                        .cloned()
                        .unwrap_or_default();
                    if entries.is_empty() {
                        feasible = false;
                        break;
                    }
                    let mut choices = Vec::new();
                    for word in words(&pool, arity) {
                        for &e in &entries {
                            choices.push((word.clone(), e));
                        }
                    }
                    per_component.push(choices);
                }
                if !feasible {
                    continue;
                }
                let mut pick = vec![0usize; per_component.len()];
                loop {
                    let chosen: Vec<(Vec<String>, usize)> = pick
                        .iter()
                        .zip(&per_component)
                        .map(|(&i, c)| c[i].clone())
                        .collect();
                    self.apply_quantifier(qi, s, &chosen)?;
                    let mut j = 0;
                    loop {
                        if j == pick.len() {
                            for x in pick.iter_mut() {
                                *x = 0;
                            }
                            break;
                        }
                        pick[j] += 1;
                        if pick[j] < per_component[j].len() {
                            break;
                        }
                        pick[j] = 0;
                        j += 1;
                    }
                    if pick.iter().all(|&x| x == 0) {
                        break;
                    }
                }
            }
        }
        Ok(())
    }

    fn apply_quantifier(
        &mut self,
        qi: usize,
        s: usize,
        chosen: &[(Vec<String>, usize)],
    ) -> Result<()> {
        for (word, _) in chosen {
            self.ensure_words(word)?;
        }
        let q = self.qset.iter().nth(qi).unwrap().clone();
        let card_only = q.cardinality_only();
        let mut table = vec![0u64; self.blocks()];
        for m in 0..self.en.family.len() {
            let n = self.en.family[m].structure().domain_size();
            let locals = n.pow(self.en.pool.len() as u32);
            for local in 0..locals {
                let mut masks = Vec::with_capacity(chosen.len());
                for (word, entry) in chosen {
                    let wd = &self.words[&(m, word.clone())];
                    let child = &self.en.entries[*entry].table;
                    let mut mask = 0u64;
                    for (t, &target) in wd.targets[local].iter().enumerate() {
                        if child[target as usize / 64] & (1u64 << (target % 64)) != 0 {
                            mask |= 1u64 << t;
                        }
                    }
                    masks.push(mask);
                }
                let accepted = if card_only {
                    let counts: Vec<usize> =
                        masks.iter().map(|m| m.count_ones() as usize).collect();
                    q.accepts_counts(n, &counts)?
                } else {
                    let key = (qi, m, masks.clone());
                    match self.accept_memo.get(&key) {
                        Some(&b) => b,
                        None => {
                            let sets: Vec<BTreeSet<Vec<usize>>> = chosen
                                .iter()
                                .zip(&masks)
                                .map(|((word, _), &mask)| {
                                    let wd = &self.words[&(m, word.clone())];
                                    wd.tuples
                                        .iter()
                                        .enumerate()
                                        .filter(|(t, _)| mask & (1u64 << t) != 0)
                                        .map(|(_, tup)| tup.clone())
                                        .collect()
                                })
                                .collect();
                            let b = q_accepts(&q, n, &sets)?;
                            self.accept_memo.insert(key, b);
                            b
                        }
                    }
                };
                if accepted {
                    let p = self.en.offsets[m] + local;
                    table[p / 64] |= 1u64 << (p % 64);
                }
            }
        }
        let tuples: Result<Vec<VarTuple>> = chosen
            .iter()
            .map(|(w, _)| VarTuple::new(w.iter().cloned()))
            .collect();
        let components: Vec<Formula> = chosen
            .iter()
            .map(|(_, e)| self.en.entries[*e].formula.clone())
            .collect();
        let formula = Formula::quant(q.name(), tuples?, components)?;
        self.offer(formula, s, table)
    }

    /// Precomputes rebinding targets for a bound word in every family
    /// member.
    fn ensure_words(&mut self, word: &[String]) -> Result<()> {
        for m in 0..self.en.family.len() {
            let key = (m, word.to_vec());
            if self.words.contains_key(&key) {
                continue;
            }
            let ctx = &self.en.family[m];
            let n = ctx.structure().domain_size();
            let vt = VarTuple::new(word.iter().cloned())?;
            let tuples = tuples_respecting(n, &vt);
            if tuples.len() > 64 {
                return Err(Error::cap("max-tuple-universe", 64, tuples.len()));
            }
            let slots: Vec<usize> = word
                .iter()
                .map(|v| self.en.pool.iter().position(|p| p == v).unwrap())
                .collect();
            let locals = n.pow(self.en.pool.len() as u32);
            let mut targets = Vec::with_capacity(locals);
            for local in 0..locals {
                let base = self.decode(local, n);
                let mut row = Vec::with_capacity(tuples.len());
                for tuple in &tuples {
                    let mut vals = base.clone();
                    for (pos, &slot) in slots.iter().enumerate() {
                        vals[slot] = tuple[pos];
                    }
                    let mut idx = 0usize;
                    for &v in &vals {
                        idx = idx * n + v;
                    }
                    row.push((self.en.offsets[m] + idx) as u32);
                }
                targets.push(row);
            }
            self.words.insert(key, WordData { tuples, targets });
        }
        Ok(())
    }
}

/// All words of the given length over the pool, lexicographic.
fn words(pool: &[String], len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * pool.len());
        for w in &out {
            for v in pool {
                let mut w = w.clone();
                w.push(v.clone());
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Ordered splits of `total` into `k` positive parts.
fn compositions(total: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || total < k {
        return out;
    }
    if k == 1 {
        return vec![vec![total]];
    }
    for first in 1..=total - (k - 1) {
        for rest in compositions(total - first, k - 1) {
            let mut c = vec![first];
            c.extend(rest);
            out.push(c);
        }
    }
    out
}

type PoolIndex<'a> = HashMap<&'a str, usize>;
