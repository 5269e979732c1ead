//! Joint depth-`d` type partitions of tuple universes.
//!
//! Given a family of contexts over one vocabulary whose assignments share a
//! domain, and a variable tuple `x̄`, the *universe* is the set of all pairs
//! of a context and a repetition-respecting tuple for `x̄`. Two members are
//! `d`-equivalent when they satisfy the same formulas of quantifier depth at
//! most `d` (free variables among the assignment domain and `x̄`); the
//! partition into equivalence classes is computed by refinement:
//!
//! * stratum 0 groups members by their atomic signature;
//! * stratum `d+1` splits a stratum-`d` cell when some quantifier `Q`,
//!   some canonical tuple of fresh variables per component, and some union
//!   of stratum-`d` cells of the extended universe produce different
//!   acceptance on the members' fibers.
//!
//! Unions of depth-`d` cells are exactly the extensions definable at depth
//! `d` (jointly across the family), which is what makes the refinement test
//! complete. For quantifiers whose acceptance only depends on component
//! cardinalities the union enumeration collapses to a subset-sum reachability
//! check, so no `2^cells` blow-up occurs; genuinely set-dependent quantifiers
//! enumerate unions and are guarded by the `max-type-cells` cap.
//!
//! Every cell carries a defining formula of depth at most `d` that evaluates
//! true exactly on the cell, in every member context; closed sets (unions of
//! cells) get disjunctions of these.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use crate::caps::Caps;
use crate::formulas::Formula;
use crate::quantifiers::{q_accepts, Quantifier, QuantifierSet};
use crate::structures::{tuples_respecting, Context, VarTuple};
use crate::{Error, Result};

/// A computed joint partition; see the module docs.
#[derive(Debug)]
pub struct TypePartition {
    engine: Engine,
    chain: Vec<String>,
    depth: usize,
    formula_cache: Mutex<HashMap<(Vec<String>, usize, usize), Formula>>,
}

impl TypePartition {
    pub fn contexts(&self) -> &[Context] {
        &self.engine.contexts
    }

    pub fn var_tuple(&self) -> &[String] {
        &self.chain
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Universe members as `(context index, tuple)` pairs, in enumeration
    /// order (contexts in order, tuples lexicographic).
    pub fn universe(&self) -> &[(usize, Vec<usize>)] {
        &self.engine.chains[&self.chain].universe
    }

    /// The cells, each a sorted list of universe member indices.
    pub fn cells(&self) -> &[Vec<usize>] {
        &self.engine.chains[&self.chain].strata[self.depth].cells
    }

    pub fn cell_count(&self) -> usize {
        self.cells().len()
    }

    /// Cell index of a universe member.
    pub fn cell_of(&self, member: usize) -> usize {
        self.engine.chains[&self.chain].strata[self.depth].member_cell[member]
    }

    pub fn member_index(&self, context: usize, tuple: &[usize]) -> Option<usize> {
        self.engine.chains[&self.chain]
            .member_index
            .get(&(context, tuple.to_vec()))
            .copied()
    }

    /// Cells of the partition at a shallower depth (the refinement history).
    pub fn cells_at_depth(&self, depth: usize) -> Option<&[Vec<usize>]> {
        self.engine.chains[&self.chain]
            .strata
            .get(depth)
            .map(|s| s.cells.as_slice())
    }

    /// A defining formula for the cell: depth at most `self.depth()`, free
    /// variables among the assignment domain and `x̄`, true exactly on the
    /// cell's members in every member context.
    pub fn type_formula(&self, cell: usize) -> Result<Formula> {
        if cell >= self.cell_count() {
            return Err(Error::Invalid(format!(
                "cell index {cell} out of range ({} cells)",
                self.cell_count()
            )));
        }
        self.engine
            .cell_formula(&self.chain, self.depth, cell, &self.formula_cache)
    }

    /// A formula defining the union of the given cells: the disjunction of
    /// their defining formulas; the empty union gets the canonical
    /// contradiction `¬(v = v)`.
    pub fn closed_set_formula(&self, cells: &BTreeSet<usize>) -> Result<Formula> {
        for &c in cells {
            if c >= self.cell_count() {
                return Err(Error::Invalid(format!(
                    "cell index {c} out of range ({} cells)",
                    self.cell_count()
                )));
            }
        }
        let mut formulas = Vec::new();
        for &c in cells {
            formulas.push(self.type_formula(c)?);
        }
        match Formula::or_all(formulas) {
            Some(f) => Ok(f),
            None => {
                let v = self
                    .engine
                    .chain_vars(&self.chain)
                    .into_iter()
                    .next()
                    .expect("public partitions have a non-empty variable tuple");
                Ok(Formula::not(Formula::eq(v.clone(), v)))
            }
        }
    }

    /// Same cells over the same universe? Useful to detect the refinement
    /// fixpoint between partitions of different requested depths.
    pub fn same_cells(&self, other: &TypePartition) -> bool {
        self.universe().len() == other.universe().len() && self.cells() == other.cells()
    }
}

/// Computes the joint depth-`d` partition of the `x̄`-universe of a context
/// family.
///
/// Requirements: at least one context, one shared vocabulary, assignments
/// sharing one variable domain, `depth` within `caps.max_rounds`, and
/// universes within `caps.max_family`.
pub fn joint_partition(
    contexts: &[Context],
    var_tuple: &VarTuple,
    depth: usize,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<TypePartition> {
    let chain: Vec<String> = var_tuple.vars().to_vec();
    let engine = Engine::build(contexts, &chain, depth, qset, caps)?;
    Ok(TypePartition {
        engine,
        chain,
        depth,
        formula_cache: Mutex::new(HashMap::new()),
    })
}

/// Do the two contexts satisfy the same sentences-with-parameters (free
/// variables among the shared assignment domain) of depth at most `d`?
pub fn d_equivalent(
    c1: &Context,
    c2: &Context,
    depth: usize,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<bool> {
    let engine = Engine::build(&[c1.clone(), c2.clone()], &[], depth, qset, caps)?;
    let stratum = &engine.chains[&Vec::<String>::new()].strata[depth];
    Ok(stratum.member_cell[0] == stratum.member_cell[1])
}

/// As [`d_equivalent`], but on inequivalence also extracts a separating
/// formula of depth at most `d`: true on `c1`, false on `c2`.
pub fn separating_formula(
    c1: &Context,
    c2: &Context,
    depth: usize,
    qset: &QuantifierSet,
    caps: &Caps,
) -> Result<Option<Formula>> {
    let engine = Engine::build(&[c1.clone(), c2.clone()], &[], depth, qset, caps)?;
    let chain: Vec<String> = Vec::new();
    let data = &engine.chains[&chain];
    // find the first depth where the two members part ways
    let mut split_depth = None;
    for t in 0..=depth {
        if data.strata[t].member_cell[0] != data.strata[t].member_cell[1] {
            split_depth = Some(t);
            break;
        }
    }
    let Some(t) = split_depth else {
        return Ok(None);
    };
    let cache = Mutex::new(HashMap::new());
    if t == 0 {
        // an atomic signature difference (only possible with a shared
        // assignment domain)
        for atom in &data.atoms {
            let on_c1 = atom.eval(&data.extended[0], engine.qset())?;
            let on_c2 = atom.eval(&data.extended[1], engine.qset())?;
            if on_c1 != on_c2 {
                return Ok(Some(if on_c1 { atom.clone() } else { Formula::not(atom.clone()) }));
            }
        }
        return Err(Error::Invalid(
            "stratum-0 split without a differing atom".into(),
        ));
    }
    let witness = engine
        .distinguish(&chain, t - 1, 0, 1)?
        .ok_or_else(|| Error::Invalid("split members yield no witness".into()))?;
    engine.witness_formula(&chain, t - 1, &witness, &cache)
}

// ---------------------------------------------------------------------------
// engine
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct Stratum {
    /// Sorted member lists; cells ordered by their smallest member.
    cells: Vec<Vec<usize>>,
    member_cell: Vec<usize>,
    /// For strata above 0: the index of the cell this one refines.
    parent_cell: Vec<usize>,
}

#[derive(Debug)]
struct ChainData {
    universe: Vec<(usize, Vec<usize>)>,
    member_index: HashMap<(usize, Vec<usize>), usize>,
    /// Context per member, with the chain variables bound.
    extended: Vec<Context>,
    /// Atomic formulas over the assignment domain plus the chain variables
    /// (equalities on distinct pairs and all relation atoms).
    atoms: Vec<Formula>,
    strata: Vec<Stratum>,
}

/// One quantifier application pattern during refinement: a quantifier and a
/// canonical fresh-variable tuple per component.
#[derive(Debug, Clone)]
struct Pattern {
    q_index: usize,
    /// Per component: the shape, i.e. the fresh-variable tuple (repetitions
    /// encode which positions coincide).
    shapes: Vec<Vec<String>>,
}

/// A concrete split witness: a pattern plus a union of depth-`d` cells per
/// component, with the acceptance the first member gets.
#[derive(Debug, Clone)]
struct Witness {
    pattern: Pattern,
    unions: Vec<BTreeSet<usize>>,
    accepts_first: bool,
}

#[derive(Debug)]
struct Engine {
    contexts: Vec<Context>,
    qset: QuantifierSet,
    caps: Caps,
    base_vars: BTreeSet<String>,
    chains: HashMap<Vec<String>, ChainData>,
}

impl Engine {
    fn qset(&self) -> &QuantifierSet {
        &self.qset
    }

    fn build(
        contexts: &[Context],
        chain: &[String],
        depth: usize,
        qset: &QuantifierSet,
        caps: &Caps,
    ) -> Result<Engine> {
        if contexts.is_empty() {
            return Err(Error::Invalid("need at least one context".into()));
        }
        let vocab = contexts[0].structure().vocabulary();
        let dom = contexts[0].assignment().domain_set();
        for c in contexts {
            if c.structure().vocabulary() != vocab {
                return Err(Error::VocabularyMismatch);
            }
            if c.assignment().domain_set() != dom {
                return Err(Error::AssignmentDomainMismatch);
            }
            caps.check_domain(c.structure().domain_size())?;
        }
        caps.check("max-rounds", caps.max_rounds, depth)?;
        let mut engine = Engine {
            contexts: contexts.to_vec(),
            qset: qset.clone(),
            caps: caps.clone(),
            base_vars: dom,
            chains: HashMap::new(),
        };
        engine.ensure(chain.to_vec(), depth)?;
        Ok(engine)
    }

    fn chain_vars(&self, chain: &[String]) -> Vec<String> {
        let mut vars: Vec<String> = self.base_vars.iter().cloned().collect();
        for v in chain {
            if !vars.contains(v) {
                vars.push(v.clone());
            }
        }
        vars.sort();
        vars
    }

    fn ensure(&mut self, chain: Vec<String>, depth: usize) -> Result<()> {
        if !self.chains.contains_key(&chain) {
            let data = self.new_chain(&chain)?;
            self.chains.insert(chain.clone(), data);
        }
        while self.chains[&chain].strata.len() <= depth {
            let d = self.chains[&chain].strata.len(); // building stratum d
            for pattern in self.patterns(&chain) {
                for shape in &pattern.shapes {
                    let mut sub = chain.clone();
                    sub.extend(shape.iter().cloned());
                    self.ensure(sub, d - 1)?;
                }
            }
            let stratum = self.refine(&chain, d)?;
            self.chains.get_mut(&chain).unwrap().strata.push(stratum);
        }
        Ok(())
    }

    fn new_chain(&self, chain: &[String]) -> Result<ChainData> {
        let chain_vt = if chain.is_empty() {
            None
        } else {
            Some(VarTuple::new(chain.iter().cloned())?)
        };
        let mut universe = Vec::new();
        let mut extended = Vec::new();
        for (i, ctx) in self.contexts.iter().enumerate() {
            match &chain_vt {
                None => {
                    universe.push((i, Vec::new()));
                    extended.push(ctx.clone());
                }
                Some(vt) => {
                    for t in tuples_respecting(ctx.structure().domain_size(), vt) {
                        extended.push(ctx.extend(vt, &t)?);
                        universe.push((i, t));
                    }
                }
            }
        }
        self.caps
            .check("max-family", self.caps.max_family, universe.len())?;
        let member_index = universe
            .iter()
            .enumerate()
            .map(|(idx, m)| (m.clone(), idx))
            .collect();

        // atomic signature formulas over the visible variables
        let vars = self.chain_vars(chain);
        let mut atoms = Vec::new();
        for (i, v) in vars.iter().enumerate() {
            for w in vars.iter().skip(i + 1) {
                atoms.push(Formula::eq(v.clone(), w.clone()));
            }
        }
        let vocab = self.contexts[0].structure().vocabulary().clone();
        for (rel, arity) in vocab.symbols() {
            for args in var_words(&vars, arity) {
                atoms.push(Formula::rel(rel, args));
            }
        }

        // stratum 0: group by atomic signature
        let mut signature_groups: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
        for (idx, ctx) in extended.iter().enumerate() {
            let sig = atoms
                .iter()
                .map(|a| a.eval(ctx, &self.qset))
                .collect::<Result<Vec<bool>>>()?;
            signature_groups.entry(sig).or_default().push(idx);
        }
        let mut cells: Vec<Vec<usize>> = signature_groups.into_values().collect();
        cells.sort_by_key(|members| members[0]);
        let mut member_cell = vec![0; universe.len()];
        for (c, members) in cells.iter().enumerate() {
            for &m in members {
                member_cell[m] = c;
            }
        }
        let parent_cell = (0..cells.len()).collect();
        Ok(ChainData {
            universe,
            member_index,
            extended,
            atoms,
            strata: vec![Stratum {
                cells,
                member_cell,
                parent_cell,
            }],
        })
    }

    /// All quantifier application patterns for refining this chain: every
    /// quantifier with every combination of canonical fresh-tuple shapes.
    /// Bound tuples never need to mention visible variables (renaming bound
    /// occurrences preserves meaning), so only the repetition pattern of the
    /// fresh tuple matters.
    fn patterns(&self, chain: &[String]) -> Vec<Pattern> {
        let mut taken = self.base_vars.clone();
        taken.extend(chain.iter().cloned());
        let mut out = Vec::new();
        for (q_index, q) in self.qset.iter().enumerate() {
            let per_component: Vec<Vec<Vec<String>>> = q
                .qtype()
                .arities()
                .iter()
                .map(|&a| shapes(&taken, a))
                .collect();
            let mut combo = vec![0usize; per_component.len()];
            loop {
                out.push(Pattern {
                    q_index,
                    shapes: combo
                        .iter()
                        .zip(&per_component)
                        .map(|(&i, list)| list[i].clone())
                        .collect(),
                });
                let mut j = 0;
                loop {
                    if j == combo.len() {
                        return_done(&mut combo);
                        break;
                    }
                    combo[j] += 1;
                    if combo[j] < per_component[j].len() {
                        break;
                    }
                    combo[j] = 0;
                    j += 1;
                }
                if combo.iter().all(|&c| c == 0) {
                    break;
                }
            }
        }
        out
    }

    /// Builds stratum `d` of `chain` from stratum `d-1` (sub-chains must
    /// already be computed to depth `d-1`).
    fn refine(&self, chain: &[String], d: usize) -> Result<Stratum> {
        let data = &self.chains[chain];
        let prev = &data.strata[d - 1];
        let patterns = self.patterns(chain);

        // Per-member signature over the set-dependent quantifiers (union
        // enumeration), and the list of cardinality patterns for the
        // pairwise subset-sum test.
        let mut mask_signatures: Vec<Vec<bool>> = vec![Vec::new(); data.universe.len()];
        let mut card_patterns = Vec::new();
        for pattern in &patterns {
            let q = self.qset.iter().nth(pattern.q_index).unwrap();
            if q.cardinality_only() {
                card_patterns.push(pattern.clone());
            } else {
                self.mask_signature_bits(chain, d - 1, pattern, q, &mut mask_signatures)?;
            }
        }

        let mut cells = Vec::new();
        let mut parent_cell = Vec::new();
        for (p, members) in prev.cells.iter().enumerate() {
            // split by the union-enumeration signature first
            let mut groups: Vec<(usize, Vec<usize>)> = Vec::new(); // (first member, members)
            {
                let mut by_sig: BTreeMap<&[bool], Vec<usize>> = BTreeMap::new();
                for &m in members {
                    by_sig.entry(&mask_signatures[m]).or_default().push(m);
                }
                for (_, g) in by_sig {
                    groups.push((g[0], g));
                }
                groups.sort_by_key(|(first, _)| *first);
            }
            // then split by the cardinality patterns, comparing against cell
            // representatives (the relation "no distinguishing union" is an
            // equivalence: it is equality of the acceptance functions)
            for (_, group) in groups {
                let mut sub_cells: Vec<Vec<usize>> = Vec::new();
                'members: for m in group {
                    for sc in sub_cells.iter_mut() {
                        if !self.card_distinguishes(chain, d - 1, &card_patterns, sc[0], m)? {
                            sc.push(m);
                            continue 'members;
                        }
                    }
                    sub_cells.push(vec![m]);
                }
                for sc in sub_cells {
                    cells.push(sc);
                    parent_cell.push(p);
                }
            }
        }
        let mut member_cell = vec![0; data.universe.len()];
        for (c, members) in cells.iter().enumerate() {
            for &m in members {
                member_cell[m] = c;
            }
        }
        Ok(Stratum {
            cells,
            member_cell,
            parent_cell,
        })
    }

    /// Suffix tuple list for a context and shape (the fiber index space).
    fn suffixes(&self, context: usize, shape: &[String]) -> Vec<Vec<usize>> {
        let vt = VarTuple::new(shape.iter().cloned()).expect("shapes are non-empty");
        tuples_respecting(self.contexts[context].structure().domain_size(), &vt)
    }

    /// Per-member fiber data for one pattern component: for each member of
    /// the chain universe, the count per sub-stratum cell and (for mask
    /// mode) the bitmask per cell over the suffix index space of
    /// [`Engine::suffixes`].
    fn fibers(
        &self,
        chain: &[String],
        d: usize,
        shape: &[String],
        masks: bool,
    ) -> Result<(Vec<Vec<usize>>, Vec<Vec<u64>>, usize)> {
        let data = &self.chains[chain];
        let mut sub = chain.to_vec();
        sub.extend(shape.iter().cloned());
        let sub_data = &self.chains[&sub];
        let sub_stratum = &sub_data.strata[d];
        let cell_count = sub_stratum.cells.len();

        let mut counts = vec![vec![0usize; cell_count]; data.universe.len()];
        let mut fiber_masks = if masks {
            vec![vec![0u64; cell_count]; data.universe.len()]
        } else {
            Vec::new()
        };
        let mut suffix_cache: HashMap<usize, Vec<Vec<usize>>> = HashMap::new();
        for (member, (ctx, prefix)) in data.universe.iter().enumerate() {
            let suffixes = suffix_cache
                .entry(*ctx)
                .or_insert_with(|| self.suffixes(*ctx, shape));
            if masks && suffixes.len() > 64 {
                // set-dependent quantifiers enumerate fiber subsets through
                // 64-bit masks
                return Err(Error::cap("max-tuple-universe", 64, suffixes.len()));
            }
            for (pos, suffix) in suffixes.iter().enumerate() {
                let mut full = prefix.clone();
                full.extend_from_slice(suffix);
                let idx = sub_data.member_index[&(*ctx, full)];
                let cell = sub_stratum.member_cell[idx];
                counts[member][cell] += 1;
                if masks {
                    fiber_masks[member][cell] |= 1u64 << pos;
                }
            }
        }
        Ok((counts, fiber_masks, cell_count))
    }

    /// Appends the union-enumeration signature bits of one set-dependent
    /// pattern to every member's signature.
    fn mask_signature_bits(
        &self,
        chain: &[String],
        d: usize,
        pattern: &Pattern,
        q: &Quantifier,
        signatures: &mut [Vec<bool>],
    ) -> Result<()> {
        let data = &self.chains[chain];
        let mut per_component = Vec::new();
        let mut total_cells = 0usize;
        for shape in &pattern.shapes {
            let (_, masks, cell_count) = self.fibers(chain, d, shape, true)?;
            total_cells += cell_count;
            per_component.push((shape.clone(), masks, cell_count));
        }
        self.caps
            .check("max-type-cells", self.caps.max_type_cells, total_cells)?;

        // suffix lists per (context, component), to decode masks into sets
        let contexts_used: BTreeSet<usize> = data.universe.iter().map(|(c, _)| *c).collect();
        let mut suffix_lists: HashMap<(usize, usize), Vec<Vec<usize>>> = HashMap::new();
        for &ctx in &contexts_used {
            for (j, (shape, _, _)) in per_component.iter().enumerate() {
                suffix_lists.insert((ctx, j), self.suffixes(ctx, shape));
            }
        }

        let mut acceptance_memo: HashMap<(usize, Vec<u64>), bool> = HashMap::new();
        let mut unions = vec![0u64; per_component.len()]; // cell subsets as bitmasks
        loop {
            for (m, (ctx, _)) in data.universe.iter().enumerate() {
                let mut union_masks = Vec::with_capacity(per_component.len());
                for (j, (_, masks, cell_count)) in per_component.iter().enumerate() {
                    let mut acc = 0u64;
                    for c in 0..*cell_count {
                        if unions[j] & (1u64 << c) != 0 {
                            acc |= masks[m][c];
                        }
                    }
                    union_masks.push(acc);
                }
                let key = (*ctx, union_masks.clone());
                let accepted = match acceptance_memo.get(&key) {
                    Some(&b) => b,
                    None => {
                        let sets: Vec<BTreeSet<Vec<usize>>> = union_masks
                            .iter()
                            .enumerate()
                            .map(|(j, &mask)| {
                                let list = &suffix_lists[&(*ctx, j)];
                                decode_mask(mask, list)
                            })
                            .collect();
                        let b = q_accepts(
                            q,
                            self.contexts[*ctx].structure().domain_size(),
                            &sets,
                        )?;
                        acceptance_memo.insert(key, b);
                        b
                    }
                };
                signatures[m].push(accepted);
            }
            // odometer over union combinations
            let mut j = 0;
            loop {
                if j == per_component.len() {
                    return Ok(());
                }
                unions[j] += 1;
                if unions[j] < (1u64 << per_component[j].2) {
                    break;
                }
                unions[j] = 0;
                j += 1;
            }
        }
    }

    /// Do the cardinality patterns distinguish members `a` and `b`: is there
    /// a pattern and a union per component whose fiber cardinalities get
    /// different acceptance on the two members?
    fn card_distinguishes(
        &self,
        chain: &[String],
        d: usize,
        patterns: &[Pattern],
        a: usize,
        b: usize,
    ) -> Result<bool> {
        Ok(self.card_witness(chain, d, patterns, a, b)?.is_some())
    }

    fn card_witness(
        &self,
        chain: &[String],
        d: usize,
        patterns: &[Pattern],
        a: usize,
        b: usize,
    ) -> Result<Option<Witness>> {
        let data = &self.chains[chain];
        let (ctx_a, _) = data.universe[a];
        let (ctx_b, _) = data.universe[b];
        let n_a = self.contexts[ctx_a].structure().domain_size();
        let n_b = self.contexts[ctx_b].structure().domain_size();
        for pattern in patterns {
            let q = self.qset.iter().nth(pattern.q_index).unwrap();
            // reachable (sum_a, sum_b) pairs per component, with the chosen
            // cell set for reconstruction
            let mut reachable: Vec<Vec<(usize, usize, BTreeSet<usize>)>> = Vec::new();
            for shape in &pattern.shapes {
                let (counts, _, cell_count) = self.fibers(chain, d, shape, false)?;
                let mut seen: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
                seen.insert((0, 0), BTreeSet::new());
                for c in 0..cell_count {
                    let step = (counts[a][c], counts[b][c]);
                    let mut additions = Vec::new();
                    for ((sa, sb), cells) in &seen {
                        let key = (sa + step.0, sb + step.1);
                        if !seen.contains_key(&key) {
                            let mut with = cells.clone();
                            with.insert(c);
                            additions.push((key, with));
                        }
                    }
                    for (key, cells) in additions {
                        seen.entry(key).or_insert(cells);
                    }
                }
                reachable.push(
                    seen.into_iter()
                        .map(|((sa, sb), cells)| (sa, sb, cells))
                        .collect(),
                );
            }
            // search the product of reachable sets for an acceptance split
            let mut pick = vec![0usize; reachable.len()];
            loop {
                let sums_a: Vec<usize> = pick
                    .iter()
                    .zip(&reachable)
                    .map(|(&i, r)| r[i].0)
                    .collect();
                let sums_b: Vec<usize> = pick
                    .iter()
                    .zip(&reachable)
                    .map(|(&i, r)| r[i].1)
                    .collect();
                let acc_a = q.accepts_counts(n_a, &sums_a)?;
                let acc_b = q.accepts_counts(n_b, &sums_b)?;
                if acc_a != acc_b {
                    return Ok(Some(Witness {
                        pattern: pattern.clone(),
                        unions: pick
                            .iter()
                            .zip(&reachable)
                            .map(|(&i, r)| r[i].2.clone())
                            .collect(),
                        accepts_first: acc_a,
                    }));
                }
                let mut j = 0;
                loop {
                    if j == pick.len() {
                        return_done(&mut pick);
                        break;
                    }
                    pick[j] += 1;
                    if pick[j] < reachable[j].len() {
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
        Ok(None)
    }

    /// A witness splitting members `a` and `b` at refinement step `d → d+1`
    /// (both directions tried: set-dependent patterns first, then
    /// cardinality patterns).
    fn distinguish(
        &self,
        chain: &[String],
        d: usize,
        a: usize,
        b: usize,
    ) -> Result<Option<Witness>> {
        let mut card_patterns = Vec::new();
        for pattern in self.patterns(chain) {
            let q = self.qset.iter().nth(pattern.q_index).unwrap();
            if q.cardinality_only() {
                card_patterns.push(pattern);
                continue;
            }
            if let Some(w) = self.mask_witness(chain, d, &pattern, q, a, b)? {
                return Ok(Some(w));
            }
        }
        self.card_witness(chain, d, &card_patterns, a, b)
    }

    fn mask_witness(
        &self,
        chain: &[String],
        d: usize,
        pattern: &Pattern,
        q: &Quantifier,
        a: usize,
        b: usize,
    ) -> Result<Option<Witness>> {
        let data = &self.chains[chain];
        let mut per_component = Vec::new();
        for shape in &pattern.shapes {
            let (_, masks, cell_count) = self.fibers(chain, d, shape, true)?;
            per_component.push((shape.clone(), masks, cell_count));
        }
        let mut unions = vec![0u64; per_component.len()];
        loop {
            let mut acceptance = [false, false];
            for (slot, &m) in [a, b].iter().enumerate() {
                let (ctx, _) = data.universe[m];
                let sets: Vec<BTreeSet<Vec<usize>>> = per_component
                    .iter()
                    .enumerate()
                    .map(|(j, (shape, masks, cell_count))| {
                        let mut acc = 0u64;
                        for c in 0..*cell_count {
                            if unions[j] & (1u64 << c) != 0 {
                                acc |= masks[m][c];
                            }
                        }
                        decode_mask(acc, &self.suffixes(ctx, shape))
                    })
                    .collect();
                acceptance[slot] =
                    q_accepts(q, self.contexts[ctx].structure().domain_size(), &sets)?;
            }
            if acceptance[0] != acceptance[1] {
                return Ok(Some(Witness {
                    pattern: pattern.clone(),
                    unions: unions
                        .iter()
                        .zip(&per_component)
                        .map(|(&u, (_, _, cell_count))| {
                            (0..*cell_count).filter(|c| u & (1u64 << c) != 0).collect()
                        })
                        .collect(),
                    accepts_first: acceptance[0],
                }));
            }
            let mut j = 0;
            loop {
                if j == per_component.len() {
                    return Ok(None);
                }
                unions[j] += 1;
                if unions[j] < (1u64 << per_component[j].2) {
                    break;
                }
                unions[j] = 0;
                j += 1;
            }
        }
    }

    /// The quantified formula named by a witness at refinement step
    /// `d → d+1`: `Q ȳ₁..ȳ_k (ψ₁, .., ψ_k)` with `ψ_j` the union formula of
    /// the chosen depth-`d` cells of the extended chain, negated when the
    /// first member rejects.
    fn witness_formula(
        &self,
        chain: &[String],
        d: usize,
        witness: &Witness,
        cache: &Mutex<HashMap<(Vec<String>, usize, usize), Formula>>,
    ) -> Result<Option<Formula>> {
        let mut components = Vec::new();
        let mut tuples = Vec::new();
        for (shape, union) in witness.pattern.shapes.iter().zip(&witness.unions) {
            let mut sub = chain.to_vec();
            sub.extend(shape.iter().cloned());
            let mut cell_formulas = Vec::new();
            for &c in union {
                cell_formulas.push(self.cell_formula(&sub, d, c, cache)?);
            }
            let psi = match Formula::or_all(cell_formulas) {
                Some(f) => f,
                None => {
                    let v = shape[0].clone();
                    Formula::not(Formula::eq(v.clone(), v))
                }
            };
            components.push(psi);
            tuples.push(VarTuple::new(shape.iter().cloned())?);
        }
        let q = self.qset.iter().nth(witness.pattern.q_index).unwrap();
        let theta = Formula::quant(q.name(), tuples, components)?;
        Ok(Some(if witness.accepts_first {
            theta
        } else {
            Formula::not(theta)
        }))
    }

    /// The defining formula of a cell: the stratum-0 atomic signature
    /// conjunction, strengthened at each refinement level by a witness
    /// against every sibling cell.
    fn cell_formula(
        &self,
        chain: &[String],
        depth: usize,
        cell: usize,
        cache: &Mutex<HashMap<(Vec<String>, usize, usize), Formula>>,
    ) -> Result<Formula> {
        let key = (chain.to_vec(), depth, cell);
        if let Some(f) = cache.lock().unwrap().get(&key) {
            return Ok(f.clone());
        }
        let data = &self.chains[chain];
        let stratum = &data.strata[depth];
        let formula = if depth == 0 {
            let rep = stratum.cells[cell][0];
            let ctx = &data.extended[rep];
            let mut literals = Vec::new();
            for atom in &data.atoms {
                if atom.eval(ctx, &self.qset)? {
                    literals.push(atom.clone());
                } else {
                    literals.push(Formula::not(atom.clone()));
                }
            }
            match Formula::and_all(literals) {
                Some(f) => f,
                None => {
                    // no atoms at all: the constant truth over some visible
                    // variable
                    let v = self
                        .chain_vars(chain)
                        .into_iter()
                        .next()
                        .ok_or_else(|| {
                            Error::Invalid(
                                "cell formulas need at least one visible variable".into(),
                            )
                        })?;
                    Formula::eq(v.clone(), v)
                }
            }
        } else {
            let parent = stratum.parent_cell[cell];
            let mut parts = vec![self.cell_formula(chain, depth - 1, parent, cache)?];
            let rep = stratum.cells[cell][0];
            for (sibling, members) in stratum.cells.iter().enumerate() {
                if sibling == cell || stratum.parent_cell[sibling] != parent {
                    continue;
                }
                let other = members[0];
                let witness = self
                    .distinguish(chain, depth - 1, rep, other)?
                    .ok_or_else(|| {
                        Error::Invalid("sibling cells admit no distinguishing witness".into())
                    })?;
                parts.push(
                    self.witness_formula(chain, depth - 1, &witness, cache)?
                        .expect("witness always yields a formula"),
                );
            }
            Formula::and_all(parts).expect("at least the parent formula")
        };
        cache.lock().unwrap().insert(key, formula.clone());
        Ok(formula)
    }
}

fn return_done(v: &mut [usize]) {
    for x in v.iter_mut() {
        *x = 0;
    }
}

fn decode_mask(mask: u64, universe: &[Vec<usize>]) -> BTreeSet<Vec<usize>> {
    universe
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1u64 << i) != 0)
        .map(|(_, t)| t.clone())
        .collect()
}

/// All words of the given length over the variable list (relation atom
/// argument tuples).
fn var_words(vars: &[String], len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * vars.len());
        for w in &out {
            for v in vars {
                let mut w = w.clone();
                w.push(v.clone());
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Canonical fresh tuples of the given arity: one per repetition pattern
/// (restricted-growth enumeration), named `y0, y1, ..` avoiding `taken`.
fn shapes(taken: &BTreeSet<String>, arity: usize) -> Vec<Vec<String>> {
    let names = crate::structures::fresh_names(taken, arity);
    let mut rgs = vec![vec![0usize]];
    for _ in 1..arity {
        let mut next = Vec::new();
        for w in &rgs {
            let max = *w.iter().max().unwrap();
            for b in 0..=max + 1 {
                let mut w = w.clone();
                w.push(b);
                next.push(w);
            }
        }
        rgs = next;
    }
    rgs.into_iter()
        .map(|w| w.into_iter().map(|b| names[b].clone()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::{Assignment, Structure, Vocabulary};
    use std::collections::BTreeMap;

    fn unary_structure(domain: usize, b: &[usize], r: &[usize]) -> Structure {
        let vocab = Vocabulary::new([("B", 1), ("R", 1)]).unwrap();
        let mut rels = BTreeMap::new();
        rels.insert("B".to_string(), b.iter().map(|&e| vec![e]).collect());
        rels.insert("R".to_string(), r.iter().map(|&e| vec![e]).collect());
        Structure::new(vocab, domain, rels).unwrap()
    }

    fn caps() -> Caps {
        Caps {
            max_family: 256,
            ..Caps::default()
        }
    }

    #[test]
    fn depth_zero_cells_are_atomic_types() {
        let s = unary_structure(4, &[0, 1, 2], &[]);
        let qset = QuantifierSet::builtins(["exactly=3"]).unwrap();
        let p = joint_partition(
            &[Context::sentence(s)],
            &VarTuple::single("x"),
            0,
            &qset,
            &caps(),
        )
        .unwrap();
        // elements 0,1,2 satisfy B and not R; element 3 satisfies neither
        assert_eq!(p.cell_count(), 2);
        assert_eq!(p.cells()[0], vec![0, 1, 2]);
        assert_eq!(p.cells()[1], vec![3]);

        for cell in 0..2 {
            let f = p.type_formula(cell).unwrap();
            assert_eq!(f.depth(), 0);
            for (m, (ci, tuple)) in p.universe().iter().enumerate() {
                let ctx = p.contexts()[*ci]
                    .extend(&VarTuple::single("x"), tuple)
                    .unwrap();
                assert_eq!(
                    f.eval(&ctx, &qset).unwrap(),
                    p.cell_of(m) == cell,
                    "cell {cell} formula wrong on member {m}"
                );
            }
        }
    }

    #[test]
    fn singleton_universe_gets_the_trivial_formula() {
        let vocab = Vocabulary::new([("E", 2)]).unwrap();
        let s = Structure::new(vocab, 1, BTreeMap::new()).unwrap();
        let qset = QuantifierSet::builtins(["exists"]).unwrap();
        let p = joint_partition(
            &[Context::sentence(s)],
            &VarTuple::single("x"),
            0,
            &qset,
            &caps(),
        )
        .unwrap();
        assert_eq!(p.cell_count(), 1);
        // E(x,x) is the only atom and it is false; the formula still defines
        // the cell exactly
        let f = p.type_formula(0).unwrap();
        assert_eq!(f.depth(), 0);

        // empty closed set: the canonical contradiction over x
        let empty = p.closed_set_formula(&BTreeSet::new()).unwrap();
        assert_eq!(empty, Formula::not(Formula::eq("x", "x")));
    }

    #[test]
    fn equivalence_matches_the_separating_quantifier() {
        // A: B={0,1,2}; B1: B={0,1,2}, R={3} — the sentence
        // exactly=3 x. (B(x) | R(x)) tells them apart at depth 1
        let a = Context::sentence(unary_structure(4, &[0, 1, 2], &[]));
        let b1 = Context::sentence(unary_structure(4, &[0, 1, 2], &[3]));
        let qset = QuantifierSet::builtins(["exactly=3"]).unwrap();
        assert!(d_equivalent(&a, &b1, 0, &qset, &caps()).unwrap());
        assert!(!d_equivalent(&a, &b1, 1, &qset, &caps()).unwrap());

        let sep = separating_formula(&a, &b1, 1, &qset, &caps())
            .unwrap()
            .expect("inequivalent at depth 1");
        assert!(sep.depth() <= 1);
        assert!(sep.eval(&a, &qset).unwrap());
        assert!(!sep.eval(&b1, &qset).unwrap());
        assert!(separating_formula(&a, &b1, 0, &qset, &caps())
            .unwrap()
            .is_none());
    }

    #[test]
    fn partitions_agree_with_assignment_parameters() {
        // with x bound, depth-0 equivalence is just the atomic type of x
        let s = unary_structure(3, &[0], &[]);
        let qset = QuantifierSet::builtins(["exists"]).unwrap();
        let c0 = Context::new(s.clone(), Assignment::new([("x", 0)])).unwrap();
        let c1 = Context::new(s.clone(), Assignment::new([("x", 1)])).unwrap();
        let c2 = Context::new(s, Assignment::new([("x", 2)])).unwrap();
        assert!(!d_equivalent(&c0, &c1, 0, &qset, &caps()).unwrap());
        assert!(d_equivalent(&c1, &c2, 0, &qset, &caps()).unwrap());
        let sep = separating_formula(&c0, &c1, 0, &qset, &caps())
            .unwrap()
            .unwrap();
        assert_eq!(sep.depth(), 0);
        assert!(sep.eval(&c0, &qset).unwrap());
        assert!(!sep.eval(&c1, &qset).unwrap());
    }

    #[test]
    fn haertig_refinement_uses_cardinalities() {
        // |B| = |R| in A (2,2), but not in B (2,1); only haertig can see it
        let a = Context::sentence(unary_structure(4, &[0, 1], &[2, 3]));
        let b = Context::sentence(unary_structure(4, &[0, 1], &[2]));
        let qset = QuantifierSet::builtins(["haertig"]).unwrap();
        assert!(d_equivalent(&a, &b, 0, &qset, &caps()).unwrap());
        assert!(!d_equivalent(&a, &b, 1, &qset, &caps()).unwrap());
        let sep = separating_formula(&a, &b, 1, &qset, &caps())
            .unwrap()
            .unwrap();
        assert!(sep.depth() <= 1);
        assert!(sep.eval(&a, &qset).unwrap());
        assert!(!sep.eval(&b, &qset).unwrap());
    }

    #[test]
    fn ham_refinement_sees_path_structure() {
        // 0 -> 1 -> 2 versus a star 0 -> 1, 0 -> 2: same edge count
        let vocab = Vocabulary::new([("E", 2)]).unwrap();
        let edges = |es: &[(usize, usize)]| {
            let mut rels = BTreeMap::new();
            rels.insert(
                "E".to_string(),
                es.iter().map(|&(x, y)| vec![x, y]).collect(),
            );
            Structure::new(vocab.clone(), 3, rels).unwrap()
        };
        let path = Context::sentence(edges(&[(0, 1), (1, 2)]));
        let star = Context::sentence(edges(&[(0, 1), (0, 2)]));
        let qset = QuantifierSet::builtins(["ham"]).unwrap();
        assert!(!d_equivalent(&path, &star, 1, &qset, &caps()).unwrap());
        let sep = separating_formula(&path, &star, 1, &qset, &caps())
            .unwrap()
            .unwrap();
        assert!(sep.depth() <= 1);
        assert!(sep.eval(&path, &qset).unwrap());
        assert!(!sep.eval(&star, &qset).unwrap());
    }

    #[test]
    fn refinement_reaches_a_fixpoint() {
        let a = unary_structure(3, &[0], &[1]);
        let qset = QuantifierSet::builtins(["exists", "forall"]).unwrap();
        let ctx = [Context::sentence(a)];
        let x = VarTuple::single("x");
        let p1 = joint_partition(&ctx, &x, 1, &qset, &caps()).unwrap();
        let p2 = joint_partition(&ctx, &x, 2, &qset, &caps()).unwrap();
        let p3 = joint_partition(&ctx, &x, 3, &qset, &caps()).unwrap();
        // three atomic types already split everything; deeper strata agree
        assert_eq!(p1.cell_count(), 3);
        assert!(p2.same_cells(&p1));
        assert!(p3.same_cells(&p2));
    }

    #[test]
    fn preconditions_are_checked() {
        let s = unary_structure(3, &[0], &[]);
        let qset = QuantifierSet::builtins(["exists"]).unwrap();
        let c_empty = Context::sentence(s.clone());
        let c_x = Context::new(s.clone(), Assignment::new([("x", 0)])).unwrap();
        assert!(matches!(
            d_equivalent(&c_empty, &c_x, 1, &qset, &caps()),
            Err(Error::AssignmentDomainMismatch)
        ));
        let other_vocab = Structure::new(
            Vocabulary::new([("P", 1)]).unwrap(),
            3,
            BTreeMap::new(),
        )
        .unwrap();
        assert!(matches!(
            d_equivalent(&c_empty, &Context::sentence(other_vocab), 1, &qset, &caps()),
            Err(Error::VocabularyMismatch)
        ));
        assert!(matches!(
            joint_partition(&[], &VarTuple::single("x"), 1, &qset, &caps()),
            Err(Error::Invalid(_))
        ));
    }
}
