//! Vocabularies, finite structures, variable assignments, and contexts.
//!
//! A structure interprets every relation symbol of its vocabulary over a
//! finite domain `{0, .., n-1}`. A context pairs a structure with a (partial)
//! assignment of variables to domain elements; contexts are the positions
//! that games and type partitions operate on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A finite relational vocabulary: relation names with positive arities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Vocabulary {
    arities: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(name, arity)` pairs. Names must be unique
    /// and arities positive.
    pub fn new<I, S>(symbols: I) -> Result<Vocabulary>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut arities = BTreeMap::new();
        for (name, arity) in symbols {
            let name = name.into();
            if arity == 0 {
                return Err(Error::InvalidVocabulary(format!(
                    "relation `{name}` must have arity at least 1"
                )));
            }
            if name.is_empty() {
                return Err(Error::InvalidVocabulary("empty relation name".into()));
            }
            if arities.insert(name.clone(), arity).is_some() {
                return Err(Error::InvalidVocabulary(format!(
                    "relation `{name}` declared twice"
                )));
            }
        }
        Ok(Vocabulary { arities })
    }

    pub fn empty() -> Vocabulary {
        Vocabulary {
            arities: BTreeMap::new(),
        }
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.arities.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.arities.contains_key(name)
    }

    /// Relation names with arities, in name order.
    pub fn symbols(&self) -> impl Iterator<Item = (&str, usize)> {
        self.arities.iter().map(|(n, a)| (n.as_str(), *a))
    }

    pub fn len(&self) -> usize {
        self.arities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arities.is_empty()
    }
}

static NEXT_STRUCTURE_ID: AtomicU64 = AtomicU64::new(0);

#[derive(Debug)]
struct StructureInner {
    id: u64,
    vocabulary: Vocabulary,
    domain_size: usize,
    relations: BTreeMap<String, BTreeSet<Vec<usize>>>,
    automorphisms: OnceLock<Vec<Vec<usize>>>,
}

/// A finite relational structure with domain `{0, .., domain_size - 1}`.
///
/// Structures are immutable and cheap to clone (shared behind an `Arc`).
/// Equality is *identity*: two separately constructed structures are never
/// equal, even with the same relations. This is what makes canonical context
/// keys sound — contexts over different structures never collide.
#[derive(Clone)]
pub struct Structure {
    inner: Arc<StructureInner>,
}

impl Structure {
    /// Builds a structure. Every relation name must belong to the
    /// vocabulary, tuples must match the declared arity and stay inside the
    /// domain; vocabulary symbols without an entry get the empty relation.
    pub fn new(
        vocabulary: Vocabulary,
        domain_size: usize,
        relations: BTreeMap<String, BTreeSet<Vec<usize>>>,
    ) -> Result<Structure> {
        if domain_size == 0 {
            return Err(Error::InvalidStructure(
                "domain must be non-empty".to_string(),
            ));
        }
        let mut full: BTreeMap<String, BTreeSet<Vec<usize>>> = BTreeMap::new();
        for (name, arity) in vocabulary.symbols() {
            full.insert(name.to_string(), BTreeSet::new());
            if let Some(tuples) = relations.get(name) {
                for t in tuples {
                    if t.len() != arity {
                        return Err(Error::InvalidStructure(format!(
                            "relation `{name}` has arity {arity}, got tuple of length {}",
                            t.len()
                        )));
                    }
                    for &e in t {
                        if e >= domain_size {
                            return Err(Error::ElementOutOfRange {
                                element: e,
                                domain: domain_size,
                            });
                        }
                    }
                }
                full.insert(name.to_string(), tuples.clone());
            }
        }
        for name in relations.keys() {
            if !vocabulary.contains(name) {
                return Err(Error::UnknownRelation(name.clone()));
            }
        }
        Ok(Structure {
            inner: Arc::new(StructureInner {
                id: NEXT_STRUCTURE_ID.fetch_add(1, Ordering::Relaxed),
                vocabulary,
                domain_size,
                relations: full,
                automorphisms: OnceLock::new(),
            }),
        })
    }

    /// Process-unique identity of this structure.
    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.inner.vocabulary
    }

    pub fn domain_size(&self) -> usize {
        self.inner.domain_size
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.inner.domain_size
    }

    pub fn relation(&self, name: &str) -> Result<&BTreeSet<Vec<usize>>> {
        self.inner
            .relations
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    /// Membership test `tuple ∈ R`.
    pub fn holds(&self, name: &str, tuple: &[usize]) -> Result<bool> {
        let arity = self
            .inner
            .vocabulary
            .arity(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))?;
        if tuple.len() != arity {
            return Err(Error::ArityMismatch {
                name: name.to_string(),
                expected: arity,
                got: tuple.len(),
            });
        }
        Ok(self.inner.relations[name].contains(tuple))
    }

    pub fn relations(&self) -> &BTreeMap<String, BTreeSet<Vec<usize>>> {
        &self.inner.relations
    }

    /// Structural comparison (domain, vocabulary, relations), ignoring
    /// identity. Mostly useful in tests and for workspace round-trips.
    pub fn same_presentation(&self, other: &Structure) -> bool {
        self.inner.domain_size == other.inner.domain_size
            && self.inner.vocabulary == other.inner.vocabulary
            && self.inner.relations == other.inner.relations
    }

    /// The automorphism group as permutations of the domain, identity first.
    ///
    /// Computed by filtering all permutations, so only sensible for small
    /// domains; above 8 elements only the identity is returned (callers use
    /// this for search-space reduction, where missing symmetries cost time
    /// but never correctness).
    pub(crate) fn automorphisms(&self) -> &[Vec<usize>] {
        self.inner.automorphisms.get_or_init(|| {
            let n = self.inner.domain_size;
            if n > 8 {
                return vec![(0..n).collect()];
            }
            let mut result = Vec::new();
            let mut perm: Vec<usize> = (0..n).collect();
            loop {
                if self.is_automorphism(&perm) {
                    result.push(perm.clone());
                }
                if !next_permutation(&mut perm) {
                    break;
                }
            }
            result
        })
    }

    fn is_automorphism(&self, perm: &[usize]) -> bool {
        self.inner.relations.values().all(|tuples| {
            tuples
                .iter()
                .all(|t| tuples.contains(&t.iter().map(|&e| perm[e]).collect::<Vec<_>>()))
        })
    }
}

pub(crate) fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

impl PartialEq for Structure {
    fn eq(&self, other: &Self) -> bool {
        self.inner.id == other.inner.id
    }
}

impl Eq for Structure {}

impl fmt::Debug for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Structure#{}(|A|={}, {:?})",
            self.inner.id, self.inner.domain_size, self.inner.relations
        )
    }
}

/// A partial map from variable names to domain elements.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Assignment {
    bindings: BTreeMap<String, usize>,
}

impl Assignment {
    pub fn empty() -> Assignment {
        Assignment::default()
    }

    pub fn new<I, S>(bindings: I) -> Assignment
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        Assignment {
            bindings: bindings.into_iter().map(|(v, e)| (v.into(), e)).collect(),
        }
    }

    pub fn get(&self, var: &str) -> Option<usize> {
        self.bindings.get(var).copied()
    }

    /// Variables bound by this assignment, in name order.
    pub fn domain(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(|s| s.as_str())
    }

    pub fn domain_set(&self) -> BTreeSet<String> {
        self.bindings.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.bindings.iter().map(|(v, e)| (v.as_str(), *e))
    }
}

/// A tuple of variables, possibly with repetitions, e.g. `(x, y, x)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarTuple {
    vars: Vec<String>,
}

impl VarTuple {
    pub fn new<I, S>(vars: I) -> Result<VarTuple>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let vars: Vec<String> = vars.into_iter().map(Into::into).collect();
        if vars.is_empty() {
            return Err(Error::EmptyVarTuple);
        }
        Ok(VarTuple { vars })
    }

    pub fn single(var: impl Into<String>) -> VarTuple {
        VarTuple {
            vars: vec![var.into()],
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Distinct variables in order of first occurrence.
    pub fn distinct(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for v in &self.vars {
            if !seen.contains(&v.as_str()) {
                seen.push(v.as_str());
            }
        }
        seen
    }

    pub fn var_set(&self) -> BTreeSet<String> {
        self.vars.iter().cloned().collect()
    }
}

impl fmt::Display for VarTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.vars.join(","))
    }
}

/// Does the element tuple respect the repetitions of the variable tuple?
/// `x̄(i) = x̄(j)` must imply `ā(i) = ā(j)`.
pub fn respects_repetitions(tuple: &[usize], vars: &VarTuple) -> Result<bool> {
    if tuple.len() != vars.len() {
        return Err(Error::TupleLengthMismatch {
            expected: vars.len(),
            got: tuple.len(),
        });
    }
    let mut first: BTreeMap<&str, usize> = BTreeMap::new();
    for (v, &e) in vars.vars().iter().zip(tuple) {
        match first.get(v.as_str()) {
            Some(&prev) if prev != e => return Ok(false),
            Some(_) => {}
            None => {
                first.insert(v, e);
            }
        }
    }
    Ok(true)
}

/// `f(ā/x̄)`: rebinds the variables of `x̄` to the elements of `ā`, keeping
/// all other bindings of `f`. The tuple must respect the repetitions of `x̄`.
pub fn extend_assignment(f: &Assignment, vars: &VarTuple, tuple: &[usize]) -> Result<Assignment> {
    if !respects_repetitions(tuple, vars)? {
        return Err(Error::RepetitionViolation);
    }
    let mut bindings = f.bindings.clone();
    for (v, &e) in vars.vars().iter().zip(tuple) {
        bindings.insert(v.clone(), e);
    }
    Ok(Assignment { bindings })
}

/// All repetition-respecting tuples over the domain `{0, .., n-1}`, in
/// lexicographic order. There are `n^d` of them for `d` distinct variables.
pub fn tuples_respecting(domain_size: usize, vars: &VarTuple) -> Vec<Vec<usize>> {
    let distinct = vars.distinct();
    let d = distinct.len();
    let mut out = Vec::with_capacity(domain_size.pow(d as u32));
    let mut choice = vec![0usize; d];
    loop {
        let value: BTreeMap<&str, usize> = distinct.iter().copied().zip(choice.iter().copied()).collect();
        out.push(vars.vars().iter().map(|v| value[v.as_str()]).collect());
        // odometer over the distinct-variable choices
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < domain_size {
                break;
            }
            choice[i] = 0;
        }
    }
}

/// A structure together with an assignment into its domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    structure: Structure,
    assignment: Assignment,
}

impl Context {
    pub fn new(structure: Structure, assignment: Assignment) -> Result<Context> {
        for (v, e) in assignment.iter() {
            if e >= structure.domain_size() {
                return Err(Error::InvalidStructure(format!(
                    "assignment binds `{v}` to {e}, outside the domain of size {}",
                    structure.domain_size()
                )));
            }
        }
        Ok(Context {
            structure,
            assignment,
        })
    }

    pub fn sentence(structure: Structure) -> Context {
        Context {
            structure,
            assignment: Assignment::empty(),
        }
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    /// The context with assignment `f(ā/x̄)`.
    pub fn extend(&self, vars: &VarTuple, tuple: &[usize]) -> Result<Context> {
        for &e in tuple {
            if e >= self.structure.domain_size() {
                return Err(Error::ElementOutOfRange {
                    element: e,
                    domain: self.structure.domain_size(),
                });
            }
        }
        Ok(Context {
            structure: self.structure.clone(),
            assignment: extend_assignment(&self.assignment, vars, tuple)?,
        })
    }

    /// The context with the assignment replaced wholesale (used by the
    /// game moves that restart from a fresh binding).
    pub fn with_assignment(&self, assignment: Assignment) -> Result<Context> {
        Context::new(self.structure.clone(), assignment)
    }

    /// A deterministic key identifying this context: structure identity plus
    /// the assignment. Contexts over different structures get distinct keys
    /// even when the assignments agree.
    pub fn canonical_key(&self) -> String {
        let mut key = format!("s{}", self.structure.id());
        for (v, e) in self.assignment.iter() {
            key.push('|');
            key.push_str(v);
            key.push('=');
            key.push_str(&e.to_string());
        }
        key
    }

    /// Canonical key after minimizing the assignment over the structure's
    /// automorphisms. Contexts in the same orbit are interchangeable in
    /// every game and every formula, so solvers key their memo tables on
    /// this.
    pub(crate) fn orbit_key(&self) -> String {
        let mut best: Option<Vec<usize>> = None;
        let values: Vec<usize> = self.assignment.iter().map(|(_, e)| e).collect();
        for perm in self.structure.automorphisms() {
            let mapped: Vec<usize> = values.iter().map(|&e| perm[e]).collect();
            if best.as_ref().map_or(true, |b| mapped < *b) {
                best = Some(mapped);
            }
        }
        let best = best.unwrap_or_default();
        let mut key = format!("s{}", self.structure.id());
        for ((v, _), e) in self.assignment.iter().zip(best) {
            key.push('|');
            key.push_str(v);
            key.push('=');
            key.push_str(&e.to_string());
        }
        key
    }
}

/// Fresh variable names `y0, y1, ..` (first-free numbering) that avoid every
/// name in `taken`.
pub fn fresh_names(taken: &BTreeSet<String>, count: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    let mut i = 0usize;
    while out.len() < count {
        let candidate = format!("y{i}");
        if !taken.contains(&candidate) {
            out.push(candidate);
        }
        i += 1;
    }
    out
}

/// Canonical variable tuples of the given arity over `existing` variables
/// plus fresh ones. Fresh names are introduced in first-occurrence order, so
/// tuples that differ only by renaming fresh variables appear once. This is
/// the move pool game solvers draw binding tuples from; it is exhaustive up
/// to the renaming of bound variables.
pub fn canonical_bound_tuples(existing: &BTreeSet<String>, arity: usize) -> Vec<VarTuple> {
    let fresh = fresh_names(existing, arity);
    let existing: Vec<&String> = existing.iter().collect();
    let mut out = Vec::new();
    let mut current: Vec<String> = Vec::with_capacity(arity);
    fn rec(
        existing: &[&String],
        fresh: &[String],
        arity: usize,
        used_fresh: usize,
        current: &mut Vec<String>,
        out: &mut Vec<VarTuple>,
    ) {
        if current.len() == arity {
            out.push(VarTuple::new(current.iter().cloned()).expect("non-empty"));
            return;
        }
        for v in existing {
            current.push((*v).clone());
            rec(existing, fresh, arity, used_fresh, current, out);
            current.pop();
        }
        // an already-introduced fresh variable may repeat
        for f in &fresh[..used_fresh] {
            current.push(f.clone());
            rec(existing, fresh, arity, used_fresh, current, out);
            current.pop();
        }
        // or the next fresh variable enters
        if used_fresh < fresh.len() {
            current.push(fresh[used_fresh].clone());
            rec(existing, fresh, arity, used_fresh + 1, current, out);
            current.pop();
        }
    }
    rec(&existing, &fresh, arity, 0, &mut current, &mut out);
    out
}

/// Serde form of a structure file: a shared vocabulary and named structures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureFile {
    pub vocabulary: BTreeMap<String, usize>,
    pub structures: BTreeMap<String, StructureEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureEntry {
    pub domain: usize,
    #[serde(default)]
    pub relations: BTreeMap<String, Vec<Vec<usize>>>,
}

impl StructureFile {
    pub fn parse(json: &str) -> Result<StructureFile> {
        serde_json::from_str(json).map_err(|e| Error::InvalidStructure(e.to_string()))
    }

    /// Materializes the named structures over the shared vocabulary.
    pub fn build(&self) -> Result<(Vocabulary, BTreeMap<String, Structure>)> {
        let vocabulary = Vocabulary::new(self.vocabulary.iter().map(|(n, &a)| (n.clone(), a)))?;
        let mut structures = BTreeMap::new();
        for (name, entry) in &self.structures {
            let relations: BTreeMap<String, BTreeSet<Vec<usize>>> = entry
                .relations
                .iter()
                .map(|(r, ts)| (r.clone(), ts.iter().cloned().collect()))
                .collect();
            let s = Structure::new(vocabulary.clone(), entry.domain, relations)
                .map_err(|e| Error::InvalidStructure(format!("structure `{name}`: {e}")))?;
            structures.insert(name.clone(), s);
        }
        Ok((vocabulary, structures))
    }

    /// The serde form of an existing structure (for workspace round-trips).
    pub fn entry_of(structure: &Structure) -> StructureEntry {
        StructureEntry {
            domain: structure.domain_size(),
            relations: structure
                .relations()
                .iter()
                .map(|(r, ts)| (r.clone(), ts.iter().cloned().collect()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::new([("B", 1), ("R", 1), ("E", 2)]).unwrap()
    }

    fn structure(domain: usize) -> Structure {
        Structure::new(vocab(), domain, BTreeMap::new()).unwrap()
    }

    #[test]
    fn vocabulary_rejects_bad_symbols() {
        assert!(Vocabulary::new([("B", 0)]).is_err());
        assert!(Vocabulary::new([("B", 1), ("B", 2)]).is_err());
    }

    #[test]
    fn structure_validates_tuples() {
        let mut rels = BTreeMap::new();
        rels.insert("B".to_string(), BTreeSet::from([vec![0], vec![5]]));
        assert!(matches!(
            Structure::new(vocab(), 3, rels),
            Err(Error::ElementOutOfRange { element: 5, .. })
        ));

        let mut rels = BTreeMap::new();
        rels.insert("E".to_string(), BTreeSet::from([vec![0]]));
        assert!(Structure::new(vocab(), 3, rels).is_err());

        let mut rels = BTreeMap::new();
        rels.insert("X".to_string(), BTreeSet::new());
        assert!(matches!(
            Structure::new(vocab(), 3, rels),
            Err(Error::UnknownRelation(_))
        ));

        assert!(Structure::new(vocab(), 0, BTreeMap::new()).is_err());
    }

    #[test]
    fn missing_relations_default_to_empty() {
        let s = structure(3);
        assert!(s.relation("B").unwrap().is_empty());
        assert!(!s.holds("E", &[0, 1]).unwrap());
    }

    #[test]
    fn repetition_check_matches_definition() {
        let xxy = VarTuple::new(["x", "x", "y"]).unwrap();
        assert!(respects_repetitions(&[1, 1, 2], &xxy).unwrap());
        assert!(!respects_repetitions(&[1, 2, 2], &xxy).unwrap());
        assert!(respects_repetitions(&[1, 1, 1], &xxy).unwrap());
        assert!(respects_repetitions(&[0, 0, 0], &xxy).unwrap());
        assert!(matches!(
            respects_repetitions(&[1, 1], &xxy),
            Err(Error::TupleLengthMismatch { .. })
        ));
    }

    #[test]
    fn tuples_respecting_counts_distinct_vars() {
        let xyx = VarTuple::new(["x", "y", "x"]).unwrap();
        let ts = tuples_respecting(3, &xyx);
        assert_eq!(ts.len(), 9); // 3^2: x and y are the distinct variables
        assert!(ts.iter().all(|t| t[0] == t[2]));
        assert_eq!(ts[0], vec![0, 0, 0]);
        // lexicographic order over the expanded tuples
        let mut sorted = ts.clone();
        sorted.sort();
        assert_eq!(ts, sorted);

        let x = VarTuple::single("x");
        assert_eq!(tuples_respecting(4, &x).len(), 4);
    }

    #[test]
    fn extend_overrides_previous_bindings() {
        let f = Assignment::new([("x", 0), ("z", 2)]);
        let xy = VarTuple::new(["x", "y"]).unwrap();
        let g = extend_assignment(&f, &xy, &[1, 3]).unwrap();
        assert_eq!(g.get("x"), Some(1));
        assert_eq!(g.get("y"), Some(3));
        assert_eq!(g.get("z"), Some(2));
        // the original is untouched
        assert_eq!(f.get("x"), Some(0));

        let xx = VarTuple::new(["x", "x"]).unwrap();
        assert!(matches!(
            extend_assignment(&f, &xx, &[1, 2]),
            Err(Error::RepetitionViolation)
        ));
    }

    #[test]
    fn canonical_keys_distinguish_structures() {
        let s1 = structure(3);
        let s2 = structure(3);
        let f = Assignment::new([("x", 1)]);
        let c1 = Context::new(s1, f.clone()).unwrap();
        let c2 = Context::new(s2, f).unwrap();
        assert_ne!(c1.canonical_key(), c2.canonical_key());
        assert_eq!(c1.canonical_key(), c1.clone().canonical_key());
    }

    #[test]
    fn context_rejects_out_of_domain_assignment() {
        let s = structure(2);
        assert!(Context::new(s, Assignment::new([("x", 5)])).is_err());
    }

    #[test]
    fn automorphisms_of_colored_domain() {
        // B = {0,1,2}, R = {} over four elements: Sym({0,1,2}) × Sym({3})
        let mut rels = BTreeMap::new();
        rels.insert("B".to_string(), BTreeSet::from([vec![0], vec![1], vec![2]]));
        let s = Structure::new(Vocabulary::new([("B", 1), ("R", 1)]).unwrap(), 4, rels).unwrap();
        assert_eq!(s.automorphisms().len(), 6);

        // orbit keys identify automorphic assignments
        let c0 = Context::new(s.clone(), Assignment::new([("x", 0)])).unwrap();
        let c2 = Context::new(s.clone(), Assignment::new([("x", 2)])).unwrap();
        let c3 = Context::new(s, Assignment::new([("x", 3)])).unwrap();
        assert_eq!(c0.orbit_key(), c2.orbit_key());
        assert_ne!(c0.orbit_key(), c3.orbit_key());
    }

    #[test]
    fn canonical_tuples_dedupe_fresh_renamings() {
        let existing = BTreeSet::from(["x".to_string()]);
        let tuples = canonical_bound_tuples(&existing, 2);
        // (x,x) (x,y0) (y0,x) (y0,y0) (y0,y1) — nothing mentioning y1 first
        assert_eq!(tuples.len(), 5);
        assert!(tuples.iter().any(|t| t.vars() == ["y0", "y1"]));
        assert!(!tuples.iter().any(|t| t.vars() == ["y1", "y0"]));

        let none = BTreeSet::new();
        assert_eq!(canonical_bound_tuples(&none, 1).len(), 1);
    }

    #[test]
    fn structure_file_round_trip() {
        let json = r#"{
            "vocabulary": {"B": 1, "R": 1},
            "structures": {"A": {"domain": 4, "relations": {"B": [[0],[1],[2]], "R": []}}}
        }"#;
        let file = StructureFile::parse(json).unwrap();
        let (vocabulary, structures) = file.build().unwrap();
        assert_eq!(vocabulary.arity("B"), Some(1));
        let a = &structures["A"];
        assert_eq!(a.domain_size(), 4);
        assert_eq!(a.relation("B").unwrap().len(), 3);
        assert!(a.relation("R").unwrap().is_empty());

        let entry = StructureFile::entry_of(a);
        assert_eq!(entry.domain, 4);
        assert_eq!(entry.relations["B"].len(), 3);
    }
}
