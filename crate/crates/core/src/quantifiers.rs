//! Generalized quantifiers and the isomorphism-invariance checker.
//!
//! A quantifier of type `(n₁, .., n_k)` is an isomorphism-closed class of
//! structures `(D, P₁, .., P_k)` with `P_j ⊆ D^{n_j}`; acceptance asks
//! whether a concrete tuple of relations belongs to the class. Width-1
//! type-(1) quantifiers whose acceptance only depends on `|P|` and `|D|`
//! (the cardinality quantifiers: ∃, ∀, "exactly m", "most", ..) are the
//! common case and get a small expression language; the Härtig
//! equicardinality quantifier and a Hamiltonian-path quantifier cover the
//! width-2 and type-(2) corners. Arbitrary acceptance functions can be
//! plugged in via [`Quantifier::custom`] — including deliberately broken,
//! non-isomorphism-closed ones, which [`check_iso_invariance`] exists to
//! catch.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The type of a generalized quantifier: one positive arity per component.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuantifierType {
    arities: Vec<usize>,
}

impl QuantifierType {
    pub fn new(arities: Vec<usize>) -> Result<QuantifierType> {
        if arities.is_empty() {
            return Err(Error::InvalidQuantifier(
                "quantifier type must have at least one component".into(),
            ));
        }
        if arities.iter().any(|&a| a == 0) {
            return Err(Error::InvalidQuantifier(
                "component arities must be positive".into(),
            ));
        }
        Ok(QuantifierType { arities })
    }

    pub fn monadic() -> QuantifierType {
        QuantifierType { arities: vec![1] }
    }

    /// Number of components `k`.
    pub fn width(&self) -> usize {
        self.arities.len()
    }

    /// Arity `n_j` of component `j`.
    pub fn arity(&self, j: usize) -> usize {
        self.arities[j]
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }
}

impl fmt::Display for QuantifierType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({})",
            self.arities
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
    }
}

type CustomFn = dyn Fn(usize, &[BTreeSet<Vec<usize>>]) -> Result<bool> + Send + Sync;

#[derive(Clone)]
enum Kind {
    /// Width-1 type-(1); acceptance depends only on `(|P|, |D|)`.
    Cardinality(CardTest),
    /// `|P₁| = |P₂|`, type (1,1).
    Haertig,
    /// The binary relation contains a directed Hamiltonian path, type (2).
    HamPath,
    /// Arbitrary acceptance function.
    Custom(Arc<CustomFn>),
}

/// A generalized quantifier: a name, a type, and an acceptance test.
#[derive(Clone)]
pub struct Quantifier {
    name: String,
    qtype: QuantifierType,
    kind: Kind,
}

impl fmt::Debug for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Quantifier({} : {})", self.name, self.qtype)
    }
}

impl Quantifier {
    /// The built-in quantifiers by name: `exists`, `forall`, `most`,
    /// `exactly=m`, `atleast=m`, `atmost=m`, `haertig`, `ham`.
    pub fn builtin(name: &str) -> Result<Quantifier> {
        let card = |test: CardTest| Quantifier {
            name: name.to_string(),
            qtype: QuantifierType::monadic(),
            kind: Kind::Cardinality(test),
        };
        match name {
            "exists" => Ok(card(CardTest::AtLeast(1))),
            "forall" => Ok(card(CardTest::All)),
            "most" => Ok(card(CardTest::Most)),
            "haertig" => Ok(Quantifier {
                name: name.to_string(),
                qtype: QuantifierType::new(vec![1, 1])?,
                kind: Kind::Haertig,
            }),
            "ham" => Ok(Quantifier {
                name: name.to_string(),
                qtype: QuantifierType::new(vec![2])?,
                kind: Kind::HamPath,
            }),
            _ => {
                if let Some((head, count)) = name.split_once('=') {
                    let m: usize = count.parse().map_err(|_| {
                        Error::UnknownQuantifier(name.to_string())
                    })?;
                    match head {
                        "exactly" => return Ok(card(CardTest::Exactly(m))),
                        "atleast" => return Ok(card(CardTest::AtLeast(m))),
                        "atmost" => return Ok(card(CardTest::AtMost(m))),
                        _ => {}
                    }
                }
                Err(Error::UnknownQuantifier(name.to_string()))
            }
        }
    }

    /// A width-1 type-(1) quantifier defined by a cardinality predicate over
    /// the variables `size` and `domain`, e.g. `"size % 2 == 1"`.
    pub fn custom_monadic(name: impl Into<String>, predicate: &str) -> Result<Quantifier> {
        let expr = cardexpr::parse(predicate)?;
        Ok(Quantifier {
            name: name.into(),
            qtype: QuantifierType::monadic(),
            kind: Kind::Cardinality(CardTest::Expr(expr)),
        })
    }

    /// Escape hatch: a quantifier with an arbitrary acceptance function.
    /// Nothing enforces isomorphism closure here; run
    /// [`check_iso_invariance`] on anything built this way.
    pub fn custom(
        name: impl Into<String>,
        qtype: QuantifierType,
        accepts: Arc<CustomFn>,
    ) -> Quantifier {
        Quantifier {
            name: name.into(),
            qtype,
            kind: Kind::Custom(accepts),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn qtype(&self) -> &QuantifierType {
        &self.qtype
    }

    pub fn width(&self) -> usize {
        self.qtype.width()
    }

    /// True when acceptance is a function of the component cardinalities
    /// and the domain size alone. Such quantifiers admit much cheaper type
    /// refinement (subset sums instead of subset enumeration).
    pub fn cardinality_only(&self) -> bool {
        matches!(self.kind, Kind::Cardinality(_) | Kind::Haertig)
    }

    /// Acceptance from component cardinalities; only valid when
    /// [`Self::cardinality_only`] holds.
    pub fn accepts_counts(&self, domain_size: usize, counts: &[usize]) -> Result<bool> {
        match &self.kind {
            Kind::Cardinality(test) => {
                debug_assert_eq!(counts.len(), 1);
                test.eval(counts[0], domain_size)
            }
            Kind::Haertig => {
                debug_assert_eq!(counts.len(), 2);
                Ok(counts[0] == counts[1])
            }
            _ => Err(Error::InvalidQuantifier(format!(
                "`{}` is not a cardinality quantifier",
                self.name
            ))),
        }
    }
}

/// Does `(D, P₁, .., P_k) ∈ Q`? Validates the width, the arity of every
/// tuple, and that all elements lie in the domain.
pub fn q_accepts(q: &Quantifier, domain_size: usize, sets: &[BTreeSet<Vec<usize>>]) -> Result<bool> {
    if domain_size == 0 {
        return Err(Error::InvalidStructure("domain must be non-empty".into()));
    }
    if sets.len() != q.width() {
        return Err(Error::WidthMismatch {
            name: q.name.clone(),
            width: q.width(),
            got: sets.len(),
        });
    }
    for (j, set) in sets.iter().enumerate() {
        let arity = q.qtype.arity(j);
        for t in set {
            if t.len() != arity {
                return Err(Error::ArityMismatch {
                    name: q.name.clone(),
                    expected: arity,
                    got: t.len(),
                });
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
    }
    match &q.kind {
        Kind::Cardinality(test) => test.eval(sets[0].len(), domain_size),
        Kind::Haertig => Ok(sets[0].len() == sets[1].len()),
        Kind::HamPath => Ok(ham_path_exists(domain_size, &sets[0])),
        Kind::Custom(f) => f(domain_size, sets),
    }
}

/// Is there a directed path visiting every vertex exactly once? A
/// one-element domain has the trivial path, so it is accepted even with no
/// edges.
fn ham_path_exists(n: usize, edges: &BTreeSet<Vec<usize>>) -> bool {
    if n == 1 {
        return true;
    }
    let mut adj = vec![0u32; n];
    for e in edges {
        if e[0] != e[1] {
            adj[e[0]] |= 1 << e[1];
        }
    }
    // reachable[mask] = set of possible path endpoints after visiting mask
    let full = (1u32 << n) - 1;
    let mut endpoints = vec![0u32; 1 << n];
    for v in 0..n {
        endpoints[1 << v] = 1 << v;
    }
    for mask in 1..=full {
        let ends = endpoints[mask as usize];
        if ends == 0 {
            continue;
        }
        if mask == full {
            return true;
        }
        for v in 0..n {
            if ends & (1 << v) == 0 {
                continue;
            }
            let nexts = adj[v] & !mask;
            let mut rest = nexts;
            while rest != 0 {
                let w = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                endpoints[(mask | (1 << w)) as usize] |= 1 << w;
            }
        }
    }
    false
}

#[derive(Clone, Debug)]
enum CardTest {
    AtLeast(usize),
    AtMost(usize),
    Exactly(usize),
    /// `|P| = |D|` (universal quantification).
    All,
    /// Strict majority: `2·|P| > |D|`.
    Most,
    Expr(cardexpr::CardExpr),
}

impl CardTest {
    fn eval(&self, size: usize, domain: usize) -> Result<bool> {
        Ok(match self {
            CardTest::AtLeast(m) => size >= *m,
            CardTest::AtMost(m) => size <= *m,
            CardTest::Exactly(m) => size == *m,
            CardTest::All => size == domain,
            CardTest::Most => 2 * size > domain,
            CardTest::Expr(e) => return e.eval(size as i64, domain as i64),
        })
    }
}

/// The expression language for custom cardinality predicates.
///
/// Grammar: integer arithmetic over `size`, `domain`, and literals with
/// `+ - * / %`, comparisons `== != < <= > >=`, and boolean connectives
/// `&& || !` with parentheses. Division and modulo are Euclidean on
/// non-negative operands and error on zero divisors.
pub mod cardexpr {
    use crate::{Error, Result};

    #[derive(Debug, Clone, PartialEq, Eq)]
    pub enum Arith {
        Int(i64),
        Size,
        Domain,
        Add(Box<Arith>, Box<Arith>),
        Sub(Box<Arith>, Box<Arith>),
        Mul(Box<Arith>, Box<Arith>),
        Div(Box<Arith>, Box<Arith>),
        Mod(Box<Arith>, Box<Arith>),
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum CmpOp {
        Eq,
        Ne,
        Lt,
        Le,
        Gt,
        Ge,
    }

    #[derive(Debug, Clone, PartialEq, Eq)]
    pub enum CardExpr {
        Cmp(CmpOp, Arith, Arith),
        Not(Box<CardExpr>),
        And(Box<CardExpr>, Box<CardExpr>),
        Or(Box<CardExpr>, Box<CardExpr>),
    }

    fn overflow() -> Error {
        Error::Invalid("arithmetic overflow in cardinality predicate".into())
    }

    impl Arith {
        fn eval(&self, size: i64, domain: i64) -> Result<i64> {
            let bin = |a: &Arith, b: &Arith| -> Result<(i64, i64)> {
                Ok((a.eval(size, domain)?, b.eval(size, domain)?))
            };
            match self {
                Arith::Int(v) => Ok(*v),
                Arith::Size => Ok(size),
                Arith::Domain => Ok(domain),
                Arith::Add(a, b) => {
                    let (a, b) = bin(a, b)?;
                    a.checked_add(b).ok_or_else(overflow)
                }
                Arith::Sub(a, b) => {
                    let (a, b) = bin(a, b)?;
                    a.checked_sub(b).ok_or_else(overflow)
                }
                Arith::Mul(a, b) => {
                    let (a, b) = bin(a, b)?;
                    a.checked_mul(b).ok_or_else(overflow)
                }
                Arith::Div(a, b) => {
                    let (a, b) = bin(a, b)?;
                    if b == 0 {
                        return Err(Error::DivisionByZero);
                    }
                    Ok(a.div_euclid(b))
                }
                Arith::Mod(a, b) => {
                    let (a, b) = bin(a, b)?;
                    if b == 0 {
                        return Err(Error::DivisionByZero);
                    }
                    Ok(a.rem_euclid(b))
                }
            }
        }
    }

    impl CardExpr {
        pub fn eval(&self, size: i64, domain: i64) -> Result<bool> {
            match self {
                CardExpr::Cmp(op, a, b) => {
                    let a = a.eval(size, domain)?;
                    let b = b.eval(size, domain)?;
                    Ok(match op {
                        CmpOp::Eq => a == b,
                        CmpOp::Ne => a != b,
                        CmpOp::Lt => a < b,
                        CmpOp::Le => a <= b,
                        CmpOp::Gt => a > b,
                        CmpOp::Ge => a >= b,
                    })
                }
                CardExpr::Not(e) => Ok(!e.eval(size, domain)?),
                CardExpr::And(a, b) => Ok(a.eval(size, domain)? && b.eval(size, domain)?),
                CardExpr::Or(a, b) => Ok(a.eval(size, domain)? || b.eval(size, domain)?),
            }
        }
    }

    struct Parser<'a> {
        src: &'a [u8],
        pos: usize,
    }

    pub fn parse(src: &str) -> Result<CardExpr> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let e = p.bool_or()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    impl<'a> Parser<'a> {
        fn err(&self, msg: &str) -> Error {
            Error::Parse {
                line: 1,
                column: self.pos + 1,
                message: format!("{msg} (in cardinality predicate)"),
            }
        }

        fn skip_ws(&mut self) {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
        }

        fn eat(&mut self, token: &str) -> bool {
            self.skip_ws();
            if self.src[self.pos..].starts_with(token.as_bytes()) {
                self.pos += token.len();
                true
            } else {
                false
            }
        }

        fn bool_or(&mut self) -> Result<CardExpr> {
            let mut e = self.bool_and()?;
            while self.eat("||") {
                let rhs = self.bool_and()?;
                e = CardExpr::Or(Box::new(e), Box::new(rhs));
            }
            Ok(e)
        }

        fn bool_and(&mut self) -> Result<CardExpr> {
            let mut e = self.bool_not()?;
            while self.eat("&&") {
                let rhs = self.bool_not()?;
                e = CardExpr::And(Box::new(e), Box::new(rhs));
            }
            Ok(e)
        }

        fn bool_not(&mut self) -> Result<CardExpr> {
            self.skip_ws();
            if self.src.get(self.pos) == Some(&b'!') && self.src.get(self.pos + 1) != Some(&b'=') {
                self.pos += 1;
                return Ok(CardExpr::Not(Box::new(self.bool_not()?)));
            }
            // '(' may open a boolean group or the left arithmetic operand of
            // a comparison; try the boolean reading first and backtrack.
            if self.src.get(self.pos) == Some(&b'(') {
                let save = self.pos;
                self.pos += 1;
                if let Ok(inner) = self.bool_or() {
                    if self.eat(")") {
                        return Ok(inner);
                    }
                }
                self.pos = save;
            }
            self.comparison()
        }

        fn comparison(&mut self) -> Result<CardExpr> {
            let lhs = self.sum()?;
            self.skip_ws();
            let op = if self.eat("==") {
                CmpOp::Eq
            } else if self.eat("!=") {
                CmpOp::Ne
            } else if self.eat("<=") {
                CmpOp::Le
            } else if self.eat(">=") {
                CmpOp::Ge
            } else if self.eat("<") {
                CmpOp::Lt
            } else if self.eat(">") {
                CmpOp::Gt
            } else {
                return Err(self.err("expected a comparison operator"));
            };
            let rhs = self.sum()?;
            Ok(CardExpr::Cmp(op, lhs, rhs))
        }

        fn sum(&mut self) -> Result<Arith> {
            let mut e = self.product()?;
            loop {
                if self.eat("+") {
                    e = Arith::Add(Box::new(e), Box::new(self.product()?));
                } else if self.eat("-") {
                    e = Arith::Sub(Box::new(e), Box::new(self.product()?));
                } else {
                    return Ok(e);
                }
            }
        }

        fn product(&mut self) -> Result<Arith> {
            let mut e = self.atom()?;
            loop {
                if self.eat("*") {
                    e = Arith::Mul(Box::new(e), Box::new(self.atom()?));
                } else if self.eat("/") {
                    e = Arith::Div(Box::new(e), Box::new(self.atom()?));
                } else if self.eat("%") {
                    e = Arith::Mod(Box::new(e), Box::new(self.atom()?));
                } else {
                    return Ok(e);
                }
            }
        }

        fn atom(&mut self) -> Result<Arith> {
            self.skip_ws();
            if self.eat("(") {
                let e = self.sum()?;
                if !self.eat(")") {
                    return Err(self.err("expected `)`"));
                }
                return Ok(e);
            }
            if self.eat("size") {
                return Ok(Arith::Size);
            }
            if self.eat("domain") {
                return Ok(Arith::Domain);
            }
            let start = self.pos;
            while self
                .src
                .get(self.pos)
                .map_or(false, |c| c.is_ascii_digit())
            {
                self.pos += 1;
            }
            if self.pos == start {
                return Err(self.err("expected an integer, `size`, or `domain`"));
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let v: i64 = text
                .parse()
                .map_err(|_| self.err("integer literal out of range"))?;
            Ok(Arith::Int(v))
        }
    }
}

/// A named collection of quantifiers with unique names; the parameter `𝒬`
/// of the logic.
#[derive(Debug, Clone, Default)]
pub struct QuantifierSet {
    quantifiers: Vec<Quantifier>,
}

impl QuantifierSet {
    pub fn new(quantifiers: Vec<Quantifier>) -> Result<QuantifierSet> {
        let mut names = BTreeSet::new();
        for q in &quantifiers {
            if !names.insert(q.name().to_string()) {
                return Err(Error::InvalidQuantifier(format!(
                    "quantifier `{}` declared twice",
                    q.name()
                )));
            }
        }
        Ok(QuantifierSet { quantifiers })
    }

    /// Builds a set from built-in names.
    pub fn builtins<I, S>(names: I) -> Result<QuantifierSet>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        QuantifierSet::new(
            names
                .into_iter()
                .map(|n| Quantifier::builtin(n.as_ref()))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn get(&self, name: &str) -> Option<&Quantifier> {
        self.quantifiers.iter().find(|q| q.name() == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Quantifier> {
        self.quantifiers.iter()
    }

    pub fn len(&self) -> usize {
        self.quantifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quantifiers.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.quantifiers.iter().map(|q| q.name()).collect()
    }
}

/// Serde form of a quantifier file: built-in names or custom monadic
/// definitions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantifierFile {
    pub quantifiers: Vec<QuantifierSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuantifierSpec {
    Builtin(String),
    Custom {
        name: String,
        width: usize,
        #[serde(rename = "type")]
        qtype: Vec<usize>,
        cardinality_predicate: String,
    },
}

impl QuantifierFile {
    pub fn parse(json: &str) -> Result<QuantifierFile> {
        serde_json::from_str(json).map_err(|e| Error::InvalidQuantifier(e.to_string()))
    }

    pub fn build(&self) -> Result<QuantifierSet> {
        let mut qs = Vec::new();
        for spec in &self.quantifiers {
            match spec {
                QuantifierSpec::Builtin(name) => qs.push(Quantifier::builtin(name)?),
                QuantifierSpec::Custom {
                    name,
                    width,
                    qtype,
                    cardinality_predicate,
                } => {
                    if *width != qtype.len() {
                        return Err(Error::InvalidQuantifier(format!(
                            "`{name}`: width {width} does not match type of length {}",
                            qtype.len()
                        )));
                    }
                    if qtype != &[1] {
                        return Err(Error::InvalidQuantifier(format!(
                            "`{name}`: cardinality predicates only define width-1 type-(1) quantifiers"
                        )));
                    }
                    qs.push(Quantifier::custom_monadic(
                        name.clone(),
                        cardinality_predicate,
                    )?);
                }
            }
        }
        QuantifierSet::new(qs)
    }
}

/// One counterexample to isomorphism closure.
#[derive(Debug, Clone)]
pub struct IsoViolation {
    pub domain: usize,
    pub sets: Vec<BTreeSet<Vec<usize>>>,
    pub permutation: Vec<usize>,
    pub accepts_original: bool,
    pub accepts_image: bool,
}

/// Per-domain statistics from an invariance check.
#[derive(Debug, Clone)]
pub struct IsoDomainReport {
    pub domain: usize,
    pub cases: u64,
    pub exhaustive: bool,
}

/// Outcome of [`check_iso_invariance`].
#[derive(Debug, Clone)]
pub struct IsoReport {
    pub quantifier: String,
    pub domains: Vec<IsoDomainReport>,
    /// At most ten recorded counterexamples.
    pub violations: Vec<IsoViolation>,
}

impl IsoReport {
    pub fn invariant(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks isomorphism closure on all domains up to `max_domain`: acceptance
/// of `(D, P̄)` must equal acceptance of `(D, π(P̄))` for every permutation
/// π. Exhaustive while the number of `(P̄, π)` cases stays within an
/// internal budget (about 4 million), deterministic seeded sampling beyond
/// that.
pub fn check_iso_invariance(q: &Quantifier, max_domain: usize, seed: u64) -> Result<IsoReport> {
    const EXHAUSTIVE_BUDGET: u128 = 4_000_000;
    const SAMPLES: u64 = 20_000;

    let mut report = IsoReport {
        quantifier: q.name().to_string(),
        domains: Vec::new(),
        violations: Vec::new(),
    };
    for n in 1..=max_domain {
        let universes: Vec<Vec<Vec<usize>>> = q
            .qtype()
            .arities()
            .iter()
            .map(|&a| all_tuples(n, a))
            .collect();
        let mut perms = Vec::new();
        {
            let mut perm: Vec<usize> = (0..n).collect();
            loop {
                perms.push(perm.clone());
                if !crate::structures::next_permutation(&mut perm) {
                    break;
                }
            }
        }
        let set_count: u128 = universes
            .iter()
            .map(|u| 1u128 << u.len().min(120))
            .product();
        let total = set_count.saturating_mul(perms.len() as u128);
        let exhaustive = total <= EXHAUSTIVE_BUDGET;
        let mut cases = 0u64;
        if exhaustive {
            let sizes: Vec<usize> = universes.iter().map(|u| u.len()).collect();
            let mut masks = vec![0u128; universes.len()];
            'outer: loop {
                let sets: Vec<BTreeSet<Vec<usize>>> = masks
                    .iter()
                    .zip(&universes)
                    .map(|(&m, u)| decode_mask(m, u))
                    .collect();
                let accepts = q_accepts(q, n, &sets)?;
                for perm in &perms {
                    cases += 1;
                    check_case(q, n, &sets, perm, accepts, &mut report.violations)?;
                }
                // odometer over the component masks
                let mut j = 0;
                loop {
                    if j == masks.len() {
                        break 'outer;
                    }
                    masks[j] += 1;
                    if masks[j] < (1u128 << sizes[j]) {
                        break;
                    }
                    masks[j] = 0;
                    j += 1;
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9e3779b9));
            for _ in 0..SAMPLES {
                let sets: Vec<BTreeSet<Vec<usize>>> = universes
                    .iter()
                    .map(|u| {
                        u.iter()
                            .filter(|_| rng.gen_bool(0.5))
                            .cloned()
                            .collect::<BTreeSet<_>>()
                    })
                    .collect();
                let perm = &perms[rng.gen_range(0..perms.len())];
                let accepts = q_accepts(q, n, &sets)?;
                cases += 1;
                check_case(q, n, &sets, perm, accepts, &mut report.violations)?;
            }
        }
        report.domains.push(IsoDomainReport {
            domain: n,
            cases,
            exhaustive,
        });
    }
    Ok(report)
}

fn check_case(
    q: &Quantifier,
    n: usize,
    sets: &[BTreeSet<Vec<usize>>],
    perm: &[usize],
    accepts: bool,
    violations: &mut Vec<IsoViolation>,
) -> Result<()> {
    let mapped: Vec<BTreeSet<Vec<usize>>> = sets
        .iter()
        .map(|s| {
            s.iter()
                .map(|t| t.iter().map(|&e| perm[e]).collect())
                .collect()
        })
        .collect();
    let accepts_image = q_accepts(q, n, &mapped)?;
    if accepts != accepts_image && violations.len() < 10 {
        violations.push(IsoViolation {
            domain: n,
            sets: sets.to_vec(),
            permutation: perm.to_vec(),
            accepts_original: accepts,
            accepts_image,
        });
    }
    Ok(())
}

fn all_tuples(n: usize, arity: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..arity {
        let mut next = Vec::with_capacity(out.len() * n);
        for t in &out {
            for e in 0..n {
                let mut t = t.clone();
                t.push(e);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

fn decode_mask(mask: u128, universe: &[Vec<usize>]) -> BTreeSet<Vec<usize>> {
    universe
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1u128 << i) != 0)
        .map(|(_, t)| t.clone())
        .collect()
}
