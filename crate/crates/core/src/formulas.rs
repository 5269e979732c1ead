//! Formulas of first-order logic with generalized quantifiers.
//!
//! The syntax has equalities and relation atoms, negation, conjunction, and
//! one quantifier rule `Q x̄₁..x̄_k (φ₁, .., φ_k)` per quantifier in scope.
//! Disjunction is notation: `a | b` is parsed and printed as such but stored
//! as `¬(¬a ∧ ¬b)`, and the default size function counts the desugared form.
//!
//! Semantics of the quantifier clause: `𝔄,f ⊨ Q x̄₁..x̄_k (φ̄)` iff
//! `(A, ‖φ₁‖, .., ‖φ_k‖) ∈ Q`, where `‖φ_j‖` is the extension of `φ_j` over
//! the repetition-respecting tuples for `x̄_j`.

use std::collections::BTreeSet;
use std::fmt;

use crate::quantifiers::{q_accepts, QuantifierSet};
use crate::structures::{tuples_respecting, Context, VarTuple, Vocabulary};
use crate::{Error, Result};

/// A formula; see the module docs for the intended reading.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    /// `x = y`
    Eq(String, String),
    /// `R(x₁, .., x_n)`
    Rel(String, Vec<String>),
    /// `¬φ`
    Not(Box<Formula>),
    /// `φ ∧ ψ`
    And(Box<Formula>, Box<Formula>),
    /// `Q x̄₁..x̄_k (φ₁, .., φ_k)`
    Quant {
        quantifier: String,
        tuples: Vec<VarTuple>,
        components: Vec<Formula>,
    },
}

/// How `size` treats the disjunction pattern `¬(¬a ∧ ¬b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizeMode {
    /// Count the stored connectives: the pattern costs `s(a) + s(b) + 3`.
    #[default]
    Desugared,
    /// Treat the pattern as a primitive `a ∨ b` of size `s(a) + s(b)`.
    OrPrimitive,
}

/// Size, depth, and free variables in one bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulaStats {
    pub size: u64,
    pub or_primitive_size: u64,
    pub depth: usize,
    pub free: BTreeSet<String>,
}

impl Formula {
    pub fn eq(a: impl Into<String>, b: impl Into<String>) -> Formula {
        Formula::Eq(a.into(), b.into())
    }

    pub fn rel<I, S>(name: impl Into<String>, vars: I) -> Formula
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Formula::Rel(name.into(), vars.into_iter().map(Into::into).collect())
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    /// `a ∨ b` in its official spelling `¬(¬a ∧ ¬b)`.
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::not(Formula::and(Formula::not(a), Formula::not(b)))
    }

    pub fn quant(
        quantifier: impl Into<String>,
        tuples: Vec<VarTuple>,
        components: Vec<Formula>,
    ) -> Result<Formula> {
        if tuples.is_empty() || tuples.len() != components.len() {
            return Err(Error::Invalid(format!(
                "quantifier needs as many variable tuples as components, got {} and {}",
                tuples.len(),
                components.len()
            )));
        }
        Ok(Formula::Quant {
            quantifier: quantifier.into(),
            tuples,
            components,
        })
    }

    /// Left-folded conjunction of a non-empty list.
    pub fn and_all(mut formulas: Vec<Formula>) -> Option<Formula> {
        let first = if formulas.is_empty() {
            return None;
        } else {
            formulas.remove(0)
        };
        Some(formulas.into_iter().fold(first, Formula::and))
    }

    /// Left-folded disjunction of a non-empty list.
    pub fn or_all(mut formulas: Vec<Formula>) -> Option<Formula> {
        let first = if formulas.is_empty() {
            return None;
        } else {
            formulas.remove(0)
        };
        Some(formulas.into_iter().fold(first, Formula::or))
    }

    /// Recognizes the disjunction pattern `¬(¬a ∧ ¬b)`.
    pub fn as_or(&self) -> Option<(&Formula, &Formula)> {
        if let Formula::Not(inner) = self {
            if let Formula::And(l, r) = inner.as_ref() {
                if let (Formula::Not(a), Formula::Not(b)) = (l.as_ref(), r.as_ref()) {
                    return Some((a, b));
                }
            }
        }
        None
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Formula::Eq(..) | Formula::Rel(..))
    }

    /// Formula size: atoms cost 1, negation 1 plus the operand, conjunction
    /// the sum of the operands, and a quantifier 1 plus the sum of its
    /// components.
    pub fn size(&self) -> u64 {
        self.size_with_mode(SizeMode::Desugared)
    }

    pub fn size_with_mode(&self, mode: SizeMode) -> u64 {
        if mode == SizeMode::OrPrimitive {
            if let Some((a, b)) = self.as_or() {
                return a.size_with_mode(mode) + b.size_with_mode(mode);
            }
        }
        match self {
            Formula::Eq(..) | Formula::Rel(..) => 1,
            Formula::Not(f) => f.size_with_mode(mode) + 1,
            Formula::And(a, b) => a.size_with_mode(mode) + b.size_with_mode(mode),
            Formula::Quant { components, .. } => {
                components.iter().map(|c| c.size_with_mode(mode)).sum::<u64>() + 1
            }
        }
    }

    /// Maximal nesting of quantifiers.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Eq(..) | Formula::Rel(..) => 0,
            Formula::Not(f) => f.depth(),
            Formula::And(a, b) => a.depth().max(b.depth()),
            Formula::Quant { components, .. } => {
                components.iter().map(|c| c.depth()).max().unwrap_or(0) + 1
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            Formula::Eq(a, b) => BTreeSet::from([a.clone(), b.clone()]),
            Formula::Rel(_, vars) => vars.iter().cloned().collect(),
            Formula::Not(f) => f.free_vars(),
            Formula::And(a, b) => {
                let mut s = a.free_vars();
                s.extend(b.free_vars());
                s
            }
            Formula::Quant {
                tuples, components, ..
            } => {
                let mut s = BTreeSet::new();
                for (t, c) in tuples.iter().zip(components) {
                    let bound = t.var_set();
                    s.extend(c.free_vars().into_iter().filter(|v| !bound.contains(v)));
                }
                s
            }
        }
    }

    pub fn stats(&self) -> FormulaStats {
        FormulaStats {
            size: self.size(),
            or_primitive_size: self.size_with_mode(SizeMode::OrPrimitive),
            depth: self.depth(),
            free: self.free_vars(),
        }
    }

    /// Checks relation names and arities against the vocabulary and
    /// quantifier names, widths, and tuple arities against the quantifier
    /// set. Evaluation re-checks incrementally; this gives whole-formula
    /// errors up front.
    pub fn validate(&self, vocabulary: &Vocabulary, qset: &QuantifierSet) -> Result<()> {
        match self {
            Formula::Eq(..) => Ok(()),
            Formula::Rel(name, vars) => {
                let arity = vocabulary
                    .arity(name)
                    .ok_or_else(|| Error::UnknownRelation(name.clone()))?;
                if vars.len() != arity {
                    return Err(Error::ArityMismatch {
                        name: name.clone(),
                        expected: arity,
                        got: vars.len(),
                    });
                }
                Ok(())
            }
            Formula::Not(f) => f.validate(vocabulary, qset),
            Formula::And(a, b) => {
                a.validate(vocabulary, qset)?;
                b.validate(vocabulary, qset)
            }
            Formula::Quant {
                quantifier,
                tuples,
                components,
            } => {
                let q = qset
                    .get(quantifier)
                    .ok_or_else(|| Error::UnknownQuantifier(quantifier.clone()))?;
                if tuples.len() != q.width() {
                    return Err(Error::WidthMismatch {
                        name: quantifier.clone(),
                        width: q.width(),
                        got: tuples.len(),
                    });
                }
                for (j, t) in tuples.iter().enumerate() {
                    if t.len() != q.qtype().arity(j) {
                        return Err(Error::ArityMismatch {
                            name: format!("{quantifier} component {}", j + 1),
                            expected: q.qtype().arity(j),
                            got: t.len(),
                        });
                    }
                }
                for c in components {
                    c.validate(vocabulary, qset)?;
                }
                Ok(())
            }
        }
    }

    /// `𝔄,f ⊨ φ`.
    pub fn eval(&self, ctx: &Context, qset: &QuantifierSet) -> Result<bool> {
        eval(self, ctx, qset)
    }

    /// Parses the concrete syntax; see [`parse`].
    pub fn parse(src: &str, vocabulary: &Vocabulary, qset: &QuantifierSet) -> Result<Formula> {
        parse(src, vocabulary, qset)
    }
}

/// Evaluates `φ` in a context. Unbound free variables, unknown symbols, and
/// width or arity mismatches surface as errors.
pub fn eval(f: &Formula, ctx: &Context, qset: &QuantifierSet) -> Result<bool> {
    match f {
        Formula::Eq(a, b) => {
            let va = ctx
                .assignment()
                .get(a)
                .ok_or_else(|| Error::UnboundVariable(a.clone()))?;
            let vb = ctx
                .assignment()
                .get(b)
                .ok_or_else(|| Error::UnboundVariable(b.clone()))?;
            Ok(va == vb)
        }
        Formula::Rel(name, vars) => {
            let mut tuple = Vec::with_capacity(vars.len());
            for v in vars {
                tuple.push(
                    ctx.assignment()
                        .get(v)
                        .ok_or_else(|| Error::UnboundVariable(v.clone()))?,
                );
            }
            ctx.structure().holds(name, &tuple)
        }
        Formula::Not(f) => Ok(!eval(f, ctx, qset)?),
        Formula::And(a, b) => Ok(eval(a, ctx, qset)? && eval(b, ctx, qset)?),
        Formula::Quant {
            quantifier,
            tuples,
            components,
        } => {
            let q = qset
                .get(quantifier)
                .ok_or_else(|| Error::UnknownQuantifier(quantifier.clone()))?;
            if tuples.len() != q.width() {
                return Err(Error::WidthMismatch {
                    name: quantifier.clone(),
                    width: q.width(),
                    got: tuples.len(),
                });
            }
            let mut exts = Vec::with_capacity(components.len());
            for (j, (t, c)) in tuples.iter().zip(components).enumerate() {
                if t.len() != q.qtype().arity(j) {
                    return Err(Error::ArityMismatch {
                        name: format!("{quantifier} component {}", j + 1),
                        expected: q.qtype().arity(j),
                        got: t.len(),
                    });
                }
                exts.push(extension(c, ctx, t, qset)?);
            }
            q_accepts(q, ctx.structure().domain_size(), &exts)
        }
    }
}

/// The extension `‖φ‖^{𝔄,f}_{x̄}`: the repetition-respecting tuples `ā` with
/// `𝔄, f(ā/x̄) ⊨ φ`.
pub fn extension(
    f: &Formula,
    ctx: &Context,
    vars: &VarTuple,
    qset: &QuantifierSet,
) -> Result<BTreeSet<Vec<usize>>> {
    let mut out = BTreeSet::new();
    for tuple in tuples_respecting(ctx.structure().domain_size(), vars) {
        if eval(f, &ctx.extend(vars, &tuple)?, qset)? {
            out.insert(tuple);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// concrete syntax
// ---------------------------------------------------------------------------

/// Parses the concrete syntax:
///
/// ```text
/// formula  :=  or
/// or       :=  and ('|' and)*
/// and      :=  unary ('&' unary)*
/// unary    :=  '!' unary  |  QNAME tuple+ '.' body  |  primary
/// tuple    :=  IDENT  |  '(' IDENT (',' IDENT)* ')'
/// body     :=  unary  |  '(' formula (',' formula)* ')'
/// primary  :=  '(' formula ')'  |  IDENT '(' IDENT (',' IDENT)* ')'  |  IDENT '=' IDENT
/// ```
///
/// Quantifier names are resolved against the quantifier set — including
/// names like `exactly=3`, which the lexer sees as three tokens. A name that
/// is both a quantifier and a relation reads as the quantifier. The
/// single-component body without parentheses is only available at width 1.
pub fn parse(src: &str, vocabulary: &Vocabulary, qset: &QuantifierSet) -> Result<Formula> {
    let tokens = lex(src)?;
    let mut p = Parser {
        src,
        tokens,
        pos: 0,
        vocabulary,
        qset,
    };
    let f = p.or_expr()?;
    if !p.at_end() {
        return Err(p.error_here("unexpected trailing input"));
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(String),
    LParen,
    RParen,
    Dot,
    Comma,
    Equal,
    Bang,
    Amp,
    Pipe,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    at: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'.' => Some(Tok::Dot),
            b',' => Some(Tok::Comma),
            b'=' => Some(Tok::Equal),
            b'!' => Some(Tok::Bang),
            b'&' => Some(Tok::Amp),
            b'|' => Some(Tok::Pipe),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, at: i });
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                at: start,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Int(src[start..i].to_string()),
                at: start,
            });
            continue;
        }
        return Err(position_error(
            src,
            i,
            format!("unexpected character `{}`", c as char),
        ));
    }
    Ok(out)
}

fn position_error(src: &str, at: usize, message: String) -> Error {
    let line = src[..at.min(src.len())].matches('\n').count() + 1;
    let column = at - src[..at.min(src.len())].rfind('\n').map_or(0, |p| p + 1) + 1;
    Error::Parse {
        line,
        column,
        message,
    }
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    vocabulary: &'a Vocabulary,
    qset: &'a QuantifierSet,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + offset).map(|t| &t.tok)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn error_here(&self, message: &str) -> Error {
        let at = self
            .tokens
            .get(self.pos)
            .map_or(self.src.len(), |t| t.at);
        position_error(self.src, at, message.to_string())
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error_here(&format!("expected {what}")))
        }
    }

    fn or_expr(&mut self) -> Result<Formula> {
        let mut f = self.and_expr()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.pos += 1;
            let rhs = self.and_expr()?;
            f = Formula::or(f, rhs);
        }
        Ok(f)
    }

    fn and_expr(&mut self) -> Result<Formula> {
        let mut f = self.unary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            let rhs = self.unary()?;
            f = Formula::and(f, rhs);
        }
        Ok(f)
    }

    /// If the upcoming tokens name a quantifier of the set, returns the name
    /// and how many tokens it spans.
    fn quantifier_ahead(&self) -> Option<(String, usize)> {
        let name = match self.peek()? {
            Tok::Ident(name) => name,
            _ => return None,
        };
        if let (Some(Tok::Equal), Some(Tok::Int(count))) = (self.peek_at(1), self.peek_at(2)) {
            let combined = format!("{name}={count}");
            if self.qset.get(&combined).is_some() {
                return Some((combined, 3));
            }
        }
        if self.qset.get(name).is_some() {
            return Some((name.clone(), 1));
        }
        None
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            _ => {
                if let Some((name, span)) = self.quantifier_ahead() {
                    self.pos += span;
                    self.quantifier_rest(name)
                } else {
                    self.primary()
                }
            }
        }
    }

    fn quantifier_rest(&mut self, name: String) -> Result<Formula> {
        let q = self.qset.get(&name).expect("checked by quantifier_ahead");
        let width = q.width();
        let arities: Vec<usize> = q.qtype().arities().to_vec();
        let mut tuples = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Ident(v)) => {
                    let v = v.clone();
                    self.pos += 1;
                    tuples.push(VarTuple::single(v));
                }
                Some(Tok::LParen) => {
                    self.pos += 1;
                    let mut vars = Vec::new();
                    loop {
                        match self.bump() {
                            Some(Tok::Ident(v)) => vars.push(v),
                            _ => {
                                self.pos -= 1;
                                return Err(self.error_here("expected a variable"));
                            }
                        }
                        match self.peek() {
                            Some(Tok::Comma) => {
                                self.pos += 1;
                            }
                            Some(Tok::RParen) => {
                                self.pos += 1;
                                break;
                            }
                            _ => return Err(self.error_here("expected `,` or `)` in a variable tuple")),
                        }
                    }
                    tuples.push(VarTuple::new(vars)?);
                }
                Some(Tok::Dot) => break,
                _ => return Err(self.error_here("expected a variable tuple or `.`")),
            }
            if self.peek() == Some(&Tok::Dot) {
                break;
            }
        }
        self.expect(Tok::Dot, "`.` after the quantifier's variable tuples")?;
        if tuples.len() != width {
            return Err(self.error_here(&format!(
                "quantifier `{name}` has width {width}, got {} variable tuple(s)",
                tuples.len()
            )));
        }
        for (j, t) in tuples.iter().enumerate() {
            if t.len() != arities[j] {
                return Err(self.error_here(&format!(
                    "component {} of `{name}` binds {} variable(s), got {}",
                    j + 1,
                    arities[j],
                    t.len()
                )));
            }
        }
        let components = self.quantifier_body(width, &name)?;
        Formula::quant(name, tuples, components)
    }

    fn quantifier_body(&mut self, width: usize, name: &str) -> Result<Vec<Formula>> {
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let mut components = vec![self.or_expr()?];
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                components.push(self.or_expr()?);
            }
            self.expect(Tok::RParen, "`)` closing the quantifier body")?;
            if components.len() != width {
                return Err(self.error_here(&format!(
                    "quantifier `{name}` has width {width}, got {} component(s)",
                    components.len()
                )));
            }
            Ok(components)
        } else if width == 1 {
            Ok(vec![self.unary()?])
        } else {
            Err(self.error_here(&format!(
                "quantifier `{name}` has width {width}; its body must be a parenthesized list"
            )))
        }
    }

    fn primary(&mut self) -> Result<Formula> {
        match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.or_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                match self.peek_at(1) {
                    Some(Tok::LParen) => {
                        // relation atom
                        let arity = self
                            .vocabulary
                            .arity(&name)
                            .ok_or_else(|| self.error_here(&format!("unknown relation `{name}`")))?;
                        self.pos += 2;
                        let mut vars = Vec::new();
                        loop {
                            match self.bump() {
                                Some(Tok::Ident(v)) => vars.push(v),
                                _ => {
                                    self.pos -= 1;
                                    return Err(self.error_here("expected a variable"));
                                }
                            }
                            match self.peek() {
                                Some(Tok::Comma) => {
                                    self.pos += 1;
                                }
                                Some(Tok::RParen) => {
                                    self.pos += 1;
                                    break;
                                }
                                _ => {
                                    return Err(
                                        self.error_here("expected `,` or `)` in a relation atom")
                                    )
                                }
                            }
                        }
                        if vars.len() != arity {
                            return Err(self.error_here(&format!(
                                "relation `{name}` has arity {arity}, got {} argument(s)",
                                vars.len()
                            )));
                        }
                        Ok(Formula::Rel(name, vars))
                    }
                    Some(Tok::Equal) => match self.peek_at(2) {
                        Some(Tok::Ident(rhs)) => {
                            let rhs = rhs.clone();
                            self.pos += 3;
                            Ok(Formula::Eq(name, rhs))
                        }
                        Some(Tok::Int(count)) => Err(self.error_here(&format!(
                            "unknown quantifier `{name}={count}` (and `=` must relate variables)"
                        ))),
                        _ => Err(self.error_here("expected a variable after `=`")),
                    },
                    _ => Err(self.error_here(&format!(
                        "`{name}` is not a quantifier here; expected an atom like `{name}(..)` or `{name} = ..`"
                    ))),
                }
            }
            _ => Err(self.error_here("expected a formula")),
        }
    }
}

// ---------------------------------------------------------------------------
// printing
// ---------------------------------------------------------------------------

impl fmt::Display for Formula {
    /// Canonical concrete syntax; `parse` of the output reproduces the AST,
    /// with the `¬(¬a ∧ ¬b)` pattern shown as `a | b`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print_prec(self, 1, f)
    }
}

/// Precedence levels: `|` is 1, `&` is 2, everything tighter is 3.
/// Quantified formulas get level 1 so they are parenthesized whenever they
/// sit under a connective.
fn prec(f: &Formula) -> u8 {
    if f.as_or().is_some() {
        return 1;
    }
    match f {
        Formula::And(..) => 2,
        Formula::Quant { .. } => 1,
        _ => 3,
    }
}

fn print_prec(f: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let level = prec(f);
    let parens = level < min;
    if parens {
        write!(out, "(")?;
    }
    if let Some((a, b)) = f.as_or() {
        print_prec(a, 1, out)?;
        write!(out, " | ")?;
        print_prec(b, 2, out)?;
    } else {
        match f {
            Formula::Eq(a, b) => write!(out, "{a} = {b}")?,
            Formula::Rel(name, vars) => write!(out, "{name}({})", vars.join(","))?,
            Formula::Not(inner) => {
                write!(out, "!")?;
                print_prec(inner, 3, out)?;
            }
            Formula::And(a, b) => {
                print_prec(a, 2, out)?;
                write!(out, " & ")?;
                print_prec(b, 3, out)?;
            }
            Formula::Quant {
                quantifier,
                tuples,
                components,
            } => {
                write!(out, "{quantifier} ")?;
                for t in tuples {
                    if tuples.len() == 1 && t.len() == 1 {
                        write!(out, "{}", t.vars()[0])?;
                    } else {
                        write!(out, "{t}")?;
                    }
                }
                write!(out, ". (")?;
                for (i, c) in components.iter().enumerate() {
                    if i > 0 {
                        write!(out, ", ")?;
                    }
                    print_prec(c, 1, out)?;
                }
                write!(out, ")")?;
            }
        }
    }
    if parens {
        write!(out, ")")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::{Assignment, Structure};
    use std::collections::BTreeMap;
    use std::collections::BTreeSet as Set;

    fn vocab() -> Vocabulary {
        Vocabulary::new([("B", 1), ("R", 1), ("P1", 1), ("P2", 1), ("P3", 1), ("E", 2)]).unwrap()
    }

    fn qset() -> QuantifierSet {
        QuantifierSet::builtins(["exists", "forall", "exactly=3", "haertig", "ham"]).unwrap()
    }

    fn p(src: &str) -> Formula {
        parse(src, &vocab(), &qset()).unwrap_or_else(|e| panic!("{src}: {e}"))
    }

    #[test]
    fn sizes_follow_the_recursion() {
        // s(a|b) = s(a) + s(b) + 3 under desugaring
        assert_eq!(p("P1(x) | P2(x) | P3(x)").size(), 9);
        assert_eq!(
            p("exactly=3 x. !(P1(x) | P2(x) | P3(x))").size(),
            11
        );
        assert_eq!(p("exactly=3 x. !P1(x)").size(), 3);
        assert_eq!(p("x = y").size(), 1);
        assert_eq!(p("B(x) & R(y)").size(), 2);

        // the primitive-∨ reading collapses the encoding overhead
        let or3 = p("P1(x) | P2(x) | P3(x)");
        assert_eq!(or3.size_with_mode(SizeMode::OrPrimitive), 3);
        let nested = p("exactly=3 x. !(P1(x) | P2(x) | P3(x))");
        assert_eq!(nested.size_with_mode(SizeMode::OrPrimitive), 5);
    }

    #[test]
    fn depth_counts_quantifier_nesting() {
        assert_eq!(p("B(x)").depth(), 0);
        assert_eq!(p("exists x. B(x)").depth(), 1);
        assert_eq!(p("exists x. exists y. E(x,y)").depth(), 2);
        assert_eq!(p("exists x. B(x) & exists y. exists z. E(y,z)").depth(), 2);
        assert_eq!(p("haertig (x)(y). (exists z. E(x,z), R(y))").depth(), 2);
    }

    #[test]
    fn free_vars_respect_binding() {
        assert_eq!(
            p("E(x,y)").free_vars(),
            Set::from(["x".to_string(), "y".to_string()])
        );
        assert_eq!(
            p("exists x. E(x,y)").free_vars(),
            Set::from(["y".to_string()])
        );
        assert!(p("exists x. B(x)").free_vars().is_empty());
        // each component only binds its own tuple
        assert_eq!(
            p("haertig (x)(y). (E(x,y), R(y))").free_vars(),
            Set::from(["y".to_string()])
        );
        assert!(p("ham (x,y). E(x,y)").free_vars().is_empty());
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = parse("B(x) &", &vocab(), &qset()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, column: 7, .. }), "{err:?}");
        let err = parse("Q(x)", &vocab(), &qset()).unwrap_err();
        assert!(err.to_string().contains("unknown relation"));
        let err = parse("exactly=5 x. B(x)", &vocab(), &qset()).unwrap_err();
        assert!(err.to_string().contains("exactly=5"));
        let err = parse("exists (x,y). E(x,y)", &vocab(), &qset()).unwrap_err();
        assert!(err.to_string().contains("binds 1 variable"));
        let err = parse("haertig x. B(x)", &vocab(), &qset()).unwrap_err();
        assert!(err.to_string().contains("width 2"));
        let err = parse("B(x) B(y)", &vocab(), &qset()).unwrap_err();
        assert!(err.to_string().contains("trailing"));
    }

    #[test]
    fn printing_round_trips() {
        for src in [
            "B(x)",
            "x = y",
            "!B(x)",
            "B(x) & R(y)",
            "B(x) | R(y)",
            "B(x) | R(y) | P1(z)",
            "B(x) & (R(y) | P1(z))",
            "!(B(x) & R(y))",
            "exists x. (B(x) | R(x))",
            "exactly=3 x. !P1(x)",
            "exists x. exists y. E(x,y)",
            "haertig (x)(y). (P1(x), P2(y))",
            "ham (x,y). E(x,y)",
            "forall x. (exists y. E(x,y) & B(x))",
        ] {
            let f = p(src);
            let printed = f.to_string();
            let reparsed = parse(&printed, &vocab(), &qset())
                .unwrap_or_else(|e| panic!("reparse `{printed}`: {e}"));
            assert_eq!(f, reparsed, "round trip failed for `{src}` -> `{printed}`");
        }
        // the or-pattern prints as `|`
        assert_eq!(p("B(x) | R(y)").to_string(), "B(x) | R(y)");
    }

    fn fig1() -> (Structure, Structure, Structure) {
        let vocab = Vocabulary::new([("B", 1), ("R", 1)]).unwrap();
        let s = |b: &[usize], r: &[usize]| {
            let mut rels = BTreeMap::new();
            rels.insert("B".to_string(), b.iter().map(|&e| vec![e]).collect());
            rels.insert("R".to_string(), r.iter().map(|&e| vec![e]).collect());
            Structure::new(vocab.clone(), 4, rels).unwrap()
        };
        (s(&[0, 1, 2], &[]), s(&[0, 1, 2], &[3]), s(&[0], &[1]))
    }

    #[test]
    fn exactly_three_separates_the_example_structures() {
        let (a, b1, b2) = fig1();
        let vocab = Vocabulary::new([("B", 1), ("R", 1)]).unwrap();
        let qset = QuantifierSet::builtins(["exactly=3"]).unwrap();
        let f = parse("exactly=3 x. (B(x) | R(x))", &vocab, &qset).unwrap();
        assert!(f.eval(&Context::sentence(a), &qset).unwrap());
        assert!(!f.eval(&Context::sentence(b1), &qset).unwrap());
        assert!(!f.eval(&Context::sentence(b2), &qset).unwrap());
    }

    #[test]
    fn quantifier_clause_matches_acceptance_of_extensions() {
        let (a, _, _) = fig1();
        let vocab = Vocabulary::new([("B", 1), ("R", 1)]).unwrap();
        let qset = QuantifierSet::builtins(["exists", "exactly=3"]).unwrap();
        let ctx = Context::sentence(a);
        let body = parse("B(x) | R(x)", &vocab, &qset).unwrap();
        let x = VarTuple::single("x");
        let ext = extension(&body, &ctx, &x, &qset).unwrap();
        assert_eq!(ext, Set::from([vec![0], vec![1], vec![2]]));
        let q = qset.get("exactly=3").unwrap();
        assert_eq!(
            q_accepts(q, 4, &[ext]).unwrap(),
            Formula::quant("exactly=3", vec![x], vec![body])
                .unwrap()
                .eval(&ctx, &qset)
                .unwrap()
        );
    }

    #[test]
    fn repeated_variables_restrict_extensions() {
        // E = {(0,0), (0,1)}: the diagonal component sees only (0,0)
        let vocab = Vocabulary::new([("E", 2)]).unwrap();
        let mut rels = BTreeMap::new();
        rels.insert("E".to_string(), Set::from([vec![0, 0], vec![0, 1]]));
        let s = Structure::new(vocab.clone(), 2, rels).unwrap();
        let qset = QuantifierSet::builtins(["ham"]).unwrap();
        let ctx = Context::sentence(s);
        let exy = parse("E(x,y)", &vocab, &qset).unwrap();
        let exx = parse("E(x,x)", &vocab, &qset).unwrap();
        let xx = VarTuple::new(["x", "x"]).unwrap();
        let xy = VarTuple::new(["x", "y"]).unwrap();
        // over (x,x) only the diagonal tuples are in play
        assert_eq!(
            extension(&exx, &ctx, &xx, &qset).unwrap(),
            Set::from([vec![0, 0]])
        );
        assert_eq!(extension(&exy, &ctx, &xy, &qset).unwrap().len(), 2);
    }

    #[test]
    fn eval_reports_unbound_variables() {
        let (a, _, _) = fig1();
        let qset = QuantifierSet::builtins(["exists"]).unwrap();
        let f = p("B(z)");
        let err = f
            .eval(&Context::sentence(a.clone()), &qset)
            .unwrap_err();
        assert!(matches!(err, Error::UnboundVariable(v) if v == "z"));
        let ctx = Context::new(a, Assignment::new([("z", 1)])).unwrap();
        assert!(f.eval(&ctx, &qset).unwrap());
    }

    #[test]
    fn validate_catches_shape_errors() {
        let f = Formula::rel("E", ["x"]);
        assert!(matches!(
            f.validate(&vocab(), &qset()),
            Err(Error::ArityMismatch { .. })
        ));
        let f = Formula::quant(
            "exists",
            vec![VarTuple::single("x"), VarTuple::single("y")],
            vec![Formula::rel("B", ["x"]), Formula::rel("B", ["y"])],
        )
        .unwrap();
        assert!(matches!(
            f.validate(&vocab(), &qset()),
            Err(Error::WidthMismatch { .. })
        ));
        let f = Formula::quant(
            "ham",
            vec![VarTuple::single("x")],
            vec![Formula::rel("B", ["x"])],
        )
        .unwrap();
        assert!(matches!(
            f.validate(&vocab(), &qset()),
            Err(Error::ArityMismatch { .. })
        ));
    }
}
