//! Concrete syntax for programs (`.iasm`), states (`.state`) and
//! environment scenarios (`.env`).

mod lexer;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::history::{Query, QuerySlot};
use crate::runtime::scenario::{Directive, Scenario, Timing};
use crate::structures::{Element, Location, State};
use crate::syntax::{
    FuncSig, Guard, Head, NodeId, RawProgram, Rule, Span, SymbolKind, Template, TemplateSlot, Term, Vocabulary,
};

use lexer::{tokenize, Tok};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseError {
    pub file: String,
    pub span: Span,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(file: &str, src: &str, span: Span, message: String) -> Self {
        let upto = &src[..span.start.min(src.len())];
        let line = upto.matches('\n').count() + 1;
        let column = upto.len() - upto.rfind('\n').map_or(0, |p| p + 1) + 1;
        ParseError {
            file: file.to_string(),
            span,
            line,
            column,
            message,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: error: {}",
            self.file, self.line, self.column, self.message
        )
    }
}

impl std::error::Error for ParseError {}

const KEYWORDS: &[&str] = &[
    "rule",
    "static",
    "dynamic",
    "external",
    "relational",
    "template",
    "label",
    "issue",
    "fail",
    "skip",
    "if",
    "then",
    "else",
    "endif",
    "par",
    "endpar",
];

struct Parser<'s> {
    file: &'s str,
    src: &'s str,
    toks: Vec<(Tok, Span)>,
    pos: usize,
    next_id: NodeId,
    vocab: Vocabulary,
}

type PResult<T> = Result<T, ParseError>;

impl<'s> Parser<'s> {
    fn new(file: &'s str, src: &'s str) -> PResult<Self> {
        Ok(Parser {
            file,
            src,
            toks: tokenize(file, src)?,
            pos: 0,
            next_id: 0,
            vocab: Vocabulary::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, span: Span, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.file, self.src, span, msg.into())
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.error_at(self.span(), format!("expected {expected}, found {}", self.peek()))
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.at_keyword(kw) {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn name(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let span = self.bump().1;
                Ok((s, span))
            }
            _ => Err(self.unexpected("a name")),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        match *self.peek() {
            Tok::Int(i) => {
                self.bump();
                Ok(i)
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    fn fresh_id(&mut self) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn mk(&mut self, span: Span, head: Head, args: Vec<Term>) -> Term {
        Term {
            id: self.fresh_id(),
            span,
            head,
            args,
        }
    }

    fn copy(&mut self, t: &Term) -> Term {
        let mut c = t.clone();
        c.renumber(&mut self.next_id);
        c
    }

    // ---- programs ----

    fn program(mut self) -> PResult<RawProgram> {
        while !self.at_keyword("rule") {
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected("`rule`"));
            }
            self.decl()?;
        }
        self.expect_keyword("rule")?;
        let rule = self.rule()?;
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of input"));
        }
        Ok(RawProgram {
            name: self.file.to_string(),
            vocabulary: self.vocab,
            rule,
            source: self.src.to_string(),
        })
    }

    fn decl(&mut self) -> PResult<()> {
        let start = self.span();
        if self.eat_keyword("label") {
            let (name, _) = self.name()?;
            self.vocab.add_label(&name);
            return Ok(());
        }
        let kind = if self.eat_keyword("static") {
            SymbolKind::Static
        } else if self.eat_keyword("dynamic") {
            SymbolKind::Dynamic
        } else if self.eat_keyword("external") {
            SymbolKind::External
        } else {
            return Err(self.unexpected("a declaration or `rule`"));
        };
        let (name, _) = self.name()?;
        self.expect(Tok::Slash)?;
        let arity = usize::try_from(self.int()?).map_err(|_| self.error_at(self.prev_span(), "negative arity"))?;
        let relational = self.eat_keyword("relational");
        let template = if self.eat_keyword("template") {
            Some(self.template()?)
        } else {
            None
        };
        let span = start.join(self.prev_span());
        let result = match kind {
            SymbolKind::External => {
                if relational {
                    return Err(self.error_at(span, "external symbols cannot be relational"));
                }
                self.vocab.declare_external(&name, arity, template)
            }
            _ => {
                if template.is_some() {
                    return Err(self.error_at(span, "only external symbols have templates"));
                }
                if Vocabulary::is_builtin(&name)
                    && self.vocab.get(&name) != Some(&FuncSig::new(&name, arity, kind, relational))
                {
                    return Err(self.error_at(span, format!("`{name}` is a built-in symbol")));
                }
                self.vocab.declare_state(FuncSig::new(&name, arity, kind, relational))
            }
        };
        result.map_err(|e| self.error_at(span, e.message))
    }

    fn template(&mut self) -> PResult<Template> {
        self.expect(Tok::Lt)?;
        let mut slots = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Gt => {
                    self.bump();
                    break;
                }
                Tok::Placeholder(i) => {
                    self.bump();
                    slots.push(TemplateSlot::Placeholder(i));
                }
                Tok::Ident(s) => {
                    self.bump();
                    slots.push(TemplateSlot::Label(s));
                }
                _ => return Err(self.unexpected("a label, placeholder or `>`")),
            }
        }
        if slots.is_empty() {
            return Err(self.error_at(self.prev_span(), "empty template"));
        }
        Ok(Template { slots })
    }

    fn rule(&mut self) -> PResult<Rule> {
        let start = self.span();
        if self.eat_keyword("issue") {
            let term = self.term()?;
            return Ok(Rule::Issue {
                span: start.join(term.span),
                term,
            });
        }
        if self.eat_keyword("fail") {
            return Ok(Rule::Fail { span: start });
        }
        if self.eat_keyword("skip") {
            return Ok(Rule::Par {
                span: start,
                rules: Vec::new(),
            });
        }
        if self.eat_keyword("if") {
            let guard = self.guard()?;
            self.expect_keyword("then")?;
            let then_branch = self.rule()?;
            let else_branch = if self.eat_keyword("else") {
                self.rule()?
            } else {
                Rule::Par {
                    span: self.prev_span(),
                    rules: Vec::new(),
                }
            };
            let end = self.expect_keyword("endif")?;
            return Ok(Rule::Cond {
                span: start.join(end),
                guard,
                then_branch: Box::new(then_branch),
                else_branch: Box::new(else_branch),
            });
        }
        if self.eat_keyword("par") {
            let mut rules = Vec::new();
            while !self.at_keyword("endpar") {
                if *self.peek() == Tok::Eof {
                    return Err(self.unexpected("`endpar`"));
                }
                rules.push(self.rule()?);
            }
            let end = self.expect_keyword("endpar")?;
            return Ok(Rule::Par {
                span: start.join(end),
                rules,
            });
        }
        let (symbol, name_span) = self.name()?;
        let args = if *self.peek() == Tok::LParen {
            self.arg_list()?
        } else {
            Vec::new()
        };
        let sig = self
            .vocab
            .get(&symbol)
            .ok_or_else(|| self.error_at(name_span, format!("unknown symbol `{symbol}`")))?;
        if sig.arity != args.len() {
            return Err(self.error_at(
                name_span,
                format!("`{symbol}` expects {} arguments, got {}", sig.arity, args.len()),
            ));
        }
        self.expect(Tok::Assign)?;
        let value = self.term()?;
        Ok(Rule::Update {
            span: start.join(value.span),
            symbol,
            args,
            value,
        })
    }

    fn arg_list(&mut self) -> PResult<Vec<Term>> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.term()?);
            if self.eat(&Tok::Comma) {
                continue;
            }
            self.expect(Tok::RParen)?;
            return Ok(args);
        }
    }

    // ---- guards ----

    fn guard(&mut self) -> PResult<Guard> {
        let mut g = self.guard_and()?;
        while self.eat(&Tok::KOr) {
            let rhs = self.guard_and()?;
            g = Guard::Or(Box::new(g), Box::new(rhs));
        }
        Ok(g)
    }

    fn guard_and(&mut self) -> PResult<Guard> {
        let mut g = self.guard_not()?;
        while self.eat(&Tok::KAnd) {
            let rhs = self.guard_not()?;
            g = Guard::And(Box::new(g), Box::new(rhs));
        }
        Ok(g)
    }

    fn guard_not(&mut self) -> PResult<Guard> {
        if self.eat(&Tok::Bang) {
            return Ok(Guard::Not(Box::new(self.guard_not()?)));
        }
        self.guard_atom()
    }

    /// `term [timing-op term]`, or a parenthesized guard. A leading `(` is
    /// first tried as part of a term and re-read as a guard if that fails.
    fn guard_atom(&mut self) -> PResult<Guard> {
        let (pos, next_id) = (self.pos, self.next_id);
        let as_term = self.timing_or_term();
        if as_term.is_ok() || self.toks[pos].0 != Tok::LParen {
            return as_term;
        }
        let term_err = as_term.unwrap_err();
        let term_reach = self.pos;
        self.pos = pos;
        self.next_id = next_id;
        self.bump();
        let inner = self.guard().and_then(|g| self.expect(Tok::RParen).map(|_| g));
        match inner {
            Ok(g) => Ok(g),
            Err(e) if e.span.start >= self.toks[term_reach].1.start => Err(e),
            Err(_) => Err(term_err),
        }
    }

    fn timing_or_term(&mut self) -> PResult<Guard> {
        let s = self.term()?;
        let op = self.peek().clone();
        if !matches!(op, Tok::Precedes | Tok::Strictly | Tok::Simultaneous) {
            return Ok(Guard::Term(s));
        }
        self.bump();
        let t = self.term()?;
        let span = s.span.join(t.span);
        Ok(match op {
            Tok::Precedes => Guard::Timing {
                span,
                earlier: s,
                later: t,
            },
            // s << t  is  !(t <~ s)
            Tok::Strictly => Guard::Not(Box::new(Guard::Timing {
                span,
                earlier: t,
                later: s,
            })),
            // s ~ t  is  (s <~ t) /\ (t <~ s)
            _ => {
                let (s2, t2) = (self.copy(&s), self.copy(&t));
                Guard::And(
                    Box::new(Guard::Timing {
                        span,
                        earlier: s,
                        later: t,
                    }),
                    Box::new(Guard::Timing {
                        span,
                        earlier: t2,
                        later: s2,
                    }),
                )
            }
        })
    }

    // ---- terms ----

    fn term(&mut self) -> PResult<Term> {
        let mut t = self.term_and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.term_and()?;
            t = self.binary("|", t, rhs);
        }
        Ok(t)
    }

    fn term_and(&mut self) -> PResult<Term> {
        let mut t = self.term_cmp()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.term_cmp()?;
            t = self.binary("&", t, rhs);
        }
        Ok(t)
    }

    /// Comparison chains `a = b = c` mean `(a = b) & (b = c)`.
    fn term_cmp(&mut self) -> PResult<Term> {
        let first = self.term_add()?;
        let mut operands = vec![first];
        let mut ops = Vec::new();
        while matches!(self.peek(), Tok::Eq | Tok::Neq | Tok::Lt) {
            // `<` followed by a name and `=:` is a reply location, not less-than
            if *self.peek() == Tok::Lt && self.looks_like_reply_location() {
                break;
            }
            ops.push(self.bump().0);
            operands.push(self.term_add()?);
        }
        if ops.is_empty() {
            return Ok(operands.pop().expect("one operand"));
        }
        let mut result: Option<Term> = None;
        for (i, op) in ops.iter().enumerate() {
            let lhs = if i == 0 {
                operands[0].clone()
            } else {
                let t = operands[i].clone();
                self.copy(&t)
            };
            let rhs = operands[i + 1].clone();
            let cmp = match op {
                Tok::Eq => self.binary("=", lhs, rhs),
                Tok::Lt => self.binary("<", lhs, rhs),
                _ => {
                    let eq = self.binary("=", lhs, rhs);
                    let span = eq.span;
                    self.mk(span, Head::State("not".into()), vec![eq])
                }
            };
            result = Some(match result {
                None => cmp,
                Some(acc) => self.binary("&", acc, cmp),
            });
        }
        Ok(result.expect("at least one comparison"))
    }

    fn looks_like_reply_location(&self) -> bool {
        let mut k = 1;
        if !matches!(self.peek_at(k), Tok::Ident(_)) {
            return false;
        }
        k += 1;
        if *self.peek_at(k) == Tok::LParen {
            let mut depth = 0;
            loop {
                match self.peek_at(k) {
                    Tok::LParen => depth += 1,
                    Tok::RParen => {
                        depth -= 1;
                        if depth == 0 {
                            k += 1;
                            break;
                        }
                    }
                    Tok::Eof => return false,
                    _ => {}
                }
                k += 1;
            }
        }
        *self.peek_at(k) == Tok::RevAssign
    }

    fn term_add(&mut self) -> PResult<Term> {
        let mut t = self.primary()?;
        while *self.peek() == Tok::Plus {
            self.bump();
            let rhs = self.primary()?;
            t = self.binary("+", t, rhs);
        }
        Ok(t)
    }

    fn binary(&mut self, op: &str, lhs: Term, rhs: Term) -> Term {
        let span = lhs.span.join(rhs.span);
        self.mk(span, Head::State(op.to_string()), vec![lhs, rhs])
    }

    fn primary(&mut self) -> PResult<Term> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(self.mk(span, Head::Literal(Element::Int(i)), vec![]))
            }
            Tok::Atom(a) => {
                self.bump();
                Ok(self.mk(span, Head::Literal(Element::Atom(a)), vec![]))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Lt => {
                self.bump();
                let query = self.application()?;
                self.expect(Tok::RevAssign)?;
                let location = self.application()?;
                let end = self.expect(Tok::Gt)?;
                Ok(self.mk(span.join(end), Head::ReplyLocation, vec![query, location]))
            }
            Tok::Ident(_) => self.application(),
            _ => Err(self.unexpected("a term")),
        }
    }

    fn application(&mut self) -> PResult<Term> {
        let (name, name_span) = self.name()?;
        let args = if *self.peek() == Tok::LParen {
            self.arg_list()?
        } else {
            Vec::new()
        };
        let sig = self
            .vocab
            .get(&name)
            .ok_or_else(|| self.error_at(name_span, format!("unknown symbol `{name}`")))?;
        if sig.arity != args.len() {
            return Err(self.error_at(
                name_span,
                format!("`{name}` expects {} arguments, got {}", sig.arity, args.len()),
            ));
        }
        let head = if sig.is_external() {
            Head::External(name)
        } else {
            Head::State(name)
        };
        let span = name_span.join(self.prev_span());
        Ok(self.mk(span, head, args))
    }

    // ---- literals ----

    /// Integer, quoted atom, or `true`/`false`/`undef`. When `atoms` is
    /// given, bare names declared there are accepted as atoms too.
    fn literal(&mut self, atoms: Option<&BTreeSet<String>>) -> PResult<Element> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Element::Int(i))
            }
            Tok::Atom(a) => {
                self.bump();
                if atoms.is_some_and(|set| !set.contains(&a)) {
                    return Err(self.error_at(span, format!("unknown element `'{a}'`")));
                }
                Ok(Element::Atom(a))
            }
            Tok::Ident(s) => {
                self.bump();
                match s.as_str() {
                    "true" => Ok(Element::True),
                    "false" => Ok(Element::False),
                    "undef" => Ok(Element::Undef),
                    _ if atoms.is_some_and(|set| set.contains(&s)) => Ok(Element::Atom(s)),
                    _ => Err(self.error_at(span, format!("unknown element `{s}`"))),
                }
            }
            _ => Err(self.unexpected("a literal")),
        }
    }

    fn query_literal(&mut self) -> PResult<Query> {
        self.expect(Tok::Lt)?;
        let mut slots = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Gt => {
                    self.bump();
                    break;
                }
                Tok::Ident(s) if !matches!(s.as_str(), "true" | "false" | "undef") => {
                    self.bump();
                    slots.push(QuerySlot::Label(s));
                }
                Tok::Int(_) | Tok::Atom(_) | Tok::Ident(_) => {
                    slots.push(QuerySlot::Elem(self.literal(None)?));
                }
                _ => return Err(self.unexpected("a literal, label or `>`")),
            }
        }
        if slots.is_empty() {
            return Err(self.error_at(self.prev_span(), "empty query literal"));
        }
        Ok(Query::new(slots))
    }
}

/// Parses a program; reply-location nodes are kept for desugaring.
pub fn parse_program(file: &str, text: &str) -> Result<RawProgram, ParseError> {
    Parser::new(file, text)?.program()
}

/// Parses a `.state` file against the vocabulary of a program.
pub fn parse_state(file: &str, text: &str, vocab: Arc<Vocabulary>) -> Result<State, ParseError> {
    let mut p = Parser::new(file, text)?;
    let mut state = State::new(vocab);
    loop {
        if *p.peek() == Tok::Eof {
            return Ok(state);
        }
        if p.eat_keyword("atom") {
            while let Tok::Ident(name) = p.peek().clone() {
                if matches!(p.peek_at(1), Tok::LParen | Tok::Eq) || name == "atom" {
                    break;
                }
                if matches!(name.as_str(), "true" | "false" | "undef") {
                    return Err(p.error_at(p.span(), format!("`{name}` cannot be an atom")));
                }
                p.bump();
                state.add_atom(name);
            }
            continue;
        }
        let start = p.span();
        let (symbol, _) = p.name()?;
        let mut args = Vec::new();
        if p.eat(&Tok::LParen) && !p.eat(&Tok::RParen) {
            loop {
                args.push(p.literal(Some(state.atoms()))?);
                if p.eat(&Tok::Comma) {
                    continue;
                }
                p.expect(Tok::RParen)?;
                break;
            }
        }
        p.expect(Tok::Eq)?;
        let value = p.literal(Some(state.atoms()))?;
        let span = start.join(p.prev_span());
        state
            .set_initial(Location::new(symbol, args), value)
            .map_err(|e| p.error_at(span, e.to_string()))?;
    }
}

/// Parses a `.env` scenario. Directive order is preserved.
pub fn parse_scenario(file: &str, text: &str) -> Result<Scenario, ParseError> {
    let mut p = Parser::new(file, text)?;
    let mut directives: Vec<Directive> = Vec::new();
    while *p.peek() != Tok::Eof {
        let start = p.expect_keyword("when")?;
        let query = p.query_literal()?;
        p.expect_keyword("reply")?;
        let reply = p.literal(None)?;
        let timing = if p.eat_keyword("step") {
            let step = positive(&mut p, "step")?;
            p.expect_keyword("round")?;
            let round = positive(&mut p, "round")?;
            Timing::WithinStep { step, round }
        } else if p.eat_keyword("afterstep") {
            Timing::AfterStep(positive(&mut p, "afterstep")?)
        } else {
            return Err(p.unexpected("`step` or `afterstep`"));
        };
        let span = start.join(p.prev_span());
        let clash = directives.iter().any(|d| {
            d.query == query
                && match (d.timing, timing) {
                    (Timing::WithinStep { step: a, .. }, Timing::WithinStep { step: b, .. }) => a == b,
                    (Timing::AfterStep(_), Timing::AfterStep(_)) => true,
                    _ => false,
                }
        });
        if clash {
            return Err(p.error_at(span, format!("duplicate reply for {query}")));
        }
        directives.push(Directive {
            query,
            reply,
            timing,
            span,
        });
    }
    Ok(Scenario { directives })
}

fn positive(p: &mut Parser<'_>, what: &str) -> PResult<usize> {
    let span = p.span();
    let n = p.int()?;
    usize::try_from(n)
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| p.error_at(span, format!("{what} numbers start at 1")))
}

/// Parses a single literal such as `10`, `true` or `'a'`.
pub fn parse_literal(text: &str) -> Result<Element, ParseError> {
    let mut p = Parser::new("<literal>", text)?;
    let e = p.literal(None)?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of literal"));
    }
    Ok(e)
}

/// Parses a query literal such as `<q 0>`.
pub fn parse_query(text: &str) -> Result<Query, ParseError> {
    let mut p = Parser::new("<query>", text)?;
    let q = p.query_literal()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of query"));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{desugar_reply_locations, Printer};

    const DECLS: &str = "external a/0 external b/0 dynamic x/0 ";

    fn rule_of(src: &str) -> Rule {
        parse_program("t", src).unwrap().rule
    }

    fn app(name: &str) -> String {
        name.to_string()
    }

    #[test]
    fn strict_precedence_sugar() {
        let r = rule_of(&format!("{DECLS} rule if a << b then x := 1 else x := 2 endif"));
        let Rule::Cond {
            guard,
            then_branch,
            else_branch,
            ..
        } = r
        else {
            panic!()
        };
        let Guard::Not(inner) = guard else {
            panic!("expected negation")
        };
        let Guard::Timing { earlier, later, .. } = *inner else {
            panic!()
        };
        assert_eq!(earlier.symbol(), Some(app("b").as_str()));
        assert_eq!(later.symbol(), Some("a"));
        assert!(matches!(*then_branch, Rule::Update { ref symbol, .. } if symbol == "x"));
        assert!(matches!(*else_branch, Rule::Update { .. }));
    }

    #[test]
    fn empty_par_and_skip() {
        assert!(matches!(rule_of("rule par endpar"), Rule::Par { rules, .. } if rules.is_empty()));
        assert!(matches!(rule_of("rule skip"), Rule::Par { rules, .. } if rules.is_empty()));
    }

    #[test]
    fn missing_else_is_skip() {
        let r = rule_of(&format!("{DECLS} rule if a = b then x := 1 endif"));
        let Rule::Cond { else_branch, .. } = r else { panic!() };
        assert!(matches!(*else_branch, Rule::Par { rules, .. } if rules.is_empty()));
    }

    #[test]
    fn issue_rule() {
        let r = rule_of("external a/0 rule issue a");
        let Rule::Issue { term, .. } = r else { panic!() };
        assert_eq!(term.head, Head::External("a".into()));
    }

    #[test]
    fn simultaneity_has_fresh_ids() {
        let r = rule_of(&format!("{DECLS} rule if a ~ b then x := 1 endif"));
        let mut ids = Vec::new();
        r.for_each_term(&mut |t| t.walk(&mut |s| ids.push(s.id)));
        let n = ids.len();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), n);
        assert_eq!(n, 5);
    }

    #[test]
    fn equality_chain() {
        let r = rule_of("dynamic s0/0 dynamic s1/0 dynamic x/0 rule if s0 = s1 = false then x := 1 endif");
        let Rule::Cond {
            guard: Guard::Term(t), ..
        } = r
        else {
            panic!()
        };
        assert_eq!(t.head, Head::State("&".into()));
        assert_eq!(t.args[0].head, Head::State("=".into()));
        assert_eq!(t.args[1].args[1].head, Head::State("false".into()));
    }

    #[test]
    fn reply_location_vs_less_than() {
        let raw = parse_program(
            "t",
            "external q/1 dynamic l/1 dynamic i/0 static N/0 rule
             if i < N then issue <q(i) =: l(i)> endif",
        )
        .unwrap();
        let Rule::Cond {
            guard: Guard::Term(t),
            then_branch,
            ..
        } = &raw.rule
        else {
            panic!()
        };
        assert_eq!(t.head, Head::State("<".into()));
        let Rule::Issue { term, .. } = then_branch.as_ref() else {
            panic!()
        };
        assert_eq!(term.head, Head::ReplyLocation);
        let p = desugar_reply_locations(raw).unwrap();
        let Rule::Cond { then_branch, .. } = p.rule() else {
            panic!()
        };
        let Rule::Issue { term, .. } = then_branch.as_ref() else {
            panic!()
        };
        assert_eq!(term.head, Head::External("[q=:l]".into()));
        assert_eq!(term.args.len(), 2);
        assert_eq!(p.vocabulary().template("[q=:l]").unwrap().to_string(), "<q #1 rl l #2>");
    }

    #[test]
    fn timing_with_reply_location_operand() {
        let raw = parse_program(
            "t",
            "external q0/0 external q1/0 dynamic a1/0 dynamic s0/0
             rule if (q0 <~ <q1 =: a1> \\/ q1 = false) then s0 := true endif",
        )
        .unwrap();
        let Rule::Cond {
            guard: Guard::Or(l, _), ..
        } = raw.rule
        else {
            panic!()
        };
        let Guard::Timing { later, .. } = *l else { panic!() };
        assert_eq!(later.head, Head::ReplyLocation);
    }

    #[test]
    fn errors_carry_spans() {
        let e = parse_program("t", "dynamic x/0 rule x := y").unwrap_err();
        assert!(e.message.contains("unknown symbol `y`"));
        assert_eq!(e.span, Span::new(22, 23));
        let e = parse_program("t", "dynamic f/1 rule f := 1").unwrap_err();
        assert!(e.message.contains("expects 1 arguments"));
        let e = parse_program("t", "dynamic x/0 rule par x := 1").unwrap_err();
        assert!(e.message.contains("endpar"));
        assert_eq!((e.line, e.column), (1, 28));
    }

    #[test]
    fn pretty_print_round_trip() {
        let src = "external a/0 external b/0 external g/1 template <ask #1> dynamic x/0 dynamic r/1
            rule par
              if (a << b) /\\ !(x = 1 | x != 2) \\/ a ~ b then x := a + 1 endif
              issue <g(x) =: r(1)>
              if Boole(x) then fail else skip endif
            endpar";
        let raw = parse_program("t", src).unwrap();
        let printed = Printer::new(&raw.vocabulary).program(&raw.rule);
        let again = parse_program("t", &printed).unwrap();
        assert_eq!(Printer::new(&again.vocabulary).program(&again.rule), printed);
        assert_eq!(again.vocabulary, raw.vocabulary);
    }

    #[test]
    fn state_files() {
        let raw = parse_program(
            "t",
            "dynamic s0/0 dynamic s1/0 dynamic b/0 relational dynamic f/1 rule skip",
        )
        .unwrap();
        let vocab = Arc::new(raw.vocabulary);
        let s = parse_state("s", "s0 = false  s1 = false", vocab.clone()).unwrap();
        assert_eq!(s.lookup("s0", &[]).unwrap(), Element::False);
        let empty = parse_state("s", "", vocab.clone()).unwrap();
        assert_eq!(empty.lookup("s0", &[]).unwrap(), Element::Undef);
        let e = parse_state("s", "b = 7", vocab.clone()).unwrap_err();
        assert!(e.message.contains("relational"));
        let e = parse_state("s", "f(c) = 1", vocab.clone()).unwrap_err();
        assert!(e.message.contains("unknown element"));
        let s = parse_state("s", "atom c d\nf(c) = d", vocab.clone()).unwrap();
        let again = parse_state("s", &s.dump(), vocab).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn scenario_files() {
        let s = parse_scenario("e", "when <offer0> reply true step 1 round 1").unwrap();
        assert_eq!(s.directives.len(), 1);
        assert_eq!(s.directives[0].timing, Timing::WithinStep { step: 1, round: 1 });
        assert_eq!(s.directives[0].query, Query::labels(&["offer0"]));
        let s = parse_scenario("e", "when <offer1> reply true afterstep 3").unwrap();
        assert_eq!(s.directives[0].timing, Timing::AfterStep(3));
        assert!(parse_scenario("e", "").unwrap().directives.is_empty());
        let e = parse_scenario("e", "when <q> reply 1 afterstep 2\nwhen <q> reply 2 afterstep 4").unwrap_err();
        assert!(e.message.contains("duplicate"));
        assert!(parse_scenario("e", "when <> reply 1 afterstep 2").is_err());
        let s = parse_scenario("e", "when <q 0 'a'> reply 'b' afterstep 2").unwrap();
        assert_eq!(
            s.directives[0].query.slots(),
            &[
                QuerySlot::Label("q".into()),
                QuerySlot::Elem(Element::Int(0)),
                QuerySlot::Elem(Element::atom("a"))
            ]
        );
    }
}
