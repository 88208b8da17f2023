//! Abstract syntax of interactive ASM programs.
//!
//! A [`RawProgram`] is what the parser produces: it may still contain
//! reply-location nodes `<g(u) =: f(t)>`. [`desugar_reply_locations`] turns
//! every such node into an application of a combined external symbol
//! `[g=:f]` and yields a [`Program`], the only form the evaluator accepts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::{Query, QuerySlot};
use crate::structures::Element;

/// The label that separates a query from its reply location.
pub const REPLY_LOCATION_LABEL: &str = "rl";

/// Name of the nullary relational symbol that ends a run.
pub const HALT: &str = "Halt";

/// Byte range in the source text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Identity of a term occurrence. Unique within a program.
pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Static,
    Dynamic,
    External,
}

impl fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymbolKind::Static => "static",
            SymbolKind::Dynamic => "dynamic",
            SymbolKind::External => "external",
        })
    }
}

/// The two halves of a combined symbol `[g=:f]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplyPair {
    pub query: String,
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuncSig {
    pub name: String,
    pub arity: usize,
    pub kind: SymbolKind,
    pub relational: bool,
    pub reply_available: bool,
    /// Set only for combined symbols.
    pub reply_pair: Option<ReplyPair>,
}

impl FuncSig {
    pub fn new(name: impl Into<String>, arity: usize, kind: SymbolKind, relational: bool) -> Self {
        FuncSig {
            name: name.into(),
            arity,
            kind,
            relational,
            reply_available: false,
            reply_pair: None,
        }
    }

    pub fn is_external(&self) -> bool {
        self.kind == SymbolKind::External
    }

    pub fn is_dynamic(&self) -> bool {
        self.kind == SymbolKind::Dynamic
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateSlot {
    Label(String),
    /// One-based placeholder `#i`.
    Placeholder(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub slots: Vec<TemplateSlot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template placeholders must be #1..#{arity}, each exactly once")]
    BadPlaceholders { arity: usize },
    #[error("template for arity {expected} instantiated with {found} arguments")]
    ArityMismatch { expected: usize, found: usize },
}

impl Template {
    /// The template `<name #1 ... #n>` used when a declaration gives none.
    pub fn default_for(name: &str, arity: usize) -> Self {
        let mut slots = vec![TemplateSlot::Label(name.to_string())];
        slots.extend((1..=arity).map(TemplateSlot::Placeholder));
        Template { slots }
    }

    pub fn placeholder_count(&self) -> usize {
        self.slots
            .iter()
            .filter(|s| matches!(s, TemplateSlot::Placeholder(_)))
            .count()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().filter_map(|s| match s {
            TemplateSlot::Label(l) => Some(l.as_str()),
            TemplateSlot::Placeholder(_) => None,
        })
    }

    pub fn contains_reply_marker(&self) -> bool {
        self.labels().any(|l| l == REPLY_LOCATION_LABEL)
    }

    pub fn check(&self, arity: usize) -> Result<(), TemplateError> {
        let mut seen = vec![false; arity];
        for slot in &self.slots {
            if let TemplateSlot::Placeholder(i) = *slot {
                if i == 0 || i > arity || seen[i - 1] {
                    return Err(TemplateError::BadPlaceholders { arity });
                }
                seen[i - 1] = true;
            }
        }
        if seen.iter().all(|s| *s) {
            Ok(())
        } else {
            Err(TemplateError::BadPlaceholders { arity })
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char('<')?;
        for (i, slot) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_char(' ')?;
            }
            match slot {
                TemplateSlot::Label(l) => f.write_str(l)?,
                TemplateSlot::Placeholder(n) => write!(f, "#{n}")?,
            }
        }
        f.write_char('>')
    }
}

/// Replaces each placeholder `#i` with `args[i-1]`; labels are kept.
pub fn instantiate_template(template: &Template, args: &[Element]) -> Result<Query, TemplateError> {
    let expected = template.placeholder_count();
    if expected != args.len() {
        return Err(TemplateError::ArityMismatch {
            expected,
            found: args.len(),
        });
    }
    let slots = template
        .slots
        .iter()
        .map(|slot| match slot {
            TemplateSlot::Label(l) => QuerySlot::Label(l.clone()),
            TemplateSlot::Placeholder(i) => QuerySlot::Elem(args[i - 1].clone()),
        })
        .collect();
    Ok(Query::new(slots))
}

pub fn combined_symbol_name(query: &str, location: &str) -> String {
    format!("[{query}=:{location}]")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct VocabularyError {
    pub message: String,
}

fn vocab_err(message: impl Into<String>) -> VocabularyError {
    VocabularyError {
        message: message.into(),
    }
}

/// Symbols, labels and the template assignment of a program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    symbols: BTreeMap<String, FuncSig>,
    labels: BTreeSet<String>,
    templates: BTreeMap<String, Template>,
}

const LOGIC_NAMES: &[(&str, usize, bool)] = &[
    ("true", 0, true),
    ("false", 0, true),
    ("undef", 0, false),
    ("Boole", 1, true),
    ("=", 2, true),
    ("&", 2, true),
    ("|", 2, true),
    ("not", 1, true),
];

const ARITHMETIC: &[(&str, usize, bool)] = &[("+", 2, false), ("<", 2, true)];

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// A vocabulary holding only the logic names, arithmetic built-ins,
    /// `Halt`, and the label `rl`.
    pub fn new() -> Self {
        let mut symbols = BTreeMap::new();
        for &(name, arity, relational) in LOGIC_NAMES.iter().chain(ARITHMETIC) {
            symbols.insert(
                name.to_string(),
                FuncSig::new(name, arity, SymbolKind::Static, relational),
            );
        }
        symbols.insert(HALT.to_string(), FuncSig::new(HALT, 0, SymbolKind::Dynamic, true));
        let mut labels = BTreeSet::new();
        labels.insert(REPLY_LOCATION_LABEL.to_string());
        Vocabulary {
            symbols,
            labels,
            templates: BTreeMap::new(),
        }
    }

    pub fn is_builtin(name: &str) -> bool {
        name == HALT || LOGIC_NAMES.iter().any(|(n, ..)| *n == name) || ARITHMETIC.iter().any(|(n, ..)| *n == name)
    }

    pub fn is_logic_name(name: &str) -> bool {
        LOGIC_NAMES.iter().any(|(n, ..)| *n == name)
    }

    /// Declares a state symbol. Redeclaring an identical signature is a no-op.
    pub fn declare_state(&mut self, sig: FuncSig) -> Result<(), VocabularyError> {
        if sig.kind == SymbolKind::External {
            return Err(vocab_err("use declare_external for external symbols"));
        }
        if sig.name == REPLY_LOCATION_LABEL {
            return Err(vocab_err("`rl` is reserved as the reply-location marker"));
        }
        self.insert(sig)
    }

    pub fn declare_external(
        &mut self,
        name: &str,
        arity: usize,
        template: Option<Template>,
    ) -> Result<(), VocabularyError> {
        if name == REPLY_LOCATION_LABEL {
            return Err(vocab_err("`rl` is reserved as the reply-location marker"));
        }
        let template = template.unwrap_or_else(|| Template::default_for(name, arity));
        template
            .check(arity)
            .map_err(|e| vocab_err(format!("external `{name}`: {e}")))?;
        if template.contains_reply_marker() {
            return Err(vocab_err(format!(
                "external `{name}`: only combined reply-location symbols may use `rl` in templates"
            )));
        }
        self.insert(FuncSig::new(name, arity, SymbolKind::External, false))?;
        for label in template.labels() {
            self.labels.insert(label.to_string());
        }
        self.templates.insert(name.to_string(), template);
        Ok(())
    }

    fn insert(&mut self, sig: FuncSig) -> Result<(), VocabularyError> {
        match self.symbols.get(&sig.name) {
            Some(existing) if *existing == sig => Ok(()),
            Some(_) => Err(vocab_err(format!("symbol `{}` declared twice", sig.name))),
            None => {
                self.symbols.insert(sig.name.clone(), sig);
                Ok(())
            }
        }
    }

    pub fn add_label(&mut self, label: &str) {
        self.labels.insert(label.to_string());
    }

    /// Registers (or returns the existing) combined symbol `[g=:f]`, marking
    /// `f` reply-available.
    pub fn register_combined(&mut self, query: &str, location: &str) -> Result<String, VocabularyError> {
        let name = combined_symbol_name(query, location);
        if self.symbols.contains_key(&name) {
            return Ok(name);
        }
        let g = self
            .symbols
            .get(query)
            .filter(|s| s.is_external())
            .ok_or_else(|| vocab_err(format!("`{query}` is not an external symbol")))?
            .clone();
        let f = self
            .symbols
            .get(location)
            .ok_or_else(|| vocab_err(format!("unknown symbol `{location}`")))?
            .clone();
        if !f.is_dynamic() || Self::is_builtin(location) {
            return Err(vocab_err(format!(
                "reply location `{location}` must be a dynamic symbol"
            )));
        }
        if f.relational {
            return Err(vocab_err(format!("reply location `{location}` must not be relational")));
        }
        let mut slots = self.templates[query].slots.clone();
        slots.push(TemplateSlot::Label(REPLY_LOCATION_LABEL.to_string()));
        slots.push(TemplateSlot::Label(location.to_string()));
        slots.extend((g.arity + 1..=g.arity + f.arity).map(TemplateSlot::Placeholder));
        let template = Template { slots };

        self.labels.insert(location.to_string());
        if let Some(sig) = self.symbols.get_mut(location) {
            sig.reply_available = true;
        }
        let mut sig = FuncSig::new(name.clone(), g.arity + f.arity, SymbolKind::External, false);
        sig.reply_pair = Some(ReplyPair {
            query: query.to_string(),
            location: location.to_string(),
        });
        self.symbols.insert(name.clone(), sig);
        self.templates.insert(name.clone(), template);
        Ok(name)
    }

    pub fn get(&self, name: &str) -> Option<&FuncSig> {
        self.symbols.get(name)
    }

    pub fn template(&self, name: &str) -> Option<&Template> {
        self.templates.get(name)
    }

    pub fn labels(&self) -> &BTreeSet<String> {
        &self.labels
    }

    pub fn symbols(&self) -> impl Iterator<Item = &FuncSig> {
        self.symbols.values()
    }

    pub fn state_symbols(&self) -> impl Iterator<Item = &FuncSig> {
        self.symbols.values().filter(|s| !s.is_external())
    }

    pub fn external_symbols(&self) -> impl Iterator<Item = &FuncSig> {
        self.symbols.values().filter(|s| s.is_external())
    }

    /// Longest template, i.e. the bound on the length of issued tuples.
    pub fn max_template_len(&self) -> usize {
        self.templates.values().map(|t| t.slots.len()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    /// Integer or atom constant.
    Literal(Element),
    State(String),
    External(String),
    /// Sugar `<g(u) =: f(t)>`; arguments are `[g(u), f(t)]`.
    ReplyLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub id: NodeId,
    pub span: Span,
    pub head: Head,
    pub args: Vec<Term>,
}

impl Term {
    pub fn symbol(&self) -> Option<&str> {
        match &self.head {
            Head::State(s) | Head::External(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_query_term(&self) -> bool {
        matches!(self.head, Head::External(_))
    }

    /// Pre-order walk over this term and its subterms.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        for a in &self.args {
            a.walk(f);
        }
    }

    pub fn renumber(&mut self, next: &mut NodeId) {
        self.id = *next;
        *next += 1;
        for a in &mut self.args {
            a.renumber(next);
        }
    }

    pub fn query_term_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |t| {
            if t.is_query_term() || t.head == Head::ReplyLocation {
                n += 1;
            }
        });
        n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Guard {
    Term(Term),
    /// `(earlier <~ later)`
    Timing {
        span: Span,
        earlier: Term,
        later: Term,
    },
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Not(Box<Guard>),
}

impl Guard {
    pub fn for_each_term<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        match self {
            Guard::Term(t) => f(t),
            Guard::Timing { earlier, later, .. } => {
                f(earlier);
                f(later);
            }
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.for_each_term(f);
                b.for_each_term(f);
            }
            Guard::Not(g) => g.for_each_term(f),
        }
    }

    fn for_each_term_mut(&mut self, f: &mut impl FnMut(&mut Term)) {
        match self {
            Guard::Term(t) => f(t),
            Guard::Timing { earlier, later, .. } => {
                f(earlier);
                f(later);
            }
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.for_each_term_mut(f);
                b.for_each_term_mut(f);
            }
            Guard::Not(g) => g.for_each_term_mut(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    Update {
        span: Span,
        symbol: String,
        args: Vec<Term>,
        value: Term,
    },
    Issue {
        span: Span,
        term: Term,
    },
    Fail {
        span: Span,
    },
    Cond {
        span: Span,
        guard: Guard,
        then_branch: Box<Rule>,
        else_branch: Box<Rule>,
    },
    Par {
        span: Span,
        rules: Vec<Rule>,
    },
}

impl Rule {
    pub fn skip() -> Rule {
        Rule::Par {
            span: Span::default(),
            rules: Vec::new(),
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Rule::Update { span, .. }
            | Rule::Issue { span, .. }
            | Rule::Fail { span }
            | Rule::Cond { span, .. }
            | Rule::Par { span, .. } => *span,
        }
    }

    /// Number of rule nodes, counting the rule itself.
    pub fn node_count(&self) -> usize {
        match self {
            Rule::Update { .. } | Rule::Issue { .. } | Rule::Fail { .. } => 1,
            Rule::Cond {
                then_branch,
                else_branch,
                ..
            } => 1 + then_branch.node_count() + else_branch.node_count(),
            Rule::Par { rules, .. } => 1 + rules.iter().map(Rule::node_count).sum::<usize>(),
        }
    }

    pub fn for_each_term<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        match self {
            Rule::Update { args, value, .. } => {
                args.iter().for_each(&mut *f);
                f(value);
            }
            Rule::Issue { term, .. } => f(term),
            Rule::Fail { .. } => {}
            Rule::Cond {
                guard,
                then_branch,
                else_branch,
                ..
            } => {
                guard.for_each_term(f);
                then_branch.for_each_term(f);
                else_branch.for_each_term(f);
            }
            Rule::Par { rules, .. } => rules.iter().for_each(|r| r.for_each_term(f)),
        }
    }

    fn for_each_term_mut(&mut self, f: &mut impl FnMut(&mut Term)) {
        match self {
            Rule::Update { args, value, .. } => {
                args.iter_mut().for_each(&mut *f);
                f(value);
            }
            Rule::Issue { term, .. } => f(term),
            Rule::Fail { .. } => {}
            Rule::Cond {
                guard,
                then_branch,
                else_branch,
                ..
            } => {
                guard.for_each_term_mut(f);
                then_branch.for_each_term_mut(f);
                else_branch.for_each_term_mut(f);
            }
            Rule::Par { rules, .. } => rules.iter_mut().for_each(|r| r.for_each_term_mut(f)),
        }
    }

    /// Number of query-term occurrences, including reply-location nodes.
    pub fn query_term_count(&self) -> usize {
        let mut n = 0;
        self.for_each_term(&mut |t| n += t.query_term_count());
        n
    }
}

/// A parsed program that may still contain reply-location sugar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawProgram {
    pub name: String,
    pub vocabulary: Vocabulary,
    pub rule: Rule,
    pub source: String,
}

/// A desugared program: every reply-location node has been replaced by a
/// combined external symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Program {
    name: String,
    vocabulary: Vocabulary,
    rule: Rule,
    source: String,
}

impl Program {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn query_term_count(&self) -> usize {
        self.rule.query_term_count()
    }
}

impl From<Program> for RawProgram {
    fn from(p: Program) -> Self {
        RawProgram {
            name: p.name,
            vocabulary: p.vocabulary,
            rule: p.rule,
            source: p.source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    /// Occurrence context class, when the diagnostic concerns one.
    pub class: Option<String>,
    pub message: String,
}

impl Diagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            span,
            class: None,
            message: message.into(),
        }
    }

    pub fn warning(span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            span,
            class: None,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// `file:start..end: severity[class]: message`
    pub fn render(&self, file: &str) -> String {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match &self.class {
            Some(c) => format!("{file}:{}: {sev}[{c}]: {}", self.span, self.message),
            None => format!("{file}:{}: {sev}: {}", self.span, self.message),
        }
    }
}

/// Replaces every `<g(u) =: f(t)>` by `[g=:f](u, t)`.
///
/// One combined symbol exists per `(g, f)` pair; its template is
/// `ĝ ++ <rl f #(m+1) .. #(m+n)>`. A program without sugar comes back
/// unchanged, which makes the operation idempotent.
pub fn desugar_reply_locations(raw: RawProgram) -> Result<Program, Vec<Diagnostic>> {
    let RawProgram {
        name,
        mut vocabulary,
        mut rule,
        source,
    } = raw;
    let mut diags = Vec::new();
    rule.for_each_term_mut(&mut |t| desugar_term(t, &mut vocabulary, &mut diags));
    if diags.is_empty() {
        Ok(Program {
            name,
            vocabulary,
            rule,
            source,
        })
    } else {
        Err(diags)
    }
}

fn desugar_term(term: &mut Term, vocab: &mut Vocabulary, diags: &mut Vec<Diagnostic>) {
    for a in &mut term.args {
        desugar_term(a, vocab, diags);
    }
    if term.head != Head::ReplyLocation {
        return;
    }
    let (query, location) = match (&term.args[0].head, &term.args[1].head) {
        (Head::External(g), Head::State(f)) => (g.clone(), f.clone()),
        (Head::External(_), _) => {
            diags.push(Diagnostic::error(
                term.args[1].span,
                "reply location must be a state-vocabulary function application",
            ));
            return;
        }
        _ => {
            diags.push(Diagnostic::error(
                term.args[0].span,
                "left side of `=:` must be an external function application",
            ));
            return;
        }
    };
    let loc_term = &term.args[1];
    let mut external_in_location = false;
    for arg in &loc_term.args {
        arg.walk(&mut |t| {
            if matches!(t.head, Head::External(_) | Head::ReplyLocation) {
                external_in_location = true;
                diags.push(Diagnostic::error(
                    t.span,
                    "reply-location terms must use only state-vocabulary symbols",
                ));
            }
        });
    }
    if external_in_location {
        return;
    }
    match vocab.register_combined(&query, &location) {
        Ok(name) => {
            let [q, l]: [Term; 2] = std::mem::take(&mut term.args)
                .try_into()
                .expect("reply-location node has two children");
            term.head = Head::External(name);
            term.args = q.args.into_iter().chain(l.args).collect();
        }
        Err(e) => diags.push(Diagnostic::error(term.span, e.message)),
    }
}

/// Read access shared by raw and desugared programs.
pub trait ProgramView {
    fn vocabulary(&self) -> &Vocabulary;
    fn rule(&self) -> &Rule;
}

impl ProgramView for Program {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }
    fn rule(&self) -> &Rule {
        &self.rule
    }
}

impl ProgramView for RawProgram {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }
    fn rule(&self) -> &Rule {
        &self.rule
    }
}

/// Well-formedness diagnostics. Empty iff the program is well formed.
pub fn validate_program(program: &impl ProgramView) -> Vec<Diagnostic> {
    let vocab = program.vocabulary();
    let mut diags = Vec::new();
    for sig in vocab.external_symbols() {
        match vocab.template(&sig.name) {
            None => diags.push(Diagnostic::error(
                Span::default(),
                format!("external `{}` has no template", sig.name),
            )),
            Some(t) => {
                if t.placeholder_count() != sig.arity {
                    diags.push(Diagnostic::error(
                        Span::default(),
                        format!("template of `{}` does not match its arity", sig.name),
                    ));
                }
                if t.contains_reply_marker() != sig.reply_pair.is_some() {
                    diags.push(Diagnostic::error(
                        Span::default(),
                        format!("`rl` may appear only in templates of combined symbols (`{}`)", sig.name),
                    ));
                }
            }
        }
    }
    if vocab.get(REPLY_LOCATION_LABEL).is_some() {
        diags.push(Diagnostic::error(Span::default(), "`rl` is used as an ordinary symbol"));
    }
    validate_rule(vocab, program.rule(), &mut diags);
    diags
}

fn validate_rule(vocab: &Vocabulary, rule: &Rule, diags: &mut Vec<Diagnostic>) {
    match rule {
        Rule::Update {
            span,
            symbol,
            args,
            value,
        } => {
            match vocab.get(symbol) {
                None => diags.push(Diagnostic::error(*span, format!("unknown symbol `{symbol}`"))),
                Some(sig) => {
                    if !sig.is_dynamic() {
                        diags.push(Diagnostic::error(
                            *span,
                            format!("update of non-dynamic symbol `{symbol}`"),
                        ));
                    }
                    if sig.arity != args.len() {
                        diags.push(Diagnostic::error(
                            *span,
                            format!("`{symbol}` expects {} arguments, got {}", sig.arity, args.len()),
                        ));
                    }
                    if sig.relational && !is_boolean_term(vocab, value) {
                        diags.push(Diagnostic::error(value.span, "relational update needs Boolean term"));
                    }
                }
            }
            for t in args.iter().chain(std::iter::once(value)) {
                validate_term(vocab, t, diags);
            }
        }
        Rule::Issue { term, .. } => {
            if !matches!(term.head, Head::External(_) | Head::ReplyLocation) {
                diags.push(Diagnostic::error(
                    term.span,
                    "issue argument must be headed by an external symbol",
                ));
            }
            validate_term(vocab, term, diags);
        }
        Rule::Fail { .. } => {}
        Rule::Cond {
            guard,
            then_branch,
            else_branch,
            ..
        } => {
            validate_guard(vocab, guard, diags);
            validate_rule(vocab, then_branch, diags);
            validate_rule(vocab, else_branch, diags);
        }
        Rule::Par { rules, .. } => rules.iter().for_each(|r| validate_rule(vocab, r, diags)),
    }
}

fn validate_guard(vocab: &Vocabulary, guard: &Guard, diags: &mut Vec<Diagnostic>) {
    match guard {
        Guard::Term(t) => {
            if !is_boolean_term(vocab, t) {
                diags.push(Diagnostic::error(t.span, "guard term must be Boolean"));
            }
            validate_term(vocab, t, diags);
        }
        Guard::Timing { earlier, later, .. } => {
            validate_term(vocab, earlier, diags);
            validate_term(vocab, later, diags);
        }
        Guard::And(a, b) | Guard::Or(a, b) => {
            validate_guard(vocab, a, diags);
            validate_guard(vocab, b, diags);
        }
        Guard::Not(g) => validate_guard(vocab, g, diags),
    }
}

fn validate_term(vocab: &Vocabulary, term: &Term, diags: &mut Vec<Diagnostic>) {
    match &term.head {
        Head::Literal(_) => {}
        Head::State(name) | Head::External(name) => match vocab.get(name) {
            None => diags.push(Diagnostic::error(term.span, format!("unknown symbol `{name}`"))),
            Some(sig) => {
                if sig.arity != term.args.len() {
                    diags.push(Diagnostic::error(
                        term.span,
                        format!("`{name}` expects {} arguments, got {}", sig.arity, term.args.len()),
                    ));
                }
                if sig.is_external() != matches!(term.head, Head::External(_)) {
                    diags.push(Diagnostic::error(
                        term.span,
                        format!("`{name}` used with the wrong symbol kind"),
                    ));
                }
                if let Some(pair) = &sig.reply_pair {
                    let m = vocab.get(&pair.query).map_or(0, |g| g.arity);
                    for arg in term.args.iter().skip(m) {
                        arg.walk(&mut |t| {
                            if matches!(t.head, Head::External(_) | Head::ReplyLocation) {
                                diags.push(Diagnostic::error(
                                    t.span,
                                    "reply-location terms must use only state-vocabulary symbols",
                                ));
                            }
                        });
                    }
                }
            }
        },
        Head::ReplyLocation => {
            let [q, l] = &term.args[..] else {
                diags.push(Diagnostic::error(term.span, "malformed reply-location node"));
                return;
            };
            match &q.head {
                Head::External(_) => {}
                _ => diags.push(Diagnostic::error(
                    q.span,
                    "left side of `=:` must be an external function application",
                )),
            }
            match l.head.clone() {
                Head::State(f) => match vocab.get(&f) {
                    Some(sig) if sig.is_dynamic() && !sig.relational => {}
                    _ => diags.push(Diagnostic::error(
                        l.span,
                        format!("`{f}` cannot serve as a reply location"),
                    )),
                },
                _ => diags.push(Diagnostic::error(
                    l.span,
                    "reply location must be a state-vocabulary function application",
                )),
            }
            for arg in &l.args {
                arg.walk(&mut |t| {
                    if matches!(t.head, Head::External(_) | Head::ReplyLocation) {
                        diags.push(Diagnostic::error(
                            t.span,
                            "reply-location terms must use only state-vocabulary symbols",
                        ));
                    }
                });
            }
        }
    }
    for a in &term.args {
        validate_term(vocab, a, diags);
    }
}

/// A Boolean term is one headed by a relational state symbol.
pub fn is_boolean_term(vocab: &Vocabulary, term: &Term) -> bool {
    match &term.head {
        Head::State(name) => vocab.get(name).is_some_and(|s| s.relational),
        _ => false,
    }
}

const INFIX: &[&str] = &["=", "&", "|", "+", "<"];

/// Renders programs in the concrete syntax accepted by the parser.
///
/// Output is fully parenthesized, so parsing the result gives back the same
/// tree up to node ids and spans. Combined symbols are printed in their
/// `<g(u) =: f(t)>` form.
pub struct Printer<'a> {
    vocab: &'a Vocabulary,
}

impl<'a> Printer<'a> {
    pub fn new(vocab: &'a Vocabulary) -> Self {
        Printer { vocab }
    }

    pub fn program(&self, rule: &Rule) -> String {
        let mut out = String::new();
        for label in self.vocab.labels() {
            if label != REPLY_LOCATION_LABEL {
                let _ = writeln!(out, "label {label}");
            }
        }
        for sig in self.vocab.symbols() {
            if Vocabulary::is_builtin(&sig.name) || sig.reply_pair.is_some() {
                continue;
            }
            let _ = write!(out, "{} {}/{}", sig.kind, sig.name, sig.arity);
            if sig.relational {
                out.push_str(" relational");
            }
            if sig.is_external() {
                if let Some(t) = self.vocab.template(&sig.name) {
                    if *t != Template::default_for(&sig.name, sig.arity) {
                        let _ = write!(out, " template {t}");
                    }
                }
            }
            out.push('\n');
        }
        out.push_str("rule\n");
        self.rule_into(rule, 1, &mut out);
        out
    }

    pub fn rule(&self, rule: &Rule) -> String {
        let mut out = String::new();
        self.rule_into(rule, 0, &mut out);
        out
    }

    fn rule_into(&self, rule: &Rule, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        match rule {
            Rule::Update {
                symbol, args, value, ..
            } => {
                let _ = write!(out, "{pad}{symbol}");
                if !args.is_empty() {
                    let _ = write!(out, "({})", self.args(args));
                }
                let _ = writeln!(out, " := {}", self.term(value));
            }
            Rule::Issue { term, .. } => {
                let _ = writeln!(out, "{pad}issue {}", self.term(term));
            }
            Rule::Fail { .. } => {
                let _ = writeln!(out, "{pad}fail");
            }
            Rule::Cond {
                guard,
                then_branch,
                else_branch,
                ..
            } => {
                let _ = writeln!(out, "{pad}if {} then", self.guard(guard));
                self.rule_into(then_branch, depth + 1, out);
                let _ = writeln!(out, "{pad}else");
                self.rule_into(else_branch, depth + 1, out);
                let _ = writeln!(out, "{pad}endif");
            }
            Rule::Par { rules, .. } => {
                let _ = writeln!(out, "{pad}par");
                for r in rules {
                    self.rule_into(r, depth + 1, out);
                }
                let _ = writeln!(out, "{pad}endpar");
            }
        }
    }

    pub fn guard(&self, guard: &Guard) -> String {
        match guard {
            Guard::Term(t) => self.term(t),
            Guard::Timing { earlier, later, .. } => {
                format!("({} <~ {})", self.term(earlier), self.term(later))
            }
            Guard::And(a, b) => format!("({} /\\ {})", self.guard(a), self.guard(b)),
            Guard::Or(a, b) => format!("({} \\/ {})", self.guard(a), self.guard(b)),
            Guard::Not(g) => format!("!{}", self.guard(g)),
        }
    }

    fn args(&self, args: &[Term]) -> String {
        args.iter().map(|a| self.term(a)).collect::<Vec<_>>().join(", ")
    }

    fn app(&self, name: &str, args: &[Term]) -> String {
        if args.is_empty() {
            name.to_string()
        } else {
            format!("{name}({})", self.args(args))
        }
    }

    pub fn term(&self, term: &Term) -> String {
        match &term.head {
            Head::Literal(e) => e.to_string(),
            Head::State(name) if INFIX.contains(&name.as_str()) && term.args.len() == 2 => {
                format!("({} {name} {})", self.term(&term.args[0]), self.term(&term.args[1]))
            }
            Head::State(name) => self.app(name, &term.args),
            Head::External(name) => match self.vocab.get(name).and_then(|s| s.reply_pair.as_ref()) {
                Some(pair) => {
                    let m = self.vocab.get(&pair.query).map_or(0, |g| g.arity);
                    let (u, t) = term.args.split_at(m.min(term.args.len()));
                    format!("<{} =: {}>", self.app(&pair.query, u), self.app(&pair.location, t))
                }
                None => self.app(name, &term.args),
            },
            Head::ReplyLocation => format!("<{} =: {}>", self.term(&term.args[0]), self.term(&term.args[1])),
        }
    }
}
