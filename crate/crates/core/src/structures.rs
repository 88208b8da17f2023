//! States as finite first-order structures, plus locations, updates and
//! renamings of the base set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{SymbolKind, Vocabulary};

/// An element of a state's base set.
///
/// Integers are admitted on demand; atoms must be declared by the state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    True,
    False,
    Undef,
    Int(i64),
    Atom(String),
}

impl Element {
    pub fn atom(name: impl Into<String>) -> Self {
        Element::Atom(name.into())
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            Element::True
        } else {
            Element::False
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Element::True => Some(true),
            Element::False => Some(false),
            _ => None,
        }
    }

    pub fn is_boolean(&self) -> bool {
        self.as_bool().is_some()
    }

    pub fn is_logic_value(&self) -> bool {
        matches!(self, Element::True | Element::False | Element::Undef)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::True => f.write_str("true"),
            Element::False => f.write_str("false"),
            Element::Undef => f.write_str("undef"),
            Element::Int(i) => write!(f, "{i}"),
            Element::Atom(a) => write!(f, "'{a}'"),
        }
    }
}

/// Serialized as its literal text (`10`, `true`, `'a'`).
impl Serialize for Element {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Accepts literal text, JSON integers and JSON booleans.
impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Element;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an element literal, integer or boolean")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Element, E> {
                crate::parser::parse_literal(v).map_err(|e| E::custom(e.message))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Element, E> {
                Ok(Element::Int(v))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Element, E> {
                i64::try_from(v).map(Element::Int).map_err(E::custom)
            }
            fn visit_bool<E: serde::de::Error>(self, v: bool) -> Result<Element, E> {
                Ok(Element::from_bool(v))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub symbol: String,
    pub args: Vec<Element>,
}

impl Location {
    pub fn new(symbol: impl Into<String>, args: Vec<Element>) -> Self {
        Location {
            symbol: symbol.into(),
            args,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol)?;
        if !self.args.is_empty() {
            f.write_char('(')?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_char(')')?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Update {
    pub location: Location,
    pub value: Element,
}

impl Update {
    pub fn new(location: Location, value: Element) -> Self {
        Update { location, value }
    }
}

impl fmt::Display for Update {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:={}", self.location, self.value)
    }
}

pub type UpdateSet = BTreeSet<Update>;

/// True if two distinct updates in the set target the same location.
pub fn has_clash(updates: &UpdateSet) -> bool {
    updates
        .iter()
        .zip(updates.iter().skip(1))
        .any(|(a, b)| a.location == b.location)
}

pub fn render_updates(updates: &UpdateSet) -> String {
    updates.iter().map(Update::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("`{symbol}` expects {expected} arguments, got {found}")]
    Arity {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("clash: conflicting updates at {0}")]
    Clash(Location),
    #[error("`{0}` is not dynamic")]
    NotDynamic(String),
    #[error("relational location {location} cannot hold {value}")]
    NotBoolean { location: Location, value: Element },
    #[error("element {0} is not in the base set")]
    UnknownElement(Element),
    #[error("renaming is not a bijection: {0}")]
    NotBijective(String),
}

type Table = BTreeMap<Vec<Element>, Element>;

/// A finite structure over a state vocabulary.
///
/// Tables store only entries that differ from the default value (`undef`,
/// or `false` for relational symbols), so two states are equal exactly when
/// they interpret every symbol alike.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    vocab: Arc<Vocabulary>,
    atoms: BTreeSet<String>,
    tables: BTreeMap<String, Table>,
}

impl State {
    pub fn new(vocab: Arc<Vocabulary>) -> Self {
        State {
            vocab,
            atoms: BTreeSet::new(),
            tables: BTreeMap::new(),
        }
    }

    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn atoms(&self) -> &BTreeSet<String> {
        &self.atoms
    }

    pub fn add_atom(&mut self, name: impl Into<String>) {
        self.atoms.insert(name.into());
    }

    pub fn contains(&self, e: &Element) -> bool {
        match e {
            Element::Atom(a) => self.atoms.contains(a),
            _ => true,
        }
    }

    fn default_for(&self, symbol: &str) -> Element {
        match self.vocab.get(symbol) {
            Some(sig) if sig.relational => Element::False,
            _ => Element::Undef,
        }
    }

    /// Value of `symbol` at `args`; logic names and arithmetic are computed.
    pub fn lookup(&self, symbol: &str, args: &[Element]) -> Result<Element, StructureError> {
        let sig = self
            .vocab
            .get(symbol)
            .filter(|s| s.kind != SymbolKind::External)
            .ok_or_else(|| StructureError::UnknownSymbol(symbol.to_string()))?;
        if sig.arity != args.len() {
            return Err(StructureError::Arity {
                symbol: symbol.to_string(),
                expected: sig.arity,
                found: args.len(),
            });
        }
        if let Some(v) = builtin(symbol, args) {
            return Ok(v);
        }
        Ok(self
            .tables
            .get(symbol)
            .and_then(|t| t.get(args))
            .cloned()
            .unwrap_or_else(|| self.default_for(symbol)))
    }

    pub fn location_value(&self, loc: &Location) -> Result<Element, StructureError> {
        self.lookup(&loc.symbol, &loc.args)
    }

    /// Sets an entry without requiring the symbol to be dynamic; used when
    /// building initial states.
    pub fn set_initial(&mut self, loc: Location, value: Element) -> Result<(), StructureError> {
        self.check_entry(&loc, &value, false)?;
        self.write(loc, value);
        Ok(())
    }

    fn check_entry(&self, loc: &Location, value: &Element, dynamic_only: bool) -> Result<(), StructureError> {
        let sig = self
            .vocab
            .get(&loc.symbol)
            .filter(|s| s.kind != SymbolKind::External)
            .ok_or_else(|| StructureError::UnknownSymbol(loc.symbol.clone()))?;
        if Vocabulary::is_builtin(&loc.symbol) && sig.kind == SymbolKind::Static {
            return Err(StructureError::NotDynamic(loc.symbol.clone()));
        }
        if dynamic_only && sig.kind != SymbolKind::Dynamic {
            return Err(StructureError::NotDynamic(loc.symbol.clone()));
        }
        if sig.arity != loc.args.len() {
            return Err(StructureError::Arity {
                symbol: loc.symbol.clone(),
                expected: sig.arity,
                found: loc.args.len(),
            });
        }
        if sig.relational && !value.is_boolean() {
            return Err(StructureError::NotBoolean {
                location: loc.clone(),
                value: value.clone(),
            });
        }
        for e in loc.args.iter().chain(std::iter::once(value)) {
            if !self.contains(e) {
                return Err(StructureError::UnknownElement(e.clone()));
            }
        }
        Ok(())
    }

    fn write(&mut self, loc: Location, value: Element) {
        let default = self.default_for(&loc.symbol);
        let table = self.tables.entry(loc.symbol).or_default();
        if value == default {
            table.remove(&loc.args);
        } else {
            table.insert(loc.args, value);
        }
        self.tables.retain(|_, t| !t.is_empty());
    }

    /// The successor structure: updated locations take their new values,
    /// everything else (including the base set) is unchanged.
    pub fn apply_updates(&self, updates: &UpdateSet) -> Result<State, StructureError> {
        let mut prev: Option<&Update> = None;
        for u in updates {
            if let Some(p) = prev {
                if p.location == u.location {
                    return Err(StructureError::Clash(u.location.clone()));
                }
            }
            self.check_entry(&u.location, &u.value, true)?;
            prev = Some(u);
        }
        let mut next = self.clone();
        for u in updates {
            next.write(u.location.clone(), u.value.clone());
        }
        Ok(next)
    }

    /// Every stored (non-default) entry, in order.
    pub fn entries(&self) -> impl Iterator<Item = (Location, &Element)> {
        self.tables.iter().flat_map(|(sym, t)| {
            t.iter()
                .map(move |(args, v)| (Location::new(sym.clone(), args.clone()), v))
        })
    }

    /// Renders the state in the `.state` file format.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        if !self.atoms.is_empty() {
            out.push_str("atom");
            for a in &self.atoms {
                out.push(' ');
                out.push_str(a);
            }
            out.push('\n');
        }
        for (loc, v) in self.entries() {
            let _ = writeln!(out, "{loc} = {v}");
        }
        out
    }
}

fn builtin(symbol: &str, args: &[Element]) -> Option<Element> {
    let b = |e: &Element| e.as_bool();
    Some(match symbol {
        "true" => Element::True,
        "false" => Element::False,
        "undef" => Element::Undef,
        "Boole" => Element::from_bool(args[0].is_boolean()),
        "=" => Element::from_bool(args[0] == args[1]),
        "&" => match (b(&args[0]), b(&args[1])) {
            (Some(x), Some(y)) => Element::from_bool(x && y),
            _ => Element::False,
        },
        "|" => match (b(&args[0]), b(&args[1])) {
            (Some(x), Some(y)) => Element::from_bool(x || y),
            _ => Element::False,
        },
        "not" => match b(&args[0]) {
            Some(x) => Element::from_bool(!x),
            None => Element::False,
        },
        "+" => match (&args[0], &args[1]) {
            (Element::Int(x), Element::Int(y)) => x.checked_add(*y).map_or(Element::Undef, Element::Int),
            _ => Element::Undef,
        },
        "<" => match (&args[0], &args[1]) {
            (Element::Int(x), Element::Int(y)) => Element::from_bool(x < y),
            _ => Element::False,
        },
        _ => return None,
    })
}

/// A permutation of atoms, extended by the identity to the rest of the base
/// set. Logic values and integers are always fixed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Renaming {
    map: BTreeMap<String, String>,
}

impl Renaming {
    pub fn identity() -> Self {
        Renaming::default()
    }

    pub fn new(map: BTreeMap<String, String>) -> Result<Self, StructureError> {
        let keys: BTreeSet<&String> = map.keys().collect();
        let images: BTreeSet<&String> = map.values().collect();
        if images.len() != map.len() {
            return Err(StructureError::NotBijective("two atoms share an image".into()));
        }
        if keys != images {
            return Err(StructureError::NotBijective("image differs from domain".into()));
        }
        Ok(Renaming { map })
    }

    pub fn swap(a: &str, b: &str) -> Self {
        let mut map = BTreeMap::new();
        map.insert(a.to_string(), b.to_string());
        map.insert(b.to_string(), a.to_string());
        Renaming { map }
    }

    pub fn inverse(&self) -> Renaming {
        Renaming {
            map: self.map.iter().map(|(k, v)| (v.clone(), k.clone())).collect(),
        }
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &Renaming) -> Renaming {
        let mut keys: BTreeSet<String> = self.map.keys().cloned().collect();
        keys.extend(first.map.keys().cloned());
        let map = keys
            .into_iter()
            .map(|k| {
                let mid = first.map.get(&k).cloned().unwrap_or_else(|| k.clone());
                let out = self.map.get(&mid).cloned().unwrap_or(mid);
                (k, out)
            })
            .filter(|(k, v)| k != v)
            .collect();
        Renaming { map }
    }

    pub fn element(&self, e: &Element) -> Element {
        match e {
            Element::Atom(a) => Element::Atom(self.map.get(a).cloned().unwrap_or_else(|| a.clone())),
            other => other.clone(),
        }
    }
}

/// Canonical action of a renaming on derived objects.
pub trait Rename {
    fn rename(&self, r: &Renaming) -> Self;
}

impl Rename for Element {
    fn rename(&self, r: &Renaming) -> Self {
        r.element(self)
    }
}

impl<T: Rename> Rename for Vec<T> {
    fn rename(&self, r: &Renaming) -> Self {
        self.iter().map(|x| x.rename(r)).collect()
    }
}

impl<T: Rename + Ord> Rename for BTreeSet<T> {
    fn rename(&self, r: &Renaming) -> Self {
        self.iter().map(|x| x.rename(r)).collect()
    }
}

impl Rename for Location {
    fn rename(&self, r: &Renaming) -> Self {
        Location::new(self.symbol.clone(), self.args.rename(r))
    }
}

impl Rename for Update {
    fn rename(&self, r: &Renaming) -> Self {
        Update::new(self.location.rename(r), self.value.rename(r))
    }
}

impl Rename for State {
    fn rename(&self, r: &Renaming) -> Self {
        State {
            vocab: self.vocab.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|a| r.map.get(a).cloned().unwrap_or_else(|| a.clone()))
                .collect(),
            tables: self
                .tables
                .iter()
                .map(|(sym, t)| (sym.clone(), t.iter().map(|(k, v)| (k.rename(r), v.rename(r))).collect()))
                .collect(),
        }
    }
}
