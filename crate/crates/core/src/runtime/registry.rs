//! Persistent queries: which locations a reply must be written into, and
//! whether it has been.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::history::Query;
use crate::structures::{Element, Location};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EntryStatus {
    Awaiting,
    /// Replied within a step; written at the next boundary.
    Answered {
        value: Element,
        step: usize,
    },
    Delivered {
        value: Element,
        step: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub query: Query,
    pub locations: BTreeSet<Location>,
    pub issued_step: usize,
    #[serde(flatten)]
    pub status: EntryStatus,
}

impl RegistryEntry {
    pub fn is_open(&self) -> bool {
        !matches!(self.status, EntryStatus::Delivered { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    entries: BTreeMap<Query, RegistryEntry>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// Records that `query` (rl-free) was issued with reply location `loc`.
    /// A query whose earlier reply was already delivered starts afresh.
    pub fn record(&mut self, query: &Query, loc: Location, step: usize) {
        let fresh = || RegistryEntry {
            query: query.clone(),
            locations: BTreeSet::new(),
            issued_step: step,
            status: EntryStatus::Awaiting,
        };
        let entry = self.entries.entry(query.clone()).or_insert_with(fresh);
        if !entry.is_open() {
            *entry = fresh();
        }
        entry.locations.insert(loc);
    }

    pub fn get(&self, query: &Query) -> Option<&RegistryEntry> {
        self.entries.get(query)
    }

    pub fn is_persistent(&self, query: &Query) -> bool {
        self.entries.get(query).is_some_and(RegistryEntry::is_open)
    }

    /// Notes a within-step reply to an open entry.
    pub fn answer(&mut self, query: &Query, value: Element, step: usize) {
        if let Some(e) = self.entries.get_mut(query) {
            if e.status == EntryStatus::Awaiting {
                e.status = EntryStatus::Answered { value, step };
            }
        }
    }

    pub fn mark_delivered(&mut self, query: &Query, value: Element, step: usize) {
        if let Some(e) = self.entries.get_mut(query) {
            e.status = EntryStatus::Delivered { value, step };
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.entries.values()
    }

    pub fn awaiting(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.entries.values().filter(|e| e.status == EntryStatus::Awaiting)
    }

    pub fn answered(&self) -> impl Iterator<Item = (&RegistryEntry, &Element)> {
        self.entries.values().filter_map(|e| match &e.status {
            EntryStatus::Answered { value, .. } => Some((e, value)),
            _ => None,
        })
    }
}
