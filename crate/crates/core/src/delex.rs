//! Domain-adaptive delexicalization.
//!
//! Slot values are replaced by one placeholder per slot name, shared by every
//! domain (`<v.phone>`, never `<hotel.phone>`). Matching is token-level,
//! longest value first, left to right, non-overlapping.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dialog, Ontology, Record, VenueDatabase};

pub fn placeholder(slot: &str) -> String {
    format!("<v.{slot}>")
}

pub fn placeholder_slot(token: &str) -> Option<&str> {
    token.strip_prefix("<v.")?.strip_suffix('>')
}

/// One replaced value occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub placeholder: String,
    pub value: String,
    /// Source domain when known; empty when the value is shared by several domains.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub domain: String,
}

impl Substitution {
    pub fn slot(&self) -> Option<&str> {
        placeholder_slot(&self.placeholder)
    }
}

/// Surface value → every (domain, slot) it was seen under.
#[derive(Debug, Clone, Default)]
pub struct ValueIndex {
    values: BTreeMap<String, BTreeSet<(String, String)>>,
    max_tokens: usize,
}

impl ValueIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Indexes ontology closed sets, database records and the belief and goal
    /// annotations of `dialogs`.
    pub fn build(ontology: &Ontology, db: &VenueDatabase, dialogs: &[Dialog]) -> Self {
        let mut idx = Self::new();
        for d in ontology.domains() {
            for s in &d.informable {
                for v in s.values.iter().flatten() {
                    idx.add(v, &d.name, &s.slot);
                }
            }
        }
        for (domain, records) in db.iter() {
            for r in records {
                for (slot, value) in r {
                    idx.add(value, domain, slot);
                }
            }
        }
        for dialog in dialogs {
            for (domain, g) in &dialog.goal {
                for (slot, value) in g.inform.iter().chain(g.book.iter()) {
                    idx.add(value, domain, slot);
                }
            }
            for t in &dialog.turns {
                for (domain, slot, value) in t.belief.entries() {
                    idx.add(value, domain, slot);
                }
            }
        }
        idx
    }

    pub fn add(&mut self, value: &str, domain: &str, slot: &str) {
        if value.is_empty() || value == crate::corpus::DONTCARE {
            return;
        }
        self.max_tokens = self.max_tokens.max(value.split(' ').count());
        self.values
            .entry(value.to_string())
            .or_default()
            .insert((domain.to_string(), slot.to_string()));
    }

    pub fn sources(&self, value: &str) -> Option<&BTreeSet<(String, String)>> {
        self.values.get(value)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values in matching priority: more tokens first, then lexicographic.
    pub fn values_by_priority(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.values.keys().map(String::as_str).collect();
        v.sort_by(|a, b| {
            b.split(' ')
                .count()
                .cmp(&a.split(' ').count())
                .then_with(|| a.cmp(b))
        });
        v
    }

    /// The placeholder slot for an unannotated occurrence: only when every
    /// source agrees on the slot name.
    fn unambiguous(&self, value: &str) -> Option<(String, String)> {
        let sources = self.values.get(value)?;
        let slots: BTreeSet<&String> = sources.iter().map(|(_, s)| s).collect();
        if slots.len() != 1 {
            return None;
        }
        let domain = if sources.len() == 1 {
            sources.iter().next().unwrap().0.clone()
        } else {
            String::new()
        };
        Some((domain, slots.into_iter().next().unwrap().clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delexicalized {
    pub text: String,
    pub substitutions: Vec<Substitution>,
}

enum Assignment {
    /// Annotated (domain, slot) sources, assigned to occurrences in order.
    Annotated(Vec<(String, String)>),
    Incidental(String, String),
}

/// Replaces slot values in a normalized utterance with `<v.slot>` placeholders.
///
/// `annotations` are the (domain, slot, value) facts of the turn. A value
/// annotated under several slots is assigned to its occurrences left to
/// right, in annotation order; surplus occurrences reuse the last slot.
/// Unannotated values are replaced only when the index maps them to one slot.
pub fn delexicalize<'a>(
    utterance: &str,
    annotations: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    index: &ValueIndex,
) -> Delexicalized {
    let tokens: Vec<&str> = utterance.split_whitespace().collect();
    let mut assign: HashMap<String, Assignment> = HashMap::new();
    let mut max_len = index.max_tokens;
    for (domain, slot, value) in annotations {
        if value.is_empty() || value == crate::corpus::DONTCARE {
            continue;
        }
        max_len = max_len.max(value.split(' ').count());
        let entry = assign
            .entry(value.to_string())
            .or_insert_with(|| Assignment::Annotated(Vec::new()));
        if let Assignment::Annotated(v) = entry {
            let src = (domain.to_string(), slot.to_string());
            if !v.contains(&src) {
                v.push(src);
            }
        }
    }

    // (token length, value, start)
    let mut matches: Vec<(usize, String, usize)> = Vec::new();
    for start in 0..tokens.len() {
        for len in 1..=max_len.min(tokens.len() - start) {
            let gram = tokens[start..start + len].join(" ");
            let known = assign.contains_key(&gram)
                || match index.unambiguous(&gram) {
                    Some((d, s)) => {
                        assign.insert(gram.clone(), Assignment::Incidental(d, s));
                        true
                    }
                    None => false,
                };
            if known {
                matches.push((len, gram, start));
            }
        }
    }
    matches.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut taken = vec![false; tokens.len()];
    let mut spans: Vec<(usize, usize, Substitution)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (len, value, start) in matches {
        if taken[start..start + len].iter().any(|&t| t) {
            continue;
        }
        taken[start..start + len].iter_mut().for_each(|t| *t = true);
        let nth = seen.entry(value.clone()).or_insert(0);
        let (domain, slot) = match &assign[&value] {
            Assignment::Annotated(srcs) => srcs[(*nth).min(srcs.len() - 1)].clone(),
            Assignment::Incidental(d, s) => (d.clone(), s.clone()),
        };
        *nth += 1;
        spans.push((
            start,
            len,
            Substitution {
                placeholder: placeholder(&slot),
                value,
                domain,
            },
        ));
    }
    spans.sort_by_key(|(start, _, _)| *start);

    let mut out = Vec::with_capacity(tokens.len());
    let mut subs = Vec::with_capacity(spans.len());
    let mut i = 0;
    let mut next = spans.into_iter().peekable();
    while i < tokens.len() {
        match next.peek() {
            Some((start, _, _)) if *start == i => {
                let (_, len, sub) = next.next().unwrap();
                out.push(sub.placeholder.clone());
                subs.push(sub);
                i += len;
            }
            _ => {
                out.push(tokens[i].to_string());
                i += 1;
            }
        }
    }
    Delexicalized {
        text: out.join(" "),
        substitutions: subs,
    }
}

/// Values available to fill placeholders, per slot. Occurrence `i` of a slot
/// takes value `i`, or the last value when there are fewer values than
/// occurrences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Filler {
    values: BTreeMap<String, Vec<String>>,
}

impl Filler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_record(record: &Record) -> Self {
        let mut f = Self::new();
        for (slot, value) in record {
            f.set(slot, value);
        }
        f
    }

    pub fn from_substitutions(subs: &[Substitution]) -> Self {
        let mut f = Self::new();
        for s in subs {
            if let Some(slot) = s.slot() {
                f.values
                    .entry(slot.to_string())
                    .or_default()
                    .push(s.value.clone());
            }
        }
        f
    }

    /// Sets a single value for `slot`, replacing earlier ones.
    pub fn set(&mut self, slot: &str, value: &str) {
        self.values.insert(slot.to_string(), vec![value.to_string()]);
    }

    /// Adds booking details without overriding entity attributes.
    pub fn with_booking(mut self, booking: &BTreeMap<String, String>) -> Self {
        for (slot, value) in booking {
            self.values
                .entry(slot.clone())
                .or_insert_with(|| vec![value.clone()]);
        }
        self
    }

    pub fn get(&self, slot: &str, occurrence: usize) -> Option<&str> {
        let v = self.values.get(slot)?;
        v.get(occurrence.min(v.len().checked_sub(1)?)).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relexicalized {
    pub text: String,
    /// Placeholders that had no value and were left in place.
    pub unfilled: Vec<String>,
    /// The fills that were made, in order.
    pub substitutions: Vec<Substitution>,
}

pub fn relexicalize(template: &str, filler: &Filler) -> Relexicalized {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut unfilled = Vec::new();
    let mut substitutions = Vec::new();
    let out: Vec<String> = template
        .split_whitespace()
        .map(|tok| {
            let Some(slot) = placeholder_slot(tok) else {
                return tok.to_string();
            };
            let n = counts.entry(slot).or_insert(0);
            let filled = filler.get(slot, *n);
            *n += 1;
            match filled {
                Some(v) => {
                    substitutions.push(Substitution {
                        placeholder: tok.to_string(),
                        value: v.to_string(),
                        domain: String::new(),
                    });
                    v.to_string()
                }
                None => {
                    unfilled.push(tok.to_string());
                    tok.to_string()
                }
            }
        })
        .collect();
    Relexicalized {
        text: out.join(" "),
        unfilled,
        substitutions,
    }
}

/// Delexicalizes every system response using the turn's belief values as
/// annotations, filling `delex_response` and `substitutions`.
pub fn delexicalize_corpus(dialogs: &mut [Dialog], index: &ValueIndex) {
    dialogs.par_iter_mut().for_each(|d| {
        for t in &mut d.turns {
            let out = delexicalize(&t.response, t.belief.entries(), index);
            t.delex_response = Some(out.text);
            t.substitutions = out.substitutions;
        }
    });
}
