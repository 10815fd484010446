//! Belief spans, action spans, active-domain tracking and the DB result vector.
//!
//! Belief span grammar: `( "[domain]" ( slot value+ )* )*`.
//! Action span grammar: `( "[domain]" ( "[act]" slot* )* )*`.
//! Both are emitted in ontology order so equal values serialize identically.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_text, Ontology, Triple, VenueDatabase};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("unknown domain marker [{0}]")]
    UnknownDomain(String),
    #[error("unknown marker [{0}]")]
    UnknownMarker(String),
    #[error("unknown slot {slot:?} for domain {domain:?}")]
    UnknownSlot { domain: String, slot: String },
    #[error("expected a slot name, found {0:?}")]
    ExpectedSlot(String),
    #[error("slot {0:?} has no value")]
    MissingValue(String),
    #[error("token {0:?} appears before any domain marker")]
    OutsideDomain(String),
    #[error("slot {0:?} appears before any act marker")]
    OutsideAct(String),
}

pub fn marker(name: &str) -> String {
    format!("[{name}]")
}

pub fn parse_marker(token: &str) -> Option<&str> {
    token.strip_prefix('[')?.strip_suffix(']')
}

/// Accumulated user constraints: domain → slot → value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefState(BTreeMap<String, BTreeMap<String, String>>);

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, domain: &str, slot: &str, value: &str) {
        self.0
            .entry(domain.to_string())
            .or_default()
            .insert(slot.to_string(), value.to_string());
    }

    pub fn with(mut self, domain: &str, slot: &str, value: &str) -> Self {
        self.insert(domain, slot, value);
        self
    }

    pub fn get(&self, domain: &str, slot: &str) -> Option<&str> {
        self.0.get(domain)?.get(slot).map(String::as_str)
    }

    pub fn domain(&self, domain: &str) -> Option<&BTreeMap<String, String>> {
        self.0.get(domain)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeMap<String, String>)> {
        self.0.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.0.values().all(BTreeMap::is_empty)
    }

    /// Every (domain, slot, value) in sorted order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.0.iter().flat_map(|(d, slots)| {
            slots
                .iter()
                .map(move |(s, v)| (d.as_str(), s.as_str(), v.as_str()))
        })
    }

    /// Lowercased, whitespace-collapsed copy with empty domains dropped.
    pub fn normalized(&self) -> Self {
        let mut out = Self::new();
        for (d, s, v) in self.entries() {
            out.insert(&normalize_text(d), &normalize_text(s), &normalize_text(v));
        }
        out
    }
}

fn sort_domains<'a>(ontology: &Ontology, names: impl Iterator<Item = &'a String>) -> Vec<&'a String> {
    let mut v: Vec<&String> = names.collect();
    v.sort_by(|a, b| {
        ontology
            .domain_rank(a)
            .cmp(&ontology.domain_rank(b))
            .then_with(|| a.cmp(b))
    });
    v
}

pub fn encode_belief_span(belief: &BeliefState, ontology: &Ontology) -> Vec<String> {
    let mut out = Vec::new();
    for domain in sort_domains(ontology, belief.0.keys()) {
        out.push(marker(domain));
        let mut slots: Vec<(&String, &String)> = belief.0[domain].iter().collect();
        slots.sort_by(|(a, _), (b, _)| {
            let rank = |s: &str| ontology.belief_slot_index(domain, s).unwrap_or(usize::MAX);
            rank(a).cmp(&rank(b)).then_with(|| a.cmp(b))
        });
        for (slot, value) in slots {
            out.push(slot.clone());
            out.extend(value.split_whitespace().map(str::to_string));
        }
    }
    out
}

/// Inverse of [`encode_belief_span`]. A token is read as a slot name exactly
/// when it is an informable slot of the current domain; anything else extends
/// the current value.
pub fn decode_belief_span<S: AsRef<str>>(
    tokens: &[S],
    ontology: &Ontology,
) -> Result<BeliefState, SpanError> {
    struct Pending {
        slot: String,
        value: Vec<String>,
    }
    fn flush(b: &mut BeliefState, domain: &str, p: Option<Pending>) -> Result<(), SpanError> {
        if let Some(p) = p {
            if p.value.is_empty() {
                return Err(SpanError::MissingValue(p.slot));
            }
            b.insert(domain, &p.slot, &p.value.join(" "));
        }
        Ok(())
    }

    let mut belief = BeliefState::new();
    let mut domain: Option<String> = None;
    let mut pending: Option<Pending> = None;
    for tok in tokens.iter().map(AsRef::as_ref) {
        if let Some(name) = parse_marker(tok) {
            if let Some(d) = &domain {
                flush(&mut belief, d, pending.take())?;
            }
            if ontology.domain(name).is_none() {
                return Err(SpanError::UnknownDomain(name.to_string()));
            }
            belief.0.entry(name.to_string()).or_default();
            domain = Some(name.to_string());
            continue;
        }
        let Some(d) = &domain else {
            return Err(SpanError::OutsideDomain(tok.to_string()));
        };
        let is_slot = ontology.domain(d).is_some_and(|spec| spec.is_informable(tok));
        if is_slot {
            flush(&mut belief, d, pending.take())?;
            pending = Some(Pending {
                slot: tok.to_string(),
                value: Vec::new(),
            });
        } else {
            match &mut pending {
                Some(p) => p.value.push(tok.to_string()),
                None => return Err(SpanError::ExpectedSlot(tok.to_string())),
            }
        }
    }
    if let Some(d) = &domain {
        flush(&mut belief, d, pending)?;
    }
    Ok(belief)
}

/// A system action: a set of (domain, act, slot) triples.
///
/// An act carrying slots never also carries the empty slot, so that the span
/// form `[act] slot ...` is unambiguous.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SystemAction(BTreeSet<Triple>);

impl SystemAction {
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut set: BTreeSet<Triple> = triples.into_iter().collect();
        let slotted: BTreeSet<(String, String)> = set
            .iter()
            .filter(|t| !t.slot.is_empty())
            .map(|t| (t.domain.clone(), t.act.clone()))
            .collect();
        set.retain(|t| !t.slot.is_empty() || !slotted.contains(&(t.domain.clone(), t.act.clone())));
        Self(set)
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn act_types(&self) -> BTreeSet<&str> {
        self.0.iter().map(|t| t.act.as_str()).collect()
    }

    pub fn slot_names(&self) -> BTreeSet<&str> {
        self.0
            .iter()
            .filter(|t| !t.slot.is_empty())
            .map(|t| t.slot.as_str())
            .collect()
    }

    pub fn domains(&self) -> BTreeSet<&str> {
        self.0.iter().map(|t| t.domain.as_str()).collect()
    }
}

pub fn encode_action_span(action: &SystemAction, ontology: &Ontology) -> Vec<String> {
    let mut by_domain: BTreeMap<&String, BTreeMap<&String, Vec<&String>>> = BTreeMap::new();
    for t in action.triples() {
        let acts = by_domain.entry(&t.domain).or_default();
        let slots = acts.entry(&t.act).or_default();
        if !t.slot.is_empty() {
            slots.push(&t.slot);
        }
    }
    let mut out = Vec::new();
    for domain in sort_domains(ontology, by_domain.keys().copied()) {
        out.push(marker(domain));
        let acts = &by_domain[domain];
        let mut act_names: Vec<&&String> = acts.keys().collect();
        act_names.sort_by(|a, b| {
            let rank = |x: &str| ontology.act_index(x).unwrap_or(usize::MAX);
            rank(a).cmp(&rank(b)).then_with(|| a.cmp(b))
        });
        for act in act_names {
            out.push(marker(act));
            let mut slots = acts[*act].clone();
            slots.sort_by(|a, b| {
                let rank = |x: &str| ontology.slot_index(x).unwrap_or(usize::MAX);
                rank(a).cmp(&rank(b)).then_with(|| a.cmp(b))
            });
            out.extend(slots.into_iter().cloned());
        }
    }
    out
}

pub fn action_span_string(action: &SystemAction, ontology: &Ontology) -> String {
    encode_action_span(action, ontology).join(" ")
}

/// Parses an action span. Acts appearing before any domain marker belong to
/// `default_domain` when one is given.
pub fn decode_action_span<S: AsRef<str>>(
    tokens: &[S],
    ontology: &Ontology,
    default_domain: Option<&str>,
) -> Result<SystemAction, SpanError> {
    let mut triples = Vec::new();
    let mut domain: Option<String> = default_domain.map(str::to_string);
    let mut act: Option<(String, bool)> = None;
    let close = |d: &Option<String>, act: &mut Option<(String, bool)>, triples: &mut Vec<Triple>| {
        if let (Some(d), Some((a, false))) = (d, act.take()) {
            triples.push(Triple::new(d, &a, ""));
        }
    };
    for tok in tokens.iter().map(AsRef::as_ref) {
        if let Some(name) = parse_marker(tok) {
            close(&domain, &mut act, &mut triples);
            if ontology.domain(name).is_some() {
                domain = Some(name.to_string());
            } else if ontology.has_act(name) {
                if domain.is_none() {
                    return Err(SpanError::OutsideDomain(tok.to_string()));
                }
                act = Some((name.to_string(), false));
            } else {
                return Err(SpanError::UnknownMarker(name.to_string()));
            }
            continue;
        }
        let (Some(d), Some((a, has_slot))) = (&domain, &mut act) else {
            return Err(SpanError::OutsideAct(tok.to_string()));
        };
        if !ontology.domain(d).is_some_and(|spec| spec.has_slot(tok)) {
            return Err(SpanError::UnknownSlot {
                domain: d.clone(),
                slot: tok.to_string(),
            });
        }
        *has_slot = true;
        triples.push(Triple::new(d, a, tok));
    }
    close(&domain, &mut act, &mut triples);
    Ok(SystemAction::from_triples(triples))
}

pub fn parse_action_span(
    span: &str,
    ontology: &Ontology,
    default_domain: Option<&str>,
) -> Result<SystemAction, SpanError> {
    let tokens: Vec<&str> = span.split_whitespace().collect();
    decode_action_span(&tokens, ontology, default_domain)
}

/// The domain whose slot values changed most recently. Added or modified
/// values count as a change; ties go to the earliest domain in ontology order.
pub fn active_domain(
    previous: &BeliefState,
    current: &BeliefState,
    previous_domain: &str,
    ontology: &Ontology,
) -> String {
    let changed = current.iter().filter(|(d, slots)| {
        slots
            .iter()
            .any(|(s, v)| previous.get(d, s) != Some(v.as_str()))
    });
    changed
        .map(|(d, _)| d)
        .min_by(|a, b| {
            ontology
                .domain_rank(a)
                .cmp(&ontology.domain_rank(b))
                .then_with(|| a.cmp(b))
        })
        .cloned()
        .unwrap_or_else(|| previous_domain.to_string())
}

/// Number of match-count buckets: {0}, {1}, {2-3}, {4-10}, {>10}.
pub const DB_BUCKETS: usize = 5;

/// One-hot match-count bucket plus a booking-availability bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DbVector {
    bucket: u8,
    booking_available: bool,
}

impl DbVector {
    pub fn from_count(matches: usize, booking_available: bool) -> Self {
        Self {
            bucket: Self::bucket_for(matches) as u8,
            booking_available,
        }
    }

    pub(crate) fn from_parts(bucket: usize, booking_available: bool) -> Option<Self> {
        (bucket < DB_BUCKETS).then_some(Self {
            bucket: bucket as u8,
            booking_available,
        })
    }

    pub fn bucket_for(matches: usize) -> usize {
        match matches {
            0 => 0,
            1 => 1,
            2..=3 => 2,
            4..=10 => 3,
            _ => 4,
        }
    }

    pub fn bucket(&self) -> usize {
        self.bucket as usize
    }

    pub fn booking_available(&self) -> bool {
        self.booking_available
    }

    pub fn one_hot(&self) -> [u8; DB_BUCKETS + 1] {
        let mut v = [0; DB_BUCKETS + 1];
        v[self.bucket()] = 1;
        v[DB_BUCKETS] = u8::from(self.booking_available);
        v
    }
}

/// Records of `domain` consistent with the belief, or `None` when the domain has no database.
pub fn match_count(
    belief: &BeliefState,
    domain: &str,
    db: &VenueDatabase,
    ontology: &Ontology,
) -> Option<usize> {
    if !db.has_domain(domain) {
        return None;
    }
    let empty = BTreeMap::new();
    let constraints = belief.domain(domain).unwrap_or(&empty);
    Some(db.query(ontology, domain, constraints).count())
}

/// Domains without a database (taxi, general, ...) report the count-1 bucket.
pub fn db_vector(
    belief: &BeliefState,
    domain: &str,
    db: &VenueDatabase,
    ontology: &Ontology,
    booking_ok: bool,
) -> DbVector {
    let count = match_count(belief, domain, db, ontology).unwrap_or(1);
    DbVector::from_count(count, booking_ok)
}

/// Every token a downstream span model may emit: domain and act markers,
/// slot names and delexicalization placeholders.
pub fn span_vocabulary(ontology: &Ontology) -> Vec<String> {
    let mut out: Vec<String> = ontology.domain_names().map(marker).collect();
    out.extend(ontology.acts().iter().map(|a| marker(a)));
    out.extend(ontology.slots().iter().cloned());
    out.extend(ontology.slots().iter().map(|s| crate::delex::placeholder(s)));
    out
}
