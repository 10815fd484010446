//! Normalized corpus, ontology and venue database.
//!
//! Everything is lowercased and whitespace-normalized at load time; the rest of
//! the crate assumes that and compares strings directly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::delex::Substitution;
use crate::error::{Error, Location, Result};
use crate::io;
use crate::spans::BeliefState;

/// Value matching every candidate during database lookups.
pub const DONTCARE: &str = "dontcare";

pub fn normalize_text(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| {
            !c.is_whitespace() && !c.is_uppercase() && !"[]<>/=;|%".contains(c)
        })
}

/// A domain-act-slot triple. The slot is empty for slotless acts such as
/// `reqmore` or `offerbook`. Serialized as a three-element array.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(String, String, String)", into = "(String, String, String)")]
pub struct Triple {
    pub domain: String,
    pub act: String,
    pub slot: String,
}

impl Triple {
    pub fn new(domain: &str, act: &str, slot: &str) -> Self {
        Self {
            domain: domain.to_string(),
            act: act.to_string(),
            slot: slot.to_string(),
        }
    }
}

impl From<(String, String, String)> for Triple {
    fn from((domain, act, slot): (String, String, String)) -> Self {
        Self { domain, act, slot }
    }
}

impl From<Triple> for (String, String, String) {
    fn from(t: Triple) -> Self {
        (t.domain, t.act, t.slot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformableSlot {
    pub slot: String,
    /// Closed value set; `None` for open slots such as names or times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
    /// Booking slots (day, people, stay, ...) constrain a reservation, not the venue search.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub book: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    #[serde(default)]
    pub informable: Vec<InformableSlot>,
    #[serde(default)]
    pub requestable: Vec<String>,
}

impl DomainSpec {
    pub fn has_slot(&self, slot: &str) -> bool {
        self.is_informable(slot) || self.requestable.iter().any(|s| s == slot)
    }

    pub fn is_informable(&self, slot: &str) -> bool {
        self.informable.iter().any(|s| s.slot == slot)
    }

    pub fn is_book_slot(&self, slot: &str) -> bool {
        self.informable.iter().any(|s| s.slot == slot && s.book)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OntologyFile {
    domains: Vec<DomainSpec>,
    #[serde(default)]
    slots: Vec<String>,
    acts: Vec<String>,
}

/// Domain, slot and act vocabularies. The order of each list is the canonical
/// order used by span serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "OntologyFile", into = "OntologyFile")]
pub struct Ontology {
    domains: Vec<DomainSpec>,
    slots: Vec<String>,
    acts: Vec<String>,
}

impl From<Ontology> for OntologyFile {
    fn from(o: Ontology) -> Self {
        OntologyFile {
            domains: o.domains,
            slots: o.slots,
            acts: o.acts,
        }
    }
}

impl TryFrom<OntologyFile> for Ontology {
    type Error = String;

    fn try_from(f: OntologyFile) -> Result<Self, String> {
        Ontology::new(f.domains, f.slots, f.acts).map_err(|e| e.to_string())
    }
}

impl Ontology {
    /// Builds and validates an ontology. An empty `slots` list is derived from
    /// the domains in order of first appearance.
    pub fn new(domains: Vec<DomainSpec>, slots: Vec<String>, acts: Vec<String>) -> Result<Self> {
        let bad = |m: String| Error::validation(Location::default(), m);
        let mut domains = domains;
        for d in &mut domains {
            d.name = normalize_text(&d.name);
            for s in &mut d.informable {
                s.slot = normalize_text(&s.slot);
                if let Some(values) = &mut s.values {
                    for v in values.iter_mut() {
                        *v = normalize_text(v);
                    }
                }
            }
            for s in &mut d.requestable {
                *s = normalize_text(s);
            }
        }
        let acts: Vec<String> = acts.iter().map(|a| normalize_text(a)).collect();
        let mut slots: Vec<String> = slots.iter().map(|s| normalize_text(s)).collect();

        if acts.is_empty() {
            return Err(bad("act vocabulary is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for d in &domains {
            if !is_identifier(&d.name) {
                return Err(bad(format!("invalid domain name {:?}", d.name)));
            }
            if !seen.insert(d.name.as_str()) {
                return Err(bad(format!("duplicate domain {:?}", d.name)));
            }
        }
        let mut seen_acts = BTreeSet::new();
        for a in &acts {
            if !is_identifier(a) {
                return Err(bad(format!("invalid act name {a:?}")));
            }
            if !seen_acts.insert(a.as_str()) {
                return Err(bad(format!("duplicate act {a:?}")));
            }
            if seen.contains(a.as_str()) {
                return Err(bad(format!("{a:?} is both a domain and an act")));
            }
        }

        let mut domain_slots = Vec::new();
        for d in &domains {
            let names = d
                .informable
                .iter()
                .map(|s| &s.slot)
                .chain(d.requestable.iter());
            for s in names {
                if !is_identifier(s) {
                    return Err(bad(format!("invalid slot name {s:?} in {}", d.name)));
                }
                if !domain_slots.contains(s) {
                    domain_slots.push(s.clone());
                }
            }
            let mut req = BTreeSet::new();
            if let Some(s) = d.requestable.iter().find(|s| !req.insert(s.as_str())) {
                return Err(bad(format!("duplicate requestable slot {s:?} in {}", d.name)));
            }
            let mut inf = BTreeSet::new();
            for s in &d.informable {
                if !inf.insert(s.slot.as_str()) {
                    return Err(bad(format!("duplicate informable slot {:?} in {}", s.slot, d.name)));
                }
                for v in s.values.iter().flatten() {
                    check_value(d, &s.slot, v).map_err(bad)?;
                }
            }
        }
        if slots.is_empty() {
            slots = domain_slots.clone();
        } else {
            let mut uniq = BTreeSet::new();
            for s in &slots {
                if !uniq.insert(s.as_str()) {
                    return Err(bad(format!("duplicate slot {s:?} in slot order")));
                }
                if !domain_slots.contains(s) {
                    return Err(bad(format!("slot {s:?} does not belong to any domain")));
                }
            }
            for s in &domain_slots {
                if !uniq.contains(s.as_str()) {
                    return Err(bad(format!("slot {s:?} missing from slot order")));
                }
            }
        }
        Ok(Self {
            domains,
            slots,
            acts,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn domains(&self) -> &[DomainSpec] {
        &self.domains
    }

    pub fn domain_names(&self) -> impl Iterator<Item = &str> {
        self.domains.iter().map(|d| d.name.as_str())
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn acts(&self) -> &[String] {
        &self.acts
    }

    pub fn domain(&self, name: &str) -> Option<&DomainSpec> {
        self.domains.iter().find(|d| d.name == name)
    }

    pub fn domain_index(&self, name: &str) -> Option<usize> {
        self.domains.iter().position(|d| d.name == name)
    }

    pub fn act_index(&self, act: &str) -> Option<usize> {
        self.acts.iter().position(|a| a == act)
    }

    pub fn slot_index(&self, slot: &str) -> Option<usize> {
        self.slots.iter().position(|s| s == slot)
    }

    pub fn has_act(&self, act: &str) -> bool {
        self.act_index(act).is_some()
    }

    /// Position of an informable slot within its domain (belief-span order).
    pub fn belief_slot_index(&self, domain: &str, slot: &str) -> Option<usize> {
        self.domain(domain)?
            .informable
            .iter()
            .position(|s| s.slot == slot)
    }

    /// Index used to order domains; unknown names sort after every known one.
    pub(crate) fn domain_rank(&self, name: &str) -> usize {
        self.domain_index(name).unwrap_or(usize::MAX)
    }

    pub fn validate_triple(&self, t: &Triple) -> std::result::Result<(), String> {
        let Some(d) = self.domain(&t.domain) else {
            return Err(format!("unknown domain {:?}", t.domain));
        };
        if !self.has_act(&t.act) {
            return Err(format!("unknown act {:?}", t.act));
        }
        if !t.slot.is_empty() && !d.has_slot(&t.slot) {
            return Err(format!("unknown slot {:?} for domain {:?}", t.slot, t.domain));
        }
        Ok(())
    }

    pub fn validate_belief(&self, b: &BeliefState) -> std::result::Result<(), String> {
        for (domain, slots) in b.iter() {
            let Some(d) = self.domain(domain) else {
                return Err(format!("unknown domain {domain:?}"));
            };
            for (slot, value) in slots {
                if !d.is_informable(slot) {
                    return Err(format!("unknown slot {slot:?} for domain {domain:?}"));
                }
                check_value(d, slot, value)?;
            }
        }
        Ok(())
    }
}

/// Belief values must be non-empty and must not contain tokens that the
/// belief-span grammar would read as slot names or markers.
fn check_value(d: &DomainSpec, slot: &str, value: &str) -> std::result::Result<(), String> {
    if value.is_empty() {
        return Err(format!("empty value for {}.{slot}", d.name));
    }
    for tok in value.split(' ') {
        if d.is_informable(tok) {
            return Err(format!(
                "value {value:?} of {}.{slot} contains slot name {tok:?}",
                d.name
            ));
        }
        if tok.starts_with('[') && tok.ends_with(']') {
            return Err(format!("value {value:?} of {}.{slot} looks like a marker", d.name));
        }
    }
    Ok(())
}

pub type Record = BTreeMap<String, String>;

/// Returns the identifying name (or id) of a venue record.
pub fn entity_name(record: &Record) -> Option<&str> {
    record
        .get("name")
        .or_else(|| record.get("id"))
        .map(String::as_str)
}

/// Whether a record satisfies every searchable constraint. `dontcare` and
/// booking slots are ignored; a record lacking a constrained slot does not match.
pub fn record_matches<'a>(
    spec: Option<&DomainSpec>,
    record: &Record,
    constraints: impl IntoIterator<Item = (&'a String, &'a String)>,
) -> bool {
    constraints.into_iter().all(|(slot, value)| {
        if value == DONTCARE || spec.is_some_and(|d| d.is_book_slot(slot)) {
            return true;
        }
        record.get(slot) == Some(value)
    })
}

/// Per-domain venue records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VenueDatabase {
    domains: BTreeMap<String, Vec<Record>>,
}

impl VenueDatabase {
    pub fn new(domains: BTreeMap<String, Vec<Record>>, ontology: &Ontology) -> Result<Self> {
        let mut db = Self { domains };
        db.normalize();
        db.validate(ontology)?;
        Ok(db)
    }

    pub fn load(path: &Path, ontology: &Ontology) -> Result<Self> {
        let raw: BTreeMap<String, Vec<Record>> = io::read_json(path)?;
        Self::new(raw, ontology)
    }

    fn normalize(&mut self) {
        let domains = std::mem::take(&mut self.domains);
        self.domains = domains
            .into_iter()
            .map(|(d, recs)| {
                let recs = recs
                    .into_iter()
                    .map(|r| {
                        r.into_iter()
                            .map(|(k, v)| (normalize_text(&k), normalize_text(&v)))
                            .collect()
                    })
                    .collect();
                (normalize_text(&d), recs)
            })
            .collect();
    }

    fn validate(&self, ontology: &Ontology) -> Result<()> {
        let bad = |m: String| Error::validation(Location::default(), m);
        for (domain, records) in &self.domains {
            let spec = ontology
                .domain(domain)
                .ok_or_else(|| bad(format!("database: unknown domain {domain:?}")))?;
            let mut names = BTreeSet::new();
            for (i, r) in records.iter().enumerate() {
                for slot in r.keys() {
                    if !spec.has_slot(slot) {
                        return Err(bad(format!(
                            "database: record {i} of {domain:?} has unknown slot {slot:?}"
                        )));
                    }
                }
                let name = entity_name(r).ok_or_else(|| {
                    bad(format!("database: record {i} of {domain:?} has no name or id"))
                })?;
                if !names.insert(name) {
                    return Err(bad(format!("database: duplicate entity {name:?} in {domain:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn has_domain(&self, domain: &str) -> bool {
        self.domains.contains_key(domain)
    }

    pub fn records(&self, domain: &str) -> &[Record] {
        self.domains.get(domain).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<Record>)> {
        self.domains.iter()
    }

    /// Records of `domain` satisfying `constraints`, in database order.
    pub fn query<'a>(
        &'a self,
        ontology: &Ontology,
        domain: &str,
        constraints: &'a BTreeMap<String, String>,
    ) -> impl Iterator<Item = &'a Record> + 'a {
        let spec = ontology.domain(domain).cloned();
        self.records(domain)
            .iter()
            .filter(move |r| record_matches(spec.as_ref(), r, constraints))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGoal {
    #[serde(default)]
    pub inform: BTreeMap<String, String>,
    #[serde(default)]
    pub request: Vec<String>,
    #[serde(default)]
    pub book: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub user: String,
    #[serde(default)]
    pub user_acts: Vec<Triple>,
    #[serde(default)]
    pub belief: BeliefState,
    #[serde(default)]
    pub sys_acts: Vec<Triple>,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delex_response: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub substitutions: Vec<Substitution>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialog {
    pub dialog_id: String,
    #[serde(default)]
    pub goal: BTreeMap<String, DomainGoal>,
    pub turns: Vec<Turn>,
}

impl Dialog {
    /// Goal domains in ontology order.
    pub fn goal_domains<'a>(&'a self, ontology: &Ontology) -> Vec<&'a str> {
        let mut ds: Vec<&str> = self.goal.keys().map(String::as_str).collect();
        ds.sort_by_key(|d| ontology.domain_rank(d));
        ds
    }

    fn normalize(&mut self) {
        self.dialog_id = self.dialog_id.trim().to_string();
        let goal = std::mem::take(&mut self.goal);
        self.goal = goal
            .into_iter()
            .map(|(d, g)| {
                let norm_map = |m: BTreeMap<String, String>| {
                    m.into_iter()
                        .map(|(k, v)| (normalize_text(&k), normalize_text(&v)))
                        .collect()
                };
                let g = DomainGoal {
                    inform: norm_map(g.inform),
                    request: g.request.iter().map(|s| normalize_text(s)).collect(),
                    book: norm_map(g.book),
                };
                (normalize_text(&d), g)
            })
            .collect();
        for t in &mut self.turns {
            t.user = normalize_text(&t.user);
            t.response = normalize_text(&t.response);
            t.delex_response = t.delex_response.as_deref().map(normalize_text);
            let norm_triple = |x: &Triple| {
                Triple::new(
                    &normalize_text(&x.domain),
                    &normalize_text(&x.act),
                    &normalize_text(&x.slot),
                )
            };
            t.user_acts = t.user_acts.iter().map(norm_triple).collect();
            t.sys_acts = t.sys_acts.iter().map(norm_triple).collect();
            t.belief = t.belief.normalized();
        }
    }

    /// Checks every symbol against the ontology. Error messages carry the
    /// dialog id, turn and offending symbol.
    pub fn validate(&self, ontology: &Ontology) -> Result<()> {
        let here = Location::dialog(&self.dialog_id);
        if self.turns.is_empty() {
            return Err(Error::validation(here, "dialog has no turns"));
        }
        for (domain, g) in &self.goal {
            let spec = ontology
                .domain(domain)
                .ok_or_else(|| Error::validation(here.clone(), format!("goal: unknown domain {domain:?}")))?;
            for slot in g.inform.keys().chain(g.book.keys()) {
                if !spec.is_informable(slot) {
                    return Err(Error::validation(
                        here.clone(),
                        format!("goal: unknown slot {slot:?} for domain {domain:?}"),
                    ));
                }
            }
            for slot in &g.request {
                if !spec.has_slot(slot) {
                    return Err(Error::validation(
                        here.clone(),
                        format!("goal: unknown requested slot {slot:?} for domain {domain:?}"),
                    ));
                }
            }
        }
        for (i, t) in self.turns.iter().enumerate() {
            let at = Location::turn(&self.dialog_id, i);
            for tr in t.user_acts.iter().chain(t.sys_acts.iter()) {
                ontology
                    .validate_triple(tr)
                    .map_err(|m| Error::validation(at.clone(), m))?;
            }
            ontology
                .validate_belief(&t.belief)
                .map_err(|m| Error::validation(at.clone(), format!("belief: {m}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CorpusFile {
    pub dialogs: Vec<Dialog>,
}

/// Normalizes and validates dialogs parsed from the corpus schema.
pub fn prepare_dialogs(mut dialogs: Vec<Dialog>, ontology: &Ontology) -> Result<Vec<Dialog>> {
    let mut ids = HashMap::new();
    for d in &mut dialogs {
        d.normalize();
        d.validate(ontology)?;
        if ids.insert(d.dialog_id.clone(), ()).is_some() {
            return Err(Error::validation(
                Location::dialog(&d.dialog_id),
                "duplicate dialog id",
            ));
        }
    }
    Ok(dialogs)
}

pub fn parse_corpus(text: &str, ontology: &Ontology) -> Result<Vec<Dialog>> {
    let file: CorpusFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: "<memory>".into(),
        message: e.to_string(),
    })?;
    prepare_dialogs(file.dialogs, ontology)
}

pub fn load_corpus(path: &Path, ontology: &Ontology) -> Result<Vec<Dialog>> {
    let file: CorpusFile = io::read_json(path)?;
    prepare_dialogs(file.dialogs, ontology)
}

pub fn save_corpus(path: &Path, dialogs: &[Dialog]) -> Result<()> {
    #[derive(Serialize)]
    struct Out<'a> {
        dialogs: &'a [Dialog],
    }
    io::write_json(path, &Out { dialogs })
}

/// Shuffles with `seed` and partitions into train/dev/test. Train and dev get
/// the floor of their share and test takes the remainder. Each part keeps the
/// original corpus order.
pub fn split(
    dialogs: &[Dialog],
    ratios: [f64; 3],
    seed: u64,
) -> Result<(Vec<Dialog>, Vec<Dialog>, Vec<Dialog>)> {
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::Config(format!("split ratios must be positive, got {ratios:?}")));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios must sum to 1, got {total}")));
    }
    let n = dialogs.len();
    // the epsilon keeps e.g. 0.29 * 100 from flooring to 28
    let n_train = ((n as f64) * ratios[0] + 1e-9).floor() as usize;
    let n_dev = (((n as f64) * ratios[1] + 1e-9).floor() as usize).min(n - n_train);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut parts = [
        order[..n_train].to_vec(),
        order[n_train..n_train + n_dev].to_vec(),
        order[n_train + n_dev..].to_vec(),
    ];
    for p in &mut parts {
        p.sort_unstable();
    }
    let take = |idx: &[usize]| idx.iter().map(|&i| dialogs[i].clone()).collect::<Vec<_>>();
    Ok((take(&parts[0]), take(&parts[1]), take(&parts[2])))
}
