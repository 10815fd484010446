//! Dialog states and the one-state-to-many-actions mapping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dialog, Ontology, Triple, VenueDatabase};
use crate::error::{Error, Result};
use crate::io;
use crate::spans::{self, BeliefState, DbVector, SystemAction};

/// The policy input: active domain, belief state, DB result vector and the
/// current user acts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DialogState {
    pub domain: String,
    pub belief: BeliefState,
    pub db: DbVector,
    pub user_acts: BTreeSet<Triple>,
}

impl DialogState {
    pub fn key(&self) -> StateKey {
        canonical_key(self)
    }

    pub fn user_act_signature(&self) -> String {
        self.user_acts
            .iter()
            .map(|t| format!("{}/{}/{}", t.domain, t.act, t.slot))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Domain assumed before the first turn: the first domain the user acts
/// mention, else the first goal domain, else the first ontology domain.
fn initial_domain(dialog: &Dialog, ontology: &Ontology) -> String {
    dialog
        .turns
        .first()
        .and_then(|t| t.user_acts.first())
        .map(|t| t.domain.clone())
        .or_else(|| dialog.goal_domains(ontology).first().map(|d| d.to_string()))
        .or_else(|| ontology.domain_names().next().map(str::to_string))
        .unwrap_or_default()
}

/// States for every turn of a dialog. The active domain is carried forward
/// from turn to turn, so states are built in order.
pub fn dialog_states(dialog: &Dialog, ontology: &Ontology, db: &VenueDatabase) -> Vec<DialogState> {
    let mut prev_belief = BeliefState::new();
    let mut prev_domain = initial_domain(dialog, ontology);
    let mut out = Vec::with_capacity(dialog.turns.len());
    for turn in &dialog.turns {
        let domain = spans::active_domain(&prev_belief, &turn.belief, &prev_domain, ontology);
        let count = spans::match_count(&turn.belief, &domain, db, ontology);
        let booking_requested = match (ontology.domain(&domain), turn.belief.domain(&domain)) {
            (Some(spec), Some(slots)) => slots.keys().any(|s| spec.is_book_slot(s)),
            _ => false,
        };
        let booking_ok = booking_requested && count.unwrap_or(1) > 0;
        out.push(DialogState {
            domain: domain.clone(),
            belief: turn.belief.clone(),
            db: DbVector::from_count(count.unwrap_or(1), booking_ok),
            user_acts: turn.user_acts.iter().cloned().collect(),
        });
        prev_belief = turn.belief.clone();
        prev_domain = domain;
    }
    out
}

pub fn build_state(dialog: &Dialog, turn: usize, ontology: &Ontology, db: &VenueDatabase) -> Result<DialogState> {
    if turn >= dialog.turns.len() {
        return Err(Error::Invalid(format!(
            "dialog {} has no turn {turn}",
            dialog.dialog_id
        )));
    }
    let mut d = dialog.clone();
    d.turns.truncate(turn + 1);
    Ok(dialog_states(&d, ontology, db).pop().unwrap())
}

/// Canonical text form of a [`DialogState`].
///
/// `D=<domain>|B=<domain>/<slot>=<value>;...|DB=<bucket>/<booking>|U=<domain>/<act>/<slot>;...`
/// with belief and user acts sorted. Values escape `%`, `;` and `|`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateKey(String);

impl StateKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn parse(&self) -> Result<DialogState> {
        parse_key(&self.0)
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for StateKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let state = parse_key(s)?;
        let key = canonical_key(&state);
        if key.0 != s {
            return Err(Error::Invalid(format!("state key {s:?} is not canonical")));
        }
        Ok(key)
    }
}

fn escape(v: &str) -> String {
    v.replace('%', "%25").replace(';', "%3B").replace('|', "%7C")
}

fn unescape(v: &str) -> String {
    v.replace("%7C", "|").replace("%3B", ";").replace("%25", "%")
}

pub fn canonical_key(state: &DialogState) -> StateKey {
    let belief = state
        .belief
        .entries()
        .map(|(d, s, v)| format!("{d}/{s}={}", escape(v)))
        .collect::<Vec<_>>()
        .join(";");
    StateKey(format!(
        "D={}|B={}|DB={}/{}|U={}",
        state.domain,
        belief,
        state.db.bucket(),
        u8::from(state.db.booking_available()),
        state.user_act_signature()
    ))
}

fn parse_key(s: &str) -> Result<DialogState> {
    let bad = || Error::Invalid(format!("malformed state key {s:?}"));
    let parts: Vec<&str> = s.split('|').collect();
    let [d, b, db, u] = parts.as_slice() else {
        return Err(bad());
    };
    let domain = d.strip_prefix("D=").ok_or_else(bad)?.to_string();
    let mut belief = BeliefState::new();
    let b = b.strip_prefix("B=").ok_or_else(bad)?;
    for item in b.split(';').filter(|x| !x.is_empty()) {
        let (ds, value) = item.split_once('=').ok_or_else(bad)?;
        let (bd, bs) = ds.split_once('/').ok_or_else(bad)?;
        belief.insert(bd, bs, &unescape(value));
    }
    let (bucket, booking) = db
        .strip_prefix("DB=")
        .and_then(|x| x.split_once('/'))
        .ok_or_else(bad)?;
    let bucket: usize = bucket.parse().map_err(|_| bad())?;
    let booking = match booking {
        "0" => false,
        "1" => true,
        _ => return Err(bad()),
    };
    let db = DbVector::from_parts(bucket, booking).ok_or_else(bad)?;
    let mut user_acts = BTreeSet::new();
    for item in u.strip_prefix("U=").ok_or_else(bad)?.split(';').filter(|x| !x.is_empty()) {
        let mut it = item.splitn(3, '/');
        let (Some(a), Some(b), Some(c)) = (it.next(), it.next(), it.next()) else {
            return Err(bad());
        };
        user_acts.insert(Triple::new(a, b, c));
    }
    Ok(DialogState {
        domain,
        belief,
        db,
        user_acts,
    })
}

/// A valid action for a state with its frequency and where it was seen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub action_span: String,
    pub count: usize,
    pub sources: Vec<(String, usize)>,
}

impl ActionEntry {
    pub fn action(&self, ontology: &Ontology) -> Result<SystemAction> {
        Ok(spans::parse_action_span(&self.action_span, ontology, None)?)
    }
}

/// State key → V(S), the distinct actions observed under that state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateActionMap {
    states: BTreeMap<StateKey, Vec<ActionEntry>>,
}

impl StateActionMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn record(&mut self, key: StateKey, action_span: String, source: (String, usize)) {
        let entries = self.states.entry(key).or_default();
        match entries.binary_search_by(|e| e.action_span.cmp(&action_span)) {
            Ok(i) => {
                let e = &mut entries[i];
                e.count += 1;
                let pos = e.sources.binary_search(&source).unwrap_or_else(|p| p);
                e.sources.insert(pos, source);
            }
            Err(i) => entries.insert(
                i,
                ActionEntry {
                    action_span,
                    count: 1,
                    sources: vec![source],
                },
            ),
        }
    }

    /// Union of two maps. Associative and commutative.
    pub fn merge(mut self, other: StateActionMap) -> StateActionMap {
        for (key, entries) in other.states {
            for e in entries {
                let mine = self.states.entry(key.clone()).or_default();
                match mine.binary_search_by(|x| x.action_span.cmp(&e.action_span)) {
                    Ok(i) => {
                        mine[i].count += e.count;
                        mine[i].sources.extend(e.sources);
                        mine[i].sources.sort();
                    }
                    Err(i) => mine.insert(i, e),
                }
            }
        }
        self
    }

    pub fn valid_actions(&self, key: &StateKey) -> Option<&[ActionEntry]> {
        self.states.get(key).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateKey, &Vec<ActionEntry>)> {
        self.states.iter()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Ground-truth action of a turn as a canonical span string.
pub fn turn_action_span(dialog: &Dialog, turn: usize, ontology: &Ontology) -> String {
    let action = SystemAction::from_triples(dialog.turns[turn].sys_acts.iter().cloned());
    spans::action_span_string(&action, ontology)
}

pub fn build_state_action_map(
    dialogs: &[Dialog],
    ontology: &Ontology,
    db: &VenueDatabase,
) -> StateActionMap {
    dialogs
        .par_iter()
        .map(|d| {
            let mut m = StateActionMap::new();
            for (t, s) in dialog_states(d, ontology, db).iter().enumerate() {
                m.record(
                    s.key(),
                    turn_action_span(d, t, ontology),
                    (d.dialog_id.clone(), t),
                );
            }
            m
        })
        .reduce(StateActionMap::new, StateActionMap::merge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn guesthouse_state() {
        let ont = synth::ontology();
        let db = synth::database();
        let dialogs = synth::fixture_corpus();
        let d = dialogs.iter().find(|d| d.dialog_id == "guesthouse").unwrap();
        let t = d.turns.len() - 1;
        let s = build_state(d, t, &ont, &db).unwrap();
        assert_eq!(s.domain, "hotel");
        assert_eq!(s.db.bucket(), 3);
    }

    #[test]
    fn degenerate_first_turn_uses_goal_domain() {
        let ont = synth::ontology();
        let db = synth::database();
        let mut d = synth::fixture_corpus().remove(0);
        d.turns.truncate(1);
        d.turns[0].user_acts.clear();
        d.turns[0].belief = BeliefState::new();
        let s = build_state(&d, 0, &ont, &db).unwrap();
        assert!(s.user_acts.is_empty());
        assert!(s.belief.is_empty());
        assert_eq!(s.domain, d.goal_domains(&ont)[0]);
    }

    #[test]
    fn key_is_canonical_and_parses_back() {
        let ont = synth::ontology();
        let db = synth::database();
        for d in synth::fixture_corpus() {
            for s in dialog_states(&d, &ont, &db) {
                let k = s.key();
                assert_eq!(k.parse().unwrap(), s);
                assert_eq!(k.as_str().parse::<StateKey>().unwrap(), k);
            }
        }
    }

    #[test]
    fn key_ignores_user_act_order_and_sees_values() {
        let a = DialogState {
            domain: "hotel".into(),
            belief: BeliefState::new().with("hotel", "area", "north"),
            db: DbVector::from_count(3, false),
            user_acts: [Triple::new("hotel", "inform", "area"), Triple::new("hotel", "request", "phone")]
                .into_iter()
                .collect(),
        };
        let mut b = a.clone();
        b.user_acts = [Triple::new("hotel", "request", "phone"), Triple::new("hotel", "inform", "area")]
            .into_iter()
            .collect();
        assert_eq!(a.key(), b.key());
        let mut c = a.clone();
        c.belief = BeliefState::new().with("hotel", "area", "south");
        assert_ne!(a.key(), c.key());
    }

    #[test]
    fn escaped_values_round_trip() {
        let s = DialogState {
            domain: "hotel".into(),
            belief: BeliefState::new().with("hotel", "name", "a;b|c%d=e/f"),
            db: DbVector::from_count(0, true),
            user_acts: BTreeSet::new(),
        };
        assert_eq!(s.key().parse().unwrap(), s);
    }

    #[test]
    fn counts_nine_to_one() {
        let ont = synth::ontology();
        let db = synth::database();
        let dialogs = synth::balance_corpus(9, 1);
        let m = build_state_action_map(&dialogs, &ont, &db);
        assert_eq!(m.len(), 1);
        let (_, entries) = m.iter().next().unwrap();
        let mut counts: Vec<usize> = entries.iter().map(|e| e.count).collect();
        counts.sort();
        assert_eq!(counts, vec![1, 9]);
    }

    #[test]
    fn shared_state_two_actions() {
        let ont = synth::ontology();
        let db = synth::database();
        let m = build_state_action_map(&synth::balance_corpus(1, 1), &ont, &db);
        let (_, entries) = m.iter().next().unwrap();
        assert_eq!(entries.iter().map(|e| e.count).collect::<Vec<_>>(), vec![1, 1]);
    }
}
