//! Multi-action data augmentation.
//!
//! For every turn, the valid actions of its state are grouped by act-type set
//! and up to `k` actions are drawn uniformly from each group. The turn then
//! contributes one training pair per drawn action, the ground truth always
//! among them.

use std::collections::{BTreeSet, HashMap};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Dialog, Ontology, VenueDatabase};
use crate::error::{Error, Result};
use crate::spans::SystemAction;
use crate::statemap::{self, StateActionMap, StateKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Per-group sample cap.
    pub k: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { k: 3, seed: 0 }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Actions of V(S) sharing one act-type set, as indices into V(S).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActGroup {
    pub act_types: BTreeSet<String>,
    pub members: Vec<usize>,
}

/// Partitions actions by their set of act types. Groups appear in order of
/// their first member.
pub fn group_by_act(actions: &[SystemAction]) -> Vec<ActGroup> {
    let mut groups: Vec<ActGroup> = Vec::new();
    for (i, a) in actions.iter().enumerate() {
        let acts: BTreeSet<String> = a.act_types().into_iter().map(str::to_string).collect();
        match groups.iter_mut().find(|g| g.act_types == acts) {
            Some(g) => g.members.push(i),
            None => groups.push(ActGroup {
                act_types: acts,
                members: vec![i],
            }),
        }
    }
    groups
}

/// Draws `min(k, |G|)` distinct members uniformly from each group. When
/// `ground_truth` belongs to a group but was not drawn, it replaces one drawn
/// member of that group chosen uniformly. Returns sorted indices into V(S).
pub fn sample_action_set<R: Rng + ?Sized>(
    groups: &[ActGroup],
    k: usize,
    rng: &mut R,
    ground_truth: Option<usize>,
) -> Vec<usize> {
    let mut chosen = Vec::new();
    for g in groups {
        let m = k.min(g.members.len());
        let mut picked: Vec<usize> = index::sample(rng, g.members.len(), m)
            .into_iter()
            .map(|i| g.members[i])
            .collect();
        if let Some(gt) = ground_truth {
            if g.members.contains(&gt) && !picked.contains(&gt) {
                let slot = rng.gen_range(0..picked.len());
                picked[slot] = gt;
            }
        }
        chosen.extend(picked);
    }
    chosen.sort_unstable();
    chosen
}

fn derive_rng(label: &str, seed: u64, dialog_id: &str, turn: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update([0u8]);
    h.update(seed.to_le_bytes());
    h.update((dialog_id.len() as u64).to_le_bytes());
    h.update(dialog_id.as_bytes());
    h.update((turn as u64).to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

/// Independent random stream for one turn, so results do not depend on the
/// order or parallelism in which turns are processed.
pub fn turn_rng(seed: u64, dialog_id: &str, turn: usize) -> ChaCha8Rng {
    derive_rng("augment", seed, dialog_id, turn)
}

/// Decoding seed for one turn, derived from the run seed. Sampling every turn
/// from the same seed would correlate the draws across turns.
pub fn turn_seed(seed: u64, dialog_id: &str, turn: usize) -> u64 {
    derive_rng("decode", seed, dialog_id, turn).gen()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Gt,
    Aug,
}

/// One training pair of the augmented dataset (one JSONL record).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub dialog_id: String,
    pub turn: usize,
    pub state_key: StateKey,
    pub action_span: String,
    pub origin: Origin,
}

/// Ground-truth pairs only (the unaugmented training set).
pub fn raw_pairs(dialogs: &[Dialog], ontology: &Ontology, db: &VenueDatabase) -> Vec<TrainingPair> {
    dialogs
        .par_iter()
        .flat_map_iter(|d| {
            statemap::dialog_states(d, ontology, db)
                .into_iter()
                .enumerate()
                .map(|(t, s)| TrainingPair {
                    dialog_id: d.dialog_id.clone(),
                    turn: t,
                    state_key: s.key(),
                    action_span: statemap::turn_action_span(d, t, ontology),
                    origin: Origin::Gt,
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn augment_corpus(
    dialogs: &[Dialog],
    ontology: &Ontology,
    db: &VenueDatabase,
    map: &StateActionMap,
    cfg: &AugmentConfig,
) -> Result<Vec<TrainingPair>> {
    cfg.validate()?;
    let mut grouped: HashMap<&StateKey, Vec<ActGroup>> = HashMap::new();
    for (key, entries) in map.iter() {
        let actions = entries
            .iter()
            .map(|e| e.action(ontology))
            .collect::<Result<Vec<_>>>()?;
        grouped.insert(key, group_by_act(&actions));
    }

    let per_dialog: Vec<Result<Vec<TrainingPair>>> = dialogs
        .par_iter()
        .map(|d| {
            let mut out = Vec::new();
            for (t, s) in statemap::dialog_states(d, ontology, db).into_iter().enumerate() {
                let key = s.key();
                let entries = map
                    .valid_actions(&key)
                    .ok_or_else(|| Error::MissingStateKey(key.to_string()))?;
                let gt_span = statemap::turn_action_span(d, t, ontology);
                let gt = entries
                    .iter()
                    .position(|e| e.action_span == gt_span)
                    .ok_or_else(|| {
                        Error::Invalid(format!(
                            "dialog {}, turn {t}: action {gt_span:?} missing from the map entry of its state",
                            d.dialog_id
                        ))
                    })?;
                let mut rng = turn_rng(cfg.seed, &d.dialog_id, t);
                let picked = sample_action_set(&grouped[&key], cfg.k, &mut rng, Some(gt));
                let pair = |i: usize, origin| TrainingPair {
                    dialog_id: d.dialog_id.clone(),
                    turn: t,
                    state_key: key.clone(),
                    action_span: entries[i].action_span.clone(),
                    origin,
                };
                out.push(pair(gt, Origin::Gt));
                out.extend(picked.into_iter().filter(|&i| i != gt).map(|i| pair(i, Origin::Aug)));
            }
            Ok(out)
        })
        .collect();
    let mut pairs = Vec::new();
    for p in per_dialog {
        pairs.extend(p?);
    }
    Ok(pairs)
}
