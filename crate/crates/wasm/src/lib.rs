//! Browser bindings for three small demos over the built-in fixture data.
//! Every export returns a JSON string; errors come back as `{"error": ...}`.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use mada_core::augment::{self, AugmentConfig};
use mada_core::corpus::{Dialog, Ontology, VenueDatabase};
use mada_core::decode::{self, DecodeConfig, Method};
use mada_core::policy::{self, ActionModel, PolicyConfig, ScoredAction};
use mada_core::statemap::{self, DialogState};
use mada_core::{synth, Result};

#[derive(Serialize)]
struct Scored {
    span: String,
    prob: f64,
}

fn scored(dist: &[ScoredAction]) -> Vec<Scored> {
    dist.iter()
        .map(|a| Scored {
            span: a.span.clone(),
            prob: a.prob,
        })
        .collect()
}

fn to_json(r: Result<serde_json::Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn models(dialogs: &[Dialog], ont: &Ontology, db: &VenueDatabase, seed: u64) -> Result<(ActionModel, ActionModel)> {
    let map = statemap::build_state_action_map(dialogs, ont, db);
    let raw = augment::raw_pairs(dialogs, ont, db);
    let aug = augment::augment_corpus(dialogs, ont, db, &map, &AugmentConfig { k: 3, seed })?;
    let cfg = PolicyConfig::default();
    Ok((policy::train(&raw, ont, &cfg)?, policy::train(&aug, ont, &cfg)?))
}

/// Top-k and nucleus supports of a distribution given as a JSON array of
/// non-negative weights (normalized here).
pub fn nucleus_json(weights: &str, k: usize, p: f64) -> String {
    to_json((|| {
        let w: Vec<f64> = serde_json::from_str(weights)
            .map_err(|e| mada_core::Error::Invalid(format!("weights: {e}")))?;
        let z: f64 = w.iter().sum();
        if w.is_empty() || w.iter().any(|x| !x.is_finite() || *x < 0.0) || z <= 0.0 {
            return Err(mada_core::Error::Invalid("weights must be non-negative with a positive sum".into()));
        }
        if !(p > 0.0 && p <= 1.0) || k == 0 {
            return Err(mada_core::Error::Config("need k >= 1 and 0 < p <= 1".into()));
        }
        let probs: Vec<f64> = w.iter().map(|x| x / z).collect();
        let nucleus = decode::nucleus(&probs, p);
        let mass: f64 = nucleus.iter().map(|&i| probs[i]).sum();
        Ok(json!({
            "probs": probs,
            "top_k": decode::top_k_support(&probs, k),
            "nucleus": nucleus,
            "nucleus_mass": mass,
        }))
    })())
}

/// Trains raw and augmented policies on an `n_first`:`n_second` corpus where
/// one state has two valid actions, and returns both action distributions.
pub fn balance_json(n_first: usize, n_second: usize, seed: u64) -> String {
    to_json((|| {
        if n_first == 0 || n_second == 0 || n_first + n_second > 1000 {
            return Err(mada_core::Error::Config("counts must be in 1..=1000 in total".into()));
        }
        let ont = synth::ontology();
        let db = synth::database();
        let dialogs = synth::balance_corpus(n_first, n_second);
        let (raw, aug) = models(&dialogs, &ont, &db, seed)?;
        let state = statemap::dialog_states(&dialogs[0], &ont, &db).remove(0);
        let dr = raw.action_distribution(&state, &ont);
        let da = aug.action_distribution(&state, &ont);
        Ok(json!({
            "state": state.key().as_str(),
            "raw": { "actions": scored(&dr[..dr.len().min(5)]), "entropy": policy::entropy(&dr) },
            "augmented": { "actions": scored(&da[..da.len().min(5)]), "entropy": policy::entropy(&da) },
        }))
    })())
}

fn demo_state_list(ont: &Ontology, db: &VenueDatabase) -> Vec<DialogState> {
    let mut out: Vec<DialogState> = Vec::new();
    for d in synth::handcrafted_dialogs() {
        for s in statemap::dialog_states(&d, ont, db) {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

/// State keys selectable in the decode demo, in order.
pub fn states_json() -> String {
    let ont = synth::ontology();
    let db = synth::database();
    let keys: Vec<String> = demo_state_list(&ont, &db)
        .iter()
        .map(|s| s.key().as_str().to_string())
        .collect();
    json!(keys).to_string()
}

#[derive(Serialize)]
struct Decoded {
    span: String,
    log_prob: f64,
}

/// Decodes actions for demo state `index` with policies trained on the
/// fixture corpus, with and without augmentation.
#[allow(clippy::too_many_arguments)]
pub fn decode_json(index: usize, method: &str, n: usize, gamma: f64, top_k: usize, top_p: f64, seed: u64) -> String {
    to_json((|| {
        let ont = synth::ontology();
        let db = synth::database();
        let states = demo_state_list(&ont, &db);
        let state = states
            .get(index)
            .ok_or_else(|| mada_core::Error::Invalid(format!("no demo state {index}")))?;
        let cfg = DecodeConfig {
            method: method.parse::<Method>()?,
            n,
            gamma,
            top_k,
            top_p,
            seed,
            ..Default::default()
        };
        cfg.validate()?;
        let (raw, aug) = models(&synth::fixture_corpus(), &ont, &db, 0)?;
        let run = |m: &ActionModel| -> Result<Vec<Decoded>> {
            Ok(decode::decode_multi_action(m, &ont, state, &cfg)?
                .into_iter()
                .map(|a| Decoded {
                    span: a.span,
                    log_prob: a.log_prob,
                })
                .collect())
        };
        let valid: Vec<String> = statemap::build_state_action_map(&synth::fixture_corpus(), &ont, &db)
            .valid_actions(&state.key())
            .map(|v| v.iter().map(|e| e.action_span.clone()).collect())
            .unwrap_or_default();
        Ok(json!({
            "state": state.key().as_str(),
            "valid": valid,
            "raw": run(&raw)?,
            "augmented": run(&aug)?,
        }))
    })())
}

#[wasm_bindgen]
pub fn nucleus(weights: &str, k: usize, p: f64) -> String {
    nucleus_json(weights, k, p)
}

#[wasm_bindgen]
pub fn balance(n_first: usize, n_second: usize, seed: u64) -> String {
    balance_json(n_first, n_second, seed)
}

#[wasm_bindgen]
pub fn states() -> String {
    states_json()
}

#[wasm_bindgen(js_name = decodeState)]
pub fn decode_state(index: usize, method: &str, n: usize, gamma: f64, top_k: usize, top_p: f64, seed: u64) -> String {
    decode_json(index, method, n, gamma, top_k, top_p, seed)
}
