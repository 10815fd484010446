use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use mada_core::augment::{self, AugmentConfig, TrainingPair};
use mada_core::corpus::{self, Dialog, Ontology, VenueDatabase};
use mada_core::decode::{self, DecodeConfig, Method};
use mada_core::delex::{self, ValueIndex};
use mada_core::error::Location;
use mada_core::io;
use mada_core::metrics::{self, MetricReport, Prediction};
use mada_core::policy::{self, ActionModel, PolicyConfig, TemplateBank};
use mada_core::spans;
use mada_core::statemap::{self, DialogState, StateActionMap};
use mada_core::{Error, Result};

use crate::config::FileConfig;
use crate::{Cli, Command, Resources};

/// One line of the decode output.
#[derive(Debug, Serialize, Deserialize)]
struct DecodedTurn {
    dialog_id: String,
    turn: usize,
    state_key: String,
    actions: Vec<DecodedSpan>,
    /// Set when no hypothesis parsed and the most probable actions were used.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    fallback: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct DecodedSpan {
    span: String,
    log_prob: f64,
}

fn load(res: &Resources) -> Result<(Ontology, VenueDatabase)> {
    let ont = Ontology::load(&res.ontology)?;
    let db = VenueDatabase::load(&res.db, &ont)?;
    Ok((ont, db))
}

fn corpus_at(path: &Path, ont: &Ontology) -> Result<Vec<Dialog>> {
    corpus::load_corpus(path, ont)
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        // only fails when a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Ingest {
            res,
            corpus,
            out_dir,
            split,
            seed,
        } => {
            let (ont, _) = load(&res)?;
            let dialogs = corpus_at(&corpus, &ont)?;
            let ratios = match split {
                Some(v) => [v[0], v[1], v[2]],
                None => file.split.ratios.unwrap_or([0.8, 0.1, 0.1]),
            };
            let seed = seed.or(file.split.seed).unwrap_or(0);
            let (train, dev, test) = corpus::split(&dialogs, ratios, seed)?;
            corpus::save_corpus(&out_dir.join("corpus.json"), &dialogs)?;
            corpus::save_corpus(&out_dir.join("train.json"), &train)?;
            corpus::save_corpus(&out_dir.join("dev.json"), &dev)?;
            corpus::save_corpus(&out_dir.join("test.json"), &test)?;
            eprintln!(
                "{} dialogs: {} train, {} dev, {} test",
                dialogs.len(),
                train.len(),
                dev.len(),
                test.len()
            );
            Ok(())
        }
        Command::Delex {
            res,
            corpus,
            out,
            vocab,
        } => {
            let (ont, db) = load(&res)?;
            let mut dialogs = corpus_at(&corpus, &ont)?;
            let index = ValueIndex::build(&ont, &db, &dialogs);
            delex::delexicalize_corpus(&mut dialogs, &index);
            corpus::save_corpus(&out, &dialogs)?;
            if let Some(v) = vocab {
                io::write_json(&v, &spans::span_vocabulary(&ont))?;
            }
            Ok(())
        }
        Command::BuildMap { res, corpus, out } => {
            let (ont, db) = load(&res)?;
            let dialogs = corpus_at(&corpus, &ont)?;
            let map = statemap::build_state_action_map(&dialogs, &ont, &db);
            let multi = map.iter().filter(|(_, v)| v.len() > 1).count();
            map.save(&out)?;
            eprintln!("{} states, {multi} with several valid actions", map.len());
            Ok(())
        }
        Command::Augment {
            res,
            corpus,
            map,
            out,
            k_aug,
            seed,
        } => {
            let (ont, db) = load(&res)?;
            let dialogs = corpus_at(&corpus, &ont)?;
            let map = StateActionMap::load(&map)?;
            let cfg = AugmentConfig {
                k: k_aug.or(file.augment.k).unwrap_or(3),
                seed: seed.or(file.augment.seed).unwrap_or(0),
            };
            let pairs = augment::augment_corpus(&dialogs, &ont, &db, &map, &cfg)?;
            io::write_jsonl(&out, &pairs)?;
            Ok(())
        }
        Command::Train {
            res,
            corpus,
            augmented,
            raw: _,
            out,
            bank,
            alpha,
            lambdas,
        } => {
            let (ont, db) = load(&res)?;
            let dialogs = corpus_at(&corpus, &ont)?;
            let defaults = PolicyConfig::default();
            let cfg = PolicyConfig {
                alpha: alpha.or(file.policy.alpha).unwrap_or(defaults.alpha),
                lambdas: match lambdas {
                    Some(l) => [l[0], l[1], l[2], l[3]],
                    None => file.policy.lambdas.unwrap_or(defaults.lambdas),
                },
            };
            let pairs: Vec<TrainingPair> = match augmented {
                Some(p) => io::read_jsonl(&p)?,
                None => augment::raw_pairs(&dialogs, &ont, &db),
            };
            let model = policy::train(&pairs, &ont, &cfg)?;
            model.save(&out)?;
            if let Some(path) = bank {
                let b = policy::build_template_bank(&dialogs, &ont);
                if b.is_empty() {
                    return Err(Error::Invalid(format!(
                        "{}: no delexicalized responses to build templates from",
                        corpus.display()
                    )));
                }
                b.save(&path)?;
            }
            Ok(())
        }
        Command::Decode {
            res,
            corpus,
            model,
            out,
            method,
            actions,
            gamma,
            top_k,
            top_p,
            max_len,
            seed,
        } => {
            let d = &file.decode;
            let defaults = DecodeConfig::default();
            let method: Method = match method.or_else(|| d.method.clone()) {
                Some(m) => m.parse()?,
                None => defaults.method,
            };
            let cfg = DecodeConfig {
                method,
                n: actions.or(d.actions).unwrap_or(defaults.n),
                gamma: gamma.or(d.gamma).unwrap_or(defaults.gamma),
                top_k: top_k.or(d.top_k).unwrap_or(defaults.top_k),
                top_p: top_p.or(d.top_p).unwrap_or(defaults.top_p),
                max_len: max_len.or(d.max_len).unwrap_or(defaults.max_len),
                seed: seed.or(d.seed).unwrap_or(defaults.seed),
            };
            cfg.validate()?;
            let (ont, db) = load(&res)?;
            let dialogs = corpus_at(&corpus, &ont)?;
            let model = ActionModel::load(&model)?;
            let per_dialog: Vec<Result<Vec<DecodedTurn>>> = dialogs
                .par_iter()
                .map(|dlg| {
                    statemap::dialog_states(dlg, &ont, &db)
                        .iter()
                        .enumerate()
                        .map(|(t, s)| decode_turn(&model, &ont, dlg, t, s, &cfg))
                        .collect()
                })
                .collect();
            let mut records = Vec::new();
            for r in per_dialog {
                records.extend(r?);
            }
            let fallbacks = records.iter().filter(|r| r.fallback).count();
            if fallbacks > 0 {
                eprintln!("warning: {fallbacks} turns decoded no parsable span; used the most probable actions");
            }
            io::write_jsonl(&out, &records)
        }
        Command::Realize {
            res,
            corpus,
            decoded,
            bank,
            out,
        } => {
            let (ont, db) = load(&res)?;
            let dialogs = corpus_at(&corpus, &ont)?;
            let decoded: Vec<DecodedTurn> = io::read_jsonl(&decoded)?;
            let bank = TemplateBank::load(&bank)?;
            let by_turn: BTreeMap<(&str, usize), &DecodedTurn> = decoded
                .iter()
                .map(|r| ((r.dialog_id.as_str(), r.turn), r))
                .collect();
            let mut preds = Vec::new();
            for dlg in &dialogs {
                for (t, s) in statemap::dialog_states(dlg, &ont, &db).iter().enumerate() {
                    let rec = by_turn.get(&(dlg.dialog_id.as_str(), t)).ok_or_else(|| {
                        Error::validation(Location::turn(&dlg.dialog_id, t), "no decoded actions")
                    })?;
                    preds.push(realize_turn(&bank, &ont, &db, dlg, t, s, rec)?);
                }
            }
            io::write_jsonl(&out, &preds)
        }
        Command::Evaluate {
            res,
            corpus,
            predictions,
            out,
        } => {
            let (ont, db) = load(&res)?;
            let dialogs = corpus_at(&corpus, &ont)?;
            let preds: Vec<Prediction> = io::read_jsonl(&predictions)?;
            let report = metrics::evaluate(&dialogs, &preds, &db, &ont)?;
            io::write_json(&out, &report)?;
            print!("{report}");
            Ok(())
        }
        Command::Report {
            raw,
            augmented,
            out,
        } => {
            let mean = |paths: &[PathBuf]| -> Result<MetricReport> {
                let runs = paths.iter().map(|p| io::read_json(p)).collect::<Result<Vec<MetricReport>>>()?;
                Ok(MetricReport::mean(&runs).expect("clap requires one file"))
            };
            let raw = mean(&raw)?;
            let aug = mean(&augmented)?;
            let table = metrics::comparison_table(&[("raw", &raw), ("augmented", &aug)]);
            if let Some(p) = out {
                io::write_text(&p, &table)?;
            }
            print!("{table}");
            Ok(())
        }
    }
}

fn decode_turn(
    model: &ActionModel,
    ont: &Ontology,
    dlg: &Dialog,
    t: usize,
    state: &DialogState,
    cfg: &DecodeConfig,
) -> Result<DecodedTurn> {
    let cfg = DecodeConfig {
        seed: augment::turn_seed(cfg.seed, &dlg.dialog_id, t),
        ..*cfg
    };
    let (actions, fallback) = match decode::decode_multi_action(model, ont, state, &cfg) {
        Ok(a) => (
            a.into_iter()
                .map(|a| DecodedSpan {
                    span: a.span,
                    log_prob: a.log_prob,
                })
                .collect(),
            false,
        ),
        Err(Error::Invalid(_)) => {
            let n = if cfg.method == Method::Greedy { 1 } else { cfg.n };
            let spans = model
                .action_distribution(state, ont)
                .into_iter()
                .take(n)
                .map(|a| DecodedSpan {
                    span: a.span,
                    log_prob: a.prob.ln(),
                })
                .collect();
            (spans, true)
        }
        Err(e) => return Err(Error::validation(Location::turn(&dlg.dialog_id, t), e.to_string())),
    };
    Ok(DecodedTurn {
        dialog_id: dlg.dialog_id.clone(),
        turn: t,
        state_key: state.key().to_string(),
        actions,
        fallback,
    })
}

/// Realizes the best decoded action with the first database entity matching
/// the belief of the state's domain.
fn realize_turn(
    bank: &TemplateBank,
    ont: &Ontology,
    db: &VenueDatabase,
    dlg: &Dialog,
    t: usize,
    state: &DialogState,
    rec: &DecodedTurn,
) -> Result<Prediction> {
    let at = || Location::turn(&dlg.dialog_id, t);
    let top = rec
        .actions
        .first()
        .ok_or_else(|| Error::validation(at(), "decoded turn has no actions"))?;
    let action = spans::parse_action_span(&top.span, ont, None)
        .map_err(|e| Error::validation(at(), e.to_string()))?;
    let empty = BTreeMap::new();
    let constraints = state.belief.domain(&state.domain).unwrap_or(&empty);
    let entity = db.query(ont, &state.domain, constraints).next();
    let spec = ont.domain(&state.domain);
    let booking: BTreeMap<String, String> = constraints
        .iter()
        .filter(|(slot, _)| spec.is_some_and(|d| d.is_book_slot(slot)))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let template = bank.choose(&action, ont)?;
    let filled = policy::realize_response(bank, &action, ont, entity, &booking)?;
    let substitutions = filled
        .substitutions
        .into_iter()
        .map(|mut s| {
            s.domain = state.domain.clone();
            s
        })
        .collect();
    Ok(Prediction {
        dialog_id: dlg.dialog_id.clone(),
        turn: t,
        response: template.to_string(),
        action_span: Some(top.span.clone()),
        candidates: rec.actions.iter().map(|a| a.span.clone()).collect(),
        substitutions,
    })
}
