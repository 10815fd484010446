//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mada_core::augment::{self, AugmentConfig};
use mada_core::corpus::{self, entity_name, Dialog, DomainGoal, Ontology};
use mada_core::decode::toy::{FnScorer, RandomScorer};
use mada_core::decode::{self, DecodeConfig, Method, SequenceScorer};
use mada_core::delex::{self, placeholder, Filler, Substitution, ValueIndex};
use mada_core::metrics::{self, Prediction};
use mada_core::policy::{self, entropy, PolicyConfig};
use mada_core::spans;
use mada_core::statemap;
use mada_core::synth;

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn criterion(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let ok = out.ok && in_time;
    println!(
        "[{}] {id:>2}. {name}: {} ({:.2}s, limit {}s{})",
        if ok { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", too slow" }
    );
    ok
}

fn c1_combined_score() -> Outcome {
    let a = metrics::combined_score(87.9, 78.0, 30.4);
    let b = metrics::combined_score(89.2, 77.9, 18.6);
    let exact = (a - ((87.9 + 78.0) / 2.0 + 30.4)).abs() == 0.0 && (b - ((89.2 + 77.9) / 2.0 + 18.6)).abs() == 0.0;
    let ok = exact
        && (a - 113.35).abs() < 1e-9
        && (b - 102.15).abs() < 1e-9
        && (a - 113.4).abs() <= 0.05 + 1e-9
        && (b - 102.2).abs() <= 0.05 + 1e-9;
    check(ok, format!("{a:.2} (reported 113.4), {b:.2} (reported 102.2)"))
}

fn c2_balance() -> Outcome {
    let dir = common::fixtures();
    let ont = Ontology::load(&dir.join("ontology.json")).unwrap();
    let db = corpus::VenueDatabase::load(&dir.join("db.json"), &ont).unwrap();
    let dialogs = corpus::load_corpus(&dir.join("balance.json"), &ont).unwrap();
    let map = statemap::build_state_action_map(&dialogs, &ont, &db);
    let raw = augment::raw_pairs(&dialogs, &ont, &db);
    let aug = augment::augment_corpus(&dialogs, &ont, &db, &map, &AugmentConfig::default()).unwrap();
    let state = statemap::dialog_states(&dialogs[0], &ont, &db).remove(0);
    let a2 = statemap::turn_action_span(&dialogs[9], 0, &ont);
    let dist = |pairs| policy::train(pairs, &ont, &PolicyConfig::default()).unwrap().action_distribution(&state, &ont);
    let (dr, da) = (dist(&raw), dist(&aug));
    let p = |d: &[policy::ScoredAction]| d.iter().find(|a| a.span == a2).map_or(0.0, |a| a.prob);
    let (pr, pa) = (p(&dr), p(&da));
    let (hr, ha) = (entropy(&dr), entropy(&da));
    check(
        (pr - 0.1).abs() <= 0.01 && (pa - 0.5).abs() <= 0.01 && ha > hr,
        format!("P(A2|S) raw {pr:.4}, augmented {pa:.4}; entropy {hr:.4} -> {ha:.4}"),
    )
}

fn diversity(model: &policy::ActionModel, ont: &Ontology, db: &corpus::VenueDatabase, dialogs: &[Dialog], cfg: &DecodeConfig) -> (f64, f64) {
    let mut turns = Vec::new();
    for d in dialogs {
        for (t, s) in statemap::dialog_states(d, ont, db).iter().enumerate() {
            let cfg = DecodeConfig {
                seed: augment::turn_seed(cfg.seed, &d.dialog_id, t),
                ..*cfg
            };
            let acts = decode::decode_multi_action(model, ont, s, &cfg).unwrap();
            turns.push(acts.into_iter().map(|a| a.action).collect::<Vec<_>>());
        }
    }
    metrics::act_slot_diversity(&turns)
}

fn c3_trend() -> Outcome {
    let ont = synth::ontology();
    let db = synth::database();
    let mut details = Vec::new();
    let mut all = true;
    for seed in 0..5u64 {
        let dialogs = synth::generated_dialogs(200, 100 + seed, false);
        let map = statemap::build_state_action_map(&dialogs, &ont, &db);
        let raw = augment::raw_pairs(&dialogs, &ont, &db);
        let aug = augment::augment_corpus(&dialogs, &ont, &db, &map, &AugmentConfig { k: 3, seed }).unwrap();
        let cfg = DecodeConfig {
            method: Method::TopK,
            n: 5,
            top_k: 5,
            seed,
            ..Default::default()
        };
        let train = |p| policy::train(p, &ont, &PolicyConfig::default()).unwrap();
        let (ar, sr) = diversity(&train(&raw), &ont, &db, &dialogs, &cfg);
        let (aa, sa) = diversity(&train(&aug), &ont, &db, &dialogs, &cfg);
        all &= aa > ar && sa > sr;
        details.push(format!("act {ar:.2}->{aa:.2} slot {sr:.2}->{sa:.2}"));
    }
    check(all, format!("5/5 seeds required; {}", details.join(", ")))
}

fn c4_single_action() -> Outcome {
    let ont = synth::ontology();
    let db = synth::database();
    let dialogs = synth::generated_dialogs(100, 21, true);
    let model = policy::train(&augment::raw_pairs(&dialogs, &ont, &db), &ont, &PolicyConfig::default()).unwrap();
    let cfg = DecodeConfig {
        method: Method::Greedy,
        n: 1,
        ..Default::default()
    };
    let (act, _) = diversity(&model, &ont, &db, &dialogs, &cfg);
    check(act == 1.0, format!("greedy act number {act:.2}"))
}

/// All finished sequences by depth-first expansion, best first (ties by tokens).
fn enumerate<S: SequenceScorer>(s: &S, max_len: usize) -> Vec<(Vec<usize>, f64)> {
    fn go<S: SequenceScorer>(s: &S, prefix: &mut Vec<usize>, lp: f64, max_len: usize, out: &mut Vec<(Vec<usize>, f64)>) {
        let lps = s.next_log_probs(prefix);
        for (t, l) in lps.iter().enumerate() {
            prefix.push(t);
            if t == s.end_token() || prefix.len() == max_len {
                out.push((prefix.clone(), lp + l));
            } else {
                go(s, prefix, lp + l, max_len, out);
            }
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(s, &mut Vec::new(), 0.0, max_len, &mut out);
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out
}

/// Smallest number of most-probable tokens whose mass reaches p, found by
/// trying every size in turn.
fn nucleus_oracle(probs: &[f64], p: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
    if p >= 1.0 {
        return order;
    }
    for m in 1..=probs.len() {
        let mass: f64 = order[..m].iter().map(|&i| probs[i]).sum();
        if mass >= p {
            return order[..m].to_vec();
        }
    }
    order
}

fn c5_decoders() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    for case in 0..1000 {
        let vocab = rng.gen_range(2..=5);
        let max_len = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=5);
        let s = RandomScorer {
            vocab,
            end: rng.gen_range(0..vocab),
            seed: rng.gen(),
            sharpness: rng.gen_range(0.1..3.0),
        };
        let all = enumerate(&s, max_len);
        let got = decode::beam_search_with(&s, all.len(), n, max_len, 0.0);
        let want = &all[..n.min(all.len())];
        let same = got.len() == want.len()
            && got.iter().zip(want).all(|(h, (seq, lp))| &h.tokens == seq && (h.log_prob - lp).abs() <= 1e-9);
        if !same {
            failures.push(format!("beam case {case}"));
        }
        let cfg = DecodeConfig { n, max_len, gamma: 0.0, ..Default::default() };
        if decode::diverse_beam_search(&s, &cfg) != decode::beam_search(&s, &cfg) {
            failures.push(format!("gamma=0 case {case}"));
        }
    }
    for case in 0..1000 {
        let v = rng.gen_range(1..=12);
        let w: Vec<f64> = (0..v).map(|_| rng.gen::<f64>()).collect();
        let z: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|x| x / z).collect();
        let p = if case % 10 == 0 { 1.0 } else { rng.gen_range(0.01..1.0) };
        if decode::nucleus(&probs, p) != nucleus_oracle(&probs, p) {
            failures.push(format!("nucleus case {case}"));
        }
    }
    // support: 10,000 single-step draws each
    let probs = [0.05, 0.3, 0.1, 0.25, 0.2, 0.1];
    let s = FnScorer {
        vocab: probs.len(),
        end: 0,
        f: move |_: &[usize]| probs.iter().map(|p| f64::ln(*p)).collect(),
    };
    let k_set = decode::top_k_support(&probs, 3);
    let p_set = decode::nucleus(&probs, 0.7);
    let cfg = DecodeConfig { n: 10_000, max_len: 1, top_k: 3, top_p: 0.7, seed: 9, ..Default::default() };
    let k_out = decode::top_k_sample(&s, &cfg).iter().filter(|h| !k_set.contains(&h.tokens[0])).count();
    let p_out = decode::top_p_sample(&s, &cfg).iter().filter(|h| !p_set.contains(&h.tokens[0])).count();
    if k_out + p_out > 0 {
        failures.push(format!("{k_out} top-k and {p_out} top-p draws left their support"));
    }
    let detail = if failures.is_empty() {
        "1000 beam/enumeration cases, 1000 gamma=0 cases, 1000 nucleus cases, 2x10000 draws in support".to_string()
    } else {
        format!("{} failures, first: {}", failures.len(), failures[0])
    };
    check(failures.is_empty(), detail)
}

fn c6_spans() -> Outcome {
    let ont = synth::ontology();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = 0;
    for _ in 0..10_000 {
        let b = synth::random_belief(&mut rng, &ont);
        if spans::decode_belief_span(&spans::encode_belief_span(&b, &ont), &ont).ok() != Some(b) {
            bad += 1;
        }
        let a = synth::random_action(&mut rng, &ont);
        if spans::decode_action_span(&spans::encode_action_span(&a, &ont), &ont, None).ok() != Some(a) {
            bad += 1;
        }
    }
    let literal = [
        ("[restaurant] name curry garden time 18:00 [taxi] leave 20:00 destination kings street", true),
        ("[hotel] [request] price area", false),
    ];
    for (text, belief) in literal {
        let toks: Vec<&str> = text.split_whitespace().collect();
        let back = if belief {
            spans::encode_belief_span(&spans::decode_belief_span(&toks, &ont).unwrap(), &ont)
        } else {
            spans::encode_action_span(&spans::decode_action_span(&toks, &ont, None).unwrap(), &ont)
        };
        if back.join(" ") != text {
            bad += 1;
        }
    }
    check(bad == 0, format!("{bad} mismatches over 10000 beliefs, 10000 actions and 2 literal spans"))
}

fn c7_delex() -> Outcome {
    let ont = synth::ontology();
    let db = synth::database();
    let mut dialogs = synth::fixture_corpus();
    let index = ValueIndex::build(&ont, &db, &dialogs);
    delex::delexicalize_corpus(&mut dialogs, &index);
    let (mut turns, mut bad) = (0, 0);
    for d in &dialogs {
        for t in &d.turns {
            turns += 1;
            let back = delex::relexicalize(t.delex_response.as_deref().unwrap(), &Filler::from_substitutions(&t.substitutions));
            if back.text != t.response {
                bad += 1;
            }
        }
    }
    check(bad == 0, format!("{} of {turns} turns round-trip", turns - bad))
}

fn c8_state_map() -> Outcome {
    let ont = synth::ontology();
    let db = synth::database();
    let dialogs = synth::fixture_corpus();
    let map = statemap::build_state_action_map(&dialogs, &ont, &db);
    let mut missing = 0;
    for d in &dialogs {
        for (t, s) in statemap::dialog_states(d, &ont, &db).iter().enumerate() {
            let gt = statemap::turn_action_span(d, t, &ont);
            let ok = map.valid_actions(&s.key()).is_some_and(|v| v.iter().any(|e| e.action_span == gt));
            missing += usize::from(!ok);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut differ = 0;
    for _ in 0..20 {
        let mut shuffled = dialogs.clone();
        shuffled.shuffle(&mut rng);
        differ += usize::from(statemap::build_state_action_map(&shuffled, &ont, &db) != map);
    }
    check(
        missing == 0 && differ == 0,
        format!("{missing} turns missing their action, {differ}/20 shuffles changed the map"),
    )
}

fn c9_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    common::run_pipeline(a.path(), 7, 1);
    common::run_pipeline(b.path(), 7, 1);
    common::run_pipeline(c.path(), 7, 4);
    let (x, y, z) = (common::artifacts(a.path()), common::artifacts(b.path()), common::artifacts(c.path()));
    check(
        x == y && x == z,
        format!("{} artifacts; rerun identical: {}, --jobs 4 identical: {}", x.len(), x == y, x == z),
    )
}

fn c10_metrics() -> Outcome {
    let ont = synth::ontology();
    let db = synth::database();
    let x: Vec<String> = synth::fixture_corpus().iter().flat_map(|d| d.turns.iter().map(|t| t.response.clone())).collect();
    let self_bleu = metrics::bleu(&x, &x).unwrap();

    let mut d = synth::handcrafted_dialogs().remove(0);
    let constraints: BTreeMap<String, String> =
        [("area", "north"), ("parking", "yes")].into_iter().map(|(a, b)| (a.into(), b.into())).collect();
    d.goal = [("hotel".to_string(), DomainGoal { inform: constraints.clone(), request: vec!["phone".into()], book: BTreeMap::new() })].into();
    let hotels = db.records("hotel");
    let fits = |r: &corpus::Record| r.get("area") == constraints.get("area") && r.get("parking") == constraints.get("parking");
    let good = entity_name(hotels.iter().find(|r| fits(r)).unwrap()).unwrap();
    let bad = entity_name(hotels.iter().find(|r| !fits(r)).unwrap()).unwrap();
    let preds = |name: &str, phone: bool| -> Vec<Prediction> {
        let responses = ["i recommend <v.name> .".to_string(), if phone { "call <v.phone> .".into() } else { "anything else ?".into() }];
        (0..d.turns.len())
            .map(|t| Prediction {
                dialog_id: d.dialog_id.clone(),
                turn: t,
                response: responses.get(t).cloned().unwrap_or_else(|| "goodbye .".into()),
                action_span: None,
                candidates: vec![],
                substitutions: if t == 0 {
                    vec![Substitution { placeholder: placeholder("name"), value: name.into(), domain: "hotel".into() }]
                } else {
                    vec![]
                },
            })
            .collect()
    };
    let table = [
        (good, true, (100.0, 100.0)),
        (good, false, (100.0, 0.0)),
        (bad, true, (0.0, 0.0)),
    ];
    let mut rows = Vec::new();
    let mut ok = (self_bleu - 100.0).abs() < 1e-9;
    for (name, phone, want) in table {
        let got = metrics::inform_success(std::slice::from_ref(&d), &preds(name, phone), &db, &ont).unwrap();
        ok &= got == want;
        rows.push(format!("{got:?}"));
    }
    check(ok, format!("BLEU(x,x) = {self_bleu:.1}; inform/success {}", rows.join(" ")))
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        criterion(1, "combined score arithmetic", secs(1), c1_combined_score),
        criterion(2, "balance on the 9:1 fixture", secs(1), c2_balance),
        criterion(3, "act/slot numbers rise with augmentation (top-k, N=5)", secs(30), c3_trend),
        criterion(4, "greedy single-action act number", secs(5), c4_single_action),
        criterion(5, "decoder oracle suite", secs(60), c5_decoders),
        criterion(6, "span round-trips", secs(10), c6_spans),
        criterion(7, "delexicalization round-trip", secs(5), c7_delex),
        criterion(8, "state-map soundness", secs(5), c8_state_map),
        criterion(9, "pipeline determinism", secs(60), c9_determinism),
        criterion(10, "metric fixtures", secs(5), c10_metrics),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
