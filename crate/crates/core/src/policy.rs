//! Count-based action policy P(action | state) with four backoff levels, and
//! a template bank for turning actions into responses.
//!
//! Levels, most to least specific:
//! 0. the full state key;
//! 1. domain, DB bucket and booking bit, user acts;
//! 2. domain and user acts;
//! 3. domain alone.
//!
//! Each level keeps whole-span counts (for [`ActionModel::action_distribution`])
//! and token bigram counts over `<bos> span <eos>` (for the sequence scorer).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::TrainingPair;
use crate::corpus::{Dialog, Ontology, Record};
use crate::decode::SequenceScorer;
use crate::delex::{self, Filler, Relexicalized};
use crate::error::{Error, Result};
use crate::io;
use crate::spans::{self, parse_marker, SystemAction};
use crate::statemap::{self, DialogState, StateKey};

pub const LEVELS: usize = 4;
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Add-alpha smoothing constant.
    pub alpha: f64,
    /// Interpolation weights, most specific level first.
    pub lambdas: [f64; LEVELS],
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            lambdas: [0.7, 0.15, 0.1, 0.05],
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Config("interpolation weights must be positive".into()));
        }
        let sum: f64 = self.lambdas.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("interpolation weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Backoff contexts of a state, most specific first.
pub fn contexts(state: &DialogState) -> [String; LEVELS] {
    let u = state.user_act_signature();
    let db = format!("{}/{}", state.db.bucket(), u8::from(state.db.booking_available()));
    [
        state.key().to_string(),
        format!("D={}|DB={db}|U={u}", state.domain),
        format!("D={}|U={u}", state.domain),
        format!("D={}", state.domain),
    ]
}

/// Counts collected under one context.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextCounts {
    /// Whole action span → count.
    pub spans: BTreeMap<String, u64>,
    /// Previous token → next token → count.
    pub bigrams: BTreeMap<String, BTreeMap<String, u64>>,
}

impl ContextCounts {
    fn add(&mut self, span: &str) {
        *self.spans.entry(span.to_string()).or_default() += 1;
        let mut prev = BOS;
        for tok in span.split_whitespace().chain([EOS]) {
            *self
                .bigrams
                .entry(prev.to_string())
                .or_default()
                .entry(tok.to_string())
                .or_default() += 1;
            prev = tok;
        }
    }

    fn total(&self) -> u64 {
        self.spans.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionModel {
    pub version: u32,
    pub config: PolicyConfig,
    /// Token vocabulary; index 0 is the end marker.
    pub vocab: Vec<String>,
    pub levels: Vec<BTreeMap<String, ContextCounts>>,
}

/// One entry of [`ActionModel::action_distribution`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredAction {
    pub span: String,
    pub prob: f64,
}

/// Vocabulary of the scorer: end marker, domain markers, act markers, slots.
pub fn model_vocabulary(ontology: &Ontology) -> Vec<String> {
    let mut v = vec![EOS.to_string()];
    v.extend(ontology.domain_names().map(spans::marker));
    v.extend(ontology.acts().iter().map(|a| spans::marker(a)));
    v.extend(ontology.slots().iter().cloned());
    v
}

pub fn train(pairs: &[TrainingPair], ontology: &Ontology, cfg: &PolicyConfig) -> Result<ActionModel> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::Invalid("empty training set".into()));
    }
    let mut levels: Vec<BTreeMap<String, ContextCounts>> = vec![BTreeMap::new(); LEVELS];
    let mut parsed: BTreeMap<&StateKey, [String; LEVELS]> = BTreeMap::new();
    for p in pairs {
        if !parsed.contains_key(&p.state_key) {
            let state = p.state_key.parse()?;
            parsed.insert(&p.state_key, contexts(&state));
        }
        let action = spans::parse_action_span(&p.action_span, ontology, None)?;
        let span = spans::action_span_string(&action, ontology);
        for (level, ctx) in levels.iter_mut().zip(&parsed[&p.state_key]) {
            level.entry(ctx.clone()).or_default().add(&span);
        }
    }
    Ok(ActionModel {
        version: FORMAT_VERSION,
        config: *cfg,
        vocab: model_vocabulary(ontology),
        levels,
    })
}

impl ActionModel {
    pub fn load(path: &Path) -> Result<Self> {
        let m: ActionModel = io::read_json(path)?;
        if m.version != FORMAT_VERSION {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("unsupported model version {}", m.version),
            });
        }
        if m.levels.len() != LEVELS || m.vocab.first().map(String::as_str) != Some(EOS) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: "model does not have the expected shape".into(),
            });
        }
        m.config.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.vocab[index]
    }

    fn matching(&self, state: &DialogState) -> Vec<(f64, &ContextCounts)> {
        contexts(state)
            .iter()
            .zip(&self.levels)
            .zip(self.config.lambdas)
            .filter_map(|((ctx, level), lambda)| level.get(ctx).map(|c| (lambda, c)))
            .filter(|(_, c)| c.total() > 0)
            .collect()
    }

    /// Interpolated distribution over every action observed at a matching
    /// level, sorted by probability then span. With no matching level at all,
    /// uniform over the single-act actions of the state's domain.
    pub fn action_distribution(&self, state: &DialogState, ontology: &Ontology) -> Vec<ScoredAction> {
        let levels = self.matching(state);
        let mut out: Vec<ScoredAction> = if levels.is_empty() {
            let domain = spans::marker(&state.domain);
            let acts = ontology.acts();
            acts.iter()
                .map(|a| ScoredAction {
                    span: format!("{domain} {}", spans::marker(a)),
                    prob: 1.0 / acts.len() as f64,
                })
                .collect()
        } else {
            let candidates: BTreeSet<&String> = levels.iter().flat_map(|(_, c)| c.spans.keys()).collect();
            let alpha = self.config.alpha;
            let size = candidates.len() as f64;
            let weight: f64 = levels.iter().map(|(l, _)| l).sum();
            candidates
                .into_iter()
                .map(|span| {
                    let p: f64 = levels
                        .iter()
                        .map(|(lambda, c)| {
                            let n = c.spans.get(span).copied().unwrap_or(0) as f64;
                            lambda * (n + alpha) / (c.total() as f64 + alpha * size)
                        })
                        .sum();
                    ScoredAction {
                        span: span.clone(),
                        prob: p / weight,
                    }
                })
                .collect()
        };
        out.sort_by(|a, b| b.prob.total_cmp(&a.prob).then_with(|| a.span.cmp(&b.span)));
        out
    }

    pub fn scorer<'a>(&'a self, state: &DialogState) -> PolicyScorer<'a> {
        let ctx = contexts(state);
        PolicyScorer {
            model: self,
            counts: ctx
                .iter()
                .zip(&self.levels)
                .zip(self.config.lambdas)
                .filter_map(|((c, level), lambda)| level.get(c).map(|c| (lambda, c)))
                .collect(),
        }
    }
}

/// Shannon entropy (nats) of an action distribution.
pub fn entropy(dist: &[ScoredAction]) -> f64 {
    dist.iter()
        .filter(|a| a.prob > 0.0)
        .map(|a| -a.prob * a.prob.ln())
        .sum()
}

/// Token-level view of an [`ActionModel`] for one state.
///
/// For a prefix ending in token `w`, each level whose context has seen `w`
/// contributes `(c(w, x) + alpha) / (c(w) + alpha |V|)`; contributions are
/// mixed with the level weights renormalized over contributing levels. No
/// contributing level gives the uniform distribution.
pub struct PolicyScorer<'a> {
    model: &'a ActionModel,
    counts: Vec<(f64, &'a ContextCounts)>,
}

impl SequenceScorer for PolicyScorer<'_> {
    fn vocab_size(&self) -> usize {
        self.model.vocab.len()
    }

    fn end_token(&self) -> usize {
        0
    }

    fn next_log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        let v = self.model.vocab.len();
        let prev = prefix.last().map_or(BOS, |&t| self.model.token(t));
        let alpha = self.model.config.alpha;
        let mut probs = vec![0.0; v];
        let mut weight = 0.0;
        for (lambda, c) in &self.counts {
            let Some(next) = c.bigrams.get(prev) else {
                continue;
            };
            let total: u64 = next.values().sum();
            if total == 0 {
                continue;
            }
            let denom = total as f64 + alpha * v as f64;
            for (i, tok) in self.model.vocab.iter().enumerate() {
                let n = next.get(tok).copied().unwrap_or(0) as f64;
                probs[i] += lambda * (n + alpha) / denom;
            }
            weight += lambda;
        }
        if weight == 0.0 {
            return vec![-(v as f64).ln(); v];
        }
        probs.into_iter().map(|p| (p / weight).ln()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateCount {
    pub template: String,
    pub count: u64,
}

/// Canonical action span → delexicalized responses seen with it. Each list is
/// kept sorted by count (descending), then length, then text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateBank {
    templates: BTreeMap<String, Vec<TemplateCount>>,
}

fn template_order(a: &TemplateCount, b: &TemplateCount) -> std::cmp::Ordering {
    b.count
        .cmp(&a.count)
        .then(a.template.len().cmp(&b.template.len()))
        .then_with(|| a.template.cmp(&b.template))
}

impl TemplateBank {
    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn add(&mut self, span: &str, template: &str) {
        let list = self.templates.entry(span.to_string()).or_default();
        match list.iter_mut().find(|t| t.template == template) {
            Some(t) => t.count += 1,
            None => list.push(TemplateCount {
                template: template.to_string(),
                count: 1,
            }),
        }
        list.sort_by(template_order);
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn templates(&self, span: &str) -> Option<&[TemplateCount]> {
        self.templates.get(span).map(Vec::as_slice)
    }

    /// The bank span closest to `action`: most shared act types, then most
    /// shared slot names, then the smallest span.
    pub fn nearest(&self, action: &SystemAction, ontology: &Ontology) -> Option<&str> {
        let acts = action.act_types();
        let slots = action.slot_names();
        let mut best: Option<((usize, usize), &str)> = None;
        for span in self.templates.keys() {
            let (a, s) = span_acts_and_slots(span, ontology);
            let score = (
                a.iter().filter(|x| acts.contains(x.as_str())).count(),
                s.iter().filter(|x| slots.contains(x.as_str())).count(),
            );
            if best.map_or(true, |(b, _)| score > b) {
                best = Some((score, span));
            }
        }
        best.map(|(_, s)| s)
    }

    /// Highest-ranked template for the action, or for its nearest neighbour
    /// when the action itself was never seen.
    pub fn choose(&self, action: &SystemAction, ontology: &Ontology) -> Result<&str> {
        if self.is_empty() {
            return Err(Error::Invalid("template bank is empty".into()));
        }
        let span = spans::action_span_string(action, ontology);
        let key = if self.templates.contains_key(&span) {
            span.as_str()
        } else {
            self.nearest(action, ontology).unwrap_or(&span)
        };
        Ok(&self.templates[key][0].template)
    }
}

fn span_acts_and_slots(span: &str, ontology: &Ontology) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut acts = BTreeSet::new();
    let mut slots = BTreeSet::new();
    for tok in span.split_whitespace() {
        match parse_marker(tok) {
            Some(m) if ontology.has_act(m) => {
                acts.insert(m.to_string());
            }
            Some(_) => {}
            None => {
                slots.insert(tok.to_string());
            }
        }
    }
    (acts, slots)
}

/// Collects the delexicalized response of every turn under its ground-truth
/// action. Turns without a delexicalized response are skipped.
pub fn build_template_bank(dialogs: &[Dialog], ontology: &Ontology) -> TemplateBank {
    let mut bank = TemplateBank::default();
    for d in dialogs {
        for (t, turn) in d.turns.iter().enumerate() {
            if let Some(template) = &turn.delex_response {
                bank.add(&statemap::turn_action_span(d, t, ontology), template);
            }
        }
    }
    bank
}

/// Picks a template for the action and fills it from the entity record and
/// booking details.
pub fn realize_response(
    bank: &TemplateBank,
    action: &SystemAction,
    ontology: &Ontology,
    entity: Option<&Record>,
    booking: &BTreeMap<String, String>,
) -> Result<Relexicalized> {
    let template = bank.choose(action, ontology)?;
    let filler = entity.map(Filler::from_record).unwrap_or_default().with_booking(booking);
    Ok(delex::relexicalize(template, &filler))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{self, AugmentConfig};
    use crate::decode::{self, DecodeConfig};
    use crate::synth;

    fn tiny() -> PolicyConfig {
        PolicyConfig {
            alpha: 1e-9,
            ..Default::default()
        }
    }

    fn balance(n1: usize, n2: usize, augmented: bool) -> (ActionModel, DialogState) {
        let ont = synth::ontology();
        let db = synth::database();
        let dialogs = synth::balance_corpus(n1, n2);
        let pairs = if augmented {
            let map = statemap::build_state_action_map(&dialogs, &ont, &db);
            augment::augment_corpus(&dialogs, &ont, &db, &map, &AugmentConfig::default()).unwrap()
        } else {
            augment::raw_pairs(&dialogs, &ont, &db)
        };
        let state = statemap::dialog_states(&dialogs[0], &ont, &db).remove(0);
        (train(&pairs, &ont, &tiny()).unwrap(), state)
    }

    #[test]
    fn count_ratios() {
        let ont = synth::ontology();
        let (m, s) = balance(9, 1, false);
        let d = m.action_distribution(&s, &ont);
        assert_eq!(d.len(), 2);
        assert!((d[0].prob - 0.9).abs() < 1e-6);
        assert!((d[1].prob - 0.1).abs() < 1e-6);

        let (m, s) = balance(10, 10, false);
        let d = m.action_distribution(&s, &ont);
        assert!(d.iter().all(|a| (a.prob - 0.5).abs() < 1e-6));

        let (m, s) = balance(1, 0, false);
        let d = m.action_distribution(&s, &ont);
        assert_eq!(d.len(), 1);
        assert!((d[0].prob - 1.0).abs() < 1e-9);
    }

    #[test]
    fn augmentation_balances() {
        let ont = synth::ontology();
        let (raw, s) = balance(9, 1, false);
        let (aug, _) = balance(9, 1, true);
        let hr = entropy(&raw.action_distribution(&s, &ont));
        let ha = entropy(&aug.action_distribution(&s, &ont));
        assert!(ha > hr);
        assert!((ha - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn unseen_state_backs_off_to_domain() {
        let ont = synth::ontology();
        let (m, mut s) = balance(9, 1, false);
        s.user_acts.clear();
        s.belief = Default::default();
        let d = m.action_distribution(&s, &ont);
        // only the domain level matches, so the count ratio survives
        assert!((d[0].prob - 0.9).abs() < 1e-6);

        s.domain = "train".into();
        let d = m.action_distribution(&s, &ont);
        assert_eq!(d.len(), ont.acts().len());
        assert_eq!(d[0].span.split_whitespace().count(), 2);
        let sum: f64 = d.iter().map(|a| a.prob).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn distribution_sums_to_one() {
        let ont = synth::ontology();
        let db = synth::database();
        let dialogs = synth::fixture_corpus();
        let pairs = augment::raw_pairs(&dialogs, &ont, &db);
        let m = train(&pairs, &ont, &PolicyConfig::default()).unwrap();
        for d in &dialogs {
            for s in statemap::dialog_states(d, &ont, &db) {
                let sum: f64 = m.action_distribution(&s, &ont).iter().map(|a| a.prob).sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn first_token_bigrams() {
        // one context, spans "[hotel] [inform] choice [request] price" x9 and
        // "[hotel] [recommend] name" x1: after <bos> only [hotel] was seen
        let (m, s) = balance(9, 1, false);
        let scorer = m.scorer(&s);
        let lp = scorer.next_log_probs(&[]);
        let hotel = m.vocab.iter().position(|t| t == "[hotel]").unwrap();
        let v = m.vocab.len() as f64;
        let a = m.config.alpha;
        assert!((lp[hotel].exp() - (10.0 + a) / (10.0 + a * v)).abs() < 1e-12);
        // after [hotel]: [inform] 9, [recommend] 1
        let inform = m.vocab.iter().position(|t| t == "[inform]").unwrap();
        let lp = scorer.next_log_probs(&[hotel]);
        assert!((lp[inform].exp() - (9.0 + a) / (10.0 + a * v)).abs() < 1e-12);
    }

    #[test]
    fn scorer_normalized_with_nonzero_end() {
        let ont = synth::ontology();
        let db = synth::database();
        let dialogs = synth::fixture_corpus();
        let m = train(&augment::raw_pairs(&dialogs, &ont, &db), &ont, &PolicyConfig::default()).unwrap();
        let s = statemap::dialog_states(&dialogs[0], &ont, &db).remove(0);
        let scorer = m.scorer(&s);
        for prefix in [vec![], vec![1], vec![3, 9], vec![0, 0, 0]] {
            let lp = scorer.next_log_probs(&prefix);
            let z: f64 = lp.iter().map(|l| l.exp()).sum();
            assert!((z - 1.0).abs() < 1e-9);
            assert!(lp[0].is_finite());
        }
    }

    #[test]
    fn greedy_reproduces_single_action() {
        let ont = synth::ontology();
        let (m, s) = balance(3, 0, false);
        let cfg = DecodeConfig {
            method: decode::Method::Greedy,
            n: 1,
            ..Default::default()
        };
        let got = decode::decode_multi_action(&m, &ont, &s, &cfg).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].span, m.action_distribution(&s, &ont)[0].span);
    }

    #[test]
    fn rejects_bad_input() {
        let ont = synth::ontology();
        assert!(train(&[], &ont, &PolicyConfig::default()).is_err());
        let bad = PolicyConfig {
            lambdas: [0.5, 0.5, 0.5, 0.5],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let (m, _) = balance(2, 1, false);
        let text = serde_json::to_string(&m).unwrap();
        let back: ActionModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    fn delexed_fixture() -> Vec<Dialog> {
        let ont = synth::ontology();
        let db = synth::database();
        let mut dialogs = synth::fixture_corpus();
        let index = delex::ValueIndex::build(&ont, &db, &dialogs);
        delex::delexicalize_corpus(&mut dialogs, &index);
        dialogs
    }

    #[test]
    fn guesthouse_action_realized_with_entity() {
        let ont = synth::ontology();
        let db = synth::database();
        let bank = build_template_bank(&delexed_fixture(), &ont);
        let action = spans::parse_action_span("[hotel] [recommend] name [offerbook]", &ont, None).unwrap();
        let acorn = &db.records("hotel")[0];
        let out = realize_response(&bank, &action, &ont, Some(acorn), &BTreeMap::new()).unwrap();
        assert!(out.text.contains("acorn guest house"), "{}", out.text);
    }

    #[test]
    fn single_template_verbatim() {
        let ont = synth::ontology();
        let dialogs = delexed_fixture();
        let bank = build_template_bank(&dialogs, &ont);
        let turn = &dialogs[0].turns[0];
        let span = statemap::turn_action_span(&dialogs[0], 0, &ont);
        if bank.templates(&span).unwrap().len() == 1 {
            let action = spans::parse_action_span(&span, &ont, None).unwrap();
            assert_eq!(bank.choose(&action, &ont).unwrap(), turn.delex_response.as_deref().unwrap());
        }
    }

    #[test]
    fn template_ranking_and_fallback() {
        let ont = synth::ontology();
        let mut bank = TemplateBank::default();
        bank.add("[hotel] [inform] choice", "there are <v.choice> .");
        bank.add("[hotel] [inform] choice", "we have <v.choice> hotels .");
        bank.add("[hotel] [inform] choice", "we have <v.choice> hotels .");
        bank.add("[hotel] [inform] price", "it is <v.price> .");
        bank.add("[hotel] [inform] price", "costs <v.price> .");
        bank.add("[hotel] [request] area", "which area ?");

        let a = spans::parse_action_span("[hotel] [inform] choice", &ont, None).unwrap();
        assert_eq!(bank.choose(&a, &ont).unwrap(), "we have <v.choice> hotels .");
        // equal counts: the shorter template wins
        let a = spans::parse_action_span("[hotel] [inform] price", &ont, None).unwrap();
        assert_eq!(bank.choose(&a, &ont).unwrap(), "costs <v.price> .");

        // unseen {inform} action: overlaps are (1,0) for both inform spans
        // with no shared slot, (0,0) for request; tie goes to the smaller span
        let a = spans::parse_action_span("[hotel] [inform] area", &ont, None).unwrap();
        assert_eq!(bank.nearest(&a, &ont), Some("[hotel] [inform] choice"));
        // shared slot breaks the act tie
        let a = spans::parse_action_span("[hotel] [inform] price area", &ont, None).unwrap();
        assert_eq!(bank.nearest(&a, &ont), Some("[hotel] [inform] price"));

        assert!(TemplateBank::default().choose(&a, &ont).is_err());
    }
}
