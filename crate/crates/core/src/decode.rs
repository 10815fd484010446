//! Sequence decoding over any next-token scorer: greedy, beam, diverse beam,
//! top-k and nucleus (top-p) sampling, plus multi-action decoding for an
//! [`ActionModel`].
//!
//! Scores are raw sums of log-probabilities (no length normalization). Every
//! tie is broken by vocabulary index, lower first.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Ontology;
use crate::error::{Error, Result};
use crate::policy::ActionModel;
use crate::spans::{self, SystemAction};
use crate::statemap::DialogState;

/// An autoregressive next-token distribution over a fixed vocabulary.
pub trait SequenceScorer {
    fn vocab_size(&self) -> usize;

    /// Index of the end-of-sequence token.
    fn end_token(&self) -> usize;

    /// Log-probability of every vocabulary token following `prefix`.
    fn next_log_probs(&self, prefix: &[usize]) -> Vec<f64>;
}

impl<S: SequenceScorer + ?Sized> SequenceScorer for &S {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn end_token(&self) -> usize {
        (**self).end_token()
    }
    fn next_log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        (**self).next_log_probs(prefix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Greedy,
    Beam,
    DiverseBeam,
    TopK,
    TopP,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Greedy,
        Method::Beam,
        Method::DiverseBeam,
        Method::TopK,
        Method::TopP,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Beam => "beam",
            Method::DiverseBeam => "diverse-beam",
            Method::TopK => "top-k",
            Method::TopP => "top-p",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown decoding method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub method: Method,
    /// Beam width or number of sampled rollouts.
    pub n: usize,
    /// Diverse-beam sibling penalty.
    pub gamma: f64,
    pub top_k: usize,
    pub top_p: f64,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            method: Method::Beam,
            n: 5,
            gamma: 0.2,
            top_k: 5,
            top_p: 0.9,
            max_len: 20,
            seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 {
            return bad("number of actions must be at least 1".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be a finite value >= 0, got {}", self.gamma));
        }
        if self.top_k == 0 {
            return bad("top-k must be at least 1".into());
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!("top-p must lie in (0, 1], got {}", self.top_p));
        }
        if self.max_len == 0 {
            return bad("max length must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub finished: bool,
}

impl Hypothesis {
    fn empty() -> Self {
        Self {
            tokens: Vec::new(),
            log_prob: 0.0,
            finished: false,
        }
    }
}

/// Descending score, then ascending token sequence.
fn by_score(a_score: f64, a: &[usize], b_score: f64, b: &[usize]) -> Ordering {
    b_score
        .partial_cmp(&a_score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.cmp(b))
}

/// Token indices sorted by descending probability, ties by index.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn greedy<S: SequenceScorer>(scorer: &S, cfg: &DecodeConfig) -> Hypothesis {
    let end = scorer.end_token();
    let mut h = Hypothesis::empty();
    while !h.finished {
        let lps = scorer.next_log_probs(&h.tokens);
        let tok = argmax(&lps);
        h.log_prob += lps[tok];
        h.tokens.push(tok);
        h.finished = tok == end || h.tokens.len() >= cfg.max_len;
    }
    h
}

/// Beam search with an intra-sibling penalty.
///
/// Each step expands every active hypothesis with every token of nonzero
/// probability. Children of one parent are ranked by log-probability and the
/// child at 0-based rank `r` is selected with score `log_prob - gamma * r`;
/// the `width` best selection scores survive. Reported log-probabilities are
/// never penalized. Finished hypotheses move to a pool; the search stops once
/// the pool's `n_best`-th score exceeds every active score, or nothing is
/// left to expand.
pub fn beam_search_with<S: SequenceScorer>(
    scorer: &S,
    width: usize,
    n_best: usize,
    max_len: usize,
    gamma: f64,
) -> Vec<Hypothesis> {
    let end = scorer.end_token();
    let mut active = vec![Hypothesis::empty()];
    let mut pool: Vec<Hypothesis> = Vec::new();
    while !active.is_empty() {
        // (selection score, hypothesis)
        let mut cands: Vec<(f64, Hypothesis)> = Vec::new();
        for parent in &active {
            let lps = scorer.next_log_probs(&parent.tokens);
            for (rank, tok) in ranked(&lps).into_iter().enumerate() {
                if lps[tok] == f64::NEG_INFINITY {
                    break;
                }
                let log_prob = parent.log_prob + lps[tok];
                let mut tokens = parent.tokens.clone();
                tokens.push(tok);
                let finished = tok == end || tokens.len() >= max_len;
                cands.push((
                    log_prob - gamma * rank as f64,
                    Hypothesis {
                        tokens,
                        log_prob,
                        finished,
                    },
                ));
            }
        }
        cands.sort_by(|(sa, a), (sb, b)| by_score(*sa, &a.tokens, *sb, &b.tokens));
        cands.truncate(width);
        active.clear();
        for (_, h) in cands {
            if h.finished {
                pool.push(h);
            } else {
                active.push(h);
            }
        }
        pool.sort_by(|a, b| by_score(a.log_prob, &a.tokens, b.log_prob, &b.tokens));
        let best_active = active
            .iter()
            .map(|h| h.log_prob)
            .fold(f64::NEG_INFINITY, f64::max);
        if pool.len() >= n_best && pool[n_best - 1].log_prob > best_active {
            break;
        }
    }
    pool.truncate(n_best);
    pool
}

pub fn beam_search<S: SequenceScorer>(scorer: &S, cfg: &DecodeConfig) -> Vec<Hypothesis> {
    beam_search_with(scorer, cfg.n, cfg.n, cfg.max_len, 0.0)
}

pub fn diverse_beam_search<S: SequenceScorer>(scorer: &S, cfg: &DecodeConfig) -> Vec<Hypothesis> {
    beam_search_with(scorer, cfg.n, cfg.n, cfg.max_len, cfg.gamma)
}

/// The `k` most probable tokens, ties by index.
pub fn top_k_support(probs: &[f64], k: usize) -> Vec<usize> {
    let mut r = ranked(probs);
    r.truncate(k);
    r
}

/// Smallest prefix of the probability-sorted vocabulary whose mass reaches
/// `p`. `p >= 1` selects the whole vocabulary.
pub fn nucleus(probs: &[f64], p: f64) -> Vec<usize> {
    let order = ranked(probs);
    if p >= 1.0 {
        return order;
    }
    let mut mass = 0.0;
    for (i, &tok) in order.iter().enumerate() {
        mass += probs[tok];
        if mass >= p {
            return order[..=i].to_vec();
        }
    }
    order
}

/// Random stream of rollout `index`, independent of every other rollout.
pub fn rollout_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// One sampled sequence; `support` picks the candidate tokens at each step.
fn rollout<S, F>(scorer: &S, max_len: usize, rng: &mut ChaCha8Rng, support: F) -> Hypothesis
where
    S: SequenceScorer,
    F: Fn(&[f64]) -> Vec<usize>,
{
    let end = scorer.end_token();
    let mut h = Hypothesis::empty();
    while !h.finished {
        let lps = scorer.next_log_probs(&h.tokens);
        let probs: Vec<f64> = lps.iter().map(|l| l.exp()).collect();
        let allowed = support(&probs);
        let weights: Vec<f64> = allowed.iter().map(|&t| probs[t]).collect();
        let tok = match WeightedIndex::new(&weights) {
            Ok(dist) => allowed[dist.sample(rng)],
            Err(_) => allowed[0],
        };
        h.log_prob += lps[tok];
        h.tokens.push(tok);
        h.finished = tok == end || h.tokens.len() >= max_len;
    }
    h
}

pub fn top_k_rollout<S: SequenceScorer>(scorer: &S, cfg: &DecodeConfig, index: usize) -> Hypothesis {
    let mut rng = rollout_rng(cfg.seed, index);
    rollout(scorer, cfg.max_len, &mut rng, |p| top_k_support(p, cfg.top_k))
}

pub fn top_p_rollout<S: SequenceScorer>(scorer: &S, cfg: &DecodeConfig, index: usize) -> Hypothesis {
    let mut rng = rollout_rng(cfg.seed, index);
    rollout(scorer, cfg.max_len, &mut rng, |p| nucleus(p, cfg.top_p))
}

/// `cfg.n` independent rollouts, each step drawn from the renormalized top-k set.
pub fn top_k_sample<S: SequenceScorer>(scorer: &S, cfg: &DecodeConfig) -> Vec<Hypothesis> {
    (0..cfg.n).map(|i| top_k_rollout(scorer, cfg, i)).collect()
}

/// `cfg.n` independent rollouts, each step drawn from the renormalized nucleus.
pub fn top_p_sample<S: SequenceScorer>(scorer: &S, cfg: &DecodeConfig) -> Vec<Hypothesis> {
    (0..cfg.n).map(|i| top_p_rollout(scorer, cfg, i)).collect()
}

pub fn decode<S: SequenceScorer>(scorer: &S, cfg: &DecodeConfig) -> Vec<Hypothesis> {
    match cfg.method {
        Method::Greedy => vec![greedy(scorer, cfg)],
        Method::Beam => beam_search(scorer, cfg),
        Method::DiverseBeam => diverse_beam_search(scorer, cfg),
        Method::TopK => top_k_sample(scorer, cfg),
        Method::TopP => top_p_sample(scorer, cfg),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedAction {
    pub action: SystemAction,
    pub span: String,
    pub log_prob: f64,
}

/// Upper bound on hypotheses examined per requested action when duplicates
/// or unparsable spans have to be replaced.
const PAD_FACTOR: usize = 4;

/// Decodes up to `cfg.n` distinct system actions for a state.
///
/// Hypotheses are parsed as action spans (acts without a domain marker belong
/// to the state's domain), unparsable or empty ones are dropped and duplicates
/// collapse onto their best-ranked occurrence. Beam methods fill the gaps from
/// further down a longer beam pool. Sampling draws `cfg.n` parsable rollouts
/// (unparsable ones are redrawn) and keeps the distinct ones, so repeated
/// samples shrink the list. Greedy decoding always yields a single action.
pub fn decode_multi_action(
    model: &ActionModel,
    ontology: &Ontology,
    state: &DialogState,
    cfg: &DecodeConfig,
) -> Result<Vec<DecodedAction>> {
    cfg.validate()?;
    let scorer = model.scorer(state);
    let cap = cfg.n * PAD_FACTOR;
    let mut out: Vec<DecodedAction> = Vec::new();
    let mut seen_any = false;
    let mut accept = |h: Hypothesis, out: &mut Vec<DecodedAction>| -> bool {
        seen_any = true;
        let tokens: Vec<&str> = h
            .tokens
            .iter()
            .filter(|&&t| t != scorer.end_token())
            .map(|&t| model.token(t))
            .collect();
        let Ok(action) = spans::decode_action_span(&tokens, ontology, Some(&state.domain)) else {
            return false;
        };
        if action.is_empty() {
            return false;
        }
        let span = spans::action_span_string(&action, ontology);
        if out.iter().all(|d| d.span != span) {
            out.push(DecodedAction {
                action,
                span,
                log_prob: h.log_prob,
            });
        }
        true
    };
    match cfg.method {
        Method::Greedy => {
            accept(greedy(&scorer, cfg), &mut out);
        }
        Method::Beam | Method::DiverseBeam => {
            let gamma = if cfg.method == Method::Beam { 0.0 } else { cfg.gamma };
            for h in beam_search_with(&scorer, cfg.n, cap, cfg.max_len, gamma) {
                if out.len() == cfg.n {
                    break;
                }
                accept(h, &mut out);
            }
        }
        Method::TopK | Method::TopP => {
            let mut parsed = 0;
            for i in 0..cap {
                if parsed == cfg.n {
                    break;
                }
                let h = if cfg.method == Method::TopK {
                    top_k_rollout(&scorer, cfg, i)
                } else {
                    top_p_rollout(&scorer, cfg, i)
                };
                parsed += usize::from(accept(h, &mut out));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Invalid(if seen_any {
            "no decoded hypothesis parses as an action span".into()
        } else {
            "decoder produced no hypotheses".into()
        }));
    }
    out.truncate(cfg.n);
    Ok(out)
}

/// Small deterministic scorers for tests and demos.
pub mod toy {
    use super::SequenceScorer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Wraps a closure `prefix -> log-probabilities`.
    pub struct FnScorer<F> {
        pub vocab: usize,
        pub end: usize,
        pub f: F,
    }

    impl<F: Fn(&[usize]) -> Vec<f64>> SequenceScorer for FnScorer<F> {
        fn vocab_size(&self) -> usize {
            self.vocab
        }
        fn end_token(&self) -> usize {
            self.end
        }
        fn next_log_probs(&self, prefix: &[usize]) -> Vec<f64> {
            (self.f)(prefix)
        }
    }

    /// A fixed random distribution for every prefix, derived from `seed` and
    /// the prefix itself.
    #[derive(Debug, Clone, Copy)]
    pub struct RandomScorer {
        pub vocab: usize,
        pub end: usize,
        pub seed: u64,
        /// Larger values give peakier distributions.
        pub sharpness: f64,
    }

    impl RandomScorer {
        pub fn new(vocab: usize, seed: u64) -> Self {
            Self {
                vocab,
                end: 0,
                seed,
                sharpness: 1.0,
            }
        }

        pub fn probs(&self, prefix: &[usize]) -> Vec<f64> {
            let mut key = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
            for &t in prefix {
                key = key.rotate_left(7) ^ (t as u64 + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(key);
            rng.set_stream(prefix.len() as u64);
            let w: Vec<f64> = (0..self.vocab)
                .map(|_| (rng.gen::<f64>() * 4.0 * self.sharpness).exp())
                .collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|x| x / z).collect()
        }
    }

    impl SequenceScorer for RandomScorer {
        fn vocab_size(&self) -> usize {
            self.vocab
        }
        fn end_token(&self) -> usize {
            self.end
        }
        fn next_log_probs(&self, prefix: &[usize]) -> Vec<f64> {
            self.probs(prefix).into_iter().map(f64::ln).collect()
        }
    }
}
