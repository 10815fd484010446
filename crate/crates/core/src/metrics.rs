//! Automatic evaluation: inform and success rates, corpus BLEU, combined
//! score, and act/slot diversity of generated action sets.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{entity_name, normalize_text, Dialog, Ontology, VenueDatabase};
use crate::delex::{placeholder, Substitution};
use crate::error::{Error, Result};
use crate::spans::{self, SystemAction};

/// One predicted system turn (one JSONL record of a predictions file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub dialog_id: String,
    pub turn: usize,
    /// Delexicalized response.
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_span: Option<String>,
    /// Every decoded candidate action, best first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<String>,
    /// Values filled into the response's placeholders.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub substitutions: Vec<Substitution>,
}

fn ngrams(tokens: &[&str], n: usize) -> HashMap<Vec<String>, usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.iter().map(|s| s.to_string()).collect()).or_default() += 1;
        }
    }
    m
}

/// Corpus BLEU-4 on a 0-100 scale.
///
/// Modified precisions use uniform weights. A zero match count for n >= 2 is
/// smoothed to `1 / (total + 1)`; zero unigram matches give 0. The brevity
/// penalty is `exp(1 - r/c)` when the candidates are not longer than the
/// references.
pub fn bleu<S: AsRef<str>, T: AsRef<str>>(candidates: &[S], references: &[T]) -> Result<f64> {
    if candidates.len() != references.len() {
        return Err(Error::Invalid(format!(
            "bleu: {} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (cand, refr) in candidates.iter().zip(references) {
        let cand = normalize_text(cand.as_ref());
        let refr = normalize_text(refr.as_ref());
        let ct: Vec<&str> = cand.split_whitespace().collect();
        let rt: Vec<&str> = refr.split_whitespace().collect();
        c += ct.len();
        r += rt.len();
        for n in 1..=4 {
            let rc = ngrams(&rt, n);
            for (g, k) in ngrams(&ct, n) {
                matches[n - 1] += k.min(rc.get(&g).copied().unwrap_or(0));
                totals[n - 1] += k;
            }
        }
    }
    if c == 0 || matches[0] == 0 {
        return Ok(0.0);
    }
    let mut log_p = 0.0;
    for n in 0..4 {
        let p = if matches[n] == 0 {
            1.0 / (totals[n] as f64 + 1.0)
        } else {
            matches[n] as f64 / totals[n] as f64
        };
        log_p += p.ln() / 4.0;
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    Ok(100.0 * bp * log_p.exp())
}

/// `(inform + success) * 0.5 + bleu`.
pub fn combined_score(inform: f64, success: f64, bleu: f64) -> f64 {
    (inform + success) * 0.5 + bleu
}

fn contains_phrase(text: &str, phrase: &str) -> bool {
    !phrase.is_empty() && format!(" {text} ").contains(&format!(" {phrase} "))
}

/// Inform and success outcome of one dialog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DialogOutcome {
    pub inform: bool,
    pub success: bool,
}

/// Scores one dialog given its predicted turns.
///
/// A goal domain is informed when some offered entity (a `name`/`id`
/// substitution, or a database name appearing verbatim in a response) is
/// among the records satisfying the goal's constraints. Domains without a
/// database are informed trivially. Success also needs every requested slot
/// to be provided, either as a placeholder or a substitution.
pub fn dialog_outcome(
    dialog: &Dialog,
    turns: &[&Prediction],
    db: &VenueDatabase,
    ontology: &Ontology,
) -> DialogOutcome {
    let texts: Vec<String> = turns.iter().map(|p| normalize_text(&p.response)).collect();
    let subs: Vec<&Substitution> = turns.iter().flat_map(|p| &p.substitutions).collect();
    let mut inform = true;
    let mut success = true;
    for domain in dialog.goal_domains(ontology) {
        let goal = &dialog.goal[domain];
        let informed = if db.has_domain(domain) {
            let offered: BTreeSet<&str> = subs
                .iter()
                .filter(|s| matches!(s.slot(), Some("name" | "id")))
                .map(|s| s.value.as_str())
                .chain(
                    db.records(domain)
                        .iter()
                        .filter_map(entity_name)
                        .filter(|n| texts.iter().any(|t| contains_phrase(t, n))),
                )
                .collect();
            db.query(ontology, domain, &goal.inform)
                .filter_map(entity_name)
                .any(|n| offered.contains(n))
        } else {
            true
        };
        let provided = goal.request.iter().all(|slot| {
            let ph = placeholder(slot);
            texts.iter().any(|t| t.split_whitespace().any(|w| w == ph))
                || subs.iter().any(|s| s.slot() == Some(slot))
        });
        inform &= informed;
        success &= informed && provided;
    }
    DialogOutcome { inform, success }
}

/// Inform and success rates in percent over dialogs.
pub fn inform_success(
    dialogs: &[Dialog],
    predictions: &[Prediction],
    db: &VenueDatabase,
    ontology: &Ontology,
) -> Result<(f64, f64)> {
    if dialogs.is_empty() {
        return Err(Error::Invalid("no dialogs to evaluate".into()));
    }
    let by_turn = index_predictions(predictions);
    let (mut inform, mut success) = (0usize, 0usize);
    for d in dialogs {
        let turns = dialog_predictions(d, &by_turn)?;
        let o = dialog_outcome(d, &turns, db, ontology);
        inform += usize::from(o.inform);
        success += usize::from(o.success);
    }
    let n = dialogs.len() as f64;
    Ok((100.0 * inform as f64 / n, 100.0 * success as f64 / n))
}

fn index_predictions(predictions: &[Prediction]) -> HashMap<(&str, usize), &Prediction> {
    predictions
        .iter()
        .map(|p| ((p.dialog_id.as_str(), p.turn), p))
        .collect()
}

fn dialog_predictions<'a>(
    dialog: &Dialog,
    by_turn: &HashMap<(&str, usize), &'a Prediction>,
) -> Result<Vec<&'a Prediction>> {
    (0..dialog.turns.len())
        .map(|t| {
            by_turn
                .get(&(dialog.dialog_id.as_str(), t))
                .copied()
                .ok_or_else(|| Error::Invalid(format!("dialog {}, turn {t}: missing prediction", dialog.dialog_id)))
        })
        .collect()
}

/// Mean number of distinct act types and slot names per turn, each turn
/// pooling all of its candidate actions.
pub fn act_slot_diversity(turns: &[Vec<SystemAction>]) -> (f64, f64) {
    if turns.is_empty() {
        return (0.0, 0.0);
    }
    let (mut acts, mut slots) = (0usize, 0usize);
    for actions in turns {
        let a: BTreeSet<&str> = actions.iter().flat_map(|x| x.act_types()).collect();
        let s: BTreeSet<&str> = actions.iter().flat_map(|x| x.slot_names()).collect();
        acts += a.len();
        slots += s.len();
    }
    let n = turns.len() as f64;
    (acts as f64 / n, slots as f64 / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub inform: f64,
    pub success: f64,
    pub bleu: f64,
    pub combined: f64,
    pub act_number: f64,
    pub slot_number: f64,
}

impl MetricReport {
    pub const NAMES: [&'static str; 6] = ["Inform", "Success", "BLEU", "Combined", "Act #", "Slot #"];

    pub fn values(&self) -> [f64; 6] {
        [
            self.inform,
            self.success,
            self.bleu,
            self.combined,
            self.act_number,
            self.slot_number,
        ]
    }

    /// Field-wise mean over several runs. `None` for an empty slice.
    pub fn mean(runs: &[MetricReport]) -> Option<MetricReport> {
        if runs.is_empty() {
            return None;
        }
        let n = runs.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| runs.iter().map(f).sum::<f64>() / n;
        Some(MetricReport {
            inform: avg(|r| r.inform),
            success: avg(|r| r.success),
            bleu: avg(|r| r.bleu),
            combined: avg(|r| r.combined),
            act_number: avg(|r| r.act_number),
            slot_number: avg(|r| r.slot_number),
        })
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, v) in Self::NAMES.iter().zip(self.values()) {
            writeln!(f, "{name:<10}{v:>8.2}")?;
        }
        Ok(())
    }
}

/// Side-by-side table of named reports.
pub fn comparison_table(columns: &[(&str, &MetricReport)]) -> String {
    let mut out = format!("{:<10}", "metric");
    for (name, _) in columns {
        out.push_str(&format!("{name:>12}"));
    }
    out.push('\n');
    for (i, metric) in MetricReport::NAMES.iter().enumerate() {
        out.push_str(&format!("{metric:<10}"));
        for (_, r) in columns {
            out.push_str(&format!("{:>12.2}", r.values()[i]));
        }
        out.push('\n');
    }
    out
}

/// All six metrics for a predictions file. References are the delexicalized
/// gold responses; diversity uses each turn's candidates (or its single
/// action when no candidates were recorded).
pub fn evaluate(
    dialogs: &[Dialog],
    predictions: &[Prediction],
    db: &VenueDatabase,
    ontology: &Ontology,
) -> Result<MetricReport> {
    let (inform, success) = inform_success(dialogs, predictions, db, ontology)?;
    let by_turn = index_predictions(predictions);
    let mut cands = Vec::new();
    let mut refs = Vec::new();
    let mut actions = Vec::new();
    for d in dialogs {
        for (t, p) in dialog_predictions(d, &by_turn)?.into_iter().enumerate() {
            let turn = &d.turns[t];
            cands.push(p.response.as_str());
            refs.push(turn.delex_response.as_deref().unwrap_or(&turn.response));
            let spans_of_turn: Vec<&str> = if p.candidates.is_empty() {
                p.action_span.iter().map(String::as_str).collect()
            } else {
                p.candidates.iter().map(String::as_str).collect()
            };
            let parsed = spans_of_turn
                .into_iter()
                .map(|s| spans::parse_action_span(s, ontology, None))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if !parsed.is_empty() {
                actions.push(parsed);
            }
        }
    }
    let bleu = bleu(&cands, &refs)?;
    let (act_number, slot_number) = act_slot_diversity(&actions);
    Ok(MetricReport {
        inform,
        success,
        bleu,
        combined: combined_score(inform, success, bleu),
        act_number,
        slot_number,
    })
}
