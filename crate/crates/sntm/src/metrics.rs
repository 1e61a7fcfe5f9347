//! Transfer evaluation: copy ratio, perplexity, lexicon rate, and per-layer
//! divergence profiles.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::corpus::{tokenize, Vocabulary, BOS_ID};
use crate::decoding::jensen_shannon;
use crate::error::{Error, Result};
use crate::model::{forward, logprob_sequence, ModelWeights};
use crate::steering::DeactivationMask;

/// Fraction of output lines identical to their input line after
/// normalization: lowercase, collapsed whitespace, and leading/trailing
/// punctuation stripped.
pub fn copy_ratio(inputs: &[String], outputs: &[String]) -> Result<f64> {
    if inputs.len() != outputs.len() {
        return Err(Error::InvalidInput(format!(
            "copy ratio needs aligned lists, got {} inputs and {} outputs",
            inputs.len(),
            outputs.len()
        )));
    }
    if inputs.is_empty() {
        return Err(Error::InvalidInput("copy ratio of empty lists".into()));
    }
    let copies = inputs
        .iter()
        .zip(outputs)
        .filter(|(a, b)| normalize_for_copy(a) == normalize_for_copy(b))
        .count();
    Ok(copies as f64 / inputs.len() as f64)
}

fn normalize_for_copy(text: &str) -> String {
    let trimmed = text.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    trimmed
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Mean perplexity over token sequences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerplexityReport {
    /// Arithmetic mean of per-sequence perplexities; absent when every
    /// sequence was too short to score.
    pub mean: Option<f64>,
    pub scored: usize,
    pub skipped_too_short: usize,
}

/// Per-sequence perplexity `exp(-logprob / (len - 1))` under the given
/// scoring model; sequences shorter than two tokens are skipped and
/// counted.
pub fn perplexity(weights: &ModelWeights, sequences: &[Vec<u32>]) -> Result<PerplexityReport> {
    let mut total = 0.0f64;
    let mut scored = 0usize;
    let mut skipped = 0usize;
    for seq in sequences {
        if seq.len() < 2 {
            skipped += 1;
            continue;
        }
        let lp = logprob_sequence(weights, seq)?;
        total += (-lp / (seq.len() - 1) as f64).exp();
        scored += 1;
    }
    Ok(PerplexityReport {
        mean: (scored > 0).then(|| total / scored as f64),
        scored,
        skipped_too_short: skipped,
    })
}

/// Fraction of generated tokens that belong to the lexicon, begin markers
/// excluded.
pub fn lexicon_rate(outputs: &[Vec<u32>], lexicon: &BTreeSet<u32>) -> f64 {
    let mut hits = 0usize;
    let mut total = 0usize;
    for seq in outputs {
        for &t in seq {
            if t == BOS_ID {
                continue;
            }
            total += 1;
            if lexicon.contains(&t) {
                hits += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Divergence of every layer's early exit from the final layer, per greedy
/// decode step.
///
/// Returns `n_layers` rows of `steps` cells: `profile[j][t]` is the
/// Jensen-Shannon divergence between layer `j`'s early-exit distribution
/// and the final distribution at step `t`. Row 0 is the embedding-layer
/// exit.
pub fn jsd_profile(
    weights: &ModelWeights,
    prompt: &[u32],
    mask: Option<&DeactivationMask>,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    if prompt.is_empty() {
        return Err(Error::InvalidInput("prompt is empty".into()));
    }
    if steps < 1 {
        return Err(Error::InvalidInput("need at least one decode step".into()));
    }
    if prompt.len() + steps > weights.config.max_seq_len {
        return Err(Error::Capacity(format!(
            "prompt length {} plus {steps} steps exceeds max_seq_len {}",
            prompt.len(),
            weights.config.max_seq_len
        )));
    }
    let n_layers = weights.config.n_layers;
    let mut profile = vec![vec![0.0f64; steps]; n_layers];
    let mut tokens = prompt.to_vec();
    for step in 0..steps {
        let (dists, _) = forward(weights, &tokens, mask)?;
        let final_row = dists.final_row();
        for layer in 0..n_layers {
            profile[layer][step] = jensen_shannon(final_row, dists.row(layer));
        }
        // Greedy continuation, lowest id on ties.
        let mut best = 0usize;
        for (i, &p) in final_row.iter().enumerate() {
            if p > final_row[best] {
                best = i;
            }
        }
        tokens.push(best as u32);
    }
    Ok(profile)
}

/// Renders a profile as CSV: one row per layer, one column per step.
pub fn profile_to_csv(profile: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in profile {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Aggregate transfer evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub instances: usize,
    pub copy_ratio: f64,
    pub mean_perplexity: Option<f64>,
    pub skipped_too_short: usize,
    pub target_lexicon_rate: f64,
}

impl EvalReport {
    /// Plain-text table with one row per metric.
    pub fn table(&self) -> String {
        let ppl = match self.mean_perplexity {
            Some(v) => format!("{v:.4}"),
            None => "n/a".into(),
        };
        let mut out = String::new();
        out.push_str(&format!("{:<22} {:>12}\n", "instances", self.instances));
        out.push_str(&format!("{:<22} {:>12.4}\n", "copy_ratio", self.copy_ratio));
        out.push_str(&format!("{:<22} {:>12}\n", "mean_perplexity", ppl));
        out.push_str(&format!(
            "{:<22} {:>12}\n",
            "skipped_too_short", self.skipped_too_short
        ));
        out.push_str(&format!(
            "{:<22} {:>12.4}\n",
            "target_lexicon_rate", self.target_lexicon_rate
        ));
        out
    }
}

/// Scores aligned source/hypothesis text with the given model and target
/// lexicon.
pub fn evaluate(
    weights: &ModelWeights,
    vocab: &Vocabulary,
    sources: &[String],
    hypotheses: &[String],
    target_lexicon: &BTreeSet<u32>,
) -> Result<EvalReport> {
    let ratio = copy_ratio(sources, hypotheses)?;
    let sequences: Vec<Vec<u32>> = hypotheses.iter().map(|h| tokenize(h, vocab)).collect();
    let ppl = perplexity(weights, &sequences)?;
    let rate = lexicon_rate(&sequences, target_lexicon);
    Ok(EvalReport {
        instances: sources.len(),
        copy_ratio: ratio,
        mean_perplexity: ppl.mean,
        skipped_too_short: ppl.skipped_too_short,
        target_lexicon_rate: rate,
    })
}
