//! Generation loop and contrastive next-token selection.
//!
//! Four strategies:
//! - `greedy`: argmax of the final-layer distribution;
//! - `nucleus`: seeded top-p sampling from the final-layer distribution;
//! - `dola-early`: contrast the final layer against early candidate layers;
//! - `sneuron`: contrast the final layer against the last few ("style")
//!   layers, normally combined with a deactivation mask.
//!
//! Contrastive selection restricts scoring to the plausible set — tokens
//! whose final-layer probability is at least `alpha` times the maximum —
//! then scores each plausible token by the log-ratio of its final-layer to
//! premature-layer probability. The premature layer is chosen per step as
//! the candidate with the largest Jensen-Shannon divergence from the final
//! layer.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{forward, LayerDistributions, ModelWeights};
use crate::steering::DeactivationMask;

/// Floor applied to premature-layer probabilities before the log-ratio.
const PREMATURE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Greedy,
    Nucleus,
    DolaEarly,
    Sneuron,
}

impl Strategy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Strategy::Greedy),
            "nucleus" => Ok(Strategy::Nucleus),
            "dola_early" | "dola-early" => Ok(Strategy::DolaEarly),
            "sneuron" => Ok(Strategy::Sneuron),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}' (expected greedy|nucleus|dola_early|sneuron)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::Nucleus => "nucleus",
            Strategy::DolaEarly => "dola_early",
            Strategy::Sneuron => "sneuron",
        }
    }

    pub fn is_contrastive(&self) -> bool {
        matches!(self, Strategy::DolaEarly | Strategy::Sneuron)
    }
}

/// Decoding parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    pub strategy: Strategy,
    pub max_new_tokens: usize,
    /// Plausibility coefficient: a token stays eligible when its final
    /// probability is at least `alpha` times the maximum. `alpha = 1`
    /// keeps only the argmax set.
    pub alpha: f64,
    /// Explicit candidate layer set; indices are layer-boundary rows and
    /// must exclude the final row.
    pub candidate_layers: Option<BTreeSet<usize>>,
    /// Number of trailing layers used as candidates when no explicit set is
    /// given to the sneuron strategy.
    pub style_layer_count: usize,
    pub nucleus_p: f64,
    pub stop_token: Option<u32>,
    /// Seed for nucleus sampling.
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            strategy: Strategy::Greedy,
            max_new_tokens: 16,
            alpha: 0.1,
            candidate_layers: None,
            style_layer_count: 4,
            nucleus_p: 0.95,
            stop_token: None,
            seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_new_tokens < 1 {
            return Err(Error::Config("max_new_tokens must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.nucleus_p > 0.0 && self.nucleus_p <= 1.0) {
            return Err(Error::Config(format!(
                "nucleus_p must be in (0, 1], got {}",
                self.nucleus_p
            )));
        }
        if self.style_layer_count < 1 {
            return Err(Error::Config("style_layer_count must be >= 1".into()));
        }
        Ok(())
    }

    /// Resolves the candidate layer set for a model with `n_layers` layers.
    ///
    /// Explicit sets are validated; defaults are the last
    /// `style_layer_count` non-final rows for sneuron and the even rows of
    /// the first half for dola-early.
    pub fn resolve_candidates(&self, n_layers: usize) -> Result<BTreeSet<usize>> {
        if let Some(set) = &self.candidate_layers {
            if set.is_empty() {
                return Err(Error::Config("candidate layer set is empty".into()));
            }
            if let Some(&bad) = set.iter().find(|&&j| j >= n_layers) {
                return Err(Error::Config(format!(
                    "candidate layer {bad} must be below the final layer index {n_layers}"
                )));
            }
            return Ok(set.clone());
        }
        let set: BTreeSet<usize> = match self.strategy {
            Strategy::Sneuron => {
                let lo = n_layers.saturating_sub(self.style_layer_count);
                (lo..n_layers).collect()
            }
            Strategy::DolaEarly => {
                let half = (n_layers / 2).max(1);
                (0..half).step_by(2).collect()
            }
            Strategy::Greedy | Strategy::Nucleus => BTreeSet::new(),
        };
        if set.is_empty() && self.strategy.is_contrastive() {
            return Err(Error::Config("candidate layer set is empty".into()));
        }
        Ok(set)
    }
}

/// Plausible token set: ids whose final probability is at least
/// `alpha * max`. Never empty — the argmax always qualifies.
pub fn plausible_set(final_dist: &[f32], alpha: f64) -> Vec<u32> {
    let max = final_dist.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let threshold = alpha * f64::from(max);
    final_dist
        .iter()
        .enumerate()
        .filter(|(_, &p)| f64::from(p) >= threshold)
        .map(|(w, _)| w as u32)
        .collect()
}

/// Log-domain contrast of a final-layer distribution against a premature
/// one, restricted to the plausible set.
///
/// Scores are `ln(p_final / p_premature)` on the set and minus infinity
/// elsewhere; the returned distribution is their softmax, with exactly zero
/// mass outside the set. Premature probabilities are floored at `1e-12`.
pub fn contrast(final_dist: &[f32], premature_dist: &[f32], phi: &[u32]) -> Vec<f64> {
    debug_assert!(!phi.is_empty());
    let scores: Vec<f64> = phi
        .iter()
        .map(|&w| {
            let p_final = f64::from(final_dist[w as usize]);
            let p_pre = f64::from(premature_dist[w as usize]).max(PREMATURE_FLOOR);
            (p_final / p_pre).ln()
        })
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let mut out = vec![0.0f64; final_dist.len()];
    for (&w, &e) in phi.iter().zip(&exps) {
        out[w as usize] = e / sum;
    }
    out
}

/// Jensen-Shannon divergence in nats: `0.5 KL(p || m) + 0.5 KL(q || m)`
/// with `m` the midpoint. Symmetric, non-negative, at most `ln 2`.
pub fn jensen_shannon(p: &[f32], q: &[f32]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let kl_to_mid = |a: &[f32], b: &[f32]| -> f64 {
        let mut kl = 0.0f64;
        for (&ai, &bi) in a.iter().zip(b) {
            let ai = f64::from(ai);
            if ai > 0.0 {
                let m = 0.5 * (ai + f64::from(bi));
                kl += ai * (ai / m).ln();
            }
        }
        kl
    };
    0.5 * kl_to_mid(p, q) + 0.5 * kl_to_mid(q, p)
}

/// Picks the premature layer: the candidate row with the largest divergence
/// from the final row, ties resolved to the largest layer index.
pub fn select_premature(
    dists: &LayerDistributions,
    candidates: &BTreeSet<usize>,
) -> (usize, Vec<(usize, f64)>) {
    let final_row = dists.final_row();
    let mut jsd_values = Vec::with_capacity(candidates.len());
    let mut best_layer = 0usize;
    let mut best = f64::NEG_INFINITY;
    for &j in candidates {
        let jsd = jensen_shannon(final_row, dists.row(j));
        jsd_values.push((j, jsd));
        if jsd >= best {
            best = jsd;
            best_layer = j;
        }
    }
    (best_layer, jsd_values)
}

/// Per-step decoding record.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub token: u32,
    /// Premature layer used by a contrastive strategy.
    pub premature_layer: Option<usize>,
    /// Divergence of every candidate layer from the final layer.
    pub jsd: Vec<(usize, f64)>,
    /// Plausible-set membership bitmap over the vocabulary.
    pub phi: Option<Vec<bool>>,
    /// Final-layer probability of the chosen token.
    pub p_final: f32,
    /// Premature-layer probability of the chosen token.
    pub p_premature: Option<f32>,
}

impl StepRecord {
    pub fn phi_size(&self) -> Option<usize> {
        self.phi
            .as_ref()
            .map(|bits| bits.iter().filter(|&&b| b).count())
    }
}

fn argmax_f32(dist: &[f32]) -> u32 {
    let mut best = 0usize;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best as u32
}

/// Argmax of the contrast distribution; exact ties prefer the token with
/// the higher final-layer probability, then the lower id, so a degenerate
/// contrast (equal distributions) reduces to greedy selection.
fn argmax_contrast(contrast_dist: &[f64], final_dist: &[f32], phi: &[u32]) -> u32 {
    let mut best = phi[0];
    for &w in &phi[1..] {
        let (c_w, c_b) = (contrast_dist[w as usize], contrast_dist[best as usize]);
        let (f_w, f_b) = (final_dist[w as usize], final_dist[best as usize]);
        if c_w > c_b || (c_w == c_b && f_w > f_b) {
            best = w;
        }
    }
    best
}

fn sample_nucleus(dist: &[f32], nucleus_p: f64, rng: &mut ChaCha8Rng) -> u32 {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    let mut cumulative = 0.0f64;
    let mut cut = order.len();
    for (i, &w) in order.iter().enumerate() {
        cumulative += f64::from(dist[w]);
        if cumulative >= nucleus_p {
            cut = i + 1;
            break;
        }
    }
    let kept = &order[..cut];
    let total: f64 = kept.iter().map(|&w| f64::from(dist[w])).sum();
    let draw = rng.random::<f64>() * total;
    let mut acc = 0.0f64;
    for &w in kept {
        acc += f64::from(dist[w]);
        if draw < acc {
            return w as u32;
        }
    }
    kept[kept.len() - 1] as u32
}

/// Runs the generation loop.
///
/// Returns the generated tokens (prompt excluded) and one record per step.
/// The mask, when given, applies to every forward pass, prompt positions
/// included. Generation stops after `max_new_tokens` or when the stop
/// token is emitted (the stop token is included in the output).
pub fn generate(
    weights: &ModelWeights,
    prompt: &[u32],
    mask: Option<&DeactivationMask>,
    config: &DecodeConfig,
) -> Result<(Vec<u32>, Vec<StepRecord>)> {
    config.validate()?;
    if prompt.is_empty() {
        return Err(Error::InvalidInput("prompt is empty".into()));
    }
    let n_layers = weights.config.n_layers;
    if prompt.len() + config.max_new_tokens > weights.config.max_seq_len {
        return Err(Error::Capacity(format!(
            "prompt length {} plus max_new_tokens {} exceeds max_seq_len {}",
            prompt.len(),
            config.max_new_tokens,
            weights.config.max_seq_len
        )));
    }
    let candidates = if config.strategy.is_contrastive() {
        Some(config.resolve_candidates(n_layers)?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut tokens: Vec<u32> = prompt.to_vec();
    let mut generated = Vec::new();
    let mut records = Vec::new();
    for _ in 0..config.max_new_tokens {
        let (dists, _) = forward(weights, &tokens, mask)?;
        let final_dist = dists.final_row();
        let record = match config.strategy {
            Strategy::Greedy => {
                let token = argmax_f32(final_dist);
                StepRecord {
                    token,
                    premature_layer: None,
                    jsd: Vec::new(),
                    phi: None,
                    p_final: final_dist[token as usize],
                    p_premature: None,
                }
            }
            Strategy::Nucleus => {
                let token = sample_nucleus(final_dist, config.nucleus_p, &mut rng);
                StepRecord {
                    token,
                    premature_layer: None,
                    jsd: Vec::new(),
                    phi: None,
                    p_final: final_dist[token as usize],
                    p_premature: None,
                }
            }
            Strategy::DolaEarly | Strategy::Sneuron => {
                let candidates = candidates.as_ref().expect("resolved above");
                let phi = plausible_set(final_dist, config.alpha);
                let (premature, jsd) = select_premature(&dists, candidates);
                let contrast_dist = contrast(final_dist, dists.row(premature), &phi);
                let token = argmax_contrast(&contrast_dist, final_dist, &phi);
                let mut bitmap = vec![false; final_dist.len()];
                for &w in &phi {
                    bitmap[w as usize] = true;
                }
                StepRecord {
                    token,
                    premature_layer: Some(premature),
                    jsd,
                    phi: Some(bitmap),
                    p_final: final_dist[token as usize],
                    p_premature: Some(dists.row(premature)[token as usize]),
                }
            }
        };
        let token = record.token;
        tokens.push(token);
        generated.push(token);
        records.push(record);
        if config.stop_token == Some(token) {
            break;
        }
    }
    Ok((generated, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factory::synth_random;
    use crate::model::{Activation, ModelConfig};
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    #[test]
    fn plausible_set_thresholds_correctly() {
        let p = [0.7f32, 0.2, 0.05, 0.05];
        // threshold = 0.1 * 0.7 = 0.07
        assert_eq!(plausible_set(&p, 0.1), vec![0, 1]);
    }

    #[test]
    fn alpha_one_keeps_only_the_argmax_set() {
        let p = [0.7f32, 0.2, 0.05, 0.05];
        assert_eq!(plausible_set(&p, 1.0), vec![0]);
    }

    #[test]
    fn uniform_distribution_keeps_everything() {
        let p = [0.25f32; 4];
        assert_eq!(plausible_set(&p, 1.0), vec![0, 1, 2, 3]);
        assert_eq!(plausible_set(&p, 0.3), vec![0, 1, 2, 3]);
    }

    #[test]
    fn contrast_of_equal_distributions_is_uniform_on_phi() {
        let p = [0.5f32, 0.3, 0.2];
        let out = contrast(&p, &p, &[0, 1]);
        assert!((out[0] - 0.5).abs() < 1e-12);
        assert!((out[1] - 0.5).abs() < 1e-12);
        assert_eq!(out[2], 0.0);
    }

    #[test]
    fn contrast_worked_example() {
        let p_final = [0.5f32, 0.3, 0.2];
        let p_pre = [0.25f32, 0.3, 0.45];
        let out = contrast(&p_final, &p_pre, &[0, 1]);
        assert!((out[0] - 2.0 / 3.0).abs() < 1e-9, "{}", out[0]);
        assert!((out[1] - 1.0 / 3.0).abs() < 1e-9, "{}", out[1]);
        assert_eq!(out[2], 0.0);
    }

    #[test]
    fn contrast_on_singleton_phi_is_one_hot() {
        let p_final = [0.5f32, 0.3, 0.2];
        let p_pre = [0.2f32, 0.5, 0.3];
        let out = contrast(&p_final, &p_pre, &[0]);
        assert_eq!(out, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn jsd_identical_rows_and_tie_rule() {
        let p = [0.4f32, 0.6];
        let rows =
            crate::model::LayerDistributions::from_rows(vec![p.to_vec(), p.to_vec(), p.to_vec()]);
        let candidates: BTreeSet<usize> = [0usize, 1].into_iter().collect();
        let (m, jsd) = select_premature(&rows, &candidates);
        assert_eq!(m, 1, "ties resolve to the largest layer index");
        assert!(jsd.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn jsd_hand_value() {
        let p = [1.0f32, 0.0];
        let q = [0.5f32, 0.5];
        let jsd = jensen_shannon(&p, &q);
        // Independent formulation: JSD = H(m) - (H(p) + H(q)) / 2.
        let entropy = |d: &[f32]| -> f64 {
            d.iter()
                .map(|&x| f64::from(x))
                .filter(|&x| x > 0.0)
                .map(|x| -x * x.ln())
                .sum()
        };
        let m = [0.75f64, 0.25];
        let h_m: f64 = m.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
        let oracle = h_m - 0.5 * (entropy(&p) + entropy(&q));
        assert!((jsd - oracle).abs() < 1e-6);
        assert!((jsd - 0.2158).abs() < 5e-5, "{jsd}");
    }

    #[test]
    fn jsd_is_symmetric() {
        let p = [0.1f32, 0.7, 0.2];
        let q = [0.3f32, 0.3, 0.4];
        assert_eq!(jensen_shannon(&p, &q), jensen_shannon(&q, &p));
    }

    fn test_model(n_layers: usize) -> crate::model::ModelWeights {
        let config = ModelConfig {
            n_layers,
            d_model: 8,
            n_heads: 2,
            d_ffn: 8,
            vocab_size: 10,
            max_seq_len: 32,
            activation_kind: Activation::SiluGlu,
        };
        synth_random(&config, 33, 0.9).unwrap()
    }

    /// Zeroing a layer's weights makes it an exact no-op, so its early-exit
    /// row equals the final row bit for bit.
    fn zero_last_layer(w: &mut crate::model::ModelWeights) {
        let l = w.layers.last_mut().unwrap();
        *l = crate::model::LayerWeights::zeros(&w.config);
    }

    #[test]
    fn degenerate_sneuron_equals_greedy() {
        let mut w = test_model(3);
        zero_last_layer(&mut w);
        let n = w.config.n_layers;
        let (d, _) = forward(&w, &[1, 2, 3], None).unwrap();
        assert_eq!(d.row(n - 1), d.row(n));

        let sneuron = DecodeConfig {
            strategy: Strategy::Sneuron,
            candidate_layers: Some([n - 1].into_iter().collect()),
            max_new_tokens: 12,
            ..Default::default()
        };
        let greedy = DecodeConfig {
            strategy: Strategy::Greedy,
            max_new_tokens: 12,
            ..Default::default()
        };
        for prompt in [[1u32, 2].as_slice(), &[5, 7, 3], &[9]] {
            let (a, recs) = generate(&w, prompt, None, &sneuron).unwrap();
            let (b, _) = generate(&w, prompt, None, &greedy).unwrap();
            assert_eq!(a, b);
            for r in recs {
                assert_eq!(r.premature_layer, Some(n - 1));
                let bits = r.phi.as_ref().unwrap();
                assert!(bits[r.token as usize], "chosen token must be plausible");
            }
        }
    }

    #[test]
    fn tiny_nucleus_p_is_greedy() {
        let w = test_model(2);
        let nucleus = DecodeConfig {
            strategy: Strategy::Nucleus,
            nucleus_p: f64::MIN_POSITIVE,
            max_new_tokens: 10,
            seed: 7,
            ..Default::default()
        };
        let greedy = DecodeConfig {
            strategy: Strategy::Greedy,
            max_new_tokens: 10,
            ..Default::default()
        };
        let (a, _) = generate(&w, &[1, 2], None, &nucleus).unwrap();
        let (b, _) = generate(&w, &[1, 2], None, &greedy).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nucleus_is_deterministic_per_seed() {
        let w = test_model(2);
        let config = DecodeConfig {
            strategy: Strategy::Nucleus,
            nucleus_p: 0.9,
            max_new_tokens: 10,
            seed: 42,
            ..Default::default()
        };
        let (a, _) = generate(&w, &[3, 1], None, &config).unwrap();
        let (b, _) = generate(&w, &[3, 1], None, &config).unwrap();
        assert_eq!(a, b);
        let other_seed = DecodeConfig { seed: 43, ..config };
        let (c, _) = generate(&w, &[3, 1], None, &other_seed).unwrap();
        // Different seeds usually differ; only check both are valid lengths.
        assert_eq!(c.len(), 10);
    }

    #[test]
    fn contrastive_records_stay_within_candidates() {
        let w = test_model(4);
        let config = DecodeConfig {
            strategy: Strategy::Sneuron,
            style_layer_count: 2,
            max_new_tokens: 8,
            ..Default::default()
        };
        let candidates = config.resolve_candidates(4).unwrap();
        assert_eq!(candidates, [2usize, 3].into_iter().collect());
        let (_, recs) = generate(&w, &[1, 2, 3], None, &config).unwrap();
        for r in recs {
            assert!(candidates.contains(&r.premature_layer.unwrap()));
            assert!(r.phi.as_ref().unwrap()[r.token as usize]);
            assert_eq!(r.jsd.len(), candidates.len());
        }
    }

    #[test]
    fn dola_early_uses_first_half_even_rows() {
        let config = DecodeConfig {
            strategy: Strategy::DolaEarly,
            ..Default::default()
        };
        assert_eq!(
            config.resolve_candidates(8).unwrap(),
            [0usize, 2].into_iter().collect()
        );
        assert_eq!(
            config.resolve_candidates(1).unwrap(),
            [0usize].into_iter().collect()
        );
    }

    #[test]
    fn invalid_candidate_layers_are_rejected() {
        let config = DecodeConfig {
            strategy: Strategy::Sneuron,
            candidate_layers: Some([4usize].into_iter().collect()),
            ..Default::default()
        };
        assert!(matches!(
            config.resolve_candidates(4),
            Err(Error::Config(_))
        ));
        let empty = DecodeConfig {
            strategy: Strategy::Sneuron,
            candidate_layers: Some(BTreeSet::new()),
            ..Default::default()
        };
        assert!(empty.resolve_candidates(4).is_err());
    }

    #[test]
    fn bad_config_values_are_rejected() {
        let w = test_model(2);
        for config in [
            DecodeConfig {
                alpha: 0.0,
                ..Default::default()
            },
            DecodeConfig {
                alpha: 1.5,
                ..Default::default()
            },
            DecodeConfig {
                nucleus_p: 0.0,
                ..Default::default()
            },
            DecodeConfig {
                max_new_tokens: 0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                generate(&w, &[1], None, &config),
                Err(Error::Config(_))
            ));
        }
        assert!(matches!(
            generate(&w, &[], None, &DecodeConfig::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn capacity_is_enforced() {
        let w = test_model(2);
        let config = DecodeConfig {
            max_new_tokens: 31,
            ..Default::default()
        };
        assert!(matches!(
            generate(&w, &[1, 2], None, &config),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn stop_token_ends_generation() {
        let w = test_model(2);
        let greedy = DecodeConfig {
            strategy: Strategy::Greedy,
            max_new_tokens: 10,
            ..Default::default()
        };
        let (unbounded, _) = generate(&w, &[1, 2], None, &greedy).unwrap();
        let stop = unbounded[2];
        let with_stop = DecodeConfig {
            stop_token: Some(stop),
            ..greedy
        };
        let (tokens, _) = generate(&w, &[1, 2], None, &with_stop).unwrap();
        let first = tokens.iter().position(|&t| t == stop).unwrap();
        assert_eq!(first, tokens.len() - 1, "stop token ends the output");
    }

    proptest! {
        #[test]
        fn contrast_self_is_uniform_on_phi(
            raw in proptest::collection::vec(0.01f64..1.0, 2..12),
            alpha in 0.01f64..1.0,
        ) {
            let total: f64 = raw.iter().sum();
            let p: Vec<f32> = raw.iter().map(|&v| (v / total) as f32).collect();
            let phi = plausible_set(&p, alpha);
            let out = contrast(&p, &p, &phi);
            let expected = 1.0 / phi.len() as f64;
            for &w in &phi {
                prop_assert!((out[w as usize] - expected).abs() < 1e-9);
            }
            let outside: f64 = out
                .iter()
                .enumerate()
                .filter(|(w, _)| !phi.contains(&(*w as u32)))
                .map(|(_, &v)| v)
                .sum();
            prop_assert_eq!(outside, 0.0);
        }

        #[test]
        fn jsd_properties(
            raw_p in proptest::collection::vec(0.0f64..1.0, 6),
            raw_q in proptest::collection::vec(0.0f64..1.0, 6),
        ) {
            let norm = |raw: &[f64]| -> Vec<f32> {
                let total: f64 = raw.iter().sum::<f64>().max(1e-9);
                raw.iter().map(|&v| (v / total) as f32).collect()
            };
            let p = norm(&raw_p);
            let q = norm(&raw_q);
            let jsd = jensen_shannon(&p, &q);
            prop_assert!(jsd >= 0.0);
            prop_assert!(jsd <= 2.0f64.ln() + 1e-12);
            prop_assert_eq!(jsd, jensen_shannon(&q, &p));
            prop_assert!(jensen_shannon(&p, &p) <= 1e-12);
        }
    }
}
