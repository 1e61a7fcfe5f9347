//! Style-specific neuron identification.
//!
//! Feeding a style corpus through the model yields one aggregate score per
//! (layer, neuron): the mean post-activation gate value over every token
//! position. Neurons with positive aggregate form the active set `S`; the
//! top-k of `S` by descending score forms `S'`; and the exclusive sets are
//! `N_A = S'_A \ S'_B`, `N_B = S'_B \ S'_A`, with the intersection kept
//! separately as the overlap. Overlap neurons are reported but never
//! deactivated.
//!
//! Ranking ties break by ascending (layer, neuron) so results are
//! deterministic, and per-sentence partial sums are reduced in a
//! value-sorted order so the summary is independent of sentence order.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::StyleCorpus;
use crate::error::{Error, Result};
use crate::model::{forward, ModelWeights};

/// Mean activation per (layer, neuron) over a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSummary {
    n_layers: usize,
    d_ffn: usize,
    scores: Vec<f64>,
    position_count: usize,
}

impl ActivationSummary {
    pub fn from_scores(n_layers: usize, d_ffn: usize, scores: Vec<f64>, positions: usize) -> Self {
        assert_eq!(scores.len(), n_layers * d_ffn);
        ActivationSummary {
            n_layers,
            d_ffn,
            scores,
            position_count: positions,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn d_ffn(&self) -> usize {
        self.d_ffn
    }

    pub fn position_count(&self) -> usize {
        self.position_count
    }

    pub fn score(&self, layer: usize, neuron: usize) -> f64 {
        self.scores[layer * self.d_ffn + neuron]
    }
}

/// Mean post-activation value per neuron over every token position of the
/// corpus.
pub fn summarize_activations(
    weights: &ModelWeights,
    corpus: &StyleCorpus,
) -> Result<ActivationSummary> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput(format!(
            "corpus '{}' is empty after preprocessing",
            corpus.label
        )));
    }
    let n_layers = weights.config.n_layers;
    let d_ffn = weights.config.d_ffn;
    let cells = n_layers * d_ffn;

    // Per-sentence partial sums, reduced per neuron in value-sorted order so
    // the result does not depend on sentence order.
    let mut partials: Vec<Vec<f64>> = Vec::with_capacity(corpus.sentences.len());
    let mut positions = 0usize;
    for sentence in &corpus.sentences {
        let (_, trace) = forward(weights, sentence, None)?;
        let mut partial = vec![0.0f64; cells];
        for layer in 0..n_layers {
            for pos in 0..sentence.len() {
                let values = trace.at(layer, pos);
                let base = layer * d_ffn;
                for (neuron, &v) in values.iter().enumerate() {
                    partial[base + neuron] += f64::from(v);
                }
            }
        }
        positions += sentence.len();
        partials.push(partial);
    }

    let mut scores = vec![0.0f64; cells];
    let mut column: Vec<f64> = Vec::with_capacity(partials.len());
    for cell in 0..cells {
        column.clear();
        column.extend(partials.iter().map(|p| p[cell]));
        column.sort_by(f64::total_cmp);
        scores[cell] = column.iter().sum::<f64>() / positions as f64;
    }
    Ok(ActivationSummary::from_scores(
        n_layers, d_ffn, scores, positions,
    ))
}

/// A neuron coordinate with its aggregate activation score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64)", into = "(usize, usize, f64)")]
pub struct ScoredNeuron {
    pub layer: usize,
    pub neuron: usize,
    pub score: f64,
}

impl From<(usize, usize, f64)> for ScoredNeuron {
    fn from((layer, neuron, score): (usize, usize, f64)) -> Self {
        ScoredNeuron {
            layer,
            neuron,
            score,
        }
    }
}

impl From<ScoredNeuron> for (usize, usize, f64) {
    fn from(e: ScoredNeuron) -> Self {
        (e.layer, e.neuron, e.score)
    }
}

impl ScoredNeuron {
    pub fn coord(&self) -> (usize, usize) {
        (self.layer, self.neuron)
    }
}

/// Top-k positively-activated neurons, ranked by descending score with ties
/// broken by ascending (layer, neuron).
pub fn select_topk(summary: &ActivationSummary, k: usize) -> Result<Vec<ScoredNeuron>> {
    if k < 1 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    let mut active: Vec<ScoredNeuron> = Vec::new();
    for layer in 0..summary.n_layers() {
        for neuron in 0..summary.d_ffn() {
            let score = summary.score(layer, neuron);
            if score > 0.0 {
                active.push(ScoredNeuron {
                    layer,
                    neuron,
                    score,
                });
            }
        }
    }
    active.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.coord().cmp(&b.coord()))
    });
    active.truncate(k);
    Ok(active)
}

/// Style-specific neuron sets for a pair of styles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronAtlas {
    pub style_a: String,
    pub style_b: String,
    pub k: usize,
    pub n_layers: usize,
    pub d_ffn: usize,
    /// Top-k active neurons of style A, descending score.
    pub s_prime_a: Vec<ScoredNeuron>,
    /// Top-k active neurons of style B, descending score.
    pub s_prime_b: Vec<ScoredNeuron>,
    /// Exclusive style-A set: `s_prime_a` minus `s_prime_b` coordinates.
    pub n_a: Vec<ScoredNeuron>,
    /// Exclusive style-B set: `s_prime_b` minus `s_prime_a` coordinates.
    pub n_b: Vec<ScoredNeuron>,
    /// Coordinates in both top-k sets, with the style-A score.
    pub overlap: Vec<ScoredNeuron>,
}

impl NeuronAtlas {
    /// Derives the exclusive and overlap sets from two ranked top-k lists.
    pub fn from_topk(
        style_a: impl Into<String>,
        style_b: impl Into<String>,
        k: usize,
        n_layers: usize,
        d_ffn: usize,
        s_prime_a: Vec<ScoredNeuron>,
        s_prime_b: Vec<ScoredNeuron>,
    ) -> NeuronAtlas {
        let coords_a: BTreeSet<_> = s_prime_a.iter().map(ScoredNeuron::coord).collect();
        let coords_b: BTreeSet<_> = s_prime_b.iter().map(ScoredNeuron::coord).collect();
        let n_a = s_prime_a
            .iter()
            .filter(|e| !coords_b.contains(&e.coord()))
            .copied()
            .collect();
        let n_b = s_prime_b
            .iter()
            .filter(|e| !coords_a.contains(&e.coord()))
            .copied()
            .collect();
        let overlap = s_prime_a
            .iter()
            .filter(|e| coords_b.contains(&e.coord()))
            .copied()
            .collect();
        NeuronAtlas {
            style_a: style_a.into(),
            style_b: style_b.into(),
            k,
            n_layers,
            d_ffn,
            s_prime_a,
            s_prime_b,
            n_a,
            n_b,
            overlap,
        }
    }

    /// Exclusive-set coordinates for the given style label.
    pub fn exclusive_coords(&self, label: &str) -> BTreeSet<(usize, usize)> {
        let list = if label == self.style_a {
            &self.n_a
        } else if label == self.style_b {
            &self.n_b
        } else {
            return BTreeSet::new();
        };
        list.iter().map(ScoredNeuron::coord).collect()
    }

    pub fn overlap_coords(&self) -> BTreeSet<(usize, usize)> {
        self.overlap.iter().map(ScoredNeuron::coord).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("atlas serialization failed: {e}")))?;
        crate::container::write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<NeuronAtlas> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let atlas: NeuronAtlas = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("atlas file is not valid: {e}")))?;
        atlas.check_invariants()?;
        Ok(atlas)
    }

    /// Structural invariants: disjoint exclusive sets that partition the
    /// top-k sets together with the overlap.
    pub fn check_invariants(&self) -> Result<()> {
        let coords = |list: &[ScoredNeuron]| -> BTreeSet<(usize, usize)> {
            list.iter().map(ScoredNeuron::coord).collect()
        };
        let (na, nb, ov) = (coords(&self.n_a), coords(&self.n_b), coords(&self.overlap));
        if !na.is_disjoint(&nb) {
            return Err(Error::Format(
                "atlas exclusive sets are not disjoint".into(),
            ));
        }
        let sa = coords(&self.s_prime_a);
        let sb = coords(&self.s_prime_b);
        if na.union(&ov).copied().collect::<BTreeSet<_>>() != sa
            || nb.union(&ov).copied().collect::<BTreeSet<_>>() != sb
        {
            return Err(Error::Format(
                "atlas exclusive sets plus overlap do not reconstruct the top-k sets".into(),
            ));
        }
        Ok(())
    }
}

/// Identifies style-specific neurons for a style pair.
pub fn build_atlas(
    weights: &ModelWeights,
    corpus_a: &StyleCorpus,
    corpus_b: &StyleCorpus,
    k: usize,
) -> Result<NeuronAtlas> {
    let summary_a = summarize_activations(weights, corpus_a)?;
    let summary_b = summarize_activations(weights, corpus_b)?;
    let s_prime_a = select_topk(&summary_a, k)?;
    let s_prime_b = select_topk(&summary_b, k)?;
    Ok(NeuronAtlas::from_topk(
        corpus_a.label.clone(),
        corpus_b.label.clone(),
        k,
        weights.config.n_layers,
        weights.config.d_ffn,
        s_prime_a,
        s_prime_b,
    ))
}

/// Overlap fraction and per-layer exclusive-neuron counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtlasStats {
    /// `|overlap| / |S'_A union S'_B|`, 0 when both sets are empty.
    pub overlap_fraction: f64,
    pub per_layer_a: Vec<usize>,
    pub per_layer_b: Vec<usize>,
}

pub fn atlas_stats(atlas: &NeuronAtlas) -> AtlasStats {
    let coords = |list: &[ScoredNeuron]| -> BTreeSet<(usize, usize)> {
        list.iter().map(ScoredNeuron::coord).collect()
    };
    let union: BTreeSet<_> = coords(&atlas.s_prime_a)
        .union(&coords(&atlas.s_prime_b))
        .copied()
        .collect();
    let overlap_fraction = if union.is_empty() {
        0.0
    } else {
        atlas.overlap.len() as f64 / union.len() as f64
    };
    let mut per_layer_a = vec![0usize; atlas.n_layers];
    let mut per_layer_b = vec![0usize; atlas.n_layers];
    for e in &atlas.n_a {
        per_layer_a[e.layer] += 1;
    }
    for e in &atlas.n_b {
        per_layer_b[e.layer] += 1;
    }
    AtlasStats {
        overlap_fraction,
        per_layer_a,
        per_layer_b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factory::{synth_planted, synth_random, PlantSite, PlantSpec, StyleSide};
    use crate::model::{Activation, ModelConfig, ModelWeights};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn corpus_from(label: &str, sentences: Vec<Vec<u32>>) -> StyleCorpus {
        let n = sentences.len();
        StyleCorpus {
            label: label.into(),
            sentences,
            line_numbers: (1..=n).collect(),
            report: Default::default(),
        }
    }

    fn small_config() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            d_model: 8,
            n_heads: 2,
            d_ffn: 6,
            vocab_size: 12,
            max_seq_len: 16,
            activation_kind: Activation::SiluGlu,
        }
    }

    #[test]
    fn zero_weights_give_zero_scores() {
        let w = ModelWeights::zeros(small_config()).unwrap();
        let corpus = corpus_from("x", vec![vec![1, 2, 3], vec![4, 5]]);
        let summary = summarize_activations(&w, &corpus).unwrap();
        for l in 0..2 {
            for n in 0..6 {
                assert_eq!(summary.score(l, n), 0.0);
            }
        }
    }

    #[test]
    fn single_position_mean_is_the_trace_value() {
        let w = synth_random(&small_config(), 4, 0.8).unwrap();
        let corpus = corpus_from("x", vec![vec![7]]);
        let summary = summarize_activations(&w, &corpus).unwrap();
        let (_, trace) = forward(&w, &[7], None).unwrap();
        for l in 0..2 {
            for n in 0..6 {
                assert_eq!(summary.score(l, n), f64::from(trace.get(l, 0, n)));
            }
        }
    }

    #[test]
    fn mean_matches_two_pass_oracle() {
        let w = synth_random(&small_config(), 10, 0.9).unwrap();
        let sentences = vec![vec![1u32, 2, 3], vec![4, 5], vec![6, 7, 8, 9]];
        let corpus = corpus_from("x", sentences.clone());
        let summary = summarize_activations(&w, &corpus).unwrap();
        // Oracle: concatenate all traces, then take a flat arithmetic mean.
        let mut all: Vec<Vec<f64>> = vec![Vec::new(); 2 * 6];
        for s in &sentences {
            let (_, trace) = forward(&w, s, None).unwrap();
            for l in 0..2 {
                for p in 0..s.len() {
                    for n in 0..6 {
                        all[l * 6 + n].push(f64::from(trace.get(l, p, n)));
                    }
                }
            }
        }
        for l in 0..2 {
            for n in 0..6 {
                let vals = &all[l * 6 + n];
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                assert!((summary.score(l, n) - mean).abs() < 1e-7, "cell ({l},{n})");
            }
        }
    }

    #[test]
    fn summary_is_independent_of_sentence_order() {
        let w = synth_random(&small_config(), 21, 1.1).unwrap();
        let sentences = vec![vec![1u32, 2, 3], vec![4, 5], vec![6, 7, 8, 9], vec![2, 2]];
        let forward_order = corpus_from("x", sentences.clone());
        let mut reversed = sentences;
        reversed.reverse();
        let reverse_order = corpus_from("x", reversed);
        let a = summarize_activations(&w, &forward_order).unwrap();
        let b = summarize_activations(&w, &reverse_order).unwrap();
        assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn empty_corpus_is_an_input_error() {
        let w = ModelWeights::zeros(small_config()).unwrap();
        let corpus = corpus_from("x", vec![]);
        assert!(matches!(
            summarize_activations(&w, &corpus),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn topk_orders_by_score() {
        let summary = ActivationSummary::from_scores(1, 3, vec![0.5, 0.2, -0.1], 10);
        let top = select_topk(&summary, 2).unwrap();
        let coords: Vec<_> = top.iter().map(ScoredNeuron::coord).collect();
        assert_eq!(coords, vec![(0, 0), (0, 1)]);
    }

    #[test]
    fn topk_saturates_at_active_set() {
        let summary = ActivationSummary::from_scores(1, 3, vec![0.5, 0.2, -0.1], 10);
        let top = select_topk(&summary, 10).unwrap();
        assert_eq!(top.len(), 2);
    }

    #[test]
    fn all_nonpositive_scores_give_empty_set() {
        let summary = ActivationSummary::from_scores(1, 3, vec![0.0, -0.2, -0.1], 10);
        assert!(select_topk(&summary, 3).unwrap().is_empty());
    }

    #[test]
    fn k_zero_is_rejected() {
        let summary = ActivationSummary::from_scores(1, 1, vec![1.0], 1);
        assert!(select_topk(&summary, 0).is_err());
    }

    #[test]
    fn ties_break_by_coordinate() {
        let summary = ActivationSummary::from_scores(1, 4, vec![0.3, 0.3, 0.3, 0.3], 5);
        let top = select_topk(&summary, 2).unwrap();
        let coords: Vec<_> = top.iter().map(ScoredNeuron::coord).collect();
        assert_eq!(coords, vec![(0, 0), (0, 1)]);
    }

    fn planted_fixture() -> (ModelWeights, crate::factory::PlantRegistry, PlantSpec) {
        let config = ModelConfig {
            n_layers: 2,
            d_model: 16,
            n_heads: 2,
            d_ffn: 8,
            vocab_size: 16,
            max_seq_len: 32,
            activation_kind: Activation::SiluGlu,
        };
        let spec = PlantSpec {
            config,
            style_a_tokens: BTreeSet::from([2, 3, 4]),
            style_b_tokens: BTreeSet::from([5, 6, 7]),
            shared_tokens: BTreeSet::from([8, 9]),
            plants: vec![
                PlantSite {
                    layer: 0,
                    neuron: 0,
                    style: StyleSide::A,
                    gain: 3.0,
                },
                PlantSite {
                    layer: 1,
                    neuron: 1,
                    style: StyleSide::A,
                    gain: 2.0,
                },
                PlantSite {
                    layer: 0,
                    neuron: 2,
                    style: StyleSide::B,
                    gain: 3.0,
                },
                PlantSite {
                    layer: 1,
                    neuron: 3,
                    style: StyleSide::B,
                    gain: 2.0,
                },
            ],
            noise_scale: 0.0,
            seed: 5,
        };
        let (w, registry) = synth_planted(&spec).unwrap();
        (w, registry, spec)
    }

    #[test]
    fn planted_model_identification_is_exact() {
        let (w, registry, spec) = planted_fixture();
        let corpus_a = corpus_from(
            "A",
            vec![vec![1, 2, 3, 8], vec![1, 4, 2], vec![1, 3, 9, 4, 2]],
        );
        let corpus_b = corpus_from(
            "B",
            vec![vec![1, 5, 6, 8], vec![1, 7, 5], vec![1, 6, 9, 7, 5]],
        );
        let atlas = build_atlas(&w, &corpus_a, &corpus_b, 2).unwrap();
        let n_a: BTreeSet<_> = atlas.n_a.iter().map(ScoredNeuron::coord).collect();
        let n_b: BTreeSet<_> = atlas.n_b.iter().map(ScoredNeuron::coord).collect();
        assert_eq!(n_a, registry.style_a);
        assert_eq!(n_b, registry.style_b);
        assert!(atlas.overlap.is_empty());
        let _ = spec;
    }

    #[test]
    fn identical_corpora_put_everything_in_overlap() {
        let (w, _, _) = planted_fixture();
        let sentences = vec![vec![1u32, 2, 3, 5], vec![1, 6, 4]];
        let a = corpus_from("A", sentences.clone());
        let b = corpus_from("B", sentences);
        let atlas = build_atlas(&w, &a, &b, 4).unwrap();
        assert!(atlas.n_a.is_empty() && atlas.n_b.is_empty());
        assert_eq!(
            atlas.overlap_coords(),
            atlas.s_prime_a.iter().map(ScoredNeuron::coord).collect()
        );
        let stats = atlas_stats(&atlas);
        assert_eq!(stats.overlap_fraction, 1.0);
        assert!(stats.per_layer_a.iter().all(|&c| c == 0));
    }

    #[test]
    fn disjoint_topk_sets_have_no_overlap() {
        let a = vec![ScoredNeuron {
            layer: 0,
            neuron: 0,
            score: 1.0,
        }];
        let b = vec![ScoredNeuron {
            layer: 1,
            neuron: 1,
            score: 1.0,
        }];
        let atlas = NeuronAtlas::from_topk("A", "B", 1, 2, 2, a.clone(), b.clone());
        assert!(atlas.overlap.is_empty());
        assert_eq!(atlas.n_a, a);
        assert_eq!(atlas.n_b, b);
        assert_eq!(atlas_stats(&atlas).overlap_fraction, 0.0);
    }

    #[test]
    fn per_layer_counts_sum_to_exclusive_sizes() {
        let (w, _, _) = planted_fixture();
        let corpus_a = corpus_from("A", vec![vec![1, 2, 3, 4]]);
        let corpus_b = corpus_from("B", vec![vec![1, 5, 6, 7]]);
        let atlas = build_atlas(&w, &corpus_a, &corpus_b, 2).unwrap();
        let stats = atlas_stats(&atlas);
        assert_eq!(stats.per_layer_a.iter().sum::<usize>(), atlas.n_a.len());
        assert_eq!(stats.per_layer_b.iter().sum::<usize>(), atlas.n_b.len());
    }

    #[test]
    fn atlas_round_trips_through_json() {
        let (w, _, _) = planted_fixture();
        let corpus_a = corpus_from("A", vec![vec![1, 2, 3, 4]]);
        let corpus_b = corpus_from("B", vec![vec![1, 5, 6, 7]]);
        let atlas = build_atlas(&w, &corpus_a, &corpus_b, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("atlas.json");
        atlas.save(&path).unwrap();
        let back = NeuronAtlas::load(&path).unwrap();
        assert_eq!(atlas, back);
        // Byte-stable re-save.
        let first = std::fs::read(&path).unwrap();
        back.save(&path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn corpus_order_does_not_change_the_atlas() {
        let (w, _, _) = planted_fixture();
        let mut sentences_a = vec![vec![1u32, 2, 3, 8], vec![1, 4, 2], vec![1, 3, 9]];
        let sentences_b = vec![vec![1u32, 5, 6], vec![1, 7, 9, 5]];
        let atlas1 = build_atlas(
            &w,
            &corpus_from("A", sentences_a.clone()),
            &corpus_from("B", sentences_b.clone()),
            3,
        )
        .unwrap();
        sentences_a.reverse();
        let atlas2 = build_atlas(
            &w,
            &corpus_from("A", sentences_a),
            &corpus_from("B", sentences_b),
            3,
        )
        .unwrap();
        assert_eq!(atlas1, atlas2);
    }

    fn arbitrary_summary() -> impl Strategy<Value = (ActivationSummary, ActivationSummary)> {
        let cells = 12usize;
        (
            proptest::collection::vec(-1.0f64..1.0, cells),
            proptest::collection::vec(-1.0f64..1.0, cells),
        )
            .prop_map(move |(a, b)| {
                (
                    ActivationSummary::from_scores(3, 4, a, 10),
                    ActivationSummary::from_scores(3, 4, b, 10),
                )
            })
    }

    proptest! {
        #[test]
        fn exclusive_sets_are_always_disjoint(
            (sa, sb) in arbitrary_summary(),
            k in 1usize..12,
        ) {
            let atlas = NeuronAtlas::from_topk(
                "A", "B", k, 3, 4,
                select_topk(&sa, k).unwrap(),
                select_topk(&sb, k).unwrap(),
            );
            let na: BTreeSet<_> = atlas.n_a.iter().map(ScoredNeuron::coord).collect();
            let nb: BTreeSet<_> = atlas.n_b.iter().map(ScoredNeuron::coord).collect();
            prop_assert!(na.is_disjoint(&nb));
            atlas.check_invariants().unwrap();
        }

        #[test]
        fn growing_k_never_shrinks_overlap(
            (sa, sb) in arbitrary_summary(),
            k in 1usize..11,
        ) {
            let atlas_small = NeuronAtlas::from_topk(
                "A", "B", k, 3, 4,
                select_topk(&sa, k).unwrap(),
                select_topk(&sb, k).unwrap(),
            );
            let atlas_big = NeuronAtlas::from_topk(
                "A", "B", k + 1, 3, 4,
                select_topk(&sa, k + 1).unwrap(),
                select_topk(&sb, k + 1).unwrap(),
            );
            prop_assert!(atlas_big.overlap.len() >= atlas_small.overlap.len());
        }
    }
}
