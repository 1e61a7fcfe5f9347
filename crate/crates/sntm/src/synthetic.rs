//! Deterministic demo fixtures: a two-style vocabulary, a planted model
//! specification over it, and seeded corpus/prompt samplers.
//!
//! Everything here is plain library surface so the examples, the test
//! suites, and the README walkthrough can build the same world from one
//! seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Vocabulary;
use crate::factory::{PlantSite, PlantSpec, StyleSide};
use crate::model::{Activation, ModelConfig};

/// Word lists and token-id groups for a two-style toy language.
#[derive(Debug, Clone)]
pub struct StyleWorld {
    pub vocab: Vocabulary,
    pub spec: PlantSpec,
    pub style_a_words: Vec<String>,
    pub style_b_words: Vec<String>,
    pub shared_words: Vec<String>,
}

/// Label used for the style-A side in demos.
pub const STYLE_A: &str = "plain";
/// Label used for the style-B side in demos.
pub const STYLE_B: &str = "ornate";

/// Builds the standard demo world: 4 layers, d_model 32, 64 neurons per
/// layer, vocab 64; 16 words per style plus 16 shared words; 8 plants per
/// style spread over all layers, zero background noise.
pub fn demo_world(seed: u64) -> StyleWorld {
    let config = ModelConfig {
        n_layers: 4,
        d_model: 32,
        n_heads: 4,
        d_ffn: 64,
        vocab_size: 64,
        max_seq_len: 128,
        activation_kind: Activation::SiluGlu,
    };

    let mut tokens: Vec<String> = vec!["<unk>".into(), "<bos>".into()];
    let style_a_words: Vec<String> = (0..16).map(|i| format!("plain{i:02}")).collect();
    let style_b_words: Vec<String> = (0..16).map(|i| format!("ornate{i:02}")).collect();
    let shared_words: Vec<String> = (0..16).map(|i| format!("common{i:02}")).collect();
    let filler: Vec<String> = (0..14).map(|i| format!("filler{i:02}")).collect();
    tokens.extend(style_a_words.iter().cloned());
    tokens.extend(style_b_words.iter().cloned());
    tokens.extend(shared_words.iter().cloned());
    tokens.extend(filler);
    let vocab = Vocabulary::from_tokens(tokens).expect("demo vocabulary is well-formed");

    let style_a_tokens = (2..18).collect();
    let style_b_tokens = (18..34).collect();
    let shared_tokens = (34..50).collect();

    // Two plants per layer per style.
    let mut plants = Vec::new();
    for layer in 0..4 {
        for slot in 0..2 {
            plants.push(PlantSite {
                layer,
                neuron: layer * 2 + slot,
                style: StyleSide::A,
                gain: 1.6,
            });
            plants.push(PlantSite {
                layer,
                neuron: 32 + layer * 2 + slot,
                style: StyleSide::B,
                gain: 2.0,
            });
        }
    }

    let spec = PlantSpec {
        config,
        style_a_tokens,
        style_b_tokens,
        shared_tokens,
        plants,
        noise_scale: 0.0,
        seed,
    };
    StyleWorld {
        vocab,
        spec,
        style_a_words,
        style_b_words,
        shared_words,
    }
}

impl StyleWorld {
    pub fn style_words(&self, side: StyleSide) -> &[String] {
        match side {
            StyleSide::A => &self.style_a_words,
            StyleSide::B => &self.style_b_words,
        }
    }

    pub fn style_label(&self, side: StyleSide) -> &'static str {
        match side {
            StyleSide::A => STYLE_A,
            StyleSide::B => STYLE_B,
        }
    }

    /// Seeded corpus: sentences of 4..=12 words, each drawn from the style
    /// lexicon with probability 0.7 and from the shared lexicon otherwise.
    pub fn corpus_lines(&self, side: StyleSide, sentences: usize, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let style = self.style_words(side);
        (0..sentences)
            .map(|_| {
                let len = rng.random_range(4..=12);
                let words: Vec<&str> = (0..len)
                    .map(|_| {
                        if rng.random::<f64>() < 0.7 {
                            style[rng.random_range(0..style.len())].as_str()
                        } else {
                            self.shared_words[rng.random_range(0..self.shared_words.len())].as_str()
                        }
                    })
                    .collect();
                words.join(" ")
            })
            .collect()
    }

    /// Seeded prompts of 3..=8 words drawn purely from one style's lexicon.
    pub fn prompt_lines(&self, side: StyleSide, prompts: usize, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let style = self.style_words(side);
        (0..prompts)
            .map(|_| {
                let len = rng.random_range(3..=8);
                let words: Vec<&str> = (0..len)
                    .map(|_| style[rng.random_range(0..style.len())].as_str())
                    .collect();
                words.join(" ")
            })
            .collect()
    }

    pub fn lexicon(&self, side: StyleSide) -> std::collections::BTreeSet<u32> {
        match side {
            StyleSide::A => self.spec.style_a_tokens.clone(),
            StyleSide::B => self.spec.style_b_tokens.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_world_is_consistent() {
        let world = demo_world(7);
        world.spec.validate().unwrap();
        assert_eq!(world.vocab.len(), 64);
        for w in &world.style_a_words {
            let id = world.vocab.id(w).unwrap();
            assert!(world.spec.style_a_tokens.contains(&id));
        }
        for w in &world.style_b_words {
            let id = world.vocab.id(w).unwrap();
            assert!(world.spec.style_b_tokens.contains(&id));
        }
        assert_eq!(world.spec.plants.len(), 16);
    }

    #[test]
    fn samplers_are_deterministic() {
        let world = demo_world(7);
        assert_eq!(
            world.corpus_lines(StyleSide::A, 5, 1),
            world.corpus_lines(StyleSide::A, 5, 1)
        );
        assert_eq!(
            world.prompt_lines(StyleSide::B, 5, 2),
            world.prompt_lines(StyleSide::B, 5, 2)
        );
    }

    #[test]
    fn prompts_stay_in_lexicon() {
        let world = demo_world(7);
        for line in world.prompt_lines(StyleSide::A, 10, 3) {
            for word in line.split_whitespace() {
                assert!(world.style_a_words.iter().any(|w| w == word));
            }
        }
    }
}
