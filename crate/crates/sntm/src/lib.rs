//! # sntm
//!
//! Style-specific neuron identification and neuron-steered contrastive
//! decoding for text style transfer, on a self-contained toy decoder-only
//! transformer.
//!
//! The pipeline has three stages:
//!
//! 1. **Identify** — feed one corpus per style through the model, rank
//!    neurons by mean FFN gate activation, take the top-k per style, and
//!    split the two sets into exclusive sets plus their overlap
//!    ([`atlas`]).
//! 2. **Steer** — deactivate the source style's exclusive neurons by
//!    forcing their activation values to zero during every forward pass
//!    ([`steering`]).
//! 3. **Decode** — generate with a contrastive strategy that compares the
//!    final layer against the most-divergent "style layer" and rescores
//!    plausible tokens by their log-probability ratio ([`decoding`]).
//!
//! Because real style corpora and models are too big for exact testing,
//! the [`factory`] can synthesize *planted* models whose style neurons are
//! known by construction, so identification and steering can be validated
//! against a ground-truth registry. [`synthetic`] builds a ready-made demo
//! world on top of that.
//!
//! Start with the `examples/` directory: each major capability has one
//! runnable example. The `sntm` binary exposes the same pipeline as
//! subcommands (`model`, `atlas`, `transfer`, `eval`, `inspect`).

pub mod atlas;
pub mod cli;
pub mod container;
pub mod corpus;
pub mod decoding;
pub mod error;
pub mod factory;
pub mod metrics;
pub mod model;
pub mod steering;
pub mod synthetic;

pub use atlas::{
    atlas_stats, build_atlas, select_topk, summarize_activations, ActivationSummary, AtlasStats,
    NeuronAtlas, ScoredNeuron,
};
pub use container::{load_model, save_model};
pub use corpus::{
    detokenize, load_lexicon, preprocess, read_utf8_lines, split_words, tokenize, PreprocessReport,
    StyleCorpus, Vocabulary, BOS_ID, UNK_ID,
};
pub use decoding::{
    contrast, generate, jensen_shannon, plausible_set, select_premature, DecodeConfig, StepRecord,
    Strategy,
};
pub use error::{Error, Result};
pub use factory::{synth_planted, synth_random, PlantRegistry, PlantSite, PlantSpec, StyleSide};
pub use metrics::{
    copy_ratio, evaluate, jsd_profile, lexicon_rate, perplexity, profile_to_csv, EvalReport,
    PerplexityReport,
};
pub use model::{
    forward, forward_all_positions, logprob_sequence, standard_next_dist, Activation,
    ActivationTrace, LayerDistributions, LayerWeights, Matrix, ModelConfig, ModelWeights,
};
pub use steering::{build_mask, DeactivateSide, DeactivationMask, DeactivationPolicy};
