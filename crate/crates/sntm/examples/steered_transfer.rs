//! Deactivation ablation: all four source/target mask configurations.
//!
//! On the planted fixture, measures how much of the generated text lands in
//! the target-style lexicon under every combination of deactivating the
//! source and target exclusive sets, for plain greedy decoding and for the
//! style-layer contrastive strategy.
//!
//! Run with:
//!
//! ```bash
//! cargo run --example steered_transfer
//! ```

use sntm::atlas::build_atlas;
use sntm::corpus::{tokenize, StyleCorpus};
use sntm::decoding::{generate, DecodeConfig, Strategy};
use sntm::factory::{synth_planted, StyleSide};
use sntm::metrics::lexicon_rate;
use sntm::steering::{build_mask, DeactivateSide, DeactivationPolicy};
use sntm::synthetic::{demo_world, STYLE_A, STYLE_B};

fn main() {
    let world = demo_world(2024);
    let (weights, _) = synth_planted(&world.spec).unwrap();
    let corpus_a = StyleCorpus::from_lines(
        STYLE_A,
        &world.corpus_lines(StyleSide::A, 200, 1),
        &world.vocab,
    );
    let corpus_b = StyleCorpus::from_lines(
        STYLE_B,
        &world.corpus_lines(StyleSide::B, 200, 2),
        &world.vocab,
    );
    let atlas = build_atlas(&weights, &corpus_a, &corpus_b, 8).unwrap();
    let target_lexicon = world.lexicon(StyleSide::B);
    let prompts: Vec<Vec<u32>> = world
        .prompt_lines(StyleSide::A, 100, 7)
        .iter()
        .map(|l| tokenize(l, &world.vocab))
        .collect();

    println!(
        "direction: {STYLE_A} -> {STYLE_B}; target-lexicon rate over {} prompts\n",
        prompts.len()
    );
    println!(
        "{:<10} {:<10} {:>10} {:>10}",
        "source", "target", "greedy", "sneuron"
    );
    for (side, src, tgt) in [
        (DeactivateSide::None, "active", "active"),
        (DeactivateSide::Source, "off", "active"),
        (DeactivateSide::Target, "active", "off"),
        (DeactivateSide::Both, "off", "off"),
    ] {
        let policy = DeactivationPolicy::new(side, STYLE_A, STYLE_B);
        let mask = build_mask(&atlas, &policy).unwrap();
        let mask_ref = (!mask.is_empty()).then_some(&mask);
        let mut row = Vec::new();
        for strategy in [Strategy::Greedy, Strategy::Sneuron] {
            let config = DecodeConfig {
                strategy,
                max_new_tokens: 12,
                ..Default::default()
            };
            let outputs: Vec<Vec<u32>> = prompts
                .iter()
                .map(|p| generate(&weights, p, mask_ref, &config).unwrap().0)
                .collect();
            row.push(lexicon_rate(&outputs, &target_lexicon));
        }
        println!("{:<10} {:<10} {:>10.4} {:>10.4}", src, tgt, row[0], row[1]);
    }

    // A couple of transcripts.
    let sneuron = DecodeConfig {
        strategy: Strategy::Sneuron,
        max_new_tokens: 12,
        ..Default::default()
    };
    let policy = DeactivationPolicy::new(DeactivateSide::Source, STYLE_A, STYLE_B);
    let mask = build_mask(&atlas, &policy).unwrap();
    println!("\nsample transfers (sneuron, source deactivated):");
    for line in world.prompt_lines(StyleSide::A, 3, 99) {
        let prompt = tokenize(&line, &world.vocab);
        let (generated, _) = generate(&weights, &prompt, Some(&mask), &sneuron).unwrap();
        println!("  in : {line}");
        println!("  out: {}", sntm::detokenize(&generated, &world.vocab));
    }
}
