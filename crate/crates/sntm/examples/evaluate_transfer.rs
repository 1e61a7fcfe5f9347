//! Score a steered transfer run: copy ratio, perplexity, lexicon rate.
//!
//! Transfers a batch of source-style prompts with and without steering and
//! compares the evaluation reports. The copy ratio drops when steering
//! actually rewrites the text; the lexicon rate shows the style moving.
//!
//! Run with:
//!
//! ```bash
//! cargo run --example evaluate_transfer
//! ```

use sntm::corpus::tokenize;
use sntm::decoding::{generate, DecodeConfig, Strategy};
use sntm::factory::{synth_planted, StyleSide};
use sntm::metrics::evaluate;
use sntm::steering::DeactivationMask;
use sntm::synthetic::demo_world;

fn main() {
    let world = demo_world(2024);
    let (weights, registry) = synth_planted(&world.spec).unwrap();
    let mask = DeactivationMask::from_coords(registry.style_a.iter().copied());
    let target_lexicon = world.lexicon(StyleSide::B);

    let sources = world.prompt_lines(StyleSide::A, 40, 13);

    for (name, mask_ref, strategy) in [
        ("greedy, no steering", None, Strategy::Greedy),
        (
            "sneuron, source deactivated",
            Some(&mask),
            Strategy::Sneuron,
        ),
    ] {
        let config = DecodeConfig {
            strategy,
            max_new_tokens: 10,
            ..Default::default()
        };
        let hypotheses: Vec<String> = sources
            .iter()
            .map(|line| {
                let prompt = tokenize(line, &world.vocab);
                let (generated, _) = generate(&weights, &prompt, mask_ref, &config).unwrap();
                sntm::detokenize(&generated, &world.vocab)
            })
            .collect();
        let report = evaluate(
            &weights,
            &world.vocab,
            &sources,
            &hypotheses,
            &target_lexicon,
        )
        .unwrap();
        println!("== {name}");
        print!("{}", report.table());
        println!();
    }
}
