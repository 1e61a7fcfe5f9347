//! The four decoding strategies side by side on one steered prompt.
//!
//! Shows, per step of the style-layer contrastive strategy, which premature
//! layer was selected, its divergence from the final layer, and the size of
//! the plausible set.
//!
//! Run with:
//!
//! ```bash
//! cargo run --example contrastive_decoding
//! ```

use sntm::corpus::tokenize;
use sntm::decoding::{generate, DecodeConfig, Strategy};
use sntm::factory::{synth_planted, StyleSide};
use sntm::steering::DeactivationMask;
use sntm::synthetic::demo_world;

fn main() {
    let world = demo_world(2024);
    let (weights, registry) = synth_planted(&world.spec).unwrap();
    // Deactivate the source style so the contrast has something to expose.
    let mask = DeactivationMask::from_coords(registry.style_a.iter().copied());

    let line = world.prompt_lines(StyleSide::A, 1, 42).remove(0);
    let prompt = tokenize(&line, &world.vocab);
    println!("prompt: {line}\n");

    for strategy in [
        Strategy::Greedy,
        Strategy::Nucleus,
        Strategy::DolaEarly,
        Strategy::Sneuron,
    ] {
        let config = DecodeConfig {
            strategy,
            max_new_tokens: 10,
            nucleus_p: 0.9,
            seed: 11,
            ..Default::default()
        };
        let (generated, records) = generate(&weights, &prompt, Some(&mask), &config).unwrap();
        println!(
            "{:<10} -> {}",
            strategy.name(),
            sntm::detokenize(&generated, &world.vocab)
        );
        if strategy == Strategy::Sneuron {
            println!("\n  per-step contrastive detail:");
            for (step, r) in records.iter().enumerate() {
                let m = r.premature_layer.unwrap();
                let jsd_at_m = r
                    .jsd
                    .iter()
                    .find(|(layer, _)| *layer == m)
                    .map(|(_, v)| *v)
                    .unwrap();
                println!(
                    "  step {:2}  token {:<9}  premature layer {}  jsd {:.3e}  |phi| {:2}  \
                     p_final {:.3}  p_premature {:.3}",
                    step,
                    world.vocab.token(r.token).unwrap_or("?"),
                    m,
                    jsd_at_m,
                    r.phi_size().unwrap(),
                    r.p_final,
                    r.p_premature.unwrap()
                );
            }
            println!();
        }
    }
}
