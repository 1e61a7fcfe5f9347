//! Per-layer divergence profile across decode steps.
//!
//! Prints the Jensen-Shannon divergence between every layer's early exit
//! and the final layer while greedily decoding, first for the untouched
//! model and then with the source style deactivated. Row 0 is the
//! embedding-layer exit.
//!
//! Run with:
//!
//! ```bash
//! cargo run --example layer_divergence
//! ```

use sntm::corpus::tokenize;
use sntm::factory::{synth_planted, StyleSide};
use sntm::metrics::{jsd_profile, profile_to_csv};
use sntm::steering::DeactivationMask;
use sntm::synthetic::demo_world;

fn print_profile(profile: &[Vec<f64>]) {
    let steps = profile[0].len();
    print!("{:<7}", "layer");
    for t in 0..steps {
        print!("{:>10}", format!("step {t}"));
    }
    println!();
    for (layer, row) in profile.iter().enumerate() {
        print!("{:<7}", layer);
        for cell in row {
            print!("{:>10.2e}", cell);
        }
        println!();
    }
}

fn main() {
    let world = demo_world(2024);
    let (weights, registry) = synth_planted(&world.spec).unwrap();
    let line = world.prompt_lines(StyleSide::A, 1, 5).remove(0);
    let prompt = tokenize(&line, &world.vocab);
    let steps = 8;
    println!("prompt: {line}\n");

    println!("no deactivation:");
    let free = jsd_profile(&weights, &prompt, None, steps).unwrap();
    print_profile(&free);

    let mask = DeactivationMask::from_coords(registry.style_a.iter().copied());
    println!("\nsource style deactivated:");
    let masked = jsd_profile(&weights, &prompt, Some(&mask), steps).unwrap();
    print_profile(&masked);

    println!("\nCSV form (layers x steps), as written by `sntm inspect jsd`:");
    print!("{}", profile_to_csv(&masked));
}
