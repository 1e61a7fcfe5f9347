//! Weight container round trip and layout listing.
//!
//! Synthesizes a seeded random model, writes it to the binary container,
//! reloads it, verifies bit-identity, and lists the tensor layout.
//!
//! Run with:
//!
//! ```bash
//! cargo run --example weights_io
//! ```

use sntm::factory::synth_random;
use sntm::model::{Activation, ModelConfig};
use sntm::{load_model, save_model};

fn main() {
    let config = ModelConfig {
        n_layers: 2,
        d_model: 16,
        n_heads: 4,
        d_ffn: 24,
        vocab_size: 32,
        max_seq_len: 64,
        activation_kind: Activation::SiluGlu,
    };
    let weights = synth_random(&config, 7, 0.8).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.sntm");
    save_model(&weights, &path).unwrap();
    let size = std::fs::metadata(&path).unwrap().len();
    println!("wrote {} ({size} bytes)", path.display());

    let reloaded = load_model(&path).unwrap();
    println!(
        "reload bit-identical: {}",
        if reloaded == weights { "yes" } else { "NO" }
    );

    println!("\ntensor layout (fixed order):");
    let mut total = 0usize;
    for (name, values) in weights.named_tensors() {
        println!("  {:<24} {:>8} f32", name, values.len());
        total += values.len();
    }
    println!("  {:<24} {:>8} f32 total", "", total);
}
