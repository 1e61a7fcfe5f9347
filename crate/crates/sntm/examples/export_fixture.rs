//! Write the demo world to disk as CLI-ready files.
//!
//! Produces a plant specification, vocabulary, one corpus per style, style
//! lexica, and a batch of source-style prompts, so the full `sntm`
//! pipeline can be driven from the command line.
//!
//! Run with:
//!
//! ```bash
//! cargo run --example export_fixture -- fixture/
//! ```

use std::path::PathBuf;

use sntm::factory::StyleSide;
use sntm::synthetic::demo_world;

fn main() {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "fixture".to_string()),
    );
    std::fs::create_dir_all(&dir).expect("create fixture directory");

    let world = demo_world(2024);
    world.spec.save(&dir.join("plant_spec.json")).unwrap();
    world.vocab.save(&dir.join("vocab.txt")).unwrap();
    let write = |name: &str, lines: Vec<String>| {
        std::fs::write(dir.join(name), lines.join("\n") + "\n").unwrap();
        println!("wrote {}", dir.join(name).display());
    };
    println!("wrote {}", dir.join("plant_spec.json").display());
    println!("wrote {}", dir.join("vocab.txt").display());
    write("corpus_a.txt", world.corpus_lines(StyleSide::A, 200, 1));
    write("corpus_b.txt", world.corpus_lines(StyleSide::B, 200, 2));
    write("lexicon_a.txt", world.style_a_words.clone());
    write("lexicon_b.txt", world.style_b_words.clone());
    write("input.txt", world.prompt_lines(StyleSide::A, 25, 7));
}
