//! Regenerates the model files bundled under models/.
//!
//! Run from the workspace root: `cargo run -p relunwrap-cli --example
//! gen_fixtures`. Output is deterministic, so reruns leave the files
//! byte-identical.

use relunwrap::networks::Network;
use relunwrap::{io, sample};
use serde_json::{Map, Value};
use std::path::Path;

fn meta(name: &str, seed: u64) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("name".into(), name.into());
    m.insert("generator_seed".into(), seed.into());
    m
}

fn main() {
    let dir = Path::new("models");
    std::fs::create_dir_all(dir).expect("create models/");

    let seed = 2024;
    let ffn = Network::Feedforward(sample::random_feedforward(
        &mut sample::rng_from_seed(seed),
        &[3, 4, 4, 2],
    ));
    io::save_model(&dir.join("ffn_3_4_4_2.json"), &ffn, &meta("ffn_3_4_4_2", seed))
        .expect("write feedforward fixture");

    let seed = 2025;
    let gcn = Network::Gcn(sample::random_gcn(
        &mut sample::rng_from_seed(seed),
        3,
        &[2, 3, 1],
    ));
    io::save_model(&dir.join("gcn_3nodes.json"), &gcn, &meta("gcn_3nodes", seed))
        .expect("write gcn fixture");

    let seed = 2026;
    let tensor = Network::Tensor(sample::random_tensor_network(
        &mut sample::rng_from_seed(seed),
        &[vec![2, 2, 2], vec![2, 3, 2], vec![1, 1, 2]],
    ));
    io::save_model(
        &dir.join("tensor_2x2x2.json"),
        &tensor,
        &meta("tensor_2x2x2", seed),
    )
    .expect("write tensor fixture");

    println!("wrote 3 model files to {}", dir.display());
}
