#![allow(dead_code)]

pub mod gen;
pub mod golden;
pub mod region_graph;

use std::path::PathBuf;

pub fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

pub fn load_model(name: &str) -> pupta::automaton::Automaton {
    let text = std::fs::read_to_string(model_path(name)).unwrap();
    pupta::frontend::parse_model(&text).unwrap()
}
