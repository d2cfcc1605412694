//! Random small models in the model language, restricted so they validate.

use rand::seq::SliceRandom;
use rand::Rng;

use pupta::automaton::Automaton;
use pupta::frontend::parse_model;

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_clocks: usize,
    pub max_params: usize,
    /// Largest parameter upper bound and guard/update constant.
    pub max_const: u32,
    pub max_locations: usize,
    pub max_edges: usize,
    /// Give locations stop sets (changes only across total updates).
    pub stopwatch: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape { max_clocks: 3, max_params: 2, max_const: 2, max_locations: 5, max_edges: 8, stopwatch: false }
    }
}

const RELS: [&str; 5] = ["<", "<=", ">=", ">", "=="];

/// Source text of a random model; the last location is the natural goal.
pub fn model_text<R: Rng>(shape: Shape, rng: &mut R) -> String {
    let h = rng.gen_range(1..=shape.max_clocks);
    let m = rng.gen_range(1..=shape.max_params);
    let n = rng.gen_range(2..=shape.max_locations);
    let clocks: Vec<String> = (0..h).map(|i| format!("x{i}")).collect();
    let params: Vec<String> = (0..m).map(|i| format!("p{i}")).collect();
    let mut out = String::new();
    for p in &params {
        let hi = rng.gen_range(1..=shape.max_const);
        let lo = rng.gen_range(0..=hi.min(1));
        out.push_str(&format!("param {p} in [{lo}, {hi}];\n"));
    }
    out.push_str(&format!("clock {};\n", clocks.join(", ")));
    let stops: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            if shape.stopwatch && rng.gen_bool(0.4) {
                (0..h).filter(|_| rng.gen_bool(0.5)).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    for (l, s) in stops.iter().enumerate() {
        if s.is_empty() {
            out.push_str(&format!("loc l{l};\n"));
        } else {
            let names: Vec<&str> = s.iter().map(|c| clocks[*c].as_str()).collect();
            out.push_str(&format!("loc l{l} stop {{{}}};\n", names.join(", ")));
        }
    }
    out.push_str("init l0;\n");
    let value = |rng: &mut R, allow_param: bool| -> String {
        if allow_param && rng.gen_bool(0.5) {
            params.choose(rng).unwrap().clone()
        } else {
            rng.gen_range(0..=shape.max_const).to_string()
        }
    };
    let edges = rng.gen_range(1..=shape.max_edges);
    for k in 0..edges {
        // keep the locations loosely chained so goals are often reachable
        let src = if k < n - 1 && rng.gen_bool(0.6) { k } else { rng.gen_range(0..n) };
        let dst = if k < n - 1 && src == k { k + 1 } else { rng.gen_range(0..n) };
        let param_edge = rng.gen_bool(0.5);
        let atoms: Vec<String> = (0..rng.gen_range(0..=2))
            .map(|_| {
                let c = clocks.choose(rng).unwrap();
                let rel = RELS.choose(rng).unwrap();
                format!("{c} {rel} {}", value(rng, param_edge))
            })
            .collect();
        let total = param_edge || stops[src] != stops[dst];
        let updated: Vec<usize> = if total { (0..h).collect() } else { (0..h).filter(|_| rng.gen_bool(0.4)).collect() };
        let ups: Vec<String> =
            updated.iter().map(|c| format!("{} := {}", clocks[*c], value(rng, param_edge))).collect();
        out.push_str(&format!("edge l{src} -> l{dst}"));
        if !atoms.is_empty() {
            out.push_str(&format!(" when {}", atoms.join(" & ")));
        }
        out.push_str(&format!(" sync e{k}"));
        if !ups.is_empty() {
            out.push_str(&format!(" do {{ {} }}", ups.join(", ")));
        }
        out.push_str(";\n");
    }
    out
}

pub fn model<R: Rng>(shape: Shape, rng: &mut R) -> (Automaton, String) {
    let text = model_text(shape, rng);
    let a = parse_model(&text).unwrap_or_else(|d| panic!("generated model does not parse: {d}\n{text}"));
    (a, text)
}
