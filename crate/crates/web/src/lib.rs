//! Browser bindings. Each export takes model text and returns JSON; errors
//! are thrown as strings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pupta::automaton::{Automaton, Flavor};
use pupta::concrete;
use pupta::frontend::{self, rational, JsonRegion};
use pupta::param_region::RegionSpace;
use pupta::region_automaton::concretize_witness;
use pupta::synthesis::{self, ef_synth, Engine, RegionVerdict};

fn parse(text: &str) -> Result<Automaton, String> {
    frontend::parse_model(text).map_err(|d| format!("parse error at {d}"))
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Violation {
    edge: Option<String>,
    message: String,
}

pub fn validate_json(text: &str) -> Result<String, String> {
    let a = parse(text)?;
    let flavor = if a.has_stops() { Flavor::Sru2p } else { Flavor::Ru2p };
    let out: Vec<Violation> = a
        .validate(flavor)
        .into_iter()
        .map(|v| Violation {
            edge: v.edge.map(|e| {
                let e = &a.edges[e];
                format!("{} -> {}", a.locations[e.src].name, a.locations[e.dst].name)
            }),
            message: v.clause.to_string(),
        })
        .collect();
    json(&out)
}

pub fn regions_json(text: &str) -> Result<String, String> {
    let a = parse(text)?.with_aux();
    let space = RegionSpace::with_groups(&a.bounds(), synthesis::parameter_groups(&a)).map_err(|e| e.to_string())?;
    let regions: Vec<JsonRegion> = space.enumerate().iter().map(|r| frontend::region_json(&space, r, &a)).collect();
    json(&regions)
}

#[derive(Serialize)]
struct Step {
    location: String,
    clocks: Vec<(String, String)>,
    delay: Option<String>,
    edge: Option<String>,
}

#[derive(Serialize)]
struct Reaching {
    #[serde(flatten)]
    region: JsonRegion,
    witness: Vec<Step>,
}

#[derive(Serialize)]
struct Synth {
    total_regions: usize,
    reaching: Vec<Reaching>,
}

fn witness(a: &Automaton, v: &RegionVerdict) -> Result<Vec<Step>, String> {
    let Some(run) = &v.witness else { return Ok(Vec::new()) };
    let rep = &v.region.representative;
    let ta = a.instantiate(rep).map_err(|e| e.to_string())?;
    let cr = concretize_witness(run, a, &v.region, rep).map_err(|e| e.to_string())?;
    concrete::replay(&cr, &ta, a.has_stops()).map_err(|e| e.to_string())?;
    let cr = cr.unscaled(ta.scale);
    Ok(cr
        .states
        .iter()
        .enumerate()
        .map(|(i, (l, w))| Step {
            location: a.locations[*l].name.clone(),
            clocks: a.clocks.iter().cloned().zip(w.iter().map(rational)).collect(),
            delay: cr.steps.get(i).map(|s| rational(&s.delay)),
            edge: cr.steps.get(i).map(|s| {
                let e = &a.edges[s.edge];
                e.action.clone().unwrap_or_else(|| format!("e{}", s.edge))
            }),
        })
        .collect())
}

pub fn synth_json(text: &str, goal: &str) -> Result<String, String> {
    let a = parse(text)?;
    let g = a.location(goal).map_err(|e| e.to_string())?;
    let res = ef_synth(&a, g, Engine::Symbolic).map_err(|e| e.to_string())?;
    let reaching = res
        .reaching()
        .map(|v| {
            Ok(Reaching { region: frontend::region_json(&res.space, &v.region, &res.model), witness: witness(&res.model, v)? })
        })
        .collect::<Result<Vec<_>, String>>()?;
    json(&Synth { total_regions: res.verdicts.len(), reaching })
}

#[wasm_bindgen]
pub fn validate(text: &str) -> Result<String, JsValue> {
    validate_json(text).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn regions(text: &str) -> Result<String, JsValue> {
    regions_json(text).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn synth(text: &str, goal: &str) -> Result<String, JsValue> {
    synth_json(text, goal).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "param p in [0, 1]; clock x; loc start; loc goal; init start;
        edge start -> goal when x >= p do { x := 0 };";

    #[test]
    fn toy_has_five_regions_all_reaching() {
        let r: serde_json::Value = serde_json::from_str(&regions_json(TOY).unwrap()).unwrap();
        assert_eq!(r.as_array().unwrap().len(), 5);
        let s: serde_json::Value = serde_json::from_str(&synth_json(TOY, "goal").unwrap()).unwrap();
        assert_eq!(s["total_regions"], 5);
        let reaching = s["reaching"].as_array().unwrap();
        assert_eq!(reaching.len(), 5);
        assert!(reaching.iter().all(|r| r["witness"].as_array().unwrap().len() == 2));
    }

    #[test]
    fn partial_update_after_parametric_guard_is_reported() {
        let text = "param p in [0, 1]; clock x, y; loc a; loc b; init a;
            edge a -> b when x >= p do { x := 0 };";
        let v: serde_json::Value = serde_json::from_str(&validate_json(text).unwrap()).unwrap();
        assert_eq!(v[0]["edge"], "a -> b");
        assert!(validate_json("param").is_err());
    }
}
