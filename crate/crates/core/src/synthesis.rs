//! Reachability decision and exact synthesis of the parameter valuations
//! reaching a goal location, one region at a time.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{Automaton, EdgeId, Flavor, LocId, ModelError, Violation};
use crate::concrete;
use crate::param_region::{ParamRegion, RegionError, RegionSpace};
use crate::plt::ParamId;
use crate::region_automaton::{RegionAutomaton, SearchError, SymRun, DEFAULT_STATE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Engine {
    Symbolic,
    Oracle,
    /// Runs both and fails on any disagreement.
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("model rejected: {}", .0.iter().map(|v| v.clause.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("the concrete oracle does not handle stopped clocks")]
    OracleNeedsNoStops,
    #[error("engines disagree at {representative:?}: symbolic {symbolic}, oracle {oracle}")]
    EngineDisagreement { representative: Vec<crate::Q>, symbolic: bool, oracle: bool },
}

/// Verdict for one region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionVerdict {
    pub region: ParamRegion,
    pub reachable: bool,
    /// Shortest symbolic witness, when the symbolic engine ran and found one.
    pub witness: Option<SymRun>,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub goal: LocId,
    pub engine: Engine,
    /// Model with the auxiliary zero parameter, as used for the regions.
    pub model: Automaton,
    pub space: RegionSpace,
    /// Every region in enumeration order with its verdict.
    pub verdicts: Vec<RegionVerdict>,
}

impl SynthesisResult {
    pub fn reaching(&self) -> impl Iterator<Item = &RegionVerdict> {
        self.verdicts.iter().filter(|v| v.reachable)
    }

    pub fn is_empty(&self) -> bool {
        self.reaching().next().is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Emptiness {
    Empty,
    /// A reaching region, with a witness from the symbolic engine if it ran.
    NonEmpty(Box<RegionVerdict>),
}

/// Partition of the parameters into groups that never meet in one matrix or
/// one guard check. Regions only need to order terms within a group.
///
/// A matrix holds the parameters of the last total update; a guard compares
/// its parameters with that matrix. A forward pass computes, per location,
/// which total updates may have been the last one.
pub fn parameter_groups(a: &Automaton) -> Vec<Vec<ParamId>> {
    let m = a.num_params();
    let h = a.num_clocks();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        if parent[x] != x {
            let r = find(parent, parent[x]);
            parent[x] = r;
        }
        parent[x]
    }
    let union = |parent: &mut Vec<usize>, xs: &[ParamId]| {
        for w in xs.windows(2) {
            let (a, b) = (find(parent, w[0]), find(parent, w[1]));
            parent[a] = b;
        }
    };
    let targets = |e: EdgeId| -> Vec<ParamId> {
        a.edges[e]
            .update
            .iter()
            .filter_map(|(_, v)| match v {
                crate::automaton::Value::Param(p) => Some(*p),
                _ => None,
            })
            .collect()
    };
    let guard_params = |e: EdgeId| -> Vec<ParamId> {
        a.edges[e]
            .guard
            .iter()
            .filter_map(|g| match g.rhs {
                crate::automaton::Value::Param(p) => Some(p),
                _ => None,
            })
            .collect()
    };
    // last[l]: possible last total updates on arrival at l (None = start)
    let mut last: Vec<BTreeSet<Option<EdgeId>>> = vec![BTreeSet::new(); a.locations.len()];
    last[a.init].insert(None);
    let mut changed = true;
    while changed {
        changed = false;
        for (i, e) in a.edges.iter().enumerate() {
            let out: Vec<Option<EdgeId>> =
                if e.is_total(h) { vec![Some(i)] } else { last[e.src].iter().copied().collect() };
            for o in out {
                changed |= last[e.dst].insert(o);
            }
        }
    }
    for (i, e) in a.edges.iter().enumerate() {
        if e.is_total(h) {
            union(&mut parent, &targets(i));
        }
        let g = guard_params(i);
        if g.is_empty() {
            continue;
        }
        union(&mut parent, &g);
        for t in last[e.src].iter().flatten() {
            let mut linked = targets(*t);
            linked.push(g[0]);
            union(&mut parent, &linked);
        }
    }
    let mut groups: Vec<Vec<ParamId>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; m];
    for p in 0..m {
        let r = find(&mut parent, p);
        match root_of[r] {
            Some(g) => groups[g].push(p),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![p]);
            }
        }
    }
    groups
}

/// Model prepared for analysis: validated, with the auxiliary parameter,
/// and its grouped region space.
pub fn prepare(a: &Automaton) -> Result<(Automaton, RegionSpace), SynthError> {
    let flavor = if a.has_stops() { Flavor::Sru2p } else { Flavor::Ru2p };
    let violations = a.validate(flavor);
    if !violations.is_empty() {
        return Err(SynthError::Invalid(violations));
    }
    let model = a.with_aux();
    let space = RegionSpace::with_groups(&model.bounds(), parameter_groups(&model))?;
    Ok((model, space))
}

/// Verdict for one region with the chosen engine.
pub fn decide_region(
    model: &Automaton,
    region: &ParamRegion,
    goal: LocId,
    engine: Engine,
) -> Result<RegionVerdict, SynthError> {
    let symbolic = match engine {
        Engine::Oracle => None,
        _ => Some(RegionAutomaton::new(model, region)?.ef_search(goal, DEFAULT_STATE_LIMIT)?),
    };
    let oracle = match engine {
        Engine::Symbolic => None,
        _ => {
            if model.has_stops() {
                return Err(SynthError::OracleNeedsNoStops);
            }
            let ta = model.instantiate(&region.representative)?;
            Some(concrete::ta_reaches(&ta, goal))
        }
    };
    let reachable = match (&symbolic, oracle) {
        (Some(s), Some(o)) if s.is_some() != o => {
            return Err(SynthError::EngineDisagreement {
                representative: region.representative.clone(),
                symbolic: s.is_some(),
                oracle: o,
            })
        }
        (Some(s), _) => s.is_some(),
        (None, Some(o)) => o,
        (None, None) => unreachable!("some engine runs"),
    };
    Ok(RegionVerdict { region: region.clone(), reachable, witness: symbolic.flatten() })
}

#[cfg(feature = "parallel")]
fn decide_all(
    model: &Automaton,
    regions: &[ParamRegion],
    goal: LocId,
    engine: Engine,
) -> Result<Vec<RegionVerdict>, SynthError> {
    use rayon::prelude::*;
    regions.par_iter().map(|r| decide_region(model, r, goal, engine)).collect()
}

#[cfg(not(feature = "parallel"))]
fn decide_all(
    model: &Automaton,
    regions: &[ParamRegion],
    goal: LocId,
    engine: Engine,
) -> Result<Vec<RegionVerdict>, SynthError> {
    regions.iter().map(|r| decide_region(model, r, goal, engine)).collect()
}

/// Every region with its verdict; the reaching ones form the exact set of
/// valuations under which `goal` is reachable.
pub fn ef_synth(a: &Automaton, goal: LocId, engine: Engine) -> Result<SynthesisResult, SynthError> {
    let (model, space) = prepare(a)?;
    let regions = space.enumerate();
    let verdicts = decide_all(&model, &regions, goal, engine)?;
    Ok(SynthesisResult { goal, engine, model, space, verdicts })
}

/// Whether some valuation reaches `goal`; stops at the first reaching region.
pub fn ef_emptiness(a: &Automaton, goal: LocId, engine: Engine) -> Result<Emptiness, SynthError> {
    let (model, space) = prepare(a)?;
    for r in space.enumerate() {
        let v = decide_region(&model, &r, goal, engine)?;
        if v.reachable {
            return Ok(Emptiness::NonEmpty(Box::new(v)));
        }
    }
    Ok(Emptiness::Empty)
}
