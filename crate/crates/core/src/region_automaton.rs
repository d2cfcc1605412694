//! The region automaton of a model over one parameter region: states pair a
//! location with a parametric matrix, and edges combine a time successor with
//! a discrete step. Includes breadth-first goal search and turning symbolic
//! witnesses into concrete runs.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::rc::Rc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{Automaton, ClockId, EdgeId, LocId, ModelError};
use crate::concrete::{self, ConcreteRun, PathStep};
use crate::fm::Ineq;
use crate::param_region::ParamRegion;
use crate::pdbm::{self, FrozenValue, Pdbm, PdbmError, RegionCtx, StopContext, UNCLAMPED};
use crate::plt::PltTerm;
use crate::Q;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymState {
    pub loc: LocId,
    /// Matrix over the clocks running in `loc` (all clocks without stops).
    pub pdbm: Pdbm,
    pub stop: StopContext,
}

/// One step of a symbolic run: let time pass `delay` times (as an index into
/// the successor list), then take `edge`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymStep {
    pub edge: EdgeId,
    pub delay: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymRun {
    pub states: Vec<SymState>,
    pub steps: Vec<SymStep>,
}

impl SymRun {
    /// One block per state: location then matrix.
    pub fn dump(&self, a: &Automaton) -> String {
        let names = a.param_names();
        let mut out = String::new();
        for (i, s) in self.states.iter().enumerate() {
            let running: Vec<String> = running_clocks(a, s.loc, a.has_stops())
                .into_iter()
                .map(|c| a.clocks[c].clone())
                .collect();
            let _ = writeln!(out, "[{i}] {}", a.locations[s.loc].name);
            out.push_str(&s.pdbm.dump(&running, Some(&names)));
            for (c, fv) in &s.stop.frozen {
                let _ = writeln!(out, "{} stopped at {} + {}", a.clocks[*c], fv.int, fv.frac.display(Some(&names)));
            }
            if let Some(step) = self.steps.get(i) {
                let e = &a.edges[step.edge];
                let label = e.action.clone().unwrap_or_else(|| format!("e{}", step.edge));
                let _ = writeln!(out, "  -- delay {} then {label} -->", step.delay);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error(transparent)]
    Pdbm(#[from] PdbmError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("explored more than {0} symbolic states")]
    StateLimit(usize),
    #[error("could not build a concrete run for the symbolic witness")]
    ConcretizationFailed,
}

fn running_clocks(a: &Automaton, loc: LocId, stopwatch: bool) -> Vec<ClockId> {
    (0..a.num_clocks()).filter(|c| !(stopwatch && a.locations[loc].stop.contains(c))).collect()
}

/// Region automaton of `a` over one region. The automaton must already carry
/// the auxiliary zero parameter when its updates need one.
pub struct RegionAutomaton<'a> {
    a: &'a Automaton,
    ctx: RegionCtx<'a>,
    cap: u32,
    stopwatch: bool,
    /// Per location: model clock to matrix index (minus one) when running.
    local: Vec<Vec<Option<usize>>>,
    memo: HashMap<Pdbm, Rc<Vec<Pdbm>>>,
}

impl<'a> RegionAutomaton<'a> {
    pub fn new(a: &'a Automaton, region: &'a ParamRegion) -> Result<Self, SearchError> {
        Self::with_cap(a, region, a.largest_constant() + 1)
    }

    /// Same automaton with an explicit integer-part cap; `UNCLAMPED` keeps
    /// exact integer parts.
    pub fn with_cap(a: &'a Automaton, region: &'a ParamRegion, cap: u32) -> Result<Self, SearchError> {
        if a.needs_aux() && a.aux_param().is_none() {
            return Err(ModelError::MissingAux.into());
        }
        let stopwatch = a.has_stops();
        let local = (0..a.locations.len())
            .map(|l| {
                let run = running_clocks(a, l, stopwatch);
                (0..a.num_clocks()).map(|c| run.iter().position(|r| *r == c)).collect()
            })
            .collect();
        Ok(RegionAutomaton { a, ctx: RegionCtx::new(region), cap, stopwatch, local, memo: HashMap::new() })
    }

    /// Uses the stopwatch code path (freezing, stopped-clock guards) even
    /// when no location stops a clock.
    pub fn with_stopwatch_path(mut self) -> Self {
        self.stopwatch = true;
        self
    }

    pub fn ctx(&self) -> &RegionCtx<'a> {
        &self.ctx
    }

    pub fn initial_state(&self) -> Result<SymState, SearchError> {
        let full = Pdbm::initial(self.a.num_clocks(), self.cap);
        self.enter(self.a.init, full)
    }

    /// Restricts a matrix over all clocks to the clocks running in `loc`.
    fn enter(&self, loc: LocId, full: Pdbm) -> Result<SymState, SearchError> {
        if !self.stopwatch {
            return Ok(SymState { loc, pdbm: full, stop: StopContext::default() });
        }
        let (pdbm, stop) = pdbm::freeze(&full, &self.a.locations[loc].stop, &self.ctx)?;
        Ok(SymState { loc, pdbm, stop })
    }

    fn time_successors(&mut self, p: &Pdbm) -> Result<Rc<Vec<Pdbm>>, SearchError> {
        if let Some(s) = self.memo.get(p) {
            return Ok(Rc::clone(s));
        }
        let s = Rc::new(pdbm::succ(p, &self.ctx)?);
        self.memo.insert(p.clone(), Rc::clone(&s));
        Ok(s)
    }

    fn guard_holds(&self, s: &SymState, edge: EdgeId, p: &Pdbm) -> Result<bool, SearchError> {
        let e = &self.a.edges[edge];
        let total = e.is_total(self.a.num_clocks());
        if self.stopwatch {
            return Ok(pdbm::guard_with_stopped(&e.guard, p, &s.stop, &self.local[s.loc], &self.ctx, total));
        }
        if total {
            Ok(pdbm::p_guard_exists(&e.guard, p, &self.ctx))
        } else {
            Ok(pdbm::guard_forall(&e.guard, p, &self.ctx)?)
        }
    }

    /// Discrete step through `edge` from time successor `p` of `s`, assuming
    /// the guard holds.
    fn fire(&self, s: &SymState, edge: EdgeId, p: &Pdbm) -> Result<SymState, SearchError> {
        let e = &self.a.edges[edge];
        if e.is_total(self.a.num_clocks()) {
            let (targets, consts) = self.a.decompose_update(&e.update)?;
            let full = match targets {
                Some(t) => pdbm::update_param(&t, self.cap, &self.ctx)?,
                None => Pdbm::initial(self.a.num_clocks(), self.cap),
            };
            let full = pdbm::update_np(&full, &consts, &self.ctx);
            return self.enter(e.dst, full);
        }
        let local = &self.local[s.loc];
        let mut stop = s.stop.clone();
        let mut resets = Vec::new();
        for (c, v) in &e.update {
            let k = match v {
                crate::automaton::Value::Const(k) => *k,
                crate::automaton::Value::Param(_) => return Err(PdbmError::NotTotal.into()),
            };
            match local[*c] {
                Some(i) => resets.push((i, k)),
                None => {
                    stop.frozen.insert(*c, FrozenValue { int: k.min(self.cap), frac: PltTerm::Zero });
                }
            }
        }
        Ok(SymState { loc: e.dst, pdbm: pdbm::update_np(p, &resets, &self.ctx), stop })
    }

    /// Every discrete successor of `s`, in edge order then delay order.
    pub fn successors(&mut self, s: &SymState) -> Result<Vec<(SymStep, SymState)>, SearchError> {
        let times = self.time_successors(&s.pdbm)?;
        let mut out = Vec::new();
        for (edge, e) in self.a.edges.iter().enumerate() {
            if e.src != s.loc {
                continue;
            }
            for (delay, p) in times.iter().enumerate() {
                if self.guard_holds(s, edge, p)? {
                    let next = self.fire(s, edge, p)?;
                    out.push((SymStep { edge, delay }, next));
                }
            }
        }
        Ok(out)
    }

    /// Marks `s` and every time successor of it as covered; returns false
    /// if `s` was already covered. Time elapsing is deterministic, so a
    /// covered state's successors are among those of the state covering it.
    fn cover(&mut self, s: &SymState, covered: &mut HashSet<SymState>) -> Result<bool, SearchError> {
        if covered.contains(s) {
            return Ok(false);
        }
        for p in self.time_successors(&s.pdbm)?.iter() {
            covered.insert(SymState { loc: s.loc, pdbm: p.clone(), stop: s.stop.clone() });
        }
        covered.insert(s.clone());
        Ok(true)
    }

    /// Breadth-first search for `goal`; returns a symbolic witness with the
    /// fewest discrete steps.
    pub fn ef_search(&mut self, goal: LocId, limit: usize) -> Result<Option<SymRun>, SearchError> {
        let init = self.initial_state()?;
        let mut covered = HashSet::new();
        self.cover(&init, &mut covered)?;
        let mut nodes: Vec<(SymState, Option<(usize, SymStep)>)> = vec![(init, None)];
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            if nodes[i].0.loc == goal {
                return Ok(Some(rebuild(&nodes, i)));
            }
            let state = nodes[i].0.clone();
            for (step, next) in self.successors(&state)? {
                if !self.cover(&next, &mut covered)? {
                    continue;
                }
                if nodes.len() >= limit {
                    return Err(SearchError::StateLimit(limit));
                }
                queue.push_back(nodes.len());
                nodes.push((next, Some((i, step))));
            }
        }
        Ok(None)
    }

    /// Locations reachable in the region automaton.
    pub fn reachable_locations(&mut self, limit: usize) -> Result<BTreeSet<LocId>, SearchError> {
        let init = self.initial_state()?;
        let mut locs = BTreeSet::from([init.loc]);
        let mut covered = HashSet::new();
        self.cover(&init, &mut covered)?;
        let mut queue = VecDeque::from([init]);
        let mut count = 1;
        while let Some(s) = queue.pop_front() {
            for (_, next) in self.successors(&s)? {
                if !self.cover(&next, &mut covered)? {
                    continue;
                }
                count += 1;
                if count >= limit {
                    return Err(SearchError::StateLimit(limit));
                }
                locs.insert(next.loc);
                queue.push_back(next);
            }
        }
        Ok(locs)
    }
}

fn rebuild(nodes: &[(SymState, Option<(usize, SymStep)>)], mut i: usize) -> SymRun {
    let mut states = vec![nodes[i].0.clone()];
    let mut steps = Vec::new();
    while let Some((parent, step)) = nodes[i].1 {
        steps.push(step);
        states.push(nodes[parent].0.clone());
        i = parent;
    }
    states.reverse();
    steps.reverse();
    SymRun { states, steps }
}

/// Default bound on explored states per region.
pub const DEFAULT_STATE_LIMIT: usize = 2_000_000;

/// Initial state of the region automaton of `a` over `region`.
pub fn initial_state(a: &Automaton, region: &ParamRegion) -> Result<SymState, SearchError> {
    RegionAutomaton::new(a, region)?.initial_state()
}

/// Whether `goal` is reachable in the region automaton, with a witness.
pub fn ef_search(a: &Automaton, region: &ParamRegion, goal: LocId) -> Result<Option<SymRun>, SearchError> {
    RegionAutomaton::new(a, region)?.ef_search(goal, DEFAULT_STATE_LIMIT)
}

/// Linear constraints over scaled clock values describing membership in a
/// matrix over the given running clocks, with exact integer parts.
fn member_ineqs(p: &Pdbm, running: &[ClockId], n: usize, scale: Q, fracs: &[Q]) -> Vec<Ineq> {
    let mut out = Vec::new();
    let var = |c: ClockId| {
        let mut v = vec![Q::zero(); n];
        v[c] = Q::one();
        v
    };
    let e = |i: usize| if i == 0 { Q::zero() } else { Q::from_integer(p.int_part(i - 1) as i64) };
    for (k, &c) in running.iter().enumerate() {
        let lo = e(k + 1) * scale;
        out.push(Ineq::new(var(c).into_iter().map(|x| -x).collect(), lo, false));
        out.push(Ineq::new(var(c), -(lo + scale), true));
    }
    for i in 0..p.dim() {
        for j in 0..p.dim() {
            if i == j {
                continue;
            }
            // (X_i/s - E_i) - (X_j/s - E_j) ⊲ d, scaled by s
            let mut coeffs = vec![Q::zero(); n];
            if i > 0 {
                coeffs[running[i - 1]] += Q::one();
            }
            if j > 0 {
                coeffs[running[j - 1]] -= Q::one();
            }
            let b = p.cell(i, j);
            let constant = (e(j) - e(i)) * scale - b.term.eval(fracs) * scale;
            out.push(Ineq::new(coeffs, constant, b.flag == crate::plt::CmpFlag::Lt));
        }
    }
    out
}

fn frozen_ineqs(stop: &StopContext, n: usize, scale: Q, fracs: &[Q]) -> Vec<Ineq> {
    let mut out = Vec::new();
    for (c, fv) in &stop.frozen {
        let x = fv.at(fracs) * scale;
        let mut up = vec![Q::zero(); n];
        up[*c] = Q::one();
        let down: Vec<Q> = up.iter().map(|v| -*v).collect();
        out.push(Ineq::new(up, -x, false));
        out.push(Ineq::new(down, x, false));
    }
    out
}

/// Builds a concrete run of the instantiated automaton that follows the
/// symbolic run, at valuation `v` of `region`. Values in the returned run
/// are in the instantiated automaton's scaled units.
pub fn concretize_witness(
    run: &SymRun,
    a: &Automaton,
    region: &ParamRegion,
    v: &[Q],
) -> Result<ConcreteRun, SearchError> {
    let ta = a.instantiate(v)?;
    let scale = Q::from_integer(ta.scale);
    let fracs: Vec<Q> = v.iter().map(|x| x.fract()).collect();
    let n = a.num_clocks();
    // replay with exact integer parts
    let exact = RegionAutomaton::with_cap(a, region, UNCLAMPED)?;
    let stopwatch = exact.stopwatch;
    let mut state = exact.initial_state()?;
    let mut path = Vec::with_capacity(run.steps.len());
    for step in &run.steps {
        let mut p = state.pdbm.clone();
        for _ in 0..step.delay {
            p = pdbm::te(&p, &exact.ctx)?;
        }
        let running = running_clocks(a, state.loc, stopwatch);
        let mut pre = member_ineqs(&state.pdbm, &running, n, scale, &fracs);
        pre.extend(frozen_ineqs(&state.stop, n, scale, &fracs));
        let post = member_ineqs(&p, &running, n, scale, &fracs);
        path.push(PathStep { edge: step.edge, pre, post });
        state = exact.fire(&state, step.edge, &p)?;
    }
    concrete::concretize_path(&ta, &path, &[], stopwatch).ok_or(SearchError::ConcretizationFailed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{Atom, Edge, Location, Parameter, Rel, Value};
    use crate::param_region::{ParamBound, RegionSpace};

    fn loc(name: &str) -> Location {
        Location { name: name.into(), stop: Default::default() }
    }

    /// One clock, guard x >= p with a total reset, p in [0, 1].
    fn toy() -> Automaton {
        Automaton {
            params: vec![Parameter { name: "p".into(), bound: ParamBound::new(0, 1), aux: false }],
            clocks: vec!["x".into()],
            consts: vec![],
            locations: vec![loc("a"), loc("b")],
            init: 0,
            edges: vec![Edge {
                src: 0,
                dst: 1,
                guard: vec![Atom { clock: 0, rel: Rel::Ge, rhs: Value::Param(0) }],
                action: None,
                update: vec![(0, Value::Const(0))],
            }],
        }
    }

    #[test]
    fn initial_location_is_reached_without_steps() {
        let a = toy();
        let space = RegionSpace::new(&a.bounds()).unwrap();
        for r in space.enumerate() {
            let run = ef_search(&a, &r, 0).unwrap().unwrap();
            assert!(run.steps.is_empty());
            assert_eq!(run.states[0].pdbm, Pdbm::initial(1, 2));
        }
    }

    #[test]
    fn parametric_guard_fires_in_exactly_one_delay() {
        let a = toy();
        let space = RegionSpace::new(&a.bounds()).unwrap();
        let r = space.region_of(&[Q::new(1, 2)]).unwrap();
        let mut ra = RegionAutomaton::new(&a, &r).unwrap();
        let s = ra.initial_state().unwrap();
        let succ = ra.successors(&s).unwrap();
        // x >= 1/2: the open cell (0, 1) meets it, as do all later delays
        assert!(succ.iter().all(|(st, _)| st.delay >= 1));
        let targets: std::collections::HashSet<SymState> = succ.into_iter().map(|(_, s)| s).collect();
        assert_eq!(targets.len(), 1);
    }

    #[test]
    fn witness_concretizes_and_replays() {
        let a = toy();
        let space = RegionSpace::new(&a.bounds()).unwrap();
        for r in space.enumerate() {
            let run = ef_search(&a, &r, 1).unwrap().unwrap();
            let cr = concretize_witness(&run, &a, &r, &r.representative).unwrap();
            let ta = a.instantiate(&r.representative).unwrap();
            assert_eq!(concrete::replay(&cr, &ta, false), Ok(()));
        }
    }
}
