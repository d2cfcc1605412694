//! Concrete updatable timed automata with integer constants: zone-based
//! reachability, run replay and random simulation. Serves as the reference
//! the symbolic engine is checked against.

use std::collections::VecDeque;
use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{ClockId, EdgeId, LocId, Rel};
use crate::fm::{self, Ineq};
use crate::Q;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteEdge {
    /// Index of the edge in the source automaton.
    pub id: EdgeId,
    pub src: LocId,
    pub dst: LocId,
    pub guard: Vec<(ClockId, Rel, i64)>,
    pub update: Vec<(ClockId, i64)>,
}

/// A timed automaton with natural-number constants, obtained by instantiating
/// parameters and scaling by `scale`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteTa {
    pub clocks: usize,
    pub locations: usize,
    pub init: LocId,
    pub edges: Vec<ConcreteEdge>,
    /// `stops[l][c]` when clock `c` does not advance in location `l`.
    pub stops: Vec<Vec<bool>>,
    pub scale: i64,
}

impl ConcreteTa {
    pub fn max_constant(&self) -> i64 {
        self.edges
            .iter()
            .flat_map(|e| e.guard.iter().map(|g| g.2).chain(e.update.iter().map(|u| u.1)))
            .max()
            .unwrap_or(0)
    }

    fn running(&self, loc: LocId, stopwatch: bool) -> Vec<bool> {
        (0..self.clocks).map(|c| !(stopwatch && self.stops[loc].get(c).copied().unwrap_or(false))).collect()
    }
}

/// One discrete step of a run: wait `delay`, then take `edge`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStep {
    pub delay: Q,
    pub edge: EdgeId,
}

/// Alternating states and steps: `states[i]` then `steps[i]` leads to
/// `states[i + 1]`. Values are in the units of the concrete automaton.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteRun {
    pub states: Vec<(LocId, Vec<Q>)>,
    pub steps: Vec<RunStep>,
}

impl ConcreteRun {
    /// Same run with every value and delay divided by `scale`, turning the
    /// units of an instantiated automaton back into model units.
    pub fn unscaled(&self, scale: i64) -> ConcreteRun {
        let s = Q::from_integer(scale);
        ConcreteRun {
            states: self.states.iter().map(|(l, w)| (*l, w.iter().map(|x| *x / s).collect())).collect(),
            steps: self.steps.iter().map(|st| RunStep { delay: st.delay / s, edge: st.edge }).collect(),
        }
    }

    pub fn last_location(&self) -> LocId {
        self.states.last().expect("runs start with the initial state").0
    }
}

impl fmt::Display for ConcreteRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (loc, w)) in self.states.iter().enumerate() {
            let vals: Vec<String> = w.iter().map(|x| x.to_string()).collect();
            write!(f, "l{loc} [{}]", vals.join(", "))?;
            if let Some(s) = self.steps.get(i) {
                writeln!(f, " --{} / e{}-->", s.delay, s.edge)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("run does not start in the initial state")]
    BadStart,
    #[error("step {0} does not match the automaton")]
    Step(usize),
}

/// Checks a run against the automaton. With `stopwatch`, clocks stopped in
/// the current location keep their value during delays.
pub fn replay(run: &ConcreteRun, ta: &ConcreteTa, stopwatch: bool) -> Result<(), ReplayError> {
    let (l0, w0) = run.states.first().ok_or(ReplayError::BadStart)?;
    if *l0 != ta.init || w0.len() != ta.clocks || w0.iter().any(|x| !x.is_zero()) {
        return Err(ReplayError::BadStart);
    }
    if run.states.len() != run.steps.len() + 1 {
        return Err(ReplayError::Step(run.steps.len()));
    }
    for (i, step) in run.steps.iter().enumerate() {
        let (loc, w) = &run.states[i];
        let bad = ReplayError::Step(i);
        let edge = ta.edges.get(step.edge).ok_or(bad.clone())?;
        if edge.src != *loc || step.delay.is_negative() {
            return Err(bad);
        }
        let rates = ta.running(*loc, stopwatch);
        let mut w: Vec<Q> =
            w.iter().zip(&rates).map(|(x, r)| if *r { *x + step.delay } else { *x }).collect();
        for &(c, rel, k) in &edge.guard {
            if !rel.holds(w[c], Q::from_integer(k)) {
                return Err(bad);
            }
        }
        for &(c, k) in &edge.update {
            w[c] = Q::from_integer(k);
        }
        let (next_loc, next_w) = &run.states[i + 1];
        if *next_loc != edge.dst || *next_w != w {
            return Err(bad);
        }
    }
    Ok(())
}

/// Integer difference bound with strictness; `INF` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct ZBound {
    value: i64,
    /// `false` for strict, so strict bounds order first.
    closed: bool,
}

impl ZBound {
    const INF: ZBound = ZBound { value: i64::MAX, closed: false };
    const ZERO: ZBound = ZBound { value: 0, closed: true };

    fn le(value: i64) -> Self {
        ZBound { value, closed: true }
    }

    fn lt(value: i64) -> Self {
        ZBound { value, closed: false }
    }

    fn add(self, o: ZBound) -> ZBound {
        if self == ZBound::INF || o == ZBound::INF {
            ZBound::INF
        } else {
            ZBound { value: self.value + o.value, closed: self.closed && o.closed }
        }
    }
}

/// A zone as a canonical difference bound matrix; index 0 is the reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Zone {
    n: usize,
    m: Vec<ZBound>,
}

impl Zone {
    fn zero(clocks: usize) -> Zone {
        let n = clocks + 1;
        Zone { n, m: vec![ZBound::ZERO; n * n] }
    }

    fn at(&self, i: usize, j: usize) -> ZBound {
        self.m[i * self.n + j]
    }

    fn put(&mut self, i: usize, j: usize, b: ZBound) {
        self.m[i * self.n + j] = b;
    }

    fn close(&mut self) {
        let n = self.n;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = self.at(i, k).add(self.at(k, j));
                    if via < self.at(i, j) {
                        self.put(i, j, via);
                    }
                }
            }
        }
    }

    fn is_empty(&self) -> bool {
        (0..self.n).any(|i| self.at(i, i) < ZBound::ZERO)
    }

    fn up(&mut self) {
        for i in 1..self.n {
            self.put(i, 0, ZBound::INF);
        }
    }

    fn constrain(&mut self, c: ClockId, rel: Rel, k: i64) {
        let x = c + 1;
        let (i, j, b) = match rel {
            Rel::Lt => (x, 0, ZBound::lt(k)),
            Rel::Le => (x, 0, ZBound::le(k)),
            Rel::Gt => (0, x, ZBound::lt(-k)),
            Rel::Ge => (0, x, ZBound::le(-k)),
        };
        if b < self.at(i, j) {
            self.put(i, j, b);
        }
    }

    fn reset(&mut self, c: ClockId, k: i64) {
        let x = c + 1;
        for j in 0..self.n {
            if j == x {
                continue;
            }
            let to = ZBound::le(k).add(self.at(0, j));
            let from = self.at(j, 0).add(ZBound::le(-k));
            self.put(x, j, to);
            self.put(j, x, from);
        }
        self.put(x, x, ZBound::ZERO);
    }

    /// Maximal-bound abstraction with one bound for every clock.
    fn extrapolate(&mut self, k: i64) {
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                let mi = if i == 0 { 0 } else { k };
                let mj = if j == 0 { 0 } else { k };
                let b = self.at(i, j);
                if b != ZBound::INF && b > ZBound::le(mi) {
                    self.put(i, j, ZBound::INF);
                } else if b < ZBound::lt(-mj) {
                    self.put(i, j, ZBound::lt(-mj));
                }
            }
        }
        self.close();
    }

    fn includes(&self, other: &Zone) -> bool {
        self.m.iter().zip(&other.m).all(|(a, b)| b <= a)
    }
}

/// Reachability of `goal` by forward zone exploration. Returns a witness run
/// when the goal is reachable. Stop sets are ignored.
pub fn ta_reachable(ta: &ConcreteTa, goal: LocId) -> (bool, Option<ConcreteRun>) {
    match reachable_set(ta, Some(goal)).1 {
        Some(path) => {
            let run = concretize_path(ta, &path.iter().map(|&e| PathStep::plain(e)).collect::<Vec<_>>(), &[], false);
            (true, run)
        }
        None => (false, None),
    }
}

/// Reachability verdict only, without building a witness.
pub fn ta_reaches(ta: &ConcreteTa, goal: LocId) -> bool {
    reachable_set(ta, Some(goal)).1.is_some()
}

/// Every location reachable in the concrete automaton.
pub fn reachable_locations(ta: &ConcreteTa) -> Vec<bool> {
    reachable_set(ta, None).0
}

fn reachable_set(ta: &ConcreteTa, goal: Option<LocId>) -> (Vec<bool>, Option<Vec<EdgeId>>) {
    let k = ta.max_constant();
    let mut seen = vec![false; ta.locations];
    let mut passed: Vec<Vec<usize>> = vec![Vec::new(); ta.locations];
    let mut nodes: Vec<(LocId, Zone, Option<(usize, EdgeId)>)> = Vec::new();
    let mut z0 = Zone::zero(ta.clocks);
    z0.up();
    z0.extrapolate(k);
    nodes.push((ta.init, z0, None));
    passed[ta.init].push(0);
    let mut queue = VecDeque::from([0usize]);
    let path_to = |nodes: &Vec<(LocId, Zone, Option<(usize, EdgeId)>)>, mut i: usize| {
        let mut path = Vec::new();
        while let Some((parent, e)) = nodes[i].2 {
            path.push(e);
            i = parent;
        }
        path.reverse();
        path
    };
    while let Some(idx) = queue.pop_front() {
        let loc = nodes[idx].0;
        seen[loc] = true;
        if goal == Some(loc) {
            return (seen, Some(path_to(&nodes, idx)));
        }
        for (e_id, e) in ta.edges.iter().enumerate() {
            if e.src != loc {
                continue;
            }
            let mut z = nodes[idx].1.clone();
            for &(c, rel, v) in &e.guard {
                z.constrain(c, rel, v);
            }
            z.close();
            if z.is_empty() {
                continue;
            }
            for &(c, v) in &e.update {
                z.reset(c, v);
            }
            z.close();
            z.up();
            z.extrapolate(k);
            if passed[e.dst].iter().any(|&o| nodes[o].1.includes(&z)) {
                continue;
            }
            let id = nodes.len();
            nodes.push((e.dst, z, Some((idx, e_id))));
            passed[e.dst].push(id);
            queue.push_back(id);
        }
    }
    (seen, None)
}

/// A step of an edge path with optional extra constraints on the valuation
/// before delaying (`pre`) and after delaying (`post`), each a conjunction of
/// inequalities over the clocks.
#[derive(Debug, Clone)]
pub(crate) struct PathStep {
    pub edge: EdgeId,
    pub pre: Vec<Ineq>,
    pub post: Vec<Ineq>,
}

impl PathStep {
    pub fn plain(edge: EdgeId) -> Self {
        PathStep { edge, pre: Vec::new(), post: Vec::new() }
    }
}

/// `clock rel k` as an inequality over `n` clocks.
pub(crate) fn atom_ineq(n: usize, c: ClockId, rel: Rel, k: Q) -> Ineq {
    let mut coeffs = vec![Q::zero(); n];
    match rel {
        Rel::Lt | Rel::Le => {
            coeffs[c] = Q::one();
            Ineq::new(coeffs, -k, rel == Rel::Lt)
        }
        Rel::Gt | Rel::Ge => {
            coeffs[c] = -Q::one();
            Ineq::new(coeffs, k, rel == Rel::Gt)
        }
    }
}

/// Valuations from which a delay with the given rates reaches `target`.
fn delay_preimage(target: &[Ineq], rates: &[bool]) -> Vec<Ineq> {
    let n = rates.len();
    let mut lifted: Vec<Ineq> = target
        .iter()
        .map(|c| {
            let mut coeffs = c.coeffs.clone();
            let d = c.coeffs.iter().zip(rates).filter(|(_, r)| **r).fold(Q::zero(), |acc, (a, _)| acc + *a);
            coeffs.push(d);
            Ineq::new(coeffs, c.constant, c.strict)
        })
        .collect();
    let mut neg = vec![Q::zero(); n + 1];
    neg[n] = -Q::one();
    lifted.push(Ineq::new(neg, Q::zero(), false));
    match fm::eliminate(&lifted, n) {
        Some(cs) => cs.into_iter().map(|mut c| {
            c.coeffs.pop();
            c
        }).collect(),
        None => vec![Ineq::new(vec![Q::zero(); n], Q::one(), false)],
    }
}

/// Valuations that land in `target` after the resets.
fn reset_preimage(target: &[Ineq], resets: &[(ClockId, Q)]) -> Vec<Ineq> {
    target
        .iter()
        .map(|c| {
            let mut c = c.clone();
            for &(x, k) in resets {
                c.constant += c.coeffs[x] * k;
                c.coeffs[x] = Q::zero();
            }
            c
        })
        .collect()
}

/// Simplest rational (smallest denominator) strictly or non-strictly within
/// the given interval; `hi` may be unbounded.
pub(crate) fn simplest_between(lo: Q, lo_closed: bool, hi: Option<(Q, bool)>) -> Option<Q> {
    if let Some((h, h_closed)) = hi {
        if h < lo || (h == lo && !(lo_closed && h_closed)) {
            return None;
        }
        if h == lo {
            return Some(lo);
        }
    }
    let ok = |x: Q| {
        (x > lo || (lo_closed && x == lo)) && hi.is_none_or(|(h, hc)| x < h || (hc && x == h))
    };
    for den in 1..=4096i64 {
        let start = (lo * Q::from_integer(den)).floor().to_integer();
        for num in start..=start + 1 {
            let x = Q::new(num, den);
            if ok(x) {
                return Some(x);
            }
        }
    }
    let h = hi.map(|(h, _)| h).unwrap_or(lo + Q::one());
    Some((lo + h) / Q::from_integer(2))
}

/// Interval of delays `d >= 0` with `w + d·rates` inside `set`.
fn delay_choice(set: &[Ineq], w: &[Q], rates: &[bool]) -> Option<Q> {
    let mut lo = (Q::zero(), true);
    let mut hi: Option<(Q, bool)> = None;
    for c in set {
        // c.coeffs·(w + d·r) + constant ⊲ 0  →  a·d + b ⊲ 0
        let a = c.coeffs.iter().zip(rates).filter(|(_, r)| **r).fold(Q::zero(), |acc, (x, _)| acc + *x);
        let b = c.eval(w);
        if a.is_zero() {
            let ok = if c.strict { b < Q::zero() } else { b <= Q::zero() };
            if !ok {
                return None;
            }
        } else if a.is_positive() {
            let v = -b / a;
            let closed = !c.strict;
            if hi.is_none_or(|(h, hc)| v < h || (v == h && hc && !closed)) {
                hi = Some((v, closed));
            }
        } else {
            let v = -b / a;
            let closed = !c.strict;
            if v > lo.0 || (v == lo.0 && lo.1 && !closed) {
                lo = (v, closed);
            }
        }
    }
    simplest_between(lo.0, lo.1, hi)
}

/// Builds a concrete run along the edge path that satisfies the extra
/// constraints of every step, with `last` constraining the final valuation.
/// Backward pass computes, for each step, the valuations from which the rest
/// of the path is feasible; forward pass picks delays inside those sets.
pub(crate) fn concretize_path(
    ta: &ConcreteTa,
    path: &[PathStep],
    last: &[Ineq],
    stopwatch: bool,
) -> Option<ConcreteRun> {
    let n = ta.clocks;
    // locations along the path
    let mut locs = vec![ta.init];
    for s in path {
        let e = &ta.edges[s.edge];
        if e.src != *locs.last().unwrap() {
            return None;
        }
        locs.push(e.dst);
    }
    // fire[i]: valuations right before edge i fires (after the delay)
    let mut fire: Vec<Vec<Ineq>> = vec![Vec::new(); path.len()];
    let mut next: Vec<Ineq> = last.to_vec();
    for (i, s) in path.iter().enumerate().rev() {
        let e = &ta.edges[s.edge];
        let resets: Vec<(ClockId, Q)> = e.update.iter().map(|&(c, k)| (c, Q::from_integer(k))).collect();
        let mut set = reset_preimage(&next, &resets);
        set.extend(e.guard.iter().map(|&(c, rel, k)| atom_ineq(n, c, rel, Q::from_integer(k))));
        set.extend(s.post.iter().cloned());
        if !fm::feasible(n, &set) {
            return None;
        }
        let mut before = delay_preimage(&set, &ta.running(locs[i], stopwatch));
        before.extend(s.pre.iter().cloned());
        fire[i] = set;
        next = before;
    }
    let mut w = vec![Q::zero(); n];
    if !next.iter().all(|c| c.holds_at(&w)) {
        return None;
    }
    let mut states = vec![(ta.init, w.clone())];
    let mut steps = Vec::with_capacity(path.len());
    for (i, s) in path.iter().enumerate() {
        let rates = ta.running(locs[i], stopwatch);
        let d = delay_choice(&fire[i], &w, &rates)?;
        for (x, r) in w.iter_mut().zip(&rates) {
            if *r {
                *x += d;
            }
        }
        for &(c, k) in &ta.edges[s.edge].update {
            w[c] = Q::from_integer(k);
        }
        steps.push(RunStep { delay: d, edge: s.edge });
        states.push((locs[i + 1], w.clone()));
    }
    Some(ConcreteRun { states, steps })
}

/// Random run of at most `steps` discrete steps; stops early in deadlocks.
pub fn simulate<R: Rng>(ta: &ConcreteTa, steps: usize, stopwatch: bool, rng: &mut R) -> ConcreteRun {
    let n = ta.clocks;
    let mut w = vec![Q::zero(); n];
    let mut loc = ta.init;
    let mut run = ConcreteRun { states: vec![(loc, w.clone())], steps: Vec::new() };
    for _ in 0..steps {
        let rates = ta.running(loc, stopwatch);
        let mut options = Vec::new();
        for (id, e) in ta.edges.iter().enumerate() {
            if e.src != loc {
                continue;
            }
            let guard: Vec<Ineq> =
                e.guard.iter().map(|&(c, rel, k)| atom_ineq(n, c, rel, Q::from_integer(k))).collect();
            if let Some(d) = delay_choice(&guard, &w, &rates) {
                // jitter the delay inside the feasible window when possible
                let d2 = d + Q::new(rng.gen_range(0..4), 4);
                let shifted: Vec<Q> = w.iter().zip(&rates).map(|(x, r)| if *r { *x + d2 } else { *x }).collect();
                let d = if guard.iter().all(|c| c.holds_at(&shifted)) { d2 } else { d };
                options.push((id, d));
            }
        }
        if options.is_empty() {
            break;
        }
        let (id, d) = options[rng.gen_range(0..options.len())];
        for (x, r) in w.iter_mut().zip(&rates) {
            if *r {
                *x += d;
            }
        }
        for &(c, k) in &ta.edges[id].update {
            w[c] = Q::from_integer(k);
        }
        loc = ta.edges[id].dst;
        run.steps.push(RunStep { delay: d, edge: id });
        run.states.push((loc, w.clone()));
    }
    run
}
