//! Automaton model: parametric timed automata whose clocks may be updated to
//! parameters, with optional stopwatches.

use std::collections::BTreeSet;
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concrete::{ConcreteEdge, ConcreteTa};
use crate::param_region::ParamBound;
use crate::plt::ParamId;
use crate::Q;

pub type ClockId = usize;
pub type LocId = usize;
pub type EdgeId = usize;

/// Name of the zero-pinned parameter added when a total update mixes
/// parameters and constants.
pub const AUX_PARAM: &str = "_zero";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rel {
    Lt,
    Le,
    Ge,
    Gt,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }

    pub fn negate(self) -> Rel {
        match self {
            Rel::Lt => Rel::Ge,
            Rel::Le => Rel::Gt,
            Rel::Ge => Rel::Lt,
            Rel::Gt => Rel::Le,
        }
    }

    pub fn holds<T: PartialOrd>(self, lhs: T, rhs: T) -> bool {
        match self {
            Rel::Lt => lhs < rhs,
            Rel::Le => lhs <= rhs,
            Rel::Ge => lhs >= rhs,
            Rel::Gt => lhs > rhs,
        }
    }
}

/// Right-hand side of a guard atom or target of an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Value {
    Const(u32),
    Param(ParamId),
}

impl Value {
    pub fn is_param(&self) -> bool {
        matches!(self, Value::Param(_))
    }

    pub fn eval(&self, v: &[Q]) -> Q {
        match self {
            Value::Const(c) => Q::from_integer(*c as i64),
            Value::Param(p) => v[*p],
        }
    }
}

/// `clock rel rhs`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub clock: ClockId,
    pub rel: Rel,
    pub rhs: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub bound: ParamBound,
    /// Added internally; never reported.
    pub aux: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub name: String,
    /// Clocks whose rate is zero in this location.
    pub stop: BTreeSet<ClockId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: LocId,
    pub dst: LocId,
    pub guard: Vec<Atom>,
    pub action: Option<String>,
    pub update: Vec<(ClockId, Value)>,
}

impl Edge {
    pub fn has_param_guard(&self) -> bool {
        self.guard.iter().any(|a| a.rhs.is_param())
    }

    pub fn has_param_update(&self) -> bool {
        self.update.iter().any(|(_, v)| v.is_param())
    }

    pub fn is_total(&self, clocks: usize) -> bool {
        let set: BTreeSet<ClockId> = self.update.iter().map(|(c, _)| *c).collect();
        set.len() == clocks
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Automaton {
    pub params: Vec<Parameter>,
    pub clocks: Vec<String>,
    /// Named constants, kept for printing; atoms store their values.
    pub consts: Vec<(String, u32)>,
    pub locations: Vec<Location>,
    pub init: LocId,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    /// No restriction on updates.
    U2p,
    /// Parametric guards and parametric updates require total updates.
    Ru2p,
    /// As `Ru2p`, and stop sets may only change on total updates.
    Sru2p,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Clause {
    ParamGuardNeedsTotalUpdate,
    ParamUpdateNeedsTotalUpdate,
    StopChangeNeedsTotalUpdate,
    StopsNeedStopwatchFlavor,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Clause::ParamGuardNeedsTotalUpdate => "an edge with a parametric guard must update every clock",
            Clause::ParamUpdateNeedsTotalUpdate => "an edge updating a clock to a parameter must update every clock",
            Clause::StopChangeNeedsTotalUpdate => "an edge changing the set of stopped clocks must update every clock",
            Clause::StopsNeedStopwatchFlavor => "stopped clocks are only allowed in the stopwatch flavor",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Edge index, or `None` for location-level violations.
    pub edge: Option<EdgeId>,
    pub clause: Clause,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("parameter valuation: {0}")]
    Valuation(String),
    #[error("the model has no auxiliary zero parameter; call `with_aux` first")]
    MissingAux,
}

impl Automaton {
    pub fn num_clocks(&self) -> usize {
        self.clocks.len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn bounds(&self) -> Vec<ParamBound> {
        self.params.iter().map(|p| p.bound).collect()
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn location(&self, name: &str) -> Result<LocId, ModelError> {
        self.locations
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| ModelError::UnknownLocation(name.to_string()))
    }

    pub fn has_stops(&self) -> bool {
        self.locations.iter().any(|l| !l.stop.is_empty())
    }

    pub fn aux_param(&self) -> Option<ParamId> {
        self.params.iter().position(|p| p.aux)
    }

    /// Structural restrictions of the requested flavor; empty when accepted.
    pub fn validate(&self, flavor: Flavor) -> Vec<Violation> {
        let h = self.num_clocks();
        let mut out = Vec::new();
        if flavor != Flavor::Sru2p && self.has_stops() {
            out.push(Violation { edge: None, clause: Clause::StopsNeedStopwatchFlavor });
        }
        if flavor == Flavor::U2p {
            return out;
        }
        for (i, e) in self.edges.iter().enumerate() {
            let total = e.is_total(h);
            if e.has_param_guard() && !total {
                out.push(Violation { edge: Some(i), clause: Clause::ParamGuardNeedsTotalUpdate });
            }
            if e.has_param_update() && !total {
                out.push(Violation { edge: Some(i), clause: Clause::ParamUpdateNeedsTotalUpdate });
            }
            if flavor == Flavor::Sru2p
                && self.locations[e.src].stop != self.locations[e.dst].stop
                && !total
            {
                out.push(Violation { edge: Some(i), clause: Clause::StopChangeNeedsTotalUpdate });
            }
        }
        out
    }

    /// Whether some edge mixes parameter and constant targets in one update.
    pub fn needs_aux(&self) -> bool {
        self.edges
            .iter()
            .any(|e| e.has_param_update() && e.update.iter().any(|(_, v)| !v.is_param()))
    }

    /// Copy with the zero-pinned auxiliary parameter appended when needed.
    pub fn with_aux(&self) -> Automaton {
        let mut a = self.clone();
        if a.aux_param().is_none() && a.needs_aux() {
            a.params.push(Parameter { name: AUX_PARAM.to_string(), bound: ParamBound::new(0, 0), aux: true });
        }
        a
    }

    /// Splits an update into a total all-parameter stage (constant targets go
    /// to the zero-pinned parameter) and the constant assignments that follow
    /// it. Purely constant updates have no first stage.
    pub fn decompose_update(
        &self,
        update: &[(ClockId, Value)],
    ) -> Result<(Option<Vec<ParamId>>, Vec<(ClockId, u32)>), ModelError> {
        let consts: Vec<(ClockId, u32)> = update
            .iter()
            .filter_map(|(c, v)| match v {
                Value::Const(k) => Some((*c, *k)),
                Value::Param(_) => None,
            })
            .collect();
        if !update.iter().any(|(_, v)| v.is_param()) {
            return Ok((None, consts));
        }
        let mut targets = vec![None; self.num_clocks()];
        for (c, v) in update {
            targets[*c] = Some(*v);
        }
        let aux = if consts.is_empty() { None } else { Some(self.aux_param().ok_or(ModelError::MissingAux)?) };
        let total = targets
            .into_iter()
            .map(|t| match t {
                Some(Value::Param(p)) => p,
                _ => aux.expect("constant targets exist"),
            })
            .collect();
        Ok((Some(total), consts))
    }

    /// Largest constant: guard and update constants and parameter upper bounds.
    pub fn largest_constant(&self) -> u32 {
        let guards = self.edges.iter().flat_map(|e| e.guard.iter()).filter_map(|a| match a.rhs {
            Value::Const(c) => Some(c),
            Value::Param(_) => None,
        });
        let updates = self.edges.iter().flat_map(|e| e.update.iter()).filter_map(|(_, v)| match v {
            Value::Const(c) => Some(*c),
            Value::Param(_) => None,
        });
        let params = self.params.iter().map(|p| p.bound.hi);
        guards.chain(updates).chain(params).max().unwrap_or(0)
    }

    /// Substitutes `v` and scales every constant by the common denominator.
    pub fn instantiate(&self, v: &[Q]) -> Result<ConcreteTa, ModelError> {
        if v.len() != self.num_params() {
            return Err(ModelError::Valuation(format!(
                "expected {} values, got {}",
                self.num_params(),
                v.len()
            )));
        }
        for (p, x) in self.params.iter().zip(v) {
            if !p.bound.contains(*x) {
                return Err(ModelError::Valuation(format!("{} = {} is out of bounds", p.name, x)));
            }
        }
        let scale = v.iter().fold(1i64, |acc, x| acc.lcm(x.denom()));
        let conv = |val: &Value| -> i64 {
            let q = val.eval(v) * Q::from_integer(scale);
            debug_assert!(q.is_integer());
            q.to_integer()
        };
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(id, e)| ConcreteEdge {
                id,
                src: e.src,
                dst: e.dst,
                guard: e.guard.iter().map(|a| (a.clock, a.rel, conv(&a.rhs))).collect(),
                update: e.update.iter().map(|(c, val)| (*c, conv(val))).collect(),
            })
            .collect();
        Ok(ConcreteTa {
            clocks: self.num_clocks(),
            locations: self.locations.len(),
            init: self.init,
            edges,
            stops: self
                .locations
                .iter()
                .map(|l| (0..self.num_clocks()).map(|c| l.stop.contains(&c)).collect())
                .collect(),
            scale,
        })
    }
}
