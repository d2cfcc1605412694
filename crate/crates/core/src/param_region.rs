//! Parameter regions: a finite partition of the bounded parameter space such
//! that every comparison between two parametric linear terms, and every
//! integer part, is constant within a cell.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::OnceLock;

use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fm::{self, Ineq};
use crate::plt::{all_terms, Bound, CmpFlag, ParamId, PltTerm};
use crate::Q;

/// Inclusive integer interval `[lo, hi]` for one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamBound {
    pub lo: u32,
    pub hi: u32,
}

impl ParamBound {
    pub fn new(lo: u32, hi: u32) -> Self {
        ParamBound { lo, hi }
    }

    pub fn contains(&self, v: Q) -> bool {
        v >= Q::from_integer(self.lo as i64) && v <= Q::from_integer(self.hi as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegionError {
    #[error("parameter {index} has empty bounds [{lo}, {hi}]")]
    EmptyBounds { index: usize, lo: u32, hi: u32 },
    #[error("value {value} of parameter {index} lies outside its bounds")]
    OutOfBounds { index: usize, value: Q },
    #[error("expected {expected} parameter values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("parameter groups must partition the parameters")]
    BadGroups,
}

/// A hyperplane `coeffs · frac + constant = 0` with coprime integer
/// coefficients and positive leading coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Plane {
    coeffs: Vec<(ParamId, i64)>,
    constant: i64,
}

impl Plane {
    fn from_affine(terms: impl Iterator<Item = (ParamId, i64)>, constant: i64) -> Option<Plane> {
        let mut coeffs: Vec<_> = terms.filter(|(_, c)| *c != 0).collect();
        if coeffs.is_empty() {
            return None;
        }
        coeffs.sort();
        let g = coeffs.iter().fold(constant.abs(), |g, (_, c)| g.gcd(c));
        let sign = if coeffs[0].1 < 0 { -1 } else { 1 };
        let d = g * sign;
        Some(Plane {
            coeffs: coeffs.into_iter().map(|(p, c)| (p, c / d)).collect(),
            constant: constant / d,
        })
    }

    fn eval(&self, fracs: &[Q]) -> Q {
        self.coeffs
            .iter()
            .fold(Q::from_integer(self.constant), |acc, (p, c)| acc + fracs[*p] * Q::from_integer(*c))
    }

    fn sign(&self, fracs: &[Q]) -> i8 {
        let v = self.eval(fracs);
        if v.is_zero() {
            0
        } else if v.is_positive() {
            1
        } else {
            -1
        }
    }
}

/// Integer parts of all parameters plus the sign of every separating plane
/// at the fractional parts. Two valuations share a region iff they share a
/// signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    pub int_parts: Vec<u32>,
    pub signs: Vec<i8>,
}

/// One cell of the partition together with an exact member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamRegion {
    pub signature: Signature,
    pub representative: Vec<Q>,
    fracs: Vec<Q>,
    group_of: Vec<usize>,
}

impl ParamRegion {
    fn new(signature: Signature, representative: Vec<Q>, group_of: Vec<usize>) -> Self {
        let fracs = representative.iter().map(|v| v.fract()).collect();
        ParamRegion { signature, representative, fracs, group_of }
    }

    /// Index of the parameter group holding `p`. Terms over parameters of
    /// different groups are never compared.
    pub fn group_of(&self, p: ParamId) -> usize {
        self.group_of[p]
    }

    /// Fractional parts of the representative.
    pub fn fracs(&self) -> &[Q] {
        &self.fracs
    }

    pub fn int_part(&self, p: ParamId) -> u32 {
        self.signature.int_parts[p]
    }

    pub fn num_params(&self) -> usize {
        self.representative.len()
    }
}

/// A bounded parameter space split into independent groups. Cells are
/// products of per-group cells; within a group every pair of PLT terms is
/// compared.
#[derive(Debug, Clone)]
pub struct RegionSpace {
    bounds: Vec<ParamBound>,
    groups: Vec<Vec<ParamId>>,
    planes: Vec<Plane>,
    group_planes: Vec<std::ops::Range<usize>>,
    /// Per group, the faces for every set of free parameters; built on
    /// first use.
    cells: Vec<OnceLock<HashMap<Vec<ParamId>, FreeCells>>>,
}

impl RegionSpace {
    /// Single group holding every parameter.
    pub fn new(bounds: &[ParamBound]) -> Result<Self, RegionError> {
        RegionSpace::with_groups(bounds, vec![(0..bounds.len()).collect()])
    }

    pub fn with_groups(bounds: &[ParamBound], groups: Vec<Vec<ParamId>>) -> Result<Self, RegionError> {
        for (index, b) in bounds.iter().enumerate() {
            if b.lo > b.hi {
                return Err(RegionError::EmptyBounds { index, lo: b.lo, hi: b.hi });
            }
        }
        let mut seen = vec![false; bounds.len()];
        for p in groups.iter().flatten() {
            if *p >= bounds.len() || seen[*p] {
                return Err(RegionError::BadGroups);
            }
            seen[*p] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(RegionError::BadGroups);
        }
        let groups: Vec<Vec<ParamId>> = groups.into_iter().filter(|g| !g.is_empty()).collect();
        let mut planes = Vec::new();
        let mut group_planes = Vec::new();
        for g in &groups {
            let start = planes.len();
            planes.extend(group_planes_for(g));
            group_planes.push(start..planes.len());
        }
        let cells = groups.iter().map(|_| OnceLock::new()).collect();
        Ok(RegionSpace { bounds: bounds.to_vec(), groups, planes, group_planes, cells })
    }

    pub fn bounds(&self) -> &[ParamBound] {
        &self.bounds
    }

    pub fn groups(&self) -> &[Vec<ParamId>] {
        &self.groups
    }

    fn group_index(&self) -> Vec<usize> {
        let mut g = vec![0; self.bounds.len()];
        for (i, group) in self.groups.iter().enumerate() {
            for p in group {
                g[*p] = i;
            }
        }
        g
    }

    fn check(&self, v: &[Q]) -> Result<(), RegionError> {
        if v.len() != self.bounds.len() {
            return Err(RegionError::Arity { expected: self.bounds.len(), got: v.len() });
        }
        for (index, (b, x)) in self.bounds.iter().zip(v).enumerate() {
            if !b.contains(*x) {
                return Err(RegionError::OutOfBounds { index, value: *x });
            }
        }
        Ok(())
    }

    pub fn signature_of(&self, v: &[Q]) -> Result<Signature, RegionError> {
        self.check(v)?;
        let fracs: Vec<Q> = v.iter().map(|x| x.fract()).collect();
        Ok(Signature {
            int_parts: v.iter().map(|x| x.floor().to_integer() as u32).collect(),
            signs: self.planes.iter().map(|p| p.sign(&fracs)).collect(),
        })
    }

    /// The region containing `v`, with `v` itself as representative.
    pub fn region_of(&self, v: &[Q]) -> Result<ParamRegion, RegionError> {
        Ok(ParamRegion::new(self.signature_of(v)?, v.to_vec(), self.group_index()))
    }

    /// All cells of the partition, each with a midpoint-style representative.
    pub fn enumerate(&self) -> Vec<ParamRegion> {
        let per_group: Vec<Vec<Vec<(ParamId, Q)>>> =
            (0..self.groups.len()).map(|gi| self.enumerate_group(gi)).collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; per_group.len()];
        let m = self.bounds.len();
        if per_group.iter().any(|g| g.is_empty()) {
            return out;
        }
        loop {
            let mut rep = vec![Q::zero(); m];
            for (g, &i) in per_group.iter().zip(&idx) {
                for (p, v) in &g[i] {
                    rep[*p] = *v;
                }
            }
            let sig = self.signature_of(&rep).expect("representative lies in bounds");
            out.push(ParamRegion::new(sig, rep, self.group_index()));
            // odometer over the per-group cell lists
            let mut k = per_group.len();
            loop {
                if k == 0 {
                    out.sort_by(|a, b| a.representative.cmp(&b.representative));
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < per_group[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    fn group_cells(&self, gi: usize) -> &HashMap<Vec<ParamId>, FreeCells> {
        self.cells[gi].get_or_init(|| {
            let group = &self.groups[gi];
            let range = self.group_planes[gi].clone();
            let planes: Vec<(usize, &Plane)> = range.clone().map(|i| (i, &self.planes[i])).collect();
            let movable: Vec<ParamId> = group.iter().copied().filter(|p| self.bounds[*p].lo < self.bounds[*p].hi).collect();
            let mut out = HashMap::new();
            for mask in 0u32..(1 << movable.len()) {
                let free: Vec<ParamId> =
                    movable.iter().enumerate().filter(|(k, _)| mask & (1 << k) != 0).map(|(_, p)| *p).collect();
                let mut points = Vec::new();
                let mut facets = HashMap::new();
                for (point, bounding) in cells_of(&free, &planes) {
                    let mut fracs = vec![Q::zero(); self.bounds.len()];
                    for (p, f) in free.iter().zip(&point) {
                        fracs[*p] = *f;
                    }
                    let signs: Vec<i8> = range.clone().map(|i| self.planes[i].sign(&fracs)).collect();
                    facets.insert(signs, bounding);
                    points.push(point);
                }
                out.insert(free, FreeCells { points, facets });
            }
            out
        })
    }

    fn free_params(&self, group: &[ParamId], int_part: impl Fn(ParamId) -> u32) -> Vec<ParamId> {
        group.iter().copied().filter(|p| int_part(*p) < self.bounds[*p].hi).collect()
    }

    /// Representatives of every cell of one group, as (param, value) lists.
    fn enumerate_group(&self, gi: usize) -> Vec<Vec<(ParamId, Q)>> {
        let group = &self.groups[gi];
        let cells = self.group_cells(gi);
        let mut out = Vec::new();
        let mut ints: Vec<u32> = group.iter().map(|p| self.bounds[*p].lo).collect();
        loop {
            let free = self.free_params(group, |p| ints[group.iter().position(|q| *q == p).unwrap()]);
            for fracs in &cells[&free].points {
                let mut vals: Vec<(ParamId, Q)> = group
                    .iter()
                    .zip(&ints)
                    .map(|(p, k)| (*p, Q::from_integer(*k as i64)))
                    .collect();
                for (p, f) in free.iter().zip(fracs) {
                    let slot = vals.iter_mut().find(|(q, _)| q == p).unwrap();
                    slot.1 += f;
                }
                out.push(vals);
            }
            let mut k = group.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if ints[k] < self.bounds[group[k]].hi {
                    ints[k] += 1;
                    break;
                }
                ints[k] = self.bounds[group[k]].lo;
            }
        }
    }
}

fn group_planes_for(group: &[ParamId]) -> Vec<Plane> {
    let m = group.iter().max().map_or(0, |x| x + 1);
    let in_group: HashSet<ParamId> = group.iter().copied().collect();
    let terms: Vec<PltTerm> = all_terms(m)
        .into_iter()
        .filter(|t| t.params().all(|p| in_group.contains(&p)))
        .collect();
    let mut set = BTreeSet::new();
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            let diff = a.affine() + b.affine().negate();
            let coeffs = diff.terms().map(|(p, c)| (p, c as i64));
            if let Some(p) = Plane::from_affine(coeffs, diff.constant_part() as i64) {
                set.insert(p);
            }
        }
    }
    set.into_iter().collect()
}

/// Faces of one group's arrangement for one set of free parameters.
#[derive(Debug, Clone)]
struct FreeCells {
    /// One point per face, in free-parameter order.
    points: Vec<Vec<Q>>,
    /// Group-plane signs of each face mapped to the planes (global indices)
    /// bounding it.
    facets: HashMap<Vec<i8>, Vec<usize>>,
}

/// Enumerates the faces of the arrangement restricted to `[0, 1)^free`, with
/// every non-free parameter at fractional part zero. Returns one point per
/// face, in free-parameter order, with the planes bounding the face.
///
/// Each face keeps only irredundant constraints, so the systems stay as
/// small as the faces are simple.
fn cells_of(free: &[ParamId], planes: &[(usize, &Plane)]) -> Vec<(Vec<Q>, Vec<usize>)> {
    let n = free.len();
    if n == 0 {
        return vec![(vec![], vec![])];
    }
    let pos = |p: ParamId| free.iter().position(|q| *q == p);
    // Restrict the planes to the free coordinates and drop duplicates.
    let mut restricted: Vec<(Vec<Q>, Q, usize)> = Vec::new();
    let mut seen = HashSet::new();
    for (index, pl) in planes {
        let mut coeffs = vec![Q::zero(); n];
        for (p, c) in &pl.coeffs {
            if let Some(k) = pos(*p) {
                coeffs[k] = Q::from_integer(*c);
            }
        }
        let Some(lead) = coeffs.iter().find(|c| !c.is_zero()).copied() else {
            continue;
        };
        let constant = Q::from_integer(pl.constant) / lead;
        let coeffs: Vec<Q> = coeffs.into_iter().map(|c| c / lead).collect();
        if seen.insert((coeffs.clone(), constant)) {
            restricted.push((coeffs, constant, *index));
        }
    }
    let one = Q::from_integer(1);
    // (constraint, plane it came from; None for the unit box)
    let mut box_cons: Vec<(Ineq, Option<usize>)> = Vec::new();
    for k in 0..n {
        let mut e = vec![Q::zero(); n];
        e[k] = -one;
        box_cons.push((Ineq::new(e.clone(), Q::zero(), false), None));
        e[k] = one;
        box_cons.push((Ineq::new(e, -one, true), None));
    }
    let system = |cons: &[(Ineq, Option<usize>)]| -> Vec<Ineq> { cons.iter().map(|(c, _)| c.clone()).collect() };
    let half = Q::new(1, 2);
    let mut faces: Vec<(Vec<(Ineq, Option<usize>)>, Vec<Q>)> = vec![(box_cons, vec![half; n])];
    for (coeffs, constant, index) in &restricted {
        let lt = Ineq::new(coeffs.clone(), *constant, true);
        let gt = Ineq { strict: true, ..lt.negated() };
        let le = Ineq::new(coeffs.clone(), *constant, false);
        let ge = lt.negated();
        let mut next = Vec::with_capacity(faces.len() * 2);
        for (cons, witness) in faces {
            let v = lt.eval(&witness);
            let here = if v.is_zero() { 0 } else if v.is_positive() { 1 } else { -1 };
            let base = system(&cons);
            let mut parts = Vec::new();
            for side in [-1i8, 0, 1] {
                let extra = match side {
                    -1 => vec![lt.clone()],
                    0 => vec![le.clone(), ge.clone()],
                    _ => vec![gt.clone()],
                };
                if side == here {
                    parts.push((extra, witness.clone()));
                } else {
                    let mut sys = base.clone();
                    sys.extend(extra.iter().cloned());
                    if let Some(w) = fm::solve(n, &sys) {
                        parts.push((extra, w));
                    }
                }
            }
            if parts.len() == 1 {
                next.push((cons, witness));
                continue;
            }
            for (extra, w) in parts {
                let mut c2 = cons.clone();
                // drop the plane constraints the cut makes redundant
                let mut i = 0;
                while i < c2.len() {
                    if c2[i].1.is_some() {
                        let mut sys: Vec<Ineq> =
                            c2.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, (c, _))| c.clone()).collect();
                        sys.extend(extra.iter().cloned());
                        sys.push(c2[i].0.negated());
                        if !fm::feasible(n, &sys) {
                            c2.remove(i);
                            continue;
                        }
                    }
                    i += 1;
                }
                c2.extend(extra.into_iter().map(|c| (c, Some(*index))));
                next.push((c2, w));
            }
        }
        faces = next;
    }
    faces
        .into_iter()
        .map(|(cons, w)| {
            let point = fm::solve(n, &system(&cons)).unwrap_or(w);
            let mut bounding: Vec<usize> = cons.iter().filter_map(|(_, i)| *i).collect();
            bounding.dedup();
            (point, bounding)
        })
        .collect()
}

/// Relation of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinRel {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl LinRel {
    /// The relation after multiplying both sides by a negative number.
    pub fn flipped(self) -> LinRel {
        match self {
            LinRel::Lt => LinRel::Gt,
            LinRel::Le => LinRel::Ge,
            LinRel::Eq => LinRel::Eq,
            LinRel::Ge => LinRel::Le,
            LinRel::Gt => LinRel::Lt,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            LinRel::Lt => "<",
            LinRel::Le => "<=",
            LinRel::Eq => "=",
            LinRel::Ge => ">=",
            LinRel::Gt => ">",
        }
    }
}

/// `sum(coeff * x_p) rel rhs`, where `x_p` is either the fractional part of
/// parameter `p` or its value, depending on use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub terms: Vec<(ParamId, Q)>,
    pub rel: LinRel,
    pub rhs: Q,
}

impl LinearConstraint {
    /// Text over fractional parts, e.g. `frac(p1) - frac(p2) > 0`.
    pub fn display_fracs(&self, names: &[String]) -> String {
        self.display_with(|p| format!("frac({})", names[p]))
    }

    pub fn display_with(&self, var: impl Fn(ParamId) -> String) -> String {
        let mut out = String::new();
        for (k, (p, c)) in self.terms.iter().enumerate() {
            let neg = *c < Q::zero();
            let mag = c.abs();
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            if mag != Q::from_integer(1) {
                out.push_str(&format!("{mag}*"));
            }
            out.push_str(&var(*p));
        }
        format!("{out} {} {}", self.rel.symbol(), self.rhs)
    }

    /// `coeffs · x + constant` over `n` variables, shifted by `offset`.
    fn ineqs(&self, n: usize, offset: &[Q]) -> Vec<Ineq> {
        let mut coeffs = vec![Q::zero(); n];
        let mut constant = -self.rhs;
        for (p, c) in &self.terms {
            coeffs[*p] += *c;
            constant += *c * offset[*p];
        }
        let neg: Vec<Q> = coeffs.iter().map(|c| -*c).collect();
        match self.rel {
            LinRel::Lt => vec![Ineq::new(coeffs, constant, true)],
            LinRel::Le => vec![Ineq::new(coeffs, constant, false)],
            LinRel::Eq => vec![Ineq::new(coeffs, constant, false), Ineq::new(neg, -constant, false)],
            LinRel::Ge => vec![Ineq::new(neg, -constant, false)],
            LinRel::Gt => vec![Ineq::new(neg, -constant, true)],
        }
    }

    /// The complement as a disjunction of conjunctions.
    fn negation(&self) -> Vec<LinearConstraint> {
        let with = |rel| LinearConstraint { terms: self.terms.clone(), rel, rhs: self.rhs };
        match self.rel {
            LinRel::Lt => vec![with(LinRel::Ge)],
            LinRel::Le => vec![with(LinRel::Gt)],
            LinRel::Eq => vec![with(LinRel::Lt), with(LinRel::Gt)],
            LinRel::Ge => vec![with(LinRel::Lt)],
            LinRel::Gt => vec![with(LinRel::Le)],
        }
    }

    fn complexity(&self) -> (usize, Q) {
        (self.terms.len(), self.terms.iter().fold(self.rhs.abs(), |acc, (_, c)| acc + c.abs()))
    }
}

impl RegionSpace {
    fn plane_constraint(&self, i: usize, sign: i8) -> LinearConstraint {
        let pl = &self.planes[i];
        let lead = Q::from_integer(pl.coeffs[0].1);
        LinearConstraint {
            terms: pl.coeffs.iter().map(|(p, c)| (*p, Q::from_integer(*c) / lead)).collect(),
            rel: match sign {
                -1 => LinRel::Lt,
                0 => LinRel::Eq,
                _ => LinRel::Gt,
            },
            rhs: -Q::from_integer(pl.constant) / lead,
        }
    }

    /// Planes that, with the box, cut out the cell of `r`: the facets of
    /// its face plus every plane through it.
    fn bounding_planes(&self, r: &ParamRegion) -> Vec<usize> {
        let mut out = Vec::new();
        for (gi, group) in self.groups.iter().enumerate() {
            let range = self.group_planes[gi].clone();
            let free = self.free_params(group, |p| r.int_part(p));
            let signs = &r.signature.signs[range.clone()];
            match self.group_cells(gi).get(&free).and_then(|c| c.facets.get(signs)) {
                Some(facets) => {
                    let mut idx: BTreeSet<usize> = facets.iter().copied().collect();
                    idx.extend(range.filter(|i| r.signature.signs[*i] == 0));
                    out.extend(idx);
                }
                None => out.extend(range),
            }
        }
        out
    }

    /// Inequalities over fractional parts describing the cell of `r`.
    fn cell_ineqs(&self, r: &ParamRegion) -> Vec<Ineq> {
        let n = self.bounds.len();
        let zero = vec![Q::zero(); n];
        let mut out = self.box_ineqs(r);
        for i in self.bounding_planes(r) {
            out.extend(self.plane_constraint(i, r.signature.signs[i]).ineqs(n, &zero));
        }
        out
    }

    fn box_ineqs(&self, r: &ParamRegion) -> Vec<Ineq> {
        let n = self.bounds.len();
        let mut out = Vec::new();
        for p in 0..n {
            let mut e = vec![Q::zero(); n];
            e[p] = -Q::from_integer(1);
            out.push(Ineq::new(e.clone(), Q::zero(), false));
            e[p] = Q::from_integer(1);
            let pinned = r.int_part(p) >= self.bounds[p].hi;
            out.push(Ineq::new(e, if pinned { Q::zero() } else { -Q::from_integer(1) }, !pinned));
        }
        out
    }

    /// An irredundant list of constraints on fractional parts that, with
    /// the integer parts, describes the region.
    pub fn constraints(&self, r: &ParamRegion) -> Vec<LinearConstraint> {
        let n = self.bounds.len();
        let zero = vec![Q::zero(); n];
        let mut eqs: Vec<LinearConstraint> = (0..n)
            .filter(|p| r.int_part(*p) >= self.bounds[*p].hi)
            .map(|p| LinearConstraint { terms: vec![(p, Q::from_integer(1))], rel: LinRel::Eq, rhs: Q::zero() })
            .collect();
        let (planes_eq, strict): (Vec<LinearConstraint>, Vec<LinearConstraint>) = self
            .bounding_planes(r)
            .into_iter()
            .map(|i| self.plane_constraint(i, r.signature.signs[i]))
            .partition(|c| c.rel == LinRel::Eq);
        // equalities: a basis of their span, simplest first
        let mut planes_eq = planes_eq;
        planes_eq.sort_by_key(|c| c.complexity());
        // rows are coefficients followed by the right-hand side
        let mut basis: Vec<Vec<Q>> = Vec::new();
        let row = |c: &LinearConstraint| {
            let mut v = vec![Q::zero(); n + 1];
            for (p, k) in &c.terms {
                v[*p] += *k;
            }
            v[n] = c.rhs;
            v
        };
        for c in &eqs {
            add_to_basis(&mut basis, row(c));
        }
        for c in planes_eq {
            if add_to_basis(&mut basis, row(&c)) {
                eqs.push(c);
            }
        }
        // strict facets: rewrite modulo the equalities, then drop any implied
        // by the rest, most complex first
        let mut strict: Vec<LinearConstraint> = strict
            .into_iter()
            .filter_map(|c| {
                let mut v = row(&c);
                reduce(&basis, &mut v);
                let lead = v[..n].iter().find(|x| !x.is_zero()).copied()?;
                let rel = if lead.is_negative() { c.rel.flipped() } else { c.rel };
                Some(LinearConstraint {
                    terms: (0..n).filter(|p| !v[*p].is_zero()).map(|p| (p, v[p] / lead)).collect(),
                    rel,
                    rhs: v[n] / lead,
                })
            })
            .collect();
        strict.sort_by(|a, b| b.complexity().cmp(&a.complexity()));
        strict.dedup();
        let mut fixed = self.box_ineqs(r);
        for c in &eqs {
            fixed.extend(c.ineqs(n, &zero));
        }
        let mut i = 0;
        while i < strict.len() {
            let mut base = fixed.clone();
            for (j, c) in strict.iter().enumerate() {
                if j != i {
                    base.extend(c.ineqs(n, &zero));
                }
            }
            let redundant = strict[i].negation().iter().all(|neg| {
                let mut sys = base.clone();
                sys.extend(neg.ineqs(n, &zero));
                !fm::feasible(n, &sys)
            });
            if redundant {
                strict.remove(i);
            } else {
                i += 1;
            }
        }
        strict.reverse();
        eqs.extend(strict);
        eqs
    }

    /// Whether every member of `r` satisfies `c`, read over parameter values.
    pub fn implies(&self, r: &ParamRegion, c: &LinearConstraint) -> bool {
        let n = self.bounds.len();
        let ints: Vec<Q> = (0..n).map(|p| Q::from_integer(r.int_part(p) as i64)).collect();
        let cell = self.cell_ineqs(r);
        c.negation().iter().all(|neg| {
            let mut sys = cell.clone();
            sys.extend(neg.ineqs(n, &ints));
            !fm::feasible(n, &sys)
        })
    }

    /// A random member of `r`, drawing each coordinate from a grid inside
    /// its feasible interval.
    pub fn sample_member<R: rand::Rng>(&self, r: &ParamRegion, rng: &mut R) -> Vec<Q> {
        let n = self.bounds.len();
        let fracs = fm::solve_with(n, &self.cell_ineqs(r), |lo, hi| {
            let l = lo.map_or(Q::zero(), |(l, _)| l);
            let h = hi.map_or(l + Q::from_integer(1), |(h, _)| h);
            l + (h - l) * Q::new(rng.gen_range(1..16), 16)
        })
        .expect("regions are non-empty");
        (0..n).map(|p| Q::from_integer(r.int_part(p) as i64) + fracs[p]).collect()
    }
}

/// Eliminates the leading entry of every `basis` row from `v`.
fn reduce(basis: &[Vec<Q>], v: &mut [Q]) {
    for b in basis {
        let lead = b.iter().position(|x| !x.is_zero()).expect("basis rows are non-zero");
        if !v[lead].is_zero() {
            let f = v[lead] / b[lead];
            for (x, y) in v.iter_mut().zip(b) {
                *x -= f * *y;
            }
        }
    }
}

/// Reduces `v` against `basis` (kept in echelon form); adds and returns
/// true when it is independent.
fn add_to_basis(basis: &mut Vec<Vec<Q>>, mut v: Vec<Q>) -> bool {
    reduce(basis, &mut v);
    if v.iter().all(Zero::is_zero) {
        return false;
    }
    basis.push(v);
    true
}

/// All regions of the bounded parameter space, comparing every pair of PLT
/// terms over all parameters.
pub fn enumerate_regions(bounds: &[ParamBound]) -> Result<Vec<ParamRegion>, RegionError> {
    Ok(RegionSpace::new(bounds)?.enumerate())
}

/// Validity of `a rel b` at the region.
pub fn is_valid(a: Bound, rel: CmpFlag, b: Bound, r: &ParamRegion) -> bool {
    a.at(r.fracs()).holds(rel, &b.at(r.fracs()))
}

/// Validity of `a rel b + c` at the region.
pub fn is_valid_sum(a: Bound, rel: CmpFlag, b: Bound, c: Bound, r: &ParamRegion) -> bool {
    a.at(r.fracs()).holds(rel, &(b.at(r.fracs()) + c.at(r.fracs())))
}

/// Whether two terms take the same value throughout the region.
pub fn terms_equal_in(t1: PltTerm, t2: PltTerm, r: &ParamRegion) -> bool {
    t1.eval(r.fracs()) == t2.eval(r.fracs())
}

/// Coarse upper bound on the number of regions for `m` parameters with the
/// given integer widths (saturating, as a float).
pub fn region_count_bound(bounds: &[ParamBound]) -> f64 {
    let m = bounds.len() as f64;
    let fact: f64 = (1..=bounds.len()).map(|k| k as f64).product();
    let per_param: f64 = bounds.iter().map(|b| (2.0 * m + 2.0) * (b.hi - b.lo + 1) as f64).product();
    let cons = 2.0 * (2.0 + m * (3f64.powf((m - 1.0) / 2.0) + 4.0));
    fact * 2f64.powf(m) * per_param * cons.powi(3)
}
