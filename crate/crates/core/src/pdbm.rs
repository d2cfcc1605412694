//! Parametric difference bound matrices over the fractional parts of clocks.
//!
//! A [`Pdbm`] pairs the integer part of every clock with a matrix of
//! [`Bound`]s: cell `(i, 0)` bounds `frac(x_i)`, cell `(0, i)` bounds
//! `-frac(x_i)` and cell `(i, j)` bounds `frac(x_i) - frac(x_j)`. All
//! operations are taken relative to a parameter region, through a
//! [`RegionCtx`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{Atom, Rel};
use crate::param_region::ParamRegion;
use crate::plt::{all_terms, bound_add, bound_shift, Bound, CmpFlag, ParamId, PltError, PltTerm, Shift, Valued};
use crate::Q;

/// Integer-part cap meaning "never clamp".
pub const UNCLAMPED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Open,
    Point,
}

/// Sub-kind of a well-formed matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    Point,
    /// Some clock has fractional part exactly zero.
    OpenA,
    /// Every clock has positive fractional part and some clock may reach 1.
    OpenB,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PdbmError {
    #[error("malformed matrix: {0}")]
    Malformed(&'static str),
    #[error("{op} cannot be applied to a {found:?} matrix")]
    WrongKind { op: &'static str, found: Class },
    #[error(transparent)]
    Plt(#[from] PltError),
    #[error("update must assign every clock")]
    NotTotal,
    #[error("guard atom on clock {0} has a parameter")]
    ParametricAtom(usize),
    #[error("clock {0} does not have a single value")]
    NotPinned(usize),
}

/// Region plus a table mapping every PLT term to the least term taking the
/// same value in the region, so coinciding terms are stored identically.
pub struct RegionCtx<'r> {
    region: &'r ParamRegion,
    canon: HashMap<PltTerm, PltTerm>,
}

impl<'r> RegionCtx<'r> {
    pub fn new(region: &'r ParamRegion) -> Self {
        let mut terms = all_terms(region.num_params());
        terms.sort();
        // Param-free terms absorb equal terms; otherwise terms merge only
        // within one parameter group.
        let group = |t: PltTerm| {
            let mut gs = t.params().map(|p| region.group_of(p));
            match gs.next() {
                None => Some(None),
                Some(g) => gs.all(|h| h == g).then_some(Some(g)),
            }
        };
        let mut constants: BTreeMap<Q, PltTerm> = BTreeMap::new();
        for t in &terms {
            if group(*t) == Some(None) {
                constants.entry(t.eval(region.fracs())).or_insert(*t);
            }
        }
        let mut by_value: BTreeMap<(Q, usize), PltTerm> = BTreeMap::new();
        let mut canon = HashMap::with_capacity(terms.len());
        for t in terms {
            let v = t.eval(region.fracs());
            let rep = match (constants.get(&v), group(t)) {
                (Some(c), _) => *c,
                (None, Some(Some(g))) => *by_value.entry((v, g)).or_insert(t),
                _ => t,
            };
            canon.insert(t, rep);
        }
        RegionCtx { region, canon }
    }

    pub fn region(&self) -> &'r ParamRegion {
        self.region
    }

    pub fn fracs(&self) -> &[Q] {
        self.region.fracs()
    }

    fn norm(&self, b: Bound) -> Bound {
        Bound::new(self.canon.get(&b.term).copied().unwrap_or(b.term), b.flag)
    }

    fn val(&self, b: Bound) -> Valued {
        b.at(self.fracs())
    }

    /// `(0, ≤) rel b` at the region.
    fn zero_le(&self, b: Bound) -> bool {
        Valued::new(Q::zero(), CmpFlag::Le) <= self.val(b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pdbm {
    ints: Vec<u32>,
    cells: Vec<Bound>,
    cap: u32,
    kind: Kind,
}

impl Pdbm {
    /// All clocks at zero.
    pub fn initial(clocks: usize, cap: u32) -> Pdbm {
        let dim = clocks + 1;
        Pdbm { ints: vec![0; clocks], cells: vec![Bound::ZERO_LE; dim * dim], cap, kind: Kind::Open }
    }

    /// Builds a matrix from explicit parts (mainly for tests and fixtures).
    pub fn from_parts(ints: Vec<u32>, rows: Vec<Vec<Bound>>, cap: u32, kind: Kind) -> Pdbm {
        let dim = ints.len() + 1;
        assert_eq!(rows.len(), dim);
        let cells: Vec<Bound> = rows.into_iter().flat_map(|r| {
            assert_eq!(r.len(), dim);
            r
        }).collect();
        Pdbm { ints, cells, cap, kind }
    }

    pub fn dim(&self) -> usize {
        self.ints.len() + 1
    }

    pub fn clocks(&self) -> usize {
        self.ints.len()
    }

    /// Integer part of clock `c` (zero-based), `cap` meaning "at least cap".
    pub fn int_part(&self, c: usize) -> u32 {
        self.ints[c]
    }

    pub fn ints(&self) -> &[u32] {
        &self.ints
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// Matrix cell; index 0 is the reference, clock `c` is row `c + 1`.
    pub fn cell(&self, i: usize, j: usize) -> Bound {
        self.cells[i * self.dim() + j]
    }

    fn set(&mut self, i: usize, j: usize, b: Bound) {
        let d = self.dim();
        self.cells[i * d + j] = b;
    }

    fn normalize(&mut self, ctx: &RegionCtx) {
        for c in &mut self.cells {
            *c = ctx.norm(*c);
        }
    }

    fn bump(&self, e: u32) -> u32 {
        if e >= self.cap {
            self.cap
        } else {
            (e + 1).min(self.cap)
        }
    }

    /// Same matrix with a different integer-part cap.
    pub fn with_cap(&self, cap: u32) -> Pdbm {
        let mut p = self.clone();
        p.cap = cap;
        p
    }

    /// Human-readable matrix: integer parts, then one line per row.
    pub fn dump(&self, clock_names: &[String], param_names: Option<&[String]>) -> String {
        let mut out = String::new();
        let ints: Vec<String> = self
            .ints
            .iter()
            .map(|e| if *e >= self.cap && self.cap != UNCLAMPED { format!(">{}", e - 1) } else { e.to_string() })
            .collect();
        let _ = writeln!(out, "E = ({})", ints.join(", "));
        for i in 0..self.dim() {
            let label = if i == 0 { "0".to_string() } else { clock_names[i - 1].clone() };
            let row: Vec<String> =
                (0..self.dim()).map(|j| self.cell(i, j).display(param_names).to_string()).collect();
            let _ = writeln!(out, "{label}: {}", row.join("  "));
        }
        out
    }
}

/// Value of a stopped clock: integer part plus a fractional PLT term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrozenValue {
    pub int: u32,
    pub frac: PltTerm,
}

impl FrozenValue {
    pub fn at(&self, fracs: &[Q]) -> Q {
        Q::from_integer(self.int as i64) + self.frac.eval(fracs)
    }
}

/// Frozen values of the stopped clocks, keyed by clock.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct StopContext {
    pub frozen: BTreeMap<usize, FrozenValue>,
}

/// Clocks with the largest fractional part.
pub fn lfp(p: &Pdbm, ctx: &RegionCtx) -> Vec<usize> {
    (1..p.dim()).filter(|&x| (0..p.dim()).all(|i| ctx.zero_le(p.cell(x, i)))).collect()
}

/// Resets each listed clock to a natural constant.
pub fn update_np(p: &Pdbm, resets: &[(usize, u32)], ctx: &RegionCtx) -> Pdbm {
    let mut q = p.clone();
    for &(c, k) in resets {
        let x = c + 1;
        q.set(x, 0, Bound::ZERO_LE);
        q.set(0, x, Bound::ZERO_LE);
        for i in 1..q.dim() {
            q.set(x, i, q.cell(0, i));
            q.set(i, x, q.cell(i, 0));
        }
        q.ints[c] = k.min(q.cap);
    }
    if !resets.is_empty() {
        q.kind = Kind::Open;
    }
    q.normalize(ctx);
    q
}

/// Point matrix after assigning every clock `c` to parameter `targets[c]`.
pub fn update_param(targets: &[ParamId], cap: u32, ctx: &RegionCtx) -> Result<Pdbm, PdbmError> {
    let dim = targets.len() + 1;
    let mut cells = vec![Bound::ZERO_LE; dim * dim];
    for (i, &a) in targets.iter().enumerate() {
        cells[(i + 1) * dim] = Bound::le(PltTerm::Frac(a));
        cells[i + 1] = Bound::le(PltTerm::NegFrac(a));
        for (j, &b) in targets.iter().enumerate() {
            cells[(i + 1) * dim + j + 1] = Bound::le(PltTerm::FracDiff(a, b).canonical()?);
        }
    }
    let ints = targets.iter().map(|&a| ctx.region().int_part(a).min(cap)).collect();
    let mut q = Pdbm { ints, cells, cap, kind: Kind::Point };
    q.normalize(ctx);
    Ok(q)
}

/// Some clock has fractional part exactly zero throughout.
fn has_zero_clock(p: &Pdbm, ctx: &RegionCtx) -> bool {
    (1..p.dim()).any(|i| ctx.val(p.cell(i, 0)).is_zero_le() && ctx.val(p.cell(0, i)).is_zero_le())
}

fn sub_kind(p: &Pdbm, ctx: &RegionCtx) -> Class {
    match p.kind {
        Kind::Point => Class::Point,
        Kind::Open if has_zero_clock(p, ctx) => Class::OpenA,
        Kind::Open => Class::OpenB,
    }
}

/// Lets time pass until just before the clocks with the largest fractional
/// part reach the next integer. Input must be a point or have a zero clock.
pub fn te_lt(p: &Pdbm, ctx: &RegionCtx) -> Result<Pdbm, PdbmError> {
    let class = sub_kind(p, ctx);
    if class == Class::OpenB {
        return Err(PdbmError::WrongKind { op: "te_lt", found: class });
    }
    let top = lfp(p, ctx);
    let x = *top.first().ok_or(PdbmError::Malformed("no clock has the largest fractional part"))?;
    let mut q = p.clone();
    for i in 1..p.dim() {
        let b = if top.contains(&i) { Bound::ONE_LT } else { bound_add(p.cell(i, x), Bound::ONE_LT)? };
        q.set(i, 0, b);
    }
    for i in 1..p.dim() {
        q.set(0, i, bound_shift(p.cell(0, i), Shift::ZERO_LT)?);
    }
    q.kind = Kind::Open;
    q.normalize(ctx);
    Ok(q)
}

/// Lets time pass until the clocks with the largest fractional part reach
/// the next integer. Input must have every fractional part positive.
pub fn te_eq(p: &Pdbm, ctx: &RegionCtx) -> Result<Pdbm, PdbmError> {
    let class = sub_kind(p, ctx);
    if class != Class::OpenB {
        return Err(PdbmError::WrongKind { op: "te_eq", found: class });
    }
    let top = lfp(p, ctx);
    let x = *top.first().ok_or(PdbmError::Malformed("no clock has the largest fractional part"))?;
    let mut q = p.clone();
    for i in 1..p.dim() {
        if top.contains(&i) {
            q.set(i, 0, Bound::ZERO_LE);
            q.set(0, i, Bound::ZERO_LE);
            q.ints[i - 1] = p.bump(p.ints[i - 1]);
        } else {
            q.set(i, 0, bound_add(p.cell(i, x), Bound::ONE_LE)?);
            q.set(0, i, bound_shift(p.cell(x, i), Shift::MINUS_ONE_LE)?);
        }
    }
    // Every clock that wrapped now sits at fractional part zero, so its row
    // and column copy the reference ones.
    for &z in &top {
        for i in 1..p.dim() {
            let (a, b) = (q.cell(i, 0), q.cell(0, i));
            q.set(i, z, a);
            q.set(z, i, b);
        }
    }
    q.normalize(ctx);
    Ok(q)
}

/// One time-elapsing step, dispatching on the sub-kind.
pub fn te(p: &Pdbm, ctx: &RegionCtx) -> Result<Pdbm, PdbmError> {
    if p.clocks() == 0 {
        return Ok(p.clone());
    }
    match sub_kind(p, ctx) {
        Class::Point | Class::OpenA => te_lt(p, ctx),
        Class::OpenB => te_eq(p, ctx),
    }
}

/// `p` followed by its iterated time successors, up to the first repeat.
pub fn succ(p: &Pdbm, ctx: &RegionCtx) -> Result<Vec<Pdbm>, PdbmError> {
    let mut out = vec![p.clone()];
    loop {
        let next = te(out.last().unwrap(), ctx)?;
        if out.contains(&next) {
            return Ok(out);
        }
        out.push(next);
    }
}

/// Checks the well-formedness conditions and returns the sub-kind.
pub fn classify(p: &Pdbm, ctx: &RegionCtx) -> Result<Class, PdbmError> {
    let d = p.dim();
    let v = |i: usize, j: usize| ctx.val(p.cell(i, j));
    let zero_le = Valued::new(Q::zero(), CmpFlag::Le);
    let one_lt = Valued::new(Q::one(), CmpFlag::Lt);
    let m_one_lt = Valued::new(-Q::one(), CmpFlag::Lt);
    let unit = |b: Valued| zero_le <= b && b <= one_lt;
    let neg_unit = |b: Valued| m_one_lt <= b && b <= zero_le;
    for i in 0..d {
        if v(i, i) != zero_le {
            return Err(PdbmError::Malformed("diagonal"));
        }
    }
    for i in 1..d {
        if !neg_unit(v(0, i)) || !unit(v(i, 0)) {
            return Err(PdbmError::Malformed("fractional bounds"));
        }
    }
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                if v(i, j) > v(i, k) + v(k, j) {
                    return Err(PdbmError::Malformed("canonical form"));
                }
            }
        }
    }
    if p.kind == Kind::Point {
        for i in 0..d {
            for j in 0..d {
                if p.cell(i, j).flag != CmpFlag::Le || v(i, j).value != -v(j, i).value {
                    return Err(PdbmError::Malformed("point antisymmetry"));
                }
            }
        }
        return Ok(Class::Point);
    }
    for i in 1..d {
        for j in 1..d {
            if i == j {
                continue;
            }
            let ok = (unit(v(i, j)) && neg_unit(v(j, i))) || (unit(v(j, i)) && neg_unit(v(i, j)));
            if !ok {
                return Err(PdbmError::Malformed("clock differences"));
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let (a, b) = (v(i, j), v(j, i));
            let closed = a.value == -b.value && a.value != Q::one() && b.value != Q::one();
            let expect = if closed { CmpFlag::Le } else { CmpFlag::Lt };
            if a.flag != expect || b.flag != expect {
                return Err(PdbmError::Malformed("strictness"));
            }
        }
    }
    if has_zero_clock(p, ctx) {
        return Ok(Class::OpenA);
    }
    let some_top = (1..d).any(|i| v(i, 0) == one_lt);
    let lower_strict = (1..d).all(|j| !v(0, j).value.is_zero() || v(0, j).flag == CmpFlag::Lt);
    if some_top && lower_strict {
        Ok(Class::OpenB)
    } else {
        Err(PdbmError::Malformed("neither border nor center"))
    }
}

/// Matrix of valued bounds at the region's representative.
fn valued(p: &Pdbm, fracs: &[Q]) -> Vec<Valued> {
    p.cells.iter().map(|b| b.at(fracs)).collect()
}

/// Shortest-path closure; false when a negative cycle makes the set empty.
fn close(m: &mut [Valued], d: usize) -> bool {
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let via = m[i * d + k] + m[k * d + j];
                if via < m[i * d + j] {
                    m[i * d + j] = via;
                }
            }
        }
    }
    (0..d).all(|i| m[i * d + i] >= Valued::new(Q::zero(), CmpFlag::Le))
}

enum AtomEffect {
    Always,
    Never,
    /// Tighten cell `(row, col)` of the fractional matrix.
    Tighten(usize, usize, Valued),
}

/// Translates `x rel z` into a condition on `frac(x)` given the integer part
/// of `x`.
fn atom_effect(p: &Pdbm, clock: usize, rel: Rel, z: Q) -> AtomEffect {
    let e = p.ints[clock];
    let i = clock + 1;
    if p.cap != UNCLAMPED && e >= p.cap {
        // value is at least cap, which exceeds every constant and bound
        return if matches!(rel, Rel::Gt | Rel::Ge) { AtomEffect::Always } else { AtomEffect::Never };
    }
    let k = z.floor().to_integer();
    let f = z.fract();
    let e = e as i64;
    use std::cmp::Ordering::*;
    match (rel, e.cmp(&k)) {
        (Rel::Lt | Rel::Le, Less) | (Rel::Gt | Rel::Ge, Greater) => AtomEffect::Always,
        (Rel::Lt | Rel::Le, Greater) | (Rel::Gt | Rel::Ge, Less) => AtomEffect::Never,
        (Rel::Lt, Equal) => AtomEffect::Tighten(i, 0, Valued::new(f, CmpFlag::Lt)),
        (Rel::Le, Equal) => AtomEffect::Tighten(i, 0, Valued::new(f, CmpFlag::Le)),
        (Rel::Gt, Equal) => AtomEffect::Tighten(0, i, Valued::new(-f, CmpFlag::Lt)),
        (Rel::Ge, Equal) => AtomEffect::Tighten(0, i, Valued::new(-f, CmpFlag::Le)),
    }
}

/// Whether some member satisfies every `(clock, rel, value)` atom.
fn satisfiable(p: &Pdbm, fracs: &[Q], atoms: &[(usize, Rel, Q)]) -> bool {
    let d = p.dim();
    let mut m = valued(p, fracs);
    for &(c, rel, z) in atoms {
        match atom_effect(p, c, rel, z) {
            AtomEffect::Always => {}
            AtomEffect::Never => return false,
            AtomEffect::Tighten(i, j, b) => {
                if b < m[i * d + j] {
                    m[i * d + j] = b;
                }
            }
        }
    }
    close(&mut m, d)
}

fn atom_value(a: &Atom, r: &ParamRegion) -> Q {
    a.rhs.eval(&r.representative)
}

/// Whether every member satisfies the constant guard.
pub fn guard_forall(g: &[Atom], p: &Pdbm, ctx: &RegionCtx) -> Result<bool, PdbmError> {
    for a in g {
        if a.rhs.is_param() {
            return Err(PdbmError::ParametricAtom(a.clock));
        }
    }
    Ok(forall_atoms(g, p, ctx))
}

fn forall_atoms(g: &[Atom], p: &Pdbm, ctx: &RegionCtx) -> bool {
    g.iter().all(|a| {
        let z = atom_value(a, ctx.region());
        !satisfiable(p, ctx.fracs(), &[(a.clock, a.rel.negate(), z)])
    })
}

/// Whether some member satisfies the guard at the region's valuation.
pub fn p_guard_exists(g: &[Atom], p: &Pdbm, ctx: &RegionCtx) -> bool {
    let atoms: Vec<(usize, Rel, Q)> = g.iter().map(|a| (a.clock, a.rel, atom_value(a, ctx.region()))).collect();
    satisfiable(p, ctx.fracs(), &atoms)
}

/// Removes the stopped clocks, each of which must have a single value, and
/// records their values.
pub fn freeze(p: &Pdbm, stopped: &BTreeSet<usize>, ctx: &RegionCtx) -> Result<(Pdbm, StopContext), PdbmError> {
    let mut frozen = BTreeMap::new();
    for &c in stopped {
        let (up, down) = (p.cell(c + 1, 0), p.cell(0, c + 1));
        let pinned = up.flag == CmpFlag::Le
            && down.flag == CmpFlag::Le
            && ctx.val(up).value == -ctx.val(down).value;
        if !pinned {
            return Err(PdbmError::NotPinned(c));
        }
        frozen.insert(c, FrozenValue { int: p.ints[c], frac: up.term });
    }
    let keep: Vec<usize> = (0..p.clocks()).filter(|c| !stopped.contains(c)).collect();
    let idx: Vec<usize> = std::iter::once(0).chain(keep.iter().map(|c| c + 1)).collect();
    let rows = idx.iter().map(|&i| idx.iter().map(|&j| p.cell(i, j)).collect()).collect();
    let ints = keep.iter().map(|&c| p.ints[c]).collect();
    Ok((Pdbm::from_parts(ints, rows, p.cap, p.kind), StopContext { frozen }))
}

/// Guard check over a matrix of running clocks plus frozen stopped clocks.
///
/// `local[c]` maps a model clock to its row in `p` (minus one) when running.
/// With `exists` the running part is checked existentially, otherwise
/// universally.
pub fn guard_with_stopped(
    g: &[Atom],
    p: &Pdbm,
    stop: &StopContext,
    local: &[Option<usize>],
    ctx: &RegionCtx,
    exists: bool,
) -> bool {
    let mut running = Vec::new();
    for a in g {
        match local[a.clock] {
            Some(c) => running.push(Atom { clock: c, ..*a }),
            None => {
                let fv = stop.frozen[&a.clock];
                let z = atom_value(a, ctx.region());
                let holds = if p.cap != UNCLAMPED && fv.int >= p.cap {
                    matches!(a.rel, Rel::Gt | Rel::Ge)
                } else {
                    a.rel.holds(fv.at(ctx.fracs()), z)
                };
                if !holds {
                    return false;
                }
            }
        }
    }
    if exists {
        p_guard_exists(&running, p, ctx)
    } else {
        forall_atoms(&running, p, ctx)
    }
}

/// Whether clock valuation `w` lies in the matrix at parameter fractional
/// parts `fracs`.
pub fn membership(w: &[Q], p: &Pdbm, fracs: &[Q]) -> bool {
    if w.len() != p.clocks() {
        return false;
    }
    for (c, x) in w.iter().enumerate() {
        let e = p.ints[c];
        let ok = if p.cap != UNCLAMPED && e >= p.cap {
            *x >= Q::from_integer(p.cap as i64)
        } else {
            x.floor() == Q::from_integer(e as i64)
        };
        if !ok {
            return false;
        }
    }
    let f: Vec<Q> = std::iter::once(Q::zero()).chain(w.iter().map(|x| x.fract())).collect();
    for i in 0..p.dim() {
        for j in 0..p.dim() {
            let lhs = Valued::new(f[i] - f[j], CmpFlag::Le);
            let b = p.cell(i, j).at(fracs);
            let ok = if b.flag == CmpFlag::Lt { lhs.value < b.value } else { lhs.value <= b.value };
            if !ok {
                return false;
            }
        }
    }
    true
}

/// Draws a member by fixing fractional parts one clock at a time, each at a
/// seeded random point of its feasible interval. `None` if the set is empty.
pub fn sample_member<R: Rng>(p: &Pdbm, fracs: &[Q], rng: &mut R) -> Option<Vec<Q>> {
    let d = p.dim();
    let mut m = valued(p, fracs);
    if !close(&mut m, d) {
        return None;
    }
    let mut w = Vec::with_capacity(p.clocks());
    for i in 1..d {
        let hi = m[i * d];
        let lo = m[i];
        let (l, h) = (-lo.value, hi.value);
        let f = if l == h {
            l
        } else {
            let t = Q::new(rng.gen_range(1..32), 32);
            let closed_lo = lo.flag == CmpFlag::Le && rng.gen_bool(0.1);
            if closed_lo { l } else { l + (h - l) * t }
        };
        m[i * d] = Valued::new(f, CmpFlag::Le);
        m[i] = Valued::new(-f, CmpFlag::Le);
        if !close(&mut m, d) {
            return None;
        }
        let e = p.ints[i - 1];
        let base = if p.cap != UNCLAMPED && e >= p.cap { e as i64 + rng.gen_range(0..3) } else { e as i64 };
        w.push(Q::from_integer(base) + f);
    }
    Some(w)
}
