//! Parametric linear terms (PLT) over the fractional parts of parameters and
//! the bounds built from them.

use std::cmp::Ordering;
use std::fmt;

use num_traits::Zero as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Q;

/// Zero-based parameter index.
pub type ParamId = usize;

/// Strictness of a bound. `Lt` orders before `Le`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpFlag {
    Lt,
    Le,
}

impl CmpFlag {
    /// Strictness of a sum of two bounds: non-strict only if both are.
    pub fn combine(self, other: CmpFlag) -> CmpFlag {
        if self == CmpFlag::Le && other == CmpFlag::Le {
            CmpFlag::Le
        } else {
            CmpFlag::Lt
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpFlag::Lt => "<",
            CmpFlag::Le => "≤",
        }
    }
}

/// A term of the form `a·frac(p_i) + b·frac(p_j) + c` restricted to the nine
/// shapes that are closed under the operations of the symbolic engine.
///
/// For the two-parameter shapes the first index always carries the positive
/// coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PltTerm {
    Zero,
    One,
    /// `frac(p_i)`
    Frac(ParamId),
    /// `1 - frac(p_i)`
    OneMinusFrac(ParamId),
    /// `-frac(p_i)`
    NegFrac(ParamId),
    /// `frac(p_i) - 1`
    FracMinusOne(ParamId),
    /// `frac(p_i) - frac(p_j)`
    FracDiff(ParamId, ParamId),
    /// `frac(p_j) + 1 - frac(p_i)` written as `FracDiffPlusOne(j, i)`
    FracDiffPlusOne(ParamId, ParamId),
    /// `frac(p_i) - 1 - frac(p_j)`
    FracDiffMinusOne(ParamId, ParamId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PltError {
    #[error("`{0}` is not a parametric linear term")]
    NotInPlt(Affine),
}

/// Small affine form over fractional parts, used as the intermediate result
/// of sums before they are matched back to a [`PltTerm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Affine {
    vars: [(ParamId, i32); 4],
    len: u8,
    constant: i32,
}

impl Affine {
    pub fn constant(c: i32) -> Self {
        Affine { vars: [(0, 0); 4], len: 0, constant: c }
    }

    fn var(p: ParamId, coef: i32, c: i32) -> Self {
        Affine::constant(c).plus_var(p, coef)
    }

    fn plus_var(mut self, p: ParamId, coef: i32) -> Self {
        if coef == 0 {
            return self;
        }
        for k in 0..self.len as usize {
            if self.vars[k].0 == p {
                self.vars[k].1 += coef;
                if self.vars[k].1 == 0 {
                    self.vars[k] = self.vars[self.len as usize - 1];
                    self.len -= 1;
                }
                return self;
            }
        }
        // Sums of at most two PLT terms never hold more than four parameters.
        self.vars[self.len as usize] = (p, coef);
        self.len += 1;
        self
    }

    pub fn terms(&self) -> impl Iterator<Item = (ParamId, i32)> + '_ {
        self.vars[..self.len as usize].iter().copied()
    }

    pub fn constant_part(&self) -> i32 {
        self.constant
    }

    pub fn eval(&self, fracs: &[Q]) -> Q {
        self.terms()
            .fold(Q::from_integer(self.constant as i64), |acc, (p, c)| {
                acc + fracs[p] * Q::from_integer(c as i64)
            })
    }

    pub fn negate(&self) -> Self {
        let mut out = *self;
        out.constant = -out.constant;
        for k in 0..out.len as usize {
            out.vars[k].1 = -out.vars[k].1;
        }
        out
    }
}

impl std::ops::Add for Affine {
    type Output = Affine;

    fn add(self, rhs: Affine) -> Affine {
        let mut out = self;
        out.constant += rhs.constant;
        for (p, c) in rhs.terms() {
            out = out.plus_var(p, c);
        }
        out
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut vars: Vec<_> = self.terms().collect();
        vars.sort();
        for (k, (p, c)) in vars.iter().enumerate() {
            match (k, *c < 0) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if c.abs() != 1 {
                write!(f, "{}·", c.abs())?;
            }
            write!(f, "frac(p{})", p + 1)?;
        }
        match (vars.is_empty(), self.constant) {
            (true, c) => write!(f, "{c}"),
            (false, 0) => Ok(()),
            (false, c) if c > 0 => write!(f, " + {c}"),
            (false, c) => write!(f, " - {}", -c),
        }
    }
}

impl PltTerm {
    pub fn affine(self) -> Affine {
        use PltTerm::*;
        match self {
            Zero => Affine::constant(0),
            One => Affine::constant(1),
            Frac(i) => Affine::var(i, 1, 0),
            OneMinusFrac(i) => Affine::var(i, -1, 1),
            NegFrac(i) => Affine::var(i, -1, 0),
            FracMinusOne(i) => Affine::var(i, 1, -1),
            FracDiff(i, j) => Affine::var(i, 1, 0).plus_var(j, -1),
            FracDiffPlusOne(j, i) => Affine::var(j, 1, 1).plus_var(i, -1),
            FracDiffMinusOne(i, j) => Affine::var(i, 1, -1).plus_var(j, -1),
        }
    }

    /// Matches an affine form against the nine admissible shapes.
    pub fn from_affine(a: Affine) -> Result<PltTerm, PltError> {
        use PltTerm::*;
        let vars: Vec<_> = a.terms().collect();
        let term = match (vars.as_slice(), a.constant) {
            ([], 0) => Some(Zero),
            ([], 1) => Some(One),
            ([(i, 1)], 0) => Some(Frac(*i)),
            ([(i, 1)], -1) => Some(FracMinusOne(*i)),
            ([(i, -1)], 1) => Some(OneMinusFrac(*i)),
            ([(i, -1)], 0) => Some(NegFrac(*i)),
            ([(a1, c1), (a2, c2)], k) if *c1 == -*c2 && c1.abs() == 1 => {
                let (pos, neg) = if *c1 == 1 { (*a1, *a2) } else { (*a2, *a1) };
                match k {
                    0 => Some(FracDiff(pos, neg)),
                    1 => Some(FracDiffPlusOne(pos, neg)),
                    -1 => Some(FracDiffMinusOne(pos, neg)),
                    _ => None,
                }
            }
            _ => None,
        };
        term.ok_or(PltError::NotInPlt(a))
    }

    /// Rewrites degenerate constructors (`FracDiff(i, i)` and friends).
    pub fn canonical(self) -> Result<PltTerm, PltError> {
        PltTerm::from_affine(self.affine())
    }

    /// Additive inverse; fails only for `One`.
    pub fn negate(self) -> Result<PltTerm, PltError> {
        PltTerm::from_affine(self.affine().negate())
    }

    pub fn eval(self, fracs: &[Q]) -> Q {
        self.affine().eval(fracs)
    }

    /// Parameters mentioned by the term.
    pub fn params(self) -> impl Iterator<Item = ParamId> {
        use PltTerm::*;
        let (a, b) = match self {
            Zero | One => (None, None),
            Frac(i) | OneMinusFrac(i) | NegFrac(i) | FracMinusOne(i) => (Some(i), None),
            FracDiff(i, j) | FracDiffPlusOne(i, j) | FracDiffMinusOne(i, j) => (Some(i), Some(j)),
        };
        a.into_iter().chain(b)
    }

    /// Renders with the given parameter names (`p1`, `p2`, ... when absent).
    pub fn display<'a>(self, names: Option<&'a [String]>) -> TermDisplay<'a> {
        TermDisplay { term: self, names }
    }
}

/// Every canonical term over `m` parameters.
pub fn all_terms(m: usize) -> Vec<PltTerm> {
    use PltTerm::*;
    let mut out = vec![Zero, One];
    for i in 0..m {
        out.extend([Frac(i), OneMinusFrac(i), NegFrac(i), FracMinusOne(i)]);
    }
    for i in 0..m {
        for j in 0..m {
            if i != j {
                out.extend([FracDiff(i, j), FracDiffPlusOne(i, j), FracDiffMinusOne(i, j)]);
            }
        }
    }
    out
}

pub struct TermDisplay<'a> {
    term: PltTerm,
    names: Option<&'a [String]>,
}

impl TermDisplay<'_> {
    fn name(&self, p: ParamId) -> String {
        match self.names.and_then(|n| n.get(p)) {
            Some(n) => format!("frac({n})"),
            None => format!("frac(p{})", p + 1),
        }
    }
}

impl fmt::Display for TermDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use PltTerm::*;
        match self.term {
            Zero => write!(f, "0"),
            One => write!(f, "1"),
            Frac(i) => write!(f, "{}", self.name(i)),
            OneMinusFrac(i) => write!(f, "1 - {}", self.name(i)),
            NegFrac(i) => write!(f, "-{}", self.name(i)),
            FracMinusOne(i) => write!(f, "{} - 1", self.name(i)),
            FracDiff(i, j) => write!(f, "{} - {}", self.name(i), self.name(j)),
            FracDiffPlusOne(j, i) => write!(f, "{} + 1 - {}", self.name(j), self.name(i)),
            FracDiffMinusOne(i, j) => write!(f, "{} - 1 - {}", self.name(i), self.name(j)),
        }
    }
}

impl fmt::Display for PltTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.display(None).fmt(f)
    }
}

/// A pair `(d, ⊲)` standing for the constraint `· ⊲ d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bound {
    pub term: PltTerm,
    pub flag: CmpFlag,
}

impl Bound {
    pub const ZERO_LE: Bound = Bound { term: PltTerm::Zero, flag: CmpFlag::Le };
    pub const ZERO_LT: Bound = Bound { term: PltTerm::Zero, flag: CmpFlag::Lt };
    pub const ONE_LT: Bound = Bound { term: PltTerm::One, flag: CmpFlag::Lt };
    pub const ONE_LE: Bound = Bound { term: PltTerm::One, flag: CmpFlag::Le };

    pub fn new(term: PltTerm, flag: CmpFlag) -> Self {
        Bound { term, flag }
    }

    pub fn le(term: PltTerm) -> Self {
        Bound::new(term, CmpFlag::Le)
    }

    pub fn lt(term: PltTerm) -> Self {
        Bound::new(term, CmpFlag::Lt)
    }

    /// Value of the bound at the given fractional parts.
    pub fn at(&self, fracs: &[Q]) -> Valued {
        Valued { value: self.term.eval(fracs), flag: self.flag }
    }

    pub fn display<'a>(&self, names: Option<&'a [String]>) -> BoundDisplay<'a> {
        BoundDisplay { bound: *self, names }
    }
}

/// Sum of two bounds; fails when the resulting term leaves PLT.
pub fn bound_add(a: Bound, b: Bound) -> Result<Bound, PltError> {
    let term = PltTerm::from_affine(a.term.affine() + b.term.affine())?;
    Ok(Bound::new(term, a.flag.combine(b.flag)))
}

/// A constant offset `(-1 | 0 | +1, ⊲)` that may only appear as the second
/// argument of an addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shift {
    pub delta: i8,
    pub flag: CmpFlag,
}

impl Shift {
    pub const MINUS_ONE_LE: Shift = Shift { delta: -1, flag: CmpFlag::Le };
    pub const ONE_LE: Shift = Shift { delta: 1, flag: CmpFlag::Le };
    pub const ONE_LT: Shift = Shift { delta: 1, flag: CmpFlag::Lt };
    pub const ZERO_LT: Shift = Shift { delta: 0, flag: CmpFlag::Lt };
}

/// Adds a constant shift to a bound.
pub fn bound_shift(a: Bound, s: Shift) -> Result<Bound, PltError> {
    let term = PltTerm::from_affine(a.term.affine() + Affine::constant(s.delta as i32))?;
    Ok(Bound::new(term, a.flag.combine(s.flag)))
}

pub struct BoundDisplay<'a> {
    bound: Bound,
    names: Option<&'a [String]>,
}

impl fmt::Display for BoundDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.bound.term.display(self.names), self.bound.flag.symbol())
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.display(None).fmt(f)
    }
}

/// A bound evaluated at a valuation. Ordered by value, then `<` before `≤`,
/// which is the order used by the validity relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Valued {
    pub value: Q,
    pub flag: CmpFlag,
}

impl Valued {
    pub fn new(value: Q, flag: CmpFlag) -> Self {
        Valued { value, flag }
    }

    /// Whether `self rel other` holds: for `Lt` this is strict precedence in
    /// the bound order, for `Le` precedence or equality.
    pub fn holds(&self, rel: CmpFlag, other: &Valued) -> bool {
        match rel {
            CmpFlag::Lt => self < other,
            CmpFlag::Le => self <= other,
        }
    }

    pub fn is_zero_le(&self) -> bool {
        self.value.is_zero() && self.flag == CmpFlag::Le
    }
}

impl std::ops::Add for Valued {
    type Output = Valued;

    fn add(self, rhs: Valued) -> Valued {
        Valued::new(self.value + rhs.value, self.flag.combine(rhs.flag))
    }
}

impl PartialOrd for Valued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Valued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.cmp(&other.value).then(self.flag.cmp(&other.flag))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PltTerm::*;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    #[test]
    fn canonical_collapses_degenerate_differences() {
        assert_eq!(FracDiff(0, 0).canonical().unwrap(), Zero);
        assert_eq!(FracDiffPlusOne(1, 1).canonical().unwrap(), One);
        assert!(FracDiffMinusOne(1, 1).canonical().is_err());
        assert_eq!(FracDiff(0, 1).canonical().unwrap(), FracDiff(0, 1));
    }

    #[test]
    fn negation_is_closed_except_for_one() {
        for t in all_terms(3) {
            if t == One {
                assert!(t.negate().is_err());
                continue;
            }
            let n = t.negate().unwrap();
            assert_eq!(n.negate().unwrap(), t);
        }
        assert_eq!(FracDiffPlusOne(1, 0).negate().unwrap(), FracDiffMinusOne(0, 1));
    }

    #[test]
    fn additions_from_the_algorithms() {
        let b = bound_add(Bound::le(FracDiff(1, 0)), Bound::ONE_LT).unwrap();
        assert_eq!(b, Bound::lt(FracDiffPlusOne(1, 0)));
        let b = bound_add(Bound::lt(FracDiffMinusOne(0, 1)), Bound::ONE_LT).unwrap();
        assert_eq!(b, Bound::lt(FracDiff(0, 1)));
        let b = bound_shift(Bound::lt(FracDiffPlusOne(1, 0)), Shift::MINUS_ONE_LE).unwrap();
        assert_eq!(b, Bound::lt(FracDiff(1, 0)));
        assert!(bound_add(Bound::le(Frac(0)), Bound::le(Frac(1))).is_err());
        assert!(bound_shift(Bound::le(One), Shift::ONE_LE).is_err());
    }

    #[test]
    fn eval_matches_definitions() {
        let f = [q(3, 4), q(1, 4)];
        assert_eq!(FracDiffPlusOne(1, 0).eval(&f), q(1, 2));
        assert_eq!(FracDiffMinusOne(0, 1).eval(&f), q(-1, 2));
        assert_eq!(OneMinusFrac(0).eval(&f), q(1, 4));
        assert_eq!(FracMinusOne(1).eval(&f), q(-3, 4));
    }

    #[test]
    fn valued_order_puts_strict_first() {
        let a = Valued::new(q(1, 2), CmpFlag::Lt);
        let b = Valued::new(q(1, 2), CmpFlag::Le);
        assert!(a.holds(CmpFlag::Lt, &b));
        assert!(!b.holds(CmpFlag::Lt, &a));
        assert!(a.holds(CmpFlag::Le, &a));
        assert!(!b.holds(CmpFlag::Le, &a));
    }

    #[test]
    fn display_uses_names() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert_eq!(FracDiffPlusOne(1, 0).display(Some(&names)).to_string(), "frac(b) + 1 - frac(a)");
        assert_eq!(Bound::lt(NegFrac(1)).to_string(), "(-frac(p2), <)");
    }
}
