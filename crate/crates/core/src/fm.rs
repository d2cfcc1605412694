//! Fourier–Motzkin elimination over exact rationals with strict and non-strict
//! inequalities. Used for small systems (a handful of variables) only.

use std::collections::HashMap;

use num_traits::{Signed, Zero};

use crate::Q;

/// `coeffs · x + constant ⊲ 0` with `⊲` strict when `strict` is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Ineq {
    pub coeffs: Vec<Q>,
    pub constant: Q,
    pub strict: bool,
}

impl Ineq {
    pub fn new(coeffs: Vec<Q>, constant: Q, strict: bool) -> Self {
        Ineq { coeffs, constant, strict }
    }

    fn is_trivial(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    fn trivially_holds(&self) -> bool {
        if self.strict {
            self.constant < Q::zero()
        } else {
            self.constant <= Q::zero()
        }
    }

    /// Scales so the first non-zero coefficient has magnitude one.
    fn normalized(mut self) -> Self {
        if let Some(lead) = self.coeffs.iter().find(|c| !c.is_zero()).map(|c| c.abs()) {
            for c in &mut self.coeffs {
                *c /= lead;
            }
            self.constant /= lead;
        }
        self
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        self.coeffs.iter().zip(x).fold(self.constant, |acc, (c, v)| acc + *c * *v)
    }

    /// The complement `-(coeffs · x + constant) ⊲' 0`.
    pub fn negated(&self) -> Ineq {
        Ineq {
            coeffs: self.coeffs.iter().map(|c| -*c).collect(),
            constant: -self.constant,
            strict: !self.strict,
        }
    }

    pub fn holds_at(&self, x: &[Q]) -> bool {
        let v = self.eval(x);
        if self.strict {
            v < Q::zero()
        } else {
            v <= Q::zero()
        }
    }
}

/// Keeps only the tightest inequality per direction; returns `None` when a
/// variable-free inequality is violated.
fn prune(cons: Vec<Ineq>) -> Option<Vec<Ineq>> {
    let mut best: HashMap<Vec<Q>, (Q, bool)> = HashMap::new();
    let mut order = Vec::new();
    for c in cons {
        if c.is_trivial() {
            if !c.trivially_holds() {
                return None;
            }
            continue;
        }
        let c = c.normalized();
        match best.get_mut(&c.coeffs) {
            Some(slot) => {
                if c.constant > slot.0 || (c.constant == slot.0 && c.strict) {
                    *slot = (c.constant, c.strict);
                }
            }
            None => {
                order.push(c.coeffs.clone());
                best.insert(c.coeffs, (c.constant, c.strict));
            }
        }
    }
    Some(
        order
            .into_iter()
            .map(|k| {
                let (constant, strict) = best[&k];
                Ineq { coeffs: k, constant, strict }
            })
            .collect(),
    )
}

pub(crate) fn eliminate(cons: &[Ineq], var: usize) -> Option<Vec<Ineq>> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut out = Vec::new();
    for c in cons {
        let a = c.coeffs[var];
        if a.is_zero() {
            out.push(c.clone());
        } else if a.is_positive() {
            pos.push(c);
        } else {
            neg.push(c);
        }
    }
    for p in &pos {
        for n in &neg {
            let ap = p.coeffs[var];
            let an = -n.coeffs[var];
            let coeffs = p.coeffs.iter().zip(&n.coeffs).map(|(x, y)| *x / ap + *y / an).collect();
            out.push(Ineq {
                coeffs,
                constant: p.constant / ap + n.constant / an,
                strict: p.strict || n.strict,
            });
        }
    }
    prune(out)
}

/// Finds a point satisfying every inequality over `n` variables, choosing
/// interval midpoints variable by variable. Returns `None` if infeasible.
pub(crate) fn solve(n: usize, cons: &[Ineq]) -> Option<Vec<Q>> {
    solve_with(n, cons, |lo, hi| match (lo, hi) {
        (None, None) => Q::zero(),
        (Some((l, s)), None) => if s { l + Q::from_integer(1) } else { l },
        (None, Some((h, s))) => if s { h - Q::from_integer(1) } else { h },
        (Some((l, _)), Some((h, _))) => (l + h) / Q::from_integer(2),
    })
}

/// Interval end: value and whether it is excluded.
pub(crate) type End = Option<(Q, bool)>;

/// Like [`solve`], with `pick` choosing a value inside each non-degenerate
/// interval. `pick` must return a point satisfying both ends.
pub(crate) fn solve_with(n: usize, cons: &[Ineq], mut pick: impl FnMut(End, End) -> Q) -> Option<Vec<Q>> {
    let mut levels = Vec::with_capacity(n + 1);
    levels.push(prune(cons.to_vec())?);
    for var in (0..n).rev() {
        let next = eliminate(levels.last().unwrap(), var)?;
        levels.push(next);
    }
    // levels[k] constrains variables 0..n-k.
    let mut x = vec![Q::zero(); n];
    for var in 0..n {
        let sys = &levels[n - 1 - var];
        let mut lo: End = None;
        let mut hi: End = None;
        for c in sys {
            let a = c.coeffs[var];
            if a.is_zero() {
                continue;
            }
            let rest = c
                .coeffs
                .iter()
                .enumerate()
                .take(var)
                .fold(c.constant, |acc, (k, ck)| acc + *ck * x[k]);
            let v = -rest / a;
            if a.is_positive() {
                if hi.is_none_or(|(h, s)| v < h || (v == h && c.strict && !s)) {
                    hi = Some((v, c.strict));
                }
            } else if lo.is_none_or(|(l, s)| v > l || (v == l && c.strict && !s)) {
                lo = Some((v, c.strict));
            }
        }
        x[var] = match (lo, hi) {
            (Some((l, ls)), Some((h, hs))) if l >= h => {
                if l > h || ls || hs {
                    return None;
                }
                l
            }
            _ => pick(lo, hi),
        };
    }
    debug_assert!(cons.iter().all(|c| c.holds_at(&x)));
    Some(x)
}

pub(crate) fn feasible(n: usize, cons: &[Ineq]) -> bool {
    let mut sys = match prune(cons.to_vec()) {
        Some(s) => s,
        None => return false,
    };
    for var in (0..n).rev() {
        sys = match eliminate(&sys, var) {
            Some(s) => s,
            None => return false,
        };
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Q {
        Q::from_integer(n)
    }

    #[test]
    fn open_triangle_has_interior_point() {
        // 0 < x, 0 < y, x + y < 1
        let cons = vec![
            Ineq::new(vec![q(-1), q(0)], q(0), true),
            Ineq::new(vec![q(0), q(-1)], q(0), true),
            Ineq::new(vec![q(1), q(1)], q(-1), true),
        ];
        let x = solve(2, &cons).unwrap();
        assert!(cons.iter().all(|c| c.holds_at(&x)));
    }

    #[test]
    fn strict_contradiction_is_infeasible() {
        // x < 0 and x >= 0
        let cons = vec![Ineq::new(vec![q(1)], q(0), true), Ineq::new(vec![q(-1)], q(0), false)];
        assert!(!feasible(1, &cons));
        assert!(solve(1, &cons).is_none());
        // x <= 0 and x >= 0 has the single point 0
        let cons = vec![Ineq::new(vec![q(1)], q(0), false), Ineq::new(vec![q(-1)], q(0), false)];
        assert_eq!(solve(1, &cons).unwrap(), vec![q(0)]);
    }
}
