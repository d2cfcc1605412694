//! Explicit search over the classical clock-region graph of an instantiated
//! automaton. Independent of the zone engine; used as a second oracle.

use std::collections::{HashSet, VecDeque};

use num_traits::Zero;
use pupta::concrete::ConcreteTa;
use pupta::Q;

/// Canonical member of the clock region of `w`: clocks above `k` become
/// `k + 1`, the others keep their integer part and get fractional parts
/// `i / (n + 1)` by rank, zero staying zero.
fn canonical(w: &[Q], k: i64) -> Vec<Q> {
    let big = Q::from_integer(k + 1);
    let mut fracs: Vec<Q> = w.iter().filter(|x| **x <= Q::from_integer(k)).map(|x| x.fract()).filter(|f| !f.is_zero()).collect();
    fracs.sort();
    fracs.dedup();
    let n = fracs.len() as i64;
    w.iter()
        .map(|x| {
            if *x > Q::from_integer(k) {
                big
            } else {
                let f = x.fract();
                let rank = if f.is_zero() { 0 } else { fracs.iter().position(|g| *g == f).unwrap() as i64 + 1 };
                x.floor() + Q::new(rank, n + 1)
            }
        })
        .collect()
}

/// The next clock region reached by letting time pass, if any.
fn time_successor(w: &[Q], k: i64) -> Option<Vec<Q>> {
    let bound = Q::from_integer(k);
    let small: Vec<usize> = (0..w.len()).filter(|i| w[*i] <= bound).collect();
    if small.is_empty() {
        return None;
    }
    let any_zero = small.iter().any(|i| w[*i].fract().is_zero());
    let delay = if any_zero {
        // half the smallest positive fractional part, or 1/2
        let m = small
            .iter()
            .map(|i| w[*i].fract())
            .filter(|f| !f.is_zero())
            .map(|f| Q::from_integer(1) - f)
            .min()
            .unwrap_or(Q::from_integer(1));
        m / Q::from_integer(2)
    } else {
        let fmax = small.iter().map(|i| w[*i].fract()).max().unwrap();
        Q::from_integer(1) - fmax
    };
    let next: Vec<Q> = w.iter().enumerate().map(|(i, x)| if small.contains(&i) { *x + delay } else { *x }).collect();
    Some(canonical(&next, k))
}

pub fn reachable(ta: &ConcreteTa, goal: usize) -> bool {
    assert!(ta.stops.iter().all(|s| s.iter().all(|b| !b)), "region-graph oracle has no stopwatches");
    let k = ta.max_constant();
    let start = (ta.init, canonical(&vec![Q::zero(); ta.clocks], k));
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some((l, w)) = queue.pop_front() {
        if l == goal {
            return true;
        }
        let mut next = Vec::new();
        if let Some(t) = time_successor(&w, k) {
            next.push((l, t));
        }
        for e in ta.edges.iter().filter(|e| e.src == l) {
            if e.guard.iter().all(|(c, rel, v)| rel.holds(w[*c], Q::from_integer(*v))) {
                let mut u = w.clone();
                for (c, v) in &e.update {
                    u[*c] = Q::from_integer(*v);
                }
                next.push((e.dst, canonical(&u, k)));
            }
        }
        for s in next {
            if seen.insert(s.clone()) {
                queue.push_back(s);
            }
        }
    }
    false
}
