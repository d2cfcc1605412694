mod common;

use num_traits::Zero;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pupta::automaton::Value;
use pupta::frontend::{parse_model, print_model};
use pupta::param_region::{LinRel, LinearConstraint, ParamBound, RegionSpace};
use pupta::pdbm::{self, Pdbm, RegionCtx};
use pupta::plt::{all_terms, bound_add, Bound, CmpFlag};
use pupta::Q;

use common::gen::{self, Shape};

fn frac() -> impl Strategy<Value = Q> {
    (0i64..64).prop_map(|n| Q::new(n, 64))
}

fn bounds() -> impl Strategy<Value = Vec<ParamBound>> {
    // three parameters already give thousands of cells
    prop::collection::vec((0u32..2, 1u32..3), 1..=2)
        .prop_map(|v| v.into_iter().map(|(lo, w)| ParamBound::new(lo, lo + w)).collect())
}

/// A valuation inside `bounds` on a denominator-12 grid.
fn inside(bounds: &[ParamBound], picks: &[u32]) -> Vec<Q> {
    bounds
        .iter()
        .zip(picks)
        .map(|(b, k)| {
            let steps = (b.hi - b.lo) * 12;
            Q::from_integer(b.lo as i64) + Q::new((k % (steps + 1)) as i64, 12)
        })
        .collect()
}

fn satisfied(c: &LinearConstraint, v: &[Q]) -> bool {
    let lhs: Q = c.terms.iter().map(|(p, k)| *k * v[*p].fract()).sum();
    match c.rel {
        LinRel::Lt => lhs < c.rhs,
        LinRel::Le => lhs <= c.rhs,
        LinRel::Eq => lhs == c.rhs,
        LinRel::Ge => lhs >= c.rhs,
        LinRel::Gt => lhs > c.rhs,
    }
}

proptest! {
    #[test]
    fn bound_sums_evaluate_to_the_sum(
        i in 0usize..32, j in 0usize..32, fi in any::<bool>(), fj in any::<bool>(),
        f0 in frac(), f1 in frac(), f2 in frac(),
    ) {
        let terms = all_terms(3);
        let flag = |s: bool| if s { CmpFlag::Lt } else { CmpFlag::Le };
        let (a, b) = (Bound::new(terms[i], flag(fi)), Bound::new(terms[j], flag(fj)));
        let fracs = [f0, f1, f2];
        if let Ok(s) = bound_add(a, b) {
            prop_assert_eq!(s.term.eval(&fracs), a.term.eval(&fracs) + b.term.eval(&fracs));
            prop_assert_eq!(s.flag == CmpFlag::Lt, fi || fj);
        }
    }

    #[test]
    fn every_valuation_has_exactly_one_region(b in bounds(), picks in prop::collection::vec(any::<u32>(), 3)) {
        let space = RegionSpace::new(&b).unwrap();
        let v = inside(&b, &picks);
        let sig = space.signature_of(&v).unwrap();
        let regions = space.enumerate();
        let matching: Vec<_> = regions.iter().filter(|r| r.signature == sig).collect();
        prop_assert_eq!(matching.len(), 1);
        for c in space.constraints(matching[0]) {
            prop_assert!(satisfied(&c, &v), "{:?} violates {:?}", v, c);
        }
    }

    #[test]
    fn sampled_members_stay_in_their_region(b in bounds(), k in any::<usize>(), seed in any::<u64>()) {
        let space = RegionSpace::new(&b).unwrap();
        let regions = space.enumerate();
        let r = &regions[k % regions.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = space.sample_member(r, &mut rng);
        prop_assert_eq!(&space.signature_of(&v).unwrap(), &r.signature);
        prop_assert_eq!(&space.signature_of(&r.representative).unwrap(), &r.signature);
    }

    #[test]
    fn matrix_samples_are_members(
        b in bounds(), k in any::<usize>(), seed in any::<u64>(),
        targets in prop::collection::vec(0usize..3, 1..=3),
        resets in prop::collection::vec((0usize..3, 0u32..3), 0..3),
        elapses in 0usize..5,
    ) {
        let space = RegionSpace::new(&b).unwrap();
        let regions = space.enumerate();
        let r = &regions[k % regions.len()];
        let ctx = RegionCtx::new(r);
        let h = targets.len();
        let targets: Vec<usize> = targets.iter().map(|t| t % b.len()).collect();
        let mut p: Pdbm = pdbm::update_param(&targets, pdbm::UNCLAMPED, &ctx).unwrap();
        for _ in 0..elapses {
            p = pdbm::te(&p, &ctx).unwrap();
        }
        let resets: Vec<(usize, u32)> = resets.into_iter().filter(|(c, _)| *c < h).collect();
        if !resets.is_empty() {
            p = pdbm::update_np(&p, &resets, &ctx);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = pdbm::sample_member(&p, r.fracs(), &mut rng).expect("non-empty");
        prop_assert!(pdbm::membership(&w, &p, r.fracs()));
        if elapses == 0 && resets.is_empty() {
            let direct: Vec<Q> = targets.iter().map(|t| r.representative[*t]).collect();
            prop_assert_eq!(w, direct);
        }
    }

    #[test]
    fn decomposed_update_agrees_with_direct_update(
        ups in prop::collection::vec(prop_oneof![(0u32..3).prop_map(Value::Const), (0usize..2).prop_map(Value::Param)], 3),
        p0 in frac(), p1 in frac(),
    ) {
        let a = parse_model(
            "param a in [0, 1]; param b in [0, 1]; clock x, y, z; loc l; init l;
             edge l -> l do { x := a, y := 0, z := 0 };",
        ).unwrap().with_aux();
        let update: Vec<(usize, Value)> = ups.into_iter().enumerate().collect();
        let mut v = vec![p0, p1];
        if let Some(aux) = a.aux_param() {
            v.insert(aux, Q::zero());
        }
        let direct: Vec<Q> = update.iter().map(|(_, u)| u.eval(&v)).collect();
        let (stage, consts) = a.decompose_update(&update).unwrap();
        let mut w = match stage {
            Some(t) => t.iter().map(|p| v[*p]).collect(),
            None => vec![Q::from_integer(-1); 3],
        };
        for (c, k) in consts {
            w[c] = Q::from_integer(k as i64);
        }
        prop_assert_eq!(w, direct);
    }

    #[test]
    fn printed_models_parse_back(seed in any::<u64>(), stopwatch in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, _) = gen::model(Shape { stopwatch, ..Shape::default() }, &mut rng);
        let text = print_model(&a);
        let b = parse_model(&text).unwrap();
        prop_assert_eq!(print_model(&b), text);
        prop_assert_eq!(a.edges.len(), b.edges.len());
        prop_assert_eq!(a.locations, b.locations);
    }
}
