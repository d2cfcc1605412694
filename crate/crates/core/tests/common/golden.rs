//! Matrices of the two-clock, two-parameter walkthrough: x := p2, y := p1
//! with equal integer parts and frac(p1) > frac(p2), then alternating time
//! elapses and a reset of y.

use pupta::param_region::{ParamBound, ParamRegion, RegionSpace};
use pupta::pdbm::{self, Kind, Pdbm, RegionCtx};
use pupta::plt::{all_terms, Bound, CmpFlag};
use pupta::Q;

pub const CAP: u32 = 3;

pub fn clock_names() -> Vec<String> {
    vec!["x".into(), "y".into()]
}

pub fn param_names() -> Vec<String> {
    vec!["p1".into(), "p2".into()]
}

/// A generic region with both integer parts 1 and frac(p1) > frac(p2).
pub fn region() -> ParamRegion {
    let space = RegionSpace::new(&[ParamBound::new(0, 2), ParamBound::new(0, 2)]).unwrap();
    space.region_of(&[Q::new(31, 20), Q::new(23, 20)]).unwrap()
}

pub fn load(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}.txt", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

/// Reads a matrix back from its dump.
pub fn parse(text: &str, kind: Kind) -> Pdbm {
    let names = param_names();
    let table: Vec<(String, pupta::plt::PltTerm)> =
        all_terms(2).into_iter().map(|t| (t.display(Some(&names)).to_string(), t)).collect();
    let mut lines = text.lines();
    let e = lines.next().unwrap().trim_start_matches("E = (").trim_end_matches(')');
    let ints: Vec<u32> = e.split(", ").map(|x| x.parse().unwrap()).collect();
    let rows = lines
        .map(|l| {
            let (_, cells) = l.split_once(": ").unwrap();
            cells
                .split("  ")
                .map(|c| {
                    let inner = c.trim_start_matches('(').trim_end_matches(')');
                    let (term, flag) = inner.rsplit_once(", ").unwrap();
                    let term = table.iter().find(|(s, _)| s == term).unwrap_or_else(|| panic!("term {term}")).1;
                    let flag = if flag == "<" { CmpFlag::Lt } else { CmpFlag::Le };
                    Bound::new(term, flag)
                })
                .collect()
        })
        .collect();
    Pdbm::from_parts(ints, rows, CAP, kind)
}

pub fn dump(p: &Pdbm) -> String {
    p.dump(&clock_names(), Some(&param_names()))
}

/// Each case: name, produced dump, expected dump.
pub fn cases() -> Vec<(&'static str, String, String)> {
    let r = region();
    let ctx = RegionCtx::new(&r);
    let mut out = Vec::new();
    let point = pdbm::update_param(&[1, 0], CAP, &ctx).unwrap();
    out.push(("parametric update", dump(&point), load("point_after_param_update")));
    let center = pdbm::te_lt(&point, &ctx).unwrap();
    out.push(("first elapse from the point", dump(&center), load("center_after_first_elapse")));
    let reset = pdbm::update_np(&center, &[(1, 1)], &ctx);
    out.push(("reset of y", dump(&reset), load("border_after_reset")));
    let border = parse(&load("border_after_reset"), Kind::Open);
    out.push(("elapse from the border", dump(&pdbm::te_lt(&border, &ctx).unwrap()), load("center_after_reset")));
    let center2 = parse(&load("center_after_reset"), Kind::Open);
    out.push(("elapse to the next integer", dump(&pdbm::te_eq(&center2, &ctx).unwrap()), load("border_after_wrap")));
    let chained = pdbm::te_eq(&pdbm::te_lt(&reset, &ctx).unwrap(), &ctx).unwrap();
    out.push(("chained walkthrough", dump(&chained), load("border_after_wrap")));
    out
}
