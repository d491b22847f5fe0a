#![allow(dead_code)]

use std::collections::BTreeMap;

use fbsde_core::model::{builtin_problem, ProblemSpec};

pub fn builtin(name: &str) -> ProblemSpec {
    builtin_problem(name, &BTreeMap::new()).unwrap()
}

pub fn builtin_with(name: &str, params: &[(&str, f64)]) -> ProblemSpec {
    let map: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    builtin_problem(name, &map).unwrap()
}

/// Root of an increasing function on `[lo, hi]` by bisection to `tol`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    assert!(f(lo) <= 0.0 && f(hi) >= 0.0, "bracket does not straddle the root");
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
