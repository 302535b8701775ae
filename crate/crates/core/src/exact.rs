//! Exact discrepancy of the progression family of Z_n at small n, by
//! exhaustive enumeration or branch and bound over bitmask colorings.

use serde::{Deserialize, Serialize};

use crate::ap::{ap_masks, class_sums, max_ap_discrepancy, Coloring, ModAp};
use crate::error::{Error, Result};
use crate::ntheory::ZnContext;

pub const EXHAUSTIVE_LIMIT: u64 = 16;
pub const BRANCH_AND_BOUND_LIMIT: u64 = 22;
pub const HERDISC_LIMIT: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exhaustive,
    BranchAndBound,
}

impl Method {
    pub fn default_limit(self) -> u64 {
        match self {
            Method::Exhaustive => EXHAUSTIVE_LIMIT,
            Method::BranchAndBound => BRANCH_AND_BOUND_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub n: u64,
    pub value: u64,
    pub optimal_coloring: Coloring,
    pub nodes_explored: u64,
    pub method: Method,
}

/// Progressions with at least two elements, restricted to `universe`, as
/// deduplicated masks, plus for each element the masks containing it.
struct MaskFamily {
    masks: Vec<u64>,
    incidence: Vec<Vec<u32>>,
}

impl MaskFamily {
    fn new(n: u64, universe: u64) -> Self {
        let mut masks: Vec<u64> = ap_masks(n)
            .into_iter()
            .map(|m| m & universe)
            .filter(|m| m.count_ones() >= 2)
            .collect();
        masks.sort_unstable();
        masks.dedup();
        let mut incidence = vec![Vec::new(); n as usize];
        for (i, &m) in masks.iter().enumerate() {
            for (x, inc) in incidence.iter_mut().enumerate() {
                if m >> x & 1 == 1 {
                    inc.push(i as u32);
                }
            }
        }
        Self { masks, incidence }
    }

    /// `max_A |chi(A)|` for the coloring with plus-set `plus`, stopping as
    /// soon as `cutoff` is reached.
    fn eval(&self, plus: u64, cutoff: u64) -> u64 {
        let mut worst = 0;
        for &m in &self.masks {
            let p = (m & plus).count_ones() as i64;
            let v = (2 * p - m.count_ones() as i64).unsigned_abs();
            if v > worst {
                worst = v;
                if worst >= cutoff {
                    break;
                }
            }
        }
        worst
    }
}

fn check_limit(n: u64, limit: u64) -> Result<()> {
    if n > limit || n > 63 {
        return Err(Error::LimitExceeded { n, limit: limit.min(63) });
    }
    Ok(())
}

fn coloring_from_plus(n: u64, plus: u64) -> Coloring {
    Coloring::new((0..n).map(|x| if plus >> x & 1 == 1 { 1 } else { -1 }).collect())
        .expect("±1 values")
}

/// Singletons force every value to be at least 1.
fn floor_value(value: u64) -> u64 {
    value.max(1)
}

fn exhaustive_range(fam: &MaskFamily, lo: u64, hi: u64) -> (u64, u64) {
    let mut best = (u64::MAX, 0u64);
    for c in lo..hi {
        // element 0 is fixed to +1
        let plus = c << 1 | 1;
        let v = fam.eval(plus, best.0);
        if v < best.0 {
            best = (v, plus);
            if v <= 1 {
                break;
            }
        }
    }
    best
}

fn exhaustive(n: u64, workers: usize) -> (u64, u64, u64) {
    let fam = MaskFamily::new(n, (1u64 << n) - 1);
    let total = 1u64 << (n - 1);
    if workers <= 1 || total < 1024 {
        let (v, plus) = exhaustive_range(&fam, 0, total);
        return (v, plus, total);
    }
    let chunks = workers as u64 * 4;
    let width = total.div_ceil(chunks);
    let next = std::sync::atomic::AtomicU64::new(0);
    let results = std::sync::Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let c = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if c >= chunks {
                    break;
                }
                let lo = (c * width).min(total);
                let hi = ((c + 1) * width).min(total);
                let r = exhaustive_range(&fam, lo, hi);
                results.lock().unwrap().push((c, r));
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_unstable_by_key(|&(c, _)| c);
    // lowest value, then lowest chunk: same answer as the sequential scan
    let (v, plus) = results
        .into_iter()
        .map(|(_, r)| r)
        .fold((u64::MAX, 0), |b, r| if r.0 < b.0 { r } else { b });
    (v, plus, total)
}

struct Search<'a> {
    fam: &'a MaskFamily,
    elems: Vec<u32>,
    sums: Vec<i32>,
    remaining: Vec<i32>,
    nodes: u64,
}

impl<'a> Search<'a> {
    fn new(fam: &'a MaskFamily, universe: u64) -> Self {
        let elems: Vec<u32> = (0..64).filter(|&x| universe >> x & 1 == 1).collect();
        let remaining = fam.masks.iter().map(|m| m.count_ones() as i32).collect();
        Self { fam, elems, sums: vec![0; fam.masks.len()], remaining, nodes: 0 }
    }

    /// Assign `sigma` to element `x`; returns the largest forced final
    /// `|sum|` among the touched progressions.
    fn assign(&mut self, x: u32, sigma: i32) -> i32 {
        let mut forced = 0;
        for &a in &self.fam.incidence[x as usize] {
            let a = a as usize;
            self.sums[a] += sigma;
            self.remaining[a] -= 1;
            forced = forced.max(self.sums[a].abs() - self.remaining[a]);
        }
        forced
    }

    fn unassign(&mut self, x: u32, sigma: i32) {
        for &a in &self.fam.incidence[x as usize] {
            self.sums[a as usize] -= sigma;
            self.remaining[a as usize] += 1;
        }
    }

    fn preferred_sign(&self, x: u32) -> i32 {
        let pull: i64 = self.fam.incidence[x as usize].iter().map(|&a| self.sums[a as usize] as i64).sum();
        if pull > 0 {
            -1
        } else {
            1
        }
    }

    /// Lower the incumbent `(value, plus)` below its current value if possible.
    fn improve(&mut self, depth: usize, plus: u64, best: &mut (u64, u64)) {
        self.nodes += 1;
        if depth == self.elems.len() {
            let v = floor_value(self.sums.iter().map(|s| s.unsigned_abs() as u64).max().unwrap_or(0));
            if v < best.0 {
                *best = (v, plus);
            }
            return;
        }
        let x = self.elems[depth];
        let first = if depth == 0 { 1 } else { self.preferred_sign(x) };
        let signs: &[i32] = if depth == 0 { &[1] } else { &[first, -first] };
        for &sigma in signs {
            if best.0 <= 1 {
                return;
            }
            let forced = self.assign(x, sigma);
            if (forced as i64) < best.0 as i64 {
                let p = if sigma > 0 { plus | 1 << x } else { plus };
                self.improve(depth + 1, p, best);
            }
            self.unassign(x, sigma);
        }
    }

    /// A coloring whose every progression sum is at most `t`, if one exists.
    fn feasible(&mut self, depth: usize, plus: u64, t: i32) -> Option<u64> {
        self.nodes += 1;
        if depth == self.elems.len() {
            return Some(plus);
        }
        let x = self.elems[depth];
        let first = if depth == 0 { 1 } else { self.preferred_sign(x) };
        let signs: &[i32] = if depth == 0 { &[1] } else { &[first, -first] };
        for &sigma in signs {
            let forced = self.assign(x, sigma);
            let found = if forced <= t {
                let p = if sigma > 0 { plus | 1 << x } else { plus };
                self.feasible(depth + 1, p, t)
            } else {
                None
            };
            self.unassign(x, sigma);
            if found.is_some() {
                return found;
            }
        }
        None
    }
}

/// `disc = min over ±1 colorings of max over progressions of |chi(A)|`.
/// `limit` defaults to the method's limit.
pub fn exact_disc(ctx: &ZnContext, method: Method, limit: Option<u64>, workers: usize) -> Result<ExactResult> {
    let n = ctx.n();
    check_limit(n, limit.unwrap_or(method.default_limit()))?;
    let (value, plus, nodes) = match method {
        Method::Exhaustive => exhaustive(n, workers),
        Method::BranchAndBound => {
            let universe = (1u64 << n) - 1;
            let fam = MaskFamily::new(n, universe);
            let mut search = Search::new(&fam, universe);
            // all +1 is a valid starting incumbent
            let mut best = (n + 1, universe);
            search.improve(0, 0, &mut best);
            (best.0, best.1, search.nodes)
        }
    };
    let value = floor_value(value);
    let optimal_coloring = coloring_from_plus(n, plus);
    debug_assert_eq!(max_ap_discrepancy(&optimal_coloring).value, value);
    Ok(ExactResult { n, value, optimal_coloring, nodes_explored: nodes, method })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HerdiscResult {
    pub n: u64,
    pub value: u64,
    pub subset: Vec<u64>,
    pub subsets_searched: u64,
    pub nodes_explored: u64,
}

/// Exact restricted discrepancy `min_chi max_A |chi(A ∩ X)|` of `X`.
pub fn exact_restricted_disc(n: u64, x: &[u64], limit: Option<u64>) -> Result<(u64, Coloring)> {
    check_limit(n, limit.unwrap_or(BRANCH_AND_BOUND_LIMIT))?;
    if x.is_empty() {
        return Err(Error::InvalidRequest("X must be nonempty".into()));
    }
    let mut universe = 0u64;
    for &v in x {
        if v >= n {
            return Err(Error::ElementOutOfRange { x: v, n });
        }
        universe |= 1 << v;
    }
    let fam = MaskFamily::new(n, universe);
    let mut search = Search::new(&fam, universe);
    let mut t = 1;
    loop {
        if let Some(plus) = search.feasible(0, 0, t) {
            let mut chi = Coloring::empty(n);
            for &v in x {
                chi.set(v, if plus >> v & 1 == 1 { 1 } else { -1 });
            }
            return Ok((t as u64, chi));
        }
        t += 1;
    }
}

/// `herdisc = max over X ⊆ Z_n of the restricted discrepancy of X`.
pub fn exact_herdisc(ctx: &ZnContext, limit: Option<u64>) -> Result<HerdiscResult> {
    let n = ctx.n();
    check_limit(n, limit.unwrap_or(HERDISC_LIMIT))?;
    let full = (1u64 << n) - 1;
    let base = exact_disc(ctx, Method::BranchAndBound, Some(n), 1)?;
    let mut best = (base.value, full);
    let mut nodes = base.nodes_explored;
    for universe in 1..full {
        // disc(X) > best iff no coloring reaches best
        let fam = MaskFamily::new(n, universe);
        let mut search = Search::new(&fam, universe);
        let mut t = best.0 as i32;
        while search.feasible(0, 0, t).is_none() {
            t += 1;
        }
        nodes += search.nodes;
        if t as u64 > best.0 {
            best = (t as u64, universe);
        }
    }
    Ok(HerdiscResult {
        n,
        value: best.0,
        subset: (0..n).filter(|&x| best.1 >> x & 1 == 1).collect(),
        subsets_searched: full,
        nodes_explored: nodes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorMax {
    pub r: u64,
    pub max: u64,
}

/// Summary of a full coloring: AP discrepancy with a witness, congruence
/// class maxima per divisor, and the total sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub n: u64,
    pub t: u64,
    pub witness: ModAp,
    pub congruence: Vec<DivisorMax>,
    pub congruence_max: u64,
    pub sum: i64,
}

pub fn measure(chi: &Coloring, workers: usize) -> Measurement {
    let n = chi.n();
    let ap = if workers > 1 {
        crate::ap::max_ap_discrepancy_par(chi, workers)
    } else {
        max_ap_discrepancy(chi)
    };
    let congruence: Vec<DivisorMax> = crate::ntheory::divisors(n)
        .into_iter()
        .map(|r| DivisorMax {
            r,
            max: class_sums(chi, r).expect("divisor").iter().map(|s| s.unsigned_abs()).max().unwrap_or(0),
        })
        .collect();
    let congruence_max = congruence.iter().map(|d| d.max).max().unwrap_or(0);
    Measurement { n, t: ap.value, witness: ap.witness, congruence, congruence_max, sum: chi.total() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(n: u64, method: Method) -> u64 {
        exact_disc(&ZnContext::new(n).unwrap(), method, None, 1).unwrap().value
    }

    /// Plain enumeration of all 2^n colorings against the linear-time scan.
    fn brute(n: u64) -> u64 {
        (0..1u64 << n)
            .map(|plus| max_ap_discrepancy(&coloring_from_plus(n, plus)).value)
            .min()
            .unwrap()
    }

    #[test]
    fn small_values() {
        assert_eq!(disc(1, Method::Exhaustive), 1);
        assert_eq!(disc(3, Method::Exhaustive), 2);
        assert_eq!(disc(4, Method::Exhaustive), 2);
        assert_eq!(disc(1, Method::BranchAndBound), 1);
        assert_eq!(disc(3, Method::BranchAndBound), 2);
        assert_eq!(disc(4, Method::BranchAndBound), 2);
    }

    #[test]
    fn methods_match_brute_force() {
        for n in 1..=10 {
            let b = brute(n);
            for method in [Method::Exhaustive, Method::BranchAndBound] {
                let r = exact_disc(&ZnContext::new(n).unwrap(), method, None, 1).unwrap();
                assert_eq!(r.value, b, "n={n} {method:?}");
                assert_eq!(max_ap_discrepancy(&r.optimal_coloring).value, b);
                assert_eq!(r.optimal_coloring.get(0), 1);
            }
        }
    }

    #[test]
    fn parallel_exhaustive_agrees() {
        let ctx = ZnContext::new(13).unwrap();
        let a = exact_disc(&ctx, Method::Exhaustive, None, 1).unwrap();
        let b = exact_disc(&ctx, Method::Exhaustive, None, 4).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.optimal_coloring, b.optimal_coloring);
    }

    #[test]
    fn limits_enforced() {
        let ctx = ZnContext::new(17).unwrap();
        assert!(matches!(
            exact_disc(&ctx, Method::Exhaustive, None, 1),
            Err(Error::LimitExceeded { n: 17, limit: 16 })
        ));
        assert!(exact_herdisc(&ZnContext::new(13).unwrap(), None).is_err());
    }

    #[test]
    fn restricted_matches_enumeration() {
        for n in 1..=8u64 {
            for universe in 1..(1u64 << n) {
                let x: Vec<u64> = (0..n).filter(|&v| universe >> v & 1 == 1).collect();
                let (v, chi) = exact_restricted_disc(n, &x, None).unwrap();
                let masks: Vec<u64> = ap_masks(n).into_iter().map(|m| m & universe).collect();
                let mut best = u64::MAX;
                for plus in 0..(1u64 << n) {
                    if plus & !universe != 0 {
                        continue;
                    }
                    let w = masks
                        .iter()
                        .map(|&m| (2 * (m & plus).count_ones() as i64 - m.count_ones() as i64).unsigned_abs())
                        .max()
                        .unwrap();
                    best = best.min(w);
                }
                assert_eq!(v, best, "n={n} X={x:?}");
                assert_eq!(chi.support(), x);
            }
        }
    }

    #[test]
    fn herdisc_small() {
        let h1 = exact_herdisc(&ZnContext::new(1).unwrap(), None).unwrap();
        assert_eq!(h1.value, 1);
        for n in 2..=7u64 {
            let ctx = ZnContext::new(n).unwrap();
            let h = exact_herdisc(&ctx, None).unwrap();
            assert!(h.value >= disc(n, Method::Exhaustive));
            let (v, _) = exact_restricted_disc(n, &h.subset, None).unwrap();
            assert_eq!(v, h.value);
            // brute force maximum over every subset
            let mut brute_max = 0;
            for universe in 1..(1u64 << n) {
                let x: Vec<u64> = (0..n).filter(|&v| universe >> v & 1 == 1).collect();
                brute_max = brute_max.max(exact_restricted_disc(n, &x, None).unwrap().0);
            }
            assert_eq!(h.value, brute_max, "n={n}");
        }
    }

    #[test]
    fn measure_examples() {
        let m = measure(&Coloring::constant(4, 1), 1);
        assert_eq!((m.t, m.congruence_max, m.sum), (4, 4, 4));
        let m = measure(&Coloring::new(vec![1, -1]).unwrap(), 1);
        assert_eq!((m.t, m.congruence_max, m.sum), (1, 1, 0));
        assert_eq!(m.congruence, vec![DivisorMax { r: 1, max: 0 }, DivisorMax { r: 2, max: 1 }]);
    }
}
