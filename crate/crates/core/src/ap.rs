//! Arithmetic progressions and congruence classes in Z_n, colorings, and
//! discrepancy evaluation against those set systems.

use std::collections::BTreeSet;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ntheory::{gcd, mod_inverse, ZnContext};

/// The segment `{a + k d : i <= k <= j}` of Z_n. `j = i - 1` encodes the
/// empty progression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModAp {
    pub a: u64,
    pub d: u64,
    pub i: i64,
    pub j: i64,
}

impl ModAp {
    pub fn new(a: u64, d: u64, i: i64, j: i64) -> Self {
        debug_assert!(j >= i - 1);
        Self { a, d, i, j }
    }

    /// `{a + k d : 0 <= k < len}`.
    pub fn full(a: u64, d: u64, len: u64) -> Self {
        Self::new(a, d, 0, len as i64 - 1)
    }

    pub fn len(&self) -> u64 {
        (self.j - self.i + 1).max(0) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements in index order; may repeat if the segment is longer than
    /// the orbit of `d`.
    pub fn elements(&self, n: u64) -> Vec<u64> {
        (self.i..=self.j)
            .map(|k| {
                let k = k.rem_euclid(n as i64) as u128;
                ((self.a as u128 + k * self.d as u128) % n as u128) as u64
            })
            .collect()
    }

    /// `i = 0` and the length fits in one orbit, so the elements are distinct.
    pub fn is_canonical_full(&self, n: u64) -> bool {
        self.i == 0 && self.a < n && self.d < n && self.len() <= n / gcd(n, self.d)
    }

    /// Member of the segment family C_1.
    pub fn is_c1_form(&self, n: u64) -> bool {
        if self.d == 0 || self.d >= n {
            return false;
        }
        let g = gcd(n, self.d);
        self.a < g && 0 <= self.i && self.i <= self.j && (self.j as u64) < n / g
    }
}

/// The congruence class `C(r, w) = {x in Z_n : x ≡ w (mod r)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongClass {
    pub r: u64,
    pub w: u64,
}

impl CongClass {
    pub fn new(ctx: &ZnContext, r: u64, w: u64) -> Result<Self> {
        if !ctx.divides(r) {
            return Err(Error::NotADivisor { r, n: ctx.n() });
        }
        if w >= r {
            return Err(Error::ElementOutOfRange { x: w, n: r });
        }
        Ok(Self { r, w })
    }

    pub fn elements(&self, n: u64) -> impl Iterator<Item = u64> {
        (self.w..n).step_by(self.r as usize)
    }
}

/// A map Z_n -> {-1, 0, +1}. Entries outside the colored set are 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coloring {
    values: Vec<i8>,
}

impl Coloring {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ZeroModulus);
        }
        if let Some(&v) = values.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::InvalidRequest(format!("coloring value {v} not in {{-1,0,1}}")));
        }
        Ok(Self { values })
    }

    /// All-zero partial coloring of Z_n.
    pub fn empty(n: u64) -> Self {
        Self { values: vec![0; n as usize] }
    }

    pub fn constant(n: u64, v: i8) -> Self {
        Self { values: vec![v; n as usize] }
    }

    pub fn n(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn get(&self, x: u64) -> i8 {
        self.values[x as usize]
    }

    pub fn set(&mut self, x: u64, v: i8) {
        debug_assert!((-1..=1).contains(&v));
        self.values[x as usize] = v;
    }

    pub fn is_full(&self) -> bool {
        self.values.iter().all(|&v| v != 0)
    }

    pub fn colored_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    pub fn support(&self) -> Vec<u64> {
        (0..self.n()).filter(|&x| self.get(x) != 0).collect()
    }

    /// chi(A) for an arbitrary list of elements.
    pub fn sum_over(&self, elems: impl IntoIterator<Item = u64>) -> i64 {
        elems.into_iter().map(|x| self.get(x) as i64).sum()
    }

    pub fn total(&self) -> i64 {
        self.values.iter().map(|&v| v as i64).sum()
    }

    pub fn negated(&self) -> Self {
        Self { values: self.values.iter().map(|&v| -v).collect() }
    }
}

/// `X_{d,a}(1 + (t-1) 2^i, t 2^i)`: the `t`-th aligned run of `2^i`
/// elements of `X ∩ A_{d,a}`, counted in ascending orbit index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicBlock {
    pub d: u64,
    pub a: u64,
    pub i: u32,
    pub t: u64,
}

impl DyadicBlock {
    pub fn size(&self) -> u64 {
        1 << self.i
    }

    /// Zero-based positions covered inside the ordered `X_{d,a}`.
    pub fn positions(&self) -> std::ops::Range<usize> {
        let s = self.size() as usize;
        (self.t as usize - 1) * s..self.t as usize * s
    }
}

/// Orbit index of `x` under step `d`: the unique `(a, k)` with
/// `x = a + k d`, `0 <= a < gcd(n, d)`, `0 <= k < n / gcd(n, d)`.
#[derive(Debug, Clone, Copy)]
pub struct OrbitMap {
    pub n: u64,
    pub d: u64,
    pub g: u64,
    pub len: u64,
    inv: u64,
}

impl OrbitMap {
    pub fn new(n: u64, d: u64) -> Self {
        assert!(d >= 1 && d < n, "orbit step must lie in [1, n)");
        let g = gcd(n, d);
        let len = n / g;
        let inv = mod_inverse((d / g) % len, len).expect("d/g is a unit mod n/g");
        Self { n, d, g, len, inv }
    }

    pub fn locate(&self, x: u64) -> (u64, u64) {
        let a = x % self.g;
        let q = x / self.g;
        let k = ((q as u128 * self.inv as u128) % self.len as u128) as u64;
        (a, k)
    }

    pub fn element(&self, a: u64, k: u64) -> u64 {
        ((a as u128 + k as u128 * self.d as u128) % self.n as u128) as u64
    }
}

/// `X_{d,a}` in ascending orbit index.
pub fn orbit_order(n: u64, x: &[u64], d: u64, a: u64) -> Vec<u64> {
    let map = OrbitMap::new(n, d);
    let mut ks: Vec<(u64, u64)> = x
        .iter()
        .filter_map(|&e| {
            let (ea, k) = map.locate(e);
            (ea == a).then_some((k, e))
        })
        .collect();
    ks.sort_unstable();
    ks.into_iter().map(|(_, e)| e).collect()
}

/// All distinct nonempty progressions of Z_n as sorted element lists.
pub fn enumerate_aps(ctx: &ZnContext) -> Vec<Vec<u64>> {
    let n = ctx.n();
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    for d in 0..n {
        let orbit = n / gcd(n, d);
        for a in 0..n {
            let mut elems = Vec::with_capacity(orbit as usize);
            for k in 0..orbit {
                elems.push((a + k * d) % n);
                let mut sorted = elems.clone();
                sorted.sort_unstable();
                seen.insert(sorted);
            }
        }
    }
    seen.into_iter().collect()
}

/// Distinct progressions of Z_n (`n <= 64`) as bitmasks.
pub fn ap_masks(n: u64) -> Vec<u64> {
    assert!((1..=64).contains(&n), "bitmask enumeration needs 1 <= n <= 64");
    let mut seen = BTreeSet::new();
    for d in 0..n {
        let orbit = n / gcd(n, d);
        for a in 0..n {
            let mut mask = 0u64;
            for k in 0..orbit {
                mask |= 1 << ((a + k * d) % n);
                seen.insert(mask);
            }
        }
    }
    seen.into_iter().collect()
}

/// `max_A |chi(A)|` over all progressions, with one attaining progression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApDiscrepancy {
    pub value: u64,
    pub witness: ModAp,
}

#[derive(Default)]
struct ArcScratch {
    seq: Vec<i64>,
    prefix: Vec<i64>,
    min_q: VecDeque<usize>,
    max_q: VecDeque<usize>,
}

/// Best arc over one cyclic orbit `seq` of length `len`: returns
/// `(|sum|, start, length)` of the first maximal arc of length `<= len`.
fn best_arc(s: &mut ArcScratch, len: usize) -> (u64, usize, usize) {
    s.prefix.clear();
    s.prefix.push(0);
    for t in 0..2 * len {
        let v = s.prefix[t] + s.seq[t % len];
        s.prefix.push(v);
    }
    s.min_q.clear();
    s.max_q.clear();
    let mut best = (0u64, 0usize, 0usize);
    for j in 1..=2 * len {
        let i_new = j - 1;
        while s.min_q.back().is_some_and(|&b| s.prefix[b] >= s.prefix[i_new]) {
            s.min_q.pop_back();
        }
        s.min_q.push_back(i_new);
        while s.max_q.back().is_some_and(|&b| s.prefix[b] <= s.prefix[i_new]) {
            s.max_q.pop_back();
        }
        s.max_q.push_back(i_new);
        let lo = j.saturating_sub(len);
        while s.min_q.front().is_some_and(|&f| f < lo) {
            s.min_q.pop_front();
        }
        while s.max_q.front().is_some_and(|&f| f < lo) {
            s.max_q.pop_front();
        }
        let pj = s.prefix[j];
        let imin = *s.min_q.front().unwrap();
        let imax = *s.max_q.front().unwrap();
        let up = pj - s.prefix[imin];
        if up > best.0 as i64 {
            best = (up as u64, imin, j - imin);
        }
        let down = s.prefix[imax] - pj;
        if down > best.0 as i64 {
            best = (down as u64, imax, j - imax);
        }
    }
    best
}

fn scan_steps(values: &[i8], steps: std::ops::Range<u64>) -> ApDiscrepancy {
    let n = values.len() as u64;
    let mut best = ApDiscrepancy { value: 0, witness: ModAp::full(0, 0, 0) };
    let mut scratch = ArcScratch::default();
    for d in steps {
        if d == 0 {
            for x in 0..n {
                let v = values[x as usize].unsigned_abs() as u64;
                if v > best.value {
                    best = ApDiscrepancy { value: v, witness: ModAp::full(x, 0, 1) };
                }
            }
            continue;
        }
        let g = gcd(n, d);
        let len = (n / g) as usize;
        for a in 0..g {
            scratch.seq.clear();
            let mut x = a;
            for _ in 0..len {
                scratch.seq.push(values[x as usize] as i64);
                x = (x + d) % n;
            }
            let (v, start, l) = best_arc(&mut scratch, len);
            if v > best.value {
                let first = (a + (start % len) as u64 * d) % n;
                best = ApDiscrepancy { value: v, witness: ModAp::full(first, d, l as u64) };
            }
        }
    }
    best
}

/// `T_chi = max over all progressions A of |chi(A)|`.
///
/// Steps `d` and `n - d` trace the same arcs in opposite directions, so only
/// `d in {0} ∪ [1, n/2]` is scanned. Each orbit of `d` is unrolled twice and
/// arcs of length up to the orbit length are maximized with monotone deques
/// over the prefix sums.
pub fn max_ap_discrepancy(chi: &Coloring) -> ApDiscrepancy {
    let n = chi.n();
    scan_steps(chi.values(), 0..n / 2 + 1)
}

/// Same result as [`max_ap_discrepancy`], with the step range split over
/// `workers` threads.
pub fn max_ap_discrepancy_par(chi: &Coloring, workers: usize) -> ApDiscrepancy {
    let n = chi.n();
    let hi = n / 2 + 1;
    if workers <= 1 || hi < 64 {
        return max_ap_discrepancy(chi);
    }
    // Chunk work is roughly uniform in d, so equal-width chunks suffice.
    let chunks = (workers * 4) as u64;
    let width = hi.div_ceil(chunks);
    let ranges: Vec<_> = (0..chunks)
        .map(|c| (c * width).min(hi)..((c + 1) * width).min(hi))
        .filter(|r| !r.is_empty())
        .collect();
    let slots: Vec<std::sync::Mutex<Option<ApDiscrepancy>>> =
        ranges.iter().map(|_| std::sync::Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if idx >= ranges.len() {
                    break;
                }
                let res = scan_steps(chi.values(), ranges[idx].clone());
                *slots[idx].lock().unwrap() = Some(res);
            });
        }
    });
    // First strict maximum in step order, matching the sequential scan.
    slots
        .into_iter()
        .map(|p| p.into_inner().unwrap().expect("every chunk evaluated"))
        .fold(None::<ApDiscrepancy>, |acc, r| match acc {
            Some(b) if b.value >= r.value => Some(b),
            _ => Some(r),
        })
        .unwrap()
}

/// `g_chi(w, r) = sum over x ≡ w (mod r) of chi(x)`.
pub fn congruence_sum(chi: &Coloring, r: u64, w: u64) -> Result<i64> {
    let n = chi.n();
    if r == 0 || !n.is_multiple_of(r) {
        return Err(Error::NotADivisor { r, n });
    }
    if w >= r {
        return Err(Error::ElementOutOfRange { x: w, n: r });
    }
    Ok(chi.sum_over(CongClass { r, w }.elements(n)))
}

/// All class sums `g_chi(w, r)` for `w in [0, r)`.
pub fn class_sums(chi: &Coloring, r: u64) -> Result<Vec<i64>> {
    let n = chi.n();
    if r == 0 || !n.is_multiple_of(r) {
        return Err(Error::NotADivisor { r, n });
    }
    let mut sums = vec![0i64; r as usize];
    for (x, &v) in chi.values().iter().enumerate() {
        sums[x % r as usize] += v as i64;
    }
    Ok(sums)
}

/// `G_chi(r) = sum_w g_chi(w, r)^2`, exact.
pub fn class_energy(chi: &Coloring, r: u64) -> Result<i64> {
    Ok(class_sums(chi, r)?.iter().map(|s| s * s).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongruenceDiscrepancy {
    pub value: u64,
    pub class: CongClass,
}

/// Max of `|g_chi(w, r)|` over divisors `r` of `n` and residues `w`.
/// `C(r', w) = C(gcd(r', n), w)`, so divisors cover every class.
pub fn max_congruence_discrepancy(chi: &Coloring) -> CongruenceDiscrepancy {
    let n = chi.n();
    let mut best = CongruenceDiscrepancy { value: 0, class: CongClass { r: 1, w: 0 } };
    let mut first = true;
    for r in crate::ntheory::divisors(n) {
        let sums = class_sums(chi, r).expect("divisor");
        for (w, s) in sums.into_iter().enumerate() {
            if first || s.unsigned_abs() > best.value {
                best = CongruenceDiscrepancy {
                    value: s.unsigned_abs(),
                    class: CongClass { r, w: w as u64 },
                };
                first = false;
            }
        }
    }
    best
}

/// Split a canonical progression into at most two disjoint C_1 segments.
pub fn decompose_to_c1(n: u64, ap: ModAp) -> Result<Vec<ModAp>> {
    if !ap.is_canonical_full(n) {
        return Err(Error::InvalidRequest(format!("{ap:?} is not a canonical progression of Z_{n}")));
    }
    let l = ap.len();
    if l == 0 {
        return Ok(vec![]);
    }
    if ap.d == 0 {
        return Ok(vec![ModAp::new(0, 1, ap.a as i64, ap.a as i64)]);
    }
    let map = OrbitMap::new(n, ap.d);
    let (a0, k) = map.locate(ap.a);
    let end = k + l - 1;
    if end < map.len {
        Ok(vec![ModAp::new(a0, ap.d, k as i64, end as i64)])
    } else {
        Ok(vec![
            ModAp::new(a0, ap.d, k as i64, map.len as i64 - 1),
            ModAp::new(a0, ap.d, 0, (end - map.len) as i64),
        ])
    }
}

fn binary_prefix_blocks(d: u64, a: u64, count: u64) -> Vec<DyadicBlock> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    for b in (0..64).rev() {
        if count >> b & 1 == 1 {
            let size = 1u64 << b;
            out.push(DyadicBlock { d, a, i: b, t: offset / size + 1 });
            offset += size;
        }
    }
    out
}

/// Write `A ∩ X` as `U \ V` with `V ⊆ U`, both disjoint unions of dyadic
/// blocks of distinct sizes: `U = X_{d,a}(1, j')`, `V = X_{d,a}(1, i'-1)`.
pub fn dyadic_decompose(
    n: u64,
    x: &[u64],
    ap: ModAp,
) -> Result<(Vec<DyadicBlock>, Vec<DyadicBlock>)> {
    if !ap.is_c1_form(n) {
        return Err(Error::InvalidRequest(format!("{ap:?} is not in C_1 form for Z_{n}")));
    }
    let map = OrbitMap::new(n, ap.d);
    let mut before = 0u64;
    let mut upto = 0u64;
    for &e in x {
        let (a, k) = map.locate(e);
        if a != ap.a {
            continue;
        }
        if (k as i64) < ap.i {
            before += 1;
        }
        if (k as i64) <= ap.j {
            upto += 1;
        }
    }
    if upto == before {
        return Ok((vec![], vec![]));
    }
    Ok((
        binary_prefix_blocks(ap.d, ap.a, upto),
        binary_prefix_blocks(ap.d, ap.a, before),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_max(values: &[i8]) -> u64 {
        let n = values.len() as u64;
        let mut best = 0;
        for d in 0..n {
            let orbit = n / gcd(n, d);
            for a in 0..n {
                let mut s = 0i64;
                for k in 0..orbit {
                    s += values[((a + k * d) % n) as usize] as i64;
                    best = best.max(s.unsigned_abs());
                }
            }
        }
        best
    }

    fn random_coloring(rng: &mut ChaCha8Rng, n: u64) -> Coloring {
        Coloring::new((0..n).map(|_| if rng.gen() { 1 } else { -1 }).collect()).unwrap()
    }

    #[test]
    fn enumerate_counts() {
        // brute force: generate every (a, d, l) and dedupe as sets
        for (n, expected) in [(1u64, 1usize), (3, 7), (4, 15)] {
            let ctx = ZnContext::new(n).unwrap();
            let mut brute = BTreeSet::new();
            for a in 0..n {
                for d in 0..n {
                    for l in 1..=n {
                        let mut s: Vec<u64> = (0..l).map(|k| (a + k * d) % n).collect();
                        s.sort_unstable();
                        s.dedup();
                        if s.len() as u64 == l {
                            brute.insert(s);
                        }
                    }
                }
            }
            assert_eq!(brute.len(), expected);
            assert_eq!(enumerate_aps(&ctx).len(), expected);
            assert_eq!(ap_masks(n).len(), expected);
        }
    }

    #[test]
    fn max_ap_examples() {
        let all = Coloring::constant(7, 1);
        let r = max_ap_discrepancy(&all);
        assert_eq!(r.value, 7);
        assert_eq!(r.witness, ModAp::full(0, 1, 7));

        let alt = Coloring::new(vec![1, -1, 1, -1]).unwrap();
        let r = max_ap_discrepancy(&alt);
        assert_eq!(r.value, 2);
        let mut w = r.witness.elements(4);
        w.sort_unstable();
        assert_eq!(w, vec![0, 2]);

        let two = Coloring::new(vec![1, -1]).unwrap();
        assert_eq!(max_ap_discrepancy(&two).value, 1);
        assert_eq!(max_ap_discrepancy(&Coloring::new(vec![-1]).unwrap()).value, 1);
    }

    #[test]
    fn max_ap_matches_naive_up_to_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=64u64 {
            for _ in 0..100 {
                let chi = random_coloring(&mut rng, n);
                let fast = max_ap_discrepancy(&chi);
                assert_eq!(fast.value, naive_max(chi.values()), "n={n}");
                let w = fast.witness;
                assert!(w.is_canonical_full(n));
                assert_eq!(chi.sum_over(w.elements(n)).unsigned_abs(), fast.value);
            }
        }
    }

    #[test]
    fn partial_colorings_evaluated_too() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=40u64 {
            let v: Vec<i8> = (0..n).map(|_| rng.gen_range(-1..=1)).collect();
            let chi = Coloring::new(v).unwrap();
            assert_eq!(max_ap_discrepancy(&chi).value, naive_max(chi.values()));
        }
    }

    #[test]
    fn parallel_scan_is_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in [130u64, 257, 1000] {
            let chi = random_coloring(&mut rng, n);
            let seq = max_ap_discrepancy(&chi);
            for w in [2, 3, 8] {
                assert_eq!(max_ap_discrepancy_par(&chi, w), seq);
            }
        }
    }

    #[test]
    fn parity_of_full_colorings() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=50u64 {
            let chi = random_coloring(&mut rng, n);
            assert_eq!(chi.total().rem_euclid(2), (n % 2) as i64);
            if n % 2 == 1 {
                assert!(max_ap_discrepancy(&chi).value >= 1);
            }
        }
    }

    #[test]
    fn congruence_examples() {
        let all = Coloring::constant(12, 1);
        for r in [1u64, 2, 3, 4, 6, 12] {
            for w in 0..r {
                assert_eq!(congruence_sum(&all, r, w).unwrap(), (12 / r) as i64);
            }
        }
        let chi = Coloring::new(vec![1, 1, 1, -1, -1, -1]).unwrap();
        assert_eq!(congruence_sum(&chi, 2, 0).unwrap(), 1);
        for w in 0..6 {
            assert_eq!(congruence_sum(&chi, 6, w).unwrap(), chi.get(w) as i64);
        }
        assert!(matches!(congruence_sum(&chi, 4, 0), Err(Error::NotADivisor { .. })));
        assert_eq!(class_energy(&chi, 2).unwrap(), 1 + 1);

        assert_eq!(max_congruence_discrepancy(&all).value, 12);
        assert_eq!(max_congruence_discrepancy(&all).class.r, 1);
        let two = Coloring::new(vec![1, -1]).unwrap();
        assert_eq!(max_congruence_discrepancy(&two).value, 1);
    }

    #[test]
    fn c1_examples() {
        assert!(decompose_to_c1(6, ModAp::full(3, 2, 0)).unwrap().is_empty());
        assert_eq!(
            decompose_to_c1(6, ModAp::full(4, 0, 1)).unwrap(),
            vec![ModAp::new(0, 1, 4, 4)]
        );
        let parts = decompose_to_c1(6, ModAp::full(4, 1, 4)).unwrap();
        assert_eq!(parts.len(), 2);
        let sets: Vec<Vec<u64>> = parts.iter().map(|p| p.elements(6)).collect();
        assert_eq!(sets, vec![vec![4, 5], vec![0, 1]]);
        assert!(parts.iter().all(|p| p.is_c1_form(6)));
        assert!(decompose_to_c1(6, ModAp::full(0, 2, 4)).is_err());
    }

    #[test]
    fn dyadic_examples() {
        let z8: Vec<u64> = (0..8).collect();
        // A = {0..6}: in the d = 1 orbit these are positions 1..7 (1-based)
        let (u, v) = dyadic_decompose(8, &z8, ModAp::new(0, 1, 0, 6)).unwrap();
        assert!(v.is_empty());
        assert_eq!(u.iter().map(|b| b.size()).collect::<Vec<_>>(), vec![4, 2, 1]);
        let mut covered: Vec<usize> = u.iter().flat_map(|b| b.positions()).collect();
        covered.sort_unstable();
        assert_eq!(covered, (0..7).collect::<Vec<_>>());

        let x = vec![1u64, 3, 5];
        let (u, v) = dyadic_decompose(8, &x, ModAp::new(0, 1, 6, 7)).unwrap();
        assert!(u.is_empty() && v.is_empty());

        // exact power-of-two prefix
        let x = vec![0u64, 2, 4, 6];
        let (u, v) = dyadic_decompose(8, &x, ModAp::new(0, 2, 0, 3)).unwrap();
        assert_eq!(u, vec![DyadicBlock { d: 2, a: 0, i: 2, t: 1 }]);
        assert!(v.is_empty());
    }

    fn block_elements(n: u64, x: &[u64], b: &DyadicBlock) -> Vec<u64> {
        orbit_order(n, x, b.d, b.a)[b.positions()].to_vec()
    }

    #[test]
    fn decompositions_reassemble() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..400 {
            let n = rng.gen_range(2..=200u64);
            let x: Vec<u64> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            if x.is_empty() {
                continue;
            }
            let d = rng.gen_range(0..n);
            let len = rng.gen_range(0..=n / gcd(n, d));
            let ap = ModAp::full(rng.gen_range(0..n), d, len);
            let parts = decompose_to_c1(n, ap).unwrap();
            assert!(parts.len() <= 2);
            let mut from_parts: Vec<u64> = parts.iter().flat_map(|p| p.elements(n)).collect();
            let total = from_parts.len();
            from_parts.sort_unstable();
            from_parts.dedup();
            assert_eq!(from_parts.len(), total, "segments overlap");
            let mut expect = ap.elements(n);
            expect.sort_unstable();
            assert_eq!(from_parts, expect);

            for p in parts {
                assert!(p.is_c1_form(n));
                let (u, v) = dyadic_decompose(n, &x, p).unwrap();
                for list in [&u, &v] {
                    let mut sizes: Vec<u64> = list.iter().map(|b| b.size()).collect();
                    assert!(sizes.iter().all(|s| s.is_power_of_two()));
                    sizes.dedup();
                    assert_eq!(sizes.len(), list.len());
                }
                let uset: BTreeSet<u64> =
                    u.iter().flat_map(|b| block_elements(n, &x, b)).collect();
                let vset: BTreeSet<u64> =
                    v.iter().flat_map(|b| block_elements(n, &x, b)).collect();
                assert!(vset.is_subset(&uset));
                let diff: BTreeSet<u64> = uset.difference(&vset).copied().collect();
                let xs: BTreeSet<u64> = x.iter().copied().collect();
                let want: BTreeSet<u64> =
                    p.elements(n).into_iter().filter(|e| xs.contains(e)).collect();
                assert_eq!(diff, want);
            }
        }
    }

    #[test]
    fn dyadic_block_counts_within_bounds() {
        const C0: f64 = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in (2..=200u64).step_by(3) {
            let ctx = ZnContext::new(n).unwrap();
            let x: Vec<u64> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
            let m = x.len() as u64;
            if m == 0 {
                continue;
            }
            let mut counts = vec![0u64; 64];
            for d in 1..n {
                let g = gcd(n, d);
                for a in 0..g {
                    let l = orbit_order(n, &x, d, a).len() as u64;
                    for i in 0..64 {
                        if l >> i == 0 {
                            break;
                        }
                        counts[i] += l >> i;
                    }
                }
            }
            for (i, &c) in counts.iter().enumerate() {
                let size = (1u64 << i) as f64;
                assert!(c as f64 <= (n - 1) as f64 * m as f64 / size);
                let refined = C0 * (m as f64 / size)
                    * ctx.phi() as f64
                    * (std::f64::consts::E * n as f64 / size).ln();
                if c > 0 {
                    assert!(c as f64 <= refined, "n={n} i={i} count={c} bound={refined}");
                }
            }
        }
    }
}
