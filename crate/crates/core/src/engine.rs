//! Partial-coloring search over the dyadic block family of a subset of Z_n,
//! and the loops that iterate it into a full coloring.
//!
//! The existence results this follows are nonconstructive. The search here is
//! a random sign walk; every result is re-checked against all block
//! constraints before it is returned.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ap::{Coloring, DyadicBlock, OrbitMap};
use crate::error::{Error, Result};
use crate::ntheory::ZnContext;

/// Upper limit on `|X| * (n - 1)` membership entries held by a block family.
pub const MAX_MEMBERSHIP: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Main,
    Hereditary,
}

/// Per-size bounds `b(s)` on block sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSchedule {
    pub kind: ScheduleKind,
    pub n: u64,
    /// `phi(n) log(e n / phi(n))`; unused by the main kind.
    pub big_m: f64,
    /// Unused by the main kind.
    pub c1: f64,
}

impl DeltaSchedule {
    pub fn main(n: u64) -> Self {
        Self { kind: ScheduleKind::Main, n, big_m: 0.0, c1: 0.0 }
    }

    pub fn hereditary(ctx: &ZnContext, c1: f64) -> Result<Self> {
        if !(c1 > 2.0) {
            return Err(Error::InvalidRequest(format!("hereditary schedule needs c1 > 2, got {c1}")));
        }
        let phi = ctx.phi() as f64;
        let big_m = phi * (std::f64::consts::E * ctx.n() as f64 / phi).ln();
        Ok(Self { kind: ScheduleKind::Hereditary, n: ctx.n(), big_m, c1 })
    }

    pub fn b(&self, s: u64) -> f64 {
        if s == 0 {
            return 0.0;
        }
        let s = s as f64;
        match self.kind {
            ScheduleKind::Main => 5.0 * s.sqrt() * (std::f64::consts::E * self.n as f64 / s).ln().sqrt(),
            ScheduleKind::Hereditary => {
                let ratio = s / self.big_m;
                if ratio >= 1.0 {
                    self.c1 * s.sqrt() / ratio
                } else {
                    self.c1 * s.sqrt() * ratio.powf(-0.1)
                }
            }
        }
    }

    /// `Δ_i = b(2^i)` for every scale `i < scales`.
    pub fn deltas(&self, scales: usize) -> Vec<f64> {
        (0..scales).map(|i| self.b(1 << i)).collect()
    }
}

/// Penalty `g(λ)` of the hereditary entropy condition.
pub fn g(lambda: f64) -> f64 {
    if lambda >= 2.0 {
        10.0 * (-lambda * lambda / 4.0).exp()
    } else {
        10.0 * (1.0 + 2.0 / lambda).ln()
    }
}

/// Contribution of one block of size `s` with bound `delta`.
pub fn entropy_term(kind: ScheduleKind, delta: f64, s: u64) -> f64 {
    let s = s as f64;
    match kind {
        ScheduleKind::Main => (-delta * delta / (4.0 * s)).exp(),
        ScheduleKind::Hereditary => g(delta / s.sqrt()),
    }
}

/// The limit the entropy sum is compared against for `m` elements.
pub fn entropy_limit(kind: ScheduleKind, m: usize) -> f64 {
    match kind {
        ScheduleKind::Main => m as f64 / 50.0,
        ScheduleKind::Hereditary => m as f64 / 5.0,
    }
}

/// Left-hand side of the entropy condition: the sum over all blocks of the
/// per-block term, grouped by size class (`counts[i]` blocks of size `2^i`).
pub fn schedule_entropy_budget(counts: &[u64], deltas: &[f64], kind: ScheduleKind) -> f64 {
    counts
        .iter()
        .zip(deltas)
        .enumerate()
        .filter(|(_, (&c, _))| c > 0)
        .map(|(i, (&c, &d))| c as f64 * entropy_term(kind, d, 1 << i))
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct Orbit {
    d: u64,
    a: u64,
    len: u32,
    base: u32,
}

/// Every dyadic block `X_{d,a}(1 + (t-1) 2^i, t 2^i)` of a subset `X`, over
/// all steps `1 <= d < n`.
#[derive(Debug, Clone)]
pub struct BlockFamily {
    n: u64,
    elems: Vec<u64>,
    steps: usize,
    /// `(orbit, position)` for element `e` and step `d` at `e * steps + d - 1`.
    memb: Vec<(u32, u32)>,
    orbits: Vec<Orbit>,
    num_blocks: usize,
    scales: usize,
}

impl BlockFamily {
    /// `x` may be in any order; duplicates are rejected.
    pub fn new(n: u64, x: &[u64]) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroModulus);
        }
        let mut elems = x.to_vec();
        elems.sort_unstable();
        if let Some(&bad) = elems.iter().find(|&&e| e >= n) {
            return Err(Error::ElementOutOfRange { x: bad, n });
        }
        if elems.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidRequest("duplicate element in X".into()));
        }
        let m = elems.len();
        let steps = (n - 1) as usize;
        if m as u64 * steps as u64 > MAX_MEMBERSHIP {
            return Err(Error::LimitExceeded { n, limit: MAX_MEMBERSHIP / m.max(1) as u64 + 1 });
        }
        let mut memb = vec![(0u32, 0u32); m * steps];
        let mut orbits = Vec::new();
        let mut base = 0usize;
        let mut keyed: Vec<(u64, u64, u32)> = Vec::with_capacity(m);
        for d in 1..n {
            let map = OrbitMap::new(n, d);
            keyed.clear();
            keyed.extend(elems.iter().enumerate().map(|(e, &v)| {
                let (a, k) = map.locate(v);
                (a, k, e as u32)
            }));
            keyed.sort_unstable();
            let mut start = 0;
            while start < keyed.len() {
                let a = keyed[start].0;
                let mut end = start;
                while end < keyed.len() && keyed[end].0 == a {
                    end += 1;
                }
                let len = end - start;
                let id = orbits.len() as u32;
                orbits.push(Orbit { d, a, len: len as u32, base: base as u32 });
                for (pos, &(_, _, e)) in keyed[start..end].iter().enumerate() {
                    memb[e as usize * steps + (d - 1) as usize] = (id, pos as u32);
                }
                base += blocks_in_orbit(len);
                start = end;
            }
        }
        let scales = if m == 0 { 0 } else { (usize::BITS - m.leading_zeros()) as usize };
        Ok(Self { n, elems, steps, memb, orbits, num_blocks: base, scales })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Sorted elements of X.
    pub fn elements(&self) -> &[u64] {
        &self.elems
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    /// Number of size classes `2^0, ..., 2^(scales-1)` that can occur.
    pub fn scales(&self) -> usize {
        self.scales
    }

    /// `counts[i]` = number of blocks of size `2^i`.
    pub fn counts_by_scale(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.scales];
        for o in &self.orbits {
            for (i, c) in counts.iter_mut().enumerate() {
                *c += (o.len >> i) as u64;
            }
        }
        counts
    }

    pub fn blocks(&self) -> impl Iterator<Item = DyadicBlock> + '_ {
        self.orbits.iter().flat_map(|o| {
            (0..32u32).take_while(move |&i| o.len >> i > 0).flat_map(move |i| {
                (1..=(o.len >> i) as u64).map(move |t| DyadicBlock { d: o.d, a: o.a, i, t })
            })
        })
    }

    /// Elements of a block, in orbit order.
    pub fn block_elements(&self, b: &DyadicBlock) -> Vec<u64> {
        let Some(di) = b.d.checked_sub(1).filter(|&di| (di as usize) < self.steps) else {
            return vec![];
        };
        let mut found: Vec<(u32, u64)> = Vec::new();
        for (e, &v) in self.elems.iter().enumerate() {
            let (o, pos) = self.memb[e * self.steps + di as usize];
            if self.orbits[o as usize].a == b.a && b.positions().contains(&(pos as usize)) {
                found.push((pos, v));
            }
        }
        found.sort_unstable();
        found.into_iter().map(|(_, v)| v).collect()
    }

    /// Calls `f(block index, scale)` for every block containing element `e`.
    #[inline]
    fn for_each_block(&self, e: usize, mut f: impl FnMut(usize, usize)) {
        for &(o, pos) in &self.memb[e * self.steps..(e + 1) * self.steps] {
            let orbit = self.orbits[o as usize];
            let mut offset = orbit.base as usize;
            let mut len = orbit.len;
            let mut i = 0;
            while len > 0 {
                let t = pos >> i;
                if t < len {
                    f(offset + t as usize, i);
                }
                offset += len as usize;
                len >>= 1;
                i += 1;
            }
        }
    }
}

fn blocks_in_orbit(len: usize) -> usize {
    let mut total = 0;
    let mut l = len;
    while l > 0 {
        total += l;
        l >>= 1;
    }
    total
}

/// One partial-coloring problem: color at least `ceil(|X|/10)` elements of
/// `X` with every block sum within `kappa * deltas[scale]`.
#[derive(Debug, Clone)]
pub struct PartialColorRequest {
    pub family: BlockFamily,
    pub deltas: Vec<f64>,
    pub kind: ScheduleKind,
    pub kappa: f64,
    pub budget: u32,
    pub seed: u64,
}

impl PartialColorRequest {
    pub fn new(family: BlockFamily, schedule: &DeltaSchedule, config: &EngineConfig) -> Self {
        let deltas = schedule.deltas(family.scales());
        Self {
            family,
            deltas,
            kind: schedule.kind,
            kappa: config.kappa,
            budget: config.budget,
            seed: config.seed,
        }
    }

    fn limits(&self) -> Vec<f64> {
        self.deltas.iter().map(|d| d * self.kappa).collect()
    }

    /// `(entropy sum at the relaxed deltas, limit)`.
    pub fn entropy(&self) -> (f64, f64) {
        let lhs = schedule_entropy_budget(&self.family.counts_by_scale(), &self.limits(), self.kind);
        (lhs, entropy_limit(self.kind, self.family.elements().len()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub seed: u64,
    pub budget: u32,
    pub kappa: f64,
    pub kind: ScheduleKind,
    pub c1: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { seed: 0, budget: 64, kappa: 1.0, kind: ScheduleKind::Main, c1: 6.0 }
    }
}

/// splitmix64 finalizer; derives independent stream seeds from a master.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn min_colored(m: usize) -> usize {
    m.div_ceil(10)
}

/// Visits X in random order and gives each element a fair random sign,
/// falling back to the opposite sign, then to leaving it uncolored, whenever
/// the choice would push some block past its limit.
fn sign_walk(req: &PartialColorRequest, limits: &[f64], rng: &mut ChaCha8Rng) -> Vec<i8> {
    let fam = &req.family;
    let m = fam.elements().len();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut sums = vec![0i32; fam.num_blocks()];
    let mut signs = vec![0i8; m];
    for e in order {
        let mut plus_ok = true;
        let mut minus_ok = true;
        fam.for_each_block(e, |b, i| {
            let s = sums[b];
            plus_ok &= (s + 1) as f64 <= limits[i];
            minus_ok &= (s - 1) as f64 >= -limits[i];
        });
        let preferred: i8 = if rng.gen() { 1 } else { -1 };
        let allowed = |s: i8| if s > 0 { plus_ok } else { minus_ok };
        let sigma = if allowed(preferred) {
            preferred
        } else if allowed(-preferred) {
            -preferred
        } else {
            continue;
        };
        fam.for_each_block(e, |b, _| sums[b] += sigma as i32);
        signs[e] = sigma;
    }
    signs
}

/// Independent check of a partial coloring against a request. Returns the
/// first violated block, if any, or an error message for count failures.
pub fn certify(req: &PartialColorRequest, chi: &Coloring) -> std::result::Result<(), String> {
    let fam = &req.family;
    if chi.n() != fam.n() {
        return Err(format!("coloring has modulus {} not {}", chi.n(), fam.n()));
    }
    let elems = fam.elements();
    let mut in_x = vec![false; fam.n() as usize];
    for &v in elems {
        in_x[v as usize] = true;
    }
    if let Some(x) = (0..fam.n()).find(|&x| !in_x[x as usize] && chi.get(x) != 0) {
        return Err(format!("element {x} outside X is colored"));
    }
    let colored = elems.iter().filter(|&&v| chi.get(v) != 0).count();
    if colored < min_colored(elems.len()) {
        return Err(format!("only {colored} of {} elements colored", elems.len()));
    }
    let limits = req.limits();
    let mut sums = vec![0i64; fam.num_blocks()];
    let mut scale_of = vec![0usize; fam.num_blocks()];
    for (e, &v) in elems.iter().enumerate() {
        let c = chi.get(v) as i64;
        fam.for_each_block(e, |b, i| {
            sums[b] += c;
            scale_of[b] = i;
        });
    }
    for (b, (&s, &i)) in sums.iter().zip(&scale_of).enumerate() {
        if (s as f64).abs() > limits[i] {
            return Err(format!("block {b} of size {} has sum {s} above {}", 1u64 << i, limits[i]));
        }
    }
    Ok(())
}

/// Search for a certified partial coloring of X.
pub fn partial_color(req: &PartialColorRequest) -> Result<Coloring> {
    if req.deltas.len() < req.family.scales() || req.deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidRequest("every size class needs a positive Δ".into()));
    }
    if !(req.kappa >= 1.0) {
        return Err(Error::InvalidRequest(format!("kappa must be >= 1, got {}", req.kappa)));
    }
    let (lhs, limit) = req.entropy();
    if lhs > limit {
        return Err(Error::BudgetExceeded { lhs, limit });
    }
    let limits = req.limits();
    let fam = &req.family;
    for attempt in 0..req.budget {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(req.seed, attempt as u64));
        let signs = sign_walk(req, &limits, &mut rng);
        let mut chi = Coloring::empty(fam.n());
        for (&v, &s) in fam.elements().iter().zip(&signs) {
            chi.set(v, s);
        }
        if certify(req, &chi).is_ok() {
            return Ok(chi);
        }
    }
    Err(Error::SearchFailed { iteration: 0, attempts: req.budget })
}

/// One round of an iterated coloring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub iteration: usize,
    pub kind: ScheduleKind,
    pub uncolored_before: usize,
    pub colored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateOutcome {
    pub coloring: Coloring,
    pub rounds: Vec<RoundTrace>,
}

/// Repeat partial coloring on the still-uncolored part of X until every
/// element is colored. The hereditary kind runs hereditary rounds while more
/// than `phi(n)` elements remain, then finishes with main rounds.
pub fn full_color_iterate(ctx: &ZnContext, x: &[u64], config: &EngineConfig) -> Result<IterateOutcome> {
    let n = ctx.n();
    if x.is_empty() {
        return Err(Error::InvalidRequest("X must be nonempty".into()));
    }
    let main = DeltaSchedule::main(n);
    let hereditary = match config.kind {
        ScheduleKind::Hereditary => Some(DeltaSchedule::hereditary(ctx, config.c1)?),
        ScheduleKind::Main => None,
    };
    let mut chi = Coloring::empty(n);
    let mut remaining: Vec<u64> = x.to_vec();
    remaining.sort_unstable();
    let mut rounds = Vec::new();
    while !remaining.is_empty() {
        let iteration = rounds.len();
        let schedule = match hereditary {
            Some(h) if remaining.len() as u64 > ctx.phi() => h,
            _ => main,
        };
        let family = BlockFamily::new(n, &remaining)?;
        let mut round_config = *config;
        round_config.seed = derive_seed(config.seed, 1 << 32 | iteration as u64);
        let req = PartialColorRequest::new(family, &schedule, &round_config);
        let part = partial_color(&req).map_err(|e| match e {
            Error::SearchFailed { attempts, .. } => Error::SearchFailed { iteration, attempts },
            other => other,
        })?;
        let before = remaining.len();
        remaining.retain(|&v| {
            let s = part.get(v);
            if s != 0 {
                chi.set(v, s);
            }
            s == 0
        });
        rounds.push(RoundTrace {
            iteration,
            kind: schedule.kind,
            uncolored_before: before,
            colored: before - remaining.len(),
        });
    }
    Ok(IterateOutcome { coloring: chi, rounds })
}
