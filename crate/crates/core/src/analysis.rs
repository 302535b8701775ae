//! Fourier analysis on Z_n, numerical checks of the identities and
//! inequalities relating AP sums to the spectrum, and closed-form bounds.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ap::{max_ap_discrepancy, Coloring};
use crate::constructions::best_divisor;
use crate::error::{Error, Result};
use crate::ntheory::{gcd, is_prime, totient, ZnContext};

pub const REL_TOL: f64 = 1e-8;
/// Absolute slack for inequalities, multiplied by `n^2 m^2`.
pub const ABS_TOL_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub n: u64,
    pub fhat: Vec<Complex64>,
}

impl Spectrum {
    pub fn power(&self) -> Vec<f64> {
        self.fhat.iter().map(|z| z.norm_sqr()).collect()
    }
}

fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64))
        .collect()
}

/// `fhat(r) = sum_x f(x) exp(-2 pi i x r / n)`, evaluated directly.
pub fn dft(f: &[Complex64]) -> Spectrum {
    let n = f.len();
    let w = twiddles(n);
    let fhat = (0..n)
        .map(|r| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut idx = 0usize;
            for &v in f {
                acc += v * w[idx];
                idx += r;
                if idx >= n {
                    idx -= n;
                }
            }
            acc
        })
        .collect();
    Spectrum { n: n as u64, fhat }
}

pub fn to_complex(chi: &Coloring) -> Vec<Complex64> {
    chi.values().iter().map(|&v| Complex64::new(v as f64, 0.0)).collect()
}

/// `g_f(a, r)` for `a in [0, r)`.
pub fn class_sums_complex(f: &[Complex64], r: u64) -> Vec<Complex64> {
    let mut g = vec![Complex64::new(0.0, 0.0); r as usize];
    for (x, &v) in f.iter().enumerate() {
        g[x % r as usize] += v;
    }
    g
}

/// `G_f(r) = sum_a |g_f(a, r)|^2`.
pub fn class_energy_complex(f: &[Complex64], r: u64) -> f64 {
    class_sums_complex(f, r).iter().map(|z| z.norm_sqr()).sum()
}

/// `T_f = max over progressions A of |f(A)|` for complex `f`, by walking
/// every orbit from every start.
pub fn max_ap_abs(f: &[Complex64]) -> f64 {
    let n = f.len() as u64;
    let mut best: f64 = 0.0;
    for d in 0..n {
        let orbit = n / gcd(n, d);
        for a in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            let mut x = a;
            for _ in 0..orbit {
                s += f[x as usize];
                best = best.max(s.norm());
                x = (x + d) % n;
            }
        }
    }
    best
}

/// Outcome of one numerical check: `pass` is the verdict with the
/// applicable tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub lhs: f64,
    pub rhs: f64,
    /// Scaled gap for equalities; relative excess of `lhs` over `rhs` (0 if
    /// none) for inequalities.
    pub err: f64,
    pub pass: bool,
}

impl Check {
    /// Equality up to `REL_TOL` relative to `max(|lhs|, |rhs|, scale)`; the
    /// scale keeps sides that cancel to ~0 from failing on rounding noise.
    fn equal(lhs: f64, rhs: f64, scale: f64) -> Self {
        let err = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(scale).max(f64::MIN_POSITIVE);
        Self { lhs, rhs, err, pass: err <= REL_TOL }
    }

    /// `lhs <= rhs + tol`.
    fn at_most(lhs: f64, rhs: f64, tol: f64) -> Self {
        let err = if lhs > rhs { rel_err(lhs, rhs) } else { 0.0 };
        Self { lhs, rhs, err, pass: lhs <= rhs + tol }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn energy(f: &[Complex64]) -> f64 {
    f.iter().map(|z| z.norm_sqr()).sum()
}

/// `n m^2 sum |f|^2`, an upper bound for the weighted sums compared below.
fn weighted_scale(f: &[Complex64], m: u64) -> f64 {
    f.len() as f64 * (m * m) as f64 * energy(f)
}

fn ineq_tol(n: usize, m: u64) -> f64 {
    ABS_TOL_SCALE * (n as f64 * m as f64).powi(2)
}

/// `sum_{k<r} |fhat(k n / r)|^2` against `r G_f(r)`.
pub fn check_subgroup_plancherel(f: &[Complex64], spec: &Spectrum, r: u64) -> Result<Check> {
    let n = f.len() as u64;
    if r == 0 || !n.is_multiple_of(r) {
        return Err(Error::NotADivisor { r, n });
    }
    let step = (n / r) as usize;
    let lhs: f64 = (0..r as usize).map(|k| spec.fhat[k * step].norm_sqr()).sum();
    Ok(Check::equal(lhs, r as f64 * class_energy_complex(f, r), n as f64 * energy(f)))
}

/// `sum_{a,b} |sum_{k<m} f(a + b k)|^2`, directly.
pub fn weighted_lhs(f: &[Complex64], m: u64) -> f64 {
    let n = f.len();
    let mut total = 0.0;
    for b in 0..n {
        for a in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            let mut x = a;
            for _ in 0..m {
                s += f[x];
                x = (x + b) % n;
            }
            total += s.norm_sqr();
        }
    }
    total
}

/// [`weighted_lhs`] for every `m in 1..=n` at once; entry `m - 1`.
pub fn weighted_lhs_all(f: &[Complex64]) -> Vec<f64> {
    let n = f.len();
    let mut totals = vec![0.0; n];
    for b in 0..n {
        for a in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            let mut x = a;
            for t in totals.iter_mut() {
                s += f[x];
                *t += s.norm_sqr();
                x = (x + b) % n;
            }
        }
    }
    totals
}

/// Same quantity through the spectrum:
/// `(1/n) sum_b sum_r |fhat(r)|^2 |sum_{k<m} e^{2 pi i r b k / n}|^2`.
pub fn weighted_lhs_spectral(spec: &Spectrum, m: u64) -> f64 {
    let n = spec.n as usize;
    let w = twiddles(n);
    // |sum_{k<m} w^{u k}|^2 depends only on u = r b mod n.
    let h: Vec<f64> = (0..n)
        .map(|u| {
            let mut s = Complex64::new(0.0, 0.0);
            let mut idx = 0usize;
            for _ in 0..m {
                s += w[idx];
                idx = (idx + u) % n;
            }
            s.norm_sqr()
        })
        .collect();
    let power = spec.power();
    let mut total = 0.0;
    for (r, &p) in power.iter().enumerate() {
        let mut acc = 0.0;
        let mut u = 0usize;
        for _ in 0..n {
            acc += h[u];
            u = (u + r) % n;
        }
        total += p * acc;
    }
    total / n as f64
}

fn gcd_weight_sum(spec: &Spectrum, m: u64, pick: impl Fn(f64, f64) -> f64) -> f64 {
    let n = spec.n;
    let mf = m as f64;
    spec.fhat
        .iter()
        .enumerate()
        .map(|(r, z)| {
            let g = gcd(r as u64, n) as f64;
            z.norm_sqr() * pick(mf * mf * g / n as f64, mf)
        })
        .sum()
}

/// `sum_r |fhat(r)|^2 max(m^2 gcd(r,n)/n, m)`.
pub fn rhs_lower(spec: &Spectrum, m: u64) -> f64 {
    gcd_weight_sum(spec, m, f64::max)
}

fn divisor_terms(f: &[Complex64], ctx: &ZnContext) -> Vec<(u64, f64)> {
    ctx.divisors()
        .iter()
        .map(|&k| (k, class_energy_complex(f, ctx.n() / k)))
        .collect()
}

/// `sum over divisors k of n with k < m of m^2 (phi(k)/k) G_f(n/k)`.
fn small_divisor_sum(terms: &[(u64, f64)], m: u64, inclusive_bound: u64) -> f64 {
    let mf = m as f64;
    terms
        .iter()
        .filter(|(k, _)| *k <= inclusive_bound)
        .map(|&(k, g)| mf * mf * totient(k) as f64 / k as f64 * g)
        .sum()
}

/// Weighted sum bounded below by the spectrum: `weighted_lhs >= rhs_lower`.
pub fn verify_rhs_lower(f: &[Complex64], spec: &Spectrum, m: u64) -> Check {
    let lhs = weighted_lhs(f, m);
    let rhs = rhs_lower(spec, m);
    // stored as rhs <= lhs so that `pass` reads the same way everywhere
    Check::at_most(rhs, lhs, ineq_tol(f.len(), m))
}

/// `weighted_lhs <= n^2 T_f^2 + sum_{1<=k<m, k|n} m^2 (phi(k)/k) G_f(n/k)`.
pub fn verify_lhs_upper(f: &[Complex64], ctx: &ZnContext, m: u64, t_f: f64) -> Check {
    let n = f.len() as f64;
    let terms = divisor_terms(f, ctx);
    let rhs = n * n * t_f * t_f + small_divisor_sum(&terms, m, m.saturating_sub(1));
    Check::at_most(weighted_lhs(f, m), rhs, ineq_tol(f.len(), m))
}

/// `sum_{k|n} m^2 (phi(k)/k) G_f(n/k) = sum_r |fhat(r)|^2 m^2 gcd(r,n)/n`.
pub fn mobius_identity_check(f: &[Complex64], ctx: &ZnContext, spec: &Spectrum, m: u64) -> Check {
    let terms = divisor_terms(f, ctx);
    let lhs = small_divisor_sum(&terms, m, ctx.n());
    let rhs = gcd_weight_sum(spec, m, |a, _| a);
    Check::equal(lhs, rhs, weighted_scale(f, m))
}

/// `sum_r |fhat|^2 min(m^2 gcd/n, m) <= sum_{k<=l} m^2 (phi(k)/k) G_f(n/k)
///  + sum_{k>l} (m n / k) G_f(n/k)`, over divisors k of n.
pub fn mobius_inequality_check(
    f: &[Complex64],
    ctx: &ZnContext,
    spec: &Spectrum,
    m: u64,
    l: u64,
) -> Check {
    let terms = divisor_terms(f, ctx);
    mobius_inequality_from_terms(&terms, ctx.n(), gcd_weight_sum(spec, m, f64::min), m, l)
}

fn mobius_inequality_from_terms(terms: &[(u64, f64)], n: u64, lhs: f64, m: u64, l: u64) -> Check {
    let large: f64 = terms
        .iter()
        .filter(|(k, _)| *k > l)
        .map(|&(k, g)| m as f64 * n as f64 / k as f64 * g)
        .sum();
    let rhs = small_divisor_sum(terms, m, l) + large;
    Check::at_most(lhs, rhs, ineq_tol(n as usize, m))
}

/// `rhs_lower <= n^2 T_f^2 + sum_{1<=k<m, k|n} m^2 (phi(k)/k) G_f(n/k)`.
pub fn composite_check(f: &[Complex64], ctx: &ZnContext, spec: &Spectrum, m: u64, t_f: f64) -> Check {
    let n = f.len() as f64;
    let terms = divisor_terms(f, ctx);
    let upper = n * n * t_f * t_f + small_divisor_sum(&terms, m, m.saturating_sub(1));
    Check::at_most(rhs_lower(spec, m), upper, ineq_tol(f.len(), m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub evaluated: u64,
    pub passed: u64,
    /// Largest relative gap seen on equalities; largest relative violation
    /// (0 if none) on inequalities.
    pub worst_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub n: u64,
    pub trials: u64,
    pub seed: u64,
    pub checks: Vec<CheckSummary>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed == c.evaluated)
    }
}

struct Tally {
    names: Vec<&'static str>,
    rows: Vec<(u64, u64, f64)>,
}

impl Tally {
    fn new(names: &[&'static str]) -> Self {
        Self { names: names.to_vec(), rows: vec![(0, 0, 0.0); names.len()] }
    }

    fn record(&mut self, idx: usize, c: Check) {
        let row = &mut self.rows[idx];
        row.0 += 1;
        row.1 += c.pass as u64;
        row.2 = row.2.max(c.err);
    }

    fn finish(self) -> Vec<CheckSummary> {
        self.names
            .into_iter()
            .zip(self.rows)
            .map(|(name, (evaluated, passed, worst_rel))| CheckSummary {
                name: name.to_string(),
                evaluated,
                passed,
                worst_rel,
            })
            .collect()
    }
}

const SUITE_CHECKS: [&str; 8] = [
    "plancherel",
    "subgroup_plancherel",
    "lhs_two_paths",
    "rhs_lower",
    "lhs_upper",
    "mobius_identity",
    "mobius_inequality",
    "composite",
];

/// Every check for one function, all `m` and `(m, l)`, recorded in `tally`.
fn suite_one(f: &[Complex64], ctx: &ZnContext, t_f: f64, tally: &mut Tally) {
    let n = f.len();
    let spec = dft(f);
    let power = spec.power();
    let e = energy(f);
    tally.record(0, Check::equal(power.iter().sum(), n as f64 * e, 0.0));
    for &r in ctx.divisors() {
        tally.record(1, check_subgroup_plancherel(f, &spec, r).unwrap());
    }
    let terms = divisor_terms(f, ctx);
    let direct = weighted_lhs_all(f);
    for m in 1..=n as u64 {
        let lhs = direct[m as usize - 1];
        let scale = weighted_scale(f, m);
        tally.record(2, Check::equal(lhs, weighted_lhs_spectral(&spec, m), scale));
        let lower = rhs_lower(&spec, m);
        tally.record(3, Check::at_most(lower, lhs, ineq_tol(n, m)));
        let upper = (n * n) as f64 * t_f * t_f + small_divisor_sum(&terms, m, m - 1);
        tally.record(4, Check::at_most(lhs, upper, ineq_tol(n, m)));
        let ident = Check::equal(
            small_divisor_sum(&terms, m, ctx.n()),
            gcd_weight_sum(&spec, m, |a, _| a),
            scale,
        );
        tally.record(5, ident);
        let min_sum = gcd_weight_sum(&spec, m, f64::min);
        for l in 1..=n as u64 {
            tally.record(6, mobius_inequality_from_terms(&terms, ctx.n(), min_sum, m, l));
        }
        tally.record(7, Check::at_most(lower, upper, ineq_tol(n, m)));
    }
}

/// Random `±1` colorings and random complex functions (real and imaginary
/// parts uniform in [-1, 1]), `trials` of each, through every check.
pub fn run_fourier_suite(n: u64, trials: u64, seed: u64) -> Result<SuiteReport> {
    let ctx = ZnContext::new(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new(&SUITE_CHECKS);
    for _ in 0..trials {
        let chi = Coloring::new((0..n).map(|_| if rng.gen() { 1 } else { -1 }).collect())?;
        let t = max_ap_discrepancy(&chi).value as f64;
        suite_one(&to_complex(&chi), &ctx, t, &mut tally);
    }
    for _ in 0..trials {
        let f: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
            .collect();
        let t = max_ap_abs(&f);
        suite_one(&f, &ctx, t, &mut tally);
    }
    Ok(SuiteReport { n, trials, seed, checks: tally.finish() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    UpperMain,
    LowerMain,
    LowerProp,
    LowerPrimePower,
    HereditaryUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    Divisor { r: u64 },
    Split { r: u64, t1: u64, t2: Option<u64> },
    Prop { l: u64, s1: u64, s2: f64, m: u64 },
    PrimePower { p: u64, k: u32, t: u32 },
    Totient { phi: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: u64,
    pub kind: BoundKind,
    pub value: f64,
    pub witness: Witness,
    pub c_hat: Option<f64>,
}

/// `(8 S1 / n + 2 S2)^(-1/2)` with `S1 = sum_{k<=l, k|n} phi(k)` and
/// `S2 = sum_{l<k<=n, k|n} 1/k^2`.
pub fn lower_bound_prop(ctx: &ZnContext, l: u64) -> Result<BoundReport> {
    let n = ctx.n();
    if l == 0 || l > n {
        return Err(Error::InvalidRequest(format!("l must lie in [1, {n}], got {l}")));
    }
    let s1: u64 = ctx.divisors().iter().filter(|&&k| k <= l).map(|&k| totient(k)).sum();
    let s2: f64 = ctx
        .divisors()
        .iter()
        .filter(|&&k| k > l)
        .map(|&k| 1.0 / (k as f64 * k as f64))
        .sum();
    let value = (8.0 * s1 as f64 / n as f64 + 2.0 * s2).powf(-0.5);
    Ok(BoundReport {
        n,
        kind: BoundKind::LowerProp,
        value,
        witness: Witness::Prop { l, s1, s2, m: n / (2 * s1) },
        c_hat: None,
    })
}

/// Best [`lower_bound_prop`] over `l` ranging over the divisors of n.
pub fn best_lower_bound_prop(ctx: &ZnContext) -> BoundReport {
    ctx.divisors()
        .iter()
        .map(|&l| lower_bound_prop(ctx, l).expect("divisors lie in [1, n]"))
        .fold(None::<BoundReport>, |best, r| match best {
            Some(b) if b.value >= r.value => Some(b),
            _ => Some(r),
        })
        .expect("n has a divisor")
}

/// `min_{r|n} (n/r + sqrt r) / (8 sqrt d(n))`.
pub fn lower_bound_main(ctx: &ZnContext) -> BoundReport {
    let n = ctx.n();
    let mut best = (1u64, f64::INFINITY);
    for &r in ctx.divisors() {
        let v = n as f64 / r as f64 + (r as f64).sqrt();
        if v < best.1 {
            best = (r, v);
        }
    }
    // t1 >= n^(2/3) <=> t1^3 >= n^2, compared exactly
    let n2 = n as u128 * n as u128;
    let big = |t: u64| (t as u128).pow(3) >= n2;
    let t1 = *ctx.divisors().iter().find(|&&t| big(t)).expect("n itself qualifies");
    let t2 = ctx.divisors().iter().rev().find(|&&t| !big(t)).copied();
    BoundReport {
        n,
        kind: BoundKind::LowerMain,
        value: best.1 / (8.0 * (ctx.num_divisors() as f64).sqrt()),
        witness: Witness::Split { r: best.0, t1, t2 },
        c_hat: None,
    }
}

/// `p^((k - floor(k/3)) / 2) / 4`.
pub fn lower_bound_prime_power(p: u64, k: u32) -> Result<BoundReport> {
    if !is_prime(p) || k == 0 {
        return Err(Error::InvalidRequest(format!("{p}^{k} is not a prime power")));
    }
    let t = k / 3;
    let n = p
        .checked_pow(k)
        .ok_or_else(|| Error::InvalidRequest(format!("{p}^{k} overflows")))?;
    Ok(BoundReport {
        n,
        kind: BoundKind::LowerPrimePower,
        value: (p as f64).powf((k - t) as f64 / 2.0) / 4.0,
        witness: Witness::PrimePower { p, k, t },
        c_hat: None,
    })
}

/// `min_{r|n} (n/r + c_hat sqrt(r) 2^omega(r))`, smallest `r` on ties.
pub fn upper_bound_main(ctx: &ZnContext, c_hat: f64) -> Result<BoundReport> {
    if !(c_hat > 0.0) {
        return Err(Error::InvalidRequest(format!("c_hat must be positive, got {c_hat}")));
    }
    let (r, value) = best_divisor(ctx.n(), c_hat);
    Ok(BoundReport {
        n: ctx.n(),
        kind: BoundKind::UpperMain,
        value,
        witness: Witness::Divisor { r },
        c_hat: Some(c_hat),
    })
}

/// `c_hat phi(n)^(1/2) (log(e n / phi(n)))^(3/2)`.
pub fn hereditary_upper_bound(ctx: &ZnContext, c_hat: f64) -> Result<BoundReport> {
    if !(c_hat > 0.0) {
        return Err(Error::InvalidRequest(format!("c_hat must be positive, got {c_hat}")));
    }
    let phi = ctx.phi();
    Ok(BoundReport {
        n: ctx.n(),
        kind: BoundKind::HereditaryUpper,
        value: c_hat * hereditary_scale(ctx.n(), phi),
        witness: Witness::Totient { phi },
        c_hat: Some(c_hat),
    })
}

/// `phi^(1/2) (log(e n / phi))^(3/2)`.
pub fn hereditary_scale(n: u64, phi: u64) -> f64 {
    let phi = phi as f64;
    phi.sqrt() * (E * n as f64 / phi).ln().powf(1.5)
}
