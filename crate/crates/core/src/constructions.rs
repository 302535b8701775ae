//! Colorings of Z_n built from sign-flipped copies of engine colorings, with
//! exact cancellation on prescribed congruence classes.

use serde::{Deserialize, Serialize};

use crate::ap::{max_ap_discrepancy, max_congruence_discrepancy, ApDiscrepancy, Coloring};
use crate::engine::{derive_seed, full_color_iterate, EngineConfig, IterateOutcome, ScheduleKind};
use crate::error::{Error, Result};
use crate::ntheory::{divisors, factorize, is_prime, ZnContext};

/// `chi'(x) = chi(x mod r)` on Z_n.
pub fn lift_coloring(chi: &Coloring, ctx: &ZnContext) -> Result<Coloring> {
    let r = chi.n();
    if !ctx.divides(r) {
        return Err(Error::NotADivisor { r, n: ctx.n() });
    }
    Coloring::new((0..ctx.n()).map(|x| chi.get(x % r)).collect())
}

/// Flip to `chi(min support) = +1`.
fn normalize_sign(chi: Coloring) -> Coloring {
    match chi.values().iter().find(|&&v| v != 0) {
        Some(&v) if v < 0 => chi.negated(),
        _ => chi,
    }
}

fn color_with_engine(ctx: &ZnContext, x: &[u64], config: &EngineConfig) -> Result<Coloring> {
    let config = EngineConfig { kind: ScheduleKind::Main, ..*config };
    Ok(full_color_iterate(ctx, x, &config)?.coloring)
}

/// Color the interval `{start, ..., start + m - 1}` (mod n): the engine
/// colors the first half and the second half is its negated translate by
/// `m/2`. Every class `C(r, w)` with `r | m/2` then sums to 0 over X.
pub fn interval_doubling_coloring(
    ctx: &ZnContext,
    start: u64,
    m: u64,
    config: &EngineConfig,
) -> Result<Coloring> {
    let n = ctx.n();
    if m == 0 || m % 2 == 1 || m > n {
        return Err(Error::InvalidInterval(format!("length {m} must be even and in [2, {n}]")));
    }
    let half = m / 2;
    let first: Vec<u64> = (0..half).map(|j| (start + j) % n).collect();
    let chi0 = color_with_engine(ctx, &first, config)?;
    let mut chi = Coloring::empty(n);
    for &x in &first {
        chi.set(x, chi0.get(x));
        chi.set((x + half) % n, -chi0.get(x));
    }
    Ok(chi)
}

/// Coloring of Z_{p^alpha} with every congruence class sum in {-1, 0, 1}.
pub fn prime_power_coloring(p: u64, alpha: u32, config: &EngineConfig) -> Result<Coloring> {
    if !is_prime(p) || alpha == 0 {
        return Err(Error::InvalidRequest(format!("{p}^{alpha} is not a prime power")));
    }
    let n = p
        .checked_pow(alpha)
        .ok_or_else(|| Error::InvalidRequest(format!("{p}^{alpha} overflows")))?;
    let ctx = ZnContext::new(n)?;
    if p == 2 {
        return Ok(normalize_sign(interval_doubling_coloring(&ctx, 0, n, config)?));
    }
    let mut chi = Coloring::empty(n);
    chi.set(0, 1);
    let mut lo = 1u64;
    for i in 1..=alpha {
        let hi = lo * p;
        let cell = EngineConfig { seed: derive_seed(config.seed, i as u64), ..*config };
        let part = interval_doubling_coloring(&ctx, lo, hi - lo, &cell)?;
        for x in lo..hi {
            chi.set(x, part.get(x));
        }
        lo = hi;
    }
    Ok(normalize_sign(chi))
}

/// A box `{psi(o_1 + t_1, ..., o_k + t_k) : 0 <= t_i < T_i}` in CRT
/// coordinates, with a set `I` of factors along which it is split in half.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrtBox {
    #[serde(skip)]
    pub ctx: ZnContext,
    pub offsets: Vec<u64>,
    pub extents: Vec<u64>,
    /// `(factor index, beta)` pairs; `extents[i] / p_i^beta` must be even.
    pub split: Vec<(usize, u32)>,
}

impl CrtBox {
    pub fn new(
        ctx: &ZnContext,
        offsets: Vec<u64>,
        extents: Vec<u64>,
        split: Vec<(usize, u32)>,
    ) -> Result<Self> {
        let k = ctx.factors().len();
        if offsets.len() != k || extents.len() != k {
            return Err(Error::InvalidBox(format!("expected {k} coordinates")));
        }
        for (i, (&(p, a), (&o, &t))) in ctx.factors().iter().zip(offsets.iter().zip(&extents)).enumerate() {
            let q = p.pow(a);
            if t == 0 || o + t > q {
                return Err(Error::InvalidBox(format!("coordinate {i}: [{o}, {}) not inside Z_{q}", o + t)));
            }
        }
        let mut seen = vec![false; k];
        for &(i, beta) in &split {
            if i >= k || seen[i] {
                return Err(Error::InvalidBox(format!("bad split index {i}")));
            }
            seen[i] = true;
            let (p, a) = ctx.factors()[i];
            if beta > a {
                return Err(Error::InvalidBox(format!("beta {beta} exceeds exponent {a}")));
            }
            let pb = p.pow(beta);
            if !extents[i].is_multiple_of(pb) || !(extents[i] / pb).is_multiple_of(2) {
                return Err(Error::InvalidBox(format!(
                    "extent {} is not an even multiple of {p}^{beta}",
                    extents[i]
                )));
            }
        }
        Ok(Self { ctx: ctx.clone(), offsets, extents, split })
    }

    pub fn size(&self) -> u64 {
        self.extents.iter().product()
    }

    fn collect(&self, extents: &[u64]) -> Vec<u64> {
        let k = extents.len();
        let mut out = Vec::with_capacity(extents.iter().product::<u64>() as usize);
        let mut t = vec![0u64; k];
        loop {
            let coords: Vec<u64> = (0..k).map(|i| self.offsets[i] + t[i]).collect();
            out.push(self.ctx.combine_unchecked(&coords));
            let mut i = 0;
            loop {
                if i == k {
                    out.sort_unstable();
                    return out;
                }
                t[i] += 1;
                if t[i] < extents[i] {
                    break;
                }
                t[i] = 0;
                i += 1;
            }
        }
    }

    pub fn elements(&self) -> Vec<u64> {
        self.collect(&self.extents)
    }

    /// The corner `X_0`: the box halved along every split factor.
    pub fn base_elements(&self) -> Vec<u64> {
        let mut half = self.extents.clone();
        for &(i, _) in &self.split {
            half[i] /= 2;
        }
        self.collect(&half)
    }

    /// Moduli `r_i = n / p_i^(alpha_i - beta_i)` whose classes cancel.
    pub fn cancellation_moduli(&self) -> Vec<u64> {
        self.split
            .iter()
            .map(|&(i, beta)| {
                let (p, a) = self.ctx.factors()[i];
                self.ctx.n() / p.pow(a - beta)
            })
            .collect()
    }

    pub fn sign_pattern(&self) -> SignPattern {
        SignPattern {
            shifts: self
                .split
                .iter()
                .map(|&(i, _)| {
                    let mut residues = vec![0u64; self.ctx.factors().len()];
                    residues[i] = self.extents[i] / 2;
                    self.ctx.combine_unchecked(&residues)
                })
                .collect(),
            n: self.ctx.n(),
        }
    }
}

/// Translates `u_v` and signs `(-1)^{|v|}` for `v in {0,1}^I`, with `v`
/// encoded as a bitmask over the split factors in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignPattern {
    /// `shifts[j]` is the CRT lift of `S_i` in coordinate `i = I[j]`, 0 elsewhere.
    pub shifts: Vec<u64>,
    pub n: u64,
}

impl SignPattern {
    pub fn count(&self) -> u64 {
        1 << self.shifts.len()
    }

    pub fn sign(&self, v: u64) -> i8 {
        if v.count_ones().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    pub fn translate(&self, v: u64) -> u64 {
        self.shifts
            .iter()
            .enumerate()
            .filter(|(j, _)| v >> j & 1 == 1)
            .fold(0u64, |acc, (_, &s)| (acc + s) % self.n)
    }
}

/// Engine coloring on the corner of the box, copied with sign flips to the
/// other `2^|I| - 1` translates.
pub fn crt_box_coloring(b: &CrtBox, config: &EngineConfig) -> Result<Coloring> {
    let n = b.ctx.n();
    let base = b.base_elements();
    let chi0 = color_with_engine(&b.ctx, &base, config)?;
    let pattern = b.sign_pattern();
    let mut chi = Coloring::empty(n);
    for v in 0..pattern.count() {
        let u = pattern.translate(v);
        let s = pattern.sign(v);
        for &x in &base {
            chi.set((x + u) % n, s * chi0.get(x));
        }
    }
    Ok(chi)
}

/// One cell of the partition of Z_n used by [`congruence_balanced_coloring`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    /// `r = prod p_i^delta_i`.
    pub r: u64,
    pub deltas: Vec<u32>,
    pub cell: CrtBox,
}

/// Cells indexed by exponent vectors `delta`: coordinate `i` ranges over
/// `{0}` for `delta_i = 0` and `[p^(delta_i - 1), p^delta_i)` otherwise;
/// for `p = 2` only `delta_i = alpha_i` (the whole range) is used.
pub fn balanced_cells(ctx: &ZnContext) -> Vec<Cell> {
    let factors = ctx.factors();
    let k = factors.len();
    let choices: Vec<Vec<u32>> = factors
        .iter()
        .map(|&(p, a)| if p == 2 { vec![a] } else { (0..=a).collect() })
        .collect();
    let mut cells = Vec::new();
    let mut idx = vec![0usize; k];
    loop {
        let deltas: Vec<u32> = (0..k).map(|i| choices[i][idx[i]]).collect();
        let mut offsets = Vec::with_capacity(k);
        let mut extents = Vec::with_capacity(k);
        let mut split = Vec::new();
        let mut r = 1u64;
        for (i, (&(p, _), &d)) in factors.iter().zip(&deltas).enumerate() {
            r *= p.pow(d);
            if d == 0 {
                offsets.push(0);
                extents.push(1);
            } else if p == 2 {
                offsets.push(0);
                extents.push(p.pow(d));
                split.push((i, d - 1));
            } else {
                offsets.push(p.pow(d - 1));
                extents.push(p.pow(d) - p.pow(d - 1));
                split.push((i, d - 1));
            }
        }
        let cell = CrtBox::new(ctx, offsets, extents, split).expect("cell boxes are valid");
        cells.push(Cell { r, deltas, cell });
        let mut i = 0;
        loop {
            if i == k {
                cells.sort_by_key(|c| c.r);
                return cells;
            }
            idx[i] += 1;
            if idx[i] < choices[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Full coloring of Z_n whose congruence class sums all lie in `{-1, 0, 1}`.
pub fn congruence_balanced_coloring(ctx: &ZnContext, config: &EngineConfig) -> Result<Coloring> {
    let n = ctx.n();
    let mut chi = Coloring::empty(n);
    for (j, cell) in balanced_cells(ctx).iter().enumerate() {
        let cfg = EngineConfig { seed: derive_seed(config.seed, j as u64), ..*config };
        let part = crt_box_coloring(&cell.cell, &cfg).map_err(|e| match e {
            Error::SearchFailed { iteration, attempts } => {
                Error::CellSearchFailed { r: cell.r, iteration, attempts }
            }
            other => other,
        })?;
        for x in cell.cell.elements() {
            chi.set(x, part.get(x));
        }
    }
    debug_assert!(chi.is_full());
    Ok(normalize_sign(chi))
}

/// `n/r + c_hat * sqrt(r) * 2^omega(r)`.
pub fn predicted_bound(n: u64, r: u64, c_hat: f64) -> f64 {
    let omega = factorize(r).len() as i32;
    n as f64 / r as f64 + c_hat * (r as f64).sqrt() * 2f64.powi(omega)
}

/// The divisor minimizing [`predicted_bound`], smallest on ties.
pub fn best_divisor(n: u64, c_hat: f64) -> (u64, f64) {
    let mut best = (1, f64::INFINITY);
    for r in divisors(n) {
        let v = predicted_bound(n, r, c_hat);
        if v < best.1 {
            best = (r, v);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub n: u64,
    pub r_star: u64,
    pub c_hat: f64,
    pub kappa: f64,
    pub seed: u64,
    pub predicted: f64,
    pub measured: ApDiscrepancy,
    /// Largest congruence class sum of the coloring of `Z_{r*}` before
    /// lifting; at most 1 by construction.
    pub base_congruence_max: u64,
}

/// Balanced coloring of `Z_{r*}` lifted to Z_n.
pub fn construct_best_coloring(
    ctx: &ZnContext,
    c_hat: f64,
    config: &EngineConfig,
) -> Result<(Coloring, ConstructionReport)> {
    if !(c_hat > 0.0) {
        return Err(Error::InvalidRequest(format!("c_hat must be positive, got {c_hat}")));
    }
    let n = ctx.n();
    let (r_star, predicted) = best_divisor(n, c_hat);
    let inner = congruence_balanced_coloring(&ZnContext::new(r_star)?, config)?;
    let base_congruence_max = max_congruence_discrepancy(&inner).value;
    let chi = lift_coloring(&inner, ctx)?;
    let measured = max_ap_discrepancy(&chi);
    let report = ConstructionReport {
        n,
        r_star,
        c_hat,
        kappa: config.kappa,
        seed: config.seed,
        predicted,
        measured,
        base_congruence_max,
    };
    Ok((chi, report))
}

/// Coloring of an arbitrary `X ⊆ Z_n` by hereditary rounds followed by main
/// rounds once at most `phi(n)` elements remain.
pub fn hereditary_coloring(ctx: &ZnContext, x: &[u64], config: &EngineConfig) -> Result<IterateOutcome> {
    let config = EngineConfig { kind: ScheduleKind::Hereditary, ..*config };
    full_color_iterate(ctx, x, &config)
}
