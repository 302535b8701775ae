//! Exact arithmetic over Z_n: factorization, divisors, multiplicative
//! functions and the CRT isomorphism between the prime-power components
//! and Z_n.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest modulus accepted by [`ZnContext::new`]. Trial division stays
/// below 2^24 steps at this size.
pub const MAX_MODULUS: u64 = 1 << 48;

/// `gcd(0, n) = n`, which gives the zero frequency its full weight.
pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Prime factorization by trial division, primes ascending.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn totient(n: u64) -> u64 {
    factorize(n)
        .iter()
        .fold(n, |acc, &(p, _)| acc / p * (p - 1))
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && factorize(n) == [(n, 1)]
}

pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    (lo.max(2)..=hi).filter(|&p| is_prime(p)).collect()
}

/// Inverse of `a` modulo `m`, if `gcd(a, m) = 1`. `m = 1` yields 0.
pub fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    (old_r == 1).then(|| old_s.rem_euclid(m as i128) as u64)
}

fn divisors_from(factors: &[(u64, u32)]) -> Vec<u64> {
    let mut divs = vec![1u64];
    for &(p, e) in factors {
        let len = divs.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                divs.push(divs[i] * pk);
            }
        }
    }
    divs.sort_unstable();
    divs
}

/// Sorted divisors of `n` (`n >= 1`).
pub fn divisors(n: u64) -> Vec<u64> {
    divisors_from(&factorize(n))
}

/// A modulus together with its factorization and multiplicative invariants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZnContext {
    n: u64,
    factors: Vec<(u64, u32)>,
    divisors: Vec<u64>,
    phi: u64,
    /// `p_i^{alpha_i}` per factor.
    #[serde(skip)]
    components: Vec<u64>,
    /// CRT basis: `e_i ≡ 1 (mod q_i)`, `e_i ≡ 0 (mod q_j)` for `j != i`.
    #[serde(skip)]
    basis: Vec<u64>,
}

impl ZnContext {
    pub fn new(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroModulus);
        }
        if n > MAX_MODULUS {
            return Err(Error::ModulusTooLarge { n, limit: MAX_MODULUS });
        }
        let factors = factorize(n);
        let divisors = divisors_from(&factors);
        let phi = factors.iter().fold(n, |acc, &(p, _)| acc / p * (p - 1));
        let components: Vec<u64> = factors.iter().map(|&(p, e)| p.pow(e)).collect();
        let basis = components
            .iter()
            .map(|&q| {
                let rest = n / q;
                let inv = mod_inverse(rest % q, q).expect("coprime CRT components");
                ((rest as u128 * inv as u128) % n as u128) as u64
            })
            .collect();
        Ok(Self { n, factors, divisors, phi, components, basis })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn divisors(&self) -> &[u64] {
        &self.divisors
    }

    pub fn phi(&self) -> u64 {
        self.phi
    }

    pub fn omega(&self) -> usize {
        self.factors.len()
    }

    /// d(n), the number of divisors.
    pub fn num_divisors(&self) -> usize {
        self.divisors.len()
    }

    /// The prime-power moduli `p_i^{alpha_i}`, in factor order.
    pub fn components(&self) -> &[u64] {
        &self.components
    }

    /// `Some((p, k))` when `n = p^k` with `k >= 1`.
    pub fn prime_power(&self) -> Option<(u64, u32)> {
        match self.factors.as_slice() {
            [(p, k)] => Some((*p, *k)),
            _ => None,
        }
    }

    pub fn divides(&self, r: u64) -> bool {
        r != 0 && self.n.is_multiple_of(r)
    }

    /// psi_n: the residue tuple `(t_1, .., t_k)` to the unique `x` in Z_n
    /// with `x ≡ t_i (mod p_i^{alpha_i})`.
    pub fn crt_combine(&self, residues: &[u64]) -> Result<u64> {
        if residues.len() != self.components.len() {
            return Err(Error::ResidueCount {
                expected: self.components.len(),
                got: residues.len(),
            });
        }
        let n = self.n as u128;
        let mut x = 0u128;
        for (index, ((&t, &q), &e)) in residues
            .iter()
            .zip(&self.components)
            .zip(&self.basis)
            .enumerate()
        {
            if t >= q {
                return Err(Error::ResidueOutOfRange { index, value: t, modulus: q });
            }
            x = (x + t as u128 * e as u128) % n;
        }
        Ok(x as u64)
    }

    /// Inverse of [`crt_combine`](Self::crt_combine).
    pub fn crt_split(&self, x: u64) -> Result<Vec<u64>> {
        if x >= self.n {
            return Err(Error::ElementOutOfRange { x, n: self.n });
        }
        Ok(self.components.iter().map(|&q| x % q).collect())
    }

    /// Unchecked CRT combination for hot loops; residues must be in range.
    pub(crate) fn combine_unchecked(&self, residues: &[u64]) -> u64 {
        let n = self.n as u128;
        residues
            .iter()
            .zip(&self.basis)
            .fold(0u128, |acc, (&t, &e)| (acc + t as u128 * e as u128) % n) as u64
    }
}
