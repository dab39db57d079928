//! Fixed-point big-integer iteration for expanding interval maps.
//!
//! A state `x` in `[0,1]` is held as `X / 2^p`. Each step is computed exactly
//! and then truncated to the precision still needed for the remaining
//! iterations: an error introduced before step `j` is amplified by at most
//! `slope^(n-1-j)` by the end of the orbit, so keeping
//! `64 + (n-1-j) * log2(slope)` bits bounds every emitted point's error by a
//! small multiple of `2^-64`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Guard bits kept beyond what the emitted doubles need.
pub const GUARD_BITS: u64 = 64;

/// A polynomial map of `[0,1]` evaluated in exact integer arithmetic.
#[derive(Clone, Debug)]
pub(crate) enum PreciseMap {
    /// `x -> k x (1 - x)`
    Logistic { mantissa: BigUint, exponent: i64 },
    /// `x -> 1 - k x (1 - x)`
    FoldedQuadratic { mantissa: BigUint, exponent: i64 },
    /// `x -> b x mod 1`
    Times { base: BigUint },
}

/// `v = m * 2^e` exactly, `m` odd (or zero).
pub(crate) fn decompose(v: f64) -> (u64, i64) {
    debug_assert!(v >= 0.0 && v.is_finite());
    if v == 0.0 {
        return (0, 0);
    }
    let bits = v.to_bits();
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut e) = if exp_field == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_field - 1075)
    };
    let tz = m.trailing_zeros();
    m >>= tz;
    e += tz as i64;
    (m, e)
}

impl PreciseMap {
    pub(crate) fn logistic(k: f64) -> Self {
        let (m, e) = decompose(k);
        PreciseMap::Logistic { mantissa: BigUint::from(m), exponent: e }
    }

    pub(crate) fn folded_quadratic(k: f64) -> Self {
        let (m, e) = decompose(k);
        PreciseMap::FoldedQuadratic { mantissa: BigUint::from(m), exponent: e }
    }

    pub(crate) fn times(base: u64) -> Self {
        PreciseMap::Times { base: BigUint::from(base) }
    }

    /// One step from precision `bits` to precision `new_bits <= bits`.
    fn step(&self, x: &BigUint, bits: u64, new_bits: u64) -> BigUint {
        debug_assert!(new_bits <= bits);
        let one_new = BigUint::one() << new_bits;
        match self {
            PreciseMap::Logistic { mantissa, exponent }
            | PreciseMap::FoldedQuadratic { mantissa, exponent } => {
                let one = BigUint::one() << bits;
                let complement = &one - x;
                let prod = mantissa * x * complement;
                // prod / 2^(2 bits) * 2^exponent, rescaled to new_bits
                let shift = 2 * bits as i64 - new_bits as i64 - exponent;
                let mut v = if shift >= 0 { prod >> shift as u64 } else { prod << (-shift) as u64 };
                if v > one_new {
                    v = one_new.clone();
                }
                match self {
                    PreciseMap::FoldedQuadratic { .. } => one_new - v,
                    _ => v,
                }
            }
            PreciseMap::Times { base } => {
                let mask = (BigUint::one() << bits) - BigUint::one();
                let v = (base * x) & mask;
                v >> (bits - new_bits)
            }
        }
    }
}

/// A real in `[0,1]` as `value / 2^bits`.
#[derive(Clone, Debug)]
pub struct FixedReal {
    value: BigUint,
    bits: u64,
}

impl FixedReal {
    /// Exact conversion of a double in `[0,1]`, truncated to `bits` if needed.
    pub fn from_f64(x: f64, bits: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::input(format!("fixed-point seed {x} outside [0,1]")));
        }
        let (m, e) = decompose(x);
        let m = BigUint::from(m);
        let shift = bits as i64 + e;
        let value = if shift >= 0 { m << shift as u64 } else { m >> (-shift) as u64 };
        Ok(FixedReal { value, bits })
    }

    /// Parse a decimal literal such as `0.18825509907063323...`, truncated to `bits`.
    pub fn from_decimal(s: &str, bits: u64) -> Result<Self> {
        let s = s.trim();
        let (int_part, frac_part) = match s.split_once('.') {
            Some((a, b)) => (a, b),
            None => (s, ""),
        };
        let digits_ok = |t: &str| t.chars().all(|c| c.is_ascii_digit());
        if !digits_ok(int_part) || !digits_ok(frac_part) || (int_part.is_empty() && frac_part.is_empty()) {
            return Err(Error::input(format!("malformed decimal seed {s:?}")));
        }
        let int_val: u64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| Error::input("seed too large"))? };
        if int_val > 1 {
            return Err(Error::input(format!("decimal seed {s} outside [0,1]")));
        }
        let numerator = BigUint::parse_bytes(format!("{int_part}{frac_part}").trim_start_matches('0').as_bytes(), 10)
            .unwrap_or_else(BigUint::zero);
        let denominator = BigUint::from(10u32).pow(frac_part.len() as u32);
        let value = (numerator << bits) / denominator;
        let one = BigUint::one() << bits;
        if value > one {
            return Err(Error::input(format!("decimal seed {s} outside [0,1]")));
        }
        Ok(FixedReal { value, bits })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Nearest-below double (the truncation error is far below one ulp).
    pub fn to_f64(&self) -> f64 {
        let top: BigUint = if self.bits >= 64 {
            &self.value >> (self.bits - 64)
        } else {
            &self.value << (64 - self.bits)
        };
        let top = top.to_u128().unwrap_or(1u128 << 64);
        top as f64 / 18446744073709551616.0
    }

    fn reduce(&mut self, bits: u64) {
        if bits < self.bits {
            self.value >>= self.bits - bits;
            self.bits = bits;
        }
    }
}

/// Lazily emits `f^j(x0)` for `j = 0..len`, tapering the working precision.
pub(crate) struct PreciseOrbit {
    map: PreciseMap,
    state: FixedReal,
    index: usize,
    len: usize,
    log2_slope: f64,
}

impl PreciseOrbit {
    pub(crate) fn new(map: PreciseMap, mut seed: FixedReal, len: usize, slope: f64) -> Self {
        let log2_slope = slope.log2().max(0.0);
        let need = bits_needed(log2_slope, len, 0);
        seed.reduce(need);
        PreciseOrbit { map, state: seed, index: 0, len, log2_slope }
    }
}

/// Bits required for the state after `done` steps of a `len`-point orbit.
fn bits_needed(log2_slope: f64, len: usize, done: usize) -> u64 {
    let remaining = len.saturating_sub(1 + done) as f64;
    GUARD_BITS + (remaining * log2_slope).ceil() as u64
}

impl Iterator for PreciseOrbit {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.index >= self.len {
            return None;
        }
        let out = self.state.to_f64();
        self.index += 1;
        if self.index < self.len {
            let new_bits = bits_needed(self.log2_slope, self.len, self.index).min(self.state.bits);
            let v = self.map.step(&self.state.value, self.state.bits, new_bits);
            self.state = FixedReal { value: v, bits: new_bits };
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = self.len - self.index;
        (r, Some(r))
    }
}

/// Minimal precision for `iterations` points of a map with the given slope bound.
pub fn required_bits(slope: f64, iterations: usize) -> u64 {
    GUARD_BITS + (iterations as f64 * slope.log2().max(0.0)).ceil() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decompose_roundtrips() {
        for v in [4.0, 3.7, 0.1, 1.0, 2.0f64.powi(-60), 3.0] {
            let (m, e) = decompose(v);
            assert_eq!(m as f64 * 2f64.powi(e as i32), v);
        }
    }

    #[test]
    fn fixed_from_f64_is_exact() {
        let x = FixedReal::from_f64(0.3, 200).unwrap();
        assert_eq!(x.to_f64(), 0.3);
        let one = FixedReal::from_f64(1.0, 100).unwrap();
        assert_eq!(one.to_f64(), 1.0);
    }

    #[test]
    fn decimal_seed_parsing() {
        let x = FixedReal::from_decimal("0.25", 80).unwrap();
        assert_eq!(x.to_f64(), 0.25);
        let x = FixedReal::from_decimal("1", 80).unwrap();
        assert_eq!(x.to_f64(), 1.0);
        assert!(FixedReal::from_decimal("1.5", 80).is_err());
        assert!(FixedReal::from_decimal("0.x", 80).is_err());
    }

    #[test]
    fn logistic_fixed_point_stays_put() {
        let seed = FixedReal::from_f64(0.5, required_bits(2.0, 50)).unwrap();
        let orbit: Vec<f64> = PreciseOrbit::new(PreciseMap::logistic(2.0), seed, 50, 2.0).collect();
        assert!(orbit.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn times_three_matches_integer_arithmetic() {
        // x0 = 1/2^10 under x -> 3x mod 1 is 3^k / 2^10 mod 1
        let seed = FixedReal::from_f64(1.0 / 1024.0, required_bits(3.0, 20)).unwrap();
        let orbit: Vec<f64> = PreciseOrbit::new(PreciseMap::times(3), seed, 20, 3.0).collect();
        let mut num: u64 = 1;
        for x in orbit {
            assert_eq!(x, num as f64 / 1024.0);
            num = (num * 3) % 1024;
        }
    }
}
