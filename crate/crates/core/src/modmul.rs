//! Montgomery modular multiplication in three flavours: the exact integer
//! form, the high/low split with two guard bits, and the carry-free form that
//! works on unresolved binary digit vectors.

use std::fmt;

use crate::error::{Error, Result};

/// Binary digits, most significant first. Digits may exceed 1 when carries
/// have not been propagated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DigitVector(Vec<u64>);

impl DigitVector {
    pub fn new(digits: Vec<u64>) -> Result<Self> {
        if digits.is_empty() {
            return Err(Error::Config("digit vector must not be empty".into()));
        }
        Ok(Self(digits))
    }

    pub fn zero() -> Self {
        Self(vec![0])
    }

    pub fn digits(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_digit(&self) -> u64 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Left-pads with zeros to `len` digits.
    pub fn padded(&self, len: usize) -> Self {
        if self.0.len() >= len {
            return self.clone();
        }
        let mut d = vec![0; len - self.0.len()];
        d.extend_from_slice(&self.0);
        Self(d)
    }

    /// `sum d_i 2^(len-1-i)`, or `None` on overflow.
    pub fn try_evaluate(&self) -> Option<u128> {
        let mut acc: u128 = 0;
        for &d in &self.0 {
            acc = acc.checked_mul(2)?.checked_add(d as u128)?;
        }
        Some(acc)
    }

    /// # Panics
    /// If the value does not fit in 128 bits.
    pub fn evaluate(&self) -> u128 {
        self.try_evaluate().expect("digit vector value exceeds 128 bits")
    }
}

impl fmt::Display for DigitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        f.write_str(")")
    }
}

/// Binary expansion of a non-negative integer; zero is `(0)`.
pub fn to_digits(x: i128) -> Result<DigitVector> {
    if x < 0 {
        return Err(Error::NegativeValue(x));
    }
    Ok(digits_of(x as u128))
}

pub(crate) fn digits_of(x: u128) -> DigitVector {
    if x == 0 {
        return DigitVector::zero();
    }
    let bits = 128 - x.leading_zeros() as usize;
    DigitVector((0..bits).rev().map(|i| ((x >> i) & 1) as u64).collect())
}

/// Carry-free product: `out_j = sum_i x_i y_{j-i}`, length `|x| + |y| - 1`.
pub fn digit_convolve(x: &DigitVector, y: &DigitVector) -> DigitVector {
    let mut out = vec![0u64; x.len() + y.len() - 1];
    for (i, &a) in x.0.iter().enumerate() {
        if a == 0 {
            continue;
        }
        for (j, &b) in y.0.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    DigitVector(out)
}

/// The `k` lowest-weight digits (the whole vector if it is shorter).
pub fn take_low(v: &DigitVector, k: u32) -> DigitVector {
    let k = k as usize;
    if k >= v.len() {
        return v.clone();
    }
    DigitVector(v.0[v.len() - k..].to_vec())
}

/// Low digits dropped by [`take_high`]: `max(k - overlap - 1, 0)`.
pub fn dropped_digits(k: u32, overlap: u32) -> u32 {
    k.saturating_sub(overlap + 1)
}

/// Digits of weight at least `2^(k - overlap - 1)`, re-based so the lowest kept
/// digit has weight 1. A vector with no digit that heavy yields `(0)`.
pub fn take_high(v: &DigitVector, k: u32, overlap: u32) -> DigitVector {
    let d = dropped_digits(k, overlap) as usize;
    if d >= v.len() {
        return DigitVector::zero();
    }
    DigitVector(v.0[..v.len() - d].to_vec())
}

/// LSB-aligned digit sum plus one unit at weight `2^overlap`.
pub fn digit_add_carry_corrected(u: &DigitVector, v: &DigitVector, overlap: u32) -> DigitVector {
    let len = u.len().max(v.len()).max(overlap as usize + 1);
    let mut out = vec![0u64; len];
    for src in [u, v] {
        let off = len - src.len();
        for (o, &d) in out[off..].iter_mut().zip(&src.0) {
            *o += d;
        }
    }
    out[len - 1 - overlap as usize] += 1;
    DigitVector(out)
}

/// Modulus `m` with `r = 2^k`, `M = -m^{-1} mod r` and `R = r^{-1} mod m`.
///
/// `k` is one more than the bit length of `m`, so `r > 2m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MontgomeryContext {
    pub m: u128,
    pub k: u32,
    pub r: u128,
    pub m_prime: u128,
    pub r_inv: u128,
}

fn mod_inverse(a: u128, n: u128) -> Option<u128> {
    let (mut old_r, mut r) = (a as i128 % n as i128, n as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(n as i128) as u128)
}

impl MontgomeryContext {
    pub fn new(m: u128) -> Result<Self> {
        if m < 3 || m % 2 == 0 || m >= 1 << 32 {
            return Err(Error::UnsupportedModulus(m));
        }
        let k = 128 - m.leading_zeros() + 1;
        let r = 1u128 << k;
        let inv = mod_inverse(m, r).ok_or(Error::UnsupportedModulus(m))?;
        let m_prime = (r - inv) % r;
        let r_inv = mod_inverse(r % m, m).ok_or(Error::UnsupportedModulus(m))?;
        Ok(Self {
            m,
            k,
            r,
            m_prime,
            r_inv,
        })
    }

    pub fn to_montgomery(&self, a: u128) -> u128 {
        (a % self.m) * (self.r % self.m) % self.m
    }

    pub fn from_montgomery(&self, c_bar: u128) -> u128 {
        (c_bar % self.m) * self.r_inv % self.m
    }

    fn check_operands(&self, a: u128, b: u128) -> Result<()> {
        if a >= self.m || b >= self.m {
            return Err(Error::Config(format!(
                "operands must be below the modulus {} (got {a}, {b})",
                self.m
            )));
        }
        Ok(())
    }
}

pub fn montgomery_setup(m: u128) -> Result<MontgomeryContext> {
    MontgomeryContext::new(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactTrace {
    pub k1: u128,
    pub k2: u128,
    pub k3: u128,
    pub k4: u128,
    pub k5: u128,
    pub c_bar: u128,
}

/// `(ab + (abM mod r) m) / r`, reduced into `[0, m)`.
pub fn montgomery_mul_exact(a: u128, b: u128, ctx: &MontgomeryContext) -> Result<ExactTrace> {
    ctx.check_operands(a, b)?;
    let k1 = a * b;
    let k2 = k1 * ctx.m_prime;
    let k3 = k2 & (ctx.r - 1);
    let k4 = k3 * ctx.m;
    let k5 = k1 + k4;
    let mut c_bar = k5 >> ctx.k;
    if c_bar >= ctx.m {
        c_bar -= ctx.m;
    }
    Ok(ExactTrace {
        k1,
        k2,
        k3,
        k4,
        k5,
        c_bar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HiloTrace {
    pub k1: u128,
    pub k1_lo: u128,
    pub k1_hi: u128,
    pub k2: u128,
    pub k3: u128,
    pub k4: u128,
    pub k4_hi: u128,
    pub k5_hi: u128,
    pub c_bar: u128,
}

/// Split form: the high halves keep two extra low bits, and a constant 1
/// stands in for the carry out of the discarded low halves.
pub fn montgomery_mul_hilo(a: u128, b: u128, ctx: &MontgomeryContext) -> Result<HiloTrace> {
    ctx.check_operands(a, b)?;
    let shift = ctx.k - 2;
    let k1 = a * b;
    let k1_lo = k1 & (ctx.r - 1);
    let k1_hi = k1 >> shift;
    let k2 = k1_lo * ctx.m_prime;
    let k3 = k2 & (ctx.r - 1);
    let k4 = k3 * ctx.m;
    let k4_hi = k4 >> shift;
    let k5_hi = k1_hi + k4_hi + 1;
    let mut c_bar = k5_hi >> 2;
    if c_bar >= ctx.m {
        c_bar -= ctx.m;
    }
    Ok(HiloTrace {
        k1,
        k1_lo,
        k1_hi,
        k2,
        k3,
        k4,
        k4_hi,
        k5_hi,
        c_bar,
    })
}

/// Every intermediate of the carry-free variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvTrace {
    pub k: u32,
    pub overlap: u32,
    /// Low digits removed by each `take_high`.
    pub dropped: u32,
    pub a_bar: DigitVector,
    pub b_bar: DigitVector,
    pub m: DigitVector,
    pub m_prime: DigitVector,
    pub k1: DigitVector,
    pub k1_hi: DigitVector,
    pub k1_lo: DigitVector,
    pub k2: DigitVector,
    pub k3: DigitVector,
    pub k4: DigitVector,
    pub k4_hi: DigitVector,
    pub k5_hi: DigitVector,
    pub c_bar: u128,
}

impl ConvTrace {
    /// Weight exponent of the carry unit inside the high parts.
    pub fn carry_weight(&self) -> u32 {
        self.k - 1 - self.dropped
    }

    pub fn named(&self) -> [(&'static str, &DigitVector); 8] {
        [
            ("k1", &self.k1),
            ("k1_hi", &self.k1_hi),
            ("k1_lo", &self.k1_lo),
            ("k2", &self.k2),
            ("k3", &self.k3),
            ("k4", &self.k4),
            ("k4_hi", &self.k4_hi),
            ("k5_hi", &self.k5_hi),
        ]
    }

    pub fn max_digit(&self) -> u64 {
        self.named().iter().map(|(_, v)| v.max_digit()).max().unwrap_or(0)
    }

    /// Line-oriented report, one intermediate per line.
    pub fn report(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("k = {}\noverlap = {}\ndropped = {}\n", self.k, self.overlap, self.dropped));
        for (name, v) in [
            ("a_bar", &self.a_bar),
            ("b_bar", &self.b_bar),
            ("m", &self.m),
            ("M", &self.m_prime),
        ] {
            s.push_str(&format!("{name} = {v} = {}\n", v.evaluate()));
        }
        for (name, v) in self.named() {
            s.push_str(&format!("{name} = {v} = {}\n", v.evaluate()));
        }
        s.push_str(&format!("c_bar = {}\n", self.c_bar));
        s
    }
}

/// Carry-free Montgomery product over digit vectors.
///
/// The result is congruent to `a b R` only when `overlap` absorbs the carries
/// lost with the dropped digits; it may also exceed `m` by a multiple of `m`.
pub fn montgomery_mul_conv(a: u128, b: u128, ctx: &MontgomeryContext, overlap: u32) -> Result<ConvTrace> {
    ctx.check_operands(a, b)?;
    if overlap == 0 {
        return Err(Error::Config("overlap must be at least 1".into()));
    }
    let k = ctx.k;
    let (a_bar, b_bar) = (digits_of(a), digits_of(b));
    let m = digits_of(ctx.m);
    let m_prime = digits_of(ctx.m_prime);
    let dropped = dropped_digits(k, overlap);
    let carry = k - 1 - dropped;

    let k1 = digit_convolve(&a_bar, &b_bar);
    let k1_hi = take_high(&k1, k, overlap);
    let k1_lo = take_low(&k1, k);
    let k2 = digit_convolve(&k1_lo, &m_prime);
    let k3 = take_low(&k2, k);
    let k4 = digit_convolve(&k3, &m);
    let k4_hi = take_high(&k4, k, overlap);
    let k5_hi = digit_add_carry_corrected(&k1_hi, &k4_hi, carry);
    let c_bar = k5_hi.evaluate() >> (carry + 1);
    Ok(ConvTrace {
        k,
        overlap,
        dropped,
        a_bar,
        b_bar,
        m,
        m_prime,
        k1,
        k1_hi,
        k1_lo,
        k2,
        k3,
        k4,
        k4_hi,
        k5_hi,
        c_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dv(d: &[u64]) -> DigitVector {
        DigitVector::new(d.to_vec()).unwrap()
    }

    #[test]
    fn digits_round_trip() {
        assert_eq!(to_digits(5).unwrap(), dv(&[1, 0, 1]));
        assert_eq!(to_digits(0).unwrap(), dv(&[0]));
        assert_eq!(dv(&[1, 2, 1]).evaluate(), 9);
        assert!(matches!(to_digits(-3), Err(Error::NegativeValue(-3))));
        assert!(DigitVector::new(vec![]).is_err());
    }

    #[test]
    fn evaluate_overflow_is_reported() {
        let v = DigitVector(vec![1; 129]);
        assert_eq!(v.try_evaluate(), None);
    }

    #[test]
    fn small_convolution() {
        assert_eq!(digit_convolve(&dv(&[1, 1]), &dv(&[1, 1])), dv(&[1, 2, 1]));
    }

    #[test]
    fn setup_small_moduli() {
        let c = montgomery_setup(3).unwrap();
        assert_eq!((c.k, c.r, c.m_prime, c.r_inv), (3, 8, 5, 2));
        assert!(montgomery_setup(36056).is_err());
        assert!(montgomery_setup(1).is_err());
        assert!(montgomery_setup(1 << 33 | 1).is_err());
    }

    #[test]
    fn setup_matches_brute_force() {
        for m in (3u128..600).step_by(2) {
            let c = montgomery_setup(m).unwrap();
            assert!(c.r > 2 * m && c.r <= 4 * m);
            let mp = (0..c.r).find(|x| (m * x) % c.r == c.r - 1).unwrap();
            let ri = (0..m).find(|x| (c.r * x) % m == 1).unwrap();
            assert_eq!((c.m_prime, c.r_inv), (mp, ri), "m = {m}");
        }
    }

    #[test]
    fn carry_unit_at_weight_zero() {
        assert_eq!(digit_add_carry_corrected(&dv(&[0]), &dv(&[0]), 0), dv(&[1]));
        assert_eq!(digit_add_carry_corrected(&dv(&[0]), &dv(&[0]), 3), dv(&[1, 0, 0, 0]));
    }

    #[test]
    fn take_ops_saturate() {
        let v = dv(&[1, 0, 1]);
        assert_eq!(take_low(&v, 10), v);
        assert_eq!(take_high(&v, 17, 6), dv(&[0]));
        assert_eq!(take_high(&v, 3, 6), v);
    }

    #[test]
    fn zero_operands() {
        let c = montgomery_setup(36057).unwrap();
        assert_eq!(montgomery_mul_exact(0, 1234, &c).unwrap().c_bar, 0);
        assert_eq!(c.from_montgomery(montgomery_mul_hilo(0, 0, &c).unwrap().c_bar), 0);
        let t = montgomery_mul_conv(0, 0, &c, 6).unwrap();
        assert_eq!(t.c_bar, 0);
        for (_, v) in t.named().iter().take(7) {
            assert_eq!(v.evaluate(), 0);
        }
    }

    #[test]
    fn operands_must_be_reduced() {
        let c = montgomery_setup(9).unwrap();
        assert!(montgomery_mul_exact(9, 1, &c).is_err());
        assert!(montgomery_mul_conv(1, 1, &c, 0).is_err());
    }

    fn small_vec() -> impl Strategy<Value = DigitVector> {
        prop::collection::vec(0u64..8, 1..12).prop_map(DigitVector)
    }

    proptest! {
        #[test]
        fn convolution_evaluates_to_product(x in small_vec(), y in small_vec()) {
            prop_assert_eq!(digit_convolve(&x, &y).evaluate(), x.evaluate() * y.evaluate());
            prop_assert_eq!(digit_convolve(&x, &y), digit_convolve(&y, &x));
        }

        #[test]
        fn convolution_associates(x in small_vec(), y in small_vec(), z in small_vec()) {
            let l = digit_convolve(&digit_convolve(&x, &y), &z);
            let r = digit_convolve(&x, &digit_convolve(&y, &z));
            prop_assert_eq!(l.evaluate(), r.evaluate());
        }

        #[test]
        fn carry_corrected_sum(x in small_vec(), y in small_vec(), ov in 0u32..10) {
            let s = digit_add_carry_corrected(&x, &y, ov);
            prop_assert_eq!(s.evaluate(), x.evaluate() + y.evaluate() + (1u128 << ov));
        }

        #[test]
        fn high_and_low_share_overlap(x in prop::collection::vec(0u64..4, 20..40), k in 8u32..18, ov in 0u32..7) {
            let v = DigitVector(x);
            let hi = take_high(&v, k, ov);
            let lo = take_low(&v, k);
            let d = dropped_digits(k, ov) as usize;
            prop_assert_eq!(hi.len() + d, v.len());
            prop_assert_eq!(lo.len(), k as usize);
            prop_assert_eq!(hi.len() + lo.len() - v.len(), (k - d as u32) as usize);
        }

        #[test]
        fn digits_round_trip_random(x in 0i128..i128::MAX) {
            let v = to_digits(x).unwrap();
            prop_assert!(v.digits().iter().all(|&d| d <= 1));
            prop_assert_eq!(v.evaluate(), x as u128);
        }
    }
}
