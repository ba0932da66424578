use opmul_core::modmul::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dv(d: &[u64]) -> DigitVector {
    DigitVector::new(d.to_vec()).unwrap()
}

fn ctx() -> MontgomeryContext {
    montgomery_setup(36057).unwrap()
}

fn random_instance(rng: &mut ChaCha8Rng) -> (u128, u128, u128) {
    let m = (rng.gen_range(3u128..1 << 16)) | 1;
    (rng.gen_range(0..m), rng.gen_range(0..m), m)
}

#[test]
fn worked_example_setup() {
    let c = ctx();
    assert_eq!((c.r, c.m_prime, c.r_inv), (131072, 52375, 14408));
    assert_eq!(c.to_montgomery(28510), 23411);
    // the operand that maps to 31495 and yields 23831 is 38672
    assert_eq!(c.to_montgomery(38672), 31495);
    assert_eq!(c.to_montgomery(0), 0);
    assert_eq!(c.from_montgomery(31036), 23831);
    assert_eq!(c.from_montgomery(1040632), 23831);
    assert_eq!(28510u128 * 38672 % 36057, 23831);
}

#[test]
fn worked_example_exact_chain() {
    let t = montgomery_mul_exact(23411, 31495, &ctx()).unwrap();
    assert_eq!(t.k1, 737329445);
    assert_eq!(t.k2, 38617629681875);
    assert_eq!(t.k3, 92371);
    assert_eq!(t.k4, 3330621147);
    assert_eq!(t.k5, 4067950592);
    assert_eq!(t.c_bar, 31036);
}

#[test]
fn worked_example_hilo_chain() {
    let t = montgomery_mul_hilo(23411, 31495, &ctx()).unwrap();
    // 737329445 mod 2^17 is 49445; 49445 * 52375 = 2589681875
    assert_eq!(t.k1_lo, 49445);
    assert_eq!(t.k1_hi, 22501);
    assert_eq!(t.k2, 2589681875);
    assert_eq!(t.k3, 92371);
    assert_eq!(t.k4_hi, 101642);
    assert_eq!(t.k5_hi, 124144);
    assert_eq!(t.c_bar, 31036);
}

#[test]
fn worked_example_conv_chain() {
    let t = montgomery_mul_conv(23411, 31495, &ctx(), 6).unwrap();
    assert_eq!(t.a_bar, dv(&[1, 0, 1, 1, 0, 1, 1, 0, 1, 1, 1, 0, 0, 1, 1]));
    assert_eq!(t.b_bar, dv(&[1, 1, 1, 1, 0, 1, 1, 0, 0, 0, 0, 0, 1, 1, 1]));
    assert_eq!(t.m, dv(&[1, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 1, 1, 0, 0, 1]));
    assert_eq!(t.m_prime, dv(&[1, 1, 0, 0, 1, 1, 0, 0, 1, 0, 0, 1, 0, 1, 1, 1]));
    let want: [(&[u64], u128); 8] = [
        (
            &[1, 1, 2, 3, 2, 4, 4, 3, 5, 4, 4, 5, 4, 4, 6, 6, 5, 3, 3, 4, 3, 2, 3, 2, 1, 1, 2, 2, 1],
            737329445,
        ),
        (&[1, 1, 2, 3, 2, 4, 4, 3, 5, 4, 4, 5, 4, 4, 6, 6, 5, 3, 3], 720045),
        (&[4, 4, 6, 6, 5, 3, 3, 4, 3, 2, 3, 2, 1, 1, 2, 2, 1], 573733),
        (
            &[
                4, 8, 10, 12, 15, 16, 16, 19, 22, 17, 17, 22, 19, 20, 25, 32, 28, 25, 24, 20, 16, 15,
                13, 11, 9, 8, 6, 5, 5, 5, 3, 1,
            ],
            30049265875,
        ),
        (&[32, 28, 25, 24, 20, 16, 15, 13, 11, 9, 8, 6, 5, 5, 5, 3, 1], 3762387),
        (
            &[
                32, 28, 25, 24, 52, 76, 68, 62, 87, 105, 92, 115, 133, 114, 102, 121, 100, 86, 79,
                66, 51, 43, 37, 30, 23, 19, 14, 9, 6, 5, 3, 1,
            ],
            135660388059,
        ),
        (
            &[
                32, 28, 25, 24, 52, 76, 68, 62, 87, 105, 92, 115, 133, 114, 102, 121, 100, 86, 79,
                66, 51, 43,
            ],
            132480817,
        ),
        (
            &[
                32, 28, 25, 25, 53, 78, 71, 64, 91, 109, 95, 120, 137, 118, 107, 126, 104, 92, 85,
                71, 54, 46,
            ],
            133200926,
        ),
    ];
    for ((name, got), (digits, value)) in t.named().into_iter().zip(want) {
        assert_eq!(got, &dv(digits), "{name}");
        assert_eq!(got.evaluate(), value, "{name}");
    }
    assert_eq!(t.dropped, 10);
    assert_eq!(t.carry_weight(), 6);
    assert_eq!(t.c_bar, 1040632);
    assert_eq!(ctx().from_montgomery(t.c_bar), 23831);
}

#[test]
fn conv_report_lists_chain() {
    let t = montgomery_mul_conv(23411, 31495, &ctx(), 6).unwrap();
    let r = t.report();
    assert!(r.contains("k1 = (1,1,2,3,2,4,4,3,5,4,4,5,4,4,6,6,5,3,3,4,3,2,3,2,1,1,2,2,1) = 737329445\n"));
    assert!(r.contains("k5_hi = (32,28,25,25,53,78,71,64,91,109,95,120,137,118,107,126,104,92,85,71,54,46) = 133200926\n"));
    assert!(r.ends_with("c_bar = 1040632\n"));
}

#[test]
fn exact_matches_modular_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let (a, b, m) = random_instance(&mut rng);
        let c = montgomery_setup(m).unwrap();
        let got = montgomery_mul_exact(a, b, &c).unwrap().c_bar;
        assert_eq!(got, a * b % m * c.r_inv % m, "{a} {b} {m}");
    }
}

#[test]
fn round_trip_and_hilo_agree_with_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10_000 {
        let (a, b, m) = random_instance(&mut rng);
        let c = montgomery_setup(m).unwrap();
        let (ab, bb) = (c.to_montgomery(a), c.to_montgomery(b));
        let exact = montgomery_mul_exact(ab, bb, &c).unwrap().c_bar;
        assert_eq!(c.from_montgomery(exact), a * b % m);
        assert_eq!(montgomery_mul_hilo(ab, bb, &c).unwrap().c_bar, exact, "{a} {b} {m}");
    }
}

#[test]
fn conv_digits_stay_within_twelve_stops() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..2000 {
        let (a, b, m) = random_instance(&mut rng);
        let c = montgomery_setup(m).unwrap();
        let t = montgomery_mul_conv(a, b, &c, 6).unwrap();
        assert!(t.max_digit() <= 1 << 12);
        for (name, v) in t.named() {
            assert!(v.try_evaluate().is_some(), "{name}");
        }
    }
}

#[test]
fn exhaustive_small_convolutions() {
    for x in 0u128..256 {
        for y in 0u128..256 {
            let p = digit_convolve(&to_digits(x as i128).unwrap(), &to_digits(y as i128).unwrap());
            assert_eq!(p.evaluate(), x * y);
        }
    }
}
