use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use streamsig::oracle::{aux_bounds, brute_signature, decode, realize};
use streamsig::testing::{random_continuous, random_interval, random_stream, StreamShape};
use streamsig::{ComposeMode, Embedder, EmbeddingConfig, LieElement};

fn shape(rng: &mut ChaCha8Rng, integer_valued: bool) -> StreamShape {
    StreamShape {
        horizon: if integer_valued { 4.0 } else { rng.random_range(1.0..5.0) },
        d_disc: rng.random_range(1..=3),
        extra_cont: rng.random_range(0..=1),
        with_time: true,
        max_events: 10,
        integer_valued,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn brute_force_matches_embedding(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sh = shape(&mut rng, false);
        let s = random_stream(&mut rng, &sh);
        let c = random_continuous(&mut rng, &sh);
        let config = EmbeddingConfig::new(rng.random_range(1..=3), rng.random_bool(0.5));
        let path = realize(&s, &c, &config).unwrap();
        let emb = Embedder::new(&s, &c, &config).unwrap();
        for _ in 0..3 {
            let (a, b) = random_interval(&mut rng, s.horizon());
            let (u, v) = aux_bounds(&path, a, b).unwrap();
            let brute = brute_signature(&path, u, v, config.depth).unwrap().log().unwrap();
            let brute = LieElement::from_tensor(&brute, emb.basis().clone()).unwrap();
            let phi = emb.interval_log_signature(a, b, ComposeMode::Sequential).unwrap();
            prop_assert!(brute.max_abs_diff(&phi) <= 1e-10);
        }
    }

    #[test]
    fn decode_inverts_realize(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sh = shape(&mut rng, true);
        let s = random_stream(&mut rng, &sh);
        let c = random_continuous(&mut rng, &sh);
        let path = realize(&s, &c, &EmbeddingConfig::new(2, true)).unwrap();
        let (s2, c2) = decode(&path).unwrap();
        prop_assert_eq!(s2.len(), s.len());
        for (x, y) in s.events().iter().zip(s2.events()) {
            prop_assert!((x.t - y.t).abs() <= 1e-12);
            prop_assert_eq!(&x.channels, &y.channels);
            prop_assert_eq!(&x.values, &y.values);
        }
        prop_assert!(c.max_abs_diff(&c2, s.horizon()) <= 1e-12);
    }

    #[test]
    fn event_durations_do_not_matter(seed in any::<u64>(), fraction in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sh = shape(&mut rng, false);
        let s = random_stream(&mut rng, &sh);
        let c = random_continuous(&mut rng, &sh);
        let config = EmbeddingConfig::new(rng.random_range(1..=3), rng.random_bool(0.5));
        let path = realize(&s, &c, &config).unwrap();
        let split = path.reparameterize_events(fraction);
        for _ in 0..3 {
            let (a, b) = random_interval(&mut rng, s.horizon());
            let (u, v) = aux_bounds(&path, a, b).unwrap();
            let (u2, v2) = aux_bounds(&split, a, b).unwrap();
            let x = brute_signature(&path, u, v, config.depth).unwrap();
            let y = brute_signature(&split, u2, v2, config.depth).unwrap();
            prop_assert!(x.max_abs_diff(&y) <= 1e-12);
        }
    }
}
