//! Checks the transformer against the dense-matrix oracle in
//! `common/oracle.rs`.

mod common;

use common::oracle::oracle_reward;
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reward_forge::model::forward;

#[test]
fn two_layer_five_token_input_matches_oracle() {
    let cfg = tiny_config(8, 2, 2);
    let p = random_parameters(&cfg, 5);
    let input = reward_forge::model::encode_input(&cfg, "a", "b", None).unwrap();
    assert_eq!(input.len(), 5);
    let (got, want) = (forward(&p, &input).unwrap(), oracle_reward(&p, &input));
    assert!(rel_close(got, want, 1e-6), "{got} vs {want}");
}

#[test]
fn random_inputs_match_oracle() {
    for (cfg_i, cfg) in [tiny_config(8, 1, 2), tiny_config(16, 2, 4), tiny_config(12, 2, 3)].into_iter().enumerate() {
        let p = random_parameters(&cfg, 100 + cfg_i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg_i as u64);
        for i in 0..20 {
            let input = random_input(&cfg, &mut rng, i % 3 != 0);
            let (got, want) = (forward(&p, &input).unwrap(), oracle_reward(&p, &input));
            assert!(rel_close(got, want, 1e-6), "config {cfg_i} input {i}: {got} vs {want}");
        }
    }
}
