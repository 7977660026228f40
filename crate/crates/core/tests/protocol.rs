mod common;

use common::{protocol, worlds};

#[test]
fn episode_score_hand_cases() {
    protocol::episode_score_oracles().unwrap();
}

#[test]
fn episode_score_agrees_with_restated_rule() {
    protocol::episode_score_matches_oracle(1000).unwrap();
}

#[test]
fn score_never_drops_before_a_fatal_step() {
    let scored = protocol::score_monotonicity(&[worlds::lab()], 1000).unwrap();
    assert!(scored > 0, "no random sequence scored; the property was never exercised");
}
