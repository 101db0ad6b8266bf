//! Property tests for the environment, hopping and signaling invariants.

use mpmab_core::allocation::hungarian;
use mpmab_core::env::{draw_slot, resolve_slot, ChannelModel, RewardLaw};
use mpmab_core::policies::seqhop_next;
use mpmab_core::radio::Action;
use mpmab_core::signaling::{decode_frame, dequantize, frame_bits, max_level, quantize};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn means_strategy(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, k..=k)
}

proptest! {
    /// Permuting user labels permutes realized outcomes identically: the
    /// environment privileges no user.
    #[test]
    fn collision_symmetry(
        means in means_strategy(6),
        choices in prop::collection::vec(0usize..6, 2..6),
        seed in 0u64..1000,
    ) {
        let model = ChannelModel::homogeneous(means).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = draw_slot(&model, 0, &mut rng);

        let actions: Vec<_> =
            choices.iter().enumerate().map(|(u, &c)| (u, Action::transmit(c))).collect();
        let mut fade_rng = ChaCha8Rng::seed_from_u64(1);
        let ground = resolve_slot(&model, &draws, 0, &actions, &mut fade_rng).unwrap();

        // Rotate the user labels; outcomes must follow their actions.
        let n = choices.len();
        let rotated: Vec<_> = (0..n)
            .map(|u| (u, Action::transmit(choices[(u + 1) % n])))
            .collect();
        let mut fade_rng = ChaCha8Rng::seed_from_u64(1);
        let rotated_ground = resolve_slot(&model, &draws, 0, &rotated, &mut fade_rng).unwrap();
        for u in 0..n {
            let orig = &ground.outcomes[(u + 1) % n];
            let rot = &rotated_ground.outcomes[u];
            prop_assert_eq!(orig.success, rot.success);
            prop_assert_eq!(orig.reward, rot.reward);
            prop_assert_eq!(orig.collided, rot.collided);
        }
        prop_assert_eq!(ground.collision_channels, rotated_ground.collision_channels);
    }

    /// Rewards stay in [0,1] and never exceed what the channels offered:
    /// the per-slot total equals the draws on singly-won vacant channels.
    #[test]
    fn reward_bounds_and_conservation(
        means in means_strategy(5),
        occupancy in prop::collection::vec(0.0f64..=1.0, 5..=5),
        choices in prop::collection::vec(0usize..5, 1..5),
        law_uniform in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let law = if law_uniform {
            RewardLaw::Uniform { half_width: 0.2 }
        } else {
            RewardLaw::Bernoulli
        };
        let model = ChannelModel::new(vec![means], occupancy, law).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = draw_slot(&model, 0, &mut rng);
        let actions: Vec<_> =
            choices.iter().enumerate().map(|(u, &c)| (u, Action::transmit(c))).collect();
        let ground = resolve_slot(&model, &draws, 0, &actions, &mut rng).unwrap();

        let mut winners_total = 0.0;
        for c in 0..5 {
            if ground.transmitters_on(c) == 1 && !ground.pu_occupied[c] {
                winners_total += ground.reward_draws[c];
            }
        }
        let realized: f64 = ground.outcomes.iter().map(|o| o.reward).sum();
        for o in &ground.outcomes {
            prop_assert!((0.0..=1.0).contains(&o.reward));
        }
        prop_assert!(realized <= winners_total + 1e-12);
        if ground.pu_interference_events == 0 {
            prop_assert!((realized - winners_total).abs() < 1e-12);
        }
    }

    /// Users on distinct channels stay distinct forever under round-robin
    /// hopping, and each visits every channel equally often over K slots.
    #[test]
    fn sequential_hop_preserves_orthogonality(
        k in 2usize..12,
        picks in prop::collection::vec(0usize..12, 1..8),
        steps in 1usize..60,
    ) {
        let mut channels: Vec<usize> = picks.iter().map(|p| p % k).collect();
        channels.sort_unstable();
        channels.dedup();
        let start = channels.clone();
        for _ in 0..steps {
            for c in channels.iter_mut() {
                *c = seqhop_next(*c, k);
            }
            let mut seen = channels.clone();
            seen.sort_unstable();
            seen.dedup();
            prop_assert_eq!(seen.len(), channels.len(), "orthogonality lost");
        }
        if steps % k == 0 {
            prop_assert_eq!(&channels, &start);
        }
    }

    /// Quantize/emit/decode is the identity on quantized rows, and the
    /// end-to-end error stays within the quantization bound.
    #[test]
    fn signaling_roundtrip(
        means in prop::collection::vec(0.0f64..=1.0, 1..16),
        bits in 1u8..=16,
    ) {
        let q = quantize(&means, bits).unwrap();
        for &level in &q {
            prop_assert!(level <= max_level(bits));
        }
        let frame = frame_bits(&q, bits).unwrap();
        prop_assert_eq!(frame.len(), means.len() * (bits as usize + 1));
        let decoded = decode_frame(&frame, means.len(), bits).unwrap();
        prop_assert_eq!(&decoded, &q);
        let bound = 0.5 / max_level(bits) as f64 + 1e-12;
        for (m, d) in means.iter().zip(dequantize(&decoded, bits)) {
            prop_assert!((m - d).abs() <= bound);
        }
    }

    /// A flipped frame bit never decodes silently: parity flags the word.
    #[test]
    fn signaling_detects_single_bit_flips(
        means in prop::collection::vec(0.0f64..=1.0, 1..8),
        bits in 2u8..=10,
        flip in any::<prop::sample::Index>(),
    ) {
        let q = quantize(&means, bits).unwrap();
        let mut frame = frame_bits(&q, bits).unwrap();
        let at = flip.index(frame.len());
        frame[at] = !frame[at];
        prop_assert!(decode_frame(&frame, means.len(), bits).is_err());
    }

    /// The matching value dominates every injective assignment, and scaling
    /// all weights by a positive constant leaves the argmax unchanged.
    #[test]
    fn matching_dominance_and_scale_equivariance(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 4..=4), 1..=4),
        scale in 0.1f64..50.0,
    ) {
        let best = hungarian(&rows).unwrap();
        // Sampled injective assignments never beat it.
        let n = rows.len();
        let mut assignment: Vec<usize> = (0..n).collect();
        for _ in 0..16 {
            assignment.rotate_left(1);
            let value: f64 = assignment.iter().enumerate().map(|(u, &c)| rows[u][c]).sum();
            prop_assert!(value <= best.value + 1e-9);
        }
        let scaled: Vec<Vec<f64>> =
            rows.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();
        let scaled_best = hungarian(&scaled).unwrap();
        prop_assert_eq!(best.channel_of_user, scaled_best.channel_of_user);
    }
}
