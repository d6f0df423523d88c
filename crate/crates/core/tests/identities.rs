use ibo_core::info::{conditional_mutual_information, entropy, mutual_information};
use ibo_core::sampling::{self, rng_for, WorldLimits};
use ibo_core::world::{FUTURE_AXIS, PAST_AXIS};
use proptest::prelude::*;

fn joint_for(seed: u64) -> ibo_core::FullJoint {
    let mut rng = rng_for(seed);
    let world = sampling::world(&mut rng, WorldLimits::default());
    let k = 1 + (seed % 4) as usize;
    let enc = sampling::encoder(&mut rng, &world, k);
    world.build_joint(&enc).unwrap()
}

fn future_axes(fj: &ibo_core::FullJoint) -> Vec<&'static str> {
    if fj.world().future_size() > 0 {
        vec![FUTURE_AXIS]
    } else {
        vec![]
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chain_rule_and_markov(seed in any::<u64>()) {
        let fj = joint_for(seed);
        let j = fj.table();
        let fut = future_axes(&fj);
        let mut both = vec![PAST_AXIS];
        both.extend(&fut);
        let i_both = mutual_information(j, &["t"], &both).unwrap().nats();
        let i_p = mutual_information(j, &["t"], &[PAST_AXIS]).unwrap().nats();
        let i_f = mutual_information(j, &["t"], &fut).unwrap().nats();
        let i_p_f = conditional_mutual_information(j, &["t"], &[PAST_AXIS], &fut).unwrap().nats();
        let i_f_p = conditional_mutual_information(j, &["t"], &fut, &[PAST_AXIS]).unwrap().nats();
        // I(t;x_F,x_P) = I(t;x_F) + I(t;x_P|x_F) = I(t;x_P) + I(t;x_F|x_P)
        prop_assert!((i_both - (i_f + i_p_f)).abs() < 1e-10);
        prop_assert!((i_both - (i_p + i_f_p)).abs() < 1e-10);
        prop_assert!((i_both - i_p).abs() < 1e-10);
        prop_assert!(i_f_p.abs() < 1e-10);
        // I(t;x_F) = I(t;x_P) - I(t;x_P|x_F)
        prop_assert!((i_f - (i_p - i_p_f)).abs() < 1e-10);
    }

    #[test]
    fn data_processing(seed in any::<u64>()) {
        let fj = joint_for(seed);
        let j = fj.table();
        let fut = future_axes(&fj);
        let i_tf = mutual_information(j, &["t"], &fut).unwrap().nats();
        let i_tp = mutual_information(j, &["t"], &[PAST_AXIS]).unwrap().nats();
        let i_pf = mutual_information(j, &[PAST_AXIS], &fut).unwrap().nats();
        let h_t = entropy(&j.marginalize(&["t"]).unwrap()).unwrap().nats();
        prop_assert!(i_tf <= i_tp + 1e-12);
        prop_assert!(i_tf <= i_pf + 1e-12);
        prop_assert!(i_tp <= h_t + 1e-12);
        prop_assert!(i_tf >= 0.0 && i_tp >= 0.0);
    }

    #[test]
    fn mi_symmetry_is_bitwise(seed in any::<u64>()) {
        let fj = joint_for(seed);
        let j = fj.table();
        let a = mutual_information(j, &["t"], &[PAST_AXIS]).unwrap();
        let b = mutual_information(j, &[PAST_AXIS], &["t"]).unwrap();
        prop_assert_eq!(a.nats().to_bits(), b.nats().to_bits());
    }

    #[test]
    fn past_future_matches_joint(seed in any::<u64>()) {
        let fj = joint_for(seed);
        let a = fj.past_future().unwrap();
        let b = fj.world().past_future();
        for (x, y) in a.joint.iter().zip(&b.joint) {
            prop_assert!((x - y).abs() < 1e-14);
        }
        let r = fj.info_report().unwrap();
        let (d1, d2) = fj.decomposition_check().unwrap();
        prop_assert!(d1 < 1e-10 && d2 < 1e-10);
        prop_assert!(r.i_t_xp.nats() <= r.h_xp.nats() + 1e-12);
    }
}
