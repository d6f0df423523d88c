use ibo_core::bounds::VariationalPair;
use ibo_core::engine::{grid_oracle, IboSpec, OptimizerOptions};
use ibo_core::sampling::rng_for;
use ibo_core::trained::{
    argmin_encoder, dataset_losses, generalization_report, gibbs_encoder, gibbs_posterior,
    optimize_trained_ibo, sigma_for_all, theorem_battery, trained_variational_bound, Feasibility,
    LossTable, SigmaMethod,
};
use ibo_core::{Alphabet, GenerativeWorld, Kernel, ProbTable};

#[test]
fn battery_has_no_violations() {
    let cases = theorem_battery(2024, 250).unwrap();
    assert_eq!(cases.len(), 250);
    for c in &cases {
        assert!(c.report.holds, "seed {}: {:?}", c.seed, c.report);
    }
}

#[test]
fn cgf_sigma_never_exceeds_hoeffding() {
    for c in 0..20u64 {
        let mut rng = rng_for(c);
        let w = ibo_core::sampling::world(&mut rng, Default::default());
        let lt = LossTable::new(
            Alphabet::indexed("theta", 3).unwrap(),
            w.x_axis().clone(),
            (0..3 * w.x_axis().size()).map(|i| ((i * 7 + c as usize) % 5) as f64 / 4.0).collect(),
        )
        .unwrap();
        let h = sigma_for_all(&lt, &w, SigmaMethod::HoeffdingRange).unwrap().sigma;
        let s = sigma_for_all(&lt, &w, SigmaMethod::CgfScan).unwrap().sigma;
        assert!(s <= h + 1e-9, "{s} > {h}");
    }
}

#[test]
fn gibbs_expected_loss_decreases_with_alpha() {
    let w = GenerativeWorld::model_a().with_train_size(3).unwrap();
    let lt = LossTable::new(
        Alphabet::indexed("theta", 3).unwrap(),
        w.x_axis().clone(),
        vec![0.0, 1.0, 1.0, 0.0, 0.4, 0.4],
    )
    .unwrap();
    let prior = ProbTable::new(vec![lt.theta_axis().clone()], vec![0.2, 0.3, 0.5]).unwrap();
    let losses = dataset_losses(&lt, &w).unwrap();
    for d in 0..w.n_datasets() {
        let xs = w.decode_dataset(d, 3);
        let mut prev = f64::INFINITY;
        for i in 0..60 {
            let alpha = 0.05 * i as f64;
            let p = gibbs_posterior(&lt, &prior, alpha, &xs).unwrap();
            let el: f64 = (0..3).map(|t| p.values()[t] * losses[d * 3 + t]).sum();
            assert!(el <= prev + 1e-10);
            prev = el;
        }
    }
}

#[test]
fn deterministic_argmin_baseline() {
    // noiseless channel: the decision is a deterministic function of the data
    let phi = Alphabet::indexed("phi", 2).unwrap();
    let x = Alphabet::indexed("x", 2).unwrap();
    let ch = Kernel::deterministic(vec![phi.clone()], x.clone(), |r| r).unwrap();
    let w = GenerativeWorld::new(ProbTable::uniform(phi), ch, 2, 0).unwrap();
    let lt = LossTable::zero_one(&x);
    let enc = argmin_encoder(&lt, &w).unwrap();
    let r = generalization_report(&w, &enc, &lt, SigmaMethod::HoeffdingRange).unwrap();
    let fj = w.build_joint(&enc.with_to_axis_name("theta").unwrap()).unwrap();
    let h = ibo_core::info::entropy(&fj.table().marginalize(&["theta"]).unwrap()).unwrap();
    assert!((r.i_theta_data.nats() - h.nats()).abs() < 1e-12);
    assert!(r.holds);
}

#[test]
fn bound_scales_as_inverse_sqrt_n() {
    // theta copies the first sample: I(theta; x') and sigma do not depend on n
    let base = GenerativeWorld::model_a();
    let lt = LossTable::zero_one(base.x_axis());
    let mut bounds = Vec::new();
    for n in [1usize, 2, 4, 8] {
        let w = base.with_train_size(n).unwrap();
        let enc = Kernel::deterministic(vec![w.past_axis()], lt.theta_axis().clone(), |d| {
            w.decode_dataset(d, n)[0]
        })
        .unwrap();
        let r = generalization_report(&w, &enc, &lt, SigmaMethod::HoeffdingRange).unwrap();
        assert!(r.holds);
        bounds.push((n, r.mi_bound));
    }
    let (n0, b0) = bounds[0];
    for (n, b) in &bounds[1..] {
        let predicted = b0 * ((n0 as f64) / (*n as f64)).sqrt();
        assert!((b / predicted - 1.0).abs() <= 0.10, "n {n}: {b} vs {predicted}");
    }
}

#[test]
fn trained_model_a_matches_restricted_grid() {
    let w = GenerativeWorld::model_a();
    let lt = LossTable::zero_one(w.x_axis());
    let r = optimize_trained_ibo(&w, &lt, 0.5, 1.0, &OptimizerOptions::default()).unwrap();
    assert!(r.max_violation <= 1e-12);
    let grid = r.grid_ibo_value.unwrap();
    assert!(r.ibo_value >= grid - 1e-3, "{} vs {grid}", r.ibo_value);
    assert!((r.minimized_value + r.ibo_value).abs() <= 1e-9);
    // the grid argmax of the IBO form minimizes the sum form as well
    let spec = IboSpec::trained(1.0, Feasibility::new(lt.clone(), 0.5).unwrap()).unwrap();
    let g = grid_oracle(&w, lt.theta_axis(), &spec, 0.05).unwrap();
    let rep = w.build_joint(&g.encoder).unwrap().info_report().unwrap();
    let sum_form = rep.i_t_xf.nats() + rep.i_t_xp.nats();
    assert!((sum_form + g.value).abs() <= 1e-9);
}

#[test]
fn forced_encoder_at_zero_epsilon() {
    // three-valued x with N = 1: each dataset has exactly one zero-loss theta
    let phi = Alphabet::indexed("phi", 2).unwrap();
    let x = Alphabet::indexed("x", 3).unwrap();
    let ch = Kernel::new(vec![phi.clone()], x.clone(), vec![0.6, 0.3, 0.1, 0.1, 0.2, 0.7]).unwrap();
    let w = GenerativeWorld::new(ProbTable::uniform(phi), ch, 1, 1).unwrap();
    let lt = LossTable::zero_one(&x);
    let r = optimize_trained_ibo(&w, &lt, 0.0, 0.5, &OptimizerOptions::default()).unwrap();
    for d in 0..3 {
        assert!((r.encoder.get(d, d) - 1.0).abs() <= 1e-12);
    }
    let ident = Kernel::deterministic(vec![w.past_axis()], lt.theta_axis().clone(), |d| d).unwrap();
    let rep = w.build_joint(&ident).unwrap().info_report().unwrap();
    assert!((r.minimized_value - (rep.i_t_xf.nats() + 0.5 * rep.i_t_xp.nats())).abs() < 1e-12);
}

#[test]
fn feasibility_preserved_on_random_instances() {
    for seed in 0..10u64 {
        let mut rng = rng_for(300 + seed);
        let lim = ibo_core::sampling::WorldLimits { max_phi: 2, max_x: 3, max_n: 2, max_m: 1 };
        let w = ibo_core::sampling::world(&mut rng, lim);
        let lt = LossTable::zero_one(w.x_axis());
        let o = OptimizerOptions { restarts: 3, max_iters: 800, ..Default::default() };
        let r = optimize_trained_ibo(&w, &lt, 0.5, 0.5, &o).unwrap();
        assert!(r.max_violation <= 1e-12, "seed {seed}");
        assert!((r.minimized_value + r.ibo_value).abs() <= 1e-9);
    }
}

#[test]
fn trained_bound_identities() {
    let w = GenerativeWorld::model_a();
    let lt = LossTable::zero_one(w.x_axis());
    let r = optimize_trained_ibo(&w, &lt, 0.5, 0.0, &OptimizerOptions::default()).unwrap();
    let fj = w.build_joint(&r.encoder).unwrap();
    let pair = VariationalPair::exact(&fj).unwrap();
    let b = trained_variational_bound(&fj, &pair, 0.0).unwrap();
    let rep = fj.info_report().unwrap();
    assert!((b.gap - rep.i_t_xf.nats()).abs() < 1e-10);
    let mut rng = rng_for(44);
    let random = VariationalPair::random(&mut rng, lt.theta_axis(), &w.past_axis()).unwrap();
    let b = trained_variational_bound(&fj, &random, 0.7).unwrap();
    let h = rep.h_xp.nats();
    assert!((b.tight_rhs(h) + b.residual - b.bound_value).abs() < 1e-10);
}

#[test]
fn constant_feasible_encoder_bound_nonnegative() {
    let w = GenerativeWorld::model_a();
    let lt = LossTable::zero_one(w.x_axis());
    let enc = Kernel::constant(vec![w.past_axis()], lt.theta_axis().clone(), &[0.5, 0.5]).unwrap();
    let fj = w.build_joint(&enc).unwrap();
    let (_, b) = ibo_core::bounds::minimize_bound(&fj, 2.0).unwrap();
    assert!(b.exact_ibo.abs() < 1e-15);
    assert!(b.bound_value >= -1e-15);
    let prior = ProbTable::uniform(lt.theta_axis().clone());
    let g = gibbs_encoder(&lt, &prior, 0.0, &w).unwrap();
    assert_eq!(g.values(), enc.values());
}
