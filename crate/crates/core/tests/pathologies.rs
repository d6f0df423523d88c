use ibo_core::pathologies::{
    discrete_self_info, quantized_mi_divergence, ContinuousMap, DeterministicMap, Density,
    QuantizationSpec,
};
use ibo_core::sampling::{rng_for, simplex};
use ibo_core::{Alphabet, ProbTable};
use rand::Rng;

#[test]
fn self_info_is_output_entropy() {
    for seed in 0..100u64 {
        let mut rng = rng_for(seed);
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let x = Alphabet::indexed("X", n).unwrap();
        let y = Alphabet::indexed("Y", m).unwrap();
        let table: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
        let f = DeterministicMap::new(x.clone(), y, table).unwrap();
        let p = ProbTable::new(vec![x], simplex(&mut rng, n)).unwrap();
        let r = discrete_self_info(&p, &f).unwrap();
        assert!((r.i_value - r.h_fx).abs() <= 1e-12);
        assert!(r.i_value <= r.h_x + 1e-12);
    }
}

#[test]
fn floor_halves_on_a_grid_loses_information() {
    // X uniform on {0, 1/4, 1/2, 3/4}, f = floor(2x)/2
    let x = Alphabet::new("X", vec!["0".into(), "0.25".into(), "0.5".into(), "0.75".into()]).unwrap();
    let y = Alphabet::new("Y", vec!["0".into(), "0.5".into()]).unwrap();
    let f = DeterministicMap::new(x.clone(), y, vec![0, 0, 1, 1]).unwrap();
    let r = discrete_self_info(&ProbTable::uniform(x), &f).unwrap();
    assert!((r.h_fx - 2f64.ln()).abs() < 1e-14);
    assert!((r.h_x - 4f64.ln()).abs() < 1e-14);
    assert!((r.i_value - r.h_fx).abs() < 1e-14);
}

#[test]
fn nested_bins_are_monotone() {
    for density in [
        Density::Uniform01,
        Density::Triangular01,
        Density::TruncatedGaussian { mu: 0.3, sigma: 0.15 },
    ] {
        let spec = QuantizationSpec::powers_of_two(density, ContinuousMap::Identity);
        let r = quantized_mi_divergence(&spec).unwrap();
        for w in r.rows.windows(2) {
            assert!(w[1].i_nats >= w[0].i_nats - 1e-12);
        }
        for row in &r.rows {
            // identity is injective on the grid
            assert!((row.i_nats - row.h_x).abs() <= 1e-12);
        }
        assert!(r.slope > 0.9);
    }
}

#[test]
fn uniform_identity_integer_schedule() {
    let spec = QuantizationSpec {
        density: Density::Uniform01,
        map: ContinuousMap::Identity,
        bin_counts: (2..=256).collect(),
    };
    let r = quantized_mi_divergence(&spec).unwrap();
    for row in &r.rows {
        assert!((row.i_nats - (row.k as f64).ln()).abs() <= 1e-12, "k {}", row.k);
    }
}

#[test]
fn gaussian_cdf_is_normalized() {
    let d = Density::TruncatedGaussian { mu: 0.5, sigma: 0.1 };
    assert!(d.cdf(0.0).abs() < 1e-15);
    assert!((d.cdf(1.0) - 1.0).abs() < 1e-15);
    assert!((d.cdf(0.5) - 0.5).abs() < 1e-12);
}
