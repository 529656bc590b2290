use ztm_core::synthbench::{
    evaluate_variant, generate_world, joint_pair, prior_pair, ObjectnessModel, Variant, WorldSpec,
};
use ztm_core::{default_config, ScoringConfig};

fn abs_only() -> Variant {
    Variant::new("abs only", ScoringConfig { beta: 1.0, prior: false, ..default_config() })
}

/// Pinned from the first run of the default world; guards against silent
/// changes to the generator or the pipeline.
const DEFAULT_WORLD_ABS_ONLY_MAP: f64 = 0.969_140_137_952_748_7;

#[test]
fn default_world_regression() {
    let world = generate_world(&WorldSpec::default()).unwrap();
    let map = evaluate_variant(&world, &abs_only()).unwrap();
    println!("default world abs-only map = {map:.17}");
    assert!((map - DEFAULT_WORLD_ABS_ONLY_MAP).abs() < 1e-12, "map {map:.17}");
}

#[test]
fn same_seed_same_results() {
    let spec = WorldSpec::clutter_suite(7);
    assert_eq!(generate_world(&spec).unwrap(), generate_world(&spec).unwrap());
    let a: Vec<f64> =
        prior_pair().iter().map(|v| evaluate_variant(&generate_world(&spec).unwrap(), v).unwrap()).collect();
    let b: Vec<f64> =
        prior_pair().iter().map(|v| evaluate_variant(&generate_world(&spec).unwrap(), v).unwrap()).collect();
    assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
}

#[test]
fn more_proposal_noise_never_helps_on_average() {
    let mean_map = |noise: f64| {
        (0..5)
            .map(|seed| {
                let world = generate_world(&WorldSpec { seed, proposal_noise: noise, ..WorldSpec::default() }).unwrap();
                evaluate_variant(&world, &Variant::new("default", default_config())).unwrap()
            })
            .sum::<f64>()
            / 5.0
    };
    let maps: Vec<f64> = [0.3, 0.6, 0.9].into_iter().map(mean_map).collect();
    assert!(maps.windows(2).all(|w| w[0] >= w[1]), "{maps:?}");
}

#[test]
fn constant_objectness_leaves_map_unchanged() {
    for seed in 0..3 {
        let spec = WorldSpec { seed, objectness: ObjectnessModel::Constant { value: 0.6 }, ..WorldSpec::default() };
        let world = generate_world(&spec).unwrap();
        let pair = prior_pair();
        let off = evaluate_variant(&world, &pair[0]).unwrap();
        let on = evaluate_variant(&world, &pair[1]).unwrap();
        assert!((off - on).abs() < 1e-9, "seed {seed}: {off} vs {on}");
    }
}

#[test]
fn joint_score_helps_on_hard_negatives() {
    let wins = (0..5)
        .filter(|&seed| {
            let world = generate_world(&WorldSpec::hard_negative_suite(seed)).unwrap();
            let pair = joint_pair();
            evaluate_variant(&world, &pair[1]).unwrap() >= evaluate_variant(&world, &pair[0]).unwrap()
        })
        .count();
    assert!(wins >= 4, "{wins}/5");
}
