use camo_core::rng::SeededRng;
use camo_core::synth::arbitrary::{grid_records, random_config, random_record};
use camo_core::synth::oracle_decide;
use camo_core::{
    compute_stats, default_config, CamoConfig, CamoEngine, ClassLabel, ClassRegistry,
    PredictionRecord, Stage,
};

fn registries() -> Vec<ClassRegistry> {
    let p = |v: &[(&str, f64)]| Some(v.iter().map(|&(c, x)| (ClassLabel::from(c), x)).collect());
    vec![
        ClassRegistry::new(["Yes", "No", "To some extent"], ["To some extent"], None).unwrap(),
        ClassRegistry::new(
            ["Yes", "No", "To some extent"],
            ["To some extent"],
            p(&[("Yes", 0.79), ("No", 0.14), ("To some extent", 0.07)]),
        )
        .unwrap(),
        ClassRegistry::new(
            ["joy", "love", "surprise"],
            ["love", "surprise"],
            p(&[("joy", 0.89), ("love", 0.08), ("surprise", 0.03)]),
        )
        .unwrap(),
        ClassRegistry::new(
            ["a", "b", "c"],
            ["a", "b"],
            p(&[("a", 0.1), ("b", 0.1), ("c", 0.8)]),
        )
        .unwrap(),
        ClassRegistry::new(["a", "b", "c"], Vec::<&str>::new(), None).unwrap(),
    ]
}

fn check(engine: &CamoEngine, config: &CamoConfig, r: &PredictionRecord) {
    let stats = compute_stats(r, engine.registry()).unwrap();
    let got = engine.decide(r, &stats);
    let want = oracle_decide(r, engine.registry(), config);
    assert_eq!(
        (&got.label, got.stage),
        (&want.label, want.stage),
        "record {r:?} config {config:?}"
    );
}

#[test]
fn grid_enumeration_matches_oracle() {
    for registry in registries() {
        let config = default_config(&registry);
        let engine = CamoEngine::new(registry.clone(), config.clone()).unwrap();
        for r in grid_records(&registry, 2, 20) {
            check(&engine, &config, &r);
        }
    }
}

#[test]
fn random_records_and_configs_match_oracle() {
    let mut rng = SeededRng::new(2024);
    for registry in registries() {
        for _ in 0..40 {
            let config = random_config(&mut rng, &registry);
            let engine = CamoEngine::new(registry.clone(), config.clone()).unwrap();
            for _ in 0..100 {
                let m = 1 + rng.below(7);
                check(
                    &engine,
                    &config,
                    &random_record(&mut rng, &registry, m, false),
                );
            }
        }
    }
}

#[test]
fn every_stage_is_reached() {
    let registry = &registries()[1];
    let config = default_config(registry);
    let engine = CamoEngine::new(registry.clone(), config).unwrap();
    let mut seen = [false; 7];
    for r in grid_records(registry, 3, 10) {
        let stats = compute_stats(&r, registry).unwrap();
        seen[engine.decide(&r, &stats).stage.unwrap().index()] = true;
    }
    // C5 is a scoring step and never the deciding stage
    for s in Stage::ALL {
        assert_eq!(seen[s.index()], s != Stage::C5, "{s:?}");
    }
}

#[test]
fn no_minority_means_no_minority_stages() {
    let registry = registries().pop().unwrap();
    let engine = CamoEngine::new(registry.clone(), default_config(&registry)).unwrap();
    let mut rng = SeededRng::new(8);
    for _ in 0..2000 {
        let r = {
            let m = 1 + rng.below(5);
            random_record(&mut rng, &registry, m, false)
        };
        let d = engine.decide(&r, &compute_stats(&r, &registry).unwrap());
        assert!(matches!(d.stage, Some(Stage::C1) | Some(Stage::C7)));
    }
}
