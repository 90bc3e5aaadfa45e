mod common;

use common::*;
use gradegauge_core::codegen::{
    emit, emit_with, interpret, signature, EmitDialect, EmitOptions, Program,
};
use gradegauge_core::TrainedModel;

fn options() -> EmitOptions {
    EmitOptions::default()
}

#[test]
fn ladder_round_trips_in_every_dialect() {
    let model = ladder_model();
    for dialect in EmitDialect::ALL {
        let text = emit(&model, dialect, "dtalgo").unwrap();
        let program = Program::parse(&text, dialect).unwrap();
        let sig = signature(&model, dialect, &options()).unwrap();
        for c in feature_space() {
            let rec = record(&c);
            let want = model.classify(&rec).unwrap().label;
            assert_eq!(program.run_record(&sig, &rec).unwrap(), want, "{dialect} {c:?}");
            assert_eq!(interpret(&model, &rec).unwrap(), want);
            assert_eq!(want, ladder(c[2], c[0], c[3]));
        }
    }
}

#[test]
fn ladder_emission_shape() {
    let model = ladder_model();
    let text = emit(&model, EmitDialect::PseudoCode, "dtalgo").unwrap();
    assert_eq!(text.matches("return ").count(), model.stats.leaf_count);
    assert!(text.starts_with("function dtalgo(percent, merit, type)\n"));
    assert!(text.contains("if percent == \"distinction\" then"));
    assert!(!text.contains("gender"));

    let fidelity = EmitOptions {
        keep_unused_features: true,
    };
    let text = emit_with(&model, EmitDialect::PseudoCode, "dtalgo3", &fidelity).unwrap();
    assert!(text.starts_with("function dtalgo3(percent, merit, type, gender)\n"));
    assert_eq!(
        emit(&model, EmitDialect::CStyle, "dtalgo").unwrap(),
        emit(&model, EmitDialect::CStyle, "dtalgo").unwrap()
    );
}

#[test]
fn random_mixed_trees_round_trip() {
    let mut r = rng(2024);
    for tree in 0..20 {
        let model = random_mixed_model(&mut r);
        let programs: Vec<_> = EmitDialect::ALL
            .iter()
            .map(|&d| {
                let text = emit(&model, d, "predict").unwrap();
                (
                    d,
                    Program::parse(&text, d).unwrap_or_else(|e| panic!("{d}: {e}\n{text}")),
                    signature(&model, d, &options()).unwrap(),
                )
            })
            .collect();
        for _ in 0..10_000 {
            let rec = random_mixed_record(&mut r, &model.schema);
            let want = model.classify(&rec).unwrap().label;
            for (d, program, sig) in &programs {
                assert_eq!(program.run_record(sig, &rec).unwrap(), want, "tree {tree} {d}");
            }
            assert_eq!(interpret(&model, &rec).unwrap(), want);
        }
    }
}

fn behaviour(model: &TrainedModel, seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    (0..2000)
        .map(|_| {
            let rec = random_mixed_record(&mut r, &model.schema);
            model.classify(&rec).unwrap().label
        })
        .collect()
}

#[test]
fn different_behaviour_means_different_text() {
    let mut r = rng(99);
    let models: Vec<TrainedModel> = (0..40).map(|_| random_mixed_model(&mut r)).collect();
    let seen: Vec<Vec<String>> = models.iter().map(|m| behaviour(m, 1)).collect();
    for (i, a) in models.iter().enumerate() {
        for (j, b) in models.iter().enumerate().skip(i + 1) {
            if seen[i] != seen[j] {
                for d in EmitDialect::ALL {
                    assert_ne!(emit(a, d, "f").unwrap(), emit(b, d, "f").unwrap());
                }
            }
        }
    }
}

#[test]
fn trained_trees_have_one_return_per_leaf() {
    let mut r = rng(11);
    for _ in 0..50 {
        let d = random_consistent(&mut r, 50);
        let model = gradegauge_core::induction::train_id3(
            &d,
            &features_of(&d),
            gradegauge_core::TrainConfig::id3(),
        )
        .unwrap();
        let text = emit(&model, EmitDialect::PseudoCode, "f").unwrap();
        assert_eq!(text.matches("return ").count(), model.stats.leaf_count);
    }
}
