mod common;

use std::path::{Path, PathBuf};

use alsub_cli::{config_from_str, config_to_toml, parse_config, CliError};
use alsub_core::engine::{BlobsSpec, DatasetSpec, EngineError, MnistSpec};
use alsub_core::{AcquisitionKind, CandidateSize, ExperimentConfig, PruneMode, Strategy};
use common::{blobs_config, write};
use proptest::prelude::{any, prop_assert_eq, prop_assume, prop_oneof, proptest, Just};
use proptest::strategy::Strategy as _;

#[test]
fn minimal_config_gets_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "min.toml",
        "strategy = \"subsampled\"\niterations = 10\nper_iteration_batch = 50\n[dataset]\nkind = \"blobs\"\n",
    );
    let cfg = parse_config(&p).unwrap();
    assert_eq!(cfg.sampling.temperature, 1.0);
    assert_eq!(cfg.mc_passes, 25);
    assert_eq!(cfg.sampling.prune, PruneMode::None);
    assert_eq!(cfg.acquisition, AcquisitionKind::Entropy);
    assert_eq!(cfg.seeds, vec![0, 1, 2]);
    assert_eq!(cfg.model.hidden, Some(vec![32]));
    assert!(cfg.train.learning_rate.is_some());
}

#[test]
fn oversized_schedule_names_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let text = blobs_config("full_pool", "")
        .replace("per_iteration_batch = 8", "per_iteration_batch = 80");
    let err = parse_config(write(dir.path(), "big.toml", &text)).unwrap_err();
    match err {
        CliError::Invalid {
            source: EngineError::Invalid { field, msg },
            ..
        } => {
            assert_eq!(field, "iterations");
            assert!(msg.contains("per_iteration_batch"), "{msg}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("top.toml", blobs_config("subsampled", "temprature = 0.5")),
        (
            "nested.toml",
            blobs_config("subsampled", "").replace("epochs = 3", "epoch = 3"),
        ),
        ("strategy.toml", blobs_config("subsampeld", "")),
    ] {
        let err = parse_config(write(dir.path(), name, &text)).unwrap_err();
        assert!(matches!(err, CliError::Parse { .. }), "{name}: {err:?}");
    }
}

#[test]
fn missing_file_is_a_read_error() {
    assert!(matches!(
        parse_config("/definitely/not/here.toml"),
        Err(CliError::Read { .. })
    ));
}

#[test]
fn random_full_is_normalised_to_random_acquisition() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "r.toml",
        &blobs_config("random_full", "acquisition = \"entropy\""),
    );
    assert_eq!(
        parse_config(p).unwrap().acquisition,
        AcquisitionKind::Random
    );
}

#[test]
fn candidate_size_integer_is_a_count_and_float_a_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let count = blobs_config("subsampled", "")
        .replace("[train]", "[sampling]\ncandidate_size = 20\n\n[train]");
    let frac = count.replace("candidate_size = 20", "candidate_size = 0.25");
    let a = parse_config(write(dir.path(), "a.toml", &count)).unwrap();
    let b = parse_config(write(dir.path(), "b.toml", &frac)).unwrap();
    assert_eq!(a.sampling.candidate_size, CandidateSize::Count(20));
    assert_eq!(b.sampling.candidate_size, CandidateSize::Fraction(0.25));
}

#[test]
fn mnist_paths_resolve_against_the_config_directory() {
    let text = "strategy = \"full_pool\"\niterations = 1\nper_iteration_batch = 5\n\
                [dataset]\nkind = \"mnist\"\ntrain_images = \"data/ti\"\ntrain_labels = \"data/tl\"\n\
                test_images = \"/abs/xi\"\ntest_labels = \"data/xl\"\n";
    let cfg = config_from_str(text, Path::new("c.toml"), Path::new("/cfgdir")).unwrap();
    let DatasetSpec::Mnist(m) = &cfg.dataset else {
        panic!()
    };
    assert_eq!(m.train_images, PathBuf::from("/cfgdir/data/ti"));
    assert_eq!(m.test_images, PathBuf::from("/abs/xi"));
    assert_eq!(cfg.model.hidden, Some(vec![128]));
}

#[test]
fn round_trip_of_a_written_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "a.toml",
        &blobs_config("subsampled", "id = \"mine\""),
    );
    let cfg = parse_config(&p).unwrap();
    let back = config_from_str(&config_to_toml(&cfg).unwrap(), &p, dir.path()).unwrap();
    assert_eq!(back, cfg);
}

fn arb_config() -> impl proptest::strategy::Strategy<Value = ExperimentConfig> {
    let strategy = prop_oneof![
        Just(Strategy::RandomFull),
        Just(Strategy::FullPool),
        Just(Strategy::Subsampled)
    ];
    let kind = prop_oneof![
        Just(AcquisitionKind::Entropy),
        Just(AcquisitionKind::VariationRatios),
        Just(AcquisitionKind::Random)
    ];
    let size = prop_oneof![
        (20usize..200).prop_map(CandidateSize::Count),
        (0.01f64..=1.0).prop_map(CandidateSize::Fraction)
    ];
    let prune = prop_oneof![
        Just(PruneMode::None),
        Just(PruneMode::ExcludeThisRound),
        Just(PruneMode::DropPermanently)
    ];
    (
        strategy,
        kind,
        size,
        prune,
        0.0f64..0.9,
        1e-4f64..100.0,
        (1usize..5, 1usize..20, 2usize..6, 0.5f64..3.0),
        (
            proptest::collection::btree_set(0u64..1000, 1..4),
            any::<u64>(),
            0.0f64..0.5,
        ),
        (
            proptest::option::of(proptest::collection::vec(1usize..64, 0..3)),
            0.0f64..0.9,
        ),
        (
            1usize..10,
            1usize..64,
            proptest::option::of(1e-4f64..1.0),
            0.0f64..0.99,
        ),
        (any::<bool>(), proptest::option::of("[a-z][a-z0-9_-]{0,12}")),
    )
        .prop_map(
            |(
                strategy,
                kind,
                size,
                prune,
                q,
                tau,
                (t, b, c, spread),
                (seeds, pool_seed, frac),
                (hidden, drop),
                (ep, bs, lr, mom),
                (wall, id),
            )| {
                let blobs = BlobsSpec {
                    num_classes: c,
                    samples_per_class: 200,
                    spread,
                    seed: pool_seed % 7,
                    test_fraction: 0.25,
                    split_seed: 3,
                };
                let mut cfg = ExperimentConfig::new(DatasetSpec::Blobs(blobs), strategy, t, b);
                cfg.id = id;
                cfg.acquisition = kind;
                cfg.seeds = seeds.into_iter().collect();
                cfg.pool_seed = pool_seed;
                cfg.initial_pool_fraction = 0.05 + frac / 10.0;
                cfg.record_wall_time = wall;
                cfg.model.hidden = hidden;
                cfg.model.dropout = drop;
                cfg.train.epochs = ep;
                cfg.train.batch_size = bs;
                cfg.train.learning_rate = lr;
                cfg.train.momentum = mom;
                if strategy == Strategy::Subsampled {
                    cfg.sampling.candidate_size = match size {
                        CandidateSize::Count(n) => CandidateSize::Count(n.max(b)),
                        f => f,
                    };
                    cfg.sampling.temperature = tau;
                    cfg.sampling.prune = prune;
                    cfg.sampling.prune_quantile = q;
                }
                cfg.with_defaults()
            },
        )
}

proptest! {
    #[test]
    fn serialized_configs_reparse_equal(cfg in arb_config()) {
        prop_assume!(cfg.validate().is_ok());
        let text = config_to_toml(&cfg).unwrap();
        let back = config_from_str(&text, Path::new("x.toml"), Path::new("/")).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn mnist_config_round_trips() {
    let mut cfg = ExperimentConfig::new(
        DatasetSpec::Mnist(MnistSpec::in_dir("/data/mnist")),
        Strategy::Subsampled,
        10,
        600,
    );
    cfg.sampling.candidate_size = CandidateSize::Count(5000);
    let text = config_to_toml(&cfg).unwrap();
    assert_eq!(
        config_from_str(&text, Path::new("m.toml"), Path::new("/")).unwrap(),
        cfg
    );
}
