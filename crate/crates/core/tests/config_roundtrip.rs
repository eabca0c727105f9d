use std::path::PathBuf;

use proptest::prelude::*;

use dispersion_lab::grid::PotentialSpec;
use dispersion_lab::initial::{InitialState, Normalization};
use dispersion_lab::runner::config::{GridConfig, NormsConfig, MAX_SEED, Params, StochasticConfig};
use dispersion_lab::runner::{list_experiments, ExperimentConfig};

fn potential() -> impl Strategy<Value = PotentialSpec> {
    prop_oneof![
        Just(PotentialSpec::zero()),
        (-5.0..5.0f64, 0.2..3.0f64).prop_map(|(a, w)| PotentialSpec::gaussian(a, w)),
        (-5.0..5.0f64, 0.2..3.0f64).prop_map(|(a, w)| PotentialSpec::sech_squared(a, w)),
        (-5.0..5.0f64, 0.2..3.0f64).prop_map(|(a, w)| PotentialSpec::square_well(a, w)),
    ]
}

fn initial() -> impl Strategy<Value = Option<InitialState>> {
    let norm = prop_oneof![
        Just(Normalization::L1),
        Just(Normalization::L2),
        Just(Normalization::None)
    ];
    prop_oneof![
        Just(None),
        (0.05..2.0f64, -3.0..3.0f64, norm).prop_map(|(w, k, n)| Some(InitialState::Gaussian {
            center: 0.0,
            width: w,
            momentum: k,
            normalization: n,
        })),
        (0usize..10).prop_map(|i| Some(InitialState::Eigenstate { index: i })),
        (0.5..2.0f64, 0.5..5.0f64).prop_map(|(w, e)| Some(InitialState::BandLimited {
            center: 1.0,
            width: w,
            energy_max: e,
            normalization: Normalization::L2,
        })),
    ]
}

fn params() -> impl Strategy<Value = Params> {
    (
        proptest::option::of(proptest::collection::vec(0.1..3.0f64, 1..4)),
        proptest::option::of(0.1..0.9f64),
        proptest::option::of(any::<bool>()),
        proptest::option::of(0.01..0.2f64),
    )
        .prop_map(|(lambdas, alpha, project, t_min)| Params {
            lambdas,
            alpha,
            project,
            t_min,
            ..Params::default()
        })
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        0..list_experiments().len(),
        potential(),
        (16usize..5000, 5.0..100.0f64),
        (0.5..10.0f64, 0..=MAX_SEED, 1usize..500),
        initial(),
        params(),
    )
        .prop_map(|(e, potential, (n_points, half_width), (horizon, seed, n_paths), initial, params)| {
            ExperimentConfig {
                experiment: list_experiments()[e].experiment,
                output_dir: PathBuf::from("runs/x"),
                potential,
                grid: GridConfig { n_points, half_width },
                stochastic: StochasticConfig {
                    horizon,
                    n_steps: 4096,
                    n_paths,
                    seed,
                },
                norms: NormsConfig::default(),
                initial,
                params,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn parse_serialize_parse_is_identity(cfg in config()) {
        let first = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&first, &cfg);
        let canonical = first.to_toml();
        let second = ExperimentConfig::parse(&canonical).unwrap();
        prop_assert_eq!(&second, &first);
        prop_assert_eq!(second.to_toml(), canonical);
        prop_assert_eq!(second.hash(), cfg.hash());
    }
}
