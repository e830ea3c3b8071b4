use hetecf::eval::{run_experiment, ExperimentConfig, Method, Predictor};
use hetecf::graph::{derive_ratings, load_graph, save_graph};
use hetecf::learner::train;
use hetecf::metapath::{
    build_relation_set, build_relation_set_cached, parse_specs, CacheStatus, Group, MetaPath, PathSimVariant,
    SimilarityCache,
};
use hetecf::model::{read_model, write_model, Hyperparams, Problem, SavedModel};
use hetecf::presets;
use hetecf::synth::{generate, SynthSpec};

fn small_dblp(seed: u64) -> SynthSpec {
    let mut spec = SynthSpec::dblp_default(seed);
    spec.counts = vec![15, 40, 6, 10];
    spec.probabilities = vec![0.12; 4];
    spec
}

#[test]
fn graph_to_predictions_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (n, e, s) = (
        dir.path().join("n.tsv"),
        dir.path().join("e.tsv"),
        dir.path().join("s.txt"),
    );
    save_graph(&generate(&small_dblp(3)).unwrap(), &n, &e, &s).unwrap();
    let graph = load_graph(&n, &e, &s).unwrap();

    let specs = parse_specs(graph.schema(), presets::DBLP_METAPATHS).unwrap();
    let cache = SimilarityCache::new(dir.path().join("cache"));
    std::fs::create_dir_all(cache.dir()).unwrap();
    let variant = PathSimVariant::RowCol;
    let (cached, statuses) = build_relation_set_cached(&graph, &specs, variant, &cache).unwrap();
    assert!(statuses.iter().all(|s| matches!(s, CacheStatus::Computed(_))));
    let (again, statuses) = build_relation_set_cached(&graph, &specs, variant, &cache).unwrap();
    assert!(statuses.iter().all(|s| matches!(s, CacheStatus::Hit(_))));
    let direct = build_relation_set(&graph, &specs, variant).unwrap();
    assert_eq!(cached, direct);
    assert_eq!(again, direct);
    assert_eq!(direct.counts(), (3, 3, 2));

    let target = MetaPath::parse(graph.schema(), presets::DBLP_TARGET).unwrap();
    let ratings = derive_ratings(&graph, &target, variant).unwrap();
    let problem = Problem::new(ratings.clone(), &direct).unwrap();
    let hp = Hyperparams {
        dim: 3,
        max_outer: 4,
        max_inner: 15,
        ..Hyperparams::default()
    };
    let out = train(&problem, &hp).unwrap();
    assert!(out.objective_trace.windows(2).all(|w| w[1] <= w[0]));

    let labels: Vec<(Group, String)> = Group::ALL
        .iter()
        .flat_map(|&g| direct.labels(g).into_iter().map(move |l| (g, l)))
        .collect();
    let saved = SavedModel {
        model: out.model.clone(),
        weights: out.weights.clone(),
        hyperparams: hp,
        mu: out.mu,
        graph_hash: graph.content_hash(),
        paths: labels,
    };
    let model_path = dir.path().join("model.txt");
    write_model(&model_path, &saved).unwrap();
    let back = read_model(&model_path).unwrap();
    assert_eq!(back, saved);
    assert_eq!(
        back.model.predict_entries(&ratings),
        out.model.predict_entries(&ratings)
    );
    assert_eq!(back.mu, ratings.density());
}

#[test]
fn experiment_on_generated_network() {
    let graph = generate(&small_dblp(4)).unwrap();
    let specs = parse_specs(graph.schema(), presets::DBLP_METAPATHS).unwrap();
    let relations = build_relation_set(&graph, &specs, PathSimVariant::RowCol).unwrap();
    let target = MetaPath::parse(graph.schema(), presets::DBLP_TARGET).unwrap();
    let ratings = derive_ratings(&graph, &target, PathSimVariant::RowCol).unwrap();
    let config = ExperimentConfig {
        dims: vec![2],
        trials: 3,
        hp: Hyperparams {
            max_outer: 3,
            max_inner: 10,
            ..Hyperparams::default()
        },
        ..ExperimentConfig::default()
    };
    let a = run_experiment(&ratings, &relations, &config).unwrap();
    let b = run_experiment(&ratings, &relations, &config).unwrap();
    assert_eq!(a, b);
    assert!(a.failures.is_empty(), "{:?}", a.failures);
    for method in Method::ALL {
        for fraction in [0.4, 0.6] {
            let cell = a.cell(method, fraction, 2).unwrap();
            assert_eq!(cell.mae.len(), 3);
            for (mae, rmse) in cell.mae.iter().zip(&cell.rmse) {
                assert!(rmse >= mae && *mae < 1.0);
            }
        }
    }
}
