mod common;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{coding_script, desk_corpus, random_multilayer};
use tessera_core::annotations::AnnotationStore;
use tessera_core::blockmodel::{description_length, word_cluster_of};
use tessera_core::corpus::Corpus;
use tessera_core::inference::{
    accept_move, agglomerate_step, build_snapshot, fit_graph, sweep, InferenceConfig,
};
use tessera_core::LevelState;

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(desk_corpus)
}

fn quick(seed: u64) -> InferenceConfig {
    InferenceConfig {
        seed,
        restarts: 2,
        sweeps: 8,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fits_are_reproducible_and_valid(graph_seed in any::<u64>(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(graph_seed);
        let g = random_multilayer(&mut rng, 10);
        let a = fit_graph(&g, &quick(seed), None);
        let b = fit_graph(&g, &quick(seed), None);
        prop_assert_eq!(&a.partition, &b.partition);
        prop_assert_eq!(a.objective.total, b.objective.total);
        a.partition.validate(&g).unwrap();
        prop_assert!(a.partition.levels.last().unwrap().is_top());
        let recomputed = description_length::<f64>(&g, &a.partition).unwrap().total;
        prop_assert!((recomputed - a.objective.total).abs() <= 1e-9);
        let best = a.restart_totals.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(a.objective.total, best);
    }

    #[test]
    fn greedy_phases_never_increase_dl(graph_seed in any::<u64>(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(graph_seed);
        let g = random_multilayer(&mut rng, 10);
        let mut state = LevelState::singletons(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut last = state.description_length();
        let allowed = [true; 4];
        for _ in 0..40 {
            if agglomerate_step(&mut state, &mut rng, 10, &allowed).is_none() {
                break;
            }
            let now = state.description_length();
            prop_assert!(now <= last + 1e-9);
            last = now;
        }
        for _ in 0..5 {
            sweep(&mut state, &mut rng, 0.0);
            let now = state.description_length();
            prop_assert!(now <= last + 1e-9);
            last = now;
        }
    }

    #[test]
    fn metropolis_rule(delta in -50.0f64..50.0, t in 0.01f64..10.0, u in 0.0f64..1.0) {
        let p = (-delta / t).exp().min(1.0);
        prop_assert_eq!(accept_move(delta, t, u), u < p);
        prop_assert_eq!(accept_move(delta, 0.0, u), delta < 0.0);
    }

    #[test]
    fn snapshots_honor_must_link(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = AnnotationStore::new();
        coding_script(corpus(), &mut store, &mut rng, &["smoke", "crumb", "kin"]);
        let snap = build_snapshot(corpus(), &store, &InferenceConfig { restarts: 1, sweeps: 4, ..quick(seed) }, 0, None).unwrap();
        prop_assert_eq!(snap.annotation_version, store.version);
        for code in store.user_codes() {
            for level in 0..snap.partition.depth() {
                let clusters: BTreeSet<u32> = code
                    .keywords
                    .iter()
                    .map(|&w| word_cluster_of(&snap.partition, w, level).unwrap())
                    .collect();
                prop_assert!(clusters.len() <= 1);
            }
        }
    }
}
