mod common;

use common::NaiveBayes;
use dhc::data::{hash_features, load_dataset, split, Featurizer, Preset, SynthSpec};
use dhc::hierarchy::CategoryTree;
use dhc::Error;
use proptest::prelude::*;

proptest! {
    #[test]
    fn features_have_unit_or_zero_norm(text in "[a-zA-Z ]{0,60}", dim in 1usize..64, n in 1usize..4) {
        let row = hash_features(&text, dim, n);
        prop_assert_eq!(row.len(), dim);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if text.split_whitespace().next().is_none() {
            prop_assert_eq!(norm, 0.0);
        } else {
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(hash_features(&text.to_uppercase(), dim, n), row);
    }

    #[test]
    fn split_partitions_the_dataset(n in 2usize..80, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let tree = CategoryTree::balanced(&[2]).unwrap();
        let file: String = (0..n).map(|i| format!("{}\tdoc{i}\n", tree.node_id(0, i % 2))).collect();
        let ds = load_dataset(&file, &tree, &Featurizer { input_dim: 8, n_max: 1 }).unwrap();
        let (train, test) = split(&ds, frac, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), n);
        prop_assert!(!train.is_empty() && !test.is_empty());
        let mut texts: Vec<&str> = train.examples.iter().chain(&test.examples).map(|e| e.text.as_str()).collect();
        texts.sort_unstable();
        texts.dedup();
        prop_assert_eq!(texts.len(), n);
        prop_assert_eq!(split(&ds, frac, seed).unwrap(), (train, test));
    }
}

#[test]
fn ten_examples_split_nine_to_one() {
    let tree = CategoryTree::balanced(&[2]).unwrap();
    let file: String = (0..10).map(|i| format!("{}\td{i}\n", tree.node_id(0, i % 2))).collect();
    let ds = load_dataset(&file, &tree, &Featurizer::default()).unwrap();
    let (train, test) = split(&ds, 0.1, 3).unwrap();
    assert_eq!((train.len(), test.len()), (9, 1));
}

#[test]
fn synthetic_files_load_back() {
    for preset in [Preset::Separable, Preset::Ambiguous] {
        let corpus = preset.spec(preset.default_seed()).generate().unwrap();
        let tree = CategoryTree::load(&corpus.taxonomy).unwrap();
        assert_eq!(tree, corpus.tree);
        let ds = load_dataset(&corpus.dataset_file(), &tree, &Featurizer::default()).unwrap();
        assert_eq!(ds.len(), corpus.documents.len());
        for (e, (leaf, doc)) in ds.examples.iter().zip(&corpus.documents) {
            assert_eq!(&e.text, doc);
            assert_eq!(e.gold, tree.path_of_leaf(*leaf));
        }
        assert_eq!(corpus, preset.spec(preset.default_seed()).generate().unwrap());
    }
}

#[test]
fn unknown_leaf_names_its_line() {
    let tree = CategoryTree::balanced(&[2, 2]).unwrap();
    let leaf = tree.node_id(1, 0).to_string();
    let file = format!("{leaf}\tok\nnope\tbad\n");
    let err = load_dataset(&file, &tree, &Featurizer::default()).unwrap_err();
    assert!(!matches!(err, Error::NonFinite(_)));
    let msg = err.to_string();
    assert!(msg.contains('2') && msg.contains("nope"), "{msg}");
    // interior nodes are not valid labels
    let parent = tree.node_id(0, 0).to_string();
    assert!(load_dataset(&format!("{parent}\tx\n"), &tree, &Featurizer::default()).is_err());
}

#[test]
fn planted_signal_is_learnable_by_naive_bayes() {
    let spec = SynthSpec {
        tree: CategoryTree::balanced(&[4, 3]).unwrap(),
        vocab_size: 200,
        doc_len: 20,
        parent_tokens: 10,
        parent_weight: 0.4,
        leaf_tokens: 8,
        leaf_weight: 0.2,
        noise_weight: 0.4,
        samples_per_leaf: 100,
        seed: 5,
    };
    let corpus = spec.generate().unwrap();
    let docs: Vec<(usize, &str)> = corpus.documents.iter().map(|(l, d)| (*l, d.as_str())).collect();
    let (train, test): (Vec<_>, Vec<_>) = docs.iter().enumerate().partition(|(i, _)| i % 5 != 0);
    let train: Vec<(usize, &str)> = train.into_iter().map(|(_, d)| *d).collect();
    let nb = NaiveBayes::fit(&train, 12);
    let hits = test.iter().filter(|(_, (l, d))| nb.predict(d) == *l).count();
    assert!(hits as f64 / test.len() as f64 >= 0.9, "{hits}/{}", test.len());
    for leaf in 0..12 {
        assert_eq!(spec.signal_tokens(leaf).len(), 18);
    }
}

#[test]
fn bad_specs_are_rejected() {
    let mut spec = Preset::Separable.spec(1);
    spec.noise_weight = 0.5;
    assert!(spec.generate().is_err());
    let mut spec = Preset::Separable.spec(1);
    spec.vocab_size = 100;
    assert!(spec.generate().is_err());
}
