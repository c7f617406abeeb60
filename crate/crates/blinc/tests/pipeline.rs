//! End-to-end flow on synthetic data: train, increment, predict, persist.

use blinc::data::synth_classification;
use blinc::incremental::{BStrategy, UpdateOptions};
use blinc::linalg::RidgeParam;
use blinc::model::{Activation, Architecture, BlsModel};

fn arch(seed: u64) -> Architecture {
    Architecture::new(2, 5, 1, 30, seed)
        .with_lambda(RidgeParam::new(1e-8))
        .with_activations(Activation::Tanh, Activation::Tanh)
}

#[test]
fn separable_clusters_train_to_high_accuracy() {
    // One draw shares the cluster centers between the train and test splits.
    let all = synth_classification(42, 1600, 10, 4);
    let train = all.slice(0, 1200);
    let test = all.slice(1200, 1600);

    let model = BlsModel::train_initial(arch(7), &train.x, &train.one_hot_labels()).unwrap();
    let acc = model.evaluate(&test).unwrap();
    assert!(acc > 0.9, "test accuracy {acc}");
}

#[test]
fn incremental_training_tracks_batch_and_strategies_agree() {
    let all = synth_classification(43, 1600, 10, 4);
    let initial = all.slice(0, 600);
    let inc1 = all.slice(600, 900);
    let inc2 = all.slice(900, 1200);
    let test = all.slice(1200, 1600);

    let run = |strategy: BStrategy| {
        let model =
            BlsModel::train_initial(arch(11), &initial.x, &initial.one_hot_labels()).unwrap();
        // Ridge training pairs with the full-rank assumption: the residual
        // check only means something for exact (lambda = 0) states.
        let opts = UpdateOptions {
            strategy,
            assume_full_rank: true,
        };
        let (model, _) = model
            .increment_inputs(&inc1.x, &inc1.one_hot_labels(), &opts)
            .unwrap();
        let (model, _) = model
            .increment_inputs(&inc2.x, &inc2.one_hot_labels(), &opts)
            .unwrap();
        model
    };

    let existing = run(BStrategy::Existing);
    let auto = run(BStrategy::Auto);

    let pred_existing = existing.predict(&test.x).unwrap().classes;
    let pred_auto = auto.predict(&test.x).unwrap().classes;
    assert_eq!(pred_existing, pred_auto, "strategies disagree on predictions");

    let acc = existing.evaluate(&test).unwrap();
    assert!(acc > 0.9, "post-increment accuracy {acc}");
}

#[test]
fn persisted_model_predicts_identically() {
    let all = synth_classification(44, 800, 10, 4);
    let train = all.slice(0, 600);
    let test = all.slice(600, 800);

    let model = BlsModel::train_initial(arch(13), &train.x, &train.one_hot_labels()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.blnc");
    model.save(&path).unwrap();

    let loaded = BlsModel::load(&path).unwrap();
    assert_eq!(
        model.predict(&test.x).unwrap().classes,
        loaded.predict(&test.x).unwrap().classes
    );
}
