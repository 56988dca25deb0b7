//! Cap-sweep behavior on a corpus whose planted signal lives in the third
//! sense slot: caps that hide the slot score near chance, caps that
//! include it learn the rule, and caps beyond the maximum sense count
//! change nothing at all.

use std::collections::BTreeMap;

use pun_core::corpus::PunInstance;
use pun_core::evalkit::{cross_validate, location_prf, sense_count_sweep, CvReport, EvalError};
use pun_core::locator::{Dann, ModelConfig, Resources, TrainOptions};
use pun_core::synth::sense_channel_corpus_at_rank;

#[test]
fn f1_is_non_decreasing_once_the_trigger_slot_is_visible() {
    // Trigger gloss at rank 2: caps 1 and 2 cannot see it, cap 4 can.
    let corpus = sense_channel_corpus_at_rank(7, 128, 0, 2);
    let instances = corpus.train.clone();
    let res = Resources {
        inventory: &corpus.inventory,
        pronunciations: &corpus.pronunciations,
    };

    let run_cv = |d_s: usize| -> Result<CvReport, EvalError> {
        cross_validate("locate", &instances, 2, 7, false, |fold, train, test| {
            let config = ModelConfig {
                d_s,
                d_model: 16,
                d_p: 8,
                d_attn: 8,
                n_layers: 1,
                max_len: 32,
                seed: 7,
                use_sense: true,
                use_pron: true,
            };
            let train_owned: Vec<PunInstance> = train.iter().map(|&i| i.clone()).collect();
            let (model, _) = Dann::<f64>::train(
                &train_owned,
                res,
                config,
                TrainOptions {
                    epochs: 30,
                    lr: 0.01,
                    batch_size: 8,
                },
            )
            .map_err(|e| EvalError::Fold(fold, e.to_string()))?;
            let mut predictions = BTreeMap::new();
            let mut gold = BTreeMap::new();
            for inst in test {
                gold.insert(inst.text_id.clone(), inst.gold_pun_token.clone().unwrap());
                predictions.insert(
                    inst.text_id.clone(),
                    model
                        .predict_pun(res, inst)
                        .map_err(|e| EvalError::Fold(fold, e.to_string()))?,
                );
            }
            location_prf(&predictions, &gold)
        })
    };

    let rows = sense_count_sweep(&[1, 2, 4], run_cv).unwrap();
    let f1: Vec<f64> = rows.iter().map(|r| r.f1).collect();
    // Hidden trigger → near chance; visible trigger → learned.
    assert!(
        f1[0] <= f1[2] && f1[1] <= f1[2],
        "expected a non-decreasing trend into the visible-slot cap: {f1:?}"
    );
    assert!(f1[2] >= 0.9, "cap 4 should learn the rule: {f1:?}");
    assert!(f1[0] <= 0.5, "cap 1 cannot see the trigger: {f1:?}");
}
