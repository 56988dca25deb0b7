//! Command implementations; `main` is a thin argument-parsing shell over
//! these so tests can drive them in process.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use pun_core::corpus::{
    apply_gold_location, apply_gold_senses, build_pun_gloss_pairs, parse_gold_location,
    parse_gold_senses, parse_semeval_xml, read_jsonl, write_jsonl, PairExample, PunInstance,
};
use pun_core::evalkit::{
    cross_validate, interpretation_prf, location_prf, sense_count_sweep, sweep_csv, CvReport,
    EvalError, SweepRow,
};
use pun_core::interpreter::{mfs_baseline, Interp, InterpConfig};
use pun_core::lexicon::{parse_cmudict, parse_sense_inventory, PronunciationTable, SenseInventory};
use pun_core::locator::{Dann, ModelConfig, Resources};
use pun_core::num::Rng;

use crate::config::{RunConfig, Task};
use crate::CliError;

/// Maximum gradient-check error accepted by `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct PrepareSummary {
    pub instances: usize,
    pub tokens: usize,
    pub with_gold_location: usize,
    pub with_gold_senses: usize,
    pub pairs: usize,
    pub skipped_pair_instances: usize,
    pub xml_warnings: usize,
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn load_lexicons(config: &RunConfig) -> Result<(SenseInventory, PronunciationTable), CliError> {
    let inventory = parse_sense_inventory(read_to_string(&config.paths.sense_tsv)?.as_bytes())?;
    // Distributed pronouncing dictionaries carry the odd Latin-1 byte.
    let dict_bytes = std::fs::read(&config.paths.cmudict).map_err(|e| {
        CliError::Config(format!(
            "cannot read {}: {e}",
            config.paths.cmudict.display()
        ))
    })?;
    let dict_text = String::from_utf8_lossy(&dict_bytes);
    let pronunciations = parse_cmudict(dict_text.as_bytes())?;
    Ok((inventory, pronunciations))
}

fn instances_path(config: &RunConfig) -> PathBuf {
    config.paths.out_dir.join("instances.jsonl")
}

fn pairs_path(config: &RunConfig) -> PathBuf {
    config.paths.out_dir.join("pairs.jsonl")
}

/// Parse the corpus and gold files, attach annotations, dump canonical
/// JSON lines, and report counts.
pub fn cmd_prepare(config: &RunConfig, out: &mut dyn Write) -> Result<PrepareSummary, CliError> {
    config.check_paths()?;
    let (mut instances, xml_warnings) = parse_semeval_xml(&read_to_string(&config.paths.xml)?)?;
    let gold_location =
        parse_gold_location(read_to_string(&config.paths.gold_location)?.as_bytes())?;
    apply_gold_location(&mut instances, &gold_location)?;
    if let Some(senses_path) = &config.paths.gold_senses {
        let gold_senses = parse_gold_senses(read_to_string(senses_path)?.as_bytes())?;
        apply_gold_senses(&mut instances, &gold_senses);
    }

    let (inventory, _) = load_lexicons(config)?;
    let mut pairs: Vec<PairExample> = Vec::new();
    let mut skipped = 0usize;
    for inst in &instances {
        if inst.gold_pun_token.is_some() && inst.gold_sense_keys.is_some() {
            let (built, warnings) = build_pun_gloss_pairs(inst, &inventory)?;
            if built.is_empty() {
                skipped += 1;
            }
            let _ = warnings;
            pairs.extend(built);
        }
    }

    std::fs::create_dir_all(&config.paths.out_dir)
        .map_err(|e| CliError::Config(format!("cannot create out_dir: {e}")))?;
    let mut buf = Vec::new();
    write_jsonl(&instances, &mut buf)?;
    std::fs::write(instances_path(config), buf)
        .map_err(|e| CliError::Config(format!("cannot write instances.jsonl: {e}")))?;
    let mut buf = Vec::new();
    write_jsonl(&pairs, &mut buf)?;
    std::fs::write(pairs_path(config), buf)
        .map_err(|e| CliError::Config(format!("cannot write pairs.jsonl: {e}")))?;

    let summary = PrepareSummary {
        instances: instances.len(),
        tokens: instances.iter().map(|i| i.tokens.len()).sum(),
        with_gold_location: instances
            .iter()
            .filter(|i| i.gold_pun_token.is_some())
            .count(),
        with_gold_senses: instances
            .iter()
            .filter(|i| i.gold_sense_keys.is_some())
            .count(),
        pairs: pairs.len(),
        skipped_pair_instances: skipped,
        xml_warnings: xml_warnings.len(),
    };
    writeln!(out, "instances            {}", summary.instances)?;
    writeln!(out, "tokens               {}", summary.tokens)?;
    writeln!(out, "with gold location   {}", summary.with_gold_location)?;
    writeln!(out, "with gold senses     {}", summary.with_gold_senses)?;
    writeln!(out, "pun-gloss pairs      {}", summary.pairs)?;
    writeln!(
        out,
        "skipped (no senses)  {}",
        summary.skipped_pair_instances
    )?;
    writeln!(out, "xml warnings         {}", summary.xml_warnings)?;
    Ok(summary)
}

fn load_prepared(config: &RunConfig) -> Result<Vec<PunInstance>, CliError> {
    let path = instances_path(config);
    let text = std::fs::read_to_string(&path).map_err(|_| {
        CliError::Config(format!(
            "missing prepared dump {}; run `pun prepare --config ...` first",
            path.display()
        ))
    })?;
    Ok(read_jsonl(text.as_bytes())?)
}

fn model_config(config: &RunConfig, seed: u64) -> ModelConfig {
    ModelConfig {
        d_s: config.model.d_s,
        d_p: config.model.d_p,
        d_attn: config.model.d_attn,
        d_model: config.model.d_model,
        n_layers: config.model.n_layers,
        max_len: config.model.max_len,
        seed,
        use_sense: config.use_sense(),
        use_pron: config.use_pron(),
    }
}

#[derive(Debug, Clone, Serialize)]
struct EpochRecord {
    epoch: usize,
    loss: f64,
    fold: usize,
}

/// Shared driver behind `train` and `eval`: k-fold cross-validation with
/// per-fold training, checkpoints, a training log and a JSON report.
pub fn run_cross_validation(
    config: &RunConfig,
    save_artifacts: bool,
    out: &mut dyn Write,
) -> Result<CvReport, CliError> {
    config.check_paths()?;
    let all = load_prepared(config)?;
    let (inventory, pronunciations) = load_lexicons(config)?;
    let res = Resources {
        inventory: &inventory,
        pronunciations: &pronunciations,
    };

    let usable: Vec<PunInstance> = match config.task {
        Task::Locate => all
            .into_iter()
            .filter(|i| i.gold_pun_token.is_some())
            .collect(),
        Task::Interpret => all
            .into_iter()
            .filter(|i| i.gold_pun_token.is_some() && i.gold_sense_keys.is_some())
            .collect(),
    };
    if usable.is_empty() {
        return Err(CliError::Config(
            "no annotated instances for this task; check the gold files".into(),
        ));
    }

    let k = config.training.k_folds;
    let seed = config.training.seed;
    let mut seed_stream = Rng::new(seed);
    let fold_seeds: Vec<u64> = (0..k).map(|_| seed_stream.next_u64()).collect();

    let epoch_log = std::sync::Mutex::new(Vec::<EpochRecord>::new());
    let checkpoints = std::sync::Mutex::new(Vec::<(usize, PathBuf)>::new());

    let report = match config.task {
        Task::Locate => cross_validate(
            "locate",
            &usable,
            k,
            seed,
            config.training.parallel_folds,
            |fold, train, test| {
                let train_owned: Vec<PunInstance> = train.iter().map(|&i| i.clone()).collect();
                let (model, log) = Dann::<f64>::train(
                    &train_owned,
                    res,
                    model_config(config, fold_seeds[fold]),
                    pun_core::locator::TrainOptions {
                        epochs: config.training.epochs,
                        lr: config.learning_rate(),
                        batch_size: config.training.batch_size,
                    },
                )
                .map_err(|e| EvalError::Fold(fold, e.to_string()))?;
                {
                    let mut records = epoch_log.lock().expect("log lock");
                    for (epoch, loss) in log.epoch_losses.iter().enumerate() {
                        records.push(EpochRecord {
                            epoch,
                            loss: *loss,
                            fold,
                        });
                    }
                }
                if save_artifacts {
                    let path = config.paths.out_dir.join(format!("locate_fold{fold}.ckpt"));
                    model
                        .save(&path)
                        .map_err(|e| EvalError::Fold(fold, e.to_string()))?;
                    checkpoints.lock().expect("ckpt lock").push((fold, path));
                }
                let mut predictions = BTreeMap::new();
                let mut gold = BTreeMap::new();
                for inst in test {
                    gold.insert(
                        inst.text_id.clone(),
                        inst.gold_pun_token.clone().expect("filtered"),
                    );
                    let predicted = model
                        .predict_pun(res, inst)
                        .map_err(|e| EvalError::Fold(fold, e.to_string()))?;
                    predictions.insert(inst.text_id.clone(), predicted);
                }
                location_prf(&predictions, &gold)
            },
        )?,
        Task::Interpret => cross_validate(
            "interpret",
            &usable,
            k,
            seed,
            config.training.parallel_folds,
            |fold, train, test| {
                let model = if config.mfs {
                    None
                } else {
                    let mut pairs: Vec<PairExample> = Vec::new();
                    for inst in train {
                        let (built, _) = build_pun_gloss_pairs(inst, &inventory)
                            .map_err(|e| EvalError::Fold(fold, e.to_string()))?;
                        pairs.extend(built);
                    }
                    let (model, log) = Interp::<f64>::train(
                        &pairs,
                        InterpConfig {
                            d_model: config.model.d_model,
                            n_layers: config.model.n_layers,
                            max_len: config.model.max_len,
                            seed: fold_seeds[fold],
                        },
                        pun_core::interpreter::TrainOptions {
                            epochs: config.training.epochs,
                            lr: config.learning_rate(),
                            batch_size: config.training.batch_size,
                        },
                    )
                    .map_err(|e| EvalError::Fold(fold, e.to_string()))?;
                    {
                        let mut records = epoch_log.lock().expect("log lock");
                        for (epoch, loss) in log.epoch_losses.iter().enumerate() {
                            records.push(EpochRecord {
                                epoch,
                                loss: *loss,
                                fold,
                            });
                        }
                    }
                    if save_artifacts {
                        let path = config
                            .paths
                            .out_dir
                            .join(format!("interpret_fold{fold}.ckpt"));
                        model
                            .save(&path)
                            .map_err(|e| EvalError::Fold(fold, e.to_string()))?;
                        checkpoints.lock().expect("ckpt lock").push((fold, path));
                    }
                    Some(model)
                };

                let mut predictions: BTreeMap<String, (String, String)> = BTreeMap::new();
                let mut gold: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
                for inst in test {
                    let token = inst.gold_pun_token.clone().expect("filtered");
                    gold.insert(
                        token.clone(),
                        inst.gold_sense_keys.clone().expect("filtered"),
                    );
                    let prediction = match &model {
                        Some(m) => m
                            .predict_top2(inst, &inventory)
                            .map_err(|e| EvalError::Fold(fold, e.to_string()))?,
                        None => mfs_baseline(inst, &inventory)
                            .map_err(|e| EvalError::Fold(fold, e.to_string()))?,
                    };
                    if let Some(p) = prediction {
                        predictions.insert(token, (p.keys.0, p.keys.1));
                    }
                }
                let (prf, _warnings) = interpretation_prf(&predictions, &gold)?;
                Ok(prf)
            },
        )?,
    };

    std::fs::create_dir_all(&config.paths.out_dir)
        .map_err(|e| CliError::Config(format!("cannot create out_dir: {e}")))?;
    let report_path = config.paths.out_dir.join("report.json");
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(&report_path, format!("{json}\n"))
        .map_err(|e| CliError::Config(format!("cannot write report: {e}")))?;

    if save_artifacts {
        let mut records = epoch_log.into_inner().expect("log lock");
        records.sort_by_key(|r| (r.fold, r.epoch));
        let mut buf = Vec::new();
        write_jsonl(&records, &mut buf)?;
        std::fs::write(config.paths.out_dir.join("train_log.jsonl"), buf)
            .map_err(|e| CliError::Config(format!("cannot write train log: {e}")))?;
    }

    write!(out, "{}", report.text_table())?;
    writeln!(out, "report written to {}", report_path.display())?;
    Ok(report)
}

pub fn cmd_train(config: &RunConfig, out: &mut dyn Write) -> Result<CvReport, CliError> {
    run_cross_validation(config, true, out)
}

pub fn cmd_eval(config: &RunConfig, out: &mut dyn Write) -> Result<CvReport, CliError> {
    run_cross_validation(config, !config.mfs, out)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckSummary {
    pub locator_max_rel_err: f64,
    pub interpreter_max_rel_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Gradient-check both models on a built-in fixture at forced tiny
/// dimensions, printing the worst error per parameter.
pub fn cmd_gradcheck(
    config: &RunConfig,
    inject_fault: bool,
    out: &mut dyn Write,
) -> Result<GradCheckSummary, CliError> {
    let (instances, inventory, pronunciations) = pun_core::synth::gradcheck_fixture();
    let res = Resources {
        inventory: &inventory,
        pronunciations: &pronunciations,
    };
    let fault = if inject_fault { 1e-2 } else { 0.0 };

    // Tiny dims keep the coordinate count (and runtime) small.
    let locator_config = ModelConfig {
        d_s: 4,
        d_p: 4,
        d_attn: 4,
        d_model: 8,
        n_layers: 1,
        max_len: 16,
        seed: config.training.seed,
        use_sense: true,
        use_pron: true,
    };
    let vocab = Dann::<f64>::build_vocab(&instances, &inventory, locator_config.d_s, 1);
    let mut locator: Dann<f64> = Dann::new(
        locator_config,
        vocab,
        pronunciations.phoneme_vocab().to_vec(),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let refs: Vec<&PunInstance> = instances.iter().collect();
    let locator_report = locator
        .grad_check_with_fault(res, &refs, 1e-5, fault)
        .map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(out, "locator parameters:")?;
    for p in &locator_report.per_param {
        writeln!(out, "  {:<28} {:.3e}", p.name, p.max_rel_err)?;
    }

    let mut pairs: Vec<PairExample> = Vec::new();
    for inst in &instances {
        let (built, _) = build_pun_gloss_pairs(inst, &inventory)?;
        pairs.extend(built);
    }
    let interp_config = InterpConfig {
        d_model: 8,
        n_layers: 1,
        max_len: 16,
        seed: config.training.seed,
    };
    let interp_vocab = Interp::<f64>::build_vocab(&pairs, 1);
    let mut interp: Interp<f64> =
        Interp::new(interp_config, interp_vocab).map_err(|e| CliError::Config(e.to_string()))?;
    let pair_refs: Vec<&PairExample> = pairs.iter().collect();
    let interp_report = interp
        .grad_check_with_fault(&pair_refs, 1e-5, fault)
        .map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(out, "interpreter parameters:")?;
    for p in &interp_report.per_param {
        writeln!(out, "  {:<28} {:.3e}", p.name, p.max_rel_err)?;
    }

    let summary = GradCheckSummary {
        locator_max_rel_err: locator_report.max_rel_err,
        interpreter_max_rel_err: interp_report.max_rel_err,
        tolerance: GRADCHECK_TOLERANCE,
        passed: locator_report.max_rel_err <= GRADCHECK_TOLERANCE
            && interp_report.max_rel_err <= GRADCHECK_TOLERANCE,
    };
    writeln!(
        out,
        "locator max {:.3e}, interpreter max {:.3e}, tolerance {:.0e}: {}",
        summary.locator_max_rel_err,
        summary.interpreter_max_rel_err,
        summary.tolerance,
        if summary.passed { "PASS" } else { "FAIL" }
    )?;
    Ok(summary)
}

/// Run the cap sweep: cross-validate the locate task once per `d_s` value
/// with everything else held fixed, and emit `d_s,f1` CSV.
pub fn cmd_sweep(
    config: &RunConfig,
    ds_values: &[usize],
    out: &mut dyn Write,
) -> Result<Vec<SweepRow>, CliError> {
    if config.task != Task::Locate {
        return Err(CliError::Config("sweep applies to the locate task".into()));
    }
    let rows = sense_count_sweep(ds_values, |d_s| {
        let mut swept = config.clone();
        swept.model.d_s = d_s;
        let mut sink = Vec::new();
        run_cross_validation(&swept, false, &mut sink).map_err(|e| EvalError::Config(e.to_string()))
    })?;
    let csv = sweep_csv(&rows);
    std::fs::create_dir_all(&config.paths.out_dir)
        .map_err(|e| CliError::Config(format!("cannot create out_dir: {e}")))?;
    let csv_path = config.paths.out_dir.join("sweep.csv");
    std::fs::write(&csv_path, &csv)
        .map_err(|e| CliError::Config(format!("cannot write sweep.csv: {e}")))?;
    write!(out, "{csv}")?;
    writeln!(out, "sweep written to {}", csv_path.display())?;
    Ok(rows)
}

/// Predict pun locations for raw sentences: one whitespace-tokenized
/// sentence per input line, one `token_index\ttoken` per output line
/// (indices are 1-based, matching corpus token numbering).
pub fn cmd_predict(
    config: &RunConfig,
    checkpoint: Option<&Path>,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<usize, CliError> {
    let checkpoint = checkpoint
        .map(Path::to_path_buf)
        .or_else(|| config.paths.checkpoint.clone())
        .ok_or_else(|| {
            CliError::Config(
                "predict needs a checkpoint (config paths.checkpoint or --checkpoint)".into(),
            )
        })?;
    let model: Dann<f64> = Dann::load(&checkpoint).map_err(|e| CliError::Config(e.to_string()))?;
    let (inventory, pronunciations) = load_lexicons(config)?;
    let res = Resources {
        inventory: &inventory,
        pronunciations: &pronunciations,
    };

    let mut count = 0usize;
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CliError::Config(format!("stdin: {e}")))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let text_id = format!("stdin_{n}");
        let instance = PunInstance {
            tokens: tokens
                .iter()
                .enumerate()
                .map(|(i, w)| (format!("{text_id}_{}", i + 1), w.to_string()))
                .collect(),
            gold_pun_token: None,
            gold_sense_keys: None,
            text_id: text_id.clone(),
        };
        let predicted = model
            .predict_pun(res, &instance)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let index = instance
            .tokens
            .iter()
            .position(|(id, _)| *id == predicted)
            .expect("prediction is one of the instance tokens");
        writeln!(out, "{}\t{}", index + 1, tokens[index])?;
        count += 1;
    }
    Ok(count)
}
