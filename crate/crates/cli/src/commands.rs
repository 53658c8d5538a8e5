use std::io::Write;

use brl::data::{encode_csv, load_csv};
use brl::eval::{
    run_concentration_study, run_cv_experiment, simulate_dataset, ConcentrationConfig, SimulationSpec,
};
use brl::inference::{fit_consequents, predict_point, render, select_brl_point, PosteriorPredictor};
use brl::mcmc::run_ensemble;
use brl::mining::mine_antecedents;
use brl::{Dataset, Execution, RuleList, Scorer};
use serde::Serialize;

use crate::artifact::{now, write_json, write_text, McmcSummary, ModelArtifact};
use crate::config::{RunConfig, Settings};
use crate::error::{io_error, CliError};
use crate::{CvArgs, ConcentrationArgs, FitArgs, Mode, PredictArgs, SimulateArgs};

fn load(config: &RunConfig) -> Result<Dataset, CliError> {
    let (path, _) = config.require_data()?;
    Ok(load_csv(path, &config.load_options()?)?)
}

fn emit(output: Option<&str>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => write_text(path, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_error("stdout", e)),
    }
}

pub fn mine(settings: Settings, output: Option<String>, exec: Execution) -> Result<(), CliError> {
    let mut config = settings.resolve("mine")?;
    if let Some(o) = &output {
        config.extra.insert("output".into(), o.clone());
    }
    let ds = load(&config)?;
    let pool = mine_antecedents(&ds, config.min_support, config.max_card, exec)?;
    log::info!("{} antecedents from {} items", pool.len(), ds.n_items());
    emit(output.as_deref(), &pool.dump(&ds))
}

pub fn fit(args: FitArgs, exec: Execution) -> Result<(), CliError> {
    let mut config = args.settings.resolve("fit")?;
    config.extra.insert("output".into(), args.output.clone());
    config
        .extra
        .insert("keep_ensemble".into(), args.keep_ensemble.to_string());
    if let Some(t) = &args.trace {
        config.extra.insert("trace".into(), t.clone());
    }
    if let Some(p) = &args.pool_dump {
        config.extra.insert("pool_dump".into(), p.clone());
    }
    let ds = load(&config)?;
    let hp = config.hyperparams(ds.n_labels())?;
    let pool = mine_antecedents(&ds, config.min_support, config.max_card, exec)?;
    log::info!("{} antecedents from {} items", pool.len(), ds.n_items());
    if let Some(path) = &args.pool_dump {
        write_text(path, &pool.dump(&ds))?;
    }

    let scorer = Scorer::new(&pool, &ds, &hp)?;
    let ensemble = run_ensemble(&scorer, &config.ensemble(exec), config.seed)?;
    if let Some(path) = &args.trace {
        write_text(path, &ensemble.trace_csv())?;
    }
    let point = select_brl_point(&ensemble, &pool)?;
    let model = fit_consequents(&point.list, &pool, &ds, &hp.alpha, config.level)?;
    let stored = if args.keep_ensemble {
        Some(PosteriorPredictor::new(&ensemble, &pool, &ds, &hp.alpha)?)
    } else {
        None
    };
    let artifact = ModelArtifact::new(
        &config,
        ds.items(),
        &hp,
        pool.len(),
        &model,
        McmcSummary::new(&ensemble, &point),
        stored,
    );
    write_json(&args.output, &artifact)?;
    print!("{}", render(&model, None));
    eprintln!(
        "R-hat {:.4} after {} iterations x {} chains; model written to {}",
        ensemble.r_hat, ensemble.iterations, config.chains, args.output
    );
    if args.strict && !ensemble.converged {
        return Err(CliError::Unconverged(format!(
            "R-hat {:.4} >= {}",
            ensemble.r_hat, config.rhat_threshold
        )));
    }
    Ok(())
}

/// Label probabilities plus, in point mode, the matched rule and its text.
type Scored = (Vec<f64>, Option<(usize, String)>);

pub fn predict(args: PredictArgs, exec: Execution) -> Result<(), CliError> {
    let artifact = ModelArtifact::read(&args.model)?;
    let model = artifact.model()?;
    let predictor = match args.mode {
        Mode::Point => None,
        Mode::Posterior => Some(artifact.ensemble.as_ref().ok_or_else(|| {
            CliError::Data("ensemble not stored; refit with --keep-ensemble".into())
        })?),
    };
    let file = std::fs::File::open(&args.data).map_err(|e| io_error(&args.data, e))?;
    let encoded = encode_csv(
        file,
        &artifact.items,
        artifact.config.label_col.as_deref(),
        &artifact.label_names,
    )?;

    let rows: Vec<Scored> = match predictor {
        None => brl::par::map_slice(exec, &encoded.rows, |x| {
            predict_point(&model, x).map(|p| (p.probabilities, Some((p.matched_rule_index, p.explanation))))
        })
        .into_iter()
        .collect::<Result<_, _>>()?,
        Some(pred) => brl::par::map_slice(exec, &encoded.rows, |x| pred.predict(x).map(|p| (p, None)))
            .into_iter()
            .collect::<Result<_, _>>()?,
    };

    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["row".to_string(), "predicted".to_string()];
    header.extend(artifact.label_names.iter().map(|l| format!("p_{l}")));
    if args.mode == Mode::Point {
        header.push("matched_rule".into());
        header.push("explanation".into());
    }
    let csv_err = |e: csv::Error| CliError::Data(format!("cannot write predictions: {e}"));
    out.write_record(&header).map_err(csv_err)?;
    let mut correct = 0usize;
    for (r, (probs, matched)) in rows.iter().enumerate() {
        let label = brl::eval::argmax(probs);
        if let Some(truth) = &encoded.labels {
            correct += usize::from(truth[r] == label);
        }
        let mut rec = vec![(r + 1).to_string(), artifact.label_names[label].clone()];
        rec.extend(probs.iter().map(|p| p.to_string()));
        if let Some((j, text)) = matched {
            rec.push(j.to_string());
            rec.push(text.clone());
        }
        out.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = out
        .into_inner()
        .map_err(|e| CliError::Data(format!("cannot write predictions: {e}")))?;
    emit(args.output.as_deref(), &String::from_utf8_lossy(&bytes))?;
    if encoded.labels.is_some() {
        eprintln!("accuracy {:.4} on {} rows", correct as f64 / rows.len() as f64, rows.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct Truth<'a> {
    spec: &'a SimulationSpec,
    true_list: &'a RuleList,
    /// Probability of label 1 per rule; index 0 is the default rule.
    thetas: &'a [f64],
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let spec = SimulationSpec {
        n: args.n,
        n_rules: args.n_rules,
        true_list_length: args.list_len,
        beta_params: (args.beta_a, args.beta_b),
        feature_prob: args.feature_prob,
        seed: args.seed,
    };
    let sim = simulate_dataset(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let ds = &sim.dataset;
    let mut text = String::with_capacity(ds.n() * (2 * ds.n_items() + 3));
    let header: Vec<String> = (0..ds.n_items()).map(|i| format!("rule{i}")).collect();
    text.push_str(&header.join(","));
    text.push_str(",label\n");
    for r in 0..ds.n() {
        for i in 0..ds.n_items() {
            text.push(if ds.value(r, i) { '1' } else { '0' });
            text.push(',');
        }
        text.push_str(&ds.label_names()[ds.labels()[r]]);
        text.push('\n');
    }
    emit(args.output.as_deref(), &text)?;
    if let Some(path) = &args.truth {
        write_json(
            path,
            &Truth {
                spec: &spec,
                true_list: &sim.true_list,
                thetas: &sim.thetas,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Report<'a, T> {
    format: &'static str,
    created_at: u64,
    seed: u64,
    config: &'a RunConfig,
    report: &'a T,
}

pub fn eval_cv(args: CvArgs, exec: Execution) -> Result<(), CliError> {
    let mut config = args.settings.resolve("eval cv")?;
    config.extra.insert("folds".into(), args.folds.to_string());
    config.extra.insert("stratified".into(), args.stratified.to_string());
    config.extra.insert("output".into(), args.output.clone());
    if let Some(d) = &args.roc_dir {
        config.extra.insert("roc_dir".into(), d.clone());
    }
    let ds = load(&config)?;
    config.hyperparams(ds.n_labels())?;
    let report = run_cv_experiment(&ds, args.folds, &config.cv(exec, args.stratified), config.seed)?;
    write_json(
        &args.output,
        &Report {
            format: "brl-cv/1",
            created_at: now(),
            seed: config.seed,
            config: &config,
            report: &report,
        },
    )?;
    if let Some(dir) = &args.roc_dir {
        for f in &report.folds {
            if let Some(roc) = &f.roc {
                write_text(&format!("{dir}/fold{}.csv", f.fold), &roc.to_csv())?;
            }
        }
    }
    for f in &report.folds {
        match (&f.skipped, f.accuracy) {
            (Some(reason), _) => println!("fold {}: skipped ({reason})", f.fold),
            (None, Some(acc)) => {
                let auc = f.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
                println!(
                    "fold {}: accuracy {acc:.4}, AUC {auc}, R-hat {:.4}, {:.1}s",
                    f.fold, f.r_hat, f.train_seconds
                );
                print!("{}", f.rendered);
            }
            (None, None) => {}
        }
    }
    println!("mean accuracy {:.4} (sd {:.4})", report.mean_accuracy, report.sd_accuracy);
    if args.strict {
        let bad: Vec<String> = report
            .folds
            .iter()
            .filter(|f| f.skipped.is_none() && !f.converged)
            .map(|f| f.fold.to_string())
            .collect();
        if !bad.is_empty() {
            return Err(CliError::Unconverged(format!("folds {}", bad.join(", "))));
        }
    }
    Ok(())
}

pub fn eval_concentration(args: ConcentrationArgs, exec: Execution) -> Result<(), CliError> {
    let mut settings = args.settings;
    settings.lambda = settings.lambda.or(Some(5.0));
    let mut config = settings.resolve("eval concentration")?;
    let sizes: Vec<String> = args.sizes.iter().map(|n| n.to_string()).collect();
    config.extra.insert("sizes".into(), sizes.join(","));
    config.extra.insert("replicates".into(), args.replicates.to_string());
    config.extra.insert("n_rules".into(), args.n_rules.to_string());
    config.extra.insert("list_len".into(), args.list_len.to_string());
    config.extra.insert("holdout".into(), args.holdout.to_string());
    config.extra.insert("output".into(), args.output.clone());
    let study_config = ConcentrationConfig {
        sizes: args.sizes,
        replicates: args.replicates,
        n_rules: args.n_rules,
        true_list_length: args.list_len,
        lambda: config.lambda,
        eta: config.eta,
        ensemble: config.ensemble(exec),
        holdout: args.holdout,
        execution: exec,
        ..Default::default()
    };
    let study = run_concentration_study(&study_config, config.seed)?;
    write_json(
        &args.output,
        &Report {
            format: "brl-concentration/1",
            created_at: now(),
            seed: config.seed,
            config: &config,
            report: &study,
        },
    )?;
    for (n, med) in &study.median_mean_distance {
        let reps: Vec<_> = study.replicates.iter().filter(|r| r.n == *n).collect();
        let near = reps.iter().filter(|r| r.mass_within_1 >= 0.5).count();
        println!(
            "n={n}: median mean distance {med:.3}; {near}/{} replicates with half the mass within distance 1",
            reps.len()
        );
    }
    Ok(())
}

pub fn inspect(path: &str) -> Result<(), CliError> {
    let artifact = ModelArtifact::read(path)?;
    let model = artifact.model()?;
    let r_hat = artifact.mcmc.r_hat.map_or("undefined".to_string(), |r| format!("{r:.4}"));
    println!("model: {path}");
    println!("created_at: {}", artifact.created_at);
    println!("seed: {}", artifact.seed);
    println!(
        "R-hat: {r_hat} ({}), {} iterations x {} chains, {} retained samples",
        if artifact.mcmc.converged { "converged" } else { "not converged" },
        artifact.mcmc.iterations,
        artifact.mcmc.chains,
        artifact.mcmc.retained_samples
    );
    println!(
        "pool: {} antecedents; hyperparameters lambda={} eta={} alpha={:?}",
        artifact.pool_size,
        artifact.hyperparameters.lambda,
        artifact.hyperparameters.eta,
        artifact.hyperparameters.alpha
    );
    println!(
        "ensemble stored: {}",
        artifact
            .ensemble
            .as_ref()
            .map_or("no".to_string(), |e| format!("{} distinct lists", e.components.len()))
    );
    println!(
        "config: {}",
        serde_json::to_string(&artifact.config).unwrap_or_default()
    );
    println!();
    print!("{}", render(&model, None));
    Ok(())
}
