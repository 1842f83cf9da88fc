use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use songrec::data::{extract_examples, parse_events_file, prepare, read_prepared, write_prepared, PreparedDataset};
use songrec::eval::{
    emit_curves, evaluate, sweep_order, training_rng, EvalReport, SweepData, UserHistory,
};
use songrec::zoo::{train_model, Trained};
use songrec::{AnyModel, Recommender};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{write_atomic, RunManifest};

pub const MODEL_FILE: &str = "model.sngrec";
pub const LOSS_FILE: &str = "loss_history.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CURVES_FILE: &str = "curves.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub struct Run {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub workers: usize,
}

impl Run {
    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(command, &self.config, self.workers)
    }

    fn prepared(&self) -> CliResult<(PathBuf, PreparedDataset)> {
        let dir = self
            .config
            .data
            .prepared
            .clone()
            .ok_or_else(|| CliError::msg("data.prepared is not set (use --set data.prepared=DIR)"))?;
        let data = read_prepared(&dir)?;
        Ok((dir, data))
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::msg(format!("{}: {e}", dir.display())))
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

pub fn cmd_prepare(run: &Run) -> CliResult<()> {
    let raw = run
        .config
        .data
        .raw
        .clone()
        .ok_or_else(|| CliError::msg("data.raw is not set (use --set data.raw=PATH)"))?;
    let mut manifest = run.manifest("prepare");
    manifest.inputs.insert("raw".into(), raw.clone());
    let t = Instant::now();
    let (events, parse) = parse_events_file(&raw)?;
    info!("parsed {} events ({} lines skipped)", parse.parsed, parse.skipped);
    manifest.timings.insert("parse".into(), secs(t));
    let t = Instant::now();
    let (data, summary) = prepare(&events, parse, &run.config.pipeline_config())?;
    manifest.timings.insert("prepare".into(), secs(t));
    info!(
        "{} users, {} songs, {} records, {} sessions; train/val/test sessions {}/{}/{}",
        summary.users, summary.songs, summary.records, summary.sessions, summary.train.sessions, summary.val.sessions,
        summary.test.sessions
    );
    create_dir(&run.out)?;
    write_prepared(&run.out, &data, &summary)?;
    for f in ["vocab.txt", "users.txt", "train.txt", "val.txt", "test.txt", "summary.json"] {
        manifest.artifacts.push(run.out.join(f));
    }
    manifest.write(&run.out.join(MANIFEST_FILE))
}

fn check_against_data(run: &Run, data: &PreparedDataset) -> CliResult<()> {
    run.config.eval_config().validate(data.n_songs())?;
    let j = run.config.params.neural.j;
    if extract_examples(&data.train, j).is_empty() && run.config.model.architecture().is_some() {
        return Err(CliError::msg(format!("no training session is longer than the context length {j}")));
    }
    Ok(())
}

fn write_loss_history(path: &Path, history: &[f64]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["epoch", "loss"]).map_err(|e| CliError::msg(e.to_string()))?;
    for (e, loss) in history.iter().enumerate() {
        w.write_record([e.to_string(), loss.to_string()]).map_err(|e| CliError::msg(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::msg(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Checkpoint and loss history of one trained model into `dir`.
fn write_trained(dir: &Path, trained: &Trained, manifest: &mut RunManifest) -> CliResult<()> {
    create_dir(dir)?;
    let model_path = dir.join(MODEL_FILE);
    trained.model.save(&model_path)?;
    let loss_path = dir.join(LOSS_FILE);
    write_loss_history(&loss_path, &trained.loss_history)?;
    manifest.artifacts.extend([model_path, loss_path]);
    Ok(())
}

fn write_report(dir: &Path, label: &str, report: &EvalReport, manifest: &mut RunManifest) -> CliResult<()> {
    let report_path = dir.join(REPORT_FILE);
    let mut bytes = serde_json::to_vec_pretty(report).map_err(|e| CliError::msg(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(&report_path, &bytes)?;
    let curves_path = dir.join(CURVES_FILE);
    emit_curves(&[(label, report)], &curves_path)?;
    manifest.artifacts.extend([report_path, curves_path]);
    Ok(())
}

pub fn cmd_train(run: &Run) -> CliResult<()> {
    let (dir, data) = run.prepared()?;
    check_against_data(run, &data)?;
    let mut manifest = run.manifest("train");
    manifest.inputs.insert("prepared".into(), dir);
    let family = run.config.model;
    let mut rng = training_rng(run.config.seeds().train, family);
    let t = Instant::now();
    let mut last = Instant::now();
    let trained = train_model(
        family,
        &run.config.params,
        &data.train,
        data.n_users(),
        data.n_songs(),
        &mut rng,
        |epoch, loss| {
            info!("{family} epoch {epoch}: loss {loss:.6} ({:.1}s)", secs(last));
            last = Instant::now();
        },
    )?;
    manifest.timings.insert("train".into(), secs(t));
    write_trained(&run.out, &trained, &mut manifest)?;
    manifest.write(&run.out.join(MANIFEST_FILE))
}

/// Context length of the evaluation examples: the model's own order for
/// neural checkpoints, `params.neural.j` otherwise.
fn eval_order(model: &AnyModel, config: &ExperimentConfig) -> usize {
    match model {
        AnyModel::Neural(m) => m.hyper.j,
        _ => config.params.neural.j,
    }
}

pub fn cmd_evaluate(run: &Run, checkpoint: &Path) -> CliResult<()> {
    let (dir, data) = run.prepared()?;
    let mut manifest = run.manifest("evaluate");
    manifest.inputs.insert("prepared".into(), dir);
    manifest.inputs.insert("checkpoint".into(), checkpoint.to_path_buf());
    let model = AnyModel::load(checkpoint)?;
    if model.n_items() != data.n_songs() {
        return Err(CliError::msg(format!(
            "vocabulary size mismatch: checkpoint has {} songs, prepared dataset has {}",
            model.n_items(),
            data.n_songs()
        )));
    }
    if let Some(u) = model.n_users() {
        if u != data.n_users() {
            return Err(CliError::msg(format!(
                "user count mismatch: checkpoint has {u} users, prepared dataset has {}",
                data.n_users()
            )));
        }
    }
    let j = eval_order(&model, &run.config);
    let examples = extract_examples(&data.test, j);
    let history = UserHistory::from_sessions(&data.train, data.n_users());
    let t = Instant::now();
    let report = evaluate(&model, &examples, &run.config.eval_config(), Some(&history))?;
    manifest.timings.insert("evaluate".into(), secs(t));
    for (k, r) in report.ks.iter().zip(&report.recall) {
        info!("recall@{k} = {r:.4}");
    }
    create_dir(&run.out)?;
    write_report(&run.out, model.name(), &report, &mut manifest)?;
    manifest.write(&run.out.join(MANIFEST_FILE))
}

/// `1,2,5` or `1-3` or a mix.
pub fn parse_orders(list: &str) -> CliResult<Vec<usize>> {
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || CliError::msg(format!("bad order list {list:?}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(CliError::msg("empty order list"));
    }
    Ok(out)
}

pub fn order_dir(out: &Path, order: usize) -> PathBuf {
    out.join(format!("j{order}"))
}

pub fn cmd_sweep(run: &Run, orders: &[usize]) -> CliResult<()> {
    let (dir, data) = run.prepared()?;
    for &j in orders {
        let cfg = ExperimentConfig { params: run.config.params.with_order(j), ..run.config.clone() };
        check_against_data(&Run { config: cfg, out: run.out.clone(), workers: run.workers }, &data)?;
    }
    let mut manifest = run.manifest("sweep");
    manifest.inputs.insert("prepared".into(), dir);
    let split = SweepData { train: &data.train, test: &data.test, n_users: data.n_users(), n_items: data.n_songs() };
    let t = Instant::now();
    let results = sweep_order(
        split,
        run.config.model,
        orders,
        &run.config.params,
        &run.config.eval_config(),
        run.config.seeds().train,
    )?;
    manifest.timings.insert("sweep".into(), secs(t));
    let mut labelled = Vec::new();
    for r in &results {
        let sub = order_dir(&run.out, r.order);
        write_trained(&sub, &r.trained, &mut manifest)?;
        write_report(&sub, r.trained.model.name(), &r.report, &mut manifest)?;
        info!("j = {}: recall@{} = {:.4}", r.order, r.report.ks[0], r.report.recall[0]);
        labelled.push((format!("j{}", r.order), &r.report));
    }
    let comparison = run.out.join(COMPARISON_FILE);
    emit_curves(&labelled, &comparison)?;
    manifest.artifacts.push(comparison);
    manifest.write(&run.out.join(MANIFEST_FILE))
}
