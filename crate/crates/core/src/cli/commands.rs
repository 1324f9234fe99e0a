//! The subcommand implementations. Each writes into its own output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use super::config::{RunConfig, Settings};
use crate::attribution::{
    average_relevance, default_windows, export_pgm, export_relevance_csv, normalize_relevance, window_aggregate,
    Grouping, Method, RelevanceMap,
};
use crate::data::{
    generate_synthetic, load_trialset, preprocess, read_matrix_csv, save_trialset, EegTrial, TrialSet, MANIFEST_FILE,
};
use crate::error::{Error, Result};
use crate::model::{load_network, run_loto_with, save_network, select_folds, LotoOutcome};
use crate::roar::{
    base_run, condition_mask, export_mask, fold_relevance, points_from_folds_csv, report_csv, run_roar,
    significance_report, summarize_relevance, write_roar_csvs, BaseRun, MethodRelevance, RoarPoint, RoarSubject,
};
use crate::stats::{holm_correction, ks_two_sample};

pub const RESOLVED_CONFIG_FILE: &str = "resolved-config.txt";
pub const LOG_FILE: &str = "run.log";

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Creates `out` and records the resolved settings in it.
pub fn prepare_output(settings: &Settings, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(&out.join(RESOLVED_CONFIG_FILE), &settings.render())
}

/// Dataset directory or manifest path.
pub fn open_dataset(path: &Path) -> Result<TrialSet> {
    let manifest = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let set = load_trialset(&manifest)?;
    if set.is_empty() {
        return Err(Error::Usage(format!("{} lists no trials", manifest.display())));
    }
    Ok(set)
}

struct Log(String);

impl Log {
    fn line(&mut self, text: String) {
        info!("{text}");
        self.0.push_str(&text);
        self.0.push('\n');
    }

    fn save(&self, out: &Path) -> Result<()> {
        write(&out.join(LOG_FILE), &self.0)
    }
}

fn model_path(out: &Path, subject: &str, fold: usize) -> PathBuf {
    out.join("models").join(subject).join(format!("fold_{fold:03}.net"))
}

fn relevance_stem(out: &Path, subject: &str, name: &str) -> PathBuf {
    out.join("relevance").join(subject).join(name)
}

pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let set = generate_synthetic(&cfg.synth, cfg.seed)?;
    save_trialset(&set, out)?;
    let mut log = Log(String::new());
    log.line(format!(
        "wrote {} trials, {} classes, {} subject(s)",
        set.len(),
        set.class_count(),
        set.subjects().len()
    ));
    log.save(out)
}

fn fold_rows(out: &mut String, subject: &str, outcome: &LotoOutcome) {
    for f in &outcome.folds {
        let probs = f.probs.as_ref().map_or(String::new(), |p| {
            p.data().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
        });
        let predicted = f.predicted.map_or(String::new(), |p| p.to_string());
        let error = f.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(
            out,
            "{subject},{},{},{},{predicted},{},{},{probs},{error}",
            f.fold, f.trial_id, f.label, f.iterations_used, f.stopped_early
        )
        .expect("string write");
    }
}

/// LOTO per subject: metrics, confusion counts, per-fold results and,
/// optionally, every fold's network.
pub fn cmd_train(cfg: &RunConfig, dataset: &Path, out: &Path) -> Result<()> {
    let set = preprocess(&open_dataset(dataset)?, &cfg.preprocess)?;
    let k = set.class_count();
    let mut metrics = String::from("subject,accuracy,precision,recall,f1,folds,failed\n");
    let mut confusion = String::from("subject,true,predicted,count\n");
    let mut folds = String::from("subject,fold,trial_id,label,predicted,iterations,stopped_early,probs,error\n");
    let mut log = Log(String::new());
    for subject in set.subjects() {
        let trials = set.subject_trials(&subject);
        let (outcome, nets) = run_loto_with(&trials, k, &cfg.arch, &cfg.train, &cfg.loto, |ctx| {
            Ok(cfg.save_models.then(|| ctx.trained.network.clone()))
        })?;
        for (f, net) in outcome.folds.iter().zip(nets) {
            if let Some(Some(net)) = net {
                let path = model_path(out, &subject, f.fold);
                fs::create_dir_all(path.parent().expect("has parent")).map_err(|e| Error::io(&path, e))?;
                save_network(&net, &path)?;
            }
        }
        let m = outcome.metrics()?;
        writeln!(
            metrics,
            "{subject},{},{},{},{},{},{}",
            m.accuracy,
            m.precision,
            m.recall,
            m.f1,
            outcome.folds.len(),
            outcome.failed()
        )
        .expect("string write");
        for (t, row) in outcome.confusion.rows().iter().enumerate() {
            for (p, count) in row.iter().enumerate() {
                writeln!(confusion, "{subject},{},{},{count}", set.class_names[t], set.class_names[p]).expect("string write");
            }
        }
        fold_rows(&mut folds, &subject, &outcome);
        log.line(format!("{subject}: accuracy {} over {} folds ({} failed)", m.accuracy, outcome.folds.len(), outcome.failed()));
    }
    write(&out.join("metrics.csv"), &metrics)?;
    write(&out.join("confusion.csv"), &confusion)?;
    write(&out.join("folds.csv"), &folds)?;
    log.save(out)
}

/// Relevance from the fold networks saved by [`cmd_train`] under `base`.
fn relevance_from_models(
    cfg: &RunConfig,
    trials: &[EegTrial],
    subject: &str,
    base: &Path,
) -> Result<Vec<MethodRelevance>> {
    let labels: Vec<usize> = trials.iter().map(|t| t.label).collect();
    let folds: Vec<usize> = select_folds(&labels, cfg.loto.fold_limit)
        .into_iter()
        .filter(|&f| model_path(base, subject, f).exists())
        .collect();
    if folds.is_empty() {
        return Err(Error::Usage(format!("{} holds no models for {subject}", base.display())));
    }
    let maps: Vec<Vec<RelevanceMap>> = folds
        .par_iter()
        .map(|&k| {
            let net = load_network(&model_path(base, subject, k))?;
            let training: Vec<&EegTrial> = (0..trials.len()).filter(|&i| i != k).map(|i| &trials[i]).collect();
            fold_relevance(&net, k, &trials[k], &training, &cfg.methods, &cfg.attribution)
        })
        .collect::<Result<_>>()?;
    summarize_relevance(&cfg.methods, &maps)
}

/// Averaged maps previously written by [`cmd_attribute`].
fn relevance_from_exports(cfg: &RunConfig, subject: &str, base: &Path) -> Result<Option<Vec<MethodRelevance>>> {
    let mut out = Vec::new();
    for &m in &cfg.methods {
        let path = relevance_stem(base, subject, &format!("{}_avg", m.name())).with_extension("csv");
        if !path.exists() {
            return Ok(None);
        }
        out.push(MethodRelevance {
            method: m,
            per_trial: Vec::new(),
            averaged: RelevanceMap {
                data: read_matrix_csv(&path)?,
                target_class: None,
                method: m.name().to_string(),
                normalized: true,
            },
        });
    }
    Ok(Some(out))
}

enum Source<'a> {
    Fresh,
    Base(&'a Path),
}

fn subject_relevance(cfg: &RunConfig, trials: &[EegTrial], k: usize, subject: &str, source: &Source) -> Result<BaseRun> {
    match source {
        Source::Fresh => base_run(trials, k, &cfg.arch, &cfg.train, &cfg.methods, &cfg.attribution, &cfg.loto),
        Source::Base(dir) => {
            let relevance = match relevance_from_exports(cfg, subject, dir)? {
                Some(r) => r,
                None => relevance_from_models(cfg, trials, subject, dir)?,
            };
            Ok(BaseRun {
                outcome: LotoOutcome {
                    folds: Vec::new(),
                    confusion: crate::stats::ConfusionMatrix::new(k),
                },
                relevance,
            })
        }
    }
}

fn source(base: Option<&Path>) -> Source<'_> {
    base.map_or(Source::Fresh, Source::Base)
}

/// Per-method relevance: averaged and per-class maps, window aggregates
/// and KS comparisons between methods within each window.
pub fn cmd_attribute(cfg: &RunConfig, dataset: &Path, base: Option<&Path>, out: &Path) -> Result<()> {
    let set = preprocess(&open_dataset(dataset)?, &cfg.preprocess)?;
    let k = set.class_count();
    let mut windows_csv = String::from("subject,method,channel,window,start,end,value\n");
    let mut tests_csv = String::from("subject,method_a,method_b,window,statistic,df,p_raw,p_adjusted\n");
    let mut log = Log(String::new());
    for subject in set.subjects() {
        let trials = set.subject_trials(&subject);
        let run = subject_relevance(cfg, &trials, k, &subject, &source(base))?;
        let samples = trials[0].samples();
        let windows = cfg.windows.clone().unwrap_or_else(|| default_windows(samples));
        let mut aggregates = Vec::new();
        for rel in &run.relevance {
            let name = rel.method.name();
            let avg = &rel.averaged;
            let stem = relevance_stem(out, &subject, &format!("{name}_avg"));
            fs::create_dir_all(stem.parent().expect("has parent")).map_err(|e| Error::io(&stem, e))?;
            export_relevance_csv(avg, &stem, Some(cfg.seed))?;
            export_pgm(&avg.data, &stem.with_extension("pgm"))?;
            if !rel.per_trial.is_empty() {
                for map in average_relevance(&rel.per_trial, Grouping::PerClass)? {
                    let map = normalize_relevance(&map);
                    let class = map.target_class.expect("per-class map");
                    let stem = relevance_stem(out, &subject, &format!("{name}_{}", set.class_names[class]));
                    export_relevance_csv(&map, &stem, Some(cfg.seed))?;
                    export_pgm(&map.data, &stem.with_extension("pgm"))?;
                }
            }
            let agg = window_aggregate(avg, &windows)?;
            let nw = windows.len();
            for (i, v) in agg.data().iter().enumerate() {
                let w = &windows[i % nw];
                writeln!(windows_csv, "{subject},{name},{},{},{},{},{v}", i / nw, i % nw, w.start, w.end)
                    .expect("string write");
            }
            aggregates.push((rel.method, agg));
        }
        for a in 0..aggregates.len() {
            for b in a + 1..aggregates.len() {
                let (ma, ref xa) = aggregates[a];
                let (mb, ref xb) = aggregates[b];
                let nw = windows.len();
                let column = |x: &crate::tensor::Tensor, w: usize| -> Vec<f64> {
                    x.data().iter().skip(w).step_by(nw).copied().collect()
                };
                let tests: Vec<_> = (0..nw)
                    .map(|w| ks_two_sample(&column(xa, w), &column(xb, w)))
                    .collect::<Result<_>>()?;
                let p: Vec<f64> = tests.iter().map(|t| t.p_value).collect();
                let holm = holm_correction(&p, cfg.alpha)?;
                for (w, t) in tests.iter().enumerate() {
                    writeln!(
                        tests_csv,
                        "{subject},{},{},{w},{},{},{},{}",
                        ma.name(),
                        mb.name(),
                        t.statistic,
                        t.df_label(),
                        t.p_value,
                        holm.adjusted[w]
                    )
                    .expect("string write");
                }
            }
        }
        log.line(format!("{subject}: attributed {} methods", run.relevance.len()));
    }
    write(&out.join("windows.csv"), &windows_csv)?;
    write(&out.join("window_tests.csv"), &tests_csv)?;
    log.save(out)
}

fn file_safe(name: &str) -> String {
    name.replace(':', "_")
}

/// The full sweep: base relevance (fresh or from `base`), masked
/// retrains, curves, fold results and the significance report.
pub fn cmd_roar(cfg: &RunConfig, dataset: &Path, base: Option<&Path>, out: &Path) -> Result<()> {
    let set = preprocess(&open_dataset(dataset)?, &cfg.preprocess)?;
    let k = set.class_count();
    let conditions = cfg.conditions();
    let mut points: Vec<RoarPoint> = Vec::new();
    let mut log = Log(String::new());
    for subject in set.subjects() {
        let trials = set.subject_trials(&subject);
        let run = subject_relevance(cfg, &trials, k, &subject, &source(base))?;
        let input = RoarSubject {
            subject: &subject,
            trials: &trials,
            base: &run,
            ground_truth: set.ground_truth_mask.as_ref(),
        };
        if cfg.export_masks {
            for &c in &conditions {
                for &r in &cfg.roar.removal_rates {
                    let mask = condition_mask(c, r, &input, &cfg.roar)?;
                    let stem = out.join("masks").join(&subject).join(format!("{}_r{r}", file_safe(&c.name())));
                    fs::create_dir_all(stem.parent().expect("has parent")).map_err(|e| Error::io(&stem, e))?;
                    export_mask(&mask, &stem)?;
                }
            }
        }
        let pts = run_roar(&input, k, &cfg.arch, &cfg.train, &conditions, &cfg.roar)?;
        log.line(format!("{subject}: {} curve points", pts.len()));
        points.extend(pts);
    }
    write_roar_csvs(&points, out)?;
    write(&out.join("report.csv"), &report_csv(&significance_report(&points, cfg.alpha)?))?;
    log.save(out)
}

/// Rebuilds the summary and significance report from a ROAR directory.
pub fn cmd_report(cfg: &RunConfig, roar_dir: &Path, out: &Path) -> Result<()> {
    let path = roar_dir.join("folds.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let points = points_from_folds_csv(&text, &path)?;
    let curves = crate::roar::roar_curves(&points);
    write(&out.join("summary.csv"), &crate::roar::summary_csv(&curves))?;
    write(&out.join("report.csv"), &report_csv(&significance_report(&points, cfg.alpha)?))?;
    let mut log = Log(String::new());
    log.line(format!("{} curves from {}", curves.len(), path.display()));
    log.save(out)
}

/// `Method` list as used in file names, for callers locating exports.
pub fn relevance_file(out: &Path, subject: &str, method: Method) -> PathBuf {
    relevance_stem(out, subject, &format!("{}_avg", method.name())).with_extension("csv")
}
