//! The experiment verbs. Each writes its CSV and markdown outputs into the
//! run directory and returns the values for programmatic use.

use std::collections::BTreeMap;
use std::time::Instant;

use forgeset::blo::{sample_scores, Direction, Granularity};
use forgeset::data::{alignment_fraction, ForgetMask};
use forgeset::metrics::{accuracy, avg_gap, class_entropy, compute_ua, evaluate, EvalReport, GapReport};
use forgeset::models::ModelParams;
use forgeset::numcore::RngStream;
use forgeset::oracle::{binomial, enumerate_worst, fraction_strictly_below, SubsetScore};
use forgeset::unlearn::{retrain, unlearn, Method};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{MethodSpec, ModelSpec};
use crate::error::{core_exit_code, CliError, CliResult};
use crate::report::{csv_text, f2, markdown_table, mean_std, pm};
use crate::streams;
use crate::workspace::{direction_name, Run, SelectionFile};

/// Version of the report CSV layouts below.
pub const REPORT_SCHEMA: u32 = 1;
pub const RAW_HEADER: &str = "method,set_kind,seed,status,ua,mia,ra,ta";
pub const REPORT_HEADER: &str = "method,set_kind,runs,failed,ua_mean,ua_std,mia_mean,mia_std,ra_mean,ra_std,ta_mean,ta_std,ua_gap,mia_gap,ra_gap,ta_gap,avg_gap";
pub const ORACLE_HEADER: &str = "subset_indices,ua";
pub const TRANSFER_HEADER: &str = "source,target,runs,ua_mean,ua_std";
pub const CORESET_HEADER: &str = "subset,train_size,runs,ta_mean,ta_std";
pub const MIXTURE_HEADER: &str = "p,runs,ua_mean,ua_std";
pub const CLASSES_HEADER: &str = "class,entropy,selected_worst,selected_easiest";

pub const RANDOM_KIND: &str = "random";

// ---------------------------------------------------------------- select

#[derive(Clone, Debug)]
pub struct SelectOutcome {
    pub selections: Vec<SelectionFile>,
    pub random: Vec<(u64, ForgetMask)>,
}

/// Worst/easiest selections, the random baseline masks and the per-class
/// composition table.
pub fn cmd_select(run: &Run) -> CliResult<SelectOutcome> {
    let theta = run.pretrained()?;
    let selections = run
        .cfg
        .selection
        .directions
        .iter()
        .map(|&d| run.selection(d))
        .collect::<CliResult<Vec<_>>>()?;
    let random = run.random_masks()?;

    let entropy = class_entropy(&theta, &run.train)?;
    let count = |d: Direction, c: usize| {
        selections
            .iter()
            .find(|s| s.direction == d)
            .map(|s| s.sample_mask.iter().filter(|&&i| run.train.y[i] == c).count().to_string())
            .unwrap_or_default()
    };
    let rows: Vec<String> = (0..run.train.classes)
        .map(|c| {
            let e = entropy[c].map(|v| format!("{v:.6}")).unwrap_or_default();
            format!("{c},{e},{},{}", count(Direction::Worst, c), count(Direction::Easiest, c))
        })
        .collect();
    run.write_file("selection_classes.csv", &csv_text(CLASSES_HEADER, &rows))?;
    Ok(SelectOutcome { selections, random })
}

// ----------------------------------------------------------- unlearn-eval

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: String,
    pub set_kind: String,
    pub seed: u64,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub set_kind: String,
    pub runs: usize,
    pub failed: usize,
    pub mean: EvalReport,
    pub std: EvalReport,
    /// Against the Retrain row of the same set kind.
    pub gap: Option<GapReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: u32,
    pub config_hash: String,
    pub input_digest: String,
    /// SHA-256 of `report.csv`.
    pub report_digest: String,
    pub rows: Vec<ReportRow>,
    /// Wall-clock milliseconds per stage; not covered by any digest.
    pub timings_ms: BTreeMap<String, u64>,
}

impl RunRecord {
    pub fn row(&self, method: &str, kind: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method && r.set_kind == kind)
    }
}

#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub cells: Vec<CellResult>,
    pub record: RunRecord,
}

struct Job<'a> {
    kind: String,
    spec: &'a MethodSpec,
    seed: u64,
    mask: ForgetMask,
}

/// Every (mask kind, method, seed) cell: unlearn from `θ_o`, evaluate,
/// aggregate. Writes `raw.csv`, `report.csv`, `report.md` and
/// `run_record.json`. Failed cells are written with a FAILED marker and the
/// call then returns an error.
pub fn cmd_unlearn_eval(run: &Run) -> CliResult<EvalOutcome> {
    let mut timings = BTreeMap::new();
    let t0 = Instant::now();
    let theta = run.pretrained()?;
    timings.insert("pretrain".to_string(), t0.elapsed().as_millis() as u64);

    let t1 = Instant::now();
    let sel = cmd_select(run)?;
    timings.insert("select".to_string(), t1.elapsed().as_millis() as u64);

    let mut kinds: Vec<(String, Vec<(u64, ForgetMask)>)> = Vec::new();
    for s in &sel.selections {
        let mask = ForgetMask::new(s.sample_mask.clone(), run.train.len())?;
        kinds.push((direction_name(s.direction).into(), run.cfg.eval_seeds.iter().map(|&e| (e, mask.clone())).collect()));
    }
    kinds.push((RANDOM_KIND.into(), sel.random.clone()));

    let mut jobs = Vec::new();
    for (kind, masks) in &kinds {
        for spec in &run.cfg.methods {
            for (seed, mask) in masks {
                jobs.push(Job { kind: kind.clone(), spec, seed: *seed, mask: mask.clone() });
            }
        }
    }
    let t2 = Instant::now();
    let outcomes: Vec<(CellResult, Option<forgeset::Error>)> = jobs.par_iter().map(|j| run_cell(run, &theta, j)).collect();
    timings.insert("unlearn".to_string(), t2.elapsed().as_millis() as u64);

    let first_err = outcomes.iter().find_map(|(_, e)| e.as_ref()).map(|e| (e.to_string(), core_exit_code(e) == 3));
    let cells: Vec<CellResult> = outcomes.into_iter().map(|(c, _)| c).collect();
    let rows = aggregate(run, &kinds, &cells);

    let raw = csv_text(RAW_HEADER, &cells.iter().map(raw_line).collect::<Vec<_>>());
    let report = csv_text(REPORT_HEADER, &rows.iter().map(report_line).collect::<Vec<_>>());
    run.write_file("raw.csv", &raw)?;
    run.write_file("report.csv", &report)?;
    run.write_file("report.md", &report_markdown(&rows))?;

    let record = RunRecord {
        schema: REPORT_SCHEMA,
        config_hash: run.cfg.hash(),
        input_digest: run.input_digest()?,
        report_digest: hex::encode(Sha256::digest(report.as_bytes())),
        rows,
        timings_ms: timings,
    };
    let mut text = serde_json::to_string_pretty(&record).expect("record serializes");
    text.push('\n');
    run.write_file("run_record.json", &text)?;

    if let Some((first, numerical)) = first_err {
        let failed = cells.iter().filter(|c| c.report.is_none()).count();
        return Err(CliError::CellsFailed { failed, total: cells.len(), first, numerical });
    }
    Ok(EvalOutcome { cells, record })
}

fn run_cell(run: &Run, theta: &ModelParams, job: &Job) -> (CellResult, Option<forgeset::Error>) {
    let cfg = job.spec.to_config(RngStream::new(run.cfg.seed, streams::EVAL + job.seed));
    let result = unlearn(theta, &run.train, &job.mask, &cfg).and_then(|u| evaluate(&u, &run.train, &job.mask, &run.test));
    let mut cell = CellResult {
        method: job.spec.method.name().to_string(),
        set_kind: job.kind.clone(),
        seed: job.seed,
        report: None,
        error: None,
    };
    match result {
        Ok(r) => {
            cell.report = Some(r);
            (cell, None)
        }
        Err(e) => {
            cell.error = Some(e.to_string());
            (cell, Some(e))
        }
    }
}

fn aggregate(run: &Run, kinds: &[(String, Vec<(u64, ForgetMask)>)], cells: &[CellResult]) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for (kind, _) in kinds {
        let mut kind_rows: Vec<ReportRow> = Vec::new();
        for spec in &run.cfg.methods {
            let name = spec.method.name();
            let mine: Vec<&CellResult> = cells.iter().filter(|c| c.method == name && &c.set_kind == kind).collect();
            let ok: Vec<EvalReport> = mine.iter().filter_map(|c| c.report).collect();
            let mut mean = [0.0; 4];
            let mut std = [0.0; 4];
            for k in 0..4 {
                let v: Vec<f64> = ok.iter().map(|r| r.as_array()[k]).collect();
                (mean[k], std[k]) = mean_std(&v);
            }
            kind_rows.push(ReportRow {
                method: name.to_string(),
                set_kind: kind.clone(),
                runs: ok.len(),
                failed: mine.len() - ok.len(),
                mean: EvalReport::from_array(mean),
                std: EvalReport::from_array(std),
                gap: None,
            });
        }
        let reference = kind_rows.iter().find(|r| r.method == Method::Retrain.name() && r.runs > 0).map(|r| r.mean);
        if let Some(reference) = reference {
            for r in kind_rows.iter_mut().filter(|r| r.runs > 0) {
                r.gap = Some(avg_gap(&r.mean, &reference));
            }
        }
        rows.extend(kind_rows);
    }
    rows
}

fn raw_line(c: &CellResult) -> String {
    match &c.report {
        Some(r) => format!("{},{},{},ok,{},{},{},{}", c.method, c.set_kind, c.seed, r.ua, r.mia, r.ra, r.ta),
        None => format!("{},{},{},FAILED,,,,", c.method, c.set_kind, c.seed),
    }
}

fn report_line(r: &ReportRow) -> String {
    let metrics = if r.runs == 0 {
        vec!["FAILED".to_string(); 8]
    } else {
        let (m, s) = (r.mean.as_array(), r.std.as_array());
        (0..4).flat_map(|k| [f2(m[k]), f2(s[k])]).collect()
    };
    let gaps = match &r.gap {
        Some(g) => [g.ua, g.mia, g.ra, g.ta, g.avg_gap].iter().map(|&v| f2(v)).collect(),
        None => vec![String::new(); 5],
    };
    format!("{},{},{},{},{},{}", r.method, r.set_kind, r.runs, r.failed, metrics.join(","), gaps.join(","))
}

fn report_markdown(rows: &[ReportRow]) -> String {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.method.clone(), r.set_kind.clone()];
            if r.runs == 0 {
                cells.extend(std::iter::repeat_n("FAILED".to_string(), 4));
            } else {
                let (m, s) = (r.mean.as_array(), r.std.as_array());
                cells.extend((0..4).map(|k| pm(m[k], s[k])));
            }
            cells.push(r.gap.map(|g| f2(g.avg_gap)).unwrap_or_else(|| "-".into()));
            if r.failed > 0 {
                cells[0].push_str(&format!(" ({} FAILED)", r.failed));
            }
            cells
        })
        .collect();
    markdown_table(&["Method", "Forget set", "UA", "MIA", "RA", "TA", "Avg. Gap"], &table)
}

// ----------------------------------------------------------------- oracle

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub subsets: usize,
    pub min_ua: f64,
    pub selected: Option<Vec<usize>>,
    pub selected_ua: Option<f64>,
    /// Share of subsets with strictly lower UA than the selection.
    pub fraction_below: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct OracleOutcome {
    pub ranking: Vec<SubsetScore>,
    pub summary: OracleSummary,
}

/// Exhaustive Retrain over every budget-sized subset; locates the worst-case
/// selection in the ranking when one is configured.
pub fn cmd_oracle(run: &Run) -> CliResult<OracleOutcome> {
    if run.cfg.granularity() != Granularity::Sample {
        return Err(CliError::Config("the oracle enumerates sample subsets only".into()));
    }
    let n = run.train.len();
    let m = run.cfg.budget();
    let count = binomial(n, m);
    if count > run.cfg.oracle.max_subsets as u128 && !run.force_guard {
        return Err(CliError::Guard(format!(
            "C({n}, {m}) = {count} subsets exceeds oracle.max_subsets = {} (pass --force-guard to run anyway)",
            run.cfg.oracle.max_subsets
        )));
    }
    let theta = run.pretrained()?;
    let cfg = run.cfg.retrain_spec().to_config(RngStream::new(run.cfg.seed, streams::ORACLE));
    let ranking = enumerate_worst(&theta, &run.train, m, &cfg, true)?;
    let rows: Vec<String> = ranking
        .iter()
        .map(|s| {
            let idx: Vec<String> = s.subset.iter().map(|i| i.to_string()).collect();
            format!("{},{}", idx.join(" "), s.ua)
        })
        .collect();
    run.write_file("oracle.csv", &csv_text(ORACLE_HEADER, &rows))?;

    let mut summary = OracleSummary {
        subsets: ranking.len(),
        min_ua: ranking.first().map_or(0.0, |s| s.ua),
        selected: None,
        selected_ua: None,
        fraction_below: None,
    };
    if run.cfg.selection.directions.contains(&Direction::Worst) {
        let sel = run.selection(Direction::Worst)?;
        if let Some(hit) = ranking.iter().find(|s| s.subset == sel.sample_mask) {
            summary.fraction_below = Some(fraction_strictly_below(&ranking, hit.ua));
            summary.selected_ua = Some(hit.ua);
        }
        summary.selected = Some(sel.sample_mask);
    }
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    run.write_file("oracle_summary.json", &text)?;
    run.write_file("oracle.md", &oracle_markdown(&summary))?;
    Ok(OracleOutcome { ranking, summary })
}

fn oracle_markdown(s: &OracleSummary) -> String {
    let opt = |v: Option<f64>| v.map(f2).unwrap_or_else(|| "-".into());
    let rows = vec![vec![
        s.subsets.to_string(),
        f2(s.min_ua),
        opt(s.selected_ua),
        opt(s.fraction_below.map(|f| 100.0 * f)),
    ]];
    markdown_table(&["Subsets", "Min UA", "Selected UA", "% strictly below"], &rows)
}

// --------------------------------------------------------------- transfer

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferCell {
    /// Source model label, or `random`.
    pub source: String,
    pub target: String,
    pub runs: usize,
    pub ua_mean: f64,
    pub ua_std: f64,
}

fn model_labels(models: &[ModelSpec]) -> Vec<String> {
    models.iter().enumerate().map(|(i, m)| format!("m{i}-{}", m.label())).collect()
}

fn retrain_ua(run: &Run, theta: &ModelParams, spec: &MethodSpec, mask: &ForgetMask, seed: u64) -> CliResult<f64> {
    let cfg = spec.to_config(RngStream::new(run.cfg.seed, streams::EVAL + seed));
    let theta_u = retrain(theta, &run.train, mask, &cfg)?;
    let f = run.train.subset(mask.indices());
    Ok(compute_ua(&theta_u, &f.x, &f.y)?)
}

/// Worst-case masks selected with each model, retrained with every model.
pub fn cmd_transfer(run: &Run) -> CliResult<Vec<TransferCell>> {
    let models = &run.cfg.transfer.models;
    if models.len() < 2 {
        return Err(CliError::Config("transfer needs at least two entries in transfer.models".into()));
    }
    let labels = model_labels(models);
    let thetas = models.iter().map(|m| run.train_model(m, &run.train)).collect::<CliResult<Vec<_>>>()?;
    let masks = thetas
        .iter()
        .map(|t| {
            let sel = run.select_with(t, Direction::Worst)?;
            Ok(ForgetMask::new(sel.sample_mask, run.train.len())?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let random = run.random_masks()?;

    let mut jobs: Vec<(String, usize, ForgetMask, u64)> = Vec::new();
    for (j, _) in models.iter().enumerate() {
        for (i, mask) in masks.iter().enumerate() {
            for &s in &run.cfg.eval_seeds {
                jobs.push((labels[i].clone(), j, mask.clone(), s));
            }
        }
        for (s, mask) in &random {
            jobs.push((RANDOM_KIND.to_string(), j, mask.clone(), *s));
        }
    }
    let uas = jobs
        .par_iter()
        .map(|(_, j, mask, s)| {
            let spec = MethodSpec { lr: Some(models[*j].lr), epochs: Some(models[*j].epochs), ..run.cfg.retrain_spec() };
            retrain_ua(run, &thetas[*j], &spec, mask, *s)
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut cells = Vec::new();
    for (j, target) in labels.iter().enumerate() {
        let sources = labels.iter().cloned().chain([RANDOM_KIND.to_string()]);
        for source in sources {
            let v: Vec<f64> = jobs
                .iter()
                .zip(&uas)
                .filter(|((src, tj, _, _), _)| *src == source && *tj == j)
                .map(|(_, &u)| u)
                .collect();
            let (ua_mean, ua_std) = mean_std(&v);
            cells.push(TransferCell { source, target: target.clone(), runs: v.len(), ua_mean, ua_std });
        }
    }
    let rows: Vec<String> = cells
        .iter()
        .map(|c| format!("{},{},{},{},{}", c.source, c.target, c.runs, f2(c.ua_mean), f2(c.ua_std)))
        .collect();
    run.write_file("transfer.csv", &csv_text(TRANSFER_HEADER, &rows))?;

    let mut header = vec!["Source \\ Target".to_string()];
    header.extend(labels.iter().cloned());
    let table: Vec<Vec<String>> = labels
        .iter()
        .cloned()
        .chain([RANDOM_KIND.to_string()])
        .map(|src| {
            let mut r = vec![src.clone()];
            for t in &labels {
                let c = cells.iter().find(|c| c.source == src && &c.target == t).unwrap();
                r.push(pm(c.ua_mean, c.ua_std));
            }
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.write_file("transfer.md", &markdown_table(&header, &table))?;
    Ok(cells)
}

// ---------------------------------------------------------------- coreset

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoresetRow {
    pub subset: String,
    pub train_size: usize,
    pub runs: usize,
    pub ta_mean: f64,
    pub ta_std: f64,
}

/// Test accuracy of models trained from scratch on the full training set,
/// on the complement of the worst-case set and on random complements.
pub fn cmd_coreset(run: &Run) -> CliResult<Vec<CoresetRow>> {
    let spec = &run.cfg.model;
    let ta_on = |mask: &ForgetMask| -> CliResult<f64> {
        let keep = mask.complement(run.train.len());
        let theta = run.train_model(spec, &run.train.subset(&keep))?;
        Ok(accuracy(&theta, &run.test.x, &run.test.y)?)
    };
    let n = run.train.len();
    let full = ta_on(&ForgetMask::empty())?;
    let worst = ForgetMask::new(run.selection(Direction::Worst)?.sample_mask, n)?;
    let worst_ta = ta_on(&worst)?;
    let random = run.random_masks()?;
    let random_ta = random.par_iter().map(|(_, m)| ta_on(m)).collect::<CliResult<Vec<_>>>()?;
    let (rm, rs) = mean_std(&random_ta);
    let random_size = random.iter().map(|(_, m)| n - m.len()).sum::<usize>() / random.len().max(1);

    let rows = vec![
        CoresetRow { subset: "full".into(), train_size: n, runs: 1, ta_mean: full, ta_std: 0.0 },
        CoresetRow { subset: "worst_complement".into(), train_size: n - worst.len(), runs: 1, ta_mean: worst_ta, ta_std: 0.0 },
        CoresetRow { subset: "random_complement".into(), train_size: random_size, runs: random.len(), ta_mean: rm, ta_std: rs },
    ];
    let lines: Vec<String> = rows
        .iter()
        .map(|r| format!("{},{},{},{},{}", r.subset, r.train_size, r.runs, f2(r.ta_mean), f2(r.ta_std)))
        .collect();
    run.write_file("coreset.csv", &csv_text(CORESET_HEADER, &lines))?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.subset.clone(), r.train_size.to_string(), pm(r.ta_mean, r.ta_std)])
        .collect();
    run.write_file("coreset.md", &markdown_table(&["Training set", "Size", "TA"], &table))?;
    Ok(rows)
}

// ---------------------------------------------------------------- mixture

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureRow {
    pub p: f64,
    pub runs: usize,
    pub ua_mean: f64,
    pub ua_std: f64,
}

/// Worst-case samples ordered by final selection score, highest first;
/// equal scores keep index order.
pub fn ranked_selection(run: &Run, sel: &SelectionFile) -> CliResult<Vec<usize>> {
    let scores = sample_scores(&sel.result.weights.w, &run.train, sel.granularity)?;
    let mut idx = sel.sample_mask.clone();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(idx)
}

/// The mask with `round(p * m)` top-ranked worst-case samples, filled up
/// with the leading entries of `order` that are not already chosen.
pub fn mixture_mask(ranked: &[usize], order: &[usize], p: f64, n: usize) -> CliResult<ForgetMask> {
    let m = ranked.len();
    let k = ((p * m as f64).round() as usize).min(m);
    let mut chosen: Vec<usize> = ranked[..k].to_vec();
    let head = chosen.clone();
    chosen.extend(order.iter().copied().filter(|i| !head.contains(i)).take(m - k));
    Ok(ForgetMask::new(chosen, n)?)
}

/// Retrain UA on masks mixing a fraction `p` of the worst-case set with
/// random samples, for each `p` on the grid.
pub fn cmd_mixture(run: &Run) -> CliResult<Vec<MixtureRow>> {
    let theta = run.pretrained()?;
    let sel = run.selection(Direction::Worst)?;
    let ranked = ranked_selection(run, &sel)?;
    let n = run.train.len();
    let spec = run.cfg.retrain_spec();
    let grid = &run.cfg.mixture.grid;

    let mut jobs = Vec::new();
    for &s in &run.cfg.mixture.seeds {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut RngStream::new(run.cfg.seed, streams::MIXTURE + s).rng());
        for (gi, &p) in grid.iter().enumerate() {
            jobs.push((gi, s, mixture_mask(&ranked, &order, p, n)?));
        }
    }
    let uas = jobs
        .par_iter()
        .map(|(_, s, mask)| retrain_ua(run, &theta, &spec, mask, *s))
        .collect::<CliResult<Vec<_>>>()?;
    let rows: Vec<MixtureRow> = grid
        .iter()
        .enumerate()
        .map(|(gi, &p)| {
            let v: Vec<f64> = jobs.iter().zip(&uas).filter(|((g, _, _), _)| *g == gi).map(|(_, &u)| u).collect();
            let (ua_mean, ua_std) = mean_std(&v);
            MixtureRow { p, runs: v.len(), ua_mean, ua_std }
        })
        .collect();
    let lines: Vec<String> = rows.iter().map(|r| format!("{},{},{},{}", r.p, r.runs, f2(r.ua_mean), f2(r.ua_std))).collect();
    run.write_file("mixture.csv", &csv_text(MIXTURE_HEADER, &lines))?;
    let table: Vec<Vec<String>> = rows.iter().map(|r| vec![r.p.to_string(), pm(r.ua_mean, r.ua_std)]).collect();
    run.write_file("mixture.md", &markdown_table(&["Worst-case fraction p", "Retrain UA"], &table))?;
    Ok(rows)
}

// ----------------------------------------------------------------- report

#[derive(Clone, Debug)]
pub struct FullReport {
    pub eval: EvalOutcome,
    pub oracle: Option<OracleOutcome>,
    pub transfer: Option<Vec<TransferCell>>,
    pub coreset: Option<Vec<CoresetRow>>,
    pub mixture: Option<Vec<MixtureRow>>,
    /// Label-aligned share of the worst-case set and mean share over the
    /// random masks, when the dataset carries group labels.
    pub alignment: Option<(f64, f64)>,
}

/// The whole pipeline: every enabled experiment plus `summary.md`.
pub fn cmd_report(run: &Run) -> CliResult<FullReport> {
    let eval = cmd_unlearn_eval(run)?;
    let oracle = if run.cfg.oracle.enabled { Some(cmd_oracle(run)?) } else { None };
    let transfer = if run.cfg.transfer.models.len() >= 2 { Some(cmd_transfer(run)?) } else { None };
    let has_worst = run.cfg.selection.directions.contains(&Direction::Worst);
    let coreset = if run.cfg.coreset.enabled && has_worst { Some(cmd_coreset(run)?) } else { None };
    let mixture = if run.cfg.mixture.enabled && has_worst { Some(cmd_mixture(run)?) } else { None };

    let alignment = match (&run.groups, has_worst) {
        (Some(g), true) => {
            let worst = run.selection(Direction::Worst)?;
            let shares: Vec<f64> = run
                .random_masks()?
                .iter()
                .map(|(_, m)| alignment_fraction(&run.train, g, m.indices()))
                .collect();
            Some((alignment_fraction(&run.train, g, &worst.sample_mask), mean_std(&shares).0))
        }
        _ => None,
    };

    let mut md = String::from("# Forget set report\n\n");
    md.push_str(&format!("Config hash: `{}`\n\n", eval.record.config_hash));
    md.push_str(&format!("Input digest: `{}`\n\n", eval.record.input_digest));
    md.push_str("## Unlearning\n\n");
    md.push_str(&report_markdown(&eval.record.rows));
    if let Some(o) = &oracle {
        md.push_str("\n## Oracle\n\n");
        md.push_str(&oracle_markdown(&o.summary));
    }
    for (title, file, present) in [
        ("Transfer (Retrain UA)", "transfer.md", transfer.is_some()),
        ("Coreset", "coreset.md", coreset.is_some()),
        ("Mixture", "mixture.md", mixture.is_some()),
    ] {
        if present {
            let p = run.path(file);
            let body = std::fs::read_to_string(&p).map_err(crate::error::file_err(&p))?;
            md.push_str(&format!("\n## {title}\n\n{body}"));
        }
    }
    if let Some((w, r)) = alignment {
        md.push_str("\n## Group composition\n\n");
        let rows = vec![vec![f2(100.0 * w), f2(100.0 * r)]];
        md.push_str(&markdown_table(&["Aligned share of worst-case set (%)", "Mean aligned share of random sets (%)"], &rows));
    }
    run.write_file("summary.md", &md)?;
    Ok(FullReport { eval, oracle, transfer, coreset, mixture, alignment })
}
