//! Subcommand bodies.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use easyfs::baselines::BaselineMethod;
use easyfs::dataset::{load_csv, load_sparse, TargetColumn};
use easyfs::eval::{cross_validate, EvalReport, Ranker};
use easyfs::oracle::{run_oracle_checks, OracleSettings};
use easyfs::selector::{build_network, select_features};
use easyfs::{Dataset, SelectionConfig, Task};
use serde::Serialize;

use crate::args::{BenchArgs, EvalArgs, Format, InputArgs, OracleArgs, SelectArgs};
use crate::manifest::{now, sha256_file, sidecar, InputRecord, Manifest};
use crate::{Failure, Outcome};

fn load(args: &InputArgs) -> Outcome<(Dataset, InputRecord)> {
    let task: Task = args.task.into();
    let data = match args.format {
        Format::Csv => {
            let target = args
                .target
                .as_deref()
                .ok_or_else(|| Failure::usage("--target is required for CSV input"))?;
            let target: TargetColumn = target.parse().unwrap_or_else(|e| match e {});
            load_csv(&args.input, &target, task, !args.no_header)?
        }
        Format::Sparse => load_sparse(&args.input, task)?,
    };
    let record = InputRecord::new(args, sha256_file(&args.input)?, data.n_samples(), data.n_features());
    Ok((data, record))
}

fn checked(cfg: SelectionConfig) -> Outcome<SelectionConfig> {
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(cfg)
}

/// The configuration as it actually ran, with the network size filled in.
fn resolved(cfg: &SelectionConfig, d: usize) -> SelectionConfig {
    let mut out = cfg.clone();
    if out.use_rnp {
        out.p = Some(cfg.resolved_size(d));
    }
    out
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Opens `path`, or standard output when there is none.
fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Debug, Serialize)]
struct RankRow {
    rank: usize,
    feature_index: usize,
    feature_name: String,
    importance: f64,
}

#[derive(Serialize)]
struct SelectOutputs {
    ranking: Option<PathBuf>,
    network: Option<PathBuf>,
}

pub fn select(args: SelectArgs) -> Outcome {
    let started = now();
    let cfg = checked(args.selection.config())?;
    let (data, record) = load(&args.input)?;

    if let Some(path) = &args.dump_network {
        if !cfg.use_rnp {
            return Err(Failure::usage("--dump-network needs the network; drop --no-rnp"));
        }
        build_network(&cfg, data.n_features())?.dump(path)?;
    }
    let scores = select_features(&data, &cfg)?;
    let rows: Vec<RankRow> = scores
        .ranking
        .iter()
        .enumerate()
        .map(|(i, &j)| RankRow {
            rank: i + 1,
            feature_index: j,
            feature_name: data.feature_names()[j].clone(),
            importance: scores.h[j],
        })
        .collect();

    if args.output.is_some() || !args.json {
        let mut w = csv::Writer::from_writer(sink(args.output.as_deref())?);
        w.write_record(["rank", "feature_index", "feature_name", "importance"])
            .context("writing ranking")?;
        for r in &rows {
            w.write_record([r.rank.to_string(), r.feature_index.to_string(), r.feature_name.clone(), r.importance.to_string()])
                .context("writing ranking")?;
        }
        w.flush()?;
    }

    let outputs = SelectOutputs { ranking: args.output.clone(), network: args.dump_network.clone() };
    let manifest = Manifest::new("select", record, resolved(&cfg, data.n_features()), outputs, started);
    if let Some(path) = args.manifest.clone().or_else(|| args.output.as_deref().map(sidecar)) {
        manifest.write(&path)?;
    }
    if args.json {
        #[derive(Serialize)]
        struct Doc<'a> {
            ranking: &'a [RankRow],
            manifest: &'a Manifest<SelectOutputs>,
        }
        println!("{}", serde_json::to_string_pretty(&Doc { ranking: &rows, manifest: &manifest }).map_err(anyhow::Error::from)?);
    }
    Ok(())
}

enum Method {
    EasyFs,
    Baseline(BaselineMethod),
}

/// Parses `--methods`; `all` expands to every ranker that fits the task.
fn parse_methods(list: &str, task: Task) -> Outcome<Vec<Method>> {
    let mut names: Vec<String> = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if name == "all" {
            names.push("easyfs".into());
            names.extend(BaselineMethod::ALL.iter().map(|m| m.name().to_string()));
        } else {
            names.push(name.to_string());
        }
    }
    if names.is_empty() {
        return Err(Failure::usage("--methods is empty"));
    }
    let explicit_all = list.split(',').any(|s| s.trim() == "all");
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for name in names {
        if seen.contains(&name) {
            continue;
        }
        seen.push(name.clone());
        if name == "easyfs" {
            out.push(Method::EasyFs);
            continue;
        }
        let m: BaselineMethod = name.parse().map_err(|_| {
            Failure::usage(format!("unknown method `{name}`; expected easyfs, pearson, variance, fisher, mi or all"))
        })?;
        if m == BaselineMethod::Fisher && task == Task::Regression {
            if explicit_all {
                continue;
            }
            return Err(Failure::usage("the fisher ranker needs --task classification"));
        }
        out.push(Method::Baseline(m));
    }
    Ok(out)
}

fn check_counts(ns: &[usize], d: usize) -> Outcome {
    match ns.iter().find(|&&n| n == 0 || n > d) {
        Some(bad) => Err(Failure::usage(format!("feature count {bad} outside 1..={d}"))),
        None => Ok(()),
    }
}

fn check_folds(k: usize) -> Outcome {
    if k < 2 {
        return Err(Failure::usage("--folds must be at least 2"));
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalSettings<'a> {
    methods: Vec<String>,
    ns: &'a [usize],
    folds: usize,
    fold_seed: u64,
    alpha: f64,
    report: Option<PathBuf>,
}

pub fn eval(args: EvalArgs) -> Outcome {
    let started = now();
    let cfg = checked(args.selection.config())?;
    let methods = parse_methods(&args.methods, args.input.task.into())?;
    if args.ns.is_empty() {
        return Err(Failure::usage("--ns is empty"));
    }
    check_folds(args.folds)?;
    let (data, record) = load(&args.input)?;
    check_counts(&args.ns, data.n_features())?;

    let mut reports = Vec::new();
    for m in &methods {
        let ranker: &dyn Ranker = match m {
            Method::EasyFs => &cfg,
            Method::Baseline(b) => b,
        };
        reports.extend(cross_validate(&data, ranker, &args.ns, args.folds, args.fold_seed, args.alpha)?);
    }

    let settings = EvalSettings {
        methods: methods
            .iter()
            .map(|m| match m {
                Method::EasyFs => "easyfs".to_string(),
                Method::Baseline(b) => b.name().to_string(),
            })
            .collect(),
        ns: &args.ns,
        folds: args.folds,
        fold_seed: args.fold_seed,
        alpha: args.alpha,
        report: args.output.clone(),
    };
    let manifest = Manifest::new("eval", record, resolved(&cfg, data.n_features()), settings, started);

    if let Some(path) = &args.output {
        write_reports(create(path)?, &reports, args.folds)?;
        manifest.write(&sidecar(path))?;
    }
    if args.json {
        #[derive(Serialize)]
        struct Doc<'a, 'b> {
            reports: &'a [EvalReport],
            manifest: &'a Manifest<EvalSettings<'b>>,
        }
        println!("{}", serde_json::to_string_pretty(&Doc { reports: &reports, manifest: &manifest }).map_err(anyhow::Error::from)?);
    } else {
        let mut out = io::stdout().lock();
        write_table(&mut out, &reports, &args.ns)?;
        if args.output.is_none() {
            writeln!(out)?;
            write_reports(&mut out, &reports, args.folds)?;
        }
    }
    Ok(())
}

fn write_reports(out: impl Write, reports: &[EvalReport], folds: usize) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["method", "ns", "metric", "mean"].map(String::from).to_vec();
    header.extend((1..=folds).map(|f| format!("fold_{f}")));
    header.push("selection_seconds".into());
    w.write_record(&header)?;
    for r in reports {
        let mut rec = vec![r.method.clone(), r.ns.to_string(), r.metric.clone(), r.mean.to_string()];
        rec.extend(r.fold_metrics.iter().map(f64::to_string));
        rec.push(format!("{:.6}", r.selection_seconds));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Methods as rows, feature counts as columns.
fn write_table(out: &mut impl Write, reports: &[EvalReport], ns: &[usize]) -> io::Result<()> {
    let metric = reports.first().map_or("", |r| r.metric.as_str());
    write!(out, "{:<10}", metric)?;
    for n in ns {
        write!(out, " {:>10}", format!("Ns={n}"))?;
    }
    writeln!(out, " {:>12}", "select_s")?;
    for chunk in reports.chunks(ns.len()) {
        write!(out, "{:<10}", chunk[0].method)?;
        for r in chunk {
            write!(out, " {:>10.4}", r.mean)?;
        }
        writeln!(out, " {:>12.4}", chunk[0].selection_seconds)?;
    }
    Ok(())
}

pub fn oracle_check(args: OracleArgs) -> Outcome {
    let settings = OracleSettings {
        cases: args.cases,
        max_p: args.max_p,
        seed: args.seed,
        tolerance: args.tolerance,
        perturb: args.perturb,
    };
    if settings.cases == 0 || settings.max_p == 0 {
        return Err(Failure::usage("--cases and --max-p must be positive"));
    }
    let report = run_oracle_checks(&settings)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?);
    } else {
        let w = &report.redundancy_worst;
        println!(
            "redundancy: {} cases, worst relative error {:.3e} (case {}, feature {}), tolerance {:.0e}",
            report.redundancy_cases, w.relative_error, w.case, w.index, report.redundancy_tolerance
        );
        let verdict = |m: &Option<easyfs::oracle::Mismatch>| match m {
            None => "exact".to_string(),
            Some(m) => format!("differs at case {} entry {}", m.case, m.index),
        };
        println!("propagation: {} cases, {}", report.propagation_cases, verdict(&report.propagation_mismatch));
        println!("influence: {} cases, {}", report.propagation_cases, verdict(&report.influence_mismatch));
    }
    if report.passed() {
        println!("PASS");
        Ok(())
    } else {
        let w = &report.redundancy_worst;
        Err(Failure::Data(anyhow::anyhow!(
            "oracle mismatch: worst redundancy error {:.3e} at case {} feature {}",
            w.relative_error,
            w.case,
            w.index
        )))
    }
}

#[derive(Serialize)]
struct BenchSettings<'a> {
    p_list: &'a [usize],
    r_list: &'a [f64],
    ns: usize,
    folds: usize,
    fold_seed: u64,
    alpha: f64,
    timings: Option<PathBuf>,
}

pub fn bench(args: BenchArgs) -> Outcome {
    let started = now();
    let base = checked(args.selection.config())?;
    let r_list = if args.r_list.is_empty() { vec![base.r_percent] } else { args.r_list.clone() };
    let mut grid = Vec::new();
    for &p in &args.p_list {
        for &r in &r_list {
            let cfg = SelectionConfig { p: (p > 0).then_some(p), use_rnp: p > 0, r_percent: r, ..base.clone() };
            grid.push((p, checked(cfg)?));
        }
    }
    check_folds(args.folds)?;
    let (data, record) = load(&args.input)?;
    check_counts(&[args.ns], data.n_features())?;
    if let Some(&p) = args.p_list.iter().find(|&&p| p > 0 && p <= data.n_features()) {
        return Err(Failure::usage(format!(
            "network size {p} must exceed the {} input features",
            data.n_features()
        )));
    }

    let mut w = csv::Writer::from_writer(sink(args.output.as_deref())?);
    w.write_record(["p", "r", "ns", "metric", "mean", "selection_seconds"]).context("writing timings")?;
    for (p, cfg) in &grid {
        let report = cross_validate(&data, cfg, &[args.ns], args.folds, args.fold_seed, args.alpha)?.remove(0);
        w.write_record([
            p.to_string(),
            cfg.r_percent.to_string(),
            args.ns.to_string(),
            report.metric,
            report.mean.to_string(),
            format!("{:.6}", report.selection_seconds),
        ])
        .context("writing timings")?;
        w.flush()?;
    }
    drop(w);

    if let Some(path) = &args.output {
        let settings = BenchSettings {
            p_list: &args.p_list,
            r_list: &r_list,
            ns: args.ns,
            folds: args.folds,
            fold_seed: args.fold_seed,
            alpha: args.alpha,
            timings: Some(path.clone()),
        };
        Manifest::new("bench", record, base, settings, started).write(&sidecar(path))?;
    }
    Ok(())
}
