use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use molkit::dataset::{
    dedup, input_scaffolds, merge_solubility, ood_reaction_sets, ood_solubility_filter, scaffold_split,
    scaffold_split_per_task, InstructionRecord, SolubilityRow, TaskGroup,
};
use molkit::fingerprint::{morgan, path_fp, Fingerprint};
use molkit::metrics::{evaluate, read_molecule};
use molkit::molgraph::{canonical_smiles, to_selfies, MolGraph};
use molkit::perturb::{make_pair, record_seed, PairRecord, PerturbError};
use molkit::sampling::{count_entropy, count_groups, counts_of, filter_groups, sample, select_groups, weights};
use molkit::substruct::{functional_groups, maccs_keys, maccs_table, FunctionalGroupLabel, KeyTable};
use molkit::toymodel::{
    gdr_ablation, pair_examples, pair_vocab, synthetic_pairs, synthetic_train_config, train_funcgroups, train_pairs,
    write_trace, SynthConfig, ToyModel, TrainConfig, TrainMode,
};

use crate::io::{self, input_err};

const BATCH: usize = 2048;

pub fn print_seed(seed: u64) {
    println!("seed={seed}");
    io::info("seed", json!({ "seed": seed }));
}

/// Molecules from positional arguments, else from `--in`, else stdin.
/// Each comes with its 1-based position.
fn molecule_inputs(args: &[String], input: Option<&Path>) -> Result<Vec<(usize, String)>> {
    if !args.is_empty() {
        return Ok(args.iter().cloned().enumerate().map(|(i, s)| (i + 1, s)).collect());
    }
    let mut text = String::new();
    match input {
        Some(p) => text = io::read_text(p)?,
        None => {
            std::io::stdin().read_to_string(&mut text).context("reading stdin")?;
        }
    }
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .collect())
}

fn parse_all(items: &[(usize, String)]) -> Result<Vec<MolGraph>> {
    items
        .par_iter()
        .map(|(n, s)| read_molecule(s).map_err(|e| input_err(format!("molecule {n} `{s}`: {e}"))))
        .collect()
}

pub fn canonicalize(args: &[String], input: Option<&Path>, selfies: bool) -> Result<()> {
    let items = molecule_inputs(args, input)?;
    let graphs = parse_all(&items)?;
    let lines: Vec<String> = graphs
        .par_iter()
        .zip(&items)
        .map(|(g, (n, s))| {
            if selfies {
                to_selfies(g).map_err(|e| input_err(format!("molecule {n} `{s}`: {e}")))
            } else {
                Ok(canonical_smiles(g))
            }
        })
        .collect::<Result<_>>()?;
    let mut out = std::io::stdout().lock();
    for l in lines {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FpKind {
    Morgan,
    Path,
    Maccs,
}

pub fn fingerprint(args: &[String], input: Option<&Path>, kind: FpKind, radius: usize, width: usize, max_path: usize) -> Result<()> {
    if width == 0 {
        return Err(input_err("--width must be positive"));
    }
    if max_path == 0 {
        return Err(input_err("--max-path must be positive"));
    }
    let items = molecule_inputs(args, input)?;
    let graphs = parse_all(&items)?;
    let fps: Vec<Fingerprint> = graphs
        .par_iter()
        .map(|g| match kind {
            FpKind::Morgan => morgan(g, radius, width),
            FpKind::Path => path_fp(g, 1, max_path, width).expect("bounds checked"),
            FpKind::Maccs => maccs_keys(g, maccs_table()).fingerprint,
        })
        .collect();
    let mut out = std::io::stdout().lock();
    for fp in fps {
        writeln!(out, "{fp}")?;
    }
    Ok(())
}

fn key_table(path: Option<&Path>) -> Result<KeyTable> {
    match path {
        Some(p) => KeyTable::parse(&io::read_text(p)?).map_err(|e| input_err(format!("{}: {e}", p.display()))),
        None => Ok(maccs_table().clone()),
    }
}

#[derive(Default)]
struct PairCounts {
    written: usize,
    no_input: usize,
    failed: usize,
}

/// Streams records in batches, perturbing each batch in parallel and
/// writing results in input order.
pub fn make_pairs(input: &Path, out: &Path, ratio: f64, seed: u64, keys: Option<&Path>) -> Result<()> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(input_err(format!("--ratio {ratio} outside [0, 1]")));
    }
    let table = key_table(keys)?;
    print_seed(seed);
    let reader = io::open(input)?;
    let mut writer = io::create(out)?;
    let mut counts = PairCounts::default();
    let mut index = 0u64;
    let mut lines = io::numbered_lines(reader, input);
    loop {
        let mut batch = Vec::with_capacity(BATCH);
        for item in lines.by_ref().take(BATCH) {
            let (n, line) = item?;
            let record: InstructionRecord = io::parse_line(input, n, &line)?;
            record.check().map_err(|e| input_err(format!("{}:{n}: {e}", input.display())))?;
            batch.push((n, index, record));
            index += 1;
        }
        if batch.is_empty() {
            break;
        }
        let results: Vec<_> = batch
            .into_par_iter()
            .map(|(n, id, record)| {
                let out = make_pair(&record, &table, ratio, record_seed(seed, id))
                    .and_then(|pair| PairRecord::new(record, &pair).map_err(PerturbError::from));
                (n, out)
            })
            .collect();
        for (n, r) in results {
            match r {
                Ok(pair) => {
                    serde_json::to_writer(&mut writer, &pair)?;
                    writer.write_all(b"\n")?;
                    counts.written += 1;
                }
                Err(PerturbError::NoInput) => counts.no_input += 1,
                Err(e) => {
                    io::warn("make_pairs.skip", json!({ "line": n, "reason": e.to_string() }));
                    counts.failed += 1;
                }
            }
        }
    }
    writer.flush()?;
    io::info(
        "make_pairs.done",
        json!({ "records": index, "pairs": counts.written, "no_input": counts.no_input, "failed": counts.failed, "keys": table.version() }),
    );
    Ok(())
}

fn read_indices(path: &Path) -> Result<Vec<usize>> {
    io::read_text(path)?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| input_err(format!("{}: bad group index `{t}`", path.display()))))
        .collect()
}

pub fn sample_pretrain(labels: &Path, n: usize, seed: u64, out: &Path, retained: Option<&Path>, keep_all: bool) -> Result<()> {
    let labels: Vec<FunctionalGroupLabel> = io::read_jsonl(labels)?;
    if labels.is_empty() {
        return Err(input_err("no labels"));
    }
    print_seed(seed);
    let stats = count_groups(&labels).map_err(|e| input_err(e.to_string()))?;
    let keep: Vec<usize> = match (retained, keep_all) {
        (Some(p), _) => read_indices(p)?,
        (None, true) => (0..stats.counts.len()).collect(),
        (None, false) => {
            let f = filter_groups(&stats.counts).map_err(|e| input_err(e.to_string()))?;
            io::info(
                "sample_pretrain.filter",
                json!({ "retained": f.retained.len(), "dropped_frequent": f.dropped_frequent, "dropped_rare": f.dropped_rare }),
            );
            f.retained
        }
    };
    let selected = select_groups(&labels, &keep).map_err(|e| input_err(e.to_string()))?;
    let stats = count_groups(&selected).map_err(|e| input_err(e.to_string()))?;
    let w = weights(&selected, &stats).map_err(|e| input_err(e.to_string()))?;
    let idx = sample(&w, n, seed).map_err(|e| input_err(e.to_string()))?;
    let mut writer = io::create(out)?;
    for i in &idx {
        writeln!(writer, "{i}")?;
    }
    writer.flush()?;
    io::info(
        "sample_pretrain.done",
        json!({
            "molecules": labels.len(),
            "groups": keep.len(),
            "draws": n,
            "entropy_before": count_entropy(&stats.counts),
            "entropy_after": count_entropy(&counts_of(&selected, &idx)),
        }),
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DatasetStep {
    Dedup,
    Split,
    OodLogs,
    OodRxn,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DedupConfig {
    input: PathBuf,
    output: PathBuf,
}

fn default_test_fraction() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitConfig {
    input: PathBuf,
    train_out: PathBuf,
    test_out: PathBuf,
    #[serde(default = "default_test_fraction")]
    test_fraction: f64,
    #[serde(default = "default_true")]
    per_task: bool,
}

fn default_std_max() -> f64 {
    0.1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OodLogsConfig {
    input: PathBuf,
    output: PathBuf,
    #[serde(default = "default_std_max")]
    std_max: f64,
    /// Record files whose molecules must not appear in the OOD set.
    #[serde(default)]
    exclude: Vec<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OodRxnConfig {
    train: PathBuf,
    forward: PathBuf,
    retro: PathBuf,
    #[serde(default = "default_test_fraction")]
    test_fraction: f64,
    forward_train_out: PathBuf,
    forward_test_out: PathBuf,
    retro_train_out: PathBuf,
    retro_test_out: PathBuf,
}

fn read_records(path: &Path) -> Result<Vec<InstructionRecord>> {
    let records: Vec<InstructionRecord> = io::read_jsonl(path)?;
    for (i, r) in records.iter().enumerate() {
        r.check().map_err(|e| input_err(format!("{} record {}: {e}", path.display(), i + 1)))?;
    }
    Ok(records)
}

fn check_fraction(f: f64) -> Result<()> {
    if (0.0..=1.0).contains(&f) {
        Ok(())
    } else {
        Err(input_err(format!("test_fraction {f} outside [0, 1]")))
    }
}

pub fn build_dataset(step: DatasetStep, config: &Path, sets: &[String]) -> Result<()> {
    let cfg = Some(config);
    match step {
        DatasetStep::Dedup => {
            let c: DedupConfig = io::load_config(cfg, sets, |_| Ok(()))?;
            let (kept, report) = dedup(read_records(&c.input)?);
            io::write_jsonl(&c.output, &kept)?;
            io::info("dedup.done", json!({ "kept": report.kept, "dropped": report.dropped }));
        }
        DatasetStep::Split => {
            let c: SplitConfig = io::load_config(cfg, sets, |_| Ok(()))?;
            check_fraction(c.test_fraction)?;
            let records = read_records(&c.input)?;
            let out = if c.per_task { scaffold_split_per_task(records, c.test_fraction) } else { scaffold_split(records, c.test_fraction) };
            for w in &out.warnings {
                io::warn("split.warning", json!({ "message": w }));
            }
            io::write_jsonl(&c.train_out, &out.train)?;
            io::write_jsonl(&c.test_out, &out.test)?;
            io::info(
                "split.done",
                json!({ "train": out.train.len(), "test": out.test.len(), "train_groups": out.train_groups, "test_groups": out.test_groups }),
            );
        }
        DatasetStep::OodLogs => {
            let c: OodLogsConfig = io::load_config(cfg, sets, |_| Ok(()))?;
            if !(c.std_max > 0.0 && c.std_max.is_finite()) {
                return Err(input_err("std_max must be positive"));
            }
            let rows: Vec<SolubilityRow> = io::read_jsonl(&c.input)?;
            let (entries, bad) = merge_solubility(&rows);
            for i in &bad {
                io::warn("ood_logs.unparseable", json!({ "line": i + 1, "smiles": rows[*i].smiles }));
            }
            let mut exclude = HashSet::new();
            for p in &c.exclude {
                exclude.extend(read_records(p)?.iter().filter_map(|r| r.molecule_key()));
            }
            let kept = ood_solubility_filter(&entries, &exclude, c.std_max).context("building OOD solubility records")?;
            io::write_jsonl(&c.output, &kept)?;
            io::info("ood_logs.done", json!({ "molecules": entries.len(), "kept": kept.len(), "unparseable": bad.len() }));
        }
        DatasetStep::OodRxn => {
            let c: OodRxnConfig = io::load_config(cfg, sets, |_| Ok(()))?;
            check_fraction(c.test_fraction)?;
            let scaffolds = input_scaffolds(&read_records(&c.train)?);
            let (fs, rs) = ood_reaction_sets(read_records(&c.forward)?, read_records(&c.retro)?, &scaffolds, c.test_fraction)
                .map_err(|e| input_err(format!("reaction record: {e}")))?;
            io::write_jsonl(&c.forward_train_out, &fs.train)?;
            io::write_jsonl(&c.forward_test_out, &fs.test)?;
            io::write_jsonl(&c.retro_train_out, &rs.train)?;
            io::write_jsonl(&c.retro_test_out, &rs.test)?;
            io::info(
                "ood_rxn.done",
                json!({ "forward": [fs.train.len(), fs.test.len()], "retro": [rs.train.len(), rs.test.len()] }),
            );
        }
    }
    Ok(())
}

const MOLPO_KEYS: [&str; 5] = ["beta", "lambda_margin", "lambda_clip", "c", "ema_decay"];

/// Moves top-level MolPO keys into the `molpo` section so that a bare
/// MolPO config file also works as a training config.
fn hoist_molpo_keys(v: &mut Value) -> Result<()> {
    let obj = v.as_object_mut().expect("checked object");
    let mut moved = serde_json::Map::new();
    for k in MOLPO_KEYS {
        if let Some(x) = obj.remove(k) {
            moved.insert(k.to_string(), x);
        }
    }
    if moved.is_empty() {
        return Ok(());
    }
    let section = obj.entry("molpo").or_insert_with(|| json!({}));
    let section = section.as_object_mut().ok_or_else(|| input_err("`molpo` must be an object"))?;
    for (k, x) in moved {
        if section.insert(k.clone(), x).is_some() {
            return Err(input_err(format!("`{k}` given both at top level and in `molpo`")));
        }
    }
    Ok(())
}

pub struct TrainArgs<'a> {
    pub mode: TrainMode,
    pub pairs: &'a Path,
    pub config: Option<&'a Path>,
    pub sets: &'a [String],
    pub seed: Option<u64>,
    pub out: &'a Path,
    pub trace: Option<&'a Path>,
}

pub fn train_toy(a: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = io::load_config(a.config, a.sets, hoist_molpo_keys)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| input_err(e.to_string()))?;
    print_seed(cfg.seed);
    let pairs: Vec<PairRecord> = io::read_jsonl(a.pairs)?;
    if pairs.is_empty() {
        return Err(input_err(format!("{}: no pairs", a.pairs.display())));
    }
    let vocab = pair_vocab(&pairs, cfg.use_selfies_tokens).map_err(|e| input_err(e.to_string()))?;
    let mut model = ToyModel::init(cfg.model, vocab, cfg.seed);
    match a.mode {
        TrainMode::SftOnly | TrainMode::SftPlusMolpo => {
            let data = pair_examples(&pairs, &model.vocab, cfg.use_selfies_tokens).map_err(|e| input_err(e.to_string()))?;
            let trace = train_pairs(&mut model, &data, a.mode, &cfg)?;
            if let Some(p) = a.trace {
                let mut w = io::create(p)?;
                write_trace(&mut w, &trace)?;
                w.flush()?;
            }
            if let Some(last) = trace.last() {
                println!("step={} l_sft={:.6} l_molpo={:.6} gdr={:.4}", last.step, last.l_sft, last.l_molpo, last.gdr);
            }
        }
        TrainMode::FuncgroupPretrain => {
            let data: Vec<(MolGraph, Vec<u8>)> = pairs
                .iter()
                .enumerate()
                .filter_map(|(i, p)| p.record.input_graph().map(|g| (i, g)))
                .map(|(i, g)| {
                    let g = g.map_err(|e| input_err(format!("pair {}: {e}", i + 1)))?;
                    let bits = functional_groups(&g).bits;
                    Ok((g, bits))
                })
                .collect::<Result<_>>()?;
            let trace = train_funcgroups(&mut model, &data, &cfg)?;
            if let Some(p) = a.trace {
                let mut w = io::create(p)?;
                writeln!(w, "step,l_func")?;
                for (step, l) in &trace {
                    writeln!(w, "{step},{l:.6}")?;
                }
                w.flush()?;
            }
            if let Some((step, l)) = trace.last() {
                println!("step={step} l_func={l:.6}");
            }
        }
    }
    let mut w = io::create(a.out)?;
    model.save(&mut w)?;
    w.flush()?;
    io::info("train_toy.done", json!({ "params": model.params.count(), "out": a.out }));
    Ok(())
}

fn text_field(v: &Value, names: &[&str], path: &Path, line: usize) -> Result<String> {
    let field = names.iter().find_map(|n| v.get(n));
    match field {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(Value::Bool(b)) => Ok(b.to_string()),
        Some(Value::Null) => Ok(String::new()),
        _ => Err(input_err(format!("{}:{line}: missing `{}`", path.display(), names[0]))),
    }
}

fn read_field(path: &Path, names: &[&str]) -> Result<Vec<String>> {
    io::numbered_lines(io::open(path)?, path)
        .map(|r| {
            let (n, l) = r?;
            let v: Value = io::parse_line(path, n, &l)?;
            text_field(&v, names, path, n)
        })
        .collect()
}

pub fn eval(pred: &Path, reference: &Path, group: TaskGroup, out: &Path, train_mean: Option<f64>) -> Result<()> {
    let preds = read_field(pred, &["prediction", "pred"])?;
    let refs = read_field(reference, &["target", "reference"])?;
    let report = evaluate(group, &preds, &refs, train_mean).map_err(|e| input_err(e.to_string()))?;
    io::write_json(out, &report)?;
    io::info("eval.done", json!({ "task_group": group.as_str(), "n": report.n, "invalid_rate": report.invalid_rate }));
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ScoredPair {
    #[serde(alias = "chosen")]
    r_w: f64,
    #[serde(alias = "rejected")]
    r_l: f64,
}

pub fn gdr(pairs: &Path) -> Result<()> {
    let rows: Vec<ScoredPair> = io::read_jsonl(pairs)?;
    let v: Vec<(f64, f64)> = rows.iter().map(|r| (r.r_w, r.r_l)).collect();
    let g = molkit::molpo::gdr(&v).map_err(|e| input_err(e.to_string()))?;
    println!("{g:.4}");
    Ok(())
}

pub fn synth_task(cfg: SynthConfig, out: &Path) -> Result<()> {
    if cfg.min_atoms == 0 || cfg.min_atoms > cfg.max_atoms {
        return Err(input_err("need 1 <= --min-atoms <= --max-atoms"));
    }
    print_seed(cfg.seed);
    let pairs = synthetic_pairs(&cfg);
    io::write_jsonl(out, &pairs)?;
    io::info("synth_task.done", json!({ "pairs": pairs.len() }));
    Ok(())
}

#[derive(Serialize)]
struct AblationReport {
    train: usize,
    test: usize,
    runs: Vec<molkit::toymodel::AblationOutcome>,
}

pub fn ablation(first_seed: u64, seeds: u64, train: usize, test: usize, out: Option<&Path>) -> Result<()> {
    if seeds == 0 || train == 0 || test == 0 {
        return Err(input_err("--seeds, --train and --test must be positive"));
    }
    print_seed(first_seed);
    let runs = (first_seed..first_seed + seeds)
        .into_par_iter()
        .map(|s| gdr_ablation(s, train, test, &synthetic_train_config(s)))
        .collect::<Result<Vec<_>, _>>()?;
    for r in &runs {
        println!("seed={} sft_only={:.4} sft_plus_molpo={:.4}", r.seed, r.sft_only, r.sft_plus_molpo);
    }
    if let Some(p) = out {
        io::write_json(p, &AblationReport { train, test, runs })?;
    }
    Ok(())
}
