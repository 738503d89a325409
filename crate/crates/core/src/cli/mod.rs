//! The `gca` command line: argument parsing and one function per subcommand.
//!
//! CSV outputs start with a `# config_hash=... seed=...` comment line followed
//! by a fixed header row.

mod settings;

pub use settings::Settings;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::autodiff::{op_suite, OpCheck};
use crate::config;
use crate::data::{self, gen_synthetic, split, vocabularies, SyntheticSpec};
use crate::error::{GcaError, Result};
use crate::metrics::{
    chance_hit_rate, evaluate_model, mutation_rank_shift, pooled_populations, predict_all,
    protein_site_rankings, similarity_grid, site_hit_rate, HeadSelect, POPULATIONS,
};
use crate::model::{
    end_to_end_check, load_checkpoint, save_checkpoint, train_with, DtiModel,
    InteractionMode, ModelConfig, ModelSpec,
};

pub const CHECKPOINT_FILE: &str = "model.gca";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";

#[derive(Debug, Parser)]
#[command(name = "gca", version, about = "Gated cross-attention drug-target affinity models")]
pub struct Cli {
    /// Log progress at info level (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on a dataset TSV; writes a checkpoint, the epoch log and the split.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// MSE and C-index of a checkpoint on a dataset TSV.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-head ranked attention positions with weights, as JSON.
    Explain {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Only the first N records.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and record the 4x4 pooled-feature similarity grid every epoch.
    Simgrid {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        /// Interaction mode; defaults to the configured one.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Binding-site hit rate against k and neighborhood, with the chance rate.
    Sitehit {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        sites: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank shift of protein positions around a single-residue substitution.
    Mutate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        smiles: String,
        #[arg(long)]
        fasta: String,
        /// 0-based residue index.
        #[arg(long)]
        position: usize,
        #[arg(long)]
        residue: char,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every op and of the configured model.
    Gradcheck {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Number of random seeds per check, starting at the configured seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a planted-motif dataset and its true-site file.
    Synth {
        /// Generator key=value file (n_drugs, n_targets, sigma, seed, ...).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `std::env::args`, runs the subcommand and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { cfg, data, out } => train_cmd(&settings(&cfg)?, &data, &out),
        Command::Eval { cfg, checkpoint, data, out } => {
            let (s, model) = checkpoint_model(&cfg, &checkpoint)?;
            emit(out.as_deref(), &eval_csv(&s, &model, &data)?)
        }
        Command::Explain { cfg, checkpoint, data, limit, out } => {
            let (_, model) = checkpoint_model(&cfg, &checkpoint)?;
            emit(out.as_deref(), &explain_json(&model, &data, limit)?)
        }
        Command::Simgrid { cfg, data, mode, out } => {
            let mut s = settings(&cfg)?;
            if let Some(m) = mode {
                s.spec.interaction = InteractionMode::parse(&m).ok_or_else(|| {
                    GcaError::Config(format!("mode {m:?} is not one of none|gca|decoder|ap"))
                })?;
                s.spec.validate()?;
            }
            emit(out.as_deref(), &simgrid_csv(&s, &data)?)
        }
        Command::Sitehit { cfg, checkpoint, data, sites, out } => {
            let (s, model) = checkpoint_model(&cfg, &checkpoint)?;
            emit(out.as_deref(), &sitehit_csv(&s, &model, &data, &sites)?)
        }
        Command::Mutate { cfg, checkpoint, smiles, fasta, position, residue, out } => {
            let (s, model) = checkpoint_model(&cfg, &checkpoint)?;
            emit(out.as_deref(), &mutate_csv(&s, &model, &smiles, &fasta, position, residue)?)
        }
        Command::Gradcheck { cfg, seeds, tol, out } => {
            let s = settings(&cfg)?;
            let (text, all_passed) = gradcheck_table(&s, seeds, tol)?;
            emit(out.as_deref(), &text)?;
            if all_passed {
                Ok(())
            } else {
                Err(GcaError::Numeric(format!("gradient check failed at tolerance {tol}")))
            }
        }
        Command::Synth { config, overrides, out } => {
            let mut entries = match config {
                Some(p) => config::read_pairs(p)?,
                None => Vec::new(),
            };
            for o in &overrides {
                entries.push(config::parse_override(o)?);
            }
            let spec = SyntheticSpec::from_entries(&entries)?;
            let data = gen_synthetic(&spec)?;
            data.write(&out)?;
            write_file(&out.join("synth.txt"), &spec.to_text())?;
            println!(
                "wrote {} records, {} with true sites, to {}",
                data.records.len(),
                data.sites.values().filter(|v| !v.is_empty()).count(),
                out.display()
            );
            Ok(())
        }
    }
}

fn settings(cfg: &ConfigArgs) -> Result<Settings> {
    Settings::resolve(cfg.config.as_deref(), &cfg.overrides)
}

fn checkpoint_model(cfg: &ConfigArgs, path: &Path) -> Result<(Settings, DtiModel)> {
    let mut s = settings(cfg)?;
    let model = load_checkpoint(path)?;
    s.adopt_checkpoint_spec(&model.config().spec)?;
    Ok((s, model))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| GcaError::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| GcaError::io("<stdout>", e)),
    }
}

fn csv_preamble(s: &Settings, header: &str) -> String {
    format!("# config_hash={} seed={}\n{header}\n", s.hash(), s.train.seed)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fresh_model(s: &Settings, records: &[data::AffinityRecord]) -> Result<DtiModel> {
    let (dv, pv) = vocabularies(records)?;
    DtiModel::new(ModelConfig::new(s.spec.clone(), dv, pv)?, s.train.seed)
}

pub fn train_cmd(s: &Settings, data_path: &Path, out: &Path) -> Result<()> {
    let records = data::load_dataset(data_path)?;
    let (train_recs, test_recs) = split(&records, s.train.test_fraction, s.train.seed)?;
    std::fs::create_dir_all(out).map_err(|e| GcaError::io(out, e))?;
    data::write_dataset(out.join("train.tsv"), &train_recs)?;
    if !test_recs.is_empty() {
        data::write_dataset(out.join("test.tsv"), &test_recs)?;
    }
    write_file(&out.join("settings.txt"), &s.to_text())?;

    let mut model = fresh_model(s, &records)?;
    let train_set = model.examples(&train_recs)?;
    let test_set = model.examples(&test_recs)?;
    let val = (!test_set.is_empty()).then_some(test_set.as_slice());
    let log = train_with(&mut model, &train_set, val, &s.train, |_, _| Ok(()))?;

    let mut csv = csv_preamble(s, "epoch,train_mse,val_mse,val_c_index");
    for r in &log.epochs {
        let _ = writeln!(csv, "{},{},{},{}", r.epoch, r.train_mse, opt(r.val_mse), opt(r.val_c_index));
    }
    write_file(&out.join(TRAIN_LOG_FILE), &csv)?;
    save_checkpoint(&model, out.join(CHECKPOINT_FILE))?;
    if let Some(last) = log.epochs.last() {
        println!(
            "trained {} epochs: train_mse={:.4} test_mse={} test_c_index={}",
            last.epoch,
            last.train_mse,
            opt(last.val_mse),
            opt(last.val_c_index)
        );
    }
    Ok(())
}

pub fn eval_csv(s: &Settings, model: &DtiModel, data_path: &Path) -> Result<String> {
    let records = data::load_dataset(data_path)?;
    let report = evaluate_model(model, &model.examples(&records)?)?;
    let mut csv = csv_preamble(s, "n_records,mse,c_index,n_pairs_evaluated");
    let _ = writeln!(csv, "{},{},{},{}", records.len(), report.mse, report.c_index, report.n_pairs_evaluated);
    Ok(csv)
}

#[derive(Serialize)]
struct RankedPosition {
    position: usize,
    symbol: String,
    weight: f64,
}

#[derive(Serialize)]
struct HeadPositions {
    head: usize,
    positions: Vec<RankedPosition>,
}

#[derive(Serialize)]
struct Explanation {
    drug_id: String,
    target_id: String,
    affinity: f64,
    prediction: f64,
    drug: Vec<HeadPositions>,
    protein: Vec<HeadPositions>,
}

pub fn explain_json(model: &DtiModel, data_path: &Path, limit: Option<usize>) -> Result<String> {
    let mut records = data::load_dataset(data_path)?;
    records.truncate(limit.unwrap_or(usize::MAX));
    let set = model.examples(&records)?;
    let predictions = predict_all(model, &set)?;
    let mut out = Vec::with_capacity(records.len());
    for ((rec, ex), prediction) in records.iter().zip(&set).zip(predictions) {
        let ranking = model.extract_attention(&ex.drug, &ex.protein)?;
        let side = |heads: Vec<crate::model::HeadRanking>, text: &str| {
            let chars: Vec<char> = text.chars().collect();
            heads
                .into_iter()
                .map(|h| HeadPositions {
                    head: h.head,
                    positions: h
                        .positions
                        .into_iter()
                        .map(|(position, weight)| RankedPosition {
                            position,
                            symbol: chars[position].to_string(),
                            weight,
                        })
                        .collect(),
                })
                .collect()
        };
        out.push(Explanation {
            drug_id: rec.drug_id.clone(),
            target_id: rec.target_id.clone(),
            affinity: rec.affinity,
            prediction,
            drug: side(ranking.drug, &rec.smiles),
            protein: side(ranking.protein, &rec.fasta),
        });
    }
    serde_json::to_string_pretty(&out)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| GcaError::Data(format!("cannot serialize explanations: {e}")))
}

/// Trains on the split of `data_path` and records the similarity grid of the
/// test split after every epoch. A numeric failure during training ends the
/// run early; the rows so far are kept and the divergence is noted in a
/// trailing comment line.
pub fn simgrid_csv(s: &Settings, data_path: &Path) -> Result<String> {
    let records = data::load_dataset(data_path)?;
    let (train_recs, test_recs) = split(&records, s.train.test_fraction, s.train.seed)?;
    let probe_recs = if test_recs.is_empty() { &train_recs } else { &test_recs };
    let mut model = fresh_model(s, &records)?;
    let train_set = model.examples(&train_recs)?;
    let probe_set = model.examples(probe_recs)?;

    let mut csv = csv_preamble(
        s,
        &format!("epoch,mode,row,{},excluded,protein_mixed", POPULATIONS.join(",")),
    );
    let mode = s.spec.interaction.name();
    let result = train_with(&mut model, &train_set, None, &s.train, |rec, m| {
        let pops = pooled_populations(m, &probe_set)?;
        let grid = similarity_grid([&pops[0], &pops[1], &pops[2], &pops[3]], rec.epoch)?;
        for (i, name) in POPULATIONS.iter().enumerate() {
            let row: Vec<String> = grid.values[i].iter().map(f64::to_string).collect();
            let _ = writeln!(
                csv,
                "{},{mode},{name},{},{},{}",
                rec.epoch,
                row.join(","),
                grid.excluded,
                grid.protein_mixed()
            );
        }
        Ok(())
    });
    match result {
        Ok(_) => Ok(csv),
        Err(GcaError::Numeric(msg)) => {
            log::warn!("simgrid training diverged: {msg}");
            let _ = writeln!(csv, "# diverged: {msg}");
            Ok(csv)
        }
        Err(e) => Err(e),
    }
}

pub fn sitehit_csv(s: &Settings, model: &DtiModel, data_path: &Path, sites_path: &Path) -> Result<String> {
    let records = data::load_dataset(data_path)?;
    let site_map = data::load_sites(sites_path)?;
    let true_sites: Vec<Vec<usize>> = records
        .iter()
        .map(|r| site_map.get(&(r.drug_id.clone(), r.target_id.clone())).cloned().unwrap_or_default())
        .collect();
    let set = model.examples(&records)?;
    let lens: Vec<usize> = set.iter().map(|e| e.protein.valid_len).collect();
    // sites beyond the truncated sequence cannot be ranked
    let true_sites: Vec<Vec<usize>> = true_sites
        .into_iter()
        .zip(&lens)
        .map(|(v, &l)| v.into_iter().filter(|&p| p < l).collect())
        .collect();
    let rankings = protein_site_rankings(model, &set)?;
    let mut csv = csv_preamble(s, "k_percent,neighborhood,head,rate,chance,evaluated");
    for nb in [0, 1] {
        for k in 1..=20 {
            let k = k as f64;
            let chance = chance_hit_rate(&lens, &true_sites, k, nb)?;
            for (head, ranks) in &rankings {
                let r = site_hit_rate(ranks, &true_sites, k, nb)?;
                let _ = writeln!(csv, "{k},{nb},{head},{},{chance},{}", r.rate, r.evaluated);
            }
        }
    }
    Ok(csv)
}

pub fn mutate_csv(
    s: &Settings,
    model: &DtiModel,
    smiles: &str,
    fasta: &str,
    position: usize,
    residue: char,
) -> Result<String> {
    let ex = model.example(smiles, fasta, 0.0)?;
    let rows = mutation_rank_shift(model, &ex.drug, &ex.protein, position, residue)?;
    if s.rank_head >= model.config().spec.num_heads {
        return Err(GcaError::Config(format!(
            "rank_head {} but the model has {} heads",
            s.rank_head,
            model.config().spec.num_heads
        )));
    }
    let mut csv = csv_preamble(s, "head,position,old_rank,new_rank,delta");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.head, r.position, r.old_rank, r.new_rank, r.delta);
    }
    let at = rows
        .iter()
        .find(|r| r.head == HeadSelect::Head(s.rank_head) && r.position == position);
    if let Some(r) = at {
        log::info!(
            "head {}: position {position} rank {} -> {} (delta {})",
            s.rank_head,
            r.old_rank,
            r.new_rank,
            r.delta
        );
    }
    Ok(csv)
}

/// Runs the op suite and the end-to-end model check for `seeds` seeds and
/// returns the table plus whether every row passed.
pub fn gradcheck_table(s: &Settings, seeds: u64, tol: f64) -> Result<(String, bool)> {
    let (h, first) = (1e-5, s.train.seed);
    let mut worst: Vec<(String, f64, bool)> = Vec::new();
    let mut record = |name: &str, rel: f64, passed: bool| match worst.iter_mut().find(|w| w.0 == name) {
        Some(w) => {
            w.1 = w.1.max(rel);
            w.2 &= passed;
        }
        None => worst.push((name.to_string(), rel, passed)),
    };
    for seed in first..first + seeds.max(1) {
        for OpCheck { op, report } in op_suite(seed, h, tol)? {
            record(op, report.max_rel_error, report.passed);
        }
        let r = end_to_end_check(&s.spec, seed, h, tol)?;
        record(&format!("model[{}]", model_label(&s.spec)), r.max_rel_error, r.passed);
    }
    let mut csv = csv_preamble(s, "check,seeds,max_rel_error,tol,status");
    for (name, rel, passed) in &worst {
        let status = if *passed { "pass" } else { "FAIL" };
        let _ = writeln!(csv, "{name},{},{rel:.3e},{tol},{status}", seeds.max(1));
    }
    Ok((csv, worst.iter().all(|w| w.2)))
}

fn model_label(spec: &ModelSpec) -> String {
    format!(
        "{}+{}/{}/{}",
        spec.encoder.kind.name(),
        spec.interaction.name(),
        spec.inner_normalizer.name(),
        spec.outer_normalizer.name()
    )
}
