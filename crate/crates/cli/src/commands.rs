//! Subcommand implementations. Every run writes its resolved config, its
//! artifacts, and a `run_meta.json` holding wallclock data (kept out of the
//! reports so reruns with the same seed produce byte-identical reports).

use crate::config::KeyValues;
use fairrep::data::{
    controlled_split, direction_split_dataset, gender_direction_split, load_dataset,
    read_embedding_text, save_dataset, synth_mixture, LabeledDataset, SynthConfig,
};
use fairrep::error::{Error, Result};
use fairrep::evalkit::{
    numerical_rank, numerical_rank_with_tol, pair_similarity_eval, run_audit, AuditOptions,
    AuditReport, ProbeConfig,
};
use fairrep::neural::checkpoint::save_checkpoint;
use fairrep::neural::OptimizerKind;
use fairrep::trainer::{
    corrupt_labels, train_ablation_unconstrained, train_constrained, train_unconstrained,
    DebiasConfig, DebiasOutcome, MultiAttrMode, Objective, OptimizerSettings,
};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub fn cmd_synth(kv: &KeyValues) -> Result<()> {
    let out: PathBuf = require(kv, "out")?;
    let n = kv.parse_or("n", 1000usize)?;
    let d = kv.parse_or("d", 10usize)?;
    let g_classes = match kv.get("g_classes") {
        Some(raw) => raw
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidConfig(format!("bad g_classes entry {p:?}")))
            })
            .collect::<Result<Vec<usize>>>()?,
        None => vec![2],
    };
    let mut cfg = SynthConfig::new(n, d, g_classes, kv.parse_or("y_classes", 2usize)?);
    cfg.correlation = kv.parse_or("correlation", 0.5)?;
    cfg.noise = kv.parse_or("noise", 0.5)?;
    cfg.seed = kv.parse_or("seed", 0u64)?;
    cfg.train_fraction = kv.parse_or("train_fraction", 0.7)?;
    cfg.dev_fraction = kv.parse_or("dev_fraction", 0.1)?;
    let ds = synth_mixture(&cfg)?;
    save_dataset(&out, &ds)?;
    println!(
        "wrote {} ({} samples, {} dims, {} protected attribute(s))",
        out.display(),
        ds.len(),
        ds.dim(),
        ds.attribute_count()
    );
    Ok(())
}

fn require<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<T> {
    kv.parse(key)?
        .ok_or_else(|| Error::InvalidConfig(format!("missing required key `{key}`")))
}

/// Loads the run input: a dataset container, or an embedding table reduced
/// to a bias-direction dataset.
fn load_input(kv: &KeyValues) -> Result<LabeledDataset> {
    match (kv.get("input"), kv.get("embeddings")) {
        (Some(path), None) => load_dataset(Path::new(path)),
        (None, Some(emb)) => {
            let pairs_path: PathBuf = require(kv, "pairs")?;
            let table = read_embedding_text(Path::new(emb))?;
            let pairs = read_pairs(&pairs_path)?;
            let top_n = kv.parse_or("top_n", 1000usize)?;
            let split = gender_direction_split(&table, &pairs, top_n)?;
            direction_split_dataset(
                &table,
                &split,
                kv.parse_or("include_neutral", false)?,
                kv.parse_or("seed", 0u64)?,
            )
        }
        (Some(_), Some(_)) => Err(Error::InvalidConfig(
            "give either `input` or `embeddings`, not both".into(),
        )),
        (None, None) => Err(Error::InvalidConfig(
            "missing input: set `input` or `embeddings`".into(),
        )),
    }
}

fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => pairs.push((a.to_string(), b.to_string())),
            _ => return Err(Error::Format(format!("bad pair line {line:?}"))),
        }
    }
    if pairs.is_empty() {
        return Err(Error::Format("no pairs in pair file".into()));
    }
    Ok(pairs)
}

fn build_debias_config(kv: &KeyValues) -> Result<DebiasConfig> {
    let seed = kv.parse_or("seed", 0u64)?;
    let objective = match kv.get("objective").unwrap_or("unconstrained") {
        "unconstrained" => Objective::Unconstrained,
        "constrained" => Objective::Constrained,
        "ablation" => Objective::AblationUnconstrained,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown objective {other:?} (unconstrained | constrained | ablation)"
            )))
        }
    };
    let mut cfg = match objective {
        Objective::Unconstrained => DebiasConfig::unconstrained(seed),
        Objective::Constrained => DebiasConfig::constrained(seed),
        Objective::AblationUnconstrained => DebiasConfig::ablation(seed),
    };
    cfg.lambda = kv.parse_or("lambda", cfg.lambda)?;
    cfg.epsilon_sq = kv.parse_or("epsilon_sq", cfg.epsilon_sq)?;
    cfg.epochs = kv.parse_or("epochs", cfg.epochs)?;
    cfg.batch_size = kv.parse_or("batch_size", cfg.batch_size)?;
    cfg.head_hidden = kv.parse_or("head_hidden", cfg.head_hidden)?;
    cfg.log_every = kv.parse_or("log_every", cfg.log_every)?;
    cfg.depth = kv.parse("depth")?;
    cfg.hidden_width = kv.parse("hidden_width")?;
    cfg.output_dim = kv.parse("output_dim")?;
    cfg.sphere_radius = kv.parse("sphere_radius")?;
    match kv.get("output_norm") {
        None | Some("on") => {}
        Some("off") => cfg.disable_output_norm = true,
        Some(other) => {
            return Err(Error::InvalidConfig(format!(
                "output_norm must be on|off, got {other:?}"
            )))
        }
    }
    cfg.multi_attr_mode = match kv.get("multi_attr_mode").unwrap_or("single") {
        "single" => MultiAttrMode::Single,
        "n-partition" => MultiAttrMode::NPartition,
        "one-partition" => MultiAttrMode::OnePartition,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown multi_attr_mode {other:?}"
            )))
        }
    };
    let learning_rate = kv.parse("learning_rate")?;
    cfg.optimizer = match kv.get("optimizer") {
        None => {
            let mut opt = cfg.optimizer;
            if let Some(lr) = learning_rate {
                opt.learning_rate = lr;
            }
            opt
        }
        Some("sgd") => OptimizerSettings {
            kind: OptimizerKind::MomentumSgd {
                momentum: kv.parse_or("momentum", 0.9)?,
            },
            learning_rate: learning_rate.unwrap_or(0.001),
        },
        Some("adamw") => OptimizerSettings {
            kind: OptimizerKind::DecoupledAdaptive {
                beta1: kv.parse_or("beta1", 0.9)?,
                beta2: kv.parse_or("beta2", 0.999)?,
                weight_decay: kv.parse_or("weight_decay", 0.0)?,
                epsilon: 1e-8,
            },
            learning_rate: learning_rate.unwrap_or(2e-5),
        },
        Some(other) => {
            return Err(Error::InvalidConfig(format!(
                "unknown optimizer {other:?} (sgd | adamw)"
            )))
        }
    };
    Ok(cfg)
}

fn build_audit_options(kv: &KeyValues) -> Result<AuditOptions> {
    let mut probe = ProbeConfig::default();
    probe.hidden_width = kv.parse_or("probe_hidden", probe.hidden_width)?;
    probe.max_epochs = kv.parse_or("probe_epochs", probe.max_epochs)?;
    probe.learning_rate = kv.parse_or("probe_learning_rate", probe.learning_rate)?;
    probe.batch_size = kv.parse_or("probe_batch_size", probe.batch_size)?;
    probe.patience = kv.parse_or("probe_patience", probe.patience)?;
    probe.seed = kv.parse_or("probe_seed", 0u64)?;
    let mut opts = AuditOptions {
        probe,
        ..AuditOptions::default()
    };
    if let Some(fractions) = kv.parse_f64_list("mdl_fractions")? {
        opts.mdl_fractions = fractions;
    }
    opts.run_mdl = kv.parse_or("run_mdl", true)?;
    opts.rank_tol_factor = kv.parse("rank_tol_factor")?;
    Ok(opts)
}

fn write_meta(dir: &Path, started_ms: u128, duration_ms: u128, extra: &[(String, String)]) -> Result<()> {
    let mut map = serde_json::Map::new();
    map.insert("started_unix_ms".into(), serde_json::json!(started_ms));
    map.insert("duration_ms".into(), serde_json::json!(duration_ms));
    for (k, v) in extra {
        map.insert(k.clone(), serde_json::json!(v));
    }
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(map))
        .map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join("run_meta.json"), text + "\n")?;
    Ok(())
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

pub struct DebiasArtifacts {
    pub debiased_path: PathBuf,
    pub final_cross_entropy: f64,
}

pub fn cmd_debias(kv: &KeyValues) -> Result<DebiasArtifacts> {
    // Read everything before touching the output directory, so a bad input
    // leaves no partial artifacts behind.
    let ds = load_input(kv)?;
    let cfg = build_debias_config(kv)?;
    let output_dir: PathBuf = require(kv, "output_dir")?;

    let mut train_g: Vec<Vec<usize>> = ds.g_all().to_vec();
    let corrupt_fraction = kv.parse_or("corrupt_fraction", 0.0)?;
    if corrupt_fraction > 0.0 {
        let corrupt_seed = kv.parse_or("corrupt_seed", cfg.seed.wrapping_add(1))?;
        train_g[0] = corrupt_labels(&train_g[0], corrupt_fraction, corrupt_seed)?;
    }

    let started = now_ms();
    let timer = Instant::now();
    let outcome: DebiasOutcome = match cfg.objective {
        Objective::Unconstrained => train_unconstrained(ds.vectors(), &train_g[0], &cfg)?,
        Objective::AblationUnconstrained => {
            train_ablation_unconstrained(ds.vectors(), &train_g[0], &cfg)?
        }
        Objective::Constrained => {
            let y = ds.y().ok_or_else(|| {
                Error::InvalidInput("constrained debiasing needs target labels".into())
            })?;
            train_constrained(ds.vectors(), y, &train_g, &cfg)?
        }
    };

    std::fs::create_dir_all(&output_dir)?;
    std::fs::write(output_dir.join("config.resolved"), kv.render())?;
    save_checkpoint(
        &output_dir.join("checkpoint.txt"),
        &outcome.feature_map,
        outcome.head.as_ref(),
    )?;
    let debiased = ds.with_vectors(outcome.feature_map.output(ds.vectors())?)?;
    let debiased_path = output_dir.join("debiased.frds");
    save_dataset(&debiased_path, &debiased)?;
    let mut trace_file = std::fs::File::create(output_dir.join("trace.csv"))?;
    outcome.trace.write_csv(&mut trace_file)?;
    let final_ce = outcome
        .trace
        .records
        .last()
        .map(|r| r.cross_entropy)
        .unwrap_or(0.0);
    write_meta(
        &output_dir,
        started,
        timer.elapsed().as_millis(),
        &[(
            "skipped_class_terms".to_string(),
            outcome.trace.skipped_class_terms.to_string(),
        )],
    )?;
    println!(
        "debias: wrote checkpoint, debiased vectors, trace to {}",
        output_dir.display()
    );
    Ok(DebiasArtifacts {
        debiased_path,
        final_cross_entropy: final_ce,
    })
}

pub fn cmd_audit(kv: &KeyValues) -> Result<AuditReport> {
    let input: PathBuf = require(kv, "input")?;
    let ds = load_dataset(&input)?;
    let opts = build_audit_options(kv)?;
    let output_dir: PathBuf = require(kv, "output_dir")?;

    let started = now_ms();
    let timer = Instant::now();
    let report = run_audit(&ds, &opts)?;
    std::fs::create_dir_all(&output_dir)?;
    std::fs::write(output_dir.join("config.resolved"), kv.render())?;
    std::fs::write(output_dir.join("report.json"), report.to_json()?)?;
    std::fs::write(output_dir.join("report.txt"), report.render_text())?;
    write_meta(&output_dir, started, timer.elapsed().as_millis(), &[])?;
    println!("audit: wrote report.json / report.txt to {}", output_dir.display());
    Ok(report)
}

pub fn cmd_rank(kv: &KeyValues) -> Result<()> {
    let vectors = match (kv.get("input"), kv.get("embeddings")) {
        (Some(path), None) => load_dataset(Path::new(path))?.vectors().to_owned(),
        (None, Some(path)) => read_embedding_text(Path::new(path))?.vectors().to_owned(),
        _ => {
            return Err(Error::InvalidConfig(
                "set exactly one of `input` or `embeddings`".into(),
            ))
        }
    };
    let rank = match kv.parse::<f64>("rank_tol_factor")? {
        Some(t) => numerical_rank_with_tol(&vectors, t)?,
        None => numerical_rank(&vectors)?,
    };
    println!(
        "rank {rank} (matrix {}x{})",
        vectors.nrows(),
        vectors.ncols()
    );
    Ok(())
}

pub fn cmd_similarity(kv: &KeyValues) -> Result<()> {
    let emb: PathBuf = require(kv, "embeddings")?;
    let pairs_path: PathBuf = require(kv, "pairs")?;
    let table = read_embedding_text(&emb)?;
    let text = std::fs::read_to_string(&pairs_path)?;
    let mut pairs = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(score)) => {
                let gold: f64 = score
                    .parse()
                    .map_err(|_| Error::Format(format!("bad gold score {score:?}")))?;
                pairs.push((a.to_string(), b.to_string(), gold));
            }
            _ => return Err(Error::Format(format!("bad similarity line {line:?}"))),
        }
    }
    let eval = pair_similarity_eval(&table, &pairs)?;
    println!(
        "spearman {:.6} (pairs used {}, skipped {})",
        eval.spearman, eval.pairs_used, eval.pairs_skipped
    );
    Ok(())
}

/// One debias+audit per axis value; failures are recorded and the sweep
/// continues. Also audits the (possibly resampled) input per value so every
/// row carries its own undebiased reference numbers.
pub fn cmd_sweep(kv: &KeyValues) -> Result<()> {
    let axis = require::<String>(kv, "axis")?;
    let values_raw = require::<String>(kv, "values")?;
    let values: Vec<f64> = values_raw
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad axis value {p:?}")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::InvalidConfig("empty sweep values".into()));
    }
    let objective = kv.get("objective").unwrap_or("unconstrained").to_string();
    if axis == "lambda" && objective != "constrained" {
        return Err(Error::InvalidConfig(
            "lambda sweeps apply to the constrained objective".into(),
        ));
    }
    if !matches!(axis.as_str(), "lambda" | "corruption" | "ratio") {
        return Err(Error::InvalidConfig(format!(
            "unknown sweep axis {axis:?} (lambda | corruption | ratio)"
        )));
    }

    let base_input = load_input(kv)?;
    let output_dir: PathBuf = require(kv, "output_dir")?;
    std::fs::create_dir_all(&output_dir)?;
    std::fs::write(output_dir.join("config.resolved"), kv.render())?;

    let mut rows = Vec::new();
    for &value in &values {
        let run_dir = output_dir.join("runs").join(format!("{axis}={value}"));
        match sweep_one(kv, &axis, value, &base_input, &run_dir) {
            Ok(row) => rows.push(row),
            Err(err) => {
                eprintln!("sweep {axis}={value}: {err}");
                rows.push(format!("{axis},{value},error:{},,,,,,,,,,,,,", err.exit_code()));
            }
        }
    }

    let mut csv = String::from(
        "axis,value,status,y_acc,y_mdl,g_acc,g_majority,g_delta_f1,g_mdl,dp,gap_rms,v_measure,final_ce,g_acc_orig,g_delta_f1_orig,dp_orig\n",
    );
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    std::fs::write(output_dir.join("sweep.csv"), csv)?;
    println!("sweep: wrote {}", output_dir.join("sweep.csv").display());
    Ok(())
}

fn sweep_one(
    kv: &KeyValues,
    axis: &str,
    value: f64,
    base_input: &LabeledDataset,
    run_dir: &Path,
) -> Result<String> {
    std::fs::create_dir_all(run_dir)?;
    let mut run_kv = kv.clone();
    run_kv.set("output_dir", run_dir.join("debias").display().to_string());

    // Axis-specific input/config adjustments.
    let input_ds = match axis {
        "lambda" => {
            run_kv.set("lambda", value.to_string());
            base_input.clone()
        }
        "corruption" => {
            run_kv.set("corrupt_fraction", value.to_string());
            base_input.clone()
        }
        "ratio" => controlled_split(base_input, value, kv.parse_or("seed", 0u64)?)?,
        _ => unreachable!(),
    };
    let input_path = run_dir.join("input.frds");
    save_dataset(&input_path, &input_ds)?;
    run_kv.set("input", input_path.display().to_string());

    let artifacts = cmd_debias(&run_kv)?;

    // Audit the debiased representations and the run's own input.
    let mut audit_kv = run_kv.clone();
    audit_kv.set("input", artifacts.debiased_path.display().to_string());
    audit_kv.set("output_dir", run_dir.join("audit").display().to_string());
    let debiased = cmd_audit(&audit_kv)?;

    let mut orig_kv = run_kv.clone();
    orig_kv.set("input", input_path.display().to_string());
    orig_kv.set("output_dir", run_dir.join("audit-original").display().to_string());
    let original = cmd_audit(&orig_kv)?;

    let g = &debiased.attributes[0];
    let g_orig = &original.attributes[0];
    Ok(format!(
        "{axis},{value},ok,{},{},{},{},{},{},{},{},{},{},{},{},{}",
        debiased.target.as_ref().map(|t| t.accuracy).unwrap_or(f64::NAN),
        debiased
            .target
            .as_ref()
            .and_then(|t| t.mdl_bits)
            .unwrap_or(f64::NAN),
        g.accuracy,
        g.majority_accuracy,
        g.delta_f1,
        g.mdl_bits.unwrap_or(f64::NAN),
        g.dp.unwrap_or(f64::NAN),
        g.gap_rms.unwrap_or(f64::NAN),
        g.v_measure,
        artifacts.final_cross_entropy,
        g_orig.accuracy,
        g_orig.delta_f1,
        g_orig.dp.unwrap_or(f64::NAN),
    ))
}
