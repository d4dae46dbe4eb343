//! Subcommand implementations. Each composes library calls and writes its
//! artifacts under the requested output directory.

use red_core::checkpoint::{load_checkpoint, probe_hash_hex, save_checkpoint};
use red_core::data::load_csv;
use red_core::evaluation::{self, pr_curve_csv};
use red_core::model::{ModelConfig, RedModel};
use red_core::numerics::{Matrix, Rng};
use red_core::pipeline::{prepare, RunManifest, RunPaths, ScalerFile};
use red_core::training::{
    self, gradient_check, grid_search, leaderboard_csv, loss_and_gradients,
};
use red_core::{RedError, Result};
use std::path::{Path, PathBuf};

fn load_manifest(path: &Path, seed_override: Option<u64>) -> Result<(RunManifest, Vec<u8>)> {
    let (mut manifest, _) = RunManifest::from_file(path)?;
    if let Some(seed) = seed_override {
        manifest.seed = seed;
    }
    // Propagate the run seed into the sub-configs so one number pins the
    // whole run; the canonical re-serialization names the output directory.
    manifest.model.seed = manifest.seed;
    manifest.train.seed = manifest.seed;
    let canonical = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| RedError::Contract(format!("manifest serialization: {e}")))?;
    Ok((manifest, canonical))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn scaler_path_for(checkpoint: &Path, explicit: Option<&Path>) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => checkpoint
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("scaler.json"),
    }
}

fn load_model_and_scaler(
    checkpoint: &Path,
    scaler: Option<&Path>,
) -> Result<(RedModel, ScalerFile)> {
    let model = load_checkpoint(checkpoint)?;
    let scaler_file = ScalerFile::load(&scaler_path_for(checkpoint, scaler))?;
    scaler_file.check_matches(&model)?;
    Ok((model, scaler_file))
}

pub fn train(manifest_path: &Path, out_root: &Path, seed: Option<u64>) -> Result<()> {
    let (manifest, canonical) = load_manifest(manifest_path, seed)?;
    let run_id = RunManifest::run_id(&canonical);
    let paths = RunPaths::new(out_root, &run_id);
    ensure_dir(&paths.dir)?;

    let prepared = prepare(&manifest.data, manifest.seed)?;
    let model_cfg = ModelConfig {
        d: prepared.train.d(),
        ..manifest.model.clone()
    };
    let model = RedModel::from_config(&model_cfg)?;
    let (trained, history) = training::train(&model, &prepared.train.x, &prepared.val.x, &manifest.train)?;

    save_checkpoint(&trained, &paths.checkpoint())?;
    let scaler_file = ScalerFile::new(
        &prepared.scaler,
        prepared.train.column_names.clone(),
        manifest.data.label_column.clone(),
        probe_hash_hex(&trained)?,
    );
    scaler_file.save(&paths.scaler())?;
    std::fs::write(paths.history(), history.to_csv())?;
    std::fs::write(paths.manifest_copy(), &canonical)?;

    let best = history.best_val_nll().unwrap_or(f64::NAN);
    println!("run {run_id}: best validation NLL {best:.6} nats");
    println!("outputs in {}", paths.dir.display());
    Ok(())
}

pub fn eval(checkpoint: &Path, scaler: Option<&Path>, data: &Path, out: &Path) -> Result<()> {
    let (model, scaler_file) = load_model_and_scaler(checkpoint, scaler)?;
    let raw = load_csv(data, true, scaler_file.label_column.as_deref())?;
    let standardized = scaler_file.scaler().apply(&raw)?;

    let report = evaluation::evaluate(&model, &standardized)?;
    ensure_dir(out)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| RedError::Contract(format!("report serialization: {e}")))?;
    std::fs::write(out.join("report.json"), json)?;
    std::fs::write(out.join("nll_table.csv"), report.nll_table_csv())?;
    std::fs::write(out.join("anomaly_table.csv"), report.anomaly_table_csv())?;
    if let Some(anomaly) = &report.anomaly {
        std::fs::write(out.join("pr_curve.csv"), pr_curve_csv(&anomaly.pr_curve))?;
        println!(
            "test NLL {:.6} nats ({} rows scored), avg-prec {:.4}, nDCG {:.4}",
            report.nll.mean_nll, report.nll.n_scored, anomaly.average_precision, anomaly.ndcg
        );
    } else {
        println!(
            "test NLL {:.6} nats ({} rows scored)",
            report.nll.mean_nll, report.nll.n_scored
        );
    }
    Ok(())
}

pub fn sample(
    checkpoint: &Path,
    scaler: Option<&Path>,
    n: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let (model, scaler_file) = load_model_and_scaler(checkpoint, scaler)?;
    let mut rng = Rng::seed_from_u64(seed);
    let latent_space_rows = model.sample(&mut rng, n)?;
    let rows = scaler_file.scaler().inverse_matrix(&latent_space_rows)?;

    ensure_dir(out)?;
    let mut csv = scaler_file.column_names.join(",");
    csv.push('\n');
    for row in rows.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    let path = out.join("samples.csv");
    std::fs::write(&path, csv)?;
    println!("{n} samples written to {}", path.display());
    Ok(())
}

pub fn detect(
    checkpoint: &Path,
    scaler: Option<&Path>,
    data: &Path,
    top_k: Option<usize>,
    threshold: Option<f64>,
    out: &Path,
) -> Result<()> {
    if top_k.is_some() && threshold.is_some() {
        return Err(RedError::Contract(
            "--top-k and --log-likelihood-threshold are mutually exclusive".into(),
        ));
    }
    let (model, scaler_file) = load_model_and_scaler(checkpoint, scaler)?;
    let raw = load_csv(data, true, scaler_file.label_column.as_deref())?;
    let standardized = scaler_file.scaler().transform_matrix(&raw.x)?;

    let ranked = evaluation::anomaly_scores(&model, &standardized, None)?;
    let n = ranked.order.len();
    let mut flagged = vec![false; n];
    match (top_k, threshold) {
        (Some(k), None) => {
            for &idx in ranked.order.iter().take(k) {
                flagged[idx] = true;
            }
        }
        (None, Some(t)) => {
            for (i, &s) in ranked.scores.iter().enumerate() {
                flagged[i] = s <= t;
            }
        }
        _ => {}
    }

    ensure_dir(out)?;
    let mut csv = String::from("rank,row,log_likelihood,flagged\n");
    for (rank, &idx) in ranked.order.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            rank + 1,
            idx,
            ranked.scores[idx],
            flagged[idx]
        ));
    }
    let path = out.join("detections.csv");
    std::fs::write(&path, csv)?;
    println!(
        "{} instances ranked, {} flagged, written to {}",
        n,
        flagged.iter().filter(|&&f| f).count(),
        path.display()
    );
    Ok(())
}

pub fn grid(manifest_path: &Path, out_root: &Path, seed: Option<u64>) -> Result<()> {
    let (manifest, canonical) = load_manifest(manifest_path, seed)?;
    let space = manifest
        .grid
        .clone()
        .ok_or_else(|| RedError::Contract("manifest has no grid section".into()))?;
    let run_id = RunManifest::run_id(&canonical);
    let paths = RunPaths::new(out_root, &run_id);
    ensure_dir(&paths.dir)?;

    let prepared = prepare(&manifest.data, manifest.seed)?;
    let model_cfg = ModelConfig {
        d: prepared.train.d(),
        ..manifest.model.clone()
    };
    let outcome = grid_search(
        &model_cfg,
        &manifest.train,
        &space,
        &prepared.train.x,
        &prepared.val.x,
    )?;

    save_checkpoint(&outcome.best_model, &paths.checkpoint())?;
    let scaler_file = ScalerFile::new(
        &prepared.scaler,
        prepared.train.column_names.clone(),
        manifest.data.label_column.clone(),
        probe_hash_hex(&outcome.best_model)?,
    );
    scaler_file.save(&paths.scaler())?;
    std::fs::write(paths.history(), outcome.best_history.to_csv())?;
    std::fs::write(paths.leaderboard(), leaderboard_csv(&outcome.leaderboard))?;
    std::fs::write(paths.manifest_copy(), &canonical)?;

    let best = &outcome.leaderboard[0];
    println!(
        "grid of {} combinations complete; best val NLL {:.6} (num_units {}, init_lr {}, decay {}, num_fcs {}, K {})",
        outcome.leaderboard.len(),
        best.val_nll.unwrap_or(f64::NAN),
        best.num_units,
        best.init_lr,
        best.decay_factor,
        best.num_fcs,
        best.num_components
    );
    println!("outputs in {}", paths.dir.display());
    Ok(())
}

pub fn gradcheck(d: usize, seed: u64, eps: f64, tol: f64, out: Option<&Path>) -> Result<()> {
    let cfg = ModelConfig {
        d,
        num_units: 8,
        transform_hidden: 3,
        num_components: 3,
        num_fcs: 1,
        seed,
        ..ModelConfig::default()
    };
    let mut model = RedModel::from_config(&cfg)?;
    let mut rng = Rng::seed_from_u64(seed ^ 0x6763); // "gc"
    model.for_each_param_mut(|name, data| {
        let scale = if name == "linear.u_upper" { 0.15 } else { 0.25 };
        for v in data.iter_mut() {
            *v += scale * rng.standard_normal();
        }
    });
    model.project_constraints();
    let batch = Matrix::from_shape_fn((4, d), |_| rng.standard_normal());

    // Confirm the batch itself evaluates before checking.
    let (loss, _) = loss_and_gradients(&model, &batch)?;
    let report = gradient_check(&model, &batch, eps, tol)?;

    let mut text = format!(
        "parameters checked: {}\nbatch loss: {loss}\nmax relative error: {:.3e}\nviolations (> {tol}): {}\n",
        report.checked,
        report.max_rel_err,
        report.violations.len()
    );
    for v in report.violations.iter().take(20) {
        text.push_str(&format!(
            "  {}[{}]: analytic {:.6e} vs numeric {:.6e} (rel err {:.3e})\n",
            v.name, v.index, v.analytic, v.numeric, v.rel_err
        ));
    }
    print!("{text}");
    if let Some(dir) = out {
        ensure_dir(dir)?;
        std::fs::write(dir.join("gradcheck.txt"), &text)?;
    }
    if !report.passed() {
        return Err(RedError::NumericCheck(format!(
            "{} gradient entries above tolerance {tol}",
            report.violations.len()
        )));
    }
    Ok(())
}
