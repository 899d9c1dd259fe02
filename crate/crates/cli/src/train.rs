use std::path::{Path, PathBuf};

use negbound::datamodel::{save_embeddings, EmbeddingSet, Format};
use negbound::toytrain::{evaluate_classifiers, generate_synthetic, train_encoder, EpochLoss, TrainConfig};

use crate::args::{FormatArg, TrainArgs};
use crate::manifest::RunManifest;
use crate::{print_json, read_json_config, write_json, CliError, CliResult};

pub fn resolve_config(a: &TrainArgs) -> CliResult<TrainConfig> {
    let mut c: TrainConfig = match &a.config {
        Some(p) => read_json_config(p)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.k {
        c.k_negatives = v;
    }
    if let Some(v) = a.epochs {
        c.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        c.learning_rate = v;
    }
    if let Some(v) = a.temperature {
        c.temperature = v;
    }
    if let Some(v) = a.classes {
        c.n_classes = v;
    }
    if let Some(v) = a.samples_per_class {
        c.samples_per_class = v;
    }
    if let Some(v) = a.hidden_dim {
        c.hidden_dim = v;
    }
    if let Some(v) = a.embed_dim {
        c.embed_dim = v;
    }
    c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(c)
}

fn save(set: &EmbeddingSet, dir: &Path, stem: &str, format: FormatArg, manifest: &mut RunManifest) -> CliResult<()> {
    let (ext, f) = match format {
        FormatArg::Tsv => ("tsv", Format::Tsv),
        FormatArg::Packed => ("bin", Format::Packed),
    };
    let path = dir.join(format!("{stem}.{ext}"));
    save_embeddings(set, &path, f)?;
    manifest.output(&path);
    Ok(())
}

fn write_trace(path: &Path, rows: &[(usize, f64, Option<f64>)], manifest: &mut RunManifest) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["epoch", "loss", "stderr"]).map_err(csv_error)?;
    for (epoch, loss, stderr) in rows {
        let se = stderr.map_or_else(|| "NA".to_string(), |s| s.to_string());
        w.write_record([epoch.to_string(), loss.to_string(), se]).map_err(csv_error)?;
    }
    w.flush()?;
    manifest.output(path);
    Ok(())
}

pub fn csv_error(e: csv::Error) -> CliError {
    CliError::Core(negbound::Error::Io(std::io::Error::other(e)))
}

fn trace_rows(trace: &[EpochLoss]) -> Vec<(usize, f64, Option<f64>)> {
    trace.iter().map(|e| (e.epoch, e.loss, Some(e.stderr))).collect()
}

pub fn run(a: &TrainArgs, manifest: &mut RunManifest) -> CliResult<()> {
    let config = resolve_config(a)?;
    if a.print_config {
        return print_json(&config);
    }
    manifest.config_path = a.config.clone();
    manifest.config = serde_json::to_value(&config).map_err(std::io::Error::other)?;
    manifest.seed = Some(config.seed);
    let out: PathBuf = a.out.clone();
    std::fs::create_dir_all(&out)?;
    manifest.output_dir = Some(out.clone());
    write_json(&out.join("config.json"), &config, manifest)?;

    manifest.phase("data");
    let data = generate_synthetic(&config)?;
    manifest.phase("training");
    let result = match train_encoder(&config, &data) {
        Ok(r) => r,
        Err(negbound::Error::Diverged { epoch, loss, limit, trace }) => {
            let rows: Vec<_> = trace.iter().enumerate().map(|(i, &l)| (i, l, None)).collect();
            write_trace(&out.join("loss_trace.csv"), &rows, manifest)?;
            return Err(CliError::Core(negbound::Error::Diverged {
                epoch,
                loss,
                limit,
                trace,
            }));
        }
        Err(e) => return Err(e.into()),
    };
    write_trace(&out.join("loss_trace.csv"), &trace_rows(&result.loss_trace), manifest)?;

    manifest.phase("classifiers");
    let classifiers = evaluate_classifiers(&config, &result, &data)?;
    log::info!(
        "mean-classifier accuracy {:.4}, probe accuracy {:.4}",
        classifiers.mean_acc,
        classifiers.probe_acc
    );

    manifest.phase("write");
    save(&result.train_embeddings, &out, "train", a.format, manifest)?;
    save(&result.validation_embeddings, &out, "validation", a.format, manifest)?;
    save(&result.train_raw, &out, "train_raw", a.format, manifest)?;
    let validation_raw = result.encoder.raw_dataset(&data.validation)?;
    save(&validation_raw, &out, "validation_raw", a.format, manifest)?;
    write_json(&out.join("encoder.json"), &result.encoder, manifest)?;
    write_json(&out.join("classifiers.json"), &classifiers, manifest)?;
    Ok(())
}
