use std::path::Path;

use negbound::bounds::{evaluate_sweep, write_csv, BoundReport, EvalProtocol};
use negbound::datamodel::{load_embeddings, AugmentationSpec, EmbeddingSet, Format};

use crate::args::{EvaluateArgs, FormatArg};
use crate::manifest::RunManifest;
use crate::{print_json, read_json_config, write_json, CliError, CliResult};

pub fn input_format(path: &Path, arg: Option<FormatArg>) -> Format {
    match arg {
        Some(FormatArg::Tsv) => Format::Tsv,
        Some(FormatArg::Packed) => Format::Packed,
        None => Format::from_path(path),
    }
}

pub fn load(path: &Path, format: Option<FormatArg>) -> CliResult<EmbeddingSet> {
    load_embeddings(path, input_format(path, format)).map_err(|e| match e {
        negbound::Error::Io(io) => CliError::Usage(format!("cannot read {}: {io}", path.display())),
        other => CliError::Usage(format!("{}: {other}", path.display())),
    })
}

pub fn resolve_protocol(a: &EvaluateArgs) -> CliResult<EvalProtocol> {
    let mut p: EvalProtocol = match &a.config {
        Some(path) => read_json_config(path)?,
        None => EvalProtocol::default(),
    };
    if let Some(t) = a.t {
        p.temperature = t;
    }
    if let Some(m) = a.m_aug {
        p.m_augmentations = m;
    }
    if let Some(b) = a.batches {
        p.n_batches = Some(b);
    }
    if let Some(e) = a.epochs {
        p.epochs = e;
    }
    if let Some(s) = a.seed {
        p.seed = s;
    }
    if let Some(c) = a.draws_convention {
        p.convention = c.into();
    }
    if a.aug_sigma.is_some() || a.aug_drop.is_some() {
        let sigma = a.aug_sigma.unwrap_or(p.augmentation.sigma);
        let drop = a.aug_drop.unwrap_or(p.augmentation.drop_rate);
        let renorm = p.augmentation.renormalize;
        p.augmentation = match (drop > 0.0, sigma > 0.0) {
            (true, true) => AugmentationSpec::compose(drop, sigma, renorm),
            (true, false) => AugmentationSpec::dropout(drop, renorm),
            _ => AugmentationSpec::gaussian(sigma, renorm),
        };
    }
    p.augmentation.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !(p.temperature.is_finite() && p.temperature > 0.0) {
        return Err(CliError::Usage(format!("temperature must be positive, got {}", p.temperature)));
    }
    Ok(p)
}

pub fn run(a: &EvaluateArgs, manifest: &mut RunManifest) -> CliResult<()> {
    let protocol = resolve_protocol(a)?;
    if a.print_config {
        return print_json(&protocol);
    }
    if let Some(k) = a.k.iter().find(|&&k| k == 0) {
        return Err(CliError::Usage(format!("--k values must be at least 1, got {k}")));
    }
    manifest.config_path = a.config.clone();
    manifest.config = serde_json::json!({
        "protocol": protocol,
        "k": a.k,
        "embeddings": a.embeddings,
        "train_embeddings": a.train_embeddings,
    });
    manifest.seed = Some(protocol.seed);
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out)?;
        manifest.output_dir = Some(out.clone());
    }

    manifest.phase("load");
    let eval_set = load(&a.embeddings, a.format)?;
    let train_set = match &a.train_embeddings {
        Some(p) => Some(load(p, a.format)?),
        None => None,
    };
    manifest.phase("evaluate");
    let reports: Vec<BoundReport> = evaluate_sweep(&eval_set, train_set.as_ref(), &a.k, &protocol)?;
    for r in &reports {
        for n in &r.notes {
            log::warn!("K+1 = {}: {n}", r.k_plus_1);
        }
    }
    manifest.phase("write");
    match &a.out {
        Some(out) => {
            let csv_path = out.join("bounds.csv");
            write_csv(&reports, std::fs::File::create(&csv_path)?)?;
            manifest.output(&csv_path);
            write_json(&out.join("bounds.json"), &reports, manifest)?;
        }
        None => write_csv(&reports, std::io::stdout().lock())?,
    }
    Ok(())
}
