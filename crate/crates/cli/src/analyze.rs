use std::path::{Path, PathBuf};

use negbound::analysis::{
    relative_change_curve, row_norms, shared_norm_range, sqrt_bins, wasserstein1, within_class_cosine_histogram,
    Histogram,
};
use negbound::datamodel::EmbeddingSet;

use crate::args::AnalyzeArgs;
use crate::evaluate::load;
use crate::manifest::RunManifest;
use crate::svg;
use crate::train::csv_error;
use crate::{CliError, CliResult};

/// Classes histogrammed when none are named.
const DEFAULT_CLASSES: usize = 10;

fn label(path: &Path) -> String {
    let stem = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    match path.parent().and_then(Path::file_name) {
        Some(dir) => format!("{}/{stem}", dir.to_string_lossy()),
        None => stem,
    }
}

/// Distances of every later histogram from the first, and those distances
/// relative to the first-to-second one (`None` when that is zero).
pub fn w1_curve(hists: &[Histogram]) -> CliResult<(Vec<f64>, Vec<Option<f64>>)> {
    let d: Vec<f64> = hists[1..]
        .iter()
        .map(|h| wasserstein1(&hists[0], h))
        .collect::<negbound::Result<_>>()?;
    let rel = match d.first() {
        Some(&r) if r > 0.0 => relative_change_curve(r, &d)?.into_iter().map(Some).collect(),
        _ => vec![None; d.len()],
    };
    Ok((d, rel))
}

fn hist_rows(w: &mut csv::Writer<std::fs::File>, set: &str, class: &str, h: &Histogram) -> CliResult<()> {
    let frac = h.normalized();
    for i in 0..h.n_bins() {
        w.write_record([
            set.to_string(),
            class.to_string(),
            h.bin_edges[i].to_string(),
            h.bin_edges[i + 1].to_string(),
            h.counts[i].to_string(),
            frac[i].to_string(),
        ])
        .map_err(csv_error)?;
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

fn write_svg(path: PathBuf, text: &str, manifest: &mut RunManifest) -> CliResult<()> {
    std::fs::write(&path, text)?;
    manifest.output(&path);
    Ok(())
}

fn cosine_outputs(a: &AnalyzeArgs, sets: &[(String, EmbeddingSet)], manifest: &mut RunManifest) -> CliResult<()> {
    let n_classes = sets[0].1.n_classes();
    if sets.iter().any(|(_, s)| s.n_classes() != n_classes) {
        return Err(CliError::Usage("embedding sets differ in class count".into()));
    }
    let classes: Vec<usize> = if a.classes.is_empty() {
        (0..n_classes.min(DEFAULT_CLASSES)).collect()
    } else {
        a.classes.clone()
    };
    if let Some(c) = classes.iter().find(|&&c| c >= n_classes) {
        return Err(CliError::Usage(format!("class {c} out of range for {n_classes} classes")));
    }

    let hist_path = a.out.join("cosine_hist.csv");
    let mut hw = csv::Writer::from_path(&hist_path).map_err(csv_error)?;
    hw.write_record(["set", "class", "bin_lo", "bin_hi", "count", "fraction"]).map_err(csv_error)?;
    let w1_path = a.out.join("cosine_w1.csv");
    let mut ww = csv::Writer::from_path(&w1_path).map_err(csv_error)?;
    ww.write_record(["class", "set", "w1", "relative"]).map_err(csv_error)?;
    let mut curves = Vec::new();
    for &c in &classes {
        let members = sets[0].1.class_counts()[c];
        let bins = a.bins.unwrap_or_else(|| sqrt_bins(members * members.saturating_sub(1) / 2));
        let hists: Vec<Histogram> = sets
            .iter()
            .map(|(_, s)| within_class_cosine_histogram(s, c, Some(bins)))
            .collect::<negbound::Result<_>>()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        for ((name, _), h) in sets.iter().zip(&hists) {
            hist_rows(&mut hw, name, &c.to_string(), h)?;
        }
        if hists.len() > 1 {
            let (d, rel) = w1_curve(&hists)?;
            for (i, (dv, rv)) in d.iter().zip(&rel).enumerate() {
                ww.write_record([c.to_string(), sets[i + 1].0.clone(), dv.to_string(), opt(*rv)])
                    .map_err(csv_error)?;
            }
            curves.push((format!("class {c}"), d.into_iter().map(Some).collect::<Vec<_>>()));
        }
    }
    hw.flush()?;
    manifest.output(&hist_path);
    ww.flush()?;
    manifest.output(&w1_path);
    if !curves.is_empty() {
        let x: Vec<f64> = (1..sets.len()).map(|i| i as f64).collect();
        let text = svg::line_chart(
            "Within-class cosine histograms: W1 from the first set",
            "set index",
            "W1",
            &x,
            &curves,
        );
        write_svg(a.out.join("cosine_w1.svg"), &text, manifest)?;
    }
    Ok(())
}

fn norm_outputs(a: &AnalyzeArgs, sets: &[(String, EmbeddingSet)], manifest: &mut RunManifest) -> CliResult<()> {
    if let Some((name, _)) = sets.iter().find(|(_, s)| s.is_normalized() || s.is_empty()) {
        return Err(CliError::Usage(format!(
            "{name}: norm histograms need a non-empty unnormalized set"
        )));
    }
    let refs: Vec<&EmbeddingSet> = sets.iter().map(|(_, s)| s).collect();
    let (lo, hi) = shared_norm_range(&refs)?;
    let bins = sqrt_bins(sets[0].1.len());
    let hists: Vec<Histogram> = sets
        .iter()
        .map(|(_, s)| Histogram::from_values(&row_norms(s), lo, hi, bins))
        .collect::<negbound::Result<_>>()?;

    let hist_path = a.out.join("norm_hist.csv");
    let mut hw = csv::Writer::from_path(&hist_path).map_err(csv_error)?;
    hw.write_record(["set", "class", "bin_lo", "bin_hi", "count", "fraction"]).map_err(csv_error)?;
    for ((name, _), h) in sets.iter().zip(&hists) {
        hist_rows(&mut hw, name, "all", h)?;
    }
    hw.flush()?;
    manifest.output(&hist_path);

    if hists.len() > 1 {
        let (d, rel) = w1_curve(&hists)?;
        let w1_path = a.out.join("norm_w1.csv");
        let mut ww = csv::Writer::from_path(&w1_path).map_err(csv_error)?;
        ww.write_record(["set", "w1", "relative"]).map_err(csv_error)?;
        for (i, (dv, rv)) in d.iter().zip(&rel).enumerate() {
            ww.write_record([sets[i + 1].0.clone(), dv.to_string(), opt(*rv)]).map_err(csv_error)?;
        }
        ww.flush()?;
        manifest.output(&w1_path);
    }
    let series: Vec<(String, Vec<f64>)> = sets.iter().zip(&hists).map(|((n, _), h)| (n.clone(), h.normalized())).collect();
    let text = svg::histogram_chart("Representation norms", "norm", &hists[0].bin_edges, &series);
    write_svg(a.out.join("norm_hist.svg"), &text, manifest)
}

pub fn run(a: &AnalyzeArgs, manifest: &mut RunManifest) -> CliResult<()> {
    if a.embeddings.is_empty() && a.raw.is_empty() {
        return Err(CliError::Usage("give --embeddings and/or --raw".into()));
    }
    if a.bins == Some(0) {
        return Err(CliError::Usage("--bins must be at least 1".into()));
    }
    manifest.config = serde_json::json!({
        "embeddings": a.embeddings, "raw": a.raw, "classes": a.classes, "bins": a.bins,
    });
    std::fs::create_dir_all(&a.out)?;
    manifest.output_dir = Some(a.out.clone());
    manifest.phase("load");
    let read = |paths: &[PathBuf]| -> CliResult<Vec<(String, EmbeddingSet)>> {
        paths.iter().map(|p| Ok((label(p), load(p, a.format)?))).collect()
    };
    let normalized = read(&a.embeddings)?;
    let raw = read(&a.raw)?;
    manifest.phase("histograms");
    if !normalized.is_empty() {
        cosine_outputs(a, &normalized, manifest)?;
    }
    if !raw.is_empty() {
        norm_outputs(a, &raw, manifest)?;
    }
    Ok(())
}
