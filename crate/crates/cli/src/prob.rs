use std::path::Path;

use negbound::analysis::verify_constant_scores;
use negbound::probkit::{
    all_classes_probability_with, class_level_mc, collision_probability, expected_draws as quadrature_draws,
    mc_expected_draws, reference_coverage_note, ClassDistribution, CoverMethod, DrawsConvention, Method,
};
use serde::Serialize;

use crate::args::{
    CheckScoresArgs, ClassSource, CouponArgs, CoverMethodArg, ExpectedDrawsArgs, SimpleMethodArg, TauArgs,
};
use crate::manifest::RunManifest;
use crate::{print_json, CliError, CliResult};

#[derive(Debug, Serialize)]
struct Record {
    value: f64,
    stderr: f64,
    method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    ceil: Option<u64>,
    classes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    draws: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

fn parse_weights(text: &str, path: &Path) -> CliResult<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{}: '{t}' is not a number", path.display())))
        })
        .collect()
}

pub fn distribution(source: &ClassSource) -> CliResult<ClassDistribution> {
    if let Some(n) = source.classes {
        return Ok(ClassDistribution::uniform(n)?);
    }
    let path = source
        .probs
        .as_ref()
        .ok_or_else(|| CliError::Usage("one of --classes or --probs is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let weights = parse_weights(&text, path)?;
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(CliError::Usage(format!(
            "{}: class weights must be positive and finite, found {w}",
            path.display()
        )));
    }
    let total: f64 = weights.iter().sum();
    Ok(ClassDistribution::new(weights.iter().map(|w| w / total).collect())?)
}

fn record_config(manifest: &mut RunManifest, value: serde_json::Value, seed: Option<u64>) {
    manifest.config = value;
    manifest.seed = seed;
}

pub fn coupon(a: &CouponArgs, manifest: &mut RunManifest) -> CliResult<()> {
    let dist = distribution(&a.source)?;
    let uses_mc = a.method == CoverMethodArg::Mc;
    record_config(
        manifest,
        serde_json::json!({
            "probs": dist.probs(), "draws": a.draws, "method": format!("{:?}", a.method).to_lowercase(),
            "trials": a.mc.trials, "seed": a.mc.seed,
        }),
        uses_mc.then_some(a.mc.seed),
    );
    let method = match a.method {
        CoverMethodArg::Auto => CoverMethod::Auto,
        CoverMethodArg::Dp => CoverMethod::Dp,
        CoverMethodArg::Ie => CoverMethod::InclusionExclusion,
        CoverMethodArg::Mc => CoverMethod::MonteCarlo {
            trials: a.mc.trials,
            seed: a.mc.seed,
        },
    };
    manifest.phase("compute");
    let est = all_classes_probability_with(&dist, a.draws, method)?;
    let notes = if dist.is_uniform() {
        reference_coverage_note(dist.len(), a.draws, est.value).into_iter().collect()
    } else {
        Vec::new()
    };
    print_json(&Record {
        value: est.value,
        stderr: est.stderr,
        method: est.method,
        ceil: None,
        classes: dist.len(),
        draws: Some(a.draws),
        k: None,
        notes,
    })
}

pub fn tau(a: &TauArgs, manifest: &mut RunManifest) -> CliResult<()> {
    let dist = distribution(&a.source)?;
    let uses_mc = a.method == SimpleMethodArg::Mc;
    record_config(
        manifest,
        serde_json::json!({
            "probs": dist.probs(), "k": a.k, "method": format!("{:?}", a.method).to_lowercase(),
            "trials": a.mc.trials, "seed": a.mc.seed,
        }),
        uses_mc.then_some(a.mc.seed),
    );
    manifest.phase("compute");
    let est = if uses_mc {
        let k = usize::try_from(a.k).map_err(|_| CliError::Usage("--k is too large".into()))?;
        class_level_mc(&dist, k, DrawsConvention::KPlusOne, a.mc.trials, a.mc.seed)?.tau
    } else {
        collision_probability(&dist, a.k)
    };
    print_json(&Record {
        value: est.value,
        stderr: est.stderr,
        method: est.method,
        ceil: None,
        classes: dist.len(),
        draws: None,
        k: Some(a.k),
        notes: Vec::new(),
    })
}

pub fn expected_draws(a: &ExpectedDrawsArgs, manifest: &mut RunManifest) -> CliResult<()> {
    let dist = distribution(&a.source)?;
    let uses_mc = a.method == SimpleMethodArg::Mc;
    record_config(
        manifest,
        serde_json::json!({
            "probs": dist.probs(), "method": format!("{:?}", a.method).to_lowercase(),
            "trials": a.mc.trials, "seed": a.mc.seed,
        }),
        uses_mc.then_some(a.mc.seed),
    );
    manifest.phase("compute");
    let e = if uses_mc {
        mc_expected_draws(&dist, a.mc.trials, a.mc.seed)?
    } else {
        quadrature_draws(&dist)?
    };
    print_json(&Record {
        value: e.value,
        stderr: e.stderr,
        method: e.method,
        ceil: Some(e.ceil),
        classes: dist.len(),
        draws: None,
        k: None,
        notes: Vec::new(),
    })
}

pub fn check_scores(a: &CheckScoresArgs, manifest: &mut RunManifest) -> CliResult<()> {
    record_config(
        manifest,
        serde_json::json!({"classes": a.classes, "k": a.k, "steps": a.steps, "lr": a.lr, "seed": a.seed}),
        Some(a.seed),
    );
    manifest.phase("descent");
    let check = verify_constant_scores(a.classes, a.k, a.steps, a.lr, a.seed)?;
    print_json(&check)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_accept_commas_and_whitespace() {
        let w = parse_weights("1, 2\n3\t4,", Path::new("x")).unwrap();
        assert_eq!(w, vec![1.0, 2.0, 3.0, 4.0]);
        assert!(parse_weights("1 two", Path::new("x")).is_err());
    }
}
