use std::path::Path;

use serde::Serialize;

use seasonality_core::synth::GeneratorManifest;

use crate::config::{InputKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::stages::{self, Output};

pub const RUN_MANIFEST_FILE: &str = "run_manifest.toml";

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    null_baseline_seed: u64,
    outputs: Vec<&'a str>,
    config: &'a RunConfig,
}

/// Every output of a full run, in write order, plus warnings.
pub fn pipeline_outputs(config: &RunConfig) -> CliResult<(Vec<Output>, Vec<String>)> {
    config.validate()?;
    let mut outputs: Vec<Output> = Vec::new();
    let mut warnings = Vec::new();

    let panel_text = match config.input.kind {
        InputKind::Synthetic => {
            let path = config.input.manifest.as_ref().expect("validated");
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let manifest = GeneratorManifest::from_toml_str(&text)?;
            let generated = stages::synth(&manifest, Some(config.seed))?;
            let panel = generated[0].1.clone();
            outputs.extend(generated);
            panel
        }
        kind => {
            let (panel, w) = stages::ingest(
                &config.input.paths,
                kind,
                config.input.load_policy,
                config.input.stamp_convention,
                config.input.sanity_bound,
            )?;
            warnings.extend(w);
            outputs.push((stages::PANEL_FILE.into(), panel.clone()));
            panel
        }
    };

    let panel = stages::read_panel(&panel_text)?;
    let moments_text = stages::moments(&panel)?;
    let moments = stages::read_moments(&moments_text)?;
    outputs.push((stages::MOMENTS_FILE.into(), moments_text));

    let cs = stages::cross_section(&panel, &moments)?;
    let fit = stages::fit(&cs.fig1, config.fit.window, &config.fit.column)?;
    let sets = stages::read_dispersion(&cs.dispersion)?;
    outputs.push((stages::DISPERSION_FILE.into(), cs.dispersion));
    outputs.push((stages::FIG1_FILE.into(), cs.fig1));
    outputs.push(("fig2.csv".into(), cs.fig2));
    outputs.push((stages::FIT_FILE.into(), fit));

    let (curves, w) = stages::condition(&sets, &config.conditioning)?;
    warnings.extend(w);
    outputs.extend(curves);
    let (tables, w) = stages::spectra(&panel, &config.spectra, config.seed)?;
    warnings.extend(w);
    outputs.extend(tables);

    let names: Vec<&str> = outputs.iter().map(|(n, _)| n.as_str()).collect();
    let manifest = RunManifest {
        tool: "seasonality",
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        null_baseline_seed: stages::null_seed(config.seed),
        outputs: names,
        config,
    };
    let manifest = toml::to_string(&manifest).map_err(|e| CliError::new(crate::error::Category::Internal, e.to_string()))?;
    outputs.push((RUN_MANIFEST_FILE.into(), manifest));
    Ok((outputs, warnings))
}

/// Runs every stage and writes the outputs under `config.output_dir`.
pub fn run_pipeline(config: &RunConfig) -> CliResult<Vec<String>> {
    let (outputs, warnings) = pipeline_outputs(config)?;
    write_outputs(&config.output_dir, &outputs)?;
    Ok(warnings)
}

pub fn write_outputs(dir: &Path, outputs: &[Output]) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    for (name, text) in outputs {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
