//! World definition documents (TOML) and the bundled task library.

use std::path::Path;

use anyhow::{Context, Result};
use step_core::world::{lint_world, LintReport, WorldDef};

/// Bundled world documents, by file name.
pub const BUNDLED: [(&str, &str); 3] = [
    ("temp-measure.toml", include_str!("../worlds/temp-measure.toml")),
    ("melt-lead.toml", include_str!("../worlds/melt-lead.toml")),
    ("paint-mix.toml", include_str!("../worlds/paint-mix.toml")),
];

/// Parses a world document without linting it.
pub fn parse_world(text: &str) -> Result<WorldDef> {
    Ok(toml::from_str(text)?)
}

/// Parses and lints a world document; lint failures are returned as errors.
pub fn load_world(text: &str) -> Result<(WorldDef, LintReport)> {
    let def = parse_world(text)?;
    let report = lint_world(&def)?;
    for w in &report.warnings {
        log::warn!("world {}: {w}", def.task_id);
    }
    Ok((def, report))
}

pub fn load_world_file(path: &Path) -> Result<WorldDef> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading world file {}", path.display()))?;
    let (def, _) = load_world(&text).with_context(|| format!("loading world file {}", path.display()))?;
    Ok(def)
}

/// The bundled library, linted.
pub fn bundled() -> Result<Vec<WorldDef>> {
    BUNDLED.iter().map(|(name, text)| load_world(text).map(|(d, _)| d).with_context(|| format!("bundled world {name}"))).collect()
}

/// Bundled worlds plus extra world files; a file may replace a bundled task.
pub fn library(extra: &[impl AsRef<Path>]) -> Result<Vec<WorldDef>> {
    let mut worlds = bundled()?;
    for path in extra {
        let def = load_world_file(path.as_ref())?;
        worlds.retain(|w| w.task_id != def.task_id);
        worlds.push(def);
    }
    Ok(worlds)
}
