//! On-disk model store.
//!
//! ```text
//! <dir>/config.toml             configuration used for training
//! <dir>/index.tsv               speaker, stream, kind, dim, components, file
//! <dir>/<speaker>.spectral.sidm
//! <dir>/<speaker>.residual.sidm
//! ```

use std::path::Path;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::gmm::GmmModel;
use crate::identification::{SpeakerModelSet, SpeakerModels};

use super::manifest::check_id;

pub const CONFIG_FILE: &str = "config.toml";
pub const INDEX_FILE: &str = "index.tsv";

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn index_line(speaker: &str, stream: &str, model: &GmmModel) -> String {
    format!(
        "{speaker}\t{stream}\t{}\t{}\t{}\t{speaker}.{stream}.sidm\n",
        model.kind(),
        model.dim(),
        model.components()
    )
}

pub fn save_store(dir: &Path, config: &SystemConfig, models: &SpeakerModelSet) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join(CONFIG_FILE), config.to_toml().as_bytes())?;
    let mut index = String::from("# speaker\tstream\tkind\tdim\tcomponents\tfile\n");
    for (speaker, m) in models.iter() {
        for (stream, model) in [("spectral", &m.spectral), ("residual", &m.residual)] {
            write(
                &dir.join(format!("{speaker}.{stream}.sidm")),
                &model.to_bytes(),
            )?;
            index.push_str(&index_line(speaker, stream, model));
        }
    }
    write(&dir.join(INDEX_FILE), index.as_bytes())
}

fn read_model(dir: &Path, file: &str) -> Result<GmmModel> {
    let path = dir.join(file);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    GmmModel::from_bytes(&bytes).map_err(|e| match e {
        Error::Checksum { .. } | Error::Store(_) => {
            Error::Store(format!("{}: {e}", path.display()))
        }
        other => other,
    })
}

/// Loads a store written by [`save_store`], cross-checking each model
/// against its index line.
pub fn load_store(dir: &Path) -> Result<(SystemConfig, SpeakerModelSet)> {
    let config = SystemConfig::load(&dir.join(CONFIG_FILE))?;
    let index_path = dir.join(INDEX_FILE);
    let index = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;

    let mut pending: std::collections::BTreeMap<String, [Option<GmmModel>; 2]> = Default::default();
    for (i, line) in index.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad =
            |msg: String| Error::Store(format!("{} line {}: {msg}", index_path.display(), i + 1));
        let f: Vec<&str> = line.split('\t').collect();
        let [speaker, stream, kind, dim, comps, file] = f.as_slice() else {
            return Err(bad(format!("expected 6 fields, found {}", f.len())));
        };
        check_id("speaker", speaker).map_err(bad)?;
        if *file != format!("{speaker}.{stream}.sidm") {
            return Err(bad(format!("unexpected model file {file:?}")));
        }
        let slot = match *stream {
            "spectral" => 0,
            "residual" => 1,
            other => return Err(bad(format!("unknown stream {other:?}"))),
        };
        let model = read_model(dir, file)?;
        if model.kind().to_string() != *kind
            || model.dim().to_string() != *dim
            || model.components().to_string() != *comps
        {
            return Err(bad(format!("{file} does not match its index entry")));
        }
        let entry = pending.entry((*speaker).to_owned()).or_default();
        if entry[slot].replace(model).is_some() {
            return Err(bad(format!("duplicate {stream} model for {speaker}")));
        }
    }

    let mut models = SpeakerModelSet::new();
    for (speaker, [spectral, residual]) in pending {
        match (spectral, residual) {
            (Some(spectral), Some(residual)) => {
                models.insert(speaker, SpeakerModels { spectral, residual })?
            }
            _ => {
                return Err(Error::Store(format!(
                    "speaker {speaker} lacks one of its two models"
                )))
            }
        }
    }
    if models.is_empty() {
        return Err(Error::Store(format!(
            "{} lists no models",
            index_path.display()
        )));
    }
    Ok((config, models))
}
