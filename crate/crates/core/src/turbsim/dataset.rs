//! Dataset generation and the JSON manifest that indexes it.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{degrade_frame, DegradationParams};
use crate::error::{ensure, CoreError, Result};
use crate::image::{load_image, save_image, FrameSequence, Image};
use crate::rng::{derive_seed, Purpose};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Ground truth, relative to the manifest's directory.
    pub clean: String,
    /// Degraded frames in temporal order, relative to the manifest's directory.
    pub frames: Vec<String>,
    /// Base parameters for this entry; frame `i` used `params.jittered(i)`.
    pub params: DegradationParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub entries: Vec<ManifestEntry>,
    /// Effective configuration of the run that produced the dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl DatasetManifest {
    pub fn total_frames(&self) -> usize {
        self.entries.iter().map(|e| e.frames.len()).sum()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|source| CoreError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if manifest.format_version != MANIFEST_FORMAT_VERSION {
            return Err(CoreError::format(
                path,
                format!("unsupported manifest format_version {}", manifest.format_version),
            ));
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| CoreError::io(path, e))
    }
}

/// Loads the degraded frames and ground truth of one entry.
pub fn load_entry(base_dir: &Path, entry: &ManifestEntry) -> Result<(FrameSequence, Image)> {
    let clean = load_image(base_dir.join(&entry.clean))?;
    let frames = entry
        .frames
        .iter()
        .map(|f| load_image(base_dir.join(f)))
        .collect::<Result<Vec<_>>>()?;
    let seq = FrameSequence::new(frames, entry.clean.clone())?;
    ensure!(
        seq.shape() == clean.shape(),
        "entry {}: frames {:?} do not match ground truth {:?}",
        entry.clean,
        seq.shape(),
        clean.shape()
    );
    Ok((seq, clean))
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for item in fs::read_dir(dir).map_err(|e| CoreError::io(dir, e))? {
        let path = item.map_err(|e| CoreError::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "pfm")) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Degrades every image in `clean_dir` `variations` times.
///
/// Layout under `out_dir`: `clean/<name>` (byte copy of the source),
/// `frames/<stem>/<index>.png`, and [`MANIFEST_FILE`]. Entry `i` uses a seed
/// derived from `(params.seed, i)`; frame `v` of an entry uses
/// `entry_params.jittered(v)`.
pub fn generate_dataset(
    clean_dir: &Path,
    out_dir: &Path,
    params: &DegradationParams,
    variations: usize,
) -> Result<DatasetManifest> {
    params.validate()?;
    ensure!(variations >= 1, "variations must be >= 1");
    let sources = list_images(clean_dir)?;
    if sources.is_empty() {
        return Err(CoreError::format(clean_dir, "no .png or .pfm images found"));
    }
    fs::create_dir_all(out_dir.join("clean")).map_err(|e| CoreError::io(out_dir, e))?;

    let mut entries = Vec::with_capacity(sources.len());
    for (i, src) in sources.iter().enumerate() {
        let clean = load_image(src)?;
        let name = src.file_name().and_then(|n| n.to_str()).unwrap_or("image").to_owned();
        let stem = src.file_stem().and_then(|n| n.to_str()).unwrap_or("image").to_owned();
        let clean_rel = format!("clean/{name}");
        fs::copy(src, out_dir.join(&clean_rel)).map_err(|e| CoreError::io(src, e))?;

        let frame_dir = out_dir.join("frames").join(&stem);
        fs::create_dir_all(&frame_dir).map_err(|e| CoreError::io(&frame_dir, e))?;
        let entry_params = DegradationParams {
            frames: variations,
            seed: derive_seed(params.seed, &[i as u64, Purpose::Entry as u64]),
            ..*params
        };
        let frames = (0..variations)
            .into_par_iter()
            .map(|v| {
                let frame = degrade_frame(&clean, &entry_params.jittered(v as u64), v as u64)?;
                let rel = format!("frames/{stem}/{v:04}.png");
                save_image(&frame, out_dir.join(&rel))?;
                Ok(rel)
            })
            .collect::<Result<Vec<_>>>()?;
        entries.push(ManifestEntry {
            clean: clean_rel,
            frames,
            params: entry_params,
        });
    }

    let manifest = DatasetManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        entries,
        config: None,
    };
    manifest.save(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
