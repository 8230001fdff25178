//! Effective settings of each command: defaults, then the `--config` file,
//! then command-line flags. Unknown keys in the file are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use d3net_core::fusion::FusionOptions;
use d3net_core::turbsim::DegradationParams;
use d3net_model::{D2NetConfig, ModelSpec, PairSource, RdfdbkConfig, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::args::{BenchArgs, DegradeArgs, FusionArgs, GlobalArgs, ModelKind, RestoreArgs, SynthArgs, TrainArgs};
use crate::Failure;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn load<S: DeserializeOwned + Default>(global: &GlobalArgs) -> Result<S, Failure> {
    let Some(path) = &global.config else {
        return Ok(S::default());
    };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn required<'a>(path: &'a Option<PathBuf>, name: &str) -> Result<&'a Path, Failure> {
    path.as_deref()
        .ok_or_else(|| usage(format!("--{name} is required (flag or config key)")))
}

fn merge_fusion(opts: &mut FusionOptions, a: FusionArgs) -> Result<(), Failure> {
    set(&mut opts.levels, a.levels);
    set(&mut opts.family, a.family);
    set(&mut opts.roi_size, a.roi_size);
    set(&mut opts.sigma_s, a.sigma_s);
    opts.validate().map_err(|e| usage(e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSettings {
    pub out: Option<PathBuf>,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub seed: u64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            out: None,
            count: 10,
            height: 128,
            width: 128,
            channels: 1,
            seed: 0,
        }
    }
}

impl SynthSettings {
    pub fn resolve(global: &GlobalArgs, a: SynthArgs) -> Result<Self, Failure> {
        let mut s: Self = load(global)?;
        set(&mut s.out, a.out.map(Some));
        set(&mut s.count, a.count);
        set(&mut s.height, a.height);
        set(&mut s.width, a.width);
        set(&mut s.channels, a.channels);
        set(&mut s.seed, global.seed);
        required(&s.out, "out")?;
        if s.count == 0 || s.height < 8 || s.width < 8 {
            return Err(usage("synth needs --count >= 1 and sizes >= 8"));
        }
        if !matches!(s.channels, 1 | 3) {
            return Err(usage(format!("--channels must be 1 or 3, got {}", s.channels)));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegradeSettings {
    pub clean: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub frames: usize,
    pub tilt_sigma: f64,
    pub tilt_corr: f64,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for DegradeSettings {
    fn default() -> Self {
        let p = DegradationParams::default();
        DegradeSettings {
            clean: None,
            out: None,
            frames: p.frames,
            tilt_sigma: p.tilt_sigma,
            tilt_corr: p.tilt_corr,
            blur_sigma: p.blur_sigma,
            noise_sigma: p.noise_sigma,
            seed: p.seed,
        }
    }
}

impl DegradeSettings {
    pub fn resolve(global: &GlobalArgs, a: DegradeArgs) -> Result<Self, Failure> {
        let mut s: Self = load(global)?;
        set(&mut s.clean, a.clean.map(Some));
        set(&mut s.out, a.out.map(Some));
        set(&mut s.frames, a.frames);
        set(&mut s.tilt_sigma, a.tilt_sigma);
        set(&mut s.tilt_corr, a.tilt_corr);
        set(&mut s.blur_sigma, a.blur_sigma);
        set(&mut s.noise_sigma, a.noise_sigma);
        set(&mut s.seed, global.seed);
        required(&s.clean, "clean")?;
        required(&s.out, "out")?;
        s.params().validate().map_err(|e| usage(e.to_string()))?;
        Ok(s)
    }

    pub fn params(&self) -> DegradationParams {
        DegradationParams {
            tilt_sigma: self.tilt_sigma,
            tilt_corr: self.tilt_corr,
            blur_sigma: self.blur_sigma,
            noise_sigma: self.noise_sigma,
            frames: self.frames,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub network: ModelSpec,
    /// `None` picks by network: fused for d2net, downsampled for rdfdbk.
    pub source: Option<PairSource>,
    pub training: TrainConfig,
    pub fusion: FusionOptions,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            manifest: None,
            out: None,
            log: None,
            resume: None,
            network: ModelSpec::D2net(D2NetConfig::default()),
            source: None,
            training: TrainConfig::default(),
            fusion: FusionOptions::default(),
            seed: 0,
        }
    }
}

impl TrainSettings {
    pub fn resolve(global: &GlobalArgs, a: TrainArgs) -> Result<Self, Failure> {
        let mut s: Self = load(global)?;
        set(&mut s.manifest, a.manifest.map(Some));
        set(&mut s.out, a.out.map(Some));
        set(&mut s.log, a.log.map(Some));
        set(&mut s.resume, a.resume.map(Some));
        set(&mut s.source, a.source.map(Some));
        set(&mut s.seed, global.seed);
        set(&mut s.training.iterations, a.iters);
        set(&mut s.training.batch_size, a.batch);
        set(&mut s.training.patch_size, a.patch);
        set(&mut s.training.checkpoint_every, a.checkpoint_every);
        s.training.seed = s.seed;

        match (a.model, &mut s.network) {
            (Some(ModelKind::D2net), ModelSpec::Rdfdbk(_)) => s.network = ModelSpec::D2net(D2NetConfig::default()),
            (Some(ModelKind::Rdfdbk), ModelSpec::D2net(_)) => s.network = ModelSpec::Rdfdbk(RdfdbkConfig::default()),
            _ => {}
        }
        match &mut s.network {
            ModelSpec::D2net(c) => {
                if a.features.is_some() || a.time_steps.is_some() {
                    return Err(usage("--features and --time-steps apply to rdfdbk only"));
                }
                set(&mut c.width_multiplier, a.width);
                set(&mut c.residual_blocks, a.blocks);
            }
            ModelSpec::Rdfdbk(c) => {
                if a.width.is_some() {
                    return Err(usage("--width applies to d2net only"));
                }
                set(&mut c.residual_blocks, a.blocks);
                set(&mut c.feature_channels, a.features);
                set(&mut c.time_steps, a.time_steps);
            }
        }
        merge_fusion(&mut s.fusion, a.fusion)?;
        required(&s.manifest, "manifest")?;
        let out = required(&s.out, "out")?;
        if s.log.is_none() {
            let mut name = out.as_os_str().to_owned();
            name.push(".log.jsonl");
            s.log = Some(PathBuf::from(name));
        }
        s.training.validate().map_err(|e| usage(e.to_string()))?;
        s.network.validate().map_err(|e| usage(e.to_string()))?;
        Ok(s)
    }

    pub fn pair_source(&self) -> PairSource {
        self.source.unwrap_or(match self.network {
            ModelSpec::D2net(_) => PairSource::Fused,
            ModelSpec::Rdfdbk(_) => PairSource::Downsampled,
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RestoreSettings {
    pub frames: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub d2net: Option<PathBuf>,
    pub rdfdbk: Option<PathBuf>,
    pub dump_intermediate: Option<PathBuf>,
    pub fusion: FusionOptions,
    pub seed: u64,
}

impl RestoreSettings {
    pub fn resolve(global: &GlobalArgs, a: RestoreArgs) -> Result<Self, Failure> {
        let mut s: Self = load(global)?;
        set(&mut s.frames, a.frames.map(Some));
        set(&mut s.out, a.out.map(Some));
        set(&mut s.d2net, a.d2net.map(Some));
        set(&mut s.rdfdbk, a.rdfdbk.map(Some));
        set(&mut s.dump_intermediate, a.dump_intermediate.map(Some));
        set(&mut s.seed, global.seed);
        merge_fusion(&mut s.fusion, a.fusion)?;
        required(&s.frames, "frames")?;
        required(&s.out, "out")?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSettings {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub d2net: Option<PathBuf>,
    pub rdfdbk: Option<PathBuf>,
    pub timing: bool,
    pub fusion: FusionOptions,
    pub seed: u64,
}

impl BenchSettings {
    pub fn resolve(global: &GlobalArgs, a: BenchArgs) -> Result<Self, Failure> {
        let mut s: Self = load(global)?;
        set(&mut s.manifest, a.manifest.map(Some));
        set(&mut s.out, a.out.map(Some));
        set(&mut s.d2net, a.d2net.map(Some));
        set(&mut s.rdfdbk, a.rdfdbk.map(Some));
        s.timing |= a.timing;
        set(&mut s.seed, global.seed);
        merge_fusion(&mut s.fusion, a.fusion)?;
        required(&s.manifest, "manifest")?;
        required(&s.out, "out")?;
        Ok(s)
    }
}
