use std::fs;
use std::path::{Path, PathBuf};

use d3net_core::image::{load_image, save_image};
use d3net_core::scene::synthetic_scene;
use d3net_core::turbsim::{generate_dataset, DatasetManifest, MANIFEST_FILE};
use d3net_core::FrameSequence;
use d3net_model::bench::{run_bench, BenchOptions};
use d3net_model::train::log_to_jsonl;
use d3net_model::{build_pairs, train_from, D2NetConfig, ModelSpec, Network, RdfdbkConfig};
use serde::Serialize;

use crate::args::{BenchArgs, DegradeArgs, GlobalArgs, RestoreArgs, SynthArgs, TrainArgs};
use crate::settings::{BenchSettings, DegradeSettings, RestoreSettings, SynthSettings, TrainSettings};
use crate::Failure;

pub const RUN_FORMAT_VERSION: u32 = 1;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn create_parent(path: &Path) -> Result<(), Failure> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(parent) => fs::create_dir_all(parent).map_err(|e| io_err(parent, e)),
        None => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("settings serialize");
    s.push('\n');
    s
}

/// `<path>.json`, holding the effective settings of the run that wrote `path`.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

#[derive(Serialize)]
struct RunRecord<'a, S: Serialize> {
    format_version: u32,
    command: &'a str,
    tool_version: &'a str,
    config: &'a S,
}

fn write_run_record<S: Serialize>(output: &Path, command: &str, config: &S) -> Result<(), Failure> {
    let record = RunRecord {
        format_version: RUN_FORMAT_VERSION,
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        config,
    };
    write_text(&sidecar(output), &to_json(&record))
}

fn manifest_dir(manifest: &Path) -> &Path {
    manifest.parent().unwrap_or(Path::new("."))
}

/// A checkpoint if a path is given, else `identity` with its residual head
/// zeroed.
fn load_or_identity(path: Option<&Path>, identity: ModelSpec) -> Result<Network, Failure> {
    match path {
        Some(p) => {
            if !p.is_file() {
                return Err(Failure::Runtime(format!("checkpoint not found: {}", p.display())));
            }
            Ok(Network::load(p)?)
        }
        None => Ok(Network::identity(identity)?),
    }
}

fn networks(d2net: Option<&Path>, rdfdbk: Option<&Path>, channels: usize) -> Result<(Network, Network), Failure> {
    // The identity output does not depend on width, so the smallest valid
    // configuration keeps the pass cheap.
    let d2 = ModelSpec::D2net(D2NetConfig {
        in_channels: channels,
        width_multiplier: 1.0 / 16.0,
        residual_blocks: 1,
        ..Default::default()
    });
    let rd = ModelSpec::Rdfdbk(RdfdbkConfig {
        in_channels: channels,
        time_steps: 1,
        feature_channels: 4,
        residual_blocks: 1,
    });
    Ok((load_or_identity(d2net, d2)?, load_or_identity(rdfdbk, rd)?))
}

pub fn synth(global: &GlobalArgs, a: SynthArgs) -> Result<(), Failure> {
    let s = SynthSettings::resolve(global, a)?;
    let out = s.out.as_deref().expect("resolved");
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    for i in 0..s.count {
        let seed = s.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let img = synthetic_scene(s.height, s.width, s.channels, seed);
        save_image(&img, out.join(format!("scene_{i:04}.png")))?;
    }
    println!("{}", out.display());
    Ok(())
}

pub fn degrade(global: &GlobalArgs, a: DegradeArgs) -> Result<(), Failure> {
    let s = DegradeSettings::resolve(global, a)?;
    let (clean, out) = (s.clean.as_deref().expect("resolved"), s.out.as_deref().expect("resolved"));
    let mut manifest = generate_dataset(clean, out, &s.params(), s.frames)?;
    manifest.config = Some(serde_json::to_value(&s).expect("settings serialize"));
    let path = out.join(MANIFEST_FILE);
    manifest.save(&path)?;
    println!("{}", path.display());
    Ok(())
}

pub fn train(global: &GlobalArgs, a: TrainArgs) -> Result<(), Failure> {
    let mut s = TrainSettings::resolve(global, a)?;
    let manifest_path = s.manifest.clone().expect("resolved");
    let out = s.out.clone().expect("resolved");
    let log = s.log.clone().expect("resolved");
    let manifest = DatasetManifest::load(&manifest_path)?;
    let pairs = build_pairs(manifest_dir(&manifest_path), &manifest, s.pair_source(), &s.fusion)?;
    let channels = pairs[0].input.channels();
    create_parent(&out)?;

    let mut save = |net: &Network| -> d3net_model::Result<()> {
        net.save(&out)?;
        Ok(())
    };
    let outcome = match &s.resume {
        Some(path) => {
            let net = load_or_identity(Some(path), s.network)?;
            s.network = net.spec;
            train_from(net, &pairs, &s.training, &mut save)?
        }
        None => {
            match &mut s.network {
                ModelSpec::D2net(c) => c.in_channels = channels,
                ModelSpec::Rdfdbk(c) => c.in_channels = channels,
            }
            d3net_model::train(s.network, &pairs, &s.training, &mut save)?
        }
    };
    outcome.network.save(&out)?;
    write_text(&log, &log_to_jsonl(&outcome.log))?;
    write_run_record(&out, "train", &s)?;
    if let Some(last) = outcome.log.last() {
        eprintln!("iter {} lr {} loss {:.6}", last.iter, last.lr, last.loss);
    }
    println!("{}", out.display());
    Ok(())
}

/// `.png`/`.pfm` files in lexicographic filename order.
fn list_frames(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut paths = Vec::new();
    for item in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = item.map_err(|e| io_err(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "pfm")) {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Runtime(format!("no .png or .pfm frames in {}", dir.display())));
    }
    Ok(paths)
}

pub fn restore(global: &GlobalArgs, a: RestoreArgs) -> Result<(), Failure> {
    let s = RestoreSettings::resolve(global, a)?;
    let dir = s.frames.as_deref().expect("resolved");
    let out = s.out.as_deref().expect("resolved");
    let frames = list_frames(dir)?
        .iter()
        .map(load_image)
        .collect::<Result<Vec<_>, _>>()?;
    let seq = FrameSequence::new(frames, dir.display().to_string())?;
    let (d2, rd) = networks(s.d2net.as_deref(), s.rdfdbk.as_deref(), seq.shape().0)?;
    let restored = d3net_model::restore(&seq, &d2, &rd, &s.fusion)?;
    create_parent(out)?;
    save_image(&restored.image, out)?;
    if let Some(dump) = &s.dump_intermediate {
        restored.fused.dump(dump)?;
        save_image(&restored.denoised, dump.join("d2net.pfm"))?;
    }
    write_run_record(out, "restore", &s)?;
    println!("{}", out.display());
    Ok(())
}

pub fn bench(global: &GlobalArgs, a: BenchArgs) -> Result<(), Failure> {
    let s = BenchSettings::resolve(global, a)?;
    let manifest_path = s.manifest.as_deref().expect("resolved");
    let out = s.out.as_deref().expect("resolved");
    let manifest = DatasetManifest::load(manifest_path)?;
    let first = manifest
        .entries
        .first()
        .ok_or_else(|| Failure::Runtime(format!("{}: no entries", manifest_path.display())))?;
    let channels = load_image(manifest_dir(manifest_path).join(&first.clean))?.channels();
    let (d2, rd) = networks(s.d2net.as_deref(), s.rdfdbk.as_deref(), channels)?;
    let opts = BenchOptions {
        fusion: s.fusion,
        d2net: &d2,
        rdfdbk: &rd,
        timing: s.timing,
    };
    let config = serde_json::to_value(&s).expect("settings serialize");
    let report = run_bench(manifest_dir(manifest_path), &manifest, &opts, s.seed, config)?;
    write_text(&out.join("report.json"), &to_json(&report))?;
    let table = report.to_table();
    write_text(&out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}
