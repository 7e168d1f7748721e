//! Dataset generation and loading.

use std::fs;
use std::path::{Path, PathBuf};

use fpforge_core::compositor::{alpha_blend, prepare_background, BlendConfig, TextureLibrary, TextureOrigin, TextureSource};
use fpforge_core::fpsynth::{add_scratches, apply_distortion, generate_master, sample_distortion, DistortionParams, PatternClass};
use fpforge_core::pnm::{load_image, write_pgm};
use fpforge_core::rng::{mix64, rng_from_seed};
use fpforge_core::GrayImage;
use rand::Rng;
use rayon::prelude::*;

use crate::config::GenerateConfig;
use crate::error::{HarnessError, Result};
use crate::manifest::{assign_splits, DatasetManifest, ManifestRecord, Split, MANIFEST_FILE};

/// Sub-streams of a record's `master_seed`. The master itself is generated
/// from `master_seed` directly.
pub mod streams {
    pub const PATTERN: u64 = 1;
    pub const DISTORTION_PARAMS: u64 = 2;
    pub const DISTORTION: u64 = 3;
    pub const SCRATCHES: u64 = 4;
    pub const TEXTURE_PICK: u64 = 5;
    pub const BACKGROUND: u64 = 6;
    /// Stream of the run seed that seeds the procedural texture library.
    pub const TEXTURE_LIBRARY: u64 = u64::MAX;
}

pub fn record_id(index: usize) -> String {
    format!("fp{index:06}")
}

/// `master_seed` of record `index` under run seed `seed`.
pub fn image_seed(seed: u64, index: usize) -> u64 {
    mix64(seed, index as u64)
}

/// Procedural textures are 1.5× the image in each dimension so that the
/// background crop has room to move.
pub fn procedural_texture_dims(width: usize, height: usize) -> (usize, usize) {
    (width + width / 2, height + height / 2)
}

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm" | "ppm" | "pnm")
    )
}

/// Every PGM/PPM file in `dir`, keyed by file stem, in name order.
pub fn load_texture_dir(dir: &Path) -> Result<Vec<TextureSource>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(HarnessError::io(dir))? {
        let path = entry.map_err(HarnessError::io(dir))?.path();
        if path.is_file() && is_image_file(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let bytes = fs::read(&path).map_err(HarnessError::io(&path))?;
            let image = load_image(&bytes).map_err(|source| HarnessError::Image {
                path: path.clone(),
                source,
            })?;
            let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok(TextureSource {
                id,
                image,
                origin: TextureOrigin::File,
            })
        })
        .collect()
}

/// Textures from the configured directory, or the procedural library when
/// no directory is set or it holds no images and fallback is enabled.
pub fn texture_library(cfg: &GenerateConfig, seed: u64) -> Result<TextureLibrary> {
    if let Some(dir) = &cfg.textures {
        let textures = if dir.is_dir() || !cfg.procedural_fallback {
            load_texture_dir(dir)?
        } else {
            Vec::new()
        };
        if !textures.is_empty() {
            return Ok(TextureLibrary::new(textures)?);
        }
        if !cfg.procedural_fallback {
            return Err(HarnessError::config(format!(
                "no PGM/PPM textures in {} and procedural fallback is disabled",
                dir.display()
            )));
        }
    }
    let (tw, th) = procedural_texture_dims(cfg.width, cfg.height);
    let count = cfg.procedural_textures.max(1);
    Ok(TextureLibrary::procedural(mix64(seed, streams::TEXTURE_LIBRARY), count, tw, th)?)
}

/// Degrades `master` and composites it over a background cut from `texture`.
/// All randomness comes from `master_seed` sub-streams.
pub fn render_noisy(
    master: &GrayImage,
    master_seed: u64,
    distortion: &DistortionParams,
    texture: &TextureSource,
    alpha: f64,
) -> Result<GrayImage> {
    let stream = |s| rng_from_seed(mix64(master_seed, s));
    let distorted = apply_distortion(master, distortion, &mut stream(streams::DISTORTION));
    let scratched = add_scratches(
        &distorted,
        &mut stream(streams::SCRATCHES),
        distortion.scratch_count,
        distortion.scratch_width_px,
    );
    let (w, h) = master.dims();
    let background = prepare_background(texture, w, h, &mut stream(streams::BACKGROUND))?;
    Ok(alpha_blend(&scratched, &background, BlendConfig::new(alpha)?)?)
}

struct Rendered {
    record: ManifestRecord,
    clean: Vec<u8>,
    noisy: Vec<u8>,
}

fn render_record(
    cfg: &GenerateConfig,
    seed: u64,
    index: usize,
    split: Split,
    library: &TextureLibrary,
) -> Result<Rendered> {
    let id = record_id(index);
    let master_seed = image_seed(seed, index);
    let stream = |s| rng_from_seed(mix64(master_seed, s));
    let class = PatternClass::ALL[stream(streams::PATTERN).random_range(0..PatternClass::ALL.len())];
    let distortion = sample_distortion(&mut stream(streams::DISTORTION_PARAMS));
    let texture = library
        .pick(&mut stream(streams::TEXTURE_PICK))
        .ok_or_else(|| HarnessError::config("texture library is empty"))?;
    let master = generate_master(master_seed, cfg.width, cfg.height, class)?;
    let noisy = render_noisy(&master, master_seed, &distortion, texture, cfg.alpha)?;
    Ok(Rendered {
        record: ManifestRecord {
            clean_path: format!("{id}_gt.pgm"),
            noisy_path: format!("{id}_noisy.pgm"),
            id,
            split,
            master_seed,
            pattern_class: class,
            texture_id: texture.id.clone(),
            alpha: cfg.alpha,
            distortion,
        },
        clean: write_pgm(&master),
        noisy: write_pgm(&noisy),
    })
}

/// Removes what a failed generation left behind.
struct Cleanup {
    dir: PathBuf,
    created_dir: bool,
    armed: bool,
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if !self.armed {
            return;
        }
        if self.created_dir {
            let _ = fs::remove_dir_all(&self.dir);
        } else if let Ok(entries) = fs::read_dir(&self.dir) {
            for e in entries.flatten() {
                let _ = fs::remove_file(e.path());
            }
        }
    }
}

/// Writes `count` clean/noisy pairs and `manifest.jsonl` into `out`, which
/// must be absent or empty. Images are rendered in parallel; the manifest
/// is written last. On failure the directory is left as it was found.
pub fn generate(cfg: &GenerateConfig, seed: u64, out: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let library = texture_library(cfg, seed)?;
    let created_dir = !out.exists();
    if !created_dir {
        let mut entries = fs::read_dir(out).map_err(HarnessError::io(out))?;
        if entries.next().is_some() {
            return Err(HarnessError::config(format!(
                "output directory {} is not empty",
                out.display()
            )));
        }
    }
    fs::create_dir_all(out).map_err(HarnessError::io(out))?;
    let mut cleanup = Cleanup {
        dir: out.to_path_buf(),
        created_dir,
        armed: true,
    };

    let ids: Vec<String> = (0..cfg.count).map(record_id).collect();
    let splits = assign_splits(&ids);
    let records = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let r = render_record(cfg, seed, i, splits[i], &library)?;
            for (name, bytes) in [(&r.record.clean_path, &r.clean), (&r.record.noisy_path, &r.noisy)] {
                let path = out.join(name);
                fs::write(&path, bytes).map_err(HarnessError::io(&path))?;
            }
            Ok(r.record)
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = DatasetManifest::new(cfg.alpha, records);
    manifest.write(out)?;
    cleanup.armed = false;
    Ok(manifest)
}

/// A noisy input and its clean target.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub id: String,
    pub noisy: GrayImage,
    pub clean: GrayImage,
}

fn read_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(HarnessError::io(path))?;
    load_image(&bytes).map_err(|source| HarnessError::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads every pair of `split` in manifest order.
pub fn load_split(dir: &Path, manifest: &DatasetManifest, split: Split) -> Result<Vec<Pair>> {
    manifest
        .split(split)
        .map(|r| {
            let noisy = read_image(&dir.join(&r.noisy_path))?;
            let clean = read_image(&dir.join(&r.clean_path))?;
            if noisy.dims() != clean.dims() {
                return Err(HarnessError::config(format!(
                    "record {:?}: noisy {:?} and clean {:?} differ in size",
                    r.id,
                    noisy.dims(),
                    clean.dims()
                )));
            }
            Ok(Pair {
                id: r.id.clone(),
                noisy,
                clean,
            })
        })
        .collect()
}

/// Reads the manifest of `dir` and checks that it and the directory agree.
pub fn open_dataset(dir: &Path) -> Result<DatasetManifest> {
    if !dir.join(MANIFEST_FILE).is_file() {
        return Err(HarnessError::config(format!("{} has no {MANIFEST_FILE}", dir.display())));
    }
    let manifest = DatasetManifest::read(dir)?;
    manifest.check_files(dir)?;
    Ok(manifest)
}
