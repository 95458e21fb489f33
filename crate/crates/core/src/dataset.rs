//! Frame-directory ingestion, manifest generation, materialization of
//! blur/RS/target triples and scene-level splits.
//!
//! A source tree holds one scene per subdirectory; each scene is a run of
//! `frame_NNNNNN.<ext>` files (`png` or `sft`). The manifest (`sfman/1`) is a
//! single JSON document; materialized tensors are written beside it as SFT
//! files under `<scene_id>/tNNNN/`.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturbation::{self, PerturbKind, PerturbSpec};
use crate::png_io::{png_import, BitDepth};
use crate::rng;
use crate::sft::{self, read_mask};
use crate::synthesis::{blur_synthesize, rs_synthesize, sample_latent_targets, window_count};
use crate::tensor::{ExposureSchedule, FrameSequence, Image, MaskMap};

pub const MANIFEST_VERSION: &str = "sfman/1";
pub const FRAME_PREFIX: &str = "frame_";

/// `frame_%06d.<ext>`
pub fn frame_file_name(index: usize, ext: &str) -> String {
    format!("{FRAME_PREFIX}{index:06}.{ext}")
}

/// Synthesis and perturbation parameters shared by every scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub exposure_len: usize,
    pub deadtime_len: usize,
    pub n_latent: usize,
    pub crop: usize,
    /// Frame file extension, `png` or `sft`.
    pub frame_ext: String,
    /// Sample depth of PNG frames.
    #[serde(default = "default_bit_depth")]
    pub png_bit_depth: u32,
    #[serde(default)]
    pub perturbations: Vec<PerturbSpec>,
}

fn default_bit_depth() -> u32 {
    8
}

impl SynthConfig {
    pub fn new(exposure_len: usize, deadtime_len: usize, n_latent: usize, crop: usize) -> Self {
        Self {
            exposure_len,
            deadtime_len,
            n_latent,
            crop,
            frame_ext: "sft".into(),
            png_bit_depth: 8,
            perturbations: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.exposure_len == 0 || self.exposure_len != self.crop {
            return Err(Error::Argument(format!(
                "exposure length {} must be positive and equal the crop {}",
                self.exposure_len, self.crop
            )));
        }
        if self.n_latent < 2 || self.n_latent > self.exposure_len {
            return Err(Error::Argument(format!(
                "n_latent must lie in [2, {}], got {}",
                self.exposure_len, self.n_latent
            )));
        }
        if self.frame_ext != "png" && self.frame_ext != "sft" {
            return Err(Error::Argument(format!(
                "frame extension must be png or sft, got {}",
                self.frame_ext
            )));
        }
        BitDepth::from_bits(self.png_bit_depth)?;
        for p in &self.perturbations {
            p.validate()?;
        }
        Ok(())
    }

    /// Extra frames a window needs after its exposure for delayed-RS variants.
    fn max_delay(&self) -> usize {
        self.perturbations
            .iter()
            .filter_map(|p| match p.kind {
                PerturbKind::TemporalShift { hi, .. } => Some(hi),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Triples a scene of `frame_count` frames yields under this config.
    pub fn triple_count(&self, frame_count: usize) -> usize {
        let delay = self.max_delay();
        if frame_count < delay {
            return 0;
        }
        window_count(frame_count - delay, self.exposure_len, self.deadtime_len)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Val,
    Test,
}

/// A perturbed copy of a triple's rolling-shutter view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub kind: String,
    /// Index into the scene's perturbation list.
    pub spec_index: usize,
    /// Seed actually used for this triple.
    pub seed: u64,
    pub path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub window_start: usize,
    pub blur_path: String,
    pub rs_path: String,
    pub gt_paths: Vec<String>,
    #[serde(default)]
    pub variants: Vec<VariantRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene_id: String,
    pub source_dir: String,
    pub frame_count: usize,
    /// Frame file names in temporal order.
    pub frames: Vec<String>,
    pub crop: usize,
    pub exposure_len: usize,
    pub deadtime_len: usize,
    pub n_latent: usize,
    pub perturbations: Vec<PerturbSpec>,
    pub split: Split,
    pub triples: Vec<TripleRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub seed: u64,
    pub config: SynthConfig,
    pub scenes: Vec<SceneRecord>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: DatasetManifest =
            serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Structural checks: version tag and non-overlapping, increasing windows.
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported manifest version {:?}",
                self.version
            )));
        }
        for scene in &self.scenes {
            let stride = scene.exposure_len + scene.deadtime_len;
            for pair in scene.triples.windows(2) {
                if pair[1].window_start < pair[0].window_start + stride {
                    return Err(Error::Manifest(format!(
                        "scene {}: windows at {} and {} overlap (stride {stride})",
                        scene.scene_id, pair[0].window_start, pair[1].window_start
                    )));
                }
            }
            if let Some(t) = scene.triples.last() {
                if t.window_start + scene.exposure_len > scene.frame_count {
                    return Err(Error::Manifest(format!(
                        "scene {}: window at {} runs past {} frames",
                        scene.scene_id, t.window_start, scene.frame_count
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn triple_total(&self) -> usize {
        self.scenes.iter().map(|s| s.triples.len()).sum()
    }
}

fn frame_index(name: &str, ext: &str) -> Option<usize> {
    let stem = name.strip_prefix(FRAME_PREFIX)?.strip_suffix(ext)?.strip_suffix('.')?;
    if stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    stem.parse().ok()
}

/// Frame files of one scene directory, ordered by their numeric index.
pub fn list_frames(dir: &Path, ext: &str) -> Result<Vec<String>> {
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(i) = frame_index(&name, ext) {
            frames.push((i, name));
        }
    }
    frames.sort();
    Ok(frames.into_iter().map(|(_, n)| n).collect())
}

/// Loads a PNG or SFT frame, by extension.
pub fn load_frame(path: &Path, png_bit_depth: u32) -> Result<Image> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => png_import(path, BitDepth::from_bits(png_bit_depth)?),
        _ => sft::read_image(path),
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Per-triple seed for a perturbation, stable under reordering of scenes.
pub fn variant_seed(dataset_seed: u64, spec_seed: u64, scene_id: &str, triple_index: usize) -> u64 {
    let base = rng::mix(dataset_seed, spec_seed);
    rng::mix(rng::mix(base, fnv1a(scene_id)), triple_index as u64)
}

fn triple_dir(scene_id: &str, index: usize) -> String {
    format!("{scene_id}/t{index:04}")
}

/// Scans `source_dir` (one scene per subdirectory) and plans every triple.
///
/// Frames of a scene must share one shape; the first mismatch aborts with an
/// error naming the file. Scenes with no frames, or too few for one window,
/// are skipped and noted in `warnings`.
pub fn ingest(source_dir: &Path, config: &SynthConfig, seed: u64) -> Result<DatasetManifest> {
    config.validate()?;
    let mut scene_dirs = Vec::new();
    for entry in fs::read_dir(source_dir).map_err(|e| Error::io(source_dir, e))? {
        let entry = entry.map_err(|e| Error::io(source_dir, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
            scene_dirs.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    scene_dirs.sort();

    let mut scenes = Vec::new();
    let mut warnings = Vec::new();
    for scene_id in scene_dirs {
        let dir = source_dir.join(&scene_id);
        let frames = list_frames(&dir, &config.frame_ext)?;
        if frames.is_empty() {
            warnings.push(format!("scene {scene_id}: no frames, skipped"));
            continue;
        }
        let mut shape = None;
        for name in &frames {
            let img = load_frame(&dir.join(name), config.png_bit_depth)?;
            match shape {
                None => shape = Some(img.shape()),
                Some(s) if s != img.shape() => {
                    return Err(Error::Ingest(format!(
                        "{}: shape {:?} differs from {:?} of the first frame",
                        dir.join(name).display(),
                        img.shape(),
                        s
                    )));
                }
                _ => {}
            }
        }
        let (h, w, _) = shape.expect("scene has frames");
        if config.crop > h || config.crop > w {
            return Err(Error::Ingest(format!(
                "scene {scene_id}: crop {} exceeds frame size {h}x{w}",
                config.crop
            )));
        }
        let count = config.triple_count(frames.len());
        if count == 0 {
            warnings.push(format!(
                "scene {scene_id}: {} frames are too few for one window, skipped",
                frames.len()
            ));
            continue;
        }
        let stride = config.exposure_len + config.deadtime_len;
        let triples = (0..count)
            .map(|i| {
                let base = triple_dir(&scene_id, i);
                TripleRecord {
                    window_start: i * stride,
                    blur_path: format!("{base}/blur.sft"),
                    rs_path: format!("{base}/rs.sft"),
                    gt_paths: (0..config.n_latent)
                        .map(|t| format!("{base}/gt_{t:02}.sft"))
                        .collect(),
                    variants: config
                        .perturbations
                        .iter()
                        .enumerate()
                        .map(|(j, p)| VariantRecord {
                            kind: p.kind.name().into(),
                            spec_index: j,
                            seed: variant_seed(seed, p.seed, &scene_id, i),
                            path: format!("{base}/rs_{}_{j}.sft", p.kind.name()),
                        })
                        .collect(),
                }
            })
            .collect();
        scenes.push(SceneRecord {
            source_dir: dir.to_string_lossy().into_owned(),
            scene_id,
            frame_count: frames.len(),
            frames,
            crop: config.crop,
            exposure_len: config.exposure_len,
            deadtime_len: config.deadtime_len,
            n_latent: config.n_latent,
            perturbations: config.perturbations.clone(),
            split: Split::Train,
            triples,
        });
    }

    Ok(DatasetManifest {
        version: MANIFEST_VERSION.into(),
        seed,
        config: config.clone(),
        scenes,
        warnings,
    })
}

/// Loads and centre-crops a scene's frames.
pub fn load_scene(scene: &SceneRecord, png_bit_depth: u32) -> Result<FrameSequence> {
    let dir = Path::new(&scene.source_dir);
    let frames = scene
        .frames
        .iter()
        .map(|name| load_frame(&dir.join(name), png_bit_depth)?.center_crop(scene.crop))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames)
}

/// Everything materialized for one triple, in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleTensors {
    pub blur: Image,
    pub rs: Image,
    pub gt: FrameSequence,
    pub variants: Vec<Image>,
}

fn disparity_map(spec_disparity: f32, path: Option<&str>, dims: (usize, usize)) -> Result<MaskMap> {
    match path {
        Some(p) => {
            let m = read_mask(p)?;
            if m.dims() != dims {
                return Err(Error::Shape(format!(
                    "disparity map {p} is {:?}, frames are {dims:?}",
                    m.dims()
                )));
            }
            Ok(m)
        }
        None => MaskMap::filled(dims.0, dims.1, spec_disparity),
    }
}

/// Applies one perturbation to the RS view of the window at `window`.
pub fn apply_perturbation(
    spec: &PerturbSpec,
    seed: u64,
    seq: &FrameSequence,
    window: &ExposureSchedule,
    rs: &Image,
) -> Result<Image> {
    Ok(match &spec.kind {
        PerturbKind::SpatialShift { max_offset } => {
            perturbation::spatial_shift(rs, *max_offset, seed)?.0
        }
        PerturbKind::TemporalShift { lo, hi } => {
            perturbation::temporal_shift_rs(seq, window, (*lo, *hi), seed)?.0
        }
        PerturbKind::LowLight {
            peak,
            gamma_lo,
            gamma_hi,
        } => perturbation::low_light(rs, *peak, (*gamma_lo, *gamma_hi), seed)?.0,
        PerturbKind::Stereo {
            d_up,
            disparity,
            disparity_path,
        } => {
            let map = disparity_map(*disparity, disparity_path.as_deref(), rs.dims())?;
            perturbation::stereo_shift(rs, &map, *d_up)?
        }
    })
}

/// Recomputes every tensor of triple `index` of `scene` from its frames.
pub fn compute_triple(
    scene: &SceneRecord,
    seq: &FrameSequence,
    index: usize,
) -> Result<TripleTensors> {
    let rec = &scene.triples[index];
    let window = ExposureSchedule::new(scene.exposure_len, scene.deadtime_len, rec.window_start)?;
    let blur = blur_synthesize(seq, &window)?;
    let rs = rs_synthesize(seq, &window)?;
    let gt = sample_latent_targets(seq, &window, scene.n_latent)?;
    let variants = rec
        .variants
        .iter()
        .map(|v| {
            let spec = scene.perturbations.get(v.spec_index).ok_or_else(|| {
                Error::Manifest(format!(
                    "scene {}: variant refers to missing perturbation {}",
                    scene.scene_id, v.spec_index
                ))
            })?;
            apply_perturbation(spec, v.seed, seq, &window, &rs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TripleTensors {
        blur,
        rs,
        gt,
        variants,
    })
}

/// Outcome of a materialization run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MaterializeReport {
    pub written: usize,
    pub skipped: usize,
    pub errors: Vec<String>,
}

impl MaterializeReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn merge(mut self, other: MaterializeReport) -> Self {
        self.written += other.written;
        self.skipped += other.skipped;
        self.errors.extend(other.errors);
        self
    }
}

/// Writes `bytes` unless the file already holds exactly these bytes.
/// Returns whether the file was written.
fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<bool> {
    if let Ok(existing) = fs::read(path) {
        if existing == bytes {
            return Ok(false);
        }
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(true)
}

fn record_write(report: &mut MaterializeReport, path: &Path, bytes: &[u8]) {
    match write_if_changed(path, bytes) {
        Ok(true) => report.written += 1,
        Ok(false) => report.skipped += 1,
        Err(e) => report.errors.push(e.to_string()),
    }
}

/// Writes every triple tensor and perturbed variant under `out_dir`, plus a
/// copy of the manifest as `manifest.json`.
///
/// Files whose bytes are already correct are left alone, so a second run
/// writes nothing. Failures are collected per file and do not stop the run.
pub fn materialize(manifest: &DatasetManifest, out_dir: &Path) -> Result<MaterializeReport> {
    manifest.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut report = MaterializeReport::default();
    record_write(&mut report, &out_dir.join("manifest.json"), manifest.to_json().as_bytes());

    for scene in &manifest.scenes {
        let seq = match load_scene(scene, manifest.config.png_bit_depth) {
            Ok(s) => s,
            Err(e) => {
                report.errors.push(format!("scene {}: {e}", scene.scene_id));
                continue;
            }
        };
        let scene_report = (0..scene.triples.len())
            .into_par_iter()
            .map(|i| {
                let mut r = MaterializeReport::default();
                let rec = &scene.triples[i];
                let tensors = match compute_triple(scene, &seq, i) {
                    Ok(t) => t,
                    Err(e) => {
                        r.errors.push(format!("scene {} triple {i}: {e}", scene.scene_id));
                        return r;
                    }
                };
                record_write(&mut r, &out_dir.join(&rec.blur_path), &sft::encode(&tensors.blur));
                record_write(&mut r, &out_dir.join(&rec.rs_path), &sft::encode(&tensors.rs));
                for (path, frame) in rec.gt_paths.iter().zip(tensors.gt.frames()) {
                    record_write(&mut r, &out_dir.join(path), &sft::encode(frame));
                }
                for (v, img) in rec.variants.iter().zip(&tensors.variants) {
                    record_write(&mut r, &out_dir.join(&v.path), &sft::encode(img));
                }
                r
            })
            .reduce(MaterializeReport::default, MaterializeReport::merge);
        report = report.merge(scene_report);
    }
    Ok(report)
}

/// Re-reads every materialized tensor and compares it with a fresh
/// recomputation from the source frames. Returns one message per mismatch.
pub fn verify(manifest: &DatasetManifest, out_dir: &Path) -> Result<Vec<String>> {
    let mut mismatches = Vec::new();
    for scene in &manifest.scenes {
        let seq = load_scene(scene, manifest.config.png_bit_depth)?;
        for (i, rec) in scene.triples.iter().enumerate() {
            let t = compute_triple(scene, &seq, i)?;
            let mut check = |path: &str, expected: &Image| -> Result<()> {
                if &sft::read_image(out_dir.join(path))? != expected {
                    mismatches.push(format!("{path} differs from recomputation"));
                }
                Ok(())
            };
            check(&rec.blur_path, &t.blur)?;
            check(&rec.rs_path, &t.rs)?;
            for (p, f) in rec.gt_paths.iter().zip(t.gt.frames()) {
                check(p, f)?;
            }
            for (v, img) in rec.variants.iter().zip(&t.variants) {
                check(&v.path, img)?;
            }
        }
    }
    Ok(mismatches)
}

/// Scene counts per split by the largest-remainder rule.
fn split_counts(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: [usize; 3] = [0; 3];
    for i in 0..3 {
        counts[i] = exact[i].floor() as usize;
    }
    let mut remaining = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if fractions[i] > 0.0 {
            counts[i] += 1;
            remaining -= 1;
        }
    }
    counts
}

/// Assigns whole scenes to train/val/test by a seeded shuffle.
///
/// Returns the updated manifest and any warnings (a positive fraction that
/// rounds to zero scenes is honoured as zero).
pub fn split_scenes(
    manifest: &DatasetManifest,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(DatasetManifest, Vec<String>)> {
    let f = [fractions.0, fractions.1, fractions.2];
    if f.iter().any(|v| !(0.0..=1.0).contains(v)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "split fractions must be in [0, 1] and sum to 1, got {fractions:?}"
        )));
    }
    let n = manifest.scenes.len();
    let counts = split_counts(n, f);
    let names = ["train", "val", "test"];
    let warnings: Vec<String> = (0..3)
        .filter(|&i| f[i] > 0.0 && counts[i] == 0)
        .map(|i| format!("{} fraction {} rounds to zero of {n} scenes", names[i], f[i]))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::global(seed));
    let mut out = manifest.clone();
    for (rank, &scene) in order.iter().enumerate() {
        out.scenes[scene].split = if rank < counts[0] {
            Split::Train
        } else if rank < counts[0] + counts[1] {
            Split::Val
        } else {
            Split::Test
        };
    }
    out.warnings.extend(warnings.iter().cloned());
    Ok((out, warnings))
}

/// Appends `spec` to the dataset and plans one variant of it per triple.
///
/// Triples whose delayed window would run past the scene's frames are
/// dropped, with a warning.
pub fn add_perturbation(manifest: &DatasetManifest, spec: PerturbSpec) -> Result<DatasetManifest> {
    spec.validate()?;
    let mut out = manifest.clone();
    out.config.perturbations.push(spec.clone());
    out.config.validate()?;
    let delay = match spec.kind {
        PerturbKind::TemporalShift { hi, .. } => hi,
        _ => 0,
    };
    let kind = spec.kind.name();
    let seed = out.seed;
    for scene in &mut out.scenes {
        let j = scene.perturbations.len();
        scene.perturbations.push(spec.clone());
        let limit = scene.frame_count;
        let span = scene.exposure_len + delay;
        let before = scene.triples.len();
        scene.triples.retain(|t| t.window_start + span <= limit);
        if scene.triples.len() < before {
            out.warnings.push(format!(
                "scene {}: dropped {} triple(s) that cannot fit a delay of {delay} frames",
                scene.scene_id,
                before - scene.triples.len()
            ));
        }
        for (i, t) in scene.triples.iter_mut().enumerate() {
            t.variants.push(VariantRecord {
                kind: kind.into(),
                spec_index: j,
                seed: variant_seed(seed, spec.seed, &scene.scene_id, i),
                path: format!("{}/rs_{kind}_{j}.sft", triple_dir(&scene.scene_id, i)),
            });
        }
    }
    Ok(out)
}
