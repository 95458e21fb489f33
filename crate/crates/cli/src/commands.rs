use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use shutterforge::dataset::{
    self, add_perturbation, apply_perturbation, list_frames, load_frame, variant_seed,
    DatasetManifest, SynthConfig,
};
use shutterforge::distillation::{
    error_mask, loss_charbonnier, loss_distill, loss_total, mask_combine, mask_dynamic,
    boundary_mask, MaskWeights,
};
use shutterforge::encoding::tpe_relative;
use shutterforge::metrics::{
    abs_rel, delta_accuracy, mse, psnr, ssim, temporal_profile, tof, DELTA_THRESHOLDS,
};
use shutterforge::perturbation::{
    low_light, spatial_shift, stereo_shift, temporal_shift_rs, PerturbKind, PerturbSpec,
};
use shutterforge::sft::{self, read_flow, read_image, read_mask, write_tensor};
use shutterforge::synthesis::{rs_synthesize, synthesize_triples};
use shutterforge::{Error, ExposureSchedule, FlowField, FrameSequence, Image, MaskMap};

use crate::args::*;
use crate::{CmdResult, Failure};

pub fn run(cmd: &Command) -> CmdResult {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Perturb(a) => perturb(a),
        Command::Encode(a) => encode(a),
        Command::Mask(a) => mask(a),
        Command::Loss(a) => loss(a),
        Command::Metric(a) => metric(a),
        Command::Dataset(DatasetCommand::Ingest(a)) => ingest(a),
        Command::Dataset(DatasetCommand::Materialize(a)) => materialize(a),
        Command::Dataset(DatasetCommand::Verify(a)) => verify(a),
        Command::Dataset(DatasetCommand::Split(a)) => split(a),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Missing inputs are usage errors rather than computation errors.
fn existing(path: &Path) -> Result<&Path, Failure> {
    if path.exists() {
        Ok(path)
    } else {
        Err(usage(format!("input {} does not exist", path.display())))
    }
}

fn load_frames(dir: &Path, input: &FrameInput) -> Result<FrameSequence, Failure> {
    let names = list_frames(existing(dir)?, &input.ext)?;
    if names.is_empty() {
        return Err(Error::Pipeline(format!(
            "{}: no frame_*.{} files",
            dir.display(),
            input.ext
        ))
        .into());
    }
    let frames = names
        .iter()
        .map(|n| load_frame(&dir.join(n), input.bit_depth))
        .collect::<shutterforge::Result<Vec<_>>>()?;
    Ok(FrameSequence::new(frames)?)
}

fn read_images(paths: &[PathBuf]) -> Result<FrameSequence, Failure> {
    let frames = paths
        .iter()
        .map(|p| Ok(read_image(existing(p)?)?))
        .collect::<Result<Vec<_>, Failure>>()?;
    Ok(FrameSequence::new(frames)?)
}

fn read_flows(paths: &[PathBuf]) -> Result<Vec<FlowField>, Failure> {
    paths.iter().map(|p| Ok(read_flow(existing(p)?)?)).collect()
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| {
        Failure::from(Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

fn display(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn parse_specs(raw: &[String]) -> Result<Vec<PerturbSpec>, Failure> {
    raw.iter()
        .map(|s| {
            let spec: PerturbSpec =
                serde_json::from_str(s).map_err(|e| usage(format!("bad perturbation spec {s:?}: {e}")))?;
            spec.validate()?;
            Ok(spec)
        })
        .collect()
}

fn synth(a: &SynthArgs) -> CmdResult {
    let specs = parse_specs(&a.perturb)?;
    let seq = load_frames(&a.input, &a.frames)?;
    let cropped = seq
        .frames()
        .iter()
        .map(|f| f.center_crop(a.crop))
        .collect::<shutterforge::Result<Vec<_>>>()?;
    let cropped = FrameSequence::new(cropped)?;
    let mut triples = synthesize_triples(&cropped, a.exposure, a.deadtime, a.n_latent, a.crop)?;

    // Delayed exposures must stay inside the sequence.
    let max_delay = specs
        .iter()
        .filter_map(|s| match s.kind {
            PerturbKind::TemporalShift { hi, .. } => Some(hi),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let dropped = triples.len();
    triples.retain(|t| t.meta.window_start + a.exposure + max_delay <= cropped.len());
    let dropped = dropped - triples.len();
    if triples.is_empty() {
        return Err(Error::Pipeline(format!(
            "insufficient frames: need at least {} for a delay of {max_delay}",
            a.exposure + max_delay
        ))
        .into());
    }

    let mut files = 0usize;
    let mut starts = Vec::new();
    for (i, t) in triples.iter().enumerate() {
        let dir = a.out.join(format!("t{i:04}"));
        create_dir(&dir)?;
        write_tensor(dir.join("blur.sft"), &t.blur)?;
        write_tensor(dir.join("rs.sft"), &t.rs)?;
        for (k, g) in t.gt.frames().iter().enumerate() {
            write_tensor(dir.join(format!("gt_{k:02}.sft")), g)?;
        }
        files += 2 + t.gt.len();
        let window = ExposureSchedule::window(t.meta.window_start, a.exposure)?;
        for (j, spec) in specs.iter().enumerate() {
            let seed = variant_seed(a.seed, spec.seed, "", i);
            let img = apply_perturbation(spec, seed, &cropped, &window, &t.rs)?;
            write_tensor(dir.join(format!("rs_{}_{j}.sft", spec.kind.name())), &img)?;
            files += 1;
        }
        starts.push(t.meta.window_start);
    }
    Ok(json!({
        "frames": seq.len(),
        "triples": triples.len(),
        "window_starts": starts,
        "dropped_for_delay": dropped,
        "files_written": files,
        "out": display(&a.out),
    }))
}

fn perturb_spec(a: &PerturbArgs) -> Result<PerturbSpec, Failure> {
    let kind = match a.kind {
        KindArg::SpatialShift => PerturbKind::SpatialShift {
            max_offset: a.max_offset,
        },
        KindArg::TemporalShift => PerturbKind::TemporalShift { lo: a.lo, hi: a.hi },
        KindArg::LowLight => PerturbKind::LowLight {
            peak: a.peak,
            gamma_lo: a.gamma_lo,
            gamma_hi: a.gamma_hi,
        },
        KindArg::Stereo => PerturbKind::Stereo {
            d_up: a.d_up,
            disparity: a.disparity,
            disparity_path: a.disparity_path.clone(),
        },
    };
    Ok(PerturbSpec::new(kind, a.seed)?)
}

fn perturb(a: &PerturbArgs) -> CmdResult {
    let spec = perturb_spec(a)?;
    if let Some(m) = &a.manifest {
        let manifest = DatasetManifest::load(existing(m)?)?;
        let before = manifest.warnings.len();
        let out = add_perturbation(&manifest, spec)?;
        out.save(&a.out)?;
        return Ok(json!({
            "manifest": display(&a.out),
            "scenes": out.scenes.len(),
            "triples": out.triple_total(),
            "warnings": out.warnings[before..],
        }));
    }

    let input = existing(a.input.as_deref().expect("clap requires input or manifest"))?;
    let mut results = Map::new();
    let img = if input.is_dir() {
        let seq = load_frames(input, &a.frames)?;
        let exposure = a.exposure.unwrap_or(seq.shape().0);
        let window = ExposureSchedule::window(a.window_start, exposure)?;
        match &spec.kind {
            PerturbKind::TemporalShift { lo, hi } => {
                let (img, delay) = temporal_shift_rs(&seq, &window, (*lo, *hi), spec.seed)?;
                results.insert("delay".into(), json!(delay));
                img
            }
            _ => {
                let rs = rs_synthesize(&seq, &window)?;
                apply_single(&spec, &rs, &mut results)?
            }
        }
    } else {
        if matches!(spec.kind, PerturbKind::TemporalShift { .. }) {
            return Err(usage("temporal_shift needs a frame directory as --input"));
        }
        apply_single(&spec, &read_image(input)?, &mut results)?
    };
    write_tensor(&a.out, &img)?;
    results.insert("out".into(), json!(display(&a.out)));
    Ok(Value::Object(results))
}

fn apply_single(spec: &PerturbSpec, img: &Image, results: &mut Map<String, Value>) -> Result<Image, Failure> {
    Ok(match &spec.kind {
        PerturbKind::SpatialShift { max_offset } => {
            let (out, dx, dy) = spatial_shift(img, *max_offset, spec.seed)?;
            results.insert("dx".into(), json!(dx));
            results.insert("dy".into(), json!(dy));
            out
        }
        PerturbKind::LowLight {
            peak,
            gamma_lo,
            gamma_hi,
        } => {
            let (out, gamma) = low_light(img, *peak, (*gamma_lo, *gamma_hi), spec.seed)?;
            results.insert("gamma".into(), json!(gamma));
            out
        }
        PerturbKind::Stereo {
            d_up,
            disparity,
            disparity_path,
        } => {
            let (h, w) = img.dims();
            let map = match disparity_path {
                Some(p) => read_mask(existing(Path::new(p))?)?,
                None => MaskMap::filled(h, w, *disparity)?,
            };
            stereo_shift(img, &map, *d_up)?
        }
        PerturbKind::TemporalShift { .. } => unreachable!("handled by the caller"),
    })
}

fn encode(a: &EncodeArgs) -> CmdResult {
    let width = a.width.unwrap_or(a.height);
    let maps = tpe_relative(a.height, width, a.n_latent)?;
    create_dir(&a.out)?;
    let mut files = Vec::new();
    for (t, m) in maps.iter().enumerate() {
        let path = a.out.join(format!("tpe_{t:02}.sft"));
        write_tensor(&path, m)?;
        files.push(display(&path));
    }
    Ok(json!({ "width": width, "maps": maps.len(), "files": files }))
}

fn mask_summary(m: &MaskMap, path: &Path) -> Value {
    let mean = m.data().iter().map(|&v| v as f64).sum::<f64>() / m.data().len() as f64;
    json!({ "mean": mean, "path": display(path) })
}

fn mask(a: &MaskArgs) -> CmdResult {
    if a.flow.is_none() && a.frame.is_none() && a.student.is_none() {
        return Err(usage("give at least one of --flow, --frame or --student/--teacher/--gt"));
    }
    let weights = match &a.weights {
        Some(w) if w.len() == 3 => MaskWeights::new(w[0], w[1], w[2])?,
        Some(_) => return Err(usage("--weights takes three comma-separated values")),
        None => MaskWeights::default(),
    };
    create_dir(&a.out)?;
    let mut results = Map::new();
    let mut save = |name: &str, m: &MaskMap| -> Result<(), Failure> {
        let path = a.out.join(format!("{name}.sft"));
        write_tensor(&path, m)?;
        results.insert(name.into(), mask_summary(m, &path));
        Ok(())
    };
    let m_d = match &a.flow {
        Some(p) => {
            let m = mask_dynamic(&read_flow(existing(p)?)?, a.k)?;
            save("m_d", &m)?;
            Some(m)
        }
        None => None,
    };
    let m_b = match &a.frame {
        Some(p) => {
            let m = boundary_mask(&read_image(existing(p)?)?);
            save("m_b", &m)?;
            Some(m)
        }
        None => None,
    };
    let m_e = match (&a.student, &a.teacher, &a.gt) {
        (Some(s), Some(t), Some(g)) => {
            let m = error_mask(
                &read_image(existing(s)?)?,
                &read_image(existing(t)?)?,
                &read_image(existing(g)?)?,
            )?;
            save("m_e", &m)?;
            Some(m)
        }
        _ => None,
    };
    if let (Some(d), Some(b), Some(e)) = (&m_d, &m_b, &m_e) {
        save("m", &mask_combine(d, b, e, &weights)?)?;
    }
    Ok(Value::Object(results))
}

fn loss(a: &LossArgs) -> CmdResult {
    let pred = read_images(&a.pred)?;
    let gt = read_images(&a.gt)?;
    let mode = a.charbonnier.into();
    let l_rec = loss_charbonnier(&pred, &gt, a.eps, mode)?;
    let l_rec_t = if a.teacher_pred.is_empty() {
        0.0
    } else {
        loss_charbonnier(&read_images(&a.teacher_pred)?, &gt, a.eps, mode)?
    };
    let l_dis = if a.student_flow.is_empty() {
        0.0
    } else {
        let s = read_flows(&a.student_flow)?;
        let t = read_flows(&a.teacher_flow)?;
        let masks = if a.mask.is_empty() {
            let (h, w) = s[0].dims();
            vec![MaskMap::filled(h, w, 1.0)?]
        } else {
            a.mask
                .iter()
                .map(|p| Ok(read_mask(existing(p)?)?))
                .collect::<Result<Vec<_>, Failure>>()?
        };
        loss_distill(&s, &t, &masks)?
    };
    let l_total = loss_total(l_rec, l_rec_t, l_dis, a.lambda_d)?;
    Ok(json!({ "l_rec": l_rec, "l_rec_t": l_rec_t, "l_dis": l_dis, "l_total": l_total }))
}

fn image_pair(a: &MetricArgs) -> Result<(Image, Image), Failure> {
    if a.inputs.len() != 2 {
        return Err(usage(format!("{:?} takes two image tensors", a.metric)));
    }
    Ok((read_image(existing(&a.inputs[0])?)?, read_image(existing(&a.inputs[1])?)?))
}

fn metric(a: &MetricArgs) -> CmdResult {
    let value = match a.metric {
        MetricKind::Psnr => {
            let (x, y) = image_pair(a)?;
            json!({ "psnr": psnr(&x, &y, a.cap)? })
        }
        MetricKind::Ssim => {
            let (x, y) = image_pair(a)?;
            json!({ "ssim": ssim(&x, &y)? })
        }
        MetricKind::Mse => {
            let (x, y) = image_pair(a)?;
            json!({ "mse": mse(&x, &y)? })
        }
        MetricKind::AbsRel => {
            let (x, y) = image_pair(a)?;
            json!({ "abs_rel": abs_rel(&x, &y, a.valid_min)? })
        }
        MetricKind::Delta => {
            let (x, y) = image_pair(a)?;
            let thresholds = if a.thr.is_empty() {
                DELTA_THRESHOLDS.to_vec()
            } else {
                a.thr.clone()
            };
            let mut out = Map::new();
            for thr in thresholds {
                out.insert(format!("{thr}"), json!(delta_accuracy(&x, &y, thr, a.valid_min)?));
            }
            json!({ "delta": out })
        }
        MetricKind::Tof => {
            if a.inputs.len() != 2 {
                return Err(usage("tof takes two frame directories (prediction, reference)"));
            }
            let pred = load_frames(&a.inputs[0], &a.frames)?;
            let gt = load_frames(&a.inputs[1], &a.frames)?;
            json!({ "tof": tof(&pred, &gt, a.block, a.radius)? })
        }
        MetricKind::Profile => {
            if a.inputs.len() != 1 {
                return Err(usage("profile takes one frame directory"));
            }
            let column = a.column.ok_or_else(|| usage("profile needs --column"))?;
            let seq = load_frames(&a.inputs[0], &a.frames)?;
            let prof = temporal_profile(&seq, column)?;
            let mut out = json!({ "height": prof.height(), "width": prof.width() });
            if let Some(p) = &a.out {
                sft::write_tensor(p, &prof)?;
                out["path"] = json!(display(p));
            }
            json!({ "profile": out })
        }
    };
    Ok(value)
}

fn ingest(a: &IngestArgs) -> CmdResult {
    let mut config = SynthConfig::new(a.exposure, a.deadtime, a.n_latent, a.crop);
    config.frame_ext = a.frames.ext.clone();
    config.png_bit_depth = a.frames.bit_depth;
    if let Some(p) = &a.perturbations {
        let text = fs::read_to_string(existing(p)?).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?;
        config.perturbations = serde_json::from_str(&text)
            .map_err(|e| usage(format!("{}: bad perturbation list: {e}", p.display())))?;
    }
    let manifest = dataset::ingest(existing(&a.source)?, &config, a.seed)?;
    manifest.save(&a.out)?;
    Ok(json!({
        "manifest": display(&a.out),
        "scenes": manifest.scenes.len(),
        "triples": manifest.triple_total(),
        "warnings": manifest.warnings,
    }))
}

fn materialize(a: &MaterializeArgs) -> CmdResult {
    let manifest = DatasetManifest::load(existing(&a.manifest)?)?;
    let report = dataset::materialize(&manifest, &a.out)?;
    let results = json!({
        "out": display(&a.out),
        "written": report.written,
        "skipped": report.skipped,
        "errors": report.errors,
    });
    if report.is_ok() {
        Ok(results)
    } else {
        Err(Failure::Compute {
            error: Error::Pipeline(format!("{} file(s) failed", report.errors.len())),
            partial: Some(results),
        })
    }
}

fn verify(a: &VerifyArgs) -> CmdResult {
    let manifest = DatasetManifest::load(existing(&a.manifest)?)?;
    let mismatches = dataset::verify(&manifest, existing(&a.dir)?)?;
    let results = json!({ "triples": manifest.triple_total(), "mismatches": mismatches });
    if mismatches.is_empty() {
        Ok(results)
    } else {
        Err(Failure::Compute {
            error: Error::Pipeline(format!("{} tensor(s) differ", mismatches.len())),
            partial: Some(results),
        })
    }
}

fn split(a: &SplitArgs) -> CmdResult {
    let manifest = DatasetManifest::load(existing(&a.manifest)?)?;
    let (out, warnings) = dataset::split_scenes(&manifest, (a.train, a.val, a.test), a.seed)?;
    out.save(&a.out)?;
    let mut counts = Map::new();
    for s in &out.scenes {
        let key = serde_json::to_value(s.split).expect("split serializes");
        let key = key.as_str().unwrap_or_default().to_string();
        let n = counts.get(&key).and_then(Value::as_u64).unwrap_or(0);
        counts.insert(key, json!(n + 1));
    }
    let assignment: Map<String, Value> = out
        .scenes
        .iter()
        .map(|s| (s.scene_id.clone(), serde_json::to_value(s.split).expect("split serializes")))
        .collect();
    Ok(json!({
        "manifest": display(&a.out),
        "counts": counts,
        "assignment": assignment,
        "warnings": warnings,
    }))
}
