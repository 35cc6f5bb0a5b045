use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::same_lambda;
use crate::checkpoint::Checkpoint;
use crate::codec::{Bitstream, ScalableCodec};
use crate::error::{Error, Result};
use crate::imaging::{bpp, load_image, psnr, DatasetManifest, Image};
use crate::postproc::{refine, PostprocModel};

/// Mean metrics of one λ over the evaluated images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub lambda: f64,
    /// Enhancement payload only.
    pub bpp_additional: f64,
    /// Base plus enhancement payloads (container header excluded).
    pub bpp_total: f64,
    pub psnr_machine: f64,
    pub psnr_human: f64,
    /// Refined PSNR keyed by the post-processor's RRDB count.
    pub psnr_refined: BTreeMap<usize, f64>,
    pub n_images: usize,
}

/// Metrics of one image at one λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub lambda: f64,
    pub width: usize,
    pub height: usize,
    pub base_bytes: usize,
    pub enh_bytes: usize,
    pub container_bytes: usize,
    pub bpp_base: f64,
    pub bpp_additional: f64,
    pub bpp_total: f64,
    pub psnr_machine: f64,
    pub psnr_human: f64,
    pub psnr_refined: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub manifest_split: String,
    pub manifest_entries: usize,
    pub base_fingerprint: String,
    /// `(λ, fingerprint)` of each enhancement checkpoint.
    pub enh_fingerprints: Vec<(f64, String)>,
    /// `(λ, l, fingerprint)` of each post-processor.
    pub postproc_fingerprints: Vec<(f64, usize, String)>,
    pub seed: u64,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Ordered by strictly increasing λ.
    pub points: Vec<RdPoint>,
    pub images: Vec<ImageRecord>,
    pub provenance: ReportProvenance,
}

impl Report {
    /// RRDB counts present in every point, ascending.
    pub fn levels(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .points
            .iter()
            .flat_map(|p| p.psnr_refined.keys().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Per-image records as CSV, full precision.
    pub fn images_csv(&self) -> String {
        let levels = self.levels();
        let mut out = String::from(
            "image_id,lambda,width,height,base_bytes,enh_bytes,container_bytes,bpp_base,bpp_additional,bpp_total,psnr_machine,psnr_human",
        );
        for l in &levels {
            out.push_str(&format!(",psnr_l{l}"));
        }
        out.push('\n');
        for r in &self.images {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.image_id,
                r.lambda,
                r.width,
                r.height,
                r.base_bytes,
                r.enh_bytes,
                r.container_bytes,
                r.bpp_base,
                r.bpp_additional,
                r.bpp_total,
                r.psnr_machine,
                r.psnr_human
            ));
            for l in &levels {
                match r.psnr_refined.get(l) {
                    Some(v) => out.push_str(&format!(",{v}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Checkpoints of one evaluation: the base layer, one enhancement layer per
/// λ, and post-processors per `(λ, l)` cell.
pub struct EvalInputs<'a> {
    pub base: &'a Checkpoint,
    pub enh: Vec<&'a Checkpoint>,
    pub postproc: Vec<(f64, &'a Checkpoint)>,
    /// RRDB counts that must be present for every λ.
    pub levels: Vec<usize>,
    pub seed: u64,
}

struct Cell {
    lambda: f64,
    codec: ScalableCodec,
    enh_fingerprint: String,
    refiners: Vec<(usize, PostprocModel, String)>,
}

fn lambda_of(ck: &Checkpoint) -> Result<f64> {
    ck.provenance
        .lambda
        .ok_or_else(|| Error::CheckpointMismatch("checkpoint does not record its lambda".into()))
}

fn build_cells(inputs: &EvalInputs<'_>) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for enh in &inputs.enh {
        let lambda = lambda_of(enh)?;
        if cells.iter().any(|c: &Cell| same_lambda(c.lambda, lambda)) {
            return Err(Error::Config(format!("two enhancement checkpoints for lambda={lambda}")));
        }
        let codec = ScalableCodec::from_checkpoints(inputs.base, enh)?;
        let mut refiners = Vec::new();
        for &l in &inputs.levels {
            let ck = inputs
                .postproc
                .iter()
                .find(|(pl, ck)| same_lambda(*pl, lambda) && ck.rrdb_config().is_ok_and(|c| c.l == l))
                .map(|(_, ck)| *ck)
                .ok_or(Error::MissingCell { lambda, l: Some(l) })?;
            refiners.push((l, PostprocModel::from_checkpoint(ck)?, ck.fingerprint()));
        }
        cells.push(Cell {
            lambda,
            codec,
            enh_fingerprint: enh.fingerprint(),
            refiners,
        });
    }
    if cells.is_empty() {
        return Err(Error::Config("no enhancement checkpoints to evaluate".into()));
    }
    cells.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(cells)
}

fn evaluate_image(cell: &Cell, id: &str, original: &Image) -> Result<ImageRecord> {
    let compressed = cell.codec.compress(original)?;
    // Measure and decode through the serialized container, exactly as a
    // receiver would.
    let bytes = compressed.bitstream.to_bytes();
    let parsed = Bitstream::parse(&bytes)?;
    let (machine, human) = cell.codec.decompress(&parsed)?;
    let (w, h) = original.dims();
    let bpp_base = bpp(parsed.base_payload.len() as u64, w, h)?;
    let bpp_additional = bpp(parsed.enh_payload.len() as u64, w, h)?;
    let bpp_total = bpp((parsed.base_payload.len() + parsed.enh_payload.len()) as u64, w, h)?;
    let mut psnr_refined = BTreeMap::new();
    for (l, model, _) in &cell.refiners {
        psnr_refined.insert(*l, psnr(original, &refine(&human, model))?);
    }
    Ok(ImageRecord {
        image_id: id.to_string(),
        lambda: cell.lambda,
        width: w,
        height: h,
        base_bytes: parsed.base_payload.len(),
        enh_bytes: parsed.enh_payload.len(),
        container_bytes: bytes.len(),
        bpp_base,
        bpp_additional,
        bpp_total,
        psnr_machine: psnr(original, &machine)?,
        psnr_human: psnr(original, &human)?,
        psnr_refined,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    sum / n as f64
}

/// Runs the full pipeline for every λ and image; images are reduced in
/// input order, so the result does not depend on the worker count.
pub fn evaluate_rd_images(images: &[(String, Image)], inputs: &EvalInputs<'_>) -> Result<Report> {
    if images.is_empty() {
        return Err(Error::EmptyDataset("no images to evaluate".into()));
    }
    evaluate_cells(images, &build_cells(inputs)?, inputs)
}

fn evaluate_cells(images: &[(String, Image)], cells: &[Cell], inputs: &EvalInputs<'_>) -> Result<Report> {
    let mut points = Vec::new();
    let mut records = Vec::new();
    for cell in cells {
        let recs: Vec<ImageRecord> = images
            .par_iter()
            .map(|(id, im)| evaluate_image(cell, id, im))
            .collect::<Result<_>>()?;
        let mut psnr_refined = BTreeMap::new();
        for (l, _, _) in &cell.refiners {
            psnr_refined.insert(*l, mean(recs.iter().map(|r| r.psnr_refined[l])));
        }
        points.push(RdPoint {
            lambda: cell.lambda,
            bpp_additional: mean(recs.iter().map(|r| r.bpp_additional)),
            bpp_total: mean(recs.iter().map(|r| r.bpp_total)),
            psnr_machine: mean(recs.iter().map(|r| r.psnr_machine)),
            psnr_human: mean(recs.iter().map(|r| r.psnr_human)),
            psnr_refined,
            n_images: recs.len(),
        });
        records.extend(recs);
    }
    let provenance = ReportProvenance {
        manifest_split: String::new(),
        manifest_entries: images.len(),
        base_fingerprint: inputs.base.fingerprint(),
        enh_fingerprints: cells.iter().map(|c| (c.lambda, c.enh_fingerprint.clone())).collect(),
        postproc_fingerprints: cells
            .iter()
            .flat_map(|c| c.refiners.iter().map(move |(l, _, fp)| (c.lambda, *l, fp.clone())))
            .collect(),
        seed: inputs.seed,
        timestamp: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
    };
    Ok(Report {
        points,
        images: records,
        provenance,
    })
}

pub fn evaluate_rd(manifest: &DatasetManifest, inputs: &EvalInputs<'_>) -> Result<Report> {
    if manifest.is_empty() {
        return Err(Error::EmptyDataset(format!("manifest '{}' has no entries", manifest.split_tag)));
    }
    // fail on missing cells before touching any image
    let cells = build_cells(inputs)?;
    let images = manifest
        .entries()
        .iter()
        .map(|e| Ok((e.image_id.clone(), load_image(&e.path)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut report = evaluate_cells(&images, &cells, inputs)?;
    report.provenance.manifest_split = manifest.split_tag.clone();
    Ok(report)
}
