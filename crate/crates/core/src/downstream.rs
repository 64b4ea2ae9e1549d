//! Proxy downstream task: threshold segmentation followed by a connected
//! component size filter, compared between reference and test with DICE.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::metrics::{check_dims, dice, Fingerprint, MetricScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    /// 4 neighbors in 2D, 6 in 3D.
    #[default]
    Face,
    /// 8 neighbors in 2D, 26 in 3D.
    FaceCorner,
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connectivity::Face => "face",
            Connectivity::FaceCorner => "face_corner",
        })
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "face" => Ok(Connectivity::Face),
            "face_corner" | "face+corner" => Ok(Connectivity::FaceCorner),
            _ => Err(Error::InvalidParam(format!("unknown connectivity `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterParams {
    /// Threshold as a fraction of the image's own intensity span.
    pub threshold_rel: f64,
    pub min_component_size: usize,
    pub connectivity: Connectivity,
}

impl Default for SegmenterParams {
    fn default() -> Self {
        SegmenterParams {
            threshold_rel: 0.95,
            min_component_size: 20,
            connectivity: Connectivity::Face,
        }
    }
}

impl SegmenterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_rel > 0.0 && self.threshold_rel < 1.0) || self.min_component_size == 0 {
            return Err(Error::InvalidParam(format!(
                "segmenter needs threshold_rel in (0, 1) and min_component_size >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn write_fingerprint(&self, fp: &mut Fingerprint) {
        fp.insert("seg_connectivity", self.connectivity);
        fp.insert("seg_min_size", self.min_component_size);
        fp.insert("seg_threshold", self.threshold_rel);
    }

    pub fn from_fingerprint(fp: &Fingerprint) -> Result<Self> {
        let p = SegmenterParams {
            threshold_rel: fp.parse_key("seg_threshold")?,
            min_component_size: fp.parse_key("seg_min_size")?,
            connectivity: fp.require("seg_connectivity")?.parse()?,
        };
        p.validate()?;
        Ok(p)
    }
}

fn neighbor_offsets(ndim: usize, c: Connectivity) -> Vec<[i64; 3]> {
    let zr = if ndim == 3 { -1i64..=1 } else { 0..=0 };
    let mut out = Vec::new();
    for dz in zr {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let n = dx.abs() + dy.abs() + dz.abs();
                let keep = match c {
                    Connectivity::Face => n == 1,
                    Connectivity::FaceCorner => n >= 1,
                };
                if keep {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Connected components of the true elements, each as sorted linear indices,
/// ordered by their smallest index.
pub fn connected_components(mask: &Mask, connectivity: Connectivity) -> Vec<Vec<usize>> {
    let dims = mask.dims();
    let ext = [dims.width as i64, dims.height as i64, dims.depth_or_one() as i64];
    let offsets = neighbor_offsets(dims.ndim(), connectivity);
    let data = mask.data();
    let mut seen = vec![false; data.len()];
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..data.len() {
        if !data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (x, y, z) = dims.coords(i);
            for o in &offsets {
                let (nx, ny, nz) = (x as i64 + o[0], y as i64 + o[1], z as i64 + o[2]);
                if nx < 0 || ny < 0 || nz < 0 || nx >= ext[0] || ny >= ext[1] || nz >= ext[2] {
                    continue;
                }
                let j = dims.index(nx as usize, ny as usize, nz as usize);
                if data[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Pixels with `(v - min) / (max - min) > threshold_rel`, keeping components of
/// at least `min_component_size` elements.
pub fn threshold_segment(img: &Image, p: &SegmenterParams) -> Result<Mask> {
    p.validate()?;
    let s = img.stats();
    if !(s.max > s.min) {
        return Err(Error::Degenerate("cannot segment a constant image".into()));
    }
    let span = s.max - s.min;
    let raw: Vec<bool> = img.data().iter().map(|&v| (v - s.min) / span > p.threshold_rel).collect();
    let raw = Mask::new(img.dims(), raw)?;
    let mut keep = vec![false; raw.data().len()];
    for comp in connected_components(&raw, p.connectivity) {
        if comp.len() >= p.min_component_size {
            for i in comp {
                keep[i] = true;
            }
        }
    }
    Mask::new(img.dims(), keep)
}

/// DICE between the segmentations of `reference` and `test`.
pub fn task_similarity(reference: &Image, test: &Image, p: &SegmenterParams) -> Result<MetricScore> {
    check_dims(reference, test)?;
    let a = threshold_segment(reference, p)?;
    let b = threshold_segment(test, p)?;
    let mut fp = Fingerprint::new();
    fp.insert("metric", "dice");
    fp.insert("task", "threshold_segment");
    p.write_fingerprint(&mut fp);
    Ok(MetricScore::new(dice(&a, &b)?.value, "dice", &fp))
}
