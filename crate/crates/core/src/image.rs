//! Image and mask grids, rectangles, cropping and intensity statistics.
//!
//! Data is stored in C row-major order: `x` varies fastest, then `y`, then
//! `z`. Coordinates and extents are always listed in axis order `(x, y[, z])`.

use crate::error::{Error, Result};

/// Grid dimensions. `depth` is `None` for 2D images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
    pub depth: Option<usize>,
}

impl Dims {
    pub fn new_2d(width: usize, height: usize) -> Self {
        Dims {
            width,
            height,
            depth: None,
        }
    }

    pub fn new_3d(width: usize, height: usize, depth: usize) -> Self {
        Dims {
            width,
            height,
            depth: Some(depth),
        }
    }

    /// Builds dims from a per-axis extent list in `(x, y[, z])` order.
    pub fn from_extents(extents: &[usize]) -> Result<Self> {
        let dims = match *extents {
            [w, h] => Dims::new_2d(w, h),
            [w, h, d] => Dims::new_3d(w, h, d),
            _ => {
                return Err(Error::InvalidImage(format!(
                    "expected 2 or 3 axes, got {}",
                    extents.len()
                )))
            }
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.depth == Some(0) {
            return Err(Error::InvalidImage(format!("zero-sized axis in {self}")));
        }
        Ok(())
    }

    pub fn ndim(&self) -> usize {
        if self.depth.is_some() {
            3
        } else {
            2
        }
    }

    pub fn is_3d(&self) -> bool {
        self.depth.is_some()
    }

    /// Depth treating 2D images as a single slice.
    pub fn depth_or_one(&self) -> usize {
        self.depth.unwrap_or(1)
    }

    /// Total number of elements `N`.
    pub fn len(&self) -> usize {
        self.width * self.height * self.depth_or_one()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis extents in `(x, y[, z])` order.
    pub fn extents(&self) -> Vec<usize> {
        match self.depth {
            Some(d) => vec![self.width, self.height, d],
            None => vec![self.width, self.height],
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.height + y) * self.width + x
    }

    /// Coordinates `(x, y, z)` of a linear index.
    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let plane = self.width * self.height;
        let z = idx / plane;
        let rem = idx % plane;
        (rem % self.width, rem / self.width, z)
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.depth {
            Some(d) => write!(f, "{}x{}x{}", self.width, self.height, d),
            None => write!(f, "{}x{}", self.width, self.height),
        }
    }
}

/// Axis-aligned box given as origin and extent per axis, in `(x, y[, z])` order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rect {
    pub origin: Vec<usize>,
    pub extent: Vec<usize>,
}

impl Rect {
    pub fn new(origin: Vec<usize>, extent: Vec<usize>) -> Self {
        Rect { origin, extent }
    }

    pub fn new_2d(x: usize, y: usize, width: usize, height: usize) -> Self {
        Rect::new(vec![x, y], vec![width, height])
    }

    pub fn full(dims: &Dims) -> Self {
        Rect::new(vec![0; dims.ndim()], dims.extents())
    }

    /// Checks that the rect lies inside `dims` and has positive extent.
    pub fn check_within(&self, dims: &Dims) -> Result<()> {
        let ext = dims.extents();
        if self.origin.len() != ext.len() || self.extent.len() != ext.len() {
            return Err(Error::OutOfBounds(format!(
                "rect has {} axes, image {dims} has {}",
                self.origin.len(),
                ext.len()
            )));
        }
        for axis in 0..ext.len() {
            if self.extent[axis] == 0 {
                return Err(Error::OutOfBounds(format!("rect extent is zero on axis {axis}")));
            }
            if self.origin[axis] + self.extent[axis] > ext[axis] {
                return Err(Error::OutOfBounds(format!(
                    "rect origin {:?} + extent {:?} exceeds image dims {dims}",
                    self.origin, self.extent
                )));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        match self.extent.len() {
            3 => Dims::new_3d(self.extent[0], self.extent[1], self.extent[2]),
            _ => Dims::new_2d(self.extent[0], self.extent[1]),
        }
    }

    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        let p = [x, y, z];
        (0..self.origin.len()).all(|a| p[a] >= self.origin[a] && p[a] < self.origin[a] + self.extent[a])
    }

    /// Linear indices (in `dims`) of the elements covered by the rect, in
    /// row-major order of the rect.
    fn source_indices<'a>(&'a self, dims: &'a Dims) -> impl Iterator<Item = usize> + 'a {
        let (ox, oy) = (self.origin[0], self.origin[1]);
        let oz = self.origin.get(2).copied().unwrap_or(0);
        let (ex, ey) = (self.extent[0], self.extent[1]);
        let ez = self.extent.get(2).copied().unwrap_or(1);
        (0..ez).flat_map(move |z| {
            (0..ey).flat_map(move |y| {
                let start = dims.index(ox, oy + y, oz + z);
                start..start + ex
            })
        })
    }
}

/// Population statistics over every element of an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl IntensityStats {
    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    /// Statistics of a non-empty slice of values; std uses divisor `N`.
    pub fn of(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "statistics of an empty slice");
        let n = values.len() as f64;
        let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for &v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        let mean = sum / n;
        let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
        IntensityStats {
            min,
            max,
            mean,
            std: var.sqrt(),
        }
    }
}

/// Single-channel real-valued image, 2D or 3D. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    dims: Dims,
    data: Vec<f64>,
    declared_range: Option<(f64, f64)>,
    provenance: Vec<String>,
}

impl Image {
    /// Builds an image, rejecting non-finite values and length mismatches.
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if data.len() != dims.len() {
            return Err(Error::InvalidImage(format!(
                "dims {dims} need {} values, got {}",
                dims.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "non-finite value {} at index {i}",
                data[i]
            )));
        }
        Ok(Image {
            dims,
            data,
            declared_range: None,
            provenance: Vec::new(),
        })
    }

    pub fn new_2d(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Image::new(Dims::new_2d(width, height), data)
    }

    pub fn from_fn_2d(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image::new_2d(width, height, data)
    }

    pub fn constant(dims: Dims, value: f64) -> Result<Self> {
        Image::new(dims, vec![value; dims.len()])
    }

    /// Attaches a nominal intensity range; every value must lie inside it.
    pub fn with_declared_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidImage(format!("declared range ({lo}, {hi}) is inverted")));
        }
        let s = self.stats();
        if s.min < lo || s.max > hi {
            return Err(Error::InvalidImage(format!(
                "values span [{}, {}] outside declared range ({lo}, {hi})",
                s.min, s.max
            )));
        }
        self.declared_range = Some((lo, hi));
        Ok(self)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn declared_range(&self) -> Option<(f64, f64)> {
        self.declared_range
    }

    /// Fingerprints of the distortions applied to produce this image, oldest first.
    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub(crate) fn push_provenance(mut self, step: String) -> Self {
        self.provenance.push(step);
        self
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn stats(&self) -> IntensityStats {
        IntensityStats::of(&self.data)
    }

    /// Same dims and provenance, new values. Declared range is dropped since the
    /// values no longer relate to it.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        let mut out = Image::new(self.dims, data)?;
        out.provenance = self.provenance.clone();
        Ok(out)
    }

    /// Applies `f` to every element.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn crop(&self, rect: &Rect) -> Result<Self> {
        crop(self, rect)
    }

    /// Values at the true positions of `mask`, in row-major order.
    pub fn masked_values(&self, mask: &Mask) -> Result<Vec<f64>> {
        if mask.dims() != self.dims {
            return Err(Error::DimsMismatch(format!(
                "mask {} vs image {}",
                mask.dims(),
                self.dims
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(mask.data())
            .filter_map(|(&v, &m)| m.then_some(v))
            .collect())
    }
}

/// Population `(min, max, mean, std)` of an image.
pub fn intensity_stats(img: &Image) -> IntensityStats {
    img.stats()
}

/// Sub-image covered by `rect`; the declared range and provenance carry over.
pub fn crop(img: &Image, rect: &Rect) -> Result<Image> {
    rect.check_within(&img.dims)?;
    let dims = img.dims;
    let data = rect.source_indices(&dims).map(|i| img.data[i]).collect();
    Ok(Image {
        dims: rect.dims(),
        data,
        declared_range: img.declared_range,
        provenance: img.provenance.clone(),
    })
}

/// Boolean grid congruent with an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    dims: Dims,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(dims: Dims, data: Vec<bool>) -> Result<Self> {
        dims.validate()?;
        if data.len() != dims.len() {
            return Err(Error::InvalidImage(format!(
                "mask dims {dims} need {} values, got {}",
                dims.len(),
                data.len()
            )));
        }
        Ok(Mask { dims, data })
    }

    pub fn full(dims: Dims) -> Self {
        Mask {
            dims,
            data: vec![true; dims.len()],
        }
    }

    pub fn empty(dims: Dims) -> Self {
        Mask {
            dims,
            data: vec![false; dims.len()],
        }
    }

    pub fn from_fn_2d(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Mask {
            dims: Dims::new_2d(width, height),
            data,
        }
    }

    /// Mask whose true elements are exactly `rect`.
    pub fn from_rect(dims: Dims, rect: &Rect) -> Result<Self> {
        rect.check_within(&dims)?;
        let mut data = vec![false; dims.len()];
        for i in rect.source_indices(&dims) {
            data[i] = true;
        }
        Ok(Mask { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }

    pub fn intersection(&self, other: &Mask) -> Result<Mask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        self.zip_with(other, |a, b| a || b)
    }

    /// True when every true element of `self` is also true in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.dims == other.dims && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    fn zip_with(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Result<Mask> {
        if self.dims != other.dims {
            return Err(Error::DimsMismatch(format!("masks {} vs {}", self.dims, other.dims)));
        }
        Ok(Mask {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// The rect this mask fills exactly, if it is a filled rectangle.
    pub fn as_rect(&self) -> Option<Rect> {
        let rect = bounding_box(self).ok()?;
        let volume: usize = rect.extent.iter().product();
        (volume == self.count()).then_some(rect)
    }

    pub fn crop(&self, rect: &Rect) -> Result<Mask> {
        rect.check_within(&self.dims)?;
        let data = rect.source_indices(&self.dims).map(|i| self.data[i]).collect();
        Ok(Mask {
            dims: rect.dims(),
            data,
        })
    }

    /// 0/1 image, handy for saving masks.
    pub fn to_image(&self) -> Image {
        Image {
            dims: self.dims,
            data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            declared_range: Some((0.0, 1.0)),
            provenance: Vec::new(),
        }
    }

    /// Mask of nonzero elements.
    pub fn from_image(img: &Image) -> Mask {
        Mask {
            dims: img.dims(),
            data: img.data().iter().map(|&v| v != 0.0).collect(),
        }
    }
}

/// Minimal rect containing every true element of the mask.
pub fn bounding_box(mask: &Mask) -> Result<Rect> {
    let dims = mask.dims;
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut found = false;
    for (i, _) in mask.data.iter().enumerate().filter(|(_, &b)| b) {
        let (x, y, z) = dims.coords(i);
        for (a, c) in [x, y, z].into_iter().enumerate() {
            lo[a] = lo[a].min(c);
            hi[a] = hi[a].max(c);
        }
        found = true;
    }
    if !found {
        return Err(Error::EmptyMask("bounding box of a mask with no true element".into()));
    }
    let n = dims.ndim();
    Ok(Rect::new(
        lo[..n].to_vec(),
        (0..n).map(|a| hi[a] - lo[a] + 1).collect(),
    ))
}
