//! Grid containers, the pinhole camera model and pixel/point conversions.
//!
//! Storage is row-major with the origin at the top-left pixel; `u` grows to
//! the right and `v` grows downward. Invalid samples are tracked by an
//! explicit mask rather than sentinel values.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pinhole intrinsics in pixel units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics<T> {
    pub fu: T,
    pub fv: T,
    pub cu: T,
    pub cv: T,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fu: T, fv: T, cu: T, cv: T) -> Result<Self> {
        if !(fu.is_finite() && fu > T::zero() && fv.is_finite() && fv > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be finite and positive, got fu={fu} fv={fv}"
            )));
        }
        if !(cu.is_finite() && cv.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "principal point must be finite, got ({cu}, {cv})"
            )));
        }
        Ok(Self { fu, fv, cu, cv })
    }

    pub fn cast<S: Real>(&self) -> CameraIntrinsics<S> {
        CameraIntrinsics {
            fu: S::lit(self.fu.as_f64()),
            fv: S::lit(self.fv.as_f64()),
            cu: S::lit(self.cu.as_f64()),
            cv: S::lit(self.cv.as_f64()),
        }
    }

    /// Scales the intrinsics for an image resampled by `factor` about pixel
    /// centres.
    pub fn rescaled(&self, factor: T) -> Self {
        let half = T::lit(0.5);
        Self {
            fu: self.fu * factor,
            fv: self.fv * factor,
            cu: (self.cu + half) * factor - half,
            cv: (self.cv + half) * factor - half,
        }
    }
}

/// Integer pixel coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub u: usize,
    pub v: usize,
}

impl Pixel {
    pub const fn new(u: usize, v: usize) -> Self {
        Self { u, v }
    }

    /// Neighbour at `(du, dv)`, if it is inside a `width` x `height` grid.
    #[inline]
    pub fn offset(self, du: i64, dv: i64, width: usize, height: usize) -> Option<Pixel> {
        let u = self.u as i64 + du;
        let v = self.v as i64 + dv;
        if u < 0 || v < 0 || u >= width as i64 || v >= height as i64 {
            None
        } else {
            Some(Pixel::new(u as usize, v as usize))
        }
    }
}

/// Image axis along which a gradient component is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    U,
    V,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::U, Axis::V];

    pub fn other(self) -> Axis {
        match self {
            Axis::U => Axis::V,
            Axis::V => Axis::U,
        }
    }

    /// Unit step of `t` along this axis as `(du, dv)`.
    #[inline]
    pub fn step(self, t: i64) -> (i64, i64) {
        match self {
            Axis::U => (t, 0),
            Axis::V => (0, t),
        }
    }
}

/// Neighbour offset `(du, dv)` with components in `{-1, 0, 1}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Offset {
    pub du: i8,
    pub dv: i8,
}

impl Offset {
    pub const ZERO: Offset = Offset { du: 0, dv: 0 };

    pub const fn new(du: i8, dv: i8) -> Self {
        Self { du, dv }
    }

    /// Offset of `t` along `axis`.
    pub const fn along(axis: Axis, t: i8) -> Self {
        match axis {
            Axis::U => Self { du: t, dv: 0 },
            Axis::V => Self { du: 0, dv: t },
        }
    }

    pub fn is_zero(self) -> bool {
        self == Self::ZERO
    }

    /// Component along `axis`.
    pub fn on(self, axis: Axis) -> i8 {
        match axis {
            Axis::U => self.du,
            Axis::V => self.dv,
        }
    }

    pub fn apply(self, p: Pixel, width: usize, height: usize) -> Option<Pixel> {
        p.offset(self.du as i64, self.dv as i64, width, height)
    }
}

/// What the scalar field of a [`DepthGrid`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DepthKind {
    Depth,
    InverseDepth,
}

impl DepthKind {
    pub fn flipped(self) -> Self {
        match self {
            DepthKind::Depth => DepthKind::InverseDepth,
            DepthKind::InverseDepth => DepthKind::Depth,
        }
    }
}

/// Rectangular depth (or inverse-depth) field with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthGrid<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
    mask: Vec<bool>,
    kind: DepthKind,
}

fn usable<T: Real>(x: T) -> bool {
    x.is_finite() && x > T::zero()
}

impl<T: Real> DepthGrid<T> {
    /// Builds a grid, masking every sample that is non-finite or not positive.
    pub fn new(width: usize, height: usize, values: Vec<T>, kind: DepthKind) -> Result<Self> {
        check_len(width, height, values.len())?;
        let mask = values.iter().map(|&x| usable(x)).collect();
        Ok(Self {
            width,
            height,
            values,
            mask,
            kind,
        })
    }

    /// Builds a grid from explicit values and mask. Valid samples must be
    /// finite and positive.
    pub fn from_parts(
        width: usize,
        height: usize,
        values: Vec<T>,
        mask: Vec<bool>,
        kind: DepthKind,
    ) -> Result<Self> {
        check_len(width, height, values.len())?;
        check_len(width, height, mask.len())?;
        for (i, (&x, &m)) in values.iter().zip(&mask).enumerate() {
            if m && !usable(x) {
                return Err(Error::InvalidDepth {
                    u: i % width,
                    v: i / width,
                    value: x.as_f64(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            values,
            mask,
            kind,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        kind: DepthKind,
        mut f: impl FnMut(Pixel) -> T,
    ) -> Result<Self> {
        let values = (0..height)
            .flat_map(|v| (0..width).map(move |u| Pixel::new(u, v)))
            .map(&mut f)
            .collect();
        Self::new(width, height, values, kind)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn kind(&self) -> DepthKind {
        self.kind
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn index(&self, p: Pixel) -> usize {
        p.v * self.width + p.u
    }

    #[inline]
    pub fn pixel(&self, index: usize) -> Pixel {
        Pixel::new(index % self.width, index / self.width)
    }

    /// Raw sample, ignoring the mask.
    #[inline]
    pub fn value(&self, p: Pixel) -> T {
        self.values[self.index(p)]
    }

    #[inline]
    pub fn is_valid(&self, p: Pixel) -> bool {
        self.mask[self.index(p)]
    }

    /// Sample at `p` if it is valid.
    #[inline]
    pub fn get(&self, p: Pixel) -> Option<T> {
        let i = self.index(p);
        self.mask[i].then(|| self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.u < self.width && p.v < self.height
    }

    /// Returns a copy with every valid sample multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        let values = self
            .values
            .iter()
            .zip(&self.mask)
            .map(|(&x, &m)| if m { x * factor } else { x })
            .collect();
        Self::from_parts(self.width, self.height, values, self.mask.clone(), self.kind)
    }

    pub fn cast<S: Real>(&self) -> DepthGrid<S> {
        DepthGrid {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|x| S::lit(x.as_f64())).collect(),
            mask: self.mask.clone(),
            kind: self.kind,
        }
    }
}

/// Per-pixel unit normals with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalMap<T> {
    width: usize,
    height: usize,
    normals: Vec<[T; 3]>,
    mask: Vec<bool>,
}

impl<T: Real> NormalMap<T> {
    /// An all-invalid map.
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            normals: vec![[T::zero(); 3]; width * height],
            mask: vec![false; width * height],
        }
    }

    /// Builds a map; valid normals must have unit length within `1e-6`.
    pub fn from_parts(
        width: usize,
        height: usize,
        normals: Vec<[T; 3]>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        check_len(width, height, normals.len())?;
        check_len(width, height, mask.len())?;
        let tol = T::lit(1e-6);
        for (i, (n, &m)) in normals.iter().zip(&mask).enumerate() {
            if m && (norm3(*n) - T::one()).abs() > tol {
                return Err(Error::Degenerate(format!(
                    "normal at pixel ({}, {}) is not unit length",
                    i % width,
                    i / width
                )));
            }
        }
        Ok(Self {
            width,
            height,
            normals,
            mask,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn normals(&self) -> &[[T; 3]] {
        &self.normals
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn index(&self, p: Pixel) -> usize {
        p.v * self.width + p.u
    }

    #[inline]
    pub fn get(&self, p: Pixel) -> Option<[T; 3]> {
        let i = self.index(p);
        self.mask[i].then(|| self.normals[i])
    }

    pub fn set(&mut self, p: Pixel, normal: Option<[T; 3]>) {
        let i = self.index(p);
        match normal {
            Some(n) => {
                self.normals[i] = n;
                self.mask[i] = true;
            }
            None => {
                self.normals[i] = [T::zero(); 3];
                self.mask[i] = false;
            }
        }
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn cast<S: Real>(&self) -> NormalMap<S> {
        NormalMap {
            width: self.width,
            height: self.height,
            normals: self
                .normals
                .iter()
                .map(|n| n.map(|c| S::lit(c.as_f64())))
                .collect(),
            mask: self.mask.clone(),
        }
    }
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if width.checked_mul(height) != Some(len) {
        return Err(Error::DimensionMismatch(format!(
            "{width}x{height} grid needs {} samples, got {len}",
            width.saturating_mul(height)
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn norm3<T: Real>(n: [T; 3]) -> T {
    (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
}

#[inline]
pub(crate) fn dot3<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross3<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Lifts a pixel at depth `z` to a camera-frame point.
pub fn back_project<T: Real>(p: Pixel, z: T, k: &CameraIntrinsics<T>) -> Result<[T; 3]> {
    if !usable(z) {
        return Err(Error::InvalidDepth {
            u: p.u,
            v: p.v,
            value: z.as_f64(),
        });
    }
    Ok(back_project_unchecked(T::lit(p.u as f64), T::lit(p.v as f64), z, k))
}

#[inline]
pub(crate) fn back_project_unchecked<T: Real>(u: T, v: T, z: T, k: &CameraIntrinsics<T>) -> [T; 3] {
    [z * (u - k.cu) / k.fu, z * (v - k.cv) / k.fv, z]
}

/// Perspective projection to continuous pixel coordinates.
pub fn project<T: Real>(point: [T; 3], k: &CameraIntrinsics<T>) -> Result<(T, T)> {
    let z = point[2];
    if !usable(z) {
        return Err(Error::Degenerate(format!(
            "point has non-positive depth {z}"
        )));
    }
    Ok((k.fu * point[0] / z + k.cu, k.fv * point[1] / z + k.cv))
}

/// The in-bounds pixels of the 8-neighbourhood of `p`, in row-major order.
pub fn neighbors8(p: Pixel, width: usize, height: usize) -> Result<Vec<Pixel>> {
    if p.u >= width || p.v >= height {
        return Err(Error::OutOfBounds {
            u: p.u as i64,
            v: p.v as i64,
            width,
            height,
        });
    }
    let mut out = Vec::with_capacity(8);
    for dv in -1..=1 {
        for du in -1..=1 {
            if du == 0 && dv == 0 {
                continue;
            }
            if let Some(q) = p.offset(du, dv, width, height) {
                out.push(q);
            }
        }
    }
    Ok(out)
}

/// Reciprocal of every valid sample; the kind tag flips.
pub fn invert_depth<T: Real>(g: &DepthGrid<T>) -> Result<DepthGrid<T>> {
    let mut values = g.values.clone();
    for (i, (x, &m)) in values.iter_mut().zip(&g.mask).enumerate() {
        if !m {
            continue;
        }
        if !usable(*x) {
            return Err(Error::InvalidDepth {
                u: i % g.width,
                v: i / g.width,
                value: x.as_f64(),
            });
        }
        *x = x.recip();
    }
    DepthGrid::from_parts(g.width, g.height, values, g.mask.clone(), g.kind.flipped())
}
