//! Analytic test scenes with exact depth, gradients, curvature and normals.
//!
//! Every scene is a set of analytic surfaces intersected with the viewing
//! rays of a pinhole camera. Derivatives with respect to pixel coordinates
//! come from second-order forward-mode differentiation, so they are exact up
//! to rounding.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Axis, CameraIntrinsics, DepthGrid, DepthKind, NormalMap, Pixel};
use crate::normals::orient_normalize;

/// Value with first and second derivative along one variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: f64,
    pub dd: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Self { v, d: 0.0, dd: 0.0 }
    }

    pub const fn variable(v: f64) -> Self {
        Self { v, d: 1.0, dd: 0.0 }
    }

    /// Applies `f` given `f(v)`, `f'(v)` and `f''(v)`.
    #[inline]
    pub fn chain(self, f: f64, f1: f64, f2: f64) -> Self {
        Self {
            v: f,
            d: f1 * self.d,
            dd: f2 * self.d * self.d + f1 * self.dd,
        }
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            d: self.d + o.d,
            dd: self.dd + o.dd,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet {
            v: self.v - o.v,
            d: self.d - o.d,
            dd: self.dd - o.dd,
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
            dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            v: -self.v,
            d: -self.d,
            dd: -self.dd,
        }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, o: f64) -> Jet {
        Jet { v: self.v + o, ..self }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, o: f64) -> Jet {
        Jet {
            v: self.v * o,
            d: self.d * o,
            dd: self.dd * o,
        }
    }
}

/// Depth as an analytic function of continuous pixel coordinates.
pub trait AnalyticDepth: Sync {
    /// Depth at `(u, v)` differentiated along `axis`.
    fn jet(&self, u: f64, v: f64, axis: Axis) -> Result<Jet>;

    fn depth(&self, u: f64, v: f64) -> Result<f64> {
        Ok(self.jet(u, v, Axis::U)?.v)
    }

    /// `(dz/du, dz/dv)`.
    fn gradient(&self, u: f64, v: f64) -> Result<(f64, f64)> {
        Ok((self.jet(u, v, Axis::U)?.d, self.jet(u, v, Axis::V)?.d))
    }

    /// `(d2z/du2, d2z/dv2)`.
    fn second(&self, u: f64, v: f64) -> Result<(f64, f64)> {
        Ok((self.jet(u, v, Axis::U)?.dd, self.jet(u, v, Axis::V)?.dd))
    }
}

fn pixel_jets(u: f64, v: f64, axis: Axis) -> (Jet, Jet) {
    match axis {
        Axis::U => (Jet::variable(u), Jet::constant(v)),
        Axis::V => (Jet::constant(u), Jet::variable(v)),
    }
}

/// One analytic surface seen through the camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Surface {
    /// Points `P` with `m · P = c`; `m` is unit and faces the camera.
    Plane { m: [f64; 3], c: f64 },
    Sphere { center: [f64; 3], radius: f64 },
}

impl Surface {
    /// Plane with camera-facing unit normal `m` passing through `point`.
    pub fn plane_through(m: [f64; 3], point: [f64; 3]) -> Self {
        let len = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
        let m = m.map(|c| c / len);
        Surface::Plane {
            m,
            c: m[0] * point[0] + m[1] * point[1] + m[2] * point[2],
        }
    }

    /// Ray parameter (equal to depth) along `(a, b, 1)`, if it hits in front.
    fn depth_jet(&self, a: Jet, b: Jet) -> Option<Jet> {
        match *self {
            Surface::Plane { m, c } => {
                let den = a * m[0] + b * m[1] + m[2];
                let z = Jet::constant(c) / den;
                (z.v.is_finite() && z.v > 0.0).then_some(z)
            }
            Surface::Sphere { center, radius } => {
                let rc = a * center[0] + b * center[1] + center[2];
                let rr = a * a + b * b + 1.0;
                let k = center.iter().map(|x| x * x).sum::<f64>() - radius * radius;
                let disc = rc * rc - rr * k;
                if disc.v < 0.0 {
                    return None;
                }
                let z = (rc - disc.sqrt()) / rr;
                (z.v > 0.0).then_some(z)
            }
        }
    }

    fn normal_at(&self, p: [f64; 3]) -> [f64; 3] {
        match *self {
            Surface::Plane { m, .. } => m,
            Surface::Sphere { center, radius } => {
                [0, 1, 2].map(|i| (p[i] - center[i]) / radius)
            }
        }
    }

    /// Discriminant of the ray-sphere quadratic; positive inside the
    /// silhouette.
    fn silhouette_margin(&self, a: f64, b: f64) -> f64 {
        match *self {
            Surface::Plane { .. } => f64::INFINITY,
            Surface::Sphere { center, radius } => {
                let rc = a * center[0] + b * center[1] + center[2];
                let rr = a * a + b * b + 1.0;
                let k = center.iter().map(|x| x * x).sum::<f64>() - radius * radius;
                rc * rc - rr * k
            }
        }
    }
}

/// How the surfaces of a scene combine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Composition {
    /// Surface 0 everywhere.
    Single,
    /// Surface 0 for `u < edge`, surface 1 otherwise.
    SplitU { edge: f64 },
    /// Farthest surface along each ray: convex creases facing the camera.
    FarthestOf,
    /// Surface 0 where its silhouette covers the ray, surface 1 elsewhere.
    Foreground,
}

/// Shipped scene families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SceneKind {
    FrontoPlane,
    TiltedPlane,
    StepEdge,
    Ridge,
    Sphere,
    BoxCorner,
}

impl SceneKind {
    pub const ALL: [SceneKind; 6] = [
        SceneKind::FrontoPlane,
        SceneKind::TiltedPlane,
        SceneKind::StepEdge,
        SceneKind::Ridge,
        SceneKind::Sphere,
        SceneKind::BoxCorner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::FrontoPlane => "fronto",
            SceneKind::TiltedPlane => "tilted",
            SceneKind::StepEdge => "step",
            SceneKind::Ridge => "ridge",
            SceneKind::Sphere => "sphere",
            SceneKind::BoxCorner => "box",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fronto" | "fronto-plane" => SceneKind::FrontoPlane,
            "tilted" | "tilted-plane" => SceneKind::TiltedPlane,
            "step" | "step-edge" => SceneKind::StepEdge,
            "ridge" => SceneKind::Ridge,
            "sphere" => SceneKind::Sphere,
            "box" | "box-corner" => SceneKind::BoxCorner,
            other => {
                return Err(Error::InvalidArgument(format!("unknown scene `{other}`")));
            }
        })
    }
}

/// Tilt of each box-corner face away from the optical axis.
pub const BOX_FACE_TILT_DEG: f64 = 35.0;

/// Scene family, image geometry and shape parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics<f64>,
    pub band_radius: usize,
    /// Depth on the optical axis (plane scenes, ridge crease, box vertex).
    pub depth: f64,
    /// Surface slope `(dz/dx, dz/dy)` for plane and step scenes.
    pub tilt: (f64, f64),
    /// Step scene: depth of the left and right halves on the optical axis.
    pub step_depths: (f64, f64),
    /// Step scene: first pixel column of the right half.
    pub edge_column: f64,
    /// Ridge scene: angle between the two faces, in degrees.
    pub dihedral_deg: f64,
    /// Ridge scene: rotation of the crease about the camera x axis, degrees.
    pub pitch_deg: f64,
    /// Sphere scene: centre, radius and background depth.
    pub sphere_center: [f64; 3],
    pub sphere_radius: f64,
    pub background: f64,
}

impl SceneSpec {
    /// Default parameters for `kind` at 160x120.
    pub fn new(kind: SceneKind) -> Self {
        let (tilt, depth) = match kind {
            SceneKind::FrontoPlane => ((0.0, 0.0), 2.0),
            SceneKind::TiltedPlane => ((0.35, -0.2), 2.0),
            SceneKind::StepEdge => ((0.3, -0.15), 2.0),
            _ => ((0.0, 0.0), 2.0),
        };
        Self {
            kind,
            width: 160,
            height: 120,
            intrinsics: CameraIntrinsics {
                fu: 120.0,
                fv: 120.0,
                cu: 79.5,
                cv: 59.5,
            },
            band_radius: 2,
            depth,
            tilt,
            step_depths: (1.5, 2.5),
            edge_column: 80.0,
            dihedral_deg: 120.0,
            pitch_deg: 10.0,
            sphere_center: [0.0, 0.0, 2.0],
            sphere_radius: 0.6,
            background: 3.0,
        }
    }

    /// Same scene sampled `factor` times more densely; pixel `(u, v)` of the
    /// original maps to pixel `(factor·u, factor·v)`.
    pub fn refined(&self, factor: usize) -> Self {
        let f = factor as f64;
        let k = self.intrinsics;
        Self {
            width: (self.width - 1) * factor + 1,
            height: (self.height - 1) * factor + 1,
            intrinsics: CameraIntrinsics {
                fu: k.fu * f,
                fv: k.fv * f,
                cu: k.cu * f,
                cv: k.cv * f,
            },
            edge_column: (self.edge_column - 0.5) * f + 0.5,
            band_radius: self.band_radius * factor,
            ..self.clone()
        }
    }

    /// Parses `name[:key=value,...]`.
    ///
    /// Keys: `w h fu fv cu cv band depth tx ty left right edge dihedral pitch
    /// cx cy cz radius background`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, params) = match text.split_once(':') {
            Some((n, p)) => (n, p),
            None => (text, ""),
        };
        let mut spec = SceneSpec::new(name.trim().parse()?);
        for item in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("scene parameter `{item}` is not key=value"))
            })?;
            let key = key.trim();
            let x: f64 = value.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("scene parameter `{key}` is not a number"))
            })?;
            if !x.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "scene parameter `{key}` must be finite"
                )));
            }
            let count = || -> Result<usize> {
                if x >= 1.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(Error::InvalidArgument(format!(
                        "scene parameter `{key}` must be a positive integer"
                    )))
                }
            };
            match key {
                "w" => spec.width = count()?,
                "h" => spec.height = count()?,
                "fu" => spec.intrinsics.fu = x,
                "fv" => spec.intrinsics.fv = x,
                "cu" => spec.intrinsics.cu = x,
                "cv" => spec.intrinsics.cv = x,
                "band" => spec.band_radius = x as usize,
                "depth" => spec.depth = x,
                "tx" => spec.tilt.0 = x,
                "ty" => spec.tilt.1 = x,
                "left" => spec.step_depths.0 = x,
                "right" => spec.step_depths.1 = x,
                "edge" => spec.edge_column = x,
                "dihedral" => spec.dihedral_deg = x,
                "pitch" => spec.pitch_deg = x,
                "cx" => spec.sphere_center[0] = x,
                "cy" => spec.sphere_center[1] = x,
                "cz" => spec.sphere_center[2] = x,
                "radius" => spec.sphere_radius = x,
                "background" => spec.background = x,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown scene parameter `{key}`"
                    )))
                }
            }
        }
        CameraIntrinsics::new(
            spec.intrinsics.fu,
            spec.intrinsics.fv,
            spec.intrinsics.cu,
            spec.intrinsics.cv,
        )?;
        Ok(spec)
    }

    /// Surfaces and how they combine.
    pub fn geometry(&self) -> Result<Scene> {
        let tilted = |(tx, ty): (f64, f64), depth: f64| {
            Surface::plane_through([tx, ty, -1.0], [0.0, 0.0, depth])
        };
        let (surfaces, composition) = match self.kind {
            SceneKind::FrontoPlane => (vec![tilted((0.0, 0.0), self.depth)], Composition::Single),
            SceneKind::TiltedPlane => (vec![tilted(self.tilt, self.depth)], Composition::Single),
            SceneKind::StepEdge => (
                vec![
                    tilted(self.tilt, self.step_depths.0),
                    tilted(self.tilt, self.step_depths.1),
                ],
                Composition::SplitU {
                    edge: self.edge_column - 0.5,
                },
            ),
            SceneKind::Ridge => {
                if !(self.dihedral_deg > 0.0 && self.dihedral_deg < 180.0) {
                    return Err(Error::InvalidArgument(
                        "ridge dihedral must lie in (0, 180) degrees".into(),
                    ));
                }
                let alpha = (90.0 - self.dihedral_deg / 2.0).to_radians();
                let pitch = self.pitch_deg.to_radians();
                let rot = |n: [f64; 3]| {
                    let (s, c) = pitch.sin_cos();
                    [n[0], c * n[1] - s * n[2], s * n[1] + c * n[2]]
                };
                let apex = [0.0, 0.0, self.depth];
                (
                    vec![
                        Surface::plane_through(rot([-alpha.sin(), 0.0, -alpha.cos()]), apex),
                        Surface::plane_through(rot([alpha.sin(), 0.0, -alpha.cos()]), apex),
                    ],
                    Composition::FarthestOf,
                )
            }
            SceneKind::Sphere => {
                if !(self.sphere_radius > 0.0) || self.sphere_center[2] <= self.sphere_radius {
                    return Err(Error::InvalidArgument(
                        "sphere must have positive radius and lie in front of the camera".into(),
                    ));
                }
                (
                    vec![
                        Surface::Sphere {
                            center: self.sphere_center,
                            radius: self.sphere_radius,
                        },
                        tilted((0.0, 0.0), self.background),
                    ],
                    Composition::Foreground,
                )
            }
            SceneKind::BoxCorner => {
                // Faces tilted BOX_FACE_TILT_DEG off the optical axis at
                // 120 degree spacing. Steeper faces reach grazing incidence
                // inside the default field of view.
                let vertex = [0.0, 0.0, self.depth];
                let (s, c) = BOX_FACE_TILT_DEG.to_radians().sin_cos();
                (
                    [0.0f64, 120.0, 240.0]
                        .iter()
                        .map(|deg| {
                            let (sa, ca) = deg.to_radians().sin_cos();
                            Surface::plane_through([s * ca, s * sa, -c], vertex)
                        })
                        .collect(),
                    Composition::FarthestOf,
                )
            }
        };
        Ok(Scene {
            intrinsics: self.intrinsics,
            surfaces,
            composition,
        })
    }
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self::new(SceneKind::FrontoPlane)
    }
}

impl fmt::Display for SceneSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)
    }
}

/// Surfaces behind a camera.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub intrinsics: CameraIntrinsics<f64>,
    pub surfaces: Vec<Surface>,
    pub composition: Composition,
}

/// Below this distance a query counts as lying on a discontinuity.
const ON_EDGE: f64 = 1e-12;

impl Scene {
    fn ray(&self, u: f64, v: f64, axis: Axis) -> (Jet, Jet) {
        let k = &self.intrinsics;
        let (ju, jv) = pixel_jets(u, v, axis);
        ((ju + -k.cu) * (1.0 / k.fu), (jv + -k.cv) * (1.0 / k.fv))
    }

    /// Surface index owning `(u, v)` and the distance to the nearest
    /// ownership change, in the composition's own units. `None` when no
    /// surface is hit in front of the camera.
    pub fn owner(&self, u: f64, v: f64) -> Option<(usize, f64)> {
        let (a, b) = self.ray(u, v, Axis::U);
        match self.composition {
            Composition::Single => self.surfaces[0]
                .depth_jet(a, b)
                .map(|_| (0, f64::INFINITY)),
            Composition::SplitU { edge } => {
                let i = usize::from(u >= edge);
                self.surfaces[i].depth_jet(a, b).map(|_| (i, (u - edge).abs()))
            }
            Composition::FarthestOf => {
                let mut depths = Vec::with_capacity(self.surfaces.len());
                for s in &self.surfaces {
                    depths.push(s.depth_jet(a, b)?.v);
                }
                let mut best = 0;
                for (i, &z) in depths.iter().enumerate() {
                    if z > depths[best] {
                        best = i;
                    }
                }
                let gap = depths
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != best)
                    .map(|(_, &z)| depths[best] - z)
                    .fold(f64::INFINITY, f64::min);
                Some((best, gap))
            }
            Composition::Foreground => {
                let margin = self.surfaces[0].silhouette_margin(a.v, b.v);
                if margin > 0.0 {
                    if let Some(_) = self.surfaces[0].depth_jet(a, b) {
                        return Some((0, margin));
                    }
                }
                self.surfaces[1].depth_jet(a, b).map(|_| (1, margin.abs()))
            }
        }
    }

    /// Camera-facing unit normal at `(u, v)`.
    pub fn normal(&self, u: f64, v: f64) -> Option<[f64; 3]> {
        let (i, _) = self.owner(u, v)?;
        let (a, b) = self.ray(u, v, Axis::U);
        let z = self.surfaces[i].depth_jet(a, b)?.v;
        let p = [a.v * z, b.v * z, z];
        orient_normalize(self.surfaces[i].normal_at(p), p).ok()
    }
}

impl AnalyticDepth for Scene {
    fn jet(&self, u: f64, v: f64, axis: Axis) -> Result<Jet> {
        let here = Error::UndefinedDerivative {
            u: u.round().max(0.0) as usize,
            v: v.round().max(0.0) as usize,
        };
        let (i, margin) = self.owner(u, v).ok_or(Error::Degenerate(format!(
            "no surface in front of the camera at ({u}, {v})"
        )))?;
        if margin < ON_EDGE {
            return Err(here);
        }
        let (a, b) = self.ray(u, v, axis);
        self.surfaces[i].depth_jet(a, b).ok_or(here)
    }
}

/// Rendered scene with ground truth.
#[derive(Clone, Debug)]
pub struct SceneSample {
    pub spec: SceneSpec,
    pub scene: Scene,
    pub depth: DepthGrid<f64>,
    pub gt_normals: NormalMap<f64>,
    pub intrinsics: CameraIntrinsics<f64>,
    /// Surface index per pixel; `None` where nothing is hit.
    pub owners: Vec<Option<usize>>,
    /// Pixels within `spec.band_radius` of an ownership change.
    pub band: Vec<bool>,
}

impl SceneSample {
    /// Exact `(dz/du, dz/dv)` at a pixel centre.
    pub fn analytic_gradient(&self, p: Pixel) -> Result<(f64, f64)> {
        self.check(p)?;
        self.scene.gradient(p.u as f64, p.v as f64)
    }

    /// Exact `(d2z/du2, d2z/dv2)` at a pixel centre.
    pub fn analytic_second(&self, p: Pixel) -> Result<(f64, f64)> {
        self.check(p)?;
        self.scene.second(p.u as f64, p.v as f64)
    }

    fn check(&self, p: Pixel) -> Result<()> {
        if !self.depth.contains(p) {
            return Err(Error::OutOfBounds {
                u: p.u as i64,
                v: p.v as i64,
                width: self.depth.width(),
                height: self.depth.height(),
            });
        }
        Ok(())
    }

    /// Band recomputed for another radius.
    pub fn band_with_radius(&self, radius: usize) -> Vec<bool> {
        band_mask(&self.owners, self.depth.width(), self.depth.height(), radius)
    }

    pub fn band_count(&self) -> usize {
        self.band.iter().filter(|&&b| b).count()
    }
}

/// Pixels whose `(2r+1)`-square window holds more than one owner.
pub fn band_mask(owners: &[Option<usize>], w: usize, h: usize, radius: usize) -> Vec<bool> {
    let r = radius as i64;
    (0..w * h)
        .map(|i| {
            let p = Pixel::new(i % w, i / w);
            let Some(mine) = owners[i] else {
                return false;
            };
            for dv in -r..=r {
                for du in -r..=r {
                    if let Some(q) = p.offset(du, dv, w, h) {
                        if let Some(other) = owners[q.v * w + q.u] {
                            if other != mine {
                                return true;
                            }
                        }
                    }
                }
            }
            false
        })
        .collect()
}

/// Samples `spec` at every pixel centre.
pub fn render(spec: &SceneSpec) -> Result<SceneSample> {
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::InvalidArgument("scene needs a non-empty image".into()));
    }
    let scene = spec.geometry()?;
    let (w, h) = (spec.width, spec.height);
    let per_pixel: Vec<Option<(usize, f64, [f64; 3])>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (u, v) = ((i % w) as f64, (i / w) as f64);
            let (owner, _) = scene.owner(u, v)?;
            let (a, b) = scene.ray(u, v, Axis::U);
            let z = scene.surfaces[owner].depth_jet(a, b)?.v;
            let n = scene.normal(u, v)?;
            Some((owner, z, n))
        })
        .collect();
    if per_pixel.iter().all(Option::is_none) {
        return Err(Error::Empty("scene geometry is behind the camera everywhere"));
    }
    let depth = DepthGrid::new(
        w,
        h,
        per_pixel.iter().map(|x| x.map_or(0.0, |t| t.1)).collect(),
        DepthKind::Depth,
    )?;
    let mut gt = NormalMap::invalid(w, h);
    for (i, x) in per_pixel.iter().enumerate() {
        gt.set(Pixel::new(i % w, i / w), x.map(|t| t.2));
    }
    let owners: Vec<Option<usize>> = per_pixel.iter().map(|x| x.map(|t| t.0)).collect();
    let band = band_mask(&owners, w, h, spec.band_radius);
    Ok(SceneSample {
        spec: spec.clone(),
        scene,
        depth,
        gt_normals: gt,
        intrinsics: spec.intrinsics,
        owners,
        band,
    })
}

/// Smooth random height field: affine part, quadratic part and a few
/// sinusoids, for bound checks.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomSmoothSurface {
    pub offset: f64,
    pub slope: (f64, f64),
    pub quad: (f64, f64, f64),
    /// `(amplitude, wu, wv, phase)`.
    pub waves: Vec<(f64, f64, f64, f64)>,
}

impl RandomSmoothSurface {
    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = |lo: f64, hi: f64| rng.random_range(lo..hi);
        let offset = r(1.0, 4.0);
        let slope = (r(-0.05, 0.05), r(-0.05, 0.05));
        let quad = (r(-0.01, 0.01), r(-0.01, 0.01), r(-0.01, 0.01));
        let waves = (0..3)
            .map(|_| (r(0.0, 0.05), r(-1.0, 1.0), r(-1.0, 1.0), r(0.0, std::f64::consts::TAU)))
            .collect();
        Self {
            offset,
            slope,
            quad,
            waves,
        }
    }
}

impl AnalyticDepth for RandomSmoothSurface {
    fn jet(&self, u: f64, v: f64, axis: Axis) -> Result<Jet> {
        let (ju, jv) = pixel_jets(u, v, axis);
        let (a, b, c) = self.quad;
        let mut z = Jet::constant(self.offset)
            + ju * self.slope.0
            + jv * self.slope.1
            + ju * ju * a
            + jv * jv * b
            + ju * jv * c;
        for &(amp, wu, wv, phase) in &self.waves {
            z = z + (ju * wu + jv * wv + phase).sin() * amp;
        }
        Ok(z)
    }
}

/// Quadratic height field `z0 + a u^2 + b v^2` (plus an affine part).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadratic {
    pub z0: f64,
    pub lin: (f64, f64),
    pub a: f64,
    pub b: f64,
}

impl AnalyticDepth for Quadratic {
    fn jet(&self, u: f64, v: f64, axis: Axis) -> Result<Jet> {
        let (ju, jv) = pixel_jets(u, v, axis);
        Ok(Jet::constant(self.z0) + ju * self.lin.0 + jv * self.lin.1 + ju * ju * self.a + jv * jv * self.b)
    }
}
