//! Depth-to-normal back-ends.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    back_project_unchecked, cross3, dot3, norm3, CameraIntrinsics, DepthGrid, DepthKind,
    NormalMap, Pixel,
};
use crate::init::GradientField;
use crate::scalar::Real;

/// Central tendency used for the `nz` estimate of the inverse-depth back-end.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Phi {
    #[default]
    Median,
    Mean,
}

/// Which back-end turns gradients into normals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BackendChoice {
    /// Inverse-depth gradients plus a filtered `nz`.
    ThreeF2N { phi: Phi },
    /// Cross product of the two depth tangents.
    Cp2tv,
}

impl Default for BackendChoice {
    fn default() -> Self {
        BackendChoice::ThreeF2N { phi: Phi::Median }
    }
}

impl BackendChoice {
    /// Depth domain the gradients must be estimated in.
    pub fn domain(self) -> DepthKind {
        match self {
            BackendChoice::ThreeF2N { .. } => DepthKind::InverseDepth,
            BackendChoice::Cp2tv => DepthKind::Depth,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BackendChoice::ThreeF2N { .. } => "3f2n",
            BackendChoice::Cp2tv => "cp2tv",
        }
    }
}

/// Neighbours closer than this in depth carry no `nz` information.
pub const DEPTH_EPSILON: f64 = 1e-12;

/// Unit normal facing the camera (`n · p <= 0`).
pub fn orient_normalize<T: Real>(n: [T; 3], p3d: [T; 3]) -> Result<[T; 3]> {
    let len = norm3(n);
    if !(len.is_finite() && len > T::zero()) {
        return Err(Error::Degenerate("zero or non-finite normal".into()));
    }
    let s = if dot3(n, p3d) > T::zero() { -len } else { len };
    Ok(n.map(|c| c / s))
}

fn check_shapes<T: Real>(depth: &DepthGrid<T>, grad: &GradientField<T>) -> Result<()> {
    if depth.width() != grad.width || depth.height() != grad.height {
        return Err(Error::DimensionMismatch(format!(
            "depth is {}x{}, gradients are {}x{}",
            depth.width(),
            depth.height(),
            grad.width,
            grad.height
        )));
    }
    Ok(())
}

fn assemble<T: Real>(w: usize, h: usize, per_pixel: Vec<Option<[T; 3]>>) -> NormalMap<T> {
    let mut map = NormalMap::invalid(w, h);
    for (i, n) in per_pixel.into_iter().enumerate() {
        map.set(Pixel::new(i % w, i / w), n);
    }
    map
}

/// Normals from depth gradients via the two perspective tangent vectors.
pub fn normals_cp2tv<T: Real>(
    depth: &DepthGrid<T>,
    grad: &GradientField<T>,
    k: &CameraIntrinsics<T>,
) -> Result<NormalMap<T>> {
    if depth.kind() != DepthKind::Depth {
        return Err(Error::InvalidArgument(
            "tangent back-end needs a depth grid".into(),
        ));
    }
    check_shapes(depth, grad)?;
    let (w, h) = (depth.width(), depth.height());
    let out = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let p = Pixel::new(i % w, i / w);
            let z = depth.get(p)?;
            if !grad.mask[i] {
                return None;
            }
            let (zu, zv) = (grad.zu[i], grad.zv[i]);
            let a = (T::lit(p.u as f64) - k.cu) / k.fu;
            let b = (T::lit(p.v as f64) - k.cv) / k.fv;
            let tu = [z / k.fu + a * zu, b * zu, zu];
            let tv = [a * zv, z / k.fv + b * zv, zv];
            let point = [a * z, b * z, z];
            orient_normalize(cross3(tu, tv), point).ok()
        })
        .collect();
    Ok(assemble(w, h, out))
}

/// Normals from inverse-depth gradients: `nx`, `ny` from the scaled
/// gradient, `nz` from the central tendency of the neighbour ratios.
pub fn normals_3f2n<T: Real>(
    inv_depth: &DepthGrid<T>,
    grad_d: &GradientField<T>,
    depth: &DepthGrid<T>,
    k: &CameraIntrinsics<T>,
    phi: Phi,
) -> Result<NormalMap<T>> {
    if inv_depth.kind() != DepthKind::InverseDepth || depth.kind() != DepthKind::Depth {
        return Err(Error::InvalidArgument(
            "inverse-depth back-end needs an inverse-depth and a depth grid".into(),
        ));
    }
    check_shapes(inv_depth, grad_d)?;
    check_shapes(depth, grad_d)?;
    let (w, h) = (depth.width(), depth.height());
    let eps = T::lit(DEPTH_EPSILON);
    let out = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let p = Pixel::new(i % w, i / w);
            if !grad_d.mask[i] || !inv_depth.is_valid(p) {
                return None;
            }
            let z = depth.get(p)?;
            let here = point_at(p, z, k);
            let nx = k.fu * grad_d.zu[i];
            let ny = k.fv * grad_d.zv[i];
            if nx == T::zero() && ny == T::zero() {
                return orient_normalize([T::zero(), T::zero(), -T::one()], here).ok();
            }
            let mut ratios: Vec<T> = Vec::with_capacity(8);
            for dv in -1..=1 {
                for du in -1..=1 {
                    if du == 0 && dv == 0 {
                        continue;
                    }
                    let Some(q) = p.offset(du, dv, w, h) else {
                        continue;
                    };
                    let Some(zq) = depth.get(q) else {
                        continue;
                    };
                    let dz = zq - z;
                    if dz.abs() < eps {
                        continue;
                    }
                    let there = point_at(q, zq, k);
                    ratios.push(((there[0] - here[0]) * nx + (there[1] - here[1]) * ny) / dz);
                }
            }
            let nz = -central(&mut ratios, phi)?;
            orient_normalize([nx, ny, nz], here).ok()
        })
        .collect();
    Ok(assemble(w, h, out))
}

#[inline]
fn point_at<T: Real>(p: Pixel, z: T, k: &CameraIntrinsics<T>) -> [T; 3] {
    back_project_unchecked(T::lit(p.u as f64), T::lit(p.v as f64), z, k)
}

fn central<T: Real>(values: &mut [T], phi: Phi) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    match phi {
        Phi::Mean => {
            let n = T::lit(values.len() as f64);
            Some(values.iter().fold(T::zero(), |a, &b| a + b) / n)
        }
        Phi::Median => {
            values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let m = values.len() / 2;
            Some(if values.len() % 2 == 1 {
                values[m]
            } else {
                (values[m - 1] + values[m]) * T::lit(0.5)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::invert_depth;
    use crate::init::{init_bundle, CostKind};

    fn cam() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(120.0, 110.0, 7.5, 5.5).unwrap()
    }

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() <= tol)
    }

    #[test]
    fn orient_examples() {
        let z = [0.0, 0.0, 1.0];
        assert_eq!(orient_normalize([0.0, 0.0, 2.0], z).unwrap(), [0.0, 0.0, -1.0]);
        assert_eq!(orient_normalize([0.0, 0.0, -3.0], z).unwrap(), [0.0, 0.0, -1.0]);
        let s = orient_normalize([1.0, 1.0, 0.0], z).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(s, [h, h, 0.0], 1e-15));
        assert!(orient_normalize([0.0; 3], z).is_err());
    }

    #[test]
    fn median_and_mean() {
        assert_eq!(central(&mut [3.0, 1.0, 2.0], Phi::Median), Some(2.0));
        assert_eq!(central(&mut [4.0, 1.0, 2.0, 3.0], Phi::Median), Some(2.5));
        assert_eq!(central(&mut [4.0, 1.0, 1.0], Phi::Mean), Some(2.0));
        assert_eq!(central::<f64>(&mut [], Phi::Mean), None);
    }

    fn fronto(w: usize, h: usize) -> DepthGrid<f64> {
        DepthGrid::new(w, h, vec![2.0; w * h], DepthKind::Depth).unwrap()
    }

    #[test]
    fn fronto_plane_both_backends() {
        let k = cam();
        let z = fronto(16, 12);
        let b = init_bundle(&z, CostKind::Pd).unwrap();
        let n = normals_cp2tv(&z, &b.grad, &k).unwrap();
        assert_eq!(n.valid_count(), 16 * 12);
        assert!(n.normals().iter().all(|&v| close(v, [0.0, 0.0, -1.0], 1e-15)));

        let d = invert_depth(&z).unwrap();
        let bd = init_bundle(&d, CostKind::Pd).unwrap();
        for phi in [Phi::Median, Phi::Mean] {
            let n = normals_3f2n(&d, &bd.grad, &z, &k, phi).unwrap();
            assert!(n.normals().iter().all(|&v| close(v, [0.0, 0.0, -1.0], 1e-15)));
        }
    }

    fn tilted(w: usize, h: usize, k: &CameraIntrinsics<f64>, m: [f64; 3], c: f64) -> DepthGrid<f64> {
        DepthGrid::from_fn(w, h, DepthKind::Depth, |p| {
            let a = (p.u as f64 - k.cu) / k.fu;
            let b = (p.v as f64 - k.cv) / k.fv;
            c / (m[0] * a + m[1] * b + m[2])
        })
        .unwrap()
    }

    #[test]
    fn tilted_plane_inverse_depth_is_exact() {
        let k = cam();
        let m = {
            let v = [0.3, -0.2, -0.93];
            let l = norm3(v);
            v.map(|c| c / l)
        };
        let z = tilted(16, 12, &k, m, -2.0);
        let d = invert_depth(&z).unwrap();
        let bd = init_bundle(&d, CostKind::Pd).unwrap();
        for phi in [Phi::Median, Phi::Mean] {
            let n = normals_3f2n(&d, &bd.grad, &z, &k, phi).unwrap();
            assert_eq!(n.valid_count(), 16 * 12);
            for &v in n.normals() {
                assert!(close(v, m, 1e-9), "{v:?} vs {m:?}");
            }
        }
    }

    #[test]
    fn cp2tv_with_exact_gradients() {
        let k = cam();
        let m = {
            let v = [-0.4, 0.25, -0.88];
            let l = norm3(v);
            v.map(|c| c / l)
        };
        let c = -1.5;
        let z = tilted(10, 8, &k, m, c);
        // z = c / D, D = m0 a + m1 b + m2: dz/du = -c m0 / (fu D^2).
        let mut grad = init_bundle(&z, CostKind::Pd).unwrap().grad;
        for v in 0..8 {
            for u in 0..10 {
                let i = v * 10 + u;
                let a = (u as f64 - k.cu) / k.fu;
                let b = (v as f64 - k.cv) / k.fv;
                let den = m[0] * a + m[1] * b + m[2];
                grad.zu[i] = -c * m[0] / (k.fu * den * den);
                grad.zv[i] = -c * m[1] / (k.fv * den * den);
            }
        }
        let n = normals_cp2tv(&z, &grad, &k).unwrap();
        for &v in n.normals() {
            assert!(dot3(v, m).clamp(-1.0, 1.0).acos() < 1e-6);
        }
    }

    #[test]
    fn cp2tv_is_scale_invariant() {
        let k = cam();
        let z = DepthGrid::from_fn(9, 7, DepthKind::Depth, |p| {
            2.0 + 0.1 * (0.7 * p.u as f64).sin() + 0.05 * p.v as f64
        })
        .unwrap();
        let a = normals_cp2tv(&z, &init_bundle(&z, CostKind::Pd).unwrap().grad, &k).unwrap();
        let z3 = z.scaled(3.7).unwrap();
        let b = normals_cp2tv(&z3, &init_bundle(&z3, CostKind::Pd).unwrap().grad, &k).unwrap();
        for (x, y) in a.normals().iter().zip(b.normals()) {
            assert!(close(*x, *y, 1e-9));
        }
    }

    #[test]
    fn wrong_domain_is_rejected() {
        let k = cam();
        let z = fronto(4, 4);
        let d = invert_depth(&z).unwrap();
        let b = init_bundle(&d, CostKind::Pd).unwrap();
        assert!(normals_cp2tv(&d, &b.grad, &k).is_err());
        assert!(normals_3f2n(&z, &b.grad, &z, &k, Phi::Median).is_err());
    }
}
