//! Accuracy metrics, path discontinuity norms, error-bound checks and noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{Axis, DepthGrid, NormalMap, Pixel};
use crate::init::SecondDerivatives;
use crate::scalar::{pairwise_sum, Real};
use crate::synth::AnalyticDepth;

/// Tolerances, in degrees, reported as PGP columns.
pub const PGP_TOLERANCES: [f64; 3] = [10.0, 20.0, 30.0];

/// Accuracy of one normal map against ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub aae_degrees: f64,
    /// Fraction of pixels within 10, 20 and 30 degrees.
    pub pgp: [f64; 3],
    pub pixel_count: usize,
    /// Angular error per pixel in degrees; `None` outside the evaluated set.
    pub errors: Option<Vec<Option<f64>>>,
}

impl MetricReport {
    /// Flat `key=value` lines with the given key prefix.
    pub fn to_kv(&self, prefix: &str) -> String {
        format!(
            "{prefix}aae={:.6}\n{prefix}pgp10={:.6}\n{prefix}pgp20={:.6}\n{prefix}pgp30={:.6}\n{prefix}pixels={}\n",
            self.aae_degrees, self.pgp[0], self.pgp[1], self.pgp[2], self.pixel_count
        )
    }
}

fn same_shape<T>(a: &NormalMap<T>, b: &NormalMap<T>) -> Result<()>
where
    T: Real,
{
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "normal maps are {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Angle in degrees between two nonzero vectors, cosine clamped to `[-1, 1]`.
pub fn angle_degrees<T: Real>(a: [T; 3], b: [T; 3]) -> f64 {
    let a = a.map(|x| x.as_f64());
    let b = b.map(|x| x.as_f64());
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Per-pixel angular errors over the joint valid mask, restricted to
/// `region` when given.
pub fn angular_errors<T: Real>(
    gt: &NormalMap<T>,
    est: &NormalMap<T>,
    region: Option<&[bool]>,
) -> Result<Vec<Option<f64>>> {
    same_shape(gt, est)?;
    if let Some(r) = region {
        if r.len() != gt.mask().len() {
            return Err(Error::DimensionMismatch("region mask size".into()));
        }
    }
    Ok((0..gt.mask().len())
        .map(|i| {
            let inside = region.is_none_or(|r| r[i]);
            (inside && gt.mask()[i] && est.mask()[i])
                .then(|| angle_degrees(gt.normals()[i], est.normals()[i]))
        })
        .collect())
}

/// AAE, PGP and pixel count over the joint valid mask (and `region`).
pub fn evaluate<T: Real>(
    gt: &NormalMap<T>,
    est: &NormalMap<T>,
    region: Option<&[bool]>,
) -> Result<MetricReport> {
    let errors = angular_errors(gt, est, region)?;
    let values: Vec<f64> = errors.iter().flatten().copied().collect();
    if values.is_empty() {
        return Err(Error::Empty("no jointly valid pixels to evaluate"));
    }
    let n = values.len() as f64;
    let pgp = PGP_TOLERANCES.map(|t| values.iter().filter(|&&e| e <= t).count() as f64 / n);
    Ok(MetricReport {
        aae_degrees: pairwise_sum(&values) / n,
        pgp,
        pixel_count: values.len(),
        errors: Some(errors),
    })
}

/// Average angular error in degrees.
pub fn aae<T: Real>(gt: &NormalMap<T>, est: &NormalMap<T>) -> Result<f64> {
    Ok(evaluate(gt, est, None)?.aae_degrees)
}

/// Fraction of jointly valid pixels with angular error `<= tolerance_deg`.
pub fn pgp<T: Real>(gt: &NormalMap<T>, est: &NormalMap<T>, tolerance_deg: f64) -> Result<f64> {
    let errors = angular_errors(gt, est, None)?;
    let values: Vec<f64> = errors.into_iter().flatten().collect();
    if values.is_empty() {
        return Err(Error::Empty("no jointly valid pixels to evaluate"));
    }
    Ok(values.iter().filter(|&&e| e <= tolerance_deg).count() as f64 / values.len() as f64)
}

/// `e1 / e2`; above 1 means the second method is more accurate. Infinite when
/// only `e2` is zero and 1 when both are.
pub fn car(e1: f64, e2: f64) -> f64 {
    if e2 == 0.0 {
        if e1 == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        e1 / e2
    }
}

/// Pixel path made of axis-aligned unit steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSpec {
    pixels: Vec<Pixel>,
}

impl PathSpec {
    pub fn new(pixels: Vec<Pixel>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::Empty("path"));
        }
        for w in pixels.windows(2) {
            let du = w[0].u.abs_diff(w[1].u);
            let dv = w[0].v.abs_diff(w[1].v);
            if du + dv != 1 {
                return Err(Error::InvalidArgument(format!(
                    "path step ({}, {}) -> ({}, {}) is not a unit axis move",
                    w[0].u, w[0].v, w[1].u, w[1].v
                )));
            }
        }
        Ok(Self { pixels })
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    /// This path followed by `other`, which must start where this one ends.
    pub fn concat(&self, other: &PathSpec) -> Result<Self> {
        if self.pixels.last() != other.pixels.first() {
            return Err(Error::InvalidArgument("paths do not join".into()));
        }
        let mut pixels = self.pixels.clone();
        pixels.extend_from_slice(&other.pixels[1..]);
        Self::new(pixels)
    }
}

/// Discrete path discontinuity norm: per step, `|zuu|` for a u-move or
/// `|zvv|` for a v-move, sampled at the step's destination.
pub fn pd_norm<T: Real>(path: &PathSpec, sd: &SecondDerivatives<T>) -> Result<T> {
    let mut terms = Vec::with_capacity(path.pixels.len());
    for (k, w) in path.pixels.windows(2).enumerate() {
        let to = w[1];
        for p in [w[0], to] {
            if p.u >= sd.width || p.v >= sd.height {
                return Err(Error::OutOfBounds {
                    u: p.u as i64,
                    v: p.v as i64,
                    width: sd.width,
                    height: sd.height,
                });
            }
        }
        let i = to.v * sd.width + to.u;
        let field = if w[0].v == to.v { &sd.zuu } else { &sd.zvv };
        debug_assert!(k < path.pixels.len());
        terms.push(field[i].abs());
    }
    Ok(pairwise_sum(&terms))
}

/// Outcome of an error-bound check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub error: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Subintervals for the composite Simpson rule.
pub const QUADRATURE_SUBINTERVALS: usize = 100;

/// Composite Simpson rule of `f` on `[0, 1]`.
pub fn simpson(mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let n = QUADRATURE_SUBINTERVALS;
    let h = 1.0 / n as f64;
    let mut acc = f(0.0)? + f(1.0)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h)?;
    }
    Ok(acc * h / 3.0)
}

const BOUND_SLACK: f64 = 1e-9;

fn second_along(s: &dyn AnalyticDepth, u: f64, v: f64, axis: Axis) -> Result<f64> {
    let (zuu, zvv) = s.second(u, v)?;
    Ok(match axis {
        Axis::U => zuu,
        Axis::V => zvv,
    })
}

/// Remainder `∫ (end - x) z_aa dx` of a first-order Taylor step and the
/// continuum PD norm `∫ |z_aa| dx` along a unit leg from `(u, v)` in
/// direction `dir` along `axis`, both by quadrature.
fn leg(s: &dyn AnalyticDepth, u: f64, v: f64, axis: Axis, dir: f64) -> Result<(f64, f64)> {
    let at = |t: f64| match axis {
        Axis::U => (u + dir * t, v),
        Axis::V => (u, v + dir * t),
    };
    let rem = simpson(|t| {
        let (x, y) = at(t);
        Ok((1.0 - t) * second_along(s, x, y, axis)?)
    })?;
    let pd = simpson(|t| {
        let (x, y) = at(t);
        Ok(second_along(s, x, y, axis)?.abs())
    })?;
    Ok((rem, pd))
}

/// Error of predicting `z(p + dir·e_axis)` from `z(p)` and the gradient at
/// `p`, against the PD norm of the unit step.
pub fn check_collinear_bound(
    s: &dyn AnalyticDepth,
    p: (f64, f64),
    axis: Axis,
    dir: i8,
) -> Result<BoundCheck> {
    let (rem, pd) = leg(s, p.0, p.1, axis, dir as f64)?;
    let error = rem.abs();
    Ok(BoundCheck {
        error,
        bound: pd,
        holds: error <= pd + BOUND_SLACK,
    })
}

/// Closed-form counterpart of [`check_collinear_bound`]'s error term.
pub fn collinear_error_exact(s: &dyn AnalyticDepth, p: (f64, f64), axis: Axis, dir: i8) -> Result<f64> {
    let d = dir as f64;
    let (zu, zv) = s.gradient(p.0, p.1)?;
    let (q, slope) = match axis {
        Axis::U => ((p.0 + d, p.1), zu),
        Axis::V => ((p.0, p.1 + d), zv),
    };
    Ok((s.depth(q.0, q.1)? - s.depth(p.0, p.1)? - d * slope).abs())
}

/// Disagreement between the two first-order loop predictions from `p` to
/// the diagonal pixel `p + (a, b)`, against the PD norm of the loop.
pub fn check_noncollinear_bound(
    s: &dyn AnalyticDepth,
    p: (f64, f64),
    diagonal: (i8, i8),
) -> Result<BoundCheck> {
    let (a, b) = (diagonal.0 as f64, diagonal.1 as f64);
    let (u0, v0) = p;
    let (u1, v1) = (u0 + a, v0 + b);
    let (zu0, zv0) = s.gradient(u0, v0)?;
    let (zu1, zv1) = s.gradient(u1, v1)?;
    let error = (a * (zu0 - zu1) + b * (zv1 - zv0)).abs();
    // L1: along u then v. L2: along v then u.
    let (_, pd_1u) = leg(s, u0, v0, Axis::U, a)?;
    let (_, pd_1v) = leg(s, u1, v0, Axis::V, b)?;
    let (_, pd_2v) = leg(s, u0, v0, Axis::V, b)?;
    let (_, pd_2u) = leg(s, u0, v1, Axis::U, a)?;
    let bound = pd_1u + pd_1v + pd_2v + pd_2u;
    Ok(BoundCheck {
        error,
        bound,
        holds: error <= bound + BOUND_SLACK,
    })
}

/// The same loop disagreement assembled from the four leg remainders.
pub fn noncollinear_error_quadrature(
    s: &dyn AnalyticDepth,
    p: (f64, f64),
    diagonal: (i8, i8),
) -> Result<f64> {
    let (a, b) = (diagonal.0 as f64, diagonal.1 as f64);
    let (u0, v0) = p;
    let (u1, v1) = (u0 + a, v0 + b);
    // Each leg integral of the gradient equals the start-point prediction
    // plus its remainder; predictions from the end point flip the weight.
    let (r1u, _) = leg(s, u0, v0, Axis::U, a)?;
    let (r2v, _) = leg(s, u0, v0, Axis::V, b)?;
    let (r1v_back, _) = leg(s, u1, v1, Axis::V, -b)?;
    let (r2u_back, _) = leg(s, u1, v1, Axis::U, -a)?;
    // Loop 1 predicts a·zu(p) + b·zv(p'), loop 2 b·zv(p) + a·zu(p').
    Ok((r1u - r1v_back - r2v + r2u_back).abs())
}

/// Adds zero-mean Gaussian noise of variance `sigma` to every valid sample.
/// Samples that become non-positive are masked.
pub fn add_gaussian_noise<T: Real>(g: &DepthGrid<T>, sigma: f64, seed: u64) -> Result<DepthGrid<T>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(g.clone());
    }
    let normal = Normal::new(0.0, sigma.sqrt())
        .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = g.values().to_vec();
    let mut mask = g.mask().to_vec();
    for (x, m) in values.iter_mut().zip(mask.iter_mut()) {
        if !*m {
            continue;
        }
        let noisy = x.as_f64() + normal.sample(&mut rng);
        *x = T::lit(noisy);
        if !(noisy > 0.0 && x.is_finite() && *x > T::zero()) {
            *m = false;
        }
    }
    DepthGrid::from_parts(g.width(), g.height(), values, mask, g.kind())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DepthKind;
    use crate::init::second_derivatives;
    use crate::synth::{Quadratic, RandomSmoothSurface};

    fn map(normals: Vec<[f64; 3]>) -> NormalMap<f64> {
        let n = normals.len();
        NormalMap::from_parts(n, 1, normals, vec![true; n]).unwrap()
    }

    fn tilt(deg: f64) -> [f64; 3] {
        let r = deg.to_radians();
        [r.sin(), 0.0, -r.cos()]
    }

    #[test]
    fn aae_examples() {
        let gt = map(vec![[0.0, 0.0, -1.0]; 4]);
        assert_eq!(aae(&gt, &gt).unwrap(), 0.0);
        let rot = map(vec![tilt(10.0); 4]);
        assert!((aae(&gt, &rot).unwrap() - 10.0).abs() < 1e-6);
        let half = map(vec![tilt(0.0), tilt(20.0), tilt(0.0), tilt(20.0)]);
        assert!((aae(&gt, &half).unwrap() - 10.0).abs() < 1e-6);
    }

    #[test]
    fn pgp_examples() {
        let gt = map(vec![[0.0, 0.0, -1.0]; 4]);
        assert_eq!(pgp(&gt, &gt, 1.0).unwrap(), 1.0);
        // Exactly 10 degrees: arccos(cos 10deg) must round-trip to 10.
        let ten = map(vec![tilt(10.0); 4]);
        let e = angle_degrees(gt.normals()[0], ten.normals()[0]);
        assert_eq!(pgp(&gt, &ten, e).unwrap(), 1.0);
        let mixed = map(vec![tilt(5.0), tilt(25.0), tilt(5.0), tilt(25.0)]);
        assert_eq!(pgp(&gt, &mixed, 10.0).unwrap(), 0.5);
    }

    #[test]
    fn car_examples() {
        assert_eq!(car(3.0, 3.0), 1.0);
        assert!((car(15.31, 8.10) - 1.890).abs() < 1e-3);
        assert!((car(1.66, 0.68) - 2.441).abs() < 1e-3);
        assert_eq!(car(0.0, 0.0), 1.0);
        assert!(car(1.0, 0.0).is_infinite());
    }

    #[test]
    fn empty_evaluation_is_an_error() {
        let gt = NormalMap::<f64>::invalid(3, 1);
        assert!(matches!(aae(&gt, &gt), Err(Error::Empty(_))));
    }

    #[test]
    fn pd_norm_examples() {
        let row = |f: fn(f64) -> f64| {
            DepthGrid::from_fn(6, 3, DepthKind::Depth, |p| f(p.u as f64)).unwrap()
        };
        let ramp = second_derivatives(&row(|u| 1.0 + u));
        let path = PathSpec::new(vec![
            Pixel::new(1, 1),
            Pixel::new(2, 1),
            Pixel::new(2, 2),
            Pixel::new(3, 2),
        ])
        .unwrap();
        assert_eq!(pd_norm(&path, &ramp).unwrap(), 0.0);

        let sq = second_derivatives(&row(|u| 1.0 + u * u));
        let one = PathSpec::new(vec![Pixel::new(1, 1), Pixel::new(2, 1)]).unwrap();
        assert_eq!(pd_norm(&one, &sq).unwrap(), 2.0);
        let back = PathSpec::new(vec![Pixel::new(2, 1), Pixel::new(1, 1)]).unwrap();
        let loop_ = one.concat(&back).unwrap();
        assert_eq!(pd_norm(&loop_, &sq).unwrap(), 2.0 * pd_norm(&one, &sq).unwrap());
    }

    #[test]
    fn path_validation() {
        assert!(PathSpec::new(vec![Pixel::new(0, 0), Pixel::new(1, 1)]).is_err());
        assert!(PathSpec::new(vec![Pixel::new(0, 0), Pixel::new(0, 0)]).is_err());
        let sd = second_derivatives(
            &DepthGrid::new(2, 2, vec![1.0; 4], DepthKind::Depth).unwrap(),
        );
        let out = PathSpec::new(vec![Pixel::new(1, 1), Pixel::new(2, 1)]).unwrap();
        assert!(pd_norm(&out, &sd).is_err());
    }

    #[test]
    fn collinear_bound_closed_forms() {
        let affine = Quadratic {
            z0: 2.0,
            lin: (0.3, -0.1),
            a: 0.0,
            b: 0.0,
        };
        let c = check_collinear_bound(&affine, (3.0, 4.0), Axis::U, 1).unwrap();
        assert!(c.error.abs() < 1e-15 && c.bound.abs() < 1e-15 && c.holds);

        let quad = Quadratic {
            z0: 2.0,
            lin: (0.0, 0.0),
            a: 0.35,
            b: 0.0,
        };
        let c = check_collinear_bound(&quad, (3.0, 4.0), Axis::U, -1).unwrap();
        // z_uu = 0.7: remainder 0.35, PD norm 0.7.
        assert!((c.error - 0.35).abs() < 1e-12);
        assert!((c.bound - 0.7).abs() < 1e-12);
        assert!(c.holds);
    }

    #[test]
    fn noncollinear_bound_closed_forms() {
        let affine = Quadratic {
            z0: 2.0,
            lin: (0.3, -0.1),
            a: 0.0,
            b: 0.0,
        };
        let c = check_noncollinear_bound(&affine, (1.0, 1.0), (1, -1)).unwrap();
        assert!(c.error.abs() < 1e-15 && c.holds);

        let quad = Quadratic {
            z0: 2.0,
            lin: (0.1, 0.2),
            a: 0.25,
            b: -0.4,
        };
        let c = check_noncollinear_bound(&quad, (1.0, 1.0), (1, 1)).unwrap();
        // zu = 0.1 + 0.5u, zv = 0.2 - 0.8v: |-(0.5) + (-0.8)| = 1.3; PD = 2(0.5 + 0.8).
        assert!((c.error - 1.3).abs() < 1e-12);
        assert!((c.bound - 2.6).abs() < 1e-12);
        assert!(c.holds);
    }

    #[test]
    fn quadrature_matches_closed_form_errors() {
        for seed in 0..20 {
            let s = RandomSmoothSurface::sample(seed);
            let p = (seed as f64 * 0.37, 1.0 - seed as f64 * 0.21);
            for (axis, dir) in [(Axis::U, 1), (Axis::U, -1), (Axis::V, 1), (Axis::V, -1)] {
                let q = check_collinear_bound(&s, p, axis, dir).unwrap().error;
                let e = collinear_error_exact(&s, p, axis, dir).unwrap();
                assert!((q - e).abs() < 1e-9, "seed {seed}: {q} vs {e}");
            }
            for d in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let c = check_noncollinear_bound(&s, p, d).unwrap().error;
                let q = noncollinear_error_quadrature(&s, p, d).unwrap();
                assert!((q - c).abs() < 1e-9, "seed {seed}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn noise_examples() {
        let g = DepthGrid::new(4, 4, vec![2.0; 16], DepthKind::Depth).unwrap();
        assert_eq!(add_gaussian_noise(&g, 0.0, 7).unwrap(), g);
        let a = add_gaussian_noise(&g, 1e-2, 7).unwrap();
        let b = add_gaussian_noise(&g, 1e-2, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, add_gaussian_noise(&g, 1e-2, 8).unwrap());
        assert!(add_gaussian_noise(&g, -1.0, 7).is_err());
    }

    #[test]
    fn noise_masks_non_positive() {
        let g = DepthGrid::new(64, 64, vec![0.01; 4096], DepthKind::Depth).unwrap();
        let n = add_gaussian_noise(&g, 1.0, 3).unwrap();
        assert!(n.valid_count() < 4096 && n.valid_count() > 0);
        assert!(n.values().iter().zip(n.mask()).all(|(&x, &m)| !m || x > 0.0));
    }
}
