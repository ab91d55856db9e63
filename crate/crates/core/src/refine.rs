//! Gradient updates: collinear refinement by recursive polynomial
//! interpolation and non-collinear replacement through closed loops.
//!
//! The collinear recurrence carries, per pixel and axis, the highest-order
//! one-sided difference consumed so far. With unit sample spacing the
//! derivative at `x_i` of the polynomial through `x_i, x_i+1, .., x_i+k+1` is
//! `sum_{m=1}^{k+1} (-1)^(m-1) Δ^m z_i / m`, and the backward run mirrors it
//! with `∇^m z_i / m`. Each refinement adds one term and needs only the
//! neighbour's difference of the same order, so a step is `O(1)`.

use num_traits::{FromPrimitive, Num};

use crate::error::{Error, Result};
use crate::grid::{Axis, Offset, Pixel};
use crate::scalar::Real;

/// Order and direction of a collinear run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RpiState {
    /// Completed refinements; the implicit polynomial has degree `order`.
    pub order: u32,
    /// `+1` extends toward larger coordinates, `-1` toward smaller ones.
    pub direction: i8,
}

/// Result of one collinear refinement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RpiStep<T> {
    pub gradient: T,
    /// One-sided difference of order `k + 1` at the pixel.
    pub diff: T,
}

/// One collinear refinement at order `k >= 1`.
///
/// `diff_p` and `diff_n` are the order-`k` one-sided differences (in
/// direction `dir`) at the pixel and at its neighbour `p + dir`; `g_p` is the
/// current derivative estimate built from `k + 1` samples.
#[inline]
pub fn rpi_step<T>(g_p: T, diff_p: T, diff_n: T, k: u32, dir: i8) -> RpiStep<T>
where
    T: Num + Copy + FromPrimitive,
{
    let denom = T::from_u32(k + 1).expect("order fits the scalar type");
    if dir >= 0 {
        let diff = diff_n - diff_p;
        let term = diff / denom;
        let gradient = if k % 2 == 0 { g_p + term } else { g_p - term };
        RpiStep { gradient, diff }
    } else {
        let diff = diff_p - diff_n;
        RpiStep {
            gradient: g_p + diff / denom,
            diff,
        }
    }
}

/// Derivative at `z[0]` of the polynomial through all of `z`, sampled at unit
/// spacing starting from the pixel and moving in direction `dir`, built by
/// chaining [`rpi_step`] from the two-sample difference. `O(n^2)` because the
/// neighbour differences are rebuilt at every order.
pub fn rpi_chain<T>(z: &[T], dir: i8) -> Result<T>
where
    T: Num + Copy + FromPrimitive,
{
    if z.len() < 2 {
        return Err(Error::InvalidArgument(
            "a collinear run needs at least two samples".into(),
        ));
    }
    // diffs[i] is the order-k difference at run position i, oriented along `dir`.
    let mut diffs: Vec<T> = z
        .windows(2)
        .map(|w| if dir >= 0 { w[1] - w[0] } else { w[0] - w[1] })
        .collect();
    let mut g = diffs[0];
    for k in 1..z.len() as u32 - 1 {
        let next: Vec<T> = diffs.windows(2).map(|w| w[1] - w[0]).collect();
        let step = rpi_step(g, diffs[0], diffs[1], k, dir);
        g = step.gradient;
        // Run positions only move away from the pixel, so backward differences
        // are negated forward differences along the run.
        diffs = if dir >= 0 {
            next
        } else {
            next.into_iter().map(|d| T::zero() - d).collect()
        };
    }
    Ok(g)
}

/// Derivative at `u0` of the interpolating polynomial through `samples`,
/// by Newton divided differences. `O(n^2)`.
pub fn newton_derivative_oracle<T>(samples: &[(T, T)], u0: T) -> Result<T>
where
    T: Num + Copy + PartialEq,
{
    if samples.is_empty() {
        return Err(Error::Empty("no interpolation samples"));
    }
    let n = samples.len();
    for i in 0..n {
        for j in i + 1..n {
            if samples[i].0 == samples[j].0 {
                return Err(Error::Degenerate(format!(
                    "duplicate abscissa at sample indices {i} and {j}"
                )));
            }
        }
    }
    let xs: Vec<T> = samples.iter().map(|s| s.0).collect();
    let mut coef: Vec<T> = samples.iter().map(|s| s.1).collect();
    for level in 1..n {
        for i in (level..n).rev() {
            coef[i] = (coef[i] - coef[i - 1]) / (xs[i] - xs[i - level]);
        }
    }
    let mut value = coef[n - 1];
    let mut slope = T::zero();
    for j in (0..n - 1).rev() {
        let t = u0 - xs[j];
        slope = slope * t + value;
        value = value * t + coef[j];
    }
    Ok(slope)
}

/// Read-only view of the previous sweep for one axis.
#[derive(Clone, Copy, Debug)]
pub struct AxisBuffers<'a, T> {
    pub width: usize,
    pub height: usize,
    /// Gradient component along the axis being updated.
    pub g_p: &'a [T],
    /// Gradient component along the other axis.
    pub g_o: &'a [T],
    /// Highest-order one-sided difference along the axis.
    pub diff: &'a [T],
    /// Collinear order counters along the axis.
    pub order: &'a [u32],
    pub valid: &'a [bool],
}

/// New gradient, difference and counter for one pixel and axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientUpdate<T> {
    pub gradient: T,
    pub diff: T,
    pub order: u32,
}

impl<T: Real> AxisBuffers<'_, T> {
    fn at(&self, p: Pixel, off: Offset) -> Result<usize> {
        let q = off.apply(p, self.width, self.height).ok_or(Error::OutOfBounds {
            u: p.u as i64 + off.du as i64,
            v: p.v as i64 + off.dv as i64,
            width: self.width,
            height: self.height,
        })?;
        let i = q.v * self.width + q.u;
        if !self.valid[i] {
            return Err(Error::InvalidArgument(format!(
                "state at ({}, {}) points to masked pixel ({}, {})",
                p.u, p.v, q.u, q.v
            )));
        }
        Ok(i)
    }
}

/// Applies the state selected for `p` along `axis`. Keeping leaves the
/// gradient as is, a parallel state refines it collinearly, an orthogonal
/// state copies the neighbour's component and a diagonal state closes the
/// loop through the orthogonal neighbour. Non-collinear updates restart the
/// counter at 1.
pub fn update_gradients<T: Real>(
    buf: &AxisBuffers<'_, T>,
    p: Pixel,
    axis: Axis,
    state: Offset,
) -> Result<GradientUpdate<T>> {
    let i = buf.at(p, Offset::ZERO)?;
    let along = state.on(axis);
    let across = state.on(axis.other());
    match (along, across) {
        (0, 0) => Ok(GradientUpdate {
            gradient: buf.g_p[i],
            diff: buf.diff[i],
            order: buf.order[i],
        }),
        (a, 0) => {
            let n = buf.at(p, state)?;
            let k = buf.order[i];
            let step = rpi_step(buf.g_p[i], buf.diff[i], buf.diff[n], k, a);
            Ok(GradientUpdate {
                gradient: step.gradient,
                diff: step.diff,
                order: k + 1,
            })
        }
        (0, b) => {
            let o = buf.at(p, Offset::along(axis.other(), b))?;
            Ok(restart(buf.g_p[o]))
        }
        (a, b) => {
            let o = buf.at(p, Offset::along(axis.other(), b))?;
            let d = buf.at(p, state)?;
            let sign = T::lit((a * b) as f64);
            Ok(restart(buf.g_p[o] + sign * (buf.g_o[i] - buf.g_o[d])))
        }
    }
}

fn restart<T: Copy>(gradient: T) -> GradientUpdate<T> {
    GradientUpdate {
        gradient,
        diff: gradient,
        order: 1,
    }
}
