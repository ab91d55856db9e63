//! Coarse gradient initialisation from the three fixed stencils
//! `FFD = [0,-1,1]`, `FBD = [-1,1,0]` and `FL = [-1,2,-1]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Axis, DepthGrid, Offset, Pixel};
use crate::scalar::Real;

/// Which discontinuity measure the transfer costs use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum CostKind {
    /// Magnitude of the second difference along the axis.
    #[default]
    Pd,
    /// Magnitude of the first difference along the axis.
    Tv,
}

/// Per-pixel gradients and cached second differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField<T> {
    pub width: usize,
    pub height: usize,
    pub zu: Vec<T>,
    pub zv: Vec<T>,
    pub zuu: Vec<T>,
    pub zvv: Vec<T>,
    pub mask: Vec<bool>,
}

impl<T: Real> GradientField<T> {
    #[inline]
    pub fn index(&self, p: Pixel) -> usize {
        p.v * self.width + p.u
    }

    #[inline]
    pub fn first(&self, axis: Axis) -> &[T] {
        match axis {
            Axis::U => &self.zu,
            Axis::V => &self.zv,
        }
    }

    #[inline]
    pub fn second(&self, axis: Axis) -> &[T] {
        match axis {
            Axis::U => &self.zuu,
            Axis::V => &self.zvv,
        }
    }

    /// `(zu, zv)` at `p` if valid.
    pub fn gradient(&self, p: Pixel) -> Option<(T, T)> {
        let i = self.index(p);
        self.mask[i].then(|| (self.zu[i], self.zv[i]))
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Second differences along both axes.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondDerivatives<T> {
    pub width: usize,
    pub height: usize,
    pub zuu: Vec<T>,
    pub zvv: Vec<T>,
    pub mask: Vec<bool>,
}

impl<T> SecondDerivatives<T> {
    fn along(&self, axis: Axis) -> &[T] {
        match axis {
            Axis::U => &self.zuu,
            Axis::V => &self.zvv,
        }
    }
}

/// Forward and backward first differences along both axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Differences<T> {
    pub fwd_u: Vec<T>,
    pub bwd_u: Vec<T>,
    pub fwd_v: Vec<T>,
    pub bwd_v: Vec<T>,
    pub mask: Vec<bool>,
}

/// Initial gradient, energies, states and per-pixel transfer costs.
#[derive(Clone, Debug, PartialEq)]
pub struct InitBundle<T> {
    pub grad: GradientField<T>,
    pub e_u: Vec<T>,
    pub e_v: Vec<T>,
    pub s_u: Vec<Offset>,
    pub s_v: Vec<Offset>,
    /// Cost of bringing each pixel into a path along u (`|zuu|` or TV).
    pub cost_u: Vec<T>,
    /// Same along v.
    pub cost_v: Vec<T>,
    pub cost_kind: CostKind,
}

/// A pixel takes part only if it and its in-bounds 4-neighbours are valid.
pub fn stencil_mask<T: Real>(g: &DepthGrid<T>) -> Vec<bool> {
    let (w, h) = (g.width(), g.height());
    (0..w * h)
        .map(|i| {
            let p = g.pixel(i);
            g.is_valid(p)
                && [(-1, 0), (1, 0), (0, -1), (0, 1)]
                    .iter()
                    .all(|&(du, dv)| p.offset(du, dv, w, h).is_none_or(|q| g.is_valid(q)))
        })
        .collect()
}

/// Sample at `p + t·axis`, replicating the edge sample outside the grid.
#[inline]
fn replicate<T: Real>(g: &DepthGrid<T>, p: Pixel, axis: Axis, t: i64) -> T {
    let (du, dv) = axis.step(t);
    match p.offset(du, dv, g.width(), g.height()) {
        Some(q) => g.value(q),
        None => g.value(p),
    }
}

/// `FL` response along both axes with replicate padding.
pub fn second_derivatives<T: Real>(g: &DepthGrid<T>) -> SecondDerivatives<T> {
    let mask = stencil_mask(g);
    let two = T::lit(2.0);
    let fl = |axis: Axis| -> Vec<T> {
        (0..g.len())
            .into_par_iter()
            .map(|i| {
                if !mask[i] {
                    return T::zero();
                }
                let p = g.pixel(i);
                two * g.value(p) - replicate(g, p, axis, -1) - replicate(g, p, axis, 1)
            })
            .collect()
    };
    SecondDerivatives {
        width: g.width(),
        height: g.height(),
        zuu: fl(Axis::U),
        zvv: fl(Axis::V),
        mask,
    }
}

/// `FFD` and `FBD` responses. On the border the missing difference takes the
/// value of the available one, so both agree there.
pub fn finite_differences<T: Real>(g: &DepthGrid<T>) -> Differences<T> {
    let mask = stencil_mask(g);
    let (w, h) = (g.width(), g.height());
    let pair = |axis: Axis| -> (Vec<T>, Vec<T>) {
        (0..g.len())
            .into_par_iter()
            .map(|i| {
                if !mask[i] {
                    return (T::zero(), T::zero());
                }
                let p = g.pixel(i);
                let z = g.value(p);
                let (fu, fv) = axis.step(1);
                let fwd = p.offset(fu, fv, w, h).map(|q| g.value(q) - z);
                let bwd = p.offset(-fu, -fv, w, h).map(|q| z - g.value(q));
                match (fwd, bwd) {
                    (Some(f), Some(b)) => (f, b),
                    (Some(f), None) => (f, f),
                    (None, Some(b)) => (b, b),
                    (None, None) => (T::zero(), T::zero()),
                }
            })
            .unzip()
    };
    let (fwd_u, bwd_u) = pair(Axis::U);
    let (fwd_v, bwd_v) = pair(Axis::V);
    Differences {
        fwd_u,
        bwd_u,
        fwd_v,
        bwd_v,
        mask,
    }
}

/// Offset in `{-1, 0, 1}` toward the smoothest of the three collinear
/// samples along each axis. Ties prefer `0`, then `-1`, then `+1`; candidates
/// outside the grid or masked are skipped.
pub fn select_eta<T: Real>(sd: &SecondDerivatives<T>, p: Pixel) -> Result<(i8, i8)> {
    if p.u >= sd.width || p.v >= sd.height {
        return Err(Error::OutOfBounds {
            u: p.u as i64,
            v: p.v as i64,
            width: sd.width,
            height: sd.height,
        });
    }
    Ok((eta_along(sd, p, Axis::U).0, eta_along(sd, p, Axis::V).0))
}

/// `(eta, min |second difference|)` along one axis. `(0, 0)` when no
/// candidate is usable.
fn eta_along<T: Real>(sd: &SecondDerivatives<T>, p: Pixel, axis: Axis) -> (i8, T) {
    let field = sd.along(axis);
    let mut best: Option<(i8, T)> = None;
    for t in [0i8, -1, 1] {
        let (du, dv) = axis.step(t as i64);
        let Some(q) = p.offset(du, dv, sd.width, sd.height) else {
            continue;
        };
        let j = q.v * sd.width + q.u;
        if !sd.mask[j] {
            continue;
        }
        let a = field[j].abs();
        if best.is_none_or(|(_, b)| a < b) {
            best = Some((t, a));
        }
    }
    best.unwrap_or((0, T::zero()))
}

/// Coarse gradient, initial energies and states.
pub fn init_bundle<T: Real>(g: &DepthGrid<T>, cost_kind: CostKind) -> Result<InitBundle<T>> {
    let sd = second_derivatives(g);
    if !sd.mask.iter().any(|&m| m) {
        return Err(Error::Empty("no pixel has a complete stencil"));
    }
    let fd = finite_differences(g);
    let (w, h) = (g.width(), g.height());
    let half = T::lit(0.5);

    let cost = |axis: Axis| -> Vec<T> {
        match cost_kind {
            CostKind::Pd => sd.along(axis).iter().map(|x| x.abs()).collect(),
            CostKind::Tv => {
                let (f, b) = match axis {
                    Axis::U => (&fd.fwd_u, &fd.bwd_u),
                    Axis::V => (&fd.fwd_v, &fd.bwd_v),
                };
                f.iter()
                    .zip(b)
                    .map(|(&f, &b)| half * (f.abs() + b.abs()))
                    .collect()
            }
        }
    };
    let cost_u = cost(Axis::U);
    let cost_v = cost(Axis::V);

    let per_axis = |axis: Axis, costs: &[T]| -> (Vec<T>, Vec<T>, Vec<Offset>) {
        let (fwd, bwd) = match axis {
            Axis::U => (&fd.fwd_u, &fd.bwd_u),
            Axis::V => (&fd.fwd_v, &fd.bwd_v),
        };
        let rows: Vec<(T, T, Offset)> = (0..w * h)
            .into_par_iter()
            .map(|i| {
                if !sd.mask[i] {
                    return (T::zero(), T::zero(), Offset::ZERO);
                }
                let p = Pixel::new(i % w, i / w);
                let (eta, _) = eta_along(&sd, p, axis);
                let e = eta_t(eta);
                let grad = half * (T::one() + e) * fwd[i] + half * (T::one() - e) * bwd[i];
                let energy = min_cost(&sd.mask, costs, p, axis, w, h);
                (grad, energy, Offset::along(axis, eta))
            })
            .collect();
        let mut gs = Vec::with_capacity(rows.len());
        let mut es = Vec::with_capacity(rows.len());
        let mut ss = Vec::with_capacity(rows.len());
        for (g, e, s) in rows {
            gs.push(g);
            es.push(e);
            ss.push(s);
        }
        (gs, es, ss)
    };
    let (zu, e_u, s_u) = per_axis(Axis::U, &cost_u);
    let (zv, e_v, s_v) = per_axis(Axis::V, &cost_v);

    Ok(InitBundle {
        grad: GradientField {
            width: w,
            height: h,
            zu,
            zv,
            zuu: sd.zuu,
            zvv: sd.zvv,
            mask: sd.mask,
        },
        e_u,
        e_v,
        s_u,
        s_v,
        cost_u,
        cost_v,
        cost_kind,
    })
}

#[inline]
fn eta_t<T: Real>(eta: i8) -> T {
    match eta {
        -1 => -T::one(),
        1 => T::one(),
        _ => T::zero(),
    }
}

fn min_cost<T: Real>(mask: &[bool], costs: &[T], p: Pixel, axis: Axis, w: usize, h: usize) -> T {
    let mut best: Option<T> = None;
    for t in [0i64, -1, 1] {
        let (du, dv) = axis.step(t);
        if let Some(q) = p.offset(du, dv, w, h) {
            let j = q.v * w + q.u;
            if mask[j] {
                best = Some(best.map_or(costs[j], |b| b.min(costs[j])));
            }
        }
    }
    best.unwrap_or(T::zero())
}
