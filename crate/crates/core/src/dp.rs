//! Multi-directional dynamic programming over the path smoothness energy.
//!
//! Each sweep reads only the previous sweep's buffers and writes fresh ones,
//! so the result does not depend on scheduling. Per pixel and axis, the
//! candidate set is enumerated in a fixed order and the first strict minimum
//! wins.

use arrayvec::ArrayVec;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Axis, DepthGrid, Offset, Pixel};
use crate::init::{init_bundle, CostKind, GradientField, InitBundle};
use crate::refine::{update_gradients, AxisBuffers};
use crate::scalar::Real;

/// Energies, states, collinear counters and run differences for both axes.
#[derive(Clone, Debug, PartialEq)]
pub struct DpFields<T> {
    pub width: usize,
    pub height: usize,
    pub e_u: Vec<T>,
    pub e_v: Vec<T>,
    pub s_u: Vec<Offset>,
    pub s_v: Vec<Offset>,
    pub n_u: Vec<u32>,
    pub n_v: Vec<u32>,
    /// Highest-order one-sided difference of the current collinear run.
    pub d_u: Vec<T>,
    pub d_v: Vec<T>,
}

impl<T: Real> DpFields<T> {
    pub fn energy(&self, axis: Axis) -> &[T] {
        match axis {
            Axis::U => &self.e_u,
            Axis::V => &self.e_v,
        }
    }

    pub fn states(&self, axis: Axis) -> &[Offset] {
        match axis {
            Axis::U => &self.s_u,
            Axis::V => &self.s_v,
        }
    }

    pub fn counters(&self, axis: Axis) -> &[u32] {
        match axis {
            Axis::U => &self.n_u,
            Axis::V => &self.n_v,
        }
    }

    pub fn diffs(&self, axis: Axis) -> &[T] {
        match axis {
            Axis::U => &self.d_u,
            Axis::V => &self.d_v,
        }
    }

    /// True when every state on both axes is `(0, 0)`.
    pub fn settled(&self) -> bool {
        self.s_u.iter().chain(&self.s_v).all(|s| s.is_zero())
    }

    fn from_bundle(b: &InitBundle<T>) -> Self {
        DpFields {
            width: b.grad.width,
            height: b.grad.height,
            e_u: b.e_u.clone(),
            e_v: b.e_v.clone(),
            s_u: b.s_u.clone(),
            s_v: b.s_v.clone(),
            n_u: vec![1; b.e_u.len()],
            n_v: vec![1; b.e_v.len()],
            d_u: b.grad.zu.clone(),
            d_v: b.grad.zv.clone(),
        }
    }
}

/// Ordering used when candidate energies tie.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TieBreak {
    /// keep, parallel, orthogonal, diagonal; negative offsets first.
    #[default]
    KeepFirst,
    /// Parallel ahead of keep, admissible only while the pixel and the
    /// neighbour both continue a run in that direction at equal order.
    ExtendFirst,
}

/// When to stop sweeping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Convergence {
    /// Stop once every state is zero, or at the cap.
    #[default]
    AllStatesZero,
    /// Always run exactly `max_iterations` sweeps.
    Cap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DpConfig {
    pub max_iterations: usize,
    pub cost_kind: CostKind,
    pub tie_break: TieBreak,
    pub convergence: Convergence,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 3,
            cost_kind: CostKind::Pd,
            tie_break: TieBreak::KeepFirst,
            convergence: Convergence::AllStatesZero,
        }
    }
}

impl DpConfig {
    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_cost(mut self, cost_kind: CostKind) -> Self {
        self.cost_kind = cost_kind;
        self
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn with_convergence(mut self, convergence: Convergence) -> Self {
        self.convergence = convergence;
        self
    }

    /// A cap of `width + height`, past convergence on every grid.
    pub fn unbounded_cap(width: usize, height: usize) -> usize {
        width + height
    }
}

/// Read-only inputs shared by every sweep.
#[derive(Clone, Debug)]
pub struct DpContext<T> {
    pub cost_u: Vec<T>,
    pub cost_v: Vec<T>,
    pub zuu: Vec<T>,
    pub zvv: Vec<T>,
    pub mask: Vec<bool>,
    pub width: usize,
    pub height: usize,
    pub tie_break: TieBreak,
}

impl<T: Real> DpContext<T> {
    pub fn from_bundle(b: &InitBundle<T>, tie_break: TieBreak) -> Self {
        Self {
            cost_u: b.cost_u.clone(),
            cost_v: b.cost_v.clone(),
            zuu: b.grad.zuu.clone(),
            zvv: b.grad.zvv.clone(),
            mask: b.grad.mask.clone(),
            width: b.grad.width,
            height: b.grad.height,
            tie_break,
        }
    }

    fn cost(&self, axis: Axis) -> &[T] {
        match axis {
            Axis::U => &self.cost_u,
            Axis::V => &self.cost_v,
        }
    }

    fn second(&self, axis: Axis) -> &[T] {
        match axis {
            Axis::U => &self.zuu,
            Axis::V => &self.zvv,
        }
    }

    /// Index of `p + off` if inside the grid and valid.
    #[inline]
    fn valid_at(&self, p: Pixel, off: Offset) -> Option<usize> {
        let q = off.apply(p, self.width, self.height)?;
        let i = q.v * self.width + q.u;
        self.mask[i].then_some(i)
    }
}

/// Resolution of the parallel, orthogonal and diagonal roles for one axis.
#[derive(Clone, Copy, Debug)]
pub struct AxisView<'a, T> {
    pub axis: Axis,
    pub e_p: &'a [T],
    pub e_o: &'a [T],
    pub cost_p: &'a [T],
    pub cost_o: &'a [T],
    pub z_pp: &'a [T],
    pub s_p: &'a [Offset],
    pub n_p: &'a [u32],
}

impl<'a, T: Real> AxisView<'a, T> {
    pub fn new(axis: Axis, fields: &'a DpFields<T>, ctx: &'a DpContext<T>) -> Self {
        Self {
            axis,
            e_p: fields.energy(axis),
            e_o: fields.energy(axis.other()),
            cost_p: ctx.cost(axis),
            cost_o: ctx.cost(axis.other()),
            z_pp: ctx.second(axis),
            s_p: fields.states(axis),
            n_p: fields.counters(axis),
        }
    }

    /// Neighbour offset along the parallel direction.
    pub fn parallel(&self, t: i8) -> Offset {
        Offset::along(self.axis, t)
    }

    /// Neighbour offset along the orthogonal direction.
    pub fn orthogonal(&self, t: i8) -> Offset {
        Offset::along(self.axis.other(), t)
    }

    /// Diagonal offset, `a` along the axis and `b` across it.
    pub fn diagonal(&self, a: i8, b: i8) -> Offset {
        let p = self.parallel(a);
        let o = self.orthogonal(b);
        Offset::new(p.du + o.du, p.dv + o.dv)
    }
}

/// Candidate kind, in default tie-break priority order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CandidateKind {
    Keep,
    Parallel,
    Orthogonal,
    Diagonal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate<T> {
    pub kind: CandidateKind,
    pub state: Offset,
    pub energy: T,
}

/// Up to 9 labelled candidates: keep, 2 parallel, 2 orthogonal, 4 diagonal.
pub type CandidateSet<T> = ArrayVec<Candidate<T>, 9>;

/// Continuity gate for a collinear step from `p` to `p + t` along the axis.
/// Zero when the second differences at `p + s` and `p + t + s` have the same
/// strict sign and the previous states of `p` and `p + t` agree; `+inf`
/// otherwise, including when a probe is outside the grid or masked.
pub fn indicator<T: Real>(view: &AxisView<'_, T>, ctx: &DpContext<T>, p: Pixel, t: i8) -> T {
    let inf = T::infinity();
    let Some(i) = ctx.valid_at(p, Offset::ZERO) else {
        return inf;
    };
    let pp_off = view.parallel(t);
    let Some(pp) = ctx.valid_at(p, pp_off) else {
        return inf;
    };
    let s = view.s_p[i];
    if view.s_p[pp] != s {
        return inf;
    }
    let Some(a) = ctx.valid_at(p, s) else {
        return inf;
    };
    let Some(b) = ctx.valid_at(p, Offset::new(pp_off.du + s.du, pp_off.dv + s.dv)) else {
        return inf;
    };
    if view.z_pp[a] * view.z_pp[b] > T::zero() {
        T::zero()
    } else {
        inf
    }
}

/// Labelled transfer energies for `p` along `view.axis`, in tie-break order.
pub fn candidate_energies<T: Real>(
    view: &AxisView<'_, T>,
    ctx: &DpContext<T>,
    p: Pixel,
) -> CandidateSet<T> {
    let mut out = CandidateSet::new();
    let Some(i) = ctx.valid_at(p, Offset::ZERO) else {
        return out;
    };
    let keep = Candidate {
        kind: CandidateKind::Keep,
        state: Offset::ZERO,
        energy: view.e_p[i],
    };
    let extend_first = ctx.tie_break == TieBreak::ExtendFirst;
    if !extend_first {
        out.push(keep);
    }
    for t in [-1i8, 1] {
        let off = view.parallel(t);
        let Some(q) = ctx.valid_at(p, off) else {
            continue;
        };
        let mut energy = view.cost_p[q] + indicator(view, ctx, p, t);
        if extend_first && (view.s_p[i] != off || view.n_p[i] != view.n_p[q]) {
            energy = T::infinity();
        }
        out.push(Candidate {
            kind: CandidateKind::Parallel,
            state: off,
            energy,
        });
    }
    if extend_first {
        out.push(keep);
    }
    let two = T::lit(2.0);
    for t in [-1i8, 1] {
        let off = view.orthogonal(t);
        if let Some(q) = ctx.valid_at(p, off) {
            out.push(Candidate {
                kind: CandidateKind::Orthogonal,
                state: off,
                energy: two * (view.cost_o[q] + view.e_p[q]),
            });
        }
    }
    for a in [-1i8, 1] {
        for b in [-1i8, 1] {
            let (Some(o), Some(d)) = (
                ctx.valid_at(p, view.orthogonal(b)),
                ctx.valid_at(p, view.diagonal(a, b)),
            ) else {
                continue;
            };
            out.push(Candidate {
                kind: CandidateKind::Diagonal,
                state: view.diagonal(a, b),
                energy: view.cost_o[o] + view.e_p[o] + view.cost_p[d] + view.e_o[d],
            });
        }
    }
    out
}

/// First strict minimum of a candidate list. `None` on an empty set.
pub fn select_state<T: Real>(candidates: &[Candidate<T>]) -> Option<(T, Offset)> {
    let mut best: Option<&Candidate<T>> = None;
    for c in candidates {
        if best.is_none_or(|b| c.energy < b.energy) {
            best = Some(c);
        }
    }
    best.map(|c| (c.energy, c.state))
}

/// Gradient field plus DP bookkeeping between sweeps.
#[derive(Clone, Debug, PartialEq)]
pub struct DpState<T> {
    pub grad: GradientField<T>,
    pub fields: DpFields<T>,
}

impl<T: Real> DpState<T> {
    pub fn from_bundle(b: &InitBundle<T>) -> Self {
        Self {
            grad: b.grad.clone(),
            fields: DpFields::from_bundle(b),
        }
    }
}

#[derive(Clone, Copy)]
struct AxisOut<T> {
    energy: T,
    state: Offset,
    gradient: T,
    diff: T,
    order: u32,
}

fn sweep_axis<T: Real>(
    prev: &DpState<T>,
    ctx: &DpContext<T>,
    axis: Axis,
    p: Pixel,
) -> Result<AxisOut<T>> {
    let i = p.v * ctx.width + p.u;
    let f = &prev.fields;
    let view = AxisView::new(axis, f, ctx);
    let candidates = candidate_energies(&view, ctx, p);
    let (energy, state) = select_state(&candidates).ok_or(Error::Empty("candidate set"))?;
    let buf = AxisBuffers {
        width: ctx.width,
        height: ctx.height,
        g_p: prev.grad.first(axis),
        g_o: prev.grad.first(axis.other()),
        diff: f.diffs(axis),
        order: f.counters(axis),
        valid: &ctx.mask,
    };
    let up = update_gradients(&buf, p, axis, state)?;
    debug_assert!(i < ctx.mask.len());
    Ok(AxisOut {
        energy,
        state,
        gradient: up.gradient,
        diff: up.diff,
        order: up.order,
    })
}

/// One Jacobi sweep. Returns the next state and whether any state is nonzero.
pub fn dp_iterate<T: Real>(prev: &DpState<T>, ctx: &DpContext<T>) -> Result<(DpState<T>, bool)> {
    let n = ctx.width * ctx.height;
    let f = &prev.fields;
    let lens = [
        prev.grad.zu.len(),
        prev.grad.zv.len(),
        f.e_u.len(),
        f.e_v.len(),
        f.s_u.len(),
        f.s_v.len(),
        f.n_u.len(),
        f.n_v.len(),
        f.d_u.len(),
        f.d_v.len(),
        ctx.mask.len(),
        ctx.cost_u.len(),
        ctx.cost_v.len(),
    ];
    if lens.iter().any(|&l| l != n) || f.width != ctx.width || f.height != ctx.height {
        return Err(Error::DimensionMismatch(format!(
            "dp buffers do not match the {}x{} grid",
            ctx.width, ctx.height
        )));
    }

    let outs: Vec<Option<(AxisOut<T>, AxisOut<T>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if !ctx.mask[i] {
                return Ok(None);
            }
            let p = Pixel::new(i % ctx.width, i / ctx.width);
            Ok(Some((
                sweep_axis(prev, ctx, Axis::U, p)?,
                sweep_axis(prev, ctx, Axis::V, p)?,
            )))
        })
        .collect::<Result<_>>()?;

    let mut next = prev.clone();
    let mut any = false;
    for (i, out) in outs.into_iter().enumerate() {
        let Some((u, v)) = out else {
            continue;
        };
        any |= !u.state.is_zero() || !v.state.is_zero();
        let nf = &mut next.fields;
        nf.e_u[i] = u.energy;
        nf.s_u[i] = u.state;
        nf.n_u[i] = u.order;
        nf.d_u[i] = u.diff;
        next.grad.zu[i] = u.gradient;
        nf.e_v[i] = v.energy;
        nf.s_v[i] = v.state;
        nf.n_v[i] = v.order;
        nf.d_v[i] = v.diff;
        next.grad.zv[i] = v.gradient;
    }
    Ok((next, any))
}

/// Result of a DP run.
#[derive(Clone, Debug)]
pub struct DpOutcome<T> {
    pub grad: GradientField<T>,
    pub fields: DpFields<T>,
    /// Sweeps performed.
    pub sweeps: usize,
    /// Whether every state reached zero.
    pub converged: bool,
}

/// Initialises from `depth` and sweeps until every state is zero or the cap
/// is reached.
pub fn run_dp<T: Real>(depth: &DepthGrid<T>, cfg: &DpConfig) -> Result<DpOutcome<T>> {
    run_dp_observed(depth, cfg, |_, _, _| {})
}

/// As [`run_dp`], calling `observe(sweep, previous, next)` after each sweep.
pub fn run_dp_observed<T: Real>(
    depth: &DepthGrid<T>,
    cfg: &DpConfig,
    mut observe: impl FnMut(usize, &DpState<T>, &DpState<T>),
) -> Result<DpOutcome<T>> {
    let bundle = init_bundle(depth, cfg.cost_kind)?;
    let ctx = DpContext::from_bundle(&bundle, cfg.tie_break);
    let mut state = DpState::from_bundle(&bundle);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < cfg.max_iterations {
        let (next, any) = dp_iterate(&state, &ctx)?;
        sweeps += 1;
        observe(sweeps, &state, &next);
        state = next;
        if !any {
            converged = true;
            if cfg.convergence == Convergence::AllStatesZero {
                break;
            }
        }
    }
    Ok(DpOutcome {
        grad: state.grad,
        fields: state.fields,
        sweeps,
        converged,
    })
}
