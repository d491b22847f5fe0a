use rayon::prelude::*;

use crate::model::ProblemSpec;
use crate::pde::{solve_with_boundary, BoundaryData, Grid, SolverOptions, ThetaField};

use super::report::{IterationRecord, SchwarzReport, StopReason};
use super::{Partition, SchwarzError};

/// Values of a field on one interface plane `x_n = const` for every time
/// level, stored `[level][cross-section node][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub global_index: usize,
    pub cross_len: usize,
    pub m: usize,
    pub values: Vec<f64>,
}

impl Trace {
    /// Restriction of `field` to the plane at global last-axis index `global_index`.
    pub fn extract(field: &ThetaField, global_index: usize) -> Self {
        let grid = field.grid();
        let last = grid.dim() - 1;
        let local = global_index - grid.offsets()[last];
        let (cross_len, m) = (grid.cross_section_len(), field.m());
        let mut values = Vec::with_capacity(grid.nt() * cross_len * m);
        for level in 0..grid.nt() {
            for c in 0..cross_len {
                values.extend_from_slice(field.at(level, grid.node_at_plane(c, local)));
            }
        }
        Self {
            global_index,
            cross_len,
            m,
            values,
        }
    }

    #[inline]
    pub fn at(&self, level: usize, c: usize) -> &[f64] {
        let at = (level * self.cross_len + c) * self.m;
        &self.values[at..at + self.m]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |a, (u, v)| a.max((u - v).abs()))
    }
}

/// Incoming Dirichlet traces of one subdomain; `None` on a face of the box.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceTraces {
    pub left: Option<Trace>,
    pub right: Option<Trace>,
}

/// Iterate `q` of the Schwarz waveform relaxation: one field per slab and
/// the traces each slab will read in iteration `q + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchwarzState {
    pub iteration: usize,
    pub fields: Vec<ThetaField>,
    pub traces: Vec<FaceTraces>,
}

impl SchwarzState {
    /// Iteration 0: every slab holds the initial guess sampled on its sub-grid.
    pub fn initial(
        spec: &ProblemSpec,
        partition: &Partition,
        theta0: &(dyn Fn(f64, &[f64], &mut [f64]) + Sync),
    ) -> Self {
        let fields: Vec<ThetaField> = (0..partition.count())
            .map(|p| ThetaField::from_fn(partition.subgrid(p), spec.m(), theta0))
            .collect();
        Self::from_fields(partition, fields, 0)
    }

    /// Wraps per-slab fields and exchanges their traces.
    pub fn from_fields(partition: &Partition, fields: Vec<ThetaField>, iteration: usize) -> Self {
        let traces = exchange_traces(partition, &fields);
        Self {
            iteration,
            fields,
            traces,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.fields.iter().map(ThetaField::max_abs).fold(0.0, f64::max)
    }
}

/// Slab `p` reads `a_p` from slab `p − 1` and `b_p` from slab `p + 1`.
fn exchange_traces(partition: &Partition, fields: &[ThetaField]) -> Vec<FaceTraces> {
    let subs = partition.subdomains();
    let count = subs.len();
    (0..count)
        .map(|p| FaceTraces {
            left: (p > 0).then(|| Trace::extract(&fields[p - 1], subs[p].lo_index)),
            right: (p + 1 < count).then(|| Trace::extract(&fields[p + 1], subs[p].hi_index)),
        })
        .collect()
}

/// Dirichlet data for one slab: neighbour traces on interior interface
/// planes, problem boundary data everywhere else.
struct SlabBoundary<'a> {
    spec: &'a ProblemSpec,
    grid: &'a Grid,
    faces: &'a FaceTraces,
}

impl BoundaryData for SlabBoundary<'_> {
    fn fill(&self, level: usize, node: usize, x: &[f64], out: &mut [f64]) {
        if !self.grid.is_lateral(node) {
            let along = self.grid.counts()[self.grid.dim() - 1];
            let (c, i) = (node / along, node % along);
            let trace = if i == 0 {
                self.faces.left.as_ref()
            } else if i + 1 == along {
                self.faces.right.as_ref()
            } else {
                None
            };
            if let Some(trace) = trace {
                out.copy_from_slice(trace.at(level, c));
                return;
            }
        }
        self.spec.boundary(self.grid.time(level), x, out);
    }
}

/// How the independent slab solves of one iteration are executed.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Schedule {
    /// Rayon work-stealing over slabs.
    #[default]
    Parallel,
    /// One after the other in the given order (a permutation of `0..I`).
    Sequential(Vec<usize>),
}

fn solve_slab(
    spec: &ProblemSpec,
    partition: &Partition,
    state: &SchwarzState,
    p: usize,
    solver: &SolverOptions,
) -> Result<ThetaField, SchwarzError> {
    let grid = partition.subgrid(p);
    let boundary = SlabBoundary {
        spec,
        grid: &grid,
        faces: &state.traces[p],
    };
    solve_with_boundary(spec, &grid, &boundary, solver).map_err(|source| SchwarzError::Subdomain {
        index: p + 1,
        source,
    })
}

/// One Jacobi sweep: every slab solves with the traces of iteration `q − 1`,
/// then all traces are exchanged at once.
pub fn schwarz_iterate(
    spec: &ProblemSpec,
    partition: &Partition,
    state: &SchwarzState,
    schedule: &Schedule,
    solver: &SolverOptions,
) -> Result<SchwarzState, SchwarzError> {
    let count = partition.count();
    if state.fields.len() != count || state.traces.len() != count {
        return Err(SchwarzError::StateMismatch(format!(
            "state holds {} fields for {count} subdomains",
            state.fields.len()
        )));
    }
    let fields: Vec<ThetaField> = match schedule {
        Schedule::Parallel => (0..count)
            .into_par_iter()
            .map(|p| solve_slab(spec, partition, state, p, solver))
            .collect::<Result<_, _>>()?,
        Schedule::Sequential(order) => {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..count).collect::<Vec<_>>() {
                return Err(SchwarzError::StateMismatch(format!("{order:?} is not a permutation of 0..{count}")));
            }
            let mut slots: Vec<Option<ThetaField>> = vec![None; count];
            for &p in order {
                slots[p] = Some(solve_slab(spec, partition, state, p, solver)?);
            }
            slots.into_iter().map(|f| f.expect("every slot solved")).collect()
        }
    };
    Ok(SchwarzState::from_fields(partition, fields, state.iteration + 1))
}

/// Stopping rule and optional reference for [`run_schwarz`].
#[derive(Debug, Clone)]
pub struct StopCriteria<'a> {
    /// Sup-norm of the interface update below which the iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Monodomain solution on the partition's grid; enables `E_q` errors.
    pub reference: Option<&'a ThetaField>,
    /// Only feeds [`SchwarzReport::theoretical_rate`].
    pub gamma: f64,
    pub schedule: Schedule,
    pub solver: SolverOptions,
}

impl Default for StopCriteria<'_> {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 200,
            reference: None,
            gamma: 2.0,
            schedule: Schedule::Parallel,
            solver: SolverOptions::default(),
        }
    }
}

/// Sup error of each slab field against the reference restricted to the slab.
pub fn subdomain_errors(state: &SchwarzState, reference: &ThetaField) -> Vec<f64> {
    let full = reference.grid();
    state
        .fields
        .iter()
        .map(|field| {
            let grid = field.grid();
            let (along, offset) = (grid.counts()[grid.dim() - 1], grid.offsets()[grid.dim() - 1]);
            let mut worst = 0.0_f64;
            for node in 0..grid.node_count() {
                let (c, i) = (node / along, node % along);
                let full_node = c * full.nx() + offset + i;
                for level in 0..grid.nt() {
                    for (u, v) in field.at(level, node).iter().zip(reference.at(level, full_node)) {
                        worst = worst.max((u - v).abs());
                    }
                }
            }
            worst
        })
        .collect()
}

fn trace_updates(old: &[FaceTraces], new: &[FaceTraces]) -> Vec<f64> {
    old.iter()
        .zip(new)
        .map(|(o, n)| {
            let side = |a: &Option<Trace>, b: &Option<Trace>| match (a, b) {
                (Some(a), Some(b)) => a.max_abs_diff(b),
                _ => 0.0,
            };
            side(&o.left, &n.left).max(side(&o.right, &n.right))
        })
        .collect()
}

/// Iterates until the interface update drops below the tolerance, the
/// iteration budget runs out, or the update stagnates.
pub fn run_schwarz(
    spec: &ProblemSpec,
    partition: &Partition,
    theta0: &(dyn Fn(f64, &[f64], &mut [f64]) + Sync),
    stop: &StopCriteria<'_>,
) -> Result<(SchwarzState, SchwarzReport), SchwarzError> {
    if !(stop.tolerance >= 0.0) || stop.max_iterations == 0 {
        return Err(SchwarzError::StateMismatch("tolerance must be >= 0 and max_iterations >= 1".into()));
    }
    if let Some(r) = stop.reference {
        if r.grid() != partition.grid() || r.m() != spec.m() {
            return Err(SchwarzError::StateMismatch("reference field does not match the partition grid".into()));
        }
    }
    let count = partition.count();
    let mut state = SchwarzState::initial(spec, partition, theta0);
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut rising = 0usize;
    let stop_reason = loop {
        let next = schwarz_iterate(spec, partition, &state, &stop.schedule, &stop.solver)?;
        let updates = trace_updates(&state.traces, &next.traces);
        let update_norm = updates.iter().copied().fold(0.0, f64::max);
        let subdomain_errors = match stop.reference {
            Some(r) => subdomain_errors(&next, r),
            None => updates,
        };
        let e_q = subdomain_errors.iter().copied().fold(0.0, f64::max);
        if let Some(prev) = history.last() {
            rising = if update_norm >= prev.update_norm { rising + 1 } else { 0 };
        }
        history.push(IterationRecord {
            q: next.iteration,
            e_q,
            update_norm,
            subdomain_errors,
        });
        state = next;
        if update_norm <= stop.tolerance {
            break StopReason::Tolerance;
        }
        if rising >= count && update_norm > 0.0 {
            break StopReason::Stagnation;
        }
        if state.iteration >= stop.max_iterations {
            break StopReason::MaxIterations;
        }
    };
    let report = SchwarzReport::new(history, partition, stop.gamma, stop_reason);
    Ok((state, report))
}
