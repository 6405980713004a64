//! Inversion by sampling methods: near-field operator assembly, truncated
//! SVD / Tikhonov / smoothed-descent solvers of the near-field equation,
//! indicator scans over sampling grids, isosurface levels and text exports.
//!
//! The discrete near-field operator folds the source quadrature weights into
//! the column blocks of the multistatic matrix and keeps the receiver
//! components tangential (nu0 x u per receiver). For a sampling point z and
//! polarization q the near-field equation asks for a density g with
//! N g = nu0 x Ge(., z) q on the array; the reconstruction indicator is the
//! reciprocal of the average solution norm over the three coordinate
//! polarizations, which collapses outside the scatterer and stays O(1)
//! inside.

use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

use crate::forward::{make_array, MultistaticData, TransducerArray};
use crate::greens::GreensEvaluator;
use crate::linalg::{self, vec_norm, Mat, Svd};
use crate::modes::nu0_cross;
use crate::scatterer::BoundingBox;
use crate::spectra::Waveguide;
use crate::{Error, Point, Result};

type C = Complex64;

/// Discrete near-field operator: the multistatic matrix with the source
/// quadrature weights folded into its column blocks, together with the
/// provenance metadata carried by the data it was assembled from. The
/// regularized solvers only read `matrix`, so hand-built systems of any
/// square size can be solved for testing and calibration.
#[derive(Clone, Debug)]
pub struct NearFieldMatrix {
    pub k: f64,
    pub r: f64,
    pub eta: f64,
    pub seed: u64,
    pub p_count: usize,
    /// (3P) x (3P), receiver-tangential components, columns weighted.
    pub matrix: Mat,
}

/// Fold the source quadrature into the data matrix and tangentialize the
/// receiver components, producing the discrete near-field operator.
///
/// Column block j (one source point, three polarizations) is scaled by the
/// quadrature weight w_j. Data stored with raw receiver components is
/// rotated to nu0 x u = (-u2, u1, 0); data already stored tangentially is
/// used as-is, so the rotation is never applied twice.
pub fn assemble(d: &MultistaticData, array: &TransducerArray) -> Result<NearFieldMatrix> {
    let p = array.points.len();
    if d.p_count != p {
        return Err(Error::InvalidParameter(format!(
            "data has {} source points but the array has {p}",
            d.p_count
        )));
    }
    let n = 3 * p;
    if d.entries.rows != n || d.entries.cols != n {
        return Err(Error::InvalidParameter(format!(
            "data matrix is {}x{}, expected {n}x{n}",
            d.entries.rows, d.entries.cols
        )));
    }
    if array.weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::InvalidParameter(
            "array quadrature weights must be positive".into(),
        ));
    }

    let mut m = Mat::zeros(n, n);
    for col in 0..n {
        let w = array.weights[col / 3];
        for i in 0..p {
            let u = [
                d.entries.at(3 * i, col),
                d.entries.at(3 * i + 1, col),
                d.entries.at(3 * i + 2, col),
            ];
            let t = if d.tangential { u } else { nu0_cross(u) };
            for (q, tq) in t.iter().enumerate() {
                *m.at_mut(3 * i + q, col) = w * tq;
            }
        }
    }
    if m.data
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::Numeric(
            "near-field matrix has non-finite entries".into(),
        ));
    }
    Ok(NearFieldMatrix {
        k: d.k,
        r: d.r,
        eta: d.eta,
        seed: d.seed,
        p_count: p,
        matrix: m,
    })
}

/// Right-hand side of the near-field equation for sampling point `z` and
/// polarization `q`: the tangential traces nu0 x Ge(x_i, z) q stacked over
/// the receivers. Fails when `z` is closer to the array plane than the
/// evaluator's separation floor.
pub fn rhs(ev: &GreensEvaluator, z: Point, q: [f64; 3], array: &TransducerArray) -> Result<Vec<C>> {
    let mut b = Vec::with_capacity(3 * array.points.len());
    for &x in &array.points {
        let u = ev.incident(x, z, q)?;
        b.extend_from_slice(&nu0_cross(u));
    }
    Ok(b)
}

/// Regularization strategy for the near-field equation.
#[derive(Clone, Debug, PartialEq)]
pub enum RegConfig {
    /// Spectral cutoff: keep the leading `rank` singular triplets.
    Tsvd { rank: usize },
    /// Squared-penalty Tikhonov filter with parameter `alpha > 0`.
    Tikhonov { alpha: f64 },
    /// Smoothed first-order descent on the generalized objective
    /// |N g - b|^2 + alpha^2 sqrt(|<g, N g>|^2 + delta^2), initialized at
    /// the Tikhonov solution for the same alpha. `delta: None` selects the
    /// per-right-hand-side default [`default_glsm_delta`].
    Glsm {
        alpha: f64,
        delta: Option<f64>,
        max_iters: usize,
        tol: f64,
    },
}

impl RegConfig {
    /// Check the parameters against a system with `n` unknowns.
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            RegConfig::Tsvd { rank } => {
                if rank == 0 || rank > n {
                    return Err(Error::InvalidParameter(format!(
                        "spectral cutoff rank {rank} outside 1..={n}"
                    )));
                }
            }
            RegConfig::Tikhonov { alpha } => {
                if !alpha.is_finite() || alpha <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "Tikhonov parameter must be positive and finite".into(),
                    ));
                }
            }
            RegConfig::Glsm {
                alpha,
                delta,
                max_iters,
                tol,
            } => {
                if !alpha.is_finite() || alpha <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "descent parameter alpha must be positive and finite".into(),
                    ));
                }
                if let Some(d) = delta {
                    if !d.is_finite() || d <= 0.0 {
                        return Err(Error::InvalidParameter(
                            "smoothing delta must be positive and finite".into(),
                        ));
                    }
                }
                if max_iters == 0 {
                    return Err(Error::InvalidParameter(
                        "descent needs at least one iteration".into(),
                    ));
                }
                if !tol.is_finite() || tol < 0.0 {
                    return Err(Error::InvalidParameter(
                        "descent tolerance must be non-negative and finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Default spectral cutoff: the number of propagating transverse-electric
/// modes plus 13.
pub fn default_tsvd_rank(wg: &Waveguide) -> usize {
    wg.propagating_neumann().len() + 13
}

/// Default smoothing scale for the generalized objective: 1e-8 |b|^2.
pub fn default_glsm_delta(b: &[C]) -> f64 {
    1e-8 * b.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Truncated-SVD solution of the near-field equation.
pub struct TsvdSolution {
    pub g: Vec<C>,
    /// |N g - b| on the full (unfiltered) matrix.
    pub residual: f64,
    /// Number of singular triplets actually used; smaller than the request
    /// when trailing singular values are exactly zero.
    pub effective_rank: usize,
}

/// Tikhonov solution of the near-field equation.
pub struct TikhonovSolution {
    pub g: Vec<C>,
    pub residual: f64,
}

/// Descent solution of the generalized objective.
pub struct GlsmSolution {
    pub g: Vec<C>,
    /// Smoothed objective after the initializer and each accepted step;
    /// non-increasing by the line-search contract.
    pub objective: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Spectral cutoff: g = sum_{i < rank, s_i > 0} (u_i^H b / s_i) v_i.
pub fn solve_tsvd(m: &NearFieldMatrix, b: &[C], rank: usize) -> Result<TsvdSolution> {
    check_rhs(&m.matrix, b)?;
    RegConfig::Tsvd { rank }.validate(m.matrix.cols)?;
    let svd = linalg::svd(&m.matrix);
    let (g, effective_rank) = tsvd_filtered(&svd, b, rank);
    let residual = residual_norm(&m.matrix, &g, b);
    Ok(TsvdSolution {
        g,
        residual,
        effective_rank,
    })
}

/// Tikhonov filter: g = sum_i s_i (u_i^H b) / (s_i^2 + alpha^2) v_i, the
/// minimizer of |N g - b|^2 + alpha^2 |g|^2.
pub fn solve_tikhonov(m: &NearFieldMatrix, b: &[C], alpha: f64) -> Result<TikhonovSolution> {
    check_rhs(&m.matrix, b)?;
    RegConfig::Tikhonov { alpha }.validate(m.matrix.cols)?;
    let svd = linalg::svd(&m.matrix);
    let g = tikhonov_filtered(&svd, b, alpha);
    let residual = residual_norm(&m.matrix, &g, b);
    Ok(TikhonovSolution { g, residual })
}

/// Minimize |N g - b|^2 + alpha^2 sqrt(|<g, N g>|^2 + delta^2) by monotone
/// gradient descent with Armijo backtracking, initialized at the Tikhonov
/// solution for the same alpha. `delta = 0` is accepted and means the
/// unsmoothed objective (a subgradient is used where it is kinked). Stops
/// at gradient norm <= `tol` or after `max_iters` accepted steps.
pub fn solve_glsm(
    m: &NearFieldMatrix,
    b: &[C],
    alpha: f64,
    delta: f64,
    max_iters: usize,
    tol: f64,
) -> Result<GlsmSolution> {
    check_rhs(&m.matrix, b)?;
    RegConfig::Glsm {
        alpha,
        delta: None,
        max_iters,
        tol,
    }
    .validate(m.matrix.cols)?;
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::InvalidParameter(
            "smoothing delta must be non-negative and finite".into(),
        ));
    }
    let svd = linalg::svd(&m.matrix);
    glsm_descent(&m.matrix, &svd, b, alpha, delta, max_iters, tol)
}

fn check_rhs(matrix: &Mat, b: &[C]) -> Result<()> {
    if b.len() != matrix.rows {
        return Err(Error::InvalidParameter(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            matrix.rows
        )));
    }
    Ok(())
}

fn residual_norm(matrix: &Mat, g: &[C], b: &[C]) -> f64 {
    let ng = matrix.matvec(g);
    ng.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Apply a spectral filter: g = V diag(filter_i) U^H b.
fn filtered_solve(svd: &Svd, b: &[C], filter: impl Fn(usize, f64) -> f64) -> Vec<C> {
    let mut beta = svd.u.matvec_conj_transpose(b);
    for (i, c) in beta.iter_mut().enumerate() {
        *c *= filter(i, svd.s[i]);
    }
    svd.v.matvec(&beta)
}

fn tsvd_filtered(svd: &Svd, b: &[C], rank: usize) -> (Vec<C>, usize) {
    let effective = svd.s.iter().take(rank).filter(|s| **s > 0.0).count();
    let g = filtered_solve(svd, b, |i, s| if i < effective { 1.0 / s } else { 0.0 });
    (g, effective)
}

fn tikhonov_filtered(svd: &Svd, b: &[C], alpha: f64) -> Vec<C> {
    filtered_solve(svd, b, |_, s| s / (s * s + alpha * alpha))
}

/// Generalized objective with the |.| kink smoothed:
/// |N g - b|^2 + alpha^2 sqrt(|s|^2 + delta^2), s = <g, N g> = g^H N g.
fn glsm_objective(ng: &[C], b: &[C], g: &[C], alpha: f64, delta: f64) -> f64 {
    let data: f64 = ng.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let s = linalg::cdot(g, ng);
    data + alpha * alpha * (s.norm_sqr() + delta * delta).sqrt()
}

/// Wirtinger gradient dF/d(conj g) of the smoothed objective:
/// N^H (N g - b) + alpha^2 (conj(s) N g + s N^H g) / (2 sqrt(|s|^2+delta^2)).
/// Where the penalty is kinked (s = 0, delta = 0) its subgradient 0 is used.
fn glsm_gradient(matrix: &Mat, ng: &[C], b: &[C], g: &[C], alpha: f64, delta: f64) -> Vec<C> {
    let resid: Vec<C> = ng.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut grad = matrix.matvec_conj_transpose(&resid);
    let s = linalg::cdot(g, ng);
    let phi = (s.norm_sqr() + delta * delta).sqrt();
    if phi > 0.0 {
        let nhg = matrix.matvec_conj_transpose(g);
        let a2 = alpha * alpha;
        let ws = s.conj() / (2.0 * phi);
        let wc = s / (2.0 * phi);
        for i in 0..grad.len() {
            grad[i] += a2 * (ws * ng[i] + wc * nhg[i]);
        }
    }
    grad
}

fn glsm_descent(
    matrix: &Mat,
    svd: &Svd,
    b: &[C],
    alpha: f64,
    delta: f64,
    max_iters: usize,
    tol: f64,
) -> Result<GlsmSolution> {
    let mut g = tikhonov_filtered(svd, b, alpha);
    let mut ng = matrix.matvec(&g);
    let mut f = glsm_objective(&ng, b, &g, alpha, delta);
    let mut trace = vec![f];

    // Inverse curvature of the quadratic part sets the trial step scale.
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let mut step = 1.0 / (2.0 * smax * smax + alpha * alpha);

    let mut iterations = 0;
    for _ in 0..max_iters {
        let grad = glsm_gradient(matrix, &ng, b, &g, alpha, delta);
        let gn2: f64 = grad.iter().map(|z| z.norm_sqr()).sum();
        if gn2.sqrt() <= tol {
            break;
        }

        let mut tau = 2.0 * step;
        let mut accepted = false;
        let mut last_f = f64::INFINITY;
        for _ in 0..60 {
            let cand: Vec<C> = g.iter().zip(&grad).map(|(x, d)| x - tau * d).collect();
            let ng_c = matrix.matvec(&cand);
            let f_c = glsm_objective(&ng_c, b, &cand, alpha, delta);
            last_f = f_c;
            if f_c <= f - 1e-4 * tau * gn2 {
                g = cand;
                ng = ng_c;
                f = f_c;
                step = tau;
                trace.push(f);
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // The direction is a descent direction, so a sufficiently small
            // step must not increase the objective; reaching the backtracking
            // floor with no measurable decrease means the iterate is at the
            // numeric floor (stop cleanly), while an actual increase signals
            // an inconsistent gradient (abort).
            if last_f <= f * (1.0 + 1e-12) {
                break;
            }
            return Err(Error::Numeric(format!(
                "descent stalled: smallest trial step raised the objective from {f:.6e} to {last_f:.6e}"
            )));
        }
    }

    let residual = residual_norm(matrix, &g, b);
    Ok(GlsmSolution {
        g,
        objective: trace,
        residual,
        iterations,
    })
}

/// Combined indicator from the three polarization solves at one sampling
/// point: psi = 3 / (|g_1| + |g_2| + |g_3|). An all-zero triple maps to
/// +inf, the degenerate marker excluded from level computations.
pub fn indicator(g1: &[C], g2: &[C], g3: &[C]) -> f64 {
    3.0 / (vec_norm(g1) + vec_norm(g2) + vec_norm(g3))
}

/// Regular lattice of sampling points (cell centers of a box partition of
/// `bbox`), kept at least `buffer` away from the guide walls. Storage order
/// is first-axis-fastest, matching the voxel grids.
#[derive(Clone, Debug)]
pub struct SamplingGrid {
    pub bbox: BoundingBox,
    pub dims: [usize; 3],
    pub buffer: f64,
    pub points: Vec<Point>,
}

impl SamplingGrid {
    pub fn new(
        wg: &Waveguide,
        bbox: BoundingBox,
        dims: [usize; 3],
        buffer: f64,
    ) -> Result<SamplingGrid> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParameter(
                "sampling grid needs at least one point per axis".into(),
            ));
        }
        if !buffer.is_finite() || buffer <= 0.0 {
            return Err(Error::InvalidParameter(
                "sampling buffer must be positive and finite".into(),
            ));
        }
        let spacing = [
            (bbox.max[0] - bbox.min[0]) / dims[0] as f64,
            (bbox.max[1] - bbox.min[1]) / dims[1] as f64,
            (bbox.max[2] - bbox.min[2]) / dims[2] as f64,
        ];
        let center = |axis: usize, i: usize| bbox.min[axis] + (i as f64 + 0.5) * spacing[axis];
        // The extreme cell centers bound every point's wall distance.
        let lo = [center(0, 0), center(1, 0)];
        let hi = [center(0, dims[0] - 1), center(1, dims[1] - 1)];
        if lo[0] < buffer || hi[0] > wg.a - buffer || lo[1] < buffer || hi[1] > wg.b - buffer {
            return Err(Error::InvalidParameter(format!(
                "sampling points must stay {buffer} away from the guide walls"
            )));
        }
        let mut points = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for l in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    points.push([center(0, i), center(1, j), center(2, l)]);
                }
            }
        }
        Ok(SamplingGrid {
            bbox,
            dims,
            buffer,
            points,
        })
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            (self.bbox.max[0] - self.bbox.min[0]) / self.dims[0] as f64,
            (self.bbox.max[1] - self.bbox.min[1]) / self.dims[1] as f64,
            (self.bbox.max[2] - self.bbox.min[2]) / self.dims[2] as f64,
        ]
    }
}

/// Indicator values over a sampling grid. `psi` and `norms` align with
/// `grid.points`; entries are valid when all three polarization solves
/// succeeded and the indicator is finite (degenerate all-zero solutions are
/// stored as +inf with `valid = false`, failed solves as NaN).
#[derive(Clone, Debug)]
pub struct IndicatorField {
    pub grid: SamplingGrid,
    pub reg: RegConfig,
    pub psi: Vec<f64>,
    pub norms: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
}

/// Sweep the sampling grid: at each point solve the near-field equation for
/// the three coordinate polarizations and combine the solution norms into
/// the indicator. The singular system is factored once and shared; points
/// are processed in parallel and the result is deterministic for any thread
/// count. Per-point failures (separation violations, stalled descent) are
/// recorded as invalid entries rather than aborting the scan.
pub fn scan(
    m: &NearFieldMatrix,
    ev: &GreensEvaluator,
    grid: &SamplingGrid,
    reg: &RegConfig,
) -> Result<IndicatorField> {
    let n = 3 * m.p_count;
    if m.matrix.rows != n || m.matrix.cols != n {
        return Err(Error::InvalidParameter(format!(
            "near-field matrix is {}x{}, expected {n}x{n}",
            m.matrix.rows, m.matrix.cols
        )));
    }
    reg.validate(n)?;
    if (ev.wg.k - m.k).abs() > 1e-12 * m.k.abs().max(1.0) {
        return Err(Error::MetadataMismatch(format!(
            "data was synthesized at k = {} but the evaluator has k = {}",
            m.k, ev.wg.k
        )));
    }
    let side = (m.p_count as f64).sqrt().round() as usize;
    if side * side != m.p_count {
        return Err(Error::InvalidParameter(format!(
            "{} source points do not form a square array",
            m.p_count
        )));
    }
    let array = make_array(&ev.wg, m.r, side)?;
    let svd = linalg::svd(&m.matrix);

    struct PointOutcome {
        psi: f64,
        norms: [f64; 3],
        valid: bool,
    }
    let invalid = || PointOutcome {
        psi: f64::NAN,
        norms: [f64::NAN; 3],
        valid: false,
    };

    let outcomes: Vec<PointOutcome> = grid
        .points
        .par_iter()
        .map(|&z| {
            let bs = match point_rhs(ev, &array, z) {
                Ok(bs) => bs,
                Err(_) => return invalid(),
            };
            let mut gs: Vec<Vec<C>> = Vec::with_capacity(3);
            for b in &bs {
                match solve_with(&m.matrix, &svd, b, reg) {
                    Ok(g) => gs.push(g),
                    Err(_) => return invalid(),
                }
            }
            let norms = [vec_norm(&gs[0]), vec_norm(&gs[1]), vec_norm(&gs[2])];
            let psi = indicator(&gs[0], &gs[1], &gs[2]);
            PointOutcome {
                psi,
                norms,
                valid: psi.is_finite(),
            }
        })
        .collect();

    Ok(IndicatorField {
        grid: grid.clone(),
        reg: reg.clone(),
        psi: outcomes.iter().map(|o| o.psi).collect(),
        norms: outcomes.iter().map(|o| o.norms).collect(),
        valid: outcomes.iter().map(|o| o.valid).collect(),
    })
}

/// Right-hand sides for the three coordinate polarizations at `z`, sharing
/// one dyadic evaluation per receiver (column s of Ge(x_i, z) is the field
/// of the e_s point source).
fn point_rhs(ev: &GreensEvaluator, array: &TransducerArray, z: Point) -> Result<[Vec<C>; 3]> {
    let n = 3 * array.points.len();
    let mut bs = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for &x in &array.points {
        let g = ev.eval(x, z)?;
        for (s, b) in bs.iter_mut().enumerate() {
            let u = [g[0][s], g[1][s], g[2][s]];
            b.extend_from_slice(&nu0_cross(u));
        }
    }
    Ok(bs)
}

fn solve_with(matrix: &Mat, svd: &Svd, b: &[C], reg: &RegConfig) -> Result<Vec<C>> {
    match *reg {
        RegConfig::Tsvd { rank } => Ok(tsvd_filtered(svd, b, rank).0),
        RegConfig::Tikhonov { alpha } => Ok(tikhonov_filtered(svd, b, alpha)),
        RegConfig::Glsm {
            alpha,
            delta,
            max_iters,
            tol,
        } => {
            let d = delta.unwrap_or_else(|| default_glsm_delta(b));
            Ok(glsm_descent(matrix, svd, b, alpha, d, max_iters, tol)?.g)
        }
    }
}

/// Isosurface level across the valid indicator values:
/// C (max - min) + min for C in (0, 1).
pub fn iso_level(field: &IndicatorField, c: f64) -> Result<f64> {
    if !c.is_finite() || c <= 0.0 || c >= 1.0 {
        return Err(Error::InvalidParameter(
            "isosurface constant must lie strictly between 0 and 1".into(),
        ));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (psi, valid) in field.psi.iter().zip(&field.valid) {
        if *valid {
            min = min.min(*psi);
            max = max.max(*psi);
        }
    }
    if min > max {
        return Err(Error::Numeric("indicator field has no valid values".into()));
    }
    Ok(c * (max - min) + min)
}

impl IndicatorField {
    /// Index, point and value of the largest valid indicator entry.
    pub fn argmax(&self) -> Option<(usize, Point, f64)> {
        let mut best: Option<(usize, Point, f64)> = None;
        for i in 0..self.psi.len() {
            if self.valid[i] && best.map_or(true, |(_, _, v)| self.psi[i] > v) {
                best = Some((i, self.grid.points[i], self.psi[i]));
            }
        }
        best
    }

    /// CSV rows `z1,z2,z3,psi,valid` in grid storage order, with a header
    /// line. Degenerate entries print `inf`, failed solves `NaN`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("z1,z2,z3,psi,valid\n");
        for (i, p) in self.grid.points.iter().enumerate() {
            let v = if self.valid[i] { 1 } else { 0 };
            writeln!(out, "{},{},{},{},{}", p[0], p[1], p[2], self.psi[i], v).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// JSON sidecar describing the grid, the regularization and the
    /// isosurface levels for the requested constants (null when the field
    /// has no valid values).
    pub fn sidecar_json(&self, iso_cs: &[f64]) -> String {
        let reg = match &self.reg {
            RegConfig::Tsvd { rank } => serde_json::json!({"method": "tsvd", "rank": rank}),
            RegConfig::Tikhonov { alpha } => {
                serde_json::json!({"method": "tikhonov", "alpha": alpha})
            }
            RegConfig::Glsm {
                alpha,
                delta,
                max_iters,
                tol,
            } => serde_json::json!({
                "method": "glsm",
                "alpha": alpha,
                "delta": delta,
                "max_iters": max_iters,
                "tol": tol,
            }),
        };
        let levels: Vec<serde_json::Value> = iso_cs
            .iter()
            .map(|&c| {
                serde_json::json!({
                    "c": c,
                    "level": iso_level(self, c).ok(),
                })
            })
            .collect();
        let doc = serde_json::json!({
            "grid": {
                "bbox_min": self.grid.bbox.min,
                "bbox_max": self.grid.bbox.max,
                "dims": self.grid.dims,
                "buffer": self.grid.buffer,
            },
            "regularization": reg,
            "valid_points": self.valid.iter().filter(|v| **v).count(),
            "total_points": self.valid.len(),
            "iso_levels": levels,
        });
        serde_json::to_string_pretty(&doc).expect("serializing plain data cannot fail")
    }

    pub fn write_sidecar(&self, iso_cs: &[f64], path: &Path) -> Result<()> {
        std::fs::write(path, self.sidecar_json(iso_cs))?;
        Ok(())
    }

    /// Legacy VTK structured-points text for external viewers. Non-finite
    /// indicator values are written as 0 so the file stays loadable.
    pub fn to_vtk_string(&self) -> String {
        let sp = self.grid.spacing();
        let origin = self.grid.points[0];
        let mut out = String::new();
        out.push_str("# vtk DataFile Version 3.0\n");
        out.push_str("waveguide sampling indicator\n");
        out.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
        writeln!(
            out,
            "DIMENSIONS {} {} {}",
            self.grid.dims[0], self.grid.dims[1], self.grid.dims[2]
        )
        .unwrap();
        writeln!(out, "ORIGIN {} {} {}", origin[0], origin[1], origin[2]).unwrap();
        writeln!(out, "SPACING {} {} {}", sp[0], sp[1], sp[2]).unwrap();
        writeln!(out, "POINT_DATA {}", self.psi.len()).unwrap();
        out.push_str("SCALARS psi double 1\nLOOKUP_TABLE default\n");
        for psi in &self.psi {
            let v = if psi.is_finite() { *psi } else { 0.0 };
            writeln!(out, "{v}").unwrap();
        }
        out
    }

    pub fn write_vtk(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_vtk_string())?;
        Ok(())
    }
}
