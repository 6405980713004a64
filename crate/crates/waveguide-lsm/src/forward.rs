//! Synthetic multistatic data: transducer arrays, the Lippmann-Schwinger
//! volume-integral solver, the Born approximation, near-field synthesis,
//! the multiplicative noise model, and the bit-exact NFM v1 file format.
//!
//! The collocation system is (I - k^2 G diag(eps-1) vol) w = w_incident over
//! the support cells. Cell pairs well separated along the axis use the plain
//! mode sum with a per-pair adaptive truncation; nearly coplanar pairs use
//! the free-space dyadic at the true points plus the smooth remainder
//! (guide dyadic minus free-space dyadic) interpolated from two symmetric
//! axial offsets where the mode sum converges. The self cell integrates the
//! free-space part in closed form over the volume-equivalent sphere and adds
//! the remainder at the cell center times the cell volume. Every path is
//! exactly transpose-symmetric under swapping the two cells, which makes the
//! synthesized multistatic matrix reciprocal to solver precision.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufReader, Read as _};
use std::path::Path;

use crate::greens::{self, dyadic_apply_c, GreensEvaluator, MAX_ORDER_LIMIT};
use crate::linalg::{lu_factor, LuFactors, Mat};
use crate::modes::nu0_cross;
use crate::quad::gauss_legendre_unit;
use crate::scatterer::{contrast_cells, Cell, VoxelGrid};
use crate::spectra::Waveguide;
use crate::{CVec3, Dyadic, Error, Point, Result};

type C = Complex64;

/// Axial window, in units of the larger cross-section side, below which a
/// cell pair switches from the direct mode sum to the decomposed kernel.
const NEAR_SWITCH_FACTOR: f64 = 0.2;

/// ln(1e4): adaptive truncations target 1e-4 relative series tails.
const SERIES_TAIL_LOG: f64 = 9.210340371976184;

/// Smallest truncation order whose slowest evanescent tail at axial
/// separation `dz` is below e^{-SERIES_TAIL_LOG}.
fn adaptive_order(wg: &Waveguide, dz: f64) -> u32 {
    let side = wg.a.max(wg.b);
    let gamma = SERIES_TAIL_LOG / dz;
    let lambda = (gamma * gamma + wg.k * wg.k).sqrt();
    (side * lambda / PI).ceil().min(MAX_ORDER_LIMIT as f64) as u32
}

/// Closed-form integral of the free-space dyadic over the sphere of the
/// given volume centered at the singularity; the result is a multiple of
/// the identity, L(a) = (2 e^{ika}(1 - ika) - 3) / (3 k^2).
pub fn equivalent_sphere_integral(k: f64, volume: f64) -> C {
    let a = (3.0 * volume / (4.0 * PI)).cbrt();
    let e = (C::i() * (k * a)).exp() * C::new(1.0, -k * a);
    (2.0 * e - 3.0) / (3.0 * k * k)
}

/// Cell-pair kernel of the volume-integral system.
struct VolumeKernel {
    ev: GreensEvaluator,
    min_order: u32,
    z_switch: f64,
    t: f64,
    k: f64,
}

impl VolumeKernel {
    fn new(base: &GreensEvaluator) -> Result<VolumeKernel> {
        let wg = base.wg;
        let z_switch = NEAR_SWITCH_FACTOR * wg.a.max(wg.b);
        let order = adaptive_order(&wg, z_switch)
            .max(greens::default_max_order(&wg))
            .max(base.max_order)
            .min(MAX_ORDER_LIMIT);
        let ev = GreensEvaluator::new(wg, order, base.separation_floor)?;
        Ok(VolumeKernel {
            ev,
            min_order: greens::default_max_order(&wg),
            z_switch,
            t: 0.5 * z_switch,
            k: wg.k,
        })
    }

    /// Guide dyadic between two distinct cell centers.
    fn pair(&self, x: Point, y: Point) -> Dyadic {
        let dz = (x[2] - y[2]).abs();
        if dz >= self.z_switch {
            let order = adaptive_order(&self.ev.wg, dz).clamp(self.min_order, self.ev.max_order);
            self.ev.eval_series(x, y, order)
        } else {
            let g0 = greens::eval_freespace(self.k, x, y)
                .expect("distinct cell centers are never coincident");
            let rem = self.remainder(x, y);
            let mut out = g0;
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] += rem[i][j];
                }
            }
            out
        }
    }

    /// Smooth remainder (guide minus free space) at a nearly coplanar pair,
    /// linearly interpolated in the signed axial difference from two
    /// symmetric offset evaluations at separation 2t, where the mode sum
    /// converges. Exactly symmetric under swapping x and y.
    fn remainder(&self, x: Point, y: Point) -> Dyadic {
        let zb = 0.5 * (x[2] + y[2]);
        let dz = x[2] - y[2];
        let up_x = [x[0], x[1], zb + self.t];
        let dn_y = [y[0], y[1], zb - self.t];
        let dn_x = [x[0], x[1], zb - self.t];
        let up_y = [y[0], y[1], zb + self.t];
        let j_up = self.j_at(up_x, dn_y);
        let j_dn = self.j_at(dn_x, up_y);
        let wp = 0.5 * (1.0 + dz / (2.0 * self.t));
        let wm = 0.5 * (1.0 - dz / (2.0 * self.t));
        let mut out = [[C::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = wp * j_up[i][j] + wm * j_dn[i][j];
            }
        }
        out
    }

    fn j_at(&self, x: Point, y: Point) -> Dyadic {
        let ge = self.ev.eval_series(x, y, self.ev.max_order);
        let g0 = greens::eval_freespace(self.k, x, y).expect("offset points are separated");
        let mut out = ge;
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] -= g0[i][j];
            }
        }
        out
    }

    /// Integral of the guide dyadic over a cell, observed from its own
    /// center: equivalent-sphere closed form plus remainder times volume.
    fn self_integral(&self, center: Point, volume: f64) -> Dyadic {
        let l = equivalent_sphere_integral(self.k, volume);
        let rem = self.remainder(center, center);
        let mut out = [[C::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = rem[i][j] * volume;
            }
            out[i][i] += l;
        }
        out
    }
}

/// Factorized dense collocation system over the support cells.
pub struct LsFactorized {
    pub cells: Vec<Cell>,
    /// The collocation matrix I - k^2 G diag(eps-1) vol.
    pub matrix: Mat,
    lu: LuFactors,
    k2: f64,
}

/// Assemble and factorize the volume-integral system. Requires at least one
/// support cell.
pub fn assemble_ls_system(ev: &GreensEvaluator, grid: &VoxelGrid) -> Result<LsFactorized> {
    let cells = contrast_cells(grid);
    if cells.is_empty() {
        return Err(Error::InvalidParameter(
            "volume-integral system needs at least one support cell".into(),
        ));
    }
    let kernel = VolumeKernel::new(ev)?;
    let k2 = ev.wg.k * ev.wg.k;
    let nc = cells.len();
    let n = 3 * nc;
    let mut a = Mat::zeros(n, n);
    // One parallel task per row block; each fills its three rows serially so
    // the result is independent of the thread schedule.
    a.data
        .par_chunks_mut(3 * n)
        .enumerate()
        .for_each(|(i, rows)| {
            let xi = cells[i].center;
            for (j, cj) in cells.iter().enumerate() {
                let block = if i == j {
                    kernel.self_integral(cj.center, cj.volume)
                } else {
                    let g = kernel.pair(xi, cj.center);
                    let mut b = [[C::new(0.0, 0.0); 3]; 3];
                    for p in 0..3 {
                        for q in 0..3 {
                            b[p][q] = g[p][q] * cj.volume;
                        }
                    }
                    b
                };
                let s = cj.contrast * k2;
                for p in 0..3 {
                    for q in 0..3 {
                        rows[p * n + 3 * j + q] = -(s * block[p][q]);
                    }
                }
            }
            for p in 0..3 {
                rows[p * n + 3 * i + p] += 1.0;
            }
        });
    let lu = lu_factor(a.clone())
        .map_err(|e| Error::Numeric(format!("volume-integral system is singular ({e})")))?;
    Ok(LsFactorized {
        cells,
        matrix: a,
        lu,
        k2,
    })
}

impl LsFactorized {
    pub fn n_unknowns(&self) -> usize {
        3 * self.cells.len()
    }

    /// Solve for one flat right-hand side (length 3 x cells).
    pub fn solve_flat(&self, b: &[C]) -> Result<Vec<C>> {
        if b.len() != self.n_unknowns() {
            return Err(Error::InvalidParameter(format!(
                "right-hand side length {} does not match {} unknowns",
                b.len(),
                self.n_unknowns()
            )));
        }
        if !b.iter().all(|z| z.is_finite()) {
            return Err(Error::InvalidParameter(
                "incident field is not finite on cells".into(),
            ));
        }
        Ok(self.lu.solve_vec(b))
    }

    /// Relative residual ||A w - b|| / ||b|| (absolute when b = 0).
    pub fn relative_residual(&self, w: &[C], b: &[C]) -> f64 {
        let aw = self.matrix.matvec(w);
        let mut num = 0.0;
        let mut den = 0.0;
        for (awi, bi) in aw.iter().zip(b) {
            num += (awi - bi).norm_sqr();
            den += bi.norm_sqr();
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            num.sqrt()
        }
    }
}

/// Total field at the support cells.
pub struct LsSolution {
    pub cells: Vec<Cell>,
    pub w: Vec<CVec3>,
    pub residual: f64,
}

/// Solve the Lippmann-Schwinger system for one incident field. An empty
/// support is the trivial case: the total field equals the incident field
/// everywhere and the solution carries no cells.
pub fn solve_lippmann_schwinger<F>(
    ev: &GreensEvaluator,
    grid: &VoxelGrid,
    incident: F,
) -> Result<LsSolution>
where
    F: Fn(Point) -> Result<CVec3>,
{
    if contrast_cells(grid).is_empty() {
        return Ok(LsSolution {
            cells: Vec::new(),
            w: Vec::new(),
            residual: 0.0,
        });
    }
    let fact = assemble_ls_system(ev, grid)?;
    let b = stack_incident(&fact.cells, &incident)?;
    let w = fact.solve_flat(&b)?;
    let residual = fact.relative_residual(&w, &b);
    Ok(LsSolution {
        cells: fact.cells,
        w: unflatten(&w),
        residual,
    })
}

fn stack_incident<F>(cells: &[Cell], incident: &F) -> Result<Vec<C>>
where
    F: Fn(Point) -> Result<CVec3>,
{
    let mut b = Vec::with_capacity(3 * cells.len());
    for c in cells {
        let u = incident(c.center)?;
        if !u.iter().all(|z| z.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "incident field is not finite at cell center ({}, {}, {})",
                c.center[0], c.center[1], c.center[2]
            )));
        }
        b.extend_from_slice(&u);
    }
    Ok(b)
}

fn unflatten(w: &[C]) -> Vec<CVec3> {
    w.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// Single-scattering (Born) field at an exterior point.
pub fn born_scatter<F>(
    ev: &GreensEvaluator,
    grid: &VoxelGrid,
    incident: F,
    x_out: Point,
) -> Result<CVec3>
where
    F: Fn(Point) -> Result<CVec3>,
{
    let cells = contrast_cells(grid);
    let mut acc = [C::new(0.0, 0.0); 3];
    for c in &cells {
        let u = incident(c.center)?;
        let g = ev.eval(x_out, c.center)?;
        let gu = dyadic_apply_c(&g, &u);
        let f = c.contrast * c.volume;
        for p in 0..3 {
            acc[p] += gu[p] * f;
        }
    }
    let k2 = ev.wg.k * ev.wg.k;
    Ok([acc[0] * k2, acc[1] * k2, acc[2] * k2])
}

/// Re-radiated (scattered) field of a solved system at an exterior point.
pub fn scattered_at(ev: &GreensEvaluator, sol: &LsSolution, x_out: Point) -> Result<CVec3> {
    let mut acc = [C::new(0.0, 0.0); 3];
    for (c, w) in sol.cells.iter().zip(&sol.w) {
        let g = ev.eval(x_out, c.center)?;
        let gw = dyadic_apply_c(&g, w);
        let f = c.contrast * c.volume;
        for p in 0..3 {
            acc[p] += gw[p] * f;
        }
    }
    let k2 = ev.wg.k * ev.wg.k;
    Ok([acc[0] * k2, acc[1] * k2, acc[2] * k2])
}

/// Tensor Gauss-Legendre transducer grid on the plane x3 = r.
#[derive(Clone, Debug)]
pub struct TransducerArray {
    pub r: f64,
    pub n_per_side: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

pub fn make_array(wg: &Waveguide, r: f64, n_per_side: usize) -> Result<TransducerArray> {
    if n_per_side < 1 {
        return Err(Error::InvalidParameter(
            "array needs at least one point per side".into(),
        ));
    }
    if !r.is_finite() {
        return Err(Error::InvalidParameter(
            "array plane position must be finite".into(),
        ));
    }
    let (nodes, w) = gauss_legendre_unit(n_per_side);
    let mut points = Vec::with_capacity(n_per_side * n_per_side);
    let mut weights = Vec::with_capacity(n_per_side * n_per_side);
    for j in 0..n_per_side {
        for i in 0..n_per_side {
            points.push([wg.a * nodes[i], wg.b * nodes[j], r]);
            weights.push((wg.a * w[i]) * (wg.b * w[j]));
        }
    }
    Ok(TransducerArray {
        r,
        n_per_side,
        points,
        weights,
    })
}

/// Multistatic scattered-field matrix over an array; rows are receivers
/// (point, component), columns are sources (point, polarization). When
/// `tangential` is set (the standard convention), each receiver 3-vector is
/// stored as nu0 x u_s = (-u2, u1, 0).
#[derive(Clone, Debug)]
pub struct MultistaticData {
    pub k: f64,
    pub r: f64,
    pub p_count: usize,
    pub eta: f64,
    pub seed: u64,
    pub tangential: bool,
    pub entries: Mat,
}

/// Synthesize the full multistatic matrix: one Lippmann-Schwinger solve per
/// (source point, polarization), re-radiated to every receiver.
pub fn synthesize_near_field(
    ev: &GreensEvaluator,
    grid: &VoxelGrid,
    array: &TransducerArray,
    tangential: bool,
) -> Result<MultistaticData> {
    let p = array.points.len();
    let meta = |entries: Mat| MultistaticData {
        k: ev.wg.k,
        r: array.r,
        p_count: p,
        eta: 0.0,
        seed: 0,
        tangential,
        entries,
    };
    let cells = contrast_cells(grid);
    if cells.is_empty() {
        return Ok(meta(Mat::zeros(3 * p, 3 * p)));
    }
    let zmin = cells
        .iter()
        .map(|c| c.center[2])
        .fold(f64::INFINITY, f64::min);
    let zmax = cells
        .iter()
        .map(|c| c.center[2])
        .fold(f64::NEG_INFINITY, f64::max);
    if array.r >= zmin - ev.separation_floor && array.r <= zmax + ev.separation_floor {
        return Err(Error::InvalidParameter(format!(
            "array plane x3 = {} is not separated from the scatterer support [{zmin}, {zmax}]",
            array.r
        )));
    }
    let fact = assemble_ls_system(ev, grid)?;
    // Radiation table G(array point, cell center); by reciprocity its
    // transpose is the incident-field table G(cell, array point).
    let rad: Vec<Vec<Dyadic>> = array
        .points
        .par_iter()
        .map(|&xp| {
            fact.cells
                .iter()
                .map(|c| ev.eval(xp, c.center))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let k2 = fact.k2;
    let nc = fact.cells.len();
    let columns: Vec<Vec<C>> = (0..3 * p)
        .into_par_iter()
        .map(|col| {
            let j = col / 3;
            let s = col % 3;
            // Incident field at cells: G(c, y_j) e_s = row s of G(y_j, c).
            let mut b = vec![C::new(0.0, 0.0); 3 * nc];
            for (ci, _) in fact.cells.iter().enumerate() {
                for q in 0..3 {
                    b[3 * ci + q] = rad[j][ci][s][q];
                }
            }
            let w = fact.lu.solve_vec(&b);
            let mut column = vec![C::new(0.0, 0.0); 3 * p];
            for i in 0..p {
                let mut u = [C::new(0.0, 0.0); 3];
                for (ci, c) in fact.cells.iter().enumerate() {
                    let wc = [w[3 * ci], w[3 * ci + 1], w[3 * ci + 2]];
                    let gw = dyadic_apply_c(&rad[i][ci], &wc);
                    let f = c.contrast * c.volume;
                    for q in 0..3 {
                        u[q] += gw[q] * f;
                    }
                }
                for q in 0..3 {
                    u[q] *= k2;
                }
                if tangential {
                    u = nu0_cross(u);
                }
                column[3 * i..3 * i + 3].copy_from_slice(&u);
            }
            column
        })
        .collect();
    let mut entries = Mat::zeros(3 * p, 3 * p);
    for (col, data) in columns.iter().enumerate() {
        for (row, &v) in data.iter().enumerate() {
            *entries.at_mut(row, col) = v;
        }
    }
    Ok(meta(entries))
}

/// One uniform draw in [0, 1) from a counter-based generator: the counter
/// is folded into the seed by a Weyl step and finished with the SplitMix64
/// mixer; the top 53 bits form the mantissa.
fn counter_uniform(seed: u64, counter: u64) -> f64 {
    let mut z = seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / 9_007_199_254_740_992.0
}

/// Multiplicative noise: every entry is scaled by 1 + eta xi with xi drawn
/// uniformly from (-1, 1) by a seeded counter generator, so the result is
/// independent of evaluation order and thread count.
pub fn add_noise(d: &MultistaticData, eta: f64, seed: u64) -> Result<MultistaticData> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise level must be non-negative, got {eta}"
        )));
    }
    let rows = d.entries.rows;
    let cols = d.entries.cols;
    let mut entries = d.entries.clone();
    for row in 0..rows {
        for col in 0..cols {
            let xi = 2.0 * counter_uniform(seed, (row * cols + col) as u64) - 1.0;
            *entries.at_mut(row, col) = d.entries.at(row, col) * (1.0 + eta * xi);
        }
    }
    Ok(MultistaticData {
        k: d.k,
        r: d.r,
        p_count: d.p_count,
        eta,
        seed,
        tangential: d.tangential,
        entries,
    })
}

impl MultistaticData {
    /// Serialize in the NFM v1 text format: a single header line
    /// `NFM v1 rows=<R> cols=<C> k=<k> r=<r> P=<P> eta=<eta> seed=<seed>`,
    /// then R lines of C entries `<re> <im>` joined by `;`, row-major, with
    /// shortest round-trip decimal formatting. Byte-exact across platforms
    /// and thread counts.
    pub fn to_nfm_string(&self) -> String {
        let rows = self.entries.rows;
        let cols = self.entries.cols;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "NFM v1 rows={rows} cols={cols} k={} r={} P={} eta={} seed={}",
            self.k, self.r, self.p_count, self.eta, self.seed
        );
        for row in 0..rows {
            for col in 0..cols {
                if col > 0 {
                    out.push(';');
                }
                let z = self.entries.at(row, col);
                let _ = write!(out, "{} {}", z.re, z.im);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_nfm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_nfm_string())?;
        Ok(())
    }

    pub fn read_nfm(path: &Path) -> Result<MultistaticData> {
        let file = std::fs::File::open(path)?;
        let mut text = String::new();
        BufReader::new(file).read_to_string(&mut text)?;
        MultistaticData::from_nfm_string(&text)
    }

    pub fn from_nfm_string(text: &str) -> Result<MultistaticData> {
        let malformed = |line: usize, message: String| Error::MalformedFile { line, message };
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| malformed(1, "empty file".into()))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        if tokens.len() != 9 || tokens[0] != "NFM" || tokens[1] != "v1" {
            return Err(malformed(
                1,
                format!("expected `NFM v1` header with 7 fields, got `{header}`"),
            ));
        }
        let field = |idx: usize, key: &str| -> Result<&str> {
            let tok = tokens[idx];
            tok.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .ok_or_else(|| malformed(1, format!("expected `{key}=<value>`, got `{tok}`")))
        };
        let rows: usize = field(2, "rows")?
            .parse()
            .map_err(|e| malformed(1, format!("bad rows: {e}")))?;
        let cols: usize = field(3, "cols")?
            .parse()
            .map_err(|e| malformed(1, format!("bad cols: {e}")))?;
        let k: f64 = field(4, "k")?
            .parse()
            .map_err(|e| malformed(1, format!("bad k: {e}")))?;
        let r: f64 = field(5, "r")?
            .parse()
            .map_err(|e| malformed(1, format!("bad r: {e}")))?;
        let p_count: usize = field(6, "P")?
            .parse()
            .map_err(|e| malformed(1, format!("bad P: {e}")))?;
        let eta: f64 = field(7, "eta")?
            .parse()
            .map_err(|e| malformed(1, format!("bad eta: {e}")))?;
        let seed: u64 = field(8, "seed")?
            .parse()
            .map_err(|e| malformed(1, format!("bad seed: {e}")))?;
        if rows != 3 * p_count || cols != 3 * p_count {
            return Err(malformed(
                1,
                format!("rows/cols {rows}x{cols} must equal 3P = {}", 3 * p_count),
            ));
        }
        let mut entries = Mat::zeros(rows, cols);
        let mut row = 0usize;
        for (lineno, line) in lines.enumerate() {
            let lineno = lineno + 2;
            if row >= rows {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(malformed(
                    lineno,
                    format!("expected {rows} data rows, found more"),
                ));
            }
            let mut col = 0usize;
            for entry in line.split(';') {
                if col >= cols {
                    return Err(malformed(
                        lineno,
                        format!("row has more than {cols} entries"),
                    ));
                }
                let mut parts = entry.split_whitespace();
                let (re, im) = match (parts.next(), parts.next(), parts.next()) {
                    (Some(re), Some(im), None) => (re, im),
                    _ => {
                        return Err(malformed(
                            lineno,
                            format!("entry {} is not a `<re> <im>` pair: `{entry}`", col + 1),
                        ))
                    }
                };
                let re: f64 = re
                    .parse()
                    .map_err(|e| malformed(lineno, format!("bad real part: {e}")))?;
                let im: f64 = im
                    .parse()
                    .map_err(|e| malformed(lineno, format!("bad imaginary part: {e}")))?;
                if !re.is_finite() || !im.is_finite() {
                    return Err(malformed(lineno, "entries must be finite".into()));
                }
                *entries.at_mut(row, col) = C::new(re, im);
                col += 1;
            }
            if col != cols {
                return Err(malformed(
                    lineno,
                    format!("expected {cols} entries, got {col}"),
                ));
            }
            row += 1;
        }
        if row != rows {
            return Err(Error::MalformedFile {
                line: row + 2,
                message: format!("expected {rows} data rows, got {row}"),
            });
        }
        Ok(MultistaticData {
            k,
            r,
            p_count,
            eta,
            seed,
            tangential: true,
            entries,
        })
    }
}
