//! Vector waveguide modes, tangential trace algebra on a cross-section,
//! trace-space norms, and the modal Dirichlet-to-Neumann map.
//!
//! Tangential fields on a section are expanded in the orthogonal basis
//! {grad u_m} x {rot grad v_n} (the `Gradient` basis). Applying the DtN map
//! rotates into {rot grad u_m} x {grad v_n} (`RotatedGradient`), where the
//! map is diagonal. rot denotes the 90-degree rotation (f1,f2) -> (f2,-f1).

use num_complex::Complex64;

use crate::quad::gauss_legendre_unit;
use crate::spectra::{ModeIndex, Waveguide};
use crate::{CVec3, Error, Point, Result};

type C = Complex64;

/// Scalar family feeding a vector mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Neumann,
    Dirichlet,
}

/// Axial travel direction; MinusZ negates the axial constant everywhere it
/// appears in the mode expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    PlusZ,
    MinusZ,
}

/// A vector mode built from one scalar eigenpair and one axial constant.
#[derive(Clone, Copy, Debug)]
pub struct VectorMode {
    wg: Waveguide,
    pub family: Family,
    pub ix: ModeIndex,
    /// lambda^2 (Neumann) or mu^2 (Dirichlet).
    pub eigenvalue: f64,
    /// h or g on the nonnegative branch; the direction sign is applied at
    /// evaluation time.
    pub axial: C,
    pub direction: Direction,
}

impl VectorMode {
    /// TE-type mode from a Neumann eigenpair.
    pub fn te(wg: Waveguide, ix: ModeIndex, direction: Direction) -> Result<VectorMode> {
        if ix.m == 0 && ix.n == 0 {
            return Err(Error::InvalidParameter(
                "Neumann mode (0,0) is the excluded constant eigenfunction".into(),
            ));
        }
        Ok(VectorMode {
            wg,
            family: Family::Neumann,
            ix,
            eigenvalue: wg.neumann_eigenvalue(ix),
            axial: wg.neumann_axial(ix)?,
            direction,
        })
    }

    /// TM-type mode from a Dirichlet eigenpair.
    pub fn tm(wg: Waveguide, ix: ModeIndex, direction: Direction) -> Result<VectorMode> {
        if ix.m == 0 || ix.n == 0 {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet mode indices must be positive, got ({}, {})",
                ix.m, ix.n
            )));
        }
        Ok(VectorMode {
            wg,
            family: Family::Dirichlet,
            ix,
            eigenvalue: wg.dirichlet_eigenvalue(ix),
            axial: wg.dirichlet_axial(ix)?,
            direction,
        })
    }

    fn scalar(&self, x1: f64, x2: f64) -> f64 {
        match self.family {
            Family::Neumann => self.wg.neumann_fn(self.ix, x1, x2),
            Family::Dirichlet => self.wg.dirichlet_fn(self.ix, x1, x2),
        }
    }

    fn scalar_grad(&self, x1: f64, x2: f64) -> [f64; 2] {
        match self.family {
            Family::Neumann => self.wg.neumann_grad(self.ix, x1, x2),
            Family::Dirichlet => self.wg.dirichlet_grad(self.ix, x1, x2),
        }
    }

    /// Axial constant with the direction sign applied.
    pub fn signed_axial(&self) -> C {
        match self.direction {
            Direction::PlusZ => self.axial,
            Direction::MinusZ => -self.axial,
        }
    }

    fn axial_exp(&self, x3: f64) -> C {
        (C::i() * self.signed_axial() * x3).exp()
    }

    /// M-form evaluation: (d2 f, -d1 f, 0) e^{i h' x3} with the mode's scalar f.
    pub fn eval_m(&self, x: Point) -> CVec3 {
        let g = self.scalar_grad(x[0], x[1]);
        let e = self.axial_exp(x[2]);
        [C::from(g[1]) * e, C::from(-g[0]) * e, C::new(0.0, 0.0)]
    }

    /// N-form evaluation: (i g' d1 f, i g' d2 f, mu^2 f) e^{i g' x3} / k.
    pub fn eval_n(&self, x: Point) -> CVec3 {
        let gr = self.scalar_grad(x[0], x[1]);
        let f = self.scalar(x[0], x[1]);
        let ia = C::i() * self.signed_axial();
        let e = self.axial_exp(x[2]) / self.wg.k;
        [
            ia * gr[0] * e,
            ia * gr[1] * e,
            C::from(self.eigenvalue * f) * e,
        ]
    }

    /// curl of the M-form; identically k times the N-form of the same mode.
    pub fn curl_m(&self, x: Point) -> CVec3 {
        let n = self.eval_n(x);
        let k = self.wg.k;
        [n[0] * k, n[1] * k, n[2] * k]
    }

    /// curl of the N-form; identically k times the M-form of the same mode.
    pub fn curl_n(&self, x: Point) -> CVec3 {
        let m = self.eval_m(x);
        let k = self.wg.k;
        [m[0] * k, m[1] * k, m[2] * k]
    }
}

/// Basis in which a tangential coefficient vector is expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceBasis {
    /// {grad u_m} for alpha, {rot grad v_n} for beta.
    Gradient,
    /// {rot grad u_m} for alpha, {grad v_n} for beta (DtN image basis).
    RotatedGradient,
}

/// Coefficients of a tangential field on a section in a finite mode basis.
#[derive(Clone, Debug)]
pub struct TraceCoefficients {
    pub alpha: Vec<C>,
    pub beta: Vec<C>,
    pub basis: TraceBasis,
}

impl TraceCoefficients {
    pub fn zeros(te: usize, tm: usize, basis: TraceBasis) -> Self {
        TraceCoefficients {
            alpha: vec![C::new(0.0, 0.0); te],
            beta: vec![C::new(0.0, 0.0); tm],
            basis,
        }
    }
}

/// Trace norm selector.
#[derive(Clone, Copy, Debug)]
pub enum TraceNorm {
    /// Natural norm for nu x E traces.
    HdivMinusHalf,
    /// Natural norm for tangential-component traces.
    HcurlMinusHalf,
    /// Sobolev scale H^t on the section.
    Ht(f64),
}

/// Weighted norm over (coefficient, eigenvalue) pairs; eigenvalues are the
/// squared transverse wavenumbers lambda^2 / mu^2.
pub fn weighted_trace_norm(alphas: &[(C, f64)], betas: &[(C, f64)], which: TraceNorm) -> f64 {
    let (wa, wb): (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) = match which {
        TraceNorm::HcurlMinusHalf => (Box::new(|l: f64| l), Box::new(|l: f64| l.powi(3))),
        TraceNorm::HdivMinusHalf => (Box::new(|l: f64| l.powi(3)), Box::new(|l: f64| l)),
        TraceNorm::Ht(t) => {
            let p = 2.0 * (t + 1.0);
            (
                Box::new(move |l: f64| l.powf(p)),
                Box::new(move |l: f64| l.powf(p)),
            )
        }
    };
    let mut s = 0.0;
    for &(c, ev) in alphas {
        s += c.norm_sqr() * wa(ev.sqrt());
    }
    for &(c, ev) in betas {
        s += c.norm_sqr() * wb(ev.sqrt());
    }
    s.sqrt()
}

/// DtN side: Plus maps traces of fields outgoing toward +z, Minus toward -z.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Finite-dimensional trace space on a section: retained mode lists and the
/// projection quadrature.
#[derive(Clone, Debug)]
pub struct TraceSpace {
    pub wg: Waveguide,
    pub te: Vec<ModeIndex>,
    pub tm: Vec<ModeIndex>,
    quad_points: usize,
}

impl TraceSpace {
    /// Retain all modes of Fourier order <= max_order in both families.
    /// Default quadrature is 2*max_order + 12 points per axis, enough to
    /// integrate products of retained eigenfunctions to machine precision.
    pub fn by_order(wg: Waveguide, max_order: u32) -> TraceSpace {
        TraceSpace {
            wg,
            te: wg.neumann_indices(max_order),
            tm: wg.dirichlet_indices(max_order),
            quad_points: (2 * max_order + 12) as usize,
        }
    }

    pub fn with_quadrature(mut self, points: usize) -> TraceSpace {
        assert!(points >= 1);
        self.quad_points = points;
        self
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.te.len(), self.tm.len())
    }

    /// Norm of a coefficient vector. Basis rotation preserves lengths, so the
    /// same weights serve both bases.
    pub fn norm(&self, c: &TraceCoefficients, which: TraceNorm) -> f64 {
        let alphas: Vec<(C, f64)> = c
            .alpha
            .iter()
            .zip(&self.te)
            .map(|(&coef, &ix)| (coef, self.wg.neumann_eigenvalue(ix)))
            .collect();
        let betas: Vec<(C, f64)> = c
            .beta
            .iter()
            .zip(&self.tm)
            .map(|(&coef, &ix)| (coef, self.wg.dirichlet_eigenvalue(ix)))
            .collect();
        weighted_trace_norm(&alphas, &betas, which)
    }

    /// Modal DtN map: for a trace in the Gradient basis, returns the
    /// tangential curl trace of the outgoing solution in the RotatedGradient
    /// basis. Diagonal: alpha_m -> -i h_m alpha_m, beta_n -> i k^2/g_n beta_n,
    /// with both signs flipped on the Minus side.
    pub fn dtn_apply(&self, c: &TraceCoefficients, side: Side) -> Result<TraceCoefficients> {
        if c.basis != TraceBasis::Gradient {
            return Err(Error::InvalidParameter(
                "DtN input must be expressed in the Gradient trace basis".into(),
            ));
        }
        let sign = match side {
            Side::Plus => C::new(1.0, 0.0),
            Side::Minus => C::new(-1.0, 0.0),
        };
        let k2 = self.wg.k * self.wg.k;
        let mut out =
            TraceCoefficients::zeros(self.te.len(), self.tm.len(), TraceBasis::RotatedGradient);
        for (slot, (&coef, &ix)) in out.alpha.iter_mut().zip(c.alpha.iter().zip(&self.te)) {
            let h = self.wg.neumann_axial(ix)?;
            *slot = sign * (-C::i()) * h * coef;
        }
        for (slot, (&coef, &ix)) in out.beta.iter_mut().zip(c.beta.iter().zip(&self.tm)) {
            let g = self.wg.dirichlet_axial(ix)?;
            *slot = sign * C::i() * k2 / g * coef;
        }
        Ok(out)
    }

    /// Project a tangential field on the section onto the requested basis by
    /// tensor Gauss-Legendre quadrature. The basis functions are orthogonal
    /// with squared norms equal to the eigenvalues.
    pub fn project(
        &self,
        field: &dyn Fn(f64, f64) -> [C; 2],
        basis: TraceBasis,
    ) -> TraceCoefficients {
        let (nodes, weights) = gauss_legendre_unit(self.quad_points);
        let wg = self.wg;
        // Cache field samples on the tensor grid.
        let samples: Vec<[C; 2]> = nodes
            .iter()
            .flat_map(|&xi| nodes.iter().map(move |&yj| (xi, yj)))
            .map(|(xi, yj)| field(xi * wg.a, yj * wg.b))
            .collect();
        let jac = wg.a * wg.b;
        let mut out = TraceCoefficients::zeros(self.te.len(), self.tm.len(), basis);
        let np = self.quad_points;
        let accumulate = |bfun: &dyn Fn(f64, f64) -> [f64; 2], eigenvalue: f64| -> C {
            let mut s = C::new(0.0, 0.0);
            for (i, &xi) in nodes.iter().enumerate() {
                for (j, &yj) in nodes.iter().enumerate() {
                    let f = samples[i * np + j];
                    let bv = bfun(xi * wg.a, yj * wg.b);
                    s += (f[0] * bv[0] + f[1] * bv[1]) * (weights[i] * weights[j]);
                }
            }
            s * jac / eigenvalue
        };
        for (slot, &ix) in out.alpha.iter_mut().zip(&self.te) {
            let ev = wg.neumann_eigenvalue(ix);
            *slot = match basis {
                TraceBasis::Gradient => accumulate(&|x1, x2| wg.neumann_grad(ix, x1, x2), ev),
                TraceBasis::RotatedGradient => accumulate(
                    &|x1, x2| {
                        let g = wg.neumann_grad(ix, x1, x2);
                        [g[1], -g[0]]
                    },
                    ev,
                ),
            };
        }
        for (slot, &ix) in out.beta.iter_mut().zip(&self.tm) {
            let ev = wg.dirichlet_eigenvalue(ix);
            *slot = match basis {
                TraceBasis::Gradient => accumulate(
                    &|x1, x2| {
                        let g = wg.dirichlet_grad(ix, x1, x2);
                        [g[1], -g[0]]
                    },
                    ev,
                ),
                TraceBasis::RotatedGradient => {
                    accumulate(&|x1, x2| wg.dirichlet_grad(ix, x1, x2), ev)
                }
            };
        }
        out
    }
}

/// nu0 x F with nu0 = e3: (-F2, F1, 0).
pub fn nu0_cross(f: CVec3) -> CVec3 {
    [-f[1], f[0], C::new(0.0, 0.0)]
}
