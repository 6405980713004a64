//! Cross-section eigenpairs of the rectangular guide.
//!
//! The section (0,a) x (0,b) carries two scalar families: Neumann
//! eigenfunctions u_mn (cosine products, (0,0) excluded) feeding the TE
//! vector modes, and Dirichlet eigenfunctions v_mn (sine products, m,n >= 1)
//! feeding the TM modes. Both are L2-normalized over the section. The axial
//! wavenumber sqrt(k^2 - eigenvalue) takes the branch with nonnegative real
//! and imaginary parts, so propagating modes travel and evanescent modes
//! decay in the direction of the mode's superscript.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Relative half-width of the rejected band around a modal cutoff.
pub const CUTOFF_GUARD: f64 = 1e-9;

/// Transverse mode index. Neumann modes allow zeros (not both); Dirichlet
/// modes require both entries positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub m: u32,
    pub n: u32,
}

/// Rectangular guide cross-section with the operating wavenumber.
#[derive(Clone, Copy, Debug)]
pub struct Waveguide {
    pub a: f64,
    pub b: f64,
    pub k: f64,
}

impl Waveguide {
    pub fn new(a: f64, b: f64, k: f64) -> Result<Waveguide> {
        if !(a > 0.0) || !a.is_finite() || !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cross-section sides must be positive and finite, got a = {a}, b = {b}"
            )));
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "wavenumber must be positive and finite, got k = {k}"
            )));
        }
        Ok(Waveguide { a, b, k })
    }

    /// Neumann eigenvalue lambda^2 = pi^2 (m^2/a^2 + n^2/b^2).
    pub fn neumann_eigenvalue(&self, ix: ModeIndex) -> f64 {
        let (m, n) = (ix.m as f64, ix.n as f64);
        PI * PI * (m * m / (self.a * self.a) + n * n / (self.b * self.b))
    }

    /// Dirichlet eigenvalue mu^2; same formula, different admissible indices.
    pub fn dirichlet_eigenvalue(&self, ix: ModeIndex) -> f64 {
        self.neumann_eigenvalue(ix)
    }

    fn neumann_gamma(&self, ix: ModeIndex) -> f64 {
        let em = if ix.m == 0 { 1.0 } else { 2.0 };
        let en = if ix.n == 0 { 1.0 } else { 2.0 };
        (em * en / (self.a * self.b)).sqrt()
    }

    /// u_mn(x1, x2), L2-normalized over the section.
    pub fn neumann_fn(&self, ix: ModeIndex, x1: f64, x2: f64) -> f64 {
        let g = self.neumann_gamma(ix);
        g * (ix.m as f64 * PI * x1 / self.a).cos() * (ix.n as f64 * PI * x2 / self.b).cos()
    }

    /// Transverse gradient of u_mn.
    pub fn neumann_grad(&self, ix: ModeIndex, x1: f64, x2: f64) -> [f64; 2] {
        let g = self.neumann_gamma(ix);
        let km = ix.m as f64 * PI / self.a;
        let kn = ix.n as f64 * PI / self.b;
        [
            -g * km * (km * x1).sin() * (kn * x2).cos(),
            -g * kn * (km * x1).cos() * (kn * x2).sin(),
        ]
    }

    /// v_mn(x1, x2), L2-normalized over the section.
    pub fn dirichlet_fn(&self, ix: ModeIndex, x1: f64, x2: f64) -> f64 {
        let g = 2.0 / (self.a * self.b).sqrt();
        g * (ix.m as f64 * PI * x1 / self.a).sin() * (ix.n as f64 * PI * x2 / self.b).sin()
    }

    /// Transverse gradient of v_mn.
    pub fn dirichlet_grad(&self, ix: ModeIndex, x1: f64, x2: f64) -> [f64; 2] {
        let g = 2.0 / (self.a * self.b).sqrt();
        let km = ix.m as f64 * PI / self.a;
        let kn = ix.n as f64 * PI / self.b;
        [
            g * km * (km * x1).cos() * (kn * x2).sin(),
            g * kn * (km * x1).sin() * (kn * x2).cos(),
        ]
    }

    /// sqrt(k^2 - eigenvalue) on the branch Re >= 0, Im >= 0. Errors inside
    /// the guard band around cutoff, where the modal expansion degenerates.
    fn axial_wavenumber(
        &self,
        eigenvalue: f64,
        ix: ModeIndex,
        family: &'static str,
    ) -> Result<Complex64> {
        let k2 = self.k * self.k;
        let w = k2 - eigenvalue;
        if w.abs() < CUTOFF_GUARD * k2 {
            return Err(Error::AtCutoff {
                m: ix.m,
                n: ix.n,
                family,
                k: self.k,
            });
        }
        if w > 0.0 {
            Ok(Complex64::new(w.sqrt(), 0.0))
        } else {
            Ok(Complex64::new(0.0, (-w).sqrt()))
        }
    }

    /// h_mn for the TE family.
    pub fn neumann_axial(&self, ix: ModeIndex) -> Result<Complex64> {
        self.axial_wavenumber(self.neumann_eigenvalue(ix), ix, "Neumann")
    }

    /// g_mn for the TM family.
    pub fn dirichlet_axial(&self, ix: ModeIndex) -> Result<Complex64> {
        self.axial_wavenumber(self.dirichlet_eigenvalue(ix), ix, "Dirichlet")
    }

    /// All Neumann indices with m, n <= max_order, (0,0) excluded, sorted by
    /// ascending eigenvalue with ties broken by (n, m).
    pub fn neumann_indices(&self, max_order: u32) -> Vec<ModeIndex> {
        let mut out = Vec::new();
        for m in 0..=max_order {
            for n in 0..=max_order {
                if m == 0 && n == 0 {
                    continue;
                }
                out.push(ModeIndex { m, n });
            }
        }
        self.sort_by_eigenvalue(&mut out);
        out
    }

    /// All Dirichlet indices with 1 <= m, n <= max_order, same ordering.
    pub fn dirichlet_indices(&self, max_order: u32) -> Vec<ModeIndex> {
        let mut out = Vec::new();
        for m in 1..=max_order {
            for n in 1..=max_order {
                out.push(ModeIndex { m, n });
            }
        }
        self.sort_by_eigenvalue(&mut out);
        out
    }

    fn sort_by_eigenvalue(&self, indices: &mut [ModeIndex]) {
        indices.sort_by(|p, q| {
            let lp = self.neumann_eigenvalue(*p);
            let lq = self.neumann_eigenvalue(*q);
            lp.partial_cmp(&lq)
                .unwrap()
                .then(p.n.cmp(&q.n))
                .then(p.m.cmp(&q.m))
        });
    }

    fn is_propagating(&self, eigenvalue: f64) -> bool {
        self.k * self.k - eigenvalue >= CUTOFF_GUARD * self.k * self.k
    }

    /// Propagating Neumann modes, eigenvalue strictly below k^2 with the
    /// cutoff guard margin, in enumeration order.
    pub fn propagating_neumann(&self) -> Vec<ModeIndex> {
        let max_m = (self.k * self.a / PI).floor() as u32;
        let max_n = (self.k * self.b / PI).floor() as u32;
        let mut out = Vec::new();
        for m in 0..=max_m {
            for n in 0..=max_n {
                if m == 0 && n == 0 {
                    continue;
                }
                let ix = ModeIndex { m, n };
                if self.is_propagating(self.neumann_eigenvalue(ix)) {
                    out.push(ix);
                }
            }
        }
        self.sort_by_eigenvalue(&mut out);
        out
    }

    /// First `count` Neumann modes in the global eigenvalue ordering.
    ///
    /// Enumerates up to an order bound and grows it until every omitted index
    /// provably has a larger eigenvalue than the count-th retained one.
    pub fn enumerate_neumann(&self, count: usize) -> Vec<ModeIndex> {
        assert!(count >= 1, "enumeration needs count >= 1");
        let mut order = (count as f64).sqrt().ceil() as u32 + 1;
        loop {
            let all = self.neumann_indices(order);
            let side = self.a.max(self.b);
            let omitted_floor = PI * PI * ((order + 1) as f64 / side).powi(2);
            if all.len() >= count && self.neumann_eigenvalue(all[count - 1]) < omitted_floor {
                return all[..count].to_vec();
            }
            order *= 2;
        }
    }

    /// First `count` Dirichlet modes in the global eigenvalue ordering.
    pub fn enumerate_dirichlet(&self, count: usize) -> Vec<ModeIndex> {
        assert!(count >= 1, "enumeration needs count >= 1");
        let mut order = (count as f64).sqrt().ceil() as u32 + 1;
        loop {
            let all = self.dirichlet_indices(order);
            let side = self.a.max(self.b);
            let omitted_floor = PI * PI * ((order + 1) as f64 / side).powi(2);
            if all.len() >= count && self.dirichlet_eigenvalue(all[count - 1]) < omitted_floor {
                return all[..count].to_vec();
            }
            order *= 2;
        }
    }

    /// Propagating Dirichlet modes.
    pub fn propagating_dirichlet(&self) -> Vec<ModeIndex> {
        let max_m = (self.k * self.a / PI).floor() as u32;
        let max_n = (self.k * self.b / PI).floor() as u32;
        let mut out = Vec::new();
        for m in 1..=max_m.max(1) {
            for n in 1..=max_n.max(1) {
                let ix = ModeIndex { m, n };
                if self.is_propagating(self.dirichlet_eigenvalue(ix)) {
                    out.push(ix);
                }
            }
        }
        self.sort_by_eigenvalue(&mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::gauss_legendre_unit;

    fn unit_guide(k: f64) -> Waveguide {
        Waveguide::new(1.0, 1.0, k).unwrap()
    }

    #[test]
    fn rejects_nonpositive_geometry() {
        assert!(Waveguide::new(0.0, 1.0, 5.0).is_err());
        assert!(Waveguide::new(1.0, -2.0, 5.0).is_err());
        assert!(Waveguide::new(1.0, 1.0, 0.0).is_err());
        assert!(Waveguide::new(f64::NAN, 1.0, 5.0).is_err());
    }

    #[test]
    fn eigenfunctions_are_orthonormal() {
        let wg = Waveguide::new(1.0, 0.7, 5.0).unwrap();
        let (x, w) = gauss_legendre_unit(24);
        let modes = wg.neumann_indices(4);
        let dmode = wg.dirichlet_indices(4);
        let inner = |f: &dyn Fn(f64, f64) -> f64, g: &dyn Fn(f64, f64) -> f64| -> f64 {
            let mut s = 0.0;
            for (&xi, &wi) in x.iter().zip(&w) {
                for (&yj, &wj) in x.iter().zip(&w) {
                    s += wi * wj * f(xi * wg.a, yj * wg.b) * g(xi * wg.a, yj * wg.b);
                }
            }
            s * wg.a * wg.b
        };
        for (i, &p) in modes.iter().enumerate().take(6) {
            for &q in modes.iter().skip(i).take(6 - i) {
                let s = inner(&|x1, x2| wg.neumann_fn(p, x1, x2), &|x1, x2| {
                    wg.neumann_fn(q, x1, x2)
                });
                let expect = if p == q { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12, "neumann {p:?} {q:?}: {s}");
            }
        }
        for (i, &p) in dmode.iter().enumerate().take(6) {
            for &q in dmode.iter().skip(i).take(6 - i) {
                let s = inner(&|x1, x2| wg.dirichlet_fn(p, x1, x2), &|x1, x2| {
                    wg.dirichlet_fn(q, x1, x2)
                });
                let expect = if p == q { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12, "dirichlet {p:?} {q:?}: {s}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let wg = Waveguide::new(1.3, 0.8, 5.0).unwrap();
        let h = 1e-6;
        let pts = [(0.31, 0.17), (0.9, 0.55), (0.62, 0.71)];
        for ix in [
            ModeIndex { m: 2, n: 1 },
            ModeIndex { m: 0, n: 3 },
            ModeIndex { m: 1, n: 1 },
        ] {
            for &(x1, x2) in &pts {
                if ix.m > 0 || ix.n > 0 {
                    let g = wg.neumann_grad(ix, x1 * wg.a, x2 * wg.b);
                    let d1 = (wg.neumann_fn(ix, x1 * wg.a + h, x2 * wg.b)
                        - wg.neumann_fn(ix, x1 * wg.a - h, x2 * wg.b))
                        / (2.0 * h);
                    let d2 = (wg.neumann_fn(ix, x1 * wg.a, x2 * wg.b + h)
                        - wg.neumann_fn(ix, x1 * wg.a, x2 * wg.b - h))
                        / (2.0 * h);
                    assert!((g[0] - d1).abs() < 1e-5, "{ix:?} d1: {} vs {}", g[0], d1);
                    assert!((g[1] - d2).abs() < 1e-5, "{ix:?} d2: {} vs {}", g[1], d2);
                }
                if ix.m > 0 && ix.n > 0 {
                    let g = wg.dirichlet_grad(ix, x1 * wg.a, x2 * wg.b);
                    let d1 = (wg.dirichlet_fn(ix, x1 * wg.a + h, x2 * wg.b)
                        - wg.dirichlet_fn(ix, x1 * wg.a - h, x2 * wg.b))
                        / (2.0 * h);
                    let d2 = (wg.dirichlet_fn(ix, x1 * wg.a, x2 * wg.b + h)
                        - wg.dirichlet_fn(ix, x1 * wg.a, x2 * wg.b - h))
                        / (2.0 * h);
                    assert!((g[0] - d1).abs() < 1e-5);
                    assert!((g[1] - d2).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn axial_branch_propagating_and_evanescent() {
        let wg = unit_guide(10.0);
        // (1,0): lambda^2 = pi^2 < 100, propagating.
        let h = wg.neumann_axial(ModeIndex { m: 1, n: 0 }).unwrap();
        assert!(h.re > 0.0 && h.im == 0.0);
        assert!((h.re - (100.0 - PI * PI).sqrt()).abs() < 1e-12);
        // (5,5): lambda^2 = 50 pi^2 > 100, evanescent.
        let h = wg.neumann_axial(ModeIndex { m: 5, n: 5 }).unwrap();
        assert!(h.re == 0.0 && h.im > 0.0);
        assert!((h.im - (50.0 * PI * PI - 100.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cutoff_is_rejected() {
        // k = pi puts (1,0) exactly at cutoff in the unit guide.
        let wg = unit_guide(PI);
        match wg.neumann_axial(ModeIndex { m: 1, n: 0 }) {
            Err(Error::AtCutoff {
                m: 1,
                n: 0,
                family: "Neumann",
                ..
            }) => {}
            other => panic!("expected cutoff error, got {other:?}"),
        }
    }

    #[test]
    fn enumeration_order_puts_te10_before_te01() {
        let wg = unit_guide(10.0);
        let list = wg.neumann_indices(3);
        assert_eq!(list[0], ModeIndex { m: 1, n: 0 });
        assert_eq!(list[1], ModeIndex { m: 0, n: 1 });
        // Eigenvalues are nondecreasing along the list.
        for w in list.windows(2) {
            assert!(wg.neumann_eigenvalue(w[0]) <= wg.neumann_eigenvalue(w[1]));
        }
    }

    #[test]
    fn propagating_census_unit_guide() {
        // Census counts verified by direct enumeration of m^2 + n^2 < k^2/pi^2.
        assert_eq!(unit_guide(20.0).propagating_neumann().len(), 38);
        assert_eq!(unit_guide(25.0).propagating_neumann().len(), 55);
        assert_eq!(unit_guide(12.0).propagating_neumann().len(), 14);
        let max_order = unit_guide(25.0)
            .propagating_neumann()
            .iter()
            .map(|ix| ix.m.max(ix.n))
            .max()
            .unwrap();
        assert_eq!(max_order, 7);
    }

    #[test]
    fn propagating_dirichlet_census() {
        // m, n >= 1 and m^2 + n^2 <= 14 gives 8 index pairs at k = 12.
        assert_eq!(unit_guide(12.0).propagating_dirichlet().len(), 8);
    }

    #[test]
    fn axial_values_match_arithmetic() {
        let wg = unit_guide(20.0);
        let h = wg.neumann_axial(ModeIndex { m: 1, n: 0 }).unwrap();
        assert!((h.re - 19.751_718_801_129_957).abs() < 1e-10);
        let wg = unit_guide(1.0);
        let h = wg.neumann_axial(ModeIndex { m: 1, n: 0 }).unwrap();
        assert!((h.im - 2.978_188_107_069_356_8).abs() < 1e-10);
    }

    #[test]
    fn eigenfunction_point_values() {
        let wg = unit_guide(5.0);
        // sqrt(2) cos(pi/4) = 1
        let v = wg.neumann_fn(ModeIndex { m: 1, n: 0 }, 0.25, 0.9);
        assert!((v - 1.0).abs() < 1e-14);
        // cosine zero at the section midline
        let v = wg.neumann_fn(ModeIndex { m: 1, n: 0 }, 0.5, 0.3);
        assert!(v.abs() < 1e-14);
        // Dirichlet functions vanish on the wall
        let v = wg.dirichlet_fn(ModeIndex { m: 1, n: 1 }, 0.0, 0.5);
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn enumeration_by_count() {
        let wg = unit_guide(10.0);
        let first = wg.enumerate_neumann(2);
        assert_eq!(
            first,
            vec![ModeIndex { m: 1, n: 0 }, ModeIndex { m: 0, n: 1 }]
        );
        let d = wg.enumerate_dirichlet(1);
        assert_eq!(d, vec![ModeIndex { m: 1, n: 1 }]);
        assert!((wg.dirichlet_eigenvalue(d[0]) - 2.0 * PI * PI).abs() < 1e-12);
        // Tall section: (0,1) has the smallest eigenvalue pi^2/4.
        let tall = Waveguide::new(1.0, 2.0, 10.0).unwrap();
        let first = tall.enumerate_neumann(1);
        assert_eq!(first, vec![ModeIndex { m: 0, n: 1 }]);
        assert!((tall.neumann_eigenvalue(first[0]) - PI * PI / 4.0).abs() < 1e-12);
        // A large request must still be globally ordered.
        let many = wg.enumerate_neumann(40);
        for w in many.windows(2) {
            assert!(wg.neumann_eigenvalue(w[0]) <= wg.neumann_eigenvalue(w[1]));
        }
    }

    #[test]
    fn eigenvalue_matches_second_derivatives() {
        // -Laplacian of the cosine product is (km^2 + kn^2) times itself;
        // the eigenvalue formula must reproduce that sum exactly.
        let wg = Waveguide::new(1.25, 0.75, 5.0).unwrap();
        for ix in [
            ModeIndex { m: 2, n: 3 },
            ModeIndex { m: 0, n: 1 },
            ModeIndex { m: 4, n: 0 },
        ] {
            let km = ix.m as f64 * PI / wg.a;
            let kn = ix.n as f64 * PI / wg.b;
            let lam = wg.neumann_eigenvalue(ix);
            assert!((lam - (km * km + kn * kn)).abs() <= 1e-12 * lam.max(1.0));
        }
    }
}
