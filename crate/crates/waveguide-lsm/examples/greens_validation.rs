//! Numerical checks on the modal dyadic kernel: source-receiver symmetry,
//! the vanishing tangential trace on the guide walls, and the vector
//! Helmholtz residual measured by second finite differences.

use num_complex::Complex64;
use waveguide_lsm::greens::GreensEvaluator;
use waveguide_lsm::spectra::Waveguide;
use waveguide_lsm::{Dyadic, Point};

fn dyadic_norm(g: &Dyadic) -> f64 {
    g.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn main() -> waveguide_lsm::Result<()> {
    let wg = Waveguide::new(1.0, 1.0, 12.0)?;
    let ev = GreensEvaluator::with_defaults(wg)?;

    let x: Point = [0.31, 0.47, 0.9];
    let y: Point = [0.62, 0.58, 0.2];

    // Reciprocity: swapping source and receiver transposes the kernel.
    let g_xy = ev.eval(x, y)?;
    let g_yx = ev.eval(y, x)?;
    let mut sym_err: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            sym_err = sym_err.max((g_xy[i][j] - g_yx[j][i]).norm());
        }
    }
    println!(
        "symmetry |G(x,y) - G(y,x)^T| = {sym_err:.3e} (scale {:.3e})",
        dyadic_norm(&g_xy)
    );

    // The electric kernel has no tangential trace on the perfectly
    // conducting walls: nu x G(.,y) columns vanish there.
    let mut wall_err: f64 = 0.0;
    for wall in [
        [0.0, 0.47, 0.9],
        [1.0, 0.47, 0.9],
        [0.31, 0.0, 0.9],
        [0.31, 1.0, 0.9],
    ] {
        let g = ev.eval(wall, y)?;
        // nu = +-e1 walls leave (g2, g3) tangential; nu = +-e2 leaves (g1, g3).
        let rows: [usize; 2] = if wall[0] == 0.0 || wall[0] == 1.0 {
            [1, 2]
        } else {
            [0, 2]
        };
        for col in 0..3 {
            for r in rows {
                wall_err = wall_err.max(g[r][col].norm());
            }
        }
    }
    println!("max tangential wall trace     = {wall_err:.3e}");

    // Away from the source the kernel solves curl curl G - k^2 G = 0;
    // check the identity curl curl = grad div - laplacian column-wise with
    // central differences, halving the step to show the quadratic floor.
    let column = |p: Point| -> waveguide_lsm::Result<[Complex64; 3]> {
        let g = ev.eval(p, y)?;
        Ok([g[0][0], g[1][0], g[2][0]])
    };
    println!();
    println!("{:>10} {:>14}", "fd step", "residual");
    let mut previous: Option<f64> = None;
    for exponent in 2..=4 {
        let h = 0.01_f64 / f64::from(1 << exponent);
        let base = column(x)?;
        // Columns are divergence-free away from the source, so
        // curl curl G = -laplacian G and the equation reads (Δ + k^2) G = 0.
        let mut lap = [Complex64::ZERO; 3];
        for axis in 0..3 {
            let mut plus = x;
            let mut minus = x;
            plus[axis] += h;
            minus[axis] -= h;
            let (gp, gm) = (column(plus)?, column(minus)?);
            for i in 0..3 {
                lap[i] += (gp[i] + gm[i] - 2.0 * base[i]) / (h * h);
            }
        }
        let mut residual: f64 = 0.0;
        for i in 0..3 {
            residual = residual.max((lap[i] + wg.k * wg.k * base[i]).norm());
        }
        let scale = base.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let rel = residual / (wg.k * wg.k * scale);
        println!("{h:>10.2e} {rel:>14.3e}");
        if let Some(p) = previous {
            let order = (p / rel).log2();
            println!("{:>10} convergence order {order:.2}", "");
        }
        previous = Some(rel);
    }
    Ok(())
}
