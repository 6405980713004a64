//! Full linear sampling reconstruction: synthesize data for a hidden
//! sphere, assemble the near-field operator, scan a sampling grid with the
//! truncated-SVD solver, and report how well the indicator localizes the
//! target.

use num_complex::Complex64;
use waveguide_lsm::forward::{make_array, synthesize_near_field};
use waveguide_lsm::greens::GreensEvaluator;
use waveguide_lsm::lsm::{assemble, iso_level, scan, RegConfig, SamplingGrid};
use waveguide_lsm::scatterer::{rasterize, BoundingBox, Geometry, Sphere};
use waveguide_lsm::spectra::Waveguide;

fn main() -> waveguide_lsm::Result<()> {
    let wg = Waveguide::new(1.0, 1.0, 12.0)?;
    let ev = GreensEvaluator::with_defaults(wg)?;

    let center = [0.5, 0.6, 0.0];
    let radius = 0.2;
    let geometry = Geometry::new(vec![Sphere {
        center,
        radius,
        epsilon: Complex64::new(4.0, 0.0),
    }]);
    let bbox = BoundingBox::new([0.28, 0.38, -0.22], [0.72, 0.82, 0.22])?;
    let grid = rasterize(&geometry, bbox, [8, 8, 8])?;
    let array = make_array(&wg, -3.0, 5)?;

    let data = synthesize_near_field(&ev, &grid, &array, true)?;
    let nf = assemble(&data, &array)?;

    let sampling = SamplingGrid::new(
        &wg,
        BoundingBox::new([0.1, 0.1, -0.5], [0.9, 0.9, 0.5])?,
        [10, 10, 8],
        0.05,
    )?;
    let reg = RegConfig::Tsvd { rank: 20 };
    let field = scan(&nf, &ev, &sampling, &reg)?;

    let (_, peak, psi_max) = field.argmax().expect("some point is valid");
    let err = ((peak[0] - center[0]).powi(2)
        + (peak[1] - center[1]).powi(2)
        + (peak[2] - center[2]).powi(2))
    .sqrt();
    println!(
        "true center   ({}, {}, {})",
        center[0], center[1], center[2]
    );
    println!(
        "indicator peak ({:.3}, {:.3}, {:.3}), psi = {psi_max:.4e}",
        peak[0], peak[1], peak[2]
    );
    println!("localization error |peak - center| = {err:.3}");

    // Contrast between the inside and the outside of the target, measured
    // by medians so single outliers cannot flatter the result.
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for (i, z) in field.grid.points.iter().enumerate() {
        if !field.valid[i] {
            continue;
        }
        let d =
            ((z[0] - center[0]).powi(2) + (z[1] - center[1]).powi(2) + (z[2] - center[2]).powi(2))
                .sqrt();
        if d <= radius {
            inside.push(field.psi[i]);
        } else if d >= radius + 0.1 {
            outside.push(field.psi[i]);
        }
    }
    let median = |v: &mut Vec<f64>| -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (mi, mo) = (median(&mut inside), median(&mut outside));
    println!("median psi inside  = {mi:.4e}  ({} points)", inside.len());
    println!("median psi outside = {mo:.4e}  ({} points)", outside.len());
    println!("contrast ratio     = {:.2}", mi / mo);

    let level = iso_level(&field, 0.3)?;
    let above = field
        .psi
        .iter()
        .zip(&field.valid)
        .filter(|(psi, valid)| **valid && **psi >= level)
        .count();
    println!(
        "iso level C = 0.3 -> {level:.4e}; {above} of {} points above it",
        field.psi.len()
    );

    let csv = std::env::temp_dir().join("reconstruct_lsm_indicator.csv");
    field.write_csv(&csv)?;
    println!("wrote {}", csv.display());
    Ok(())
}
