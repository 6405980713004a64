//! Forward synthesis: rasterize a penetrable sphere, solve the volume
//! scattering equation against every transducer excitation, and write the
//! multistatic matrix as an NFM v1 file.

use num_complex::Complex64;
use waveguide_lsm::forward::{make_array, synthesize_near_field, MultistaticData};
use waveguide_lsm::greens::GreensEvaluator;
use waveguide_lsm::scatterer::{rasterize, BoundingBox, Geometry, Sphere};
use waveguide_lsm::spectra::Waveguide;

fn main() -> waveguide_lsm::Result<()> {
    let wg = Waveguide::new(1.0, 1.0, 12.0)?;
    let ev = GreensEvaluator::with_defaults(wg)?;

    let geometry = Geometry::new(vec![Sphere {
        center: [0.5, 0.6, 0.0],
        radius: 0.2,
        epsilon: Complex64::new(4.0, 0.0),
    }]);
    geometry.validate(&wg)?;
    let bbox = BoundingBox::new([0.28, 0.38, -0.22], [0.72, 0.82, 0.22])?;
    let grid = rasterize(&geometry, bbox, [10, 10, 10])?;

    let array = make_array(&wg, -3.0, 5)?;
    println!(
        "array: {} transducers on the plane x3 = {}",
        array.points.len(),
        -3.0
    );

    let data = synthesize_near_field(&ev, &grid, &array, true)?;
    let frob = data.entries.frobenius();
    println!(
        "multistatic matrix: {}x{}, Frobenius norm {frob:.6e}",
        data.entries.rows, data.entries.cols
    );

    // Receiver components are stored tangentially, so every third row
    // (the axial component of nu0 x u) is identically zero.
    let max_axial = (0..data.entries.rows / 3)
        .flat_map(|i| (0..data.entries.cols).map(move |j| (3 * i + 2, j)))
        .map(|(i, j)| data.entries.at(i, j).norm())
        .fold(0.0, f64::max);
    println!("largest axial receiver component: {max_axial:.1e}");

    let path = std::env::temp_dir().join("simulate_sphere_data.nfm");
    data.write_nfm(&path)?;
    let reread = MultistaticData::read_nfm(&path)?;
    println!(
        "wrote {} ({} bytes) and read it back losslessly: {}",
        path.display(),
        std::fs::metadata(&path)?.len(),
        reread.entries.data == data.entries.data
    );
    Ok(())
}
