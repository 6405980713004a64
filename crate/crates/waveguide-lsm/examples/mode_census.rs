//! Census of guided modes: counts propagating transverse-electric and
//! transverse-magnetic modes for a few wavenumbers on the unit square
//! cross-section, then prints the low end of the spectrum with axial
//! wavenumbers and shows the transition to evanescent decay.

use waveguide_lsm::spectra::Waveguide;

fn main() -> waveguide_lsm::Result<()> {
    println!("mode census on the unit square cross-section");
    println!();
    println!(
        "{:>6} {:>10} {:>10} {:>18}",
        "k", "TE modes", "TM modes", "max prop. order"
    );
    for k in [5.0, 12.0, 20.0, 25.0] {
        let wg = Waveguide::new(1.0, 1.0, k)?;
        let te = wg.propagating_neumann();
        let tm = wg.propagating_dirichlet();
        let max_order = te
            .iter()
            .chain(tm.iter())
            .map(|ix| ix.m.max(ix.n))
            .max()
            .unwrap_or(0);
        println!("{k:>6} {:>10} {:>10} {max_order:>18}", te.len(), tm.len());
    }

    let wg = Waveguide::new(1.0, 1.0, 12.0)?;
    println!();
    println!("lowest transverse-electric modes at k = {}", wg.k);
    println!(
        "{:>7} {:>12} {:>24}",
        "(m,n)", "eigenvalue", "axial wavenumber"
    );
    for ix in wg.propagating_neumann().into_iter().take(8) {
        let lambda2 = wg.neumann_eigenvalue(ix);
        let h = wg.neumann_axial(ix)?;
        println!(
            "({},{}) {lambda2:>13.6} {:>15.6} + {:.6}i",
            ix.m, ix.n, h.re, h.im
        );
    }

    // Above the propagating band the axial wavenumber turns imaginary and
    // the mode decays along the guide instead of carrying power.
    let evanescent = wg
        .neumann_indices(8)
        .into_iter()
        .find(|&ix| wg.neumann_eigenvalue(ix) > wg.k * wg.k)
        .expect("an evanescent mode exists below order 8");
    let h = wg.neumann_axial(evanescent)?;
    println!();
    println!(
        "first evanescent mode ({},{}): h = {:.6} + {:.6}i (pure decay)",
        evanescent.m, evanescent.n, h.re, h.im
    );
    Ok(())
}
