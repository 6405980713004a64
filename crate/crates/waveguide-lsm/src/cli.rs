//! Configuration-driven pipeline driver: parse a TOML run configuration,
//! synthesize multistatic data (`simulate`), reconstruct an indicator field
//! from a data file (`invert`), or do both in one run (`pipeline`).
//!
//! All physical quantities are dimensionless in waveguide-width units. A
//! run is fully determined by the configuration and the noise seed; output
//! files are byte-identical across repeat runs and thread counts.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::forward::{add_noise, make_array, synthesize_near_field, MultistaticData};
use crate::greens::{self, GreensEvaluator};
use crate::lsm::{assemble, default_tsvd_rank, iso_level, scan, RegConfig, SamplingGrid};
use crate::scatterer::{contrast_cells, rasterize, BoundingBox, Geometry, Sphere, VoxelGrid};
use crate::spectra::Waveguide;
use crate::{Error, Result};

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Complete run description. Sections used only by one command (`voxel`,
/// `scatterer`, `noise` by simulate; `inversion` by invert) may be omitted
/// from configurations that never run it.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub waveguide: WaveguideSection,
    #[serde(default)]
    pub greens: GreensSection,
    pub array: ArraySection,
    #[serde(default)]
    pub scatterer: ScattererSection,
    #[serde(default)]
    pub voxel: Option<VoxelSection>,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub inversion: Option<InversionSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideSection {
    pub a: f64,
    pub b: f64,
    pub k: f64,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreensSection {
    /// Modal truncation order; defaults to the propagating order plus a
    /// safety margin.
    pub max_order: Option<u32>,
    /// Axial evaluation floor; defaults to 5% of the larger side.
    pub separation_floor: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    /// Axial position of the transducer plane.
    pub r: f64,
    /// Gauss-Legendre points per side (the array has n^2 transducers).
    pub n: usize,
    /// "tangential" (default) stores nu0 x u receiver components in data
    /// files; "raw" stores unrotated components and the inversion applies
    /// the rotation instead.
    #[serde(default = "default_tangential")]
    pub tangential: String,
}

fn default_tangential() -> String {
    "tangential".into()
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererSection {
    #[serde(default)]
    pub sphere: Vec<SphereSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSection {
    pub center: [f64; 3],
    pub radius: f64,
    /// Relative permittivity as [re, im].
    pub eps: [f64; 2],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoxelSection {
    pub bbox_min: [f64; 3],
    pub bbox_max: [f64; 3],
    pub dims: [usize; 3],
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Multiplicative noise level; 0 disables the noise stage entirely.
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionSection {
    /// "tsvd", "tikhonov" or "glsm".
    pub method: String,
    /// Spectral cutoff for tsvd; defaults to the propagating
    /// transverse-electric mode count plus 13, capped at the matrix size.
    pub rank: Option<usize>,
    /// Regularization parameter for tikhonov and glsm.
    pub alpha: Option<f64>,
    /// Smoothing scale for glsm; defaults per right-hand side.
    pub delta: Option<f64>,
    /// Descent iteration cap for glsm (default 50).
    pub max_iters: Option<usize>,
    /// Descent gradient tolerance for glsm (default 0: run to the numeric
    /// floor or the iteration cap).
    pub tol: Option<f64>,
    pub grid_min: [f64; 3],
    pub grid_max: [f64; 3],
    pub grid_dims: [usize; 3],
    /// Wall clearance of the sampling points; defaults to the separation
    /// floor.
    pub buffer: Option<f64>,
    /// Isosurface constants written to the sidecar.
    #[serde(default = "default_iso_c")]
    pub iso_c: Vec<f64>,
}

fn default_iso_c() -> Vec<f64> {
    vec![0.3]
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory (default "out"); created if missing.
    pub dir: Option<String>,
    /// Also write a legacy VTK structured-points file.
    #[serde(default)]
    pub write_vtk: bool,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let config: RunConfig = toml::from_str(text)
            .map_err(|e| config_err("<config>", e.to_string().trim().replace('\n', "; ")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Apply command-line overrides: `--seed` replaces the noise seed and
    /// `--out` the output directory.
    pub fn apply_overrides(&mut self, seed: Option<u64>, out_dir: Option<&str>) {
        if let Some(s) = seed {
            self.noise.seed = s;
        }
        if let Some(d) = out_dir {
            self.output.dir = Some(d.to_string());
        }
    }

    fn validate(&self) -> Result<()> {
        let w = &self.waveguide;
        for (path, v) in [("waveguide.a", w.a), ("waveguide.b", w.b)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(config_err(path, "must be positive and finite"));
            }
        }
        if !w.k.is_finite() || w.k <= 0.0 {
            return Err(config_err("waveguide.k", "must be positive and finite"));
        }
        if let Some(order) = self.greens.max_order {
            if order == 0 || order > greens::MAX_ORDER_LIMIT {
                return Err(config_err(
                    "greens.max_order",
                    format!("must lie in 1..={}", greens::MAX_ORDER_LIMIT),
                ));
            }
        }
        if let Some(floor) = self.greens.separation_floor {
            if !floor.is_finite() || floor <= 0.0 {
                return Err(config_err(
                    "greens.separation_floor",
                    "must be positive and finite",
                ));
            }
        }
        if self.array.n == 0 {
            return Err(config_err("array.n", "needs at least one point per side"));
        }
        if !self.array.r.is_finite() {
            return Err(config_err("array.r", "must be finite"));
        }
        if !matches!(self.array.tangential.as_str(), "tangential" | "raw") {
            return Err(config_err(
                "array.tangential",
                "must be \"tangential\" or \"raw\"",
            ));
        }

        // The cut-off check and wall containment need the real constructors;
        // surface their messages under the responsible config paths.
        let wg = self.waveguide_params()?;
        self.evaluator()
            .map_err(|e| config_err("waveguide.k", e.to_string()))?;
        let floor = self
            .greens
            .separation_floor
            .unwrap_or_else(|| greens::default_separation_floor(&wg));

        for (i, s) in self.scatterer.sphere.iter().enumerate() {
            let sphere = Sphere {
                center: s.center,
                radius: s.radius,
                epsilon: Complex64::new(s.eps[0], s.eps[1]),
            };
            Geometry::new(vec![sphere])
                .validate(&wg)
                .map_err(|e| config_err(&format!("scatterer.sphere[{i}]"), e.to_string()))?;
        }

        if let Some(v) = &self.voxel {
            let bbox = BoundingBox::new(v.bbox_min, v.bbox_max)
                .map_err(|e| config_err("voxel.bbox_min", e.to_string()))?;
            if v.dims.iter().any(|&d| d == 0) {
                return Err(config_err("voxel.dims", "must be at least 1 per axis"));
            }
            // The transducer plane must sit below the support with clearance.
            if self.array.r + floor > bbox.min[2] {
                return Err(config_err(
                    "array.r",
                    format!(
                        "transducer plane must lie below the voxel box by at least the \
                         separation floor {floor}"
                    ),
                ));
            }
        }

        if let Some(inv) = &self.inversion {
            if !matches!(inv.method.as_str(), "tsvd" | "tikhonov" | "glsm") {
                return Err(config_err(
                    "inversion.method",
                    "must be \"tsvd\", \"tikhonov\" or \"glsm\"",
                ));
            }
            if matches!(inv.method.as_str(), "tikhonov" | "glsm") {
                match inv.alpha {
                    None => {
                        return Err(config_err(
                            "inversion.alpha",
                            format!("required for method \"{}\"", inv.method),
                        ))
                    }
                    Some(a) if !a.is_finite() || a <= 0.0 => {
                        return Err(config_err("inversion.alpha", "must be positive and finite"))
                    }
                    _ => {}
                }
            }
            if let Some(rank) = inv.rank {
                let n = 3 * self.array.n * self.array.n;
                if rank == 0 || rank > n {
                    return Err(config_err(
                        "inversion.rank",
                        format!("must lie in 1..={n} for this array"),
                    ));
                }
            }
            if let Some(d) = inv.delta {
                if !d.is_finite() || d <= 0.0 {
                    return Err(config_err("inversion.delta", "must be positive and finite"));
                }
            }
            if inv.max_iters == Some(0) {
                return Err(config_err("inversion.max_iters", "must be at least 1"));
            }
            if let Some(t) = inv.tol {
                if !t.is_finite() || t < 0.0 {
                    return Err(config_err(
                        "inversion.tol",
                        "must be non-negative and finite",
                    ));
                }
            }
            for (i, c) in inv.iso_c.iter().enumerate() {
                if !c.is_finite() || *c <= 0.0 || *c >= 1.0 {
                    return Err(config_err(
                        &format!("inversion.iso_c[{i}]"),
                        "must lie strictly between 0 and 1",
                    ));
                }
            }
            let buffer = inv.buffer.unwrap_or(floor);
            let bbox = BoundingBox::new(inv.grid_min, inv.grid_max)
                .map_err(|e| config_err("inversion.grid_min", e.to_string()))?;
            SamplingGrid::new(&wg, bbox, inv.grid_dims, buffer)
                .map_err(|e| config_err("inversion.grid_min", e.to_string()))?;
            if inv.grid_min[2] < self.array.r + buffer {
                return Err(config_err(
                    "inversion.grid_min",
                    "sampling region must clear the transducer plane by the buffer",
                ));
            }
        }
        Ok(())
    }

    pub fn waveguide_params(&self) -> Result<Waveguide> {
        Waveguide::new(self.waveguide.a, self.waveguide.b, self.waveguide.k)
    }

    pub fn evaluator(&self) -> Result<GreensEvaluator> {
        let wg = self.waveguide_params()?;
        let order = self
            .greens
            .max_order
            .unwrap_or_else(|| greens::default_max_order(&wg));
        let floor = self
            .greens
            .separation_floor
            .unwrap_or_else(|| greens::default_separation_floor(&wg));
        GreensEvaluator::new(wg, order, floor)
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::new(
            self.scatterer
                .sphere
                .iter()
                .map(|s| Sphere {
                    center: s.center,
                    radius: s.radius,
                    epsilon: Complex64::new(s.eps[0], s.eps[1]),
                })
                .collect(),
        )
    }

    pub fn voxel_grid(&self) -> Result<VoxelGrid> {
        let v = self
            .voxel
            .as_ref()
            .ok_or_else(|| config_err("voxel", "section required to simulate"))?;
        let bbox = BoundingBox::new(v.bbox_min, v.bbox_max)?;
        rasterize(&self.geometry(), bbox, v.dims)
    }

    pub fn sampling_grid(&self) -> Result<SamplingGrid> {
        let inv = self.inversion_section()?;
        let wg = self.waveguide_params()?;
        let floor = self
            .greens
            .separation_floor
            .unwrap_or_else(|| greens::default_separation_floor(&wg));
        let bbox = BoundingBox::new(inv.grid_min, inv.grid_max)?;
        SamplingGrid::new(&wg, bbox, inv.grid_dims, inv.buffer.unwrap_or(floor))
    }

    pub fn reg_config(&self) -> Result<RegConfig> {
        let inv = self.inversion_section()?;
        let n = 3 * self.array.n * self.array.n;
        Ok(match inv.method.as_str() {
            "tsvd" => RegConfig::Tsvd {
                rank: inv
                    .rank
                    .unwrap_or_else(|| {
                        let wg = self.waveguide_params().expect("validated");
                        default_tsvd_rank(&wg)
                    })
                    .min(n),
            },
            "tikhonov" => RegConfig::Tikhonov {
                alpha: inv.alpha.expect("validated"),
            },
            "glsm" => RegConfig::Glsm {
                alpha: inv.alpha.expect("validated"),
                delta: inv.delta,
                max_iters: inv.max_iters.unwrap_or(50),
                tol: inv.tol.unwrap_or(0.0),
            },
            other => {
                return Err(config_err(
                    "inversion.method",
                    format!("unknown \"{other}\""),
                ))
            }
        })
    }

    fn inversion_section(&self) -> Result<&InversionSection> {
        self.inversion
            .as_ref()
            .ok_or_else(|| config_err("inversion", "section required to invert"))
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.output.dir.as_deref().unwrap_or("out"))
    }

    fn store_tangential(&self) -> bool {
        self.array.tangential == "tangential"
    }
}

/// Summary of a `simulate` run.
#[derive(Debug)]
pub struct SimulateReport {
    pub nfm_path: PathBuf,
    pub rows: usize,
    pub support_cells: usize,
}

/// Synthesize the multistatic data described by the configuration and write
/// it as `data.nfm` in the output directory.
pub fn cmd_simulate(config: &RunConfig) -> Result<SimulateReport> {
    let ev = config.evaluator()?;
    let grid = config.voxel_grid()?;
    let array = make_array(&ev.wg, config.array.r, config.array.n)?;
    let mut data = synthesize_near_field(&ev, &grid, &array, config.store_tangential())?;
    if config.noise.eta > 0.0 {
        data = add_noise(&data, config.noise.eta, config.noise.seed)?;
    }

    let dir = config.out_dir();
    std::fs::create_dir_all(&dir)?;
    let nfm_path = dir.join("data.nfm");
    data.write_nfm(&nfm_path)?;
    Ok(SimulateReport {
        nfm_path,
        rows: data.entries.rows,
        support_cells: contrast_cells(&grid).len(),
    })
}

/// Summary of an `invert` run.
#[derive(Debug)]
pub struct InvertReport {
    pub csv_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub vtk_path: Option<PathBuf>,
    pub valid_points: usize,
    pub total_points: usize,
    /// Configured isosurface constants and the levels they produced (None
    /// when the field had no valid values).
    pub iso_levels: Vec<(f64, Option<f64>)>,
    /// Location of the largest valid indicator value, when any.
    pub peak: Option<[f64; 3]>,
}

/// Reconstruct an indicator field from an NFM v1 file and write
/// `indicator.csv`, its JSON sidecar and (optionally) a VTK file. The field
/// files are written even when every sampling point degenerates, but the
/// run then reports a numeric failure.
pub fn cmd_invert(config: &RunConfig, nfm_path: &Path) -> Result<InvertReport> {
    let ev = config.evaluator()?;
    let mut data = MultistaticData::read_nfm(nfm_path)?;

    let k = config.waveguide.k;
    if (data.k - k).abs() > 1e-12 * k.abs().max(1.0) {
        return Err(Error::MetadataMismatch(format!(
            "data file has k = {}, configuration has k = {k}",
            data.k
        )));
    }
    if (data.r - config.array.r).abs() > 1e-12 * config.array.r.abs().max(1.0) {
        return Err(Error::MetadataMismatch(format!(
            "data file has r = {}, configuration has r = {}",
            data.r, config.array.r
        )));
    }
    let p = config.array.n * config.array.n;
    if data.p_count != p {
        return Err(Error::MetadataMismatch(format!(
            "data file has {} transducers, configuration array has {p}",
            data.p_count
        )));
    }
    // The file format does not record the storage convention; take it from
    // the configuration.
    data.tangential = config.store_tangential();

    let array = make_array(&ev.wg, config.array.r, config.array.n)?;
    let nf = assemble(&data, &array)?;
    let grid = config.sampling_grid()?;
    let reg = config.reg_config()?;
    let field = scan(&nf, &ev, &grid, &reg)?;

    let inv = config.inversion_section()?;
    let dir = config.out_dir();
    std::fs::create_dir_all(&dir)?;
    let csv_path = dir.join("indicator.csv");
    field.write_csv(&csv_path)?;
    let sidecar_path = dir.join("indicator.json");
    field.write_sidecar(&inv.iso_c, &sidecar_path)?;
    let vtk_path = if config.output.write_vtk {
        let p = dir.join("indicator.vtk");
        field.write_vtk(&p)?;
        Some(p)
    } else {
        None
    };

    let valid_points = field.valid.iter().filter(|v| **v).count();
    let report = InvertReport {
        csv_path,
        sidecar_path,
        vtk_path,
        valid_points,
        total_points: field.valid.len(),
        iso_levels: inv
            .iso_c
            .iter()
            .map(|&c| (c, iso_level(&field, c).ok()))
            .collect(),
        peak: field.argmax().map(|(_, p, _)| p),
    };
    if valid_points == 0 {
        return Err(Error::Numeric(
            "indicator field is degenerate at every sampling point (zero or unusable data); \
             output files were still written"
                .into(),
        ));
    }
    Ok(report)
}

/// `simulate` followed by `invert` on the file it wrote; a single seed
/// governs all randomness.
pub fn cmd_pipeline(config: &RunConfig) -> Result<(SimulateReport, InvertReport)> {
    let sim = cmd_simulate(config)?;
    let inv = cmd_invert(config, &sim.nfm_path)?;
    Ok((sim, inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_config_text(out_dir: &str) -> String {
        format!(
            r#"
[waveguide]
a = 1.0
b = 1.0
k = 12.0

[array]
r = -3.0
n = 5

[[scatterer.sphere]]
center = [0.5, 0.6, 0.0]
radius = 0.2
eps = [4.0, 0.0]

[voxel]
bbox_min = [0.28, 0.38, -0.22]
bbox_max = [0.72, 0.82, 0.22]
dims = [8, 8, 8]

[noise]
eta = 0.0
seed = 424242

[inversion]
method = "tsvd"
rank = 20
grid_min = [0.1, 0.1, -0.5]
grid_max = [0.9, 0.9, 0.5]
grid_dims = [10, 10, 8]
iso_c = [0.3]

[output]
dir = "{out_dir}"
"#
        )
    }

    #[test]
    fn parses_full_config_and_applies_defaults() {
        let config = RunConfig::from_toml_str(&full_config_text("out")).unwrap();
        assert_eq!(config.waveguide.k, 12.0);
        assert_eq!(config.array.n, 5);
        assert_eq!(config.array.tangential, "tangential");
        assert_eq!(config.scatterer.sphere.len(), 1);
        assert_eq!(config.voxel.as_ref().unwrap().dims, [8, 8, 8]);
        assert_eq!(config.reg_config().unwrap(), RegConfig::Tsvd { rank: 20 });
        assert_eq!(config.out_dir(), PathBuf::from("out"));

        // Defaults: rank from the propagating census, iso_c = [0.3].
        let mut no_rank = config.clone();
        no_rank.inversion.as_mut().unwrap().rank = None;
        assert_eq!(
            no_rank.reg_config().unwrap(),
            RegConfig::Tsvd { rank: 14 + 13 }
        );
        assert_eq!(config.inversion.as_ref().unwrap().iso_c, vec![0.3]);

        let mut overridden = config;
        overridden.apply_overrides(Some(7), Some("elsewhere"));
        assert_eq!(overridden.noise.seed, 7);
        assert_eq!(overridden.out_dir(), PathBuf::from("elsewhere"));
    }

    #[test]
    fn validation_reports_field_paths() {
        let expect_path = |text: &str, path: &str| {
            match RunConfig::from_toml_str(text) {
                Err(Error::Config { path: p, .. }) => {
                    assert!(p.contains(path), "expected path {path}, got {p}")
                }
                other => panic!("expected config error at {path}, got {other:?}"),
            };
        };

        let base = full_config_text("out");
        expect_path(&base.replace("k = 12.0", "k = -3.0"), "waveguide.k");
        // Exactly at the (1,0) cut-off.
        expect_path(
            &base.replace("k = 12.0", "k = 3.14159265358979312"),
            "waveguide.k",
        );
        expect_path(&base.replace("n = 5", "n = 0"), "array.n");
        expect_path(&base.replace("r = -3.0", "r = -0.1"), "array.r");
        expect_path(
            &base.replace("radius = 0.2", "radius = -0.2"),
            "scatterer.sphere[0]",
        );
        expect_path(&base.replace("rank = 20", "rank = 76"), "inversion.rank");
        expect_path(
            &base.replace("method = \"tsvd\"", "method = \"qr\""),
            "inversion.method",
        );
        expect_path(
            &base.replace("method = \"tsvd\"", "method = \"tikhonov\""),
            "inversion.alpha",
        );
        expect_path(
            &base.replace("iso_c = [0.3]", "iso_c = [1.5]"),
            "inversion.iso_c[0]",
        );
        expect_path(
            &base.replace(
                "grid_min = [0.1, 0.1, -0.5]",
                "grid_min = [0.001, 0.1, -0.5]",
            ),
            "inversion.grid_min",
        );
        // Unknown keys are rejected by the parser.
        assert!(matches!(
            RunConfig::from_toml_str(&format!("{base}\n[extra]\nx = 1\n")),
            Err(Error::Config { .. })
        ));
        // Sections required by a command but absent are reported at use.
        let no_voxel = RunConfig::from_toml_str(
            &base
                .replace("[voxel]\n", "")
                .replace("bbox_min = [0.28, 0.38, -0.22]\n", "")
                .replace("bbox_max = [0.72, 0.82, 0.22]\n", "")
                .replace("dims = [8, 8, 8]\n", ""),
        )
        .unwrap();
        assert!(matches!(
            no_voxel.voxel_grid(),
            Err(Error::Config { path, .. }) if path == "voxel"
        ));
    }

    #[test]
    fn simulate_empty_geometry_writes_zero_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let text = full_config_text(out.to_str().unwrap())
            .replace(
                "[[scatterer.sphere]]\ncenter = [0.5, 0.6, 0.0]\nradius = 0.2\neps = [4.0, 0.0]\n",
                "",
            )
            .replace("n = 5", "n = 8");
        let config = RunConfig::from_toml_str(&text).unwrap();
        let report = cmd_simulate(&config).unwrap();
        // The 8x8 three-polarization protocol yields a 192x192 matrix.
        assert_eq!(report.rows, 192);
        assert_eq!(report.support_cells, 0);

        let data = MultistaticData::read_nfm(&report.nfm_path).unwrap();
        assert_eq!(data.entries.rows, 192);
        assert!(data.entries.data.iter().all(|z| z.norm() == 0.0));

        // Same configuration and seed produce byte-identical files.
        let out2 = dir.path().join("run2");
        let mut config2 = RunConfig::from_toml_str(&text).unwrap();
        config2.apply_overrides(None, Some(out2.to_str().unwrap()));
        let report2 = cmd_simulate(&config2).unwrap();
        assert_eq!(
            std::fs::read(&report.nfm_path).unwrap(),
            std::fs::read(&report2.nfm_path).unwrap()
        );
    }

    #[test]
    fn invert_zero_matrix_degenerates_with_files_written() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let text = full_config_text(out.to_str().unwrap()).replace(
            "[[scatterer.sphere]]\ncenter = [0.5, 0.6, 0.0]\nradius = 0.2\neps = [4.0, 0.0]\n",
            "",
        );
        let config = RunConfig::from_toml_str(&text).unwrap();
        let sim = cmd_simulate(&config).unwrap();
        let err = cmd_invert(&config, &sim.nfm_path).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert_eq!(err.exit_code(), 3);

        let csv = std::fs::read_to_string(out.join("indicator.csv")).unwrap();
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",0")));
        let sidecar = std::fs::read_to_string(out.join("indicator.json")).unwrap();
        assert!(sidecar.contains("\"valid_points\": 0"));
        assert!(sidecar.contains("\"level\": null"));
    }

    #[test]
    fn pipeline_matches_sequential_commands_and_localizes() {
        let dir = tempfile::tempdir().unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");

        let config_a =
            RunConfig::from_toml_str(&full_config_text(out_a.to_str().unwrap())).unwrap();
        let (sim_a, inv_a) = cmd_pipeline(&config_a).unwrap();
        assert_eq!(inv_a.valid_points, inv_a.total_points);

        // The desk-scale sphere run localizes near the true center.
        let peak = inv_a.peak.unwrap();
        let err = ((peak[0] - 0.5).powi(2) + (peak[1] - 0.6).powi(2) + peak[2].powi(2)).sqrt();
        assert!(err < 0.2, "peak {peak:?}");
        assert_eq!(inv_a.iso_levels.len(), 1);
        assert!(inv_a.iso_levels[0].1.is_some());

        let config_b =
            RunConfig::from_toml_str(&full_config_text(out_b.to_str().unwrap())).unwrap();
        let sim_b = cmd_simulate(&config_b).unwrap();
        let inv_b = cmd_invert(&config_b, &sim_b.nfm_path).unwrap();
        for (pa, pb) in [
            (&sim_a.nfm_path, &sim_b.nfm_path),
            (&inv_a.csv_path, &inv_b.csv_path),
            (&inv_a.sidecar_path, &inv_b.sidecar_path),
        ] {
            let (ba, bb) = (std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
            assert_eq!(
                ba, bb,
                "outputs differ between pipeline and sequential runs"
            );
        }
    }

    #[test]
    fn noise_level_changes_data_but_not_grid_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let out_a = dir.path().join("clean");
        let out_b = dir.path().join("noisy");
        let clean = full_config_text(out_a.to_str().unwrap());
        let noisy = full_config_text(out_b.to_str().unwrap()).replace("eta = 0.0", "eta = 0.001");

        let (_, inv_a) = cmd_pipeline(&RunConfig::from_toml_str(&clean).unwrap()).unwrap();
        let (_, inv_b) = cmd_pipeline(&RunConfig::from_toml_str(&noisy).unwrap()).unwrap();

        let side_a: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&inv_a.sidecar_path).unwrap()).unwrap();
        let side_b: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&inv_b.sidecar_path).unwrap()).unwrap();
        assert_eq!(side_a["grid"], side_b["grid"]);
        assert_eq!(side_a["regularization"], side_b["regularization"]);
        // The indicator data itself differs between the two noise levels.
        assert_ne!(
            std::fs::read(&inv_a.csv_path).unwrap(),
            std::fs::read(&inv_b.csv_path).unwrap()
        );
    }

    #[test]
    fn invert_rejects_mismatched_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let text = full_config_text(out.to_str().unwrap());
        let config = RunConfig::from_toml_str(&text).unwrap();
        let sim = cmd_simulate(&config).unwrap();

        let other = RunConfig::from_toml_str(&text.replace("k = 12.0", "k = 13.0")).unwrap();
        assert!(matches!(
            cmd_invert(&other, &sim.nfm_path),
            Err(Error::MetadataMismatch(_))
        ));

        let other_r = RunConfig::from_toml_str(&text.replace("r = -3.0", "r = -4.0")).unwrap();
        assert!(matches!(
            cmd_invert(&other_r, &sim.nfm_path),
            Err(Error::MetadataMismatch(_))
        ));
    }
}
