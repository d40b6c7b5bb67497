//! On-disk ensembles.
//!
//! An ensemble directory holds
//!
//! | file | columns |
//! |------|---------|
//! | `samples.csv` | `sample, origin, window_lo, window_hi, count` |
//! | `points.csv` | `sample, position` |
//! | `measures/index.csv` | `measure, sample, origin, energy, center, u, file` |
//! | `measures/mNNNNNN.csv` | `cell_center, density` |
//!
//! Simulations add `spectra.csv` (`realization, seed, index, energy`) and
//! `summary.json`. Floats are written in shortest round-trip form, so equal
//! inputs give byte-identical files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{
    kernel_average, ExperimentConfig, KernelAverage, OracleDraw, RealizationOutput,
};
use crate::measure::{localization_center, EigenfunctionMeasure};
use crate::points::{Origin, PointSample, Window};
use crate::stats::{ks_uniform, pooled_gaps, Ensemble, GapStatistics};

#[derive(Debug, Serialize, Deserialize)]
struct SpectrumRow {
    realization: usize,
    seed: u64,
    index: usize,
    energy: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRow {
    sample: usize,
    origin: String,
    window_lo: f64,
    window_hi: f64,
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct PointRow {
    sample: usize,
    position: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasureIndexRow {
    measure: usize,
    sample: usize,
    origin: String,
    energy: Option<f64>,
    center: f64,
    u: Option<f64>,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct DensityRow {
    cell_center: f64,
    density: f64,
}

/// A measure to be written, tagged with its realization.
pub struct MeasureRecord<'a> {
    pub sample: usize,
    pub origin: Origin,
    pub energy: Option<f64>,
    pub u: Option<f64>,
    pub measure: &'a EigenfunctionMeasure,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("csv: {other:?}")),
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn write_measure_csv(path: &Path, measure: &EigenfunctionMeasure) -> Result<()> {
    write_rows(
        path,
        measure
            .cell_centers()
            .zip(measure.density())
            .map(|(c, &d)| DensityRow {
                cell_center: c,
                density: d,
            }),
    )
}

pub fn read_measure_csv(path: &Path) -> Result<EigenfunctionMeasure> {
    let rows: Vec<DensityRow> = read_rows(path)?;
    EigenfunctionMeasure::from_density(rows.into_iter().map(|r| r.density).collect(), None)
}

/// `{"energy": E, "density": [...]}`.
pub fn measure_to_json(measure: &EigenfunctionMeasure) -> Result<String> {
    Ok(serde_json::to_string(&serde_json::json!({
        "energy": measure.energy(),
        "density": measure.density(),
    }))?)
}

/// Write point samples and measures in the ensemble layout.
pub fn write_ensemble(
    dir: &Path,
    points: &[PointSample],
    measures: &[MeasureRecord<'_>],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    if !points.is_empty() {
        write_rows(
            &dir.join("samples.csv"),
            points.iter().enumerate().map(|(i, p)| SampleRow {
                sample: i,
                origin: p.origin().to_string(),
                window_lo: p.window().lo,
                window_hi: p.window().hi,
                count: p.len(),
            }),
        )?;
        write_rows(
            &dir.join("points.csv"),
            points.iter().enumerate().flat_map(|(i, p)| {
                p.points().iter().map(move |&x| PointRow {
                    sample: i,
                    position: x,
                })
            }),
        )?;
    }
    if !measures.is_empty() {
        let mdir = dir.join("measures");
        fs::create_dir_all(&mdir)?;
        let mut index = Vec::with_capacity(measures.len());
        for (i, rec) in measures.iter().enumerate() {
            let file = format!("m{i:06}.csv");
            write_measure_csv(&mdir.join(&file), rec.measure)?;
            index.push(MeasureIndexRow {
                measure: i,
                sample: rec.sample,
                origin: rec.origin.to_string(),
                energy: rec.energy,
                center: localization_center(rec.measure),
                u: rec.u,
                file,
            });
        }
        write_rows(&mdir.join("index.csv"), index)?;
    }
    Ok(())
}

/// Read whatever parts of an ensemble directory are present.
pub fn read_ensemble(dir: &Path) -> Result<Ensemble> {
    let mut ensemble = Ensemble::default();
    let samples_path = dir.join("samples.csv");
    if samples_path.exists() {
        let samples: Vec<SampleRow> = read_rows(&samples_path)?;
        let rows: Vec<PointRow> = read_rows(&dir.join("points.csv"))?;
        let mut by_sample: Vec<Vec<f64>> = vec![Vec::new(); samples.len()];
        for r in rows {
            by_sample
                .get_mut(r.sample)
                .ok_or_else(|| {
                    Error::invalid(format!("point refers to unknown sample {}", r.sample))
                })?
                .push(r.position);
        }
        for (s, pts) in samples.iter().zip(by_sample) {
            let window = Window::new(s.window_lo, s.window_hi)?;
            ensemble
                .points
                .push(PointSample::new(window, pts, s.origin.parse()?));
        }
    }
    let index_path = dir.join("measures").join("index.csv");
    if index_path.exists() {
        let rows: Vec<MeasureIndexRow> = read_rows(&index_path)?;
        for r in rows {
            let m = read_measure_csv(&dir.join("measures").join(&r.file))?;
            ensemble.measures.push(EigenfunctionMeasure::from_density(
                m.density().to_vec(),
                r.energy,
            )?);
        }
    }
    if ensemble.points.is_empty() && ensemble.measures.is_empty() {
        return Err(Error::invalid(format!(
            "{} holds no samples.csv or measures/index.csv",
            dir.display()
        )));
    }
    Ok(ensemble)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
}

impl From<&GapStatistics> for GapSummary {
    fn from(g: &GapStatistics) -> Self {
        Self {
            count: g.len(),
            mean: g.mean,
            sd: g.sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSummary {
    pub count: usize,
    pub ks_uniform: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub simulate_seconds: f64,
    pub write_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub realizations: usize,
    pub seeds: Vec<u64>,
    pub counts: Vec<usize>,
    pub eigenvalues_total: usize,
    /// `L (√b - √a) / π`.
    pub expected_count: f64,
    pub tau_e0: f64,
    pub beta_e0: f64,
    pub gaps: Option<GapSummary>,
    pub centers: Option<CenterSummary>,
    /// With `g₂ ≡ 1`.
    pub kernel_average: KernelAverage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

pub fn summarize(
    config: &ExperimentConfig,
    outputs: &[RealizationOutput],
) -> Result<SimulationSummary> {
    let spectra: Vec<_> = outputs.iter().map(|o| &o.spectrum).collect();
    let gaps = pooled_gaps(outputs.iter().map(|o| &o.points));
    let gaps = if gaps.is_empty() {
        None
    } else {
        Some(GapSummary::from(&GapStatistics::from_gaps(gaps)?))
    };
    let centers: Vec<f64> = outputs
        .iter()
        .flat_map(|o| o.pairs.iter().map(|p| localization_center(&p.measure)))
        .collect();
    let tau = config.tau_e0()?;
    Ok(SimulationSummary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.echo(),
        realizations: outputs.len(),
        seeds: outputs.iter().map(|o| o.seed).collect(),
        counts: outputs.iter().map(|o| o.spectrum.len()).collect(),
        eigenvalues_total: outputs.iter().map(|o| o.spectrum.len()).sum(),
        expected_count: config.length * (config.j_hi.sqrt() - config.j_lo.sqrt())
            / std::f64::consts::PI,
        tau_e0: tau,
        beta_e0: if tau > 0.0 { 1.0 / tau } else { f64::INFINITY },
        gaps,
        centers: if centers.is_empty() {
            None
        } else {
            Some(CenterSummary {
                count: centers.len(),
                ks_uniform: ks_uniform(&centers)?,
            })
        },
        kernel_average: kernel_average(
            &spectra,
            config.length,
            config.j_lo,
            config.j_hi,
            0,
            |_, _, _| 1.0,
        )?,
        timings: None,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Write a simulation: spectra, ensemble files and `summary.json`.
pub fn write_simulation(
    dir: &Path,
    summary: &SimulationSummary,
    outputs: &[RealizationOutput],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_rows(
        &dir.join("spectra.csv"),
        outputs.iter().flat_map(|o| {
            o.spectrum
                .energies
                .iter()
                .zip(o.spectrum.indices())
                .map(move |(&energy, index)| SpectrumRow {
                    realization: o.index,
                    seed: o.seed,
                    index,
                    energy,
                })
        }),
    )?;
    let points: Vec<PointSample> = outputs.iter().map(|o| o.points.clone()).collect();
    let measures: Vec<MeasureRecord<'_>> = outputs
        .iter()
        .flat_map(|o| {
            o.pairs.iter().map(move |p| MeasureRecord {
                sample: o.index,
                origin: Origin::Simulation,
                energy: Some(p.energy),
                u: None,
                measure: &p.measure,
            })
        })
        .collect();
    write_ensemble(dir, &points, &measures)?;
    write_json(&dir.join("summary.json"), summary)
}

pub fn write_oracle_draws(dir: &Path, origin: Origin, draws: &[OracleDraw]) -> Result<()> {
    let points: Vec<PointSample> = draws.iter().filter_map(|d| d.points.clone()).collect();
    let measures: Vec<MeasureRecord<'_>> = draws
        .iter()
        .enumerate()
        .filter_map(|(i, d)| {
            d.measure.as_ref().map(|(m, u)| MeasureRecord {
                sample: i,
                origin,
                energy: None,
                u: Some(*u),
                measure: m,
            })
        })
        .collect();
    write_ensemble(dir, &points, &measures)
}

/// Derived data and gnuplot scripts under `<dir>/plots`; returns the scripts.
pub fn write_plot_scripts(dir: &Path) -> Result<Vec<PathBuf>> {
    let ensemble = read_ensemble(dir)?;
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;
    let mut scripts = Vec::new();

    let gaps = pooled_gaps(&ensemble.points);
    if !gaps.is_empty() {
        let g = GapStatistics::from_gaps(gaps)?;
        let mut data = String::from("# gap ecdf\n");
        for (i, x) in g.gaps.iter().enumerate() {
            data.push_str(&format!("{x} {}\n", (i + 1) as f64 / g.len() as f64));
        }
        fs::write(plots.join("gaps.dat"), data)?;
        let script = plots.join("gaps.gp");
        fs::write(
            &script,
            "set title 'rescaled gaps'\nset xlabel 'gap'\nset ylabel 'ECDF'\nset key bottom right\n\
             plot 'gaps.dat' using 1:2 with steps title 'sample', \
             1 - exp(-x/pi) title 'Poisson(1/pi)', (x >= pi) title 'clock'\n",
        )?;
        scripts.push(script);
    }
    if !ensemble.measures.is_empty() {
        let mut data = String::new();
        for (k, m) in ensemble.measures.iter().take(8).enumerate() {
            for (c, d) in m.cell_centers().zip(m.density()) {
                data.push_str(&format!("{c} {d}\n"));
            }
            if k + 1 < ensemble.measures.len().min(8) {
                data.push_str("\n\n");
            }
        }
        fs::write(plots.join("measures.dat"), data)?;
        let n = ensemble.measures.len().min(8);
        let script = plots.join("measures.gp");
        fs::write(
            &script,
            format!(
                "set title 'eigenfunction measures'\nset xlabel 't'\nset ylabel 'density'\n\
                 plot for [i=0:{}] 'measures.dat' index i using 1:2 with lines title sprintf('%d', i)\n",
                n - 1
            ),
        )?;
        scripts.push(script);

        let centers: Vec<f64> = ensemble.centers();
        let mut sorted = centers.clone();
        sorted.sort_by(f64::total_cmp);
        let data: String = sorted
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c} {}\n", (i + 1) as f64 / sorted.len() as f64))
            .collect();
        fs::write(plots.join("centers.dat"), data)?;
        let script = plots.join("centers.gp");
        fs::write(
            &script,
            "set title 'localization centres'\nset xrange [0:1]\nset key bottom right\n\
             plot 'centers.dat' using 1:2 with steps title 'ECDF', x title 'uniform'\n",
        )?;
        scripts.push(script);
    }
    if dir.join("spectra.csv").exists() {
        let script = plots.join("spectra.gp");
        fs::write(
            &script,
            "set title 'eigenvalues in J'\nset datafile separator ','\nset xlabel 'E'\n\
             binwidth = 0.002\nbin(x) = binwidth * floor(x / binwidth)\n\
             plot '../spectra.csv' every ::1 using (bin($4)):(1.0) smooth freq with boxes title 'count'\n",
        )?;
        scripts.push(script);
    }
    Ok(scripts)
}
