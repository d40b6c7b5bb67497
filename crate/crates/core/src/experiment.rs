//! Monte Carlo experiments: configuration, per-realization pipeline,
//! energy-pair sampling and the kernel-averaged observable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;

use crate::decay::DecayProfile;
use crate::error::{Error, Result};
use crate::fd::{assemble, rescaled_process, GridHamiltonian, SpectrumWindow};
use crate::measure::{build_measure, EigenfunctionMeasure, DEFAULT_CELLS};
use crate::oracles::{
    clock_sample, expbm_measure_sample, poisson_sample, sine_beta_sample_with, Kernel, OracleKind,
    SineBetaConfig,
};
use crate::points::{PointSample, Window};
use crate::prufer::{rho_ensemble, sde_diagnostics, RhoEnsembleSpec, SdeDiagnostics};
use crate::rng::{derive_labeled, derive_seed, pairwise_mean, rng_from_seed};
use crate::stats::Ensemble;
use crate::torus::{lyapunov_tau, sample_brownian_path, DiffusionSpec, TorusField};

/// Which eigenpairs of a realization get a measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSelection {
    All,
    /// Up to `k` eigenvalues of `J`, uniformly without replacement.
    Sample(usize),
}

/// Reference ensemble written next to a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleChoice {
    /// Chosen from `α`: clock for `α > 1/2`, `Sine_β` with `exp_bm` at
    /// `β = 1/τ(E₀)` for `α = 1/2`, Poisson with point masses for `α < 1/2`.
    Auto,
    Fixed(OracleKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub e0: f64,
    pub j_lo: f64,
    pub j_hi: f64,
    pub length: f64,
    /// Prüfer horizon for `sde-check`; defaults to `length`.
    pub n: f64,
    pub h: f64,
    pub dt: f64,
    pub n_realizations: usize,
    pub master_seed: u64,
    pub field: TorusField,
    pub sigma2: f64,
    pub measure_cells: usize,
    pub pairs: PairSelection,
    pub oracle: Option<OracleChoice>,
    pub output_dir: Option<PathBuf>,
}

const KEYS: [&str; 16] = [
    "alpha",
    "e0",
    "j_lo",
    "j_hi",
    "length",
    "n",
    "h",
    "dt",
    "n_realizations",
    "master_seed",
    "field",
    "sigma2",
    "measure_cells",
    "pairs",
    "oracle",
    "output_dir",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

/// `clock`, `poisson`, `sine_beta:β`, `exp_bm:τ[:kernel]` or `auto`.
pub fn parse_oracle_choice(spec: &str) -> Result<OracleChoice> {
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or_default();
    if name == "auto" {
        return Ok(OracleChoice::Auto);
    }
    let param = parts
        .next()
        .map(|p| parse_num::<f64>("oracle", p))
        .transpose()?;
    let kernel = parts
        .next()
        .map(str::parse::<Kernel>)
        .transpose()?
        .unwrap_or_default();
    OracleKind::parse(name, param, kernel).map(OracleChoice::Fixed)
}

fn oracle_choice_string(choice: &OracleChoice) -> String {
    match choice {
        OracleChoice::Auto => "auto".into(),
        OracleChoice::Fixed(OracleKind::Clock) => "clock".into(),
        OracleChoice::Fixed(OracleKind::Poisson) => "poisson".into(),
        OracleChoice::Fixed(OracleKind::SineBeta { beta }) => format!("sine_beta:{beta}"),
        OracleChoice::Fixed(OracleKind::ExpBm { tau, kernel }) => format!("exp_bm:{tau}:{kernel}"),
    }
}

impl ExperimentConfig {
    /// Parse flat `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("unknown key {key:?}")));
            }
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key {key:?}")));
            }
        }
        Self::from_map(&map)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let num = |k: &str| get(k).map(|v| parse_num::<f64>(k, v)).transpose();
        let alpha = num("alpha")?.ok_or_else(|| Error::Config("missing key \"alpha\"".into()))?;
        let length =
            num("length")?.ok_or_else(|| Error::Config("missing key \"length\"".into()))?;
        let (e0, j_lo, j_hi) = match (num("e0")?, num("j_lo")?, num("j_hi")?) {
            (Some(e0), None, None) => (e0, 0.95 * e0, 1.05 * e0),
            (e0, Some(a), Some(b)) => (e0.unwrap_or(0.5 * (a + b)), a, b),
            _ => {
                return Err(Error::Config(
                    "give e0, or both j_lo and j_hi (optionally with e0)".into(),
                ))
            }
        };
        let h = num("h")?.unwrap_or(0.02);
        let config = Self {
            alpha,
            e0,
            j_lo,
            j_hi,
            length,
            n: num("n")?.unwrap_or(length),
            h,
            dt: num("dt")?.unwrap_or(h),
            n_realizations: get("n_realizations")
                .map(|v| parse_num("n_realizations", v))
                .transpose()?
                .unwrap_or(1),
            master_seed: get("master_seed")
                .map(|v| parse_num("master_seed", v))
                .transpose()?
                .unwrap_or(0),
            field: get("field").unwrap_or("cos").parse()?,
            sigma2: num("sigma2")?.unwrap_or(1.0),
            measure_cells: get("measure_cells")
                .map(|v| parse_num("measure_cells", v))
                .transpose()?
                .unwrap_or(DEFAULT_CELLS),
            pairs: match get("pairs") {
                None => PairSelection::Sample(1),
                Some("all") => PairSelection::All,
                Some(v) => PairSelection::Sample(parse_num("pairs", v)?),
            },
            oracle: get("oracle").map(parse_oracle_choice).transpose()?,
            output_dir: get("output_dir").map(PathBuf::from),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        DecayProfile::new(self.alpha)?;
        DiffusionSpec::new(self.sigma2)?;
        self.field.validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("e0", self.e0)?;
        positive("j_lo", self.j_lo)?;
        positive("length", self.length)?;
        positive("n", self.n)?;
        positive("h", self.h)?;
        positive("dt", self.dt)?;
        if !(self.j_lo < self.j_hi && self.j_hi.is_finite()) {
            return Err(Error::invalid(format!(
                "need 0 < j_lo < j_hi, got [{}, {}]",
                self.j_lo, self.j_hi
            )));
        }
        if self.n_realizations == 0 {
            return Err(Error::invalid("n_realizations must be at least 1"));
        }
        if self.measure_cells == 0 {
            return Err(Error::invalid("measure_cells must be at least 1"));
        }
        if self.pairs == PairSelection::Sample(0) {
            return Err(Error::invalid("pairs must be \"all\" or at least 1"));
        }
        if self.dt > self.h * (1.0 + 1e-9) {
            return Err(Error::invalid(format!(
                "dt = {} must not exceed h = {}",
                self.dt, self.h
            )));
        }
        if self.h >= self.length / 3.0 {
            return Err(Error::invalid("h must leave at least 3 grid cells"));
        }
        if self.j_hi * self.h * self.h >= 4.0 {
            return Err(Error::invalid("grid too coarse for J (need j_hi h² < 4)"));
        }
        Ok(())
    }

    pub fn profile(&self) -> DecayProfile {
        DecayProfile::new(self.alpha).expect("validated")
    }

    pub fn diffusion(&self) -> DiffusionSpec {
        DiffusionSpec::new(self.sigma2).expect("validated")
    }

    pub fn tau_e0(&self) -> Result<f64> {
        lyapunov_tau(&self.field, self.diffusion(), self.e0)
    }

    /// Canonical `key = value` echo of every field.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("alpha".into(), self.alpha.to_string());
        m.insert("e0".into(), self.e0.to_string());
        m.insert("j_lo".into(), self.j_lo.to_string());
        m.insert("j_hi".into(), self.j_hi.to_string());
        m.insert("length".into(), self.length.to_string());
        m.insert("n".into(), self.n.to_string());
        m.insert("h".into(), self.h.to_string());
        m.insert("dt".into(), self.dt.to_string());
        m.insert("n_realizations".into(), self.n_realizations.to_string());
        m.insert("master_seed".into(), self.master_seed.to_string());
        m.insert("field".into(), self.field.to_string());
        m.insert("sigma2".into(), self.sigma2.to_string());
        m.insert("measure_cells".into(), self.measure_cells.to_string());
        m.insert(
            "pairs".into(),
            match self.pairs {
                PairSelection::All => "all".into(),
                PairSelection::Sample(k) => k.to_string(),
            },
        );
        if let Some(o) = &self.oracle {
            m.insert("oracle".into(), oracle_choice_string(o));
        }
        if let Some(d) = &self.output_dir {
            m.insert("output_dir".into(), d.display().to_string());
        }
        m
    }

    pub fn to_text(&self) -> String {
        self.echo().iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }

    pub fn realization_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, index as u64)
    }

    /// `H_L` of realization `index`.
    pub fn hamiltonian(&self, index: usize) -> Result<GridHamiltonian> {
        let path = sample_brownian_path(
            self.length + self.dt,
            self.dt,
            self.diffusion(),
            self.realization_seed(index),
        )?;
        assemble(&path, &self.field, &self.profile(), self.length, self.h)
    }
}

/// An eigenvalue in `J` with its measure; `lambda = L(√E - √E₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub realization: usize,
    /// Oscillation index of the eigenvector.
    pub index: usize,
    pub energy: f64,
    pub measure: EigenfunctionMeasure,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationOutput {
    pub index: usize,
    pub seed: u64,
    pub spectrum: SpectrumWindow,
    pub pairs: Vec<PairSample>,
    pub points: PointSample,
}

fn pair_from(
    config: &ExperimentConfig,
    ham: &GridHamiltonian,
    spectrum: &SpectrumWindow,
    realization: usize,
    k: usize,
) -> Result<PairSample> {
    let pair = ham.eigenpair(spectrum, k)?;
    let measure = build_measure(&pair, pair.energy, config.measure_cells)?;
    Ok(PairSample {
        realization,
        index: pair.index,
        energy: pair.energy,
        measure,
        lambda: Some(config.length * (pair.energy.sqrt() - config.e0.sqrt())),
    })
}

/// One disorder path: its spectrum in `J`, the selected pairs and `ξ_{L,E₀}`.
pub fn run_realization(config: &ExperimentConfig, index: usize) -> Result<RealizationOutput> {
    let run = || -> Result<RealizationOutput> {
        config.validate()?;
        let seed = config.realization_seed(index);
        let ham = config.hamiltonian(index)?;
        let spectrum = ham.eigenvalues_in(config.j_lo, config.j_hi)?;
        let chosen: Vec<usize> = match config.pairs {
            PairSelection::All => (0..spectrum.len()).collect(),
            PairSelection::Sample(k) => {
                let mut rng = rng_from_seed(derive_labeled(seed, "pairs"));
                let mut v =
                    sample_indices(&mut rng, spectrum.len(), k.min(spectrum.len())).into_vec();
                v.sort_unstable();
                v
            }
        };
        let pairs = chosen
            .into_iter()
            .map(|k| pair_from(config, &ham, &spectrum, index, k))
            .collect::<Result<Vec<_>>>()?;
        let points = rescaled_process(&spectrum, config.length, config.e0)?;
        Ok(RealizationOutput {
            index,
            seed,
            spectrum,
            pairs,
            points,
        })
    };
    run().map_err(|e| Error::Realization {
        index,
        source: Box::new(e),
    })
}

/// All realizations, in parallel, merged in index order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RealizationOutput>> {
    config.validate()?;
    (0..config.n_realizations)
        .into_par_iter()
        .map(|i| run_realization(config, i))
        .collect()
}

pub fn ensemble_of(outputs: &[RealizationOutput]) -> Ensemble {
    Ensemble {
        points: outputs.iter().map(|o| o.points.clone()).collect(),
        measures: outputs
            .iter()
            .flat_map(|o| o.pairs.iter().map(|p| p.measure.clone()))
            .collect(),
    }
}

/// `(realization, k)`: a uniformly chosen realization, then a uniform
/// eigenvalue of its window. Empty windows are redrawn among the
/// realizations not tried yet.
pub fn sample_energy_index<R: Rng + ?Sized>(
    spectra: &[&SpectrumWindow],
    rng: &mut R,
) -> Result<(usize, usize)> {
    let mut untried: Vec<usize> = (0..spectra.len()).collect();
    while !untried.is_empty() {
        let r = untried.swap_remove(rng.random_range(0..untried.len()));
        let n = spectra[r].len();
        if n > 0 {
            return Ok((r, rng.random_range(0..n)));
        }
    }
    Err(Error::Statistical(
        "no eigenvalue in J in any realization".into(),
    ))
}

/// Draw `(E_J, μ)` across realizations; the chosen Hamiltonian is rebuilt
/// from its seed.
pub fn sample_energy_pair(
    config: &ExperimentConfig,
    spectra: &[&SpectrumWindow],
    seed: u64,
) -> Result<PairSample> {
    let mut rng = rng_from_seed(seed);
    let (r, k) = sample_energy_index(spectra, &mut rng)?;
    let ham = config.hamiltonian(r)?;
    pair_from(config, &ham, spectra[r], r, k)
}

/// Both sides of the averaging identity for `g₁(x) = (1 - |x|)₊`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelAverage {
    /// `(1/N(J)) ∫_J dN(E₀) Σ_j g₁(L(√E_j - √E₀)) g₂_j`, by quadrature.
    pub quadrature: f64,
    /// `Σ_j g₂_j / (π L N(J))`.
    pub identity: f64,
    pub relative_difference: f64,
    pub grid_points: usize,
}

pub fn hat(x: f64) -> f64 {
    (1.0 - x.abs()).max(0.0)
}

/// Average over realizations of both evaluations, with `N(E) = √E/π`. The
/// `E₀` integral is a trapezoid rule in `κ₀ = √E₀` (`dN = dκ₀/π`);
/// `grid_points = 0` picks 16 nodes per kernel width. `g2(r, k, E)` is
/// evaluated for eigenvalue `k` of realization `r`.
pub fn kernel_average(
    spectra: &[&SpectrumWindow],
    length: f64,
    j_lo: f64,
    j_hi: f64,
    grid_points: usize,
    g2: impl Fn(usize, usize, f64) -> f64,
) -> Result<KernelAverage> {
    if !(0.0 < j_lo && j_lo < j_hi && length > 0.0) {
        return Err(Error::invalid("need 0 < j_lo < j_hi and L > 0"));
    }
    let (ka, kb) = (j_lo.sqrt(), j_hi.sqrt());
    let nodes = if grid_points == 0 {
        (16.0 * length * (kb - ka)).ceil() as usize + 1
    } else {
        grid_points.max(2)
    };
    if spectra.is_empty() {
        return Ok(KernelAverage {
            quadrature: 0.0,
            identity: 0.0,
            relative_difference: 0.0,
            grid_points: nodes,
        });
    }
    let step = (kb - ka) / (nodes - 1) as f64;
    let mut quad = Vec::with_capacity(spectra.len());
    let mut ident = Vec::with_capacity(spectra.len());
    for (r, spec) in spectra.iter().enumerate() {
        let items: Vec<(f64, f64)> = spec
            .energies
            .iter()
            .enumerate()
            .map(|(k, &e)| (e.sqrt(), g2(r, k, e)))
            .collect();
        let weights: Vec<f64> = items.iter().map(|x| x.1).collect();
        ident.push(crate::rng::pairwise_sum(&weights) / (length * (kb - ka)));
        let values: Vec<f64> = (0..nodes)
            .map(|i| {
                let k0 = ka + i as f64 * step;
                let w = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
                w * items
                    .iter()
                    .map(|&(kj, g)| hat(length * (kj - k0)) * g)
                    .sum::<f64>()
            })
            .collect();
        quad.push(crate::rng::pairwise_sum(&values) * step / (kb - ka));
    }
    let quadrature = pairwise_mean(&quad);
    let identity = pairwise_mean(&ident);
    let relative_difference = if identity != 0.0 {
        (quadrature - identity).abs() / identity.abs()
    } else {
        (quadrature - identity).abs()
    };
    Ok(KernelAverage {
        quadrature,
        identity,
        relative_difference,
        grid_points: nodes,
    })
}

/// Moments of `ρ̃_t - ρ̃_s` over `n_realizations` paths at `κ = √E₀ + λ/n`.
pub fn sde_check(config: &ExperimentConfig, s: f64, t: f64, lambda: f64) -> Result<SdeDiagnostics> {
    config.validate()?;
    let spec = RhoEnsembleSpec {
        field: config.field.clone(),
        profile: config.profile(),
        diffusion: config.diffusion(),
        n: config.n,
        kappa0: config.e0.sqrt(),
        lambda,
        dt: config.dt,
        t_grid: vec![s, t],
        n_paths: config.n_realizations,
        master_seed: config.master_seed,
    };
    let ensemble = rho_ensemble(&spec)?;
    sde_diagnostics(&ensemble, s, t)
}

/// One oracle realization: points and/or measure (with its centre `U`).
#[derive(Debug, Clone, PartialEq)]
pub struct OracleDraw {
    pub points: Option<PointSample>,
    pub measure: Option<(EigenfunctionMeasure, f64)>,
}

/// Oracle ensemble matched to a simulation: same window, count and cells.
pub fn oracle_ensemble(config: &ExperimentConfig, choice: OracleChoice) -> Result<Vec<OracleDraw>> {
    let k0 = config.e0.sqrt();
    let map = |e: f64| config.length * (e.sqrt() - k0);
    let window = Window::new(map(config.j_lo), map(config.j_hi).next_up())?;
    let sine = SineBetaConfig::default();
    let cells = config.measure_cells;
    let kinds: Vec<OracleKind> = match choice {
        OracleChoice::Fixed(kind) => vec![kind],
        OracleChoice::Auto => {
            let alpha = config.alpha;
            if alpha > 0.5 {
                vec![OracleKind::Clock]
            } else if alpha < 0.5 {
                vec![OracleKind::Poisson]
            } else {
                let tau = config.tau_e0()?;
                vec![
                    OracleKind::SineBeta { beta: 1.0 / tau },
                    OracleKind::ExpBm {
                        tau,
                        kernel: Kernel::LogRatio,
                    },
                ]
            }
        }
    };
    let base = derive_labeled(config.master_seed, "oracle");
    (0..config.n_realizations)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(base, i as u64);
            let mut draw = OracleDraw {
                points: None,
                measure: None,
            };
            for kind in &kinds {
                match *kind {
                    OracleKind::Clock => draw.points = Some(clock_sample(window, seed)),
                    OracleKind::Poisson => draw.points = Some(poisson_sample(window, seed)),
                    OracleKind::SineBeta { beta } => {
                        let reach = sine.reach();
                        let w = Window::new(window.lo.max(-reach), window.hi.min(reach))?;
                        draw.points = Some(sine_beta_sample_with(beta, w, seed, &sine)?);
                    }
                    OracleKind::ExpBm { tau, kernel } => {
                        let s = derive_labeled(seed, "measure");
                        draw.measure = Some(expbm_measure_sample(tau, kernel, cells, s)?);
                    }
                }
            }
            if matches!(choice, OracleChoice::Auto) && draw.measure.is_none() {
                let mut rng = rng_from_seed(derive_labeled(seed, "measure"));
                let u: f64 = rng.random();
                draw.measure = Some(if config.alpha > 0.5 {
                    (EigenfunctionMeasure::uniform(cells), u)
                } else {
                    let cell = ((u * cells as f64) as usize).min(cells - 1);
                    (EigenfunctionMeasure::concentrated(cells, cell), u)
                });
            }
            Ok(draw)
        })
        .collect()
}
