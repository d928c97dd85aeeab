//! Experiment runner behind the `horolab` binary.
//!
//! A run is `(command, config, seed)`; it produces a list of artifacts that
//! are written atomically. Identical inputs give byte-identical artifacts.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::averages::{
    coefficient_decay_fit, decay_scan, default_base_point, discrete_decay_scan, folner_average,
    geometric_grid, twisted_average, vdc_check, vdc_suite, Observable,
};
use crate::diophantine::{
    alpha_profile, nondivergence_fraction, theta_diophantine_check, DiophSpec, PolyBound,
};
use crate::error::Error;
use crate::group::{DiagonalFlow, FolnerBall, HoroSubgroup, SquareMatrix};
use crate::homspace::{BumpProfile, HeisenbergPoint, ModularPoint, TestFunction};
use crate::nilchar::{
    affine_phase_fit, degree_probe, differentiate_sequence, e, heis_char_eval, orbit_character,
    uniform_grid, NilCharacter, SampledSequence, Twist,
};
use crate::qmc::rng_from_seed;
use crate::quadrature::{QuadratureSpec, Scheme};
use crate::rates::{default_d, rates_report, RateParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Avg,
    Decay,
    Vdc,
    Alpha,
    Dioph,
    Coeff,
    Gamma,
    Invariance,
    Discrete,
    Nondiv,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Avg => "avg",
            Command::Decay => "decay",
            Command::Vdc => "vdc",
            Command::Alpha => "alpha",
            Command::Dioph => "dioph",
            Command::Coeff => "coeff",
            Command::Gamma => "gamma",
            Command::Invariance => "invariance",
            Command::Discrete => "discrete",
            Command::Nondiv => "nondiv",
        }
    }

    fn primary_extension(&self) -> &'static str {
        match self {
            Command::Decay | Command::Discrete => "csv",
            _ => "json",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(e) => e.kind(),
            CliError::Io(_) => "io",
        }
    }

    /// One-line JSON error record.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "status": "error",
            "exit_code": self.exit_code(),
            "kind": self.kind(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::QuadratureNonConvergence { .. }
            | Error::ReductionDiverged(_)
            | Error::LowSignal(_) => CliError::Numerical(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    Sl2,
    Sl3,
    Sl3Corner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwistKind {
    Trivial,
    Character,
    Quadratic,
    Linear,
}

/// Flat experiment record; every field is optional and unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_point: Option<SquareMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twist: Option<TwistKind>,
    /// Frequency of the character (or of the quadratic / linear phase).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 3]>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub big_r: Option<f64>,
    #[serde(rename = "R_min", skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(rename = "R_max", skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    /// Shift range of a single `vdc` check (with `R`); flow time of `nondiv`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Even nonzero index selects the angular twist of the test function.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fourier_index: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_rel_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_b: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_configs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    /// Coefficients of the radius bound, constant term first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_equi: Option<f64>,
    #[serde(rename = "d_H", skip_serializing_if = "Option::is_none")]
    pub d_h: Option<f64>,
    #[serde(rename = "dim_H", skip_serializing_if = "Option::is_none")]
    pub dim_h: Option<usize>,
    #[serde(rename = "dim_N", skip_serializing_if = "Option::is_none")]
    pub dim_n: Option<usize>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(rename = "dim_G", skip_serializing_if = "Option::is_none")]
    pub dim_g: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub re_s1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn group(&self) -> GroupKind {
        self.group.unwrap_or(GroupKind::Sl2)
    }

    fn subgroup(&self) -> HoroSubgroup {
        match self.group() {
            GroupKind::Sl2 => HoroSubgroup::sl2_upper(),
            GroupKind::Sl3 => HoroSubgroup::heisenberg_sl3(),
            GroupKind::Sl3Corner => HoroSubgroup::corner_sl3(),
        }
    }

    fn quadrature(&self, seed: u64) -> QuadratureSpec {
        let d = QuadratureSpec::default();
        QuadratureSpec {
            scheme: match self.group() {
                GroupKind::Sl2 => Scheme::UniformDoubling1d,
                _ => Scheme::McQuasirandom3d,
            },
            target_rel_err: self.target_rel_err.unwrap_or(d.target_rel_err),
            max_nodes: self.max_nodes.unwrap_or(d.max_nodes),
            seed,
        }
    }

    fn observable(&self) -> Result<Observable, CliError> {
        let profile = BumpProfile::new(
            self.profile_lo.unwrap_or(1.5),
            self.profile_hi.unwrap_or(3.0),
            self.amplitude.unwrap_or(1.0),
        )?;
        let f = match self.fourier_index.unwrap_or(0) {
            0 => TestFunction::incomplete_eisenstein(profile)?,
            n => TestFunction::angular_twist(profile, n)?,
        };
        Ok(Observable::Test(f))
    }

    fn origin(&self) -> HeisenbergPoint {
        let o = self.origin.unwrap_or([0.0; 3]);
        HeisenbergPoint::new(o[0], o[1], o[2])
    }

    fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(GOLDEN)
    }

    fn twist(&self) -> Result<Twist, CliError> {
        Ok(match self.twist.unwrap_or(TwistKind::Trivial) {
            TwistKind::Trivial => Twist::Trivial,
            TwistKind::Character => {
                Twist::Character(NilCharacter::new(self.alpha(), self.origin())?)
            }
            TwistKind::Quadratic => Twist::Quadratic {
                alpha: self.alpha(),
            },
            TwistKind::Linear => Twist::Linear { beta: self.alpha() },
        })
    }

    fn base_point(&self, default: SquareMatrix) -> SquareMatrix {
        self.base_point.unwrap_or(default)
    }

    fn modular_point(&self) -> Result<ModularPoint, CliError> {
        let g = self.base_point(default_base_point());
        if g.dim() != 2 {
            return Err(CliError::Config(
                "base_point must be 2×2 for this command".into(),
            ));
        }
        Ok(ModularPoint::new(g)?)
    }

    fn grid(&self, lo: f64, hi: f64, ratio: f64) -> Result<Vec<f64>, CliError> {
        if let Some(g) = &self.r_grid {
            return Ok(g.clone());
        }
        Ok(geometric_grid(
            self.r_min.unwrap_or(lo),
            self.r_max.unwrap_or(hi),
            self.ratio.unwrap_or(ratio),
        )?)
    }

    fn rate_params(&self) -> RateParams {
        let d = RateParams::horocycle_instance();
        RateParams {
            gamma_equi: self.gamma_equi.unwrap_or(d.gamma_equi),
            s: self.s.unwrap_or(d.s),
            d_h: self.d_h.unwrap_or(d.d_h),
            dim_h: self.dim_h.unwrap_or(d.dim_h),
            dim_n: self.dim_n.unwrap_or(d.dim_n),
            m: self.m.unwrap_or(d.m),
            dim_g: self.dim_g.unwrap_or(d.dim_g),
        }
    }
}

const GOLDEN: f64 = 1.618_033_988_749_895;

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub path: PathBuf,
    pub contents: String,
}

/// Where the primary artifact of `command` goes.
pub fn output_path(command: Command, config: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    match (out, &config.out) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => PathBuf::from(format!(
            "horolab-{}.{}",
            command.name(),
            command.primary_extension()
        )),
    }
}

fn report_path(primary: &Path) -> PathBuf {
    primary.with_extension("report.json")
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Run one experiment. `seed` overrides the seed of the config.
pub fn run(
    command: Command,
    config: &ExperimentConfig,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<Vec<Artifact>, CliError> {
    let seed = seed.or(config.seed).unwrap_or(0);
    let primary = output_path(command, config, out);
    let q = config.quadrature(seed);
    let one = |contents: String| {
        Ok(vec![Artifact {
            path: primary.clone(),
            contents,
        }])
    };
    match command {
        Command::Avg => {
            let r = config.big_r.unwrap_or(64.0);
            let (value, nodes) = if config.group() == GroupKind::Sl2 {
                let a = twisted_average(
                    &config.observable()?,
                    &config.twist()?,
                    &config.modular_point()?,
                    r,
                    &q,
                )?;
                (a.value, a.nodes)
            } else {
                // the bracket character on the unipotent radical
                let ball = FolnerBall::new(config.subgroup(), r)?;
                let origin = config.origin();
                let a = folner_average(
                    &ball,
                    |h| match HeisenbergPoint::from_matrix(h) {
                        Ok(p) => heis_char_eval(&p.mul(&origin)),
                        Err(_) => num_complex::Complex64::new(f64::NAN, f64::NAN),
                    },
                    &q,
                )?;
                (a.value, a.nodes)
            };
            one(json(&serde_json::json!({
                "R": r,
                "re": value.re,
                "im": value.im,
                "abs": value.norm(),
                "nodes": nodes,
            }))?)
        }
        Command::Decay | Command::Discrete => {
            let grid = config.grid(16.0, 4096.0, 2.0)?;
            let f = config.observable()?;
            let twist = config.twist()?;
            let x = config.modular_point()?;
            let scan = if command == Command::Decay {
                decay_scan(&f, &twist, &x, &grid, &q)?
            } else {
                discrete_decay_scan(&f, &twist, &x, &grid)?
            };
            Ok(vec![
                Artifact {
                    path: primary.clone(),
                    contents: scan.to_csv(),
                },
                Artifact {
                    path: report_path(&primary),
                    contents: json(&scan.report)?,
                },
            ])
        }
        Command::Vdc => {
            if let (Some(big_r), Some(r)) = (config.big_r, config.r) {
                let report = vdc_check(
                    &config.observable()?,
                    &config.twist()?,
                    &config.modular_point()?,
                    big_r,
                    r,
                    &q,
                    config.n_b.unwrap_or(8),
                    seed,
                )?;
                return one(json(&report)?);
            }
            let suite = vdc_suite(
                config.n_configs.unwrap_or(100),
                config.r_min.unwrap_or(16.0),
                config.r_max.unwrap_or(1024.0),
                config.n_b.unwrap_or(8),
                &q,
                seed,
            )?;
            one(json(&suite)?)
        }
        Command::Alpha => {
            let k = match config.group() {
                GroupKind::Sl2 => 2,
                _ => 3,
            };
            let g = config.base_point(SquareMatrix::identity(k));
            let profile = alpha_profile(&g)?;
            one(json(&serde_json::json!({
                "alpha_i": profile.values,
                "alpha": profile.alpha(),
                "certified": profile.certified,
                "search_bound": profile.search_bound,
            }))?)
        }
        Command::Dioph => {
            let sub = config.subgroup();
            let k = sub.dim();
            let g = config.base_point(if k == 2 {
                default_base_point()
            } else {
                SquareMatrix::identity(3)
            });
            let d = match config.d {
                Some(d) => d,
                None => default_d(1.0, sub.d_h(), k, k * k - 1)?,
            };
            let theta = PolyBound {
                coefficients: config.theta.clone().unwrap_or_else(|| vec![1.0]),
            };
            let spec = DiophSpec::new(d, theta, sub)?;
            let grid = config.grid(2.0, 4096.0, 2.0)?;
            let records =
                theta_diophantine_check(&g, &spec, &grid, config.n_samples.unwrap_or(64), seed)?;
            let witnessed = records.iter().filter(|r| r.witnessed()).count();
            one(json(&serde_json::json!({
                "D": d,
                "records": records,
                "witnessed": witnessed,
                "total": records.len(),
            }))?)
        }
        Command::Coeff => {
            let t_grid = config
                .t_grid
                .clone()
                .unwrap_or_else(|| (1..=8).map(f64::from).collect());
            let fit = coefficient_decay_fit(
                &config.observable()?,
                &DiagonalFlow::sl2(),
                &t_grid,
                config.n_samples.unwrap_or(200_000),
                seed,
            )?;
            one(json(&fit)?)
        }
        Command::Gamma => one(json(&rates_report(
            &config.rate_params(),
            config.re_s1.unwrap_or(1.0),
        )?)?),
        Command::Invariance => one(json(&invariance_suite(config, seed)?)?),
        Command::Nondiv => {
            let sub = config.subgroup();
            let k = sub.dim();
            let g = config.base_point(if k == 2 {
                default_base_point()
            } else {
                SquareMatrix::identity(3)
            });
            let d = match config.d {
                Some(d) => d,
                None => default_d(1.0, sub.d_h(), k, k * k - 1)?,
            };
            let theta = PolyBound {
                coefficients: config.theta.clone().unwrap_or_else(|| vec![1.0]),
            };
            let spec = DiophSpec::new(d, theta, sub)?;
            let big_r = config.big_r.unwrap_or(4.0);
            let eps = config.eps.unwrap_or(0.5);
            let flow_times = match (config.r, &config.t_grid) {
                (Some(r), _) => vec![r],
                (None, Some(g)) => g.clone(),
                (None, None) => vec![2.0, 8.0, 32.0, 128.0],
            };
            let mut reports = Vec::new();
            for (i, &r) in flow_times.iter().enumerate() {
                reports.push(nondivergence_fraction(
                    &g,
                    &spec,
                    big_r,
                    r,
                    eps,
                    config.n_samples.unwrap_or(2000),
                    seed.wrapping_add(i as u64),
                )?);
            }
            one(json(&reports)?)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceSuite {
    pub n_pairs: usize,
    pub max_invariance_residual: f64,
    pub n_grid: usize,
    pub max_orbit_deviation: f64,
    pub max_unimodularity_defect: f64,
    pub quadratic_double_difference_mean: f64,
    pub quadratic_single_difference_residual: f64,
    pub character_probe: crate::nilchar::DegreeProbe,
}

/// Nilcharacter checks: invariance under integer points, agreement of the
/// orbit sampling with the closed form, and differencing of `e(αt²/2)`.
pub fn invariance_suite(config: &ExperimentConfig, seed: u64) -> Result<InvarianceSuite, CliError> {
    let n_pairs = config.n_pairs.unwrap_or(1000);
    let n_grid = config.n_grid.unwrap_or(100_000);
    let alpha = config.alpha();
    let mut rng = rng_from_seed(seed);
    let mut max_inv: f64 = 0.0;
    for _ in 0..n_pairs {
        let p = HeisenbergPoint::new(
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
        );
        let g = [
            rng.gen_range(-10..=10),
            rng.gen_range(-10..=10),
            rng.gen_range(-10..=10),
        ];
        let q = HeisenbergPoint::from_matrix(
            &(p.matrix() * HeisenbergPoint::new(g[0] as f64, g[1] as f64, g[2] as f64).matrix()),
        )?;
        max_inv = max_inv.max((heis_char_eval(&p) - heis_char_eval(&q)).norm());
    }
    let grid = uniform_grid(-100.0, 100.0, n_grid);
    let orbit = orbit_character(alpha, grid.clone(), HeisenbergPoint::IDENTITY)?;
    let mut max_dev: f64 = 0.0;
    for (t, v) in grid.iter().zip(&orbit.values) {
        let u = alpha.sqrt() * t;
        let closed = e(alpha * t * t / 2.0 - u.rem_euclid(1.0) * u).conj();
        max_dev = max_dev.max((v - closed).norm());
    }
    let (k1, k2) = (0.6, 0.25);
    let quad = SampledSequence::sample(Twist::Quadratic { alpha }, grid);
    let d1 = differentiate_sequence(&quad, k1);
    let d2 = differentiate_sequence(&d1, k2);
    Ok(InvarianceSuite {
        n_pairs,
        max_invariance_residual: max_inv,
        n_grid,
        max_orbit_deviation: max_dev,
        max_unimodularity_defect: orbit.max_unimodularity_defect(),
        quadratic_double_difference_mean: d2.mean().norm(),
        quadratic_single_difference_residual: affine_phase_fit(&d1).2,
        character_probe: degree_probe(&orbit, config.max_order.unwrap_or(3).min(3), seed)?,
    })
}

/// Write `contents` next to `path` and rename it into place, so a failed run
/// never leaves a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::Io(e.to_string()))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))?;
    tmp.persist(path).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

/// Run and write every artifact; nothing is written unless the run succeeds.
pub fn execute(
    command: Command,
    config: &ExperimentConfig,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<Vec<PathBuf>, CliError> {
    let artifacts = run(command, config, out, seed)?;
    for a in &artifacts {
        write_atomic(&a.path, &a.contents)?;
    }
    Ok(artifacts.into_iter().map(|a| a.path).collect())
}
