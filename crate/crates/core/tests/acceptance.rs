//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use horolab::averages::{
    coefficient_decay_fit, decay_scan, default_base_point, discrete_average, discrete_decay_scan,
    horocycle, perturbation_check, vdc_suite, Observable, PERTURBATION_C_F,
};
use horolab::diophantine::{
    alpha_i, certified_alpha, remez_check_poly, theta_diophantine_check, DiophSpec, PolyBound,
    Polynomial,
};
use horolab::group::{
    bch, nil_exp, nil_log, split_by_weights, DiagonalFlow, FolnerBall, HoroSubgroup,
    NilAlgebraElement, SquareMatrix,
};
use horolab::homspace::ModularPoint;
use horolab::homspace::{reduce_modular, BumpProfile, HeisenbergPoint, TestFunction};
use horolab::nilchar::{
    affine_phase_fit, differentiate_sequence, e, heis_char_eval, orbit_character, uniform_grid,
    NilCharacter, SampledSequence, Twist,
};
use horolab::quadrature::QuadratureSpec;
use horolab::rates::{
    gamma_disjointness, gamma_equi_uniform, horocycle_closed_form_gamma, rates_report, RateParams,
    STATED_HOROCYCLE_GAMMA,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Residual allowed in the exact-algebra identities.
const ALGEBRA_TOL: f64 = 1e-10;
const ALGEBRA_CASES: usize = 1000;
const ALGEBRA_TIME: Duration = Duration::from_secs(10);
/// Accepted band for Monte Carlo volume / formula volume.
const VOLUME_BAND: (f64, f64) = (0.98, 1.02);
const VOLUME_SAMPLES: usize = 1_000_000;
const FEDERER_TOL: f64 = 1e-12;
const INVARIANCE_TOL: f64 = 1e-12;
const ORBIT_TOL: f64 = 1e-10;
const ORBIT_POINTS: usize = 100_000;
const NILCHAR_TIME: Duration = Duration::from_secs(5);
const VDC_CONFIGS: usize = 100;
/// Required `η̂ / σ` for a decay to count as significant.
const DECAY_SIGMAS: f64 = 2.0;
const UNTWISTED_TIME: Duration = Duration::from_secs(300);
const TWISTED_TIME: Duration = Duration::from_secs(600);
/// Floor for the twisted exponent.
const TWISTED_FLOOR: f64 = 0.0019;
const DEGREE_DROP_TOL: f64 = 1e-9;
const RATES_TOL: f64 = 1e-12;
const REMEZ_POLYNOMIALS: usize = 1000;
const PERTURBATION_TRIALS: usize = 20;
/// Largest accepted ratio of differences when `δ` is halved.
const HALVING_RATIO: f64 = 0.75;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn decay_grid() -> Vec<f64> {
    (4..=12).map(|j| 2f64.powi(j)).collect()
}

fn eisenstein() -> Observable {
    Observable::Test(
        TestFunction::incomplete_eisenstein(BumpProfile::new(1.5, 3.0, 1.0).unwrap()).unwrap(),
    )
}

fn base() -> ModularPoint {
    ModularPoint::new(default_base_point()).unwrap()
}

fn random_nil(rng: &mut ChaCha8Rng, dim: usize) -> NilAlgebraElement {
    let v: Vec<f64> = (0..dim * (dim - 1) / 2)
        .map(|_| rng.gen_range(-3.0..3.0))
        .collect();
    NilAlgebraElement::from_upper(dim, &v).unwrap()
}

fn exact_algebra() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 4];
    for i in 0..ALGEBRA_CASES {
        let dim = 2 + i % 2;
        let x = random_nil(&mut rng, dim);
        let back = nil_log(&nil_exp(&x)).map_err(|e| e.to_string())?;
        worst[0] = worst[0].max(back.matrix().max_abs_diff(x.matrix()));

        let y = random_nil(&mut rng, dim);
        let z = bch(&x, &y).map_err(|e| e.to_string())?;
        worst[1] = worst[1].max(nil_exp(&z).max_abs_diff(&(nil_exp(&x) * nil_exp(&y))));

        let flow = if dim == 2 {
            DiagonalFlow::sl2()
        } else {
            DiagonalFlow::sl3()
        };
        let entries: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let m = SquareMatrix::zeros(dim).map(|r, c, _| entries[r * dim + c]);
        worst[2] = worst[2].max(split_by_weights(&flow, &m).reconstruct().max_abs_diff(&m));

        let g = DiagonalFlow::sl2().at(rng.gen_range(-4.0..4.0))
            * horocycle(rng.gen_range(-5.0..5.0))
            * rotation(rng.gen_range(0.0..std::f64::consts::TAU));
        let (p, _) = reduce_modular(&g).map_err(|e| e.to_string())?;
        let (q, _) = reduce_modular(p.reduced()).map_err(|e| e.to_string())?;
        worst[3] = worst[3].max(q.reduced().max_abs_diff(p.reduced()));
    }
    let elapsed = start.elapsed();
    let names = ["exp/log", "bch", "split", "reduction"];
    for (n, w) in names.iter().zip(&worst) {
        ensure(*w < ALGEBRA_TOL, || format!("{n} residual {w:.2e}"))?;
    }
    ensure(elapsed < ALGEBRA_TIME, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "max residuals exp/log {:.1e}, bch {:.1e}, split {:.1e}, reduction {:.1e}; {:.2?}",
        worst[0], worst[1], worst[2], worst[3], elapsed
    ))
}

fn rotation(theta: f64) -> SquareMatrix {
    let (s, c) = theta.sin_cos();
    SquareMatrix::from_2x2([[c, -s], [s, c]])
}

fn volume_laws() -> Outcome {
    let heis = HoroSubgroup::heisenberg_sl3();
    ensure(heis.d_h() == 4.0, || {
        format!("Heisenberg d_H = {}", heis.d_h())
    })?;
    ensure(HoroSubgroup::sl2_upper().d_h() == 1.0, || {
        "SL2 d_H ≠ 1".into()
    })?;
    let mut ratios = Vec::new();
    for r in [1.0, 2.5] {
        let ball = FolnerBall::new(heis.clone(), r).map_err(|e| e.to_string())?;
        // uniform in matrix entries, which carry Haar measure on the group
        let w = ball.half_widths();
        let (w12, w13, w23) = (w[0], w[1], w[2]);
        let corner = w13 + w12 * w23 / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut inside = 0usize;
        for _ in 0..VOLUME_SAMPLES {
            let m = SquareMatrix::from_3x3([
                [
                    1.0,
                    rng.gen_range(-w12..w12),
                    rng.gen_range(-corner..corner),
                ],
                [0.0, 1.0, rng.gen_range(-w23..w23)],
                [0.0, 0.0, 1.0],
            ]);
            if ball.contains(&m) {
                inside += 1;
            }
        }
        let mc = inside as f64 / VOLUME_SAMPLES as f64 * 8.0 * w12 * w23 * corner;
        let ratio = mc / ball.volume();
        ensure(ratio >= VOLUME_BAND.0 && ratio <= VOLUME_BAND.1, || {
            format!("R = {r}: MC/formula = {ratio}")
        })?;
        ratios.push(ratio);
    }
    for sub in [
        HoroSubgroup::sl2_upper(),
        heis.clone(),
        HoroSubgroup::corner_sl3(),
    ] {
        for r in [1.0, 3.7, 100.0] {
            let small = FolnerBall::new(sub.clone(), r).map_err(|e| e.to_string())?;
            let big = FolnerBall::new(sub.clone(), 3.0 * r).map_err(|e| e.to_string())?;
            let want = 3f64.powf(sub.d_h());
            let got = big.volume() / small.volume();
            ensure((got / want - 1.0).abs() < FEDERER_TOL, || {
                format!("ratio {got} vs {want}")
            })?;
        }
    }
    Ok(format!(
        "MC/formula {:.4} (R=1), {:.4} (R=2.5); 3^d_H exact; d_H = 1, 4",
        ratios[0], ratios[1]
    ))
}

fn nilchar_invariance() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = HeisenbergPoint::new(
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
        );
        let g: [i64; 3] = [
            rng.gen_range(-10..=10),
            rng.gen_range(-10..=10),
            rng.gen_range(-10..=10),
        ];
        // matrix product as the group law oracle
        let gm = HeisenbergPoint::new(g[0] as f64, g[1] as f64, g[2] as f64).matrix();
        let q = HeisenbergPoint::from_matrix(&(p.matrix() * gm)).map_err(|e| e.to_string())?;
        worst = worst.max((heis_char_eval(&p) - heis_char_eval(&q)).norm());
    }
    let alpha = 1.618_033_988_749_895;
    let grid = uniform_grid(-100.0, 100.0, ORBIT_POINTS);
    let orbit = orbit_character(alpha, grid.clone(), HeisenbergPoint::IDENTITY)
        .map_err(|e| e.to_string())?;
    let mut dev: f64 = 0.0;
    for (t, v) in grid.iter().zip(&orbit.values) {
        let u = alpha.sqrt() * t;
        dev = dev.max((v - e(alpha * t * t / 2.0 - u.rem_euclid(1.0) * u).conj()).norm());
    }
    let elapsed = start.elapsed();
    ensure(worst < INVARIANCE_TOL, || {
        format!("invariance residual {worst:.2e}")
    })?;
    ensure(dev < ORBIT_TOL, || format!("orbit deviation {dev:.2e}"))?;
    ensure(elapsed < NILCHAR_TIME, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "invariance {worst:.1e}, orbit {dev:.1e}; {elapsed:.2?}"
    ))
}

fn van_der_corput() -> Outcome {
    let suite = vdc_suite(VDC_CONFIGS, 16.0, 1024.0, 8, &QuadratureSpec::default(), 4)
        .map_err(|e| e.to_string())?;
    ensure(suite.reports.len() == VDC_CONFIGS, || {
        "missing configurations".into()
    })?;
    ensure(suite.violations == 0, || {
        format!("{} violations", suite.violations)
    })?;
    let slack = suite
        .reports
        .iter()
        .map(|r| r.bound - r.a)
        .fold(f64::INFINITY, f64::min);
    Ok(format!(
        "{} configurations, 0 violations, min slack {slack:.3e}",
        suite.reports.len()
    ))
}

fn untwisted_decay() -> Outcome {
    let start = Instant::now();
    let scan = decay_scan(
        &eisenstein(),
        &Twist::Trivial,
        &base(),
        &decay_grid(),
        &QuadratureSpec::default(),
    )
    .map_err(|e| e.to_string())?;
    let rep = &scan.report;
    let t_grid: Vec<f64> = (1..=7).map(f64::from).collect();
    let coeff = coefficient_decay_fit(&eisenstein(), &DiagonalFlow::sl2(), &t_grid, 200_000, 7)
        .map_err(|e| e.to_string())?;
    let params = RateParams {
        gamma_equi: gamma_equi_uniform(coeff.s_hat, 3).map_err(|e| e.to_string())?,
        s: coeff.s_hat,
        d_h: 1.0,
        dim_h: 1,
        dim_n: 0,
        m: 12.0,
        dim_g: 3,
    };
    let floor = gamma_disjointness(&params).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(
        rep.fitted_eta > 0.0 && rep.significance() > DECAY_SIGMAS,
        || format!("η̂ = {} ± {}", rep.fitted_eta, rep.std_err),
    )?;
    ensure(rep.fitted_eta >= floor, || {
        format!("η̂ = {} below {floor}", rep.fitted_eta)
    })?;
    ensure(elapsed < UNTWISTED_TIME, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "η̂ = {:.3} ± {:.3} ({:.1}σ), ŝ = {:.2}, rate floor {:.4}; {elapsed:.1?}",
        rep.fitted_eta,
        rep.std_err,
        rep.significance(),
        coeff.s_hat,
        floor
    ))
}

fn twisted_decay() -> Outcome {
    let start = Instant::now();
    let twist = Twist::Character(
        NilCharacter::at_identity(1.618_033_988_749_895).map_err(|e| e.to_string())?,
    );
    let scan = decay_scan(
        &eisenstein(),
        &twist,
        &base(),
        &decay_grid(),
        &QuadratureSpec::default(),
    )
    .map_err(|e| e.to_string())?;
    let rep = &scan.report;
    let elapsed = start.elapsed();
    ensure(
        rep.fitted_eta > 0.0 && rep.significance() > DECAY_SIGMAS,
        || format!("η̂ = {} ± {}", rep.fitted_eta, rep.std_err),
    )?;
    ensure(rep.fitted_eta >= TWISTED_FLOOR, || {
        format!("η̂ = {}", rep.fitted_eta)
    })?;
    ensure(elapsed < TWISTED_TIME, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "η̂ = {:.3} ± {:.3} ({:.1}σ) ≥ {TWISTED_FLOOR}; {elapsed:.1?}",
        rep.fitted_eta,
        rep.std_err,
        rep.significance()
    ))
}

fn degree_drop() -> Outcome {
    let mut worst_mean: f64 = 0.0;
    let mut worst_fit: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10 {
        let alpha = rng.gen_range(0.1..3.0);
        let (k1, k2) = (rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0));
        let s = SampledSequence::sample(
            Twist::Quadratic { alpha },
            uniform_grid(-50.0, 50.0, 20_001),
        );
        let d1 = differentiate_sequence(&s, k1);
        let d2 = differentiate_sequence(&d1, k2);
        worst_mean = worst_mean.max((d2.mean().norm() - 1.0).abs());
        // every entry equals the same constant e(αk₁k₂)
        let c = e(alpha * k1 * k2);
        let spread = d2.values.iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
        worst_mean = worst_mean.max(spread);
        worst_fit = worst_fit.max(affine_phase_fit(&d1).2);
    }
    ensure(worst_mean < DEGREE_DROP_TOL, || {
        format!("double difference off by {worst_mean:.2e}")
    })?;
    ensure(worst_fit < DEGREE_DROP_TOL, || {
        format!("affine residual {worst_fit:.2e}")
    })?;
    Ok(format!(
        "| |mean| − 1 | ≤ {worst_mean:.1e}, affine residual ≤ {worst_fit:.1e}"
    ))
}

fn rate_calculators() -> Outcome {
    let p = RateParams::horocycle_instance();
    let g = gamma_disjointness(&p).map_err(|e| e.to_string())?;
    ensure((g - 216.0 / 78_125.0).abs() < RATES_TOL, || {
        format!("γ = {g}")
    })?;
    let rep = rates_report(&p, 1.0).map_err(|e| e.to_string())?;
    ensure(
        (rep.stated_value - STATED_HOROCYCLE_GAMMA).abs() < RATES_TOL,
        || "stated value".into(),
    )?;
    ensure(
        (STATED_HOROCYCLE_GAMMA - 216.0 / (15_625.0 * 7.0)).abs() < RATES_TOL,
        || "stated value".into(),
    )?;
    let cor = horocycle_closed_form_gamma(1.0).map_err(|e| e.to_string())?;
    ensure((rep.closed_form_value - cor).abs() < RATES_TOL, || {
        "closed-form value".into()
    })?;
    ensure(rep.discrepancy_flag, || "discrepancy not flagged".into())?;
    let eq = gamma_equi_uniform(1.0, 3).map_err(|e| e.to_string())?;
    ensure((eq - 0.4).abs() < RATES_TOL, || format!("γ_equi = {eq}"))?;
    Ok(format!(
        "γ = {g:.7} (6³/5⁷), stated {:.7}, formula {cor:.4}, flagged; γ_equi(1,3) = {eq}",
        rep.stated_value
    ))
}

fn diophantine_suite() -> Outcome {
    let one = alpha_i(&SquareMatrix::identity(2), 1, 4).map_err(|e| e.to_string())?;
    ensure(one.value == 1.0 && one.certified, || {
        format!("α₁(e) = {}", one.value)
    })?;
    for t in [0.5, 1.0, 3.0, 6.0] {
        let a = certified_alpha(&DiagonalFlow::sl2().at(t), 1).map_err(|e| e.to_string())?;
        let want = (t / 2.0).exp();
        ensure((a.value / want - 1.0).abs() < 1e-12, || {
            format!("α₁(a_{t}) = {} vs {want}", a.value)
        })?;
    }
    let spec = DiophSpec::new(
        1.0 / 3.0,
        PolyBound::constant_one(),
        HoroSubgroup::sl2_upper(),
    )
    .map_err(|e| e.to_string())?;
    let records = theta_diophantine_check(&default_base_point(), &spec, &decay_grid(), 64, 1)
        .map_err(|e| e.to_string())?;
    let missing: Vec<f64> = records
        .iter()
        .filter(|r| !(r.witnessed() && r.certified))
        .map(|r| r.r)
        .collect();
    ensure(missing.is_empty(), || {
        format!("no witness at R = {missing:?}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let eps = [1e-4, 1e-3, 1e-2, 0.1, 0.5];
    let mut violations = 0;
    for i in 0..REMEZ_POLYNOMIALS {
        let n_vars = 1 + i % 3;
        let poly = Polynomial::random(n_vars, rng.gen_range(1..=4), &mut rng);
        let bbox: Vec<(f64, f64)> = (0..n_vars)
            .map(|_| (-1.0, rng.gen_range(0.0..2.0)))
            .collect();
        let rep =
            remez_check_poly(&poly, &bbox, &eps, 4096, i as u64).map_err(|e| e.to_string())?;
        violations += rep.violations();
    }
    ensure(violations == 0, || format!("{violations} Remez violations"))?;
    Ok(format!(
        "α₁(e) = 1, α₁(a_t) = e^(t/2), witnesses at all {} radii, {REMEZ_POLYNOMIALS} polynomials without violation",
        records.len()
    ))
}

fn perturbation_scaling() -> Outcome {
    let q = QuadratureSpec::with_target(1e-11);
    let f = eisenstein();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_ratio: f64 = 0.0;
    let mut worst_const: f64 = 0.0;
    for _ in 0..PERTURBATION_TRIALS {
        let (a, b, c) = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let dir = SquareMatrix::from_2x2([[a, b], [c, -a]]);
        let dir = dir.scale(1.0 / dir.max_abs());
        let r = 2f64.powf(rng.gen_range(4.0..8.0));
        let probe = perturbation_check(&base(), &SquareMatrix::zeros(2), r, &f, &q)
            .map_err(|e| e.to_string())?;
        // the flow stretches the perturbation by up to R; keep the stretched
        // size small so second-order terms stay negligible
        let delta = 1e-3 * probe.injectivity_bound / r;
        let full =
            perturbation_check(&base(), &dir.scale(delta), r, &f, &q).map_err(|e| e.to_string())?;
        let half = perturbation_check(&base(), &dir.scale(delta / 2.0), r, &f, &q)
            .map_err(|e| e.to_string())?;
        ensure(full.holds && half.holds, || {
            format!("bound fails at R = {r}: {full:?}")
        })?;
        let ratio = half.difference / full.difference;
        ensure(ratio <= HALVING_RATIO, || {
            format!("ratio {ratio} at R = {r}")
        })?;
        worst_ratio = worst_ratio.max(ratio);
        worst_const = worst_const.max(full.difference / full.delta);
    }
    Ok(format!(
        "{PERTURBATION_TRIALS} trials, max |Δ|/δ = {worst_const:.3} ≤ {PERTURBATION_C_F}, max halving ratio {worst_ratio:.3}"
    ))
}

fn discrete_sums() -> Outcome {
    let twist = Twist::Character(
        NilCharacter::at_identity(1.618_033_988_749_895).map_err(|e| e.to_string())?,
    );
    let grid = decay_grid();
    let scan =
        discrete_decay_scan(&eisenstein(), &twist, &base(), &grid).map_err(|e| e.to_string())?;
    ensure(scan.report.fitted_eta > 0.0, || {
        format!("η̂' = {}", scan.report.fitted_eta)
    })?;
    for &r in &grid {
        let d = discrete_average(&eisenstein(), &twist, &base(), r).map_err(|e| e.to_string())?;
        ensure((d.count_ratio() - 1.0).abs() <= 1.0 / r, || {
            format!("count ratio {} at R = {r}", d.count_ratio())
        })?;
    }
    Ok(format!(
        "η̂' = {:.3} ± {:.3}; count ratios within 1/R",
        scan.report.fitted_eta, scan.report.std_err
    ))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [(&str, &str); 10] = [
        ("avg", r#"{"R":64,"twist":"character"}"#),
        (
            "decay",
            r#"{"R_min":16,"R_max":256,"twist":"quadratic","alpha":0.7}"#,
        ),
        (
            "discrete",
            r#"{"R_min":16,"R_max":1024,"twist":"character"}"#,
        ),
        ("vdc", r#"{"n_configs":3,"R_max":128}"#),
        ("alpha", r#"{"group":"sl3"}"#),
        ("dioph", r#"{"R_min":2,"R_max":256}"#),
        ("coeff", r#"{"n_samples":50000,"t_grid":[0.5,1,1.5,2,2.5]}"#),
        ("gamma", r#"{}"#),
        ("invariance", r#"{"n_pairs":200,"n_grid":5000}"#),
        ("nondiv", r#"{"n_samples":300}"#),
    ];
    for (cmd, cfg) in runs {
        let cfg_path = dir.path().join(format!("{cmd}.json"));
        fs::write(&cfg_path, cfg).map_err(|e| e.to_string())?;
        let mut outputs = Vec::new();
        for rerun in 0..2 {
            let out = dir.path().join(format!("{cmd}-{rerun}.out"));
            let status = Command::new(env!("CARGO_BIN_EXE_horolab"))
                .args([cmd, "--seed", "11", "--config"])
                .arg(&cfg_path)
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), || {
                format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr))
            })?;
            outputs.push(read_artifacts(&out)?);
        }
        ensure(outputs[0] == outputs[1], || {
            format!("{cmd} artifacts differ between reruns")
        })?;
    }
    Ok("10 commands rerun with byte-identical artifacts".into())
}

fn read_artifacts(primary: &Path) -> Result<Vec<Vec<u8>>, String> {
    let mut out = vec![fs::read(primary).map_err(|e| e.to_string())?];
    let report = primary.with_extension("report.json");
    if report.exists() {
        out.push(fs::read(report).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("exact algebra", exact_algebra),
        ("volume and doubling laws", volume_laws),
        ("nilcharacter invariance", nilchar_invariance),
        ("van der corput inequality", van_der_corput),
        ("untwisted decay", untwisted_decay),
        ("twisted decay", twisted_decay),
        ("degree drop", degree_drop),
        ("rate calculators", rate_calculators),
        ("diophantine suite", diophantine_suite),
        ("perturbation scaling", perturbation_scaling),
        ("discrete sums", discrete_sums),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
