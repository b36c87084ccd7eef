//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use koopdamp::control::{control_input_raw, mass_point_oracle, ControllerConfig, MassPointParams, MassPointTrajectory};
use koopdamp::levelset::invariance_metric;
use koopdamp::linalg::pinv;
use koopdamp::pipeline::{run_all, ExperimentPlan, RunManifest};
use koopdamp::spectral::{build_snapshots, fit, select_oscillatory_mode, Dictionary, KoopmanSpectrum, ModeBand, SnapshotPair};
use koopdamp::thermal::{
    extract_probe_state, simulate, step_field, Scenario, ScenarioConfig, TemperatureField, Trajectory, Vec4,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn random_stable(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
    let rho = a.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let target = rng.random_range(0.3..0.95);
    a * (target / rho)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let a = random_stable(&mut rng);
        let x = DMatrix::from_fn(4, 500, |_, _| rng.random_range(-1.0..1.0));
        let snaps = SnapshotPair { x_next: &a * &x, x, h: 1.0 };
        let spec = match fit(&snaps, &Dictionary::linear(4), 1e-10) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("fit failed: {e}")),
        };
        for lam in a.complex_eigenvalues().iter() {
            let err = spec.eigenvalues.iter().map(|m| (m - lam).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(err);
        }
    }
    let t = start.elapsed();
    outcome(worst < 1e-6 && within(t, 10.0), format!("max eigenvalue error {worst:.2e} over 50 systems in {t:.2?}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let p = MassPointParams { m: 1.0, k: 1.0, d: 0.5, r_bar: 0.0, p_floor: None };
    let tr = match mass_point_oracle(&p, 0.0, 2f64.sqrt(), 7.0, 1e-3) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    // three e-folds of active time
    let ta = tr.active_time();
    let k3 = ta.iter().position(|&t| t >= 3.0 / p.d).unwrap_or(ta.len() - 1);
    let window = MassPointTrajectory {
        t: tr.t[..=k3].to_vec(),
        x: tr.x[..=k3].to_vec(),
        p: tr.p[..=k3].to_vec(),
        r: tr.r[..=k3].to_vec(),
        held: tr.held[..=k3].to_vec(),
    };
    let (rate, r2) = window.decay_rate(0.0).unwrap_or((f64::NAN, f64::NAN));
    let e_folds = (tr.r[0] / tr.r[k3]).ln();

    let free = MassPointParams { d: 0.0, ..p };
    let period = 2.0 * std::f64::consts::PI;
    let ft = mass_point_oracle(&free, 0.3, 1.1, 10.0 * period, period / 1000.0).expect("free run");
    let mut drift: f64 = 0.0;
    for chunk in ft.r.chunks(1000) {
        let r0 = chunk[0];
        drift = drift.max(chunk.iter().map(|r| ((r - r0) / r0).abs()).fold(0.0, f64::max));
    }
    let t = start.elapsed();
    let pass = (rate - 0.5).abs() <= 0.025 && e_folds >= 2.9 && drift < 1e-9 && within(t, 1.0);
    outcome(
        pass,
        format!("rate {rate:.4} (R^2 {r2:.4}) over {e_folds:.2} e-folds; free energy drift {drift:.1e} per period; {t:.2?}"),
    )
}

struct OpenLoop {
    scenario: Scenario,
    traj: Trajectory,
    fit_states: Vec<Vec4>,
    cubic: KoopmanSpectrum,
    elapsed: Duration,
}

fn open_loop() -> OpenLoop {
    let scenario = ScenarioConfig::default().resolve().expect("default scenario");
    let start = Instant::now();
    let traj = simulate(&scenario, None).expect("open loop").trajectory;
    let elapsed = start.elapsed();
    let w = ExperimentPlan::default().fit_window(&traj);
    let fit_states = extract_probe_state(&w, scenario.detrend).expect("states");
    let snaps = build_snapshots(&w.times, &fit_states, scenario.sample_period_s).expect("snapshots");
    let cubic = fit(&snaps, &Dictionary::cubic(4), 1e-10).expect("cubic fit");
    OpenLoop { scenario, traj, fit_states, cubic, elapsed }
}

const BAND: ModeBand = ModeBand { period_min_s: 600.0, period_max_s: 1200.0, max_damping: f64::INFINITY };

fn criterion_3(ol: &OpenLoop) -> Outcome {
    let temps: Vec<f64> = ol.traj.probe_temps.iter().flatten().copied().collect();
    let mean = temps.iter().sum::<f64>() / temps.len() as f64;
    let late = ol.traj.window(10_800.0, 14_400.0);
    let swing: f64 = (0..4)
        .map(|i| {
            let v: Vec<f64> = late.probe_temps.iter().map(|p| p[i]).collect();
            v.iter().copied().fold(f64::MIN, f64::max) - v.iter().copied().fold(f64::MAX, f64::min)
        })
        .fold(f64::MAX, f64::min);
    let g = &ol.scenario.geometry;
    match select_oscillatory_mode(&ol.cubic, BAND) {
        Ok(ef) => {
            let ratio = ef.nu.re.abs() / ef.nu.im.abs();
            let minutes = ef.period_s() / 60.0;
            let pass = (mean - 27.0).abs() < 1.0
                && swing > 0.5
                && ratio < 0.1
                && (10.0..=20.0).contains(&minutes)
                && within(ol.elapsed, 120.0);
            outcome(
                pass,
                format!(
                    "mean probe {mean:.2} C, late swing >= {swing:.2} C, period {minutes:.2} min, |Re nu|/|Im nu| = {ratio:.3}; 4 h on {}x{} cells in {:.2?}",
                    g.nx, g.ny, ol.elapsed
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_4(ol: &OpenLoop) -> Outcome {
    match select_oscillatory_mode(&ol.cubic, BAND).and_then(|ef| invariance_metric(&ol.fit_states, &ef)) {
        Ok(m) => outcome(m < 0.15, format!("relative std of |phi| on the fitting window {m:.4}")),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn pipeline_run() -> Result<RunManifest, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let plan = ExperimentPlan { out_dir: dir.path().join("run"), ..Default::default() };
    run_all(&plan, false).map_err(|e| e.to_string())
}

fn criterion_5(run: &Result<RunManifest, String>) -> Outcome {
    let m = match run {
        Ok(m) => m,
        Err(e) => return outcome(false, e.clone()),
    };
    let (Some(c), Some(e)) = (m.results.control.get("cubic_monomial"), m.results.evaluate.get("cubic_monomial")) else {
        return outcome(false, "cubic results missing".into());
    };
    let pass = c.amplitude_reduction >= 0.30 && e.d_hat > 0.0 && e.d_hat_r_squared > 0.5;
    outcome(
        pass,
        format!(
            "amplitude reduction {:.1}% (need >= 30%), D_hat {:.2e} 1/s, R^2 {:.3} (need > 0.5) at D = {}",
            100.0 * c.amplitude_reduction,
            e.d_hat,
            e.d_hat_r_squared,
            c.d
        ),
    )
}

fn criterion_6(run: &Result<RunManifest, String>) -> Outcome {
    let m = match run {
        Ok(m) => m,
        Err(e) => return outcome(false, e.clone()),
    };
    match &m.results.comparison {
        Some(c) => outcome(
            c.relative_norm_mismatch <= 0.01 && c.nonlinear_amplitude <= c.linear_amplitude,
            format!(
                "u1 norms {:.3} vs {:.3} (mismatch {:.2}%); amplitude cubic {:.4} vs linear {:.4}",
                c.nonlinear_energy_norm,
                c.linear_energy_norm,
                100.0 * c.relative_norm_mismatch,
                c.nonlinear_amplitude,
                c.linear_amplitude
            ),
        ),
        None => outcome(false, "comparison absent".into()),
    }
}

fn criterion_7(ol: &OpenLoop) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut notes = Vec::new();
    let mut pass = true;

    // pseudo-inverse
    let mut pinv_err: f64 = 0.0;
    for (r, c, rank) in [(4, 4, 4), (4, 2, 2), (3, 5, 3), (5, 5, 3), (6, 1, 1)] {
        let l = DMatrix::from_fn(r, rank, |_, _| rng.random_range(-2.0..2.0));
        let rr = DMatrix::from_fn(rank, c, |_, _| rng.random_range(-2.0..2.0));
        let b = l * rr;
        let (bp, _) = pinv(&b, 1e-12).expect("pinv");
        pinv_err = pinv_err.max((&b * &bp * &b - &b).amax()).max((&bp * &b * &bp - &bp).amax());
    }
    pass &= pinv_err < 1e-10;
    notes.push(format!("pinv {pinv_err:.1e}"));

    // left eigenvectors
    let res = ol.cubic.residuals.iter().copied().fold(0.0, f64::max);
    pass &= res < 1e-8;
    notes.push(format!("left-eigvec {res:.1e}"));

    // gradients
    let ef = select_oscillatory_mode(&ol.cubic, BAND).expect("mode");
    let mut grad_err: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = ef.grad(&x);
        let scale = g.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        for i in 0..4 {
            let h = 1e-5;
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (ef.eval(&xp) - ef.eval(&xm)) / (2.0 * h);
            grad_err = grad_err.max((fd - g[i]).norm() / scale);
        }
    }
    pass &= grad_err < 1e-6;
    notes.push(format!("gradient {grad_err:.1e}"));

    // realness of the input built from the conjugate pair
    let j = (0..ol.cubic.len())
        .filter(|&j| ol.cubic.continuous_eigenvalues[j].im > 0.0)
        .find(|&j| (ol.cubic.continuous_eigenvalues[j] - ef.nu).norm() == 0.0)
        .expect("mode index");
    let lam = ol.cubic.eigenvalues[j];
    let partner = (0..ol.cubic.len())
        .min_by(|&a, &b| (ol.cubic.eigenvalues[a] - lam.conj()).norm().total_cmp(&(ol.cubic.eigenvalues[b] - lam.conj()).norm()))
        .expect("partner");
    let phi_bar = ol.cubic.eigenfunction(partner);
    let cfg = ControllerConfig::identity(ef.clone(), 0.35, 5.0, 1e-3).expect("controller");
    let mut imag: f64 = 0.0;
    let mut mismatch: f64 = 0.0;
    for x in ol.fit_states.iter().step_by(7) {
        let z = ef.eval(x);
        if z.norm() < 1e-3 {
            continue;
        }
        let e = z / z.norm();
        let (g, gb) = (ef.grad(x), phi_bar.grad(x));
        let row: Vec<Complex<f64>> = (0..4).map(|i| (e.conj() * g[i] + e * gb[i]) / 2.0).collect();
        let n2: f64 = row.iter().map(|c| c.norm_sqr()).sum();
        let u: Vec<Complex<f64>> = row.iter().map(|c| -cfg.d * z.norm() * c.conj() / n2).collect();
        imag = imag.max(u.iter().map(|c| c.im.abs()).fold(0.0, f64::max));
        let real = control_input_raw(&cfg, x).expect("input").expect("outside guard");
        mismatch = mismatch.max((0..4).map(|i| (u[i].re - real[i]).abs()).fold(0.0, f64::max));
    }
    pass &= imag < 1e-10 && mismatch < 1e-8;
    notes.push(format!("Im u {imag:.1e}"));

    // zero controller
    let mut zero = |_: f64, _: &Vec4| -> koopdamp::Result<Vec4> { Ok([0.0; 4]) };
    let with = simulate(&ol.scenario, Some(&mut zero)).expect("zero run").trajectory;
    let same = with.probe_temps.iter().flatten().zip(ol.traj.probe_temps.iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits())
        && with.len() == ol.traj.len();
    pass &= same;
    notes.push(format!("zero-controller bit-identical {same}"));

    // the zero-controller run is a full simulation; the identities alone must fit in 5 s
    let t = start.elapsed();
    pass &= within(t, 5.0);
    outcome(pass, format!("{}; {t:.2?}", notes.join(", ")))
}

fn criterion_8() -> Outcome {
    let base = ScenarioConfig::default().resolve().expect("default scenario");
    let walls = base.geometry.all_walls();
    let params = base.thermal;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let no_heat = vec![0.0; walls.cells()];

    let values: Vec<f64> = (0..walls.cells()).map(|_| rng.random_range(15.0..35.0)).collect();
    let mut f = TemperatureField::from_values(&walls, values, 0.0).expect("field");
    let s0 = f.sum();
    for _ in 0..10_000 {
        f = step_field(&f, &no_heat, &params, &walls, 0.0).expect("step");
    }
    let mass_err = ((f.sum() - s0) / s0).abs();

    let mut violations = 0;
    for trial in 0..20 {
        let g = if trial % 2 == 0 { &walls } else { &base.geometry };
        let values: Vec<f64> = (0..g.cells()).map(|_| rng.random_range(10.0..40.0)).collect();
        let mut f = TemperatureField::from_values(g, values, 0.0).expect("field");
        let (lo, hi) = (f.min(), f.max());
        let ext = rng.random_range(lo..hi);
        for _ in 0..500 {
            f = step_field(&f, &no_heat, &params, g, ext).expect("step");
            if f.min() < lo - 1e-12 || f.max() > hi + 1e-12 {
                violations += 1;
                break;
            }
        }
    }
    outcome(
        mass_err < 1e-9 && violations == 0,
        format!("zero-flux mass drift {mass_err:.1e} over 1e4 steps; max-principle violations {violations}/20"),
    )
}

fn main() {
    let _ = env_logger::builder().is_test(true).try_init();
    let ol = open_loop();
    let run = pipeline_run();
    let results = [
        ("EDMD linear-system oracle", criterion_1()),
        ("spring-mass energy oracle", criterion_2()),
        ("open-loop oscillation", criterion_3(&ol)),
        ("drift invariance", criterion_4(&ol)),
        ("closed-loop suppression", criterion_5(&run)),
        ("matched-energy comparison", criterion_6(&run)),
        ("numerical identities", criterion_7(&ol)),
        ("conservation and maximum principle", criterion_8()),
    ];
    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!("{} criterion {} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
