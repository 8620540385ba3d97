//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Criteria 5–10 share one synthetic study and its M31 design.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use mixmu::cli::{cmd_eval, cmd_family, cmd_synth, cmd_uncertainty, ControllerFile, Outcome};
use mixmu::config::RunConfig;
use mixmu::lti::FrequencyGrid;
use mixmu::mu::{mu_lower_sampling, mu_upper_complex, mu_upper_mixed, Block, BlockStructure, CMatrix};
use mixmu::pipeline::Study;
use mixmu::uncertainty::{
    lft_mode_tf, perturbed_mode_tf, structured_weights, CoefKind, ModeDelta, ModePairStats,
    UncertainCoefficient, Variant,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, id: usize, name: &str, ok: bool, detail: String) {
        println!("{} [{id:>2}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures += 1;
        }
    }
}

fn random_stats(rng: &mut ChaCha8Rng) -> ModePairStats {
    let wp = 2.0 * PI * rng.random_range(50.0..2000.0);
    let zp = rng.random_range(0.005..0.1);
    let mut r = || rng.random_range(0.0..0.3);
    let (rd2, rd1, rn2, rn1) = (r(), r(), r(), r());
    let numerator = if rng.random_bool(0.7) {
        let wz = wp * rng.random_range(0.6..0.98);
        let zz = rng.random_range(0.005..0.1);
        Some((
            UncertainCoefficient::new(1.0 / (wz * wz), rn2).unwrap(),
            UncertainCoefficient::new(2.0 * zz / wz, rn1).unwrap(),
        ))
    } else {
        None
    };
    ModePairStats {
        numerator,
        d2: UncertainCoefficient::new(1.0 / (wp * wp), rd2).unwrap(),
        d1: UncertainCoefficient::new(2.0 * zp / wp, rd1).unwrap(),
    }
}

fn criterion_lft(rep: &mut Report) {
    let started = Instant::now();
    let grid = FrequencyGrid::log_hz(1.0, 5000.0, 200).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let stats = random_stats(&mut rng);
        let weights = structured_weights(&stats);
        let mut delta = ModeDelta::default();
        for k in CoefKind::ALL {
            delta.set(k, rng.random_range(-1.0..=1.0));
        }
        let lft = lft_mode_tf(&stats, &weights, &delta).unwrap().freq_response(&grid).unwrap();
        let direct = perturbed_mode_tf(&stats, &delta).unwrap().freq_response(&grid).unwrap();
        for (a, b) in lft.iter().zip(&direct) {
            worst = worst.max((a - b).norm() / b.norm());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    rep.check(
        1,
        "LFT identity",
        worst <= 1e-9 && secs < 10.0,
        format!("max rel err {worst:.2e} over 1000 draws x 200 pts in {secs:.2}s"),
    );
}

fn random_structure(rng: &mut ChaCha8Rng) -> BlockStructure {
    loop {
        let mut blocks = Vec::new();
        let mut dim = 0;
        let target = rng.random_range(1..=6);
        while dim < target {
            let b = match rng.random_range(0..3) {
                0 => Block::real(format!("r{dim}")),
                1 => Block::complex(format!("c{dim}")),
                _ if target - dim >= 2 => Block::full(2, format!("f{dim}")),
                _ => Block::complex(format!("c{dim}")),
            };
            dim += b.rows;
            blocks.push(b);
        }
        let s = BlockStructure::new(blocks).unwrap();
        if s.has_real() || rng.random_bool(0.2) {
            return s;
        }
    }
}

fn criterion_mu_bounds(rep: &mut Report) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut violations = Vec::new();
    for k in 0..100 {
        let s = random_structure(&mut rng);
        let n = s.dim();
        let m = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let ub = mu_upper_mixed(&m, &s).unwrap().value;
        let ubc = mu_upper_complex(&m, &s).unwrap();
        let lb = mu_lower_sampling(&m, &s, 200, k).unwrap();
        if ub < lb - 1e-9 {
            violations.push(format!("#{k}: ub {ub} < lb {lb}"));
        }
        if ub > ubc * (1.0 + 1e-9) {
            violations.push(format!("#{k}: mixed {ub} > complex {ubc}"));
        }
    }
    let scalar = BlockStructure::new(vec![Block::complex("c")]).unwrap();
    let m = CMatrix::from_element(1, 1, Complex64::new(3.0, 4.0));
    let u = mu_upper_mixed(&m, &scalar).unwrap().value;
    let l = mu_lower_sampling(&m, &scalar, 4, 0).unwrap();
    if (u - 5.0).abs() > 1e-10 || (l - 5.0).abs() > 1e-10 {
        violations.push(format!("|3+4j|: ub {u}, lb {l}"));
    }
    let secs = started.elapsed().as_secs_f64();
    rep.check(
        4,
        "mu bound sanity",
        violations.is_empty() && secs < 60.0,
        if violations.is_empty() {
            format!("100 mixed matrices + scalar case in {secs:.1}s")
        } else {
            violations.join("; ")
        },
    );
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

/// family → uncertainty → synth (M31) → eval, written into `dir`.
fn run_cli_pipeline(cfg: &RunConfig, dir: &Path) -> Outcome {
    cmd_family(cfg, dir).unwrap();
    cmd_uncertainty(cfg, dir, &[Variant::M01, Variant::M11, Variant::M31]).unwrap();
    let outcome = cmd_synth(cfg, dir).unwrap();
    cmd_eval(cfg, dir, &dir.join("controller_m31.json")).unwrap();
    outcome
}

fn main() -> ExitCode {
    let total = Instant::now();
    let mut rep = Report { failures: 0 };
    criterion_lft(&mut rep);

    let cfg = RunConfig {
        variant: Variant::M31,
        ..RunConfig::default()
    };
    let study = Study::synthetic(&cfg).unwrap();
    let variants = [Variant::M01, Variant::M11, Variant::M31];
    let plants: Vec<_> = variants.iter().map(|v| study.plant(v).unwrap()).collect();

    // 2 and 3: envelopes.
    let mut worst_containment = 1.0f64;
    let mut widths = Vec::new();
    for p in &plants {
        let env = p
            .envelope(&study.grid, cfg.envelope.n_random, cfg.envelope.include_vertices, cfg.seed)
            .unwrap();
        for m in &study.measured {
            worst_containment = worst_containment.min(env.containment(m));
        }
        widths.push(env.mean_width_db());
    }
    rep.check(
        2,
        "envelope containment",
        worst_containment >= 0.99,
        format!("worst fraction inside {:.4} (11 FRFs x 3 models)", worst_containment),
    );
    rep.check(
        3,
        "conservatism ordering",
        widths[0] >= 1.05 * widths[1] && widths[1] >= 1.05 * 1.05 * widths[2],
        format!("mean widths M01 {:.2} dB, M11 {:.2} dB, M31 {:.2} dB", widths[0], widths[1], widths[2]),
    );

    criterion_mu_bounds(&mut rep);

    // 5: synthesis for M01 and M11 here; M31 through the command-line path.
    let dir_a = tempfile::tempdir().unwrap();
    let mut mu = Vec::new();
    let mut times = Vec::new();
    for p in &plants[..2] {
        let t = Instant::now();
        let r = study.synthesize(p).unwrap();
        times.push(t.elapsed().as_secs_f64());
        mu.push(r.mu_peak);
    }
    let t = Instant::now();
    run_cli_pipeline(&cfg, dir_a.path());
    let pipeline_secs = t.elapsed().as_secs_f64();
    let controller = ControllerFile::load(&dir_a.path().join("controller_m31.json")).unwrap();
    mu.push(controller.mu_peak);
    times.push(controller.wall_time_s);
    let c = controller.tf().unwrap();
    rep.check(
        5,
        "synthesis ordering",
        mu[0] > mu[1] && mu[1] > mu[2] && mu[2] <= 1.2 && times[0] < times[1] && times[1] < times[2],
        format!(
            "mu M01 {:.3} > M11 {:.3} > M31 {:.3}; time {:.1}s < {:.1}s < {:.1}s",
            mu[0], mu[1], mu[2], times[0], times[1], times[2]
        ),
    );

    // 6–8: closed-loop metrics of the M31 design on every payload.
    let metrics = study.evaluate(&c).unwrap();
    let min_gr = metrics.iter().map(|m| m.gain_reduction_db).fold(f64::INFINITY, f64::min);
    rep.check(
        6,
        "first-mode damping",
        min_gr >= 8.0,
        format!("min gain reduction {min_gr:.2} dB over {} payloads", metrics.len()),
    );
    let margins: Vec<f64> = metrics
        .iter()
        .flat_map(|m| m.margins.crossings.iter().map(|x| x.phase_margin))
        .collect();
    let min_pm = margins.iter().copied().fold(f64::INFINITY, f64::min);
    rep.check(
        7,
        "phase margins",
        !margins.is_empty() && min_pm >= 30.0,
        format!("min margin {min_pm:.1} deg over {} crossings", margins.len()),
    );
    let max_sxn = metrics.iter().map(|m| m.max_sxn_db).fold(f64::NEG_INFINITY, f64::max);
    rep.check(
        8,
        "noise attenuation",
        max_sxn <= 0.5,
        format!("max |S_xn| {max_sxn:.2} dB"),
    );

    // 9: random admissible perturbations of the M31 model.
    let m31 = &plants[2];
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut unstable = 0;
    for _ in 0..500 {
        let real: Vec<f64> = (0..m31.n_real()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let du = rng.random_range(-1.0..=1.0);
        let g = m31.perturbed_tf(&real, du).unwrap().rationalized(2).unwrap();
        if !g.feedback(&c).unwrap().is_stable().unwrap() {
            unstable += 1;
        }
    }
    rep.check(
        9,
        "stability sweep",
        unstable == 0,
        format!("{unstable} unstable closed loops out of 500"),
    );

    // 10: second full run, byte comparison of every CSV.
    let dir_b = tempfile::tempdir().unwrap();
    run_cli_pipeline(&cfg, dir_b.path());
    let a = csv_files(dir_a.path());
    let b = csv_files(dir_b.path());
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    rep.check(
        10,
        "determinism",
        a.len() == b.len() && !a.is_empty() && differing.is_empty(),
        format!("{} CSV files compared, {} differ", a.len(), differing.len()),
    );

    println!(
        "acceptance: {} failed, pipeline {:.0}s, total {:.0}s",
        rep.failures,
        pipeline_secs,
        total.elapsed().as_secs_f64()
    );
    if rep.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
