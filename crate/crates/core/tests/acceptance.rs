//! Acceptance checks. Each criterion prints one `PASS`/`FAIL` line with the
//! measured value and its tolerance. The process fails on any failure not
//! listed in [`KNOWN_FAILURES`], and on a listed criterion that passes, so the
//! list has to be kept current.
//!
//! Run a subset with `cargo test -p myoimp --test acceptance -- <filter>...`,
//! where a filter matches criterion names by substring.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use myoimp::baseline::{fit, FitConfig};
use myoimp::intent::{
    FrameworkLoop, IntentFrame, IntentPipeline, MusclePair, PipelineConfig, PHYSICS_DT,
};
use myoimp::joint::{map_to_joint, moment_arm, mtu_length, GeometryConfig, Side};
use myoimp::metrics::{
    energy, mann_whitney_u, mutual_information, path_efficiency, sparc, Alternative, SparcConfig,
    Task,
};
use myoimp::mtu::impedance::MIN_STIFFNESS;
use myoimp::mtu::params::{MAX_TENDON_EXTENSION, TENDON_SLACK_FRACTION};
use myoimp::mtu::{
    damper_coefficient, element_impedance, force_ce, force_see, MtuParams, MtuState, ParamVector,
};
use myoimp::optimizer::{
    anneal, objective, prepare, sample_feasible, validate, OptimizationSpec, SaSettings,
};
use myoimp::plant::{
    baseline_damping, field_torque, impedance_law, plant_step, ForceField, PlantParams, PlantState,
    RefKinematics, K_B,
};
use myoimp::session::synthetic::{DatasetConfig, Subject, SubjectConfig};
use myoimp::session::{
    run_batch, BatchSpec, Condition, Models, Protocol, Report, Simulation, System, UserConfig,
};
use myoimp::sigproc::EmgConfig;
use myoimp::telemetry::TelemetryRow;

type Outcome = (bool, String);

/// Criteria this implementation does not meet; the README explains why.
const KNOWN_FAILURES: [&str; 2] = ["parameter recovery", "H2 co-contraction ramp"];

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
}

fn constants() -> Outcome {
    let d_b = baseline_damping(K_B);
    let geom = GeometryConfig::default().build(Side::Flexor).unwrap();
    let l0 = geom.mtu_length(0.0).unwrap();
    let p = MtuParams::reference(l0);
    let emg = EmgConfig::default();
    let sa = SaSettings::default();
    let checks = [
        ("D_B", d_b == 5.0),
        (
            "tendon slack",
            close(p.l_see0, 2.0 / 3.0 * l0, 1e-12) && TENDON_SLACK_FRACTION == 2.0 / 3.0,
        ),
        (
            "tendon extension",
            MAX_TENDON_EXTENSION == 0.10 && close(p.l_se_max(), 1.1 * p.l_see0, 1e-12),
        ),
        (
            "rms window",
            emg.sample_rate == 200.0 && emg.window_samples() == 32 && emg.hop_samples() == 8,
        ),
        (
            "sa budgets",
            (sa.iterations, sa.max_evals, sa.t0, sa.interval) == (500, 5000, 300.0, 50),
        ),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    (
        failed.is_empty(),
        format!(
            "D_B = {d_b}, l_see0/l_mtu0 = {:.6}, window/hop = {}/{} at {} Hz, SA {}/{}/{}/{}{}",
            p.l_see0 / l0,
            emg.window_samples(),
            emg.hop_samples(),
            emg.sample_rate,
            sa.iterations,
            sa.max_evals,
            sa.t0,
            sa.interval,
            if failed.is_empty() {
                String::new()
            } else {
                format!("; wrong: {failed:?}")
            }
        ),
    )
}

/// Closed-form `∂f/∂l` of the force-length relation and its value.
fn isometric_and_slope(l: f64, p: &MtuParams) -> (f64, f64) {
    let x = l / p.l_opt() - 1.0;
    let (w, v) = if x < 0.0 {
        (p.w_asc, p.v_asc)
    } else {
        (p.w_des, p.v_des)
    };
    let f = (-(x / w).abs().powf(v)).exp();
    let slope = -f * v * (x / w).abs().powf(v - 1.0) * x.signum() / (w * p.l_opt());
    (f, slope)
}

fn pee_slope(l: f64, p: &MtuParams) -> f64 {
    let l0 = p.l_pee0();
    if l <= l0 {
        return 0.0;
    }
    let span = p.l_opt() * (1.0 + p.w_des) - l0;
    p.f_pee0() * p.v_pee * ((l - l0) / span).powf(p.v_pee - 1.0) / span
}

fn see_slope(l_se: f64, p: &MtuParams) -> f64 {
    let strain = (l_se - p.l_see0) / p.l_see0;
    if strain <= 0.0 {
        0.0
    } else if strain < p.du_nl {
        let e = p.du_nl / p.du_l;
        p.df_see0() * e * (strain / p.du_nl).powf(e - 1.0) / (p.du_nl * p.l_see0)
    } else {
        p.df_see0() / (p.du_l * p.l_see0)
    }
}

/// Closed-form `(∂f_ce/∂l_ce, ∂f_ce/∂v_ce)`.
fn ce_slopes(l: f64, v: f64, act: f64, p: &MtuParams) -> (f64, f64) {
    let l_opt = p.l_opt();
    let (f_iso, f_iso_l) = isometric_and_slope(l, p);
    let level = act * f_iso;
    let level_l = act * f_iso_l;
    let (a, a_l) = if l < l_opt {
        (p.a_max, 0.0)
    } else {
        (p.a_max * f_iso, p.a_max * f_iso_l)
    };
    let b = p.b_max;
    if v <= 0.0 {
        let den = 1.0 - v / (b * l_opt);
        let dl = p.f_max * ((level_l + a_l) / den - a_l);
        let dv = p.f_max * (level + a) / (den * den) / (b * l_opt);
        (dl, dv)
    } else {
        let c = 1.0 + p.f_ecc;
        let k = b * (c - 1.0) / p.s_ecc;
        let ratio = a / level;
        let ratio_l = (a_l * level - a * level_l) / (level * level);
        let b_ecc = k / (1.0 + ratio);
        let b_ecc_l = -k * ratio_l / ((1.0 + ratio) * (1.0 + ratio));
        let u = v / (b_ecc * l_opt);
        let g = c - (c - 1.0) / (1.0 + u);
        let g_u = (c - 1.0) / ((1.0 + u) * (1.0 + u));
        let dl = p.f_max * (level_l * g + level * g_u * (-u / b_ecc) * b_ecc_l);
        let dv = p.f_max * level * g_u / (b_ecc * l_opt);
        (dl, dv)
    }
}

fn floored(k: f64) -> f64 {
    k.max(MIN_STIFFNESS)
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

/// A random state away from the curves' kinks, with the CE producing force.
fn random_state(rng: &mut ChaCha8Rng, p: &MtuParams) -> MtuState {
    let l_opt = p.l_opt();
    let margin = 1e-3 * l_opt;
    loop {
        let act = rng.gen_range(0.01..1.0);
        let l_ce = l_opt * rng.gen_range(0.5..1.5);
        let v_ce = rng.gen_range(0.01..0.5) * p.b_max * l_opt * if rng.gen() { 1.0 } else { -1.0 };
        let strain = rng.gen_range(0.002..0.1);
        let l_se = p.l_see0 * (1.0 + strain);
        let v_se = rng.gen_range(-0.1..0.1);
        let kinks_ce = [l_opt, p.l_pee0()];
        if kinks_ce.iter().any(|k| (l_ce - k).abs() < margin)
            || (strain - p.du_nl).abs() * p.l_see0 < margin
            || force_ce(l_ce, v_ce, act, p).unwrap() <= 1e-3 * p.f_max
        {
            continue;
        }
        return MtuState::evaluate(p, act, l_ce + l_se, v_ce + v_se, l_ce, v_ce, false);
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> [MtuParams; 2] {
    let spec = OptimizationSpec::default();
    let v = sample_feasible(&spec, rng).unwrap();
    let geom = GeometryConfig::default();
    [
        v[0].to_params(geom.build(Side::Extensor).unwrap().mtu_length(0.0).unwrap()),
        v[1].to_params(geom.build(Side::Flexor).unwrap().mtu_length(0.0).unwrap()),
    ]
}

fn derivative_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut imp_err: f64 = 0.0;
    for n in 0..100 {
        let p = if n % 4 == 0 {
            MtuParams::reference(0.3 / 0.25f64.cos())
        } else {
            random_params(&mut rng)[n % 2]
        };
        let s = random_state(&mut rng, &p);
        let imp = element_impedance(&s, &p);
        let (ce_l, ce_v) = ce_slopes(s.l_ce, s.v_ce, s.act, &p);
        let k_m = floored(ce_l + pee_slope(s.l_ce, &p));
        let see_l = see_slope(s.l_se, &p);
        let f_se = force_see(s.l_se, &p).unwrap();
        let damper_l = if f_se < p.f_max {
            p.d_se_max() * (1.0 - p.r_de) / p.f_max * see_l
        } else {
            0.0
        };
        let k_t = floored(see_l + damper_l * s.v_se);
        let d_m = ce_v.max(0.0);
        let d_t = damper_coefficient(f_se, &p);
        for (got, want) in [
            (imp.k_m, k_m),
            (imp.k_t, k_t),
            (imp.d_m, d_m),
            (imp.d_t, d_t),
        ] {
            imp_err = imp_err.max(rel_err(got, want));
        }
    }

    let geoms = [
        GeometryConfig::default().build(Side::Extensor).unwrap(),
        GeometryConfig::default().build(Side::Flexor).unwrap(),
    ];
    let mut arm_err: f64 = 0.0;
    let h = 1e-6;
    for g in &geoms {
        for i in 0..1000 {
            let q = g.q_min + 1e-3 + (g.q_max - g.q_min - 2e-3) * i as f64 / 999.0;
            let fd = (mtu_length(q + h, g).unwrap() - mtu_length(q - h, g).unwrap()) / (2.0 * h);
            arm_err = arm_err.max((moment_arm(q, g).unwrap() - fd).abs());
        }
    }

    // Frozen CE: the tendon follows the joint, so τ_r(q) varies through both
    // the tendon force and the moment arm.
    let mut k_err: f64 = 0.0;
    for _ in 0..100 {
        let params = random_params(&mut rng);
        let q0 = rng.gen_range(-1.2..1.2);
        let mut l_ce = [0.0; 2];
        let mut f = [0.0; 2];
        let mut k = [0.0; 2];
        for i in 0..2 {
            let p = &params[i];
            let l_mtu = mtu_length(q0, &geoms[i]).unwrap();
            let strain = rng.gen_range(0.005..0.09);
            l_ce[i] = l_mtu - p.l_see0 * (1.0 + strain);
            if (strain - p.du_nl).abs() < 0.002 {
                l_ce[i] -= 0.004 * p.l_see0;
            }
            let l_se = l_mtu - l_ce[i];
            f[i] = force_see(l_se, p).unwrap();
            k[i] = see_slope(l_se, p);
        }
        let tau = |q: f64| -> f64 {
            -(0..2)
                .map(|i| {
                    let l = mtu_length(q, &geoms[i]).unwrap();
                    force_see(l - l_ce[i], &params[i]).unwrap() * moment_arm(q, &geoms[i]).unwrap()
                })
                .sum::<f64>()
        };
        let dq = 1e-6;
        let fd = -(tau(q0 + dq) - tau(q0 - dq)) / (2.0 * dq);
        let joint = map_to_joint(&f, &k, &[0.0, 0.0], q0, &geoms).unwrap();
        k_err = k_err.max((joint.k - fd).abs() / fd.abs().max(1.0));
    }

    let pass = imp_err <= 1e-3 && arm_err <= 1e-6 && k_err <= 1e-3;
    (
        pass,
        format!(
            "element impedance max rel {imp_err:.2e} (<= 1e-3), moment arm max abs {arm_err:.2e} (<= 1e-6), joint K max rel {k_err:.2e} (<= 1e-3)"
        ),
    )
}

fn equilibrium_soak() -> Outcome {
    let pair = MusclePair::reference();
    let f_max = [pair.params[0].f_max, pair.params[1].f_max];
    let mut pipe = IntentPipeline::init_rest(pair, PipelineConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut u = [0.0; 2];
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut clamped = 0usize;
    let ticks = (60.0 / PHYSICS_DT) as usize;
    for n in 0..ticks {
        if n % 40 == 0 {
            u = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        }
        let frame = pipe.tick(u).unwrap();
        for i in 0..2 {
            let s = &frame.mtu[i];
            if s.clamped {
                clamped += 1;
            } else {
                checked += 1;
                worst = worst.max(s.residual().abs() / f_max[i]);
            }
        }
    }
    (
        worst <= 1e-6 && checked > 0,
        format!("max |residual|/f_max {worst:.2e} (<= 1e-6) over {checked} steps, {clamped} clamped steps excluded"),
    )
}

fn perturbation_isolation() -> Outcome {
    let run = |field: Option<ForceField>| -> (Vec<IntentFrame>, f64) {
        let mut lp =
            FrameworkLoop::init_rest(MusclePair::reference(), PipelineConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut frames = Vec::new();
        let mut applied: f64 = 0.0;
        let mut u = [0.0; 2];
        for n in 0..5000 {
            if n % 40 == 0 {
                u = [rng.gen_range(0.0..0.2), rng.gen_range(0.1..0.5)];
            }
            let f = lp
                .tick(u, |s: &PlantState| {
                    field.as_ref().map_or(0.0, |ff| field_torque(s.q_f, ff))
                })
                .unwrap();
            applied = applied.max(f.plant.tau_ext.abs());
            frames.push(f.intent);
        }
        (frames, applied)
    };
    let (free, _) = run(None);
    let (pushed, applied) = run(Some(ForceField::between(0.0, 0.5, 0.3, 20.0)));
    let identical = free.len() == pushed.len()
        && free
            .iter()
            .zip(&pushed)
            .all(|(a, b)| format!("{a:?}") == format!("{b:?}") && a == b);
    (
        identical && applied > 0.0,
        format!(
            "{} intent frames identical: {identical}, field torque applied up to {applied:.1} N·m",
            free.len()
        ),
    )
}

/// Gains of the model after one second at the given symmetric drive.
fn gains_at(drive: f64) -> (f64, f64) {
    let mut pipe =
        IntentPipeline::init_rest(MusclePair::reference(), PipelineConfig::default()).unwrap();
    let mut last = None;
    for _ in 0..1000 {
        last = Some(pipe.tick([drive, drive]).unwrap());
    }
    let f = last.unwrap();
    (f.k, f.d)
}

/// Plant under the impedance law with constant gains, constant reference
/// and constant external torque; returns `(t, q_f)`.
fn hold_reference(q_r: f64, k: f64, d: f64, tau_ext: f64, seconds: f64) -> Vec<(f64, f64)> {
    let p = PlantParams::default();
    let r = RefKinematics {
        q: q_r,
        qd: 0.0,
        qdd: 0.0,
    };
    let mut s = PlantState::at_rest(0.0);
    let mut out = Vec::new();
    for _ in 0..(seconds / PHYSICS_DT).round() as usize {
        let tau = impedance_law(&r, &s, k, d, &p);
        s = plant_step(&s, tau, tau_ext, &p, PHYSICS_DT).unwrap();
        out.push((s.t, s.q_f));
    }
    out
}

fn tracking() -> Outcome {
    let (k, d) = gains_at(0.3);
    let q_r = 0.3;
    let trace = hold_reference(q_r, k, d, 0.0, 2.0);
    // Last time the error was at or above tolerance.
    let settle = trace
        .iter()
        .rev()
        .find(|(_, q)| (q - q_r).abs() >= 1e-3)
        .map_or(0.0, |(t, _)| *t);
    let final_err = (trace.last().unwrap().1 - q_r).abs();
    (
        settle < 2.0 && final_err < 1e-3,
        format!("K = {k:.1}, D = {d:.2}: |q_f - q_r| < 1e-3 from t = {settle:.3} s (<= 2 s), final {final_err:.1e}"),
    )
}

fn stiffness_offset() -> Outcome {
    let (k, d) = gains_at(0.3);
    let (q_r, tau) = (0.2, 5.0);
    let offset = |k: f64| {
        let trace = hold_reference(q_r, k, d, tau, 10.0);
        (trace.last().unwrap().1 - q_r).abs()
    };
    let (o1, o2) = (offset(k), offset(2.0 * k));
    let law_err = (o1 - tau / k).abs() / (tau / k);
    let half_err = (o2 / o1 - 0.5).abs() / 0.5;
    (
        law_err <= 0.02 && half_err <= 0.02,
        format!(
            "offset {o1:.5} rad vs tau/k {:.5} (rel {law_err:.1e} <= 0.02); doubled k ratio {:.4} (rel {half_err:.1e} <= 0.02)",
            tau / k,
            o2 / o1
        ),
    )
}

fn parameter_recovery() -> Outcome {
    let started = Instant::now();
    let subject = Subject::new(
        MusclePair::reference(),
        PipelineConfig::default(),
        &SubjectConfig::default(),
    )
    .unwrap();
    let data = subject.dataset(&DatasetConfig::default(), 21).unwrap();
    let spec = OptimizationSpec {
        seed: 4,
        ..Default::default()
    };
    let (train, val) = data.split(spec.split).unwrap();
    let result = anneal(&spec, &train).unwrap();
    let truth = [ParamVector::reference(); 2];
    let prepared = prepare(&train, spec.objective.pipeline.dt).unwrap();
    let obj_best = objective(&result.best, &prepared, &spec.bounds, &spec.objective);
    let obj_truth = objective(&truth, &prepared, &spec.bounds, &spec.objective);
    let val_rmse = validate(&result.best, &val, &spec).unwrap().rmse;
    let elapsed = started.elapsed().as_secs_f64();
    let budgets =
        result.iterations <= spec.sa.iterations && result.evaluations <= spec.sa.max_evals;
    (
        val_rmse <= 0.05 && obj_best <= 1.1 * obj_truth && budgets && elapsed <= 900.0,
        format!(
            "validation RMSE {val_rmse:.4} rad (<= 0.05), objective {obj_best:.4} vs truth {obj_truth:.4} (ratio {:.3} <= 1.1), {} iterations / {} evaluations, {elapsed:.0} s (<= 900)",
            obj_best / obj_truth,
            result.iterations,
            result.evaluations
        ),
    )
}

fn success_rate(report: &Report, system: System) -> f64 {
    report
        .groups
        .iter()
        .find(|g| g.system == system && g.field)
        .map_or(f64::NAN, |g| g.sr)
}

fn hypotheses() -> Vec<(&'static str, Outcome)> {
    let subject = Subject::new(
        MusclePair::reference(),
        PipelineConfig::default(),
        &SubjectConfig::default(),
    )
    .unwrap();
    let data = subject.dataset(&DatasetConfig::default(), 21).unwrap();
    let model = fit(&data, &FitConfig::default(), &subject.body.pipeline.plant).unwrap();
    let sim = Simulation {
        models: Models {
            pair: subject.body.pair.clone(),
            pipeline: subject.body.pipeline,
            baseline: Some(model),
        },
        map: subject.map.clone(),
        emg: subject.emg.clone(),
    };
    let protocol = Protocol::default();
    let cell = |system| Condition {
        system,
        field: true,
    };
    let spec = BatchSpec {
        conditions: vec![cell(System::Framework), cell(System::Baseline)],
        trials: 40,
        seed: 9,
        ..Default::default()
    };
    let report = run_batch(&sim, &protocol, &spec).unwrap().report().unwrap();
    let mut no_ramp = spec.clone();
    no_ramp.conditions = vec![cell(System::Framework)];
    no_ramp.user = UserConfig {
        ramp: myoimp::session::RampConfig {
            enabled: false,
            ..Default::default()
        },
        ..Default::default()
    };
    let plain = run_batch(&sim, &protocol, &no_ramp)
        .unwrap()
        .report()
        .unwrap();

    let sr_m = success_rate(&report, System::Framework);
    let sr_b = success_rate(&report, System::Baseline);
    let sr_plain = success_rate(&plain, System::Framework);
    let nm = report
        .comparisons
        .iter()
        .find(|c| c.metric == "nm" && c.field);
    let nm_line = match nm {
        Some(c) => (
            c.p < 0.05,
            format!("one-tailed p = {:.4} (< 0.05), U = {:.1}", c.p, c.u),
        ),
        None => (false, "no NM comparison under field".to_string()),
    };
    vec![
        (
            "H1 success rate under field",
            (
                sr_m > sr_b,
                format!("SR(M) = {sr_m:.3} vs SR(B) = {sr_b:.3}, 40 trials each (difference > 0)"),
            ),
        ),
        (
            "H2 co-contraction ramp",
            (
                sr_m > sr_plain,
                format!("SR(M) with ramp = {sr_m:.3} vs without = {sr_plain:.3} (difference > 0)"),
            ),
        ),
        ("H1 near misses under field", nm_line),
    ]
}

fn min_jerk_speed(duration: f64, amplitude: f64, dt: f64) -> Vec<f64> {
    let n = (duration / dt).round() as usize;
    (0..=n)
        .map(|i| {
            let s = i as f64 / n as f64;
            amplitude / duration * 30.0 * s * s * (1.0 - s) * (1.0 - s)
        })
        .collect()
}

fn metric_oracles() -> Outcome {
    let task = Task {
        start: 0.0,
        target: 0.5,
        band: 0.14,
        id_width: 0.04,
        hold: 3.0,
        timeout: 20.0,
    };
    let straight: Vec<f64> = (0..=1000).map(|i| 0.5 * i as f64 / 1000.0).collect();
    let pe = path_efficiency(&straight, &task);

    // τ_f = 2 N·m at q̇_f = 1 rad/s for one second.
    let rows: Vec<TelemetryRow> = (0..=1000)
        .map(|i| {
            let s = PlantState {
                t: i as f64 * 1e-3,
                q_f: i as f64 * 1e-3,
                qd_f: 1.0,
                tau_f: 2.0,
                tau_ext: 0.0,
            };
            TelemetryRow::from_baseline(&s, 0.0, 0.0, 0.0, [0.0, 0.0])
        })
        .collect();
    let e = energy(&rows, false);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rho: f64 = 0.9;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for _ in 0..100_000 {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        x.push(a);
        y.push(rho * a + (1.0 - rho * rho).sqrt() * b);
    }
    let mi = mutual_information(&x, &y).unwrap().bits;

    let mw = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Less).unwrap();

    let cfg = SparcConfig::default();
    let base = sparc(&min_jerk_speed(1.0, 1.0, 1e-3), 1e-3, &cfg).value;
    let slow = sparc(&min_jerk_speed(2.0, 1.0, 1e-3), 1e-3, &cfg).value;
    let large = sparc(&min_jerk_speed(1.0, 3.0, 1e-3), 1e-3, &cfg).value;
    let (time_gap, amp_gap) = ((base - slow).abs(), (base - large).abs());

    let pass = (pe - 1.0).abs() < 1e-12
        && (e - 2.0).abs() < 1e-9
        && (mi - 1.198).abs() <= 0.1
        && mw.exact
        && (mw.p - 0.05).abs() < 1e-12
        && time_gap <= 1e-2
        && amp_gap <= 1e-2;
    (
        pass,
        format!(
            "PE {pe}, energy {e:.6} J, MI {mi:.3} bits (1.198 ± 0.1), MW exact p {:.4}, SPARC time/amplitude gaps {time_gap:.1e}/{amp_gap:.1e} (<= 1e-2)",
            mw.p
        ),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let wanted =
        |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let single: [(&str, fn() -> Outcome); 8] = [
        ("constants", constants),
        ("derivative oracles", derivative_oracles),
        ("equilibrium soak", equilibrium_soak),
        ("perturbation isolation", perturbation_isolation),
        ("tracking", tracking),
        ("stiffness offset", stiffness_offset),
        ("metrics oracles", metric_oracles),
        ("parameter recovery", parameter_recovery),
    ];
    let mut unexpected = Vec::new();
    let mut known = 0;
    let mut print = |name: &str, (pass, detail): Outcome, secs: f64| {
        let listed = KNOWN_FAILURES.contains(&name);
        match (pass, listed) {
            (false, true) => known += 1,
            (false, false) => unexpected.push(format!("{name} failed")),
            (true, true) => {
                unexpected.push(format!("{name} passed but is listed as a known failure"))
            }
            (true, false) => {}
        }
        let tag = match (pass, listed) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag} {name}: {detail} [{secs:.1} s]");
    };
    for (name, check) in single {
        if wanted(name) {
            let t = Instant::now();
            let outcome = check();
            print(name, outcome, t.elapsed().as_secs_f64());
        }
    }
    if wanted("H1") || wanted("H2") || wanted("hypotheses") {
        let t = Instant::now();
        let lines = hypotheses();
        let secs = t.elapsed().as_secs_f64();
        for (name, outcome) in lines {
            print(name, outcome, secs);
        }
    }
    if known > 0 {
        println!("{known} known failure(s)");
    }
    if !unexpected.is_empty() {
        for u in &unexpected {
            println!("unexpected: {u}");
        }
        std::process::exit(1);
    }
}
