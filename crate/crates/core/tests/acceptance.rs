//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any failure.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use narrowline_core::catalog::Catalog;
use narrowline_core::dynamics::{
    classify_stability, escape_test, hysteresis_sweep, rhs, EscapeOutcome, FlowParams, HysteresisConfig,
    SemiclassicalState,
};
use narrowline_core::metrology::{line_pulling_numeric, operating_point, phase_slope, table1};
use narrowline_core::model::{derive_params, from_dimensionless, to_dimensionless, DimensionlessPoint, PhysicalSystem};
use narrowline_core::noise::{
    end_to_end_lock_sim, estimate_lineshape, synthesize_locked_field, LockSimOptions, NoiseSimConfig,
};
use narrowline_core::steady_state::{
    bistability_thresholds, fold_points, log_grid, scan_drive, solve_branches, transmitted_phase, Stability,
};

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Check, Duration);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

/// Printed values: C0, P(beta = 2) in W, SNR, linewidth in Hz.
const PRINTED: [(&str, f64, f64, f64, f64); 5] = [
    ("Mg-24", 9.6e-3, 20e-12, 9.8e3, 20e-3),
    ("Sr-87", 7.4e-4, 3e-15, 1.5e2, 4.7e-3),
    ("Yb-171", 1.1e-2, 27e-15, 3.9e2, 1.6e-3),
    ("Hg-199", 1.1e-2, 130e-15, 5.8e2, 0.68e-3),
    ("Sr-87-radiative", 1.2e-2, 0.5e-15, 6.1e1, 0.74e-6),
];

fn ac1() -> Check {
    let rows = table1(&Catalog::builtin()).map_err(e)?;
    let mut worst: (f64, String) = (0.0, String::new());
    for (name, c0, p, snr, dnu) in PRINTED {
        let row = rows.iter().find(|r| r.species == name).ok_or(format!("missing row {name}"))?;
        for (label, got, want) in
            [("C0", row.c0, c0), ("P", row.power_w, p), ("SNR", row.snr, snr), ("dnu", row.linewidth_hz, dnu)]
        {
            let r = rel(got, want);
            ensure(r < 0.10, format!("{name} {label}: {got:.4e} vs printed {want:.2e} ({:.1}%)", 100.0 * r))?;
            if r > worst.0 {
                worst = (r, format!("{name} {label}"));
            }
        }
    }
    Ok(format!("5 rows x 4 columns within 10%, worst {:.1}% ({})", 100.0 * worst.0, worst.1))
}

fn ac2() -> Check {
    let c = 100.0;
    for (drive, expect) in [(500.0, 3), (1e3, 3), (2e3, 3), (1e2, 1), (1e4, 1)] {
        let n = solve_branches(&DimensionlessPoint::new(c, drive, 0.0, 0.0)).map_err(e)?.len();
        ensure(n == expect, format!("I_in = {drive}: {n} branches, want {expect}"))?;
    }
    let t = bistability_thresholds(c).ok_or("no window at C = 100")?;
    let lo = rel(t.lower.drive, 4.0 * c);
    let hi = rel(t.upper.drive, c * c / 4.0);
    ensure(lo < 0.15 && hi < 0.15, format!("fold drives {} / {} vs asymptotes", t.lower.drive, t.upper.drive))?;
    let mut worst: f64 = 0.0;
    for f in [t.lower, t.upper] {
        let u = f.intensity;
        let q = (u * u + (2.0 - c) * u + (1.0 + c)).abs() / (u * u).max(1.0 + c);
        worst = worst.max(q);
    }
    ensure(worst < 1e-9, format!("fold identity residual {worst:e}"))?;
    // branch-count transitions seen by the root solver alone
    let count = |d: f64| solve_branches(&DimensionlessPoint::new(c, d, 0.0, 0.0)).map(|s| s.len()).map_err(e);
    let mut solver_gap: f64 = 0.0;
    for (outside, inside, fold) in [(300.0, 1e3, t.lower.drive), (5e3, 1e3, t.upper.drive)] {
        let (mut a, mut b) = (outside, inside);
        for _ in 0..80 {
            let m: f64 = 0.5 * (a + b);
            if count(m)? == 3 {
                b = m;
            } else {
                a = m;
            }
        }
        solver_gap = solver_gap.max(rel(0.5 * (a + b), fold));
    }
    ensure(solver_gap < 1e-6, format!("solver transitions off the folds by {solver_gap:e}"))?;
    Ok(format!(
        "3/3/3/1/1 branches; folds {:.1} ({:.1}% from 4C), {:.1} ({:.1}% from C^2/4); identity {worst:.1e}, solver transitions {solver_gap:.1e}",
        t.lower.drive,
        100.0 * lo,
        t.upper.drive,
        100.0 * hi
    ))
}

fn ac3() -> Check {
    for c in [0.5, 2.0, 5.0, 7.9, 8.0] {
        ensure(bistability_thresholds(c).is_none(), format!("window reported at C = {c}"))?;
        let drives = log_grid(1e-2, 1e4, 400).map_err(e)?;
        for d in drives {
            let n = solve_branches(&DimensionlessPoint::new(c, d, 0.0, 0.0)).map_err(e)?.len();
            ensure(n == 1, format!("C = {c}, I_in = {d}: {n} branches"))?;
        }
    }
    let t = bistability_thresholds(8.5).ok_or("empty window at C = 8.5")?;
    ensure(t.upper.drive > t.lower.drive, "degenerate window at C = 8.5")?;
    let n = solve_branches(&DimensionlessPoint::new(8.5, (t.lower.drive * t.upper.drive).sqrt(), 0.0, 0.0))
        .map_err(e)?
        .len();
    ensure(n == 3, format!("C = 8.5 window interior has {n} branches"))?;
    let folds = fold_points(8.0);
    ensure(folds.len() == 1, format!("C = 8 has {} folds", folds.len()))?;
    let fold_err = (folds[0].intensity - 3.0).abs();
    let set = solve_branches(&DimensionlessPoint::new(8.0, 27.0, 0.0, 0.0)).map_err(e)?;
    let solver_err = (set.top().intensity - 3.0).abs();
    ensure(
        fold_err < 1e-6 && solver_err < 1e-6,
        format!("tangency at {} / {}", folds[0].intensity, set.top().intensity),
    )?;
    ensure(
        set.len() == 1 && set.top().stability == Stability::Marginal,
        "cusp not reported as a single marginal root",
    )?;
    Ok(format!(
        "no window for C <= 8; C = 8.5 window [{:.2}, {:.2}]; tangency error {:.1e}",
        t.lower.drive,
        t.upper.drive,
        fold_err.max(solver_err)
    ))
}

fn ac4() -> Check {
    let set = solve_branches(&DimensionlessPoint::new(100.0, 1e3, 0.0, 0.0)).map_err(e)?;
    let out = classify_stability(&set, 1e3, 2.0).map_err(e)?;
    let v: Vec<_> = out.branches.iter().map(|b| b.stability).collect();
    ensure(v == [Stability::Stable, Stability::Unstable, Stability::Stable], format!("verdicts {v:?}"))?;

    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut checked = 0;
    for _ in 0..100 {
        let c = 10f64.powf(rng.random_range(20f64.log10()..200f64.log10()));
        let t = bistability_thresholds(c).ok_or("no window")?;
        let (a, b) = ((1.1 * t.lower.drive).ln(), (0.9 * t.upper.drive).ln());
        let drive = rng.random_range(a..b).exp();
        let k = 10f64.powf(rng.random_range(1.0..4.0));
        let g = rng.random_range(0.5..2.0);
        let set = solve_branches(&DimensionlessPoint::new(c, drive, 0.0, 0.0)).map_err(e)?;
        ensure(set.len() == 3, format!("C = {c}, I = {drive}: {} branches", set.len()))?;
        let cls = classify_stability(&set, k, g).map_err(e)?;
        for (i, br) in cls.branches.iter().enumerate() {
            let kick = if br.stability == Stability::Unstable { 1e-4 } else { 1e-3 };
            let outcome = escape_test(&cls, i, k, g, kick).map_err(e)?;
            let agree = match (br.stability, &outcome) {
                (Stability::Stable, EscapeOutcome::Returned { .. }) => true,
                (Stability::Unstable, EscapeOutcome::Departed { branch: Some(j), .. }) => *j != i,
                _ => false,
            };
            ensure(
                agree,
                format!(
                    "C = {c:.3}, I = {drive:.3}, K = {k:.1}, gT2 = {g:.3}, branch {i}: {} vs {outcome:?}",
                    br.stability
                ),
            )?;
            checked += 1;
        }
        ensure(
            cls.branches.iter().map(|b| b.stability).collect::<Vec<_>>()
                == [Stability::Stable, Stability::Unstable, Stability::Stable],
            format!("pattern at C = {c}, I = {drive}"),
        )?;
    }
    Ok(format!("stable/unstable/stable at (100, 1e3); {checked} escape tests agree over 100 random points"))
}

fn ac5() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut roots = 0;
    for _ in 0..1000 {
        let c = 10f64.powf(rng.random_range(-1.0..500f64.log10()));
        let drive = 10f64.powf(rng.random_range(-2.0..30000f64.log10()));
        let delta = rng.random_range(-5.0..5.0);
        let theta = rng.random_range(-5.0..5.0);
        let k = 10f64.powf(rng.random_range(0.0..4.0));
        let g = rng.random_range(0.1..2.0);
        let p = DimensionlessPoint::new(c, drive, delta, theta);
        let fp = FlowParams::new(&p, k, g).map_err(e)?;
        for b in &solve_branches(&p).map_err(e)?.branches {
            let r = rhs(&SemiclassicalState::from_branch(b, g), &fp).norm();
            ensure(
                r < 1e-8,
                format!("|rhs| = {r:e} at C = {c}, I = {drive}, delta = {delta}, theta = {theta}, K = {k}"),
            )?;
            worst = worst.max(r);
            roots += 1;
        }
    }
    Ok(format!("{roots} roots over 1000 draws, max |rhs| = {worst:.1e}"))
}

fn ac6() -> Check {
    let mut worst_num: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for c in [50.0, 100.0, 300.0, 1000.0] {
        for beta in [1.5, 2.0, 4.0] {
            let (p, b) = operating_point(c, beta).map_err(e)?;
            let slope = phase_slope(1.0, c, beta, b.inversion);
            let phase = |d: f64| -> Result<f64, String> {
                let q = DimensionlessPoint { delta: d, ..p };
                let set = solve_branches(&q).map_err(e)?;
                Ok(transmitted_phase(&q, set.top()))
            };
            let central = |h: f64| -> Result<f64, String> { Ok((phase(h)? - phase(-h)?) / (2.0 * h)) };
            let h = 1e-3;
            let numeric = (4.0 * central(0.5 * h)? - central(h)?) / 3.0;
            let r = rel(numeric.abs(), slope.exact);
            ensure(r < 1e-6, format!("C = {c}, beta = {beta}: numeric {numeric} vs exact {}", slope.exact))?;
            let gap = slope.relative_gap();
            ensure(gap < 3.0 / c, format!("C = {c}, beta = {beta}: leading-order gap {gap} >= 3/C"))?;
            worst_num = worst_num.max(r);
            worst_gap = worst_gap.max(gap * c);
        }
    }
    ensure(rel(phase_slope(1.0, 100.0, 2.0, -1.0).leading, 0.02) < 1e-12, "4/(beta C) at C = 100")?;
    Ok(format!("exact vs numeric {worst_num:.1e}; leading-order gap <= {worst_gap:.2}/C"))
}

fn ac7() -> Check {
    let t2 = 1.0;
    let mut worst_op: f64 = 0.0;
    let mut drive_beta_gap: f64 = 0.0;
    for c in [100.0, 1000.0] {
        let beta = 2.0;
        let (p, b) = operating_point(c, beta).map_err(e)?;
        let beta_op = 4.0 * b.intensity / (c * c);
        for theta in [1e-3, 3e-4, 1e-4, 1e-5, -1e-4, -1e-3] {
            let numeric = line_pulling_numeric(c, p.drive, theta, t2).map_err(e)?;
            let formula_op = c * beta_op * theta / (8.0 * PI * t2);
            let formula_drive = c * beta * theta / (8.0 * PI * t2);
            let r_op = rel(formula_op, numeric);
            ensure(r_op < 0.01, format!("C = {c}, theta = {theta}: formula {formula_op:e} vs numeric {numeric:e}"))?;
            worst_op = worst_op.max(r_op);
            let r_drive = rel(formula_drive, numeric);
            if c >= 1000.0 {
                ensure(r_drive < 0.01, format!("C = {c}, theta = {theta}: drive-beta formula off by {r_drive}"))?;
            } else {
                drive_beta_gap = drive_beta_gap.max(r_drive);
            }
        }
    }
    let (p, _) = operating_point(100.0, 2.0).map_err(e)?;
    let shift = line_pulling_numeric(100.0, p.drive, 1e-4, 1.0).map_err(e)?;
    let formula = 100.0 * 2.0 * 1e-4 / (8.0 * PI);
    ensure(shift.abs() < 1e-3 && formula < 1e-3, format!("Sr-like shift {shift:e} Hz"))?;
    Ok(format!(
        "operating-point beta within {:.2}%; drive beta within 1% at C = 1000 ({:.1}% at C = 100); Sr-like shift {:.3} mHz",
        100.0 * worst_op,
        100.0 * drive_beta_gap,
        1e3 * shift
    ))
}

fn ac8() -> Check {
    let cfg = NoiseSimConfig::auto(1.0, 8);
    let field = synthesize_locked_field(&cfg).map_err(e)?;
    let est = estimate_lineshape(&field, cfg.segments).map_err(e)?;
    let r_fwhm = rel(est.fwhm_hz, PI / 2.0);
    ensure(r_fwhm < 0.10, format!("h0 = 1 FWHM {} Hz", est.fwhm_hz))?;
    let slope = est.structure_slope.ok_or("no structure slope")?;
    let r_slope = rel(slope, PI * PI);
    ensure(r_slope < 0.05, format!("structure slope {slope}"))?;

    // independent seeds per level, four runs averaged at each of four decades
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, h0) in [0.1, 1.0, 10.0, 100.0].into_iter().enumerate() {
        let mut acc = 0.0;
        for s in 0..4u64 {
            let cfg = NoiseSimConfig::auto(h0, 1000 + 10 * i as u64 + s);
            let est = estimate_lineshape(&synthesize_locked_field(&cfg).map_err(e)?, cfg.segments).map_err(e)?;
            acc += est.fwhm_hz.ln();
        }
        xs.push(h0.ln());
        ys.push(acc / 4.0);
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let loglog = sxy / sxx;
    ensure((loglog - 1.0).abs() < 0.02, format!("log-log slope {loglog}"))?;

    let catalog = Catalog::builtin();
    let mut e2e = Vec::new();
    for name in ["Mg-24", "Sr-87"] {
        let sys = catalog.get(name).map_err(e)?.system().map_err(e)?;
        let r = end_to_end_lock_sim(&sys, 2.0, &LockSimOptions { seed: 88, ..Default::default() }).map_err(e)?;
        ensure(
            r.relative_error().abs() < 0.15,
            format!("{name} scaled lock sim off by {:.1}%", 100.0 * r.relative_error()),
        )?;
        e2e.push(format!("{name} {:+.1}%", 100.0 * r.relative_error()));
    }
    Ok(format!(
        "FWHM {:.4} Hz ({:.1}%), D slope {:.3} ({:.1}%), log-log {loglog:.4}, x1e6 lock sims {}",
        est.fwhm_hz,
        100.0 * r_fwhm,
        slope,
        100.0 * r_slope,
        e2e.join(", ")
    ))
}

fn ac9() -> Check {
    let t = bistability_thresholds(100.0).ok_or("no window")?;
    let lp = hysteresis_sweep(&HysteresisConfig::for_cooperativity(100.0)).map_err(e)?;
    let up = lp.up_jump.ok_or("no up-jump at C = 100")?;
    let down = lp.down_jump.ok_or("no down-jump at C = 100")?;
    let (ru, rd) = (rel(up, t.upper.drive), rel(down, t.lower.drive));
    ensure(ru < 0.05 && rd < 0.05, format!("jumps {up} / {down} vs folds {} / {}", t.upper.drive, t.lower.drive))?;
    let flat = hysteresis_sweep(&HysteresisConfig::for_cooperativity(4.0)).map_err(e)?;
    ensure(!flat.has_loop(), "loop found at C = 4")?;
    let gap = flat.max_trace_gap();
    ensure(gap < 1e-3, format!("C = 4 traces differ by {gap}"))?;
    Ok(format!(
        "up-jump {:.1}% and down-jump {:.1}% from folds; C = 4 traces agree to {gap:.1e}",
        100.0 * ru,
        100.0 * rd
    ))
}

fn ac10() -> Check {
    let base = Catalog::builtin().get("Sr-87").map_err(e)?.system().map_err(e)?;
    let a = PhysicalSystem { atom_number: 135_000, ..base.clone() };
    let b = PhysicalSystem {
        atom_number: 270_000,
        finesse: base.finesse / 2.0,
        length: 0.37,
        quantum_efficiency: 0.6,
        ..base
    };
    let (da, db) = (derive_params(&a).map_err(e)?, derive_params(&b).map_err(e)?);
    ensure(da.coupling != db.coupling && da.kappa != db.kappa, "systems are not distinct")?;
    ensure(da.cooperativity == db.cooperativity, format!("C differs: {} vs {}", da.cooperativity, db.cooperativity))?;
    let c = da.cooperativity;
    let drives = log_grid(1.0, 1e5, 200).map_err(e)?;
    let sa = scan_drive(c, 0.0, 0.0, &drives).map_err(e)?;
    let sb = scan_drive(db.cooperativity, 0.0, 0.0, &drives).map_err(e)?;
    ensure(sa == sb, "dimensionless scans differ")?;

    // round trip through each system's own physical drive and detunings
    let mut worst: f64 = 0.0;
    for (i, &drive) in drives.iter().enumerate().step_by(7) {
        let point = DimensionlessPoint::new(c, drive, 0.3 * (i as f64 / 200.0), -0.2);
        let mut sets = Vec::new();
        for sys in [&a, &b] {
            let phys = from_dimensionless(sys, &point).map_err(e)?;
            let back = to_dimensionless(sys, phys.eta, phys.atom_cavity, phys.cavity_laser).map_err(e)?;
            sets.push(solve_branches(&back).map_err(e)?);
        }
        ensure(sets[0].len() == sets[1].len(), format!("branch counts differ at I = {drive}"))?;
        for (x, y) in sets[0].branches.iter().zip(&sets[1].branches) {
            let d = (x.field - y.field).norm() / x.field.norm().max(1e-300);
            worst = worst.max(d).max(rel(x.intensity, y.intensity));
        }
    }
    ensure(worst < 1e-9, format!("physical round trip differs by {worst:e}"))?;
    Ok(format!("C = {c:.4} from (N, F, L) = (1.35e5, 1e5, 0.1) and (2.7e5, 5e4, 0.37); scans bit-identical, round trip {worst:.1e}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1", "Table 1 regression", ac1, Duration::from_secs(1)),
        ("AC2", "bistability window", ac2, Duration::from_secs(1)),
        ("AC3", "critical cooperativity", ac3, Duration::from_secs(1)),
        ("AC4", "stability structure", ac4, Duration::from_secs(60)),
        ("AC5", "fixed-point cross-check", ac5, Duration::from_secs(10)),
        ("AC6", "phase slope", ac6, Duration::from_secs(1)),
        ("AC7", "line pulling", ac7, Duration::from_secs(1)),
        ("AC8", "white-noise lineshape Monte Carlo", ac8, Duration::from_secs(120)),
        ("AC9", "hysteresis", ac9, Duration::from_secs(60)),
        ("AC10", "universality", ac10, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (id, name, f, budget) in criteria {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; over the {budget:?} budget")),
            other => other,
        };
        match result {
            Ok(detail) => println!("{id} PASS {name}: {detail} [{:.2} s]", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("{id} FAIL {name}: {why} [{:.2} s]", elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
