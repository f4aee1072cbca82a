use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{Context as _, Result};
use serde_json::{json, Value};

use narrowline_core::catalog::Catalog;
use narrowline_core::dynamics::{
    classify_stability, escape_test, hysteresis_sweep, EscapeOutcome, HysteresisConfig, DEFAULT_GAMMA_T2,
    DEFAULT_STIFFNESS,
};
use narrowline_core::fmt::num;
use narrowline_core::metrology::{
    line_pulling, line_pulling_numeric, lock_budget, table1, write_table1_csv, write_table1_text,
};
use narrowline_core::model::{derive_params, drive_for_beta, DEFAULT_BETA};
use narrowline_core::noise::{
    end_to_end_lock_sim, estimate_lineshape, synthesize_locked_field, write_lineshape_csv, LineshapeEstimate,
    LineshapeSummary, LockSimOptions,
};
use narrowline_core::steady_state::{
    bistability_thresholds, branch_records, linear_grid, log_grid, scan_drive, scan_spectrum, scan_surface,
    write_branch_csv, write_surface_csv, SurfaceGrid,
};
use narrowline_core::{DimensionlessPoint, Error, FieldSeries, NoiseSimConfig, PhysicalSystem};

use crate::args::*;

/// Everything a subcommand produces before it is written out.
pub struct Output {
    pub text: String,
    pub json: Value,
    /// Resolved parameters recorded in the manifest.
    pub resolved: Value,
    pub seed: Option<u64>,
    /// Plot script body; `{data}` is replaced by the data file name.
    pub gnuplot: Option<String>,
    pub extra_outputs: Vec<PathBuf>,
    pub catalog_version: String,
}

impl Output {
    fn new(text: String, json: Value, resolved: Value, ctx: &Context) -> Self {
        Output {
            text,
            json,
            resolved,
            seed: None,
            gnuplot: None,
            extra_outputs: Vec::new(),
            catalog_version: ctx.catalog.version.clone(),
        }
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> anyhow::Error {
    Error::InvalidParameter { name, reason: reason.into() }.into()
}

pub struct Context {
    pub global: Global,
    pub catalog: Catalog,
}

impl Context {
    pub fn new(global: Global) -> Result<Self> {
        let catalog = match &global.config {
            Some(path) => Catalog::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => Catalog::builtin(),
        };
        Ok(Context { global, catalog })
    }

    /// Explicitly selected system: `--species`, or the only record of `--config`.
    fn selected(&self) -> Result<Option<(String, PhysicalSystem)>> {
        if let Some(name) = &self.global.species {
            let rec = self.catalog.get(name)?;
            return Ok(Some((rec.name.clone(), rec.system()?)));
        }
        if self.global.config.is_some() && self.catalog.species.len() == 1 {
            let rec = &self.catalog.species[0];
            return Ok(Some((rec.name.clone(), rec.system()?)));
        }
        Ok(None)
    }

    /// Selected system, falling back to Sr-87 of the built-in catalog.
    fn system(&self, over: &SystemArgs) -> Result<(String, PhysicalSystem)> {
        let (name, mut sys) = match self.selected()? {
            Some(s) => s,
            None if self.global.config.is_some() => {
                return Err(invalid("species", "the catalog has several records; pick one with --species"))
            }
            None => ("Sr-87".to_string(), Catalog::builtin().get("Sr-87")?.system()?),
        };
        if let Some(n) = over.atoms {
            sys.atom_number = n;
        }
        if let Some(f) = over.finesse {
            sys.finesse = f;
        }
        if let Some(b) = over.beta {
            sys.beta = b;
        }
        sys.validate()?;
        Ok((name, sys))
    }

    fn cooperativity(&self, explicit: Option<f64>) -> Result<f64> {
        if let Some(c) = explicit {
            return Ok(c);
        }
        Ok(match self.selected()? {
            Some((_, sys)) => derive_params(&sys)?.cooperativity,
            None => 100.0,
        })
    }

    fn drive(&self, c: f64, drive: Option<f64>, beta: Option<f64>) -> Result<f64> {
        if let Some(i) = drive {
            return Ok(i);
        }
        let beta = match beta {
            Some(b) => b,
            None => self.selected()?.map(|(_, s)| s.beta).unwrap_or(DEFAULT_BETA),
        };
        Ok(drive_for_beta(c, beta))
    }

    /// Scaled atomic detuning from `--delta-scaled` or `--delta-hz`.
    fn delta(&self, p: &PointArgs) -> Result<f64> {
        match (p.delta_scaled, p.delta_hz) {
            (Some(d), _) => Ok(d),
            (None, Some(hz)) => Ok(2.0 * PI * hz * self.t2_for_hz()?),
            (None, None) => Ok(0.0),
        }
    }

    fn t2_for_hz(&self) -> Result<f64> {
        match self.selected()? {
            Some((_, sys)) => Ok(sys.t2()),
            None => Err(invalid("delta_hz", "detunings in Hz need a species (--species or --config) for T2")),
        }
    }

    fn dynamics(&self, d: &DynamicsArgs) -> Result<(f64, f64)> {
        let sel = self.selected()?.map(|(_, s)| derive_params(&s)).transpose()?;
        let k = d.stiffness.or(sel.map(|p| p.stiffness)).unwrap_or(DEFAULT_STIFFNESS);
        let g = d.gamma_t2.or(sel.map(|p| p.gamma_t2.min(2.0))).unwrap_or(DEFAULT_GAMMA_T2);
        Ok((k, g))
    }
}

pub fn run(cmd: &Command, ctx: &Context) -> Result<Output> {
    match cmd {
        Command::Params(a) => params(a, ctx),
        Command::Bistability(a) => bistability(a, ctx),
        Command::Spectrum(a) => spectrum(a, ctx),
        Command::Surface(a) => surface(a, ctx),
        Command::Stability(a) => stability(a, ctx),
        Command::Hysteresis(a) => hysteresis(a, ctx),
        Command::Metrology(a) => metrology(a, ctx),
        Command::Table1 => table(ctx),
        Command::Pulling(a) => pulling(a, ctx),
        Command::Locksim(a) => locksim(a, ctx),
        Command::Replay { .. } => unreachable!("replay is resolved before dispatch"),
    }
}

fn key_value_lines(value: &Value) -> String {
    let mut out = String::from("quantity,value\n");
    if let Value::Object(map) = value {
        for (k, v) in map {
            match v {
                Value::Number(n) => writeln!(out, "{k},{}", num(n.as_f64().unwrap_or(f64::NAN))).unwrap(),
                Value::Null => writeln!(out, "{k},").unwrap(),
                other => writeln!(out, "{k},{other}").unwrap(),
            }
        }
    }
    out
}

fn params(a: &SystemArgs, ctx: &Context) -> Result<Output> {
    let (name, sys) = ctx.system(a)?;
    let d = derive_params(&sys)?;
    let point = DimensionlessPoint::at_beta(d.cooperativity, sys.beta);
    let record = narrowline_core::SpeciesRecord::from_system(name.clone(), &sys);
    let mut flat = serde_json::to_value(d)?;
    if let Value::Object(m) = &mut flat {
        m.insert("C".into(), json!(point.cooperativity));
        m.insert("I_in".into(), json!(point.drive));
        m.insert("beta".into(), json!(sys.beta));
    }
    let text = key_value_lines(&flat);
    let json = json!({ "species": name, "record": record, "derived": d, "point": point });
    Ok(Output::new(text, json.clone(), json, ctx))
}

fn branch_output(sets: &[narrowline_core::BranchSet], resolved: Value, ctx: &Context, x_col: usize) -> Result<Output> {
    let mut buf = Vec::new();
    write_branch_csv(&mut buf, sets)?;
    let c = sets.first().map(|s| s.point.cooperativity).unwrap_or(0.0);
    let json = json!({
        "thresholds": bistability_thresholds(c),
        "branches": branch_records(sets),
    });
    let mut out = Output::new(String::from_utf8(buf)?, json, resolved, ctx);
    let logx = if x_col == 2 { "set logscale xy\n" } else { "set logscale y\n" };
    out.gnuplot = Some(format!(
        "set datafile separator ','\n{logx}set key off\nset ylabel 'u'\nplot '{{data}}' every ::1 using {x_col}:6 with points pt 7 ps 0.4\n"
    ));
    Ok(out)
}

fn bistability(a: &BistabilityArgs, ctx: &Context) -> Result<Output> {
    let c = ctx.cooperativity(a.point.cooperativity)?;
    let delta = ctx.delta(&a.point)?;
    let drives = match (a.drive, a.beta) {
        (Some(i), _) => vec![i],
        (None, Some(b)) => vec![drive_for_beta(c, b)],
        (None, None) => log_grid(a.i_min, a.i_max, a.points)?,
    };
    let sets = scan_drive(c, delta, a.point.theta, &drives)?;
    let resolved = json!({ "C": c, "delta": delta, "theta": a.point.theta, "drives": drives.len(), "args": a });
    branch_output(&sets, resolved, ctx, 2)
}

fn spectrum(a: &SpectrumArgs, ctx: &Context) -> Result<Output> {
    let c = ctx.cooperativity(a.drive.cooperativity)?;
    let drive = ctx.drive(c, a.drive.drive, a.drive.beta)?;
    let span = match (a.span_scaled, a.span_hz) {
        (Some(s), _) => s,
        (None, Some(hz)) => 2.0 * PI * hz * ctx.t2_for_hz()?,
        (None, None) => 300.0,
    };
    let deltas = linear_grid(-span, span, a.points)?;
    let sets = scan_spectrum(c, drive, a.theta, &deltas)?;
    let resolved = json!({ "C": c, "I_in": drive, "theta": a.theta, "span": span, "args": a });
    branch_output(&sets, resolved, ctx, 3)
}

fn surface(a: &SurfaceArgs, ctx: &Context) -> Result<Output> {
    let c = ctx.cooperativity(a.drive.cooperativity)?;
    let drive = ctx.drive(c, a.drive.drive, a.drive.beta)?;
    let deltas = linear_grid(-a.span_scaled, a.span_scaled, a.delta_points)?;
    let thetas = linear_grid(-a.theta_span, a.theta_span, a.theta_points)?;
    let s = scan_surface(c, drive, &deltas, &thetas)?;
    let mut buf = Vec::new();
    write_surface_csv(&mut buf, &s)?;
    let resolved = json!({ "C": c, "I_in": drive, "args": a });
    let mut out = Output::new(String::from_utf8(buf)?, serde_json::to_value(SurfaceGrid::from(&s))?, resolved, ctx);
    out.gnuplot = Some(
        "set datafile separator ','\nset view map\nset xlabel 'delta'\nset ylabel 'theta'\nsplot '{data}' every ::1 using 3:4:6 with points pt 5 ps 0.3 palette\n"
            .into(),
    );
    Ok(out)
}

pub const STABILITY_CSV_HEADER: &str = "branch_index,u,re_x,im_x,sigma_z,stability,re_lambda_max,im_lambda_max,escape";

fn stability(a: &StabilityArgs, ctx: &Context) -> Result<Output> {
    let c = ctx.cooperativity(a.point.cooperativity)?;
    let point = DimensionlessPoint::new(c, ctx.drive(c, a.drive, a.beta)?, ctx.delta(&a.point)?, a.point.theta);
    let (k, g) = ctx.dynamics(&a.dynamics)?;
    let set = classify_stability(&narrowline_core::steady_state::solve_branches(&point)?, k, g)?;
    let mut text = format!("{STABILITY_CSV_HEADER}\n");
    let mut rows = Vec::new();
    for (i, b) in set.branches.iter().enumerate() {
        let lead = b.eigenvalues.first().copied().unwrap_or_default();
        let escape = if a.escape { Some(escape_test(&set, i, k, g, a.kick)?) } else { None };
        let tag = match &escape {
            Some(EscapeOutcome::Returned { .. }) => "returned",
            Some(EscapeOutcome::Departed { .. }) => "departed",
            Some(EscapeOutcome::Undecided { .. }) => "undecided",
            None => "",
        };
        writeln!(
            text,
            "{i},{},{},{},{},{},{},{},{tag}",
            num(b.intensity),
            num(b.field.re),
            num(b.field.im),
            num(b.inversion),
            b.stability,
            num(lead.re),
            num(lead.im)
        )?;
        rows.push(json!({
            "branch_index": i,
            "u": b.intensity,
            "re_x": b.field.re,
            "im_x": b.field.im,
            "sigma_z": b.inversion,
            "stability": b.stability,
            "re_lambda_max": lead.re,
            "im_lambda_max": lead.im,
            "eigenvalues": b.eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "escape": escape,
        }));
    }
    let verdict: Vec<_> = set.branches.iter().map(|b| b.stability.as_str()).collect();
    log::info!("verdicts: {}", verdict.join("/"));
    let resolved = json!({ "point": point, "K": k, "gamma_t2": g, "args": a });
    let json = json!({ "point": point, "K": k, "gamma_t2": g, "branches": rows });
    Ok(Output::new(text, json, resolved, ctx))
}

fn hysteresis(a: &HysteresisArgs, ctx: &Context) -> Result<Output> {
    let (k, g) = ctx.dynamics(&a.dynamics)?;
    let base = HysteresisConfig::for_cooperativity(a.cooperativity);
    let cfg = HysteresisConfig {
        stiffness: k,
        gamma_t2: g,
        drive_min: a.i_min.unwrap_or(base.drive_min),
        drive_max: a.i_max.unwrap_or(base.drive_max),
        points: a.points.unwrap_or(base.points),
        dwell: a.dwell.unwrap_or(base.dwell),
        tol: a.tol.unwrap_or(base.tol),
        ..base
    };
    let lp = hysteresis_sweep(&cfg)?;
    let folds = bistability_thresholds(a.cooperativity);
    let mut buf = Vec::new();
    lp.write_csv(&mut buf)?;
    if let (Some(t), Some(up), Some(down)) = (folds, lp.up_jump, lp.down_jump) {
        log::info!(
            "up-jump {} ({:+.2}% from fold), down-jump {} ({:+.2}% from fold)",
            num(up),
            100.0 * (up / t.upper.drive - 1.0),
            num(down),
            100.0 * (down / t.lower.drive - 1.0)
        );
    }
    let json = json!({
        "config": cfg,
        "folds": folds,
        "up_jump": lp.up_jump,
        "down_jump": lp.down_jump,
        "has_loop": lp.has_loop(),
        "warnings": lp.warnings,
        "points": lp.points().collect::<Vec<_>>(),
    });
    let mut out = Output::new(String::from_utf8(buf)?, json, json!({ "config": cfg }), ctx);
    out.gnuplot = Some(
        "set datafile separator ','\nset logscale xy\nset xlabel 'I_in'\nset ylabel 'u'\nplot '{data}' every ::1 using 1:2 with linespoints pt 7 ps 0.4\n"
            .into(),
    );
    Ok(out)
}

fn metrology(a: &SystemArgs, ctx: &Context) -> Result<Output> {
    let (name, sys) = ctx.system(a)?;
    let b = lock_budget(&sys, sys.beta)?;
    let json = serde_json::to_value(b)?;
    let resolved =
        json!({ "species": name, "record": narrowline_core::SpeciesRecord::from_system(name.clone(), &sys) });
    Ok(Output::new(key_value_lines(&json), json, resolved, ctx))
}

fn table(ctx: &Context) -> Result<Output> {
    let rows = table1(&ctx.catalog)?;
    let mut buf = Vec::new();
    let csv = ctx.global.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
    if csv {
        write_table1_csv(&rows, &mut buf)?;
    } else {
        write_table1_text(&rows, &mut buf)?;
    }
    let json = serde_json::to_value(&rows)?;
    Ok(Output::new(String::from_utf8(buf)?, json, json!({ "species": rows.len() }), ctx))
}

pub const PULLING_CSV_HEADER: &str = "theta,formula_Hz,numeric_Hz";

fn pulling(a: &PullingArgs, ctx: &Context) -> Result<Output> {
    let (name, sys) = ctx.system(&a.system)?;
    let d = derive_params(&sys)?;
    let drive = drive_for_beta(d.cooperativity, sys.beta);
    let mut text = format!("{PULLING_CSV_HEADER}\n");
    let mut rows = Vec::new();
    for &theta in &a.theta {
        let formula = line_pulling(&sys, sys.beta, theta)?;
        let numeric = line_pulling_numeric(d.cooperativity, drive, theta, sys.t2())?;
        writeln!(text, "{},{},{}", num(theta), num(formula), num(numeric))?;
        rows.push(json!({ "theta": theta, "formula_Hz": formula, "numeric_Hz": numeric }));
    }
    let resolved = json!({ "species": name, "C": d.cooperativity, "beta": sys.beta, "T2": sys.t2(), "args": a });
    Ok(Output::new(text, json!(rows), resolved, ctx))
}

fn lineshape_output(est: &LineshapeEstimate, summary: Value, resolved: Value, ctx: &Context) -> Result<Output> {
    let mut buf = Vec::new();
    write_lineshape_csv(est, &mut buf)?;
    log::info!("{}", summary);
    let mut json = summary;
    json["lineshape"] = json!(est.lineshape);
    let mut out = Output::new(String::from_utf8(buf)?, json, resolved, ctx);
    out.gnuplot = Some(
        "set datafile separator ','\nset logscale y\nset xlabel 'f (Hz)'\nset ylabel 'PSD'\nplot '{data}' every ::1 using 1:2 with lines\n"
            .into(),
    );
    Ok(out)
}

fn locksim(a: &LocksimArgs, ctx: &Context) -> Result<Output> {
    let seed = ctx.global.seed;
    if let Some(path) = &a.input {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let series = FieldSeries::read_csv(BufReader::new(file))?;
        let est = estimate_lineshape(&series, a.segments)?;
        let summary = json!({
            "fwhm_hz": est.fwhm_hz,
            "err_hz": est.fwhm_err_hz,
            "h0_hz2_per_hz": 2.0 * est.fwhm_hz / PI,
            "seed": Value::Null,
            "resolution_hz": est.resolution_hz,
            "resolution_limited": est.resolution_limited,
            "structure_slope": est.structure_slope,
        });
        let resolved = json!({ "input": path, "samples": series.samples.len(), "sample_rate": series.sample_rate, "summary": summary.clone(), "args": a });
        return lineshape_output(&est, summary, resolved, ctx);
    }

    let (cfg, est, extra) = match a.h0 {
        Some(h0) => {
            let auto = NoiseSimConfig::auto(h0, seed);
            let cfg = NoiseSimConfig {
                sample_rate: a.rate.unwrap_or(auto.sample_rate),
                duration: a.duration.unwrap_or(auto.duration),
                segments: a.segments,
                ..auto
            };
            let field = synthesize_locked_field(&cfg)?;
            let est = estimate_lineshape(&field, cfg.segments)?;
            (cfg, est, json!({}))
        }
        None => {
            let (name, sys) = ctx.system(&SystemArgs { atoms: None, finesse: None, beta: a.beta })?;
            let opts = LockSimOptions { scale: a.scale, seed, segments: a.segments, lo_power: a.lo_power };
            let r = end_to_end_lock_sim(&sys, sys.beta, &opts)?;
            let extra = json!({
                "species": name,
                "beta": sys.beta,
                "scale": r.scale,
                "h0_unscaled_hz2_per_hz": r.h0,
                "predicted_unscaled_fwhm_hz": r.predicted_fwhm_hz / r.scale,
                "unscaled_fwhm_hz": r.unscaled_fwhm_hz(),
                "relative_error": r.relative_error(),
            });
            (r.config, r.estimate, extra)
        }
    };
    let mut summary = serde_json::to_value(LineshapeSummary::new(&est, &cfg))?;
    if let (Value::Object(m), Value::Object(e)) = (&mut summary, extra) {
        m.extend(e);
    }
    let resolved = json!({ "config": cfg, "summary": summary.clone(), "args": a });
    let mut out = lineshape_output(&est, summary, resolved, ctx)?;
    out.seed = Some(seed);
    if let Some(path) = &a.series_out {
        let field = synthesize_locked_field(&cfg)?;
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        field.write_csv(std::io::BufWriter::new(file))?;
        out.extra_outputs.push(path.clone());
    }
    Ok(out)
}
