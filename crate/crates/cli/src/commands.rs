//! Subcommand implementations.

use std::path::Path;

use pulsedamp::analysis::{
    certify as run_certify, construct_slow_solution, energy_lower_bound, random_states, CertifyOptions, DecayBound,
    DecayCertificate,
};
use pulsedamp::design::{
    design_lipschitz, design_ode_any_rate, design_ode_exponential, design_ode_exponential_smooth,
    design_pde_exponential_smooth, design_pde_exponential_with, design_pde_ultra, design_system as build_system,
    verify_coercive_decay, Design, MollifiedProfile, PdeOptions, SystemOptions, UltraOptions,
};
use pulsedamp::par;
use pulsedamp::spectra::{
    growth_order_check, model_spectrum, pde_schedule_table, Column, Equation, GrowthForm, ModelOperator,
};
use pulsedamp::{energy, propagate_profile, DampingProfile, Exec, Spectrum};

use crate::io::{format_profile, read_envelope, read_profile, write_atomic, Report, Table};
use crate::{
    CertifyArgs, CheckArgs, CliError, DampingArgs, DesignAnyArgs, DesignLipArgs, DesignOdeArgs, DesignPdeArgs,
    DesignSystemArgs, DesignUltraArgs, LowerBoundArgs, Model, OutputArgs, SlowArgs, SpectrumArgs, SweepArgs,
    TableArgs, Verdict,
};

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn exec(check: &CheckArgs) -> Exec {
    if check.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn resolve_spectrum(a: &SpectrumArgs) -> Result<Spectrum, CliError> {
    let given = [a.lambda.is_some(), a.spectrum.is_some(), a.model.is_some()].iter().filter(|&&g| g).count();
    if given != 1 {
        return Err(input("give exactly one of --lambda, --spectrum or --model"));
    }
    if let Some(l) = a.lambda {
        return Ok(Spectrum::single(l)?);
    }
    if let Some(list) = &a.spectrum {
        return Ok(Spectrum::new(list.clone())?);
    }
    let count = a.count.ok_or_else(|| input("--model needs --count"))?;
    let equation = match a.model {
        Some(Model::Beam) => Equation::Beam,
        _ => Equation::Wave,
    };
    Ok(model_spectrum(&ModelOperator::new(equation, a.dim, count))?)
}

fn resolve_damping(a: &DampingArgs) -> Result<DampingProfile, CliError> {
    match (a.delta, &a.profile) {
        (Some(d), None) => Ok(DampingProfile::constant(d)?),
        (None, Some(path)) => read_profile(path),
        _ => Err(input("give exactly one of --delta or --profile")),
    }
}

fn horizon(check: &CheckArgs, period: f64, default_periods: f64) -> Result<f64, CliError> {
    let h = match (check.horizon, check.periods) {
        (Some(h), _) => h,
        (None, Some(p)) => p * period,
        (None, None) => default_periods * period,
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(input(format!("horizon must be positive and finite, got {h}")));
    }
    Ok(h)
}

fn emit(path: Option<&Path>, bytes: Vec<u8>) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, &bytes),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn finish_report(report: &Report, path: Option<&Path>) -> Result<(), CliError> {
    let text = report.render();
    if let Some(p) = path {
        write_atomic(p, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn describe_bound(r: &mut Report, bound: &DecayBound) {
    match bound {
        DecayBound::Unit => r.set("claim", "unit"),
        DecayBound::Exponential { rate, offset } => {
            r.set("claim", "exponential");
            r.set("claim_rate", rate);
            r.set("claim_offset", offset);
        }
        DecayBound::Envelope { envelope, valid_from } => {
            r.set("claim", "envelope");
            r.set("claim_points", envelope.len());
            r.set("claim_valid_from", valid_from);
        }
    }
}

fn describe_design(r: &mut Report, d: &Design) {
    r.set("t0", d.t0);
    r.set("period", d.profile.period());
    r.set("periodic", d.profile.is_periodic());
    r.set("segments", d.profile.segments().len());
    r.list("pulse_n", d.blocks.iter().map(|b| b.n));
    r.list("pulse_mass", d.blocks.iter().map(|b| b.mass));
    if let Some(s) = &d.schedule {
        r.set("schedule_consistent", s.is_consistent());
    }
    describe_bound(r, &d.certificate.bound);
}

fn describe_smoothing(r: &mut Report, m: &MollifiedProfile) {
    r.set("smooth_width", m.width);
    r.set("smooth_l2_distance", m.l2_distance);
    r.set("smooth_budget", m.budget);
    r.set("smooth_jumps", m.jumps);
}

fn describe_certificate(r: &mut Report, c: &DecayCertificate) {
    r.set("horizon", c.horizon);
    r.set("batch", c.batch);
    r.set("seed", c.seed);
    r.set("checked_times", c.checked_times);
    r.set("measured_margin", c.measured_margin);
    r.set("worst_case_margin", c.worst_case_margin);
    r.set("critical_time", c.critical_time);
    r.set("verified", c.verified);
}

/// Total energy and claimed bound along the trajectory of the first random state.
fn energy_samples(
    profile: &DampingProfile,
    spectrum: &Spectrum,
    bound: &DecayBound,
    horizon: f64,
    seed: u64,
) -> Result<Vec<u8>, CliError> {
    let init = random_states(spectrum, 1, seed).remove(0);
    let trajectories = spectrum
        .frequencies()
        .iter()
        .zip(&init)
        .map(|(&l, &s)| propagate_profile(s, l, profile, horizon))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&["t", "energy", "bound"]);
    for (i, sample) in trajectories[0].iter().enumerate() {
        let e: f64 = trajectories.iter().zip(spectrum.frequencies()).map(|(tr, &l)| energy(tr[i].state, l)).sum();
        table.row(&[sample.t.to_string(), e.to_string(), bound.value(sample.t).to_string()]);
    }
    Ok(table.into_bytes())
}

struct Check<'a> {
    profile: &'a DampingProfile,
    spectrum: &'a Spectrum,
    bound: &'a DecayBound,
    default_periods: f64,
    certify: bool,
}

/// Writes profile, samples and report, running the certification if requested.
fn conclude(mut r: Report, c: Check<'_>, check: &CheckArgs, out: &OutputArgs) -> Result<Verdict, CliError> {
    let h = horizon(check, c.profile.period(), c.default_periods)?;
    let mut verdict = Verdict::Done;
    if c.certify {
        let opts = CertifyOptions::new(h, check.batch).with_seed(check.seed).with_exec(exec(check));
        let cert = run_certify(c.profile, c.spectrum, c.bound, &opts)?;
        describe_certificate(&mut r, &cert);
        verdict = if cert.verified { Verdict::Verified } else { Verdict::Falsified };
    }
    if let Some(p) = &out.profile_out {
        write_atomic(p, format_profile(c.profile).as_bytes())?;
    }
    if let Some(p) = &out.samples_out {
        write_atomic(p, &energy_samples(c.profile, c.spectrum, c.bound, h, check.seed)?)?;
    }
    finish_report(&r, out.report_out.as_deref())?;
    Ok(verdict)
}

pub fn design_ode(a: DesignOdeArgs) -> Result<Verdict, CliError> {
    let mut r = Report::new("design-ode");
    r.set("lambda", a.lambda);
    r.set("rate", a.rate);
    let (design, smooth) = if a.smooth {
        let (d, m) = design_ode_exponential_smooth(a.lambda, a.rate, a.budget)?;
        (d, Some(m))
    } else {
        (design_ode_exponential(a.lambda, a.rate)?, None)
    };
    describe_design(&mut r, &design);
    if let Some(m) = &smooth {
        describe_smoothing(&mut r, m);
    }
    let spectrum = Spectrum::single(a.lambda)?;
    let c = Check {
        profile: &design.profile,
        spectrum: &spectrum,
        bound: &design.certificate.bound,
        default_periods: 10.0,
        certify: a.certify,
    };
    conclude(r, c, &a.check, &a.out)
}

pub fn design_any(a: DesignAnyArgs) -> Result<Verdict, CliError> {
    let envelope = read_envelope(&a.envelope)?;
    let mut r = Report::new("design-any");
    r.set("lambda", a.lambda);
    r.set("blocks", a.blocks);
    let design = design_ode_any_rate(a.lambda, &envelope, a.blocks)?;
    describe_design(&mut r, &design);
    let spectrum = Spectrum::single(a.lambda)?;
    let c = Check {
        profile: &design.profile,
        spectrum: &spectrum,
        bound: &design.certificate.bound,
        default_periods: 1.0,
        certify: a.certify,
    };
    conclude(r, c, &a.check, &a.out)
}

pub fn design_system(a: DesignSystemArgs) -> Result<Verdict, CliError> {
    let spectrum = resolve_spectrum(&a.spectrum)?;
    let mut r = Report::new("design-system");
    r.set("modes", spectrum.len());
    r.set("rate", a.rate);
    r.set("common_n", a.common_n);
    let design = build_system(&spectrum, a.rate, SystemOptions { common_n: a.common_n, ..Default::default() })?;
    describe_design(&mut r, &design);
    let c = Check {
        profile: &design.profile,
        spectrum: &spectrum,
        bound: &design.certificate.bound,
        default_periods: 6.0,
        certify: a.certify,
    };
    conclude(r, c, &a.check, &a.out)
}

pub fn design_pde(a: DesignPdeArgs) -> Result<Verdict, CliError> {
    let spectrum = resolve_spectrum(&a.spectrum)?;
    let mut r = Report::new("design-pde");
    r.set("modes", spectrum.len());
    r.set("rate", a.rate);
    let (pde, smooth) = if a.smooth {
        let (d, m) = design_pde_exponential_smooth(&spectrum, a.rate, a.budget)?;
        (d, Some(m))
    } else {
        let opts = PdeOptions { common_n: a.common_n, level: a.level, ..Default::default() };
        (design_pde_exponential_with(&spectrum, a.rate, &opts)?, None)
    };
    r.set("low_count", pde.split.low_count);
    r.set("t_r", pde.split.t_r);
    r.set("level", pde.split.level);
    r.set("split_mass", pde.split.mass);
    let high = Spectrum::new(spectrum.frequencies()[pde.split.low_count..].to_vec())?;
    let coercive = verify_coercive_decay(&high, pde.split.level)?;
    r.set("coercive_holds", coercive.holds);
    r.set("coercive_factor", coercive.measured_factor);
    r.set("coercive_identity_residual", coercive.identity_residual);
    describe_design(&mut r, &pde.design);
    if let Some(m) = &smooth {
        describe_smoothing(&mut r, m);
    }
    let c = Check {
        profile: &pde.design.profile,
        spectrum: &spectrum,
        bound: &pde.design.certificate.bound,
        default_periods: 5.0,
        certify: a.certify,
    };
    conclude(r, c, &a.check, &a.out)
}

pub fn design_ultra(a: DesignUltraArgs) -> Result<Verdict, CliError> {
    let spectrum = resolve_spectrum(&a.spectrum)?;
    let mut r = Report::new("design-ultra");
    r.set("modes", spectrum.len());
    let design = design_pde_ultra(&spectrum, &UltraOptions { max_blocks: a.max_blocks, ..Default::default() })?;
    r.set("blocks", design.blocks.len());
    r.set("certified_until", design.horizon());
    r.list("block_n", design.blocks.iter().map(|b| b.n));
    r.list("block_rate", design.blocks.iter().map(|b| b.rate));
    r.list("block_start", design.blocks.iter().map(|b| b.start));
    r.list("u_n", design.table.rows.iter().map(|row| row.u));
    r.set("segments", design.profile.segments().len());
    describe_bound(&mut r, &design.certificate.bound);
    let c = Check {
        profile: &design.profile,
        spectrum: &spectrum,
        bound: &design.certificate.bound,
        default_periods: 1.0,
        certify: a.certify,
    };
    conclude(r, c, &a.check, &a.out)
}

pub fn design_lip(a: DesignLipArgs) -> Result<Verdict, CliError> {
    let mut r = Report::new("design-lip");
    r.set("lambda", a.lambda);
    r.set("rate", a.rate);
    r.set("epsilon", a.epsilon);
    let d = design_lipschitz(a.lambda, a.rate, a.epsilon)?;
    r.set("mass", d.mass);
    r.set("t1", d.t1);
    r.set("t2", d.t2);
    r.set("t0", d.t0);
    r.set("t0_bound", d.period_bound());
    r.set("omega", d.omega);
    r.set("alignment_residual", d.alignment_residual);
    r.set("lipschitz_constant", d.profile.lipschitz_constant());
    r.set("min_value", d.profile.min_value());
    r.set("max_value", d.profile.max_value());
    describe_bound(&mut r, &d.certificate.bound);
    let spectrum = Spectrum::single(a.lambda)?;
    let c = Check {
        profile: &d.profile,
        spectrum: &spectrum,
        bound: &d.certificate.bound,
        default_periods: 5.0,
        certify: a.certify,
    };
    conclude(r, c, &a.check, &a.out)
}

pub fn certify(a: CertifyArgs) -> Result<Verdict, CliError> {
    let profile = read_profile(&a.profile)?;
    let spectrum = resolve_spectrum(&a.spectrum)?;
    let bound = match (a.rate, &a.envelope) {
        (Some(rate), None) => DecayBound::exponential(rate, a.offset.unwrap_or(profile.period())),
        (None, Some(path)) => DecayBound::Envelope { envelope: read_envelope(path)?, valid_from: a.valid_from },
        _ => return Err(input("give exactly one of --rate or --envelope")),
    };
    if let DecayBound::Exponential { rate, offset } = bound {
        if !(rate >= 0.0 && rate.is_finite() && offset.is_finite()) {
            return Err(input(format!("--rate must be nonnegative and finite, got {rate}")));
        }
    }
    let mut r = Report::new("certify");
    r.set("modes", spectrum.len());
    r.set("period", profile.period());
    r.set("periodic", profile.is_periodic());
    describe_bound(&mut r, &bound);
    let default_periods = if profile.is_periodic() { 10.0 } else { 1.0 };
    let c = Check { profile: &profile, spectrum: &spectrum, bound: &bound, default_periods, certify: true };
    conclude(r, c, &a.check, &a.out)
}

const LOWER_BOUND_SLACK: f64 = 1e-9;

pub fn lower_bound(a: LowerBoundArgs) -> Result<Verdict, CliError> {
    let profile = resolve_damping(&a.damping)?;
    let spectrum = Spectrum::single(a.lambda)?;
    if a.batch == 0 {
        return Err(input("batch must be at least 1"));
    }
    if let Some(t) = a.times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(input(format!("times must be nonnegative and finite, got {t}")));
    }
    let states = random_states(&spectrum, a.batch, a.seed);
    let mut table = Table::new(&["t", "lower_bound", "min_energy_ratio"]);
    let mut worst = f64::INFINITY;
    for &t in &a.times {
        let bound = energy_lower_bound(&profile, t);
        let mut min_ratio = f64::INFINITY;
        for s in &states {
            let e0 = energy(s[0], a.lambda);
            let end = propagate_profile(s[0], a.lambda, &profile, t)?.last().expect("nonempty trajectory").state;
            min_ratio = min_ratio.min(energy(end, a.lambda) / e0);
        }
        worst = worst.min(min_ratio / bound);
        table.row(&[t.to_string(), bound.to_string(), min_ratio.to_string()]);
    }
    let holds = worst >= 1.0 - LOWER_BOUND_SLACK;
    let mut r = Report::new("lower-bound");
    r.set("lambda", a.lambda);
    r.list("times", &a.times);
    r.set("batch", a.batch);
    r.set("seed", a.seed);
    r.set("min_ratio_to_bound", worst);
    r.set("holds", holds);
    if let Some(p) = &a.out.samples_out {
        write_atomic(p, &table.into_bytes())?;
    }
    if let Some(p) = &a.out.profile_out {
        write_atomic(p, format_profile(&profile).as_bytes())?;
    }
    finish_report(&r, a.out.report_out.as_deref())?;
    Ok(if holds { Verdict::Verified } else { Verdict::Falsified })
}

pub fn slow_solution(a: SlowArgs) -> Result<Verdict, CliError> {
    let profile = resolve_damping(&a.damping)?;
    let last = a.times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t_end = a.to.unwrap_or(1.25 * last + 1.0);
    let sol = construct_slow_solution(a.lambda, &profile, a.from, t_end)?;
    let mut table = Table::new(&["t", "u", "v", "floor", "ratio", "residual"]);
    let mut min_ratio = f64::INFINITY;
    let mut max_residual: f64 = 0.0;
    for &t in &a.times {
        let h = 1e-2f64.min((t - sol.t_start) / 2.5).min((t_end - t) / 2.5);
        if !(h > 0.0) {
            return Err(input(format!("time {t} is outside ({}, {t_end})", sol.t_start)));
        }
        let s = sol.evaluate(t)?;
        let floor = t * (-a.lambda * t).exp();
        let ratio = s.u.abs() / floor;
        let residual = sol.residual(t, h)?;
        min_ratio = min_ratio.min(ratio);
        max_residual = max_residual.max(residual);
        table.row(&[t.to_string(), s.u.to_string(), s.v.to_string(), floor.to_string(), ratio.to_string(), residual.to_string()]);
    }
    let holds = min_ratio >= 1.0 && max_residual <= a.residual_tol;
    let mut r = Report::new("slow-solution");
    r.note("floor is t exp(-lambda t); ratio is |u| / floor");
    r.set("lambda", a.lambda);
    r.set("t_start", sol.t_start);
    r.set("t_end", sol.t_end);
    r.set("scale", sol.scale);
    r.set("nodes", sol.nodes().len());
    r.set("min_ratio", min_ratio);
    r.set("max_residual", max_residual);
    r.set("residual_tol", a.residual_tol);
    r.set("holds", holds);
    if let Some(p) = &a.out.samples_out {
        write_atomic(p, &table.into_bytes())?;
    }
    finish_report(&r, a.out.report_out.as_deref())?;
    Ok(if holds { Verdict::Verified } else { Verdict::Falsified })
}

/// Growth forms of the `T`, `S` and `U` columns for `lambda_n ~ n^p`.
fn claimed_forms(p: f64) -> Vec<(Column, GrowthForm)> {
    let power = |power: f64, log_power: f64| GrowthForm::Power { power, log_power };
    if (p - 1.0).abs() < 1e-12 {
        vec![(Column::T, power(0.0, 1.0)), (Column::S, power(1.0, 1.0)), (Column::U, power(2.0, 1.0))]
    } else if p < 1.0 {
        vec![(Column::T, power(1.0 - p, 0.0)), (Column::S, power(2.0 - p, 0.0)), (Column::U, power(2.0, 0.0))]
    } else {
        vec![(Column::T, GrowthForm::Bounded)]
    }
}

pub fn spectrum_table(a: TableArgs) -> Result<Verdict, CliError> {
    let equation = match a.model {
        Model::Wave => Equation::Wave,
        Model::Beam => Equation::Beam,
    };
    let op = ModelOperator::new(equation, a.dim, a.count);
    let spectrum = model_spectrum(&op)?;
    let table = pde_schedule_table(&spectrum, a.n_max.unwrap_or(a.count))?;
    let mut csv = Table::new(&["n", "lambda", "rate", "T", "S", "U", "ln_phi"]);
    for row in &table.rows {
        csv.row(&[
            row.n.to_string(),
            row.lambda.to_string(),
            row.rate.to_string(),
            row.t.to_string(),
            row.s.to_string(),
            row.u.to_string(),
            row.ln_phi().to_string(),
        ]);
    }
    emit(a.out.as_deref(), csv.into_bytes())?;
    let mut r = Report::new("spectrum-table");
    r.set("model", format!("{:?}", a.model).to_lowercase());
    r.set("dim", a.dim);
    r.set("n0", table.n0);
    r.set("rows", table.rows.len());
    r.set("bookkeeping_holds", table.bookkeeping_holds());
    r.set("monotone", table.is_monotone());
    for (column, form) in claimed_forms(op.growth_exponent()) {
        let g = growth_order_check(&table, column, form);
        let key = column.name();
        r.note(format!("{key}: {}", g.note));
        r.set(&format!("growth_{key}_fitted"), g.fitted_exponent);
        match form {
            GrowthForm::Power { power, log_power } => {
                r.set(&format!("growth_{key}_claimed"), format!("n^{power} log^{log_power}"));
                r.set(&format!("growth_{key}_deviation"), g.deviation);
            }
            GrowthForm::Bounded => r.set(&format!("growth_{key}_claimed"), "bounded"),
        }
        r.set(&format!("growth_{key}_passed"), g.passed);
    }
    if a.out.is_none() {
        let text = r.render();
        if let Some(p) = &a.report_out {
            write_atomic(p, text.as_bytes())?;
        }
        eprint!("{text}");
    } else {
        finish_report(&r, a.report_out.as_deref())?;
    }
    Ok(Verdict::Done)
}

pub fn sweep(a: SweepArgs) -> Result<Verdict, CliError> {
    let configs: Vec<(f64, f64)> = a.lambdas.iter().flat_map(|&l| a.rates.iter().map(move |&r| (l, r))).collect();
    let check = &a.check;
    let results = par::map(exec(check), &configs, |&(lambda, rate)| -> Result<(Design, DecayCertificate), CliError> {
        let d = design_ode_exponential(lambda, rate)?;
        let h = horizon(check, d.profile.period(), 10.0)?;
        let opts = CertifyOptions::new(h, check.batch).with_seed(check.seed).with_exec(Exec::Sequential);
        let c = run_certify(&d.profile, &Spectrum::single(lambda)?, &d.certificate.bound, &opts)?;
        Ok((d, c))
    });
    let mut table =
        Table::new(&["lambda", "rate", "t0", "mass", "n", "measured_margin", "worst_case_margin", "status"]);
    let (mut verified, mut falsified, mut failed) = (0, 0, 0);
    for (&(lambda, rate), res) in configs.iter().zip(&results) {
        let mut row = vec![lambda.to_string(), rate.to_string()];
        match res {
            Ok((d, c)) => {
                let b = &d.blocks[0];
                row.extend([d.t0.to_string(), b.mass.to_string(), b.n.to_string()]);
                row.extend([c.measured_margin.to_string(), c.worst_case_margin.to_string()]);
                row.push(if c.verified { "verified" } else { "falsified" }.to_string());
                if c.verified {
                    verified += 1;
                } else {
                    falsified += 1;
                }
            }
            Err(e) => {
                row.extend(["", "", "", "", ""].map(String::from));
                row.push(format!("error: {e}"));
                failed += 1;
            }
        }
        table.row(&row);
    }
    emit(a.out.as_deref(), table.into_bytes())?;
    let mut r = Report::new("sweep");
    r.set("configurations", configs.len());
    r.set("verified", verified);
    r.set("falsified", falsified);
    r.set("errors", failed);
    let text = r.render();
    if let Some(p) = &a.report_out {
        write_atomic(p, text.as_bytes())?;
    }
    if a.out.is_none() {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
    if failed > 0 {
        Err(input(format!("{failed} configuration(s) could not be designed")))
    } else if falsified > 0 {
        Ok(Verdict::Falsified)
    } else {
        Ok(Verdict::Verified)
    }
}
