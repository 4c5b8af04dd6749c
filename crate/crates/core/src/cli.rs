//! Declarative runs behind the command-line subcommands. Each command reads a
//! [`RunConfig`], writes its artifacts into the output directory and returns a
//! [`RunReport`] listing every check with its verdict. Failed checks are data;
//! only invalid input and solver or I/O failures are errors.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::diagnostics::{self, DiagnosticsError, PohozaevReport};
use crate::ground_state::{
    build_ground_state_with, energy_constants, GroundStateError, KirchhoffGroundState, KirchhoffParams, ShootingOptions,
};
use crate::io::{self, IoError};
use crate::perturbed::reduction::FixedPointOptions;
use crate::perturbed::sphere::AngularRule;
use crate::perturbed::{composite_energy, Box3D, EpsilonFrame, NewtonOptions, PerturbedError, PerturbedSetup};
use crate::potential::{Point, PotentialModel};
use crate::spectral::{gradient_pairing, spectral_report, verify_au_identities};

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "KIRCHHOFF_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    GroundState(#[from] GroundStateError),
    #[error(transparent)]
    Perturbed(#[from] PerturbedError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GroundState,
    Spectrum,
    Perturb,
    Pohozaev,
    Expansion,
    Report,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::GroundState,
        Command::Spectrum,
        Command::Perturb,
        Command::Pohozaev,
        Command::Expansion,
        Command::Report,
    ];

    /// Inverse of [`Command::name`].
    pub fn from_name(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::Spectrum => "spectrum",
            Command::Perturb => "perturb",
            Command::Pohozaev => "pohozaev",
            Command::Expansion => "expansion",
            Command::Report => "report",
        }
    }

    fn report_file(&self) -> String {
        format!("{}.json", self.name().replace('-', "_"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub newton: NewtonOptions,
    pub fixed_point: FixedPointOptions,
    /// Maximum-norm level below which two solutions count as identical.
    pub identical: f64,
    pub center_rounds: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            newton: NewtonOptions::default(),
            fixed_point: FixedPointOptions::default(),
            identical: 1e-6,
            center_rounds: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSettings {
    pub max_k: u32,
    pub n_eigs: usize,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self { max_k: 5, n_eigs: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PohozaevSettings {
    pub eps: f64,
    /// Physical ball radius; `None` selects by boundary energy.
    pub d: Option<f64>,
    pub angular_order: usize,
}

impl Default for PohozaevSettings {
    fn default() -> Self {
        Self { eps: 0.1, d: None, angular_order: diagnostics::POHOZAEV_ANGULAR_ORDER }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionSettings {
    pub eps: Vec<f64>,
    pub y: Point,
    pub angular_order: usize,
}

impl Default for ExpansionSettings {
    fn default() -> Self {
        Self { eps: vec![0.2, 0.1, 0.05], y: [0.0; 3], angular_order: 24 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: KirchhoffParams,
    pub potential: PotentialModel,
    pub radial: ShootingOptions,
    pub grid: Box3D,
    /// Strictly decreasing sweep for `perturb`.
    pub eps: Vec<f64>,
    pub tolerances: Tolerances,
    pub spectrum: SpectrumSettings,
    pub pohozaev: PohozaevSettings,
    pub expansion: ExpansionSettings,
    /// Also solve by the reduction at the last sweep point and compare.
    pub agreement: bool,
    /// Write every solved field as a binary file plus a CSV slice.
    pub export_fields: bool,
    /// Worker threads for sweeps; `None` uses all cores.
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: KirchhoffParams { a: 1.0, b: 0.01, p: 3.0 },
            potential: PotentialModel::power_well_with_corrections(2.0, [1.0, 2.0, 3.0], [0.5; 3], [0.1; 3]),
            radial: ShootingOptions::default(),
            grid: Box3D::default(),
            eps: vec![0.2, 0.14, 0.1, 0.07],
            tolerances: Tolerances::default(),
            spectrum: SpectrumSettings::default(),
            pohozaev: PohozaevSettings::default(),
            expansion: ExpansionSettings::default(),
            agreement: true,
            export_fields: false,
            workers: None,
            out_dir: None,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::InvalidConfig(format!("{name} must be positive, got {v}")))
    }
}

fn eps_in_range(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v <= 0.5 {
        Ok(())
    } else {
        Err(CliError::InvalidConfig(format!("{name} must lie in (0, 0.5], got {v}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str, path: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| IoError::Fs { path: path.to_path_buf(), source })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate()?;
        self.potential.validate().map_err(PerturbedError::from)?;
        self.grid.validate()?;
        positive("radial.step", self.radial.step)?;
        positive("radial.r_max", self.radial.r_max)?;
        positive("radial.tol", self.radial.tol)?;
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.newton.tol", t.newton.tol),
            ("tolerances.newton.krylov_tol", t.newton.krylov_tol),
            ("tolerances.newton.min_step", t.newton.min_step),
            ("tolerances.fixed_point.tol", t.fixed_point.tol),
            ("tolerances.fixed_point.krylov_tol", t.fixed_point.krylov_tol),
            ("tolerances.identical", t.identical),
        ] {
            positive(name, v)?;
        }
        for &e in &self.eps {
            eps_in_range("eps", e)?;
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::InvalidConfig("eps must be strictly decreasing".into()));
        }
        eps_in_range("pohozaev.eps", self.pohozaev.eps)?;
        for &e in &self.expansion.eps {
            eps_in_range("expansion.eps", e)?;
        }
        if let Some(d) = self.pohozaev.d {
            positive("pohozaev.d", d)?;
        }
        if self.workers == Some(0) {
            return Err(CliError::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// `--out`, then the environment variable, then the config, then `out`.
    pub fn resolve_out_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        if let Some(p) = cli_out {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(p);
        }
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// Bound the measurement is compared against.
    pub tolerance: f64,
    /// `"<"`, `">"` or `"=="`.
    pub relation: String,
    pub pass: bool,
}

impl Check {
    pub fn below(name: &str, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, relation: "<".into(), pass: measured < tolerance }
    }

    pub fn above(name: &str, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, relation: ">".into(), pass: measured > tolerance }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Self { name: name.into(), measured: ok as u8 as f64, tolerance: 1.0, relation: "==".into(), pass: ok }
    }
}

/// Timing lives in a separate `timing.json`, so reports are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Command,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub results: Value,
    pub artifacts: Vec<String>,
    pub timing_file: String,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

struct Run<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    artifacts: Vec<String>,
    checks: Vec<Check>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, out: &'a Path) -> Self {
        Self { cfg, out, artifacts: Vec::new(), checks: Vec::new() }
    }

    fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        io::write_text(&self.out.join(name), text)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        io::write_json(&self.out.join(name), value)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, command: Command, results: Value, started: Instant) -> Result<RunReport, CliError> {
        let timing = json!({ "command": command.name(), "seconds": started.elapsed().as_secs_f64() });
        io::write_json(&self.out.join("timing.json"), &timing)?;
        let file = command.report_file();
        self.artifacts.push(file.clone());
        let report = RunReport {
            command,
            config: self.cfg.clone(),
            checks: self.checks,
            results,
            artifacts: self.artifacts,
            timing_file: "timing.json".into(),
        };
        io::write_json(&self.out.join(&file), &report)?;
        Ok(report)
    }
}

fn ground_state(cfg: &RunConfig) -> Result<KirchhoffGroundState, CliError> {
    Ok(build_ground_state_with(cfg.params, cfg.radial)?)
}

fn with_pool<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Result<RunReport, CliError> {
    match command {
        Command::GroundState => cmd_ground_state(cfg, out),
        Command::Spectrum => cmd_spectrum(cfg, out),
        Command::Perturb => cmd_perturb(cfg, out),
        Command::Pohozaev => cmd_pohozaev(cfg, out),
        Command::Expansion => cmd_expansion(cfg, out),
        Command::Report => cmd_report(cfg, out),
    }
}

pub fn cmd_ground_state(cfg: &RunConfig, out: &Path) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let mut run = Run::new(cfg, out);
    let gs = ground_state(cfg)?;
    let (a, b, m) = energy_constants(&gs);
    run.text("profile.txt", &io::profile_text(&gs))?;
    run.checks.push(Check::below("self_consistency", gs.self_consistency(), 1e-8));
    run.checks.push(Check::below("nehari", gs.profile.nehari_defect(), 1e-6));
    run.checks.push(Check::below("pohozaev_ratio", gs.profile.pohozaev_defect(), 1e-5));
    let results = json!({
        "c": gs.c,
        "K": gs.k_u,
        "M": gs.m_u,
        "P": gs.p_u,
        "A": a,
        "B": b,
        "m": m,
        "central_value": gs.profile.central_value,
        "splice_radius": gs.profile.splice_radius,
        "residual": gs.residual(),
    });
    run.finish(Command::GroundState, results, started)
}

pub fn cmd_spectrum(cfg: &RunConfig, out: &Path) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let mut run = Run::new(cfg, out);
    let gs = ground_state(cfg)?;
    let s = cfg.spectrum.clone();
    let report = spectral_report(&gs, s.max_k, s.n_eigs);
    let identities = verify_au_identities(&gs);
    let pairing = gradient_pairing(&gs);
    let expected = (gs.c - gs.params.a) / (2.0 * gs.c);
    let kernel_sectors: Vec<u32> = report.sectors.iter().filter(|x| x.near_zero > 0).map(|x| x.k).collect();
    let verdict = if kernel_sectors == [1] && report.kernel_dimension == 3 {
        "k=1 only, multiplicity 3".to_string()
    } else {
        format!("near-zero sectors {:?}, kernel dimension {}", kernel_sectors, report.kernel_dimension)
    };
    run.checks
        .push(Check::holds("kernel_only_k1_multiplicity_3", kernel_sectors == [1] && report.kernel_dimension == 3));
    run.checks.push(Check::above("kernel_cosine", report.kernel_cosine, 0.999));
    run.checks.push(Check::above("k0_smallest_singular_value", report.smallest_singular_value, report.threshold));
    run.checks.push(Check::holds("lambda_min_nondecreasing_in_k", report.monotone_in_k));
    for id in &identities.identities {
        run.checks.push(Check::below(&format!("identity {}", id.name), id.relative, 1e-4));
    }
    run.checks.push(Check::below("gradient_pairing_formula", (pairing - expected).abs(), 1e-5));
    run.checks.push(Check::below("gradient_pairing_below_half", pairing, 0.5));
    let mut csv = String::from("k,lambda_k,multiplicity,index,eigenvalue\n");
    for sec in &report.sectors {
        for (i, l) in sec.eigenvalues.iter().enumerate() {
            csv.push_str(&format!("{},{},{},{},{:.15e}\n", sec.k, sec.lambda_k, sec.multiplicity, i, l));
        }
    }
    run.text("spectrum.csv", &csv)?;
    let results = json!({
        "kernel_verdict": verdict,
        "spectrum": report,
        "identities": identities,
        "gradient_pairing": pairing,
        "gradient_pairing_expected": expected,
    });
    run.finish(Command::Spectrum, results, started)
}

fn perturbed_setup(cfg: &RunConfig) -> Result<PerturbedSetup, CliError> {
    let gs = ground_state(cfg)?;
    Ok(PerturbedSetup::new(gs, cfg.grid, cfg.tolerances.newton)?)
}

fn template(cfg: &RunConfig, eps: f64) -> Result<EpsilonFrame, CliError> {
    Ok(EpsilonFrame::new(eps, cfg.potential.x0, cfg.potential.clone())?)
}

fn pohozaev_all(cfg: &RunConfig, sol: &crate::perturbed::ReducedSolution) -> Result<Vec<PohozaevReport>, CliError> {
    let rule = AngularRule::product(cfg.pohozaev.angular_order);
    (1..=3).map(|i| Ok(diagnostics::pohozaev_check(&cfg.params, sol, cfg.pohozaev.d, i, &rule)?)).collect()
}

fn export_solution(run: &mut Run, tag: &str, sol: &crate::perturbed::ReducedSolution) -> Result<(), CliError> {
    let name = format!("u_{tag}.bin");
    io::write_field(&run.out.join(&name), &sol.field, Some(&sol.frame))?;
    run.artifacts.push(name);
    run.artifacts.push(format!("u_{tag}.hdr"));
    run.text(&format!("u_{tag}_slice.csv"), &io::slice_csv(&sol.field))
}

pub fn cmd_perturb(cfg: &RunConfig, out: &Path) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let mut run = Run::new(cfg, out);
    if cfg.eps.is_empty() {
        return Err(CliError::InvalidConfig("perturb needs at least one eps".into()));
    }
    let setup = perturbed_setup(cfg)?;
    let tpl = template(cfg, cfg.eps[0])?;
    let (trace, sols) =
        with_pool(cfg, || diagnostics::concentration_sweep(&setup, &tpl, &cfg.eps, cfg.tolerances.center_rounds))??;
    run.text("trace.csv", &trace.to_csv())?;

    let mut pohozaev = Vec::new();
    let mut log = setup.log.clone();
    for (eps, sol) in cfg.eps.iter().zip(&sols) {
        let Some(sol) = sol else { continue };
        log.push(format!("eps = {eps}"));
        log.extend(sol.log.iter().cloned());
        match pohozaev_all(cfg, sol) {
            Ok(r) => pohozaev.push(json!({ "eps": eps, "reports": r })),
            Err(e) => pohozaev.push(json!({ "eps": eps, "error": e.to_string() })),
        }
        if cfg.export_fields {
            export_solution(&mut run, &format!("eps{eps}"), sol)?;
        }
    }
    run.json("pohozaev.json", &pohozaev)?;

    let solved = sols.iter().filter(|s| s.is_some()).count();
    run.checks.push(Check::holds("all_eps_solved", solved == cfg.eps.len()));
    let ratios: Vec<f64> = trace.rows.iter().filter_map(|r| r.center_ratio).collect();
    let centered = ratios.iter().copied().fold(0.0, f64::max);
    if centered < 1e-8 {
        run.checks.push(Check::below("center_ratio_vanishes", centered, 1e-8));
    } else if solved >= 2 {
        run.checks.push(Check::holds("center_ratio_strictly_decreasing", trace.center_ratios_strictly_decreasing()));
    }
    if solved >= 2 {
        if let Some(e) = trace.fitted_exponent {
            run.checks.push(Check::above("correction_exponent", e, 3.1 - 1e-12));
        }
    }
    for p in &pohozaev {
        if let Some(reports) = p.get("reports").and_then(|r| r.as_array()) {
            for r in reports {
                let d = r["discrepancy"].as_f64().unwrap_or(f64::NAN);
                run.checks.push(Check::below(&format!("pohozaev eps={} i={}", p["eps"], r["component"]), d, 1e-2));
            }
        }
    }

    let mut agreement = Value::Null;
    if cfg.agreement {
        if let Some((eps, Some(newton))) = cfg.eps.iter().zip(&sols).rev().find(|(_, s)| s.is_some()) {
            let red = setup.reduction_at(&newton.frame, &cfg.tolerances.fixed_point, Some(&newton.correction))?;
            let pb = setup.problem(&newton.frame)?;
            let gap = pb.norm(&newton.field.add_scaled(-1.0, &red.field));
            let disc = setup.discretization_error(&newton.frame)?;
            log.extend(red.log.iter().cloned());
            run.checks.push(Check::below("newton_reduction_agreement", gap, 10.0 * disc));
            agreement = json!({ "eps": eps, "difference": gap, "discretization_error": disc });
        }
    }
    run.text("solver.log", &(log.join("\n") + "\n"))?;
    let results = json!({ "trace": trace, "agreement": agreement });
    run.finish(Command::Perturb, results, started)
}

pub fn cmd_pohozaev(cfg: &RunConfig, out: &Path) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let mut run = Run::new(cfg, out);
    let setup = perturbed_setup(cfg)?;
    let frame = template(cfg, cfg.pohozaev.eps)?;
    let sol = setup.newton_centered(&frame, cfg.tolerances.center_rounds)?;
    let reports = pohozaev_all(cfg, &sol)?;
    for r in &reports {
        run.checks.push(Check::below(&format!("pohozaev i={}", r.component), r.discrepancy, 1e-2));
    }
    if cfg.export_fields {
        export_solution(&mut run, &format!("eps{}", cfg.pohozaev.eps), &sol)?;
    }
    run.text("solver.log", &(sol.log.join("\n") + "\n"))?;
    let results = json!({ "eps": frame.eps, "y": sol.frame.y, "reports": reports });
    run.finish(Command::Pohozaev, results, started)
}

/// Remainder `I_ε(U_{ε,y}) − Aε³ − Bε³(V(y) − V(x₀))` from the continuum
/// quadrature, for `V ≡ 1` and the configured potential.
pub fn cmd_expansion(cfg: &RunConfig, out: &Path) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let mut run = Run::new(cfg, out);
    let gs = ground_state(cfg)?;
    let (a, b, _) = energy_constants(&gs);
    let rule = AngularRule::product(cfg.expansion.angular_order);
    let v0 = cfg.potential.eval(&cfg.potential.x0);
    let vy = cfg.potential.eval(&cfg.expansion.y);
    let mut csv = String::from("eps,energy_constant_v,relative_constant_v,energy,remainder\n");
    let mut worst_const: f64 = 0.0;
    let mut pts = Vec::new();
    let mut rows = Vec::new();
    for &eps in &cfg.expansion.eps {
        let e3 = eps.powi(3);
        let flat = EpsilonFrame::new(eps, cfg.expansion.y, PotentialModel::constant())?;
        let e_flat = composite_energy(&gs, &flat, &rule);
        let rel = (e_flat - a * e3).abs() / (a * e3);
        worst_const = worst_const.max(rel);
        let frame = EpsilonFrame::new(eps, cfg.expansion.y, cfg.potential.clone())?;
        let e = composite_energy(&gs, &frame, &rule);
        let remainder = e - a * e3 - b * e3 * (vy - v0);
        if remainder.abs() > 0.0 {
            pts.push((eps.ln(), remainder.abs().ln()));
        }
        csv.push_str(&format!("{eps},{e_flat:.15e},{rel:.3e},{e:.15e},{remainder:.15e}\n"));
        rows.push(json!({ "eps": eps, "relative_constant_v": rel, "energy": e, "remainder": remainder }));
    }
    run.text("expansion.csv", &csv)?;
    run.checks.push(Check::below("constant_v_relative_error", worst_const, 1e-4));
    let exponent = diagnostics::fit_slope(&pts);
    if let Some(x) = exponent {
        run.checks.push(Check::below("remainder_exponent_minus_5", (x - 5.0).abs(), 0.15));
    }
    let results = json!({ "A": a, "B": b, "rows": rows, "remainder_exponent": exponent });
    run.finish(Command::Expansion, results, started)
}

/// Collects the checks of every report present in the output directory.
pub fn cmd_report(cfg: &RunConfig, out: &Path) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let mut run = Run::new(cfg, out);
    let mut sections = Vec::new();
    let mut md =
        String::from("# Run summary\n\n| command | check | measured | bound | verdict |\n|---|---|---|---|---|\n");
    for cmd in [Command::GroundState, Command::Spectrum, Command::Expansion, Command::Perturb, Command::Pohozaev] {
        let path = out.join(cmd.report_file());
        let Ok(text) = std::fs::read_to_string(&path) else { continue };
        let report: RunReport = serde_json::from_str(&text).map_err(IoError::from)?;
        for c in &report.checks {
            md.push_str(&format!(
                "| {} | {} | {:.4e} | {} {:.4e} | {} |\n",
                cmd.name(),
                c.name,
                c.measured,
                c.relation,
                c.tolerance,
                if c.pass { "PASS" } else { "FAIL" }
            ));
            run.checks.push(Check { name: format!("{}: {}", cmd.name(), c.name), ..c.clone() });
        }
        sections.push(cmd.name());
    }
    run.text("summary.md", &md)?;
    run.finish(Command::Report, json!({ "sections": sections }), started)
}
