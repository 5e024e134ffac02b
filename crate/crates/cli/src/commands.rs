//! Subcommand implementations. Each command validates its whole
//! configuration before any numerics run.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Args;
use serde::Serialize;

use orbit_krein::flow::FlowOptions;
use orbit_krein::io::{document, family_csv, lc_csv, parse_document, svg_curves, trajectory_csv};
use orbit_krein::levi_civita::{lc_lift_orbit, LiftedCurve};
use orbit_krein::monodromy::{sft_euler_characteristic, symmetric_orbit_report, MonodromyReport, ReportOptions};
use orbit_krein::shooting::{
    continue_family, shoot_doubly_symmetric, shoot_symmetric, ContinuationOptions, Family, Orbit, ShootOptions,
    ShootResult, Transition,
};
use orbit_krein::systems::{system_by_name, Branch, Hamiltonian};
use orbit_krein::{classify, real_krein_sign, Error, OrbitClass, RealSL2};

use crate::config::{or_default, parse_floats, parse_pair, required, Formats, RunConfig};
use crate::{Cli, Command, Failure};

pub fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Classify(a) => classify_cmd(&a, &file),
        Command::Shoot(a) => shoot_cmd(&a, &file),
        Command::Family(a) => family_cmd(&a, &file),
        Command::Monodromy(a) => monodromy_cmd(&a, &file),
        Command::Euler(a) => euler_cmd(&a, &file),
        Command::LcLift(a) => lc_lift_cmd(&a, &file),
        Command::Selfcheck(a) => crate::selfcheck::run(&a),
    }
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Entries `a,b,c,d` of `[[a, b], [c, d]]`.
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: String,
    /// Determinant and degenerate-trace tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Flags shared by the commands that integrate orbits.
#[derive(Debug, Clone, Args)]
pub struct OrbitFlags {
    /// `hill` or `langmuir`.
    #[arg(long)]
    pub system: Option<String>,
    /// Chart-coordinate bracket `lo,hi` of the start point.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub bracket: Option<[f64; 2]>,
    /// Root of the free coordinate: `plus`/`minus` (Hill also `direct`/`retro`).
    #[arg(long)]
    pub branch: Option<String>,
    /// Section crossing that closes the arc.
    #[arg(long)]
    pub occurrence: Option<usize>,
    /// Samples per period (multiple of 4).
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// Grid intervals of the bracket scan.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Time limit for reaching the section.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Width of the degenerate trace band.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Comma-separated subset of `json,csv,svg`.
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ShootArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    /// `doubly` or `symmetric`.
    #[arg(long)]
    pub kind: Option<String>,
    /// Involution index for `--kind symmetric`.
    #[arg(long)]
    pub involution: Option<usize>,
    #[command(flatten)]
    pub orbit: OrbitFlags,
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[command(flatten)]
    pub orbit: OrbitFlags,
}

#[derive(Debug, Args)]
pub struct MonodromyArgs {
    /// Orbit document written by `shoot`.
    #[arg(long)]
    pub orbit: PathBuf,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EulerArgs {
    /// Report documents, each optionally suffixed `:cover`.
    #[arg(required = true)]
    pub reports: Vec<String>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LcLiftArgs {
    #[arg(long)]
    pub orbit: PathBuf,
    /// Initial sheet of the square root: `plus` or `minus`.
    #[arg(long)]
    pub branch: Option<String>,
    /// Bound on the base orbit's reflection residual.
    #[arg(long)]
    pub symmetry_tol: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    /// Print residuals next to each verdict.
    #[arg(long)]
    pub verbose: bool,
}

const DEFAULT_TOL: f64 = 1e-9;

fn classify_cmd(a: &ClassifyArgs, file: &RunConfig) -> Result<(), Failure> {
    let tol = or_default(&a.tol, &file.tol, DEFAULT_TOL);
    let v = parse_floats(&a.matrix).map_err(Failure::usage)?;
    let [m11, m12, m21, m22] =
        <[f64; 4]>::try_from(v).map_err(|v| Failure::usage(format!("--matrix needs four entries, got {}", v.len())))?;
    let m = RealSL2::new(m11, m12, m21, m22, tol)?;
    let class = classify(&m, tol);
    match real_krein_sign(&m, tol) {
        Ok(sign) => println!("{class}, B-sign {sign}"),
        Err(Error::NotSlrForm { gap, .. }) => println!("{class}, B-sign undefined (|a - d| = {gap:e})"),
        Err(Error::DegenerateTrace { .. }) => println!("{class}, B-sign undefined (degenerate trace)"),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

/// Fully resolved orbit settings.
struct OrbitSetup {
    system: Box<dyn Hamiltonian>,
    branch: Branch,
    bracket: Option<(f64, f64)>,
    shoot: ShootOptions,
    report: ReportOptions,
    out_dir: PathBuf,
    formats: Formats,
}

impl OrbitSetup {
    fn resolve(f: &OrbitFlags, file: &RunConfig) -> Result<Self, Failure> {
        let name = or_default(&f.system, &file.system, "hill".to_string());
        let system = system_by_name(&name).ok_or_else(|| Failure::usage(format!("unknown system {name:?}")))?;
        let default_branch = if name == "hill" { "retro" } else { "plus" };
        let branch_name = or_default(&f.branch, &file.branch, default_branch.to_string());
        let branch =
            Branch::parse(&branch_name).ok_or_else(|| Failure::usage(format!("unknown branch {branch_name:?}")))?;
        let bracket = f.bracket.or(file.bracket).map(|[lo, hi]| (lo, hi));
        if let Some((lo, hi)) = bracket {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Failure::usage(format!("--bracket needs lo < hi, got {lo},{hi}")));
            }
        }
        let defaults = ShootOptions::default();
        let flow = FlowOptions {
            rtol: or_default(&f.rtol, &file.rtol, defaults.flow.rtol),
            atol: or_default(&f.atol, &file.atol, defaults.flow.atol),
            ..defaults.flow.clone()
        };
        if !(flow.rtol > 0.0 && flow.atol > 0.0) {
            return Err(Failure::usage("--rtol and --atol must be positive"));
        }
        let shoot = ShootOptions {
            flow: flow.clone(),
            occurrence: or_default(&f.occurrence, &file.occurrence, defaults.occurrence),
            grid: or_default(&f.grid, &file.grid, defaults.grid),
            t_max: or_default(&f.t_max, &file.t_max, defaults.t_max),
            samples: or_default(&f.samples, &file.samples, defaults.samples),
            ..defaults
        };
        if shoot.occurrence == 0 || shoot.grid == 0 {
            return Err(Failure::usage("--occurrence and --grid must be at least 1"));
        }
        if shoot.samples < 4 || !shoot.samples.is_multiple_of(4) {
            return Err(Failure::usage(format!("--samples must be a positive multiple of 4, got {}", shoot.samples)));
        }
        let report =
            ReportOptions { flow, trace_tol: or_default(&f.tol, &file.tol, DEFAULT_TOL), ..ReportOptions::default() };
        let formats =
            Formats::parse(&or_default(&f.format, &file.format, vec!["json".into(), "csv".into(), "svg".into()]))?;
        let out_dir = or_default(&f.out_dir, &file.out_dir, PathBuf::from("out"));
        Ok(OrbitSetup { system, branch, bracket, shoot, report, out_dir, formats })
    }

    /// Explicit bracket, else a default that tracks the scaling of the start
    /// point with energy.
    fn bracket_at(&self, energy: f64) -> (f64, f64) {
        self.bracket.unwrap_or_else(|| match self.system.name() {
            "langmuir" => (0.1 / energy.abs(), 3.4 / energy.abs()),
            _ => (0.02, 0.6),
        })
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

/// Run metadata kept apart from the data files so those stay reproducible.
fn write_meta(dir: &Path, command: &str, details: serde_json::Value) -> Result<(), Failure> {
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = serde_json::json!({
        "command": command,
        "generated_unix": unix,
        "version": env!("CARGO_PKG_VERSION"),
        "details": details,
    });
    write(dir, "meta.json", &document("meta", &meta))
}

fn read_orbit(path: &Path) -> Result<Orbit, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    parse_document(&text, "orbit").map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn sign_text(s: Option<orbit_krein::KreinSign>) -> &'static str {
    s.map_or("undefined", |s| s.symbol())
}

fn shoot_cmd(a: &ShootArgs, file: &RunConfig) -> Result<(), Failure> {
    let energy = required(&a.energy, &file.energy, "energy")?;
    if !energy.is_finite() {
        return Err(Failure::usage("--energy must be finite"));
    }
    let setup = OrbitSetup::resolve(&a.orbit, file)?;
    let kind = or_default(&a.kind, &file.kind, "doubly".to_string());
    let involution = or_default(&a.involution, &file.involution, 0);
    let bracket = setup.bracket_at(energy);
    let sys = setup.system.as_ref();
    let shot = match kind.as_str() {
        "doubly" => shoot_doubly_symmetric(sys, energy, bracket, setup.branch, &setup.shoot)?,
        "symmetric" => {
            if involution >= sys.involutions().len() {
                return Err(Failure::usage(format!("{} has no involution {involution}", sys.name())));
            }
            shoot_symmetric(sys, involution, energy, bracket, setup.branch, &setup.shoot)?
        }
        other => return Err(Failure::usage(format!("unknown --kind {other:?} (doubly, symmetric)"))),
    };
    let report = symmetric_orbit_report(sys, &shot.orbit, &setup.report);
    write_orbit_outputs(&setup, &shot, report.as_ref().ok())?;
    let report = report?;
    let o = &shot.orbit;
    println!(
        "{} orbit: energy {}, period {:.12}, start {}, closure {:.2e}",
        o.certificate.label(),
        o.energy,
        o.period,
        o.x0,
        o.residuals.closure
    );
    println!(
        "{}, trace {:.12}, B-signs {} / {}",
        report.classification,
        report.trace,
        sign_text(report.b_sign_0),
        sign_text(report.b_sign_half)
    );
    Ok(())
}

fn write_orbit_outputs(
    setup: &OrbitSetup,
    shot: &ShootResult,
    report: Option<&MonodromyReport>,
) -> Result<(), Failure> {
    let dir = &setup.out_dir;
    let o = &shot.orbit;
    if setup.formats.json {
        write(dir, "orbit.json", &document("orbit", o))?;
        if let Some(r) = report {
            write(dir, "report.json", &document("monodromy-report", r))?;
        }
    }
    if setup.formats.csv {
        write(dir, "trajectory.csv", &trajectory_csv(&o.times, &o.states))?;
    }
    if setup.formats.svg {
        write(dir, "orbit.svg", &svg_curves(&[(&o.id(), &o.configuration_curve())]))?;
    }
    write_meta(
        dir,
        "shoot",
        serde_json::json!({
            "branch": shot.branch,
            "param": shot.param,
            "iterates": shot.iterates.len(),
            "t_half": shot.t_half,
        }),
    )
}

#[derive(Serialize)]
struct FamilyRow<'a> {
    energy: f64,
    param: f64,
    period: f64,
    closure: f64,
    report: &'a MonodromyReport,
}

#[derive(Serialize)]
struct FamilyDocument<'a> {
    system: &'a str,
    members: Vec<FamilyRow<'a>>,
    transitions: &'a [Transition],
    /// Over the nondegenerate members, each counted once.
    chi_sft: i64,
    degenerate_members: Vec<usize>,
    /// Set whenever `chi_sft < 0`: some nondegenerate member must be elliptic.
    stable_orbit_flag: bool,
    elliptic_members: usize,
    no_negative_hyperbolic_doubly_symmetric: bool,
    stalled: Option<String>,
}

/// `chi_sft` of the nondegenerate reports, the degenerate indices, and
/// the stable-orbit flag it implies.
pub fn family_summary(reports: &[&MonodromyReport], tol: f64) -> Result<(i64, Vec<usize>, bool), Error> {
    let degenerate: Vec<usize> =
        reports.iter().enumerate().filter(|(_, r)| r.classification.is_degenerate()).map(|(i, _)| i).collect();
    let entries: Vec<(&MonodromyReport, u32)> =
        reports.iter().filter(|r| !r.classification.is_degenerate()).map(|r| (*r, 1)).collect();
    let chi = sft_euler_characteristic(&entries, tol)?;
    Ok((chi, degenerate, chi < 0))
}

fn family_cmd(a: &FamilyArgs, file: &RunConfig) -> Result<(), Failure> {
    let from = required(&a.from, &file.from, "from")?;
    let to = or_default(&a.to, &file.to, from);
    let step = or_default(&a.step, &file.step, 0.05);
    if !(from.is_finite() && to.is_finite() && step > 0.0 && step.is_finite()) {
        return Err(Failure::usage("--from/--to must be finite and --step positive"));
    }
    let setup = OrbitSetup::resolve(&a.orbit, file)?;
    let sys = setup.system.as_ref();
    let seed = shoot_doubly_symmetric(sys, from, setup.bracket_at(from), setup.branch, &setup.shoot)?;
    let opts = ContinuationOptions { shoot: setup.shoot.clone(), report: setup.report.clone(), ..Default::default() };
    let family = continue_family(sys, &seed, (from, to), step, &opts)?;
    let reports: Vec<&MonodromyReport> = family.members.iter().map(|m| &m.report).collect();
    let (chi, degenerate, flag) = family_summary(&reports, setup.report.trace_tol)?;
    write_family_outputs(&setup, &family, chi, degenerate, flag)?;

    for t in &family.transitions {
        println!("transition {} -> {} at energy {:.10} through {}", t.from, t.to, t.energy, t.through);
    }
    println!(
        "{} members, chi_sft {chi}, stable orbit flag {}, no negative hyperbolic doubly symmetric member: {}",
        family.members.len(),
        flag,
        family.no_negative_doubly_symmetric()
    );
    match family.stalled {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn write_family_outputs(
    setup: &OrbitSetup,
    family: &Family,
    chi: i64,
    degenerate: Vec<usize>,
    flag: bool,
) -> Result<(), Failure> {
    let dir = &setup.out_dir;
    if setup.formats.csv {
        write(dir, "family.csv", &family_csv(family))?;
    }
    if setup.formats.json {
        let doc = FamilyDocument {
            system: setup.system.name(),
            members: family
                .members
                .iter()
                .map(|m| FamilyRow {
                    energy: m.energy,
                    param: m.shot.param,
                    period: m.shot.orbit.period,
                    closure: m.shot.orbit.residuals.closure,
                    report: &m.report,
                })
                .collect(),
            transitions: &family.transitions,
            chi_sft: chi,
            degenerate_members: degenerate,
            stable_orbit_flag: flag,
            elliptic_members: family.members.iter().filter(|m| m.report.classification == OrbitClass::Elliptic).count(),
            no_negative_hyperbolic_doubly_symmetric: family.no_negative_doubly_symmetric(),
            stalled: family.stalled.as_ref().map(|e| e.to_string()),
        };
        write(dir, "family.json", &document("family", &doc))?;
    }
    if setup.formats.svg {
        let labels: Vec<String> = family.members.iter().map(|m| format!("E = {}", m.energy)).collect();
        let curves: Vec<Vec<(f64, f64)>> = family.members.iter().map(|m| m.shot.orbit.configuration_curve()).collect();
        let pairs: Vec<(&str, &[(f64, f64)])> =
            labels.iter().zip(&curves).map(|(l, c)| (l.as_str(), c.as_slice())).collect();
        write(dir, "family.svg", &svg_curves(&pairs))?;
    }
    write_meta(dir, "family", serde_json::json!({ "members": family.members.len() }))
}

fn monodromy_cmd(a: &MonodromyArgs, file: &RunConfig) -> Result<(), Failure> {
    let orbit = read_orbit(&a.orbit)?;
    let system = system_by_name(&orbit.system)
        .ok_or_else(|| Failure::usage(format!("orbit names unknown system {:?}", orbit.system)))?;
    let opts = ReportOptions { trace_tol: or_default(&a.tol, &file.tol, DEFAULT_TOL), ..ReportOptions::default() };
    let report = symmetric_orbit_report(system.as_ref(), &orbit, &opts)?;
    let text = document("monodromy-report", &report);
    match &a.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Splits `path:cover`; a suffix that is not an integer belongs to the path.
fn split_cover(entry: &str) -> (&str, u32) {
    match entry.rsplit_once(':') {
        Some((path, cover)) if !path.is_empty() => match cover.parse::<u32>() {
            Ok(c) => (path, c),
            Err(_) => (entry, 1),
        },
        _ => (entry, 1),
    }
}

fn euler_cmd(a: &EulerArgs, file: &RunConfig) -> Result<(), Failure> {
    let tol = or_default(&a.tol, &file.tol, DEFAULT_TOL);
    let mut reports = Vec::new();
    for entry in &a.reports {
        let (path, cover) = split_cover(entry);
        if cover == 0 {
            return Err(Failure::usage(format!("{entry}: cover must be at least 1")));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {path}: {e}")))?;
        let report: MonodromyReport =
            parse_document(&text, "monodromy-report").map_err(|e| Failure::usage(format!("{path}: {e}")))?;
        reports.push((report, cover));
    }
    let entries: Vec<(&MonodromyReport, u32)> = reports.iter().map(|(r, c)| (r, *c)).collect();
    let chi = sft_euler_characteristic(&entries, tol)?;
    println!("chi_sft {chi}");
    println!("stable orbit flag {}", chi < 0);
    Ok(())
}

fn lc_lift_cmd(a: &LcLiftArgs, file: &RunConfig) -> Result<(), Failure> {
    let branch_name = or_default(&a.branch, &file.branch, "plus".to_string());
    let branch =
        Branch::parse(&branch_name).ok_or_else(|| Failure::usage(format!("unknown branch {branch_name:?}")))?;
    let tol = a.symmetry_tol.unwrap_or(1e-7);
    let formats =
        Formats::parse(&or_default(&a.format, &file.format, vec!["json".into(), "csv".into(), "svg".into()]))?;
    let dir = or_default(&a.out_dir, &file.out_dir, PathBuf::from("out"));
    let orbit = read_orbit(&a.orbit)?;
    let lift = lc_lift_orbit(&orbit, branch, tol)?;
    write_lift_outputs(&dir, formats, &orbit, &lift)?;
    let r = &lift.residuals;
    println!("winding {}, {} lifted samples over period {:.12}", lift.winding, lift.points.len(), lift.period);
    println!(
        "residuals: sigma1 {:.2e}, sigma2 {:.2e}, closure {:.2e}, projection {:.2e}",
        r.sigma1, r.sigma2, r.closure, r.projection
    );
    Ok(())
}

fn write_lift_outputs(dir: &Path, formats: Formats, orbit: &Orbit, lift: &LiftedCurve) -> Result<(), Failure> {
    if formats.json {
        write(dir, "lc_curve.json", &document("lc-curve", lift))?;
    }
    if formats.csv {
        write(dir, "lc_curve.csv", &lc_csv(&lift.times, &lift.states()))?;
    }
    if formats.svg {
        write(
            dir,
            "lc_curve.svg",
            &svg_curves(&[("lifted z", &lift.configuration_curve()), ("base q", &orbit.configuration_curve())]),
        )?;
    }
    write_meta(dir, "lc-lift", serde_json::json!({ "orbit": orbit.id() }))
}
