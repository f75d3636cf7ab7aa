//! Command-line driver. Every subcommand produces a `Report`; failed checks
//! exit 1, usage and input errors exit 2.

use crate::acceptance::{run_acceptance, suite_names, AcceptOptions};
use crate::epistemic::{fr_build_kb, fr_probability_checks, fr_run, KnowledgeBase, TrustMode, FR_MAX_DEPTH};
use crate::fvlab::scenario::{parse_scenario, DEFAULT_COMPOSE, DEFAULT_NOSIGNAL};
use crate::fvlab::fv_checks;
use crate::hardylab::{coincidence_probability, hardy_checks, lhv_search, run_scenario, run_scenario_float, ApparatusConfig, Stage};
use crate::hepplab::{bell_witness, evolve_chain, hepp_checks, reduced_coherence, truncation_check, ChainState};
use crate::kslab::{
    color_search, dim2_two_valued_measure, gleason_checks, load_rays, parse_ray_text, random_dim2_grid, validate_rays, GreechieStructure,
    Ray, KS117_TEXT,
};
use crate::numkernel::{Operator, TolerancePolicy, C64};
use crate::presheaf::{global_section_search, presheaf_checks, ray_families, ray_poset, valuation_section_roundtrip};
use crate::qlattice::lattice_checks;
use crate::report::{CheckReport, Report, Status, Value};
use crate::waylab::{fiduciary_checks, fiduciary_unitary, ozawa_checks, parse_manifest, verify_fiduciary, write_manifest};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "qfound", version, about = "Finite-dimensional checks of quantum-foundations constructions")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// equality tolerance for numerical checks
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// seed for every random draw
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// write the JSON report here
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// print only the summary line
    #[arg(long, global = true)]
    pub quiet: bool,
    /// directory searched for ray, scenario and knowledge-base files
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Projector lattice laws
    #[command(subcommand)]
    Qlattice(QlatticeCmd),
    /// Conservation laws and approximate measurement
    #[command(subcommand)]
    Way(WayCmd),
    /// Probe-based measurement
    #[command(subcommand)]
    Fv(FvCmd),
    /// Coleman-Hepp spin chain
    #[command(subcommand)]
    Hepp(HeppCmd),
    /// Kochen-Specker sets and Gleason fits
    #[command(subcommand)]
    Ks(KsCmd),
    /// Hardy's interferometers
    #[command(subcommand)]
    Hardy(HardyCmd),
    /// Frauchiger-Renner reasoning
    #[command(subcommand)]
    Fr(FrCmd),
    /// Contexts, characters and global sections
    #[command(subcommand)]
    Presheaf(PresheafCmd),
    /// Run the acceptance suite: all, or one module
    Accept {
        #[arg(default_value = "all")]
        suite: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum QlatticeCmd {
    /// Orthomodular, modular and distributive laws on random subspaces
    Props {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum WayCmd {
    /// Build a fiduciary apparatus and check it
    Build {
        #[arg(long, default_value_t = 0.4)]
        epsilon: f64,
        /// integer eigenvalues of the system charge L1 (diagonal)
        #[arg(long, default_value = "1,0")]
        charges: String,
        /// measured observable: flip (nearest-neighbour hopping) or random
        #[arg(long, default_value = "flip")]
        observable: String,
        /// write the apparatus manifest here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-verify an apparatus manifest
    Verify {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Noise against the conservation lower bound on random couplings
    Ozawa {
        #[arg(long, default_value_t = 30)]
        cases: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum FvCmd {
    /// Induced observable and instrument properties on random couplings
    Check {
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
    /// Sequential composition of the first two couplings of a scenario
    Compose {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Non-signaling of a scenario
    Nosignal {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum HeppCmd {
    /// Coherence, cross-term and witness survey
    Run,
    /// Witness and coherence along one chain
    Bell {
        #[arg(long, default_value_t = 10)]
        sites: usize,
        /// rotation angle per site, in units of π
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum KsCmd {
    /// Derive orthogonality and contexts from a ray file (the 117 set by default)
    Validate {
        #[arg(long)]
        rays: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        dim: usize,
    },
    /// Exhaustive search for a two-valued coloring
    Color {
        #[arg(long)]
        rays: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// fix a ray value, as id=0 or id=1
        #[arg(long = "pin")]
        pins: Vec<String>,
    },
    /// Recover random density operators from frame-function samples
    Gleason {
        #[arg(long, default_value_t = 20)]
        operators: usize,
        #[arg(long, default_value_t = 50)]
        bases: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
    },
    /// Additive measure on a planar grid, where no Gleason form is forced
    Dim2 {
        /// grid points on the full circle (a multiple of 4)
        #[arg(long, default_value_t = 360)]
        points: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum HardyCmd {
    /// Detector probabilities for one splitter configuration
    Run {
        /// neither, plus, minus or both
        #[arg(long, default_value = "both")]
        config: String,
    },
    /// Search all deterministic outcome assignments
    Lhv,
}

#[derive(Subcommand, Debug)]
pub enum FrCmd {
    /// Derive the agents' knowledge to a contradiction or a fixpoint
    Run {
        /// plain or contextual
        #[arg(long, default_value = "plain")]
        mode: String,
        /// knowledge-base file; the bundled scenario when unset
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long, default_value_t = FR_MAX_DEPTH)]
        depth: usize,
        /// print the proof trace
        #[arg(long)]
        trace: bool,
    },
    /// Outcome probabilities and a halting-time simulation
    Prob {
        #[arg(long, default_value_t = 20_000)]
        trials: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum PresheafCmd {
    /// Global-section search on a ray file, or on every bundled family
    Sections {
        #[arg(long)]
        rays: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        dim: usize,
    },
    /// Coloring ↔ section round trip
    Roundtrip {
        #[arg(long)]
        rays: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        dim: usize,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
}

impl CliError {
    fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Output produced alongside the report: free text shown unless --quiet.
struct Outcome {
    report: Report,
    text: Vec<String>,
}

impl Outcome {
    fn new(command: &str, g: &Global) -> Self {
        Outcome { report: Report::new(command, Some(g.seed)), text: Vec::new() }
    }
}

fn bundled_data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// A path as given, or relative to the data directory.
fn resolve(path: &Path, g: &Global) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    g.data.clone().unwrap_or_else(bundled_data).join(path)
}

fn read(path: &Path, g: &Global) -> Result<String, CliError> {
    let p = resolve(path, g);
    std::fs::read_to_string(&p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
}

fn rays_from(path: &Option<PathBuf>, g: &Global) -> Result<(Vec<Ray>, String), CliError> {
    match path {
        Some(p) => {
            let rays = load_rays(resolve(p, g)).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            Ok((rays, p.display().to_string()))
        }
        None => Ok((parse_ray_text(KS117_TEXT).map_err(CliError::input)?, "ks117.rays (bundled)".into())),
    }
}

fn policy(g: &Global) -> TolerancePolicy {
    TolerancePolicy::with_eq_tol(g.tol)
}

fn parse_charges(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<i64>().map(|v| v as f64).map_err(|_| CliError::Usage(format!("bad charge {t:?}"))))
        .collect()
}

fn flip_observable(d: usize) -> Operator {
    Operator::from_fn(d, |i, j| if i.abs_diff(j) == 1 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

fn run_command(cmd: &Command, g: &Global) -> Result<Outcome, CliError> {
    let pol = policy(g);
    match cmd {
        Command::Qlattice(QlatticeCmd::Props { trials }) => {
            let mut o = Outcome::new("qlattice props", g);
            o.report.param("trials", *trials);
            o.report.absorb("", lattice_checks(g.seed, *trials, &pol).map_err(CliError::input)?);
            Ok(o)
        }
        Command::Way(WayCmd::Build { epsilon, charges, observable, out }) => {
            let mut o = Outcome::new("way build", g);
            o.report.param("epsilon", *epsilon);
            o.report.param("charges", charges.as_str());
            o.report.param("observable", observable.as_str());
            let l1 = Operator::diag(&parse_charges(charges)?);
            let m = match observable.as_str() {
                "flip" => flip_observable(l1.dim()),
                "random" => crate::numkernel::random::random_hermitian(&mut crate::numkernel::random::seeded(g.seed), l1.dim()),
                other => return Err(CliError::Usage(format!("unknown observable {other:?}"))),
            };
            let (app, rep) = fiduciary_checks(&m, &l1, *epsilon, &pol).map_err(CliError::input)?;
            o.report.absorb("", rep);
            if let Some(path) = out {
                std::fs::write(path, write_manifest(&app)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                o.text.push(format!("manifest written to {}", path.display()));
            }
            Ok(o)
        }
        Command::Way(WayCmd::Verify { manifest }) => {
            let mut o = Outcome::new("way verify", g);
            o.report.param("manifest", manifest.display().to_string());
            let app = parse_manifest(&read(manifest, g)?).map_err(CliError::input)?;
            o.report.absorb("", verify_fiduciary(&app, &pol));
            let (u, l) = fiduciary_unitary(&app, &pol).map_err(CliError::input)?;
            o.report.absorb("", {
                let mut r = CheckReport::new();
                r.residual("‖[U, L]‖_max", crate::waylab::commutator_max(&u, &l, &pol), 1e-9);
                r
            });
            Ok(o)
        }
        Command::Way(WayCmd::Ozawa { cases }) => {
            let mut o = Outcome::new("way ozawa", g);
            o.report.param("cases", *cases);
            o.report.absorb("", ozawa_checks(g.seed, *cases, &pol).map_err(CliError::input)?);
            Ok(o)
        }
        Command::Fv(FvCmd::Check { cases }) => {
            let mut o = Outcome::new("fv check", g);
            o.report.param("cases", *cases);
            o.report.absorb("", fv_checks(g.seed, *cases, &pol).map_err(CliError::input)?);
            Ok(o)
        }
        Command::Fv(FvCmd::Compose { scenario }) => {
            let mut o = Outcome::new("fv compose", g);
            let text = scenario_text(scenario, DEFAULT_COMPOSE, g, &mut o)?;
            let s = parse_scenario(&text, &pol).map_err(CliError::input)?;
            o.report.absorb("", s.compose(&pol).map_err(CliError::input)?);
            Ok(o)
        }
        Command::Fv(FvCmd::Nosignal { scenario }) => {
            let mut o = Outcome::new("fv nosignal", g);
            let text = scenario_text(scenario, DEFAULT_NOSIGNAL, g, &mut o)?;
            let s = parse_scenario(&text, &pol).map_err(CliError::input)?;
            let ns = s.nosignal(&pol).map_err(CliError::input)?;
            let mut r = CheckReport::new();
            r.info("with the first probe", ns.with_a);
            r.info("without the first probe", ns.without_a);
            r.residual("signaling gap", ns.gap, g.tol);
            o.report.absorb("", r);
            Ok(o)
        }
        Command::Hepp(HeppCmd::Run) => {
            let mut o = Outcome::new("hepp run", g);
            o.report.absorb("", hepp_checks(g.seed, g.tol).map_err(CliError::input)?);
            Ok(o)
        }
        Command::Hepp(HeppCmd::Bell { sites, theta }) => {
            let mut o = Outcome::new("hepp bell", g);
            o.report.param("sites", *sites);
            o.report.param("theta/pi", *theta);
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let base = ChainState::new(C64::new(h, 0.0), C64::new(h, 0.0), *sites, theta * std::f64::consts::PI).map_err(CliError::input)?;
            let mut r = CheckReport::new();
            let mut mags = Vec::new();
            let mut trunc_ok = true;
            for t in 1..=*sites {
                let s = evolve_chain(&base, t).map_err(CliError::input)?;
                let w = bell_witness(&s).map_err(CliError::input)?.norm();
                mags.push(w);
                for m in 0..t {
                    trunc_ok &= truncation_check(&s, m).map_err(CliError::input)?.holds;
                }
                o.text.push(format!("t = {t:>3}  |witness| = {w:.15}  coherence = {:.3e}", reduced_coherence(&s)));
            }
            let spread = mags.iter().map(|x| (x - 0.5).abs()).fold(0.0, f64::max);
            r.residual("witness magnitude spread around |c₊c₋|", spread, g.tol);
            r.flag("truncated witness obeys the quasilocal bound", trunc_ok);
            o.report.absorb("", r);
            Ok(o)
        }
        Command::Ks(KsCmd::Validate { rays, dim }) => {
            let mut o = Outcome::new("ks validate", g);
            let (rays, name) = rays_from(rays, g)?;
            o.report.param("rays", name);
            let (_, rep) = validate_rays(&rays, *dim);
            o.report.absorb("", rep);
            Ok(o)
        }
        Command::Ks(KsCmd::Color { rays, dim, pins }) => {
            let mut o = Outcome::new("ks color", g);
            let (rays, name) = rays_from(rays, g)?;
            o.report.param("rays", name);
            let mut pinned = BTreeMap::new();
            for p in pins {
                let (id, v) = p.split_once('=').ok_or_else(|| CliError::Usage(format!("pin {p:?} is not id=value")))?;
                let id: u32 = id.parse().map_err(|_| CliError::Usage(format!("bad ray id in {p:?}")))?;
                let v: u8 = v.parse().ok().filter(|v| *v <= 1).ok_or_else(|| CliError::Usage(format!("bad value in {p:?}")))?;
                pinned.insert(id, v);
                o.report.param(format!("pin {id}"), v as usize);
            }
            let (g2, rep) = validate_rays(&rays, *dim);
            o.report.absorb("validation", rep);
            let out = color_search(&g2, &pinned).map_err(CliError::input)?;
            let mut r = CheckReport::new();
            r.info("colorable", out.coloring.is_some());
            r.info("search nodes", out.explored as usize);
            if let Some(c) = &out.coloring {
                r.flag("coloring is valid", c.is_valid(&g2));
                let ones: Vec<String> = g2.rays.iter().zip(&c.values).filter(|(_, v)| **v == 1).map(|(ray, _)| ray.id.to_string()).collect();
                o.text.push(format!("rays valued 1: {}", ones.join(" ")));
            }
            o.report.absorb("", r);
            Ok(o)
        }
        Command::Ks(KsCmd::Gleason { operators, bases, dim }) => {
            let mut o = Outcome::new("ks gleason", g);
            o.report.param("operators", *operators);
            o.report.param("bases", *bases);
            o.report.param("dim", *dim);
            o.report.absorb("", gleason_checks(g.seed, *operators, *bases, *dim, &pol));
            Ok(o)
        }
        Command::Ks(KsCmd::Dim2 { points }) => {
            let mut o = Outcome::new("ks dim2", g);
            if *points == 0 || points % 4 != 0 {
                return Err(CliError::Usage("--points must be a positive multiple of 4".into()));
            }
            o.report.param("points", *points);
            o.report.absorb("", dim2_two_valued_measure(&random_dim2_grid(g.seed, *points)));
            Ok(o)
        }
        Command::Hardy(HardyCmd::Run { config }) => {
            let mut o = Outcome::new("hardy run", g);
            let cfg = ApparatusConfig::parse(config).ok_or_else(|| CliError::Usage(format!("unknown config {config:?}")))?;
            o.report.param("config", cfg.name());
            let exact = run_scenario(cfg);
            let float = run_scenario_float(cfg);
            let mut r = CheckReport::new();
            for (k, label) in Stage::Final.labels().iter().enumerate() {
                let p = exact.probability(k).map_err(CliError::input)?;
                r.info(format!("P({label})"), p);
                o.text.push(format!("{label:>5}  amplitude {:+.6}{:+.6}i", float.amps[k].re, float.amps[k].im));
            }
            let co = coincidence_probability(cfg).map_err(CliError::input)?;
            if cfg == ApparatusConfig::BOTH {
                r.equal("d⁺d⁻ probability", co.exact, num_rational::Ratio::new(1, 16));
                r.close("d⁺d⁻ probability (float)", co.float, 1.0 / 16.0, g.tol);
            } else {
                r.info("d⁺d⁻ probability", co.exact);
            }
            o.report.absorb("", r);
            o.report.absorb("battery", hardy_checks(g.tol));
            Ok(o)
        }
        Command::Hardy(HardyCmd::Lhv) => {
            let mut o = Outcome::new("hardy lhv", g);
            let out = lhv_search();
            for a in &out.feasible {
                o.text.push(format!("C⁺={} C⁻={} D⁺={} D⁻={}", a.c_plus as u8, a.c_minus as u8, a.d_plus as u8, a.d_minus as u8));
            }
            let mut r = CheckReport::new();
            r.info("assignments examined", 16usize);
            r.info("assignments satisfying the constraints", out.feasible.len());
            r.flag("no assignment has D⁺D⁻ = 1", out.contradiction);
            o.report.absorb("", r);
            Ok(o)
        }
        Command::Fr(FrCmd::Run { mode, kb, depth, trace }) => {
            let mut o = Outcome::new("fr run", g);
            let mode = TrustMode::parse(mode).ok_or_else(|| CliError::Usage(format!("unknown mode {mode:?}")))?;
            o.report.param("mode", mode.name());
            o.report.param("depth", *depth);
            let base = match kb {
                Some(p) => {
                    o.report.param("kb", p.display().to_string());
                    KnowledgeBase::parse(&read(p, g)?, mode).map_err(CliError::input)?
                }
                None => fr_build_kb(mode),
            };
            let run = fr_run(&base, *depth).map_err(CliError::input)?;
            let mut r = CheckReport::new();
            r.info("verdict", run.verdict.label());
            r.info("rounds", run.rounds);
            r.info("closure size", run.closure_size);
            r.info("agents holding a contradiction", run.contradicting_agents.join(" "));
            if run.verdict.is_contradiction() {
                r.info("proof trace steps", run.trace.len());
                r.flag("proof trace re-validates", run.trace_check.is_ok());
                for (name, ok) in &run.milestones {
                    r.info(format!("milestone: {name}"), *ok);
                }
            }
            if let Some(b) = &run.blocked_step {
                r.info("first blocked step", format!("{}⇝{} ({})", b.truster, b.trusted, b.reason));
            }
            for (a, b, why) in &run.refused_edges {
                o.text.push(format!("refused {a}⇝{b}: {why}"));
            }
            if *trace {
                o.text.push(run.trace.render());
            }
            o.report.absorb("", r);
            Ok(o)
        }
        Command::Fr(FrCmd::Prob { trials }) => {
            let mut o = Outcome::new("fr prob", g);
            o.report.param("trials", *trials);
            o.report.absorb("", fr_probability_checks(g.seed, *trials, g.tol));
            Ok(o)
        }
        Command::Presheaf(PresheafCmd::Sections { rays, dim }) => {
            let mut o = Outcome::new("presheaf sections", g);
            for (name, st) in families(rays, *dim, g)? {
                let rp = ray_poset(&st, &pol).map_err(CliError::input)?;
                let search = global_section_search(&rp.poset);
                let mut r = CheckReport::new();
                r.info("contexts", rp.poset.len());
                r.info("global section", search.section.is_some());
                r.info("search nodes", search.explored as usize);
                if let Some(s) = &search.section {
                    r.flag("section is consistent", rp.poset.is_section(s));
                }
                o.report.absorb(&name, r);
            }
            Ok(o)
        }
        Command::Presheaf(PresheafCmd::Roundtrip { rays, dim }) => {
            let mut o = Outcome::new("presheaf roundtrip", g);
            if rays.is_none() {
                o.report.absorb("", presheaf_checks(g.seed, &pol).map_err(CliError::input)?);
                return Ok(o);
            }
            for (name, st) in families(rays, *dim, g)? {
                o.report.absorb(&name, valuation_section_roundtrip(&st, &pol).map_err(CliError::input)?);
            }
            Ok(o)
        }
        Command::Accept { suite } => {
            let mut o = Outcome::new(&format!("accept {suite}"), g);
            let opts = AcceptOptions { seed: g.seed, pol, data_dir: Some(g.data.clone().unwrap_or_else(bundled_data)) };
            let results = run_acceptance(suite, &opts)
                .ok_or_else(|| CliError::Usage(format!("unknown suite {suite:?}; expected all or one of {}", suite_names().join(", "))))?;
            for r in results {
                o.text.push(r.line());
                for f in r.checks.failures() {
                    o.text.push(format!("    failed: {} = {} (expected {})", f.name, f.value, f.expected));
                }
                o.report.absorb(&format!("criterion {}", r.criterion.number), r.checks);
            }
            Ok(o)
        }
    }
}

fn scenario_text(path: &Option<PathBuf>, default: &str, g: &Global, o: &mut Outcome) -> Result<String, CliError> {
    match path {
        Some(p) => {
            o.report.param("scenario", p.display().to_string());
            read(p, g)
        }
        None => {
            o.report.param("scenario", "built-in");
            Ok(default.to_string())
        }
    }
}

fn families(rays: &Option<PathBuf>, dim: usize, g: &Global) -> Result<Vec<(String, GreechieStructure)>, CliError> {
    match rays {
        Some(_) => {
            let (rs, name) = rays_from(rays, g)?;
            Ok(vec![(name, crate::kslab::derive_structure(&rs, dim, crate::kslab::ORTHO_TOL))])
        }
        None => ray_families().map_err(CliError::input),
    }
}

fn color_enabled() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stdout().is_terminal()
}

fn status_tag(s: Status, color: bool) -> String {
    let (text, code) = match s {
        Status::Pass => ("pass", "32"),
        Status::Fail => ("FAIL", "31"),
        Status::Warn => ("warn", "33"),
    };
    if color {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn print_outcome(o: &Outcome) {
    let color = color_enabled();
    for line in &o.text {
        println!("{line}");
    }
    for c in &o.report.checks {
        let tol = c.tolerance.map(|t| format!(" (tol {t:e})")).unwrap_or_default();
        let expected = match &c.expected {
            Value::Null => String::new(),
            e => format!(" expected {e}"),
        };
        let tag = if c.status == Status::Pass && c.expected == Value::Null { "info".to_string() } else { status_tag(c.status, color) };
        println!("[{tag}] {}: {}{expected}{tol}", c.name, c.value);
    }
    let failed = o.report.checks.iter().filter(|c| c.status == Status::Fail).count();
    println!("{}: {} checks, {failed} failed, {} ms", o.report.command, o.report.checks.len(), o.report.elapsed_ms);
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    return 0;
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    eprintln!("error: a subcommand is required; run with --help for the list");
                    return 2;
                }
                _ => {}
            }
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("usage error"));
            return 2;
        }
    };
    let g = &cli.global;
    if !(g.tol > 0.0 && g.tol.is_finite()) {
        eprintln!("error: --tol must be a positive number");
        return 2;
    }
    let start = Instant::now();
    let mut outcome = match run_command(&cli.command, g) {
        Ok(o) => o,
        Err(CliError::Usage(m)) | Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            return 2;
        }
    };
    outcome.report.param("tol", g.tol);
    outcome.report.elapsed_ms = start.elapsed().as_millis() as u64;
    if let Some(path) = &g.report {
        if let Err(e) = std::fs::write(path, outcome.report.to_json() + "\n") {
            eprintln!("error: {}: {e}", path.display());
            return 2;
        }
    }
    if !g.quiet {
        print_outcome(&outcome);
    } else {
        for c in outcome.report.checks.iter().filter(|c| c.status == Status::Fail) {
            eprintln!("failed: {} = {}", c.name, c.value);
        }
    }
    if outcome.report.passed() {
        0
    } else {
        1
    }
}
