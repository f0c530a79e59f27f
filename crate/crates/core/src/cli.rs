//! Batch experiment runner: one subcommand per pipeline, each writing a CSV
//! report. Exit codes: 0 when every checked property holds, 1 on a
//! property violation or a failed computation, 2 on a usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::cone::{lemma_scan, poly_scan, roots_yn, roots_ytilde, trace_condition, INEQUALITY_SLACK};
use crate::doubling::{c1_scale, doubling_ratio, DoublingConfig};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::jacobi::{jacobi_residual_with, qform_verify_with, JacobiOptions, QformOptions};
use crate::potential::{
    harnack_check, interpolation_constants, oscillation_decay, weighted_seminorms, wolff_bound_constant,
    wolff_constant_density, wolff_potential, DensityMeasure,
};
use crate::report::{Cell, ExperimentReport};
use crate::rhs::case;
use crate::solver::{solve_manufactured, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Minimum-eigenvalue and F_ii bounds on sampled cone spectra.
    Lemmas,
    /// Grid scan of the one-variable polynomial q_{delta,theta}.
    Polyscan,
    /// Trace and determinant of the restricted quadratic form.
    Qform,
    /// Newton solve of a manufactured problem.
    Solve,
    /// Almost Jacobi residual of a solved problem (n >= 4).
    Jacobi,
    /// Doubling ratio of the Laplacian and the auxiliary function P.
    Doubling,
    /// Wolff potential of a constant density against its closed form.
    Wolff,
    /// Weighted sup norm, Hölder seminorm and interpolation constants.
    Seminorms,
    /// Harnack-type estimate on a ball around the center.
    Harnack,
    /// Oscillation decay across radii.
    Oscillation,
}

impl Command {
    /// Names accepted by `--set` for this subcommand.
    fn override_keys(self) -> &'static [&'static str] {
        match self {
            Command::Lemmas | Command::Polyscan => &[],
            Command::Qform => &["f_min", "f_max", "fi_scale"],
            Command::Solve => &["radius", "tol", "max_iter"],
            Command::Jacobi => &["radius", "C", "epsilon_scale"],
            Command::Doubling => &["radius", "C", "alpha", "beta", "gamma", "r_inner", "r_outer"],
            Command::Wolff => &["c", "r", "steps"],
            Command::Seminorms => &["radius", "gamma", "R"],
            Command::Harnack => &["radius", "r", "C1", "C2"],
            Command::Oscillation => &["radius", "r"],
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sigma2lab", about = "Numerical experiments for the sigma_2 Hessian equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Dimension.
    #[arg(long, global = true, default_value_t = 4)]
    n: usize,
    /// Nodes per axis (odd, >= 5).
    #[arg(long, global = true, default_value_t = 13)]
    m: usize,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 10_000)]
    samples: usize,
    /// Number of scan points.
    #[arg(long, global = true, default_value_t = 4096)]
    grid: usize,
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Manufactured problem: quadratic, exp, quartic, cubic, sin or coupled.
    #[arg(long, global = true, default_value = "exp")]
    case: String,
    /// Numeric override `name=value`; may be repeated.
    #[arg(long = "set", global = true, value_name = "NAME=VALUE", value_parser = parse_override)]
    set: Vec<(String, f64)>,
    /// Draw samples that violate the dynamic condition (qform).
    #[arg(long, global = true)]
    falsify: bool,
    /// Read the grid function from a file instead of solving.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Write the solved grid function to a file.
    #[arg(long, global = true)]
    grid_out: Option<PathBuf>,
    /// CSV destination; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

fn parse_override(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let v: f64 = v.parse().map_err(|_| format!("not a number: {v:?}"))?;
    Ok((k.to_string(), v))
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub samples: usize,
    pub grid: usize,
    pub theta: Option<f64>,
    pub case: String,
    pub overrides: BTreeMap<String, f64>,
    pub falsify: bool,
    pub input: Option<PathBuf>,
    pub grid_out: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Parses command-line arguments; `argv[0]` is the program name.
    pub fn parse_from<I, T>(argv: I) -> std::result::Result<Self, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        let cli = Cli::try_parse_from(argv)?;
        let allowed = cli.command.override_keys();
        let mut overrides = BTreeMap::new();
        for (k, v) in cli.set {
            if !allowed.contains(&k.as_str()) {
                let mut cmd = <Cli as clap::CommandFactory>::command();
                return Err(cmd.error(
                    ErrorKind::InvalidValue,
                    format!("unknown override {k:?}; this subcommand accepts {allowed:?}"),
                ));
            }
            overrides.insert(k, v);
        }
        Ok(RunConfig {
            command: cli.command,
            n: cli.n,
            m: cli.m,
            seed: cli.seed,
            samples: cli.samples,
            grid: cli.grid,
            theta: cli.theta,
            case: cli.case,
            overrides,
            falsify: cli.falsify,
            input: cli.input,
            grid_out: cli.grid_out,
            out: cli.out,
        })
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.overrides.get(key).copied().unwrap_or(default)
    }
}

/// Result of a pipeline: the report and whether every checked property
/// held.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub ok: bool,
}

/// Parses `argv`, runs the pipeline and writes the CSV. Returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::parse_from(argv) {
        Ok(cfg) => cfg,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cfg).and_then(|outcome| write_report(&cfg, &outcome.report).map(|_| outcome)) {
        Ok(outcome) => {
            if outcome.ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parameter(_) | Error::UnsupportedDimension(_) | Error::Configuration(_) => 2,
                _ => 1,
            }
        }
    }
}

fn write_report(cfg: &RunConfig, report: &ExperimentReport) -> Result<()> {
    let csv = report.to_csv();
    match &cfg.out {
        Some(path) => std::fs::write(path, csv)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(csv.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Runs the pipeline of `cfg.command`.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    match cfg.command {
        Command::Lemmas => lemmas(cfg),
        Command::Polyscan => polyscan(cfg),
        Command::Qform => qform(cfg),
        Command::Solve => solve(cfg),
        Command::Jacobi => jacobi(cfg),
        Command::Doubling => doubling(cfg),
        Command::Wolff => wolff(cfg),
        Command::Seminorms => seminorms(cfg),
        Command::Harnack => harnack(cfg),
        Command::Oscillation => oscillation(cfg),
    }
}

fn lemmas(cfg: &RunConfig) -> Result<RunOutcome> {
    let s = lemma_scan(cfg.n, cfg.samples, cfg.seed)?;
    Ok(RunOutcome {
        ok: s.violations() == 0,
        report: s.report,
    })
}

fn polyscan(cfg: &RunConfig) -> Result<RunOutcome> {
    let theta = cfg.theta.unwrap_or(0.01);
    let scan = poly_scan(cfg.n, cfg.grid, theta)?;
    let mut r = ExperimentReport::new(["y", "epsilon", "q"]);
    for &(y, e, q) in &scan.samples {
        r.push(vec![y.into(), e.into(), q.into()]);
    }
    r.set("n", cfg.n);
    r.set("theta", theta);
    r.set("points", cfg.grid);
    r.set("min_q", scan.min_value);
    r.set("argmin_y", scan.argmin);
    if cfg.n >= 5 {
        let (lo, hi) = roots_yn(cfg.n)?;
        r.set("y_minus", lo);
        r.set("y_plus", hi);
    } else {
        let (a, b) = roots_yn(4)?;
        let (c, d) = roots_ytilde(4)?;
        r.set("y_roots", format!("({a};{b})"));
        r.set("ytilde_roots", format!("({c};{d})"));
    }
    let delta_ok = scan.samples.iter().all(|&(_, e, _)| trace_condition(cfg.n, 1.0 + e, theta));
    r.set("trace_condition", delta_ok);
    Ok(RunOutcome {
        ok: scan.min_value >= -INEQUALITY_SLACK,
        report: r,
    })
}

fn qform(cfg: &RunConfig) -> Result<RunOutcome> {
    let defaults = QformOptions::default();
    let opts = QformOptions {
        f_range: (cfg.get("f_min", defaults.f_range.0), cfg.get("f_max", defaults.f_range.1)),
        theta: cfg.theta,
        violate_dynamic: cfg.falsify,
        fi_scale: cfg.get("fi_scale", defaults.fi_scale),
    };
    let s = qform_verify_with(cfg.n, cfg.samples, cfg.seed, &opts)?;
    Ok(RunOutcome {
        ok: s.violations() == 0,
        report: s.report,
    })
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    let d = SolveOptions::default();
    SolveOptions {
        tol: cfg.overrides.get("tol").copied(),
        max_iter: cfg.get("max_iter", d.max_iter as f64) as usize,
        ..d
    }
}

/// The grid function a measurement runs on: read from `--input`, or the
/// Newton solution of `--case` on the cube of half-side `radius`.
fn solution(cfg: &RunConfig, default_radius: f64) -> Result<GridFunction> {
    if let Some(path) = &cfg.input {
        return GridFunction::read_file(path);
    }
    let c = case(&cfg.case, cfg.n)?;
    let run = solve_manufactured(&c.rhs, &c.solution, cfg.m, cfg.get("radius", default_radius), &solve_options(cfg))?;
    if let Some(path) = &cfg.grid_out {
        run.outcome.u.write_file(path)?;
    }
    Ok(run.outcome.u)
}

fn solve(cfg: &RunConfig) -> Result<RunOutcome> {
    let c = case(&cfg.case, cfg.n)?;
    let run = solve_manufactured(&c.rhs, &c.solution, cfg.m, cfg.get("radius", 1.0), &solve_options(cfg))?;
    let out = &run.outcome;
    if let Some(path) = &cfg.grid_out {
        out.u.write_file(path)?;
    }
    let mut r = ExperimentReport::new(["iteration", "residual", "damping"]);
    for (k, res) in out.residual_history.iter().enumerate() {
        let damping = match k {
            0 => Cell::Text(String::new()),
            _ => out.damping_history[k - 1].into(),
        };
        r.push(vec![k.into(), (*res).into(), damping]);
    }
    r.set("case", cfg.case.as_str());
    r.set("n", cfg.n);
    r.set("m", cfg.m);
    r.set("h", out.u.h());
    r.set("iterations", out.iterations);
    r.set("final_residual", out.final_residual);
    r.set("tol", out.tol);
    r.set("max_error", run.max_error);
    r.set("admissible", out.admissible);
    Ok(RunOutcome {
        ok: out.admissible && out.final_residual <= out.tol,
        report: r,
    })
}

fn jacobi(cfg: &RunConfig) -> Result<RunOutcome> {
    if cfg.n < 4 {
        return Err(Error::UnsupportedDimension(cfg.n));
    }
    let c = case(&cfg.case, cfg.n)?;
    let u = solution(cfg, 1.0)?;
    let opts = JacobiOptions {
        constant: cfg.overrides.get("C").copied(),
        epsilon_scale: cfg.get("epsilon_scale", 1.0),
    };
    let jr = jacobi_residual_with(&u, &c.rhs, &opts)?;
    let mut r = jr.to_report(&u);
    r.set("case", cfg.case.as_str());
    r.set("m", cfg.m);
    Ok(RunOutcome {
        ok: jr.min_residual >= 0.0,
        report: r,
    })
}

fn doubling(cfg: &RunConfig) -> Result<RunOutcome> {
    let u = solution(cfg, 2.0)?;
    let cap = c1_scale(&u);
    let c = cfg.get("C", 1.0);
    let base = DoublingConfig::defaults(u.n(), cap, c)?;
    let dc = if ["alpha", "beta", "gamma", "r_inner", "r_outer"]
        .iter()
        .any(|k| cfg.overrides.contains_key(*k))
    {
        DoublingConfig::custom(
            cfg.get("alpha", base.alpha),
            cfg.get("beta", base.beta),
            cfg.get("gamma", base.gamma),
            cfg.get("r_inner", base.r_inner),
            cfg.get("r_outer", base.r_outer),
            c,
        )?
    } else {
        base
    };
    let checks = dc.constraints(u.n(), cap)?;
    let rep = doubling_ratio(&u, &dc)?;
    let mut r = rep.to_report();
    for ch in &checks {
        r.push(vec![format!("constraint {}", ch.name).into(), (ch.lhs - ch.rhs).into()]);
    }
    let constraints_hold = checks.iter().all(|ch| ch.holds);
    r.set("constraints_hold", constraints_hold);
    r.set("alpha", dc.alpha);
    r.set("beta", dc.beta);
    r.set("gamma", dc.gamma);
    Ok(RunOutcome {
        ok: constraints_hold && rep.ratio.is_finite() && rep.ratio.ln() <= rep.log_bound,
        report: r,
    })
}

fn wolff(cfg: &RunConfig) -> Result<RunOutcome> {
    let n = cfg.n;
    let c = cfg.get("c", 1.0);
    let r_max = cfg.get("r", 1.0);
    let steps = cfg.get("steps", 200_000.0) as usize;
    let mu = DensityMeasure::constant(n, c)?;
    let mut r = ExperimentReport::new(["r", "W", "closed_form", "rel_error", "bound_4r"]);
    let mut max_rel = 0.0f64;
    let mut monotone = true;
    let mut within_bound = true;
    let mut last = 0.0;
    for k in 1..=10 {
        let t = r_max * k as f64 / 10.0;
        let w = wolff_potential(&mu, &vec![0.0; n], t, steps)?;
        let exact = wolff_constant_density(n, c, t);
        let rel = if exact > 0.0 { ((w - exact) / exact).abs() } else { w.abs() };
        // W(x, t) <= C(n) |f|^(1/2) (t/4)^2.
        let bound = wolff_bound_constant(n) * c.sqrt() * (t / 4.0).powi(2);
        max_rel = max_rel.max(rel);
        monotone &= w >= last * (1.0 - 1e-10);
        within_bound &= w <= bound * (1.0 + 1e-10);
        last = w;
        r.push(vec![t.into(), w.into(), exact.into(), rel.into(), bound.into()]);
    }
    r.set("n", n);
    r.set("c", c);
    r.set("steps", steps);
    r.set("max_rel_error", max_rel);
    r.set("monotone", monotone);
    r.set("within_bound", within_bound);
    Ok(RunOutcome {
        ok: max_rel <= 1e-8 && monotone && within_bound,
        report: r,
    })
}

fn seminorms(cfg: &RunConfig) -> Result<RunOutcome> {
    let u = solution(cfg, 1.0)?;
    let gamma = cfg.get("gamma", 0.5);
    let big_r = cfg.get("R", u.half_side());
    let rep = weighted_seminorms(&u, gamma, big_r)?;
    let eps = [0.01, 0.1, 1.0];
    let (per, fitted) = interpolation_constants(&rep, u.n(), &eps);
    let mut r = ExperimentReport::new(["eps", "weighted_sup", "holder_term", "C_eps"]);
    for (e, ce) in eps.iter().zip(&per) {
        r.push(vec![(*e).into(), rep.weighted_sup.into(), (e.powf(gamma) * rep.weighted_holder).into(), (*ce).into()]);
    }
    r.set("gamma", gamma);
    r.set("R", big_r);
    r.set("nodes", rep.nodes);
    r.set("pairs", rep.pairs);
    match rep.seed {
        Some(s) => r.set("pair_seed", s),
        None => r.set("pair_seed", "all"),
    }
    r.set("weighted_sup", rep.weighted_sup);
    r.set("weighted_holder", rep.weighted_holder);
    r.set("integral_abs", rep.integral_abs);
    r.set("C_interpolation", fitted);
    r.set("C_holder", rep.holder_constant(u.n()));
    Ok(RunOutcome {
        ok: fitted.is_finite(),
        report: r,
    })
}

/// `max sigma_2(D^2_h u)` over the nodes of depth >= 1.
fn hessian_density_sup(u: &GridFunction) -> f64 {
    (0..u.len())
        .filter(|&p| u.depth(p) >= 1)
        .map(|p| u.hessian(p).sigma2())
        .fold(0.0, f64::max)
}

fn harnack(cfg: &RunConfig) -> Result<RunOutcome> {
    let u = solution(cfg, 1.0)?;
    let f_sup = hessian_density_sup(&u);
    let r = cfg.get("r", 0.09 * u.half_side());
    let c1 = cfg.get("C1", 1.0);
    let c2 = cfg.get("C2", wolff_bound_constant(u.n()) * f_sup.sqrt());
    let rep = harnack_check(&u, f_sup, r, c1, c2)?;
    let mut report = rep.to_report();
    report.set("f_sup", f_sup);
    Ok(RunOutcome {
        ok: rep.holds,
        report,
    })
}

fn oscillation(cfg: &RunConfig) -> Result<RunOutcome> {
    let u = solution(cfg, 1.0)?;
    let r_max = cfg.get("r", u.half_side() / 10.0);
    let radii = [0.25 * r_max, 0.5 * r_max, r_max];
    let rep = oscillation_decay(&u, &u.center(), &radii)?;
    let ok = rep.theta < 1.0 && rep.rows.iter().all(|row| row.satisfied);
    Ok(RunOutcome {
        ok,
        report: rep.to_report(),
    })
}
