mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qpcubic::bifurcate::BifurcationError;
use qpcubic::lyapunov::LyapError;
use qpcubic::popmodel::{simulate_with_trajectory, PopError};
use qpcubic::{
    bisect_bifurcation, bisect_transcritical, branch_set, critical_intensity, lyap_bounds, sweep,
    BifurcationReport, BranchError, Numerics,
};
use thiserror::Error;

use config::{BisectKind, BranchName, ExperimentConfig};
use output::{num, opt, Csv};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("bracket error: {0}")]
    Bracket(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Bracket(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<BifurcationError> for CliError {
    fn from(e: BifurcationError) -> Self {
        use BifurcationError as B;
        match e {
            B::SamePredicate { .. } | B::BudgetExceeded { .. } | B::BadBracket(..) => {
                CliError::Bracket(e.to_string())
            }
            B::Field(_) | B::Branch(BranchError::Field(_)) | B::Branch(BranchError::Numerics(_)) => {
                CliError::Config(e.to_string())
            }
            B::Population(PopError::Invalid(_)) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<BranchError> for CliError {
    fn from(e: BranchError) -> Self {
        match e {
            BranchError::Field(_) | BranchError::Numerics(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<LyapError> for CliError {
    fn from(e: LyapError) -> Self {
        match e {
            LyapError::BadWindow { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<PopError> for CliError {
    fn from(e: PopError) -> Self {
        match e {
            PopError::Invalid(_) | PopError::Field(_) => CliError::Config(e.to_string()),
            PopError::Integrate(_) => CliError::Numerical(e.to_string()),
        }
    }
}

/// Bifurcation diagrams of scalar cubic ODEs with quasiperiodic coefficients.
#[derive(Parser, Debug)]
#[command(name = "qpcubic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    config: PathBuf,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t_run: Option<f64>,
    #[arg(long)]
    t_eval: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long)]
    delta_sep: Option<f64>,
    #[arg(long)]
    target_width: Option<f64>,
    /// Worker threads for sweeps (1 = sequential).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report which diagram hypotheses hold.
    Classify(Common),
    /// Branches and exponents over an ε grid, as CSV and SVG.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        /// Number of grid points.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Bisect for a bifurcation value.
    Bisect {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
        #[arg(long)]
        transcritical: bool,
    },
    /// Lyapunov bounds of one branch for a list of windows.
    Lyap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_enum)]
        branch: Option<BranchName>,
        /// `T,tau`; repeatable.
        #[arg(long = "window", value_parser = parse_window)]
        windows: Vec<[f64; 2]>,
    },
    /// Population trajectories from several initial values.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
        /// Repeatable.
        #[arg(long = "x0")]
        x0: Vec<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Critical migration intensity for one initial population.
    Population {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
    },
}

fn parse_window(s: &str) -> Result<[f64; 2], String> {
    let (t, tau) = s.split_once(',').ok_or("expected T,tau")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok([p(t)?, p(tau)?])
}

struct Ctx {
    cfg: ExperimentConfig,
    num: Numerics,
    out: PathBuf,
}

impl Ctx {
    fn new(c: &Common) -> Result<Self, CliError> {
        let cfg = ExperimentConfig::load(&c.config)?;
        let mut num = cfg.numerics.clone();
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut num.h, c.h);
        set(&mut num.t_run, c.t_run);
        set(&mut num.t_eval, c.t_eval);
        set(&mut num.x_max, c.x_max);
        set(&mut num.delta_sep, c.delta_sep);
        set(&mut num.target_width, c.target_width);
        num.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(j) = c.jobs {
            if j == 0 {
                return Err(CliError::Config("--jobs must be positive".into()));
            }
            // fails only if a pool already exists, which cannot happen here
            let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
        }
        std::fs::create_dir_all(&c.out)
            .map_err(|e| CliError::Config(format!("{}: {e}", c.out.display())))?;
        let ctx = Ctx {
            cfg: ExperimentConfig {
                numerics: num.clone(),
                ..cfg
            },
            num,
            out: c.out.clone(),
        };
        // the effective configuration, flags applied
        ctx.write("experiment.toml", &ctx.cfg.to_toml())?;
        Ok(ctx)
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

fn need(v: Option<f64>, what: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing {what} (flag or config)")))
}

fn classify(c: &Common) -> Result<(), CliError> {
    let ctx = Ctx::new(c)?;
    let rc = ctx.build_field()?.classify();
    println!("kind: {}", rc.kind);
    for (name, v) in rc.flags.iter() {
        println!("{name}: {v}");
    }
    println!("c_bounds: [{}, {}]", num(rc.c_bounds.0), num(rc.c_bounds.1));
    println!("b_bounds: [{}, {}]", num(rc.b_bounds.0), num(rc.b_bounds.1));
    println!("a_bounds: [{}, {}]", num(rc.a_bounds.0), num(rc.a_bounds.1));
    println!("s_minus: {}", opt(rc.s_minus));
    println!("s_plus: {}", opt(rc.s_plus));
    println!("b_mean: {}", num(rc.b_mean));
    let freqs: Vec<String> = rc.frequencies.iter().map(|&f| num(f)).collect();
    println!("frequencies: [{}]", freqs.join(", "));
    Ok(())
}

impl Ctx {
    fn build_field(&self) -> Result<qpcubic::CubicField, CliError> {
        self.cfg.build_field()
    }
}

fn scan(c: &Common, from: Option<f64>, to: Option<f64>, steps: Option<usize>) -> Result<(), CliError> {
    let ctx = Ctx::new(c)?;
    let t = &ctx.cfg.scan;
    let from = need(from.or(t.from), "scan start")?;
    let steps = steps.or(t.steps).unwrap_or(1);
    if steps == 0 {
        return Err(CliError::Config("steps must be positive".into()));
    }
    let grid: Vec<f64> = if steps == 1 {
        vec![from]
    } else {
        let to = need(to.or(t.to), "scan end")?;
        (0..steps)
            .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    let field = ctx.build_field()?;
    let rows = sweep(&field, &grid, &ctx.num);
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("ε = {}: {}", num(r.epsilon), r.error.as_deref().unwrap_or(""));
    }
    let csv = ctx.write("scan.csv", &output::scan_csv(&rows))?;
    let svg = ctx.write("scan.svg", &output::scan_svg(&rows))?;
    println!("{} rows, {failed} failed; wrote {} and {}", rows.len(), csv.display(), svg.display());
    if failed * 10 > rows.len() {
        return Err(CliError::Numerical(format!("{failed} of {} rows failed", rows.len())));
    }
    Ok(())
}

fn report_csv(r: &BifurcationReport) -> String {
    let mut csv = Csv::new(&[
        "predicate", "lo", "hi", "midpoint", "width", "value_lo", "iterations", "evaluations",
        "flagged", "rebrackets",
    ]);
    csv.row(&[
        format!("{:?}", r.predicate),
        num(r.bracket.0),
        num(r.bracket.1),
        num(r.midpoint()),
        num(r.width()),
        r.value_lo.to_string(),
        r.iterations.to_string(),
        r.evaluations.to_string(),
        r.flagged.len().to_string(),
        r.rebrackets.to_string(),
    ]);
    csv.finish()
}

fn print_report(r: &BifurcationReport) {
    println!("predicate: {:?}", r.predicate);
    println!("bracket: [{}, {}]", num(r.bracket.0), num(r.bracket.1));
    println!("midpoint: {}", num(r.midpoint()));
    println!("width: {}", num(r.width()));
    println!("iterations: {}, evaluations: {}", r.iterations, r.evaluations);
    println!("flagged midpoints: {}, rebrackets: {}", r.flagged.len(), r.rebrackets);
}

fn bisect(c: &Common, lo: Option<f64>, hi: Option<f64>, transcritical: bool) -> Result<(), CliError> {
    let ctx = Ctx::new(c)?;
    let t = &ctx.cfg.bisect;
    let lo = need(lo.or(t.lo), "bracket lower end")?;
    let hi = need(hi.or(t.hi), "bracket upper end")?;
    let field = ctx.build_field()?;
    let report = if transcritical || t.kind == BisectKind::Transcritical {
        let t_max = t.t_max.unwrap_or(2.0 * ctx.num.t_eval);
        let tau = t.tau.unwrap_or(t_max / 10.0);
        bisect_transcritical(&field, lo, hi, t_max, tau, &ctx.num)?
    } else {
        bisect_bifurcation(&field, lo, hi, &ctx.num)?
    };
    print_report(&report);
    ctx.write("bisect.csv", &report_csv(&report))?;
    Ok(())
}

fn lyap(c: &Common, eps: Option<f64>, branch: Option<BranchName>, windows: Vec<[f64; 2]>) -> Result<(), CliError> {
    let ctx = Ctx::new(c)?;
    let t = &ctx.cfg.lyap;
    let eps = need(eps.or(t.eps), "eps")?;
    let which = branch.or(t.branch).unwrap_or_default();
    let windows = match (windows.is_empty(), t.windows.is_empty()) {
        (false, _) => windows,
        (true, false) => t.windows.clone(),
        (true, true) => vec![[1e3, 1e2], [1e4, 1e3], [1e5, 1e4]],
    };
    let field = ctx.build_field()?;
    let set = match branch_set(&field, eps, &ctx.num) {
        Ok(set) => set,
        Err(BranchError::NotConverged { set, disagreement }) => {
            eprintln!("warning: branches not converged (disagreement {})", num(disagreement));
            *set
        }
        Err(e) => return Err(e.into()),
    };
    let b = match which {
        BranchName::Lower => &set.lower,
        BranchName::Middle => &set.middle,
        BranchName::Upper => &set.upper,
    }
    .as_ref()
    .ok_or_else(|| CliError::Bracket(format!("no {which:?} branch at ε = {eps} (count {})", set.count)))?;
    let mut csv = Csv::new(&["T", "tau", "gamma_l", "gamma_u", "sign", "origin"]);
    for [t_max, tau] in windows {
        let lb = lyap_bounds(&field, eps, b, t_max, tau, &ctx.num)?;
        println!("T = {t_max:e}, tau = {tau:e}: [{}, {}] {:?}", num(lb.gamma_l), num(lb.gamma_u), lb.sign);
        csv.row(&[
            num(t_max),
            num(tau),
            num(lb.gamma_l),
            num(lb.gamma_u),
            format!("{:?}", lb.sign),
            num(lb.origin),
        ]);
    }
    ctx.write("lyap.csv", &csv.finish())?;
    Ok(())
}

fn simulate(c: &Common, eps: Option<f64>, x0: Vec<f64>, horizon: Option<f64>) -> Result<(), CliError> {
    let ctx = Ctx::new(c)?;
    let t = &ctx.cfg.simulate;
    let base = ctx.cfg.scenario()?;
    let eps = eps.or(t.eps).unwrap_or(base.eps);
    let starts = match (x0.is_empty(), t.x0.is_empty()) {
        (false, _) => x0,
        (true, false) => t.x0.clone(),
        (true, true) => vec![base.x0],
    };
    let mut sc = base.with_eps(eps);
    sc.horizon = horizon.or(t.horizon).unwrap_or(sc.horizon);
    let mut table = Csv::new(&["eps", "x0", "outcome", "extinction_time", "attained_branch", "attained_level"]);
    for (i, &x) in starts.iter().enumerate() {
        let (o, traj) = simulate_with_trajectory(&sc.with_x0(x), &ctx.num)?;
        let mut tc = Csv::new(&["t", "x"]);
        for (t, x) in traj.points() {
            tc.row(&[num(t), num(x)]);
        }
        ctx.write(&format!("trajectory_{i}.csv"), &tc.finish())?;
        println!("x0 = {x}: {}", o.label());
        table.row(&[
            num(eps),
            num(x),
            o.label().into(),
            opt(o.extinction_time()),
            format!("{:?}", o.attained_branch).to_lowercase(),
            opt(o.attained_level),
        ]);
    }
    ctx.write("outcomes.csv", &table.finish())?;
    Ok(())
}

fn population(c: &Common, x0: Option<f64>, lo: Option<f64>, hi: Option<f64>) -> Result<(), CliError> {
    let ctx = Ctx::new(c)?;
    let t = &ctx.cfg.population;
    let base = ctx.cfg.scenario()?;
    let sc = base.with_x0(x0.or(t.x0).unwrap_or(base.x0));
    let lo = need(lo.or(t.lo), "bracket lower end")?;
    let hi = need(hi.or(t.hi), "bracket upper end")?;
    let report = critical_intensity(&sc, lo, hi, &ctx.num)?;
    println!("x0: {}", sc.x0);
    print_report(&report);
    ctx.write("population.csv", &report_csv(&report))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Classify(c) => classify(&c),
        Command::Scan { common, from, to, steps } => scan(&common, from, to, steps),
        Command::Bisect { common, lo, hi, transcritical } => bisect(&common, lo, hi, transcritical),
        Command::Lyap { common, eps, branch, windows } => lyap(&common, eps, branch, windows),
        Command::Simulate { common, eps, x0, horizon } => simulate(&common, eps, x0, horizon),
        Command::Population { common, x0, lo, hi } => population(&common, x0, lo, hi),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
