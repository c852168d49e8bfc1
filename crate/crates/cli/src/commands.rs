use std::io::Write;
use std::path::Path;

use corrseek::apps::{
    brute_force_ov, gen_ov, gen_parity, read_ov, read_parity, solve_lightbulb, solve_ov,
    solve_parity, write_ov, write_parity, ExampleSource, LightbulbOptions, OvOptions,
    ParityExample, ParityOptions, ParitySource,
};
use corrseek::corrjoin::{
    decide, reduce_monochromatic, search, search_monochromatic, SearchOptions,
};
use corrseek::matmul::GemmConfig;
use corrseek::params::{log_tau_rho, make_parameters};
use corrseek::tradeoff::{default_grid, emit_curves, ExponentModel};
use corrseek::workbench::{
    brute_force_monochromatic, brute_force_pairs, check_cartesian_concentration, gen_lightbulb,
    gen_promise_instance, nearest_feasible_balance, PlantedInstance,
};
use corrseek::{rng, Error, OutlierPair, Overrides, Parameters, Result};
use serde::Serialize;

use crate::io::{create, read_matrix, to_json, with_suffix, write_json, write_matrix};
use crate::{
    Cli, Command, ConcentrationArgs, CurvesArgs, DetectArgs, GenerateKind, LightbulbArgs, OvArgs,
    Panel, ParityArgs, SizeArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Generate { kind } => generate(kind, seed),
        Command::Detect(args) => detect(args, seed, cli.verbose),
        Command::Lightbulb(args) => lightbulb(args, seed, cli.verbose),
        Command::Parity(args) => parity(args, seed, cli.verbose),
        Command::Ov(args) => ov(args, seed),
        Command::Concentration(args) => concentration(args, seed),
        Command::Curves(args) => curves(args),
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

impl SizeArgs {
    fn overrides(&self) -> Result<Overrides> {
        match (self.t, self.p, self.s) {
            (None, None, None) | (Some(_), Some(_), Some(_)) => Ok(Overrides {
                t: self.t,
                p: self.p,
                s: self.s,
                iterations: self.iterations,
            }),
            _ => Err(usage("--t, --p and --s must be given together")),
        }
    }
}

fn print_pairs(pairs: &[OutlierPair]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    for p in pairs {
        writeln!(out, "{} {} {}", p.j1, p.j2, p.ip)?;
    }
    Ok(())
}

fn emit_result<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    match path {
        Some(path) => write_json(path, value),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct ParitySidecar {
    kind: &'static str,
    n: usize,
    k: usize,
    eta: f64,
    d: usize,
    support: Vec<usize>,
    seed: u64,
}

#[derive(Serialize)]
struct OvSidecar {
    kind: &'static str,
    n: usize,
    dprime: usize,
    density: f64,
    orthogonal: bool,
    witness: Option<(usize, usize)>,
    seed: u64,
}

fn report_written(paths: &[&Path]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn planted_files(inst: &PlantedInstance, kind: &str, prefix: &Path, binary: bool) -> Result<()> {
    warn_all(&inst.warnings);
    let json = with_suffix(prefix, ".json");
    if inst.monochromatic {
        let a = with_suffix(prefix, ".pmat");
        write_matrix(&a, &inst.a, binary)?;
        write_json(&json, &inst.sidecar(kind))?;
        report_written(&[&a, &json]);
    } else {
        let (a, b) = (
            with_suffix(prefix, ".a.pmat"),
            with_suffix(prefix, ".b.pmat"),
        );
        write_matrix(&a, &inst.a, binary)?;
        write_matrix(&b, &inst.b, binary)?;
        write_json(&json, &inst.sidecar(kind))?;
        report_written(&[&a, &b, &json]);
    }
    Ok(())
}

fn generate(kind: &GenerateKind, seed: u64) -> Result<()> {
    match kind {
        GenerateKind::Lightbulb { n, d, rho, out } => {
            let inst = gen_lightbulb(*n, *d, *rho, seed)?;
            planted_files(&inst, "lightbulb", &out.out, out.binary)
        }
        GenerateKind::Promise {
            n,
            d,
            rho,
            tau,
            outliers,
            out,
        } => {
            let inst = gen_promise_instance(*n, *d, *rho, *tau, *outliers, seed)?;
            planted_files(&inst, "promise", &out.out, out.binary)
        }
        GenerateKind::Parity { n, k, eta, d, out } => {
            let inst = gen_parity(*n, *k, *eta, *d, seed)?;
            let data = with_suffix(out, ".parity");
            let json = with_suffix(out, ".json");
            let mut w = create(&data)?;
            write_parity(inst.n, &inst.examples, &mut w)?;
            w.flush()?;
            write_json(
                &json,
                &ParitySidecar {
                    kind: "parity",
                    n: inst.n,
                    k: inst.k,
                    eta: inst.eta,
                    d: inst.examples.len(),
                    support: inst.support,
                    seed,
                },
            )?;
            report_written(&[&data, &json]);
            Ok(())
        }
        GenerateKind::Ov {
            n,
            dprime,
            density,
            out,
        } => {
            let inst = gen_ov(*n, *dprime, *density, seed)?;
            let data = with_suffix(out, ".ov");
            let json = with_suffix(out, ".json");
            let mut w = create(&data)?;
            write_ov(&inst, &mut w)?;
            w.flush()?;
            let witness = brute_force_ov(&inst);
            write_json(
                &json,
                &OvSidecar {
                    kind: "ov",
                    n: *n,
                    dprime: *dprime,
                    density: *density,
                    orthogonal: witness.is_some(),
                    witness,
                    seed,
                },
            )?;
            report_written(&[&data, &json]);
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct DetectResult {
    command: &'static str,
    /// `search`, `two_level`, `decision` or `oracle`.
    variant: &'static str,
    monochromatic: bool,
    n_a: usize,
    n_b: usize,
    d: usize,
    seed: u64,
    params: Option<Parameters>,
    marks_per_iteration: Vec<usize>,
    signalled: Option<bool>,
    pairs: Vec<OutlierPair>,
}

fn detect_params(args: &DetectArgs, n: usize, d: usize) -> Result<Parameters> {
    let tau = args
        .tau
        .ok_or_else(|| usage("--tau is required unless --oracle is given"))?;
    let delta = match args.delta {
        Some(v) => v,
        None if args.rho > 0.0 && tau > 0.0 && tau < args.rho && args.rho < 1.0 => {
            (1.0 / (1.0 - log_tau_rho(args.rho, tau))) * (1.0 + 1e-12)
        }
        None => 1.0,
    };
    let mut params = make_parameters(
        n,
        d,
        args.rho,
        tau,
        args.gamma,
        delta,
        &args.sizes.overrides()?,
    )?;
    if let Some(c) = args.sizes.threshold_constant {
        params.threshold_constant = c;
    }
    params.mark_cap = args.mark_cap;
    params.kappa = args.kappa;
    params.validate()?;
    Ok(params)
}

fn detect(args: &DetectArgs, seed: u64, verbose: bool) -> Result<()> {
    let a = read_matrix(&args.a)?;
    let b = args.b.as_deref().map(read_matrix).transpose()?;
    let mono = b.is_none();
    let b_ref = b.as_ref().unwrap_or(&a);
    if a.d() != b_ref.d() {
        return Err(Error::DimensionMismatch {
            left: a.d(),
            right: b_ref.d(),
        });
    }
    let mut result = DetectResult {
        command: "detect",
        variant: "search",
        monochromatic: mono,
        n_a: a.n(),
        n_b: b_ref.n(),
        d: a.d(),
        seed,
        params: None,
        marks_per_iteration: Vec::new(),
        signalled: None,
        pairs: Vec::new(),
    };
    if args.oracle {
        result.variant = "oracle";
        result.pairs = if mono {
            brute_force_monochromatic(&a, args.rho)
        } else {
            brute_force_pairs(&a, b_ref, args.rho)?
        };
        print_pairs(&result.pairs)?;
        return emit_result(args.out.as_deref(), &result);
    }
    let params = detect_params(args, a.n().max(b_ref.n()), a.d())?;
    if verbose {
        eprint!("{}", params.to_config_string());
    }
    let gemm = GemmConfig {
        strassen_cutoff: args.strassen_cutoff,
        ..GemmConfig::default()
    };
    if args.no_list {
        result.variant = "decision";
        let marks = if mono {
            let mut total = vec![0usize; params.iterations];
            for inst in reduce_monochromatic(&a)? {
                let dec = decide(
                    &inst.a,
                    &inst.b,
                    &params,
                    rng::derive(seed, &[inst.bit as u64]),
                    &gemm,
                )?;
                for (t, m) in total.iter_mut().zip(dec.marks_per_iteration) {
                    *t += m;
                }
            }
            total
        } else {
            decide(&a, b_ref, &params, seed, &gemm)?.marks_per_iteration
        };
        let signalled = marks.iter().any(|&m| m > 0);
        println!("{signalled}");
        result.marks_per_iteration = marks;
        result.signalled = Some(signalled);
        result.params = Some(params);
        return emit_result(args.out.as_deref(), &result);
    }
    let mut opts = SearchOptions::default();
    if let Some(kappa) = args.kappa {
        result.variant = "two_level";
        opts = SearchOptions::two_level(kappa);
    }
    opts.gemm = gemm;
    let report = if mono {
        search_monochromatic(&a, &params, seed, &opts)?
    } else {
        search(&a, b_ref, &params, seed, &opts)?
    };
    print_pairs(&report.pairs)?;
    result.pairs = report.pairs;
    result.marks_per_iteration = report.marks_per_iteration;
    result.params = Some(params);
    emit_result(args.out.as_deref(), &result)
}

#[derive(Serialize)]
struct Outcome<T: Serialize> {
    command: &'static str,
    seed: u64,
    #[serde(flatten)]
    outcome: T,
}

fn lightbulb(args: &LightbulbArgs, seed: u64, verbose: bool) -> Result<()> {
    let data = read_matrix(&args.input)?;
    let mut opts = LightbulbOptions {
        epsilon: args.epsilon,
        overrides: args.sizes.overrides()?,
        threshold_constant: args.sizes.threshold_constant,
        cutoff: args.cutoff,
        ..LightbulbOptions::default()
    };
    if let Some(omega) = args.omega {
        opts.omega = omega;
    }
    let outcome = solve_lightbulb(&data, args.rho, &opts, seed)?;
    if verbose {
        warn_all(&outcome.warnings);
    }
    print_pairs(&[outcome.pair])?;
    emit_result(
        args.out.as_deref(),
        &Outcome {
            command: "lightbulb",
            seed,
            outcome,
        },
    )
}

/// Hands out consecutive chunks of a fixed example list.
fn chunked(mut rest: Vec<ParityExample>) -> impl FnMut(usize) -> Result<Vec<ParityExample>> {
    let mut calls = 0;
    move |count| {
        calls += 1;
        if rest.is_empty() {
            return Err(Error::RetriesExhausted {
                rounds: calls,
                reason: "example file exhausted".into(),
            });
        }
        let tail = rest.split_off(count.min(rest.len()));
        Ok(std::mem::replace(&mut rest, tail))
    }
}

fn parity(args: &ParityArgs, seed: u64, verbose: bool) -> Result<()> {
    let (n, examples) = read_parity(crate::io::open(&args.input)?)?;
    let mut opts = ParityOptions {
        epsilon: args.epsilon,
        overrides: args.sizes.overrides()?,
        threshold_constant: args.sizes.threshold_constant,
        retry_cap: args.retry_cap,
        examples_per_round: args.examples_per_round,
        budget: args.budget,
        ..ParityOptions::default()
    };
    if let Some(omega) = args.omega {
        opts.omega = omega;
    }
    let mut source: Option<Box<ExampleSource<'_>>> = match args.more_examples_from.as_deref() {
        None => None,
        Some(from) => match from.strip_prefix("generator:") {
            Some(s) => {
                let gen_seed: u64 = s
                    .parse()
                    .map_err(|_| usage(format!("bad generator seed {s:?}")))?;
                let mut src = ParitySource::new(n, args.k, args.eta, gen_seed)?;
                src.draw(examples.len());
                Some(Box::new(move |count| Ok(src.draw(count))))
            }
            None => {
                let (m, more) = read_parity(crate::io::open(Path::new(from))?)?;
                if m != n {
                    return Err(Error::DimensionMismatch { left: n, right: m });
                }
                Some(Box::new(chunked(more)))
            }
        },
    };
    let outcome = solve_parity(
        &examples,
        source.as_deref_mut(),
        n,
        args.k,
        args.eta,
        &opts,
        seed,
    )?;
    if verbose {
        warn_all(&outcome.warnings);
    }
    let line: Vec<String> = outcome.support.iter().map(|i| i.to_string()).collect();
    println!("{}", line.join(" "));
    emit_result(
        args.out.as_deref(),
        &Outcome {
            command: "parity",
            seed,
            outcome,
        },
    )
}

fn ov(args: &OvArgs, seed: u64) -> Result<()> {
    let inst = read_ov(crate::io::open(&args.input)?)?;
    let mut opts = OvOptions {
        presample: args.presample,
        ..OvOptions::default()
    };
    let overrides = args.sizes.overrides()?;
    if overrides.t.is_some() {
        opts.overrides = overrides;
    } else if let Some(it) = overrides.iterations {
        opts.overrides.iterations = Some(it);
    }
    if let Some(c) = args.sizes.threshold_constant {
        opts.threshold_constant = c;
    }
    let outcome = solve_ov(&inst, &opts, seed)?;
    println!("{}", outcome.orthogonal);
    if let Some((j1, j2)) = outcome.witness {
        println!("{j1} {j2}");
    }
    emit_result(
        args.out.as_deref(),
        &Outcome {
            command: "ov",
            seed,
            outcome,
        },
    )
}

fn concentration(args: &ConcentrationArgs, seed: u64) -> Result<()> {
    let report =
        match check_cartesian_concentration(args.m, args.s, args.xi, args.eta, args.trials, seed) {
            Err(Error::Infeasible(msg)) => {
                let len = (args.m as f64).sqrt().round() as usize;
                return Err(Error::Infeasible(format!(
                    "{msg}; nearest feasible values are xi = {}, eta = {}",
                    nearest_feasible_balance(len, args.xi),
                    nearest_feasible_balance(len, args.eta)
                )));
            }
            r => r?,
        };
    println!("{}", to_json(&report));
    emit_result(args.out.as_deref(), &report)
}

fn curves(args: &CurvesArgs) -> Result<()> {
    if args.points == 0 {
        return Err(usage("--points must be at least 1"));
    }
    let mut panels: Vec<(&str, ExponentModel)> = Vec::new();
    if let (Some(omega), Some(alpha)) = (args.omega, args.alpha) {
        panels.push(("custom", ExponentModel::new(omega, alpha)?));
    } else {
        if args.panel != Some(Panel::Ideal) {
            panels.push(("best_known", ExponentModel::best_known()));
        }
        if args.panel != Some(Panel::BestKnown) {
            panels.push(("ideal", ExponentModel::ideal()));
        }
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let grid = default_grid(args.points);
    for (name, model) in panels {
        warn_all(&model.warnings());
        let path = args.out_dir.join(format!("curves_{name}.csv"));
        let mut w = create(&path)?;
        emit_curves(&model, &grid, &mut w)?;
        w.flush()?;
        println!("{}", path.display());
    }
    Ok(())
}
