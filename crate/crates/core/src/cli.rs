//! Command-line front end. Every command prints one JSON report (or DOT
//! text) and exits with 0 when all checks pass, 1 when a checked claim
//! fails (the report carries the witness), and 2 on usage or budget errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde_json::{json, Value};

use crate::bmw::{search_involutive, validate, BmwPresentation, SearchFilters};
use crate::complexes::{
    automorphism_count, build_odd, fixator_report, girth, is_superstar_transitive, join, FixMode, FixTarget,
    FlagComplex,
};
use crate::construction::{
    build_scaffolding, check_embedding, check_link, develop_ball, emit_lattice, expected_link, local_action_report,
    product_oracle, run_pipeline, scaffolding_d, small_nontrivial_pair, verify_interlacing, verify_scaffolding,
    InterlacingPair, Scaffolding,
};
use crate::coxeter::{build_ball_capped, RacgPresentation, DEFAULT_VERTEX_CAP};
use crate::geometry::{sphere_stats_csv, verify_normal_paths, KingBall};
use crate::perm::{factorial, Permutation};
use crate::universal::{
    ball_prefix, density_condition_check, letterwise_extension, reference_generators, un_restriction_group,
    verify_product_structure, LocalGroup,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "oddlattice", version, about = "Davis complexes of Odd graphs, universal groups and lattices")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Vertex cap for balls and developments.
    #[arg(long, global = true, default_value_t = DEFAULT_VERTEX_CAP, value_parser = positive)]
    pub budget: usize,
    /// Seed recorded in the report (only randomized suites consume it).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker cap; computations are single-threaded, the value is recorded.
    #[arg(long, global = true, default_value_t = 1, value_parser = positive)]
    pub jobs: usize,
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

fn positive(text: &str) -> Result<usize, String> {
    match text.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(x) => Ok(x),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Odd graph reports: girth, automorphisms, fixators, superstar check.
    #[command(visible_alias = "complexes")]
    Odd(OddArgs),
    /// Davis balls (graph metric) or king balls (ℓ∞ metric).
    Ball(BallArgs),
    /// Sphere classification and normal-path claims.
    Claims(ClaimsArgs),
    /// Restriction groups of the universal group and the density check.
    Universal(UniversalArgs),
    /// Build or verify an n-scaffolding.
    Scaffold(ScaffoldArgs),
    /// Validate or search involutive BMW presentations.
    Bmw(BmwArgs),
    /// Lattice presentations from interlacing pairs.
    Lattice(LatticeArgs),
    /// BMW presentation → scaffolding → pair → lattice, with every check.
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GraphFormat {
    Report,
    Json,
    Dot,
}

#[derive(Args, Debug)]
pub struct OddArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_enum, default_value_t = GraphFormat::Report)]
    pub format: GraphFormat,
    /// Include the four fixator cases (brute force for d ≤ 4, chains otherwise).
    #[arg(long)]
    pub fixators: bool,
    /// Run the superstar checker on O_d, or on Z∗O_d with --join c.
    #[arg(long)]
    pub superstar: bool,
    #[arg(long)]
    pub join: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Metric {
    L1,
    King,
}

#[derive(Args, Debug)]
pub struct GraphSource {
    /// Defining graph O_d.
    #[arg(long, group = "defining_graph")]
    pub d: Option<usize>,
    /// Defining graph with this many isolated vertices (a regular tree).
    #[arg(long, group = "defining_graph")]
    pub free: Option<usize>,
    /// Defining graph from JSON {vertices: [...], edges: [[a, b], ...]} (1-based).
    #[arg(long, group = "defining_graph")]
    pub graph: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BallArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long)]
    pub radius: usize,
    #[arg(long, value_enum, default_value_t = Metric::L1)]
    pub metric: Metric,
    #[arg(long)]
    pub dot: bool,
}

#[derive(Args, Debug)]
pub struct ClaimsArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 3)]
    pub radius: usize,
    /// Also enumerate normal paths by brute force.
    #[arg(long)]
    pub brute_force: bool,
    /// Print the per-sphere statistics as CSV instead of JSON.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args, Debug)]
pub struct UniversalArgs {
    #[arg(long)]
    pub d: usize,
    /// Sphere index of the restriction group U_v^n.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Run the density check on B_2(v) instead.
    #[arg(long)]
    pub density: bool,
}

#[derive(Args, Debug)]
pub struct ScaffoldArgs {
    #[arg(long, required_unless_present = "input")]
    pub n: Option<usize>,
    /// Evaluate the explicit formulas at this d instead of max(n+1, 9).
    #[arg(long)]
    pub d: Option<usize>,
    /// Verify a scaffolding JSON file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Include the E1–E4 report.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Args, Debug)]
pub struct BmwArgs {
    #[command(subcommand)]
    pub action: BmwAction,
}

#[derive(Subcommand, Debug)]
pub enum BmwAction {
    Validate {
        input: PathBuf,
    },
    Search {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        transitive: bool,
        #[arg(long)]
        alternating: bool,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        nodes: Option<u64>,
        #[arg(long)]
        max_corners: Option<usize>,
        /// Emit every corner table rather than one per relabelling class.
        #[arg(long)]
        raw: bool,
        /// Resume token from an earlier report, comma separated.
        #[arg(long)]
        resume: Option<String>,
    },
}

#[derive(Args, Debug)]
pub struct PairSource {
    /// Interlacing pair JSON.
    #[arg(long, group = "pair_source")]
    pub pair: Option<PathBuf>,
    /// Build the pair from this BMW presentation and the explicit scaffolding.
    #[arg(long, group = "pair_source")]
    pub bmw: Option<PathBuf>,
    /// The trivial pair: `--trivial D,C`.
    #[arg(long, group = "pair_source")]
    pub trivial: Option<String>,
    /// The built-in d = 4 example pair.
    #[arg(long, group = "pair_source")]
    pub sample: bool,
}

#[derive(Args, Debug)]
pub struct LatticeArgs {
    #[command(subcommand)]
    pub action: LatticeAction,
}

#[derive(Subcommand, Debug)]
pub enum LatticeAction {
    /// Print the interlacing pair and its D1–D5 report.
    Pair(PairSource),
    /// Print the presentation of Λ.
    Build(PairSource),
    VerifyLink(PairSource),
    Develop {
        #[command(flatten)]
        source: PairSource,
        #[arg(long, default_value_t = 2)]
        radius: usize,
        #[arg(long)]
        dot: bool,
    },
    LocalActions(PairSource),
    /// Check the embedding of the BMW group (requires --bmw).
    Embed(PairSource),
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[arg(long)]
    pub bmw: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

enum Output {
    Report { command: &'static str, passed: bool, body: Value },
    Text(String),
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn graph_from(src: &GraphSource) -> Result<FlagComplex, Failure> {
    if let Some(d) = src.d {
        return Ok(build_odd(d)?.complex().clone());
    }
    if let Some(m) = src.free {
        return Ok(FlagComplex::discrete(m, "z"));
    }
    if let Some(path) = &src.graph {
        let v = read_json(path)?;
        let labels: Vec<String> = v["vertices"]
            .as_array()
            .ok_or_else(|| Failure::Usage("graph JSON needs a vertices array".into()))?
            .iter()
            .map(|x| x.as_str().map(String::from).unwrap_or_else(|| x.to_string()))
            .collect();
        let edges: Vec<[usize; 2]> = serde_json::from_value(v["edges"].clone())?;
        let n = labels.len();
        let mut pairs = Vec::with_capacity(edges.len());
        for [a, b] in edges {
            if a == 0 || b == 0 || a > n || b > n || a == b {
                return Err(Failure::Usage(format!("bad edge [{a}, {b}]")));
            }
            pairs.push((a - 1, b - 1));
        }
        return Ok(FlagComplex::from_edges(labels, &pairs));
    }
    Err(Failure::Usage("give one of --d, --free, --graph".into()))
}

fn pair_from(src: &PairSource) -> Result<(InterlacingPair, Option<(BmwPresentation, Scaffolding)>), Failure> {
    if let Some(path) = &src.pair {
        return Ok((InterlacingPair::from_json(&read_json(path)?)?, None));
    }
    if let Some(path) = &src.bmw {
        let gamma = BmwPresentation::from_json(&read_json(path)?)?;
        let s = build_scaffolding(gamma.n())?;
        let pair = crate::construction::build_interlacing(&gamma, &s)?;
        return Ok((pair, Some((gamma, s))));
    }
    if let Some(spec) = &src.trivial {
        let parts: Vec<usize> = spec
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| Failure::Usage(format!("--trivial expects D,C, got {spec}")))?;
        let [d, c] = parts[..] else {
            return Err(Failure::Usage(format!("--trivial expects D,C, got {spec}")));
        };
        return Ok((InterlacingPair::trivial(d, c)?, None));
    }
    if src.sample {
        return Ok((small_nontrivial_pair(), None));
    }
    Err(Failure::Usage("give one of --pair, --bmw, --trivial, --sample".into()))
}

fn report(command: &'static str, passed: bool, body: Value) -> Result<Output, Failure> {
    Ok(Output::Report { command, passed, body })
}

fn odd(args: &OddArgs) -> Result<Output, Failure> {
    let odd = build_odd(args.d)?;
    match args.format {
        GraphFormat::Json => return Ok(Output::Text(odd.to_json().to_string())),
        GraphFormat::Dot => return Ok(Output::Text(odd.complex().to_dot(&format!("O_{}", args.d)))),
        GraphFormat::Report => {}
    }
    let d = args.d;
    let mut body = json!({
        "d": d,
        "vertices": odd.vertex_count(),
        "edges": odd.complex().edge_count(),
        "girth": girth(odd.complex()),
        "triangle_free": odd.complex().is_triangle_free(),
    });
    let mut passed = true;
    if d <= 4 {
        let count = automorphism_count(odd.complex());
        let expected = factorial(2 * d - 1);
        passed &= BigUint::from(count) == expected;
        body["automorphisms"] = json!({ "brute_force": count.to_string(), "expected": expected.to_string() });
    }
    if args.fixators {
        let a = odd.vertex(0);
        let b = odd.vertex(odd.neighbours(0)[0] as usize);
        let mode = if d <= 4 { FixMode::BruteForce } else { FixMode::Chain };
        let mut rows = Vec::new();
        for t in [FixTarget::Vertex { a }, FixTarget::Edge { a, b }, FixTarget::Star { a }, FixTarget::EdgeStar { a, b }] {
            let r = fixator_report(d, &t, mode)?;
            let ok = r.order == r.predicted_order();
            passed &= ok;
            rows.push(json!({
                "target": t,
                "mode": mode,
                "order": r.order.to_string(),
                "predicted": r.predicted_order().to_string(),
                "passed": ok,
            }));
        }
        body["fixators"] = json!(rows);
    }
    if args.superstar {
        let k = match args.join {
            Some(c) => join(&FlagComplex::discrete(c, "z"), odd.complex()),
            None => odd.complex().clone(),
        };
        let r = is_superstar_transitive(&k)?;
        passed &= r.holds;
        body["superstar"] = serde_json::to_value(&r)?;
    }
    report("odd", passed, body)
}

fn ball(args: &BallArgs, common: &Common) -> Result<Output, Failure> {
    let l = graph_from(&args.source)?;
    let pres = RacgPresentation::from_complex(&l);
    match args.metric {
        Metric::L1 => {
            let b = build_ball_capped(&pres, args.radius, common.budget)?;
            if args.dot {
                return Ok(Output::Text(b.to_dot()));
            }
            let mut body = b.growth_json();
            body["vertices"] = json!(b.vertex_count());
            body["metric"] = json!("l1");
            report("ball", true, body)
        }
        Metric::King => {
            let k = KingBall::build_capped(&pres, args.radius, common.budget)?;
            report(
                "ball",
                true,
                json!({ "metric": "king", "radius": args.radius, "vertices": k.vertex_count(), "sphere_sizes": k.sphere_sizes() }),
            )
        }
    }
}

fn claims(args: &ClaimsArgs, common: &Common) -> Result<Output, Failure> {
    let l = graph_from(&args.source)?;
    let king = KingBall::build_capped(&RacgPresentation::from_complex(&l), args.radius, common.budget)?;
    let mut spheres = Vec::new();
    let mut passed = true;
    for n in 1..=args.radius {
        let s = king.classify_sphere(n)?;
        let r = king.verify_sphere_claims(&s)?;
        passed &= r.passed();
        spheres.push(r);
    }
    if args.csv {
        return Ok(Output::Text(sphere_stats_csv(&spheres)));
    }
    let paths = verify_normal_paths(&king, args.brute_force)?;
    passed &= paths.passed();
    report(
        "claims",
        passed,
        json!({
            "radius": args.radius,
            "vertices": king.vertex_count(),
            "spheres": spheres,
            "normal_paths": paths,
        }),
    )
}

fn universal(args: &UniversalArgs, common: &Common) -> Result<Output, Failure> {
    let odd = build_odd(args.d)?;
    let f = LocalGroup::odd_alternating(&odd);
    let pres = RacgPresentation::from_complex(odd.complex());
    if args.density {
        let king = KingBall::build_capped(&pres, 2, common.budget)?;
        let u = reference_generators(&king, &f)?;
        let good = density_condition_check(&king, &f, &u)?;
        let m = ball_prefix(&king, 2);
        let w: Vec<Permutation> = f
            .generators
            .iter()
            .map(|phi| letterwise_extension(&king, phi).and_then(|g| g.restrict(m)))
            .collect::<Result<_, _>>()?;
        let bad = density_condition_check(&king, &f, &w)?;
        let passed = good.holds && !bad.holds;
        return report("universal", passed, json!({ "d": args.d, "reference": good, "letterwise": bad }));
    }
    let king = KingBall::build_capped(&pres, args.n + 1, common.budget)?;
    let (rg, s) = un_restriction_group(&king, &f, args.n)?;
    let r = verify_product_structure(&king, &f, &rg, &s)?;
    report("universal", r.passed(), json!({ "d": args.d, "product": r }))
}

fn scaffold(args: &ScaffoldArgs) -> Result<Output, Failure> {
    let s = if let Some(path) = &args.input {
        Scaffolding::from_json(&read_json(path)?)?
    } else {
        let n = args.n.expect("required by clap");
        if n == 0 {
            return Err(Failure::Usage("--n must be at least 1".into()));
        }
        Scaffolding::from_formulas(n, args.d.unwrap_or_else(|| scaffolding_d(n)))
    };
    let r = verify_scaffolding(&s);
    let mut body = json!({ "scaffolding": s.to_json() });
    if args.verify || args.input.is_some() || !r.passed() {
        body["verification"] = serde_json::to_value(&r)?;
    }
    report("scaffold", r.passed(), body)
}

fn bmw(args: &BmwArgs) -> Result<Output, Failure> {
    match &args.action {
        BmwAction::Validate { input } => {
            let p = BmwPresentation::from_json(&read_json(input)?)?;
            let r = validate(&p);
            report("bmw", r.valid(), serde_json::to_value(&r)?)
        }
        BmwAction::Search { m, n, transitive, alternating, limit, nodes, max_corners, raw, resume } => {
            let filters = SearchFilters {
                transitive_x: *transitive,
                transitive_a: *transitive,
                alternating_x: *alternating,
                alternating_a: *alternating,
                limit: *limit,
                raw: *raw,
                node_budget: *nodes,
                max_corners: *max_corners,
            };
            let token: Option<Vec<u32>> = resume
                .as_ref()
                .map(|t| t.split(',').filter(|x| !x.is_empty()).map(|x| x.trim().parse::<u32>()).collect())
                .transpose()
                .map_err(|_| Failure::Usage("resume token must be comma separated integers".into()))?;
            let out = search_involutive(*m, *n, &filters, token.as_deref())?;
            report(
                "bmw",
                true,
                json!({
                    "m": m,
                    "n": n,
                    "found": out.presentations.len(),
                    "nodes": out.nodes,
                    "exhausted": out.exhausted,
                    "resume": out.resume.map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
                    "presentations": out.presentations.iter().map(|p| p.to_json()).collect::<Vec<_>>(),
                }),
            )
        }
    }
}

fn lattice(args: &LatticeArgs, common: &Common) -> Result<Output, Failure> {
    match &args.action {
        LatticeAction::Pair(src) => {
            let (pair, _) = pair_from(src)?;
            let r = verify_interlacing(&pair);
            report("lattice", r.passed(), json!({ "pair": pair.to_json(), "verification": r }))
        }
        LatticeAction::Build(src) => {
            let (pair, _) = pair_from(src)?;
            let p = emit_lattice(&pair)?;
            report("lattice", true, p.to_json())
        }
        LatticeAction::VerifyLink(src) => {
            let (pair, _) = pair_from(src)?;
            let p = emit_lattice(&pair)?;
            let r = check_link(&p, &pair);
            report("lattice", r.passed(), serde_json::to_value(&r)?)
        }
        LatticeAction::Develop { source, radius, dot } => {
            let (pair, _) = pair_from(source)?;
            let p = emit_lattice(&pair)?;
            let dev = develop_ball(&p, *radius, common.budget)?;
            if *dot {
                return Ok(Output::Text(dev.to_dot(&p.generators)));
            }
            let counts: Vec<String> = dev.sphere_sizes().iter().map(|x| x.to_string()).collect();
            let oracle: Vec<String> = product_oracle(&pair, *radius)?.iter().map(|x| x.to_string()).collect();
            let links = dev.interior_links(&expected_link(&pair));
            let passed = counts == oracle && dev.conflicts == 0 && links.passed();
            report(
                "lattice",
                passed,
                json!({ "radius": radius, "sphere_sizes": counts, "product_oracle": oracle, "conflicts": dev.conflicts, "interior_links": links }),
            )
        }
        LatticeAction::LocalActions(src) => {
            let (pair, built) = pair_from(src)?;
            let r = local_action_report(&pair, built.as_ref().map(|(_, s)| s))?;
            report("lattice", r.passed(), serde_json::to_value(&r)?)
        }
        LatticeAction::Embed(src) => {
            let (pair, built) = pair_from(src)?;
            let (gamma, s) = built.ok_or_else(|| Failure::Usage("embed needs --bmw".into()))?;
            let r = check_embedding(&gamma, &s, &pair)?;
            report("lattice", r.passed(), serde_json::to_value(&r)?)
        }
    }
}

fn pipeline(args: &PipelineArgs) -> Result<Output, Failure> {
    let gamma = BmwPresentation::from_json(&read_json(&args.bmw)?)?;
    let r = run_pipeline(&gamma)?;
    report("pipeline", r.passed(), serde_json::to_value(&r)?)
}

fn dispatch(cfg: &RunConfig) -> Result<Output, Failure> {
    let c = &cfg.common;
    match &cfg.command {
        Command::Odd(a) => odd(a),
        Command::Ball(a) => ball(a, c),
        Command::Claims(a) => claims(a, c),
        Command::Universal(a) => universal(a, c),
        Command::Scaffold(a) => scaffold(a),
        Command::Bmw(a) => bmw(a),
        Command::Lattice(a) => lattice(a, c),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn emit(text: &str, common: &Common) -> Result<(), Failure> {
    match &common.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            // A closed pipe (e.g. `| head`) is not an error for a report.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            Ok(())
        }
    }
}

/// Parses `argv` (including the program name) and runs one command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(cfg) => cfg,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = dispatch(&cfg).and_then(|out| match out {
        Output::Text(text) => emit(&text, &cfg.common).map(|_| 0),
        Output::Report { command, passed, body } => {
            let envelope = json!({
                "schema": SCHEMA_VERSION,
                "tool": "oddlattice",
                "version": env!("CARGO_PKG_VERSION"),
                "command": command,
                "seed": cfg.common.seed,
                "jobs": cfg.common.jobs,
                "passed": passed,
                "report": body,
            });
            emit(&serde_json::to_string_pretty(&envelope).expect("serializable"), &cfg.common)?;
            Ok(if passed { 0 } else { 1 })
        }
    });
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            if cfg.common.verbose {
                eprintln!("{cfg:?}");
            }
            2
        }
    }
}
