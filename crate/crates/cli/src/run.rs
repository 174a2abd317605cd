use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sqfnlab_core::dyadic::DoublingReport;
use sqfnlab_core::measure::MeasureSpec;
use sqfnlab_core::squarefn::{buckley_ratio, BuckleyReport, Coefficient, DensityHistogram, SquareFunctionProfile};
use sqfnlab_core::tree::{g_l2_norm, haar, product_check, HaarSystem};
use sqfnlab_core::{
    alpha, cz_decompose, delta, domination_check, doubling_constant, dyadic_square_profile, epsilon_for_doubling,
    generate, sample_points, shifted_systems, stopping_forest, tolsa_l2, w1_oracle, w1_supported, carleson_comparison,
    Atom, DyadicInterval, DyadicSystem, Forest, Interval, Measure, StopMode, Tree,
};

use crate::config::{validate, EpsilonMode, ExperimentConfig, Suite, Systems, DEPTH_CAP};
use crate::report::{
    CarlesonStats, Check, Classification, FleetStats, ForestStats, ProfileSummary, Report, Versions,
    SCHEMA,
};
use crate::CliError;

/// Product representation tolerance; the identity multiplies up to 14 factors.
const PRODUCT_TOLERANCE: f64 = 1e-10;
const ORACLE_GRID: usize = 1 << 14;
const ORACLE_TOLERANCE: f64 = 1.0 / 4096.0;
const FOREST_DEPTH_LIMIT: u32 = 12;
const HAAR_TREES: usize = 20;
const HAAR_CELLS: usize = 100;
const CZ_LAMBDAS: [f64; 3] = [2.0, 4.0, 8.0];
/// Partial sums growing by less than this past mid-depth count as converged.
const CONVERGED_GROWTH: f64 = 1e-6;

struct Context {
    cfg: ExperimentConfig,
    mu: Measure,
    nu: Measure,
    depth: u32,
    systems: Vec<DyadicSystem>,
    doubling: DoublingReport,
    forest: Result<Forest, String>,
    tree_bound: Option<f64>,
}

#[derive(Default)]
struct SuiteOutput {
    checks: Vec<Check>,
    warnings: Vec<String>,
    doubling: Option<DoublingReport>,
    forest: Option<ForestStats>,
    carleson: Option<CarlesonStats>,
    profiles: Vec<ProfileSummary>,
    classification: Option<Classification>,
    tables: Vec<SquareFunctionProfile>,
    buckley: Vec<BuckleyReport>,
    fleet: Option<FleetStats>,
}

impl SuiteOutput {
    fn skipped(reason: impl Into<String>) -> Self {
        Self {
            warnings: vec![reason.into()],
            ..Self::default()
        }
    }
}

fn seeded(cfg: &ExperimentConfig, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
    r.set_stream(stream);
    r
}

fn build_forest(cfg: &ExperimentConfig, mu: &Measure, nu: &Measure, depth: u32, d: &DoublingReport) -> Result<Forest, String> {
    let epsilon = match cfg.epsilon {
        EpsilonMode::Explicit { value } => value,
        EpsilonMode::Auto if d.is_finite() => epsilon_for_doubling(d.constant).map_err(|e| e.to_string())?.0,
        EpsilonMode::Auto => return Err("ν is not dyadically doubling, so ε cannot be derived".into()),
    };
    stopping_forest(mu, nu, epsilon, depth.min(FOREST_DEPTH_LIMIT), StopMode::Interval).map_err(|e| e.to_string())
}

/// Runs every selected suite and assembles the report in suite order.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let diagnostics = validate(cfg);
    if !diagnostics.is_ok() {
        return Err(CliError::Usage(diagnostics.errors.join("; ")));
    }
    let mu = generate(&cfg.mu)?;
    let nu = generate(&cfg.nu)?;
    let depth = cfg.analysis_depth();
    let systems = match cfg.systems {
        Systems::Standard => vec![DyadicSystem::standard()],
        Systems::Shifted { count } => shifted_systems(count)?,
    };
    let doubling = doubling_constant(&nu, &DyadicSystem::standard(), depth.min(16));
    let needs_forest = cfg
        .suites
        .iter()
        .any(|s| matches!(s, Suite::Forest | Suite::Haar | Suite::Carleson));
    let forest = if needs_forest {
        build_forest(cfg, &mu, &nu, depth, &doubling)
    } else {
        Err("not requested".into())
    };
    let tree_bound = doubling
        .is_finite()
        .then(|| epsilon_for_doubling(doubling.constant).ok().map(|(_, c)| c))
        .flatten();
    let ctx = Context {
        cfg: cfg.clone(),
        mu,
        nu,
        depth,
        systems,
        doubling,
        forest,
        tree_bound,
    };

    let mut suites = cfg.suites.clone();
    suites.dedup();
    let outputs: Vec<SuiteOutput> = suites.par_iter().map(|s| run_suite(&ctx, *s)).collect();

    let mut report = Report {
        schema: SCHEMA.to_string(),
        scenario: cfg.scenario.clone(),
        config_hash: cfg.hash(),
        versions: Versions {
            sqfnlab: env!("CARGO_PKG_VERSION").to_string(),
            sqfnlab_core: sqfnlab_core::VERSION.to_string(),
        },
        passed: true,
        failed_checks: Vec::new(),
        checks: Vec::new(),
        doubling: None,
        forest: None,
        carleson: None,
        profiles: Vec::new(),
        classification: None,
        buckley: Vec::new(),
        fleet: None,
        warnings: diagnostics.warnings,
        tables: Vec::new(),
    };
    for out in outputs {
        report.checks.extend(out.checks);
        report.warnings.extend(out.warnings);
        report.doubling = report.doubling.or(out.doubling);
        report.forest = report.forest.or(out.forest);
        report.carleson = report.carleson.or(out.carleson);
        report.profiles.extend(out.profiles);
        report.classification = report.classification.or(out.classification);
        report.tables.extend(out.tables);
        report.buckley.extend(out.buckley);
        report.fleet = report.fleet.or(out.fleet);
    }
    report.failed_checks = report
        .checks
        .iter()
        .filter(|c| c.hard && !c.passed)
        .map(|c| c.name.clone())
        .collect();
    report.passed = report.failed_checks.is_empty();
    Ok(report)
}

fn run_suite(ctx: &Context, suite: Suite) -> SuiteOutput {
    match suite {
        Suite::Doubling => doubling_suite(ctx),
        Suite::Forest => forest_suite(ctx),
        Suite::Haar => haar_suite(ctx),
        Suite::Carleson => carleson_suite(ctx),
        Suite::Profiles => profile_suite(ctx),
        Suite::Buckley => buckley_suite(ctx),
        Suite::Cz => cz_suite(ctx),
        Suite::Tolsa => tolsa_suite(ctx),
        Suite::Domination => domination_suite(ctx),
        Suite::Oracle => oracle_suite(ctx),
        Suite::HistogramFleet => fleet_suite(ctx),
    }
}

fn doubling_suite(ctx: &Context) -> SuiteOutput {
    let mut out = SuiteOutput {
        doubling: Some(ctx.doubling.clone()),
        ..SuiteOutput::default()
    };
    if !ctx.doubling.is_finite() {
        out.warnings
            .push("ν has a null dyadic child, so it is not dyadically doubling; tree suites need an explicit ε".into());
    }
    out
}

fn forest_suite(ctx: &Context) -> SuiteOutput {
    let forest = match &ctx.forest {
        Ok(f) => f,
        Err(e) => return SuiteOutput::skipped(format!("forest suite skipped: {e}")),
    };
    let broken = forest.trees.iter().filter(|t| t.check_invariants().is_err()).count();
    let check_depth = forest.max_depth.min(10);
    let mut misowned = 0usize;
    for level in 0..=check_depth {
        for k in 0..1i64 << level {
            let iv = DyadicInterval::standard(level, k);
            if forest.trees.iter().filter(|t| t.contains(&iv)).count() != 1 {
                misowned += 1;
            }
        }
    }
    let summaries: Vec<_> = forest.trees.iter().map(|t| t.summary()).collect();
    SuiteOutput {
        checks: vec![
            Check::at_most(Suite::Forest, "tree invariants", broken as f64, 0.0),
            Check::at_most(Suite::Forest, "forest partitions the dyadic tree", misowned as f64, 0.0)
                .with_note(format!("levels 0..={check_depth}")),
        ],
        forest: Some(ForestStats {
            epsilon: forest.epsilon,
            max_depth: forest.max_depth,
            trees: forest.trees.len(),
            null_tops: forest.trees.iter().filter(|t| t.null_top).count(),
            leaves: forest.leaf_count(),
            truncated: summaries.iter().map(|s| s.truncated).sum(),
            largest_tree: summaries.iter().map(|s| s.members).max().unwrap_or(0),
            tallest_tree: summaries
                .iter()
                .map(|s| s.depth_histogram.keys().max().copied().unwrap_or(0))
                .max()
                .unwrap_or(0),
        }),
        ..SuiteOutput::default()
    }
}

struct HaarStats {
    product: f64,
    forms: f64,
    delta: f64,
    ortho: f64,
    mean: f64,
    parseval: f64,
    cells: usize,
}

fn haar_stats(ctx: &Context, tree: &Tree, sys: &HaarSystem, rng: &mut ChaCha8Rng) -> HaarStats {
    let mut s = HaarStats {
        product: 0.0,
        forms: 0.0,
        delta: 0.0,
        ortho: 0.0,
        mean: 0.0,
        parseval: 0.0,
        cells: 0,
    };
    for (iv, c) in &sys.coefficients {
        s.forms = s.forms.max((c.a - c.a_alt).abs());
        s.delta = s.delta.max((c.a.abs() - delta(&ctx.mu, &ctx.nu, &iv.unit_interval())).abs());
        s.mean = s.mean.max(c.mean().abs());
    }
    for m in tree.members.choose_multiple(rng, HAAR_CELLS) {
        if let Ok(p) = product_check(sys, &m.interval) {
            s.product = s.product.max(p.error());
            s.cells += 1;
        }
    }
    let keys: Vec<_> = sys.coefficients.keys().copied().collect();
    for _ in 0..HAAR_CELLS {
        if let (Some(i), Some(j)) = (keys.choose(rng), keys.choose(rng)) {
            if i != j {
                s.ortho = s.ortho.max(sys.inner_product(i, j).unwrap_or(0.0).abs());
            }
        }
    }
    let deepest = keys.iter().map(|k| k.level + 1).max().unwrap_or(tree.top.level);
    let g = g_l2_norm(sys, deepest);
    s.parseval = (g.parseval - g.quadrature).abs();
    s
}

fn haar_suite(ctx: &Context) -> SuiteOutput {
    let mut trees: Vec<Tree> = match &ctx.forest {
        Ok(f) => f
            .trees
            .iter()
            .filter(|t| !t.null_top && t.internal().next().is_some())
            .take(HAAR_TREES)
            .cloned()
            .collect(),
        Err(_) => Vec::new(),
    };
    match Tree::full(&ctx.mu, &ctx.nu, DyadicInterval::ROOT, ctx.depth.min(FOREST_DEPTH_LIMIT)) {
        Ok(t) => trees.push(t),
        Err(e) => return SuiteOutput::skipped(format!("haar suite skipped: {e}")),
    }
    let mut rng = seeded(&ctx.cfg, 1);
    let mut stats = Vec::new();
    let mut skipped = 0;
    for t in &trees {
        match haar(&ctx.mu, &ctx.nu, t) {
            Ok(sys) => stats.push(haar_stats(ctx, t, &sys, &mut rng)),
            Err(_) => skipped += 1,
        }
    }
    let mut out = SuiteOutput::default();
    if skipped > 0 {
        out.warnings
            .push(format!("haar suite: {skipped} trees have members of zero mass and were skipped"));
    }
    if stats.is_empty() {
        return out;
    }
    let max = |f: fn(&HaarStats) -> f64| stats.iter().map(f).fold(0.0, f64::max);
    let tol = ctx.cfg.tolerances;
    let cells: usize = stats.iter().map(|s| s.cells).sum();
    out.checks = vec![
        Check::at_most(Suite::Haar, "product representation", max(|s| s.product), PRODUCT_TOLERANCE)
            .with_note(format!("{cells} cells on {} trees", stats.len())),
        Check::at_most(Suite::Haar, "coefficient forms agree", max(|s| s.forms), tol.exact),
        Check::at_most(Suite::Haar, "|a_I| equals Δ(I)", max(|s| s.delta), tol.exact),
        Check::at_most(Suite::Haar, "Haar orthogonality", max(|s| s.ortho), tol.exact),
        Check::at_most(Suite::Haar, "Haar mean zero", max(|s| s.mean), tol.exact),
        Check::at_most(Suite::Haar, "Parseval against quadrature", max(|s| s.parseval), tol.accumulation),
    ];
    out
}

fn carleson_suite(ctx: &Context) -> SuiteOutput {
    let forest = match &ctx.forest {
        Ok(f) => f,
        Err(e) => return SuiteOutput::skipped(format!("carleson suite skipped: {e}")),
    };
    let Some(bound) = ctx.tree_bound else {
        return SuiteOutput::skipped("carleson suite skipped: no doubling bound for ν");
    };
    let results: Vec<_> = forest
        .trees
        .par_iter()
        .filter(|t| !t.null_top)
        .map(|t| (t.top, carleson_comparison(&ctx.mu, &ctx.nu, t, bound)))
        .collect();
    let mut stats = CarlesonStats {
        trees: 0,
        doubling_bound: bound,
        max_ratio: 0.0,
        worst_top: None,
        sum_delta: 0.0,
        sum_alpha: 0.0,
    };
    let mut failures = 0;
    for (top, r) in results {
        match r {
            Ok(c) => {
                stats.trees += 1;
                stats.sum_delta += c.sum_delta;
                stats.sum_alpha += c.sum_alpha;
                if c.ratio > stats.max_ratio {
                    stats.max_ratio = c.ratio;
                    stats.worst_top = Some(top);
                }
            }
            Err(_) => failures += 1,
        }
    }
    SuiteOutput {
        checks: vec![Check::at_most(Suite::Carleson, "trees are doubling for μ", failures as f64, 0.0)
            .with_note(format!("bound {bound:.4}"))],
        carleson: Some(stats),
        ..SuiteOutput::default()
    }
}

fn classify(p: &SquareFunctionProfile, depth: u32) -> Classification {
    let half = (depth / 2) as usize;
    let early = p.mean_slope(0, half);
    let late = p.mean_slope(half, depth as usize);
    let tail = p.tail_growth(half);
    let label = if tail < CONVERGED_GROWTH {
        "absolutely continuous"
    } else if late > CONVERGED_GROWTH && late >= 0.5 * early {
        "singular"
    } else {
        "inconclusive"
    };
    Classification {
        label: label.into(),
        early_slope: early,
        late_slope: late,
        tail_growth: tail,
    }
}


fn profile_suite(ctx: &Context) -> SuiteOutput {
    let mut rng = seeded(&ctx.cfg, 2);
    let points = match sample_points(&ctx.mu, DEPTH_CAP, ctx.cfg.points, &mut rng) {
        Ok(p) => p,
        Err(e) => return SuiteOutput::skipped(format!("profile suite skipped: {e}")),
    };
    let mut out = SuiteOutput::default();
    let mut warnings = BTreeSet::new();
    for sys in &ctx.systems {
        let p = match dyadic_square_profile(&ctx.mu, &ctx.nu, sys, &points, ctx.depth) {
            Ok(p) => p,
            Err(e) => {
                out.warnings.push(format!("profile on system {} skipped: {e}", sys.id));
                continue;
            }
        };
        warnings.extend(p.warnings.iter().cloned());
        let finals: Vec<f64> = p.partial_sums.iter().map(|r| r[r.len() - 1]).collect();
        let half = (ctx.depth / 2) as usize;
        out.profiles.push(ProfileSummary {
            mode: p.mode.clone(),
            depth: ctx.depth,
            points: points.len(),
            mean_final: finals.iter().sum::<f64>() / finals.len() as f64,
            max_final: finals.iter().copied().fold(0.0, f64::max),
            early_slope: p.mean_slope(0, half),
            late_slope: p.mean_slope(half, ctx.depth as usize),
        });
        if out.classification.is_none() {
            out.classification = Some(classify(&p, ctx.depth));
            if let (MeasureSpec::Cascade { overrides, .. }, MeasureSpec::Lebesgue) = (&ctx.cfg.mu, &ctx.cfg.nu) {
                if overrides.is_empty() && ctx.depth > 0 {
                    let cell = alpha(&ctx.mu, &ctx.nu, &Interval::new(0.0, 1.0));
                    let slope = p.mean_slope(0, ctx.depth as usize);
                    out.checks.push(
                        Check::at_most(
                            Suite::Profiles,
                            "square-function slope matches the cell α²",
                            (slope / (cell * cell) - 1.0).abs(),
                            ctx.cfg.tolerances.statistical,
                        )
                        .soft()
                        .with_note(format!("slope {slope:.6}, α² {:.6}", cell * cell)),
                    );
                }
            }
        }
        out.tables.push(p);
    }
    out.warnings.extend(warnings);
    out
}

fn buckley_suite(ctx: &Context) -> SuiteOutput {
    let top = ctx.depth.min(FOREST_DEPTH_LIMIT);
    let mut out = SuiteOutput::default();
    for which in [Coefficient::Alpha, Coefficient::Delta] {
        for depth in [top / 2, top] {
            out.buckley.push(buckley_ratio(&ctx.mu, &ctx.nu, which, depth));
        }
    }
    out
}

fn cz_suite(ctx: &Context) -> SuiteOutput {
    let sys = DyadicSystem::standard();
    let depth = ctx.depth.min(FOREST_DEPTH_LIMIT);
    let total = ctx.mu.total();
    let mut out = SuiteOutput::default();
    let tol = ctx.cfg.tolerances;
    for lambda in CZ_LAMBDAS {
        let cz = match cz_decompose(&ctx.mu, &ctx.nu, &sys, lambda, depth) {
            Ok(cz) => cz,
            Err(e) => {
                out.warnings.push(format!("CZ decomposition at λ = {lambda} skipped: {e}"));
                continue;
            }
        };
        let zero_mass = cz
            .bad
            .iter()
            .map(|b| {
                let g = sys.interval(&b.interval);
                (ctx.mu.mass_of(&g) - b.average() * ctx.nu.mass_of(&g)).abs()
            })
            .fold(0.0, f64::max);
        let tag = |name: &str| format!("{name} (λ = {lambda})");
        out.checks.push(Check::at_most(
            Suite::Cz,
            tag("CZ reconstruction"),
            cz.reconstruction_error(&ctx.mu, &ctx.nu, &sys),
            tol.exact,
        ));
        out.checks.push(Check::at_most(Suite::Cz, tag("CZ bad parts have zero mass"), zero_mass, tol.exact));
        out.checks.push(
            Check::below(Suite::Cz, tag("ν of the bad set"), cz.bad_nu_mass(), total / lambda)
                .with_note(format!("{} bad intervals", cz.bad.len())),
        );
        if ctx.doubling.is_finite() {
            let bound = ctx.doubling.constant * lambda;
            out.checks.push(Check::at_most(
                Suite::Cz,
                tag("good-part density"),
                cz.good_density_max(&ctx.nu, &sys),
                bound * (1.0 + tol.exact),
            ));
        }
    }
    out
}

/// Density of `μ` against Lebesgue when `μ` is a histogram.
fn histogram_density(spec: &MeasureSpec) -> Option<DensityHistogram> {
    match spec {
        MeasureSpec::Lebesgue => DensityHistogram::constant(1.0).ok(),
        MeasureSpec::Histogram { depth, masses } => {
            let scale = f64::from(*depth).exp2();
            DensityHistogram::new(*depth, masses.iter().map(|m| m * scale).collect()).ok()
        }
        _ => None,
    }
}

fn tolsa_suite(ctx: &Context) -> SuiteOutput {
    let (Some(g), MeasureSpec::Lebesgue) = (histogram_density(&ctx.cfg.mu), &ctx.cfg.nu) else {
        return SuiteOutput::default();
    };
    let sys = DyadicSystem::standard();
    let (d1, d2) = ((g.level + 2).min(DEPTH_CAP), (g.level + 6).min(DEPTH_CAP));
    let (a, b) = match (tolsa_l2(&g, &ctx.nu, &sys, d1), tolsa_l2(&g, &ctx.nu, &sys, d2)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return SuiteOutput::skipped(format!("L² suite skipped: {e}")),
    };
    let tol = ctx.cfg.tolerances.accumulation * a.ratio.max(1.0);
    SuiteOutput {
        checks: vec![Check::at_most(Suite::Tolsa, "L² ratio stable under depth", (b.ratio - a.ratio).abs(), tol)
            .with_note(format!("ratio {:.6} at depth {d1}, {:.6} at depth {d2}", a.ratio, b.ratio))],
        ..SuiteOutput::default()
    }
}

fn domination_suite(ctx: &Context) -> SuiteOutput {
    let systems = match shifted_systems(2) {
        Ok(s) => s,
        Err(e) => return SuiteOutput::skipped(e.to_string()),
    };
    let mut rng = seeded(&ctx.cfg, 3);
    let balls: Vec<(f64, f64)> = (0..ctx.cfg.points)
        .map(|_| (rng.gen_range(0.2..0.8), rng.gen_range(-10.0..-4.0f64).exp2()))
        .collect();
    let results: Vec<_> = balls
        .par_iter()
        .map(|&(x, r)| domination_check(&ctx.mu, &ctx.nu, &systems, x, r))
        .collect();
    let (mut worst, mut errors) = (0.0f64, 0usize);
    for r in &results {
        match r {
            Ok(d) if d.rhs > 0.0 => worst = worst.max(d.lhs / d.rhs),
            Ok(d) if d.lhs > 0.0 => worst = f64::INFINITY,
            Ok(_) => {}
            Err(_) => errors += 1,
        }
    }
    let mut out = SuiteOutput {
        checks: vec![Check::at_most(Suite::Domination, "smooth α dominated by shifted dyadic α", worst, 1.0)
            .with_note(format!("largest lhs/rhs over {} balls", balls.len()))],
        ..SuiteOutput::default()
    };
    if errors > 0 {
        out.warnings.push(format!("domination: {errors} balls failed a precondition"));
    }
    out
}

/// Up to 32 atoms or cells, normalized.
pub fn random_small_measure(r: &mut ChaCha8Rng) -> Measure {
    let atoms: Vec<Atom> = (0..r.gen_range(0..=16))
        .map(|_| Atom {
            position: r.gen_range(0.0..1.0),
            weight: r.gen_range(0.01..1.0),
        })
        .collect();
    let level = r.gen_range(0..=4);
    let cells: Vec<f64> = (0..1usize << level)
        .map(|_| if r.gen_bool(0.5) { 0.0 } else { r.gen_range(0.0..1.0) })
        .collect();
    let pieces = Measure::from_cells(level, &cells).map(|m| m.pieces().to_vec()).unwrap_or_default();
    match Measure::new(atoms, pieces) {
        Ok(m) if !m.is_zero() => m.normalized(),
        _ => Measure::lebesgue(),
    }
}

fn oracle_suite(ctx: &Context) -> SuiteOutput {
    let mut rng = seeded(&ctx.cfg, 4);
    let pairs: Vec<(Measure, Measure)> = (0..ctx.cfg.samples)
        .map(|_| (random_small_measure(&mut rng), random_small_measure(&mut rng)))
        .collect();
    let gaps: Vec<Result<f64, String>> = pairs
        .par_iter()
        .map(|(a, b)| {
            w1_supported(a, b)
                .map(|w| (w.value - w1_oracle(a, b, ORACLE_GRID)).abs())
                .map_err(|e| e.to_string())
        })
        .collect();
    let errors = gaps.iter().filter(|g| g.is_err()).count();
    let worst = gaps.iter().filter_map(|g| g.as_ref().ok()).copied().fold(0.0, f64::max);
    SuiteOutput {
        checks: vec![
            Check::at_most(Suite::Oracle, "closed form matches grid oracle", worst, ORACLE_TOLERANCE)
                .with_note(format!("{} pairs, grid {ORACLE_GRID}", pairs.len())),
            Check::at_most(Suite::Oracle, "transport errors", errors as f64, 0.0),
        ],
        ..SuiteOutput::default()
    }
}

fn fleet_suite(ctx: &Context) -> SuiteOutput {
    let mut rng = seeded(&ctx.cfg, 5);
    let sys = DyadicSystem::standard();
    let densities: Vec<DensityHistogram> = (0..ctx.cfg.samples)
        .map(|_| DensityHistogram::new(8, (0..256).map(|_| rng.gen_range(0.0..4.0)).collect()).expect("valid density"))
        .collect();
    let (shallow, deep) = (9.min(ctx.cfg.depth), ctx.cfg.depth.max(9));
    let leb = Measure::lebesgue();
    let ratios: Vec<Result<(f64, f64), String>> = densities
        .par_iter()
        .map(|g| {
            let a = tolsa_l2(g, &leb, &sys, shallow).map_err(|e| e.to_string())?;
            let b = tolsa_l2(g, &leb, &sys, deep).map_err(|e| e.to_string())?;
            Ok((a.ratio, b.ratio))
        })
        .collect();
    let ok: Vec<(f64, f64)> = ratios.iter().filter_map(|r| r.as_ref().ok()).copied().collect();
    let drift = ok.iter().map(|(a, b)| (b - a).abs() / a.max(1.0)).fold(0.0, f64::max);
    let finite = ok.iter().all(|(_, b)| b.is_finite());
    let max_ratio = ok.iter().map(|(_, b)| *b).fold(0.0, f64::max);
    SuiteOutput {
        checks: vec![
            Check::at_most(Suite::HistogramFleet, "L² ratio depth drift", drift, ctx.cfg.tolerances.accumulation)
                .with_note(format!("depth {shallow} against {deep}")),
            Check::at_most(
                Suite::HistogramFleet,
                "densities with an infinite or failed ratio",
                (ratios.len() - ok.len()) as f64 + f64::from(u8::from(!finite)),
                0.0,
            ),
        ],
        fleet: Some(FleetStats {
            samples: ok.len(),
            max_ratio,
            mean_ratio: ok.iter().map(|(_, b)| b).sum::<f64>() / ok.len().max(1) as f64,
        }),
        ..SuiteOutput::default()
    }
}
