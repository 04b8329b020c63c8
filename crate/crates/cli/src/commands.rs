//! One function per subcommand. Each computes everything first and writes
//! its output in a single serialized step at the end.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};
use trigroots::cg::{compute_cg, CgQuadratureConfig};
use trigroots::charprobe::{self, decay_scan, exponent_bound_with, log_abs_charfn_with, log_radii, small_ball_scan};
use trigroots::diophantine::{build_d, check_condition_st, check_condition_t, ConditionReport};
use trigroots::edgeworth::{
    self, c_n_alpha, cn_limit_closed_form, cn_limit_reference, gauss_expect_psi_h, orderings, psi_limit, CorrectorModel,
    Normalization,
};
use trigroots::mcstats::{self, scaling_check, slope_series, write_slope_csv, ExperimentConfig};
use trigroots::polyeval::covariance_v;
use trigroots::rootcount::{count_kacrice, count_roots_default, KacRiceFlag};
use trigroots::DistributionSpec;
use trigroots_verify::{generic_s_t, verify, VerifyConfig};

use crate::config::RunConfig;
use crate::svg;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

const CLASSES: [(usize, usize); 4] = [(1, 3), (1, 4), (2, 3), (2, 4)];

pub fn run(cfg: &RunConfig) -> Result<()> {
    match cfg.command.as_str() {
        "cg" => cg(cfg),
        "simulate" => simulate(cfg),
        "sweep" => sweep(cfg),
        "edgeworth" => edgeworth_check(cfg),
        "conditions" => conditions(cfg),
        "charfn" => charfn(cfg),
        "smallball" => smallball(cfg),
        "kacrice-audit" => kacrice_audit(cfg),
        "scaling" => scaling(cfg),
        "verify" => run_verify(cfg),
        other => Err(CliError::Usage(format!("unknown command '{other}'"))),
    }
}

fn write_out(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(cfg: &RunConfig, result: &T) -> Result<()> {
    let body = json!({ "provenance": cfg.provenance(), "result": result });
    let mut text = serde_json::to_string_pretty(&body).expect("output serializes");
    text.push('\n');
    write_out(cfg, &text)
}

fn emit_csv(cfg: &RunConfig, body: &str) -> Result<()> {
    write_out(cfg, &(cfg.csv_preamble() + body))
}

fn dists(cfg: &RunConfig) -> Result<Vec<DistributionSpec>> {
    if cfg.dist.is_empty() {
        return Err(CliError::Usage("at least one --dist is required".into()));
    }
    cfg.dist.iter().map(|d| Ok(d.parse::<DistributionSpec>()?)).collect()
}

fn one_dist(cfg: &RunConfig) -> Result<DistributionSpec> {
    match dists(cfg)?.as_slice() {
        [d] => Ok(d.clone()),
        _ => Err(CliError::Usage("this command takes a single --dist".into())),
    }
}

fn one_n(cfg: &RunConfig, default: usize) -> Result<usize> {
    match cfg.n.as_slice() {
        [] => Ok(default),
        [n] if *n > 0 => Ok(*n),
        [_] => Err(CliError::Usage("n must be at least 1".into())),
        _ => Err(CliError::Usage("this command takes a single --n".into())),
    }
}

fn n_list(cfg: &RunConfig, default: &[usize]) -> Vec<usize> {
    if cfg.n.is_empty() {
        default.to_vec()
    } else {
        cfg.n.clone()
    }
}

fn cg(cfg: &RunConfig) -> Result<()> {
    let d = CgQuadratureConfig::default();
    let q = CgQuadratureConfig {
        t0: cfg.t0.unwrap_or(d.t0),
        t_max: cfg.tmax.unwrap_or(d.t_max),
        abs_tol: cfg.tol.unwrap_or(d.abs_tol),
        tail_order: cfg.tail_order.unwrap_or(d.tail_order),
    };
    let r = compute_cg(&q)?;
    emit_json(
        cfg,
        &json!({
            "value": r.value,
            "error_estimate": r.error_estimate,
            "integral": r.integral,
            "tail": r.tail,
            "tail_coefficient": r.tail_coefficient,
            "t_max": r.t_max,
            "panels": r.panels,
            "evaluations": r.evaluations,
            "quadrature": q,
        }),
    )
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let mut e = ExperimentConfig::new(one_dist(cfg)?, one_n(cfg, 64)?, cfg.window, cfg.trials.unwrap_or(1000), cfg.seed)
        .with_parallelism(cfg.parallelism());
    e.grid_points = cfg.grid_points;
    emit_json(cfg, &mcstats::run(&e)?)
}

fn sweep(cfg: &RunConfig) -> Result<()> {
    let ns = n_list(cfg, &[64, 128, 256]);
    let trials = cfg.trials.unwrap_or(1000);
    let mut rows = Vec::new();
    for d in dists(cfg)? {
        rows.extend(slope_series(&d, &ns, trials, cfg.seed, cfg.window, cfg.parallelism())?);
    }
    let mut body = Vec::new();
    write_slope_csv(&mut body, &rows)?;
    if let Some(p) = &cfg.svg {
        std::fs::write(p, svg::sweep_chart(&rows, &cfg.provenance()))?;
    }
    emit_csv(cfg, &String::from_utf8(body).expect("CSV is UTF-8"))
}

#[derive(Serialize)]
struct CheckRow {
    dist: Option<String>,
    alpha: Vec<usize>,
    computed: f64,
    target: f64,
    error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<f64>,
}

fn edgeworth_check(cfg: &RunConfig) -> Result<()> {
    let check = cfg
        .check
        .as_deref()
        .ok_or_else(|| CliError::Usage("--check is required: cn-limits | psi-limits | q-normalization".into()))?;
    let n = one_n(cfg, 100_000)?;
    let (gs, gt) = generic_s_t();
    let t = cfg.t.unwrap_or(n as f64 * gt);
    let s = cfg.s.unwrap_or(n as f64 * gs);
    let lambdas = edgeworth::default_lambdas(4);
    let mut rows = Vec::new();
    match check {
        "cn-limits" => {
            let norm = Normalization::limit(4);
            for d in dists(cfg)? {
                let m4 = d.moments().m4;
                for (i, j) in CLASSES {
                    let target = cn_limit_closed_form(i, j, m4);
                    for a in orderings(i, j) {
                        let v = c_n_alpha(n, t, Some(s), &d, &a, &norm)?;
                        rows.push(CheckRow {
                            dist: Some(d.to_string()),
                            alpha: a.0.clone(),
                            computed: v,
                            target,
                            error: v - target,
                            reference: Some(cn_limit_reference(i, j, m4)),
                        });
                    }
                }
            }
        }
        "psi-limits" => {
            for (i, j) in CLASSES {
                for a in orderings(i, j) {
                    let v = gauss_expect_psi_h(&a, cfg.delta, &lambdas)?;
                    let target = psi_limit(i, j);
                    rows.push(CheckRow {
                        dist: None,
                        alpha: a.0.clone(),
                        computed: v,
                        target,
                        error: v - target,
                        reference: None,
                    });
                }
            }
        }
        "q-normalization" => {
            for d in dists(cfg)? {
                let model = CorrectorModel::new(n, t, Some(s), &d, &Normalization::limit(4))?;
                let v = edgeworth::q_normalization(&model, cfg.nodes);
                rows.push(CheckRow {
                    dist: Some(d.to_string()),
                    alpha: Vec::new(),
                    computed: v,
                    target: 1.0,
                    error: v - 1.0,
                    reference: None,
                });
            }
        }
        other => return Err(CliError::Usage(format!("unknown check '{other}'"))),
    }
    emit_json(cfg, &json!({ "check": check, "n": n, "t": t, "s": s, "rows": rows }))
}

fn witness_cols(r: &ConditionReport) -> String {
    match r.witness {
        Some(w) => format!(",{},{},{},{:e}", r.satisfied, w.k, w.l, w.distance),
        None => format!(",{},,,", r.satisfied),
    }
}

fn conditions(cfg: &RunConfig) -> Result<()> {
    if cfg.t.is_some() && cfg.pair.is_some() {
        return Err(CliError::Usage("give either --t or --pair, not both".into()));
    }
    if cfg.eps.is_nan() || cfg.tau.is_nan() || cfg.eps <= 0.0 || cfg.tau <= 0.0 {
        return Err(CliError::Usage("eps and tau must be positive".into()));
    }
    let point = cfg.t.is_some() || cfg.pair.is_some();
    let mut body = String::from("n,tau,threshold,l_max,intervals,total_pairs,bad_pairs,fraction");
    if point {
        body.push_str(",satisfied,witness_k,witness_l,witness_distance");
    }
    body.push('\n');
    for n in n_list(cfg, &[100, 1000, 10_000]) {
        if n == 0 {
            return Err(CliError::Usage("n must be at least 1".into()));
        }
        let region = build_d(n, cfg.eps, cfg.tau);
        let r = region.bad_fraction(cfg.parallelism())?;
        write!(
            body,
            "{n},{},{:e},{},{},{},{},{:.10}",
            cfg.tau, region.threshold, region.l_max, r.intervals, r.total_pairs, r.bad_pairs, r.fraction
        )
        .unwrap();
        if let Some(t) = cfg.t {
            body += &witness_cols(&check_condition_t(n, t, cfg.tau));
        } else if let Some([s, t]) = cfg.pair {
            body += &witness_cols(&check_condition_st(n, s, t, cfg.tau));
        }
        body.push('\n');
    }
    emit_csv(cfg, &body)
}

fn default_t(n: usize) -> f64 {
    PI * n as f64 * (5f64.sqrt() - 1.0) / 2.0
}

fn charfn(cfg: &RunConfig) -> Result<()> {
    let d = one_dist(cfg)?;
    let n = one_n(cfg, 200)?;
    let t = cfg.t.unwrap_or_else(|| default_t(n));
    let s = cfg.s;
    if cfg.scan {
        let radii = log_radii(cfg.r_min, cfg.r_max, cfg.radii);
        let r = decay_scan(n, t, s, &d, &radii, cfg.tau, cfg.c_star, cfg.directions, cfg.seed)?;
        let mut body = format!("# condition_satisfied={}\nradius,log_abs_charfn,bound,in_regime\n", r.condition_satisfied);
        for k in 0..r.radii.len() {
            writeln!(body, "{:e},{:e},{:e},{}", r.radii[k], r.worst_log_abs[k], r.bound_log[k], r.regime_flags[k]).unwrap();
        }
        return emit_csv(cfg, &body);
    }
    if cfg.x.is_empty() {
        return Err(CliError::Usage("give --x for a point evaluation or --scan".into()));
    }
    let v = log_abs_charfn_with(n, t, s, &d, &cfg.x, cfg.convention)?;
    let b = exponent_bound_with(n, t, s, &d, &cfg.x, cfg.convention)?;
    let x: Vec<String> = cfg.x.iter().map(f64::to_string).collect();
    emit_csv(cfg, &format!("x,log_abs_charfn,bound\n{},{v:e},{b:e}\n", x.join(";")))
}

fn smallball(cfg: &RunConfig) -> Result<()> {
    let d = one_dist(cfg)?;
    let n = one_n(cfg, 200)?;
    let t = cfg.t.unwrap_or_else(|| default_t(n));
    let dim = if cfg.s.is_some() { 4 } else { 2 };
    let centers = if cfg.center.is_empty() { vec![vec![0.0; dim]] } else { cfg.center.clone() };
    let delta = cfg.delta.unwrap_or(0.1);
    let est = small_ball_scan(n, t, cfg.s, &d, &centers, delta, cfg.trials.unwrap_or(100_000), cfg.seed, cfg.parallelism())?;
    let v = covariance_v(n, t, None).entries;
    let mut body = String::from("center,probability,se,hits,trials,gaussian\n");
    for e in &est {
        let gauss = match (cfg.s, e.center.as_slice()) {
            (None, &[a, b]) => {
                let m = [[v[0][0], v[0][1]], [v[1][0], v[1][1]]];
                format!("{:e}", charprobe::gaussian_ball_probability(&m, &[a, b], delta))
            }
            _ => String::new(),
        };
        let c: Vec<String> = e.center.iter().map(f64::to_string).collect();
        writeln!(body, "{},{:e},{:e},{},{},{gauss}", c.join(";"), e.probability, e.se, e.hits, e.trials).unwrap();
    }
    emit_csv(cfg, &body)
}

fn flag_kind(f: &KacRiceFlag) -> &'static str {
    match f {
        KacRiceFlag::EndpointBelowDelta { .. } => "endpoint",
        KacRiceFlag::GridPointBelowDelta { .. } => "grid_point",
        KacRiceFlag::GapBelowDelta { .. } => "gap",
        KacRiceFlag::TangencyBelowDelta { .. } => "tangency",
        KacRiceFlag::UncertainRoots => "uncertain_roots",
    }
}

fn kacrice_audit(cfg: &RunConfig) -> Result<()> {
    let d = one_dist(cfg)?;
    let n = one_n(cfg, 64)?;
    let trials = cfg.trials.unwrap_or(200);
    let delta = cfg.delta.unwrap_or(1e-6);
    let rows = trigroots_pool(cfg)?.install(|| {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let s = d.sample(n, cfg.seed, i)?;
                Ok((i, count_roots_default(&s, cfg.window)?, count_kacrice(&s, cfg.window, delta)?))
            })
            .collect::<std::result::Result<Vec<_>, trigroots::Error>>()
    })?;
    let mut body = String::from("trial,count,kacrice,difference,uncertain,flags\n");
    let (mut agree, mut flagged, mut silent) = (0u64, 0u64, 0u64);
    for (i, rc, kr) in &rows {
        let diff = kr.value - rc.count as f64;
        let same = kr.value.round() as usize == rc.count;
        let fl = kr.flagged() || rc.uncertain;
        agree += same as u64;
        flagged += fl as u64;
        silent += (!same && !fl) as u64;
        let kinds: Vec<&str> = kr.flags.iter().map(flag_kind).collect();
        writeln!(body, "{i},{},{:.9},{:.3e},{},{}", rc.count, kr.value, diff, rc.uncertain, kinds.join(";")).unwrap();
    }
    writeln!(
        body,
        "# agreement={:.6}\n# flagged={flagged}\n# unflagged_discrepancies={silent}",
        agree as f64 / trials.max(1) as f64
    )
    .unwrap();
    emit_csv(cfg, &body)
}

fn trigroots_pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism())
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn scaling(cfg: &RunConfig) -> Result<()> {
    let ns = n_list(cfg, &[32, 128, 512]);
    let trials = cfg.trials.unwrap_or(2000);
    let reports = dists(cfg)?
        .iter()
        .map(|d| scaling_check(d, &ns, trials, cfg.seed, cfg.parallelism()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    emit_json(cfg, &reports)
}

fn run_verify(cfg: &RunConfig) -> Result<()> {
    let vc = VerifyConfig {
        profile: cfg.profile,
        seed: cfg.seed,
        parallelism: cfg.parallelism(),
        tolerances: cfg.tolerances.clone(),
    };
    let report = verify(&vc);
    for c in &report.criteria {
        eprintln!("{}", c.line());
    }
    // The report is the output; provenance rides alongside it without
    // disturbing its byte-for-byte reproducibility across thread counts.
    let mut body: Value = serde_json::to_value(&report).expect("report serializes");
    body["config"]["parallelism"] = Value::Null;
    emit_json(cfg, &body)?;
    if report.all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect();
        Err(CliError::Failed(format!("criteria failed: {}", failed.join(", "))))
    }
}
