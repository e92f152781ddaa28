//! The named experiments.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{Experiment, ExperimentConfig};
use super::report::{emit_report, Criterion, ReportRow, Results};
use crate::dyadic::{validate_das, DasScheme, DyadicScheme, Shape, ShiftedGridScheme};
use crate::error::{Error, Result};
use crate::exploration::{
    bm_hit_prob, box_count, observables, run_bbm, BranchingSchedule, FieldExplorer,
};
use crate::green_field::{
    cell_variance, centre_cell, centre_cell_variances, pair, scaling_check, GreensOperator,
    LatticeDomain,
};
use crate::rng::{tag, StreamKey};
use crate::stats::{kolmogorov_smirnov, normal_cdf, ols_slope, Summary};
use crate::thinness::{
    bridge_report, deterministic_thin_report, exceedance_stats, gaussian_bound_check,
    indicator_sum, lattice_kappa, moment_report, non_thin_verdict, sup_cell_statistic,
    union_bound_holds, ReplicaTrace, ThresholdSpec,
};

/// What [`run_experiment`] wrote.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub results: Results,
    pub files: Vec<PathBuf>,
    pub all_pass: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    config: &'a ExperimentConfig,
    /// Feed this back with `--config` to regenerate the bundle.
    config_text: String,
    seed: u64,
    crate_version: &'static str,
    workers: usize,
    wall_time_seconds: f64,
    all_pass: bool,
    files: Vec<String>,
}

/// Validate `cfg`, run it, and write the report bundle to `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Bundle> {
    cfg.validate()?;
    let workers = cfg.resolved_workers()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("workers: {e}")))?;
    let results = pool.install(|| compute(cfg))?;
    let mut files = emit_report(&results, cfg.format, &cfg.out)?;
    let config_path = cfg.out.join("config.txt");
    std::fs::write(&config_path, cfg.to_text())?;
    files.push(config_path);
    let all_pass = results.all_pass();
    let manifest = Manifest {
        experiment: cfg.experiment.name(),
        config: cfg,
        config_text: cfg.to_text(),
        seed: cfg.seed,
        crate_version: env!("CARGO_PKG_VERSION"),
        workers,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        all_pass,
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
    };
    let manifest_path = cfg.out.join("manifest.json");
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Input(format!("json: {e}")))?;
    std::fs::write(&manifest_path, text)?;
    files.push(manifest_path);
    Ok(Bundle {
        results,
        files,
        all_pass,
    })
}

/// Run the experiment without writing anything.
pub fn compute(cfg: &ExperimentConfig) -> Result<Results> {
    match cfg.experiment {
        Experiment::Sample => sample(cfg),
        Experiment::ExploreBbm => explore_bbm(cfg),
        Experiment::ExploreField => explore_field(cfg),
        Experiment::Moments => moments(cfg),
        Experiment::ThinnessBattery => thinness_battery(cfg),
        Experiment::DasValidate => das_validate(cfg),
        Experiment::GreenChecks => green_checks(cfg),
    }
}

/// Replicas in id order, computed on the current pool.
fn replicas<T: Send>(
    cfg: &ExperimentConfig,
    f: impl Fn(u64, StreamKey) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| f(r, StreamKey::replica(cfg.seed, r)))
        .collect()
}

fn operator(cfg: &ExperimentConfig) -> Result<GreensOperator> {
    GreensOperator::build(LatticeDomain::new(cfg.dim, cfg.grid)?)
}

fn trace(value: serde_json::Value) -> Result<String> {
    serde_json::to_string(&value).map_err(|e| Error::Input(format!("json: {e}")))
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn fmt_series(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.4e}")).collect();
    parts.join(" ")
}

fn sample(cfg: &ExperimentConfig) -> Result<Results> {
    let op = operator(cfg)?;
    let dom = *op.domain();
    if (cfg.grid >> cfg.levels.min(usize::BITS as usize - 1)) < 2 {
        return Err(Error::Resolution(format!(
            "levels: depth {} is finer than the grid {}",
            cfg.levels, cfg.grid
        )));
    }
    let ones = vec![1.0; dom.len()];
    let cells = (1..=cfg.levels)
        .map(|n| centre_cell(cfg.dim, n))
        .collect::<Result<Vec<_>>>()?;
    let runs = replicas(cfg, |r, key| {
        let f = op.sample(key);
        let total = pair(&f, &ones)?;
        let masses = cells
            .iter()
            .map(|c| f.cell_pairing(c))
            .collect::<Result<Vec<_>>>()?;
        let table = (r == 0 && cfg.dim == 2).then(|| {
            let mut t = String::from("i,j,x,y,value\n");
            for i in 0..=cfg.grid {
                for j in 0..=cfg.grid {
                    let h = dom.mesh();
                    t.push_str(&format!(
                        "{i},{j},{},{},{}\n",
                        i as f64 * h,
                        j as f64 * h,
                        f.at(&[i, j])
                    ));
                }
            }
            t
        });
        Ok((total, masses, table))
    })?;
    let mut res = Results::default();
    let totals: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let s = Summary::from_samples(&totals);
    res.rows
        .push(ReportRow::with_oracle(0, "total_mass", s.mean, s.se, 0.0));
    res.rows.push(ReportRow::with_oracle(
        0,
        "total_mass_sq",
        s.second_moment,
        s.second_moment_se,
        op.variance(&ones),
    ));
    for (k, c) in cells.iter().enumerate() {
        let xs: Vec<f64> = runs.iter().map(|r| r.1[k]).collect();
        let s = Summary::from_samples(&xs);
        let n = k + 1;
        res.rows.push(ReportRow::with_oracle(
            n,
            "centre_cell_mass",
            s.mean,
            s.se,
            0.0,
        ));
        res.rows.push(ReportRow::with_oracle(
            n,
            "centre_cell_mass_sq",
            s.second_moment,
            s.second_moment_se,
            cell_variance(&op, c, c)?,
        ));
    }
    for (r, run) in runs.iter().enumerate() {
        res.traces.push(trace(
            json!({"replica": r, "total_mass": run.0, "centre_cell_masses": run.1}),
        )?);
    }
    if let Some(t) = runs.first().and_then(|r| r.2.clone()) {
        res.tables.push(("field.csv".into(), t));
    }
    Ok(res)
}

struct BbmRun {
    trace: ReplicaTrace,
    boxes: Vec<u64>,
    active: Vec<usize>,
}

fn bbm_runs(cfg: &ExperimentConfig, sched: &BranchingSchedule) -> Result<Vec<BbmRun>> {
    replicas(cfg, |r, key| {
        let st = run_bbm(sched, cfg.levels, key)?;
        let boxes = (0..=cfg.levels)
            .map(|n| box_count(&st, n))
            .collect::<Result<_>>()?;
        let active = st.records.iter().map(|rec| rec.active).collect();
        Ok(BbmRun {
            trace: ReplicaTrace::from_state(r, &st)?,
            boxes,
            active,
        })
    })
}

fn explore_bbm(cfg: &ExperimentConfig) -> Result<Results> {
    let sched = BranchingSchedule::new(cfg.dim, cfg.t)?;
    let runs = bbm_runs(cfg, &sched)?;
    let mut res = Results::default();
    for n in 0..=cfg.levels {
        let p = bm_hit_prob(sched.time(n))?;
        let vol = Summary::from_samples(
            &runs
                .iter()
                .map(|r| r.trace.entries[n].inactive_volume)
                .collect::<Vec<_>>(),
        );
        let m = Summary::from_samples(
            &runs
                .iter()
                .map(|r| r.trace.entries[n].active_mass)
                .collect::<Vec<_>>(),
        );
        let act =
            Summary::from_samples(&runs.iter().map(|r| r.active[n] as f64).collect::<Vec<_>>());
        let bx = Summary::from_samples(&runs.iter().map(|r| r.boxes[n] as f64).collect::<Vec<_>>());
        let cells = 2f64.powi((cfg.dim * n) as i32);
        res.rows
            .push(ReportRow::with_oracle(n, "vol", vol.mean, vol.se, p));
        res.rows
            .push(ReportRow::with_oracle(n, "M_n", m.mean, m.se, p));
        res.rows.push(ReportRow::with_oracle(
            n,
            "active_cells",
            act.mean,
            act.se,
            cells * (1.0 - p),
        ));
        res.rows
            .push(ReportRow::plain(n, "box_count", bx.mean, bx.se));
    }
    for r in &runs {
        res.traces.push(trace(
            json!({"replica": r.trace.replica, "entries": r.trace.entries, "box_counts": r.boxes}),
        )?);
    }
    Ok(res)
}

fn moments(cfg: &ExperimentConfig) -> Result<Results> {
    let sched = BranchingSchedule::new(cfg.dim, cfg.t)?;
    let runs = bbm_runs(cfg, &sched)?;
    let traces: Vec<ReplicaTrace> = runs.into_iter().map(|r| r.trace).collect();
    let report = moment_report(&traces, 1..=cfg.levels, &sched)?;
    let mut res = Results::default();
    for row in &report.rows {
        let a = &row.active_mass;
        res.rows.push(ReportRow::with_oracle(
            row.n, "M_n", a.mean, a.se, row.oracle,
        ));
        res.rows.push(ReportRow::plain(
            row.n,
            "M_n_second_moment",
            a.second_moment,
            a.second_moment_se,
        ));
        let v = &row.inactive_volume;
        res.rows.push(ReportRow::with_oracle(
            row.n, "vol", v.mean, v.se, row.oracle,
        ));
        let h = &row.stopped_mass;
        res.rows.push(ReportRow::with_oracle(
            row.n, "H_n", h.mean, h.se, row.oracle,
        ));
    }
    let v = non_thin_verdict(&report);
    let means: Vec<f64> = report.rows.iter().map(|r| r.active_mass.mean).collect();
    let m2: Vec<f64> = report
        .rows
        .iter()
        .map(|r| r.active_mass.second_moment)
        .collect();
    res.criteria.push(Criterion::new(
        "mean_floor",
        v.mean_floor,
        format!("mean(M_n) >= 0.5 for n >= 6: {}", fmt_series(&means)),
    ));
    res.criteria.push(Criterion::new(
        "mean_increasing",
        v.mean_increasing,
        "mean(M_n) increasing over n >= 2",
    ));
    res.criteria.push(Criterion::new(
        "second_moment_bounded",
        v.second_moment_bounded,
        format!("E[M_n^2]: {}", fmt_series(&m2)),
    ));
    if let Some(h) = v.increments_halving {
        let ratios: Vec<String> = v
            .increment_ratios
            .iter()
            .map(|(n, r)| format!("n={n}: {r:.3}"))
            .collect();
        res.criteria
            .push(Criterion::new("increments_halving", h, ratios.join(", ")));
    }
    for t in &traces {
        res.traces
            .push(trace(json!({"replica": t.replica, "entries": t.entries}))?);
    }
    Ok(res)
}

/// Increments kept per replica and depth for the pooled KS check.
const KS_KEEP: usize = 64;

fn explore_field(cfg: &ExperimentConfig) -> Result<Results> {
    let op = operator(cfg)?;
    let ex = FieldExplorer::new(&op, cfg.levels)?;
    let runs = replicas(cfg, |r, key| {
        let st = ex.explore(&op.sample(key));
        let entries = (0..=cfg.levels)
            .map(|n| observables(&st, n))
            .collect::<Result<Vec<_>>>()?;
        let boxes = (0..=cfg.levels)
            .map(|n| box_count(&st, n))
            .collect::<Result<Vec<_>>>()?;
        let incr: Vec<Vec<f64>> = st
            .standardized_increments
            .iter()
            .map(|v| v.iter().take(KS_KEEP).copied().collect())
            .collect();
        Ok((r, entries, boxes, st.records, incr))
    })?;
    let mut res = Results::default();
    let records: Vec<_> = runs.iter().map(|r| r.3.clone()).collect();
    let bridge = bridge_report(&records)?;
    let mut log_boxes = Vec::new();
    for n in 0..=cfg.levels {
        let vol = Summary::from_samples(
            &runs
                .iter()
                .map(|r| r.1[n].inactive_volume)
                .collect::<Vec<_>>(),
        );
        let bx = Summary::from_samples(&runs.iter().map(|r| r.2[n] as f64).collect::<Vec<_>>());
        log_boxes.push(bx.mean.log2());
        res.rows
            .push(ReportRow::plain(n, "clock", ex.clock(n), 0.0));
        res.rows.push(ReportRow::plain(n, "vol", vol.mean, vol.se));
        res.rows.push(ReportRow::plain(
            n,
            "bm_reference",
            bm_hit_prob(ex.clock(n))?,
            0.0,
        ));
        res.rows
            .push(ReportRow::plain(n, "box_count", bx.mean, bx.se));
        let b = &bridge[n];
        res.rows.push(ReportRow::plain(
            n,
            "telescoping_residual_max",
            b.max_telescoping,
            0.0,
        ));
        res.rows.push(ReportRow::plain(
            n,
            "bridge_residual_max",
            b.max_residual,
            0.0,
        ));
        res.rows.push(ReportRow::plain(
            n,
            "fluctuation_var",
            b.fluctuation.variance(),
            0.0,
        ));
    }
    let depth = runs.iter().map(|r| r.4.len()).min().unwrap_or(0);
    for k in 0..depth {
        let pooled: Vec<f64> = runs.iter().flat_map(|r| r.4[k].iter().copied()).collect();
        if pooled.is_empty() {
            continue;
        }
        let (dist, p) = kolmogorov_smirnov(&pooled, normal_cdf);
        res.rows
            .push(ReportRow::plain(k, "increment_ks_distance", dist, 0.0));
        res.rows
            .push(ReportRow::plain(k, "increment_ks_pvalue", p, 0.0));
    }
    if cfg.levels >= 3 {
        let ns: Vec<f64> = (2..=cfg.levels).map(|n| n as f64).collect();
        let slope = ols_slope(&ns, &log_boxes[2..]);
        let d = cfg.dim as f64;
        let bound = (d - 1.0).max(d / 2.0 + 1.0) + 0.3;
        res.rows
            .push(ReportRow::plain(cfg.levels, "box_count_slope", slope, 0.0));
        res.criteria.push(Criterion::new(
            "box_count_exponent",
            slope <= bound,
            format!("slope {slope:.3} against bound {bound:.2}"),
        ));
    }
    let tele = bridge.iter().map(|b| b.max_telescoping).fold(0.0, f64::max);
    let br = bridge.iter().map(|b| b.max_residual).fold(0.0, f64::max);
    res.criteria.push(Criterion::new(
        "telescoping_identity",
        tele < 1e-9,
        format!("max relative residual {tele:.2e}"),
    ));
    res.criteria.push(Criterion::new(
        "bridge_identity",
        br < 1e-9,
        format!("max relative residual {br:.2e}"),
    ));
    for (r, entries, boxes, recs, _) in &runs {
        let fields: Vec<_> = recs.iter().map(|x| &x.field).collect();
        res.traces.push(trace(
            json!({"replica": r, "entries": entries, "box_counts": boxes, "ledger": fields}),
        )?);
    }
    Ok(res)
}

fn segment_pair(d: usize) -> (Shape, Shape) {
    let mut a0 = vec![0.3; d];
    let mut a1 = vec![0.3; d];
    a0[0] = 0.1;
    a1[0] = 0.9;
    let mut b0 = vec![0.3; d];
    let mut b1 = vec![0.3; d];
    b0[0] = 0.6;
    b1[0] = 0.6;
    b0[1] = 0.1;
    b1[1] = 0.9;
    (Shape::segment(&a0, &a1), Shape::segment(&b0, &b1))
}

struct BatteryRun {
    sup_low: Vec<f64>,
    sup_high: Vec<f64>,
    indicator: Vec<f64>,
    exceed: Vec<(usize, f64)>,
}

fn thinness_battery(cfg: &ExperimentConfig) -> Result<Results> {
    let op = operator(cfg)?;
    let d = cfg.dim;
    let dom = *op.domain();
    let mut res = Results::default();
    let deepest = dom.max_level(1);
    if cfg.levels > deepest {
        return Err(Error::Resolution(format!(
            "levels: {} exceeds the deepest level {deepest} of grid {}",
            cfg.levels, cfg.grid
        )));
    }

    // Deterministic sets, exact.
    let (seg_a, seg_b) = segment_pair(d);
    let set = match &cfg.set {
        Some(p) => Shape::parse(
            &std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("set: cannot read {}: {e}", p.display())))?,
        )?,
        None => seg_a.clone(),
    };
    let thin = deterministic_thin_report(&op, &set, None, 0..=cfg.levels)?;
    for r in &thin {
        res.rows
            .push(ReportRow::plain(r.n, "thin_variance", r.variance, 0.0));
    }
    let tail: Vec<f64> = thin
        .iter()
        .filter(|r| r.n >= 2)
        .map(|r| r.variance)
        .collect();
    let ratio = thin.last().map_or(0.0, |r| r.variance) / thin[0].variance;
    res.criteria.push(Criterion::new(
        "thin_variance_decreasing",
        strictly_decreasing(&tail),
        format!("n >= 2: {}", fmt_series(&tail)),
    ));
    res.criteria.push(Criterion::new(
        "thin_variance_ratio",
        ratio < 0.05,
        format!("final / n=0 = {ratio:.4e}"),
    ));
    let ra = deterministic_thin_report(&op, &seg_a, None, 0..=cfg.levels)?;
    let rb = deterministic_thin_report(&op, &seg_b, None, 0..=cfg.levels)?;
    let ru =
        deterministic_thin_report(&op, &Shape::union(vec![seg_a, seg_b]), None, 0..=cfg.levels)?;
    for r in &ru {
        res.rows
            .push(ReportRow::plain(r.n, "union_variance", r.variance, 0.0));
    }
    let union = union_bound_holds(&ru, &ra, &rb);
    res.criteria.push(Criterion::new(
        "union_cauchy_schwarz",
        union.iter().all(|(_, ok)| *ok),
        "V(A u B) <= V(A) + V(B) + 2 sqrt(V(A) V(B)) per level",
    ));

    // Gaussian tail inequality.
    let p_grid: Vec<f64> = (0..=48)
        .map(|i| 10f64.powf(-6.0 + i as f64 * (6.0 + 0.5f64.log10()) / 48.0))
        .collect();
    let gb = gaussian_bound_check(&[0.0, 0.25, 0.5, 0.75, 0.9], &p_grid, &[0.01, 0.05, 0.1])?;
    res.rows.push(ReportRow::plain(
        0,
        "gb_fitted_constant",
        gb.fitted_constant,
        0.0,
    ));
    res.rows.push(ReportRow::plain(
        0,
        "gb_quadrature_error",
        gb.quadrature_error,
        0.0,
    ));
    for b in &gb.bivariate {
        res.rows.push(ReportRow::plain(
            0,
            format!("gb_bivariate_ratio[rho={};p={}]", b.rho, b.p),
            b.expectation / b.bound,
            0.0,
        ));
    }
    res.criteria.push(Criterion::new(
        "gaussian_bound",
        gb.fitted_constant.is_finite() && gb.bivariate.iter().all(|b| b.holds),
        format!("fitted C = {:.4}", gb.fitted_constant),
    ));

    // Field statistics.
    let beta_low = d as f64 / 2.0 + 0.5;
    let beta_high = d as f64 / 2.0 + 1.5;
    let sup_levels: Vec<usize> = (2..=cfg.levels).filter(|&n| (cfg.grid >> n) >= 2).collect();
    let ind_levels: Vec<usize> = (3..=cfg.levels).collect();
    let diag = Shape::segment(&vec![0.05; d], &vec![0.95; d]);
    let exc_specs = if d == 2 {
        (4..=cfg.levels)
            .filter(|&n| (cfg.grid >> n) >= 2)
            .map(|n| ThresholdSpec::new(&op, n, cfg.strict_paper_constants))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let runs = replicas(cfg, |_, key| {
        let f = op.sample(key);
        Ok(BatteryRun {
            sup_low: sup_levels
                .iter()
                .map(|&n| sup_cell_statistic(&f, beta_low, n, None))
                .collect::<Result<_>>()?,
            sup_high: sup_levels
                .iter()
                .map(|&n| sup_cell_statistic(&f, beta_high, n, None))
                .collect::<Result<_>>()?,
            indicator: ind_levels
                .iter()
                .map(|&n| indicator_sum(&f, &diag, n))
                .collect::<Result<_>>()?,
            exceed: exc_specs
                .iter()
                .map(|s| exceedance_stats(&f, s).map(|e| (e.count, e.sum)))
                .collect::<Result<_>>()?,
        })
    })?;
    let r = runs.len() as f64;
    let median_row = |xs: &[f64], n: usize, name: String| {
        // Large-sample standard error of a median, from the sample spread.
        let s = Summary::from_samples(xs);
        ReportRow::plain(n, name, median(xs), 1.2533 * s.variance().sqrt() / r.sqrt())
    };
    let mut med_low = Vec::new();
    let mut med_high = Vec::new();
    for (k, &n) in sup_levels.iter().enumerate() {
        let lo: Vec<f64> = runs.iter().map(|x| x.sup_low[k]).collect();
        let hi: Vec<f64> = runs.iter().map(|x| x.sup_high[k]).collect();
        let a = median_row(&lo, n, format!("sup_cell_median[beta={beta_low}]"));
        let b = median_row(&hi, n, format!("sup_cell_median[beta={beta_high}]"));
        med_low.push(a.estimate);
        med_high.push(b.estimate);
        res.rows.push(a);
        res.rows.push(b);
    }
    if sup_levels.len() >= 2 {
        res.criteria.push(Criterion::new(
            "sup_cell_below_threshold_decreasing",
            strictly_decreasing(&med_low),
            format!("beta = {beta_low}: {}", fmt_series(&med_low)),
        ));
        res.criteria.push(Criterion::new(
            "sup_cell_above_threshold_not_decreasing",
            med_high.windows(2).all(|w| w[1] >= w[0]),
            format!("beta = {beta_high}: {}", fmt_series(&med_high)),
        ));
    }
    let mut ind = Vec::new();
    for (k, &n) in ind_levels.iter().enumerate() {
        let s = Summary::from_samples(&runs.iter().map(|x| x.indicator[k]).collect::<Vec<_>>());
        ind.push(s.mean);
        res.rows
            .push(ReportRow::plain(n, "indicator_sum_diagonal", s.mean, s.se));
    }
    if ind.len() >= 2 {
        res.criteria.push(Criterion::new(
            "indicator_sum_decreasing",
            strictly_decreasing(&ind),
            fmt_series(&ind),
        ));
    }
    if !exc_specs.is_empty() {
        let mut sums = Vec::new();
        let mut scaled = Vec::new();
        for (k, spec) in exc_specs.iter().enumerate() {
            let n = spec.n;
            let nf = n as f64;
            let s = Summary::from_samples(&runs.iter().map(|x| x.exceed[k].1).collect::<Vec<_>>());
            let c = Summary::from_samples(
                &runs
                    .iter()
                    .map(|x| x.exceed[k].0 as f64)
                    .collect::<Vec<_>>(),
            );
            let norm = nf.sqrt() / 4f64.powi(n as i32);
            sums.push(s.mean);
            scaled.push(c.mean * norm);
            res.rows
                .push(ReportRow::plain(n, "threshold", spec.threshold, 0.0));
            res.rows.push(ReportRow::plain(n, "S_sum", s.mean, s.se));
            res.rows.push(ReportRow::plain(
                n,
                "R_n_scaled",
                c.mean * norm,
                c.se * norm,
            ));
            for &delta in &cfg.deltas {
                let nd = nf.powf(0.5 + delta / 2.0) / 4f64.powi(n as i32);
                res.rows.push(ReportRow::plain(
                    n,
                    format!("R_n_delta[{delta}]"),
                    c.mean * nd,
                    c.se * nd,
                ));
            }
        }
        res.criteria.push(Criterion::new(
            "S_sum_decreasing",
            strictly_decreasing(&sums),
            fmt_series(&sums),
        ));
        let fitted = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        res.criteria.push(Criterion::new(
            "R_n_bounded_below",
            fitted > 0.0,
            format!(
                "fitted constant {fitted:.4e}; series {}",
                fmt_series(&scaled)
            ),
        ));
        for &delta in &cfg.deltas {
            let series: Vec<f64> = exc_specs
                .iter()
                .zip(&scaled)
                .map(|(s, &v)| v * (s.n as f64).powf(delta / 2.0))
                .collect();
            let keeps = series.iter().all(|&v| v >= 0.5 * series[0]);
            res.criteria.push(Criterion::info(
                format!("R_n_delta_trend[{delta}]"),
                keeps,
                format!(
                    "normalized series stays above half its first value: {}",
                    fmt_series(&series)
                ),
            ));
        }
    }
    Ok(res)
}

fn das_validate(cfg: &ExperimentConfig) -> Result<Results> {
    let op = operator(cfg)?;
    let dom = *op.domain();
    let key = StreamKey::from_seed(cfg.seed).derive(tag::SETS);
    let schemes: [Box<dyn DasScheme>; 2] = [
        Box::new(DyadicScheme::new(cfg.dim)),
        Box::new(ShiftedGridScheme::new(cfg.dim)),
    ];
    let mut res = Results::default();
    for s in &schemes {
        let rep = validate_das(s.as_ref(), &dom, 0..=cfg.levels, Some((&op, key)))?;
        let name = &rep.scheme;
        for l in &rep.levels {
            res.rows.push(ReportRow::with_oracle(
                l.n,
                format!("max_overlap[{name}]"),
                l.max_overlap,
                0.0,
                0.0,
            ));
            res.rows.push(ReportRow::plain(
                l.n,
                format!("min_scaled_volume[{name}]"),
                l.min_scaled_volume,
                0.0,
            ));
            res.rows.push(ReportRow::plain(
                l.n,
                format!("max_scaled_diameter[{name}]"),
                l.max_scaled_diameter,
                0.0,
            ));
            res.rows.push(ReportRow::plain(
                l.n,
                format!("null_volume[{name}]"),
                l.null_volume,
                0.0,
            ));
            res.rows.push(ReportRow::plain(
                l.n,
                format!("probe_volume[{name}]"),
                l.probe_volume,
                0.0,
            ));
            if let Some((lo, hi)) = l.variance_ratio {
                res.rows.push(ReportRow::plain(
                    l.n,
                    format!("variance_ratio_min[{name}]"),
                    lo,
                    0.0,
                ));
                res.rows.push(ReportRow::plain(
                    l.n,
                    format!("variance_ratio_max[{name}]"),
                    hi,
                    0.0,
                ));
            }
            if let Some(c) = l.correlation_stat {
                res.rows.push(ReportRow::plain(
                    l.n,
                    format!("correlation_stat[{name}]"),
                    c,
                    0.0,
                ));
            }
        }
        res.rows.push(ReportRow::plain(
            cfg.levels,
            format!("fitted_constant[{name}]"),
            rep.fitted_constant,
            0.0,
        ));
        res.criteria.push(Criterion::new(
            format!("das[{name}]"),
            rep.passed,
            format!(
                "declared C = {:.4}, fitted C = {:.4}",
                rep.constant, rep.fitted_constant
            ),
        ));
    }
    Ok(res)
}

fn green_checks(cfg: &ExperimentConfig) -> Result<Results> {
    let op = operator(cfg)?;
    let d = cfg.dim;
    let mut res = Results::default();
    res.rows.push(ReportRow::plain(
        0,
        "integrated_trace",
        op.integrated_trace(),
        0.0,
    ));
    if cfg.grid >= 16 {
        let pairs = scaling_check(&op, 20, StreamKey::from_seed(cfg.seed))?;
        for (i, p) in pairs.iter().enumerate() {
            res.rows
                .push(ReportRow::plain(i, "scaling_unit", p.unit, 0.0));
            res.rows
                .push(ReportRow::plain(i, "scaling_rescaled", p.rescaled, 0.0));
        }
        let gap = pairs.iter().map(|p| p.relative_gap).fold(0.0, f64::max);
        res.criteria.push(Criterion::new(
            "green_scaling",
            gap < 0.02,
            format!("max relative gap {gap:.3e}"),
        ));
    }
    let top = cfg.levels.min(op.domain().max_level(1));
    let vars = centre_cell_variances(&op, 1..=top)?;
    if d >= 3 {
        let scaled: Vec<f64> = vars
            .iter()
            .map(|&(n, v)| v * 2f64.powi(((d + 2) * n) as i32))
            .collect();
        for (&(n, _), &s) in vars.iter().zip(&scaled) {
            res.rows
                .push(ReportRow::plain(n, "cell_variance_scaled", s, 0.0));
        }
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scaled.iter().copied().fold(0.0, f64::max);
        res.criteria.push(Criterion::new(
            "variance_band",
            hi / lo <= 2.0,
            format!("max/min = {:.3}", hi / lo),
        ));
    } else {
        let kappas = (1..=top)
            .map(|n| lattice_kappa(&op, n))
            .collect::<Result<Vec<_>>>()?;
        for (n, k) in (1..=top).zip(&kappas) {
            res.rows.push(ReportRow::plain(n, "kappa", *k, 0.0));
        }
        if let [.., a, b] = kappas[..] {
            let r = b / a;
            res.criteria.push(Criterion::new(
                "kappa_converges",
                (r - 1.0).abs() < 0.1,
                format!(
                    "kappa_{top} / kappa_{} = {r:.4}; limit estimate {b:.4}",
                    top - 1
                ),
            ));
        }
    }
    Ok(res)
}
