//! One pipeline per subcommand. Each parses its parameter block before computing
//! and returns the files to write plus an optional verdict.

use std::sync::Arc;
use std::time::Instant;

use colombeau_core::embedding::{window, Cutoff};
use colombeau_core::experiments::{
    multiplication_theorem, run_hurd_sattinger, run_multiplication_example, GammaChoice, HSConfig, MultiplyConfig,
};
use colombeau_core::graph::{estimate_graph, fmt17, BaseGrid, GraphParams, ReparamFamily};
use colombeau_core::microlocal::{wavefront, DecayParams, DirectionGrid, WavefrontEstimate, WavefrontParams};
use colombeau_core::nets::{classify_net, AsymptoticTag};
use colombeau_core::pullback::{estimate_df, CBoundedMap, DfParams, TheoremReport};
use colombeau_core::statphase::{modulated_phase, verify_statphase, PhaseNet, StatPhaseParams};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{MapSpec, NetSpec, NumberSpec, RunConfig};

pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    /// `None` when the subcommand only measures.
    pub verdict: Option<bool>,
    pub stages: Vec<(String, f64)>,
}

#[derive(Default)]
struct Recorder {
    files: Vec<(String, Vec<u8>)>,
    stages: Vec<(String, f64)>,
}

impl Recorder {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let clock = Instant::now();
        let out = f();
        self.stages.push((name.into(), clock.elapsed().as_secs_f64()));
        out
    }

    fn csv(&mut self, name: &str, body: String) {
        self.files.push((name.into(), body.into_bytes()));
    }

    fn json(&mut self, name: &str, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        self.files.push((name.into(), text.into_bytes()));
    }

    fn finish(self, verdict: Option<bool>) -> Outcome {
        Outcome { files: self.files, verdict, stages: self.stages }
    }
}

type Run = Result<Outcome, String>;

fn core<T>(r: colombeau_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| match e {
        colombeau_core::Error::ResolutionExceeded { .. } => {
            format!("{e}; lower the finest eps level (--eps-levels) or coarsen the cells (--resolution)")
        }
        e => e.to_string(),
    })
}

fn verdict_str(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn dispatch(subcommand: &str, cfg: &RunConfig) -> Run {
    match subcommand {
        "classify" => classify(cfg),
        "graph" => graph(cfg),
        "wavefront" => wavefront_cmd(cfg),
        "pullback" => pullback(cfg),
        "statphase" => statphase(cfg),
        "hurd-sattinger" => hurd_sattinger(cfg),
        "multiply" => multiply(cfg),
        "check-theorem" => check_theorem(cfg),
        other => Err(format!("unknown subcommand {other}")),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyCfg {
    nets: Vec<LabelledNumber>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelledNumber {
    label: String,
    net: NumberSpec,
    #[serde(default)]
    expect: Option<AsymptoticTag>,
}

fn classify(cfg: &RunConfig) -> Run {
    let p: ClassifyCfg = cfg.params()?;
    if p.nets.is_empty() {
        return Err("config: params.nets must list at least one net".into());
    }
    let grid = cfg.eps.grid()?;
    let params = cfg.thresholds.classify();
    let mut rec = Recorder::default();
    let rows = rec.stage("classify", || {
        p.nets
            .iter()
            .map(|n| {
                let net = n.net.sample(&grid)?;
                Ok((n, core(classify_net(&net, &params))?))
            })
            .collect::<Result<Vec<_>, String>>()
    })?;
    let mut csv = String::from("label,tag,exponent,residual,expected\n");
    let mut entries = Vec::new();
    let mut pass = true;
    for (n, c) in &rows {
        let expected = n.expect.map(|t| format!("{t:?}")).unwrap_or_default();
        pass &= n.expect.is_none_or(|t| t == c.tag);
        csv.push_str(&format!("{},{:?},{},{},{}\n", n.label, c.tag, fmt17(c.exponent), fmt17(c.residual), expected));
        entries.push(json!({"label": n.label, "class": c, "expect": n.expect}));
    }
    let checked = p.nets.iter().any(|n| n.expect.is_some());
    let verdict = checked.then_some(pass);
    rec.csv("classify.csv", csv);
    rec.json("classify.json", &json!({"nets": entries, "verdict": verdict.map(verdict_str)}));
    Ok(rec.finish(verdict))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphCfg {
    net: NetSpec,
    base: Vec<(f64, f64)>,
    #[serde(default)]
    fiber: Option<Vec<(f64, f64)>>,
    /// Fiber cell side; the run resolution when absent.
    #[serde(default)]
    h2: Option<f64>,
    #[serde(default = "six")]
    levels: usize,
    #[serde(default = "sixty_four")]
    points_per_level: usize,
    #[serde(default = "reparams")]
    reparams: Vec<f64>,
    /// Every fiber must lie within `2 h₂` of this interval in the Hausdorff distance.
    #[serde(default)]
    expect_fiber: Option<(f64, f64)>,
}

fn six() -> usize {
    6
}

fn sixty_four() -> usize {
    64
}

fn reparams() -> Vec<f64> {
    ReparamFamily::default().exponents
}

fn graph(cfg: &RunConfig) -> Run {
    let p: GraphCfg = cfg.params()?;
    let grid = cfg.eps.grid()?;
    let h1 = cfg.resolution.unwrap_or(0.05);
    let h2 = p.h2.unwrap_or(h1);
    if !(h2 > 0.0) {
        return Err("config: params.h2 must be positive".into());
    }
    if p.reparams.iter().any(|&a| !(a >= 1.0)) {
        return Err("config: params.reparams exponents must be >= 1".into());
    }
    let f = p.net.build(cfg.mollifier)?;
    let base = core(BaseGrid::new(p.base.clone(), h1))?;
    let params = GraphParams {
        h1,
        h2,
        levels: p.levels,
        points_per_level: p.points_per_level,
        reparams: ReparamFamily { exponents: p.reparams.clone() },
        freeze_delta: false,
        seed: cfg.seed,
    };
    let mut rec = Recorder::default();
    let est = rec.stage("graph", || core(estimate_graph(&f, &base, p.fiber.clone(), &grid, &params)))?;
    let mut doc = serde_json::to_value(est.to_document()).expect("graph document is plain data");
    let verdict = p.expect_fiber.map(|(a, b)| {
        let worst = est.fibers.iter().map(|c| c.hausdorff_to_interval(a, b)).fold(0.0, f64::max);
        doc["worst_hausdorff"] = json!(worst);
        worst <= 2.0 * h2
    });
    doc["occupied"] = json!(est.occupied_count());
    doc["verdict"] = json!(verdict.map(verdict_str));
    rec.csv("graph.csv", est.to_csv());
    rec.json("graph.json", &doc);
    Ok(rec.finish(verdict))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WavefrontCfg {
    net: NetSpec,
    region: Vec<(f64, f64)>,
    #[serde(default = "sixty_four")]
    n_dir: usize,
    #[serde(default = "widths")]
    widths: Vec<f64>,
    /// Points whose cells make up the expected singular support.
    #[serde(default)]
    expect_singular_support: Option<Vec<Vec<f64>>>,
}

fn widths() -> Vec<f64> {
    WavefrontParams::default().widths
}

fn wavefront_params(cfg: &RunConfig, n_dir: usize, widths: Vec<f64>) -> Result<WavefrontParams, String> {
    Ok(WavefrontParams {
        widths,
        n_dir,
        grid: cfg.eps.grid()?,
        decay: DecayParams { p_max: cfg.thresholds.p_max, n_cap: cfg.thresholds.n_cap, ..DecayParams::default() },
    })
}

fn wavefront_cmd(cfg: &RunConfig) -> Run {
    let p: WavefrontCfg = cfg.params()?;
    let h = cfg.resolution.unwrap_or(0.25);
    let params = wavefront_params(cfg, p.n_dir, p.widths.clone())?;
    let u = p.net.build(cfg.mollifier)?;
    let mut rec = Recorder::default();
    let est = rec.stage("wavefront", || core(wavefront(&u, p.region.clone(), h, &params)))?;
    let mut doc = est.summary_json();
    let verdict = match &p.expect_singular_support {
        Some(points) => Some(singular_support_matches(&est, points)?),
        None => None,
    };
    doc["verdict"] = json!(verdict.map(verdict_str));
    rec.csv("wavefront.csv", est.to_csv());
    rec.json("wavefront.json", &doc);
    Ok(rec.finish(verdict))
}

/// Every expected cell is singular and every singular cell neighbours an expected one.
fn singular_support_matches(est: &WavefrontEstimate, points: &[Vec<f64>]) -> Result<bool, String> {
    let base = &est.cones.base;
    let cells = points
        .iter()
        .map(|x| base.index_of(x).ok_or_else(|| format!("config: expected point {x:?} outside the region")))
        .collect::<Result<Vec<usize>, String>>()?;
    let ss = &est.singular_support;
    let covered = cells.iter().all(|c| ss.contains(c));
    let near = ss.iter().all(|&s| cells.iter().any(|&c| est.cones.cell_neighbours(c).contains(&s)));
    Ok(covered && near)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PullbackCfg {
    map: MapSpec,
    #[serde(default = "unit_square")]
    domain: Vec<(f64, f64)>,
    #[serde(default = "sixteen")]
    n_dir: usize,
    #[serde(default = "radius_x")]
    radius_x: f64,
    #[serde(default = "five")]
    samples: usize,
}

fn unit_square() -> Vec<(f64, f64)> {
    vec![(-1.0, 1.0), (-1.0, 1.0)]
}

fn sixteen() -> usize {
    16
}

fn five() -> usize {
    5
}

fn radius_x() -> f64 {
    DfParams::default().radius_x
}

fn pullback(cfg: &RunConfig) -> Run {
    let p: PullbackCfg = cfg.params()?;
    let h = cfg.resolution.unwrap_or(0.25);
    let grid = cfg.eps.grid()?;
    let dirs = core(DirectionGrid::new(2, p.n_dir))?;
    let base = core(BaseGrid::new(p.domain.clone(), h))?;
    let params = DfParams {
        radius_x: p.radius_x,
        radius_eta: dirs.step(),
        samples_x: p.samples,
        samples_eta: p.samples,
        grid_slack: cfg.thresholds.grid_slack,
        grid: grid.clone(),
        classify: cfg.thresholds.classify(),
    };
    let mut rec = Recorder::default();
    let f = rec.stage("c_bounded", || core(CBoundedMap::new(p.map.build(), p.domain.clone(), &grid)))?;
    let df = rec.stage("df", || core(estimate_df(&f, &base, &dirs, &params)))?;
    let mut csv = String::from("x_center,y_center,angle,in_df\n");
    for (c, row) in df.in_df.iter().enumerate() {
        let x = base.center(c);
        for (d, &inside) in row.iter().enumerate() {
            csv.push_str(&format!("{},{},{},{}\n", fmt17(x[0]), fmt17(x[1]), fmt17(dirs.angles[d]), u8::from(inside)));
        }
    }
    let excluded: usize = df.in_df.iter().map(|r| r.iter().filter(|&&b| !b).count()).sum();
    rec.csv("df.csv", csv);
    rec.json(
        "pullback.json",
        &json!({
            "witness": f.witness,
            "base": base,
            "n_dir": dirs.len(),
            "pairs": base.len() * dirs.len(),
            "excluded_pairs": excluded,
            "df_empty": df.is_empty(),
        }),
    );
    Ok(rec.finish(None))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PhaseSpec {
    /// `x + a γ_ε sin(x/γ_ε)`.
    Modulated { a: f64, gamma: GammaChoice },
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatphaseCfg {
    phase: PhaseSpec,
    #[serde(default = "unit_constant")]
    amplitude: NetSpec,
    cutoff: Cutoff,
    k: Vec<(f64, f64)>,
    m: Vec<(f64, f64)>,
    #[serde(default = "four")]
    k_max: usize,
    #[serde(default = "omegas")]
    omegas: Vec<f64>,
}

fn unit_constant() -> NetSpec {
    NetSpec::Constant { dim: 1, value: 1.0 }
}

fn four() -> usize {
    4
}

fn omegas() -> Vec<f64> {
    (4..=10).map(|j| 2f64.powi(j)).collect()
}

fn statphase(cfg: &RunConfig) -> Run {
    let p: StatphaseCfg = cfg.params()?;
    let grid = cfg.eps.grid()?;
    let phi = match &p.phase {
        PhaseSpec::Modulated { a, gamma } => {
            let g = *gamma;
            modulated_phase(*a, Arc::new(move |e| g.value(e)))
        }
        PhaseSpec::Polynomial { coeffs } => NetSpec::Polynomial { coeffs: coeffs.clone() }.build(cfg.mollifier)?,
    };
    let phase = core(PhaseNet::new(phi, p.k.clone(), p.m.clone()))?;
    let u = core(window(&p.amplitude.build(cfg.mollifier)?, &core(Cutoff::new(p.cutoff.center.clone(), p.cutoff.width))?))?;
    let params = StatPhaseParams::default();
    let mut rec = Recorder::default();
    let report = rec.stage("statphase", || core(verify_statphase(&u, &phase, p.k_max, &p.omegas, &grid, &params)))?;
    rec.csv("statphase.csv", report.to_csv());
    rec.json("statphase.json", &report.summary_json());
    Ok(rec.finish(Some(report.pass)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HsCfg {
    #[serde(default = "sixteen")]
    row_stride: usize,
    #[serde(default)]
    setup: HSConfig,
}

fn hurd_sattinger(cfg: &RunConfig) -> Run {
    let p: HsCfg = cfg.params()?;
    let mut setup = p.setup;
    setup.eps_levels = cfg.eps.levels();
    setup.rho = cfg.mollifier;
    if let Some(h) = cfg.resolution {
        setup.wf_h = h;
    }
    core(setup.validate())?;
    let mut rec = Recorder::default();
    let run = core(run_hurd_sattinger(&setup, p.row_stride.max(1)))?;
    let t = &run.timings;
    rec.stages.extend([
        ("flow".to_string(), t.flow_s),
        ("bounds".to_string(), t.bounds_s),
        ("residual".to_string(), t.residual_s),
        ("mass".to_string(), t.mass_s),
        ("wavefront".to_string(), t.wavefront_s),
    ]);
    let mut summary = run.summary_json();
    if let Some(m) = summary.as_object_mut() {
        m.remove("timings");
    }
    rec.csv("figure.csv", run.figure_csv());
    rec.json("summary.json", &summary);
    Ok(rec.finish(Some(run.pass())))
}

fn multiply_config(cfg: &RunConfig) -> Result<MultiplyConfig, String> {
    let mut m: MultiplyConfig = cfg.params()?;
    m.line_levels = cfg.eps.levels();
    m.rho = cfg.mollifier;
    if let Some(h) = cfg.resolution {
        m.h = h;
    }
    Ok(m)
}

fn violations_csv(t: &TheoremReport) -> String {
    let mut s = String::from("x_center,y_center,angle\n");
    for v in &t.violations {
        s.push_str(&format!("{},{},{}\n", fmt17(v.center[0]), fmt17(v.center[1]), fmt17(v.angle)));
    }
    s
}

fn multiply(cfg: &RunConfig) -> Run {
    let m = multiply_config(cfg)?;
    let mut rec = Recorder::default();
    let report = rec.stage("multiply", || core(run_multiplication_example(&m)))?;
    let pass = report.violations == 0 && report.product_at_origin;
    let mut doc = serde_json::to_value(&report).expect("report is plain data");
    doc["config"] = json!(m);
    doc["verdict"] = json!(verdict_str(pass));
    rec.csv("wf_u.csv", report.wf_u_estimate.to_csv());
    rec.csv("wf_v.csv", report.wf_v_estimate.to_csv());
    rec.csv("violations.csv", violations_csv(&report.theorem));
    rec.json("multiply.json", &doc);
    Ok(rec.finish(Some(pass)))
}

fn check_theorem(cfg: &RunConfig) -> Run {
    let m = multiply_config(cfg)?;
    let mut rec = Recorder::default();
    let report = rec.stage("check_theorem", || core(multiplication_theorem(&m)))?;
    let pass = report.violations.is_empty();
    let mut doc = serde_json::to_value(&report).expect("report is plain data");
    doc["verdict"] = json!(verdict_str(pass));
    rec.csv("violations.csv", violations_csv(&report));
    rec.json("theorem.json", &doc);
    Ok(rec.finish(Some(pass)))
}
