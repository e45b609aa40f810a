//! Command-line front end. [`run`] parses arguments, dispatches to a
//! subcommand and maps failures to exit codes: 2 for bad input, 3 when a
//! numerical error target is not met.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::algebra::{branching_points, case_classify, direction_set, find_pole, key_angles, saddle};
use crate::asymptotics::{classify_direction, green_asymptotic, green_asymptotic_fixed, Approach};
use crate::harmonic::{boundary_structure, drift_direction, escape_prob_down, escape_prob_up};
use crate::laplace::phi;
use crate::model::{presets, validate, RawParams, SkewInput};
use crate::montecarlo::{self as mc, Functionals, Rect, Scheme, SimConfig};
use crate::oracle::{green_axis, green_contour, QuadratureSpec, SourceForm};
use crate::{CovMatrix, Drift, Error, ModelParams, Point, SkewVector, C64};

/// `%.17g`: 17 significant digits, trailing zeros removed.
pub fn fmt_g17(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..17).contains(&exp) {
        trim(&format!("{:.*}", (16 - exp) as usize, x))
    } else {
        format!("{}e{}", trim(mant), exp)
    }
}

/// Pretty JSON whose floats use [`fmt_g17`].
struct G17Formatter(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for G17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_g17(v).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17Formatter(serde_json::ser::PrettyFormatter::new()));
    v.serialize(&mut ser).expect("serializable output");
    String::from_utf8(buf).unwrap()
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Model(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "layered-green", version, about = "Green's functions of a two-layer skew diffusion in the plane")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Symmetric,
    Asymmetric,
    Pole,
    Drifted,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// JSON parameter file.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Built-in parameter set, used when no file is given.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Override `s11,s12,s22` of the upper covariance.
    #[arg(long, value_parser = parse_cov)]
    sigma_plus: Option<CovMatrix>,
    #[arg(long, value_parser = parse_cov)]
    sigma_minus: Option<CovMatrix>,
    /// Override the upper drift `m1,m2`.
    #[arg(long, value_parser = parse_pair)]
    mu_plus: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_pair)]
    mu_minus: Option<(f64, f64)>,
    /// Override the skew vector: `q1,q2` or `divergence`.
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulation horizon; defaults to a drift- and variance-based value.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, value_enum, default_value_t = SchemeArg::SkewStep)]
    scheme: SchemeArg,
    /// Local-time band half-width (band scheme); defaults to √dt.
    #[arg(long)]
    band: Option<f64>,
    /// Disable the two-band extrapolation of local-time functionals.
    #[arg(long)]
    no_richardson: bool,
    /// Worker threads; 0 reads LAYERED_GREEN_THREADS, then uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Band,
    SkewStep,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Auto,
    OverX,
    OverY,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum EstimateArg {
    Escape,
    Phi,
    Green,
    Boundary,
}

#[derive(Subcommand)]
enum Command {
    /// Validate parameters and print them in input form.
    Validate(ModelArgs),
    /// Branching points, key angles, case, the set M and the pole.
    Classify(ModelArgs),
    /// Same report as `classify`.
    BranchPoints(ModelArgs),
    /// Saddle points for a list of angles.
    Saddle {
        #[command(flatten)]
        model: ModelArgs,
        /// Angles as a list `a,b,…` or a range `lo:hi:n`.
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
    },
    /// The transform φ on a grid, as CSV.
    Phi {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        z0: (f64, f64),
        /// Real parts: list or range.
        #[arg(long, allow_hyphen_values = true)]
        re: String,
        /// Imaginary parts: list or range.
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        im: String,
    },
    /// Leading asymptotic term of the Green's function.
    Asymptote {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        z0: (f64, f64),
        #[arg(long)]
        r: f64,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        /// Direction path `α(r) = α + c·r^{−p}` given as `c,p`.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        path: Option<(f64, f64)>,
        /// Logarithmic window exponent `s` at a key angle.
        #[arg(long)]
        log_window: Option<f64>,
        /// Prescribed limit `c,side` of the scale criterion.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        limit: Option<(f64, f64)>,
    },
    /// Green's function by contour integration.
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        z0: (f64, f64),
        /// Target off the axis.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        target: Option<(f64, f64)>,
        /// Axis point `u` for the density on the interface.
        #[arg(long, allow_hyphen_values = true)]
        axis: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Fixed contour abscissa `−ε`.
        #[arg(long, allow_hyphen_values = true)]
        epsilon: Option<f64>,
        #[arg(long, value_enum, default_value_t = FormArg::Auto)]
        form: FormArg,
    },
    /// Monte Carlo estimates.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        z0: (f64, f64),
        /// JSON list of boxes `{"a":[lo,hi],"b":[lo,hi]}`.
        #[arg(long)]
        boxes: Option<PathBuf>,
        /// Axis intervals `lo,hi`, repeatable.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        interval: Vec<(f64, f64)>,
        /// Transform arguments for the local-time functional.
        #[arg(long, allow_hyphen_values = true)]
        phi_x: Option<String>,
        #[arg(long, value_enum)]
        estimate: Option<EstimateArg>,
        /// Per-path CSV output.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Closed-form escape probabilities from height `b0`.
    Escape {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        b0: f64,
    },
    /// Martin boundary structure.
    Martin(ModelArgs),
    /// CSV sweep of asymptotic against numerical values.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        z0: (f64, f64),
        /// Radii: list, range `lo:hi:n` or `log:lo:hi:n`.
        #[arg(long)]
        r: String,
        /// Angles: list or range; `mu+` and `mu-` name the drift directions.
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[arg(long)]
        with_oracle: bool,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Output file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quick checks of exact identities and elementary properties.
    Selftest,
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect()
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    match parse_floats(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected two comma-separated numbers, got {s:?}")),
    }
}

fn parse_cov(s: &str) -> std::result::Result<CovMatrix, String> {
    match parse_floats(s)?.as_slice() {
        [a, b, c] => Ok(CovMatrix::new(*a, *b, *c)),
        _ => Err(format!("expected s11,s12,s22, got {s:?}")),
    }
}

/// A list `a,b,…`, a linear range `lo:hi:n` or a geometric range `log:lo:hi:n`.
pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let (log, body) = match s.strip_prefix("log:") {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    if !body.contains(':') {
        return if log { Err("log ranges need lo:hi:n".into()) } else { parse_floats(body) };
    }
    let parts: Vec<&str> = body.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(format!("expected lo:hi:n, got {s:?}"));
    };
    let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| "bad lower bound")?, hi.parse().map_err(|_| "bad upper bound")?);
    let n: usize = n.parse().map_err(|_| "bad count")?;
    if n == 0 {
        return Err("empty grid".into());
    }
    if log && !(lo > 0.0 && hi > 0.0) {
        return Err("log ranges need positive bounds".into());
    }
    Ok((0..n)
        .map(|i| {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            if log {
                (lo.ln() + t * (hi.ln() - lo.ln())).exp()
            } else {
                lo + t * (hi - lo)
            }
        })
        .collect())
}

fn load_params(m: &ModelArgs) -> CliResult<ModelParams> {
    let mut raw: RawParams = match (&m.params, m.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        (None, Some(p)) => match p {
            Preset::Symmetric => presets::symmetric(),
            Preset::Asymmetric => presets::asymmetric(),
            Preset::Pole => presets::with_pole(),
            Preset::Drifted => presets::drifted(),
        }
        .to_raw(),
        (None, None) => return Err(CliError::Input("one of --params or --preset is required".into())),
    };
    if let Some(s) = m.sigma_plus {
        raw.sigma_plus = s;
    }
    if let Some(s) = m.sigma_minus {
        raw.sigma_minus = s;
    }
    if let Some((a, b)) = m.mu_plus {
        raw.mu_plus = Drift::new(a, b);
    }
    if let Some((a, b)) = m.mu_minus {
        raw.mu_minus = Drift::new(a, b);
    }
    if let Some(q) = &m.q {
        raw.q = if q == "divergence" {
            SkewInput::Keyword(q.clone())
        } else {
            let (a, b) = parse_pair(q).map_err(CliError::Input)?;
            SkewInput::Vector(SkewVector::new(a, b))
        };
    }
    Ok(validate(&raw)?)
}

fn point((a, b): (f64, f64)) -> Point {
    Point::new(a, b)
}

fn or_error<T: Serialize>(r: crate::Result<T>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap(),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn classify_report(p: &ModelParams) -> Value {
    json!({
        "branch_points": branching_points(p),
        "angles_key": or_error(key_angles(p)),
        "case": or_error(case_classify(p)),
        "direction_set": or_error(direction_set(p).map(|d| d.intervals)),
        "pole": or_error(find_pole(p)),
        "is_divergence_form": p.is_divergence_form(),
    })
}

fn alpha_grid(p: &ModelParams, s: &str) -> CliResult<Vec<f64>> {
    if s.contains(':') {
        return parse_grid(s).map_err(CliError::Input);
    }
    s.split(',')
        .map(|t| match t.trim() {
            "mu+" => Ok(drift_direction(p, true)),
            "mu-" => Ok(drift_direction(p, false)),
            "pi" => Ok(PI),
            v => v.parse::<f64>().map_err(|e| CliError::Input(format!("{v:?}: {e}"))),
        })
        .collect()
}

fn sim_config(s: &SimArgs) -> SimConfig {
    let mut cfg = SimConfig::new(s.dt, s.paths, s.seed);
    cfg.horizon = s.horizon;
    cfg.scheme = match s.scheme {
        SchemeArg::Band => Scheme::Band,
        SchemeArg::SkewStep => Scheme::SkewStep,
    };
    if let Some(b) = s.band {
        cfg.band_epsilon = b;
    }
    cfg.richardson = !s.no_richardson;
    cfg.threads = s.threads;
    cfg
}

fn write_dump(path: &PathBuf, recs: &[mc::PathRecord], f: &Functionals) -> CliResult<()> {
    let mut out = io::BufWriter::new(std::fs::File::create(path)?);
    let mut header = vec!["index".to_string()];
    header.extend((0..f.boxes.len()).map(|k| format!("box_{k}")));
    header.extend((0..f.intervals.len()).map(|k| format!("boundary_{k}")));
    header.extend((0..f.phi_x.len()).map(|k| format!("phi_{k}")));
    header.extend(["local_time", "end_a", "end_b", "last_axis_time", "steps"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for r in recs {
        let mut row = vec![r.index.to_string()];
        row.extend(r.box_time.iter().chain(&r.boundary).chain(&r.phi).map(|&v| fmt_g17(v)));
        row.extend([r.local_time, r.end.a, r.end.b, r.last_axis_time].map(fmt_g17));
        row.push(r.steps.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn simulate(
    p: &ModelParams,
    sim: &SimArgs,
    z0: Point,
    boxes: &Option<PathBuf>,
    intervals: &[(f64, f64)],
    phi_x: &Option<String>,
    estimate: Option<EstimateArg>,
    dump: &Option<PathBuf>,
) -> CliResult<Value> {
    let cfg = sim_config(sim);
    let boxes: Vec<Rect> = match boxes {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => Vec::new(),
    };
    let phi_x = match phi_x {
        Some(s) => parse_floats(s).map_err(CliError::Input)?,
        None => Vec::new(),
    };
    let mut out = json!({
        "config": cfg,
        "horizon": cfg.horizon_for(p),
        "notes": mc::assumption_notes(p, &cfg),
    });
    let need = |what: &str, empty: bool| if empty { Err(CliError::Input(format!("--estimate needs {what}"))) } else { Ok(()) };
    match estimate {
        Some(EstimateArg::Escape) => {
            let e = mc::escape_estimate(p, z0, &cfg)?;
            out["escape"] = json!(e);
            out["closed_form"] = json!({ "up": escape_prob_up(p, z0.b)?, "down": escape_prob_down(p, z0.b)? });
        }
        Some(EstimateArg::Green) => {
            need("--boxes", boxes.is_empty())?;
            out["green"] = json!(mc::green_measure(p, z0, &boxes, &cfg)?);
        }
        Some(EstimateArg::Boundary) => {
            need("--interval", intervals.is_empty())?;
            let est: crate::Result<Vec<_>> = intervals.iter().map(|&i| mc::boundary_measure(p, z0, i, &cfg)).collect();
            out["boundary"] = json!(est?);
        }
        Some(EstimateArg::Phi) => {
            need("--phi-x", phi_x.is_empty())?;
            let mut rows = Vec::new();
            for &x in &phi_x {
                let e = mc::phi_estimate(p, z0, x, &cfg)?;
                rows.push(json!({ "x": x, "estimate": e, "closed_form": phi(p, z0, C64::new(x, 0.0))?.re }));
            }
            out["phi"] = json!(rows);
        }
        None => {}
    }
    if estimate.is_none() || dump.is_some() {
        if boxes.iter().any(|r| r.b.0 <= cfg.band_epsilon && r.b.1 >= -cfg.band_epsilon) {
            return Err(Error::BoxTouchesAxis.into());
        }
        let f = Functionals { boxes, intervals: intervals.to_vec(), phi_x, ..Default::default() };
        let recs = mc::simulate_paths(p, z0, &cfg, &f)?;
        if estimate.is_none() {
            let col = |g: &dyn Fn(&mc::PathRecord) -> f64| mc::estimate(recs.iter().map(g));
            out["boxes"] = json!((0..f.boxes.len()).map(|k| col(&|r| r.box_time[k])).collect::<Vec<_>>());
            out["intervals"] = json!((0..f.intervals.len()).map(|k| col(&|r| r.boundary[k])).collect::<Vec<_>>());
            out["phi_x"] = json!((0..f.phi_x.len()).map(|k| col(&|r| r.phi[k])).collect::<Vec<_>>());
            out["local_time"] = json!(col(&|r| r.local_time));
            out["end_upper_fraction"] = json!(col(&|r| (r.end.b > 0.0) as u8 as f64));
        }
        if let Some(path) = dump {
            write_dump(path, &recs, &f)?;
        }
    }
    Ok(out)
}

fn sweep_rows(p: &ModelParams, z0: Point, rs: &[f64], alphas: &[f64], with_oracle: bool, tol: f64) -> CliResult<String> {
    if rs.is_empty() || alphas.is_empty() {
        return Err(CliError::Input("grids must be non-empty".into()));
    }
    if rs.iter().any(|&r| !(r > 0.0)) {
        return Err(CliError::Input("radii must be positive".into()));
    }
    let spec = QuadratureSpec::with_tol(tol);
    let mut s = String::from("r,alpha,regime,asymptotic_value,oracle_value,ratio\n");
    for &alpha in alphas {
        for &r in rs {
            let a = green_asymptotic_fixed(p, z0, r, alpha)?;
            let (ov, ratio) = if with_oracle {
                let t = Point::polar(r, alpha);
                let v = if t.b.abs() < 1e-12 * r { green_axis(p, z0, t.a, &spec)?.value } else { green_contour(p, z0, t, &spec)?.value };
                (fmt_g17(v), fmt_g17(v / a.value))
            } else {
                (String::new(), String::new())
            };
            s += &format!("{},{},{},{},{},{}\n", fmt_g17(r), fmt_g17(alpha), a.regime.tag(), fmt_g17(a.value), ov, ratio);
        }
    }
    Ok(s)
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult<bool> {
    match cmd {
        Command::Validate(m) => {
            let p = load_params(&m)?;
            let mut v = serde_json::to_value(p.to_raw()).unwrap();
            v["is_divergence_form"] = json!(p.is_divergence_form());
            writeln!(out, "{}", to_json(&v))?;
        }
        Command::Classify(m) | Command::BranchPoints(m) => {
            let p = load_params(&m)?;
            writeln!(out, "{}", to_json(&classify_report(&p)))?;
        }
        Command::Saddle { model, alpha } => {
            let p = load_params(&model)?;
            let pts: crate::Result<Vec<_>> = alpha_grid(&p, &alpha)?.into_iter().map(|a| saddle(&p, a)).collect();
            writeln!(out, "{}", to_json(&pts?))?;
        }
        Command::Phi { model, z0, re, im } => {
            let p = load_params(&model)?;
            let (re, im) = (parse_grid(&re).map_err(CliError::Input)?, parse_grid(&im).map_err(CliError::Input)?);
            writeln!(out, "re_x,im_x,re_phi,im_phi")?;
            for &y in &im {
                for &x in &re {
                    // Points on a cut or at the pole have no value.
                    let (a, b) = match phi(&p, point(z0), C64::new(x, y)) {
                        Ok(v) => (fmt_g17(v.re), fmt_g17(v.im)),
                        Err(_) => (String::new(), String::new()),
                    };
                    writeln!(out, "{},{},{a},{b}", fmt_g17(x), fmt_g17(y))?;
                }
            }
        }
        Command::Asymptote { model, z0, r, alpha, path, log_window, limit } => {
            let p = load_params(&model)?;
            let given = path.is_some() as u8 + log_window.is_some() as u8 + limit.is_some() as u8;
            if given > 1 {
                return Err(CliError::Input("give at most one of --path, --log-window, --limit".into()));
            }
            let (approach, at) = match (path, log_window, limit) {
                (Some((c, pw)), _, _) => (Approach::Power { c, p: pw }, alpha + c * r.powf(-pw)),
                (_, Some(s), _) => (Approach::LogWindow { s }, alpha),
                (_, _, Some((c, side))) => (Approach::Limit { c, side }, alpha),
                _ => (Approach::Fixed, alpha),
            };
            let regime = classify_direction(&p, alpha, approach)?;
            let res = green_asymptotic(&p, point(z0), r, at, regime)?;
            let mut v = serde_json::to_value(res).unwrap();
            v["regime_tag"] = json!(regime.tag());
            v["regime_label"] = json!(regime.label());
            writeln!(out, "{}", to_json(&v))?;
        }
        Command::Oracle { model, z0, target, axis, tol, epsilon, form } => {
            let p = load_params(&model)?;
            let mut spec = QuadratureSpec::with_tol(tol);
            spec.epsilon = epsilon;
            spec.source_form = match form {
                FormArg::Auto => SourceForm::Auto,
                FormArg::OverX => SourceForm::OverX,
                FormArg::OverY => SourceForm::OverY,
            };
            let g = match (target, axis) {
                (Some(t), None) => green_contour(&p, point(z0), point(t), &spec)?,
                (None, Some(u)) => green_axis(&p, point(z0), u, &spec)?,
                _ => return Err(CliError::Input("give exactly one of --target and --axis".into())),
            };
            writeln!(out, "{}", to_json(&g))?;
        }
        Command::Simulate { model, sim, z0, boxes, interval, phi_x, estimate, dump } => {
            let p = load_params(&model)?;
            let v = simulate(&p, &sim, point(z0), &boxes, &interval, &phi_x, estimate, &dump)?;
            writeln!(out, "{}", to_json(&v))?;
        }
        Command::Escape { model, b0 } => {
            let p = load_params(&model)?;
            let v = json!({ "b0": b0, "up": escape_prob_up(&p, b0)?, "down": escape_prob_down(&p, b0)? });
            writeln!(out, "{}", to_json(&v))?;
        }
        Command::Martin(m) => {
            let p = load_params(&m)?;
            writeln!(out, "{}", to_json(&boundary_structure(&p)?))?;
        }
        Command::Sweep { model, z0, r, alpha, with_oracle, tol, out: path } => {
            let p = load_params(&model)?;
            let rs = parse_grid(&r).map_err(CliError::Input)?;
            let alphas = alpha_grid(&p, &alpha)?;
            let csv = sweep_rows(&p, point(z0), &rs, &alphas, with_oracle, tol)?;
            match path {
                Some(path) => std::fs::write(path, csv)?,
                None => out.write_all(csv.as_bytes())?,
            }
        }
        Command::Selftest => {
            let mut ok = true;
            for (name, result) in crate::selftest::run_all() {
                match result {
                    Ok(()) => writeln!(out, "ok   {name}")?,
                    Err(msg) => {
                        ok = false;
                        writeln!(out, "FAIL {name}: {msg}")?;
                    }
                }
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

/// Runs the command line `argv` (including the program name), writing results
/// to `out` and diagnostics to `err`. Returns the process exit code.
pub fn run_with(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(true) => 0,
        Ok(false) => 3,
        Err(CliError::Input(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
        Err(CliError::Model(e)) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

pub fn run(argv: &[String]) -> i32 {
    let (stdout, stderr) = (io::stdout(), io::stderr());
    let code = run_with(argv, &mut stdout.lock(), &mut stderr.lock());
    let _ = io::stdout().flush();
    code
}
