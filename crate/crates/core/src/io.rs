//! Run configuration, field snapshots and CSV helpers.
//!
//! Config files are flat `key = value` lines. `#` starts a comment, keys may
//! be dotted (`flow.dt`), and a `[section]` line prefixes the keys after it.
//!
//! Snapshot files start with the header line
//! `YMHD1 <n_side> <length> <group> <fiber_dim>` followed by one row per node:
//! the algebra coordinates of `A_x` then `A_y`, the three coordinates of `u`,
//! then the two spinor components as interleaved real/imaginary parts. Text
//! payloads use 17 significant digits; binary payloads are little-endian
//! `f64` with no separators.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::blowup::ScanConfig;
use crate::error::{Result, YmhdError};
use crate::fields::{FieldState, GaugeField, SectionField, Spinor, TwistedSpinorField};
use crate::geometry::{Domain, GammaConvention};
use crate::lie::{Group, LieAlgebraElement, Model, DEFAULT_INNER_SCALE};
use crate::solver::{FlowConfig, FlowMode};

type C64 = Complex64;

pub const SNAPSHOT_TAG: &str = "YMHD1";
/// Fiber S² sits in R³.
pub const FIBER_DIM: usize = 2;
const K: usize = FIBER_DIM + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputMode {
    Text,
    Binary,
}

impl OutputMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "text" => Some(OutputMode::Text),
            "binary" => Some(OutputMode::Binary),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OutputMode::Text => "text",
            OutputMode::Binary => "binary",
        }
    }
}

/// Initial data for `flow` when no snapshot is given.
#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    /// A = 0, ψ = 0, u at the north pole.
    Zero,
    /// A = 0, ψ = 0, u constant at `point` (normalized).
    Constant { point: [f64; 3] },
    /// Constant map plus a smooth random perturbation of size `amplitude`.
    PerturbedConstant { amplitude: f64 },
    /// Seeded random smooth fields.
    RandomSmooth { amplitude: f64 },
    /// Periodic degree-one bubble.
    Bubble { center: (f64, f64), lambda: f64 },
    /// Read from a snapshot file.
    Snapshot(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RescaleSettings {
    pub center: (f64, f64),
    pub factor: f64,
    pub target_n: usize,
    pub target_length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeFixSettings {
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n_side: usize,
    pub length: f64,
    pub group: Group,
    pub fiber_dim: usize,
    pub inner_scale: f64,
    pub gamma: GammaConvention,
    pub flow: FlowConfig,
    pub init: InitSpec,
    pub scan: ScanConfig,
    pub rescale: RescaleSettings,
    pub gauge_fix: GaugeFixSettings,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub snapshot_interval: usize,
    pub output_mode: OutputMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        let length = 1.0;
        RunConfig {
            n_side: 32,
            length,
            group: Group::U1,
            fiber_dim: FIBER_DIM,
            inner_scale: DEFAULT_INNER_SCALE,
            gamma: GammaConvention::Standard,
            flow: FlowConfig::default(),
            init: InitSpec::Zero,
            scan: ScanConfig::default_for(length),
            rescale: RescaleSettings {
                center: (0.5 * length, 0.5 * length),
                factor: 0.25,
                target_n: 64,
                target_length: length,
            },
            gauge_fix: GaugeFixSettings {
                tol: 1e-6,
                max_iter: 500,
            },
            seed: 0,
            output_dir: PathBuf::from("out"),
            snapshot_interval: 0,
            output_mode: OutputMode::Text,
        }
    }
}

fn config_err(line: usize, msg: impl Into<String>) -> YmhdError {
    YmhdError::Config {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| config_err(line, format!("{key}: cannot parse '{v}'")))
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|t| parse_num::<f64>(line, key, t.trim()))
        .collect()
}

fn parse_pair(line: usize, key: &str, v: &str) -> Result<(f64, f64)> {
    match parse_list(line, key, v)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(config_err(line, format!("{key}: expected two comma-separated numbers"))),
    }
}

impl RunConfig {
    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.n_side, self.length)
    }

    pub fn model(&self) -> Model {
        Model {
            group: self.group,
            inner_scale: self.inner_scale,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses a config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        let mut radii_set = false;
        let mut init_kind: Option<(usize, String)> = None;
        let mut init_amp = None;
        let mut init_center = None;
        let mut init_lambda = None;
        let mut init_point = None;
        let mut init_path = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if body.starts_with('[') {
                if !body.ends_with(']') || body.len() < 3 {
                    return Err(config_err(line, format!("malformed section header '{body}'")));
                }
                section = body[1..body.len() - 1].trim().to_string();
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(config_err(line, format!("expected 'key = value', got '{body}'")));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(config_err(line, "empty key or value"));
            }
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            match key.as_str() {
                "domain.n_side" => cfg.n_side = parse_num(line, &key, v)?,
                "domain.length" => cfg.length = parse_num(line, &key, v)?,
                "group" | "domain.group" => {
                    cfg.group = Group::parse(v)
                        .ok_or_else(|| config_err(line, format!("group must be u1 or su2, got '{v}'")))?
                }
                "fiber_dim" | "domain.fiber_dim" => cfg.fiber_dim = parse_num(line, &key, v)?,
                "action.inner_scale" => cfg.inner_scale = parse_num(line, &key, v)?,
                "action.gamma" | "gamma.convention" => {
                    cfg.gamma = GammaConvention::parse(v)
                        .ok_or_else(|| config_err(line, format!("unknown gamma convention '{v}'")))?
                }
                "flow.mode" => {
                    cfg.flow.mode = FlowMode::parse(v).ok_or_else(|| {
                        config_err(
                            line,
                            format!("flow.mode must be harmonic_section_flow, coupled_flow or alternating_dirac, got '{v}'"),
                        )
                    })?
                }
                "flow.dt" => cfg.flow.dt = parse_num(line, &key, v)?,
                "flow.max_steps" => cfg.flow.max_steps = parse_num(line, &key, v)?,
                "flow.tol" | "flow.tol_residual" => cfg.flow.tol_residual = parse_num(line, &key, v)?,
                "flow.psi_norm" => cfg.flow.psi_norm = parse_num(line, &key, v)?,
                "flow.check_interval" => cfg.flow.check_interval = parse_num(line, &key, v)?,
                "flow.inner_steps" => cfg.flow.inner_steps = parse_num(line, &key, v)?,
                "init.kind" => init_kind = Some((line, v.to_string())),
                "init.amplitude" => init_amp = Some(parse_num::<f64>(line, &key, v)?),
                "init.center" => init_center = Some(parse_pair(line, &key, v)?),
                "init.lambda" => init_lambda = Some(parse_num::<f64>(line, &key, v)?),
                "init.point" => {
                    let p = parse_list(line, &key, v)?;
                    if p.len() != 3 {
                        return Err(config_err(line, "init.point needs three coordinates"));
                    }
                    init_point = Some([p[0], p[1], p[2]]);
                }
                "init.snapshot" => init_path = Some(PathBuf::from(v)),
                "diagnostics.epsilon0" => cfg.scan.epsilon0 = parse_num(line, &key, v)?,
                "diagnostics.radii" => {
                    cfg.scan.radii = parse_list(line, &key, v)?;
                    radii_set = true;
                }
                "diagnostics.stride" => cfg.scan.stride = parse_num(line, &key, v)?,
                "rescale.center" => cfg.rescale.center = parse_pair(line, &key, v)?,
                "rescale.factor" => cfg.rescale.factor = parse_num(line, &key, v)?,
                "rescale.n_side" => cfg.rescale.target_n = parse_num(line, &key, v)?,
                "rescale.length" => cfg.rescale.target_length = parse_num(line, &key, v)?,
                "gauge_fix.tol" => cfg.gauge_fix.tol = parse_num(line, &key, v)?,
                "gauge_fix.max_iter" => cfg.gauge_fix.max_iter = parse_num(line, &key, v)?,
                "seed" => cfg.seed = parse_num(line, &key, v)?,
                "output.dir" => cfg.output_dir = PathBuf::from(v),
                "output.snapshot_interval" => cfg.snapshot_interval = parse_num(line, &key, v)?,
                "output.mode" => {
                    cfg.output_mode = OutputMode::parse(v)
                        .ok_or_else(|| config_err(line, format!("output.mode must be text or binary, got '{v}'")))?
                }
                _ => return Err(config_err(line, format!("unknown key '{key}'"))),
            }
        }
        if !radii_set {
            cfg.scan.radii = ScanConfig::default_for(cfg.length).radii;
        }
        if let Some((line, kind)) = init_kind {
            cfg.init = match kind.as_str() {
                "zero" => InitSpec::Zero,
                "constant" => InitSpec::Constant {
                    point: init_point.unwrap_or([0.0, 0.0, 1.0]),
                },
                "perturbed_constant" => InitSpec::PerturbedConstant {
                    amplitude: init_amp.unwrap_or(0.3),
                },
                "random_smooth" => InitSpec::RandomSmooth {
                    amplitude: init_amp.unwrap_or(0.3),
                },
                "bubble" => InitSpec::Bubble {
                    center: init_center.unwrap_or((0.5 * cfg.length, 0.5 * cfg.length)),
                    lambda: init_lambda.unwrap_or(cfg.length / 16.0),
                },
                "snapshot" => InitSpec::Snapshot(
                    init_path.ok_or_else(|| config_err(line, "init.kind = snapshot needs init.snapshot"))?,
                ),
                _ => {
                    return Err(config_err(
                        line,
                        format!("init.kind must be zero, constant, perturbed_constant, random_smooth, bubble or snapshot, got '{kind}'"),
                    ))
                }
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks ranges that span several keys. Errors carry line 0.
    pub fn validate(&self) -> Result<()> {
        if self.fiber_dim != FIBER_DIM {
            return Err(config_err(0, format!("fiber_dim must be {FIBER_DIM}, got {}", self.fiber_dim)));
        }
        if !self.n_side.is_power_of_two() || self.n_side < 4 {
            return Err(config_err(
                0,
                format!("domain.n_side must be a power of two ≥ 4 for the Fourier Poisson solver, got {}", self.n_side),
            ));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(config_err(0, "domain.length must be positive"));
        }
        if !(self.inner_scale > 0.0 && self.inner_scale.is_finite()) {
            return Err(config_err(0, "action.inner_scale must be positive"));
        }
        self.flow.validate().map_err(|e| config_err(0, e.to_string()))?;
        if !(self.scan.epsilon0 > 0.0) || self.scan.radii.is_empty() || self.scan.stride == 0 {
            return Err(config_err(0, "diagnostics need epsilon0 > 0, at least one radius and stride ≥ 1"));
        }
        if self.scan.radii.iter().any(|&r| !(r > 0.0 && r <= 0.5 * self.length)) {
            return Err(config_err(0, "diagnostics.radii must lie in (0, length/2]"));
        }
        if self.scan.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err(0, "diagnostics.radii must be strictly increasing"));
        }
        if self.rescale.target_n < 4 || !(self.rescale.target_length > 0.0) {
            return Err(config_err(0, "rescale.n_side ≥ 4 and rescale.length > 0 required"));
        }
        Ok(())
    }

    /// The flow settings with the run seed and snapshot interval applied.
    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            seed: self.seed,
            snapshot_interval: self.snapshot_interval,
            ..self.flow.clone()
        }
    }
}

fn format_err(source: &str, msg: impl Into<String>) -> YmhdError {
    YmhdError::Format {
        source_name: source.to_string(),
        msg: msg.into(),
    }
}

/// Values per node: A, u, ψ.
pub fn values_per_node(group: Group) -> usize {
    2 * group.dim() + K + 4 * K
}

fn header_line(state: &FieldState) -> String {
    format!(
        "{SNAPSHOT_TAG} {} {:?} {} {FIBER_DIM}",
        state.domain.n(),
        state.domain.length(),
        state.group().name()
    )
}

fn payload(state: &FieldState) -> Vec<f64> {
    let d = state.group().dim();
    let mut out = Vec::with_capacity(state.domain.len() * values_per_node(state.group()));
    for k in 0..state.domain.len() {
        for dir in 0..2 {
            out.extend_from_slice(&state.gauge.comp(dir)[k].coords()[..d]);
        }
        out.extend(state.section.values()[k].iter());
        for c in 0..2 {
            for z in state.spinor.values()[k][c].iter() {
                out.push(z.re);
                out.push(z.im);
            }
        }
    }
    out
}

/// Serializes a state. Snapshots carry no conformal factor.
pub fn encode_snapshot(state: &FieldState, mode: OutputMode) -> Result<Vec<u8>> {
    if !state.domain.is_flat() {
        return Err(YmhdError::Unsupported("snapshots of conformally weighted domains".into()));
    }
    let mut buf = header_line(state).into_bytes();
    buf.push(b'\n');
    let vals = payload(state);
    let per = values_per_node(state.group());
    match mode {
        OutputMode::Binary => {
            for v in vals {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        OutputMode::Text => {
            for row in vals.chunks(per) {
                let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                buf.extend_from_slice(line.join(" ").as_bytes());
                buf.push(b'\n');
            }
        }
    }
    Ok(buf)
}

/// Parsed header of a snapshot file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub n_side: usize,
    pub length: f64,
    pub group: Group,
    pub fiber_dim: usize,
}

fn split_header<'a>(bytes: &'a [u8], source: &str) -> Result<(SnapshotHeader, &'a [u8])> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| format_err(source, "missing header line"))?;
    let head = std::str::from_utf8(&bytes[..nl]).map_err(|_| format_err(source, "header is not UTF-8"))?;
    let parts: Vec<&str> = head.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != SNAPSHOT_TAG {
        return Err(format_err(source, format!("bad header '{head}'")));
    }
    let n_side: usize = parts[1]
        .parse()
        .map_err(|_| format_err(source, format!("bad n_side '{}'", parts[1])))?;
    let length: f64 = parts[2]
        .parse()
        .map_err(|_| format_err(source, format!("bad length '{}'", parts[2])))?;
    let group = Group::parse(parts[3]).ok_or_else(|| format_err(source, format!("bad group '{}'", parts[3])))?;
    let fiber_dim: usize = parts[4]
        .parse()
        .map_err(|_| format_err(source, format!("bad fiber_dim '{}'", parts[4])))?;
    if fiber_dim != FIBER_DIM {
        return Err(format_err(source, format!("fiber_dim {fiber_dim} is not supported")));
    }
    Ok((
        SnapshotHeader {
            n_side,
            length,
            group,
            fiber_dim,
        },
        &bytes[nl + 1..],
    ))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

pub fn read_snapshot_header(path: &Path) -> Result<SnapshotHeader> {
    let bytes = read_file(path)?;
    Ok(split_header(&bytes, &path.display().to_string())?.0)
}

/// Parses a snapshot; text or binary payloads are told apart by size.
pub fn decode_snapshot(bytes: &[u8], source: &str) -> Result<FieldState> {
    let (h, body) = split_header(bytes, source)?;
    let dom = Domain::new(h.n_side, h.length).map_err(|e| format_err(source, e.to_string()))?;
    let per = values_per_node(h.group);
    let count = dom.len() * per;
    let vals: Vec<f64> = if body.len() == 8 * count {
        body.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    } else {
        let text = std::str::from_utf8(body).map_err(|_| {
            format_err(
                source,
                format!("payload of {} bytes is neither {} binary values nor text", body.len(), count),
            )
        })?;
        let v: std::result::Result<Vec<f64>, _> = text.split_whitespace().map(str::parse::<f64>).collect();
        let v = v.map_err(|_| format_err(source, "unparsable number in text payload"))?;
        if v.len() != count {
            return Err(format_err(source, format!("expected {count} values, found {}", v.len())));
        }
        v
    };
    state_from_values(&dom, h.group, &vals).map_err(|e| format_err(source, e.to_string()))
}

fn state_from_values(dom: &Domain, group: Group, vals: &[f64]) -> Result<FieldState> {
    let d = group.dim();
    let per = values_per_node(group);
    let mut ax = Vec::with_capacity(dom.len());
    let mut ay = Vec::with_capacity(dom.len());
    let mut u = Vec::with_capacity(dom.len());
    let mut psi: Vec<Spinor> = Vec::with_capacity(dom.len());
    for row in vals.chunks_exact(per) {
        ax.push(LieAlgebraElement::from_coords(group, &row[..d]));
        ay.push(LieAlgebraElement::from_coords(group, &row[d..2 * d]));
        let o = 2 * d;
        u.push(Vector3::new(row[o], row[o + 1], row[o + 2]));
        let s = &row[o + K..];
        let c = |m: usize| C64::new(s[2 * m], s[2 * m + 1]);
        psi.push([Vector3::new(c(0), c(1), c(2)), Vector3::new(c(3), c(4), c(5))]);
    }
    let section = SectionField::new(u)?;
    let spinor = TwistedSpinorField::new(psi, &section)?;
    FieldState::new(dom.clone(), Model::new(group), GaugeField::new(group, [ax, ay])?, section, spinor)
}

pub fn write_snapshot(path: &Path, state: &FieldState, mode: OutputMode) -> Result<()> {
    let bytes = encode_snapshot(state, mode)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<FieldState> {
    let bytes = read_file(path)?;
    decode_snapshot(&bytes, &path.display().to_string())
}

/// Per-node values as `n_side` rows of `n_side` comma-separated numbers;
/// row `i` holds nodes `(i, 0..n)`.
pub fn write_grid_csv<W: Write>(w: W, dom: &Domain, values: &[f64]) -> Result<()> {
    if values.len() != dom.len() {
        return Err(YmhdError::structural("grid values do not match domain"));
    }
    let mut w = BufWriter::new(w);
    for row in values.chunks(dom.n()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| format_err("grid csv", format!("row {i}: cannot parse '{t}'")))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::random_state;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn parses_sections_dotted_keys_and_comments() {
        let text = "\
# comment line
seed = 7
group = su2   # trailing comment
[domain]
n_side = 64
length = 2.5
[flow]
mode = coupled_flow
dt = 1e-3
diagnostics.radii = 0.1, 0.2
[output]
mode = binary
";
        let c = RunConfig::parse(text);
        // `diagnostics.radii` inside [flow] becomes flow.diagnostics.radii
        assert!(matches!(c, Err(YmhdError::Config { line: 10, .. })));
        let text = text.replace("diagnostics.radii = 0.1, 0.2\n", "");
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.group, Group::Su2);
        assert_eq!((c.n_side, c.length), (64, 2.5));
        assert_eq!(c.flow.mode, FlowMode::CoupledFlow);
        assert_eq!(c.flow.dt, 1e-3);
        assert_eq!(c.output_mode, OutputMode::Binary);
        assert_eq!(c.scan.radii, ScanConfig::default_for(2.5).radii);
    }

    #[test]
    fn config_errors_name_the_line() {
        for (text, line) in [
            ("seed = 1\ngroup = so3\n", 2),
            ("\n\nflow.dt = fast\n", 3),
            ("nonsense\n", 1),
            ("a.b = 1\n", 1),
            ("[domain\n", 1),
            ("init.kind = snapshot\n", 1),
        ] {
            match RunConfig::parse(text) {
                Err(YmhdError::Config { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(matches!(RunConfig::parse("domain.n_side = 48\n"), Err(YmhdError::Config { .. })));
        assert!(matches!(RunConfig::parse("fiber_dim = 3\n"), Err(YmhdError::Config { .. })));
    }

    #[test]
    fn init_specs_parse() {
        let c = RunConfig::parse("init.kind = bubble\ninit.center = 0.25, 0.5\ninit.lambda = 0.05\n").unwrap();
        assert_eq!(c.init, InitSpec::Bubble { center: (0.25, 0.5), lambda: 0.05 });
        let c = RunConfig::parse("init.kind = snapshot\ninit.snapshot = a/b.ymhd\n").unwrap();
        assert_eq!(c.init, InitSpec::Snapshot(PathBuf::from("a/b.ymhd")));
    }

    fn sample(group: Group) -> FieldState {
        let dom = Domain::new(8, 1.7).unwrap();
        random_state(&dom, Model::new(group), 11, 0.4, 0.3).unwrap()
    }

    #[test]
    fn binary_round_trip_is_exact() {
        for g in [Group::U1, Group::Su2] {
            let s = sample(g);
            let bytes = encode_snapshot(&s, OutputMode::Binary).unwrap();
            let back = decode_snapshot(&bytes, "mem").unwrap();
            assert_eq!(back, s);
            assert_eq!(encode_snapshot(&back, OutputMode::Binary).unwrap(), bytes);
        }
    }

    #[test]
    fn text_round_trip_to_last_digit() {
        for g in [Group::U1, Group::Su2] {
            let s = sample(g);
            let bytes = encode_snapshot(&s, OutputMode::Text).unwrap();
            let back = decode_snapshot(&bytes, "mem").unwrap();
            for (a, b) in payload(&s).iter().zip(payload(&back)) {
                assert!((a - b).abs() <= 1e-15 * a.abs(), "{a} vs {b}");
            }
            let text = String::from_utf8(bytes).unwrap();
            assert_eq!(text.lines().count(), 1 + 64);
            assert_eq!(
                text.lines().nth(1).unwrap().split(' ').count(),
                values_per_node(g)
            );
        }
    }

    #[test]
    fn header_and_payload_are_checked() {
        let s = sample(Group::U1);
        let mut bytes = encode_snapshot(&s, OutputMode::Text).unwrap();
        assert!(bytes.starts_with(b"YMHD1 8 1.7 u1 2\n"));
        bytes.truncate(bytes.len() - 40);
        assert!(matches!(decode_snapshot(&bytes, "x"), Err(YmhdError::Format { .. })));
        let bad = b"YMHD2 8 1.7 u1 2\n";
        assert!(matches!(decode_snapshot(bad, "x"), Err(YmhdError::Format { .. })));
        let bad = b"YMHD1 8 1.7 u1 3\n";
        assert!(matches!(decode_snapshot(bad, "x"), Err(YmhdError::Format { .. })));
    }

    #[test]
    fn non_unit_section_is_rejected() {
        let s = sample(Group::U1);
        let mut v = payload(&s);
        v[2] *= 1.5;
        let mut bytes = header_line(&s).into_bytes();
        bytes.push(b'\n');
        for x in v {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        assert!(matches!(decode_snapshot(&bytes, "x"), Err(YmhdError::Format { .. })));
    }

    #[test]
    fn grid_csv_round_trip() {
        let dom = Domain::new(4, 1.0).unwrap();
        let v: Vec<f64> = (0..16).map(|k| k as f64 / 3.0).collect();
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &dom, &v).unwrap();
        let rows = read_grid_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows.concat(), v);
    }
}
