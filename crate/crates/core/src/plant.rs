//! Black-box plants, dataset collection and the CSV dataset format.
//!
//! A dataset file starts with one metadata comment line followed by one
//! sample per row, `x_1,…,x_n,u_1,…,u_m,x'_1,…,x'_n`:
//!
//! ```text
//! # n=1 m=1 role=scenario seed=42 count=2 space=22.5:26.5,0:1
//! 24.1,0.5,24.05
//! 23.0,0.25,22.9
//! ```
//!
//! `n`, `m`, `role` and `seed` are required; `count` and `space` are written
//! by this crate and checked when present.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dim, sample_uniform, HyperRect, SampleSpace};
use crate::io::write_atomic;

/// Simulator of an unknown transition map `x' = f(x, u)`.
pub trait System: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn step(&self, x: &[f64], u: &[f64]) -> std::result::Result<Vec<f64>, String>;

    /// Whether `step` may be called from several threads at once.
    fn reentrant(&self) -> bool {
        true
    }

    fn name(&self) -> String;
}

pub const ROOM_OUTSIDE_TEMP: f64 = 15.0;
pub const ROOM_HEATER_TEMP: f64 = 45.0;
pub const ROOM_ALPHA_E: f64 = 8e-3;
pub const ROOM_ALPHA_H: f64 = 3.6e-3;
pub const ROOM_TAU: f64 = 5.0;

/// One step of the heated-room model.
pub fn step_room(x: f64, u: f64) -> f64 {
    x + ROOM_TAU
        * (ROOM_ALPHA_E * (ROOM_OUTSIDE_TEMP - x) + ROOM_ALPHA_H * (ROOM_HEATER_TEMP - x) * u)
}

/// Built-in single-room temperature plant (`room-temp`).
#[derive(Debug, Clone, Copy, Default)]
pub struct RoomTemperature;

impl System for RoomTemperature {
    fn state_dim(&self) -> usize {
        1
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &[f64], u: &[f64]) -> std::result::Result<Vec<f64>, String> {
        Ok(vec![step_room(x[0], u[0])])
    }

    fn name(&self) -> String {
        "room-temp".into()
    }
}

/// Plant simulated by a child process. Each query writes one line
/// `x_1 … x_n u_1 … u_m` to its stdin and reads one line `x'_1 … x'_n`.
pub struct ProcessPlant {
    command: Vec<String>,
    state_dim: usize,
    input_dim: usize,
    io: Mutex<ProcessIo>,
}

struct ProcessIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ProcessPlant {
    pub fn spawn(command: &[String], state_dim: usize, input_dim: usize) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::config("plant.command", "empty command"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            command: command.to_vec(),
            state_dim,
            input_dim,
            io: Mutex::new(ProcessIo {
                child,
                stdin,
                stdout,
            }),
        })
    }
}

impl System for ProcessPlant {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn step(&self, x: &[f64], u: &[f64]) -> std::result::Result<Vec<f64>, String> {
        let mut io = self.io.lock().map_err(|_| "plant process lock poisoned".to_string())?;
        let query: Vec<String> = x.iter().chain(u).map(|v| format!("{v:?}")).collect();
        writeln!(io.stdin, "{}", query.join(" ")).map_err(|e| e.to_string())?;
        io.stdin.flush().map_err(|e| e.to_string())?;
        let mut line = String::new();
        let read = io.stdout.read_line(&mut line).map_err(|e| e.to_string())?;
        if read == 0 {
            return Err("plant process closed its output".into());
        }
        let next: Vec<f64> = line
            .split_whitespace()
            .map(f64::from_str)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("unparseable plant reply {:?}: {e}", line.trim()))?;
        if next.len() != self.state_dim {
            return Err(format!(
                "plant replied with {} values, expected {}",
                next.len(),
                self.state_dim
            ));
        }
        Ok(next)
    }

    fn reentrant(&self) -> bool {
        false
    }

    fn name(&self) -> String {
        self.command.join(" ")
    }
}

impl Drop for ProcessPlant {
    fn drop(&mut self) {
        if let Ok(io) = self.io.get_mut() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}

/// One observed transition `(x, u, x')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub x_next: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetRole {
    Scenario,
    Validation,
}

impl fmt::Display for DatasetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetRole::Scenario => "scenario",
            DatasetRole::Validation => "validation",
        })
    }
}

impl FromStr for DatasetRole {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "scenario" => Ok(DatasetRole::Scenario),
            "validation" => Ok(DatasetRole::Validation),
            other => Err(format!("unknown dataset role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub state_dim: usize,
    pub input_dim: usize,
    pub samples: Vec<Sample>,
    pub seed: u64,
    /// Space the samples were drawn from; absent for files written elsewhere.
    pub space: Option<SampleSpace>,
    pub role: DatasetRole,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Draws `count` state-input pairs uniformly from `space` and queries the
/// plant once per pair. Sample order is sample index order.
pub fn collect(
    system: &dyn System,
    space: &SampleSpace,
    count: usize,
    seed: u64,
    role: DatasetRole,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::Domain("dataset needs at least one sample".into()));
    }
    let (n, m) = (system.state_dim(), system.input_dim());
    check_dim(n + m, space.dim())?;
    let points = sample_uniform(space, count, seed);
    let query = |(index, p): (usize, &Vec<f64>)| -> Result<Sample> {
        let (x, u) = p.split_at(n);
        let x_next = system
            .step(x, u)
            .map_err(|message| Error::Plant { index, message })?;
        if x_next.len() != n {
            return Err(Error::Plant {
                index,
                message: format!("returned {} values, expected {n}", x_next.len()),
            });
        }
        Ok(Sample {
            x: x.to_vec(),
            u: u.to_vec(),
            x_next,
        })
    };
    let samples = if system.reentrant() {
        // keep every outcome so the reported failure is the lowest index
        let outcomes: Vec<Result<Sample>> = points.par_iter().enumerate().map(query).collect();
        outcomes.into_iter().collect::<Result<Vec<_>>>()?
    } else {
        points
            .iter()
            .enumerate()
            .map(query)
            .collect::<Result<Vec<_>>>()?
    };
    Ok(Dataset {
        state_dim: n,
        input_dim: m,
        samples,
        seed,
        space: Some(space.clone()),
        role,
    })
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(d.len() * 48 + 128);
    out.push_str(&format!(
        "# n={} m={} role={} seed={} count={}",
        d.state_dim,
        d.input_dim,
        d.role,
        d.seed,
        d.len()
    ));
    if let Some(space) = &d.space {
        let axes: Vec<String> = space
            .rect()
            .intervals()
            .iter()
            .map(|[lo, hi]| format!("{lo:?}:{hi:?}"))
            .collect();
        out.push_str(&format!(" space={}", axes.join(",")));
    }
    out.push('\n');
    for s in &d.samples {
        let fields: Vec<String> = s
            .x
            .iter()
            .chain(&s.u)
            .chain(&s.x_next)
            .map(|v| format!("{v:?}"))
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

struct Header {
    n: usize,
    m: usize,
    role: DatasetRole,
    seed: u64,
    count: Option<usize>,
    space: Option<SampleSpace>,
}

fn parse_header(line: &str) -> Result<Header> {
    let err = |message: String| Error::Parse { line: 1, message };
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| err("missing `#` metadata header".into()))?;
    let (mut n, mut m, mut role, mut seed, mut count, mut space) = (None, None, None, None, None, None);
    for token in body.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| err(format!("malformed header field `{token}`")))?;
        let bad = |e: &dyn fmt::Display| err(format!("header field `{key}`: {e}"));
        match key {
            "n" => n = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "m" => m = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "role" => role = Some(value.parse::<DatasetRole>().map_err(|e| bad(&e))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(&e))?),
            "count" => count = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "space" => {
                let mut lower = Vec::new();
                let mut upper = Vec::new();
                for axis in value.split(',') {
                    let (lo, hi) = axis
                        .split_once(':')
                        .ok_or_else(|| bad(&format!("axis `{axis}` is not lo:hi")))?;
                    lower.push(lo.parse::<f64>().map_err(|e| bad(&e))?);
                    upper.push(hi.parse::<f64>().map_err(|e| bad(&e))?);
                }
                let rect = HyperRect::new(lower, upper).map_err(|e| bad(&e))?;
                space = Some(SampleSpace::new(rect).map_err(|e| bad(&e))?);
            }
            other => return Err(err(format!("unknown header field `{other}`"))),
        }
    }
    let missing = |k: &str| err(format!("header is missing `{k}`"));
    Ok(Header {
        n: n.ok_or_else(|| missing("n"))?,
        m: m.ok_or_else(|| missing("m"))?,
        role: role.ok_or_else(|| missing("role"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        count,
        space,
    })
}

fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let header = parse_header(lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?)?;
    if header.n == 0 || header.m == 0 {
        return Err(Error::Schema("state and input dimensions must be positive".into()));
    }
    if let Some(space) = &header.space {
        if space.dim() != header.n + header.m {
            return Err(Error::Schema(format!(
                "space has {} axes but n+m = {}",
                space.dim(),
                header.n + header.m
            )));
        }
    }
    let width = 2 * header.n + header.m;
    let mut samples = Vec::with_capacity(header.count.unwrap_or(0));
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
        if values.len() != width {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {width} fields, found {}", values.len()),
            });
        }
        let (x, rest) = values.split_at(header.n);
        let (u, x_next) = rest.split_at(header.m);
        samples.push(Sample {
            x: x.to_vec(),
            u: u.to_vec(),
            x_next: x_next.to_vec(),
        });
    }
    if let Some(count) = header.count {
        if !text.ends_with('\n') {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: "file truncated: last row has no line terminator".into(),
            });
        }
        if count != samples.len() {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: format!("header declares {count} samples, file holds {}", samples.len()),
            });
        }
    }
    Ok(Dataset {
        state_dim: header.n,
        input_dim: header.m,
        samples,
        seed: header.seed,
        space: header.space,
        role: header.role,
    })
}
