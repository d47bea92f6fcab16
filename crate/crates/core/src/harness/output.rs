//! Output writers: versioned diagnostics CSV, fixed-point iteration log,
//! legacy structured-points field files with a reader, and the run summary.

use crate::coupler::{CoupledProblem, CoupledState, IterationRecord, StepRecord};
use crate::diagnostics::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::fluid::StaggeredOps;
use crate::number_density::marginalize;
use crate::stress::kramers_stress;
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub const OUTPUT_ROOT_ENV: &str = "POLYSHELL_OUTPUT_ROOT";
pub const DIAGNOSTICS_SCHEMA: &str = "# schema: polyshell.diagnostics v1";
pub const ITERATIONS_SCHEMA: &str = "# schema: polyshell.iterations v1";

/// Directory a run writes into: `dir` itself when absolute, otherwise
/// `dir` below the output root (`$POLYSHELL_OUTPUT_ROOT`, else the current
/// directory).
pub fn output_dir(dir: &str) -> PathBuf {
    let d = Path::new(dir);
    if d.is_absolute() {
        return d.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(d),
        _ => d.to_path_buf(),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `text` to `path`, surfacing failures with the path.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// CSV file with a leading schema line.
pub struct CsvTable {
    pub schema: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(schema: &str, columns: &[&str]) -> Self {
        CsvTable { schema: schema.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::io(path, e);
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(file, "{}", self.schema).map_err(io)?;
        {
            let mut w = csv::Writer::from_writer(&mut file);
            let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
            w.write_record(&self.columns).map_err(csv_err)?;
            for row in &self.rows {
                w.write_record(row.iter().map(|x| format!("{x:e}"))).map_err(csv_err)?;
            }
            w.flush().map_err(io)?;
        }
        file.flush().map_err(io)
    }

    /// Reads a table written by [`CsvTable::write`].
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |m: &str| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string()));
        let (schema, body) = text.split_once('\n').ok_or_else(|| bad("missing schema line"))?;
        if !schema.starts_with("# schema:") {
            return Err(bad("missing schema line"));
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns = r.headers().map_err(|_| bad("bad header"))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|_| bad("bad record"))?;
            rows.push(rec.iter().map(|s| s.parse::<f64>().map_err(|_| bad("bad number"))).collect::<Result<Vec<_>>>()?);
        }
        Ok(CsvTable { schema: schema.to_string(), columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

const STEP_COLUMNS: [&str; 9] = ["step", "min_psi", "xi_max", "sup_eta", "max_divergence", "convection_work", "trace_error", "window", "iterations"];

/// The per-step diagnostics table: every energy term and accumulator plus
/// the solver health columns. Row 0 is the initial state.
pub fn diagnostics_table(initial: &EnergyBreakdown, records: &[StepRecord], every: usize) -> CsvTable {
    let mut cols: Vec<&str> = EnergyBreakdown::CSV_COLUMNS.to_vec();
    cols.extend_from_slice(&STEP_COLUMNS);
    let mut t = CsvTable::new(DIAGNOSTICS_SCHEMA, &cols);
    let mut row0 = initial.csv_values().to_vec();
    row0.extend_from_slice(&[0.0, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN]);
    t.push(row0);
    for (n, r) in records.iter().enumerate() {
        let step = n + 1;
        if step % every != 0 && step != records.len() {
            continue;
        }
        let mut row = r.breakdown.csv_values().to_vec();
        row.extend_from_slice(&[
            step as f64,
            r.min_psi,
            r.xi_max,
            r.sup_eta,
            r.max_divergence,
            r.convection_work,
            r.trace_error,
            r.window as f64,
            r.iterations as f64,
        ]);
        t.push(row);
    }
    t
}

pub fn iterations_table(log: &[IterationRecord]) -> CsvTable {
    let mut t = CsvTable::new(ITERATIONS_SCHEMA, &["window", "t0", "steps", "iteration", "residual", "norm"]);
    for r in log {
        t.push(vec![r.window as f64, r.t0, r.steps as f64, r.iteration as f64, r.residual, r.norm]);
    }
    t
}

/// Fields of one instant on the reference cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub scalars: Vec<(String, Vec<f64>)>,
    pub vectors: Vec<(String, Vec<[f64; 3]>)>,
    pub tensors: Vec<(String, Vec<[[f64; 3]; 3]>)>,
}

/// Grid header of a structured-points file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl GridSpec {
    pub fn points(&self) -> usize {
        self.dims.iter().product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrayKind {
    Scalars,
    Vectors,
    Tensors,
}

impl ArrayKind {
    pub fn components(&self) -> usize {
        match self {
            ArrayKind::Scalars => 1,
            ArrayKind::Vectors => 3,
            ArrayKind::Tensors => 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldArray {
    pub name: String,
    pub kind: ArrayKind,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub grid: GridSpec,
    pub times: Vec<f64>,
    pub arrays: Vec<FieldArray>,
}

/// Name of array `name` of snapshot `k` in the file.
pub fn array_name(name: &str, k: usize) -> String {
    format!("{name}_s{k:04}")
}

fn render_fields(grid: &GridSpec, snaps: &[Snapshot]) -> Result<String> {
    let n = grid.points();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "polyshell fields");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} {}", grid.dims[0], grid.dims[1], grid.dims[2]);
    let _ = writeln!(s, "SPACING {:e} {:e} {:e}", grid.spacing[0], grid.spacing[1], grid.spacing[2]);
    let _ = writeln!(s, "ORIGIN {:e} {:e} {:e}", grid.origin[0], grid.origin[1], grid.origin[2]);
    if snaps.is_empty() {
        return Ok(s);
    }
    let _ = writeln!(s, "FIELD FieldData 1");
    let _ = writeln!(s, "TIME 1 {} double", snaps.len());
    let _ = writeln!(s, "{}", snaps.iter().map(|x| format!("{:e}", x.t)).collect::<Vec<_>>().join(" "));
    let _ = writeln!(s, "POINT_DATA {n}");
    let wrong = |name: &str| Error::Config(format!("field {name} does not match the grid of {n} points"));
    for (k, snap) in snaps.iter().enumerate() {
        for (name, vals) in &snap.scalars {
            if vals.len() != n {
                return Err(wrong(name));
            }
            let _ = writeln!(s, "SCALARS {} double 1", array_name(name, k));
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for v in vals {
                let _ = writeln!(s, "{v:e}");
            }
        }
        for (name, vals) in &snap.vectors {
            if vals.len() != n {
                return Err(wrong(name));
            }
            let _ = writeln!(s, "VECTORS {} double", array_name(name, k));
            for v in vals {
                let _ = writeln!(s, "{:e} {:e} {:e}", v[0], v[1], v[2]);
            }
        }
        for (name, vals) in &snap.tensors {
            if vals.len() != n {
                return Err(wrong(name));
            }
            let _ = writeln!(s, "TENSORS {} double", array_name(name, k));
            for m in vals {
                for row in m {
                    let _ = writeln!(s, "{:e} {:e} {:e}", row[0], row[1], row[2]);
                }
            }
        }
    }
    Ok(s)
}

/// Writes a snapshot set as one legacy ASCII structured-points file. An
/// empty set gives the header alone.
pub fn write_fields(path: &Path, grid: &GridSpec, snaps: &[Snapshot]) -> Result<()> {
    write_text(path, &render_fields(grid, snaps)?)
}

pub fn read_fields(path: &Path) -> Result<FieldFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: String| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, m));
    let mut lines = text.lines();
    let header = |lines: &mut std::str::Lines<'_>, want: &str| -> Result<Vec<String>> {
        let l = lines.next().ok_or_else(|| bad(format!("missing {want}")))?;
        if !l.starts_with(want) {
            return Err(bad(format!("expected {want}, found {l}")));
        }
        Ok(l.split_whitespace().map(String::from).collect())
    };
    header(&mut lines, "# vtk DataFile")?;
    lines.next();
    header(&mut lines, "ASCII")?;
    header(&mut lines, "DATASET STRUCTURED_POINTS")?;
    let triple = |t: &[String]| -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (o, s) in out.iter_mut().zip(t[1..].iter()) {
            *o = s.parse().map_err(|_| bad(format!("bad number {s}")))?;
        }
        Ok(out)
    };
    let d = triple(&header(&mut lines, "DIMENSIONS")?)?;
    let spacing = triple(&header(&mut lines, "SPACING")?)?;
    let origin = triple(&header(&mut lines, "ORIGIN")?)?;
    let grid = GridSpec { dims: [d[0] as usize, d[1] as usize, d[2] as usize], spacing, origin };
    let rest: Vec<&str> = lines.flat_map(|l| l.split_whitespace()).collect();
    let mut pos = 0;
    let mut next = || -> Result<&str> {
        let t = rest.get(pos).copied().ok_or_else(|| bad("unexpected end of file".into()))?;
        pos += 1;
        Ok(t)
    };
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s}")));
    let mut times = Vec::new();
    let mut arrays = Vec::new();
    let n = grid.points();
    while let Ok(tok) = next() {
        match tok {
            "FIELD" => {
                next()?;
                next()?;
                next()?;
                next()?;
                let m: usize = next()?.parse().map_err(|_| bad("bad tuple count".into()))?;
                next()?;
                for _ in 0..m {
                    times.push(num(next()?)?);
                }
            }
            "POINT_DATA" => {
                next()?;
            }
            "SCALARS" | "VECTORS" | "TENSORS" => {
                let kind = match tok {
                    "SCALARS" => ArrayKind::Scalars,
                    "VECTORS" => ArrayKind::Vectors,
                    _ => ArrayKind::Tensors,
                };
                let name = next()?.to_string();
                next()?;
                if kind == ArrayKind::Scalars {
                    next()?;
                    next()?;
                    next()?;
                }
                let values = (0..n * kind.components()).map(|_| next().and_then(num)).collect::<Result<Vec<f64>>>()?;
                arrays.push(FieldArray { name, kind, values });
            }
            other => return Err(bad(format!("unexpected token {other}"))),
        }
    }
    Ok(FieldFile { grid, times, arrays })
}

/// Grid of the cell centres of a coupled run in reference coordinates.
pub fn coupled_grid(p: &CoupledProblem) -> GridSpec {
    let hx = p.period() / p.nx() as f64;
    let hz = p.height / p.nz as f64;
    GridSpec { dims: [p.nx(), p.nz, 1], spacing: [hx, hz, 1.0], origin: [0.0, 0.5 * hz, 0.0] }
}

/// Cell-centre fields of a coupled state: physical height, number density,
/// pressure, velocity and polymer stress.
pub fn coupled_snapshot(p: &CoupledProblem, s: &CoupledState) -> Result<Snapshot> {
    let mesh = p.mesh(&s.shell.eta)?;
    let ops = StaggeredOps::new(&mesh);
    let lay = p.layout;
    let (nx, nz) = (lay.nx, lay.nz);
    let u = ops.velocity(&s.fluid.v);
    let mut vel = vec![[0.0; 3]; lay.ncells()];
    let mut height = vec![0.0; lay.ncells()];
    for j in 0..nz {
        for i in 0..nx {
            let c = mesh.cell(i, j);
            let ux = 0.5 * (u[lay.f(lay.wrap(i as isize - 1), j)] + u[lay.f(i, j)]);
            let below = if j == 0 { 0.0 } else { u[lay.w(i, j)] };
            let uz = 0.5 * (below + u[lay.w(i, j + 1)]);
            vel[c] = [ux, uz, 0.0];
            height[c] = mesh.center(i, j)[1];
        }
    }
    let xi = marginalize(&s.psi, &p.fp);
    let stress = kramers_stress(&s.psi, &xi.xi, &p.fp);
    let tensors = stress.total.iter().map(|t| [[t[0][0], t[0][1], 0.0], [t[1][0], t[1][1], 0.0], [0.0, 0.0, 0.0]]).collect();
    Ok(Snapshot {
        t: s.t,
        scalars: vec![("z".into(), height), ("xi".into(), xi.xi), ("pressure".into(), s.fluid.p.clone())],
        vectors: vec![("velocity".into(), vel)],
        tensors: vec![("stress".into(), tensors)],
    })
}

/// Outcome of a run, written next to its tables.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    pub category: String,
    pub message: String,
    pub steps: usize,
    pub t_final: f64,
    #[serde(serialize_with = "details_table")]
    pub details: Vec<(String, f64)>,
}

// keeps the insertion order of the details
fn details_table<S: serde::Serializer>(d: &[(String, f64)], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut m = s.serialize_map(Some(d.len()))?;
    for (k, v) in d {
        m.serialize_entry(k, v)?;
    }
    m.end()
}

impl RunSummary {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        write_text(path, &text)
    }
}
