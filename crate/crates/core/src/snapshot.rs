//! Field snapshots: a short text header followed by raw little-endian f64
//! payload, one block per field component in row-major interior order.
//!
//! ```text
//! CRYSTALSIM-SNAPSHOT 1
//! dim 2
//! extents 120 104 1
//! dx 0.2
//! time 12.5
//! step 2500
//! byte_order little
//! float_bits 64
//! meta heat_added 1.5e-3
//! field phi
//! field U
//! payload_bytes 199680
//! END
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, SimError};
use crate::grid::{Boundary, CellTag, Field, Grid, TagMap};

const MAGIC: &str = "CRYSTALSIM-SNAPSHOT 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dim: usize,
    pub extents: [usize; 3],
    /// mm
    pub dx: f64,
    /// s
    pub time: f64,
    pub step: u64,
    pub meta: BTreeMap<String, f64>,
    /// Interior values of one component each.
    pub fields: Vec<(String, Vec<f64>)>,
}

impl Snapshot {
    pub fn new(grid: Grid, dx: f64, time: f64, step: u64) -> Self {
        Snapshot {
            dim: grid.dim(),
            extents: grid.extents(),
            dx,
            time,
            step,
            meta: BTreeMap::new(),
            fields: Vec::new(),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim, self.extents)
    }

    fn cells(&self) -> usize {
        self.extents.iter().take(self.dim).product()
    }

    /// Adds every component of `f`; multi-component fields get `name.c`.
    pub fn push(&mut self, name: &str, f: &Field) {
        if f.comps() == 1 {
            self.fields.push((name.to_string(), f.interior_values(0)));
        } else {
            for c in 0..f.comps() {
                self.fields.push((format!("{name}.{c}"), f.interior_values(c)));
            }
        }
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| SimError::Snapshot(format!("no field `{name}`")))
    }

    /// Writes the interior of `out` (all components) from the stored
    /// blocks; halo values are left untouched.
    pub fn fill(&self, name: &str, out: &mut Field) -> Result<()> {
        let g = out.grid();
        if g.extents() != self.extents || g.dim() != self.dim {
            return Err(SimError::Snapshot("grid mismatch".into()));
        }
        let comps = out.comps();
        for c in 0..comps {
            let key = if comps == 1 { name.to_string() } else { format!("{name}.{c}") };
            let vals = self.values(&key)?;
            for (n, idx) in g.interior().enumerate() {
                out.cell_mut(idx)[c] = vals[n];
            }
        }
        Ok(())
    }

    pub fn field(&self, name: &str) -> Result<Field> {
        let g = self.grid()?;
        let comps = if self.values(name).is_ok() {
            1
        } else {
            self.fields.iter().filter(|(n, _)| n.starts_with(&format!("{name}."))).count()
        };
        if comps == 0 {
            return Err(SimError::Snapshot(format!("no field `{name}`")));
        }
        let mut f = Field::new(g, comps, 0.0);
        self.fill(name, &mut f)?;
        Ok(f)
    }

    /// Cell tags from the `tags` field; halos are rebuilt as closed.
    pub fn tag_map(&self) -> Result<TagMap> {
        let g = self.grid()?;
        let codes = self.values("tags")?;
        let mut tags = TagMap::new(g, [Boundary::Closed; 3]);
        for (n, idx) in g.interior().enumerate() {
            let code = codes[n];
            let tag = (code.fract() == 0.0 && (0.0..=255.0).contains(&code))
                .then(|| CellTag::from_code(code as u8))
                .flatten()
                .ok_or_else(|| SimError::Snapshot(format!("bad cell tag code {code}")))?;
            let [i, j, k] = g.coords(idx).unwrap_or([0; 3]);
            tags.set(i, j, k, tag);
        }
        tags.refresh_halo();
        Ok(tags)
    }

    fn payload_bytes(&self) -> usize {
        self.fields.len() * self.cells() * 8
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.cells();
        for (name, v) in &self.fields {
            if v.len() != n {
                return Err(SimError::Snapshot(format!("field `{name}` has {} values, grid has {n}", v.len())));
            }
            if name.contains(char::is_whitespace) || name.is_empty() {
                return Err(SimError::Snapshot(format!("bad field name `{name}`")));
            }
        }
        let mut header = Vec::new();
        self.write_header(&mut header, self.payload_bytes())?;
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(n * 8);
        for (_, v) in &self.fields {
            buf.clear();
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes through a temporary file and renames, so a failed write never
    /// leaves a truncated snapshot under `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("partial");
        let res = (|| {
            let file = File::create(&tmp)?;
            self.write_to(BufWriter::new(&file))?;
            file.sync_all()?;
            let len = std::fs::metadata(&tmp)?.len();
            let header = self.header_len();
            if len != (header + self.payload_bytes()) as u64 {
                return Err(SimError::Snapshot(format!("short write: {len} bytes on disk")));
            }
            std::fs::rename(&tmp, path)?;
            Ok(())
        })();
        if res.is_err() {
            let _ = std::fs::remove_file(&tmp);
        }
        res
    }

    fn header_len(&self) -> usize {
        let mut out = Vec::new();
        let _ = self.write_header(&mut out, self.payload_bytes());
        out.len()
    }

    fn write_header(&self, w: &mut Vec<u8>, payload: usize) -> std::io::Result<()> {
        let [nx, ny, nz] = self.extents;
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "dim {}", self.dim)?;
        writeln!(w, "extents {nx} {ny} {nz}")?;
        writeln!(w, "dx {}", self.dx)?;
        writeln!(w, "time {}", self.time)?;
        writeln!(w, "step {}", self.step)?;
        writeln!(w, "byte_order little")?;
        writeln!(w, "float_bits 64")?;
        for (k, v) in &self.meta {
            writeln!(w, "meta {k} {v}")?;
        }
        for (name, _) in &self.fields {
            writeln!(w, "field {name}")?;
        }
        writeln!(w, "payload_bytes {payload}")?;
        writeln!(w, "END")
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let bad = |m: String| SimError::Snapshot(m);
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(bad("not a snapshot file".into()));
        }
        let mut snap = Snapshot {
            dim: 0,
            extents: [1; 3],
            dx: 0.0,
            time: 0.0,
            step: 0,
            meta: BTreeMap::new(),
            fields: Vec::new(),
        };
        let mut payload = None;
        let mut names = Vec::new();
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(bad("header ends before END".into()));
            }
            let l = line.trim_end();
            if l == "END" {
                break;
            }
            let mut parts = l.split_whitespace();
            let key = parts.next().unwrap_or("");
            let rest: Vec<&str> = parts.collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number in `{l}`")));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad integer in `{l}`")));
            match (key, rest.as_slice()) {
                ("dim", [d]) => snap.dim = int(d)?,
                ("extents", [a, b, c]) => snap.extents = [int(a)?, int(b)?, int(c)?],
                ("dx", [v]) => snap.dx = num(v)?,
                ("time", [v]) => snap.time = num(v)?,
                ("step", [v]) => snap.step = int(v)? as u64,
                ("byte_order", ["little"]) => {}
                ("float_bits", ["64"]) => {}
                ("meta", [k, v]) => {
                    snap.meta.insert(k.to_string(), num(v)?);
                }
                ("field", [n]) => names.push(n.to_string()),
                ("payload_bytes", [v]) => payload = Some(int(v)?),
                _ => return Err(bad(format!("unrecognised header line `{l}`"))),
            }
        }
        snap.grid()?;
        let payload = payload.ok_or_else(|| bad("missing payload_bytes".into()))?;
        let n = snap.cells();
        if payload != names.len() * n * 8 {
            return Err(bad(format!("payload_bytes {payload} disagrees with {} fields of {n} cells", names.len())));
        }
        let mut bytes = Vec::with_capacity(payload);
        r.read_to_end(&mut bytes)?;
        if bytes.len() != payload {
            return Err(bad(format!("payload is {} bytes, header says {payload}", bytes.len())));
        }
        for (f, name) in names.into_iter().enumerate() {
            let block = &bytes[f * n * 8..(f + 1) * n * 8];
            let v = block
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap_or([0; 8])))
                .collect();
            snap.fields.push((name, v));
        }
        Ok(snap)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }
}
