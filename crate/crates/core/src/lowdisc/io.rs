//! Point-set CSV and the generating-vector cache file.
//!
//! Point CSV: header `x1,...,xd`, one row per point, every value written with
//! 17 significant digits (`{:.16e}`), `\n` line ends.
//!
//! Vector cache: one vector per line, `n d h1 h2 ... hd`, whitespace
//! separated. Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{GeneratingVector, PointSet, Provenance};

pub fn write_points_csv<W: Write>(ps: &PointSet, mut out: W) -> io::Result<()> {
    let header: Vec<String> = (1..=ps.dim()).map(|k| format!("x{k}")).collect();
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for p in ps.iter() {
        line.clear();
        for (k, v) in p.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn save_points_csv(ps: &PointSet, path: &Path) -> Result<()> {
    let file = io::BufWriter::new(fs::File::create(path)?);
    write_points_csv(ps, file)?;
    Ok(())
}

pub fn read_points_csv(path: &Path) -> Result<PointSet> {
    let text = fs::read_to_string(path)?;
    let parse_err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?;
    let dim = header.split(',').count();
    let mut coords = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != dim {
            return Err(parse_err(i + 1, format!("expected {dim} fields, found {}", row.len())));
        }
        for f in row {
            coords.push(f.trim().parse::<f64>().map_err(|e| parse_err(i + 1, e.to_string()))?);
        }
    }
    PointSet::new(dim, coords, Provenance::Mapped, None)
}

/// Generating vectors keyed by `(n, d)`, in file order.
#[derive(Debug, Clone, Default)]
pub struct VectorCache {
    entries: Vec<GeneratingVector>,
}

impl VectorCache {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { path: origin.to_path_buf(), line: i + 1, msg };
            let nums = line
                .split_whitespace()
                .map(|t| t.parse::<u64>().map_err(|e| err(format!("`{t}`: {e}"))))
                .collect::<Result<Vec<u64>>>()?;
            if nums.len() < 3 {
                return Err(err("expected `n d h1 ... hd`".into()));
            }
            let (n, d) = (nums[0], nums[1] as usize);
            if nums.len() != d + 2 {
                return Err(err(format!("declared d = {d} but found {} multipliers", nums.len() - 2)));
            }
            let gv = GeneratingVector::new(n, nums[2..].to_vec()).map_err(|e| err(e.to_string()))?;
            entries.push(gv);
        }
        Ok(Self { entries })
    }

    /// Loads a cache file; a missing file is an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        match fs::read_to_string(path) {
            Ok(text) => Self::parse(&text, path),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn get(&self, n: u64, d: usize) -> Option<&GeneratingVector> {
        self.entries.iter().find(|gv| gv.n() == n && gv.dim() == d)
    }

    pub fn entries(&self) -> &[GeneratingVector] {
        &self.entries
    }

    /// Appends `gv` to the file at `path` unless an entry with the same
    /// `(n, d)` is already present. Returns whether a line was written.
    pub fn append(path: &Path, gv: &GeneratingVector) -> Result<bool> {
        let cache = Self::load(path)?;
        if cache.get(gv.n(), gv.dim()).is_some() {
            return Ok(false);
        }
        let needs_newline = fs::read(path)
            .map(|b| !b.is_empty() && !b.ends_with(b"\n"))
            .unwrap_or(false);
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
        if needs_newline {
            f.write_all(b"\n")?;
        }
        writeln!(f, "{}", format_vector_line(gv))?;
        Ok(true)
    }
}

pub fn format_vector_line(gv: &GeneratingVector) -> String {
    let mut s = format!("{} {}", gv.n(), gv.dim());
    for h in gv.h() {
        s.push_str(&format!(" {h}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowdisc::lattice_points;

    #[test]
    fn csv_layout() {
        let gv = GeneratingVector::new(5, vec![1, 2]).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&lattice_points(&gv), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x1,x2"));
        assert_eq!(lines.next(), Some("1.0000000000000001e-1,2.9999999999999999e-1"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let ps = crate::lowdisc::baseline_sample(crate::lowdisc::BaselineKind::UniformRandom, 20, 3, 1).unwrap();
        save_points_csv(&ps, &path).unwrap();
        assert_eq!(read_points_csv(&path).unwrap().as_flat(), ps.as_flat());
    }

    #[test]
    fn cache_parse_and_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        std::fs::write(&path, "# comment\n7 2 1 3\n").unwrap();
        let gv = GeneratingVector::new(11, vec![1, 2, 4]).unwrap();
        assert!(VectorCache::append(&path, &gv).unwrap());
        assert!(!VectorCache::append(&path, &gv).unwrap());
        let cache = VectorCache::load(&path).unwrap();
        assert_eq!(cache.entries().len(), 2);
        assert_eq!(cache.get(7, 2).unwrap().h(), &[1, 3]);
        assert_eq!(cache.get(11, 3), Some(&gv));
        assert!(cache.get(11, 2).is_none());
    }

    #[test]
    fn cache_reports_bad_lines() {
        let err = VectorCache::parse("7 2 1 3\n7 3 1 3\n", Path::new("v.txt")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(VectorCache::parse("8 2 1 2\n", Path::new("v.txt")).is_err());
    }
}
