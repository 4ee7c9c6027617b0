//! Text formats: columnar files for profiles and spectra, single-line
//! `key=value` records for reports. Floats use Rust's shortest round-trip
//! exponent form, so writing is deterministic and reading is exact.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::profile::{NodalProfile, Normalization, ProfileMeta, SolverInfo};

pub const PROFILE_FORMAT: &str = "radmorse-profile v1";
pub const SPECTRUM_FORMAT: &str = "radmorse-spectrum v1";
pub const RECORD_FORMAT: &str = "radmorse-record v1";

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn fmt_list(xs: &[f64]) -> String {
    if xs.is_empty() {
        return "-".into();
    }
    xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_f64).collect()
}

fn escape(s: &str) -> String {
    s.replace('%', "%25").replace(' ', "%20").replace('=', "%3D").replace('\n', "%0A")
}

fn unescape(s: &str) -> String {
    s.replace("%0A", "\n").replace("%3D", "=").replace("%20", " ").replace("%25", "%")
}

/// Ordered `key=value` pairs rendered on one line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Record {
    pub fields: Vec<(String, String)>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.push(key, fmt_f64(value))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Parse(format!("missing key {key:?}")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.require(key)?)
    }

    pub fn to_line(&self) -> String {
        self.fields
            .iter()
            .map(|(k, v)| format!("{}={}", escape(k), escape(v)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let mut fields = Vec::new();
        for tok in line.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("token without '=': {tok:?}")))?;
            fields.push((unescape(k), unescape(v)));
        }
        Ok(Self { fields })
    }
}

/// Header lines `# key=value` followed by whitespace-separated columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Columnar {
    pub format: String,
    pub header: Record,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Columnar {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.format);
        for (k, v) in &self.header.fields {
            let _ = writeln!(out, "# {}={}", escape(k), escape(v));
        }
        let _ = writeln!(out, "{}", self.columns.join(" "));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn parse(text: &str, expected_format: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().ok_or_else(|| Error::Parse("empty file".into()))?;
        let format = first
            .strip_prefix("# ")
            .ok_or_else(|| Error::Parse("missing format line".into()))?
            .to_string();
        if format != expected_format {
            return Err(Error::Parse(format!("format {format:?}, expected {expected_format:?}")));
        }
        let mut header = Record::new();
        let mut columns = None;
        let mut rows = Vec::new();
        for line in lines {
            if let Some(h) = line.strip_prefix("# ") {
                let rec = Record::parse_line(h)?;
                header.fields.extend(rec.fields);
            } else if columns.is_none() {
                columns = Some(line.split_whitespace().map(String::from).collect::<Vec<_>>());
            } else if !line.trim().is_empty() {
                let row: Vec<String> = line.split_whitespace().map(String::from).collect();
                let width = columns.as_ref().map_or(0, |c: &Vec<String>| c.len());
                if row.len() != width {
                    return Err(Error::Parse(format!("row has {} fields, expected {width}", row.len())));
                }
                rows.push(row);
            }
        }
        Ok(Self {
            format,
            header,
            columns: columns.ok_or_else(|| Error::Parse("missing column line".into()))?,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse(format!("missing column {name:?}")))
    }
}

pub fn write_profile(p: &NodalProfile) -> String {
    let mut h = Record::new();
    h.push("n", p.meta.n)
        .push_f64("alpha", p.meta.alpha)
        .push_f64("m_eff", p.meta.m_eff)
        .push("m", p.meta.m)
        .push("p", p.meta.p.map_or("-".into(), fmt_f64))
        .push("nonlinearity", &p.meta.nonlinearity)
        .push("odd", p.meta.odd)
        .push("normalization", p.meta.normalization.as_str())
        .push("residual", p.residual_norm.map_or("-".into(), fmt_f64))
        .push("method", if p.info.method.is_empty() { "-" } else { &p.info.method })
        .push_f64("rtol", p.info.rtol)
        .push("steps", p.info.steps)
        .push("rescale", p.info.rescale.map_or("-".into(), fmt_f64))
        .push("defects", fmt_list(&p.info.defects))
        .push("zeros", fmt_list(&p.zeros))
        .push("critical_points", fmt_list(&p.critical_points));
    let rows = (0..p.t.len())
        .map(|i| vec![fmt_f64(p.t[i]), fmt_f64(p.v[i]), fmt_f64(p.dv[i])])
        .collect();
    Columnar {
        format: PROFILE_FORMAT.into(),
        header: h,
        columns: vec!["t".into(), "v".into(), "dv".into()],
        rows,
    }
    .render()
}

fn optional_f64(s: &str) -> Result<Option<f64>> {
    if s == "-" {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

pub fn read_profile(text: &str) -> Result<NodalProfile> {
    let c = Columnar::parse(text, PROFILE_FORMAT)?;
    let h = &c.header;
    let parse_u32 = |k: &str| -> Result<u32> {
        h.require(k)?
            .parse()
            .map_err(|_| Error::Parse(format!("bad integer for {k}")))
    };
    let meta = ProfileMeta {
        n: parse_u32("n")?,
        alpha: h.f64("alpha")?,
        m_eff: h.f64("m_eff")?,
        m: parse_u32("m")?,
        p: optional_f64(h.require("p")?)?,
        nonlinearity: h.require("nonlinearity")?.to_string(),
        odd: h.require("odd")? == "true",
        normalization: Normalization::parse(h.require("normalization")?)
            .ok_or_else(|| Error::Parse("bad normalization".into()))?,
    };
    let method = h.require("method")?;
    let info = SolverInfo {
        method: if method == "-" { String::new() } else { method.to_string() },
        rtol: h.f64("rtol")?,
        steps: h
            .require("steps")?
            .parse()
            .map_err(|_| Error::Parse("bad steps".into()))?,
        rescale: optional_f64(h.require("rescale")?)?,
        defects: parse_list(h.require("defects")?)?,
    };
    let (it, iv, id) = (c.column("t")?, c.column("v")?, c.column("dv")?);
    let mut t = Vec::with_capacity(c.rows.len());
    let mut v = Vec::with_capacity(c.rows.len());
    let mut dv = Vec::with_capacity(c.rows.len());
    for row in &c.rows {
        t.push(parse_f64(&row[it])?);
        v.push(parse_f64(&row[iv])?);
        dv.push(parse_f64(&row[id])?);
    }
    if t.len() < 2 || t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("profile grid must be strictly increasing".into()));
    }
    let zeros = parse_list(h.require("zeros")?)?;
    let crit = parse_list(h.require("critical_points")?)?;
    let mut prof = NodalProfile::with_events(t, v, dv, zeros, crit, meta, info);
    prof.residual_norm = optional_f64(h.require("residual")?)?;
    Ok(prof)
}

/// One eigenvalue line of a spectrum file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    /// `classical`, `singular`, or `matrix-classical` / `matrix-singular`
    /// for oracle values.
    pub source: String,
    pub index: usize,
    pub value: f64,
    /// Sign changes of the eigenfunction; `None` for oracle rows.
    pub nodal_count: Option<usize>,
    pub rayleigh_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFile {
    pub header: Record,
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumFile {
    pub fn values(&self, source: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.source == source).map(|r| r.value).collect()
    }

    pub fn render(&self) -> String {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.source.clone(),
                    r.index.to_string(),
                    fmt_f64(r.value),
                    r.nodal_count.map_or("-".into(), |n| n.to_string()),
                    r.rayleigh_defect.map_or("-".into(), fmt_f64),
                ]
            })
            .collect();
        Columnar {
            format: SPECTRUM_FORMAT.into(),
            header: self.header.clone(),
            columns: ["source", "index", "value", "nodal_count", "rayleigh_defect"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            rows,
        }
        .render()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let c = Columnar::parse(text, SPECTRUM_FORMAT)?;
        let (is, ii, iv, inc, ir) = (
            c.column("source")?,
            c.column("index")?,
            c.column("value")?,
            c.column("nodal_count")?,
            c.column("rayleigh_defect")?,
        );
        let mut rows = Vec::with_capacity(c.rows.len());
        for row in &c.rows {
            let nodal = if row[inc] == "-" {
                None
            } else {
                Some(row[inc].parse().map_err(|_| Error::Parse("bad nodal count".into()))?)
            };
            rows.push(SpectrumRow {
                source: row[is].clone(),
                index: row[ii].parse().map_err(|_| Error::Parse("bad index".into()))?,
                value: parse_f64(&row[iv])?,
                nodal_count: nodal,
                rayleigh_defect: optional_f64(&row[ir])?,
            });
        }
        Ok(Self { header: c.header, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let mut r = Record::new();
        r.push("label", "a b=c%").push_f64("x", 0.1 + 0.2);
        let back = Record::parse_line(&r.to_line()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.f64("x").unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn spectrum_round_trip() {
        let mut h = Record::new();
        h.push("backend", "both");
        let f = SpectrumFile {
            header: h,
            rows: vec![
                SpectrumRow {
                    source: "singular".into(),
                    index: 1,
                    value: -12.345678901234567,
                    nodal_count: Some(0),
                    rayleigh_defect: Some(3e-11),
                },
                SpectrumRow {
                    source: "matrix-singular".into(),
                    index: 1,
                    value: -12.3456789,
                    nodal_count: None,
                    rayleigh_defect: None,
                },
            ],
        };
        let back = SpectrumFile::parse(&f.render()).unwrap();
        assert_eq!(back, f);
        assert!(SpectrumFile::parse("# other v1\nx\n").is_err());
    }
}
