//! File formats: JSON reports, CSV curves and dumps.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use rmtlab_core::SpectralSample;

use crate::error::{Error, Result};

/// A file when a path is given, stdout otherwise.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `<out>.meta.json` next to a CSV artifact.
pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// One CSV row per item, header from the field names.
pub fn write_csv_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct DensityPoint {
    pub lambda: f64,
    pub rho: f64,
}

pub fn write_density_csv<W: Write>(w: W, points: &[DensityPoint]) -> Result<()> {
    write_csv_rows(w, points)
}

/// `# n=..,m=..,seed=..,law=..,tau=..` followed by a `lambda` column.
pub fn write_spectral_sample<W: Write>(mut w: W, sample: &SpectralSample) -> Result<()> {
    writeln!(
        w,
        "# n={},m={},seed={},law={},tau={}",
        sample.n, sample.m, sample.seed, sample.law, sample.tau
    )?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lambda"])?;
    for v in &sample.eigenvalues {
        out.write_record([format!("{v:e}")])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_spectral_sample<R: Read>(r: R) -> Result<SpectralSample> {
    let mut reader = BufReader::new(r);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let header = header
        .trim_end()
        .strip_prefix("# ")
        .ok_or_else(|| Error::Usage("spectral sample CSV lacks its header line".into()))?;
    let field = |rest: &str, key: &str| -> Result<(String, String)> {
        let rest = rest
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| Error::Usage(format!("spectral sample header lacks '{key}'")))?;
        match rest.split_once(',') {
            Some((v, tail)) => Ok((v.to_string(), tail.to_string())),
            None => Ok((rest.to_string(), String::new())),
        }
    };
    let (n, rest) = field(header, "n")?;
    let (m, rest) = field(&rest, "m")?;
    let (seed, rest) = field(&rest, "seed")?;
    let (law, rest) = field(&rest, "law")?;
    // tau specs contain commas; they run to the end of the line
    let tau = rest
        .strip_prefix("tau=")
        .ok_or_else(|| Error::Usage("spectral sample header lacks 'tau'".into()))?
        .to_string();
    let num = |s: &str, what: &str| -> Result<u64> {
        s.parse()
            .map_err(|_| Error::Usage(format!("bad {what} '{s}' in spectral sample header")))
    };
    let n = num(&n, "n")? as usize;
    let m = num(&m, "m")? as usize;
    let seed = num(&seed, "seed")?;

    let mut rdr = csv::Reader::from_reader(reader);
    let mut values = Vec::with_capacity(n);
    for rec in rdr.records() {
        let rec = rec?;
        let v: f64 = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Usage("bad eigenvalue row".into()))?;
        values.push(v);
    }
    if values.len() != n {
        return Err(Error::Usage(format!(
            "header says n={n} but {} eigenvalues follow",
            values.len()
        )));
    }
    Ok(SpectralSample::new(values, m, seed, law, tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_sample_round_trip() {
        let s = SpectralSample::new(vec![2.5, -1e-17, 0.125, 3.0], 3, 99, "lpball:1", "1:0.5,2:0.5");
        let mut buf = Vec::new();
        write_spectral_sample(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# n=4,m=3,seed=99,law=lpball:1,tau=1:0.5,2:0.5\nlambda\n"));
        let back = read_spectral_sample(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_truncated_sample() {
        let text = "# n=3,m=3,seed=1,law=sphere,tau=1:1\nlambda\n1.0\n";
        assert!(read_spectral_sample(text.as_bytes()).is_err());
    }

    #[test]
    fn density_header() {
        let mut buf = Vec::new();
        write_density_csv(&mut buf, &[DensityPoint { lambda: 1.0, rho: 0.5 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "lambda,rho\n1.0,0.5\n");
    }

    #[test]
    fn meta_path_appends() {
        assert_eq!(meta_path(Path::new("out/d.csv")), PathBuf::from("out/d.csv.meta.json"));
    }
}
