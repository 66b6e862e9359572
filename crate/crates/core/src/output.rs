//! Result files: CSV, JSON and SVG emitters, all written atomically.
//!
//! Every file carries the run seed and a hash of the resolved configuration,
//! in a `#` comment line (CSV), as fields (JSON) or in an XML comment (SVG).

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

/// Provenance stamped into every emitted file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stamp {
    pub seed: u64,
    pub config_hash: String,
}

impl Stamp {
    pub fn new(seed: u64, canonical_config: &str) -> Self {
        Stamp {
            seed,
            config_hash: config_hash(canonical_config),
        }
    }

    pub fn comment(&self) -> String {
        format!("seed={} config_hash={}", self.seed, self.config_hash)
    }
}

/// First 16 hex digits of the SHA-256 of the canonical configuration text.
pub fn config_hash(canonical: &str) -> String {
    digest_hex(canonical.as_bytes())
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so a failed write leaves no partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Pretty JSON with the stamp fields merged in at the top level.
pub fn json_document<T: Serialize>(stamp: &Stamp, body: &T) -> serde_json::Result<String> {
    let mut value = serde_json::to_value(body)?;
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("seed".into(), stamp.seed.into());
        map.insert("config_hash".into(), stamp.config_hash.clone().into());
    }
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

/// One row of an angle scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub delta: f64,
    pub e_analytic: f64,
    pub e_mc: Option<f64>,
    pub std_err: Option<f64>,
    pub n_events: u64,
}

pub const SCAN_COLUMNS: [&str; 5] = ["delta_rad", "E_analytic", "E_mc", "std_err", "n_events"];

/// Scan table. Analytic rows leave `E_mc` and `std_err` empty.
pub fn scan_csv(stamp: &Stamp, rows: &[ScanRow]) -> csv::Result<Vec<u8>> {
    let mut out = format!("# {}\n", stamp.comment()).into_bytes();
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut out);
        w.write_record(SCAN_COLUMNS)?;
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        for r in rows {
            w.write_record([
                format_float(r.delta),
                format_float(r.e_analytic),
                opt(r.e_mc),
                opt(r.std_err),
                r.n_events.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(out)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const Y_RANGE: f64 = 1.1;

/// Correlation plot: analytic curve as a polyline, Monte Carlo points with
/// ±1 standard-error bars.
pub fn scan_svg(stamp: &Stamp, rows: &[ScanRow], curve: &[(f64, f64)]) -> String {
    let (x0, x1) = curve
        .iter()
        .map(|p| p.0)
        .chain(rows.iter().map(|r| r.delta))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| MARGIN + (x - x0) / span * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT / 2.0 - y / Y_RANGE * (HEIGHT / 2.0 - MARGIN);

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(s, "<!-- {} -->", stamp.comment());
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for y in [-1.0, 0.0, 1.0] {
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#bbb\" stroke-width=\"0.5\"/>",
            MARGIN,
            py(y),
            WIDTH - MARGIN,
            py(y)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{y}</text>",
            MARGIN - 6.0,
            py(y) + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">delta (rad) {:.3} to {:.3}</text>",
        WIDTH / 2.0,
        HEIGHT - 12.0,
        x0,
        x1
    );

    let points: Vec<String> = curve.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    let _ = writeln!(
        s,
        "<polyline fill=\"none\" stroke=\"#1f4e9a\" stroke-width=\"1.5\" points=\"{}\"/>",
        points.join(" ")
    );

    for r in rows {
        let Some(e) = r.e_mc else { continue };
        let x = px(r.delta);
        if let Some(se) = r.std_err {
            let _ = writeln!(
                s,
                "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#c0392b\" stroke-width=\"1\"/>",
                py(e - se),
                py(e + se)
            );
        }
        let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"#c0392b\"/>", py(e));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stamp() -> Stamp {
        Stamp::new(7, "seed=7\n")
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0, std::f64::consts::PI, 1e-300, -2.0 / 3.0] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_float(-1.0), "-1.0000000000000000e0");
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        assert_eq!(config_hash("a=1\n"), config_hash("a=1\n"));
        assert_ne!(config_hash("a=1\n"), config_hash("a=2\n"));
        assert_eq!(config_hash("").len(), 16);
    }

    #[test]
    fn csv_layout() {
        let rows = [
            ScanRow {
                delta: 0.0,
                e_analytic: -1.0,
                e_mc: None,
                std_err: None,
                n_events: 0,
            },
            ScanRow {
                delta: 0.5,
                e_analytic: -0.5,
                e_mc: Some(-0.49),
                std_err: Some(0.01),
                n_events: 100,
            },
        ];
        let text = String::from_utf8(scan_csv(&stamp(), &rows).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# seed=7 config_hash="));
        assert_eq!(lines[1], "delta_rad,E_analytic,E_mc,std_err,n_events");
        assert_eq!(lines[2], "0.0000000000000000e0,-1.0000000000000000e0,,,0");
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn json_carries_stamp() {
        #[derive(Serialize)]
        struct Body {
            x: f64,
        }
        let doc = json_document(&stamp(), &Body { x: 1.5 }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["seed"], 7);
        assert_eq!(v["x"], 1.5);
        assert_eq!(v["config_hash"].as_str().unwrap().len(), 16);
    }

    #[test]
    fn atomic_write_replaces_and_fails_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        let missing = dir.path().join("no_such_dir").join("out.csv");
        assert!(write_atomic(&missing, b"x").is_err());
        assert!(!missing.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn svg_has_curve_and_bars() {
        let rows = [ScanRow {
            delta: 0.5,
            e_analytic: -0.5,
            e_mc: Some(-0.49),
            std_err: Some(0.01),
            n_events: 100,
        }];
        let curve = [(0.0, -1.0), (1.0, 0.0)];
        let svg = scan_svg(&stamp(), &rows, &curve);
        assert!(svg.contains("<!-- seed=7 config_hash="));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
