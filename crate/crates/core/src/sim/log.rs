//! Uniformly sampled run records and their CSV form.

use std::io::{Read, Write};

use super::SimError;
use crate::esrg::EsState;
use crate::geometry::Vec3;

pub const CSV_COLUMNS: [&str; 19] = [
    "t", "px", "py", "pz", "vx", "vy", "vz", "ref_xi", "ref_yi", "ref_zi", "ref_xp", "ref_yp", "hm_norm",
    "yt_raw", "yt_filt", "alpha", "cx", "cy", "dist_centre_opt",
];

/// One logged sample. Positions and velocities are inertial unless the name
/// ends in `p` (plane frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub p: [f64; 3],
    pub v: [f64; 3],
    pub ref_i: [f64; 3],
    pub ref_p: [f64; 2],
    pub hm_norm: f64,
    pub yt_raw: f64,
    pub yt_filt: f64,
    pub alpha: f64,
    /// Centre estimate, NaN until a full loiter period of history exists.
    pub centre: [f64; 2],
    pub dist_centre_opt: f64,
}

impl LogRecord {
    fn values(&self) -> [f64; 19] {
        [
            self.t,
            self.p[0],
            self.p[1],
            self.p[2],
            self.v[0],
            self.v[1],
            self.v[2],
            self.ref_i[0],
            self.ref_i[1],
            self.ref_i[2],
            self.ref_p[0],
            self.ref_p[1],
            self.hm_norm,
            self.yt_raw,
            self.yt_filt,
            self.alpha,
            self.centre[0],
            self.centre[1],
            self.dist_centre_opt,
        ]
    }

    fn from_values(v: &[f64]) -> Self {
        Self {
            t: v[0],
            p: [v[1], v[2], v[3]],
            v: [v[4], v[5], v[6]],
            ref_i: [v[7], v[8], v[9]],
            ref_p: [v[10], v[11]],
            hm_norm: v[12],
            yt_raw: v[13],
            yt_filt: v[14],
            alpha: v[15],
            centre: [v[16], v[17]],
            dist_centre_opt: v[18],
        }
    }

    pub fn tracking_error(&self) -> f64 {
        (Vec3::from(self.p) - Vec3::from(self.ref_i)).norm()
    }
}

/// Per-step diagnostics that stay in memory only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instrumentation {
    /// Time at which the conditioned value currently held was sampled.
    pub arva_sample_t: f64,
    pub thrust: f64,
    pub tau: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<LogRecord>,
    /// Aligned with `records`; empty for logs read back from CSV.
    pub instrumentation: Vec<Instrumentation>,
    /// Every reference-generator state, starting with the initial one.
    pub es_trace: Vec<EsState>,
    /// Filtered conditioned value consumed by each reference-generator step.
    pub es_inputs: Vec<f64>,
}

/// C-style `%.9g`.
pub fn format_g9(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const P: i32 = 9;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let decimals = (P - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl RunLog {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS).map_err(csv_err)?;
        for r in &self.records {
            w.write_record(r.values().iter().map(|&x| format_g9(x))).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, SimError> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd.headers().map_err(csv_err)?.clone();
        if header.iter().ne(CSV_COLUMNS.iter().copied()) {
            return Err(SimError::InvalidLog(format!("unexpected header: {}", header.iter().collect::<Vec<_>>().join(","))));
        }
        let mut records = Vec::new();
        for (line, row) in rd.records().enumerate() {
            let row = row.map_err(csv_err)?;
            let vals = row
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| SimError::InvalidLog(format!("row {}: {e}", line + 1)))?;
            if vals.len() != CSV_COLUMNS.len() {
                return Err(SimError::InvalidLog(format!("row {} has {} fields", line + 1, vals.len())));
            }
            records.push(LogRecord::from_values(&vals));
        }
        if records.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(SimError::InvalidLog("time column is not strictly increasing".into()));
        }
        Ok(Self { records, ..Default::default() })
    }
}

fn csv_err(e: csv::Error) -> SimError {
    SimError::InvalidLog(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.004, "0.004"),
            (123.456789012, "123.456789"),
            (-6.1268, "-6.1268"),
            (1e-7, "1e-07"),
            (1.5e-5, "1.5e-05"),
            (0.0001, "0.0001"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (3.605_551_275_463_989, "3.60555128"),
            (f64::NAN, "NaN"),
        ];
        for (x, s) in cases {
            assert_eq!(format_g9(x), s, "{x}");
        }
    }

    #[test]
    fn g9_keeps_nine_significant_digits() {
        for x in [1.0 / 3.0, 2.0f64.sqrt() * 1e5, -std::f64::consts::PI * 1e-6, 7.0e12 / 9.0] {
            let back: f64 = format_g9(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 5e-9, "{x} -> {}", format_g9(x));
        }
    }

    fn sample(t: f64) -> LogRecord {
        LogRecord {
            t,
            p: [t, 2.0, -6.0],
            v: [0.1, 0.2, 0.3],
            ref_i: [t, 2.0, -6.1],
            ref_p: [1.0, 2.0],
            hm_norm: 1e-5,
            yt_raw: 40.0,
            yt_filt: 41.0,
            alpha: 3.0,
            centre: [f64::NAN, f64::NAN],
            dist_centre_opt: f64::NAN,
        }
    }

    #[test]
    fn csv_round_trip() {
        let log = RunLog { records: vec![sample(0.0), sample(0.004), sample(0.008)], ..Default::default() };
        let text = log.to_csv_string();
        assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
        let back = RunLog::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.records.len(), 3);
        assert_eq!(back.records[1].t, 0.004);
        assert!(back.records[2].centre[0].is_nan());
        assert!((back.records[0].tracking_error() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bad_logs_are_rejected() {
        assert!(RunLog::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        let log = RunLog { records: vec![sample(1.0), sample(0.5)], ..Default::default() };
        assert!(RunLog::read_csv(log.to_csv_string().as_bytes()).is_err());
    }
}
