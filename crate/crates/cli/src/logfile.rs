//! CSV form of a simulation log. Floats are written with 17 significant
//! digits so that reading a log back reproduces every record exactly.

use std::io::{Read, Write};

use rta_core::qp::QpStatus;
use rta_core::scenario::{StepRecord, NUM_PHI};

use crate::CliError;

pub const HEADER: [&str; 23] = [
    "time_s",
    "deputy",
    "x",
    "y",
    "z",
    "xdot",
    "ydot",
    "zdot",
    "udes_x",
    "udes_y",
    "udes_z",
    "uact_x",
    "uact_y",
    "uact_z",
    "intervening",
    "phi_1",
    "phi_2",
    "phi_3",
    "phi_4",
    "phi_5",
    "phi_6",
    "phi_7",
    "qp_status",
];

/// Status text for records without a QP (Simplex filters or RTA disabled).
pub const NO_QP: &str = "none";

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn record_fields(r: &StepRecord) -> Vec<String> {
    let mut out = Vec::with_capacity(HEADER.len());
    out.push(float(r.time));
    out.push(r.deputy.to_string());
    out.extend(r.state.iter().map(|v| float(*v)));
    out.extend(r.u_des.iter().map(|v| float(*v)));
    out.extend(r.u_act.iter().map(|v| float(*v)));
    out.push(u8::from(r.intervening).to_string());
    out.extend(r.phi.iter().map(|v| float(*v)));
    out.push(r.qp_status.map_or(NO_QP, |s| s.as_str()).to_string());
    out
}

pub fn write_log<W: Write>(records: &[StepRecord], w: W) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(HEADER)?;
    for r in records {
        wtr.write_record(record_fields(r))?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn parse_err(line: u64, msg: impl Into<String>) -> CliError {
    CliError::LogFormat {
        line,
        msg: msg.into(),
    }
}

fn floats<const K: usize>(rec: &csv::StringRecord, start: usize, line: u64) -> Result<[f64; K], CliError> {
    let mut out = [0.0; K];
    for (k, v) in out.iter_mut().enumerate() {
        let col = start + k;
        *v = rec[col].parse().map_err(|_| {
            parse_err(
                line,
                format!("column {}: `{}` is not a number", HEADER[col], &rec[col]),
            )
        })?;
    }
    Ok(out)
}

pub fn read_log<R: Read>(r: R) -> Result<Vec<StepRecord>, CliError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(parse_err(1, "unexpected header"));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != HEADER.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, got {}", HEADER.len(), rec.len()),
            ));
        }
        let [time] = floats::<1>(&rec, 0, line)?;
        let deputy = rec[1]
            .parse()
            .map_err(|_| parse_err(line, format!("column deputy: `{}`", &rec[1])))?;
        let intervening = match &rec[14] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(line, format!("column intervening: `{other}`"))),
        };
        let qp_status = match &rec[22] {
            NO_QP => None,
            s => Some(s.parse::<QpStatus>().map_err(|e| parse_err(line, e))?),
        };
        out.push(StepRecord {
            time,
            deputy,
            state: floats::<6>(&rec, 2, line)?,
            u_des: floats::<3>(&rec, 8, line)?,
            u_act: floats::<3>(&rec, 11, line)?,
            intervening,
            phi: floats::<NUM_PHI>(&rec, 15, line)?,
            qp_status,
        });
    }
    Ok(out)
}
