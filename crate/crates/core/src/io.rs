//! CSV formats: event logs, daily volumes and load series.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::arrivals::DailyVolumeModel;
use crate::calendar::{Calendar, Slot};
use crate::error::{Error, Result};
use crate::parcel::{EventLog, ParcelRecord, StatusId};

pub const EVENT_HEADER: [&str; 6] = [
    "parcel_id",
    "retailer",
    "carrier",
    "pup",
    "status",
    "entry_iso8601",
];
pub const VOLUME_HEADER: [&str; 3] = ["date", "carrier", "count"];
pub const LOAD_HEADER: [&str; 2] = ["k", "L"];

const DATETIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

fn parse_error(row: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        row,
        reason: reason.into(),
    }
}

/// Accepts `YYYY-MM-DDTHH:MM[:SS]`, a space instead of `T`, or RFC 3339 with an offset
/// (taken as local time).
pub fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    for fmt in [DATETIME_FORMAT, "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    DateTime::parse_from_rfc3339(s).ok().map(|d| d.naive_local())
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(|e| parse_error(1, e.to_string()))?;
    if header.is_empty() {
        return Err(Error::EmptyLog);
    }
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(parse_error(
            1,
            format!("expected header {}, got {}", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn reader(input: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input)
}

/// Reads an event log with one row per observed status entry.
///
/// Rows are numbered from 1 at the header. The cutoff is the latest event.
pub fn read_event_log(input: impl Read, calendar: &Calendar) -> Result<EventLog> {
    let mut rd = reader(input);
    check_header(&mut rd, &EVENT_HEADER)?;
    struct Partial {
        retailer: Option<String>,
        carrier: String,
        pup: String,
        entries: BTreeMap<StatusId, Slot>,
        row: usize,
    }
    let mut order = Vec::new();
    let mut parcels: BTreeMap<String, Partial> = BTreeMap::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| parse_error(row, e.to_string()))?;
        if rec.len() != EVENT_HEADER.len() {
            return Err(parse_error(
                row,
                format!("expected {} fields, got {}", EVENT_HEADER.len(), rec.len()),
            ));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(parse_error(row, "empty parcel_id"));
        }
        let retailer = (!rec[1].is_empty()).then(|| rec[1].to_string());
        let status: StatusId = rec[4]
            .parse()
            .map_err(|_| parse_error(row, format!("bad status {:?}", &rec[4])))?;
        let at = parse_datetime(&rec[5])
            .ok_or_else(|| parse_error(row, format!("bad timestamp {:?}", &rec[5])))?;
        let p = parcels.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Partial {
                retailer: retailer.clone(),
                carrier: rec[2].to_string(),
                pup: rec[3].to_string(),
                entries: BTreeMap::new(),
                row,
            }
        });
        if p.retailer != retailer || p.carrier != rec[2] || p.pup != rec[3] {
            return Err(parse_error(
                row,
                format!("parcel {id} changes retailer, carrier or pup"),
            ));
        }
        if p.entries.insert(status, calendar.slot_of(at)).is_some() {
            return Err(parse_error(row, format!("parcel {id} enters status {status} twice")));
        }
    }
    if order.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut rows = Vec::with_capacity(order.len());
    for id in order {
        let p = parcels.remove(&id).expect("recorded");
        let rec = ParcelRecord::new(id, p.retailer, p.carrier, p.pup, p.entries)
            .map_err(|e| parse_error(p.row, e.to_string()))?;
        rows.push(rec);
    }
    Ok(EventLog::from_rows(rows))
}

pub fn write_event_log(out: impl Write, log: &EventLog, calendar: &Calendar) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_HEADER)?;
    for r in log.rows() {
        for (status, at) in r.entries() {
            w.write_record([
                r.id.as_str(),
                r.retailer.as_deref().unwrap_or(""),
                r.carrier.as_str(),
                r.pup.as_str(),
                &status.to_string(),
                &calendar.datetime_of(*at).format(DATETIME_FORMAT).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `date, carrier, count` rows; days missing between the first and last date are zero.
pub fn read_daily_volumes(input: impl Read) -> Result<DailyVolumeModel> {
    let mut rd = reader(input);
    check_header(&mut rd, &VOLUME_HEADER)?;
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| parse_error(row, e.to_string()))?;
        if rec.len() != 3 {
            return Err(parse_error(row, format!("expected 3 fields, got {}", rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|_| parse_error(row, format!("bad date {:?}", &rec[0])))?;
        let count: f64 = rec[2]
            .parse()
            .ok()
            .filter(|c: &f64| c.is_finite() && *c >= 0.0)
            .ok_or_else(|| parse_error(row, format!("bad count {:?}", &rec[2])))?;
        rows.push((date, rec[1].to_string(), count));
    }
    let (Some(start), Some(end)) = (
        rows.iter().map(|r| r.0).min(),
        rows.iter().map(|r| r.0).max(),
    ) else {
        return Err(Error::EmptyLog);
    };
    Ok(DailyVolumeModel::from_daily_counts(start, end, rows))
}

pub fn write_daily_volumes(out: impl Write, model: &DailyVolumeModel) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VOLUME_HEADER)?;
    for (date, carrier, count) in model.rows() {
        w.write_record([date.to_string(), carrier, count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Load series as `k, L` rows starting at slot 0.
pub fn write_load_series(out: impl Write, load: &[u32]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOAD_HEADER)?;
    for (k, l) in load.iter().enumerate() {
        w.write_record([k.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `k, L` rows; slots must be consecutive from 0.
pub fn read_load_series(input: impl Read) -> Result<Vec<u32>> {
    let mut rd = reader(input);
    check_header(&mut rd, &LOAD_HEADER)?;
    let mut load = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| parse_error(row, e.to_string()))?;
        let k: usize = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_error(row, "bad slot"))?;
        if k != load.len() {
            return Err(parse_error(row, format!("expected slot {}, got {k}", load.len())));
        }
        let l: u32 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_error(row, "bad load"))?;
        load.push(l);
    }
    Ok(load)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal() -> Calendar {
        Calendar::hourly(NaiveDate::from_ymd_opt(2024, 1, 1).unwrap())
    }

    const LOG: &str = "parcel_id,retailer,carrier,pup,status,entry_iso8601
p1,r1,c1,pupA,2,2024-01-01T18:00:00
p1,r1,c1,pupA,3,2024-01-02T10:00:00
p2,,c2,pupA,2,2024-01-02T18:30:00
p1,r1,c1,pupA,4,2024-01-02T13:00:00
";

    #[test]
    fn reads_and_groups_rows() {
        let log = read_event_log(LOG.as_bytes(), &cal()).unwrap();
        assert_eq!(log.len(), 2);
        let p1 = &log.rows()[0];
        assert_eq!(p1.entry(2), Some(18));
        assert_eq!(p1.entry(3), Some(34));
        assert_eq!(p1.entry(4), Some(37));
        assert_eq!(log.rows()[1].retailer, None);
        assert_eq!(log.rows()[1].entry(2), Some(42));
        assert_eq!(log.cutoff(), 42);
    }

    #[test]
    fn round_trip() {
        let log = read_event_log(LOG.as_bytes(), &cal()).unwrap();
        let mut buf = Vec::new();
        write_event_log(&mut buf, &log, &cal()).unwrap();
        let again = read_event_log(buf.as_slice(), &cal()).unwrap();
        assert_eq!(again.rows()[0], log.rows()[0]);
        assert_eq!(again.rows()[1].entry(2), Some(42));
    }

    #[test]
    fn errors_name_the_row() {
        let bad = "parcel_id,retailer,carrier,pup,status,entry_iso8601
p1,r1,c1,pupA,2,2024-01-01T18:00:00
p1,r1,c1,pupA,x,2024-01-02T10:00:00
";
        match read_event_log(bad.as_bytes(), &cal()) {
            Err(Error::Parse { row: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        let backwards = "parcel_id,retailer,carrier,pup,status,entry_iso8601
p1,r1,c1,pupA,2,2024-01-02T18:00:00
p1,r1,c1,pupA,3,2024-01-02T10:00:00
";
        assert!(matches!(
            read_event_log(backwards.as_bytes(), &cal()),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(matches!(
            read_event_log("a,b\n1,2\n".as_bytes(), &cal()),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn empty_log() {
        assert!(matches!(
            read_event_log("parcel_id,retailer,carrier,pup,status,entry_iso8601\n".as_bytes(), &cal()),
            Err(Error::EmptyLog)
        ));
        assert!(matches!(read_event_log("".as_bytes(), &cal()), Err(Error::EmptyLog)));
    }

    #[test]
    fn volumes_and_loads_round_trip() {
        let csv = "date,carrier,count\n2024-01-01,c1,3\n2024-01-03,c1,5\n2024-01-02,c2,1\n";
        let m = read_daily_volumes(csv.as_bytes()).unwrap();
        assert_eq!(m.series()["c1"], vec![3.0, 0.0, 5.0]);
        assert_eq!(m.series()["c2"], vec![0.0, 1.0, 0.0]);
        let mut buf = Vec::new();
        write_daily_volumes(&mut buf, &m).unwrap();
        assert_eq!(read_daily_volumes(buf.as_slice()).unwrap(), m);

        let mut buf = Vec::new();
        write_load_series(&mut buf, &[0, 2, 1]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "k,L\n0,0\n1,2\n2,1\n");
        assert_eq!(read_load_series(buf.as_slice()).unwrap(), vec![0, 2, 1]);
    }
}
